//! Rule language for block types and party roles.
//!
//! ```text
//! rule    := target "->" expr
//! expr    := conj ("or" conj)*
//! conj    := unary ("and" unary)*
//! unary   := "not" unary | "(" expr ")" | atom
//! atom    := operand op operand | predicate "(" args ")"
//! op      := "in" | "==" | "!=" | "<" | "<=" | ">" | ">="
//! operand := path | literal | "[" literal ("," literal)* "]"
//! ```
//!
//! Paths start at `block_annot`, a neighbor accessor (`top_blocks`,
//! `bottom_blocks`, `left_blocks`, `right_blocks`, `bottom_right_blocks`),
//! `num_lines`, `zone_v`, `zone_h`, `page` or `block_types`. Literals are bare
//! words (consecutive words join with a space), quoted strings or integers.

use std::collections::BTreeSet;
use std::fmt;

use crate::docmodel::{AnnotationKind, Block, BlockType, Direction, Page, PartyRole};
use crate::error::{Error, Result};

const NEIGHBOR_ROOTS: &[(&str, Direction)] = &[
    ("top_blocks", Direction::Top),
    ("bottom_blocks", Direction::Bottom),
    ("left_blocks", Direction::Left),
    ("right_blocks", Direction::Right),
    ("bottom_right_blocks", Direction::BottomRight),
];
const SCALAR_ROOTS: &[&str] = &["num_lines", "zone_v", "zone_h", "page", "block_types"];
const PREDICATES: &[&str] = &["aligned_with", "content_disjoint", "exists_role", "before_role", "after_role"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    In,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn as_str(&self) -> &'static str {
        match self {
            CmpOp::In => "in",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Path(Vec<String>),
    Literal(String),
    Int(i64),
    List(Vec<String>),
}

/// Line and column (1-based) in the rule source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub enum Atom {
    Compare { left: Operand, op: CmpOp, right: Operand, pos: Pos },
    Predicate { name: String, args: Vec<Operand>, pos: Pos },
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Atom::Compare { left: a, op: o, right: b, .. },
                Atom::Compare { left: c, op: p, right: d, .. },
            ) => a == c && o == p && b == d,
            (Atom::Predicate { name: n, args: a, .. }, Atom::Predicate { name: m, args: b, .. }) => n == m && a == b,
            _ => false,
        }
    }
}

impl Atom {
    pub fn pos(&self) -> Pos {
        match self {
            Atom::Compare { pos, .. } | Atom::Predicate { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Atom(Atom),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub target: String,
    pub condition: Expr,
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Int(i64),
    Arrow,
    Op(CmpOp),
    And,
    Or,
    Not,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("word {w:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Eof => "end of input".into(),
            other => format!("{:?}", other),
        }
    }
}

fn parse_error(pos: Pos, message: impl Into<String>, expected: &[&str]) -> Error {
    Error::Parse {
        line: pos.line,
        column: pos.column,
        message: message.into(),
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

fn lex(text: &str, origin: Pos) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (origin.line, origin.column);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, n) = match two.as_str() {
            "->" => (Tok::Arrow, 2),
            "==" => (Tok::Op(CmpOp::Eq), 2),
            "!=" => (Tok::Op(CmpOp::Ne), 2),
            "<=" => (Tok::Op(CmpOp::Le), 2),
            ">=" => (Tok::Op(CmpOp::Ge), 2),
            _ => match c {
                '<' => (Tok::Op(CmpOp::Lt), 1),
                '>' => (Tok::Op(CmpOp::Gt), 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                ',' => (Tok::Comma, 1),
                '"' => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                        j += 1;
                    }
                    if j >= chars.len() || chars[j] != '"' {
                        return Err(parse_error(pos, "unterminated string", &["\""]));
                    }
                    (Tok::Str(chars[i + 1..j].iter().collect()), j + 1 - i)
                }
                c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let s: String = chars[i..j].iter().collect();
                    let v = s.parse().map_err(|_| parse_error(pos, format!("integer {s} out of range"), &[]))?;
                    (Tok::Int(v), j - i)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || matches!(chars[j], '_' | '.')) {
                        j += 1;
                    }
                    let w: String = chars[i..j].iter().collect();
                    let tok = match w.as_str() {
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        "not" => Tok::Not,
                        "in" => Tok::Op(CmpOp::In),
                        _ => Tok::Word(w),
                    };
                    (tok, j - i)
                }
                other => return Err(parse_error(pos, format!("unexpected character {other:?}"), &[])),
            },
        };
        out.push((tok, pos));
        advance(n, &mut i, &mut col);
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

const OPERAND_START: &[&str] = &["path", "literal", "integer", "["];

fn valid_path(segs: &[String]) -> bool {
    match segs.first().map(String::as_str) {
        Some("block_annot") => matches!(segs.get(1).map(String::as_str), None | Some("data") | Some("keyword")) && segs.len() <= 2,
        Some(root) if NEIGHBOR_ROOTS.iter().any(|(r, _)| *r == root) => segs.len() >= 2 && valid_path(&segs[1..]),
        Some(root) if SCALAR_ROOTS.contains(&root) => segs.len() == 1,
        _ => false,
    }
}

fn is_root(word: &str) -> bool {
    let first = word.split('.').next().unwrap_or("");
    first == "block_annot" || SCALAR_ROOTS.contains(&first) || NEIGHBOR_ROOTS.iter().any(|(r, _)| *r == first)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(parse_error(self.pos(), format!("expected {name}, found {}", self.peek().describe()), &[name]))
        }
    }

    fn rule(&mut self) -> Result<Rule> {
        let mut words = Vec::new();
        while let Tok::Word(w) = self.peek() {
            words.push(w.clone());
            self.bump();
        }
        if words.is_empty() {
            return Err(parse_error(self.pos(), format!("expected rule target, found {}", self.peek().describe()), &["target"]));
        }
        self.expect(Tok::Arrow, "->")?;
        let condition = self.expr()?;
        if *self.peek() != Tok::Eof {
            return Err(parse_error(
                self.pos(),
                format!("unexpected {}", self.peek().describe()),
                &["and", "or", "end of input"],
            ));
        }
        Ok(Rule {
            target: words.join(" "),
            condition,
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut parts = vec![self.conj()?];
        while *self.peek() == Tok::Or {
            self.bump();
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::Or(parts) })
    }

    fn conj(&mut self) -> Result<Expr> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::And {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::And(parts) })
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(e)
            }
            _ => Ok(Expr::Atom(self.atom()?)),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let pos = self.pos();
        if let Tok::Word(w) = self.peek().clone() {
            if PREDICATES.contains(&w.as_str()) && self.toks.get(self.at + 1).map(|t| &t.0) == Some(&Tok::LParen) {
                self.bump();
                self.bump();
                let mut args = vec![self.operand()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.operand()?);
                }
                self.expect(Tok::RParen, ")")?;
                let arity_ok = match w.as_str() {
                    "content_disjoint" => args.len() == 2,
                    _ => args.len() == 1,
                };
                if !arity_ok {
                    return Err(parse_error(pos, format!("wrong number of arguments to {w}"), &[]));
                }
                return Ok(Atom::Predicate { name: w, args, pos });
            }
        }
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Op(op) => *op,
            other => {
                return Err(parse_error(
                    self.pos(),
                    format!("expected comparison operator, found {}", other.describe()),
                    &["in", "==", "!=", "<", "<=", ">", ">="],
                ))
            }
        };
        self.bump();
        let right = self.operand()?;
        Ok(Atom::Compare { left, op, right, pos })
    }

    fn literal_words(&mut self) -> Vec<String> {
        let mut words = Vec::new();
        while let Tok::Word(w) = self.peek() {
            if is_root(w) && !words.is_empty() {
                break;
            }
            words.push(w.clone());
            self.bump();
        }
        words
    }

    fn operand(&mut self) -> Result<Operand> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Operand::Int(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Literal(s))
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    let item_pos = self.pos();
                    match self.peek().clone() {
                        Tok::Str(s) => {
                            self.bump();
                            items.push(s);
                        }
                        Tok::Int(v) => {
                            self.bump();
                            items.push(v.to_string());
                        }
                        Tok::Word(_) => {
                            let mut words = Vec::new();
                            while let Tok::Word(w) = self.peek() {
                                words.push(w.clone());
                                self.bump();
                            }
                            items.push(words.join(" "));
                        }
                        other => {
                            return Err(parse_error(
                                item_pos,
                                format!("expected list item, found {}", other.describe()),
                                &["literal"],
                            ))
                        }
                    }
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RBracket => {
                            self.bump();
                            break;
                        }
                        other => {
                            return Err(parse_error(
                                self.pos(),
                                format!("expected , or ], found {}", other.describe()),
                                &[",", "]"],
                            ))
                        }
                    }
                }
                Ok(Operand::List(items))
            }
            Tok::Word(w) if is_root(&w) => {
                self.bump();
                let segs: Vec<String> = w.split('.').map(str::to_string).collect();
                if !valid_path(&segs) {
                    return Err(parse_error(pos, format!("invalid path {w}"), &["path"]));
                }
                Ok(Operand::Path(segs))
            }
            Tok::Word(w) if w.contains('.') => Err(parse_error(pos, format!("unknown path root in {w}"), &["path"])),
            Tok::Word(_) => Ok(Operand::Literal(self.literal_words().join(" "))),
            other => Err(parse_error(pos, format!("expected operand, found {}", other.describe()), OPERAND_START)),
        }
    }
}

fn parse_at(text: &str, origin: Pos) -> Result<Rule> {
    let toks = lex(text, origin)?;
    Parser { toks, at: 0 }.rule()
}

/// Parses a single `target -> condition` clause.
pub fn parse_rule(text: &str) -> Result<Rule> {
    parse_at(text, Pos { line: 1, column: 1 })
}

/// Parses a rule file. A clause starts on a line containing `->` and runs until
/// the next such line; `#` starts a comment.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    let mut clauses: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.contains("->") {
            clauses.push((i + 1, line.to_string()));
        } else if let Some(last) = clauses.last_mut() {
            last.1.push('\n');
            last.1.push_str(line);
        } else if !line.trim().is_empty() {
            return Err(parse_error(Pos { line: i + 1, column: 1 }, "text before the first rule", &["->"]));
        }
    }
    clauses
        .into_iter()
        .map(|(line, body)| parse_at(&body, Pos { line, column: 1 }))
        .collect()
}

// ---------------------------------------------------------------- printer

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.split(' ').any(|w| {
            w.is_empty()
                || matches!(w, "and" | "or" | "not" | "in")
                || is_root(w)
                || PREDICATES.contains(&w)
                || !w.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                || !w.chars().all(|c| c.is_alphanumeric() || c == '_')
        })
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |s: &str| if needs_quotes(s) { format!("\"{s}\"") } else { s.to_string() };
        match self {
            Operand::Path(p) => write!(f, "{}", p.join(".")),
            Operand::Literal(s) => write!(f, "{}", lit(s)),
            Operand::Int(i) => write!(f, "{i}"),
            Operand::List(items) => write!(f, "[{}]", items.iter().map(|s| lit(s)).collect::<Vec<_>>().join(", ")),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Compare { left, op, right, .. } => write!(f, "{left} {} {right}", op.as_str()),
            Atom::Predicate { name, args, .. } => {
                write!(f, "{name}({})", args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, parent_and: bool) -> fmt::Result {
    match e {
        Expr::Atom(a) => write!(f, "{a}"),
        Expr::Not(inner) => {
            write!(f, "not ")?;
            match **inner {
                Expr::Atom(_) | Expr::Not(_) => write_expr(inner, f, true),
                _ => {
                    write!(f, "(")?;
                    write_expr(inner, f, false)?;
                    write!(f, ")")
                }
            }
        }
        Expr::And(parts) | Expr::Or(parts) => {
            let is_or = matches!(e, Expr::Or(_));
            let paren = is_or && parent_and;
            if paren {
                write!(f, "(")?;
            }
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {} ", if is_or { "or" } else { "and" })?;
                }
                // nested same-kind groups keep their own parentheses
                let nested_same = matches!((e, p), (Expr::And(_), Expr::And(_)) | (Expr::Or(_), Expr::Or(_)));
                if nested_same {
                    write!(f, "(")?;
                    write_expr(p, f, false)?;
                    write!(f, ")")?;
                } else {
                    write_expr(p, f, !is_or)?;
                }
            }
            if paren {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, false)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.target, self.condition)
    }
}

// ---------------------------------------------------------------- evaluation

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Set(BTreeSet<String>),
    Str(String),
    Int(i64),
    Missing,
}

/// Case and separator folding for comparisons: `seller info` equals `SELLER_INFO`.
fn norm(s: &str) -> String {
    s.trim().to_uppercase().replace('_', " ")
}

fn resolve<'a>(segs: &[String], block: &'a Block, page: &'a Page) -> Result<Value> {
    let root = segs[0].as_str();
    if let Some((_, dir)) = NEIGHBOR_ROOTS.iter().find(|(r, _)| *r == root) {
        return match page.neighbor(block, *dir) {
            Some(nb) => resolve(&segs[1..], nb, page),
            None => Ok(Value::Missing),
        };
    }
    Ok(match root {
        "block_annot" => {
            let pick = |k: AnnotationKind| match segs.get(1).map(String::as_str) {
                Some("keyword") => k == AnnotationKind::Keyword,
                Some("data") => k != AnnotationKind::Keyword,
                _ => true,
            };
            Value::Set(block.annotations.iter().filter(|a| pick(a.kind)).map(|a| norm(&a.label)).collect())
        }
        "num_lines" => Value::Int(block.lines.len() as i64),
        "zone_v" => Value::Str(norm(block.zone_v.as_str())),
        "zone_h" => Value::Str(norm(block.zone_h.as_str())),
        "page" => Value::Int(page.number as i64),
        "block_types" => Value::Set(block.block_types.iter().map(|t| norm(t.as_str())).collect()),
        other => return Err(Error::Eval(format!("no accessor for path root {other}"))),
    })
}

fn operand_value(o: &Operand, block: &Block, page: &Page) -> Result<Value> {
    Ok(match o {
        Operand::Path(p) => resolve(p, block, page)?,
        Operand::Literal(s) => Value::Str(norm(s)),
        Operand::Int(i) => Value::Int(*i),
        Operand::List(items) => Value::Set(items.iter().map(|s| norm(s)).collect()),
    })
}

fn compare(l: &Value, op: CmpOp, r: &Value) -> bool {
    use Value::*;
    match (l, op, r) {
        (Missing, ..) | (_, _, Missing) => false,
        (Set(a), CmpOp::In, Set(b)) => !a.is_disjoint(b),
        (Str(a), CmpOp::In, Set(b)) => b.contains(a),
        (Int(a), CmpOp::In, Set(b)) => b.contains(&a.to_string()),
        (Str(a), CmpOp::In, Str(b)) => a == b,
        (Set(a), CmpOp::Eq, Str(b)) | (Str(b), CmpOp::Eq, Set(a)) => a.len() == 1 && a.contains(b),
        (Set(a), CmpOp::Ne, Str(b)) | (Str(b), CmpOp::Ne, Set(a)) => !(a.len() == 1 && a.contains(b)),
        (a, CmpOp::Eq, b) => a == b,
        (a, CmpOp::Ne, b) => a != b,
        (Int(a), op, Int(b)) => match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            _ => false,
        },
        _ => false,
    }
}

fn role_arg(args: &[Operand]) -> Option<PartyRole> {
    match args.first() {
        Some(Operand::Literal(s)) => s.trim().to_uppercase().parse().ok(),
        _ => None,
    }
}

/// Blocks in reading order: rows of vertically overlapping blocks, top to bottom, each left to right.
pub fn reading_order(page: &Page) -> Vec<u32> {
    let mut blocks: Vec<&Block> = page.blocks.iter().collect();
    blocks.sort_by_key(|b| (b.bbox.top, b.bbox.left, b.id));
    let mut rows: Vec<(u32, u32, Vec<&Block>)> = Vec::new();
    for b in blocks {
        let joins = rows.last().is_some_and(|(top, bottom, _)| {
            let overlap = (*bottom).min(b.bbox.bottom()).saturating_sub((*top).max(b.bbox.top));
            let min_h = (bottom - top).min(b.bbox.height);
            overlap * 2 >= min_h && overlap > 0
        });
        if joins {
            let row = rows.last_mut().expect("row present");
            row.0 = row.0.min(b.bbox.top);
            row.1 = row.1.max(b.bbox.bottom());
            row.2.push(b);
        } else {
            rows.push((b.bbox.top, b.bbox.bottom(), vec![b]));
        }
    }
    rows.into_iter()
        .flat_map(|(_, _, mut r)| {
            r.sort_by_key(|b| (b.bbox.left, b.id));
            r.into_iter().map(|b| b.id)
        })
        .collect()
}

fn aligned(block: &Block, other: &Block, page: &Page) -> bool {
    let first = &block.lines[0];
    let col_tol = (2.0 * first.avg_char_width()).max(1.0);
    let row_tol = first.bbox.height.max(1) as f64;
    let vertical = [Direction::Top, Direction::Bottom]
        .iter()
        .any(|d| block.neighbors.get(*d) == Some(other.id) || other.neighbors.get(*d) == Some(block.id));
    let horizontal = [Direction::Left, Direction::Right]
        .iter()
        .any(|d| block.neighbors.get(*d) == Some(other.id) || other.neighbors.get(*d) == Some(block.id));
    let _ = page;
    (vertical && (block.bbox.left as f64 - other.bbox.left as f64).abs() <= col_tol)
        || (horizontal && (block.bbox.top as f64 - other.bbox.top as f64).abs() <= row_tol)
}

/// Whether a block holds content of the named group; `COMPANY`, `ADDRESS` and `ID`
/// name the organization, any address part and the company id.
fn has_content(block: &Block, group: &str) -> bool {
    block.annotations.iter().any(|a| match group {
        "COMPANY" => a.kind == AnnotationKind::Entity && a.label == "ORGANIZATION",
        "ADDRESS" => a.kind == AnnotationKind::AddressPart,
        "ID" => a.kind == AnnotationKind::DataType && a.label == "COMPANY ID",
        other => a.kind != AnnotationKind::Keyword && norm(&a.label) == other,
    })
}

fn predicate(name: &str, args: &[Operand], block: &Block, page: &Page) -> Result<bool> {
    let Some(role) = role_arg(args) else {
        return Ok(false);
    };
    let holders: Vec<&Block> = page.blocks.iter().filter(|b| b.role == role && b.id != block.id).collect();
    let order = reading_order(page);
    let idx = |id: u32| order.iter().position(|x| *x == id).unwrap_or(usize::MAX);
    Ok(match name {
        "exists_role" => !holders.is_empty(),
        "before_role" => holders.iter().any(|h| idx(block.id) < idx(h.id)),
        "after_role" => holders.iter().any(|h| idx(block.id) > idx(h.id)),
        "aligned_with" => holders.iter().any(|h| aligned(block, h, page)),
        "content_disjoint" => {
            let groups: Vec<String> = match args.get(1) {
                Some(Operand::List(items)) => items.iter().map(|s| norm(s)).collect(),
                Some(Operand::Literal(s)) => vec![norm(s)],
                _ => Vec::new(),
            };
            !groups
                .iter()
                .any(|g| has_content(block, g) && holders.iter().any(|h| has_content(h, g)))
        }
        other => return Err(Error::Eval(format!("unknown predicate {other}"))),
    })
}

fn eval_expr(e: &Expr, block: &Block, page: &Page) -> Result<bool> {
    Ok(match e {
        Expr::And(parts) => {
            for p in parts {
                if !eval_expr(p, block, page)? {
                    return Ok(false);
                }
            }
            true
        }
        Expr::Or(parts) => {
            for p in parts {
                if eval_expr(p, block, page)? {
                    return Ok(true);
                }
            }
            false
        }
        Expr::Not(inner) => !eval_expr(inner, block, page)?,
        Expr::Atom(Atom::Compare { left, op, right, .. }) => {
            compare(&operand_value(left, block, page)?, *op, &operand_value(right, block, page)?)
        }
        Expr::Atom(Atom::Predicate { name, args, .. }) => predicate(name, args, block, page)?,
    })
}

/// Evaluates the rule's condition for `block` within `page`.
pub fn eval_rule(rule: &Rule, block: &Block, page: &Page) -> Result<bool> {
    eval_expr(&rule.condition, block, page)
}

/// Rules whose targets are block types.
pub fn block_type_rules(text: &str) -> Result<Vec<(BlockType, Rule)>> {
    parse_rules(text)?
        .into_iter()
        .map(|r| {
            let t = BlockType::from_rule_name(&r.target)
                .ok_or_else(|| Error::Config(format!("unknown block type target {:?}", r.target)))?;
            Ok((t, r))
        })
        .collect()
}

/// Rules whose targets are party roles.
pub fn role_rules(text: &str) -> Result<Vec<(PartyRole, Rule)>> {
    parse_rules(text)?
        .into_iter()
        .map(|r| {
            let role: PartyRole = r
                .target
                .to_uppercase()
                .parse()
                .map_err(|_| Error::Config(format!("unknown role target {:?}", r.target)))?;
            if role == PartyRole::None {
                return Err(Error::Config("role rules cannot target NONE".into()));
            }
            Ok((role, r))
        })
        .collect()
}

/// Adds every matching rule's type to each block; blocks matching nothing become EMPTY.
/// All rules see the input page, so the result does not depend on rule order.
pub fn detect_block_types(page: &Page, rules: &[(BlockType, Rule)]) -> Result<Page> {
    let mut out = page.clone();
    for (bi, block) in page.blocks.iter().enumerate() {
        let mut types = BTreeSet::new();
        for (t, r) in rules {
            if *t != BlockType::Empty && eval_rule(r, block, page)? {
                types.insert(*t);
            }
        }
        if types.is_empty() {
            types.insert(BlockType::Empty);
        }
        out.blocks[bi].block_types = types;
    }
    Ok(out)
}

const PARTY_TYPES: [BlockType; 3] = [BlockType::SellerInfo, BlockType::BuyerInfo, BlockType::DeliveryInfo];

/// Assigns roles to party blocks. Role rules are tried in order and the first
/// match wins; passes repeat until no block changes, since rules may refer to
/// roles assigned earlier. Global rules then run once over the remaining blocks
/// in reading order. Blocks that already have a role keep it.
pub fn classify_roles(page: &Page, rules: &[(PartyRole, Rule)], global: &[(PartyRole, Rule)]) -> Result<Page> {
    let mut page = page.clone();
    let order = reading_order(&page);
    let candidates: Vec<usize> = order
        .iter()
        .filter_map(|id| page.blocks.iter().position(|b| b.id == *id))
        .filter(|i| PARTY_TYPES.iter().any(|t| page.blocks[*i].block_types.contains(t)))
        .collect();
    let assign = |page: &mut Page, set: &[(PartyRole, Rule)]| -> Result<bool> {
        let mut changed = false;
        for &i in &candidates {
            if page.blocks[i].role != PartyRole::None {
                continue;
            }
            for (role, rule) in set {
                if eval_rule(rule, &page.blocks[i], page)? {
                    page.blocks[i].role = *role;
                    changed = true;
                    break;
                }
            }
        }
        Ok(changed)
    };
    while assign(&mut page, rules)? {}
    assign(&mut page, global)?;
    Ok(page)
}

pub const DEFAULT_BLOCK_TYPE_RULES: &str = include_str!("../../../config/rules/block_types.rules");
pub const DEFAULT_ROLE_RULES: &str = include_str!("../../../config/rules/roles.rules");
pub const DEFAULT_GLOBAL_RULES: &str = include_str!("../../../config/rules/global.rules");

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SELLER_INFO_RULE: &str = "seller info -> block_annot.data in [ORGANIZATION, PERSON, LOCATION, CITY,\n        COUNTRY, EMAIL, PHONE] and SELLER in top_blocks.block_annot.keyword\n        and top_blocks.num_lines == 1";

    #[test]
    fn figure_rule_parses_and_round_trips() {
        let r = parse_rule(SELLER_INFO_RULE).unwrap();
        assert_eq!(BlockType::from_rule_name(&r.target), Some(BlockType::SellerInfo));
        let Expr::And(parts) = &r.condition else { panic!("conjunction expected") };
        assert_eq!(parts.len(), 3);
        let printed = r.to_string();
        assert_eq!(parse_rule(&printed).unwrap(), r);
    }

    #[test]
    fn minimal_and_errors() {
        let r = parse_rule("x -> num_lines == 1").unwrap();
        assert_eq!(
            r.condition,
            Expr::Atom(Atom::Compare {
                left: Operand::Path(vec!["num_lines".into()]),
                op: CmpOp::Eq,
                right: Operand::Int(1),
                pos: Pos::default()
            })
        );
        match parse_rule("x -> num_lines ==") {
            Err(Error::Parse { line, column, expected, .. }) => {
                assert_eq!((line, column), (1, 18));
                assert!(expected.contains(&"literal".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_rule("x -> foo.bar == 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rule("x -> block_annot.nope in [A]"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rule("x -> aligned_with(SELLER, B)"), Err(Error::Parse { .. })));
    }

    #[test]
    fn rule_file_line_numbers() {
        let text = "# c\na -> num_lines == 1\nb -> num_lines ==\n";
        match parse_rules(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shipped_rules_parse() {
        assert!(!block_type_rules(DEFAULT_BLOCK_TYPE_RULES).unwrap().is_empty());
        assert_eq!(role_rules(DEFAULT_ROLE_RULES).unwrap().len(), 15);
        assert_eq!(role_rules(DEFAULT_GLOBAL_RULES).unwrap().len(), 5);
    }
}
