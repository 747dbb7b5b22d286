//! XML encoding of [`Document`]. Layout of the elements is documented in `docs/schema.md`.

use std::collections::HashMap;

use quick_xml::events::{BytesEnd, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};

use super::*;

pub(super) fn write_document(doc: &Document) -> Vec<u8> {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 1);
    let version = SCHEMA_VERSION.to_string();
    let root = BytesStart::new("document").with_attributes([
        ("schema_version", version.as_str()),
        ("source_id", doc.source_id.as_str()),
        ("main_language", doc.main_language.as_str()),
    ]);
    emit(&mut w, Event::Start(root));
    for page in &doc.pages {
        write_page(&mut w, page);
    }
    emit(&mut w, Event::End(BytesEnd::new("document")));
    w.into_inner()
}

fn emit(w: &mut Writer<Vec<u8>>, ev: Event<'_>) {
    w.write_event(ev).expect("writing to a Vec cannot fail");
}

fn bbox_attrs(el: &mut BytesStart<'_>, b: &BBox) {
    el.push_attribute(("left", b.left.to_string().as_str()));
    el.push_attribute(("top", b.top.to_string().as_str()));
    el.push_attribute(("width", b.width.to_string().as_str()));
    el.push_attribute(("height", b.height.to_string().as_str()));
}

fn write_page(w: &mut Writer<Vec<u8>>, page: &Page) {
    let mut el = BytesStart::new("page");
    el.push_attribute(("number", page.number.to_string().as_str()));
    el.push_attribute(("width", page.width.to_string().as_str()));
    el.push_attribute(("height", page.height.to_string().as_str()));
    if let Some(first) = page.is_invoice_first_page {
        el.push_attribute(("first_page", if first { "true" } else { "false" }));
    }
    if page.blocks.is_empty() {
        emit(w, Event::Empty(el));
        return;
    }
    emit(w, Event::Start(el));
    for block in &page.blocks {
        write_block(w, block);
    }
    emit(w, Event::End(BytesEnd::new("page")));
}

fn write_block(w: &mut Writer<Vec<u8>>, block: &Block) {
    let mut el = BytesStart::new("block");
    el.push_attribute(("id", block.id.to_string().as_str()));
    bbox_attrs(&mut el, &block.bbox);
    el.push_attribute(("zone_v", block.zone_v.as_str()));
    el.push_attribute(("zone_h", block.zone_h.as_str()));
    el.push_attribute(("role", block.role.as_str()));
    emit(w, Event::Start(el));

    let mut nb = BytesStart::new("neighbors");
    for (dir, id) in block.neighbors.iter() {
        nb.push_attribute((dir.as_str(), id.to_string().as_str()));
    }
    emit(w, Event::Empty(nb));

    for t in &block.block_types {
        emit(w, Event::Start(BytesStart::new("type")));
        emit(w, Event::Text(BytesText::new(t.as_str())));
        emit(w, Event::End(BytesEnd::new("type")));
    }

    for line in &block.lines {
        let mut el = BytesStart::new("line");
        bbox_attrs(&mut el, &line.bbox);
        emit(w, Event::Start(el));
        for word in &line.words {
            let mut el = BytesStart::new("word");
            bbox_attrs(&mut el, &word.bbox);
            el.push_attribute(("font_height", word.style.font_height.to_string().as_str()));
            if let Some(c) = word.ocr_confidence {
                el.push_attribute(("conf", c.to_string().as_str()));
            }
            emit(w, Event::Start(el));
            emit(w, Event::Text(BytesText::new(&word.text)));
            emit(w, Event::End(BytesEnd::new("word")));
        }
        emit(w, Event::End(BytesEnd::new("line")));
    }

    for a in &block.annotations {
        let mut el = BytesStart::new("annotation");
        el.push_attribute(("kind", a.kind.as_str()));
        el.push_attribute(("label", a.label.as_str()));
        el.push_attribute(("line", a.span.line.to_string().as_str()));
        el.push_attribute(("start", a.span.start.to_string().as_str()));
        el.push_attribute(("end", a.span.end.to_string().as_str()));
        el.push_attribute(("score", a.score.to_string().as_str()));
        el.push_attribute(("source", a.source.as_str()));
        emit(w, Event::Start(el));
        emit(w, Event::Text(BytesText::new(&a.matched_text)));
        emit(w, Event::End(BytesEnd::new("annotation")));
    }
    emit(w, Event::End(BytesEnd::new("block")));
}

/// Element start or empty element, with its attributes decoded.
struct Element {
    name: String,
    attrs: HashMap<String, String>,
    empty: bool,
    path: String,
}

impl Element {
    fn req(&self, key: &str) -> Result<&str> {
        self.attrs
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::schema(format!("{}@{}", self.path, key), "missing attribute"))
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.req(key)?;
        raw.parse().map_err(|_| {
            Error::schema(format!("{}@{}", self.path, key), format!("invalid number {raw:?}"))
        })
    }

    fn opt_num<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.attrs.contains_key(key) {
            self.num(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn parsed<T: FromStr<Err = Error>>(&self, key: &str) -> Result<T> {
        let raw = self.req(key)?;
        raw.parse().map_err(|_| {
            Error::schema(format!("{}@{}", self.path, key), format!("invalid value {raw:?}"))
        })
    }

    fn bbox(&self) -> Result<BBox> {
        Ok(BBox {
            left: self.num("left")?,
            top: self.num("top")?,
            width: self.num("width")?,
            height: self.num("height")?,
        })
    }
}

enum Item {
    Open(Element),
    Close,
    Text(String),
    Eof,
}

struct Cursor<'a> {
    reader: Reader<&'a [u8]>,
    stack: Vec<String>,
}

impl<'a> Cursor<'a> {
    fn path(&self) -> String {
        self.stack.join("/")
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let path = if self.stack.is_empty() {
            format!("byte {}", self.reader.buffer_position())
        } else {
            self.path()
        };
        Error::schema(path, msg)
    }

    fn next(&mut self) -> Result<Item> {
        loop {
            let ev = self
                .reader
                .read_event()
                .map_err(|e| self.err(format!("malformed XML: {e}")))?;
            match ev {
                Event::Start(e) => return self.open(&e, false),
                Event::Empty(e) => return self.open(&e, true),
                Event::End(_) => {
                    self.stack.pop();
                    return Ok(Item::Close);
                }
                Event::Text(t) => {
                    let s = t.unescape().map_err(|e| self.err(format!("bad text: {e}")))?;
                    if s.trim().is_empty() {
                        continue;
                    }
                    return Ok(Item::Text(s.into_owned()));
                }
                Event::CData(c) => {
                    return Ok(Item::Text(String::from_utf8_lossy(&c).into_owned()));
                }
                Event::Eof => {
                    if !self.stack.is_empty() {
                        return Err(self.err("unexpected end of input"));
                    }
                    return Ok(Item::Eof);
                }
                _ => continue,
            }
        }
    }

    fn open(&mut self, e: &BytesStart<'_>, empty: bool) -> Result<Item> {
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let index = self.stack.len();
        let path = if index == 0 {
            name.clone()
        } else {
            format!("{}/{}", self.path(), name)
        };
        let mut attrs = HashMap::new();
        for a in e.attributes() {
            let a = a.map_err(|err| Error::schema(path.clone(), format!("bad attribute: {err}")))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a
                .unescape_value()
                .map_err(|err| Error::schema(path.clone(), format!("bad attribute: {err}")))?
                .into_owned();
            attrs.insert(key, value);
        }
        if !empty {
            self.stack.push(name.clone());
        }
        Ok(Item::Open(Element {
            name,
            attrs,
            empty,
            path,
        }))
    }

    /// Reads the text content of an element that was just opened, through its end tag.
    fn text_content(&mut self, el: &Element) -> Result<String> {
        if el.empty {
            return Ok(String::new());
        }
        let mut out = String::new();
        loop {
            match self.next()? {
                Item::Text(t) => out.push_str(&t),
                Item::Close => return Ok(out),
                Item::Open(child) => {
                    return Err(Error::schema(child.path, "unexpected element in text content"))
                }
                Item::Eof => return Err(self.err("unexpected end of input")),
            }
        }
    }
}

pub(super) fn read_document(bytes: &[u8]) -> Result<Document> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().check_end_names = true;
    let mut cur = Cursor {
        reader,
        stack: Vec::new(),
    };
    let root = match cur.next()? {
        Item::Open(el) if el.name == "document" => el,
        Item::Open(el) => return Err(Error::schema(el.path, "expected <document>")),
        _ => return Err(cur.err("expected <document>")),
    };
    let version: u32 = root.num("schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(Error::schema(
            "document@schema_version",
            format!("unsupported version {version}"),
        ));
    }
    let mut doc = Document {
        source_id: root.req("source_id")?.to_string(),
        main_language: root.req("main_language")?.to_string(),
        pages: Vec::new(),
    };
    if !root.empty {
        loop {
            match cur.next()? {
                Item::Open(el) if el.name == "page" => doc.pages.push(read_page(&mut cur, el)?),
                Item::Open(el) => return Err(Error::schema(el.path, "unexpected element")),
                Item::Close => break,
                Item::Text(_) => return Err(cur.err("unexpected text")),
                Item::Eof => return Err(cur.err("unexpected end of input")),
            }
        }
    }
    match cur.next()? {
        Item::Eof => Ok(doc),
        _ => Err(cur.err("trailing content after </document>")),
    }
}

fn read_page(cur: &mut Cursor<'_>, el: Element) -> Result<Page> {
    let first_page = match el.attrs.get("first_page").map(String::as_str) {
        None => None,
        Some("true") => Some(true),
        Some("false") => Some(false),
        Some(other) => {
            return Err(Error::schema(
                format!("{}@first_page", el.path),
                format!("invalid boolean {other:?}"),
            ))
        }
    };
    let mut page = Page {
        number: el.num("number")?,
        width: el.num("width")?,
        height: el.num("height")?,
        blocks: Vec::new(),
        is_invoice_first_page: first_page,
    };
    if el.empty {
        return Ok(page);
    }
    loop {
        match cur.next()? {
            Item::Open(b) if b.name == "block" => page.blocks.push(read_block(cur, b)?),
            Item::Open(other) => return Err(Error::schema(other.path, "unexpected element")),
            Item::Close => return Ok(page),
            Item::Text(_) => return Err(cur.err("unexpected text")),
            Item::Eof => return Err(cur.err("unexpected end of input")),
        }
    }
}

fn read_block(cur: &mut Cursor<'_>, el: Element) -> Result<Block> {
    let mut block = Block {
        id: el.num("id")?,
        lines: Vec::new(),
        bbox: el.bbox()?,
        zone_v: el.parsed("zone_v")?,
        zone_h: el.parsed("zone_h")?,
        neighbors: Neighbors::default(),
        annotations: Vec::new(),
        block_types: BTreeSet::new(),
        role: el.parsed("role")?,
    };
    if el.empty {
        return Ok(block);
    }
    loop {
        match cur.next()? {
            Item::Open(child) => match child.name.as_str() {
                "neighbors" => {
                    for dir in Direction::ALL {
                        block.neighbors.set(*dir, child.opt_num(dir.as_str())?);
                    }
                    if !child.empty {
                        cur.text_content(&child)?;
                    }
                }
                "type" => {
                    let raw = cur.text_content(&child)?;
                    let t: BlockType = raw.trim().parse().map_err(|_| {
                        Error::schema(child.path.clone(), format!("unknown block type {raw:?}"))
                    })?;
                    block.block_types.insert(t);
                }
                "line" => block.lines.push(read_line(cur, child)?),
                "annotation" => {
                    let text = cur.text_content(&child)?;
                    block.annotations.push(Annotation {
                        kind: child.parsed("kind")?,
                        label: child.req("label")?.to_string(),
                        span: Span {
                            line: child.num("line")?,
                            start: child.num("start")?,
                            end: child.num("end")?,
                        },
                        matched_text: text,
                        score: child.num("score")?,
                        source: child.req("source")?.to_string(),
                    });
                }
                _ => return Err(Error::schema(child.path, "unexpected element")),
            },
            Item::Close => return Ok(block),
            Item::Text(_) => return Err(cur.err("unexpected text")),
            Item::Eof => return Err(cur.err("unexpected end of input")),
        }
    }
}

fn read_line(cur: &mut Cursor<'_>, el: Element) -> Result<Line> {
    let bbox = el.bbox()?;
    let mut words = Vec::new();
    if !el.empty {
        loop {
            match cur.next()? {
                Item::Open(w) if w.name == "word" => {
                    let text = cur.text_content(&w)?;
                    words.push(WordBox {
                        text,
                        bbox: w.bbox()?,
                        ocr_confidence: w.opt_num("conf")?,
                        style: Style {
                            font_height: w.num("font_height")?,
                        },
                    });
                }
                Item::Open(other) => return Err(Error::schema(other.path, "unexpected element")),
                Item::Close => break,
                Item::Text(_) => return Err(cur.err("unexpected text")),
                Item::Eof => return Err(cur.err("unexpected end of input")),
            }
        }
    }
    if words.is_empty() {
        return Err(Error::Invariant(format!("{} has no words", el.path)));
    }
    let text = join_words(&words);
    Ok(Line { words, bbox, text })
}
