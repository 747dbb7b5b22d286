//! First-page detection from layout and annotation features.
//!
//! Two classifiers share one feature encoding: a Bernoulli naive Bayes model
//! with Laplace smoothing (numeric features binned at training quartiles) and
//! an L2-regularized logistic regression fitted by gradient descent with
//! backtracking. Models carry the feature schema they were trained on and
//! refuse vectors built with any other schema.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::docmodel::{AnnotationKind, BlockType, Document, Page, ZoneV};
use crate::error::{Error, Result};
use crate::textannot::datatypes::DATATYPE_LABELS;
use crate::textannot::keywords::KEYWORD_LABELS;

pub const NB_ALPHA: f64 = 1.0;
pub const LR_L2: f64 = 1e-3;
pub const LR_GRAD_TOL: f64 = 1e-6;
pub const LR_MAX_ITER: usize = 10_000;

/// How far the page has been processed before features are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    LayoutOnly,
    WithAnnotations,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "layout_only" | "layout" => Ok(Stage::LayoutOnly),
            "with_annotations" | "annotations" | "annotated" => Ok(Stage::WithAnnotations),
            other => Err(Error::Config(format!("unknown feature stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassifierKind {
    NaiveBayes,
    LogisticRegression,
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nb" | "naive_bayes" => Ok(ClassifierKind::NaiveBayes),
            "lr" | "logistic" | "logistic_regression" => Ok(ClassifierKind::LogisticRegression),
            other => Err(Error::Config(format!("unknown classifier kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Numeric features are binned for naive Bayes and standardized for
    /// logistic regression; all others are 0/1.
    pub numeric: bool,
}

/// Ordered feature names for one vocabulary and stage. Layout features come
/// first, so an annotated vector restricted to the layout prefix equals the
/// layout-only vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub stage: Stage,
    pub vocab: Vec<String>,
    pub features: Vec<Feature>,
}

const LAYOUT_NUMERIC: &[(&str, bool)] = &[
    ("title_present", false),
    ("title_top", true),
    ("title_height", true),
    ("page_number_present", false),
    ("page_number", true),
];

impl FeatureSchema {
    pub fn new(vocab: &[String], stage: Stage) -> Self {
        let mut features: Vec<Feature> = vocab
            .iter()
            .map(|w| Feature {
                name: format!("w:{w}"),
                numeric: false,
            })
            .collect();
        features.extend(LAYOUT_NUMERIC.iter().map(|(n, numeric)| Feature {
            name: n.to_string(),
            numeric: *numeric,
        }));
        if stage == Stage::WithAnnotations {
            let flag = |name: String| Feature { name, numeric: false };
            features.extend(KEYWORD_LABELS.iter().map(|l| flag(format!("K_{l}"))));
            features.extend(DATATYPE_LABELS.iter().map(|l| flag(format!("D_{l}"))));
            features.extend(
                BlockType::ALL
                    .iter()
                    .filter(|t| **t != BlockType::Empty)
                    .map(|t| flag(t.rule_name())),
            );
        }
        FeatureSchema {
            stage,
            vocab: vocab.to_vec(),
            features,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of leading features shared with the layout-only schema.
    pub fn layout_len(&self) -> usize {
        self.vocab.len() + LAYOUT_NUMERIC.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// FNV-1a over feature names and kinds; stable across runs and platforms.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for f in &self.features {
            eat(f.name.as_bytes());
            eat(&[0, f.numeric as u8, 0xff]);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: FeatureSchema,
    /// Aligned with `schema.features`.
    pub values: Vec<f64>,
    pub page_number: Option<u32>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.index(name).map(|i| self.values[i])
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema.hash()
    }
}

/// Lowercased alphanumeric runs.
fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// One word per line; blank lines and `#` comments skipped, duplicates dropped.
pub fn parse_vocab(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter(|l| seen.insert(l.clone()))
        .collect()
}

/// The `size` words found on most pages. Tokens shorter than three characters
/// or holding digits are skipped; ties go to the alphabetically first word.
pub fn build_vocab<'a>(pages: impl IntoIterator<Item = &'a Page>, size: usize) -> Vec<String> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for page in pages {
        let words: BTreeSet<String> = tokens(&page.text())
            .filter(|t| t.chars().count() >= 3 && !t.chars().any(|c| c.is_numeric()))
            .collect();
        for w in words {
            *df.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(size).map(|(w, _)| w).collect()
}

/// Largest-font single-line block in the header or top zone; topmost on ties.
fn title_block(page: &Page) -> Option<&crate::docmodel::Block> {
    page.blocks
        .iter()
        .filter(|b| b.lines.len() == 1 && matches!(b.zone_v, ZoneV::Header | ZoneV::Top))
        .max_by(|a, b| {
            a.lines[0]
                .font_height()
                .total_cmp(&b.lines[0].font_height())
                .then_with(|| b.bbox.top.cmp(&a.bbox.top))
        })
}

fn leading_number(text: &str) -> Option<u32> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

/// From a PAGE NUMBER annotation, else the first standalone `N/M` token with N <= M.
fn page_number(page: &Page) -> Option<u32> {
    let annotated = page
        .blocks
        .iter()
        .flat_map(|b| b.annotations_of(AnnotationKind::DataType))
        .find(|a| a.label == "PAGE NUMBER")
        .and_then(|a| leading_number(&a.matched_text));
    annotated.or_else(|| {
        page.blocks
            .iter()
            .flat_map(|b| b.lines.iter())
            .flat_map(|l| l.text.split_whitespace())
            .find_map(|t| {
                let (n, m) = t.split_once('/')?;
                let all_digits = |s: &str| !s.is_empty() && s.len() <= 3 && s.chars().all(|c| c.is_ascii_digit());
                if !all_digits(n) || !all_digits(m) {
                    return None;
                }
                let (n, m): (u32, u32) = (n.parse().ok()?, m.parse().ok()?);
                (n >= 1 && n <= m).then_some(n)
            })
    })
}

/// Features of one page. Annotation features require block types to have been
/// detected on every block.
pub fn extract_features(page: &Page, vocab: &[String], stage: Stage) -> Result<FeatureVector> {
    let schema = FeatureSchema::new(vocab, stage);
    if stage == Stage::WithAnnotations && page.blocks.iter().any(|b| b.block_types.is_empty()) {
        return Err(Error::Stage(format!(
            "page {} has blocks without block types; annotate before extracting annotation features",
            page.number
        )));
    }
    let words: BTreeSet<String> = tokens(&page.text()).collect();
    let mut values: Vec<f64> = vocab.iter().map(|w| words.contains(w) as u8 as f64).collect();

    let title = title_block(page);
    let number = page_number(page);
    values.push(title.is_some() as u8 as f64);
    values.push(title.map_or(0.0, |b| b.bbox.top as f64));
    values.push(title.map_or(0.0, |b| b.bbox.height as f64));
    values.push(number.is_some() as u8 as f64);
    values.push(number.unwrap_or(0) as f64);

    if stage == Stage::WithAnnotations {
        let has = |kind: AnnotationKind, label: &str| page.blocks.iter().any(|b| b.has_label(kind, label));
        values.extend(KEYWORD_LABELS.iter().map(|l| has(AnnotationKind::Keyword, l) as u8 as f64));
        values.extend(DATATYPE_LABELS.iter().map(|l| has(AnnotationKind::DataType, l) as u8 as f64));
        values.extend(
            BlockType::ALL
                .iter()
                .filter(|t| **t != BlockType::Empty)
                .map(|t| page.blocks.iter().any(|b| b.block_types.contains(t)) as u8 as f64),
        );
    }
    debug_assert_eq!(values.len(), schema.len());
    Ok(FeatureVector {
        schema,
        values,
        page_number: number,
    })
}

/// Every page of the documents with its label: the stored first-page flag
/// when present, otherwise whether it is the document's first page.
pub fn labeled_pages(docs: &[Document], vocab: &[String], stage: Stage) -> Result<Vec<(FeatureVector, bool)>> {
    docs.iter()
        .flat_map(|d| d.pages.iter().enumerate())
        .map(|(i, p)| Ok((extract_features(p, vocab, stage)?, p.is_invoice_first_page.unwrap_or(i == 0))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes {
        /// Indexed by class (0, 1).
        log_prior: [f64; 2],
        /// Per feature; empty for 0/1 features, quartile cut points otherwise.
        cuts: Vec<Vec<f64>>,
        /// Per feature, per category, per class.
        log_likelihood: Vec<Vec<[f64; 2]>>,
    },
    LogisticRegression {
        /// Per-feature standardization; identity for 0/1 features.
        mean: Vec<f64>,
        scale: Vec<f64>,
        weights: Vec<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub schema_hash: u64,
    pub schema: FeatureSchema,
    pub params: ModelParams,
}

impl ClassifierModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    /// Parses a model file and checks the stored hash against the stored schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let model: ClassifierModel = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        let actual = model.schema.hash();
        if actual != model.schema_hash {
            return Err(Error::SchemaMismatch {
                model: model.schema_hash,
                features: actual,
            });
        }
        let n = model.schema.len();
        let sizes_ok = match &model.params {
            ModelParams::NaiveBayes {
                cuts, log_likelihood, ..
            } => cuts.len() == n && log_likelihood.len() == n,
            ModelParams::LogisticRegression {
                mean, scale, weights, ..
            } => mean.len() == n && scale.len() == n && weights.len() == n,
        };
        if !sizes_ok {
            return Err(Error::schema("params", format!("parameter sizes differ from the {n} schema features")));
        }
        Ok(model)
    }
}

fn check_dataset(data: &[(FeatureVector, bool)]) -> Result<&FeatureSchema> {
    let first = data
        .first()
        .ok_or_else(|| Error::DegenerateData("empty training set".into()))?;
    let hash = first.0.schema_hash();
    for (fv, _) in data {
        let h = fv.schema_hash();
        if h != hash {
            return Err(Error::SchemaMismatch { model: hash, features: h });
        }
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateData(format!(
            "all {} examples have label {}",
            data.len(),
            positives > 0
        )));
    }
    Ok(&first.0.schema)
}

/// Nearest-rank quartile cut points, deduplicated.
fn quartile_cuts(values: &mut [f64]) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut cuts: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|q| values[((q * n as f64).ceil() as usize).clamp(1, n) - 1])
        .collect();
    cuts.dedup();
    cuts
}

fn category(value: f64, cuts: &[f64], numeric: bool) -> usize {
    if numeric {
        cuts.iter().filter(|c| value > **c).count()
    } else {
        (value > 0.5) as usize
    }
}

fn train_nb(schema: &FeatureSchema, data: &[(FeatureVector, bool)]) -> ModelParams {
    let counts = [
        data.iter().filter(|(_, y)| !*y).count() as f64,
        data.iter().filter(|(_, y)| *y).count() as f64,
    ];
    let total = counts[0] + counts[1];
    let log_prior = [(counts[0] / total).ln(), (counts[1] / total).ln()];
    let mut cuts = Vec::with_capacity(schema.len());
    let mut log_likelihood = Vec::with_capacity(schema.len());
    for (j, f) in schema.features.iter().enumerate() {
        let c = if f.numeric {
            quartile_cuts(&mut data.iter().map(|(fv, _)| fv.values[j]).collect::<Vec<_>>())
        } else {
            Vec::new()
        };
        let n_cat = if f.numeric { c.len() + 1 } else { 2 };
        let mut hits = vec![[0.0f64; 2]; n_cat];
        for (fv, y) in data {
            hits[category(fv.values[j], &c, f.numeric)][*y as usize] += 1.0;
        }
        let ll = hits
            .iter()
            .map(|h| {
                let p = |k: usize| ((h[k] + NB_ALPHA) / (counts[k] + NB_ALPHA * n_cat as f64)).ln();
                [p(0), p(1)]
            })
            .collect();
        cuts.push(c);
        log_likelihood.push(ll);
    }
    ModelParams::NaiveBayes {
        log_prior,
        cuts,
        log_likelihood,
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus `lambda / 2 * |w|^2` and its gradient.
/// `theta` holds the weights followed by the unpenalized bias.
pub fn logistic_loss_grad(theta: &[f64], x: &[Vec<f64>], y: &[bool], lambda: f64) -> (f64, Vec<f64>) {
    let d = theta.len() - 1;
    let (w, b) = (&theta[..d], theta[d]);
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (xi, yi) in x.iter().zip(y) {
        let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let t = *yi as u8 as f64;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, a) in grad.iter_mut().zip(xi) {
            *g += r * a;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (g, wj) in grad.iter_mut().zip(w) {
        *g += lambda * wj;
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Loss before the first step and after every accepted step.
    pub losses: Vec<f64>,
    pub grad_norm: f64,
}

/// Gradient descent with an Armijo backtracking step, so the loss never
/// increases. Stops at gradient norm below `tol` or after `max_iter` steps.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], lambda: f64, tol: f64, max_iter: usize) -> LogisticFit {
    let d = x.first().map_or(0, Vec::len);
    let mut theta = vec![0.0; d + 1];
    let (mut loss, mut grad) = logistic_loss_grad(&theta, x, y, lambda);
    let mut losses = vec![loss];
    let mut step = 1.0;
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..max_iter {
        let gn = norm(&grad);
        if gn < tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (l, g) = logistic_loss_grad(&cand, x, y, lambda);
            if l <= loss - 0.5 * step * gn * gn {
                theta = cand;
                loss = l;
                grad = g;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        losses.push(loss);
        step = (step * 2.0).min(1e4);
    }
    LogisticFit {
        bias: theta[d],
        weights: theta[..d].to_vec(),
        grad_norm: norm(&grad),
        losses,
    }
}

fn standardize(v: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    v.iter().zip(mean).zip(scale).map(|((x, m), s)| (x - m) / s).collect()
}

fn train_lr(schema: &FeatureSchema, data: &[(FeatureVector, bool)]) -> ModelParams {
    let n = data.len() as f64;
    let mut mean = vec![0.0; schema.len()];
    let mut scale = vec![1.0; schema.len()];
    for j in (0..schema.len()).filter(|j| schema.features[*j].numeric) {
        let m = data.iter().map(|(fv, _)| fv.values[j]).sum::<f64>() / n;
        let var = data.iter().map(|(fv, _)| (fv.values[j] - m).powi(2)).sum::<f64>() / n;
        mean[j] = m;
        scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let x: Vec<Vec<f64>> = data.iter().map(|(fv, _)| standardize(&fv.values, &mean, &scale)).collect();
    let y: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
    let fit = fit_logistic(&x, &y, LR_L2, LR_GRAD_TOL, LR_MAX_ITER);
    ModelParams::LogisticRegression {
        mean,
        scale,
        weights: fit.weights,
        bias: fit.bias,
    }
}

/// Fits a model on labeled vectors that share one schema.
pub fn train(data: &[(FeatureVector, bool)], kind: ClassifierKind) -> Result<ClassifierModel> {
    let schema = check_dataset(data)?.clone();
    let params = match kind {
        ClassifierKind::NaiveBayes => train_nb(&schema, data),
        ClassifierKind::LogisticRegression => train_lr(&schema, data),
    };
    Ok(ClassifierModel {
        kind,
        schema_hash: schema.hash(),
        schema,
        params,
    })
}

/// Class probabilities `[P(other page), P(first page)]`.
pub fn posteriors(model: &ClassifierModel, fv: &FeatureVector) -> Result<[f64; 2]> {
    let h = fv.schema_hash();
    if h != model.schema_hash {
        return Err(Error::SchemaMismatch {
            model: model.schema_hash,
            features: h,
        });
    }
    Ok(match &model.params {
        ModelParams::NaiveBayes {
            log_prior,
            cuts,
            log_likelihood,
        } => {
            let mut lp = *log_prior;
            for (j, f) in model.schema.features.iter().enumerate() {
                let cat = category(fv.values[j], &cuts[j], f.numeric);
                lp[0] += log_likelihood[j][cat][0];
                lp[1] += log_likelihood[j][cat][1];
            }
            // log-sum-exp normalization
            let m = lp[0].max(lp[1]);
            let z = m + ((lp[0] - m).exp() + (lp[1] - m).exp()).ln();
            let p1 = (lp[1] - z).exp();
            [1.0 - p1, p1]
        }
        ModelParams::LogisticRegression {
            mean,
            scale,
            weights,
            bias,
        } => {
            let x = standardize(&fv.values, mean, scale);
            let p1 = sigmoid(bias + x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>());
            [1.0 - p1, p1]
        }
    })
}

/// First-page decision and its probability; the label is `p >= 0.5`.
pub fn predict(model: &ClassifierModel, fv: &FeatureVector) -> Result<(bool, f64)> {
    let p = posteriors(model, fv)?[1];
    Ok((p >= 0.5, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Folds with at least one first page in the held-out part.
    pub folds: usize,
}

/// Fold index per example. Each class is shuffled with the seed and dealt
/// round-robin, so class proportions per fold differ by at most one example.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == class).collect();
        idx.shuffle(&mut rng);
        for (r, i) in idx.into_iter().enumerate() {
            folds[i] = (offset + r) % k;
        }
        offset += labels.iter().filter(|l| **l == class).count();
    }
    folds
}

/// Mean precision, recall and F1 for the first-page label over `k` stratified folds.
pub fn cross_validate(data: &[(FeatureVector, bool)], kind: ClassifierKind, k: usize, seed: u64) -> Result<CvMetrics> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    if k > data.len() {
        return Err(Error::DegenerateData(format!("{k} folds for {} examples", data.len())));
    }
    check_dataset(data)?;
    let labels: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
    let folds = stratified_folds(&labels, k, seed);
    let per_fold: Vec<Option<(f64, f64, f64)>> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<Option<(f64, f64, f64)>> {
            let train_set: Vec<(FeatureVector, bool)> =
                data.iter().zip(&folds).filter(|(_, g)| **g != f).map(|(d, _)| d.clone()).collect();
            let model = train(&train_set, kind)?;
            let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
            for ((fv, y), _) in data.iter().zip(&folds).filter(|(_, g)| **g == f) {
                match (predict(&model, fv)?.0, *y) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fneg += 1.0,
                    (false, false) => {}
                }
            }
            if tp + fneg == 0.0 {
                return Ok(None);
            }
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = tp / (tp + fneg);
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            Ok(Some((p, r, f1)))
        })
        .collect::<Result<_>>()?;
    let scored: Vec<(f64, f64, f64)> = per_fold.into_iter().flatten().collect();
    let n = scored.len() as f64;
    Ok(CvMetrics {
        precision: scored.iter().map(|s| s.0).sum::<f64>() / n,
        recall: scored.iter().map(|s| s.1).sum::<f64>() / n,
        f1: scored.iter().map(|s| s.2).sum::<f64>() / n,
        folds: scored.len(),
    })
}
