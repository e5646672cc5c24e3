//! Convolutional deep semantic similarity model.
//!
//! Forward pass for a token sequence:
//! 1. a `window`-word sliding window centred on each token, padded at the
//!    boundaries;
//! 2. each word wrapped as `#word#`, its letter trigrams hashed into
//!    `trigram_dim` buckets, the window's count vectors concatenated into `l_t`;
//! 3. `h_t = tanh(W_c l_t)`;
//! 4. `v = max_t h_t` elementwise;
//! 5. `y = tanh(W_s v)`.
//!
//! Training minimises the negative log-likelihood of the clicked document
//! under a softmax, sharpened by `gamma`, over cosine similarities against
//! `negatives` in-batch negative documents.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

static DEGENERATE_COSINES: AtomicU64 = AtomicU64::new(0);

/// Number of similarity calls that hit a zero-norm semantic vector.
pub fn degenerate_similarity_count() -> u64 {
    DEGENERATE_COSINES.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdssmShape {
    pub trigram_dim: usize,
    pub window: usize,
    pub conv_dim: usize,
    pub sem_dim: usize,
}

impl Default for CdssmShape {
    fn default() -> Self {
        CdssmShape {
            trigram_dim: 5000,
            window: 3,
            conv_dim: 64,
            sem_dim: 32,
        }
    }
}

impl CdssmShape {
    pub fn input_dim(&self) -> usize {
        self.window * self.trigram_dim
    }
}

/// Model weights. `w_conv` is `conv_dim x (window * trigram_dim)` and `w_sem`
/// is `sem_dim x conv_dim`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdssmParams {
    pub shape: CdssmShape,
    pub w_conv: Vec<f64>,
    pub w_sem: Vec<f64>,
}

impl CdssmParams {
    pub fn zeros(shape: CdssmShape) -> Self {
        CdssmParams {
            shape,
            w_conv: vec![0.0; shape.conv_dim * shape.input_dim()],
            w_sem: vec![0.0; shape.sem_dim * shape.conv_dim],
        }
    }

    /// Uniform(-r, r) with `r = sqrt(6 / (fan_in + fan_out))`.
    pub fn init(shape: CdssmShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(shape);
        let r_conv = (6.0 / (shape.input_dim() + shape.conv_dim) as f64).sqrt();
        for w in &mut p.w_conv {
            *w = rng.gen_range(-r_conv..r_conv);
        }
        let r_sem = (6.0 / (shape.conv_dim + shape.sem_dim) as f64).sqrt();
        for w in &mut p.w_sem {
            *w = rng.gen_range(-r_sem..r_sem);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        if s.trigram_dim == 0 || s.window == 0 || s.conv_dim == 0 || s.sem_dim == 0 {
            return Err(Error::InvalidArgument(
                "C-DSSM dimensions must be positive".into(),
            ));
        }
        if self.w_conv.len() != s.conv_dim * s.input_dim()
            || self.w_sem.len() != s.sem_dim * s.conv_dim
        {
            return Err(Error::InvalidArgument(
                "C-DSSM weight sizes do not match shape".into(),
            ));
        }
        if !self.w_conv.iter().chain(&self.w_sem).all(|w| w.is_finite()) {
            return Err(Error::InvalidArgument(
                "C-DSSM weights must be finite".into(),
            ));
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hashed letter-trigram counts of `#word#`, sorted by bucket.
pub fn word_trigrams(word: &str, dim: usize) -> Vec<(usize, f64)> {
    let chars: Vec<char> = std::iter::once('#')
        .chain(word.chars())
        .chain(std::iter::once('#'))
        .collect();
    let mut buckets: Vec<usize> = chars
        .windows(3)
        .map(|w| {
            let s: String = w.iter().collect();
            (fnv1a(s.as_bytes()) % dim as u64) as usize
        })
        .collect();
    buckets.sort_unstable();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for b in buckets {
        match out.last_mut() {
            Some((last, c)) if *last == b => *c += 1.0,
            _ => out.push((b, 1.0)),
        }
    }
    out
}

/// Per-word trigram vectors of a token sequence.
pub type TextFeatures = Vec<Vec<(usize, f64)>>;

pub fn text_features(tokens: &[String], shape: &CdssmShape) -> TextFeatures {
    tokens
        .iter()
        .map(|t| word_trigrams(t, shape.trigram_dim))
        .collect()
}

/// Sparse `l_t` vectors, one per window, with absolute column indices.
fn windows(words: &TextFeatures, shape: &CdssmShape) -> Vec<Vec<(usize, f64)>> {
    let n = words.len().max(1);
    let left = (shape.window - 1) / 2;
    (0..n)
        .map(|t| {
            let mut l = Vec::new();
            for p in 0..shape.window {
                let idx = t as isize + p as isize - left as isize;
                if idx < 0 || idx as usize >= words.len() {
                    continue;
                }
                let offset = p * shape.trigram_dim;
                l.extend(words[idx as usize].iter().map(|&(b, c)| (offset + b, c)));
            }
            l
        })
        .collect()
}

struct Tower {
    windows: Vec<Vec<(usize, f64)>>,
    h: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    v: Vec<f64>,
    y: Vec<f64>,
}

fn tower(words: &TextFeatures, p: &CdssmParams) -> Tower {
    let s = p.shape;
    let in_dim = s.input_dim();
    let windows = windows(words, &s);
    let h: Vec<Vec<f64>> = windows
        .iter()
        .map(|l| {
            (0..s.conv_dim)
                .map(|k| {
                    let row = &p.w_conv[k * in_dim..(k + 1) * in_dim];
                    l.iter().map(|&(j, c)| row[j] * c).sum::<f64>().tanh()
                })
                .collect()
        })
        .collect();
    let mut argmax = vec![0usize; s.conv_dim];
    let mut v = vec![f64::NEG_INFINITY; s.conv_dim];
    for (t, ht) in h.iter().enumerate() {
        for k in 0..s.conv_dim {
            if ht[k] > v[k] {
                v[k] = ht[k];
                argmax[k] = t;
            }
        }
    }
    let y = (0..s.sem_dim)
        .map(|i| {
            let row = &p.w_sem[i * s.conv_dim..(i + 1) * s.conv_dim];
            row.iter().zip(&v).map(|(w, x)| w * x).sum::<f64>().tanh()
        })
        .collect();
    Tower {
        windows,
        h,
        argmax,
        v,
        y,
    }
}

/// Semantic vector `y` of a token sequence.
pub fn cdssm_forward(tokens: &[String], params: &CdssmParams) -> Vec<f64> {
    tower(&text_features(tokens, &params.shape), params).y
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        DEGENERATE_COSINES.fetch_add(1, Ordering::Relaxed);
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cdssm_similarity(query: &[String], doc: &[String], params: &CdssmParams) -> f64 {
    cosine(&cdssm_forward(query, params), &cdssm_forward(doc, params))
}

/// Gradient of cosine(a, b) with respect to `a`.
fn cosine_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return (0.0, vec![0.0; a.len()]);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let c = dot / (na * nb);
    let g = a
        .iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - c * x / (na * na))
        .collect();
    (c, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w_conv: Vec<f64>,
    pub w_sem: Vec<f64>,
}

impl Gradients {
    fn zeros(p: &CdssmParams) -> Self {
        Gradients {
            w_conv: vec![0.0; p.w_conv.len()],
            w_sem: vec![0.0; p.w_sem.len()],
        }
    }
}

fn backprop_tower(t: &Tower, dy: &[f64], p: &CdssmParams, g: &mut Gradients) {
    let s = p.shape;
    let in_dim = s.input_dim();
    let mut dv = vec![0.0; s.conv_dim];
    for i in 0..s.sem_dim {
        let dz = dy[i] * (1.0 - t.y[i] * t.y[i]);
        if dz == 0.0 {
            continue;
        }
        for k in 0..s.conv_dim {
            g.w_sem[i * s.conv_dim + k] += dz * t.v[k];
            dv[k] += dz * p.w_sem[i * s.conv_dim + k];
        }
    }
    for k in 0..s.conv_dim {
        let win = t.argmax[k];
        let h = t.h[win][k];
        let dz = dv[k] * (1.0 - h * h);
        if dz == 0.0 {
            continue;
        }
        for &(j, c) in &t.windows[win] {
            g.w_conv[k * in_dim + j] += dz * c;
        }
    }
}

/// One training example: a query, its clicked document and negative documents.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub query: &'a TextFeatures,
    pub positive: &'a TextFeatures,
    pub negatives: Vec<&'a TextFeatures>,
}

/// Softmax loss of one sample; accumulates its gradient into `grad` when given.
fn sample_loss(
    sample: &Sample<'_>,
    gamma: f64,
    p: &CdssmParams,
    grad: Option<&mut Gradients>,
) -> f64 {
    let q = tower(sample.query, p);
    let docs: Vec<Tower> = std::iter::once(sample.positive)
        .chain(sample.negatives.iter().copied())
        .map(|d| tower(d, p))
        .collect();
    let mut sims = Vec::with_capacity(docs.len());
    let mut dq_parts = Vec::with_capacity(docs.len());
    let mut dd_parts = Vec::with_capacity(docs.len());
    for d in &docs {
        let (c, gq) = cosine_grad(&q.y, &d.y);
        let (_, gd) = cosine_grad(&d.y, &q.y);
        sims.push(c);
        dq_parts.push(gq);
        dd_parts.push(gd);
    }
    let logits: Vec<f64> = sims.iter().map(|s| gamma * s).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let loss = max + z.ln() - logits[0];
    if let Some(grad) = grad {
        let mut dyq = vec![0.0; p.shape.sem_dim];
        for (j, d) in docs.iter().enumerate() {
            let prob = (logits[j] - max).exp() / z;
            let ds = gamma * (prob - if j == 0 { 1.0 } else { 0.0 });
            for (acc, g) in dyq.iter_mut().zip(&dq_parts[j]) {
                *acc += ds * g;
            }
            let dyd: Vec<f64> = dd_parts[j].iter().map(|g| ds * g).collect();
            backprop_tower(d, &dyd, p, grad);
        }
        backprop_tower(&q, &dyq, p, grad);
    }
    loss
}

/// Loss of a sample and its analytic gradient.
pub fn loss_and_gradient(
    sample: &Sample<'_>,
    gamma: f64,
    params: &CdssmParams,
) -> (f64, Gradients) {
    let mut g = Gradients::zeros(params);
    let loss = sample_loss(sample, gamma, params, Some(&mut g));
    (loss, g)
}

pub fn sample_loss_only(sample: &Sample<'_>, gamma: f64, params: &CdssmParams) -> f64 {
    sample_loss(sample, gamma, params, None)
}

/// Token-level gradient-check input.
#[derive(Debug, Clone)]
pub struct GradCheckSample {
    pub query: Vec<String>,
    pub positive: Vec<String>,
    pub negatives: Vec<Vec<String>>,
}

pub const GRAD_CHECK_STEP: f64 = 1e-4;

/// Relative error of an analytic against a numeric derivative. Both below
/// `1e-10` in magnitude counts as agreement.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Max relative error between `analytic` (a gradient for `sample`) and
/// central finite differences with step `h` over every weight.
pub fn grad_check_against(
    params: &CdssmParams,
    sample: &GradCheckSample,
    gamma: f64,
    analytic: &Gradients,
    h: f64,
) -> Result<f64> {
    params.validate()?;
    if sample.negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "gradient check needs at least one negative document".into(),
        ));
    }
    let shape = params.shape;
    let q = text_features(&sample.query, &shape);
    let pos = text_features(&sample.positive, &shape);
    let negs: Vec<TextFeatures> = sample
        .negatives
        .iter()
        .map(|n| text_features(n, &shape))
        .collect();
    let s = Sample {
        query: &q,
        positive: &pos,
        negatives: negs.iter().collect(),
    };
    let mut p = params.clone();
    let mut worst = 0.0f64;
    for i in 0..p.w_conv.len() {
        let orig = p.w_conv[i];
        p.w_conv[i] = orig + h;
        let up = sample_loss_only(&s, gamma, &p);
        p.w_conv[i] = orig - h;
        let down = sample_loss_only(&s, gamma, &p);
        p.w_conv[i] = orig;
        worst = worst.max(relative_error(analytic.w_conv[i], (up - down) / (2.0 * h)));
    }
    for i in 0..p.w_sem.len() {
        let orig = p.w_sem[i];
        p.w_sem[i] = orig + h;
        let up = sample_loss_only(&s, gamma, &p);
        p.w_sem[i] = orig - h;
        let down = sample_loss_only(&s, gamma, &p);
        p.w_sem[i] = orig;
        worst = worst.max(relative_error(analytic.w_sem[i], (up - down) / (2.0 * h)));
    }
    Ok(worst)
}

/// Checks the analytic training-loss gradient against central differences
/// (step 1e-4) and returns the max relative error.
pub fn cdssm_grad_check(params: &CdssmParams, sample: &GradCheckSample, gamma: f64) -> Result<f64> {
    cdssm_grad_check_step(params, sample, gamma, GRAD_CHECK_STEP)
}

pub fn cdssm_grad_check_step(
    params: &CdssmParams,
    sample: &GradCheckSample,
    gamma: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    if sample.negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "gradient check needs at least one negative document".into(),
        ));
    }
    let shape = params.shape;
    let q = text_features(&sample.query, &shape);
    let pos = text_features(&sample.positive, &shape);
    let negs: Vec<TextFeatures> = sample
        .negatives
        .iter()
        .map(|n| text_features(n, &shape))
        .collect();
    let s = Sample {
        query: &q,
        positive: &pos,
        negatives: negs.iter().collect(),
    };
    let (_, analytic) = loss_and_gradient(&s, gamma, params);
    grad_check_against(params, sample, gamma, &analytic, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdssmTrainConfig {
    pub shape: CdssmShape,
    pub negatives: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CdssmTrainConfig {
    fn default() -> Self {
        CdssmTrainConfig {
            shape: CdssmShape::default(),
            negatives: 4,
            gamma: 10.0,
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 32,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CdssmTrainReport {
    /// Mean training loss before training and after each epoch.
    pub losses: Vec<f64>,
}

struct Batches {
    /// Ranges into the (shuffled) pair order.
    ranges: Vec<std::ops::Range<usize>>,
}

fn make_batches(n: usize, batch_size: usize, negatives: usize) -> Batches {
    let mut ranges: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + batch_size).min(n);
        ranges.push(start..end);
        start = end;
    }
    // A trailing batch too small for its negatives joins the previous one.
    if ranges.len() > 1 && ranges.last().unwrap().len() <= negatives {
        let last = ranges.pop().unwrap();
        ranges.last_mut().unwrap().end = last.end;
    }
    Batches { ranges }
}

fn batch_samples<'a>(
    order: &[usize],
    range: std::ops::Range<usize>,
    queries: &'a [TextFeatures],
    docs: &'a [TextFeatures],
    negatives: usize,
) -> Vec<Sample<'a>> {
    let idx = &order[range];
    let b = idx.len();
    (0..b)
        .map(|i| Sample {
            query: &queries[idx[i]],
            positive: &docs[idx[i]],
            negatives: (1..=negatives).map(|o| &docs[idx[(i + o) % b]]).collect(),
        })
        .collect()
}

/// Trains C-DSSM weights on clicked (query, document) pairs.
///
/// Pairs are shuffled once with the seed and cut into fixed batches; the
/// negatives of each query are the next `negatives` documents of its batch,
/// cyclically. Each batch takes one gradient step on the batch-mean loss.
pub fn cdssm_train(
    pairs: &[(Vec<String>, Vec<String>)],
    cfg: &CdssmTrainConfig,
) -> Result<(CdssmParams, CdssmTrainReport)> {
    if pairs.is_empty() {
        return Err(Error::TrainingData(
            "C-DSSM training needs at least one pair".into(),
        ));
    }
    let effective_batch = cfg.batch_size.min(pairs.len());
    if cfg.negatives == 0 || cfg.negatives >= effective_batch {
        return Err(Error::InvalidArgument(format!(
            "negatives per pair ({}) must be in 1..batch size ({effective_batch})",
            cfg.negatives
        )));
    }
    let mut params = CdssmParams::init(cfg.shape, cfg.seed);
    let queries: Vec<TextFeatures> = pairs
        .iter()
        .map(|(q, _)| text_features(q, &cfg.shape))
        .collect();
    let docs: Vec<TextFeatures> = pairs
        .iter()
        .map(|(_, d)| text_features(d, &cfg.shape))
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    order.shuffle(&mut rng);
    let batches = make_batches(pairs.len(), effective_batch, cfg.negatives);

    let mean_loss = |p: &CdssmParams| -> f64 {
        let mut total = 0.0;
        for r in &batches.ranges {
            for s in batch_samples(&order, r.clone(), &queries, &docs, cfg.negatives) {
                total += sample_loss_only(&s, cfg.gamma, p);
            }
        }
        total / pairs.len() as f64
    };

    let mut losses = vec![mean_loss(&params)];
    for _ in 0..cfg.epochs {
        for r in &batches.ranges {
            let samples = batch_samples(&order, r.clone(), &queries, &docs, cfg.negatives);
            let mut grad = Gradients::zeros(&params);
            for s in &samples {
                sample_loss(s, cfg.gamma, &params, Some(&mut grad));
            }
            let step = cfg.learning_rate / samples.len() as f64;
            for (w, g) in params.w_conv.iter_mut().zip(&grad.w_conv) {
                *w -= step * g;
            }
            for (w, g) in params.w_sem.iter_mut().zip(&grad.w_sem) {
                *w -= step * g;
            }
        }
        losses.push(mean_loss(&params));
    }
    Ok((params, CdssmTrainReport { losses }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn small() -> CdssmShape {
        CdssmShape {
            trigram_dim: 50,
            window: 3,
            conv_dim: 8,
            sem_dim: 4,
        }
    }

    #[test]
    fn trigrams_of_short_word() {
        // #a# has exactly one trigram.
        let t = word_trigrams("a", 1000);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].1, 1.0);
        let total: f64 = word_trigrams("cities", 7).iter().map(|x| x.1).sum();
        assert_eq!(total, 6.0);
    }

    #[test]
    fn zero_weights_give_zero_vector() {
        let p = CdssmParams::zeros(small());
        assert!(cdssm_forward(&toks("a b c"), &p).iter().all(|&x| x == 0.0));
        let before = degenerate_similarity_count();
        assert_eq!(cdssm_similarity(&toks("a"), &toks("b"), &p), 0.0);
        assert!(degenerate_similarity_count() > before);
    }

    #[test]
    fn single_token_pools_one_window() {
        let p = CdssmParams::init(small(), 3);
        let t = tower(&text_features(&toks("zebra"), &p.shape), &p);
        assert_eq!(t.h.len(), 1);
        assert_eq!(t.v, t.h[0]);
    }

    #[test]
    fn empty_input_uses_padding_window() {
        let p = CdssmParams::init(small(), 3);
        let t = tower(&Vec::new(), &p);
        assert_eq!(t.windows.len(), 1);
        assert!(t.y.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn word_order_matters() {
        let p = CdssmParams::init(small(), 11);
        let a = cdssm_forward(&toks("california cities population"), &p);
        let b = cdssm_forward(&toks("population california cities"), &p);
        assert_ne!(a, b);
    }

    #[test]
    fn self_similarity_is_one() {
        let p = CdssmParams::init(small(), 5);
        let s = cdssm_similarity(&toks("san jose"), &toks("san jose"), &p);
        assert!((s - 1.0).abs() < 1e-12);
    }

    fn sample() -> GradCheckSample {
        GradCheckSample {
            query: toks("california cities"),
            positive: toks("list of cities in california"),
            negatives: vec![toks("zebra stripes"), toks("graph database")],
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = CdssmParams::init(small(), 17);
        let err = cdssm_grad_check(&p, &sample(), 10.0).unwrap();
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let p = CdssmParams::init(small(), 17);
        let s = sample();
        let shape = p.shape;
        let q = text_features(&s.query, &shape);
        let pos = text_features(&s.positive, &shape);
        let negs: Vec<TextFeatures> = s
            .negatives
            .iter()
            .map(|n| text_features(n, &shape))
            .collect();
        let (_, mut g) = loss_and_gradient(
            &Sample {
                query: &q,
                positive: &pos,
                negatives: negs.iter().collect(),
            },
            10.0,
            &p,
        );
        for x in &mut g.w_sem {
            *x = -*x;
        }
        let err = grad_check_against(&p, &s, 10.0, &g, GRAD_CHECK_STEP).unwrap();
        assert!(err > 0.1, "{err}");
    }

    #[test]
    fn grad_check_requires_a_negative() {
        let p = CdssmParams::init(small(), 1);
        let mut s = sample();
        s.negatives.clear();
        assert!(cdssm_grad_check(&p, &s, 10.0).is_err());
    }

    #[test]
    fn zero_epochs_returns_init() {
        let cfg = CdssmTrainConfig {
            shape: small(),
            epochs: 0,
            negatives: 1,
            ..CdssmTrainConfig::default()
        };
        let pairs = vec![(toks("a"), toks("b")), (toks("c"), toks("d"))];
        let (p, _) = cdssm_train(&pairs, &cfg).unwrap();
        assert_eq!(p, CdssmParams::init(small(), cfg.seed));
    }

    #[test]
    fn negatives_must_fit_in_batch() {
        let cfg = CdssmTrainConfig {
            shape: small(),
            negatives: 2,
            batch_size: 2,
            ..CdssmTrainConfig::default()
        };
        let pairs = vec![
            (toks("a"), toks("b")),
            (toks("c"), toks("d")),
            (toks("e"), toks("f")),
        ];
        assert!(cdssm_train(&pairs, &cfg).is_err());
        assert!(cdssm_train(&[], &cfg).is_err());
    }

    fn cluster_pairs(n: usize, seed: u64) -> Vec<(Vec<String>, Vec<String>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cats = ["cat", "kitten", "feline", "meow", "whiskers", "purr"];
        let dogs = ["dog", "puppy", "canine", "bark", "leash", "fetch"];
        (0..n)
            .map(|i| {
                let words = if i % 2 == 0 { &cats } else { &dogs };
                let mut pick = |k: usize| -> Vec<String> {
                    (0..k)
                        .map(|_| words[rng.gen_range(0..words.len())].to_string())
                        .collect()
                };
                (pick(2), pick(5))
            })
            .collect()
    }

    #[test]
    fn training_separates_clusters() {
        let cfg = CdssmTrainConfig {
            shape: CdssmShape {
                trigram_dim: 200,
                window: 3,
                conv_dim: 16,
                sem_dim: 8,
            },
            negatives: 3,
            gamma: 10.0,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 8,
            seed: 3,
        };
        let (p, report) = cdssm_train(&cluster_pairs(64, 1), &cfg).unwrap();
        assert!(report.losses.last().unwrap() < &report.losses[0]);
        let held_out = cluster_pairs(40, 99);
        let (mut same, mut cross, mut ns, mut nc) = (0.0, 0.0, 0, 0);
        for (i, (q, _)) in held_out.iter().enumerate() {
            for (j, (_, d)) in held_out.iter().enumerate() {
                let s = cdssm_similarity(q, d, &p);
                if i % 2 == j % 2 {
                    same += s;
                    ns += 1;
                } else {
                    cross += s;
                    nc += 1;
                }
            }
        }
        assert!(same / ns as f64 > cross / nc as f64 + 0.1);
    }

    #[test]
    fn full_batch_loss_is_non_increasing_for_small_steps() {
        let cfg = CdssmTrainConfig {
            shape: small(),
            negatives: 3,
            gamma: 10.0,
            learning_rate: 0.01,
            epochs: 15,
            batch_size: 16,
            seed: 5,
        };
        let (_, report) = cdssm_train(&cluster_pairs(16, 4), &cfg).unwrap();
        for w in report.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", report.losses);
        }
    }
}
