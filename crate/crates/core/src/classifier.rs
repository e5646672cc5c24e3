//! Boosted regression trees on the logistic loss, producing F(Q,T).

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Bound on a single Newton leaf step before shrinkage.
const MAX_LEAF_STEP: f64 = 4.0;
const MIN_HESSIAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 5,
            lambda: 1.0,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub features: FeatureVector,
    pub label: bool,
}

/// Samples with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Tree {
    Leaf {
        value: f64,
    },
    Split {
        feature: String,
        index: usize,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf { value } => return *value,
                Tree::Split {
                    index,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*index] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn scale(&mut self, factor: f64) {
        match self {
            Tree::Leaf { value } => *value *= factor,
            Tree::Split { left, right, .. } => {
                left.scale(factor);
                right.scale(factor);
            }
        }
    }

    fn check(&self, names: &[String], max_depth: usize) -> Result<()> {
        if self.depth() > max_depth {
            return Err(Error::InvalidArgument(format!(
                "tree depth {} exceeds max_depth {max_depth}",
                self.depth()
            )));
        }
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if let Tree::Split {
                feature,
                index,
                left,
                right,
                ..
            } = node
            {
                if names.get(*index) != Some(feature) {
                    return Err(Error::InvalidArgument(format!(
                        "split on `{feature}` does not match feature #{index}"
                    )));
                }
                stack.push(left);
                stack.push(right);
            }
        }
        Ok(())
    }
}

/// Leaf values already include the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub schema_version: u32,
    pub fingerprint: String,
    pub feature_names: Vec<String>,
    pub config: GbtConfig,
    pub trees: Vec<Tree>,
}

impl BoostedModel {
    pub fn empty(fingerprint: impl Into<String>, feature_names: Vec<String>) -> Self {
        BoostedModel {
            schema_version: MODEL_SCHEMA_VERSION,
            fingerprint: fingerprint.into(),
            feature_names,
            config: GbtConfig::default(),
            trees: Vec::new(),
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.eval(x)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "model".into(),
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        for t in &self.trees {
            t.check(&self.feature_names, self.config.max_depth)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BoostedModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn predict(model: &BoostedModel, fv: &FeatureVector) -> Result<f64> {
    if fv.fingerprint != model.fingerprint {
        return Err(Error::ConfigMismatch {
            expected: model.fingerprint.clone(),
            actual: fv.fingerprint.clone(),
        });
    }
    if fv.values.len() != model.feature_names.len() {
        return Err(Error::ConfigMismatch {
            expected: format!("{} features", model.feature_names.len()),
            actual: format!("{} features", fv.values.len()),
        });
    }
    Ok(sigmoid(model.margin(&fv.values)))
}

/// Mean logistic loss of margins `f` against labels `y`.
pub fn logistic_loss(f: &[f64], y: &[f64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&f, &y)| {
            // ln(1 + e^f) - y f, computed stably.
            let softplus = if f > 0.0 {
                f + (-f).exp().ln_1p()
            } else {
                f.exp().ln_1p()
            };
            softplus - y * f
        })
        .sum();
    total / f.len() as f64
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Training loss before the first tree and after each tree.
    pub losses: Vec<f64>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    /// Sample indices per feature, sorted by feature value.
    order: &'a [Vec<usize>],
    names: &'a [String],
    cfg: &'a GbtConfig,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf(&self, members: &[usize]) -> Tree {
        let gs: f64 = members.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = members.iter().map(|&i| self.h[i]).sum();
        let denom = hs + self.cfg.lambda;
        let step = if denom > MIN_HESSIAN {
            -gs / denom
        } else {
            0.0
        };
        Tree::Leaf {
            value: step.clamp(-MAX_LEAF_STEP, MAX_LEAF_STEP) * self.cfg.learning_rate,
        }
    }

    fn best_split(&self, mask: &[bool], members: &[usize]) -> Option<BestSplit> {
        let n = members.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let gt: f64 = members.iter().map(|&i| self.g[i]).sum();
        let ht: f64 = members.iter().map(|&i| self.h[i]).sum();
        let lambda = self.cfg.lambda;
        let score = |g: f64, h: f64| {
            if h + lambda > MIN_HESSIAN {
                g * g / (h + lambda)
            } else {
                0.0
            }
        };
        let parent = score(gt, ht);
        let mut best: Option<BestSplit> = None;
        for (f, order) in self.order.iter().enumerate() {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            let sorted: Vec<usize> = order.iter().copied().filter(|&i| mask[i]).collect();
            for w in sorted.windows(2) {
                let (i, j) = (w[0], w[1]);
                gl += self.g[i];
                hl += self.h[i];
                nl += 1;
                let (a, b) = (self.x[i][f], self.x[j][f]);
                if a == b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let (gr, hr) = (gt - gl, ht - hl);
                if hl <= MIN_HESSIAN || hr <= MIN_HESSIAN {
                    continue;
                }
                let gain = score(gl, hl) + score(gr, hr) - parent;
                if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                    });
                }
            }
        }
        best
    }

    fn build(&self, members: Vec<usize>, depth: usize) -> Tree {
        if depth >= self.cfg.max_depth {
            return self.leaf(&members);
        }
        let mut mask = vec![false; self.x.len()];
        for &i in &members {
            mask[i] = true;
        }
        let Some(split) = self.best_split(&mask, &members) else {
            return self.leaf(&members);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        Tree::Split {
            feature: self.names[split.feature].clone(),
            index: split.feature,
            threshold: split.threshold,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }
}

/// Stagewise Newton boosting. Every tree is shrunk by the learning rate and,
/// if it would still raise the training loss, halved until it does not (or
/// dropped), so the loss curve is non-increasing.
pub fn train(data: &[LabeledPair], cfg: &GbtConfig) -> Result<(BoostedModel, TrainReport)> {
    if data.len() < 2 {
        return Err(Error::TrainingData(
            "need at least two labeled pairs".into(),
        ));
    }
    let positives = data.iter().filter(|p| p.label).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::TrainingData(
            "training data has a single class".into(),
        ));
    }
    if cfg.max_depth == 0 || !(cfg.learning_rate > 0.0) || !(cfg.lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "max_depth and learning_rate must be positive and lambda non-negative".into(),
        ));
    }
    let first = &data[0].features;
    for p in data {
        if p.features.fingerprint != first.fingerprint || p.features.names != first.names {
            return Err(Error::ConfigMismatch {
                expected: first.fingerprint.clone(),
                actual: p.features.fingerprint.clone(),
            });
        }
        if let Some(v) = p.features.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::TrainingData(format!("non-finite feature value {v}")));
        }
    }

    let x: Vec<Vec<f64>> = data.iter().map(|p| p.features.values.clone()).collect();
    let y: Vec<f64> = data.iter().map(|p| p.label as u8 as f64).collect();
    let n_features = first.names.len();
    let order: Vec<Vec<usize>> = (0..n_features)
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut model = BoostedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        fingerprint: first.fingerprint.clone(),
        feature_names: first.names.clone(),
        config: *cfg,
        trees: Vec::with_capacity(cfg.n_trees),
    };
    let mut margin = vec![0.0; x.len()];
    let mut losses = vec![logistic_loss(&margin, &y)];
    for _ in 0..cfg.n_trees {
        let p: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
        let g: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
        let h: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let builder = Builder {
            x: &x,
            g: &g,
            h: &h,
            order: &order,
            names: &first.names,
            cfg,
        };
        let mut tree = builder.build((0..x.len()).collect(), 0);
        let prev = *losses.last().unwrap();
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = margin
                .iter()
                .zip(&x)
                .map(|(m, xi)| m + tree.eval(xi))
                .collect();
            let loss = logistic_loss(&trial, &y);
            if loss <= prev {
                accepted = Some((trial, loss));
                break;
            }
            tree.scale(0.5);
        }
        match accepted {
            Some((trial, loss)) => {
                margin = trial;
                losses.push(loss);
                model.trees.push(tree);
            }
            None => losses.push(prev),
        }
    }
    Ok((model, TrainReport { losses }))
}
