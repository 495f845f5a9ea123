use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureRow};
use super::tree::{Grower, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.min(d),
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: MaxFeatures,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            max_depth: None,
            min_leaf: 1,
            features_per_split: MaxFeatures::Sqrt,
            bootstrap: true,
            rng_seed: 42,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize, rng_seed: u64) -> ForestParams {
        ForestParams {
            n_trees,
            rng_seed,
            ..ForestParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidArgument("min_leaf must be >= 1".into()));
        }
        if let MaxFeatures::Fraction(f) = self.features_per_split {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument("feature fraction must be in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Random forest over `[ham, spam]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub n_features: usize,
    pub schema_version: String,
    pub class_labels: [String; 2],
    /// Out-of-bag accuracy at the 0.5 threshold; NaN without bootstrap.
    pub oob_accuracy: f64,
}

/// Per-example out-of-bag scores from training.
#[derive(Debug, Clone, PartialEq)]
pub struct OobReport {
    /// Spam-vote fraction over trees that did not see the example, if any.
    pub scores: Vec<Option<f64>>,
    pub accuracy: f64,
}

pub fn train(data: &Dataset, params: &ForestParams, schema_version: &str) -> Result<Forest> {
    train_with_oob(data, params, schema_version).map(|(f, _)| f)
}

/// Trains a forest; tree `t` draws from its own ChaCha8 stream `t + 1` of the seed.
pub fn train_with_oob(data: &Dataset, params: &ForestParams, schema_version: &str) -> Result<(Forest, OobReport)> {
    params.validate()?;
    data.require_both_classes()?;
    let n = data.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        features_per_split: params.features_per_split.resolve(data.n_features()),
    };
    let grown: Vec<(Tree, Vec<(u32, bool)>)> = (0..params.n_trees)
        .into_par_iter()
        .map_init(
            || Grower::new(data, &tree_params),
            |grower, t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
                rng.set_stream(t as u64 + 1);
                let rows: Vec<(u32, u32)> = if params.bootstrap {
                    let mut w = vec![0u32; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1;
                    }
                    w.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(i, c)| (i as u32, c)).collect()
                } else {
                    (0..n as u32).map(|i| (i, 1)).collect()
                };
                let mut in_bag = vec![false; n];
                for &(r, _) in &rows {
                    in_bag[r as usize] = true;
                }
                let tree = grower.grow(rows, &mut rng);
                let oob: Vec<(u32, bool)> = (0..n)
                    .filter(|&i| !in_bag[i])
                    .map(|i| (i as u32, tree.votes_spam(&data.row(i))))
                    .collect();
                (tree, oob)
            },
        )
        .collect();

    let mut votes = vec![[0u32; 2]; n];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, oob) in grown {
        for (r, spam) in oob {
            votes[r as usize][spam as usize] += 1;
        }
        trees.push(tree);
    }
    let scores: Vec<Option<f64>> = votes
        .iter()
        .map(|v| {
            let total = v[0] + v[1];
            (total > 0).then(|| v[1] as f64 / total as f64)
        })
        .collect();
    let (mut hit, mut seen) = (0usize, 0usize);
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = s {
            seen += 1;
            if (*s >= 0.5) == data.label(i).is_spam() {
                hit += 1;
            }
        }
    }
    let accuracy = if seen == 0 { f64::NAN } else { hit as f64 / seen as f64 };
    let forest = Forest {
        trees,
        params: *params,
        n_features: data.n_features(),
        schema_version: schema_version.to_string(),
        class_labels: [Label::Ham.to_string(), Label::Spam.to_string()],
        oob_accuracy: accuracy,
    };
    Ok((forest, OobReport { scores, accuracy }))
}

impl Forest {
    /// Fraction of trees voting spam.
    pub fn predict(&self, x: &(impl FeatureRow + ?Sized)) -> Result<f64> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.dim(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &(impl FeatureRow + ?Sized)) -> f64 {
        let spam = self.trees.iter().filter(|t| t.votes_spam(x)).count();
        spam as f64 / self.trees.len() as f64
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        Ok((0..data.len()).map(|i| self.predict_unchecked(&data.row(i))).collect())
    }

    pub fn check_schema(&self, expected: &str) -> Result<()> {
        if self.schema_version != expected {
            return Err(Error::SchemaMismatch {
                expected: expected.to_string(),
                found: self.schema_version.clone(),
            });
        }
        Ok(())
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

pub fn predict(forest: &Forest, x: &[f64]) -> Result<f64> {
    forest.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostMatrix {
    pub cost_fp: f64,
    pub cost_fn: f64,
}

impl Default for CostMatrix {
    fn default() -> Self {
        CostMatrix {
            cost_fp: 1.0,
            cost_fn: 1.0,
        }
    }
}

impl CostMatrix {
    pub fn new(cost_fp: f64, cost_fn: f64) -> Result<CostMatrix> {
        if !(cost_fp > 0.0 && cost_fp.is_finite() && cost_fn > 0.0 && cost_fn.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "costs must be positive and finite, got ({cost_fp}, {cost_fn})"
            )));
        }
        Ok(CostMatrix { cost_fp, cost_fn })
    }

    /// Minimum-expected-cost threshold on the spam score.
    pub fn threshold(&self) -> f64 {
        self.cost_fp / (self.cost_fp + self.cost_fn)
    }
}

impl std::str::FromStr for CostMatrix {
    type Err = Error;

    /// `"fp,fn"`, e.g. `"1,1"`.
    fn from_str(s: &str) -> Result<CostMatrix> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidArgument(format!("costs must be \"fp,fn\", got {s:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad cost {x:?}")))
        };
        CostMatrix::new(parse(a)?, parse(b)?)
    }
}

/// Spam iff `score >= cost_fp / (cost_fp + cost_fn)`.
pub fn decide(score: f64, costs: &CostMatrix) -> Label {
    if score >= costs.threshold() {
        Label::Spam
    } else {
        Label::Ham
    }
}
