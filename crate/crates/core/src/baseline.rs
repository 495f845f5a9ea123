//! Word n-gram and sparse orthogonal n-gram featurizers for the comparison baselines.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseVec;

/// Lowercases and splits on every character that is neither alphanumeric nor
/// `.`; a `.` survives only between two labels when the right-hand label is
/// alphabetic and at least two characters long (so `tonight.tk` stays whole
/// but `k.a.r.s` and `rotocarr0.k0nprare` split).
pub fn tokenize_basic(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lower.split(|c: char| !(c.is_alphanumeric() || c == '.')) {
        let mut current = String::new();
        for label in chunk.split('.') {
            let joinable = !current.is_empty() && label.chars().count() >= 2 && label.chars().all(char::is_alphabetic);
            if joinable {
                current.push('.');
                current.push_str(label);
            } else {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                current.push_str(label);
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// Word 1..=n_max-grams joined with `_`.
pub fn ngram_strings(tokens: &[String], n_max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        for w in tokens.windows(n) {
            out.push(w.join("_"));
        }
    }
    out
}

/// Ordered index tuples of length `n` (first and last at most `window` apart),
/// labeled with their gap pattern: `a|b|c#1,2`.
pub fn osb_strings(tokens: &[String], n: usize, window: usize) -> Vec<String> {
    let mut out = Vec::new();
    if n < 2 || tokens.len() < n {
        return out;
    }
    let mut idx = Vec::with_capacity(n);
    fn rec(tokens: &[String], n: usize, window: usize, idx: &mut Vec<usize>, out: &mut Vec<String>) {
        if idx.len() == n {
            let words: Vec<&str> = idx.iter().map(|&i| tokens[i].as_str()).collect();
            let gaps: Vec<String> = idx.windows(2).map(|w| (w[1] - w[0]).to_string()).collect();
            out.push(format!("{}#{}", words.join("|"), gaps.join(",")));
            return;
        }
        let last = *idx.last().unwrap();
        let limit = (idx[0] + window).min(tokens.len() - 1);
        // Leave room for the remaining positions.
        let remaining = n - idx.len() - 1;
        for j in last + 1..=limit.saturating_sub(remaining) {
            idx.push(j);
            rec(tokens, n, window, idx, out);
            idx.pop();
        }
    }
    for i in 0..tokens.len() {
        idx.clear();
        idx.push(i);
        rec(tokens, n, window, &mut idx, &mut out);
    }
    out
}

/// Which baseline features to produce from a token list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    /// Word 1..=n_max-grams.
    Ngram { n_max: usize },
    /// Unigrams plus gap-labeled orthogonal n-grams.
    Sgram { n: usize, window: usize },
}

impl BaselineKind {
    pub fn ngram() -> BaselineKind {
        BaselineKind::Ngram { n_max: 2 }
    }

    pub fn sgram() -> BaselineKind {
        BaselineKind::Sgram { n: 3, window: 4 }
    }

    pub fn feature_strings(&self, tokens: &[String]) -> Vec<String> {
        match *self {
            BaselineKind::Ngram { n_max } => ngram_strings(tokens, n_max),
            BaselineKind::Sgram { n, window } => {
                let mut f = ngram_strings(tokens, 1);
                f.extend(osb_strings(tokens, n, window));
                f
            }
        }
    }

    fn tag(&self) -> String {
        match *self {
            BaselineKind::Ngram { n_max } => format!("ngram:{n_max}"),
            BaselineKind::Sgram { n, window } => format!("sgram:{n}:{window}"),
        }
    }

    fn from_tag(tag: &str) -> Result<BaselineKind> {
        let parts: Vec<&str> = tag.split(':').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad baseline kind {tag:?}")));
        match parts.as_slice() {
            ["ngram", n] => Ok(BaselineKind::Ngram { n_max: num(n)? }),
            ["sgram", n, w] => Ok(BaselineKind::Sgram {
                n: num(n)?,
                window: num(w)?,
            }),
            _ => Err(Error::Config(format!("bad baseline kind {tag:?}"))),
        }
    }
}

/// Feature-string vocabulary learned from training documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabModel {
    pub kind: BaselineKind,
    index: HashMap<String, u32>,
    features: Vec<String>,
    pub cap: usize,
    pub df_min: usize,
}

pub const DEFAULT_VOCAB_CAP: usize = 50_000;
pub const DEFAULT_DF_MIN: usize = 2;

impl VocabModel {
    /// Keeps features with document frequency `>= df_min`, the `cap` most frequent
    /// (ties lexicographic), indexed in that order.
    pub fn fit(kind: BaselineKind, docs: &[Vec<String>], cap: usize, df_min: usize) -> VocabModel {
        let mut df: HashMap<String, usize> = HashMap::new();
        for tokens in docs {
            let mut feats = kind.feature_strings(tokens);
            feats.sort_unstable();
            feats.dedup();
            for f in feats {
                *df.entry(f).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= df_min).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);
        let features: Vec<String> = ranked.into_iter().map(|(f, _)| f).collect();
        VocabModel::from_features(kind, features, cap, df_min)
    }

    fn from_features(kind: BaselineKind, features: Vec<String>, cap: usize, df_min: usize) -> VocabModel {
        let index = features.iter().enumerate().map(|(i, f)| (f.clone(), i as u32)).collect();
        VocabModel {
            kind,
            index,
            features,
            cap,
            df_min,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    /// Counts of in-vocabulary features; unknown features are dropped.
    pub fn transform(&self, tokens: &[String]) -> SparseVec {
        let pairs = self
            .kind
            .feature_strings(tokens)
            .iter()
            .filter_map(|f| self.get(f).map(|i| (i, 1.0)))
            .collect();
        SparseVec::from_pairs(pairs)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kind: {}", self.kind.tag());
        let _ = writeln!(s, "# cap: {}", self.cap);
        let _ = writeln!(s, "# df_min: {}", self.df_min);
        for f in &self.features {
            let _ = writeln!(s, "{f}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<VocabModel> {
        let header = |k: &str| crate::data::header_value(text, k).ok_or_else(|| Error::Config(format!("vocab missing {k} header")));
        let kind = BaselineKind::from_tag(header("kind")?)?;
        let cap = header("cap")?.parse().map_err(|_| Error::Config("bad vocab cap".into()))?;
        let df_min = header("df_min")?.parse().map_err(|_| Error::Config("bad vocab df_min".into()))?;
        let features: Vec<String> = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).map(String::from).collect();
        Ok(VocabModel::from_features(kind, features, cap, df_min))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<VocabModel> {
        VocabModel::parse(&crate::error::read_to_string(path)?)
    }
}

/// Word n-gram counts over `vocab` (built with an n-gram kind).
pub fn ngram_features(tokens: &[String], vocab: &VocabModel) -> SparseVec {
    vocab.transform(tokens)
}

/// Gap-labeled orthogonal n-gram counts over `vocab`.
pub fn osb_features(tokens: &[String], n: usize, window: usize, vocab: &VocabModel) -> SparseVec {
    let pairs = osb_strings(tokens, n, window)
        .iter()
        .filter_map(|f| vocab.get(f).map(|i| (i, 1.0)))
        .collect();
    SparseVec::from_pairs(pairs)
}
