use crate::error::{Error, Result};
use crate::Label;

/// Read access to one feature vector, dense or sparse.
pub trait FeatureRow {
    fn get(&self, feature: usize) -> f64;
    fn dim(&self) -> usize;
}

impl FeatureRow for [f64] {
    fn get(&self, feature: usize) -> f64 {
        self[feature]
    }

    fn dim(&self) -> usize {
        self.len()
    }
}

impl FeatureRow for Vec<f64> {
    fn get(&self, feature: usize) -> f64 {
        self[feature]
    }

    fn dim(&self) -> usize {
        self.len()
    }
}

/// Sparse row view: sorted feature indices with their non-zero values.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
    pub dim: usize,
}

impl FeatureRow for SparseRow<'_> {
    fn get(&self, feature: usize) -> f64 {
        match self.indices.binary_search(&(feature as u32)) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Owned sparse vector, as produced by the n-gram featurizers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    /// Builds from unsorted `(index, value)` pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> SparseVec {
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVec::default();
        for (i, v) in pairs {
            if out.indices.last() == Some(&i) {
                *out.values.last_mut().unwrap() += v;
            } else {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        let keep: Vec<bool> = out.values.iter().map(|v| *v != 0.0).collect();
        let mut k = keep.iter();
        out.indices.retain(|_| *k.next().unwrap());
        out.values.retain(|v| *v != 0.0);
        out
    }

    pub fn from_dense(values: &[f64]) -> SparseVec {
        let mut out = SparseVec::default();
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(i as u32);
                out.values.push(v);
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            v[i as usize] = x;
        }
        v
    }
}

/// Labeled examples in compressed sparse row layout. Zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(n_features: usize) -> Dataset {
        Dataset {
            n_features,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: &[Label]) -> Result<Dataset> {
        let d = rows.first().map_or(0, Vec::len);
        let mut ds = Dataset::new(d);
        for (row, &label) in rows.iter().zip(labels) {
            ds.push_dense(row, label)?;
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        Ok(ds)
    }

    pub fn from_sparse(rows: &[SparseVec], n_features: usize, labels: &[Label]) -> Result<Dataset> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut ds = Dataset::new(n_features);
        for (row, &label) in rows.iter().zip(labels) {
            ds.push_sparse(row, label)?;
        }
        Ok(ds)
    }

    pub fn push_dense(&mut self, row: &[f64], label: Label) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        let r = self.len();
        for (f, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, feature: f });
            }
        }
        for (f, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.indices.push(f as u32);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.labels.push(label);
        Ok(())
    }

    pub fn push_sparse(&mut self, row: &SparseVec, label: Label) -> Result<()> {
        let r = self.len();
        let mut prev: Option<u32> = None;
        for (&f, &v) in row.indices.iter().zip(&row.values) {
            if f as usize >= self.n_features {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features,
                    found: f as usize + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, feature: f as usize });
            }
            if prev.is_some_and(|p| p >= f) {
                return Err(Error::InvalidArgument(format!("row {r}: sparse indices must be strictly increasing")));
            }
            prev = Some(f);
        }
        for (&f, &v) in row.indices.iter().zip(&row.values) {
            if v != 0.0 {
                self.indices.push(f);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
            dim: self.n_features,
        }
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let r = self.row(i);
        let mut v = vec![0.0; self.n_features];
        for (&f, &x) in r.indices.iter().zip(r.values) {
            v[f as usize] = x;
        }
        v
    }

    /// Rows `idx` in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut ds = Dataset::new(self.n_features);
        for &i in idx {
            let r = self.row(i);
            ds.indices.extend_from_slice(r.indices);
            ds.values.extend_from_slice(r.values);
            ds.indptr.push(ds.indices.len());
            ds.labels.push(self.labels[i]);
        }
        ds
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let c = self.class_counts();
        if c[0] == 0 {
            return Err(Error::SingleClass { missing: Label::Ham });
        }
        if c[1] == 0 {
            return Err(Error::SingleClass { missing: Label::Spam });
        }
        Ok(())
    }
}
