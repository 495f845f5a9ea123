//! CART classification trees: Gini impurity, midpoint thresholds, weighted rows.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, FeatureRow};

pub const LEAF: u32 = u32::MAX;

/// Internal node when `feature != LEAF`; otherwise a leaf whose class
/// counts are stored in `left` (ham) and `right` (spam).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
}

impl Node {
    pub fn leaf(ham: u32, spam: u32) -> Node {
        Node {
            feature: LEAF,
            threshold: 0.0,
            left: ham,
            right: spam,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }

    /// Class counts of a leaf as `[ham, spam]`.
    pub fn counts(&self) -> [u32; 2] {
        [self.left, self.right]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &(impl FeatureRow + ?Sized)) -> &Node {
        let mut n = &self.nodes[0];
        while !n.is_leaf() {
            let v = x.get(n.feature as usize);
            n = &self.nodes[if v <= n.threshold { n.left } else { n.right } as usize];
        }
        n
    }

    /// Spam vote; ties go to ham.
    pub fn votes_spam(&self, x: &(impl FeatureRow + ?Sized)) -> bool {
        let c = self.leaf_for(x).counts();
        c[1] > c[0]
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(nodes, n.left as usize).max(go(nodes, n.right as usize))
            }
        }
        go(&self.nodes, 0)
    }
}

pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

/// Reusable scratch space for growing trees on one dataset.
pub struct Grower<'a> {
    data: &'a Dataset,
    params: &'a TreeParams,
    stamp: Vec<u32>,
    generation: u32,
    slot: Vec<u32>,
    present: Vec<u32>,
    buckets: Vec<Vec<(f64, u32)>>,
    groups: Vec<(f64, f64, f64)>,
}

struct Work {
    node: usize,
    rows: Vec<(u32, u32)>,
    depth: usize,
}

struct Split {
    score: f64,
    feature: u32,
    threshold: f64,
    slot: usize,
}

impl<'a> Grower<'a> {
    pub fn new(data: &'a Dataset, params: &'a TreeParams) -> Grower<'a> {
        Grower {
            data,
            params,
            stamp: vec![0; data.n_features()],
            generation: 0,
            slot: vec![0; data.n_features()],
            present: Vec::new(),
            buckets: Vec::new(),
            groups: Vec::new(),
        }
    }

    /// Grows one tree over `(row, weight)` pairs with non-zero weight.
    pub fn grow(&mut self, rows: Vec<(u32, u32)>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::leaf(0, 0)];
        let mut stack = vec![Work { node: 0, rows, depth: 0 }];
        while let Some(w) = stack.pop() {
            let mut counts = [0u64; 2];
            for &(r, wt) in &w.rows {
                counts[self.data.label(r as usize).index()] += wt as u64;
            }
            let total = counts[0] + counts[1];
            let leaf = Node::leaf(counts[0] as u32, counts[1] as u32);
            let stop = counts[0] == 0
                || counts[1] == 0
                || self.params.max_depth.is_some_and(|d| w.depth >= d)
                || total < 2 * self.params.min_leaf as u64;
            let split = if stop { None } else { self.best_split(&w.rows, counts, rng) };
            let Some(split) = split else {
                nodes[w.node] = leaf;
                continue;
            };
            let mut value = vec![0.0; w.rows.len()];
            for &(v, pos) in &self.buckets[split.slot] {
                value[pos as usize] = v;
            }
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for (pos, &rw) in w.rows.iter().enumerate() {
                if value[pos] <= split.threshold {
                    left.push(rw);
                } else {
                    right.push(rw);
                }
            }
            let li = nodes.len();
            nodes.push(Node::leaf(0, 0));
            nodes.push(Node::leaf(0, 0));
            nodes[w.node] = Node {
                feature: split.feature,
                threshold: split.threshold,
                left: li as u32,
                right: li as u32 + 1,
            };
            // Right pushed first so the left subtree is grown first.
            stack.push(Work {
                node: li + 1,
                rows: right,
                depth: w.depth + 1,
            });
            stack.push(Work {
                node: li,
                rows: left,
                depth: w.depth + 1,
            });
        }
        Tree { nodes }
    }

    /// Samples candidate features among those non-constant in the node until
    /// `features_per_split` non-constant ones have been scored or none remain.
    fn best_split(&mut self, rows: &[(u32, u32)], counts: [u64; 2], rng: &mut ChaCha8Rng) -> Option<Split> {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let gen = self.generation;
        self.present.clear();
        for &(r, _) in rows {
            for &f in self.data.row(r as usize).indices {
                if self.stamp[f as usize] != gen {
                    self.stamp[f as usize] = gen;
                    self.present.push(f);
                }
            }
        }
        let k = self.params.features_per_split.max(1);
        let n_present = self.present.len();
        let mut next = 0;
        let mut scored = 0;
        let mut best: Option<Split> = None;
        // Features are scored in batches so each batch costs one pass over the node's rows.
        let mut best_bucket: Vec<(f64, u32)> = Vec::new();
        while scored < k && next < n_present {
            let batch = (k - scored).min(n_present - next);
            for i in next..next + batch {
                let j = rng.gen_range(i..n_present);
                self.present.swap(i, j);
            }
            let chosen: Vec<u32> = self.present[next..next + batch].to_vec();
            next += batch;
            let gen2 = {
                self.generation = self.generation.wrapping_add(1);
                if self.generation == 0 {
                    self.stamp.iter_mut().for_each(|s| *s = 0);
                    self.generation = 1;
                }
                self.generation
            };
            if self.buckets.len() < batch {
                self.buckets.resize_with(batch, Vec::new);
            }
            for (s, &f) in chosen.iter().enumerate() {
                self.stamp[f as usize] = gen2;
                self.slot[f as usize] = s as u32;
                self.buckets[s].clear();
            }
            for (pos, &(r, _)) in rows.iter().enumerate() {
                let row = self.data.row(r as usize);
                for (&f, &v) in row.indices.iter().zip(row.values) {
                    if self.stamp[f as usize] == gen2 {
                        self.buckets[self.slot[f as usize] as usize].push((v, pos as u32));
                    }
                }
            }
            for (s, &f) in chosen.iter().enumerate() {
                let Some((score, threshold)) = self.score_feature(s, rows, counts) else {
                    continue;
                };
                scored += 1;
                if score.is_finite() && best.as_ref().map_or(true, |b| score > b.score) {
                    best_bucket.clear();
                    best_bucket.extend_from_slice(&self.buckets[s]);
                    best = Some(Split {
                        score,
                        feature: f,
                        threshold,
                        slot: 0,
                    });
                }
            }
        }
        // Park the winning feature's values in slot 0 for partitioning.
        if best.is_some() {
            if self.buckets.is_empty() {
                self.buckets.push(Vec::new());
            }
            std::mem::swap(&mut self.buckets[0], &mut best_bucket);
        }
        best
    }

    /// Best split of one bucketed feature: `None` when the feature is constant
    /// in the node, `Some((-inf, _))` when no split satisfies `min_leaf`.
    /// The score is `sum over children of (c0^2 + c1^2) / n`, which grows as
    /// the weighted Gini impurity of the children falls.
    fn score_feature(&mut self, slot: usize, rows: &[(u32, u32)], counts: [u64; 2]) -> Option<(f64, f64)> {
        let bucket = &mut self.buckets[slot];
        bucket.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nz = [0f64; 2];
        self.groups.clear();
        for &(v, pos) in bucket.iter() {
            let (r, w) = rows[pos as usize];
            let c = self.data.label(r as usize).index();
            let w = w as f64;
            nz[c] += w;
            match self.groups.last_mut() {
                Some(g) if g.0 == v => {
                    if c == 0 {
                        g.1 += w
                    } else {
                        g.2 += w
                    }
                }
                _ => self.groups.push((v, if c == 0 { w } else { 0.0 }, if c == 1 { w } else { 0.0 })),
            }
        }
        let zero = (counts[0] as f64 - nz[0], counts[1] as f64 - nz[1]);
        if zero.0 + zero.1 > 0.0 {
            let at = self.groups.partition_point(|g| g.0 < 0.0);
            self.groups.insert(at, (0.0, zero.0, zero.1));
        }
        if self.groups.len() < 2 {
            return None;
        }
        let total = (counts[0] + counts[1]) as f64;
        let min_leaf = self.params.min_leaf as f64;
        let (mut l0, mut l1) = (0.0, 0.0);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for g in 0..self.groups.len() - 1 {
            l0 += self.groups[g].1;
            l1 += self.groups[g].2;
            let nl = l0 + l1;
            let nr = total - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (r0, r1) = (counts[0] as f64 - l0, counts[1] as f64 - l1);
            let score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
            if score > best.0 {
                let (a, b) = (self.groups[g].0, self.groups[g + 1].0);
                let mut t = a + (b - a) / 2.0;
                if t >= b || !t.is_finite() {
                    t = a;
                }
                best = (score, t);
            }
        }
        Some(best)
    }
}
