//! Substring clusters: mining candidate substrings from a corpus, grouping
//! them into proposals, and counting cluster hits with an Aho-Corasick DFA.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::data;
use crate::error::{Error, Result};

pub const DEFAULT_CLUSTER_COUNT: usize = 22;
pub const MIN_SUBSTRING_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub name: String,
    pub substrings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub version: String,
}

impl ClusterSet {
    pub fn bundled() -> ClusterSet {
        ClusterSet::parse(data::CLUSTERS, "bundled clusters").expect("bundled clusters parse")
    }

    pub fn load(path: &Path) -> Result<ClusterSet> {
        let text = crate::error::read_to_string(path)?;
        ClusterSet::parse(&text, &path.display().to_string())
    }

    /// Parses `[name]` sections followed by one substring per line; text after
    /// a tab is ignored.
    /// Syntax only; call [`ClusterSet::validate`] for the set invariants.
    pub fn parse(text: &str, source_name: &str) -> Result<ClusterSet> {
        let mut clusters: Vec<Cluster> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            // Anything after a tab is an annotation, e.g. `\t# support 12`.
            let line = raw.split('\t').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::malformed(source_name, i + 1, "empty cluster name"));
                }
                clusters.push(Cluster {
                    name: name.to_string(),
                    substrings: Vec::new(),
                });
                continue;
            }
            let Some(current) = clusters.last_mut() else {
                return Err(Error::malformed(source_name, i + 1, "substring before first [section]"));
            };
            current.substrings.push(line.to_lowercase());
        }
        let version = data::header_value(text, "version").unwrap_or("unversioned").to_string();
        Ok(ClusterSet { clusters, version })
    }

    /// Checks member length, cross-cluster uniqueness and, if given, the cluster count.
    pub fn validate(&self, expected_clusters: Option<usize>) -> Result<()> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for c in &self.clusters {
            for s in &c.substrings {
                if s.chars().count() < MIN_SUBSTRING_LEN {
                    return Err(Error::InvalidClusterSet(format!(
                        "substring {s:?} in [{}] is shorter than {MIN_SUBSTRING_LEN}",
                        c.name
                    )));
                }
                if let Some(first) = owner.insert(s, &c.name) {
                    return Err(Error::DuplicateSubstring {
                        substring: s.clone(),
                        first: first.to_string(),
                        second: c.name.clone(),
                    });
                }
            }
        }
        if let Some(k) = expected_clusters {
            if self.clusters.len() != k {
                return Err(Error::InvalidClusterSet(format!(
                    "expected {k} clusters, found {}",
                    self.clusters.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Applies a pruning file: `[name]` selects (or appends) a cluster, `[-name]`
    /// deletes it, `-substr` removes a member, any other line adds one.
    pub fn apply_pruning(&self, text: &str, source_name: &str) -> Result<ClusterSet> {
        let mut out = self.clone();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            // Anything after a tab is an annotation, e.g. `\t# support 12`.
            let line = raw.split('\t').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if let Some(del) = name.strip_prefix('-') {
                    out.clusters.retain(|c| c.name != del.trim());
                    current = None;
                } else {
                    let name = name.trim();
                    current = Some(match out.clusters.iter().position(|c| c.name == name) {
                        Some(idx) => idx,
                        None => {
                            out.clusters.push(Cluster {
                                name: name.to_string(),
                                substrings: Vec::new(),
                            });
                            out.clusters.len() - 1
                        }
                    });
                }
                continue;
            }
            let idx = current.ok_or_else(|| Error::malformed(source_name, i + 1, "edit before first [section]"))?;
            let members = &mut out.clusters[idx].substrings;
            match line.strip_prefix('-') {
                Some(del) => {
                    let del = del.trim().to_lowercase();
                    members.retain(|m| *m != del);
                }
                None => {
                    let add = line.to_lowercase();
                    if !members.contains(&add) {
                        members.push(add);
                    }
                }
            }
        }
        if let Some(v) = data::header_value(text, "version") {
            out.version = v.to_string();
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# version: {}\n", self.version);
        for c in &self.clusters {
            let _ = writeln!(s, "[{}]", c.name);
            for m in &c.substrings {
                let _ = writeln!(s, "{m}");
            }
        }
        s
    }
}

/// Instrumentation from one counting pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchStats {
    /// Input positions consumed by the automaton.
    pub visited: usize,
    /// Characters in the lowercased text.
    pub text_len: usize,
}

/// Case-insensitive multi-pattern counter over a dense DFA.
#[derive(Debug, Clone)]
pub struct ClusterMatcher {
    n_clusters: usize,
    alphabet: HashMap<char, u32>,
    alpha_len: usize,
    /// `delta[state * alpha_len + symbol]`
    delta: Vec<u32>,
    /// Output cluster indices per state (own and inherited through failure links).
    out_start: Vec<u32>,
    out_items: Vec<u32>,
    patterns: Vec<(String, usize)>,
}

pub fn build_matcher(clusters: &ClusterSet) -> Result<ClusterMatcher> {
    ClusterMatcher::new(clusters)
}

pub fn count_clusters(matcher: &ClusterMatcher, text: &str) -> Vec<u32> {
    matcher.count(text)
}

fn lowercase_chars(text: &str) -> impl Iterator<Item = char> + '_ {
    text.chars().flat_map(char::to_lowercase)
}

impl ClusterMatcher {
    pub fn new(clusters: &ClusterSet) -> Result<ClusterMatcher> {
        clusters.validate(None)?;
        let patterns: Vec<(String, usize)> = clusters
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.substrings.iter().map(move |s| (lowercase_chars(s).collect::<String>(), ci)))
            .collect();

        // Symbol 0 stands for every character absent from the patterns.
        let mut alphabet = HashMap::new();
        for (p, _) in &patterns {
            for ch in p.chars() {
                let next = alphabet.len() as u32 + 1;
                alphabet.entry(ch).or_insert(next);
            }
        }
        let alpha_len = alphabet.len() + 1;

        // Trie.
        let mut goto: Vec<Vec<(u32, u32)>> = vec![Vec::new()];
        let mut own: Vec<Vec<u32>> = vec![Vec::new()];
        for (p, ci) in &patterns {
            let mut s = 0usize;
            for ch in p.chars() {
                let sym = alphabet[&ch];
                s = match goto[s].iter().find(|(a, _)| *a == sym) {
                    Some(&(_, t)) => t as usize,
                    None => {
                        goto.push(Vec::new());
                        own.push(Vec::new());
                        let t = goto.len() - 1;
                        goto[s].push((sym, t as u32));
                        t
                    }
                };
            }
            own[s].push(*ci as u32);
        }

        // Breadth-first failure links, folded straight into the DFA table.
        let n = goto.len();
        let mut delta = vec![0u32; n * alpha_len];
        let mut fail = vec![0usize; n];
        let mut outputs: Vec<Vec<u32>> = own.clone();
        let mut queue = VecDeque::new();
        for &(sym, t) in &goto[0] {
            delta[sym as usize] = t;
            queue.push_back(t as usize);
        }
        while let Some(s) = queue.pop_front() {
            let f = fail[s];
            let inherited = outputs[f].clone();
            outputs[s].extend(inherited);
            for a in 0..alpha_len {
                delta[s * alpha_len + a] = delta[f * alpha_len + a];
            }
            for &(sym, t) in &goto[s] {
                let t = t as usize;
                fail[t] = if s == 0 { 0 } else { delta[f * alpha_len + sym as usize] as usize };
                delta[s * alpha_len + sym as usize] = t as u32;
                queue.push_back(t);
            }
        }

        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_items = Vec::new();
        for o in &outputs {
            out_start.push(out_items.len() as u32);
            out_items.extend(o);
        }
        out_start.push(out_items.len() as u32);

        Ok(ClusterMatcher {
            n_clusters: clusters.len(),
            alphabet,
            alpha_len,
            delta,
            out_start,
            out_items,
            patterns,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_states(&self) -> usize {
        self.out_start.len() - 1
    }

    pub fn count(&self, text: &str) -> Vec<u32> {
        self.count_with_stats(text).0
    }

    pub fn count_with_stats(&self, text: &str) -> (Vec<u32>, MatchStats) {
        let mut counts = vec![0u32; self.n_clusters];
        let mut stats = MatchStats::default();
        let mut state = 0usize;
        for ch in lowercase_chars(text) {
            stats.text_len += 1;
            stats.visited += 1;
            let sym = self.alphabet.get(&ch).copied().unwrap_or(0) as usize;
            state = self.delta[state * self.alpha_len + sym] as usize;
            let (a, b) = (self.out_start[state] as usize, self.out_start[state + 1] as usize);
            for &ci in &self.out_items[a..b] {
                counts[ci as usize] += 1;
            }
        }
        (counts, stats)
    }

    /// Reference counter: every pattern tried at every position.
    pub fn naive_count(&self, text: &str) -> Vec<u32> {
        naive_count(&self.patterns, self.n_clusters, text)
    }
}

fn naive_count(patterns: &[(String, usize)], n_clusters: usize, text: &str) -> Vec<u32> {
    let lower: String = lowercase_chars(text).collect();
    let mut counts = vec![0u32; n_clusters];
    for (i, _) in lower.char_indices() {
        for (p, ci) in patterns {
            if lower[i..].starts_with(p.as_str()) {
                counts[*ci] += 1;
            }
        }
    }
    counts
}

/// Lowercase alphanumeric word tokens.
fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// All distinct longest common substrings of `a` and `b` (by code point).
pub fn longest_common_substrings(a: &str, b: &str) -> Vec<String> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    let mut ends: Vec<usize> = Vec::new();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            if cur[j] > best {
                best = cur[j];
                ends.clear();
            }
            if cur[j] == best && best > 0 {
                ends.push(i);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let set: BTreeSet<String> = ends.into_iter().map(|e| a[e - best..e].iter().collect()).collect();
    set.into_iter().collect()
}

/// Ranks words by frequency (stopwords removed), takes the `top_k` most
/// frequent, and returns the pairwise longest common substrings of length
/// `>= min_len` with their document support, most supported first.
pub fn mine_substrings(
    corpus: &[String],
    stopwords: &HashSet<String>,
    top_k: usize,
    min_len: usize,
) -> Result<Vec<(String, usize)>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if top_k == 0 || min_len < MIN_SUBSTRING_LEN {
        return Err(Error::InvalidArgument(format!(
            "top_k must be >= 1 and min_len >= {MIN_SUBSTRING_LEN}"
        )));
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for w in words(doc) {
            if !stopwords.contains(&w) {
                *freq.entry(w).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_k);

    let mut found = BTreeSet::new();
    for i in 0..ranked.len() {
        for j in i + 1..ranked.len() {
            for s in longest_common_substrings(&ranked[i].0, &ranked[j].0) {
                if s.chars().count() >= min_len {
                    found.insert(s);
                }
            }
        }
    }
    let lowered: Vec<String> = corpus.iter().map(|d| d.to_lowercase()).collect();
    let support: BTreeMap<String, usize> = found
        .into_iter()
        .map(|s| {
            let n = lowered.iter().filter(|d| d.contains(s.as_str())).count();
            (s, n)
        })
        .collect();
    let mut out: Vec<(String, usize)> = support
        .iter()
        .filter(|(s, n)| {
            !support
                .iter()
                .any(|(t, m)| m == *n && t.len() > s.len() && t.contains(s.as_str()))
        })
        .map(|(s, n)| (s.clone(), *n))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Document-level co-occurrence counts; the diagonal holds each substring's support.
pub fn cooccurrence(corpus: &[String], substrings: &[String]) -> Vec<Vec<usize>> {
    let n = substrings.len();
    let mut m = vec![vec![0usize; n]; n];
    for doc in corpus {
        let lower = doc.to_lowercase();
        let present: Vec<usize> = (0..n).filter(|&i| lower.contains(substrings[i].as_str())).collect();
        for &i in &present {
            for &j in &present {
                m[i][j] += 1;
            }
        }
    }
    m
}

fn trigrams(s: &str) -> BTreeSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 {
        return std::iter::once(s.to_string()).collect();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    let inter = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Blended pairwise similarity: `alpha * trigram Jaccard + (1 - alpha) *
/// co-occurrence Jaccard` (`c_ij / (c_ii + c_jj - c_ij)`).
pub fn similarity_matrix(substrings: &[String], cooc: &[Vec<usize>], alpha: f64) -> Vec<Vec<f64>> {
    let n = substrings.len();
    let mut sim = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = cooc[i][j] as f64;
            let denom = cooc[i][i] as f64 + cooc[j][j] as f64 - c;
            let co = if denom > 0.0 { c / denom } else { 0.0 };
            let s = alpha * trigram_jaccard(&substrings[i], &substrings[j]) + (1.0 - alpha) * co;
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    sim
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProposal {
    pub name: String,
    /// Members with their document support, lexicographic.
    pub members: Vec<(String, usize)>,
    /// Mean pairwise similarity of the members; 1.0 for singletons.
    pub similarity: f64,
}

/// Average-linkage agglomerative clustering cut at `target_k` groups. Ties
/// between equally similar pairs go to the pair whose smallest members sort first.
pub fn cluster_candidates(
    substrings: &[String],
    cooc: &[Vec<usize>],
    target_k: usize,
    alpha: f64,
) -> Result<Vec<ClusterProposal>> {
    let n = substrings.len();
    if cooc.len() != n || cooc.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cooc.len(),
        });
    }
    if target_k == 0 || target_k > n {
        return Err(Error::TooManyClusters {
            target: target_k,
            available: n,
        });
    }
    let sim = similarity_matrix(substrings, cooc, alpha);
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let key = |g: &Vec<usize>| g.iter().map(|&i| substrings[i].as_str()).min().unwrap_or("").to_string();
    while groups.len() > target_k {
        let keys: Vec<String> = groups.iter().map(key).collect();
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let total: f64 = groups[a].iter().flat_map(|&i| groups[b].iter().map(move |&j| (i, j))).map(|(i, j)| sim[i][j]).sum();
                let avg = total / (groups[a].len() * groups[b].len()) as f64;
                let pair = if keys[a] <= keys[b] {
                    (keys[a].clone(), keys[b].clone())
                } else {
                    (keys[b].clone(), keys[a].clone())
                };
                let better = match &best {
                    None => true,
                    Some((s, p, _, _)) => avg > *s || (avg == *s && pair < *p),
                };
                if better {
                    best = Some((avg, pair, a, b));
                }
            }
        }
        let (_, _, a, b) = best.expect("at least two groups");
        let merged = groups.remove(b);
        groups[a].extend(merged);
    }
    let mut proposals: Vec<ClusterProposal> = groups
        .into_iter()
        .map(|g| {
            let mut pairs = 0usize;
            let mut total = 0.0;
            for x in 0..g.len() {
                for y in x + 1..g.len() {
                    total += sim[g[x]][g[y]];
                    pairs += 1;
                }
            }
            let similarity = if pairs == 0 { 1.0 } else { (total / pairs as f64).clamp(0.0, 1.0) };
            let mut members: Vec<(String, usize)> = g.iter().map(|&i| (substrings[i].clone(), cooc[i][i].max(1))).collect();
            members.sort();
            let name = members
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|m| m.0.clone())
                .unwrap_or_default();
            ClusterProposal {
                name,
                members,
                similarity,
            }
        })
        .collect();
    proposals.sort_by(|a, b| a.members[0].0.cmp(&b.members[0].0));
    Ok(proposals)
}

/// Renders proposals in the cluster-set file format with support and
/// similarity as comments, ready for hand pruning.
pub fn proposals_to_text(proposals: &[ClusterProposal]) -> String {
    let mut s = String::from("# version: proposal\n");
    let mut used = HashSet::new();
    for (i, p) in proposals.iter().enumerate() {
        let mut name = p.name.clone();
        if !used.insert(name.clone()) {
            name = format!("{}_{i}", p.name);
            used.insert(name.clone());
        }
        let _ = writeln!(s, "# similarity: {:.4}", p.similarity);
        let _ = writeln!(s, "[{name}]");
        for (m, support) in &p.members {
            let _ = writeln!(s, "{m}\t# support {support}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(spec: &[(&str, &[&str])]) -> ClusterSet {
        ClusterSet {
            clusters: spec
                .iter()
                .map(|(n, m)| Cluster {
                    name: n.to_string(),
                    substrings: m.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
            version: "t".into(),
        }
    }

    #[test]
    fn bundled_set_is_valid() {
        let c = ClusterSet::bundled();
        c.validate(Some(DEFAULT_CLUSTER_COUNT)).unwrap();
        assert_eq!(c.clusters[0].name, "car");
        assert!(c.clusters[1].substrings.contains(&"trabaj".to_string()));
    }

    #[test]
    fn money_cluster_counts() {
        let m = build_matcher(&set(&[("money", &["cash", "dinero"])])).unwrap();
        assert_eq!(m.count("CASH dinero!"), vec![2]);
        assert_eq!(m.count(""), vec![0]);
    }

    #[test]
    fn overlapping_patterns_each_count() {
        let m = build_matcher(&set(&[("car", &["auto", "car", "coche"])])).unwrap();
        assert_eq!(m.count("autocarro"), vec![2]);
    }

    #[test]
    fn nested_patterns_in_different_clusters() {
        let m = build_matcher(&set(&[("a", &["cash"]), ("b", &["ash", "cashback"])])).unwrap();
        let text = "Cashback cash ashes";
        assert_eq!(m.count(text), m.naive_count(text));
        assert_eq!(m.count(text), vec![2, 4]);
    }

    #[test]
    fn duplicate_substring_rejected() {
        let r = build_matcher(&set(&[("a", &["cash"]), ("b", &["cash"])]));
        assert!(matches!(r, Err(Error::DuplicateSubstring { .. })));
    }

    #[test]
    fn pruning_edits() {
        let base = set(&[("a", &["cash", "money"]), ("b", &["car"])]);
        let pruned = base.apply_pruning("[a]\n-money\ndinero\n[-b]\n[c]\nauto\n", "p").unwrap();
        assert_eq!(pruned.clusters.len(), 2);
        assert_eq!(pruned.clusters[0].substrings, vec!["cash", "dinero"]);
        assert_eq!(pruned.clusters[1].name, "c");
        let round = ClusterSet::parse(&pruned.to_text(), "rt").unwrap();
        assert_eq!(round.clusters, pruned.clusters);
    }

    #[test]
    fn lcs_basic() {
        assert_eq!(longest_common_substrings("trabajo", "trabajar"), vec!["trabaj"]);
        assert_eq!(longest_common_substrings("abxcd", "cdxab"), vec!["ab", "cd"]);
        assert!(longest_common_substrings("abc", "xyz").is_empty());
    }

    #[test]
    fn mining_trivial_cases() {
        let stop: HashSet<String> = ["now".to_string()].into();
        let corpus: Vec<String> = ["win cash now", "cash prizes", "free cashback"].map(String::from).to_vec();
        let mined = mine_substrings(&corpus, &stop, 3, 4).unwrap();
        assert!(mined.contains(&("cash".to_string(), 3)), "{mined:?}");
        assert!(mine_substrings(&["aaa".to_string()], &HashSet::new(), 1, 4).unwrap().is_empty());
        assert!(matches!(mine_substrings(&[], &HashSet::new(), 1, 4), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn mining_spanish_stem() {
        let corpus: Vec<String> = (0..5)
            .map(|i| if i % 2 == 0 { "trabajo en casa".to_string() } else { "quieres trabajar".to_string() })
            .collect();
        let mined = mine_substrings(&corpus, &HashSet::new(), 5, 4).unwrap();
        assert!(mined.iter().any(|(s, _)| s == "trabaj"), "{mined:?}");
    }

    #[test]
    fn candidates_singleton_and_tie_break() {
        let one = vec!["cash".to_string()];
        let p = cluster_candidates(&one, &[vec![3]], 1, 0.5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].similarity, 1.0);

        let two = vec!["zzz".to_string(), "aaa".to_string(), "mmm".to_string()];
        let cooc = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        let p = cluster_candidates(&two, &cooc, 2, 0.5).unwrap();
        // All similarities are zero; the pair with the lexicographically smallest members merges.
        assert_eq!(p[0].members.iter().map(|m| m.0.as_str()).collect::<Vec<_>>(), vec!["aaa", "mmm"]);
        assert_eq!(p[1].members[0].0, "zzz");
        assert!(cluster_candidates(&two, &cooc, 4, 0.5).is_err());
    }

    #[test]
    fn proposals_parse_back() {
        let subs = vec!["cash".to_string(), "prize".to_string()];
        let p = cluster_candidates(&subs, &[vec![3, 1], vec![1, 2]], 2, 0.5).unwrap();
        let set = ClusterSet::parse(&proposals_to_text(&p), "proposal").unwrap();
        let mut members: Vec<&str> = set.clusters.iter().flat_map(|c| c.substrings.iter().map(String::as_str)).collect();
        members.sort_unstable();
        assert_eq!(members, vec!["cash", "prize"]);
        set.validate(Some(2)).unwrap();
    }
}
