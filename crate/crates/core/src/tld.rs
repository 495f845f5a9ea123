//! Categorized TLD tables, URL shorteners and the public suffix snapshot.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TldClass {
    Bad,
    Suspicious,
    Normal,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TldTables {
    pub bad: BTreeSet<String>,
    pub suspicious: BTreeSet<String>,
    pub normal: BTreeSet<String>,
    pub shorteners: BTreeSet<String>,
    /// Every delegated top-level domain, from the bundled snapshot.
    pub iana: BTreeSet<String>,
}

impl TldTables {
    pub fn bundled() -> TldTables {
        TldTables::new(
            data::lowercase_set(data::TLD_BAD),
            data::lowercase_set(data::TLD_SUSPICIOUS),
            data::lowercase_set(data::TLD_NORMAL),
            data::lowercase_set(data::SHORTENERS),
        )
        .expect("bundled TLD tables are disjoint")
    }

    pub fn new(
        bad: BTreeSet<String>,
        suspicious: BTreeSet<String>,
        normal: BTreeSet<String>,
        shorteners: BTreeSet<String>,
    ) -> Result<TldTables> {
        let strip = |s: BTreeSet<String>| -> BTreeSet<String> {
            s.into_iter().map(|t| t.trim_start_matches('.').to_lowercase()).collect()
        };
        let (bad, suspicious, normal) = (strip(bad), strip(suspicious), strip(normal));
        for (a, an, b, bn) in [
            (&bad, "bad", &suspicious, "suspicious"),
            (&bad, "bad", &normal, "normal"),
            (&suspicious, "suspicious", &normal, "normal"),
        ] {
            if let Some(t) = a.intersection(b).next() {
                return Err(Error::Config(format!("TLD {t:?} listed as both {an} and {bn}")));
            }
        }
        Ok(TldTables {
            bad,
            suspicious,
            normal,
            shorteners: shorteners.into_iter().map(|s| s.to_lowercase()).collect(),
            iana: data::lowercase_set(data::TLD_IANA),
        })
    }

    /// Loads `bad.txt`, `suspicious.txt`, `normal.txt` and `shorteners.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<TldTables> {
        let read = |name: &str| -> Result<BTreeSet<String>> {
            Ok(data::lowercase_set(&crate::error::read_to_string(&dir.join(name))?))
        };
        TldTables::new(read("bad.txt")?, read("suspicious.txt")?, read("normal.txt")?, read("shorteners.txt")?)
    }

    /// Class of a suffix such as `tk` or `co.uk`; multi-label suffixes fall
    /// back to their last label.
    pub fn classify(&self, suffix: &str) -> TldClass {
        let suffix = suffix.trim_start_matches('.').to_lowercase();
        let last = suffix.rsplit('.').next().unwrap_or("").to_string();
        for key in [&suffix, &last] {
            if self.bad.contains(key) {
                return TldClass::Bad;
            }
            if self.suspicious.contains(key) {
                return TldClass::Suspicious;
            }
            if self.normal.contains(key) {
                return TldClass::Normal;
            }
        }
        TldClass::Unknown
    }

    pub fn is_valid_tld(&self, label: &str) -> bool {
        let l = label.to_lowercase();
        self.iana.contains(&l) || self.bad.contains(&l) || self.suspicious.contains(&l) || self.normal.contains(&l)
    }

    pub fn is_bad_or_suspicious(&self, label: &str) -> bool {
        matches!(self.classify(label), TldClass::Bad | TldClass::Suspicious)
    }

    pub fn is_shortener(&self, host: &str) -> bool {
        let h = host.to_lowercase();
        let h = h.strip_prefix("www.").unwrap_or(&h);
        self.shorteners.contains(h)
    }
}

/// Public suffix rules (exact, wildcard `*.x` and exception `!x`).
#[derive(Debug, Clone, Default)]
pub struct SuffixList {
    exact: HashSet<String>,
    wildcard: HashSet<String>,
    exception: HashSet<String>,
}

impl SuffixList {
    pub fn bundled() -> SuffixList {
        SuffixList::parse(data::PUBLIC_SUFFIXES)
    }

    pub fn parse(text: &str) -> SuffixList {
        let mut list = SuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                list.exception.insert(rest.to_string());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                list.wildcard.insert(rest.to_string());
            } else {
                list.exact.insert(rule);
            }
        }
        list
    }

    /// Number of trailing labels forming the public suffix of `host`
    /// (lowercase, dot-separated). Unlisted TLDs count as one label.
    pub fn suffix_labels(&self, host: &str) -> usize {
        let labels: Vec<&str> = host.split('.').collect();
        let n = labels.len();
        let mut best = 1;
        for k in 1..=n {
            let candidate = labels[n - k..].join(".");
            if self.exception.contains(&candidate) {
                return k - 1;
            }
            if self.exact.contains(&candidate) {
                best = best.max(k);
            }
            if self.wildcard.contains(&candidate) && k < n {
                best = best.max(k + 1);
            }
        }
        best
    }

    /// `(registrable_domain, public_suffix)`, or `None` when the host is
    /// itself a public suffix.
    pub fn split(&self, host: &str) -> Option<(String, String)> {
        let labels: Vec<&str> = host.split('.').collect();
        let k = self.suffix_labels(host);
        if k >= labels.len() {
            return None;
        }
        let n = labels.len();
        Some((labels[n - k - 1..].join("."), labels[n - k..].join(".")))
    }
}

/// Lowercase words that on their own make a schemeless dotted token doubtful as a URL.
#[derive(Debug, Clone, Default)]
pub struct WordList {
    words: HashSet<String>,
}

impl WordList {
    pub fn bundled_common() -> WordList {
        WordList::parse(data::COMMON_WORDS)
    }

    pub fn parse(text: &str) -> WordList {
        WordList {
            words: data::lines(text).map(str::to_lowercase).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tables_classify() {
        let t = TldTables::bundled();
        assert_eq!(t.classify("tk"), TldClass::Bad);
        assert_eq!(t.classify(".pw"), TldClass::Suspicious);
        assert_eq!(t.classify("com"), TldClass::Normal);
        assert_eq!(t.classify("co.uk"), TldClass::Normal);
        assert_eq!(t.classify("zz"), TldClass::Unknown);
        assert!(t.is_valid_tld("support"));
        assert!(!t.is_valid_tld("xx"));
        assert!(t.is_shortener("bit.ly"));
    }

    #[test]
    fn overlapping_tables_rejected() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
        assert!(TldTables::new(s(&["tk"]), s(&["tk"]), s(&[]), s(&[])).is_err());
    }

    #[test]
    fn suffix_split() {
        let psl = SuffixList::bundled();
        assert_eq!(
            psl.split("a.b.example.co.uk"),
            Some(("example.co.uk".into(), "co.uk".into()))
        );
        assert_eq!(psl.split("spamdomain.com"), Some(("spamdomain.com".into(), "com".into())));
        assert_eq!(psl.split("co.uk"), None);
        assert_eq!(psl.split("foo.unlisted"), Some(("foo.unlisted".into(), "unlisted".into())));
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let psl = SuffixList::parse("ck\n*.ck\n!www.ck\n");
        assert_eq!(psl.split("a.b.ck"), Some(("a.b.ck".into(), "b.ck".into())));
        assert_eq!(psl.split("www.ck"), Some(("www.ck".into(), "ck".into())));
    }
}
