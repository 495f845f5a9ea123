//! Dictionary-based canonicalization of SMS lexical variants ("2nite",
//! "u", "pls") applied token by token, never inside URLs, emails or phones.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};

/// Immutable map from lowercase variant to canonical token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, String>,
    version: String,
}

impl Lexicon {
    pub fn bundled() -> Lexicon {
        Lexicon::parse(data::LEXICON, "bundled lexicon").expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Lexicon> {
        let text = crate::error::read_to_string(path)?;
        Lexicon::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Lexicon> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (variant, canonical) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(source_name, line_no, "expected variant<TAB>canonical"))?;
            let variant = variant.trim().to_lowercase();
            let canonical = canonical.trim().to_string();
            if variant.is_empty() || canonical.is_empty() {
                return Err(Error::malformed(source_name, line_no, "empty variant or canonical"));
            }
            if canonical.chars().any(char::is_whitespace) || variant.chars().any(char::is_whitespace) {
                return Err(Error::malformed(source_name, line_no, "entries must be single tokens"));
            }
            if strip_punctuation(&variant) != variant {
                return Err(Error::malformed(
                    source_name,
                    line_no,
                    format!("variant {variant:?} has leading or trailing punctuation and can never match"),
                ));
            }
            if variant == canonical.to_lowercase() {
                return Err(Error::malformed(source_name, line_no, format!("{variant:?} maps to itself")));
            }
            if entries.contains_key(&variant) {
                return Err(Error::DuplicateKey {
                    source_name: source_name.to_string(),
                    line: line_no,
                    key: variant,
                });
            }
            entries.insert(variant, canonical);
        }
        for (variant, canonical) in &entries {
            let key = strip_punctuation(&canonical.to_lowercase()).to_string();
            if entries.contains_key(&key) {
                return Err(Error::LexiconChain {
                    variant: variant.clone(),
                    canonical: canonical.clone(),
                });
            }
        }
        let version = data::header_value(text, "version").unwrap_or("unversioned").to_string();
        Ok(Lexicon { entries, version })
    }

    pub fn get(&self, variant: &str) -> Option<&str> {
        self.entries.get(variant).map(String::as_str)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// One replacement; `span` is the code-point range of the variant in the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub span: (usize, usize),
    pub variant: String,
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedText {
    pub original: String,
    pub normalized: String,
    pub substitutions: Vec<Substitution>,
}

impl NormalizedText {
    /// Original text with the recorded substitutions applied and whitespace collapsed.
    pub fn replay(&self) -> String {
        let mut chars: Vec<char> = self.original.chars().collect();
        let mut subs: Vec<&Substitution> = self.substitutions.iter().collect();
        subs.sort_by_key(|s| std::cmp::Reverse(s.span.0));
        for s in subs {
            chars.splice(s.span.0..s.span.1, s.canonical.chars());
        }
        collapse_whitespace(&chars.into_iter().collect::<String>())
    }

    /// Pass-through value used when normalization is switched off.
    pub fn identity(text: &str) -> NormalizedText {
        NormalizedText {
            original: text.to_string(),
            normalized: collapse_whitespace(text),
            substitutions: Vec::new(),
        }
    }
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_punctuation(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Whitespace tokens as code-point spans.
pub(crate) fn whitespace_tokens(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in chars.iter().enumerate() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, chars.len()));
    }
    out
}

/// Per-token entity shape test used when no extracted entity spans are at hand:
/// URL/email-looking tokens and tokens carrying seven or more digits.
pub fn looks_like_entity(token: &str) -> bool {
    let lower = token.to_lowercase();
    if lower.contains("://") || lower.starts_with("www.") {
        return true;
    }
    if let Some(at) = lower.find('@') {
        if lower[at..].contains('.') && at > 0 {
            return true;
        }
    }
    if token.chars().filter(char::is_ascii_digit).count() >= 7 {
        return true;
    }
    let core = strip_punctuation(token);
    let chars: Vec<char> = core.chars().collect();
    chars.windows(3).enumerate().any(|(i, w)| {
        if w[1] != '.' || !w[0].is_alphanumeric() || !w[2].is_alphanumeric() {
            return false;
        }
        let tail: String = chars[i + 2..].iter().take_while(|c| **c != '.' && **c != '/').collect();
        tail.chars().count() >= 2 && tail.chars().all(char::is_alphabetic)
    })
}

/// Spans of whitespace tokens that look like entities.
pub fn structural_mask(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    whitespace_tokens(&chars)
        .into_iter()
        .filter(|&(s, e)| looks_like_entity(&chars[s..e].iter().collect::<String>()))
        .collect()
}

/// Normalizes `text`, masking tokens that look like URLs, emails or phones.
pub fn normalize(text: &str, lexicon: &Lexicon) -> NormalizedText {
    normalize_masked(text, lexicon, &structural_mask(text))
}

/// Normalizes `text`; tokens overlapping any `mask` span (code points) are kept verbatim.
pub fn normalize_masked(text: &str, lexicon: &Lexicon, mask: &[(usize, usize)]) -> NormalizedText {
    let chars: Vec<char> = text.chars().collect();
    let mut pieces = Vec::new();
    let mut substitutions = Vec::new();
    for (s, e) in whitespace_tokens(&chars) {
        let token: String = chars[s..e].iter().collect();
        let masked = mask.iter().any(|&(ms, me)| ms < e && s < me);
        if masked {
            pieces.push(token);
            continue;
        }
        let lead = chars[s..e].iter().take_while(|c| !c.is_alphanumeric()).count();
        if lead == e - s {
            pieces.push(token);
            continue;
        }
        let trail = chars[s..e].iter().rev().take_while(|c| !c.is_alphanumeric()).count();
        let core_start = s + lead;
        let core_end = e - trail;
        let core: String = chars[core_start..core_end].iter().collect();
        match lexicon.get(&core.to_lowercase()) {
            Some(canonical) => {
                let mut piece: String = chars[s..core_start].iter().collect();
                piece.push_str(canonical);
                piece.extend(&chars[core_end..e]);
                pieces.push(piece);
                substitutions.push(Substitution {
                    span: (core_start, core_end),
                    variant: core,
                    canonical: canonical.to_string(),
                });
            }
            None => pieces.push(token),
        }
    }
    NormalizedText {
        original: text.to_string(),
        normalized: pieces.join(" "),
        substitutions,
    }
}
