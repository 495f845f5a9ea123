//! Message and domain feature vectors.
//!
//! The message vector has 51 slots and the domain vector 39, in the fixed
//! order of [`message_feature_names`] and [`domain_feature_names`].

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;

use crate::cluster::{ClusterMatcher, ClusterSet, DEFAULT_CLUSTER_COUNT};
use crate::data;
use crate::entity::{position_code, EntityExtractor, EntityKind, EntitySet, ParsedDomain, PositionCode};
use crate::error::{Error, Result};
use crate::model::Forest;
use crate::textnorm::{normalize_masked, Lexicon, NormalizedText};
use crate::tld::{TldClass, TldTables};
use crate::Message;

pub const MESSAGE_SCHEMA: &str = "mela-message/1";
pub const DOMAIN_SCHEMA: &str = "mela-domain/1";
pub const MESSAGE_DIM: usize = 51;
pub const DOMAIN_DIM: usize = 39;

const MESSAGE_HEAD: [&str; 11] = [
    "NUM_OF_URLS",
    "NUM_OF_PHONES",
    "NUM_OF_EMAILS",
    "URL_POS",
    "PHONE_POS",
    "EMAIL_POS",
    "NUMBER_POS",
    "CONTAINS_FWD",
    "LENGTH",
    "WORD_COUNT",
    "PHONEME_COUNT",
];

const MESSAGE_TAIL: [&str; 18] = [
    "UNSUBSCRIBE",
    "PHONE_ISFREE",
    "EMAIL_ISFREE",
    "URL_ISDOM",
    "DOMAIN_MELASCORE",
    "DOMAIN_ISSHORT",
    "NGRAM_ENTROPY",
    "START_WITHNUMBER",
    "END_WITHNUMBER",
    "TOKEN_RATIO",
    "NUM_OF_TIMEX",
    "NUM_OF_NUMBER",
    "NUM_OF_CURRENCY",
    "STARTSWITH_HELLO",
    "ENDSWITH_CTA",
    "DOMAIN_OBFUSCATION",
    "HEUR_TWEET",
    // Not in the published name list, which has one name fewer than the stated count.
    "NUM_OF_LEXVARIANTS",
];

const DOMAIN_HEAD: [&str; 12] = [
    "STARTS_WITH_NUM",
    "ENDS_WITH_NUM",
    "CONTAINS_00",
    "CONTAINS_VV",
    "CONTAINS_YEAR",
    "CONTAINS_1",
    "CONTAINS_ZERO",
    "DIGIT_RATIO",
    "HYPHEN_COUNT",
    "LENGTH",
    "WORD_COUNT",
    "PHONEME_COUNT",
];

const DOMAIN_TAIL: [&str; 5] = ["CONTAINSWWW", "BADTLDS", "SUSPTLDS", "NORMALTLDS", "ISSHORT"];

/// Message slot indices used outside this module.
pub mod slot {
    pub const NUM_OF_URLS: usize = 0;
    pub const NUM_OF_PHONES: usize = 1;
    pub const NUM_OF_EMAILS: usize = 2;
    pub const URL_POS: usize = 3;
    pub const PHONE_POS: usize = 4;
    pub const EMAIL_POS: usize = 5;
    pub const NUMBER_POS: usize = 6;
    pub const CONTAINS_FWD: usize = 7;
    pub const LENGTH: usize = 8;
    pub const WORD_COUNT: usize = 9;
    pub const PHONEME_COUNT: usize = 10;
    pub const CLUSTER_0: usize = 11;
    pub const UNSUBSCRIBE: usize = 33;
    pub const PHONE_ISFREE: usize = 34;
    pub const EMAIL_ISFREE: usize = 35;
    pub const URL_ISDOM: usize = 36;
    pub const DOMAIN_MELASCORE: usize = 37;
    pub const DOMAIN_ISSHORT: usize = 38;
    pub const NGRAM_ENTROPY: usize = 39;
    pub const START_WITHNUMBER: usize = 40;
    pub const END_WITHNUMBER: usize = 41;
    pub const TOKEN_RATIO: usize = 42;
    pub const NUM_OF_TIMEX: usize = 43;
    pub const NUM_OF_NUMBER: usize = 44;
    pub const NUM_OF_CURRENCY: usize = 45;
    pub const STARTSWITH_HELLO: usize = 46;
    pub const ENDSWITH_CTA: usize = 47;
    pub const DOMAIN_OBFUSCATION: usize = 48;
    pub const HEUR_TWEET: usize = 49;
    pub const NUM_OF_LEXVARIANTS: usize = 50;
}

/// Domain slot indices.
pub mod dslot {
    pub const STARTS_WITH_NUM: usize = 0;
    pub const ENDS_WITH_NUM: usize = 1;
    pub const CONTAINS_00: usize = 2;
    pub const CONTAINS_VV: usize = 3;
    pub const CONTAINS_YEAR: usize = 4;
    pub const CONTAINS_1: usize = 5;
    pub const CONTAINS_ZERO: usize = 6;
    pub const DIGIT_RATIO: usize = 7;
    pub const HYPHEN_COUNT: usize = 8;
    pub const LENGTH: usize = 9;
    pub const WORD_COUNT: usize = 10;
    pub const PHONEME_COUNT: usize = 11;
    pub const CLUSTER_0: usize = 12;
    pub const CONTAINSWWW: usize = 34;
    pub const BADTLDS: usize = 35;
    pub const SUSPTLDS: usize = 36;
    pub const NORMALTLDS: usize = 37;
    pub const ISSHORT: usize = 38;
}

fn names(head: &[&str], tail: &[&str]) -> Vec<String> {
    head.iter()
        .map(|s| s.to_string())
        .chain((0..DEFAULT_CLUSTER_COUNT).map(|i| format!("SUBSTRING_CLUST_{i}")))
        .chain(tail.iter().map(|s| s.to_string()))
        .collect()
}

pub fn message_feature_names() -> Vec<String> {
    names(&MESSAGE_HEAD, &MESSAGE_TAIL)
}

pub fn domain_feature_names() -> Vec<String> {
    names(&DOMAIN_HEAD, &DOMAIN_TAIL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelaVector {
    pub values: Vec<f64>,
    pub schema_version: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainVector {
    pub values: Vec<f64>,
    pub schema_version: &'static str,
}

/// Token-sequence phrase list (`"opt out"` and `"opt-out"` both become `[opt, out]`).
#[derive(Debug, Clone, Default)]
struct PhraseList {
    phrases: Vec<Vec<String>>,
}

impl PhraseList {
    fn new<'a>(lines: impl Iterator<Item = &'a str>) -> PhraseList {
        PhraseList {
            phrases: lines.map(word_tokens).filter(|p| !p.is_empty()).collect(),
        }
    }

    fn matches_anywhere(&self, tokens: &[String]) -> bool {
        self.phrases
            .iter()
            .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
    }

    fn matches_prefix(&self, tokens: &[String], max_start: usize) -> bool {
        self.phrases.iter().any(|p| {
            (0..=max_start.min(tokens.len())).any(|s| tokens.len() >= s + p.len() && tokens[s..s + p.len()] == p[..])
        })
    }
}

/// Lowercase alphanumeric runs.
fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Keyword lists behind the heuristic features.
#[derive(Debug, Clone)]
pub struct Keywords {
    greetings: PhraseList,
    optout_phrases: PhraseList,
    imperatives: HashSet<String>,
    verbs: HashSet<String>,
    forward: Vec<String>,
    free_phone_prefixes: Vec<String>,
    free_mail: HashSet<String>,
}

impl Keywords {
    pub fn bundled() -> Keywords {
        Keywords::parse(data::GREETINGS, data::OPT_OUT, data::FORWARD, data::FREE_PHONE_PREFIXES, data::FREE_MAIL)
    }

    /// `optout` has `[phrases]`, `[imperatives]` and `[verbs]` sections.
    pub fn parse(greetings: &str, optout: &str, forward: &str, free_phone: &str, free_mail: &str) -> Keywords {
        let mut sections: HashMap<String, Vec<&str>> = HashMap::new();
        let mut current = String::from("phrases");
        for line in data::lines(optout) {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                continue;
            }
            sections.entry(current.clone()).or_default().push(line);
        }
        let set = |k: &str| -> HashSet<String> {
            sections.get(k).into_iter().flatten().map(|s| s.to_lowercase()).collect()
        };
        Keywords {
            greetings: PhraseList::new(data::lines(greetings)),
            optout_phrases: PhraseList::new(sections.get("phrases").into_iter().flatten().copied()),
            imperatives: set("imperatives"),
            verbs: set("verbs"),
            forward: data::lines(forward).map(str::to_lowercase).collect(),
            free_phone_prefixes: data::lines(free_phone).map(str::to_string).collect(),
            free_mail: data::lowercase_set(free_mail).into_iter().collect(),
        }
    }

    pub fn is_free_phone(&self, digits: &str) -> bool {
        self.free_phone_prefixes.iter().any(|p| digits.starts_with(p.as_str()))
    }

    pub fn is_free_mail(&self, email: &str) -> bool {
        let domain = email.rsplit('@').next().unwrap_or("").to_lowercase();
        self.free_mail.contains(&domain)
    }

    /// Opt-out phrase anywhere, or an imperative that ends the message or follows a reply verb.
    pub fn has_opt_out(&self, text: &str) -> bool {
        let tokens = word_tokens(text);
        if self.optout_phrases.matches_anywhere(&tokens) {
            return true;
        }
        tokens.iter().enumerate().any(|(i, t)| {
            self.imperatives.contains(t) && (i + 1 == tokens.len() || (i > 0 && self.verbs.contains(&tokens[i - 1])))
        })
    }

    /// Forwarding marker at a word start; markers ending in a letter must also end a word.
    pub fn has_forward_marker(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.forward.iter().any(|m| {
            lower.match_indices(m.as_str()).any(|(i, _)| {
                let before_ok = !lower[..i].chars().next_back().is_some_and(char::is_alphanumeric);
                let end = i + m.len();
                let needs_end = m.chars().next_back().is_some_and(char::is_alphanumeric);
                let after_ok = !needs_end || !lower[end..].chars().next().is_some_and(char::is_alphanumeric);
                before_ok && after_ok
            })
        })
    }

    pub fn starts_with_greeting(&self, text: &str) -> bool {
        self.greetings.matches_prefix(&word_tokens(text), 1)
    }
}

/// Immutable tables and lists needed to featurize messages.
#[derive(Debug, Clone)]
pub struct MelaContext {
    pub extractor: EntityExtractor,
    pub lexicon: Lexicon,
    pub matcher: ClusterMatcher,
    pub keywords: Keywords,
}

impl MelaContext {
    pub fn bundled() -> MelaContext {
        MelaContext::new(
            EntityExtractor::bundled(),
            Lexicon::bundled(),
            &ClusterSet::bundled(),
            Keywords::bundled(),
        )
        .expect("bundled data is consistent")
    }

    pub fn new(extractor: EntityExtractor, lexicon: Lexicon, clusters: &ClusterSet, keywords: Keywords) -> Result<MelaContext> {
        let matcher = ClusterMatcher::new(clusters)?;
        if matcher.n_clusters() != DEFAULT_CLUSTER_COUNT {
            return Err(Error::SchemaMismatch {
                expected: format!("{DEFAULT_CLUSTER_COUNT} clusters"),
                found: format!("{} clusters", matcher.n_clusters()),
            });
        }
        Ok(MelaContext {
            extractor,
            lexicon,
            matcher,
            keywords,
        })
    }

    pub fn tables(&self) -> &TldTables {
        self.extractor.tables()
    }

    /// Entity extraction on the original text, then normalization outside CTA spans.
    pub fn prepare(&self, text: &str, normalize: bool) -> (EntitySet, NormalizedText) {
        let ents = self.extractor.extract(text);
        let norm = if normalize {
            normalize_masked(text, &self.lexicon, &ents.cta_spans())
        } else {
            NormalizedText::identity(text)
        };
        (ents, norm)
    }

    /// URL domains of a message as `(parsed, vector)`, in entity order.
    pub fn url_domains(&self, ents: &EntitySet) -> Vec<(ParsedDomain, DomainVector)> {
        ents.of_kind(EntityKind::Url)
            .filter_map(|e| self.extractor.parse_domain(&e.canonical).ok())
            .map(|p| {
                let v = domain_features(&p.host, &p.tld, self.tables(), &self.matcher);
                (p, v)
            })
            .collect()
    }
}

/// Produces DOMAIN_MELASCORE values.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainScorer {
    Forest(Forest),
    /// Used when the training data lacks one of the two domain classes.
    Constant(f64),
}

impl DomainScorer {
    pub fn score(&self, v: &DomainVector) -> Result<f64> {
        match self {
            DomainScorer::Forest(f) => score_domain(f, v),
            DomainScorer::Constant(c) => Ok(*c),
        }
    }
}

pub fn score_domain(forest: &Forest, v: &DomainVector) -> Result<f64> {
    forest.check_schema(DOMAIN_SCHEMA)?;
    if v.schema_version != DOMAIN_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: DOMAIN_SCHEMA.into(),
            found: v.schema_version.into(),
        });
    }
    forest.predict(&v.values[..])
}

fn year_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?:19|20)\d\d").unwrap())
}

fn tweet_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?:^|[\s(\[])[#@][\p{L}\p{N}_]+").unwrap())
}

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel groups within alphabetic runs.
pub fn syllable_count(text: &str) -> usize {
    let mut count = 0;
    let mut prev_vowel = false;
    for c in text.chars() {
        let v = c.is_alphabetic() && is_vowel(c);
        if v && !prev_vowel {
            count += 1;
        }
        prev_vowel = v;
    }
    count
}

/// Shannon entropy (bits) of the character-trigram distribution.
pub fn trigram_entropy(text: &str) -> f64 {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return 0.0;
    }
    let mut hist: HashMap<&[char], usize> = HashMap::new();
    for w in chars.windows(3) {
        *hist.entry(w).or_default() += 1;
    }
    let n = (chars.len() - 2) as f64;
    let mut counts: Vec<usize> = hist.into_values().collect();
    counts.sort_unstable();
    let h: f64 = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Domain vector for `domain` (host or registrable domain) whose public suffix is `tld`.
/// Lexical slots describe the label left after removing the suffix and a leading `www.`.
pub fn domain_features(domain: &str, tld: &str, tables: &TldTables, matcher: &ClusterMatcher) -> DomainVector {
    let domain = domain.trim().trim_end_matches('.').to_lowercase();
    let tld = tld.trim_start_matches('.').to_lowercase();
    let mut label = domain.as_str();
    if !tld.is_empty() {
        if let Some(s) = label.strip_suffix(tld.as_str()).and_then(|s| s.strip_suffix('.')) {
            label = s;
        }
    }
    let label = label.strip_prefix("www.").unwrap_or(label);
    let chars: Vec<char> = label.chars().collect();
    let n = chars.len();
    let digits = chars.iter().filter(|c| c.is_ascii_digit()).count();
    let b = |x: bool| if x { 1.0 } else { 0.0 };

    let mut v = vec![0.0; DOMAIN_DIM];
    v[dslot::STARTS_WITH_NUM] = b(chars.first().is_some_and(char::is_ascii_digit));
    v[dslot::ENDS_WITH_NUM] = b(chars.last().is_some_and(char::is_ascii_digit));
    v[dslot::CONTAINS_00] = b(label.contains("00"));
    v[dslot::CONTAINS_VV] = b(label.contains("vv"));
    v[dslot::CONTAINS_YEAR] = b(year_re().is_match(label));
    v[dslot::CONTAINS_1] = b(label.contains('1'));
    v[dslot::CONTAINS_ZERO] = b(label.contains('0'));
    v[dslot::DIGIT_RATIO] = if n == 0 { 0.0 } else { digits as f64 / n as f64 };
    v[dslot::HYPHEN_COUNT] = chars.iter().filter(|&&c| c == '-').count() as f64;
    v[dslot::LENGTH] = n as f64;
    v[dslot::WORD_COUNT] = label.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()).count() as f64;
    v[dslot::PHONEME_COUNT] = syllable_count(label) as f64;
    for (i, c) in matcher.count(label).into_iter().enumerate() {
        v[dslot::CLUSTER_0 + i] = c as f64;
    }
    v[dslot::CONTAINSWWW] = b(domain.contains("www"));
    match tables.classify(&tld) {
        TldClass::Bad => v[dslot::BADTLDS] = 1.0,
        TldClass::Suspicious => v[dslot::SUSPTLDS] = 1.0,
        TldClass::Normal => v[dslot::NORMALTLDS] = 1.0,
        TldClass::Unknown => {}
    }
    v[dslot::ISSHORT] = b(tables.is_shortener(&domain));
    DomainVector {
        values: v,
        schema_version: DOMAIN_SCHEMA,
    }
}

fn trimmed_edge(text: &str, from_end: bool) -> Option<char> {
    let t = text.trim_matches(|c: char| c.is_whitespace() || matches!(c, '.' | '!' | '?' | ',' | ';' | ':' | '"' | '\''));
    if from_end {
        t.chars().next_back()
    } else {
        t.chars().next()
    }
}

/// Message vector with domain scores taken from `scorer`.
pub fn message_features(
    msg: &Message,
    norm: &NormalizedText,
    ents: &EntitySet,
    ctx: &MelaContext,
    scorer: &DomainScorer,
) -> Result<MelaVector> {
    message_features_with(msg, norm, ents, ctx, &mut |_, v| scorer.score(v))
}

/// Message vector with a caller-supplied domain scoring function, which lets
/// training code substitute out-of-bag scores for domains seen in training.
pub fn message_features_with(
    msg: &Message,
    norm: &NormalizedText,
    ents: &EntitySet,
    ctx: &MelaContext,
    score: &mut dyn FnMut(&ParsedDomain, &DomainVector) -> Result<f64>,
) -> Result<MelaVector> {
    if ctx.matcher.n_clusters() != DEFAULT_CLUSTER_COUNT {
        return Err(Error::SchemaMismatch {
            expected: format!("{DEFAULT_CLUSTER_COUNT} clusters"),
            found: format!("{} clusters", ctx.matcher.n_clusters()),
        });
    }
    let text = msg.text.as_str();
    let len = text.chars().count();
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let pos = |kind: EntityKind| -> f64 {
        ents.first(kind)
            .and_then(|e| position_code(e.span, len).ok())
            .unwrap_or(PositionCode::Absent)
            .value()
    };

    let mut v = vec![0.0; MESSAGE_DIM];
    v[slot::NUM_OF_URLS] = ents.count(EntityKind::Url) as f64;
    v[slot::NUM_OF_PHONES] = ents.count(EntityKind::Phone) as f64;
    v[slot::NUM_OF_EMAILS] = ents.count(EntityKind::Email) as f64;
    v[slot::PHONE_POS] = pos(EntityKind::Phone);
    v[slot::EMAIL_POS] = pos(EntityKind::Email);
    v[slot::NUMBER_POS] = pos(EntityKind::Number);
    v[slot::CONTAINS_FWD] = b(ctx.keywords.has_forward_marker(text));
    v[slot::LENGTH] = len as f64;
    v[slot::WORD_COUNT] = text.split_whitespace().count() as f64;
    v[slot::PHONEME_COUNT] = syllable_count(&norm.normalized) as f64;
    for (i, c) in ctx.matcher.count(&norm.normalized).into_iter().enumerate() {
        v[slot::CLUSTER_0 + i] = c as f64;
    }
    v[slot::UNSUBSCRIBE] = b(ctx.keywords.has_opt_out(text));
    v[slot::PHONE_ISFREE] = b(ents.of_kind(EntityKind::Phone).any(|e| ctx.keywords.is_free_phone(&e.canonical)));
    v[slot::EMAIL_ISFREE] = b(ents.of_kind(EntityKind::Email).any(|e| ctx.keywords.is_free_mail(&e.canonical)));

    // URL slots describe the highest-scoring URL; the first one wins ties.
    let mut best: Option<(f64, usize, ParsedDomain)> = None;
    let urls: Vec<_> = ents.of_kind(EntityKind::Url).collect();
    for (i, e) in urls.iter().enumerate() {
        let Ok(parsed) = ctx.extractor.parse_domain(&e.canonical) else {
            continue;
        };
        let dv = domain_features(&parsed.host, &parsed.tld, ctx.tables(), &ctx.matcher);
        let s = score(&parsed, &dv)?;
        if best.as_ref().map_or(true, |(bs, _, _)| s > *bs) {
            best = Some((s, i, parsed));
        }
    }
    match best {
        Some((s, i, parsed)) => {
            let e = urls[i];
            v[slot::URL_POS] = position_code(e.span, len).map_or(-1.0, PositionCode::value);
            let shortener = ctx.tables().is_shortener(&parsed.host) || ctx.tables().is_shortener(&parsed.registrable_domain);
            v[slot::URL_ISDOM] = b(!parsed.is_ip && !shortener);
            v[slot::DOMAIN_MELASCORE] = s;
            v[slot::DOMAIN_ISSHORT] = b(shortener);
            v[slot::DOMAIN_OBFUSCATION] = b(!e.raw.eq_ignore_ascii_case(&e.canonical));
        }
        None => {
            v[slot::URL_POS] = -1.0;
            v[slot::DOMAIN_MELASCORE] = -1.0;
        }
    }

    v[slot::NGRAM_ENTROPY] = trigram_entropy(&norm.normalized);
    v[slot::START_WITHNUMBER] = b(trimmed_edge(text, false).is_some_and(|c| c.is_ascii_digit()));
    v[slot::END_WITHNUMBER] = b(trimmed_edge(text, true).is_some_and(|c| c.is_ascii_digit()));
    let tokens: Vec<String> = norm.normalized.split_whitespace().map(str::to_lowercase).collect();
    v[slot::TOKEN_RATIO] = if tokens.is_empty() {
        0.0
    } else {
        tokens.iter().collect::<HashSet<_>>().len() as f64 / tokens.len() as f64
    };
    v[slot::NUM_OF_TIMEX] = ents.count(EntityKind::Timex) as f64;
    v[slot::NUM_OF_NUMBER] = ents.count(EntityKind::Number) as f64;
    v[slot::NUM_OF_CURRENCY] = ents.count(EntityKind::Currency) as f64;
    v[slot::STARTSWITH_HELLO] = b(ctx.keywords.starts_with_greeting(&norm.normalized));
    v[slot::ENDSWITH_CTA] = b(ents
        .entities()
        .iter()
        .filter(|e| e.kind.is_cta())
        .any(|e| matches!(position_code(e.span, len), Ok(PositionCode::End))));
    v[slot::HEUR_TWEET] = b(tweet_re().is_match(text));
    v[slot::NUM_OF_LEXVARIANTS] = norm.substitutions.len() as f64;
    Ok(MelaVector {
        values: v,
        schema_version: MESSAGE_SCHEMA,
    })
}

/// `index<TAB>name` listings for the message and domain vectors.
pub fn schema_text() -> String {
    let mut s = format!("# message features ({MESSAGE_SCHEMA})\n");
    for (i, n) in message_feature_names().iter().enumerate() {
        s.push_str(&format!("{i}\t{n}\n"));
    }
    s.push_str(&format!("# domain features ({DOMAIN_SCHEMA})\n"));
    for (i, n) in domain_feature_names().iter().enumerate() {
        s.push_str(&format!("{i}\t{n}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MelaContext {
        MelaContext::bundled()
    }

    fn msg(text: &str) -> Message {
        Message {
            id: "m".into(),
            ts: 1,
            sender: "s".into(),
            recipient: "1".into(),
            orig_net: String::new(),
            dest_net: String::new(),
            text: text.into(),
        }
    }

    fn features(text: &str) -> Vec<f64> {
        let c = ctx();
        let (ents, norm) = c.prepare(text, true);
        message_features(&msg(text), &norm, &ents, &c, &DomainScorer::Constant(0.25)).unwrap().values
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(message_feature_names().len(), MESSAGE_DIM);
        assert_eq!(domain_feature_names().len(), DOMAIN_DIM);
        assert_eq!(message_feature_names()[slot::UNSUBSCRIBE], "UNSUBSCRIBE");
        assert_eq!(message_feature_names()[slot::HEUR_TWEET], "HEUR_TWEET");
        assert_eq!(domain_feature_names()[dslot::CONTAINSWWW], "CONTAINSWWW");
        assert_eq!(domain_feature_names()[dslot::ISSHORT], "ISSHORT");
    }

    #[test]
    fn empty_message() {
        let v = features("");
        assert_eq!(v.len(), MESSAGE_DIM);
        assert_eq!(v[slot::LENGTH], 0.0);
        assert_eq!(v[slot::WORD_COUNT], 0.0);
        for s in [slot::URL_POS, slot::PHONE_POS, slot::EMAIL_POS, slot::NUMBER_POS] {
            assert_eq!(v[s], -1.0);
        }
        assert_eq!(v[slot::NGRAM_ENTROPY], 0.0);
        assert_eq!(v[slot::TOKEN_RATIO], 0.0);
        assert_eq!(v[slot::DOMAIN_MELASCORE], -1.0);
    }

    #[test]
    fn blocked_card_message() {
        let text = "Your credit card has been BLOCKED please visit http://xxxxxx.xx to reactivate";
        let v = features(text);
        assert_eq!(v[slot::NUM_OF_URLS], 1.0);
        let bank = ClusterSet::bundled().clusters.iter().position(|c| c.name == "bank").unwrap();
        assert!(v[slot::CLUSTER_0 + bank] >= 2.0, "{}", v[slot::CLUSTER_0 + bank]);
        assert!(v[slot::URL_POS] == 1.0 || v[slot::URL_POS] == 2.0);
        assert_eq!(v[slot::DOMAIN_MELASCORE], 0.25);
    }

    #[test]
    fn token_ratio_and_entropy() {
        let v = features("aaaa aaaa");
        assert_eq!(v[slot::TOKEN_RATIO], 0.5);
        let p = [4.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0];
        let h: f64 = -p.iter().map(|x| x * f64::log2(*x)).sum::<f64>();
        assert!((v[slot::NGRAM_ENTROPY] - h).abs() < 1e-12);
    }

    #[test]
    fn heuristics() {
        let v = features("Hi there, FWD: win cash now! reply STOP to 87121 #winner");
        assert_eq!(v[slot::STARTSWITH_HELLO], 1.0);
        assert_eq!(v[slot::CONTAINS_FWD], 1.0);
        assert_eq!(v[slot::UNSUBSCRIBE], 1.0);
        assert_eq!(v[slot::HEUR_TWEET], 1.0);
        let v = features("call 0800 123 4567 now");
        assert_eq!(v[slot::PHONE_ISFREE], 1.0);
        let v = features("see you at the weekend, say hi to mom");
        assert_eq!(v[slot::UNSUBSCRIBE], 0.0);
        assert_eq!(v[slot::STARTSWITH_HELLO], 0.0);
    }

    #[test]
    fn domain_examples() {
        let c = ctx();
        let v = domain_features("2013cash4cars.tk", "tk", c.tables(), &c.matcher).values;
        assert_eq!(v[dslot::STARTS_WITH_NUM], 1.0);
        assert_eq!(v[dslot::CONTAINS_YEAR], 1.0);
        assert_eq!(v[dslot::BADTLDS], 1.0);
        let names = ClusterSet::bundled();
        let idx = |n: &str| names.clusters.iter().position(|c| c.name == n).unwrap();
        assert!(v[dslot::CLUSTER_0 + idx("car")] >= 1.0);
        assert!(v[dslot::CLUSTER_0 + idx("money")] >= 1.0);

        let v = domain_features("example.com", "com", c.tables(), &c.matcher).values;
        assert_eq!(v[dslot::NORMALTLDS], 1.0);
        assert_eq!(v[dslot::DIGIT_RATIO], 0.0);
        assert_eq!(v[dslot::HYPHEN_COUNT], 0.0);

        let v = domain_features("vv-aaa-00.pw", "pw", c.tables(), &c.matcher).values;
        assert_eq!(v[dslot::CONTAINS_VV], 1.0);
        assert_eq!(v[dslot::CONTAINS_00], 1.0);
        assert_eq!(v[dslot::HYPHEN_COUNT], 2.0);
        assert_eq!(v[dslot::SUSPTLDS], 1.0);
        assert_eq!(v[dslot::BADTLDS] + v[dslot::NORMALTLDS], 0.0);
    }

    #[test]
    fn obfuscated_domain_flag() {
        let v = features("Hi, I want to meet you tonight, spamdomain.com.Support me");
        assert_eq!(v[slot::NUM_OF_URLS], 1.0);
        assert_eq!(v[slot::DOMAIN_OBFUSCATION], 1.0);
        assert_eq!(v[slot::URL_ISDOM], 1.0);
        let v = features("go to bit.ly/x12 now");
        assert_eq!(v[slot::DOMAIN_ISSHORT], 1.0);
        assert_eq!(v[slot::URL_ISDOM], 0.0);
        assert_eq!(v[slot::DOMAIN_OBFUSCATION], 0.0);
    }
}
