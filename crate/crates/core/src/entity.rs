//! Obfuscation-aware extraction of URLs, phones, emails, temporal
//! expressions, numbers and currency mentions.
//!
//! All spans are code-point offsets into the original text. Extraction runs
//! in a fixed order and each later stage skips text claimed by an earlier one:
//! emails, URLs, structural timex (clock times, dates), phones, currency,
//! standalone numbers, timex keywords.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};
use crate::tld::{SuffixList, TldTables, WordList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Url,
    Phone,
    Email,
    Timex,
    Number,
    Currency,
}

impl EntityKind {
    pub const ALL: [EntityKind; 6] = [
        EntityKind::Url,
        EntityKind::Phone,
        EntityKind::Email,
        EntityKind::Timex,
        EntityKind::Number,
        EntityKind::Currency,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// URLs, phones and emails are the explicit calls to action.
    pub fn is_cta(self) -> bool {
        matches!(self, EntityKind::Url | EntityKind::Phone | EntityKind::Email)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub raw: String,
    /// Deobfuscated form: lowercase URL host, digits-only phone, lowercase email.
    pub canonical: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet {
    entities: Vec<Entity>,
    counts: [usize; 6],
}

impl EntitySet {
    pub fn from_entities(mut entities: Vec<Entity>) -> EntitySet {
        entities.sort_by_key(|e| (e.span.0, e.kind, e.span.1));
        let mut counts = [0; 6];
        for e in &entities {
            counts[e.kind.index()] += 1;
        }
        EntitySet { entities, counts }
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.counts[kind.index()]
    }

    pub fn of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    pub fn first(&self, kind: EntityKind) -> Option<&Entity> {
        self.of_kind(kind).next()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Spans of URLs, emails and phones, the regions text normalization must not touch.
    pub fn cta_spans(&self) -> Vec<(usize, usize)> {
        self.entities.iter().filter(|e| e.kind.is_cta()).map(|e| e.span).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionCode {
    Absent = -1,
    Begin = 0,
    Middle = 1,
    End = 2,
}

impl PositionCode {
    pub fn value(self) -> f64 {
        self as i8 as f64
    }
}

/// Thirds rule: Begin if the span starts in the first third, End if it ends
/// in the last third, Middle otherwise.
pub fn position_code(span: (usize, usize), text_length: usize) -> Result<PositionCode> {
    let (start, end) = span;
    if start >= end || end > text_length {
        return Err(Error::SpanOutOfBounds {
            start,
            end,
            len: text_length,
        });
    }
    Ok(if start * 3 < text_length {
        PositionCode::Begin
    } else if end * 3 > text_length * 2 {
        PositionCode::End
    } else {
        PositionCode::Middle
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDomain {
    pub host: String,
    pub registrable_domain: String,
    /// Public suffix, e.g. `com` or `co.uk`; empty for IP hosts.
    pub tld: String,
    pub is_ip: bool,
}

fn bundled_suffixes() -> &'static SuffixList {
    static PSL: OnceLock<SuffixList> = OnceLock::new();
    PSL.get_or_init(SuffixList::bundled)
}

/// Splits a canonical URL into host, registrable domain and public suffix
/// using the bundled suffix snapshot.
pub fn parse_domain(url_canonical: &str) -> Result<ParsedDomain> {
    parse_domain_with(url_canonical, bundled_suffixes())
}

pub fn parse_domain_with(url: &str, psl: &SuffixList) -> Result<ParsedDomain> {
    let err = || Error::UnparsableHost(url.to_string());
    let s = url.trim();
    let rest = match s.find("://") {
        Some(i) => &s[i + 3..],
        None => s,
    };
    let authority = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host_port = authority.rsplit('@').next().unwrap_or("");
    let host = match host_port.rsplit_once(':') {
        Some((h, port)) if port.chars().all(|c| c.is_ascii_digit()) => h,
        _ => host_port,
    };
    let host = host.trim_end_matches('.').to_lowercase();
    if host.is_empty()
        || host
            .split('.')
            .any(|l| l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '-'))
    {
        return Err(err());
    }
    let labels: Vec<&str> = host.split('.').collect();
    let is_ip = labels.len() == 4
        && labels
            .iter()
            .all(|l| !l.is_empty() && l.len() <= 3 && l.chars().all(|c| c.is_ascii_digit()) && l.parse::<u16>().map_or(false, |v| v <= 255));
    if is_ip {
        return Ok(ParsedDomain {
            registrable_domain: host.clone(),
            host,
            tld: String::new(),
            is_ip: true,
        });
    }
    let (registrable_domain, tld) = psl.split(&host).ok_or_else(err)?;
    Ok(ParsedDomain {
        host,
        registrable_domain,
        tld,
        is_ip: false,
    })
}

/// Keyword lists with case-insensitive and case-sensitive (`=`-prefixed) entries.
#[derive(Debug, Clone, Default)]
struct KeywordSet {
    folded: HashSet<String>,
    exact: HashSet<String>,
}

impl KeywordSet {
    fn parse(text: &str) -> KeywordSet {
        let mut set = KeywordSet::default();
        for line in data::lines(text) {
            match line.strip_prefix('=') {
                Some(w) => {
                    set.exact.insert(w.to_string());
                }
                None => {
                    set.folded.insert(line.to_lowercase());
                }
            }
        }
        set
    }

    fn contains(&self, word: &str) -> bool {
        self.exact.contains(word) || self.folded.contains(&word.to_lowercase())
    }
}

fn is_homoglyph(c: char) -> bool {
    matches!(c, 'O' | 'o' | 'l' | 'I' | 'S' | 'B')
}

fn homoglyph_digit(c: char) -> Option<char> {
    match c {
        '0'..='9' => Some(c),
        'O' | 'o' => Some('0'),
        'l' | 'I' => Some('1'),
        'S' => Some('5'),
        'B' => Some('8'),
        _ => None,
    }
}

fn is_phone_separator(c: char) -> bool {
    matches!(c, '-' | '.' | ' ' | '(' | ')')
}

/// Titlecase word: an uppercase letter followed by at least one lowercase letter.
fn is_titlecase(label: &str) -> bool {
    let mut chars = label.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase())
        && label.chars().skip(1).all(|c| c.is_lowercase())
        && label.chars().count() >= 2
}

const OBFUSCATED_DOTS: [&str; 7] = ["[.]", "(.)", "{.}", "[dot]", "(dot)", "{dot}", "<dot>"];

/// Text with bracketed dot obfuscations collapsed to `.`, plus a byte map back
/// to the original (one entry per view byte, and one past the end).
fn dot_view(text: &str) -> (String, Vec<usize>) {
    let mut view = String::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len() + 1);
    let lower = text.to_ascii_lowercase();
    let mut i = 0;
    'outer: while i < text.len() {
        for pat in OBFUSCATED_DOTS {
            if lower[i..].starts_with(pat) {
                view.push('.');
                map.push(i);
                i += pat.len();
                continue 'outer;
            }
        }
        let c = text[i..].chars().next().expect("char boundary");
        view.push(c);
        for _ in 0..c.len_utf8() {
            map.push(i);
        }
        i += c.len_utf8();
    }
    map.push(text.len());
    (view, map)
}

struct Regexes {
    url: Regex,
    email: Regex,
    clock: Regex,
    ampm: Regex,
    date: Regex,
    number: Regex,
    pence: Regex,
    symbol_amount: Regex,
}

fn regexes() -> &'static Regexes {
    static R: OnceLock<Regexes> = OnceLock::new();
    R.get_or_init(|| Regexes {
        url: Regex::new(
            r#"(?i)((?:https?|ftp)://)?((?:[a-z0-9](?:[a-z0-9-]*[a-z0-9])?\.)+[a-z0-9-]{2,})((?::\d{1,5})?(?:[/?#][^\s<>"']*)?)"#,
        )
        .unwrap(),
        email: Regex::new(r"(?i)[a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)+").unwrap(),
        clock: Regex::new(r"(?i)\b(?:[01]?\d|2[0-3]):[0-5]\d(?:\s?[ap]\.?m\b\.?)?").unwrap(),
        ampm: Regex::new(r"(?i)\b(?:1[0-2]|0?[1-9])\s?[ap]\.?m\b\.?").unwrap(),
        date: Regex::new(r"\b\d{1,2}[/-]\d{1,2}(?:[/-](?:\d{4}|\d{2}))?\b").unwrap(),
        number: Regex::new(r"\d+(?:[.,]\d+)*").unwrap(),
        pence: Regex::new(r"(?i)\b\d+p\b").unwrap(),
        symbol_amount: Regex::new(r"[£$€¥₹¢]\s?\d[\d,]*(?:\.\d+)?").unwrap(),
    })
}

/// Entity extractor over immutable tables and keyword lists.
#[derive(Debug, Clone)]
pub struct EntityExtractor {
    tables: TldTables,
    psl: SuffixList,
    common_words: WordList,
    timex: KeywordSet,
    currency_symbols: Vec<char>,
    currency_words: HashSet<String>,
    amount_word: Regex,
}

impl EntityExtractor {
    /// Extractor using `tables` and the bundled word, timex and currency lists.
    pub fn new(tables: TldTables) -> EntityExtractor {
        EntityExtractor::with_lists(
            tables,
            WordList::bundled_common(),
            data::TIMEX,
            data::CURRENCY,
        )
    }

    pub fn bundled() -> EntityExtractor {
        EntityExtractor::new(TldTables::bundled())
    }

    pub fn with_lists(tables: TldTables, common_words: WordList, timex: &str, currency: &str) -> EntityExtractor {
        let mut currency_symbols = Vec::new();
        let mut currency_words = HashSet::new();
        for entry in data::lines(currency) {
            let mut chars = entry.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if !c.is_alphanumeric() => currency_symbols.push(c),
                _ => {
                    currency_words.insert(entry.to_lowercase());
                }
            }
        }
        let mut words: Vec<&String> = currency_words.iter().collect();
        words.sort_by_key(|w| std::cmp::Reverse(w.len()));
        let alternation = words.iter().map(|w| regex::escape(w)).collect::<Vec<_>>().join("|");
        let amount_word = Regex::new(&format!(r"(?i)\b\d[\d,]*(?:\.\d+)?\s?(?:{alternation})\b")).unwrap();
        EntityExtractor {
            tables,
            psl: SuffixList::bundled(),
            common_words,
            timex: KeywordSet::parse(timex),
            currency_symbols,
            currency_words,
            amount_word,
        }
    }

    pub fn tables(&self) -> &TldTables {
        &self.tables
    }

    pub fn suffixes(&self) -> &SuffixList {
        &self.psl
    }

    pub fn parse_domain(&self, url_canonical: &str) -> Result<ParsedDomain> {
        parse_domain_with(url_canonical, &self.psl)
    }

    pub fn extract(&self, text: &str) -> EntitySet {
        let mut doc = Doc::new(text);
        self.extract_emails(&mut doc);
        self.extract_urls(&mut doc);
        self.extract_structural_timex(&mut doc);
        self.extract_phones(&mut doc);
        self.extract_currency(&mut doc);
        self.extract_numbers(&mut doc);
        self.extract_timex_words(&mut doc);
        EntitySet::from_entities(doc.entities)
    }

    fn extract_emails(&self, doc: &mut Doc) {
        for m in regexes().email.find_iter(doc.text) {
            let raw = m.as_str().trim_end_matches(['.', '-']);
            let end = m.start() + raw.len();
            let tld = raw.rsplit('.').next().unwrap_or("");
            if !tld.chars().all(|c| c.is_ascii_alphabetic()) || !self.tables.is_valid_tld(tld) {
                continue;
            }
            doc.push_bytes(EntityKind::Email, m.start(), end, raw.to_lowercase());
        }
    }

    fn extract_urls(&self, doc: &mut Doc) {
        let (view, map) = dot_view(doc.text);
        for caps in regexes().url.captures_iter(&view) {
            let whole = caps.get(0).unwrap();
            let before = view[..whole.start()].chars().next_back();
            if matches!(before, Some(c) if c.is_alphanumeric() || matches!(c, '.' | '@' | '/' | '-' | '_' | '\\' | ':')) {
                // '\\' precedes many escaped-slash obfuscations; only accept if no scheme.
                if before != Some('\\') || caps.get(1).is_some() {
                    continue;
                }
            }
            let scheme = caps.get(1).map(|m| m.as_str().to_ascii_lowercase());
            let host_raw = caps.get(2).unwrap().as_str();
            let mut rest = caps.get(3).map_or("", |m| m.as_str());
            rest = rest.trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '}', '\'', '"']);

            let labels: Vec<&str> = host_raw.split('.').collect();
            let mut keep = labels.len();
            let mut truncated = false;
            for i in 2..labels.len() {
                if is_titlecase(labels[i]) && self.tables.is_valid_tld(labels[i - 1]) {
                    keep = i;
                    truncated = true;
                    break;
                }
            }
            let host_kept = labels[..keep].join(".");
            let host = host_kept.to_lowercase();
            let tld = host.rsplit('.').next().unwrap_or("");
            let has_www = host.starts_with("www.");
            let has_path = !truncated && !rest.is_empty() && rest.starts_with('/') && rest.len() > 1;

            if scheme.is_none() {
                if !tld.chars().all(|c| c.is_ascii_alphabetic()) || !self.tables.is_valid_tld(tld) {
                    continue;
                }
            }
            let canonical = format!(
                "{}{}{}",
                scheme.as_deref().unwrap_or(""),
                host,
                if truncated { "" } else { rest }
            );
            let Ok(parsed) = self.parse_domain(&canonical) else {
                continue;
            };
            let view_end = if truncated {
                caps.get(2).unwrap().end()
            } else {
                caps.get(3).map_or(caps.get(2).unwrap().end(), |m| m.start() + rest.len())
            };
            let orig_start = map[whole.start()];
            let orig_end = map[view_end];
            if doc.byte_claimed(orig_start, orig_end) {
                continue;
            }
            if scheme.is_none() && !has_www {
                let label = parsed.registrable_domain.split('.').next().unwrap_or("");
                let explicit = !self.common_words.contains(label) || has_path || self.tables.is_shortener(&host);
                if !explicit && !self.weak_url_evidence(doc.text, orig_start, orig_end, &parsed.tld) {
                    continue;
                }
            }
            doc.push_bytes(EntityKind::Url, orig_start, orig_end, canonical);
        }
    }

    /// Bad or suspicious TLD, preceded by whitespace, and not a sentence-final
    /// token following a known word.
    fn weak_url_evidence(&self, text: &str, start: usize, end: usize, tld: &str) -> bool {
        if !self.tables.is_bad_or_suspicious(tld) {
            return false;
        }
        let before = &text[..start];
        if !before.chars().next_back().is_some_and(char::is_whitespace) {
            return false;
        }
        let sentence_final = matches!(text[end..].chars().next(), None | Some('.' | '!' | '?'));
        let prev_word = before
            .split_whitespace()
            .next_back()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .unwrap_or("");
        let prev_known = !prev_word.is_empty() && self.common_words.contains(prev_word);
        !(sentence_final && prev_known)
    }

    fn extract_structural_timex(&self, doc: &mut Doc) {
        let r = regexes();
        for re in [&r.clock, &r.ampm, &r.date] {
            let found: Vec<(usize, usize)> = re.find_iter(doc.text).map(|m| (m.start(), m.end())).collect();
            for (s, e) in found {
                let raw = doc.text[s..e].trim_end();
                let e = s + raw.len();
                if !doc.byte_claimed(s, e) {
                    doc.push_bytes(EntityKind::Timex, s, e, raw.to_lowercase());
                }
            }
        }
    }

    fn extract_phones(&self, doc: &mut Doc) {
        let chars = doc.chars.clone();
        let n = chars.len();
        let mut i = 0;
        while i < n {
            let c = chars[i];
            let opener = (c == '+' || c == '(') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
            if doc.char_claimed(i) || !(c.is_ascii_digit() || opener) {
                i += 1;
                continue;
            }
            let mut j = i;
            let mut last_good = i;
            let mut seps = 0;
            while j < n && !doc.char_claimed(j) {
                let c = chars[j];
                if c.is_ascii_digit() || (j > i && is_homoglyph(c) && seps == 0) {
                    last_good = j + 1;
                    seps = 0;
                } else if j == i && opener {
                    // leading '+' or '('
                } else if is_phone_separator(c) && seps < 2 && j > i {
                    seps += 1;
                } else {
                    break;
                }
                j += 1;
            }
            let mut end = last_good;
            if end < n && chars[end].is_alphabetic() {
                while end > i && is_homoglyph(chars[end - 1]) {
                    end -= 1;
                }
            }
            let digits: String = chars[i..end].iter().filter_map(|&c| homoglyph_digit(c)).collect();
            let real = chars[i..end].iter().filter(|c| c.is_ascii_digit()).count();
            if (7..=15).contains(&digits.len()) && real * 2 >= digits.len() {
                doc.push_chars(EntityKind::Phone, i, end, digits);
            }
            i = j.max(i + 1);
        }
    }

    fn extract_currency(&self, doc: &mut Doc) {
        let r = regexes();
        for re in [&r.symbol_amount, &self.amount_word, &r.pence] {
            let found: Vec<(usize, usize)> = re.find_iter(doc.text).map(|m| (m.start(), m.end())).collect();
            for (s, e) in found {
                if !doc.byte_claimed(s, e) {
                    let canonical = doc.text[s..e].to_lowercase();
                    doc.push_bytes(EntityKind::Currency, s, e, canonical);
                }
            }
        }
        let symbols: Vec<(usize, char)> = doc
            .text
            .char_indices()
            .filter(|(_, c)| self.currency_symbols.contains(c))
            .collect();
        for (s, c) in symbols {
            let e = s + c.len_utf8();
            if !doc.byte_claimed(s, e) {
                doc.push_bytes(EntityKind::Currency, s, e, c.to_string());
            }
        }
        for (s, e) in word_spans(&doc.chars) {
            let word: String = doc.chars[s..e].iter().collect();
            if self.currency_words.contains(&word.to_lowercase()) && !doc.span_claimed(s, e) {
                doc.push_chars(EntityKind::Currency, s, e, word.to_lowercase());
            }
        }
    }

    fn extract_numbers(&self, doc: &mut Doc) {
        let found: Vec<(usize, usize)> = regexes()
            .number
            .find_iter(doc.text)
            .map(|m| (m.start(), m.end()))
            .collect();
        for (s, e) in found {
            if doc.byte_claimed(s, e) {
                continue;
            }
            let before = doc.text[..s].chars().next_back();
            if before.is_some_and(char::is_alphabetic) {
                continue;
            }
            let after: String = doc.text[e..].chars().take_while(|c| c.is_alphanumeric()).collect();
            let ordinal = matches!(after.to_lowercase().as_str(), "st" | "nd" | "rd" | "th");
            if !after.is_empty() && !ordinal {
                continue;
            }
            let raw = doc.text[s..e].to_string();
            doc.push_bytes(EntityKind::Number, s, e, raw.replace(',', ""));
        }
    }

    fn extract_timex_words(&self, doc: &mut Doc) {
        for (s, e) in word_spans(&doc.chars) {
            let word: String = doc.chars[s..e].iter().collect();
            if self.timex.contains(&word) && !doc.span_claimed(s, e) {
                doc.push_chars(EntityKind::Timex, s, e, word.to_lowercase());
            }
        }
    }
}

/// Extracts entities with `tables` and the bundled keyword lists.
pub fn extract_entities(text: &str, tables: &TldTables) -> EntitySet {
    EntityExtractor::new(tables.clone()).extract(text)
}

/// Maximal alphanumeric runs as code-point spans.
fn word_spans(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in chars.iter().enumerate() {
        match (c.is_alphanumeric(), start) {
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            (true, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, chars.len()));
    }
    out
}

/// Working state: text, per-char claim marks and collected entities.
struct Doc<'a> {
    text: &'a str,
    chars: Vec<char>,
    byte_to_char: Vec<usize>,
    claimed: Vec<bool>,
    entities: Vec<Entity>,
}

impl<'a> Doc<'a> {
    fn new(text: &'a str) -> Doc<'a> {
        let chars: Vec<char> = text.chars().collect();
        let mut byte_to_char = vec![0; text.len() + 1];
        let mut ci = 0;
        for (bi, c) in text.char_indices() {
            for k in 0..c.len_utf8() {
                byte_to_char[bi + k] = ci;
            }
            ci += 1;
        }
        byte_to_char[text.len()] = ci;
        Doc {
            text,
            claimed: vec![false; chars.len()],
            chars,
            byte_to_char,
            entities: Vec::new(),
        }
    }

    fn char_claimed(&self, i: usize) -> bool {
        self.claimed[i]
    }

    fn span_claimed(&self, s: usize, e: usize) -> bool {
        self.claimed[s..e].iter().any(|&c| c)
    }

    fn byte_claimed(&self, s: usize, e: usize) -> bool {
        self.span_claimed(self.byte_to_char[s], self.byte_to_char[e])
    }

    fn push_bytes(&mut self, kind: EntityKind, s: usize, e: usize, canonical: String) {
        let (cs, ce) = (self.byte_to_char[s], self.byte_to_char[e]);
        self.push_chars(kind, cs, ce, canonical);
    }

    fn push_chars(&mut self, kind: EntityKind, s: usize, e: usize, canonical: String) {
        if s >= e {
            return;
        }
        for c in &mut self.claimed[s..e] {
            *c = true;
        }
        self.entities.push(Entity {
            kind,
            raw: self.chars[s..e].iter().collect(),
            canonical,
            span: (s, e),
        });
    }
}
