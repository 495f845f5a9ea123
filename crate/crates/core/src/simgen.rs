//! Deterministic synthetic message corpora and sender streams.
//!
//! Spam comes from campaign templates instantiated with slot words, SMS
//! contractions (the normalization lexicon run backwards) and CTA
//! obfuscation. Ham comes from a conversational template pool. The generator
//! is a stand-in for private operator traffic and makes no claim to realism
//! beyond the phenomena the features are meant to capture.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::Lexicon;
use crate::{Label, Message};

pub const POOLS: &str = include_str!("../data/simgen/pools.txt");
pub const CAMPAIGNS: &str = include_str!("../data/simgen/campaigns.txt");
pub const DRIFT_CAMPAIGNS: &str = include_str!("../data/simgen/drift.txt");
pub const HAM_TEMPLATES: &str = include_str!("../data/simgen/ham.txt");

const DAY: u64 = 24 * 3600;
const OBFUSCATED_DOTS: [&str; 4] = ["[.]", "(.)", "[dot]", "{.}"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtaKind {
    Url,
    Phone,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenderStrategy {
    /// One sender, many messages per second.
    FastSingle,
    /// Many senders, each at a human-like rate.
    SlowDistributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targeting {
    RandomUniform,
    /// Walks a purchased block of consecutive numbers.
    ListBased,
}

macro_rules! snake_from_str {
    ($t:ty) => {
        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<$t> {
                serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
                    .map_err(|_| Error::Config(format!("unknown {} {s:?}", stringify!($t))))
            }
        }
    };
}

snake_from_str!(CtaKind);
snake_from_str!(SenderStrategy);
snake_from_str!(Targeting);

fn default_list_size() -> usize {
    500
}

fn default_volume() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub name: String,
    pub template: String,
    pub obfuscation_level: f64,
    pub cta_kind: CtaKind,
    #[serde(default = "default_volume")]
    pub volume: usize,
    pub sender_strategy: SenderStrategy,
    pub targeting: Targeting,
    /// Size of the number block for list-based targeting.
    #[serde(default = "default_list_size")]
    pub list_size: usize,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.volume == 0 {
            return Err(Error::Config(format!("campaign {}: volume must be > 0", self.name)));
        }
        if !(0.0..=1.0).contains(&self.obfuscation_level) {
            return Err(Error::Config(format!("campaign {}: obfuscation_level must be in [0, 1]", self.name)));
        }
        if self.list_size == 0 {
            return Err(Error::Config(format!("campaign {}: list_size must be > 0", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedCampaign {
    #[serde(flatten)]
    pub spec: CampaignSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTemplate {
    pub template: String,
    pub weight: f64,
}

/// Parses `name cta weight obfuscation strategy targeting template` rows and
/// normalizes the weights to sum to one.
pub fn parse_campaigns(text: &str, source_name: &str) -> Result<Vec<WeightedCampaign>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(Error::malformed(source_name, i + 1, format!("expected 7 columns, got {}", cols.len())));
        }
        let bad = |what: &str| Error::malformed(source_name, i + 1, format!("bad {what}"));
        let spec = CampaignSpec {
            name: cols[0].to_string(),
            cta_kind: cols[1].parse().map_err(|_| bad("cta kind"))?,
            obfuscation_level: cols[3].parse().map_err(|_| bad("obfuscation level"))?,
            sender_strategy: cols[4].parse().map_err(|_| bad("sender strategy"))?,
            targeting: cols[5].parse().map_err(|_| bad("targeting"))?,
            template: cols[6].to_string(),
            volume: default_volume(),
            list_size: default_list_size(),
        };
        spec.validate()?;
        let weight: f64 = cols[2].parse().map_err(|_| bad("weight"))?;
        out.push(WeightedCampaign { spec, weight });
    }
    normalize_weights(out.iter_mut().map(|c| &mut c.weight));
    Ok(out)
}

pub fn parse_ham_templates(text: &str, source_name: &str) -> Result<Vec<WeightedTemplate>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (w, t) = line
            .split_once('\t')
            .ok_or_else(|| Error::malformed(source_name, i + 1, "expected weight<TAB>template"))?;
        let weight: f64 = w.parse().map_err(|_| Error::malformed(source_name, i + 1, "bad weight"))?;
        out.push(WeightedTemplate {
            template: t.to_string(),
            weight,
        });
    }
    normalize_weights(out.iter_mut().map(|t| &mut t.weight));
    Ok(out)
}

fn normalize_weights<'a>(weights: impl Iterator<Item = &'a mut f64>) {
    let ws: Vec<&mut f64> = weights.collect();
    let total: f64 = ws.iter().map(|w| **w).sum();
    if total > 0.0 {
        for w in ws {
            *w /= total;
        }
    }
}

fn check_weights(weights: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Config(format!("{what} weights must be finite and >= 0")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("{what} weights sum to {total}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_spam: usize,
    pub n_ham: usize,
    pub campaigns: Vec<WeightedCampaign>,
    pub ham_templates: Vec<WeightedTemplate>,
    /// Chance that a word with a known SMS contraction is replaced by one.
    pub spam_lexvar_rate: f64,
    pub ham_lexvar_rate: f64,
    pub start_ts: u64,
    /// Seconds between consecutive messages.
    pub spacing_secs: u64,
}

impl GenConfig {
    /// Bundled campaign mix and ham pool.
    pub fn bundled(seed: u64, n_spam: usize, n_ham: usize) -> GenConfig {
        GenConfig {
            seed,
            n_spam,
            n_ham,
            campaigns: parse_campaigns(CAMPAIGNS, "bundled campaigns").expect("bundled campaigns are valid"),
            ham_templates: parse_ham_templates(HAM_TEMPLATES, "bundled ham").expect("bundled ham is valid"),
            spam_lexvar_rate: 0.35,
            ham_lexvar_rate: 0.35,
            start_ts: 1_400_000_000,
            spacing_secs: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spam > 0 {
            if self.campaigns.is_empty() {
                return Err(Error::Config("spam requested but no campaigns given".into()));
            }
            check_weights(self.campaigns.iter().map(|c| c.weight), "campaign")?;
        }
        if self.n_ham > 0 {
            if self.ham_templates.is_empty() {
                return Err(Error::Config("ham requested but no ham templates given".into()));
            }
            check_weights(self.ham_templates.iter().map(|c| c.weight), "ham template")?;
        }
        for c in &self.campaigns {
            c.spec.validate()?;
        }
        for r in [self.spam_lexvar_rate, self.ham_lexvar_rate] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config("lexical variant rates must be in [0, 1]".into()));
            }
        }
        if self.start_ts == 0 {
            return Err(Error::Config("start_ts must be > 0".into()));
        }
        Ok(())
    }
}

/// One obfuscation applied to a generated CTA.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// A `.` in a URL replaced by the given token.
    Dot(String),
    /// Digits of a phone number replaced by look-alike letters.
    Homoglyph(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub messages: Vec<Message>,
    pub labels: Vec<Label>,
    /// Campaign name for spam, `None` for ham.
    pub campaigns: Vec<Option<String>>,
    /// CTA obfuscations per message.
    pub transforms: Vec<Vec<Transform>>,
}

/// Word pools, the reversed lexicon and the rendering machinery.
pub struct Generator {
    pools: BTreeMap<String, Vec<String>>,
    variants: BTreeMap<String, Vec<String>>,
    plain_ham: Vec<WeightedTemplate>,
}

fn parse_pools(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut pools: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_string());
            pools.entry(name.to_string()).or_default();
            continue;
        }
        let Some(name) = &current else {
            return Err(Error::malformed("simgen pools", i + 1, "entry before any [pool] header"));
        };
        pools.get_mut(name).unwrap().push(line.to_string());
    }
    Ok(pools)
}

struct Rendered {
    text: String,
    transforms: Vec<Transform>,
}

/// Pieces of a message: words eligible for contractions, and verbatim spans.
enum Piece {
    Words(String),
    Verbatim(String),
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

fn pick_weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], weight: impl Fn(&T) -> f64) -> &'a T {
    let total: f64 = items.iter().map(&weight).sum();
    let mut x = rng.gen::<f64>() * total;
    for it in items {
        x -= weight(it);
        if x < 0.0 {
            return it;
        }
    }
    items.last().expect("non-empty")
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

impl Generator {
    pub fn bundled() -> Generator {
        Generator::new(POOLS, HAM_TEMPLATES, &Lexicon::bundled()).expect("bundled generator data is valid")
    }

    pub fn new(pools: &str, ham: &str, lexicon: &Lexicon) -> Result<Generator> {
        let pools = parse_pools(pools)?;
        for required in ["filler", "name", "spam_dom_a", "spam_dom_b", "spam_tld", "benign_domain", "free_prefix", "area_code"] {
            if pools.get(required).map_or(true, Vec::is_empty) {
                return Err(Error::Config(format!("simgen pools lack [{required}]")));
            }
        }
        let mut variants: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (variant, canonical) in lexicon.iter() {
            let canonical = canonical.to_lowercase();
            // Multi-word canonicals are joined with '-' and never occur in templates.
            if canonical.contains('-') || !variant.chars().all(|c| c.is_alphanumeric()) {
                continue;
            }
            variants.entry(canonical).or_default().push(variant.to_string());
        }
        let plain_ham = parse_ham_templates(ham, "ham templates")?
            .into_iter()
            .filter(|t| !["{mirror", "{benign_url}", "{ham_phone}"].iter().any(|s| t.template.contains(s)))
            .collect();
        Ok(Generator {
            pools,
            variants,
            plain_ham,
        })
    }

    fn pool(&self, name: &str) -> Result<&[String]> {
        self.pools
            .get(name)
            .filter(|p| !p.is_empty())
            .map(|p| p.as_slice())
            .ok_or_else(|| Error::Config(format!("template references unknown pool {{{name}}}")))
    }

    fn filler(&self, rng: &mut ChaCha8Rng) -> String {
        pick(rng, &self.pools["filler"]).clone()
    }

    fn spam_host(&self, rng: &mut ChaCha8Rng) -> String {
        let a = pick(rng, &self.pools["spam_dom_a"]);
        let b = pick(rng, &self.pools["spam_dom_b"]);
        let sep = if rng.gen_bool(0.2) { "-" } else { "" };
        let n = rng.gen_range(0..3);
        format!("{a}{sep}{b}{}", digits(rng, n))
    }

    fn obfuscate_dot(&self, rng: &mut ChaCha8Rng, url: &str, level: f64, log: &mut Vec<Transform>) -> String {
        if level <= 0.0 || !(level >= 1.0 || rng.gen_bool(level)) {
            return url.to_string();
        }
        // Obfuscate the dot in front of the TLD, which sits before any path.
        let host_start = url.find("://").map_or(0, |i| i + 3);
        let host_end = url[host_start..].find('/').map_or(url.len(), |i| host_start + i);
        let Some(dot) = url[..host_end].rfind('.') else {
            return url.to_string();
        };
        let token = *pick(rng, &OBFUSCATED_DOTS);
        log.push(Transform::Dot(token.to_string()));
        format!("{}{}{}", &url[..dot], token, &url[dot + 1..])
    }

    fn spam_url(&self, rng: &mut ChaCha8Rng, level: f64, plain: bool, log: &mut Vec<Transform>) -> String {
        let tld = pick(rng, &self.pools["spam_tld"]);
        if plain {
            let url = format!("{}.{tld}", self.spam_host(rng));
            return self.obfuscate_dot(rng, &url, level, log);
        }
        let url = match rng.gen_range(0..4) {
            0 => format!("http://{}.{tld}/{}", self.spam_host(rng), digits(rng, 4)),
            1 => format!("www.{}.{tld}", self.spam_host(rng)),
            2 => {
                let code: String = (0..6).map(|_| char::from(b'a' + rng.gen_range(0..26u8))).collect();
                format!("{}/{code}", pick(rng, &self.pools["shortener"]))
            }
            _ => format!("{}.{tld}", self.spam_host(rng)),
        };
        self.obfuscate_dot(rng, &url, level, log)
    }

    fn spam_phone(&self, rng: &mut ChaCha8Rng, level: f64, plain: bool, log: &mut Vec<Transform>) -> String {
        let prefix = pick(rng, &self.pools["free_prefix"]).clone();
        let (a, b) = (digits(rng, 3), digits(rng, 4));
        let sep = if plain { "" } else { *pick(rng, &["", "-", " ", "."]) };
        let mut chars: Vec<char> = format!("{prefix}{sep}{a}{sep}{b}").chars().collect();
        if level > 0.0 && (level >= 1.0 || rng.gen_bool(level)) {
            // Replace digits that follow another digit, so the number stays one run.
            let ok = |chars: &[char], i: usize| chars[i - 1].is_ascii_alphanumeric() && chars[i].is_ascii_digit();
            if !(1..chars.len()).any(|i| ok(&chars, i) && matches!(chars[i], '0' | '1' | '5' | '8')) {
                let last = chars.len() - 1;
                chars[last] = *pick(rng, &['0', '1', '5', '8']);
            }
            let eligible: Vec<usize> = (1..chars.len())
                .filter(|&i| ok(&chars, i) && matches!(chars[i], '0' | '1' | '5' | '8'))
                .collect();
            if !eligible.is_empty() {
                let mut chosen: Vec<usize> = eligible.clone();
                chosen.shuffle(rng);
                let total_digits = chars.iter().filter(|c| c.is_ascii_digit()).count();
                let k = rng.gen_range(1..=chosen.len().min(3)).min(total_digits / 2);
                for &i in chosen.iter().take(k.max(1)) {
                    chars[i] = match chars[i] {
                        '0' => *pick(rng, &['O', 'o']),
                        '1' => *pick(rng, &['l', 'I']),
                        '5' => 'S',
                        _ => 'B',
                    };
                }
                log.push(Transform::Homoglyph(k.max(1)));
            }
        }
        chars.into_iter().collect()
    }

    fn ham_phone(&self, rng: &mut ChaCha8Rng) -> String {
        let area = pick(rng, &self.pools["area_code"]).clone();
        let sep = *pick(rng, &["-", " ", ""]);
        format!("{area}{sep}{}{sep}{}", digits(rng, 3), digits(rng, 4))
    }

    fn benign_url(&self, rng: &mut ChaCha8Rng) -> String {
        let host = pick(rng, &self.pools["benign_domain"]).clone();
        let id: String = (0..8)
            .map(|_| {
                let c = rng.gen_range(0..36u8);
                char::from(if c < 10 { b'0' + c } else { b'a' + c - 10 })
            })
            .collect();
        match rng.gen_range(0..3) {
            0 => format!("https://{host}/{id}"),
            1 => format!("{host}/{id}"),
            _ => format!("https://www.{host}"),
        }
    }

    /// Words in fixed order with one filler before each.
    fn skeleton(&self, rng: &mut ChaCha8Rng, words: &[&str]) -> String {
        let mut out = Vec::new();
        for w in words {
            out.push(self.filler(rng));
            out.push(w.to_string());
        }
        out.join(" ")
    }

    fn render(&self, rng: &mut ChaCha8Rng, template: &str, spec: Option<&CampaignSpec>, pieces: &mut Vec<Piece>, log: &mut Vec<Transform>) -> Result<()> {
        let level = spec.map_or(0.0, |s| s.obfuscation_level);
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            pieces.push(Piece::Words(rest[..open].to_string()));
            let close = rest[open..]
                .find('}')
                .map(|c| open + c)
                .ok_or_else(|| Error::Config(format!("unclosed slot in template {template:?}")))?;
            let slot = &rest[open + 1..close];
            rest = &rest[close + 1..];
            if let Some(words) = slot.strip_prefix("skel:") {
                let ws: Vec<&str> = words.split_whitespace().collect();
                pieces.push(Piece::Words(self.skeleton(rng, &ws)));
                continue;
            }
            if let Some(words) = slot.strip_prefix("mirror:") {
                let ws: Vec<&str> = words.split_whitespace().collect();
                let mut shuffled = ws.clone();
                // Any order except the original one.
                for _ in 0..16 {
                    shuffled.shuffle(rng);
                    if shuffled != ws {
                        break;
                    }
                }
                pieces.push(Piece::Words(self.skeleton(rng, &shuffled)));
                continue;
            }
            if slot.contains('|') {
                let options: Vec<&str> = slot.split('|').collect();
                pieces.push(Piece::Words(pick(rng, &options).to_string()));
                continue;
            }
            let piece = match slot {
                "~" => Piece::Words(self.filler(rng)),
                "url" => Piece::Verbatim(self.spam_url(rng, level, false, log)),
                "url:plain" => Piece::Verbatim(self.spam_url(rng, level, true, log)),
                "phone" => Piece::Verbatim(self.spam_phone(rng, level, false, log)),
                "phone:plain" => Piece::Verbatim(self.spam_phone(rng, level, true, log)),
                "benign_url" => Piece::Verbatim(self.benign_url(rng)),
                "ham_phone" => Piece::Verbatim(self.ham_phone(rng)),
                "code" => Piece::Verbatim(format!("{}", rng.gen_range(60000..89999))),
                "num" => Piece::Words(format!("{}", rng.gen_range(2..=12) * 5)),
                "ham" => {
                    let t = pick_weighted(rng, &self.plain_ham, |t| t.weight).template.clone();
                    self.render(rng, &t, None, pieces, log)?;
                    continue;
                }
                name => Piece::Words(pick(rng, self.pool(name)?).clone()),
            };
            pieces.push(piece);
        }
        pieces.push(Piece::Words(rest.to_string()));
        Ok(())
    }

    /// Replaces words by a random known contraction with probability `rate`.
    fn contract(&self, rng: &mut ChaCha8Rng, words: &str, rate: f64) -> String {
        if rate <= 0.0 {
            return words.to_string();
        }
        let mut out = String::with_capacity(words.len());
        for (i, tok) in words.split(' ').enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let core_start = tok.find(|c: char| c.is_alphanumeric()).unwrap_or(tok.len());
            let core_end = tok.rfind(|c: char| c.is_alphanumeric()).map_or(core_start, |e| e + 1);
            let core = &tok[core_start..core_end];
            let options = (!core.is_empty()).then(|| self.variants.get(&core.to_lowercase())).flatten();
            match options {
                Some(vs) if rng.gen_bool(rate) => {
                    out.push_str(&tok[..core_start]);
                    out.push_str(pick(rng, vs));
                    out.push_str(&tok[core_end..]);
                }
                _ => out.push_str(tok),
            }
        }
        out
    }

    fn instantiate(&self, rng: &mut ChaCha8Rng, template: &str, spec: Option<&CampaignSpec>, rate: f64) -> Result<Rendered> {
        let mut pieces = Vec::new();
        let mut log = Vec::new();
        self.render(rng, template, spec, &mut pieces, &mut log)?;
        let mut text = String::new();
        for p in pieces {
            match p {
                Piece::Words(w) => text.push_str(&self.contract(rng, &w, rate)),
                Piece::Verbatim(v) => text.push_str(&v),
            }
        }
        let text = crate::textnorm::collapse_whitespace(&text);
        Ok(Rendered { text, transforms: log })
    }

    /// One spam text for `spec`, with its obfuscation log.
    pub fn spam_text(&self, rng: &mut ChaCha8Rng, spec: &CampaignSpec, rate: f64) -> Result<(String, Vec<Transform>)> {
        let r = self.instantiate(rng, &spec.template, Some(spec), rate)?;
        Ok((r.text, r.transforms))
    }

    pub fn ham_text(&self, rng: &mut ChaCha8Rng, templates: &[WeightedTemplate], rate: f64) -> Result<String> {
        let t = pick_weighted(rng, templates, |t| t.weight);
        Ok(self.instantiate(rng, &t.template, None, rate)?.text)
    }

    fn unique_spam(
        &self,
        rng: &mut ChaCha8Rng,
        spec: &CampaignSpec,
        rate: f64,
        seen: &mut HashSet<String>,
    ) -> Result<(String, Vec<Transform>)> {
        for _ in 0..64 {
            let (text, log) = self.spam_text(rng, spec, rate)?;
            if seen.insert(text.clone()) {
                return Ok((text, log));
            }
        }
        // Saturated template: tag with a reference code until unique.
        loop {
            let (text, log) = self.spam_text(rng, spec, rate)?;
            let tagged = format!("{text} ref {}", digits(rng, 6));
            if seen.insert(tagged.clone()) {
                return Ok((tagged, log));
            }
        }
    }
}

fn phone_number(rng: &mut ChaCha8Rng) -> String {
    format!("1{}{}", rng.gen_range(2..10), digits(rng, 9))
}

/// Labeled message corpus, deterministic under `cfg.seed`.
pub fn gen_messages(cfg: &GenConfig) -> Result<Generated> {
    gen_messages_with(&Generator::bundled(), cfg)
}

pub fn gen_messages_with(generator: &Generator, cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<Label> = std::iter::repeat(Label::Spam)
        .take(cfg.n_spam)
        .chain(std::iter::repeat(Label::Ham).take(cfg.n_ham))
        .collect();
    order.shuffle(&mut rng);
    let us = &generator.pools["us_network"];
    let mut seen = HashSet::new();
    let mut out = Generated::default();
    for (i, label) in order.into_iter().enumerate() {
        let (text, campaign, log) = match label {
            Label::Spam => {
                let c = pick_weighted(&mut rng, &cfg.campaigns, |c| c.weight);
                let (text, log) = generator.unique_spam(&mut rng, &c.spec, cfg.spam_lexvar_rate, &mut seen)?;
                (text, Some(c.spec.name.clone()), log)
            }
            Label::Ham => (generator.ham_text(&mut rng, &cfg.ham_templates, cfg.ham_lexvar_rate)?, None, Vec::new()),
        };
        out.messages.push(Message {
            id: format!("g{:07}", i + 1),
            ts: cfg.start_ts + i as u64 * cfg.spacing_secs,
            sender: phone_number(&mut rng),
            recipient: phone_number(&mut rng),
            orig_net: pick(&mut rng, us).clone(),
            dest_net: pick(&mut rng, us).clone(),
            text,
        });
        out.labels.push(label);
        out.campaigns.push(campaign);
        out.transforms.push(log);
    }
    Ok(out)
}

/// A campaign injected into a sender stream from a given day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub campaign: CampaignSpec,
    pub start_day: u64,
    /// Days over which the injected senders are active.
    pub days: u64,
    pub n_senders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub seed: u64,
    pub start_ts: u64,
    pub days: u64,
    pub n_legit: usize,
    pub n_spam: usize,
    pub campaigns: Vec<WeightedCampaign>,
    pub ham_templates: Vec<WeightedTemplate>,
    /// Messages per legitimate sender, inclusive range.
    pub legit_messages: (usize, usize),
    /// Distinct contacts per legitimate sender, inclusive range.
    pub legit_contacts: (usize, usize),
    /// Messages per spamming sender, inclusive range.
    pub spam_messages: (usize, usize),
    pub injections: Vec<Injection>,
    pub spam_lexvar_rate: f64,
    pub ham_lexvar_rate: f64,
}

impl StreamConfig {
    pub fn bundled(seed: u64, days: u64, n_legit: usize, n_spam: usize) -> StreamConfig {
        let g = GenConfig::bundled(seed, 0, 0);
        StreamConfig {
            seed,
            start_ts: 1_400_000_000,
            days,
            n_legit,
            n_spam,
            campaigns: g.campaigns,
            ham_templates: g.ham_templates,
            legit_messages: (55, 110),
            legit_contacts: (2, 12),
            spam_messages: (55, 90),
            injections: Vec::new(),
            spam_lexvar_rate: g.spam_lexvar_rate,
            ham_lexvar_rate: g.ham_lexvar_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days < 7 {
            return Err(Error::Config("sender streams need at least 7 days".into()));
        }
        if self.n_spam > 0 {
            check_weights(self.campaigns.iter().map(|c| c.weight), "campaign")?;
        }
        if self.n_legit > 0 {
            check_weights(self.ham_templates.iter().map(|c| c.weight), "ham template")?;
        }
        for (lo, hi) in [self.legit_messages, self.legit_contacts, self.spam_messages] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("bad range ({lo}, {hi})")));
            }
        }
        for inj in &self.injections {
            inj.campaign.validate()?;
            if inj.days == 0 || inj.start_day + inj.days > self.days {
                return Err(Error::Config(format!("injection {} falls outside the stream", inj.campaign.name)));
            }
        }
        Ok(())
    }
}

/// One chat-lure campaign from the bundled drift set, as a CampaignSpec.
pub fn drift_campaign() -> CampaignSpec {
    let mut c = parse_campaigns(DRIFT_CAMPAIGNS, "bundled drift campaigns")
        .expect("bundled drift campaigns are valid")
        .remove(0)
        .spec;
    c.list_size = 6;
    c
}

/// All bundled drift campaigns.
pub fn drift_campaigns() -> Vec<WeightedCampaign> {
    parse_campaigns(DRIFT_CAMPAIGNS, "bundled drift campaigns").expect("bundled drift campaigns are valid")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SenderStream {
    /// Globally ordered by timestamp.
    pub messages: Vec<Message>,
    pub labels: Vec<Label>,
    pub sender_labels: BTreeMap<String, Label>,
    /// Campaign name per spamming sender.
    pub sender_campaigns: BTreeMap<String, String>,
}

impl SenderStream {
    pub fn sender_label(&self, sender: &str) -> Option<Label> {
        self.sender_labels.get(sender).copied()
    }
}

struct SenderPlan {
    id: String,
    label: Label,
    campaign: Option<CampaignSpec>,
    /// Campaign variants to draw texts from, for injected senders.
    texts_from: Option<Vec<CampaignSpec>>,
    start: u64,
    duration: u64,
    n: usize,
    recipients: Vec<String>,
    orig_net: String,
}

/// Labeled, timestamp-ordered message stream of legitimate and spamming senders.
pub fn gen_sender_streams(cfg: &StreamConfig) -> Result<SenderStream> {
    gen_sender_streams_with(&Generator::bundled(), cfg)
}

pub fn gen_sender_streams_with(generator: &Generator, cfg: &StreamConfig) -> Result<SenderStream> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pools = &generator.pools;
    let last_start = (cfg.days - 7) * DAY;
    let mut plans: Vec<SenderPlan> = Vec::new();
    let mut used_ids = HashSet::new();
    let mut new_id = |rng: &mut ChaCha8Rng| loop {
        let id = phone_number(rng);
        if used_ids.insert(id.clone()) {
            return id;
        }
    };

    for _ in 0..cfg.n_legit {
        let n = rng.gen_range(cfg.legit_messages.0..=cfg.legit_messages.1);
        let k = rng.gen_range(cfg.legit_contacts.0..=cfg.legit_contacts.1);
        let contacts = (0..k).map(|_| phone_number(&mut rng)).collect();
        plans.push(SenderPlan {
            id: new_id(&mut rng),
            label: Label::Ham,
            campaign: None,
            texts_from: None,
            start: rng.gen_range(0..=last_start),
            duration: rng.gen_range(4 * DAY..7 * DAY),
            n,
            recipients: contacts,
            orig_net: pick(&mut rng, &pools["us_network"]).clone(),
        });
    }

    let spam_plan = |rng: &mut ChaCha8Rng, spec: &CampaignSpec, start: u64, window: u64, id: String| {
        let n = rng.gen_range(cfg.spam_messages.0..=cfg.spam_messages.1);
        let (duration, orig) = match spec.sender_strategy {
            // 0.2 to 2 messages per second.
            SenderStrategy::FastSingle => (
                (n as f64 / rng.gen_range(0.2..2.0)) as u64 + 1,
                pick(rng, &pools["spam_network"]).clone(),
            ),
            SenderStrategy::SlowDistributed => (
                rng.gen_range(DAY..window.max(DAY + 1)),
                pick(rng, &pools["prepaid_network"]).clone(),
            ),
        };
        let recipients = match spec.targeting {
            Targeting::RandomUniform => (0..n).map(|_| phone_number(rng)).collect(),
            Targeting::ListBased => {
                let base: u64 = rng.gen_range(2_000_000_000..9_000_000_000);
                let step = rng.gen_range(1..=3u64);
                (0..spec.list_size as u64).map(|j| format!("1{}", base + j * step)).collect()
            }
        };
        SenderPlan {
            id,
            label: Label::Spam,
            campaign: Some(spec.clone()),
            texts_from: None,
            start,
            duration,
            n,
            recipients,
            orig_net: orig,
        }
    };

    for _ in 0..cfg.n_spam {
        let spec = pick_weighted(&mut rng, &cfg.campaigns, |c| c.weight).spec.clone();
        let start = rng.gen_range(0..=last_start);
        let id = new_id(&mut rng);
        plans.push(spam_plan(&mut rng, &spec, start, 6 * DAY, id));
    }
    let drift_texts: Vec<CampaignSpec> = drift_campaigns().into_iter().map(|c| c.spec).collect();
    for inj in &cfg.injections {
        for _ in 0..inj.n_senders {
            let window = inj.days * DAY;
            let id = new_id(&mut rng);
            let mut plan = spam_plan(&mut rng, &inj.campaign, 0, window, id);
            plan.duration = plan.duration.min(window - 1);
            plan.start = inj.start_day * DAY + rng.gen_range(0..window - plan.duration);
            plan.orig_net = pick(&mut rng, &pools["us_network"]).clone();
            if drift_texts.iter().any(|d| d.name == inj.campaign.name) {
                plan.texts_from = Some(drift_texts.clone());
            }
            plans.push(plan);
        }
    }

    let mut seen = HashSet::new();
    let mut stream = SenderStream::default();
    let mut all: Vec<(Message, Label)> = Vec::new();
    for (p_idx, plan) in plans.iter().enumerate() {
        stream.sender_labels.insert(plan.id.clone(), plan.label);
        if let Some(c) = &plan.campaign {
            stream.sender_campaigns.insert(plan.id.clone(), c.name.clone());
        }
        let mut offsets: Vec<u64> = (0..plan.n).map(|_| rng.gen_range(0..=plan.duration)).collect();
        offsets.sort_unstable();
        for (j, off) in offsets.into_iter().enumerate() {
            let text = match (&plan.campaign, &plan.texts_from) {
                (_, Some(options)) => {
                    let spec = pick(&mut rng, options);
                    generator.unique_spam(&mut rng, spec, cfg.spam_lexvar_rate, &mut seen)?.0
                }
                (Some(spec), None) => generator.unique_spam(&mut rng, spec, cfg.spam_lexvar_rate, &mut seen)?.0,
                (None, None) => generator.ham_text(&mut rng, &cfg.ham_templates, cfg.ham_lexvar_rate)?,
            };
            let recipient = match plan.campaign.as_ref().map(|c| c.targeting) {
                Some(Targeting::ListBased) => plan.recipients[j % plan.recipients.len()].clone(),
                Some(Targeting::RandomUniform) => plan.recipients[j].clone(),
                None => pick(&mut rng, &plan.recipients).clone(),
            };
            all.push((
                Message {
                    id: format!("s{p_idx:05}-{j:04}"),
                    ts: cfg.start_ts + plan.start + off,
                    sender: plan.id.clone(),
                    recipient,
                    orig_net: plan.orig_net.clone(),
                    dest_net: pick(&mut rng, &pools["us_network"]).clone(),
                    text,
                },
                plan.label,
            ));
        }
    }
    all.sort_by(|a, b| a.0.ts.cmp(&b.0.ts).then_with(|| a.0.id.cmp(&b.0.id)));
    for (m, l) in all {
        stream.messages.push(m);
        stream.labels.push(l);
    }
    Ok(stream)
}

/// `id<TAB>label` sidecar text.
pub fn labels_text(messages: &[Message], labels: &[Label]) -> String {
    let mut s = String::new();
    for (m, l) in messages.iter().zip(labels) {
        let _ = writeln!(s, "{}\t{}", m.id, l);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{EntityExtractor, EntityKind};

    fn spec(cta: CtaKind, template: &str, level: f64) -> CampaignSpec {
        CampaignSpec {
            name: "t".into(),
            template: template.into(),
            obfuscation_level: level,
            cta_kind: cta,
            volume: 10,
            sender_strategy: SenderStrategy::FastSingle,
            targeting: Targeting::RandomUniform,
            list_size: 500,
        }
    }

    fn cfg_with(c: CampaignSpec, n_spam: usize) -> GenConfig {
        let mut cfg = GenConfig::bundled(7, n_spam, 0);
        cfg.campaigns = vec![WeightedCampaign { spec: c, weight: 1.0 }];
        cfg
    }

    #[test]
    fn bundled_data_parses() {
        let cfg = GenConfig::bundled(1, 10, 10);
        cfg.validate().unwrap();
        assert!(cfg.campaigns.len() >= 20);
        assert_eq!(drift_campaign().cta_kind, CtaKind::Implicit);
    }

    #[test]
    fn clean_url_campaign_parses() {
        let g = gen_messages(&cfg_with(spec(CtaKind::Url, "win big at {url} today", 0.0), 50)).unwrap();
        let ex = EntityExtractor::bundled();
        for (m, log) in g.messages.iter().zip(&g.transforms) {
            assert!(log.is_empty());
            let ents = ex.extract(&m.text);
            let url = ents.first(EntityKind::Url).unwrap_or_else(|| panic!("no url in {:?}", m.text));
            assert!(ex.parse_domain(&url.canonical).is_ok());
        }
    }

    #[test]
    fn full_obfuscation_changes_every_cta() {
        let ex = EntityExtractor::bundled();
        for c in [
            spec(CtaKind::Url, "win big at {url} today", 1.0),
            spec(CtaKind::Phone, "call {phone} today", 1.0),
            spec(CtaKind::Phone, "hey {phone:plain}", 1.0),
        ] {
            let g = gen_messages(&cfg_with(c, 100)).unwrap();
            for (m, log) in g.messages.iter().zip(&g.transforms) {
                assert!(!log.is_empty(), "{}", m.text);
                let ents = ex.extract(&m.text);
                let cta = ents
                    .entities()
                    .iter()
                    .find(|e| e.kind.is_cta())
                    .unwrap_or_else(|| panic!("no cta in {:?}", m.text));
                assert_ne!(cta.raw.to_lowercase(), cta.canonical.to_lowercase(), "{}", m.text);
            }
        }
    }

    #[test]
    fn same_seed_same_corpus_and_unique_spam() {
        let a = gen_messages(&GenConfig::bundled(5, 300, 300)).unwrap();
        let b = gen_messages(&GenConfig::bundled(5, 300, 300)).unwrap();
        assert_eq!(a, b);
        let c = gen_messages(&GenConfig::bundled(6, 300, 300)).unwrap();
        assert_ne!(a.messages, c.messages);
        let spam: Vec<&str> = a
            .messages
            .iter()
            .zip(&a.labels)
            .filter(|(_, l)| l.is_spam())
            .map(|(m, _)| m.text.as_str())
            .collect();
        assert_eq!(spam.iter().collect::<HashSet<_>>().len(), spam.len());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut cfg = GenConfig::bundled(1, 1, 1);
        cfg.campaigns[0].weight += 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn no_spam_means_only_legit_senders() {
        let s = gen_sender_streams(&StreamConfig::bundled(3, 7, 5, 0)).unwrap();
        assert!(!s.messages.is_empty());
        assert!(s.sender_labels.values().all(|l| *l == Label::Ham));
        assert!(s.messages.windows(2).all(|w| w[0].ts <= w[1].ts));
    }
}
