//! Per-sender behavioural windows and the sender feature vector.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mela::{self, DomainScorer, MelaContext, MelaVector, MESSAGE_DIM, MESSAGE_SCHEMA};
use crate::message::Message;
use crate::textnorm::{normalize, Lexicon};

pub const MPA_SCHEMA: &str = "mpa-sender/1";
pub const MPA_DIM: usize = 9 + MESSAGE_DIM;
pub const WEEK_SECS: u64 = 7 * 24 * 3600;
/// Digits of the recipient number that enter the entropy, counted from the right.
pub const ENTROPY_DIGITS: usize = 7;

pub mod mslot {
    pub const ORIG_NETWORK: usize = 0;
    pub const DEST_NETWORK: usize = 1;
    pub const SENDER_NETWORK_IS_NOT_US: usize = 2;
    pub const DEST_NETWORK_IS_NOT_US: usize = 3;
    pub const NUM_OF_UNIQUE_RECIPIENTS: usize = 4;
    pub const RECIPIENT_NUMBER_ENTROPY: usize = 5;
    pub const NUM_OF_UNIQUE_DEST_NETWORKS: usize = 6;
    pub const SENDING_FREQUENCY: usize = 7;
    pub const NUM_OF_UNIQUE_MESSAGES: usize = 8;
    pub const MELA_0: usize = 9;
}

const MPA_HEAD: [&str; 9] = [
    "ORIG_NETWORK",
    "DEST_NETWORK",
    "SENDER_NETWORK_IS_NOT_US",
    "DEST_NETWORK_IS_NOT_US",
    "NUM_OF_UNIQUE_RECIPIENTS",
    "RECIPIENT_NUMBER_ENTROPY",
    "NUM_OF_UNIQUE_DEST_NETWORKS",
    "SENDING_FREQUENCY",
    "NUM_OF_UNIQUE_MESSAGES",
];

pub fn mpa_feature_names() -> Vec<String> {
    MPA_HEAD
        .iter()
        .map(|s| s.to_string())
        .chain((0..MESSAGE_DIM).map(|i| format!("MELA_FEATURE_{i}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub min_messages: usize,
    pub span_secs: u64,
    /// Out-of-order tolerance; older arrivals are rejected.
    pub skew_secs: u64,
    /// New messages a sender must add after an emission before the next one.
    pub emit_stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            min_messages: 50,
            span_secs: WEEK_SECS,
            skew_secs: 60,
            emit_stride: 50,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_messages == 0 || self.emit_stride == 0 || self.span_secs == 0 {
            return Err(Error::InvalidArgument(
                "min_messages, emit_stride and span_secs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One sender's retained messages at the moment of emission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderWindow {
    pub sender: String,
    pub messages: Vec<Message>,
    pub window_start: u64,
    pub window_end: u64,
    /// First message seen from this sender; kept after it leaves the window.
    pub first_message: Message,
}

impl SenderWindow {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Canonical one-line rendering used for equivalence checks.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("window serializes")
    }
}

#[derive(Debug, Clone)]
struct SenderState {
    messages: VecDeque<Message>,
    first: Message,
    added_since_emit: usize,
    emitted: bool,
}

/// Streaming per-sender window aggregator.
#[derive(Debug, Clone, Default)]
pub struct SenderAggregator {
    config: WindowConfig,
    senders: HashMap<String, SenderState>,
}

impl SenderAggregator {
    pub fn new(config: WindowConfig) -> Result<SenderAggregator> {
        config.validate()?;
        Ok(SenderAggregator {
            config,
            senders: HashMap::new(),
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn n_senders(&self) -> usize {
        self.senders.len()
    }

    /// Retained messages of `sender`, oldest first.
    pub fn retained(&self, sender: &str) -> Vec<&Message> {
        self.senders.get(sender).map_or_else(Vec::new, |s| s.messages.iter().collect())
    }

    pub fn ingest(&mut self, msg: Message) -> Result<Option<SenderWindow>> {
        msg.validate()?;
        let cfg = self.config;
        let state = self.senders.entry(msg.sender.clone()).or_insert_with(|| SenderState {
            messages: VecDeque::new(),
            first: msg.clone(),
            added_since_emit: 0,
            emitted: false,
        });
        if let Some(newest) = state.messages.back().map(|m| m.ts) {
            if msg.ts + cfg.skew_secs < newest {
                return Err(Error::TimestampRegression {
                    sender: msg.sender,
                    ts: msg.ts,
                    newest,
                });
            }
        }
        // Late arrivals go after every message with the same or an earlier timestamp.
        let at = state.messages.partition_point(|m| m.ts <= msg.ts);
        state.messages.insert(at, msg);
        let newest = state.messages.back().unwrap().ts;
        while state.messages.front().is_some_and(|m| m.ts + cfg.span_secs < newest) {
            state.messages.pop_front();
        }
        state.added_since_emit += 1;

        let due = !state.emitted || state.added_since_emit >= cfg.emit_stride;
        if state.messages.len() >= cfg.min_messages && due {
            state.emitted = true;
            state.added_since_emit = 0;
            let messages: Vec<Message> = state.messages.iter().cloned().collect();
            return Ok(Some(SenderWindow {
                sender: state.first.sender.clone(),
                window_start: messages[0].ts,
                window_end: messages[messages.len() - 1].ts,
                messages,
                first_message: state.first.clone(),
            }));
        }
        Ok(None)
    }

    pub fn ingest_all(&mut self, messages: impl IntoIterator<Item = Message>) -> Result<Vec<SenderWindow>> {
        let mut out = Vec::new();
        for m in messages {
            out.extend(self.ingest(m)?);
        }
        Ok(out)
    }
}

fn shard_of(sender: &str, n_shards: usize) -> usize {
    let mut h = DefaultHasher::new();
    sender.hash(&mut h);
    (h.finish() % n_shards as u64) as usize
}

/// Aggregators partitioned by sender hash. A sender's messages always land in
/// the same shard, so shards run independently.
#[derive(Debug, Clone)]
pub struct ShardedAggregator {
    shards: Vec<SenderAggregator>,
}

impl ShardedAggregator {
    pub fn new(config: WindowConfig, n_shards: usize) -> Result<ShardedAggregator> {
        let n = n_shards.max(1);
        Ok(ShardedAggregator {
            shards: (0..n).map(|_| SenderAggregator::new(config)).collect::<Result<_>>()?,
        })
    }

    pub fn ingest(&mut self, msg: Message) -> Result<Option<SenderWindow>> {
        let s = shard_of(&msg.sender, self.shards.len());
        self.shards[s].ingest(msg)
    }

    /// Ingests a batch with shards in parallel; windows come back in the order
    /// of the messages that triggered them.
    pub fn ingest_batch(&mut self, messages: Vec<Message>) -> Result<Vec<SenderWindow>> {
        let n = self.shards.len();
        let mut parts: Vec<Vec<(usize, Message)>> = vec![Vec::new(); n];
        for (i, m) in messages.into_iter().enumerate() {
            parts[shard_of(&m.sender, n)].push((i, m));
        }
        let results: Vec<Result<Vec<(usize, SenderWindow)>>> = self
            .shards
            .par_iter_mut()
            .zip(parts)
            .map(|(agg, part)| {
                let mut out = Vec::new();
                for (i, m) in part {
                    if let Some(w) = agg.ingest(m)? {
                        out.push((i, w));
                    }
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::new();
        for r in results {
            all.extend(r?);
        }
        all.sort_by_key(|(i, _)| *i);
        Ok(all.into_iter().map(|(_, w)| w).collect())
    }
}

/// Window emission computed per sender over a timestamp-sorted stream,
/// without the streaming state machine.
pub fn batch_windows(messages: &[Message], config: &WindowConfig) -> Result<Vec<SenderWindow>> {
    config.validate()?;
    for (i, w) in messages.windows(2).enumerate() {
        if w[1].ts < w[0].ts {
            return Err(Error::UnorderedStream { index: i + 1 });
        }
    }
    let mut by_sender: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in messages.iter().enumerate() {
        m.validate()?;
        by_sender.entry(m.sender.as_str()).or_default().push(i);
    }
    let mut out: Vec<(usize, SenderWindow)> = Vec::new();
    for idx in by_sender.values() {
        let mut last_emit: Option<usize> = None;
        for (pos, &i) in idx.iter().enumerate() {
            let newest = messages[i].ts;
            let lo = idx[..=pos].partition_point(|&j| messages[j].ts + config.span_secs < newest);
            let count = pos + 1 - lo;
            let due = last_emit.map_or(true, |e| pos - e >= config.emit_stride);
            if count >= config.min_messages && due {
                last_emit = Some(pos);
                let msgs: Vec<Message> = idx[lo..=pos].iter().map(|&j| messages[j].clone()).collect();
                out.push((
                    i,
                    SenderWindow {
                        sender: messages[i].sender.clone(),
                        window_start: msgs[0].ts,
                        window_end: newest,
                        messages: msgs,
                        first_message: messages[idx[0]].clone(),
                    },
                ));
            }
        }
    }
    out.sort_by_key(|(i, _)| *i);
    Ok(out.into_iter().map(|(_, w)| w).collect())
}

/// Mean Shannon entropy (bits) of the digit at each of the last seven
/// positions across unique recipients. Shorter numbers are left-padded with
/// `0`; non-digits are ignored.
pub fn recipient_entropy<S: AsRef<str>>(recipients: &[S]) -> f64 {
    let unique: BTreeSet<Vec<u8>> = recipients
        .iter()
        .map(|r| {
            let digits: Vec<u8> = r.as_ref().bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
            let tail = &digits[digits.len().saturating_sub(ENTROPY_DIGITS)..];
            let mut padded = vec![0u8; ENTROPY_DIGITS - tail.len()];
            padded.extend_from_slice(tail);
            padded
        })
        .collect();
    if unique.is_empty() {
        return 0.0;
    }
    let n = unique.len() as f64;
    let mut total = 0.0;
    for pos in 0..ENTROPY_DIGITS {
        let mut hist = [0usize; 10];
        for r in &unique {
            hist[r[pos] as usize] += 1;
        }
        total += hist
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum::<f64>();
    }
    (total / ENTROPY_DIGITS as f64).max(0.0)
}

/// Messages per second over the window, with a one-second floor on the span.
pub fn sending_frequency(window: &SenderWindow) -> f64 {
    let span = window.window_end.saturating_sub(window.window_start).max(1);
    window.messages.len() as f64 / span as f64
}

/// Stable integer ids for network names; 0 is reserved for unknown names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkEncoder {
    ids: BTreeMap<String, u32>,
}

pub const NETWORK_DICT_VERSION: u32 = 1;

impl NetworkEncoder {
    /// Ids assigned in lexicographic order of the lowercased names, from 1.
    pub fn fit<'a>(names: impl IntoIterator<Item = &'a str>) -> NetworkEncoder {
        let set: BTreeSet<String> = names.into_iter().map(|n| n.trim().to_lowercase()).filter(|n| !n.is_empty()).collect();
        NetworkEncoder {
            ids: set.into_iter().zip(1..).collect(),
        }
    }

    pub fn fit_messages<'a>(messages: impl IntoIterator<Item = &'a Message>) -> NetworkEncoder {
        let mut names = Vec::new();
        for m in messages {
            names.push(m.orig_net.as_str());
            names.push(m.dest_net.as_str());
        }
        NetworkEncoder::fit(names)
    }

    pub fn encode(&self, name: &str) -> u32 {
        self.ids.get(&name.trim().to_lowercase()).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# network-dictionary: {NETWORK_DICT_VERSION}\n");
        for (name, id) in &self.ids {
            let _ = writeln!(s, "{name}\t{id}");
        }
        s
    }

    pub fn parse(text: &str, source_name: &str) -> Result<NetworkEncoder> {
        let version = crate::data::header_value(text, "network-dictionary")
            .ok_or_else(|| Error::malformed(source_name, 1, "missing network-dictionary header"))?;
        let version: u32 = version
            .parse()
            .map_err(|_| Error::malformed(source_name, 1, format!("bad version {version:?}")))?;
        if version != NETWORK_DICT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version as u16,
                supported: NETWORK_DICT_VERSION as u16,
            });
        }
        let mut ids = BTreeMap::new();
        let mut used = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(source_name, i + 1, "expected name<TAB>id"))?;
            let id: u32 = id
                .trim()
                .parse()
                .map_err(|_| Error::malformed(source_name, i + 1, format!("bad id {id:?}")))?;
            if id == 0 || !used.insert(id) {
                return Err(Error::malformed(source_name, i + 1, format!("id {id} is reserved or repeated")));
            }
            if ids.insert(name.to_lowercase(), id).is_some() {
                return Err(Error::DuplicateKey {
                    source_name: source_name.into(),
                    line: i + 1,
                    key: name.into(),
                });
            }
        }
        Ok(NetworkEncoder { ids })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NetworkEncoder> {
        let text = crate::error::read_to_string(path)?;
        NetworkEncoder::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsNetworks(BTreeSet<String>);

impl UsNetworks {
    pub fn bundled() -> UsNetworks {
        UsNetworks::parse(crate::data::US_NETWORKS)
    }

    pub fn parse(text: &str) -> UsNetworks {
        UsNetworks(crate::data::lowercase_set(text))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(&name.trim().to_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpaVector {
    pub values: Vec<f64>,
    pub schema_version: &'static str,
}

/// Most frequent value; ties go to the lexicographically smallest.
fn modal<'a>(items: impl Iterator<Item = &'a str>) -> &'a str {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in items {
        *counts.entry(s).or_insert(0) += 1;
    }
    let mut best = ("", 0usize);
    for (k, c) in counts {
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0
}

/// Sender vector: nine behavioural slots followed by the first message's MELA vector.
pub fn mpa_features(
    window: &SenderWindow,
    encoder: &NetworkEncoder,
    us: &UsNetworks,
    lexicon: &Lexicon,
    first_mela: &MelaVector,
) -> Result<MpaVector> {
    if first_mela.schema_version != MESSAGE_SCHEMA || first_mela.values.len() != MESSAGE_DIM {
        return Err(Error::SchemaMismatch {
            expected: MESSAGE_SCHEMA.into(),
            found: format!("{} ({} values)", first_mela.schema_version, first_mela.values.len()),
        });
    }
    if window.messages.is_empty() {
        return Err(Error::InvalidArgument(format!("sender {:?}: empty window", window.sender)));
    }
    let msgs = &window.messages;
    let orig = modal(msgs.iter().map(|m| m.orig_net.as_str()));
    let dest = modal(msgs.iter().map(|m| m.dest_net.as_str()));
    let recipients: Vec<&str> = msgs.iter().map(|m| m.recipient.as_str()).collect();
    let b = |x: bool| if x { 1.0 } else { 0.0 };

    let mut v = vec![0.0; MPA_DIM];
    v[mslot::ORIG_NETWORK] = encoder.encode(orig) as f64;
    v[mslot::DEST_NETWORK] = encoder.encode(dest) as f64;
    v[mslot::SENDER_NETWORK_IS_NOT_US] = b(!us.contains(orig));
    v[mslot::DEST_NETWORK_IS_NOT_US] = b(!us.contains(dest));
    v[mslot::NUM_OF_UNIQUE_RECIPIENTS] = recipients.iter().collect::<HashSet<_>>().len() as f64;
    v[mslot::RECIPIENT_NUMBER_ENTROPY] = recipient_entropy(&recipients);
    v[mslot::NUM_OF_UNIQUE_DEST_NETWORKS] = msgs.iter().map(|m| m.dest_net.to_lowercase()).collect::<HashSet<_>>().len() as f64;
    v[mslot::SENDING_FREQUENCY] = sending_frequency(window);
    v[mslot::NUM_OF_UNIQUE_MESSAGES] = msgs
        .iter()
        .map(|m| normalize(&m.text, lexicon).normalized.to_lowercase())
        .collect::<HashSet<_>>()
        .len() as f64;
    v[mslot::MELA_0..].copy_from_slice(&first_mela.values);
    Ok(MpaVector {
        values: v,
        schema_version: MPA_SCHEMA,
    })
}

/// Everything needed to turn a window into a sender vector.
pub struct MpaFeaturizer<'a> {
    pub ctx: &'a MelaContext,
    pub scorer: &'a DomainScorer,
    pub encoder: &'a NetworkEncoder,
    pub us: &'a UsNetworks,
    pub normalize: bool,
}

impl MpaFeaturizer<'_> {
    pub fn first_message_mela(&self, window: &SenderWindow) -> Result<MelaVector> {
        let m = &window.first_message;
        let (ents, norm) = self.ctx.prepare(&m.text, self.normalize);
        mela::message_features(m, &norm, &ents, self.ctx, self.scorer)
    }

    pub fn features(&self, window: &SenderWindow) -> Result<MpaVector> {
        let first = self.first_message_mela(window)?;
        mpa_features(window, self.encoder, self.us, &self.ctx.lexicon, &first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(i: usize, ts: u64, sender: &str, recipient: &str) -> Message {
        Message {
            id: format!("m{i}"),
            ts,
            sender: sender.into(),
            recipient: recipient.into(),
            orig_net: "att".into(),
            dest_net: "verizon".into(),
            text: "same text".into(),
        }
    }

    fn day(n: usize) -> Vec<Message> {
        (0..n).map(|i| msg(i, 1_000_000 + i as u64 * 60, "s", &format!("{:07}", i))).collect()
    }

    #[test]
    fn threshold_emission() {
        let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
        assert!(agg.ingest_all(day(49)).unwrap().is_empty());
        let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
        let w = agg.ingest_all(day(50)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].len(), 50);
    }

    #[test]
    fn eight_days_never_reach_threshold() {
        let step = 8 * 24 * 3600 / 49;
        let msgs: Vec<Message> = (0..50).map(|i| msg(i, 1_000_000 + (i as u64) * step, "s", "1")).collect();
        let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
        assert!(agg.ingest_all(msgs.clone()).unwrap().is_empty());
        assert!(batch_windows(&msgs, &WindowConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn skew_resorts_and_regression_fails() {
        let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
        agg.ingest(msg(0, 1000, "s", "1")).unwrap();
        agg.ingest(msg(1, 970, "s", "1")).unwrap();
        let ts: Vec<u64> = agg.retained("s").iter().map(|m| m.ts).collect();
        assert_eq!(ts, vec![970, 1000]);
        assert!(matches!(
            agg.ingest(msg(2, 900, "s", "1")),
            Err(Error::TimestampRegression { ts: 900, newest: 1000, .. })
        ));
    }

    #[test]
    fn stride_limits_reemission() {
        let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
        let w = agg.ingest_all(day(149)).unwrap();
        assert_eq!(w.iter().map(|w| w.len()).collect::<Vec<_>>(), vec![50, 100]);
        assert_eq!(w, batch_windows(&day(149), &WindowConfig::default()).unwrap());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(recipient_entropy(&["5551234", "5551234"]), 0.0);
        let all: Vec<String> = (0..10).map(|d| d.to_string().repeat(7)).collect();
        assert!((recipient_entropy(&all) - 10f64.log2()).abs() < 1e-12);
        let four = ["5551234", "5551235", "5551236", "5551237"];
        assert!((recipient_entropy(&four) - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_examples() {
        let mut w = SenderWindow {
            sender: "s".into(),
            messages: day(50),
            window_start: 0,
            window_end: 100,
            first_message: msg(0, 1, "s", "1"),
        };
        assert_eq!(sending_frequency(&w), 0.5);
        w.window_end = 0;
        assert_eq!(sending_frequency(&w), 50.0);
        w.window_end = WEEK_SECS;
        assert!((sending_frequency(&w) - 8.267e-5).abs() < 1e-8);
    }

    #[test]
    fn encoder_round_trip_and_unknown() {
        let enc = NetworkEncoder::fit(["att", "Verizon", "att"]);
        assert_eq!(enc.encode("att"), 1);
        assert_eq!(enc.encode("VERIZON"), 2);
        assert_eq!(enc.encode("mars"), 0);
        assert_eq!(NetworkEncoder::parse(&enc.to_text(), "mem").unwrap(), enc);
        assert!(NetworkEncoder::parse("# network-dictionary: 9\n", "mem").is_err());
    }

    #[test]
    fn window_vector_slots() {
        let ctx = MelaContext::bundled();
        let mut msgs = day(50);
        for m in &mut msgs {
            m.recipient = "5550000".into();
        }
        let w = SenderAggregator::new(WindowConfig::default()).unwrap().ingest_all(msgs).unwrap().remove(0);
        let f = MpaFeaturizer {
            ctx: &ctx,
            scorer: &DomainScorer::Constant(0.5),
            encoder: &NetworkEncoder::default(),
            us: &UsNetworks::bundled(),
            normalize: true,
        };
        let v = f.features(&w).unwrap();
        assert_eq!(v.values.len(), MPA_DIM);
        assert_eq!(v.values[mslot::NUM_OF_UNIQUE_RECIPIENTS], 1.0);
        assert_eq!(v.values[mslot::NUM_OF_UNIQUE_MESSAGES], 1.0);
        assert_eq!(v.values[mslot::RECIPIENT_NUMBER_ENTROPY], 0.0);
        assert_eq!(v.values[mslot::ORIG_NETWORK], 0.0);
        assert_eq!(v.values[mslot::SENDER_NETWORK_IS_NOT_US], 0.0);
        assert_eq!(mpa_feature_names().len(), MPA_DIM);
    }
}
