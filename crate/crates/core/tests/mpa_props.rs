use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use shortspam::mela::{DomainScorer, MelaContext};
use shortspam::mpa::{
    batch_windows, mslot, recipient_entropy, sending_frequency, MpaFeaturizer, NetworkEncoder, SenderAggregator,
    SenderWindow, ShardedAggregator, UsNetworks, WindowConfig, MPA_DIM, WEEK_SECS,
};
use shortspam::Message;

const DAY: u64 = 86_400;

fn message(i: usize, ts: u64, sender: &str, recipient: String) -> Message {
    Message {
        id: format!("m{i:05}"),
        ts,
        sender: sender.to_string(),
        recipient,
        orig_net: "att".into(),
        dest_net: "verizon".into(),
        text: format!("hello {}", i % 3),
    }
}

// Ascending stream over a few senders; gaps up to `max_gap` seconds.
fn stream(max_gap: u64) -> impl Strategy<Value = Vec<Message>> {
    proptest::collection::vec((0usize..4, 0..max_gap, 0u32..10_000_000), 0..160).prop_map(|steps| {
        let mut ts = 1_500_000_000;
        steps
            .into_iter()
            .enumerate()
            .map(|(i, (s, gap, r))| {
                ts += gap;
                message(i, ts, &format!("s{s}"), format!("1555{r:07}"))
            })
            .collect()
    })
}

fn small_config() -> impl Strategy<Value = WindowConfig> {
    (1usize..8, 1usize..6, 1u64..4).prop_map(|(min, stride, days)| WindowConfig {
        min_messages: min,
        span_secs: days * DAY,
        skew_secs: 60,
        emit_stride: stride,
    })
}

// Sliding-window simulation written directly from the emission rule.
fn simulate(messages: &[Message], cfg: &WindowConfig) -> Vec<SenderWindow> {
    let mut held: BTreeMap<&str, (Vec<&Message>, Option<usize>, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    for m in messages {
        let (win, last, seen) = held.entry(m.sender.as_str()).or_insert((Vec::new(), None, 0));
        win.push(m);
        *seen += 1;
        win.retain(|x| x.ts + cfg.span_secs >= m.ts);
        let due = last.map_or(true, |l| *seen - l >= cfg.emit_stride);
        if win.len() >= cfg.min_messages && due {
            *last = Some(*seen);
            out.push((m.sender.clone(), win.iter().map(|x| (*x).clone()).collect::<Vec<_>>()));
        }
    }
    // The first message is tracked separately because it may have left the window.
    let firsts: BTreeMap<&str, &Message> =
        messages.iter().rev().map(|m| (m.sender.as_str(), m)).collect();
    out.into_iter()
        .map(|(sender, msgs)| SenderWindow {
            window_start: msgs[0].ts,
            window_end: msgs[msgs.len() - 1].ts,
            first_message: firsts[sender.as_str()].clone(),
            sender,
            messages: msgs,
        })
        .collect()
}

fn histogram_entropy(recipients: &[String]) -> f64 {
    let uniq: HashSet<String> = recipients
        .iter()
        .map(|r| {
            let d: Vec<char> = r.chars().filter(char::is_ascii_digit).collect();
            let tail: String = d[d.len().saturating_sub(7)..].iter().collect();
            format!("{tail:0>7}")
        })
        .collect();
    if uniq.is_empty() {
        return 0.0;
    }
    let n = uniq.len() as f64;
    (0..7)
        .map(|p| {
            let mut h = [0usize; 10];
            for u in &uniq {
                h[(u.as_bytes()[p] - b'0') as usize] += 1;
            }
            h.iter().filter(|&&c| c > 0).map(|&c| -(c as f64 / n) * (c as f64 / n).log2()).sum::<f64>()
        })
        .sum::<f64>()
        / 7.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn retained_messages_stay_inside_the_span(msgs in stream(2 * DAY), cfg in small_config()) {
        let mut agg = SenderAggregator::new(cfg).unwrap();
        for m in msgs {
            let sender = m.sender.clone();
            if let Some(w) = agg.ingest(m).unwrap() {
                prop_assert!(w.messages.iter().all(|x| x.ts + cfg.span_secs >= w.window_end));
                prop_assert!(w.len() >= cfg.min_messages);
            }
            let kept = agg.retained(&sender);
            let newest = kept.iter().map(|x| x.ts).max().unwrap();
            prop_assert!(kept.iter().all(|x| x.ts + cfg.span_secs >= newest));
        }
    }

    #[test]
    fn streaming_equals_batch(msgs in stream(DAY), cfg in small_config(), shards in 1usize..5) {
        let batch: Vec<String> = batch_windows(&msgs, &cfg).unwrap().iter().map(SenderWindow::to_json).collect();
        let mut agg = SenderAggregator::new(cfg).unwrap();
        let streamed: Vec<String> = agg.ingest_all(msgs.clone()).unwrap().iter().map(SenderWindow::to_json).collect();
        prop_assert_eq!(&batch, &streamed);
        let mut sharded = ShardedAggregator::new(cfg, shards).unwrap();
        let par: Vec<String> = sharded.ingest_batch(msgs.clone()).unwrap().iter().map(SenderWindow::to_json).collect();
        prop_assert_eq!(&batch, &par);
        let sim: Vec<String> = simulate(&msgs, &cfg).iter().map(SenderWindow::to_json).collect();
        prop_assert_eq!(&batch, &sim);
    }

    #[test]
    fn entropy_is_bounded_and_matches_histogram(rs in proptest::collection::vec("[0-9]{0,12}", 0..80)) {
        let h = recipient_entropy(&rs);
        prop_assert!((0.0..=10f64.log2() + 1e-12).contains(&h));
        prop_assert!((h - histogram_entropy(&rs)).abs() <= 1e-12);
    }
}

#[test]
fn regression_beyond_skew_is_rejected() {
    let mut agg = SenderAggregator::new(WindowConfig::default()).unwrap();
    agg.ingest(message(0, 10_000, "s", "1".into())).unwrap();
    agg.ingest(message(1, 9_950, "s", "2".into())).unwrap();
    assert!(agg.ingest(message(2, 9_000, "s", "3".into())).is_err());
}

#[test]
fn fifty_messages_over_eight_days_never_emit() {
    let msgs: Vec<Message> = (0..50)
        .map(|i| message(i, 1_000_000 + i as u64 * 8 * DAY / 49, "s", format!("{i:07}")))
        .collect();
    let cfg = WindowConfig::default();
    assert!(simulate(&msgs, &cfg).is_empty());
    assert!(batch_windows(&msgs, &cfg).unwrap().is_empty());
    let mut agg = SenderAggregator::new(cfg).unwrap();
    assert!(agg.ingest_all(msgs).unwrap().is_empty());
}

#[test]
fn week_long_window_frequency() {
    let msgs: Vec<Message> = (0..50)
        .map(|i| message(i, 1_000_000 + i as u64 * WEEK_SECS / 49, "s", format!("{i:07}")))
        .collect();
    let w = &batch_windows(&msgs, &WindowConfig::default()).unwrap()[0];
    assert_eq!(w.window_end - w.window_start, WEEK_SECS);
    assert!((sending_frequency(w) - 50.0 / WEEK_SECS as f64).abs() < 1e-12);
    assert!((sending_frequency(w) - 8.27e-5).abs() < 1e-7);
}

#[test]
fn four_consecutive_numbers() {
    let four: Vec<String> = ["5551234", "5551235", "5551236", "5551237"].iter().map(|s| s.to_string()).collect();
    assert!((recipient_entropy(&four) - 2.0 / 7.0).abs() < 1e-12);
    assert!((histogram_entropy(&four) - 2.0 / 7.0).abs() < 1e-12);
}

#[test]
fn random_recipients_on_unknown_networks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut seen = HashSet::new();
    let mut msgs = Vec::new();
    while msgs.len() < 50 {
        let r = format!("1{:010}", rng.gen_range(0..10_000_000_000u64));
        if seen.insert(r.clone()) {
            let mut m = message(msgs.len(), 1_000_000 + msgs.len() as u64, "s", r);
            m.orig_net = "mystery".into();
            m.dest_net = "elsewhere".into();
            msgs.push(m);
        }
    }
    let w = &batch_windows(&msgs, &WindowConfig::default()).unwrap()[0];
    let ctx = MelaContext::bundled();
    let encoder = NetworkEncoder::fit(["att", "verizon"]);
    let us = UsNetworks::bundled();
    let f = MpaFeaturizer {
        ctx: &ctx,
        scorer: &DomainScorer::Constant(0.5),
        encoder: &encoder,
        us: &us,
        normalize: true,
    };
    let v = f.features(w).unwrap().values;
    assert_eq!(v.len(), MPA_DIM);
    assert_eq!(v[mslot::NUM_OF_UNIQUE_RECIPIENTS], seen.len() as f64);
    assert_eq!(v[mslot::ORIG_NETWORK], 0.0);
    assert_eq!(v[mslot::SENDER_NETWORK_IS_NOT_US], 1.0);
    let recipients: Vec<String> = msgs.iter().map(|m| m.recipient.clone()).collect();
    assert!((v[mslot::RECIPIENT_NUMBER_ENTROPY] - histogram_entropy(&recipients)).abs() < 1e-12);
}
