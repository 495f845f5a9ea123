use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use shortspam::cluster::{self, ClusterSet};
use shortspam::eval::{config_fingerprint, temporal_replay, ReplayConfig, ReplayItem};
use shortspam::mela::{self, MelaContext};
use shortspam::message::{
    load_messages, load_sms_collection, parse_message_line, read_messages, sidecar_labels_path, write_labels, write_messages,
    LabelMap,
};
use shortspam::model::{decide, CostMatrix};
use shortspam::mpa::{self, batch_windows, MpaFeaturizer, NetworkEncoder, ShardedAggregator, UsNetworks};
use shortspam::pipeline::{
    cross_validate_messages, cross_validate_senders, first_windows, save_domain_scorer, sender_labels, train_domain_forest,
    FeatureSet, MessageModel, PipelineConfig, SenderConfig, SenderModel,
};
use shortspam::simgen::{gen_messages, gen_sender_streams};
use shortspam::{data, Label, Message};

use crate::config::{Config, GenCorpusConfig, GenKind};
use crate::{Cli, CliError, Command, Extract, Features, Level, ModelArgs, ReportFormat};

type Out = Box<dyn Write>;

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Core(shortspam::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn is_stdin(p: &Path) -> bool {
    p == Path::new("-")
}

fn read_corpus(path: &Path) -> Result<Vec<Message>, CliError> {
    if is_stdin(path) {
        Ok(read_messages(io::stdin().lock(), "<stdin>")?)
    } else {
        Ok(load_messages(path)?)
    }
}

/// Labels from `--labels` or the corpus sidecar.
fn read_labels(corpus: &Path, labels: Option<&Path>, messages: &[Message]) -> Result<Vec<Label>, CliError> {
    let path = match labels {
        Some(p) => p.to_path_buf(),
        None if is_stdin(corpus) => return Err(CliError::Usage("--labels is required when reading standard input".into())),
        None => sidecar_labels_path(corpus),
    };
    Ok(LabelMap::load(&path)?.resolve(messages)?)
}

fn open_output(path: Option<&Path>) -> Result<Out, CliError> {
    match path {
        Some(p) if !is_stdin(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?))),
        _ => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn parse_costs(arg: Option<&str>, default: CostMatrix) -> Result<CostMatrix, CliError> {
    match arg {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: shortspam::Error| CliError::Usage(format!("--costs: {e}"))),
    }
}

/// `3600`, `90s`, `30m`, `24h`, `7d`, `1w`.
pub fn parse_duration(s: &str) -> Result<u64, CliError> {
    let s = s.trim();
    let bad = || CliError::Usage(format!("bad duration {s:?}"));
    let (num, unit) = match s.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => s.split_at(i),
        None => (s, "s"),
    };
    let n: u64 = num.parse().map_err(|_| bad())?;
    let mult = match unit {
        "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        "w" => 604_800,
        _ => return Err(bad()),
    };
    match n.checked_mul(mult) {
        Some(0) | None => Err(bad()),
        Some(v) => Ok(v),
    }
}

fn model_path(arg: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    arg.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} model: pass --model or set it in the config")))
}

fn message_config(cfg: &Config, m: &ModelArgs) -> PipelineConfig {
    let mut c = cfg.message.clone();
    if let Some(f) = m.features {
        c.features = match f {
            Features::Mela => FeatureSet::Mela,
            Features::Ngram => FeatureSet::Ngram,
            Features::Sgram => FeatureSet::Sgram,
        };
    }
    if let Some(n) = m.normalize {
        c.normalize = n.on();
    }
    if let Some(t) = m.trees {
        c.forest.n_trees = t;
    }
    c
}

#[derive(Serialize)]
struct Verdict<'a> {
    id: &'a str,
    label: Label,
    score: f64,
}

#[derive(Serialize)]
struct WindowVerdict<'a> {
    sender: &'a str,
    window_start: u64,
    window_end: u64,
    messages: usize,
    label: Label,
    score: f64,
}

fn json_line(out: &mut Out, value: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    cfg.apply_seed(cli.seed);
    let fingerprint_only = cli.print_config_fingerprint;
    // Prints the fingerprint and reports whether the command should stop there.
    let fp = |f: String| {
        if fingerprint_only {
            println!("{f}");
        }
        fingerprint_only
    };
    let stdout_err = |e: io::Error| io_err(Path::new("<output>"), e);

    match cli.command {
        Command::MineClusters {
            corpus,
            labels,
            top_k,
            min_len,
            k,
            alpha,
            output,
        } => {
            if fp(config_fingerprint(&(top_k, min_len, k, alpha))) {
                return Ok(());
            }
            let messages = read_corpus(&corpus)?;
            let label_path = labels.clone().or_else(|| (!is_stdin(&corpus)).then(|| sidecar_labels_path(&corpus)));
            let texts: Vec<String> = match label_path {
                Some(p) if labels.is_some() || p.exists() => {
                    let l = LabelMap::load(&p)?.resolve(&messages)?;
                    messages.iter().zip(&l).filter(|(_, l)| l.is_spam()).map(|(m, _)| m.text.clone()).collect()
                }
                _ => messages.iter().map(|m| m.text.clone()).collect(),
            };
            let stop: HashSet<String> = data::lowercase_set(data::STOPWORDS).into_iter().collect();
            let mined = cluster::mine_substrings(&texts, &stop, top_k, min_len)?;
            let subs: Vec<String> = mined.into_iter().map(|(s, _)| s).collect();
            let cooc = cluster::cooccurrence(&texts, &subs);
            let proposals = cluster::cluster_candidates(&subs, &cooc, k, alpha)?;
            let mut out = open_output(output.as_deref())?;
            out.write_all(cluster::proposals_to_text(&proposals).as_bytes()).map_err(stdout_err)?;
            out.flush().map_err(stdout_err)?;
        }

        Command::ValidateClusters {
            clusters,
            pruning,
            k,
            output,
        } => {
            if fp(config_fingerprint(&k)) {
                return Ok(());
            }
            let mut set = ClusterSet::load(&clusters)?;
            if let Some(p) = &pruning {
                let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                set = set.apply_pruning(&text, &p.display().to_string())?;
            }
            set.validate(Some(k))?;
            cluster::build_matcher(&set)?;
            if let Some(o) = &output {
                write_file(o, &set.to_text())?;
            }
            let n: usize = set.clusters.iter().map(|c| c.substrings.len()).sum();
            println!("ok: {} clusters, {n} substrings", set.clusters.len());
        }

        Command::TrainDomain { domains, output, trees } => {
            let mut params = cfg.message.domain_forest;
            if let Some(t) = trees {
                params.n_trees = t;
            }
            if fp(config_fingerprint(&params)) {
                return Ok(());
            }
            let rows = read_domain_rows(&domains)?;
            let ctx = cfg.context()?;
            let forest = train_domain_forest(&ctx, &rows, &params)?;
            eprintln!("trained on {} domains, out-of-bag accuracy {:.4}", rows.len(), forest.oob_accuracy);
            save_domain_scorer(&mela::DomainScorer::Forest(forest), &output)?;
        }

        Command::TrainMessage {
            corpus,
            labels,
            model,
            output,
        } => {
            let mc = message_config(&cfg, &model);
            if fp(mc.fingerprint()) {
                return Ok(());
            }
            let messages = read_corpus(&corpus)?;
            let labels = read_labels(&corpus, labels.as_deref(), &messages)?;
            let ctx = cfg.context()?;
            let m = MessageModel::train(&ctx, &mc, &messages, &labels)?;
            m.save(&output)?;
            eprintln!("{} model on {} messages, fingerprint {}", mc.name(), messages.len(), mc.fingerprint());
        }

        Command::TrainSender {
            stream,
            labels,
            trees,
            output,
        } => {
            let mut sc = cfg.sender.clone();
            if let Some(t) = trees {
                sc.forest.n_trees = t;
            }
            if fp(config_fingerprint(&sc)) {
                return Ok(());
            }
            let messages = read_corpus(&stream)?;
            let labels = read_labels(&stream, labels.as_deref(), &messages)?;
            let (windows, wl) = sender_training_set(&messages, &labels, &sc)?;
            let ctx = cfg.context()?;
            SenderModel::train(&ctx, &sc, &windows, &wl)?.save(&output)?;
            eprintln!("sender model on {} senders", windows.len());
        }

        Command::Classify {
            corpus,
            model,
            costs,
            output,
        } => {
            let path = model_path(model, &cfg.message_model, "message")?;
            let m = MessageModel::load(&path)?;
            let costs = parse_costs(costs.as_deref(), m.config.costs)?;
            if fp(m.config.fingerprint()) {
                return Ok(());
            }
            let messages = read_corpus(&corpus)?;
            let ctx = cfg.context()?;
            let scores = m.score_messages(&ctx, &messages)?;
            let mut out = open_output(output.as_deref())?;
            for (msg, &score) in messages.iter().zip(&scores) {
                let v = Verdict {
                    id: &msg.id,
                    label: decide(score, &costs),
                    score,
                };
                json_line(&mut out, &v).map_err(stdout_err)?;
            }
            out.flush().map_err(stdout_err)?;
        }

        Command::ScoreSenders {
            stream,
            model,
            costs,
            shards,
        } => {
            let path = model_path(model, &cfg.sender_model, "sender")?;
            let m = SenderModel::load(&path)?;
            let costs = parse_costs(costs.as_deref(), m.config.costs)?;
            if fp(config_fingerprint(&m.config)) {
                return Ok(());
            }
            if shards == 0 {
                return Err(CliError::Usage("--shards must be >= 1".into()));
            }
            let ctx = cfg.context()?;
            let (reader, source): (Box<dyn BufRead>, String) = match &stream {
                Some(p) if !is_stdin(p) => (
                    Box::new(BufReader::new(File::open(p).map_err(|e| io_err(p, e))?)),
                    p.display().to_string(),
                ),
                _ => (Box::new(io::stdin().lock()), "<stdin>".into()),
            };
            score_senders(&ctx, &m, costs, shards, reader, &source)?;
        }

        Command::Evaluate {
            corpus,
            labels,
            model,
            k,
            costs,
            senders,
            format,
            output,
        } => {
            let messages = read_corpus_unless(fingerprint_only, &corpus)?;
            let report = if senders {
                let mut sc = cfg.sender.clone();
                if let Some(t) = model.trees {
                    sc.forest.n_trees = t;
                }
                if let Some(n) = model.normalize {
                    sc.normalize = n.on();
                }
                if let Some(k) = k {
                    sc.folds = k;
                }
                sc.costs = parse_costs(costs.as_deref(), sc.costs)?;
                if model.features.is_some_and(|f| f != Features::Mela) {
                    return Err(CliError::Usage("sender evaluation always uses MELA features".into()));
                }
                if fp(config_fingerprint(&sc)) {
                    return Ok(());
                }
                let labels = read_labels(&corpus, labels.as_deref(), &messages)?;
                let (windows, wl) = sender_training_set(&messages, &labels, &sc)?;
                cross_validate_senders(&cfg.context()?, &sc, &windows, &wl)?
            } else {
                let mut mc = message_config(&cfg, &model);
                if let Some(k) = k {
                    mc.folds = k;
                }
                mc.costs = parse_costs(costs.as_deref(), mc.costs)?;
                if fp(mc.fingerprint()) {
                    return Ok(());
                }
                let labels = read_labels(&corpus, labels.as_deref(), &messages)?;
                cross_validate_messages(&cfg.context()?, &mc, &messages, &labels)?
            };
            let mut out = open_output(output.as_deref())?;
            let text = match format {
                ReportFormat::Text => report.to_text(),
                ReportFormat::Records => report.to_records(),
            };
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
            out.flush().map_err(stdout_err)?;
        }

        Command::Replay {
            corpus,
            labels,
            model,
            level,
            bucket,
            n_buckets,
            origin,
            drift_delta,
            costs,
            output,
        } => {
            let rc = ReplayConfig {
                bucket_secs: parse_duration(&bucket)?,
                origin,
                n_buckets,
                drift_delta,
                ..ReplayConfig::default()
            };
            let ctx = if fingerprint_only { None } else { Some(cfg.context()?) };
            let (items, costs) = match level {
                Level::Message => {
                    let m = MessageModel::load(&model_path(model, &cfg.message_model, "message")?)?;
                    if fp(config_fingerprint(&(m.config.fingerprint(), rc))) {
                        return Ok(());
                    }
                    let costs = parse_costs(costs.as_deref(), m.config.costs)?;
                    let messages = read_corpus(&corpus)?;
                    let labels = read_labels(&corpus, labels.as_deref(), &messages)?;
                    let scores = m.score_messages(ctx.as_ref().unwrap(), &messages)?;
                    let mut items: Vec<ReplayItem> = messages
                        .iter()
                        .zip(labels)
                        .zip(scores)
                        .map(|((msg, label), score)| ReplayItem { ts: msg.ts, label, score })
                        .collect();
                    items.sort_by_key(|i| i.ts);
                    (items, costs)
                }
                Level::Sender => {
                    let m = SenderModel::load(&model_path(model, &cfg.sender_model, "sender")?)?;
                    if fp(config_fingerprint(&(config_fingerprint(&m.config), rc))) {
                        return Ok(());
                    }
                    let costs = parse_costs(costs.as_deref(), m.config.costs)?;
                    let mut messages = read_corpus(&corpus)?;
                    let labels = read_labels(&corpus, labels.as_deref(), &messages)?;
                    let by_sender = sender_labels(&messages, &labels);
                    messages.sort_by_key(|m| m.ts);
                    let mut windows = batch_windows(&messages, &m.config.window)?;
                    windows.sort_by_key(|w| w.window_end);
                    let scores = m.score_all(ctx.as_ref().unwrap(), &windows)?;
                    let items = windows
                        .iter()
                        .zip(scores)
                        .map(|(w, score)| ReplayItem {
                            ts: w.window_end,
                            label: by_sender[&w.sender],
                            score,
                        })
                        .collect();
                    (items, costs)
                }
            };
            let series = temporal_replay(&items, &costs, &rc)?;
            let mut out = open_output(output.as_deref())?;
            out.write_all(series.to_csv().as_bytes()).map_err(stdout_err)?;
            out.flush().map_err(stdout_err)?;
            eprintln!(
                "{} buckets, flagged {:?}, largest dip {:.4}",
                series.buckets.len(),
                series.flagged(),
                series.max_dip()
            );
        }

        Command::GenCorpus { genconfig, output } => {
            let mut g = match &genconfig {
                Some(p) => GenCorpusConfig::load(p)?,
                None => GenCorpusConfig::default(),
            };
            if let Some(s) = cli.seed {
                g.seed = s;
            }
            if fp(config_fingerprint(&g)) {
                return Ok(());
            }
            let (messages, labels) = match g.kind {
                GenKind::Messages => {
                    let out = gen_messages(&g.messages_config()?)?;
                    (out.messages, out.labels)
                }
                GenKind::Senders => {
                    let out = gen_sender_streams(&g.stream_config()?)?;
                    (out.messages, out.labels)
                }
            };
            write_corpus(&output, &messages, &labels)?;
            eprintln!(
                "{} messages ({} spam) -> {}",
                messages.len(),
                labels.iter().filter(|l| l.is_spam()).count(),
                output.display()
            );
        }

        Command::Extract {
            corpus,
            what,
            normalize,
            output,
        } => {
            let normalize = normalize.map_or(cfg.message.normalize, |n| n.on());
            if fp(config_fingerprint(&(format!("{what:?}"), normalize, &cfg.sender.window))) {
                return Ok(());
            }
            let messages = read_corpus(&corpus)?;
            let ctx = cfg.context()?;
            let out = open_output(output.as_deref())?;
            extract(&ctx, &cfg, what, normalize, &messages, out)?;
        }

        Command::ImportCollection { tsv, output } => {
            if fp(config_fingerprint(&"import-collection")) {
                return Ok(());
            }
            let rows = load_sms_collection(&tsv)?;
            let (messages, labels): (Vec<Message>, Vec<Label>) = rows.into_iter().unzip();
            write_corpus(&output, &messages, &labels)?;
            eprintln!("{} messages -> {}", messages.len(), output.display());
        }

        Command::Schema => {
            if fp(config_fingerprint(&"schema")) {
                return Ok(());
            }
            let mut s = mela::schema_text();
            s.push_str(&format!("# sender features ({})\n", mpa::MPA_SCHEMA));
            for (i, n) in mpa::mpa_feature_names().iter().enumerate() {
                s.push_str(&format!("{i}\t{n}\n"));
            }
            print!("{s}");
        }
    }
    Ok(())
}

fn read_corpus_unless(skip: bool, corpus: &Path) -> Result<Vec<Message>, CliError> {
    if skip {
        Ok(Vec::new())
    } else {
        read_corpus(corpus)
    }
}

fn write_corpus(output: &Path, messages: &[Message], labels: &[Label]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(output).map_err(|e| io_err(output, e))?);
    write_messages(&mut w, messages).map_err(|e| io_err(output, e))?;
    w.flush().map_err(|e| io_err(output, e))?;
    let lp = sidecar_labels_path(output);
    let mut w = BufWriter::new(File::create(&lp).map_err(|e| io_err(&lp, e))?);
    write_labels(&mut w, messages, labels).map_err(|e| io_err(&lp, e))?;
    w.flush().map_err(|e| io_err(&lp, e))
}

/// `domain,label` rows; a first row whose label does not parse is a header.
fn read_domain_rows(path: &Path) -> Result<Vec<(String, Label)>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let source = path.display().to_string();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let malformed = |reason: String| shortspam::Error::Malformed {
            source_name: source.clone(),
            line: i + 1,
            reason,
        };
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        if rec.len() != 2 {
            return Err(malformed(format!("expected domain,label, got {} fields", rec.len())).into());
        }
        match rec[1].parse::<Label>() {
            Ok(l) => rows.push((rec[0].to_string(), l)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(malformed(e).into()),
        }
    }
    Ok(rows)
}

/// First window per sender, labeled spam if the sender sent any spam.
fn sender_training_set(
    messages: &[Message],
    labels: &[Label],
    sc: &SenderConfig,
) -> Result<(Vec<mpa::SenderWindow>, Vec<Label>), CliError> {
    let by_sender = sender_labels(messages, labels);
    let mut ordered = messages.to_vec();
    ordered.sort_by_key(|m| m.ts);
    let windows = first_windows(&ordered, &sc.window)?;
    let wl = windows.iter().map(|w| by_sender[&w.sender]).collect();
    Ok((windows, wl))
}

fn score_senders(
    ctx: &MelaContext,
    m: &SenderModel,
    costs: CostMatrix,
    shards: usize,
    reader: Box<dyn BufRead>,
    source: &str,
) -> Result<(), CliError> {
    let mut agg = ShardedAggregator::new(m.config.window, shards)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let err = |e: io::Error| io_err(Path::new("<stdout>"), e);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(Path::new(source), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let msg = parse_message_line(&line, source, i + 1)?;
        if let Some(w) = agg.ingest(msg)? {
            let score = m.score(ctx, &w)?;
            let v = WindowVerdict {
                sender: &w.sender,
                window_start: w.window_start,
                window_end: w.window_end,
                messages: w.len(),
                label: decide(score, &costs),
                score,
            };
            serde_json::to_writer(&mut out, &v).map_err(|e| err(e.into()))?;
            out.write_all(b"\n").map_err(err)?;
            // Verdicts leave as soon as a window closes.
            out.flush().map_err(err)?;
        }
    }
    Ok(())
}

fn fmt_row(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|v| v.to_string())
}

fn extract(ctx: &MelaContext, cfg: &Config, what: Extract, normalize: bool, messages: &[Message], out: Out) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| io_err(Path::new("<output>"), e.into());
    let scorer = cfg.domain_scorer()?;
    match what {
        Extract::Mela => {
            w.write_record(std::iter::once("id".to_string()).chain(mela::message_feature_names()))
                .map_err(csv_err)?;
            for m in messages {
                let (ents, norm) = ctx.prepare(&m.text, normalize);
                let v = mela::message_features(m, &norm, &ents, ctx, &scorer)?;
                w.write_record(std::iter::once(m.id.clone()).chain(fmt_row(&v.values)))
                    .map_err(csv_err)?;
            }
        }
        Extract::Domain => {
            w.write_record(["id".to_string(), "domain".to_string()].into_iter().chain(mela::domain_feature_names()))
                .map_err(csv_err)?;
            for m in messages {
                let (ents, _) = ctx.prepare(&m.text, false);
                for (parsed, v) in ctx.url_domains(&ents) {
                    w.write_record([m.id.clone(), parsed.host.clone()].into_iter().chain(fmt_row(&v.values)))
                        .map_err(csv_err)?;
                }
            }
        }
        Extract::Mpa => {
            let mut ordered = messages.to_vec();
            ordered.sort_by_key(|m| m.ts);
            let windows = batch_windows(&ordered, &cfg.sender.window)?;
            let encoder = NetworkEncoder::fit_messages(&ordered);
            let us = UsNetworks::bundled();
            let f = MpaFeaturizer {
                ctx,
                scorer: &scorer,
                encoder: &encoder,
                us: &us,
                normalize,
            };
            w.write_record(
                ["sender".to_string(), "window_end".to_string()]
                    .into_iter()
                    .chain(mpa::mpa_feature_names()),
            )
            .map_err(csv_err)?;
            for win in &windows {
                let v = f.features(win)?;
                w.write_record([win.sender.clone(), win.window_end.to_string()].into_iter().chain(fmt_row(&v.values)))
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| io_err(Path::new("<output>"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration("1w").unwrap(), 604_800);
        assert_eq!(parse_duration("3600").unwrap(), 3600);
        assert_eq!(parse_duration("2d").unwrap(), 172_800);
        assert!(parse_duration("0").is_err());
        assert!(parse_duration("1y").is_err());
        assert!(parse_duration("").is_err());
    }

}
