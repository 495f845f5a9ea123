//! End-to-end message and sender pipelines: featurization, per-fold fitting,
//! scoring and model persistence.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{tokenize_basic, BaselineKind, VocabModel, DEFAULT_DF_MIN, DEFAULT_VOCAB_CAP};
use crate::entity::EntitySet;
use crate::error::{Error, Result};
use crate::eval::{config_fingerprint, kfold_cv, EvalReport};
use crate::mela::{self, domain_features, DomainScorer, MelaContext, DOMAIN_DIM, DOMAIN_SCHEMA, MESSAGE_DIM, MESSAGE_SCHEMA};
use crate::model::{self, decide, train, train_with_oob, CostMatrix, Dataset, Forest, ForestParams, SparseRow, SparseVec};
use crate::mpa::{
    batch_windows, mpa_features, NetworkEncoder, SenderWindow, UsNetworks, WindowConfig, MPA_DIM, MPA_SCHEMA,
};
use crate::textnorm::NormalizedText;
use crate::{Label, Message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Mela,
    Ngram,
    Sgram,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Mela, FeatureSet::Ngram, FeatureSet::Sgram];

    pub fn schema(self) -> &'static str {
        match self {
            FeatureSet::Mela => MESSAGE_SCHEMA,
            FeatureSet::Ngram => "ngram-message/1",
            FeatureSet::Sgram => "sgram-message/1",
        }
    }

    pub fn from_schema(schema: &str) -> Option<FeatureSet> {
        FeatureSet::ALL.into_iter().find(|f| f.schema() == schema)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Mela => "mela",
            FeatureSet::Ngram => "ngram",
            FeatureSet::Sgram => "sgram",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<FeatureSet> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mela" => Ok(FeatureSet::Mela),
            "ngram" => Ok(FeatureSet::Ngram),
            "sgram" => Ok(FeatureSet::Sgram),
            other => Err(Error::InvalidArgument(format!("unknown feature set {other:?}"))),
        }
    }
}

fn domain_forest_default() -> ForestParams {
    ForestParams::with_trees(100, 42)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub features: FeatureSet,
    pub normalize: bool,
    pub forest: ForestParams,
    /// Sub-classifier producing DOMAIN_MELASCORE.
    pub domain_forest: ForestParams,
    pub costs: CostMatrix,
    pub vocab_cap: usize,
    pub df_min: usize,
    pub ngram_max: usize,
    pub sgram_n: usize,
    pub sgram_window: usize,
    pub folds: usize,
    /// Fold assignment seed.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureSet::Mela,
            normalize: true,
            forest: ForestParams::default(),
            domain_forest: domain_forest_default(),
            costs: CostMatrix::default(),
            vocab_cap: DEFAULT_VOCAB_CAP,
            df_min: DEFAULT_DF_MIN,
            ngram_max: 2,
            sgram_n: 3,
            sgram_window: 4,
            folds: 10,
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn baseline_kind(&self) -> Option<BaselineKind> {
        match self.features {
            FeatureSet::Mela => None,
            FeatureSet::Ngram => Some(BaselineKind::Ngram { n_max: self.ngram_max }),
            FeatureSet::Sgram => Some(BaselineKind::Sgram {
                n: self.sgram_n,
                window: self.sgram_window,
            }),
        }
    }

    pub fn fingerprint(&self) -> String {
        config_fingerprint(self)
    }

    pub fn name(&self) -> String {
        format!("{} normalize={}", self.features, if self.normalize { "on" } else { "off" })
    }
}

/// Per-message work that does not depend on any fitted state.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ents: EntitySet,
    pub norm: NormalizedText,
}

impl Prepared {
    pub fn tokens(&self) -> Vec<String> {
        tokenize_basic(&self.norm.normalized)
    }
}

pub fn prepare_all(ctx: &MelaContext, messages: &[Message], normalize: bool) -> Vec<Prepared> {
    messages
        .par_iter()
        .map(|m| {
            let (ents, norm) = ctx.prepare(&m.text, normalize);
            Prepared { ents, norm }
        })
        .collect()
}

/// Domain sub-classifier plus out-of-bag scores for the domains it was trained on.
pub struct FittedDomains {
    pub scorer: DomainScorer,
    /// `(host, label)` -> out-of-bag score.
    pub oob: HashMap<(String, Label), f64>,
}

impl FittedDomains {
    fn score_for(&self, host: &str, label: Option<Label>, v: &mela::DomainVector) -> Result<f64> {
        if let Some(l) = label {
            if let Some(s) = self.oob.get(&(host.to_string(), l)) {
                return Ok(*s);
            }
        }
        self.scorer.score(v)
    }
}

/// Trains the domain forest on URL hosts of the given messages, one row per
/// distinct `(host, label)`. Falls back to a constant scorer when a class is absent.
pub fn fit_domain_scorer<'a>(
    ctx: &MelaContext,
    rows: impl Iterator<Item = (&'a EntitySet, Label)>,
    params: &ForestParams,
) -> Result<FittedDomains> {
    let mut uniq: BTreeMap<(String, Label), Vec<f64>> = BTreeMap::new();
    for (ents, label) in rows {
        for (parsed, v) in ctx.url_domains(ents) {
            uniq.entry((parsed.host, label)).or_insert(v.values);
        }
    }
    let mut data = Dataset::new(DOMAIN_DIM);
    for ((_, label), v) in &uniq {
        data.push_dense(v, *label)?;
    }
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        let c = if data.is_empty() { 0.5 } else { counts[1] as f64 / data.len() as f64 };
        return Ok(FittedDomains {
            scorer: DomainScorer::Constant(c),
            oob: HashMap::new(),
        });
    }
    let (forest, report) = train_with_oob(&data, params, DOMAIN_SCHEMA)?;
    let oob = uniq
        .keys()
        .zip(report.scores)
        .filter_map(|(k, s)| s.map(|s| (k.clone(), s)))
        .collect();
    Ok(FittedDomains {
        scorer: DomainScorer::Forest(forest),
        oob,
    })
}

/// Domain forest from `(domain or url, label)` pairs.
pub fn train_domain_forest(ctx: &MelaContext, rows: &[(String, Label)], params: &ForestParams) -> Result<Forest> {
    let mut data = Dataset::new(DOMAIN_DIM);
    for (d, label) in rows {
        let parsed = ctx.extractor.parse_domain(d)?;
        let v = domain_features(&parsed.host, &parsed.tld, ctx.tables(), &ctx.matcher);
        data.push_dense(&v.values, *label)?;
    }
    train(&data, params, DOMAIN_SCHEMA)
}

/// Message vector; `label` selects out-of-bag domain scores for training rows.
pub fn mela_row(ctx: &MelaContext, msg: &Message, p: &Prepared, domains: &FittedDomains, label: Option<Label>) -> Result<Vec<f64>> {
    let v = mela::message_features_with(msg, &p.norm, &p.ents, ctx, &mut |parsed, dv| {
        domains.score_for(&parsed.host, label, dv)
    })?;
    Ok(v.values)
}

/// A trained message classifier with everything its features depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageModel {
    pub config: PipelineConfig,
    pub forest: Forest,
    pub domains: DomainScorer,
    pub vocab: Option<VocabModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    config: PipelineConfig,
    fingerprint: String,
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn save_domain_scorer(scorer: &DomainScorer, path: &Path) -> Result<()> {
    match scorer {
        DomainScorer::Forest(f) => model::io::save(f, path),
        DomainScorer::Constant(c) => {
            std::fs::write(path, format!("# constant-domain-score: {c}\n")).map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_domain_scorer(path: &Path) -> Result<DomainScorer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(model::io::MAGIC) {
        let f = model::deserialize(&bytes)?;
        f.check_schema(DOMAIN_SCHEMA)?;
        return Ok(DomainScorer::Forest(f));
    }
    let text = String::from_utf8_lossy(&bytes);
    crate::data::header_value(&text, "constant-domain-score")
        .and_then(|v| v.parse::<f64>().ok())
        .map(DomainScorer::Constant)
        .ok_or_else(|| Error::CorruptModel(format!("{}: neither a forest nor a constant score", path.display())))
}

impl MessageModel {
    /// Fits every stateful component on `idx` only.
    pub fn fit(
        ctx: &MelaContext,
        config: &PipelineConfig,
        messages: &[Message],
        prepared: &[Prepared],
        labels: &[Label],
        idx: &[usize],
    ) -> Result<MessageModel> {
        let train_labels: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        match config.baseline_kind() {
            None => {
                let domains = fit_domain_scorer(ctx, idx.iter().map(|&i| (&prepared[i].ents, labels[i])), &config.domain_forest)?;
                let rows: Vec<Vec<f64>> = idx
                    .par_iter()
                    .map(|&i| mela_row(ctx, &messages[i], &prepared[i], &domains, Some(labels[i])))
                    .collect::<Result<_>>()?;
                let data = Dataset::from_dense(&rows, &train_labels)?;
                let forest = train(&data, &config.forest, MESSAGE_SCHEMA)?;
                Ok(MessageModel {
                    config: config.clone(),
                    forest,
                    domains: domains.scorer,
                    vocab: None,
                })
            }
            Some(kind) => {
                let docs: Vec<Vec<String>> = idx.iter().map(|&i| prepared[i].tokens()).collect();
                let vocab = VocabModel::fit(kind, &docs, config.vocab_cap, config.df_min);
                let rows: Vec<SparseVec> = docs.iter().map(|d| vocab.transform(d)).collect();
                let data = Dataset::from_sparse(&rows, vocab.len().max(1), &train_labels)?;
                let forest = train(&data, &config.forest, config.features.schema())?;
                Ok(MessageModel {
                    config: config.clone(),
                    forest,
                    domains: DomainScorer::Constant(0.5),
                    vocab: Some(vocab),
                })
            }
        }
    }

    pub fn train(ctx: &MelaContext, config: &PipelineConfig, messages: &[Message], labels: &[Label]) -> Result<MessageModel> {
        if messages.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: messages.len(),
                found: labels.len(),
            });
        }
        let prepared = prepare_all(ctx, messages, config.normalize);
        let idx: Vec<usize> = (0..messages.len()).collect();
        MessageModel::fit(ctx, config, messages, &prepared, labels, &idx)
    }

    pub fn score_prepared(&self, ctx: &MelaContext, msg: &Message, p: &Prepared) -> Result<f64> {
        match &self.vocab {
            None => {
                let domains = FittedDomains {
                    scorer: self.domains.clone(),
                    oob: HashMap::new(),
                };
                self.forest.predict(&mela_row(ctx, msg, p, &domains, None)?[..])
            }
            Some(vocab) => {
                let v = vocab.transform(&p.tokens());
                let row = SparseRow {
                    indices: &v.indices,
                    values: &v.values,
                    dim: vocab.len().max(1),
                };
                self.forest.predict(&row)
            }
        }
    }

    pub fn score_messages(&self, ctx: &MelaContext, messages: &[Message]) -> Result<Vec<f64>> {
        let prepared = prepare_all(ctx, messages, self.config.normalize);
        messages
            .par_iter()
            .zip(&prepared)
            .map(|(m, p)| self.score_prepared(ctx, m, p))
            .collect()
    }

    pub fn decide(&self, score: f64, costs: Option<&CostMatrix>) -> Label {
        decide(score, costs.unwrap_or(&self.config.costs))
    }

    /// Writes the forest to `path` plus `.domain`, `.vocab` and `.meta.json` sidecars.
    pub fn save(&self, path: &Path) -> Result<()> {
        model::io::save(&self.forest, path)?;
        save_domain_scorer(&self.domains, &sidecar(path, "domain"))?;
        if let Some(v) = &self.vocab {
            v.save(&sidecar(path, "vocab"))?;
        }
        let meta = ModelMeta {
            config: self.config.clone(),
            fingerprint: self.config.fingerprint(),
        };
        let meta_path = sidecar(path, "meta.json");
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| Error::io(&meta_path, e))
    }

    pub fn load(path: &Path) -> Result<MessageModel> {
        let forest = model::io::load(path)?;
        let features = FeatureSet::from_schema(&forest.schema_version).ok_or_else(|| Error::SchemaMismatch {
            expected: "a message model schema".into(),
            found: forest.schema_version.clone(),
        })?;
        let meta_path = sidecar(path, "meta.json");
        let meta: ModelMeta = serde_json::from_str(&crate::error::read_to_string(&meta_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
        if meta.config.features != features {
            return Err(Error::SchemaMismatch {
                expected: features.schema().into(),
                found: meta.config.features.schema().into(),
            });
        }
        let domains = load_domain_scorer(&sidecar(path, "domain"))?;
        let vocab = match features {
            FeatureSet::Mela => {
                if forest.n_features != MESSAGE_DIM {
                    return Err(Error::DimensionMismatch {
                        expected: MESSAGE_DIM,
                        found: forest.n_features,
                    });
                }
                None
            }
            _ => Some(VocabModel::load(&sidecar(path, "vocab"))?),
        };
        Ok(MessageModel {
            config: meta.config,
            forest,
            domains,
            vocab,
        })
    }
}

/// Stratified k-fold evaluation of one message pipeline configuration.
pub fn cross_validate_messages(
    ctx: &MelaContext,
    config: &PipelineConfig,
    messages: &[Message],
    labels: &[Label],
) -> Result<EvalReport> {
    let prepared = prepare_all(ctx, messages, config.normalize);
    cross_validate_prepared(ctx, config, messages, &prepared, labels)
}

pub fn cross_validate_prepared(
    ctx: &MelaContext,
    config: &PipelineConfig,
    messages: &[Message],
    prepared: &[Prepared],
    labels: &[Label],
) -> Result<EvalReport> {
    let run = |train: &[usize], test: &[usize]| -> Result<Vec<f64>> {
        let m = MessageModel::fit(ctx, config, messages, prepared, labels, train)?;
        test.iter().map(|&i| m.score_prepared(ctx, &messages[i], &prepared[i])).collect()
    };
    kfold_cv(
        &config.name(),
        labels,
        config.folds,
        config.seed,
        &config.costs,
        &config.fingerprint(),
        &run,
    )
}

// ---------------------------------------------------------------------------
// Senders

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SenderConfig {
    pub window: WindowConfig,
    pub forest: ForestParams,
    pub domain_forest: ForestParams,
    pub costs: CostMatrix,
    pub normalize: bool,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SenderConfig {
    fn default() -> Self {
        SenderConfig {
            window: WindowConfig::default(),
            forest: ForestParams::default(),
            domain_forest: domain_forest_default(),
            costs: CostMatrix::default(),
            normalize: true,
            folds: 10,
            seed: 42,
        }
    }
}

/// Sender label: spam if any of its messages is spam.
pub fn sender_labels(messages: &[Message], labels: &[Label]) -> HashMap<String, Label> {
    let mut out: HashMap<String, Label> = HashMap::new();
    for (m, &l) in messages.iter().zip(labels) {
        let e = out.entry(m.sender.clone()).or_insert(Label::Ham);
        if l.is_spam() {
            *e = Label::Spam;
        }
    }
    out
}

/// First emitted window of every sender that reaches the threshold, in emission order.
pub fn first_windows(messages: &[Message], window: &WindowConfig) -> Result<Vec<SenderWindow>> {
    let mut seen = std::collections::HashSet::new();
    Ok(batch_windows(messages, window)?
        .into_iter()
        .filter(|w| seen.insert(w.sender.clone()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenderModel {
    pub config: SenderConfig,
    pub forest: Forest,
    pub domains: DomainScorer,
    pub encoder: NetworkEncoder,
}

struct SenderPrepared {
    first: Prepared,
}

fn prepare_windows(ctx: &MelaContext, windows: &[SenderWindow], normalize: bool) -> Vec<SenderPrepared> {
    let firsts: Vec<Message> = windows.iter().map(|w| w.first_message.clone()).collect();
    prepare_all(ctx, &firsts, normalize)
        .into_iter()
        .map(|first| SenderPrepared { first })
        .collect()
}

fn sender_row(
    ctx: &MelaContext,
    w: &SenderWindow,
    p: &SenderPrepared,
    domains: &FittedDomains,
    encoder: &NetworkEncoder,
    us: &UsNetworks,
    label: Option<Label>,
) -> Result<Vec<f64>> {
    let first = mela::message_features_with(&w.first_message, &p.first.norm, &p.first.ents, ctx, &mut |parsed, dv| {
        domains.score_for(&parsed.host, label, dv)
    })?;
    Ok(mpa_features(w, encoder, us, &ctx.lexicon, &first)?.values)
}

impl SenderModel {
    fn fit_prepared(
        ctx: &MelaContext,
        config: &SenderConfig,
        windows: &[SenderWindow],
        prepared: &[SenderPrepared],
        labels: &[Label],
        idx: &[usize],
    ) -> Result<SenderModel> {
        let us = UsNetworks::bundled();
        let domains = fit_domain_scorer(ctx, idx.iter().map(|&i| (&prepared[i].first.ents, labels[i])), &config.domain_forest)?;
        let encoder = NetworkEncoder::fit_messages(idx.iter().flat_map(|&i| windows[i].messages.iter()));
        let rows: Vec<Vec<f64>> = idx
            .par_iter()
            .map(|&i| sender_row(ctx, &windows[i], &prepared[i], &domains, &encoder, &us, Some(labels[i])))
            .collect::<Result<_>>()?;
        let train_labels: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        let forest = train(&Dataset::from_dense(&rows, &train_labels)?, &config.forest, MPA_SCHEMA)?;
        Ok(SenderModel {
            config: config.clone(),
            forest,
            domains: domains.scorer,
            encoder,
        })
    }

    /// Trains on labeled windows.
    pub fn train(ctx: &MelaContext, config: &SenderConfig, windows: &[SenderWindow], labels: &[Label]) -> Result<SenderModel> {
        let prepared = prepare_windows(ctx, windows, config.normalize);
        let idx: Vec<usize> = (0..windows.len()).collect();
        SenderModel::fit_prepared(ctx, config, windows, &prepared, labels, &idx)
    }

    pub fn features(&self, ctx: &MelaContext, w: &SenderWindow) -> Result<Vec<f64>> {
        let p = prepare_windows(ctx, std::slice::from_ref(w), self.config.normalize).remove(0);
        let domains = FittedDomains {
            scorer: self.domains.clone(),
            oob: HashMap::new(),
        };
        sender_row(ctx, w, &p, &domains, &self.encoder, &UsNetworks::bundled(), None)
    }

    pub fn score(&self, ctx: &MelaContext, w: &SenderWindow) -> Result<f64> {
        self.forest.predict(&self.features(ctx, w)?[..])
    }

    pub fn score_all(&self, ctx: &MelaContext, windows: &[SenderWindow]) -> Result<Vec<f64>> {
        windows.par_iter().map(|w| self.score(ctx, w)).collect()
    }

    /// Forest at `path` plus `.domain`, `.networks` and `.meta.json` sidecars.
    pub fn save(&self, path: &Path) -> Result<()> {
        model::io::save(&self.forest, path)?;
        save_domain_scorer(&self.domains, &sidecar(path, "domain"))?;
        self.encoder.save(&sidecar(path, "networks"))?;
        let meta_path = sidecar(path, "meta.json");
        let meta = serde_json::json!({ "config": self.config, "fingerprint": config_fingerprint(&self.config) });
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| Error::io(&meta_path, e))
    }

    pub fn load(path: &Path) -> Result<SenderModel> {
        let forest = model::io::load(path)?;
        forest.check_schema(MPA_SCHEMA)?;
        if forest.n_features != MPA_DIM {
            return Err(Error::DimensionMismatch {
                expected: MPA_DIM,
                found: forest.n_features,
            });
        }
        let meta_path = sidecar(path, "meta.json");
        let meta: serde_json::Value = serde_json::from_str(&crate::error::read_to_string(&meta_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
        let config: SenderConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
        Ok(SenderModel {
            config,
            forest,
            domains: load_domain_scorer(&sidecar(path, "domain"))?,
            encoder: NetworkEncoder::load(&sidecar(path, "networks"))?,
        })
    }
}

/// Sender-level k-fold evaluation over one window per sender.
pub fn cross_validate_senders(
    ctx: &MelaContext,
    config: &SenderConfig,
    windows: &[SenderWindow],
    labels: &[Label],
) -> Result<EvalReport> {
    let prepared = prepare_windows(ctx, windows, config.normalize);
    let us = UsNetworks::bundled();
    let run = |train: &[usize], test: &[usize]| -> Result<Vec<f64>> {
        let m = SenderModel::fit_prepared(ctx, config, windows, &prepared, labels, train)?;
        let domains = FittedDomains {
            scorer: m.domains.clone(),
            oob: HashMap::new(),
        };
        test.iter()
            .map(|&i| {
                let row = sender_row(ctx, &windows[i], &prepared[i], &domains, &m.encoder, &us, None)?;
                m.forest.predict(&row[..])
            })
            .collect()
    };
    kfold_cv(
        "mpa senders",
        labels,
        config.folds,
        config.seed,
        &config.costs,
        &config_fingerprint(config),
        &run,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> (Vec<Message>, Vec<Label>) {
        let spam = [
            "WIN cash now!! call 09061701461 to claim your prize",
            "Free entry to win a $500 gift card visit bit.ly/x9Zq2 now",
            "URGENT your account won 1000 cash txt CLAIM to 80086",
            "Hot singles in your area click www.hotdates4u.tk tonight",
        ];
        let ham = [
            "are we still on for lunch tomorrow?",
            "ok see you at the station at 6",
            "can you pick up milk on the way home",
            "lol that was so funny, talk later",
        ];
        let mut msgs = Vec::new();
        let mut labels = Vec::new();
        for rep in 0..5 {
            for (j, t) in spam.iter().chain(ham.iter()).enumerate() {
                msgs.push(Message {
                    id: format!("{rep}-{j}"),
                    ts: 1 + msgs.len() as u64,
                    sender: format!("s{j}"),
                    recipient: "5551234".into(),
                    orig_net: "att".into(),
                    dest_net: "att".into(),
                    text: format!("{t} {rep}"),
                });
                labels.push(if j < spam.len() { Label::Spam } else { Label::Ham });
            }
        }
        (msgs, labels)
    }

    fn small(features: FeatureSet) -> PipelineConfig {
        PipelineConfig {
            features,
            forest: ForestParams::with_trees(15, 1),
            domain_forest: ForestParams::with_trees(5, 1),
            df_min: 1,
            folds: 5,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn every_feature_set_separates_toy_corpus() {
        let ctx = MelaContext::bundled();
        let (msgs, labels) = corpus();
        for fs in FeatureSet::ALL {
            let r = cross_validate_messages(&ctx, &small(fs), &msgs, &labels).unwrap();
            assert_eq!(r.confusion.total(), msgs.len() as u64);
            assert!(r.metrics.macro_f1 > 0.9, "{fs}: {}", r.metrics.macro_f1);
        }
    }

    #[test]
    fn model_files_round_trip() {
        let ctx = MelaContext::bundled();
        let (msgs, labels) = corpus();
        let dir = tempfile::tempdir().unwrap();
        for fs in FeatureSet::ALL {
            let m = MessageModel::train(&ctx, &small(fs), &msgs, &labels).unwrap();
            let path = dir.path().join(format!("{fs}.bin"));
            m.save(&path).unwrap();
            let back = MessageModel::load(&path).unwrap();
            assert_eq!(back.score_messages(&ctx, &msgs).unwrap(), m.score_messages(&ctx, &msgs).unwrap());
        }
    }

    #[test]
    fn single_class_training_names_missing_class() {
        let ctx = MelaContext::bundled();
        let (msgs, labels) = corpus();
        let ham: Vec<usize> = (0..msgs.len()).filter(|&i| labels[i] == Label::Ham).collect();
        let m: Vec<Message> = ham.iter().map(|&i| msgs[i].clone()).collect();
        let l = vec![Label::Ham; m.len()];
        let err = MessageModel::train(&ctx, &small(FeatureSet::Mela), &m, &l).unwrap_err();
        assert!(matches!(err, Error::SingleClass { missing: Label::Spam }));
    }
}
