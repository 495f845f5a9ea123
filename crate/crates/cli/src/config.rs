//! Operator config file and the lookup tables it points at.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shortspam::cluster::ClusterSet;
use shortspam::entity::EntityExtractor;
use shortspam::mela::{DomainScorer, Keywords, MelaContext};
use shortspam::pipeline::{load_domain_scorer, PipelineConfig, SenderConfig};
use shortspam::simgen::{self, GenConfig, Injection, StreamConfig};
use shortspam::textnorm::Lexicon;
use shortspam::tld::{TldTables, WordList};

use crate::CliError;

/// Files a keyword directory must hold.
pub const KEYWORD_FILES: [&str; 7] = [
    "greetings.txt",
    "optout.txt",
    "forward.txt",
    "free_phone_prefixes.txt",
    "free_mail.txt",
    "timex.txt",
    "currency.txt",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Overrides fold and forest seeds everywhere.
    pub seed: Option<u64>,
    pub lexicon: Option<PathBuf>,
    /// Directory with bad.txt, suspicious.txt, normal.txt and shorteners.txt.
    pub tld_dir: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub keywords_dir: Option<PathBuf>,
    /// Domain scorer used by `extract`.
    pub domain_model: Option<PathBuf>,
    /// Defaults for `--model`.
    pub message_model: Option<PathBuf>,
    pub sender_model: Option<PathBuf>,
    #[serde(default)]
    pub message: PipelineConfig,
    #[serde(default)]
    pub sender: SenderConfig,
}

fn must_exist(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("config: {what} {} does not exist", path.display())))
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> Result<(), CliError> {
        for (p, what) in [
            (&self.lexicon, "lexicon"),
            (&self.tld_dir, "tld_dir"),
            (&self.clusters, "clusters"),
            (&self.keywords_dir, "keywords_dir"),
            (&self.domain_model, "domain_model"),
            (&self.message_model, "message_model"),
            (&self.sender_model, "sender_model"),
        ] {
            if let Some(p) = p {
                must_exist(p, what)?;
            }
        }
        if let Some(dir) = &self.keywords_dir {
            for f in KEYWORD_FILES {
                must_exist(&dir.join(f), "keyword list")?;
            }
        }
        Ok(())
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        let Some(seed) = seed.or(self.seed) else {
            return;
        };
        self.seed = Some(seed);
        let m = &mut self.message;
        m.seed = seed;
        m.forest.rng_seed = seed;
        m.domain_forest.rng_seed = seed;
        let s = &mut self.sender;
        s.seed = seed;
        s.forest.rng_seed = seed;
        s.domain_forest.rng_seed = seed;
    }

    pub fn context(&self) -> Result<MelaContext, CliError> {
        let tables = match &self.tld_dir {
            Some(dir) => TldTables::load_dir(dir)?,
            None => TldTables::bundled(),
        };
        let (extractor, keywords) = match &self.keywords_dir {
            Some(dir) => {
                let read = |f: &str| -> Result<String, CliError> {
                    let p = dir.join(f);
                    std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
                };
                let extractor =
                    EntityExtractor::with_lists(tables, WordList::bundled_common(), &read("timex.txt")?, &read("currency.txt")?);
                let keywords = Keywords::parse(
                    &read("greetings.txt")?,
                    &read("optout.txt")?,
                    &read("forward.txt")?,
                    &read("free_phone_prefixes.txt")?,
                    &read("free_mail.txt")?,
                );
                (extractor, keywords)
            }
            None => (EntityExtractor::new(tables), Keywords::bundled()),
        };
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::bundled(),
        };
        let clusters = match &self.clusters {
            Some(p) => ClusterSet::load(p)?,
            None => ClusterSet::bundled(),
        };
        Ok(MelaContext::new(extractor, lexicon, &clusters, keywords)?)
    }

    /// Configured domain scorer, or a neutral constant when none is set.
    pub fn domain_scorer(&self) -> Result<DomainScorer, CliError> {
        match &self.domain_model {
            Some(p) => Ok(load_domain_scorer(p)?),
            None => Ok(DomainScorer::Constant(0.5)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    #[default]
    Messages,
    Senders,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig {
    /// Name of a bundled drift campaign; the first one when omitted.
    pub campaign: Option<String>,
    pub start_day: u64,
    #[serde(default = "week")]
    pub days: u64,
    pub n_senders: usize,
    pub list_size: Option<usize>,
}

fn week() -> u64 {
    7
}

/// `gen-corpus` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenCorpusConfig {
    pub kind: GenKind,
    pub seed: u64,
    pub n_spam: usize,
    pub n_ham: usize,
    pub days: u64,
    pub n_legit_senders: usize,
    pub n_spam_senders: usize,
    /// Campaign table (`name cta weight obfuscation strategy targeting template`).
    pub campaigns: Option<PathBuf>,
    /// Ham template table (`weight template`).
    pub ham_templates: Option<PathBuf>,
    pub spam_lexvar_rate: Option<f64>,
    pub ham_lexvar_rate: Option<f64>,
    pub start_ts: Option<u64>,
    pub injections: Vec<InjectionConfig>,
}

impl Default for GenCorpusConfig {
    fn default() -> Self {
        GenCorpusConfig {
            kind: GenKind::Messages,
            seed: 42,
            n_spam: 6000,
            n_ham: 14000,
            days: 28,
            n_legit_senders: 250,
            n_spam_senders: 250,
            campaigns: None,
            ham_templates: None,
            spam_lexvar_rate: None,
            ham_lexvar_rate: None,
            start_ts: None,
            injections: Vec::new(),
        }
    }
}

impl GenCorpusConfig {
    pub fn load(path: &Path) -> Result<GenCorpusConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("gen config {}: {e}", path.display())))?;
        let cfg: GenCorpusConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("gen config {}: {e}", path.display())))?;
        // Relative table paths resolve against the config file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Option<PathBuf>| -> Result<Option<PathBuf>, CliError> {
            match p {
                None => Ok(None),
                Some(p) => {
                    let full = base.join(p);
                    must_exist(&full, "table")?;
                    Ok(Some(full))
                }
            }
        };
        Ok(GenCorpusConfig {
            campaigns: resolve(&cfg.campaigns)?,
            ham_templates: resolve(&cfg.ham_templates)?,
            ..cfg
        })
    }

    fn tables(&self) -> Result<GenConfig, CliError> {
        let mut g = GenConfig::bundled(self.seed, self.n_spam, self.n_ham);
        if let Some(p) = &self.campaigns {
            g.campaigns = simgen::parse_campaigns(&read(p)?, &p.display().to_string())?;
        }
        if let Some(p) = &self.ham_templates {
            g.ham_templates = simgen::parse_ham_templates(&read(p)?, &p.display().to_string())?;
        }
        if let Some(r) = self.spam_lexvar_rate {
            g.spam_lexvar_rate = r;
        }
        if let Some(r) = self.ham_lexvar_rate {
            g.ham_lexvar_rate = r;
        }
        if let Some(ts) = self.start_ts {
            g.start_ts = ts;
        }
        Ok(g)
    }

    pub fn messages_config(&self) -> Result<GenConfig, CliError> {
        self.tables()
    }

    pub fn stream_config(&self) -> Result<StreamConfig, CliError> {
        let g = self.tables()?;
        let mut s = StreamConfig::bundled(self.seed, self.days, self.n_legit_senders, self.n_spam_senders);
        s.campaigns = g.campaigns;
        s.ham_templates = g.ham_templates;
        s.spam_lexvar_rate = g.spam_lexvar_rate;
        s.ham_lexvar_rate = g.ham_lexvar_rate;
        s.start_ts = g.start_ts;
        let drift = simgen::drift_campaigns();
        for inj in &self.injections {
            let mut campaign = match &inj.campaign {
                None => simgen::drift_campaign(),
                Some(name) => drift
                    .iter()
                    .find(|c| &c.spec.name == name)
                    .map(|c| c.spec.clone())
                    .ok_or_else(|| CliError::Usage(format!("unknown drift campaign {name:?}")))?,
            };
            if let Some(n) = inj.list_size {
                campaign.list_size = n;
            }
            s.injections.push(Injection {
                campaign,
                start_day: inj.start_day,
                days: inj.days,
                n_senders: inj.n_senders,
            });
        }
        Ok(s)
    }
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}
