//! Message records, ground-truth labels and their line-oriented file formats.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Ham,
    Spam,
}

impl Label {
    pub fn is_spam(self) -> bool {
        self == Label::Spam
    }

    pub fn index(self) -> usize {
        match self {
            Label::Ham => 0,
            Label::Spam => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ham => "ham",
            Label::Spam => "spam",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ham" | "0" | "legit" => Ok(Label::Ham),
            "spam" | "1" | "spammer" => Ok(Label::Spam),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One short text with its routing metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    /// Seconds since the Unix epoch.
    pub ts: u64,
    pub sender: String,
    /// Digits only.
    pub recipient: String,
    pub orig_net: String,
    pub dest_net: String,
    pub text: String,
}

impl Message {
    pub fn validate(&self) -> Result<()> {
        if self.ts == 0 {
            return Err(Error::InvalidArgument(format!("message {}: timestamp must be > 0", self.id)));
        }
        if self.sender.is_empty() || self.recipient.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "message {}: sender and recipient must be non-empty",
                self.id
            )));
        }
        Ok(())
    }
}

pub fn parse_message_line(line: &str, source_name: &str, line_no: usize) -> Result<Message> {
    let msg: Message = serde_json::from_str(line).map_err(|source| Error::Json {
        source_name: source_name.to_string(),
        line: line_no,
        source,
    })?;
    msg.validate()
        .map_err(|e| Error::malformed(source_name, line_no, e.to_string()))?;
    Ok(msg)
}

pub fn read_messages(reader: impl BufRead, source_name: &str) -> Result<Vec<Message>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_message_line(&line, source_name, i + 1)?);
    }
    Ok(out)
}

pub fn load_messages(path: &Path) -> Result<Vec<Message>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_messages(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_messages(mut w: impl Write, messages: &[Message]) -> std::io::Result<()> {
    for m in messages {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Ground-truth labels keyed by message id (`id<TAB>ham|spam` per line).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    labels: HashMap<String, Label>,
}

impl LabelMap {
    pub fn insert(&mut self, id: impl Into<String>, label: Label) {
        self.labels.insert(id.into(), label);
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.labels.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut map = LabelMap::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(source_name, i + 1, "expected id<TAB>label"))?;
            let label = label
                .parse()
                .map_err(|e: String| Error::malformed(source_name, i + 1, e))?;
            map.insert(id, label);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Labels for `messages` in order; fails on the first unlabeled id.
    pub fn resolve(&self, messages: &[Message]) -> Result<Vec<Label>> {
        messages
            .iter()
            .map(|m| {
                self.get(&m.id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no label for message {:?}", m.id)))
            })
            .collect()
    }
}

pub fn write_labels(mut w: impl Write, messages: &[Message], labels: &[Label]) -> std::io::Result<()> {
    for (m, l) in messages.iter().zip(labels) {
        writeln!(w, "{}\t{}", m.id, l)?;
    }
    Ok(())
}

/// Sidecar label path for a corpus file: `corpus.jsonl` -> `corpus.labels`.
pub fn sidecar_labels_path(corpus: &Path) -> std::path::PathBuf {
    corpus.with_extension("labels")
}

/// Reads the public SMS spam collection (`ham|spam<TAB>text` per line).
/// Messages get synthetic routing metadata: one second apart, unknown networks.
pub fn parse_sms_collection(text: &str, source_name: &str) -> Result<Vec<(Message, Label)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::malformed(source_name, i + 1, "expected label<TAB>text"))?;
        let label: Label = label
            .parse()
            .map_err(|e: String| Error::malformed(source_name, i + 1, e))?;
        let n = out.len() + 1;
        out.push((
            Message {
                id: format!("sms-{n:06}"),
                ts: 1_370_000_000 + n as u64,
                sender: "unknown".into(),
                recipient: "0000000".into(),
                orig_net: "unknown".into(),
                dest_net: "unknown".into(),
                text: body.to_string(),
            },
            label,
        ));
    }
    Ok(out)
}

pub fn load_sms_collection(path: &Path) -> Result<Vec<(Message, Label)>> {
    let text = crate::error::read_to_string(path)?;
    parse_sms_collection(&text, &path.display().to_string())
}
