//! Forest file format.
//!
//! Binary layout, little-endian: magic `SSRF`, `u16` major, `u16` minor, then
//! sections of `u8` tag, `u64` byte length, payload. Tags: `H` header
//! (schema, feature count, OOB accuracy), `P` params, `L` label table,
//! `T` trees. Unknown tags are skipped so minor revisions can add sections.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::forest::{Forest, ForestParams, MaxFeatures};
use super::tree::{Node, Tree, LEAF};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSRF";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;
const TEXT_MAGIC: &str = "shortspam-forest";

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.write_u32::<LE>(s.len() as u32).unwrap();
    buf.extend_from_slice(s.as_bytes());
}

fn get_str(c: &mut Cursor<&[u8]>) -> Result<String> {
    let len = c.read_u32::<LE>().map_err(|_| corrupt("truncated string length"))? as usize;
    let remaining = c.get_ref().len() - c.position() as usize;
    if len > remaining {
        return Err(corrupt("string runs past end of section"));
    }
    let mut b = vec![0; len];
    c.read_exact(&mut b).map_err(|_| corrupt("truncated string"))?;
    String::from_utf8(b).map_err(|_| corrupt("string is not UTF-8"))
}

fn section(out: &mut Vec<u8>, tag: u8, payload: Vec<u8>) {
    out.push(tag);
    out.write_u64::<LE>(payload.len() as u64).unwrap();
    out.extend_from_slice(&payload);
}

fn encode_max_features(m: MaxFeatures) -> (u8, f64) {
    match m {
        MaxFeatures::Sqrt => (0, 0.0),
        MaxFeatures::Log2 => (1, 0.0),
        MaxFeatures::All => (2, 0.0),
        MaxFeatures::Count(n) => (3, n as f64),
        MaxFeatures::Fraction(f) => (4, f),
    }
}

fn decode_max_features(kind: u8, v: f64) -> Result<MaxFeatures> {
    Ok(match kind {
        0 => MaxFeatures::Sqrt,
        1 => MaxFeatures::Log2,
        2 => MaxFeatures::All,
        3 => MaxFeatures::Count(v as usize),
        4 => MaxFeatures::Fraction(v),
        k => return Err(corrupt(format!("unknown feature-sampling rule {k}"))),
    })
}

pub fn serialize(forest: &Forest) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u16::<LE>(FORMAT_MAJOR).unwrap();
    out.write_u16::<LE>(FORMAT_MINOR).unwrap();

    let mut h = Vec::new();
    put_str(&mut h, &forest.schema_version);
    h.write_u32::<LE>(forest.n_features as u32).unwrap();
    h.write_f64::<LE>(forest.oob_accuracy).unwrap();
    section(&mut out, b'H', h);

    let p = &forest.params;
    let mut pb = Vec::new();
    pb.write_u32::<LE>(p.n_trees as u32).unwrap();
    pb.write_u32::<LE>(p.max_depth.map_or(0, |d| d as u32 + 1)).unwrap();
    pb.write_u32::<LE>(p.min_leaf as u32).unwrap();
    let (kind, v) = encode_max_features(p.features_per_split);
    pb.write_u8(kind).unwrap();
    pb.write_f64::<LE>(v).unwrap();
    pb.write_u8(p.bootstrap as u8).unwrap();
    pb.write_u64::<LE>(p.rng_seed).unwrap();
    section(&mut out, b'P', pb);

    let mut l = Vec::new();
    l.write_u32::<LE>(2).unwrap();
    for name in &forest.class_labels {
        put_str(&mut l, name);
    }
    section(&mut out, b'L', l);

    let mut t = Vec::new();
    t.write_u32::<LE>(forest.trees.len() as u32).unwrap();
    for tree in &forest.trees {
        t.write_u32::<LE>(tree.nodes.len() as u32).unwrap();
        for n in &tree.nodes {
            t.write_u32::<LE>(n.feature).unwrap();
            t.write_f64::<LE>(n.threshold).unwrap();
            t.write_u32::<LE>(n.left).unwrap();
            t.write_u32::<LE>(n.right).unwrap();
        }
    }
    section(&mut out, b'T', t);
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<Forest> {
    if bytes.len() < 8 {
        return Err(corrupt("payload too short"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut c = Cursor::new(bytes);
    c.set_position(4);
    let major = c.read_u16::<LE>().unwrap();
    let _minor = c.read_u16::<LE>().unwrap();
    if major != FORMAT_MAJOR {
        return Err(Error::UnsupportedVersion {
            found: major,
            supported: FORMAT_MAJOR,
        });
    }
    let mut header = None;
    let mut params = None;
    let mut labels = None;
    let mut trees = None;
    while (c.position() as usize) < bytes.len() {
        let tag = c.read_u8().map_err(|_| corrupt("truncated section tag"))?;
        let len = c.read_u64::<LE>().map_err(|_| corrupt("truncated section length"))? as usize;
        let start = c.position() as usize;
        if len > bytes.len() - start {
            return Err(corrupt(format!("section {:?} runs past end", tag as char)));
        }
        let body = &bytes[start..start + len];
        c.set_position((start + len) as u64);
        let mut s = Cursor::new(body);
        let short = |_| corrupt(format!("section {:?} truncated", tag as char));
        match tag {
            b'H' => {
                let schema = get_str(&mut s)?;
                let d = s.read_u32::<LE>().map_err(short)? as usize;
                let oob = s.read_f64::<LE>().map_err(short)?;
                header = Some((schema, d, oob));
            }
            b'P' => {
                let n_trees = s.read_u32::<LE>().map_err(short)? as usize;
                let depth = s.read_u32::<LE>().map_err(short)?;
                let min_leaf = s.read_u32::<LE>().map_err(short)? as usize;
                let kind = s.read_u8().map_err(short)?;
                let v = s.read_f64::<LE>().map_err(short)?;
                let bootstrap = s.read_u8().map_err(short)? != 0;
                let rng_seed = s.read_u64::<LE>().map_err(short)?;
                params = Some(ForestParams {
                    n_trees,
                    max_depth: (depth > 0).then(|| depth as usize - 1),
                    min_leaf,
                    features_per_split: decode_max_features(kind, v)?,
                    bootstrap,
                    rng_seed,
                });
            }
            b'L' => {
                let n = s.read_u32::<LE>().map_err(short)?;
                if n != 2 {
                    return Err(corrupt(format!("expected 2 class labels, found {n}")));
                }
                labels = Some([get_str(&mut s)?, get_str(&mut s)?]);
            }
            b'T' => {
                let n = s.read_u32::<LE>().map_err(short)? as usize;
                let mut ts = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    let m = s.read_u32::<LE>().map_err(short)? as usize;
                    if m.saturating_mul(20) > body.len() {
                        return Err(corrupt("node count exceeds section size"));
                    }
                    let mut nodes = Vec::with_capacity(m);
                    for _ in 0..m {
                        nodes.push(Node {
                            feature: s.read_u32::<LE>().map_err(short)?,
                            threshold: s.read_f64::<LE>().map_err(short)?,
                            left: s.read_u32::<LE>().map_err(short)?,
                            right: s.read_u32::<LE>().map_err(short)?,
                        });
                    }
                    ts.push(Tree { nodes });
                }
                trees = Some(ts);
            }
            _ => {}
        }
    }
    let (schema_version, n_features, oob_accuracy) = header.ok_or_else(|| corrupt("missing header section"))?;
    let forest = Forest {
        trees: trees.ok_or_else(|| corrupt("missing tree section"))?,
        params: params.ok_or_else(|| corrupt("missing params section"))?,
        n_features,
        schema_version,
        class_labels: labels.ok_or_else(|| corrupt("missing label section"))?,
        oob_accuracy,
    };
    validate(&forest)?;
    Ok(forest)
}

/// Structural checks: non-empty acyclic trees, features in range, finite thresholds.
pub fn validate(forest: &Forest) -> Result<()> {
    if forest.trees.is_empty() {
        return Err(corrupt("forest has no trees"));
    }
    for (ti, t) in forest.trees.iter().enumerate() {
        if t.nodes.is_empty() {
            return Err(corrupt(format!("tree {ti} is empty")));
        }
        for (ni, n) in t.nodes.iter().enumerate() {
            if n.is_leaf() {
                continue;
            }
            if n.feature as usize >= forest.n_features {
                return Err(corrupt(format!("tree {ti} node {ni}: feature {} out of range", n.feature)));
            }
            if !n.threshold.is_finite() {
                return Err(corrupt(format!("tree {ti} node {ni}: non-finite threshold")));
            }
            // Children always follow their parent, which rules out cycles.
            for child in [n.left, n.right] {
                if child as usize <= ni || child as usize >= t.nodes.len() {
                    return Err(corrupt(format!("tree {ti} node {ni}: bad child index {child}")));
                }
            }
        }
    }
    Ok(())
}

/// Lossless text dump for diffing; floats use shortest round-trip notation.
pub fn to_text(forest: &Forest) -> String {
    use std::fmt::Write;
    let p = &forest.params;
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC} {FORMAT_MAJOR}.{FORMAT_MINOR}");
    let _ = writeln!(s, "schema {}", forest.schema_version);
    let _ = writeln!(s, "n_features {}", forest.n_features);
    let _ = writeln!(s, "labels {} {}", forest.class_labels[0], forest.class_labels[1]);
    let (kind, v) = encode_max_features(p.features_per_split);
    let _ = writeln!(
        s,
        "params n_trees={} max_depth={} min_leaf={} features={}:{:?} bootstrap={} seed={}",
        p.n_trees,
        p.max_depth.map_or("none".to_string(), |d| d.to_string()),
        p.min_leaf,
        kind,
        v,
        p.bootstrap,
        p.rng_seed
    );
    let _ = writeln!(s, "oob_accuracy {:?}", forest.oob_accuracy);
    for (i, t) in forest.trees.iter().enumerate() {
        let _ = writeln!(s, "tree {i} {}", t.nodes.len());
        for (j, n) in t.nodes.iter().enumerate() {
            if n.is_leaf() {
                let _ = writeln!(s, "  {j} leaf {} {}", n.left, n.right);
            } else {
                let _ = writeln!(s, "  {j} split {} {:?} {} {}", n.feature, n.threshold, n.left, n.right);
            }
        }
    }
    s
}

/// Parses the output of [`to_text`].
pub fn from_text(text: &str) -> Result<Forest> {
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| corrupt(format!("missing {what} line")));
    let head = next("magic")?;
    let version = head
        .strip_prefix(TEXT_MAGIC)
        .map(str::trim)
        .ok_or_else(|| corrupt("bad text magic"))?;
    let major: u16 = version
        .split('.')
        .next()
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| corrupt("bad version"))?;
    if major != FORMAT_MAJOR {
        return Err(Error::UnsupportedVersion {
            found: major,
            supported: FORMAT_MAJOR,
        });
    }
    let field = |line: &str, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .map(|r| r.trim().to_string())
            .ok_or_else(|| corrupt(format!("expected {key}")))
    };
    let num = |v: &str| -> Result<f64> { v.parse::<f64>().map_err(|_| corrupt(format!("bad number {v:?}"))) };
    let int = |v: &str| -> Result<u64> { v.parse::<u64>().map_err(|_| corrupt(format!("bad integer {v:?}"))) };

    let schema_version = field(next("schema")?, "schema")?;
    let n_features = int(&field(next("n_features")?, "n_features")?)? as usize;
    let labels = field(next("labels")?, "labels")?;
    let (l0, l1) = labels.split_once(' ').ok_or_else(|| corrupt("bad labels line"))?;
    let params_line = field(next("params")?, "params")?;
    let mut kv = std::collections::HashMap::new();
    for part in params_line.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| corrupt("bad params entry"))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| corrupt(format!("missing param {k}")));
    let (kind, fv) = get("features")?.split_once(':').ok_or_else(|| corrupt("bad features param"))?;
    let params = ForestParams {
        n_trees: int(get("n_trees")?)? as usize,
        max_depth: match get("max_depth")? {
            "none" => None,
            d => Some(int(d)? as usize),
        },
        min_leaf: int(get("min_leaf")?)? as usize,
        features_per_split: decode_max_features(int(kind)? as u8, num(fv)?)?,
        bootstrap: get("bootstrap")? == "true",
        rng_seed: int(get("seed")?)?,
    };
    let oob_accuracy = num(&field(next("oob_accuracy")?, "oob_accuracy")?)?;
    let mut trees = Vec::new();
    while let Some(line) = lines.next() {
        let mut it = line.split_whitespace();
        if it.next() != Some("tree") {
            return Err(corrupt(format!("expected tree line, got {line:?}")));
        }
        let count = int(it.nth(1).ok_or_else(|| corrupt("bad tree line"))?)? as usize;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let l = lines.next().ok_or_else(|| corrupt("truncated tree"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let node = match f.as_slice() {
                [_, "leaf", h, s] => Node::leaf(int(h)? as u32, int(s)? as u32),
                [_, "split", feat, t, a, b] => Node {
                    feature: int(feat)? as u32,
                    threshold: num(t)?,
                    left: int(a)? as u32,
                    right: int(b)? as u32,
                },
                _ => return Err(corrupt(format!("bad node line {l:?}"))),
            };
            if node.feature == LEAF && f[1] == "split" {
                return Err(corrupt("split node uses the leaf marker"));
            }
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    let forest = Forest {
        trees,
        params,
        n_features,
        schema_version,
        class_labels: [l0.to_string(), l1.to_string()],
        oob_accuracy,
    };
    validate(&forest)?;
    Ok(forest)
}

pub fn save(forest: &Forest, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, serialize(forest)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &std::path::Path) -> Result<Forest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize(&bytes)
}
