//! Text checkpoints. Floats are stored as the 16 hex digits of their bit
//! pattern, so a load after a save reproduces every array exactly.
//!
//! ```text
//! schema_version = 1
//! actor = cpg-actor
//! steps = 16384
//! update = 1
//! actor_params = 1490: 3ff0000000000000 ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::actors::ActorKind;
use crate::error::{Error, Result};
use crate::normalize::RunningNorm;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub actor: ActorKind,
    pub steps: u64,
    pub update: u64,
    pub actor_params: Vec<f64>,
    pub log_std: Vec<f64>,
    pub critic_params: Vec<f64>,
    pub obs_norm: RunningNorm,
}

pub fn encode_f64s(xs: &[f64]) -> String {
    let mut s = format!("{}:", xs.len());
    for x in xs {
        write!(s, " {:016x}", x.to_bits()).expect("writing to a String");
    }
    s
}

pub fn decode_f64s(s: &str, line: usize) -> Result<Vec<f64>> {
    let err = |message: String| Error::Parse { line, message };
    let (len, body) = s
        .split_once(':')
        .ok_or_else(|| err("array needs a `len:` prefix".into()))?;
    let len: usize = len
        .trim()
        .parse()
        .map_err(|_| err(format!("bad array length `{len}`")))?;
    let xs = body
        .split_whitespace()
        .map(|h| {
            u64::from_str_radix(h, 16)
                .map(f64::from_bits)
                .map_err(|_| err(format!("bad hex float `{h}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if xs.len() != len {
        return Err(err(format!("array declares {len} entries but has {}", xs.len())));
    }
    Ok(xs)
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema_version = {}", self.schema_version);
        let _ = writeln!(s, "actor = {}", self.actor);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "update = {}", self.update);
        let _ = writeln!(s, "actor_params = {}", encode_f64s(&self.actor_params));
        let _ = writeln!(s, "log_std = {}", encode_f64s(&self.log_std));
        let _ = writeln!(s, "critic_params = {}", encode_f64s(&self.critic_params));
        let _ = writeln!(s, "obs_norm.count = {}", encode_f64s(&[self.obs_norm.count]));
        let _ = writeln!(s, "obs_norm.mean = {}", encode_f64s(&self.obs_norm.mean));
        let _ = writeln!(s, "obs_norm.var = {}", encode_f64s(&self.obs_norm.var));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            fields.insert(k.trim(), (i + 1, v.trim()));
        }
        let get = |k: &str| {
            fields.get(k).copied().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing checkpoint field `{k}`"),
            })
        };
        let int = |k: &str| -> Result<u64> {
            let (line, v) = get(k)?;
            v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{k}` must be an unsigned integer"),
            })
        };
        let arr = |k: &str| -> Result<Vec<f64>> {
            let (line, v) = get(k)?;
            decode_f64s(v, line)
        };
        let version = int("schema_version")? as u32;
        if version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version,
                supported: SCHEMA_VERSION,
            });
        }
        let count_line = get("obs_norm.count")?.0;
        let count = arr("obs_norm.count")?;
        let obs_norm = RunningNorm {
            count: *count.first().ok_or_else(|| Error::Parse {
                line: count_line,
                message: "empty normaliser count".into(),
            })?,
            mean: arr("obs_norm.mean")?,
            var: arr("obs_norm.var")?,
        };
        if obs_norm.mean.len() != obs_norm.var.len() {
            return Err(Error::Parse {
                line: get("obs_norm.var")?.0,
                message: "normaliser mean and variance lengths differ".into(),
            });
        }
        Ok(Checkpoint {
            schema_version: version,
            actor: get("actor")?.1.parse()?,
            steps: int("steps")?,
            update: int("update")?,
            actor_params: arr("actor_params")?,
            log_std: arr("log_std")?,
            critic_params: arr("critic_params")?,
            obs_norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
