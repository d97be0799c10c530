use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ionvqe::simulator::seeded_rng;
use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Identity of one invocation: what was asked, on which inputs, with which seed.
pub struct Run {
    pub command: &'static str,
    pub config: Value,
    pub config_hash: String,
    pub seed: u64,
}

impl Run {
    /// Hashes the canonical config together with the contents of every input.
    pub fn new(command: &'static str, config: Value, inputs: &[&Path], seed: Option<u64>) -> Result<Self> {
        let seed = seed.unwrap_or_else(|| {
            let s = rand::random();
            eprintln!("no --seed given, using {s}");
            s
        });
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(serde_json::to_string(&config)?.as_bytes());
        for path in inputs {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            hasher.update(Sha256::digest(&bytes));
        }
        Ok(Self {
            command,
            config,
            config_hash: hex::encode(hasher.finalize()),
            seed,
        })
    }

    pub fn header(&self) -> Value {
        json!({
            "tool": "ionvqe",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": self.config,
        })
    }

    /// Comment lines for CSV outputs.
    pub fn preamble(&self) -> Vec<String> {
        vec![
            format!("ionvqe {} {}", env!("CARGO_PKG_VERSION"), self.command),
            format!("config_hash={}", self.config_hash),
            format!("seed={}", self.seed),
        ]
    }

    /// Seed for the geometry at `index` of the input table, independent of
    /// which other geometries are selected.
    pub fn geometry_seed(&self, index: usize) -> u64 {
        seeded_rng(self.seed, index as u64).next_u64()
    }

    /// `value` as a JSON object with the run header under `run`.
    pub fn stamp<T: Serialize>(&self, value: &T) -> Result<Value> {
        let mut v = serde_json::to_value(value)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("run".into(), self.header());
                Ok(v)
            }
            None => Ok(json!({ "run": self.header(), "data": v })),
        }
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// File-name fragment for a bond length, e.g. `R1.600`.
pub fn r_tag(r: f64) -> String {
    format!("R{r:.3}")
}
