//! `<file>.meta` sidecars: `key=value` lines describing a signal file.
//!
//! Recognized keys: `provenance` (processing steps joined by `;`),
//! `epoch_samples` (epoch length when the file holds concatenated epochs),
//! `subjects` and `classes` (one comma-separated entry per epoch) and
//! `created_unix` (omitted with `--no-timestamp`). Keys are written sorted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chanadapt::{EpochSet, Signal};

use super::{read_text, write_bytes};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar {
    entries: BTreeMap<String, String>,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

impl Sidecar {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Appends a processing step to `provenance`.
    pub fn push_provenance(&mut self, step: &str) {
        let next = match self.get("provenance") {
            Some(p) if !p.is_empty() => format!("{p};{step}"),
            _ => step.to_string(),
        };
        self.set("provenance", next);
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            entries.insert(k.trim().to_string(), v.to_string());
        }
        Ok(Self { entries })
    }

    pub fn render(&self, timestamp: bool) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            if k == "created_unix" {
                continue;
            }
            out.push_str(&format!("{k}={v}\n"));
        }
        if timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            out.push_str(&format!("created_unix={secs}\n"));
        }
        out
    }

    /// The sidecar next to `data`, or an empty one if there is none.
    pub fn read_for(data: &Path) -> Result<Self> {
        let path = sidecar_path(data);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = read_text(&path)?;
        Sidecar::parse(&text).map_err(|m| CliError::format(&path, m))
    }

    pub fn write_for(&self, data: &Path, timestamp: bool) -> Result<()> {
        write_bytes(&sidecar_path(data), self.render(timestamp).as_bytes())
    }

    pub fn epoch_samples(&self) -> std::result::Result<Option<usize>, String> {
        self.get("epoch_samples")
            .map(|v| v.parse().map_err(|_| format!("bad epoch_samples {v:?}")))
            .transpose()
    }
}

/// Concatenates epochs along time, with their layout in a sidecar.
pub fn epochs_to_signal(set: &EpochSet) -> Result<(Signal, Sidecar)> {
    let signal = Signal::concat(set.epochs())?;
    let mut meta = Sidecar::default();
    meta.set("epoch_samples", set.epochs()[0].n_samples().to_string());
    meta.set("subjects", set.subject_ids().join(","));
    if let Some(c) = set.classes() {
        let c: Vec<String> = c.iter().map(usize::to_string).collect();
        meta.set("classes", c.join(","));
    }
    Ok((signal, meta))
}

/// Splits a concatenated signal back into epochs. Without `epoch_samples`
/// the whole file is one epoch; without `subjects` every epoch belongs to
/// subject `s0`.
pub fn signal_to_epochs(signal: &Signal, meta: &Sidecar) -> std::result::Result<EpochSet, String> {
    let len = meta.epoch_samples()?.unwrap_or(signal.n_samples());
    if len == 0 || signal.n_samples() % len != 0 {
        return Err(format!(
            "epoch_samples {len} does not divide {} samples",
            signal.n_samples()
        ));
    }
    let epochs = signal.split_epochs(len).map_err(|e| e.to_string())?;
    let n = epochs.len();
    let subjects: Vec<String> = match meta.get("subjects") {
        Some(s) => s.split(',').map(str::to_string).collect(),
        None => vec!["s0".to_string(); n],
    };
    if subjects.len() != n {
        return Err(format!("{} subject ids for {n} epochs", subjects.len()));
    }
    let classes = match meta.get("classes") {
        Some(c) => Some(
            c.split(',')
                .map(|v| v.parse::<usize>().map_err(|_| format!("bad class {v:?}")))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    EpochSet::new(epochs, subjects, classes).map_err(|e| e.to_string())
}
