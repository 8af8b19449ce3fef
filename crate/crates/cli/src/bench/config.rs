//! Benchmark configuration: a flat TOML file (no tables), every key optional.
//!
//! ```toml
//! methods = ["ssi", "zeropad", "harmonic", "riemannian", "conv1d"]
//! n_seeds = 10
//! first_seed = 0
//! source = "bci2a_22"           # builtin name or montage CSV path
//! target = "ten_twenty_19"
//! n_subjects = 6
//! n_test_subjects = 2           # the last subjects are held out
//! n_epochs_per_subject = 40
//! n_samples = 64
//! sfreq = 128.0
//! noise_sigma = 1.0
//! degree_std = [1.0, 1.0, 1.0, 1.0, 1.0]
//! label_coefficient = "SH2:-2"
//! label_offset = 0.5
//! subject_mixing = true
//! recenter_fraction = 0.5       # leading share of each subject's epochs the
//!                               # riemannian whitening is fitted on; 1.0 = all
//! classifier = "ridge_linear"
//! classifier_ridge = 1.0
//! conv1d_ridge = 1e-6
//! q = 0.05
//! output = "bench.csv"          # per-seed results
//! report = "bench_stats.csv"    # statistics report
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::formats::read_text;

/// Adapters the harness knows how to fit.
pub const BENCH_METHODS: [&str; 5] = ["ssi", "zeropad", "harmonic", "riemannian", "conv1d"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub methods: Vec<String>,
    pub n_seeds: usize,
    pub first_seed: u64,
    pub source: String,
    pub target: String,
    pub n_subjects: usize,
    pub n_test_subjects: usize,
    pub n_epochs_per_subject: usize,
    pub n_samples: usize,
    pub sfreq: f64,
    pub noise_sigma: f64,
    pub degree_std: Vec<f64>,
    pub label_coefficient: String,
    pub label_offset: f64,
    pub subject_mixing: bool,
    pub recenter_fraction: f64,
    pub classifier: String,
    pub classifier_ridge: f64,
    pub conv1d_ridge: f64,
    pub q: f64,
    pub output: Option<String>,
    pub report: Option<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: BENCH_METHODS.iter().map(|m| m.to_string()).collect(),
            n_seeds: 10,
            first_seed: 0,
            source: "bci2a_22".into(),
            target: "ten_twenty_19".into(),
            n_subjects: 6,
            n_test_subjects: 2,
            n_epochs_per_subject: 40,
            n_samples: 64,
            sfreq: 128.0,
            noise_sigma: 1.0,
            degree_std: vec![1.0; 5],
            label_coefficient: "SH2:-2".into(),
            label_offset: 0.5,
            subject_mixing: true,
            recenter_fraction: 0.5,
            classifier: "ridge_linear".into(),
            classifier_ridge: 1.0,
            conv1d_ridge: 1e-6,
            q: 0.05,
            output: None,
            report: None,
        }
    }
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("bench config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(format!("bench config: {m}")));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if let Some(m) = self.methods.iter().find(|m| !BENCH_METHODS.contains(&m.as_str())) {
            return bad(format!("unknown method {m:?} (expected one of {})", BENCH_METHODS.join(", ")));
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be >= 1".into());
        }
        if self.n_test_subjects == 0 || self.n_test_subjects >= self.n_subjects {
            return bad("need 1 <= n_test_subjects < n_subjects".into());
        }
        if self.n_epochs_per_subject < 2 {
            return bad("n_epochs_per_subject must be >= 2 (two classes)".into());
        }
        if self.n_samples < 2 {
            return bad("n_samples must be >= 2".into());
        }
        if !(self.recenter_fraction > 0.0 && self.recenter_fraction <= 1.0) {
            return bad("recenter_fraction must be in (0, 1]".into());
        }
        if self.classifier != "ridge_linear" {
            return bad(format!("unknown classifier {:?} (only ridge_linear)", self.classifier));
        }
        if !(self.classifier_ridge >= 0.0) || !(self.conv1d_ridge >= 0.0) {
            return bad("ridge values must be >= 0".into());
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("q must be in (0, 1)".into());
        }
        if chanadapt::basis::ShIndex::parse_label(&self.label_coefficient).is_none() {
            return bad(format!("bad label_coefficient {:?}", self.label_coefficient));
        }
        Ok(())
    }

    /// Method names as reported: a method listed more than once gets a
    /// `#2`, `#3`, ... suffix so every column stays distinct.
    pub fn method_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.methods.len());
        for (i, m) in self.methods.iter().enumerate() {
            let seen = self.methods[..i].iter().filter(|x| *x == m).count();
            out.push(if seen == 0 { m.clone() } else { format!("{m}#{}", seen + 1) });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = BenchConfig::parse("n_seeds = 3\nmethods = [\"ssi\", \"zeropad\"]\n").unwrap();
        assert_eq!(c.n_seeds, 3);
        assert_eq!(c.methods, vec!["ssi", "zeropad"]);
        assert_eq!(c.source, "bci2a_22");
        assert_eq!(BenchConfig::parse("").unwrap(), BenchConfig::default());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "methods = []",
            "methods = [\"bogus\"]",
            "n_seeds = 0",
            "unknown_key = 1",
            "[table]\nx = 1",
            "n_test_subjects = 6",
            "classifier = \"svm\"",
            "recenter_fraction = 0.0",
            "label_coefficient = \"SH9\"",
        ] {
            assert!(BenchConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn duplicate_methods_are_suffixed() {
        let c = BenchConfig::parse("methods = [\"ssi\", \"ssi\", \"zeropad\", \"ssi\"]").unwrap();
        assert_eq!(c.method_names(), vec!["ssi", "ssi#2", "zeropad", "ssi#3"]);
    }
}
