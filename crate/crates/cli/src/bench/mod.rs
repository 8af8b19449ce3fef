//! Seed-replicated montage-transfer benchmark.
//!
//! For every seed: synthesize labelled epochs on the source montage, fit each
//! adapter (supervised fits only see training subjects), extract per-channel
//! means of the adapted epochs, train a ridge classifier on the training
//! subjects and score balanced accuracy on the held-out ones. Seeds run in
//! parallel and are reported in seed order.

pub mod classifier;
pub mod config;
pub mod report;

use chanadapt::basis::ShIndex;
use chanadapt::harmonic::{harmonic_matrix, HarmonicConfig};
use chanadapt::learned::lsq_fit;
use chanadapt::oracle::{synth_epochs, synth_reference, Coefficients, LabelSpec, SubjectMixing, SynthSpec};
use chanadapt::riemannian::{recenter_matrix, RiemannianConfig};
use chanadapt::ssi::{ssi_matrix, SplineConfig};
use chanadapt::{AdaptationMatrix, DMatrix, EpochSet, Montage, Signal};
use rayon::prelude::*;

pub use classifier::{balanced_accuracy, RidgeClassifier};
pub use config::{BenchConfig, BENCH_METHODS};
pub use report::{build_report, parse_report, parse_results, render_report, render_results, render_table, ResultRow, StatsReport};

use crate::error::Result;
use crate::formats::montage::load_montage;

/// A method that could not be fitted or scored for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    /// Method-major within each seed, seeds ascending.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
}

/// Mixing seeds are decorrelated from the signal seed.
const MIXING_SEED_SALT: u64 = 0x6d69_7869_6e67_0001;

pub fn synth_spec(cfg: &BenchConfig, source: &Montage, seed: u64) -> SynthSpec {
    SynthSpec {
        montage: source.clone(),
        coefficients: Coefficients::Random {
            degree_std: cfg.degree_std.clone(),
            n_samples: cfg.n_samples,
        },
        noise_sigma: cfg.noise_sigma,
        sfreq: cfg.sfreq,
        n_subjects: cfg.n_subjects,
        n_epochs_per_subject: cfg.n_epochs_per_subject,
        subject_mixing: if cfg.subject_mixing {
            SubjectMixing::RandomSpd {
                seed: seed ^ MIXING_SEED_SALT,
            }
        } else {
            SubjectMixing::None
        },
        seed,
        labels: Some(LabelSpec {
            coefficient: ShIndex::parse_label(&cfg.label_coefficient).expect("validated"),
            offset: cfg.label_offset,
        }),
    }
}

/// Number of leading epochs (out of `n`) a re-centering is fitted on.
pub fn recenter_fit_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1.min(n), n)
}

fn channel_means(x: &Signal) -> Vec<f64> {
    x.data().row_iter().map(|r| r.mean()).collect()
}

struct SeedData<'a> {
    cfg: &'a BenchConfig,
    source: &'a Montage,
    target: &'a Montage,
    ssi: &'a AdaptationMatrix,
    spec: SynthSpec,
    epochs: EpochSet,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl SeedData<'_> {
    /// Adapted epochs (same order as `self.epochs`) for one method.
    fn adapt(&self, method: &str) -> Result<EpochSet> {
        let fixed = |m: &AdaptationMatrix| -> Result<EpochSet> { Ok(self.epochs.map(|e| m.apply(e))?) };
        match method {
            "ssi" => fixed(self.ssi),
            "zeropad" => fixed(&AdaptationMatrix::zero_pad(&self.source.labels(), &self.target.labels())?),
            "harmonic" => fixed(&harmonic_matrix(self.source, &HarmonicConfig::default())?),
            "riemannian" => {
                // Unsupervised: each subject's whitening is fitted on the
                // leading share of its own epochs and applied to all of them.
                let cfg = RiemannianConfig::default();
                let mut adapted: Vec<Option<Signal>> = vec![None; self.epochs.len()];
                for s in self.epochs.subjects() {
                    let idx = self.epochs.indices_of(&s);
                    let n_fit = recenter_fit_count(idx.len(), self.cfg.recenter_fraction);
                    let fit = recenter_matrix(&self.epochs.select(&idx[..n_fit])?, self.ssi, &cfg)?;
                    for i in idx {
                        adapted[i] = Some(fit.matrix.apply(&self.epochs.epochs()[i])?);
                    }
                }
                Ok(EpochSet::new(
                    adapted.into_iter().map(|s| s.expect("every epoch has a subject")).collect(),
                    self.epochs.subject_ids().to_vec(),
                    self.epochs.classes().map(<[usize]>::to_vec),
                )?)
            }
            "conv1d" => {
                let reference = synth_reference(&self.spec, self.target)?;
                let concat = |set: &EpochSet| -> Result<DMatrix<f64>> {
                    let parts: Vec<Signal> = self.train.iter().map(|&i| set.epochs()[i].clone()).collect();
                    Ok(Signal::concat(&parts)?.into_data())
                };
                let p = lsq_fit(&concat(&self.epochs)?, &concat(&reference)?, self.cfg.conv1d_ridge, true)?;
                fixed(&p.to_matrix(&self.source.labels(), &self.target.labels())?)
            }
            other => unreachable!("method {other} passed validation"),
        }
    }

    fn score(&self, method: &str) -> Result<f64> {
        let adapted = self.adapt(method)?;
        let classes = adapted.classes().expect("benchmark epochs are labelled");
        let features = |idx: &[usize]| {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| channel_means(&adapted.epochs()[i])).collect();
            DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
        };
        let pick = |idx: &[usize]| idx.iter().map(|&i| classes[i]).collect::<Vec<_>>();
        let clf = RidgeClassifier::fit(&features(&self.train), &pick(&self.train), self.cfg.classifier_ridge)?;
        Ok(balanced_accuracy(&pick(&self.test), &clf.predict(&features(&self.test))))
    }
}

fn run_seed(
    cfg: &BenchConfig,
    names: &[String],
    source: &Montage,
    target: &Montage,
    ssi: &AdaptationMatrix,
    seed: u64,
) -> Result<(Vec<ResultRow>, Vec<Failure>)> {
    let spec = synth_spec(cfg, source, seed);
    let epochs = synth_epochs(&spec)?;
    let subjects = epochs.subjects();
    let n_train = subjects.len() - cfg.n_test_subjects;
    let train: Vec<usize> = subjects[..n_train].iter().flat_map(|s| epochs.indices_of(s)).collect();
    let test: Vec<usize> = subjects[n_train..].iter().flat_map(|s| epochs.indices_of(s)).collect();
    let data = SeedData {
        cfg,
        source,
        target,
        ssi,
        spec,
        epochs,
        train,
        test,
    };
    let mut rows = Vec::with_capacity(names.len());
    let mut failures = Vec::new();
    for (method, name) in cfg.methods.iter().zip(names) {
        let balanced_accuracy = match data.score(method) {
            Ok(v) => v,
            Err(e) => {
                failures.push(Failure {
                    method: name.clone(),
                    seed,
                    message: e.to_string(),
                });
                f64::NAN
            }
        };
        rows.push(ResultRow {
            method: name.clone(),
            seed,
            balanced_accuracy,
        });
    }
    Ok((rows, failures))
}

/// Runs every seed of `cfg`.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let source = load_montage(&cfg.source)?;
    let target = load_montage(&cfg.target)?;
    let ssi = ssi_matrix(&source, &target, &SplineConfig::default())?;
    let names = cfg.method_names();
    let per_seed: Vec<Result<(Vec<ResultRow>, Vec<Failure>)>> = (0..cfg.n_seeds as u64)
        .into_par_iter()
        .map(|k| run_seed(cfg, &names, &source, &target, &ssi, cfg.first_seed + k))
        .collect();
    let mut out = BenchOutput {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for r in per_seed {
        let (rows, failures) = r?;
        out.rows.extend(rows);
        out.failures.extend(failures);
    }
    Ok(out)
}
