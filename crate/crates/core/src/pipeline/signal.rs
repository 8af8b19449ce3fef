use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::matrix::canonical_labels;
use crate::linalg::all_finite;
use crate::{Error, Result};

/// A `C × T` block of samples with its sampling rate and channel labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: DMatrix<f64>,
    sfreq: f64,
    labels: Vec<String>,
}

impl Signal {
    pub fn new<S: AsRef<str>>(data: DMatrix<f64>, sfreq: f64, labels: &[S]) -> Result<Self> {
        if !(sfreq.is_finite() && sfreq > 0.0) {
            return Err(Error::InvalidConfig(format!("sampling rate {sfreq} must be > 0")));
        }
        let labels = canonical_labels(labels)?;
        if labels.len() != data.nrows() {
            return Err(Error::Shape(format!(
                "{} labels for {} channels",
                labels.len(),
                data.nrows()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Self {
            data,
            sfreq,
            labels,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn sfreq(&self) -> f64 {
        self.sfreq
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Same signal with channels in the order of `labels`.
    pub fn reorder<S: AsRef<str>>(&self, labels: &[S]) -> Result<Signal> {
        let wanted = canonical_labels(labels)?;
        let missing: Vec<String> = wanted
            .iter()
            .filter(|l| !self.labels.contains(l))
            .cloned()
            .collect();
        let extra: Vec<String> = self
            .labels
            .iter()
            .filter(|l| !wanted.contains(l))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::ChannelMismatch { missing, extra });
        }
        let rows: Vec<_> = wanted
            .iter()
            .map(|l| {
                let i = self.labels.iter().position(|x| x == l).unwrap();
                self.data.row(i)
            })
            .collect();
        Signal::new(DMatrix::from_rows(&rows), self.sfreq, &wanted)
    }

    /// Splits into consecutive non-overlapping windows of `len` samples,
    /// dropping a trailing partial window.
    pub fn split_epochs(&self, len: usize) -> Result<Vec<Signal>> {
        if len == 0 || len > self.n_samples() {
            return Err(Error::InvalidConfig(format!(
                "epoch length {len} for {} samples",
                self.n_samples()
            )));
        }
        (0..self.n_samples() / len)
            .map(|e| {
                let block = self.data.columns(e * len, len).into_owned();
                Signal::new(block, self.sfreq, &self.labels)
            })
            .collect()
    }

    /// Concatenates equally-labelled signals along time.
    pub fn concat(parts: &[Signal]) -> Result<Signal> {
        let first = parts.first().ok_or(Error::Empty("signal list"))?;
        let total: usize = parts.iter().map(Signal::n_samples).sum();
        let mut data = DMatrix::zeros(first.n_channels(), total);
        let mut at = 0;
        for p in parts {
            if p.labels != first.labels || p.sfreq != first.sfreq {
                return Err(Error::Shape("concatenated signals differ in labels or rate".into()));
            }
            data.columns_mut(at, p.n_samples()).copy_from(&p.data);
            at += p.n_samples();
        }
        Signal::new(data, first.sfreq, &first.labels)
    }
}

/// Equal-shape epochs tagged with subject ids and optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    epochs: Vec<Signal>,
    subject_ids: Vec<String>,
    classes: Option<Vec<usize>>,
}

impl EpochSet {
    pub fn new(
        epochs: Vec<Signal>,
        subject_ids: Vec<String>,
        classes: Option<Vec<usize>>,
    ) -> Result<Self> {
        let first = epochs.first().ok_or(Error::Empty("epoch set"))?;
        for e in &epochs[1..] {
            if e.labels != first.labels
                || e.sfreq != first.sfreq
                || e.n_samples() != first.n_samples()
            {
                return Err(Error::Shape("epochs differ in shape, labels or rate".into()));
            }
        }
        if subject_ids.len() != epochs.len() {
            return Err(Error::Shape(format!(
                "{} subject ids for {} epochs",
                subject_ids.len(),
                epochs.len()
            )));
        }
        if let Some(c) = &classes {
            if c.len() != epochs.len() {
                return Err(Error::Shape(format!(
                    "{} class labels for {} epochs",
                    c.len(),
                    epochs.len()
                )));
            }
        }
        Ok(Self {
            epochs,
            subject_ids,
            classes,
        })
    }

    pub fn epochs(&self) -> &[Signal] {
        &self.epochs
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn classes(&self) -> Option<&[usize]> {
        self.classes.as_deref()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        self.epochs[0].labels()
    }

    pub fn sfreq(&self) -> f64 {
        self.epochs[0].sfreq()
    }

    /// Distinct subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.subject_ids {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }

    /// The epochs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<EpochSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Shape(format!("epoch index {bad} out of range")));
        }
        EpochSet::new(
            indices.iter().map(|&i| self.epochs[i].clone()).collect(),
            indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            self.classes
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        )
    }

    /// Indices of the epochs belonging to `subject`.
    pub fn indices_of(&self, subject: &str) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.subject_ids[i] == subject)
            .collect()
    }

    pub fn for_subject(&self, subject: &str) -> Result<EpochSet> {
        let idx = self.indices_of(subject);
        if idx.is_empty() {
            return Err(Error::InvalidConfig(format!("no epochs for subject {subject}")));
        }
        self.select(&idx)
    }

    /// Applies `f` to every epoch, keeping ids and classes.
    pub fn map(&self, f: impl Fn(&Signal) -> Result<Signal>) -> Result<EpochSet> {
        EpochSet::new(
            self.epochs.iter().map(f).collect::<Result<_>>()?,
            self.subject_ids.clone(),
            self.classes.clone(),
        )
    }

    /// The single subject id shared by every epoch.
    pub fn single_subject(&self) -> Result<&str> {
        let first = &self.subject_ids[0];
        match self.subject_ids.iter().find(|s| *s != first) {
            Some(other) => Err(Error::MixedSubjects(first.to_string(), other.clone())),
            None => Ok(first),
        }
    }
}
