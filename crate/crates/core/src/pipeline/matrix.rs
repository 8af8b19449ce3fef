use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::signal::Signal;
use crate::basis::ShIndex;
use crate::geometry::canonical_label;
use crate::linalg::all_finite;
use crate::{Error, Result};

/// How an [`AdaptationMatrix`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Conv1d,
    Ssi,
    Harmonic,
    Riemannian,
    Composed,
    Identity,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Conv1d,
        Method::Ssi,
        Method::Harmonic,
        Method::Riemannian,
        Method::Composed,
        Method::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Conv1d => "conv1d",
            Method::Ssi => "ssi",
            Method::Harmonic => "harmonic",
            Method::Riemannian => "riemannian",
            Method::Composed => "composed",
            Method::Identity => "identity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Meaning of the output rows of an [`AdaptationMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum TargetDescriptor {
    /// Output rows are channels with these labels.
    Labels(Vec<String>),
    /// Output rows are spherical-harmonic coefficients.
    Harmonics(Vec<ShIndex>),
}

impl TargetDescriptor {
    pub fn len(&self) -> usize {
        match self {
            TargetDescriptor::Labels(l) => l.len(),
            TargetDescriptor::Harmonics(h) => h.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row labels; harmonic rows are labelled `SH<l>:<m>`.
    pub fn labels(&self) -> Vec<String> {
        match self {
            TargetDescriptor::Labels(l) => l.clone(),
            TargetDescriptor::Harmonics(h) => h.iter().map(|i| i.label()).collect(),
        }
    }

    /// Rebuilds a descriptor from row labels. All-harmonic label lists turn
    /// back into [`TargetDescriptor::Harmonics`].
    pub fn from_labels(labels: Vec<String>) -> Self {
        let harmonics: Option<Vec<ShIndex>> =
            labels.iter().map(|l| ShIndex::parse_label(l)).collect();
        match harmonics {
            Some(h) if !h.is_empty() => TargetDescriptor::Harmonics(h),
            _ => TargetDescriptor::Labels(labels),
        }
    }
}

pub(crate) fn canonical_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<String>> {
    let out: Vec<String> = labels
        .iter()
        .map(|l| canonical_label(l.as_ref()))
        .collect::<Result<_>>()?;
    for (i, l) in out.iter().enumerate() {
        if out[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(out)
}

/// The `C_t × C_s` matrix of `X_t = M X_s`, with the labels that give its
/// rows and columns meaning and a string metadata map for provenance.
///
/// Fixed constructions never carry a bias; only learned projections (and
/// compositions containing one) do, and `metadata["bias"]` says so.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationMatrix {
    matrix: DMatrix<f64>,
    method: Method,
    source_labels: Vec<String>,
    target: TargetDescriptor,
    metadata: BTreeMap<String, String>,
    bias: Option<DVector<f64>>,
}

impl AdaptationMatrix {
    pub fn new<S: AsRef<str>>(
        matrix: DMatrix<f64>,
        method: Method,
        source_labels: &[S],
        target: TargetDescriptor,
    ) -> Result<Self> {
        let source_labels = canonical_labels(source_labels)?;
        let target = match target {
            TargetDescriptor::Labels(l) => TargetDescriptor::Labels(canonical_labels(&l)?),
            h => h,
        };
        if matrix.ncols() != source_labels.len() || matrix.nrows() != target.len() {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but labels describe {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                target.len(),
                source_labels.len()
            )));
        }
        if !all_finite(&matrix) {
            return Err(Error::NonFinite("adaptation matrix"));
        }
        Ok(Self {
            matrix,
            method,
            source_labels,
            target,
            metadata: BTreeMap::new(),
            bias: None,
        })
    }

    pub fn identity<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let labels = canonical_labels(labels)?;
        let n = labels.len();
        Self::new(
            DMatrix::identity(n, n),
            Method::Identity,
            &labels,
            TargetDescriptor::Labels(labels.clone()),
        )
    }

    /// Copies channels present in both label lists and leaves the remaining
    /// target channels at zero.
    pub fn zero_pad<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T]) -> Result<Self> {
        let source = canonical_labels(source)?;
        let target = canonical_labels(target)?;
        let mut m = DMatrix::zeros(target.len(), source.len());
        let mut copied = 0;
        for (i, t) in target.iter().enumerate() {
            if let Some(j) = source.iter().position(|s| s == t) {
                m[(i, j)] = 1.0;
                copied += 1;
            }
        }
        let mut out = Self::new(m, Method::Identity, &source, TargetDescriptor::Labels(target))?;
        out.set_meta("construction", "zero-pad");
        out.set_meta("copied_channels", copied.to_string());
        Ok(out)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn source_labels(&self) -> &[String] {
        &self.source_labels
    }

    pub fn target(&self) -> &TargetDescriptor {
        &self.target
    }

    pub fn target_labels(&self) -> Vec<String> {
        self.target.labels()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn bias(&self) -> Option<&DVector<f64>> {
        self.bias.as_ref()
    }

    /// `(rows, cols)` = `(C_t, C_s)`.
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn set_method(&mut self, method: Method) {
        self.method = method;
    }

    /// Attaches an output bias (length `C_t`).
    pub fn with_bias(mut self, bias: DVector<f64>) -> Result<Self> {
        if bias.len() != self.matrix.nrows() {
            return Err(Error::Shape(format!(
                "bias has {} entries, matrix has {} rows",
                bias.len(),
                self.matrix.nrows()
            )));
        }
        if bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bias"));
        }
        self.bias = Some(bias);
        self.set_meta("bias", "present");
        Ok(self)
    }

    /// Column permutation taking `labels` (a reordering of the source labels)
    /// to source order: `perm[k]` is the index in `labels` of source column `k`.
    fn source_permutation(&self, labels: &[String]) -> Result<Option<Vec<usize>>> {
        if labels == self.source_labels.as_slice() {
            return Ok(None);
        }
        let missing: Vec<String> = self
            .source_labels
            .iter()
            .filter(|l| !labels.contains(l))
            .cloned()
            .collect();
        let extra: Vec<String> = labels
            .iter()
            .filter(|l| !self.source_labels.contains(l))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::ChannelMismatch { missing, extra });
        }
        let perm = self
            .source_labels
            .iter()
            .map(|l| labels.iter().position(|x| x == l).unwrap())
            .collect();
        Ok(Some(perm))
    }

    /// `X_t = M X_s (+ b)`. See [`AdaptationMatrix::apply_reporting`].
    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        self.apply_reporting(x).map(|(s, _)| s)
    }

    /// Like [`AdaptationMatrix::apply`], also reporting whether the input
    /// channels had to be reordered to match the source labels.
    pub fn apply_reporting(&self, x: &Signal) -> Result<(Signal, bool)> {
        let perm = self.source_permutation(x.labels())?;
        let reordered = perm.is_some();
        let data = match perm {
            None => product_skipping_zeros(&self.matrix, x.data()),
            Some(p) => {
                let rows: Vec<_> = p.iter().map(|&i| x.data().row(i)).collect();
                let ordered = DMatrix::from_rows(&rows);
                product_skipping_zeros(&self.matrix, &ordered)
            }
        };
        let data = match &self.bias {
            Some(b) => {
                let mut d = data;
                for (mut row, bv) in d.row_iter_mut().zip(b.iter()) {
                    row.add_scalar_mut(*bv);
                }
                d
            }
            None => data,
        };
        Ok((Signal::new(data, x.sfreq(), &self.target_labels())?, reordered))
    }
}

/// Dense product that skips exact zeros of `a`, so that identity and
/// selection matrices reproduce their input bit for bit (signed zeros included).
pub(crate) fn product_skipping_zeros(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        let mut first = true;
        for k in 0..a.ncols() {
            let w = a[(i, k)];
            if w == 0.0 {
                continue;
            }
            for j in 0..b.ncols() {
                let term = w * b[(k, j)];
                if first {
                    out[(i, j)] = term;
                } else {
                    out[(i, j)] += term;
                }
            }
            first = false;
        }
    }
    out
}

/// `outer ∘ inner`: the matrix that applies `inner` first.
///
/// `outer`'s source labels must equal `inner`'s target labels, possibly in a
/// different order (outer's columns are then permuted to match).
pub fn compose(outer: &AdaptationMatrix, inner: &AdaptationMatrix) -> Result<AdaptationMatrix> {
    let inner_targets = inner.target_labels();
    let outer_w = match outer.source_permutation(&inner_targets)? {
        None => outer.matrix.clone(),
        Some(perm) => {
            // Column k of outer belongs to inner row perm[k].
            let mut w = DMatrix::zeros(outer.matrix.nrows(), inner_targets.len());
            for (k, &row) in perm.iter().enumerate() {
                w.set_column(row, &outer.matrix.column(k));
            }
            w
        }
    };
    let matrix = product_skipping_zeros(&outer_w, &inner.matrix);
    let mut out = AdaptationMatrix::new(
        matrix,
        Method::Composed,
        &inner.source_labels,
        outer.target.clone(),
    )?;
    let bias = match (&outer.bias, &inner.bias) {
        (None, None) => None,
        (ob, ib) => {
            let mut b = match ib {
                Some(ib) => &outer_w * ib,
                None => DVector::zeros(outer_w.nrows()),
            };
            if let Some(ob) = ob {
                b += ob;
            }
            Some(b)
        }
    };
    if let Some(b) = bias {
        out = out.with_bias(b)?;
    }
    out.set_meta("outer.method", outer.method.name());
    out.set_meta("inner.method", inner.method.name());
    for (k, v) in &outer.metadata {
        out.set_meta(&format!("outer.{k}"), v.clone());
    }
    for (k, v) in &inner.metadata {
        out.set_meta(&format!("inner.{k}"), v.clone());
    }
    let provenance = |m: &AdaptationMatrix| {
        m.metadata
            .get("provenance")
            .cloned()
            .unwrap_or_else(|| m.method.name().to_string())
    };
    out.set_meta(
        "provenance",
        format!("{}({})", provenance(outer), provenance(inner)),
    );
    Ok(out)
}
