//! Electrodes, montages and the angular geometry used by the spline and
//! harmonic adapters.
//!
//! Frame: `+x` toward the right preauricular point, `+y` toward the nasion,
//! `+z` toward the vertex. Polar angle `theta` is measured from `+z`, azimuth
//! `phi` from `+x` toward `+y`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Unit-sphere position table shipped with the crate (idealized 10-10 system).
pub const STANDARD_POSITIONS_CSV: &str = include_str!("../data/standard_1010.csv");

/// Version of [`STANDARD_POSITIONS_CSV`]; bump whenever a coordinate changes.
pub const STANDARD_POSITIONS_VERSION: u32 = 1;

/// Returns the canonical spelling of an electrode label.
///
/// Labels from the standard table map to their table spelling regardless of
/// case (`"CZ"` and `"cz"` both become `"Cz"`); anything else is upper-cased.
pub fn canonical_label(raw: &str) -> Result<String> {
    let label = raw.trim();
    if label.is_empty()
        || label
            .chars()
            .any(|c| c == ',' || c == ';' || c == '"' || c.is_whitespace() || c.is_control())
    {
        return Err(Error::InvalidLabel(raw.to_string()));
    }
    if let Some(std) = standard_spelling(label) {
        return Ok(std.to_string());
    }
    Ok(label.to_uppercase())
}

fn standard_spelling(label: &str) -> Option<&'static str> {
    STANDARD_POSITIONS_CSV
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .find(|name| name.eq_ignore_ascii_case(label))
}

/// A named electrode at a unit-norm position.
#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    label: String,
    position: [f64; 3],
}

impl Electrode {
    /// Builds an electrode, canonicalizing the label and projecting the
    /// position onto the unit sphere.
    pub fn new(label: &str, position: [f64; 3]) -> Result<Self> {
        let label = canonical_label(label)?;
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("electrode position"));
        }
        let norm = norm3(&position);
        if norm < 1e-12 {
            return Err(Error::ZeroPosition(label));
        }
        let position = [position[0] / norm, position[1] / norm, position[2] / norm];
        Ok(Self { label, position })
    }

    /// Places an electrode at spherical coordinates `(theta, phi)` in radians.
    pub fn from_spherical(label: &str, theta: f64, phi: f64) -> Result<Self> {
        let (st, ct) = (theta.sin(), theta.cos());
        Self::new(label, [st * phi.cos(), st * phi.sin(), ct])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Cosine of the angle between two electrodes, clamped to `[-1, 1]`.
pub fn cosine_angle(a: &Electrode, b: &Electrode) -> f64 {
    let (p, q) = (a.position, b.position);
    // Summation order is fixed so the result is symmetric bit for bit.
    let d = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    d.clamp(-1.0, 1.0)
}

/// `(theta, phi)` of an electrode. `phi` is reported as 0 at the poles.
pub fn spherical_coords(e: &Electrode) -> (f64, f64) {
    let [x, y, z] = e.position;
    let theta = z.clamp(-1.0, 1.0).acos();
    if theta.sin() < 1e-12 {
        return (theta, 0.0);
    }
    (theta, y.atan2(x))
}

/// An ordered, duplicate-free set of electrodes. Order defines matrix
/// row/column order everywhere downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    name: String,
    electrodes: Vec<Electrode>,
}

impl Montage {
    pub fn new(name: &str, electrodes: Vec<Electrode>) -> Result<Self> {
        if electrodes.is_empty() {
            return Err(Error::Empty("montage"));
        }
        for (i, e) in electrodes.iter().enumerate() {
            if electrodes[..i].iter().any(|o| o.label == e.label) {
                return Err(Error::DuplicateLabel(e.label.clone()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            electrodes,
        })
    }

    /// Parses montage CSV text: header `label,x,y,z`, one electrode per row,
    /// `#` comment lines and blank lines ignored.
    pub fn parse_csv(name: &str, text: &str) -> Result<Self> {
        let mut header_seen = false;
        let mut electrodes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                let expected = ["label", "x", "y", "z"];
                if fields.len() != 4
                    || fields
                        .iter()
                        .zip(expected)
                        .any(|(f, e)| !f.eq_ignore_ascii_case(e))
                {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "expected header `label,x,y,z`".into(),
                    });
                }
                header_seen = true;
                continue;
            }
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let mut pos = [0.0; 3];
            for (k, f) in fields[1..].iter().enumerate() {
                pos[k] = f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid number {f:?}"),
                })?;
                if !pos[k].is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("non-finite coordinate {f:?}"),
                    });
                }
            }
            electrodes.push(Electrode::new(fields[0], pos)?);
        }
        Montage::new(name, electrodes)
    }

    /// The full shipped position table as one montage.
    pub fn standard_table() -> Montage {
        Montage::parse_csv("standard_1010", STANDARD_POSITIONS_CSV)
            .expect("shipped position table is valid")
    }

    pub fn builtin(which: BuiltinMontage) -> Montage {
        Montage::standard_table()
            .select(which.name(), which.labels())
            .expect("builtin montage labels exist in the position table")
    }

    /// A new montage made of the named electrodes, in the given order.
    pub fn select<S: AsRef<str>>(&self, name: &str, labels: &[S]) -> Result<Montage> {
        let mut out = Vec::with_capacity(labels.len());
        let mut missing = Vec::new();
        for l in labels {
            let canon = canonical_label(l.as_ref())?;
            match self.index_of(&canon) {
                Some(i) => out.push(self.electrodes[i].clone()),
                None => missing.push(canon),
            }
        }
        if !missing.is_empty() {
            return Err(Error::ChannelMismatch {
                missing,
                extra: Vec::new(),
            });
        }
        Montage::new(name, out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn labels(&self) -> Vec<String> {
        self.electrodes.iter().map(|e| e.label.clone()).collect()
    }

    /// Position of `label` (any case) in the montage.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        let canon = canonical_label(label).ok()?;
        self.electrodes.iter().position(|e| e.label == canon)
    }

    /// Spherical coordinates of every electrode, in montage order.
    pub fn spherical(&self) -> Vec<(f64, f64)> {
        self.electrodes.iter().map(spherical_coords).collect()
    }
}

/// The montages shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinMontage {
    /// Standard 19-channel 10-20 layout.
    TenTwenty19,
    /// 64-channel 10-10 layout (PhysioNet motor imagery ordering).
    TenTen64,
    /// BCI Competition IV 2a, 22 channels.
    Bci2a22,
    /// 10-20 plus ear references, 21 channels.
    Tuev21,
}

const TEN_TWENTY_19: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz", "C4", "T8", "P7", "P3", "Pz",
    "P4", "P8", "O1", "O2",
];

const TEN_TEN_64: [&str; 64] = [
    "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz",
    "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "FT7", "FT8", "T7", "T8",
    "T9", "T10", "TP7", "TP8", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO3",
    "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz",
];

const BCI2A_22: [&str; 22] = [
    "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3",
    "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz",
];

const TUEV_21: [&str; 21] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "A1", "T3", "C3", "Cz", "C4", "T4", "A2", "T5",
    "P3", "Pz", "P4", "T6", "O1", "O2",
];

impl BuiltinMontage {
    pub const ALL: [BuiltinMontage; 4] = [
        BuiltinMontage::TenTwenty19,
        BuiltinMontage::TenTen64,
        BuiltinMontage::Bci2a22,
        BuiltinMontage::Tuev21,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMontage::TenTwenty19 => "ten_twenty_19",
            BuiltinMontage::TenTen64 => "ten_ten_64",
            BuiltinMontage::Bci2a22 => "bci2a_22",
            BuiltinMontage::Tuev21 => "tuev_21",
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            BuiltinMontage::TenTwenty19 => &TEN_TWENTY_19,
            BuiltinMontage::TenTen64 => &TEN_TEN_64,
            BuiltinMontage::Bci2a22 => &BCI2A_22,
            BuiltinMontage::Tuev21 => &TUEV_21,
        }
    }
}

impl fmt::Display for BuiltinMontage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinMontage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinMontage::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMontage(s.to_string()))
    }
}

/// Looks up a builtin montage by its registry name.
pub fn builtin_montage(name: &str) -> Result<Montage> {
    Ok(Montage::builtin(name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn parses_and_normalizes() {
        let m = Montage::parse_csv("t", "label,x,y,z\nCz,0,0,1\nFpz,0,0.95,0.31\n").unwrap();
        assert_eq!(m.len(), 2);
        for e in m.electrodes() {
            assert!((norm3(&e.position()) - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.labels(), ["Cz", "Fpz"]);
    }

    #[test]
    fn zero_position_rejected() {
        let err = Montage::parse_csv("t", "label,x,y,z\nCz,0,0,0\n").unwrap_err();
        assert_eq!(err, Error::ZeroPosition("Cz".into()));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            Montage::parse_csv("t", "# only a comment\n").unwrap_err(),
            Error::Empty("montage")
        );
        assert!(matches!(
            Montage::parse_csv("t", "label,x,y,z\nCz,0,zero,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Montage::parse_csv("t", "label,x,y,z\nCz,0,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Montage::parse_csv("t", "name,a,b,c\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert_eq!(
            Montage::parse_csv("t", "label,x,y,z\nCz,0,0,1\nCZ,1,0,0\n").unwrap_err(),
            Error::DuplicateLabel("Cz".into())
        );
    }

    #[test]
    fn label_case_is_canonical() {
        assert_eq!(canonical_label("CZ").unwrap(), "Cz");
        assert_eq!(canonical_label("fp1").unwrap(), "Fp1");
        assert_eq!(canonical_label("x12a").unwrap(), "X12A");
        assert!(canonical_label("a,b").is_err());
        assert!(canonical_label("  ").is_err());
    }

    #[test]
    fn builtin_counts() {
        let counts = [19, 64, 22, 21];
        for (m, n) in BuiltinMontage::ALL.into_iter().zip(counts) {
            let montage = Montage::builtin(m);
            assert_eq!(montage.len(), n, "{m}");
            for e in montage.electrodes() {
                assert!((norm3(&e.position()) - 1.0).abs() < 1e-9);
            }
        }
        assert!(matches!(
            builtin_montage("ten_ten_65"),
            Err(Error::UnknownMontage(_))
        ));
    }

    #[test]
    fn builtin_montages_have_distinct_positions() {
        for m in BuiltinMontage::ALL {
            let montage = Montage::builtin(m);
            let es = montage.electrodes();
            for i in 0..es.len() {
                for j in 0..i {
                    assert!(cosine_angle(&es[i], &es[j]) < 1.0 - 1e-6, "{m}");
                }
            }
        }
    }

    #[test]
    fn cosine_examples() {
        let cz = Electrode::new("Cz", [0.0, 0.0, 1.0]).unwrap();
        let x = Electrode::new("X", [1.0, 0.0, 0.0]).unwrap();
        let anti = Electrode::new("A", [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(cosine_angle(&cz, &cz), 1.0);
        assert_eq!(cosine_angle(&cz, &anti), -1.0);
        assert_eq!(cosine_angle(&cz, &x), 0.0);
    }

    #[test]
    fn spherical_examples() {
        let pole = Electrode::new("Cz", [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(spherical_coords(&pole), (0.0, 0.0));
        let (t, p) = spherical_coords(&Electrode::new("X", [1.0, 0.0, 0.0]).unwrap());
        assert!((t - FRAC_PI_2).abs() < 1e-15 && p == 0.0);
        let (t, p) = spherical_coords(&Electrode::new("Y", [0.0, 1.0, 0.0]).unwrap());
        assert!((t - FRAC_PI_2).abs() < 1e-15 && (p - FRAC_PI_2).abs() < 1e-15);
        let (_, p) = spherical_coords(&Electrode::new("W", [-1.0, 0.0, 0.0]).unwrap());
        assert!((p - PI).abs() < 1e-15);
    }

    #[test]
    fn frame_orientation() {
        let t = Montage::standard_table();
        let pos = |l: &str| t.electrodes()[t.index_of(l).unwrap()].position();
        assert!(pos("Fpz")[1] > 0.99);
        assert!(pos("T8")[0] > 0.99);
        assert!(pos("Cz")[2] > 0.99);
        assert!(pos("C3")[0] < 0.0);
    }

    #[test]
    fn select_reports_missing() {
        let t = Montage::builtin(BuiltinMontage::TenTwenty19);
        match t.select("s", &["Cz", "Q9"]) {
            Err(Error::ChannelMismatch { missing, .. }) => assert_eq!(missing, ["Q9"]),
            other => panic!("{other:?}"),
        }
    }
}
