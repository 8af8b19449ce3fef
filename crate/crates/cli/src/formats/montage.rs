//! Montage arguments: a builtin name or a `label,x,y,z` CSV file.

use std::path::Path;

use chanadapt::geometry::builtin_montage;
use chanadapt::Montage;

use super::read_text;
use crate::error::{CliError, Result};

/// Resolves `spec` as a builtin montage name, falling back to a file path.
pub fn load_montage(spec: &str) -> Result<Montage> {
    if let Ok(m) = builtin_montage(spec) {
        return Ok(m);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Core(chanadapt::Error::UnknownMontage(spec.to_string())));
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("montage")
        .to_string();
    let text = read_text(path)?;
    Montage::parse_csv(&name, &text).map_err(|e| CliError::format(path, e.to_string()))
}

/// `label,x,y,z` text for `m`, loadable with [`load_montage`].
pub fn montage_csv(m: &Montage) -> String {
    let mut out = String::from("label,x,y,z\n");
    for e in m.electrodes() {
        let [x, y, z] = e.position();
        out.push_str(&format!("{},{x},{y},{z}\n", e.label()));
    }
    out
}
