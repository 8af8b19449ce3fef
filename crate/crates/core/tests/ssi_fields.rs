//! Spline interpolation of spherical-harmonic fields between montages.

use chanadapt::basis::ShIndex;
use chanadapt::oracle::{synth_field, synth_reference, Coefficients, SynthSpec, SYNTH_L_MAX};
use chanadapt::ssi::{ssi_matrix, SplineConfig};
use chanadapt::{BuiltinMontage, DMatrix, Montage};

/// Worst relative RMS over unit harmonics of degree <= `l_max`.
fn worst_error(target: &Montage, l_max: usize, cfg: &SplineConfig) -> f64 {
    let src = Montage::builtin(BuiltinMontage::TenTen64);
    let k = ShIndex::count(l_max);
    let mut coefs = DMatrix::zeros(ShIndex::count(SYNTH_L_MAX), k);
    for j in 0..k {
        coefs[(j, j)] = 1.0;
    }
    let spec = SynthSpec::new(src.clone(), Coefficients::Fixed(coefs));
    let got = ssi_matrix(&src, target, cfg).unwrap().apply(&synth_field(&spec).unwrap()).unwrap();
    let reference = synth_reference(&spec, target).unwrap();
    let want = reference.epochs()[0].data();
    // Fields that vanish on every target electrode have no relative error.
    (0..k)
        .filter(|&j| want.column(j).norm() > 1e-6)
        .map(|j| (got.data().column(j) - want.column(j)).norm() / want.column(j).norm())
        .fold(0.0, f64::max)
}

fn targets() -> Vec<Montage> {
    let ten = Montage::builtin(BuiltinMontage::TenTen64);
    vec![
        Montage::builtin(BuiltinMontage::TenTwenty19),
        Montage::builtin(BuiltinMontage::Bci2a22),
        ten.select("scattered", &["F3", "C4", "P3", "Oz", "FT7", "CP2", "AF4"]).unwrap(),
    ]
}

#[test]
fn degree_two_fields_at_default_config() {
    for t in targets() {
        let e = worst_error(&t, 2, &SplineConfig::default());
        assert!(e < 0.02, "{}: {e}", t.name());
    }
}

#[test]
fn unregularized_spline_reproduces_degree_three() {
    let cfg = SplineConfig {
        reg_lambda: 0.0,
        ..Default::default()
    };
    for t in targets() {
        let e = worst_error(&t, 3, &cfg);
        assert!(e < 1e-8, "{}: {e}", t.name());
    }
}

#[test]
fn regularization_shrinks_higher_degrees_more() {
    let t = Montage::builtin(BuiltinMontage::TenTwenty19);
    let cfg = SplineConfig::default();
    let (e1, e2, e3) = (worst_error(&t, 1, &cfg), worst_error(&t, 2, &cfg), worst_error(&t, 3, &cfg));
    assert!(e1 < 1e-3 && e1 < e2 && e2 < e3, "{e1} {e2} {e3}");
}
