//! Resampling checked against an FFT of the output.

use chanadapt::pipeline::resample;
use chanadapt::{DMatrix, Signal};
use rustfft::{num_complex::Complex, FftPlanner};

fn tone(freq: f64, sfreq: f64, seconds: f64, amp: f64) -> Signal {
    let n = (sfreq * seconds).round() as usize;
    let data = DMatrix::from_fn(1, n, |_, t| amp * (2.0 * std::f64::consts::PI * freq * t as f64 / sfreq).cos());
    Signal::new(data, sfreq, &["Cz"]).unwrap()
}

/// Magnitude spectrum scaled so a unit cosine on an exact bin reads 1.
fn spectrum(x: &Signal) -> Vec<f64> {
    let n = x.n_samples();
    let mut buf: Vec<Complex<f64>> = x.data().row(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..n / 2].iter().map(|c| 2.0 * c.norm() / n as f64).collect()
}

fn peak(spec: &[f64], sfreq: f64, n: usize) -> (f64, f64) {
    let (k, a) = spec
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |b, (k, &a)| if a > b.1 { (k, a) } else { b });
    (k as f64 * sfreq / n as f64, a)
}

#[test]
fn passband_tones_keep_frequency_and_amplitude() {
    // Whole-second signals keep every tone on an exact bin at both rates.
    for (from, to, freq) in [(256.0, 200.0, 10.0), (200.0, 256.0, 10.0), (250.0, 125.0, 40.0), (160.0, 256.0, 60.0), (256.0, 200.0, 80.0)] {
        let x = tone(freq, from, 4.0, 1.5);
        let y = resample(&x, to).unwrap();
        assert_eq!(y.n_samples(), (4.0 * to) as usize);
        let (f, a) = peak(&spectrum(&y), to, y.n_samples());
        assert!((f - freq).abs() < 1e-9, "{from}->{to}: peak at {f}");
        assert!((a - 1.5).abs() < 0.015, "{from}->{to} {freq} Hz: amplitude {a}");
    }
}

#[test]
fn tones_above_the_new_nyquist_are_removed() {
    // 120 Hz is representable at 256 Hz but above 100 Hz, the Nyquist of 200 Hz.
    let y = resample(&tone(120.0, 256.0, 4.0, 1.0), 200.0).unwrap();
    let spec = spectrum(&y);
    // Ignore the edges where the filter runs into zero padding.
    let inner = Signal::new(y.data().columns(100, 600).into_owned(), 200.0, &["Cz"]).unwrap();
    let leak = spectrum(&inner).into_iter().fold(0.0, f64::max);
    assert!(leak < 1e-3, "aliased energy {leak} (full-length max {})", spec.iter().cloned().fold(0.0, f64::max));
}
