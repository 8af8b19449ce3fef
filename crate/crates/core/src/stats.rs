//! Seed-level comparison statistics: Wilcoxon signed-rank, Benjamini-Hochberg,
//! Friedman, Cohen's d and the within-margin fraction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Largest number of non-zero differences with an exact Wilcoxon p-value.
pub const WILCOXON_EXACT_MAX: usize = 25;

fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Doubled midranks (`2 ×` the average rank, always an integer) of `values`.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end+1 share their average.
        let doubled = (start + 1 + end + 1) as u64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Outcome of [`wilcoxon_signed_rank`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// `min(W+, W-)`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Two-sided Wilcoxon signed-rank test on `a - b`. Zero differences are
/// dropped; tied magnitudes share their average rank.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    check_finite(a, "paired samples")?;
    check_finite(b, "paired samples")?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(Error::UndefinedTest("all paired differences are zero"));
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&mags);
    let plus2: u64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total2: u64 = ranks.iter().sum();
    let w2 = plus2.min(total2 - plus2);
    let statistic = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        // counts[s] = number of sign patterns with doubled W+ equal to s.
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let below: u64 = counts[..=w2 as usize].iter().sum();
        let p = 2.0 * below as f64 / (1u64 << n) as f64;
        return Ok(Wilcoxon {
            statistic,
            p_value: p.min(1.0),
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((statistic - mean + 0.5).min(0.0)) / var.sqrt();
    Ok(Wilcoxon {
        statistic,
        p_value: (2.0 * normal_cdf(z)).min(1.0),
        n,
        exact: false,
    })
}

/// Outcome of [`bh_correct`], in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct BhResult {
    pub reject: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure at false discovery rate `q`.
pub fn bh_correct(pvals: &[f64], q: f64) -> Result<BhResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("FDR level {q} outside (0, 1)")));
    }
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]).then(i.cmp(&j)));
    let mf = m as f64;
    // Largest k with p_(k) ≤ k q / m, compared as p_(k)·m ≤ k·q.
    let cutoff = (1..=m)
        .rev()
        .find(|&k| pvals[order[k - 1]] * mf <= k as f64 * q)
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for k in (1..=m).rev() {
        let i = order[k - 1];
        running = running.min(mf * pvals[i] / k as f64);
        adjusted[i] = running;
    }
    Ok(BhResult { reject, adjusted })
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma at a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let log_prefix = a * x.ln() - x - libm::lgamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        Ok((1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0))
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((log_prefix.exp() * h).clamp(0.0, 1.0))
    }
}

/// Survival function of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: f64) -> Result<f64> {
    gamma_q(dof / 2.0, x / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friedman {
    pub statistic: f64,
    pub p_value: f64,
}

/// Friedman test on an `n_blocks × k` score table (rows are blocks, e.g.
/// seeds; columns are treatments, e.g. methods).
pub fn friedman(scores: &DMatrix<f64>) -> Result<Friedman> {
    let (n, k) = scores.shape();
    if n < 2 || k < 2 {
        return Err(Error::Shape(format!("friedman needs >= 2 blocks and >= 2 treatments, got {n}x{k}")));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("friedman scores"));
    }
    let mut rank_sums = vec![0.0; k];
    for row in scores.row_iter() {
        let vals: Vec<f64> = row.iter().copied().collect();
        for (j, r) in doubled_midranks(&vals).into_iter().enumerate() {
            rank_sums[j] += r as f64 / 2.0;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = (kf + 1.0) / 2.0;
    let spread: f64 = rank_sums.iter().map(|s| (s / nf - centre).powi(2)).sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * spread;
    if statistic == 0.0 {
        return Ok(Friedman {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    Ok(Friedman {
        statistic,
        p_value: chi2_sf(statistic, kf - 1.0)?,
    })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// `(mean(a) − mean(b)) / pooled std`, pooled with `n_a + n_b − 2` degrees
/// of freedom.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Shape("cohen's d needs >= 2 samples per group".into()));
    }
    check_finite(a, "effect size samples")?;
    check_finite(b, "effect size samples")?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(Error::UndefinedTest("zero pooled standard deviation"));
    }
    Ok((ma - mb) / pooled)
}

/// Absolute slack on margin comparisons, so that e.g. 0.80 vs 0.79 counts
/// as within 0.01 despite binary rounding.
pub const MARGIN_SLACK: f64 = 1e-12;

/// Fraction of conditions (columns of a `method × condition` table) in which
/// at least two methods score within `margin` of that condition's best.
/// Non-finite cells are treated as inapplicable and skipped; conditions with
/// fewer than one score are ignored.
pub fn within_margin_fraction(table: &DMatrix<f64>, margin: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::Empty("score table"));
    }
    let mut counted = 0usize;
    let mut hits = 0usize;
    for col in table.column_iter() {
        let vals: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            continue;
        }
        counted += 1;
        let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let close = vals.iter().filter(|v| best - **v <= margin + MARGIN_SLACK).count();
        if close >= 2 {
            hits += 1;
        }
    }
    if counted == 0 {
        return Err(Error::Empty("score table"));
    }
    Ok(hits as f64 / counted as f64)
}

/// [`within_margin_fraction`] at one percentage point, for scores expressed
/// as fractions in `[0, 1]`.
pub fn within_1pp_fraction(table: &DMatrix<f64>) -> Result<f64> {
    within_margin_fraction(table, 0.01)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-sided p by enumerating all 2ⁿ sign assignments of the ranks.
    fn brute_force_p(d: &[f64]) -> f64 {
        let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
        let n = nz.len();
        let mags: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
        // Average ranks computed by counting, independently of the sort above.
        let ranks: Vec<f64> = mags
            .iter()
            .map(|m| {
                let less = mags.iter().filter(|x| *x < m).count() as f64;
                let eq = mags.iter().filter(|x| *x == m).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect();
        let total: f64 = ranks.iter().sum();
        let plus: f64 = ranks.iter().zip(&nz).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
        let w = plus.min(total - plus);
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                hits += 1;
            }
        }
        (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
    }

    fn diffs(d: &[f64]) -> Wilcoxon {
        wilcoxon_signed_rank(d, &vec![0.0; d.len()]).unwrap()
    }

    #[test]
    fn wilcoxon_all_positive() {
        let w = diffs(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(w.statistic, 0.0);
        assert_eq!(w.p_value, 0.03125);
        assert!(w.exact);
        assert_eq!(diffs(&[1.0, 2.0, 3.0, 4.0, 5.0]).p_value, 0.0625);
        assert_eq!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(),
            Error::UndefinedTest("all paired differences are zero")
        );
    }

    #[test]
    fn wilcoxon_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=12 {
            for _ in 0..20 {
                // Small integer magnitudes to force ties and zeros.
                let d: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
                if d.iter().all(|v| *v == 0.0) {
                    continue;
                }
                assert_eq!(diffs(&d).p_value, brute_force_p(&d), "{d:?}");
            }
        }
    }

    #[test]
    fn wilcoxon_normal_approximation() {
        // n = 30, all positive: z = (0 - 232.5 + 0.5)/sqrt(2363.75).
        let d: Vec<f64> = (1..=30).map(f64::from).collect();
        let w = diffs(&d);
        assert!(!w.exact);
        let z = (0.0 - 232.5 + 0.5) / 2363.75f64.sqrt();
        assert!((w.p_value - libm::erfc(-z / SQRT_2)).abs() < 1e-15);
        assert!(w.p_value < 1e-5);
        // Symmetric data: p = 1.
        let sym: Vec<f64> = (1..=30).map(|i| if i % 2 == 0 { i as f64 } else { -(i as f64) }).collect();
        assert!(diffs(&sym).p_value > 0.5);
    }

    #[test]
    fn bh_examples() {
        let r = bh_correct(&[0.01, 0.02, 0.03, 0.04, 0.05], 0.05).unwrap();
        assert_eq!(r.reject, vec![true; 5]);
        let r = bh_correct(&[0.04], 0.05).unwrap();
        assert_eq!(r.reject, vec![true]);
        assert_eq!(r.adjusted, vec![0.04]);
        let r = bh_correct(&[0.001, 0.9], 0.05).unwrap();
        assert_eq!(r.reject, vec![true, false]);
        assert!(bh_correct(&[1.5], 0.05).is_err());
        assert!(bh_correct(&[0.5], 1.0).is_err());
        assert_eq!(bh_correct(&[], 0.05).unwrap().reject, Vec::<bool>::new());
    }

    #[test]
    fn friedman_examples() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let f = friedman(&s).unwrap();
        assert!((f.statistic - 6.0).abs() < 1e-12);
        assert!((f.p_value - (-3.0f64).exp()).abs() < 1e-12);
        let flat = friedman(&DMatrix::from_element(4, 3, 0.7)).unwrap();
        assert_eq!((flat.statistic, flat.p_value), (0.0, 1.0));
        assert!(friedman(&DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn chi_square_tail() {
        // Closed forms: dof 2 → e^{-x/2}; dof 1 → erfc(√(x/2)).
        for x in [0.1f64, 1.0, 3.0, 10.0, 40.0] {
            assert!((chi2_sf(x, 2.0).unwrap() - (-x / 2.0).exp()).abs() < 1e-12);
            assert!((chi2_sf(x, 1.0).unwrap() - libm::erfc((x / 2.0).sqrt())).abs() < 1e-10);
        }
        // dof 4 → e^{-x/2}(1 + x/2).
        for x in [0.5f64, 2.0, 7.0, 30.0] {
            let want = (-x / 2.0).exp() * (1.0 + x / 2.0);
            assert!((chi2_sf(x, 4.0).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cohens_d_examples() {
        let a = [1.0, 2.0, 0.0];
        let b = [0.0, 1.0, -1.0];
        assert!((cohens_d(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
        let x = [0.3, 0.71, 0.5, 0.12];
        let y = [0.9, 0.2, 0.44];
        assert_eq!(cohens_d(&x, &y).unwrap(), -cohens_d(&y, &x).unwrap());
        assert!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(cohens_d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn within_margin() {
        assert_eq!(within_1pp_fraction(&DMatrix::from_element(3, 4, 0.5)).unwrap(), 1.0);
        let dominant = DMatrix::from_row_slice(2, 3, &[0.9, 0.8, 0.7, 0.5, 0.5, 0.5]);
        assert_eq!(within_1pp_fraction(&dominant).unwrap(), 0.0);
        let half = DMatrix::from_row_slice(2, 2, &[0.80, 0.9, 0.79, 0.5]);
        assert_eq!(within_1pp_fraction(&half).unwrap(), 0.5);
        let mut missing = DMatrix::from_element(2, 2, 0.5);
        missing[(1, 1)] = f64::NAN;
        assert_eq!(within_1pp_fraction(&missing).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn bh_permutation_invariant(ps in prop::collection::vec(0.0f64..=1.0, 1..20), rot in 0usize..20) {
            let r = bh_correct(&ps, 0.05).unwrap();
            let k = rot % ps.len();
            let mut rotated = ps.clone();
            rotated.rotate_left(k);
            let rr = bh_correct(&rotated, 0.05).unwrap();
            for i in 0..ps.len() {
                let j = (i + ps.len() - k) % ps.len();
                prop_assert_eq!(r.reject[i], rr.reject[j]);
                prop_assert_eq!(r.adjusted[i], rr.adjusted[j]);
            }
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&i, &j| ps[i].total_cmp(&ps[j]));
            for w in order.windows(2) {
                prop_assert!(r.adjusted[w[0]] <= r.adjusted[w[1]]);
            }
            prop_assert!(r.adjusted.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn friedman_monotone_invariant(vals in prop::collection::vec(-5.0f64..5.0, 12)) {
            let s = DMatrix::from_row_slice(4, 3, &vals);
            let t = s.map(|v| v.exp() * 3.0 + 1.0);
            prop_assert_eq!(friedman(&s).unwrap().statistic, friedman(&t).unwrap().statistic);
            let swapped = DMatrix::from_fn(4, 3, |i, j| s[(i, 2 - j)]);
            prop_assert!((friedman(&s).unwrap().statistic - friedman(&swapped).unwrap().statistic).abs() < 1e-12);
        }

        #[test]
        fn wilcoxon_swap_symmetric(a in prop::collection::vec(-3i32..3, 1..30), b in prop::collection::vec(-3i32..3, 1..30)) {
            let n = a.len().min(b.len());
            let a: Vec<f64> = a[..n].iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = b[..n].iter().map(|&v| v as f64).collect();
            if let Ok(w) = wilcoxon_signed_rank(&a, &b) {
                let r = wilcoxon_signed_rank(&b, &a).unwrap();
                prop_assert_eq!(w, r);
                prop_assert!(w.p_value > 0.0 && w.p_value <= 1.0);
            }
        }
    }
}
