//! Algebraic properties of adaptation matrices on random inputs.

use chanadapt::pipeline::compose;
use chanadapt::{AdaptationMatrix, DMatrix, DVector, Method, Signal, TargetDescriptor};
use proptest::prelude::*;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn matrix(values: &[f64], rows: usize, cols: usize, src: &str, tgt: &str) -> AdaptationMatrix {
    AdaptationMatrix::new(
        DMatrix::from_row_slice(rows, cols, &values[..rows * cols]),
        Method::Ssi,
        &labels(src, cols),
        TargetDescriptor::Labels(labels(tgt, rows)),
    )
    .unwrap()
}

fn signal(values: &[f64], chans: usize, n: usize, prefix: &str) -> Signal {
    Signal::new(DMatrix::from_row_slice(chans, n, &values[..chans * n]), 100.0, &labels(prefix, chans)).unwrap()
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_is_linear(
        m in prop::collection::vec(-2.0f64..2.0, 12),
        x in prop::collection::vec(-5.0f64..5.0, 40),
        y in prop::collection::vec(-5.0f64..5.0, 40),
        a in -3.0f64..3.0,
    ) {
        let mat = matrix(&m, 3, 4, "S", "T");
        let (xs, ys) = (signal(&x, 4, 10, "S"), signal(&y, 4, 10, "S"));
        let combo = Signal::new(xs.data() * a + ys.data(), 100.0, xs.labels()).unwrap();
        let lhs = mat.apply(&combo).unwrap();
        let rhs = mat.apply(&xs).unwrap().data() * a + mat.apply(&ys).unwrap().data();
        prop_assert!(close(lhs.data(), &rhs, 1e-12));
    }

    #[test]
    fn compose_is_associative_and_matches_stepwise(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 9),
        c in prop::collection::vec(-2.0f64..2.0, 12),
        x in prop::collection::vec(-5.0f64..5.0, 32),
    ) {
        let (ma, mb, mc) = (matrix(&a, 2, 3, "B", "A"), matrix(&b, 3, 3, "C", "B"), matrix(&c, 3, 4, "D", "C"));
        let left = compose(&compose(&ma, &mb).unwrap(), &mc).unwrap();
        let right = compose(&ma, &compose(&mb, &mc).unwrap()).unwrap();
        prop_assert!(close(left.matrix(), right.matrix(), 1e-12));
        let xs = signal(&x, 4, 8, "D");
        let stepwise = ma.apply(&mb.apply(&mc.apply(&xs).unwrap()).unwrap()).unwrap();
        prop_assert!(close(left.apply(&xs).unwrap().data(), stepwise.data(), 1e-12));
        prop_assert_eq!(left.source_labels(), mc.source_labels());
        prop_assert_eq!(left.target_labels(), ma.target_labels());
    }

    #[test]
    fn input_channel_order_does_not_matter(
        m in prop::collection::vec(-2.0f64..2.0, 15),
        x in prop::collection::vec(-5.0f64..5.0, 30),
        rot in 0usize..5,
    ) {
        let mat = matrix(&m, 3, 5, "S", "T");
        let xs = signal(&x, 5, 6, "S");
        let order: Vec<String> = (0..5).map(|i| format!("S{}", (i + rot) % 5)).collect();
        let shuffled = xs.reorder(&order).unwrap();
        let (out, reordered) = mat.apply_reporting(&shuffled).unwrap();
        prop_assert_eq!(reordered, rot != 0);
        let direct = mat.apply(&xs).unwrap();
        prop_assert_eq!(out.data(), direct.data());
    }

    #[test]
    fn bias_is_added_once_per_sample(
        m in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-1.0f64..1.0, 2),
        x in prop::collection::vec(-5.0f64..5.0, 15),
    ) {
        let plain = matrix(&m, 2, 3, "S", "T");
        let biased = plain.clone().with_bias(DVector::from_vec(b.clone())).unwrap();
        let xs = signal(&x, 3, 5, "S");
        let diff = biased.apply(&xs).unwrap().data() - plain.apply(&xs).unwrap().data();
        for (r, row) in diff.row_iter().enumerate() {
            prop_assert!(row.iter().all(|v| (v - b[r]).abs() < 1e-12));
        }
    }
}

#[test]
fn identity_and_zero_pad_are_exact() {
    let x = signal(&[1.5, -0.0, 3.25, f64::MIN_POSITIVE, 7.0, -2.0], 2, 3, "S");
    let id = AdaptationMatrix::identity(x.labels()).unwrap();
    let y = id.apply(&x).unwrap();
    assert!(y.data().iter().zip(x.data().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let zp = AdaptationMatrix::zero_pad(x.labels(), &["S1", "NEW", "S0"]).unwrap();
    let z = zp.apply(&x).unwrap();
    assert_eq!(z.data().row(0), x.data().row(1));
    assert!(z.data().row(1).iter().all(|&v| v == 0.0));
    assert_eq!(z.data().row(2), x.data().row(0));
}
