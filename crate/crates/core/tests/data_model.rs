mod common;

use misreport_core::data::*;
use misreport_core::linalg::Matrix;
use proptest::prelude::*;

/// `(I − F(FᵀF)⁻¹Fᵀ) X` with the 2×2 inverse written out.
fn direct_projection(f: &Matrix, x: &Matrix) -> Matrix {
    let ftf = f.transpose().matmul(f);
    let (a, b, d) = (ftf.get(0, 0), ftf.get(0, 1), ftf.get(1, 1));
    let det = a * d - b * b;
    let inv = Matrix::from_rows(&[[d / det, -b / det], [-b / det, a / det]]).unwrap();
    let hat = f.matmul(&inv).matmul(&f.transpose()).matmul(x);
    let mut out = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            out.set(i, j, x.get(i, j) - hat.get(i, j));
        }
    }
    out
}

fn named(m: Matrix) -> DesignMatrix {
    let names = (0..m.cols()).map(|j| format!("c{j}")).collect();
    DesignMatrix::new(m, names).unwrap()
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn instance() -> impl Strategy<Value = (Vec<bool>, usize, Vec<f64>)> {
    (6usize..40, 1usize..6).prop_flat_map(|(n, p)| {
        (
            proptest::collection::vec(any::<bool>(), n).prop_filter("both groups present", |f| {
                f.iter().any(|&v| v) && f.iter().any(|&v| !v)
            }),
            Just(p),
            proptest::collection::vec(-10.0f64..10.0, n * p),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scaled_weights_sum_to_n(raw in proptest::collection::vec(1e-3f64..1e4, 1..500)) {
        let s = scale_weights(&raw).unwrap();
        let total: f64 = s.values().iter().sum();
        prop_assert!((total - raw.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn scaling_is_scale_invariant(raw in proptest::collection::vec(0.1f64..100.0, 1..200), c in 1e-3f64..1e3) {
        let a = scale_weights(&raw).unwrap();
        let scaled: Vec<f64> = raw.iter().map(|w| w * c).collect();
        let b = scale_weights(&scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn orthogonalization_properties((flags, p, values) in instance()) {
        let n = flags.len();
        let x = Matrix::from_row_major(n, p, values).unwrap();
        let f = subset_basis(&flags);
        let once = orthogonalize_against(&named(x.clone()), &f).unwrap();
        let ftx = f.transpose().matmul(once.matrix());
        prop_assert!(ftx.max_abs() < 1e-8, "max |F'X| = {}", ftx.max_abs());
        let twice = orthogonalize_against(&once, &f).unwrap();
        prop_assert!(max_abs_diff(once.matrix(), twice.matrix()) < 1e-12);
        prop_assert!(max_abs_diff(once.matrix(), &direct_projection(&f, &x)) < 1e-10);
    }
}

#[test]
fn projection_on_random_20_by_4() {
    use rand::Rng;
    let mut rng = misreport_core::rng::stream(4);
    for _ in 0..20 {
        let flags: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let x = Matrix::from_row_major(20, 4, (0..80).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).unwrap();
        let f = subset_basis(&flags);
        let once = orthogonalize_against(&named(x.clone()), &f).unwrap();
        assert!(f.transpose().matmul(once.matrix()).max_abs() < 1e-12);
        let twice = orthogonalize_against(&once, &f).unwrap();
        assert!(max_abs_diff(once.matrix(), twice.matrix()) < 1e-12);
        assert!(max_abs_diff(once.matrix(), &direct_projection(&f, &x)) < 1e-12);
    }
}

#[test]
fn categorical_design_and_row_selection() {
    let ds = SurveyDataset::binary(vec![0, 1, 1, 0], vec![1.0, 2.0, 3.0, 4.0])
        .unwrap()
        .with_column(
            "g",
            Column::categorical(&["a", "b", "c", "b"], vec!["a".into(), "b".into(), "c".into()]).unwrap(),
        )
        .unwrap()
        .with_column("age", Column::Integer(vec![30, 40, 50, 60]))
        .unwrap();
    let d = build_design_matrix(&ds, &Formula::new(["g", "age"])).unwrap();
    assert_eq!(d.column_names(), ["(Intercept)", "gb", "gc", "age"]);
    assert_eq!(d.matrix().row(3), [1.0, 1.0, 0.0, 60.0]);
    let sub = ds.select_rows(&[1, 3]).unwrap();
    assert_eq!(sub.raw_weight(), [2.0, 4.0]);
    let ds_sub = build_design_matrix(&sub, &Formula::new(["age"])).unwrap();
    assert_eq!(ds_sub.matrix().column(1), vec![40.0, 60.0]);
}

#[test]
fn invalid_weights_and_lengths_are_rejected() {
    assert!(scale_weights(&[1.0, 0.0]).is_err());
    assert!(scale_weights(&[1.0, f64::NAN]).is_err());
    assert!(scale_weights(&[]).unwrap().is_empty());
    assert!(SurveyDataset::binary(vec![0, 1], vec![1.0]).is_err());
    let ds = SurveyDataset::binary(vec![0, 1], vec![1.0, 1.0]).unwrap();
    assert!(ds.clone().with_column("x", Column::Real(vec![1.0])).is_err());
    assert!(ds.with_subset(vec![true]).is_err());
}
