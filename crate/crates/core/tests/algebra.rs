//! Property tests for the tensor algebra and serialization layers.

use proptest::prelude::*;

use tprod_mor::spectral;
use tprod_mor::tensor3::{bcirc, fold, rel_err, unfold, Tensor3};

fn tensor_strategy(
    n: std::ops::RangeInclusive<usize>,
    m: std::ops::RangeInclusive<usize>,
    s: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Tensor3> {
    (n, m, s).prop_flat_map(|(n, m, s)| {
        proptest::collection::vec(-10.0f64..10.0, n * m * s)
            .prop_map(move |data| Tensor3::from_data(n, m, s, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(t in tensor_strategy(1..=5, 1..=5, 1..=6)) {
        let u = unfold(&t);
        let back = fold(&u.matrix, t.n(), t.m(), t.s()).unwrap();
        prop_assert_eq!(t, back);
    }

    #[test]
    fn fourier_round_trip(t in tensor_strategy(1..=5, 1..=5, 1..=7)) {
        let back = spectral::from_fourier(&spectral::to_fourier(&t)).unwrap();
        prop_assert!(rel_err(&t, &back) < 1e-12);
    }

    #[test]
    fn product_homomorphism(
        a in tensor_strategy(1..=4, 3..=3, 1..=5),
        b in tensor_strategy(3..=3, 1..=4, 1..=5),
    ) {
        // align tube counts by reusing a's
        let s = a.s();
        let b = Tensor3::from_fn(b.n(), b.m(), s, |i, j, k| b.get(i, j, k % b.s()));
        let c = a.tprod(&b).unwrap();
        let lhs = bcirc(&c).matrix;
        let rhs = bcirc(&a).matrix * bcirc(&b).matrix;
        let scale = rhs.norm().max(1e-300);
        prop_assert!((lhs - &rhs).norm() / scale < 1e-10);
    }

    #[test]
    fn transpose_reverses_products(
        a in tensor_strategy(1..=4, 2..=2, 2..=4),
        b in tensor_strategy(2..=2, 1..=4, 2..=4),
    ) {
        let s = a.s();
        let b = Tensor3::from_fn(b.n(), b.m(), s, |i, j, k| b.get(i, j, k % b.s()));
        let lhs = a.tprod(&b).unwrap().ttranspose();
        let rhs = b.ttranspose().tprod(&a.ttranspose()).unwrap();
        prop_assert!(rel_err(&lhs, &rhs) < 1e-12 || lhs.norm() < 1e-12);
    }

    #[test]
    fn t3b_round_trip_bitwise(t in tensor_strategy(1..=4, 1..=4, 1..=5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.t3b");
        tprod_mor::io::write_tensor(&path, &t).unwrap();
        let back = tprod_mor::io::read_tensor(&path).unwrap();
        prop_assert_eq!(t, back);
    }
}
