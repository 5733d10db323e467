use super::*;
use crate::bench::random_stable_tpds;
use crate::spectral;
use crate::system::Tpds;
use crate::tensor3::{bcirc, rel_err, Tensor3};
use crate::test_util::{rand_tensor, seeded_rng};

fn image_dims() -> ModelDims {
    ModelDims {
        n: 0,
        m: 5,
        l: 5,
        s: 3,
        horizon_t: 10,
        horizon_l: 10,
    }
}

#[test]
fn parameter_count_image_setup() {
    let dims = image_dims();
    let tera: Vec<u64> = (0..=5)
        .map(|i| parameter_count(Method::TEra, &dims, 10 * i, TruncationConvention::PerValue).unwrap())
        .collect();
    assert_eq!(tera, vec![10725, 7425, 4725, 2625, 1125, 225]);
    let era: Vec<u64> = (0..=5)
        .map(|i| parameter_count(Method::Era, &dims, 10 * i, TruncationConvention::PerValue).unwrap())
        .collect();
    assert_eq!(era, vec![32175, 22275, 14175, 7875, 3375, 675]);
}

#[test]
fn parameter_count_tbt_formula() {
    let dims = ModelDims {
        n: 100,
        m: 5,
        l: 5,
        s: 9,
        horizon_t: 0,
        horizon_l: 0,
    };
    assert_eq!(
        parameter_count(Method::TBt, &dims, 55, TruncationConvention::PerValue).unwrap(),
        22275
    );
    // per-tuple convention feeds the baseline the literal k
    assert_eq!(
        parameter_count(Method::Bt, &dims, 55, TruncationConvention::PerTuple).unwrap(),
        (900u64 - 55) * (900 - 55) + (900 - 55) * 45 * 2
    );
    assert!(matches!(
        parameter_count(Method::TBt, &dims, 100, TruncationConvention::PerValue),
        Err(Error::TruncationTooLarge { .. })
    ));
}

#[test]
fn error_bound_basics() {
    let spectrum = crate::tsvd::SingularSpectrum::from_block_sigmas(vec![
        vec![4.0, 2.0, 1.0],
        vec![3.0, 2.5, 0.5],
    ]);
    assert_eq!(error_bound(&spectrum, 0), 0.0);
    // k = 1: max(1.0, 0.5) * 2
    assert_eq!(error_bound(&spectrum, 1), 2.0);
    // k = 2: max(3.0, 3.0) * 2
    assert_eq!(error_bound(&spectrum, 2), 6.0);
    // single block: classical twice-the-tail
    let single = crate::tsvd::SingularSpectrum::from_block_sigmas(vec![vec![4.0, 2.0, 1.0]]);
    assert_eq!(error_bound(&single, 2), 6.0);
}

#[test]
fn bound_is_monotone_in_k() {
    let sys = random_stable_tpds(12, 2, 2, 3, 0.85, 201).unwrap();
    let red = t_bt(&sys, &ReductionConfig::with_k(0)).unwrap();
    let mut last = -1.0;
    for k in 0..=11 {
        let b = error_bound(&red.spectrum, k);
        assert!(b >= last);
        last = b;
    }
}

#[test]
fn tbt_without_truncation_preserves_transfer() {
    let sys = random_stable_tpds(8, 2, 2, 3, 0.8, 202).unwrap();
    let red = t_bt(&sys, &ReductionConfig::with_k(0)).unwrap();
    assert!(red.model.is_tpds());
    assert_eq!(red.kept, 8);
    let err = relative_error(&sys, &red, 128).unwrap();
    assert!(err <= 1e-8, "relative error {}", err);
}

#[test]
fn tbt_single_slice_matches_classical_bt() {
    for seed in [203u64, 204, 205] {
        let sys = random_stable_tpds(10, 2, 2, 1, 0.85, seed).unwrap();
        for k in [0usize, 3] {
            let cfg = ReductionConfig::with_k(k);
            let t = t_bt(&sys, &cfg).unwrap();
            let b = bt_unfolded(&sys, &cfg).unwrap();
            let gap = transfer_gap(&t, &b, 64).unwrap();
            assert!(gap <= 1e-10, "seed {} k {}: gap {}", seed, k, gap);
        }
    }
}

#[test]
fn tbt_error_respects_bound() {
    let sys = random_stable_tpds(30, 3, 3, 5, 0.9, 206).unwrap();
    let cache = transfer_grid(&sys, 256).unwrap();
    for k in [5usize, 10, 15] {
        let red = t_bt(&sys, &ReductionConfig::with_k(k)).unwrap();
        let rel = relative_error_on_grid(&cache, &red).unwrap();
        let budget = red.bound / cache.gmax + 1e-8;
        assert!(rel <= budget, "k {}: {} > {}", k, rel, budget);
    }
}

#[test]
fn tbt_rejects_unstable_input() {
    let sys = Tpds::new(
        Tensor3::identity(3, 2).scale(1.01),
        Tensor3::identity(3, 2),
        Tensor3::identity(3, 2),
    )
    .unwrap();
    assert!(matches!(
        t_bt(&sys, &ReductionConfig::with_k(0)),
        Err(Error::UnstableSystem { .. })
    ));
}

#[test]
fn floor_policies_control_small_tuples() {
    // a system with rapidly decaying hankel spectrum
    let sys = random_stable_tpds(12, 1, 1, 2, 0.5, 207).unwrap();
    let strict = ReductionConfig {
        k: 0,
        floor_policy: FloorPolicy::Strict,
        ..Default::default()
    };
    assert!(matches!(
        t_bt(&sys, &strict),
        Err(Error::NearZeroSingularValue { .. })
    ));

    let shrink = ReductionConfig {
        k: 0,
        floor_policy: FloorPolicy::Shrink,
        ..Default::default()
    };
    let red = t_bt(&sys, &shrink).unwrap();
    assert!(red.kept < 12, "shrink kept {}", red.kept);
    // shrinking keeps the realization accurate to the floor scale
    let err = relative_error(&sys, &red, 128).unwrap();
    assert!(err < 1e-6, "relative error {}", err);

    let proceed = ReductionConfig {
        k: 0,
        floor_policy: FloorPolicy::Proceed,
        ..Default::default()
    };
    let red = t_bt(&sys, &proceed).unwrap();
    assert_eq!(red.kept, 12);
}

#[test]
fn tbpod_single_slice_matches_classical_bpod() {
    for seed in [208u64, 209] {
        let sys = random_stable_tpds(10, 2, 2, 1, 0.8, seed).unwrap();
        // horizons chosen so the hankel base equals the true order: the kept
        // rank stays meaningful for every k
        let cfg = ReductionConfig {
            k: 2,
            horizon_t: 4,
            horizon_l: 4,
            ..Default::default()
        };
        let t = t_bpod(&sys, &cfg).unwrap();
        let b = bpod_unfolded(&sys, &cfg).unwrap();
        let gap = transfer_gap(&t, &b, 64).unwrap();
        assert!(gap <= 1e-9, "seed {}: gap {}", seed, gap);
    }
}

#[test]
fn tbpod_long_horizons_approach_tbt() {
    let sys = random_stable_tpds(8, 2, 2, 3, 0.7, 210).unwrap();
    // time constant ~ 1/(1-rho); horizons comfortably beyond 5x that
    let cfg = ReductionConfig {
        k: 0,
        horizon_t: 40,
        horizon_l: 40,
        floor_policy: FloorPolicy::Shrink,
        ..Default::default()
    };
    let red = t_bpod(&sys, &cfg).unwrap();
    let err = relative_error(&sys, &red, 128).unwrap();
    assert!(err <= 1e-6, "transfer error {}", err);
}

#[test]
fn tbpod_zero_transition_single_step() {
    let mut rng = seeded_rng(211);
    let b = rand_tensor(4, 2, 3, &mut rng);
    let c = rand_tensor(2, 4, 3, &mut rng);
    let sys = Tpds::new(Tensor3::zeros(4, 4, 3), b, c).unwrap();
    let cfg = ReductionConfig {
        k: 0,
        horizon_t: 1,
        horizon_l: 1,
        floor_policy: FloorPolicy::Shrink,
        ..Default::default()
    };
    let red = t_bpod(&sys, &cfg).unwrap();
    // hand-propagated snapshots: with A = 0 only Z_0 = C * B survives, and
    // the reduced model must reproduce it exactly
    let reference = sys.markov(2).unwrap();
    let errs = markov_reconstruction_errors(&red, &reference, 1).unwrap();
    assert!(errs[0] <= 1e-8, "Z0 error {}", errs[0]);
}

#[test]
fn hankel_layout_and_shift() {
    let sys = random_stable_tpds(5, 2, 2, 3, 0.8, 212).unwrap();
    let markov = sys.markov(8).unwrap();
    let hk = hankel_from_markov(&markov, 2, 3).unwrap();
    assert_eq!(hk.h.dims(), (2 * 4, 2 * 3, 3));
    let shifted = hk.shifted.as_ref().unwrap();
    for bi in 0..=3usize {
        for bj in 0..=2usize {
            let got = hk.h.row_section(bi * 2..bi * 2 + 2).lateral_cols(bj * 2..bj * 2 + 2);
            assert!(rel_err(markov.entry(bi + bj), &got) < 1e-15);
            let got = shifted
                .row_section(bi * 2..bi * 2 + 2)
                .lateral_cols(bj * 2..bj * 2 + 2);
            assert!(rel_err(markov.entry(bi + bj + 1), &got) < 1e-15);
        }
    }
    assert!(matches!(
        hankel_from_markov(&markov, 4, 3),
        Err(Error::InsufficientSnapshots { .. })
    ));
}

#[test]
fn tera_exact_realization_at_full_base() {
    // true order equals the hankel base: no rank deficiency anywhere
    let sys = random_stable_tpds(6, 2, 2, 3, 0.8, 213).unwrap();
    let cfg = ReductionConfig {
        k: 0,
        horizon_t: 2,
        horizon_l: 2,
        ..Default::default()
    };
    let markov = sys.markov(cfg.horizon_t + cfg.horizon_l + 2).unwrap();
    let red = t_era(&markov, &cfg).unwrap();
    assert_eq!(red.kept, 6);
    let errs = markov_reconstruction_errors(&red, &markov, markov.len()).unwrap();
    for (j, e) in errs.iter().enumerate() {
        assert!(*e <= 1e-8, "markov {} error {}", j, e);
    }
}

#[test]
fn tera_exact_realization_below_base_with_shrink() {
    // true order 4 < hankel base 9: trailing tuples are numerically zero and
    // the shrink policy must drop them
    let sys = random_stable_tpds(4, 3, 3, 2, 0.75, 214).unwrap();
    let cfg = ReductionConfig {
        k: 0,
        horizon_t: 2,
        horizon_l: 2,
        floor_policy: FloorPolicy::Shrink,
        ..Default::default()
    };
    let markov = sys.markov(cfg.horizon_t + cfg.horizon_l + 2).unwrap();
    let red = t_era(&markov, &cfg).unwrap();
    assert_eq!(red.kept, 4, "detected hidden order");
    let errs = markov_reconstruction_errors(&red, &markov, markov.len()).unwrap();
    for e in &errs {
        assert!(*e <= 1e-8, "error {}", e);
    }
}

#[test]
fn tera_single_slice_matches_classical_era() {
    for seed in [215u64, 216] {
        let sys = random_stable_tpds(10, 2, 2, 1, 0.8, seed).unwrap();
        let cfg = ReductionConfig {
            k: 1,
            horizon_t: 4,
            horizon_l: 4,
            ..Default::default()
        };
        let markov = sys.markov(cfg.horizon_t + cfg.horizon_l + 2).unwrap();
        let t = t_era(&markov, &cfg).unwrap();
        let b = era_unfolded(&markov, &cfg).unwrap();
        let gap = transfer_gap(&t, &b, 64).unwrap();
        assert!(gap <= 1e-9, "seed {}: gap {}", seed, gap);
    }
}

#[test]
fn baselines_flag_lost_structure() {
    let sys = random_stable_tpds(6, 2, 2, 3, 0.8, 217).unwrap();
    let cfg = ReductionConfig::with_k(2);
    let t = t_bt(&sys, &cfg).unwrap();
    assert!(t.model.is_tpds());
    assert!(t.transform_p.is_some() && t.transform_q.is_some());
    let b = bt_unfolded(&sys, &cfg).unwrap();
    assert!(!b.model.is_tpds());
    if let ReducedModel::Linear(lin) = &b.model {
        assert_eq!(lin.order(), 6 * 3 - 2 * 3);
        assert_eq!(lin.inputs(), 6);
        assert_eq!(lin.outputs(), 6);
    }
    // tensor outputs are real and foldable by construction
    if let ReducedModel::Tpds(red) = &t.model {
        assert!(red.a().is_finite());
        assert_eq!(red.a().s(), 3);
    }
}

#[test]
fn relative_error_of_zero_system_is_one() {
    let sys = random_stable_tpds(6, 2, 2, 3, 0.8, 218).unwrap();
    let zero = Reduction {
        model: ReducedModel::Tpds(
            Tpds::new(
                Tensor3::zeros(2, 2, 3),
                Tensor3::zeros(2, 2, 3),
                Tensor3::zeros(2, 2, 3),
            )
            .unwrap(),
        ),
        transform_p: None,
        transform_q: None,
        spectrum: crate::tsvd::SingularSpectrum::from_block_sigmas(vec![vec![1.0]]),
        bound: 0.0,
        method: Method::TBt,
        wall_time: std::time::Duration::ZERO,
        parameter_count: 0,
        kept: 0,
    };
    let err = relative_error(&sys, &zero, 64).unwrap();
    assert!((err - 1.0).abs() < 1e-12);
}

#[test]
fn linear_transfer_eval_matches_dense_resolvent() {
    let mut rng = seeded_rng(219);
    let n = 12;
    let a = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) * 0.06;
    let b = nalgebra::DMatrix::<f64>::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let c = nalgebra::DMatrix::<f64>::from_fn(2, n, |_, _| rng.random_range(-1.0..1.0));
    let lin = LinearSystem::new(a.clone(), b.clone(), c.clone()).unwrap();
    let eval = lin.transfer_eval();
    for omega in [0.0f64, 0.4, -1.3, 3.1] {
        let z = C64::new(omega.cos(), omega.sin());
        let got = eval.eval(z).unwrap();
        let mut zi = a.map(|v| C64::new(-v, 0.0));
        for i in 0..n {
            zi[(i, i)] += z;
        }
        let dense = c.map(|v| C64::new(v, 0.0))
            * zi.lu().solve(&b.map(|v| C64::new(v, 0.0))).unwrap();
        assert!((got - &dense).norm() / dense.norm() < 1e-11);
    }
}

#[test]
fn unfolded_transfer_assembly_matches_bcirc() {
    // bcirc_from_blocks must reproduce the actual block circulant of a real
    // tensor (the identity used when comparing baselines to the full model)
    let mut rng = seeded_rng(220);
    let t = rand_tensor(3, 2, 5, &mut rng);
    let f = spectral::to_fourier(&t);
    let assembled = spectral::bcirc_from_blocks(f.blocks());
    let direct = bcirc(&t).matrix;
    let mut worst: f64 = 0.0;
    for i in 0..15 {
        for j in 0..10 {
            worst = worst.max((assembled[(i, j)] - C64::new(direct[(i, j)], 0.0)).norm());
        }
    }
    assert!(worst < 1e-12);
}

#[test]
fn tbpod_and_tera_gap_is_a_diagnostic() {
    // the two data-driven reductions need not agree; the gap is reported,
    // not asserted against a bound
    let sys = random_stable_tpds(6, 2, 2, 3, 0.8, 221).unwrap();
    // hankel base is 18; keep the reduced order below the true order 6
    let cfg = ReductionConfig {
        k: 13,
        horizon_t: 8,
        horizon_l: 8,
        ..Default::default()
    };
    let bp = t_bpod(&sys, &cfg).unwrap();
    let markov = sys.markov(cfg.horizon_t + cfg.horizon_l + 2).unwrap();
    let er = t_era(&markov, &cfg).unwrap();
    let gap = transfer_gap(&bp, &er, 64).unwrap();
    assert!(gap.is_finite() && gap >= 0.0);
}

#[test]
fn reduced_wall_time_is_recorded() {
    let sys = random_stable_tpds(6, 2, 2, 3, 0.8, 222).unwrap();
    let red = t_bt(&sys, &ReductionConfig::with_k(1)).unwrap();
    assert!(red.wall_time > std::time::Duration::ZERO);
    assert_eq!(red.parameter_count, tensor_param_count(5, 2, 2, 3));
}

use crate::spectral::C64;
use rand::Rng;
