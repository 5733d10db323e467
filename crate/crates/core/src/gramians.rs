//! Controllability and observability Gramians.
//!
//! Exact Gramians solve one discrete Lyapunov (Stein) equation per Fourier
//! block; empirical Gramians are `X * X^T` built from impulse-response
//! snapshots. Factorizations and the controllability/observability predicates
//! run per block as well.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{self, C64, FourierBlocks};
use crate::stein;
use crate::system::Tpds;
use crate::tensor3::Tensor3;

/// Eigenvalue threshold (relative to the largest) for the positivity
/// predicates.
pub const GRAMIAN_EIG_TOL: f64 = 1e-10;

/// PSD repair window: block eigenvalues in `[-PSD_REPAIR_REL * scale, 0)` are
/// clamped to zero; anything more negative is an error.
pub const PSD_REPAIR_REL: f64 = 1e-9;

/// Default relative tuple-norm tolerance for numerical-rank factor truncation.
pub const DEFAULT_FACTOR_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramianKind {
    Controllability,
    Observability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramianOrigin {
    Lyapunov,
    Empirical,
}

/// A (numerically) T-symmetric PSD Gramian tensor.
#[derive(Clone, Debug)]
pub struct Gramian {
    pub w: Tensor3,
    pub kind: GramianKind,
    pub origin: GramianOrigin,
}

/// Low-rank factor `Z` with `W ~ Z * Z^T`.
#[derive(Clone, Debug)]
pub struct GramianFactor {
    pub z: Tensor3,
    /// Number of retained tuples.
    pub rank: usize,
}

/// How many tuples the factorization keeps.
#[derive(Clone, Copy, Debug)]
pub enum FactorRank {
    /// Keep tuples whose norm exceeds `rel * max_tuple_norm`.
    Numerical(f64),
    /// Keep all `n` tuples (zeros included).
    Full,
}

/// Impulse-response snapshots, channel-major: the column block of channel `j`
/// holds states for times `0..=horizon`.
#[derive(Clone, Debug)]
pub struct SnapshotTensor {
    pub x: Tensor3,
    pub horizon: usize,
    pub channels: usize,
    pub side: GramianKind,
}

/// Solves the per-block Stein equations of the requested Gramian.
pub fn lyapunov_gramian(sys: &Tpds, kind: GramianKind) -> Result<Gramian> {
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 - crate::system::STABILITY_MARGIN {
        return Err(Error::UnstableSystem { radius });
    }
    let fa = spectral::to_fourier(sys.a());
    let fin = match kind {
        GramianKind::Controllability => spectral::to_fourier(sys.b()),
        GramianKind::Observability => spectral::to_fourier(sys.c()),
    };
    let s = sys.s();
    let half = par::try_map_indexed(spectral::half_count(s), |j| {
        let a = fa.block(j);
        match kind {
            GramianKind::Controllability => {
                let b = fin.block(j);
                stein::solve_stein_complex(a, &(b * b.adjoint()), j)
            }
            GramianKind::Observability => {
                let c = fin.block(j);
                let at = a.adjoint();
                stein::solve_stein_complex(&at, &(c.adjoint() * c), j)
            }
        }
    })?;
    let w = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, half)?)?;
    Ok(Gramian {
        w,
        kind,
        origin: GramianOrigin::Lyapunov,
    })
}

/// Both exact Gramians at once: one Schur decomposition per block serves the
/// controllability equation directly and the observability equation through
/// the adjoint of the Schur form.
pub fn lyapunov_pair(sys: &Tpds) -> Result<(Gramian, Gramian)> {
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 - crate::system::STABILITY_MARGIN {
        return Err(Error::UnstableSystem { radius });
    }
    let fa = spectral::to_fourier(sys.a());
    let fb = spectral::to_fourier(sys.b());
    let fc = spectral::to_fourier(sys.c());
    let s = sys.s();
    let per = par::try_map_indexed(spectral::half_count(s), |j| {
        let a = fa.block(j);
        let b = fb.block(j);
        let c = fc.block(j);
        let schur = stein::complex_schur(a);
        let wc = stein::solve_stein_checked(schur.as_ref(), a, &(b * b.adjoint()), j)?;
        let at = a.adjoint();
        let adj = schur.as_ref().map(|s| s.adjoint());
        let wo = stein::solve_stein_checked(adj.as_ref(), &at, &(c.adjoint() * c), j)?;
        Ok((wc, wo))
    })?;
    let (wc_blocks, wo_blocks): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    let wc = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, wc_blocks)?)?;
    let wo = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, wo_blocks)?)?;
    Ok((
        Gramian {
            w: wc,
            kind: GramianKind::Controllability,
            origin: GramianOrigin::Lyapunov,
        },
        Gramian {
            w: wo,
            kind: GramianKind::Observability,
            origin: GramianOrigin::Lyapunov,
        },
    ))
}

/// Empirical Gramian `X * X^T` from snapshots.
pub fn empirical_gramian(snapshots: &SnapshotTensor) -> Result<Gramian> {
    let fx = spectral::to_fourier(&snapshots.x);
    let half = par::map_indexed(spectral::half_count(snapshots.x.s()), |j| {
        let b = fx.block(j);
        b * b.adjoint()
    });
    let w = spectral::from_fourier(&FourierBlocks::from_half_blocks(snapshots.x.s(), half)?)?;
    Ok(Gramian {
        w,
        kind: snapshots.side,
        origin: GramianOrigin::Empirical,
    })
}

/// Propagates per-channel impulse responses over `0..=horizon` and arranges
/// them channel-major. Uses the system's own control tensor as the impulse
/// (call on [`Tpds::adjoint`] for the observability side).
pub fn impulse_snapshots(sys: &Tpds, horizon: usize) -> Result<SnapshotTensor> {
    let (n, m, s) = sys.b().dims();
    let fa = spectral::to_fourier(sys.a());
    let fb = spectral::to_fourier(sys.b());
    let steps = horizon + 1;
    let half = par::map_indexed(spectral::half_count(s), |j| {
        let mut state = fb.block(j).clone();
        let mut x = DMatrix::<C64>::zeros(n, m * steps);
        for t in 0..steps {
            // channel-major: channel c lands in column c * steps + t
            for c in 0..m {
                x.set_column(c * steps + t, &state.column(c));
            }
            if t + 1 < steps {
                state = fa.block(j) * state;
            }
        }
        x
    });
    let x = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, half)?)?;
    Ok(SnapshotTensor {
        x,
        horizon,
        channels: m,
        side: GramianKind::Controllability,
    })
}

/// Marks a snapshot tensor as belonging to the other Gramian side (after
/// simulating the adjoint system).
pub fn relabel(snapshots: SnapshotTensor, side: GramianKind) -> SnapshotTensor {
    SnapshotTensor { side, ..snapshots }
}

pub(crate) struct BlockEigens {
    /// Per half-block eigenvalues, descending.
    pub values: Vec<Vec<f64>>,
    /// Per half-block eigenvectors, column-aligned with `values`.
    pub vectors: Vec<DMatrix<C64>>,
}

/// Hermitian eigendecomposition of each (half) Fourier block of a T-symmetric
/// tensor, sorted descending so tuples stay index-aligned.
pub(crate) fn hermitian_block_eigens(w: &Tensor3) -> Result<BlockEigens> {
    let s = w.s();
    let f = spectral::to_fourier(w);
    let per = par::map_indexed(spectral::half_count(s), |j| {
        let h = (f.block(j) + f.block(j).adjoint()).scale(0.5);
        let (hn, hm) = h.shape();
        let se = h.symmetric_eigen();
        let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
        let values: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vectors = DMatrix::<C64>::zeros(hn, hm);
        for (col, &i) in idx.iter().enumerate() {
            vectors.set_column(col, &se.eigenvectors.column(i));
        }
        (values, vectors)
    });
    let mut values = Vec::with_capacity(per.len());
    let mut vectors = Vec::with_capacity(per.len());
    for (va, ve) in per {
        values.push(va);
        vectors.push(ve);
    }
    Ok(BlockEigens { values, vectors })
}

/// PSD-repairs block eigenvalues in place: clamps the roundoff window to
/// zero, errors on anything more negative.
pub(crate) fn psd_repair(eigens: &mut BlockEigens) -> Result<f64> {
    let scale = eigens
        .values
        .iter()
        .flat_map(|b| b.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let window = PSD_REPAIR_REL * scale;
    for (j, block) in eigens.values.iter_mut().enumerate() {
        for v in block.iter_mut() {
            if *v < -window {
                return Err(Error::IndefiniteGramian {
                    block: j,
                    eigenvalue: *v,
                });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(scale)
}

/// Factorizes `W ~ Z * Z^T` through the per-block Hermitian eigendecomposition
/// (the T-SVD of a T-symmetric PSD tensor, up to the PSD repair of roundoff).
pub fn factor(w: &Gramian, rank: FactorRank) -> Result<GramianFactor> {
    let (n, _, s) = w.w.dims();
    let mut eigens = hermitian_block_eigens(&w.w)?;
    psd_repair(&mut eigens)?;

    let tuple_norms: Vec<f64> = (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for j in 0..s {
                let src = if j < spectral::half_count(s) { j } else { s - j };
                acc += eigens.values[src][t] * eigens.values[src][t];
            }
            (acc / s as f64).sqrt()
        })
        .collect();
    let p = match rank {
        FactorRank::Full => n,
        FactorRank::Numerical(rel) => {
            let max = tuple_norms.first().copied().unwrap_or(0.0);
            tuple_norms.iter().take_while(|t| **t > rel * max).count().max(1)
        }
    };

    let half: Vec<DMatrix<C64>> = (0..spectral::half_count(s))
        .map(|j| {
            let mut z = DMatrix::<C64>::zeros(n, p);
            for t in 0..p {
                let scale = C64::new(eigens.values[j][t].sqrt(), 0.0);
                z.set_column(t, &(eigens.vectors[j].column(t) * scale));
            }
            z
        })
        .collect();
    let z = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, half)?)?;
    Ok(GramianFactor { z, rank: p })
}

fn positivity_predicate(sys: &Tpds, kind: GramianKind) -> Result<bool> {
    let g = lyapunov_gramian(sys, kind)?;
    let mut eigens = hermitian_block_eigens(&g.w)?;
    // the predicate tolerates (and zeroes) the same roundoff window
    let _ = psd_repair(&mut eigens);
    let max = eigens
        .values
        .iter()
        .flat_map(|b| b.iter())
        .fold(0.0f64, |acc, v| acc.max(*v));
    Ok(eigens
        .values
        .iter()
        .flat_map(|b| b.iter())
        .all(|v| *v > GRAMIAN_EIG_TOL * max))
}

/// True iff every Fourier-block eigenvalue of the controllability Gramian is
/// positive (above the relative threshold).
pub fn is_controllable(sys: &Tpds) -> Result<bool> {
    positivity_predicate(sys, GramianKind::Controllability)
}

/// Observability counterpart of [`is_controllable`].
pub fn is_observable(sys: &Tpds) -> Result<bool> {
    positivity_predicate(sys, GramianKind::Observability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor3::{bcirc, rel_err};
    use crate::test_util::{rand_tensor, seeded_rng};

    fn random_stable(n: usize, m: usize, l: usize, s: usize, rho: f64, seed: u64) -> Tpds {
        let mut rng = seeded_rng(seed);
        let a = rand_tensor(n, n, s, &mut rng);
        let sys = Tpds::new(
            a,
            rand_tensor(n, m, s, &mut rng),
            rand_tensor(l, n, s, &mut rng),
        )
        .unwrap();
        let radius = sys.spectral_radius().unwrap();
        Tpds::new(
            sys.a().scale(rho / radius),
            sys.b().clone(),
            sys.c().clone(),
        )
        .unwrap()
    }

    #[test]
    fn zero_transition_gives_bbt() {
        let mut rng = seeded_rng(81);
        let b = rand_tensor(4, 2, 3, &mut rng);
        let c = rand_tensor(2, 4, 3, &mut rng);
        let sys = Tpds::new(Tensor3::zeros(4, 4, 3), b.clone(), c).unwrap();
        let g = lyapunov_gramian(&sys, GramianKind::Controllability).unwrap();
        let expected = b.tprod(&b.ttranspose()).unwrap();
        assert!(rel_err(&expected, &g.w) < 1e-12);
    }

    #[test]
    fn single_slice_matches_matrix_lyapunov() {
        let sys = random_stable(5, 2, 2, 1, 0.8, 82);
        let g = lyapunov_gramian(&sys, GramianKind::Controllability).unwrap();
        // matrix oracle by long summation
        let a = sys.a().slice_owned(0);
        let b = sys.b().slice_owned(0);
        let mut acc = &b * b.transpose();
        let mut pow = a.clone();
        for _ in 0..2000 {
            acc = &acc + &pow * &b * b.transpose() * pow.transpose();
            pow = &pow * &a;
            if pow.norm() < 1e-14 {
                break;
            }
        }
        assert!((g.w.slice_owned(0) - &acc).norm() / acc.norm() < 1e-9);
    }

    #[test]
    fn gramian_solves_tensor_and_unfolded_equations() {
        let sys = random_stable(6, 2, 2, 3, 0.85, 83);
        for kind in [GramianKind::Controllability, GramianKind::Observability] {
            let g = lyapunov_gramian(&sys, kind).unwrap();
            // T-symmetry and PSD-ish
            assert!(g.w.sub(&g.w.ttranspose()).unwrap().norm() <= 1e-9 * g.w.norm());
            let (w, a, rhs) = match kind {
                GramianKind::Controllability => (
                    &g.w,
                    sys.a().clone(),
                    sys.b().tprod(&sys.b().ttranspose()).unwrap(),
                ),
                GramianKind::Observability => (
                    &g.w,
                    sys.a().ttranspose(),
                    sys.c().ttranspose().tprod(sys.c()).unwrap(),
                ),
            };
            let awa = a.tprod(w).unwrap().tprod(&a.ttranspose()).unwrap();
            let residual = w.sub(&awa).unwrap().sub(&rhs).unwrap();
            assert!(residual.norm() <= 1e-9 * rhs.norm());

            // unfolded equation residual (the materialized identity)
            let xw = bcirc(w).matrix;
            let xa = bcirc(&a).matrix;
            let xr = bcirc(&rhs).matrix;
            let res = &xw - &xa * &xw * xa.transpose() - &xr;
            assert!(res.norm() <= 1e-9 * xr.norm());
        }
    }

    #[test]
    fn per_block_solution_matches_materialized_stein() {
        let sys = random_stable(5, 2, 2, 4, 0.8, 84);
        let g = lyapunov_gramian(&sys, GramianKind::Controllability).unwrap();
        let xa = bcirc(sys.a()).matrix;
        let xb = bcirc(sys.b()).matrix;
        let q = &xb * xb.transpose();
        let dense = crate::stein::solve_stein_real(&xa, &q).unwrap();
        let got = bcirc(&g.w).matrix;
        assert!((got - &dense).norm() / dense.norm() < 1e-8);
    }

    #[test]
    fn snapshots_are_channel_major() {
        let sys = random_stable(3, 2, 2, 2, 0.7, 85);
        let snap = impulse_snapshots(&sys, 2).unwrap();
        assert_eq!(snap.x.dims(), (3, 6, 2));
        // channel j, time t lives in column j * (T + 1) + t
        let b0 = sys.b().lateral_cols(0..1);
        let b1 = sys.b().lateral_cols(1..2);
        let ab0 = sys.a().tprod(&b0).unwrap();
        let ab1 = sys.a().tprod(&b1).unwrap();
        assert!(rel_err(&b0, &snap.x.lateral_cols(0..1)) < 1e-12);
        assert!(rel_err(&ab0, &snap.x.lateral_cols(1..2)) < 1e-10);
        assert!(rel_err(&b1, &snap.x.lateral_cols(3..4)) < 1e-12);
        assert!(rel_err(&ab1, &snap.x.lateral_cols(4..5)) < 1e-10);
    }

    #[test]
    fn identity_transition_repeats_control_columns() {
        let mut rng = seeded_rng(86);
        let b = rand_tensor(3, 2, 2, &mut rng);
        let sys = Tpds::new(Tensor3::identity(3, 2), b.clone(), rand_tensor(1, 3, 2, &mut rng)).unwrap();
        let snap = impulse_snapshots(&sys, 2).unwrap();
        for c in 0..2 {
            for t in 0..3 {
                let col = snap.x.lateral_cols(c * 3 + t..c * 3 + t + 1);
                let expected = b.lateral_cols(c..c + 1);
                assert!(rel_err(&expected, &col) < 1e-10);
            }
        }
    }

    #[test]
    fn single_snapshot_gramian_is_bbt() {
        let mut rng = seeded_rng(87);
        let b = rand_tensor(4, 2, 3, &mut rng);
        let sys = Tpds::new(Tensor3::zeros(4, 4, 3), b.clone(), rand_tensor(1, 4, 3, &mut rng)).unwrap();
        let snap = impulse_snapshots(&sys, 0).unwrap();
        let g = empirical_gramian(&snap).unwrap();
        let expected = b.tprod(&b.ttranspose()).unwrap();
        assert!(rel_err(&expected, &g.w) < 1e-12);
    }

    #[test]
    fn empirical_gramian_matches_unfolded_snapshot_oracle() {
        let sys = random_stable(4, 2, 2, 3, 0.75, 88);
        let horizon = 6;
        let snap = impulse_snapshots(&sys, horizon).unwrap();
        let g = empirical_gramian(&snap).unwrap();

        // oracle: snapshots of the unfolded system with state matrix
        // bcirc(A), control bcirc(B); X X^T is permutation-invariant so the
        // column order does not matter
        let xa = bcirc(sys.a()).matrix;
        let xb = bcirc(sys.b()).matrix;
        let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
        for c in 0..xb.ncols() {
            let mut v = xb.column(c).into_owned();
            for _ in 0..=horizon {
                cols.push(v.clone());
                v = &xa * v;
            }
        }
        let x_mat = nalgebra::DMatrix::from_columns(&cols);
        let dense = &x_mat * x_mat.transpose();
        let got = bcirc(&g.w).matrix;
        assert!((got - &dense).norm() / dense.norm() < 1e-9);
    }

    #[test]
    fn empirical_converges_to_lyapunov() {
        let sys = random_stable(6, 2, 2, 3, 0.8, 89);
        let exact = lyapunov_gramian(&sys, GramianKind::Controllability).unwrap();
        let snap = impulse_snapshots(&sys, 200).unwrap();
        let emp = empirical_gramian(&snap).unwrap();
        assert!(rel_err(&exact.w, &emp.w) <= 1e-3);

        // error decreases as the horizon doubles (10% jitter allowance)
        let mut last = f64::INFINITY;
        for t in [12usize, 24, 48, 96] {
            let e = empirical_gramian(&impulse_snapshots(&sys, t).unwrap()).unwrap();
            let err = rel_err(&exact.w, &e.w);
            assert!(err <= last * 1.1, "horizon {}: {} vs {}", t, err, last);
            last = err;
        }
    }

    #[test]
    fn factor_of_identity_gramian() {
        let g = Gramian {
            w: Tensor3::identity(4, 3),
            kind: GramianKind::Controllability,
            origin: GramianOrigin::Lyapunov,
        };
        let f = factor(&g, FactorRank::Numerical(DEFAULT_FACTOR_RANK_TOL)).unwrap();
        assert_eq!(f.rank, 4);
        let rec = f.z.tprod(&f.z.ttranspose()).unwrap();
        assert!(rel_err(&g.w, &rec) < 1e-10);
    }

    #[test]
    fn factor_reconstructs_and_detects_rank() {
        let mut rng = seeded_rng(90);
        let b = rand_tensor(5, 2, 3, &mut rng);
        let w = b.tprod(&b.ttranspose()).unwrap();
        let g = Gramian {
            w: w.clone(),
            kind: GramianKind::Controllability,
            origin: GramianOrigin::Empirical,
        };
        let f = factor(&g, FactorRank::Numerical(DEFAULT_FACTOR_RANK_TOL)).unwrap();
        assert_eq!(f.rank, 2, "built from an n x 2 x s factor");
        let rec = f.z.tprod(&f.z.ttranspose()).unwrap();
        assert!(rel_err(&w, &rec) <= 1e-10);

        let full = factor(&g, FactorRank::Full).unwrap();
        assert_eq!(full.rank, 5);
        let rec = full.z.tprod(&full.z.ttranspose()).unwrap();
        assert!(rel_err(&w, &rec) <= 1e-10);
    }

    #[test]
    fn controllability_predicates() {
        // zero control: not controllable
        let mut rng = seeded_rng(91);
        let a = rand_tensor(4, 4, 3, &mut rng).scale(0.1);
        let sys = Tpds::new(
            a.clone(),
            Tensor3::zeros(4, 2, 3),
            rand_tensor(2, 4, 3, &mut rng),
        )
        .unwrap();
        assert!(!is_controllable(&sys).unwrap());

        // full random control and output: both predicates hold
        let sys = random_stable(4, 2, 2, 3, 0.8, 92);
        assert!(is_controllable(&sys).unwrap());
        assert!(is_observable(&sys).unwrap());
        // oracle: unfolded gramian of the unfolded system is positive definite
        let xa = bcirc(sys.a()).matrix;
        let xb = bcirc(sys.b()).matrix;
        let dense = crate::stein::solve_stein_real(&xa, &(&xb * xb.transpose())).unwrap();
        let min_eig = dense.symmetric_eigen().eigenvalues.min();
        assert!(min_eig > 0.0);
    }

    #[test]
    fn decoupled_zero_input_block_is_uncontrollable() {
        // state 4 is driven by nothing: B row zero and A row/col decoupled
        let mut rng = seeded_rng(93);
        let mut a = rand_tensor(4, 4, 2, &mut rng).scale(0.15);
        let mut b = rand_tensor(4, 2, 2, &mut rng);
        for k in 0..2 {
            for j in 0..4 {
                a.set(3, j, k, 0.0);
                a.set(j, 3, k, 0.0);
            }
            a.set(3, 3, k, if k == 0 { 0.5 } else { 0.0 });
            b.set(3, 0, k, 0.0);
            b.set(3, 1, k, 0.0);
        }
        let sys = Tpds::new(a, b, rand_tensor(2, 4, 2, &mut rng)).unwrap();
        assert!(!is_controllable(&sys).unwrap());
        // cross-check against the unfolded gramian rank
        let xa = bcirc(sys.a()).matrix;
        let xb = bcirc(sys.b()).matrix;
        let dense = crate::stein::solve_stein_real(&xa, &(&xb * xb.transpose())).unwrap();
        let eigs = dense.symmetric_eigen().eigenvalues;
        let max = eigs.max();
        assert!(eigs.iter().any(|l| *l <= GRAMIAN_EIG_TOL * max));
    }

    #[test]
    fn unstable_system_is_rejected() {
        let sys = Tpds::new(
            Tensor3::identity(3, 2).scale(1.2),
            Tensor3::zeros(3, 1, 2),
            Tensor3::zeros(1, 3, 2),
        )
        .unwrap();
        assert!(matches!(
            lyapunov_gramian(&sys, GramianKind::Controllability),
            Err(Error::UnstableSystem { .. })
        ));
    }

    #[test]
    fn adjoint_snapshots_reproduce_observability_gramian() {
        let sys = random_stable(5, 2, 3, 3, 0.75, 94);
        let exact = lyapunov_gramian(&sys, GramianKind::Observability).unwrap();
        let snap = relabel(
            impulse_snapshots(&sys.adjoint(), 220).unwrap(),
            GramianKind::Observability,
        );
        let emp = empirical_gramian(&snap).unwrap();
        assert_eq!(emp.kind, GramianKind::Observability);
        assert!(rel_err(&exact.w, &emp.w) < 1e-3);
    }

}
