//! The three T-product reduction algorithms.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gramians::{self, FactorRank};
use crate::par;
use crate::spectral::{self, C64, FourierBlocks};
use crate::system::{MarkovSequence, Tpds};
use crate::tensor3::Tensor3;
use crate::tsvd::{self, SvdMode};

use super::{
    error_bound, inv_sqrt_scales, tensor_param_count, Method, Reduction, ReducedModel,
    ReductionConfig,
};

/// Block-Hankel arrangement of Markov parameters, with its one-step-shifted
/// companion.
#[derive(Clone, Debug)]
pub struct HankelTensor {
    pub h: Tensor3,
    pub shifted: Option<Tensor3>,
}

/// Builds the generalized Hankel tensor (block `(i, j)` holds `Z_{i+j}`) and
/// its shifted companion (block `(i, j)` holds `Z_{i+j+1}`) from `T + L + 2`
/// impulse responses.
pub fn hankel_from_markov(
    markov: &MarkovSequence,
    horizon_t: usize,
    horizon_l: usize,
) -> Result<HankelTensor> {
    let required = horizon_t + horizon_l + 2;
    if markov.len() < required {
        return Err(Error::InsufficientSnapshots {
            required,
            available: markov.len(),
        });
    }
    let (l, m, s) = (markov.l(), markov.m(), markov.s());
    let rows = l * (horizon_l + 1);
    let cols = m * (horizon_t + 1);
    let mut h = Tensor3::zeros(rows, cols, s);
    let mut shifted = Tensor3::zeros(rows, cols, s);
    for k in 0..s {
        let mut hs = h.slice_mut(k);
        for bi in 0..=horizon_l {
            for bj in 0..=horizon_t {
                hs.view_mut((bi * l, bj * m), (l, m))
                    .copy_from(&markov.entry(bi + bj).slice(k));
            }
        }
        let mut ss = shifted.slice_mut(k);
        for bi in 0..=horizon_l {
            for bj in 0..=horizon_t {
                ss.view_mut((bi * l, bj * m), (l, m))
                    .copy_from(&markov.entry(bi + bj + 1).slice(k));
            }
        }
    }
    Ok(HankelTensor {
        h,
        shifted: Some(shifted),
    })
}

fn scale_cols(m: &DMatrix<C64>, scales: &[f64]) -> DMatrix<C64> {
    let mut out = m.clone();
    for (j, sc) in scales.iter().enumerate() {
        let mut col = out.column_mut(j);
        for z in col.iter_mut() {
            *z *= *sc;
        }
    }
    out
}

fn scale_rows(m: &DMatrix<C64>, scales: &[f64]) -> DMatrix<C64> {
    let mut out = m.clone();
    for (i, sc) in scales.iter().enumerate() {
        let mut row = out.row_mut(i);
        for z in row.iter_mut() {
            *z *= *sc;
        }
    }
    out
}

struct ProjectedTriple {
    a_red: Tensor3,
    b_red: Tensor3,
    c_red: Tensor3,
    p: Tensor3,
    q: Tensor3,
}

/// Shared tail of T-BT and T-BPOD: given the Hankel factors and the left and
/// right data tensors, build the transformation tensors and project the
/// system, all per Fourier block.
fn project_system(
    sys: &Tpds,
    factors: &tsvd::TsvdFactors,
    left: &Tensor3,
    right: &Tensor3,
    scales: &[Vec<f64>],
) -> Result<ProjectedTriple> {
    let s = sys.s();
    let half = spectral::half_count(s);
    let fa = spectral::to_fourier(sys.a());
    let fb = spectral::to_fourier(sys.b());
    let fc = spectral::to_fourier(sys.c());
    let fu = spectral::to_fourier(&factors.u);
    let fv = spectral::to_fourier(&factors.v);
    let fl = spectral::to_fourier(left);
    let fr = spectral::to_fourier(right);

    let per_block: Vec<[DMatrix<C64>; 5]> = par::map_indexed(half, |j| {
        let p = scale_cols(&(fr.block(j) * fv.block(j)), &scales[j]);
        let q = scale_cols(&(fl.block(j) * fu.block(j)), &scales[j]);
        let qh = q.adjoint();
        let a_red = &qh * fa.block(j) * &p;
        let b_red = &qh * fb.block(j);
        let c_red = fc.block(j) * &p;
        [a_red, b_red, c_red, p, q]
    });

    let collect = |idx: usize| -> Result<Tensor3> {
        let blocks: Vec<DMatrix<C64>> = per_block.iter().map(|b| b[idx].clone()).collect();
        spectral::from_fourier(&FourierBlocks::from_half_blocks(s, blocks)?)
    };
    Ok(ProjectedTriple {
        a_red: collect(0)?,
        b_red: collect(1)?,
        c_red: collect(2)?,
        p: collect(3)?,
        q: collect(4)?,
    })
}

/// T-balanced truncation: exact Gramians from the per-block Stein equations,
/// full-rank factors, Hankel `Z_o^T * Z_c`, truncated T-SVD, and the
/// balancing projection.
pub fn t_bt(sys: &Tpds, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let (wc, wo) = gramians::lyapunov_pair(sys)?;
    // full factors keep p = q = n so the kept rank is exactly n - k
    let zc = gramians::factor(&wc, FactorRank::Full)?;
    let zo = gramians::factor(&wo, FactorRank::Full)?;
    let h = zo.z.ttranspose().tprod(&zc.z)?;
    let factors = tsvd::t_svd(&h, SvdMode::Economy)?;

    let available = zc.rank.min(zo.rank);
    if cfg.k >= available {
        return Err(Error::TruncationTooLarge {
            k: cfg.k,
            available,
        });
    }
    let target = available - cfg.k;
    let half = spectral::half_count(sys.s());
    let (kept, scales) = inv_sqrt_scales(
        &factors.spectrum,
        target,
        cfg.floor_policy,
        cfg.floor_rel,
        half,
    )?;
    let trunc = tsvd::truncate(&factors, kept);
    let proj = project_system(sys, &trunc, &zo.z, &zc.z, &scales)?;

    let bound = error_bound(&factors.spectrum, factors.spectrum.tuple_count() - kept);
    Ok(Reduction {
        model: ReducedModel::Tpds(Tpds::new(proj.a_red, proj.b_red, proj.c_red)?),
        transform_p: Some(proj.p),
        transform_q: Some(proj.q),
        spectrum: factors.spectrum,
        bound,
        method: Method::TBt,
        wall_time: start.elapsed(),
        parameter_count: tensor_param_count(kept, sys.m(), sys.l(), sys.s()),
        kept,
    })
}

/// T-balanced proper orthogonal decomposition: empirical snapshots replace
/// the Gramian factors, otherwise the same pipeline as T-BT. Snapshot
/// generation happens inside (and is included in the wall time).
pub fn t_bpod(sys: &Tpds, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let x = gramians::impulse_snapshots(sys, cfg.horizon_t)?;
    let y = gramians::impulse_snapshots(&sys.adjoint(), cfg.horizon_l)?;
    let h = y.x.ttranspose().tprod(&x.x)?;
    let factors = tsvd::t_svd(&h, SvdMode::Economy)?;

    let available = (sys.l() * (cfg.horizon_l + 1)).min(sys.m() * (cfg.horizon_t + 1));
    if cfg.k >= available {
        return Err(Error::TruncationTooLarge {
            k: cfg.k,
            available,
        });
    }
    let target = available - cfg.k;
    let half = spectral::half_count(sys.s());
    let (kept, scales) = inv_sqrt_scales(
        &factors.spectrum,
        target,
        cfg.floor_policy,
        cfg.floor_rel,
        half,
    )?;
    let trunc = tsvd::truncate(&factors, kept);
    let proj = project_system(sys, &trunc, &y.x, &x.x, &scales)?;

    let bound = error_bound(&factors.spectrum, factors.spectrum.tuple_count() - kept);
    Ok(Reduction {
        model: ReducedModel::Tpds(Tpds::new(proj.a_red, proj.b_red, proj.c_red)?),
        transform_p: Some(proj.p),
        transform_q: Some(proj.q),
        spectrum: factors.spectrum,
        bound,
        method: Method::TBpod,
        wall_time: start.elapsed(),
        parameter_count: tensor_param_count(kept, sys.m(), sys.l(), sys.s()),
        kept,
    })
}

/// T-eigensystem realization: identifies the reduced model from impulse
/// responses alone, without access to the generating system.
pub fn t_era(markov: &MarkovSequence, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let (l, m, s) = (markov.l(), markov.m(), markov.s());
    let hankel = hankel_from_markov(markov, cfg.horizon_t, cfg.horizon_l)?;
    let shifted = hankel.shifted.as_ref().expect("shifted companion");
    let factors = tsvd::t_svd(&hankel.h, SvdMode::Economy)?;

    let available = (l * (cfg.horizon_l + 1)).min(m * (cfg.horizon_t + 1));
    if cfg.k >= available {
        return Err(Error::TruncationTooLarge {
            k: cfg.k,
            available,
        });
    }
    let target = available - cfg.k;
    let half = spectral::half_count(s);
    let (kept, scales) = inv_sqrt_scales(
        &factors.spectrum,
        target,
        cfg.floor_policy,
        cfg.floor_rel,
        half,
    )?;
    let trunc = tsvd::truncate(&factors, kept);

    let fu = spectral::to_fourier(&trunc.u);
    let fv = spectral::to_fourier(&trunc.v);
    let fhat = spectral::to_fourier(shifted);
    let fcol = spectral::to_fourier(&hankel.h.lateral_cols(0..m));
    let frow = spectral::to_fourier(&hankel.h.row_section(0..l));

    let per_block: Vec<[DMatrix<C64>; 3]> = par::map_indexed(half, |j| {
        let uh = fu.block(j).adjoint();
        let a_core = &uh * fhat.block(j) * fv.block(j);
        let a_red = scale_rows(&scale_cols(&a_core, &scales[j]), &scales[j]);
        let b_red = scale_rows(&(&uh * fcol.block(j)), &scales[j]);
        let c_red = scale_cols(&(frow.block(j) * fv.block(j)), &scales[j]);
        [a_red, b_red, c_red]
    });
    let collect = |idx: usize| -> Result<Tensor3> {
        let blocks: Vec<DMatrix<C64>> = per_block.iter().map(|b| b[idx].clone()).collect();
        spectral::from_fourier(&FourierBlocks::from_half_blocks(s, blocks)?)
    };
    let (a_red, b_red, c_red) = (collect(0)?, collect(1)?, collect(2)?);

    let bound = error_bound(&factors.spectrum, factors.spectrum.tuple_count() - kept);
    Ok(Reduction {
        model: ReducedModel::Tpds(Tpds::new(a_red, b_red, c_red)?),
        transform_p: None,
        transform_q: None,
        spectrum: factors.spectrum,
        bound,
        method: Method::TEra,
        wall_time: start.elapsed(),
        parameter_count: tensor_param_count(kept, m, l, s),
        kept,
    })
}
