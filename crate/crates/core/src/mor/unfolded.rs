//! Classical matrix baselines applied to the unfolded (block circulant)
//! system, plus the flat linear-system type they produce.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gramians::PSD_REPAIR_REL;
use crate::spectral::C64;
use crate::stein;
use crate::system::MarkovSequence;
use crate::system::Tpds;
use crate::tensor3::bcirc;

use super::{
    error_bound, inv_sqrt_scales, linear_param_count, Method, Reduction, ReducedModel,
    ReductionConfig,
};
use crate::tsvd::SingularSpectrum;

/// A plain matrix triple. Baseline reductions land here: the block circulant
/// structure is destroyed by truncation, so there is no way back to a tensor
/// model.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || b.nrows() != a.nrows() || c.ncols() != a.nrows() {
            return Err(Error::DimensionMismatch {
                op: "LinearSystem::new",
                details: format!(
                    "A {}x{}, B {}x{}, C {}x{}",
                    a.nrows(),
                    a.ncols(),
                    b.nrows(),
                    b.ncols(),
                    c.nrows(),
                    c.ncols()
                ),
            });
        }
        Ok(LinearSystem { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn markov(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut state = self.b.clone();
        for t in 0..count {
            out.push(&self.c * &state);
            if t + 1 < count {
                state = &self.a * state;
            }
        }
        out
    }

    /// Prepares the Hessenberg-based resolvent evaluator: one orthogonal
    /// reduction up front, then every frequency point costs a Givens sweep
    /// plus a triangular solve.
    pub fn transfer_eval(&self) -> LinearTransferEval {
        let hess = self.a.clone().hessenberg();
        let (q, h) = hess.unpack();
        LinearTransferEval {
            h,
            qtb: q.transpose() * &self.b,
            cq: &self.c * q,
        }
    }
}

/// Precomputed state for evaluating `C (zI - A)^{-1} B` at many `z`.
pub struct LinearTransferEval {
    h: DMatrix<f64>,
    qtb: DMatrix<f64>,
    cq: DMatrix<f64>,
}

impl LinearTransferEval {
    /// One transfer sample. Errors if `z` is numerically a pole.
    pub fn eval(&self, z: C64) -> Result<DMatrix<C64>> {
        let n = self.h.nrows();
        let nrhs = self.qtb.ncols();
        let mut m = DMatrix::<C64>::from_fn(n, n, |i, j| {
            let d = if i == j { z } else { C64::new(0.0, 0.0) };
            d - C64::new(self.h[(i, j)], 0.0)
        });
        let mut rhs = self.qtb.map(|v| C64::new(v, 0.0));

        // Givens sweep clearing the subdiagonal
        for k in 0..n.saturating_sub(1) {
            let a = m[(k, k)];
            let b = m[(k + 1, k)];
            let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if rho == 0.0 {
                return Err(Error::PoleProximity { block: 0, rcond: 0.0 });
            }
            let c = a.conj() / rho;
            let s = b.conj() / rho;
            let c2 = a / rho;
            let s2 = b / rho;
            for col in k..n {
                let x = m[(k, col)];
                let y = m[(k + 1, col)];
                m[(k, col)] = c * x + s * y;
                m[(k + 1, col)] = -s2 * x + c2 * y;
            }
            for col in 0..nrhs {
                let x = rhs[(k, col)];
                let y = rhs[(k + 1, col)];
                rhs[(k, col)] = c * x + s * y;
                rhs[(k + 1, col)] = -s2 * x + c2 * y;
            }
        }
        // back substitution (upper triangular m)
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for i in 0..n {
            let d = m[(i, i)].norm();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if dmax == 0.0 || dmin / dmax < crate::SINGULARITY_RCOND {
            return Err(Error::PoleProximity {
                block: 0,
                rcond: if dmax == 0.0 { 0.0 } else { dmin / dmax },
            });
        }
        for col in 0..nrhs {
            for i in (0..n).rev() {
                let mut acc = rhs[(i, col)];
                for k in i + 1..n {
                    acc -= m[(i, k)] * rhs[(k, col)];
                }
                rhs[(i, col)] = acc / m[(i, i)];
            }
        }
        Ok(self.cq.map(|v| C64::new(v, 0.0)) * rhs)
    }
}

/// Symmetric eigendecomposition square root with the PSD repair window:
/// eigenvalues slightly negative from roundoff clamp to zero, anything
/// worse errors. Keeps the full rank.
fn psd_factor_full(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let sym = (w + w.transpose()).scale(0.5);
    let se = sym.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let scale = se.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut values = Vec::with_capacity(n);
    let mut z = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        let mut lambda = se.eigenvalues[i];
        if lambda < -PSD_REPAIR_REL * scale {
            return Err(Error::IndefiniteGramian {
                block: 0,
                eigenvalue: lambda,
            });
        }
        lambda = lambda.max(0.0);
        values.push(lambda);
        z.set_column(col, &(se.eigenvectors.column(i) * lambda.sqrt()));
    }
    Ok((z, values))
}

struct BaselineCut {
    kept: usize,
    scales: Vec<f64>,
    spectrum: SingularSpectrum,
    bound: f64,
}

fn baseline_cut(
    sigma: Vec<f64>,
    available: usize,
    cfg: &ReductionConfig,
    s: usize,
) -> Result<BaselineCut> {
    let kp = cfg.convention.baseline_count(cfg.k, s);
    if kp >= available {
        return Err(Error::TruncationTooLarge {
            k: kp,
            available,
        });
    }
    let spectrum = SingularSpectrum::from_block_sigmas(vec![sigma]);
    let (kept, mut scales) = inv_sqrt_scales(
        &spectrum,
        available - kp,
        cfg.floor_policy,
        cfg.floor_rel,
        1,
    )?;
    let bound = error_bound(&spectrum, spectrum.tuple_count() - kept);
    Ok(BaselineCut {
        kept,
        scales: scales.swap_remove(0),
        spectrum,
        bound,
    })
}

fn scale_cols_real(m: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    let mut out = m.columns(0, scales.len()).into_owned();
    for (j, sc) in scales.iter().enumerate() {
        let mut col = out.column_mut(j);
        for v in col.iter_mut() {
            *v *= *sc;
        }
    }
    out
}

fn scale_rows_real(m: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    let mut out = m.rows(0, scales.len()).into_owned();
    for (i, sc) in scales.iter().enumerate() {
        let mut row = out.row_mut(i);
        for v in row.iter_mut() {
            *v *= *sc;
        }
    }
    out
}

/// Classical balanced truncation on the unfolded system: Stein-equation
/// Gramians, eigendecomposition square roots (SVD-grade, robust to rank
/// deficiency), Hankel SVD, and the balancing projection. The truncation
/// count follows the configured convention.
pub fn bt_unfolded(sys: &Tpds, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 - crate::system::STABILITY_MARGIN {
        return Err(Error::UnstableSystem { radius });
    }
    let xa = bcirc(sys.a()).matrix;
    let xb = bcirc(sys.b()).matrix;
    let xc = bcirc(sys.c()).matrix;

    let wc = stein::solve_stein_real(&xa, &(&xb * xb.transpose()))?;
    let wo = stein::solve_stein_real(&xa.transpose(), &(xc.transpose() * &xc))?;
    let (zc, _) = psd_factor_full(&wc)?;
    let (zo, _) = psd_factor_full(&wo)?;

    let h = zo.transpose() * &zc;
    let svd = h.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    let ns = sys.n() * sys.s();
    let cut = baseline_cut(sigma, ns, cfg, sys.s())?;
    let p = scale_cols_real(&(&zc * v_t.transpose()), &cut.scales);
    let q = scale_cols_real(&(&zo * u), &cut.scales);

    let a_red = q.transpose() * &xa * &p;
    let b_red = q.transpose() * &xb;
    let c_red = &xc * &p;
    let params = linear_param_count(cut.kept, xb.ncols(), xc.nrows());
    Ok(Reduction {
        model: ReducedModel::Linear(LinearSystem::new(a_red, b_red, c_red)?),
        transform_p: None,
        transform_q: None,
        spectrum: cut.spectrum,
        bound: cut.bound,
        method: Method::Bt,
        wall_time: start.elapsed(),
        parameter_count: params,
        kept: cut.kept,
    })
}

/// Channel-major impulse snapshot matrix of the unfolded system.
fn snapshot_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let channels = b.ncols();
    let steps = horizon + 1;
    let mut x = DMatrix::<f64>::zeros(n, channels * steps);
    let mut state = b.clone();
    for t in 0..steps {
        for c in 0..channels {
            x.set_column(c * steps + t, &state.column(c));
        }
        if t + 1 < steps {
            state = a * state;
        }
    }
    x
}

/// Classical balanced proper orthogonal decomposition on the unfolded
/// system. Snapshot generation is part of the call (and the wall time).
pub fn bpod_unfolded(sys: &Tpds, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let xa = bcirc(sys.a()).matrix;
    let xb = bcirc(sys.b()).matrix;
    let xc = bcirc(sys.c()).matrix;

    let x = snapshot_matrix(&xa, &xb, cfg.horizon_t);
    let y = snapshot_matrix(&xa.transpose(), &xc.transpose(), cfg.horizon_l);
    let h = y.transpose() * &x;
    let svd = h.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    let available = (xc.nrows() * (cfg.horizon_l + 1)).min(xb.ncols() * (cfg.horizon_t + 1));
    let cut = baseline_cut(sigma, available, cfg, sys.s())?;
    let p = scale_cols_real(&(&x * v_t.transpose()), &cut.scales);
    let q = scale_cols_real(&(&y * u), &cut.scales);

    let a_red = q.transpose() * &xa * &p;
    let b_red = q.transpose() * &xb;
    let c_red = &xc * &p;
    let params = linear_param_count(cut.kept, xb.ncols(), xc.nrows());
    Ok(Reduction {
        model: ReducedModel::Linear(LinearSystem::new(a_red, b_red, c_red)?),
        transform_p: None,
        transform_q: None,
        spectrum: cut.spectrum,
        bound: cut.bound,
        method: Method::Bpod,
        wall_time: start.elapsed(),
        parameter_count: params,
        kept: cut.kept,
    })
}

/// Classical eigensystem realization on the unfolded Markov parameters
/// (each tensor Markov parameter enters as its block circulant matrix).
pub fn era_unfolded(markov: &MarkovSequence, cfg: &ReductionConfig) -> Result<Reduction> {
    let start = Instant::now();
    let required = cfg.horizon_t + cfg.horizon_l + 2;
    if markov.len() < required {
        return Err(Error::InsufficientSnapshots {
            required,
            available: markov.len(),
        });
    }
    let (l, m, s) = (markov.l(), markov.m(), markov.s());
    let (ls, ms) = (l * s, m * s);
    let zmats: Vec<DMatrix<f64>> = markov
        .entries()
        .iter()
        .map(|z| bcirc(z).matrix)
        .collect();

    let rows = ls * (cfg.horizon_l + 1);
    let cols = ms * (cfg.horizon_t + 1);
    let mut h = DMatrix::<f64>::zeros(rows, cols);
    let mut h_shift = DMatrix::<f64>::zeros(rows, cols);
    for bi in 0..=cfg.horizon_l {
        for bj in 0..=cfg.horizon_t {
            h.view_mut((bi * ls, bj * ms), (ls, ms))
                .copy_from(&zmats[bi + bj]);
            h_shift
                .view_mut((bi * ls, bj * ms), (ls, ms))
                .copy_from(&zmats[bi + bj + 1]);
        }
    }

    let svd = h.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    let available = rows.min(cols);
    let cut = baseline_cut(sigma, available, cfg, s)?;
    let ur = u.columns(0, cut.kept).into_owned();
    let vr = v_t.rows(0, cut.kept).transpose();

    let a_core = ur.transpose() * &h_shift * &vr;
    let a_red = scale_rows_real(&scale_cols_real(&a_core, &cut.scales), &cut.scales);
    let b_red = scale_rows_real(&(ur.transpose() * h.columns(0, ms).into_owned()), &cut.scales);
    let c_red = scale_cols_real(&(h.rows(0, ls).into_owned() * &vr), &cut.scales);
    let params = linear_param_count(cut.kept, ms, ls);
    Ok(Reduction {
        model: ReducedModel::Linear(LinearSystem::new(a_red, b_red, c_red)?),
        transform_p: None,
        transform_q: None,
        spectrum: cut.spectrum,
        bound: cut.bound,
        method: Method::Era,
        wall_time: start.elapsed(),
        parameter_count: params,
        kept: cut.kept,
    })
}
