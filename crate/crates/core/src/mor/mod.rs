//! Model order reduction: the three T-product algorithms (balanced
//! truncation, balanced proper orthogonal decomposition, eigensystem
//! realization) and their classical matrix baselines applied to the unfolded
//! block-circulant system.
//!
//! All six methods share the same skeleton: build a Hankel object, take its
//! (T-)SVD, truncate, scale by `S^{-1/2}`, and assemble the reduced triple.
//! The T-methods do every heavy step per Fourier block and inverse-transform
//! once at the end; the baselines operate on `ns x ns` dense matrices and
//! return a plain linear system that cannot be folded back into a tensor
//! model.

mod tmethods;
mod unfolded;

pub use tmethods::{hankel_from_markov, t_bpod, t_bt, t_era, HankelTensor};
pub use unfolded::{bpod_unfolded, bt_unfolded, era_unfolded, LinearSystem};

use std::time::Duration;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{self, C64};
use crate::system::{self, MarkovSequence, Tpds};
use crate::tsvd::SingularSpectrum;

/// Reduction algorithm tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    TBt,
    Bt,
    TBpod,
    Bpod,
    TEra,
    Era,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TBt,
        Method::Bt,
        Method::TBpod,
        Method::Bpod,
        Method::TEra,
        Method::Era,
    ];

    pub fn is_tensor(&self) -> bool {
        matches!(self, Method::TBt | Method::TBpod | Method::TEra)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::TBt => "t-bt",
            Method::Bt => "bt",
            Method::TBpod => "t-bpod",
            Method::Bpod => "bpod",
            Method::TEra => "t-era",
            Method::Era => "era",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t-bt" | "tbt" => Ok(Method::TBt),
            "bt" => Ok(Method::Bt),
            "t-bpod" | "tbpod" => Ok(Method::TBpod),
            "bpod" => Ok(Method::Bpod),
            "t-era" | "tera" => Ok(Method::TEra),
            "era" => Ok(Method::Era),
            other => Err(Error::InvalidConfig(format!("unknown method '{}'", other))),
        }
    }
}

/// How a truncation level `k` translates for the unfolded baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TruncationConvention {
    /// Baselines drop `k * s` singular values (one value per tube entry),
    /// keeping the reduced state counts directly comparable.
    #[default]
    PerValue,
    /// Baselines drop `k` singular values, literally the same count as the
    /// tensor side drops tuples.
    PerTuple,
}

impl TruncationConvention {
    pub fn baseline_count(&self, k: usize, s: usize) -> usize {
        match self {
            TruncationConvention::PerValue => k * s,
            TruncationConvention::PerTuple => k,
        }
    }
}

impl std::str::FromStr for TruncationConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "value" | "per-value" => Ok(TruncationConvention::PerValue),
            "tuple" | "per-tuple" => Ok(TruncationConvention::PerTuple),
            other => Err(Error::InvalidConfig(format!(
                "unknown truncation convention '{}'",
                other
            ))),
        }
    }
}

impl std::fmt::Display for TruncationConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TruncationConvention::PerValue => "value",
            TruncationConvention::PerTuple => "tuple",
        })
    }
}

/// Treatment of kept singular values below the relative floor when forming
/// `S^{-1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FloorPolicy {
    /// Divide regardless; only an exactly-zero kept value is an error.
    #[default]
    Proceed,
    /// Shrink the kept rank until every kept value clears the floor.
    Shrink,
    /// Fail with [`Error::NearZeroSingularValue`].
    Strict,
}

impl std::str::FromStr for FloorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proceed" => Ok(FloorPolicy::Proceed),
            "shrink" => Ok(FloorPolicy::Shrink),
            "strict" => Ok(FloorPolicy::Strict),
            other => Err(Error::InvalidConfig(format!(
                "unknown floor policy '{}'",
                other
            ))),
        }
    }
}

/// Parameters shared by every reduction call.
#[derive(Clone, Debug)]
pub struct ReductionConfig {
    /// Number of truncated singular tuples (baselines translate it through
    /// the convention).
    pub k: usize,
    /// Impulse horizon T (input side).
    pub horizon_t: usize,
    /// Impulse horizon L (output side).
    pub horizon_l: usize,
    pub convention: TruncationConvention,
    pub floor_policy: FloorPolicy,
    /// Relative floor under `S^{-1/2}` for Strict/Shrink policies.
    pub floor_rel: f64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            k: 0,
            horizon_t: 20,
            horizon_l: 20,
            convention: TruncationConvention::default(),
            floor_policy: FloorPolicy::default(),
            floor_rel: crate::tsvd::DEFAULT_SQRT_FLOOR_REL,
        }
    }
}

impl ReductionConfig {
    pub fn with_k(k: usize) -> Self {
        ReductionConfig {
            k,
            ..Default::default()
        }
    }
}

/// A reduced model: either a genuine tensor system or the flat linear triple
/// the baselines produce (which cannot be folded back into one).
#[derive(Clone, Debug)]
pub enum ReducedModel {
    Tpds(Tpds),
    Linear(LinearSystem),
}

impl ReducedModel {
    pub fn is_tpds(&self) -> bool {
        matches!(self, ReducedModel::Tpds(_))
    }
}

/// Output of one reduction run.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub model: ReducedModel,
    /// Right transformation tensor (absent for T-ERA and the baselines).
    pub transform_p: Option<crate::Tensor3>,
    /// Left transformation tensor (absent for T-ERA and the baselines).
    pub transform_q: Option<crate::Tensor3>,
    /// Full (pre-truncation) Hankel spectrum.
    pub spectrum: SingularSpectrum,
    /// Twice the largest per-block discarded singular-value sum.
    pub bound: f64,
    pub method: Method,
    pub wall_time: Duration,
    /// Parameter count of the reduced model, matching the closed-form
    /// accounting at the actually kept rank.
    pub parameter_count: u64,
    /// Retained rank (tuples for tensor methods, values for baselines).
    pub kept: usize,
}

/// Static dimensions used by the closed-form parameter accounting.
#[derive(Clone, Copy, Debug)]
pub struct ModelDims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub s: usize,
    pub horizon_t: usize,
    pub horizon_l: usize,
}

impl ModelDims {
    pub fn of(sys: &Tpds, cfg: &ReductionConfig) -> Self {
        ModelDims {
            n: sys.n(),
            m: sys.m(),
            l: sys.l(),
            s: sys.s(),
            horizon_t: cfg.horizon_t,
            horizon_l: cfg.horizon_l,
        }
    }

    fn hankel_base(&self) -> usize {
        (self.l * (self.horizon_l + 1)).min(self.m * (self.horizon_t + 1))
    }
}

pub(crate) fn tensor_param_count(r: usize, m: usize, l: usize, s: usize) -> u64 {
    let (r, m, l, s) = (r as u64, m as u64, l as u64, s as u64);
    (r * r + r * m + r * l) * s
}

pub(crate) fn linear_param_count(r: usize, ms: usize, ls: usize) -> u64 {
    let (r, ms, ls) = (r as u64, ms as u64, ls as u64);
    r * r + r * ms + r * ls
}

/// Closed-form parameter count of the reduced model produced by `method` at
/// truncation level `k`.
pub fn parameter_count(
    method: Method,
    dims: &ModelDims,
    k: usize,
    convention: TruncationConvention,
) -> Result<u64> {
    let check = |avail: usize, k: usize| -> Result<usize> {
        if k >= avail {
            Err(Error::TruncationTooLarge { k, available: avail })
        } else {
            Ok(avail - k)
        }
    };
    match method {
        Method::TBt => {
            let r = check(dims.n, k)?;
            Ok(tensor_param_count(r, dims.m, dims.l, dims.s))
        }
        Method::TBpod | Method::TEra => {
            let r = check(dims.hankel_base(), k)?;
            Ok(tensor_param_count(r, dims.m, dims.l, dims.s))
        }
        Method::Bt => {
            let kp = convention.baseline_count(k, dims.s);
            let r = check(dims.n * dims.s, kp)?;
            Ok(linear_param_count(r, dims.m * dims.s, dims.l * dims.s))
        }
        Method::Bpod | Method::Era => {
            let kp = convention.baseline_count(k, dims.s);
            let r = check(dims.hankel_base() * dims.s, kp)?;
            Ok(linear_param_count(r, dims.m * dims.s, dims.l * dims.s))
        }
    }
}

/// Twice the largest per-block sum of the `k` trailing singular values: the
/// truncation error bound of T-balanced truncation.
pub fn error_bound(spectrum: &SingularSpectrum, k: usize) -> f64 {
    let p = spectrum.tuple_count();
    assert!(k <= p, "k = {} exceeds tuple count {}", k, p);
    (0..spectrum.block_count())
        .map(|i| (p - k..p).map(|j| spectrum.sigma(i, j)).sum::<f64>())
        .fold(0.0f64, f64::max)
        * 2.0
}

/// Scale factors `1/sqrt(sigma)` for the kept tuples, after applying the
/// floor policy. Returns the effective kept count and the per-half-block
/// scales.
pub(crate) fn inv_sqrt_scales(
    spectrum: &SingularSpectrum,
    keep: usize,
    policy: FloorPolicy,
    floor_rel: f64,
    half_blocks: usize,
) -> Result<(usize, Vec<Vec<f64>>)> {
    let floor_abs = floor_rel * spectrum.max_sigma();
    let min_over_blocks = |tuple: usize| -> f64 {
        (0..half_blocks)
            .map(|b| spectrum.sigma(b, tuple))
            .fold(f64::INFINITY, f64::min)
    };
    let kept = match policy {
        FloorPolicy::Strict => {
            for j in 0..keep {
                let v = min_over_blocks(j);
                if v < floor_abs {
                    return Err(Error::NearZeroSingularValue { index: j, value: v });
                }
            }
            keep
        }
        FloorPolicy::Shrink => {
            let mut r = 0;
            while r < keep && min_over_blocks(r) >= floor_abs {
                r += 1;
            }
            if r == 0 {
                return Err(Error::NearZeroSingularValue {
                    index: 0,
                    value: min_over_blocks(0),
                });
            }
            r
        }
        FloorPolicy::Proceed => {
            for j in 0..keep {
                let v = min_over_blocks(j);
                if v <= 0.0 {
                    return Err(Error::NearZeroSingularValue { index: j, value: v });
                }
            }
            keep
        }
    };
    let scales = (0..half_blocks)
        .map(|b| (0..kept).map(|j| 1.0 / spectrum.sigma(b, j).sqrt()).collect())
        .collect();
    Ok((kept, scales))
}

/// Full-system transfer samples on the shared frequency grid, cached so a
/// sweep can evaluate many reductions against one pass over the original
/// system.
pub struct TransferGridCache {
    omegas: Vec<f64>,
    /// `[point][block]` transfer blocks of the full system (all `s` blocks).
    blocks: Vec<Vec<DMatrix<C64>>>,
    s: usize,
    /// `|G|_inf` on the grid.
    pub gmax: f64,
}

/// Evaluates the full system's transfer blocks on a uniform grid over
/// `(-pi, pi]`.
pub fn transfer_grid(sys: &Tpds, grid: usize) -> Result<TransferGridCache> {
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 - system::STABILITY_MARGIN {
        return Err(Error::UnstableSystem { radius });
    }
    let fa = spectral::to_fourier(sys.a());
    let fb = spectral::to_fourier(sys.b());
    let fc = spectral::to_fourier(sys.c());
    let s = sys.s();
    let omegas: Vec<f64> = (0..grid)
        .map(|kk| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (kk + 1) as f64 / grid as f64)
        .collect();
    let blocks: Vec<Vec<DMatrix<C64>>> = par::try_map_indexed(grid, |p| {
        let z = C64::new(omegas[p].cos(), omegas[p].sin());
        (0..s)
            .map(|j| system::transfer_block(z, fa.block(j), fb.block(j), fc.block(j), j))
            .collect::<Result<Vec<_>>>()
    })?;
    let gmax = blocks
        .iter()
        .flat_map(|pb| pb.iter())
        .map(system::max_singular_value)
        .fold(0.0f64, f64::max);
    Ok(TransferGridCache {
        omegas,
        blocks,
        s,
        gmax,
    })
}

/// `|G - G_red|_inf / |G|_inf` over the cached shared grid.
pub fn relative_error_on_grid(cache: &TransferGridCache, red: &Reduction) -> Result<f64> {
    let denom = cache.gmax.max(f64::MIN_POSITIVE);
    match &red.model {
        ReducedModel::Tpds(sys) => {
            let radius = sys.spectral_radius()?;
            if radius >= 1.0 - system::STABILITY_MARGIN {
                return Err(Error::UnstableSystem { radius });
            }
            let fa = spectral::to_fourier(sys.a());
            let fb = spectral::to_fourier(sys.b());
            let fc = spectral::to_fourier(sys.c());
            let worst = par::try_map_indexed(cache.omegas.len(), |p| {
                let z = C64::new(cache.omegas[p].cos(), cache.omegas[p].sin());
                let mut w: f64 = 0.0;
                for j in 0..cache.s {
                    let g =
                        system::transfer_block(z, fa.block(j), fb.block(j), fc.block(j), j)?;
                    w = w.max(system::max_singular_value(&(&cache.blocks[p][j] - g)));
                }
                Ok(w)
            })?;
            Ok(worst.into_iter().fold(0.0f64, f64::max) / denom)
        }
        ReducedModel::Linear(lin) => {
            let radius = lin.spectral_radius();
            if radius >= 1.0 - system::STABILITY_MARGIN {
                return Err(Error::UnstableSystem { radius });
            }
            let eval = lin.transfer_eval();
            let worst = par::try_map_indexed(cache.omegas.len(), |p| {
                let z = C64::new(cache.omegas[p].cos(), cache.omegas[p].sin());
                let full = spectral::bcirc_from_blocks(&cache.blocks[p]);
                let g = eval.eval(z)?;
                Ok::<f64, Error>(system::max_singular_value(&(full - g)))
            })?;
            Ok(worst.into_iter().fold(0.0f64, f64::max) / denom)
        }
    }
}

/// Relative H-infinity error of a reduction against the full system on a
/// shared frequency grid (no refinement, so both sides see identical points).
pub fn relative_error(full: &Tpds, red: &Reduction, grid: usize) -> Result<f64> {
    let cache = transfer_grid(full, grid)?;
    relative_error_on_grid(&cache, red)
}

/// Relative H-infinity gap between two reduced models on a shared grid,
/// normalized by the first model's grid norm. Diagnostic only: reduced
/// models from different data-driven methods need not agree.
pub fn transfer_gap(a: &Reduction, b: &Reduction, grid: usize) -> Result<f64> {
    let eval_points = |red: &Reduction| -> Result<Vec<DMatrix<C64>>> {
        par::try_map_indexed(grid, |kk| {
            let omega =
                -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (kk + 1) as f64 / grid as f64;
            let z = C64::new(omega.cos(), omega.sin());
            match &red.model {
                ReducedModel::Tpds(sys) => Ok(spectral::bcirc_from_blocks(sys.transfer(z)?.g.blocks())),
                ReducedModel::Linear(lin) => lin.transfer_eval().eval(z),
            }
        })
    };
    let ga = eval_points(a)?;
    let gb = eval_points(b)?;
    let mut worst: f64 = 0.0;
    let mut amax: f64 = 0.0;
    for (x, y) in ga.iter().zip(&gb) {
        worst = worst.max(system::max_singular_value(&(x - y)));
        amax = amax.max(system::max_singular_value(x));
    }
    Ok(worst / amax.max(f64::MIN_POSITIVE))
}

/// Reconstructs the first `count` Markov parameters of a reduced model and
/// returns the per-index relative Frobenius errors against the reference
/// sequence.
pub fn markov_reconstruction_errors(
    red: &Reduction,
    reference: &MarkovSequence,
    count: usize,
) -> Result<Vec<f64>> {
    let count = count.min(reference.len());
    match &red.model {
        ReducedModel::Tpds(sys) => {
            let rec = sys.markov(count)?;
            Ok((0..count)
                .map(|j| {
                    let d = reference.entry(j).sub(rec.entry(j)).unwrap();
                    d.norm() / reference.entry(j).norm().max(f64::MIN_POSITIVE)
                })
                .collect())
        }
        ReducedModel::Linear(lin) => {
            let rec = lin.markov(count);
            Ok((0..count)
                .map(|j| {
                    let reference_mat = crate::tensor3::bcirc(reference.entry(j)).matrix;
                    let d = (&rec[j] - &reference_mat).norm();
                    d / reference_mat.norm().max(f64::MIN_POSITIVE)
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests;
