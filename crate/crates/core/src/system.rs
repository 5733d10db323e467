//! The T-product dynamical system model: simulation, adjoint, Markov
//! parameters, transfer function, H-infinity norm, stability.
//!
//! The model is `X(t+1) = A * X(t) + B * U(t)`, `Y(t) = C * X(t)` with all
//! products T-products. Everything here runs per Fourier block: the recursion,
//! the resolvent `C * (zI - A)^{-1} * B`, and the frequency sweep all decouple
//! into `s` independent matrix problems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{self, C64, FourierBlocks};
use crate::tensor3::{lu_rcond_estimate, Tensor3};
use crate::tsvd;

/// Stability margin: stable iff spectral radius < 1 - STABILITY_MARGIN.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Default frequency-grid resolution for the H-infinity sweep.
pub const DEFAULT_HINF_GRID: usize = 512;

/// System triple (A, B, C) with dimensions (n, m, l, s).
#[derive(Clone, Debug)]
pub struct Tpds {
    a: Tensor3,
    b: Tensor3,
    c: Tensor3,
}

impl Tpds {
    pub fn new(a: Tensor3, b: Tensor3, c: Tensor3) -> Result<Self> {
        let (an, am, s) = a.dims();
        if an != am {
            return Err(Error::DimensionMismatch {
                op: "Tpds::new",
                details: format!("state transition tensor is {:?}", a.dims()),
            });
        }
        if b.n() != an || b.s() != s || c.m() != an || c.s() != s {
            return Err(Error::DimensionMismatch {
                op: "Tpds::new",
                details: format!(
                    "A {:?}, B {:?}, C {:?}",
                    a.dims(),
                    b.dims(),
                    c.dims()
                ),
            });
        }
        Ok(Tpds { a, b, c })
    }

    pub fn a(&self) -> &Tensor3 {
        &self.a
    }

    pub fn b(&self) -> &Tensor3 {
        &self.b
    }

    pub fn c(&self) -> &Tensor3 {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// Input width.
    pub fn m(&self) -> usize {
        self.b.m()
    }

    /// Output height.
    pub fn l(&self) -> usize {
        self.c.n()
    }

    /// Tube count.
    pub fn s(&self) -> usize {
        self.a.s()
    }

    /// Runs the recursion from `x0` under the given inputs; stores all
    /// `inputs.len() + 1` states and their outputs.
    pub fn simulate(&self, x0: &Tensor3, inputs: &[Tensor3]) -> Result<Trajectory> {
        let (n, h, s) = x0.dims();
        if n != self.n() || s != self.s() {
            return Err(Error::DimensionMismatch {
                op: "simulate",
                details: format!("x0 is {:?} for an n = {} system", x0.dims(), self.n()),
            });
        }
        for (t, u) in inputs.iter().enumerate() {
            if u.dims() != (self.m(), h, s) {
                return Err(Error::DimensionMismatch {
                    op: "simulate",
                    details: format!(
                        "input {} is {:?}, expected {:?}",
                        t,
                        u.dims(),
                        (self.m(), h, s)
                    ),
                });
            }
        }

        let fa = spectral::to_fourier(&self.a);
        let fb = spectral::to_fourier(&self.b);
        let fc = spectral::to_fourier(&self.c);
        let fx0 = spectral::to_fourier(x0);
        let fu: Vec<FourierBlocks> = inputs.iter().map(spectral::to_fourier).collect();

        let steps = inputs.len();
        let half = spectral::half_count(s);
        // per block: propagate and collect states/outputs over time
        let per_block: Vec<(Vec<DMatrix<C64>>, Vec<DMatrix<C64>>)> = par::map_indexed(half, |j| {
            let mut x = fx0.block(j).clone();
            let mut states = Vec::with_capacity(steps + 1);
            let mut outputs = Vec::with_capacity(steps + 1);
            for t in 0..=steps {
                outputs.push(fc.block(j) * &x);
                states.push(x.clone());
                if t < steps {
                    x = fa.block(j) * &x + fb.block(j) * fu[t].block(j);
                }
            }
            (states, outputs)
        });

        let states = par::try_map_indexed(steps + 1, |t| {
            let blocks: Vec<DMatrix<C64>> = per_block.iter().map(|b| b.0[t].clone()).collect();
            spectral::from_fourier(&FourierBlocks::from_half_blocks(s, blocks)?)
        })?;
        let outputs = par::try_map_indexed(steps + 1, |t| {
            let blocks: Vec<DMatrix<C64>> = per_block.iter().map(|b| b.1[t].clone()).collect();
            spectral::from_fourier(&FourierBlocks::from_half_blocks(s, blocks)?)
        })?;
        Ok(Trajectory { states, outputs, h })
    }

    /// Adjoint system: transition `A^T`, control `C^T`, output `B^T`.
    pub fn adjoint(&self) -> Tpds {
        Tpds {
            a: self.a.ttranspose(),
            b: self.c.ttranspose(),
            c: self.b.ttranspose(),
        }
    }

    /// First `count` Markov parameters `Z_j = C * A^j * B`, computed by
    /// propagating the state rather than powering `A`.
    pub fn markov(&self, count: usize) -> Result<MarkovSequence> {
        if count == 0 {
            return Err(Error::InvalidConfig("markov count must be >= 1".into()));
        }
        let s = self.s();
        let fa = spectral::to_fourier(&self.a);
        let fb = spectral::to_fourier(&self.b);
        let fc = spectral::to_fourier(&self.c);
        let half = spectral::half_count(s);
        let per_block: Vec<Vec<DMatrix<C64>>> = par::map_indexed(half, |j| {
            let mut m = fb.block(j).clone();
            let mut out = Vec::with_capacity(count);
            for t in 0..count {
                out.push(fc.block(j) * &m);
                if t + 1 < count {
                    m = fa.block(j) * &m;
                }
            }
            out
        });
        let entries = par::try_map_indexed(count, |t| {
            let blocks: Vec<DMatrix<C64>> = per_block.iter().map(|b| b[t].clone()).collect();
            spectral::from_fourier(&FourierBlocks::from_half_blocks(s, blocks)?)
        })?;
        MarkovSequence::from_tensors(entries)
    }

    /// Transfer sample `G(z) = C * (zI - A)^{-1} * B` as Fourier blocks.
    pub fn transfer(&self, z: C64) -> Result<TransferSample> {
        let fa = spectral::to_fourier(&self.a);
        let fb = spectral::to_fourier(&self.b);
        let fc = spectral::to_fourier(&self.c);
        let blocks = par::try_map_indexed(self.s(), |j| {
            transfer_block(z, fa.block(j), fb.block(j), fc.block(j), j)
        })?;
        Ok(TransferSample {
            z,
            g: FourierBlocks::from_blocks(blocks)?,
        })
    }

    /// Largest Fourier-block spectral radius of the transition tensor.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(tsvd::t_evd(&self.a)?.max_magnitude())
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.spectral_radius()? < 1.0 - STABILITY_MARGIN)
    }

    /// H-infinity norm: maximum singular value of the transfer function over
    /// the unit circle, via a uniform grid on `(-pi, pi]` plus one
    /// golden-section refinement around the grid argmax.
    pub fn hinf_norm(&self, grid_points: usize) -> Result<f64> {
        let radius = self.spectral_radius()?;
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::UnstableSystem { radius });
        }
        let fa = spectral::to_fourier(&self.a);
        let fb = spectral::to_fourier(&self.b);
        let fc = spectral::to_fourier(&self.c);
        let half = spectral::half_count(self.s());
        let eval = |omega: f64| -> f64 {
            let z = C64::new(omega.cos(), omega.sin());
            (0..half)
                .map(|j| {
                    transfer_block(z, fa.block(j), fb.block(j), fc.block(j), j)
                        .map(|g| max_singular_value(&g))
                        .unwrap_or(f64::INFINITY)
                })
                .fold(0.0f64, f64::max)
        };

        let values = par::map_indexed(grid_points, |k| {
            let omega = -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * (k + 1) as f64 / grid_points as f64;
            (omega, eval(omega))
        });
        let (mut best_omega, mut best) = values
            .iter()
            .copied()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();

        // one golden-section pass in the bracket around the argmax
        let step = 2.0 * std::f64::consts::PI / grid_points as f64;
        let (mut lo, mut hi) = (best_omega - step, best_omega + step);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        while (hi - lo) > 1e-6 * std::f64::consts::PI {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1);
            }
        }
        let refined = f1.max(f2);
        if refined > best {
            best = refined;
            best_omega = 0.5 * (lo + hi);
        }
        let _ = best_omega;
        Ok(best)
    }

    /// Grid-only H-infinity evaluation (no refinement); shared-grid error
    /// metrics use this to avoid grid-mismatch bias.
    pub fn hinf_on_grid(&self, grid_points: usize) -> Result<f64> {
        let radius = self.spectral_radius()?;
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::UnstableSystem { radius });
        }
        let fa = spectral::to_fourier(&self.a);
        let fb = spectral::to_fourier(&self.b);
        let fc = spectral::to_fourier(&self.c);
        let half = spectral::half_count(self.s());
        let values = par::try_map_indexed(grid_points, |k| {
            let omega = -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * (k + 1) as f64 / grid_points as f64;
            let z = C64::new(omega.cos(), omega.sin());
            let mut worst: f64 = 0.0;
            for j in 0..half {
                let g = transfer_block(z, fa.block(j), fb.block(j), fc.block(j), j)?;
                worst = worst.max(max_singular_value(&g));
            }
            Ok(worst)
        })?;
        Ok(values.into_iter().fold(0.0f64, f64::max))
    }
}

pub(crate) fn transfer_block(
    z: C64,
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    c: &DMatrix<C64>,
    block: usize,
) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let mut resolvent = -a.clone();
    for i in 0..n {
        resolvent[(i, i)] += z;
    }
    let lu = resolvent.lu();
    let rcond = lu_rcond_estimate(&lu);
    if rcond < crate::SINGULARITY_RCOND {
        return Err(Error::PoleProximity { block, rcond });
    }
    let x = lu.solve(b).ok_or(Error::PoleProximity { block, rcond })?;
    Ok(c * x)
}

pub(crate) fn max_singular_value(m: &DMatrix<C64>) -> f64 {
    m.singular_values().max()
}

/// Stored states and outputs of a simulation run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<Tensor3>,
    pub outputs: Vec<Tensor3>,
    /// Lateral width shared by all stored tensors.
    pub h: usize,
}

/// The impulse-response sequence `Z_j = C * A^j * B`.
#[derive(Clone, Debug)]
pub struct MarkovSequence {
    entries: Vec<Tensor3>,
    l: usize,
    m: usize,
    s: usize,
}

impl MarkovSequence {
    pub fn from_tensors(entries: Vec<Tensor3>) -> Result<Self> {
        let first = entries.first().ok_or(Error::InsufficientSnapshots {
            required: 1,
            available: 0,
        })?;
        let (l, m, s) = first.dims();
        for (j, e) in entries.iter().enumerate() {
            if e.dims() != (l, m, s) {
                return Err(Error::InconsistentDimensions {
                    index: j,
                    expected: format!("{:?}", (l, m, s)),
                    found: format!("{:?}", e.dims()),
                });
            }
        }
        Ok(MarkovSequence { entries, l, m, s })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, j: usize) -> &Tensor3 {
        &self.entries[j]
    }

    pub fn entries(&self) -> &[Tensor3] {
        &self.entries
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }
}

/// One evaluation of the transfer function.
#[derive(Clone, Debug)]
pub struct TransferSample {
    pub z: C64,
    pub g: FourierBlocks,
}
