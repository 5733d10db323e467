//! T-SVD, T-EVD, truncation by singular tuples, and F-diagonal functional
//! calculus (square roots and inverse square roots).
//!
//! The decomposition is `A = U * S * V^T` (T-products) with T-orthogonal `U`,
//! `V` and an F-rectangle-diagonal `S`, computed block by block in the
//! Fourier domain. Tuples keep per-block descending SVD order and are
//! index-aligned: tuple `j` collects the `j`-th singular value of every
//! block, so tuple Frobenius norms are automatically nonincreasing and
//! truncating the trailing tuples is the norm-ranked truncation.
//!
//! Mirrored blocks reuse the conjugated factors of their partner block —
//! never an independent SVD, which would break Hermitian pairing under
//! sign/phase ambiguity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{self, C64, FourierBlocks};
use crate::tensor3::Tensor3;

/// Relative floor below which an F-diagonal entry refuses inversion.
pub const DEFAULT_SQRT_FLOOR_REL: f64 = 1e-12;

const SVD_MAX_ITER: usize = 0; // unbounded; nalgebra's internal limit applies per sweep

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdMode {
    /// `p = min(n, m)` columns (the default everywhere downstream).
    Economy,
    /// Square `U` (n x n) and `V` (m x m) with an n x m diagonal middle.
    Full,
}

/// Per-block singular values and the tuple Frobenius norms.
#[derive(Clone, Debug)]
pub struct SingularSpectrum {
    /// `sigma[block][tuple]`, descending in the tuple index within each block.
    sigma: Vec<Vec<f64>>,
    /// `tuple_norms[j]^2 = (1/s) * sum_i sigma[i][j]^2`.
    tuple_norms: Vec<f64>,
}

impl SingularSpectrum {
    pub fn from_block_sigmas(sigma: Vec<Vec<f64>>) -> Self {
        let s = sigma.len();
        let p = sigma.first().map_or(0, |v| v.len());
        let tuple_norms = (0..p)
            .map(|j| (sigma.iter().map(|b| b[j] * b[j]).sum::<f64>() / s as f64).sqrt())
            .collect();
        SingularSpectrum { sigma, tuple_norms }
    }

    pub fn block_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn tuple_count(&self) -> usize {
        self.tuple_norms.len()
    }

    pub fn sigma(&self, block: usize, tuple: usize) -> f64 {
        self.sigma[block][tuple]
    }

    pub fn block_sigmas(&self, block: usize) -> &[f64] {
        &self.sigma[block]
    }

    pub fn tuple_norms(&self) -> &[f64] {
        &self.tuple_norms
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |acc, v| acc.max(*v))
    }

    pub fn truncated(&self, keep: usize) -> SingularSpectrum {
        SingularSpectrum {
            sigma: self.sigma.iter().map(|b| b[..keep].to_vec()).collect(),
            tuple_norms: self.tuple_norms[..keep].to_vec(),
        }
    }
}

/// Factors of a T-SVD, `A ~ U * S * V^T`.
#[derive(Clone, Debug)]
pub struct TsvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub spectrum: SingularSpectrum,
}

/// Per-block eigenvalues (the Fourier-domain entries of the eigentuples).
#[derive(Clone, Debug)]
pub struct EigentupleSet {
    /// `values[block][i]`, unordered within a block.
    values: Vec<Vec<C64>>,
}

impl EigentupleSet {
    pub fn values(&self) -> &[Vec<C64>] {
        &self.values
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |acc, z| acc.max(z.im.abs()))
    }
}

fn block_svd(
    block_index: usize,
    block: &DMatrix<C64>,
    mode: SvdMode,
) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let svd = block
        .clone()
        .try_svd(true, true, 1e-15, SVD_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { block: block_index })?;
    let mut u = svd.u.expect("requested U");
    let mut v_t = svd.v_t.expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));

    // phase convention: the largest-magnitude entry of each left singular
    // vector is made real positive; the matching right vector absorbs the
    // same rotation so the product is unchanged
    for k in 0..sigma.len() {
        let col = u.column(k);
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > best_mag {
                best_mag = z.norm();
                best = i;
            }
        }
        if best_mag > 0.0 {
            let phase = u[(best, k)] / C64::new(best_mag, 0.0);
            let rot = phase.conj();
            let mut cu = u.column_mut(k);
            for z in cu.iter_mut() {
                *z *= rot;
            }
            let mut rv = v_t.row_mut(k);
            for z in rv.iter_mut() {
                *z *= phase; // (v_k * conj(phase))^H row
            }
        }
    }

    if mode == SvdMode::Full {
        u = complete_unitary(&u);
        let v = complete_unitary(&v_t.adjoint());
        v_t = v.adjoint();
    }
    Ok((u, sigma, v_t))
}

/// Extends a column-orthonormal matrix to a square unitary one.
fn complete_unitary(u: &DMatrix<C64>) -> DMatrix<C64> {
    let n = u.nrows();
    let mut cols: Vec<DVector<C64>> = u.column_iter().map(|c| c.into_owned()).collect();
    let mut candidate = 0usize;
    let mut lcg: u64 = 0x9e3779b97f4a7c15;
    while cols.len() < n {
        let mut v = DVector::<C64>::zeros(n);
        if candidate < n {
            v[candidate] = C64::new(1.0, 0.0);
            candidate += 1;
        } else {
            // deterministic pseudo-random fill for pathological spans
            for x in v.iter_mut() {
                lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *x = C64::new(((lcg >> 33) as f64) / (1u64 << 31) as f64 - 1.0, 0.0);
            }
        }
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v.axpy(-proj, c, C64::new(1.0, 0.0));
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= C64::new(norm, 0.0);
            cols.push(v);
        }
    }
    DMatrix::from_columns(&cols)
}

/// T-SVD via per-Fourier-block SVDs.
pub fn t_svd(a: &Tensor3, mode: SvdMode) -> Result<TsvdFactors> {
    let (n, m, s) = a.dims();
    let p = n.min(m);
    let f = spectral::to_fourier(a);
    let half = par::try_map_indexed(spectral::half_count(s), |j| block_svd(j, f.block(j), mode))?;

    let (pu, pv) = match mode {
        SvdMode::Economy => (p, p),
        SvdMode::Full => (n, m),
    };
    let mut u_half = Vec::with_capacity(half.len());
    let mut vt_half = Vec::with_capacity(half.len());
    let mut sigma_half: Vec<Vec<f64>> = Vec::with_capacity(half.len());
    for (u, sig, v_t) in half {
        u_half.push(u);
        vt_half.push(v_t);
        sigma_half.push(sig);
    }

    // middle tensor: per-block diagonal of singular values
    let (sn, sm) = match mode {
        SvdMode::Economy => (p, p),
        SvdMode::Full => (n, m),
    };
    let s_half: Vec<DMatrix<C64>> = sigma_half
        .iter()
        .map(|sig| {
            DMatrix::from_fn(sn, sm, |i, j| {
                if i == j && i < sig.len() {
                    C64::new(sig[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    let v_half: Vec<DMatrix<C64>> = vt_half.iter().map(|vt| vt.adjoint()).collect();

    let u = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, u_half)?)?;
    let s_t = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, s_half)?)?;
    let v = spectral::from_fourier(&FourierBlocks::from_half_blocks(s, v_half)?)?;
    debug_assert_eq!(u.dims(), (n, pu, s));
    debug_assert_eq!(v.dims(), (m, pv, s));

    // mirror per-block sigmas to the full block list (conjugation preserves
    // singular values)
    let sigma_full: Vec<Vec<f64>> = (0..s)
        .map(|j| {
            let src = if j < spectral::half_count(s) { j } else { s - j };
            sigma_half[src].clone()
        })
        .collect();
    Ok(TsvdFactors {
        u,
        s: s_t,
        v,
        spectrum: SingularSpectrum::from_block_sigmas(sigma_full),
    })
}

/// Keeps the first `keep` singular tuples (index-aligned across blocks).
///
/// Panics if `keep` is zero or exceeds the stored tuple count.
pub fn truncate(f: &TsvdFactors, keep: usize) -> TsvdFactors {
    let p = f.spectrum.tuple_count();
    assert!(keep >= 1 && keep <= p, "keep = {} out of 1..={}", keep, p);
    TsvdFactors {
        u: f.u.lateral_cols(0..keep),
        s: f.s.row_section(0..keep).lateral_cols(0..keep),
        v: f.v.lateral_cols(0..keep),
        spectrum: f.spectrum.truncated(keep),
    }
}

/// Per-block eigenvalues of a square tensor. Eigenvector tensors are not
/// formed; downstream consumers only need the eigentuples.
pub fn t_evd(a: &Tensor3) -> Result<EigentupleSet> {
    let (n, m, s) = a.dims();
    if n != m {
        return Err(Error::DimensionMismatch {
            op: "t_evd",
            details: format!("tensor is {:?}, expected square slices", a.dims()),
        });
    }
    let f = spectral::to_fourier(a);
    let half = par::try_map_indexed(spectral::half_count(s), |j| {
        f.block(j)
            .clone()
            .eigenvalues()
            .map(|ev| ev.iter().copied().collect::<Vec<C64>>())
            .ok_or(Error::ConvergenceFailure { block: j })
    })?;
    let values: Vec<Vec<C64>> = (0..s)
        .map(|j| {
            if j < spectral::half_count(s) {
                half[j].clone()
            } else {
                half[s - j].iter().map(|z| z.conj()).collect()
            }
        })
        .collect();
    Ok(EigentupleSet { values })
}

/// How [`fdiag_inv_sqrt`] treats entries below the floor.
#[derive(Clone, Copy, Debug)]
pub enum InvSqrtFloor {
    /// Error with [`Error::NearZeroSingularValue`].
    Strict { rel: f64 },
    /// Raise the entry to the floor before inverting.
    Clamp { rel: f64 },
}

impl Default for InvSqrtFloor {
    fn default() -> Self {
        InvSqrtFloor::Strict {
            rel: DEFAULT_SQRT_FLOOR_REL,
        }
    }
}

fn fdiag_apply(
    t: &Tensor3,
    f: impl Fn(usize, f64, f64) -> Result<f64> + Sync,
) -> Result<Tensor3> {
    let (n, m, s) = t.dims();
    let d = n.min(m);
    let fb = spectral::to_fourier(t);
    // window for treating tiny imaginary/negative parts as roundoff
    let scale = fb.max_abs();
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut max_entry: f64 = 0.0;
    for j in 0..spectral::half_count(s) {
        for i in 0..d {
            let z = fb.block(j)[(i, i)];
            if z.im.abs() > tol {
                return Err(Error::IndefiniteGramian {
                    block: j,
                    eigenvalue: z.im,
                });
            }
            if z.re < -tol {
                return Err(Error::IndefiniteGramian {
                    block: j,
                    eigenvalue: z.re,
                });
            }
            max_entry = max_entry.max(z.re);
        }
    }
    let out = fb.block_map(|j, b| {
        let mut nb = DMatrix::<C64>::zeros(n, m);
        for i in 0..d {
            let entry = b[(i, i)].re.max(0.0);
            nb[(i, i)] = C64::new(f(i, entry, max_entry)?, 0.0);
        }
        let _ = j;
        Ok(nb)
    })?;
    spectral::from_fourier(&out)
}

/// Entry-wise square root of an F-diagonal tensor, taken in the Fourier
/// domain.
pub fn fdiag_sqrt(t: &Tensor3) -> Result<Tensor3> {
    fdiag_apply(t, |_, x, _| Ok(x.sqrt()))
}

/// Entry-wise inverse square root of an F-diagonal tensor.
pub fn fdiag_inv_sqrt(t: &Tensor3, floor: InvSqrtFloor) -> Result<Tensor3> {
    fdiag_apply(t, |index, x, max_entry| match floor {
        InvSqrtFloor::Strict { rel } => {
            if x < rel * max_entry {
                Err(Error::NearZeroSingularValue { index, value: x })
            } else {
                Ok(1.0 / x.sqrt())
            }
        }
        InvSqrtFloor::Clamp { rel } => Ok(1.0 / x.max(rel * max_entry).sqrt()),
    })
}
