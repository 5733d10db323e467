//! Mode-3 discrete Fourier transform layer.
//!
//! The block circulant matrix of a real `n x m x s` tensor is unitarily
//! block-diagonalized by the DFT along the third mode; this module holds that
//! diagonal representation: `s` complex `n x m` matrices, one per frequency.
//! Every T-operation downstream (products, inverses, SVDs, Lyapunov solves)
//! becomes `s` independent matrix operations on these blocks.
//!
//! Conventions: unnormalized forward transform
//! `block_j = sum_k slice_k * exp(-2*pi*i*j*k/s)`, inverse with `1/s`.
//! Real origin implies Hermitian pairing `block_{s-j} = conj(block_j)`, so
//! per-block work only runs on blocks `0..=s/2` and the rest are mirrored.

use nalgebra::{Complex, DMatrix};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor3::Tensor3;

pub type C64 = Complex<f64>;

/// Number of tubes handled per work item when batching FFTs.
const TUBE_BATCH: usize = 64;

/// Residual imaginary tolerance of [`from_fourier`], relative to the largest
/// block entry.
pub const IMAG_RESIDUAL_TOL: f64 = 1e-8;

/// The `s` Fourier-domain blocks of a third-order tensor.
#[derive(Clone, Debug)]
pub struct FourierBlocks {
    n: usize,
    m: usize,
    s: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl FourierBlocks {
    pub fn from_blocks(blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        let s = blocks.len();
        if s == 0 {
            return Err(Error::DimensionMismatch {
                op: "from_blocks",
                details: "no blocks supplied".into(),
            });
        }
        let (n, m) = blocks[0].shape();
        for (j, b) in blocks.iter().enumerate() {
            if b.shape() != (n, m) {
                return Err(Error::DimensionMismatch {
                    op: "from_blocks",
                    details: format!("block {} is {:?}, expected {:?}", j, b.shape(), (n, m)),
                });
            }
        }
        Ok(FourierBlocks { n, m, s, blocks })
    }

    /// Builds all `s` blocks from the first `s/2 + 1` by Hermitian mirroring.
    pub fn from_half_blocks(s: usize, half: Vec<DMatrix<C64>>) -> Result<Self> {
        if half.len() != half_count(s) {
            return Err(Error::DimensionMismatch {
                op: "from_half_blocks",
                details: format!("{} blocks for s = {}", half.len(), s),
            });
        }
        let (n, m) = half[0].shape();
        let mut blocks = half;
        for j in half_count(s)..s {
            let src = blocks[s - j].conjugate();
            blocks.push(src);
        }
        let fb = FourierBlocks { n, m, s, blocks };
        debug_assert_eq!(fb.blocks.len(), s);
        Ok(fb)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn block(&self, j: usize) -> &DMatrix<C64> {
        &self.blocks[j]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Largest entry magnitude across all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// Deviation from Hermitian pairing: `max_j |block_{s-j} - conj(block_j)|`.
    pub fn pairing_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.s {
            let mirror = (self.s - j) % self.s;
            let diff = (&self.blocks[mirror] - self.blocks[j].conjugate()).norm();
            worst = worst.max(diff);
        }
        worst
    }

    /// Frobenius norm of the originating tensor, read off the spectrum
    /// (`|A|^2 = (1/s) * sum_j |block_j|^2`).
    pub fn parseval_norm(&self) -> f64 {
        let sum: f64 = self.blocks.iter().map(|b| b.norm_squared()).sum();
        (sum / self.s as f64).sqrt()
    }

    /// Applies `f` to each block independently. Only blocks `0..=s/2` are
    /// computed; the rest are mirrored, so `f` must satisfy
    /// `f(conj(X)) = conj(f(X))`.
    pub fn block_map(
        &self,
        f: impl Fn(usize, &DMatrix<C64>) -> Result<DMatrix<C64>> + Sync,
    ) -> Result<FourierBlocks> {
        let half = par::try_map_indexed(half_count(self.s), |j| f(j, &self.blocks[j]))?;
        FourierBlocks::from_half_blocks(self.s, half)
    }

    /// Per-block matrix product (the Fourier image of the T-product).
    pub fn matmul(&self, other: &FourierBlocks) -> Result<FourierBlocks> {
        if self.m != other.n || self.s != other.s {
            return Err(Error::DimensionMismatch {
                op: "fourier matmul",
                details: format!(
                    "{}x{}x{} * {}x{}x{}",
                    self.n, self.m, self.s, other.n, other.m, other.s
                ),
            });
        }
        let half = par::map_indexed(half_count(self.s), |j| &self.blocks[j] * &other.blocks[j]);
        FourierBlocks::from_half_blocks(self.s, half)
    }

    /// Blocks of the T-transpose: the conjugate transpose of each block.
    pub fn adjoint(&self) -> FourierBlocks {
        FourierBlocks {
            n: self.m,
            m: self.n,
            s: self.s,
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }
}

/// Blocks `0..=s/2` carry the full information for a real-origin spectrum.
pub fn half_count(s: usize) -> usize {
    s / 2 + 1
}

/// Materializes the block circulant matrix encoded by a list of Fourier
/// blocks: the inverse of the unitary block-DFT similarity. Works for blocks
/// without Hermitian pairing too (the result is then complex), which is how
/// transfer-function samples are assembled into their unfolded matrix.
pub fn bcirc_from_blocks(blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
    let s = blocks.len();
    let (n, m) = blocks[0].shape();
    // slice k of the generating tensor: (1/s) * sum_j block_j * omega^{-jk}
    let slices: Vec<DMatrix<C64>> = (0..s)
        .map(|k| {
            let mut acc = DMatrix::<C64>::zeros(n, m);
            for (j, b) in blocks.iter().enumerate() {
                let ang = 2.0 * std::f64::consts::PI * (j * k) as f64 / s as f64;
                let w = C64::new(ang.cos(), ang.sin());
                acc.zip_apply(b, |a, x| *a += w * x);
            }
            acc.unscale(s as f64)
        })
        .collect();
    let mut out = DMatrix::<C64>::zeros(n * s, m * s);
    for bp in 0..s {
        for bq in 0..s {
            let k = (s + bp - bq) % s;
            out.view_mut((bp * n, bq * m), (n, m)).copy_from(&slices[k]);
        }
    }
    out
}

/// Forward transform: `block_j = sum_k slice_k * omega^(j*k)` with
/// `omega = exp(-2*pi*i/s)`.
pub fn to_fourier(t: &Tensor3) -> FourierBlocks {
    let (n, m, s) = t.dims();
    let nm = n * m;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(s);
    let scratch_len = fft.get_inplace_scratch_len();

    let mut buffer = vec![C64::new(0.0, 0.0); nm * s];
    let data = t.data();
    par::for_each_chunk_mut(&mut buffer, s * TUBE_BATCH, |ci, chunk| {
        let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];
        for (ti, tube) in chunk.chunks_mut(s).enumerate() {
            let p = ci * TUBE_BATCH + ti;
            for k in 0..s {
                tube[k] = C64::new(data[k * nm + p], 0.0);
            }
            fft.process_with_scratch(tube, &mut scratch);
        }
    });

    let blocks = par::map_indexed(s, |j| DMatrix::from_fn(n, m, |i, c| buffer[(c * n + i) * s + j]));
    FourierBlocks { n, m, s, blocks }
}

/// Inverse transform with `1/s` normalization. Residual imaginary parts up to
/// `IMAG_RESIDUAL_TOL * max_abs` are discarded; larger residuals signal a
/// pairing-violating upstream computation and raise [`Error::NonRealResult`].
pub fn from_fourier(f: &FourierBlocks) -> Result<Tensor3> {
    let (n, m, s) = (f.n, f.m, f.s);
    let nm = n * m;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(s);
    let scratch_len = ifft.get_inplace_scratch_len();
    let tol = IMAG_RESIDUAL_TOL * f.max_abs();

    let mut buffer = vec![C64::new(0.0, 0.0); nm * s];
    for (j, b) in f.blocks.iter().enumerate() {
        let src = b.as_slice();
        for p in 0..nm {
            buffer[p * s + j] = src[p];
        }
    }

    let inv_s = 1.0 / s as f64;
    let worst: Vec<f64> = {
        let mut worst_per_chunk = vec![0.0f64; buffer.len().div_ceil(s * TUBE_BATCH)];
        let worst_slice = &mut worst_per_chunk;
        par::for_each_chunk_mut(&mut buffer, s * TUBE_BATCH, |_ci, chunk| {
            let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];
            for tube in chunk.chunks_mut(s) {
                ifft.process_with_scratch(tube, &mut scratch);
                for v in tube.iter_mut() {
                    *v *= inv_s;
                }
            }
        });
        // imaginary residual scan (sequential; cheap relative to the FFTs)
        for (ci, chunk) in buffer.chunks(s * TUBE_BATCH).enumerate() {
            let mut w: f64 = 0.0;
            for v in chunk {
                w = w.max(v.im.abs());
            }
            worst_slice[ci] = w;
        }
        worst_per_chunk
    };
    let residual = worst.into_iter().fold(0.0f64, f64::max);
    if residual > tol {
        return Err(Error::NonRealResult { residual, tol });
    }

    let mut data = vec![0.0f64; nm * s];
    for p in 0..nm {
        for k in 0..s {
            data[k * nm + p] = buffer[p * s + k].re;
        }
    }
    Tensor3::from_data(n, m, s, data)
}
