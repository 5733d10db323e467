//! T-product tensor algebra and data-driven model order reduction for
//! third-order-tensor dynamical systems.
//!
//! The crate provides:
//! * dense third-order tensors with the T-product algebra ([`tensor3`]);
//! * the mode-3 Fourier representation that turns every T-operation into
//!   independent per-block matrix operations ([`spectral`]);
//! * T-SVD / T-EVD and F-diagonal functional calculus ([`tsvd`]);
//! * the tensor dynamical system model with simulation, transfer function,
//!   and H-infinity machinery ([`system`]);
//! * exact (Stein-equation) and empirical Gramians ([`gramians`]);
//! * the three tensor reduction algorithms plus their unfolded matrix
//!   baselines ([`mor`]);
//! * an experiment harness ([`bench`]) and file/report I/O ([`io`]).

pub mod bench;
pub mod error;
pub mod gramians;
pub mod io;
pub mod mor;
pub mod spectral;
pub mod system;
pub mod tensor3;
pub mod tsvd;

mod par;
mod stein;

pub use error::{Error, Result};
pub use spectral::FourierBlocks;
pub use system::Tpds;
pub use tensor3::Tensor3;

/// Environment variable capping worker parallelism.
pub const THREADS_ENV: &str = "TPROD_MOR_THREADS";

/// Reciprocal-condition threshold below which a Fourier block is treated as
/// numerically singular.
pub const SINGULARITY_RCOND: f64 = 1e-12;

/// Builds the global thread pool honoring [`THREADS_ENV`]. Call once at
/// startup; later calls (or calls after the pool already exists) are no-ops.
/// Without the `parallel` feature this does nothing.
pub fn init_thread_pool_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            if let Ok(threads) = v.parse::<usize>() {
                if threads >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    }
}
