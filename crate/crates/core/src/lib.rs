//! Needlet kernels on the sphere and the correlation structure of needlet
//! coefficients of isotropic Gaussian fields.
//!
//! Zonal functions are `Z_l(x) = (2l+1) P_l(x)` with the `1/(4 pi)` factor
//! dropped; the field simulator works with orthonormal harmonics, so its
//! variances are the analytic ones divided by `4 pi`.

pub mod correlation;
pub mod difference;
pub mod error;
pub mod frame;
pub mod kernel;
pub mod legendre;
pub mod numeric;
pub mod simulate;
pub mod spectrum;

pub use correlation::{analytic_correlation, analytic_covariance, CorrelationQuery, DecayReport};
pub use difference::CoeffSequence;
pub use error::{NeedletError, Result};
pub use frame::{build_grid, estimate_frame_bounds, FrameBoundsEstimate, SphereGrid};
pub use kernel::{KernelSpec, NeedletProfile, ProfileFamily};
pub use simulate::{monte_carlo_correlation, sample_alm, AlmSet, MonteCarloEstimate};
pub use spectrum::{LogModulation, PowerSpectrum};
