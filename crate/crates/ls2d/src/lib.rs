//! A matrix-free solver for the two dimensional Lippmann-Schwinger integral
//! equation
//!
//! ```text
//! u(x) + k^2 (A m u)(x) = u_inc(x),   (A v)(x) = int_D G_k(x - y) v(y) dy,
//! ```
//!
//! modeling time-harmonic acoustic scattering by penetrable inhomogeneities
//! whose material properties jump across the interface. High order is retained
//! at the discontinuity by carving a thin tubular boundary region out of the
//! scatterer with a smooth cut-off, treating it with specialized singular
//! quadrature on overlapping parametric patches, and leaving a smoothly
//! vanishing density for a fast base-grid convolution. Two interchangeable
//! base backends are provided: a pre-corrected trapezoidal rule on a Cartesian
//! grid ([`base_pct`]) and an Addition-theorem modal scheme on a polar grid
//! ([`base_atm`]). Non-local boundary sums are accelerated with two-face
//! equivalent sources and plane-wave expansions ([`accel`]). The discrete
//! system is solved by restarted GMRES ([`solver`]).

pub mod accel;
pub mod base_atm;
pub mod base_pct;
pub mod boundary_quad;
pub mod geometry;
pub mod grids;
pub mod interp;
pub mod oracle;
pub mod solver;
pub mod specfun;
pub mod util;

pub use num_complex::Complex64;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("projection onto the boundary failed to converge")]
    NoProjection,
    #[error("point is not inside the boundary region")]
    NotInBoundaryRegion,
    #[error("target outside patch parameter square")]
    TargetOutsidePatch,
    #[error("target outside the scatterer")]
    TargetOutsideOmega,
    #[error("unsupported correction order p={0}")]
    UnsupportedOrder(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("modal truncation {lmax} exceeds alias-free limit {limit}")]
    AliasError { lmax: usize, limit: usize },
    #[error("quadrature failed to reach requested accuracy (estimate {0:.3e})")]
    QuadratureFailure(f64),
    #[error("Y_l(kR) = {0:.3e} too close to zero; perturb the base disc radius R")]
    ResonantRadius(f64),
    #[error("equivalent-source collocation system is numerically singular")]
    ResonantCell,
    #[error("plane-wave expansion ill conditioned (relative residual {0:.3e})")]
    IllConditioned(f64),
    #[error("GMRES did not converge in {0} iterations (residual {1:.3e})")]
    MaxIterations(usize, f64),
    #[error("modal system singular for mode {0}")]
    SingularMode(i64),
}

pub type Result<T> = std::result::Result<T, Error>;
