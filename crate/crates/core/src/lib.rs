//! Gaussian-state dynamics of harmonic oscillator chains, their coarse-grained
//! densities and the hydrodynamic closure obtained from local equilibrium.
//!
//! With the `parallel` feature (default) the scan-style entry points fan out
//! over rayon; pass [`Exec::Sequential`] or build without the feature to run
//! on one thread.

pub mod bessel;
pub mod chain;
pub mod decoherence;
pub mod densities;
pub mod error;
pub mod exec;
pub mod hydro;
pub mod propagator;

pub use bessel::{approx_propagator, bessel_j, bessel_kernel, completeness_sum};
pub use chain::{derived_params, validate_state, ChainParams, Derived, GaussianState};
pub use decoherence::{decoherence_scale, peaking_ratio, peaking_report, PeakingReport};
pub use densities::{
    conservation_residual, real_space_fields, spectral, spectral_scan, DensityField, Grid,
    SpectralMoment, Which,
};
pub use error::{Error, Result};
pub use exec::Exec;
pub use hydro::{
    build_local_equilibrium, extract_fields, hydro_evolve, hydro_rhs, HydroConfig, HydroFields,
};
pub use propagator::{evolve, evolve_marginals, exact_propagator, AffinePropagator, ChainDynamics};
