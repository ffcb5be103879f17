//! Simulation and limit approximations for randomized longest-queue-first
//! scheduling of `n` parallel buffers.
//!
//! - [`ctmc`]: exact event-driven simulation on occupancy counts.
//! - [`fluid`]: the fluid ODE system, its closed form and equilibrium.
//! - [`diffusion`]: variance ODE, SDE sampling and normal approximations.
//! - [`stats`]: KS distance, histograms, confidence intervals.
//! - [`oracle`]: exact transient laws of tiny systems by uniformization.
//! - [`seed`]: reproducible replication seeding and fan-out.

pub mod csv;
pub mod ctmc;
pub mod diffusion;
pub mod error;
pub mod fluid;
pub mod ode;
pub mod oracle;
pub mod seed;
pub mod stats;

pub use ctmc::{
    initial_state, mean_queue_length, sample_max_length, scaled_view, scaled_view_at, simulate,
    simulate_with, step, CountState, EventKind, EventRecord, ServiceSampling, Simulation,
    SystemConfig, TailFractionPath,
};
pub use diffusion::{
    approx_f1_distribution, ks_region_accepts, sample_z_path, sample_zk_path, solve_variance_ode,
    stationary_mu_sigma, ApproxDistribution, ApproxKind, DiffusionModel, EulerMaruyama, SdePath,
    VarianceSolution,
};
pub use error::{Error, Result};
pub use fluid::{fixed_point, fluid_rhs, solve_fluid, u1_closed_form, FluidConfig, FluidSolution};
pub use oracle::{uniformization_oracle, OracleOptions, OracleResult};
pub use stats::{histogram, ks_distance, mean_ci, normal_cdf, EmpiricalSample, Histogram, SampleMeta};
