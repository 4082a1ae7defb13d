//! Random-feature solvers for second-order elliptic PDEs.
//!
//! The toolkit builds two-layer networks whose hidden weights and biases
//! are drawn once from an explicit prior and never trained. What remains
//! is linear: either importance-weighted coefficients that reproduce a
//! target function directly from its Fourier data, or a regularized
//! least-squares fit of the PDE residual at random collocation points.
//!
//! Module map:
//! - [`activation`]: compactly supported spline and sigmoid-difference
//!   activations with exact derivatives and Fourier transforms.
//! - [`sampling`]: feature priors (compact and heavy-tailed), their
//!   densities and normalizers, and deterministic feature banks.
//! - [`targets`]: Gaussian-mixture test functions with closed-form
//!   derivatives and spectra.
//! - [`representation`]: Monte-Carlo coefficient formulas, model
//!   evaluation, Sobolev error metrics, and dense quadrature
//!   reconstructions.
//! - [`pinn`]: elliptic problems on the unit cube, collocation sampling,
//!   and the assembled least-squares objective.
//! - [`solvers`]: projected gradient descent, the direct ridge solve, and
//!   sample-size-driven hyperparameter schedules.
//! - [`experiments`]: TOML-configured sweeps with provenance-tagged CSV
//!   output and power-law slope extraction.
//! - [`quad`]: Gauss-Legendre and Monte-Carlo quadrature used throughout.

pub mod activation;
pub mod error;
pub mod experiments;
pub mod pinn;
pub mod quad;
pub mod representation;
pub mod sampling;
pub mod solvers;
pub mod targets;

pub use activation::{eval_all, eval_sigma, sigma_hat, sigma_hat_one, ActivationKind};
pub use error::{Error, Result};
pub use experiments::{
    build_id, evaluation_grid, fit_loglog_slope, median, median_curve, mix_seed, run_experiment,
    slope_from_csv, write_manifest, ExperimentOutput, GridConfig, LogLogFit, PriorConfig,
    ProblemConfig, RunConfig, SolverConfig, TargetConfig,
};
pub use pinn::{
    assemble, empirical_loss, estimate_test_loss, loss_gradient, relative_l2_error,
    sample_collocation, AssembledSystem, CollocationSet, EllipticProblem,
};
pub use quad::QuadratureGrid;
pub use representation::{
    calibrate_representation_constant, coefficients_compact, coefficients_heavytail,
    evaluate_model, reconstruct_dense, representation_calibration, sobolev_error,
    DerivativeRequest, ModelEval, RandomFeatureModel, DEFAULT_INDICATOR_CONSTANT,
    REPRESENTATION_CALIBRATION,
};
pub use sampling::{
    normalizers, prior_density, sample, FeatureBank, Normalizers, PriorSpec,
};
pub use solvers::{
    exceeds_desk_scale, pgd, pgd_schedule, project_l2ball, ridge, ridge_flops, ridge_schedule,
    smoothness_estimate, PgdConfig, PgdSolution, RidgeSolution, Schedule, StepRule,
    DESK_SCALE_FLOPS,
};
pub use targets::{BarronTarget, GaussianComponent};
