//! Optimizers for the assembled quadratic objective: projected gradient
//! descent over an l2 ball and a direct ridge (normal-equations) solve,
//! plus the hyperparameter schedules that tie `m`, `λ`, and the iteration
//! budget to the sample size.

use crate::error::{Error, Result};
use crate::pinn::{empirical_loss, loss_gradient, AssembledSystem};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

/// Relative tolerance for the power-iteration eigenvalue estimates.
const POWER_ITERATION_TOL: f64 = 1e-6;
/// Sweep cap before power iteration reports stagnation.
const POWER_ITERATION_MAX_SWEEPS: usize = 10_000;
/// Condition-number level above which the direct solve logs a warning.
const CONDITION_WARN_THRESHOLD: f64 = 1e10;
/// Work budget (floating-point operations) considered routine for a
/// single workstation; schedules above it are flagged, not rejected.
pub const DESK_SCALE_FLOPS: f64 = 1e11;

/// Euclidean projection onto the closed ball of the given radius.
pub fn project_l2ball(a: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "projection radius must be finite and >= 0, got {radius}"
        )));
    }
    let norm = a.norm();
    if norm <= radius {
        Ok(a.clone())
    } else {
        Ok(a * (radius / norm))
    }
}

fn rayleigh_power_iteration<F>(m: usize, apply: F) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut previous = f64::INFINITY;
    for _ in 0..POWER_ITERATION_MAX_SWEEPS {
        let w = apply(&v);
        let rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
        if (rayleigh - previous).abs() <= POWER_ITERATION_TOL * rayleigh.abs().max(1e-12) {
            return Ok(rayleigh);
        }
        previous = rayleigh;
    }
    Err(Error::Numeric(format!(
        "power iteration did not settle within {POWER_ITERATION_MAX_SWEEPS} sweeps"
    )))
}

fn apply_gram(system: &AssembledSystem, v: &DVector<f64>) -> DVector<f64> {
    let n = system.n() as f64;
    system.phi_int.transpose() * (&system.phi_int * v) * (system.w_int / n)
        + system.phi_bd.transpose() * (&system.phi_bd * v) * (system.w_bd / n)
        + v * system.lambda
}

/// Gradient-Lipschitz constant `β = 2 λ_max(G)` of the objective, where
/// `G = (w_int/n)ΦᵢᵀΦᵢ + (w_bd/n)ΦᵦᵀΦᵦ + λI`, estimated by power
/// iteration with implicit matrix-vector products.
pub fn smoothness_estimate(system: &AssembledSystem) -> Result<f64> {
    let lambda_max = rayleigh_power_iteration(system.m(), |v| apply_gram(system, v))?;
    Ok(2.0 * lambda_max)
}

/// Step-size rule for projected gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Constant step `1/β`; the solver returns the final iterate and the
    /// iterates contract toward the minimizer at a rate governed by the
    /// condition estimate.
    InverseSmoothness,
    /// Decreasing steps `ν_t = 1/(λ(t+1))`; the solver returns the
    /// weighted average `(2/(T(T+1))) Σ_t t·a_t`, whose excess loss decays
    /// like `1/T` under strong convexity.
    Decreasing,
}

/// Options for [`pgd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdConfig {
    /// Feasible-ball radius. `None` solves the ridge system first and uses
    /// twice the norm of its solution, which always contains the minimizer.
    pub radius: Option<f64>,
    /// Number of gradient steps `T >= 1`.
    pub iterations: usize,
    pub step: StepRule,
}

/// Result of a projected-gradient run.
#[derive(Debug, Clone)]
pub struct PgdSolution {
    /// Final iterate (`InverseSmoothness`) or weighted average (`Decreasing`).
    pub coefficients: DVector<f64>,
    /// Objective value at the initial point and after every step
    /// (`iterations + 1` entries; always the running iterate, not the
    /// average).
    pub loss_trace: Vec<f64>,
    /// Cumulative wall-clock seconds aligned with `loss_trace`.
    pub trace_secs: Vec<f64>,
    /// `β/(2λ)`: upper bound on the condition number of the objective.
    pub kappa_estimate: f64,
    /// Estimated gradient-Lipschitz constant `β`.
    pub smoothness: f64,
    /// Radius of the feasible ball actually used.
    pub radius: f64,
}

/// Projected gradient descent from `a = 0` on the assembled objective.
/// Requires `λ > 0` (both step rules lean on strong convexity).
pub fn pgd(system: &AssembledSystem, config: &PgdConfig) -> Result<PgdSolution> {
    if system.lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "projected gradient descent requires a ridge parameter > 0, got {}",
            system.lambda
        )));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidArgument(
            "iteration budget must be at least 1".into(),
        ));
    }
    let radius = match config.radius {
        Some(r) => {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "feasible radius must be finite and > 0, got {r}"
                )));
            }
            r
        }
        None => {
            let reference = ridge(system)?;
            (2.0 * reference.coefficients.norm()).max(1e-12)
        }
    };
    let beta = smoothness_estimate(system)?;
    if beta <= 0.0 {
        return Err(Error::Numeric(
            "objective has zero curvature; nothing to optimize".into(),
        ));
    }
    let kappa = beta / (2.0 * system.lambda);
    let t_total = config.iterations;
    let clock = Instant::now();
    let mut a = DVector::zeros(system.m());
    let mut average = DVector::zeros(system.m());
    let mut loss_trace = Vec::with_capacity(t_total + 1);
    let mut trace_secs = Vec::with_capacity(t_total + 1);
    loss_trace.push(empirical_loss(system, &a)?);
    trace_secs.push(clock.elapsed().as_secs_f64());
    for t in 1..=t_total {
        if let StepRule::Decreasing = config.step {
            average.axpy(t as f64, &a, 1.0);
        }
        let step = match config.step {
            StepRule::InverseSmoothness => 1.0 / beta,
            StepRule::Decreasing => 1.0 / (system.lambda * (t as f64 + 1.0)),
        };
        let gradient = loss_gradient(system, &a)?;
        a = project_l2ball(&(&a - gradient * step), radius)?;
        let loss = empirical_loss(system, &a)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "objective became non-finite at iteration {t}; the system is \
                 badly scaled for the chosen step rule"
            )));
        }
        loss_trace.push(loss);
        trace_secs.push(clock.elapsed().as_secs_f64());
    }
    let coefficients = match config.step {
        StepRule::InverseSmoothness => a,
        StepRule::Decreasing => {
            let t = t_total as f64;
            average * (2.0 / (t * (t + 1.0)))
        }
    };
    Ok(PgdSolution {
        coefficients,
        loss_trace,
        trace_secs,
        kappa_estimate: kappa,
        smoothness: beta,
        radius,
    })
}

/// Result of the direct normal-equations solve.
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub coefficients: DVector<f64>,
    /// `λ_max(G)/λ`; infinite when `λ = 0`.
    pub kappa_estimate: f64,
    /// `λ_max(G)/λ_min(G)` estimate for the solved matrix.
    pub condition_estimate: f64,
}

/// Solves `G a = rhs` exactly, where `G` is the Gram matrix of the
/// objective and `rhs = -(w_int/n)Φᵢᵀg1 - (w_bd/n)Φᵦᵀg2`, via Cholesky.
pub fn ridge(system: &AssembledSystem) -> Result<RidgeSolution> {
    let n = system.n() as f64;
    let m = system.m();
    let mut gram: DMatrix<f64> = system.phi_int.transpose() * &system.phi_int
        * (system.w_int / n)
        + system.phi_bd.transpose() * &system.phi_bd * (system.w_bd / n);
    for j in 0..m {
        gram[(j, j)] += system.lambda;
    }
    let rhs: DVector<f64> = system.phi_int.transpose() * &system.g1 * (-system.w_int / n)
        + system.phi_bd.transpose() * &system.g2 * (-system.w_bd / n);
    let lambda_max = rayleigh_power_iteration(m, |v| &gram * v)?;
    let chol = match nalgebra::linalg::Cholesky::new(gram.clone()) {
        Some(c) => c,
        None => {
            if system.lambda == 0.0 {
                return Err(Error::Singular(format!(
                    "normal equations are rank-deficient ({} features, {} collocation \
                     points per set); set lambda > 0 to regularize",
                    m,
                    system.n()
                )));
            }
            return Err(Error::Numeric(
                "Cholesky factorization broke down on a regularized system; \
                 the assembled matrices are badly scaled"
                    .into(),
            ));
        }
    };
    let coefficients = chol.solve(&rhs);
    let lambda_min = rayleigh_power_iteration(m, |v| chol.solve(v))
        .map(|inv_max| if inv_max > 0.0 { 1.0 / inv_max } else { 0.0 })
        .unwrap_or(system.lambda);
    let condition_estimate = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    if condition_estimate > CONDITION_WARN_THRESHOLD {
        log::warn!(
            "normal equations are ill-conditioned (estimate {condition_estimate:.3e}); \
             coefficients may lose accuracy"
        );
    }
    let kappa_estimate = if system.lambda > 0.0 {
        lambda_max / system.lambda
    } else {
        f64::INFINITY
    };
    Ok(RidgeSolution {
        coefficients,
        kappa_estimate,
        condition_estimate,
    })
}

/// A solver work plan derived from the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Feature count.
    pub m: usize,
    /// Ridge parameter.
    pub lambda: f64,
    /// Gradient-step budget; `None` for direct solvers.
    pub iterations: Option<usize>,
    pub label: String,
}

/// Schedule for projected gradient descent:
/// `m = max(2, round(n^{(d+1)/(3d+7)}))`, `λ = 1/√m`,
/// `T = ceil(c·√n·ln n)`. The constant `c` scales the iteration budget
/// and defaults to 1 in configs.
pub fn pgd_schedule(n: usize, d: usize, c: f64) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pgd schedule needs n >= 2 samples, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "iteration scale must be finite and > 0, got {c}"
        )));
    }
    let nf = n as f64;
    let exponent = (d as f64 + 1.0) / (3.0 * d as f64 + 7.0);
    let m = (nf.powf(exponent).round() as usize).max(2);
    let lambda = 1.0 / (m as f64).sqrt();
    let iterations = (c * nf.sqrt() * nf.ln()).ceil() as usize;
    Ok(Schedule {
        m,
        lambda,
        iterations: Some(iterations.max(1)),
        label: "pgd".to_string(),
    })
}

/// Schedule for the direct solve: `m = round(n^{1/4})`, `λ = 1`.
pub fn ridge_schedule(n: usize) -> Result<Schedule> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!(
            "ridge schedule needs n >= 16 samples, got {n}"
        )));
    }
    let m = (n as f64).powf(0.25).round() as usize;
    Ok(Schedule {
        m,
        lambda: 1.0,
        iterations: None,
        label: "ridge".to_string(),
    })
}

/// Floating-point operation estimate for assembling and solving the
/// normal equations: the `m² n` Gram accumulation dominates.
pub fn ridge_flops(m: usize, n: usize) -> f64 {
    (m as f64) * (m as f64) * (n as f64)
}

/// Whether a work estimate exceeds the routine single-workstation budget.
pub fn exceeds_desk_scale(flops: f64) -> bool {
    flops > DESK_SCALE_FLOPS
}
