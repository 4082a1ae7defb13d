//! Hidden-unit activation functions and their Fourier spectra.
//!
//! Three integrable activations drive the random-feature representation:
//!
//! * [`ActivationKind::Spline34`] — an alternating sum of shifted ReLU-cubes
//!   that collapses to six times the centered cubic B-spline: compactly
//!   supported on `[-2, 2]`, twice continuously differentiable, piecewise
//!   cubic between integer knots.
//! * [`ActivationKind::SigDiff`] — a unit difference of logistic sigmoids,
//!   `S(t + 1) - S(t)`, an exponentially decaying bump.
//! * [`ActivationKind::TanhDiff`] — the same construction on `tanh`.
//!
//! A fourth variant, [`ActivationKind::Tanh`], is a plain `tanh` unit kept
//! for compatibility with classic random-feature PDE runs. It is *not*
//! absolutely integrable, so every spectrum-dependent operation rejects it;
//! only pointwise evaluation (and hence PDE assembly) accepts it.
//!
//! The Fourier transform convention here is `σ̂(a) = ∫ σ(t) e^{-iat} dt`.
//! Transforms are computed by adaptive Gauss–Kronrod quadrature — on the
//! exact support for the spline, on a truncated window for the
//! exponentially decaying kinds — and the normalizer `σ̂(1)` is cached the
//! first time it is needed rather than hard-coded.

use crate::error::{Error, Result};
use crate::quad::adaptive_gk;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// Which hidden-unit activation a model or system uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// Compactly supported piecewise-cubic spline bump (support `[-2, 2]`).
    Spline34,
    /// Difference of logistic sigmoids `S(t + 1) - S(t)`.
    SigDiff,
    /// Difference of hyperbolic tangents `tanh(t + 1) - tanh(t)`.
    TanhDiff,
    /// Plain `tanh` unit; evaluation only, no integrable spectrum.
    Tanh,
}

impl ActivationKind {
    /// All variants with an absolutely integrable profile (every kind
    /// except the plain `tanh` compatibility unit).
    pub const INTEGRABLE: [ActivationKind; 3] = [
        ActivationKind::Spline34,
        ActivationKind::SigDiff,
        ActivationKind::TanhDiff,
    ];

    /// Whether `σ` is absolutely integrable, i.e. has a classical Fourier
    /// transform. Required by every representation-side operation.
    pub fn is_integrable(self) -> bool {
        !matches!(self, ActivationKind::Tanh)
    }

    /// Radius `R` such that `σ(t) = 0` exactly for `|t| >= R`, when the
    /// activation is compactly supported.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            ActivationKind::Spline34 => Some(2.0),
            _ => None,
        }
    }

    /// Half-width beyond which `|σ|` and its first two derivatives are
    /// negligible (below 1e-17): exact support for the spline, an
    /// exponential-tail cutoff for the sigmoid/tanh differences.
    pub(crate) fn effective_tail(self) -> f64 {
        match self {
            ActivationKind::Spline34 => 2.0,
            _ => 40.0,
        }
    }

    fn cache_slot(self) -> Option<usize> {
        match self {
            ActivationKind::Spline34 => Some(0),
            ActivationKind::SigDiff => Some(1),
            ActivationKind::TanhDiff => Some(2),
            ActivationKind::Tanh => None,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActivationKind::Spline34 => "spline34",
            ActivationKind::SigDiff => "sigdiff",
            ActivationKind::TanhDiff => "tanhdiff",
            ActivationKind::Tanh => "tanh",
        };
        f.write_str(s)
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spline34" => Ok(ActivationKind::Spline34),
            "sigdiff" => Ok(ActivationKind::SigDiff),
            "tanhdiff" => Ok(ActivationKind::TanhDiff),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(Error::Config(format!(
                "unknown activation '{other}' (expected spline34|sigdiff|tanhdiff|tanh)"
            ))),
        }
    }
}

/// `sinh(1)`, the numerator of the product form of the `tanh` difference.
const SINH_ONE: f64 = 1.175_201_193_643_801_4;

/// First two derivatives of the logistic sigmoid.
///
/// Uses `s′ = q/(1+q)²` with `q = e^{-|x|}` and `s″ = -s′·tanh(x/2)`
/// so both stay relatively accurate for large `|x|`, where the naive
/// `s·(1-s)` form loses every significant digit.
fn logistic_d12(x: f64) -> (f64, f64) {
    let q = (-x.abs()).exp();
    let d1 = q / ((1.0 + q) * (1.0 + q));
    (d1, -d1 * (x / 2.0).tanh())
}

/// Logistic difference `s(t+1) - s(t)` in cancellation-free form.
///
/// Both branches evaluate `e^{∓t}(1 - e^{-1})`-style products whose
/// factors are all positive, so the result keeps full relative accuracy
/// even where the two sigmoids agree to machine precision.
fn sigdiff_value(t: f64) -> f64 {
    use std::f64::consts::E;
    if t >= 0.0 {
        let q = (-t).exp();
        q * (1.0 - 1.0 / E) / ((1.0 + q / E) * (1.0 + q))
    } else {
        let p = t.exp();
        p * (E - 1.0) / ((1.0 + p * E) * (1.0 + p))
    }
}

/// First two derivatives of `tanh`.
///
/// Computes `sech²x = (1/cosh x)²` directly instead of `1 - tanh²x`,
/// which collapses to rounding noise once `tanh x` rounds to `±1`.
fn tanh_d12(x: f64) -> (f64, f64) {
    let sech = 1.0 / x.cosh();
    let sech2 = sech * sech;
    (sech2, -2.0 * x.tanh() * sech2)
}

/// Hyperbolic difference `tanh(t+1) - tanh(t)` via the product identity
/// `sinh(1) / (cosh(t+1)·cosh(t))`, exact in real arithmetic and free of
/// cancellation for all `t`.
fn tanhdiff_value(t: f64) -> f64 {
    SINH_ONE / ((t + 1.0).cosh() * t.cosh())
}

/// Spline bump: value and first two derivatives, exploiting evenness.
/// Pieces (in `a = |t|`): `3a^3 - 6a^2 + 4` on `[0, 1)`, `(2 - a)^3` on
/// `[1, 2)`, zero outside. Derivatives follow the parity of the order.
fn spline34_012(t: f64) -> (f64, f64, f64) {
    let a = t.abs();
    if a >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    if a < 1.0 {
        let v = (3.0 * a - 6.0) * a * a + 4.0;
        let d1 = (9.0 * a - 12.0) * a * sign;
        let d2 = 18.0 * a - 12.0;
        (v, d1, d2)
    } else {
        let u = 2.0 - a;
        (u * u * u, -3.0 * u * u * sign, 6.0 * u)
    }
}

/// Value and first two derivatives of the activation at `t`.
///
/// Infallible fast path shared by model evaluation and system assembly.
pub fn eval_all(kind: ActivationKind, t: f64) -> (f64, f64, f64) {
    match kind {
        ActivationKind::Spline34 => spline34_012(t),
        ActivationKind::SigDiff => {
            let (d11, d21) = logistic_d12(t + 1.0);
            let (d10, d20) = logistic_d12(t);
            (sigdiff_value(t), d11 - d10, d21 - d20)
        }
        ActivationKind::TanhDiff => {
            let (d11, d21) = tanh_d12(t + 1.0);
            let (d10, d20) = tanh_d12(t);
            (tanhdiff_value(t), d11 - d10, d21 - d20)
        }
        ActivationKind::Tanh => {
            let (d1, d2) = tanh_d12(t);
            (t.tanh(), d1, d2)
        }
    }
}

/// Evaluates `σ^{(order)}(t)` for `order ∈ {0, 1, 2}`.
///
/// Fails with an argument error for any other derivative order (the
/// activations are only guaranteed twice continuously differentiable).
pub fn eval_sigma(kind: ActivationKind, t: f64, order: usize) -> Result<f64> {
    let (v, d1, d2) = eval_all(kind, t);
    match order {
        0 => Ok(v),
        1 => Ok(d1),
        2 => Ok(d2),
        _ => Err(Error::InvalidArgument(format!(
            "derivative order {order} not available; activations expose orders 0..=2"
        ))),
    }
}

/// Absolute tolerance for the activation-spectrum quadrature.
pub const SIGMA_HAT_TOL: f64 = 1e-10;
const SIGMA_HAT_MAX_PANELS: usize = 4000;
/// Truncation half-width for spectra of the exponentially decaying kinds.
/// The discarded tail mass is below `4 e^{-60} ≈ 3.5e-25`, many orders of
/// magnitude under [`SIGMA_HAT_TOL`].
const SIGMA_HAT_WINDOW: f64 = 60.0;

/// Fourier transform `σ̂(a) = ∫ σ(t) e^{-iat} dt` by adaptive quadrature.
///
/// Integrates over the exact support for the compactly supported spline
/// and over `[-60, 60]` for the exponentially decaying kinds; real and
/// imaginary parts are each resolved to [`SIGMA_HAT_TOL`]. Fails for the
/// plain `tanh` unit (no classical transform) and for non-finite `a`.
pub fn sigma_hat(kind: ActivationKind, a: f64) -> Result<Complex64> {
    if !kind.is_integrable() {
        return Err(Error::Unsupported(
            "plain tanh is not absolutely integrable; its spectrum is undefined".into(),
        ));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spectrum frequency must be finite, got {a}"
        )));
    }
    let half = kind
        .support_radius()
        .unwrap_or(SIGMA_HAT_WINDOW);
    let re = adaptive_gk(
        &mut |t: f64| eval_all(kind, t).0 * (a * t).cos(),
        -half,
        half,
        SIGMA_HAT_TOL,
        SIGMA_HAT_MAX_PANELS,
    )?;
    let im = adaptive_gk(
        &mut |t: f64| -eval_all(kind, t).0 * (a * t).sin(),
        -half,
        half,
        SIGMA_HAT_TOL,
        SIGMA_HAT_MAX_PANELS,
    )?;
    Ok(Complex64::new(re, im))
}

/// The real normalizer `Re σ̂(1) = ∫ σ(t) cos t dt` used by every
/// coefficient formula, computed once per kind and cached.
///
/// The real-valued cosine form of the feature representation is
/// normalized by exactly this cosine moment (for the even spline it
/// coincides with `σ̂(1)` itself). Fails with a configuration error if the
/// moment vanishes, since the representation would then be undefined.
pub fn sigma_hat_one(kind: ActivationKind) -> Result<f64> {
    static CACHE: [OnceLock<f64>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = kind.cache_slot().ok_or_else(|| {
        Error::Unsupported("plain tanh has no spectrum normalizer".to_string())
    })?;
    if let Some(v) = CACHE[slot].get() {
        return Ok(*v);
    }
    let value = sigma_hat(kind, 1.0)?.re;
    if value.abs() < 1e-8 {
        return Err(Error::Config(format!(
            "activation {kind} has vanishing spectrum normalizer at unit frequency"
        )));
    }
    Ok(*CACHE[slot].get_or_init(|| value))
}
