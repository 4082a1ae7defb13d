//! Quadrature building blocks: Gauss–Legendre rules, an adaptive
//! Gauss–Kronrod integrator for 1-D spectra, and the tensor-product /
//! Monte-Carlo grids used for Sobolev norms over the unit cube.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nodes and weights for the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Computed by Newton iteration on the Legendre polynomial; exact for
/// polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "gauss_legendre requires at least one node".into(),
        ));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Symmetric rule: solve for the non-negative half and mirror.
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th root (descending order).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Integrates `f` over `[lo, hi]` with the `n`-point Gauss–Legendre rule.
pub fn gl_integrate(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(n)?;
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(mid + half * x);
    }
    Ok(acc * half)
}

// 15-point Kronrod extension of the 7-point Gauss rule (positive abscissae).
const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: returns the Kronrod estimate and the
/// magnitude of the Gauss/Kronrod discrepancy used as the error proxy.
fn gk15(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (j, (&x, &wk)) in KRONROD_X.iter().zip(&KRONROD_W).enumerate() {
        let (fa, fb) = if x == 0.0 {
            let v = f(mid);
            (v, 0.0)
        } else {
            (f(mid + half * x), f(mid - half * x))
        };
        let s = if x == 0.0 { fa } else { fa + fb };
        kronrod += wk * s;
        // Odd Kronrod indices are the embedded 7-point Gauss abscissae.
        if j % 2 == 1 {
            gauss += GAUSS_W[j / 2] * s;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Uniform panel count the adaptive integrator always starts from. A
/// single Gauss–Kronrod panel can report spurious convergence when every
/// node happens to miss a localized feature; a fixed base grid makes
/// that failure mode require a feature narrower than 1/32 of the domain
/// *and* aligned between nodes, which no integrand in this crate
/// exhibits at the windows used.
const ADAPTIVE_BASE_PANELS: usize = 32;

/// Adaptive Gauss–Kronrod integration of `f` over `[lo, hi]` to absolute
/// tolerance `abs_tol`.
///
/// Lays down a uniform 32-panel base grid, then bisects the panel with
/// the largest error proxy until the summed proxy drops below the
/// tolerance; fails with a numerical error once the panel count reaches
/// `max_panels` without meeting the tolerance.
pub fn adaptive_gk(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::InvalidArgument(format!(
            "adaptive quadrature needs a finite non-empty interval, got [{lo}, {hi}]"
        )));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "adaptive quadrature tolerance must be positive".into(),
        ));
    }
    struct Panel {
        lo: f64,
        hi: f64,
        value: f64,
        err: f64,
    }
    let width = (hi - lo) / ADAPTIVE_BASE_PANELS as f64;
    let mut panels = Vec::with_capacity(ADAPTIVE_BASE_PANELS);
    for k in 0..ADAPTIVE_BASE_PANELS {
        let a = lo + k as f64 * width;
        let b = if k + 1 == ADAPTIVE_BASE_PANELS {
            hi
        } else {
            lo + (k + 1) as f64 * width
        };
        let (value, err) = gk15(f, a, b);
        panels.push(Panel {
            lo: a,
            hi: b,
            value,
            err,
        });
    }
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= abs_tol {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if panels.len() >= max_panels {
            return Err(Error::Numeric(format!(
                "adaptive quadrature did not reach tolerance {abs_tol:.2e} within \
                 {max_panels} panels (residual error estimate {total_err:.2e})"
            )));
        }
        // Split the worst panel.
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .map(|(i, _)| i)
            .expect("panel list is never empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            return Err(Error::Numeric(
                "adaptive quadrature interval collapsed below floating-point resolution".into(),
            ));
        }
        let (v1, e1) = gk15(f, p.lo, mid);
        let (v2, e2) = gk15(f, mid, p.hi);
        panels.push(Panel {
            lo: p.lo,
            hi: mid,
            value: v1,
            err: e1,
        });
        panels.push(Panel {
            lo: mid,
            hi: p.hi,
            value: v2,
            err: e2,
        });
    }
}

/// Quadrature grid over the unit cube `[0, 1]^d`: points with weights
/// summing to (approximately) the cube volume.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    d: usize,
    /// Row-major point coordinates, `len = npoints * d`.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Tensor-product Gauss–Legendre grid with `n_per_axis` nodes per axis.
    ///
    /// Rejects degenerate resolutions (a single node per axis cannot see
    /// curvature) and dimensions outside `1..=3`.
    pub fn tensor_gauss_legendre(d: usize, n_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "tensor grids support dimensions 1..=3, got {d}"
            )));
        }
        if n_per_axis < 2 {
            return Err(Error::InvalidArgument(
                "degenerate quadrature grid: need at least 2 nodes per axis".into(),
            ));
        }
        let (nodes, weights) = gauss_legendre(n_per_axis)?;
        // Map [-1, 1] onto [0, 1].
        let nodes: Vec<f64> = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let axis_w: Vec<f64> = weights.iter().map(|w| 0.5 * w).collect();
        let npts = n_per_axis.pow(d as u32);
        let mut points = Vec::with_capacity(npts * d);
        let mut wts = Vec::with_capacity(npts);
        let mut idx = vec![0usize; d];
        for _ in 0..npts {
            let mut w = 1.0;
            for k in 0..d {
                points.push(nodes[idx[k]]);
                w *= axis_w[idx[k]];
            }
            wts.push(w);
            // Odometer increment.
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < n_per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            d,
            points,
            weights: wts,
        })
    }

    /// Uniform Monte-Carlo grid with `n` points and equal weights `1/n`;
    /// the fallback for d = 3 where tensor grids get expensive.
    pub fn monte_carlo(d: usize, n: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "grid dimension must be at least 1".into(),
            ));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(
                "degenerate quadrature grid: need at least 2 sample points".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            points.push(rng.random::<f64>());
        }
        let w = 1.0 / n as f64;
        Ok(Self {
            d,
            points,
            weights: vec![w; n],
        })
    }

    /// Spatial dimension of the grid.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of quadrature points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True if the grid holds no points (never for constructed grids).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Weight of point `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}
