//! Elliptic Dirichlet problems on the unit hypercube and the regularized
//! least-squares objective enforcing them at random collocation points.
//!
//! The PDE is `-Δu + V u = f` on `Ω = [0,1]^d` with `u = g` on `∂Ω`. A
//! candidate network `u_a(x) = Σ_j a_j σ(W_j·x + B_j)` turns the residuals
//! into linear functions of `a`, so the empirical objective
//!
//! ```text
//! F_n(a) = (w_int/n)‖Φ_int a + g1‖² + (w_bd/n)‖Φ_bd a + g2‖² + λ‖a‖²
//! ```
//!
//! is a strongly convex quadratic. Interior rows are
//! `-‖W_j‖² σ″(W_j·x_i + B_j) + V(x_i) σ(W_j·x_i + B_j)` with
//! `g1 = -f(x_i)`; boundary rows are plain activations with `g2 = -g(y_i)`.
//! The measure weights are exact for the hypercube: `w_int = 1`,
//! `w_bd = 2d`.

use crate::activation::{eval_all, ActivationKind};
use crate::error::{Error, Result};
use crate::quad::QuadratureGrid;
use crate::representation::bank_value;
use crate::sampling::FeatureBank;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A second-order elliptic Dirichlet problem on `[0,1]^d`.
#[derive(Clone)]
pub struct EllipticProblem {
    d: usize,
    potential: ScalarField,
    source: ScalarField,
    boundary: ScalarField,
    exact: Option<ScalarField>,
    label: String,
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("d", &self.d)
            .field("label", &self.label)
            .field("has_exact_solution", &self.exact.is_some())
            .finish()
    }
}

impl EllipticProblem {
    /// Problem from explicit coefficient fields. `exact` is used only for
    /// evaluation metrics, never by the solvers.
    pub fn new(
        d: usize,
        potential: ScalarField,
        source: ScalarField,
        boundary: ScalarField,
        exact: Option<ScalarField>,
        label: &str,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "problem dimension must be at least 1".into(),
            ));
        }
        Ok(EllipticProblem {
            d,
            potential,
            source,
            boundary,
            exact,
            label: label.to_string(),
        })
    }

    /// `u*(x) = Π_k sin(π x_k)` with constant potential `c ≥ 0`, so
    /// `f = (dπ² + c)·u*` and `g ≡ 0`.
    pub fn product_sine(d: usize, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "constant potential must be finite, got {c}"
            )));
        }
        let exact = move |x: &[f64]| -> f64 {
            x.iter().map(|v| (std::f64::consts::PI * v).sin()).product()
        };
        let factor = d as f64 * std::f64::consts::PI.powi(2) + c;
        let label = if c == 0.0 {
            format!("product_sine(d={d})")
        } else {
            format!("product_sine(d={d},c={c})")
        };
        Self::new(
            d,
            Arc::new(move |_: &[f64]| c),
            Arc::new(move |x: &[f64]| factor * exact(x)),
            Arc::new(|_: &[f64]| 0.0),
            Some(Arc::new(exact)),
            &label,
        )
    }

    /// The 1-D Poisson reference problem: `u*(x) = sin(πx)`, `V ≡ 0`,
    /// `f(x) = π² sin(πx)`, `g ≡ 0`.
    pub fn poisson1d() -> Self {
        let mut p = Self::product_sine(1, 0.0).expect("valid fixed parameters");
        p.label = "poisson1d".to_string();
        p
    }

    /// Manufactured single-feature solution `u*(x) = σ(w·x + b)` with
    /// constant potential `c`; the source is computed so `u*` solves the
    /// problem exactly.
    pub fn single_feature(kind: ActivationKind, w: Vec<f64>, b: f64, c: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument(
                "feature weight vector must be non-empty".into(),
            ));
        }
        if !c.is_finite() || !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature parameters must be finite".into(),
            ));
        }
        let d = w.len();
        let norm2: f64 = (0..d).map(|k| w[k] * w[k]).sum();
        let pre = move |w: &[f64], b: f64, x: &[f64]| -> f64 {
            let mut t = b;
            for (k, xk) in x.iter().enumerate() {
                t += w[k] * xk;
            }
            t
        };
        let (w1, w2, w3) = (w.clone(), w.clone(), w);
        let exact = move |x: &[f64]| eval_all(kind, pre(&w1, b, x)).0;
        let source = move |x: &[f64]| {
            let (s0, _, s2) = eval_all(kind, pre(&w2, b, x));
            -norm2 * s2 + c * s0
        };
        let boundary = move |y: &[f64]| eval_all(kind, pre(&w3, b, y)).0;
        Self::new(
            d,
            Arc::new(move |_: &[f64]| c),
            Arc::new(source),
            Arc::new(boundary),
            Some(Arc::new(exact)),
            "single_feature",
        )
    }

    /// Named registry used by configs. Known names: `poisson1d` (d must
    /// be 1), `product_sine` (any d, constant potential).
    pub fn from_name(name: &str, d: usize, potential: f64) -> Result<Self> {
        match name {
            "poisson1d" => {
                if d != 1 {
                    return Err(Error::Config(format!(
                        "poisson1d is one-dimensional (config asked for d={d})"
                    )));
                }
                Ok(Self::poisson1d())
            }
            "product_sine" => Self::product_sine(d, potential),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (known: poisson1d, product_sine)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        (self.potential)(x)
    }

    pub fn source(&self, x: &[f64]) -> f64 {
        (self.source)(x)
    }

    pub fn boundary_data(&self, y: &[f64]) -> f64 {
        (self.boundary)(y)
    }

    pub fn exact_solution(&self, x: &[f64]) -> Option<f64> {
        self.exact.as_ref().map(|u| u(x))
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }
}

/// Random interior and boundary collocation points (equal counts).
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    /// `n × d` interior points, strictly inside the open cube.
    pub interior: DMatrix<f64>,
    /// `n × d` boundary points, each on a face of the cube.
    pub boundary: DMatrix<f64>,
    pub seed: u64,
}

impl CollocationSet {
    pub fn n(&self) -> usize {
        self.interior.nrows()
    }

    pub fn dim(&self) -> usize {
        self.interior.ncols()
    }

    pub(crate) fn interior_row(&self, i: usize, buf: &mut [f64]) {
        for (k, v) in buf.iter_mut().enumerate() {
            *v = self.interior[(i, k)];
        }
    }

    pub(crate) fn boundary_row(&self, i: usize, buf: &mut [f64]) {
        for (k, v) in buf.iter_mut().enumerate() {
            *v = self.boundary[(i, k)];
        }
    }
}

/// Draws `n` interior points uniform on `(0,1)^d` and `n` boundary points
/// (face chosen uniformly — all faces have equal measure — then uniform on
/// the face). Deterministic in `(n, seed, d)`.
pub fn sample_collocation(problem: &EllipticProblem, n: usize, seed: u64) -> Result<CollocationSet> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "collocation needs at least one point".into(),
        ));
    }
    let d = problem.dim();
    let mut interior = DMatrix::zeros(n, d);
    let mut boundary = DMatrix::zeros(n, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    for i in 0..n {
        for k in 0..d {
            // Uniform on the open interval: the closed-endpoint draw has
            // probability ~2^-53 but the strict-interior contract is cheap
            // to honor exactly.
            let v = loop {
                let v: f64 = rng.random();
                if v > 0.0 && v < 1.0 {
                    break v;
                }
            };
            interior[(i, k)] = v;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for i in 0..n {
        let face = rng.random_range(0..2 * d);
        for k in 0..d {
            boundary[(i, k)] = if k == face / 2 {
                (face % 2) as f64
            } else {
                rng.random()
            };
        }
    }
    Ok(CollocationSet {
        interior,
        boundary,
        seed,
    })
}

/// The assembled quadratic objective; see the module docs for `F_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    /// `n × m` interior rows `-‖W_j‖²σ″(t_ij) + V(x_i)σ(t_ij)`.
    pub phi_int: DMatrix<f64>,
    /// `n × m` boundary rows `σ(W_j·y_i + B_j)`.
    pub phi_bd: DMatrix<f64>,
    /// `-f(x_i)`.
    pub g1: DVector<f64>,
    /// `-g(y_i)`.
    pub g2: DVector<f64>,
    /// Interior measure `|Ω| = 1`.
    pub w_int: f64,
    /// Boundary measure `|∂Ω| = 2d`.
    pub w_bd: f64,
    /// Ridge parameter `λ ≥ 0`.
    pub lambda: f64,
}

impl AssembledSystem {
    pub fn n(&self) -> usize {
        self.phi_int.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi_int.ncols()
    }
}

fn check_field(value: f64, what: &str, index: usize, x: &[f64]) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::Data(format!(
            "{what} is not finite at point #{index} = {x:?} (value {value})"
        )));
    }
    Ok(value)
}

/// Fills the interior/boundary feature matrices and right-hand sides for
/// one bank and collocation set.
pub fn assemble(
    problem: &EllipticProblem,
    bank: &FeatureBank,
    colloc: &CollocationSet,
    kind: ActivationKind,
    lambda: f64,
) -> Result<AssembledSystem> {
    let d = problem.dim();
    if bank.dim() != d || colloc.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: problem d={d}, bank d={}, collocation d={}",
            bank.dim(),
            colloc.dim()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ridge parameter must be finite and >= 0, got {lambda}"
        )));
    }
    let n = colloc.n();
    let m = bank.m();
    let norms2: Vec<f64> = (0..m)
        .map(|j| (0..d).map(|k| bank.weights[(j, k)].powi(2)).sum())
        .collect();
    let mut phi_int = DMatrix::zeros(n, m);
    let mut phi_bd = DMatrix::zeros(n, m);
    let mut g1 = DVector::zeros(n);
    let mut g2 = DVector::zeros(n);
    let mut x = vec![0.0; d];
    for i in 0..n {
        colloc.interior_row(i, &mut x);
        let v = check_field(problem.potential(&x), "potential", i, &x)?;
        let f = check_field(problem.source(&x), "source term", i, &x)?;
        g1[i] = -f;
        for j in 0..m {
            let t = bank.pre_activation(j, &x);
            let (s0, _, s2) = eval_all(kind, t);
            phi_int[(i, j)] = -norms2[j] * s2 + v * s0;
        }
    }
    for i in 0..n {
        colloc.boundary_row(i, &mut x);
        let g = check_field(problem.boundary_data(&x), "boundary data", i, &x)?;
        g2[i] = -g;
        for j in 0..m {
            let t = bank.pre_activation(j, &x);
            let (s0, _, _) = eval_all(kind, t);
            phi_bd[(i, j)] = s0;
        }
    }
    Ok(AssembledSystem {
        phi_int,
        phi_bd,
        g1,
        g2,
        w_int: 1.0,
        w_bd: 2.0 * d as f64,
        lambda,
    })
}

/// `F_n(a)`.
pub fn empirical_loss(system: &AssembledSystem, a: &DVector<f64>) -> Result<f64> {
    if a.len() != system.m() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has length {}, system expects {}",
            a.len(),
            system.m()
        )));
    }
    let n = system.n() as f64;
    let r1 = &system.phi_int * a + &system.g1;
    let r2 = &system.phi_bd * a + &system.g2;
    Ok(system.w_int / n * r1.norm_squared()
        + system.w_bd / n * r2.norm_squared()
        + system.lambda * a.norm_squared())
}

/// `∇F_n(a) = 2(w_int/n)Φᵢᵀ(Φᵢa+g1) + 2(w_bd/n)Φᵦᵀ(Φᵦa+g2) + 2λa`.
pub fn loss_gradient(system: &AssembledSystem, a: &DVector<f64>) -> Result<DVector<f64>> {
    if a.len() != system.m() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has length {}, system expects {}",
            a.len(),
            system.m()
        )));
    }
    let n = system.n() as f64;
    let r1 = &system.phi_int * a + &system.g1;
    let r2 = &system.phi_bd * a + &system.g2;
    Ok(system.phi_int.transpose() * r1 * (2.0 * system.w_int / n)
        + system.phi_bd.transpose() * r2 * (2.0 * system.w_bd / n)
        + a * (2.0 * system.lambda))
}

/// Monte-Carlo estimate of the population loss (no regularizer) on fresh
/// collocation points; streams through the sample without assembling
/// matrices. Use a test seed distinct from the training seed.
pub fn estimate_test_loss(
    problem: &EllipticProblem,
    bank: &FeatureBank,
    kind: ActivationKind,
    a: &DVector<f64>,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    if a.len() != bank.m() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has length {}, bank holds {} features",
            a.len(),
            bank.m()
        )));
    }
    if bank.dim() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "bank dimension {} does not match problem dimension {}",
            bank.dim(),
            problem.dim()
        )));
    }
    let colloc = sample_collocation(problem, n_test, seed)?;
    let d = problem.dim();
    let m = bank.m();
    let norms2: Vec<f64> = (0..m)
        .map(|j| (0..d).map(|k| bank.weights[(j, k)].powi(2)).sum())
        .collect();
    let mut x = vec![0.0; d];
    let mut interior_sum = 0.0;
    let mut boundary_sum = 0.0;
    for i in 0..n_test {
        colloc.interior_row(i, &mut x);
        let v = check_field(problem.potential(&x), "potential", i, &x)?;
        let f = check_field(problem.source(&x), "source term", i, &x)?;
        let mut r = -f;
        for j in 0..m {
            let t = bank.pre_activation(j, &x);
            let (s0, _, s2) = eval_all(kind, t);
            r += a[j] * (-norms2[j] * s2 + v * s0);
        }
        interior_sum += r * r;
        colloc.boundary_row(i, &mut x);
        let g = check_field(problem.boundary_data(&x), "boundary data", i, &x)?;
        let mut r = -g;
        for j in 0..m {
            let t = bank.pre_activation(j, &x);
            let (s0, _, _) = eval_all(kind, t);
            r += a[j] * s0;
        }
        boundary_sum += r * r;
    }
    let n = n_test as f64;
    Ok(1.0 / n * interior_sum + 2.0 * d as f64 / n * boundary_sum)
}

/// `‖u_a − u*‖_{L²(Ω)} / ‖u*‖_{L²(Ω)}` by quadrature on the grid.
pub fn relative_l2_error(
    problem: &EllipticProblem,
    bank: &FeatureBank,
    kind: ActivationKind,
    a: &DVector<f64>,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !problem.has_exact_solution() {
        return Err(Error::Unsupported(format!(
            "problem '{}' has no reference solution; the relative error metric is unavailable",
            problem.label()
        )));
    }
    if grid.dim() != problem.dim() || bank.dim() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: problem d={}, bank d={}, grid d={}",
            problem.dim(),
            bank.dim(),
            grid.dim()
        )));
    }
    if a.len() != bank.m() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has length {}, bank holds {} features",
            a.len(),
            bank.m()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        let x = grid.point(i);
        let u_star = problem.exact_solution(x).expect("checked above");
        let u_a = bank_value(bank, kind, a.as_slice(), 1.0, x);
        num += grid.weight(i) * (u_a - u_star).powi(2);
        den += grid.weight(i) * u_star * u_star;
    }
    if den <= 0.0 {
        return Err(Error::Numeric(
            "reference solution has zero norm on the grid; relative error undefined".into(),
        ));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample, PriorSpec};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn feature_bank(rows: &[(&[f64], f64)], prior: PriorSpec) -> FeatureBank {
        let d = rows[0].0.len();
        let m = rows.len();
        let mut weights = DMatrix::zeros(m, d);
        let mut biases = DVector::zeros(m);
        for (i, (w, b)) in rows.iter().enumerate() {
            for (k, wk) in w.iter().enumerate() {
                weights[(i, k)] = *wk;
            }
            biases[i] = *b;
        }
        FeatureBank {
            weights,
            biases,
            prior,
            seed: 0,
        }
    }

    fn single_point_system(v: f64) -> AssembledSystem {
        // d=1, feature (w,b)=(1,0), interior point x=0, boundary y=0.
        let problem = EllipticProblem::new(
            1,
            Arc::new(move |_: &[f64]| v),
            Arc::new(|_: &[f64]| 0.0),
            Arc::new(|_: &[f64]| 0.0),
            None,
            "spot",
        )
        .unwrap();
        let bank = feature_bank(&[(&[1.0], 0.0)], PriorSpec::compact(2.0, 1).unwrap());
        let colloc = CollocationSet {
            interior: DMatrix::from_row_slice(1, 1, &[0.0]),
            boundary: DMatrix::from_row_slice(1, 1, &[0.0]),
            seed: 0,
        };
        assemble(&problem, &bank, &colloc, ActivationKind::Spline34, 0.0).unwrap()
    }

    #[test]
    fn assembled_entries_match_spot_values() {
        // -σ″(0) = 12 with V ≡ 0; adding V ≡ 1 contributes σ(0) = 4.
        let sys = single_point_system(0.0);
        assert_relative_eq!(sys.phi_int[(0, 0)], 12.0, epsilon = 1e-15);
        assert_relative_eq!(sys.phi_bd[(0, 0)], 4.0, epsilon = 1e-15);
        let sys = single_point_system(1.0);
        assert_relative_eq!(sys.phi_int[(0, 0)], 16.0, epsilon = 1e-15);
        assert_eq!((sys.w_int, sys.w_bd), (1.0, 2.0));
    }

    #[test]
    fn collocation_respects_geometry() {
        let problem = EllipticProblem::poisson1d();
        let c = sample_collocation(&problem, 64, 5).unwrap();
        for i in 0..64 {
            assert!(c.interior[(i, 0)] > 0.0 && c.interior[(i, 0)] < 1.0);
            assert!(c.boundary[(i, 0)] == 0.0 || c.boundary[(i, 0)] == 1.0);
        }
        let again = sample_collocation(&problem, 64, 5).unwrap();
        assert_eq!(c, again, "identical seeds must reproduce the set");
        let other = sample_collocation(&problem, 64, 6).unwrap();
        assert_ne!(c, other);
    }

    #[test]
    fn boundary_faces_are_sampled_uniformly() {
        let problem = EllipticProblem::product_sine(2, 0.0).unwrap();
        let n = 100_000;
        let c = sample_collocation(&problem, n, 7).unwrap();
        let mut counts = [0usize; 4];
        for i in 0..n {
            let (y0, y1) = (c.boundary[(i, 0)], c.boundary[(i, 1)]);
            if y0 == 0.0 {
                counts[0] += 1;
            } else if y0 == 1.0 {
                counts[1] += 1;
            } else if y1 == 0.0 {
                counts[2] += 1;
            } else if y1 == 1.0 {
                counts[3] += 1;
            } else {
                panic!("point ({y0},{y1}) is not on any face");
            }
        }
        for count in counts {
            let frac = count as f64 / n as f64;
            assert!((frac - 0.25).abs() < 0.01, "face fraction {frac}");
        }
    }

    #[test]
    fn loss_examples() {
        let problem = EllipticProblem::poisson1d();
        let bank = sample(&PriorSpec::compact(4.0, 1).unwrap(), 12, 3).unwrap();
        let colloc = sample_collocation(&problem, 40, 11).unwrap();
        let sys = assemble(&problem, &bank, &colloc, ActivationKind::Spline34, 0.25).unwrap();
        // Zero coefficients: data terms only.
        let a = DVector::zeros(12);
        let expected = sys.w_int * sys.g1.norm_squared() / 40.0
            + sys.w_bd * sys.g2.norm_squared() / 40.0;
        assert_relative_eq!(
            empirical_loss(&sys, &a).unwrap(),
            expected,
            epsilon = 1e-14
        );
        // Doubling λ adds exactly λ‖a‖².
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DVector::from_fn(12, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let mut sys2 = sys.clone();
        sys2.lambda = 0.5;
        let f1 = empirical_loss(&sys, &a).unwrap();
        let f2 = empirical_loss(&sys2, &a).unwrap();
        assert_relative_eq!(f2 - f1, 0.25 * a.norm_squared(), epsilon = 1e-12);
        // Dimension mismatch.
        assert!(matches!(
            empirical_loss(&sys, &DVector::zeros(5)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let problem = EllipticProblem::poisson1d();
        let bank = sample(&PriorSpec::compact(4.0, 1).unwrap(), 10, 3).unwrap();
        let colloc = sample_collocation(&problem, 50, 13).unwrap();
        let sys = assemble(&problem, &bank, &colloc, ActivationKind::Spline34, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DVector::from_fn(10, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            0.1 * g
        });
        let grad = loss_gradient(&sys, &a).unwrap();
        let h = 1e-6;
        for k in 0..10 {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[k] += h;
            am[k] -= h;
            let fd =
                (empirical_loss(&sys, &ap).unwrap() - empirical_loss(&sys, &am).unwrap())
                    / (2.0 * h);
            assert!(
                (grad[k] - fd).abs() <= 1e-6 * (1.0 + grad[k].abs()),
                "component {k}: {} vs {fd}",
                grad[k]
            );
        }
    }

    #[test]
    fn loss_is_strongly_convex() {
        let problem = EllipticProblem::poisson1d();
        let bank = sample(&PriorSpec::compact(4.0, 1).unwrap(), 8, 3).unwrap();
        let colloc = sample_collocation(&problem, 30, 17).unwrap();
        let lambda = 0.3;
        let sys = assemble(&problem, &bank, &colloc, ActivationKind::Spline34, lambda).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a = DVector::from_fn(8, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            });
            let b = DVector::from_fn(8, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            });
            let fa = empirical_loss(&sys, &a).unwrap();
            let fb = empirical_loss(&sys, &b).unwrap();
            let grad = loss_gradient(&sys, &a).unwrap();
            let lower = fa + grad.dot(&(&b - &a)) + lambda * (&b - &a).norm_squared();
            assert!(
                fb >= lower - 1e-9 * (1.0 + fb.abs()),
                "strong convexity violated: {fb} < {lower}"
            );
        }
    }

    #[test]
    fn manufactured_solution_reaches_the_regularizer_floor() {
        // With the exact feature in the bank and a selecting it, residuals
        // vanish identically and F_n = λ.
        let kind = ActivationKind::Spline34;
        let problem = EllipticProblem::single_feature(kind, vec![1.2], 0.3, 0.5).unwrap();
        let bank = feature_bank(
            &[(&[1.2], 0.3), (&[0.7], 0.1), (&[-0.4], 0.9)],
            PriorSpec::compact(2.0, 1).unwrap(),
        );
        let colloc = sample_collocation(&problem, 25, 19).unwrap();
        let lambda = 0.07;
        let sys = assemble(&problem, &bank, &colloc, kind, lambda).unwrap();
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let loss = empirical_loss(&sys, &a).unwrap();
        assert!(
            (loss - lambda).abs() <= 1e-15,
            "expected the pure regularizer value {lambda}, got {loss}"
        );
    }

    #[test]
    fn non_finite_data_errors_name_the_point() {
        let problem = EllipticProblem::new(
            1,
            Arc::new(|_: &[f64]| 0.0),
            Arc::new(|x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 1.0 }),
            Arc::new(|_: &[f64]| 0.0),
            None,
            "nan_source",
        )
        .unwrap();
        let bank = sample(&PriorSpec::compact(2.0, 1).unwrap(), 4, 1).unwrap();
        let colloc = sample_collocation(&problem, 50, 3).unwrap();
        match assemble(&problem, &bank, &colloc, ActivationKind::Spline34, 0.1) {
            Err(Error::Data(msg)) => {
                assert!(
                    msg.contains("source term") && msg.contains("point #"),
                    "message should name the offending point: {msg}"
                );
            }
            other => panic!("expected a data error, got {other:?}"),
        }
    }

    #[test]
    fn test_loss_estimates_population_quantities() {
        let problem = EllipticProblem::poisson1d();
        let bank = sample(&PriorSpec::compact(4.0, 1).unwrap(), 6, 3).unwrap();
        // a = 0: the estimate is ∫f² + ∫g² = π⁴/2 up to MC error.
        let a = DVector::zeros(6);
        let est = estimate_test_loss(&problem, &bank, ActivationKind::Spline34, &a, 200_000, 99)
            .unwrap();
        let exact = std::f64::consts::PI.powi(4) / 2.0;
        assert!((est - exact).abs() < 0.5, "estimate {est} vs {exact}");
        // Fresh seeds agree within MC noise.
        let est2 = estimate_test_loss(&problem, &bank, ActivationKind::Spline34, &a, 200_000, 100)
            .unwrap();
        assert!((est - est2).abs() < 0.5, "estimates {est} vs {est2}");
    }

    #[test]
    fn manufactured_coefficients_give_zero_test_loss() {
        let kind = ActivationKind::Spline34;
        let problem = EllipticProblem::single_feature(kind, vec![0.8], -0.2, 1.0).unwrap();
        let bank = feature_bank(&[(&[0.8], -0.2)], PriorSpec::compact(2.0, 1).unwrap());
        let a = DVector::from_vec(vec![1.0]);
        let est = estimate_test_loss(&problem, &bank, kind, &a, 10_000, 5).unwrap();
        assert!(est.abs() <= 1e-20, "exact solution should zero the loss: {est}");
    }

    #[test]
    fn empirical_loss_converges_to_test_loss() {
        // LLN: F_n(a) − λ‖a‖² over fresh collocation draws approaches the
        // population loss estimated independently.
        let problem = EllipticProblem::poisson1d();
        let bank = sample(&PriorSpec::compact(4.0, 1).unwrap(), 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = DVector::from_fn(6, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            0.05 * g
        });
        let lambda = 0.2;
        let n = 100_000;
        let mut train_mean = 0.0;
        for seed in [301u64, 302, 303] {
            let colloc = sample_collocation(&problem, n, seed).unwrap();
            let sys =
                assemble(&problem, &bank, &colloc, ActivationKind::Spline34, lambda).unwrap();
            train_mean +=
                empirical_loss(&sys, &a).unwrap() - lambda * a.norm_squared();
        }
        train_mean /= 3.0;
        let test = estimate_test_loss(&problem, &bank, ActivationKind::Spline34, &a, n, 999)
            .unwrap();
        assert!(
            (train_mean - test).abs() <= 0.01 * test.abs(),
            "train-side mean {train_mean} vs test-side {test}"
        );
    }

    #[test]
    fn relative_error_metric() {
        let kind = ActivationKind::Spline34;
        let problem = EllipticProblem::single_feature(kind, vec![0.9], 0.1, 0.0).unwrap();
        let bank = feature_bank(&[(&[0.9], 0.1)], PriorSpec::compact(2.0, 1).unwrap());
        let grid = QuadratureGrid::tensor_gauss_legendre(1, 32).unwrap();
        let exact = DVector::from_vec(vec![1.0]);
        let err = relative_l2_error(&problem, &bank, kind, &exact, &grid).unwrap();
        assert!(err <= 1e-14, "exact coefficients should give zero error: {err}");
        let doubled = DVector::from_vec(vec![2.0]);
        let err = relative_l2_error(&problem, &bank, kind, &doubled, &grid).unwrap();
        assert_relative_eq!(err, 1.0, epsilon = 1e-12);
        // Missing reference solution → unsupported metric.
        let anon = EllipticProblem::new(
            1,
            Arc::new(|_: &[f64]| 0.0),
            Arc::new(|_: &[f64]| 1.0),
            Arc::new(|_: &[f64]| 0.0),
            None,
            "no_reference",
        )
        .unwrap();
        assert!(matches!(
            relative_l2_error(&anon, &bank, kind, &exact, &grid),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn registry_and_validation() {
        assert_eq!(EllipticProblem::poisson1d().label(), "poisson1d");
        assert!(EllipticProblem::from_name("poisson1d", 1, 0.0).is_ok());
        assert!(matches!(
            EllipticProblem::from_name("poisson1d", 2, 0.0),
            Err(Error::Config(_))
        ));
        assert!(EllipticProblem::from_name("product_sine", 3, 2.0).is_ok());
        assert!(matches!(
            EllipticProblem::from_name("unknown", 1, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            sample_collocation(&EllipticProblem::poisson1d(), 0, 1),
            Err(Error::InvalidArgument(_))
        ));
        // Interior source check: product_sine solves its own PDE.
        let p = EllipticProblem::product_sine(2, 1.5).unwrap();
        let x = [0.3, 0.7];
        let u = p.exact_solution(&x).unwrap();
        let expected = (2.0 * std::f64::consts::PI.powi(2) + 1.5) * u;
        assert_relative_eq!(p.source(&x), expected, epsilon = 1e-12);
        assert_eq!(p.boundary_data(&[0.0, 0.4]), 0.0);
    }
}
