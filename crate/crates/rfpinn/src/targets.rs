//! Reference target functions for approximation experiments.
//!
//! Every target exposes pointwise values, gradients, and Hessians in closed
//! form together with its Fourier data (modulus and phase). The Fourier
//! convention throughout is the inverse-normalized one,
//!
//! ```text
//! f(x) = ∫ f̂(ω) e^{i ω·x} dω,
//! ```
//!
//! so the unit Gaussian `e^{-‖x‖²/2}` has `f̂(ω) = (2π)^{-d/2} e^{-‖ω‖²/2}`.
//! Gaussian mixtures keep every quantity analytic, which is what makes them
//! usable as ground truth for Sobolev-error measurements.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// One isotropic Gaussian bump `weight · exp(-‖x-center‖²/(2 width²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum TargetKind {
    Mixture(Vec<GaussianComponent>),
    /// Synthetic spectrum with `|f̂| ≡ 1`, `θ ≡ 0`; lets tests probe
    /// coefficient formulas at chosen frequencies. Has no pointwise
    /// evaluation (the inverse transform diverges).
    #[cfg(test)]
    FlatSpectrum,
}

/// A target function with closed-form derivatives and Fourier data.
#[derive(Debug, Clone, PartialEq)]
pub struct BarronTarget {
    d: usize,
    label: String,
    kind: TargetKind,
}

impl BarronTarget {
    /// `exp(-‖x‖²/2)` centered at the origin.
    pub fn unit_gaussian(d: usize) -> Result<Self> {
        Self::gaussian_mixture(
            d,
            vec![GaussianComponent {
                weight: 1.0,
                center: vec![0.0; d],
                width: 1.0,
            }],
            "unit_gaussian",
        )
    }

    /// A single Gaussian bump at `center` with the given `width`; its
    /// spectrum carries the nontrivial phase `θ(ω) = -ω·center`.
    pub fn shifted_gaussian(d: usize, center: Vec<f64>, width: f64) -> Result<Self> {
        Self::gaussian_mixture(
            d,
            vec![GaussianComponent {
                weight: 1.0,
                center,
                width,
            }],
            "shifted_gaussian",
        )
    }

    /// General Gaussian mixture. Validates shapes and parameter ranges.
    pub fn gaussian_mixture(
        d: usize,
        components: Vec<GaussianComponent>,
        label: &str,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "target dimension must be at least 1".into(),
            ));
        }
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "gaussian mixture needs at least one component (use zero() for the zero target)"
                    .into(),
            ));
        }
        for (j, c) in components.iter().enumerate() {
            if c.center.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "mixture component {j}: center has dimension {}, expected {d}",
                    c.center.len()
                )));
            }
            if !c.weight.is_finite() || !c.width.is_finite() || c.width <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "mixture component {j}: weight must be finite and width positive \
                     (got weight={}, width={})",
                    c.weight, c.width
                )));
            }
        }
        Ok(BarronTarget {
            d,
            label: label.to_string(),
            kind: TargetKind::Mixture(components),
        })
    }

    /// The identically-zero target (empty spectrum).
    pub fn zero(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "target dimension must be at least 1".into(),
            ));
        }
        Ok(BarronTarget {
            d,
            label: "zero".to_string(),
            kind: TargetKind::Mixture(vec![GaussianComponent {
                weight: 0.0,
                center: vec![0.0; d],
                width: 1.0,
            }]),
        })
    }

    /// Spectrum-only probe with `|f̂| ≡ 1` and `θ ≡ 0`; panics on pointwise
    /// evaluation. Testing hook for coefficient formulas.
    #[cfg(test)]
    pub(crate) fn flat_spectrum(d: usize) -> Self {
        BarronTarget {
            d,
            label: "flat_spectrum".to_string(),
            kind: TargetKind::FlatSpectrum,
        }
    }

    /// Look up a named registry target. Known names: `unit_gaussian`,
    /// `shifted_gaussian`, `gaussian_pair`, `zero`.
    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        match name {
            "unit_gaussian" => Self::unit_gaussian(d),
            "shifted_gaussian" => Self::shifted_gaussian(d, vec![0.5; d], 0.4),
            "gaussian_pair" => Self::gaussian_mixture(
                d,
                vec![
                    GaussianComponent {
                        weight: 1.0,
                        center: vec![0.3; d],
                        width: 0.35,
                    },
                    GaussianComponent {
                        weight: -0.5,
                        center: vec![0.7; d],
                        width: 0.25,
                    },
                ],
                "gaussian_pair",
            ),
            "zero" => Self::zero(d),
            other => Err(Error::Config(format!(
                "unknown target '{other}' (known: unit_gaussian, shifted_gaussian, \
                 gaussian_pair, zero)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn components(&self) -> &[GaussianComponent] {
        match &self.kind {
            TargetKind::Mixture(cs) => cs,
            #[cfg(test)]
            TargetKind::FlatSpectrum => {
                panic!("flat-spectrum probe has no pointwise evaluation")
            }
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, target expects {}",
                v.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut v = 0.0;
        for c in self.components() {
            v += c.weight * bump(x, &c.center, c.width);
        }
        Ok(v)
    }

    /// `∇f(x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.d];
        for c in self.components() {
            let e = c.weight * bump(x, &c.center, c.width);
            let s2 = c.width * c.width;
            for k in 0..self.d {
                g[k] -= e * (x[k] - c.center[k]) / s2;
            }
        }
        Ok(g)
    }

    /// Full Hessian `∂_k ∂_l f(x)`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let mut h = DMatrix::zeros(self.d, self.d);
        for c in self.components() {
            let e = c.weight * bump(x, &c.center, c.width);
            let s2 = c.width * c.width;
            for k in 0..self.d {
                for l in 0..self.d {
                    let mut term = (x[k] - c.center[k]) * (x[l] - c.center[l]) / (s2 * s2);
                    if k == l {
                        term -= 1.0 / s2;
                    }
                    h[(k, l)] += e * term;
                }
            }
        }
        Ok(h)
    }

    /// `Δf(x)` (trace of the Hessian).
    pub fn laplacian(&self, x: &[f64]) -> Result<f64> {
        Ok(self.hessian(x)?.trace())
    }

    /// Complex Fourier transform `f̂(ω)` in the `f = ∫ f̂ e^{iωx} dω`
    /// convention.
    pub fn fourier(&self, omega: &[f64]) -> Result<Complex64> {
        self.check_dim(omega)?;
        let cs = match &self.kind {
            TargetKind::Mixture(cs) => cs,
            #[cfg(test)]
            TargetKind::FlatSpectrum => return Ok(Complex64::new(1.0, 0.0)),
        };
        let norm2: f64 = omega.iter().map(|w| w * w).sum();
        let mut v = Complex64::new(0.0, 0.0);
        for c in cs {
            let s = c.width;
            let amp = c.weight
                * s.powi(self.d as i32)
                * (2.0 * std::f64::consts::PI).powf(-0.5 * self.d as f64)
                * (-0.5 * s * s * norm2).exp();
            let dot: f64 = omega.iter().zip(&c.center).map(|(w, m)| w * m).sum();
            v += amp * Complex64::new(0.0, -dot).exp();
        }
        Ok(v)
    }

    /// `|f̂(ω)|`.
    pub fn fourier_modulus(&self, omega: &[f64]) -> Result<f64> {
        Ok(self.fourier(omega)?.norm())
    }

    /// Phase `θ(ω)` with `f̂(ω) = e^{iθ(ω)} |f̂(ω)|`.
    pub fn phase(&self, omega: &[f64]) -> Result<f64> {
        Ok(self.fourier(omega)?.arg())
    }

    /// An upper bound on `‖f̂‖_∞` (triangle inequality over components;
    /// exact for a single bump).
    pub fn fourier_modulus_bound(&self) -> f64 {
        let cs = match &self.kind {
            TargetKind::Mixture(cs) => cs,
            #[cfg(test)]
            TargetKind::FlatSpectrum => return 1.0,
        };
        cs.iter()
            .map(|c| {
                c.weight.abs()
                    * c.width.powi(self.d as i32)
                    * (2.0 * std::f64::consts::PI).powf(-0.5 * self.d as f64)
            })
            .sum()
    }
}

fn bump(x: &[f64], center: &[f64], width: f64) -> f64 {
    let q: f64 = x
        .iter()
        .zip(center)
        .map(|(xi, mi)| (xi - mi) * (xi - mi))
        .sum();
    (-0.5 * q / (width * width)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk;
    use approx::assert_relative_eq;

    #[test]
    fn unit_gaussian_spot_values() {
        let t = BarronTarget::unit_gaussian(1).unwrap();
        assert_relative_eq!(t.value(&[0.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.value(&[1.0]).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        // |f̂(ω)| = (2π)^{-1/2} e^{-ω²/2}.
        let expected = (2.0 * std::f64::consts::PI).powf(-0.5) * (-0.5f64).exp();
        assert_relative_eq!(t.fourier_modulus(&[1.0]).unwrap(), expected, epsilon = 1e-14);
        assert_relative_eq!(t.phase(&[1.0]).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn squared_norm_of_unit_gaussian_on_unit_interval() {
        // ∫₀¹ e^{-x²} dx = (√π/2)·erf(1).
        let t = BarronTarget::unit_gaussian(1).unwrap();
        let l2 = adaptive_gk(
            &mut |x: f64| t.value(&[x]).unwrap().powi(2),
            0.0,
            1.0,
            1e-12,
            200,
        )
        .unwrap();
        assert_relative_eq!(l2, 0.746_824_132_812_427_0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_gaussian_has_linear_phase() {
        let x0 = vec![0.5, 0.25];
        let t = BarronTarget::shifted_gaussian(2, x0.clone(), 0.4).unwrap();
        for omega in [[1.0, 0.0], [0.3, -0.7], [2.0, 1.5]] {
            let dot: f64 = omega.iter().zip(&x0).map(|(w, m)| w * m).sum();
            let expected = -dot;
            let got = t.phase(&omega).unwrap();
            // Compare as angles (phases identical modulo 2π).
            let diff = (got - expected).rem_euclid(2.0 * std::f64::consts::PI);
            let diff = diff.min(2.0 * std::f64::consts::PI - diff);
            assert!(diff < 1e-12, "phase mismatch at {omega:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn fourier_inversion_reproduces_values() {
        // f(x) = ∫ f̂(ω) e^{iωx} dω, evaluated by real quadrature of
        // |f̂(ω)| cos(θ(ω) + ωx).
        let t = BarronTarget::from_name("gaussian_pair", 1).unwrap();
        for x in [0.1, 0.5, 0.9] {
            let recon = adaptive_gk(
                &mut |w: f64| {
                    let modulus = t.fourier_modulus(&[w]).unwrap();
                    let theta = t.phase(&[w]).unwrap();
                    modulus * (theta + w * x).cos()
                },
                -60.0,
                60.0,
                1e-11,
                4000,
            )
            .unwrap();
            let exact = t.value(&[x]).unwrap();
            assert_relative_eq!(recon, exact, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = BarronTarget::from_name("gaussian_pair", 2).unwrap();
        let h = 1e-6;
        for x in [[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]] {
            let grad = t.gradient(&x).unwrap();
            let hess = t.hessian(&x).unwrap();
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (t.value(&xp).unwrap() - t.value(&xm).unwrap()) / (2.0 * h);
                assert_relative_eq!(grad[k], fd, epsilon = 1e-9, max_relative = 1e-6);
                let gp = t.gradient(&xp).unwrap();
                let gm = t.gradient(&xm).unwrap();
                for l in 0..2 {
                    let fd2 = (gp[l] - gm[l]) / (2.0 * h);
                    assert_relative_eq!(hess[(k, l)], fd2, epsilon = 1e-8, max_relative = 1e-6);
                }
            }
        }
        // Hessian symmetry and Laplacian = trace.
        let h = t.hessian(&[0.3, 0.4]).unwrap();
        assert_relative_eq!(h[(0, 1)], h[(1, 0)], epsilon = 1e-15);
        assert_relative_eq!(
            t.laplacian(&[0.3, 0.4]).unwrap(),
            h[(0, 0)] + h[(1, 1)],
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_target_is_identically_zero() {
        let t = BarronTarget::zero(2).unwrap();
        assert_eq!(t.value(&[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(t.fourier_modulus(&[1.0, 2.0]).unwrap(), 0.0);
        assert!(t.gradient(&[0.1, 0.2]).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(
            BarronTarget::gaussian_mixture(
                2,
                vec![GaussianComponent {
                    weight: 1.0,
                    center: vec![0.0],
                    width: 1.0
                }],
                "bad"
            ),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            BarronTarget::gaussian_mixture(
                1,
                vec![GaussianComponent {
                    weight: 1.0,
                    center: vec![0.0],
                    width: 0.0
                }],
                "bad"
            ),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            BarronTarget::from_name("no_such_target", 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            BarronTarget::unit_gaussian(1).unwrap().value(&[0.0, 1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn registry_labels_round_trip() {
        for name in ["unit_gaussian", "shifted_gaussian", "gaussian_pair", "zero"] {
            let t = BarronTarget::from_name(name, 1).unwrap();
            assert_eq!(t.label(), name);
        }
    }

    #[test]
    fn modulus_bound_dominates_samples() {
        let t = BarronTarget::from_name("gaussian_pair", 2).unwrap();
        let bound = t.fourier_modulus_bound();
        for w in [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5], [10.0, -10.0]] {
            assert!(t.fourier_modulus(&w).unwrap() <= bound * (1.0 + 1e-12));
        }
    }
}
