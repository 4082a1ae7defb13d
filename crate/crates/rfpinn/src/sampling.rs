//! Feature priors and the sampled feature banks built from them.
//!
//! A feature bank holds `m` frozen hidden units `(W_i, B_i)` drawn from one
//! of two prior families:
//!
//! * **Compact**: `W` uniform on the ℓ1 ball of radius `M`, `B` uniform on
//!   `[-2M, 2M]`. The ball sample combines an exponential-simplex draw
//!   (magnitudes), independent signs, and the `U^{1/d}` radial correction.
//! * **Heavy-tail**: rotation-invariant `W` with radial density
//!   proportional to `r^{d-1} (1 + r)^{-α}`, and symmetric `B` with density
//!   `C_β (1 + |b|)^{-β}`. Both laws reduce to Beta draws through the map
//!   `r = s / (1 - s)`, which keeps sampling exact (no rejection).
//!
//! Every feature index gets its own counter-based RNG stream keyed by
//! `(seed, index)`, so banks are bit-for-bit reproducible regardless of how
//! the loop is scheduled, and a longer bank extends a shorter one drawn
//! from the same seed.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Prior over hidden-unit weights and biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// `W` uniform on `{|ω|_1 <= cutoff}`, `B` uniform on
    /// `[-2 cutoff, 2 cutoff]`.
    Compact { cutoff: f64, d: usize },
    /// Polynomial tails: `p1(ω) = C_α (1 + |ω|_2)^{-α}`,
    /// `p2(b) = C_β (1 + |b|)^{-β}`.
    HeavyTail { alpha: f64, beta: f64, d: usize },
}

/// Density normalization constants for a prior; see [`normalizers`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizers {
    /// Weight-side constant: for the compact prior the unit-radius ℓ1-ball
    /// volume coefficient `2^d / d!` (so the ball volume is
    /// `omega * cutoff^d` and the density its reciprocal); for the
    /// heavy-tail prior the density prefactor `C_α`.
    pub omega: f64,
    /// Bias-side constant: the interval length `4 cutoff` for the compact
    /// prior (density is its reciprocal); the prefactor `C_β = (β - 1) / 2`
    /// for the heavy-tail prior.
    pub bias: f64,
}

impl PriorSpec {
    /// Compact prior with ℓ1 cutoff `cutoff >= 2` in dimension `d >= 1`.
    pub fn compact(cutoff: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "prior dimension must be at least 1".into(),
            ));
        }
        if !cutoff.is_finite() || cutoff < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "compact prior needs a finite cutoff >= 2, got {cutoff}"
            )));
        }
        Ok(PriorSpec::Compact { cutoff, d })
    }

    /// Heavy-tail prior. Integrability demands `alpha > d` and `beta > 1`
    /// (hard errors); the sharper decay ranges the convergence guarantees
    /// assume are advisory and exposed through
    /// [`PriorSpec::satisfies_moment_conditions`].
    pub fn heavy_tail(alpha: f64, beta: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "prior dimension must be at least 1".into(),
            ));
        }
        if !alpha.is_finite() || alpha <= d as f64 {
            return Err(Error::InvalidArgument(format!(
                "heavy-tail weight exponent must satisfy alpha > d for an \
                 integrable density, got alpha={alpha}, d={d}"
            )));
        }
        if !beta.is_finite() || beta <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "heavy-tail bias exponent must satisfy beta > 1, got {beta}"
            )));
        }
        Ok(PriorSpec::HeavyTail { alpha, beta, d })
    }

    /// Dimension of the weight space.
    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Compact { d, .. } | PriorSpec::HeavyTail { d, .. } => *d,
        }
    }

    /// Whether the prior meets the stronger decay conditions the
    /// convergence guarantees assume (`alpha > d + 4`, `1 < beta < 5` for
    /// heavy tails; always true for the compact family, whose `cutoff >= 2`
    /// is enforced at construction).
    pub fn satisfies_moment_conditions(&self) -> bool {
        match self {
            PriorSpec::Compact { .. } => true,
            PriorSpec::HeavyTail { alpha, beta, d } => {
                *alpha > *d as f64 + 4.0 && *beta > 1.0 && *beta < 5.0
            }
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Compact { cutoff, .. } => write!(f, "compact(M={cutoff})"),
            PriorSpec::HeavyTail { alpha, beta, .. } => {
                write!(f, "heavytail(alpha={alpha},beta={beta})")
            }
        }
    }
}

/// Volume coefficient of the unit ℓ1 ball, `2^d / d!`.
fn l1_ball_coefficient(d: usize) -> f64 {
    let mut c = 1.0;
    for k in 1..=d {
        c *= 2.0 / k as f64;
    }
    c
}

/// Density normalization constants of a prior.
///
/// Fails (at construction time, via the validated constructors) when the
/// defining integrals diverge; see [`Normalizers`] for the exact meaning
/// of the two fields per family.
pub fn normalizers(prior: &PriorSpec) -> Normalizers {
    match prior {
        PriorSpec::Compact { cutoff, d } => Normalizers {
            omega: l1_ball_coefficient(*d),
            bias: 4.0 * cutoff,
        },
        PriorSpec::HeavyTail { alpha, beta, d } => {
            let df = *d as f64;
            // Sphere area S_{d-1} = 2 π^{d/2} / Γ(d/2) and the radial
            // integral ∫_0^∞ r^{d-1} (1+r)^{-α} dr = B(d, α - d).
            let ln_sphere = std::f64::consts::LN_2 + 0.5 * df * std::f64::consts::PI.ln()
                - ln_gamma(0.5 * df);
            let ln_beta_fn = ln_gamma(df) + ln_gamma(alpha - df) - ln_gamma(*alpha);
            Normalizers {
                omega: (-(ln_sphere + ln_beta_fn)).exp(),
                bias: 0.5 * (beta - 1.0),
            }
        }
    }
}

/// Marginal densities `(p1(ω), p2(b))` of a prior at a concrete point.
///
/// Compact densities are zero outside their supports. Fails on a
/// dimension mismatch between `omega` and the prior.
pub fn prior_density(prior: &PriorSpec, omega: &[f64], b: f64) -> Result<(f64, f64)> {
    if omega.len() != prior.dim() {
        return Err(Error::InvalidArgument(format!(
            "frequency has dimension {}, prior expects {}",
            omega.len(),
            prior.dim()
        )));
    }
    let norms = normalizers(prior);
    match prior {
        PriorSpec::Compact { cutoff, d } => {
            let l1: f64 = omega.iter().map(|w| w.abs()).sum();
            let p1 = if l1 <= *cutoff {
                1.0 / (norms.omega * cutoff.powi(*d as i32))
            } else {
                0.0
            };
            let p2 = if b.abs() <= 2.0 * cutoff {
                1.0 / (4.0 * cutoff)
            } else {
                0.0
            };
            Ok((p1, p2))
        }
        PriorSpec::HeavyTail { alpha, beta, .. } => {
            let l2 = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
            let p1 = norms.omega * (1.0 + l2).powf(-alpha);
            let p2 = norms.bias * (1.0 + b.abs()).powf(-beta);
            Ok((p1, p2))
        }
    }
}

/// A bank of `m` frozen hidden units in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    /// Weight matrix, one feature per row (`m x d`).
    pub weights: DMatrix<f64>,
    /// Bias vector of length `m`.
    pub biases: DVector<f64>,
    /// The prior the bank was drawn from.
    pub prior: PriorSpec,
    /// Seed the bank was drawn with.
    pub seed: u64,
}

impl FeatureBank {
    /// Number of features.
    pub fn m(&self) -> usize {
        self.weights.nrows()
    }

    /// Weight-space dimension.
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// `W_i · x + B_i` for feature `i`.
    pub fn pre_activation(&self, i: usize, x: &[f64]) -> f64 {
        let mut t = self.biases[i];
        for (k, xk) in x.iter().enumerate() {
            t += self.weights[(i, k)] * xk;
        }
        t
    }

    /// Euclidean norm of `W_i`.
    pub fn weight_norm(&self, i: usize) -> f64 {
        (0..self.dim())
            .map(|k| self.weights[(i, k)].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the bank as an auditable CSV dump with a commented header
    /// carrying `(m, d, prior, seed)`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# rfpinn feature bank v1")?;
        writeln!(out, "# m={} d={} seed={}", self.m(), self.dim(), self.seed)?;
        match self.prior {
            PriorSpec::Compact { cutoff, .. } => {
                writeln!(out, "# prior=compact cutoff={cutoff}")?;
            }
            PriorSpec::HeavyTail { alpha, beta, .. } => {
                writeln!(out, "# prior=heavytail alpha={alpha} beta={beta}")?;
            }
        }
        let header: Vec<String> = (0..self.dim())
            .map(|k| format!("w{k}"))
            .chain(std::iter::once("b".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.m() {
            let mut row: Vec<String> = (0..self.dim())
                .map(|k| format!("{}", self.weights[(i, k)]))
                .collect();
            row.push(format!("{}", self.biases[i]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a bank written by [`FeatureBank::write_csv`], validating the
    /// header, shapes, and finiteness of every entry.
    pub fn read_csv(path: &Path) -> Result<FeatureBank> {
        let file = BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let magic = lines.next().transpose()?.unwrap_or_default();
        if magic.trim() != "# rfpinn feature bank v1" {
            return Err(Error::Data(format!(
                "not a feature bank file (bad magic line '{magic}')"
            )));
        }
        let meta = lines.next().transpose()?.unwrap_or_default();
        let kv = parse_header_fields(&meta)?;
        let m: usize = parse_field(&kv, "m")?;
        let d: usize = parse_field(&kv, "d")?;
        let seed: u64 = parse_field(&kv, "seed")?;
        let prior_line = lines.next().transpose()?.unwrap_or_default();
        let pv = parse_header_fields(&prior_line)?;
        let prior = match pv.iter().find(|(k, _)| k == "prior").map(|(_, v)| v.as_str()) {
            Some("compact") => PriorSpec::compact(parse_field(&pv, "cutoff")?, d)?,
            Some("heavytail") => {
                PriorSpec::heavy_tail(parse_field(&pv, "alpha")?, parse_field(&pv, "beta")?, d)?
            }
            other => {
                return Err(Error::Data(format!(
                    "feature bank header names no known prior (got {other:?})"
                )))
            }
        };
        // Column header row, then data.
        let _ = lines.next().transpose()?;
        let mut weights = DMatrix::zeros(m, d);
        let mut biases = DVector::zeros(m);
        let mut row = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if row >= m {
                return Err(Error::Data(format!(
                    "feature bank has more than the declared {m} rows"
                )));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Data(format!(
                    "feature bank row {row} has {} fields, expected {}",
                    fields.len(),
                    d + 1
                )));
            }
            for (k, field) in fields.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!("feature bank row {row}: unparseable float '{field}'"))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "feature bank row {row} contains non-finite value {v}"
                    )));
                }
                if k < d {
                    weights[(row, k)] = v;
                } else {
                    biases[row] = v;
                }
            }
            row += 1;
        }
        if row != m {
            return Err(Error::Data(format!(
                "feature bank declares {m} rows but contains {row}"
            )));
        }
        Ok(FeatureBank {
            weights,
            biases,
            prior,
            seed,
        })
    }
}

fn parse_header_fields(line: &str) -> Result<Vec<(String, String)>> {
    let body = line.trim_start_matches('#').trim();
    Ok(body
        .split_whitespace()
        .filter_map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect())
}

fn parse_field<T: std::str::FromStr>(kv: &[(String, String)], key: &str) -> Result<T> {
    kv.iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Data(format!("feature bank header missing field '{key}'")))
}

/// One feature drawn from its own `(seed, index)` RNG stream.
fn draw_feature(prior: &PriorSpec, seed: u64, index: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    match prior {
        PriorSpec::Compact { cutoff, d } => {
            // Exponential simplex + signs = uniform on the ℓ1 sphere's cone
            // measure; the U^{1/d} radius makes the ball sample uniform.
            let mut mags = vec![0.0; *d];
            let mut total = 0.0;
            for mag in mags.iter_mut() {
                let e: f64 = Exp1.sample(&mut rng);
                *mag = e;
                total += e;
            }
            let radius = cutoff * rng.random::<f64>().powf(1.0 / *d as f64);
            let mut w = vec![0.0; *d];
            for (wk, mag) in w.iter_mut().zip(&mags) {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *wk = sign * radius * mag / total;
            }
            let b = rng.random_range(-2.0 * cutoff..2.0 * cutoff);
            (w, b)
        }
        PriorSpec::HeavyTail { alpha, beta, d } => {
            // Direction uniform on the sphere; radius via r = s/(1-s) with
            // s ~ Beta(d, α-d), which has exactly the target radial law.
            let mut w = vec![0.0; *d];
            loop {
                let mut norm2 = 0.0;
                for wk in w.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *wk = g;
                    norm2 += g * g;
                }
                if norm2 > 1e-280 {
                    let radial = Beta::new(*d as f64, alpha - *d as f64)
                        .expect("validated shape parameters")
                        .sample(&mut rng);
                    let r = radial / (1.0 - radial);
                    if r.is_finite() {
                        let scale = r / norm2.sqrt();
                        for wk in w.iter_mut() {
                            *wk *= scale;
                        }
                        break;
                    }
                }
            }
            let b = loop {
                let s: f64 = Beta::new(1.0, beta - 1.0)
                    .expect("validated shape parameters")
                    .sample(&mut rng);
                let mag = s / (1.0 - s);
                if mag.is_finite() {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    break sign * mag;
                }
            };
            (w, b)
        }
    }
}

/// Draws a bank of `m >= 1` features from the prior.
///
/// Deterministic in `(prior, m, seed)` bit-for-bit: each feature index
/// owns an independent RNG stream, so generation order (and thread
/// scheduling) cannot change the result, and a bank of size `m' > m` from
/// the same seed extends the smaller bank.
pub fn sample(prior: &PriorSpec, m: usize, seed: u64) -> Result<FeatureBank> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "cannot sample an empty feature bank (m = 0)".into(),
        ));
    }
    let d = prior.dim();
    let features: Vec<(Vec<f64>, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| draw_feature(prior, seed, i))
        .collect();
    let mut weights = DMatrix::zeros(m, d);
    let mut biases = DVector::zeros(m);
    for (i, (w, b)) in features.into_iter().enumerate() {
        for (k, wk) in w.into_iter().enumerate() {
            weights[(i, k)] = wk;
        }
        biases[i] = b;
    }
    Ok(FeatureBank {
        weights,
        biases,
        prior: *prior,
        seed,
    })
}
