//! Model fibered-boundary manifolds: metric, Laplacian and volume data on
//! the collar, the two Hölder distances, and the volume-growth test for
//! stochastic completeness.
//!
//! Coordinates are ordered `(x, y¹..y^b, z¹..z^f)`. The base and fiber
//! factors are flat circles, so `y` and `z` are angles of period 2π.
//! The exact metric is `dx²/x⁴ + |dy|²/x² + |dz|²`. A perturbation is
//! given in the Φ-coframe `(dx/x², dy/x, dz)`, where its pointwise size
//! measured by the exact metric is just the Frobenius norm of the
//! coefficient matrix.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::numerics::{angle_diff, gauss_legendre, wrap_angle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EuclideanRadial,
    ExactProduct,
    PerturbedProduct,
}

/// One symmetric perturbation entry `c(x, θ) (eⁱ⊗eʲ + eʲ⊗eⁱ)/2` with
/// `c = amplitude · x^order · cos(wave·θ + phase)` in the Φ-coframe `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub i: usize,
    pub j: usize,
    pub amplitude: f64,
    #[serde(default = "default_order")]
    pub order: f64,
    /// Integer wave vector over the `b + f` angles; empty means constant.
    #[serde(default)]
    pub wave: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

fn default_order() -> f64 {
    1.0
}

impl PerturbationTerm {
    fn coefficient(&self, x: f64, angles: &[f64]) -> f64 {
        let arg: f64 = self
            .wave
            .iter()
            .zip(angles)
            .map(|(k, a)| *k as f64 * a)
            .sum::<f64>()
            + self.phase;
        self.amplitude * x.powf(self.order) * arg.cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiModel {
    pub kind: ModelKind,
    pub b: usize,
    pub f: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default)]
    pub perturbation: Vec<PerturbationTerm>,
}

impl PhiModel {
    pub const DEFAULT_X_MIN: f64 = 0.01;
    pub const DEFAULT_X_MAX: f64 = 1.0;

    /// Flat `ℝ^m` near infinity in inverted polar coordinates `x = 1/r`.
    pub fn euclidean_radial(m: usize) -> Self {
        assert!(m >= 1);
        Self {
            kind: ModelKind::EuclideanRadial,
            b: m - 1,
            f: 0,
            x_min: Self::DEFAULT_X_MIN,
            x_max: Self::DEFAULT_X_MAX,
            perturbation: Vec::new(),
        }
    }

    pub fn exact_product(b: usize, f: usize) -> Self {
        Self {
            kind: ModelKind::ExactProduct,
            b,
            f,
            x_min: Self::DEFAULT_X_MIN,
            x_max: Self::DEFAULT_X_MAX,
            perturbation: Vec::new(),
        }
    }

    pub fn perturbed_product(b: usize, f: usize, terms: Vec<PerturbationTerm>) -> Self {
        Self {
            kind: ModelKind::PerturbedProduct,
            b,
            f,
            x_min: Self::DEFAULT_X_MIN,
            x_max: Self::DEFAULT_X_MAX,
            perturbation: terms,
        }
    }

    pub fn with_collar(mut self, x_min: f64, x_max: f64) -> Self {
        self.x_min = x_min;
        self.x_max = x_max;
        self
    }

    /// Total dimension `1 + b + f`.
    pub fn m(&self) -> usize {
        1 + self.b + self.f
    }

    /// Number of periodic directions.
    pub fn angular_dims(&self) -> usize {
        self.b + self.f
    }

    pub fn is_exact(&self) -> bool {
        self.kind != ModelKind::PerturbedProduct || self.perturbation.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_min < self.x_max && self.x_max <= 1.0) {
            return Err(PhiError::Config(format!(
                "collar must satisfy 0 < x_min < x_max <= 1, got ({}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.kind == ModelKind::EuclideanRadial && self.f != 0 {
            return Err(PhiError::Config(
                "euclidean_radial models have no fiber (f = 0)".into(),
            ));
        }
        if self.kind != ModelKind::PerturbedProduct && !self.perturbation.is_empty() {
            return Err(PhiError::Config(
                "only perturbed_product models carry perturbation terms".into(),
            ));
        }
        let m = self.m();
        for t in &self.perturbation {
            if t.i >= m || t.j >= m {
                return Err(PhiError::Config(format!(
                    "perturbation index ({}, {}) out of range for m = {m}",
                    t.i, t.j
                )));
            }
            if t.order < 1.0 {
                return Err(PhiError::Config(format!(
                    "perturbation decay order {} < 1",
                    t.order
                )));
            }
            if !t.wave.is_empty() && t.wave.len() != self.angular_dims() {
                return Err(PhiError::Config(format!(
                    "perturbation wave vector has length {}, expected {}",
                    t.wave.len(),
                    self.angular_dims()
                )));
            }
        }
        Ok(())
    }

    /// The catalogue of models exercised by the test-suite and the CLI.
    pub fn catalog() -> Vec<PhiModel> {
        vec![
            PhiModel::euclidean_radial(2),
            PhiModel::euclidean_radial(3),
            PhiModel::exact_product(1, 1),
            PhiModel::exact_product(2, 1),
            PhiModel::perturbed_product(
                1,
                1,
                vec![
                    PerturbationTerm {
                        i: 0,
                        j: 1,
                        amplitude: 0.2,
                        order: 1.0,
                        wave: vec![1, 0],
                        phase: 0.0,
                    },
                    PerturbationTerm {
                        i: 2,
                        j: 2,
                        amplitude: 0.3,
                        order: 2.0,
                        wave: vec![0, 1],
                        phase: 0.5,
                    },
                ],
            ),
        ]
    }

    /// Φ-coframe scale factors `(x⁻², x⁻¹ … , 1 …)`.
    fn frame_weights(&self, x: f64) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.m());
        w.push(x.powi(-2));
        w.extend(std::iter::repeat_n(1.0 / x, self.b));
        w.extend(std::iter::repeat_n(1.0, self.f));
        w
    }

    /// Perturbation coefficient matrix in the Φ-coframe.
    pub fn perturbation_frame(&self, x: f64, angles: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut c = DMatrix::zeros(m, m);
        for t in &self.perturbation {
            let v = t.coefficient(x, angles);
            if t.i == t.j {
                c[(t.i, t.i)] += v;
            } else {
                c[(t.i, t.j)] += 0.5 * v;
                c[(t.j, t.i)] += 0.5 * v;
            }
        }
        c
    }

    /// Largest observed `|h|_ĝ / x` on a deterministic sample of the
    /// collar; finite exactly when every term decays at least like `x`.
    pub fn perturbation_decay_ratio(&self, samples: usize) -> f64 {
        let dims = self.angular_dims();
        let mut worst: f64 = 0.0;
        for s in 0..samples {
            let u = (s as f64 + 0.5) / samples as f64;
            let x = self.x_min * (self.x_max / self.x_min).powf(u);
            let angles: Vec<f64> = (0..dims)
                .map(|d| wrap_angle(TAU * (u * (d as f64 + 1.618) * 7.0)))
                .collect();
            let c = self.perturbation_frame(x, &angles);
            worst = worst.max(c.norm() / x);
        }
        worst
    }
}

/// A point of the collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Point {
    /// Builds a point, reducing the angles into `[0, 2π)`.
    pub fn new(x: f64, y: Vec<f64>, z: Vec<f64>) -> Self {
        Self {
            x,
            y: y.into_iter().map(wrap_angle).collect(),
            z: z.into_iter().map(wrap_angle).collect(),
        }
    }

    pub fn from_angles(x: f64, angles: &[f64], b: usize) -> Self {
        Self::new(x, angles[..b].to_vec(), angles[b..].to_vec())
    }

    pub fn angles(&self) -> Vec<f64> {
        self.y.iter().chain(&self.z).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricAtPoint {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub sqrt_det: f64,
}

/// Coefficients of the positive Laplacian `Δu = A_ij ∂_i∂_j u + B_i ∂_i u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianCoeffs {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LaplacianCoeffs {
    pub fn apply(&self, hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> f64 {
        self.a.component_mul(hessian).sum() + self.b.dot(gradient)
    }
}

fn check_point(model: &PhiModel, p: &Point) -> Result<()> {
    if p.y.len() != model.b || p.z.len() != model.f {
        return Err(PhiError::Domain(format!(
            "point has {} base / {} fiber coordinates, model needs {} / {}",
            p.y.len(),
            p.z.len(),
            model.b,
            model.f
        )));
    }
    let slack = 1e-12 * model.x_max;
    if !(p.x >= model.x_min - slack && p.x <= model.x_max + slack) {
        return Err(PhiError::Domain(format!(
            "x = {} outside the collar [{}, {}]",
            p.x, model.x_min, model.x_max
        )));
    }
    Ok(())
}

/// Metric evaluation without the collar check; used by the volume-growth
/// test and the difference stencils, which leave the sampled collar.
pub(crate) fn metric_unchecked(model: &PhiModel, x: f64, angles: &[f64]) -> Result<MetricAtPoint> {
    let m = model.m();
    let w = model.frame_weights(x);
    if model.is_exact() {
        let g = DMatrix::from_diagonal(&DVector::from_iterator(m, w.iter().map(|v| v * v)));
        let g_inv =
            DMatrix::from_diagonal(&DVector::from_iterator(m, w.iter().map(|v| 1.0 / (v * v))));
        let sqrt_det = x.powi(-(2 + model.b as i32));
        return Ok(MetricAtPoint { g, g_inv, sqrt_det });
    }
    let c = model.perturbation_frame(x, angles);
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let hat = if i == j { 1.0 } else { 0.0 };
            g[(i, j)] = (hat + c[(i, j)]) * w[i] * w[j];
        }
    }
    let chol = g.clone().cholesky().ok_or_else(|| PhiError::MetricDegeneracy {
        x,
        detail: "Cholesky factorisation failed".into(),
    })?;
    let sqrt_det: f64 = chol.l().diagonal().iter().product();
    if !(sqrt_det > 0.0 && sqrt_det.is_finite()) {
        return Err(PhiError::MetricDegeneracy {
            x,
            detail: format!("sqrt det = {sqrt_det}"),
        });
    }
    let g_inv = chol.inverse();
    Ok(MetricAtPoint { g, g_inv, sqrt_det })
}

/// The metric `ĝ + h` at `p`.
pub fn metric_eval(model: &PhiModel, p: &Point) -> Result<MetricAtPoint> {
    check_point(model, p)?;
    metric_unchecked(model, p.x, &p.angles())
}

/// `√det g` at `p`.
pub fn volume_element(model: &PhiModel, p: &Point) -> Result<f64> {
    Ok(metric_eval(model, p)?.sqrt_det)
}

/// Ratio `√det g / √det ĝ`, the bounded factor in the volume density.
pub fn volume_factor(model: &PhiModel, x: f64, angles: &[f64]) -> Result<f64> {
    if model.is_exact() {
        return Ok(1.0);
    }
    Ok(metric_unchecked(model, x, angles)?.sqrt_det * x.powi(2 + model.b as i32))
}

/// Second-order coefficient set of the positive Laplacian at `p`.
pub fn laplacian_coeffs(model: &PhiModel, p: &Point) -> Result<LaplacianCoeffs> {
    let met = metric_eval(model, p)?;
    let m = model.m();
    let a = -met.g_inv.clone();
    let mut b = DVector::zeros(m);
    if model.is_exact() {
        b[0] = -(2.0 - model.b as f64) * p.x.powi(3);
        return Ok(LaplacianCoeffs { a, b });
    }
    // B_j = -|g|^{-1/2} Σ_i ∂_i(|g|^{1/2} g^{ij}) by fourth-order central
    // differences of the density-weighted inverse metric.
    let angles = p.angles();
    let flux = |x: f64, ang: &[f64]| -> Result<DMatrix<f64>> {
        let mt = metric_unchecked(model, x, ang)?;
        Ok(mt.g_inv * mt.sqrt_det)
    };
    for i in 0..m {
        let h = if i == 0 { 1e-4 * p.x } else { 1e-4 };
        let shifted = |s: f64| -> Result<DMatrix<f64>> {
            if i == 0 {
                flux(p.x + s * h, &angles)
            } else {
                let mut ang = angles.clone();
                ang[i - 1] += s * h;
                flux(p.x, &ang)
            }
        };
        let d = (shifted(-2.0)? - shifted(-1.0)? * 8.0 + shifted(1.0)? * 8.0 - shifted(2.0)?)
            / (12.0 * h);
        for j in 0..m {
            b[j] -= d[(i, j)] / met.sqrt_det;
        }
    }
    Ok(LaplacianCoeffs { a, b })
}

/// Distance equivalent to the one induced by `x⁴ g_Φ` near the boundary,
/// with the base term squared.
pub fn phi_distance(p: &Point, q: &Point) -> f64 {
    let s = p.x + q.x;
    let dx = p.x - q.x;
    let dy2: f64 = p.y.iter().zip(&q.y).map(|(a, b)| angle_diff(*a, *b).powi(2)).sum();
    let dz2: f64 = p.z.iter().zip(&q.z).map(|(a, b)| angle_diff(*a, *b).powi(2)).sum();
    (dx * dx + s * s * dy2 + s.powi(4) * dz2).sqrt()
}

/// Distance equivalent to the one induced by `g_Φ` itself.
pub fn phi_distance_classical(p: &Point, q: &Point) -> f64 {
    let s = p.x + q.x;
    let dx = p.x - q.x;
    let dy2: f64 = p.y.iter().zip(&q.y).map(|(a, b)| angle_diff(*a, *b).powi(2)).sum();
    let dz2: f64 = p.z.iter().zip(&q.z).map(|(a, b)| angle_diff(*a, *b).powi(2)).sum();
    (dx * dx / s.powi(4) + dy2 / (s * s) + dz2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Complete,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrigoryanReport {
    pub verdict: Verdict,
    pub growth_exponent: f64,
    pub radii: Vec<f64>,
    pub log_volumes: Vec<f64>,
    /// `∫_{R₀}^{R} r / log vol(M̄_r) dr` at each ladder radius.
    pub partial_integrals: Vec<f64>,
}

/// Fraction of the running total the last-decade increment must exceed.
pub const GRIGORYAN_THRESHOLD: f64 = 0.10;

/// `log vol(M̄_R)` for a model: the compact piece counts as volume 1 and
/// the collar `{1 ≤ r ≤ R}` is integrated in `r = 1/x`.
pub fn log_truncated_volume(model: &PhiModel, radius: f64) -> Result<f64> {
    let dims = model.angular_dims();
    let torus = TAU.powi(dims as i32);
    // angle-averaged density, r-form: √g(1/r) / r²
    let (ang_nodes, ang_w): (Vec<Vec<f64>>, Vec<f64>) = if model.is_exact() {
        (vec![vec![0.0; dims]], vec![1.0])
    } else {
        let n = 8usize;
        let total = n.pow(dims as u32);
        let mut nodes = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut a = Vec::with_capacity(dims);
            for _ in 0..dims {
                a.push(TAU * (rem % n) as f64 / n as f64);
                rem /= n;
            }
            nodes.push(a);
        }
        (nodes, vec![1.0 / total as f64; total])
    };
    let density = |r: f64| -> Result<f64> {
        let x = 1.0 / r;
        let mut acc = 0.0;
        for (a, w) in ang_nodes.iter().zip(&ang_w) {
            acc += w * metric_unchecked(model, x, a)?.sqrt_det;
        }
        Ok(acc * x * x)
    };
    // integrate in s = ln r; integrand density(r) · r
    let (gl_x, gl_w) = gauss_legendre(8);
    let s_end = radius.ln();
    let panels = ((s_end / 0.25).ceil() as usize).max(1);
    let h = s_end / panels as f64;
    let mut collar = 0.0;
    for pnl in 0..panels {
        let mid = (pnl as f64 + 0.5) * h;
        for (z, w) in gl_x.iter().zip(&gl_w) {
            let s = mid + 0.5 * h * z;
            let r = s.exp();
            collar += w * 0.5 * h * density(r)? * r;
        }
    }
    Ok((1.0 + torus * collar).ln())
}

/// Volume-growth test for stochastic completeness on a model.
pub fn grigoryan_test(model: &PhiModel, r_max: f64, n_samples: usize) -> Result<GrigoryanReport> {
    model.validate()?;
    let mut failure = None;
    let report = grigoryan_from_log_volume(
        |r| match log_truncated_volume(model, r) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        r_max,
        n_samples,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// The same test driven by an arbitrary volume law, given as `R ↦ log vol`.
pub fn grigoryan_from_log_volume<F: FnMut(f64) -> f64>(
    mut log_volume: F,
    r_max: f64,
    n_samples: usize,
) -> Result<GrigoryanReport> {
    if !(r_max > 1.0) {
        return Err(PhiError::Domain(format!("R_max = {r_max} must exceed 1")));
    }
    let n = n_samples.max(4);
    let r0 = 2.0f64.min(0.5 * (1.0 + r_max));
    let radii = crate::numerics::log_space(r0, r_max, n);
    let log_volumes: Vec<f64> = radii.iter().map(|&r| log_volume(r)).collect();
    if log_volumes.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(PhiError::Numerical(
            "truncated volume must be finite and exceed 1".into(),
        ));
    }

    let tail_start = (r_max / 10.0).max(r0);
    let (lx, ly): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&log_volumes)
        .filter(|(r, _)| **r >= tail_start * (1.0 - 1e-12))
        .map(|(r, v)| (r.ln(), *v))
        .unzip();
    let (lx, ly) = if lx.len() >= 3 {
        (lx, ly)
    } else {
        let half = n / 2;
        (
            radii[half..].iter().map(|r| r.ln()).collect(),
            log_volumes[half..].to_vec(),
        )
    };
    // d log vol / d log R over the last decade
    let growth_exponent = crate::numerics::fit_slope(&lx, &ly);

    let (gl_x, gl_w) = gauss_legendre(8);
    let mut partial_integrals = Vec::with_capacity(n);
    let mut acc = 0.0;
    partial_integrals.push(0.0);
    for w in radii.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sub = 4;
        let h = (b - a) / sub as f64;
        for k in 0..sub {
            let mid = a + (k as f64 + 0.5) * h;
            for (z, wt) in gl_x.iter().zip(&gl_w) {
                let r = mid + 0.5 * h * z;
                acc += wt * 0.5 * h * r / log_volume(r);
            }
        }
        partial_integrals.push(acc);
    }
    let total = *partial_integrals.last().unwrap();
    let at_tail = radii
        .iter()
        .position(|r| *r >= tail_start * (1.0 - 1e-12))
        .unwrap_or(0);
    let increment = total - partial_integrals[at_tail];
    let verdict = if total.is_finite() && increment > GRIGORYAN_THRESHOLD * total {
        Verdict::Complete
    } else {
        Verdict::Inconclusive
    };
    Ok(GrigoryanReport {
        verdict,
        growth_exponent,
        radii,
        log_volumes,
        partial_integrals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: &[f64], z: &[f64]) -> Point {
        Point::new(x, y.to_vec(), z.to_vec())
    }

    #[test]
    fn exact_product_is_identity_at_unit_x() {
        let m = PhiModel::exact_product(1, 1);
        let g = metric_eval(&m, &pt(1.0, &[0.3], &[1.0])).unwrap();
        assert_eq!(g.g, DMatrix::identity(3, 3));
    }

    #[test]
    fn euclidean_plane_metric_at_half() {
        let m = PhiModel::euclidean_radial(2);
        let g = metric_eval(&m, &pt(0.5, &[0.0], &[])).unwrap();
        assert_eq!(g.g, DMatrix::from_diagonal(&DVector::from_vec(vec![16.0, 4.0])));
    }

    #[test]
    fn zero_perturbation_matches_exact_product() {
        let zero = PhiModel::perturbed_product(
            1,
            1,
            vec![PerturbationTerm {
                i: 0,
                j: 1,
                amplitude: 0.0,
                order: 1.0,
                wave: vec![],
                phase: 0.0,
            }],
        );
        let exact = PhiModel::exact_product(1, 1);
        for k in 0..20 {
            let p = pt(0.02 + 0.04 * k as f64, &[0.3 * k as f64], &[0.7 * k as f64]);
            let a = metric_eval(&zero, &p).unwrap();
            let b = metric_eval(&exact, &p).unwrap();
            assert!((&a.g - &b.g).abs().max() < 1e-9 * b.g.abs().max());
            assert_relative_eq!(a.sqrt_det, b.sqrt_det, max_relative = 1e-12);
        }
    }

    #[test]
    fn metric_inverse_and_determinant_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in PhiModel::catalog() {
            for _ in 0..200 {
                let x = rng.gen_range(model.x_min..=model.x_max);
                let y: Vec<f64> = (0..model.b).map(|_| rng.gen_range(0.0..TAU)).collect();
                let z: Vec<f64> = (0..model.f).map(|_| rng.gen_range(0.0..TAU)).collect();
                let met = metric_eval(&model, &pt(x, &y, &z)).unwrap();
                let id = &met.g * &met.g_inv;
                let err = (id - DMatrix::identity(model.m(), model.m())).abs().max();
                assert!(err < 1e-12, "{:?} x={x} err={err}", model.kind);
                assert_relative_eq!(
                    met.sqrt_det.powi(2),
                    met.g.determinant(),
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn metric_is_positive_definite_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in PhiModel::catalog() {
            for _ in 0..10_000 {
                let x = rng.gen_range(model.x_min..=model.x_max);
                let ang: Vec<f64> = (0..model.angular_dims())
                    .map(|_| rng.gen_range(0.0..TAU))
                    .collect();
                let p = Point::from_angles(x, &ang, model.b);
                let met = metric_eval(&model, &p).unwrap();
                let eig = met.g.symmetric_eigenvalues();
                assert!(eig.iter().all(|&e| e > 0.0));
            }
        }
    }

    #[test]
    fn collar_and_dimension_are_checked() {
        let m = PhiModel::exact_product(1, 1);
        assert!(matches!(
            metric_eval(&m, &pt(0.001, &[0.0], &[0.0])),
            Err(PhiError::Domain(_))
        ));
        assert!(matches!(
            metric_eval(&m, &pt(0.5, &[0.0], &[])),
            Err(PhiError::Domain(_))
        ));
    }

    #[test]
    fn pathological_perturbation_is_degenerate() {
        let bad = PhiModel::perturbed_product(
            1,
            0,
            vec![PerturbationTerm {
                i: 0,
                j: 0,
                amplitude: -5.0,
                order: 1.0,
                wave: vec![],
                phase: 0.0,
            }],
        );
        let r = metric_eval(&bad, &pt(0.9, &[0.0], &[]));
        assert!(matches!(r, Err(PhiError::MetricDegeneracy { .. })));
    }

    #[test]
    fn perturbation_decay_is_order_x() {
        let model = &PhiModel::catalog()[4];
        let ratio = model.perturbation_decay_ratio(500);
        assert!(ratio.is_finite() && ratio < 1.0);
        let slow = PhiModel::perturbed_product(
            1,
            1,
            vec![PerturbationTerm {
                i: 0,
                j: 1,
                amplitude: 0.2,
                order: 0.5,
                wave: vec![],
                phase: 0.0,
            }],
        );
        assert!(slow.validate().is_err());
    }

    #[test]
    fn volume_element_values() {
        let p = PhiModel::exact_product(1, 1);
        assert_relative_eq!(volume_element(&p, &pt(0.5, &[0.0], &[0.0])).unwrap(), 8.0);
        assert_relative_eq!(volume_element(&p, &pt(1.0, &[0.0], &[0.0])).unwrap(), 1.0);
        let e = PhiModel::euclidean_radial(2);
        let v = volume_element(&e, &pt(0.1, &[0.0], &[])).unwrap();
        let det = metric_eval(&e, &pt(0.1, &[0.0], &[])).unwrap().g.determinant();
        assert_relative_eq!(v, 1000.0, max_relative = 1e-12);
        assert_relative_eq!(v, det.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn exact_laplacian_coefficients_closed_form() {
        let m = PhiModel::exact_product(1, 1);
        let x = 0.37;
        let c = laplacian_coeffs(&m, &pt(x, &[0.1], &[0.2])).unwrap();
        assert_relative_eq!(c.a[(0, 0)], -x.powi(4), max_relative = 1e-14);
        assert_relative_eq!(c.a[(1, 1)], -x * x, max_relative = 1e-14);
        assert_relative_eq!(c.a[(2, 2)], -1.0);
        assert_relative_eq!(c.b[0], -x.powi(3), max_relative = 1e-14);
        assert_eq!(c.b[1], 0.0);
    }

    #[test]
    fn perturbed_laplacian_with_zero_perturbation_matches_closed_form() {
        let zero = PhiModel::perturbed_product(
            2,
            1,
            vec![PerturbationTerm {
                i: 1,
                j: 3,
                amplitude: 0.0,
                order: 1.0,
                wave: vec![],
                phase: 0.0,
            }],
        );
        let exact = PhiModel::exact_product(2, 1);
        let p = pt(0.3, &[0.4, 1.0], &[2.0]);
        let a = laplacian_coeffs(&zero, &p).unwrap();
        let b = laplacian_coeffs(&exact, &p).unwrap();
        assert!((a.a - b.a).abs().max() < 1e-12);
        assert!((&a.b - &b.b).abs().max() < 1e-8);
        assert!(b.b[0].abs() < 1e-15, "b = 2 removes the drift term");
    }

    #[test]
    fn distances_basic_values() {
        let p = pt(0.1, &[0.0], &[0.0]);
        assert_eq!(phi_distance(&p, &p), 0.0);
        assert_relative_eq!(
            phi_distance(&p, &pt(0.2, &[0.0], &[0.0])),
            0.1,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            phi_distance(&pt(0.1, &[1.0], &[0.0]), &p),
            0.2,
            max_relative = 1e-14
        );
        // periodic: 2π - 0.1 is 0.1 away from 0
        assert_relative_eq!(
            phi_distance(&pt(0.1, &[TAU - 0.1], &[0.0]), &p),
            0.02,
            max_relative = 1e-12
        );
    }

    #[test]
    fn distances_are_conformally_related() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x_min = 0.01;
        for _ in 0..10_000 {
            let p = pt(rng.gen_range(x_min..1.0), &[rng.gen_range(0.0..TAU)], &[rng.gen_range(0.0..TAU)]);
            let q = pt(rng.gen_range(x_min..1.0), &[rng.gen_range(0.0..TAU)], &[rng.gen_range(0.0..TAU)]);
            let d = phi_distance(&p, &q);
            let dc = phi_distance_classical(&p, &q);
            assert_relative_eq!(d, (p.x + q.x).powi(2) * dc, max_relative = 1e-12);
            let ratio = d / dc;
            assert!(ratio >= x_min.powi(4) && ratio <= x_min.powi(-4));
        }
    }

    #[test]
    fn grigoryan_euclidean_plane_volume_matches_disc_area() {
        let m = PhiModel::euclidean_radial(2);
        for r in [2.0, 10.0, 300.0] {
            let v = log_truncated_volume(&m, r).unwrap().exp();
            let exact = 1.0 + std::f64::consts::PI * (r * r - 1.0);
            assert_relative_eq!(v, exact, max_relative = 1e-10);
        }
        let big = log_truncated_volume(&m, 300.0).unwrap().exp();
        let disc = std::f64::consts::PI * 300.0f64.powi(2);
        assert!((big - disc).abs() / disc < 0.01);
        let rep = grigoryan_test(&m, 1000.0, 40).unwrap();
        assert!((rep.growth_exponent - 2.0).abs() < 0.1);
        assert_eq!(rep.verdict, Verdict::Complete);
    }

    #[test]
    fn grigoryan_exact_product_growth() {
        let rep = grigoryan_test(&PhiModel::exact_product(1, 1), 1000.0, 40).unwrap();
        assert!((rep.growth_exponent - 2.0).abs() < 0.1, "{}", rep.growth_exponent);
        assert_eq!(rep.verdict, Verdict::Complete);
        assert!(rep.partial_integrals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grigoryan_perturbed_model_runs() {
        let rep = grigoryan_test(&PhiModel::catalog()[4], 500.0, 24).unwrap();
        assert!((rep.growth_exponent - 2.0).abs() < 0.1);
        assert_eq!(rep.verdict, Verdict::Complete);
    }

    #[test]
    fn grigoryan_fast_volume_growth_is_inconclusive() {
        let rep = grigoryan_from_log_volume(|r| r.powi(3), 1000.0, 40).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(*rep.partial_integrals.last().unwrap() < 1.0);
    }

    #[test]
    fn grigoryan_rejects_small_radius() {
        assert!(matches!(
            grigoryan_test(&PhiModel::exact_product(1, 1), 1.0, 10),
            Err(PhiError::Domain(_))
        ));
    }
}
