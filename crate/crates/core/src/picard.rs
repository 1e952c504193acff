//! Picard iteration `u_{n+1} = H F(u_n)` for `(∂t + Δ)u = F(u)`, `u(0) = 0`,
//! with `F = F1 + F2` split into an order-one part and a quadratic part.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::field::{Field, Grid, ModeSet};
use crate::holder::{phi_derivative, weighted_holder_terms, PairSampler, PhiMultiIndex, SampleSet, WeightedSpaceSpec};
use crate::solver::{heat_convolve, HeatOperator};

/// Right-hand side `F = F1 + F2`. `F1` may use one Φ-derivative, `F2` none.
pub trait SemilinearRhs: Sync {
    fn id(&self) -> String;
    fn f1(&self, u: &Field) -> Result<Field>;
    fn f2(&self, u: &Field) -> Result<Field>;

    fn eval(&self, u: &Field) -> Result<Field> {
        self.f1(u)?.add(&self.f2(u)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    /// `ℓ + c x²∂x u`
    AffineForcing,
    /// `q u²`
    QuadraticZero,
    /// Sum of both.
    Combined,
}

/// Catalogue right-hand sides.
#[derive(Debug, Clone)]
pub struct CatalogRhs {
    pub kind: RhsKind,
    pub forcing: Option<Field>,
    pub c: f64,
    pub q: f64,
}

impl CatalogRhs {
    pub fn affine(forcing: Field, c: f64) -> Self {
        Self {
            kind: RhsKind::AffineForcing,
            forcing: Some(forcing),
            c,
            q: 0.0,
        }
    }

    pub fn quadratic(q: f64) -> Self {
        Self {
            kind: RhsKind::QuadraticZero,
            forcing: None,
            c: 0.0,
            q,
        }
    }

    pub fn combined(forcing: Field, c: f64, q: f64) -> Self {
        Self {
            kind: RhsKind::Combined,
            forcing: Some(forcing),
            c,
            q,
        }
    }
}

impl SemilinearRhs for CatalogRhs {
    fn id(&self) -> String {
        match self.kind {
            RhsKind::AffineForcing => "affine_forcing",
            RhsKind::QuadraticZero => "quadratic_zero",
            RhsKind::Combined => "combined",
        }
        .to_string()
    }

    fn f1(&self, u: &Field) -> Result<Field> {
        let base = match (&self.forcing, self.kind) {
            (Some(l), RhsKind::AffineForcing | RhsKind::Combined) => l.clone(),
            _ => Field::zeros(u.grid.clone(), 0.0),
        };
        if self.c == 0.0 || self.kind == RhsKind::QuadraticZero {
            return Ok(base);
        }
        let mut idx = PhiMultiIndex::zero(u.grid.modes.b, u.grid.modes.f);
        idx.q = 1;
        base.axpy(self.c, &phi_derivative(u, &idx)?)
    }

    fn f2(&self, u: &Field) -> Result<Field> {
        if self.q == 0.0 || self.kind == RhsKind::AffineForcing {
            return Ok(Field::zeros(u.grid.clone(), 0.0));
        }
        Ok(mode_product(u, u).scale(self.q))
    }
}

/// Pointwise product of two fields, truncated to the grid's mode box.
/// The result carries weight 0.
pub fn mode_product(a: &Field, b: &Field) -> Field {
    let grid = a.grid.clone();
    let modes = &grid.modes;
    let n_modes = modes.len();
    let n_x = grid.n_x();
    let mut triples = Vec::new();
    for i in 0..n_modes {
        for j in 0..n_modes {
            let s: Vec<i64> = modes.index(i).iter().zip(modes.index(j)).map(|(p, q)| p + q).collect();
            if let Some(k) = modes.position(&s) {
                triples.push((i, j, k));
            }
        }
    }
    let (a, b) = (a.materialize(), b.materialize());
    let slice = a.slice_len();
    let mut out = Field::zeros(grid.clone(), 0.0);
    out.data.par_chunks_mut(slice).enumerate().for_each(|(it, dst)| {
        let (sa, sb) = (a.slice_data(it), b.slice_data(it));
        for &(i, j, k) in &triples {
            for ix in 0..n_x {
                dst[k * n_x + ix] += sa[i * n_x + ix] * sb[j * n_x + ix];
            }
        }
    });
    out
}

/// `(𝐂, 𝐂²)` with `𝐂 = 1 / (3 ‖H‖ C_η)`.
pub fn choose_constants(opnorm: f64, c_eta: f64) -> Result<(f64, f64)> {
    if !(opnorm > 0.0 && c_eta > 0.0 && opnorm.is_finite() && c_eta.is_finite()) {
        return Err(PhiError::Domain(format!(
            "constants need positive finite inputs, got opnorm {opnorm}, C_eta {c_eta}"
        )));
    }
    let c = 1.0 / (3.0 * opnorm * c_eta);
    Ok((c, c * c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub eta: f64,
    pub t_prime: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub opnorm: f64,
    pub c_eta: f64,
    pub space: WeightedSpaceSpec,
    pub sampler: PairSampler,
}

impl PicardConfig {
    /// Checks `η ≤ 𝐂` and `T' ≤ 𝐂²`.
    pub fn validate(&self) -> Result<()> {
        let (c, c2) = choose_constants(self.opnorm, self.c_eta)?;
        if !(self.eta > 0.0 && self.eta <= c * (1.0 + 1e-12)) {
            return Err(PhiError::Config(format!("eta = {} must lie in (0, {c}]", self.eta)));
        }
        if !(self.t_prime > 0.0 && self.t_prime <= c2 * (1.0 + 1e-12)) {
            return Err(PhiError::Config(format!("T' = {} must lie in (0, {c2}]", self.t_prime)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(PhiError::Config("tol must be positive and max_iter nonzero".into()));
        }
        Ok(())
    }

    /// The `(k+2, α, γ)` space the iteration lives in.
    pub fn solution_space(&self) -> WeightedSpaceSpec {
        WeightedSpaceSpec {
            k: self.space.k + 2,
            ..self.space
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    #[serde(skip)]
    pub solution: Field,
    /// `‖u_n‖` per iterate.
    pub history: Vec<f64>,
    /// `‖u_{n+1} - u_n‖` per step.
    pub increments: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardReport {
    pub fn final_increment(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }

    pub fn last_factor(&self) -> Option<f64> {
        self.contraction_factors.last().copied()
    }
}

/// Largest value of `|u(0)|` over stored coefficients.
fn initial_size(u: &Field) -> f64 {
    u.slice_data(0).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Iterates from `start` (default zero) until the sampled increment drops
/// below `tol`.
pub fn picard_solve(
    op: &HeatOperator,
    rhs: &dyn SemilinearRhs,
    cfg: &PicardConfig,
    start: Option<&Field>,
) -> Result<PicardReport> {
    cfg.validate()?;
    if (op.grid.t_end() - cfg.t_prime).abs() > 1e-12 * cfg.t_prime {
        return Err(PhiError::Config(format!(
            "operator horizon {} differs from T' = {}",
            op.grid.t_end(),
            cfg.t_prime
        )));
    }
    let mut u = match start {
        Some(s) => {
            if initial_size(s) != 0.0 {
                return Err(PhiError::Domain("starting point must vanish at t = 0".into()));
            }
            s.clone()
        }
        None => Field::zeros(op.grid.clone(), cfg.space.gamma),
    };
    let spec = cfg.solution_space();
    let set = SampleSet::new(&op.grid, &cfg.sampler);
    let norm = |v: &Field| -> Result<f64> { Ok(weighted_holder_terms(v, &spec, &set)?.total.total) };
    let mut report = PicardReport {
        solution: u.clone(),
        history: vec![norm(&u)?],
        increments: Vec::new(),
        contraction_factors: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut streak = Vec::new();
    for n in 1..=cfg.max_iter {
        let next = heat_convolve(op, &rhs.eval(&u)?, 0.0)?;
        let inc = norm(&next.sub(&u)?)?;
        let size = norm(&next)?;
        if size > cfg.eta {
            return Err(PhiError::BallEscape {
                iteration: n,
                norm: size,
                eta: cfg.eta,
            });
        }
        if let Some(&prev) = report.increments.last() {
            if prev > 0.0 {
                let factor = inc / prev;
                report.contraction_factors.push(factor);
                if factor >= 1.0 {
                    streak.push(factor);
                    if streak.len() >= 3 {
                        return Err(PhiError::Divergence { factors: streak });
                    }
                } else {
                    streak.clear();
                }
            }
        }
        report.increments.push(inc);
        report.history.push(size);
        report.iterations = n;
        u = next;
        if inc < cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.solution = u;
    Ok(report)
}

/// Smooth random field vanishing at `t = 0`, scaled to sampled norm
/// `radius` in `spec`.
pub fn random_ball_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, radius: f64, spec: &WeightedSpaceSpec, set: &SampleSet) -> Result<Field> {
    let modes = &grid.modes;
    let n = modes.len();
    let zero = n / 2;
    let mut ang = vec![Complex64::new(0.0, 0.0); n];
    ang[zero] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
    for i in zero + 1..n {
        let w = 1.0 / (1.0 + modes.k_sq(i) + modes.l_sq(i));
        let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w;
        ang[i] = v;
        ang[modes.negated(i)] = v.conj();
    }
    let (x0, x1) = (grid.x_nodes[0], *grid.x_nodes.last().unwrap());
    let (fa, fb, ph) = (rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0));
    let t_end = grid.t_end();
    let raw = Field::from_modes(grid.clone(), spec.gamma, |x, mode, t| {
        let s = (x - x0) / (x1 - x0);
        let radial = (fa * std::f64::consts::PI * s + ph).cos() + fb * s * s;
        ang[modes.position(mode).unwrap_or(zero)] * (radial * t / t_end)
    });
    let n0 = weighted_holder_terms(&raw, spec, set)?.total.total;
    if !(n0 > 0.0) {
        return Err(PhiError::Numerical("degenerate random field".into()));
    }
    Ok(raw.scale(radius / n0))
}

/// Empirical `C_η`: the largest of the three structural quotients
/// `‖F1(u)-F1(u')‖_{k+1} / ‖u-u'‖_{k+2}`,
/// `‖F2(u)-F2(u')‖_k / (max‖u‖ ‖u-u'‖)` and `‖F2(u)‖_k / ‖u‖²`
/// over `n_pairs` random pairs in the ball of radius `eta`, times `safety`.
pub fn estimate_c_eta(
    grid: &Arc<Grid>,
    rhs: &dyn SemilinearRhs,
    space: &WeightedSpaceSpec,
    eta: f64,
    n_pairs: usize,
    seed: u64,
    sampler: &PairSampler,
    safety: f64,
) -> Result<f64> {
    let set = SampleSet::new(grid, sampler);
    let top = WeightedSpaceSpec { k: space.k + 2, ..*space };
    let mid = WeightedSpaceSpec { k: space.k + 1, ..*space };
    let norm = |v: &Field, s: &WeightedSpaceSpec| -> Result<f64> { Ok(weighted_holder_terms(v, s, &set)?.total.total) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let r1 = eta * rng.gen_range(0.1..1.0);
        let r2 = eta * rng.gen_range(0.1..1.0);
        let u = random_ball_field(grid, &mut rng, r1, &top, &set)?;
        let v = random_ball_field(grid, &mut rng, r2, &top, &set)?;
        fields.push((u, v));
    }
    let worst = fields
        .par_iter()
        .map(|(u, v)| -> Result<f64> {
            let d = norm(&u.sub(v)?, &top)?;
            let (nu, nv) = (norm(u, &top)?, norm(v, &top)?);
            let mut q: f64 = 0.0;
            if d > 0.0 {
                let f1 = rhs.f1(u)?.sub(&rhs.f1(v)?)?;
                q = q.max(norm(&f1, &mid)? / d);
                let f2 = rhs.f2(u)?.sub(&rhs.f2(v)?)?;
                q = q.max(norm(&f2, space)? / (nu.max(nv) * d));
            }
            if nu > 0.0 {
                q = q.max(norm(&rhs.f2(u)?, space)? / (nu * nu));
            }
            Ok(q)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(safety * worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Sup of `|(D_t + L)u - F(u)|` over interior nodes and an angle lattice.
    pub strong_residual: f64,
    /// Sup of `|u(0)|`.
    pub initial_norm: f64,
}

fn lattice_phases(grid: &Grid, per_dim: usize) -> Vec<Vec<Complex64>> {
    let dims = grid.modes.dims();
    (0..per_dim.pow(dims as u32))
        .map(|idx| {
            let mut rem = idx;
            let a: Vec<f64> = (0..dims)
                .map(|_| {
                    let v = std::f64::consts::TAU * (rem % per_dim) as f64 / per_dim as f64;
                    rem /= per_dim;
                    v
                })
                .collect();
            grid.mode_phases(&a)
        })
        .collect()
}

/// Strong residual of `(∂t + Δ)u = F(u)` with central differences in `t`
/// and the operator's spatial discretisation.
pub fn verify_solution(u: &Field, rhs: &dyn SemilinearRhs, op: &HeatOperator) -> Result<ResidualReport> {
    let forcing = rhs.eval(u)?;
    residual_against(u, &forcing, op)
}

/// Strong residual of `(∂t + Δ)u = ℓ` for a given forcing.
pub fn residual_against(u: &Field, forcing: &Field, op: &HeatOperator) -> Result<ResidualReport> {
    if *u.grid != *op.grid {
        return Err(PhiError::Domain("field lives on a different grid".into()));
    }
    let grid = op.grid.clone();
    let n_t = grid.n_t();
    let n_x = grid.n_x();
    let um = u.materialize();
    let fm = forcing.materialize();
    let per_dim = 2 * grid.modes.k_max.max(grid.modes.l_max) + 2;
    let phases = lattice_phases(&grid, per_dim);
    let dt = grid.dt();
    let worst = (1..n_t.saturating_sub(1))
        .into_par_iter()
        .map(|it| {
            let lu = op.apply(&um.slice(it));
            let (prev, next, f) = (um.slice(it - 1), um.slice(it + 1), fm.slice(it));
            let mut r = lu.clone();
            for i in 0..r.data.len() {
                r.data[i] += (next.data[i] - prev.data[i]) / (2.0 * dt) - f.data[i];
            }
            let mut w: f64 = 0.0;
            for ph in &phases {
                for ix in 1..n_x - 1 {
                    w = w.max(r.value_with_phases(ix, ph).abs());
                }
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    let mut init: f64 = 0.0;
    let p0 = um.slice(0);
    for ph in &phases {
        for ix in 0..n_x {
            init = init.max(p0.value_with_phases(ix, ph).abs());
        }
    }
    Ok(ResidualReport {
        strong_residual: worst,
        initial_norm: init,
    })
}

/// Strong residual of the exact manufactured solution
/// `u* = s t φ(x) sin y` with `φ` flat at both ends, under the same
/// discrete operator; `s` matches its sup to `amplitude`. This is the
/// spatial truncation level the solver itself achieves.
pub fn manufactured_baseline(op: &HeatOperator, amplitude: f64) -> Result<f64> {
    let grid = op.grid.clone();
    if grid.modes.b == 0 || grid.modes.k_max == 0 {
        return Err(PhiError::Config("manufactured baseline needs a base angle with |k| ≥ 1".into()));
    }
    let (lo, hi) = (grid.x_nodes[0], *grid.x_nodes.last().unwrap());
    let b = op.model.b as f64;
    let w = std::f64::consts::PI / (hi - lo);
    let t_end = grid.t_end();
    let s = amplitude / t_end;
    let phi = move |x: f64| (w * (x - lo)).cos();
    let dphi = move |x: f64| -w * (w * (x - lo)).sin();
    let d2phi = move |x: f64| -w * w * (w * (x - lo)).cos();
    let l_phi = move |x: f64| -x.powi(4) * d2phi(x) - (2.0 - b) * x.powi(3) * dphi(x) + x * x * phi(x);
    let mut unit = vec![0i64; grid.modes.dims()];
    unit[0] = 1;
    let neg: Vec<i64> = unit.iter().map(|k| -k).collect();
    let build = |f: &dyn Fn(f64, f64) -> f64| {
        Field::from_modes(grid.clone(), 0.0, |x, m, t| {
            let v = s * f(x, t);
            if m == unit.as_slice() {
                Complex64::new(0.0, -0.5 * v)
            } else if m == neg.as_slice() {
                Complex64::new(0.0, 0.5 * v)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let u = build(&|x, t| t * phi(x));
    let ell = build(&|x, t| phi(x) + t * l_phi(x));
    Ok(residual_against(&u, &ell, op)?.strong_residual)
}

/// Smooth forcing `A (1 + t) exp(-((x - x_c)/σ)²) (1 + ½cos θ₁ + ¼sin θ_last)`
/// centred in the x-range.
pub fn smooth_forcing(grid: &Arc<Grid>, amplitude: f64) -> Field {
    let (x0, x1) = (grid.x_nodes[0], *grid.x_nodes.last().unwrap());
    let xc = 0.5 * (x0 + x1);
    let sigma = (x1 - x0) / 8.0;
    let dims = grid.modes.dims();
    Field::from_fn(grid.clone(), 0.0, move |x, a, t| {
        let ang = if dims == 0 {
            1.0
        } else {
            1.0 + 0.5 * a[0].cos() + 0.25 * a[dims - 1].sin()
        };
        amplitude * (1.0 + t) * (-((x - xc) / sigma).powi(2)).exp() * ang
    })
}

/// Grid for a Picard run of horizon `t_prime`.
pub fn picard_grid(b: usize, f: usize, x_min: f64, x_max: f64, n_x: usize, band: usize, t_prime: f64, n_t: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::new(x_min, x_max, n_x, ModeSet::new(b, f, band, band), t_prime, n_t)?))
}
