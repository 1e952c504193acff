//! Mode-reduced heat solver for the Φ-Laplacian.
//!
//! After a Fourier decomposition in the periodic directions each mode obeys
//! a one-dimensional degenerate problem in `x`. It is discretised as a
//! vertex-centred finite-volume scheme in divergence form
//!
//! ```text
//! (L u)_i = -(1/W_i) [a_{i+½}(u_{i+1}-u_i)/h_{i+½} - a_{i-½}(u_i-u_{i-1})/h_{i-½}] + μ_i u_i
//! ```
//!
//! with `a = √g g^{xx}`, `W_i` the `√g`-volume of the dual cell and `μ_i`
//! the mass term of the mode. Both ends are zero-flux. The matrix is
//! symmetric in the `W`-weighted inner product, so `Σ W_i u_i` is conserved
//! exactly for the zero mode.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::field::{Field, Grid, Profile};
use crate::geometry::{metric_unchecked, PhiModel};
use crate::numerics::{gauss_legendre, Tridiagonal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    CrankNicolson,
    BackwardEuler,
}

impl TimeScheme {
    fn theta(self) -> f64 {
        match self {
            TimeScheme::CrankNicolson => 0.5,
            TimeScheme::BackwardEuler => 1.0,
        }
    }
}

/// Per-mode tridiagonal discretisation with cached factorisations of
/// `I + θ δt L` for the grid's time step.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    pub model: PhiModel,
    pub grid: Arc<Grid>,
    pub scheme: TimeScheme,
    /// Dual-cell volumes `W_i`.
    pub cell_volume: Vec<f64>,
    /// `a_{i+½} / h_{i+½}` for the `n_x - 1` intervals.
    pub conductance: Vec<f64>,
    /// Mass coefficients per angular direction at each node.
    angular: Vec<Vec<f64>>,
    dt: f64,
    factors: Vec<Tridiagonal>,
}

struct Coefficients {
    sqrt_g: Box<dyn Fn(f64) -> f64 + Sync>,
    flux: Box<dyn Fn(f64) -> f64 + Sync>,
    angular: Box<dyn Fn(f64) -> Vec<f64> + Sync>,
}

/// Angle-averaged coefficients. For exact models these are the closed forms.
fn coefficients(model: &PhiModel) -> Coefficients {
    let b = model.b;
    let f = model.f;
    if model.is_exact() {
        let p = -(2.0 + b as f64);
        return Coefficients {
            sqrt_g: Box::new(move |x| x.powf(p)),
            flux: Box::new(move |x| x.powf(2.0 - b as f64)),
            angular: Box::new(move |x| {
                let mut v = vec![x * x; b];
                v.extend(std::iter::repeat_n(1.0, f));
                v
            }),
        };
    }
    let dims = model.angular_dims();
    let n = 8usize;
    let total = n.pow(dims as u32);
    let lattice: Vec<Vec<f64>> = (0..total)
        .map(|idx| {
            let mut rem = idx;
            (0..dims)
                .map(|_| {
                    let a = TAU * (rem % n) as f64 / n as f64;
                    rem /= n;
                    a
                })
                .collect()
        })
        .collect();
    let lattice = Arc::new(lattice);
    let average = {
        let model = model.clone();
        let lattice = lattice.clone();
        move |x: f64| -> (f64, Vec<f64>) {
            // (⟨√g⟩, ⟨√g g^{ii}⟩ for every coordinate)
            let m = model.m();
            let mut sg = 0.0;
            let mut diag = vec![0.0; m];
            for a in lattice.iter() {
                let met = metric_unchecked(&model, x, a).expect("validated model");
                sg += met.sqrt_det;
                for (i, d) in diag.iter_mut().enumerate() {
                    *d += met.sqrt_det * met.g_inv[(i, i)];
                }
            }
            let k = lattice.len() as f64;
            (sg / k, diag.into_iter().map(|d| d / k).collect())
        }
    };
    let avg = Arc::new(average);
    let a1 = avg.clone();
    let a2 = avg.clone();
    let a3 = avg;
    Coefficients {
        sqrt_g: Box::new(move |x| a1(x).0),
        flux: Box::new(move |x| a2(x).1[0]),
        angular: Box::new(move |x| {
            let (sg, d) = a3(x);
            d[1..].iter().map(|v| v / sg).collect()
        }),
    }
}

/// Exact or Gauss–Legendre `√g`-volume of `[lo, hi]`.
fn cell_integral(model: &PhiModel, c: &Coefficients, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if model.is_exact() {
        let e = -1.0 - model.b as f64;
        return (hi.powf(e) - lo.powf(e)) / e;
    }
    let (z, w) = gauss_legendre(6);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    z.iter().zip(&w).map(|(z, w)| w * half * (c.sqrt_g)(mid + half * z)).sum()
}

/// Builds the per-mode operators and factorisations for `grid`.
pub fn discretize(model: &PhiModel, grid: Arc<Grid>, scheme: TimeScheme) -> Result<HeatOperator> {
    model.validate()?;
    if grid.n_x() < 5 {
        return Err(PhiError::Config("x-grid needs at least 5 nodes".into()));
    }
    if grid.modes.b != model.b || grid.modes.f != model.f {
        return Err(PhiError::Config(format!(
            "mode set is for (b, f) = ({}, {}), model has ({}, {})",
            grid.modes.b, grid.modes.f, model.b, model.f
        )));
    }
    let x = &grid.x_nodes;
    let lo = x[0] - 1e-12 * x[0];
    let hi = *x.last().unwrap() * (1.0 + 1e-12);
    if lo < model.x_min * (1.0 - 1e-9) || hi > model.x_max * (1.0 + 1e-9) {
        return Err(PhiError::Config(format!(
            "grid [{}, {}] leaves the collar [{}, {}]",
            x[0],
            x[x.len() - 1],
            model.x_min,
            model.x_max
        )));
    }
    let n = grid.n_x();
    let c = coefficients(model);
    let mids: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let conductance: Vec<f64> = x
        .windows(2)
        .zip(&mids)
        .map(|(w, m)| (c.flux)(*m) / (w[1] - w[0]))
        .collect();
    let cell_volume: Vec<f64> = (0..n)
        .map(|i| {
            let a = if i == 0 { x[0] } else { mids[i - 1] };
            let b = if i + 1 == n { x[n - 1] } else { mids[i] };
            cell_integral(model, &c, a, b)
        })
        .collect();
    let angular: Vec<Vec<f64>> = x.iter().map(|&xi| (c.angular)(xi)).collect();
    let mut op = HeatOperator {
        model: model.clone(),
        grid: grid.clone(),
        scheme,
        cell_volume,
        conductance,
        angular,
        dt: grid.dt(),
        factors: Vec::new(),
    };
    op.refactor(grid.dt())?;
    Ok(op)
}

impl HeatOperator {
    pub fn n_x(&self) -> usize {
        self.grid.n_x()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Mass term `μ_i` of mode `mi` at node `i`.
    pub fn mass(&self, mi: usize, i: usize) -> f64 {
        let mode = self.grid.modes.index(mi);
        mode.iter()
            .zip(&self.angular[i])
            .map(|(k, c)| (k * k) as f64 * c)
            .sum()
    }

    /// Tridiagonal bands `(lower, diag, upper)` of `L` for mode `mi`.
    pub fn bands(&self, mi: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n_x();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let w = self.cell_volume[i];
            if i > 0 {
                let c = self.conductance[i - 1] / w;
                lower[i] = -c;
                diag[i] += c;
            }
            if i + 1 < n {
                let c = self.conductance[i] / w;
                upper[i] = -c;
                diag[i] += c;
            }
            diag[i] += self.mass(mi, i);
        }
        (lower, diag, upper)
    }

    /// Recomputes the cached factorisations for a new time step.
    pub fn refactor(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(PhiError::Config(format!("time step {dt} must be positive")));
        }
        let th = self.scheme.theta() * dt;
        let factors: Option<Vec<Tridiagonal>> = (0..self.grid.n_modes())
            .into_par_iter()
            .map(|mi| {
                let (l, d, u) = self.bands(mi);
                let l: Vec<f64> = l.iter().map(|v| th * v).collect();
                let u: Vec<f64> = u.iter().map(|v| th * v).collect();
                let d: Vec<f64> = d.iter().map(|v| 1.0 + th * v).collect();
                Tridiagonal::factor(&l, &d, &u)
            })
            .collect();
        self.factors = factors.ok_or_else(|| {
            PhiError::Numerical(format!("singular factorisation of I + θδt L at δt = {dt}"))
        })?;
        self.dt = dt;
        Ok(())
    }

    /// `out = L u` for one mode.
    pub fn apply_mode(&self, mi: usize, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_x();
        for i in 0..n {
            let w = self.cell_volume[i];
            let mut flux = ZERO;
            if i > 0 {
                flux += (u[i] - u[i - 1]) * self.conductance[i - 1];
            }
            if i + 1 < n {
                flux -= (u[i + 1] - u[i]) * self.conductance[i];
            }
            out[i] = flux / w + u[i] * self.mass(mi, i);
        }
    }

    /// `L` applied to a profile (weights are materialised first).
    pub fn apply(&self, u: &Profile) -> Profile {
        let u = u.materialize();
        let n = self.n_x();
        let mut out = Profile::zeros(self.grid.clone(), 0.0);
        for mi in 0..self.grid.n_modes() {
            let src = &u.data[mi * n..(mi + 1) * n];
            self.apply_mode(mi, src, &mut out.data[mi * n..(mi + 1) * n]);
        }
        out
    }

    /// One homogeneous step for mode `mi`, in place.
    fn step_mode(&self, mi: usize, u: &mut [Complex64], scratch: &mut [Complex64]) {
        if self.scheme == TimeScheme::CrankNicolson {
            self.apply_mode(mi, u, scratch);
            let h = 0.5 * self.dt;
            for (a, s) in u.iter_mut().zip(scratch.iter()) {
                *a -= *s * h;
            }
        }
        self.factors[mi].solve_in_place(u);
    }

    /// `W`-weighted `L²` energy `Σ W_i |u_i|²` over modes (angular factor omitted).
    pub fn energy(&self, u: &Profile) -> f64 {
        let n = self.n_x();
        u.materialize()
            .data
            .iter()
            .enumerate()
            .map(|(i, c)| self.cell_volume[i % n] * c.norm_sqr())
            .sum()
    }

    /// Trapezoid weights times `√g` at the nodes, angle-averaged.
    pub fn nodal_quadrature(&self) -> Vec<f64> {
        let x = &self.grid.x_nodes;
        let n = x.len();
        let c = coefficients(&self.model);
        (0..n)
            .map(|i| {
                let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
                0.5 * (left + right) * (c.sqrt_g)(x[i])
            })
            .collect()
    }

    /// `∫ u dvol` by the nodal quadrature.
    pub fn integral(&self, u: &Profile, weights: &[f64]) -> f64 {
        let u = u.materialize();
        let zero = self.grid.n_modes() / 2;
        let torus = TAU.powi(self.grid.modes.dims() as i32);
        let n = self.n_x();
        torus
            * weights
                .iter()
                .zip(&u.data[zero * n..(zero + 1) * n])
                .map(|(w, c)| w * c.re)
                .sum::<f64>()
    }
}

/// Trajectory of the homogeneous heat equation from `u0` at every node of
/// the operator's time grid.
pub fn evolve(op: &HeatOperator, u0: &Profile) -> Result<Field> {
    let grid = op.grid.clone();
    let u0 = u0.materialize();
    let n_x = grid.n_x();
    let n_t = grid.n_t();
    let columns: Vec<Vec<Complex64>> = (0..grid.n_modes())
        .into_par_iter()
        .map(|mi| {
            let mut cur = u0.data[mi * n_x..(mi + 1) * n_x].to_vec();
            let mut scratch = vec![ZERO; n_x];
            let mut traj = Vec::with_capacity(n_t * n_x);
            traj.extend_from_slice(&cur);
            for _ in 1..n_t {
                op.step_mode(mi, &mut cur, &mut scratch);
                traj.extend_from_slice(&cur);
            }
            traj
        })
        .collect();
    let out = gather(grid, 0.0, columns);
    if !out.is_finite() {
        return Err(PhiError::Numerical("non-finite values in trajectory".into()));
    }
    Ok(out)
}

/// State at time `t_end` using `n_steps` equal steps; the operator is
/// refactored if the step differs from its cached one.
pub fn evolve_to(op: &HeatOperator, u0: &Profile, t_end: f64, n_steps: usize) -> Result<Profile> {
    let dt = t_end / n_steps.max(1) as f64;
    let local;
    let op = if (dt - op.dt).abs() > 1e-15 * dt {
        let mut o = op.clone();
        o.refactor(dt)?;
        local = o;
        &local
    } else {
        op
    };
    let mut u = u0.materialize();
    let n_x = op.n_x();
    u.data
        .par_chunks_mut(n_x)
        .enumerate()
        .for_each(|(mi, col)| {
            let mut scratch = vec![ZERO; n_x];
            for _ in 0..n_steps {
                op.step_mode(mi, col, &mut scratch);
            }
        });
    Ok(u)
}

fn gather(grid: Arc<Grid>, gamma: f64, columns: Vec<Vec<Complex64>>) -> Field {
    let n_x = grid.n_x();
    let n_modes = grid.n_modes();
    let mut out = Field::zeros(grid.clone(), gamma);
    for (mi, col) in columns.into_iter().enumerate() {
        for (it, chunk) in col.chunks(n_x).enumerate() {
            let base = (it * n_modes + mi) * n_x;
            out.data[base..base + n_x].copy_from_slice(chunk);
        }
    }
    out
}

/// Duhamel convolution `x^{-γ} H (x^γ ℓ)` with `(Hℓ)(t) = ∫₀ᵗ e^{-(t-s)Δ} ℓ(s) ds`,
/// stepped on the operator's time grid. Crank–Nicolson uses the trapezoid
/// rule in `s`; backward Euler injects `δt ℓ(t_{n+1})` before each solve.
/// The result carries weight `-γ` over the raw convolution coefficients, so
/// the conjugation is exact.
pub fn heat_convolve(op: &HeatOperator, ell: &Field, gamma: f64) -> Result<Field> {
    if *ell.grid != *op.grid {
        return Err(PhiError::Domain("forcing lives on a different grid".into()));
    }
    if !ell.is_finite() {
        return Err(PhiError::Domain("forcing has non-finite entries".into()));
    }
    let grid = op.grid.clone();
    let src = ell.with_weight(ell.gamma + gamma).materialize();
    let n_x = grid.n_x();
    let n_t = grid.n_t();
    let n_modes = grid.n_modes();
    let dt = op.dt;
    let columns: Vec<Vec<Complex64>> = (0..n_modes)
        .into_par_iter()
        .map(|mi| {
            let at = |it: usize| {
                let base = (it * n_modes + mi) * n_x;
                &src.data[base..base + n_x]
            };
            let mut cur = vec![ZERO; n_x];
            let mut scratch = vec![ZERO; n_x];
            let mut traj = Vec::with_capacity(n_t * n_x);
            traj.extend_from_slice(&cur);
            for it in 1..n_t {
                match op.scheme {
                    TimeScheme::CrankNicolson => {
                        let h = 0.5 * dt;
                        for (c, l) in cur.iter_mut().zip(at(it - 1)) {
                            *c += *l * h;
                        }
                        op.step_mode(mi, &mut cur, &mut scratch);
                        for (c, l) in cur.iter_mut().zip(at(it)) {
                            *c += *l * h;
                        }
                    }
                    TimeScheme::BackwardEuler => {
                        for (c, l) in cur.iter_mut().zip(at(it)) {
                            *c += *l * dt;
                        }
                        op.step_mode(mi, &mut cur, &mut scratch);
                    }
                }
                traj.extend_from_slice(&cur);
            }
            traj
        })
        .collect();
    let out = gather(grid, -gamma, columns);
    if !out.is_finite() {
        return Err(PhiError::Numerical("non-finite values in Duhamel convolution".into()));
    }
    Ok(out)
}

/// Largest relative drift of `∫ u(t) dvol` along the trajectory from `u0`
/// up to `t_end`, measured with the nodal `√g`-weighted trapezoid rule.
pub fn mass_conservation_check(op: &HeatOperator, u0: &Profile, t_end: f64) -> Result<f64> {
    let weights = op.nodal_quadrature();
    let m0 = op.integral(u0, &weights);
    if m0.abs() < 1e-300 || !m0.is_finite() {
        return Err(PhiError::Degenerate("initial mass is zero".into()));
    }
    let n_steps = (t_end / op.dt).round().max(1.0) as usize;
    let dt = t_end / n_steps as f64;
    let mut o = op.clone();
    if (dt - o.dt).abs() > 1e-15 * dt {
        o.refactor(dt)?;
    }
    let mut u = u0.materialize();
    let n_x = o.n_x();
    let mut scratch = vec![ZERO; n_x];
    let mut worst: f64 = 0.0;
    // only the zero mode carries mass
    let zero = o.grid.n_modes() / 2;
    for _ in 0..n_steps {
        let col = &mut u.data[zero * n_x..(zero + 1) * n_x];
        o.step_mode(zero, col, &mut scratch);
        let m = o.integral(&u, &weights);
        worst = worst.max(((m - m0) / m0).abs());
    }
    Ok(worst)
}

/// `Σ W_i u_i` for the zero mode: the discrete mass the scheme conserves.
pub fn discrete_mass(op: &HeatOperator, u: &Profile) -> f64 {
    let n = op.n_x();
    let zero = op.grid.n_modes() / 2;
    let u = u.materialize();
    op.cell_volume
        .iter()
        .zip(&u.data[zero * n..(zero + 1) * n])
        .map(|(w, c)| w * c.re)
        .sum()
}
