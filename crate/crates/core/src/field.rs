//! Tensor grids and sampled fields: a radial x-grid, a box of Fourier modes
//! in the periodic directions and uniform time nodes.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{PhiError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fourier modes `|k_i| ≤ k_max` on the `b` base circles and
/// `|l_j| ≤ l_max` on the `f` fiber circles, in mixed-radix order with the
/// first angle most significant. Negation maps index `i` to `len - 1 - i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSet {
    pub b: usize,
    pub f: usize,
    pub k_max: usize,
    pub l_max: usize,
    indices: Vec<Vec<i64>>,
}

impl ModeSet {
    pub fn new(b: usize, f: usize, k_max: usize, l_max: usize) -> Self {
        let radices: Vec<usize> = (0..b + f)
            .map(|d| if d < b { 2 * k_max + 1 } else { 2 * l_max + 1 })
            .collect();
        let total: usize = radices.iter().product();
        let mut indices = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut digits = vec![0i64; b + f];
            for d in (0..b + f).rev() {
                let r = radices[d];
                let half = (r / 2) as i64;
                digits[d] = (rem % r) as i64 - half;
                rem /= r;
            }
            indices.push(digits);
        }
        Self {
            b,
            f,
            k_max,
            l_max,
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.b + self.f
    }

    pub fn index(&self, i: usize) -> &[i64] {
        &self.indices[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.indices.iter().map(|v| v.as_slice())
    }

    pub fn negated(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// `|k|²` over the base angles.
    pub fn k_sq(&self, i: usize) -> f64 {
        self.indices[i][..self.b].iter().map(|k| (k * k) as f64).sum()
    }

    /// `|l|²` over the fiber angles.
    pub fn l_sq(&self, i: usize) -> f64 {
        self.indices[i][self.b..].iter().map(|l| (l * l) as f64).sum()
    }

    /// Position of a mode vector, if it lies in the box.
    pub fn position(&self, mode: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for d in 0..self.dims() {
            let half = if d < self.b { self.k_max } else { self.l_max } as i64;
            if mode[d].abs() > half {
                return None;
            }
            idx = idx * (2 * half as usize + 1) + (mode[d] + half) as usize;
        }
        Some(idx)
    }

    fn band(&self, d: usize) -> usize {
        if d < self.b {
            self.k_max
        } else {
            self.l_max
        }
    }
}

/// Largest allowed ratio between adjacent x-steps.
pub const MAX_STEP_RATIO: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub x_nodes: Vec<f64>,
    pub modes: ModeSet,
    pub t_nodes: Vec<f64>,
}

impl Grid {
    /// `n_x` nodes from `x_min` to `x_max` whose steps grow geometrically
    /// away from `x_min` with ratio at most [`MAX_STEP_RATIO`]; `n_t`
    /// uniform time nodes on `[0, t_end]`.
    pub fn new(x_min: f64, x_max: f64, n_x: usize, modes: ModeSet, t_end: f64, n_t: usize) -> Result<Self> {
        if n_x < 32 {
            return Err(PhiError::Config(format!("need at least 32 x-nodes, got {n_x}")));
        }
        if !(x_min > 0.0 && x_min < x_max) {
            return Err(PhiError::Config(format!("bad x-range [{x_min}, {x_max}]")));
        }
        if !(t_end > 0.0) || n_t < 2 {
            return Err(PhiError::Config("time grid needs t_end > 0 and at least 2 nodes".into()));
        }
        let natural = (x_max / x_min).powf(1.0 / (n_x - 1) as f64);
        let q = natural.min(MAX_STEP_RATIO);
        let span = x_max - x_min;
        let steps = (n_x - 1) as f64;
        let h0 = if (q - 1.0).abs() < 1e-14 {
            span / steps
        } else {
            span * (q - 1.0) / (q.powf(steps) - 1.0)
        };
        let mut x_nodes = Vec::with_capacity(n_x);
        let mut x = x_min;
        let mut h = h0;
        for _ in 0..n_x {
            x_nodes.push(x);
            x += h;
            h *= q;
        }
        x_nodes[n_x - 1] = x_max;
        let t_nodes = (0..n_t)
            .map(|i| t_end * i as f64 / (n_t - 1) as f64)
            .collect();
        Ok(Self {
            x_nodes,
            modes,
            t_nodes,
        })
    }

    /// Grid with explicit nodes; used by tests and the I/O reader.
    pub fn from_nodes(x_nodes: Vec<f64>, modes: ModeSet, t_nodes: Vec<f64>) -> Result<Self> {
        if x_nodes.len() < 5 || x_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PhiError::Config("x-nodes must be strictly increasing, at least 5".into()));
        }
        if t_nodes.is_empty() || t_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PhiError::Config("t-nodes must be strictly increasing".into()));
        }
        Ok(Self {
            x_nodes,
            modes,
            t_nodes,
        })
    }

    pub fn n_x(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dt(&self) -> f64 {
        if self.n_t() < 2 {
            0.0
        } else {
            self.t_nodes[1] - self.t_nodes[0]
        }
    }

    pub fn t_end(&self) -> f64 {
        *self.t_nodes.last().unwrap()
    }

    /// Largest ratio between adjacent x-steps.
    pub fn max_step_ratio(&self) -> f64 {
        self.x_nodes
            .windows(3)
            .map(|w| {
                let (a, b) = (w[1] - w[0], w[2] - w[1]);
                (b / a).max(a / b)
            })
            .fold(1.0, f64::max)
    }

    /// Same spatial data on a new uniform time grid.
    pub fn with_times(&self, t_end: f64, n_t: usize) -> Self {
        Self {
            x_nodes: self.x_nodes.clone(),
            modes: self.modes.clone(),
            t_nodes: (0..n_t)
                .map(|i| t_end * i as f64 / (n_t.max(2) - 1) as f64)
                .collect(),
        }
    }

    /// Oversampled angular lattice used for projections.
    fn lattice(&self) -> Vec<usize> {
        (0..self.modes.dims())
            .map(|d| 4 * self.modes.band(d) + 4)
            .collect()
    }

    /// `e^{i k·θ}` for every mode, as a reusable basis evaluation.
    pub fn mode_phases(&self, angles: &[f64]) -> Vec<Complex64> {
        let dims = self.modes.dims();
        let per_dim: Vec<Vec<Complex64>> = (0..dims)
            .map(|d| {
                let band = self.modes.band(d) as i64;
                (-band..=band)
                    .map(|k| Complex64::from_polar(1.0, k as f64 * angles[d]))
                    .collect()
            })
            .collect();
        let mut out = vec![Complex64::new(1.0, 0.0)];
        for pd in &per_dim {
            let mut next = Vec::with_capacity(out.len() * pd.len());
            for a in &out {
                for p in pd {
                    next.push(a * p);
                }
            }
            out = next;
        }
        out
    }
}

/// Real-valued field `u = x^γ · Σ_modes c(t, mode, x) e^{i k·θ}` on a grid.
/// Coefficients are stored `[t][mode][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub gamma: f64,
    pub data: Vec<Complex64>,
}

/// A single time slice, coefficients stored `[mode][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub grid: Arc<Grid>,
    pub gamma: f64,
    pub data: Vec<Complex64>,
}

fn project_angles(grid: &Grid, mut values: Vec<Complex64>) -> Vec<Complex64> {
    // separable DFT: values are on the lattice, first angle most significant
    let lattice = grid.lattice();
    let dims = lattice.len();
    let mut shape: Vec<usize> = lattice.clone();
    for d in 0..dims {
        let n = lattice[d];
        let band = grid.modes.band(d) as i64;
        let m = (2 * band + 1) as usize;
        let outer: usize = shape[..d].iter().product();
        let inner: usize = shape[d + 1..].iter().product();
        let twiddle: Vec<Vec<Complex64>> = (-band..=band)
            .map(|k| {
                (0..n)
                    .map(|j| Complex64::from_polar(1.0 / n as f64, -(k as f64) * TAU * j as f64 / n as f64))
                    .collect()
            })
            .collect();
        let mut out = vec![ZERO; outer * m * inner];
        for o in 0..outer {
            for (ki, tw) in twiddle.iter().enumerate() {
                for i in 0..inner {
                    let mut acc = ZERO;
                    for (j, w) in tw.iter().enumerate() {
                        acc += values[(o * n + j) * inner + i] * w;
                    }
                    out[(o * m + ki) * inner + i] = acc;
                }
            }
        }
        values = out;
        shape[d] = m;
    }
    values
}

fn lattice_points(grid: &Grid) -> Vec<Vec<f64>> {
    let lattice = grid.lattice();
    let total: usize = lattice.iter().product();
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut a = vec![0.0; lattice.len()];
            for d in (0..lattice.len()).rev() {
                a[d] = TAU * (rem % lattice[d]) as f64 / lattice[d] as f64;
                rem /= lattice[d];
            }
            a
        })
        .collect()
}

impl Profile {
    pub fn zeros(grid: Arc<Grid>, gamma: f64) -> Self {
        let n = grid.n_modes() * grid.n_x();
        Self {
            grid,
            gamma,
            data: vec![ZERO; n],
        }
    }

    /// Projects a real function `(x, angles) ↦ v` onto the mode box and
    /// stores it with weight `γ`, so the represented field is `x^γ v`.
    pub fn from_fn<F: Fn(f64, &[f64]) -> f64 + Sync>(grid: Arc<Grid>, gamma: f64, f: F) -> Self {
        let pts = lattice_points(&grid);
        let n_x = grid.n_x();
        let n_modes = grid.n_modes();
        let mut data = vec![ZERO; n_modes * n_x];
        use rayon::prelude::*;
        let columns: Vec<Vec<Complex64>> = grid
            .x_nodes
            .par_iter()
            .map(|&x| {
                let vals = pts.iter().map(|a| Complex64::new(f(x, a), 0.0)).collect();
                project_angles(&grid, vals)
            })
            .collect();
        for (ix, col) in columns.into_iter().enumerate() {
            for (mi, c) in col.into_iter().enumerate() {
                data[mi * n_x + ix] = c;
            }
        }
        let mut p = Self { grid, gamma, data };
        p.enforce_real();
        p
    }

    pub fn n_x(&self) -> usize {
        self.grid.n_x()
    }

    pub fn mode(&self, mi: usize) -> &[Complex64] {
        let n = self.n_x();
        &self.data[mi * n..(mi + 1) * n]
    }

    pub fn mode_mut(&mut self, mi: usize) -> &mut [Complex64] {
        let n = self.n_x();
        &mut self.data[mi * n..(mi + 1) * n]
    }

    /// Symmetrises coefficients across mode negation.
    pub fn enforce_real(&mut self) {
        let n_modes = self.grid.n_modes();
        let n_x = self.n_x();
        for mi in 0..n_modes {
            let ni = n_modes - 1 - mi;
            if ni < mi {
                continue;
            }
            for ix in 0..n_x {
                let a = self.data[mi * n_x + ix];
                let b = self.data[ni * n_x + ix];
                let s = 0.5 * (a + b.conj());
                self.data[mi * n_x + ix] = s;
                self.data[ni * n_x + ix] = s.conj();
            }
        }
    }

    /// Point value at node `ix` and the given angles.
    pub fn value(&self, ix: usize, angles: &[f64]) -> f64 {
        let phases = self.grid.mode_phases(angles);
        self.value_with_phases(ix, &phases)
    }

    pub fn value_with_phases(&self, ix: usize, phases: &[Complex64]) -> f64 {
        let n_x = self.n_x();
        let mut acc = 0.0;
        for (mi, p) in phases.iter().enumerate() {
            acc += (self.data[mi * n_x + ix] * p).re;
        }
        acc * self.grid.x_nodes[ix].powf(self.gamma)
    }

    /// Moves the weight into the coefficients (`γ = 0` afterwards).
    pub fn materialize(&self) -> Self {
        let mut out = self.clone();
        if self.gamma != 0.0 {
            let n_x = self.n_x();
            for (i, c) in out.data.iter_mut().enumerate() {
                *c *= self.grid.x_nodes[i % n_x].powf(self.gamma);
            }
            out.gamma = 0.0;
        }
        out
    }
}

impl Field {
    pub fn zeros(grid: Arc<Grid>, gamma: f64) -> Self {
        let n = grid.n_t() * grid.n_modes() * grid.n_x();
        Self {
            grid,
            gamma,
            data: vec![ZERO; n],
        }
    }

    /// Projects a real space-time function onto the grid, with weight `γ`.
    pub fn from_fn<F: Fn(f64, &[f64], f64) -> f64 + Sync>(grid: Arc<Grid>, gamma: f64, f: F) -> Self {
        let mut out = Self::zeros(grid.clone(), gamma);
        for (it, &t) in grid.t_nodes.iter().enumerate() {
            let p = Profile::from_fn(grid.clone(), gamma, |x, a| f(x, a, t));
            out.set_slice(it, &p);
        }
        out
    }

    /// Builds a field from per-mode coefficients `(x, mode, t) ↦ c`.
    pub fn from_modes<F: Fn(f64, &[i64], f64) -> Complex64>(grid: Arc<Grid>, gamma: f64, f: F) -> Self {
        let mut out = Self::zeros(grid.clone(), gamma);
        let n_x = grid.n_x();
        let n_modes = grid.n_modes();
        for (it, &t) in grid.t_nodes.iter().enumerate() {
            for mi in 0..n_modes {
                let mode = grid.modes.index(mi);
                for (ix, &x) in grid.x_nodes.iter().enumerate() {
                    out.data[(it * n_modes + mi) * n_x + ix] = f(x, mode, t);
                }
            }
        }
        out
    }

    /// The constant field `c`.
    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        Self::from_modes(grid, 0.0, |_, m, _| {
            if m.iter().all(|k| *k == 0) {
                Complex64::new(c, 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn slice_len(&self) -> usize {
        self.grid.n_modes() * self.grid.n_x()
    }

    pub fn slice(&self, it: usize) -> Profile {
        let n = self.slice_len();
        Profile {
            grid: self.grid.clone(),
            gamma: self.gamma,
            data: self.data[it * n..(it + 1) * n].to_vec(),
        }
    }

    pub fn slice_data(&self, it: usize) -> &[Complex64] {
        let n = self.slice_len();
        &self.data[it * n..(it + 1) * n]
    }

    pub fn set_slice(&mut self, it: usize, p: &Profile) {
        let n = self.slice_len();
        let scale = if p.gamma == self.gamma {
            None
        } else {
            Some(p.gamma - self.gamma)
        };
        let n_x = self.grid.n_x();
        for (i, c) in p.data.iter().enumerate() {
            self.data[it * n + i] = match scale {
                None => *c,
                Some(e) => *c * self.grid.x_nodes[i % n_x].powf(e),
            };
        }
    }

    /// Coefficient at `(t-node, mode, x-node)`.
    pub fn at(&self, it: usize, mi: usize, ix: usize) -> Complex64 {
        self.data[(it * self.grid.n_modes() + mi) * self.grid.n_x() + ix]
    }

    pub fn value(&self, it: usize, ix: usize, angles: &[f64]) -> f64 {
        let phases = self.grid.mode_phases(angles);
        self.value_with_phases(it, ix, &phases)
    }

    pub fn value_with_phases(&self, it: usize, ix: usize, phases: &[Complex64]) -> f64 {
        let n_x = self.grid.n_x();
        let base = it * self.slice_len();
        let mut acc = 0.0;
        for (mi, p) in phases.iter().enumerate() {
            acc += (self.data[base + mi * n_x + ix] * p).re;
        }
        acc * self.grid.x_nodes[ix].powf(self.gamma)
    }

    /// Same function with the weight moved into the coefficients.
    pub fn materialize(&self) -> Self {
        self.reweight(0.0)
    }

    /// Same function expressed with weight `γ'`.
    pub fn reweight(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        let e = self.gamma - gamma;
        if e != 0.0 {
            let n_x = self.grid.n_x();
            let pw: Vec<f64> = self.grid.x_nodes.iter().map(|x| x.powf(e)).collect();
            for (i, c) in out.data.iter_mut().enumerate() {
                *c *= pw[i % n_x];
            }
        }
        out.gamma = gamma;
        out
    }

    /// Coefficients `v` of `u = x^γ v` reinterpreted with weight 0.
    pub fn stripped(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            gamma: 0.0,
            data: self.data.clone(),
        }
    }

    /// Coefficients reinterpreted with weight `γ` (multiplies the function by `x^γ`).
    pub fn with_weight(&self, gamma: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            gamma,
            data: self.data.clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self + s·other`; the result carries `self`'s weight.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let o = other.reweight(self.gamma);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&o.data) {
            *a += *b * s;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.axpy(1.0, other)
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(PhiError::Domain("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest coefficient modulus of the stored (unweighted) data.
    pub fn max_coeff(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest departure from Hermitian symmetry across mode negation.
    pub fn hermitian_defect(&self) -> f64 {
        let n_modes = self.grid.n_modes();
        let n_x = self.grid.n_x();
        let mut worst: f64 = 0.0;
        for it in 0..self.grid.n_t() {
            for mi in 0..n_modes {
                let ni = n_modes - 1 - mi;
                for ix in 0..n_x {
                    let d = self.at(it, mi, ix) - self.at(it, ni, ix).conj();
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    pub fn enforce_real(&mut self) {
        for it in 0..self.grid.n_t() {
            let mut p = self.slice(it);
            p.enforce_real();
            self.set_slice(it, &p);
        }
    }

    /// Sup of `|u|` over nodes × an angular lattice of `per_dim` points per angle.
    pub fn sup_on_lattice(&self, per_dim: usize) -> f64 {
        let dims = self.grid.modes.dims();
        let total = per_dim.pow(dims as u32);
        let mut worst: f64 = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            let mut a = vec![0.0; dims];
            for v in a.iter_mut() {
                *v = TAU * (rem % per_dim) as f64 / per_dim as f64;
                rem /= per_dim;
            }
            let ph = self.grid.mode_phases(&a);
            for it in 0..self.grid.n_t() {
                for ix in 0..self.grid.n_x() {
                    worst = worst.max(self.value_with_phases(it, ix, &ph).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(b: usize, f: usize, k: usize, l: usize) -> Arc<Grid> {
        Arc::new(Grid::new(0.05, 1.0, 40, ModeSet::new(b, f, k, l), 0.5, 6).unwrap())
    }

    #[test]
    fn mode_box_is_symmetric_under_negation() {
        let ms = ModeSet::new(2, 1, 2, 1);
        assert_eq!(ms.len(), 5 * 5 * 3);
        for i in 0..ms.len() {
            let neg: Vec<i64> = ms.index(i).iter().map(|k| -k).collect();
            assert_eq!(ms.index(ms.negated(i)), neg.as_slice());
            assert_eq!(ms.position(ms.index(i)), Some(i));
        }
        assert_eq!(ms.index(ms.len() / 2), &[0, 0, 0]);
    }

    #[test]
    fn grid_step_ratio_is_capped() {
        let g = Grid::new(0.01, 1.0, 64, ModeSet::new(1, 0, 1, 0), 1.0, 3).unwrap();
        assert!(g.max_step_ratio() <= MAX_STEP_RATIO + 1e-9);
        assert_eq!(g.x_nodes[0], 0.01);
        assert_eq!(*g.x_nodes.last().unwrap(), 1.0);
        assert!(g.x_nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(Grid::new(0.01, 1.0, 16, ModeSet::new(1, 0, 1, 0), 1.0, 3).is_err());
    }

    #[test]
    fn projection_reproduces_band_limited_functions() {
        let g = grid(1, 1, 3, 2);
        let f = |x: f64, a: &[f64]| x * (2.0 * a[0]).sin() + (a[1] - 0.3).cos() + 0.5 * (a[0] + 2.0 * a[1]).cos();
        let p = Profile::from_fn(g.clone(), 0.0, f);
        for (ix, &x) in g.x_nodes.iter().enumerate().step_by(7) {
            for a in [[0.1, 2.0], [4.0, 5.5], [1.0, 0.0]] {
                assert!((p.value(ix, &a) - f(x, &a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_bookkeeping() {
        let g = grid(1, 0, 2, 0);
        let f = Field::from_fn(g.clone(), 1.5, |x, a, t| (1.0 + t) * x * a[0].cos());
        let m = f.materialize();
        assert_eq!(m.gamma, 0.0);
        for (it, ix) in [(0, 0), (3, 10), (5, 39)] {
            let a = [0.7];
            assert!((f.value(it, ix, &a) - m.value(it, ix, &a)).abs() < 1e-13);
        }
        assert_eq!(f.stripped().data, f.data);
        assert!(f.hermitian_defect() < 1e-15);
    }

    #[test]
    fn constant_field_value() {
        let g = grid(1, 1, 1, 1);
        let c = Field::constant(g, 2.5);
        assert_eq!(c.value(2, 5, &[0.3, 1.1]), 2.5);
        assert_eq!(c.sup_on_lattice(4), 2.5);
    }
}
