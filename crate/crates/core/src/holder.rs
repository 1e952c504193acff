//! Φ-derivatives of sampled fields and sampled estimates of the parabolic
//! Hölder norms built from them.
//!
//! The α-seminorm is estimated on a seeded, stratified set of sample pairs.
//! Every pair `((p,t),(p',t'))` also carries the corner `(p',t)`, so the
//! mixed quotient can be compared with the split space and time quotients
//! pair by pair.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::field::{Field, Grid};
use crate::geometry::{phi_distance, Point};
use crate::numerics::DerivativeStencil;

/// `(x²∂x)^q (x∂y)^β ∂z^a ∂t^j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhiMultiIndex {
    pub q: usize,
    pub beta: Vec<usize>,
    pub a: Vec<usize>,
    pub t_order: usize,
}

impl PhiMultiIndex {
    pub fn zero(b: usize, f: usize) -> Self {
        Self {
            q: 0,
            beta: vec![0; b],
            a: vec![0; f],
            t_order: 0,
        }
    }

    /// Parabolic order; time derivatives count twice.
    pub fn order(&self) -> usize {
        self.q + self.beta.iter().sum::<usize>() + self.a.iter().sum::<usize>() + 2 * self.t_order
    }

    /// Spatial part of the order.
    pub fn spatial_order(&self) -> usize {
        self.q + self.beta.iter().sum::<usize>() + self.a.iter().sum::<usize>()
    }

    /// All indices of parabolic order at most `k`, sorted by order.
    pub fn all_up_to(b: usize, f: usize, k: usize) -> Vec<Self> {
        let n = 1 + b + f;
        let mut out = Vec::new();
        for j in 0..=k / 2 {
            let budget = k - 2 * j;
            let mut digits = vec![0usize; n];
            loop {
                if digits.iter().sum::<usize>() <= budget {
                    out.push(Self {
                        q: digits[0],
                        beta: digits[1..1 + b].to_vec(),
                        a: digits[1 + b..].to_vec(),
                        t_order: j,
                    });
                }
                // odometer over [0, budget]^n
                let mut d = 0;
                loop {
                    if d == n {
                        break;
                    }
                    digits[d] += 1;
                    if digits[d] <= budget {
                        break;
                    }
                    digits[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
        }
        out.sort_by_key(|m| (m.order(), std::cmp::Reverse(m.q), m.t_order));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpaceSpec {
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl WeightedSpaceSpec {
    pub fn new(k: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PhiError::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        if !gamma.is_finite() {
            return Err(PhiError::Domain("gamma must be finite".into()));
        }
        Ok(Self { k, alpha, gamma })
    }
}

/// A space-time sample: x-node index, continuous angles, t-node index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub ix: usize,
    pub angles: Vec<f64>,
    pub it: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePair {
    pub first: SamplePoint,
    pub second: SamplePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub sup_norm: f64,
    /// Mixed quotient `|Δu| / (d^α + |Δt|^{α/2})`.
    pub seminorm: f64,
    pub total: f64,
    pub n_pairs: usize,
    pub max_pair: Option<SamplePair>,
    /// Equal-time quotient `|u(p,t) - u(p',t)| / d^α`.
    pub space_seminorm: f64,
    /// Equal-point quotient `|u(p',t) - u(p',t')| / |Δt|^{α/2}`.
    pub time_seminorm: f64,
}

impl HolderEstimate {
    fn zero(n_pairs: usize) -> Self {
        Self {
            sup_norm: 0.0,
            seminorm: 0.0,
            total: 0.0,
            n_pairs,
            max_pair: None,
            space_seminorm: 0.0,
            time_seminorm: 0.0,
        }
    }
}

/// Seeded stratified pair sampler: pair `i` is near-diagonal when
/// `i % 4 ∈ {0, 1}`, cross-collar when `i % 4 = 2` and uniform otherwise.
/// Pairs are drawn sequentially, so a sampler with more pairs extends the
/// sample of one with fewer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSampler {
    pub n_pairs: usize,
    pub seed: u64,
    /// Reach of near-diagonal pairs, in grid steps.
    #[serde(default = "default_near")]
    pub near_steps: usize,
}

fn default_near() -> usize {
    8
}

impl PairSampler {
    pub fn new(n_pairs: usize, seed: u64) -> Self {
        Self {
            n_pairs,
            seed,
            near_steps: 8,
        }
    }

    pub fn pairs(&self, grid: &Grid) -> Vec<SamplePair> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n_x = grid.n_x();
        let n_t = grid.n_t();
        let dims = grid.modes.dims();
        let steps: Vec<f64> = (0..dims)
            .map(|d| {
                let band = if d < grid.modes.b { grid.modes.k_max } else { grid.modes.l_max };
                TAU / (4 * band + 4) as f64
            })
            .collect();
        let near = self.near_steps as i64;
        let mut out = Vec::with_capacity(self.n_pairs);
        let uniform_point = |rng: &mut ChaCha8Rng| SamplePoint {
            ix: rng.gen_range(0..n_x),
            angles: (0..dims).map(|_| rng.gen_range(0.0..TAU)).collect(),
            it: rng.gen_range(0..n_t),
        };
        let shift = |rng: &mut ChaCha8Rng, i: usize, n: usize| -> usize {
            let o = rng.gen_range(-near..=near);
            (i as i64 + o).clamp(0, n as i64 - 1) as usize
        };
        for i in 0..self.n_pairs {
            let pair = loop {
                let first = uniform_point(&mut rng);
                let second = match i % 4 {
                    0 | 1 => {
                        // stratum 1 moves in space only or in time only
                        let mode = if i % 4 == 0 { 0 } else { rng.gen_range(1..=2) };
                        let mut s = first.clone();
                        if mode != 2 {
                            s.ix = shift(&mut rng, first.ix, n_x);
                            for (a, st) in s.angles.iter_mut().zip(&steps) {
                                *a = (*a + rng.gen_range(-1.0..=1.0) * near as f64 * st).rem_euclid(TAU);
                            }
                        }
                        if mode != 1 {
                            s.it = shift(&mut rng, first.it, n_t);
                        }
                        s
                    }
                    2 => SamplePoint {
                        ix: rng.gen_range(0..n_x),
                        angles: first.angles.clone(),
                        it: first.it,
                    },
                    _ => uniform_point(&mut rng),
                };
                if second != first {
                    break SamplePair { first, second };
                }
            };
            out.push(pair);
        }
        out
    }
}

/// Sample pairs with everything that does not depend on the field
/// precomputed: mode phases at the endpoints and the two denominators.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub pairs: Vec<SamplePair>,
    /// Points `3i, 3i+1, 3i+2` are `(p,t)`, `(p',t')` and `(p',t)`.
    points: Vec<(usize, usize)>,
    phases: Vec<Vec<Complex64>>,
    dist: Vec<f64>,
    dt: Vec<f64>,
}

impl SampleSet {
    pub fn new(grid: &Grid, sampler: &PairSampler) -> Self {
        let pairs = sampler.pairs(grid);
        let b = grid.modes.b;
        let mut points = Vec::with_capacity(3 * pairs.len());
        let mut dist = Vec::with_capacity(pairs.len());
        let mut dt = Vec::with_capacity(pairs.len());
        for p in &pairs {
            points.push((p.first.ix, p.first.it));
            points.push((p.second.ix, p.second.it));
            points.push((p.second.ix, p.first.it));
            let a = Point::from_angles(grid.x_nodes[p.first.ix], &p.first.angles, b);
            let c = Point::from_angles(grid.x_nodes[p.second.ix], &p.second.angles, b);
            dist.push(phi_distance(&a, &c));
            dt.push((grid.t_nodes[p.first.it] - grid.t_nodes[p.second.it]).abs());
        }
        let phases = pairs
            .par_iter()
            .flat_map_iter(|p| {
                let a = grid.mode_phases(&p.first.angles);
                let c = grid.mode_phases(&p.second.angles);
                [a, c.clone(), c]
            })
            .collect();
        Self {
            pairs,
            points,
            phases,
            dist,
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Field values at all sample points.
    pub fn values(&self, u: &Field) -> Vec<f64> {
        self.points
            .par_iter()
            .zip(&self.phases)
            .map(|(&(ix, it), ph)| u.value_with_phases(it, ix, ph))
            .collect()
    }

    /// α-estimate from precomputed values.
    pub fn estimate(&self, values: &[f64], alpha: f64) -> HolderEstimate {
        let n = self.len();
        if n == 0 {
            return HolderEstimate::zero(0);
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // (mixed, index) with ties resolved towards the lowest index
        let pick = |a: (f64, usize), b: (f64, usize)| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        };
        let quotients: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (ua, ub, uc) = (values[3 * i], values[3 * i + 1], values[3 * i + 2]);
                let d = self.dist[i];
                let s = self.dt[i];
                let mixed = (ua - ub).abs() / (d.powf(alpha) + s.powf(0.5 * alpha));
                let space = if d > 0.0 { (ua - uc).abs() / d.powf(alpha) } else { 0.0 };
                let time = if s > 0.0 { (uc - ub).abs() / s.powf(0.5 * alpha) } else { 0.0 };
                (mixed, space, time)
            })
            .collect();
        let (seminorm, at) = quotients
            .iter()
            .enumerate()
            .map(|(i, q)| (q.0, i))
            .fold((0.0, usize::MAX), pick);
        let space_seminorm = quotients.iter().fold(0.0f64, |m, q| m.max(q.1));
        let time_seminorm = quotients.iter().fold(0.0f64, |m, q| m.max(q.2));
        HolderEstimate {
            sup_norm,
            seminorm,
            total: sup_norm + seminorm,
            n_pairs: n,
            max_pair: if at == usize::MAX { None } else { Some(self.pairs[at].clone()) },
            space_seminorm,
            time_seminorm,
        }
    }
}

/// `∂t` by second-order differences (one-sided at the ends), in place.
fn time_derivative(u: &mut Field) {
    let n_t = u.grid.n_t();
    let slice = u.slice_len();
    let dt = u.grid.dt();
    let src = u.data.clone();
    for it in 0..n_t {
        let (w, idx): ([f64; 3], [usize; 3]) = if it == 0 {
            ([-1.5, 2.0, -0.5], [0, 1, 2])
        } else if it == n_t - 1 {
            ([0.5, -2.0, 1.5], [n_t - 3, n_t - 2, n_t - 1])
        } else {
            ([-0.5, 0.0, 0.5], [it - 1, it, it + 1])
        };
        for j in 0..slice {
            u.data[it * slice + j] = (src[idx[0] * slice + j] * w[0]
                + src[idx[1] * slice + j] * w[1]
                + src[idx[2] * slice + j] * w[2])
                / dt;
        }
    }
}

/// Applies `(x²∂x)^q (x∂y)^β ∂z^a ∂t^j`, innermost factor first.
/// Periodic directions are exact per mode; `x` uses five-point stencils
/// with shifted one-sided closures; `t` uses second-order differences.
pub fn phi_derivative(u: &Field, idx: &PhiMultiIndex) -> Result<Field> {
    let grid = u.grid.clone();
    let b = grid.modes.b;
    let f = grid.modes.f;
    if idx.beta.len() != b || idx.a.len() != f {
        return Err(PhiError::Domain(format!(
            "multi-index has {} base / {} fiber orders, grid needs {b} / {f}",
            idx.beta.len(),
            idx.a.len()
        )));
    }
    if idx.q > 0 && grid.n_x() < 5 {
        return Err(PhiError::Resolution(format!("{} x-nodes, need 5", grid.n_x())));
    }
    if idx.t_order > 0 && grid.n_t() < 5 {
        return Err(PhiError::Resolution(format!("{} t-nodes, need 5", grid.n_t())));
    }
    let mut out = u.materialize();
    if idx.order() == 0 {
        return Ok(out);
    }
    for _ in 0..idx.t_order {
        time_derivative(&mut out);
    }
    let n_x = grid.n_x();
    let n_modes = grid.n_modes();
    let n_b: usize = idx.beta.iter().sum();
    if n_b + idx.a.iter().sum::<usize>() > 0 {
        let factors: Vec<Complex64> = (0..n_modes)
            .map(|mi| {
                let m = grid.modes.index(mi);
                let mut c = Complex64::new(1.0, 0.0);
                for (d, &p) in idx.beta.iter().chain(&idx.a).enumerate() {
                    c *= Complex64::new(0.0, m[d] as f64).powu(p as u32);
                }
                c
            })
            .collect();
        let xp: Vec<f64> = grid.x_nodes.iter().map(|x| x.powi(n_b as i32)).collect();
        for (i, c) in out.data.iter_mut().enumerate() {
            let mi = (i / n_x) % n_modes;
            *c *= factors[mi] * xp[i % n_x];
        }
    }
    if idx.q > 0 {
        let st = DerivativeStencil::first_derivative(&grid.x_nodes);
        let x2: Vec<f64> = grid.x_nodes.iter().map(|x| x * x).collect();
        for _ in 0..idx.q {
            out.data.par_chunks_mut(n_x).for_each(|col| {
                let src = col.to_vec();
                st.apply(&src, col);
                for (c, w) in col.iter_mut().zip(&x2) {
                    *c *= *w;
                }
            });
        }
    }
    Ok(out)
}

/// Sampled `‖u‖_α = sup |u| + [u]_α`.
pub fn alpha_norm_estimate(u: &Field, alpha: f64, sampler: &PairSampler) -> Result<HolderEstimate> {
    if sampler.n_pairs == 0 {
        return Err(PhiError::Domain("empty pair sample".into()));
    }
    let set = SampleSet::new(&u.grid, sampler);
    Ok(set.estimate(&set.values(u), alpha))
}

/// Largest `|x^{-γ}u|` accepted before the weight is declared wrong.
pub const WEIGHT_BOUND: f64 = 1e8;

/// Per-term breakdown of a weighted norm.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedEstimate {
    pub total: HolderEstimate,
    pub terms: Vec<(PhiMultiIndex, HolderEstimate)>,
}

/// `x^{-γ}u`: same coefficients, weight lowered by `γ`.
pub fn strip_weight(u: &Field, gamma: f64) -> Field {
    Field {
        grid: u.grid.clone(),
        gamma: u.gamma - gamma,
        data: u.data.clone(),
    }
}

/// Weighted norm on a prepared sample, with the per-term breakdown.
pub fn weighted_holder_terms(u: &Field, spec: &WeightedSpaceSpec, set: &SampleSet) -> Result<WeightedEstimate> {
    if set.is_empty() {
        return Err(PhiError::Domain("empty pair sample".into()));
    }
    let v = strip_weight(u, spec.gamma);
    let b = u.grid.modes.b;
    let f = u.grid.modes.f;
    let mut terms = Vec::new();
    let mut total = HolderEstimate::zero(set.len());
    let mut best = -1.0;
    for idx in PhiMultiIndex::all_up_to(b, f, spec.k) {
        let w = phi_derivative(&v, &idx)?;
        let vals = set.values(&w);
        let est = set.estimate(&vals, spec.alpha);
        if idx.order() == 0 {
            let bad = vals.iter().any(|x| !x.is_finite());
            if bad || est.sup_norm > WEIGHT_BOUND {
                return Err(PhiError::WeightMismatch {
                    max: if bad { f64::INFINITY } else { est.sup_norm },
                    bound: WEIGHT_BOUND,
                });
            }
        }
        total.sup_norm += est.sup_norm;
        total.seminorm += est.seminorm;
        total.space_seminorm += est.space_seminorm;
        total.time_seminorm += est.time_seminorm;
        if est.seminorm > best {
            best = est.seminorm;
            total.max_pair = est.max_pair.clone();
        }
        terms.push((idx, est));
    }
    total.total = total.sup_norm + total.seminorm;
    Ok(WeightedEstimate { total, terms })
}

/// Sampled `‖u‖_{k,α,γ} = Σ_{order ≤ k} ‖V(x^{-γ}u)‖_α`.
pub fn weighted_holder_norm(u: &Field, spec: &WeightedSpaceSpec, sampler: &PairSampler) -> Result<HolderEstimate> {
    if sampler.n_pairs == 0 {
        return Err(PhiError::Domain("empty pair sample".into()));
    }
    let set = SampleSet::new(&u.grid, sampler);
    Ok(weighted_holder_terms(u, spec, &set)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, ModeSet};
    use std::sync::Arc;

    fn grid(n_x: usize, k: usize, n_t: usize) -> Arc<Grid> {
        Arc::new(Grid::new(0.05, 1.0, n_x, ModeSet::new(1, 1, k, k), 1.0, n_t).unwrap())
    }

    #[test]
    fn multi_index_enumeration() {
        let all = PhiMultiIndex::all_up_to(1, 1, 2);
        assert_eq!(all.len(), 11);
        assert_eq!(all[0], PhiMultiIndex::zero(1, 1));
        assert!(all.windows(2).all(|w| w[0].order() <= w[1].order()));
        assert_eq!(all.iter().filter(|m| m.t_order == 1).count(), 1);
        assert_eq!(PhiMultiIndex::all_up_to(2, 1, 0).len(), 1);
        assert_eq!(PhiMultiIndex::all_up_to(1, 0, 3).len(), 10 + 3);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(40, 2, 6);
        let c = Field::constant(g.clone(), 3.0);
        for idx in PhiMultiIndex::all_up_to(1, 1, 3).into_iter().skip(1) {
            let d = phi_derivative(&c, &idx).unwrap();
            assert!(d.max_coeff() < 1e-9, "{idx:?}");
        }
    }

    #[test]
    fn x_squared_dx_of_x_is_x_squared() {
        let g = grid(40, 1, 3);
        let u = Field::from_fn(g.clone(), 0.0, |x, _, _| x);
        let idx = PhiMultiIndex { q: 1, ..PhiMultiIndex::zero(1, 1) };
        let d = phi_derivative(&u, &idx).unwrap();
        for (ix, x) in g.x_nodes.iter().enumerate() {
            assert!((d.value(1, ix, &[0.4, 0.2]) - x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn x_dy_of_sin_y_matches_difference_quotient() {
        let g = grid(40, 2, 3);
        let u = Field::from_fn(g.clone(), 0.0, |_, a, _| a[0].sin());
        let idx = PhiMultiIndex { beta: vec![1], ..PhiMultiIndex::zero(1, 1) };
        let d = phi_derivative(&u, &idx).unwrap();
        let h = 1e-5;
        for ix in [0, 13, 39] {
            let x = g.x_nodes[ix];
            for y in [0.0, 1.3, 4.0] {
                let fd = x * (u.value(0, ix, &[y + h, 0.0]) - u.value(0, ix, &[y - h, 0.0])) / (2.0 * h);
                assert!((d.value(0, ix, &[y, 0.0]) - fd).abs() < 1e-6);
                assert!((d.value(0, ix, &[y, 0.0]) - x * y.cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_derivative_is_exact_on_quadratics() {
        let g = grid(32, 0, 9);
        let u = Field::from_fn(g.clone(), 0.0, |x, _, t| t * t + x);
        let idx = PhiMultiIndex { t_order: 1, ..PhiMultiIndex::zero(1, 1) };
        let d = phi_derivative(&u, &idx).unwrap();
        for (it, t) in g.t_nodes.iter().enumerate() {
            assert!((d.value(it, 3, &[0.0, 0.0]) - 2.0 * t).abs() < 1e-10);
        }
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let g = grid(32, 0, 3);
        let u = Field::constant(g, 1.0);
        let idx = PhiMultiIndex { t_order: 1, ..PhiMultiIndex::zero(1, 1) };
        assert!(matches!(phi_derivative(&u, &idx), Err(PhiError::Resolution(_))));
    }

    #[test]
    fn derivative_commutes_with_projection() {
        let g = grid(48, 3, 5);
        let u = Field::from_fn(g.clone(), 0.0, |x, a, t| x * x * ((2.0 * a[0]).cos() + (a[0] - a[1]).sin()) * (1.0 + t));
        let idx = PhiMultiIndex { beta: vec![1], a: vec![2], ..PhiMultiIndex::zero(1, 1) };
        let d = phi_derivative(&u, &idx).unwrap();
        // x∂y ∂z² of the above, analytically
        let exact = Field::from_fn(g.clone(), 0.0, |x, a, t| -x * x * x * (a[0] - a[1]).cos() * (1.0 + t));
        for (p, q) in d.data.iter().zip(&exact.data) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn sampler_is_deterministic_prefix_stable_and_distinct() {
        let g = grid(40, 2, 9);
        let a = PairSampler::new(200, 7).pairs(&g);
        let b = PairSampler::new(400, 7).pairs(&g);
        assert_eq!(a[..], b[..200]);
        assert!(b.iter().all(|p| p.first != p.second));
        assert_ne!(a, PairSampler::new(200, 8).pairs(&g));
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = grid(32, 1, 5);
        let e = alpha_norm_estimate(&Field::zeros(g, 0.0), 0.5, &PairSampler::new(100, 1)).unwrap();
        assert_eq!((e.sup_norm, e.seminorm, e.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_sample_is_rejected() {
        let g = grid(32, 1, 5);
        assert!(matches!(
            alpha_norm_estimate(&Field::zeros(g, 0.0), 0.5, &PairSampler::new(0, 1)),
            Err(PhiError::Domain(_))
        ));
    }

    #[test]
    fn mixed_quotient_is_dominated_by_split_quotients() {
        let g = grid(40, 2, 9);
        let u = Field::from_fn(g.clone(), 0.0, |x, a, t| (x * 9.0).sin() * a[0].cos() + t.sqrt() * a[1].sin());
        let e = alpha_norm_estimate(&u, 0.5, &PairSampler::new(2000, 3)).unwrap();
        assert!(e.seminorm <= e.space_seminorm + e.time_seminorm + 1e-12);
    }

    #[test]
    fn weighted_norm_of_pure_weight() {
        let g = grid(40, 1, 5);
        let u = Field::constant(g.clone(), 1.0).with_weight(0.7);
        let spec = WeightedSpaceSpec::new(0, 0.5, 0.7).unwrap();
        let e = weighted_holder_norm(&u, &spec, &PairSampler::new(500, 2)).unwrap();
        assert_eq!(e.sup_norm, 1.0);
        assert_eq!(e.seminorm, 0.0);
    }

    #[test]
    fn weight_mismatch_is_detected() {
        let g = Arc::new(Grid::new(1e-4, 1.0, 200, ModeSet::new(1, 1, 1, 1), 1.0, 3).unwrap());
        let u = Field::constant(g, 1.0);
        let spec = WeightedSpaceSpec::new(0, 0.5, 3.0).unwrap();
        assert!(matches!(
            weighted_holder_norm(&u, &spec, &PairSampler::new(4000, 2)),
            Err(PhiError::WeightMismatch { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(WeightedSpaceSpec::new(1, 1.0, 0.0).is_err());
        assert!(WeightedSpaceSpec::new(1, 0.0, 0.0).is_err());
        assert!(WeightedSpaceSpec::new(1, 0.3, 2.0).is_ok());
    }
}
