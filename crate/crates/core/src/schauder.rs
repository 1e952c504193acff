//! Empirical mapping properties of the Duhamel operator `H` between
//! weighted Hölder spaces: ensemble ratios, refinement trends and the
//! time-weighted variants.
//!
//! Test fields are defined analytically, so every grid level samples the
//! same functions. In `x` they are Faber–Schauder series in `log x`, in
//! the angles random trigonometric polynomials with algebraically decaying
//! weights, and in `t` hat series with half the spatial roughness.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::field::{Field, Grid, ModeSet};
use crate::geometry::PhiModel;
use crate::holder::{
    phi_derivative, strip_weight, weighted_holder_terms, PairSampler, PhiMultiIndex, SampleSet, WeightedSpaceSpec,
};
use crate::numerics::{fit_slope, log_space};
use crate::solver::{discretize, heat_convolve, HeatOperator, TimeScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_functions: usize,
    /// Hölder exponent of the generated fields, in `(0, 1)`.
    pub roughness: f64,
    pub seed: u64,
    pub gamma: f64,
    #[serde(default)]
    pub k: usize,
    pub alpha: f64,
    /// Dyadic levels of the hat series in `x`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Dyadic levels of the hat series in `t`.
    #[serde(default = "default_time_levels")]
    pub time_levels: usize,
    /// Separable terms per field.
    #[serde(default = "default_terms")]
    pub terms: usize,
}

fn default_levels() -> usize {
    5
}

fn default_time_levels() -> usize {
    4
}

fn default_terms() -> usize {
    2
}

impl EnsembleSpec {
    pub fn new(n_functions: usize, roughness: f64, alpha: f64, gamma: f64, seed: u64) -> Self {
        Self {
            n_functions,
            roughness,
            seed,
            gamma,
            k: 0,
            alpha,
            levels: default_levels(),
            time_levels: default_time_levels(),
            terms: default_terms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_functions < 20 {
            return Err(PhiError::Config(format!("ensemble needs at least 20 members, got {}", self.n_functions)));
        }
        if !(self.roughness > 0.0 && self.roughness < 1.0) {
            return Err(PhiError::Config(format!("roughness {} outside (0, 1)", self.roughness)));
        }
        WeightedSpaceSpec::new(self.k, self.alpha, self.gamma)?;
        Ok(())
    }

    pub fn in_spec(&self) -> WeightedSpaceSpec {
        WeightedSpaceSpec {
            k: self.k,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }
}

/// Schauder hat on `[0, 1]` at level `j`, position `i`.
fn hat(j: usize, i: usize, s: f64) -> f64 {
    let w = 0.5f64.powi(j as i32);
    let c = (i as f64 + 0.5) * w;
    (1.0 - (s - c).abs() * 2.0 / w).max(0.0)
}

#[derive(Debug, Clone)]
struct HatSeries {
    constant: f64,
    coeffs: Vec<Vec<f64>>,
    decay: f64,
}

impl HatSeries {
    fn random(rng: &mut ChaCha8Rng, levels: usize, exponent: f64) -> Self {
        let constant = rng.gen_range(-1.0..1.0);
        let coeffs = (0..levels)
            .map(|j| (0..1usize << j).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Self {
            constant,
            coeffs,
            decay: exponent,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let mut v = self.constant;
        for (j, level) in self.coeffs.iter().enumerate() {
            let n = level.len();
            // only the hat containing s is nonzero
            let i = ((s * n as f64) as usize).min(n - 1);
            v += 2f64.powf(-(j as f64) * self.decay) * level[i] * hat(j, i, s);
        }
        v
    }
}

/// One separable term `X(x) Θ(θ) T(t)`.
#[derive(Debug, Clone)]
struct Term {
    x: HatSeries,
    t: HatSeries,
    angular: Vec<Complex64>,
}

fn angular_coeffs(rng: &mut ChaCha8Rng, modes: &ModeSet, roughness: f64) -> Vec<Complex64> {
    let n = modes.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let zero = n / 2;
    c[zero] = Complex64::new(1.0 + rng.gen_range(-0.5..0.5), 0.0);
    for i in zero + 1..n {
        let w = (1.0 + modes.k_sq(i) + modes.l_sq(i)).powf(-(1.0 + roughness) / 2.0);
        let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (0.5 * w);
        c[i] = v;
        c[modes.negated(i)] = v.conj();
    }
    c
}

/// Seeded ensemble of rough fields scaled to unit sampled `(k, α, γ)`
/// norm, carried with weight `γ` over identical coefficients for every
/// `γ`. Members are drawn in order, so ensembles are prefix-stable.
pub fn generate_ensemble(spec: &EnsembleSpec, grid: &Arc<Grid>, sampler: &PairSampler) -> Result<Vec<Field>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (x_min, x_max) = (grid.x_nodes[0], *grid.x_nodes.last().unwrap());
    let t_end = grid.t_end();
    let span = (x_max / x_min).ln();
    let members: Vec<Vec<Term>> = (0..spec.n_functions)
        .map(|_| {
            (0..spec.terms)
                .map(|_| Term {
                    x: HatSeries::random(&mut rng, spec.levels, spec.roughness),
                    t: HatSeries::random(&mut rng, spec.time_levels, 0.5 * spec.roughness),
                    angular: angular_coeffs(&mut rng, &grid.modes, spec.roughness),
                })
                .collect()
        })
        .collect();
    let set = SampleSet::new(grid, sampler);
    let in_spec = spec.in_spec();
    members
        .par_iter()
        .map(|terms| {
            let raw = Field::from_modes(grid.clone(), spec.gamma, |x, mode, t| {
                let mi = grid.modes.position(mode).unwrap_or(0);
                let s = (x / x_min).ln() / span;
                terms
                    .iter()
                    .map(|term| term.angular[mi] * (term.x.eval(s) * (1.0 + 0.5 * term.t.eval(t / t_end))))
                    .sum()
            });
            let norm = weighted_holder_terms(&raw, &in_spec, &set)?.total.total;
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(PhiError::Numerical("ensemble member has degenerate norm".into()));
            }
            Ok(raw.scale(1.0 / norm))
        })
        .collect()
}

/// Grid and scheme for mapping experiments on one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub t_end: f64,
    pub n_t: usize,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            x_min: 0.05,
            x_max: 1.0,
            n_x: 64,
            k_max: 2,
            l_max: 2,
            t_end: 0.25,
            n_t: 33,
        }
    }
}

impl BenchGrid {
    /// Halves the x-steps in `log x` and the time step; nodes nest.
    pub fn refined(&self) -> Self {
        Self {
            n_x: 2 * self.n_x - 1,
            n_t: 2 * self.n_t - 1,
            ..self.clone()
        }
    }

    /// Backward Euler is used: it damps the stiff modes that rough data
    /// excite, which Crank–Nicolson leaves oscillating.
    pub fn build(&self, model: &PhiModel) -> Result<HeatOperator> {
        let modes = ModeSet::new(model.b, model.f, self.k_max, self.l_max);
        let grid = Arc::new(Grid::new(self.x_min, self.x_max, self.n_x, modes, self.t_end, self.n_t)?);
        let model = model.clone().with_collar(self.x_min, self.x_max);
        discretize(&model, grid, TimeScheme::BackwardEuler)
    }
}

/// Output quotients relative to the input norm, mirroring the split of the
/// mixed α-quotient into its space and time parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitQuotients {
    pub sup: f64,
    pub mixed: f64,
    pub space: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeVariant {
    /// `t^{-1/2} ‖Hu‖_{k+1,α,γ}` on `[0, t]`.
    SqrtTKPlus1,
    /// Log–log slope of the spatial `C²` norm of `Hu` on `[0, t]`.
    TalphaHalfC2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub n_x: usize,
    pub n_t: usize,
    pub n_modes: usize,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl GridMeta {
    pub fn of(grid: &Grid) -> Self {
        Self {
            n_x: grid.n_x(),
            n_t: grid.n_t(),
            n_modes: grid.n_modes(),
            dt: grid.dt(),
            x_min: grid.x_nodes[0],
            x_max: *grid.x_nodes.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingReport {
    /// One ratio per retained member, in ensemble order.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub split: Vec<SplitQuotients>,
    /// Members dropped because their input norm vanished.
    pub excluded: Vec<usize>,
    pub notes: Vec<String>,
    /// `max_ratio` at the coarse and refined grid, when a study was run.
    pub refinement_trend: Option<(f64, f64)>,
    pub t_ladder: Vec<f64>,
    /// Ensemble-worst ladder values.
    pub t_values: Vec<f64>,
    pub t_scaling_slope: Option<f64>,
    /// Per-member slopes for the `TalphaHalfC2` variant.
    pub member_slopes: Vec<f64>,
    pub grid: GridMeta,
}

impl MappingReport {
    fn new(grid: &Grid) -> Self {
        Self {
            ratios: Vec::new(),
            max_ratio: 0.0,
            split: Vec::new(),
            excluded: Vec::new(),
            notes: Vec::new(),
            refinement_trend: None,
            t_ladder: Vec::new(),
            t_values: Vec::new(),
            t_scaling_slope: None,
            member_slopes: Vec::new(),
            grid: GridMeta::of(grid),
        }
    }

    /// Growth of `max_ratio` from coarse to fine.
    pub fn refinement_growth(&self) -> Option<f64> {
        self.refinement_trend.map(|(c, f)| f / c)
    }
}

fn input_norm(u: &Field, spec: &WeightedSpaceSpec, set: &SampleSet) -> Result<f64> {
    Ok(weighted_holder_terms(u, spec, set)?.total.total)
}

fn ratio_of(out: &crate::holder::HolderEstimate, norm_in: f64) -> (f64, SplitQuotients) {
    (
        out.total / norm_in,
        SplitQuotients {
            sup: out.sup_norm / norm_in,
            mixed: out.seminorm / norm_in,
            space: out.space_seminorm / norm_in,
            time: out.time_seminorm / norm_in,
        },
    )
}

fn assemble(grid: &Grid, results: Vec<Result<Option<(f64, SplitQuotients)>>>) -> Result<MappingReport> {
    let mut report = MappingReport::new(grid);
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Some((ratio, split)) => {
                report.ratios.push(ratio);
                report.split.push(split);
                report.max_ratio = report.max_ratio.max(ratio);
            }
            None => {
                report.excluded.push(i);
                report.notes.push(format!("member {i} has zero input norm; ratio undefined, excluded"));
            }
        }
    }
    Ok(report)
}

/// Ratios `‖Hu‖_{k+2,α,γ} / ‖u‖_{k,α,γ}` over the ensemble.
pub fn mapping_bound_check(
    op: &HeatOperator,
    ensemble: &[Field],
    in_spec: &WeightedSpaceSpec,
    sampler: &PairSampler,
) -> Result<MappingReport> {
    let out_spec = WeightedSpaceSpec::new(in_spec.k + 2, in_spec.alpha, in_spec.gamma)?;
    let set = SampleSet::new(&op.grid, sampler);
    let results = ensemble
        .par_iter()
        .map(|u| {
            let n_in = input_norm(u, in_spec, &set)?;
            if n_in == 0.0 {
                return Ok(None);
            }
            let hu = heat_convolve(op, u, 0.0)?;
            let out = weighted_holder_terms(&hu, &out_spec, &set)?.total;
            Ok(Some(ratio_of(&out, n_in)))
        })
        .collect();
    assemble(&op.grid, results)
}

/// The same ratios computed through the conjugated operator
/// `H_γ = x^{-γ} H x^γ` on already stripped fields and unweighted norms.
pub fn conjugated_ratios(
    op: &HeatOperator,
    stripped: &[Field],
    in_spec: &WeightedSpaceSpec,
    sampler: &PairSampler,
) -> Result<MappingReport> {
    let flat_in = WeightedSpaceSpec::new(in_spec.k, in_spec.alpha, 0.0)?;
    let flat_out = WeightedSpaceSpec::new(in_spec.k + 2, in_spec.alpha, 0.0)?;
    let set = SampleSet::new(&op.grid, sampler);
    let results = stripped
        .par_iter()
        .map(|v| {
            let n_in = input_norm(v, &flat_in, &set)?;
            if n_in == 0.0 {
                return Ok(None);
            }
            let hv = heat_convolve(op, v, in_spec.gamma)?;
            let out = weighted_holder_terms(&hv, &flat_out, &set)?.total;
            Ok(Some(ratio_of(&out, n_in)))
        })
        .collect();
    assemble(&op.grid, results)
}

/// Strips every member's weight.
pub fn strip_all(ensemble: &[Field], gamma: f64) -> Vec<Field> {
    ensemble.iter().map(|u| strip_weight(u, gamma)).collect()
}

/// Runs [`mapping_bound_check`] on two grid levels with the same ensemble
/// spec and records the trend in the fine report.
pub fn refinement_study(
    model: &PhiModel,
    coarse: &BenchGrid,
    spec: &EnsembleSpec,
    sampler: &PairSampler,
) -> Result<(MappingReport, MappingReport)> {
    let mut out = Vec::new();
    for g in [coarse.clone(), coarse.refined()] {
        let op = g.build(model)?;
        let ens = generate_ensemble(spec, &op.grid, sampler)?;
        out.push(mapping_bound_check(&op, &ens, &spec.in_spec(), sampler)?);
    }
    let mut fine = out.pop().unwrap();
    let coarse_report = out.pop().unwrap();
    fine.refinement_trend = Some((coarse_report.max_ratio, fine.max_ratio));
    Ok((coarse_report, fine))
}

/// Field restricted to the time slices `0..=it`.
fn restrict(u: &Field, it: usize) -> Field {
    let grid = Arc::new(u.grid.with_times(u.grid.t_nodes[it], it + 1));
    Field {
        grid,
        gamma: u.gamma,
        data: u.data[..(it + 1) * u.slice_len()].to_vec(),
    }
}

/// Per-slice sup of `|u|` over x-nodes and an angular lattice.
fn slice_sups(u: &Field, per_dim: usize) -> Vec<f64> {
    let g = &u.grid;
    let dims = g.modes.dims();
    let total = per_dim.pow(dims as u32);
    let phases: Vec<Vec<Complex64>> = (0..total)
        .map(|idx| {
            let mut rem = idx;
            let a: Vec<f64> = (0..dims)
                .map(|_| {
                    let v = TAU * (rem % per_dim) as f64 / per_dim as f64;
                    rem /= per_dim;
                    v
                })
                .collect();
            g.mode_phases(&a)
        })
        .collect();
    (0..g.n_t())
        .into_par_iter()
        .map(|it| {
            let mut worst: f64 = 0.0;
            for ph in &phases {
                for ix in 0..g.n_x() {
                    worst = worst.max(u.value_with_phases(it, ix, ph).abs());
                }
            }
            worst
        })
        .collect()
}

/// The ladder of 8 log-spaced times in `[10 δt, T]`.
pub fn t_ladder(grid: &Grid) -> Vec<f64> {
    log_space(10.0 * grid.dt(), grid.t_end(), 8)
}

fn ladder_index(grid: &Grid, t: f64) -> usize {
    ((t / grid.dt()).round() as usize).min(grid.n_t() - 1)
}

/// Time-weighted mapping checks.
pub fn time_weight_check(
    op: &HeatOperator,
    ensemble: &[Field],
    in_spec: &WeightedSpaceSpec,
    variant: TimeVariant,
    sampler: &PairSampler,
) -> Result<MappingReport> {
    let grid = op.grid.clone();
    if grid.n_t() < 12 {
        return Err(PhiError::Resolution("time ladder needs at least 12 time nodes".into()));
    }
    let set = SampleSet::new(&grid, sampler);
    let ladder = t_ladder(&grid);
    let idx: Vec<usize> = ladder.iter().map(|t| ladder_index(&grid, *t)).collect();
    let times: Vec<f64> = idx.iter().map(|i| grid.t_nodes[*i]).collect();
    let b = grid.modes.b;
    let f = grid.modes.f;
    let per_dim = 2 * grid.modes.k_max.max(grid.modes.l_max) + 2;
    let curves: Vec<Result<Option<Vec<f64>>>> = ensemble
        .par_iter()
        .map(|u| {
            let n_in = input_norm(u, in_spec, &set)?;
            if n_in == 0.0 {
                return Ok(None);
            }
            let hu = heat_convolve(op, u, 0.0)?;
            let curve = match variant {
                TimeVariant::SqrtTKPlus1 => {
                    let out_spec = WeightedSpaceSpec::new(in_spec.k + 1, in_spec.alpha, in_spec.gamma)?;
                    idx.iter()
                        .zip(&times)
                        .map(|(&it, &t)| {
                            let r = restrict(&hu, it);
                            let s = SampleSet::new(&r.grid, sampler);
                            let n = weighted_holder_terms(&r, &out_spec, &s)?.total.total;
                            Ok(n / (t.sqrt() * n_in))
                        })
                        .collect::<Result<Vec<f64>>>()?
                }
                TimeVariant::TalphaHalfC2 => {
                    let v = strip_weight(&hu, in_spec.gamma);
                    let mut acc = vec![0.0; grid.n_t()];
                    for m in PhiMultiIndex::all_up_to(b, f, 2).iter().filter(|m| m.t_order == 0) {
                        let d = phi_derivative(&v, m)?;
                        let mut run: f64 = 0.0;
                        for (a, s) in acc.iter_mut().zip(slice_sups(&d, per_dim)) {
                            run = run.max(s);
                            *a += run;
                        }
                    }
                    idx.iter().map(|&it| acc[it] / n_in).collect()
                }
            };
            Ok(Some(curve))
        })
        .collect();
    let mut report = MappingReport::new(&grid);
    report.t_ladder = times.clone();
    report.t_values = vec![0.0; times.len()];
    let logt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    for (i, c) in curves.into_iter().enumerate() {
        let Some(curve) = c? else {
            report.excluded.push(i);
            report.notes.push(format!("member {i} has zero input norm; ratio undefined, excluded"));
            continue;
        };
        let peak = curve.iter().copied().fold(0.0, f64::max);
        report.ratios.push(peak);
        report.max_ratio = report.max_ratio.max(peak);
        for (a, v) in report.t_values.iter_mut().zip(&curve) {
            *a = a.max(*v);
        }
        if variant == TimeVariant::TalphaHalfC2 && curve.iter().all(|v| *v > 0.0) {
            let logv: Vec<f64> = curve.iter().map(|v| v.ln()).collect();
            report.member_slopes.push(fit_slope(&logt, &logv));
        }
    }
    if variant == TimeVariant::TalphaHalfC2 && report.t_values.iter().all(|v| *v > 0.0) {
        let logv: Vec<f64> = report.t_values.iter().map(|v| v.ln()).collect();
        report.t_scaling_slope = Some(fit_slope(&logt, &logv));
    }
    Ok(report)
}

/// `u ≡ 1` carried with weight `γ`.
pub fn constant_member(grid: &Arc<Grid>, gamma: f64) -> Field {
    Field::constant(grid.clone(), 1.0).with_weight(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchGrid {
        BenchGrid {
            n_x: 40,
            n_t: 17,
            k_max: 1,
            l_max: 1,
            ..BenchGrid::default()
        }
    }

    fn sampler() -> PairSampler {
        PairSampler::new(600, 3)
    }

    #[test]
    fn hats_partition_levels() {
        for j in 0..4 {
            let n = 1 << j;
            for i in 0..n {
                let c = (i as f64 + 0.5) / n as f64;
                assert!((hat(j, i, c) - 1.0).abs() < 1e-15);
                assert_eq!(hat(j, i, i as f64 / n as f64), 0.0);
            }
        }
    }

    #[test]
    fn ensemble_is_deterministic_unit_norm_and_weight_is_a_factor() {
        let op = small().build(&PhiModel::exact_product(1, 1)).unwrap();
        let s0 = EnsembleSpec::new(20, 0.5, 0.5, 0.0, 11);
        let a = generate_ensemble(&s0, &op.grid, &sampler()).unwrap();
        let b = generate_ensemble(&s0, &op.grid, &sampler()).unwrap();
        assert_eq!(a, b);
        let s1 = EnsembleSpec { gamma: 1.0, ..s0.clone() };
        let c = generate_ensemble(&s1, &op.grid, &sampler()).unwrap();
        for (u, v) in a.iter().zip(&c) {
            assert_eq!(u.data, v.data);
            assert_eq!(v.gamma, 1.0);
            assert!(u.hermitian_defect() < 1e-12);
        }
        let set = SampleSet::new(&op.grid, &sampler());
        let n = weighted_holder_terms(&c[3], &s1.in_spec(), &set).unwrap().total.total;
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_spec_validation() {
        assert!(EnsembleSpec::new(5, 0.5, 0.5, 0.0, 1).validate().is_err());
        assert!(EnsembleSpec::new(20, 1.0, 0.5, 0.0, 1).validate().is_err());
    }

    #[test]
    fn zero_member_is_excluded() {
        let op = small().build(&PhiModel::exact_product(1, 1)).unwrap();
        let z = Field::zeros(op.grid.clone(), 0.0);
        let one = constant_member(&op.grid, 0.0);
        let spec = WeightedSpaceSpec::new(0, 0.5, 0.0).unwrap();
        let r = mapping_bound_check(&op, &[z, one], &spec, &sampler()).unwrap();
        assert_eq!(r.excluded, vec![0]);
        assert_eq!(r.ratios.len(), 1);
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
    }

    #[test]
    fn constant_input_gives_t() {
        let op = small().build(&PhiModel::exact_product(1, 1)).unwrap();
        let one = constant_member(&op.grid, 0.0);
        let hu = heat_convolve(&op, &one, 0.0).unwrap();
        let zero = op.grid.n_modes() / 2;
        for (it, t) in op.grid.t_nodes.iter().enumerate() {
            for ix in 0..op.grid.n_x() {
                assert!((hu.at(it, zero, ix).re - t).abs() < 1e-12);
            }
        }
        let spec = WeightedSpaceSpec::new(0, 0.5, 0.0).unwrap();
        let r = time_weight_check(&op, &[one], &spec, TimeVariant::SqrtTKPlus1, &sampler()).unwrap();
        assert!(r.t_values.iter().all(|v| v.is_finite() && *v <= 2.0));
    }

    #[test]
    fn conjugated_path_is_bitwise_equal() {
        let op = small().build(&PhiModel::exact_product(1, 1)).unwrap();
        let s1 = EnsembleSpec::new(20, 0.5, 0.5, 1.0, 5);
        let ens = generate_ensemble(&s1, &op.grid, &sampler()).unwrap();
        let ens = &ens[..4];
        let direct = mapping_bound_check(&op, ens, &s1.in_spec(), &sampler()).unwrap();
        let conj = conjugated_ratios(&op, &strip_all(ens, 1.0), &s1.in_spec(), &sampler()).unwrap();
        assert_eq!(direct.ratios, conj.ratios);
        for s in &direct.split {
            assert!(s.mixed <= s.space + s.time + 1e-12);
        }
    }

    #[test]
    fn max_ratio_is_monotone_in_members() {
        let op = small().build(&PhiModel::exact_product(1, 1)).unwrap();
        let s = EnsembleSpec::new(20, 0.5, 0.5, 0.0, 8);
        let ens = generate_ensemble(&s, &op.grid, &sampler()).unwrap();
        let mut last = 0.0;
        for n in [2, 4, 6] {
            let r = mapping_bound_check(&op, &ens[..n], &s.in_spec(), &sampler()).unwrap();
            assert!(r.max_ratio >= last);
            last = r.max_ratio;
        }
    }
}
