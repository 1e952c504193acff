//! Subcommand drivers. Each one writes its artifacts into the output
//! directory and returns the lines of `summary.txt`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use phi_heat::field::{Grid, ModeSet, Profile};
use phi_heat::geometry::{
    grigoryan_test, laplacian_coeffs, metric_eval, phi_distance, phi_distance_classical, volume_factor, ModelKind,
    PhiModel, Point,
};
use phi_heat::heatspace::{classify_regime, hk_asymptotic_model, lift, sample_triple, volume_lift};
use phi_heat::holder::{weighted_holder_terms, PairSampler, SampleSet, WeightedSpaceSpec};
use phi_heat::io::{write_binary, write_trajectory_csv};
use phi_heat::numerics::log_space;
use phi_heat::picard::{
    choose_constants, estimate_c_eta, manufactured_baseline, picard_grid, picard_solve, smooth_forcing,
    verify_solution, CatalogRhs, PicardConfig, SemilinearRhs,
};
use phi_heat::schauder::{
    generate_ensemble, mapping_bound_check, refinement_study, time_weight_check, BenchGrid, EnsembleSpec, GridMeta,
    MappingReport, TimeVariant,
};
use phi_heat::solver::{discretize, evolve, heat_convolve, mass_conservation_check, HeatOperator};

use crate::config::{BenchVariant, GridConfig, HeatConfig, RhsChoice, RunConfig, Subcommand};
use crate::error::CliError;

/// Lines for `summary.txt` plus whether the run counts as a numerical failure.
pub struct Outcome {
    pub lines: Vec<String>,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(lines: Vec<String>) -> Self {
        Self { lines, failure: None }
    }
}

pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    match cfg.subcommand {
        Subcommand::GeometryReport => geometry_report(cfg, out),
        Subcommand::StochasticCheck => stochastic_check(cfg, out),
        Subcommand::HeatSolve => heat_solve(cfg, out),
        Subcommand::SchauderBench => schauder_bench(cfg, out),
        Subcommand::PicardSolve => picard(cfg, out),
        Subcommand::HeatspaceSample => heatspace_sample(cfg, out),
    }
}

fn csv_writer(out: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(out.join(name))?)))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(out.join(name))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.expect("seed presence is checked during validation")
}

fn build_operator(model: &PhiModel, g: &GridConfig) -> Result<HeatOperator, CliError> {
    let modes = ModeSet::new(model.b, model.f, g.k_max, g.l_max);
    let grid = Arc::new(Grid::new(model.x_min, model.x_max, g.n_x, modes, g.t_end, g.n_t)?);
    Ok(discretize(model, grid, g.scheme)?)
}

/// Gaussian bump in `x` times `cos(k·θ)`.
fn bump(op: &HeatOperator, h: &HeatConfig) -> Result<Profile, CliError> {
    if op.grid.modes.position(&h.mode).is_none() {
        return Err(CliError::Validation(format!(
            "`heat.mode` = {:?} lies outside the grid's mode box (raise grid.k_max / grid.l_max)",
            h.mode
        )));
    }
    let (c, w, k) = (h.center, h.width, h.mode.clone());
    Ok(Profile::from_fn(op.grid.clone(), 0.0, move |x, a| {
        let phase: f64 = k.iter().zip(a).map(|(k, a)| *k as f64 * a).sum();
        (-0.5 * ((x - c) / w).powi(2)).exp() * phase.cos()
    }))
}

fn geometry_report(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let model = &cfg.model;
    let n = cfg.geometry.as_ref().unwrap().n_points;
    let xs = log_space(model.x_min, model.x_max, n);
    let origin = |x: f64| Point::new(x, vec![0.0; model.b], vec![0.0; model.f]);
    let mut w = csv_writer(out, "geometry.csv")?;
    w.write_record(["x", "quantity", "value"])?;
    let mut min_det = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let p = origin(x);
        let g = metric_eval(model, &p)?;
        let lap = laplacian_coeffs(model, &p)?;
        min_det = min_det.min(g.sqrt_det);
        let mut rows = vec![
            ("sqrt_det".to_string(), g.sqrt_det),
            ("volume_factor".to_string(), volume_factor(model, x, &p.angles())?),
        ];
        for d in 0..model.m() {
            rows.push((format!("g_{d}{d}"), g.g[(d, d)]));
        }
        for d in 0..model.m() {
            rows.push((format!("lap_a_{d}{d}"), lap.a[(d, d)]));
            rows.push((format!("lap_b_{d}"), lap.b[d]));
        }
        if let Some(&x2) = xs.get(i + 1) {
            let q = origin(x2);
            rows.push(("phi_distance_next".into(), phi_distance(&p, &q)));
            rows.push(("classical_distance_next".into(), phi_distance_classical(&p, &q)));
        }
        for (name, v) in rows {
            w.write_record([x.to_string(), name, v.to_string()])?;
        }
    }
    w.flush()?;
    let mut lines = vec![
        format!("model={:?}, m={}, b={}, f={}", model.kind, model.m(), model.b, model.f),
        format!("points={n}, min sqrt_det={min_det:.6e}"),
    ];
    if model.kind == ModelKind::PerturbedProduct {
        lines.push(format!("perturbation decay ratio={:.4}", model.perturbation_decay_ratio(64)));
    }
    Ok(Outcome::ok(lines))
}

fn stochastic_check(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let st = cfg.stochastic.as_ref().unwrap();
    let rep = grigoryan_test(&cfg.model, st.r_max, st.n_samples)?;
    let mut w = csv_writer(out, "volume_growth.csv")?;
    w.write_record(["radius", "log_volume", "partial_integral"])?;
    for ((r, v), p) in rep.radii.iter().zip(&rep.log_volumes).zip(&rep.partial_integrals) {
        w.serialize((r, v, p))?;
    }
    w.flush()?;
    let mut lines = vec![
        format!("growth_exponent≈{:.1}, verdict={:?}", rep.growth_exponent, rep.verdict),
        format!("growth_exponent={:.6}", rep.growth_exponent),
    ];
    let mut drift = None;
    if st.mass_check {
        let op = build_operator(&cfg.model, cfg.grid.as_ref().unwrap())?;
        let u0 = bump(&op, cfg.heat.as_ref().unwrap())?;
        let d = mass_conservation_check(&op, &u0, op.grid.t_end())?;
        lines.push(format!("mass_drift={d:.3e} up to t={}", op.grid.t_end()));
        drift = Some(d);
    }
    write_json(
        out,
        "result.json",
        &json!({
            "verdict": rep.verdict,
            "growth_exponent": rep.growth_exponent,
            "mass_drift": drift,
        }),
    )?;
    Ok(Outcome::ok(lines))
}

fn heat_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let heat = cfg.heat.as_ref().unwrap();
    let op = build_operator(&cfg.model, cfg.grid.as_ref().unwrap())?;
    let u0 = bump(&op, heat)?;
    let traj = evolve(&op, &u0)?;
    if !traj.is_finite() {
        return Err(CliError::Numerical("trajectory contains non-finite values".into()));
    }
    let weights = op.nodal_quadrature();
    let mut w = csv_writer(out, "mass.csv")?;
    w.write_record(["t", "mass"])?;
    let m0 = op.integral(&traj.slice(0), &weights);
    let mut drift: f64 = 0.0;
    for (it, t) in op.grid.t_nodes.iter().enumerate() {
        let m = op.integral(&traj.slice(it), &weights);
        if m0 != 0.0 {
            drift = drift.max(((m - m0) / m0).abs());
        }
        w.serialize((t, m))?;
    }
    w.flush()?;
    let mut csv_out = BufWriter::new(File::create(out.join("trajectory.csv"))?);
    write_trajectory_csv(&traj, &mut csv_out)?;
    csv_out.flush()?;
    if heat.binary {
        let mut bin = BufWriter::new(File::create(out.join("trajectory.bin"))?);
        write_binary(&traj, &mut bin)?;
        bin.flush()?;
    }
    let last = op.grid.n_t() - 1;
    let sup_end = traj
        .slice_data(last)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    Ok(Outcome::ok(vec![
        format!("t_end={}, n_x={}, modes={}, steps={}", op.grid.t_end(), op.n_x(), op.grid.n_modes(), last),
        format!("max coefficient at t_end={sup_end:.6e}"),
        if heat.mode.iter().all(|k| *k == 0) {
            format!("mass_drift={drift:.3e}")
        } else {
            "mass_drift=n/a (data in a non-zero mode carries no mass)".to_string()
        },
    ]))
}

fn bench_grid(cfg: &RunConfig) -> BenchGrid {
    let g = cfg.grid.as_ref().unwrap();
    BenchGrid {
        x_min: cfg.model.x_min,
        x_max: cfg.model.x_max,
        n_x: g.n_x,
        k_max: g.k_max,
        l_max: g.l_max,
        t_end: g.t_end,
        n_t: g.n_t,
    }
}

fn write_ratios(out: &Path, name: &str, rep: &MappingReport) -> Result<(), CliError> {
    let mut w = csv_writer(out, name)?;
    w.write_record(["member", "ratio", "sup", "mixed", "space", "time"])?;
    for (i, (r, s)) in rep.ratios.iter().zip(&rep.split).enumerate() {
        w.serialize((i, r, s.sup, s.mixed, s.space, s.time))?;
    }
    w.flush()?;
    Ok(())
}

fn schauder_bench(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let e = cfg.ensemble.as_ref().unwrap();
    let s = cfg.schauder.as_ref().unwrap();
    let sampler = PairSampler::new(s.n_pairs, seed(cfg));
    let mut spec = EnsembleSpec::new(e.n_functions, e.roughness, e.alpha, e.gamma, seed(cfg));
    spec.k = e.k;
    let bench = bench_grid(cfg);
    let mut lines = Vec::new();
    let report = match s.variant {
        BenchVariant::Mapping if s.refine => {
            let (coarse, fine) = refinement_study(&cfg.model, &bench, &spec, &sampler)?;
            write_ratios(out, "ratios_coarse.csv", &coarse)?;
            lines.push(format!("coarse max ratio={:.6}", coarse.max_ratio));
            if let Some(g) = fine.refinement_growth() {
                lines.push(format!("refinement growth=x{g:.4}"));
            }
            fine
        }
        variant => {
            let op = bench.build(&cfg.model)?;
            let ens = generate_ensemble(&spec, &op.grid, &sampler)?;
            match variant {
                BenchVariant::Mapping => mapping_bound_check(&op, &ens, &spec.in_spec(), &sampler)?,
                BenchVariant::SqrtTKPlus1 => {
                    time_weight_check(&op, &ens, &spec.in_spec(), TimeVariant::SqrtTKPlus1, &sampler)?
                }
                BenchVariant::TalphaHalfC2 => {
                    time_weight_check(&op, &ens, &spec.in_spec(), TimeVariant::TalphaHalfC2, &sampler)?
                }
            }
        }
    };
    if !report.max_ratio.is_finite() && !report.ratios.is_empty() {
        return Err(CliError::Numerical("non-finite mapping ratio".into()));
    }
    write_ratios(out, "ratios.csv", &report)?;
    write_json(out, "report.json", &report)?;
    lines.insert(
        0,
        format!(
            "variant={:?}, members={}, excluded={}, max ratio={:.6}",
            s.variant,
            report.ratios.len(),
            report.excluded.len(),
            report.max_ratio
        ),
    );
    if let Some(slope) = report.t_scaling_slope {
        lines.push(format!("t scaling slope={slope:.4}"));
    }
    lines.extend(report.notes.iter().cloned());
    Ok(Outcome::ok(lines))
}

fn picard(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let model = &cfg.model;
    let p = cfg.picard.as_ref().unwrap();
    let r = cfg.rhs.as_ref().unwrap();
    let seed = seed(cfg);
    let sampler = PairSampler::new(p.n_pairs, seed);
    let space = WeightedSpaceSpec::new(0, p.alpha, 0.0)?;
    let opnorm = match p.opnorm {
        Some(v) => v,
        None => {
            let bench = BenchGrid {
                x_min: model.x_min,
                x_max: model.x_max,
                n_x: p.n_x,
                k_max: p.band.max(1),
                l_max: p.band,
                ..BenchGrid::default()
            };
            let op = bench.build(model)?;
            let spec = EnsembleSpec::new(p.opnorm_members, p.alpha, p.alpha, 0.0, seed);
            let ens = generate_ensemble(&spec, &op.grid, &sampler)?;
            mapping_bound_check(&op, &ens, &spec.in_spec(), &sampler)?.max_ratio
        }
    };
    let make_rhs = |grid: &Arc<Grid>, amplitude: f64| match r.kind {
        RhsChoice::Affine => CatalogRhs::affine(smooth_forcing(grid, amplitude), r.c),
        RhsChoice::Quadratic => CatalogRhs::quadratic(r.q),
        RhsChoice::Combined => CatalogRhs::combined(smooth_forcing(grid, amplitude), r.c, r.q),
    };
    let coarse_nt = p.n_t.min(33);
    let (eta, t_prime, c_eta) = match p.c_eta {
        Some(c) => {
            let (eta, t) = choose_constants(opnorm, c)?;
            (eta, t, c)
        }
        None => {
            // sampled in the unit ball, then once more in the ball it implies
            let (mut eta, mut t, mut c) = (1.0, 0.25, 0.0);
            for _ in 0..2 {
                let grid = picard_grid(model.b, model.f, model.x_min, model.x_max, p.n_x, p.band, t, coarse_nt)?;
                let rhs = make_rhs(&grid, 1.0);
                c = estimate_c_eta(&grid, &rhs, &space, eta, p.c_eta_pairs, seed, &sampler, p.safety)?;
                (eta, t) = choose_constants(opnorm, c)?;
            }
            (eta, t, c)
        }
    };
    let grid = picard_grid(model.b, model.f, model.x_min, model.x_max, p.n_x, p.band, t_prime, p.n_t)?;
    let op = discretize(model, grid.clone(), phi_heat::solver::TimeScheme::CrankNicolson)?;
    let set = SampleSet::new(&grid, &sampler);
    let top = WeightedSpaceSpec::new(2, p.alpha, 0.0)?;
    let unit = heat_convolve(&op, &smooth_forcing(&grid, 1.0), 0.0)?;
    let unit_norm = weighted_holder_terms(&unit, &top, &set)?.total.total;
    let rhs = make_rhs(&grid, r.forcing_fraction * eta / unit_norm);
    let pc = PicardConfig {
        eta,
        t_prime,
        tol: p.tol,
        max_iter: p.max_iter,
        opnorm,
        c_eta,
        space,
        sampler: sampler.clone(),
    };
    let constants = json!({ "opnorm": opnorm, "c_eta": c_eta, "eta": eta, "t_prime": t_prime });
    let rep = match picard_solve(&op, &rhs, &pc, None) {
        Ok(rep) => rep,
        Err(e) => {
            write_json(out, "history.json", &json!({ "rhs": rhs.id(), "constants": constants, "error": e.to_string() }))?;
            return Err(e.into());
        }
    };
    let strong = verify_solution(&rep.solution, &rhs, &op)?;
    let baseline = manufactured_baseline(&op, rep.solution.sup_on_lattice(6))?;
    let mut w = csv_writer(out, "history.csv")?;
    w.write_record(["iteration", "norm", "increment", "factor"])?;
    for (i, norm) in rep.history.iter().enumerate() {
        let inc = rep.increments.get(i).copied();
        let fac = i.checked_sub(1).and_then(|j| rep.contraction_factors.get(j)).copied();
        w.serialize((i + 1, norm, inc, fac))?;
    }
    w.flush()?;
    write_json(
        out,
        "history.json",
        &json!({
            "rhs": rhs.id(),
            "constants": constants,
            "grid": GridMeta::of(&grid),
            "seed": seed,
            "history": rep.history,
            "increments": rep.increments,
            "contraction_factors": rep.contraction_factors,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "strong_residual": strong.strong_residual,
            "residual_baseline": baseline,
            "initial_norm": strong.initial_norm,
        }),
    )?;
    let mut bin = BufWriter::new(File::create(out.join("solution.bin"))?);
    write_binary(&rep.solution, &mut bin)?;
    bin.flush()?;
    let lines = vec![
        format!("rhs={}, opnorm={opnorm:.4}, c_eta={c_eta:.4}, eta={eta:.4}, t_prime={t_prime:.4}", rhs.id()),
        format!(
            "iterations={}, converged={}, last factor={:.4}",
            rep.iterations,
            rep.converged,
            rep.last_factor().unwrap_or(0.0)
        ),
        format!("strong residual={:.3e} (baseline {baseline:.3e})", strong.strong_residual),
    ];
    let failure = (!rep.converged).then(|| format!("no convergence in {} iterations", rep.iterations));
    Ok(Outcome { lines, failure })
}

fn heatspace_sample(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let hs = cfg.heatspace.as_ref().unwrap();
    let model = &cfg.model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg));
    let mut w = csv_writer(out, "samples.csv")?;
    w.write_record(["sample", "regime", "classified", "kind", "name", "value"])?;
    let mut lines = Vec::new();
    let mut index = 0usize;
    for &regime in &hs.regimes {
        let mut agree = 0usize;
        for _ in 0..hs.n_per_regime {
            let h = sample_triple(&mut rng, regime, model.b, model.f, &hs.thresholds);
            let class = classify_regime(&h, &hs.thresholds);
            agree += usize::from(class == regime);
            let chart = lift(&h, regime)?;
            let mut rows: Vec<(&str, String, f64)> =
                chart.named_coords().into_iter().map(|(n, v)| ("coord", n, v)).collect();
            rows.extend(chart.bdfs.iter().map(|(f, v)| ("bdf", f.name().to_string(), *v)));
            rows.push(("model", "hk".into(), hk_asymptotic_model(&chart, model.m(), hs.decay)));
            if let Ok(v) = volume_lift(&chart, model) {
                rows.push(("model", "volume".into(), v));
            }
            for (kind, name, v) in rows {
                w.write_record([
                    index.to_string(),
                    regime.name().to_string(),
                    class.name().to_string(),
                    kind.to_string(),
                    name,
                    v.to_string(),
                ])?;
            }
            index += 1;
        }
        lines.push(format!("{}: {agree}/{} samples classified back", regime.name(), hs.n_per_regime));
    }
    w.flush()?;
    Ok(Outcome::ok(lines))
}
