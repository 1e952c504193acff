//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phi_heat::field::{Field, Grid, ModeSet, Profile};
use phi_heat::geometry::{grigoryan_test, PhiModel, Point, Verdict};
use phi_heat::heatspace::{
    blowdown, lift, r5_slice_integral, sample_triple, ChartCoords, DecayModel, ProjectiveChart, Regime,
    RegimeThresholds,
};
use phi_heat::holder::{weighted_holder_terms, PairSampler, SampleSet, WeightedSpaceSpec};
use phi_heat::numerics::angle_diff;
use phi_heat::picard::{
    choose_constants, estimate_c_eta, manufactured_baseline, picard_grid, picard_solve, random_ball_field,
    smooth_forcing, verify_solution, CatalogRhs, PicardConfig,
};
use phi_heat::schauder::{
    conjugated_ratios, constant_member, generate_ensemble, mapping_bound_check, refinement_study, strip_all,
    time_weight_check, BenchGrid, EnsembleSpec, TimeVariant,
};
use phi_heat::solver::{discretize, evolve_to, heat_convolve, mass_conservation_check, TimeScheme};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "{} criterion {id} ({title}): {} [{:.1} s of {} s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn plane_gaussian(r: f64, theta: f64, r0: f64, s: f64) -> f64 {
    let d2 = r * r + r0 * r0 - 2.0 * r * r0 * theta.cos();
    (-d2 / (4.0 * s)).exp()
}

fn euclidean_oracle() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let model = PhiModel::euclidean_radial(2);
        let (t_end, n_t) = (0.1, 21);
        let grid = Arc::new(Grid::new(0.01, 1.0, 2048, ModeSet::new(1, 0, 32, 0), t_end, n_t).unwrap());
        let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
        let r0 = 10.0;
        let u0 = Profile::from_fn(grid.clone(), 0.0, |x, a| plane_gaussian(1.0 / x, a[0], r0, 1.0));
        let u = evolve_to(&op, &u0, t_end, n_t - 1).unwrap();
        let (mut err, mut peak) = (0.0f64, 0.0f64);
        for j in 0..256 {
            let th = TAU * j as f64 / 256.0;
            let ph = grid.mode_phases(&[th]);
            for (ix, &x) in grid.x_nodes.iter().enumerate() {
                let exact = plane_gaussian(1.0 / x, th, r0, 1.0 + t_end) / (1.0 + t_end);
                err = err.max((u.value_with_phases(ix, &ph) - exact).abs());
                peak = peak.max(exact);
            }
        }
        let rel = err / peak;
        Outcome {
            pass: rel <= 1e-3,
            detail: format!("2048 x-nodes, {} modes, relative max error {rel:.2e} (≤ 1e-3)", grid.n_modes()),
        }
    })
}

fn bump(x: f64, a: &[f64]) -> f64 {
    (-(x - 0.3).powi(2) / (2.0 * 0.04f64.powi(2))).exp() * (1.0 + 0.5 * a[0].cos() * a[1].sin())
}

fn stochastic_completeness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (b, f) in [(1usize, 1usize), (2, 1)] {
        let model = PhiModel::exact_product(b, f);
        let rep = grigoryan_test(&model, 1000.0, 40).unwrap();
        let target = (b + 1) as f64;
        let rel = (rep.growth_exponent - target).abs() / target;
        let drift = |n_x: usize, n_t: usize| {
            let grid = Arc::new(Grid::new(0.01, 1.0, n_x, ModeSet::new(b, f, 1, 1), 0.5, n_t).unwrap());
            let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
            let u0 = Profile::from_fn(grid, 0.0, |x, a| bump(x, &[a[0], a[b]]));
            mass_conservation_check(&op, &u0, 0.5).unwrap()
        };
        let (coarse, fine) = (drift(256, 51), drift(512, 101));
        let ok = rel <= 0.05 && rep.verdict == Verdict::Complete && coarse <= 1e-4 && coarse / fine >= 2.0;
        pass &= ok;
        parts.push(format!(
            "({b},{f}) exponent {:.4} vs {target}, {:?}, drift {coarse:.2e} -> {fine:.2e} (×{:.2})",
            rep.growth_exponent,
            rep.verdict,
            coarse / fine
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn triples_close(a: &phi_heat::heatspace::HeatTriple, b: &phi_heat::heatspace::HeatTriple) -> f64 {
    let mut e = (a.t - b.t).abs();
    for (p, q) in [(&a.p, &b.p), (&a.q, &b.q)] {
        e = e.max((p.x - q.x).abs());
        for (u, v) in p.angles().iter().zip(q.angles()) {
            e = e.max(angle_diff(*u, v).abs());
        }
    }
    e
}

fn atlas_round_trip() -> Outcome {
    let th = RegimeThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let n = 100_000;
    for r in Regime::ALL {
        for _ in 0..n {
            let h = sample_triple(&mut rng, r, 1, 1, &th);
            let back = blowdown(&lift(&h, r).unwrap());
            worst = worst.max(triples_close(&h, &back));
        }
    }
    let chart = ProjectiveChart::from_coords(ChartCoords::R1 {
        tau: 0.1,
        x: 0.2,
        y: vec![0.0],
        z: vec![0.0],
        s_tilde: 0.5,
        y_t: vec![0.0],
        z_t: vec![0.0],
    });
    let h = blowdown(&chart);
    let formula = h.t == 0.1 * 0.1 && h.p.x == 0.2 && h.q.x == 0.2 * 0.5 && h.q.x == 0.1;
    Outcome {
        pass: worst <= 1e-12 && formula,
        detail: format!("{n} triples × 6 regimes, worst deviation {worst:.1e}; R1 blowdown formula exact: {formula}"),
    }
}

fn asymptotic_bookkeeping() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (b, f, nodes) in [(1usize, 1usize, 48usize), (2, 1, 24)] {
        let model = PhiModel::exact_product(b, f);
        let p = Point::new(0.1, vec![0.4; b], vec![1.3; f]);
        let vals: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&tau| r5_slice_integral(&model, &p, tau, 10.0, nodes, DecayModel::Exponential).unwrap())
            .collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        let variation = (hi - lo) / lo;
        pass &= variation <= 0.05 && lo.is_finite() && lo > 0.0;
        parts.push(format!("m={} integrals {:.6?} variation {:.1e}", model.m(), vals, variation));
    }
    Outcome {
        pass,
        detail: format!("{} (≤ 5%)", parts.join("; ")),
    }
}

fn schauder_boundedness() -> Outcome {
    let model = PhiModel::exact_product(1, 1);
    let sampler = PairSampler::new(4000, 7);
    let grid = BenchGrid::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [0.0, 1.0] {
        let spec = EnsembleSpec::new(50, 0.5, 0.5, gamma, 42);
        let (coarse, fine) = refinement_study(&model, &grid, &spec, &sampler).unwrap();
        let growth = fine.refinement_growth().unwrap();
        let ok = coarse.max_ratio.is_finite() && fine.max_ratio.is_finite() && growth <= 1.5 && coarse.ratios.len() == 50;
        pass &= ok;
        parts.push(format!(
            "γ={gamma}: max ratio {:.4} -> {:.4} (×{growth:.3})",
            coarse.max_ratio, fine.max_ratio
        ));
    }
    let op = grid.build(&model).unwrap();
    let spec = EnsembleSpec::new(50, 0.5, 0.5, 1.0, 42);
    let ens = generate_ensemble(&spec, &op.grid, &sampler).unwrap();
    let direct = mapping_bound_check(&op, &ens, &spec.in_spec(), &sampler).unwrap();
    let stripped = strip_all(&ens, 1.0);
    let conj = conjugated_ratios(&op, &stripped, &spec.in_spec(), &sampler).unwrap();
    let unweighted = EnsembleSpec { gamma: 0.0, ..spec.clone() };
    let ens0 = generate_ensemble(&unweighted, &op.grid, &sampler).unwrap();
    let same_data = ens0.iter().zip(&stripped).all(|(a, b)| a.data == b.data);
    let invariant = direct.ratios == conj.ratios && same_data;
    pass &= invariant;
    parts.push(format!("weight invariance on stripped fields bitwise: {invariant}"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn time_weights() -> Outcome {
    let model = PhiModel::exact_product(1, 1);
    let sampler = PairSampler::new(4000, 7);
    let coarse = BenchGrid::default();
    let mut pass = true;
    let mut parts = Vec::new();
    // H1 = t
    let op = BenchGrid { t_end: 0.5, ..coarse.clone() }.build(&model).unwrap();
    let h1 = heat_convolve(&op, &constant_member(&op.grid, 0.0), 0.0).unwrap();
    let mut err: f64 = 0.0;
    for (it, t) in op.grid.t_nodes.iter().enumerate() {
        for ix in 0..op.grid.n_x() {
            err = err.max((h1.value(it, ix, &[0.3, 2.0]) - t).abs());
        }
    }
    pass &= err <= 1e-4;
    parts.push(format!("H1 = t to {err:.1e}"));
    let alpha = 0.5;
    let mut slopes = Vec::new();
    for g in [coarse.clone(), coarse.refined()] {
        let op = g.build(&model).unwrap();
        let spec = EnsembleSpec::new(50, alpha, alpha, 0.0, 42);
        let ens = generate_ensemble(&spec, &op.grid, &sampler).unwrap();
        let rep = time_weight_check(&op, &ens, &spec.in_spec(), TimeVariant::TalphaHalfC2, &sampler).unwrap();
        slopes.push(rep.t_scaling_slope.unwrap_or(f64::NAN));
    }
    let stable = (slopes[0] - slopes[1]).abs() <= 0.1;
    pass &= slopes.iter().all(|s| *s >= alpha / 2.0 - 0.1) && stable;
    parts.push(format!(
        "t^(α/2) slopes {:.3} / {:.3} (≥ {:.2}, |Δ| ≤ 0.1)",
        slopes[0],
        slopes[1],
        alpha / 2.0 - 0.1
    ));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn picard_contraction() -> Outcome {
    let model = PhiModel::exact_product(1, 1);
    let sampler = PairSampler::new(4000, 7);
    let bench = BenchGrid::default();
    let op = bench.build(&model).unwrap();
    let spec = EnsembleSpec::new(50, 0.5, 0.5, 0.0, 42);
    let ens = generate_ensemble(&spec, &op.grid, &sampler).unwrap();
    let opnorm = mapping_bound_check(&op, &ens, &spec.in_spec(), &sampler).unwrap().max_ratio;
    let space = WeightedSpaceSpec::new(0, 0.5, 0.0).unwrap();
    let (c_f1, q_f2) = (0.1, 0.5);
    // C_η sampled in the unit ball, then once more in the ball it implies
    let (mut eta, mut t_prime, mut c_eta) = (1.0, 0.25, 0.0);
    for _ in 0..2 {
        let grid = picard_grid(1, 1, 0.05, 1.0, 64, 2, t_prime, 33).unwrap();
        let rhs = CatalogRhs::combined(smooth_forcing(&grid, 1.0), c_f1, q_f2);
        c_eta = estimate_c_eta(&grid, &rhs, &space, eta, 100, 5, &sampler, 1.5).unwrap();
        (eta, t_prime) = choose_constants(opnorm, c_eta).unwrap();
    }
    let grid = picard_grid(1, 1, 0.05, 1.0, 64, 2, t_prime, 129).unwrap();
    let op = discretize(&model.clone().with_collar(0.05, 1.0), grid.clone(), TimeScheme::CrankNicolson).unwrap();
    let set = SampleSet::new(&grid, &sampler);
    let top = WeightedSpaceSpec::new(2, 0.5, 0.0).unwrap();
    let unit = heat_convolve(&op, &smooth_forcing(&grid, 1.0), 0.0).unwrap();
    let unit_norm = weighted_holder_terms(&unit, &top, &set).unwrap().total.total;
    let rhs = CatalogRhs::combined(smooth_forcing(&grid, eta / (10.0 * unit_norm)), c_f1, q_f2);
    let tol = 1e-6;
    let cfg = PicardConfig {
        eta,
        t_prime,
        tol,
        max_iter: 100,
        opnorm,
        c_eta,
        space,
        sampler,
    };
    let a = match picard_solve(&op, &rhs, &cfg, None) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("iteration failed: {e}"),
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let start = random_ball_field(&grid, &mut rng, eta / 2.0, &top, &set).unwrap();
    let b = picard_solve(&op, &rhs, &cfg, Some(&start)).unwrap();
    let gap = weighted_holder_terms(&a.solution.sub(&b.solution).unwrap(), &top, &set).unwrap().total.total;
    let factor = a.last_factor().unwrap_or(0.0);
    let fixed = heat_convolve(&op, &phi_heat::picard::SemilinearRhs::eval(&rhs, &a.solution).unwrap(), 0.0)
        .unwrap()
        .sub(&a.solution)
        .unwrap();
    let fixed_res = weighted_holder_terms(&fixed, &top, &set).unwrap().total.total;
    let strong = verify_solution(&a.solution, &rhs, &op).unwrap();
    let baseline = manufactured_baseline(&op, a.solution.sup_on_lattice(6)).unwrap();
    let pass = a.converged
        && b.converged
        && factor <= 2.0 / 3.0 + 0.05
        && fixed_res <= tol
        && strong.strong_residual <= 10.0 * baseline
        && strong.initial_norm == 0.0
        && gap <= 2.0 * tol;
    Outcome {
        pass,
        detail: format!(
            "‖H‖≈{opnorm:.3}, C_η={c_eta:.3}, η={eta:.3}, T'={t_prime:.3}; {} iterations, last factor {factor:.3}, \
             fixed-point residual {fixed_res:.1e}, strong residual {:.2e} vs baseline {baseline:.2e}, start gap {gap:.1e}",
            a.iterations, strong.strong_residual
        ),
    }
}

fn manufactured_convergence() -> Outcome {
    let (lo, hi) = (0.05, 1.0);
    let model = PhiModel::exact_product(1, 1).with_collar(lo, hi);
    let w = PI / (hi - lo);
    let phi = move |x: f64| (w * (x - lo)).cos();
    let dphi = move |x: f64| -w * (w * (x - lo)).sin();
    let d2phi = move |x: f64| -w * w * (w * (x - lo)).cos();
    let l_phi = move |x: f64| -x.powi(4) * d2phi(x) - x.powi(3) * dphi(x) + x * x * phi(x);
    let t_end = 0.5;
    let (mut errs, mut hs) = (Vec::new(), Vec::new());
    for n_x in [64usize, 128, 256] {
        let grid = Arc::new(Grid::new(lo, hi, n_x, ModeSet::new(1, 1, 1, 0), t_end, 801).unwrap());
        let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
        let k1 = grid.modes.position(&[1, 0]).unwrap();
        let ell = Field::from_modes(grid.clone(), 0.0, |x, m, t| {
            let v = phi(x) + t * l_phi(x);
            match m {
                [1, 0] => Complex64::new(0.0, -0.5 * v),
                [-1, 0] => Complex64::new(0.0, 0.5 * v),
                _ => Complex64::new(0.0, 0.0),
            }
        });
        let u = heat_convolve(&op, &ell, 0.0).unwrap();
        let it = grid.n_t() - 1;
        let e = grid
            .x_nodes
            .iter()
            .enumerate()
            .map(|(ix, &x)| (u.at(it, k1, ix) - Complex64::new(0.0, -0.5 * t_end * phi(x))).norm())
            .fold(0.0, f64::max);
        errs.push(e);
        hs.push(grid.x_nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
    }
    let orders: Vec<f64> = (0..2).map(|i| (errs[i] / errs[i + 1]).ln() / (hs[i] / hs[i + 1]).ln()).collect();
    Outcome {
        pass: orders.iter().all(|p| *p >= 1.9),
        detail: format!("errors {:.2e} {:.2e} {:.2e}, orders {:.3} {:.3} (≥ 1.9)", errs[0], errs[1], errs[2], orders[0], orders[1]),
    }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "Euclidean oracle", s(30), euclidean_oracle),
        run(2, "stochastic completeness", s(60), stochastic_completeness),
        run(3, "atlas round trip", s(10), atlas_round_trip),
        run(4, "asymptotic bookkeeping", s(30), asymptotic_bookkeeping),
        run(5, "Schauder boundedness", s(600), schauder_boundedness),
        run(6, "time weights", s(300), time_weights),
        run(7, "Picard contraction", s(600), picard_contraction),
        run(8, "manufactured convergence", s(600), manufactured_convergence),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
