use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use phi_heat::field::{Field, Grid, ModeSet, Profile};
use phi_heat::geometry::PhiModel;
use phi_heat::solver::{discretize, evolve_to, heat_convolve, mass_conservation_check, TimeScheme};

/// Plane heat flow of a Gaussian: exp(-|p-p0|²/4s₀) evolves to
/// s₀/(s₀+t) exp(-|p-p0|²/4(s₀+t)).
fn plane_gaussian(r: f64, theta: f64, r0: f64, s: f64) -> f64 {
    let d2 = r * r + r0 * r0 - 2.0 * r * r0 * theta.cos();
    (-d2 / (4.0 * s)).exp()
}

#[test]
fn euclidean_plane_matches_exact_heat_flow() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let model = PhiModel::euclidean_radial(2);
        let t_end = 0.1;
        let n_t = 21;
        let grid = Arc::new(Grid::new(0.01, 1.0, 2048, ModeSet::new(1, 0, 32, 0), t_end, n_t).unwrap());
        let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
        let r0 = 10.0;
        let u0 = Profile::from_fn(grid.clone(), 0.0, |x, a| plane_gaussian(1.0 / x, a[0], r0, 1.0));
        let u = evolve_to(&op, &u0, t_end, n_t - 1).unwrap();
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for j in 0..256 {
            let th = std::f64::consts::TAU * j as f64 / 256.0;
            let ph = grid.mode_phases(&[th]);
            for (ix, &x) in grid.x_nodes.iter().enumerate() {
                let exact = plane_gaussian(1.0 / x, th, r0, 1.0 + t_end) / (1.0 + t_end);
                err = err.max((u.value_with_phases(ix, &ph) - exact).abs());
                peak = peak.max(exact);
            }
        }
        let rel = err / peak;
        println!("plane heat flow: rel err {rel:.3e} in {:?}", start.elapsed());
        assert!(rel <= 1e-3);
    });
}

fn bump(x: f64, a: &[f64]) -> f64 {
    (-(x - 0.3).powi(2) / (2.0 * 0.04f64.powi(2))).exp() * (1.0 + 0.5 * a[0].cos() * a[1].sin())
}

#[test]
fn mass_drift_is_small_and_shrinks() {
    for (b, f) in [(1usize, 1usize), (2, 1)] {
        let model = PhiModel::exact_product(b, f);
        let drift = |n_x: usize, n_t: usize| {
            let grid = Arc::new(Grid::new(0.01, 1.0, n_x, ModeSet::new(b, f, 1, 1), 0.5, n_t).unwrap());
            let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
            let u0 = Profile::from_fn(grid, 0.0, |x, a| bump(x, &[a[0], a[b]]));
            mass_conservation_check(&op, &u0, 0.5).unwrap()
        };
        let coarse = drift(256, 51);
        let fine = drift(512, 101);
        println!("(b,f)=({b},{f}) drift {coarse:.3e} -> {fine:.3e}");
        assert!(coarse <= 1e-4);
        assert!(coarse / fine >= 2.0);
    }
}

/// u* = t φ(x) sin y on ExactProduct(1,1) with φ flat at both ends.
#[test]
fn manufactured_solution_converges_at_second_order() {
    let (lo, hi) = (0.05, 1.0);
    let model = PhiModel::exact_product(1, 1).with_collar(lo, hi);
    let w = std::f64::consts::PI / (hi - lo);
    let phi = move |x: f64| (w * (x - lo)).cos();
    let dphi = move |x: f64| -w * (w * (x - lo)).sin();
    let d2phi = move |x: f64| -w * w * (w * (x - lo)).cos();
    // L(φ sin y) = (-x⁴φ'' - x³φ' + x²φ) sin y
    let l_phi = move |x: f64| -x.powi(4) * d2phi(x) - x.powi(3) * dphi(x) + x * x * phi(x);
    let t_end = 0.5;
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n_x in [64usize, 128, 256] {
        let grid = Arc::new(Grid::new(lo, hi, n_x, ModeSet::new(1, 1, 1, 0), t_end, 801).unwrap());
        let op = discretize(&model, grid.clone(), TimeScheme::CrankNicolson).unwrap();
        let k1 = grid.modes.position(&[1, 0]).unwrap();
        let km = grid.modes.position(&[-1, 0]).unwrap();
        // sin y = (e^{iy} - e^{-iy}) / 2i
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
        let mut e: f64 = 0.0;
        for (ix, &x) in grid.x_nodes.iter().enumerate() {
            let exact = Complex64::new(0.0, -0.5 * t_end * phi(x));
            e = e.max((u.at(it, k1, ix) - exact).norm());
            e = e.max((u.at(it, km, ix) - exact.conj()).norm());
        }
        errs.push(e);
        hs.push(grid.x_nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
    }
    let orders: Vec<f64> = (0..2).map(|i| (errs[i] / errs[i + 1]).ln() / (hs[i] / hs[i + 1]).ln()).collect();
    println!("manufactured errors {errs:?} orders {orders:?}");
    assert!(orders.iter().all(|p| *p >= 1.9));
}
