//! Projective charts on the blown-up heat space, their boundary defining
//! functions, polyhomogeneous expansions and the leading-order model of the
//! lifted heat kernel.
//!
//! A triple `(t, p, q)` has `p = (x, y, z)` and `q = (x̃, ỹ, z̃)`; `τ = √t`.
//! Angular differences are taken periodically in `(-π, π]`, with the sign
//! convention `U = (y - ỹ)/·` throughout.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PhiError, Result};
use crate::geometry::{volume_factor, PhiModel, Point};
use crate::numerics::angle_diff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    R1,
    R2,
    R3,
    R4,
    R5,
    Interior,
}

impl Regime {
    pub const ALL: [Regime; 6] = [Regime::R1, Regime::R2, Regime::R3, Regime::R4, Regime::R5, Regime::Interior];

    pub fn name(self) -> &'static str {
        match self {
            Regime::R1 => "R1",
            Regime::R2 => "R2",
            Regime::R3 => "R3",
            Regime::R4 => "R4",
            Regime::R5 => "R5",
            Regime::Interior => "Interior",
        }
    }
}

/// Boundary hypersurfaces of the heat space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Lf,
    Rf,
    Tb,
    Ff,
    Fd,
    Td,
}

impl Face {
    pub fn name(self) -> &'static str {
        match self {
            Face::Lf => "lf",
            Face::Rf => "rf",
            Face::Tb => "tb",
            Face::Ff => "ff",
            Face::Fd => "fd",
            Face::Td => "td",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatTriple {
    pub t: f64,
    pub p: Point,
    pub q: Point,
}

/// Chart coordinates. Vectors hold one entry per base (`u`) or fiber
/// (`w`) angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ChartCoords {
    /// `(τ, x, y, z, s̃ = x̃/x, ỹ, z̃)`
    R1 { tau: f64, x: f64, y: Vec<f64>, z: Vec<f64>, s_tilde: f64, y_t: Vec<f64>, z_t: Vec<f64> },
    /// `(τ, s = x/x̃, y, z, x̃, ỹ, z̃)`
    R2 { tau: f64, s: f64, y: Vec<f64>, z: Vec<f64>, x_t: f64, y_t: Vec<f64>, z_t: Vec<f64> },
    /// `(τ, x, y, z, S' = (x̃-x)/x², U' = (y-ỹ)/x, Z' = z-z̃)`
    R3 { tau: f64, x: f64, y: Vec<f64>, z: Vec<f64>, s: f64, u: Vec<f64>, w: Vec<f64> },
    /// `(τ, x̃, ỹ, z̃, S̃' = (x-x̃)/x̃², Ũ' = (y-ỹ)/x̃, Z̃' = z-z̃)`
    R4 { tau: f64, x_t: f64, y_t: Vec<f64>, z_t: Vec<f64>, s: f64, u: Vec<f64>, w: Vec<f64> },
    /// `(τ, x, y, z, S = (x̃-x)/(τx²), U = (y-ỹ)/(τx), Z = (z-z̃)/τ)`
    R5 { tau: f64, x: f64, y: Vec<f64>, z: Vec<f64>, s: f64, u: Vec<f64>, w: Vec<f64> },
    Interior { triple: HeatTriple },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveChart {
    pub regime: Regime,
    pub coords: ChartCoords,
    pub bdfs: BTreeMap<Face, f64>,
}

fn japanese(v: f64, a: &[f64], b: &[f64]) -> f64 {
    (1.0 + v * v + a.iter().chain(b).map(|c| c * c).sum::<f64>()).sqrt()
}

fn norm(v: f64, a: &[f64], b: &[f64]) -> f64 {
    (v * v + a.iter().chain(b).map(|c| c * c).sum::<f64>()).sqrt()
}

impl ProjectiveChart {
    /// Chart from coordinates; boundary defining functions follow.
    pub fn from_coords(coords: ChartCoords) -> Self {
        let mut bdfs = BTreeMap::new();
        let regime = match &coords {
            ChartCoords::R1 { tau, x, s_tilde, .. } => {
                bdfs.insert(Face::Ff, *x);
                bdfs.insert(Face::Lf, *s_tilde);
                bdfs.insert(Face::Tb, *tau);
                Regime::R1
            }
            ChartCoords::R2 { tau, s, x_t, .. } => {
                bdfs.insert(Face::Ff, *x_t);
                bdfs.insert(Face::Rf, *s);
                bdfs.insert(Face::Tb, *tau);
                Regime::R2
            }
            ChartCoords::R3 { tau, x, s, u, w, .. } => {
                bdfs.insert(Face::Fd, *x);
                bdfs.insert(Face::Tb, *tau);
                bdfs.insert(Face::Ff, 1.0 / japanese(*s, u, w));
                Regime::R3
            }
            ChartCoords::R4 { tau, x_t, s, u, w, .. } => {
                bdfs.insert(Face::Fd, *x_t);
                bdfs.insert(Face::Tb, *tau);
                bdfs.insert(Face::Ff, 1.0 / japanese(*s, u, w));
                Regime::R4
            }
            ChartCoords::R5 { tau, x, s, u, w, .. } => {
                bdfs.insert(Face::Fd, *x);
                bdfs.insert(Face::Td, *tau);
                bdfs.insert(Face::Tb, 1.0 / japanese(*s, u, w));
                Regime::R5
            }
            ChartCoords::Interior { .. } => Regime::Interior,
        };
        Self { regime, coords, bdfs }
    }

    pub fn bdf(&self, face: Face) -> Option<f64> {
        self.bdfs.get(&face).copied()
    }

    pub fn tau(&self) -> f64 {
        match &self.coords {
            ChartCoords::R1 { tau, .. }
            | ChartCoords::R2 { tau, .. }
            | ChartCoords::R3 { tau, .. }
            | ChartCoords::R4 { tau, .. }
            | ChartCoords::R5 { tau, .. } => *tau,
            ChartCoords::Interior { triple } => triple.t.sqrt(),
        }
    }

    /// Flat `(name, value)` list for tabular output.
    pub fn named_coords(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let push_vec = |out: &mut Vec<(String, f64)>, name: &str, v: &[f64]| {
            for (i, c) in v.iter().enumerate() {
                out.push((format!("{name}{}", i + 1), *c));
            }
        };
        match &self.coords {
            ChartCoords::R1 { tau, x, y, z, s_tilde, y_t, z_t } => {
                out.push(("tau".into(), *tau));
                out.push(("x".into(), *x));
                push_vec(&mut out, "y", y);
                push_vec(&mut out, "z", z);
                out.push(("s_tilde".into(), *s_tilde));
                push_vec(&mut out, "y_tilde", y_t);
                push_vec(&mut out, "z_tilde", z_t);
            }
            ChartCoords::R2 { tau, s, y, z, x_t, y_t, z_t } => {
                out.push(("tau".into(), *tau));
                out.push(("s".into(), *s));
                push_vec(&mut out, "y", y);
                push_vec(&mut out, "z", z);
                out.push(("x_tilde".into(), *x_t));
                push_vec(&mut out, "y_tilde", y_t);
                push_vec(&mut out, "z_tilde", z_t);
            }
            ChartCoords::R3 { tau, x, y, z, s, u, w } | ChartCoords::R5 { tau, x, y, z, s, u, w } => {
                out.push(("tau".into(), *tau));
                out.push(("x".into(), *x));
                push_vec(&mut out, "y", y);
                push_vec(&mut out, "z", z);
                out.push(("S".into(), *s));
                push_vec(&mut out, "U", u);
                push_vec(&mut out, "Z", w);
            }
            ChartCoords::R4 { tau, x_t, y_t, z_t, s, u, w } => {
                out.push(("tau".into(), *tau));
                out.push(("x_tilde".into(), *x_t));
                push_vec(&mut out, "y_tilde", y_t);
                push_vec(&mut out, "z_tilde", z_t);
                out.push(("S".into(), *s));
                push_vec(&mut out, "U", u);
                push_vec(&mut out, "Z", w);
            }
            ChartCoords::Interior { triple } => {
                out.push(("t".into(), triple.t));
                out.push(("x".into(), triple.p.x));
                push_vec(&mut out, "y", &triple.p.y);
                push_vec(&mut out, "z", &triple.p.z);
                out.push(("x_tilde".into(), triple.q.x));
                push_vec(&mut out, "y_tilde", &triple.q.y);
                push_vec(&mut out, "z_tilde", &triple.q.z);
            }
        }
        out
    }
}

fn diffs(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| angle_diff(*u, *v)).collect()
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(PhiError::ChartDomain(what.to_string()))
    }
}

/// Coordinates of `h` in the chart of `regime`.
pub fn lift(h: &HeatTriple, regime: Regime) -> Result<ProjectiveChart> {
    require(h.t >= 0.0 && h.t.is_finite(), "t must be finite and nonnegative")?;
    let tau = h.t.sqrt();
    let (p, q) = (&h.p, &h.q);
    let coords = match regime {
        Regime::R1 => {
            require(p.x > 0.0, "x = 0")?;
            ChartCoords::R1 {
                tau,
                x: p.x,
                y: p.y.clone(),
                z: p.z.clone(),
                s_tilde: q.x / p.x,
                y_t: q.y.clone(),
                z_t: q.z.clone(),
            }
        }
        Regime::R2 => {
            require(q.x > 0.0, "x̃ = 0")?;
            ChartCoords::R2 {
                tau,
                s: p.x / q.x,
                y: p.y.clone(),
                z: p.z.clone(),
                x_t: q.x,
                y_t: q.y.clone(),
                z_t: q.z.clone(),
            }
        }
        Regime::R3 => {
            require(p.x > 0.0, "x = 0")?;
            ChartCoords::R3 {
                tau,
                x: p.x,
                y: p.y.clone(),
                z: p.z.clone(),
                s: (q.x - p.x) / (p.x * p.x),
                u: diffs(&p.y, &q.y).iter().map(|d| d / p.x).collect(),
                w: diffs(&p.z, &q.z),
            }
        }
        Regime::R4 => {
            require(q.x > 0.0, "x̃ = 0")?;
            ChartCoords::R4 {
                tau,
                x_t: q.x,
                y_t: q.y.clone(),
                z_t: q.z.clone(),
                s: (p.x - q.x) / (q.x * q.x),
                u: diffs(&p.y, &q.y).iter().map(|d| d / q.x).collect(),
                w: diffs(&p.z, &q.z),
            }
        }
        Regime::R5 => {
            require(p.x > 0.0, "x = 0")?;
            require(tau > 0.0, "τ = 0: the point lies on the diagonal at t = 0")?;
            ChartCoords::R5 {
                tau,
                x: p.x,
                y: p.y.clone(),
                z: p.z.clone(),
                s: (q.x - p.x) / (tau * p.x * p.x),
                u: diffs(&p.y, &q.y).iter().map(|d| d / (tau * p.x)).collect(),
                w: diffs(&p.z, &q.z).iter().map(|d| d / tau).collect(),
            }
        }
        Regime::Interior => ChartCoords::Interior { triple: h.clone() },
    };
    Ok(ProjectiveChart::from_coords(coords))
}

/// The blowdown map back to `(t, p, q)`.
pub fn blowdown(chart: &ProjectiveChart) -> HeatTriple {
    let sub = |a: &[f64], d: &[f64], s: f64| -> Vec<f64> { a.iter().zip(d).map(|(a, d)| a - s * d).collect() };
    let add = |a: &[f64], d: &[f64], s: f64| -> Vec<f64> { a.iter().zip(d).map(|(a, d)| a + s * d).collect() };
    match &chart.coords {
        ChartCoords::R1 { tau, x, y, z, s_tilde, y_t, z_t } => HeatTriple {
            t: tau * tau,
            p: Point::new(*x, y.clone(), z.clone()),
            q: Point::new(x * s_tilde, y_t.clone(), z_t.clone()),
        },
        ChartCoords::R2 { tau, s, y, z, x_t, y_t, z_t } => HeatTriple {
            t: tau * tau,
            p: Point::new(s * x_t, y.clone(), z.clone()),
            q: Point::new(*x_t, y_t.clone(), z_t.clone()),
        },
        ChartCoords::R3 { tau, x, y, z, s, u, w } => HeatTriple {
            t: tau * tau,
            p: Point::new(*x, y.clone(), z.clone()),
            q: Point::new(x + x * x * s, sub(y, u, *x), sub(z, w, 1.0)),
        },
        ChartCoords::R4 { tau, x_t, y_t, z_t, s, u, w } => HeatTriple {
            t: tau * tau,
            p: Point::new(x_t + x_t * x_t * s, add(y_t, u, *x_t), add(z_t, w, 1.0)),
            q: Point::new(*x_t, y_t.clone(), z_t.clone()),
        },
        ChartCoords::R5 { tau, x, y, z, s, u, w } => HeatTriple {
            t: tau * tau,
            p: Point::new(*x, y.clone(), z.clone()),
            q: Point::new(x + tau * x * x * s, sub(y, u, tau * x), sub(z, w, *tau)),
        },
        ChartCoords::Interior { triple } => triple.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeThresholds {
    /// Every relevant defining function must be at most this.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Radius of the coordinate ball in the R3/R4/R5 charts.
    #[serde(default = "default_ball")]
    pub ball: f64,
}

fn default_cutoff() -> f64 {
    0.1
}

fn default_ball() -> f64 {
    10.0
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            cutoff: default_cutoff(),
            ball: default_ball(),
        }
    }
}

/// Priority order used by [`classify_regime`].
pub const PRIORITY: [Regime; 5] = [Regime::R5, Regime::R3, Regime::R4, Regime::R1, Regime::R2];

fn fits(chart: &ProjectiveChart, th: &RegimeThresholds) -> bool {
    let c = th.cutoff;
    let small = |f: Face| chart.bdf(f).is_some_and(|v| v <= c);
    match &chart.coords {
        ChartCoords::R1 { .. } => small(Face::Ff) && small(Face::Lf) && small(Face::Tb),
        ChartCoords::R2 { .. } => small(Face::Ff) && small(Face::Rf) && small(Face::Tb),
        ChartCoords::R3 { s, u, w, .. } | ChartCoords::R4 { s, u, w, .. } => {
            small(Face::Fd) && small(Face::Tb) && norm(*s, u, w) <= th.ball
        }
        ChartCoords::R5 { s, u, w, .. } => small(Face::Fd) && small(Face::Td) && norm(*s, u, w) <= th.ball,
        ChartCoords::Interior { .. } => true,
    }
}

/// First regime in [`PRIORITY`] whose chart holds the triple with all its
/// defining functions under the cutoff; `Interior` otherwise.
pub fn classify_regime(h: &HeatTriple, th: &RegimeThresholds) -> Regime {
    for r in PRIORITY {
        if let Ok(chart) = lift(h, r) {
            if fits(&chart, th) {
                return r;
            }
        }
    }
    Regime::Interior
}

/// Random triple whose chart coordinates for `regime` lie inside the
/// classification thresholds. `Interior` draws a generic triple.
pub fn sample_triple<R: Rng>(rng: &mut R, regime: Regime, b: usize, f: usize, th: &RegimeThresholds) -> HeatTriple {
    let c = th.cutoff;
    let small = |rng: &mut R| c * rng.gen_range(1e-3..1.0f64);
    let angles = |rng: &mut R, n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.0..TAU)).collect() };
    let ball = |rng: &mut R, n: usize| -> Vec<f64> {
        let r = th.ball / (n as f64).sqrt();
        (0..n).map(|_| rng.gen_range(-r..r)).collect()
    };
    let coords = match regime {
        Regime::R1 => ChartCoords::R1 {
            tau: small(rng),
            x: small(rng),
            y: angles(rng, b),
            z: angles(rng, f),
            s_tilde: small(rng),
            y_t: angles(rng, b),
            z_t: angles(rng, f),
        },
        Regime::R2 => ChartCoords::R2 {
            tau: small(rng),
            s: small(rng),
            y: angles(rng, b),
            z: angles(rng, f),
            x_t: small(rng),
            y_t: angles(rng, b),
            z_t: angles(rng, f),
        },
        Regime::R3 | Regime::R4 | Regime::R5 => {
            let tau = small(rng);
            let x = small(rng);
            let v = ball(rng, 1 + b + f);
            let (s, u, w) = (v[0], v[1..1 + b].to_vec(), v[1 + b..].to_vec());
            // keep x̃ > 0 and the angular offsets inside (-π, π]
            let (y, z) = (angles(rng, b), angles(rng, f));
            match regime {
                Regime::R3 => ChartCoords::R3 { tau, x, y, z, s: s.max(-0.5 / x), u, w: w.iter().map(|a| a.clamp(-3.0, 3.0)).collect() },
                Regime::R4 => ChartCoords::R4 { tau, x_t: x, y_t: y, z_t: z, s: s.max(-0.5 / x), u, w: w.iter().map(|a| a.clamp(-3.0, 3.0)).collect() },
                _ => ChartCoords::R5 { tau, x, y, z, s, u, w },
            }
        }
        Regime::Interior => ChartCoords::Interior {
            triple: HeatTriple {
                t: rng.gen_range(0.0..1.0),
                p: Point::new(rng.gen_range(0.01..1.0), angles(rng, b), angles(rng, f)),
                q: Point::new(rng.gen_range(0.01..1.0), angles(rng, b), angles(rng, f)),
            },
        },
    };
    blowdown(&ProjectiveChart::from_coords(coords))
}

/// Exponents `(ς, p)` at one face, closed under `ς → ς + n` up to the
/// truncation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub entries: Vec<(f64, u32)>,
    pub truncation: f64,
}

impl IndexSet {
    pub fn new(generators: &[(f64, u32)], truncation: f64) -> Result<Self> {
        if generators.iter().any(|(s, _)| !s.is_finite()) || !truncation.is_finite() {
            return Err(PhiError::Domain("index set exponents must be finite".into()));
        }
        let mut entries: Vec<(f64, u32)> = Vec::new();
        for &(s, p) in generators {
            let mut e = s;
            while e <= truncation + 1e-12 {
                if !entries.iter().any(|(a, b)| (a - e).abs() < 1e-12 && *b == p) {
                    entries.push((e, p));
                }
                e += 1.0;
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(Self { entries, truncation })
    }

    /// Lowest exponent present.
    pub fn lower_bound(&self) -> Option<f64> {
        self.entries.first().map(|e| e.0)
    }
}

pub type IndexFamily = BTreeMap<Face, IndexSet>;

/// Coefficients `a_{ς,n}` per face; absent entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub entries: Vec<(Face, f64, u32, f64)>,
}

impl CoefficientTable {
    pub fn insert(&mut self, face: Face, exponent: f64, log_power: u32, value: f64) {
        self.entries.push((face, exponent, log_power, value));
    }

    pub fn get(&self, face: Face, exponent: f64, log_power: u32) -> f64 {
        self.entries
            .iter()
            .filter(|(f, s, p, _)| *f == face && (s - exponent).abs() < 1e-12 && *p == log_power)
            .map(|e| e.3)
            .sum()
    }
}

/// Truncated expansion `Π_faces Σ a ρ^ς (log ρ)^n` over the faces that
/// meet the chart and carry an index set.
pub fn phg_eval(family: &IndexFamily, coeffs: &CoefficientTable, chart: &ProjectiveChart) -> Result<f64> {
    let mut value = 1.0;
    for (face, set) in family {
        let Some(rho) = chart.bdf(*face) else { continue };
        if rho < 0.0 {
            return Err(PhiError::Domain(format!("negative defining function at {}", face.name())));
        }
        let mut sum = 0.0;
        for &(s, n) in &set.entries {
            let a = coeffs.get(*face, s, n);
            if a == 0.0 {
                continue;
            }
            if rho == 0.0 {
                if s < 0.0 || (s == 0.0 && n > 0) {
                    return Err(PhiError::Singular(format!(
                        "exponent ({s}, {n}) at {} where the defining function vanishes",
                        face.name()
                    )));
                }
                if s == 0.0 {
                    sum += a;
                }
                continue;
            }
            sum += a * rho.powf(s) * rho.ln().powi(n as i32);
        }
        value *= sum;
    }
    Ok(value)
}

/// How infinite-order vanishing at a face is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayModel {
    /// `exp(1 - 1/ρ)` on `(0, 1]`.
    #[default]
    Exponential,
    /// `ρ^N` on `(0, 1]`.
    Power { n: i32 },
}

impl DecayModel {
    pub fn eval(self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return 1.0;
        }
        if rho <= 0.0 {
            return 0.0;
        }
        match self {
            DecayModel::Exponential => (1.0 - 1.0 / rho).exp(),
            DecayModel::Power { n } => rho.powi(n),
        }
    }
}

/// Leading-order magnitude of the lifted heat kernel: order `-m` at td,
/// order 0 at fd, infinite-order vanishing at lf, rf, ff and tb, times a
/// Gaussian model profile in `(S, U, Z)` on R5.
pub fn hk_asymptotic_model(chart: &ProjectiveChart, m: usize, decay: DecayModel) -> f64 {
    let mut v = 1.0;
    for face in [Face::Lf, Face::Rf, Face::Ff, Face::Tb] {
        if let Some(r) = chart.bdf(face) {
            v *= decay.eval(r);
        }
    }
    if let ChartCoords::R5 { tau, s, u, w, .. } = &chart.coords {
        let n2 = norm(*s, u, w).powi(2);
        v *= tau.powi(-(m as i32)) * (-n2 / 4.0).exp();
    }
    v
}

/// Density of the lifted measure `dvol_Φ dt` in chart coordinates.
/// R3 and R5 measure the `q` variable; R4, the mirror chart, measures `p`.
pub fn volume_lift(chart: &ProjectiveChart, model: &PhiModel) -> Result<f64> {
    let e = -2.0 - model.b as f64;
    let m = model.m() as i32;
    let h = blowdown(chart);
    let factor = |pt: &Point| volume_factor(model, pt.x, &pt.angles());
    match &chart.coords {
        ChartCoords::R1 { tau, x, s_tilde, .. } => {
            require(*s_tilde > 0.0, "s̃ = 0")?;
            Ok(2.0 * (s_tilde * x).powf(e) * tau * x * factor(&h.q)?)
        }
        ChartCoords::R2 { tau, x_t, .. } => Ok(2.0 * x_t.powf(e) * tau * factor(&h.q)?),
        ChartCoords::R3 { tau, x, s, .. } => {
            let j = 1.0 + s * x;
            require(j > 0.0, "1 + S'x <= 0")?;
            Ok(2.0 * j.powf(e) * tau * factor(&h.q)?)
        }
        ChartCoords::R4 { tau, x_t, s, .. } => {
            let j = 1.0 + s * x_t;
            require(j > 0.0, "1 + S'x <= 0")?;
            Ok(2.0 * j.powf(e) * tau * factor(&h.p)?)
        }
        ChartCoords::R5 { tau, x, s, .. } => {
            let j = 1.0 + s * tau * x;
            require(j > 0.0, "1 + Sτx <= 0")?;
            Ok(2.0 * j.powf(e) * tau.powi(m + 1) * factor(&h.q)?)
        }
        ChartCoords::Interior { .. } => Err(PhiError::ChartDomain("interior has no lifted density".into())),
    }
}

/// Slice integral `∫ H · (lifted density) / τ dS dU dZ` over the R5
/// coordinate box `[-L, L]^m` at fixed `τ` and base point `p`, by a tensor
/// Gauss–Legendre rule with `n` nodes per direction.
pub fn r5_slice_integral(model: &PhiModel, p: &Point, tau: f64, half_width: f64, n: usize, decay: DecayModel) -> Result<f64> {
    let m = model.m();
    let (nodes, weights) = crate::numerics::gauss_legendre(n);
    let mut total = 0.0;
    let count = n.pow(m as u32);
    for idx in 0..count {
        let mut rem = idx;
        let mut v = vec![0.0; m];
        let mut w = 1.0;
        for c in v.iter_mut() {
            let k = rem % n;
            rem /= n;
            *c = half_width * nodes[k];
            w *= half_width * weights[k];
        }
        let chart = ProjectiveChart::from_coords(ChartCoords::R5 {
            tau,
            x: p.x,
            y: p.y.clone(),
            z: p.z.clone(),
            s: v[0],
            u: v[1..1 + model.b].to_vec(),
            w: v[1 + model.b..].to_vec(),
        });
        total += w * hk_asymptotic_model(&chart, m, decay) * volume_lift(&chart, model)? / tau;
    }
    Ok(total)
}
