//! Run configuration: TOML in, fully resolved structure out.
//!
//! Every section field is optional in the file. [`RunConfig::resolve`] fills
//! defaults (some depend on the subcommand) and the resolved structure is
//! what runs and what lands in `manifest.json`.

use serde::{Deserialize, Serialize};

use phi_heat::geometry::{ModelKind, PerturbationTerm, PhiModel};
use phi_heat::heatspace::{DecayModel, Regime, RegimeThresholds};
use phi_heat::schauder::BenchGrid;
use phi_heat::solver::TimeScheme;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    GeometryReport,
    StochasticCheck,
    HeatSolve,
    SchauderBench,
    PicardSolve,
    HeatspaceSample,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::GeometryReport => "geometry-report",
            Subcommand::StochasticCheck => "stochastic-check",
            Subcommand::HeatSolve => "heat-solve",
            Subcommand::SchauderBench => "schauder-bench",
            Subcommand::PicardSolve => "picard-solve",
            Subcommand::HeatspaceSample => "heatspace-sample",
        }
    }

    fn sampled(self) -> bool {
        matches!(self, Subcommand::SchauderBench | Subcommand::PicardSolve | Subcommand::HeatspaceSample)
    }
}

// ---- raw file layout ----

#[derive(Debug, Default, Deserialize)]
pub struct RawConfig {
    subcommand: Option<String>,
    seed: Option<u64>,
    out_dir: Option<String>,
    model: Option<RawModel>,
    grid: Option<RawGrid>,
    geometry: Option<RawGeometry>,
    stochastic: Option<RawStochastic>,
    heat: Option<RawHeat>,
    ensemble: Option<RawEnsemble>,
    schauder: Option<RawSchauder>,
    rhs: Option<RawRhs>,
    picard: Option<RawPicard>,
    heatspace: Option<RawHeatspace>,
}

#[derive(Debug, Default, Deserialize)]
struct RawModel {
    kind: Option<ModelKind>,
    b: Option<usize>,
    f: Option<usize>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    #[serde(default)]
    perturbation: Vec<RawTerm>,
}

#[derive(Debug, Deserialize)]
struct RawTerm {
    i: usize,
    j: usize,
    amplitude: f64,
    order: Option<f64>,
    wave: Option<Vec<i32>>,
    phase: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RawGrid {
    n_x: Option<usize>,
    k_max: Option<usize>,
    l_max: Option<usize>,
    t_end: Option<f64>,
    n_t: Option<usize>,
    scheme: Option<TimeScheme>,
}

#[derive(Debug, Default, Deserialize)]
struct RawGeometry {
    n_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct RawStochastic {
    r_max: Option<f64>,
    n_samples: Option<usize>,
    mass_check: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct RawHeat {
    center: Option<f64>,
    width: Option<f64>,
    mode: Option<Vec<i64>>,
    binary: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct RawEnsemble {
    n_functions: Option<usize>,
    roughness: Option<f64>,
    k: Option<usize>,
    alpha: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RawSchauder {
    variant: Option<BenchVariant>,
    n_pairs: Option<usize>,
    refine: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct RawRhs {
    kind: Option<RhsChoice>,
    c: Option<f64>,
    q: Option<f64>,
    forcing_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RawPicard {
    n_x: Option<usize>,
    band: Option<usize>,
    n_t: Option<usize>,
    alpha: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    n_pairs: Option<usize>,
    opnorm: Option<f64>,
    opnorm_members: Option<usize>,
    c_eta: Option<f64>,
    c_eta_pairs: Option<usize>,
    safety: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RawHeatspace {
    regimes: Option<Vec<Regime>>,
    n_per_regime: Option<usize>,
    cutoff: Option<f64>,
    ball: Option<f64>,
    decay: Option<DecayChoice>,
    power_n: Option<i32>,
}

// ---- resolved layout ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchVariant {
    Mapping,
    SqrtTKPlus1,
    TalphaHalfC2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsChoice {
    Affine,
    Quadratic,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayChoice {
    Exponential,
    Power,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridConfig {
    pub n_x: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub t_end: f64,
    pub n_t: usize,
    pub scheme: TimeScheme,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryConfig {
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StochasticConfig {
    pub r_max: f64,
    pub n_samples: usize,
    pub mass_check: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatConfig {
    pub center: f64,
    pub width: f64,
    pub mode: Vec<i64>,
    pub binary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleConfig {
    pub n_functions: usize,
    pub roughness: f64,
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchauderConfig {
    pub variant: BenchVariant,
    pub n_pairs: usize,
    pub refine: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhsConfig {
    pub kind: RhsChoice,
    pub c: f64,
    pub q: f64,
    /// Size of `H f` for the forcing `f`, as a fraction of `η`.
    pub forcing_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardSection {
    pub n_x: usize,
    pub band: usize,
    pub n_t: usize,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_pairs: usize,
    /// `None` means: estimate from an ensemble of `opnorm_members`.
    pub opnorm: Option<f64>,
    pub opnorm_members: usize,
    pub c_eta: Option<f64>,
    pub c_eta_pairs: usize,
    pub safety: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatspaceConfig {
    pub regimes: Vec<Regime>,
    pub n_per_regime: usize,
    pub thresholds: RegimeThresholds,
    pub decay: DecayModel,
}

/// Fully resolved run. Sections not used by the subcommand are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub seed: Option<u64>,
    pub out_dir: String,
    pub model: PhiModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<StochasticConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat: Option<HeatConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schauder: Option<SchauderConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<RhsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatspace: Option<HeatspaceConfig>,
}

pub const DEFAULT_OUT: &str = "phi-heat-out";

/// Parses TOML text, rejecting any key the layout does not know.
pub fn parse(text: &str) -> Result<RawConfig, CliError> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::new(text);
    let raw: RawConfig = serde_ignored::deserialize(de, |path| {
        // optional sections show up as `?` segments
        let p = path.to_string();
        unknown.push(p.split('.').filter(|s| *s != "?").collect::<Vec<_>>().join("."));
    })
        .map_err(|e| CliError::Validation(e.to_string().trim().to_string()))?;
    if !unknown.is_empty() {
        return Err(CliError::Validation(format!("unknown key(s): {}", unknown.join(", "))));
    }
    Ok(raw)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RawModel {
    fn resolve(self) -> Result<PhiModel, CliError> {
        let kind = self.kind.ok_or_else(|| invalid("missing required key `model.kind`"))?;
        let b = self.b.ok_or_else(|| invalid("missing required key `model.b`"))?;
        let f = match (kind, self.f) {
            (_, Some(f)) => f,
            (ModelKind::EuclideanRadial, None) => 0,
            (_, None) => return Err(invalid("missing required key `model.f`")),
        };
        let terms = self
            .perturbation
            .into_iter()
            .map(|t| PerturbationTerm {
                i: t.i,
                j: t.j,
                amplitude: t.amplitude,
                order: t.order.unwrap_or(1.0),
                wave: t.wave.unwrap_or_default(),
                phase: t.phase.unwrap_or(0.0),
            })
            .collect();
        let model = PhiModel {
            kind,
            b,
            f,
            x_min: self.x_min.unwrap_or(PhiModel::DEFAULT_X_MIN),
            x_max: self.x_max.unwrap_or(1.0),
            perturbation: terms,
        };
        model.validate().map_err(|e| invalid(format!("model: {e}")))?;
        Ok(model)
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("`{name}` must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(format!("`{name}` must be at least {min}, got {v}")))
    }
}

impl RawConfig {
    pub fn resolve(self, out_override: Option<String>) -> Result<RunConfig, CliError> {
        let sub = match self.subcommand.as_deref() {
            None => return Err(invalid("missing required key `subcommand`")),
            Some(s) => Subcommand::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s))
                .map_err(|_| {
                    invalid(format!(
                        "`subcommand` = \"{s}\" is not one of geometry-report, stochastic-check, heat-solve, \
                         schauder-bench, picard-solve, heatspace-sample"
                    ))
                })?,
        };
        if sub.sampled() && self.seed.is_none() {
            return Err(invalid(format!("`seed` is required for {}", sub.name())));
        }
        let model = self
            .model
            .ok_or_else(|| invalid(format!("missing section [model] required by {}", sub.name())))?
            .resolve()?;
        let out_dir = out_override.or(self.out_dir).unwrap_or_else(|| DEFAULT_OUT.to_string());
        let mut cfg = RunConfig {
            subcommand: sub,
            seed: self.seed,
            out_dir,
            model,
            grid: None,
            geometry: None,
            stochastic: None,
            heat: None,
            ensemble: None,
            schauder: None,
            rhs: None,
            picard: None,
            heatspace: None,
        };
        let raw_grid = self.grid.unwrap_or_default();
        match sub {
            Subcommand::GeometryReport => {
                let g = self.geometry.unwrap_or_default();
                cfg.geometry = Some(GeometryConfig {
                    n_points: at_least("geometry.n_points", g.n_points.unwrap_or(9), 2)?,
                });
            }
            Subcommand::StochasticCheck => {
                let s = self.stochastic.unwrap_or_default();
                let st = StochasticConfig {
                    r_max: s.r_max.unwrap_or(1e4),
                    n_samples: at_least("stochastic.n_samples", s.n_samples.unwrap_or(32), 4)?,
                    mass_check: s.mass_check.unwrap_or(true),
                };
                if !(st.r_max > 1.0) {
                    return Err(invalid(format!("`stochastic.r_max` must exceed 1, got {}", st.r_max)));
                }
                if st.mass_check {
                    cfg.grid = Some(resolve_grid(raw_grid, 96, 0.5, 51)?);
                    cfg.heat = Some(resolve_heat(self.heat.unwrap_or_default(), &cfg.model)?);
                }
                cfg.stochastic = Some(st);
            }
            Subcommand::HeatSolve => {
                cfg.grid = Some(resolve_grid(raw_grid, 128, 0.1, 51)?);
                cfg.heat = Some(resolve_heat(self.heat.unwrap_or_default(), &cfg.model)?);
            }
            Subcommand::SchauderBench => {
                let d = BenchGrid::default();
                let mut g = resolve_grid(raw_grid, d.n_x, d.t_end, d.n_t)?;
                g.k_max = g.k_max.max(1);
                g.scheme = TimeScheme::BackwardEuler;
                cfg.grid = Some(g);
                cfg.ensemble = Some(resolve_ensemble(self.ensemble.unwrap_or_default())?);
                let s = self.schauder.unwrap_or_default();
                cfg.schauder = Some(SchauderConfig {
                    variant: s.variant.unwrap_or(BenchVariant::Mapping),
                    n_pairs: at_least("schauder.n_pairs", s.n_pairs.unwrap_or(2000), 10)?,
                    refine: s.refine.unwrap_or(false),
                });
            }
            Subcommand::PicardSolve => {
                let r = self.rhs.unwrap_or_default();
                cfg.rhs = Some(RhsConfig {
                    kind: r.kind.unwrap_or(RhsChoice::Combined),
                    c: r.c.unwrap_or(0.1),
                    q: r.q.unwrap_or(0.5),
                    forcing_fraction: positive("rhs.forcing_fraction", r.forcing_fraction.unwrap_or(0.1))?,
                });
                let p = self.picard.unwrap_or_default();
                let alpha = p.alpha.unwrap_or(0.5);
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(invalid(format!("`picard.alpha` must lie in (0, 1), got {alpha}")));
                }
                cfg.picard = Some(PicardSection {
                    n_x: at_least("picard.n_x", p.n_x.unwrap_or(64), 32)?,
                    band: p.band.unwrap_or(2),
                    n_t: at_least("picard.n_t", p.n_t.unwrap_or(129), 3)?,
                    alpha,
                    tol: positive("picard.tol", p.tol.unwrap_or(1e-6))?,
                    max_iter: at_least("picard.max_iter", p.max_iter.unwrap_or(100), 1)?,
                    n_pairs: at_least("picard.n_pairs", p.n_pairs.unwrap_or(2000), 10)?,
                    opnorm: p.opnorm.map(|v| positive("picard.opnorm", v)).transpose()?,
                    opnorm_members: at_least("picard.opnorm_members", p.opnorm_members.unwrap_or(20), 1)?,
                    c_eta: p.c_eta.map(|v| positive("picard.c_eta", v)).transpose()?,
                    c_eta_pairs: at_least("picard.c_eta_pairs", p.c_eta_pairs.unwrap_or(100), 1)?,
                    safety: positive("picard.safety", p.safety.unwrap_or(1.5))?,
                });
            }
            Subcommand::HeatspaceSample => {
                let h = self.heatspace.unwrap_or_default();
                let th = RegimeThresholds {
                    cutoff: positive("heatspace.cutoff", h.cutoff.unwrap_or(RegimeThresholds::default().cutoff))?,
                    ball: positive("heatspace.ball", h.ball.unwrap_or(RegimeThresholds::default().ball))?,
                };
                let decay = match h.decay.unwrap_or(DecayChoice::Exponential) {
                    DecayChoice::Exponential => DecayModel::Exponential,
                    DecayChoice::Power => DecayModel::Power {
                        n: h.power_n.unwrap_or(20),
                    },
                };
                cfg.heatspace = Some(HeatspaceConfig {
                    regimes: h.regimes.unwrap_or_else(|| Regime::ALL.to_vec()),
                    n_per_regime: at_least("heatspace.n_per_regime", h.n_per_regime.unwrap_or(50), 1)?,
                    thresholds: th,
                    decay,
                });
            }
        }
        Ok(cfg)
    }
}

fn resolve_grid(g: RawGrid, n_x: usize, t_end: f64, n_t: usize) -> Result<GridConfig, CliError> {
    Ok(GridConfig {
        n_x: at_least("grid.n_x", g.n_x.unwrap_or(n_x), 32)?,
        k_max: g.k_max.unwrap_or(2),
        l_max: g.l_max.unwrap_or(1),
        t_end: positive("grid.t_end", g.t_end.unwrap_or(t_end))?,
        n_t: at_least("grid.n_t", g.n_t.unwrap_or(n_t), 2)?,
        scheme: g.scheme.unwrap_or_default(),
    })
}

fn resolve_heat(h: RawHeat, model: &PhiModel) -> Result<HeatConfig, CliError> {
    let center = h.center.unwrap_or(0.5 * (model.x_min + model.x_max));
    if !(center > model.x_min && center < model.x_max) {
        return Err(invalid(format!(
            "`heat.center` = {center} must lie inside the collar ({}, {})",
            model.x_min, model.x_max
        )));
    }
    let mode = h.mode.unwrap_or_else(|| vec![0; model.angular_dims()]);
    if mode.len() != model.angular_dims() {
        return Err(invalid(format!(
            "`heat.mode` has {} entries, the model has {} angles",
            mode.len(),
            model.angular_dims()
        )));
    }
    Ok(HeatConfig {
        center,
        width: positive("heat.width", h.width.unwrap_or(0.05 * (model.x_max - model.x_min)))?,
        mode,
        binary: h.binary.unwrap_or(true),
    })
}

fn resolve_ensemble(e: RawEnsemble) -> Result<EnsembleConfig, CliError> {
    let alpha = e.alpha.unwrap_or(0.5);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("`ensemble.alpha` must lie in (0, 1), got {alpha}")));
    }
    Ok(EnsembleConfig {
        n_functions: at_least("ensemble.n_functions", e.n_functions.unwrap_or(20), 1)?,
        roughness: positive("ensemble.roughness", e.roughness.unwrap_or(0.5))?,
        k: e.k.unwrap_or(0),
        alpha,
        gamma: e.gamma.unwrap_or(0.0),
    })
}
