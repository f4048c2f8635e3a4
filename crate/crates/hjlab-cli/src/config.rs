//! JSON experiment configurations and the builders that turn them into
//! library objects. Every structure rejects unknown keys, so a typo cannot
//! silently fall back to a default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hjlab::effective::{
    cell_closed_form, two_noise_effective, EffectiveTable, Provenance, WalshDecomposition,
};
use hjlab::fields::{FieldLaw, StepField};
use hjlab::hamiltonians::{GradPart, HamiltonianSpec, NonconvexF, ScalarFunction, Term};
use hjlab::hjsolver::{Boundary, GridFunction};

use crate::{CResult, CliError};

pub fn read_config<T: for<'de> Deserialize<'de>>(
    path: Option<&Path>,
    command: &str,
) -> CResult<T> {
    let path = path.ok_or_else(|| {
        CliError::Config(format!("the {command} command needs --config <file.json>"))
    })?;
    parse_config(path)
}

/// Commands that run fine on defaults (verify) take the config as optional.
pub fn read_config_or_default<T: for<'de> Deserialize<'de> + Default>(
    path: Option<&Path>,
) -> CResult<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => parse_config(path),
    }
}

fn parse_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))
}

/// 1-periodic potential `f(y)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `V_s`: up with slope `1/s`, down with slope `1/(1-s)`.
    Sawtooth { s: f64 },
    /// `(1 + cos 2 pi y) / 2`.
    CosineBump,
    Constant { c: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> CResult<ScalarFunction> {
        Ok(match self {
            PotentialConfig::Sawtooth { s } => {
                if !(0.0 < *s && *s < 1.0) {
                    return Err(CliError::Config(format!(
                        "sawtooth parameter must lie in (0,1), got {s}"
                    )));
                }
                ScalarFunction::Sawtooth { s: *s }
            }
            PotentialConfig::CosineBump => ScalarFunction::CosineBump,
            PotentialConfig::Constant { c } => ScalarFunction::Constant { c: *c },
        })
    }
}

/// Even nonconvex flux from its three breakpoints `theta1 > theta2 >
/// theta3 > 0` (heights 1/3, 1/2, 1/3 and a quadratic tail).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Default for FluxConfig {
    fn default() -> Self {
        FluxConfig { theta1: 1.0, theta2: 0.5, theta3: 0.25 }
    }
}

impl FluxConfig {
    pub fn build(&self) -> CResult<NonconvexF> {
        Ok(NonconvexF::new(self.theta1, self.theta2, self.theta3)?)
    }
}

/// Gradient shape for spatially homogeneous models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    AbsValue,
    HalfSquare,
    Linear { slope: f64 },
}

impl ShapeConfig {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            ShapeConfig::AbsValue => p.abs(),
            ShapeConfig::HalfSquare => 0.5 * p * p,
            ShapeConfig::Linear { slope } => slope * p,
        }
    }
}

/// The driven Hamiltonian of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `|Du| dzeta^1 + f(y) dzeta^2`.
    TwoNoiseEikonal { potential: PotentialConfig },
    /// `(|Du| + f(y)) dzeta` (single noise, convex).
    EikonalPotential { potential: PotentialConfig },
    /// `(F(Du) - V_s(y)) dzeta` (single noise, nonconvex flux).
    NonconvexSingleNoise {
        s: f64,
        #[serde(default)]
        flux: FluxConfig,
    },
    /// `g(Du) dzeta` with no spatial dependence.
    XIndependent { shape: ShapeConfig },
}

impl ModelConfig {
    pub fn build(&self) -> CResult<HamiltonianSpec> {
        Ok(match self {
            ModelConfig::TwoNoiseEikonal { potential } => {
                HamiltonianSpec::two_noise_eikonal(potential.build()?)?
            }
            ModelConfig::EikonalPotential { potential } => HamiltonianSpec::new(
                1,
                1,
                vec![
                    Term { coeff: 1.0, grad: GradPart::Eikonal, spatial: None, noise: 0 },
                    Term {
                        coeff: 1.0,
                        grad: GradPart::One,
                        spatial: Some(potential.build()?),
                        noise: 0,
                    },
                ],
            )?,
            ModelConfig::NonconvexSingleNoise { s, flux } => {
                HamiltonianSpec::nonconvex_single_noise(flux.build()?, *s)?
            }
            ModelConfig::XIndependent { shape } => match shape {
                ShapeConfig::AbsValue => {
                    HamiltonianSpec::x_independent(ScalarFunction::AbsValue)?
                }
                ShapeConfig::HalfSquare => {
                    HamiltonianSpec::x_independent(ScalarFunction::HalfSquare)?
                }
                ShapeConfig::Linear { slope } => HamiltonianSpec::new(
                    1,
                    1,
                    vec![Term {
                        coeff: *slope,
                        grad: GradPart::Linear,
                        spatial: None,
                        noise: 0,
                    }],
                )?,
            },
        })
    }

    /// Coefficient tables of the limiting equation, one per odd sign
    /// subset, from the model's closed forms. The even residual is zero for
    /// every supported model: the pattern families are odd in the signs.
    pub fn decomposition(&self, p_lo: f64, p_hi: f64, n: usize) -> CResult<WalshDecomposition> {
        let odd = match self {
            ModelConfig::TwoNoiseEikonal { potential } => {
                let f = potential.build()?;
                let h1 = EffectiveTable::from_fn(p_lo, p_hi, n, Provenance::TwoNoise, |p| {
                    two_noise_effective(&f, p).map(|pair| pair.0)
                })?;
                let h2 = EffectiveTable::from_fn(p_lo, p_hi, n, Provenance::TwoNoise, |p| {
                    two_noise_effective(&f, p).map(|pair| pair.1)
                })?;
                vec![(1u32, h1), (2u32, h2)]
            }
            ModelConfig::EikonalPotential { potential } => {
                let f = potential.build()?;
                let h = EffectiveTable::from_fn(p_lo, p_hi, n, Provenance::CellClosedForm, |p| {
                    cell_closed_form(&f, p)
                })?;
                vec![(1u32, h)]
            }
            ModelConfig::XIndependent { shape } => {
                let shape = *shape;
                let h = EffectiveTable::from_fn(p_lo, p_hi, n, Provenance::CellClosedForm, |p| {
                    Ok(shape.eval(p))
                })?;
                vec![(1u32, h)]
            }
            ModelConfig::NonconvexSingleNoise { .. } => {
                return Err(CliError::Config(
                    "the nonconvex single-noise model drifts ballistically and has no \
                     centered limiting decomposition; use the ballistic experiment"
                        .into(),
                ))
            }
        };
        let m = match self {
            ModelConfig::TwoNoiseEikonal { .. } => 2,
            _ => 1,
        };
        Ok(WalshDecomposition { m, odd, even_residual: 0.0 })
    }
}

/// Spatial grid for initial data.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// `n` nodes on the unit torus.
    Torus { n: usize },
    /// `n` nodes from `origin` with spacing `dx`, extended past the ends
    /// with slopes capped at `slope_bound`.
    Line { origin: f64, dx: f64, n: usize, slope_bound: f64 },
}

impl GridConfig {
    pub fn build(&self, data: &DataConfig) -> CResult<GridFunction> {
        let f = data.closure()?;
        match self {
            GridConfig::Torus { n } => {
                if *n < 8 {
                    return Err(CliError::Config("torus grid needs at least 8 nodes".into()));
                }
                if !data.periodic() {
                    return Err(CliError::Config(
                        "initial data is not 1-periodic; use a line grid".into(),
                    ));
                }
                Ok(GridFunction::torus_line(*n, |x| f(x)))
            }
            GridConfig::Line { origin, dx, n, slope_bound } => {
                if !(*dx > 0.0) || *n < 2 {
                    return Err(CliError::Config(
                        "line grid needs dx > 0 and at least 2 nodes".into(),
                    ));
                }
                if !(*slope_bound >= 0.0) {
                    return Err(CliError::Config("slope_bound must be nonnegative".into()));
                }
                Ok(GridFunction::line(
                    *origin,
                    *dx,
                    *n,
                    Boundary::LipschitzExtend { slope_bound: *slope_bound },
                    |x| f(x),
                ))
            }
        }
    }
}

/// Initial datum `u0(x)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Zero,
    /// `amplitude * sin(2 pi periods x)`.
    SineWave { amplitude: f64, periods: f64 },
    /// `|x|`.
    AbsKink,
    /// `min(|x|, cap)`.
    CappedAbs { cap: f64 },
    /// `slope * x`.
    Affine { slope: f64 },
}

impl DataConfig {
    pub fn closure(&self) -> CResult<Box<dyn Fn(f64) -> f64>> {
        Ok(match *self {
            DataConfig::Zero => Box::new(|_| 0.0),
            DataConfig::SineWave { amplitude, periods } => {
                if !(periods > 0.0) {
                    return Err(CliError::Config("sine data needs periods > 0".into()));
                }
                Box::new(move |x| amplitude * (std::f64::consts::TAU * periods * x).sin())
            }
            DataConfig::AbsKink => Box::new(f64::abs),
            DataConfig::CappedAbs { cap } => {
                if !(cap > 0.0) {
                    return Err(CliError::Config("capped data needs cap > 0".into()));
                }
                Box::new(move |x| x.abs().min(cap))
            }
            DataConfig::Affine { slope } => Box::new(move |x| slope * x),
        })
    }

    fn periodic(&self) -> bool {
        match *self {
            DataConfig::Zero => true,
            DataConfig::SineWave { periods, .. } => periods > 0.0 && periods.fract() == 0.0,
            _ => false,
        }
    }
}

/// Law of the driving step field.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    /// Independent signs, uniform on {-1, +1}.
    #[default]
    Rademacher,
    /// Two correlated sign components with `a^2 + b^2 = 2`.
    CorrelatedPair { a: f64, b: f64 },
}

impl LawConfig {
    pub fn field(&self, m: usize, n_steps: usize, seed: u64) -> CResult<StepField> {
        Ok(match self {
            LawConfig::Rademacher => StepField::rademacher(m, n_steps, seed)?,
            LawConfig::CorrelatedPair { a, b } => {
                if m != 2 {
                    return Err(CliError::Config(format!(
                        "the correlated pair law drives exactly 2 components, the model has {m}"
                    )));
                }
                StepField::correlated_pair(*a, *b, n_steps, seed)?
            }
        })
    }

    pub fn law(&self) -> FieldLaw {
        match self {
            LawConfig::Rademacher => FieldLaw::Rademacher,
            LawConfig::CorrelatedPair { a, b } => FieldLaw::CorrelatedPair { a: *a, b: *b },
        }
    }
}

fn default_p_lo() -> f64 {
    -3.0
}
fn default_p_hi() -> f64 {
    3.0
}
fn default_table_n() -> usize {
    241
}
fn default_check_points() -> usize {
    9
}
fn default_cell_n() -> usize {
    512
}
fn default_t1() -> f64 {
    20.0
}
fn default_t2() -> f64 {
    40.0
}
fn default_tol_scale() -> f64 {
    1.0
}
fn default_horizon() -> f64 {
    1.0
}
fn default_snapshots() -> usize {
    8
}
fn default_profile_samples() -> usize {
    512
}
fn default_corrector_p_count() -> usize {
    9
}
fn default_ode_tol() -> f64 {
    1e-8
}
fn default_mean_tol() -> f64 {
    1e-8
}
fn default_trials() -> usize {
    200
}
fn default_s_battery() -> Vec<f64> {
    vec![0.2, 0.35, 0.5, 0.65, 0.8]
}
fn default_p_count() -> usize {
    50
}
fn default_dt_split() -> f64 {
    0.05
}
fn default_bm_dt() -> f64 {
    1.0 / 512.0
}
fn default_ref_table_n() -> usize {
    513
}
fn default_margin() -> f64 {
    1.0
}
fn default_n_cell() -> usize {
    128
}
fn default_rate_gamma() -> f64 {
    0.25
}
fn default_half_width() -> f64 {
    2.0
}
fn default_slope_bound() -> f64 {
    2.0
}
fn default_gap_horizon() -> f64 {
    0.5
}
fn default_ballistic_snapshots() -> usize {
    16
}

/// `effective`: tabulate closed-form effective Hamiltonians.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    pub family: EffectiveFamily,
    #[serde(default = "default_p_lo")]
    pub p_lo: f64,
    #[serde(default = "default_p_hi")]
    pub p_hi: f64,
    /// Table nodes.
    #[serde(default = "default_table_n")]
    pub n: usize,
    /// Settings for --check comparisons against long-time cell solves.
    #[serde(default)]
    pub check: CheckConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectiveFamily {
    /// `max(max f, |p| + mean f)`, the forced-eikonal cell value.
    EikonalCell { potential: PotentialConfig },
    /// The coefficient pair of the two-noise eikonal model.
    TwoNoise { potential: PotentialConfig },
    /// The nonconvex sawtooth family, one table per `s`.
    Sawtooth {
        s_values: Vec<f64>,
        #[serde(default)]
        flux: FluxConfig,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Gradient points compared, equally spaced over the table window.
    #[serde(default = "default_check_points")]
    pub points: usize,
    /// Cell grid nodes per period.
    #[serde(default = "default_cell_n")]
    pub n_cell: usize,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_t2")]
    pub t2: f64,
    /// Multiplies the grid-resolution part of the check tolerance.
    #[serde(default = "default_tol_scale")]
    pub tol_scale: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            points: default_check_points(),
            n_cell: default_cell_n(),
            t1: default_t1(),
            t2: default_t2(),
            tol_scale: default_tol_scale(),
        }
    }
}

/// `corrector`: build explicit corrector profiles and verify them.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorConfig {
    #[serde(default = "default_s_battery")]
    pub s_values: Vec<f64>,
    /// Explicit gradient list; when omitted, `p_count` points spanning the
    /// regime range of each `s` are used.
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
    #[serde(default = "default_corrector_p_count")]
    pub p_count: usize,
    #[serde(default)]
    pub flux: FluxConfig,
    /// Sample count for each exported gradient profile.
    #[serde(default = "default_profile_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tolerances: CorrectorTolerances,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorTolerances {
    #[serde(default = "default_ode_tol")]
    pub ode_residual: f64,
    #[serde(default = "default_mean_tol")]
    pub mean_gradient: f64,
}

impl Default for CorrectorTolerances {
    fn default() -> Self {
        CorrectorTolerances {
            ode_residual: default_ode_tol(),
            mean_gradient: default_mean_tol(),
        }
    }
}

/// `simulate`: one realization of the rescaled problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub epsilon: f64,
    pub gamma: f64,
    /// Needed in snapshot mode; the ballistic mode brings its own cell.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_snapshots")]
    pub n_snapshots: usize,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SimulateMode,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateMode {
    /// Full profiles at the snapshot times.
    #[default]
    Snapshots,
    /// `eps^gamma u(0, t)` probes from one stretched cell with affine data
    /// `p0 x`; nonconvex single-noise models only.
    Ballistic {
        p0: f64,
        #[serde(default = "default_n_cell")]
        n_cell: usize,
    },
}

/// `ensemble`: many realizations, probe statistics, optional comparison
/// against samples of the limiting equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleRunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub law: LawConfig,
    pub epsilon: f64,
    pub gamma: f64,
    pub grid: GridConfig,
    pub data: DataConfig,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub n_samples: usize,
    pub probes: Vec<ProbeConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub x: f64,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Splitting window of the limit-equation solver.
    #[serde(default = "default_dt_split")]
    pub dt_split: f64,
    /// Brownian increment spacing.
    #[serde(default = "default_bm_dt")]
    pub bm_dt: f64,
    /// Sample count; defaults to the ensemble's own.
    #[serde(default)]
    pub n_samples: Option<usize>,
    /// Coefficient table resolution.
    #[serde(default = "default_ref_table_n")]
    pub table_n: usize,
    /// Gradient window padding beyond the data's own range.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            dt_split: default_dt_split(),
            bm_dt: default_bm_dt(),
            n_samples: None,
            table_n: default_ref_table_n(),
            margin: default_margin(),
        }
    }
}

/// `rate`: error decay across an epsilon list, with an optional gate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub experiment: RateExperiment,
    #[serde(default)]
    pub require: RequireConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateExperiment {
    /// Sup distance between the rescaled solve and the frozen intermediate
    /// equation driven by the same field, per epsilon. Line grids on
    /// `[-half_width, half_width]` refined to `dx <= epsilon / 64`.
    HomogGap {
        model: ModelConfig,
        gamma: f64,
        epsilons: Vec<f64>,
        data: DataConfig,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_slope_bound")]
        slope_bound: f64,
        #[serde(default = "default_gap_horizon")]
        horizon: f64,
        #[serde(default = "default_snapshots")]
        n_snapshots: usize,
        #[serde(default = "default_ref_table_n")]
        table_n: usize,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    /// `sup_t |eps^gamma u(0, t) - cbar t|` from the stretched-cell affine
    /// solve of the nonconvex single-noise model.
    Ballistic {
        s: f64,
        #[serde(default)]
        flux: FluxConfig,
        /// Mean gradient; when omitted, the midpoint of the drifting regime.
        #[serde(default)]
        p0: Option<f64>,
        #[serde(default = "default_rate_gamma")]
        gamma: f64,
        epsilons: Vec<f64>,
        #[serde(default = "default_n_cell")]
        n_cell: usize,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_ballistic_snapshots")]
        n_snapshots: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequireConfig {
    /// Fail (exit 2) when the fitted exponent drops below this.
    #[serde(default)]
    pub min_exponent: Option<f64>,
    /// Fail (exit 2) unless the errors decrease strictly with epsilon.
    #[serde(default)]
    pub monotone: bool,
}

/// `verify`: randomized invariant suites.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sawtooth parameters for the corrector battery.
    #[serde(default = "default_s_battery")]
    pub s_values: Vec<f64>,
    /// Gradient points per parameter in the corrector battery.
    #[serde(default = "default_p_count")]
    pub p_count: usize,
    #[serde(default)]
    pub flux: FluxConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: default_trials(),
            seed: 0,
            s_values: default_s_battery(),
            p_count: default_p_count(),
            flux: FluxConfig::default(),
        }
    }
}
