//! The four shipped example models, with parameter provenance.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{DynamicsConfig, InitialConfig, ModeCoefficients, ModelConfig};
use crate::engine::{simulate, ModelSpec};
use crate::error::{Result, SimError};
use crate::functionals::{FunctionalTerm, JumpSign};
use crate::io::{audit_csv, indicators_csv, path_csv, write_run, RunManifest, PLOT_SCRIPT};
use crate::kernel::{
    CurvePiece, CurveShape, IntensitySpec, LogitEntry, RateEntry, RateExpr, WeightedTerm,
};
use crate::micro::{AffineMode, MicroKind};
use crate::noise::{generate_tape, CompoundPoissonSpec};
use crate::path::HybridPath;
use crate::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Insurance,
    Reliability,
    LevyFinancial,
    Reinforcement,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Insurance,
        ScenarioId::Reliability,
        ScenarioId::LevyFinancial,
        ScenarioId::Reinforcement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Insurance => "insurance",
            ScenarioId::Reliability => "reliability",
            ScenarioId::LevyFinancial => "levy_financial",
            ScenarioId::Reinforcement => "reinforcement",
        }
    }
}

impl FromStr for ScenarioId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insurance" => Ok(ScenarioId::Insurance),
            "reliability" => Ok(ScenarioId::Reliability),
            "levy_financial" | "levy" => Ok(ScenarioId::LevyFinancial),
            "reinforcement" => Ok(ScenarioId::Reinforcement),
            other => Err(SimError::config(format!(
                "unknown scenario `{other}` (expected insurance, reliability, levy_financial, reinforcement)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the source model description.
    Published,
    /// Follows from published values by a short derivation.
    Derived,
    /// Not given in the source; chosen here.
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
}

/// A named functional reported in the indicators file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub term: FunctionalTerm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub model: ModelConfig,
    pub parameters: Vec<Parameter>,
    pub default_horizon: f64,
    pub indicators: Vec<Indicator>,
}

/// `(scenario, parameter, value)` for every value taken from the source model description.
pub const PUBLISHED_VALUES: &[(&str, &str, f64)] = &[
    ("insurance", "mu0_slope", 0.08),
    ("insurance", "mu0_offset", 0.02),
    ("insurance", "sigma0", 0.08),
    ("insurance", "mu1_slope", -0.03),
    ("insurance", "mu1_offset", 0.01),
    ("insurance", "sigma1", 0.20),
    ("insurance", "alpha01", 0.2),
    ("insurance", "beta01", -0.5),
    ("insurance", "gamma01", 3.0),
    ("insurance", "alpha10", 0.3),
    ("insurance", "beta10", 2.0),
    ("insurance", "gamma10", -2.0),
    ("insurance", "barrier", 1.0),
    ("insurance", "window", 1.0),
    ("insurance", "drawdown_threshold", 0.25),
    ("insurance", "x0", 0.9),
    ("insurance", "horizon", 10.0),
    ("reliability", "q01_early_scale", 1.5),
    ("reliability", "q01_early_rate", -3.0),
    ("reliability", "q01_early_end", 0.5),
    ("reliability", "q01_flat", 0.2),
    ("reliability", "q01_wear_start", 5.0),
    ("reliability", "q01_wear_slope", 0.3),
    ("reliability", "q10_intercept", 0.3),
    ("reliability", "q10_slope", 0.25),
    ("reliability", "rate_cap", 2.0),
    ("reliability", "lambda", 2.0),
    ("reliability", "horizon", 15.0),
    ("levy_financial", "mu0_slope", 0.15),
    ("levy_financial", "mu1_slope", -0.10),
    ("levy_financial", "sigma", 1.0),
    ("levy_financial", "jump_coefficient_slope", 1.0),
    ("levy_financial", "jump_threshold", 0.15),
    ("levy_financial", "window", 1.0),
    ("levy_financial", "q01_base", 0.1),
    ("levy_financial", "q01_crash", 0.8),
    ("levy_financial", "q10_base", 0.1),
    ("levy_financial", "q10_rally", 0.6),
    ("levy_financial", "rate_cap", 2.0),
    ("levy_financial", "horizon", 10.0),
    ("reinforcement", "theta01_base", 0.0),
    ("reinforcement", "theta01_cnt", 0.25),
    ("reinforcement", "theta01_loc", -0.005),
    ("reinforcement", "theta10_base", 0.2),
    ("reinforcement", "theta10_cnt", 0.20),
    ("reinforcement", "theta10_loc", -0.008),
    ("reinforcement", "lambda", 2.0),
    ("reinforcement", "horizon", 20.0),
];

fn param(name: &str, value: f64, provenance: Provenance) -> Parameter {
    Parameter {
        name: name.to_owned(),
        value,
        provenance,
    }
}

fn w(coef: f64, term: FunctionalTerm) -> WeightedTerm {
    WeightedTerm { coef, term }
}

fn affine(from: Mode, to: Mode, terms: Vec<WeightedTerm>, floor_zero: bool, cap: Option<f64>) -> RateEntry {
    RateEntry {
        from,
        to,
        expr: RateExpr::Affine { terms },
        floor_zero,
        cap_per_time: cap,
    }
}

fn mode_coeffs(mode: Mode, coefficients: AffineMode) -> ModeCoefficients {
    ModeCoefficients { mode, coefficients }
}

impl Scenario {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        self.model.build()
    }

    /// Published-flagged parameters that disagree with [`PUBLISHED_VALUES`] or are missing from it.
    pub fn provenance_mismatches(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for p in self.parameters.iter().filter(|p| p.provenance == Provenance::Published) {
            match PUBLISHED_VALUES
                .iter()
                .find(|(s, n, _)| *s == self.id.name() && *n == p.name)
            {
                Some(&(_, _, v)) if v == p.value => {}
                Some(&(_, _, v)) => bad.push(format!("{}: {} != {v}", p.name, p.value)),
                None => bad.push(format!("{}: not in the published table", p.name)),
            }
        }
        for &(s, n, _) in PUBLISHED_VALUES.iter().filter(|(s, _, _)| *s == self.id.name()) {
            if !self
                .parameters
                .iter()
                .any(|p| p.name == n && p.provenance == Provenance::Published)
            {
                bad.push(format!("{s}.{n}: table value not flagged as published"));
            }
        }
        bad
    }

    /// Indicator values at `t`: every named functional, then the rates out of every mode.
    pub fn indicator_values(&self, model: &ModelSpec, path: &HybridPath, t: f64) -> Result<Vec<f64>> {
        let mut vals = Vec::with_capacity(self.indicators.len() + 2);
        for ind in &self.indicators {
            vals.push(ind.term.evaluate(path, t)?);
        }
        for (from, to) in rate_pairs(&model.intensity) {
            let row = model.intensity.rates_for_mode(from, t, path, model.lambda)?;
            vals.push(row.rate(to));
        }
        Ok(vals)
    }

    pub fn indicator_names(&self, model: &ModelSpec) -> Vec<String> {
        self.indicators
            .iter()
            .map(|i| i.name.clone())
            .chain(rate_pairs(&model.intensity).into_iter().map(|(a, b)| format!("q_{a}_{b}")))
            .collect()
    }

    /// Indicator rows at every distinct time of the path table.
    pub fn indicator_rows(&self, model: &ModelSpec, path: &HybridPath) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut times = path.table().times;
        times.dedup();
        times
            .into_iter()
            .map(|t| Ok((t, self.indicator_values(model, path, t)?)))
            .collect()
    }
}

fn rate_pairs(spec: &IntensitySpec) -> Vec<(Mode, Mode)> {
    let mut pairs: Vec<(Mode, Mode)> = match spec {
        IntensitySpec::Direct { entries } => entries.iter().map(|e| (e.from, e.to)).collect(),
        IntensitySpec::Softmax { logits } => logits.iter().map(|l| (l.from, l.to)).collect(),
    };
    pairs.sort_unstable();
    pairs
}

/// Regime-switching reserve process driven by occupation time and drawdown.
pub fn build_insurance() -> Scenario {
    use Provenance::*;
    let parameters = vec![
        param("mu0_slope", 0.08, Published),
        param("mu0_offset", 0.02, Published),
        param("sigma0", 0.08, Published),
        param("mu1_slope", -0.03, Published),
        param("mu1_offset", 0.01, Published),
        param("sigma1", 0.20, Published),
        param("alpha01", 0.2, Published),
        param("beta01", -0.5, Published),
        param("gamma01", 3.0, Published),
        param("alpha10", 0.3, Published),
        param("beta10", 2.0, Published),
        param("gamma10", -2.0, Published),
        param("barrier", 1.0, Published),
        param("window", 1.0, Published),
        param("drawdown_threshold", 0.25, Published),
        param("x0", 0.9, Published),
        param("horizon", 10.0, Published),
        // largest attainable rate is 0.3 + 2.0 + 0 = 2.3 and 0.2 + 0 + 3.0 = 3.2
        param("lambda", 4.0, Derived),
    ];
    let occ = FunctionalTerm::Occupation {
        barrier: 1.0,
        window_time: 1.0,
        component: 0,
        prehistory: false,
    };
    let dd = FunctionalTerm::DrawdownIndicator {
        threshold: 0.25,
        component: 0,
    };
    let entries = vec![
        affine(
            0,
            1,
            vec![w(0.2, FunctionalTerm::Constant), w(-0.5, occ.clone()), w(3.0, dd.clone())],
            true,
            None,
        ),
        affine(
            1,
            0,
            vec![w(0.3, FunctionalTerm::Constant), w(2.0, occ.clone()), w(-2.0, dd)],
            true,
            None,
        ),
    ];
    let model = ModelConfig {
        lambda_per_time: 4.0,
        dimension: 1,
        noise_dimension: 1,
        initial: InitialConfig {
            mode: 0,
            position: vec![0.9],
        },
        micro: Some(MicroKind::Euler),
        micro_overrides: vec![],
        compound_poisson: vec![],
        intensity: IntensitySpec::Direct { entries },
        dynamics: DynamicsConfig {
            default: None,
            modes: vec![
                mode_coeffs(
                    0,
                    AffineMode {
                        drift_slope: vec![0.08],
                        drift_offset: vec![0.02],
                        diffusion_offset: vec![0.08],
                        ..AffineMode::default()
                    },
                ),
                mode_coeffs(
                    1,
                    AffineMode {
                        drift_slope: vec![-0.03],
                        drift_offset: vec![0.01],
                        diffusion_offset: vec![0.20],
                        ..AffineMode::default()
                    },
                ),
            ],
        },
    };
    Scenario {
        id: ScenarioId::Insurance,
        model,
        parameters,
        default_horizon: 10.0,
        indicators: vec![
            Indicator {
                name: "occupation".into(),
                term: occ,
            },
            Indicator {
                name: "drawdown".into(),
                term: FunctionalTerm::Drawdown { component: 0 },
            },
        ],
    }
}

/// Two-component system whose replacement hazards depend on component age only.
pub fn build_reliability() -> Scenario {
    use Provenance::*;
    let parameters = vec![
        param("q01_early_scale", 1.5, Published),
        param("q01_early_rate", -3.0, Published),
        param("q01_early_end", 0.5, Published),
        param("q01_flat", 0.2, Published),
        param("q01_wear_start", 5.0, Published),
        param("q01_wear_slope", 0.3, Published),
        param("q10_intercept", 0.3, Published),
        param("q10_slope", 0.25, Published),
        param("rate_cap", 2.0, Published),
        param("lambda", 2.0, Published),
        param("horizon", 15.0, Published),
        param("drift0", -0.02, Default),
        param("drift1", -0.05, Default),
        param("sigma", 0.01, Default),
        param("x0", 1.0, Default),
    ];
    let q01 = RateEntry {
        from: 0,
        to: 1,
        expr: RateExpr::Curve {
            argument: FunctionalTerm::Age,
            pieces: vec![
                CurvePiece {
                    start: 0.0,
                    shape: CurveShape::Exponential { scale: 1.5, rate: -3.0 },
                },
                CurvePiece {
                    start: 0.5,
                    shape: CurveShape::Linear { intercept: 0.2, slope: 0.0 },
                },
                CurvePiece {
                    start: 5.0,
                    shape: CurveShape::Linear { intercept: 0.2, slope: 0.3 },
                },
            ],
        },
        floor_zero: false,
        cap_per_time: Some(2.0),
    };
    let q10 = RateEntry {
        from: 1,
        to: 0,
        expr: RateExpr::Curve {
            argument: FunctionalTerm::Age,
            pieces: vec![CurvePiece {
                start: 0.0,
                shape: CurveShape::Linear { intercept: 0.3, slope: 0.25 },
            }],
        },
        floor_zero: false,
        cap_per_time: Some(2.0),
    };
    let degrade = |drift: f64| AffineMode {
        drift_offset: vec![drift],
        diffusion_offset: vec![0.01],
        ..AffineMode::default()
    };
    let model = ModelConfig {
        lambda_per_time: 2.0,
        dimension: 1,
        noise_dimension: 1,
        initial: InitialConfig {
            mode: 0,
            position: vec![1.0],
        },
        micro: Some(MicroKind::Euler),
        micro_overrides: vec![],
        compound_poisson: vec![],
        intensity: IntensitySpec::Direct {
            entries: vec![q01, q10],
        },
        dynamics: DynamicsConfig {
            default: None,
            modes: vec![mode_coeffs(0, degrade(-0.02)), mode_coeffs(1, degrade(-0.05))],
        },
    };
    Scenario {
        id: ScenarioId::Reliability,
        model,
        parameters,
        default_horizon: 15.0,
        indicators: vec![Indicator {
            name: "age".into(),
            term: FunctionalTerm::Age,
        }],
    }
}

/// Bull/bear asset model whose regime reacts to large relative price jumps.
pub fn build_levy_financial() -> Scenario {
    use Provenance::*;
    let parameters = vec![
        param("mu0_slope", 0.15, Published),
        param("mu1_slope", -0.10, Published),
        param("sigma", 1.0, Published),
        param("jump_coefficient_slope", 1.0, Published),
        param("jump_threshold", 0.15, Published),
        param("window", 1.0, Published),
        param("q01_base", 0.1, Published),
        param("q01_crash", 0.8, Published),
        param("q10_base", 0.1, Published),
        param("q10_rally", 0.6, Published),
        param("rate_cap", 2.0, Published),
        param("horizon", 10.0, Published),
        // both rates are capped at 2.0
        param("lambda", 2.0, Derived),
        param("cp_rate", 0.5, Default),
        param("cp_p_up", 0.4, Default),
        param("cp_mean_up", 0.18, Default),
        param("cp_mean_down", 0.22, Default),
        param("x0", 100.0, Default),
    ];
    let count = |sign| FunctionalTerm::JumpCount {
        threshold: 0.15,
        window_time: 1.0,
        sign,
        relative: true,
        component: 0,
    };
    let entries = vec![
        affine(
            0,
            1,
            vec![w(0.1, FunctionalTerm::Constant), w(0.8, count(JumpSign::Down))],
            false,
            Some(2.0),
        ),
        affine(
            1,
            0,
            vec![w(0.1, FunctionalTerm::Constant), w(0.6, count(JumpSign::Up))],
            false,
            Some(2.0),
        ),
    ];
    let regime = |mu: f64| AffineMode {
        drift_slope: vec![mu],
        diffusion_offset: vec![1.0],
        jump_slope: vec![1.0],
        ..AffineMode::default()
    };
    let model = ModelConfig {
        lambda_per_time: 2.0,
        dimension: 1,
        noise_dimension: 1,
        initial: InitialConfig {
            mode: 0,
            position: vec![100.0],
        },
        micro: Some(MicroKind::JumpEuler),
        micro_overrides: vec![],
        compound_poisson: vec![CompoundPoissonSpec {
            rate_per_time: 0.5,
            p_up: 0.4,
            mean_up: 0.18,
            mean_down: 0.22,
        }],
        intensity: IntensitySpec::Direct { entries },
        dynamics: DynamicsConfig {
            default: None,
            modes: vec![mode_coeffs(0, regime(0.15)), mode_coeffs(1, regime(-0.10))],
        },
    };
    Scenario {
        id: ScenarioId::LevyFinancial,
        model,
        parameters,
        default_horizon: 10.0,
        indicators: vec![
            Indicator {
                name: "n_up".into(),
                term: count(JumpSign::Up),
            },
            Indicator {
                name: "n_down".into(),
                term: count(JumpSign::Down),
            },
        ],
    }
}

/// Production modes with softmax rates reinforced by transition counts.
pub fn build_reinforcement() -> Scenario {
    use Provenance::*;
    let parameters = vec![
        param("theta01_base", 0.0, Published),
        param("theta01_cnt", 0.25, Published),
        param("theta01_loc", -0.005, Published),
        param("theta10_base", 0.2, Published),
        param("theta10_cnt", 0.20, Published),
        param("theta10_loc", -0.008, Published),
        param("lambda", 2.0, Published),
        param("horizon", 20.0, Published),
        param("x0", 0.0, Default),
    ];
    let logits = vec![
        LogitEntry {
            from: 0,
            to: 1,
            terms: vec![
                w(0.0, FunctionalTerm::Constant),
                w(0.25, FunctionalTerm::Cnt { from: 0, to: 1 }),
                w(-0.005, FunctionalTerm::Loc { mode: 0 }),
            ],
        },
        LogitEntry {
            from: 1,
            to: 0,
            terms: vec![
                w(0.2, FunctionalTerm::Constant),
                w(0.20, FunctionalTerm::Cnt { from: 1, to: 0 }),
                w(-0.008, FunctionalTerm::Loc { mode: 1 }),
            ],
        },
    ];
    let model = ModelConfig {
        lambda_per_time: 2.0,
        dimension: 1,
        noise_dimension: 0,
        initial: InitialConfig {
            mode: 0,
            position: vec![0.0],
        },
        micro: Some(MicroKind::Euler),
        micro_overrides: vec![],
        compound_poisson: vec![],
        intensity: IntensitySpec::Softmax { logits },
        dynamics: DynamicsConfig {
            default: Some(AffineMode::default()),
            modes: vec![],
        },
    };
    Scenario {
        id: ScenarioId::Reinforcement,
        model,
        parameters,
        default_horizon: 20.0,
        indicators: vec![
            Indicator {
                name: "loc_0".into(),
                term: FunctionalTerm::Loc { mode: 0 },
            },
            Indicator {
                name: "loc_1".into(),
                term: FunctionalTerm::Loc { mode: 1 },
            },
            Indicator {
                name: "cnt_0_1".into(),
                term: FunctionalTerm::Cnt { from: 0, to: 1 },
            },
            Indicator {
                name: "cnt_1_0".into(),
                term: FunctionalTerm::Cnt { from: 1, to: 0 },
            },
        ],
    }
}

pub fn build(id: ScenarioId) -> Scenario {
    match id {
        ScenarioId::Insurance => build_insurance(),
        ScenarioId::Reliability => build_reliability(),
        ScenarioId::LevyFinancial => build_levy_financial(),
        ScenarioId::Reinforcement => build_reinforcement(),
    }
}

/// One scenario run as requested on the command line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub seed: u64,
    pub horizon_time: f64,
    pub level: usize,
}

/// Simulate one path and write `path.csv`, `audit.csv`, `indicators.csv`,
/// `plot.py`, and `manifest.json` into `outdir`.
pub fn run_scenario(run: &ScenarioRun, outdir: &Path) -> Result<Vec<PathBuf>> {
    let model = run.scenario.model_spec()?;
    let tape = generate_tape(run.seed, 0, &model.tape_spec(run.horizon_time, run.level))?;
    let out = simulate(&model, run.horizon_time, run.level, &tape)?;
    let names = run.scenario.indicator_names(&model);
    let rows = run.scenario.indicator_rows(&model, &out.path)?;
    let files = vec![
        ("path.csv", path_csv(&out.path).into_bytes()),
        ("audit.csv", audit_csv(&out.audit).into_bytes()),
        ("indicators.csv", indicators_csv(&names, &rows).into_bytes()),
        ("plot.py", PLOT_SCRIPT.as_bytes().to_vec()),
    ];
    let manifest = RunManifest::new("scenario", run, run.seed)?;
    write_run(outdir, &files, manifest)
}
