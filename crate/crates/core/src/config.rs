//! TOML run configuration.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::column::{build_column, Layer, Material, MeshSpec};
use crate::error::ModelError;
use crate::katzenelson::SolverConfig;
use crate::scenario::{InitialCondition, Scenario, SurfaceBc};
use crate::stepper::{GuardPolicy, StepperConfig};
use crate::studies::{NeumannBenchmark, StressConfig, DAY};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("unknown material preset `{0}`")]
    UnknownPreset(String),
    #[error("missing section [{0}]")]
    Missing(&'static str),
    #[error("scheme `{scheme}` cannot be used for {study}")]
    SchemeStudy { scheme: &'static str, study: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Time discretization family selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    BackwardEuler,
    CrankNicolson,
    DecpImplicit,
    DecpExplicit,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Explicit,
        Scheme::BackwardEuler,
        Scheme::CrankNicolson,
        Scheme::DecpImplicit,
        Scheme::DecpExplicit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::BackwardEuler => "backward-euler",
            Scheme::CrankNicolson => "crank-nicolson",
            Scheme::DecpImplicit => "decp-implicit",
            Scheme::DecpExplicit => "decp-explicit",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    /// θ of the time discretization (the implicit DECP variant uses Crank–Nicolson).
    pub fn theta(self) -> f64 {
        match self {
            Scheme::Explicit | Scheme::DecpExplicit => 0.0,
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson | Scheme::DecpImplicit => 0.5,
        }
    }

    pub fn is_decp(self) -> bool {
        matches!(self, Scheme::DecpImplicit | Scheme::DecpExplicit)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Preset(String),
    Explicit(Material),
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<Material, ConfigError> {
        match self {
            MaterialSpec::Explicit(m) => Ok(*m),
            MaterialSpec::Preset(name) if name == "permafrost_benchmark" => Ok(Material::PERMAFROST_BENCHMARK),
            MaterialSpec::Preset(name) => Err(ConfigError::UnknownPreset(name.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    /// m
    pub thickness: f64,
    pub material: MaterialSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub mesh: MeshSpec,
    pub layers: Vec<LayerConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub enthalpy_scale: f64,
    pub max_iterations: Option<usize>,
    pub seed: u64,
    pub fast_path: bool,
    pub predictor: bool,
    pub explicit_safety: f64,
    pub guard: Guard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    #[default]
    Fail,
    Warn,
}

impl Default for SolverSection {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let stepper = StepperConfig::default();
        SolverSection {
            tol_rel: solver.tol_rel,
            tol_abs: solver.tol_abs,
            enthalpy_scale: solver.enthalpy_scale,
            max_iterations: solver.max_iterations,
            seed: solver.rng_seed,
            fast_path: stepper.fast_path,
            predictor: stepper.predictor,
            explicit_safety: stepper.explicit_safety,
            guard: Guard::Fail,
        }
    }
}

impl SolverSection {
    pub fn stepper_config(&self) -> StepperConfig {
        StepperConfig {
            solver: SolverConfig {
                tol_rel: self.tol_rel,
                tol_abs: self.tol_abs,
                enthalpy_scale: self.enthalpy_scale,
                max_iterations: self.max_iterations,
                rng_seed: self.seed,
                record_trace: false,
            },
            fast_path: self.fast_path,
            predictor: self.predictor,
            explicit_safety: self.explicit_safety,
            guard: match self.guard {
                Guard::Fail => GuardPolicy::Fail,
                Guard::Warn => GuardPolicy::Warn,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Element counts of the doubling ladder.
    pub ladder: Vec<usize>,
    /// Time step on the coarsest rung, s; divided in proportion to the element size.
    pub base_dt: f64,
    pub thetas: Vec<f64>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            ladder: vec![25, 50, 100, 200],
            base_dt: DAY,
            thetas: vec![0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub elements: usize,
    /// s
    pub dt: f64,
    pub theta: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            elements: 100,
            dt: DAY,
            theta: 0.5,
        }
    }
}

/// Benchmark section: the Neumann freezing problem with its material.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub material: MaterialSpec,
    pub depth: f64,
    pub surface_temp: f64,
    pub initial_temp: f64,
    #[serde(default = "default_days")]
    pub days: usize,
    #[serde(default = "default_profile_day")]
    pub profile_day: usize,
    #[serde(default)]
    pub start_day: f64,
}

fn default_days() -> usize {
    20
}

fn default_profile_day() -> usize {
    15
}

/// Whole configuration file. Sections not needed by a command may be omitted.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Option<Scheme>,
    pub column: Option<ColumnConfig>,
    pub surface: Option<SurfaceBc>,
    pub initial: Option<InitialCondition>,
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    pub benchmark: Option<BenchmarkSection>,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub stress: StressConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        RunConfig::from_toml(&text, &shown)
    }

    /// Scenario of the `[column]`, `[surface]`, `[initial]` and `[time]` sections.
    pub fn scenario(&self, scheme: Scheme) -> Result<Scenario, ConfigError> {
        let column = self.column.as_ref().ok_or(ConfigError::Missing("column"))?;
        let layers = column
            .layers
            .iter()
            .map(|l| {
                Ok(Layer {
                    thickness: l.thickness,
                    material: l.material.resolve()?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let time = self.time.as_ref().ok_or(ConfigError::Missing("time"))?;
        let scenario = Scenario {
            column: build_column(&layers, column.mesh)?,
            surface: self.surface.clone().ok_or(ConfigError::Missing("surface"))?,
            initial: self.initial.clone().ok_or(ConfigError::Missing("initial"))?,
            theta: scheme.theta(),
            dt: time.dt,
            duration: time.duration,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// The benchmark of `[benchmark]`, or one inferred from a single-layer
    /// scenario with constant surface and uniform initial temperature.
    pub fn benchmark(&self) -> Result<NeumannBenchmark, ConfigError> {
        if let Some(b) = &self.benchmark {
            return Ok(NeumannBenchmark {
                material: b.material.resolve()?,
                depth: b.depth,
                surface_temp: b.surface_temp,
                initial_temp: b.initial_temp,
                days: b.days,
                profile_day: b.profile_day,
                start_day: b.start_day,
            });
        }
        let column = self.column.as_ref().ok_or(ConfigError::Missing("benchmark"))?;
        if column.layers.len() != 1 {
            return Err(ConfigError::Missing("benchmark"));
        }
        let material = column.layers[0].material.resolve()?;
        let sc = self.scenario(Scheme::CrankNicolson)?;
        crate::studies::NeumannBenchmark::from_scenario(&sc, material).map_err(|_| ConfigError::Missing("benchmark"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN: &str = r#"
scheme = "backward-euler"

[column]
mesh = { kind = "graded", elements = 12, ratio = 1.1 }

[[column.layers]]
thickness = 0.5
material = "permafrost_benchmark"

[[column.layers]]
thickness = 1.5
material = { k_frozen = 2.0, k_mushy = 1.5, k_unfrozen = 1.2, c_frozen = 1.8e6, c_unfrozen = 2.6e6, latent_heat = 6.0e7 }

[surface]
kind = "sinusoid"
mean = -3.0
amplitude = 12.0
period = 31536000.0

[initial]
kind = "profile"
depths = [0.0, 2.0]
temperatures = [1.0, -1.0]

[time]
dt = 86400.0
duration = 864000.0

[solver]
seed = 7
fast_path = false
"#;

    #[test]
    fn parses_run_config() {
        let cfg = RunConfig::from_toml(RUN, "run.toml").unwrap();
        assert_eq!(cfg.scheme, Some(Scheme::BackwardEuler));
        let sc = cfg.scenario(Scheme::BackwardEuler).unwrap();
        assert_eq!(sc.column.elements(), 12);
        assert_eq!(sc.steps(), 10);
        assert_eq!(sc.theta, 1.0);
        let st = cfg.solver.stepper_config();
        assert_eq!(st.solver.rng_seed, 7);
        assert!(!st.fast_path);
        assert_eq!(st.solver.tol_rel, 1e-12);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = RunConfig::from_toml("[time]\ndt = \"x\"\n", "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml") && msg.contains("line 2"), "{msg}");
        assert!(RunConfig::from_toml("[bogus]\n", "b.toml").is_err());
    }

    #[test]
    fn unknown_preset_and_missing_sections() {
        let cfg = RunConfig::from_toml(
            "[column]\nmesh = { kind = \"uniform\", elements = 2 }\n[[column.layers]]\nthickness = 1.0\nmaterial = \"peat\"\n",
            "x",
        )
        .unwrap();
        assert!(matches!(
            cfg.scenario(Scheme::Explicit),
            Err(ConfigError::UnknownPreset(_))
        ));
        assert!(matches!(
            RunConfig::default().scenario(Scheme::Explicit),
            Err(ConfigError::Missing("column"))
        ));
    }

    #[test]
    fn benchmark_inferred_from_single_layer() {
        let text = r#"
[column]
mesh = { kind = "uniform", elements = 50 }
[[column.layers]]
thickness = 5.0
material = "permafrost_benchmark"
[surface]
kind = "constant"
value = -5.0
[initial]
kind = "uniform"
temperature = 2.0
[time]
dt = 86400.0
duration = 1728000.0
"#;
        let b = RunConfig::from_toml(text, "x").unwrap().benchmark().unwrap();
        assert_eq!(b.days, 20);
        assert_eq!(b.depth, 5.0);
        assert_eq!(b.initial_temp, 2.0);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
        assert_eq!(Scheme::parse("rk4"), None);
    }
}
