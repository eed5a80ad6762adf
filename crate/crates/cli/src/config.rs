//! Experiment configuration: one TOML document per run, unknown keys rejected.

use std::path::{Path, PathBuf};

use aqc::annealer::{Sector, SolverSpec};
use aqc::problems::Family;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Gap,
    Evolve,
    Schedule,
    Bounds,
    Compile,
    Gadget,
    Transform,
    Pagerank,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gap => "gap",
            Command::Evolve => "evolve",
            Command::Schedule => "schedule",
            Command::Bounds => "bounds",
            Command::Compile => "compile",
            Command::Gadget => "gadget",
            Command::Transform => "transform",
            Command::Pagerank => "pagerank",
            Command::Bench => "bench",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    /// Run-time grid for `evolve`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_f: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gadget: Option<GadgetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pagerank: Option<PagerankConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn instance(&self) -> Result<&Family, CliError> {
        self.instance.as_ref().ok_or_else(|| CliError::Schema("missing [instance] table".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Linear,
    /// Local adiabatic Grover schedule; `n_states` defaults to 2^n of the instance.
    RolandCerf {
        #[serde(default)]
        n_states: Option<u64>,
    },
    RegBeta { v: u32 },
    /// A′ ∝ Δ(A)^p from the instance gap (analytic when available).
    LocalPower { p: f64 },
    /// Geodesic of the QAB metric; Grover instances only.
    Qab { p: f64 },
}

/// Check thresholds. They only decide which warnings are raised, never the output payloads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub norm_drift: f64,
    pub small_gap: f64,
    pub residual: f64,
    pub leakage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { norm_drift: 1e-9, small_gap: 1e-6, residual: 1e-9, leakage: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelChoice {
    /// E_index − E_0.
    #[default]
    ToLevel,
    AboveDegeneracy,
    Permutation,
    SpinFlipEven,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapConfig {
    pub grid: usize,
    pub refine: bool,
    pub level: LevelChoice,
    pub index: usize,
    pub degeneracy_tau: f64,
    pub levels: usize,
    pub method: MethodChoice,
    pub sector: Sector,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            grid: 201,
            refine: true,
            level: LevelChoice::ToLevel,
            index: 1,
            degeneracy_tau: 1e-8,
            levels: 4,
            method: MethodChoice::Auto,
            sector: Sector::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub steps: Option<usize>,
    /// Instantaneous eigenstates tracked; 0 disables the overlap trace.
    pub track: usize,
    pub samples: usize,
    /// Computational-basis samples of the final state; 0 disables.
    pub shots: usize,
    pub sector: Sector,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { steps: None, track: 2, samples: 101, shots: 0, sector: Sector::Full }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub grid: usize,
    pub multiplicity: usize,
    pub target_error: f64,
    /// Also evolve at safety_factor × the bound's time scale and measure the error.
    pub check: bool,
    pub safety_factor: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { grid: 101, multiplicity: 1, target_error: 0.1, check: false, safety_factor: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCircuit {
    pub n: usize,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    /// Circuit in the gate text format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomCircuit>,
    #[serde(default)]
    pub pad: usize,
    #[serde(default = "yes")]
    pub validate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn yes() -> bool {
    true
}

fn default_epsilon() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTermConfig {
    pub coeff: f64,
    pub qubits: Vec<usize>,
    /// One of X, Y, Z per qubit.
    pub paulis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GadgetConfig {
    pub n: usize,
    pub terms: Vec<PauliTermConfig>,
    pub lambda: f64,
    /// λ sweep for the error-order fit; empty skips the fit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    /// X_s eigenvalue per term for the effective spectrum; defaults to all +1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<Vec<i8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorTermConfig {
    pub weight: f64,
    pub qubits: Vec<usize>,
    /// Local basis states spanning the projector's range.
    pub states: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantChoice {
    #[default]
    Bar,
    Primed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    Amplify {
        n: usize,
        terms: Vec<ProjectorTermConfig>,
        #[serde(default)]
        variant: VariantChoice,
        #[serde(default = "one")]
        d: f64,
    },
    /// Z₂ de-stoquastization of an operator given in text form, or of a random XXZZ model.
    Destoquasticize {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        operator: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random_xxzz: Option<usize>,
    },
    Stoquastic { operator: String },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Edges { n: usize, edges: Vec<(usize, usize)> },
    PreferentialAttachment { n: usize, m: usize },
    /// Edge-list file: a node count line, then one `i j` pair per line.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PagerankConfig {
    pub graph: GraphConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub personalization: Option<Vec<f64>>,
}

fn default_alpha() -> f64 {
    aqc::problems::pagerank::DEFAULT_ALPHA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_p_d")]
    pub p_d: f64,
}

fn default_p_d() -> f64 {
    aqc::annealer::DEFAULT_P_D
}
