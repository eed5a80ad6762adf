//! Simulated-annealing baseline, time-to-solution metric and scaling benchmarks.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{adiabatic_error, evolve, EvolveOptions};
use crate::fit::{log_linear_fit, log_log_fit, LinearFit};
use crate::io::{fmt_f64, Csv};
use crate::operators::{HamiltonianPath, Operator, StateVector, Term};
use crate::problems::{classical::classical_solve, make, Family, ProblemInstance};
use crate::rng::{rng, task_seed};
use crate::schedules::Schedule;

pub const DEFAULT_P_D: f64 = 0.99;
/// Largest n for a tabulated cost function.
pub const TABLE_MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SaSchedule {
    /// T decreases linearly from t_init to t_final across sweeps.
    LinearT { t_init: f64, t_final: f64 },
    /// T(t) = p·n/ln(α·t + 1) at sweep t = 1, 2, …; p defaults to the largest single-flip |ΔE| and
    /// α to e^(−n).
    GemanLog {
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinSelection {
    Random,
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaConfig {
    pub schedule: SaSchedule,
    pub sweeps: usize,
    #[serde(default = "default_selection")]
    pub selection: SpinSelection,
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_selection() -> SpinSelection {
    SpinSelection::Random
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.repetitions == 0 {
            return Err(Error::invalid("sweeps and repetitions must be at least 1"));
        }
        match self.schedule {
            SaSchedule::LinearT { t_init, t_final } if !(t_init > 0.0 && t_final > 0.0 && t_init.is_finite()) => {
                Err(Error::invalid("temperatures must be positive"))
            }
            SaSchedule::GemanLog { p, alpha } if p.is_some_and(|p| !(p > 0.0)) || alpha.is_some_and(|a| !(a > 0.0)) => {
                Err(Error::invalid("Geman p and α must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Diagonal cost function of a final Hamiltonian.
#[derive(Clone, Debug)]
pub enum Cost {
    /// f(|x|).
    Weight(Vec<f64>),
    /// constant + Σ c·Π_{q∈S} s_q with s_q = 1 − 2x_q.
    Ising { n: usize, constant: f64, terms: Vec<(f64, Vec<usize>)>, by_qubit: Vec<Vec<usize>> },
    /// Energies of all 2^n strings.
    Table { n: usize, values: Vec<f64> },
}

impl Cost {
    pub fn n(&self) -> usize {
        match self {
            Cost::Weight(v) => v.len() - 1,
            Cost::Ising { n, .. } | Cost::Table { n, .. } => *n,
        }
    }

    /// Classical cost of H(1) from an instance: Dicke diagonal for reduced symmetric paths, Ising form
    /// for Z-string sums, otherwise a table.
    pub fn from_instance(instance: &ProblemInstance) -> Result<Cost> {
        let path = &instance.path;
        let Some(n) = path.n_qubits() else {
            if instance.symmetric.is_some() {
                let h = path.assemble(1.0)?;
                let d = h.nrows();
                let off = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| h[(i, j)].norm()).fold(0.0, f64::max);
                if off > 1e-12 {
                    return Err(Error::Unsupported("final Hamiltonian is not diagonal in the Dicke basis".into()));
                }
                return Ok(Cost::Weight((0..d).map(|w| h[(w, w)].re).collect()));
            }
            return Err(Error::Unsupported("classical cost of a reduced path".into()));
        };
        Cost::from_path(path, n)
    }

    pub fn from_path(path: &HamiltonianPath, n: usize) -> Result<Cost> {
        let mut constant = 0.0;
        let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
        let mut weight: Option<Vec<f64>> = None;
        let mut simple = true;
        for (f, op) in path.components() {
            let w = f.value(1.0);
            if w == 0.0 {
                continue;
            }
            let Operator::Sum(o) = op.as_ref() else {
                return Err(Error::Unsupported("final Hamiltonian has a dense component".into()));
            };
            if !o.is_diagonal() {
                return Err(Error::Unsupported("final Hamiltonian is not diagonal".into()));
            }
            for t in o.terms() {
                match t {
                    Term::Pauli(p) if p.factors().is_empty() => constant += w * p.coeff,
                    Term::Pauli(p) => terms.push((w * p.coeff, p.factors().iter().map(|f| f.0).collect())),
                    Term::Weight { values } => {
                        let acc = weight.get_or_insert_with(|| vec![0.0; values.len()]);
                        for (a, v) in acc.iter_mut().zip(values) {
                            *a += w * v;
                        }
                    }
                    _ => simple = false,
                }
            }
        }
        if simple && weight.is_none() {
            let mut by_qubit: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (k, (_, qs)) in terms.iter().enumerate() {
                for &q in qs {
                    by_qubit[q].push(k);
                }
            }
            return Ok(Cost::Ising { n, constant, terms, by_qubit });
        }
        if n > TABLE_MAX_QUBITS {
            return Err(Error::DimensionLimit { n, limit: TABLE_MAX_QUBITS });
        }
        let mut values = vec![0.0; 1 << n];
        for (f, op) in path.components() {
            let w = f.value(1.0);
            if let (true, Operator::Sum(o)) = (w != 0.0, op.as_ref()) {
                for (x, v) in o.diagonal().into_iter().enumerate() {
                    values[x] += w * v;
                }
            }
        }
        Ok(Cost::Table { n, values })
    }

    fn index(bits: &[u8]) -> usize {
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn energy(&self, bits: &[u8]) -> f64 {
        match self {
            Cost::Weight(v) => v[bits.iter().map(|&b| b as usize).sum::<usize>()],
            Cost::Ising { constant, terms, .. } => {
                constant + terms.iter().map(|(c, qs)| c * qs.iter().map(|&q| 1.0 - 2.0 * bits[q] as f64).product::<f64>()).sum::<f64>()
            }
            Cost::Table { values, .. } => values[Self::index(bits)],
        }
    }

    /// Energy change when flipping bit j, given the current Hamming weight and table index.
    fn delta(&self, bits: &[u8], weight: usize, index: usize, j: usize) -> f64 {
        match self {
            Cost::Weight(v) => {
                if bits[j] == 0 {
                    v[weight + 1] - v[weight]
                } else {
                    v[weight - 1] - v[weight]
                }
            }
            Cost::Ising { terms, by_qubit, .. } => by_qubit[j]
                .iter()
                .map(|&k| {
                    let (c, qs) = &terms[k];
                    -2.0 * c * qs.iter().map(|&q| 1.0 - 2.0 * bits[q] as f64).product::<f64>()
                })
                .sum(),
            Cost::Table { n, values } => values[index ^ (1 << (n - 1 - j))] - values[index],
        }
    }

    /// Largest single-flip |ΔE| bound.
    pub fn max_local_field(&self) -> f64 {
        match self {
            Cost::Weight(v) => v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max),
            Cost::Ising { by_qubit, terms, .. } => {
                by_qubit.iter().map(|ks| ks.iter().map(|&k| 2.0 * terms[k].0.abs()).sum::<f64>()).fold(0.0, f64::max)
            }
            Cost::Table { n, values } => (0..values.len())
                .flat_map(|x| (0..*n).map(move |j| (x, j)))
                .map(|(x, j)| (values[x ^ (1 << j)] - values[x]).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Minimum energy by exhaustive scan (weights, or strings when n ≤ 24).
    pub fn minimum(&self) -> Result<f64> {
        match self {
            Cost::Weight(v) => Ok(v.iter().copied().fold(f64::INFINITY, f64::min)),
            Cost::Table { values, .. } => Ok(values.iter().copied().fold(f64::INFINITY, f64::min)),
            Cost::Ising { n, .. } => {
                if *n > TABLE_MAX_QUBITS {
                    return Err(Error::DimensionLimit { n: *n, limit: TABLE_MAX_QUBITS });
                }
                let mut bits = vec![0u8; *n];
                Ok((0..1usize << n)
                    .map(|x| {
                        for (j, b) in bits.iter_mut().enumerate() {
                            *b = ((x >> (n - 1 - j)) & 1) as u8;
                        }
                        self.energy(&bits)
                    })
                    .fold(f64::INFINITY, f64::min))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SaResult {
    pub ground_energy: f64,
    pub best_energy: f64,
    /// Repetitions whose final configuration has the ground energy.
    pub successes: usize,
    pub repetitions: usize,
    pub sweeps: usize,
    /// Final energy after each sweep of repetition 0.
    pub energy_trace: Option<Vec<f64>>,
    /// Visits per basis index after each sweep, summed over repetitions.
    pub state_counts: Option<Vec<u64>>,
}

impl SaResult {
    pub fn success_probability(&self) -> f64 {
        self.successes as f64 / self.repetitions as f64
    }

    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.successes, self.repetitions, z)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SaOptions {
    pub trace: bool,
    /// Record visited states (n ≤ 16).
    pub histogram: bool,
}

fn temperature(schedule: &SaSchedule, sweep: usize, sweeps: usize, n: usize, p_default: f64) -> f64 {
    match *schedule {
        SaSchedule::LinearT { t_init, t_final } => {
            if sweeps == 1 {
                t_final
            } else {
                t_init + (t_final - t_init) * sweep as f64 / (sweeps - 1) as f64
            }
        }
        SaSchedule::GemanLog { p, alpha } => {
            let p = p.unwrap_or(p_default);
            let a = alpha.unwrap_or((-(n as f64)).exp());
            p * n as f64 / (a * (sweep + 1) as f64 + 1.0).ln()
        }
    }
}

/// Metropolis single-spin-flip annealing; repetition r uses seed task_seed(config.seed, "sa/r").
pub fn simulated_annealing_cost(cost: &Cost, ground_energy: f64, config: &SaConfig, opts: SaOptions) -> Result<SaResult> {
    config.validate()?;
    let n = cost.n();
    if n == 0 {
        return Err(Error::invalid("cost needs at least one bit"));
    }
    if opts.histogram && n > 16 {
        return Err(Error::DimensionLimit { n, limit: 16 });
    }
    let p_default = cost.max_local_field().max(f64::MIN_POSITIVE);
    let temps: Vec<f64> = (0..config.sweeps).map(|t| temperature(&config.schedule, t, config.sweeps, n, p_default)).collect();
    let tol = 1e-9 * (1.0 + ground_energy.abs());
    let runs: Vec<(f64, f64, Option<Vec<f64>>, Option<Vec<u64>>)> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let mut g = rng(task_seed(config.seed, &format!("sa/{r}")));
            let mut bits: Vec<u8> = (0..n).map(|_| g.gen_range(0..2u8)).collect();
            let mut weight: usize = bits.iter().map(|&b| b as usize).sum();
            let mut index = if n <= 63 { Cost::index(&bits) } else { 0 };
            let mut e = cost.energy(&bits);
            let mut best = e;
            let mut trace = (opts.trace && r == 0).then(|| Vec::with_capacity(config.sweeps));
            let mut counts = opts.histogram.then(|| vec![0u64; 1 << n]);
            for &t in &temps {
                let beta = 1.0 / t;
                for i in 0..n {
                    let j = match config.selection {
                        SpinSelection::Random => g.gen_range(0..n),
                        SpinSelection::Sequential => i,
                    };
                    let de = cost.delta(&bits, weight, index, j);
                    if de <= 0.0 || g.gen::<f64>() < (-de * beta).exp() {
                        if bits[j] == 0 {
                            weight += 1;
                        } else {
                            weight -= 1;
                        }
                        bits[j] ^= 1;
                        if n <= 63 {
                            index ^= 1 << (n - 1 - j);
                        }
                        e += de;
                        best = best.min(e);
                    }
                }
                if let Some(tr) = trace.as_mut() {
                    tr.push(e);
                }
                if let Some(c) = counts.as_mut() {
                    c[index] += 1;
                }
            }
            // Recompute to remove accumulated rounding.
            let e_final = cost.energy(&bits);
            (e_final, best.min(e_final), trace, counts)
        })
        .collect();
    let successes = runs.iter().filter(|r| r.0 <= ground_energy + tol).count();
    let best_energy = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let energy_trace = runs.first().and_then(|r| r.2.clone());
    let state_counts = opts.histogram.then(|| {
        let mut acc = vec![0u64; 1 << n];
        for r in &runs {
            for (a, b) in acc.iter_mut().zip(r.3.as_ref().expect("histogram")) {
                *a += b;
            }
        }
        acc
    });
    Ok(SaResult { ground_energy, best_energy, successes, repetitions: config.repetitions, sweeps: config.sweeps, energy_trace, state_counts })
}

/// SA on the diagonal final Hamiltonian of an instance; success means reaching the known optimum.
pub fn simulated_annealing(instance: &ProblemInstance, config: &SaConfig, opts: SaOptions) -> Result<SaResult> {
    let cost = Cost::from_instance(instance)?;
    let ground = match &instance.known_solution {
        Some(k) => k.energy,
        None => match cost.minimum() {
            Ok(e) => e,
            Err(_) => classical_solve(instance)?.energy,
        },
    };
    simulated_annealing_cost(&cost, ground, config, opts)
}

/// t_f·ln(1 − p_d)/ln(1 − p_S), with at least one repetition: t_f once p_S ≥ p_d, +∞ when p_S = 0.
pub fn tts(t_f: f64, p_s: f64, p_d: f64) -> f64 {
    if !(p_s > 0.0) {
        return f64::INFINITY;
    }
    if p_s >= p_d {
        return t_f;
    }
    t_f * (1.0 - p_d).ln() / (1.0 - p_s).ln()
}

/// Wilson score interval for k successes out of m trials.
pub fn wilson_interval(k: usize, m: usize, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let (kf, mf) = (k as f64, m as f64);
    let p = kf / mf;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * mf)) / (1.0 + z2 / mf);
    let half = z * (p * (1.0 - p) / mf + z2 / (4.0 * mf * mf)).sqrt() / (1.0 + z2 / mf);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AqcSchedule {
    Linear,
    /// Local adiabatic schedule for one marked item among 2^n.
    RolandCerf,
    RegBeta { v: u32 },
}

impl AqcSchedule {
    pub fn build(&self, n: usize) -> Result<Schedule> {
        match *self {
            AqcSchedule::Linear => Ok(Schedule::linear()),
            AqcSchedule::RolandCerf => {
                if n >= 63 {
                    return Err(Error::DimensionLimit { n, limit: 62 });
                }
                Schedule::roland_cerf(1u64 << n)
            }
            AqcSchedule::RegBeta { v } => Schedule::reg_beta(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Dicke sector when the instance has one, else the instance path.
    Auto,
    Full,
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Aqc {
        name: String,
        schedule: AqcSchedule,
        t_f: Vec<f64>,
        #[serde(default = "default_sector")]
        sector: Sector,
        /// Integration steps per unit of t_f·‖H‖; `None` uses the evolution default.
        #[serde(default)]
        steps_per_unit: Option<f64>,
    },
    Sa {
        name: String,
        schedule: SaSchedule,
        sweeps: Vec<usize>,
        repetitions: usize,
        #[serde(default = "default_selection")]
        selection: SpinSelection,
    },
}

fn default_sector() -> Sector {
    Sector::Auto
}

impl SolverSpec {
    pub fn name(&self) -> &str {
        match self {
            SolverSpec::Aqc { name, .. } | SolverSpec::Sa { name, .. } => name,
        }
    }

    fn grid_len(&self) -> usize {
        match self {
            SolverSpec::Aqc { t_f, .. } => t_f.len(),
            SolverSpec::Sa { sweeps, .. } => sweeps.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_p_d")]
    pub p_d: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_p_d() -> f64 {
    DEFAULT_P_D
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub solver: String,
    /// t_f for AQC, sweeps for SA.
    pub knob: f64,
    pub success: f64,
    pub tts: f64,
    /// 95% Wilson interval of the SA success probability.
    pub interval: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimumRow {
    pub n: usize,
    pub solver: String,
    pub knob: f64,
    pub tts_opt: f64,
    pub success: f64,
    /// Optimum at the first or last grid point.
    pub at_boundary: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub solver: String,
    /// ln TTS_opt against ln n.
    pub log_log: Option<LinearFit>,
    /// ln TTS_opt against n.
    pub log_linear: Option<LinearFit>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkReport {
    pub family: String,
    pub rows: Vec<BenchRow>,
    pub optima: Vec<OptimumRow>,
    pub fits: Vec<ScalingFit>,
}

impl BenchmarkReport {
    /// `family,n,solver,knob,success,tts`.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["family", "n", "solver", "knob", "success", "tts"]);
        for r in &self.rows {
            csv.row(&[self.family.clone(), r.n.to_string(), r.solver.clone(), fmt_f64(r.knob), fmt_f64(r.success), fmt_f64(r.tts)]);
        }
        csv.into_string()
    }

    pub fn fit(&self, solver: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.solver == solver)
    }

    pub fn optima_for(&self, solver: &str) -> Vec<&OptimumRow> {
        self.optima.iter().filter(|o| o.solver == solver).collect()
    }
}

/// Copy of a family with its size parameter `n` replaced.
pub fn family_at_size(family: &Family, n: usize) -> Result<Family> {
    let mut v = serde_json::to_value(family)?;
    fn set(v: &mut serde_json::Value, n: usize) -> bool {
        let Some(obj) = v.as_object_mut() else { return false };
        if obj.contains_key("n") {
            obj.insert("n".into(), n.into());
            return true;
        }
        obj.get_mut("base").is_some_and(|b| set(b, n))
    }
    if !set(&mut v, n) {
        return Err(Error::invalid(format!("family {} has no size parameter", family.tag())));
    }
    Ok(serde_json::from_value(v)?)
}

/// Exact ground-space population of the final state of an adiabatic run.
pub fn aqc_success(path: &HamiltonianPath, psi0: &StateVector, schedule: &Schedule, t_f: f64, steps_per_unit: Option<f64>) -> Result<f64> {
    let steps = steps_per_unit.map(|k| ((k * t_f * path.norm_bound()).ceil() as usize).max(100));
    let res = evolve(path, schedule, t_f, psi0, &EvolveOptions { steps, ..EvolveOptions::default() })?;
    Ok(1.0 - adiabatic_error(&res, path)?)
}

/// Path and initial state of an instance in the chosen sector.
pub fn sector_space(instance: &ProblemInstance, sector: Sector) -> Result<(HamiltonianPath, StateVector)> {
    let symmetric = || -> Result<(HamiltonianPath, StateVector)> {
        let sym = instance.symmetric.as_ref().ok_or_else(|| Error::Unsupported("instance has no symmetric sector".into()))?;
        let amps = crate::operators::symmetric::uniform_dicke_amplitudes(sym.n);
        let psi = StateVector::reduced(crate::linalg::CVector::from_iterator(amps.len(), amps.into_iter().map(crate::linalg::c)));
        Ok((sym.path.clone(), psi))
    };
    match sector {
        Sector::Symmetric => symmetric(),
        Sector::Auto if instance.symmetric.is_some() => symmetric(),
        _ => Ok((instance.path.clone(), instance.initial_state.clone())),
    }
}

fn optimum<'a>(rows: &[&'a BenchRow]) -> Option<(usize, &'a BenchRow)> {
    rows.iter().enumerate().filter(|(_, r)| r.tts.is_finite()).min_by(|a, b| a.1.tts.total_cmp(&b.1.tts)).map(|(i, r)| (i, *r))
}

/// TTS curves over the grids, per-size optima and scaling fits of TTS_opt.
pub fn benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    if spec.sizes.is_empty() || spec.solvers.is_empty() || spec.solvers.iter().any(|s| s.grid_len() == 0) {
        return Err(Error::invalid("benchmark needs sizes, solvers and nonempty grids"));
    }
    if !(spec.p_d > 0.0 && spec.p_d < 1.0) {
        return Err(Error::invalid("p_d must lie in (0, 1)"));
    }
    let instances: Vec<ProblemInstance> = spec
        .sizes
        .par_iter()
        .map(|&n| make(&family_at_size(&spec.family, n)?, task_seed(spec.seed, &format!("bench/{n}/instance"))))
        .collect::<Result<_>>()?;
    let mut tasks = Vec::new();
    for (i, &n) in spec.sizes.iter().enumerate() {
        for (si, solver) in spec.solvers.iter().enumerate() {
            for g in 0..solver.grid_len() {
                tasks.push((i, n, si, g));
            }
        }
    }
    let rows: Vec<BenchRow> = tasks
        .par_iter()
        .map(|&(i, n, si, g)| -> Result<BenchRow> {
            let inst = &instances[i];
            match &spec.solvers[si] {
                SolverSpec::Aqc { name, schedule, t_f, sector, steps_per_unit } => {
                    let (path, psi0) = sector_space(inst, *sector)?;
                    let p = aqc_success(&path, &psi0, &schedule.build(n)?, t_f[g], *steps_per_unit)?;
                    Ok(BenchRow { n, solver: name.clone(), knob: t_f[g], success: p, tts: tts(t_f[g], p, spec.p_d), interval: None })
                }
                SolverSpec::Sa { name, schedule, sweeps, repetitions, selection } => {
                    let config = SaConfig {
                        schedule: schedule.clone(),
                        sweeps: sweeps[g],
                        selection: *selection,
                        repetitions: *repetitions,
                        seed: task_seed(spec.seed, &format!("bench/{n}/{name}/{}", sweeps[g])),
                    };
                    let r = simulated_annealing(inst, &config, SaOptions::default())?;
                    let p = r.success_probability();
                    Ok(BenchRow {
                        n,
                        solver: name.clone(),
                        knob: sweeps[g] as f64,
                        success: p,
                        tts: tts(sweeps[g] as f64, p, spec.p_d),
                        interval: Some(r.wilson_interval(1.96)),
                    })
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut optima = Vec::new();
    let mut fits = Vec::new();
    for solver in &spec.solvers {
        let name = solver.name();
        let mut flags = Vec::new();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &n in &spec.sizes {
            let curve: Vec<&BenchRow> = rows.iter().filter(|r| r.n == n && r.solver == name).collect();
            match optimum(&curve) {
                Some((idx, r)) => {
                    let at_boundary = curve.len() > 1 && (idx == 0 || idx == curve.len() - 1);
                    if at_boundary {
                        flags.push(format!("n = {n}: optimum at grid boundary {}", fmt_f64(r.knob)));
                    }
                    optima.push(OptimumRow { n, solver: name.to_string(), knob: r.knob, tts_opt: r.tts, success: r.success, at_boundary });
                    xs.push(n as f64);
                    ys.push(r.tts);
                }
                None => flags.push(format!("n = {n}: no success on the grid")),
            }
        }
        let (log_log, log_linear) = if xs.len() >= 2 {
            let a = log_log_fit(&xs, &ys).ok();
            let b = log_linear_fit(&xs, &ys).ok();
            if a.is_none() || b.is_none() {
                flags.push("degenerate fit".into());
            }
            (a, b)
        } else {
            if spec.sizes.len() >= 2 {
                flags.push("degenerate fit: fewer than two sizes with an optimum".into());
            }
            (None, None)
        };
        fits.push(ScalingFit { solver: name.to_string(), log_log, log_linear, flags });
    }
    Ok(BenchmarkReport { family: spec.family.tag().to_string(), rows, optima, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Axis, Coeff, OperatorSum};

    fn cfg(t0: f64, t1: f64, sweeps: usize, reps: usize, seed: u64) -> SaConfig {
        SaConfig { schedule: SaSchedule::LinearT { t_init: t0, t_final: t1 }, sweeps, selection: SpinSelection::Random, repetitions: reps, seed }
    }

    #[test]
    fn tts_values() {
        assert_eq!(tts(3.0, 0.99, 0.99), 3.0);
        assert!((tts(1.0, 0.5, 0.99) - 0.01f64.ln() / 0.5f64.ln()).abs() < 1e-15);
        assert!((tts(1.0, 0.5, 0.99) - 6.6439).abs() < 1e-4);
        assert_eq!(tts(2.0, 1.0, 0.99), 2.0);
        assert_eq!(tts(2.0, 0.0, 0.99), f64::INFINITY);
        assert_eq!(tts(2.0, 1.0 - 1e-15, 0.99), 2.0);
        assert!((tts(2.0, 0.99 - 1e-12, 0.99) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn plain_hw_is_easy() {
        let inst = make(&Family::PlainHw { n: 8 }, 1).unwrap();
        let r = simulated_annealing(&inst, &cfg(3.0, 0.05, 200, 400, 2), SaOptions::default()).unwrap();
        assert!(r.success_probability() >= 0.99);
        assert_eq!(r.ground_energy, 0.0);
    }

    #[test]
    fn fixed_temperature_matches_gibbs() {
        // H = −Z₀Z₁
        let mut path = HamiltonianPath::qubits(2);
        let mut h = OperatorSum::new(2);
        h.add_pauli(-1.0, &[(0, Axis::Z), (1, Axis::Z)]).unwrap();
        path.push_sum(Coeff::s(), h).unwrap();
        let cost = Cost::from_path(&path, 2).unwrap();
        assert!(matches!(cost, Cost::Ising { .. }));
        let t = 1.5;
        let r = simulated_annealing_cost(&cost, -1.0, &cfg(t, t, 100_000, 1, 3), SaOptions { histogram: true, trace: false }).unwrap();
        let counts = r.state_counts.unwrap();
        let total: u64 = counts.iter().sum();
        let energies = [-1.0, 1.0, 1.0, -1.0];
        let z: f64 = energies.iter().map(|e: &f64| (-e / t).exp()).sum();
        let tv: f64 =
            0.5 * (0..4).map(|x| (counts[x] as f64 / total as f64 - (-energies[x] / t).exp() / z).abs()).sum::<f64>();
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn seed_determinism() {
        let inst = make(&Family::Spike { n: 12 }, 0).unwrap();
        let c = cfg(2.0, 0.1, 30, 64, 9);
        let a = simulated_annealing(&inst, &c, SaOptions::default()).unwrap();
        let b = simulated_annealing(&inst, &c, SaOptions::default()).unwrap();
        assert_eq!(a.successes, b.successes);
        assert_eq!(a.best_energy.to_bits(), b.best_energy.to_bits());
    }

    #[test]
    fn spike_success_decreases_with_n() {
        let probs: Vec<f64> = [12, 16, 20]
            .iter()
            .map(|&n| {
                let inst = make(&Family::Spike { n }, 0).unwrap();
                simulated_annealing(&inst, &cfg(2.0, 0.1, 40, 2000, 5), SaOptions::default()).unwrap().success_probability()
            })
            .collect();
        assert!(probs[0] > probs[1] && probs[1] > probs[2], "{probs:?}");
    }

    #[test]
    fn cost_forms_agree() {
        let inst = make(&Family::Sk { n: 6, bimodal: true }, 4).unwrap();
        let cost = Cost::from_instance(&inst).unwrap();
        let table = crate::problems::classical::final_diagonal(&inst).unwrap();
        let mut bits = vec![0u8; 6];
        for x in 0..64usize {
            for j in 0..6 {
                bits[j] = ((x >> (5 - j)) & 1) as u8;
            }
            assert!((cost.energy(&bits) - table[x]).abs() < 1e-12);
            let w = bits.iter().map(|&b| b as usize).sum();
            for j in 0..6 {
                let mut flipped = bits.clone();
                flipped[j] ^= 1;
                assert!((cost.delta(&bits, w, x, j) - (cost.energy(&flipped) - cost.energy(&bits))).abs() < 1e-12);
            }
        }
        assert!((cost.minimum().unwrap() - classical_solve(&inst).unwrap().energy).abs() < 1e-12);
    }

    #[test]
    fn geman_temperature() {
        let s = SaSchedule::GemanLog { p: Some(2.0), alpha: None };
        let t = temperature(&s, 9, 100, 4, 1.0);
        assert!((t - 8.0 / ((-4f64).exp() * 10.0 + 1.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn non_diagonal_final_is_rejected() {
        let inst = make(&Family::Grover { n: 3, marked: 0 }, 0).unwrap();
        assert!(inst.capabilities.diagonal_final || Cost::from_instance(&inst).is_err());
        let mut path = HamiltonianPath::qubits(1);
        let mut h = OperatorSum::new(1);
        h.add_pauli(1.0, &[(0, Axis::X)]).unwrap();
        path.push_sum(Coeff::s(), h).unwrap();
        assert!(Cost::from_path(&path, 1).is_err());
    }

    #[test]
    fn family_resizing() {
        let f = family_at_size(&Family::Spike { n: 8 }, 16).unwrap();
        assert_eq!(f, Family::Spike { n: 16 });
        let wrapped = Family::RandomInit { base: Box::new(Family::PlainHw { n: 4 }) };
        assert_eq!(family_at_size(&wrapped, 6).unwrap(), Family::RandomInit { base: Box::new(Family::PlainHw { n: 6 }) });
        assert!(family_at_size(&Family::BernsteinVazirani { a: "101".into() }, 4).is_err());
    }

    #[test]
    fn single_size_single_solver_benchmark() {
        let spec = BenchmarkSpec {
            family: Family::Grover { n: 3, marked: 0 },
            sizes: vec![3],
            solvers: vec![SolverSpec::Aqc {
                name: "aqc".into(),
                schedule: AqcSchedule::Linear,
                t_f: vec![2.0, 8.0, 32.0],
                sector: Sector::Full,
                steps_per_unit: None,
            }],
            p_d: 0.99,
            seed: 1,
        };
        let rep = benchmark(&spec).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.optima.len(), 1);
        assert!(rep.rows.iter().all(|r| (0.0..=1.0).contains(&r.success)));
        let best = rep.rows.iter().map(|r| r.tts).fold(f64::INFINITY, f64::min);
        assert_eq!(rep.optima[0].tts_opt, best);
        assert!(rep.fits[0].log_log.is_none());
        assert_eq!(rep.to_csv().lines().count(), 4);
        assert!(rep.to_csv().starts_with("family,n,solver,knob,success,tts\ngrover,3,aqc,"));
    }
}
