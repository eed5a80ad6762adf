//! Subcommand execution. Every payload is computed in memory before anything is written.

use aqc::annealer::{benchmark, sector_space, BenchmarkSpec};
use aqc::bounds::{jrs, sufficiency_check, Multiplicity};
use aqc::compiler::{compile, validate, GateCircuit, ValidateOptions};
use aqc::evolution::{adiabatic_error, evolve, sample_counts, EvolveOptions};
use aqc::gadgets::{build_gadget, effective_hamiltonian, verify_gadget, GadgetSpec, GadgetTerm};
use aqc::io::{fmt_f64, Csv};
use aqc::linalg::{c, eigvalsh, CMatrix};
use aqc::operators::io::from_text;
use aqc::operators::{Axis, HamiltonianPath, OperatorSum};
use aqc::problems::{analytic_gap, make, pagerank_pipeline, Family, GraphSpec, ProblemInstance};
use aqc::rng::task_seed;
use aqc::schedules::{qab, LinearControls, QabOptions, QabSolution, Schedule, ScheduleKind};
use aqc::spectra::{gap_at, gap_profile, EigOptions, LevelSpec, Method, Sector as SymSector};
use aqc::transforms::{
    amplify_gap, bar_expected_spectrum, check_primed, check_stoquastic, destoquasticize, random_xxzz, z2_sector_spectra,
    FrustrationFreeSpec, ProjectorTerm, Variant,
};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Command, ExperimentConfig, GraphConfig, LevelChoice, MethodChoice, ScheduleSpec, TransformConfig, VariantChoice};
use crate::CliError;

/// Named output payloads and the warnings raised while producing them.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl Outputs {
    fn csv(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let mut out = Outputs::default();
    match command {
        Command::Gap => gap(cfg, &mut out)?,
        Command::Evolve => evolve_cmd(cfg, &mut out)?,
        Command::Schedule => schedule_cmd(cfg, &mut out)?,
        Command::Bounds => bounds_cmd(cfg, &mut out)?,
        Command::Compile => compile_cmd(cfg, &mut out)?,
        Command::Gadget => gadget_cmd(cfg, &mut out)?,
        Command::Transform => transform_cmd(cfg, &mut out)?,
        Command::Pagerank => pagerank_cmd(cfg, &mut out)?,
        Command::Bench => bench_cmd(cfg, &mut out)?,
    }
    Ok(out)
}

fn instance(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<ProblemInstance, CliError> {
    let inst = make(cfg.instance()?, cfg.seed)?;
    if inst.path.n_qubits().is_some() {
        if let Ok(r) = inst.known_solution_residual() {
            if r > cfg.tolerances.residual {
                out.warn(format!("known-solution residual {r:e} exceeds {:e}", cfg.tolerances.residual));
            }
        }
    }
    Ok(inst)
}

fn instance_json(inst: &ProblemInstance) -> serde_json::Value {
    json!({
        "family": inst.family,
        "n": inst.n,
        "dim": inst.path.dim(),
        "seed": inst.seed,
        "instance_seed": inst.instance_seed,
        "capabilities": inst.capabilities,
        "known_solution": inst.known_solution,
    })
}

fn build_schedule(spec: Option<ScheduleSpec>, inst: &ProblemInstance) -> Result<Schedule, CliError> {
    Ok(match spec.unwrap_or(ScheduleSpec::Linear) {
        ScheduleSpec::Linear => Schedule::linear(),
        ScheduleSpec::RolandCerf { n_states } => {
            let n_states = match n_states {
                Some(m) => m,
                None if inst.n < 63 => 1u64 << inst.n,
                None => return Err(CliError::Schema("roland_cerf needs n_states for this instance".into())),
            };
            Schedule::roland_cerf(n_states)?
        }
        ScheduleSpec::RegBeta { v } => Schedule::reg_beta(v)?,
        ScheduleSpec::LocalPower { p } => {
            if inst.capabilities.analytic_gap {
                Schedule::local_power(&|s| analytic_gap(inst, s).unwrap_or(0.0), p)?
            } else {
                let opts = EigOptions::default();
                Schedule::local_power(&|s| gap_at(&inst.path, s, LevelSpec::first(), &opts).unwrap_or(0.0), p)?
            }
        }
        ScheduleSpec::Qab { p } => {
            let Family::Grover { n, marked } = inst.family else {
                return Err(CliError::Schema("qab schedules are available for grover instances".into()));
            };
            match qab(&LinearControls::grover_one(n, marked)?, p, &QabOptions::default())? {
                QabSolution::Schedule(s) => s,
                QabSolution::Controls(_) => return Err(CliError::Schema("qab returned a multi-control path".into())),
            }
        }
    })
}

fn scheduled(path: &HamiltonianPath, schedule: &Schedule) -> HamiltonianPath {
    match schedule.kind() {
        ScheduleKind::Linear => path.clone(),
        _ => path.reparametrize(schedule),
    }
}

fn gap(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let g = &cfg.gap;
    let inst = instance(cfg, out)?;
    let (path, _) = sector_space(&inst, g.sector)?;
    let spec = match g.level {
        LevelChoice::ToLevel => LevelSpec::ToLevel(g.index),
        LevelChoice::AboveDegeneracy => LevelSpec::AboveDegeneracy(g.degeneracy_tau),
        LevelChoice::Permutation => LevelSpec::WithinSector(SymSector::Permutation),
        LevelChoice::SpinFlipEven => LevelSpec::WithinSector(SymSector::SpinFlipEven),
    };
    let method = match g.method {
        MethodChoice::Auto => Method::Auto,
        MethodChoice::Dense => Method::Dense,
        MethodChoice::Iterative => Method::Iterative,
    };
    let opts = EigOptions { method, k: g.levels, ..EigOptions::default() };
    let prof = gap_profile(&path, g.grid, spec, g.refine, &opts)?;
    if let Some(w) = &prof.warning {
        out.warn(w.clone());
    }
    if prof.min_gap < cfg.tolerances.small_gap {
        out.warn(format!("minimum gap {:e} below {:e} at s = {}", prof.min_gap, cfg.tolerances.small_gap, prof.s_min));
    }
    out.csv("gap.csv", prof.to_csv());
    out.json("gap.json", &json!({ "instance": instance_json(&inst), "summary": prof.summary_json() }));
    Ok(())
}

fn evolve_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    if cfg.t_f.is_empty() || cfg.t_f.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Schema("evolve needs a nonempty t_f grid of positive times".into()));
    }
    let e = cfg.evolve;
    let inst = instance(cfg, out)?;
    let (path, psi0) = sector_space(&inst, e.sector)?;
    let schedule = build_schedule(cfg.schedule, &inst)?;
    let opts = EvolveOptions { steps: e.steps, track: e.track, samples: e.samples, ..EvolveOptions::default() };
    let runs: Vec<_> = cfg
        .t_f
        .par_iter()
        .map(|&t| {
            let r = evolve(&path, &schedule, t, &psi0, &opts)?;
            let err = adiabatic_error(&r, &path)?;
            Ok((r, err))
        })
        .collect::<aqc::Result<_>>()?;
    let mut csv = Csv::new(&["t_f", "steps", "error", "norm_drift"]);
    for (k, (r, err)) in runs.iter().enumerate() {
        csv.row(&[fmt_f64(r.t_f), r.step_count.to_string(), fmt_f64(*err), fmt_f64(r.norm_drift)]);
        if r.norm_drift > cfg.tolerances.norm_drift {
            out.warn(format!("t_f = {}: norm drift {:e} exceeds {:e}", r.t_f, r.norm_drift, cfg.tolerances.norm_drift));
        }
        if e.track > 0 {
            out.csv(&format!("trace_{k}.csv"), r.trace_csv());
        }
        if e.shots > 0 {
            let counts = sample_counts(&r.final_state.probabilities(), e.shots, task_seed(cfg.seed, &format!("evolve/{k}/shots")));
            let mut c = Csv::new(&["index", "count"]);
            for (i, n) in counts.iter().enumerate().filter(|x| *x.1 > 0) {
                c.row(&[i.to_string(), n.to_string()]);
            }
            out.csv(&format!("counts_{k}.csv"), c.into_string());
        }
    }
    out.csv("evolve.csv", csv.into_string());
    out.json("evolve.json", &json!({ "instance": instance_json(&inst), "schedule": format!("{:?}", schedule.kind()), "dim": path.dim() }));
    Ok(())
}

fn schedule_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let inst = instance(cfg, out)?;
    let schedule = build_schedule(cfg.schedule, &inst)?;
    if let Err(e) = schedule.validate() {
        out.warn(e.to_string());
    }
    out.csv("schedule.csv", schedule.to_csv());
    out.json(
        "schedule.json",
        &json!({ "kind": format!("{:?}", schedule.kind()), "derivative_defect": schedule.derivative_defect(1001), "instance": instance_json(&inst) }),
    );
    Ok(())
}

fn bounds_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let b = cfg.bounds;
    if b.multiplicity == 0 || !(b.target_error > 0.0) {
        return Err(CliError::Schema("bounds needs multiplicity ≥ 1 and a positive target error".into()));
    }
    let inst = instance(cfg, out)?;
    let schedule = build_schedule(cfg.schedule, &inst)?;
    let report = jrs(&scheduled(&inst.path, &schedule), b.grid, &Multiplicity::Constant(b.multiplicity))?;
    let mut csv = Csv::new(&["s", "m", "gap", "d1_norm", "d2_norm"]);
    for x in &report.samples {
        csv.row(&[fmt_f64(x.s), x.m.to_string(), fmt_f64(x.gap), fmt_f64(x.d1_norm), fmt_f64(x.d2_norm)]);
    }
    let mut summary = json!({
        "instance": instance_json(&inst),
        "schedule": format!("{:?}", schedule.kind()),
        "report": report.to_json(),
        "target_error": b.target_error,
        "t_f_sufficient": report.t_f_sufficient(b.target_error),
    });
    if b.check {
        let s = sufficiency_check(&inst.path, &schedule, &inst.initial_state, b.target_error, b.safety_factor, b.grid)?;
        let bound = s.report.jrs_error_bound(s.t_f_run);
        if s.measured_error > bound {
            out.warn(format!("measured error {:e} exceeds the bound {bound:e} at t_f = {}", s.measured_error, s.t_f_run));
        }
        summary["check"] = json!({ "t_f_run": s.t_f_run, "measured_error": s.measured_error, "bound_at_t_f_run": bound });
    }
    out.csv("bounds.csv", csv.into_string());
    out.json("bounds.json", &summary);
    Ok(())
}

fn compile_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let cc = cfg.compile.as_ref().ok_or_else(|| CliError::Schema("missing [compile] table".into()))?;
    let circuit = match (&cc.text, &cc.file, &cc.random) {
        (Some(t), None, None) => GateCircuit::from_text(t)?,
        (None, Some(f), None) => GateCircuit::from_text(&std::fs::read_to_string(f)?)?,
        (None, None, Some(r)) => GateCircuit::random(r.n, r.depth, task_seed(cfg.seed, "compile/random"))?,
        _ => return Err(CliError::Schema("[compile] needs exactly one of text, file, random".into())),
    };
    let comp = compile(&circuit, cc.pad)?;
    let leakage = comp.sector_leakage(0.5);
    if leakage > cfg.tolerances.leakage {
        out.warn(format!("clock sector leakage {leakage:e} exceeds {:e}", cfg.tolerances.leakage));
    }
    let mut summary = json!({ "n": comp.circuit.n, "l": comp.l, "logical_depth": comp.logical_depth, "pad": cc.pad });
    let mut csv = Csv::new(&["s", "global_gap"]);
    if cc.validate {
        let opts = ValidateOptions { t_f: cc.t_f, epsilon: cc.epsilon, ..ValidateOptions::default() };
        let report = validate(&comp, &opts)?;
        for (s, g) in &report.global_gaps {
            csv.row_f64(&[*s, *g]);
        }
        for v in &report.violations {
            out.warn(v.clone());
        }
        summary["validation"] = serde_json::to_value(&report).expect("report serializes");
        summary["passed"] = json!(report.passed());
    }
    out.text("circuit.txt", comp.circuit.to_text());
    out.csv("compile.csv", csv.into_string());
    out.json("compile.json", &summary);
    Ok(())
}

fn axis(ch: char) -> Result<Axis, CliError> {
    match ch.to_ascii_uppercase() {
        'X' => Ok(Axis::X),
        'Y' => Ok(Axis::Y),
        'Z' => Ok(Axis::Z),
        _ => Err(CliError::Schema(format!("unknown Pauli {ch:?}"))),
    }
}

fn gadget_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let gc = cfg.gadget.as_ref().ok_or_else(|| CliError::Schema("missing [gadget] table".into()))?;
    let mut terms = Vec::new();
    for t in &gc.terms {
        let axes: Vec<Axis> = t.paulis.chars().map(axis).collect::<Result<_, _>>()?;
        if axes.len() != t.qubits.len() {
            return Err(CliError::Schema("gadget term: paulis and qubits differ in length".into()));
        }
        let factors: Vec<(usize, Axis)> = t.qubits.iter().copied().zip(axes).collect();
        terms.push(GadgetTerm::pauli(t.coeff, &factors)?);
    }
    let spec = GadgetSpec::new(gc.n, terms, gc.lambda)?;
    let gadget = build_gadget(&spec)?;
    out.warnings.extend(gadget.warnings.iter().cloned());
    let sector = gc.sector.clone().unwrap_or_else(|| vec![1; spec.r()]);
    let eff = effective_hamiltonian(&gadget, &sector)?;
    let mut levels = Csv::new(&["index", "level", "target", "rescaled"]);
    for (j, (e, (t, r))) in eff.levels.iter().zip(eff.target.iter().zip(eff.rescaled())).enumerate() {
        levels.row(&[j.to_string(), fmt_f64(*e), fmt_f64(*t), fmt_f64(r)]);
    }
    let mut summary = json!({
        "k": spec.k(),
        "r": spec.r(),
        "total_qubits": spec.total_qubits(),
        "radius": spec.radius(),
        "within_radius": spec.within_radius(),
        "effective": eff,
        "ordering_preserved": eff.ordering_preserved(),
    });
    if !gc.lambdas.is_empty() {
        let fit = verify_gadget(&spec, &gc.lambdas)?;
        out.csv("gadget.csv", fit.to_csv());
        summary["fit"] = serde_json::to_value(&fit).expect("fit serializes");
    }
    out.csv("levels.csv", levels.into_string());
    out.json("gadget.json", &summary);
    Ok(())
}

fn basis_projector(qubits: usize, states: &[usize]) -> Result<CMatrix, CliError> {
    let d = 1usize << qubits;
    let mut p = CMatrix::zeros(d, d);
    for &b in states {
        if b >= d {
            return Err(CliError::Schema(format!("projector state {b} out of range for {qubits} qubits")));
        }
        p[(b, b)] = c(1.0);
    }
    Ok(p)
}

fn spectrum_csv(columns: &[(&str, &[f64])]) -> String {
    let mut header = vec!["index"];
    header.extend(columns.iter().map(|c| c.0));
    let mut csv = Csv::new(&header);
    let rows = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for i in 0..rows {
        let mut cells = vec![i.to_string()];
        cells.extend(columns.iter().map(|c| c.1.get(i).map(|&x| fmt_f64(x)).unwrap_or_default()));
        csv.row(&cells);
    }
    csv.into_string()
}

fn transform_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let tc = cfg.transform.as_ref().ok_or_else(|| CliError::Schema("missing [transform] table".into()))?;
    match tc {
        TransformConfig::Amplify { n, terms, variant, d } => {
            let terms = terms
                .iter()
                .map(|t| Ok(ProjectorTerm { weight: t.weight, qubits: t.qubits.clone(), projector: basis_projector(t.qubits.len(), &t.states)? }))
                .collect::<Result<Vec<_>, CliError>>()?;
            let spec = FrustrationFreeSpec::new(*n, terms)?;
            out.warnings.extend(spec.warnings.iter().cloned());
            let v = match variant {
                VariantChoice::Bar => Variant::Bar,
                VariantChoice::Primed => Variant::Primed { d: *d },
            };
            let amp = amplify_gap(&spec, v)?;
            out.warnings.extend(amp.warnings.iter().cloned());
            let single = amp.single_particle_spectrum()?;
            let mut summary = json!({ "n": n, "l": amp.l, "variant": v, "input_spectrum": spec.spectrum()?, "input_gap": spec.gap()? });
            match v {
                Variant::Bar => {
                    let expected = bar_expected_spectrum(&spec)?;
                    let dev = single.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    summary["expected_deviation"] = json!(dev);
                    out.csv("spectrum.csv", spectrum_csv(&[("single_particle", &single), ("expected", &expected)]));
                }
                Variant::Primed { d } => {
                    let report = check_primed(&spec, d)?;
                    if report.zero_modes != 1 {
                        out.warn(format!("primed variant has {} zero modes", report.zero_modes));
                    }
                    summary["primed"] = serde_json::to_value(&report).expect("report serializes");
                    out.csv("spectrum.csv", spectrum_csv(&[("single_particle", &single)]));
                }
            }
            out.json("transform.json", &summary);
        }
        TransformConfig::Destoquasticize { operator, random_xxzz: xxzz } => {
            let h = match (operator, xxzz) {
                (Some(t), None) => from_text(t)?,
                (None, Some(n)) => random_xxzz(*n, task_seed(cfg.seed, "transform/xxzz"))?,
                _ => return Err(CliError::Schema("destoquasticize needs exactly one of operator, random_xxzz".into())),
            };
            let ht = destoquasticize(&h)?;
            let input = eigvalsh(&h.to_matrix()?);
            let (minus, plus) = z2_sector_spectra(&ht)?;
            let before = check_stoquastic(&h)?;
            let after = check_stoquastic(&ht)?;
            if !after.stoquastic {
                out.warn("de-stoquastized operator is not stoquastic");
            }
            let dev = input.iter().zip(&minus).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            out.csv("spectrum.csv", spectrum_csv(&[("input", &input), ("minus_sector", &minus), ("plus_sector", &plus)]));
            out.text("operator.txt", aqc::operators::io::to_text(&ht));
            out.json("transform.json", &json!({ "input": before, "output": after, "minus_sector_deviation": dev }));
        }
        TransformConfig::Stoquastic { operator } => {
            let h: OperatorSum = from_text(operator)?;
            let r = check_stoquastic(&h)?;
            let mut csv = Csv::new(&["stoquastic", "max_positive_offdiagonal", "max_imaginary_offdiagonal"]);
            csv.row(&[r.stoquastic.to_string(), fmt_f64(r.max_positive_offdiagonal), fmt_f64(r.max_imaginary_offdiagonal)]);
            out.csv("stoquastic.csv", csv.into_string());
            out.json("transform.json", &json!(r));
        }
    }
    Ok(())
}

fn pagerank_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let pc = cfg.pagerank.as_ref().ok_or_else(|| CliError::Schema("missing [pagerank] table".into()))?;
    let graph = match &pc.graph {
        GraphConfig::Edges { n, edges } => GraphSpec::new(*n, edges.clone())?,
        GraphConfig::PreferentialAttachment { n, m } => GraphSpec::preferential_attachment(*n, *m, task_seed(cfg.seed, "pagerank/graph"))?,
        GraphConfig::File { path } => GraphSpec::parse_edge_list(&std::fs::read_to_string(path)?)?,
    };
    let pr = pagerank_pipeline(&graph, pc.alpha, pc.personalization.as_deref())?;
    let ground = pr.ground_state();
    let overlap = pr.ground_overlap();
    let mut csv = Csv::new(&["node", "classical", "ground"]);
    for (i, (p, g)) in pr.classical.iter().zip(ground.iter()).enumerate() {
        csv.row(&[i.to_string(), fmt_f64(*p), fmt_f64(g.re)]);
    }
    out.csv("pagerank.csv", csv.into_string());
    out.json("pagerank.json", &json!({ "n": pr.n(), "alpha": pr.alpha, "overlap": overlap, "power_iterations": pr.power_iterations }));
    Ok(())
}

fn bench_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let bc = cfg.bench.as_ref().ok_or_else(|| CliError::Schema("missing [bench] table".into()))?;
    let spec = BenchmarkSpec { family: cfg.instance()?.clone(), sizes: bc.sizes.clone(), solvers: bc.solvers.clone(), p_d: bc.p_d, seed: cfg.seed };
    let report = benchmark(&spec)?;
    for f in &report.fits {
        out.warnings.extend(f.flags.iter().map(|x| format!("{}: {x}", f.solver)));
    }
    out.csv("bench.csv", report.to_csv());
    out.json("bench.json", &serde_json::to_value(&report).expect("report serializes"));
    Ok(())
}

