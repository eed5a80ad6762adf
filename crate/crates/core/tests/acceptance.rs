mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use aqc::annealer::{benchmark, AqcSchedule, BenchmarkSpec, SaSchedule, Sector, SolverSpec, SpinSelection};
use aqc::compiler::{compile, validate, GateCircuit, ValidateOptions};
use aqc::evolution::{adiabatic_error, evolve, EvolveOptions};
use aqc::fit::log_log_fit;
use aqc::gadgets::{build_gadget, effective_hamiltonian, verify_gadget, GadgetSpec, GadgetTerm};
use aqc::linalg::{c, eigvalsh, CMatrix};
use aqc::operators::Axis;
use aqc::problems::pagerank::excitation_index;
use aqc::problems::{make, pagerank_pipeline, ring_min_gap, ring_sector_spectrum, Family, GraphSpec};
use aqc::schedules::Schedule;
use aqc::spectra::{gap_profile, spin_flip_even_matrix, EigOptions, LevelSpec};
use aqc::transforms::{amplify_gap, check_primed, check_stoquastic, destoquasticize, random_xxzz, z2_sector_spectra, FrustrationFreeSpec, ProjectorTerm, Variant};

type Outcome = Result<String, String>;

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grover_gap_law() -> Outcome {
    let mut worst: (f64, f64) = (0.0, 0.0);
    for n in 2..=10 {
        let inst = make(&Family::Grover { n, marked: (1 << n) - 1 }, 0).map_err(|e| e.to_string())?;
        let prof = gap_profile(&inst.path, 201, LevelSpec::first(), true, &EigOptions::default()).map_err(|e| e.to_string())?;
        let want = 2f64.powf(-(n as f64) / 2.0);
        let (dg, ds) = ((prof.min_gap - want).abs(), (prof.s_min - 0.5).abs());
        worst = (worst.0.max(dg), worst.1.max(ds));
        if dg > 1e-8 || ds > 1e-6 {
            return Err(format!("n = {n}: min gap {} (want {want}), s_min {}", prof.min_gap, prof.s_min));
        }
    }
    Ok(format!("n = 2..10, worst |Δ − 2^(−n/2)| = {:.1e}, worst |s_min − 1/2| = {:.1e}", worst.0, worst.1))
}

fn grover_fidelity(n: usize, schedule: &Schedule, t_f: f64) -> f64 {
    let inst = make(&Family::Grover { n, marked: 0 }, 0).unwrap();
    let (two, psi) = inst.two_level.clone().unwrap();
    let r = evolve(&two, schedule, t_f, &psi, &EvolveOptions::default()).unwrap();
    assert!(r.norm_drift <= 1e-9);
    1.0 - adiabatic_error(&r, &two).unwrap()
}

/// Smallest t_f with fidelity ≥ 0.99: 2% geometric scan to the first crossing, then bisection.
fn threshold_time(n: usize, schedule: &Schedule) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.5);
    while grover_fidelity(n, schedule, hi) < 0.99 {
        lo = hi;
        hi *= 1.02;
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if grover_fidelity(n, schedule, mid) >= 0.99 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn grover_speedup() -> Outcome {
    let sizes: Vec<f64> = (4..=10).map(|n| (1u64 << n) as f64).collect();
    let rc: Vec<f64> = (4..=10).map(|n| threshold_time(n, &Schedule::roland_cerf(1 << n).unwrap())).collect();
    let lin: Vec<f64> = (4..=10).map(|n| threshold_time(n, &Schedule::linear())).collect();
    let a = log_log_fit(&sizes, &rc).map_err(|e| e.to_string())?.slope;
    let b = log_log_fit(&sizes, &lin).map_err(|e| e.to_string())?.slope;
    require((a - 0.5).abs() <= 0.05 && b >= 0.9, format!("roland_cerf exponent {a:.3} (want 0.5 ± 0.05), linear exponent {b:.3} (want ≥ 0.9)"))
}

fn twosat_ring() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [4, 6, 8] {
        let inst = make(&Family::TwosatRing { n, disagree: vec![] }, 0).map_err(|e| e.to_string())?;
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let numeric = eigvalsh(&spin_flip_even_matrix(&inst.path.assemble(s).unwrap()));
            let closed = ring_sector_spectrum(n, s).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&numeric, &closed));
        }
    }
    let (_, gap12) = ring_min_gap(12);
    let asym = 4.0 * std::f64::consts::PI / 36.0;
    let rel = (gap12 - asym).abs() / asym;
    require(worst <= 1e-8 && rel <= 0.05, format!("sector spectra worst deviation {worst:.1e}; n = 12 min gap {gap12:.5} vs 4π/(3n) = {asym:.5} ({:.2}%)", 100.0 * rel))
}

fn deutsch_jozsa() -> Outcome {
    let (mut min_gap, mut max_err) = (f64::INFINITY, 0.0f64);
    for n in 2..=8 {
        for balanced in [false, true] {
            let inst = make(&Family::DeutschJozsa { n, balanced }, 0).map_err(|e| e.to_string())?;
            let prof = gap_profile(&inst.path, 101, LevelSpec::first(), true, &EigOptions::default()).map_err(|e| e.to_string())?;
            min_gap = min_gap.min(prof.min_gap);
            let r = evolve(&inst.path, &Schedule::linear(), 20.0, &inst.initial_state, &EvolveOptions::default()).map_err(|e| e.to_string())?;
            max_err = max_err.max(adiabatic_error(&r, &inst.path).map_err(|e| e.to_string())?);
        }
    }
    require(
        min_gap >= 0.5f64.sqrt() - 1e-9 && max_err <= 0.01,
        format!("n = 2..8: smallest min gap {min_gap:.6} (want ≥ 1/√2), largest error at t_f = 20 {max_err:.2e}"),
    )
}

/// Crossing parameter α and constant C in t_f = C·n^6, chosen once by a scan of (α, C).
const GLUED_ALPHA: f64 = 0.2;
const GLUED_C: f64 = 0.02202;

fn glued_trees() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for n in [4usize, 6, 8] {
        let inst = make(&Family::GluedTrees { n, alpha: GLUED_ALPHA }, 0).map_err(|e| e.to_string())?;
        let t_f = GLUED_C * (n as f64).powi(6);
        let r = evolve(&inst.path, &Schedule::linear(), t_f, &inst.initial_state, &EvolveOptions::tracking(1)).map_err(|e| e.to_string())?;
        let end = r.final_state.amps[2 * n + 1].norm_sqr();
        let s_x = GLUED_ALPHA / 2f64.sqrt();
        let dip = r.overlap_trace.as_ref().unwrap().iter().filter(|(s, _)| *s > s_x && *s < 1.0 - s_x).map(|(_, p)| p[0]).fold(1.0, f64::min);
        ok &= end >= 0.5 && dip < 0.1 && r.norm_drift <= 1e-9;
        details.push(format!("n = {n}: t_f {t_f:.0}, final {end:.3}, ground weight dips to {dip:.3}"));
    }
    require(ok, details.join("; "))
}

fn history_state_compiler() -> Outcome {
    let mut worst_readout_ratio = f64::INFINITY;
    for seed in 0..20u64 {
        let n = 1 + (seed % 2) as usize;
        let l = 1 + ((seed / 2) % 4) as usize;
        let circ = GateCircuit::random(n, l, seed).map_err(|e| e.to_string())?;
        let comp = compile(&circ, 0).map_err(|e| e.to_string())?;
        let rep = validate(&comp, &ValidateOptions::default()).map_err(|e| e.to_string())?;
        let bound = 0.25 / (6.0 * l as f64).powi(2);
        let readout_floor = 0.9 / (l as f64 + 1.0);
        let fine = rep.ground_energy_0.abs() <= 1e-10
            && rep.ground_energy_1.abs() <= 1e-10
            && rep.history_overlap >= 1.0 - 1e-8
            && rep.s0_gap >= bound
            && rep.readout_probability >= readout_floor;
        if !fine {
            return Err(format!("seed {seed} (n = {n}, L = {l}): {rep:?}"));
        }
        worst_readout_ratio = worst_readout_ratio.min(rep.readout_probability / readout_floor);
    }
    Ok(format!("20 circuits pass; smallest readout / floor ratio {worst_readout_ratio:.3}"))
}

fn zzz(lambda: f64) -> GadgetSpec {
    GadgetSpec::new(3, vec![GadgetTerm::pauli(1.0, &[(0, Axis::Z), (1, Axis::Z), (2, Axis::Z)]).unwrap()], lambda).unwrap()
}

fn gadget_order() -> Outcome {
    let fit = verify_gadget(&zzz(0.0), &[0.02, 0.04, 0.06, 0.08]).map_err(|e| e.to_string())?;
    let eff = effective_hamiltonian(&build_gadget(&zzz(0.01)).map_err(|e| e.to_string())?, &[1]).map_err(|e| e.to_string())?;
    let want = 3.0 * 0.01f64.powi(3);
    let rel = (eff.splitting() - want).abs() / want;
    require(fit.slope() >= 3.5 && rel <= 0.25, format!("error-order slope {:.3} (want ≥ 3.5); splitting {:.4e} vs 3λ³ = {want:.1e} ({:.1}%)", fit.slope(), eff.splitting(), 100.0 * rel))
}

fn diag_projector(k: usize) -> CMatrix {
    let mut p = CMatrix::zeros(4, 4);
    p[(k, k)] = c(1.0);
    p
}

fn gap_amplification() -> Outcome {
    let terms = [(1.0, 1), (4.0, 2), (2.0, 3)];
    let spec = FrustrationFreeSpec::new(2, terms.iter().map(|&(weight, k)| ProjectorTerm { weight, qubits: vec![0, 1], projector: diag_projector(k) }).collect())
        .map_err(|e| e.to_string())?;
    let amp = amplify_gap(&spec, Variant::Bar).map_err(|e| e.to_string())?;
    let mut nonzero: Vec<f64> = amp.single_particle_spectrum().map_err(|e| e.to_string())?.into_iter().filter(|x| x.abs() > 1e-6).collect();
    nonzero.sort_by(f64::total_cmp);
    let mut want: Vec<f64> = terms.iter().flat_map(|&(w, _)| [w.sqrt(), -w.sqrt()]).collect();
    want.sort_by(f64::total_cmp);
    if nonzero.len() != want.len() {
        return Err(format!("nonzero single-particle levels {nonzero:?}, want {want:?}"));
    }
    let dev = max_abs_diff(&nonzero, &want);
    let primed = check_primed(&spec, 2.0).map_err(|e| e.to_string())?;
    require(dev <= 1e-8 && primed.zero_modes == 1, format!("±√λ deviation {dev:.1e}; primed zero modes {}", primed.zero_modes))
}

fn destoquastization() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let n = 2 + (seed % 3) as usize;
        let h = random_xxzz(n, seed).map_err(|e| e.to_string())?;
        let ht = destoquasticize(&h).map_err(|e| e.to_string())?;
        if !check_stoquastic(&ht).map_err(|e| e.to_string())?.stoquastic {
            return Err(format!("seed {seed}: output not stoquastic"));
        }
        let (minus, _) = z2_sector_spectra(&ht).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&minus, &eigvalsh(&h.to_matrix().unwrap())));
    }
    require(worst <= 1e-10, format!("50 inputs stoquastic after transform; worst sector deviation {worst:.1e}"))
}

fn spike_scaling() -> Outcome {
    let sizes = [32usize, 64, 128, 256];
    let mut gaps = Vec::new();
    for &n in &sizes {
        let inst = make(&Family::Spike { n }, 0).map_err(|e| e.to_string())?;
        let sym = inst.symmetric.as_ref().ok_or("spike has no symmetric path")?;
        gaps.push(gap_profile(&sym.path, 201, LevelSpec::first(), true, &EigOptions::default()).map_err(|e| e.to_string())?.min_gap);
    }
    let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let gamma = log_log_fit(&ns, &gaps).map_err(|e| e.to_string())?.slope;

    let spec = BenchmarkSpec {
        family: Family::Spike { n: 32 },
        sizes: sizes.to_vec(),
        solvers: vec![
            SolverSpec::Aqc {
                name: "aqc".into(),
                schedule: AqcSchedule::Linear,
                t_f: (0..=16).map(|i| 2.0 * 2f64.powf(i as f64 / 4.0)).collect(),
                sector: Sector::Symmetric,
                steps_per_unit: Some(1.0),
            },
            SolverSpec::Sa {
                name: "sa".into(),
                schedule: SaSchedule::LinearT { t_init: 3.0, t_final: 0.05 },
                sweeps: vec![1000],
                repetitions: 400,
                selection: SpinSelection::Random,
            },
        ],
        p_d: 0.99,
        seed: 0,
    };
    let report = benchmark(&spec).map_err(|e| e.to_string())?;
    let r2 = report.fit("aqc").and_then(|f| f.log_log.as_ref()).map(|f| f.r_squared).unwrap_or(f64::NAN);
    let tts: Vec<String> = report.optima_for("aqc").iter().map(|o| format!("{:.0}", o.tts_opt)).collect();
    let sa: Vec<f64> = sizes.iter().map(|&n| report.rows.iter().find(|r| r.solver == "sa" && r.n == n).map(|r| r.success).unwrap_or(f64::NAN)).collect();
    let sa_decays = sa.windows(2).all(|w| w[1] <= w[0]) && sa[0] > sa[sa.len() - 1];
    require(
        (gamma + 0.5).abs() <= 0.1 && r2 >= 0.98 && sa_decays,
        format!("gap exponent {gamma:.3}; AQC TTS_opt [{}] log-log R² {r2:.4} (want ≥ 0.98); SA success {sa:?}", tts.join(", ")),
    )
}

fn pagerank() -> Outcome {
    let sizes = [5usize, 6, 7, 8, 12, 16, 24, 32, 48, 64];
    let (mut worst_overlap, mut worst_sector): (f64, f64) = (1.0, 0.0);
    for (i, &n) in sizes.iter().enumerate() {
        let g = GraphSpec::preferential_attachment(n, 1 + i % 3, i as u64).map_err(|e| e.to_string())?;
        let pr = pagerank_pipeline(&g, 0.85, None).map_err(|e| e.to_string())?;
        worst_overlap = worst_overlap.min(pr.ground_overlap());
        if n <= 8 {
            let full = pr.embedded_path().map_err(|e| e.to_string())?;
            for k in 0..=4 {
                let s = k as f64 / 4.0;
                let h = full.assemble(s).unwrap();
                let sector = CMatrix::from_fn(n, n, |a, b| h[(excitation_index(n, a), excitation_index(n, b))]);
                worst_sector = worst_sector.max(max_abs_diff(&eigvalsh(&sector), &eigvalsh(&pr.path.assemble(s).unwrap())));
            }
        }
    }
    require(
        worst_overlap >= 1.0 - 1e-8 && worst_sector <= 1e-10,
        format!("10 graphs, worst ground overlap 1 − {:.1e}; embedded sector deviation {worst_sector:.1e}", 1.0 - worst_overlap),
    )
}

fn invariant_suites() -> Outcome {
    let failed: Vec<String> = common::SUITE.iter().filter_map(|(name, f)| f(true).err().map(|e| format!("{name}: {e}"))).collect();
    require(failed.is_empty(), if failed.is_empty() { format!("{} invariant suites pass", common::SUITE.len()) } else { failed.join("; ") })
}

type Criterion = (&'static str, f64, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    ("grover gap law", 60.0, grover_gap_law),
    ("grover speedup", 600.0, grover_speedup),
    ("2-sat ring", 120.0, twosat_ring),
    ("deutsch-jozsa", 120.0, deutsch_jozsa),
    ("glued trees", 300.0, glued_trees),
    ("history-state compiler", 600.0, history_state_compiler),
    ("gadget order", 300.0, gadget_order),
    ("gap amplification", 60.0, gap_amplification),
    ("de-stoquastization", 120.0, destoquastization),
    ("spike scaling", 1200.0, spike_scaling),
    ("pagerank", 300.0, pagerank),
    ("invariant suites", 900.0, invariant_suites),
];

#[test]
fn acceptance() {
    let mut failures = Vec::new();
    for (i, (name, budget, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) if secs <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; took {secs:.0} s over the {budget:.0} s budget")),
            Err(d) => (false, d),
        };
        let line = format!("[{}] {:>2} {name}: {detail} ({secs:.1} s)\n", if ok { "PASS" } else { "FAIL" }, i + 1);
        // Written past the test harness capture so every line shows in the log.
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !ok {
            failures.push(name.to_string());
        }
    }
    assert!(failures.is_empty(), "failed criteria: {}", failures.join(", "));
}
