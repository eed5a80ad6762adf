//! Module invariants as property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use aqc::annealer::{simulated_annealing, tts, SaConfig, SaOptions, SaSchedule, SpinSelection};
use aqc::bounds::{jrs, sufficiency_check, Multiplicity};
use aqc::evolution::{adiabatic_error, evolve, EvolveOptions};
use aqc::fit::log_log_fit;
use aqc::linalg::{eigvalsh, hermitian_defect, op_norm, random_unit, CMatrix};
use aqc::operators::{reduce_symmetric, uniform_state, Axis, Basis, Coeff, HamiltonianPath, OperatorSum, StateVector};
use aqc::problems::{classical_solve, grover_gap, make, Family};
use aqc::schedules::Schedule;
use aqc::spectra::{gap_at, EigOptions, LevelSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::json;

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

#[derive(Clone, Debug)]
pub struct RandomSum {
    pub n: usize,
    pub terms: Vec<(f64, Vec<(usize, usize)>)>,
    pub projectors: Vec<(f64, usize, bool)>,
}

impl RandomSum {
    pub fn build(&self) -> OperatorSum {
        let mut h = OperatorSum::new(self.n);
        for (c, fs) in &self.terms {
            let mut seen = vec![false; self.n];
            let factors: Vec<(usize, Axis)> =
                fs.iter().filter(|(q, _)| *q < self.n && !std::mem::replace(&mut seen[*q], true)).map(|&(q, a)| (q, AXES[a])).collect();
            h.add_pauli(*c, &factors).unwrap();
        }
        for &(c, state, x) in &self.projectors {
            h.add_projector(c, state % self.dim(), if x { Basis::X } else { Basis::Z }).unwrap();
        }
        h
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Transverse driver to this sum, linearly.
    pub fn path(&self) -> HamiltonianPath {
        let mut path = HamiltonianPath::qubits(self.n);
        path.push_sum(Coeff::one_minus_s(), transverse(self.n)).unwrap();
        path.push_sum(Coeff::s(), self.build()).unwrap();
        path
    }
}

pub fn random_sum(min_n: usize, max_n: usize) -> impl Strategy<Value = RandomSum> {
    (min_n..=max_n).prop_flat_map(|n| {
        let factor = (0..n, 0..3usize);
        let term = (-2.0..2.0f64, prop::collection::vec(factor, 0..=n.min(3)));
        let projector = (-1.0..1.0f64, 0..(1usize << n), any::<bool>());
        (Just(n), prop::collection::vec(term, 1..6), prop::collection::vec(projector, 0..2))
            .prop_map(|(n, terms, projectors)| RandomSum { n, terms, projectors })
    })
}

pub fn transverse(n: usize) -> OperatorSum {
    let mut h = OperatorSum::new(n);
    for q in 0..n {
        h.add_identity(0.5);
        h.add_pauli(-0.5, &[(q, Axis::X)]).unwrap();
    }
    h
}

/// Transverse driver to a random diagonal Ising final; `None` unless the final ground state is
/// separated by at least 0.1.
pub fn ising_path(n: usize, fields: &[f64], couplings: &[f64]) -> Option<HamiltonianPath> {
    let mut h1 = OperatorSum::new(n);
    for q in 0..n {
        h1.add_pauli(fields[q], &[(q, Axis::Z)]).unwrap();
    }
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            h1.add_pauli(couplings[k], &[(i, Axis::Z), (j, Axis::Z)]).unwrap();
            k += 1;
        }
    }
    let mut d = h1.diagonal();
    d.sort_by(f64::total_cmp);
    (d[1] - d[0] > 0.1).then(|| HamiltonianPath::interpolation(transverse(n), h1).unwrap())
}

pub fn ising_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0..1.0f64, n), prop::collection::vec(-1.0..1.0f64, n * (n - 1) / 2)))
}

pub fn uniform(n: usize) -> StateVector {
    StateVector::full(uniform_state(n)).unwrap()
}

fn runner(cases: u32, deterministic: bool) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    if deterministic {
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    } else {
        TestRunner::new(config)
    }
}

fn check<S: Strategy>(cases: u32, deterministic: bool, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases, deterministic).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn hermiticity(det: bool) -> Result<(), String> {
    check(100, det, (random_sum(1, 5), random_sum(1, 5), 0.0..=1.0f64), |(a, b, s)| {
        let n = a.n.max(b.n);
        let mut path = HamiltonianPath::qubits(n);
        path.push_sum(Coeff::one_minus_s(), RandomSum { n, ..a }.build()).unwrap();
        path.push_sum(Coeff::s_one_minus_s(), RandomSum { n, ..b }.build()).unwrap();
        path.push_sum(Coeff::poly(&[0.3, -1.0, 2.0]), transverse(n)).unwrap();
        let d = hermitian_defect(&path.assemble(s).unwrap());
        prop_assert!(d <= 1e-12, "defect {d}");
        Ok(())
    })
}

pub fn matrix_free_consistency(det: bool) -> Result<(), String> {
    check(100, det, (random_sum(1, 10), 0.0..=1.0f64, any::<u64>()), |(a, s, seed)| {
        let path = a.path();
        let psi = random_unit(a.dim(), seed);
        let dense = path.assemble(s).unwrap() * &psi;
        let d = (path.apply_vec(s, &psi) - dense).norm();
        prop_assert!(d <= 1e-10, "deviation {d}");
        Ok(())
    })
}

pub fn coefficient_derivatives(det: bool) -> Result<(), String> {
    check(100, det, prop::collection::vec(-3.0..3.0f64, 1..6), |c| {
        let mut path = HamiltonianPath::qubits(1);
        path.push_sum(Coeff::poly(&c), transverse(1)).unwrap();
        path.push_sum(Coeff::s_one_minus_s().scaled(c[0]), transverse(1)).unwrap();
        let d = path.coefficient_derivative_defect(101);
        prop_assert!(d <= 1e-6, "defect {d}");
        Ok(())
    })
}

pub fn symmetric_sector_inclusion(det: bool) -> Result<(), String> {
    check(24, det, (0..4usize, 2..=8usize, 0.0..=1.0f64), |(pick, n, s)| {
        let family = match pick {
            0 => Family::PlainHw { n },
            1 => Family::Pspin { n, p: 3 },
            2 => Family::Plateau { n, l: 0, u: n.min(2) },
            _ => Family::Catalyst3local { n: n.max(3), catalyst: true },
        };
        let inst = make(&family, 1).unwrap();
        let full = eigvalsh(&inst.path.assemble(s).unwrap());
        let sym = reduce_symmetric(&inst.path).unwrap();
        for e in eigvalsh(&sym.path.assemble(s).unwrap()) {
            prop_assert!(full.iter().any(|f| (f - e).abs() <= 1e-9), "{e} missing from the full spectrum");
        }
        Ok(())
    })
}

pub fn grover_gap_agreement(det: bool) -> Result<(), String> {
    check(24, det, (2..=8usize, any::<usize>(), 0.0..=1.0f64), |(n, marked, s)| {
        let inst = make(&Family::Grover { n, marked: marked % (1 << n) }, 0).unwrap();
        let g = gap_at(&inst.path, s, LevelSpec::first(), &EigOptions::default()).unwrap();
        let want = grover_gap((1u64 << n) as f64, 1.0, s);
        prop_assert!((g - want).abs() <= 1e-8, "{g} vs {want}");
        Ok(())
    })
}

pub fn all_marked_gap(det: bool) -> Result<(), String> {
    check(24, det, (1..=5usize, 0.0..=1.0f64), |(n, s)| {
        let inst = make(&Family::MultiMarked { n, marked: (0..1 << n).collect() }, 0).unwrap();
        let (two, _) = inst.two_level.clone().unwrap();
        let e = eigvalsh(&two.assemble(s).unwrap());
        prop_assert!((e[1] - e[0] - 1.0).abs() <= 1e-10);
        Ok(())
    })
}

pub fn unitarity_and_tracker(det: bool) -> Result<(), String> {
    check(24, det, (random_sum(1, 3), 0.1..30.0f64, 0..4u32), |(a, t_f, v)| {
        let sched = Schedule::reg_beta(v).unwrap();
        let opts = EvolveOptions { track: 3, samples: 21, ..EvolveOptions::default() };
        let r = evolve(&a.path(), &sched, t_f, &uniform(a.n), &opts).unwrap();
        prop_assert!(r.norm_drift <= 1e-9, "drift {}", r.norm_drift);
        for (s, p) in r.overlap_trace.unwrap() {
            prop_assert!(p.iter().sum::<f64>() <= 1.0 + 1e-8, "tracked weight above 1 at s = {s}");
        }
        Ok(())
    })
}

pub fn schedule_equivalence(det: bool) -> Result<(), String> {
    check(24, det, (random_sum(1, 3), 0.5..10.0f64, 1..4u32), |(a, t_f, v)| {
        let path = a.path();
        let sched = Schedule::reg_beta(v).unwrap();
        let opts = EvolveOptions { steps: Some(2000), ..EvolveOptions::default() };
        let direct = evolve(&path, &sched, t_f, &uniform(a.n), &opts).unwrap();
        let repar = evolve(&path.reparametrize(&sched), &Schedule::linear(), t_f, &uniform(a.n), &opts).unwrap();
        let d = (direct.final_state.amps - repar.final_state.amps).norm();
        prop_assert!(d <= 1e-8, "states differ by {d}");
        Ok(())
    })
}

/// Diabatic distance √(1 − F) on plain-HW n = 4 over a decade of t_f; returns the fitted power.
pub fn diabatic_power() -> f64 {
    let inst = make(&Family::PlainHw { n: 4 }, 0).unwrap();
    let (ts, ds): (Vec<f64>, Vec<f64>) = (0..=20)
        .map(|k| {
            let t_f = 20.0 * 10f64.powf(k as f64 / 20.0);
            let r = evolve(&inst.path, &Schedule::linear(), t_f, &inst.initial_state, &EvolveOptions::default()).unwrap();
            assert!(r.norm_drift <= 1e-9);
            (t_f, adiabatic_error(&r, &inst.path).unwrap().sqrt())
        })
        .unzip();
    log_log_fit(&ts, &ds).unwrap().slope
}

pub fn inverse_time_error(_det: bool) -> Result<(), String> {
    let p = diabatic_power();
    if (p + 1.0).abs() <= 0.2 {
        Ok(())
    } else {
        Err(format!("fitted power {p}"))
    }
}

pub fn schedule_boundaries(det: bool) -> Result<(), String> {
    check(24, det, (0..3usize, 0..=50u32, 2u64..1_000_000, 0.5..3.0f64), |(pick, v, big_n, p)| {
        let sched = match pick {
            0 => Schedule::reg_beta(v).unwrap(),
            1 => Schedule::roland_cerf(big_n).unwrap(),
            _ => {
                let nn = big_n.min(4096) as f64;
                Schedule::local_power(&|u| grover_gap(nn, 1.0, u), p).unwrap()
            }
        };
        prop_assert_eq!(sched.value(0.0), 0.0);
        prop_assert_eq!(sched.value(1.0), 1.0);
        prop_assert!(sched.validate().is_ok());
        let mut prev = 0.0;
        for k in 0..=1000 {
            let a = sched.value(k as f64 / 1000.0);
            prop_assert!(a >= prev, "decreasing at s = {}", k as f64 / 1000.0);
            prev = a;
        }
        Ok(())
    })
}

pub fn derivative_norm_identity(det: bool) -> Result<(), String> {
    check(24, det, ising_strategy(4), |(n, f, j)| {
        let Some(path) = ising_path(n, &f, &j) else { return Ok(()) };
        let comps = path.component_matrices().unwrap();
        let diff: CMatrix = &comps[1] - &comps[0];
        let report = jrs(&path, 21, &Multiplicity::Constant(1)).unwrap();
        for b in &report.samples {
            prop_assert!(b.d1_norm <= op_norm(&diff) + 1e-9);
        }
        Ok(())
    })
}

pub fn jrs_sufficiency(det: bool) -> Result<(), String> {
    check(12, det, ising_strategy(3), |(n, f, j)| {
        let Some(path) = ising_path(n, &f, &j) else { return Ok(()) };
        // Safety 10 runs at t_f_sufficient(0.1) itself, where the bound already guarantees the target.
        let c = sufficiency_check(&path, &Schedule::linear(), &uniform(n), 0.1, 10.0, 101).unwrap();
        prop_assert!((c.t_f_run - c.t_f_sufficient).abs() <= 1e-9 * c.t_f_run);
        prop_assert!(c.measured_error <= 0.1, "error {} at t_f {}", c.measured_error, c.t_f_run);
        Ok(())
    })
}

pub fn classical_oracle(det: bool) -> Result<(), String> {
    check(24, det, (0..7usize, 3..=10usize, any::<u64>()), |(pick, n, seed)| {
        let family: Family = serde_json::from_value(match pick {
            0 => json!({"family": "sk", "n": n}),
            1 => json!({"family": "sk", "n": n, "bimodal": true}),
            2 => json!({"family": "number_partition", "n": n}),
            3 => json!({"family": "hopfield", "n": n}),
            4 => json!({"family": "exact_cover", "n": n, "m": n}),
            5 => json!({"family": "twosat_ring", "n": n + n % 2}),
            _ => json!({"family": "pspin", "n": n, "p": 3}),
        })
        .unwrap();
        let inst = make(&family, seed).unwrap();
        let h1 = inst.path.assemble(1.0).unwrap();
        let min = (0..inst.path.dim()).map(|x| h1[(x, x)].re).fold(f64::INFINITY, f64::min);
        let sol = classical_solve(&inst).unwrap();
        prop_assert!((sol.energy - min).abs() <= 1e-9, "{}: {} vs {min}", family.tag(), sol.energy);
        prop_assert!((h1[(sol.index, sol.index)].re - min).abs() <= 1e-9);
        Ok(())
    })
}

pub fn tts_shape(det: bool) -> Result<(), String> {
    check(100, det, (0.1..100.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.5..0.999f64), |(t_f, p1, p2, p_d)| {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(tts(t_f, lo, p_d) >= tts(t_f, hi, p_d));
        prop_assert!(tts(t_f, hi, p_d) >= t_f);
        prop_assert!((tts(t_f, p_d * (1.0 - 1e-12), p_d) - t_f).abs() <= 1e-6 * t_f);
        Ok(())
    })
}

pub fn annealing_determinism(det: bool) -> Result<(), String> {
    check(12, det, (4..=12usize, any::<u64>(), 1..50usize), |(n, seed, sweeps)| {
        let inst = make(&Family::Sk { n, bimodal: false }, seed).unwrap();
        let cfg = SaConfig {
            schedule: SaSchedule::LinearT { t_init: 3.0, t_final: 0.05 },
            sweeps,
            selection: SpinSelection::Random,
            repetitions: 20,
            seed,
        };
        let a = simulated_annealing(&inst, &cfg, SaOptions::default()).unwrap();
        let b = simulated_annealing(&inst, &cfg, SaOptions::default()).unwrap();
        prop_assert_eq!(a.successes, b.successes);
        prop_assert_eq!(a.best_energy.to_bits(), b.best_energy.to_bits());
        Ok(())
    })
}

pub type Invariant = (&'static str, fn(bool) -> Result<(), String>);

pub const SUITE: &[Invariant] = &[
    ("operator hermiticity", hermiticity),
    ("matrix-free consistency", matrix_free_consistency),
    ("coefficient derivatives", coefficient_derivatives),
    ("symmetric-sector inclusion", symmetric_sector_inclusion),
    ("grover gap agreement", grover_gap_agreement),
    ("all-marked gap", all_marked_gap),
    ("unitarity and tracker", unitarity_and_tracker),
    ("schedule equivalence", schedule_equivalence),
    ("inverse-time diabatic error", inverse_time_error),
    ("schedule boundaries and monotonicity", schedule_boundaries),
    ("derivative norm identity", derivative_norm_identity),
    ("jrs sufficiency", jrs_sufficiency),
    ("classical oracle", classical_oracle),
    ("tts shape", tts_shape),
    ("annealing determinism", annealing_determinism),
];
