//! Schrödinger propagation along a scheduled path, diabatic error, and Trotterized emulation.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, Csv};
use crate::linalg::{c, expm_herm, inner, krylov_expm_apply, norm, op_norm, CMatrix, CVector, LanczosOptions};
use crate::operators::{HamiltonianPath, StateVector};
use crate::schedules::{Schedule, ScheduleKind};
use crate::spectra::{eig_low, Method};

pub const NORM_DRIFT_ABORT: f64 = 1e-6;

/// Largest dimension propagated with dense exponentials.
pub const DENSE_STEP_DIM: usize = 64;

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Fixed step count; `None` uses `default_steps`.
    pub steps: Option<usize>,
    /// Number of instantaneous eigenstates tracked (0 disables tracking).
    pub track: usize,
    /// Uniform tracker samples including both endpoints.
    pub samples: usize,
    pub krylov_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { steps: None, track: 0, samples: 101, krylov_tol: 1e-12 }
    }
}

impl EvolveOptions {
    pub fn tracking(k: usize) -> Self {
        EvolveOptions { track: k, ..Self::default() }
    }
}

pub fn default_steps(t_f: f64, h_norm: f64) -> usize {
    1000usize.max((20.0 * t_f * h_norm).ceil() as usize)
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub final_state: StateVector,
    pub t_f: f64,
    /// (s, |⟨ε_j(s)|ψ(s)⟩|² for j < track).
    pub overlap_trace: Option<Vec<(f64, Vec<f64>)>>,
    pub step_count: usize,
    pub norm_drift: f64,
}

impl EvolutionResult {
    /// CSV `s,p0,p1,...`; empty when tracking was off.
    pub fn trace_csv(&self) -> String {
        let Some(trace) = &self.overlap_trace else { return String::new() };
        let k = trace.first().map(|r| r.1.len()).unwrap_or(0);
        let mut header = vec!["s".to_string()];
        header.extend((0..k).map(|j| format!("p{j}")));
        let mut csv = Csv::with_header(header);
        for (s, p) in trace {
            let mut cells = vec![fmt_f64(*s)];
            cells.extend(p.iter().map(|&x| fmt_f64(x)));
            csv.row(&cells);
        }
        csv.into_string()
    }
}

// Fourth-order commutator-free Magnus: two exponentials at the Gauss nodes.
const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const CF_A1: f64 = 0.25 - SQRT3_6;
const CF_A2: f64 = 0.25 + SQRT3_6;

fn scheduled(path: &HamiltonianPath, schedule: &Schedule) -> HamiltonianPath {
    match schedule.kind() {
        ScheduleKind::Linear => path.clone(),
        _ => path.reparametrize(schedule),
    }
}

/// One step of i dψ/ds = t_f·H(s)ψ from s0 to s0 + h.
struct Stepper<'a> {
    ham: &'a HamiltonianPath,
    t_f: f64,
    dense: bool,
    tol: f64,
}

impl Stepper<'_> {
    fn new(ham: &HamiltonianPath, t_f: f64, tol: f64) -> Stepper<'_> {
        Stepper { ham, t_f, dense: ham.dim() <= DENSE_STEP_DIM, tol }
    }

    fn nodes(s0: f64, h: f64) -> (f64, f64) {
        (s0 + (0.5 - SQRT3_6) * h, s0 + (0.5 + SQRT3_6) * h)
    }

    fn dense_factors(&self, s0: f64, h: f64) -> Result<[CMatrix; 2]> {
        let (sa, sb) = Self::nodes(s0, h);
        let ha = self.ham.assemble(sa)?;
        let hb = self.ham.assemble(sb)?;
        let tau = self.t_f * h;
        let first = expm_herm(&(&ha * c(CF_A2) + &hb * c(CF_A1)), tau);
        let second = expm_herm(&(&ha * c(CF_A1) + &hb * c(CF_A2)), tau);
        Ok([first, second])
    }

    fn step(&self, s0: f64, h: f64, psi: &CVector) -> Result<CVector> {
        if self.dense {
            let [first, second] = self.dense_factors(s0, h)?;
            return Ok(&second * (&first * psi));
        }
        let (sa, sb) = Self::nodes(s0, h);
        let tau = self.t_f * h;
        let mix = |wa: f64, wb: f64| {
            move |v: &CVector| {
                let mut out = CVector::zeros(v.len());
                self.ham.apply_add(sa, v.as_slice(), out.as_mut_slice(), wa);
                self.ham.apply_add(sb, v.as_slice(), out.as_mut_slice(), wb);
                out
            }
        };
        let mid = krylov_expm_apply(&mix(CF_A2, CF_A1), psi, tau, self.tol);
        Ok(krylov_expm_apply(&mix(CF_A1, CF_A2), &mid, tau, self.tol))
    }
}

fn track_overlaps(ham: &HamiltonianPath, s: f64, psi: &CVector, k: usize) -> Result<Vec<f64>> {
    let pairs = eig_low(ham, s, k.min(ham.dim()), Method::Auto, &LanczosOptions::default()).map_err(|e| e.at(s))?;
    Ok(pairs.iter().map(|(_, v)| inner(v, psi).norm_sqr()).collect())
}

/// Integrate i dψ/ds = t_f·H(A(s))ψ from s = 0 to 1.
pub fn evolve(path: &HamiltonianPath, schedule: &Schedule, t_f: f64, psi0: &StateVector, opts: &EvolveOptions) -> Result<EvolutionResult> {
    if psi0.dim() != path.dim() {
        return Err(Error::DimensionMismatch { expected: path.dim(), got: psi0.dim() });
    }
    if !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::invalid(format!("t_f must be finite and non-negative, got {t_f}")));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("initial state norm {} is not 1", psi0.norm())));
    }
    if opts.track > 0 && opts.samples < 2 {
        return Err(Error::invalid("tracker needs at least 2 samples"));
    }
    let ham = scheduled(path, schedule);
    let mut steps = opts.steps.unwrap_or_else(|| default_steps(t_f, path.norm_bound()));
    if steps == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    let intervals = opts.samples.saturating_sub(1).max(1);
    if opts.track > 0 {
        steps = steps.div_ceil(intervals) * intervals;
    }
    let h = 1.0 / steps as f64;
    if h * t_f * path.norm_bound() > 1e3 {
        return Err(Error::invalid(format!("step underflow: {steps} steps too few for t_f = {t_f}")));
    }
    let stepper = Stepper::new(&ham, t_f, opts.krylov_tol);
    let mut psi = psi0.amps.clone();
    let mut drift: f64 = 0.0;
    let mut trace = Vec::new();
    let per_sample = steps / intervals;
    if opts.track > 0 {
        trace.push((0.0, track_overlaps(&ham, 0.0, &psi, opts.track)?));
    }
    for i in 0..steps {
        let s0 = i as f64 * h;
        psi = stepper.step(s0, h, &psi).map_err(|e| e.at(s0))?;
        let d = (norm(&psi) - 1.0).abs();
        drift = drift.max(d);
        if d > NORM_DRIFT_ABORT {
            return Err(Error::NormDrift { drift: d, limit: NORM_DRIFT_ABORT, s: s0 + h });
        }
        if opts.track > 0 && (i + 1) % per_sample == 0 {
            let s = (i + 1) as f64 * h;
            trace.push((s, track_overlaps(&ham, s, &psi, opts.track)?));
        }
    }
    Ok(EvolutionResult {
        final_state: StateVector::new(psi, path.state_kind()),
        t_f,
        overlap_trace: (opts.track > 0).then_some(trace),
        step_count: steps,
        norm_drift: drift,
    })
}

/// Orthonormal basis of the ground space of H(s), within τ = 1e−8·max(1, ‖H‖).
pub fn ground_space(path: &HamiltonianPath, s: f64) -> Result<Vec<CVector>> {
    let tol = 1e-8 * path.norm_bound().max(1.0);
    let dim = path.dim();
    let mut k = 2.min(dim);
    loop {
        let pairs = eig_low(path, s, k, Method::Auto, &LanczosOptions::default())?;
        let e0 = pairs[0].0;
        let within = pairs.iter().take_while(|p| p.0 - e0 <= tol).count();
        if within < k || k == dim {
            return Ok(pairs.into_iter().take(within).map(|p| p.1).collect());
        }
        k = (2 * k).min(dim);
    }
}

/// 1 − weight of the final state on the ground space of H(1).
pub fn adiabatic_error(result: &EvolutionResult, path: &HamiltonianPath) -> Result<f64> {
    let psi = &result.final_state.amps;
    let w: f64 = ground_space(path, 1.0)?.iter().map(|g| inner(g, psi).norm_sqr()).sum();
    Ok((1.0 - w / psi.norm_squared()).clamp(0.0, 1.0))
}

/// Exact propagator U(1, 0) of i dU/ds = t_f·H(s)U by dense fourth-order steps.
pub fn exact_propagator(path: &HamiltonianPath, t_f: f64, steps: usize) -> Result<CMatrix> {
    let stepper = Stepper { ham: path, t_f, dense: true, tol: 0.0 };
    let h = 1.0 / steps as f64;
    let mut u = CMatrix::identity(path.dim(), path.dim());
    for i in 0..steps {
        let [first, second] = stepper.dense_factors(i as f64 * h, h)?;
        u = &second * (&first * u);
    }
    Ok(u)
}

/// Product of 2M split exponentials approximating a two-component path.
#[derive(Clone, Debug)]
pub struct Trotterization {
    pub t_f: f64,
    pub m: usize,
    /// Per-step unitaries in application order: the H_1 factor of step m, then its H_0 factor.
    pub factors: Vec<CMatrix>,
}

pub const TROTTER_CHECK_MAX_QUBITS: usize = 8;

/// U″_m = exp(−iΔt f_0(s_m) H_0)·exp(−iΔt f_1(s_m) H_1) with s_m = (m − 1/2)/M, Δt = t_f/M.
///
/// Midpoint sampling makes the product exact when H_0 and H_1 commute and the coefficients are linear.
pub fn trotterize(path: &HamiltonianPath, t_f: f64, m: usize) -> Result<Trotterization> {
    let comps = path.components();
    if comps.len() != 2 {
        return Err(Error::Unsupported(format!("trotterization needs two components, path has {}", comps.len())));
    }
    if m == 0 {
        return Err(Error::invalid("M must be positive"));
    }
    let mut parts = Vec::with_capacity(2);
    for (_, op) in comps {
        let mut mat = CMatrix::zeros(path.dim(), path.dim());
        op.add_to_matrix(&mut mat, 1.0);
        parts.push(mat);
    }
    let dt = t_f / m as f64;
    let mut factors = Vec::with_capacity(2 * m);
    for step in 1..=m {
        let s = (step as f64 - 0.5) / m as f64;
        factors.push(expm_herm(&parts[1], dt * comps[1].0.value(s)));
        factors.push(expm_herm(&parts[0], dt * comps[0].0.value(s)));
    }
    Ok(Trotterization { t_f, m, factors })
}

impl Trotterization {
    pub fn product(&self) -> CMatrix {
        let d = self.factors[0].nrows();
        self.factors.iter().fold(CMatrix::identity(d, d), |acc, f| f * acc)
    }

    /// ‖U_exact − Π_m U″_m‖ in operator norm.
    pub fn deviation(&self, path: &HamiltonianPath) -> Result<f64> {
        if path.n_qubits().map_or(path.dim() > 1 << TROTTER_CHECK_MAX_QUBITS, |n| n > TROTTER_CHECK_MAX_QUBITS) {
            return Err(Error::DimensionLimit { n: path.n_qubits().unwrap_or(0), limit: TROTTER_CHECK_MAX_QUBITS });
        }
        let steps = 2000usize.max((40.0 * self.t_f * path.norm_bound()).ceil() as usize);
        let exact = exact_propagator(path, self.t_f, steps)?;
        Ok(op_norm(&(exact - self.product())))
    }
}

/// Computational-basis measurement counts from `shots` samples.
pub fn sample_counts(probabilities: &[f64], shots: usize, seed: u64) -> Vec<usize> {
    let mut rng = crate::rng::rng(seed);
    let total: f64 = probabilities.iter().sum();
    let mut counts = vec![0; probabilities.len()];
    for _ in 0..shots {
        let mut r = rng.gen::<f64>() * total;
        let mut idx = probabilities.len() - 1;
        for (i, &p) in probabilities.iter().enumerate() {
            if r < p {
                idx = i;
                break;
            }
            r -= p;
        }
        counts[idx] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::operators::{basis_state, uniform_state, Axis, Basis, OperatorSum};

    fn grover(n: usize, marked: usize) -> HamiltonianPath {
        let mut h0 = OperatorSum::new(n);
        h0.add_identity(1.0);
        h0.add_uniform(-1.0).unwrap();
        let mut h1 = OperatorSum::new(n);
        h1.add_identity(1.0);
        h1.add_projector(-1.0, marked, Basis::Z).unwrap();
        HamiltonianPath::interpolation(h0, h1).unwrap()
    }

    #[test]
    fn stationary_state_picks_up_phase() {
        let mut z = OperatorSum::new(1);
        z.add_pauli(1.0, &[(0, Axis::Z)]).unwrap();
        let p = HamiltonianPath::constant(z).unwrap();
        let psi0 = StateVector::full(basis_state(1, 0)).unwrap();
        let r = evolve(&p, &Schedule::linear(), std::f64::consts::PI, &psi0, &EvolveOptions::default()).unwrap();
        assert!((r.final_state.amps[0] + ONE).norm() < 1e-10);
        assert!(r.final_state.amps[1].norm() < 1e-12);
        assert!(r.norm_drift <= 1e-9);
    }

    #[test]
    fn grover_two_qubits_with_local_schedule() {
        let p = grover(2, 2);
        let sched = Schedule::roland_cerf(4).unwrap();
        let t_f = 10.0 * std::f64::consts::FRAC_PI_2 * 2.0;
        let psi0 = StateVector::full(uniform_state(2)).unwrap();
        let r = evolve(&p, &sched, t_f, &psi0, &EvolveOptions::tracking(2)).unwrap();
        assert!(r.final_state.probabilities()[2] >= 0.99);
        let trace = r.overlap_trace.as_ref().unwrap();
        assert_eq!(trace.len(), 101);
        assert!(trace.iter().all(|(_, p)| p.iter().sum::<f64>() <= 1.0 + 1e-8));
        assert!(adiabatic_error(&r, &p).unwrap() <= 0.01);
        assert!(r.trace_csv().starts_with("s,p0,p1\n"));
    }

    #[test]
    fn schedule_equivalence() {
        let p = grover(3, 5);
        let sched = Schedule::roland_cerf(8).unwrap();
        let psi0 = StateVector::full(uniform_state(3)).unwrap();
        let opts = EvolveOptions { steps: Some(3000), ..EvolveOptions::default() };
        let a = evolve(&p, &sched, 12.0, &psi0, &opts).unwrap();
        let b = evolve(&p.reparametrize(&sched), &Schedule::linear(), 12.0, &psi0, &opts).unwrap();
        assert!(norm(&(a.final_state.amps - b.final_state.amps)) < 1e-8);
    }

    #[test]
    fn krylov_and_dense_steppers_agree() {
        let p = grover(7, 9);
        let psi0 = StateVector::full(uniform_state(7)).unwrap();
        let opts = EvolveOptions { steps: Some(400), ..EvolveOptions::default() };
        let kr = evolve(&p, &Schedule::linear(), 8.0, &psi0, &opts).unwrap();
        let u = exact_propagator(&p, 8.0, 400).unwrap();
        assert!(norm(&(kr.final_state.amps - &u * &psi0.amps)) < 1e-9);
    }

    #[test]
    fn stepper_is_fourth_order() {
        let p = grover(2, 1);
        let psi0 = StateVector::full(uniform_state(2)).unwrap();
        let run = |steps| {
            let o = EvolveOptions { steps: Some(steps), ..EvolveOptions::default() };
            evolve(&p, &Schedule::linear(), 6.0, &psi0, &o).unwrap().final_state.amps
        };
        let reference = run(4000);
        let e1 = norm(&(run(20) - &reference));
        let e2 = norm(&(run(40) - &reference));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn adiabatic_error_limits() {
        let p = grover(2, 3);
        let g = basis_state(2, 3);
        let mk = |amps| EvolutionResult { final_state: StateVector::full(amps).unwrap(), t_f: 1.0, overlap_trace: None, step_count: 1, norm_drift: 0.0 };
        assert!(adiabatic_error(&mk(g), &p).unwrap() < 1e-12);
        assert!((adiabatic_error(&mk(basis_state(2, 0)), &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn commuting_parts_split_exactly() {
        let mut h0 = OperatorSum::new(2);
        h0.add_pauli(0.7, &[(0, Axis::Z)]).unwrap();
        let mut h1 = OperatorSum::new(2);
        h1.add_pauli(-1.3, &[(0, Axis::Z), (1, Axis::Z)]).unwrap();
        let p = HamiltonianPath::interpolation(h0, h1).unwrap();
        for m in [1, 3, 10] {
            let t = trotterize(&p, 2.0, m).unwrap();
            assert_eq!(t.factors.len(), 2 * m);
            assert!(t.deviation(&p).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn trotter_deviation_first_order() {
        let p = grover(2, 0);
        let d50 = trotterize(&p, 5.0, 50).unwrap().deviation(&p).unwrap();
        let d100 = trotterize(&p, 5.0, 100).unwrap().deviation(&p).unwrap();
        let ratio = d100 / d50;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn trotter_rejects_other_shapes() {
        let mut h = OperatorSum::new(1);
        h.add_pauli(1.0, &[(0, Axis::X)]).unwrap();
        let p = HamiltonianPath::constant(h).unwrap();
        assert!(matches!(trotterize(&p, 1.0, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sampling_follows_probabilities() {
        let counts = sample_counts(&[0.5, 0.0, 0.5], 20000, 3);
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 20000.0 - 0.5).abs() < 0.02);
        assert_eq!(sample_counts(&[0.5, 0.5], 100, 9), sample_counts(&[0.5, 0.5], 100, 9));
    }
}
