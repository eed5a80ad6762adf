//! Circuit-to-Hamiltonian history-state compiler with ground-state, gap and readout validation.
//!
//! Register layout: computation qubits 0..n, then clock qubits n..n+L. Clock qubit ℓ (1-based) is
//! qubit n+ℓ−1, and clock time ℓ is the unary string 1^ℓ 0^(L−ℓ).

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveOptions};
use crate::io::fmt_f64;
use crate::linalg::{c, eigh, eigvalsh, CMatrix, CVector, C64, ONE, ZERO};
use crate::operators::{kron, Axis, Coeff, HamiltonianPath, OperatorSum, StateVector, DEFAULT_DENSE_LIMIT};
use crate::schedules::Schedule;

/// Unitary on one or two qubits; the first listed qubit is the most significant local bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub qubits: Vec<usize>,
    pub matrix: CMatrix,
}

impl Gate {
    pub fn new(name: &str, qubits: &[usize], matrix: CMatrix) -> Result<Gate> {
        let k = qubits.len();
        if k == 0 || k > 2 || (k == 2 && qubits[0] == qubits[1]) {
            return Err(Error::invalid(format!("gate {name} needs one or two distinct qubits")));
        }
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::invalid(format!("gate {name} matrix must be {0}x{0}", 1 << k)));
        }
        let defect = (matrix.adjoint() * &matrix - CMatrix::identity(1 << k, 1 << k)).norm();
        if defect > 1e-10 {
            return Err(Error::invalid(format!("gate {name} is not unitary (defect {defect:e})")));
        }
        Ok(Gate { name: name.to_string(), qubits: qubits.to_vec(), matrix })
    }

    /// Built-in gates: i, x, y, z, h, s, t (one qubit) and cnot, cz, swap (two qubits).
    pub fn named(name: &str, qubits: &[usize]) -> Result<Gate> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::new(0.0, 1.0);
        let m = |k: usize, v: &[C64]| CMatrix::from_row_slice(k, k, v);
        let matrix = match name {
            "i" => CMatrix::identity(2, 2),
            "x" => m(2, &[ZERO, ONE, ONE, ZERO]),
            "y" => m(2, &[ZERO, -i, i, ZERO]),
            "z" => m(2, &[ONE, ZERO, ZERO, -ONE]),
            "h" => m(2, &[c(r), c(r), c(r), c(-r)]),
            "s" => m(2, &[ONE, ZERO, ZERO, i]),
            "t" => m(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            "cnot" | "cz" | "swap" => {
                let mut u = CMatrix::identity(4, 4);
                match name {
                    "cnot" => u.swap_rows(2, 3),
                    "cz" => u[(3, 3)] = -ONE,
                    _ => u.swap_rows(1, 2),
                }
                u
            }
            _ => return Err(Error::invalid(format!("unknown gate {name:?}"))),
        };
        Gate::new(name, qubits, matrix)
    }
}

/// Ordered gate list on n qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCircuit {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl GateCircuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<GateCircuit> {
        if n == 0 {
            return Err(Error::invalid("circuit needs at least one qubit"));
        }
        if let Some(g) = gates.iter().find(|g| g.qubits.iter().any(|&q| q >= n)) {
            return Err(Error::invalid(format!("gate {} acts outside {n} qubits", g.name)));
        }
        Ok(GateCircuit { n, gates })
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    /// Appends `pad` identity gates on qubit 0.
    pub fn padded(&self, pad: usize) -> GateCircuit {
        let mut out = self.clone();
        for _ in 0..pad {
            out.gates.push(Gate::named("i", &[0]).expect("identity gate"));
        }
        out
    }

    /// Random circuit: single-qubit Euler rotations, and CNOTs with probability 1/3 when n ≥ 2.
    pub fn random(n: usize, depth: usize, seed: u64) -> Result<GateCircuit> {
        let mut rng = crate::rng::rng(seed);
        let mut gates = Vec::with_capacity(depth);
        for _ in 0..depth {
            if n >= 2 && rng.gen_range(0..3) == 0 {
                let a = rng.gen_range(0..n);
                let b = (a + rng.gen_range(1..n)) % n;
                gates.push(Gate::named("cnot", &[a, b])?);
            } else {
                let q = rng.gen_range(0..n);
                let t = std::f64::consts::TAU;
                gates.push(Gate::new("u", &[q], euler(rng.gen::<f64>() * t, rng.gen::<f64>() * t / 2.0, rng.gen::<f64>() * t))?);
            }
        }
        GateCircuit::new(n, gates)
    }

    /// Computation-register states α(0), …, α(L) starting from |0^n⟩.
    pub fn trajectory(&self) -> Vec<CVector> {
        let mut psi = CVector::zeros(1 << self.n);
        psi[0] = ONE;
        let mut out = vec![psi.clone()];
        for g in &self.gates {
            psi = apply_gate(g, self.n, &psi);
            out.push(psi.clone());
        }
        out
    }

    /// Text form: `qubits N`, then one `gate NAME q[,q] re im …` line per gate (row-major, 17 digits).
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n);
        for g in &self.gates {
            let qs: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("gate {} {}", g.name, qs.join(",")));
            for z in g.matrix.transpose().iter() {
                out.push_str(&format!(" {} {}", fmt_f64(z.re), fmt_f64(z.im)));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text form; a gate line without matrix entries uses the built-in gate of that name.
    pub fn from_text(text: &str) -> Result<GateCircuit> {
        let mut n = None;
        let mut gates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split_whitespace().collect();
            match f[0] {
                "qubits" => n = Some(f.get(1).and_then(|x| x.parse().ok()).ok_or_else(|| bad("expected `qubits N`".into()))?),
                "gate" => {
                    if f.len() < 3 {
                        return Err(bad("expected `gate NAME QUBITS [entries]`".into()));
                    }
                    let qubits: Vec<usize> = f[2]
                        .split(',')
                        .map(|q| q.parse().map_err(|_| bad(format!("bad qubit {q:?}"))))
                        .collect::<Result<_>>()?;
                    let entries = &f[3..];
                    let gate = if entries.is_empty() {
                        Gate::named(f[1], &qubits)
                    } else {
                        let d = 1usize << qubits.len();
                        if entries.len() != 2 * d * d {
                            return Err(bad(format!("gate needs {} real numbers", 2 * d * d)));
                        }
                        let vals: Vec<f64> =
                            entries.iter().map(|x| x.parse().map_err(|_| bad(format!("bad number {x:?}")))).collect::<Result<_>>()?;
                        let zs: Vec<C64> = vals.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
                        Gate::new(f[1], &qubits, CMatrix::from_row_slice(d, d, &zs))
                    };
                    gates.push(gate.map_err(|e| bad(e.to_string()))?);
                }
                other => return Err(bad(format!("unknown directive {other:?}"))),
            }
        }
        GateCircuit::new(n.ok_or_else(|| Error::Parse { line: 0, msg: "missing `qubits` line".into() })?, gates)
    }
}

/// Rz(a)·Ry(b)·Rz(c).
fn euler(a: f64, b: f64, cc: f64) -> CMatrix {
    let rz = |t: f64| CMatrix::from_row_slice(2, 2, &[C64::from_polar(1.0, -t / 2.0), ZERO, ZERO, C64::from_polar(1.0, t / 2.0)]);
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let ry = CMatrix::from_row_slice(2, 2, &[c(cb), c(-sb), c(sb), c(cb)]);
    rz(a) * ry * rz(cc)
}

fn apply_gate(g: &Gate, n: usize, psi: &CVector) -> CVector {
    let k = g.qubits.len();
    let masks: Vec<usize> = g.qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let all: usize = masks.iter().sum();
    let mut out = CVector::zeros(psi.len());
    for x in 0..psi.len() {
        if x & all != 0 {
            continue;
        }
        let idx = |l: usize| (0..k).filter(|&i| (l >> (k - 1 - i)) & 1 == 1).map(|i| masks[i]).sum::<usize>() | x;
        for lo in 0..(1 << k) {
            let mut acc = ZERO;
            for li in 0..(1 << k) {
                acc += g.matrix[(lo, li)] * psi[idx(li)];
            }
            out[idx(lo)] = acc;
        }
    }
    out
}

/// Compiled adiabatic history-state Hamiltonian with its parts.
#[derive(Clone, Debug)]
pub struct ClockCompilation {
    pub circuit: GateCircuit,
    /// Gates in the original circuit before identity padding.
    pub logical_depth: usize,
    /// Total gate count L, including padding.
    pub l: usize,
    /// H(s) = H_input + H_c + (1 − s) H_c-init + (s/2) Σ_ℓ H_ℓ on n + L qubits.
    pub path: HamiltonianPath,
    pub h_c: OperatorSum,
    pub h_c_init: OperatorSum,
    pub h_input: OperatorSum,
    pub h_ells: Vec<OperatorSum>,
}

/// Single-qubit projector |b⟩⟨b| as a Pauli sum (1 ± Z)/2.
fn add_bit_projector(op: &mut OperatorSum, coeff: f64, q: usize, bit: usize) -> Result<()> {
    op.add_identity(0.5 * coeff);
    op.add_pauli(if bit == 0 { 0.5 } else { -0.5 } * coeff, &[(q, Axis::Z)])
}

/// Compiles a circuit padded with `pad_identities` trailing identity gates.
pub fn compile(circuit: &GateCircuit, pad_identities: usize) -> Result<ClockCompilation> {
    let full = circuit.padded(pad_identities);
    let n = full.n;
    let l = full.depth();
    if l == 0 {
        return Err(Error::invalid("circuit has no gates; pad with identities"));
    }
    let total = n + l;
    if total > crate::operators::MATRIX_FREE_LIMIT {
        return Err(Error::DimensionLimit { n: total, limit: crate::operators::MATRIX_FREE_LIMIT });
    }
    let clock = |ell: usize| n + ell - 1;

    let mut h_c = OperatorSum::new(total);
    for ell in 1..l {
        // |0_ℓ 1_{ℓ+1}⟩⟨0_ℓ 1_{ℓ+1}| = (1 + Z_ℓ)(1 − Z_{ℓ+1})/4
        h_c.add_identity(0.25);
        h_c.add_pauli(0.25, &[(clock(ell), Axis::Z)])?;
        h_c.add_pauli(-0.25, &[(clock(ell + 1), Axis::Z)])?;
        h_c.add_pauli(-0.25, &[(clock(ell), Axis::Z), (clock(ell + 1), Axis::Z)])?;
    }
    let mut h_c_init = OperatorSum::new(total);
    add_bit_projector(&mut h_c_init, 1.0, clock(1), 1)?;
    let mut h_input = OperatorSum::new(total);
    for i in 0..n {
        // |1_i⟩⟨1_i| ⊗ |0_c1⟩⟨0_c1| = (1 − Z_i)(1 + Z_c1)/4
        h_input.add_identity(0.25);
        h_input.add_pauli(-0.25, &[(i, Axis::Z)])?;
        h_input.add_pauli(0.25, &[(clock(1), Axis::Z)])?;
        h_input.add_pauli(-0.25, &[(i, Axis::Z), (clock(1), Axis::Z)])?;
    }
    let mut h_ells = Vec::with_capacity(l);
    for (idx, gate) in full.gates.iter().enumerate() {
        let ell = idx + 1;
        // Clock qubits ℓ−1 (must be 1), ℓ (flips 0 → 1), ℓ+1 (must be 0), where they exist.
        let mut cq = Vec::new();
        let mut before = Vec::new();
        if ell >= 2 {
            cq.push(clock(ell - 1));
            before.push(1);
        }
        cq.push(clock(ell));
        before.push(0);
        if ell < l {
            cq.push(clock(ell + 1));
            before.push(0);
        }
        let flip_pos = if ell >= 2 { 1 } else { 0 };
        let kc = cq.len();
        let c0: usize = before.iter().enumerate().map(|(i, &b)| b << (kc - 1 - i)).sum();
        let c1 = c0 | 1 << (kc - 1 - flip_pos);
        let ket_bra = |a: usize, b: usize| {
            let mut m = CMatrix::zeros(1 << kc, 1 << kc);
            m[(a, b)] = ONE;
            m
        };
        let d = 1usize << gate.qubits.len();
        let id = CMatrix::identity(d, d);
        let u = &gate.matrix;
        let block = kron(&id, &ket_bra(c0, c0)) - kron(u, &ket_bra(c1, c0)) - kron(&u.adjoint(), &ket_bra(c0, c1))
            + kron(&id, &ket_bra(c1, c1));
        let mut qubits = gate.qubits.clone();
        qubits.extend(&cq);
        let mut h = OperatorSum::new(total);
        h.add_block(&qubits, block)?;
        h_ells.push(h);
    }

    let mut fixed = h_input.clone();
    fixed.extend_scaled(&h_c, 1.0)?;
    let mut circuit_sum = OperatorSum::new(total);
    for h in &h_ells {
        circuit_sum.extend_scaled(h, 1.0)?;
    }
    let mut path = HamiltonianPath::qubits(total);
    path.push_sum(Coeff::constant(1.0), fixed)?;
    path.push_sum(Coeff::one_minus_s(), h_c_init.clone())?;
    path.push_sum(Coeff::s().scaled(0.5), circuit_sum)?;
    Ok(ClockCompilation { circuit: full, logical_depth: circuit.depth(), l, path, h_c, h_c_init, h_input, h_ells })
}

/// Index of |x⟩ ⊗ |1^ℓ 0^(L−ℓ)⟩.
fn clock_index(l: usize, x: usize, ell: usize) -> usize {
    let clock_bits = if ell == 0 { 0 } else { ((1usize << ell) - 1) << (l - ell) };
    (x << l) | clock_bits
}

/// |γ(ℓ)⟩ = |α(ℓ)⟩ ⊗ |1^ℓ 0^(L−ℓ)⟩ for ℓ = 0..=L.
pub fn clock_states(circuit: &GateCircuit) -> Vec<CVector> {
    let (n, l) = (circuit.n, circuit.depth());
    circuit
        .trajectory()
        .iter()
        .enumerate()
        .map(|(ell, alpha)| {
            let mut v = CVector::zeros(1 << (n + l));
            for (x, a) in alpha.iter().enumerate() {
                v[clock_index(l, x, ell)] = *a;
            }
            v
        })
        .collect()
}

/// |η⟩ = (L + 1)^(−1/2) Σ_ℓ |γ(ℓ)⟩.
pub fn history_state(circuit: &GateCircuit) -> Result<StateVector> {
    let l = circuit.depth();
    if circuit.n + l > crate::operators::MATRIX_FREE_LIMIT {
        return Err(Error::DimensionLimit { n: circuit.n + l, limit: crate::operators::MATRIX_FREE_LIMIT });
    }
    let states = clock_states(circuit);
    let mut eta = CVector::zeros(states[0].len());
    for g in &states {
        eta += g;
    }
    StateVector::full(eta / c(((l + 1) as f64).sqrt()))
}

impl ClockCompilation {
    /// The path restricted to span{|γ(ℓ)⟩}, an (L+1)-dimensional invariant subspace.
    pub fn s0_path(&self) -> Result<HamiltonianPath> {
        let gammas = clock_states(&self.circuit);
        let mut out = HamiltonianPath::reduced(self.l + 1);
        for (f, op) in self.path.components() {
            let m = CMatrix::from_fn(self.l + 1, self.l + 1, |i, j| {
                let mut hv = CVector::zeros(gammas[j].len());
                op.apply_add(gammas[j].as_slice(), hv.as_mut_slice(), 1.0);
                gammas[i].dotc(&hv)
            });
            out.push_matrix(f.clone(), (&m + m.adjoint()) * c(0.5))?;
        }
        Ok(out)
    }

    /// Largest norm of the component of H(s)|γ(ℓ)⟩ outside span{|γ⟩}.
    pub fn sector_leakage(&self, s: f64) -> f64 {
        let gammas = clock_states(&self.circuit);
        gammas
            .iter()
            .map(|g| {
                let hg = self.path.apply_vec(s, g);
                let inside = gammas.iter().fold(CVector::zeros(g.len()), |acc, b| acc + b * b.dotc(&hg));
                (hg - inside).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// (1/4)(1/(6L))².
pub fn s0_gap_bound(l: usize) -> f64 {
    0.25 / (6.0 * l as f64).powi(2)
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    /// Largest n + L diagonalized densely.
    pub max_qubits: usize,
    /// Points for the global-gap scan.
    pub global_samples: usize,
    /// Points for the S0-gap scan.
    pub s0_samples: usize,
    /// Run time for the readout check; `None` picks 40/Δ_S0².
    pub t_f: Option<f64>,
    /// Allowed readout shortfall ε in (1 − ε)(pad + 1)/(L + 1).
    pub epsilon: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { max_qubits: 9, global_samples: 11, s0_samples: 201, t_f: None, epsilon: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub l: usize,
    pub ground_energy_0: f64,
    pub ground_energy_1: f64,
    /// Norm of the projection of |η⟩ onto the ground space of H(1).
    pub history_overlap: f64,
    pub s0_gap: f64,
    pub s0_gap_at: f64,
    pub s0_gap_bound: f64,
    /// (s, E_1 − E_0) on the full register.
    pub global_gaps: Vec<(f64, f64)>,
    pub sector_leakage: f64,
    pub min_component_eigenvalue: f64,
    pub t_f: f64,
    /// Probability that the clock reads ℓ ≥ logical depth (all ones when unpadded).
    pub readout_probability: f64,
    pub readout_threshold: f64,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Ground energies, history overlap, S0 and global gaps, and the adiabatic readout probability.
pub fn validate(comp: &ClockCompilation, opts: &ValidateOptions) -> Result<ValidationReport> {
    let (n, l) = (comp.circuit.n, comp.l);
    if n + l > opts.max_qubits.min(DEFAULT_DENSE_LIMIT) {
        return Err(Error::DimensionLimit { n: n + l, limit: opts.max_qubits.min(DEFAULT_DENSE_LIMIT) });
    }
    let mut violations = Vec::new();
    let e0 = eigvalsh(&comp.path.assemble(0.0)?)[0];
    let (vals1, vecs1) = eigh(&comp.path.assemble(1.0)?);
    let e1 = vals1[0];
    for (s, e) in [(0.0, e0), (1.0, e1)] {
        if e.abs() > 1e-10 {
            violations.push(format!("ground energy {e:e} at s = {s}"));
        }
    }
    let eta = history_state(&comp.circuit)?.amps;
    let tol = 1e-8;
    let history_overlap = (0..vals1.len())
        .take_while(|&k| vals1[k] - e1 <= tol)
        .map(|k| vecs1.column(k).dotc(&eta).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if history_overlap < 1.0 - 1e-8 {
        violations.push(format!("history-state overlap {history_overlap}"));
    }

    let s0 = comp.s0_path()?;
    let (s0_gap, s0_gap_at) = (0..opts.s0_samples)
        .map(|i| {
            let s = i as f64 / (opts.s0_samples - 1) as f64;
            let e = eigvalsh(&s0.assemble(s).expect("small matrix"));
            (e[1] - e[0], s)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    let bound = s0_gap_bound(l);
    if s0_gap < bound {
        violations.push(format!("S0 gap {s0_gap} below (1/4)(1/(6L))² = {bound}"));
    }

    let global_gaps: Vec<(f64, f64)> = (0..opts.global_samples)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 / (opts.global_samples - 1).max(1) as f64;
            let e = eigvalsh(&comp.path.assemble(s).expect("dense size checked"));
            (s, e[1] - e[0])
        })
        .collect();
    if let Some(&(s, g)) = global_gaps.iter().find(|p| !(p.1 > 1e-12)) {
        violations.push(format!("global gap {g:e} at s = {s}"));
    }

    let leakage = [0.0, 0.5, 1.0].iter().map(|&s| comp.sector_leakage(s)).fold(0.0, f64::max);
    if leakage > 1e-10 {
        violations.push(format!("S0 leakage {leakage:e}"));
    }
    let mut min_component = f64::INFINITY;
    for op in [&comp.h_c, &comp.h_c_init, &comp.h_input].into_iter().chain(comp.h_ells.iter()) {
        min_component = min_component.min(eigvalsh(&op.to_matrix()?)[0]);
    }
    if min_component < -1e-10 {
        violations.push(format!("component with eigenvalue {min_component:e}"));
    }

    let t_f = opts.t_f.unwrap_or(40.0 / (s0_gap * s0_gap));
    let mut psi0 = CVector::zeros(l + 1);
    psi0[0] = ONE;
    let res = evolve(&s0, &Schedule::linear(), t_f, &StateVector::reduced(psi0), &EvolveOptions::default())?;
    let readout_probability: f64 = res.final_state.amps.iter().skip(comp.logical_depth).map(|z| z.norm_sqr()).sum();
    let pad = l - comp.logical_depth;
    let readout_threshold = (1.0 - opts.epsilon) * (pad + 1) as f64 / (l + 1) as f64;
    if readout_probability < readout_threshold {
        violations.push(format!("readout probability {readout_probability} below {readout_threshold}"));
    }

    Ok(ValidationReport {
        n,
        l,
        ground_energy_0: e0,
        ground_energy_1: e1,
        history_overlap,
        s0_gap,
        s0_gap_at,
        s0_gap_bound: bound,
        global_gaps,
        sector_leakage: leakage,
        min_component_eigenvalue: min_component,
        t_f,
        readout_probability,
        readout_threshold,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circuit(n: usize, names: &[(&str, &[usize])]) -> GateCircuit {
        GateCircuit::new(n, names.iter().map(|(g, q)| Gate::named(g, q).unwrap()).collect()).unwrap()
    }

    fn close(a: &CVector, b: &CVector) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn identity_and_x_history_states() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let id = circuit(1, &[("i", &[0])]);
        let comp = compile(&id, 0).unwrap();
        // |x c⟩: |00⟩ + |01⟩
        let want = CVector::from_vec(vec![c(r), c(r), ZERO, ZERO]);
        assert!(close(&history_state(&id).unwrap().amps, &want));
        let g = comp.path.assemble(1.0).unwrap();
        assert!((&g * &want).norm() < 1e-12);

        let x = circuit(1, &[("x", &[0])]);
        let want = CVector::from_vec(vec![c(r), ZERO, ZERO, c(r)]);
        assert!(close(&history_state(&x).unwrap().amps, &want));
        let comp = compile(&x, 0).unwrap();
        assert!((comp.path.assemble(1.0).unwrap() * &want).norm() < 1e-12);
    }

    #[test]
    fn x_then_h_history_state() {
        let xh = circuit(1, &[("x", &[0]), ("h", &[0])]);
        let traj = xh.trajectory();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&traj[2], &CVector::from_vec(vec![c(r), c(-r)])));
        let eta = history_state(&xh).unwrap().amps;
        let k = 1.0 / 3f64.sqrt();
        // clock 00 → |0⟩, clock 10 → |1⟩, clock 11 → (|0⟩ − |1⟩)/√2
        assert!((eta[0b000] - c(k)).norm() < 1e-12);
        assert!((eta[0b110] - c(k)).norm() < 1e-12);
        assert!((eta[0b011] - c(k * r)).norm() < 1e-12);
        assert!((eta[0b111] - c(-k * r)).norm() < 1e-12);
        assert_eq!(eta.iter().filter(|z| z.norm() > 1e-12).count(), 4);
    }

    #[test]
    fn initial_ground_state_is_unique() {
        let circ = GateCircuit::random(2, 3, 5).unwrap();
        let comp = compile(&circ, 0).unwrap();
        let e = eigvalsh(&comp.path.assemble(0.0).unwrap());
        assert!(e[0].abs() < 1e-10 && e[1] > 1e-3);
        let (_, v) = eigh(&comp.path.assemble(0.0).unwrap());
        assert!((v[(0, 0)].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn illegal_clock_states_are_penalized() {
        let circ = GateCircuit::random(1, 4, 9).unwrap();
        let comp = compile(&circ, 0).unwrap();
        let d = comp.h_c.diagonal();
        let l = comp.l;
        for (x, v) in d.iter().enumerate() {
            let clock = x & ((1 << l) - 1);
            let bits: Vec<usize> = (0..l).map(|i| (clock >> (l - 1 - i)) & 1).collect();
            let illegal = bits.windows(2).any(|w| w == [0, 1]);
            if illegal {
                assert!(*v >= 1.0 - 1e-12);
            } else {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s0_gap_bound_values() {
        assert!((s0_gap_bound(1) - 1.0 / 144.0).abs() < 1e-15);
        assert!((s0_gap_bound(2) - 1.0 / 576.0).abs() < 1e-15);
    }

    #[test]
    fn validation_of_random_circuits() {
        for (seed, n, l) in [(1, 1, 2), (2, 2, 3), (3, 1, 3)] {
            let circ = GateCircuit::random(n, l, seed).unwrap();
            let comp = compile(&circ, 0).unwrap();
            let rep = validate(&comp, &ValidateOptions::default()).unwrap();
            assert!(rep.passed(), "{:?}", rep.violations);
            assert!(rep.s0_gap >= s0_gap_bound(l));
        }
    }

    #[test]
    fn padding_increases_readout() {
        let circ = GateCircuit::random(1, 2, 4).unwrap();
        let mut last = 0.0;
        for pad in 0..=2 {
            let comp = compile(&circ, pad).unwrap();
            let rep = validate(&comp, &ValidateOptions { t_f: Some(400.0), ..Default::default() }).unwrap();
            assert!(rep.readout_probability >= last - 1e-9, "pad {pad}: {} < {last}", rep.readout_probability);
            last = rep.readout_probability;
        }
    }

    #[test]
    fn two_qubit_gate_blocks_expand_to_paulis() {
        let circ = circuit(2, &[("h", &[0]), ("cnot", &[0, 1]), ("x", &[1])]);
        let comp = compile(&circ, 0).unwrap();
        assert!(comp.h_ells[1].terms().iter().all(|t| t.kind() == "pauli"));
        let rep = validate(&comp, &ValidateOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn unpadded_depth_three_readout() {
        let circ = GateCircuit::random(1, 3, 11).unwrap();
        let rep = validate(&compile(&circ, 0).unwrap(), &ValidateOptions::default()).unwrap();
        assert!(rep.readout_probability >= 0.25 * 0.95, "{}", rep.readout_probability);
    }

    #[test]
    fn sector_closure_and_psd_components() {
        let circ = GateCircuit::random(2, 3, 21).unwrap();
        let comp = compile(&circ, 1).unwrap();
        for s in [0.0, 0.3, 0.7, 1.0] {
            assert!(comp.sector_leakage(s) <= 1e-10);
        }
        for op in comp.h_ells.iter().chain([&comp.h_c, &comp.h_c_init, &comp.h_input]) {
            assert!(eigvalsh(&op.to_matrix().unwrap())[0] >= -1e-10);
        }
    }

    #[test]
    fn rejects_non_unitary_and_out_of_range_gates() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(Gate::new("bad", &[0], m).is_err());
        assert!(Gate::named("cnot", &[1, 1]).is_err());
        assert!(GateCircuit::new(1, vec![Gate::named("x", &[1]).unwrap()]).is_err());
        assert!(compile(&GateCircuit::new(1, vec![]).unwrap(), 0).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let circ = GateCircuit::random(2, 4, 3).unwrap();
        let back = GateCircuit::from_text(&circ.to_text()).unwrap();
        assert_eq!(back, circ);
        let named = GateCircuit::from_text("qubits 2\ngate h 0\ngate cnot 0,1\n").unwrap();
        assert_eq!(named.depth(), 2);
        assert!(GateCircuit::from_text("qubits 1\ngate u 0 1 0 1 0 0 0 1 0\n").is_err());
        assert!(GateCircuit::from_text("qubits 1\ngate x 1\n").is_err());
    }
}
