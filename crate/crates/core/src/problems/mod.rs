//! Problem families: instance generators, analytic gaps, classical solvers, degeneracy lifting,
//! semiclassical potentials and the PageRank pipeline.

pub mod classical;
pub mod families;
pub mod pagerank;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, CVector, C64};
use crate::operators::symmetric::{ln_binomial, ln_factorials};
use crate::operators::{io as opio, reduce_symmetric, Axis, Coeff, HamiltonianPath, Operator, OperatorSum, StateVector, SymmetricPath, Term};
use crate::rng::task_seed;

pub use classical::{classical_solve, ClassicalSolution};
pub use families::{add_ec_clause, catalyst_final_values, transverse_half, transverse_neg, EcForm, Family, FamilyData, SYMMETRIC_MAX_QUBITS};
pub use pagerank::{pagerank_pipeline, GraphSpec, PageRank};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnownSolution {
    pub states: Vec<usize>,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub analytic_gap: bool,
    pub permutation_symmetric: bool,
    /// H(1) is diagonal in the computational basis.
    pub diagonal_final: bool,
    /// A two-level reduced form is attached.
    pub two_level: bool,
}

/// A generated problem: the family, its path H(s), and what is known about it.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub family: Family,
    /// Qubit count, or the reduced dimension for families defined on a subspace (glued trees).
    pub n: usize,
    /// Full qubit path when n ≤ 24; the Dicke-sector path for larger symmetric families.
    pub path: HamiltonianPath,
    /// Ground state of H(0) in the space of `path`.
    pub initial_state: StateVector,
    pub known_solution: Option<KnownSolution>,
    pub capabilities: Capabilities,
    /// Master seed passed to `make`.
    pub seed: u64,
    /// Seed actually used for random draws.
    pub instance_seed: u64,
    pub data: FamilyData,
    /// Two-level form {|M⟩, |M^⊥⟩} of Grover-type instances with its initial state.
    pub two_level: Option<(HamiltonianPath, StateVector)>,
    pub symmetric: Option<SymmetricPath>,
}

/// Seed keyed by master seed, family tag and parameter hash.
pub fn instance_seed(master: u64, family: &Family) -> u64 {
    let params = serde_json::to_string(family).unwrap_or_default();
    task_seed(master, &format!("problems/{}/{params}", family.tag()))
}

/// Builds an instance; random families are deterministic in `seed`.
pub fn make(family: &Family, seed: u64) -> Result<ProblemInstance> {
    let iseed = instance_seed(seed, family);
    let b = families::build(family, iseed)?;
    let symmetric = match b.symmetric {
        Some(s) => Some(s),
        None if b.path.n_qubits().is_some() => reduce_symmetric(&b.path).ok(),
        None => None,
    };
    let diagonal_final = b.path.components().iter().all(|(f, op)| {
        f.value(1.0) == 0.0 || matches!(op.as_ref(), Operator::Sum(o) if o.is_diagonal())
    }) && b.path.n_qubits().is_some();
    let analytic_gap = match family {
        Family::Grover { .. } | Family::MultiMarked { .. } | Family::PlainHw { .. } => true,
        Family::TwosatRing { n, .. } => n % 2 == 0,
        _ => false,
    };
    let capabilities =
        Capabilities { analytic_gap, permutation_symmetric: symmetric.is_some(), diagonal_final, two_level: b.reduced.is_some() };
    Ok(ProblemInstance {
        family: family.clone(),
        n: b.n,
        path: b.path,
        initial_state: b.initial,
        known_solution: b.known.map(|(states, energy)| KnownSolution { states, energy }),
        capabilities,
        seed,
        instance_seed: iseed,
        data: b.data,
        two_level: b.reduced,
        symmetric,
    })
}

impl ProblemInstance {
    /// Largest ‖H(1)|x⟩ − E|x⟩‖ over the known solution states.
    pub fn known_solution_residual(&self) -> Result<f64> {
        let Some(sol) = &self.known_solution else { return Ok(0.0) };
        let dim = self.path.dim();
        let mut worst: f64 = 0.0;
        for &x in &sol.states {
            let mut e = CVector::zeros(dim);
            e[x] = c(1.0);
            let r = self.path.apply_vec(1.0, &e) - &e * c(sol.energy);
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }

    /// JSON export: family metadata plus each component in operator text form.
    pub fn export_json(&self) -> Result<serde_json::Value> {
        let mut comps = Vec::new();
        for (f, op) in self.path.components() {
            let coeff = match f {
                Coeff::Poly(p) => serde_json::json!(p),
                _ => return Err(Error::Unsupported("export of non-polynomial coefficients".into())),
            };
            let body = match op.as_ref() {
                Operator::Sum(o) => serde_json::json!({ "operator": opio::to_text(o) }),
                Operator::Matrix(m) => {
                    let rows: Vec<Vec<[f64; 2]>> =
                        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
                    serde_json::json!({ "matrix": rows })
                }
            };
            comps.push(serde_json::json!({ "coeff": coeff, "component": body }));
        }
        Ok(serde_json::json!({
            "family": self.family,
            "seed": self.seed,
            "instance_seed": self.instance_seed,
            "n": self.n,
            "dim": self.path.dim(),
            "known_solution": self.known_solution,
            "capabilities": self.capabilities,
            "data": self.data,
            "components": comps,
        }))
    }
}

/// Σ_p (E_p^-, E_p^+) of the 2-SAT ring modes, p = 1, 3, …, n−1.
fn ring_modes(n: usize, s: f64) -> Vec<(f64, f64)> {
    (1..n)
        .step_by(2)
        .map(|p| {
            let r = ((2.0 - 3.0 * s).powi(2) + 4.0 * s * (1.0 - s) * (1.0 - (std::f64::consts::PI * p as f64 / n as f64).cos())).sqrt();
            (2.0 - s - r, 2.0 - s + r)
        })
        .collect()
}

/// All 2^(n−1) eigenvalues of the 2-SAT ring in the even sector of Π_i σ_i^x, ascending (even n).
pub fn ring_sector_spectrum(n: usize, s: f64) -> Result<Vec<f64>> {
    if n < 4 || n % 2 == 1 || n > 40 {
        return Err(Error::invalid("ring spectrum needs even n in 4..=40"));
    }
    let modes = ring_modes(n, s);
    // (energy, parity of singly occupied pairs)
    let mut acc: Vec<(f64, u8)> = vec![(0.0, 0)];
    for (em, ep) in modes {
        let mut next = Vec::with_capacity(acc.len() * 4);
        for &(e, par) in &acc {
            next.push((e + em, par));
            next.push((e + ep, par));
            next.push((e + 2.0 - s, par ^ 1));
            next.push((e + 2.0 - s, par ^ 1));
        }
        acc = next;
    }
    let mut out: Vec<f64> = acc.into_iter().filter(|t| t.1 == 0).map(|t| t.0).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Location and value (s*, Δ*) of the minimum even-sector gap of the ring.
pub fn ring_min_gap(n: usize) -> (f64, f64) {
    let cp = (std::f64::consts::PI / n as f64).cos();
    let sp = (std::f64::consts::PI / n as f64).sin();
    (2.0 * (2.0 + cp) / (5.0 + 4.0 * cp), 4.0 * sp / (5.0 + 4.0 * cp).sqrt())
}

/// Δ(s) = √((1 − 2s)² + 4(M/N)s(1 − s)).
pub fn grover_gap(n_items: f64, marked: f64, s: f64) -> f64 {
    ((1.0 - 2.0 * s).powi(2) + 4.0 * (marked / n_items) * s * (1.0 - s)).sqrt()
}

/// Closed-form gap for grover, multi_marked, plain_hw and twosat_ring (even n).
pub fn analytic_gap(instance: &ProblemInstance, s: f64) -> Result<f64> {
    match &instance.family {
        Family::Grover { n, .. } => Ok(grover_gap((1u64 << n) as f64, 1.0, s)),
        Family::MultiMarked { n, marked } => Ok(grover_gap((1u64 << n) as f64, marked.len() as f64, s)),
        Family::PlainHw { .. } => Ok((1.0 - 2.0 * s + 2.0 * s * s).sqrt()),
        Family::TwosatRing { n, .. } if n % 2 == 0 => {
            let (em, ep) = ring_modes(*n, s)[0];
            Ok(ep - em)
        }
        other => Err(Error::Unsupported(format!("no analytic gap for {}", other.tag()))),
    }
}

/// Dicke-basis amplitudes of the spin-coherent state ⊗_i [cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩].
pub fn coherent_dicke(n: usize, theta: f64, phi: f64) -> CVector {
    let lf = ln_factorials(n);
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CVector::from_fn(n + 1, |w, _| {
        let mag = (0.5 * ln_binomial(&lf, n, w)).exp() * ch.powi((n - w) as i32) * sh.powi(w as i32);
        C64::from_polar(mag, phi * w as f64)
    })
}

/// V(s, θ, φ) = ⟨Ω(θ, φ)|H(s)|Ω(θ, φ)⟩ for a permutation-symmetric instance.
pub fn semiclassical_potential(instance: &ProblemInstance, s: f64, theta: f64, phi: f64) -> Result<f64> {
    let sym = instance
        .symmetric
        .as_ref()
        .ok_or_else(|| Error::NotSymmetric(format!("{} instance is not permutation symmetric", instance.family.tag())))?;
    let omega = coherent_dicke(sym.n, theta, phi);
    let h_omega = sym.path.apply_vec(s, &omega);
    Ok(omega.dotc(&h_omega).re)
}

/// Adds a ancillas per nonzero Ising term; term t couples to its ancillas through
/// b·(c_t σ_t + 1)/2·(σ^z_anc + 1)/2, which vanishes when all ancillas are |1⟩ (pointing down).
pub fn lift_degeneracy(ising: &OperatorSum, a: usize, b: f64) -> Result<OperatorSum> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid("ancilla coupling b must be positive"));
    }
    let n = ising.n_qubits();
    let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
    for t in ising.terms() {
        let Term::Pauli(p) = t else {
            return Err(Error::invalid(format!("{} term in Ising Hamiltonian", t.kind())));
        };
        if p.weight() == 0 {
            continue;
        }
        if p.weight() > 2 || p.factors().iter().any(|f| f.1 != Axis::Z) {
            return Err(Error::invalid("Ising terms must be σ^z or σ^z σ^z"));
        }
        if p.coeff == 0.0 {
            continue;
        }
        if p.coeff != 1.0 && p.coeff != -1.0 {
            return Err(Error::invalid(format!("Ising coefficient {} outside {{0, ±1}}", p.coeff)));
        }
        terms.push((p.coeff, p.factors().iter().map(|f| f.0).collect()));
    }
    if a == 0 {
        return Ok(ising.clone());
    }
    let total = n + terms.len() * a;
    let map: Vec<usize> = (0..n).collect();
    let mut out = OperatorSum::new(total);
    out.extend_scaled(&ising.embed(total, &map)?, 1.0)?;
    let q = b / 4.0;
    for (t, (coeff, qubits)) in terms.iter().enumerate() {
        let zs: Vec<(usize, Axis)> = qubits.iter().map(|&i| (i, Axis::Z)).collect();
        for k in 0..a {
            let anc = n + t * a + k;
            let mut with_anc = zs.clone();
            with_anc.push((anc, Axis::Z));
            out.add_pauli(q * coeff, &with_anc)?;
            out.add_pauli(q * coeff, &zs)?;
            out.add_pauli(q, &[(anc, Axis::Z)])?;
            out.add_identity(q);
        }
    }
    Ok(out)
}

/// Number of nonzero Ising terms (the m of the lifted register size n + m·a).
pub fn ising_term_count(ising: &OperatorSum) -> usize {
    ising.terms().iter().filter(|t| matches!(t, Term::Pauli(p) if p.weight() > 0 && p.coeff != 0.0)).count()
}
