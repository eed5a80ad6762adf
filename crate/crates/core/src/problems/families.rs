//! Family parameters and Hamiltonian builders.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, ZERO};
use crate::operators::symmetric::collective::{sum_pairs, sum_single};
use crate::operators::symmetric::{reduce_operator, uniform_dicke_amplitudes};
use crate::operators::{
    qubit_mask, uniform_state, Axis, Basis, Coeff, HamiltonianPath, OperatorSum, StateVector, SymmetricPath,
};
use crate::rng::Rng;

/// Problem family with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Grover {
        n: usize,
        #[serde(default)]
        marked: usize,
    },
    MultiMarked {
        n: usize,
        marked: Vec<usize>,
    },
    DeutschJozsa {
        n: usize,
        #[serde(default)]
        balanced: bool,
    },
    BernsteinVazirani {
        /// Hidden string a, one character per qubit of register A.
        a: String,
    },
    GluedTrees {
        /// Tree depth; the column basis has 2n+2 states.
        n: usize,
        #[serde(default = "default_glued_alpha")]
        alpha: f64,
    },
    PlainHw {
        n: usize,
    },
    Spike {
        n: usize,
    },
    WidthHeight {
        n: usize,
        alpha: f64,
        beta: f64,
    },
    Plateau {
        n: usize,
        l: usize,
        u: usize,
    },
    VandamPhw {
        n: usize,
    },
    TwosatRing {
        n: usize,
        /// Indices i of disagree clauses between bits i and i+1 (mod n).
        #[serde(default)]
        disagree: Vec<usize>,
    },
    WeightedChain {
        period: usize,
        b: usize,
        w: f64,
    },
    DimerLadder {
        length: usize,
        #[serde(default = "one")]
        k: f64,
        #[serde(default = "one")]
        u: f64,
        #[serde(default = "yes")]
        periodic: bool,
    },
    ExactCover {
        n: usize,
        #[serde(default)]
        clauses: Option<Vec<[usize; 3]>>,
        /// Number of random clauses planted on a hidden assignment when `clauses` is absent.
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        form: EcForm,
    },
    Pspin {
        n: usize,
        p: u32,
    },
    Sk {
        n: usize,
        #[serde(default)]
        bimodal: bool,
    },
    Hopfield {
        n: usize,
        #[serde(default = "two")]
        patterns: usize,
    },
    Xorsat3reg {
        n: usize,
        #[serde(default = "yes")]
        planted: bool,
    },
    NumberPartition {
        #[serde(default)]
        a: Option<Vec<f64>>,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default = "default_bits")]
        bits: u32,
    },
    Catalyst3local {
        n: usize,
        #[serde(default = "yes")]
        catalyst: bool,
    },
    /// Base family with the initial Hamiltonian replaced by Σ_i c_i(1 − σ_i^x)/2, c_i ∈ {1/2, 3/2}.
    RandomInit {
        base: Box<Family>,
    },
}

/// Exact Cover clause encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcForm {
    /// Projector onto the violating assignments of each clause.
    Projector,
    /// (σ^z_i + σ^z_j + σ^z_k − 1)²/4 per clause.
    #[default]
    Quadratic,
}

fn default_glued_alpha() -> f64 {
    1.0 / 8f64.sqrt()
}
fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn default_bits() -> u32 {
    8
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Grover { .. } => "grover",
            Family::MultiMarked { .. } => "multi_marked",
            Family::DeutschJozsa { .. } => "deutsch_jozsa",
            Family::BernsteinVazirani { .. } => "bernstein_vazirani",
            Family::GluedTrees { .. } => "glued_trees",
            Family::PlainHw { .. } => "plain_hw",
            Family::Spike { .. } => "spike",
            Family::WidthHeight { .. } => "width_height",
            Family::Plateau { .. } => "plateau",
            Family::VandamPhw { .. } => "vandam_phw",
            Family::TwosatRing { .. } => "twosat_ring",
            Family::WeightedChain { .. } => "weighted_chain",
            Family::DimerLadder { .. } => "dimer_ladder",
            Family::ExactCover { .. } => "exact_cover",
            Family::Pspin { .. } => "pspin",
            Family::Sk { .. } => "sk",
            Family::Hopfield { .. } => "hopfield",
            Family::Xorsat3reg { .. } => "xorsat3reg",
            Family::NumberPartition { .. } => "number_partition",
            Family::Catalyst3local { .. } => "catalyst3local",
            Family::RandomInit { .. } => "random_init",
        }
    }
}

/// Data produced by a family builder.
pub(crate) struct Built {
    pub path: HamiltonianPath,
    pub n: usize,
    pub initial: StateVector,
    pub known: Option<(Vec<usize>, f64)>,
    pub reduced: Option<(HamiltonianPath, StateVector)>,
    pub symmetric: Option<SymmetricPath>,
    pub data: FamilyData,
}

/// Random or derived data kept for classical solvers.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FamilyData {
    /// Ising couplings (i, j, J) with the sign convention of the final Hamiltonian.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub couplings: Vec<(usize, usize, f64)>,
    /// Clauses (variables, parity or target) for XORSAT / Exact Cover.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clauses: Vec<([usize; 3], u8)>,
    /// Pattern vectors ξ^(μ), one row per pattern.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<Vec<f64>>,
    /// Number-partition weights.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub numbers: Vec<f64>,
    /// Initial-Hamiltonian coefficients c_i of random_init.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub init_coeffs: Vec<f64>,
    /// Deutsch–Jozsa oracle values f(x).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub oracle: Vec<u8>,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > crate::operators::MATRIX_FREE_LIMIT {
        return Err(Error::invalid(format!("qubit count {n} outside 1..={}", crate::operators::MATRIX_FREE_LIMIT)));
    }
    Ok(())
}

/// Σ_i (1 − σ_i^x)/2.
pub fn transverse_half(n: usize) -> OperatorSum {
    let mut op = sum_single(n, Axis::X, -0.5);
    op.add_identity(0.5 * n as f64);
    op
}

/// −Σ_i σ_i^x.
pub fn transverse_neg(n: usize) -> OperatorSum {
    sum_single(n, Axis::X, -1.0)
}

fn weight_op(values: Vec<f64>) -> Result<OperatorSum> {
    let mut op = OperatorSum::new(values.len() - 1);
    op.add_weight(values)?;
    Ok(op)
}

fn qubit_instance(h0: OperatorSum, h1: OperatorSum) -> Result<(HamiltonianPath, StateVector)> {
    let n = h0.n_qubits();
    let path = HamiltonianPath::interpolation(h0, h1)?;
    Ok((path, StateVector::full(uniform_state(n))?))
}

/// Index of the string with ones on the first w qubits.
pub(crate) fn weight_representative(n: usize, w: usize) -> usize {
    (0..w).map(|q| qubit_mask(q, n)).sum()
}

fn simple(path: HamiltonianPath, initial: StateVector, n: usize) -> Built {
    Built { path, n, initial, known: None, reduced: None, symmetric: None, data: FamilyData::default() }
}

/// Two-level form in the basis {|M⟩, |M^⊥⟩} for M marked items out of N.
fn grover_two_level(n_items: f64, marked: f64) -> Result<(HamiltonianPath, StateVector)> {
    let a = (marked / n_items).sqrt();
    let b = (1.0 - marked / n_items).sqrt();
    let h0 = CMatrix::from_row_slice(2, 2, &[c(1.0 - a * a), c(-a * b), c(-a * b), c(1.0 - b * b)]);
    let h1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, c(1.0)]);
    let mut p = HamiltonianPath::reduced(2);
    p.push_matrix(Coeff::one_minus_s(), h0)?;
    p.push_matrix(Coeff::s(), h1)?;
    Ok((p, StateVector::reduced(CVector::from_vec(vec![c(a), c(b)]))))
}

fn grover_like(n: usize, marked: &[usize]) -> Result<Built> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut sorted = marked.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != marked.len() || sorted[sorted.len() - 1] >= dim {
        return Err(Error::invalid("marked items must be distinct indices below 2^n"));
    }
    let mut h0 = OperatorSum::new(n);
    h0.add_identity(1.0);
    h0.add_uniform(-1.0)?;
    let mut h1 = OperatorSum::new(n);
    h1.add_identity(1.0);
    for &m in &sorted {
        h1.add_projector(-1.0, m, Basis::Z)?;
    }
    let (path, initial) = qubit_instance(h0, h1)?;
    let reduced = grover_two_level(dim as f64, sorted.len() as f64)?;
    let mut b = simple(path, initial, n);
    b.known = Some((sorted, 0.0));
    b.reduced = Some(reduced);
    Ok(b)
}

fn deutsch_jozsa(n: usize, balanced: bool, rng: &mut Rng) -> Result<Built> {
    check_qubits(n)?;
    if n > 12 {
        return Err(Error::invalid("deutsch_jozsa final Hamiltonian is dense; n <= 12"));
    }
    let dim = 1usize << n;
    let mut oracle = vec![0u8; dim];
    if balanced {
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.shuffle(rng);
        for &i in &idx[..dim / 2] {
            oracle[i] = 1;
        }
    } else if rng.gen::<bool>() {
        oracle.iter_mut().for_each(|f| *f = 1);
    }
    let mu = (oracle.iter().map(|&f| if f == 0 { 1.0 } else { -1.0 }).sum::<f64>() / dim as f64).abs();
    let half = (dim as f64 / 2.0).sqrt();
    let psi = CVector::from_fn(dim, |x, _| c(if x % 2 == 0 { mu } else { 1.0 - mu } / half));
    let h1 = CMatrix::identity(dim, dim) - &psi * psi.adjoint();
    let mut h0 = OperatorSum::new(n);
    h0.add_identity(1.0);
    h0.add_uniform(-1.0)?;
    let mut path = HamiltonianPath::qubits(n);
    path.push_sum(Coeff::one_minus_s(), h0)?;
    path.push_matrix(Coeff::s(), h1)?;
    let mut b = simple(path, StateVector::full(uniform_state(n))?, n);
    b.data.oracle = oracle;
    Ok(b)
}

fn bernstein_vazirani(a: &str) -> Result<Built> {
    let k = a.len();
    check_qubits(k + 1)?;
    if k == 0 || !a.chars().all(|ch| ch == '0' || ch == '1') {
        return Err(Error::invalid("hidden string must be a nonempty bit string"));
    }
    let n = k + 1;
    let mut h0 = OperatorSum::new(n);
    h0.add_identity(0.5);
    h0.add_pauli(-0.5, &[(k, Axis::X)])?;
    let mut h1 = OperatorSum::new(n);
    h1.add_identity(-0.5);
    let mut factors: Vec<(usize, Axis)> = a.chars().enumerate().filter(|(_, ch)| *ch == '1').map(|(q, _)| (q, Axis::Z)).collect();
    factors.push((k, Axis::Z));
    h1.add_pauli(-0.5, &factors)?;
    let (path, initial) = qubit_instance(h0, h1)?;
    Ok(simple(path, initial, n))
}

fn glued_trees(n: usize, alpha: f64) -> Result<Built> {
    if n == 0 || !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("glued trees needs depth >= 1 and alpha > 0"));
    }
    let d = 2 * n + 2;
    let mut a = CMatrix::zeros(d, d);
    for j in 0..d - 1 {
        let v = if j == n { 2f64.sqrt() } else { 1.0 };
        a[(j, j + 1)] = c(v);
        a[(j + 1, j)] = c(v);
    }
    let mut h0 = CMatrix::zeros(d, d);
    h0[(0, 0)] = c(-1.0);
    let mut h1 = CMatrix::zeros(d, d);
    h1[(d - 1, d - 1)] = c(-1.0);
    let mut path = HamiltonianPath::reduced(d);
    path.push_matrix(Coeff::one_minus_s().scaled(alpha), h0)?;
    path.push_matrix(Coeff::s_one_minus_s().scaled(-1.0), a)?;
    path.push_matrix(Coeff::s().scaled(alpha), h1)?;
    let mut b = simple(path, StateVector::reduced(basis_state_dim(d, 0)), d);
    b.known = Some((vec![d - 1], -alpha));
    Ok(b)
}

fn basis_state_dim(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = c(1.0);
    v
}

/// Largest register for families realized only in the Dicke sector.
pub const SYMMETRIC_MAX_QUBITS: usize = 4096;

/// Permutation-symmetric family: the full qubit path when n fits, and always the Dicke-sector path.
fn symmetric_family(n: usize, comps: Vec<(Coeff, OperatorSum)>, known: (usize, f64)) -> Result<Built> {
    if n == 0 || n > SYMMETRIC_MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count {n} outside 1..={SYMMETRIC_MAX_QUBITS}")));
    }
    let mut sym = HamiltonianPath::reduced(n + 1);
    for (f, op) in &comps {
        sym.push_matrix(f.clone(), reduce_operator(op)?)?;
    }
    let symmetric = SymmetricPath { n, path: sym };
    let sym_init = StateVector::reduced(CVector::from_iterator(n + 1, uniform_dicke_amplitudes(n).into_iter().map(c)));
    let mut b = if n <= crate::operators::MATRIX_FREE_LIMIT {
        let mut path = HamiltonianPath::qubits(n);
        for (f, op) in comps {
            path.push_sum(f, op)?;
        }
        let mut b = simple(path, StateVector::full(uniform_state(n))?, n);
        b.known = Some((vec![weight_representative(n, known.0)], known.1));
        b
    } else {
        simple(symmetric.path.clone(), sym_init, n)
    };
    b.symmetric = Some(symmetric);
    Ok(b)
}

fn weight_family(n: usize, values: Vec<f64>) -> Result<Built> {
    let (wmin, vmin) = values.iter().enumerate().fold((0, f64::INFINITY), |acc, (w, &v)| if v < acc.1 { (w, v) } else { acc });
    symmetric_family(n, vec![(Coeff::one_minus_s(), transverse_half(n)), (Coeff::s(), weight_op(values)?)], (wmin, vmin))
}

fn width_height(n: usize, alpha: f64, beta: f64) -> Result<Built> {
    if !(alpha + beta >= 0.5 && alpha < 0.5 && 2.0 * alpha + beta <= 1.0) {
        return Err(Error::invalid("barrier exponents need alpha+beta >= 1/2, alpha < 1/2, 2 alpha + beta <= 1"));
    }
    let nf = n as f64;
    let (lo, hi) = (nf / 4.0 - 0.5 * nf.powf(beta), nf / 4.0 + 0.5 * nf.powf(beta));
    let height = nf.powf(alpha);
    let values = (0..=n).map(|w| {
        let wf = w as f64;
        if lo < wf && wf < hi {
            wf + height
        } else {
            wf
        }
    });
    weight_family(n, values.collect())
}

fn twosat_ring(n: usize, disagree: &[usize]) -> Result<Built> {
    check_qubits(n)?;
    if n < 3 {
        return Err(Error::invalid("ring needs at least 3 bits"));
    }
    let mut x = vec![0u8; n];
    for &i in disagree {
        if i >= n || x[i] == 1 {
            return Err(Error::invalid("disagree clause indices must be distinct and < n"));
        }
        x[i] = 1;
    }
    if disagree.len() % 2 == 1 {
        return Err(Error::invalid("odd number of disagree clauses makes the ring unsatisfiable"));
    }
    let mut h0 = sum_single(n, Axis::X, -1.0);
    h0.add_identity(n as f64);
    let mut h1 = OperatorSum::new(n);
    h1.add_identity(0.5 * n as f64);
    for i in 0..n {
        let sign = if x[i] == 1 { 1.0 } else { -1.0 };
        h1.add_pauli(0.5 * sign, &[(i, Axis::Z), ((i + 1) % n, Axis::Z)])?;
    }
    let mut w = 0usize;
    let mut bit = 0u8;
    for i in 0..n {
        if bit == 1 {
            w |= qubit_mask(i, n);
        }
        bit ^= x[i];
    }
    let (path, initial) = qubit_instance(h0, h1)?;
    let mut b = simple(path, initial, n);
    b.known = Some((vec![w, w ^ ((1 << n) - 1)], 0.0));
    b.data.couplings = (0..n).map(|i| (i, (i + 1) % n, if x[i] == 1 { -1.0 } else { 1.0 })).collect();
    Ok(b)
}

fn weighted_chain(period: usize, blocks: usize, w: f64) -> Result<Built> {
    if period == 0 || !w.is_finite() || w <= 0.0 {
        return Err(Error::invalid("weighted chain needs period >= 1 and w > 0"));
    }
    let n = (2 * blocks + 1) * period + 1;
    check_qubits(n)?;
    let mut h1 = OperatorSum::new(n);
    let mut couplings = Vec::new();
    for i in 1..n {
        let j = if i.div_ceil(period) % 2 == 1 { w } else { 1.0 };
        h1.add_pauli(-j, &[(i - 1, Axis::Z), (i, Axis::Z)])?;
        couplings.push((i - 1, i, j));
    }
    let energy = -couplings.iter().map(|t| t.2).sum::<f64>();
    let (path, initial) = qubit_instance(transverse_neg(n), h1)?;
    let mut b = simple(path, initial, n);
    b.known = Some((vec![0, (1 << n) - 1], energy));
    b.data.couplings = couplings;
    Ok(b)
}

fn dimer_ladder(length: usize, k: f64, u: f64, periodic: bool) -> Result<Built> {
    if length < 2 || !k.is_finite() || !u.is_finite() {
        return Err(Error::invalid("ladder needs length >= 2 and finite K, U"));
    }
    let n = 2 * length;
    check_qubits(n)?;
    let mut bonds = Vec::new();
    let legs = if periodic && length > 2 { length } else { length - 1 };
    for i in 0..legs {
        let j = (i + 1) % length;
        bonds.push((i, j, -k));
        bonds.push((length + i, length + j, k));
    }
    for i in 0..length {
        bonds.push((i, length + i, k));
    }
    let mut h1 = OperatorSum::new(n);
    for &(i, j, jij) in &bonds {
        h1.add_pauli(-jij, &[(i, Axis::Z), (j, Axis::Z)])?;
    }
    for i in 0..length {
        h1.add_pauli(-k, &[(i, Axis::Z)])?;
        h1.add_pauli(0.5 * u, &[(length + i, Axis::Z)])?;
    }
    let (path, initial) = qubit_instance(transverse_neg(n), h1)?;
    let mut b = simple(path, initial, n);
    b.data.couplings = bonds;
    Ok(b)
}

/// Diagonal of the projector clause on the local basis |q_a q_b q_c⟩: zero exactly on one-hot assignments.
fn ec_projector_block() -> CMatrix {
    CMatrix::from_fn(8, 8, |i, j| if i == j && (i as u32).count_ones() != 1 { c(1.0) } else { ZERO })
}

/// Adds one Exact Cover clause in the chosen encoding.
pub fn add_ec_clause(op: &mut OperatorSum, clause: [usize; 3], form: EcForm) -> Result<()> {
    match form {
        EcForm::Projector => op.add_dense(&clause, ec_projector_block()),
        EcForm::Quadratic => {
            op.add_identity(1.0);
            for a in 0..3 {
                op.add_pauli(-0.5, &[(clause[a], Axis::Z)])?;
                for b in (a + 1)..3 {
                    op.add_pauli(0.5, &[(clause[a], Axis::Z), (clause[b], Axis::Z)])?;
                }
            }
            Ok(())
        }
    }
}

fn distinct_triple(n: usize, rng: &mut Rng) -> [usize; 3] {
    let mut v: Vec<usize> = (0..n).collect();
    let (head, _) = v.partial_shuffle(rng, 3);
    [head[0], head[1], head[2]]
}

fn exact_cover(n: usize, clauses: &Option<Vec<[usize; 3]>>, m: Option<usize>, form: EcForm, rng: &mut Rng) -> Result<Built> {
    check_qubits(n)?;
    if n < 3 {
        return Err(Error::invalid("exact cover needs at least 3 bits"));
    }
    let (list, planted) = match (clauses, m) {
        (Some(list), None) => (list.clone(), None),
        (None, Some(m)) => {
            if m == 0 {
                return Err(Error::invalid("clause count must be positive"));
            }
            let mut assignment: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let ones = assignment.iter().filter(|&&b| b == 1).count();
            if ones == 0 || n - ones < 2 {
                assignment = vec![0; n];
                assignment[rng.gen_range(0..n)] = 1;
            }
            let mut list = Vec::with_capacity(m);
            while list.len() < m {
                let t = distinct_triple(n, rng);
                if t.iter().filter(|&&q| assignment[q] == 1).count() == 1 {
                    list.push(t);
                }
            }
            let x = (0..n).filter(|&q| assignment[q] == 1).map(|q| qubit_mask(q, n)).sum();
            (list, Some(x))
        }
        _ => return Err(Error::invalid("exact cover needs exactly one of `clauses` or `m`")),
    };
    let mut h1 = OperatorSum::new(n);
    for t in &list {
        if t.iter().any(|&q| q >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::invalid("clause variables must be distinct and < n"));
        }
        add_ec_clause(&mut h1, *t, form)?;
    }
    let (path, initial) = qubit_instance(transverse_half(n), h1)?;
    let mut b = simple(path, initial, n);
    b.known = planted.map(|x| (vec![x], 0.0));
    b.data.clauses = list.into_iter().map(|t| (t, 1)).collect();
    Ok(b)
}

fn pspin(n: usize, p: u32) -> Result<Built> {
    if p == 0 {
        return Err(Error::invalid("p must be >= 1"));
    }
    let nf = n as f64;
    let values: Vec<f64> = (0..=n).map(|w| -nf * ((nf - 2.0 * w as f64) / nf).powi(p as i32)).collect();
    let mut b = symmetric_family(n, vec![(Coeff::one_minus_s(), transverse_neg(n)), (Coeff::s(), weight_op(values)?)], (0, -nf))?;
    if p % 2 == 0 && n <= crate::operators::MATRIX_FREE_LIMIT {
        b.known = Some((vec![0, (1 << n) - 1], -nf));
    }
    Ok(b)
}

fn ising_from(n: usize, couplings: Vec<(usize, usize, f64)>, sign: f64) -> Result<Built> {
    let mut h1 = OperatorSum::new(n);
    for &(i, j, v) in &couplings {
        h1.add_pauli(sign * v, &[(i, Axis::Z), (j, Axis::Z)])?;
    }
    let (path, initial) = qubit_instance(transverse_neg(n), h1)?;
    let mut b = simple(path, initial, n);
    b.data.couplings = couplings.into_iter().map(|(i, j, v)| (i, j, sign * v)).collect();
    Ok(b)
}

fn sk(n: usize, bimodal: bool, rng: &mut Rng) -> Result<Built> {
    check_qubits(n)?;
    if n < 2 {
        return Err(Error::invalid("sk needs n >= 2"));
    }
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if bimodal {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.sample::<f64, _>(StandardNormal)
            };
            couplings.push((i, j, v));
        }
    }
    ising_from(n, couplings, 1.0)
}

fn hopfield(n: usize, patterns: usize, rng: &mut Rng) -> Result<Built> {
    check_qubits(n)?;
    if n < 2 || patterns == 0 {
        return Err(Error::invalid("hopfield needs n >= 2 and at least one pattern"));
    }
    let xi: Vec<Vec<f64>> = (0..patterns).map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = xi.iter().map(|p| p[i] * p[j]).sum::<f64>() / n as f64;
            couplings.push((i, j, v));
        }
    }
    let mut b = ising_from(n, couplings, -1.0)?;
    b.data.patterns = xi;
    Ok(b)
}

/// Random 3-regular hypergraph: n clauses of 3 distinct variables, each variable in exactly 3 clauses.
fn three_regular_clauses(n: usize, rng: &mut Rng) -> Result<Vec<[usize; 3]>> {
    for _ in 0..10_000 {
        let mut slots: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
        slots.shuffle(rng);
        let clauses: Vec<[usize; 3]> = slots.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        if clauses.iter().all(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]) {
            return Ok(clauses);
        }
    }
    Err(Error::invalid(format!("no 3-regular clause set found for n = {n}")))
}

fn xorsat(n: usize, planted: bool, rng: &mut Rng) -> Result<Built> {
    check_qubits(n)?;
    if n < 4 {
        return Err(Error::invalid("3-regular 3-XORSAT needs n >= 4"));
    }
    let clauses = three_regular_clauses(n, rng)?;
    let hidden: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let parities: Vec<u8> =
        clauses.iter().map(|t| if planted { hidden[t[0]] ^ hidden[t[1]] ^ hidden[t[2]] } else { rng.gen_range(0..2) }).collect();
    let mut h1 = OperatorSum::new(n);
    for (t, &b) in clauses.iter().zip(&parities) {
        let j = if b == 0 { 1.0 } else { -1.0 };
        h1.add_identity(0.5);
        h1.add_pauli(-0.5 * j, &[(t[0], Axis::Z), (t[1], Axis::Z), (t[2], Axis::Z)])?;
    }
    let (path, initial) = qubit_instance(transverse_neg(n), h1)?;
    let mut b = simple(path, initial, n);
    if planted {
        let x = (0..n).filter(|&q| hidden[q] == 1).map(|q| qubit_mask(q, n)).sum();
        b.known = Some((vec![x], 0.0));
    }
    b.data.clauses = clauses.into_iter().zip(parities).collect();
    Ok(b)
}

fn number_partition(a: &Option<Vec<f64>>, n: Option<usize>, bits: u32, rng: &mut Rng) -> Result<Built> {
    let numbers = match (a, n) {
        (Some(a), None) => a.clone(),
        (None, Some(n)) => {
            if bits == 0 || bits > 52 {
                return Err(Error::invalid("bits must be in 1..=52"));
            }
            (0..n).map(|_| rng.gen_range(1..=(1u64 << bits)) as f64).collect()
        }
        _ => return Err(Error::invalid("number partition needs exactly one of `a` or `n`")),
    };
    let n = numbers.len();
    check_qubits(n)?;
    if numbers.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("numbers must be finite"));
    }
    let mut h1 = OperatorSum::new(n);
    h1.add_identity(numbers.iter().map(|x| x * x).sum());
    for i in 0..n {
        for j in (i + 1)..n {
            h1.add_pauli(2.0 * numbers[i] * numbers[j], &[(i, Axis::Z), (j, Axis::Z)])?;
        }
    }
    let (path, initial) = qubit_instance(transverse_half(n), h1)?;
    let mut b = simple(path, initial, n);
    b.data.numbers = numbers;
    Ok(b)
}

/// Σ over bit triples of h3(b_i + b_j + b_k) with h3 = (0, 3, 1, 1), as a function of the Hamming weight.
pub fn catalyst_final_values(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|w| {
            let (w, m) = (w as f64, (n - w) as f64);
            1.5 * w * m * (m - 1.0) + 0.5 * w * (w - 1.0) * m + w * (w - 1.0) * (w - 2.0) / 6.0
        })
        .collect()
}

fn catalyst(n: usize, with_catalyst: bool) -> Result<Built> {
    if n < 3 {
        return Err(Error::invalid("catalyst family needs n >= 3"));
    }
    let nf = n as f64;
    let scale = (nf - 1.0) * (nf - 2.0) / 2.0;
    let mut h0 = sum_single(n, Axis::X, -0.5 * scale);
    h0.add_identity(scale * nf / 2.0);
    let mut comps = vec![(Coeff::one_minus_s(), h0)];
    if with_catalyst {
        comps.push((Coeff::s_one_minus_s(), sum_pairs(n, Axis::X, Axis::Z, -nf)));
    }
    comps.push((Coeff::s(), weight_op(catalyst_final_values(n))?));
    symmetric_family(n, comps, (0, 0.0))
}

fn random_init(base: &Family, seed: u64) -> Result<Built> {
    if matches!(base, Family::RandomInit { .. }) {
        return Err(Error::invalid("random_init cannot wrap itself"));
    }
    let mut b = build(base, seed)?;
    let n = b.path.n_qubits().ok_or_else(|| Error::invalid("random_init needs a qubit family"))?;
    let mut rng = crate::rng::rng(crate::rng::task_seed(seed, "random_init"));
    let coeffs: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 0.5 } else { 1.5 }).collect();
    let mut h0 = OperatorSum::new(n);
    for (q, &ci) in coeffs.iter().enumerate() {
        h0.add_identity(0.5 * ci);
        h0.add_pauli(-0.5 * ci, &[(q, Axis::X)])?;
    }
    let mut path = HamiltonianPath::qubits(n);
    let mut replaced = false;
    for (f, op) in b.path.components() {
        if !replaced && matches!(f, Coeff::Poly(p) if p.as_slice() == [1.0, -1.0]) {
            path.push_sum(f.clone(), h0.clone())?;
            replaced = true;
        } else {
            path.push(f.clone(), op.as_ref().clone())?;
        }
    }
    if !replaced {
        return Err(Error::invalid("base family has no (1 − s) initial component"));
    }
    b.path = path;
    b.initial = StateVector::full(uniform_state(n))?;
    b.reduced = None;
    b.symmetric = None;
    b.data.init_coeffs = coeffs;
    Ok(b)
}

pub(crate) fn build(family: &Family, seed: u64) -> Result<Built> {
    let mut rng = crate::rng::rng(seed);
    let rng = &mut rng;
    match family {
        Family::Grover { n, marked } => grover_like(*n, &[*marked]),
        Family::MultiMarked { n, marked } => grover_like(*n, marked),
        Family::DeutschJozsa { n, balanced } => deutsch_jozsa(*n, *balanced, rng),
        Family::BernsteinVazirani { a } => bernstein_vazirani(a),
        Family::GluedTrees { n, alpha } => glued_trees(*n, *alpha),
        Family::PlainHw { n } => weight_family(*n, (0..=*n).map(|w| w as f64).collect()),
        Family::Spike { n } => {
            if *n == 0 || n % 4 != 0 {
                return Err(Error::invalid("spike needs n divisible by 4"));
            }
            weight_family(*n, (0..=*n).map(|w| if w == n / 4 { *n as f64 } else { w as f64 }).collect())
        }
        Family::WidthHeight { n, alpha, beta } => width_height(*n, *alpha, *beta),
        Family::Plateau { n, l, u } => {
            if !(l < u && *u <= *n) {
                return Err(Error::invalid("plateau needs l < u <= n"));
            }
            weight_family(*n, (0..=*n).map(|w| if *l < w && w < *u { (*u - 1) as f64 } else { w as f64 }).collect())
        }
        Family::VandamPhw { n } => weight_family(*n, (0..=*n).map(|w| if w == *n { -1.0 } else { w as f64 }).collect()),
        Family::TwosatRing { n, disagree } => twosat_ring(*n, disagree),
        Family::WeightedChain { period, b, w } => weighted_chain(*period, *b, *w),
        Family::DimerLadder { length, k, u, periodic } => dimer_ladder(*length, *k, *u, *periodic),
        Family::ExactCover { n, clauses, m, form } => exact_cover(*n, clauses, *m, *form, rng),
        Family::Pspin { n, p } => pspin(*n, *p),
        Family::Sk { n, bimodal } => sk(*n, *bimodal, rng),
        Family::Hopfield { n, patterns } => hopfield(*n, *patterns, rng),
        Family::Xorsat3reg { n, planted } => xorsat(*n, *planted, rng),
        Family::NumberPartition { a, n, bits } => number_partition(a, *n, *bits, rng),
        Family::Catalyst3local { n, catalyst: with } => catalyst(*n, *with),
        Family::RandomInit { base } => random_init(base, seed),
    }
}
