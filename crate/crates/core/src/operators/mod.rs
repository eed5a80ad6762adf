//! Hermitian operators on qubit registers, built from typed terms.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index, and
//! σ^z|0⟩ = +|0⟩. A bit string "b0 b1 … b(n−1)" therefore maps to index Σ b_q 2^(n−1−q).

pub mod io;
pub mod path;
pub mod symmetric;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_defect, CMatrix, CVector, C64, ONE, ZERO};

pub use path::{Coeff, HamiltonianPath, Operator, ReducedMatrix, StateKind, StateVector};
pub use symmetric::{reduce_symmetric, SymmetricPath};

pub const DEFAULT_DENSE_LIMIT: usize = 14;
pub const MATRIX_FREE_LIMIT: usize = 24;
pub const MAX_BLOCK_QUBITS: usize = 4;

#[inline]
pub fn qubit_mask(q: usize, n: usize) -> usize {
    1 << (n - 1 - q)
}

#[inline]
pub fn bit_of(x: usize, q: usize, n: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Parse a bit string ("0101") into a basis index.
pub fn index_of_bits(bits: &str) -> Result<usize> {
    let mut x = 0usize;
    for ch in bits.chars() {
        x <<= 1;
        match ch {
            '0' => {}
            '1' => x |= 1,
            _ => return Err(Error::invalid(format!("bad bit string {bits:?}"))),
        }
    }
    Ok(x)
}

pub fn bits_of_index(x: usize, n: usize) -> String {
    (0..n).map(|q| if bit_of(x, q, n) == 1 { '1' } else { '0' }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_symbol(ch: char) -> Option<Axis> {
        match ch {
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Real multiple of a tensor product of Pauli matrices; no factors means a scaled identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coeff: f64,
    factors: Vec<(usize, Axis)>,
}

impl PauliString {
    pub fn new(coeff: f64, factors: &[(usize, Axis)]) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::invalid("pauli coefficient not finite"));
        }
        let mut f = factors.to_vec();
        f.sort();
        if f.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("repeated qubit in pauli string"));
        }
        Ok(PauliString { coeff, factors: f })
    }

    pub fn identity(coeff: f64) -> Self {
        PauliString { coeff, factors: vec![] }
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.factors
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    /// Masks (flip, phase) with the global phase i^(#Y).
    fn masks(&self, n: usize) -> (usize, usize, C64) {
        let mut flip = 0;
        let mut sign = 0;
        let mut ny = 0;
        for &(q, a) in &self.factors {
            let m = qubit_mask(q, n);
            match a {
                Axis::X => flip |= m,
                Axis::Y => {
                    flip |= m;
                    sign |= m;
                    ny += 1;
                }
                Axis::Z => sign |= m,
            }
        }
        let phase = match ny % 4 {
            0 => ONE,
            1 => C64::new(0.0, 1.0),
            2 => -ONE,
            _ => C64::new(0.0, -1.0),
        };
        (flip, sign, phase)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Computational basis.
    Z,
    /// Hadamard-rotated basis, |b⟩_X = H^{⊗n}|b⟩.
    X,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Pauli(PauliString),
    /// coeff·|b⟩⟨b| on the whole register.
    Projector { coeff: f64, state: usize, basis: Basis },
    /// coeff·|φ⟩⟨φ| with |φ⟩ the uniform superposition.
    Uniform { coeff: f64 },
    /// Hermitian matrix on an ordered qubit subset; the first listed qubit is the most significant local bit.
    Dense { qubits: Vec<usize>, matrix: CMatrix },
    /// Diagonal function of the Hamming weight: Σ_x values[|x|]·|x⟩⟨x|.
    Weight { values: Vec<f64> },
}

impl Term {
    pub fn pauli(coeff: f64, factors: &[(usize, Axis)]) -> Result<Term> {
        Ok(Term::Pauli(PauliString::new(coeff, factors)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Term::Pauli(_) => "pauli",
            Term::Projector { .. } => "projector",
            Term::Uniform { .. } => "uniform",
            Term::Dense { .. } => "dense",
            Term::Weight { .. } => "weight",
        }
    }

    fn is_real(&self) -> bool {
        match self {
            Term::Pauli(p) => p.factors.iter().filter(|f| f.1 == Axis::Y).count() % 2 == 0,
            Term::Dense { matrix, .. } => matrix.iter().all(|z| z.im == 0.0),
            _ => true,
        }
    }

    fn is_diagonal(&self) -> bool {
        match self {
            Term::Pauli(p) => p.factors.iter().all(|f| f.1 == Axis::Z),
            Term::Projector { basis, .. } => *basis == Basis::Z,
            Term::Uniform { .. } => false,
            Term::Dense { matrix, .. } => {
                let d = matrix.nrows();
                (0..d).all(|i| (0..d).all(|j| i == j || matrix[(i, j)] == ZERO))
            }
            Term::Weight { .. } => true,
        }
    }
}

/// Hermitian operator on `n` qubits as a list of typed terms.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum {
    n: usize,
    terms: Vec<Term>,
}

impl OperatorSum {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "operator needs at least one qubit");
        OperatorSum { n, terms: Vec::new() }
    }

    pub fn from_terms(n: usize, terms: Vec<Term>) -> Result<Self> {
        let mut op = OperatorSum::new(n);
        for t in terms {
            op.push(t)?;
        }
        Ok(op)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: Term) -> Result<()> {
        let n = self.n;
        match &term {
            Term::Pauli(p) => {
                if let Some(&(q, _)) = p.factors.iter().find(|f| f.0 >= n) {
                    return Err(Error::invalid(format!("pauli factor on qubit {q} outside {n} qubits")));
                }
            }
            Term::Projector { coeff, state, .. } => {
                if !coeff.is_finite() || *state >= (1usize << n) {
                    return Err(Error::invalid("projector coefficient or state out of range"));
                }
            }
            Term::Uniform { coeff } => {
                if !coeff.is_finite() {
                    return Err(Error::invalid("uniform projector coefficient not finite"));
                }
            }
            Term::Dense { qubits, matrix } => {
                let k = qubits.len();
                if k == 0 || k > MAX_BLOCK_QUBITS {
                    return Err(Error::invalid(format!("dense block on {k} qubits")));
                }
                let mut sorted = qubits.clone();
                sorted.sort();
                if sorted.windows(2).any(|w| w[0] == w[1]) || sorted[k - 1] >= n {
                    return Err(Error::invalid("dense block qubits must be distinct and < n"));
                }
                if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
                    return Err(Error::invalid("dense block matrix has wrong shape"));
                }
                if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::invalid("dense block entry not finite"));
                }
                let defect = hermitian_defect(matrix);
                if defect > 1e-12 {
                    return Err(Error::NonHermitian(format!("dense block defect {defect:e}")));
                }
            }
            Term::Weight { values } => {
                if values.len() != n + 1 || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("weight function needs n+1 finite values"));
                }
            }
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn add_pauli(&mut self, coeff: f64, factors: &[(usize, Axis)]) -> Result<()> {
        self.push(Term::pauli(coeff, factors)?)
    }

    pub fn add_identity(&mut self, coeff: f64) {
        self.terms.push(Term::Pauli(PauliString::identity(coeff)));
    }

    pub fn add_projector(&mut self, coeff: f64, state: usize, basis: Basis) -> Result<()> {
        self.push(Term::Projector { coeff, state, basis })
    }

    pub fn add_uniform(&mut self, coeff: f64) -> Result<()> {
        self.push(Term::Uniform { coeff })
    }

    pub fn add_dense(&mut self, qubits: &[usize], matrix: CMatrix) -> Result<()> {
        self.push(Term::Dense { qubits: qubits.to_vec(), matrix })
    }

    /// Hermitian block on any qubit subset: a dense term up to `MAX_BLOCK_QUBITS`, Pauli strings above.
    pub fn add_block(&mut self, qubits: &[usize], matrix: CMatrix) -> Result<()> {
        if qubits.len() <= MAX_BLOCK_QUBITS {
            return self.add_dense(qubits, matrix);
        }
        let k = qubits.len();
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::invalid("block matrix has wrong shape"));
        }
        let defect = hermitian_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::NonHermitian(format!("block defect {defect:e}")));
        }
        let axes = [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)];
        let scale = 1.0 / (1usize << k) as f64;
        for code in 0..(1usize << (2 * k)) {
            let labels: Vec<Option<Axis>> = (0..k).map(|i| axes[(code >> (2 * (k - 1 - i))) & 3]).collect();
            let p = labels.iter().fold(CMatrix::identity(1, 1), |acc, a| {
                kron(&acc, &a.map_or_else(|| CMatrix::identity(2, 2), pauli_matrix))
            });
            let coeff = (p.adjoint() * &matrix).trace().re * scale;
            if coeff.abs() > 1e-15 {
                let factors: Vec<(usize, Axis)> =
                    labels.iter().zip(qubits).filter_map(|(a, &q)| a.map(|a| (q, a))).collect();
                self.add_pauli(coeff, &factors)?;
            }
        }
        Ok(())
    }

    pub fn add_weight(&mut self, values: Vec<f64>) -> Result<()> {
        self.push(Term::Weight { values })
    }

    /// Appends all terms of `other` scaled by `factor`.
    pub fn extend_scaled(&mut self, other: &OperatorSum, factor: f64) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        for t in &other.terms {
            self.terms.push(scale_term(t, factor));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> OperatorSum {
        OperatorSum { n: self.n, terms: self.terms.iter().map(|t| scale_term(t, factor)).collect() }
    }

    /// Re-index onto a larger register: qubit q goes to `map[q]`.
    pub fn embed(&self, n_new: usize, map: &[usize]) -> Result<OperatorSum> {
        if map.len() != self.n {
            return Err(Error::invalid("embedding map length differs from qubit count"));
        }
        let mut out = OperatorSum::new(n_new);
        for t in &self.terms {
            let nt = match t {
                Term::Pauli(p) => Term::pauli(p.coeff, &p.factors.iter().map(|&(q, a)| (map[q], a)).collect::<Vec<_>>())?,
                Term::Dense { qubits, matrix } => {
                    Term::Dense { qubits: qubits.iter().map(|&q| map[q]).collect(), matrix: matrix.clone() }
                }
                _ => {
                    return Err(Error::Unsupported(format!("embedding a {} term", t.kind())));
                }
            };
            out.push(nt)?;
        }
        Ok(out)
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(Term::is_real)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(Term::is_diagonal)
    }

    /// Diagonal entries in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let dim = self.dim();
        let mut d = vec![0.0; dim];
        for t in &self.terms {
            match t {
                Term::Pauli(p) => {
                    let (flip, sign, phase) = p.masks(n);
                    if flip == 0 {
                        for (x, dx) in d.iter_mut().enumerate() {
                            let s = if (x & sign).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                            *dx += p.coeff * s * phase.re;
                        }
                    }
                }
                Term::Projector { coeff, state, basis } => match basis {
                    Basis::Z => d[*state] += coeff,
                    Basis::X => d.iter_mut().for_each(|v| *v += coeff / dim as f64),
                },
                Term::Uniform { coeff } => d.iter_mut().for_each(|v| *v += coeff / dim as f64),
                Term::Dense { qubits, matrix } => {
                    for (x, dx) in d.iter_mut().enumerate() {
                        let l = local_index(x, qubits, n);
                        *dx += matrix[(l, l)].re;
                    }
                }
                Term::Weight { values } => {
                    for (x, dx) in d.iter_mut().enumerate() {
                        *dx += values[x.count_ones() as usize];
                    }
                }
            }
        }
        d
    }

    /// out += factor·H·ψ without forming H.
    pub fn apply_add(&self, psi: &[C64], out: &mut [C64], factor: f64) {
        let n = self.n;
        let dim = self.dim();
        debug_assert_eq!(psi.len(), dim);
        for t in &self.terms {
            match t {
                Term::Pauli(p) => {
                    let (flip, sign, phase) = p.masks(n);
                    let w = phase * (p.coeff * factor);
                    for x in 0..dim {
                        let s = if (x & sign).count_ones() % 2 == 1 { -w } else { w };
                        out[x ^ flip] += s * psi[x];
                    }
                }
                Term::Projector { coeff, state, basis } => match basis {
                    Basis::Z => out[*state] += psi[*state] * (coeff * factor),
                    Basis::X => {
                        let norm = 1.0 / dim as f64;
                        let mut acc = ZERO;
                        for (x, v) in psi.iter().enumerate() {
                            acc += if (x & state).count_ones() % 2 == 1 { -*v } else { *v };
                        }
                        let a = acc * (coeff * factor * norm);
                        for (x, o) in out.iter_mut().enumerate() {
                            *o += if (x & state).count_ones() % 2 == 1 { -a } else { a };
                        }
                    }
                },
                Term::Uniform { coeff } => {
                    let acc: C64 = psi.iter().sum();
                    let a = acc * (coeff * factor / dim as f64);
                    out.iter_mut().for_each(|o| *o += a);
                }
                Term::Dense { qubits, matrix } => apply_dense_block(qubits, matrix, n, psi, out, factor),
                Term::Weight { values } => {
                    for x in 0..dim {
                        out[x] += psi[x] * (values[x.count_ones() as usize] * factor);
                    }
                }
            }
        }
    }

    pub fn apply(&self, psi: &CVector) -> Result<CVector> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: psi.len() });
        }
        let mut out = CVector::zeros(self.dim());
        self.apply_add(psi.as_slice(), out.as_mut_slice(), 1.0);
        Ok(out)
    }

    /// Dense matrix; refuses registers above `limit` qubits.
    pub fn to_matrix_limited(&self, limit: usize) -> Result<CMatrix> {
        if self.n > limit {
            return Err(Error::DimensionLimit { n: self.n, limit });
        }
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        self.add_to_matrix(&mut m, 1.0);
        Ok(m)
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        self.to_matrix_limited(DEFAULT_DENSE_LIMIT)
    }

    pub(crate) fn add_to_matrix(&self, m: &mut CMatrix, factor: f64) {
        let n = self.n;
        let dim = self.dim();
        for t in &self.terms {
            match t {
                Term::Pauli(p) => {
                    let (flip, sign, phase) = p.masks(n);
                    let w = phase * (p.coeff * factor);
                    for x in 0..dim {
                        let s = if (x & sign).count_ones() % 2 == 1 { -w } else { w };
                        m[(x ^ flip, x)] += s;
                    }
                }
                Term::Projector { coeff, state, basis } => match basis {
                    Basis::Z => m[(*state, *state)] += c(coeff * factor),
                    Basis::X => {
                        let w = coeff * factor / dim as f64;
                        for x in 0..dim {
                            let sx = (x & state).count_ones() % 2;
                            for y in 0..dim {
                                let sy = (y & state).count_ones() % 2;
                                m[(x, y)] += c(if sx == sy { w } else { -w });
                            }
                        }
                    }
                },
                Term::Uniform { coeff } => {
                    let w = c(coeff * factor / dim as f64);
                    m.iter_mut().for_each(|z| *z += w);
                }
                Term::Dense { qubits, matrix } => {
                    let k = qubits.len();
                    let mut mask = 0;
                    for &q in qubits {
                        mask |= qubit_mask(q, n);
                    }
                    for x in 0..dim {
                        if x & mask != 0 {
                            continue;
                        }
                        for a in 0..(1 << k) {
                            let xa = x | spread(a, qubits, n);
                            for b in 0..(1 << k) {
                                let v = matrix[(a, b)];
                                if v != ZERO {
                                    m[(xa, x | spread(b, qubits, n))] += v * factor;
                                }
                            }
                        }
                    }
                }
                Term::Weight { values } => {
                    for x in 0..dim {
                        m[(x, x)] += c(values[x.count_ones() as usize] * factor);
                    }
                }
            }
        }
    }
}

fn scale_term(t: &Term, factor: f64) -> Term {
    match t {
        Term::Pauli(p) => Term::Pauli(PauliString { coeff: p.coeff * factor, factors: p.factors.clone() }),
        Term::Projector { coeff, state, basis } => Term::Projector { coeff: coeff * factor, state: *state, basis: *basis },
        Term::Uniform { coeff } => Term::Uniform { coeff: coeff * factor },
        Term::Dense { qubits, matrix } => Term::Dense { qubits: qubits.clone(), matrix: matrix * c(factor) },
        Term::Weight { values } => Term::Weight { values: values.iter().map(|v| v * factor).collect() },
    }
}

/// Local index of basis state x restricted to `qubits` (first listed = most significant).
#[inline]
pub fn local_index(x: usize, qubits: &[usize], n: usize) -> usize {
    let mut l = 0;
    for &q in qubits {
        l = (l << 1) | bit_of(x, q, n);
    }
    l
}

/// Global bit pattern of local index `a` on `qubits`.
#[inline]
pub fn spread(a: usize, qubits: &[usize], n: usize) -> usize {
    let k = qubits.len();
    let mut x = 0;
    for (i, &q) in qubits.iter().enumerate() {
        if (a >> (k - 1 - i)) & 1 == 1 {
            x |= qubit_mask(q, n);
        }
    }
    x
}

fn apply_dense_block(qubits: &[usize], matrix: &CMatrix, n: usize, psi: &[C64], out: &mut [C64], factor: f64) {
    let k = qubits.len();
    let d = 1 << k;
    let offsets: Vec<usize> = (0..d).map(|a| spread(a, qubits, n)).collect();
    let mut mask = 0;
    for &q in qubits {
        mask |= qubit_mask(q, n);
    }
    let mut local = [ZERO; 1 << MAX_BLOCK_QUBITS];
    for x in 0..(1usize << n) {
        if x & mask != 0 {
            continue;
        }
        for b in 0..d {
            local[b] = psi[x | offsets[b]];
        }
        for a in 0..d {
            let mut acc = ZERO;
            for b in 0..d {
                acc += matrix[(a, b)] * local[b];
            }
            out[x | offsets[a]] += acc * factor;
        }
    }
}

/// Pauli matrix products on a few qubits, e.g. kron of single-qubit operators.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Single-qubit operator matrices used when assembling dense blocks.
pub fn pauli_matrix(a: Axis) -> CMatrix {
    let m = a.matrix();
    CMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

pub fn projector_matrix(bit: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(bit, bit)] = ONE;
    m
}

/// Basis-state vector |x⟩ on n qubits.
pub fn basis_state(n: usize, x: usize) -> CVector {
    let mut v = CVector::zeros(1 << n);
    v[x] = ONE;
    v
}

pub fn uniform_state(n: usize) -> CVector {
    let dim = 1usize << n;
    CVector::from_element(dim, c(1.0 / (dim as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;

    #[test]
    fn pauli_x_matrix() {
        let mut op = OperatorSum::new(1);
        op.add_pauli(1.0, &[(0, Axis::X)]).unwrap();
        let m = op.to_matrix().unwrap();
        assert_eq!(m, CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
    }

    #[test]
    fn pauli_strings_match_kronecker_products() {
        let mut op = OperatorSum::new(3);
        op.add_pauli(0.7, &[(0, Axis::Y), (2, Axis::X)]).unwrap();
        let id = CMatrix::identity(2, 2);
        let expect = kron(&kron(&pauli_matrix(Axis::Y), &id), &pauli_matrix(Axis::X)) * c(0.7);
        assert!((op.to_matrix().unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn sigma_z_convention() {
        let mut op = OperatorSum::new(2);
        op.add_pauli(1.0, &[(0, Axis::Z)]).unwrap();
        let d = op.diagonal();
        // index 0b10 has qubit 0 in |1⟩.
        assert_eq!(d, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn dense_block_ordering() {
        // |1⟩⟨1| on qubit 1 of 2 written as a two-qubit block on (1, 0).
        let block = kron(&projector_matrix(1), &CMatrix::identity(2, 2));
        let mut op = OperatorSum::new(2);
        op.add_dense(&[1, 0], block).unwrap();
        assert_eq!(op.diagonal(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_terms() {
        let mut op = OperatorSum::new(2);
        assert!(op.add_pauli(1.0, &[(2, Axis::X)]).is_err());
        assert!(op.add_pauli(1.0, &[(0, Axis::X), (0, Axis::Z)]).is_err());
        let bad = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(op.add_dense(&[0], bad), Err(Error::NonHermitian(_))));
        assert!(op.add_weight(vec![0.0; 2]).is_err());
    }

    #[test]
    fn x_basis_projector_on_plus_states() {
        let mut op = OperatorSum::new(2);
        op.add_projector(1.0, 0, Basis::X).unwrap();
        let mut u = OperatorSum::new(2);
        u.add_uniform(1.0).unwrap();
        assert!((op.to_matrix().unwrap() - u.to_matrix().unwrap()).norm() < 1e-15);
        let mut minus = OperatorSum::new(1);
        minus.add_projector(1.0, 1, Basis::X).unwrap();
        let m = minus.to_matrix().unwrap();
        assert!((m[(0, 1)].re + 0.5).abs() < 1e-15);
    }

    #[test]
    fn grover_pair_spectrum() {
        let n = 2;
        let mut h0 = OperatorSum::new(n);
        h0.add_identity(1.0);
        h0.add_uniform(-1.0).unwrap();
        let mut h1 = OperatorSum::new(n);
        h1.add_identity(1.0);
        h1.add_projector(-1.0, 3, Basis::Z).unwrap();
        let m = h0.to_matrix().unwrap() * c(0.5) + h1.to_matrix().unwrap() * c(0.5);
        let e = eigvalsh(&m);
        let expect = [0.25, 0.75, 1.0, 1.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_annihilates_marked_state() {
        let mut h1 = OperatorSum::new(3);
        h1.add_identity(1.0);
        h1.add_projector(-1.0, 5, Basis::Z).unwrap();
        let out = h1.apply(&basis_state(3, 5)).unwrap();
        assert!(out.norm() < 1e-15);
    }
}
