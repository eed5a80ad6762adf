//! Parametrized families H(s) = Σ_k f_k(s)·H_k.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_defect, norm, CMatrix, CVector, C64};
use crate::operators::{OperatorSum, DEFAULT_DENSE_LIMIT, MATRIX_FREE_LIMIT};
use crate::schedules::{ControlTrajectory, Schedule};

/// Scalar coefficient with analytic first and second derivatives.
#[derive(Clone, Debug)]
pub enum Coeff {
    /// Σ_i c_i s^i.
    Poly(Vec<f64>),
    /// f(A(s)) for a schedule A.
    Composed(Box<Coeff>, Schedule),
    /// Component `index` of a control trajectory x⃗(s).
    Control(Arc<ControlTrajectory>, usize),
    Scaled(f64, Box<Coeff>),
}

impl Coeff {
    pub fn constant(v: f64) -> Coeff {
        Coeff::Poly(vec![v])
    }

    pub fn s() -> Coeff {
        Coeff::Poly(vec![0.0, 1.0])
    }

    pub fn one_minus_s() -> Coeff {
        Coeff::Poly(vec![1.0, -1.0])
    }

    pub fn s_one_minus_s() -> Coeff {
        Coeff::Poly(vec![0.0, 1.0, -1.0])
    }

    pub fn poly(c: &[f64]) -> Coeff {
        Coeff::Poly(c.to_vec())
    }

    pub fn scaled(&self, k: f64) -> Coeff {
        match self {
            Coeff::Poly(p) => Coeff::Poly(p.iter().map(|x| x * k).collect()),
            Coeff::Scaled(a, f) => Coeff::Scaled(a * k, f.clone()),
            other => Coeff::Scaled(k, Box::new(other.clone())),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Coeff::Poly(p) => p.iter().rev().fold(0.0, |acc, &x| acc * s + x),
            Coeff::Composed(f, a) => f.value(a.value(s)),
            Coeff::Control(t, i) => t.value(s)[*i],
            Coeff::Scaled(k, f) => k * f.value(s),
        }
    }

    pub fn d1(&self, s: f64) -> f64 {
        match self {
            Coeff::Poly(p) => p.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, &x)| acc * s + i as f64 * x),
            Coeff::Composed(f, a) => f.d1(a.value(s)) * a.derivative(s),
            Coeff::Control(t, i) => t.derivative(s)[*i],
            Coeff::Scaled(k, f) => k * f.d1(s),
        }
    }

    pub fn d2(&self, s: f64) -> f64 {
        match self {
            Coeff::Poly(p) => p
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, &x)| acc * s + (i * (i - 1)) as f64 * x),
            Coeff::Composed(f, a) => {
                let u = a.value(s);
                let ap = a.derivative(s);
                f.d2(u) * ap * ap + f.d1(u) * a.second_derivative(s)
            }
            Coeff::Control(t, i) => t.second_derivative(s)[*i],
            Coeff::Scaled(k, f) => k * f.d2(s),
        }
    }
}

/// Operator component of a path: a qubit operator sum or a reduced dense matrix.
#[derive(Clone, Debug)]
pub enum Operator {
    Sum(OperatorSum),
    Matrix(ReducedMatrix),
}

/// Dense matrix with its nonzero entries indexed for fast products on banded reduced paths.
#[derive(Clone, Debug)]
pub struct ReducedMatrix {
    matrix: CMatrix,
    /// (row, column, value), row-major.
    nonzeros: Vec<(usize, usize, C64)>,
}

impl ReducedMatrix {
    pub fn new(matrix: CMatrix) -> Self {
        let (r, k) = matrix.shape();
        let nonzeros = (0..r).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| (i, j, matrix[(i, j)])).filter(|e| e.2 != C64::new(0.0, 0.0)).collect();
        ReducedMatrix { matrix, nonzeros }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn nonzeros(&self) -> &[(usize, usize, C64)] {
        &self.nonzeros
    }
}

impl From<CMatrix> for ReducedMatrix {
    fn from(m: CMatrix) -> Self {
        ReducedMatrix::new(m)
    }
}

impl std::ops::Deref for ReducedMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.matrix
    }
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Sum(o) => o.dim(),
            Operator::Matrix(m) => m.nrows(),
        }
    }

    pub fn apply_add(&self, psi: &[C64], out: &mut [C64], factor: f64) {
        match self {
            Operator::Sum(o) => o.apply_add(psi, out, factor),
            Operator::Matrix(m) => {
                for &(i, j, a) in m.nonzeros() {
                    out[i] += a * psi[j] * factor;
                }
            }
        }
    }

    pub fn add_to_matrix(&self, m: &mut CMatrix, factor: f64) {
        match self {
            Operator::Sum(o) => o.add_to_matrix(m, factor),
            Operator::Matrix(a) => *m += a.matrix() * c(factor),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Operator::Sum(o) => o.is_real(),
            Operator::Matrix(m) => m.iter().all(|z| z.im == 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Full { n: usize },
    Reduced { dim: usize },
}

/// Pure state with a tag for the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amps: CVector,
    pub kind: StateKind,
}

impl StateVector {
    pub fn new(amps: CVector, kind: StateKind) -> Self {
        StateVector { amps, kind }
    }

    pub fn full(amps: CVector) -> Result<Self> {
        let d = amps.len();
        if !d.is_power_of_two() {
            return Err(Error::invalid(format!("full register state needs 2^n amplitudes, got {d}")));
        }
        Ok(StateVector { amps, kind: StateKind::Full { n: d.trailing_zeros() as usize } })
    }

    pub fn reduced(amps: CVector) -> Self {
        let dim = amps.len();
        StateVector { amps, kind: StateKind::Reduced { dim } }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        self.amps /= c(n);
        self
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// H(s) = Σ_k f_k(s)·H_k on a common space.
#[derive(Clone, Debug)]
pub struct HamiltonianPath {
    dim: usize,
    n_qubits: Option<usize>,
    components: Vec<(Coeff, Arc<Operator>)>,
    dense_limit: usize,
}

impl HamiltonianPath {
    pub fn qubits(n: usize) -> Self {
        HamiltonianPath { dim: 1 << n, n_qubits: Some(n), components: Vec::new(), dense_limit: DEFAULT_DENSE_LIMIT }
    }

    pub fn reduced(dim: usize) -> Self {
        HamiltonianPath { dim, n_qubits: None, components: Vec::new(), dense_limit: DEFAULT_DENSE_LIMIT }
    }

    /// (1 − s)·H0 + s·H1.
    pub fn interpolation(h0: OperatorSum, h1: OperatorSum) -> Result<Self> {
        let mut p = HamiltonianPath::qubits(h0.n_qubits());
        p.push(Coeff::one_minus_s(), Operator::Sum(h0))?;
        p.push(Coeff::s(), Operator::Sum(h1))?;
        Ok(p)
    }

    pub fn constant(h: OperatorSum) -> Result<Self> {
        let mut p = HamiltonianPath::qubits(h.n_qubits());
        p.push(Coeff::constant(1.0), Operator::Sum(h))?;
        Ok(p)
    }

    pub fn with_dense_limit(mut self, limit: usize) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn dense_limit(&self) -> usize {
        self.dense_limit
    }

    pub fn push(&mut self, coeff: Coeff, op: Operator) -> Result<()> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: op.dim() });
        }
        if let Operator::Matrix(m) = &op {
            let defect = hermitian_defect(m);
            if defect > 1e-12 {
                return Err(Error::NonHermitian(format!("component matrix defect {defect:e}")));
            }
        }
        if let (Some(n), Operator::Sum(o)) = (self.n_qubits, &op) {
            if o.n_qubits() > MATRIX_FREE_LIMIT {
                return Err(Error::DimensionLimit { n, limit: MATRIX_FREE_LIMIT });
            }
        }
        self.components.push((coeff, Arc::new(op)));
        Ok(())
    }

    pub fn push_sum(&mut self, coeff: Coeff, op: OperatorSum) -> Result<()> {
        self.push(coeff, Operator::Sum(op))
    }

    pub fn push_matrix(&mut self, coeff: Coeff, m: CMatrix) -> Result<()> {
        self.push(coeff, Operator::Matrix(m.into()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.n_qubits
    }

    pub fn components(&self) -> &[(Coeff, Arc<Operator>)] {
        &self.components
    }

    pub fn state_kind(&self) -> StateKind {
        match self.n_qubits {
            Some(n) => StateKind::Full { n },
            None => StateKind::Reduced { dim: self.dim },
        }
    }

    pub fn is_real(&self) -> bool {
        self.components.iter().all(|(_, o)| o.is_real())
    }

    fn check_dense(&self) -> Result<()> {
        if let Some(n) = self.n_qubits {
            if n > self.dense_limit {
                return Err(Error::DimensionLimit { n, limit: self.dense_limit });
            }
        }
        Ok(())
    }

    fn weighted(&self, weights: impl Fn(&Coeff) -> f64) -> Result<CMatrix> {
        self.check_dense()?;
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (f, op) in &self.components {
            let w = weights(f);
            if w != 0.0 {
                op.add_to_matrix(&mut m, w);
            }
        }
        Ok(m)
    }

    /// Dense H(s).
    pub fn assemble(&self, s: f64) -> Result<CMatrix> {
        self.weighted(|f| f.value(s))
    }

    /// Dense ∂_s H(s).
    pub fn assemble_d1(&self, s: f64) -> Result<CMatrix> {
        self.weighted(|f| f.d1(s))
    }

    /// Dense ∂_s² H(s).
    pub fn assemble_d2(&self, s: f64) -> Result<CMatrix> {
        self.weighted(|f| f.d2(s))
    }

    /// Dense matrices of every component operator.
    pub fn component_matrices(&self) -> Result<Vec<CMatrix>> {
        self.check_dense()?;
        Ok(self
            .components
            .iter()
            .map(|(_, op)| {
                let mut m = CMatrix::zeros(self.dim, self.dim);
                op.add_to_matrix(&mut m, 1.0);
                m
            })
            .collect())
    }

    pub fn apply_add(&self, s: f64, psi: &[C64], out: &mut [C64], factor: f64) {
        for (f, op) in &self.components {
            let w = f.value(s) * factor;
            if w != 0.0 {
                op.apply_add(psi, out, w);
            }
        }
    }

    /// H(s)·ψ without materializing qubit operators.
    pub fn apply(&self, s: f64, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: psi.dim() });
        }
        Ok(StateVector::new(self.apply_vec(s, &psi.amps), psi.kind))
    }

    pub fn apply_vec(&self, s: f64, psi: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim);
        self.apply_add(s, psi.as_slice(), out.as_mut_slice(), 1.0);
        out
    }

    /// H(A(s)) as a new path.
    pub fn reparametrize(&self, schedule: &Schedule) -> HamiltonianPath {
        let mut p = self.clone();
        p.components = self
            .components
            .iter()
            .map(|(f, op)| (Coeff::Composed(Box::new(f.clone()), schedule.clone()), op.clone()))
            .collect();
        p
    }

    /// Largest deviation between analytic f_k′ and a centered difference, relative to 1 + |f_k′|.
    pub fn coefficient_derivative_defect(&self, points: usize) -> f64 {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (f, _) in &self.components {
            for i in 0..points {
                let s = (i as f64 / (points - 1) as f64).clamp(h, 1.0 - h);
                let fd = (f.value(s + h) - f.value(s - h)) / (2.0 * h);
                worst = worst.max((fd - f.d1(s)).abs() / (1.0 + f.d1(s).abs()));
            }
        }
        worst
    }

    /// Upper bound on max_s ‖H(s)‖ from component norms: Σ_k max|f_k|·‖H_k‖.
    pub fn norm_bound(&self) -> f64 {
        let grid = 65;
        self.components
            .iter()
            .map(|(f, op)| {
                let fmax = (0..grid).map(|i| f.value(i as f64 / (grid - 1) as f64).abs()).fold(0.0, f64::max);
                fmax * operator_norm_bound(op)
            })
            .sum()
    }
}

/// Cheap upper bound on ‖op‖ from term coefficients.
pub fn operator_norm_bound(op: &Operator) -> f64 {
    use crate::operators::Term;
    match op {
        Operator::Matrix(m) => {
            let mut rows = vec![0.0; m.nrows()];
            for &(i, _, a) in m.nonzeros() {
                rows[i] += a.norm();
            }
            rows.into_iter().fold(0.0, f64::max)
        }
        Operator::Sum(o) => o
            .terms()
            .iter()
            .map(|t| match t {
                Term::Pauli(p) => p.coeff.abs(),
                Term::Projector { coeff, .. } | Term::Uniform { coeff } => coeff.abs(),
                Term::Dense { matrix, .. } => {
                    let d = matrix.nrows();
                    (0..d).map(|i| (0..d).map(|j| matrix[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
                }
                Term::Weight { values } => values.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            })
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{basis_state, Axis};

    #[test]
    fn polynomial_coefficients() {
        let f = Coeff::poly(&[1.0, -2.0, 3.0]);
        assert_eq!(f.value(2.0), 9.0);
        assert_eq!(f.d1(2.0), 10.0);
        assert_eq!(f.d2(2.0), 6.0);
        assert_eq!(Coeff::s_one_minus_s().d2(0.3), -2.0);
    }

    #[test]
    fn plain_hw_at_end() {
        let mut h0 = OperatorSum::new(1);
        h0.add_identity(0.5);
        h0.add_pauli(-0.5, &[(0, Axis::X)]).unwrap();
        let mut h1 = OperatorSum::new(1);
        h1.add_weight(vec![0.0, 1.0]).unwrap();
        let p = HamiltonianPath::interpolation(h0, h1).unwrap();
        let m = p.assemble(1.0).unwrap();
        assert!((m - CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])).norm() < 1e-15);
    }

    #[test]
    fn apply_on_weight_two_state() {
        let mut h0 = OperatorSum::new(2);
        h0.add_pauli(1.0, &[(0, Axis::X)]).unwrap();
        let mut h1 = OperatorSum::new(2);
        h1.add_weight(vec![0.0, 1.0, 2.0]).unwrap();
        let p = HamiltonianPath::interpolation(h0, h1).unwrap();
        let psi = StateVector::full(basis_state(2, 3)).unwrap();
        let out = p.apply(1.0, &psi).unwrap();
        assert!((out.amps - basis_state(2, 3) * c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn dense_limit_enforced() {
        let h = OperatorSum::new(5);
        let p = HamiltonianPath::constant(h).unwrap().with_dense_limit(4);
        assert!(matches!(p.assemble(0.5), Err(Error::DimensionLimit { .. })));
    }
}
