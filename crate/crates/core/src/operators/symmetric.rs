//! Reduction of permutation-invariant paths to the (n+1)-dimensional Dicke sector.
//!
//! Basis state w is the normalized uniform superposition of all bit strings of Hamming weight w.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64, ZERO};
use crate::operators::path::{HamiltonianPath, Operator};
use crate::operators::{Axis, Basis, OperatorSum, Term};

/// Path restricted to the permutation-symmetric sector.
#[derive(Clone, Debug)]
pub struct SymmetricPath {
    pub n: usize,
    pub path: HamiltonianPath,
}

impl SymmetricPath {
    pub fn dim(&self) -> usize {
        self.n + 1
    }
}

pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for i in 1..=n {
        v[i] = v[i - 1] + (i as f64).ln();
    }
    v
}

pub fn ln_binomial(lf: &[f64], n: usize, k: usize) -> f64 {
    lf[n] - lf[k] - lf[n - k]
}

fn falling(x: usize, k: usize) -> f64 {
    if k > x {
        return 0.0;
    }
    (0..k).map(|i| (x - i) as f64).product()
}

/// Amplitudes ⟨D_w|φ⟩ of the uniform superposition.
pub fn uniform_dicke_amplitudes(n: usize) -> Vec<f64> {
    let lf = ln_factorials(n);
    (0..=n).map(|w| (0.5 * (ln_binomial(&lf, n, w) - n as f64 * std::f64::consts::LN_2)).exp()).collect()
}

/// Full-register Dicke state |D_w⟩.
pub fn dicke_state(n: usize, w: usize) -> CVector {
    let dim = 1usize << n;
    let count = (0..dim).filter(|x| x.count_ones() as usize == w).count() as f64;
    CVector::from_fn(dim, |x, _| if x.count_ones() as usize == w { c(1.0 / count.sqrt()) } else { ZERO })
}

/// Dicke-basis matrix of Σ over ordered tuples of distinct qubits of σ^{a_1}⋯σ^{a_k}.
fn ordered_tuple_sum(n: usize, axes: &[Axis], lf: &[f64]) -> CMatrix {
    let k = axes.len();
    let d = n + 1;
    let mut m = CMatrix::zeros(d, d);
    for w in 0..=n {
        for b in 0..(1usize << k) {
            let ones = b.count_ones() as usize;
            let cnt = falling(w, ones) * falling(n - w, k - ones);
            if cnt == 0.0 {
                continue;
            }
            for bp in 0..(1usize << k) {
                let mut amp = C64::new(1.0, 0.0);
                for (i, a) in axes.iter().enumerate() {
                    let bi = (b >> i) & 1;
                    let bo = (bp >> i) & 1;
                    amp *= a.matrix()[bo][bi];
                    if amp == ZERO {
                        break;
                    }
                }
                if amp == ZERO {
                    continue;
                }
                let wp = w - ones + bp.count_ones() as usize;
                let ratio = (0.5 * (ln_binomial(lf, n, w) - ln_binomial(lf, n, wp))).exp();
                m[(wp, w)] += amp * (cnt * ratio);
            }
        }
    }
    m
}

fn multiplicity_factorial(axes: &[Axis]) -> f64 {
    let mut counts: BTreeMap<Axis, usize> = BTreeMap::new();
    for &a in axes {
        *counts.entry(a).or_default() += 1;
    }
    counts.values().map(|&m| (1..=m).map(|i| i as f64).product::<f64>()).product()
}

/// Reduced matrix of a permutation-invariant operator sum.
pub fn reduce_operator(op: &OperatorSum) -> Result<CMatrix> {
    let n = op.n_qubits();
    let d = n + 1;
    let lf = ln_factorials(n);
    let mut m = CMatrix::zeros(d, d);
    let mut groups: BTreeMap<Vec<Axis>, BTreeMap<Vec<(usize, Axis)>, f64>> = BTreeMap::new();
    for t in op.terms() {
        match t {
            Term::Pauli(p) => {
                if p.weight() == 0 {
                    for i in 0..d {
                        m[(i, i)] += c(p.coeff);
                    }
                    continue;
                }
                let mut axes: Vec<Axis> = p.factors().iter().map(|f| f.1).collect();
                axes.sort();
                *groups.entry(axes).or_default().entry(p.factors().to_vec()).or_default() += p.coeff;
            }
            Term::Weight { values } => {
                for (i, v) in values.iter().enumerate() {
                    m[(i, i)] += c(*v);
                }
            }
            Term::Uniform { coeff } => add_rank_one(&mut m, &uniform_dicke_amplitudes(n), *coeff),
            Term::Projector { coeff, state, basis } => {
                let all = (1usize << n) - 1;
                if *state != 0 && *state != all {
                    return Err(Error::NotSymmetric(format!("projector on state {state}")));
                }
                match basis {
                    Basis::Z => {
                        let w = if *state == 0 { 0 } else { n };
                        m[(w, w)] += c(*coeff);
                    }
                    Basis::X => {
                        let mut a = uniform_dicke_amplitudes(n);
                        if *state == all {
                            for (w, x) in a.iter_mut().enumerate() {
                                if w % 2 == 1 {
                                    *x = -*x;
                                }
                            }
                        }
                        add_rank_one(&mut m, &a, *coeff);
                    }
                }
            }
            Term::Dense { .. } => return Err(Error::NotSymmetric("dense block term".into())),
        }
    }
    for (axes, terms) in groups {
        let k = axes.len();
        let arrangements = {
            let kf: f64 = (1..=k).map(|i| i as f64).product();
            kf / multiplicity_factorial(&axes)
        };
        let expected = (ln_binomial(&lf, n, k)).exp() * arrangements;
        let coeffs: Vec<f64> = terms.values().copied().collect();
        let c0 = coeffs[0];
        let uniform = coeffs.iter().all(|&x| (x - c0).abs() <= 1e-12 * (1.0 + c0.abs()));
        if (terms.len() as f64 - expected).abs() > 0.5 || !uniform {
            return Err(Error::NotSymmetric(format!(
                "pauli group {axes:?}: {} terms, {expected} needed for permutation invariance",
                terms.len()
            )));
        }
        let block = ordered_tuple_sum(n, &axes, &lf) * c(c0 / multiplicity_factorial(&axes));
        m += block;
    }
    Ok((&m + m.adjoint()) * c(0.5))
}

fn add_rank_one(m: &mut CMatrix, a: &[f64], coeff: f64) {
    for i in 0..a.len() {
        for j in 0..a.len() {
            m[(i, j)] += c(coeff * a[i] * a[j]);
        }
    }
}

/// Restrict a qubit path to the permutation-symmetric sector.
pub fn reduce_symmetric(path: &HamiltonianPath) -> Result<SymmetricPath> {
    let n = path.n_qubits().ok_or_else(|| Error::NotSymmetric("path is not a qubit path".into()))?;
    let mut out = HamiltonianPath::reduced(n + 1);
    for (f, op) in path.components() {
        match op.as_ref() {
            Operator::Sum(o) => out.push_matrix(f.clone(), reduce_operator(o)?)?,
            Operator::Matrix(_) => return Err(Error::NotSymmetric("dense component".into())),
        }
    }
    Ok(SymmetricPath { n, path: out })
}

/// Full-register state from Dicke-sector amplitudes.
pub fn expand_dicke(n: usize, amps: &CVector) -> CVector {
    let lf = ln_factorials(n);
    let dim = 1usize << n;
    CVector::from_fn(dim, |x, _| {
        let w = x.count_ones() as usize;
        amps[w] * (-0.5 * ln_binomial(&lf, n, w)).exp()
    })
}

/// Collective operators used across problem families.
pub mod collective {
    use super::*;

    /// Σ_i σ_i^a with coefficient `coeff`.
    pub fn sum_single(n: usize, a: Axis, coeff: f64) -> OperatorSum {
        let mut op = OperatorSum::new(n);
        for q in 0..n {
            op.add_pauli(coeff, &[(q, a)]).expect("valid qubit");
        }
        op
    }

    /// Σ_{i<j} σ_i^a σ_j^b + σ_i^b σ_j^a (for a = b, each unordered pair once).
    pub fn sum_pairs(n: usize, a: Axis, b: Axis, coeff: f64) -> OperatorSum {
        let mut op = OperatorSum::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                op.add_pauli(coeff, &[(i, a), (j, b)]).expect("valid qubits");
                if a != b {
                    op.add_pauli(coeff, &[(i, b), (j, a)]).expect("valid qubits");
                }
            }
        }
        op
    }
}

#[cfg(test)]
mod tests {
    use super::collective::*;
    use super::*;
    use crate::linalg::{eigvalsh, inner};
    use crate::operators::path::Coeff;

    fn project(op: &OperatorSum) -> CMatrix {
        let n = op.n_qubits();
        let full = op.to_matrix().unwrap();
        let basis: Vec<CVector> = (0..=n).map(|w| dicke_state(n, w)).collect();
        CMatrix::from_fn(n + 1, n + 1, |i, j| inner(&basis[i], &(&full * &basis[j])))
    }

    #[test]
    fn sigma_x_sum_two_qubits() {
        let m = reduce_operator(&sum_single(2, Axis::X, 1.0)).unwrap();
        let s2 = 2f64.sqrt();
        let expect = CMatrix::from_row_slice(3, 3, &[c(0.0), c(s2), c(0.0), c(s2), c(0.0), c(s2), c(0.0), c(s2), c(0.0)]);
        assert!((m - expect).norm() < 1e-12);
    }

    #[test]
    fn weight_diagonal() {
        let mut op = OperatorSum::new(3);
        op.add_weight(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let m = reduce_operator(&op).unwrap();
        assert!((m - CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0), c(1.0), c(2.0), c(3.0)]))).norm() < 1e-15);
    }

    #[test]
    fn uniform_projector_rank_one() {
        let mut op = OperatorSum::new(4);
        op.add_uniform(1.0).unwrap();
        let m = reduce_operator(&op).unwrap();
        let a = uniform_dicke_amplitudes(4);
        assert!((a[2] - (6.0f64 / 16.0).sqrt()).abs() < 1e-15);
        let e = eigvalsh(&m);
        assert!(e[0].abs() < 1e-12 && (e[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_pair_sums_match_projection() {
        for n in 2..=5 {
            let mut op = sum_pairs(n, Axis::X, Axis::Z, 0.7);
            op.extend_scaled(&sum_pairs(n, Axis::Y, Axis::Y, -0.3), 1.0).unwrap();
            op.extend_scaled(&sum_single(n, Axis::Y, 0.2), 1.0).unwrap();
            op.add_projector(0.4, (1 << n) - 1, Basis::X).unwrap();
            op.add_projector(0.9, (1 << n) - 1, Basis::Z).unwrap();
            let r = reduce_operator(&op).unwrap();
            assert!((r - project(&op)).norm() < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn three_body_sum_matches_projection() {
        let n = 4;
        let mut op = OperatorSum::new(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i < j && j < k {
                        op.add_pauli(0.5, &[(i, Axis::Z), (j, Axis::Z), (k, Axis::Z)]).unwrap();
                    }
                }
            }
        }
        let r = reduce_operator(&op).unwrap();
        assert!((r - project(&op)).norm() < 1e-11);
    }

    #[test]
    fn rejects_non_symmetric() {
        let mut op = OperatorSum::new(3);
        op.add_pauli(1.0, &[(0, Axis::X)]).unwrap();
        assert!(matches!(reduce_operator(&op), Err(Error::NotSymmetric(_))));
        let mut p = HamiltonianPath::qubits(3);
        p.push_sum(Coeff::s(), op).unwrap();
        assert!(reduce_symmetric(&p).is_err());
    }
}
