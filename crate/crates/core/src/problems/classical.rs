//! Classical optima of final Hamiltonians.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::LanczosOptions;
use crate::operators::{bits_of_index, qubit_mask, Operator};
use crate::problems::{Family, ProblemInstance};
use crate::spectra::{eig_low, Method};

pub const BRUTE_FORCE_MAX_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalSolution {
    pub energy: f64,
    /// Representative ground configuration, qubit 0 first.
    pub bits: String,
    /// Basis index of `bits` in the space of the instance path (Dicke index for reduced symmetric paths).
    pub index: usize,
    pub method: &'static str,
}

fn solution(energy: f64, index: usize, n: usize, method: &'static str) -> ClassicalSolution {
    ClassicalSolution { energy, bits: bits_of_index(index, n), index, method }
}

/// Exact optimum of H(1) by a family-specific algorithm, else by brute force or diagonalization.
pub fn classical_solve(instance: &ProblemInstance) -> Result<ClassicalSolution> {
    let family = match &instance.family {
        Family::RandomInit { base } => base.as_ref(),
        f => f,
    };
    let n = instance.n;
    match family {
        Family::Grover { marked, .. } => Ok(solution(0.0, *marked, n, "marked item")),
        Family::MultiMarked { marked, .. } => Ok(solution(0.0, *marked.iter().min().expect("nonempty"), n, "marked item")),
        Family::TwosatRing { .. } => ring_traversal(instance),
        Family::WeightedChain { .. } => {
            let e = -instance.data.couplings.iter().map(|t| t.2).sum::<f64>();
            Ok(solution(e, 0, n, "ferromagnet"))
        }
        Family::Xorsat3reg { .. } => match gaussian_elimination(n, &instance.data.clauses) {
            Some(x) => Ok(solution(0.0, x, n, "gaussian elimination")),
            None => brute_force(instance),
        },
        Family::Hopfield { patterns: 2, .. } => Ok(angle_sort(instance)),
        _ if instance.symmetric.is_some() && instance.path.n_qubits().is_none() => dicke_diagonal(instance),
        _ if instance.capabilities.diagonal_final => brute_force(instance),
        _ => lowest_eigenstate(instance),
    }
}

fn ring_traversal(instance: &ProblemInstance) -> Result<ClassicalSolution> {
    let n = instance.n;
    let mut x = 0usize;
    let mut bit = 0;
    for &(i, _, j) in &instance.data.couplings {
        if bit == 1 {
            x |= qubit_mask(i, n);
        }
        if j < 0.0 {
            bit ^= 1;
        }
    }
    if bit != 0 {
        return Err(Error::invalid("ring has an odd number of disagree clauses"));
    }
    Ok(solution(0.0, x, n, "ring traversal"))
}

/// Solves Σ_{q∈clause} x_q = b (mod 2) over GF(2); None when inconsistent.
pub fn gaussian_elimination(n: usize, clauses: &[([usize; 3], u8)]) -> Option<usize> {
    assert!(n <= 63);
    let mut rows: Vec<(u64, u8)> =
        clauses.iter().map(|(t, b)| (t.iter().fold(0u64, |acc, &q| acc ^ (1u64 << q)), *b)).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i].0 >> col & 1 == 1) else { continue };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i].0 >> col & 1 == 1 {
                rows[i].0 ^= rows[r].0;
                rows[i].1 ^= rows[r].1;
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| row.0 == 0 && row.1 == 1) {
        return None;
    }
    let mut x = 0usize;
    for (i, &col) in pivots.iter().enumerate() {
        if rows[i].1 == 1 {
            x |= qubit_mask(col, n);
        }
    }
    Some(x)
}

fn ising_energy(couplings: &[(usize, usize, f64)], spins: &[f64]) -> f64 {
    couplings.iter().map(|&(i, j, v)| v * spins[i] * spins[j]).sum()
}

/// Two-pattern Hopfield: the optimum has σ_i = sign(ξ_i · u) for some direction u, and the sign
/// pattern only changes where u crosses a line perpendicular to some ξ_i.
fn angle_sort(instance: &ProblemInstance) -> ClassicalSolution {
    let n = instance.n;
    let xi = &instance.data.patterns;
    let mut crit: Vec<f64> = (0..n)
        .flat_map(|i| {
            let a = xi[1][i].atan2(xi[0][i]);
            [a + std::f64::consts::FRAC_PI_2, a - std::f64::consts::FRAC_PI_2]
        })
        .map(|t| t.rem_euclid(std::f64::consts::TAU))
        .collect();
    crit.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..crit.len() {
        let next = if k + 1 < crit.len() { crit[k + 1] } else { crit[0] + std::f64::consts::TAU };
        let t = 0.5 * (crit[k] + next);
        let (ux, uy) = (t.cos(), t.sin());
        let spins: Vec<f64> = (0..n).map(|i| if xi[0][i] * ux + xi[1][i] * uy >= 0.0 { 1.0 } else { -1.0 }).collect();
        let e = ising_energy(&instance.data.couplings, &spins);
        if e < best.0 {
            let x = (0..n).filter(|&i| spins[i] < 0.0).map(|i| qubit_mask(i, n)).sum();
            best = (e, x);
        }
    }
    solution(best.0, best.1, n, "angle sort")
}

fn dicke_diagonal(instance: &ProblemInstance) -> Result<ClassicalSolution> {
    let h = instance.path.assemble(1.0)?;
    let d = h.nrows();
    let off = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| h[(i, j)].norm()).fold(0.0, f64::max);
    if off > 1e-12 {
        return lowest_eigenstate(instance);
    }
    let (w, e) = (0..d).map(|w| (w, h[(w, w)].re)).fold((0, f64::INFINITY), |acc, t| if t.1 < acc.1 { t } else { acc });
    let n = instance.n;
    let bits: String = (0..n).map(|q| if q < w { '1' } else { '0' }).collect();
    Ok(ClassicalSolution { energy: e, bits, index: w, method: "hamming weight scan" })
}

/// Diagonal of H(1) over all 2^n strings.
pub fn final_diagonal(instance: &ProblemInstance) -> Result<Vec<f64>> {
    let n = instance.path.n_qubits().ok_or_else(|| Error::Unsupported("diagonal of a reduced path".into()))?;
    if n > BRUTE_FORCE_MAX_QUBITS {
        return Err(Error::DimensionLimit { n, limit: BRUTE_FORCE_MAX_QUBITS });
    }
    let mut d = vec![0.0; 1 << n];
    for (f, op) in instance.path.components() {
        let w = f.value(1.0);
        if w == 0.0 {
            continue;
        }
        match op.as_ref() {
            Operator::Sum(o) if o.is_diagonal() => {
                for (x, v) in o.diagonal().into_iter().enumerate() {
                    d[x] += w * v;
                }
            }
            _ => return Err(Error::Unsupported("final Hamiltonian is not diagonal".into())),
        }
    }
    Ok(d)
}

fn brute_force(instance: &ProblemInstance) -> Result<ClassicalSolution> {
    let d = final_diagonal(instance)?;
    let (x, e) = d.iter().enumerate().fold((0, f64::INFINITY), |acc, (x, &v)| if v < acc.1 { (x, v) } else { acc });
    Ok(solution(e, x, instance.n, "brute force"))
}

fn lowest_eigenstate(instance: &ProblemInstance) -> Result<ClassicalSolution> {
    let pairs = eig_low(&instance.path, 1.0, 1, Method::Auto, &LanczosOptions::default())?;
    let (e, v) = &pairs[0];
    let x = v.iter().enumerate().fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc }).0;
    let width = instance.path.n_qubits().unwrap_or_else(|| (usize::BITS - (instance.path.dim() - 1).leading_zeros()) as usize);
    Ok(solution(*e, x, width.max(1), "diagonalization"))
}
