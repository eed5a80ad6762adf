//! Dense Hermitian helpers and Krylov routines shared by the spectral and dynamics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry of |M − M†|.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

fn sorted_pairs(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], CMatrix::zeros(0, 0));
    }
    if is_real(m) {
        let r = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let eig = r.symmetric_eigen();
        let order = sorted_pairs(eig.eigenvalues.as_slice());
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = CMatrix::from_fn(n, n, |i, j| c(eig.eigenvectors[(i, order[j])]));
        (values, vecs)
    } else {
        let h = CMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
        let eig = h.symmetric_eigen();
        let order = sorted_pairs(eig.eigenvalues.as_slice());
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vecs)
    }
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return vec![];
    }
    let mut v: Vec<f64> = if is_real(m) {
        let r = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        r.symmetric_eigenvalues().iter().copied().collect()
    } else {
        let h = CMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
        h.symmetric_eigenvalues().iter().copied().collect()
    };
    v.sort_by(f64::total_cmp);
    v
}

/// exp(−i t M) for Hermitian M.
pub fn expm_herm(m: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let ph = C64::from_polar(1.0, -t * vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    scaled * vecs.adjoint()
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if hermitian_defect(m) <= 1e-13 * (1.0 + m.norm()) {
        return eigvalsh(m).iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    }
    let g = m.adjoint() * m;
    eigvalsh(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

pub fn norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Deterministic pseudo-random unit vector.
pub fn random_unit(dim: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unit_rng(dim, &mut rng)
}

fn random_unit_rng(dim: usize, rng: &mut ChaCha8Rng) -> CVector {
    let mut v = CVector::from_fn(dim, |_, _| c(rng.gen::<f64>() - 0.5));
    let n = norm(&v);
    v /= c(n);
    v
}

fn project_out(v: &mut CVector, basis: &[CVector]) {
    for _ in 0..2 {
        for b in basis {
            let ov = inner(b, v);
            v.axpy(-ov, b, ONE);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { krylov_dim: 120, max_restarts: 200, tol: 1e-10, seed: 0x5eed }
    }
}

struct KrylovRun {
    basis: Vec<CVector>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    exhausted: bool,
}

fn lanczos_run<F>(apply: &F, v0: CVector, m: usize, locked: &[CVector]) -> KrylovRun
where
    F: Fn(&CVector) -> CVector,
{
    let mut basis = vec![v0];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut exhausted = false;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        project_out(&mut w, locked);
        project_out(&mut w, &basis);
        let b = norm(&w);
        if j + 1 == m {
            beta.push(b);
            break;
        }
        let scale = alpha.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
        if b <= 1e-12 * scale {
            beta.push(0.0);
            exhausted = true;
            break;
        }
        beta.push(b);
        w /= c(b);
        basis.push(w);
    }
    KrylovRun { basis, alpha, beta, exhausted }
}

fn tridiag_eigh(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let order = sorted_pairs(eig.eigenvalues.as_slice());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::<f64>::from_fn(m, m, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

fn ritz_vector(basis: &[CVector], y: &[f64]) -> CVector {
    let mut x = CVector::zeros(basis[0].len());
    for (b, &w) in basis.iter().zip(y) {
        x.axpy(c(w), b, ONE);
    }
    let n = norm(&x);
    x / c(n)
}

/// Lowest `k` eigenpairs of a Hermitian operator given as a matrix-vector product.
///
/// Lanczos with full reorthogonalization, locking of converged pairs and explicit restarts.
/// A final pass on the deflated operator confirms that no lower level was missed, which
/// recovers degenerate multiplicities.
pub fn lowest_eigenpairs<F>(apply: F, dim: usize, k: usize, opts: &LanczosOptions) -> Result<Vec<(f64, CVector)>>
where
    F: Fn(&CVector) -> CVector,
{
    if k > dim {
        return Err(Error::invalid(format!("k = {k} exceeds dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<(f64, CVector)> = Vec::new();
    let mut locked_vecs: Vec<CVector> = Vec::new();
    let mut start: Option<CVector> = None;
    let mut restarts = 0usize;
    let mut scale = 1.0_f64;

    loop {
        let avail = dim - locked.len();
        if avail == 0 || k == 0 {
            break;
        }
        let need = k.saturating_sub(locked.len());
        let mut v0 = match start.take() {
            Some(v) => v,
            None => random_unit_rng(dim, &mut rng),
        };
        project_out(&mut v0, &locked_vecs);
        let mut nv = norm(&v0);
        let mut tries = 0;
        while nv < 1e-8 && tries < 8 {
            v0 = random_unit_rng(dim, &mut rng);
            project_out(&mut v0, &locked_vecs);
            nv = norm(&v0);
            tries += 1;
        }
        v0 /= c(nv);

        let m = opts.krylov_dim.max(2 * k + 10).min(avail);
        let run = lanczos_run(&apply, v0, m, &locked_vecs);
        let (theta, y) = tridiag_eigh(&run.alpha, &run.beta);
        scale = theta.iter().fold(scale, |a, x| a.max(x.abs()));
        let tol = opts.tol * scale.max(1.0);
        let last = run.alpha.len() - 1;
        let exact = run.exhausted || run.basis.len() == avail;
        let residual = |i: usize| if exact { 0.0 } else { (run.beta[last] * y[(last, i)]).abs() };

        if need > 0 {
            let mut newly = 0;
            let mut first_unconverged = None;
            for i in 0..theta.len() {
                if newly == need {
                    break;
                }
                if residual(i) <= tol {
                    let col: Vec<f64> = y.column(i).iter().copied().collect();
                    let x = ritz_vector(&run.basis, &col);
                    locked.push((theta[i], x.clone()));
                    locked_vecs.push(x);
                    newly += 1;
                } else {
                    first_unconverged = Some(i);
                    break;
                }
            }
            if let Some(i) = first_unconverged {
                let upto = (i + need - newly).min(theta.len());
                let mut acc = vec![0.0; theta.len()];
                for j in i..upto {
                    for r in 0..theta.len() {
                        acc[r] += y[(r, j)];
                    }
                }
                start = Some(ritz_vector(&run.basis, &acc));
                if newly == 0 {
                    restarts += 1;
                    if restarts > opts.max_restarts {
                        return Err(Error::NoConvergence(format!(
                            "lanczos: {} of {k} pairs after {restarts} restarts",
                            locked.len()
                        )));
                    }
                }
            }
        } else {
            let mut ordered: Vec<f64> = locked.iter().map(|p| p.0).collect();
            ordered.sort_by(f64::total_cmp);
            let kth = ordered[k - 1];
            if residual(0) <= tol {
                if theta[0] < kth - tol {
                    let col: Vec<f64> = y.column(0).iter().copied().collect();
                    let x = ritz_vector(&run.basis, &col);
                    locked.push((theta[0], x.clone()));
                    locked_vecs.push(x);
                    continue;
                }
                break;
            }
            if theta[0] > kth + 10.0 * tol && exact {
                break;
            }
            let col: Vec<f64> = y.column(0).iter().copied().collect();
            start = Some(ritz_vector(&run.basis, &col));
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(Error::NoConvergence(format!("lanczos verification after {restarts} restarts")));
            }
        }
    }

    locked.sort_by(|a, b| a.0.total_cmp(&b.0));
    locked.truncate(k);
    // Rayleigh-Ritz on the locked subspace restores orthonormality within degenerate clusters.
    let vecs: Vec<CVector> = locked.iter().map(|p| p.1.clone()).collect();
    let kk = vecs.len();
    let q = orthonormalize(&vecs);
    let hq: Vec<CVector> = q.iter().map(&apply).collect();
    let small = CMatrix::from_fn(kk, kk, |i, j| inner(&q[i], &hq[j]));
    let (vals, u) = eigh(&small);
    let mut out = Vec::with_capacity(kk);
    for j in 0..kk {
        let mut x = CVector::zeros(dim);
        for i in 0..kk {
            x.axpy(u[(i, j)], &q[i], ONE);
        }
        let nx = norm(&x);
        out.push((vals[j], x / c(nx)));
    }
    Ok(out)
}

fn orthonormalize(vs: &[CVector]) -> Vec<CVector> {
    let mut q: Vec<CVector> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        project_out(&mut w, &q);
        let n = norm(&w);
        q.push(w / c(n));
    }
    q
}

/// exp(−i dt H) ψ by a Lanczos approximation of the propagator.
pub fn krylov_expm_apply<F>(apply: &F, psi: &CVector, dt: f64, tol: f64) -> CVector
where
    F: Fn(&CVector) -> CVector,
{
    const M_MAX: usize = 40;
    let b0 = norm(psi);
    if b0 == 0.0 {
        return psi.clone();
    }
    let dim = psi.len();
    let mut basis: Vec<CVector> = vec![psi / c(b0)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..M_MAX.min(dim) {
        let mut w = apply(&basis[j]);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        project_out(&mut w, &basis);
        let b = norm(&w);
        let m = alpha.len();
        let breakdown = b <= 1e-13 * (1.0 + a.abs()) || m == dim;
        if breakdown || (m >= 3 && m % 2 == 1) || m == M_MAX {
            let (theta, y) = tridiag_eigh(&alpha, &beta);
            let mut u = vec![ZERO; m];
            for (r, ur) in u.iter_mut().enumerate() {
                for l in 0..m {
                    *ur += C64::from_polar(1.0, -dt * theta[l]) * (y[(r, l)] * y[(0, l)]);
                }
            }
            let err = if breakdown { 0.0 } else { b * u[m - 1].norm() };
            if err <= tol {
                let mut out = CVector::zeros(dim);
                for (bv, &ur) in basis.iter().zip(&u) {
                    out.axpy(ur * b0, bv, ONE);
                }
                return out;
            }
            if m == M_MAX || breakdown {
                break;
            }
        }
        beta.push(b);
        basis.push(w / c(b));
    }
    let half = krylov_expm_apply(apply, psi, 0.5 * dt, 0.5 * tol);
    krylov_expm_apply(apply, &half, 0.5 * dt, 0.5 * tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        (&a + a.adjoint()) * c(0.5)
    }

    #[test]
    fn eigh_reconstructs() {
        let m = random_hermitian(12, 3);
        let (vals, vecs) = eigh(&m);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(12, vals.iter().map(|&x| c(x))));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - &m).norm() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn expm_is_unitary_and_matches_series() {
        let m = random_hermitian(6, 9);
        let u = expm_herm(&m, 0.3);
        let id = CMatrix::identity(6, 6);
        assert!((u.adjoint() * &u - &id).norm() < 1e-12);
        let mut series = id.clone();
        let mut term = id.clone();
        for k in 1..30 {
            term = &term * &m * (-I * c(0.3 / k as f64));
            series += &term;
        }
        assert!((u - series).norm() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_with_degeneracy() {
        let n = 40;
        let mut m = random_hermitian(n, 5);
        let (_, v) = eigh(&m);
        // Impose a doubly degenerate ground level.
        let vals: Vec<f64> = (0..n).map(|i| if i < 2 { -3.0 } else { i as f64 * 0.1 }).collect();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(n, vals.iter().map(|&x| c(x))));
        m = &v * d * v.adjoint();
        let pairs = lowest_eigenpairs(|x| &m * x, n, 4, &LanczosOptions { krylov_dim: 12, ..Default::default() }).unwrap();
        let dense = eigvalsh(&m);
        for (i, (val, vec)) in pairs.iter().enumerate() {
            assert!((val - dense[i]).abs() < 1e-9, "{i}: {val} vs {}", dense[i]);
            let r = &m * vec - vec * c(*val);
            assert!(norm(&r) < 1e-7);
        }
    }

    #[test]
    fn krylov_propagator_matches_dense() {
        let m = random_hermitian(30, 11);
        let psi = random_unit(30, 2);
        let exact = expm_herm(&m, 0.7) * &psi;
        let approx = krylov_expm_apply(&|x: &CVector| &m * x, &psi, 0.7, 1e-13);
        assert!(norm(&(exact - approx)) < 1e-11);
    }

    #[test]
    fn op_norm_of_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, c(2.0), ZERO, ZERO]);
        assert!((op_norm(&m) - 2.0).abs() < 1e-12);
    }
}
