//! Rigorous adiabatic-theorem sufficient conditions evaluated along a path.
//!
//! ‖P_{t_f}(1) − P(1)‖ ≤ (1/t_f)·[ m‖H′(0)‖/Δ²(0) + m‖H′(1)‖/Δ²(1)
//!                              + ∫₀¹ (m‖H″‖/Δ² + 7m^{3/2}‖H′‖²/Δ³) ds ].

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{adiabatic_error, evolve, EvolveOptions};
use crate::linalg::{eigh, lowest_eigenpairs, op_norm, CMatrix, CVector, LanczosOptions};
use crate::operators::{HamiltonianPath, StateVector};
use crate::schedules::{Schedule, ScheduleKind};
use crate::spectra::{eig_low, Method, AUTO_DENSE_DIM};

/// Ground-band multiplicity m(s).
#[derive(Clone)]
pub enum Multiplicity {
    Constant(usize),
    Function(Arc<dyn Fn(f64) -> usize + Send + Sync>),
}

impl Multiplicity {
    fn at(&self, s: f64) -> usize {
        match self {
            Multiplicity::Constant(m) => *m,
            Multiplicity::Function(f) => f(s),
        }
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Multiplicity::Constant(1)
    }
}

impl std::fmt::Debug for Multiplicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Multiplicity::Constant(m) => write!(f, "Constant({m})"),
            Multiplicity::Function(_) => write!(f, "Function"),
        }
    }
}

/// Gap and derivative norms at one s.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BoundSample {
    pub s: f64,
    pub m: usize,
    pub gap: f64,
    pub d1_norm: f64,
    pub d2_norm: f64,
}

impl BoundSample {
    fn integrand(&self) -> f64 {
        let m = self.m as f64;
        m * self.d2_norm / self.gap.powi(2) + 7.0 * m * m.sqrt() * self.d1_norm.powi(2) / self.gap.powi(3)
    }

    fn boundary(&self) -> f64 {
        self.m as f64 * self.d1_norm / self.gap.powi(2)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundReport {
    pub samples: Vec<BoundSample>,
    pub boundary_term_0: f64,
    pub boundary_term_1: f64,
    pub integral_term: f64,
    /// Integrand evaluations used by the quadrature.
    pub evaluations: usize,
}

impl BoundReport {
    /// t_f × (error bound): the sum of the three terms.
    pub fn total(&self) -> f64 {
        self.boundary_term_0 + self.boundary_term_1 + self.integral_term
    }

    pub fn jrs_error_bound(&self, t_f: f64) -> f64 {
        self.total() / t_f
    }

    /// Smallest t_f for which the bound is at most `target_error`.
    pub fn t_f_sufficient(&self, target_error: f64) -> f64 {
        self.total() / target_error
    }

    /// max{ max_s ‖H″‖/Δ², max_s ‖H′‖²/Δ³ } over the grid.
    pub fn max_condition(&self) -> f64 {
        self.samples
            .iter()
            .map(|b| (b.d2_norm / b.gap.powi(2)).max(b.d1_norm.powi(2) / b.gap.powi(3)))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "boundary_term_0": self.boundary_term_0,
            "boundary_term_1": self.boundary_term_1,
            "integral_term": self.integral_term,
            "max_condition": self.max_condition(),
            "grid": self.samples,
            "t_f_sufficient": {
                "0.1": self.t_f_sufficient(0.1),
                "0.01": self.t_f_sufficient(0.01),
            },
        })
    }
}

/// Operator norm of a Hermitian operator given by its action.
fn iterative_norm<F: Fn(&CVector) -> CVector>(apply: F, dim: usize) -> Result<f64> {
    let opts = LanczosOptions::default();
    let lo = lowest_eigenpairs(&apply, dim, 1, &opts)?[0].0;
    let hi = -lowest_eigenpairs(|v: &CVector| -apply(v), dim, 1, &opts)?[0].0;
    Ok(lo.abs().max(hi.abs()))
}

fn derivative_apply(path: &HamiltonianPath, s: f64, order: u8, v: &CVector) -> CVector {
    let mut out = CVector::zeros(v.len());
    for (f, op) in path.components() {
        let w = if order == 1 { f.d1(s) } else { f.d2(s) };
        if w != 0.0 {
            op.apply_add(v.as_slice(), out.as_mut_slice(), w);
        }
    }
    out
}

fn sample(path: &HamiltonianPath, s: f64, mult: &Multiplicity, scale: f64) -> Result<BoundSample> {
    let m = mult.at(s);
    let dim = path.dim();
    if m == 0 || m >= dim {
        return Err(Error::invalid(format!("ground multiplicity {m} outside 1..{dim}")));
    }
    let (gap, d1_norm, d2_norm) = if dim <= AUTO_DENSE_DIM {
        let e = eigh(&path.assemble(s)?).0;
        let d1: CMatrix = path.assemble_d1(s)?;
        let d2: CMatrix = path.assemble_d2(s)?;
        (e[m] - e[m - 1], op_norm(&d1), op_norm(&d2))
    } else {
        let e = eig_low(path, s, m + 1, Method::Iterative, &LanczosOptions::default())?;
        let d1 = iterative_norm(|v| derivative_apply(path, s, 1, v), dim)?;
        let d2 = if path.components().iter().all(|(f, _)| f.d2(s) == 0.0) {
            0.0
        } else {
            iterative_norm(|v| derivative_apply(path, s, 2, v), dim)?
        };
        (e[m].0 - e[m - 1].0, d1, d2)
    };
    if gap <= 1e-12 * scale {
        return Err(Error::VanishingGap { gap, s });
    }
    Ok(BoundSample { s, m, gap, d1_norm, d2_norm })
}

struct Quadrature<'a> {
    path: &'a HamiltonianPath,
    mult: &'a Multiplicity,
    scale: f64,
    evaluations: usize,
}

impl Quadrature<'_> {
    fn f(&mut self, s: f64) -> Result<f64> {
        self.evaluations += 1;
        Ok(sample(self.path, s, self.mult, self.scale).map_err(|e| e.at(s))?.integrand())
    }

    #[allow(clippy::too_many_arguments)]
    fn adaptive(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = self.f(lm)?;
        let frm = self.f(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.adaptive(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)? + self.adaptive(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
}

/// Evaluate the three terms of the bound on a uniform grid with adaptive refinement per cell.
pub fn jrs(path: &HamiltonianPath, grid_size: usize, mult: &Multiplicity) -> Result<BoundReport> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be >= 2"));
    }
    let scale = path.norm_bound().max(1.0);
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
    let samples: Vec<BoundSample> =
        grid.par_iter().map(|&s| sample(path, s, mult, scale).map_err(|e| e.at(s))).collect::<Result<_>>()?;
    let values: Vec<f64> = samples.iter().map(|b| b.integrand()).collect();
    let cells: Vec<(f64, usize)> = (0..grid_size - 1)
        .into_par_iter()
        .map(|i| {
            let mut q = Quadrature { path, mult, scale, evaluations: 0 };
            let (a, b) = (grid[i], grid[i + 1]);
            let fm = q.f(0.5 * (a + b))?;
            let whole = (b - a) / 6.0 * (values[i] + 4.0 * fm + values[i + 1]);
            let tol = 1e-9 * whole.abs().max(1e-12);
            let v = q.adaptive(a, b, values[i], fm, values[i + 1], whole, tol, 24)?;
            Ok((v, q.evaluations))
        })
        .collect::<Result<_>>()?;
    let integral_term = cells.iter().map(|c| c.0).sum();
    let evaluations = grid_size + cells.iter().map(|c| c.1).sum::<usize>();
    Ok(BoundReport {
        boundary_term_0: samples[0].boundary(),
        boundary_term_1: samples[grid_size - 1].boundary(),
        integral_term,
        evaluations,
        samples,
    })
}

#[derive(Clone, Debug)]
pub struct Sufficiency {
    pub report: BoundReport,
    /// t_f at which the bound equals the target error.
    pub t_f_sufficient: f64,
    /// Evolution time run: safety_factor × the t_f at which the bound equals 1.
    pub t_f_run: f64,
    pub measured_error: f64,
}

/// Bound the scheduled path, then evolve at safety_factor times the bound's time scale and measure the error.
pub fn sufficiency_check(
    path: &HamiltonianPath,
    schedule: &Schedule,
    psi0: &StateVector,
    target_error: f64,
    safety_factor: f64,
    grid_size: usize,
) -> Result<Sufficiency> {
    if !(target_error > 0.0) || !(safety_factor > 0.0) {
        return Err(Error::invalid("target error and safety factor must be positive"));
    }
    let scheduled = match schedule.kind() {
        ScheduleKind::Linear => path.clone(),
        _ => path.reparametrize(schedule),
    };
    let report = jrs(&scheduled, grid_size, &Multiplicity::default())?;
    let t_f_run = safety_factor * report.total();
    let result = evolve(path, schedule, t_f_run, psi0, &EvolveOptions::default())?;
    let measured_error = adiabatic_error(&result, path)?;
    Ok(Sufficiency { t_f_sufficient: report.t_f_sufficient(target_error), t_f_run, measured_error, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{uniform_state, Axis, Basis, OperatorSum};

    fn grover(n: usize) -> HamiltonianPath {
        let mut h0 = OperatorSum::new(n);
        h0.add_identity(1.0);
        h0.add_uniform(-1.0).unwrap();
        let mut h1 = OperatorSum::new(n);
        h1.add_identity(1.0);
        h1.add_projector(-1.0, 0, Basis::Z).unwrap();
        HamiltonianPath::interpolation(h0, h1).unwrap()
    }

    fn inv_cube_integral(n_states: f64) -> f64 {
        // Closed antiderivative of Δ^{-3} for Grover at s = 1.
        let s = 1.0;
        let big = n_states;
        big / 2.0 - big.powf(1.5) * (1.0 - 2.0 * s) / (2.0 * (big * (1.0 - 2.0 * s).powi(2) + 4.0 * (1.0 - s) * s).sqrt())
    }

    #[test]
    fn grover_terms() {
        let p = grover(4);
        let r = jrs(&p, 41, &Multiplicity::default()).unwrap();
        let d1 = (15.0f64).sqrt() / 4.0;
        assert!(r.samples.iter().all(|b| (b.d1_norm - d1).abs() < 1e-12 && b.d2_norm == 0.0));
        // integral_term = 7‖H′‖²∫Δ^{-3}.
        let integral = r.integral_term / (7.0 * d1 * d1);
        assert!((integral - inv_cube_integral(16.0)).abs() / 16.0 < 0.02);
        assert!((integral - 16.0).abs() < 1e-6);
        assert!((r.boundary_term_0 - d1).abs() < 1e-12);
        assert!(r.jrs_error_bound(10.0) > r.jrs_error_bound(20.0));
    }

    #[test]
    fn quadrature_converges_under_grid_doubling() {
        let p = grover(5);
        let a = jrs(&p, 11, &Multiplicity::default()).unwrap().integral_term;
        let b = jrs(&p, 21, &Multiplicity::default()).unwrap().integral_term;
        assert!((a - b).abs() / b <= 0.005);
    }

    #[test]
    fn derivative_norm_below_difference_norm() {
        let p = grover(3);
        let sched = Schedule::roland_cerf(8).unwrap();
        let r = jrs(&p.reparametrize(&sched), 21, &Multiplicity::default()).unwrap();
        let diff = op_norm(&(p.component_matrices().unwrap()[1].clone() - p.component_matrices().unwrap()[0].clone()));
        for b in &r.samples {
            assert!(b.d1_norm <= diff * sched.derivative(b.s) + 1e-9);
        }
        assert!(r.samples.iter().any(|b| b.d2_norm > 0.0));
    }

    #[test]
    fn vanishing_gap_is_reported() {
        let n = 1;
        let mut h0 = OperatorSum::new(n);
        h0.add_pauli(1.0, &[(0, Axis::Z)]).unwrap();
        let mut h1 = OperatorSum::new(n);
        h1.add_pauli(-1.0, &[(0, Axis::Z)]).unwrap();
        let p = HamiltonianPath::interpolation(h0, h1).unwrap();
        let err = jrs(&p, 11, &Multiplicity::default()).unwrap_err();
        assert!(matches!(err, Error::AtParameter { source, .. } if matches!(*source, Error::VanishingGap { .. })));
    }

    #[test]
    fn iterative_norms_match_dense() {
        let n = 10;
        let p = grover(n);
        let s = 0.3;
        let dense = op_norm(&p.assemble_d1(s).unwrap());
        let it = iterative_norm(|v| derivative_apply(&p, s, 1, v), p.dim()).unwrap();
        assert!((dense - it).abs() < 1e-8);
        let b = sample(&p, s, &Multiplicity::default(), 1.0).unwrap();
        assert!((b.d1_norm - (1.0 - 1.0 / 1024.0f64).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn grover_sufficiency() {
        let p = grover(3);
        let psi0 = StateVector::full(uniform_state(3)).unwrap();
        let r = sufficiency_check(&p, &Schedule::linear(), &psi0, 0.1, 1.0, 21).unwrap();
        assert!(r.measured_error <= 0.1);
        assert!(r.report.jrs_error_bound(r.t_f_run) >= r.measured_error);
    }
}
