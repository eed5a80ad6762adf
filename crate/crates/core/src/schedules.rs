//! Annealing schedules A: [0,1] → [0,1] and quantum adiabatic brachistochrone (QAB) control paths.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, CMatrix};
use crate::operators::{Coeff, HamiltonianPath, OperatorSum};

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    Linear,
    LocalPower { p: f64 },
    RolandCerf { n_states: u64 },
    RegBeta { v: u32 },
    Qab { p: f64 },
}

/// Monotone reparametrization of the interpolation parameter.
#[derive(Clone, Debug)]
pub struct Schedule {
    kind: ScheduleKind,
    table: Option<Arc<Table>>,
    ln_beta: f64,
}

/// Cubic Hermite table with exact node derivatives.
#[derive(Debug)]
struct Table {
    s: Vec<f64>,
    a: Vec<f64>,
    da: Vec<f64>,
}

fn hermite(t: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let val = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1;
    let der = ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * h * d1) / h;
    (val, der)
}

fn locate(grid: &[f64], s: f64) -> usize {
    let i = grid.partition_point(|&g| g <= s);
    i.clamp(1, grid.len() - 1) - 1
}

impl Table {
    fn eval(&self, s: f64) -> (f64, f64) {
        let i = locate(&self.s, s);
        let h = self.s[i + 1] - self.s[i];
        hermite((s - self.s[i]) / h, h, self.a[i], self.a[i + 1], self.da[i], self.da[i + 1])
    }
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

impl Schedule {
    pub fn linear() -> Schedule {
        Schedule { kind: ScheduleKind::Linear, table: None, ln_beta: 0.0 }
    }

    /// Closed-form locally adiabatic Grover schedule for N items.
    pub fn roland_cerf(n_states: u64) -> Result<Schedule> {
        if n_states < 2 {
            return Err(Error::invalid("roland_cerf needs N >= 2"));
        }
        Ok(Schedule { kind: ScheduleKind::RolandCerf { n_states }, table: None, ln_beta: 0.0 })
    }

    /// Regularized incomplete beta schedule; the first V derivatives vanish at both ends.
    pub fn reg_beta(v: u32) -> Result<Schedule> {
        if v > 50 {
            return Err(Error::invalid("reg_beta order must be <= 50"));
        }
        let ln_beta = 2.0 * ln_factorial(v) - ln_factorial(2 * v + 1);
        Ok(Schedule { kind: ScheduleKind::RegBeta { v }, table: None, ln_beta })
    }

    /// Solve dA/ds = c·Δ(A)^p with A(0) = 0, A(1) = 1.
    pub fn local_power(gap: &dyn Fn(f64) -> f64, p: f64) -> Result<Schedule> {
        if !(p > 0.0) {
            return Err(Error::invalid("local_power exponent must be positive"));
        }
        let table = power_table(gap, p)?;
        let s = Schedule { kind: ScheduleKind::LocalPower { p }, table: Some(Arc::new(table)), ln_beta: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            ScheduleKind::Linear => s,
            ScheduleKind::RolandCerf { n_states } => {
                let r = ((*n_states - 1) as f64).sqrt();
                0.5 + ((2.0 * s - 1.0) * r.atan()).tan() / (2.0 * r)
            }
            ScheduleKind::RegBeta { v } => reg_beta_value(*v, s),
            ScheduleKind::LocalPower { .. } | ScheduleKind::Qab { .. } => {
                self.table.as_ref().expect("tabulated schedule").eval(s).0.clamp(0.0, 1.0)
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match &self.kind {
            ScheduleKind::Linear => 1.0,
            ScheduleKind::RolandCerf { n_states } => {
                let r = ((*n_states - 1) as f64).sqrt();
                let th = r.atan();
                let cs = ((2.0 * s - 1.0) * th).cos();
                th / (r * cs * cs)
            }
            ScheduleKind::RegBeta { v } => {
                let v = *v as i32;
                (s.powi(v) * (1.0 - s).powi(v)) / self.ln_beta.exp()
            }
            ScheduleKind::LocalPower { .. } | ScheduleKind::Qab { .. } => {
                self.table.as_ref().expect("tabulated schedule").eval(s).1
            }
        }
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match &self.kind {
            ScheduleKind::Linear => 0.0,
            ScheduleKind::RolandCerf { n_states } => {
                let r = ((*n_states - 1) as f64).sqrt();
                let th = r.atan();
                let u = (2.0 * s - 1.0) * th;
                4.0 * th * th * u.tan() / (r * u.cos().powi(2))
            }
            ScheduleKind::RegBeta { v } => {
                if *v == 0 {
                    return 0.0;
                }
                let v = *v as i32;
                v as f64 * s.powi(v - 1) * (1.0 - s).powi(v - 1) * (1.0 - 2.0 * s) / self.ln_beta.exp()
            }
            ScheduleKind::LocalPower { .. } | ScheduleKind::Qab { .. } => {
                let h = 1e-5;
                let lo = (s - h).max(0.0);
                let hi = (s + h).min(1.0);
                (self.derivative(hi) - self.derivative(lo)) / (hi - lo)
            }
        }
    }

    /// Boundary, monotonicity, and derivative-consistency checks on a 1001-point grid.
    pub fn validate(&self) -> Result<()> {
        if self.value(0.0) != 0.0 || self.value(1.0) != 1.0 {
            return Err(Error::invalid("schedule boundary values are not exact"));
        }
        let pts = 1001;
        let mut prev = 0.0;
        for i in 0..pts {
            let s = i as f64 / (pts - 1) as f64;
            let a = self.value(s);
            if a < prev {
                return Err(Error::invalid(format!("schedule decreases near s = {s}")));
            }
            prev = a;
        }
        let defect = self.derivative_defect(pts);
        if defect > 1e-5 {
            return Err(Error::invalid(format!("schedule derivative inconsistent: {defect:e}")));
        }
        Ok(())
    }

    /// Worst |A′ − centered difference| / (1 + |A′|) over interior grid points.
    pub fn derivative_defect(&self, pts: usize) -> f64 {
        let h = 1e-6;
        (1..pts - 1)
            .map(|i| {
                let s = i as f64 / (pts - 1) as f64;
                let fd = (self.value(s + h) - self.value(s - h)) / (2.0 * h);
                let d = self.derivative(s);
                (fd - d).abs() / (1.0 + d.abs())
            })
            .fold(0.0, f64::max)
    }

    /// CSV `s,A,Aprime` on a 1001-point grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,A,Aprime\n");
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            out.push_str(&format!("{},{},{}\n", crate::io::fmt_f64(s), crate::io::fmt_f64(self.value(s)), crate::io::fmt_f64(self.derivative(s))));
        }
        out
    }
}

/// Binomial tail form of the regularized incomplete beta I_s(V+1, V+1); all terms positive.
/// The upper half uses I_s = 1 − I_{1−s} so the summed tail stays small.
fn reg_beta_value(v: u32, s: f64) -> f64 {
    if s > 0.5 {
        return 1.0 - reg_beta_tail(v, 1.0 - s);
    }
    reg_beta_tail(v, s)
}

fn reg_beta_tail(v: u32, s: f64) -> f64 {
    let m = 2 * v + 1;
    let lf: Vec<f64> = (0..=m).map(ln_factorial).collect();
    let (ls, l1s) = (s.ln(), (1.0 - s).ln());
    let sum: f64 = (v + 1..=m)
        .map(|j| {
            let lc = lf[m as usize] - lf[j as usize] - lf[(m - j) as usize];
            (lc + j as f64 * ls + (m - j) as f64 * l1s).exp()
        })
        .sum();
    sum.clamp(0.0, 1.0)
}

/// Monomial coefficients of the reg_beta polynomial: A(s) = Σ_m c_m s^m.
pub fn reg_beta_coefficients(v: u32) -> Vec<f64> {
    let norm = (2.0 * ln_factorial(v) - ln_factorial(2 * v + 1)).exp();
    let mut c = vec![0.0; 2 * v as usize + 2];
    for k in 0..=v {
        let binom = (ln_factorial(v) - ln_factorial(k) - ln_factorial(v - k)).exp().round();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let m = (v + k + 1) as usize;
        c[m] = sign * binom / (m as f64 * norm);
    }
    c
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

const TABLE_INTERVALS: usize = 4000;

fn power_table(gap: &dyn Fn(f64) -> f64, p: f64) -> Result<Table> {
    let m = TABLE_INTERVALS;
    let mut bad = None;
    let mut weight = |u: f64| {
        let g = gap(u);
        if !(g > 1e-12) {
            bad = Some(u);
        }
        g.max(1e-300).powf(-p)
    };
    let u: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let w: Vec<f64> = u.iter().map(|&x| weight(x)).collect();
    if let Some(at) = bad {
        return Err(Error::VanishingGap { gap: gap(at), s: at });
    }
    let f = |x: f64| gap(x).max(1e-300).powf(-p);
    let mut cum = vec![0.0; m + 1];
    for i in 0..m {
        let (a, b) = (u[i], u[i + 1]);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (w[i] + 4.0 * fm + w[i + 1]);
        cum[i + 1] = cum[i] + adaptive_simpson(&f, a, b, w[i], fm, w[i + 1], whole, 1e-14 * whole.abs().max(1e-300), 30);
    }
    let total = cum[m];
    let s: Vec<f64> = cum.iter().map(|x| x / total).collect();
    let da: Vec<f64> = w.iter().map(|x| total / x).collect();
    let mut s = s;
    s[m] = 1.0;
    Ok(Table { s, a: u, da })
}

/// Solution of the geodesic equation: x⃗(s) sampled on a grid with velocities and accelerations.
#[derive(Clone)]
pub struct ControlTrajectory {
    s: Vec<f64>,
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    /// Sup-norm residual of the geodesic equation between grid nodes.
    pub residual: f64,
}

impl fmt::Debug for ControlTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlTrajectory")
            .field("nodes", &self.s.len())
            .field("controls", &self.x.first().map(|x| x.len()))
            .field("residual", &self.residual)
            .finish()
    }
}

impl ControlTrajectory {
    pub fn n_controls(&self) -> usize {
        self.x[0].len()
    }

    pub fn value(&self, s: f64) -> Vec<f64> {
        let s = s.clamp(0.0, 1.0);
        let i = locate(&self.s, s);
        let h = self.s[i + 1] - self.s[i];
        let t = (s - self.s[i]) / h;
        (0..self.n_controls())
            .map(|k| hermite(t, h, self.x[i][k], self.x[i + 1][k], self.v[i][k], self.v[i + 1][k]).0)
            .collect()
    }

    pub fn derivative(&self, s: f64) -> Vec<f64> {
        let s = s.clamp(0.0, 1.0);
        let i = locate(&self.s, s);
        let h = self.s[i + 1] - self.s[i];
        let t = (s - self.s[i]) / h;
        (0..self.n_controls())
            .map(|k| hermite(t, h, self.v[i][k], self.v[i + 1][k], self.a[i][k], self.a[i + 1][k]).0)
            .collect()
    }

    pub fn second_derivative(&self, s: f64) -> Vec<f64> {
        let s = s.clamp(0.0, 1.0);
        let i = locate(&self.s, s);
        let h = self.s[i + 1] - self.s[i];
        let t = (s - self.s[i]) / h;
        (0..self.n_controls())
            .map(|k| hermite(t, h, self.v[i][k], self.v[i + 1][k], self.a[i][k], self.a[i + 1][k]).1)
            .collect()
    }

    /// CSV `s,x1,...,xM` on a 1001-point grid.
    pub fn to_csv(&self) -> String {
        let m = self.n_controls();
        let mut out = String::from("s");
        for k in 0..m {
            out.push_str(&format!(",x{}", k + 1));
        }
        out.push('\n');
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            out.push_str(&crate::io::fmt_f64(s));
            for x in self.value(s) {
                out.push(',');
                out.push_str(&crate::io::fmt_f64(x));
            }
            out.push('\n');
        }
        out
    }
}

type GapFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// Control family H(x⃗) = B + Σ_i x_i H_i, whose QAB metric Tr(H_i H_j)/Δ^p is conformally flat.
#[derive(Clone)]
pub struct LinearControls {
    pub base: OperatorSum,
    pub ops: Vec<OperatorSum>,
    /// Gram matrix Tr(H_i H_j).
    pub gram: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    gap: GapFn,
}

impl fmt::Debug for LinearControls {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearControls").field("gram", &self.gram).field("start", &self.start).field("end", &self.end).finish()
    }
}

fn grover_projectors(n: usize, marked: usize) -> Result<(OperatorSum, OperatorSum)> {
    let mut pa = OperatorSum::new(n);
    pa.add_identity(1.0);
    pa.add_uniform(-1.0)?;
    let mut pb = OperatorSum::new(n);
    pb.add_identity(1.0);
    pb.add_projector(-1.0, marked, crate::operators::Basis::Z)?;
    Ok((pa, pb))
}

impl LinearControls {
    /// Generic family with the gap taken from dense diagonalization of H(x⃗).
    pub fn from_operators(base: OperatorSum, ops: Vec<OperatorSum>, start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        if ops.is_empty() || start.len() != ops.len() || end.len() != ops.len() {
            return Err(Error::invalid("control family needs matching operators and endpoints"));
        }
        let bm = base.to_matrix()?;
        let mats: Vec<CMatrix> = ops.iter().map(|o| o.to_matrix()).collect::<Result<_>>()?;
        let gram = mats.iter().map(|a| mats.iter().map(|b| (a * b).trace().re).collect()).collect();
        let gap: GapFn = Arc::new(move |x: &[f64]| {
            let mut h = bm.clone();
            for (m, &xi) in mats.iter().zip(x) {
                h += m * crate::linalg::c(xi);
            }
            let e = eigvalsh(&h);
            Ok(e[1] - e[0])
        });
        Ok(LinearControls { base, ops, gram, start, end, gap })
    }

    /// Family with an explicit Gram matrix and gap function (no operators attached).
    pub fn with_metric(n: usize, gram: Vec<Vec<f64>>, gap: GapFn, start: Vec<f64>, end: Vec<f64>) -> Self {
        let ops = vec![OperatorSum::new(n); gram.len()];
        LinearControls { base: OperatorSum::new(n), ops, gram, start, end, gap }
    }

    /// H(x) = (1 − x)P_a⊥ + x P_b⊥ with |a⟩ uniform and |b⟩ the marked state.
    pub fn grover_one(n: usize, marked: usize) -> Result<Self> {
        let (pa, pb) = grover_projectors(n, marked)?;
        let mut diff = pb.clone();
        diff.extend_scaled(&pa, -1.0)?;
        let nn = (1u64 << n) as f64;
        let a2 = 1.0 / nn;
        let gap: GapFn = Arc::new(move |x: &[f64]| Ok((1.0 - 4.0 * (1.0 - a2) * x[0] * (1.0 - x[0])).max(0.0).sqrt()));
        Ok(LinearControls { base: pa, ops: vec![diff], gram: vec![vec![2.0 * (1.0 - a2)]], start: vec![0.0], end: vec![1.0], gap })
    }

    /// H(x⃗) = x₁P_a⊥ + x₂P_b⊥ from (1,0) to (0,1).
    pub fn grover_two(n: usize, marked: usize) -> Result<Self> {
        let (pa, pb) = grover_projectors(n, marked)?;
        let nn = (1u64 << n) as f64;
        let a2 = 1.0 / nn;
        let gram = vec![vec![nn - 1.0, nn - 2.0 + a2], vec![nn - 2.0 + a2, nn - 1.0]];
        let gap: GapFn = Arc::new(move |x: &[f64]| {
            let t = x[0] + x[1];
            Ok((t * t - 4.0 * x[0] * x[1] * (1.0 - a2)).max(0.0).sqrt())
        });
        Ok(LinearControls { base: OperatorSum::new(n), ops: vec![pa, pb], gram, start: vec![1.0, 0.0], end: vec![0.0, 1.0], gap })
    }

    pub fn n_controls(&self) -> usize {
        self.ops.len()
    }

    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        (self.gap)(x)
    }

    /// Metric g_ij(x⃗) = Tr(H_i H_j)/Δ^p.
    pub fn metric(&self, x: &[f64], p: f64) -> Result<Vec<Vec<f64>>> {
        let d = self.gap(x)?;
        Ok(self.gram.iter().map(|row| row.iter().map(|g| g / d.powf(p)).collect()).collect())
    }

    /// Path driven by a control trajectory.
    pub fn path_for_trajectory(&self, traj: &Arc<ControlTrajectory>) -> Result<HamiltonianPath> {
        let mut p = HamiltonianPath::qubits(self.base.n_qubits());
        if !self.base.is_empty() {
            p.push_sum(Coeff::constant(1.0), self.base.clone())?;
        }
        for (i, op) in self.ops.iter().enumerate() {
            p.push_sum(Coeff::Control(traj.clone(), i), op.clone())?;
        }
        Ok(p)
    }

    /// Single-control path with x(s) = A(s).
    pub fn path_for_schedule(&self, schedule: &Schedule) -> Result<HamiltonianPath> {
        if self.n_controls() != 1 {
            return Err(Error::invalid("schedule paths need exactly one control"));
        }
        let mut p = HamiltonianPath::qubits(self.base.n_qubits());
        p.push_sum(Coeff::constant(1.0), self.base.clone())?;
        p.push_sum(Coeff::Composed(Box::new(Coeff::s()), schedule.clone()), self.ops[0].clone())?;
        Ok(p)
    }

    /// ∇ ln Δ by centered differences.
    fn grad_ln_gap(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = 1e-6;
        let mut g = vec![0.0; x.len()];
        let mut y = x.to_vec();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let up = self.gap(&y)?.ln();
            y[i] = x[i] - h;
            let dn = self.gap(&y)?.ln();
            y[i] = x[i];
            g[i] = (up - dn) / (2.0 * h);
        }
        Ok(g)
    }

    /// Geodesic acceleration −Γ(x)[v, v] for the conformal metric e^{2σ}G with σ = −(p/2) ln Δ.
    pub fn acceleration(&self, x: &[f64], v: &[f64], p: f64, ginv: &[Vec<f64>]) -> Result<Vec<f64>> {
        let gl = self.grad_ln_gap(x)?;
        let ds: Vec<f64> = gl.iter().map(|g| -0.5 * p * g).collect();
        let vdots: f64 = v.iter().zip(&ds).map(|(a, b)| a * b).sum();
        let m = v.len();
        let mut vgv = 0.0;
        for i in 0..m {
            for j in 0..m {
                vgv += v[i] * self.gram[i][j] * v[j];
            }
        }
        Ok((0..m)
            .map(|k| {
                let gs: f64 = (0..m).map(|l| ginv[k][l] * ds[l]).sum();
                -2.0 * vdots * v[k] + vgv * gs
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct QabOptions {
    /// Integration steps along the path.
    pub steps: usize,
    /// Endpoint miss tolerance relative to the control range.
    pub endpoint_tol: f64,
    /// Segments of the relaxed path that seeds the shooting.
    pub relax_segments: usize,
    /// Stages of continuation in p for the relaxation.
    pub continuation: usize,
}

impl Default for QabOptions {
    fn default() -> Self {
        QabOptions { steps: 4000, endpoint_tol: 1e-10, relax_segments: 200, continuation: 4 }
    }
}

#[derive(Clone, Debug)]
pub enum QabSolution {
    Schedule(Schedule),
    Controls(Arc<ControlTrajectory>),
}

fn invert(g: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = g.len();
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| g[i][j]);
    let inv = mat.try_inverse().ok_or_else(|| Error::invalid("singular Gram matrix"))?;
    Ok((0..m).map(|i| (0..m).map(|j| inv[(i, j)]).collect()).collect())
}

/// Geodesic of the QAB metric between the family's endpoints.
pub fn qab(family: &LinearControls, p: f64, opts: &QabOptions) -> Result<QabSolution> {
    if !(p > 0.0) {
        return Err(Error::invalid("qab exponent must be positive"));
    }
    match family.n_controls() {
        1 => {
            if family.start != [0.0] || family.end != [1.0] {
                return Err(Error::invalid("single-control qab expects x(0) = 0, x(1) = 1"));
            }
            // One-dimensional geodesics have constant metric speed: √g·x′ = const, so x′ ∝ Δ^{p/2}.
            let gap = |u: f64| family.gap(&[u]).unwrap_or(0.0);
            let table = power_table(&gap, p / 2.0)?;
            let sched = Schedule { kind: ScheduleKind::Qab { p }, table: Some(Arc::new(table)), ln_beta: 0.0 };
            sched.validate()?;
            Ok(QabSolution::Schedule(sched))
        }
        _ => Ok(QabSolution::Controls(Arc::new(multi_control_geodesic(family, p, opts)?))),
    }
}

/// Discrete path energy Σ_i w(m_i)·|x_{i+1} − x_i|²_G·N with w = Δ^{−p} at segment midpoints.
struct PathEnergy<'a> {
    family: &'a LinearControls,
    p: f64,
    segments: usize,
}

impl PathEnergy<'_> {
    fn weight(&self, x: &[f64]) -> Result<f64> {
        let d = self.family.gap(x)?;
        if !(d > 0.0) {
            return Err(Error::VanishingGap { gap: d, s: f64::NAN });
        }
        Ok(d.powf(-self.p))
    }

    fn gnorm2(&self, d: &[f64]) -> f64 {
        let g = &self.family.gram;
        let m = d.len();
        (0..m).map(|i| (0..m).map(|j| d[i] * g[i][j] * d[j]).sum::<f64>()).sum()
    }

    fn full(&self, inner: &[f64]) -> Vec<Vec<f64>> {
        let m = self.family.n_controls();
        let mut pts = vec![self.family.start.clone()];
        for k in 0..self.segments - 1 {
            pts.push(inner[k * m..(k + 1) * m].to_vec());
        }
        pts.push(self.family.end.clone());
        pts
    }

    fn energy(&self, inner: &[f64]) -> Result<f64> {
        let pts = self.full(inner);
        let mut e = 0.0;
        for w in pts.windows(2) {
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            e += self.weight(&mid)? * self.gnorm2(&d);
        }
        Ok(e * self.segments as f64)
    }

    fn gradient(&self, inner: &[f64]) -> Result<Vec<f64>> {
        let m = self.family.n_controls();
        let pts = self.full(inner);
        let nseg = self.segments as f64;
        let mut grad = vec![0.0; inner.len()];
        let h = 1e-7;
        for (i, w) in pts.windows(2).enumerate() {
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            let wm = self.weight(&mid)?;
            let n2 = self.gnorm2(&d);
            let mut gw = vec![0.0; m];
            let mut y = mid.clone();
            for c in 0..m {
                y[c] = mid[c] + h;
                let up = self.weight(&y)?;
                y[c] = mid[c] - h;
                let dn = self.weight(&y)?;
                y[c] = mid[c];
                gw[c] = (up - dn) / (2.0 * h);
            }
            for c in 0..m {
                let gd: f64 = (0..m).map(|j| self.family.gram[c][j] * d[j]).sum();
                let common = 0.5 * gw[c] * n2;
                // Node i is inner index i − 1; node i + 1 is inner index i.
                if i >= 1 {
                    grad[(i - 1) * m + c] += nseg * (common - 2.0 * wm * gd);
                }
                if i + 1 < self.segments {
                    grad[i * m + c] += nseg * (common + 2.0 * wm * gd);
                }
            }
        }
        Ok(grad)
    }

    /// Block-tridiagonal Hessian by colored finite differences of the gradient.
    fn hessian(&self, inner: &[f64], g0: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let m = self.family.n_controls();
        let nodes = self.segments - 1;
        let dim = nodes * m;
        let mut hess = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for color in 0..3 {
            for c in 0..m {
                let mut x = inner.to_vec();
                let mut hs = vec![0.0; nodes];
                for k in (color..nodes).step_by(3) {
                    hs[k] = 1e-6 * (1.0 + inner[k * m + c].abs());
                    x[k * m + c] += hs[k];
                }
                let g1 = self.gradient(&x)?;
                for k in (color..nodes).step_by(3) {
                    let col = k * m + c;
                    for kk in k.saturating_sub(1)..(k + 2).min(nodes) {
                        for cc in 0..m {
                            let row = kk * m + cc;
                            hess[(row, col)] = (g1[row] - g0[row]) / hs[k];
                        }
                    }
                }
            }
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        Ok(sym)
    }
}

/// Minimize the discrete energy by damped Newton; returns interior nodes.
fn relax_path(energy: &PathEnergy, mut inner: Vec<f64>) -> Result<Vec<f64>> {
    let mut e = energy.energy(&inner)?;
    for _ in 0..100 {
        let g = energy.gradient(&inner)?;
        let gn = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if gn < 1e-9 * (1.0 + e) {
            return Ok(inner);
        }
        let h = energy.hessian(&inner, &g)?;
        let rhs = nalgebra::DVector::from_iterator(g.len(), g.iter().map(|x| -x));
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => rhs.clone() * (1.0 / (1.0 + h.diagonal().amax())),
        };
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = inner.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Ok(et) = energy.energy(&trial) {
                if et <= e {
                    let done = (e - et).abs() <= 1e-15 * e;
                    inner = trial;
                    e = et;
                    if done {
                        return Ok(inner);
                    }
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Ok(inner);
            }
        }
    }
    Ok(inner)
}

fn rk4_step(family: &LinearControls, p: f64, ginv: &[Vec<f64>], x: &[f64], v: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = x.len();
    let add = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { (0..m).map(|i| a[i] + t * b[i]).collect() };
    let a1 = family.acceleration(x, v, p, ginv)?;
    let x2 = add(x, v, h / 2.0);
    let v2 = add(v, &a1, h / 2.0);
    let a2 = family.acceleration(&x2, &v2, p, ginv)?;
    let x3 = add(x, &v2, h / 2.0);
    let v3 = add(v, &a2, h / 2.0);
    let a3 = family.acceleration(&x3, &v3, p, ginv)?;
    let x4 = add(x, &v3, h);
    let v4 = add(v, &a3, h);
    let a4 = family.acceleration(&x4, &v4, p, ginv)?;
    let xn = (0..m).map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])).collect();
    let vn = (0..m).map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])).collect();
    Ok((xn, vn))
}

/// Integrate the geodesic equation from the start point; returns nodes (x, v).
fn integrate(family: &LinearControls, p: f64, ginv: &[Vec<f64>], v0: &[f64], steps: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let h = 1.0 / steps as f64;
    let mut xs = vec![family.start.clone()];
    let mut vs = vec![v0.to_vec()];
    for _ in 0..steps {
        let (xn, vn) = rk4_step(family, p, ginv, xs.last().unwrap(), vs.last().unwrap(), h)?;
        if xn.iter().chain(&vn).any(|z| !z.is_finite()) {
            return Err(Error::NoConvergence("geodesic integration diverged".into()));
        }
        xs.push(xn);
        vs.push(vn);
    }
    Ok((xs, vs))
}

/// Newton shooting on the initial velocity, started from a relaxed-path estimate.
fn shoot(family: &LinearControls, p: f64, ginv: &[Vec<f64>], mut v0: Vec<f64>, opts: &QabOptions) -> Result<Vec<f64>> {
    let m = v0.len();
    let miss = |v: &[f64]| -> Result<Vec<f64>> {
        let (xs, _) = integrate(family, p, ginv, v, opts.steps)?;
        Ok(xs.last().unwrap().iter().zip(&family.end).map(|(a, b)| a - b).collect())
    };
    let scale = family.end.iter().zip(&family.start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max).max(1e-300);
    let mut f = miss(&v0)?;
    for _ in 0..50 {
        let err = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if err <= opts.endpoint_tol * scale {
            return Ok(v0);
        }
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let h = 1e-7 * (1.0 + v0[j].abs());
            let mut vp = v0.clone();
            vp[j] += h;
            let fp = miss(&vp)?;
            for i in 0..m {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(m, f.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::NoConvergence("singular shooting Jacobian".into()))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v0.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Ok(ft) = miss(&trial) {
                if ft.iter().fold(0.0f64, |a, x| a.max(x.abs())) < err {
                    v0 = trial;
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-4 {
                return Err(Error::NoConvergence(format!("qab shooting stalled at miss {err:e}")));
            }
        }
    }
    Err(Error::NoConvergence("qab shooting did not converge".into()))
}

fn multi_control_geodesic(family: &LinearControls, p: f64, opts: &QabOptions) -> Result<ControlTrajectory> {
    let m = family.n_controls();
    let segments = opts.relax_segments.max(8);
    let mut inner: Vec<f64> = (1..segments)
        .flat_map(|k| {
            let t = k as f64 / segments as f64;
            (0..m).map(move |c| (1.0 - t) * family.start[c] + t * family.end[c])
        })
        .collect();
    let stages = opts.continuation.max(1);
    for st in 1..=stages {
        let pe = PathEnergy { family, p: p * st as f64 / stages as f64, segments };
        inner = relax_path(&pe, inner)?;
    }
    // Initial velocity from a one-sided second-order difference on the relaxed path.
    let h = 1.0 / segments as f64;
    let v0: Vec<f64> = (0..m).map(|c| (-3.0 * family.start[c] + 4.0 * inner[c] - inner[m + c]) / (2.0 * h)).collect();
    let ginv = invert(&family.gram)?;
    let v0 = shoot(family, p, &ginv, v0, opts)?;
    let (mut xs, vs) = integrate(family, p, &ginv, &v0, opts.steps)?;
    *xs.last_mut().unwrap() = family.end.clone();
    let accs = xs.iter().zip(&vs).map(|(x, v)| family.acceleration(x, v, p, &ginv)).collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = (0..=opts.steps).map(|i| i as f64 / opts.steps as f64).collect();
    let mut traj = ControlTrajectory { s, x: xs, v: vs, a: accs, residual: 0.0 };
    let mut worst: f64 = 0.0;
    for i in 0..opts.steps {
        let sm = (i as f64 + 0.5) / opts.steps as f64;
        let x = traj.value(sm);
        let v = traj.derivative(sm);
        let acc = traj.second_derivative(sm);
        let rhs = family.acceleration(&x, &v, p, &ginv)?;
        let scale = 1.0 + rhs.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        for k in 0..m {
            worst = worst.max((acc[k] - rhs[k]).abs() / scale);
        }
    }
    traj.residual = worst;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grover_gap(n_states: f64) -> impl Fn(f64) -> f64 {
        move |u: f64| (1.0 - 4.0 * (1.0 - 1.0 / n_states) * u * (1.0 - u)).sqrt()
    }

    #[test]
    fn linear_identity() {
        let a = Schedule::linear();
        assert_eq!(a.value(0.0), 0.0);
        assert_eq!(a.value(0.5), 0.5);
        assert_eq!(a.derivative(0.3), 1.0);
    }

    #[test]
    fn roland_cerf_values() {
        let a = Schedule::roland_cerf(4).unwrap();
        assert_eq!(a.value(0.0), 0.0);
        assert_eq!(a.value(1.0), 1.0);
        assert!((a.value(0.5) - 0.5).abs() < 1e-15);
        assert!((a.value(0.75) - 2.0 / 3.0).abs() < 1e-14);
        a.validate().unwrap();
        let h = 1e-5;
        let fd = (a.derivative(0.3 + h) - a.derivative(0.3 - h)) / (2.0 * h);
        assert!((fd - a.second_derivative(0.3)).abs() < 1e-6);
    }

    #[test]
    fn reg_beta_values() {
        let a = Schedule::reg_beta(0).unwrap();
        assert!((a.value(0.37) - 0.37).abs() < 1e-15);
        let b = Schedule::reg_beta(1).unwrap();
        assert!((b.value(0.25) - 0.15625).abs() < 1e-15);
        for v in [1, 2, 7, 50] {
            let s = Schedule::reg_beta(v).unwrap();
            assert!((s.value(0.5) - 0.5).abs() < 1e-12, "v = {v}");
            s.validate().unwrap();
        }
    }

    #[test]
    fn reg_beta_polynomial_derivatives_vanish() {
        // A′ ∝ q(x) = x^V(1−x)^V with integer coefficients, so A^{(v)} ∝ q^{(v−1)} is exact.
        for v in 1..=12u32 {
            let mut q = vec![0i128; 2 * v as usize + 1];
            for k in 0..=v as usize {
                let binom: i128 = (0..k).fold(1i128, |acc, i| acc * (v as i128 - i as i128) / (i as i128 + 1));
                q[v as usize + k] = if k % 2 == 0 { binom } else { -binom };
            }
            for order in 1..=v as usize {
                let d = order - 1;
                let deriv = |at_one: bool| -> i128 {
                    q.iter()
                        .enumerate()
                        .filter(|(m, _)| *m >= d)
                        .map(|(m, &qm)| {
                            let fall: i128 = ((m - d + 1)..=m).map(|k| k as i128).product();
                            if at_one || m == d { qm * fall } else { 0 }
                        })
                        .sum()
                };
                assert_eq!(deriv(false), 0, "v = {v}, order = {order} at 0");
                assert_eq!(deriv(true), 0, "v = {v}, order = {order} at 1");
            }
            let c = reg_beta_coefficients(v);
            let mag: f64 = c.iter().map(|x| x.abs()).sum();
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-14 * mag);
            assert!(c[..=v as usize].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn local_power_constant_gap_is_linear() {
        let a = Schedule::local_power(&|_| 1.0, 3.0).unwrap();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert!((a.value(s) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn local_power_matches_roland_cerf() {
        for n_states in [4u64, 16, 64] {
            let lp = Schedule::local_power(&grover_gap(n_states as f64), 2.0).unwrap();
            let rc = Schedule::roland_cerf(n_states).unwrap();
            let worst = (0..=1000).map(|i| i as f64 / 1000.0).map(|s| (lp.value(s) - rc.value(s)).abs()).fold(0.0, f64::max);
            assert!(worst <= 1e-6, "N = {n_states}: {worst:e}");
        }
        let lp = Schedule::local_power(&grover_gap(4.0), 2.0).unwrap();
        assert!((lp.value(0.75) - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn local_power_rejects_vanishing_gap() {
        let r = Schedule::local_power(&|u: f64| (u - 0.5).abs(), 2.0);
        assert!(matches!(r, Err(Error::VanishingGap { .. })));
    }

    #[test]
    fn qab_single_control_reproduces_closed_form() {
        let fam = LinearControls::grover_one(4, 3).unwrap();
        let QabSolution::Schedule(a) = qab(&fam, 4.0, &QabOptions::default()).unwrap() else { panic!("expected schedule") };
        let rc = Schedule::roland_cerf(16).unwrap();
        let worst = (0..=1000).map(|i| i as f64 / 1000.0).map(|s| (a.value(s) - rc.value(s)).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-5, "{worst:e}");
    }

    #[test]
    fn qab_constant_metric_is_straight() {
        let gap: GapFn = Arc::new(|_: &[f64]| Ok(1.0));
        let fam = LinearControls::with_metric(1, vec![vec![2.0, 0.5], vec![0.5, 1.0]], gap, vec![1.0, 0.0], vec![0.0, 1.0]);
        let QabSolution::Controls(t) = qab(&fam, 2.0, &QabOptions::default()).unwrap() else { panic!("expected controls") };
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let x = t.value(s);
            assert!((x[0] - (1.0 - s)).abs() < 1e-9 && (x[1] - s).abs() < 1e-9);
        }
    }

    #[test]
    fn qab_two_controls_leaves_the_line() {
        let fam = LinearControls::grover_two(4, 5).unwrap();
        let QabSolution::Controls(t) = qab(&fam, 4.0, &QabOptions::default()).unwrap() else { panic!("expected controls") };
        assert!(t.residual <= 1e-6, "residual {:e}", t.residual);
        let x = t.value(0.5);
        assert!((x[0] + x[1] - 1.0).abs() > 1e-3);
        let end = t.value(1.0);
        assert!(end[0].abs() < 1e-9 && (end[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_export_shape() {
        let csv = Schedule::linear().to_csv();
        assert_eq!(csv.lines().count(), 1002);
        assert!(csv.starts_with("s,A,Aprime\n"));
    }
}
