//! Perturbative gadgets: 2-local Hamiltonians whose low spectrum reproduces a k-local target at order λ^k.
//!
//! Target qubits come first; the k ancillas of term s are qubits n + s·k, …, n + s·k + k − 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{log_log_fit, LinearFit};
use crate::io::{fmt_f64, Csv};
use crate::linalg::{c, eigh, eigvalsh, op_norm, CMatrix, CVector, C64, ZERO};
use crate::operators::{Axis, OperatorSum, Term};

/// Largest n + r·k for exact effective spectra.
pub const GADGET_MAX_QUBITS: usize = 12;
/// Largest register for the series expansion.
pub const SERIES_MAX_QUBITS: usize = 8;
pub const SERIES_MAX_ORDER: usize = 10;

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

/// c·(n̂₁·σ⃗)(n̂₂·σ⃗)…(n̂_k·σ⃗) on distinct target qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetTerm {
    pub coeff: f64,
    /// (qubit, unit direction (x, y, z)).
    pub factors: Vec<(usize, [f64; 3])>,
}

impl GadgetTerm {
    pub fn new(coeff: f64, factors: Vec<(usize, [f64; 3])>) -> Result<GadgetTerm> {
        if !coeff.is_finite() {
            return Err(Error::invalid("gadget coefficient not finite"));
        }
        for (q, d) in &factors {
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("direction on qubit {q} has norm {norm}")));
            }
        }
        let mut qs: Vec<usize> = factors.iter().map(|f| f.0).collect();
        qs.sort_unstable();
        if qs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("repeated qubit in gadget term"));
        }
        Ok(GadgetTerm { coeff, factors })
    }

    /// Pauli-product term.
    pub fn pauli(coeff: f64, factors: &[(usize, Axis)]) -> Result<GadgetTerm> {
        let dirs = factors
            .iter()
            .map(|&(q, a)| {
                let mut d = [0.0; 3];
                d[AXES.iter().position(|&b| b == a).expect("axis")] = 1.0;
                (q, d)
            })
            .collect();
        GadgetTerm::new(coeff, dirs)
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    /// Expansion of the product of direction sums into Pauli strings.
    fn add_to(&self, op: &mut OperatorSum, scale: f64) -> Result<()> {
        let k = self.k();
        for choice in 0..3usize.pow(k as u32) {
            let mut w = self.coeff * scale;
            let mut factors = Vec::with_capacity(k);
            let mut rest = choice;
            for (q, d) in &self.factors {
                let a = rest % 3;
                rest /= 3;
                w *= d[a];
                factors.push((*q, AXES[a]));
            }
            if w != 0.0 {
                op.add_pauli(w, &factors)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetSpec {
    pub n: usize,
    pub terms: Vec<GadgetTerm>,
    pub lambda: f64,
}

impl GadgetSpec {
    /// All terms share the same locality k ≥ 2; λ = 0 gives the bare ancilla penalty.
    pub fn new(n: usize, terms: Vec<GadgetTerm>, lambda: f64) -> Result<GadgetSpec> {
        if n == 0 || terms.is_empty() {
            return Err(Error::invalid("gadget needs target qubits and at least one term"));
        }
        let k = terms[0].k();
        if k < 2 || terms.iter().any(|t| t.k() != k) {
            return Err(Error::invalid("gadget terms must share a locality k ≥ 2"));
        }
        if terms.iter().flat_map(|t| &t.factors).any(|f| f.0 >= n) {
            return Err(Error::invalid(format!("gadget term acts outside {n} target qubits")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("λ must be finite and nonnegative"));
        }
        Ok(GadgetSpec { n, terms, lambda })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<GadgetSpec> {
        GadgetSpec::new(self.n, self.terms.clone(), lambda)
    }

    pub fn k(&self) -> usize {
        self.terms[0].k()
    }

    pub fn r(&self) -> usize {
        self.terms.len()
    }

    pub fn total_qubits(&self) -> usize {
        self.n + self.r() * self.k()
    }

    pub fn ancilla(&self, s: usize, j: usize) -> usize {
        self.n + s * self.k() + j
    }

    /// Gap γ = k − 1 of the ancilla penalty.
    pub fn gamma(&self) -> f64 {
        (self.k() - 1) as f64
    }

    /// Σ_s Σ_j |c_{s,j}| with c_{s,1} = c_s and the remaining couplings 1.
    pub fn v_norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs() + (t.k() - 1) as f64).sum()
    }

    /// λ below which ‖λV‖ < γ/4 is guaranteed.
    pub fn radius(&self) -> f64 {
        self.gamma() / (4.0 * self.v_norm_bound())
    }

    pub fn within_radius(&self) -> bool {
        self.lambda < self.radius()
    }

    /// H^T = Σ_s c_s H_s on the n target qubits.
    pub fn target(&self) -> Result<OperatorSum> {
        let mut op = OperatorSum::new(self.n);
        for t in &self.terms {
            t.add_to(&mut op, 1.0)?;
        }
        Ok(op)
    }

    /// −k(−λ)^k/(k−1)!, the leading-order factor multiplying the target.
    pub fn scale(&self) -> f64 {
        let k = self.k();
        let fact: f64 = (1..k).map(|i| i as f64).product();
        -(k as f64) * (-self.lambda).powi(k as i32) / fact
    }
}

#[derive(Clone, Debug)]
pub struct Gadget {
    pub spec: GadgetSpec,
    /// Σ_s H^A_s.
    pub ancilla: OperatorSum,
    /// Σ_s V_s.
    pub perturbation: OperatorSum,
    /// H^G = H^A + λV.
    pub hamiltonian: OperatorSum,
    pub warnings: Vec<String>,
}

/// H^G = Σ_s Σ_{i<j} ½(1 − Z_{s,i}Z_{s,j}) + λ Σ_s Σ_j c_{s,j} σ_{s,j} ⊗ X_{s,j}.
pub fn build_gadget(spec: &GadgetSpec) -> Result<Gadget> {
    let total = spec.total_qubits();
    let k = spec.k();
    let mut ancilla = OperatorSum::new(total);
    let mut perturbation = OperatorSum::new(total);
    for (s, term) in spec.terms.iter().enumerate() {
        for i in 0..k {
            for j in i + 1..k {
                ancilla.add_identity(0.5);
                ancilla.add_pauli(-0.5, &[(spec.ancilla(s, i), Axis::Z), (spec.ancilla(s, j), Axis::Z)])?;
            }
        }
        for (j, (q, d)) in term.factors.iter().enumerate() {
            let cj = if j == 0 { term.coeff } else { 1.0 };
            for (a, &w) in AXES.iter().zip(d) {
                if w != 0.0 {
                    perturbation.add_pauli(cj * w, &[(*q, *a), (spec.ancilla(s, j), Axis::X)])?;
                }
            }
        }
    }
    let mut hamiltonian = ancilla.clone();
    hamiltonian.extend_scaled(&perturbation, spec.lambda)?;
    let mut warnings = Vec::new();
    if !spec.within_radius() {
        warnings.push(format!("λ = {} outside the convergence radius {}", spec.lambda, spec.radius()));
    }
    Ok(Gadget { spec: spec.clone(), ancilla, perturbation, hamiltonian, warnings })
}

impl Gadget {
    /// max_s ‖[H^G, X_s]‖ bounded termwise: a Pauli string anticommutes with X_s when it has an odd
    /// number of Y or Z factors on register s.
    pub fn sector_commutator(&self) -> f64 {
        let k = self.spec.k();
        (0..self.spec.r())
            .map(|s| {
                let lo = self.spec.ancilla(s, 0);
                self.hamiltonian
                    .terms()
                    .iter()
                    .map(|t| match t {
                        Term::Pauli(p) => {
                            let odd = p.factors().iter().filter(|f| f.0 >= lo && f.0 < lo + k && f.1 != Axis::X).count() % 2;
                            2.0 * p.coeff.abs() * odd as f64
                        }
                        _ => f64::INFINITY,
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Orthonormal basis of the sector X_s = sector[s]; each vector as (index, amplitude) pairs.
    fn sector_basis(&self, sector: &[i8]) -> Vec<Vec<(usize, f64)>> {
        let (n, r, k) = (self.spec.n, self.spec.r(), self.spec.k());
        let half = 1usize << (k - 1);
        let all = (1usize << k) - 1;
        let amp = 0.5f64.powf(r as f64 / 2.0);
        let mut out = Vec::with_capacity((1 << n) * half.pow(r as u32));
        for x in 0..1usize << n {
            for code in 0..half.pow(r as u32) {
                let pats: Vec<usize> = (0..r).map(|s| (code / half.pow((r - 1 - s) as u32)) % half).collect();
                let mut comps = Vec::with_capacity(1 << r);
                for flips in 0..1usize << r {
                    let mut idx = x << (r * k);
                    let mut w = amp;
                    for (s, &p) in pats.iter().enumerate() {
                        let flipped = (flips >> (r - 1 - s)) & 1 == 1;
                        let reg = if flipped { p ^ all } else { p };
                        if flipped && sector[s] < 0 {
                            w = -w;
                        }
                        idx |= reg << (k * (r - 1 - s));
                    }
                    comps.push((idx, w));
                }
                out.push(comps);
            }
        }
        out
    }

    /// H^G restricted to the sector, with the orthonormal basis used.
    pub fn sector_matrix(&self, sector: &[i8]) -> Result<(CMatrix, Vec<Vec<(usize, f64)>>)> {
        let r = self.spec.r();
        if sector.len() != r {
            return Err(Error::DimensionMismatch { expected: r, got: sector.len() });
        }
        if sector.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::invalid("sector labels must be ±1"));
        }
        let total = self.spec.total_qubits();
        if total > GADGET_MAX_QUBITS {
            return Err(Error::DimensionLimit { n: total, limit: GADGET_MAX_QUBITS });
        }
        let basis = self.sector_basis(sector);
        let m = basis.len();
        let cols: Vec<Vec<C64>> = basis
            .par_iter()
            .map(|b| {
                let mut v = vec![ZERO; 1 << total];
                for &(i, w) in b {
                    v[i] = c(w);
                }
                let mut hv = vec![ZERO; 1 << total];
                self.hamiltonian.apply_add(&v, &mut hv, 1.0);
                basis.iter().map(|bi| bi.iter().map(|&(i, w)| hv[i] * w).sum()).collect()
            })
            .collect();
        let h = CMatrix::from_fn(m, m, |i, j| cols[j][i]);
        Ok(((&h + h.adjoint()) * c(0.5), basis))
    }
}

/// Lowest 2^n levels of a gadget in one X_s sector, compared with the rescaled target.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveSpectrum {
    pub lambda: f64,
    /// Lowest 2^n sector eigenvalues, ascending.
    pub levels: Vec<f64>,
    /// ⟨H^T⟩ in the eigenvector of each level.
    pub target_expectations: Vec<f64>,
    /// Target eigenvalues, ascending.
    pub target: Vec<f64>,
    /// −k(−λ)^k/(k−1)!.
    pub scale: f64,
    /// f(λ): mean offset between the levels and the scaled target.
    pub shift: f64,
    /// max_j |level_j − f − (scale·target)_j| with both lists sorted.
    pub error: f64,
    pub sector_commutator: f64,
}

impl EffectiveSpectrum {
    pub fn splitting(&self) -> f64 {
        self.levels.last().expect("nonempty") - self.levels[0]
    }

    /// (level − f)/scale; NaN when λ = 0.
    pub fn rescaled(&self) -> Vec<f64> {
        self.levels.iter().map(|e| (e - self.shift) / self.scale).collect()
    }

    /// Whether levels sorted by energy visit the target levels in the order implied by the sign of
    /// the scale. Each level is labelled by the target eigenvalue nearest its expectation.
    pub fn ordering_preserved(&self) -> bool {
        let mut distinct: Vec<f64> = Vec::new();
        for &t in &self.target {
            if distinct.last().map_or(true, |&d| t - d > 1e-9) {
                distinct.push(t);
            }
        }
        let label = |e: f64| {
            distinct.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &d)| if (d - e).abs() < acc.1 { (i, (d - e).abs()) } else { acc }).0
        };
        let labels: Vec<usize> = self.target_expectations.iter().map(|&e| label(e)).collect();
        if self.scale >= 0.0 {
            labels.windows(2).all(|w| w[0] <= w[1])
        } else {
            labels.windows(2).all(|w| w[0] >= w[1])
        }
    }
}

/// Exact effective spectrum: diagonalize H^G in the sector X_s = sector[s] and keep 2^n levels.
pub fn effective_hamiltonian(gadget: &Gadget, sector: &[i8]) -> Result<EffectiveSpectrum> {
    let spec = &gadget.spec;
    let (h, basis) = gadget.sector_matrix(sector)?;
    let (vals, vecs) = eigh(&h);
    let d = 1usize << spec.n;
    let levels = vals[..d].to_vec();

    let target_op = spec.target()?;
    let target = eigvalsh(&target_op.to_matrix()?);
    let total = spec.total_qubits();
    let anc_bits = total - spec.n;
    let target_diag_free = target_op.to_matrix()?;
    let target_expectations = (0..d)
        .map(|j| {
            // Full-space vector, then ⟨ψ| H^T ⊗ 1 |ψ⟩ by summing over ancilla configurations.
            let mut psi = vec![ZERO; 1 << total];
            for (b, comps) in basis.iter().enumerate() {
                for &(i, w) in comps {
                    psi[i] += vecs[(b, j)] * w;
                }
            }
            let mut e = 0.0;
            for a in 0..1usize << anc_bits {
                let sub = CVector::from_fn(d, |x, _| psi[(x << anc_bits) | a]);
                e += sub.dotc(&(&target_diag_free * &sub)).re;
            }
            e
        })
        .collect();

    let scale = spec.scale();
    let mut scaled: Vec<f64> = target.iter().map(|t| scale * t).collect();
    scaled.sort_by(f64::total_cmp);
    let shift = (levels.iter().sum::<f64>() - scaled.iter().sum::<f64>()) / d as f64;
    let error = levels.iter().zip(&scaled).map(|(e, t)| (e - shift - t).abs()).fold(0.0, f64::max);
    Ok(EffectiveSpectrum {
        lambda: spec.lambda,
        levels,
        target_expectations,
        target,
        scale,
        shift,
        error,
        sector_commutator: gadget.sector_commutator(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FitPoint {
    pub lambda: f64,
    pub error: f64,
    /// Slope of the fit over this and all smaller fitted λ.
    pub slope_running: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GadgetFit {
    pub k: usize,
    pub radius: f64,
    pub points: Vec<FitPoint>,
    /// λ values at or above the convergence radius, left out of the fit.
    pub excluded: Vec<f64>,
    /// ln error against ln λ.
    pub fit: LinearFit,
}

impl GadgetFit {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["lambda", "err", "slope_running"]);
        for p in &self.points {
            csv.row(&[fmt_f64(p.lambda), fmt_f64(p.error), p.slope_running.map(fmt_f64).unwrap_or_default()]);
        }
        csv.into_string()
    }
}

/// Error-order fit of the X_s = +1 effective spectrum over a λ sweep.
pub fn verify_gadget(spec: &GadgetSpec, lambdas: &[f64]) -> Result<GadgetFit> {
    let radius = spec.radius();
    let mut inside: Vec<f64> = lambdas.iter().copied().filter(|&l| l > 0.0 && l < radius).collect();
    inside.sort_by(f64::total_cmp);
    inside.dedup();
    let excluded: Vec<f64> = lambdas.iter().copied().filter(|&l| !(l > 0.0 && l < radius)).collect();
    if inside.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 λ values in (0, {radius}), got {}", inside.len())));
    }
    let plus = vec![1i8; spec.r()];
    let errors: Vec<f64> = inside
        .par_iter()
        .map(|&l| -> Result<f64> { Ok(effective_hamiltonian(&build_gadget(&spec.with_lambda(l)?)?, &plus)?.error) })
        .collect::<Result<_>>()?;
    if errors.iter().all(|&e| e < 1e-13) {
        return Err(Error::invalid("all gadget errors at the numeric floor; fit is degenerate"));
    }
    let points = (0..inside.len())
        .map(|i| FitPoint {
            lambda: inside[i],
            error: errors[i],
            slope_running: if i >= 1 { log_log_fit(&inside[..=i], &errors[..=i]).ok().map(|f| f.slope) } else { None },
        })
        .collect();
    let fit = log_log_fit(&inside, &errors)?;
    Ok(GadgetFit { k: spec.k(), radius, points, excluded, fit })
}

/// Truncated Bloch series A = Σ_{m ≤ order} A_m for H0 + λV.
#[derive(Clone, Debug)]
pub struct SeriesA {
    pub matrix: CMatrix,
    /// Projector onto the ground space of H0.
    pub p0: CMatrix,
    pub ground_energy: f64,
    pub gamma: f64,
    /// Eigenvalues of A on the range of P0, shifted back by the ground energy of H0, ascending.
    pub levels: Vec<f64>,
}

/// Sequences (ℓ_1, …, ℓ_m) with ℓ_1 ≥ 1, Σℓ = m and ℓ_1 + … + ℓ_p ≥ p for p < m.
fn compositions(m: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, prefix: &mut Vec<usize>, sum: usize, out: &mut Vec<Vec<usize>>) {
        let p = prefix.len();
        if p == m {
            if sum == m {
                out.push(prefix.clone());
            }
            return;
        }
        let lo = if p == 0 { 1 } else { 0 };
        for l in lo..=m - sum {
            if p + 1 < m && sum + l < p + 1 {
                continue;
            }
            prefix.push(l);
            rec(m, prefix, sum + l, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, &mut Vec::new(), 0, &mut out);
    out
}

/// A_1 = λP₀VP₀ and A_{m+1} = λP₀V·U_m, where U_m sums (S_{ℓ₁}λV)…(S_{ℓ_m}λV)P₀ over the
/// admissible compositions and S_ℓ = (−H₀)^{−ℓ}(1 − P₀), S_0 = −P₀, with H₀ shifted to ground energy 0.
pub fn series_a(h0: &OperatorSum, v: &OperatorSum, lambda: f64, order: usize) -> Result<SeriesA> {
    if h0.n_qubits() != v.n_qubits() {
        return Err(Error::DimensionMismatch { expected: h0.n_qubits(), got: v.n_qubits() });
    }
    if h0.n_qubits() > SERIES_MAX_QUBITS {
        return Err(Error::DimensionLimit { n: h0.n_qubits(), limit: SERIES_MAX_QUBITS });
    }
    if order == 0 || order > SERIES_MAX_ORDER {
        return Err(Error::invalid(format!("series order must lie in 1..={SERIES_MAX_ORDER}")));
    }
    let (vals, vecs) = eigh(&h0.to_matrix()?);
    let e0 = vals[0];
    let tol = 1e-9 * (1.0 + vals.last().expect("nonempty").abs());
    let d = vals.iter().take_while(|&&e| e - e0 <= tol).count();
    let gamma = vals.get(d).map(|e| e - e0).ok_or_else(|| Error::invalid("H0 has no excited level"))?;
    let vm = v.to_matrix()?;
    let lv = lambda.abs() * op_norm(&vm);
    if lv >= gamma / 4.0 {
        return Err(Error::invalid(format!("‖λV‖ = {lv} not below γ/4 = {}", gamma / 4.0)));
    }
    let dim = vals.len();
    let ground = vecs.columns(0, d).into_owned();
    let p0 = &ground * ground.adjoint();
    let s_op = |l: usize| -> CMatrix {
        if l == 0 {
            return -&p0;
        }
        let mut m = CMatrix::zeros(dim, dim);
        for j in d..dim {
            let w = (-(vals[j] - e0)).powi(-(l as i32));
            let col = vecs.column(j);
            m += col * col.adjoint() * c(w);
        }
        m
    };
    let s_cache: Vec<CMatrix> = (0..order).map(s_op).collect();
    let lvm = &vm * c(lambda);
    let mut a = &p0 * &lvm * &p0;
    for m in 1..order {
        let mut u = CMatrix::zeros(dim, dim);
        for comp in compositions(m) {
            let mut prod = p0.clone();
            for &l in comp.iter().rev() {
                prod = &s_cache[l] * (&lvm * prod);
            }
            u += prod;
        }
        a += &p0 * &lvm * u;
    }
    let reduced = ground.adjoint() * &a * &ground;
    let eig = reduced
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::NoConvergence("Schur decomposition of A".into()))?;
    let mut levels: Vec<f64> = eig.iter().map(|z| z.re + e0).collect();
    levels.sort_by(f64::total_cmp);
    Ok(SeriesA { matrix: a, p0, ground_energy: e0, gamma, levels })
}
