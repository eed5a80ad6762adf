//! Spectral transformations: frustration-free gap amplification, Z₂ de-stoquastization and
//! stoquasticity checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, eigvalsh, hermitian_defect, CMatrix, C64, ONE};
use crate::operators::{Axis, OperatorSum, Term, DEFAULT_DENSE_LIMIT};

/// Largest n + L + 1 for dense validation of amplified operators.
pub const AMPLIFY_MAX_QUBITS: usize = 12;

/// a·Π on an ordered qubit subset, Π a projector.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorTerm {
    pub weight: f64,
    pub qubits: Vec<usize>,
    pub projector: CMatrix,
}

/// H = Σ_k a_k Π_k with a shared zero eigenvector.
#[derive(Clone, Debug)]
pub struct FrustrationFreeSpec {
    pub n: usize,
    pub terms: Vec<ProjectorTerm>,
    pub warnings: Vec<String>,
}

impl FrustrationFreeSpec {
    pub fn new(n: usize, terms: Vec<ProjectorTerm>) -> Result<FrustrationFreeSpec> {
        if n == 0 || terms.is_empty() {
            return Err(Error::invalid("frustration-free spec needs qubits and at least one term"));
        }
        let mut warnings = Vec::new();
        for (k, t) in terms.iter().enumerate() {
            let d = 1usize << t.qubits.len();
            if t.qubits.iter().any(|&q| q >= n) || t.projector.nrows() != d || t.projector.ncols() != d {
                return Err(Error::invalid(format!("term {k}: projector shape or qubits do not fit {n} qubits")));
            }
            let idem = (&t.projector * &t.projector - &t.projector).norm();
            if idem > 1e-10 || hermitian_defect(&t.projector) > 1e-10 {
                return Err(Error::invalid(format!("term {k} is not a projector (defect {idem:e})")));
            }
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::invalid(format!("term {k}: weight must be finite and nonnegative")));
            }
            if t.weight > 1.0 {
                warnings.push(format!("term {k}: weight {} exceeds 1", t.weight));
            }
        }
        let spec = FrustrationFreeSpec { n, terms, warnings };
        let e0 = spec.spectrum()?[0];
        if e0.abs() > 1e-9 {
            return Err(Error::invalid(format!("no common zero eigenvector: lowest eigenvalue {e0:e}")));
        }
        Ok(spec)
    }

    /// Number of terms L.
    pub fn l(&self) -> usize {
        self.terms.len()
    }

    pub fn hamiltonian(&self) -> Result<OperatorSum> {
        let mut op = OperatorSum::new(self.n);
        for t in &self.terms {
            if t.weight != 0.0 {
                op.add_block(&t.qubits, &t.projector * c(t.weight))?;
            }
        }
        Ok(op)
    }

    /// Eigenvalues λ_j of H, ascending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(eigvalsh(&self.hamiltonian()?.to_matrix_limited(DEFAULT_DENSE_LIMIT)?))
    }

    /// Smallest nonzero eigenvalue Δ.
    pub fn gap(&self) -> Result<f64> {
        self.spectrum()?
            .into_iter()
            .find(|&l| l > 1e-9)
            .ok_or_else(|| Error::invalid("frustration-free Hamiltonian has no nonzero eigenvalue"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Variant {
    /// Σ_k √a_k Π_k ⊗ (|k⟩⟨0| + |0⟩⟨k|) in unary encoding.
    Bar,
    /// L^{−1/d}[bar + (√Δ/4)(1 + σᶻ_0)] + (L − 1) − Σ_{k=0}^{L} σᶻ_k.
    Primed { d: f64 },
}

#[derive(Clone, Debug)]
pub struct Amplified {
    /// Operator on n + L + 1 qubits: system, then ancillas 0, 1, …, L.
    pub operator: OperatorSum,
    pub n: usize,
    pub l: usize,
    /// Δ used in the penalty (primed variant only).
    pub delta: Option<f64>,
    /// L^{−1/d} (primed variant only).
    pub prefactor: Option<f64>,
    pub warnings: Vec<String>,
}

impl Amplified {
    pub fn ancilla(&self, k: usize) -> usize {
        self.n + k
    }

    /// Basis index of |x⟩ ⊗ |unary k⟩.
    pub fn single_particle_index(&self, x: usize, k: usize) -> usize {
        (x << (self.l + 1)) | (1 << (self.l - k))
    }

    /// Spectrum restricted to one ancilla excitation, ascending.
    pub fn single_particle_spectrum(&self) -> Result<Vec<f64>> {
        let total = self.n + self.l + 1;
        if total > AMPLIFY_MAX_QUBITS {
            return Err(Error::DimensionLimit { n: total, limit: AMPLIFY_MAX_QUBITS });
        }
        let h = self.operator.to_matrix()?;
        let idx: Vec<usize> =
            (0..1usize << self.n).flat_map(|x| (0..=self.l).map(move |k| (x, k))).map(|(x, k)| self.single_particle_index(x, k)).collect();
        let m = idx.len();
        Ok(eigvalsh(&CMatrix::from_fn(m, m, |i, j| h[(idx[i], idx[j])])))
    }
}

/// Unary hopping |10⟩⟨01| + |01⟩⟨10| on (ancilla k, ancilla 0).
fn hop() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m
}

pub fn amplify_gap(spec: &FrustrationFreeSpec, variant: Variant) -> Result<Amplified> {
    let (n, l) = (spec.n, spec.l());
    let total = n + l + 1;
    let mut bar = OperatorSum::new(total);
    for (k, t) in spec.terms.iter().enumerate() {
        if t.weight == 0.0 {
            continue;
        }
        let mut qubits = t.qubits.clone();
        qubits.extend([n + k + 1, n]);
        bar.add_block(&qubits, crate::operators::kron(&(&t.projector * c(t.weight.sqrt())), &hop()))?;
    }
    let mut warnings = spec.warnings.clone();
    match variant {
        Variant::Bar => Ok(Amplified { operator: bar, n, l, delta: None, prefactor: None, warnings }),
        Variant::Primed { d } => {
            if !(d >= 1.0) {
                return Err(Error::invalid("d must be at least 1"));
            }
            if d < 2.0 {
                warnings.push(format!("d = {d} below 2: many-particle levels may mix with the single-particle sector"));
            }
            let delta = spec.gap()?;
            let pre = (l as f64).powf(-1.0 / d);
            let mut op = bar.scaled(pre);
            op.add_identity(pre * delta.sqrt() / 4.0);
            op.add_pauli(pre * delta.sqrt() / 4.0, &[(n, Axis::Z)])?;
            op.add_identity(l as f64 - 1.0);
            for k in 0..=l {
                op.add_pauli(-1.0, &[(n + k, Axis::Z)])?;
            }
            Ok(Amplified { operator: op, n, l, delta: Some(delta), prefactor: Some(pre), warnings })
        }
    }
}

/// {±√λ_j} together with the N(L − 1) zeros of the remaining single-particle states, ascending.
pub fn bar_expected_spectrum(spec: &FrustrationFreeSpec) -> Result<Vec<f64>> {
    let lam = spec.spectrum()?;
    let mut out: Vec<f64> = lam.iter().flat_map(|&x| {
        let r = x.max(0.0).sqrt();
        [r, -r]
    }).collect();
    out.extend(std::iter::repeat(0.0).take(lam.len() * (spec.l().saturating_sub(1))));
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimedReport {
    pub delta: f64,
    pub prefactor: f64,
    /// Eigenvalues with |E| ≤ tolerance.
    pub zero_modes: usize,
    /// |⟨ψ₀, 10…0| zero mode⟩|² summed over the zero space.
    pub zero_mode_weight: f64,
    /// Smallest |E| among the other eigenvalues.
    pub min_distance: f64,
    /// √Δ·L^{−1/d}.
    pub claimed_distance: f64,
    /// √Δ·L^{−1/d}/2, the distance of the penalized single-particle states outside the range of the
    /// hopping.
    pub exact_distance: f64,
}

/// Full-space diagonalization of the primed variant.
pub fn check_primed(spec: &FrustrationFreeSpec, d: f64) -> Result<PrimedReport> {
    let amp = amplify_gap(spec, Variant::Primed { d })?;
    let total = spec.n + spec.l() + 1;
    if total > AMPLIFY_MAX_QUBITS {
        return Err(Error::DimensionLimit { n: total, limit: AMPLIFY_MAX_QUBITS });
    }
    let (vals, vecs) = eigh(&amp.operator.to_matrix()?);
    let (vh, hv) = eigh(&spec.hamiltonian()?.to_matrix()?);
    let psi0 = hv.column(0);
    debug_assert!(vh[0].abs() < 1e-9);
    let tol = 1e-9;
    let mut zero_modes = 0;
    let mut zero_mode_weight = 0.0;
    let mut min_distance = f64::INFINITY;
    for (j, &e) in vals.iter().enumerate() {
        if e.abs() <= tol {
            zero_modes += 1;
            let w: C64 = (0..psi0.len()).map(|x| psi0[x].conj() * vecs[(amp.single_particle_index(x, 0), j)]).sum();
            zero_mode_weight += w.norm_sqr();
        } else {
            min_distance = min_distance.min(e.abs());
        }
    }
    let delta = amp.delta.expect("primed");
    let pre = amp.prefactor.expect("primed");
    Ok(PrimedReport {
        delta,
        prefactor: pre,
        zero_modes,
        zero_mode_weight,
        min_distance,
        claimed_distance: delta.sqrt() * pre,
        exact_distance: delta.sqrt() * pre / 2.0,
    })
}

enum XxzzKind {
    Identity,
    X,
    Z,
}

fn xxzz_kind(p: &crate::operators::PauliString) -> Result<XxzzKind> {
    let f = p.factors();
    if f.is_empty() {
        return Ok(XxzzKind::Identity);
    }
    if f.len() <= 2 && f.iter().all(|x| x.1 == Axis::X) {
        return Ok(XxzzKind::X);
    }
    if f.len() <= 2 && f.iter().all(|x| x.1 == Axis::Z) {
        return Ok(XxzzKind::Z);
    }
    Err(Error::Unsupported(format!("term with factors {f:?} is not X_i, Z_i, X_iX_j or Z_iZ_j")))
}

fn pauli_terms(h: &OperatorSum) -> Result<Vec<&crate::operators::PauliString>> {
    h.terms()
        .iter()
        .map(|t| match t {
            Term::Pauli(p) => Ok(p),
            other => Err(Error::Unsupported(format!("{} term in an XXZZ Hamiltonian", other.kind()))),
        })
        .collect()
}

/// H̃ = −Σ_k α_k T̃_k on n + 1 qubits (ancilla last), with H = −Σ_k α_k T_k, α_k > 0, and
/// T̃_k from the substitution 1 → 𝟙, −1 → X, 0 → 0 on the ancilla.
pub fn destoquasticize(h: &OperatorSum) -> Result<OperatorSum> {
    let n = h.n_qubits();
    let anc = n;
    let mut out = OperatorSum::new(n + 1);
    for p in pauli_terms(h)? {
        let alpha = p.coeff.abs();
        // T = −sign(h) P.
        let t_sign = -p.coeff.signum();
        match xxzz_kind(p)? {
            XxzzKind::Identity => out.add_identity(p.coeff),
            XxzzKind::X => {
                // Entries of T all equal t_sign.
                let mut f = p.factors().to_vec();
                if t_sign < 0.0 {
                    f.push((anc, Axis::X));
                }
                out.add_pauli(-alpha, &f)?;
            }
            XxzzKind::Z => {
                // T̃ = (1 + T)/2 ⊗ 𝟙 + (1 − T)/2 ⊗ X.
                let f = p.factors().to_vec();
                let mut fx = f.clone();
                fx.push((anc, Axis::X));
                out.add_identity(-alpha / 2.0);
                out.add_pauli(-alpha / 2.0 * t_sign, &f)?;
                out.add_pauli(-alpha / 2.0, &[(anc, Axis::X)])?;
                out.add_pauli(alpha / 2.0 * t_sign, &fx)?;
            }
        }
    }
    Ok(out)
}

/// H̄ = −Σ_k α_k |T_k|, the |+⟩-sector block of the de-stoquastized operator.
pub fn z2_bar(h: &OperatorSum) -> Result<OperatorSum> {
    let mut out = OperatorSum::new(h.n_qubits());
    for p in pauli_terms(h)? {
        match xxzz_kind(p)? {
            XxzzKind::Identity => out.add_identity(p.coeff),
            XxzzKind::X => out.add_pauli(-p.coeff.abs(), p.factors())?,
            XxzzKind::Z => out.add_identity(-p.coeff.abs()),
        }
    }
    Ok(out)
}

/// Spectra of the |−⟩ and |+⟩ ancilla sectors of an operator on n + 1 qubits (ancilla last).
pub fn z2_sector_spectra(ht: &OperatorSum) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = ht.to_matrix()?;
    let m = h.nrows() / 2;
    let block = |sign: f64| {
        let b = CMatrix::from_fn(m, m, |x, y| {
            (h[(2 * x, 2 * y)] + h[(2 * x + 1, 2 * y + 1)] + (h[(2 * x, 2 * y + 1)] + h[(2 * x + 1, 2 * y)]) * c(sign)) * c(0.5)
        });
        eigvalsh(&b)
    };
    Ok((block(-1.0), block(1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoquasticReport {
    pub stoquastic: bool,
    /// Largest real part among off-diagonal entries, or 0.
    pub max_positive_offdiagonal: f64,
    /// Largest imaginary magnitude among off-diagonal entries.
    pub max_imaginary_offdiagonal: f64,
}

/// Entrywise scan for real nonpositive off-diagonal elements in the computational basis.
pub fn check_stoquastic_matrix(h: &CMatrix) -> StoquasticReport {
    let mut pos = 0.0f64;
    let mut imag = 0.0f64;
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            if i != j {
                pos = pos.max(h[(i, j)].re);
                imag = imag.max(h[(i, j)].im.abs());
            }
        }
    }
    StoquasticReport { stoquastic: pos <= 1e-12 && imag <= 1e-12, max_positive_offdiagonal: pos, max_imaginary_offdiagonal: imag }
}

pub fn check_stoquastic(h: &OperatorSum) -> Result<StoquasticReport> {
    Ok(check_stoquastic_matrix(&h.to_matrix()?))
}

/// Random XXZZ Hamiltonian with coefficients uniform in [−1, 1].
pub fn random_xxzz(n: usize, seed: u64) -> Result<OperatorSum> {
    use rand::Rng as _;
    let mut rng = crate::rng::rng(seed);
    let mut h = OperatorSum::new(n);
    for i in 0..n {
        h.add_pauli(rng.gen_range(-1.0..1.0), &[(i, Axis::X)])?;
        h.add_pauli(rng.gen_range(-1.0..1.0), &[(i, Axis::Z)])?;
        for j in i + 1..n {
            h.add_pauli(rng.gen_range(-1.0..1.0), &[(i, Axis::X), (j, Axis::X)])?;
            h.add_pauli(rng.gen_range(-1.0..1.0), &[(i, Axis::Z), (j, Axis::Z)])?;
        }
    }
    Ok(h)
}
