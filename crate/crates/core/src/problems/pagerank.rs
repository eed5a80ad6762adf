//! Adiabatic PageRank: Google matrix, the Hamiltonians h(G) = (1 − G)ᵀ(1 − G), and the power-method baseline.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, CMatrix, CVector};
use crate::operators::{Axis, Coeff, HamiltonianPath, OperatorSum, StateVector};

pub const DEFAULT_ALPHA: f64 = 0.85;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

/// Directed graph with optional edge weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_self_loops: bool,
}

impl GraphSpec {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<GraphSpec> {
        let g = GraphSpec { n, edges, weights: None, allow_self_loops: false };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        for &(u, v) in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(Error::invalid(format!("edge ({u}, {v}) outside {} vertices", self.n)));
            }
            if u == v && !self.allow_self_loops {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.edges.len() {
                return Err(Error::invalid("one weight per edge required"));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid("edge weights must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Complete directed graph without self-loops.
    pub fn complete(n: usize) -> Result<GraphSpec> {
        GraphSpec::new(n, (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect())
    }

    /// Each new vertex links to `m` distinct earlier vertices chosen with probability ∝ in-degree + 1.
    pub fn preferential_attachment(n: usize, m: usize, seed: u64) -> Result<GraphSpec> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("preferential attachment needs n >= 1 and m >= 1"));
        }
        let mut rng = crate::rng::rng(seed);
        let mut indeg = vec![0usize; n];
        let mut edges = Vec::new();
        for v in 1..n {
            let mut targets: Vec<usize> = Vec::new();
            while targets.len() < m.min(v) {
                let total: usize = (0..v).filter(|u| !targets.contains(u)).map(|u| indeg[u] + 1).sum();
                let mut r = rng.gen_range(0..total);
                for u in (0..v).filter(|u| !targets.contains(u)) {
                    if r < indeg[u] + 1 {
                        targets.push(u);
                        break;
                    }
                    r -= indeg[u] + 1;
                }
            }
            for u in targets {
                indeg[u] += 1;
                edges.push((v, u));
            }
        }
        GraphSpec::new(n, edges)
    }

    /// Edge list: one `u v [w]` per line; `#` comments; an optional `vertices N` line fixes the count.
    pub fn parse_edge_list(text: &str) -> Result<GraphSpec> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "vertices" {
                n = Some(fields.get(1).and_then(|x| x.parse().ok()).ok_or_else(|| bad("expected `vertices N`"))?);
                continue;
            }
            if fields.len() < 2 || fields.len() > 3 {
                return Err(bad("expected `u v [w]`"));
            }
            let u: usize = fields[0].parse().map_err(|_| bad("bad source vertex"))?;
            let v: usize = fields[1].parse().map_err(|_| bad("bad target vertex"))?;
            let w: f64 = match fields.get(2) {
                Some(x) => x.parse().map_err(|_| bad("bad weight"))?,
                None => 1.0,
            };
            edges.push((u, v));
            weights.push(w);
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
        let weights = if weights.iter().all(|&w| w == 1.0) { None } else { Some(weights) };
        let g = GraphSpec { n, edges, weights, allow_self_loops: false };
        g.validate()?;
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("vertices {}\n", self.n);
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            match &self.weights {
                Some(w) => out.push_str(&format!("{u} {v} {}\n", crate::io::fmt_f64(w[k]))),
                None => out.push_str(&format!("{u} {v}\n")),
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<GraphSpec> {
        let g: GraphSpec = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    /// Row-stochastic transition matrix with dangling rows replaced by e/n.
    pub fn transition_matrix(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let n = self.n;
        let mut p = DMatrix::zeros(n, n);
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            p[(u, v)] += self.weights.as_ref().map_or(1.0, |w| w[k]);
        }
        for i in 0..n {
            let row_sum: f64 = p.row(i).sum();
            let has_edges = self.edges.iter().any(|e| e.0 == i);
            if !has_edges {
                p.row_mut(i).fill(1.0 / n as f64);
            } else if row_sum > 0.0 && row_sum.is_finite() {
                p.row_mut(i).scale_mut(1.0 / row_sum);
            } else {
                return Err(Error::invalid(format!("row {i} of the transition matrix cannot be normalized")));
            }
        }
        Ok(p)
    }
}

/// G = α P^T + (1 − α) v e^T (column-stochastic).
pub fn google_matrix(p: &DMatrix<f64>, alpha: f64, v: &DVector<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    p.transpose() * alpha + v * DVector::from_element(n, 1.0).transpose() * (1.0 - alpha)
}

/// h(G) = (1 − G)^T (1 − G).
pub fn pagerank_hamiltonian(g: &DMatrix<f64>) -> DMatrix<f64> {
    let m = DMatrix::identity(g.nrows(), g.ncols()) - g;
    m.transpose() * m
}

/// Power iteration p ← G p from e/n until the ℓ1 change is ≤ 1e-12.
pub fn power_method(g: &DMatrix<f64>) -> Result<(DVector<f64>, usize)> {
    let n = g.nrows();
    let mut p = DVector::from_element(n, 1.0 / n as f64);
    for it in 1..=POWER_MAX_ITER {
        let next = g * &p;
        let delta = (&next - &p).lp_norm(1);
        p = next;
        if delta <= POWER_TOL {
            let s = p.sum();
            return Ok((p / s, it));
        }
    }
    Err(Error::NoConvergence(format!("power method after {POWER_MAX_ITER} iterations")))
}

#[derive(Clone, Debug)]
pub struct PageRank {
    pub alpha: f64,
    pub google: DMatrix<f64>,
    pub h0: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    /// h(s) = (1 − s) h0 + s h1 on the n-dimensional single-excitation space.
    pub path: HamiltonianPath,
    /// Classical PageRank vector, entries summing to 1.
    pub classical: Vec<f64>,
    pub power_iterations: usize,
}

fn to_c(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

/// Builds G, h0 (complete graph), h1, the reduced path, and the power-method vector.
pub fn pagerank_pipeline(graph: &GraphSpec, alpha: f64, v: Option<&[f64]>) -> Result<PageRank> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let n = graph.n;
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    let v = match v {
        Some(v) => {
            if v.len() != n || v.iter().any(|x| !(*x >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("personalization vector must be a probability vector of length n"));
            }
            DVector::from_column_slice(v)
        }
        None => uniform.clone(),
    };
    let google = google_matrix(&graph.transition_matrix()?, alpha, &v);
    let complete = if n > 1 { GraphSpec::complete(n)?.transition_matrix()? } else { DMatrix::from_element(1, 1, 1.0) };
    let g_c = google_matrix(&complete, alpha, &uniform);
    let h0 = pagerank_hamiltonian(&g_c);
    let h1 = pagerank_hamiltonian(&google);
    let mut path = HamiltonianPath::reduced(n);
    path.push_matrix(Coeff::one_minus_s(), to_c(&h0))?;
    path.push_matrix(Coeff::s(), to_c(&h1))?;
    let (p, iters) = power_method(&google)?;
    Ok(PageRank { alpha, google, h0, h1, path, classical: p.iter().copied().collect(), power_iterations: iters })
}

impl PageRank {
    pub fn n(&self) -> usize {
        self.h0.nrows()
    }

    /// Uniform superposition, the ground state of h0.
    pub fn initial_state(&self) -> StateVector {
        let n = self.n();
        StateVector::reduced(CVector::from_element(n, c(1.0 / (n as f64).sqrt())))
    }

    /// Ground state of h1 (sign fixed to a positive sum).
    pub fn ground_state(&self) -> CVector {
        let (_, vecs) = eigh(&to_c(&self.h1));
        let mut g = vecs.column(0).into_owned();
        let sum: f64 = g.iter().map(|z| z.re).sum();
        if sum < 0.0 {
            g = -g;
        }
        g
    }

    /// |⟨π|p/‖p‖⟩| between the ground state of h1 and the power-method vector.
    pub fn ground_overlap(&self) -> f64 {
        let g = self.ground_state();
        let norm = self.classical.iter().map(|x| x * x).sum::<f64>().sqrt();
        g.iter().zip(&self.classical).map(|(z, p)| z * c(p / norm)).sum::<crate::linalg::C64>().norm()
    }

    /// n-qubit path (1 − s)E(h0) + s E(h1) with E(h) = Σ_i h_ii (1 − Z_i)/2 + Σ_{i<j} h_ij (X_i X_j + Y_i Y_j)/2.
    pub fn embedded_path(&self) -> Result<HamiltonianPath> {
        let mut path = HamiltonianPath::qubits(self.n());
        path.push_sum(Coeff::one_minus_s(), embed_excitations(&self.h0)?)?;
        path.push_sum(Coeff::s(), embed_excitations(&self.h1)?)?;
        Ok(path)
    }
}

/// Basis index of the single-excitation state on qubit i.
pub fn excitation_index(n: usize, i: usize) -> usize {
    crate::operators::qubit_mask(i, n)
}

fn embed_excitations(h: &DMatrix<f64>) -> Result<OperatorSum> {
    let n = h.nrows();
    let mut op = OperatorSum::new(n);
    for i in 0..n {
        op.add_identity(0.5 * h[(i, i)]);
        op.add_pauli(-0.5 * h[(i, i)], &[(i, Axis::Z)])?;
        for j in (i + 1)..n {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]) * 0.5;
            op.add_pauli(v, &[(i, Axis::X), (j, Axis::X)])?;
            op.add_pauli(v, &[(i, Axis::Y), (j, Axis::Y)])?;
        }
    }
    Ok(op)
}
