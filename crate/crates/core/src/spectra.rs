//! Low-lying spectra and gap profiles along a path.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, Csv};
use crate::linalg::{c, eigh, lowest_eigenpairs, CMatrix, CVector, LanczosOptions};
use crate::operators::{reduce_symmetric, HamiltonianPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Dense,
    Iterative,
    /// Dense up to `AUTO_DENSE_DIM`, iterative above.
    Auto,
}

pub const AUTO_DENSE_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sector {
    /// Permutation-symmetric (Dicke) sector.
    Permutation,
    /// +1 eigenspace of the global spin flip Π_i σ_i^x.
    SpinFlipEven,
}

/// Which gap is reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LevelSpec {
    /// E_j − E_0.
    ToLevel(usize),
    /// First level above the ground band, where the band is everything within τ·max(1, ‖H‖) of E_0.
    AboveDegeneracy(f64),
    /// E_1 − E_0 restricted to a symmetry sector.
    WithinSector(Sector),
}

impl LevelSpec {
    pub fn first() -> LevelSpec {
        LevelSpec::ToLevel(1)
    }

    pub fn above_degeneracy() -> LevelSpec {
        LevelSpec::AboveDegeneracy(1e-8)
    }

    fn validate(&self) -> Result<()> {
        match self {
            LevelSpec::ToLevel(0) => Err(Error::invalid("level index must be >= 1")),
            LevelSpec::AboveDegeneracy(t) if !(*t > 0.0) => Err(Error::invalid("degeneracy tolerance must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigOptions {
    pub method: Method,
    /// Levels computed per point (at least what the level spec needs).
    pub k: usize,
    pub lanczos: LanczosOptions,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { method: Method::Auto, k: 4, lanczos: LanczosOptions::default() }
    }
}

fn dense_low(m: &CMatrix, k: usize) -> Vec<(f64, CVector)> {
    let (vals, vecs) = eigh(m);
    (0..k.min(vals.len())).map(|j| (vals[j], vecs.column(j).into_owned())).collect()
}

/// Lowest k eigenpairs of H(s), ascending.
pub fn eig_low(path: &HamiltonianPath, s: f64, k: usize, method: Method, lanczos: &LanczosOptions) -> Result<Vec<(f64, CVector)>> {
    let dim = path.dim();
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("requested {k} levels of a {dim}-dimensional operator")));
    }
    let dense = match method {
        Method::Dense => true,
        Method::Iterative => false,
        Method::Auto => dim <= AUTO_DENSE_DIM || k * 4 >= dim,
    };
    let out = if dense {
        dense_low(&path.assemble(s)?, k)
    } else {
        lowest_eigenpairs(|v: &CVector| path.apply_vec(s, v), dim, k, lanczos)?
    };
    Ok(out)
}

/// Even spin-flip sector matrix on representatives with qubit 0 in |0⟩.
pub fn spin_flip_even_matrix(h: &CMatrix) -> CMatrix {
    let dim = h.nrows();
    let half = dim / 2;
    let all = dim - 1;
    CMatrix::from_fn(half, half, |a, b| {
        let (xa, xb) = (a, b);
        let (ya, yb) = (a ^ all, b ^ all);
        (h[(xa, xb)] + h[(xa, yb)] + h[(ya, xb)] + h[(ya, yb)]) * 0.5
    })
}

fn spin_flip_even_low(path: &HamiltonianPath, s: f64, k: usize, opts: &EigOptions) -> Result<Vec<f64>> {
    if path.n_qubits().is_none() {
        return Err(Error::invalid("spin-flip sector needs a qubit path"));
    }
    let dim = path.dim();
    let half = dim / 2;
    let dense = match opts.method {
        Method::Dense => true,
        Method::Iterative => false,
        Method::Auto => half <= AUTO_DENSE_DIM,
    };
    if dense {
        let m = spin_flip_even_matrix(&path.assemble(s)?);
        return Ok(dense_low(&m, k).into_iter().map(|p| p.0).collect());
    }
    let all = dim - 1;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let apply = |v: &CVector| {
        let mut full = CVector::zeros(dim);
        for a in 0..half {
            full[a] = v[a] * r;
            full[a ^ all] = v[a] * r;
        }
        let hv = path.apply_vec(s, &full);
        CVector::from_fn(half, |a, _| (hv[a] + hv[a ^ all]) * c(r))
    };
    Ok(lowest_eigenpairs(apply, half, k, &opts.lanczos)?.into_iter().map(|p| p.0).collect())
}

/// Energies at one s and the gap selected by `spec`.
fn point(path: &HamiltonianPath, reduced: Option<&HamiltonianPath>, s: f64, spec: LevelSpec, opts: &EigOptions) -> Result<(Vec<f64>, f64)> {
    let run = || -> Result<(Vec<f64>, f64)> {
        match spec {
            LevelSpec::ToLevel(j) => {
                let k = opts.k.max(j + 1).min(path.dim());
                let e: Vec<f64> = eig_low(path, s, k, opts.method, &opts.lanczos)?.into_iter().map(|p| p.0).collect();
                if j >= e.len() {
                    return Err(Error::invalid(format!("level {j} beyond dimension")));
                }
                let g = e[j] - e[0];
                Ok((e, g))
            }
            LevelSpec::AboveDegeneracy(tau) => {
                let scale = path.norm_bound().max(1.0);
                let mut k = opts.k.max(2).min(path.dim());
                loop {
                    let e: Vec<f64> = eig_low(path, s, k, opts.method, &opts.lanczos)?.into_iter().map(|p| p.0).collect();
                    if let Some(x) = e.iter().find(|&&x| x - e[0] > tau * scale) {
                        let g = x - e[0];
                        return Ok((e, g));
                    }
                    if k == path.dim() {
                        return Ok((e, 0.0));
                    }
                    k = (2 * k).min(path.dim());
                }
            }
            LevelSpec::WithinSector(Sector::Permutation) => {
                let r = reduced.expect("reduced path prepared");
                let k = opts.k.max(2).min(r.dim());
                let e: Vec<f64> = eig_low(r, s, k, Method::Dense, &opts.lanczos)?.into_iter().map(|p| p.0).collect();
                let g = e[1] - e[0];
                Ok((e, g))
            }
            LevelSpec::WithinSector(Sector::SpinFlipEven) => {
                let k = opts.k.max(2).min(path.dim() / 2);
                let e = spin_flip_even_low(path, s, k, opts)?;
                let g = e[1] - e[0];
                Ok((e, g))
            }
        }
    };
    run().map_err(|e| e.at(s))
}

/// Selected gap at a single s.
pub fn gap_at(path: &HamiltonianPath, s: f64, spec: LevelSpec, opts: &EigOptions) -> Result<f64> {
    spec.validate()?;
    let reduced = prepare(path, spec)?;
    Ok(point(path, reduced.as_ref(), s, spec, opts)?.1)
}

fn prepare(path: &HamiltonianPath, spec: LevelSpec) -> Result<Option<HamiltonianPath>> {
    Ok(match spec {
        LevelSpec::WithinSector(Sector::Permutation) => Some(reduce_symmetric(path)?.path),
        _ => None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapProfile {
    /// Uniform grid followed by any refinement points, sorted by s.
    pub grid: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
    pub gaps: Vec<f64>,
    pub min_gap: f64,
    pub s_min: f64,
    pub level_spec: LevelSpec,
    pub refined: bool,
    pub warning: Option<String>,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Uniform scan plus optional golden-section refinement of the minimum.
pub fn gap_profile(path: &HamiltonianPath, grid_size: usize, spec: LevelSpec, refine: bool, opts: &EigOptions) -> Result<GapProfile> {
    if grid_size < 3 {
        return Err(Error::invalid("grid_size must be >= 3"));
    }
    spec.validate()?;
    let reduced = prepare(path, spec)?;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
    let pts: Vec<(Vec<f64>, f64)> =
        grid.par_iter().map(|&s| point(path, reduced.as_ref(), s, spec, opts)).collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<(f64, Vec<f64>, f64)> = grid.iter().zip(pts).map(|(&s, (e, g))| (s, e, g)).collect();
    let imin = (0..rows.len()).min_by(|&a, &b| rows[a].2.total_cmp(&rows[b].2)).unwrap();
    let (mut s_min, mut min_gap) = (rows[imin].0, rows[imin].2);
    let mut warning = None;
    if refine {
        let mut lo = grid[imin.saturating_sub(1)];
        let mut hi = grid[(imin + 1).min(grid_size - 1)];
        let mut extra = Vec::new();
        let mut eval = |s: f64| -> Result<f64> {
            let (e, g) = point(path, reduced.as_ref(), s, spec, opts)?;
            extra.push((s, e, g));
            Ok(g)
        };
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        while hi - lo > 1e-9 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = eval(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = eval(x2)?;
            }
        }
        let (sb, fb) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fb <= min_gap {
            s_min = sb;
            min_gap = fb;
        } else {
            warning = Some("non-unimodal bracket; minimum taken from the grid".to_string());
        }
        rows.extend(extra);
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let grid = rows.iter().map(|r| r.0).collect();
    let gaps = rows.iter().map(|r| r.2).collect();
    let energies = rows.into_iter().map(|r| r.1).collect();
    Ok(GapProfile { grid, energies, gaps, min_gap, s_min, level_spec: spec, refined: refine, warning })
}

impl GapProfile {
    /// CSV `s,e0,...,e{k-1},gap`; rows with fewer levels are padded with empty cells.
    pub fn to_csv(&self) -> String {
        let k = self.energies.iter().map(|e| e.len()).max().unwrap_or(0);
        let mut header = vec!["s".to_string()];
        header.extend((0..k).map(|j| format!("e{j}")));
        header.push("gap".into());
        let mut csv = Csv::with_header(header);
        for ((s, e), g) in self.grid.iter().zip(&self.energies).zip(&self.gaps) {
            let mut cells = vec![fmt_f64(*s)];
            cells.extend((0..k).map(|j| e.get(j).map(|&x| fmt_f64(x)).unwrap_or_default()));
            cells.push(fmt_f64(*g));
            csv.row(&cells);
        }
        csv.into_string()
    }

    /// JSON summary of the minimum.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "min_gap": self.min_gap,
            "s_min": self.s_min,
            "level_spec": self.level_spec,
            "refined": self.refined,
            "points": self.grid.len(),
            "warning": self.warning,
        })
    }
}
