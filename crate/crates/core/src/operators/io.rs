//! Line-oriented text form of an operator sum.
//!
//! ```text
//! qubits 3
//! pauli 5.0000000000000000e-1 X0 Z2
//! projector -1.0000000000000000e0 z 101
//! uniform 2.5000000000000000e-1
//! weight 0 1 2 3
//! dense 0,2 <re im> × 16, row-major
//! ```
//! Blank lines and lines starting with `#` are ignored.

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{CMatrix, C64};
use crate::operators::{bits_of_index, index_of_bits, Axis, Basis, OperatorSum, Term};

pub fn to_text(op: &OperatorSum) -> String {
    let n = op.n_qubits();
    let mut out = format!("qubits {n}\n");
    for t in op.terms() {
        match t {
            Term::Pauli(p) => {
                out.push_str("pauli ");
                out.push_str(&fmt_f64(p.coeff));
                for &(q, a) in p.factors() {
                    out.push_str(&format!(" {}{q}", a.symbol()));
                }
            }
            Term::Projector { coeff, state, basis } => {
                let b = match basis {
                    Basis::Z => 'z',
                    Basis::X => 'x',
                };
                out.push_str(&format!("projector {} {b} {}", fmt_f64(*coeff), bits_of_index(*state, n)));
            }
            Term::Uniform { coeff } => out.push_str(&format!("uniform {}", fmt_f64(*coeff))),
            Term::Weight { values } => {
                out.push_str("weight");
                for v in values {
                    out.push(' ');
                    out.push_str(&fmt_f64(*v));
                }
            }
            Term::Dense { qubits, matrix } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                out.push_str(&format!("dense {}", qs.join(",")));
                for i in 0..matrix.nrows() {
                    for j in 0..matrix.ncols() {
                        let z = matrix[(i, j)];
                        out.push_str(&format!(" {} {}", fmt_f64(z.re), fmt_f64(z.im)));
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

fn num(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or(Error::Parse { line, msg: "missing number".into() })?;
    t.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("bad number {t:?}") })
}

pub fn from_text(text: &str) -> Result<OperatorSum> {
    let mut op: Option<OperatorSum> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut toks = l.split_whitespace();
        let kind = toks.next().unwrap_or_default();
        let perr = |msg: String| Error::Parse { line, msg };
        if kind == "qubits" {
            if op.is_some() {
                return Err(perr("repeated qubits header".into()));
            }
            let n: usize = toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| perr("bad qubit count".into()))?;
            if n == 0 {
                return Err(perr("qubit count must be positive".into()));
            }
            op = Some(OperatorSum::new(n));
            continue;
        }
        let o = op.as_mut().ok_or_else(|| perr("term before qubits header".into()))?;
        let n = o.n_qubits();
        let term = match kind {
            "pauli" => {
                let coeff = num(toks.next(), line)?;
                let mut factors = Vec::new();
                for t in toks {
                    let mut ch = t.chars();
                    let a = ch.next().and_then(Axis::from_symbol).ok_or_else(|| perr(format!("bad factor {t:?}")))?;
                    let q: usize = ch.as_str().parse().map_err(|_| perr(format!("bad factor {t:?}")))?;
                    factors.push((q, a));
                }
                Term::pauli(coeff, &factors).map_err(|e| perr(e.to_string()))?
            }
            "projector" => {
                let coeff = num(toks.next(), line)?;
                let basis = match toks.next() {
                    Some("z") | Some("Z") => Basis::Z,
                    Some("x") | Some("X") => Basis::X,
                    other => return Err(perr(format!("bad basis {other:?}"))),
                };
                let bits = toks.next().ok_or_else(|| perr("missing bit string".into()))?;
                if bits.len() != n {
                    return Err(perr(format!("bit string length {} for {n} qubits", bits.len())));
                }
                Term::Projector { coeff, state: index_of_bits(bits).map_err(|e| perr(e.to_string()))?, basis }
            }
            "uniform" => Term::Uniform { coeff: num(toks.next(), line)? },
            "weight" => Term::Weight { values: toks.map(|t| num(Some(t), line)).collect::<Result<_>>()? },
            "dense" => {
                let qs = toks.next().ok_or_else(|| perr("missing qubit list".into()))?;
                let qubits: Vec<usize> =
                    qs.split(',').map(|q| q.parse().map_err(|_| perr(format!("bad qubit {q:?}")))).collect::<Result<_>>()?;
                let vals: Vec<f64> = toks.map(|t| num(Some(t), line)).collect::<Result<_>>()?;
                let d = 1usize << qubits.len().min(8);
                if vals.len() != 2 * d * d {
                    return Err(perr(format!("dense block needs {} numbers, got {}", 2 * d * d, vals.len())));
                }
                let matrix = CMatrix::from_fn(d, d, |r, c| C64::new(vals[2 * (r * d + c)], vals[2 * (r * d + c) + 1]));
                Term::Dense { qubits, matrix }
            }
            other => return Err(perr(format!("unknown term kind {other:?}"))),
        };
        o.push(term).map_err(|e| match e {
            Error::NonHermitian(m) => Error::NonHermitian(format!("line {line}: {m}")),
            e => perr(e.to_string()),
        })?;
    }
    op.ok_or(Error::Parse { line: 0, msg: "missing qubits header".into() })
}
