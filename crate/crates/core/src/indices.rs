//! Kronecker and Hermite indices by ordered selection from the Kalman list.
//!
//! Both scans walk the vectors `A^j b_i` in a fixed order and keep the ones
//! that are linearly independent of everything kept so far. Independence is
//! decided by projecting onto an orthonormal basis of the kept vectors, never
//! by a pivoted factorization, because pivoting would reorder the list.
//!
//! Kronecker order is row-major over the list:
//! `b_1, …, b_m, Ab_1, …, Ab_m, A²b_1, …`.
//! Hermite order exhausts one column first:
//! `b_1, Ab_1, …, A^{n-1}b_1, b_2, …`.
//!
//! Once `A^j b_i` is rejected, the higher powers of that column are skipped:
//! they lie in the span of vectors already kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{CMat, CVec};
use crate::param_core::{check_tol, kalman_matrix, PairSamples, ParamGrid, SystemPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Kronecker,
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexVector {
    pub values: Vec<usize>,
    pub theta: f64,
    pub kind: IndexKind,
}

impl IndexVector {
    pub fn sum(&self) -> usize {
        self.values.iter().sum()
    }
}

/// One scanned vector `A^power b_column`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanStep {
    pub column: usize,
    pub power: usize,
    /// Norm of the part orthogonal to the kept vectors, divided by the
    /// vector's own norm (0 for a vector treated as zero).
    pub relative_residual: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexScan {
    pub indices: IndexVector,
    pub steps: Vec<ScanStep>,
}

/// Kronecker indices with the per-vector selection record.
pub fn kronecker_scan(a: &CMat, b: &CMat, tol: f64, theta: f64) -> Result<IndexScan> {
    scan(a, b, tol, theta, IndexKind::Kronecker)
}

/// Hermite indices with the per-vector selection record.
pub fn hermite_scan(a: &CMat, b: &CMat, tol: f64, theta: f64) -> Result<IndexScan> {
    scan(a, b, tol, theta, IndexKind::Hermite)
}

pub fn kronecker_indices(a: &CMat, b: &CMat, tol: f64) -> Result<IndexVector> {
    Ok(kronecker_scan(a, b, tol, f64::NAN)?.indices)
}

pub fn hermite_indices(a: &CMat, b: &CMat, tol: f64) -> Result<IndexVector> {
    Ok(hermite_scan(a, b, tol, f64::NAN)?.indices)
}

pub fn indices_of_kind(a: &CMat, b: &CMat, kind: IndexKind, tol: f64, theta: f64) -> Result<IndexVector> {
    Ok(scan(a, b, tol, theta, kind)?.indices)
}

/// Controllability indices: the Kronecker indices sorted in decreasing order.
pub fn controllability_indices(kappa: &IndexVector) -> Vec<usize> {
    let mut v = kappa.values.clone();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

fn scan(a: &CMat, b: &CMat, tol: f64, theta: f64, kind: IndexKind) -> Result<IndexScan> {
    check_tol(tol)?;
    let kal = kalman_matrix(a, b)?;
    let n = a.nrows();
    let m = b.ncols();
    // below this a vector is rounding noise of the list and counts as zero
    let scale = (0..n * m).map(|c| kal.column(c).norm()).fold(0.0, f64::max);
    let zero_floor = (n as f64) * f64::EPSILON * scale;

    let order: Vec<(usize, usize)> = match kind {
        IndexKind::Kronecker => (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).collect(),
        IndexKind::Hermite => (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
    };

    let mut basis: Vec<CVec> = Vec::with_capacity(n);
    let mut closed = vec![false; m];
    let mut counts = vec![0usize; m];
    let mut steps = Vec::new();

    for (i, j) in order {
        if closed[i] || basis.len() == n {
            continue;
        }
        let v: CVec = kal.column(j * m + i).into_owned();
        let norm = v.norm();
        let (selected, rel, resid) = if norm <= zero_floor {
            (false, 0.0, None)
        } else {
            let r = orthogonal_residual(&basis, &v);
            let rn = r.norm();
            let rel = rn / norm;
            (rel > tol, rel, Some((r, rn)))
        };
        steps.push(ScanStep {
            column: i,
            power: j,
            relative_residual: rel,
            selected,
        });
        if selected {
            let (r, rn) = resid.expect("computed for nonzero vectors");
            basis.push(r.unscale(rn));
            counts[i] += 1;
        } else {
            closed[i] = true;
        }
    }

    Ok(IndexScan {
        indices: IndexVector {
            values: counts,
            theta,
            kind,
        },
        steps,
    })
}

/// Component of `v` orthogonal to the orthonormal `basis`, with one
/// reorthogonalization pass.
fn orthogonal_residual(basis: &[CVec], v: &CVec) -> CVec {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(&r);
            r -= q * c;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstancyReport {
    pub kind: IndexKind,
    pub constant: bool,
    pub reference: IndexVector,
    pub first_mismatch: Option<IndexVector>,
    pub per_point: Vec<IndexVector>,
}

pub fn indices_over_grid(samples: &PairSamples, kind: IndexKind, tol: f64) -> Result<Vec<IndexVector>> {
    check_tol(tol)?;
    (0..samples.len())
        .into_par_iter()
        .map(|k| indices_of_kind(samples.a(k), samples.b(k), kind, tol, samples.theta(k)))
        .collect()
}

pub fn indices_constant_samples(
    samples: &PairSamples,
    kind: IndexKind,
    tol: f64,
) -> Result<ConstancyReport> {
    let per_point = indices_over_grid(samples, kind, tol)?;
    let reference = per_point[0].clone();
    let first_mismatch = per_point
        .iter()
        .find(|iv| iv.values != reference.values)
        .cloned();
    Ok(ConstancyReport {
        kind,
        constant: first_mismatch.is_none(),
        reference,
        first_mismatch,
        per_point,
    })
}

pub fn indices_constant(
    sys: &SystemPair,
    grid: &ParamGrid,
    kind: IndexKind,
    tol: f64,
) -> Result<ConstancyReport> {
    indices_constant_samples(&sys.sample(grid)?, kind, tol)
}
