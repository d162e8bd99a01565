//! Parameter intervals, polynomial-entry matrices, sampling grids and the
//! Kalman reachability matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default number of equispaced grid points.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Compact real parameter interval `[lo, hi]` with its affine
/// parameterization by `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamArc {
    lo: f64,
    hi: f64,
}

impl ParamArc {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "parameter interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                theta,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Inverse of the parameterization: maps `lo` to exactly 0 and `hi` to exactly 1.
    pub fn to_unit(&self, theta: f64) -> f64 {
        (theta - self.lo) / (self.hi - self.lo)
    }

    /// The parameterization `[0, 1] -> [lo, hi]`, exact at both ends.
    pub fn from_unit(&self, t: f64) -> f64 {
        if t == 1.0 {
            self.hi
        } else {
            self.lo + t * (self.hi - self.lo)
        }
    }
}

/// Polynomial in θ with complex coefficients, ascending degree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyScalar {
    coeffs: Vec<C64>,
}

impl PolyScalar {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| linalg::re(c)).collect(),
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// True when every coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != ZERO)
            .unwrap_or(0)
    }

    /// Horner evaluation, highest coefficient first.
    pub fn eval(&self, theta: f64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, &c| acc * theta + c)
    }

    pub fn derivative(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(ZERO)
                    + other.coeffs.get(k).copied().unwrap_or(ZERO)
            })
            .collect();
        Self { coeffs }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let mut coeffs = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self { coeffs }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }
}

/// Matrix whose entries are polynomials in θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<PolyScalar>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![PolyScalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, PolyScalar::constant(linalg::ONE));
        }
        m
    }

    /// Row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<PolyScalar>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} polynomial entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Constant matrix lifted to degree-zero polynomials.
    pub fn constant(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != ZERO {
                    out.set(i, j, PolyScalar::constant(m[(i, j)]));
                }
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &PolyScalar {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: PolyScalar) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn eval(&self, theta: f64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(theta))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = PolyScalar::zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }
}

/// Parameter-dependent pair `(A(θ), B(θ))` on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPair {
    a: PolyMatrix,
    b: PolyMatrix,
    arc: ParamArc,
}

impl SystemPair {
    pub fn new(a: PolyMatrix, b: PolyMatrix, arc: ParamArc) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, arc })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn arc(&self) -> ParamArc {
        self.arc
    }

    pub fn a(&self) -> &PolyMatrix {
        &self.a
    }

    pub fn b(&self) -> &PolyMatrix {
        &self.b
    }

    /// `(A(θ), B(θ))` by entrywise polynomial evaluation.
    pub fn eval(&self, theta: f64) -> Result<(CMat, CMat)> {
        self.arc.check(theta)?;
        Ok((self.a.eval(theta), self.b.eval(theta)))
    }

    pub fn sample(&self, grid: &ParamGrid) -> Result<PairSamples> {
        let mut a = Vec::with_capacity(grid.len());
        let mut b = Vec::with_capacity(grid.len());
        for &theta in grid.points() {
            let (at, bt) = self.eval(theta)?;
            a.push(at);
            b.push(bt);
        }
        PairSamples::new(grid.clone(), a, b)
    }
}

/// Finite, strictly increasing sampling of a parameter interval with both
/// endpoints present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    arc: ParamArc,
    points: Vec<f64>,
}

impl ParamGrid {
    pub fn uniform(arc: ParamArc, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "a grid needs at least 2 points, got {count}"
            )));
        }
        let last = (count - 1) as f64;
        let points = (0..count).map(|i| arc.from_unit(i as f64 / last)).collect();
        Ok(Self { arc, points })
    }

    pub fn from_points(arc: ParamArc, points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a grid needs at least 2 points".into()));
        }
        if points[0] != arc.lo() || points[points.len() - 1] != arc.hi() {
            return Err(Error::InvalidArgument(
                "grid must start at lo and end at hi".into(),
            ));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { arc, points })
    }

    /// Adds the given parameter values. A value closer than `1e-12·(hi-lo)` to
    /// an existing point replaces that point, so requested special values are
    /// always present verbatim.
    pub fn with_inserted(mut self, extra: &[f64]) -> Result<Self> {
        let snap = 1e-12 * self.arc.width();
        for &theta in extra {
            self.arc.check(theta)?;
            let pos = self.points.partition_point(|&p| p < theta);
            let near = [pos.checked_sub(1), Some(pos)]
                .into_iter()
                .flatten()
                .filter(|&i| i < self.points.len())
                .find(|&i| (self.points[i] - theta).abs() <= snap);
            match near {
                // endpoints stay exact
                Some(i) if i == 0 || i == self.points.len() - 1 => {}
                Some(i) => self.points[i] = theta,
                None => self.points.insert(pos, theta),
            }
        }
        Ok(self)
    }

    pub fn arc(&self) -> ParamArc {
        self.arc
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to `theta`, if present.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == theta)
    }
}

/// Per-grid-point values of a pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSamples {
    grid: ParamGrid,
    a: Vec<CMat>,
    b: Vec<CMat>,
}

impl PairSamples {
    pub fn new(grid: ParamGrid, a: Vec<CMat>, b: Vec<CMat>) -> Result<Self> {
        if a.len() != grid.len() || b.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} grid points but {} A-samples and {} B-samples",
                grid.len(),
                a.len(),
                b.len()
            )));
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        if n == 0 || m == 0 {
            return Err(Error::Dimension("empty state or input dimension".into()));
        }
        for (at, bt) in a.iter().zip(&b) {
            if at.shape() != (n, n) || bt.shape() != (n, m) {
                return Err(Error::Dimension(format!(
                    "inconsistent sample shapes: A {:?}, B {:?}, expected ({n},{n}) and ({n},{m})",
                    at.shape(),
                    bt.shape()
                )));
            }
        }
        Ok(Self { grid, a, b })
    }

    /// The same constant pair at every grid point.
    pub fn constant(grid: ParamGrid, a: &CMat, b: &CMat) -> Result<Self> {
        let len = grid.len();
        Self::new(grid, vec![a.clone(); len], vec![b.clone(); len])
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.b[0].ncols()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self, k: usize) -> &CMat {
        &self.a[k]
    }

    pub fn b(&self, k: usize) -> &CMat {
        &self.b[k]
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.grid.points()[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &CMat, &CMat)> {
        self.grid
            .points()
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&t, (a, b))| (t, a, b))
    }
}

/// Block matrix `(B, AB, …, A^{n-1}B)`.
pub fn kalman_matrix(a: &CMat, b: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{} and B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let m = b.ncols();
    let mut out = CMat::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        out.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankPoint {
    pub theta: f64,
    pub rank: usize,
    /// Smallest singular value of the Kalman matrix relative to the largest
    /// (n-th largest when the matrix is wide).
    pub relative_sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachabilityReport {
    pub n: usize,
    pub reachable: bool,
    pub points: Vec<RankPoint>,
}

impl ReachabilityReport {
    pub fn first_unreachable(&self) -> Option<&RankPoint> {
        self.points.iter().find(|p| p.rank < self.n)
    }
}

/// Pointwise Kalman rank test over the sampled pair.
pub fn pointwise_reachable_samples(samples: &PairSamples, tol: f64) -> Result<ReachabilityReport> {
    check_tol(tol)?;
    let n = samples.n();
    let points: Vec<RankPoint> = (0..samples.len())
        .into_par_iter()
        .map(|k| {
            let kal = kalman_matrix(samples.a(k), samples.b(k)).expect("shapes validated");
            let s = linalg::singular_values(&kal);
            let smax = s.first().copied().unwrap_or(0.0);
            let rank = if smax > 0.0 {
                s.iter().filter(|&&x| x > tol * smax).count()
            } else {
                0
            };
            let relative_sigma_min = if smax > 0.0 {
                s.get(n - 1).copied().unwrap_or(0.0) / smax
            } else {
                0.0
            };
            RankPoint {
                theta: samples.theta(k),
                rank,
                relative_sigma_min,
            }
        })
        .collect();
    let reachable = points.iter().all(|p| p.rank == n);
    Ok(ReachabilityReport {
        n,
        reachable,
        points,
    })
}

pub fn pointwise_reachable(
    sys: &SystemPair,
    grid: &ParamGrid,
    tol: f64,
) -> Result<ReachabilityReport> {
    pointwise_reachable_samples(&sys.sample(grid)?, tol)
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}
