//! Feedback design for uniform ensemble reachability.
//!
//! The closed loop is steered onto prescribed eigenvalue arcs: `k` arcs on the
//! unit circle and the rest on disjoint real segments, each arc injective in θ
//! and all arcs pairwise disjoint. Single-input pairs get the arcs by
//! Ackermann's formula; multi-input pairs are mapped through Brunovsky form
//! onto a target pair `(Ã, B̃)` with a companion `Ã` carrying the arcs.
//!
//! The sufficient conditions checked on a grid:
//! N1 pointwise reachability, S simple eigenvalues at each θ,
//! N2 disjoint spectra at distinct θ (grid surrogate), H constant Hermite indices.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::brunovsky::{to_brunovsky_samples, BrunovskyResult};
use crate::error::{Error, Result};
use crate::feedback_group::{equivalence_residual, ResidualPoint, SampledTransform, TransformKind};
use crate::indices::{indices_constant_samples, kronecker_indices, IndexKind, IndexVector};
use crate::linalg::{
    self, characteristic_polynomial, eigenvalues, last_row_of_inverse, matrix_polynomial, poly_from_roots,
    CMat, C64, ONE,
};
use crate::param_core::{
    check_tol, kalman_matrix, pointwise_reachable_samples, PairSamples, ParamArc, ParamGrid, SystemPair,
};

pub const DEFAULT_TOL_GAP: f64 = 1e-8;
/// Cross-parameter gap threshold, relative to the largest spectral radius.
pub const DEFAULT_CROSS_GAP_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenArcDesign {
    pub n: usize,
    pub split_k: usize,
    pub arc: ParamArc,
}

impl EigenArcDesign {
    /// `split_k` defaults to `n − 1` (0 when `n = 1`).
    pub fn new(n: usize, split_k: Option<usize>, arc: ParamArc) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let split_k = split_k.unwrap_or(n - 1);
        let valid = if n == 1 { split_k == 0 } else { (1..n).contains(&split_k) };
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "split_k = {split_k} must satisfy 1 <= split_k < n = {n} (0 when n = 1)"
            )));
        }
        Ok(Self { n, split_k, arc })
    }

    /// Values `λ_1(θ), …, λ_n(θ)` with `t = (θ − lo)/(hi − lo)`.
    ///
    /// Circle arcs `l ≤ k`: `exp(2πi (t(l−1)/k + (1−t)(l/k − 1/(k+1))))`.
    /// Real arcs: `(l+1) − t` when there is one, `(l+1) − t/2` when there are
    /// several (full-length segments would share endpoints).
    pub fn eigen_arcs(&self, theta: f64) -> Result<Vec<C64>> {
        self.arc.check(theta)?;
        let t = self.arc.to_unit(theta);
        let k = self.split_k;
        let real_count = self.n - k;
        let mut out = Vec::with_capacity(self.n);
        for l in 1..=self.n {
            let lf = l as f64;
            if l <= k {
                let kf = k as f64;
                let frac = t * (lf - 1.0) / kf + (1.0 - t) * (lf / kf - 1.0 / (kf + 1.0));
                out.push(C64::from_polar(1.0, 2.0 * PI * frac));
            } else if real_count == 1 {
                out.push(linalg::re(lf + 1.0 - t));
            } else {
                out.push(linalg::re(lf + 1.0 - 0.5 * t));
            }
        }
        Ok(out)
    }

    /// Ascending coefficients of `p_θ(z) = Π (z − λ_l(θ))`.
    pub fn target_polynomial(&self, theta: f64) -> Result<Vec<C64>> {
        Ok(poly_from_roots(&self.eigen_arcs(theta)?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AckermannPoint {
    pub theta: f64,
    /// Row `f` with `det(zI − A + b f) = p_θ(z)`.
    pub f: Vec<C64>,
    /// `g = −f`: the closed loop `A + b g` has characteristic polynomial `p_θ`.
    pub g: Vec<C64>,
    pub target_coeffs: Vec<C64>,
    pub closed_loop_coeffs: Vec<C64>,
    /// `‖Δ‖∞ / max(1, ‖target‖∞)` for the coefficient vectors.
    pub coeff_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct SingleInputDesign {
    pub design: EigenArcDesign,
    pub points: Vec<AckermannPoint>,
    /// `(I, f, 1)`: acting with it produces the closed loop.
    pub transform: SampledTransform,
    pub closed_loop: PairSamples,
}

impl SingleInputDesign {
    pub fn max_coeff_mismatch(&self) -> f64 {
        self.points.iter().map(|p| p.coeff_mismatch).fold(0.0, f64::max)
    }
}

/// `f = e_nᵀ R⁻¹ p_θ(A)` at one parameter value.
pub fn ackermann_at(a: &CMat, b: &CMat, target: &[C64], tol: f64, theta: f64) -> Result<CMat> {
    let n = a.nrows();
    if b.ncols() != 1 {
        return Err(Error::Dimension(format!("Ackermann needs m = 1, got m = {}", b.ncols())));
    }
    let r = kalman_matrix(a, b)?;
    let s = linalg::singular_values(&r);
    if !(s[n - 1] > tol * s[0]) {
        return Err(Error::Singular {
            what: "reachability matrix",
            theta,
        });
    }
    let row = last_row_of_inverse(&r).ok_or(Error::Singular {
        what: "reachability matrix",
        theta,
    })?;
    Ok(row * matrix_polynomial(target, a))
}

fn coeff_mismatch(got: &[C64], want: &[C64]) -> f64 {
    let diff = got
        .iter()
        .zip(want)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let scale = want.iter().map(|c| c.norm()).fold(1.0, f64::max);
    diff / scale
}

pub fn ackermann_feedback_samples(
    samples: &PairSamples,
    design: &EigenArcDesign,
    tol: f64,
) -> Result<SingleInputDesign> {
    check_tol(tol)?;
    if samples.m() != 1 {
        return Err(Error::Dimension(format!(
            "single-input design needs m = 1, got m = {}",
            samples.m()
        )));
    }
    if design.n != samples.n() {
        return Err(Error::Dimension(format!(
            "design for n = {} applied to n = {}",
            design.n,
            samples.n()
        )));
    }
    let reach = pointwise_reachable_samples(samples, tol)?;
    if let Some(p) = reach.first_unreachable() {
        return Err(Error::precondition(
            format!("pair is not reachable (Kalman rank {} < n = {})", p.rank, samples.n()),
            Some(p.theta),
        ));
    }
    let n = samples.n();
    let computed: Vec<(AckermannPoint, CMat)> = (0..samples.len())
        .into_par_iter()
        .map(|k| {
            let theta = samples.theta(k);
            let (a, b) = (samples.a(k), samples.b(k));
            let target = design.target_polynomial(theta)?;
            let f = ackermann_at(a, b, &target, tol, theta)?;
            let closed = a - b * &f;
            let cl = characteristic_polynomial(&closed);
            let point = AckermannPoint {
                theta,
                f: f.iter().copied().collect(),
                g: f.iter().map(|z| -z).collect(),
                coeff_mismatch: coeff_mismatch(&cl, &target),
                target_coeffs: target,
                closed_loop_coeffs: cl,
            };
            Ok((point, f))
        })
        .collect::<Result<_>>()?;
    let (points, fs): (Vec<_>, Vec<_>) = computed.into_iter().unzip();
    let len = samples.len();
    let transform = SampledTransform::new(
        samples.grid().clone(),
        vec![CMat::identity(n, n); len],
        fs,
        vec![CMat::identity(1, 1); len],
        TransformKind::Restricted,
    )?;
    let closed_loop = transform.act(samples)?;
    Ok(SingleInputDesign {
        design: *design,
        points,
        transform,
        closed_loop,
    })
}

pub fn ackermann_feedback(
    sys: &SystemPair,
    design: &EigenArcDesign,
    grid: &ParamGrid,
    tol: f64,
) -> Result<SingleInputDesign> {
    ackermann_feedback_samples(&sys.sample(grid)?, design, tol)
}

/// Pair `(Ã, B̃)` with companion `Ã(θ)` whose characteristic polynomial is
/// `p_θ` and constant `B̃` realizing the Kronecker indices κ.
#[derive(Debug, Clone)]
pub struct TargetPair {
    pub kappa: IndexVector,
    pub b_tilde: CMat,
    /// Nonzero input columns in the order their chains occupy `e_1, …, e_n`.
    pub chain_order: Vec<usize>,
    /// Per grid point, `a_0(θ) … a_{n−1}(θ)`: the last column of `Ã(θ)`.
    pub a_coeffs: Vec<Vec<C64>>,
    pub samples: PairSamples,
}

/// Companion matrix with ones on the subdiagonal and last column `a`.
pub fn companion(a_coeffs: &[C64]) -> CMat {
    let n = a_coeffs.len();
    let mut m = CMat::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = ONE;
    }
    for (i, &c) in a_coeffs.iter().enumerate() {
        m[(i, n - 1)] = c;
    }
    m
}

/// Order in which the chains of the nonzero columns fill `e_1, …, e_n`.
///
/// Starts with the first nonzero column (so `B̃ e_{i₀} = e_1`) and keeps the
/// natural order otherwise. The chain that runs into the last column of `Ã`
/// must be closed by the Kronecker scan, which holds when its index `κ_c`
/// satisfies `κ_l ≤ κ_c` for later columns and `κ_l ≤ κ_c + 1` for earlier
/// ones; the last such `c` is moved to the end. When only the first nonzero
/// column qualifies it is placed last instead.
pub fn chain_order(kappa: &[usize]) -> Vec<usize> {
    let nonzero: Vec<usize> = (0..kappa.len()).filter(|&i| kappa[i] > 0).collect();
    if nonzero.len() <= 1 {
        return nonzero;
    }
    let closes = |c: usize| {
        (0..kappa.len()).all(|l| {
            if l > c {
                kappa[l] <= kappa[c]
            } else if l < c {
                kappa[l] <= kappa[c] + 1
            } else {
                true
            }
        })
    };
    let first = nonzero[0];
    let last = nonzero[1..].iter().rev().copied().find(|&c| closes(c));
    let mut order: Vec<usize>;
    match last {
        Some(c) => {
            order = nonzero.iter().copied().filter(|&i| i != c).collect();
            order.push(c);
        }
        None => {
            order = nonzero[1..].to_vec();
            order.push(first);
        }
    }
    order
}

pub fn target_b(kappa: &[usize]) -> (CMat, Vec<usize>) {
    let n: usize = kappa.iter().sum();
    let order = chain_order(kappa);
    let mut b = CMat::zeros(n, kappa.len());
    let mut pos = 0;
    for &i in &order {
        b[(pos, i)] = ONE;
        pos += kappa[i];
    }
    (b, order)
}

pub fn target_pair(kappa: &IndexVector, design: &EigenArcDesign, grid: &ParamGrid) -> Result<TargetPair> {
    let n: usize = kappa.values.iter().sum();
    if n != design.n {
        return Err(Error::Structural(format!(
            "indices {:?} sum to {n}, design is for n = {}",
            kappa.values, design.n
        )));
    }
    let (b_tilde, order) = target_b(&kappa.values);
    let mut a_coeffs = Vec::with_capacity(grid.len());
    let mut a = Vec::with_capacity(grid.len());
    for &theta in grid.points() {
        let p = design.target_polynomial(theta)?;
        let col: Vec<C64> = p[..n].iter().map(|c| -c).collect();
        a.push(companion(&col));
        a_coeffs.push(col);
    }
    let samples = PairSamples::new(grid.clone(), a, vec![b_tilde.clone(); grid.len()])?;
    Ok(TargetPair {
        kappa: kappa.clone(),
        b_tilde,
        chain_order: order,
        a_coeffs,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub passed: bool,
    /// Smallest relative singular value (N1), eigenvalue gap (S, N2), or
    /// 0/1 for index constancy (H).
    pub margin: f64,
    pub threshold: f64,
    /// Offending parameter values; for N2 the two parameters of the closest pair.
    pub witness: Vec<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub n1: ConditionCheck,
    pub n2: ConditionCheck,
    pub s: ConditionCheck,
    pub h: ConditionCheck,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.n1.passed && self.n2.passed && self.s.passed && self.h.passed
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionTolerances {
    pub rank: f64,
    pub gap: f64,
    pub cross_gap_rel: f64,
}

impl Default for ConditionTolerances {
    fn default() -> Self {
        Self {
            rank: crate::param_core::DEFAULT_RANK_TOL,
            gap: DEFAULT_TOL_GAP,
            cross_gap_rel: DEFAULT_CROSS_GAP_REL,
        }
    }
}

fn min_gap_within(ev: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            g = g.min((ev[i] - ev[j]).norm());
        }
    }
    g
}

fn min_gap_between(e1: &[C64], e2: &[C64]) -> f64 {
    e1.iter()
        .flat_map(|x| e2.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min)
}

pub fn check_conditions(samples: &PairSamples, tols: ConditionTolerances) -> Result<ConditionReport> {
    check_tol(tols.rank)?;
    check_tol(tols.gap)?;
    check_tol(tols.cross_gap_rel)?;
    let reach = pointwise_reachable_samples(samples, tols.rank)?;
    let n1 = ConditionCheck {
        passed: reach.reachable,
        margin: reach
            .points
            .iter()
            .map(|p| p.relative_sigma_min)
            .fold(f64::INFINITY, f64::min),
        threshold: tols.rank,
        witness: reach.first_unreachable().map(|p| vec![p.theta]).unwrap_or_default(),
        note: "Kalman rank n at every grid point".into(),
    };

    let spectra: Vec<Vec<C64>> = (0..samples.len())
        .into_par_iter()
        .map(|k| eigenvalues(samples.a(k)))
        .collect();

    let (s_gap, s_at) = spectra
        .iter()
        .enumerate()
        .map(|(k, ev)| (min_gap_within(ev), k))
        .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc });
    let s = ConditionCheck {
        passed: s_gap > tols.gap,
        margin: s_gap,
        threshold: tols.gap,
        witness: if s_gap > tols.gap { vec![] } else { vec![samples.theta(s_at)] },
        note: "smallest eigenvalue gap at a single grid point".into(),
    };

    let radius = spectra
        .iter()
        .flat_map(|ev| ev.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    let cross_threshold = tols.cross_gap_rel * radius.max(1.0);
    let (x_gap, x_pair) = (0..spectra.len())
        .into_par_iter()
        .map(|k| {
            (k + 1..spectra.len())
                .map(|j| (min_gap_between(&spectra[k], &spectra[j]), (k, j)))
                .fold((f64::INFINITY, (k, k)), |acc, x| if x.0 < acc.0 { x } else { acc })
        })
        .reduce(
            || (f64::INFINITY, (0, 0)),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let n2 = ConditionCheck {
        passed: x_gap > cross_threshold,
        margin: x_gap,
        threshold: cross_threshold,
        witness: if x_gap > cross_threshold {
            vec![]
        } else {
            vec![samples.theta(x_pair.0), samples.theta(x_pair.1)]
        },
        note: "grid-verified: smallest eigenvalue distance between distinct grid points".into(),
    };

    let herm = indices_constant_samples(samples, IndexKind::Hermite, tols.rank)?;
    let h = ConditionCheck {
        passed: herm.constant,
        margin: if herm.constant { 1.0 } else { 0.0 },
        threshold: 1.0,
        witness: herm.first_mismatch.as_ref().map(|m| vec![m.theta]).unwrap_or_default(),
        note: format!("Hermite indices {:?} at the first grid point", herm.reference.values),
    };
    Ok(ConditionReport { n1, n2, s, h })
}

#[derive(Debug, Clone)]
pub struct MultiInputDesign {
    pub design: EigenArcDesign,
    pub source: BrunovskyResult,
    pub target: TargetPair,
    pub target_brunovsky: BrunovskyResult,
    /// `(T̃, F̃, S̃)⁻¹ ∘ (T, F, S)`, taking the input pair to `(Ã, B̃)`.
    pub transform: SampledTransform,
    pub residuals: Vec<ResidualPoint>,
    pub conditions: ConditionReport,
}

impl MultiInputDesign {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.state.max(r.input))
            .fold(0.0, f64::max)
    }
}

pub fn multi_input_design_samples(
    samples: &PairSamples,
    split_k: Option<usize>,
    tols: ConditionTolerances,
) -> Result<MultiInputDesign> {
    let design = EigenArcDesign::new(samples.n(), split_k, samples.grid().arc())?;
    let reach = pointwise_reachable_samples(samples, tols.rank)?;
    if let Some(p) = reach.first_unreachable() {
        return Err(Error::precondition(
            format!("pair is not reachable (Kalman rank {} < n = {})", p.rank, samples.n()),
            Some(p.theta),
        ));
    }
    let source = to_brunovsky_samples(samples, tols.rank)?;
    let target = target_pair(&source.kappa, &design, samples.grid())?;
    let target_brunovsky = to_brunovsky_samples(&target.samples, tols.rank)?;
    if target_brunovsky.kappa.values != source.kappa.values {
        return Err(Error::Structural(format!(
            "target pair has Kronecker indices {:?}, expected {:?}",
            target_brunovsky.kappa.values, source.kappa.values
        )));
    }
    let transform = target_brunovsky.transform.inverse()?.compose(&source.transform)?;
    let residuals = equivalence_residual(&transform, samples, &target.samples)?;
    let conditions = check_conditions(&target.samples, tols)?;
    Ok(MultiInputDesign {
        design,
        source,
        target,
        target_brunovsky,
        transform,
        residuals,
        conditions,
    })
}

pub fn multi_input_design(
    sys: &SystemPair,
    grid: &ParamGrid,
    split_k: Option<usize>,
    tols: ConditionTolerances,
) -> Result<MultiInputDesign> {
    multi_input_design_samples(&sys.sample(grid)?, split_k, tols)
}

/// Kronecker indices of the target pair at every grid point.
pub fn target_kronecker(target: &TargetPair, tol: f64) -> Result<Vec<IndexVector>> {
    target
        .samples
        .iter()
        .map(|(theta, a, b)| {
            let mut iv = kronecker_indices(a, b, tol)?;
            iv.theta = theta;
            Ok(iv)
        })
        .collect()
}
