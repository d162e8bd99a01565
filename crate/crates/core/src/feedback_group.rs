//! Restricted feedback transformations `(T, F, S)` and their group structure.
//!
//! A transformation acts on a pair by
//! `(T, F, S)·(A, B) = (T (A − B S⁻¹ F) T⁻¹, T B S⁻¹)`,
//! and two pairs are equivalent when some `(T, F, S)` satisfies
//! `T A₁ − A₂ T = B₂ F` and `T B₁ = B₂ S`.
//! These use the same triple: substituting the action into the relations
//! gives `T A₁ − A₂ T = T B₁ S⁻¹ F = B₂ F` and `T B₁ = B₂ S` identically, so
//! `pair₂ = t·pair₁` holds exactly when `t` certifies `pair₁ ~ pair₂`.
//!
//! Composition is `(T₁T₂, F₁T₂ + S₁F₂, S₁S₂)` and makes the action a left
//! action: `(t₁∘t₂)·p = t₁·(t₂·p)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, op_norm, CMat, ONE, ZERO};
use crate::param_core::{PairSamples, ParamArc, ParamGrid, PolyMatrix};

/// `T(θ)` counts as invertible when its smallest singular value exceeds this
/// multiple of the largest.
pub const INVERTIBILITY_TOL: f64 = 1e-10;
/// Allowed deviation of a sampled `S` from unit upper triangular form.
pub const TRIANGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// `S(θ)` unit upper triangular.
    Restricted,
    /// `S(θ)` any invertible matrix.
    General,
}

/// Transformation with polynomial entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackTransform {
    t: PolyMatrix,
    f: PolyMatrix,
    s: PolyMatrix,
    arc: ParamArc,
    kind: TransformKind,
}

impl FeedbackTransform {
    pub fn new(
        t: PolyMatrix,
        f: PolyMatrix,
        s: PolyMatrix,
        arc: ParamArc,
        kind: TransformKind,
    ) -> Result<Self> {
        let n = t.nrows();
        let m = s.nrows();
        if t.ncols() != n || s.ncols() != m || f.nrows() != m || f.ncols() != n {
            return Err(Error::Dimension(format!(
                "T {}x{}, F {}x{}, S {}x{} do not fit n = {n}, m = {m}",
                t.nrows(),
                t.ncols(),
                f.nrows(),
                f.ncols(),
                s.nrows(),
                s.ncols()
            )));
        }
        if kind == TransformKind::Restricted {
            for i in 0..m {
                let d = s.get(i, i).coeffs();
                let unit = d.first() == Some(&ONE) && d[1..].iter().all(|c| *c == ZERO);
                if !unit {
                    return Err(Error::Structural(format!(
                        "S[{i}][{i}] must be the constant polynomial 1"
                    )));
                }
                for j in 0..i {
                    if !s.get(i, j).is_zero() {
                        return Err(Error::Structural(format!(
                            "S[{i}][{j}] below the diagonal must be zero"
                        )));
                    }
                }
            }
        }
        Ok(Self { t, f, s, arc, kind })
    }

    pub fn identity(n: usize, m: usize, arc: ParamArc) -> Self {
        Self {
            t: PolyMatrix::identity(n),
            f: PolyMatrix::zeros(m, n),
            s: PolyMatrix::identity(m),
            arc,
            kind: TransformKind::Restricted,
        }
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    pub fn arc(&self) -> ParamArc {
        self.arc
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn t(&self) -> &PolyMatrix {
        &self.t
    }

    pub fn f(&self) -> &PolyMatrix {
        &self.f
    }

    pub fn s(&self) -> &PolyMatrix {
        &self.s
    }

    pub fn eval(&self, theta: f64) -> Result<(CMat, CMat, CMat)> {
        self.arc.check(theta)?;
        Ok((self.t.eval(theta), self.f.eval(theta), self.s.eval(theta)))
    }

    /// Values on `grid`, checking that `T` is invertible at every point.
    pub fn sample(&self, grid: &ParamGrid) -> Result<SampledTransform> {
        let mut t = Vec::with_capacity(grid.len());
        let mut f = Vec::with_capacity(grid.len());
        let mut s = Vec::with_capacity(grid.len());
        for &theta in grid.points() {
            let (tt, ff, ss) = self.eval(theta)?;
            linalg::checked_inverse(&tt, INVERTIBILITY_TOL, "T", theta)?;
            t.push(tt);
            f.push(ff);
            s.push(ss);
        }
        SampledTransform::new(grid.clone(), t, f, s, self.kind)
    }

    /// Exact polynomial composition `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_dims(self.n(), self.m(), other.n(), other.m())?;
        if self.arc != other.arc {
            return Err(Error::Structural("transforms live on different intervals".into()));
        }
        let t = self.t.mul(&other.t)?;
        let f = self.f.mul(&other.t)?.add(&self.s.mul(&other.f)?)?;
        let s = self.s.mul(&other.s)?;
        Ok(Self {
            t,
            f,
            s,
            arc: self.arc,
            kind: combine_kind(self.kind, other.kind),
        })
    }

    /// The inverse is generally not polynomial, so it is formed on a grid.
    pub fn inverse_on(&self, grid: &ParamGrid) -> Result<SampledTransform> {
        self.sample(grid)?.inverse()
    }

    /// Mixed composition `self ∘ other` with `self` sampled on `other`'s grid.
    pub fn compose_sampled(&self, other: &SampledTransform) -> Result<SampledTransform> {
        self.sample(other.grid())?.compose(other)
    }

    pub fn act(&self, pair: &PairSamples) -> Result<PairSamples> {
        self.sample(pair.grid())?.act(pair)
    }
}

/// Transformation given by its values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTransform {
    grid: ParamGrid,
    t: Vec<CMat>,
    f: Vec<CMat>,
    s: Vec<CMat>,
    kind: TransformKind,
}

impl SampledTransform {
    pub fn new(
        grid: ParamGrid,
        t: Vec<CMat>,
        f: Vec<CMat>,
        s: Vec<CMat>,
        kind: TransformKind,
    ) -> Result<Self> {
        let len = grid.len();
        if t.len() != len || f.len() != len || s.len() != len {
            return Err(Error::Dimension(format!(
                "{len} grid points but {}, {}, {} samples of T, F, S",
                t.len(),
                f.len(),
                s.len()
            )));
        }
        let n = t[0].nrows();
        let m = s[0].nrows();
        for k in 0..len {
            if t[k].shape() != (n, n) || f[k].shape() != (m, n) || s[k].shape() != (m, m) {
                return Err(Error::Dimension(format!(
                    "sample {k}: T {:?}, F {:?}, S {:?} do not fit n = {n}, m = {m}",
                    t[k].shape(),
                    f[k].shape(),
                    s[k].shape()
                )));
            }
            if kind == TransformKind::Restricted {
                let defect = triangularity_defect(&s[k]);
                if defect > TRIANGULARITY_TOL {
                    return Err(Error::Structural(format!(
                        "S is not unit upper triangular at theta = {} (defect {defect:.3e})",
                        grid.points()[k]
                    )));
                }
            }
        }
        Ok(Self { grid, t, f, s, kind })
    }

    pub fn identity(grid: ParamGrid, n: usize, m: usize) -> Self {
        let len = grid.len();
        Self {
            grid,
            t: vec![CMat::identity(n, n); len],
            f: vec![CMat::zeros(m, n); len],
            s: vec![CMat::identity(m, m); len],
            kind: TransformKind::Restricted,
        }
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n(&self) -> usize {
        self.t[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.s[0].nrows()
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn t(&self, k: usize) -> &CMat {
        &self.t[k]
    }

    pub fn f(&self, k: usize) -> &CMat {
        &self.f[k]
    }

    pub fn s(&self, k: usize) -> &CMat {
        &self.s[k]
    }

    /// Largest deviation of any `S(θ)` from unit upper triangular form.
    pub fn max_triangularity_defect(&self) -> f64 {
        self.s.iter().map(triangularity_defect).fold(0.0, f64::max)
    }

    /// `self ∘ other`, pointwise.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        check_dims(self.n(), self.m(), other.n(), other.m())?;
        let (t, (f, s)): (Vec<_>, (Vec<_>, Vec<_>)) = (0..self.len())
            .map(|k| {
                let (t, f, s) = compose_at(
                    (&self.t[k], &self.f[k], &self.s[k]),
                    (&other.t[k], &other.f[k], &other.s[k]),
                );
                (t, (f, s))
            })
            .unzip();
        Ok(Self {
            grid: self.grid.clone(),
            t,
            f,
            s,
            kind: combine_kind(self.kind, other.kind),
        })
    }

    /// Mixed composition `self ∘ other` with `other` sampled on this grid.
    pub fn compose_poly(&self, other: &FeedbackTransform) -> Result<Self> {
        self.compose(&other.sample(&self.grid)?)
    }

    pub fn inverse(&self) -> Result<Self> {
        let parts: Vec<(CMat, CMat, CMat)> = (0..self.len())
            .into_par_iter()
            .map(|k| inverse_at(&self.t[k], &self.f[k], &self.s[k], self.grid.points()[k]))
            .collect::<Result<_>>()?;
        let mut t = Vec::with_capacity(parts.len());
        let mut f = Vec::with_capacity(parts.len());
        let mut s = Vec::with_capacity(parts.len());
        for (tt, ff, ss) in parts {
            t.push(tt);
            f.push(ff);
            s.push(ss);
        }
        Ok(Self {
            grid: self.grid.clone(),
            t,
            f,
            s,
            kind: self.kind,
        })
    }

    pub fn act(&self, pair: &PairSamples) -> Result<PairSamples> {
        same_grid(&self.grid, pair.grid())?;
        if pair.n() != self.n() || pair.m() != self.m() {
            return Err(Error::Dimension(format!(
                "transform for n = {}, m = {} applied to a pair with n = {}, m = {}",
                self.n(),
                self.m(),
                pair.n(),
                pair.m()
            )));
        }
        let out: Vec<(CMat, CMat)> = (0..self.len())
            .into_par_iter()
            .map(|k| {
                act_at(
                    (&self.t[k], &self.f[k], &self.s[k]),
                    pair.a(k),
                    pair.b(k),
                    pair.theta(k),
                )
            })
            .collect::<Result<_>>()?;
        let (a, b) = out.into_iter().unzip();
        PairSamples::new(self.grid.clone(), a, b)
    }
}

/// `(T₁T₂, F₁T₂ + S₁F₂, S₁S₂)` at one parameter value.
pub fn compose_at(
    (t1, f1, s1): (&CMat, &CMat, &CMat),
    (t2, f2, s2): (&CMat, &CMat, &CMat),
) -> (CMat, CMat, CMat) {
    (t1 * t2, f1 * t2 + s1 * f2, s1 * s2)
}

/// `(T⁻¹, −S⁻¹ F T⁻¹, S⁻¹)` at one parameter value.
pub fn inverse_at(t: &CMat, f: &CMat, s: &CMat, theta: f64) -> Result<(CMat, CMat, CMat)> {
    let ti = linalg::checked_inverse(t, INVERTIBILITY_TOL, "T", theta)?;
    let si = s_inverse(s, theta)?;
    let fi = -(&si * f * &ti);
    Ok((ti, fi, si))
}

/// `(T (A − B S⁻¹ F) T⁻¹, T B S⁻¹)` at one parameter value.
pub fn act_at(
    (t, f, s): (&CMat, &CMat, &CMat),
    a: &CMat,
    b: &CMat,
    theta: f64,
) -> Result<(CMat, CMat)> {
    let ti = linalg::checked_inverse(t, INVERTIBILITY_TOL, "T", theta)?;
    let si = s_inverse(s, theta)?;
    let a2 = t * (a - b * &si * f) * &ti;
    let b2 = t * b * si;
    Ok((a2, b2))
}

/// Inverse of `S`; back substitution keeps an exactly unit upper triangular
/// matrix exactly unit upper triangular.
fn s_inverse(s: &CMat, theta: f64) -> Result<CMat> {
    let m = s.nrows();
    if triangularity_defect(s) == 0.0 {
        return s
            .solve_upper_triangular(&CMat::identity(m, m))
            .ok_or(Error::Singular { what: "S", theta });
    }
    linalg::checked_inverse(s, INVERTIBILITY_TOL, "S", theta)
}

/// Max of `|S_ii − 1|` and `|S_ij|` for `i > j`.
pub fn triangularity_defect(s: &CMat) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..s.nrows() {
        d = d.max((s[(i, i)] - ONE).norm());
        for j in 0..i {
            d = d.max(s[(i, j)].norm());
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub theta: f64,
    /// `‖T A₁ − A₂ T − B₂ F‖`
    pub state: f64,
    /// `‖T B₁ − B₂ S‖`
    pub input: f64,
}

/// Residuals of the equivalence relations at one parameter value.
pub fn residual_at(
    (t, f, s): (&CMat, &CMat, &CMat),
    (a1, b1): (&CMat, &CMat),
    (a2, b2): (&CMat, &CMat),
) -> (f64, f64) {
    let r1 = t * a1 - a2 * t - b2 * f;
    let r2 = t * b1 - b2 * s;
    (op_norm(&r1), op_norm(&r2))
}

/// Per-point operator-norm residuals of `T A₁ − A₂ T = B₂ F` and `T B₁ = B₂ S`.
pub fn equivalence_residual(
    t: &SampledTransform,
    pair1: &PairSamples,
    pair2: &PairSamples,
) -> Result<Vec<ResidualPoint>> {
    same_grid(t.grid(), pair1.grid())?;
    same_grid(t.grid(), pair2.grid())?;
    if pair1.n() != t.n() || pair2.n() != t.n() || pair1.m() != t.m() || pair2.m() != t.m() {
        return Err(Error::Dimension("transform and pairs disagree on n or m".into()));
    }
    Ok((0..t.len())
        .into_par_iter()
        .map(|k| {
            let (state, input) = residual_at(
                (t.t(k), t.f(k), t.s(k)),
                (pair1.a(k), pair1.b(k)),
                (pair2.a(k), pair2.b(k)),
            );
            ResidualPoint {
                theta: pair1.theta(k),
                state,
                input,
            }
        })
        .collect())
}

fn same_grid(a: &ParamGrid, b: &ParamGrid) -> Result<()> {
    if a.points() == b.points() {
        Ok(())
    } else {
        Err(Error::Structural("operands are sampled on different grids".into()))
    }
}

fn check_dims(n1: usize, m1: usize, n2: usize, m2: usize) -> Result<()> {
    if (n1, m1) == (n2, m2) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "transforms for (n, m) = ({n1}, {m1}) and ({n2}, {m2})"
        )))
    }
}

fn combine_kind(a: TransformKind, b: TransformKind) -> TransformKind {
    if a == TransformKind::Restricted && b == TransformKind::Restricted {
        TransformKind::Restricted
    } else {
        TransformKind::General
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, re};
    use crate::param_core::PolyScalar;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_arc() -> ParamArc {
        ParamArc::new(-1.0, 1.0).unwrap()
    }

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, re(x))
    }

    #[test]
    fn scalar_inverse_by_hand() {
        let (t, f, s) = inverse_at(&scalar(2.0), &scalar(3.0), &scalar(1.0), 0.0).unwrap();
        assert_eq!(t[(0, 0)], re(0.5));
        assert_eq!(f[(0, 0)], re(-1.5));
        assert_eq!(s[(0, 0)], re(1.0));
    }

    #[test]
    fn singular_t_is_reported_with_theta() {
        let t = CMat::zeros(2, 2);
        let err = inverse_at(&t, &CMat::zeros(1, 2), &scalar(1.0), 0.25).unwrap_err();
        assert_eq!(err.witness(), Some(0.25));
    }

    #[test]
    fn restricted_polynomial_s_is_validated() {
        let arc = unit_arc();
        let mut s = PolyMatrix::identity(2);
        s.set(1, 0, PolyScalar::real(&[0.0, 1.0]));
        let r = FeedbackTransform::new(
            PolyMatrix::identity(2),
            PolyMatrix::zeros(2, 2),
            s.clone(),
            arc,
            TransformKind::Restricted,
        );
        assert!(matches!(r, Err(Error::Structural(_))));
        assert!(FeedbackTransform::new(
            PolyMatrix::identity(2),
            PolyMatrix::zeros(2, 2),
            s,
            arc,
            TransformKind::General
        )
        .is_ok());
    }

    #[test]
    fn identity_laws_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = ParamGrid::uniform(unit_arc(), 11).unwrap();
        let t = random::restricted_transform(&mut rng, 3, 2, unit_arc())
            .sample(&grid)
            .unwrap();
        let id = SampledTransform::identity(grid.clone(), 3, 2);
        let left = id.compose(&t).unwrap();
        let right = t.compose(&id).unwrap();
        let back = t.compose(&t.inverse().unwrap()).unwrap();
        let twice = t.inverse().unwrap().inverse().unwrap();
        for k in 0..grid.len() {
            for (x, y) in [(&left, &t), (&right, &t), (&back, &id), (&twice, &t)] {
                assert!(max_abs(&(x.t(k) - y.t(k))) < 1e-10);
                assert!(max_abs(&(x.f(k) - y.f(k))) < 1e-10);
                assert!(max_abs(&(x.s(k) - y.s(k))) < 1e-10);
            }
        }
        assert_eq!(id.inverse().unwrap(), id);
    }

    #[test]
    fn act_satisfies_relations_with_the_same_triple() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = ParamGrid::uniform(unit_arc(), 9).unwrap();
        let t = random::restricted_transform(&mut rng, 4, 2, unit_arc())
            .sample(&grid)
            .unwrap();
        let pair = random::pair_samples(&mut rng, &grid, 4, 2);
        let moved = t.act(&pair).unwrap();
        for r in equivalence_residual(&t, &pair, &moved).unwrap() {
            assert!(r.state < 1e-9 && r.input < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn identity_residual_and_perturbation_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = ParamGrid::uniform(unit_arc(), 5).unwrap();
        let pair = random::pair_samples(&mut rng, &grid, 3, 1);
        let id = SampledTransform::identity(grid.clone(), 3, 1);
        for r in equivalence_residual(&id, &pair, &pair).unwrap() {
            assert_eq!((r.state, r.input), (0.0, 0.0));
        }
        let eps = 1e-3;
        let shifted: Vec<CMat> = (0..grid.len())
            .map(|k| pair.a(k) + CMat::identity(3, 3) * re(eps))
            .collect();
        let b: Vec<CMat> = (0..grid.len()).map(|k| pair.b(k).clone()).collect();
        let pert = PairSamples::new(grid, shifted, b).unwrap();
        for r in equivalence_residual(&id, &pair, &pert).unwrap() {
            assert!(r.state >= eps / 2.0 && r.state <= 2.0 * eps);
        }
    }

    #[test]
    fn polynomial_compose_matches_sampled_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arc = unit_arc();
        let grid = ParamGrid::uniform(arc, 7).unwrap();
        let t1 = random::restricted_transform(&mut rng, 3, 2, arc);
        let t2 = random::restricted_transform(&mut rng, 3, 2, arc);
        let exact = t1.compose(&t2).unwrap().sample(&grid).unwrap();
        let sampled = t1.sample(&grid).unwrap().compose(&t2.sample(&grid).unwrap()).unwrap();
        let mixed = t1.compose_sampled(&t2.sample(&grid).unwrap()).unwrap();
        for k in 0..grid.len() {
            assert!(max_abs(&(exact.t(k) - sampled.t(k))) < 1e-12);
            assert!(max_abs(&(exact.f(k) - mixed.f(k))) < 1e-12);
            assert!(max_abs(&(exact.s(k) - sampled.s(k))) < 1e-12);
        }
        assert!(exact.max_triangularity_defect() == 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let arc = unit_arc();
        let a = SampledTransform::identity(ParamGrid::uniform(arc, 5).unwrap(), 2, 1);
        let b = SampledTransform::identity(ParamGrid::uniform(arc, 6).unwrap(), 2, 1);
        assert!(matches!(a.compose(&b), Err(Error::Structural(_))));
    }
}
