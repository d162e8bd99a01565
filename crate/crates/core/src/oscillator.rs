//! Harmonic oscillator ensemble under constant feedback plus open-loop input.
//!
//! `A_k(θ) = [[0, 1], [h(θ), 0]]`, `b_g(θ) = (0, g(θ))ᵀ` with
//! `h(θ) = k g(θ) − θ²` on `[−θ*, θ*]`. Since `A_k² = h I`, a polynomial
//! `p(z) = q(z²) + z r(z²)` gives `p(A_k) b_g = (g r(h), g q(h))ᵀ`, so a target
//! `f = (f₁, f₂)` is met by `r ≈ (f₁/g)∘h⁻¹` and `q ≈ (f₂/g)∘h⁻¹` on `h(P)`.
//! Those are approximated by Bernstein polynomials on `h(P)` mapped affinely
//! to `[0, 1]`; `h` must be strictly monotone, which holds for admissible `k`.
//!
//! Gains are analysed in a normal form with `g > 0` increasing: a negative `g`
//! is handled through `(g, k, f) → (−g, −k, −f)`, a decreasing one through
//! `θ → −θ`. Neither changes `A_k` up to reparameterization, so the designed
//! polynomial is the same; only the admissible sign of `k` flips.

use rayon::prelude::*;
use serde::Serialize;

pub use crate::bernstein::{bernstein, Bernstein};
use crate::builtins;
use crate::error::{Error, Result};
use crate::linalg::re;
use crate::param_core::{ParamArc, ParamGrid, PolyScalar, SystemPair, DEFAULT_GRID_POINTS};

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorEnsemble {
    g: Vec<f64>,
    theta_star: f64,
    k: f64,
}

/// Sign and orientation changes that bring `g` to positive increasing form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    /// Sign of `g`; the normalized gain is `sign · k`.
    pub sign: f64,
    /// True when `θ → −θ` was applied to make `g` increasing.
    pub reflected: bool,
}

impl OscillatorEnsemble {
    pub fn new(g_coeffs: &[f64], theta_star: f64, k: f64) -> Result<Self> {
        if !(theta_star > 0.0 && theta_star.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta_star must be positive, got {theta_star}"
            )));
        }
        if g_coeffs.is_empty() || g_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("g needs finite coefficients".into()));
        }
        if !k.is_finite() {
            return Err(Error::InvalidArgument(format!("gain must be finite, got {k}")));
        }
        Ok(Self {
            g: g_coeffs.to_vec(),
            theta_star,
            k,
        })
    }

    pub fn with_gain(&self, k: f64) -> Result<Self> {
        Self::new(&self.g, self.theta_star, k)
    }

    pub fn g_coeffs(&self) -> &[f64] {
        &self.g
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn arc(&self) -> ParamArc {
        ParamArc::new(-self.theta_star, self.theta_star).expect("theta_star > 0")
    }

    pub fn default_grid(&self) -> ParamGrid {
        ParamGrid::uniform(self.arc(), DEFAULT_GRID_POINTS).expect("enough points")
    }

    pub fn system(&self) -> Result<SystemPair> {
        builtins::oscillator(&self.g, self.k, self.theta_star)
    }

    pub fn g(&self, theta: f64) -> f64 {
        self.g.iter().rev().fold(0.0, |acc, &c| acc * theta + c)
    }

    pub fn g_prime(&self, theta: f64) -> f64 {
        self.g
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * theta + i as f64 * c)
    }

    pub fn g_poly(&self) -> PolyScalar {
        PolyScalar::real(&self.g)
    }

    /// `h(θ) = k g(θ) − θ²`.
    pub fn h(&self, theta: f64) -> f64 {
        self.k * self.g(theta) - theta * theta
    }

    /// `h′(θ) = k g′(θ) − 2θ`.
    pub fn h_prime(&self, theta: f64) -> f64 {
        self.k * self.g_prime(theta) - 2.0 * theta
    }

    /// Zero-free, strictly monotone check of `g` on the grid, giving the
    /// normalization.
    pub fn normalization(&self, grid: &ParamGrid) -> Result<Normalization> {
        let pts = grid.points();
        let g0 = self.g(pts[0]);
        if g0 == 0.0 {
            return Err(Error::precondition("g vanishes on the interval", Some(pts[0])));
        }
        let sign = g0.signum();
        if let Some(&t) = pts.iter().find(|&&t| self.g(t) * sign <= 0.0) {
            return Err(Error::precondition("g is not zero-free on the interval", Some(t)));
        }
        let d0 = self.g_prime(pts[0]);
        if d0 == 0.0 {
            return Err(Error::precondition("g is not strictly monotone (g' = 0)", Some(pts[0])));
        }
        if let Some(&t) = pts.iter().find(|&&t| self.g_prime(t) * d0.signum() <= 0.0) {
            return Err(Error::precondition("g is not strictly monotone (g' changes sign or vanishes)", Some(t)));
        }
        // increasing after the sign flip exactly when sign·g' > 0
        Ok(Normalization {
            sign,
            reflected: sign * d0 < 0.0,
        })
    }

    /// `ĝ(θ) = sign · g(±θ)`, positive and increasing.
    fn g_normalized(&self, nz: &Normalization, theta: f64) -> f64 {
        let t = if nz.reflected { -theta } else { theta };
        nz.sign * self.g(t)
    }

    fn g_prime_normalized(&self, nz: &Normalization, theta: f64) -> f64 {
        if nz.reflected {
            -nz.sign * self.g_prime(-theta)
        } else {
            nz.sign * self.g_prime(theta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KStar {
    /// `max{θ*/min|g|, max 2θ/g′}` in normal form.
    pub value: f64,
    /// `max 2θ/g′(θ)`: the threshold for injectivity of `h`.
    pub monotonicity_bound: f64,
    /// `θ*/min|g|`.
    pub positivity_bound: f64,
    pub normalization: Normalization,
}

impl KStar {
    /// Gains `k` with `sign · k > value` are admissible.
    pub fn admits(&self, k: f64) -> bool {
        self.normalization.sign * k > self.value
    }

    /// The gain `sign · (value + margin)`.
    pub fn gain_with_margin(&self, margin: f64) -> f64 {
        self.normalization.sign * (self.value + margin)
    }
}

/// Gain threshold, by maximization over the grid in normal form.
pub fn k_star(ens: &OscillatorEnsemble, grid: &ParamGrid) -> Result<KStar> {
    let nz = ens.normalization(grid)?;
    let pts = grid.points();
    let monotonicity_bound = pts
        .iter()
        .map(|&t| 2.0 * t / ens.g_prime_normalized(&nz, t))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_g = pts
        .iter()
        .map(|&t| ens.g_normalized(&nz, t).abs())
        .fold(f64::INFINITY, f64::min);
    let positivity_bound = ens.theta_star / min_g;
    Ok(KStar {
        value: monotonicity_bound.max(positivity_bound),
        monotonicity_bound,
        positivity_bound,
        normalization: nz,
    })
}

/// `h(θ) = k g(θ) − θ²`.
pub fn h_k_map(ens: &OscillatorEnsemble, theta: f64) -> Result<f64> {
    ens.arc().check(theta)?;
    Ok(ens.h(theta))
}

/// Solves `h(θ) = z` by bisection on the interval; `h` must be strictly
/// monotone there (checked at the grid points).
pub fn h_k_inverse(ens: &OscillatorEnsemble, z: f64, grid: &ParamGrid) -> Result<f64> {
    let ks = k_star(ens, grid)?;
    if !ks.admits(ens.k) {
        return Err(Error::precondition(
            format!(
                "gain k = {} is not admissible (need sign(g)·k > k* = {})",
                ens.k, ks.value
            ),
            None,
        ));
    }
    invert_monotone(ens, z)
}

fn invert_monotone(ens: &OscillatorEnsemble, z: f64) -> Result<f64> {
    let (lo, hi) = (-ens.theta_star, ens.theta_star);
    let (h_lo, h_hi) = (ens.h(lo), ens.h(hi));
    let increasing = h_hi > h_lo;
    let (z_min, z_max) = if increasing { (h_lo, h_hi) } else { (h_hi, h_lo) };
    if !(z_min <= z && z <= z_max) {
        return Err(Error::Domain {
            theta: z,
            lo: z_min,
            hi: z_max,
        });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let below = if increasing { ens.h(mid) < z } else { ens.h(mid) > z };
        if below {
            a = mid;
        } else {
            b = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if (ens.h(a) - z).abs() <= (ens.h(b) - z).abs() { a } else { b })
}

/// Constants entering the error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// `M_f = max ‖f(θ)‖`.
    pub max_f: f64,
    /// `L_f`, supplied by the caller.
    pub lip_f: f64,
    /// `M_g = max |g|`.
    pub max_g: f64,
    /// `m_g = min |g|`.
    pub min_g: f64,
    /// `L_g = max |g′|`.
    pub lip_g: f64,
    /// `c_{g,P} = |g(θ*) − g(−θ*)|`.
    pub c_gp: f64,
    /// `1 / min |k g′(θ) − 2θ|`, the Lipschitz constant of `h⁻¹`.
    pub lip_h_inv: f64,
    /// `g(−θ*)` in normal form.
    pub g_at_lower_end: f64,
    /// Normalized gain `sign(g)·k`.
    pub gain: f64,
}

/// Lipschitz constant of `f ∘ g`.
pub fn lipschitz_composition(lip_f: f64, lip_g: f64) -> f64 {
    lip_f * lip_g
}

/// Lipschitz constant of `f g` with `M_f = max|f|`, `M_g = max|g|`.
pub fn lipschitz_product(lip_f: f64, max_f: f64, lip_g: f64, max_g: f64) -> f64 {
    lip_f * max_g + lip_g * max_f
}

/// Lipschitz constant of `1/f` with `m_f = min|f| > 0`.
pub fn lipschitz_reciprocal(lip_f: f64, min_f: f64) -> f64 {
    lip_f / (min_f * min_f)
}

/// Lipschitz constant of `f⁻¹` for strictly monotone `C¹` `f`.
pub fn lipschitz_inverse(min_abs_derivative: f64) -> f64 {
    1.0 / min_abs_derivative
}

impl BoundConstants {
    /// Lipschitz constant of `(f_i/g)∘h⁻¹`:
    /// `L_{h⁻¹} (M_f L_g / m_g² + L_f / m_g)`.
    pub fn lip_pulled_back(&self) -> f64 {
        let quotient = lipschitz_product(
            self.lip_f,
            self.max_f,
            lipschitz_reciprocal(self.lip_g, self.min_g),
            1.0 / self.min_g,
        );
        lipschitz_composition(quotient, self.lip_h_inv)
    }
}

pub type Target<'a> = &'a (dyn Fn(f64) -> [f64; 2] + Sync);

pub fn lipschitz_constants(
    ens: &OscillatorEnsemble,
    target: Target<'_>,
    lip_f: f64,
    grid: &ParamGrid,
) -> Result<BoundConstants> {
    if !(lip_f >= 0.0 && lip_f.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target Lipschitz constant must be finite and non-negative, got {lip_f}"
        )));
    }
    let nz = ens.normalization(grid)?;
    let pts = grid.points();
    let fold = |it: &mut dyn Iterator<Item = f64>, init: f64, f: fn(f64, f64) -> f64| it.fold(init, f);
    let max_f = fold(&mut pts.iter().map(|&t| norm2(target(t))), 0.0, f64::max);
    let max_g = fold(&mut pts.iter().map(|&t| ens.g(t).abs()), 0.0, f64::max);
    let min_g = fold(&mut pts.iter().map(|&t| ens.g(t).abs()), f64::INFINITY, f64::min);
    let lip_g = fold(&mut pts.iter().map(|&t| ens.g_prime(t).abs()), 0.0, f64::max);
    let min_h_prime = fold(&mut pts.iter().map(|&t| ens.h_prime(t).abs()), f64::INFINITY, f64::min);
    Ok(BoundConstants {
        max_f,
        lip_f,
        max_g,
        min_g,
        lip_g,
        c_gp: (ens.g(ens.theta_star) - ens.g(-ens.theta_star)).abs(),
        lip_h_inv: lipschitz_inverse(min_h_prime),
        g_at_lower_end: ens.g_normalized(&nz, -ens.theta_star),
        gain: nz.sign * ens.k,
    })
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// `(1/g(−θ*)) (4 M_f / min|g| + k c_{g,P} / (2 min|k g′ − 2θ|) (M_f L_g / m_g² + L_f / m_g)) √(ln n / n)`
/// evaluated in normal form, for `n ≥ 3`.
pub fn error_bound(c: &BoundConstants, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Range {
            what: "Bernstein degree for the error bound",
            value: n as f64,
            lo: 3.0,
            hi: f64::INFINITY,
        });
    }
    let nf = n as f64;
    let lead = 4.0 * c.max_f / c.min_g;
    let slope = c.gain * c.c_gp * c.lip_h_inv / 2.0
        * (c.max_f * c.lip_g / (c.min_g * c.min_g) + c.lip_f / c.min_g);
    Ok((lead + slope) / c.g_at_lower_end * (nf.ln() / nf).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisPoint {
    pub theta: f64,
    /// `p(A_k(θ)) b_g(θ)`.
    pub reached: [f64; 2],
    pub target: [f64; 2],
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub n: usize,
    pub k: f64,
    /// `q` and `r` on `[0, 1]`, with `z = z_min + x (z_max − z_min)`.
    pub q: Bernstein,
    pub r: Bernstein,
    pub z_min: f64,
    pub z_max: f64,
    pub points: Vec<SynthesisPoint>,
    pub measured_error: f64,
    pub normalization: Normalization,
}

impl Synthesis {
    /// Ascending coefficients of `p(z) = q(z²) + z r(z²)`, degree `2n + 1`.
    pub fn p_coeffs(&self) -> Vec<f64> {
        let q = self.q.power_coeffs_on(self.z_min, self.z_max);
        let r = self.r.power_coeffs_on(self.z_min, self.z_max);
        let mut p = vec![0.0; 2 * self.n + 2];
        for j in 0..=self.n {
            p[2 * j] = q[j];
            p[2 * j + 1] = r[j];
        }
        p
    }

    pub fn p_coeffs_complex(&self) -> Vec<crate::linalg::C64> {
        self.p_coeffs().into_iter().map(re).collect()
    }

    fn unit(&self, z: f64) -> f64 {
        ((z - self.z_min) / (self.z_max - self.z_min)).clamp(0.0, 1.0)
    }

    /// `(q(z), r(z))` by de Casteljau.
    pub fn qr_at(&self, z: f64) -> (f64, f64) {
        let x = self.unit(z);
        (self.q.eval(x), self.r.eval(x))
    }
}

/// Bernstein synthesis of `p_n` for the target `f = (f₁, f₂)`.
pub fn synthesize(ens: &OscillatorEnsemble, target: Target<'_>, n: usize, grid: &ParamGrid) -> Result<Synthesis> {
    if n < 1 {
        return Err(Error::Range {
            what: "Bernstein degree",
            value: n as f64,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    if grid.arc() != ens.arc() {
        return Err(Error::Structural("grid does not cover [-theta_star, theta_star]".into()));
    }
    let ks = k_star(ens, grid)?;
    if !ks.admits(ens.k) {
        return Err(Error::precondition(
            format!(
                "gain k = {} is not admissible (need sign(g)·k > k* = {})",
                ens.k, ks.value
            ),
            None,
        ));
    }
    let (h_lo, h_hi) = (ens.h(-ens.theta_star), ens.h(ens.theta_star));
    let (z_min, z_max) = if h_lo < h_hi { (h_lo, h_hi) } else { (h_hi, h_lo) };
    let pull_back = |x: f64| -> (f64, f64) {
        let z = if x == 1.0 { z_max } else { z_min + x * (z_max - z_min) };
        let theta = invert_monotone(ens, z).expect("z lies in h(P)");
        let f = target(theta);
        let g = ens.g(theta);
        (f[0] / g, f[1] / g)
    };
    let nodes: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| pull_back(if i == n { 1.0 } else { i as f64 / n as f64 }))
        .collect();
    let r = Bernstein::from_coeffs(nodes.iter().map(|v| v.0).collect());
    let q = Bernstein::from_coeffs(nodes.iter().map(|v| v.1).collect());
    let mut syn = Synthesis {
        n,
        k: ens.k,
        q,
        r,
        z_min,
        z_max,
        points: Vec::new(),
        measured_error: 0.0,
        normalization: ks.normalization,
    };
    let points: Vec<SynthesisPoint> = grid
        .points()
        .par_iter()
        .map(|&theta| {
            let (qv, rv) = syn.qr_at(ens.h(theta));
            let g = ens.g(theta);
            let reached = [g * rv, g * qv];
            let target = target(theta);
            SynthesisPoint {
                theta,
                reached,
                target,
                error: norm2([reached[0] - target[0], reached[1] - target[1]]),
            }
        })
        .collect();
    syn.measured_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
    syn.points = points;
    Ok(syn)
}

/// The state transform `T(θ)⁻¹ = (1/g) [[0, 1], [1, 0]]` taking `(A_k, b_g)` to
/// `([[0, h], [1, 0]], e₁)`.
pub fn normalizing_transform(ens: &OscillatorEnsemble, theta: f64) -> crate::linalg::CMat {
    let s = re(1.0 / ens.g(theta));
    crate::linalg::CMat::from_row_slice(2, 2, &[re(0.0), s, s, re(0.0)])
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub measured_error: f64,
    pub bound: Option<f64>,
}

/// Measured error and bound for each degree (bound only for `n ≥ 3`).
pub fn sweep(
    ens: &OscillatorEnsemble,
    target: Target<'_>,
    lip_f: f64,
    degrees: &[usize],
    grid: &ParamGrid,
) -> Result<(BoundConstants, Vec<SweepRow>)> {
    let constants = lipschitz_constants(ens, target, lip_f, grid)?;
    let rows = degrees
        .iter()
        .map(|&n| {
            let syn = synthesize(ens, target, n, grid)?;
            let bound = if n >= 3 { Some(error_bound(&constants, n)?) } else { None };
            Ok(SweepRow {
                n,
                measured_error: syn.measured_error,
                bound,
            })
        })
        .collect::<Result<_>>()?;
    Ok((constants, rows))
}

/// `(sin θ, cos θ)`, Lipschitz with constant 1.
pub fn sincos(theta: f64) -> [f64; 2] {
    [theta.sin(), theta.cos()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_polynomial, CMat, C64};

    fn fixture(k: f64) -> OscillatorEnsemble {
        OscillatorEnsemble::new(&[2.0, 1.0], 1.0, k).unwrap()
    }

    #[test]
    fn k_star_of_affine_gain() {
        let ens = fixture(0.0);
        let ks = k_star(&ens, &ens.default_grid()).unwrap();
        assert_eq!(ks.monotonicity_bound, 2.0);
        assert_eq!(ks.positivity_bound, 1.0);
        assert_eq!(ks.value, 2.0);
        assert_eq!(ks.normalization, Normalization { sign: 1.0, reflected: false });
    }

    #[test]
    fn k_star_after_sign_normalization() {
        let ens = OscillatorEnsemble::new(&[-2.0, -1.0], 1.0, 0.0).unwrap();
        let ks = k_star(&ens, &ens.default_grid()).unwrap();
        assert_eq!(ks.value, 2.0);
        assert_eq!(ks.normalization.sign, -1.0);
        assert!(!ks.normalization.reflected);
        assert!(ks.admits(-3.0) && !ks.admits(3.0));

        let ens = OscillatorEnsemble::new(&[2.0, -1.0], 1.0, 0.0).unwrap();
        let ks = k_star(&ens, &ens.default_grid()).unwrap();
        assert!(ks.normalization.reflected);
        assert_eq!(ks.value, 2.0);
    }

    #[test]
    fn constant_gain_is_rejected() {
        let ens = OscillatorEnsemble::new(&[2.0], 1.0, 1.0).unwrap();
        let err = k_star(&ens, &ens.default_grid()).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }));
    }

    #[test]
    fn h_and_its_inverse() {
        let ens = fixture(3.0);
        assert_eq!(h_k_map(&ens, 0.0).unwrap(), 6.0);
        let grid = ens.default_grid();
        let (lo, hi) = (ens.h(-1.0), ens.h(1.0));
        for i in 0..100 {
            let z = lo + (hi - lo) * (i as f64 + 0.5) / 100.0;
            let t = h_k_inverse(&ens, z, &grid).unwrap();
            assert!((ens.h(t) - z).abs() < 1e-10);
        }
        assert!(matches!(h_k_inverse(&ens, hi + 1.0, &grid), Err(Error::Domain { .. })));
        assert!(grid.points().windows(2).all(|w| ens.h(w[1]) > ens.h(w[0])));
        assert!(h_k_inverse(&fixture(1.0), 3.0, &grid).is_err());
    }

    #[test]
    fn constants_of_the_fixture() {
        let ens = fixture(4.0);
        let c = lipschitz_constants(&ens, &sincos, 1.0, &ens.default_grid()).unwrap();
        assert_eq!(c.max_g, 3.0);
        assert_eq!(c.min_g, 1.0);
        assert_eq!(c.lip_g, 1.0);
        assert_eq!(c.c_gp, 2.0);
        assert_eq!(c.lip_h_inv, 0.5);
        assert!((c.max_f - 1.0).abs() < 1e-15);
        assert_eq!(lipschitz_reciprocal(c.lip_g, c.min_g), 1.0);
        assert_eq!(lipschitz_product(0.0, 2.0, 1.0, 3.0), 2.0);
        // by hand: (4·1/1 + 4·2/(2·2)·(1 + 1)) / 1 = 8
        for n in [3, 16, 256] {
            let nf = n as f64;
            let want = 8.0 * (nf.ln() / nf).sqrt();
            assert!((error_bound(&c, n).unwrap() - want).abs() < 1e-12);
        }
        assert!(error_bound(&c, 2).is_err());
    }

    #[test]
    fn bound_ratio_is_the_rate_ratio() {
        let ens = fixture(4.0);
        let c = lipschitz_constants(&ens, &sincos, 1.0, &ens.default_grid()).unwrap();
        for n in [3usize, 10, 100] {
            let nf = n as f64;
            let ratio = error_bound(&c, 2 * n).unwrap() / error_bound(&c, n).unwrap();
            let want = ((2.0 * nf).ln() / (2.0 * nf.ln())).sqrt();
            assert!((ratio - want).abs() < 1e-14);
        }
    }

    #[test]
    fn bound_decreases_with_gain() {
        let base = fixture(0.0);
        let grid = base.default_grid();
        let ks = k_star(&base, &grid).unwrap().value;
        let bounds: Vec<f64> = [ks + 1.0, 2.0 * ks, 4.0 * ks]
            .iter()
            .map(|&k| {
                let c = lipschitz_constants(&base.with_gain(k).unwrap(), &sincos, 1.0, &grid).unwrap();
                error_bound(&c, 32).unwrap()
            })
            .collect();
        assert!(bounds.windows(2).all(|w| w[1] <= w[0]), "{bounds:?}");
    }

    #[test]
    fn zero_and_constant_pullback_targets() {
        let ens = fixture(4.0);
        let grid = ens.default_grid();
        let zero = synthesize(&ens, &|_| [0.0, 0.0], 5, &grid).unwrap();
        assert_eq!(zero.measured_error, 0.0);
        assert!(zero.p_coeffs().iter().all(|&c| c == 0.0));
        // f = (0, c g): q ≡ c, r ≡ 0
        let g = ens.clone();
        let target = move |t: f64| [0.0, 0.7 * g.g(t)];
        for n in [1, 4, 33] {
            let syn = synthesize(&ens, &target, n, &grid).unwrap();
            assert!(syn.measured_error <= 1e-10);
        }
    }

    #[test]
    fn block_identity_for_random_polynomials() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for deg in 0..=9usize {
            let q: Vec<f64> = (0..=deg / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..=deg / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p = vec![C64::new(0.0, 0.0); 2 * q.len()];
            for j in 0..q.len() {
                p[2 * j] = re(q[j]);
                p[2 * j + 1] = re(r[j]);
            }
            let h = rng.gen_range(0.5..3.0);
            let m = CMat::from_row_slice(2, 2, &[re(0.0), re(h), re(1.0), re(0.0)]);
            let v = matrix_polynomial(&p, &m).column(0).into_owned();
            let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, x| acc * h + x);
            assert!((v[0] - re(eval(&q))).norm() < 1e-9);
            assert!((v[1] - re(eval(&r))).norm() < 1e-9);
        }
    }

    #[test]
    fn sincos_error_shrinks() {
        let ens = fixture(4.0);
        let grid = ens.default_grid();
        let e4 = synthesize(&ens, &sincos, 4, &grid).unwrap().measured_error;
        let e64 = synthesize(&ens, &sincos, 64, &grid).unwrap().measured_error;
        assert!(e64 < e4);
        let t = normalizing_transform(&ens, 0.3);
        let (a, b) = ens.system().unwrap().eval(0.3).unwrap();
        let ti = t.clone().try_inverse().unwrap();
        let ah = &t * a * &ti;
        assert!((ah[(0, 1)] - re(ens.h(0.3))).norm() < 1e-12);
        assert!(((&t * b)[(0, 0)] - re(1.0)).norm() < 1e-12);
    }
}
