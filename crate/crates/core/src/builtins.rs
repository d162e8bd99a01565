//! Named example systems.

use crate::error::{Error, Result};
use crate::param_core::{ParamArc, PolyMatrix, PolyScalar, SystemPair};

fn p(coeffs: &[f64]) -> PolyScalar {
    PolyScalar::real(coeffs)
}

fn z() -> PolyScalar {
    PolyScalar::zero()
}

fn two_input_b() -> PolyMatrix {
    // columns e2 and e4
    PolyMatrix::from_rows(
        4,
        2,
        vec![z(), z(), p(&[1.0]), z(), z(), z(), z(), p(&[1.0])],
    )
    .expect("4x2")
}

fn unit_arc() -> ParamArc {
    ParamArc::new(-1.0, 1.0).expect("valid interval")
}

/// Pair with constant Kronecker indices (2,2) whose Hermite indices drop
/// from (3,1) to (2,2) at θ = 0.
pub fn example41a() -> SystemPair {
    #[rustfmt::skip]
    let a = vec![
        z(),                p(&[1.0]),       z(), z(),
        p(&[0.0, 0.0, 2.0]), z(),            z(), p(&[0.0, 2.0]),
        z(),                z(),             z(), p(&[1.0]),
        z(),                p(&[0.0, -2.0]), z(), z(),
    ];
    let a = PolyMatrix::from_rows(4, 4, a).expect("4x4");
    SystemPair::new(a, two_input_b(), unit_arc()).expect("consistent shapes")
}

/// Pair with constant Hermite indices (3,1) whose Kronecker indices change at
/// θ = ±1/√2.
pub fn example41b() -> SystemPair {
    #[rustfmt::skip]
    let a = vec![
        z(),       z(),       p(&[2.0]), p(&[-0.5, 0.0, 1.0]),
        p(&[1.0]), z(),       z(),       p(&[1.0]),
        z(),       p(&[1.0]), z(),       z(),
        z(),       z(),       z(),       z(),
    ];
    let a = PolyMatrix::from_rows(4, 4, a).expect("4x4");
    SystemPair::new(a, two_input_b(), unit_arc()).expect("consistent shapes")
}

/// Harmonic oscillator ensemble under the constant feedback `u = k·y + v`:
/// `A_k(θ) = [[0, 1], [k g(θ) − θ², 0]]`, `b_g(θ) = (0, g(θ))ᵀ` on `[−θ*, θ*]`.
pub fn oscillator(g_coeffs: &[f64], k: f64, theta_star: f64) -> Result<SystemPair> {
    if !(theta_star > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta_star must be positive, got {theta_star}"
        )));
    }
    if g_coeffs.is_empty() {
        return Err(Error::InvalidArgument("g needs at least one coefficient".into()));
    }
    let g = p(g_coeffs);
    let h = g
        .scale(crate::linalg::re(k))
        .add(&p(&[0.0, 0.0, -1.0]));
    let a = PolyMatrix::from_rows(2, 2, vec![z(), p(&[1.0]), h, z()])?;
    let b = PolyMatrix::from_rows(2, 1, vec![z(), g])?;
    SystemPair::new(a, b, ParamArc::new(-theta_star, theta_star)?)
}

/// Parameter values where the named builtin changes index structure; they are
/// always inserted into grids built for that system.
pub fn special_points(name: &str) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match name {
        "example41a" => vec![0.0],
        "example41b" => vec![-s, s],
        _ => Vec::new(),
    }
}
