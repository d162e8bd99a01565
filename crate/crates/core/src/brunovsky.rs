//! Pointwise restricted feedback transformation to Brunovsky form.
//!
//! For a pair with constant Kronecker indices κ the construction at each θ:
//!
//! 1. Writes `A^{κ_i} b_i` in the vectors that preceded it in the Kronecker
//!    scan: `A^{l-1} b_j` (coefficient `β_{ijl}`) and, for earlier columns
//!    with larger index, `A^{κ_i} b_j` (coefficient `α_{ji}`). Those vectors
//!    are part of the selected basis, so the coefficients are unique.
//!    `U = I − (α_{ji})_{j<i}` clears the `α` terms: `B̃ = B U` satisfies
//!    `A^{κ_i} b̃_i = Σ_l A^{l-1} γ_{il}` with `γ_{il} = Σ_j β̃_{ijl} b̃_j`
//!    and `β̃_{i·l} = U⁻¹ β_{i·l}`.
//! 2. Builds the chain `v_{1i} = b̃_i`, `v_{l+1,i} = A v_{li} − γ_{i(κ_i+1−l)}`,
//!    which ends with `A v_{κ_i i} = γ_{i1}`; `T = (v_{11} … v_{κ_1 1} v_{12} …)`.
//! 3. `T⁻¹ B̃ = B_κ` because every `b̃_i` is a chain head (or zero).
//! 4. `F` collects the `β̃` so that `T⁻¹ A T − B_κ F = A_κ`.
//!
//! The emitted transformation is `(T⁻¹, F T⁻¹, U⁻¹)`, which satisfies
//! `T⁻¹A − A_κT⁻¹ = B_κ (F T⁻¹)` and `T⁻¹B = B_κ U⁻¹`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback_group::{equivalence_residual, ResidualPoint, SampledTransform, TransformKind, INVERTIBILITY_TOL};
use crate::indices::{indices_constant_samples, IndexKind, IndexVector};
use crate::linalg::{self, condition_number, least_squares, op_norm, CMat, CVec, ONE};
use crate::param_core::{check_tol, PairSamples, ParamGrid, SystemPair};

/// Kronecker-basis condition number above which a point is refused.
pub const MAX_BASIS_CONDITION: f64 = 1e12;
/// Relative residual allowed when expanding `A^{κ_i} b_i` in its predecessors.
pub const STEP1_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BrunovskyPair {
    pub kappa: IndexVector,
    pub a_kappa: CMat,
    pub b_kappa: CMat,
}

/// First row of each nonempty block, i.e. the position of `v_{1i}`.
fn block_starts(kappa: &[usize]) -> Vec<usize> {
    kappa
        .iter()
        .scan(0, |acc, &k| {
            let start = *acc;
            *acc += k;
            Some(start)
        })
        .collect()
}

/// Block-diagonal shift matrices and block unit columns; a zero index gives
/// no block and a zero column.
pub fn brunovsky_pair(kappa: &IndexVector) -> Result<BrunovskyPair> {
    let n: usize = kappa.values.iter().sum();
    let m = kappa.values.len();
    if n == 0 || m == 0 {
        return Err(Error::Structural(format!(
            "indices {:?} do not describe a reachable pair",
            kappa.values
        )));
    }
    let mut a = CMat::zeros(n, n);
    let mut b = CMat::zeros(n, m);
    for (i, (&k, start)) in kappa.values.iter().zip(block_starts(&kappa.values)).enumerate() {
        if k == 0 {
            continue;
        }
        b[(start, i)] = ONE;
        for l in 1..k {
            a[(start + l, start + l - 1)] = ONE;
        }
    }
    Ok(BrunovskyPair {
        kappa: kappa.clone(),
        a_kappa: a,
        b_kappa: b,
    })
}

/// Checks the index sum against `n` and builds the canonical pair.
pub fn brunovsky_pair_for(kappa: &IndexVector, n: usize) -> Result<BrunovskyPair> {
    let sum: usize = kappa.values.iter().sum();
    if sum != n {
        return Err(Error::Structural(format!(
            "indices {:?} sum to {sum}, expected {n}",
            kappa.values
        )));
    }
    brunovsky_pair(kappa)
}

/// Columns `A^l b_j`, `l < κ_j`, grouped by column `j`.
pub fn kronecker_basis(a: &CMat, b: &CMat, kappa: &[usize]) -> Result<CMat> {
    let n = a.nrows();
    if kappa.len() != b.ncols() || kappa.iter().sum::<usize>() != n {
        return Err(Error::Dimension(format!(
            "indices {kappa:?} do not fit n = {n}, m = {}",
            b.ncols()
        )));
    }
    let mut out = CMat::zeros(n, n);
    let mut col = 0;
    for (j, &k) in kappa.iter().enumerate() {
        let mut v: CVec = b.column(j).into_owned();
        for _ in 0..k {
            out.set_column(col, &v);
            col += 1;
            v = a * v;
        }
    }
    Ok(out)
}

/// Step 1 output at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoefficients {
    /// `alpha[(j, i)] = α_{ji}`, nonzero only for `j < i`.
    pub alpha: CMat,
    /// `beta[i]` is `m × κ_i` with entry `(j, l-1) = β_{ijl}`.
    pub beta: Vec<CMat>,
    /// `beta_tilde[i] = U⁻¹ · beta[i]`.
    pub beta_tilde: Vec<CMat>,
    pub u: CMat,
    pub u_inv: CMat,
    /// Relative residual of each expansion of `A^{κ_i} b_i`.
    pub residuals: Vec<f64>,
    pub basis_condition: f64,
}

pub fn step1_coefficients(a: &CMat, b: &CMat, kappa: &IndexVector, theta: f64) -> Result<StepCoefficients> {
    let k = &kappa.values;
    let n = a.nrows();
    let m = b.ncols();
    let basis = kronecker_basis(a, b, k)?;
    let basis_condition = condition_number(&basis);
    if !(basis_condition <= MAX_BASIS_CONDITION) {
        return Err(Error::IllConditioned {
            what: "Kronecker basis",
            theta,
            cond: basis_condition,
        });
    }
    let max_k = k.iter().copied().max().unwrap_or(0);
    // powers[p][j] = A^p b_j
    let mut powers: Vec<CMat> = vec![b.clone()];
    for p in 0..max_k {
        let next = a * &powers[p];
        powers.push(next);
    }

    let mut alpha = CMat::zeros(m, m);
    let mut beta = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for i in 0..m {
        let ki = k[i];
        // (column j, power l-1) for the β terms, then the α columns
        let beta_slots: Vec<(usize, usize)> = (0..ki)
            .flat_map(|l| (0..m).filter(move |&j| l < k[j]).map(move |j| (j, l)))
            .collect();
        let alpha_slots: Vec<usize> = (0..i).filter(|&j| k[j] > ki).collect();
        let mut mat = CMat::zeros(n, beta_slots.len() + alpha_slots.len());
        for (c, &(j, l)) in beta_slots.iter().enumerate() {
            mat.set_column(c, &powers[l].column(j));
        }
        for (c, &j) in alpha_slots.iter().enumerate() {
            mat.set_column(beta_slots.len() + c, &powers[ki].column(j));
        }
        let rhs: CVec = powers[ki].column(i).into_owned();
        let (x, resid) = least_squares(&mat, &rhs);
        let scale = (0..mat.ncols())
            .map(|c| mat.column(c).norm())
            .fold(rhs.norm(), f64::max);
        let rel = if scale > 0.0 { resid / scale } else { 0.0 };
        if rel > STEP1_RESIDUAL_TOL {
            return Err(Error::precondition(
                format!(
                    "A^{ki} b_{} is not spanned by its predecessors (relative residual {rel:.3e}); \
                     the Kronecker indices are not {:?} here",
                    i + 1,
                    k
                ),
                Some(theta),
            ));
        }
        residuals.push(rel);
        let mut bi = CMat::zeros(m, ki);
        for (c, &(j, l)) in beta_slots.iter().enumerate() {
            bi[(j, l)] = x[c];
        }
        for (c, &j) in alpha_slots.iter().enumerate() {
            alpha[(j, i)] = x[beta_slots.len() + c];
        }
        beta.push(bi);
    }

    let mut u = CMat::identity(m, m);
    for i in 0..m {
        for j in 0..i {
            u[(j, i)] = -alpha[(j, i)];
        }
    }
    let u_inv = u
        .solve_upper_triangular(&CMat::identity(m, m))
        .ok_or(Error::Singular { what: "U", theta })?;
    let beta_tilde = beta.iter().map(|bi| &u_inv * bi).collect();
    Ok(StepCoefficients {
        alpha,
        beta,
        beta_tilde,
        u,
        u_inv,
        residuals,
        basis_condition,
    })
}

/// `γ_{il} = Σ_j β̃_{ijl} b̃_j` for `l = 1..κ_i` (column `l-1`).
fn gammas(b_tilde: &CMat, beta_tilde_i: &CMat) -> CMat {
    b_tilde * beta_tilde_i
}

/// The chain basis `T = (v_{11} … v_{κ_1 1} v_{12} … v_{κ_m m})`.
pub fn step2_basis(
    a: &CMat,
    b_tilde: &CMat,
    kappa: &IndexVector,
    beta_tilde: &[CMat],
    theta: f64,
) -> Result<CMat> {
    let k = &kappa.values;
    let n = a.nrows();
    let mut t = CMat::zeros(n, n);
    for (i, start) in block_starts(k).into_iter().enumerate() {
        let ki = k[i];
        if ki == 0 {
            continue;
        }
        let gamma = gammas(b_tilde, &beta_tilde[i]);
        let mut v: CVec = b_tilde.column(i).into_owned();
        t.set_column(start, &v);
        for l in 1..ki {
            // v_{l+1} = A v_l − γ_{i(κ_i+1−l)}
            v = a * v - gamma.column(ki - l);
            t.set_column(start + l, &v);
        }
    }
    linalg::checked_inverse(&t, INVERTIBILITY_TOL, "T", theta)?;
    Ok(t)
}

/// `F` with `F[j][pos(l, i)] = β̃_{ij(κ_i+1−l)}`; rows of zero-index columns
/// are zero.
pub fn step4_feedback(beta_tilde: &[CMat], kappa: &IndexVector) -> CMat {
    let k = &kappa.values;
    let n: usize = k.iter().sum();
    let m = k.len();
    let mut f = CMat::zeros(m, n);
    for (i, start) in block_starts(k).into_iter().enumerate() {
        let ki = k[i];
        for l in 1..=ki {
            for j in 0..m {
                if k[j] > 0 {
                    f[(j, start + l - 1)] = beta_tilde[i][(j, ki - l)];
                }
            }
        }
    }
    f
}

/// Everything produced at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConstruction {
    pub coefficients: StepCoefficients,
    pub b_tilde: CMat,
    /// Chain basis; the emitted state transform is its inverse.
    pub basis: CMat,
    pub f: CMat,
    /// `(T⁻¹, F T⁻¹, U⁻¹)`
    pub transform: (CMat, CMat, CMat),
}

pub fn construct_at(a: &CMat, b: &CMat, kappa: &IndexVector, theta: f64) -> Result<PointConstruction> {
    let coefficients = step1_coefficients(a, b, kappa, theta)?;
    let b_tilde = b * &coefficients.u;
    let basis = step2_basis(a, &b_tilde, kappa, &coefficients.beta_tilde, theta)?;
    let f = step4_feedback(&coefficients.beta_tilde, kappa);
    let t_inv = linalg::checked_inverse(&basis, INVERTIBILITY_TOL, "T", theta)?;
    let transform = (t_inv.clone(), &f * &t_inv, coefficients.u_inv.clone());
    Ok(PointConstruction {
        coefficients,
        b_tilde,
        basis,
        f,
        transform,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BrunovskyPoint {
    pub theta: f64,
    /// `‖T A − A_κ T − B_κ F‖` for the emitted transform.
    pub state_residual: f64,
    /// `‖T B − B_κ S‖` for the emitted transform.
    pub input_residual: f64,
    /// `‖T(θ_k) − T(θ_{k-1})‖` of the emitted state transform (0 at the first point).
    pub discontinuity: f64,
    pub basis_condition: f64,
    pub step1_residual: f64,
}

#[derive(Debug, Clone)]
pub struct BrunovskyResult {
    pub kappa: IndexVector,
    pub canonical: BrunovskyPair,
    pub transform: SampledTransform,
    pub points: Vec<BrunovskyPoint>,
}

impl BrunovskyResult {
    pub fn max_state_residual(&self) -> f64 {
        self.points.iter().map(|p| p.state_residual).fold(0.0, f64::max)
    }

    pub fn max_input_residual(&self) -> f64 {
        self.points.iter().map(|p| p.input_residual).fold(0.0, f64::max)
    }

    pub fn max_discontinuity(&self) -> f64 {
        self.points.iter().map(|p| p.discontinuity).fold(0.0, f64::max)
    }

    pub fn canonical_samples(&self) -> PairSamples {
        PairSamples::constant(
            self.transform.grid().clone(),
            &self.canonical.a_kappa,
            &self.canonical.b_kappa,
        )
        .expect("consistent shapes")
    }
}

/// Constant Kronecker indices over the samples, or the error naming the first
/// point that differs (or is unreachable).
pub fn constant_kronecker(samples: &PairSamples, tol: f64) -> Result<IndexVector> {
    let rep = indices_constant_samples(samples, IndexKind::Kronecker, tol)?;
    if let Some(mm) = rep.first_mismatch {
        return Err(Error::NonConstantIndices {
            kind: IndexKind::Kronecker,
            reference_theta: rep.reference.theta,
            reference: rep.reference.values,
            theta: mm.theta,
            found: mm.values,
        });
    }
    if rep.reference.sum() != samples.n() {
        return Err(Error::precondition(
            format!(
                "pair is not reachable: Kronecker indices {:?} sum to {} < n = {}",
                rep.reference.values,
                rep.reference.sum(),
                samples.n()
            ),
            Some(rep.reference.theta),
        ));
    }
    let mut kappa = rep.reference;
    kappa.theta = f64::NAN;
    Ok(kappa)
}

pub fn to_brunovsky_samples(samples: &PairSamples, tol: f64) -> Result<BrunovskyResult> {
    check_tol(tol)?;
    let kappa = constant_kronecker(samples, tol)?;
    let canonical = brunovsky_pair_for(&kappa, samples.n())?;
    let built: Vec<PointConstruction> = (0..samples.len())
        .into_par_iter()
        .map(|k| construct_at(samples.a(k), samples.b(k), &kappa, samples.theta(k)))
        .collect::<Result<_>>()?;

    let mut t = Vec::with_capacity(built.len());
    let mut f = Vec::with_capacity(built.len());
    let mut s = Vec::with_capacity(built.len());
    for pc in &built {
        t.push(pc.transform.0.clone());
        f.push(pc.transform.1.clone());
        s.push(pc.transform.2.clone());
    }
    let transform = SampledTransform::new(samples.grid().clone(), t, f, s, TransformKind::Restricted)?;
    let canon_samples = PairSamples::constant(samples.grid().clone(), &canonical.a_kappa, &canonical.b_kappa)?;
    let residuals: Vec<ResidualPoint> = equivalence_residual(&transform, samples, &canon_samples)?;
    let points = residuals
        .iter()
        .enumerate()
        .map(|(k, r)| BrunovskyPoint {
            theta: r.theta,
            state_residual: r.state,
            input_residual: r.input,
            discontinuity: if k == 0 {
                0.0
            } else {
                op_norm(&(transform.t(k) - transform.t(k - 1)))
            },
            basis_condition: built[k].coefficients.basis_condition,
            step1_residual: built[k].coefficients.residuals.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    Ok(BrunovskyResult {
        kappa,
        canonical,
        transform,
        points,
    })
}

pub fn to_brunovsky(sys: &SystemPair, grid: &ParamGrid, tol: f64) -> Result<BrunovskyResult> {
    to_brunovsky_samples(&sys.sample(grid)?, tol)
}
