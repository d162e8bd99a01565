//! Seeded random instances for property checks and demos.
//!
//! Everything takes an explicit RNG so runs are reproducible from a seed.

use rand::Rng;

use crate::brunovsky::{brunovsky_pair, kronecker_basis};
use crate::error::{Error, Result};
use crate::feedback_group::{FeedbackTransform, TransformKind};
use crate::indices::{IndexKind, IndexVector};
use crate::linalg::{condition_number, re, CMat};
use crate::param_core::{PairSamples, ParamArc, ParamGrid, PolyMatrix, PolyScalar, SystemPair};

/// Real matrix with entries uniform in `[-1, 1]`.
pub fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| re(rng.gen_range(-1.0..=1.0)))
}

fn affine<R: Rng>(rng: &mut R, scale: f64) -> PolyScalar {
    PolyScalar::real(&[
        scale * rng.gen_range(-1.0..=1.0),
        scale * rng.gen_range(-1.0..=1.0),
    ])
}

fn poly_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> PolyMatrix {
    let entries = (0..rows * cols).map(|_| affine(rng, scale)).collect();
    PolyMatrix::from_rows(rows, cols, entries).expect("sized")
}

/// Unit upper (or lower) triangular matrix with affine entries off the diagonal.
fn unipotent<R: Rng>(rng: &mut R, n: usize, upper: bool, scale: f64) -> PolyMatrix {
    let mut u = PolyMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            if (upper && j > i) || (!upper && j < i) {
                u.set(i, j, affine(rng, scale));
            }
        }
    }
    u
}

/// Exact inverse of a unipotent triangular polynomial matrix `I + N`:
/// `Σ_{k<n} (−N)^k`, finite because `N` is nilpotent.
fn unipotent_inverse(u: &PolyMatrix) -> PolyMatrix {
    let n = u.nrows();
    let minus_one = PolyMatrix::constant(&(CMat::identity(n, n) * re(-1.0)));
    let neg_nil = u
        .add(&minus_one)
        .and_then(|nil| minus_one.mul(&nil))
        .expect("square");
    let mut term = PolyMatrix::identity(n);
    let mut acc = PolyMatrix::identity(n);
    for _ in 1..n {
        term = term.mul(&neg_nil).expect("square");
        acc = acc.add(&term).expect("square");
    }
    acc
}

struct Parts {
    t: PolyMatrix,
    t_inv: PolyMatrix,
    f: PolyMatrix,
    s: PolyMatrix,
    s_inv: PolyMatrix,
}

fn parts<R: Rng>(rng: &mut R, n: usize, m: usize) -> Parts {
    // T = D L U with D constant diagonal, L and U unipotent: T⁻¹ stays polynomial
    let d: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.5..=2.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let dm = PolyMatrix::constant(&CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        d.iter().map(|&x| re(x)),
    )));
    let dm_inv = PolyMatrix::constant(&CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        d.iter().map(|&x| re(1.0 / x)),
    )));
    let l = unipotent(rng, n, false, 0.4);
    let u = unipotent(rng, n, true, 0.4);
    let t = dm.mul(&l).and_then(|x| x.mul(&u)).expect("square");
    let t_inv = unipotent_inverse(&u)
        .mul(&unipotent_inverse(&l))
        .and_then(|x| x.mul(&dm_inv))
        .expect("square");
    let f = poly_matrix(rng, m, n, 1.0);
    let s = unipotent(rng, m, true, 1.0);
    let s_inv = unipotent_inverse(&s);
    Parts {
        t,
        t_inv,
        f,
        s,
        s_inv,
    }
}

/// Restricted transformation with affine `F`, `S` and `T = D L U`
/// (so `det T` is a nonzero constant).
pub fn restricted_transform<R: Rng>(rng: &mut R, n: usize, m: usize, arc: ParamArc) -> FeedbackTransform {
    let p = parts(rng, n, m);
    FeedbackTransform::new(p.t, p.f, p.s, arc, TransformKind::Restricted).expect("restricted by construction")
}

/// Pair with affine entries in θ.
pub fn system<R: Rng>(rng: &mut R, n: usize, m: usize, arc: ParamArc) -> SystemPair {
    SystemPair::new(poly_matrix(rng, n, n, 1.0), poly_matrix(rng, n, m, 1.0), arc).expect("sized")
}

pub fn pair_samples<R: Rng>(rng: &mut R, grid: &ParamGrid, n: usize, m: usize) -> PairSamples {
    system(rng, n, m, grid.arc()).sample(grid).expect("grid lies in the arc")
}

/// Constant pair with uniform entries.
pub fn constant_pair<R: Rng>(rng: &mut R, n: usize, m: usize) -> (CMat, CMat) {
    (matrix(rng, n, n), matrix(rng, n, m))
}

/// Polynomial pair `t·(A_κ, B_κ)` for a random restricted `t`; its Kronecker
/// indices equal `kappa` at every θ. Candidates whose ordered Kronecker basis
/// has condition number `≥ max_cond` somewhere on `grid` are redrawn.
pub fn constant_kappa_system<R: Rng>(
    rng: &mut R,
    kappa: &[usize],
    grid: &ParamGrid,
    max_cond: f64,
) -> Result<SystemPair> {
    let n: usize = kappa.iter().sum();
    let m = kappa.len();
    let iv = IndexVector {
        values: kappa.to_vec(),
        theta: f64::NAN,
        kind: IndexKind::Kronecker,
    };
    let canon = brunovsky_pair(&iv)?;
    let ak = PolyMatrix::constant(&canon.a_kappa);
    let bk = PolyMatrix::constant(&canon.b_kappa);
    for _ in 0..200 {
        let p = parts(rng, n, m);
        // A = T (A_κ − B_κ S⁻¹ F) T⁻¹, B = T B_κ S⁻¹
        let inner = ak.add(&neg(&bk.mul(&p.s_inv)?.mul(&p.f)?))?;
        let a = p.t.mul(&inner)?.mul(&p.t_inv)?;
        let b = p.t.mul(&bk)?.mul(&p.s_inv)?;
        let sys = SystemPair::new(a, b, grid.arc())?;
        let ok = grid.points().iter().all(|&theta| {
            let (a, b) = sys.eval(theta).expect("in arc");
            kronecker_basis(&a, &b, kappa)
                .map(|basis| condition_number(&basis) < max_cond)
                .unwrap_or(false)
        });
        if ok {
            return Ok(sys);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no well-conditioned pair with indices {kappa:?} after 200 draws"
    )))
}

fn neg(p: &PolyMatrix) -> PolyMatrix {
    let mut out = p.clone();
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            out.set(i, j, p.get(i, j).scale(re(-1.0)));
        }
    }
    out
}

/// Index vector with `1 ≤ m ≤ max_m` entries summing to `n ∈ [1, max_n]`,
/// zeros allowed.
pub fn kappa<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> Vec<usize> {
    loop {
        let m = rng.gen_range(1..=max_m);
        let n = rng.gen_range(m.max(2)..=max_n);
        let mut k = vec![0usize; m];
        for _ in 0..n {
            k[rng.gen_range(0..m)] += 1;
        }
        if k.iter().sum::<usize>() == n {
            return k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::kronecker_indices;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unipotent_inverse_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = unipotent(&mut rng, 4, true, 1.0);
        let prod = u.mul(&unipotent_inverse(&u)).unwrap();
        for theta in [-1.0, 0.2, 0.9] {
            assert!(max_abs(&(prod.eval(theta) - CMat::identity(4, 4))) < 1e-13);
        }
    }

    #[test]
    fn constant_kappa_pairs_have_their_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arc = ParamArc::new(-1.0, 1.0).unwrap();
        let grid = ParamGrid::uniform(arc, 11).unwrap();
        for kappa in [vec![2, 2], vec![0, 3], vec![1, 2, 1], vec![3, 0]] {
            let sys = constant_kappa_system(&mut rng, &kappa, &grid, 1e6).unwrap();
            for &theta in grid.points() {
                let (a, b) = sys.eval(theta).unwrap();
                assert_eq!(kronecker_indices(&a, &b, 1e-9).unwrap().values, kappa);
            }
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = matrix(&mut ChaCha8Rng::seed_from_u64(9), 3, 3);
        let b = matrix(&mut ChaCha8Rng::seed_from_u64(9), 3, 3);
        assert_eq!(a, b);
    }
}
