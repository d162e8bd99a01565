//! Bernstein polynomials on `[0, 1]`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `B_{n,f}(x) = Σ_i f(i/n) C(n,i) x^i (1−x)^{n−i}`, stored by its Bernstein
/// coefficients `f(i/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bernstein {
    coeffs: Vec<f64>,
}

impl Bernstein {
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a Bernstein polynomial needs a coefficient");
        Self { coeffs }
    }

    /// Bernstein polynomial of degree `n` for `f` sampled at `i/n`.
    pub fn approximate(f: impl Fn(f64) -> f64, n: usize) -> Self {
        assert!(n >= 1, "degree must be at least 1");
        let coeffs = (0..=n)
            .map(|i| f(if i == n { 1.0 } else { i as f64 / n as f64 }))
            .collect();
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// de Casteljau evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut work = self.coeffs.clone();
        let n = work.len();
        for r in 1..n {
            for i in 0..n - r {
                work[i] = (1.0 - x) * work[i] + x * work[i + 1];
            }
        }
        work[0]
    }

    /// Ascending monomial coefficients in `x`, correctly rounded.
    pub fn power_coeffs(&self) -> Vec<f64> {
        self.power_coeffs_on(0.0, 1.0)
    }

    /// Monomial coefficients in `z` of `z ↦ B((z − lo)/(hi − lo))`, computed in
    /// exact integer arithmetic and rounded once. The expansion cancels
    /// catastrophically in floating point beyond moderate degree.
    pub fn power_coeffs_on(&self, lo: f64, hi: f64) -> Vec<f64> {
        assert!(lo.is_finite() && hi.is_finite() && lo < hi, "need lo < hi");
        assert!(self.coeffs.iter().all(|c| c.is_finite()), "coefficients must be finite");
        let n = self.degree();
        // c_i = C_i 2^e
        let (ints, e) = common_scale(&self.coeffs);
        if ints.iter().all(|c| c.is_zero()) {
            return vec![0.0; n + 1];
        }
        // x-monomials: a_k = C(n,k) Δ^k c_0
        let mut diff = ints;
        let mut ax = Vec::with_capacity(n + 1);
        let mut binom = BigInt::one();
        for k in 0..=n {
            ax.push(&diff[0] * &binom);
            binom = binom * (n - k) / (k + 1);
            for i in 0..diff.len() - 1 {
                diff[i] = &diff[i + 1] - &diff[i];
            }
            diff.pop();
        }
        // z = 2^s ζ, lo = 2^s L, hi − lo = 2^s W:
        // B = 2^e Q(ζ) / W^n with Q(ζ) = Σ a_k (ζ − L)^k W^{n−k}
        let (ends, s) = common_scale(&[lo, hi]);
        let lo_int = ends[0].clone();
        let width = &ends[1] - &ends[0];
        let mut w_pow = vec![BigInt::one(); n + 1];
        for k in 1..=n {
            w_pow[k] = &w_pow[k - 1] * &width;
        }
        let mut q = vec![ax[n].clone()];
        for k in (0..n).rev() {
            // q ← q · (ζ − L) + a_k W^{n−k}
            let mut next = vec![BigInt::zero(); q.len() + 1];
            for (j, qj) in q.iter().enumerate() {
                next[j + 1] += qj;
                next[j] -= qj * &lo_int;
            }
            next[0] += &ax[k] * &w_pow[n - k];
            q = next;
        }
        q.into_iter()
            .enumerate()
            .map(|(j, qj)| {
                let shift = e - s * j as i64;
                let (num, den) = if shift >= 0 {
                    (qj << shift as usize, w_pow[n].clone())
                } else {
                    (qj, &w_pow[n] << (-shift) as usize)
                };
                BigRational::new_raw(num, den).to_f64().unwrap_or(f64::NAN)
            })
            .collect()
    }
}

/// Writes finite floats as `X_i 2^e` with integers `X_i` and one shared `e`.
fn common_scale(values: &[f64]) -> (Vec<BigInt>, i64) {
    let parts: Vec<(i64, i64)> = values.iter().map(|&x| decode(x)).collect();
    let e = parts
        .iter()
        .filter(|p| p.0 != 0)
        .map(|p| p.1)
        .min()
        .unwrap_or(0);
    let ints = parts
        .iter()
        .map(|&(mant, exp)| {
            if mant == 0 {
                BigInt::zero()
            } else {
                BigInt::from(mant) << (exp - e) as usize
            }
        })
        .collect();
    (ints, e)
}

/// `x = mant · 2^exp` exactly.
fn decode(x: f64) -> (i64, i64) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let mant = if biased == 0 { frac << 1 } else { frac | (1 << 52) };
    (sign * mant, biased - 1075)
}

/// Convenience form of [`Bernstein::approximate`].
pub fn bernstein(f: impl Fn(f64) -> f64, n: usize) -> Bernstein {
    Bernstein::approximate(f, n)
}

/// Binomial coefficient as a float (exact while it fits in 53 bits).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    // the running product is an integer up to rounding
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}
