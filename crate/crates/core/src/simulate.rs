//! Open-loop propagation of sampled ensembles and input synthesis.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, least_squares, re, CMat, CVec, C64};
use crate::param_core::{PairSamples, ParamGrid};

/// Fixed Tikhonov weight of [`least_squares_input`].
pub const LS_REGULARIZATION: f64 = 1e-10;

/// Relative size of the last kept term in the `∫ e^{As} ds` series.
const SERIES_TOL: f64 = 1e-14;

/// Above this condition number `A⁻¹(e^{A dt} − I)` is replaced by its series.
const INVERSE_COND_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InputMode {
    Discrete,
    PiecewiseConstant { dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    samples: Vec<CVec>,
    mode: InputMode,
}

impl InputSequence {
    pub fn new(samples: Vec<CVec>, mode: InputMode) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("an input sequence needs at least one sample".into()));
        };
        let m = first.len();
        if samples.iter().any(|u| u.len() != m) {
            return Err(Error::Dimension("input samples differ in length".into()));
        }
        if let InputMode::PiecewiseConstant { dt } = mode {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(Self { samples, mode })
    }

    pub fn discrete(samples: Vec<CVec>) -> Result<Self> {
        Self::new(samples, InputMode::Discrete)
    }

    pub fn piecewise_constant(samples: Vec<CVec>, dt: f64) -> Result<Self> {
        Self::new(samples, InputMode::PiecewiseConstant { dt })
    }

    /// Scalar input from real values.
    pub fn scalar(values: &[f64], mode: InputMode) -> Result<Self> {
        Self::new(values.iter().map(|&v| CVec::from_element(1, re(v))).collect(), mode)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn m(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[CVec] {
        &self.samples
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn with_mode(self, mode: InputMode) -> Result<Self> {
        Self::new(self.samples, mode)
    }
}

fn check_input(samples: &PairSamples, u: &InputSequence, k: usize) -> Result<()> {
    if u.m() != samples.m() {
        return Err(Error::Dimension(format!(
            "input has {} channels, the system {}",
            u.m(),
            samples.m()
        )));
    }
    if k >= samples.len() {
        return Err(Error::InvalidArgument(format!(
            "grid index {k} out of range ({} points)",
            samples.len()
        )));
    }
    Ok(())
}

/// `x_T` of `x_{t+1} = A x_t + B u_t`, `x_0 = 0`, at grid point `k`.
pub fn propagate_discrete(samples: &PairSamples, u: &InputSequence, k: usize) -> Result<CVec> {
    check_input(samples, u, k)?;
    if u.mode() != InputMode::Discrete {
        return Err(Error::InvalidArgument("propagate_discrete needs a discrete input".into()));
    }
    let (a, b) = (samples.a(k), samples.b(k));
    let mut x = CVec::zeros(samples.n());
    for ut in u.samples() {
        x = a * x + b * ut;
    }
    Ok(x)
}

/// Final state at every grid point, by the input's own mode.
pub fn propagate(samples: &PairSamples, u: &InputSequence) -> Result<Vec<CVec>> {
    (0..samples.len())
        .into_par_iter()
        .map(|k| match u.mode() {
            InputMode::Discrete => propagate_discrete(samples, u, k),
            InputMode::PiecewiseConstant { .. } => propagate_continuous(samples, u, k),
        })
        .collect()
}

/// Input sequence with `u_t = c_{T−1−t}` for ascending coefficients `c`, so that
/// discrete propagation yields `p(A) b`.
pub fn poly_to_input(coeffs: &[C64]) -> Result<InputSequence> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("polynomial has no coefficients".into()));
    }
    InputSequence::discrete(coeffs.iter().rev().map(|&c| CVec::from_element(1, c)).collect())
}

/// `(e^{A dt}, ∫₀^{dt} e^{As} ds)`.
pub fn interval_maps(a: &CMat, dt: f64) -> (CMat, CMat) {
    let n = a.nrows();
    let scaled = a * re(dt);
    let e = scaled.exp();
    let id = CMat::identity(n, n);
    if n > 0 && condition_number(a) < INVERSE_COND_LIMIT {
        if let Some(inv) = a.clone().try_inverse() {
            return (e.clone(), inv * (e - id));
        }
    }
    // Σ_j A^j dt^{j+1} / (j+1)!
    let mut term = id * re(dt);
    let mut sum = term.clone();
    for j in 1..1000 {
        term = &scaled * term * re(1.0 / (j + 1) as f64);
        sum += &term;
        if term.norm() <= SERIES_TOL * sum.norm() {
            break;
        }
    }
    (e, sum)
}

/// `φ(T, 0, u)` for piecewise-constant `u` at grid point `k`, exact per interval.
pub fn propagate_continuous(samples: &PairSamples, u: &InputSequence, k: usize) -> Result<CVec> {
    check_input(samples, u, k)?;
    let InputMode::PiecewiseConstant { dt } = u.mode() else {
        return Err(Error::InvalidArgument("propagate_continuous needs a piecewise-constant input".into()));
    };
    let (e, integral) = interval_maps(samples.a(k), dt);
    let gain = integral * samples.b(k);
    let mut x = CVec::zeros(samples.n());
    for ut in u.samples() {
        x = &e * x + &gain * ut;
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationPoint {
    pub theta: f64,
    pub state: Vec<C64>,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupError {
    pub value: f64,
    /// Grid point attaining the maximum.
    pub witness: f64,
    pub points: Vec<DeviationPoint>,
}

/// Maximum Euclidean deviation of `states` from `targets` over `grid`.
pub fn deviation(states: &[CVec], targets: &[CVec], grid: &ParamGrid) -> Result<SupError> {
    if states.len() != grid.len() || targets.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} states and {} targets on a {}-point grid",
            states.len(),
            targets.len(),
            grid.len()
        )));
    }
    let mut out = SupError {
        value: 0.0,
        witness: grid.points()[0],
        points: Vec::with_capacity(grid.len()),
    };
    for ((x, f), &theta) in states.iter().zip(targets).zip(grid.points()) {
        if x.len() != f.len() {
            return Err(Error::Dimension("state and target lengths differ".into()));
        }
        let d = (x - f).norm();
        if d > out.value {
            out.value = d;
            out.witness = theta;
        }
        out.points.push(DeviationPoint {
            theta,
            state: x.iter().copied().collect(),
            deviation: d,
        });
    }
    Ok(out)
}

/// `sup_θ ‖φ(T, 0, u)(θ) − f(θ)‖` over the sample grid.
pub fn sup_error(samples: &PairSamples, u: &InputSequence, targets: &[CVec]) -> Result<SupError> {
    let states = propagate(samples, u)?;
    deviation(&states, targets, samples.grid())
}

#[derive(Debug, Clone, Serialize)]
pub struct LeastSquaresInput {
    /// Ascending coefficients of `p`.
    pub coeffs: Vec<C64>,
    pub sup_error: f64,
    pub witness: f64,
    /// Condition number of the column-equilibrated stacked matrix.
    pub condition: f64,
    /// `Σ ‖p(A)b − f‖² + λ ‖c‖²`.
    pub objective: f64,
    pub regularization: f64,
}

impl LeastSquaresInput {
    pub fn input(&self) -> Result<InputSequence> {
        poly_to_input(&self.coeffs)
    }
}

/// Fits `p(A(θ)) b(θ) ≈ f(θ)` over the grid with degree `degree` by Tikhonov
/// regularized least squares (QR on the stacked, column-equilibrated system).
pub fn least_squares_input(samples: &PairSamples, targets: &[CVec], degree: usize) -> Result<LeastSquaresInput> {
    if samples.m() != 1 {
        return Err(Error::Dimension(format!(
            "least-squares input needs one input channel, the system has {}",
            samples.m()
        )));
    }
    let (n, count, cols) = (samples.n(), samples.len(), degree + 1);
    if targets.len() != count || targets.iter().any(|f| f.len() != n) {
        return Err(Error::Dimension("one target of length n per grid point expected".into()));
    }
    let rows = n * count;
    let mut design = CMat::zeros(rows + cols, cols);
    let mut rhs = CVec::zeros(rows + cols);
    for k in 0..count {
        let mut v = samples.b(k).column(0).into_owned();
        for c in 0..cols {
            design.view_mut((k * n, c), (n, 1)).copy_from(&v);
            v = samples.a(k) * v;
        }
        rhs.rows_mut(k * n, n).copy_from(&targets[k]);
    }
    let scales: Vec<f64> = (0..cols)
        .map(|c| {
            let s = design.view((0, c), (rows, 1)).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (c, &s) in scales.iter().enumerate() {
        design.view_mut((0, c), (rows, 1)).scale_mut(1.0 / s);
        // λ ‖c‖² with c = D⁻¹ y
        design[(rows + c, c)] = re(LS_REGULARIZATION.sqrt() / s);
    }
    let condition = condition_number(&design);
    let (y, resid) = least_squares(&design, &rhs);
    let coeffs: Vec<C64> = y.iter().zip(&scales).map(|(&yc, &s)| yc / s).collect();
    let u = poly_to_input(&coeffs)?;
    let err = sup_error(samples, &u, targets)?;
    Ok(LeastSquaresInput {
        coeffs,
        sup_error: err.value,
        witness: err.witness,
        condition,
        objective: resid * resid,
        regularization: LS_REGULARIZATION,
    })
}
