//! Eigenvalue-arc feedback for a single-input oscillator ensemble.

use ensemble_feedback::builtins;
use ensemble_feedback::ensemble_design::{ackermann_feedback, check_conditions, ConditionTolerances, EigenArcDesign};
use ensemble_feedback::param_core::{ParamGrid, DEFAULT_RANK_TOL};

fn main() -> ensemble_feedback::Result<()> {
    let sys = builtins::oscillator(&[2.0, 1.0], 4.0, 1.0)?;
    let grid = ParamGrid::uniform(sys.arc(), 101)?;
    let design = EigenArcDesign::new(sys.n(), None, sys.arc())?;
    for t in [grid.points()[0], grid.points()[50], grid.points()[100]] {
        let ev: Vec<String> = design.eigen_arcs(t)?.iter().map(|z| format!("{:.3}{:+.3}i", z.re, z.im)).collect();
        println!("theta = {t:.2}: eigenvalues {}", ev.join(", "));
    }
    let si = ackermann_feedback(&sys, &design, &grid, DEFAULT_RANK_TOL)?;
    println!("closed-loop coefficient mismatch {:.2e}", si.max_coeff_mismatch());
    let report = check_conditions(&si.closed_loop, ConditionTolerances::default())?;
    for (name, c) in [("N1", &report.n1), ("N2", &report.n2), ("S", &report.s), ("H", &report.h)] {
        println!("{name}: passed {} (margin {:.3e})", c.passed, c.margin);
    }
    Ok(())
}
