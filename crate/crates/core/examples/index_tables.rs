//! Kronecker and Hermite indices of the two four-dimensional example pairs.

use std::f64::consts::FRAC_1_SQRT_2;

use ensemble_feedback::builtins;
use ensemble_feedback::indices::{indices_constant, kronecker_scan, IndexKind};
use ensemble_feedback::param_core::{ParamGrid, DEFAULT_RANK_TOL};

fn main() -> ensemble_feedback::Result<()> {
    for (name, sys) in [("example41a", builtins::example41a()), ("example41b", builtins::example41b())] {
        let grid = ParamGrid::uniform(sys.arc(), 201)?.with_inserted(&builtins::special_points(name))?;
        println!("{name}");
        for kind in [IndexKind::Kronecker, IndexKind::Hermite] {
            let c = indices_constant(&sys, &grid, kind, DEFAULT_RANK_TOL)?;
            match &c.first_mismatch {
                None => println!("  {kind:?}: {:?} on the whole grid", c.reference.values),
                Some(m) => println!(
                    "  {kind:?}: {:?} at theta = {:.4}, but {:?} at theta = {:.4}",
                    c.reference.values, c.reference.theta, m.values, m.theta
                ),
            }
        }
    }

    // the selection record at a point where pair (b) drops
    let (a, b) = builtins::example41b().eval(FRAC_1_SQRT_2)?;
    let scan = kronecker_scan(&a, &b, DEFAULT_RANK_TOL, FRAC_1_SQRT_2)?;
    println!("scan of example41b at 1/sqrt(2):");
    for s in &scan.steps {
        println!(
            "  A^{} b_{}: residual {:.2e} {}",
            s.power,
            s.column + 1,
            s.relative_residual,
            if s.selected { "kept" } else { "dependent" }
        );
    }
    Ok(())
}
