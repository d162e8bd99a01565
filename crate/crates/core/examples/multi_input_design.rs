//! Multi-input design through Brunovsky form, and a pair it must reject.

use ensemble_feedback::builtins;
use ensemble_feedback::ensemble_design::{multi_input_design, ConditionTolerances};
use ensemble_feedback::param_core::ParamGrid;

fn main() -> ensemble_feedback::Result<()> {
    let tols = ConditionTolerances::default();
    let sys = builtins::example41a();
    let grid = ParamGrid::uniform(sys.arc(), 201)?;
    let mi = multi_input_design(&sys, &grid, None, tols)?;
    println!("kappa {:?}, chains in order {:?}", mi.target.kappa.values, mi.target.chain_order);
    println!("B~ =\n{}", mi.target.b_tilde.map(|z| z.re));
    println!("max equivalence residual {:.2e}", mi.max_residual());
    println!("target pair satisfies all conditions: {}", mi.conditions.all_passed());

    let sys = builtins::example41b();
    let grid = grid.with_inserted(&builtins::special_points("example41b"))?;
    match multi_input_design(&sys, &grid, None, tols) {
        Ok(_) => println!("example41b unexpectedly accepted"),
        Err(e) => println!("example41b rejected: {e} (witness {:?})", e.witness()),
    }
    Ok(())
}
