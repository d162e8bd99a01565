//! Continuous restricted feedback transformation to Brunovsky form.

use ensemble_feedback::brunovsky::to_brunovsky;
use ensemble_feedback::builtins;
use ensemble_feedback::param_core::{ParamGrid, DEFAULT_RANK_TOL};

fn main() -> ensemble_feedback::Result<()> {
    let sys = builtins::example41a();
    let grid = ParamGrid::uniform(sys.arc(), 101)?;
    let res = to_brunovsky(&sys, &grid, DEFAULT_RANK_TOL)?;
    println!("Kronecker indices {:?}", res.kappa.values);
    println!("A_kappa =\n{}", res.canonical.a_kappa.map(|z| z.re));
    println!("B_kappa =\n{}", res.canonical.b_kappa.map(|z| z.re));
    println!(
        "max residuals: state {:.2e}, input {:.2e}; largest jump between neighbours {:.2e}",
        res.max_state_residual(),
        res.max_input_residual(),
        res.max_discontinuity()
    );
    println!("S is unit upper triangular to {:.1e}", res.transform.max_triangularity_defect());
    let mid = grid.len() / 2;
    println!("T at theta = {}:\n{}", grid.points()[mid], res.transform.t(mid).map(|z| z.re));
    Ok(())
}
