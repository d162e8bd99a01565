//! Least-squares polynomial inputs compared with the Bernstein construction.

use ensemble_feedback::linalg::{CVec, C64};
use ensemble_feedback::oscillator::{sincos, synthesize, OscillatorEnsemble};
use ensemble_feedback::simulate::least_squares_input;

fn main() -> ensemble_feedback::Result<()> {
    let ens = OscillatorEnsemble::new(&[2.0, 1.0], 1.0, 4.0)?;
    let grid = ens.default_grid();
    let samples = ens.system()?.sample(&grid)?;
    let targets: Vec<CVec> = grid
        .points()
        .iter()
        .map(|&t| {
            let v = sincos(t);
            CVec::from_vec(vec![C64::new(v[0], 0.0), C64::new(v[1], 0.0)])
        })
        .collect();
    println!("{:>6} {:>14} {:>14} {:>10}", "deg p", "least squares", "Bernstein", "cond");
    for n in [1, 3, 5, 7, 11] {
        let ls = least_squares_input(&samples, &targets, 2 * n + 1)?;
        let bern = synthesize(&ens, &sincos, n, &grid)?;
        println!(
            "{:>6} {:>14.4e} {:>14.4e} {:>10.2e}",
            2 * n + 1,
            ls.sup_error,
            bern.measured_error,
            ls.condition
        );
    }
    Ok(())
}
