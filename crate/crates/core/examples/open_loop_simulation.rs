//! Replaying a synthesized polynomial as a discrete and a sampled input.

use ensemble_feedback::linalg::{CVec, C64};
use ensemble_feedback::oscillator::{sincos, synthesize, OscillatorEnsemble};
use ensemble_feedback::simulate::{poly_to_input, sup_error, InputMode};

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

    for n in [4, 16, 32] {
        let syn = synthesize(&ens, &sincos, n, &grid)?;
        let p: Vec<C64> = syn.p_coeffs().into_iter().map(|x| C64::new(x, 0.0)).collect();
        let u = poly_to_input(&p)?;
        let err = sup_error(&samples, &u, &targets)?;
        println!(
            "n = {n:>2}: {} steps, sup error {:.4e} at theta = {:.3} (synthesis reported {:.4e})",
            u.len(),
            err.value,
            err.witness,
            syn.measured_error
        );
    }

    // the same samples held over intervals drive the continuous system elsewhere
    let syn = synthesize(&ens, &sincos, 8, &grid)?;
    let p: Vec<C64> = syn.p_coeffs().into_iter().map(|x| C64::new(x, 0.0)).collect();
    let u = poly_to_input(&p)?.with_mode(InputMode::PiecewiseConstant { dt: 0.05 })?;
    let err = sup_error(&samples, &u, &targets)?;
    println!("held for dt = 0.05: sup error {:.4e}", err.value);
    Ok(())
}
