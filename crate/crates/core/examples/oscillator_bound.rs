//! Open-loop synthesis for the oscillator ensemble against its error bound.

use ensemble_feedback::oscillator::{k_star, sincos, sweep, OscillatorEnsemble};

fn main() -> ensemble_feedback::Result<()> {
    // g(theta) = 2 + theta on [0, 1]
    let probe = OscillatorEnsemble::new(&[2.0, 1.0], 1.0, 0.0)?;
    let grid = probe.default_grid();
    let ks = k_star(&probe, &grid)?;
    let ens = probe.with_gain(ks.gain_with_margin(2.0))?;
    println!("k* = {}, using k = {}", ks.value, ens.k());

    let degrees = [3, 4, 8, 16, 32, 64, 128, 256];
    let (c, rows) = sweep(&ens, &sincos, 1.0, &degrees, &grid)?;
    println!("M_g = {}, m_g = {}, L_g = {}, Lip(h^-1) = {}", c.max_g, c.min_g, c.lip_g, c.lip_h_inv);
    println!("{:>5} {:>12} {:>12}", "n", "measured", "bound");
    for r in rows {
        println!("{:>5} {:>12.4e} {:>12.4e}", r.n, r.measured_error, r.bound.unwrap_or(f64::NAN));
    }
    Ok(())
}
