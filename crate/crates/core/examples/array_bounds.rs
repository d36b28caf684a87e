//! Largest array that still sees a reflected path as coming from one
//! reflection point, checked against the exact phase error.

use tunnel_loc::bounds::{bounds_sweep, exact_error_square, mmax_2d, write_sweep_csv, BoundInputs, SweepGrid};
use tunnel_loc::SPEED_OF_LIGHT;

fn main() -> tunnel_loc::Result<()> {
    let wavelength = SPEED_OF_LIGHT / 5.9e9;
    let inp = BoundInputs::new(3.5, 3.0, 2.5, 0.15, wavelength);
    let m = mmax_2d(&inp)?;
    println!("R = 3.5 m, W = 3 m, y = 2.5 m, eps = 0.15 rad: at most {m:.2} elements per side");
    for side in [m.floor() as usize, (1.5 * m).ceil() as usize] {
        println!("  {side} x {side} array: exact phase error {:.3} rad", exact_error_square(&inp, side)?);
    }

    let rows = bounds_sweep(&SweepGrid::default())?;
    println!("\nsweep ({} rows):", rows.len());
    write_sweep_csv(&rows, std::io::stdout())?;
    Ok(())
}
