//! Tracker on one seed: state dimension, virtual-user tracks and error per
//! epoch as LoS comes and goes.

use tunnel_loc::harness::{run_seed, Mode, RunConfig};

fn main() -> tunnel_loc::Result<()> {
    let cfg = RunConfig { mode: Mode::PartialNlos(0.5), epochs: Some(30), ..RunConfig::default() };
    let result = run_seed(&cfg, 1)?;
    println!("epoch  x(m)   LoS  paths  assoc  dim  error(m)  baseline(m)");
    for (j, b) in result.javelin_rows.iter().zip(&result.baseline_rows) {
        println!(
            "{:>5} {:>6.2} {:>5} {:>6} {:>6} {:>4} {:>9.3} {:>12}",
            j.epoch,
            j.true_x,
            if j.los_visible { "yes" } else { "no" },
            j.paths,
            j.associations,
            j.state_dim,
            j.error_2d,
            if b.available { format!("{:.3}", b.error_2d) } else { "outage".into() }
        );
    }
    println!("tracker RMSE {:.3} m, baseline RMSE {:.3} m", result.javelin.rmse_2d, result.baseline.rmse_2d);
    Ok(())
}
