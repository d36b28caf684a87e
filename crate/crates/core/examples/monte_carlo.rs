//! Monte Carlo run over a few seeds, written to CSV and JSON.

use tunnel_loc::harness::{run_scenario, write_results, Mode, RunConfig};

fn main() -> tunnel_loc::Result<()> {
    let cfg = RunConfig { mode: Mode::Los, seeds: vec![1, 2, 3], epochs: Some(40), ..RunConfig::default() };
    let out = run_scenario(&cfg)?;
    for s in &out.seeds {
        println!("seed {}: tracker {:.3} m, baseline {:.3} m", s.seed, s.javelin.rmse_2d, s.baseline.rmse_2d);
    }
    println!(
        "pooled: tracker RMSE {:.3} m, MAE {:.3} m, Y-MAE {:.3} m; baseline RMSE {:.3} m at availability {:.2}",
        out.javelin.rmse_2d, out.javelin.mae_2d, out.javelin.y_mae, out.baseline.rmse_2d, out.baseline.availability
    );
    let dir = std::env::temp_dir().join("tunnel-loc-monte-carlo");
    write_results(&cfg, &out, &dir)?;
    println!("results in {}", dir.display());
    Ok(())
}
