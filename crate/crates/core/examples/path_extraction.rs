//! Front end: CP decomposition of an observed tensor into per-path angles,
//! curvature, distance and radial speed, compared with the ray tracer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tunnel_loc::channel::{observe, synth_channel};
use tunnel_loc::estimate::{azimuth_elevation, extract_paths, range_ambiguity, sanitize_measurements, ExtractConfig};
use tunnel_loc::harness::Scenario;
use tunnel_loc::raygen::{trace_paths, TraceOptions};
use tunnel_loc::scene::{build_ura_layout, TrajectorySample};
use tunnel_loc::{Vec3, SPEED_OF_LIGHT};

fn main() -> tunnel_loc::Result<()> {
    let sc = Scenario::default();
    let grid = &sc.grid;
    let layout = build_ura_layout(&sc.anchor);
    let o = sc.anchor.position;
    let ue = TrajectorySample { time: 0.0, position: Vec3::new(58.0, 2.5, 1.0), speed: 4.5, heading: 0.0 };
    let pose = sc.anchor.array_pose(sc.anchor.facing_array(&ue.position));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = TraceOptions { wavefront: sc.wavefront, ..Default::default() };
    let paths = trace_paths(&sc.scene(), &pose, &layout, &ue, grid, &opts, &mut rng);
    let h = observe(&synth_channel(&paths, grid), grid, &mut rng);

    let ex = extract_paths(&h, paths.len(), grid, &layout, &pose, &ExtractConfig::default())?;
    println!("ALS residual {:.2e}, converged {}", ex.steering.als_residual, ex.steering.converged);
    println!("truth:");
    for p in &paths {
        let (phi, psi) = azimuth_elevation(&(p.vue - o));
        let v = SPEED_OF_LIGHT * p.doppler / grid.carrier_hz;
        println!(
            "  phi {:+.4} psi {:+.4} d {:7.3} v {:+.3}  ({:?})",
            phi, psi, p.distance_ref, v, p.kind
        );
    }
    println!("estimates:");
    for e in &ex.params {
        println!(
            "  phi {:+.4} psi {:+.4} d {:7.3} v {:+.3}  kappa {}",
            e.phi,
            e.psi,
            e.d,
            e.v,
            e.kappa.map_or("far field".to_string(), |k| format!("{k:.3}"))
        );
    }
    let z = sanitize_measurements(&ex.params, Some(range_ambiguity(grid)));
    println!("sanitised: {} paths, reference {:?}", z.paths.len(), z.reference);
    for m in &z.paths {
        println!("  delta-d {:.3} m", m.delta_d);
    }
    Ok(())
}
