//! Single-bounce paths from a UE to the anchor, with and without LoS blockage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tunnel_loc::harness::Scenario;
use tunnel_loc::raygen::{trace_paths, TraceOptions};
use tunnel_loc::scene::{build_ura_layout, TrajectorySample};
use tunnel_loc::{Vec3, SPEED_OF_LIGHT};

fn main() {
    let sc = Scenario::default();
    let scene = sc.scene();
    let layout = build_ura_layout(&sc.anchor);
    let ue = TrajectorySample { time: 0.0, position: Vec3::new(62.0, 2.5, 1.0), speed: 4.5, heading: 0.0 };
    let pose = sc.anchor.array_pose(sc.anchor.facing_array(&ue.position));
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for blocked in [false, true] {
        let opts = TraceOptions { los_blocked: blocked, ..Default::default() };
        let paths = trace_paths(&scene, &pose, &layout, &ue, &sc.grid, &opts, &mut rng);
        println!("LoS blocked: {blocked}, {} paths", paths.len());
        for p in &paths {
            let spread = p.delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            println!(
                "  {:?} panel {:?}: d = {:.3} m, |gain| = {:.3e}, radial speed {:+.3} m/s, max aperture offset {:.4} m",
                p.kind,
                p.panel_id,
                p.distance_ref,
                p.gain.norm(),
                SPEED_OF_LIGHT * p.doppler / sc.grid.carrier_hz,
                spread
            );
        }
    }
}
