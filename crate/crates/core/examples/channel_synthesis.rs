//! Noiseless and observed channel tensors for one epoch, and the effect of a
//! transmitter clock offset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tunnel_loc::channel::{draw_clock_bias, observe, synth_channel};
use tunnel_loc::estimate::shift_delay;
use tunnel_loc::harness::Scenario;
use tunnel_loc::raygen::{trace_paths, TraceOptions};
use tunnel_loc::scene::{build_ura_layout, TrajectorySample};
use tunnel_loc::Vec3;

fn main() {
    let sc = Scenario::default();
    let grid = &sc.grid;
    let layout = build_ura_layout(&sc.anchor);
    let ue = TrajectorySample { time: 0.0, position: Vec3::new(40.0, 2.5, 1.0), speed: 4.5, heading: 0.0 };
    let pose = sc.anchor.array_pose(sc.anchor.facing_array(&ue.position));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let paths = trace_paths(&sc.scene(), &pose, &layout, &ue, grid, &TraceOptions::default(), &mut rng);

    let h = synth_channel(&paths, grid);
    let (m, nf, nt) = h.dims();
    println!("{} paths -> tensor {m} antennas x {nf} subcarriers x {nt} symbols", paths.len());
    let noisy = observe(&h, grid, &mut rng);
    let noise = noisy.as_slice().iter().zip(h.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
    println!("per-entry SNR {:.1} dB", 10.0 * (h.frobenius_norm_sqr() / noise).log10());

    let bias = draw_clock_bias(&sc.clock, &mut rng);
    let shifted = shift_delay(&noisy, grid, bias);
    println!(
        "clock offset {:.1} ns rotates subcarrier phases; tensor norm unchanged ({:.6e} vs {:.6e})",
        bias * 1e9,
        shifted.frobenius_norm(),
        noisy.frobenius_norm()
    );
}
