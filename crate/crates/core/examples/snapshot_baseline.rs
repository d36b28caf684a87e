//! Snapshot positioning from the LoS tuple, with and without curvature.

use tunnel_loc::baseline::{los_tuple_position, tenfiloc_snapshot};
use tunnel_loc::estimate::{azimuth_elevation, PathParamEstimate, Regime};
use tunnel_loc::{Complex, Vec3, SPEED_OF_LIGHT};

fn tuple(o: &Vec3, ue: &Vec3, kappa: Option<f64>, bias_ns: f64) -> PathParamEstimate {
    let (phi, psi) = azimuth_elevation(&(ue - o));
    PathParamEstimate {
        alpha: Complex::new(1.0, 0.0),
        phi,
        psi,
        kappa,
        d: (ue - o).norm() + SPEED_OF_LIGHT * bias_ns * 1e-9,
        v: 0.0,
        regime: if kappa.is_some() { Regime::Nf } else { Regime::Ff },
        valid: true,
        unwrap_reliable: true,
        ff_angles: None,
    }
}

fn main() {
    let o = Vec3::new(50.0, 5.0, 4.8);
    let ue = Vec3::new(62.0, 2.5, 1.0);
    let range = (ue - o).norm();

    let with_curvature = tuple(&o, &ue, Some(range), 40.0);
    let (p, biased) = los_tuple_position(&with_curvature, &o);
    println!("curvature available: error {:.3} m (biased range: {biased})", (p - ue).norm());

    let without = tuple(&o, &ue, None, 40.0);
    let (p, biased) = los_tuple_position(&without, &o);
    println!("distance only, 40 ns offset: error {:.3} m (biased range: {biased})", (p - ue).norm());

    let wall = PathParamEstimate { phi: -0.4, d: range + 3.0, kappa: Some(range * 0.6), ..with_curvature.clone() };
    match tenfiloc_snapshot(&[wall.clone(), with_curvature], &o, 0.2) {
        Some(fix) => println!("mixed epoch: picked path {}, error {:.3} m", fix.los_index, (fix.position - ue).norm()),
        None => println!("mixed epoch: outage"),
    }
    println!("reflection only: {:?}", tenfiloc_snapshot(&[wall], &o, 0.2).map(|f| f.position));
}
