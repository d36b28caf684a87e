//! Single-anchor near-field vehicular localization in tunnels.
//!
//! The crate is organised as a pipeline, each stage usable on its own:
//!
//! ```text
//! scene ──► raygen ──► channel ──► estimate ──► track ──► harness
//!   │         │                       │            ▲
//!   │         └──► bounds             └──► baseline┘
//! ```
//!
//! * [`scene`]: tunnel, anchor array, reflector panels, trajectories, frames.
//! * [`raygen`]: image-method single-bounce ray tracing with exact per-antenna
//!   path-length offsets.
//! * [`bounds`]: array-size limits under which a reflected near-field path can
//!   be modelled as coming from one physical reflection point, plus the exact
//!   geometric oracle they are checked against.
//! * [`channel`]: SIMO-OFDM channel tensor synthesis, pilots, thermal noise and
//!   transmitter clock bias.
//! * [`estimate`]: CP decomposition of the channel tensor, delay/Doppler roots,
//!   2D phase unwrapping, near-field TLS and far-field LS wave-origin solvers,
//!   and measurement sanitisation.
//! * [`track`]: measurement model, gated nearest-neighbour association, track
//!   management and the variable-dimension EKF.
//! * [`baseline`]: the snapshot LoS-tuple positioning baseline.
//! * [`harness`]: scenario files, Monte Carlo runs, metrics and result files.
//!
//! Angles are in radians and distances in meters unless a field name says
//! otherwise (`_deg`, `_db`, `_dbm`, `_hz`).

pub mod baseline;
pub mod bounds;
pub mod channel;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod raygen;
pub mod scene;
pub mod selftest;
pub mod track;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Complex = num_complex::Complex64;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
        assert!((wrap_angle(-0.25 - 4.0 * PI) + 0.25).abs() < 1e-12);
    }
}
