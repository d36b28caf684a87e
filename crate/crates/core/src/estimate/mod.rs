//! Measurement front-end: from an observed channel tensor to per-path
//! parameters `(alpha, phi, psi, kappa, d, v)`.
//!
//! ```text
//! H ─► remove bulk delay ─► CPD ─► scaling ─► roots ─► (d, v)
//!                                    └─► B_s ─► unwrap ─► NF TLS / FF LS ─► angles
//! ```
//!
//! Angles in [`PathParamEstimate`] are expressed in the anchor's
//! global-aligned frame: `phi` is the azimuth from global x, `psi` the
//! elevation above the horizontal plane. `d` carries the transmitter clock
//! bias and is reported modulo the range ambiguity `c / df`.

pub mod cpd;
pub mod sanitize;
pub mod unwrap;
pub mod wave;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use cpd::{cpd, kruskal_condition, resolve_scaling, vandermonde_roots, CpdConfig, SteeringEstimates};
pub use sanitize::{sanitize_measurements, MeasurementVector, PathMeasurement};
pub use unwrap::{unwrap_phase_2d, Unwrapped};
pub use wave::{
    direction, extract_angles, origin_from_angles, solve_direction_ff, solve_wave_origin_ls, solve_wave_origin_nf,
    Angles, NfSolution, WaveOrigin,
};

use crate::channel::{ChannelTensor, GridSpec};
use crate::scene::{Pose, UraLayout};
use crate::{Complex, Result, Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Nf,
    Ff,
}

/// Estimated parameters of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParamEstimate {
    pub alpha: Complex,
    pub phi: f64,
    pub psi: f64,
    /// Near-field curvature radius from the TLS solve; may be negative or
    /// absent (far field).
    pub kappa: Option<f64>,
    /// Biased distance `c * (tau + clock bias)`, in `[0, c / df)`.
    pub d: f64,
    /// Radial speed, positive when the path is shortening.
    pub v: f64,
    pub regime: Regime,
    pub valid: bool,
    pub unwrap_reliable: bool,
    /// Far-field angles, kept for demotion during sanitisation.
    pub ff_angles: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub cpd: CpdConfig,
    /// Remove the common delay ramp before factorisation.
    pub center_delay: bool,
    /// Largest coefficient of variation of `|B_s|` over the elements for
    /// which the curvature is trusted. A single spherical wave has a
    /// constant-modulus steering column; ripple means the column still
    /// mixes in another path, and the path is marked invalid.
    pub max_ripple: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { cpd: CpdConfig::default(), center_delay: true, max_ripple: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub params: Vec<PathParamEstimate>,
    pub steering: SteeringEstimates,
}

/// Common delay estimate `-angle(sum H(m,s+1,k) conj(H(m,s,k))) / (2 pi df)`.
pub fn bulk_delay(h: &ChannelTensor, grid: &GridSpec) -> f64 {
    let (m, nf, nt) = h.dims();
    let data = h.as_slice();
    let mut acc = Complex::new(0.0, 0.0);
    for k in 0..nt {
        for s in 0..nf.saturating_sub(1) {
            let a = m * (s + nf * k);
            let b = a + m;
            for i in 0..m {
                acc += data[b + i] * data[a + i].conj();
            }
        }
    }
    -acc.arg() / (TAU * grid.subcarrier_spacing_hz)
}

/// Multiplies subcarrier `s` by `exp(+j 2 pi s df tau)`.
pub fn remove_delay(h: &ChannelTensor, grid: &GridSpec, tau: f64) -> ChannelTensor {
    shift_delay(h, grid, -tau)
}

/// Multiplies subcarrier `s` by `exp(-j 2 pi s df tau)`: the effect of an
/// extra common delay `tau` on every path.
pub fn shift_delay(h: &ChannelTensor, grid: &GridSpec, tau: f64) -> ChannelTensor {
    let (m, nf, nt) = h.dims();
    let ramp: Vec<Complex> =
        (0..nf).map(|s| Complex::from_polar(1.0, -TAU * s as f64 * grid.subcarrier_spacing_hz * tau)).collect();
    let mut out = h.clone();
    let data = out.as_mut_slice();
    for k in 0..nt {
        for (s, r) in ramp.iter().enumerate() {
            let base = m * (s + nf * k);
            for v in &mut data[base..base + m] {
                *v *= r;
            }
        }
    }
    out
}

/// Range ambiguity `c / df`.
pub fn range_ambiguity(grid: &GridSpec) -> f64 {
    SPEED_OF_LIGHT / grid.subcarrier_spacing_hz
}

/// `d = c tau_bulk - c / (2 pi df) mu_f` wrapped into `[0, c / df)` and
/// `v = c / (2 pi f_c T0) mu_t`.
pub fn estimate_distance_velocity(est: &SteeringEstimates, grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let amb = range_ambiguity(grid);
    let mu_f = vandermonde_roots(&est.b_f);
    let mu_t = vandermonde_roots(&est.b_t);
    let d = mu_f
        .iter()
        .map(|mu| {
            let raw = SPEED_OF_LIGHT * est.bulk_delay - SPEED_OF_LIGHT / (TAU * grid.subcarrier_spacing_hz) * mu;
            let w = raw.rem_euclid(amb);
            if w >= amb {
                0.0
            } else {
                w
            }
        })
        .collect();
    let v = mu_t
        .iter()
        .map(|mu| SPEED_OF_LIGHT / (TAU * grid.carrier_hz * grid.symbol_period_s) * mu)
        .collect();
    (d, v)
}

/// Azimuth from global x and elevation above the horizontal plane of a unit
/// vector.
pub fn azimuth_elevation(u: &Vec3) -> (f64, f64) {
    (u.y.atan2(u.x), u.z.atan2(u.x.hypot(u.y)))
}

fn local_to_anchor(pose: &Pose, phi: f64, psi: f64) -> (f64, f64) {
    azimuth_elevation(&pose.dir_to_global(&direction(phi, psi)))
}

/// Coefficient of variation of the element magnitudes.
pub fn amplitude_ripple(b_s: &[Complex]) -> f64 {
    let n = b_s.len() as f64;
    let mean = b_s.iter().map(|v| v.norm()).sum::<f64>() / n;
    if mean == 0.0 {
        return f64::INFINITY;
    }
    (b_s.iter().map(|v| (v.norm() - mean).powi(2)).sum::<f64>() / n).sqrt() / mean
}

/// Angles and curvature of one spatial steering column.
fn spatial_parameters(
    b_s: &[Complex],
    layout: &UraLayout,
    pose: &Pose,
    wavelength: f64,
) -> (f64, f64, Option<f64>, Regime, bool, Option<(f64, f64)>) {
    let unwrapped = unwrap_phase_2d(b_s, layout.rows, layout.cols);
    let delta = unwrapped.offsets(wavelength);
    let ff = solve_direction_ff(&delta, &layout.positions).ok().map(|u| {
        let a = extract_angles(WaveOrigin::Far(u));
        local_to_anchor(pose, a.phi, a.psi)
    });
    if unwrapped.reliable {
        if let Ok(sol) = solve_wave_origin_nf(&delta, &layout.positions) {
            if !sol.degenerate && sol.x.is_finite() && sol.y.is_finite() && sol.kappa.is_finite() {
                let a = extract_angles(WaveOrigin::Near(Vec3::new(sol.x, sol.y, sol.kappa)));
                let (phi, psi) = local_to_anchor(pose, a.phi, a.psi);
                return (phi, psi, Some(sol.kappa), Regime::Nf, true, ff);
            }
        }
    }
    match ff {
        Some((phi, psi)) => (phi, psi, None, Regime::Ff, unwrapped.reliable, ff),
        None => (f64::NAN, f64::NAN, None, Regime::Ff, unwrapped.reliable, None),
    }
}

/// Full front-end for `l` paths.
pub fn extract_paths(
    h: &ChannelTensor,
    l: usize,
    grid: &GridSpec,
    layout: &UraLayout,
    pose: &Pose,
    cfg: &ExtractConfig,
) -> Result<Extraction> {
    let tau_c = if cfg.center_delay { bulk_delay(h, grid) } else { 0.0 };
    let centred = if tau_c != 0.0 { remove_delay(h, grid, tau_c) } else { h.clone() };
    let mut est = cpd(&centred, l, &cfg.cpd)?;
    est.bulk_delay = tau_c;
    let (est, gains) = resolve_scaling(est);
    let (d, v) = estimate_distance_velocity(&est, grid);
    let wavelength = grid.wavelength();
    let params = (0..est.rank())
        .map(|c| {
            let col: Vec<Complex> = est.b_s.column(c).iter().copied().collect();
            let (phi, psi, kappa, regime, reliable, ff_angles) = spatial_parameters(&col, layout, pose, wavelength);
            PathParamEstimate {
                alpha: gains[c],
                phi,
                psi,
                kappa,
                d: d[c],
                v: v[c],
                regime,
                valid: amplitude_ripple(&col) <= cfg.max_ripple && est.column_valid[c] && phi.is_finite() && psi.is_finite() && d[c].is_finite(),
                unwrap_reliable: reliable,
                ff_angles,
            }
        })
        .collect();
    Ok(Extraction { params, steering: est })
}
