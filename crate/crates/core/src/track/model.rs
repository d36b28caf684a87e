//! Measurement model of the tracker and its Jacobian.
//!
//! Positions in the state are global. Every prediction is taken relative to
//! an `origin` (the reference element of the array that produced the
//! measurements), with axes aligned to the global frame. A VUE shares the UE's
//! `x` coordinate: every reflector in a tunnel has a normal without an
//! along-track component.

use nalgebra::{DMatrix, DVector};

use crate::Vec3;

use super::TrackSet;

/// What the curvature row of a reflected path measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureModel {
    /// Distance to the physical reflection point.
    #[default]
    Reflector,
    /// Distance to the virtual user.
    VirtualUser,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub point: Vec3,
    /// Set when the plane through the midpoint is (nearly) parallel to the
    /// line of sight to the VUE, or passes through the origin.
    pub degenerate: bool,
}

const DEGENERATE_TOL: f64 = 1e-9;

/// Reflection point for a UE/VUE pair, both relative to the anchor.
///
/// The mirror plane is the perpendicular bisector of the pair with normal
/// `n = normalize(0, dy, dz)`; the point is where the segment anchor→VUE
/// crosses it.
pub fn reflector_from_vue(p_u: &Vec3, p_v: &Vec3) -> Reflector {
    let delta = Vec3::new(0.0, p_v.y - p_u.y, p_v.z - p_u.z);
    let len = delta.norm();
    if len <= DEGENERATE_TOL * (1.0 + p_u.norm()) {
        return Reflector { point: *p_u, degenerate: true };
    }
    let n = delta / len;
    let npv = n.dot(p_v);
    let npu = n.dot(p_u);
    let scale = 1.0 + p_v.norm();
    if npv.abs() <= DEGENERATE_TOL * scale {
        return Reflector { point: *p_v, degenerate: true };
    }
    let t = (npu + npv) / (2.0 * npv);
    Reflector { point: p_v * t, degenerate: (npu + npv).abs() <= DEGENERATE_TOL * scale }
}

/// Predicted geometry rows of one track: `[phi, psi, kappa]` plus the path
/// length used by the Δd rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPrediction {
    pub phi: f64,
    pub psi: f64,
    pub kappa: f64,
    pub range: f64,
    /// Reflector undefined; `kappa` fell back to the VUE range.
    pub degenerate: bool,
    /// Gradients over the full state, one per row above.
    pub d_phi: DVector<f64>,
    pub d_psi: DVector<f64>,
    pub d_kappa: DVector<f64>,
    pub d_range: DVector<f64>,
}

impl TrackPrediction {
    /// First `rows` geometry values (2 drops `kappa`).
    pub fn values(&self, rows: usize) -> Vec<f64> {
        [self.phi, self.psi, self.kappa][..rows].to_vec()
    }

    pub fn jacobian(&self, rows: usize) -> DMatrix<f64> {
        let grads = [&self.d_phi, &self.d_psi, &self.d_kappa];
        DMatrix::from_fn(rows, self.d_phi.len(), |r, c| grads[r][c])
    }
}

/// State position of the point a track represents (UE or VUE), global.
pub fn track_point(s: &DVector<f64>, track: usize) -> Vec3 {
    if track == 0 {
        Vec3::new(s[0], s[1], s[2])
    } else {
        let i = 1 + 2 * track;
        Vec3::new(s[0], s[i], s[i + 1])
    }
}

/// Azimuth and elevation of `p` with their gradients w.r.t. `p`.
fn angles_with_grad(p: &Vec3) -> (f64, f64, Vec3, Vec3) {
    let rho2 = p.x * p.x + p.y * p.y;
    let rho = rho2.sqrt();
    let r2 = rho2 + p.z * p.z;
    let phi = p.y.atan2(p.x);
    let psi = p.z.atan2(rho);
    let d_phi = Vec3::new(-p.y / rho2, p.x / rho2, 0.0);
    let d_psi = Vec3::new(-p.x * p.z / (r2 * rho), -p.y * p.z / (r2 * rho), rho / r2);
    (phi, psi, d_phi, d_psi)
}

/// Curvature of a VUE path and its gradient w.r.t. (p_u, p_v), both
/// relative to the origin. `None` when the reflector is degenerate.
///
/// With `D = p_v - p_u` (no `x` component) the normalisation of `n` cancels:
/// `t = (|q_yz|^2 - |p_yz|^2) / (2 (q_yz - p_yz) . q_yz)`, `kappa = |t| |p_v|`.
fn reflector_kappa(p: &Vec3, q: &Vec3) -> Option<(f64, Vec3, Vec3)> {
    let r = reflector_from_vue(p, q);
    if r.degenerate {
        return None;
    }
    let num = q.y * q.y - p.y * p.y + q.z * q.z - p.z * p.z;
    let den = (q.y - p.y) * q.y + (q.z - p.z) * q.z;
    let t = num / (2.0 * den);
    let qn = q.norm();
    let sign = t.signum();
    // partials of num and den w.r.t. (p_y, p_z, q_y, q_z)
    let dn = [-2.0 * p.y, -2.0 * p.z, 2.0 * q.y, 2.0 * q.z];
    let dd = [-q.y, -q.z, 2.0 * q.y - p.y, 2.0 * q.z - p.z];
    let dt: Vec<f64> = (0..4).map(|i| (dn[i] * den - num * dd[i]) / (2.0 * den * den)).collect();
    let g_p = Vec3::new(0.0, sign * dt[0] * qn, sign * dt[1] * qn);
    let g_q = Vec3::new(sign * t * q.x / qn, sign * (dt[2] * qn + t * q.y / qn), sign * (dt[3] * qn + t * q.z / qn));
    Some((t.abs() * qn, g_p, g_q))
}

/// Prediction and analytic gradients for one track.
pub fn predict_track(tracks: &TrackSet, track: usize, origin: &Vec3, model: CurvatureModel) -> TrackPrediction {
    let s = &tracks.s;
    let dim = s.len();
    let p = track_point(s, 0) - origin;
    let mut d_phi = DVector::zeros(dim);
    let mut d_psi = DVector::zeros(dim);
    let mut d_kappa = DVector::zeros(dim);
    let mut d_range = DVector::zeros(dim);
    if track == 0 {
        let (phi, psi, gphi, gpsi) = angles_with_grad(&p);
        let range = p.norm();
        let grange = p / range;
        for a in 0..3 {
            d_phi[a] = gphi[a];
            d_psi[a] = gpsi[a];
            d_kappa[a] = grange[a];
            d_range[a] = grange[a];
        }
        return TrackPrediction { phi, psi, kappa: range, range, degenerate: false, d_phi, d_psi, d_kappa, d_range };
    }
    let i = 1 + 2 * track;
    let q = track_point(s, track) - origin;
    let (phi, psi, gphi, gpsi) = angles_with_grad(&q);
    let range = q.norm();
    let grange = q / range;
    // x of the VUE is the UE's x
    d_phi[0] = gphi.x;
    d_phi[i] = gphi.y;
    d_phi[i + 1] = gphi.z;
    d_psi[0] = gpsi.x;
    d_psi[i] = gpsi.y;
    d_psi[i + 1] = gpsi.z;
    d_range[0] = grange.x;
    d_range[i] = grange.y;
    d_range[i + 1] = grange.z;
    let (kappa, degenerate) = match model {
        CurvatureModel::VirtualUser => {
            d_kappa.copy_from(&d_range);
            (range, false)
        }
        CurvatureModel::Reflector => match reflector_kappa(&p, &q) {
            Some((k, gp, gq)) => {
                d_kappa[0] = gp.x + gq.x;
                d_kappa[1] = gp.y;
                d_kappa[2] = gp.z;
                d_kappa[i] = gq.y;
                d_kappa[i + 1] = gq.z;
                (k, false)
            }
            None => (range, true),
        },
    };
    let mut out = TrackPrediction { phi, psi, kappa, range, degenerate, d_phi, d_psi, d_kappa, d_range };
    if degenerate {
        numeric_gradients(tracks, track, origin, model, &mut out);
    }
    out
}

fn values_at(s: &DVector<f64>, track: usize, origin: &Vec3, model: CurvatureModel) -> [f64; 4] {
    let p = track_point(s, 0) - origin;
    let q = track_point(s, track) - origin;
    let rho = (q.x * q.x + q.y * q.y).sqrt();
    let kappa = if track == 0 || model == CurvatureModel::VirtualUser {
        q.norm()
    } else {
        reflector_kappa(&p, &q).map(|k| k.0).unwrap_or(q.norm())
    };
    [q.y.atan2(q.x), q.z.atan2(rho), kappa, q.norm()]
}

/// Central differences with step `1e-6 (1 + |s_i|)`.
fn numeric_gradients(tracks: &TrackSet, track: usize, origin: &Vec3, model: CurvatureModel, out: &mut TrackPrediction) {
    let mut s = tracks.s.clone();
    for c in 0..s.len() {
        let h = 1e-6 * (1.0 + s[c].abs());
        let keep = s[c];
        s[c] = keep + h;
        let up = values_at(&s, track, origin, model);
        s[c] = keep - h;
        let down = values_at(&s, track, origin, model);
        s[c] = keep;
        out.d_phi[c] = crate::wrap_angle(up[0] - down[0]) / (2.0 * h);
        out.d_psi[c] = (up[1] - down[1]) / (2.0 * h);
        out.d_kappa[c] = (up[2] - down[2]) / (2.0 * h);
        out.d_range[c] = (up[3] - down[3]) / (2.0 * h);
    }
}

/// Full predicted measurement vector, laid out per track as
/// `[phi_0, psi_0, kappa_0, phi_1, psi_1, kappa_1, ..., dd_1, ..., dd_n]`
/// with `dd_l = |p_v,l| - |p_u|`.
pub fn h_model(tracks: &TrackSet, origin: &Vec3, model: CurvatureModel) -> DVector<f64> {
    let n = tracks.num_tracks();
    let preds: Vec<TrackPrediction> = (0..n).map(|t| predict_track(tracks, t, origin, model)).collect();
    let mut h = Vec::with_capacity(4 * n - 1);
    for p in &preds {
        h.extend([p.phi, p.psi, p.kappa]);
    }
    for p in &preds[1..] {
        h.push(p.range - preds[0].range);
    }
    DVector::from_vec(h)
}

/// Jacobian of [`h_model`], same row layout.
pub fn jacobian(tracks: &TrackSet, origin: &Vec3, model: CurvatureModel) -> DMatrix<f64> {
    let n = tracks.num_tracks();
    let dim = tracks.dim();
    let preds: Vec<TrackPrediction> = (0..n).map(|t| predict_track(tracks, t, origin, model)).collect();
    let mut j = DMatrix::zeros(4 * n - 1, dim);
    for (t, p) in preds.iter().enumerate() {
        j.row_mut(3 * t).copy_from(&p.d_phi.transpose());
        j.row_mut(3 * t + 1).copy_from(&p.d_psi.transpose());
        j.row_mut(3 * t + 2).copy_from(&p.d_kappa.transpose());
    }
    for (t, p) in preds.iter().enumerate().skip(1) {
        let row = 3 * n + t - 1;
        j.row_mut(row).copy_from(&(&p.d_range - &preds[0].d_range).transpose());
    }
    j
}

/// Central-difference Jacobian of [`h_model`]; used as a test oracle.
pub fn jacobian_numeric(tracks: &TrackSet, origin: &Vec3, model: CurvatureModel) -> DMatrix<f64> {
    let h0 = h_model(tracks, origin, model);
    let mut j = DMatrix::zeros(h0.len(), tracks.dim());
    let mut probe = tracks.clone();
    for c in 0..tracks.dim() {
        let step = 1e-6 * (1.0 + tracks.s[c].abs());
        probe.s[c] = tracks.s[c] + step;
        let up = h_model(&probe, origin, model);
        probe.s[c] = tracks.s[c] - step;
        let down = h_model(&probe, origin, model);
        probe.s[c] = tracks.s[c];
        for r in 0..h0.len() {
            let diff = if r % 3 == 0 && r < 3 * tracks.num_tracks() {
                crate::wrap_angle(up[r] - down[r])
            } else {
                up[r] - down[r]
            };
            j[(r, c)] = diff / (2.0 * step);
        }
    }
    j
}
