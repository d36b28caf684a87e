use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::estimate::{MeasurementVector, PathMeasurement};
use crate::{wrap_angle, Vec3};

use super::{predict_track, track_point, FilterConfig, TrackSet};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssocResult {
    /// `(track index, measurement index)`.
    pub pairs: Vec<(usize, usize)>,
    pub unassociated_tracks: Vec<usize>,
    pub unassociated_measurements: Vec<usize>,
    /// Squared Mahalanobis distance of each pair.
    pub mahalanobis: Vec<f64>,
}

/// Chi-square quantile for `dof` degrees of freedom at probability `p`.
pub fn gate_threshold(p: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).expect("positive degrees of freedom").inverse_cdf(p)
}

/// Greedy one-to-one selection by ascending cost. Input triples are
/// `(row, column, cost)`; ties go to the earlier triple.
pub fn greedy_assign(candidates: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|a, b| candidates[*a].2.total_cmp(&candidates[*b].2));
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut out = Vec::new();
    for i in order {
        let (r, c, cost) = candidates[i];
        if rows.contains(&r) || cols.contains(&c) {
            continue;
        }
        rows.push(r);
        cols.push(c);
        out.push((r, c, cost));
    }
    out
}

/// Squared Mahalanobis distance between track `t` and measurement `m`, or
/// `None` when the innovation covariance is singular.
fn pair_distance(tracks: &TrackSet, t: usize, m: &PathMeasurement, origin: &Vec3, cfg: &FilterConfig) -> Option<f64> {
    let rows = m.geometry_rows();
    let pr = predict_track(tracks, t, origin, cfg.curvature);
    let h = pr.jacobian(rows);
    let mut y = vec![wrap_angle(m.phi - pr.phi), m.psi - pr.psi];
    let mut var = vec![cfg.sigma_phi * cfg.sigma_phi, cfg.sigma_psi * cfg.sigma_psi];
    if let Some(k) = m.kappa {
        y.push(k - pr.kappa);
        var.push(cfg.sigma_kappa * cfg.sigma_kappa);
    }
    let s = &h * &tracks.p * h.transpose() + DMatrix::from_diagonal(&DVector::from_vec(var));
    let y = DVector::from_vec(y);
    let chol = s.cholesky()?;
    let eta = y.dot(&chol.solve(&y));
    eta.is_finite().then_some(eta)
}

/// Gated nearest-neighbour association on the angle (and curvature) rows.
pub fn associate(tracks: &TrackSet, z: &MeasurementVector, origin: &Vec3, cfg: &FilterConfig) -> AssocResult {
    let gates = [gate_threshold(cfg.gate_probability, 2), gate_threshold(cfg.gate_probability, 3)];
    let mut candidates = Vec::new();
    for t in 0..tracks.num_tracks() {
        for (j, m) in z.paths.iter().enumerate() {
            match pair_distance(tracks, t, m, origin, cfg) {
                Some(eta) if eta <= gates[m.geometry_rows() - 2] => candidates.push((t, j, eta)),
                Some(_) => {}
                None => log::debug!("singular innovation covariance for track {t}, measurement {j}"),
            }
        }
    }
    let chosen = greedy_assign(&candidates);
    let mut out = AssocResult::default();
    for (t, j, eta) in chosen {
        out.pairs.push((t, j));
        out.mahalanobis.push(eta);
    }
    out.unassociated_tracks = (0..tracks.num_tracks()).filter(|t| !out.pairs.iter().any(|p| p.0 == *t)).collect();
    out.unassociated_measurements = (0..z.paths.len()).filter(|j| !out.pairs.iter().any(|p| p.1 == *j)).collect();
    out
}

/// Index of the path satisfying the LoS consistency rule: among paths with
/// `1 - gamma <= d / kappa <= 1 + gamma`, the one minimising `|d - kappa|`.
/// Input pairs are `(d, kappa)`.
pub fn identify_los(paths: &[(f64, Option<f64>)], gamma: f64) -> Option<usize> {
    paths
        .iter()
        .enumerate()
        .filter_map(|(i, (d, k))| {
            let k = (*k)?;
            let ratio = d / k;
            (k > 0.0 && ratio >= 1.0 - gamma && ratio <= 1.0 + gamma).then_some((i, (d - k).abs()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManageReport {
    pub births: usize,
    pub deaths: usize,
    /// Measurement recognised as LoS while the UE track went unassociated.
    pub los_reidentified: Option<usize>,
    /// Measurements whose Doppler contradicts a static reflector.
    pub dynamic: Vec<usize>,
}

/// Radial speed (positive when shortening) a static path through VUE `q`
/// would show; `q == p` is the LoS path. Both relative to the anchor.
fn static_radial_speed(p: &Vec3, q: &Vec3, v_u: &Vec3) -> f64 {
    let delta = Vec3::new(0.0, q.y - p.y, q.z - p.z);
    let v = match delta.try_normalize(1e-9) {
        Some(n) => v_u - n * (2.0 * n.dot(v_u)),
        None => *v_u,
    };
    -q.normalize().dot(&v)
}

/// VUE `(y, z)` for a new path: the point at `range` from the anchor in the
/// plane `x = x_u`, on the side the measured direction points to. Falls back
/// to the ray/plane intersection when the range cannot reach that plane.
fn birth_point(p: &Vec3, m: &PathMeasurement, range: f64) -> Option<(f64, f64)> {
    let (sp, cp) = m.phi.sin_cos();
    let (ss, cs) = m.psi.sin_cos();
    let u = Vec3::new(cs * cp, cs * sp, ss);
    let lateral = (u.y * u.y + u.z * u.z).sqrt();
    if range.is_finite() && range > p.x.abs() && lateral > 1e-9 {
        let rho = (range * range - p.x * p.x).sqrt();
        return Some((rho * u.y / lateral, rho * u.z / lateral));
    }
    if u.x.abs() > 0.05 && p.x / u.x > 0.0 {
        let t = p.x / u.x;
        return Some((t * u.y, t * u.z));
    }
    None
}

/// Miss counting, deaths, LoS re-identification, Doppler screening and
/// births, applied to the updated tracks.
pub fn manage_tracks(
    tracks: &TrackSet,
    assoc: &AssocResult,
    z: &MeasurementVector,
    origin: &Vec3,
    ego_velocity: &Vec3,
    cfg: &FilterConfig,
) -> (TrackSet, ManageReport) {
    let mut out = tracks.clone();
    let mut report = ManageReport::default();
    let p = out.ue_position() - origin;

    for t in 0..out.num_tracks() {
        if assoc.pairs.iter().any(|(a, _)| *a == t) {
            out.tracks[t].miss_count = 0;
        } else {
            out.tracks[t].miss_count += 1;
        }
    }

    // Doppler screening of associated VUE tracks
    let mut doomed: Vec<usize> = Vec::new();
    for &(t, j) in &assoc.pairs {
        if t == 0 {
            continue;
        }
        let q = track_point(&out.s, t) - origin;
        if (z.paths[j].v - static_radial_speed(&p, &q, ego_velocity)).abs() > cfg.doppler_tol {
            report.dynamic.push(j);
            doomed.push(t);
        }
    }
    for t in 1..out.num_tracks() {
        if out.tracks[t].miss_count > cfg.max_misses && !doomed.contains(&t) {
            doomed.push(t);
        }
    }
    doomed.sort_unstable();
    for t in doomed.iter().rev() {
        out.remove_vue(*t);
    }
    report.deaths = doomed.len();

    let mut fresh: Vec<usize> = assoc.unassociated_measurements.clone();
    if assoc.unassociated_tracks.contains(&0) {
        let cands: Vec<(f64, Option<f64>)> = fresh.iter().map(|j| (z.paths[*j].d, z.paths[*j].kappa)).collect();
        if let Some(i) = identify_los(&cands, cfg.los_ratio) {
            report.los_reidentified = Some(fresh[i]);
            fresh.remove(i);
        }
    }

    // range of new paths from Δd against the shortest associated path
    let anchor_range = assoc
        .pairs
        .iter()
        .min_by(|a, b| z.paths[a.1].delta_d.total_cmp(&z.paths[b.1].delta_d))
        .map(|&(t, j)| {
            let range = if t == 0 {
                p.norm()
            } else {
                tracks_range(tracks, t, origin)
            };
            (z.paths[j].delta_d, range)
        });
    let variance = cfg.sigma_birth * cfg.sigma_birth;
    for j in fresh {
        let m = &z.paths[j];
        let range = match (anchor_range, m.kappa) {
            (Some((dd, r)), _) => r + (m.delta_d - dd),
            (None, Some(k)) => k,
            (None, None) => continue,
        };
        let Some((y, zz)) = birth_point(&p, m, range) else { continue };
        let q = Vec3::new(p.x, y, zz);
        if (m.v - static_radial_speed(&p, &q, ego_velocity)).abs() > cfg.doppler_tol {
            report.dynamic.push(j);
            continue;
        }
        out.add_vue(y + origin.y, zz + origin.z, variance);
        report.births += 1;
    }
    (out, report)
}

/// Anchor distance of the point tracked by `t` in the pre-management state.
fn tracks_range(tracks: &TrackSet, t: usize, origin: &Vec3) -> f64 {
    (track_point(&tracks.s, t) - origin).norm()
}
