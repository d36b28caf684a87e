use nalgebra::{DMatrix, DVector};

use crate::estimate::MeasurementVector;
use crate::{wrap_angle, Vec3};

use super::{predict_track, AssocResult, FilterConfig, Odometry, TrackSet};

/// Dead-reckoning prediction of the UE; VUEs follow a random walk.
pub fn predict(tracks: &TrackSet, odo: &Odometry, cfg: &FilterConfig) -> TrackSet {
    let mut out = tracks.clone();
    let (sin, cos) = odo.heading.sin_cos();
    let t = odo.dt;
    out.s[0] += t * odo.speed * cos;
    out.s[1] += t * odo.speed * sin;
    // displacement Jacobian w.r.t. (speed, heading)
    let g = nalgebra::Matrix3x2::new(t * cos, -t * odo.speed * sin, t * sin, t * odo.speed * cos, 0.0, 0.0);
    let noise = nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(
        cfg.sigma_speed * cfg.sigma_speed,
        cfg.sigma_heading * cfg.sigma_heading,
    ));
    let mut q = g * noise * g.transpose();
    q = (q + q.transpose()) * 0.5;
    q[(2, 2)] += cfg.z_floor;
    let mut ue = out.p.view_mut((0, 0), (3, 3));
    ue += q;
    let rw = cfg.sigma_rw * cfg.sigma_rw;
    for i in 3..out.dim() {
        out.p[(i, i)] += rw;
    }
    out
}

/// Joseph-form EKF correction for a stacked innovation. Returns `None` when
/// the innovation covariance is singular.
pub fn joseph_update(
    s: &DVector<f64>,
    p: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    innovation: &DVector<f64>,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let pht = p * h.transpose();
    let cov = h * &pht + r;
    let chol = cov.cholesky()?;
    // K = P H^T S^-1, via S K^T = H P
    let k = chol.solve(&pht.transpose()).transpose();
    let s_new = s + &k * innovation;
    let ikh = DMatrix::identity(p.nrows(), p.ncols()) - &k * h;
    let p_new = &ikh * p * ikh.transpose() + &k * r * k.transpose();
    let p_sym = (&p_new + p_new.transpose()) * 0.5;
    Some((s_new, p_sym))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateReport {
    pub rows: usize,
    /// Innovation covariance was singular; the state was left as predicted.
    pub skipped: bool,
}

/// Rows of the stacked update: geometry rows per associated pair, then one
/// Δd row per associated pair other than the shortest one. Differences are
/// taken between associated measurements only, so the reference may differ
/// from the one chosen during sanitising and a common offset on every `d`
/// cancels.
pub(crate) fn stacked_rows(
    tracks: &TrackSet,
    z: &MeasurementVector,
    pairs: &[(usize, usize)],
    origin: &Vec3,
    cfg: &FilterConfig,
) -> (DMatrix<f64>, DVector<f64>, Vec<f64>) {
    let dim = tracks.dim();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut innov = Vec::new();
    let mut var = Vec::new();
    let mut ranges = Vec::with_capacity(pairs.len());
    for &(t, j) in pairs {
        let m = &z.paths[j];
        let pr = predict_track(tracks, t, origin, cfg.curvature);
        rows.push(pr.d_phi.clone());
        innov.push(wrap_angle(m.phi - pr.phi));
        var.push(cfg.sigma_phi * cfg.sigma_phi);
        rows.push(pr.d_psi.clone());
        innov.push(m.psi - pr.psi);
        var.push(cfg.sigma_psi * cfg.sigma_psi);
        if let Some(k) = m.kappa {
            rows.push(pr.d_kappa.clone());
            innov.push(k - pr.kappa);
            var.push(cfg.sigma_kappa * cfg.sigma_kappa);
        }
        ranges.push((m.delta_d, pr.range, pr.d_range));
    }
    if let Some(r) = (0..ranges.len()).min_by(|a, b| ranges[*a].0.total_cmp(&ranges[*b].0)) {
        for (i, (dd, range, grad)) in ranges.iter().enumerate() {
            if i == r {
                continue;
            }
            rows.push(grad - &ranges[r].2);
            innov.push((dd - ranges[r].0) - (range - ranges[r].1));
            var.push(cfg.sigma_delta_d * cfg.sigma_delta_d);
        }
    }
    let h = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    (h, DVector::from_vec(innov), var)
}

/// EKF correction with every associated pair.
pub fn update(
    tracks: &TrackSet,
    z: &MeasurementVector,
    assoc: &AssocResult,
    origin: &Vec3,
    cfg: &FilterConfig,
) -> (TrackSet, UpdateReport) {
    if assoc.pairs.is_empty() {
        return (tracks.clone(), UpdateReport::default());
    }
    let (h, innov, var) = stacked_rows(tracks, z, &assoc.pairs, origin, cfg);
    let r = DMatrix::from_diagonal(&DVector::from_vec(var));
    let mut out = tracks.clone();
    match joseph_update(&tracks.s, &tracks.p, &h, &r, &innov) {
        Some((s, p)) => {
            out.s = s;
            out.p = p;
            (out, UpdateReport { rows: innov.len(), skipped: false })
        }
        None => {
            log::warn!("singular innovation covariance, update skipped");
            (out, UpdateReport { rows: innov.len(), skipped: true })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::tests::{measurement, stack};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn scalar_joseph() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let (s, p) = joseph_update(&DVector::from_element(1, 0.0), &one, &one, &one, &DVector::from_element(1, 2.0)).unwrap();
        assert_relative_eq!(s[0], 1.0);
        assert_relative_eq!(p[(0, 0)], 0.5);
    }

    #[test]
    fn infinite_noise_leaves_state() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let huge = DMatrix::from_element(1, 1, 1e300);
        let (s, p) = joseph_update(&DVector::from_element(1, 3.0), &one, &one, &huge, &DVector::from_element(1, 2.0)).unwrap();
        assert_eq!(s[0], 3.0);
        assert_relative_eq!(p[(0, 0)], 1.0);
    }

    #[test]
    fn standing_still_adds_only_noise() {
        let cfg = FilterConfig::default();
        let mut t = TrackSet::new(Vec3::new(1.0, 2.0, 3.0), 0.0);
        t.add_vue(4.0, 5.0, 0.0);
        let out = predict(&t, &Odometry { speed: 0.0, heading: 0.7, dt: 0.1 }, &cfg);
        assert_eq!(out.s, t.s);
        let rw = cfg.sigma_rw * cfg.sigma_rw;
        assert_relative_eq!(out.p[(0, 0)], 0.01 * 0.04 * 0.7f64.cos().powi(2), epsilon = 1e-15);
        assert_eq!(out.p[(2, 2)], cfg.z_floor);
        assert_eq!(out.p[(3, 3)], rw);
        assert_eq!(out.p[(4, 4)], rw);
    }

    #[test]
    fn kinematics_and_process_noise() {
        let cfg = FilterConfig::default();
        let t = TrackSet::new(Vec3::zeros(), 0.0);
        let out = predict(&t, &Odometry { speed: 10.0, heading: 0.0, dt: 0.1 }, &cfg);
        assert_relative_eq!(out.ue_position(), Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(out.p[(0, 0)], (0.1 * cfg.sigma_speed).powi(2), epsilon = 1e-15);
        assert_relative_eq!(out.p[(1, 1)], (0.1 * 10.0 * cfg.sigma_heading).powi(2), epsilon = 1e-15);
        assert_relative_eq!(out.p[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn delta_d_rows_ignore_common_offset() {
        let cfg = FilterConfig::default();
        let origin = Vec3::new(50.0, 5.0, 4.8);
        let mut truth = TrackSet::new(Vec3::new(62.0, 2.5, 1.0), 1.0);
        truth.add_vue(7.5, 1.0, 1.0);
        truth.add_vue(-2.5, 1.0, 1.0);
        let mut est = truth.clone();
        est.s[0] += 0.4;
        est.s[3] -= 0.3;
        let pairs = [(0, 0), (1, 1), (2, 2)];
        let rows = |bias: f64| {
            let z = stack((0..3).map(|i| measurement(&truth, i, &origin, bias)).collect());
            stacked_rows(&est, &z, &pairs, &origin, &cfg).1
        };
        let a = rows(0.0);
        let b = rows(29.97);
        assert_eq!(a.len(), 11);
        for r in 9..11 {
            assert_relative_eq!(a[r], b[r], epsilon = 1e-12);
        }
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn joseph_keeps_psd(n in 1usize..7, k in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let p = random_psd(n, seed);
            let r = random_psd(k, seed.wrapping_add(1)) + DMatrix::identity(k, k) * 1e-3;
            let h = DMatrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let (_, post) = joseph_update(&DVector::zeros(n), &p, &h, &r, &y).unwrap();
            prop_assert!(post.clone().symmetric_eigen().eigenvalues.min() >= -1e-9);
        }
    }
}
