//! Variable-dimension EKF tracking of the UE and its virtual users.
//!
//! The state is `[x_u, y_u, z_u, (y_v, z_v) per VUE]`. One epoch runs
//! predict, association, update and track management in that order. Births
//! and deaths are applied after the update: unassociated tracks and
//! measurements never enter the update, so this is the same filter as doing
//! them first and reordering.

mod assoc;
mod ekf;
mod model;

pub use assoc::{associate, gate_threshold, greedy_assign, identify_los, manage_tracks, AssocResult, ManageReport};
pub use ekf::{joseph_update, predict, update, UpdateReport};
pub use model::{
    h_model, jacobian, jacobian_numeric, predict_track, reflector_from_vue, track_point, CurvatureModel, Reflector,
    TrackPrediction,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelTensor, GridSpec};
use crate::estimate::{extract_paths, range_ambiguity, sanitize_measurements, ExtractConfig, MeasurementVector};
use crate::scene::{Pose, UraLayout};
use crate::{Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub gate_probability: f64,
    /// A VUE track is dropped once its consecutive misses exceed this.
    pub max_misses: u32,
    /// LoS consistency band `1 - gamma <= d / kappa <= 1 + gamma`.
    pub los_ratio: f64,
    pub sigma_phi: f64,
    pub sigma_psi: f64,
    pub sigma_kappa: f64,
    pub sigma_delta_d: f64,
    pub sigma_speed: f64,
    pub sigma_heading: f64,
    /// Initial standard deviation of a newborn VUE.
    pub sigma_birth: f64,
    /// Random-walk step of a VUE per epoch.
    pub sigma_rw: f64,
    pub doppler_tol: f64,
    /// Process noise variance added to the UE height, m².
    pub z_floor: f64,
    pub curvature: CurvatureModel,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gate_probability: 0.99,
            max_misses: 1,
            los_ratio: 0.2,
            sigma_phi: 2f64.to_radians(),
            sigma_psi: 2f64.to_radians(),
            sigma_kappa: 1.5,
            sigma_delta_d: 1.5,
            sigma_speed: 0.2,
            sigma_heading: 1f64.to_radians(),
            sigma_birth: 10.0,
            sigma_rw: 0.2,
            doppler_tol: 1.0,
            z_floor: 1e-4,
            curvature: CurvatureModel::Reflector,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(crate::Error::config(m.to_string()));
        if !(self.gate_probability > 0.0 && self.gate_probability < 1.0) {
            return bad("gate probability must lie in (0, 1)");
        }
        if !(self.los_ratio > 0.0 && self.los_ratio <= 1.0) {
            return bad("LoS ratio threshold must lie in (0, 1]");
        }
        let sigmas = [
            self.sigma_phi,
            self.sigma_psi,
            self.sigma_kappa,
            self.sigma_delta_d,
            self.sigma_speed,
            self.sigma_heading,
            self.sigma_birth,
            self.sigma_rw,
        ];
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("filter standard deviations must be positive");
        }
        if !(self.doppler_tol > 0.0) || !(self.z_floor >= 0.0) {
            return bad("doppler tolerance must be positive and the height floor non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackInfo {
    pub id: u64,
    pub miss_count: u32,
}

/// Filter state. Track 0 is the UE, track `l >= 1` owns state entries
/// `2l + 1` and `2l + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSet {
    pub s: DVector<f64>,
    pub p: DMatrix<f64>,
    pub tracks: Vec<TrackInfo>,
    pub next_id: u64,
    pub epoch: u64,
}

impl TrackSet {
    /// UE-only set with isotropic position variance.
    pub fn new(p_u: Vec3, variance: f64) -> Self {
        Self::with_covariance(p_u, DMatrix::identity(3, 3) * variance)
    }

    pub fn with_covariance(p_u: Vec3, p: DMatrix<f64>) -> Self {
        TrackSet {
            s: DVector::from_column_slice(p_u.as_slice()),
            p,
            tracks: vec![TrackInfo { id: 0, miss_count: 0 }],
            next_id: 1,
            epoch: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn num_vues(&self) -> usize {
        self.tracks.len() - 1
    }

    pub fn ue_position(&self) -> Vec3 {
        track_point(&self.s, 0)
    }

    /// Global VUE position of track `l >= 1`.
    pub fn vue_position(&self, l: usize) -> Vec3 {
        track_point(&self.s, l)
    }

    /// Appends a VUE uncorrelated with the rest; returns its id.
    pub fn add_vue(&mut self, y: f64, z: f64, variance: f64) -> u64 {
        let d = self.dim();
        self.s = self.s.clone().insert_rows(d, 2, 0.0);
        self.s[d] = y;
        self.s[d + 1] = z;
        let mut p = DMatrix::zeros(d + 2, d + 2);
        p.view_mut((0, 0), (d, d)).copy_from(&self.p);
        p[(d, d)] = variance;
        p[(d + 1, d + 1)] = variance;
        self.p = p;
        let id = self.next_id;
        self.next_id += 1;
        self.tracks.push(TrackInfo { id, miss_count: 0 });
        id
    }

    /// Removes VUE track `l >= 1`, marginalising its entries out.
    pub fn remove_vue(&mut self, l: usize) {
        assert!(l >= 1 && l < self.tracks.len(), "track {l} is not a VUE");
        let i = 1 + 2 * l;
        self.s = self.s.clone().remove_rows(i, 2);
        self.p = self.p.clone().remove_rows(i, 2).remove_columns(i, 2);
        self.tracks.remove(l);
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.p.clone().symmetric_eigen().eigenvalues.min()
    }
}

/// Speed and heading from the vehicle's own sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Odometry {
    pub speed: f64,
    pub heading: f64,
    pub dt: f64,
}

impl Odometry {
    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.speed * self.heading.cos(), self.speed * self.heading.sin(), 0.0)
    }
}

/// What one epoch did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub measurements: usize,
    pub associations: usize,
    /// `(track id, squared Mahalanobis distance)` per associated pair.
    pub mahalanobis: Vec<(u64, f64)>,
    pub births: usize,
    pub deaths: usize,
    pub dynamic: usize,
    /// UE associated, or a LoS path re-identified by the ratio rule.
    pub los: bool,
    pub update_skipped: bool,
}

/// Everything [`javelin_step`] needs besides the tracks and the tensor.
#[derive(Debug, Clone)]
pub struct StepInputs<'a> {
    pub num_paths: usize,
    pub grid: &'a GridSpec,
    pub layout: &'a UraLayout,
    pub pose: &'a Pose,
    /// Anchor reference point; the frame origin of all measurements.
    pub origin: Vec3,
    pub extract: &'a ExtractConfig,
    pub odometry: Odometry,
}

/// One tracker epoch from already sanitised measurements.
pub fn track_epoch(
    tracks: &TrackSet,
    z: &MeasurementVector,
    origin: &Vec3,
    odometry: &Odometry,
    cfg: &FilterConfig,
) -> (TrackSet, StepDiagnostics) {
    let predicted = predict(tracks, odometry, cfg);
    let mut diag = StepDiagnostics { measurements: z.paths.len(), ..Default::default() };
    if z.is_empty() {
        let mut out = predicted;
        for t in out.tracks.iter_mut() {
            t.miss_count += 1;
        }
        let dead: Vec<usize> =
            (1..out.num_tracks()).rev().filter(|l| out.tracks[*l].miss_count > cfg.max_misses).collect();
        for l in &dead {
            out.remove_vue(*l);
        }
        diag.deaths = dead.len();
        out.epoch += 1;
        return (out, diag);
    }
    let assoc = associate(&predicted, z, origin, cfg);
    diag.associations = assoc.pairs.len();
    diag.mahalanobis = assoc.pairs.iter().zip(&assoc.mahalanobis).map(|((t, _), m)| (predicted.tracks[*t].id, *m)).collect();
    let (updated, report) = update(&predicted, z, &assoc, origin, cfg);
    diag.update_skipped = report.skipped;
    let (mut out, manage) = manage_tracks(&updated, &assoc, z, origin, &odometry.velocity(), cfg);
    diag.births = manage.births;
    diag.deaths = manage.deaths;
    diag.dynamic = manage.dynamic.len();
    diag.los = assoc.pairs.iter().any(|(t, _)| *t == 0) || manage.los_reidentified.is_some();
    out.epoch += 1;
    (out, diag)
}

/// Full epoch from the channel tensor: extraction, sanitising, then
/// [`track_epoch`]. A failed extraction coasts on the prediction.
pub fn javelin_step(
    tracks: &TrackSet,
    h: &ChannelTensor,
    inputs: &StepInputs,
    cfg: &FilterConfig,
) -> Result<(TrackSet, StepDiagnostics)> {
    let params = match extract_paths(h, inputs.num_paths, inputs.grid, inputs.layout, inputs.pose, inputs.extract) {
        Ok(x) => x.params,
        Err(crate::Error::Numerical(msg)) => {
            log::debug!("extraction failed, coasting: {msg}");
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let z = sanitize_measurements(&params, Some(range_ambiguity(inputs.grid)));
    Ok(track_epoch(tracks, &z, &inputs.origin, &inputs.odometry, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{PathMeasurement, Regime};
    use crate::Complex;
    use proptest::prelude::*;

    pub(crate) fn measurement(tracks: &TrackSet, track: usize, origin: &Vec3, bias: f64) -> PathMeasurement {
        let pr = predict_track(tracks, track, origin, CurvatureModel::Reflector);
        PathMeasurement {
            source: track,
            alpha: Complex::new(1.0, 0.0),
            phi: pr.phi,
            psi: pr.psi,
            kappa: Some(pr.kappa),
            d: pr.range + bias,
            v: 0.0,
            delta_d: 0.0,
            regime: Regime::Nf,
        }
    }

    pub(crate) fn stack(mut paths: Vec<PathMeasurement>) -> MeasurementVector {
        let r = (0..paths.len()).min_by(|a, b| paths[*a].d.total_cmp(&paths[*b].d)).unwrap();
        let d_ref = paths[r].d;
        for p in paths.iter_mut() {
            p.delta_d = p.d - d_ref;
        }
        MeasurementVector { paths, reference: Some(r) }
    }

    fn still() -> Odometry {
        Odometry { speed: 0.0, heading: 0.0, dt: 0.1 }
    }

    #[test]
    fn coasting_epoch_is_prediction() {
        let t = TrackSet::new(Vec3::new(20.0, 2.0, 1.0), 0.5);
        let cfg = FilterConfig::default();
        let odo = Odometry { speed: 10.0, heading: 0.0, dt: 0.1 };
        let (out, diag) = track_epoch(&t, &MeasurementVector::default(), &Vec3::zeros(), &odo, &cfg);
        let pred = predict(&t, &odo, &cfg);
        assert_eq!(out.s, pred.s);
        assert_eq!(out.p, pred.p);
        assert_eq!(diag.associations, 0);
    }

    #[test]
    fn perfect_los_contracts_error() {
        let truth = Vec3::new(25.0, -3.0, -3.8);
        let prior = truth + Vec3::new(0.8, -0.5, 0.05);
        let t = TrackSet::new(prior, 1.0);
        let truth_set = TrackSet::new(truth, 1.0);
        let z = stack(vec![measurement(&truth_set, 0, &Vec3::zeros(), 0.0)]);
        let (out, diag) = track_epoch(&t, &z, &Vec3::zeros(), &still(), &FilterConfig::default());
        assert_eq!(diag.associations, 1);
        assert!((out.ue_position() - truth).norm() < (prior - truth).norm());
    }

    #[test]
    fn birth_grows_dimension() {
        let origin = Vec3::zeros();
        let mut truth = TrackSet::new(Vec3::new(20.0, -3.0, -3.8), 1.0);
        truth.add_vue(-7.0, -3.8, 1.0);
        truth.add_vue(1.0, -3.8, 1.0);
        let mut t = TrackSet::new(truth.ue_position(), 0.01);
        t.add_vue(-7.0, -3.8, 0.01);
        assert_eq!(t.dim(), 5);
        let z = stack((0..3).map(|i| measurement(&truth, i, &origin, 0.0)).collect());
        let (out, diag) = track_epoch(&t, &z, &origin, &still(), &FilterConfig::default());
        assert_eq!(diag.associations, 2);
        assert_eq!(diag.births, 1);
        assert_eq!(out.dim(), 7);
        assert!((out.vue_position(2) - truth.vue_position(2)).norm() < 0.5);

        // two tracks plus three measurements -> D from 7 to 9
        let mut t3 = out.clone();
        let mut truth3 = truth.clone();
        truth3.add_vue(-3.0, -12.0, 1.0);
        let z3 = stack((0..4).map(|i| measurement(&truth3, i, &origin, 0.0)).collect());
        t3.remove_vue(2);
        assert_eq!(t3.dim(), 5);
        let z3 = MeasurementVector { paths: z3.paths[..3].to_vec(), reference: z3.reference };
        let mut t4 = t3.clone();
        t4.add_vue(1.0, -3.8, 0.01);
        let (out4, d4) = track_epoch(&t4, &stack(z3.paths.clone()), &origin, &still(), &FilterConfig::default());
        assert_eq!(t4.dim(), 7);
        assert_eq!(d4.associations, 3);
        let extra = measurement(&truth3, 3, &origin, 0.0);
        let mut paths = z3.paths.clone();
        paths.push(extra);
        let (out5, d5) = track_epoch(&out4, &stack(paths), &origin, &still(), &FilterConfig::default());
        assert_eq!(d5.births, 1);
        assert_eq!(out5.dim(), 9);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Predict(f64, f64),
        Update(u64),
        Birth(f64, f64),
        Death(usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0.0..30.0f64, -3.2..3.2f64).prop_map(|(v, h)| Op::Predict(v, h)),
            any::<u64>().prop_map(Op::Update),
            (-10.0..10.0f64, -8.0..0.0f64).prop_map(|(y, z)| Op::Birth(y, z)),
            (0usize..8).prop_map(Op::Death),
        ]
    }

    proptest! {
        #[test]
        fn covariance_stays_psd(ops in proptest::collection::vec(op(), 1..40)) {
            use rand::{Rng, SeedableRng};
            let cfg = FilterConfig::default();
            let origin = Vec3::zeros();
            let mut t = TrackSet::new(Vec3::new(30.0, -2.0, -3.8), 4.0);
            for o in ops {
                match o {
                    Op::Predict(v, h) => t = predict(&t, &Odometry { speed: v, heading: h, dt: 0.1 }, &cfg),
                    Op::Update(seed) => {
                        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                        let mut truth = t.clone();
                        for k in 0..truth.dim() {
                            truth.s[k] += rng.random_range(-0.3..0.3);
                        }
                        let z = stack((0..t.num_tracks()).map(|i| measurement(&truth, i, &origin, 3.0)).collect());
                        let assoc = AssocResult {
                            pairs: (0..t.num_tracks()).map(|i| (i, i)).collect(),
                            mahalanobis: vec![0.0; t.num_tracks()],
                            unassociated_tracks: vec![],
                            unassociated_measurements: vec![],
                        };
                        t = update(&t, &z, &assoc, &origin, &cfg).0;
                    }
                    Op::Birth(y, z) => {
                        t.add_vue(y, z, 100.0);
                    }
                    Op::Death(l) => {
                        if t.num_vues() > 0 {
                            t.remove_vue(1 + l % t.num_vues());
                        }
                    }
                }
                prop_assert_eq!(t.dim(), 2 * t.num_vues() + 3);
                prop_assert_eq!(t.tracks[0].id, 0);
                prop_assert!((&t.p - t.p.transpose()).amax() == 0.0);
                prop_assert!(t.min_eigenvalue() >= -1e-9);
            }
        }
    }
}
