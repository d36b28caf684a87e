//! Scenario files, Monte Carlo runs, metrics and result files.
//!
//! A run drives one trajectory per seed through the whole chain: ray tracing,
//! channel synthesis with noise and clock bias, path extraction, then the
//! tracker and the snapshot baseline on the same extracted parameters.
//!
//! Every seed owns independent random streams (initial fix, odometry, clock,
//! LoS blocking, channel), so two runs that differ only in mode or reflector
//! set see the same odometry, clock draws and blocking pattern.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::tenfiloc_snapshot;
use crate::channel::{draw_clock_bias, observe, synth_channel, ClockModel, GridSpec};
use crate::estimate::{extract_paths, range_ambiguity, sanitize_measurements, shift_delay, ExtractConfig};
use crate::raygen::{trace_paths, TraceOptions, Wavefront};
use crate::scene::{
    build_ura_layout, gen_trajectory, AnchorSpec, Orientation, Panel, Scene, TrajectoryKind, TrajectorySpec, TunnelSpec,
};
use crate::track::{track_epoch, FilterConfig, Odometry, TrackSet};
use crate::{Error, Result, Vec3};

/// LoS visibility schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Los,
    /// LoS blocked independently in each epoch with this probability.
    PartialNlos(f64),
    Nlos,
}

impl Mode {
    pub fn blocking_probability(&self) -> f64 {
        match self {
            Mode::Los => 0.0,
            Mode::PartialNlos(q) => *q,
            Mode::Nlos => 1.0,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "L" => Ok(Mode::Los),
            "N" => Ok(Mode::Nlos),
            _ => {
                let q = s
                    .strip_prefix("N@")
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::config(format!("unknown mode '{s}', expected L, N@q or N")))?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::config(format!("NLoS probability {q} outside [0, 1]")));
                }
                Ok(Mode::PartialNlos(q))
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Los => write!(f, "L"),
            Mode::PartialNlos(q) => write!(f, "N@{q}"),
            Mode::Nlos => write!(f, "N"),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Road markings on both sides of the lane, tilted towards the tunnel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrmLayout {
    /// Tilt of the reflecting face from the road surface.
    pub tilt_deg: f64,
    /// Distance of the marking centre line from the wall.
    pub wall_offset: f64,
    /// Height of the marking centre above the road.
    pub height: f64,
    /// Half width of the reflecting strip.
    pub half_width: f64,
    pub loss_db: f64,
}

impl Default for RrmLayout {
    fn default() -> Self {
        RrmLayout { tilt_deg: 55.0, wall_offset: 0.3, height: 0.2, half_width: 0.3, loss_db: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub tunnel: TunnelSpec,
    pub anchor: AnchorSpec,
    pub wall_loss_db: f64,
    pub rrm: RrmLayout,
    pub trajectory: TrajectorySpec,
    pub grid: GridSpec,
    pub clock: ClockModel,
    pub wavefront: Wavefront,
    pub extract: ExtractConfig,
    pub filter: FilterConfig,
    /// Standard deviation of the open-sky fix the tracker starts from.
    pub init_sigma: f64,
    /// Standard deviation the tracker assigns to its initial horizontal
    /// position; `None` uses the birth standard deviation of the filter.
    pub prior_sigma: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        let grid = GridSpec::default();
        Scenario {
            tunnel: TunnelSpec::default(),
            anchor: AnchorSpec {
                position: Vec3::new(50.0, 5.0, 4.8),
                arrays: vec![Orientation::new(0.0, -30.0), Orientation::new(180.0, -30.0)],
                rows: 10,
                cols: 10,
                spacing: grid.wavelength() / 2.0,
            },
            wall_loss_db: 6.0,
            rrm: RrmLayout::default(),
            trajectory: TrajectorySpec {
                kind: TrajectoryKind::Straight,
                start_x: 30.0,
                lane_y: 2.5,
                height: 1.0,
                speed: 4.5,
                epoch: 0.1,
                samples: 100,
                direction: 1.0,
                slalom_amplitude: 1.5,
                slalom_period: 40.0,
            },
            grid,
            clock: ClockModel::default(),
            wavefront: Wavefront::SingleReflector,
            extract: ExtractConfig::default(),
            filter: FilterConfig::default(),
            init_sigma: 0.3,
            prior_sigma: Some(1.0),
        }
    }
}

impl Scenario {
    /// Walls at `y = 0` and `y = width`, plus the two road markings.
    pub fn scene(&self) -> Scene {
        let t = &self.tunnel;
        let mut panels =
            vec![Panel::wall(1, 0.0, true, t, self.wall_loss_db), Panel::wall(2, t.width, false, t, self.wall_loss_db)];
        let (s, c) = self.rrm.tilt_deg.to_radians().sin_cos();
        for (id, y, sign) in [(3, self.rrm.wall_offset, 1.0), (4, t.width - self.rrm.wall_offset, -1.0)] {
            let mut p = Panel::new(
                id,
                Vec3::new(t.length / 2.0, y, self.rrm.height),
                Vec3::new(0.0, sign * s, c),
                (t.length / 2.0, self.rrm.half_width),
                self.rrm.loss_db,
            );
            p.rrm = true;
            panels.push(p);
        }
        Scene { tunnel: t.clone(), anchor: self.anchor.clone(), panels }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene().validate()?;
        self.grid.validate()?;
        self.filter.validate()?;
        if self.anchor.num_antennas() != self.grid.antennas {
            return Err(Error::config(format!(
                "anchor has {} elements but the grid expects {}",
                self.anchor.num_antennas(),
                self.grid.antennas
            )));
        }
        if self.prior_sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::config("prior_sigma must be positive"));
        }
        if !(self.init_sigma >= 0.0) {
            return Err(Error::config("init_sigma must be non-negative"));
        }
        if !(self.clock.support.0 <= self.clock.support.1) {
            return Err(Error::config("clock bias support is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub mode: Mode,
    pub rrm_enabled: bool,
    pub seeds: Vec<u64>,
    /// Overrides the trajectory sample count when set.
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::default(),
            mode: Mode::Los,
            rrm_enabled: true,
            seeds: (1..=20).collect(),
            epochs: None,
            out: None,
        }
    }
}

impl RunConfig {
    /// Parses a TOML scenario file; every field has a default.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if let Mode::PartialNlos(q) = self.mode {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::config("NLoS probability outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_2d: f64,
    pub mae_2d: f64,
    pub y_mae: f64,
    /// `(2D error, fraction of samples at or below it)`.
    pub cdf: Vec<(f64, f64)>,
    /// Fraction of attempted epochs that produced an estimate.
    pub availability: f64,
    pub samples: usize,
}

/// Metrics over the available epochs; `attempted` counts outages too.
pub fn compute_metrics(errors: &[Vec3], attempted: usize) -> MetricsReport {
    let n = errors.len();
    let availability = if attempted == 0 { 0.0 } else { n as f64 / attempted as f64 };
    if n == 0 {
        return MetricsReport { rmse_2d: 0.0, mae_2d: 0.0, y_mae: 0.0, cdf: vec![], availability, samples: 0 };
    }
    let planar: Vec<f64> = errors.iter().map(|e| e.x.hypot(e.y)).collect();
    let rmse_2d = (errors.iter().map(|e| e.x * e.x + e.y * e.y).sum::<f64>() / n as f64).sqrt();
    let mae_2d = planar.iter().sum::<f64>() / n as f64;
    let y_mae = errors.iter().map(|e| e.y.abs()).sum::<f64>() / n as f64;
    let mut sorted = planar;
    sorted.sort_by(f64::total_cmp);
    let cdf = sorted.iter().enumerate().map(|(i, e)| (*e, (i + 1) as f64 / n as f64)).collect();
    MetricsReport { rmse_2d, mae_2d, y_mae, cdf, availability, samples: n }
}

/// One output row; tracker and baseline share the schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRow {
    pub seed: u64,
    pub epoch: usize,
    pub time: f64,
    pub available: bool,
    pub est_x: f64,
    pub est_y: f64,
    pub est_z: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_z: f64,
    pub error_2d: f64,
    pub los_visible: bool,
    pub los_detected: bool,
    pub paths: usize,
    pub associations: usize,
    pub state_dim: usize,
    pub clock_bias_ns: f64,
    /// `y:z` per VUE, separated by `;`.
    pub vues: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub javelin_rows: Vec<EpochRow>,
    pub baseline_rows: Vec<EpochRow>,
    pub javelin: MetricsReport,
    pub baseline: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub javelin: MetricsReport,
    pub tenfiloc: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub seeds: Vec<SeedResult>,
    pub javelin: MetricsReport,
    pub baseline: MetricsReport,
}

const STREAM_INIT: u64 = 1;
const STREAM_ODOMETRY: u64 = 2;
const STREAM_CLOCK: u64 = 3;
const STREAM_BLOCKING: u64 = 4;
const STREAM_CHANNEL: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Independent channel generator per epoch, so that a path appearing or
/// disappearing does not shift later epochs' noise.
fn channel_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(STREAM_CHANNEL);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn vue_column(tracks: &TrackSet) -> String {
    (1..tracks.num_tracks())
        .map(|l| {
            let v = tracks.vue_position(l);
            format!("{}:{}", v.y, v.z)
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Runs one seed end to end.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedResult> {
    let sc = &cfg.scenario;
    let scene = if cfg.rrm_enabled { sc.scene() } else { sc.scene().without_rrms() };
    let mut spec = sc.trajectory.clone();
    if let Some(n) = cfg.epochs {
        spec.samples = n;
    }
    let truth = gen_trajectory(&spec, &sc.tunnel)?;
    let layout = build_ura_layout(&sc.anchor);
    let origin = sc.anchor.position;
    let ambiguity = range_ambiguity(&sc.grid);
    let q = cfg.mode.blocking_probability();

    let mut init_rng = stream(seed, STREAM_INIT);
    let mut odo_rng = stream(seed, STREAM_ODOMETRY);
    let mut clock_rng = stream(seed, STREAM_CLOCK);
    let mut block_rng = stream(seed, STREAM_BLOCKING);

    let mut tracks = match truth.first() {
        Some(first) => {
            let fix = first.position
                + Vec3::new(sc.init_sigma * gauss(&mut init_rng), sc.init_sigma * gauss(&mut init_rng), 0.0);
            let mut p = nalgebra::DMatrix::zeros(3, 3);
            let prior = sc.prior_sigma.unwrap_or(sc.filter.sigma_birth);
            p[(0, 0)] = prior.powi(2).max(1e-6);
            p[(1, 1)] = prior.powi(2).max(1e-6);
            p[(2, 2)] = sc.filter.z_floor.max(1e-6);
            TrackSet::with_covariance(fix, p)
        }
        None => TrackSet::new(Vec3::zeros(), 1.0),
    };

    let mut javelin_rows = Vec::with_capacity(truth.len());
    let mut baseline_rows = Vec::with_capacity(truth.len());
    for (k, sample) in truth.iter().enumerate() {
        let odometry = if k == 0 {
            Odometry { speed: 0.0, heading: 0.0, dt: 0.0 }
        } else {
            let prev = &truth[k - 1];
            Odometry {
                speed: prev.speed + sc.filter.sigma_speed * gauss(&mut odo_rng),
                heading: prev.heading + sc.filter.sigma_heading * gauss(&mut odo_rng),
                dt: sample.time - prev.time,
            }
        };
        let bias = draw_clock_bias(&sc.clock, &mut clock_rng);
        let blocked = block_rng.random::<f64>() < q;

        // the anchor picks the array facing its own estimate of the UE
        let pose = sc.anchor.array_pose(sc.anchor.facing_array(&tracks.ue_position()));
        let mut rng = channel_rng(seed, k);
        let opts = TraceOptions { los_blocked: blocked, clock_bias: 0.0, wavefront: sc.wavefront };
        let paths = trace_paths(&scene, &pose, &layout, sample, &sc.grid, &opts, &mut rng);
        let params = if paths.is_empty() {
            Vec::new()
        } else {
            let h = shift_delay(&observe(&synth_channel(&paths, &sc.grid), &sc.grid, &mut rng), &sc.grid, bias);
            match extract_paths(&h, paths.len(), &sc.grid, &layout, &pose, &sc.extract) {
                Ok(x) => x.params,
                Err(Error::Numerical(msg)) => {
                    log::debug!("seed {seed} epoch {k}: extraction failed: {msg}");
                    Vec::new()
                }
                Err(e) => return Err(e),
            }
        };

        let z = sanitize_measurements(&params, Some(ambiguity));
        let (next, diag) = track_epoch(&tracks, &z, &origin, &odometry, &sc.filter);
        if !next.s.iter().all(|v| v.is_finite()) || !next.p.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!("tracker state diverged at seed {seed}, epoch {k}")));
        }
        tracks = next;

        let p_true = sample.position;
        let row = |est: Option<Vec3>, los_detected: bool, associations: usize, dim: usize, vues: String| {
            let e = est.map(|p| p - p_true);
            EpochRow {
                seed,
                epoch: k,
                time: sample.time,
                available: est.is_some(),
                est_x: est.map_or(f64::NAN, |p| p.x),
                est_y: est.map_or(f64::NAN, |p| p.y),
                est_z: est.map_or(f64::NAN, |p| p.z),
                true_x: p_true.x,
                true_y: p_true.y,
                true_z: p_true.z,
                error_2d: e.map_or(f64::NAN, |e| e.x.hypot(e.y)),
                los_visible: !blocked,
                los_detected,
                paths: z.paths.len(),
                associations,
                state_dim: dim,
                clock_bias_ns: bias * 1e9,
                vues,
            }
        };
        javelin_rows.push(row(Some(tracks.ue_position()), diag.los, diag.associations, tracks.dim(), vue_column(&tracks)));
        let fix = tenfiloc_snapshot(&params, &origin, sc.filter.los_ratio);
        baseline_rows.push(row(fix.map(|f| f.position), fix.is_some(), 0, 0, String::new()));
    }

    let errors = |rows: &[EpochRow]| -> Vec<Vec3> {
        rows.iter()
            .filter(|r| r.available)
            .map(|r| Vec3::new(r.est_x - r.true_x, r.est_y - r.true_y, r.est_z - r.true_z))
            .collect()
    };
    let javelin = compute_metrics(&errors(&javelin_rows), javelin_rows.len());
    let baseline = compute_metrics(&errors(&baseline_rows), baseline_rows.len());
    Ok(SeedResult { seed, javelin_rows, baseline_rows, javelin, baseline })
}

/// All seeds, in parallel; results are ordered by position in `cfg.seeds`.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let seeds: Vec<SeedResult> = cfg.seeds.par_iter().map(|s| run_seed(cfg, *s)).collect::<Result<_>>()?;
    let pooled = |pick: fn(&SeedResult) -> &Vec<EpochRow>| {
        let rows: Vec<&EpochRow> = seeds.iter().flat_map(|s| pick(s).iter()).collect();
        let errs: Vec<Vec3> = rows
            .iter()
            .filter(|r| r.available)
            .map(|r| Vec3::new(r.est_x - r.true_x, r.est_y - r.true_y, r.est_z - r.true_z))
            .collect();
        compute_metrics(&errs, rows.len())
    };
    let javelin = pooled(|s| &s.javelin_rows);
    let baseline = pooled(|s| &s.baseline_rows);
    Ok(RunOutput { seeds, javelin, baseline })
}

fn write_rows(path: &Path, rows: impl Iterator<Item = EpochRow>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_cdf(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["error_2d", "fraction"])?;
    for (e, f) in cdf {
        w.write_record([e.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `config.toml`, per-epoch CSVs, CDF CSVs and `metrics.json`.
pub fn write_results(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_rows(&dir.join("javelin.csv"), out.seeds.iter().flat_map(|s| s.javelin_rows.iter().cloned()))?;
    write_rows(&dir.join("tenfiloc.csv"), out.seeds.iter().flat_map(|s| s.baseline_rows.iter().cloned()))?;
    write_cdf(&dir.join("javelin_cdf.csv"), &out.javelin.cdf)?;
    write_cdf(&dir.join("tenfiloc_cdf.csv"), &out.baseline.cdf)?;
    let per_seed: Vec<SeedSummary> = out
        .seeds
        .iter()
        .map(|s| SeedSummary { seed: s.seed, javelin: s.javelin.clone(), tenfiloc: s.baseline.clone() })
        .collect();
    let json = serde_json::json!({
        "mode": cfg.mode.to_string(),
        "rrm_enabled": cfg.rrm_enabled,
        "javelin": out.javelin,
        "tenfiloc": out.baseline,
        "per_seed": per_seed,
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| Error::numerical(e.to_string()))?;
    std::fs::write(dir.join("metrics.json"), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn metrics_of_zero_errors() {
        let m = compute_metrics(&[Vec3::zeros(); 4], 4);
        assert_eq!((m.rmse_2d, m.mae_2d, m.y_mae), (0.0, 0.0, 0.0));
        assert_eq!(m.cdf.last().unwrap().1, 1.0);
        assert_eq!(m.availability, 1.0);
    }

    #[test]
    fn metrics_by_hand() {
        let m = compute_metrics(&[Vec3::new(3.0, 4.0, 9.0), Vec3::zeros()], 2);
        assert_relative_eq!(m.mae_2d, 2.5);
        assert_relative_eq!(m.rmse_2d, 12.5f64.sqrt());
        assert!((m.rmse_2d - 3.5355).abs() < 1e-4);
        let y = compute_metrics(&[Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 2.0, 0.0)], 3);
        assert_relative_eq!(y.y_mae, 4.0 / 3.0);
    }

    #[test]
    fn empty_report() {
        let m = compute_metrics(&[], 0);
        assert_eq!(m.availability, 0.0);
        assert!(m.cdf.is_empty());
        assert_eq!(compute_metrics(&[Vec3::zeros()], 4).availability, 0.25);
    }

    #[test]
    fn cdf_is_monotone_and_closed() {
        let errs: Vec<Vec3> = (0..37).map(|i| Vec3::new((i * 7 % 11) as f64, (i % 5) as f64 * 0.3, 0.0)).collect();
        let m = compute_metrics(&errs, 40);
        assert!(m.cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(m.cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn mode_strings() {
        assert_eq!("L".parse::<Mode>().unwrap(), Mode::Los);
        assert_eq!("N".parse::<Mode>().unwrap(), Mode::Nlos);
        assert_eq!("N@0.5".parse::<Mode>().unwrap(), Mode::PartialNlos(0.5));
        assert!("N@1.5".parse::<Mode>().is_err());
        assert!("X".parse::<Mode>().is_err());
        assert_eq!(Mode::PartialNlos(0.5).to_string(), "N@0.5");
    }

    #[test]
    fn default_config_roundtrips_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let partial = RunConfig::from_toml_str("mode = \"N@0.25\"\nseeds = [3, 4]\n").unwrap();
        assert_eq!(partial.mode, Mode::PartialNlos(0.25));
        assert_eq!(partial.seeds, vec![3, 4]);
    }

    #[test]
    fn bad_config_is_a_config_error() {
        let e = RunConfig::from_toml_str("mode = \"Q\"").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_toml_str("[scenario.filter]\ngate_probability = 1.5\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_toml_str("seeds = [1,\n").unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
    }

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::default();
        let sc = &mut cfg.scenario;
        sc.anchor.rows = 4;
        sc.anchor.cols = 4;
        sc.grid = GridSpec::from_srs(16, 20e6, 30e3, 8, 12, 0.5e-3);
        cfg.epochs = Some(4);
        cfg.seeds = vec![7, 8];
        cfg
    }

    #[test]
    fn zero_epochs() {
        let mut cfg = tiny();
        cfg.epochs = Some(0);
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.javelin.samples, 0);
        assert_eq!(out.javelin.availability, 0.0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = tiny();
        let dir = std::env::temp_dir().join(format!("tunnel-loc-det-{}", std::process::id()));
        let a = run_scenario(&cfg).unwrap();
        write_results(&cfg, &a, &dir.join("a")).unwrap();
        let b = run_scenario(&cfg).unwrap();
        write_results(&cfg, &b, &dir.join("b")).unwrap();
        for f in ["javelin.csv", "tenfiloc.csv", "metrics.json", "javelin_cdf.csv", "config.toml"] {
            let x = std::fs::read(dir.join("a").join(f)).unwrap();
            let y = std::fs::read(dir.join("b").join(f)).unwrap();
            assert_eq!(x, y, "{f} differs");
        }
        // one thread or many, same answer
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_scenario(&cfg)).unwrap();
        assert_eq!(single.seeds[1].javelin_rows, a.seeds[1].javelin_rows);
        std::fs::remove_dir_all(&dir).ok();
    }
}
