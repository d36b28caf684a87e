//! Image-method single-bounce ray generation.
//!
//! Every reflector is treated as a mirror: the reflected path from the UE is
//! the straight line from its mirror image (the virtual UE, VUE) to each array
//! element, so per-element lengths are exact without ever locating the
//! per-element reflection points.
//!
//! Doppler sign: `f_d = -(f_c / c) * d/dt (path length)`, so a UE moving away
//! along the path gives a negative Doppler.

use rand::Rng;
use serde::Serialize;

use crate::channel::GridSpec;
use crate::scene::{Panel, Pose, Scene, TrajectorySample, UraLayout};
use crate::{Complex, Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    LineOfSight,
    Reflected,
    /// Synthetic path from a moving scatterer (harness extension).
    Clutter,
}

/// How per-element path-length offsets are generated for reflected paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wavefront {
    /// Exact spherical wave from the VUE.
    #[default]
    Exact,
    /// Spherical wave from the single specular point of the reference element.
    SingleReflector,
}

/// Ground truth for one propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTruth {
    pub kind: PathKind,
    pub panel_id: Option<u32>,
    /// Wave origin seen from the array: the UE for LoS, its mirror image for
    /// reflections.
    pub vue: Vec3,
    pub specular_point: Option<Vec3>,
    pub gain: Complex,
    pub delay: f64,
    pub doppler: f64,
    /// `d_m - d_0` per element; exactly zero for the reference element.
    pub delta: Vec<f64>,
    /// Geometric length to the reference element.
    pub distance_ref: f64,
}

/// Reflection of `ue` across the panel's infinite plane.
pub fn mirror_image(ue: &Vec3, panel: &Panel) -> Vec3 {
    ue - 2.0 * panel.signed_distance(ue) * panel.unit_normal
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecularHit {
    pub point: Vec3,
    /// Inside the finite panel and geometrically realisable.
    pub valid: bool,
}

/// Intersection of the segment `anchor_ref -> mirror_image(ue)` with the panel
/// plane.
pub fn specular_point(ue: &Vec3, anchor_ref: &Vec3, panel: &Panel) -> SpecularHit {
    let vue = mirror_image(ue, panel);
    let da = panel.signed_distance(anchor_ref);
    let dv = panel.signed_distance(&vue);
    let denom = da - dv;
    if denom.abs() < 1e-12 {
        return SpecularHit { point: *anchor_ref, valid: false };
    }
    let t = da / denom;
    let point = anchor_ref + t * (vue - anchor_ref);
    let same_side = da > 1e-9 && panel.signed_distance(ue) > 1e-9;
    let valid = same_side && (0.0..=1.0).contains(&t) && panel.contains(&point);
    SpecularHit { point, valid }
}

/// Per-epoch tracing options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub los_blocked: bool,
    /// Transmitter clock bias, seconds, added to every delay.
    pub clock_bias: f64,
    pub wavefront: Wavefront,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { los_blocked: false, clock_bias: 0.0, wavefront: Wavefront::Exact }
    }
}

/// Free-space amplitude `sqrt(P_tx) * lambda / (4 pi d)`, optionally attenuated.
pub fn path_amplitude(grid: &GridSpec, distance: f64, loss_db: f64) -> f64 {
    let p_tx = 10f64.powf((grid.tx_power_dbm - 30.0) / 10.0);
    p_tx.sqrt() * grid.wavelength() / (4.0 * std::f64::consts::PI * distance) * 10f64.powf(-loss_db / 20.0)
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex {
    Complex::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Traces the LoS path and one single-bounce path per panel with a valid
/// specular point. Panels sharing a plane whose specular points coincide are
/// merged, keeping the one with the lowest reflection loss.
#[allow(clippy::too_many_arguments)]
pub fn trace_paths<R: Rng + ?Sized>(
    scene: &Scene,
    pose: &Pose,
    layout: &UraLayout,
    ue: &TrajectorySample,
    grid: &GridSpec,
    opts: &TraceOptions,
    rng: &mut R,
) -> Vec<PathTruth> {
    let elements = layout.to_global(pose);
    let reference = elements[0];
    let p_u = ue.position;
    let velocity = ue.velocity();
    let k_doppler = grid.carrier_hz / SPEED_OF_LIGHT;
    let mut paths = Vec::new();

    if !opts.los_blocked {
        let d0 = (p_u - reference).norm();
        let delta = elements.iter().map(|e| (p_u - e).norm() - d0).collect::<Vec<_>>();
        let radial = (p_u - reference).normalize().dot(&velocity);
        paths.push(PathTruth {
            kind: PathKind::LineOfSight,
            panel_id: None,
            vue: p_u,
            specular_point: None,
            gain: random_phase(rng) * path_amplitude(grid, d0, 0.0),
            delay: d0 / SPEED_OF_LIGHT + opts.clock_bias,
            doppler: -k_doppler * radial,
            delta: zero_reference(delta),
            distance_ref: d0,
        });
    }

    let mut reflected: Vec<(PathTruth, f64)> = Vec::new();
    for panel in &scene.panels {
        let hit = specular_point(&p_u, &reference, panel);
        if !hit.valid {
            continue;
        }
        let vue = mirror_image(&p_u, panel);
        if let Some((existing, loss)) =
            reflected.iter_mut().find(|(p, _)| (p.vue - vue).norm() < 1e-9)
        {
            if panel.reflection_loss_db < *loss {
                *loss = panel.reflection_loss_db;
                existing.panel_id = Some(panel.id);
                existing.gain = existing.gain / existing.gain.norm()
                    * path_amplitude(grid, existing.distance_ref, panel.reflection_loss_db);
            }
            continue;
        }
        let d0 = (vue - reference).norm();
        let delta = match opts.wavefront {
            Wavefront::Exact => elements.iter().map(|e| (vue - e).norm() - d0).collect::<Vec<_>>(),
            Wavefront::SingleReflector => {
                let s = hit.point;
                let s0 = (s - reference).norm();
                elements.iter().map(|e| (s - e).norm() - s0).collect::<Vec<_>>()
            }
        };
        let n = panel.unit_normal;
        let mirrored_velocity = velocity - 2.0 * n.dot(&velocity) * n;
        let radial = (vue - reference).normalize().dot(&mirrored_velocity);
        reflected.push((
            PathTruth {
                kind: PathKind::Reflected,
                panel_id: Some(panel.id),
                vue,
                specular_point: Some(hit.point),
                gain: random_phase(rng) * path_amplitude(grid, d0, panel.reflection_loss_db),
                delay: d0 / SPEED_OF_LIGHT + opts.clock_bias,
                doppler: -k_doppler * radial,
                delta: zero_reference(delta),
                distance_ref: d0,
            },
            panel.reflection_loss_db,
        ));
    }
    paths.extend(reflected.into_iter().map(|(p, _)| p));
    paths
}

fn zero_reference(mut delta: Vec<f64>) -> Vec<f64> {
    if let Some(first) = delta.first_mut() {
        *first = 0.0;
    }
    delta
}

/// A path from a moving scatterer at `origin`: geometry of a LoS-like wave
/// from `origin` with an arbitrary radial speed (m/s, positive approaching).
pub fn clutter_path<R: Rng + ?Sized>(
    pose: &Pose,
    layout: &UraLayout,
    origin: &Vec3,
    radial_speed: f64,
    loss_db: f64,
    grid: &GridSpec,
    clock_bias: f64,
    rng: &mut R,
) -> PathTruth {
    let elements = layout.to_global(pose);
    let d0 = (origin - elements[0]).norm();
    let delta = elements.iter().map(|e| (origin - e).norm() - d0).collect();
    PathTruth {
        kind: PathKind::Clutter,
        panel_id: None,
        vue: *origin,
        specular_point: None,
        gain: random_phase(rng) * path_amplitude(grid, d0, loss_db),
        delay: d0 / SPEED_OF_LIGHT + clock_bias,
        doppler: grid.carrier_hz / SPEED_OF_LIGHT * radial_speed,
        delta: zero_reference(delta),
        distance_ref: d0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ura, AnchorSpec, Orientation, TunnelSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wall(y: f64) -> Panel {
        Panel::new(7, Vec3::new(0.0, y, 0.0), Vec3::new(0.0, -1.0, 0.0), (1e3, 1e3), 3.0)
    }

    #[test]
    fn mirror_across_wall() {
        let (r, w, yu, zu) = (3.5, 3.0, 2.5, 1.2);
        let v = mirror_image(&Vec3::new(r, yu, zu), &wall(w));
        assert!((v - Vec3::new(r, 2.0 * w - yu, zu)).norm() < 1e-12);
        assert_eq!(mirror_image(&Vec3::new(10.0, 1.0, 0.0), &wall(3.0)), Vec3::new(10.0, 5.0, 0.0));
    }

    #[test]
    fn mirror_fixed_point_on_plane() {
        let p = Vec3::new(4.0, 3.0, 0.5);
        assert!((mirror_image(&p, &wall(3.0)) - p).norm() < 1e-15);
    }

    #[test]
    fn specular_point_examples() {
        let hit = specular_point(&Vec3::new(3.5, 2.5, 0.0), &Vec3::zeros(), &wall(3.0));
        assert!(hit.valid);
        assert!((hit.point.x - 3.5 * 3.0 / (6.0 - 2.5)).abs() < 1e-12);
        assert!((hit.point.x - 3.0).abs() < 1e-12);

        let r = 17.0;
        let hit = specular_point(&Vec3::new(r, 0.0, 0.0), &Vec3::zeros(), &wall(3.0));
        assert!((hit.point.x - r / 2.0).abs() < 1e-12);

        let hit = specular_point(&Vec3::new(10.0, 1.0, 0.0), &Vec3::zeros(), &wall(3.0));
        assert!((hit.point - Vec3::new(6.0, 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn specular_point_opposite_sides_invalid() {
        let hit = specular_point(&Vec3::new(10.0, 4.0, 0.0), &Vec3::zeros(), &wall(3.0));
        assert!(!hit.valid);
    }

    fn test_scene() -> (Scene, Pose, UraLayout, GridSpec) {
        let grid = GridSpec::default();
        let anchor = AnchorSpec {
            position: Vec3::zeros(),
            arrays: vec![Orientation::new(0.0, 0.0)],
            rows: 4,
            cols: 4,
            spacing: grid.wavelength() / 2.0,
        };
        let scene = Scene { tunnel: TunnelSpec::default(), anchor: anchor.clone(), panels: vec![wall(10.0)] };
        let pose = anchor.array_pose(0);
        let layout = ura(4, 4, anchor.spacing);
        (scene, pose, layout, grid)
    }

    fn sample(p: Vec3, speed: f64, heading: f64) -> TrajectorySample {
        TrajectorySample { time: 0.0, position: p, speed, heading }
    }

    #[test]
    fn reflected_reference_distance() {
        let (scene, pose, layout, grid) = test_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let paths = trace_paths(&scene, &pose, &layout, &sample(Vec3::new(20.0, 2.5, 1.0), 0.0, 0.0), &grid,
            &TraceOptions::default(), &mut rng);
        assert_eq!(paths.len(), 2);
        let refl = &paths[1];
        assert_eq!(refl.kind, PathKind::Reflected);
        assert!((refl.distance_ref - Vec3::new(20.0, 17.5, 1.0).norm()).abs() < 1e-12);
        assert!((refl.distance_ref - 26.5941).abs() < 1e-4);
    }

    #[test]
    fn static_ue_zero_doppler() {
        let (scene, pose, layout, grid) = test_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let paths = trace_paths(&scene, &pose, &layout, &sample(Vec3::new(20.0, 2.5, 1.0), 0.0, 0.3), &grid,
            &TraceOptions::default(), &mut rng);
        assert!(paths.iter().all(|p| p.doppler == 0.0));
    }

    #[test]
    fn receding_ue_negative_doppler() {
        let (scene, pose, layout, grid) = test_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let paths = trace_paths(&scene, &pose, &layout, &sample(Vec3::new(20.0, 2.5, 1.0), 10.0, 0.0), &grid,
            &TraceOptions::default(), &mut rng);
        assert!(paths.iter().all(|p| p.doppler < 0.0));
        let towards = trace_paths(&scene, &pose, &layout,
            &sample(Vec3::new(20.0, 2.5, 1.0), 10.0, std::f64::consts::PI), &grid, &TraceOptions::default(), &mut rng);
        assert!(towards.iter().all(|p| p.doppler > 0.0));
    }

    #[test]
    fn los_blocked_removes_los() {
        let (scene, pose, layout, grid) = test_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = TraceOptions { los_blocked: true, ..Default::default() };
        let paths = trace_paths(&scene, &pose, &layout, &sample(Vec3::new(20.0, 2.5, 1.0), 1.0, 0.0), &grid,
            &opts, &mut rng);
        assert!(paths.iter().all(|p| p.kind == PathKind::Reflected));
    }

    #[test]
    fn los_vue_is_ue() {
        let (scene, pose, layout, grid) = test_scene();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p_u = Vec3::new(12.0, 2.0, 1.5);
        let paths = trace_paths(&scene, &pose, &layout, &sample(p_u, 1.0, 0.0), &grid,
            &TraceOptions::default(), &mut rng);
        assert_eq!(paths[0].vue, p_u);
    }

    #[test]
    fn coplanar_panels_merge_to_lowest_loss() {
        let (mut scene, pose, layout, grid) = test_scene();
        let mut rrm = wall(10.0);
        rrm.id = 9;
        rrm.reflection_loss_db = 0.0;
        rrm.rrm = true;
        scene.panels.push(rrm);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let paths = trace_paths(&scene, &pose, &layout, &sample(Vec3::new(20.0, 2.5, 1.0), 1.0, 0.0), &grid,
            &TraceOptions::default(), &mut rng);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[1].panel_id, Some(9));
        let expected = path_amplitude(&grid, paths[1].distance_ref, 0.0);
        assert!((paths[1].gain.norm() - expected).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn image_method_identity(x in 2.0f64..60.0, y in 0.2f64..9.5, z in 0.2f64..4.0,
                                 ax in -3.0f64..3.0, ay in 0.5f64..9.5, az in 0.5f64..4.5) {
            let panel = wall(10.0);
            let p_u = Vec3::new(x, y, z);
            let anchor = Vec3::new(ax, ay, az);
            let hit = specular_point(&p_u, &anchor, &panel);
            let vue = mirror_image(&p_u, &panel);
            let folded = (hit.point - anchor).norm() + (p_u - hit.point).norm();
            prop_assert!((folded - (vue - anchor).norm()).abs() < 1e-10);
            prop_assert!(panel.signed_distance(&hit.point).abs() < 1e-10);
        }

        #[test]
        fn reference_offset_zero_and_clock_cancels(x in 5.0f64..40.0, y in 0.5f64..9.0, bias in -1e-7f64..1e-7) {
            let (scene, pose, layout, grid) = test_scene();
            let ue = sample(Vec3::new(x, y, 1.0), 3.0, 0.1);
            let mut r1 = ChaCha8Rng::seed_from_u64(9);
            let mut r2 = ChaCha8Rng::seed_from_u64(9);
            let a = trace_paths(&scene, &pose, &layout, &ue, &grid, &TraceOptions::default(), &mut r1);
            let b = trace_paths(&scene, &pose, &layout, &ue, &grid,
                &TraceOptions { clock_bias: bias, ..Default::default() }, &mut r2);
            for p in a.iter().chain(b.iter()) {
                prop_assert_eq!(p.delta[0], 0.0);
            }
            let c = SPEED_OF_LIGHT;
            for i in 1..a.len() {
                let dd_a = (a[i].delay - a[0].delay) * c;
                let dd_b = (b[i].delay - b[0].delay) * c;
                prop_assert!((dd_a - dd_b).abs() < 1e-6);
            }
        }
    }
}
