//! Array-size limits for the single-reflector near-field (SR-NF) model.
//!
//! Setting: anchor reference element at the origin, a planar wall at `y = W`
//! facing the anchor, UE at `(R, y_u, z_u)`. Under the SR-NF model every
//! element is assumed to see the reflection at the specular point of the
//! reference element; the exact wavefront instead comes from the VUE. The
//! largest array side for which the two phase patterns stay within
//! `max_phase_error` is
//!
//! ```text
//! M_max = 1 + sqrt(eps * lambda * R * W / (pi * |W - y_u|)) / d
//! ```
//!
//! which is `1 + 2 sqrt(R W eps / (lambda pi |W - y_u|))` at `d = lambda / 2`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::raygen::{mirror_image, specular_point};
use crate::scene::Panel;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Longitudinal anchor-UE distance R.
    pub range: f64,
    /// Anchor-to-wall distance W.
    pub wall_distance: f64,
    /// UE transverse coordinate y_u.
    pub ue_lateral: f64,
    /// UE height z_u relative to the anchor (3D case).
    pub ue_height: f64,
    /// Maximum tolerable phase error, radians.
    pub max_phase_error: f64,
    pub wavelength: f64,
    /// Inter-element spacing d.
    pub spacing: f64,
}

impl BoundInputs {
    /// Half-wavelength spacing, planar case.
    pub fn new(range: f64, wall_distance: f64, ue_lateral: f64, max_phase_error: f64, wavelength: f64) -> Self {
        BoundInputs {
            range,
            wall_distance,
            ue_lateral,
            ue_height: 0.0,
            max_phase_error,
            wavelength,
            spacing: wavelength / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.range > 0.0
            && self.wall_distance > 0.0
            && self.max_phase_error >= 0.0
            && self.wavelength > 0.0
            && self.spacing > 0.0
            && [self.ue_lateral, self.ue_height].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::config("bound inputs need R, W, lambda, d > 0 and eps >= 0"))
        }
    }

    /// UE position in the bound's frame.
    pub fn ue(&self) -> Vec3 {
        Vec3::new(self.range, self.ue_lateral, self.ue_height)
    }

    /// The wall `y = W`, facing the anchor, effectively unbounded.
    pub fn wall(&self) -> Panel {
        Panel::new(0, Vec3::new(0.0, self.wall_distance, 0.0), Vec3::new(0.0, -1.0, 0.0), (1e6, 1e6), 0.0)
    }
}

/// Planar bound. Fails with [`Error::Unbounded`] when the UE sits on the wall
/// line, where the Fresnel error term vanishes.
pub fn mmax_2d(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let gap = (inp.wall_distance - inp.ue_lateral).abs();
    if gap < 1e-9 {
        return Err(Error::Unbounded(format!("|W - y_u| = {gap:e}")));
    }
    let aperture = (inp.max_phase_error * inp.wavelength * inp.range * inp.wall_distance / (PI * gap)).sqrt();
    Ok(1.0 + aperture / inp.spacing)
}

/// Anchor-to-VUE distance `rho = |(R, 2W - y_u, z_u)|`.
pub fn vue_distance_3d(range: f64, wall_distance: f64, ue_lateral: f64, ue_height: f64) -> f64 {
    Vec3::new(range, 2.0 * wall_distance - ue_lateral, ue_height).norm()
}

/// Generalised bound `1 + sqrt(eps * lambda * rho / pi) / d`.
pub fn mmax_3d(rho: f64, max_phase_error: f64, wavelength: f64, spacing: f64) -> Result<f64> {
    if !(rho > 0.0 && wavelength > 0.0 && spacing > 0.0 && max_phase_error >= 0.0) {
        return Err(Error::config("mmax_3d needs rho, lambda, d > 0 and eps >= 0"));
    }
    Ok(1.0 + (max_phase_error * wavelength * rho / PI).sqrt() / spacing)
}

/// Second-order prediction of the worst element phase error for an array of
/// side `m`: `(2 pi / lambda) |W - y_u| / (2 R W) ((m - 1) d)^2`.
pub fn phase_error_fresnel(inp: &BoundInputs, m: usize) -> f64 {
    let gap = (inp.wall_distance - inp.ue_lateral).abs();
    let aperture = (m.saturating_sub(1)) as f64 * inp.spacing;
    2.0 * PI / inp.wavelength * gap / (2.0 * inp.range * inp.wall_distance) * aperture * aperture
}

/// Exact worst-case phase difference between the VUE wavefront and the
/// single-reflector wavefront (specular point of element 0), no expansions.
///
/// `elements` are global positions; element 0 is the reference.
pub fn phase_error_exact(elements: &[Vec3], ue: &Vec3, panel: &Panel, wavelength: f64) -> Result<f64> {
    let reference = *elements.first().ok_or_else(|| Error::geometry("empty array"))?;
    if panel.signed_distance(ue).abs() <= 1e-9 && panel.signed_distance(&reference) > 1e-9 {
        // UE on the mirror plane: both wavefronts originate at the UE
        return Ok(0.0);
    }
    let hit = specular_point(ue, &reference, panel);
    if !hit.valid {
        return Err(Error::geometry("no valid specular point for the reference element"));
    }
    let vue = mirror_image(ue, panel);
    let s = hit.point;
    let v0 = (vue - reference).norm();
    let s0 = (s - reference).norm();
    let worst = elements
        .iter()
        .map(|e| (((vue - e).norm() - v0) - ((s - e).norm() - s0)).abs())
        .fold(0.0, f64::max);
    Ok(2.0 * PI / wavelength * worst)
}

/// Projector-form residual `|P_perp p_m|^2 / (2 rho)` with `u = p_v / rho`,
/// one entry per element (positions relative to the reference element).
pub fn residual_3d(elements: &[Vec3], vue: &Vec3) -> Vec<f64> {
    let rho = vue.norm();
    let u = vue / rho;
    elements
        .iter()
        .map(|p| {
            let perp = p - u * u.dot(p);
            perp.norm_squared() / (2.0 * rho)
        })
        .collect()
}

/// Square `side x side` array in the horizontal plane: element 0 at the
/// origin, rows along +x, columns along +y.
pub fn horizontal_square_array(side: usize, spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            out.push(Vec3::new(r as f64 * spacing, c as f64 * spacing, 0.0));
        }
    }
    out
}

/// Exact phase error for a horizontal square array of the given side.
pub fn exact_error_square(inp: &BoundInputs, side: usize) -> Result<f64> {
    let elements = horizontal_square_array(side, inp.spacing);
    phase_error_exact(&elements, &inp.ue(), &inp.wall(), inp.wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub range: f64,
    pub wall_distance: f64,
    pub ue_lateral: f64,
    pub max_phase_error: f64,
    pub wavelength: f64,
    pub mmax_2d: f64,
    pub mmax_3d: f64,
    /// Exact error of a `floor(mmax_2d)`-sided square array.
    pub exact_error_at_mmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ranges: Vec<f64>,
    pub wall_distances: Vec<f64>,
    pub ue_laterals: Vec<f64>,
    pub max_phase_errors: Vec<f64>,
    pub wavelength: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            ranges: vec![3.5, 5.0, 10.0, 20.0, 50.0],
            wall_distances: vec![3.0, 5.0],
            ue_laterals: vec![0.5, 1.5, 2.5],
            max_phase_errors: vec![0.15],
            wavelength: crate::SPEED_OF_LIGHT / 5.9e9,
        }
    }
}

pub fn sweep_row(inp: &BoundInputs) -> Result<SweepRow> {
    let m2 = mmax_2d(inp)?;
    let rho = vue_distance_3d(inp.range, inp.wall_distance, inp.ue_lateral, inp.ue_height);
    let m3 = mmax_3d(rho, inp.max_phase_error, inp.wavelength, inp.spacing)?;
    let side = (m2.floor() as usize).max(1);
    Ok(SweepRow {
        range: inp.range,
        wall_distance: inp.wall_distance,
        ue_lateral: inp.ue_lateral,
        max_phase_error: inp.max_phase_error,
        wavelength: inp.wavelength,
        mmax_2d: m2,
        mmax_3d: m3,
        exact_error_at_mmax: exact_error_square(inp, side)?,
    })
}

/// Cartesian product of the grid; combinations with `y_u >= W` are skipped.
pub fn bounds_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &r in &grid.ranges {
        for &w in &grid.wall_distances {
            for &y in &grid.ue_laterals {
                if y >= w {
                    continue;
                }
                for &e in &grid.max_phase_errors {
                    rows.push(sweep_row(&BoundInputs::new(r, w, y, e, grid.wavelength))?);
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SPEED_OF_LIGHT;
    use proptest::prelude::*;

    fn lambda() -> f64 {
        SPEED_OF_LIGHT / 5.9e9
    }

    fn reference() -> BoundInputs {
        BoundInputs::new(3.5, 3.0, 2.5, 0.15, lambda())
    }

    #[test]
    fn reference_geometry_bound() {
        let m = mmax_2d(&reference()).unwrap();
        assert!((m - 9.88).abs() < 0.01, "{m}");
        assert_eq!((m.floor() as usize).pow(2), 81);
        assert_eq!((m.round() as usize).pow(2), 100);
    }

    #[test]
    fn zero_tolerance_gives_one() {
        let inp = BoundInputs { max_phase_error: 0.0, ..reference() };
        assert_eq!(mmax_2d(&inp).unwrap(), 1.0);
        assert_eq!(mmax_3d(10.0, 0.0, lambda(), lambda() / 2.0).unwrap(), 1.0);
    }

    #[test]
    fn longer_range_example() {
        let inp = BoundInputs { range: 14.0, ..reference() };
        let direct = 1.0 + 2.0 * (14.0 * 3.0 * 0.15 / (lambda() * 0.5 * PI)).sqrt();
        let m = mmax_2d(&inp).unwrap();
        assert!((m - direct).abs() < 1e-12);
        assert!((m - 18.77).abs() < 0.01);
    }

    #[test]
    fn on_wall_line_is_unbounded() {
        let inp = BoundInputs { ue_lateral: 3.0, ..reference() };
        assert!(matches!(mmax_2d(&inp), Err(Error::Unbounded(_))));
    }

    #[test]
    fn three_d_examples() {
        let m = mmax_3d(50.0, 0.15, 0.050812, 0.050812 / 2.0).unwrap();
        assert!((m - 14.71).abs() < 0.01, "{m}");
        let rho = vue_distance_3d(3.5, 3.0, 2.5, 0.0);
        assert!((rho - 4.9497).abs() < 1e-4);
        let m3 = mmax_3d(rho, 0.15, lambda(), lambda() / 2.0).unwrap();
        let direct = 1.0 + 2.0 * (rho * 0.15 / (lambda() * PI)).sqrt();
        assert!((m3 - direct).abs() < 1e-12);
        assert!((m3 - 5.313).abs() < 1e-3, "{m3}");
    }

    #[test]
    fn fresnel_inverts_bound() {
        let inp = reference();
        let m = mmax_2d(&inp).unwrap();
        // evaluate the formula at a real-valued side
        let aperture = (m - 1.0) * inp.spacing;
        let e = 2.0 * PI / inp.wavelength * 0.5 / (2.0 * 3.5 * 3.0) * aperture * aperture;
        assert!((e - 0.15).abs() < 1e-12);
        assert_eq!(phase_error_fresnel(&inp, 1), 0.0);
    }

    #[test]
    fn fresnel_reference_value() {
        let e = phase_error_fresnel(&reference(), 10);
        let direct = 2.0 * PI / lambda() * (0.5 / 21.0) * (9.0 * lambda() / 2.0).powi(2);
        assert!((e - direct).abs() < 1e-12);
        assert!((e - 0.1539).abs() < 1e-3, "{e}");
    }

    #[test]
    fn exact_error_trivial_cases() {
        let inp = reference();
        assert_eq!(exact_error_square(&inp, 1).unwrap(), 0.0);
        let on_wall = BoundInputs { ue_lateral: 3.0 - 1e-12, ..inp };
        // UE on the plane: reflection point independent of the element
        assert!(exact_error_square(&on_wall, 10).unwrap() < 1e-6);
    }

    #[test]
    fn exact_error_reference_geometry() {
        let inp = reference();
        let e = exact_error_square(&inp, 10).unwrap();
        assert!(e <= 0.15 * 1.10, "{e}");
    }

    #[test]
    fn residual_matches_planar_error_far_out() {
        // y_u = 0 and R >= 12 W: projector residual vs the planar Fresnel term
        for &(r, w) in &[(40.0, 3.0), (60.0, 5.0), (36.0, 2.0)] {
            let inp = BoundInputs::new(r, w, 0.0, 0.15, lambda());
            let m = 12;
            let elements: Vec<Vec3> = (0..m).map(|i| Vec3::new(0.0, i as f64 * inp.spacing, 0.0)).collect();
            let vue = mirror_image(&inp.ue(), &inp.wall());
            let worst = residual_3d(&elements, &vue).into_iter().fold(0.0, f64::max);
            let phase = 2.0 * PI / inp.wavelength * worst;
            let fres = phase_error_fresnel(&inp, m);
            assert!((phase / fres - 1.0).abs() < 0.05, "{r} {w}: {phase} vs {fres}");
        }
    }

    #[test]
    fn sweep_skips_invalid_and_writes_csv() {
        let rows = bounds_sweep(&SweepGrid::default()).unwrap();
        assert_eq!(rows.len(), 5 * (3 + 3));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("range,wall_distance,ue_lateral,max_phase_error,wavelength,mmax_2d,mmax_3d,exact_error_at_mmax"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    fn geometry() -> impl Strategy<Value = BoundInputs> {
        (1.0f64..100.0, 2.0f64..6.0, 0.0f64..1.0, 0.01f64..0.5)
            .prop_map(|(r, w, f, e)| BoundInputs::new(r, w, f * (w - 0.5), e, SPEED_OF_LIGHT / 5.9e9))
    }

    proptest! {
        #[test]
        fn monotone_in_each_argument(inp in geometry(), k in 1.01f64..3.0) {
            let base = mmax_2d(&inp).unwrap();
            let longer = BoundInputs { range: inp.range * k, ..inp };
            prop_assert!(mmax_2d(&longer).unwrap() > base);
            let looser = BoundInputs { max_phase_error: inp.max_phase_error * k, ..inp };
            prop_assert!(mmax_2d(&looser).unwrap() > base);
            // larger wavelength at fixed spacing: larger aperture; at fixed
            // half-wavelength spacing: smaller bound
            let lam = inp.wavelength * k;
            let redder = BoundInputs { wavelength: lam, spacing: lam / 2.0, ..inp };
            prop_assert!(mmax_2d(&redder).unwrap() < base);
            // moving the UE away from the wall line
            let closer_to_anchor = BoundInputs { ue_lateral: inp.ue_lateral - 0.1, ..inp };
            prop_assert!(mmax_2d(&closer_to_anchor).unwrap() < base);
            // W up with y_u fixed: W / (W - y_u) decreases, but the bound in
            // W alone (y_u = 0) is constant; with y_u > 0 it increases
            let wider = BoundInputs { wall_distance: inp.wall_distance * k, ..inp };
            prop_assert!(mmax_2d(&wider).unwrap() <= base + 1e-12);
        }

        #[test]
        fn square_root_scaling(r in 1.0f64..100.0, w in 1.0f64..10.0, e in 0.01f64..0.5) {
            let inp = BoundInputs::new(r, w, w / 2.0, e, SPEED_OF_LIGHT / 5.9e9);
            let a = mmax_2d(&inp).unwrap() - 1.0;
            let b = mmax_2d(&BoundInputs { range: 4.0 * r, ..inp }).unwrap() - 1.0;
            prop_assert!((b / (2.0 * a) - 1.0).abs() < 1e-9);
        }
    }
}
