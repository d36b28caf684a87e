//! Snapshot positioning from the LoS tuple, without tracking.
//!
//! The LoS path is picked by the same ratio rule the tracker uses for
//! re-identification. Its range is the curvature radius when one was
//! estimated and the clock-biased distance otherwise.

use crate::estimate::PathParamEstimate;
use crate::track::identify_los;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotFix {
    pub position: Vec3,
    /// Index into the parameter list of the path used.
    pub los_index: usize,
    /// The range came from `d` rather than from the curvature.
    pub biased_range: bool,
}

/// Position from one LoS tuple, relative frame origin `origin`.
pub fn los_tuple_position(los: &PathParamEstimate, origin: &Vec3) -> (Vec3, bool) {
    let (range, biased) = match los.kappa {
        Some(k) if k > 0.0 && k.is_finite() => (k, false),
        _ => (los.d, true),
    };
    let (sp, cp) = los.phi.sin_cos();
    let (ss, cs) = los.psi.sin_cos();
    (origin + range * Vec3::new(cs * cp, cs * sp, ss), biased)
}

/// Per-epoch fix, or `None` (outage) when no path passes the LoS rule.
pub fn tenfiloc_snapshot(params: &[PathParamEstimate], origin: &Vec3, gamma: f64) -> Option<SnapshotFix> {
    let usable: Vec<usize> = (0..params.len()).filter(|i| params[*i].valid).collect();
    let pairs: Vec<(f64, Option<f64>)> = usable.iter().map(|i| (params[*i].d, params[*i].kappa)).collect();
    let los_index = usable[identify_los(&pairs, gamma)?];
    let (position, biased_range) = los_tuple_position(&params[los_index], origin);
    Some(SnapshotFix { position, los_index, biased_range })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::Regime;
    use crate::{Complex, SPEED_OF_LIGHT};
    use approx::assert_relative_eq;

    fn tuple(phi: f64, psi: f64, kappa: Option<f64>, d: f64) -> PathParamEstimate {
        PathParamEstimate {
            alpha: Complex::new(1.0, 0.0),
            phi,
            psi,
            kappa,
            d,
            v: 0.0,
            regime: if kappa.is_some() { Regime::Nf } else { Regime::Ff },
            valid: true,
            unwrap_reliable: true,
            ff_angles: None,
        }
    }

    #[test]
    fn perfect_tuple() {
        let fix = tenfiloc_snapshot(&[tuple(0.0, 0.0, Some(20.0), 20.0)], &Vec3::zeros(), 0.2).unwrap();
        assert_relative_eq!(fix.position, Vec3::new(20.0, 0.0, 0.0), epsilon = 1e-12);
        assert!(!fix.biased_range);
    }

    #[test]
    fn biased_distance_without_curvature() {
        let bias = SPEED_OF_LIGHT * 50e-9;
        assert!((bias - 15.0).abs() < 0.02);
        let (p, biased) = los_tuple_position(&tuple(0.0, 0.0, None, 20.0 + bias), &Vec3::zeros());
        assert!(biased);
        assert_relative_eq!(p.x, 20.0 + bias, epsilon = 1e-12);
        assert!((p.x - 35.0).abs() < 0.02);
    }

    #[test]
    fn nlos_epoch_is_outage() {
        let params = [tuple(0.3, 0.0, Some(14.0), 30.0), tuple(-0.3, 0.0, None, 31.0)];
        assert!(tenfiloc_snapshot(&params, &Vec3::zeros(), 0.2).is_none());
    }

    #[test]
    fn picks_most_consistent_path() {
        let params = [tuple(0.3, 0.1, Some(24.0), 27.0), tuple(0.0, -0.2, Some(25.0), 25.3)];
        let fix = tenfiloc_snapshot(&params, &Vec3::new(1.0, 2.0, 3.0), 0.2).unwrap();
        assert_eq!(fix.los_index, 1);
        assert_relative_eq!((fix.position - Vec3::new(1.0, 2.0, 3.0)).norm(), 25.0, epsilon = 1e-12);
    }
}
