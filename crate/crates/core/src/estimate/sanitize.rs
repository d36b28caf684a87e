//! Consistency checks and measurement stacking.
//!
//! Rules per path: a negative (or non-finite) `d` is discarded; a negative
//! curvature radius falls back to the far-field angles without a `kappa`
//! row; everything else is kept as near-field. `delta_d` is taken against
//! the path with the smallest `d`. When `d` is only known modulo a range
//! ambiguity, "smallest" means the path right after the largest circular gap.

use super::{PathParamEstimate, Regime};
use crate::Complex;

#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasurement {
    /// Index into the estimate list this came from.
    pub source: usize,
    pub alpha: Complex,
    pub phi: f64,
    pub psi: f64,
    /// `None` for far-field paths (no curvature row).
    pub kappa: Option<f64>,
    /// Distance made continuous with the reference path.
    pub d: f64,
    pub v: f64,
    /// `d - d_ref`; zero for the reference path.
    pub delta_d: f64,
    pub regime: Regime,
}

impl PathMeasurement {
    /// Number of angle/curvature rows: 3 (NF) or 2 (FF).
    pub fn geometry_rows(&self) -> usize {
        if self.kappa.is_some() {
            3
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementVector {
    pub paths: Vec<PathMeasurement>,
    /// Index into `paths` of the Δd reference.
    pub reference: Option<usize>,
}

impl MeasurementVector {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Row count `K`: angles (and curvature) per path plus one Δd per
    /// non-reference path.
    pub fn len(&self) -> usize {
        let geo: usize = self.paths.iter().map(|p| p.geometry_rows()).sum();
        geo + self.paths.len().saturating_sub(1)
    }

    /// `[phi..., psi..., kappa (NF paths)..., delta_d (non-reference)...]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.paths.iter().map(|p| p.phi).collect();
        z.extend(self.paths.iter().map(|p| p.psi));
        z.extend(self.paths.iter().filter_map(|p| p.kappa));
        z.extend(
            self.paths
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != self.reference)
                .map(|(_, p)| p.delta_d),
        );
        z
    }
}

/// Index of the circularly smallest value: the element following the
/// largest gap on the circle of circumference `period`.
fn circular_minimum(values: &[f64], period: f64) -> usize {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let n = order.len();
    let mut best = (values[order[0]] + period - values[order[n - 1]], order[0]);
    for w in 1..n {
        let gap = values[order[w]] - values[order[w - 1]];
        if gap > best.0 {
            best = (gap, order[w]);
        }
    }
    best.1
}

/// Applies the consistency rules and stacks the surviving paths.
/// `range_ambiguity` is `c / df` when `d` is wrapped, `None` otherwise.
pub fn sanitize_measurements(params: &[PathParamEstimate], range_ambiguity: Option<f64>) -> MeasurementVector {
    let mut paths: Vec<PathMeasurement> = Vec::new();
    for (i, p) in params.iter().enumerate() {
        if !p.valid || !p.d.is_finite() || p.d < 0.0 {
            continue;
        }
        let (phi, psi, kappa, regime) = match (p.regime, p.kappa) {
            (Regime::Nf, Some(k)) if k > 0.0 => (p.phi, p.psi, Some(k), Regime::Nf),
            _ => match p.ff_angles {
                Some((phi, psi)) => (phi, psi, None, Regime::Ff),
                None if p.regime == Regime::Ff => (p.phi, p.psi, None, Regime::Ff),
                None => continue,
            },
        };
        if !phi.is_finite() || !psi.is_finite() {
            continue;
        }
        paths.push(PathMeasurement { source: i, alpha: p.alpha, phi, psi, kappa, d: p.d, v: p.v, delta_d: 0.0, regime });
    }
    if paths.is_empty() {
        return MeasurementVector::default();
    }
    let ds: Vec<f64> = paths.iter().map(|p| p.d).collect();
    let reference = match range_ambiguity {
        Some(a) if a > 0.0 => circular_minimum(&ds, a),
        _ => (0..ds.len()).min_by(|a, b| ds[*a].total_cmp(&ds[*b])).unwrap(),
    };
    let d_ref = ds[reference];
    for p in paths.iter_mut() {
        let diff = match range_ambiguity {
            Some(a) if a > 0.0 => (p.d - d_ref).rem_euclid(a),
            _ => p.d - d_ref,
        };
        p.delta_d = diff;
        p.d = d_ref + diff;
    }
    paths[reference].delta_d = 0.0;
    MeasurementVector { paths, reference: Some(reference) }
}
