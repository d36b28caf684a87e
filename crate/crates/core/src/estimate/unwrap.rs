//! Reliability-guided 2D phase unwrapping on the array grid.
//!
//! Pixels are ranked by the inverse of their local second differences; edges
//! between neighbours are processed from most to least reliable, merging
//! groups with the `2 pi` multiple that keeps the wrapped step across the
//! edge.

use std::f64::consts::{PI, TAU};

use crate::{wrap_angle, Complex};

#[derive(Debug, Clone, PartialEq)]
pub struct Unwrapped {
    /// Unwrapped phase, radians, zero at element 0.
    pub phase: Vec<f64>,
    /// False when some neighbouring pair still differs by more than `pi`.
    pub reliable: bool,
}

impl Unwrapped {
    /// Path-length offsets `lambda / (2 pi) * phase`.
    pub fn offsets(&self, wavelength: f64) -> Vec<f64> {
        self.phase.iter().map(|p| wavelength / TAU * p).collect()
    }
}

/// Second-difference reliability `1 / D` of every grid cell; cells without a
/// full neighbourhood use the differences that exist.
fn reliability(wrapped: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let at = |r: isize, c: isize| -> Option<f64> {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            None
        } else {
            Some(wrapped[r as usize * cols + c as usize])
        }
    };
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            let centre = at(r, c).unwrap();
            let mut d2 = 0.0;
            let mut terms = 0;
            for (dr, dc) in [(0, 1), (1, 0), (1, 1), (1, -1)] {
                if let (Some(a), Some(b)) = (at(r - dr, c - dc), at(r + dr, c + dc)) {
                    let s = wrap_angle(a - centre) - wrap_angle(centre - b);
                    d2 += s * s;
                    terms += 1;
                }
            }
            out[(r as usize) * cols + c as usize] = if terms == 0 { f64::MAX } else { 1.0 / (d2.sqrt() + 1e-300) };
        }
    }
    out
}

struct Groups {
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Groups {
    fn new(n: usize) -> Self {
        Groups { parent: (0..n).collect(), members: (0..n).map(|i| vec![i]).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

/// Unwraps the phases of `b_s` laid out row-major on a `rows x cols` grid
/// (element `m = r * cols + c`).
pub fn unwrap_phase_2d(b_s: &[Complex], rows: usize, cols: usize) -> Unwrapped {
    assert_eq!(b_s.len(), rows * cols, "steering vector does not match the grid");
    let n = rows * cols;
    let wrapped: Vec<f64> = b_s.iter().map(|v| v.arg()).collect();
    let rel = reliability(&wrapped, rows, cols);

    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(2 * n);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((rel[i] + rel[i + 1], i, i + 1));
            }
            if r + 1 < rows {
                edges.push((rel[i] + rel[i + cols], i, i + cols));
            }
        }
    }
    // most reliable first; ties by index for determinism
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut phase = wrapped.clone();
    let mut groups = Groups::new(n);
    for &(_, i, j) in &edges {
        let (gi, gj) = (groups.find(i), groups.find(j));
        if gi == gj {
            continue;
        }
        // move the smaller group
        let (keep, moved, anchor, other) = if groups.members[gi].len() >= groups.members[gj].len() {
            (gi, gj, i, j)
        } else {
            (gj, gi, j, i)
        };
        let target = phase[anchor] + wrap_angle(wrapped[other] - wrapped[anchor]);
        let shift = ((target - phase[other]) / TAU).round() * TAU;
        let moved_members = std::mem::take(&mut groups.members[moved]);
        for &p in &moved_members {
            phase[p] += shift;
        }
        groups.members[keep].extend(moved_members);
        groups.parent[moved] = keep;
    }

    let base = phase[0];
    for p in phase.iter_mut() {
        *p -= base;
    }
    let mut reliable = true;
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if (c + 1 < cols && (phase[i + 1] - phase[i]).abs() > PI)
                || (r + 1 < rows && (phase[i + cols] - phase[i]).abs() > PI)
            {
                reliable = false;
            }
        }
    }
    Unwrapped { phase, reliable }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ura;
    use crate::Vec3;

    const LAMBDA: f64 = 299_792_458.0 / 5.9e9;

    fn steering(delta: &[f64]) -> Vec<Complex> {
        delta.iter().map(|d| Complex::from_polar(1.0, TAU / LAMBDA * d)).collect()
    }

    #[test]
    fn broadside_is_flat() {
        let u = unwrap_phase_2d(&steering(&[0.0; 100]), 10, 10);
        assert!(u.reliable);
        assert!(u.offsets(LAMBDA).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn planar_thirty_degrees() {
        let layout = ura(10, 10, LAMBDA / 2.0);
        let s = 30f64.to_radians().sin();
        let truth: Vec<f64> = layout.positions.iter().map(|p| -p.x * s).collect();
        let u = unwrap_phase_2d(&steering(&truth), 10, 10);
        assert!(u.reliable);
        let err = u.offsets(LAMBDA).iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn spherical_source_five_meters() {
        let layout = ura(10, 10, LAMBDA / 2.0);
        let src = Vec3::new(2.0, -1.5, 4.3);
        let d0 = src.norm();
        let truth: Vec<f64> = layout.positions.iter().map(|p| (src - p).norm() - d0).collect();
        let u = unwrap_phase_2d(&steering(&truth), 10, 10);
        assert!(u.reliable);
        let err = u.offsets(LAMBDA).iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn inconsistent_field_is_flagged() {
        // a phase vortex cannot be unwrapped consistently
        let (rows, cols) = (6, 6);
        let b: Vec<Complex> = (0..rows * cols)
            .map(|m| {
                let (r, c) = ((m / cols) as f64 - 2.5, (m % cols) as f64 - 2.5);
                Complex::from_polar(1.0, r.atan2(c))
            })
            .collect();
        assert!(!unwrap_phase_2d(&b, rows, cols).reliable);
    }

    #[test]
    fn single_element() {
        let u = unwrap_phase_2d(&[Complex::new(1.0, 0.0)], 1, 1);
        assert_eq!(u.phase, vec![0.0]);
        assert!(u.reliable);
    }
}
