//! Half-open interval algebra on the circle parameter range [0, 2*pi).
//!
//! Every n = 2 region (arcs, caps, circle-grid cell sets) reduces to a
//! sorted list of disjoint spans, which makes common refinements of
//! piecewise-constant radial functions exact.

use crate::error::{DmvError, Result};
use crate::numeric::{compensated_sum, normalize_angle};
use crate::sphere::{CellGeometry, SphericalRegion};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IntervalSet {
    spans: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { spans: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalSet {
            spans: vec![(0.0, TAU)],
        }
    }

    /// Normalize arbitrary spans: sort, drop empties, merge overlaps.
    pub fn from_spans(mut spans: Vec<(f64, f64)>) -> Self {
        spans.retain(|(s, e)| e > s);
        spans.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (s, e) in spans {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        IntervalSet { spans: merged }
    }

    /// Exact reduction of an n = 2 region to spans.
    pub fn from_region(region: &SphericalRegion) -> Result<Self> {
        if region.dim() != 2 {
            return Err(DmvError::DimensionMismatch(
                "interval algebra is defined on the circle only".into(),
            ));
        }
        Ok(match region {
            SphericalRegion::Full { .. } => IntervalSet::full(),
            SphericalRegion::Arc { start, end } => IntervalSet::from_spans(vec![(*start, *end)]),
            SphericalRegion::Arcs { spans } => IntervalSet::from_spans(spans.clone()),
            SphericalRegion::Cap { center, radius } => {
                if 2.0 * radius >= TAU {
                    return Ok(IntervalSet::full());
                }
                let gamma = center.azimuth();
                let lo = normalize_angle(gamma - radius);
                let hi = lo + 2.0 * radius;
                if hi <= TAU {
                    IntervalSet::from_spans(vec![(lo, hi)])
                } else {
                    IntervalSet::from_spans(vec![(lo, TAU), (0.0, hi - TAU)])
                }
            }
            SphericalRegion::Cells { grid, indices } => {
                let spans = indices
                    .iter()
                    .map(|&k| match grid.cell(k).geometry {
                        CellGeometry::Span { start, end } => Ok((start, end)),
                        _ => Err(DmvError::DimensionMismatch(
                            "cell set does not live on a circle grid".into(),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                IntervalSet::from_spans(spans)
            }
        })
    }

    pub fn spans(&self) -> &[(f64, f64)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn measure(&self) -> f64 {
        compensated_sum(self.spans.iter().map(|(s, e)| e - s))
    }

    pub fn contains(&self, angle: f64) -> bool {
        let a = normalize_angle(angle);
        self.spans.iter().any(|&(s, e)| a >= s && a < e)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut spans = self.spans.clone();
        spans.extend_from_slice(&other.spans);
        IntervalSet::from_spans(spans)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for &(s1, e1) in &self.spans {
            for &(s2, e2) in &other.spans {
                let s = s1.max(s2);
                let e = e1.min(e2);
                if s < e {
                    out.push((s, e));
                }
            }
        }
        IntervalSet::from_spans(out)
    }

    /// Most compact region for these spans: Full / single Arc / Arcs.
    pub fn to_region(&self) -> Result<SphericalRegion> {
        if self.spans.len() == 1 && self.spans[0] == (0.0, TAU) {
            return SphericalRegion::full(2);
        }
        if self.spans.len() == 1 {
            return SphericalRegion::arc(self.spans[0].0, self.spans[0].1);
        }
        SphericalRegion::arcs(self.spans.clone())
    }
}

/// A common refinement of several interval sets into elementary parts.
///
/// The cut list contains every span endpoint of every source set (plus 0
/// and 2*pi), so each elementary part is entirely inside or outside each
/// source set.
#[derive(Debug)]
pub(crate) struct IntervalRefinement {
    cuts: Vec<f64>,
}

impl IntervalRefinement {
    pub fn build<'a, I: IntoIterator<Item = &'a IntervalSet>>(sets: I) -> Self {
        let mut cuts = vec![0.0, TAU];
        for set in sets {
            for &(s, e) in set.spans() {
                cuts.push(s);
                cuts.push(e);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        IntervalRefinement { cuts }
    }

    pub fn num_parts(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn part_measure(&self, i: usize) -> f64 {
        self.cuts[i + 1] - self.cuts[i]
    }

    pub fn part_span(&self, i: usize) -> (f64, f64) {
        (self.cuts[i], self.cuts[i + 1])
    }

    fn part_midpoint(&self, i: usize) -> f64 {
        (self.cuts[i] + self.cuts[i + 1]) / 2.0
    }

    /// Coverage mask of a source set over the elementary parts.
    pub fn coverage(&self, set: &IntervalSet) -> Vec<bool> {
        (0..self.num_parts())
            .map(|i| set.contains(self.part_midpoint(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::Direction;
    use std::f64::consts::PI;

    #[test]
    fn from_spans_merges_overlaps() {
        let s = IntervalSet::from_spans(vec![(1.0, 2.0), (1.5, 3.0), (4.0, 5.0)]);
        assert_eq!(s.spans(), &[(1.0, 3.0), (4.0, 5.0)]);
        assert!((s.measure() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn cap_wraps_into_two_spans() {
        let cap = SphericalRegion::cap(Direction::from_angle(0.0), 1.0).unwrap();
        let s = IntervalSet::from_region(&cap).unwrap();
        assert_eq!(s.spans().len(), 2);
        assert!((s.measure() - 2.0).abs() < 1e-12);
        assert!(s.contains(0.5));
        assert!(s.contains(TAU - 0.5));
        assert!(!s.contains(PI));
    }

    #[test]
    fn union_and_intersection() {
        let a = IntervalSet::from_spans(vec![(0.0, PI)]);
        let b = IntervalSet::from_spans(vec![(PI / 2.0, 3.0 * PI / 2.0)]);
        let u = a.union(&b);
        assert_eq!(u.spans(), &[(0.0, 3.0 * PI / 2.0)]);
        let i = a.intersect(&b);
        assert_eq!(i.spans(), &[(PI / 2.0, PI)]);
        assert!(a.intersect(&IntervalSet::empty()).is_empty());
    }

    #[test]
    fn refinement_parts_are_covering_aware() {
        let a = IntervalSet::from_spans(vec![(0.0, PI)]);
        let b = IntervalSet::from_spans(vec![(PI / 2.0, 3.0 * PI / 2.0)]);
        let r = IntervalRefinement::build([&a, &b]);
        assert_eq!(r.num_parts(), 4);
        let total: f64 = (0..r.num_parts()).map(|i| r.part_measure(i)).sum();
        assert!((total - TAU).abs() < 1e-15);
        assert_eq!(r.coverage(&a), vec![true, true, false, false]);
        assert_eq!(r.coverage(&b), vec![false, true, true, false]);
    }
}
