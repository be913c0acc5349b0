//! Measurable regions of the sphere and their exact measures.

use super::grid::{same_grid, CellGeometry, SphereGrid};
use super::{surface_measure, Direction, Rotation};
use crate::error::{DmvError, Result};
use crate::numeric::{compensated_sum, normalize_angle};
use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// A Borel region of S^{n-1} with a closed-form measure.
///
/// `Arc` and `Arcs` live on the circle (n = 2). `Arcs` is the canonical
/// disjoint-union form produced by the interval algebra; its spans are
/// sorted and pairwise disjoint.
#[derive(Clone, Debug)]
pub enum SphericalRegion {
    Full {
        dim: usize,
    },
    Arc {
        start: f64,
        end: f64,
    },
    Arcs {
        spans: Vec<(f64, f64)>,
    },
    Cap {
        center: Direction,
        radius: f64,
    },
    Cells {
        grid: Arc<SphereGrid>,
        indices: BTreeSet<usize>,
    },
}

impl SphericalRegion {
    pub fn full(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(DmvError::Domain(format!("region dim must be >= 2, got {dim}")));
        }
        Ok(SphericalRegion::Full { dim })
    }

    /// Half-open arc `[start, end)` with `0 <= start < end <= 2*pi`.
    pub fn arc(start: f64, end: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&start) || !(start < end) || end > TAU + 1e-15 {
            return Err(DmvError::Domain(format!(
                "arc requires 0 <= start < end <= 2*pi, got [{start}, {end})"
            )));
        }
        Ok(SphericalRegion::Arc { start, end: end.min(TAU) })
    }

    /// Disjoint sorted arc spans; empty list is the empty region.
    pub fn arcs(spans: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev_end = 0.0_f64;
        for &(s, e) in &spans {
            if s < prev_end - 1e-15 || s >= e || e > TAU + 1e-15 {
                return Err(DmvError::Domain(format!(
                    "arc spans must be sorted, disjoint, and within [0, 2*pi]: ({s}, {e})"
                )));
            }
            prev_end = e;
        }
        Ok(SphericalRegion::Arcs { spans })
    }

    /// Spherical cap of angular radius in (0, pi] about `center`.
    pub fn cap(center: Direction, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= PI) {
            return Err(DmvError::Domain(format!(
                "cap radius must lie in (0, pi], got {radius}"
            )));
        }
        Ok(SphericalRegion::Cap { center, radius })
    }

    pub fn cells(grid: Arc<SphereGrid>, indices: BTreeSet<usize>) -> Result<Self> {
        if let Some(&max) = indices.iter().next_back() {
            if max >= grid.len() {
                return Err(DmvError::Domain(format!(
                    "cell index {max} out of range for grid {} with {} cells",
                    grid.id(),
                    grid.len()
                )));
            }
        }
        Ok(SphericalRegion::Cells { grid, indices })
    }

    pub fn dim(&self) -> usize {
        match self {
            SphericalRegion::Full { dim } => *dim,
            SphericalRegion::Arc { .. } | SphericalRegion::Arcs { .. } => 2,
            SphericalRegion::Cap { center, .. } => center.dim(),
            SphericalRegion::Cells { grid, .. } => grid.dim(),
        }
    }

    /// Spherical measure of the region. Caps have closed forms for
    /// n in {2, 3} only.
    pub fn measure(&self) -> Result<f64> {
        match self {
            SphericalRegion::Full { dim } => surface_measure(*dim),
            SphericalRegion::Arc { start, end } => Ok(end - start),
            SphericalRegion::Arcs { spans } => {
                Ok(compensated_sum(spans.iter().map(|(s, e)| e - s)))
            }
            SphericalRegion::Cap { center, radius } => match center.dim() {
                2 => Ok((2.0 * radius).min(TAU)),
                3 => Ok(TAU * (1.0 - radius.cos())),
                dim => Err(DmvError::UnsupportedDim {
                    dim,
                    what: "closed-form cap measure".into(),
                }),
            },
            SphericalRegion::Cells { grid, indices } => {
                Ok(compensated_sum(indices.iter().map(|&k| grid.weight(k))))
            }
        }
    }

    /// Membership test; caps are closed, arcs and cells half-open.
    pub fn contains(&self, u: &Direction) -> Result<bool> {
        if u.dim() != self.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "region has dim {}, direction has dim {}",
                self.dim(),
                u.dim()
            )));
        }
        Ok(match self {
            SphericalRegion::Full { .. } => true,
            SphericalRegion::Arc { start, end } => {
                let a = u.azimuth();
                a >= *start && a < *end
            }
            SphericalRegion::Arcs { spans } => {
                let a = u.azimuth();
                spans.iter().any(|&(s, e)| a >= s && a < e)
            }
            SphericalRegion::Cap { center, radius } => u.angle_to(center) <= *radius,
            SphericalRegion::Cells { grid, indices } => {
                indices.contains(&grid.cell_index_of(u)?)
            }
        })
    }

    /// Image of the region under a rotation. Cell sets only move under
    /// grid symmetries; anything else is an unsupported rotation.
    pub fn rotate(&self, rotation: &Rotation) -> Result<SphericalRegion> {
        if rotation.dim() != self.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "rotation dim {} vs region dim {}",
                rotation.dim(),
                self.dim()
            )));
        }
        Ok(match self {
            SphericalRegion::Full { dim } => SphericalRegion::Full { dim: *dim },
            SphericalRegion::Arc { start, end } => {
                let beta = rotation.planar_angle()?;
                return shift_spans(&[(*start, *end)], beta);
            }
            SphericalRegion::Arcs { spans } => {
                let beta = rotation.planar_angle()?;
                return shift_spans(spans, beta);
            }
            SphericalRegion::Cap { center, radius } => SphericalRegion::Cap {
                center: rotation.apply(center)?,
                radius: *radius,
            },
            SphericalRegion::Cells { grid, indices } => {
                let sym = grid.symmetry_for(rotation).ok_or_else(|| {
                    DmvError::UnsupportedRotation(format!(
                        "rotation does not permute the cells of grid {}",
                        grid.id()
                    ))
                })?;
                SphericalRegion::Cells {
                    grid: Arc::clone(grid),
                    indices: indices.iter().map(|&k| sym.permutation[k]).collect(),
                }
            }
        })
    }
}

/// Shift arc spans by `beta` modulo 2*pi, splitting spans that wrap.
fn shift_spans(spans: &[(f64, f64)], beta: f64) -> Result<SphericalRegion> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(s, e) in spans {
        let width = e - s;
        let ns = normalize_angle(s + beta);
        let ne = ns + width;
        if ne <= TAU + 1e-15 {
            out.push((ns, ne.min(TAU)));
        } else {
            out.push((ns, TAU));
            out.push((0.0, ne - TAU));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Merge abutting spans produced by the wrap split.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in out {
        match merged.last_mut() {
            Some(last) if s <= last.1 + 1e-15 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    if merged.len() == 1 {
        SphericalRegion::arc(merged[0].0, merged[0].1)
    } else {
        SphericalRegion::arcs(merged)
    }
}

/// Conservative cell classification for the rasterization error bound.
enum CellClass {
    Inside,
    Outside,
    Straddling,
}

/// Approximate a region by the set of grid cells whose representatives lie
/// inside it. Returns the cell set together with a sound bound on
/// `|measure(region) - measure(cells)|`: the total weight of cells that
/// straddle the region boundary.
pub fn rasterize(region: &SphericalRegion, grid: &Arc<SphereGrid>) -> Result<(SphericalRegion, f64)> {
    if region.dim() != grid.dim() {
        return Err(DmvError::DimensionMismatch(format!(
            "region dim {} vs grid dim {}",
            region.dim(),
            grid.dim()
        )));
    }
    let mut members = BTreeSet::new();
    let mut straddle_weight = Vec::new();
    for (k, cell) in grid.cells().iter().enumerate() {
        if region.contains(&cell.representative)? {
            members.insert(k);
        }
        if matches!(classify_cell(region, grid, k)?, CellClass::Straddling) {
            straddle_weight.push(cell.weight);
        }
    }
    Ok((
        SphericalRegion::Cells {
            grid: Arc::clone(grid),
            indices: members,
        },
        compensated_sum(straddle_weight),
    ))
}

fn classify_cell(region: &SphericalRegion, grid: &Arc<SphereGrid>, k: usize) -> Result<CellClass> {
    let cell = grid.cell(k);
    match region {
        SphericalRegion::Full { .. } => Ok(CellClass::Inside),
        SphericalRegion::Arc { start, end } => Ok(classify_span_in_spans(
            &cell.geometry,
            &[(*start, *end)],
        )),
        SphericalRegion::Arcs { spans } => Ok(classify_span_in_spans(&cell.geometry, spans)),
        SphericalRegion::Cap { center, radius } => {
            let (d_min, d_max) = cap_distance_range(center, &cell.geometry);
            if d_max <= *radius {
                Ok(CellClass::Inside)
            } else if d_min >= *radius {
                Ok(CellClass::Outside)
            } else {
                Ok(CellClass::Straddling)
            }
        }
        SphericalRegion::Cells {
            grid: region_grid,
            indices,
        } => {
            if same_grid(region_grid, grid) {
                if indices.contains(&k) {
                    Ok(CellClass::Inside)
                } else {
                    Ok(CellClass::Outside)
                }
            } else {
                Ok(classify_against_foreign_cells(
                    &cell.geometry,
                    region_grid,
                    indices,
                ))
            }
        }
    }
}

/// Range of angular distances from `center` to points of a cell.
///
/// For a box cell, cos d(theta, phi) = cos tc cos theta + sin tc sin theta
/// cos(phi - pc) is monotone in cos(phi - pc) because the sines are
/// nonnegative on [0, pi], so the extrema separate into an azimuth part and
/// a one-dimensional polar-angle optimization.
fn cap_distance_range(center: &Direction, geometry: &CellGeometry) -> (f64, f64) {
    match geometry {
        CellGeometry::Span { start, end } => {
            let gamma = center.azimuth();
            let (lo, hi) = cos_range(start - gamma, end - gamma);
            (hi.clamp(-1.0, 1.0).acos(), lo.clamp(-1.0, 1.0).acos())
        }
        CellGeometry::Box { theta, phi } => {
            let theta_c = center.polar_angle();
            let phi_c = normalize_angle(center.coords()[1].atan2(center.coords()[0]));
            let (a_min, a_max) = cos_range(phi.0 - phi_c, phi.1 - phi_c);
            let cos_max = polar_extremum(theta_c, a_max, theta.0, theta.1, true);
            let cos_min = polar_extremum(theta_c, a_min, theta.0, theta.1, false);
            (
                cos_max.clamp(-1.0, 1.0).acos(),
                cos_min.clamp(-1.0, 1.0).acos(),
            )
        }
    }
}

/// Is `target + 2*pi*k` inside `[x0, x1]` for some integer k?
fn interval_hits_angle(x0: f64, x1: f64, target: f64) -> bool {
    let k = ((x0 - target) / TAU).ceil();
    target + k * TAU <= x1
}

/// Range of cos(x) over x in [x0, x1].
fn cos_range(x0: f64, x1: f64) -> (f64, f64) {
    let (c0, c1) = (x0.cos(), x1.cos());
    let mut lo = c0.min(c1);
    let mut hi = c0.max(c1);
    if interval_hits_angle(x0, x1, 0.0) {
        hi = 1.0;
    }
    if interval_hits_angle(x0, x1, PI) {
        lo = -1.0;
    }
    (lo, hi)
}

/// Extremum of g(t) = cos(tc) cos(t) + sin(tc) * a * sin(t) over t in
/// [t0, t1] subset [0, pi]; `maximize` picks max, otherwise min.
fn polar_extremum(theta_c: f64, a: f64, t0: f64, t1: f64, maximize: bool) -> f64 {
    let c = theta_c.cos();
    let s = theta_c.sin() * a;
    let g = |t: f64| c * t.cos() + s * t.sin();
    let amp = (c * c + s * s).sqrt();
    let psi = s.atan2(c);
    if maximize {
        let mut best = g(t0).max(g(t1));
        if psi >= t0 && psi <= t1 {
            best = best.max(amp);
        }
        best
    } else {
        let mut worst = g(t0).min(g(t1));
        if (psi + PI >= t0 && psi + PI <= t1) || (psi - PI >= t0 && psi - PI <= t1) {
            worst = worst.min(-amp);
        }
        worst
    }
}

fn classify_span_in_spans(geometry: &CellGeometry, spans: &[(f64, f64)]) -> CellClass {
    let CellGeometry::Span { start: a, end: b } = geometry else {
        return CellClass::Straddling;
    };
    let inside = spans.iter().any(|&(s, e)| s <= *a && *b <= e);
    if inside {
        return CellClass::Inside;
    }
    let overlaps = spans.iter().any(|&(s, e)| s.max(*a) < e.min(*b));
    if overlaps {
        CellClass::Straddling
    } else {
        CellClass::Outside
    }
}

fn classify_against_foreign_cells(
    geometry: &CellGeometry,
    region_grid: &Arc<SphereGrid>,
    indices: &BTreeSet<usize>,
) -> CellClass {
    let contained = indices
        .iter()
        .any(|&j| geometry_contains(&region_grid.cell(j).geometry, geometry));
    if contained {
        return CellClass::Inside;
    }
    let overlaps = indices
        .iter()
        .any(|&j| geometry_overlaps(&region_grid.cell(j).geometry, geometry));
    if overlaps {
        CellClass::Straddling
    } else {
        CellClass::Outside
    }
}

fn geometry_contains(outer: &CellGeometry, inner: &CellGeometry) -> bool {
    match (outer, inner) {
        (CellGeometry::Span { start: s, end: e }, CellGeometry::Span { start: a, end: b }) => {
            s <= a && b <= e
        }
        (
            CellGeometry::Box { theta: t, phi: p },
            CellGeometry::Box { theta: ti, phi: pi },
        ) => t.0 <= ti.0 && ti.1 <= t.1 && p.0 <= pi.0 && pi.1 <= p.1,
        _ => false,
    }
}

fn geometry_overlaps(a: &CellGeometry, b: &CellGeometry) -> bool {
    match (a, b) {
        (CellGeometry::Span { start: s, end: e }, CellGeometry::Span { start: a0, end: b0 }) => {
            s.max(*a0) < e.min(*b0)
        }
        (
            CellGeometry::Box { theta: t, phi: p },
            CellGeometry::Box { theta: ti, phi: pi },
        ) => t.0.max(ti.0) < t.1.min(ti.1) && p.0.max(pi.0) < p.1.min(pi.1),
        _ => true,
    }
}

/// Measure of a region, exposed as the module-level operation.
pub fn region_measure(region: &SphericalRegion) -> Result<f64> {
    region.measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn north() -> Direction {
        Direction::new(vec![0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn arc_measure() {
        let r = SphericalRegion::arc(0.0, PI / 2.0).unwrap();
        assert!((r.measure().unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(SphericalRegion::arc(1.0, 0.5).is_err());
        assert!(SphericalRegion::arc(-0.1, 0.5).is_err());
    }

    #[test]
    fn cap_measures() {
        let full = SphericalRegion::cap(north(), PI).unwrap();
        assert!((full.measure().unwrap() - 4.0 * PI).abs() < 1e-12);
        let third = SphericalRegion::cap(north(), PI / 3.0).unwrap();
        assert!((third.measure().unwrap() - PI).abs() < 1e-12);
        assert!(SphericalRegion::cap(north(), 0.0).is_err());
        // No closed form above n = 3.
        let c4 = SphericalRegion::cap(
            Direction::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(c4.measure().is_err());
    }

    #[test]
    fn cap_measure_matches_monte_carlo_indicator() {
        // Oracle: MC indicator integration with 1e6 uniform directions.
        let cap = SphericalRegion::cap(north(), PI / 3.0).unwrap();
        let exact = cap.measure().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..n {
            let v: Vec<f64> = (0..3)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let u = Direction::normalized(v).unwrap();
            if cap.contains(&u).unwrap() {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let sigma = 4.0 * PI;
        let estimate = p * sigma;
        let stderr = sigma * (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (estimate - exact).abs() <= 3.0 * stderr,
            "MC {estimate} vs exact {exact} (3se = {})",
            3.0 * stderr
        );
    }

    #[test]
    fn cells_measure_and_validation() {
        let g = SphereGrid::circle(8).unwrap();
        let r = SphericalRegion::cells(Arc::clone(&g), [0usize, 1, 2].into_iter().collect())
            .unwrap();
        assert!((r.measure().unwrap() - 3.0 * TAU / 8.0).abs() < 1e-12);
        assert!(SphericalRegion::cells(g, [99usize].into_iter().collect()).is_err());
    }

    #[test]
    fn rasterize_full_and_aligned_arc_are_exact() {
        let g = SphereGrid::circle(8).unwrap();
        let (cells, bound) = rasterize(&SphericalRegion::full(2).unwrap(), &g).unwrap();
        assert_eq!(bound, 0.0);
        assert!((cells.measure().unwrap() - TAU).abs() < 1e-12);

        // Arc aligned to grid boundaries: [0, pi/2) covers cells 0 and 1.
        let arc = SphericalRegion::arc(0.0, PI / 2.0).unwrap();
        let (cells, bound) = rasterize(&arc, &g).unwrap();
        assert_eq!(bound, 0.0);
        assert!((cells.measure().unwrap() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rasterize_cap_bound_is_sound() {
        let g = SphereGrid::lat_lon(64, 8).unwrap();
        let cap = SphericalRegion::cap(north(), PI / 3.0).unwrap();
        let (cells, bound) = rasterize(&cap, &g).unwrap();
        let approx = cells.measure().unwrap();
        let exact = cap.measure().unwrap();
        assert!(
            (approx - exact).abs() <= bound,
            "rasterization error {} exceeds reported bound {bound}",
            (approx - exact).abs()
        );
        assert!(bound < exact, "bound should be informative at this resolution");
    }

    #[test]
    fn rasterize_bound_sound_on_random_caps_and_arcs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g2 = SphereGrid::circle(37).unwrap();
        for _ in 0..50 {
            let a = rng.random_range(0.0..TAU - 0.2);
            let b = rng.random_range(a + 0.1..TAU);
            let arc = SphericalRegion::arc(a, b).unwrap();
            let (cells, bound) = rasterize(&arc, &g2).unwrap();
            assert!(
                (cells.measure().unwrap() - arc.measure().unwrap()).abs() <= bound + 1e-12
            );
        }
        let g3 = SphereGrid::lat_lon(16, 16).unwrap();
        for _ in 0..20 {
            let theta = rng.random_range(0.0..PI);
            let phi = rng.random_range(0.0..TAU);
            let radius = rng.random_range(0.1..PI);
            let cap =
                SphericalRegion::cap(Direction::from_spherical(theta, phi), radius).unwrap();
            let (cells, bound) = rasterize(&cap, &g3).unwrap();
            assert!(
                (cells.measure().unwrap() - cap.measure().unwrap()).abs() <= bound + 1e-12
            );
        }
    }

    #[test]
    fn rotation_preserves_region_measure() {
        let arc = SphericalRegion::arc(5.5, 6.0).unwrap();
        let rotated = arc.rotate(&Rotation::planar(2.0)).unwrap();
        assert!((rotated.measure().unwrap() - 0.5).abs() < 1e-12);

        let cap = SphericalRegion::cap(Direction::from_spherical(0.4, 0.2), 0.8).unwrap();
        let rotated = cap.rotate(&Rotation::about_polar_axis(1.3)).unwrap();
        assert!((rotated.measure().unwrap() - cap.measure().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cell_set_rotation_requires_symmetry() {
        let g = SphereGrid::circle(4).unwrap();
        let r = SphericalRegion::cells(Arc::clone(&g), [0usize].into_iter().collect()).unwrap();
        let shifted = r.rotate(&Rotation::planar(PI / 2.0)).unwrap();
        match shifted {
            SphericalRegion::Cells { indices, .. } => {
                assert_eq!(indices.into_iter().collect::<Vec<_>>(), vec![1])
            }
            _ => panic!("expected cells"),
        }
        assert!(r.rotate(&Rotation::planar(0.1)).is_err());
    }
}
