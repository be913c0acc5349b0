//! Finite partitions of the sphere with closed-form cell measures.
//!
//! n = 2: `m` equal arcs. n = 3: latitude bands crossed with longitude
//! sectors; a band-sector box between polar angles `t0 < t1` and azimuths
//! spanning `dphi` has exact area `dphi * (cos t0 - cos t1)`. No exact grid
//! exists here for n >= 4; those dimensions go through Monte Carlo paths.

use super::{Direction, Rotation};
use crate::error::{DmvError, Result};
use crate::numeric::{compensated_sum, normalize_angle};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// Closed-form geometry of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub enum CellGeometry {
    /// n = 2 arc cell `[start, end)`.
    Span { start: f64, end: f64 },
    /// n = 3 band-sector box: polar angles `[theta.0, theta.1)`, azimuths
    /// `[phi.0, phi.1)`. The southernmost band closes at theta = pi.
    Box { theta: (f64, f64), phi: (f64, f64) },
}

#[derive(Clone, Debug)]
pub struct GridCell {
    pub geometry: CellGeometry,
    pub representative: Direction,
    pub weight: f64,
}

/// Resolution descriptor for the two exact grid families.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// n = 2, `segments` equal arcs.
    Circle { segments: usize },
    /// n = 3, `bands` latitude bands x `sectors` longitude sectors.
    LatLon { bands: usize, sectors: usize },
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Circle { .. } => 2,
            GridSpec::LatLon { .. } => 3,
        }
    }

    /// Canonical grid id, e.g. `d2m360` or `d3b4s8`.
    pub fn id(&self) -> String {
        match self {
            GridSpec::Circle { segments } => format!("d2m{segments}"),
            GridSpec::LatLon { bands, sectors } => format!("d3b{bands}s{sectors}"),
        }
    }
}

/// A rotation that permutes grid cells exactly: cell `i` maps onto cell
/// `permutation[i]` with identical weight.
#[derive(Clone, Debug)]
pub struct GridSymmetry {
    pub rotation: Rotation,
    pub permutation: Vec<usize>,
}

/// Finite partition of S^{n-1} into cells with exact spherical measures.
#[derive(Debug)]
pub struct SphereGrid {
    id: String,
    spec: GridSpec,
    cells: Vec<GridCell>,
    total_weight: f64,
}

impl SphereGrid {
    /// n = 2 grid of `segments` equal arcs.
    pub fn circle(segments: usize) -> Result<Arc<SphereGrid>> {
        SphereGrid::from_spec(&GridSpec::Circle { segments })
    }

    /// n = 3 grid of `bands` latitude bands x `sectors` longitude sectors.
    pub fn lat_lon(bands: usize, sectors: usize) -> Result<Arc<SphereGrid>> {
        SphereGrid::from_spec(&GridSpec::LatLon { bands, sectors })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Arc<SphereGrid>> {
        let cells = match *spec {
            GridSpec::Circle { segments } => {
                if segments == 0 {
                    return Err(DmvError::InvalidParameter(
                        "circle grid needs at least 1 segment".into(),
                    ));
                }
                let step = TAU / segments as f64;
                let weight = TAU / segments as f64;
                (0..segments)
                    .map(|k| {
                        let start = k as f64 * step;
                        let end = if k + 1 == segments {
                            TAU
                        } else {
                            (k + 1) as f64 * step
                        };
                        GridCell {
                            geometry: CellGeometry::Span { start, end },
                            representative: Direction::from_angle((start + end) / 2.0),
                            weight,
                        }
                    })
                    .collect()
            }
            GridSpec::LatLon { bands, sectors } => {
                if bands == 0 || sectors == 0 {
                    return Err(DmvError::InvalidParameter(
                        "lat-lon grid needs at least 1 band and 1 sector".into(),
                    ));
                }
                let dphi = TAU / sectors as f64;
                let mut cells = Vec::with_capacity(bands * sectors);
                for b in 0..bands {
                    let t0 = b as f64 * PI / bands as f64;
                    let t1 = if b + 1 == bands {
                        PI
                    } else {
                        (b + 1) as f64 * PI / bands as f64
                    };
                    let band_area = t0.cos() - t1.cos();
                    for s in 0..sectors {
                        let p0 = s as f64 * dphi;
                        let p1 = if s + 1 == sectors {
                            TAU
                        } else {
                            (s + 1) as f64 * dphi
                        };
                        cells.push(GridCell {
                            geometry: CellGeometry::Box {
                                theta: (t0, t1),
                                phi: (p0, p1),
                            },
                            representative: Direction::from_spherical(
                                (t0 + t1) / 2.0,
                                (p0 + p1) / 2.0,
                            ),
                            weight: dphi * band_area,
                        });
                    }
                }
                cells
            }
        };
        let total_weight = compensated_sum(cells.iter().map(|c| c.weight));
        Ok(Arc::new(SphereGrid {
            id: spec.id(),
            spec: spec.clone(),
            cells,
            total_weight,
        }))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn cell(&self, k: usize) -> &GridCell {
        &self.cells[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.cells[k].weight
    }

    /// Sum of all cell weights (the surface measure, up to rounding).
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Index of the unique cell containing `u`.
    pub fn cell_index_of(&self, u: &Direction) -> Result<usize> {
        if u.dim() != self.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "grid {} has dim {}, direction has dim {}",
                self.id,
                self.dim(),
                u.dim()
            )));
        }
        Ok(match self.spec {
            GridSpec::Circle { segments } => {
                let a = u.azimuth();
                ((a / TAU * segments as f64) as usize).min(segments - 1)
            }
            GridSpec::LatLon { bands, sectors } => {
                let theta = u.polar_angle();
                let phi = normalize_angle(u.coords()[1].atan2(u.coords()[0]));
                let b = ((theta / PI * bands as f64) as usize).min(bands - 1);
                let s = ((phi / TAU * sectors as f64) as usize).min(sectors - 1);
                b * sectors + s
            }
        })
    }

    /// Whether cell `k`'s closed-form geometry contains `u`.
    pub fn cell_contains(&self, k: usize, u: &Direction) -> Result<bool> {
        Ok(self.cell_index_of(u)? == k)
    }

    /// The rotations that permute this grid's cells exactly, paired with
    /// their permutations. n = 2: the cyclic group of segment shifts.
    /// n = 3: longitude rotations by multiples of the sector angle.
    pub fn symmetries(&self) -> Vec<GridSymmetry> {
        match self.spec {
            GridSpec::Circle { segments } => (0..segments)
                .map(|k| {
                    let angle = k as f64 * TAU / segments as f64;
                    let permutation = (0..segments).map(|i| (i + k) % segments).collect();
                    GridSymmetry {
                        rotation: Rotation::planar(angle),
                        permutation,
                    }
                })
                .collect(),
            GridSpec::LatLon { bands, sectors } => (0..sectors)
                .map(|k| {
                    let angle = k as f64 * TAU / sectors as f64;
                    let permutation = (0..bands * sectors)
                        .map(|i| {
                            let (b, s) = (i / sectors, i % sectors);
                            b * sectors + (s + k) % sectors
                        })
                        .collect();
                    GridSymmetry {
                        rotation: Rotation::about_polar_axis(angle),
                        permutation,
                    }
                })
                .collect(),
        }
    }

    /// Look up the symmetry whose rotation matrix matches `rotation`
    /// entrywise within 1e-12, if any.
    pub fn symmetry_for(&self, rotation: &Rotation) -> Option<GridSymmetry> {
        if rotation.dim() != self.dim() {
            return None;
        }
        self.symmetries().into_iter().find(|sym| {
            sym.rotation
                .matrix()
                .iter()
                .zip(rotation.matrix().iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        })
    }
}

/// Grids are interchangeable exactly when they were built from the same spec.
pub fn same_grid(a: &SphereGrid, b: &SphereGrid) -> bool {
    a.id == b.id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::surface_measure;

    #[test]
    fn circle_grid_equal_partition() {
        let g = SphereGrid::circle(4).unwrap();
        assert_eq!(g.len(), 4);
        for c in g.cells() {
            assert!((c.weight - PI / 2.0).abs() < 1e-15);
        }
        assert!((g.total_weight() - TAU).abs() < 1e-12);

        let g = SphereGrid::circle(360).unwrap();
        for c in g.cells() {
            assert!((c.weight - TAU / 360.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lat_lon_grid_partition_identity() {
        let g = SphereGrid::lat_lon(4, 8).unwrap();
        assert_eq!(g.len(), 32);
        assert!((g.total_weight() - surface_measure(3).unwrap()).abs() < 1e-12);
        for c in g.cells() {
            assert!(c.weight > 0.0);
        }
    }

    #[test]
    fn representatives_lie_in_their_cells() {
        for g in [SphereGrid::circle(7).unwrap(), SphereGrid::circle(64).unwrap()] {
            for (k, c) in g.cells().iter().enumerate() {
                assert_eq!(g.cell_index_of(&c.representative).unwrap(), k);
            }
        }
        let g = SphereGrid::lat_lon(5, 9).unwrap();
        for (k, c) in g.cells().iter().enumerate() {
            assert_eq!(g.cell_index_of(&c.representative).unwrap(), k);
        }
    }

    #[test]
    fn circle_symmetries_form_cyclic_group() {
        let g = SphereGrid::circle(4).unwrap();
        let syms = g.symmetries();
        assert_eq!(syms.len(), 4);
        // Identity rotation carries the identity permutation.
        assert_eq!(syms[0].permutation, vec![0, 1, 2, 3]);
        assert_eq!(syms[1].permutation, vec![1, 2, 3, 0]);
    }

    #[test]
    fn lat_lon_symmetries_map_cells_onto_equal_weight_cells() {
        let g = SphereGrid::lat_lon(4, 8).unwrap();
        let syms = g.symmetries();
        assert_eq!(syms.len(), 8);
        for sym in &syms {
            for (i, c) in g.cells().iter().enumerate() {
                let image = sym.rotation.apply(&c.representative).unwrap();
                let j = g.cell_index_of(&image).unwrap();
                assert_eq!(j, sym.permutation[i], "symmetry must map cell {i} onto its permutation image");
                assert!((g.weight(i) - g.weight(j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_directions_land_in_a_cell() {
        let g = SphereGrid::lat_lon(4, 8).unwrap();
        // South pole (theta = pi) belongs to the last band.
        let south = Direction::new(vec![0.0, 0.0, -1.0]).unwrap();
        let k = g.cell_index_of(&south).unwrap();
        assert!(k >= 24, "south pole must land in the final band");
        // Azimuth exactly 2*pi wraps to sector 0.
        let wrapped = Direction::from_spherical(1.0, TAU);
        g.cell_index_of(&wrapped).unwrap();
    }
}
