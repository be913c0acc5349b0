//! Unit-sphere geometry: directions, rotations, measurable regions, and
//! exact spherical (surface) measure.
//!
//! All angles are radians. Arc and cell boundaries are half-open
//! `[start, end)` so partitions are genuinely disjoint.

mod grid;
mod region;

pub use grid::{same_grid, CellGeometry, GridCell, GridSpec, GridSymmetry, SphereGrid};
pub use region::{rasterize, region_measure, SphericalRegion};

use crate::error::{DmvError, Result};
use crate::numeric::{gamma_half, normalize_angle};
use nalgebra::DMatrix;
use std::f64::consts::PI;

const UNIT_TOL: f64 = 1e-12;

/// A point of the unit sphere S^{n-1}, n >= 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    coords: Vec<f64>,
}

impl Direction {
    /// Build from coordinates that must already have unit norm (within 1e-12).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(DmvError::Domain(format!(
                "direction needs dimension >= 2, got {}",
                coords.len()
            )));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(DmvError::Domain(format!(
                "direction is not unit length (|u| = {norm})"
            )));
        }
        Ok(Direction { coords })
    }

    /// Normalize an arbitrary nonzero vector onto the sphere.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(DmvError::Domain(format!(
                "direction needs dimension >= 2, got {}",
                coords.len()
            )));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(DmvError::Domain("cannot normalize zero vector".into()));
        }
        Ok(Direction {
            coords: coords.into_iter().map(|c| c / norm).collect(),
        })
    }

    /// n = 2 direction at the given polar angle.
    pub fn from_angle(angle: f64) -> Self {
        Direction {
            coords: vec![angle.cos(), angle.sin()],
        }
    }

    /// n = 3 direction at polar angle `theta` (from the north pole, in [0, pi])
    /// and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Direction {
            coords: vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Great-circle (angular) distance to another direction, in [0, pi].
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    /// Azimuth of an n = 2 direction, normalized to [0, 2*pi).
    pub fn azimuth(&self) -> f64 {
        normalize_angle(self.coords[1].atan2(self.coords[0]))
    }

    /// Polar angle of an n = 3 direction, in [0, pi].
    pub fn polar_angle(&self) -> f64 {
        self.coords[2].clamp(-1.0, 1.0).acos()
    }

    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        Direction { coords }
    }
}

/// A proper rotation of R^n: orthogonal matrix with determinant +1.
#[derive(Clone, Debug)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(DmvError::Domain(format!(
                "rotation matrix must be square with n >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let gram = matrix.transpose() * &matrix;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - expect).abs() > UNIT_TOL {
                    return Err(DmvError::Domain(
                        "matrix is not orthogonal within 1e-12".into(),
                    ));
                }
            }
        }
        let det = matrix.clone().determinant();
        if (det - 1.0).abs() > UNIT_TOL {
            return Err(DmvError::Domain(format!(
                "matrix has determinant {det}, expected +1"
            )));
        }
        Ok(Rotation { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Rotation {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Planar rotation of R^2 by `angle`.
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation {
            matrix: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    /// Rotation of R^3 about the polar (z) axis by `angle`.
    pub fn about_polar_axis(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation {
            matrix: DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> Rotation {
        Rotation {
            matrix: self.matrix.transpose(),
        }
    }

    /// Rotation angle of an n = 2 rotation, in [0, 2*pi).
    pub fn planar_angle(&self) -> Result<f64> {
        if self.dim() != 2 {
            return Err(DmvError::DimensionMismatch(
                "planar_angle requires a 2x2 rotation".into(),
            ));
        }
        Ok(normalize_angle(self.matrix[(1, 0)].atan2(self.matrix[(0, 0)])))
    }

    /// Apply the rotation to a direction.
    pub fn apply(&self, u: &Direction) -> Result<Direction> {
        if self.dim() != u.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "rotation is {}x{}, direction has dim {}",
                self.dim(),
                self.dim(),
                u.dim()
            )));
        }
        let v = &self.matrix * nalgebra::DVector::from_column_slice(u.coords());
        Ok(Direction::new_unchecked(v.iter().copied().collect()))
    }
}

/// Rotate a direction: convenience free function mirroring the module API.
pub fn rotate_direction(rotation: &Rotation, u: &Direction) -> Result<Direction> {
    rotation.apply(u)
}

/// Surface measure of the whole sphere S^{dim-1}: 2 pi^{dim/2} / Gamma(dim/2).
pub fn surface_measure(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(DmvError::Domain(format!(
            "surface_measure requires dim >= 2, got {dim}"
        )));
    }
    let half_power = if dim % 2 == 0 {
        PI.powi(dim as i32 / 2)
    } else {
        PI.powi((dim as i32 - 1) / 2) * PI.sqrt()
    };
    Ok(2.0 * half_power / gamma_half(dim as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn surface_measure_closed_forms() {
        assert!((surface_measure(2).unwrap() - TAU).abs() < 1e-15);
        assert!((surface_measure(3).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(surface_measure(1).is_err());
    }

    #[test]
    fn surface_measure_matches_independent_gamma() {
        // Oracle: evaluate 2 pi^{n/2} / Gamma(n/2) with statrs' Lanczos gamma.
        for dim in 2..=8usize {
            let oracle = 2.0 * PI.powf(dim as f64 / 2.0)
                / statrs::function::gamma::gamma(dim as f64 / 2.0);
            let got = surface_measure(dim).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-12 * oracle,
                "dim {dim}: {got} vs {oracle}"
            );
        }
        // Spec'd value for n = 4.
        assert!((surface_measure(4).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(vec![1.0, 0.0]).is_ok());
        assert!(Direction::new(vec![1.0, 1.0]).is_err());
        assert!(Direction::new(vec![1.0]).is_err());
        let u = Direction::normalized(vec![3.0, 4.0]).unwrap();
        assert!((u.coords()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rotation_validation_and_apply() {
        let r = Rotation::planar(PI / 2.0);
        let u = Direction::from_angle(0.0);
        let v = r.apply(&u).unwrap();
        assert!((v.azimuth() - PI / 2.0).abs() < 1e-12);

        // Reflections are rejected: det = -1.
        let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Rotation::new(refl).is_err());

        let m = Rotation::about_polar_axis(1.0);
        assert!(Rotation::new(m.matrix().clone()).is_ok());
    }

    #[test]
    fn rotation_inverse_roundtrip() {
        let r = Rotation::about_polar_axis(0.7);
        let u = Direction::from_spherical(1.1, 0.3);
        let back = r.inverse().apply(&r.apply(&u).unwrap()).unwrap();
        assert!(u.angle_to(&back) < 1e-12);
    }
}
