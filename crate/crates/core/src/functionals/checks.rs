//! Property checkers: additivity, positivity, monotonicity, positive
//! homogeneity, the vanishing condition, and rotation invariance.
//!
//! Each checker probes a functional on random grid polycones drawn from a
//! seeded generator and reports the worst residual together with a
//! re-evaluable witness on failure. Residuals are compared against
//! tol * max(1, |values involved|).

use super::{require_grid, StarFunctional};
use crate::error::Result;
use crate::numeric::residual_scale;
use crate::sampling::RandomPolycones;
use crate::sphere::SphereGrid;
use crate::starset::{radial_sum, rotate_starset, scale, StarSet};
use std::sync::Arc;

/// Default relative tolerance for kernel-backed exact paths.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The check could not be carried out (e.g. no nontrivial symmetries).
    Inconclusive,
}

/// The inputs that exhibited a failure, kept re-evaluable.
#[derive(Clone, Debug)]
pub struct Witness {
    /// Which argument slot was being varied, when meaningful.
    pub slot: Option<usize>,
    /// The primary tuple of bodies passed to the functional.
    pub bodies: Vec<StarSet>,
    /// Auxiliary bodies (the added summand, the rotated tuple, ...).
    pub extra_bodies: Vec<StarSet>,
    /// The functional values entering the residual.
    pub values: Vec<f64>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub property: String,
    pub verdict: Verdict,
    pub trials: usize,
    pub max_residual: f64,
    pub witness: Option<Witness>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn pass(property: &str, trials: usize, max_residual: f64) -> Self {
        PropertyReport {
            property: property.into(),
            verdict: Verdict::Pass,
            trials,
            max_residual,
            witness: None,
        }
    }

    fn fail(property: &str, trials: usize, max_residual: f64, witness: Witness) -> Self {
        PropertyReport {
            property: property.into(),
            verdict: Verdict::Fail,
            trials,
            max_residual,
            witness: Some(witness),
        }
    }

    fn inconclusive(property: &str, detail: &str) -> Self {
        PropertyReport {
            property: property.into(),
            verdict: Verdict::Inconclusive,
            trials: 0,
            max_residual: 0.0,
            witness: Some(Witness {
                slot: None,
                bodies: Vec::new(),
                extra_bodies: Vec::new(),
                values: Vec::new(),
                residual: 0.0,
                detail: detail.into(),
            }),
        }
    }
}

/// Additivity in every slot with respect to radial addition (Eq. 5.1
/// style): F(..., L_i + M_i, ...) = F(..., L_i, ...) + F(..., M_i, ...).
pub fn check_additive(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let n = f.dim();
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        let bodies = gen.tuple(n);
        let extra = gen.starset();
        let base = f.evaluate(&bodies)?;
        for slot in 0..n {
            let mut summed = bodies.clone();
            summed[slot] = radial_sum(&[bodies[slot].clone(), extra.clone()])?;
            let lhs = f.evaluate(&summed)?;
            let mut replaced = bodies.clone();
            replaced[slot] = extra.clone();
            let other = f.evaluate(&replaced)?;
            let residual = (lhs - (base + other)).abs();
            max_residual = max_residual.max(residual);
            if residual > tol * residual_scale(&[lhs, base, other]) {
                return Ok(PropertyReport::fail(
                    "additive",
                    trial + 1,
                    max_residual,
                    Witness {
                        slot: Some(slot),
                        bodies,
                        extra_bodies: vec![extra],
                        values: vec![lhs, base, other],
                        residual,
                        detail: format!(
                            "F(.., L+M, ..) = {lhs} but F(.., L, ..) + F(.., M, ..) = {}",
                            base + other
                        ),
                    },
                ));
            }
        }
    }
    Ok(PropertyReport::pass("additive", trials, max_residual))
}

/// Positivity: F >= 0 on tuples of star sets.
pub fn check_positive(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        let bodies = gen.tuple(f.dim());
        let value = f.evaluate(&bodies)?;
        let residual = (-value).max(0.0);
        max_residual = max_residual.max(residual);
        if residual > tol * residual_scale(&[value]) {
            return Ok(PropertyReport::fail(
                "positive",
                trial + 1,
                max_residual,
                Witness {
                    slot: None,
                    bodies,
                    extra_bodies: Vec::new(),
                    values: vec![value],
                    residual,
                    detail: format!("F = {value} < 0"),
                },
            ));
        }
    }
    Ok(PropertyReport::pass("positive", trials, max_residual))
}

/// Monotonicity with respect to set inclusion in every slot.
pub fn check_increasing(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let n = f.dim();
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        let pairs: Vec<(StarSet, StarSet)> = (0..n).map(|_| gen.nested_pair()).collect();
        let small: Vec<StarSet> = pairs.iter().map(|(s, _)| s.clone()).collect();
        let big: Vec<StarSet> = pairs.iter().map(|(_, b)| b.clone()).collect();
        let fs = f.evaluate(&small)?;
        let fb = f.evaluate(&big)?;
        let residual = (fs - fb).max(0.0);
        max_residual = max_residual.max(residual);
        if residual > tol * residual_scale(&[fs, fb]) {
            return Ok(PropertyReport::fail(
                "increasing",
                trial + 1,
                max_residual,
                Witness {
                    slot: None,
                    bodies: small,
                    extra_bodies: big,
                    values: vec![fs, fb],
                    residual,
                    detail: format!("nested tuple decreased F: {fs} > {fb}"),
                },
            ));
        }
    }
    Ok(PropertyReport::pass("increasing", trials, max_residual))
}

/// Positive homogeneity in every slot over a fixed factor panel.
pub fn check_homogeneous(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let factors = [0.0, 1.0 / 3.0, 1.0, 2.0, 3.5, std::f64::consts::E];
    let n = f.dim();
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        let bodies = gen.tuple(n);
        let base = f.evaluate(&bodies)?;
        for slot in 0..n {
            for &t in &factors {
                let mut scaled = bodies.clone();
                scaled[slot] = scale(t, &bodies[slot])?;
                let lhs = f.evaluate(&scaled)?;
                let residual = (lhs - t * base).abs();
                max_residual = max_residual.max(residual);
                if residual > tol * residual_scale(&[lhs, t * base]) {
                    return Ok(PropertyReport::fail(
                        "homogeneous",
                        trial + 1,
                        max_residual,
                        Witness {
                            slot: Some(slot),
                            bodies,
                            extra_bodies: vec![scaled[slot].clone()],
                            values: vec![lhs, base],
                            residual,
                            detail: format!("F(t L) = {lhs} but t F(L) = {} at t = {t}", t * base),
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyReport::pass("homogeneous", trials, max_residual))
}

/// The vanishing condition: F = 0 whenever two of the arguments intersect
/// only at the origin (disjoint bases).
pub fn check_vanishing(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let n = f.dim();
    if grid.len() < 2 {
        return Ok(PropertyReport::inconclusive(
            "vanishing",
            "the grid has fewer than 2 cells, so no disjoint-base tuples exist",
        ));
    }
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = gen.disjoint_pair();
                let mut bodies = gen.tuple(n);
                bodies[i] = a;
                bodies[j] = b;
                let value = f.evaluate(&bodies)?;
                let residual = value.abs();
                max_residual = max_residual.max(residual);
                if residual > tol * residual_scale(&[value]) {
                    return Ok(PropertyReport::fail(
                        "vanishing",
                        trial + 1,
                        max_residual,
                        Witness {
                            slot: Some(i),
                            bodies,
                            extra_bodies: Vec::new(),
                            values: vec![value],
                            residual,
                            detail: format!(
                                "slots {i} and {j} have disjoint bases but F = {value}"
                            ),
                        },
                    ));
                }
            }
        }
    }
    Ok(PropertyReport::pass("vanishing", trials, max_residual))
}

/// Rotation invariance over the grid's symmetry group.
pub fn check_rotation_invariant(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<PropertyReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let grid = require_grid(f, grid)?;
    let symmetries = grid.symmetries();
    if symmetries.len() <= 1 {
        return Ok(PropertyReport::inconclusive(
            "rotation-invariant",
            "the grid admits no nontrivial symmetries",
        ));
    }
    let n = f.dim();
    let mut gen = RandomPolycones::new(grid, seed);
    let mut max_residual = 0.0_f64;
    for trial in 0..trials {
        let bodies = gen.tuple(n);
        let base = f.evaluate(&bodies)?;
        for (s, sym) in symmetries.iter().enumerate().skip(1) {
            let rotated = bodies
                .iter()
                .map(|b| rotate_starset(&sym.rotation, b))
                .collect::<Result<Vec<_>>>()?;
            let value = f.evaluate(&rotated)?;
            let residual = (value - base).abs();
            max_residual = max_residual.max(residual);
            if residual > tol * residual_scale(&[value, base]) {
                return Ok(PropertyReport::fail(
                    "rotation-invariant",
                    trial + 1,
                    max_residual,
                    Witness {
                        slot: None,
                        bodies,
                        extra_bodies: rotated,
                        values: vec![base, value],
                        residual,
                        detail: format!(
                            "grid symmetry #{s} changed F from {base} to {value}"
                        ),
                    },
                ));
            }
        }
    }
    Ok(PropertyReport::pass(
        "rotation-invariant",
        trials,
        max_residual,
    ))
}
