//! Common refinement of piecewise-constant radial functions.
//!
//! The exact computation paths (radial algebra, dual mixed volumes, kernel
//! evaluation) all reduce to: overlay the level-set boundaries of every
//! body, read one value per body per elementary part, combine. On the
//! circle the parts are elementary arcs; in n = 3 they are the cells of a
//! shared grid; bodies that are all constant need a single part.

use super::interval::{IntervalRefinement, IntervalSet};
use crate::error::{DmvError, Result};
use crate::sphere::{same_grid, surface_measure, SphereGrid, SphericalRegion};
use std::sync::Arc;

use super::Polycone;

/// A body as the refinement engine sees it.
pub(crate) enum BodyRepr<'a> {
    /// (level, base) terms; terms may overlap, in which case the body's
    /// value is the max over covering terms (union-of-cones semantics).
    Terms(&'a [(f64, SphericalRegion)]),
    Grid {
        grid: &'a Arc<SphereGrid>,
        values: &'a [f64],
    },
}

pub(crate) enum Partition {
    Whole { dim: usize },
    Intervals(IntervalRefinement),
    Cells { grid: Arc<SphereGrid> },
}

pub(crate) struct Refined {
    pub partition: Partition,
    /// values[body][part]
    pub values: Vec<Vec<f64>>,
}

impl Refined {
    pub fn num_parts(&self) -> usize {
        match &self.partition {
            Partition::Whole { .. } => 1,
            Partition::Intervals(r) => r.num_parts(),
            Partition::Cells { grid } => grid.len(),
        }
    }

    pub fn part_measure(&self, i: usize) -> f64 {
        match &self.partition {
            Partition::Whole { dim } => surface_measure(*dim).expect("dim validated"),
            Partition::Intervals(r) => r.part_measure(i),
            Partition::Cells { grid } => grid.weight(i),
        }
    }

    pub fn cells_grid(&self) -> Option<&Arc<SphereGrid>> {
        match &self.partition {
            Partition::Cells { grid } => Some(grid),
            _ => None,
        }
    }

    /// Reassemble a canonical polycone from one level per part: group parts
    /// by exact level equality, drop zeros, order terms by level.
    pub fn rebuild(&self, dim: usize, part_levels: &[f64]) -> Result<Polycone> {
        assert_eq!(part_levels.len(), self.num_parts());
        for &level in part_levels {
            if level < 0.0 || !level.is_finite() {
                return Err(DmvError::Domain(format!(
                    "radial level must be finite and >= 0, got {level}"
                )));
            }
        }
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &level) in part_levels.iter().enumerate() {
            if level == 0.0 {
                continue;
            }
            match groups.iter_mut().find(|(l, _)| *l == level) {
                Some((_, parts)) => parts.push(i),
                None => groups.push((level, vec![i])),
            }
        }
        groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let terms = groups
            .into_iter()
            .map(|(level, parts)| {
                let region = match &self.partition {
                    Partition::Whole { dim } => SphericalRegion::full(*dim)?,
                    Partition::Intervals(r) => {
                        let spans = parts.iter().map(|&i| r.part_span(i)).collect();
                        IntervalSet::from_spans(spans).to_region()?
                    }
                    Partition::Cells { grid } => SphericalRegion::cells(
                        Arc::clone(grid),
                        parts.into_iter().collect(),
                    )?,
                };
                Ok((level, region))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Polycone::from_canonical_terms(dim, terms))
    }
}

/// Build the common refinement of several bodies, or explain why their
/// representations cannot be jointly refined.
pub(crate) fn refine(dim: usize, bodies: &[BodyRepr<'_>]) -> Result<Refined> {
    if dim == 2 {
        return refine_intervals(bodies);
    }

    // A body is constant when its terms are all full-sphere (or it has none).
    let is_constant_terms = |terms: &[(f64, SphericalRegion)]| {
        terms
            .iter()
            .all(|(_, r)| matches!(r, SphericalRegion::Full { .. }))
    };

    let mut shared_grid: Option<Arc<SphereGrid>> = None;
    let mut needs_grid = false;
    for body in bodies {
        match body {
            BodyRepr::Grid { grid, .. } => {
                needs_grid = true;
                match &shared_grid {
                    Some(g) if !same_grid(g, grid) => {
                        return Err(DmvError::GridMismatch(format!(
                            "bodies live on different grids: {} vs {}",
                            g.id(),
                            grid.id()
                        )))
                    }
                    Some(_) => {}
                    None => shared_grid = Some(Arc::clone(grid)),
                }
            }
            BodyRepr::Terms(terms) => {
                if is_constant_terms(terms) {
                    continue;
                }
                needs_grid = true;
                for (_, region) in terms.iter() {
                    match region {
                        SphericalRegion::Full { .. } => {}
                        SphericalRegion::Cells { grid, .. } => match &shared_grid {
                            Some(g) if !same_grid(g, grid) => {
                                return Err(DmvError::GridMismatch(format!(
                                    "bodies live on different grids: {} vs {}",
                                    g.id(),
                                    grid.id()
                                )))
                            }
                            Some(_) => {}
                            None => shared_grid = Some(Arc::clone(grid)),
                        },
                        other => {
                            return Err(DmvError::RequiresGrid(format!(
                                "{other:?} has no closed-form overlay in dimension {dim}"
                            )))
                        }
                    }
                }
            }
        }
    }

    if !needs_grid {
        // All bodies constant: one part covering the sphere.
        let values = bodies
            .iter()
            .map(|b| match b {
                BodyRepr::Terms(terms) => {
                    vec![terms.iter().fold(0.0_f64, |m, (l, _)| m.max(*l))]
                }
                BodyRepr::Grid { .. } => unreachable!("grid bodies force a grid"),
            })
            .collect();
        return Ok(Refined {
            partition: Partition::Whole { dim },
            values,
        });
    }

    let grid = shared_grid.ok_or_else(|| {
        DmvError::RequiresGrid("no shared grid among non-constant bodies".into())
    })?;
    let values = bodies
        .iter()
        .map(|b| dense_cell_values(b, &grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(Refined {
        partition: Partition::Cells { grid },
        values,
    })
}

fn dense_cell_values(body: &BodyRepr<'_>, grid: &Arc<SphereGrid>) -> Result<Vec<f64>> {
    match body {
        BodyRepr::Grid { values, .. } => Ok(values.to_vec()),
        BodyRepr::Terms(terms) => {
            let mut out = vec![0.0_f64; grid.len()];
            for (level, region) in terms.iter() {
                match region {
                    SphericalRegion::Full { .. } => {
                        for v in out.iter_mut() {
                            *v = v.max(*level);
                        }
                    }
                    SphericalRegion::Cells { indices, .. } => {
                        for &k in indices {
                            out[k] = out[k].max(*level);
                        }
                    }
                    other => {
                        return Err(DmvError::RequiresGrid(format!(
                            "{other:?} is not a cell-aligned region"
                        )))
                    }
                }
            }
            Ok(out)
        }
    }
}

fn refine_intervals(bodies: &[BodyRepr<'_>]) -> Result<Refined> {
    // Per body: disjoint (level, span-set) pieces.
    let mut piecewise: Vec<Vec<(f64, IntervalSet)>> = Vec::with_capacity(bodies.len());
    for body in bodies {
        match body {
            BodyRepr::Terms(terms) => {
                let pieces = terms
                    .iter()
                    .map(|(level, region)| Ok((*level, IntervalSet::from_region(region)?)))
                    .collect::<Result<Vec<_>>>()?;
                piecewise.push(pieces);
            }
            BodyRepr::Grid { grid, values } => {
                if grid.dim() != 2 {
                    return Err(DmvError::DimensionMismatch(
                        "grid body has dim != 2 in a circle refinement".into(),
                    ));
                }
                // Group equal-valued cells so constant regions stay compact.
                let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
                for (k, &v) in values.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    match groups.iter_mut().find(|(l, _)| *l == v) {
                        Some((_, ks)) => ks.push(k),
                        None => groups.push((v, vec![k])),
                    }
                }
                let pieces = groups
                    .into_iter()
                    .map(|(v, ks)| {
                        let region = SphericalRegion::cells(
                            Arc::clone(grid),
                            ks.into_iter().collect(),
                        )?;
                        Ok((v, IntervalSet::from_region(&region)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                piecewise.push(pieces);
            }
        }
    }

    let refinement =
        IntervalRefinement::build(piecewise.iter().flatten().map(|(_, set)| set));
    let num_parts = refinement.num_parts();
    let values = piecewise
        .iter()
        .map(|pieces| {
            let mut vals = vec![0.0_f64; num_parts];
            for (level, set) in pieces {
                for (i, covered) in refinement.coverage(set).into_iter().enumerate() {
                    if covered {
                        vals[i] = vals[i].max(*level);
                    }
                }
            }
            vals
        })
        .collect();
    Ok(Refined {
        partition: Partition::Intervals(refinement),
        values,
    })
}
