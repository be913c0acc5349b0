//! Star sets and star bodies via radial functions: the radial algebra
//! (sum, scaling, rotation), star hulls, cones, and polycones with their
//! canonical forms.
//!
//! A star set is identified with its radial function. Three representations
//! are supported: `Simple` (a canonical polycone: finitely many positive
//! levels over disjoint bases), `GridSampled` (one nonnegative value per
//! grid cell), and `Sampler` (a black-box evaluator with a declared upper
//! bound). All values are nonnegative; the trivial star set `{o}` is the
//! empty polycone with radial function identically zero.

mod interval;
mod refine;

pub(crate) use interval::IntervalSet;
pub(crate) use refine::{refine, BodyRepr};

use crate::error::{DmvError, Result};
use crate::sphere::{same_grid, Direction, Rotation, SphereGrid, SphericalRegion};
use std::fmt;
use std::sync::Arc;

/// Canonical simple radial function: finitely many cones over pairwise
/// disjoint bases, ordered by level.
#[derive(Clone, Debug)]
pub struct Polycone {
    dim: usize,
    terms: Vec<(f64, SphericalRegion)>,
}

impl Polycone {
    /// The trivial star set {o}.
    pub fn origin(dim: usize) -> Result<Polycone> {
        if dim < 2 {
            return Err(DmvError::Domain(format!("dim must be >= 2, got {dim}")));
        }
        Ok(Polycone {
            dim,
            terms: Vec::new(),
        })
    }

    /// Cone of base `base` and radius `level`: radial function level * 1_base.
    pub fn cone(level: f64, base: SphericalRegion) -> Result<Polycone> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(DmvError::Domain(format!(
                "cone radius must be finite and > 0, got {level}"
            )));
        }
        Ok(Polycone {
            dim: base.dim(),
            terms: vec![(level, base)],
        })
    }

    /// Star hull of a region: the cone of radius 1.
    pub fn star_hull(base: SphericalRegion) -> Result<Polycone> {
        Polycone::cone(1.0, base)
    }

    /// Ball of the given radius.
    pub fn ball(dim: usize, radius: f64) -> Result<Polycone> {
        if radius < 0.0 || !radius.is_finite() {
            return Err(DmvError::Domain(format!("ball radius {radius} invalid")));
        }
        if radius == 0.0 {
            Polycone::origin(dim)
        } else {
            Polycone::cone(radius, SphericalRegion::full(dim)?)
        }
    }

    /// Canonicalize an arbitrary overlay of (level, base) pairs, read as the
    /// union of the corresponding cones: the value at u is the max level
    /// among covering bases. Output bases are pairwise disjoint and levels
    /// distinct and positive.
    pub fn from_terms(dim: usize, terms: Vec<(f64, SphericalRegion)>) -> Result<Polycone> {
        for (level, region) in &terms {
            if *level < 0.0 || !level.is_finite() {
                return Err(DmvError::Domain(format!(
                    "cone level must be finite and >= 0, got {level}"
                )));
            }
            if region.dim() != dim {
                return Err(DmvError::DimensionMismatch(format!(
                    "term region has dim {}, polycone has dim {dim}",
                    region.dim()
                )));
            }
        }
        let kept: Vec<(f64, SphericalRegion)> = terms
            .into_iter()
            .filter(|(level, region)| {
                *level > 0.0
                    && !matches!(region, SphericalRegion::Cells { indices, .. } if indices.is_empty())
            })
            .collect();
        if kept.is_empty() {
            return Polycone::origin(dim);
        }
        match refine(dim, &[BodyRepr::Terms(&kept)]) {
            Ok(refined) => refined.rebuild(dim, &refined.values[0].clone()),
            Err(DmvError::RequiresGrid(_)) => canonicalize_cap_terms(dim, kept),
            Err(e) => Err(e),
        }
    }

    /// Trusted constructor for terms already in canonical form.
    pub(crate) fn from_canonical_terms(dim: usize, terms: Vec<(f64, SphericalRegion)>) -> Polycone {
        Polycone { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(f64, SphericalRegion)] {
        &self.terms
    }

    pub fn is_origin(&self) -> bool {
        self.terms.is_empty()
    }

    /// Pointwise union of polycones: the max of their radial functions.
    pub fn union(polycones: &[Polycone]) -> Result<Polycone> {
        combine_polycones(polycones, |values| {
            values.iter().fold(0.0_f64, |m, v| m.max(*v))
        })
    }

    /// Pointwise intersection of polycones: the min of their radial
    /// functions. For single cones this is min(levels) over the common base.
    pub fn intersect(polycones: &[Polycone]) -> Result<Polycone> {
        combine_polycones(polycones, |values| {
            values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
        })
    }

    pub fn radial_eval(&self, u: &Direction) -> Result<f64> {
        if u.dim() != self.dim {
            return Err(DmvError::DimensionMismatch(format!(
                "direction dim {} vs polycone dim {}",
                u.dim(),
                self.dim
            )));
        }
        let mut value = 0.0_f64;
        for (level, region) in &self.terms {
            if region.contains(u)? {
                value = value.max(*level);
            }
        }
        Ok(value)
    }

    /// Largest level (the sup of the radial function).
    pub fn sup(&self) -> f64 {
        self.terms.iter().fold(0.0_f64, |m, (l, _)| m.max(*l))
    }
}

/// Cap-based overlays cannot be refined without a grid, but identical and
/// provably disjoint bases still canonicalize.
fn canonicalize_cap_terms(
    dim: usize,
    terms: Vec<(f64, SphericalRegion)>,
) -> Result<Polycone> {
    let mut merged: Vec<(f64, SphericalRegion)> = Vec::new();
    for (level, region) in terms {
        match merged.iter_mut().find(|(_, r)| regions_identical(r, &region)) {
            Some((l, _)) => *l = l.max(level),
            None => merged.push((level, region)),
        }
    }
    for i in 0..merged.len() {
        for j in (i + 1)..merged.len() {
            if !regions_provably_disjoint(&merged[i].1, &merged[j].1) {
                return Err(DmvError::RequiresGrid(format!(
                    "overlapping bases {:?} and {:?} have no closed-form overlay",
                    merged[i].1, merged[j].1
                )));
            }
        }
    }
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(Polycone::from_canonical_terms(dim, merged))
}

fn regions_identical(a: &SphericalRegion, b: &SphericalRegion) -> bool {
    match (a, b) {
        (SphericalRegion::Full { dim: d1 }, SphericalRegion::Full { dim: d2 }) => d1 == d2,
        (
            SphericalRegion::Arc { start: s1, end: e1 },
            SphericalRegion::Arc { start: s2, end: e2 },
        ) => s1 == s2 && e1 == e2,
        (SphericalRegion::Arcs { spans: a1 }, SphericalRegion::Arcs { spans: a2 }) => a1 == a2,
        (
            SphericalRegion::Cap { center: c1, radius: r1 },
            SphericalRegion::Cap { center: c2, radius: r2 },
        ) => c1 == c2 && r1 == r2,
        (
            SphericalRegion::Cells { grid: g1, indices: i1 },
            SphericalRegion::Cells { grid: g2, indices: i2 },
        ) => same_grid(g1, g2) && i1 == i2,
        _ => false,
    }
}

fn regions_provably_disjoint(a: &SphericalRegion, b: &SphericalRegion) -> bool {
    match (a, b) {
        (
            SphericalRegion::Cap { center: c1, radius: r1 },
            SphericalRegion::Cap { center: c2, radius: r2 },
        ) => c1.angle_to(c2) > r1 + r2,
        _ => false,
    }
}

/// Black-box radial function with a declared boundedness certificate.
#[derive(Clone)]
pub struct SamplerFn {
    eval: Arc<dyn Fn(&Direction) -> f64 + Send + Sync>,
    bound: f64,
    continuous: bool,
}

impl SamplerFn {
    pub fn new(
        eval: Arc<dyn Fn(&Direction) -> f64 + Send + Sync>,
        bound: f64,
        continuous: bool,
    ) -> Result<SamplerFn> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(DmvError::Domain(format!(
                "sampler bound must be finite and >= 0, got {bound}"
            )));
        }
        Ok(SamplerFn {
            eval,
            bound,
            continuous,
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn continuous(&self) -> bool {
        self.continuous
    }

    fn eval(&self, u: &Direction) -> Result<f64> {
        let v = (self.eval)(u);
        if !(v >= 0.0) || v > self.bound * (1.0 + 1e-9) + 1e-12 {
            return Err(DmvError::Domain(format!(
                "sampler returned {v} outside [0, {}]",
                self.bound
            )));
        }
        Ok(v)
    }
}

impl fmt::Debug for SamplerFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplerFn")
            .field("bound", &self.bound)
            .field("continuous", &self.continuous)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum RadialFunction {
    Simple(Polycone),
    GridSampled {
        grid: Arc<SphereGrid>,
        values: Vec<f64>,
    },
    Sampler(SamplerFn),
}

/// A star set in R^n, identified with its radial function on S^{n-1}.
#[derive(Clone, Debug)]
pub struct StarSet {
    dim: usize,
    rho: RadialFunction,
}

impl StarSet {
    pub fn polycone(p: Polycone) -> StarSet {
        StarSet {
            dim: p.dim(),
            rho: RadialFunction::Simple(p),
        }
    }

    pub fn origin(dim: usize) -> Result<StarSet> {
        Ok(StarSet::polycone(Polycone::origin(dim)?))
    }

    pub fn unit_ball(dim: usize) -> Result<StarSet> {
        Ok(StarSet::polycone(Polycone::ball(dim, 1.0)?))
    }

    pub fn ball(dim: usize, radius: f64) -> Result<StarSet> {
        Ok(StarSet::polycone(Polycone::ball(dim, radius)?))
    }

    pub fn grid_sampled(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<StarSet> {
        if values.len() != grid.len() {
            return Err(DmvError::GridMismatch(format!(
                "grid {} has {} cells but {} values were given",
                grid.id(),
                grid.len(),
                values.len()
            )));
        }
        for &v in &values {
            if v < 0.0 || !v.is_finite() {
                return Err(DmvError::Domain(format!(
                    "radial values must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(StarSet {
            dim: grid.dim(),
            rho: RadialFunction::GridSampled { grid, values },
        })
    }

    pub fn sampler(
        dim: usize,
        eval: Arc<dyn Fn(&Direction) -> f64 + Send + Sync>,
        bound: f64,
        continuous: bool,
    ) -> Result<StarSet> {
        if dim < 2 {
            return Err(DmvError::Domain(format!("dim must be >= 2, got {dim}")));
        }
        Ok(StarSet {
            dim,
            rho: RadialFunction::Sampler(SamplerFn::new(eval, bound, continuous)?),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> &RadialFunction {
        &self.rho
    }

    /// The radial function at a direction.
    pub fn radial_eval(&self, u: &Direction) -> Result<f64> {
        if u.dim() != self.dim {
            return Err(DmvError::DimensionMismatch(format!(
                "direction dim {} vs star set dim {}",
                u.dim(),
                self.dim
            )));
        }
        match &self.rho {
            RadialFunction::Simple(p) => p.radial_eval(u),
            RadialFunction::GridSampled { grid, values } => {
                Ok(values[grid.cell_index_of(u)?])
            }
            RadialFunction::Sampler(s) => s.eval(u),
        }
    }

    /// Boundedness certificate: a value M with rho <= M everywhere.
    pub fn sup_bound(&self) -> f64 {
        match &self.rho {
            RadialFunction::Simple(p) => p.sup(),
            RadialFunction::GridSampled { values, .. } => {
                values.iter().fold(0.0_f64, |m, v| m.max(*v))
            }
            RadialFunction::Sampler(s) => s.bound(),
        }
    }

    /// The constant value of the radial function, if it is constant by
    /// construction.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.rho {
            RadialFunction::Simple(p) => {
                if p.is_origin() {
                    Some(0.0)
                } else if p.terms.len() == 1 {
                    match p.terms[0] {
                        (level, SphericalRegion::Full { .. }) => Some(level),
                        _ => None,
                    }
                } else {
                    None
                }
            }
            RadialFunction::GridSampled { values, .. } => {
                let first = *values.first()?;
                values.iter().all(|&v| v == first).then_some(first)
            }
            RadialFunction::Sampler(_) => None,
        }
    }

    /// A star body is a star set with a continuous radial function. Only
    /// certifiable cases report true: samplers with the continuity flag and
    /// constant radial functions.
    pub fn is_star_body(&self) -> bool {
        match &self.rho {
            RadialFunction::Sampler(s) => s.continuous(),
            _ => self.constant_value().is_some(),
        }
    }

    pub(crate) fn body_repr(&self) -> Result<BodyRepr<'_>> {
        match &self.rho {
            RadialFunction::Simple(p) => Ok(BodyRepr::Terms(&p.terms)),
            RadialFunction::GridSampled { grid, values } => Ok(BodyRepr::Grid {
                grid,
                values,
            }),
            RadialFunction::Sampler(_) => Err(DmvError::RequiresGrid(
                "sampler-backed bodies have no exact refinement".into(),
            )),
        }
    }

    /// Exact per-cell values on a grid. Fails unless the radial function is
    /// constant on every cell of `grid` (no silent discretization).
    pub fn grid_values(&self, grid: &Arc<SphereGrid>) -> Result<Vec<f64>> {
        if self.dim != grid.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "star set dim {} vs grid dim {}",
                self.dim,
                grid.dim()
            )));
        }
        match &self.rho {
            RadialFunction::GridSampled { grid: own, values } => {
                if same_grid(own, grid) {
                    Ok(values.clone())
                } else {
                    Err(DmvError::GridMismatch(format!(
                        "body sampled on grid {}, requested grid {}",
                        own.id(),
                        grid.id()
                    )))
                }
            }
            RadialFunction::Sampler(_) => Err(DmvError::GridMismatch(
                "sampler-backed bodies are not grid functions".into(),
            )),
            RadialFunction::Simple(p) => {
                if let Some(c) = self.constant_value() {
                    return Ok(vec![c; grid.len()]);
                }
                if grid.dim() == 2 {
                    simple_to_circle_grid(p, grid)
                } else {
                    let refined = refine(self.dim, &[self.body_repr()?])?;
                    match refined.cells_grid() {
                        Some(g) if same_grid(g, grid) => Ok(refined.values[0].clone()),
                        _ => Err(DmvError::GridMismatch(format!(
                            "body is not aligned with grid {}",
                            grid.id()
                        ))),
                    }
                }
            }
        }
    }

    /// Discretize onto a grid by sampling at cell representatives. Exact
    /// only for cell-aligned bodies; this is the explicit promotion path.
    pub fn sample_on_grid(&self, grid: &Arc<SphereGrid>) -> Result<StarSet> {
        if self.dim != grid.dim() {
            return Err(DmvError::DimensionMismatch(format!(
                "star set dim {} vs grid dim {}",
                self.dim,
                grid.dim()
            )));
        }
        let values = grid
            .cells()
            .iter()
            .map(|c| self.radial_eval(&c.representative))
            .collect::<Result<Vec<_>>>()?;
        StarSet::grid_sampled(Arc::clone(grid), values)
    }
}

/// Alignment-checked conversion of a circle polycone to grid values.
fn simple_to_circle_grid(p: &Polycone, grid: &Arc<SphereGrid>) -> Result<Vec<f64>> {
    const ALIGN_TOL: f64 = 1e-12;
    let sets = p
        .terms
        .iter()
        .map(|(level, region)| Ok((*level, IntervalSet::from_region(region)?)))
        .collect::<Result<Vec<(f64, IntervalSet)>>>()?;
    let mut out = vec![0.0_f64; grid.len()];
    for (k, cell) in grid.cells().iter().enumerate() {
        let crate::sphere::CellGeometry::Span { start, end } = cell.geometry else {
            return Err(DmvError::GridMismatch("expected a circle grid".into()));
        };
        let cell_set = IntervalSet::from_spans(vec![(start, end)]);
        let width = end - start;
        for (level, set) in &sets {
            let overlap = set.intersect(&cell_set).measure();
            if overlap <= ALIGN_TOL {
                continue;
            }
            if (overlap - width).abs() <= ALIGN_TOL {
                out[k] = out[k].max(*level);
            } else {
                return Err(DmvError::GridMismatch(format!(
                    "term at level {level} is not constant on cell {k} of grid {}",
                    grid.id()
                )));
            }
        }
    }
    Ok(out)
}

fn check_same_dims(bodies: &[StarSet]) -> Result<usize> {
    let dim = bodies
        .first()
        .ok_or_else(|| DmvError::InvalidParameter("no bodies given".into()))?
        .dim();
    for b in bodies {
        if b.dim() != dim {
            return Err(DmvError::DimensionMismatch(format!(
                "bodies have mixed dims {dim} and {}",
                b.dim()
            )));
        }
    }
    Ok(dim)
}

/// Pointwise combination through the exact refinement, with a sampler
/// closure fallback when any body is sampler-backed.
fn combine_starsets(
    bodies: &[StarSet],
    combine: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    bound: f64,
) -> Result<StarSet> {
    let dim = check_same_dims(bodies)?;
    if bodies.iter().any(|b| matches!(b.rho, RadialFunction::Sampler(_))) {
        let owned: Vec<StarSet> = bodies.to_vec();
        let continuous = owned.iter().all(|b| b.is_star_body());
        let eval = move |u: &Direction| {
            let values: Vec<f64> = owned
                .iter()
                .map(|b| b.radial_eval(u).unwrap_or(f64::NAN))
                .collect();
            combine(&values)
        };
        return StarSet::sampler(dim, Arc::new(eval), bound, continuous);
    }

    let reprs = bodies
        .iter()
        .map(|b| b.body_repr())
        .collect::<Result<Vec<_>>>()?;
    let refined = refine(dim, &reprs)?;
    let per_part: Vec<f64> = (0..refined.num_parts())
        .map(|i| {
            let vals: Vec<f64> = refined.values.iter().map(|v| v[i]).collect();
            combine(&vals)
        })
        .collect();

    // Keep the grid-sampled representation when the overlay already lives
    // on the grid of a grid-sampled input.
    if let Some(grid) = refined.cells_grid() {
        if bodies
            .iter()
            .any(|b| matches!(&b.rho, RadialFunction::GridSampled { grid: g, .. } if same_grid(g, grid)))
        {
            return StarSet::grid_sampled(Arc::clone(grid), per_part);
        }
    }
    let result = StarSet::polycone(refined.rebuild(dim, &per_part)?);
    for b in bodies {
        if let RadialFunction::GridSampled { grid, .. } = &b.rho {
            if let Ok(values) = result.grid_values(grid) {
                return StarSet::grid_sampled(Arc::clone(grid), values);
            }
        }
    }
    Ok(result)
}

/// Radial sum: the star set whose radial function is the pointwise sum.
pub fn radial_sum(bodies: &[StarSet]) -> Result<StarSet> {
    let bound = bodies.iter().map(|b| b.sup_bound()).sum();
    combine_starsets(bodies, |vals| vals.iter().sum(), bound)
}

/// Pointwise minimum of radial functions (the radial function of the
/// intersection of the star sets).
pub fn radial_min(bodies: &[StarSet]) -> Result<StarSet> {
    let bound = bodies
        .iter()
        .map(|b| b.sup_bound())
        .fold(f64::INFINITY, f64::min);
    combine_starsets(
        bodies,
        |vals| vals.iter().fold(f64::INFINITY, |m, v| m.min(*v)),
        bound,
    )
}

/// Pointwise maximum of radial functions (the union of the star sets).
pub fn radial_max(bodies: &[StarSet]) -> Result<StarSet> {
    let bound = bodies.iter().map(|b| b.sup_bound()).fold(0.0, f64::max);
    combine_starsets(
        bodies,
        |vals| vals.iter().fold(0.0_f64, |m, v| m.max(*v)),
        bound,
    )
}

/// Scale a star set: rho_{tL} = t * rho_L.
pub fn scale(t: f64, body: &StarSet) -> Result<StarSet> {
    if t < 0.0 || !t.is_finite() {
        return Err(DmvError::Domain(format!(
            "scale factor must be finite and >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return StarSet::origin(body.dim());
    }
    Ok(match &body.rho {
        RadialFunction::Simple(p) => {
            let terms = p
                .terms
                .iter()
                .map(|(level, region)| (t * level, region.clone()))
                .collect();
            StarSet::polycone(Polycone::from_canonical_terms(p.dim, terms))
        }
        RadialFunction::GridSampled { grid, values } => StarSet::grid_sampled(
            Arc::clone(grid),
            values.iter().map(|v| t * v).collect(),
        )?,
        RadialFunction::Sampler(s) => {
            let inner = s.clone();
            StarSet {
                dim: body.dim,
                rho: RadialFunction::Sampler(SamplerFn::new(
                    Arc::new(move |u: &Direction| t * (inner.eval)(u)),
                    t * s.bound(),
                    s.continuous(),
                )?),
            }
        }
    })
}

/// Rotate a star set: rho_{phi L}(u) = rho_L(phi^{-1} u).
pub fn rotate_starset(rotation: &Rotation, body: &StarSet) -> Result<StarSet> {
    if rotation.dim() != body.dim() {
        return Err(DmvError::DimensionMismatch(format!(
            "rotation dim {} vs star set dim {}",
            rotation.dim(),
            body.dim()
        )));
    }
    Ok(match &body.rho {
        RadialFunction::Simple(p) => {
            let terms = p
                .terms
                .iter()
                .map(|(level, region)| Ok((*level, region.rotate(rotation)?)))
                .collect::<Result<Vec<_>>>()?;
            StarSet::polycone(Polycone::from_canonical_terms(p.dim, terms))
        }
        RadialFunction::GridSampled { grid, values } => {
            let sym = grid.symmetry_for(rotation).ok_or_else(|| {
                DmvError::UnsupportedRotation(format!(
                    "rotation does not permute the cells of grid {}",
                    grid.id()
                ))
            })?;
            let mut rotated = vec![0.0; values.len()];
            for (i, &v) in values.iter().enumerate() {
                rotated[sym.permutation[i]] = v;
            }
            StarSet::grid_sampled(Arc::clone(grid), rotated)?
        }
        RadialFunction::Sampler(s) => {
            let inverse = rotation.inverse();
            let inner = s.clone();
            StarSet {
                dim: body.dim,
                rho: RadialFunction::Sampler(SamplerFn::new(
                    Arc::new(move |u: &Direction| {
                        let v = inverse.apply(u).expect("dims checked");
                        (inner.eval)(&v)
                    }),
                    s.bound(),
                    s.continuous(),
                )?),
            }
        }
    })
}

/// Whether rho_a <= rho_b holds everywhere, decided exactly on the common
/// refinement. This is set inclusion for star sets.
pub fn radial_le(a: &StarSet, b: &StarSet) -> Result<bool> {
    let dim = check_same_dims(std::slice::from_ref(a))?;
    if b.dim() != dim {
        return Err(DmvError::DimensionMismatch(
            "bodies have different dims".into(),
        ));
    }
    let reprs = vec![a.body_repr()?, b.body_repr()?];
    let refined = refine(dim, &reprs)?;
    Ok((0..refined.num_parts()).all(|i| refined.values[0][i] <= refined.values[1][i]))
}

fn combine_polycones(
    polycones: &[Polycone],
    combine: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Result<Polycone> {
    if polycones.is_empty() {
        return Err(DmvError::InvalidParameter("no polycones given".into()));
    }
    let dim = polycones[0].dim();
    let bodies: Vec<StarSet> = polycones.iter().map(|p| StarSet::polycone(p.clone())).collect();
    check_same_dims(&bodies)?;
    let reprs = bodies
        .iter()
        .map(|b| b.body_repr())
        .collect::<Result<Vec<_>>>()?;
    match refine(dim, &reprs) {
        Ok(refined) => {
            let per_part: Vec<f64> = (0..refined.num_parts())
                .map(|i| {
                    let vals: Vec<f64> = refined.values.iter().map(|v| v[i]).collect();
                    combine(&vals)
                })
                .collect();
            refined.rebuild(dim, &per_part)
        }
        Err(DmvError::RequiresGrid(msg)) => {
            cap_polycone_fallback(dim, polycones, &combine).ok_or(DmvError::RequiresGrid(msg))
        }
        Err(e) => Err(e),
    }
}

/// Union/intersection of single cones whose bases are identical or provably
/// disjoint caps, which need no refinement.
fn cap_polycone_fallback(
    dim: usize,
    polycones: &[Polycone],
    combine: &(impl Fn(&[f64]) -> f64 + Send + Sync + 'static),
) -> Option<Polycone> {
    if !polycones.iter().all(|p| p.terms.len() == 1) {
        return None;
    }
    let first = &polycones[0].terms[0].1;
    if polycones
        .iter()
        .all(|p| regions_identical(&p.terms[0].1, first))
    {
        let values: Vec<f64> = polycones.iter().map(|p| p.terms[0].0).collect();
        let level = combine(&values);
        // Outside the common base every radial function is zero.
        let outside = combine(&vec![0.0; values.len()]);
        if outside != 0.0 {
            return None;
        }
        return if level > 0.0 {
            Some(Polycone::from_canonical_terms(
                dim,
                vec![(level, first.clone())],
            ))
        } else {
            Polycone::origin(dim).ok()
        };
    }
    let pairwise_disjoint = (0..polycones.len()).all(|i| {
        ((i + 1)..polycones.len())
            .all(|j| regions_provably_disjoint(&polycones[i].terms[0].1, &polycones[j].terms[0].1))
    });
    if !pairwise_disjoint {
        return None;
    }
    // On disjoint bases, at most one radial function is nonzero at a point.
    let n = polycones.len();
    let mut terms = Vec::new();
    for (i, p) in polycones.iter().enumerate() {
        let mut probe = vec![0.0; n];
        probe[i] = p.terms[0].0;
        let level = combine(&probe);
        if level > 0.0 {
            terms.push((level, p.terms[0].1.clone()));
        }
    }
    let zero = combine(&vec![0.0; n]);
    if zero != 0.0 {
        return None;
    }
    terms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Some(Polycone::from_canonical_terms(dim, terms))
}

/// Star hull of a region: st A, with radial function 1_A.
pub fn star_hull(base: SphericalRegion) -> Result<Polycone> {
    Polycone::star_hull(base)
}

/// Cone of base A and radius alpha: radial function alpha * 1_A.
pub fn cone(level: f64, base: SphericalRegion) -> Result<Polycone> {
    Polycone::cone(level, base)
}

/// Canonicalize an overlay of (level, base) pairs into a polycone.
pub fn canonicalize(dim: usize, terms: Vec<(f64, SphericalRegion)>) -> Result<Polycone> {
    Polycone::from_terms(dim, terms)
}

/// Union of polycones (module-level alias).
pub fn polycone_union(polycones: &[Polycone]) -> Result<Polycone> {
    Polycone::union(polycones)
}

/// Intersection of polycones (module-level alias).
pub fn polycone_intersect(polycones: &[Polycone]) -> Result<Polycone> {
    Polycone::intersect(polycones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn arc(s: f64, e: f64) -> SphericalRegion {
        SphericalRegion::arc(s, e).unwrap()
    }

    #[test]
    fn radial_eval_basics() {
        let ball = StarSet::unit_ball(2).unwrap();
        assert_eq!(ball.radial_eval(&Direction::from_angle(1.2)).unwrap(), 1.0);

        let c = StarSet::polycone(cone(2.0, arc(0.0, PI / 2.0)).unwrap());
        assert_eq!(c.radial_eval(&Direction::from_angle(PI / 4.0)).unwrap(), 2.0);
        assert_eq!(c.radial_eval(&Direction::from_angle(PI)).unwrap(), 0.0);
    }

    #[test]
    fn radial_sum_identity_and_overlap() {
        // L + {o} = L.
        let c = StarSet::polycone(cone(2.0, arc(0.0, PI)).unwrap());
        let sum = radial_sum(&[c.clone(), StarSet::origin(2).unwrap()]).unwrap();
        for k in 0..100 {
            let u = Direction::from_angle(k as f64 * TAU / 100.0);
            assert_eq!(
                sum.radial_eval(&u).unwrap(),
                c.radial_eval(&u).unwrap()
            );
        }

        // Overlapping cones: 1 on [0,pi) plus 2 on [pi/2, 3pi/2).
        let a = StarSet::polycone(cone(1.0, arc(0.0, PI)).unwrap());
        let b = StarSet::polycone(cone(2.0, arc(PI / 2.0, 3.0 * PI / 2.0)).unwrap());
        let s = radial_sum(&[a.clone(), b.clone()]).unwrap();
        // Pointwise oracle at 10^4 directions.
        for k in 0..10_000 {
            let u = Direction::from_angle(k as f64 * TAU / 10_000.0);
            let expect = a.radial_eval(&u).unwrap() + b.radial_eval(&u).unwrap();
            assert_eq!(s.radial_eval(&u).unwrap(), expect);
        }
        // Canonical levels are {1, 2, 3}.
        let RadialFunction::Simple(p) = s.rho() else { panic!("expected simple") };
        let levels: Vec<f64> = p.terms().iter().map(|(l, _)| *l).collect();
        assert_eq!(levels, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sum_of_balls_is_constant() {
        let b = StarSet::unit_ball(2).unwrap();
        let s = radial_sum(&[b.clone(), b]).unwrap();
        assert_eq!(s.constant_value(), Some(2.0));
    }

    #[test]
    fn grid_sampled_sum_stays_grid_sampled() {
        let g = SphereGrid::circle(8).unwrap();
        let a = StarSet::grid_sampled(Arc::clone(&g), vec![1.0; 8]).unwrap();
        let b = StarSet::polycone(cone(0.5, arc(0.0, PI / 4.0)).unwrap());
        let s = radial_sum(&[a, b]).unwrap();
        match s.rho() {
            RadialFunction::GridSampled { values, .. } => {
                assert_eq!(values[0], 1.5);
                assert_eq!(values[1], 1.0);
            }
            other => panic!("expected grid-sampled result, got {other:?}"),
        }
    }

    #[test]
    fn grid_id_mismatch_is_an_error() {
        let g1 = SphereGrid::lat_lon(2, 4).unwrap();
        let g2 = SphereGrid::lat_lon(4, 4).unwrap();
        let a = StarSet::grid_sampled(g1, vec![1.0; 8]).unwrap();
        let b = StarSet::grid_sampled(g2, vec![1.0; 16]).unwrap();
        assert!(matches!(
            radial_sum(&[a, b]),
            Err(DmvError::GridMismatch(_))
        ));
    }

    #[test]
    fn radial_sum_is_associative_and_commutative_pointwise() {
        // Dyadic levels keep float addition associative, so equality is exact.
        let g = SphereGrid::circle(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut dyadic_body = |rng: &mut ChaCha8Rng| {
            let n_cells = rng.random_range(1..=4usize);
            let terms: Vec<(f64, SphericalRegion)> = (0..n_cells)
                .map(|_| {
                    let k = rng.random_range(0..16usize);
                    let level = rng.random_range(16..=256u32) as f64 / 64.0;
                    (
                        level,
                        SphericalRegion::cells(Arc::clone(&g), [k].into_iter().collect())
                            .unwrap(),
                    )
                })
                .collect();
            StarSet::polycone(Polycone::from_terms(2, terms).unwrap())
        };
        for _ in 0..20 {
            let (a, b, c) = (
                dyadic_body(&mut rng),
                dyadic_body(&mut rng),
                dyadic_body(&mut rng),
            );
            let left = radial_sum(&[radial_sum(&[a.clone(), b.clone()]).unwrap(), c.clone()])
                .unwrap();
            let right = radial_sum(&[a.clone(), radial_sum(&[b.clone(), c.clone()]).unwrap()])
                .unwrap();
            let swapped = radial_sum(&[b, a, c]).unwrap();
            for k in 0..1000 {
                let u = Direction::from_angle(k as f64 * TAU / 1000.0);
                let l = left.radial_eval(&u).unwrap();
                assert_eq!(l, right.radial_eval(&u).unwrap());
                assert_eq!(l, swapped.radial_eval(&u).unwrap());
            }
        }
    }

    #[test]
    fn scale_behaviour() {
        let c = StarSet::polycone(cone(1.5, arc(0.0, PI)).unwrap());
        let zero = scale(0.0, &c).unwrap();
        assert_eq!(zero.sup_bound(), 0.0);

        let tripled = scale(3.0, &c).unwrap();
        assert_eq!(
            tripled.radial_eval(&Direction::from_angle(1.0)).unwrap(),
            4.5
        );

        let b3 = StarSet::unit_ball(3).unwrap();
        assert_eq!(scale(2.0, &b3).unwrap().constant_value(), Some(2.0));
        assert!(scale(-1.0, &c).is_err());

        // Homogeneity carrier: scale(t, P) evaluates to t * rho everywhere.
        for t in [0.0, 0.5, 1.0, 3.0] {
            let scaled = scale(t, &c).unwrap();
            for k in 0..100 {
                let u = Direction::from_angle(k as f64 * TAU / 100.0);
                assert_eq!(
                    scaled.radial_eval(&u).unwrap(),
                    t * c.radial_eval(&u).unwrap()
                );
            }
        }
    }

    #[test]
    fn rotate_shifts_arcs_and_fixes_balls() {
        let c = StarSet::polycone(cone(1.0, arc(0.0, PI / 2.0)).unwrap());
        let r = rotate_starset(&Rotation::planar(PI / 2.0), &c).unwrap();
        assert_eq!(r.radial_eval(&Direction::from_angle(3.0 * PI / 4.0)).unwrap(), 1.0);
        assert_eq!(r.radial_eval(&Direction::from_angle(PI / 4.0)).unwrap(), 0.0);

        let id = rotate_starset(&Rotation::identity(2), &c).unwrap();
        for k in 0..100 {
            let u = Direction::from_angle(k as f64 * TAU / 100.0);
            assert_eq!(id.radial_eval(&u).unwrap(), c.radial_eval(&u).unwrap());
        }

        let ball = StarSet::unit_ball(2).unwrap();
        let rb = rotate_starset(&Rotation::planar(1.234), &ball).unwrap();
        assert_eq!(rb.constant_value(), Some(1.0));
    }

    #[test]
    fn rotate_grid_sampled_needs_symmetry() {
        let g = SphereGrid::circle(4).unwrap();
        let v = StarSet::grid_sampled(Arc::clone(&g), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = rotate_starset(&Rotation::planar(PI / 2.0), &v).unwrap();
        match r.rho() {
            RadialFunction::GridSampled { values, .. } => {
                assert_eq!(values, &vec![4.0, 1.0, 2.0, 3.0]);
            }
            _ => panic!("expected grid-sampled"),
        }
        assert!(matches!(
            rotate_starset(&Rotation::planar(0.3), &v),
            Err(DmvError::UnsupportedRotation(_))
        ));
    }

    #[test]
    fn star_hull_and_cone_basics() {
        let hull = star_hull(SphericalRegion::full(2).unwrap()).unwrap();
        assert_eq!(hull.terms().len(), 1);
        assert_eq!(hull.terms()[0].0, 1.0);

        let c = cone(2.0, arc(0.0, PI)).unwrap();
        assert_eq!(c.terms()[0].0, 2.0);
        assert!(cone(0.0, arc(0.0, PI)).is_err());

        // Cone over an empty-measure region has radial function identically 0
        // after canonicalization.
        let g = SphereGrid::circle(4).unwrap();
        let empty = SphericalRegion::cells(g, std::collections::BTreeSet::new()).unwrap();
        let p = Polycone::from_terms(2, vec![(2.0, empty)]).unwrap();
        assert!(p.is_origin());
    }

    #[test]
    fn union_examples() {
        let c = cone(2.0, arc(0.0, PI)).unwrap();
        let self_union = polycone_union(&[c.clone(), c.clone()]).unwrap();
        assert_eq!(self_union.terms().len(), 1);
        assert_eq!(self_union.terms()[0].0, 2.0);

        // Disjoint bases keep both terms.
        let d = cone(1.0, arc(PI, 3.0 * PI / 2.0)).unwrap();
        let u = polycone_union(&[c.clone(), d]).unwrap();
        assert_eq!(u.terms().len(), 2);

        // Overlapping example: pointwise max at 10^4 directions.
        let a = cone(1.0, arc(0.0, PI)).unwrap();
        let b = cone(2.0, arc(PI / 2.0, 3.0 * PI / 2.0)).unwrap();
        let u = polycone_union(&[a.clone(), b.clone()]).unwrap();
        for k in 0..10_000 {
            let dir = Direction::from_angle(k as f64 * TAU / 10_000.0);
            let expect = a.radial_eval(&dir).unwrap().max(b.radial_eval(&dir).unwrap());
            assert_eq!(u.radial_eval(&dir).unwrap(), expect);
        }
    }

    #[test]
    fn intersect_examples() {
        let c = cone(2.0, arc(0.0, PI)).unwrap();
        let self_int = polycone_intersect(&[c.clone(), c.clone()]).unwrap();
        assert_eq!(self_int.terms().len(), 1);
        assert_eq!(self_int.terms()[0].0, 2.0);

        // Disjoint bases intersect to {o}.
        let d = cone(1.0, arc(PI, 3.0 * PI / 2.0)).unwrap();
        assert!(polycone_intersect(&[c, d]).unwrap().is_origin());

        // Overlap: min(1, 2) on the common base [pi/2, pi).
        let a = cone(1.0, arc(0.0, PI)).unwrap();
        let b = cone(2.0, arc(PI / 2.0, 3.0 * PI / 2.0)).unwrap();
        let i = polycone_intersect(&[a.clone(), b.clone()]).unwrap();
        for k in 0..10_000 {
            let dir = Direction::from_angle(k as f64 * TAU / 10_000.0);
            let expect = a.radial_eval(&dir).unwrap().min(b.radial_eval(&dir).unwrap());
            assert_eq!(i.radial_eval(&dir).unwrap(), expect);
        }
        assert_eq!(i.terms().len(), 1);
        assert_eq!(i.terms()[0].0, 1.0);
    }

    #[test]
    fn cap_cone_union_and_intersection_fallbacks() {
        let north = Direction::new(vec![0.0, 0.0, 1.0]).unwrap();
        let south = Direction::new(vec![0.0, 0.0, -1.0]).unwrap();
        let a = cone(2.0, SphericalRegion::cap(north.clone(), 0.5).unwrap()).unwrap();
        let b = cone(1.0, SphericalRegion::cap(south, 0.5).unwrap()).unwrap();
        // Provably disjoint caps: union keeps both, intersection is {o}.
        assert_eq!(polycone_union(&[a.clone(), b.clone()]).unwrap().terms().len(), 2);
        assert!(polycone_intersect(&[a.clone(), b]).unwrap().is_origin());

        // Identical cap bases take min/max of levels.
        let c = cone(3.0, SphericalRegion::cap(north, 0.5).unwrap()).unwrap();
        let i = polycone_intersect(&[a.clone(), c.clone()]).unwrap();
        assert_eq!(i.terms()[0].0, 2.0);
        let u = polycone_union(&[a, c]).unwrap();
        assert_eq!(u.terms()[0].0, 3.0);
    }

    #[test]
    fn canonicalize_examples() {
        // Already canonical: unchanged levels/regions.
        let p = Polycone::from_terms(
            2,
            vec![(1.0, arc(0.0, 1.0)), (2.0, arc(2.0, 3.0))],
        )
        .unwrap();
        assert_eq!(p.terms().len(), 2);

        // Duplicate (alpha, A) overlays collapse.
        let p = Polycone::from_terms(2, vec![(1.5, arc(0.0, 1.0)), (1.5, arc(0.0, 1.0))]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert!((p.terms()[0].1.measure().unwrap() - 1.0).abs() < 1e-15);

        // Overlapping arcs at one level merge into one region of the
        // disjointified measure.
        let p = Polycone::from_terms(2, vec![(1.5, arc(0.0, 2.0)), (1.5, arc(1.0, 3.0))]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert!((p.terms()[0].1.measure().unwrap() - 3.0).abs() < 1e-15);
        // Pointwise equality against the overlay on a dense sample.
        for k in 0..10_000 {
            let u = Direction::from_angle(k as f64 * TAU / 10_000.0);
            let a = u.azimuth();
            let expect = if (0.0..3.0).contains(&a) { 1.5 } else { 0.0 };
            assert_eq!(p.radial_eval(&u).unwrap(), expect);
        }

        // Negative level rejected.
        assert!(Polycone::from_terms(2, vec![(-1.0, arc(0.0, 1.0))]).is_err());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let terms: Vec<(f64, SphericalRegion)> = (0..rng.random_range(1..5usize))
                .map(|_| {
                    let s = rng.random_range(0.0..TAU - 0.1);
                    let e = rng.random_range(s + 0.05..TAU);
                    (rng.random_range(0.25..4.0), arc(s, e))
                })
                .collect();
            let once = Polycone::from_terms(2, terms).unwrap();
            let twice = Polycone::from_terms(2, once.terms().to_vec()).unwrap();
            assert_eq!(once.terms().len(), twice.terms().len());
            for k in 0..1000 {
                let u = Direction::from_angle(k as f64 * TAU / 1000.0);
                assert_eq!(
                    once.radial_eval(&u).unwrap(),
                    twice.radial_eval(&u).unwrap()
                );
            }
        }
    }

    #[test]
    fn inclusion_order_matches_radial_order() {
        let g = SphereGrid::circle(8).unwrap();
        let small = StarSet::grid_sampled(Arc::clone(&g), vec![1.0; 8]).unwrap();
        let mut big_vals = vec![1.0; 8];
        big_vals[3] = 2.0;
        let big = StarSet::grid_sampled(Arc::clone(&g), big_vals).unwrap();
        assert!(radial_le(&small, &big).unwrap());
        assert!(!radial_le(&big, &small).unwrap());
    }

    #[test]
    fn sampler_roundtrip_and_bound_enforcement() {
        let s = StarSet::sampler(
            3,
            Arc::new(|u: &Direction| 1.0 + u.coords()[2].abs()),
            2.0,
            true,
        )
        .unwrap();
        let north = Direction::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.radial_eval(&north).unwrap(), 2.0);
        assert!(s.is_star_body());

        // A sampler that violates its declared bound errors at evaluation.
        let bad = StarSet::sampler(3, Arc::new(|_: &Direction| 5.0), 2.0, true).unwrap();
        assert!(bad.radial_eval(&north).is_err());
    }

    #[test]
    fn sampler_sum_closure() {
        let s = StarSet::sampler(
            2,
            Arc::new(|u: &Direction| 1.0 + 0.5 * u.coords()[0]),
            1.5,
            true,
        )
        .unwrap();
        let c = StarSet::polycone(cone(2.0, arc(0.0, PI)).unwrap());
        let sum = radial_sum(&[s.clone(), c.clone()]).unwrap();
        for k in 0..100 {
            let u = Direction::from_angle(0.01 + k as f64 * TAU / 101.0);
            let expect = s.radial_eval(&u).unwrap() + c.radial_eval(&u).unwrap();
            assert!((sum.radial_eval(&u).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_values_strict_alignment() {
        let g = SphereGrid::circle(4).unwrap();
        // Aligned: [0, pi) covers exactly cells 0 and 1.
        let aligned = StarSet::polycone(cone(2.0, arc(0.0, PI)).unwrap());
        assert_eq!(aligned.grid_values(&g).unwrap(), vec![2.0, 2.0, 0.0, 0.0]);
        // Misaligned arcs refuse silent discretization.
        let skew = StarSet::polycone(cone(2.0, arc(0.1, 1.0)).unwrap());
        assert!(matches!(skew.grid_values(&g), Err(DmvError::GridMismatch(_))));
        // Explicit promotion samples at representatives.
        let sampled = skew.sample_on_grid(&g).unwrap();
        assert_eq!(sampled.radial_eval(&Direction::from_angle(0.5)).unwrap(), 2.0);
    }
}
