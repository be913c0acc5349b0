//! Dual mixed volumes: exact computation on polycones and grid-sampled
//! bodies, quadrature with a sound error bound for rasterized bodies, and
//! a seeded Monte Carlo estimator for sampler-backed bodies.
//!
//! The dual mixed volume of n star sets in R^n is (1/n) times the integral
//! over the sphere of the product of their radial functions; with all
//! arguments equal it is the Lebesgue volume of the star set.

use crate::error::{DmvError, Result};
use crate::numeric::compensated_sum;
use crate::sphere::{rasterize, surface_measure, Direction, SphereGrid};
use crate::starset::{radial_sum, refine, scale, Polycone, RadialFunction, StarSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Quadrature,
    MonteCarlo,
}

/// A computed volume with its method and error report: zero for exact
/// arithmetic, a sound bound for quadrature, a standard error for Monte
/// Carlo.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Volume {
    pub value: f64,
    pub method: Method,
    pub error: f64,
}

impl Volume {
    fn exact(value: f64) -> Volume {
        Volume {
            value,
            method: Method::Exact,
            error: 0.0,
        }
    }
}

fn check_arity(bodies: &[StarSet]) -> Result<usize> {
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
    if bodies.len() != dim {
        return Err(DmvError::Arity {
            expected: dim,
            got: bodies.len(),
        });
    }
    Ok(dim)
}

/// Exact integral of the product of radial functions over the sphere.
///
/// Works on any jointly refinable family; additionally handles the case of
/// at most one non-constant polycone body (whose canonical terms integrate
/// term by term), which covers cap-based cones alongside balls.
pub fn product_integral(bodies: &[StarSet]) -> Result<f64> {
    let dim = bodies
        .first()
        .ok_or_else(|| DmvError::InvalidParameter("no bodies given".into()))?
        .dim();
    let reprs: Result<Vec<_>> = bodies.iter().map(|b| b.body_repr()).collect();
    match reprs.and_then(|r| refine(dim, &r)) {
        Ok(refined) => {
            let terms: Vec<f64> = (0..refined.num_parts())
                .map(|i| {
                    let product: f64 = refined.values.iter().map(|v| v[i]).product();
                    product * refined.part_measure(i)
                })
                .collect();
            Ok(compensated_sum(terms))
        }
        Err(DmvError::RequiresGrid(msg)) => {
            solo_product_integral(dim, bodies).ok_or(DmvError::RequiresGrid(msg))?
        }
        Err(e) => Err(e),
    }
}

fn solo_product_integral(dim: usize, bodies: &[StarSet]) -> Option<Result<f64>> {
    let mut constant_product = 1.0_f64;
    let mut solo: Option<&StarSet> = None;
    for b in bodies {
        match b.constant_value() {
            Some(c) => constant_product *= c,
            None if solo.is_none() => solo = Some(b),
            None => return None,
        }
    }
    Some(match solo {
        None => surface_measure(dim).map(|s| constant_product * s),
        Some(body) => match body.rho() {
            RadialFunction::Simple(p) => {
                let terms: Result<Vec<f64>> = p
                    .terms()
                    .iter()
                    .map(|(level, region)| Ok(level * region.measure()?))
                    .collect();
                terms.map(|t| constant_product * compensated_sum(t))
            }
            _ => return None,
        },
    })
}

/// Exact integral of a single radial function over the sphere.
pub fn radial_integral(body: &StarSet) -> Result<f64> {
    product_integral(std::slice::from_ref(body))
}

/// Dual mixed volume of exactly n star sets in R^n, on the exact path.
pub fn dual_mixed_volume(bodies: &[StarSet]) -> Result<Volume> {
    let dim = check_arity(bodies)?;
    Ok(Volume::exact(product_integral(bodies)? / dim as f64))
}

/// Lebesgue volume of a star set: the dual mixed volume with all arguments
/// equal, computed directly from the representation.
pub fn volume(body: &StarSet) -> Result<Volume> {
    let n = body.dim() as f64;
    match body.rho() {
        RadialFunction::Simple(p) => {
            let terms: Result<Vec<f64>> = p
                .terms()
                .iter()
                .map(|(level, region)| Ok(level.powi(body.dim() as i32) * region.measure()?))
                .collect();
            Ok(Volume::exact(compensated_sum(terms?) / n))
        }
        RadialFunction::GridSampled { grid, values } => {
            let terms = values
                .iter()
                .enumerate()
                .map(|(k, v)| v.powi(body.dim() as i32) * grid.weight(k));
            Ok(Volume::exact(compensated_sum(terms) / n))
        }
        RadialFunction::Sampler(_) => Err(DmvError::RequiresGrid(
            "sampler-backed bodies have no exact volume; use monte_carlo_dmv".into(),
        )),
    }
}

/// The full ordered-coefficient expansion of H^n(t_1 L_1 + ... + t_m L_m).
#[derive(Clone, Debug)]
pub struct LutwakExpansion {
    dim: usize,
    num_bodies: usize,
    /// Ordered multi-index (i_1, ..., i_n) over body positions, with its
    /// dual mixed volume coefficient; lexicographic order.
    coefficients: Vec<(Vec<usize>, f64)>,
}

impl LutwakExpansion {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bodies(&self) -> usize {
        self.num_bodies
    }

    pub fn coefficients(&self) -> &[(Vec<usize>, f64)] {
        &self.coefficients
    }

    pub fn coefficient(&self, index: &[usize]) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|(idx, _)| idx == index)
            .map(|(_, c)| *c)
    }

    /// Evaluate the homogeneous polynomial at nonnegative weights t.
    pub fn evaluate(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.num_bodies {
            return Err(DmvError::InvalidParameter(format!(
                "expected {} weights, got {}",
                self.num_bodies,
                t.len()
            )));
        }
        let terms = self
            .coefficients
            .iter()
            .map(|(idx, c)| c * idx.iter().map(|&i| t[i]).product::<f64>());
        Ok(compensated_sum(terms))
    }
}

/// Compute every ordered coefficient of the Lutwak polynomial. Coefficients
/// are symmetric under argument permutation; each is computed once per
/// multiset and shared across its orderings, so the symmetry is exact.
pub fn lutwak_expand(bodies: &[StarSet]) -> Result<LutwakExpansion> {
    if bodies.is_empty() {
        return Err(DmvError::InvalidParameter("no bodies given".into()));
    }
    let dim = bodies[0].dim();
    for b in bodies {
        if b.dim() != dim {
            return Err(DmvError::DimensionMismatch(
                "bodies have mixed dimensions".into(),
            ));
        }
    }
    let m = bodies.len();
    let count = (m as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > 1_000_000 {
        return Err(DmvError::BudgetExceeded {
            cells: m,
            arity: dim,
            required: count,
            limit: 1_000_000,
        });
    }

    let mut memo: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut coefficients = Vec::with_capacity(count as usize);
    let mut index = vec![0usize; dim];
    loop {
        let mut key = index.clone();
        key.sort_unstable();
        let value = match memo.get(&key) {
            Some(&v) => v,
            None => {
                let tuple: Vec<StarSet> = key.iter().map(|&i| bodies[i].clone()).collect();
                let v = product_integral(&tuple)? / dim as f64;
                memo.insert(key, v);
                v
            }
        };
        coefficients.push((index.clone(), value));
        // Advance the odometer.
        let mut pos = dim;
        loop {
            if pos == 0 {
                return Ok(LutwakExpansion {
                    dim,
                    num_bodies: m,
                    coefficients,
                });
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < m {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Both sides of the Lutwak polynomial identity at a weight vector.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LutwakReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compare H^n(t_1 L_1 + ... + t_m L_m) with the polynomial evaluation.
pub fn verify_lutwak(bodies: &[StarSet], t: &[f64]) -> Result<LutwakReport> {
    if t.len() != bodies.len() {
        return Err(DmvError::InvalidParameter(format!(
            "expected {} weights, got {}",
            bodies.len(),
            t.len()
        )));
    }
    for &ti in t {
        if ti < 0.0 || !ti.is_finite() {
            return Err(DmvError::Domain(format!(
                "weights must be finite and >= 0, got {ti}"
            )));
        }
    }
    let scaled: Result<Vec<StarSet>> = bodies
        .iter()
        .zip(t)
        .map(|(b, &ti)| scale(ti, b))
        .collect();
    let lhs = volume(&radial_sum(&scaled?)?)?.value;
    let rhs = lutwak_expand(bodies)?.evaluate(t)?;
    Ok(LutwakReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Residuals of the two closed forms for the dual mixed volume of cones.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConeProductReport {
    /// Exact dual mixed volume of the cones.
    pub dmv: f64,
    /// (alpha_1 ... alpha_n / n) * sigma(intersection of bases).
    pub product_form: f64,
    /// (alpha_1 ... alpha_n / min(alpha)^n) * H^n(intersection of cones).
    pub ratio_form: f64,
    pub residual_product: f64,
    pub residual_ratio: f64,
    pub base_intersection_measure: f64,
}

/// Check the cone identities: the dual mixed volume of cones C_i with bases
/// A_i and radii alpha_i equals (prod alpha / n) sigma(intersection A_i),
/// and equals (prod alpha / min alpha^n) H^n(intersection C_i).
pub fn cone_product_identity(cones: &[Polycone]) -> Result<ConeProductReport> {
    if cones.is_empty() {
        return Err(DmvError::InvalidParameter("no cones given".into()));
    }
    let dim = cones[0].dim();
    if cones.len() != dim {
        return Err(DmvError::Arity {
            expected: dim,
            got: cones.len(),
        });
    }
    let mut levels = Vec::with_capacity(dim);
    let mut hulls = Vec::with_capacity(dim);
    for c in cones {
        if c.dim() != dim {
            return Err(DmvError::DimensionMismatch(
                "cones have mixed dimensions".into(),
            ));
        }
        let [(level, base)] = c.terms() else {
            return Err(DmvError::Domain(
                "cone_product_identity requires single cones, not general polycones".into(),
            ));
        };
        levels.push(*level);
        hulls.push(StarSet::polycone(Polycone::star_hull(base.clone())?));
    }

    let bodies: Vec<StarSet> = cones.iter().map(|c| StarSet::polycone(c.clone())).collect();
    let dmv = dual_mixed_volume(&bodies)?.value;

    // sigma of the base intersection: the product of indicators integrates
    // to the intersection measure.
    let base_measure = product_integral(&hulls)?;
    let level_product: f64 = levels.iter().product();
    let product_form = level_product / dim as f64 * base_measure;

    let min_level = levels.iter().fold(f64::INFINITY, |m, &l| m.min(l));
    let intersection = Polycone::intersect(cones)?;
    let intersection_volume = volume(&StarSet::polycone(intersection))?.value;
    let ratio_form = level_product / min_level.powi(dim as i32) * intersection_volume;

    Ok(ConeProductReport {
        dmv,
        product_form,
        ratio_form,
        residual_product: (dmv - product_form).abs(),
        residual_ratio: (dmv - ratio_form).abs(),
        base_intersection_measure: base_measure,
    })
}

/// Monte Carlo estimate of the dual mixed volume: uniform directions from
/// normalized standard normal vectors, seeded for reproducibility.
pub fn monte_carlo_dmv(bodies: &[StarSet], samples: usize, seed: u64) -> Result<Volume> {
    let dim = check_arity(bodies)?;
    if samples == 0 {
        return Err(DmvError::InvalidParameter(
            "monte_carlo_dmv needs at least 1 sample".into(),
        ));
    }
    let sigma = surface_measure(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0_f64;
    let mut m2 = 0.0_f64;
    for i in 0..samples {
        let u = random_direction(dim, &mut rng);
        let mut f = 1.0_f64;
        for b in bodies {
            f *= b.radial_eval(&u)?;
        }
        let delta = f - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (f - mean);
    }
    let scale_factor = sigma / dim as f64;
    let stderr = if samples > 1 {
        scale_factor * (m2 / (samples as f64 * (samples as f64 - 1.0))).sqrt()
    } else {
        0.0
    };
    Ok(Volume {
        value: scale_factor * mean,
        method: Method::MonteCarlo,
        error: stderr,
    })
}

pub(crate) fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> Direction {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        if let Ok(u) = Direction::normalized(v) {
            return u;
        }
    }
}

/// Quadrature path: rasterize every body onto `grid`, compute the exact
/// dual mixed volume of the rasterized bodies, and report a sound bound on
/// the rasterization error.
pub fn dmv_quadrature(bodies: &[StarSet], grid: &Arc<SphereGrid>) -> Result<Volume> {
    let dim = check_arity(bodies)?;
    if grid.dim() != dim {
        return Err(DmvError::DimensionMismatch(format!(
            "grid dim {} vs body dim {dim}",
            grid.dim()
        )));
    }
    let mut cellwise: Vec<Vec<f64>> = Vec::with_capacity(bodies.len());
    let mut l1_errors: Vec<f64> = Vec::with_capacity(bodies.len());
    for body in bodies {
        match body.grid_values(grid) {
            Ok(values) => {
                cellwise.push(values);
                l1_errors.push(0.0);
            }
            Err(_) => {
                let (values, l1) = rasterize_body(body, grid)?;
                cellwise.push(values);
                l1_errors.push(l1);
            }
        }
    }
    let value = compensated_sum((0..grid.len()).map(|k| {
        cellwise.iter().map(|v| v[k]).product::<f64>() * grid.weight(k)
    })) / dim as f64;

    let sups: Vec<f64> = bodies.iter().map(|b| b.sup_bound()).collect();
    let bound = l1_errors
        .iter()
        .enumerate()
        .map(|(i, l1)| {
            let others: f64 = sups
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s)
                .product();
            l1 * others
        })
        .sum::<f64>()
        / dim as f64;

    Ok(Volume {
        value,
        method: Method::Quadrature,
        error: bound,
    })
}

/// Rasterize a polycone body onto a grid: per-cell values plus an L1 bound
/// on |rho - rho_rasterized|.
fn rasterize_body(body: &StarSet, grid: &Arc<SphereGrid>) -> Result<(Vec<f64>, f64)> {
    let RadialFunction::Simple(p) = body.rho() else {
        return Err(DmvError::RequiresGrid(
            "only polycone bodies can be rasterized; use monte_carlo_dmv for samplers".into(),
        ));
    };
    let mut values = vec![0.0_f64; grid.len()];
    let mut l1 = 0.0_f64;
    for (level, region) in p.terms() {
        let (cells, bound) = rasterize(region, grid)?;
        if let crate::sphere::SphericalRegion::Cells { indices, .. } = cells {
            for k in indices {
                values[k] = values[k].max(*level);
            }
        }
        l1 += level * bound;
    }
    Ok((values, l1))
}
