//! The characterization pipeline: recover the representing measure of a
//! black-box functional from evaluations on indicator cones, test it for
//! diagonal concentration and constant density, estimate the
//! proportionality constant against the dual mixed volume, and run the
//! valuation diagnostics.
//!
//! On a finite grid the recovery is literal: the weight at the cell
//! multi-index (k_1, ..., k_n) is F(st A_{k_1}, ..., st A_{k_n}), and
//! indicator tuples form a basis for multilinear functionals, so recovery
//! is exact on kernel functionals.

use crate::dmv::{dual_mixed_volume, volume};
use crate::error::{DmvError, Result};
use crate::functionals::{
    check_additive, check_increasing, check_positive, check_rotation_invariant, check_vanishing,
    DiagonalFunctional, KernelFunctional, PropertyReport, StarFunctional, Verdict, DEFAULT_TOL,
};
use crate::numeric::{compensated_sum, residual_scale};
use crate::sampling::RandomPolycones;
use crate::sphere::{SphereGrid, SphericalRegion};
use crate::starset::{Polycone, StarSet};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

#[derive(Clone, Copy, Debug)]
pub struct RecoveryOptions {
    /// Cap on the number of weight evaluations (cells^n for the full
    /// enumeration).
    pub budget: u128,
    /// Number of random polycone tuples used to validate the recovery.
    pub validation_tuples: usize,
    pub seed: u64,
    /// Enumerate only diagonal multi-indices. Sound once the vanishing
    /// property has been verified; the validation residual is the safety
    /// net against a false pass.
    pub diagonal_only: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            budget: 1_000_000,
            validation_tuples: 100,
            seed: 0,
            diagonal_only: false,
        }
    }
}

/// A recovered representing measure with its reconstruction residual.
#[derive(Clone, Debug)]
pub struct RecoveredMeasure {
    pub kernel: KernelFunctional,
    /// Max |evaluate(kernel, tuple) - F(tuple)| over the validation tuples.
    pub residual: f64,
}

/// Indicator star set of one grid cell: st A_k.
fn cell_hull(grid: &Arc<SphereGrid>, k: usize) -> StarSet {
    let region = SphericalRegion::cells(Arc::clone(grid), BTreeSet::from([k]))
        .expect("cell index in range");
    StarSet::polycone(Polycone::star_hull(region).expect("unit level"))
}

/// Recover the representing measure of `f` on `grid` from evaluation
/// access only: weights[k_1, ..., k_n] = F(st A_{k_1}, ..., st A_{k_n}).
pub fn recover_measure(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    options: &RecoveryOptions,
) -> Result<RecoveredMeasure> {
    let n = f.dim();
    if grid.dim() != n {
        return Err(DmvError::DimensionMismatch(format!(
            "functional dim {n} vs grid dim {}",
            grid.dim()
        )));
    }
    let cells = grid.len();
    let required: u128 = if options.diagonal_only {
        cells as u128
    } else {
        (cells as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX)
    };
    if required > options.budget {
        return Err(DmvError::BudgetExceeded {
            cells,
            arity: if options.diagonal_only { 1 } else { n },
            required,
            limit: options.budget,
        });
    }

    let hulls: Vec<StarSet> = (0..cells).map(|k| cell_hull(grid, k)).collect();
    let mut weights: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut record = |idx: Vec<usize>, w: f64| -> Result<()> {
        if w < 0.0 {
            // A negative weight is itself a failed-positivity witness.
            return Err(DmvError::Domain(format!(
                "recovered weight {w} at {idx:?} is negative; the functional is not positive"
            )));
        }
        if w != 0.0 {
            weights.insert(idx, w);
        }
        Ok(())
    };

    if options.diagonal_only {
        for k in 0..cells {
            let tuple: Vec<StarSet> = vec![hulls[k].clone(); n];
            record(vec![k; n], f.evaluate(&tuple)?)?;
        }
    } else {
        let mut index = vec![0usize; n];
        'outer: loop {
            let tuple: Vec<StarSet> = index.iter().map(|&k| hulls[k].clone()).collect();
            record(index.clone(), f.evaluate(&tuple)?)?;
            let mut pos = n;
            loop {
                if pos == 0 {
                    break 'outer;
                }
                pos -= 1;
                index[pos] += 1;
                if index[pos] < cells {
                    break;
                }
                index[pos] = 0;
            }
        }
    }

    let kernel = KernelFunctional::new(Arc::clone(grid), weights)?;
    let mut gen = RandomPolycones::new(grid, options.seed);
    let mut residual = 0.0_f64;
    for _ in 0..options.validation_tuples {
        let tuple = gen.tuple(n);
        let expect = f.evaluate(&tuple)?;
        let got = kernel.evaluate(&tuple)?;
        residual = residual.max((got - expect).abs());
    }
    Ok(RecoveredMeasure { kernel, residual })
}

/// Outcome of the diagonal-concentration test.
#[derive(Clone, Debug)]
pub struct DiagonalityReport {
    pub verdict: Verdict,
    pub off_diagonal_mass: f64,
    pub total_mass: f64,
    /// Projection of the measure onto the sphere (valid as the diagonal
    /// representation exactly when the verdict is a pass).
    pub projected: DiagonalFunctional,
}

/// Mass-relative diagonality: pass iff the weights at non-constant
/// multi-indices total at most tol times the whole mass.
pub fn diagonality_test(measure: &RecoveredMeasure, tol: Option<f64>) -> DiagonalityReport {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let off = measure.kernel.off_diagonal_mass();
    let total = measure.kernel.total_mass();
    let verdict = if off <= tol * total.max(f64::MIN_POSITIVE) || off == 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    DiagonalityReport {
        verdict,
        off_diagonal_mass: off,
        total_mass: total,
        projected: measure.kernel.project_diagonal(),
    }
}

/// Outcome of the constant-density (Haar uniformity) test.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub verdict: Verdict,
    /// Mean density lambda = mean of w_k / sigma(A_k).
    pub lambda: f64,
    /// max density - min density.
    pub spread: f64,
    /// Cell with the largest deviation from the mean, on failure.
    pub worst_cell: Option<usize>,
}

/// Constant-density test for a diagonal measure: rotation invariance can
/// only force a constant multiple of the spherical measure when the grid
/// has a nontrivial symmetry group.
pub fn uniformity_test(diag: &DiagonalFunctional, tol: Option<f64>) -> UniformityReport {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    if diag.grid().symmetries().len() <= 1 {
        return UniformityReport {
            verdict: Verdict::Inconclusive,
            lambda: f64::NAN,
            spread: f64::NAN,
            worst_cell: None,
        };
    }
    let densities = diag.densities();
    let lambda = compensated_sum(densities.iter().copied()) / densities.len() as f64;
    let max = densities.iter().fold(f64::NEG_INFINITY, |m, d| m.max(*d));
    let min = densities.iter().fold(f64::INFINITY, |m, d| m.min(*d));
    let spread = max - min;
    let verdict = if spread <= tol * lambda.abs() || spread == 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let worst_cell = if verdict == Verdict::Fail {
        densities
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                (*a - lambda).abs().partial_cmp(&(*b - lambda).abs()).unwrap()
            })
            .map(|(k, _)| k)
    } else {
        None
    };
    UniformityReport {
        verdict,
        lambda,
        spread,
        worst_cell,
    }
}

/// Ratio statistics of F against the dual mixed volume.
#[derive(Clone, Copy, Debug)]
pub struct ConstantEstimate {
    pub c: f64,
    /// (max ratio - min ratio) / |mean|, 0 when all ratios agree.
    pub spread: f64,
    /// Number of tuples with positive dual mixed volume that entered the
    /// estimate.
    pub samples: usize,
}

/// One entry of the F-against-dmv ratio series.
#[derive(Clone, Copy, Debug)]
pub struct RatioSample {
    pub trial: usize,
    pub f_value: f64,
    pub dmv: f64,
    /// f_value / dmv, None when the dual mixed volume vanishes.
    pub ratio: Option<f64>,
}

/// Per-trial values of F and the dual mixed volume on random grid
/// polycone tuples (the plot-ready series behind `estimate_constant`).
pub fn constant_ratio_series(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
) -> Result<Vec<RatioSample>> {
    let n = f.dim();
    let mut gen = RandomPolycones::new(grid, seed);
    (0..trials)
        .map(|trial| {
            let tuple = gen.tuple(n);
            let dmv = dual_mixed_volume(&tuple)?.value;
            let f_value = f.evaluate(&tuple)?;
            Ok(RatioSample {
                trial,
                f_value,
                dmv,
                ratio: (dmv > 0.0).then(|| f_value / dmv),
            })
        })
        .collect()
}

/// Estimate c with F = c * dmv over random grid polycone tuples, skipping
/// tuples whose dual mixed volume vanishes.
pub fn estimate_constant(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    if trials < 2 {
        return Err(DmvError::InvalidParameter(
            "estimate_constant needs at least 2 trials".into(),
        ));
    }
    let ratios: Vec<f64> = constant_ratio_series(f, grid, trials, seed)?
        .into_iter()
        .filter_map(|s| s.ratio)
        .collect();
    if ratios.is_empty() {
        return Err(DmvError::DegenerateSample(
            "all sampled tuples had zero dual mixed volume".into(),
        ));
    }
    let mean = compensated_sum(ratios.iter().copied()) / ratios.len() as f64;
    let max = ratios.iter().fold(f64::NEG_INFINITY, |m, r| m.max(*r));
    let min = ratios.iter().fold(f64::INFINITY, |m, r| m.min(*r));
    let spread = if max == min {
        0.0
    } else {
        (max - min) / mean.abs()
    };
    Ok(ConstantEstimate {
        c: mean,
        spread,
        samples: ratios.len(),
    })
}

/// Verdict of the full pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Conclusion {
    /// Additive and positive: representable by a measure on the n-fold
    /// product of the sphere.
    GeneralKernel,
    /// Additionally vanishing on disjoint pairs: the measure lives on the
    /// diagonal.
    DiagonalMeasure,
    /// Additionally rotation invariant with constant recovered density:
    /// a constant multiple of the dual mixed volume.
    CTimesDmv { c: f64, spread: f64 },
    /// A hypothesis failed; the witness lives in the named check's report.
    HypothesisViolated { culprit: String },
}

#[derive(Clone, Debug)]
pub struct CharacterizationReport {
    pub conclusion: Conclusion,
    /// All checks completed before (and including) any failure.
    pub checks: Vec<PropertyReport>,
    pub recovered: Option<RecoveredMeasure>,
    pub diagonality: Option<DiagonalityReport>,
    pub uniformity: Option<UniformityReport>,
    pub constant: Option<ConstantEstimate>,
    /// Whether the real-valued variant (monotonicity instead of
    /// positivity) was run.
    pub real_valued_path: bool,
}

impl CharacterizationReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CharacterizeOptions {
    pub trials: usize,
    pub seed: u64,
    /// Residual tolerance for checks and the conclusion; None for the
    /// default exact-path tolerance.
    pub tol: Option<f64>,
    /// Substitute the monotonicity check for positivity (the real-valued
    /// theorem variant).
    pub real_valued: bool,
    pub recovery: RecoveryOptions,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        CharacterizeOptions {
            trials: 200,
            seed: 0,
            tol: None,
            real_valued: false,
            recovery: RecoveryOptions::default(),
        }
    }
}

/// Run the full pipeline: additivity, positivity (or monotonicity),
/// vanishing, rotation invariance; recover the measure at the appropriate
/// granularity; and classify the functional.
///
/// A failed additivity, positivity, or vanishing check short-circuits to
/// `HypothesisViolated` with the failing check's witness, while a failed
/// rotation check still concludes `DiagonalMeasure`, which is itself a
/// complete description of that case. Completed checks are always
/// reported.
pub fn characterize(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    options: &CharacterizeOptions,
) -> Result<CharacterizationReport> {
    let tol = options.tol;
    let mut checks = Vec::new();
    let report = |checks: Vec<PropertyReport>, conclusion: Conclusion| CharacterizationReport {
        conclusion,
        checks,
        recovered: None,
        diagonality: None,
        uniformity: None,
        constant: None,
        real_valued_path: options.real_valued,
    };

    let additive = check_additive(f, grid, options.trials, options.seed, tol)?;
    let additive_ok = additive.passed();
    checks.push(additive);
    if !additive_ok {
        return Ok(report(checks, Conclusion::HypothesisViolated {
            culprit: "additive".into(),
        }));
    }

    let (order_name, order_check) = if options.real_valued {
        (
            "increasing",
            check_increasing(f, grid, options.trials, options.seed, tol)?,
        )
    } else {
        (
            "positive",
            check_positive(f, grid, options.trials, options.seed, tol)?,
        )
    };
    let order_ok = order_check.passed();
    checks.push(order_check);
    if !order_ok {
        return Ok(report(checks, Conclusion::HypothesisViolated {
            culprit: order_name.into(),
        }));
    }

    let vanishing = check_vanishing(f, grid, options.trials, options.seed, tol)?;
    let vanishing_verdict = vanishing.verdict;
    checks.push(vanishing);

    // Recovery granularity per the verified properties: a verified
    // vanishing property licenses the diagonal-only enumeration.
    let mut recovery = options.recovery;
    recovery.diagonal_only = vanishing_verdict == Verdict::Pass;
    let recovered = recover_measure(f, grid, &recovery)?;
    let diagonality = diagonality_test(&recovered, tol);

    match vanishing_verdict {
        Verdict::Fail => {
            return Ok(CharacterizationReport {
                conclusion: Conclusion::HypothesisViolated {
                    culprit: "vanishing".into(),
                },
                checks,
                recovered: Some(recovered),
                diagonality: Some(diagonality),
                uniformity: None,
                constant: None,
                real_valued_path: options.real_valued,
            });
        }
        Verdict::Inconclusive => {
            return Ok(CharacterizationReport {
                conclusion: Conclusion::GeneralKernel,
                checks,
                recovered: Some(recovered),
                diagonality: Some(diagonality),
                uniformity: None,
                constant: None,
                real_valued_path: options.real_valued,
            });
        }
        Verdict::Pass => {}
    }

    let rotation = check_rotation_invariant(f, grid, options.trials, options.seed, tol)?;
    let rotation_ok = rotation.verdict == Verdict::Pass;
    checks.push(rotation);

    let uniformity = uniformity_test(&diagonality.projected, tol);
    if !rotation_ok || uniformity.verdict != Verdict::Pass {
        return Ok(CharacterizationReport {
            conclusion: Conclusion::DiagonalMeasure,
            checks,
            recovered: Some(recovered),
            diagonality: Some(diagonality),
            uniformity: Some(uniformity),
            constant: None,
            real_valued_path: options.real_valued,
        });
    }

    let constant = estimate_constant(f, grid, options.trials.max(2), options.seed)?;
    let conclusion_tol = tol.unwrap_or(DEFAULT_TOL);
    let conclusion = if constant.spread <= conclusion_tol {
        Conclusion::CTimesDmv {
            c: constant.c,
            spread: constant.spread,
        }
    } else {
        Conclusion::DiagonalMeasure
    };
    Ok(CharacterizationReport {
        conclusion,
        checks,
        recovered: Some(recovered),
        diagonality: Some(diagonality),
        uniformity: Some(uniformity),
        constant: Some(constant),
        real_valued_path: options.real_valued,
    })
}

/// Diagnostics of the set function mu(A) = F(st A, ..., st A).
#[derive(Clone, Debug)]
pub struct ValuationReport {
    /// Max residual of mu(A u B) + mu(A n B) = mu(A) + mu(B).
    pub valuation_max_residual: f64,
    pub valuation_pass: bool,
    /// mu of the empty region.
    pub zero_region_value: f64,
    /// Max residual of mu(phi A) = mu(A) over grid symmetries.
    pub rotation_max_residual: f64,
    pub rotation_pass: bool,
    /// Mean density mu(A)/sigma(A) and its relative spread.
    pub lambda: f64,
    pub proportionality_spread: f64,
    pub proportionality_pass: bool,
    /// Constant from the ratio estimate and the residual of
    /// F(L, ..., L) = c H^n(L) over random polycones.
    pub constant: f64,
    pub constant_spread: f64,
    pub volume_identity_max_residual: f64,
    pub volume_identity_pass: bool,
    /// |c - n * lambda|: the two normalizations must agree.
    pub lambda_consistency_residual: f64,
    /// Max residual of F(C_1, ..., C_n) = (prod alpha / min alpha^n)
    /// F(L, ..., L) with L the intersection of the cones.
    pub cone_identity_max_residual: f64,
    pub cone_identity_pass: bool,
}

/// Run the valuation diagnostics for a functional assumed additive.
pub fn valuation_pipeline(
    f: &dyn StarFunctional,
    grid: &Arc<SphereGrid>,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
) -> Result<ValuationReport> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let n = f.dim();
    if grid.dim() != n {
        return Err(DmvError::DimensionMismatch(format!(
            "functional dim {n} vs grid dim {}",
            grid.dim()
        )));
    }
    let mu = |cells: &BTreeSet<usize>| -> Result<f64> {
        let region = SphericalRegion::cells(Arc::clone(grid), cells.clone())?;
        let hull = StarSet::polycone(Polycone::star_hull(region)?);
        f.evaluate(&vec![hull; n])
    };

    let mut gen = RandomPolycones::new(grid, seed);
    let cells = grid.len();
    let random_cells = |gen: &mut RandomPolycones| -> BTreeSet<usize> {
        let count = gen.rng().random_range(1..=cells.div_ceil(2));
        rand::seq::index::sample(gen.rng(), cells, count)
            .iter()
            .collect()
    };

    // (a) valuation identity on random region pairs.
    let mut valuation_max = 0.0_f64;
    for _ in 0..trials {
        let a = random_cells(&mut gen);
        let b = random_cells(&mut gen);
        let union: BTreeSet<usize> = a.union(&b).copied().collect();
        let inter: BTreeSet<usize> = a.intersection(&b).copied().collect();
        let lhs = mu(&union)? + mu(&inter)?;
        let rhs = mu(&a)? + mu(&b)?;
        let residual = (lhs - rhs).abs() / residual_scale(&[lhs, rhs]);
        valuation_max = valuation_max.max(residual);
    }

    // (b) the empty region.
    let zero_region_value = mu(&BTreeSet::new())?;

    // (c) rotation invariance of mu under grid symmetries.
    let mut rotation_max = 0.0_f64;
    for _ in 0..trials.min(25) {
        let a = random_cells(&mut gen);
        let base = mu(&a)?;
        for sym in grid.symmetries().iter().skip(1) {
            let image: BTreeSet<usize> = a.iter().map(|&k| sym.permutation[k]).collect();
            let rotated = mu(&image)?;
            rotation_max =
                rotation_max.max((rotated - base).abs() / residual_scale(&[base, rotated]));
        }
    }

    // (d) proportionality mu(A) = lambda sigma(A).
    let mut densities = Vec::new();
    for _ in 0..trials {
        let a = random_cells(&mut gen);
        let region = SphericalRegion::cells(Arc::clone(grid), a.clone())?;
        let sigma = region.measure()?;
        if sigma > 0.0 {
            densities.push(mu(&a)? / sigma);
        }
    }
    if densities.is_empty() {
        return Err(DmvError::DegenerateSample(
            "no nonempty regions sampled".into(),
        ));
    }
    let lambda = compensated_sum(densities.iter().copied()) / densities.len() as f64;
    let dmax = densities.iter().fold(f64::NEG_INFINITY, |m, d| m.max(*d));
    let dmin = densities.iter().fold(f64::INFINITY, |m, d| m.min(*d));
    let proportionality_spread = if dmax == dmin {
        0.0
    } else {
        (dmax - dmin) / lambda.abs().max(f64::MIN_POSITIVE)
    };

    // (e) F(L, ..., L) = c H^n(L) with c from the ratio estimate.
    let constant = estimate_constant(f, grid, trials.max(2), seed)?;
    let mut volume_max = 0.0_f64;
    for _ in 0..trials {
        let body = gen.starset();
        let lhs = f.evaluate(&vec![body.clone(); n])?;
        let rhs = constant.c * volume(&body)?.value;
        volume_max = volume_max.max((lhs - rhs).abs() / residual_scale(&[lhs, rhs]));
    }
    let lambda_consistency_residual = (constant.c - n as f64 * lambda).abs();

    // (f) the cone identity for F itself: random cones over bases with a
    // guaranteed common core.
    let mut cone_max = 0.0_f64;
    for _ in 0..trials {
        let core = random_cells(&mut gen);
        let mut cones = Vec::with_capacity(n);
        let mut levels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut base = core.clone();
            base.extend(random_cells(&mut gen));
            let level = gen.rng().random_range(0.25..4.0);
            levels.push(level);
            let region = SphericalRegion::cells(Arc::clone(grid), base)?;
            cones.push(Polycone::cone(level, region)?);
        }
        let bodies: Vec<StarSet> = cones
            .iter()
            .map(|c| StarSet::polycone(c.clone()))
            .collect();
        let lhs = f.evaluate(&bodies)?;
        let min_level = levels.iter().fold(f64::INFINITY, |m, &l| m.min(l));
        let ratio: f64 = levels.iter().product::<f64>() / min_level.powi(n as i32);
        let intersection = StarSet::polycone(Polycone::intersect(&cones)?);
        let rhs = ratio * f.evaluate(&vec![intersection; n])?;
        cone_max = cone_max.max((lhs - rhs).abs() / residual_scale(&[lhs, rhs]));
    }

    Ok(ValuationReport {
        valuation_max_residual: valuation_max,
        valuation_pass: valuation_max <= tol,
        zero_region_value,
        rotation_max_residual: rotation_max,
        rotation_pass: rotation_max <= tol,
        lambda,
        proportionality_spread,
        proportionality_pass: proportionality_spread <= tol,
        constant: constant.c,
        constant_spread: constant.spread,
        volume_identity_max_residual: volume_max,
        volume_identity_pass: volume_max <= tol,
        lambda_consistency_residual,
        cone_identity_max_residual: cone_max,
        cone_identity_pass: cone_max <= tol,
    })
}
