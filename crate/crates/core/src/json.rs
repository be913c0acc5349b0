//! JSON descriptors for regions, grids, star sets, and functionals, plus
//! report serialization.
//!
//! Descriptor vocabulary:
//! - region: `{"type":"full"}`, `{"type":"arc","start":s,"end":e}`,
//!   `{"type":"arcs","spans":[[s,e],...]}` (canonical multi-arc bases),
//!   `{"type":"cap","center":[...],"radius":r}`,
//!   `{"type":"cells","grid":"<id>","indices":[...]}`.
//! - grid: `{"dim":2,"m":360}` or `{"dim":3,"bands":B,"sectors":S}`.
//! - star set: `{"dim":n,"rho":{"type":"simple","terms":[{"alpha":a,"base":<region>},...]}}`
//!   or `{"dim":n,"rho":{"type":"grid","grid":"<id>","values":[...]}}`.
//! - kernel functional: `{"grid":<id|grid>,"entries":[{"idx":[k1,...,kn],"w":w},...]}`;
//!   diagonal functional: `{"grid":<id|grid>,"weights":[...]}`.
//!
//! Cell-set references are resolved against a `GridRegistry`; grids are
//! keyed by their canonical ids.

use crate::characterize::{
    CharacterizationReport, Conclusion, ConstantEstimate, DiagonalityReport, RecoveredMeasure,
    UniformityReport, ValuationReport,
};
use crate::error::{DmvError, Result};
use crate::functionals::{
    DiagonalFunctional, KernelFunctional, PropertyReport, Verdict, Witness,
};
use crate::sphere::{Direction, GridSpec, SphereGrid, SphericalRegion};
use crate::starset::{Polycone, RadialFunction, StarSet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Grids available for resolving `"grid":"<id>"` references.
#[derive(Default)]
pub struct GridRegistry {
    grids: BTreeMap<String, Arc<SphereGrid>>,
}

impl GridRegistry {
    pub fn new() -> Self {
        GridRegistry::default()
    }

    pub fn insert(&mut self, grid: Arc<SphereGrid>) {
        self.grids.insert(grid.id().to_string(), grid);
    }

    pub fn get(&self, id: &str) -> Result<Arc<SphereGrid>> {
        self.grids.get(id).cloned().ok_or_else(|| {
            DmvError::descriptor("grid", format!("unknown grid id `{id}`"))
        })
    }

    pub fn register_spec(&mut self, spec: &GridSpec) -> Result<Arc<SphereGrid>> {
        let grid = SphereGrid::from_spec(spec)?;
        self.insert(Arc::clone(&grid));
        Ok(grid)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RegionSchema {
    Full,
    Arc {
        start: f64,
        end: f64,
    },
    Arcs {
        spans: Vec<(f64, f64)>,
    },
    Cap {
        center: Vec<f64>,
        radius: f64,
    },
    Cells {
        grid: String,
        indices: Vec<usize>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GridSchema {
    Circle { dim: usize, m: usize },
    LatLon { dim: usize, bands: usize, sectors: usize },
}

impl GridSchema {
    pub fn to_spec(&self) -> Result<GridSpec> {
        match *self {
            GridSchema::Circle { dim, m } => {
                if dim != 2 {
                    return Err(DmvError::descriptor(
                        "dim",
                        format!("a grid with `m` segments needs dim 2, got {dim}"),
                    ));
                }
                Ok(GridSpec::Circle { segments: m })
            }
            GridSchema::LatLon { dim, bands, sectors } => {
                if dim != 3 {
                    return Err(DmvError::descriptor(
                        "dim",
                        format!("a band/sector grid needs dim 3, got {dim}"),
                    ));
                }
                Ok(GridSpec::LatLon { bands, sectors })
            }
        }
    }

    pub fn from_spec(spec: &GridSpec) -> GridSchema {
        match *spec {
            GridSpec::Circle { segments } => GridSchema::Circle { dim: 2, m: segments },
            GridSpec::LatLon { bands, sectors } => GridSchema::LatLon {
                dim: 3,
                bands,
                sectors,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermSchema {
    pub alpha: f64,
    pub base: RegionSchema,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum RhoSchema {
    #[serde(rename = "simple")]
    Simple { terms: Vec<TermSchema> },
    #[serde(rename = "grid")]
    Grid { grid: String, values: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarSetSchema {
    pub dim: usize,
    pub rho: RhoSchema,
}

/// A grid reference: either a registered id or an inline descriptor.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridRef {
    Id(String),
    Inline(GridSchema),
}

impl GridRef {
    pub fn resolve(&self, registry: &mut GridRegistry) -> Result<Arc<SphereGrid>> {
        match self {
            GridRef::Id(id) => registry.get(id),
            GridRef::Inline(schema) => registry.register_spec(&schema.to_spec()?),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct KernelEntrySchema {
    pub idx: Vec<usize>,
    pub w: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct KernelSchema {
    pub grid: GridRef,
    pub entries: Vec<KernelEntrySchema>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct DiagonalSchema {
    pub grid: GridRef,
    pub weights: Vec<f64>,
}

/// Kernel and diagonal files are distinguished by their payload field.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum FunctionalSchema {
    Kernel(KernelSchema),
    Diagonal(DiagonalSchema),
}

/// A bodies file: either a bare array of star sets or an object with a
/// grid table and the bodies.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum BodiesFileSchema {
    Bare(Vec<StarSetSchema>),
    WithGrids {
        #[serde(default)]
        grids: BTreeMap<String, GridSchema>,
        bodies: Vec<StarSetSchema>,
    },
}

pub fn resolve_region(
    schema: &RegionSchema,
    dim: usize,
    registry: &GridRegistry,
) -> Result<SphericalRegion> {
    match schema {
        RegionSchema::Full => SphericalRegion::full(dim),
        RegionSchema::Arc { start, end } => {
            if dim != 2 {
                return Err(DmvError::descriptor("base", "arcs require dim 2"));
            }
            SphericalRegion::arc(*start, *end)
        }
        RegionSchema::Arcs { spans } => {
            if dim != 2 {
                return Err(DmvError::descriptor("base", "arcs require dim 2"));
            }
            SphericalRegion::arcs(spans.clone())
        }
        RegionSchema::Cap { center, radius } => {
            if center.len() != dim {
                return Err(DmvError::descriptor(
                    "center",
                    format!("center has {} coordinates, body dim is {dim}", center.len()),
                ));
            }
            SphericalRegion::cap(Direction::new(center.clone())?, *radius)
        }
        RegionSchema::Cells { grid, indices } => {
            let grid = registry.get(grid)?;
            if grid.dim() != dim {
                return Err(DmvError::descriptor(
                    "grid",
                    format!("grid {} has dim {}, body dim is {dim}", grid.id(), grid.dim()),
                ));
            }
            SphericalRegion::cells(grid, indices.iter().copied().collect())
        }
    }
}

pub fn describe_region(region: &SphericalRegion) -> RegionSchema {
    match region {
        SphericalRegion::Full { .. } => RegionSchema::Full,
        SphericalRegion::Arc { start, end } => RegionSchema::Arc {
            start: *start,
            end: *end,
        },
        SphericalRegion::Arcs { spans } => RegionSchema::Arcs {
            spans: spans.clone(),
        },
        SphericalRegion::Cap { center, radius } => RegionSchema::Cap {
            center: center.coords().to_vec(),
            radius: *radius,
        },
        SphericalRegion::Cells { grid, indices } => RegionSchema::Cells {
            grid: grid.id().to_string(),
            indices: indices.iter().copied().collect(),
        },
    }
}

pub fn resolve_starset(schema: &StarSetSchema, registry: &GridRegistry) -> Result<StarSet> {
    match &schema.rho {
        RhoSchema::Simple { terms } => {
            let resolved = terms
                .iter()
                .map(|t| Ok((t.alpha, resolve_region(&t.base, schema.dim, registry)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(StarSet::polycone(Polycone::from_terms(schema.dim, resolved)?))
        }
        RhoSchema::Grid { grid, values } => {
            let grid = registry.get(grid)?;
            if grid.dim() != schema.dim {
                return Err(DmvError::descriptor(
                    "dim",
                    format!(
                        "grid {} has dim {}, star set declares {}",
                        grid.id(),
                        grid.dim(),
                        schema.dim
                    ),
                ));
            }
            StarSet::grid_sampled(grid, values.clone())
        }
    }
}

pub fn describe_starset(body: &StarSet) -> Result<StarSetSchema> {
    let rho = match body.rho() {
        RadialFunction::Simple(p) => RhoSchema::Simple {
            terms: p
                .terms()
                .iter()
                .map(|(alpha, base)| TermSchema {
                    alpha: *alpha,
                    base: describe_region(base),
                })
                .collect(),
        },
        RadialFunction::GridSampled { grid, values } => RhoSchema::Grid {
            grid: grid.id().to_string(),
            values: values.clone(),
        },
        RadialFunction::Sampler(_) => {
            return Err(DmvError::InvalidParameter(
                "sampler-backed bodies have no JSON descriptor".into(),
            ))
        }
    };
    Ok(StarSetSchema {
        dim: body.dim(),
        rho,
    })
}

/// Parse a bodies file, registering any grids it declares.
pub fn parse_bodies(value: &Value, registry: &mut GridRegistry) -> Result<Vec<StarSet>> {
    let schema: BodiesFileSchema = serde_json::from_value(value.clone())
        .map_err(|e| DmvError::descriptor("bodies", e.to_string()))?;
    let bodies = match schema {
        BodiesFileSchema::Bare(bodies) => bodies,
        BodiesFileSchema::WithGrids { grids, bodies } => {
            for (id, g) in &grids {
                let grid = registry.register_spec(&g.to_spec()?)?;
                if grid.id() != id {
                    return Err(DmvError::descriptor(
                        "grids",
                        format!("grid declared as `{id}` has canonical id `{}`", grid.id()),
                    ));
                }
            }
            bodies
        }
    };
    bodies
        .iter()
        .map(|b| resolve_starset(b, registry))
        .collect()
}

/// The parsed form of a functional file.
#[derive(Debug)]
pub enum ParsedFunctional {
    Kernel(KernelFunctional),
    Diagonal(DiagonalFunctional),
}

pub fn parse_functional(value: &Value, registry: &mut GridRegistry) -> Result<ParsedFunctional> {
    let schema: FunctionalSchema = serde_json::from_value(value.clone())
        .map_err(|e| DmvError::descriptor("functional", e.to_string()))?;
    match schema {
        FunctionalSchema::Kernel(k) => {
            let grid = k.grid.resolve(registry)?;
            let mut weights = BTreeMap::new();
            for e in k.entries {
                if weights.insert(e.idx.clone(), e.w).is_some() {
                    return Err(DmvError::descriptor(
                        "entries",
                        format!("duplicate multi-index {:?}", e.idx),
                    ));
                }
            }
            Ok(ParsedFunctional::Kernel(KernelFunctional::new(grid, weights)?))
        }
        FunctionalSchema::Diagonal(d) => {
            let grid = d.grid.resolve(registry)?;
            Ok(ParsedFunctional::Diagonal(DiagonalFunctional::new(
                grid, d.weights,
            )?))
        }
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn witness_to_json(w: &Witness) -> Result<Value> {
    let bodies = w
        .bodies
        .iter()
        .map(|b| Ok(serde_json::to_value(describe_starset(b)?).unwrap()))
        .collect::<Result<Vec<_>>>()?;
    let extra = w
        .extra_bodies
        .iter()
        .map(|b| Ok(serde_json::to_value(describe_starset(b)?).unwrap()))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "slot": w.slot,
        "bodies": bodies,
        "extra_bodies": extra,
        "values": w.values,
        "residual": w.residual,
        "detail": w.detail,
    }))
}

pub fn property_report_to_json(r: &PropertyReport) -> Result<Value> {
    let witness = match &r.witness {
        Some(w) => witness_to_json(w)?,
        None => Value::Null,
    };
    Ok(json!({
        "property": r.property,
        "verdict": verdict_str(r.verdict),
        "trials": r.trials,
        "max_residual": r.max_residual,
        "witness": witness,
    }))
}

pub fn kernel_to_json(k: &KernelFunctional) -> Value {
    let entries: Vec<Value> = k
        .weights()
        .iter()
        .map(|(idx, w)| json!({"idx": idx, "w": w}))
        .collect();
    json!({
        "grid": k.grid().id(),
        "entries": entries,
    })
}

pub fn diagonal_to_json(d: &DiagonalFunctional) -> Value {
    json!({
        "grid": d.grid().id(),
        "weights": d.weights(),
    })
}

pub fn recovered_to_json(m: &RecoveredMeasure) -> Value {
    let mut obj = kernel_to_json(&m.kernel);
    obj.as_object_mut()
        .unwrap()
        .insert("residual".into(), json!(m.residual));
    obj
}

pub fn diagonality_to_json(d: &DiagonalityReport) -> Value {
    json!({
        "verdict": verdict_str(d.verdict),
        "off_diagonal_mass": d.off_diagonal_mass,
        "total_mass": d.total_mass,
        "projected": diagonal_to_json(&d.projected),
    })
}

pub fn uniformity_to_json(u: &UniformityReport) -> Value {
    json!({
        "verdict": verdict_str(u.verdict),
        "lambda": float_or_null(u.lambda),
        "spread": float_or_null(u.spread),
        "worst_cell": u.worst_cell,
    })
}

fn float_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn constant_to_json(c: &ConstantEstimate) -> Value {
    json!({
        "c": c.c,
        "spread": c.spread,
        "samples": c.samples,
    })
}

pub fn conclusion_to_json(c: &Conclusion) -> Value {
    match c {
        Conclusion::GeneralKernel => json!({"kind": "general-kernel"}),
        Conclusion::DiagonalMeasure => json!({"kind": "diagonal-measure"}),
        Conclusion::CTimesDmv { c, spread } => {
            json!({"kind": "c-times-dmv", "c": c, "spread": spread})
        }
        Conclusion::HypothesisViolated { culprit } => {
            json!({"kind": "hypothesis-violated", "culprit": culprit})
        }
    }
}

pub fn characterization_to_json(r: &CharacterizationReport) -> Result<Value> {
    let checks = r
        .checks
        .iter()
        .map(property_report_to_json)
        .collect::<Result<Vec<_>>>()?;
    let mut obj = Map::new();
    obj.insert("conclusion".into(), conclusion_to_json(&r.conclusion));
    obj.insert("checks".into(), Value::Array(checks));
    obj.insert(
        "recovered".into(),
        r.recovered.as_ref().map(recovered_to_json).unwrap_or(Value::Null),
    );
    obj.insert(
        "diagonality".into(),
        r.diagonality
            .as_ref()
            .map(diagonality_to_json)
            .unwrap_or(Value::Null),
    );
    obj.insert(
        "uniformity".into(),
        r.uniformity
            .as_ref()
            .map(uniformity_to_json)
            .unwrap_or(Value::Null),
    );
    obj.insert(
        "constant".into(),
        r.constant.as_ref().map(constant_to_json).unwrap_or(Value::Null),
    );
    obj.insert("real_valued_path".into(), json!(r.real_valued_path));
    Ok(Value::Object(obj))
}

pub fn valuation_to_json(r: &ValuationReport) -> Value {
    json!({
        "valuation": {
            "max_residual": r.valuation_max_residual,
            "pass": r.valuation_pass,
        },
        "zero_region_value": r.zero_region_value,
        "rotation": {
            "max_residual": r.rotation_max_residual,
            "pass": r.rotation_pass,
        },
        "proportionality": {
            "lambda": r.lambda,
            "spread": r.proportionality_spread,
            "pass": r.proportionality_pass,
        },
        "volume_identity": {
            "constant": r.constant,
            "constant_spread": r.constant_spread,
            "max_residual": r.volume_identity_max_residual,
            "pass": r.volume_identity_pass,
            "lambda_consistency_residual": r.lambda_consistency_residual,
        },
        "cone_identity": {
            "max_residual": r.cone_identity_max_residual,
            "pass": r.cone_identity_pass,
        },
    })
}
