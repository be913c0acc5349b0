//! The counterexample gallery: three functionals that each satisfy all but
//! one of the characterization hypotheses.
//!
//! - `intersection-volume`: the volume of the intersection of the bodies.
//!   Rotation invariant and vanishing, not additive.
//! - `product-of-integrals`: the product of the radial-function integrals.
//!   Additive and rotation invariant, does not vanish on disjoint bodies.
//! - `weighted-by-M`: the radial-product integral weighted by the radial
//!   function of a fixed non-ball star body M. Additive and vanishing, not
//!   rotation invariant.

use super::BlackBoxFunctional;
use crate::dmv::radial_integral;
use crate::error::{DmvError, Result};
use crate::starset::{radial_min, StarSet};
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GalleryName {
    IntersectionVolume,
    ProductOfIntegrals,
    WeightedByM,
}

impl FromStr for GalleryName {
    type Err = DmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersection-volume" => Ok(GalleryName::IntersectionVolume),
            "product-of-integrals" => Ok(GalleryName::ProductOfIntegrals),
            "weighted-by-M" | "weighted-by-m" => Ok(GalleryName::WeightedByM),
            other => Err(DmvError::InvalidParameter(format!(
                "unknown gallery functional `{other}`; expected intersection-volume, \
                 product-of-integrals, or weighted-by-M"
            ))),
        }
    }
}

/// H^n of the intersection of the bodies, via the pointwise minimum of the
/// radial functions.
pub fn gallery_intersection_volume(dim: usize) -> Result<BlackBoxFunctional> {
    BlackBoxFunctional::new(
        dim,
        "intersection-volume",
        Arc::new(|bodies: &[StarSet]| {
            Ok(crate::dmv::volume(&radial_min(bodies)?)?.value)
        }),
    )
}

/// The product over slots of the integral of the radial function.
pub fn gallery_product_of_integrals(dim: usize) -> Result<BlackBoxFunctional> {
    BlackBoxFunctional::new(
        dim,
        "product-of-integrals",
        Arc::new(|bodies: &[StarSet]| {
            let mut product = 1.0;
            for b in bodies {
                product *= radial_integral(b)?;
            }
            Ok(product)
        }),
    )
}

/// The integral of the product of the radial functions weighted by rho_M.
/// M must not be a ball centered at the origin, otherwise the functional
/// would be rotation invariant.
pub fn gallery_weighted_by_m(m_body: StarSet) -> Result<BlackBoxFunctional> {
    if m_body.constant_value().is_some() {
        return Err(DmvError::InvalidParameter(
            "weighted-by-M requires a star body that is not a centered ball; \
             a constant radial function was given"
                .into(),
        ));
    }
    let dim = m_body.dim();
    BlackBoxFunctional::new(
        dim,
        "weighted-by-M",
        Arc::new(move |bodies: &[StarSet]| {
            let mut with_m: Vec<StarSet> = bodies.to_vec();
            with_m.push(m_body.clone());
            crate::dmv::product_integral(&with_m)
        }),
    )
}

/// Gallery dispatch; `m_body` is consumed by the weighted variant only.
pub fn gallery(name: GalleryName, dim: usize, m_body: Option<StarSet>) -> Result<BlackBoxFunctional> {
    match name {
        GalleryName::IntersectionVolume => gallery_intersection_volume(dim),
        GalleryName::ProductOfIntegrals => gallery_product_of_integrals(dim),
        GalleryName::WeightedByM => {
            let m = m_body.ok_or_else(|| {
                DmvError::InvalidParameter(
                    "weighted-by-M needs the fixed star body M".into(),
                )
            })?;
            if m.dim() != dim {
                return Err(DmvError::DimensionMismatch(format!(
                    "M has dim {}, requested dim {dim}",
                    m.dim()
                )));
            }
            gallery_weighted_by_m(m)
        }
    }
}
