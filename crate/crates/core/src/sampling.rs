//! Reproducible random inputs for property checkers and tests.
//!
//! The polycone generator picks 1-4 grid cells per body uniformly (without
//! replacement) and gives each its own level, log-uniform in [1/4, 4]. All
//! draws come from a ChaCha8 stream seeded explicitly, so any reported
//! failure is reproducible from its seed.

use crate::sphere::{SphereGrid, SphericalRegion};
use crate::starset::{Polycone, StarSet};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

pub struct RandomPolycones {
    grid: Arc<SphereGrid>,
    rng: ChaCha8Rng,
}

impl RandomPolycones {
    pub fn new(grid: &Arc<SphereGrid>, seed: u64) -> Self {
        RandomPolycones {
            grid: Arc::clone(grid),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    fn level(&mut self) -> f64 {
        let ln_lo = 0.25_f64.ln();
        let ln_hi = 4.0_f64.ln();
        self.rng.random_range(ln_lo..ln_hi).exp()
    }

    /// A polycone over 1-4 random cells, one log-uniform level per cell.
    pub fn polycone(&mut self) -> Polycone {
        let k = self.rng.random_range(1..=4usize).min(self.grid.len());
        let cells = sample(&mut self.rng, self.grid.len(), k);
        let terms = cells
            .iter()
            .map(|c| {
                let region = SphericalRegion::cells(
                    Arc::clone(&self.grid),
                    [c].into_iter().collect(),
                )
                .expect("cell index in range");
                (self.level(), region)
            })
            .collect();
        Polycone::from_terms(self.grid.dim(), terms).expect("canonicalizable terms")
    }

    pub fn starset(&mut self) -> StarSet {
        StarSet::polycone(self.polycone())
    }

    /// A tuple of `n` independent random polycone bodies.
    pub fn tuple(&mut self, n: usize) -> Vec<StarSet> {
        (0..n).map(|_| self.starset()).collect()
    }

    /// Two cones over disjoint random cell sets (vanishing-property probes).
    pub fn disjoint_pair(&mut self) -> (StarSet, StarSet) {
        let total = self.grid.len();
        let take = (total / 2).clamp(1, 4);
        let picked = sample(&mut self.rng, total, 2 * take);
        let (a_cells, b_cells): (BTreeSet<usize>, BTreeSet<usize>) = (
            picked.iter().take(take).collect(),
            picked.iter().skip(take).collect(),
        );
        let (la, lb) = (self.level(), self.level());
        let grid = Arc::clone(&self.grid);
        let make = move |cells: BTreeSet<usize>, level: f64| {
            let region = SphericalRegion::cells(Arc::clone(&grid), cells)
                .expect("cell index in range");
            StarSet::polycone(Polycone::cone(level, region).expect("level > 0"))
        };
        (make(a_cells, la), make(b_cells, lb))
    }

    /// A nested pair rho_L <= rho_M, built as M = L + extra.
    pub fn nested_pair(&mut self) -> (StarSet, StarSet) {
        let small = self.starset();
        let extra = self.starset();
        let big = crate::starset::radial_sum(&[small.clone(), extra])
            .expect("same-grid polycones are summable");
        (small, big)
    }

    /// A signed function on the grid cells, values uniform in [-4, 4].
    pub fn signed_grid_function(&mut self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|_| self.rng.random_range(-4.0..4.0))
            .collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
