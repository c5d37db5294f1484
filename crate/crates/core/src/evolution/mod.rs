//! Real-coded search over `(xi, q, sigma)`: population handling, variation
//! operators, the two clusterers and both survival schemes.

mod hierarchical;
mod kmeans;
mod operators;
mod selection;

pub use hierarchical::{hierarchical_cluster, Linkage};
pub use kmeans::{kmeans_cosine, ClusterSet};
pub use operators::{
    generate_offspring, polynomial_mutation, sbx_children, sbx_crossover, tournament_offspring,
};
pub use selection::{
    assign_fitness, crowding_distance, environmental_selection, fast_nondominated_sort,
    nsga2_select, rank_and_crowding, scalar_fitness,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compression::{CompressionParams, QBits};
use crate::error::{Error, Result};
use crate::metrics::ObjectiveVector;

pub const XI: usize = 0;
pub const Q: usize = 1;
pub const SIGMA: usize = 2;

/// Largest double strictly below one; the `q` gene lives in `[0, 1)`.
pub const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for GeneBounds {
    fn default() -> Self {
        Self {
            lower: [0.0, 0.0, 0.1],
            upper: [1.0, BELOW_ONE, 12.0],
        }
    }
}

impl GeneBounds {
    pub fn clamp(&self, genes: &mut [f64; 3]) {
        for k in 0..3 {
            genes[k] = genes[k].clamp(self.lower[k], self.upper[k]);
        }
    }

    pub fn contains(&self, genes: &[f64; 3]) -> bool {
        (0..3).all(|k| genes[k] >= self.lower[k] && genes[k] <= self.upper[k])
    }
}

/// Variation and initialization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub bounds: GeneBounds,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    pub mutation_prob: f64,
    pub mutation_eta: f64,
    pub xi_init_mean: f64,
    pub xi_init_std: f64,
    pub sigma_init_mean: f64,
    pub sigma_init_std: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            bounds: GeneBounds::default(),
            crossover_prob: 0.9,
            crossover_eta: 2.0,
            mutation_prob: 0.1,
            mutation_eta: 20.0,
            xi_init_mean: 0.3,
            xi_init_std: 0.1,
            sigma_init_mean: 6.0,
            sigma_init_std: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub id: u64,
    /// `[xi, q, sigma]` carriers; see [`decode`].
    pub genes: [f64; 3],
    pub objectives: Option<ObjectiveVector>,
    pub fitness: Option<f64>,
}

impl Solution {
    pub fn new(id: u64, genes: [f64; 3]) -> Self {
        Self {
            id,
            genes,
            objectives: None,
            fitness: None,
        }
    }

    pub fn objective_array(&self) -> Result<[f64; 3]> {
        self.objectives
            .map(ObjectiveVector::to_array)
            .ok_or_else(|| Error::Internal(format!("solution {} is not evaluated", self.id)))
    }
}

/// Hands out unique solution ids.
#[derive(Debug, Clone, Default)]
pub struct IdSource {
    next: u64,
}

impl IdSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Solution>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Gaussian initialization: `xi ~ N(0.3, 0.1^2)`, `sigma ~ N(6, 2.5^2)`
/// (clamped to bounds), `q ~ U[0, 1)`.
pub fn init_population<R: Rng + ?Sized>(
    n: usize,
    params: &EvolutionParams,
    rng: &mut R,
    ids: &mut IdSource,
) -> Result<Population> {
    if n < 2 {
        return Err(Error::Input(format!("population size must be >= 2, got {n}")));
    }
    let xi = Normal::new(params.xi_init_mean, params.xi_init_std)
        .map_err(|e| Error::Config(format!("xi initialization: {e}")))?;
    let sigma = Normal::new(params.sigma_init_mean, params.sigma_init_std)
        .map_err(|e| Error::Config(format!("sigma initialization: {e}")))?;
    let members = (0..n)
        .map(|_| {
            let mut genes = [xi.sample(rng), rng.random::<f64>(), sigma.sample(rng)];
            params.bounds.clamp(&mut genes);
            Solution::new(ids.next_id(), genes)
        })
        .collect();
    Ok(Population {
        members,
        generation: 0,
    })
}

/// Maps genes to operator parameters. The `q` carrier selects 32, 16 or 8
/// bits on the thirds of `[0, 1)`.
pub fn decode(solution: &Solution, clip_z: f64) -> CompressionParams {
    let g = solution.genes;
    let q_bits = if g[Q] < 1.0 / 3.0 {
        QBits::B32
    } else if g[Q] < 2.0 / 3.0 {
        QBits::B16
    } else {
        QBits::B8
    };
    CompressionParams {
        xi: g[XI],
        q_bits,
        sigma: g[SIGMA],
        clip_z,
    }
}
