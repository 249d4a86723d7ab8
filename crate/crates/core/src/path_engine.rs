//! Discretized Brownian paths on `[0, 1]`.
//!
//! Path `i` of a batch draws its increments from a dedicated ChaCha8 stream
//! keyed by `(master_seed, i)`, so any path can be regenerated on its own and
//! batches are identical under any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};
use crate::exec::{map_indexed, Execution};

/// Substream identifier: the master seed of a run and the path index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedId {
    pub master: u64,
    pub index: u64,
}

impl SeedId {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    /// Private generator for this substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    n_steps: usize,
    dt: f64,
    values: Vec<f64>,
    seed_id: Option<SeedId>,
}

impl BrownianPath {
    /// Wrap explicit positions (used for synthetic paths). `values[0]` must be 0.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(LabError::InvalidArgument(
                "a path needs at least two positions".into(),
            ));
        }
        if values[0] != 0.0 {
            return Err(LabError::InvalidArgument(format!(
                "path must start at 0, got {}",
                values[0]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument("non-finite path value".into()));
        }
        let n_steps = values.len() - 1;
        Ok(Self {
            n_steps,
            dt: 1.0 / n_steps as f64,
            values,
            seed_id: None,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed_id(&self) -> Option<SeedId> {
        self.seed_id
    }

    /// Position at time `k * dt`.
    pub fn at_step(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Keep every `factor`-th position. The result is a Brownian path with
    /// `n_steps / factor` steps built from the same increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(LabError::InvalidArgument(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.n_steps
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let values: Vec<f64> = self.values.iter().step_by(factor).copied().collect();
        let n_steps = values.len() - 1;
        Ok(Self {
            n_steps,
            dt: 1.0 / n_steps as f64,
            values,
            seed_id: self.seed_id,
        })
    }
}

pub fn simulate_path(n_steps: usize, seed_id: SeedId) -> Result<BrownianPath> {
    if n_steps == 0 {
        return Err(LabError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let dt = 1.0 / n_steps as f64;
    let sd = dt.sqrt();
    let mut rng = seed_id.rng();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        values.push(w);
    }
    Ok(BrownianPath {
        n_steps,
        dt,
        values,
        seed_id: Some(seed_id),
    })
}

pub fn simulate_batch(
    n_steps: usize,
    path_count: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<BrownianPath>> {
    if path_count == 0 {
        return Err(LabError::InvalidArgument("path_count must be at least 1".into()));
    }
    if n_steps == 0 {
        return Err(LabError::InvalidArgument("n_steps must be at least 1".into()));
    }
    map_indexed(exec, path_count, |i| {
        simulate_path(n_steps, SeedId::new(master_seed, i as u64))
    })
    .into_iter()
    .collect()
}

/// `(min, max)` of the path positions; always brackets 0.
pub fn path_range(path: &BrownianPath) -> (f64, f64) {
    path.values
        .iter()
        .fold((0.0_f64, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
