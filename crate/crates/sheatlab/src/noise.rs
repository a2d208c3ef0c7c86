//! Deterministic, seeded discretization of space-time white noise.
//!
//! Noise is produced as Brownian-sheet increments: one value per grid cell
//! per time step, distributed N(0, dt·dx), independent across cells and
//! steps. Streams are keyed by `(master_seed, replicate_id, block_id)` and
//! the per-step generator state is derived by hashing the key together with
//! the step index, so any cell of any step of any replicate can be
//! regenerated independently and in parallel with no coordination.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Space-time discretization plus viscosity; owns the stability checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kappa: f64,
    pub dt: f64,
    pub dx: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub t_end: f64,
}

impl GridSpec {
    pub fn new(kappa: f64, dt: f64, dx: f64, x_min: f64, x_max: f64, t_end: f64) -> Result<Self> {
        let grid = GridSpec {
            kappa,
            dt,
            dx,
            x_min,
            x_max,
            t_end,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("grid.kappa", self.kappa),
            ("grid.dt", self.dt),
            ("grid.dx", self.dx),
            ("grid.x_min", self.x_min),
            ("grid.x_max", self.x_max),
            ("grid.t_end", self.t_end),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::Config(format!(
                "grid.kappa must be positive, got {}",
                self.kappa
            )));
        }
        if self.dt <= 0.0 || self.dx <= 0.0 {
            return Err(Error::Config(format!(
                "grid.dt and grid.dx must be positive, got dt={}, dx={}",
                self.dt, self.dx
            )));
        }
        if self.x_max <= self.x_min {
            return Err(Error::Config(format!(
                "grid.x_max must exceed grid.x_min, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.t_end < 0.0 {
            return Err(Error::Config(format!(
                "grid.t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        let cfl = self.kappa * self.dt / (self.dx * self.dx);
        if cfl > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "stability violated: kappa*dt/dx^2 = {cfl:.6} exceeds 1"
            )));
        }
        check_divisible("(x_max - x_min)/dx", self.x_max - self.x_min, self.dx)?;
        if self.t_end > 0.0 {
            check_divisible("t_end/dt", self.t_end, self.dt)?;
        }
        Ok(())
    }

    /// Number of grid points; the domain is half-open, `x_max` wraps to
    /// `x_min` under periodic boundaries.
    pub fn n_cells(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round() as usize
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    #[inline]
    pub fn position(&self, cell: usize) -> f64 {
        self.x_min + cell as f64 * self.dx
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest_cell(&self, x: f64) -> Result<usize> {
        if x < self.x_min - 0.5 * self.dx || x > self.x_max {
            return Err(Error::InvalidInput(format!(
                "position {x} outside grid [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let idx = ((x - self.x_min) / self.dx).round() as usize;
        Ok(idx.min(self.n_cells() - 1))
    }

    pub fn cfl_number(&self) -> f64 {
        self.kappa * self.dt / (self.dx * self.dx)
    }
}

fn check_divisible(name: &str, total: f64, step: f64) -> Result<()> {
    let ratio = total / step;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(Error::Config(format!(
            "{name} must be an integer, got {ratio}"
        )));
    }
    Ok(())
}

/// Identity of one independent noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseStream {
    master_seed: u64,
    replicate_id: u64,
    block_id: u64,
}

/// Derive the stream keyed by `(master_seed, replicate_id, block_id)`.
/// Distinct triples give statistically independent generators.
pub fn derive_stream(master_seed: u64, replicate_id: u64, block_id: u64) -> NoiseStream {
    NoiseStream {
        master_seed,
        replicate_id,
        block_id,
    }
}

impl NoiseStream {
    /// Generator for one time step of this stream. Hashing the full key
    /// with the step index makes every (replicate, block, step) cell
    /// reproducible in isolation.
    pub fn step_rng(&self, step: u64) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(b"sheatlab.noise.v1");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.replicate_id.to_le_bytes());
        hasher.update(self.block_id.to_le_bytes());
        hasher.update(step.to_le_bytes());
        let digest = hasher.finalize();
        ChaCha8Rng::from_seed(digest.into())
    }

    /// Fill `out` with standard normal draws for the given step.
    pub fn standard_normals_into(&self, step: u64, out: &mut [f64]) {
        let mut rng = self.step_rng(step);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    pub fn standard_normals(&self, step: u64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.standard_normals_into(step, &mut out);
        out
    }
}

/// Brownian-sheet increments for one time step: each cell N(0, dt·dx).
pub fn sample_increments(grid: &GridSpec, stream: &NoiseStream, step: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.n_cells()];
    sample_increments_into(grid, stream, step, &mut out)?;
    Ok(out)
}

pub fn sample_increments_into(
    grid: &GridSpec,
    stream: &NoiseStream,
    step: u64,
    out: &mut [f64],
) -> Result<()> {
    if step >= grid.n_steps() {
        return Err(Error::InvalidInput(format!(
            "step {step} out of range [0, {})",
            grid.n_steps()
        )));
    }
    let scale = (grid.dt * grid.dx).sqrt();
    stream.standard_normals_into(step, out);
    for v in out.iter_mut() {
        *v *= scale;
    }
    Ok(())
}

/// The localization partition: half-open blocks `[(j-1)·β√t, j·β√t)` with
/// midpoints `x_j = (j-1/2)·β√t`, restricted to the blocks that meet the
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    beta: f64,
    t: f64,
    edges: Vec<f64>,
    midpoints: Vec<f64>,
    cell_block: Vec<usize>,
}

/// Build the partition of the grid into blocks of width `beta·sqrt(t)`.
pub fn make_block_plan(beta: f64, t: f64, grid: &GridSpec) -> Result<BlockPlan> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "block scale beta must be positive, got {beta}"
        )));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "block time t must be positive, got {t}"
        )));
    }
    let width = beta * t.sqrt();
    if width < 2.0 * grid.dx {
        return Err(Error::InvalidInput(format!(
            "blocks unresolvable on grid: beta*sqrt(t) = {width} < 2*dx = {}",
            2.0 * grid.dx
        )));
    }

    // block j covers [(j-1)w, jw); j_first is the block containing x_min
    let j_first = (grid.x_min / width).floor() as i64 + 1;
    let last_cell_x = grid.position(grid.n_cells() - 1);
    let j_last = (last_cell_x / width).floor() as i64 + 1;
    let n_blocks = (j_last - j_first + 1) as usize;

    let mut edges = Vec::with_capacity(n_blocks + 1);
    let mut midpoints = Vec::with_capacity(n_blocks);
    for j in j_first..=j_last {
        edges.push((j - 1) as f64 * width);
        midpoints.push((j as f64 - 0.5) * width);
    }
    edges.push(j_last as f64 * width);

    let cell_block: Vec<usize> = (0..grid.n_cells())
        .map(|i| {
            let j = (grid.position(i) / width).floor() as i64 + 1;
            (j - j_first) as usize
        })
        .collect();

    Ok(BlockPlan {
        beta,
        t,
        edges,
        midpoints,
        cell_block,
    })
}

impl BlockPlan {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_blocks(&self) -> usize {
        self.midpoints.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Block index for each grid cell, in cell order.
    pub fn cell_block(&self) -> &[usize] {
        &self.cell_block
    }

    /// Block index containing position `x`, if any block does.
    pub fn block_of_position(&self, x: f64) -> Option<usize> {
        let idx = self
            .edges
            .partition_point(|&e| e <= x)
            .checked_sub(1)?;
        (idx < self.n_blocks() && x < self.edges[idx + 1]).then_some(idx)
    }

    /// Grid indices nearest to each block midpoint, skipping midpoints that
    /// fall outside the grid.
    pub fn midpoint_cells(&self, grid: &GridSpec) -> Vec<usize> {
        self.midpoints
            .iter()
            .filter_map(|&m| grid.nearest_cell(m).ok())
            .collect()
    }
}
