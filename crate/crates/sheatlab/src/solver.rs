//! Explicit finite-difference integrator for the stochastic heat equation
//! with flat initial data, its block-localized variant, and coupled pairs
//! driven by a shared noise realization.
//!
//! One step of the scheme is
//!
//! ```text
//! u_i <- u_i + (kappa*dt/(2 dx^2)) (u_{i+1} - 2 u_i + u_{i-1}) + sigma(u_i) dW_i / dx
//! ```
//!
//! with `dW_i ~ N(0, dt*dx)` per cell. The localized variant evolves each
//! block of the partition on its own noise stream and drops the stencil
//! contribution of off-block neighbors, so solutions at midpoints of
//! distinct blocks are independent by construction.

use crate::error::{Error, Result};
use crate::noise::{derive_stream, BlockPlan, GridSpec, NoiseStream};
use crate::sigma::SigmaSpec;
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Endpoints pinned to the initial level 1.
    DirichletOne,
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Periodic
    }
}

/// A solution snapshot on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    t: f64,
    grid: GridSpec,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidInput(format!(
                "field length {} does not match grid width {}",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0, cell });
        }
        Ok(Field { values, t, grid })
    }

    /// Flat field of ones at time zero.
    pub fn ones(grid: GridSpec) -> Self {
        Field {
            values: vec![1.0; grid.n_cells()],
            t: 0.0,
            grid,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn position(&self, cell: usize) -> f64 {
        self.grid.position(cell)
    }
}

/// Everything one replicate run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub sigma: SigmaSpec,
    pub master_seed: u64,
    pub replicate_id: u64,
    pub boundary: Boundary,
    pub localization: Option<BlockPlan>,
}

impl RunConfig {
    pub fn new(grid: GridSpec, sigma: SigmaSpec, master_seed: u64, replicate_id: u64) -> Self {
        RunConfig {
            grid,
            sigma,
            master_seed,
            replicate_id,
            boundary: Boundary::Periodic,
            localization: None,
        }
    }

    pub fn with_localization(mut self, plan: BlockPlan) -> Self {
        self.localization = Some(plan);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.grid.n_cells() < 3 {
            return Err(Error::Config(format!(
                "grid too narrow: {} cells",
                self.grid.n_cells()
            )));
        }
        if let Some(plan) = &self.localization {
            if plan.beta() * self.grid.t_end.sqrt() < 2.0 * self.grid.dx {
                return Err(Error::Config(format!(
                    "localization blocks unresolvable: beta*sqrt(t_end) = {} < 2*dx = {}",
                    plan.beta() * self.grid.t_end.sqrt(),
                    2.0 * self.grid.dx
                )));
            }
        }
        Ok(())
    }
}

/// One explicit Euler step of `field` under the given per-cell increments
/// `dW_i ~ N(0, dt*dx)`.
pub fn step(
    field: &Field,
    increments: &[f64],
    sigma: &SigmaSpec,
    boundary: Boundary,
) -> Result<Field> {
    let grid = field.grid;
    if increments.len() != grid.n_cells() {
        return Err(Error::InvalidInput(format!(
            "noise length {} does not match grid width {}",
            increments.len(),
            grid.n_cells()
        )));
    }
    let step_idx = (field.t / grid.dt).round() as u64;
    let mut dst = vec![0.0; field.values.len()];
    advance_lane(
        &grid,
        sigma,
        boundary,
        None,
        &field.values,
        increments,
        &mut dst,
        step_idx,
    )?;
    Ok(Field {
        values: dst,
        t: field.t + grid.dt,
        grid,
    })
}

fn advance_lane(
    grid: &GridSpec,
    sigma: &SigmaSpec,
    boundary: Boundary,
    cell_block: Option<&[usize]>,
    src: &[f64],
    noise: &[f64],
    dst: &mut [f64],
    step_idx: u64,
) -> Result<()> {
    let n = src.len();
    let r = grid.kappa * grid.dt / (2.0 * grid.dx * grid.dx);
    let inv_dx = 1.0 / grid.dx;

    match cell_block {
        None => {
            for i in 1..n - 1 {
                let lap = src[i + 1] - 2.0 * src[i] + src[i - 1];
                dst[i] = src[i] + r * lap + sigma.evaluate(src[i]) * noise[i] * inv_dx;
            }
            match boundary {
                Boundary::Periodic => {
                    let lap0 = src[1] - 2.0 * src[0] + src[n - 1];
                    dst[0] = src[0] + r * lap0 + sigma.evaluate(src[0]) * noise[0] * inv_dx;
                    let lapn = src[0] - 2.0 * src[n - 1] + src[n - 2];
                    dst[n - 1] =
                        src[n - 1] + r * lapn + sigma.evaluate(src[n - 1]) * noise[n - 1] * inv_dx;
                }
                Boundary::DirichletOne => {
                    dst[0] = 1.0;
                    dst[n - 1] = 1.0;
                }
            }
        }
        Some(cb) => {
            // stencil truncated at block edges: an off-block neighbor
            // contributes zero, mirroring the kernel truncation
            for i in 0..n {
                let b = cb[i];
                let left = if i > 0 {
                    if cb[i - 1] == b {
                        src[i - 1]
                    } else {
                        0.0
                    }
                } else if boundary == Boundary::Periodic && cb[n - 1] == b {
                    src[n - 1]
                } else {
                    0.0
                };
                let right = if i + 1 < n {
                    if cb[i + 1] == b {
                        src[i + 1]
                    } else {
                        0.0
                    }
                } else if boundary == Boundary::Periodic && cb[0] == b {
                    src[0]
                } else {
                    0.0
                };
                let lap = right - 2.0 * src[i] + left;
                dst[i] = src[i] + r * lap + sigma.evaluate(src[i]) * noise[i] * inv_dx;
            }
            if boundary == Boundary::DirichletOne {
                dst[0] = 1.0;
                dst[n - 1] = 1.0;
            }
        }
    }

    if let Some(cell) = dst.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: step_idx,
            cell,
        });
    }
    Ok(())
}

struct Lane {
    values: Vec<f64>,
    scratch: Vec<f64>,
    masked: bool,
}

/// Drives one or more solution lanes through the same noise realization.
pub struct Simulation {
    grid: GridSpec,
    sigma: SigmaSpec,
    boundary: Boundary,
    plan: Option<BlockPlan>,
    sources: Vec<(NoiseStream, Range<usize>)>,
    noise: Vec<f64>,
    step_idx: u64,
    lanes: Vec<Lane>,
}

impl Simulation {
    /// Single lane from flat initial data 1.
    pub fn new(config: &RunConfig) -> Result<Self> {
        Self::build(config, &[(1.0, config.localization.is_some())])
    }

    /// Single lane from flat initial data `u0`.
    pub fn with_initial(config: &RunConfig, u0: f64) -> Result<Self> {
        Self::build(config, &[(u0, config.localization.is_some())])
    }

    fn build(config: &RunConfig, lane_spec: &[(f64, bool)]) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let n = grid.n_cells();

        let sources = match &config.localization {
            None => vec![(derive_stream(config.master_seed, config.replicate_id, 0), 0..n)],
            Some(plan) => block_ranges(plan.cell_block())
                .into_iter()
                .enumerate()
                .map(|(b, range)| {
                    (
                        derive_stream(config.master_seed, config.replicate_id, b as u64),
                        range,
                    )
                })
                .collect(),
        };

        let lanes = lane_spec
            .iter()
            .map(|&(u0, masked)| Lane {
                values: vec![u0; n],
                scratch: vec![0.0; n],
                masked,
            })
            .collect();

        Ok(Simulation {
            grid,
            sigma: config.sigma,
            boundary: config.boundary,
            plan: config.localization.clone(),
            sources,
            noise: vec![0.0; n],
            step_idx: 0,
            lanes,
        })
    }

    pub fn step_index(&self) -> u64 {
        self.step_idx
    }

    pub fn time(&self) -> f64 {
        self.step_idx as f64 * self.grid.dt
    }

    pub fn done(&self) -> bool {
        self.step_idx >= self.grid.n_steps()
    }

    pub fn values(&self) -> &[f64] {
        &self.lanes[0].values
    }

    fn lane_values(&self, lane: usize) -> &[f64] {
        &self.lanes[lane].values
    }

    pub fn field(&self) -> Field {
        Field {
            values: self.lanes[0].values.clone(),
            t: self.time(),
            grid: self.grid,
        }
    }

    fn lane_field(&self, lane: usize) -> Field {
        Field {
            values: self.lanes[lane].values.clone(),
            t: self.time(),
            grid: self.grid,
        }
    }

    fn fill_noise(&mut self) {
        let scale = (self.grid.dt * self.grid.dx).sqrt();
        for (stream, range) in &self.sources {
            let buf = &mut self.noise[range.clone()];
            stream.standard_normals_into(self.step_idx, buf);
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Advance every lane by one time step on shared noise.
    pub fn advance(&mut self) -> Result<()> {
        if self.done() {
            return Err(Error::InvalidInput(format!(
                "simulation already at t_end (step {})",
                self.step_idx
            )));
        }
        self.fill_noise();
        let mask = self.plan.as_ref().map(|p| p.cell_block());
        for lane in &mut self.lanes {
            advance_lane(
                &self.grid,
                &self.sigma,
                self.boundary,
                if lane.masked { mask } else { None },
                &lane.values,
                &self.noise,
                &mut lane.scratch,
                self.step_idx,
            )?;
            std::mem::swap(&mut lane.values, &mut lane.scratch);
        }
        self.step_idx += 1;
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.done() {
            self.advance()?;
        }
        Ok(())
    }
}

fn block_ranges(cell_block: &[usize]) -> Vec<Range<usize>> {
    let mut ranges: Vec<Range<usize>> = Vec::new();
    for (i, &b) in cell_block.iter().enumerate() {
        debug_assert!(b <= ranges.len(), "cell blocks must be nondecreasing");
        if b == ranges.len() {
            ranges.push(i..i + 1);
        } else {
            ranges[b].end = i + 1;
        }
    }
    ranges
}

/// Integrate from flat data 1 to `t_end`; deterministic given seeds.
pub fn solve(config: &RunConfig) -> Result<Field> {
    let mut config = config.clone();
    config.localization = None;
    let mut sim = Simulation::new(&config)?;
    sim.run_to_end()?;
    Ok(sim.field())
}

/// Integrate the block-localized equation; requires a [`BlockPlan`].
pub fn solve_localized(config: &RunConfig) -> Result<Field> {
    if config.localization.is_none() {
        return Err(Error::InvalidInput(
            "solve_localized requires a localization plan".into(),
        ));
    }
    let mut sim = Simulation::new(config)?;
    sim.run_to_end()?;
    Ok(sim.field())
}

/// Full and localized solutions driven by the identical block-keyed noise
/// realization, for measuring the coupling discrepancy.
pub fn solve_localization_pair(config: &RunConfig) -> Result<(Field, Field)> {
    if config.localization.is_none() {
        return Err(Error::InvalidInput(
            "solve_localization_pair requires a localization plan".into(),
        ));
    }
    let mut sim = Simulation::build(config, &[(1.0, false), (1.0, true)])?;
    sim.run_to_end()?;
    Ok((sim.lane_field(0), sim.lane_field(1)))
}

/// Result of a coupled two-level run.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub hi: Field,
    pub lo: Field,
    /// Grid-time points where `hi < lo - slack`.
    pub ordering_violations: u64,
    /// Total grid-time points examined.
    pub points_checked: u64,
    /// Minimum of the lower solution over all steps and cells.
    pub min_lo: f64,
}

/// Evolve two solutions from constant data `u0_hi >= u0_lo` on the same
/// noise realization, tracking pathwise ordering.
pub fn solve_coupled_pair(
    config: &RunConfig,
    u0_hi: f64,
    u0_lo: f64,
    slack: f64,
) -> Result<CoupledPair> {
    if !(u0_hi >= u0_lo) {
        return Err(Error::InvalidInput(format!(
            "coupled pair requires u0_hi >= u0_lo, got {u0_hi} < {u0_lo}"
        )));
    }
    let mut config = config.clone();
    config.localization = None;
    let mut sim = Simulation::build(&config, &[(u0_hi, false), (u0_lo, false)])?;
    let mut violations = 0u64;
    let mut checked = 0u64;
    let mut min_lo = u0_lo;
    while !sim.done() {
        sim.advance()?;
        let hi = sim.lane_values(0);
        let lo = sim.lane_values(1);
        for i in 0..hi.len() {
            if hi[i] < lo[i] - slack {
                violations += 1;
            }
            if lo[i] < min_lo {
                min_lo = lo[i];
            }
        }
        checked += hi.len() as u64;
    }
    Ok(CoupledPair {
        hi: sim.lane_field(0),
        lo: sim.lane_field(1),
        ordering_violations: violations,
        points_checked: checked,
        min_lo,
    })
}

/// `max` of the field over grid points in `[-radius, radius]`.
pub fn sup_over_radius(field: &Field, radius: f64) -> Result<f64> {
    let grid = field.grid;
    if !(radius >= 0.0) || -radius < grid.x_min || radius > grid.x_max {
        return Err(Error::InvalidInput(format!(
            "radius {radius} not contained in domain [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for (i, &v) in field.values.iter().enumerate() {
        let x = grid.position(i);
        if x.abs() <= radius + 1e-12 && v > best {
            best = v;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!(
            "no grid points inside [-{radius}, {radius}]"
        )));
    }
    Ok(best)
}
