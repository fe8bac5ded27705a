use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptivity::{coarsen, compute_indicator, mark, refine, IndicatorField};
use crate::assembly::{free_energy, total_mass, MaterialParams, SystemOperators};
use crate::driver::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchicalMesh, HierarchicalSpace};
use crate::projection::{coarse_project_many, l2_project, refine_transfer};
use crate::timestep::{consistent_velocity, step, AlphaParams, NewtonSettings, State, StepReport};

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub time: f64,
    pub dofs: usize,
    pub active_cells_per_level: Vec<usize>,
    /// Largest Newton count over the solves of the step.
    pub newton_iters: usize,
    /// Refinement passes of the adaptive loop.
    pub adapt_iters: usize,
    pub mass: f64,
    pub energy: f64,
}

impl TimeSeriesRecord {
    pub const CSV_HEADER: &'static str = "step,time,dofs,newton_iters,adapt_iters,mass,energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.10e},{},{},{},{:.17e},{:.17e}",
            self.step, self.time, self.dofs, self.newton_iters, self.adapt_iters, self.mass, self.energy
        )
    }
}

/// Result of the adaptive solve of one step.
#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub indicator: Option<IndicatorField>,
    pub reports: Vec<StepReport>,
    pub refinements: usize,
}

/// Coefficients of the initial field on the uniform finest-level mesh: the
/// projected mean plus one uniform draw in `[-delta, delta]` per coefficient.
pub fn initial_condition(config: &SimulationConfig, space: &HierarchicalSpace) -> Result<Vec<f64>> {
    let mut u = l2_project(space, |_| config.mean)?;
    let d = config.perturbation;
    if d > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for c in u.iter_mut() {
            *c += rng.gen_range(-d..=d);
        }
    }
    Ok(u)
}

pub fn initial_mesh(config: &SimulationConfig) -> Result<HierarchicalMesh> {
    HierarchicalMesh::uniform(
        config.degree,
        config.base(),
        config.geometry()?,
        config.levels,
        config.levels - 1,
    )
}

/// One adaptive Cahn-Hilliard simulation.
#[derive(Clone, Debug)]
pub struct Simulation {
    config: SimulationConfig,
    material: MaterialParams,
    alpha: AlphaParams,
    newton: NewtonSettings,
    space: HierarchicalSpace,
    ops: SystemOperators,
    state: State,
    time: f64,
    steps: usize,
}

impl Simulation {
    /// Start from the configured seeded initial condition.
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let space = HierarchicalSpace::new(initial_mesh(&config)?, true)?;
        let u = initial_condition(&config, &space)?;
        Self::from_field(config, space, u)
    }

    /// Start from a given field on a given space.
    pub fn from_field(config: SimulationConfig, space: HierarchicalSpace, u: Vec<f64>) -> Result<Self> {
        config.validate()?;
        space.check_len(&u)?;
        let material = config.material();
        let ops = SystemOperators::assemble(&space, &material);
        let state = if config.consistent_initial_velocity {
            let v = consistent_velocity(&ops, &u)?;
            State::new(u, v)?
        } else {
            State::at_rest(u)
        };
        Ok(Self {
            alpha: config.alpha()?,
            newton: config.newton(),
            material,
            config,
            space,
            ops,
            state,
            time: 0.0,
            steps: 0,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn space(&self) -> &HierarchicalSpace {
        &self.space
    }

    pub fn operators(&self) -> &SystemOperators {
        &self.ops
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mass(&self) -> f64 {
        total_mass(&self.ops.cache, &self.state.u)
    }

    pub fn energy(&self) -> f64 {
        free_energy(&self.ops.cache, &self.material, &self.state.u)
    }

    pub fn record(&self, newton_iters: usize, adapt_iters: usize) -> TimeSeriesRecord {
        TimeSeriesRecord {
            step: self.steps,
            time: self.time,
            dofs: self.space.num_functions(),
            active_cells_per_level: self.space.mesh().active_counts_per_level(),
            newton_iters,
            adapt_iters,
            mass: self.mass(),
            energy: self.energy(),
        }
    }

    fn set_space(&mut self, space: HierarchicalSpace) {
        self.ops = SystemOperators::assemble(&space, &self.material);
        self.space = space;
    }

    /// Solve the step from the current state, refining and re-solving from
    /// the transferred initial state until no cell is marked. The current
    /// state becomes the end-of-step solution; time is not advanced.
    pub fn advance_adaptive(&mut self) -> Result<AdaptiveOutcome> {
        let mut reports = Vec::new();
        let mut refinements = 0;
        let mut start = self.state.clone();
        loop {
            let (next, report) = step(&start, self.config.dt, &self.alpha, &self.newton, &self.ops)?;
            reports.push(report);
            if !self.config.adaptive {
                self.state = next;
                return Ok(AdaptiveOutcome {
                    indicator: None,
                    reports,
                    refinements,
                });
            }
            let indicator = compute_indicator(
                self.config.indicator,
                &self.space,
                &self.ops.cache,
                &next.u,
                self.material.binodal(),
            );
            let (to_refine, _) = mark(&indicator, self.config.threshold, self.space.mesh());
            if to_refine.is_empty() {
                self.state = next;
                return Ok(AdaptiveOutcome {
                    indicator: Some(indicator),
                    reports,
                    refinements,
                });
            }
            if refinements >= self.config.max_adapt_iter {
                return Err(Error::AdaptationLimit(refinements));
            }
            let mut mesh = self.space.mesh().clone();
            refine(&mut mesh, &to_refine, self.config.mu())?;
            let new_space = HierarchicalSpace::new(mesh, true)?;
            let u = refine_transfer(&start.u, &self.space, &new_space)?;
            let v = refine_transfer(&start.v, &self.space, &new_space)?;
            start = State::new(u, v)?;
            self.set_space(new_space);
            refinements += 1;
            log::debug!(
                "step {}: refinement pass {refinements}, {} dofs",
                self.steps + 1,
                self.space.num_functions()
            );
        }
    }

    /// Coarsen the cells marked by `indicator` and project the state onto
    /// the coarser space. Returns the number of reactivated cells.
    pub fn coarsen_step(&mut self, indicator: &IndicatorField) -> Result<usize> {
        let (_, to_coarsen) = mark(indicator, self.config.threshold, self.space.mesh());
        if to_coarsen.is_empty() {
            return Ok(0);
        }
        let mut mesh = self.space.mesh().clone();
        let reactivated = coarsen(&mut mesh, &to_coarsen, self.config.mu())?;
        if reactivated.is_empty() {
            return Ok(0);
        }
        let coarse = HierarchicalSpace::new(mesh, true)?;
        let ops = SystemOperators::assemble(&coarse, &self.material);
        let mut fields = coarse_project_many(
            &[&self.state.u, &self.state.v],
            &self.space,
            &coarse,
            &ops.cache,
            self.config.projection_penalty,
        )?;
        let v = fields.pop().expect("two fields");
        let u = fields.pop().expect("two fields");
        self.state = State::new(u, v)?;
        self.space = coarse;
        self.ops = ops;
        Ok(reactivated.len())
    }

    /// One full time step: adaptive solve, time update, coarsening.
    pub fn advance(&mut self) -> Result<TimeSeriesRecord> {
        let outcome = self.advance_adaptive()?;
        self.steps += 1;
        self.time = self.steps as f64 * self.config.dt;
        if let Some(ind) = &outcome.indicator {
            if self.time >= self.config.coarsen_start - 1e-12 * self.config.dt {
                self.coarsen_step(ind)?;
            }
        }
        let newton = outcome.reports.iter().map(|r| r.iterations).max().unwrap_or(0);
        Ok(self.record(newton, outcome.refinements))
    }
}
