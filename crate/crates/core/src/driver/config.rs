use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptivity::IndicatorKind;
use crate::assembly::MaterialParams;
use crate::error::{Error, Result};
use crate::splines::Rect;
use crate::timestep::{AlphaParams, NewtonSettings};

pub const SCHEMA_VERSION: u32 = 1;

/// Run configuration, read from a flat TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,

    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub degree: usize,
    pub base_elements_x: usize,
    pub base_elements_y: usize,
    /// Number of hierarchical levels N; the finest is N-1.
    pub levels: usize,
    /// Admissibility class; defaults to the degree.
    pub mu: Option<usize>,

    pub lambda: f64,
    pub sigma: f64,
    pub nu: f64,
    /// epsilon_N = nitsche_factor * lambda
    pub nitsche_factor: f64,

    pub dt: f64,
    pub t_end: f64,
    pub rho_inf: f64,
    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub newton_max_iter: usize,

    pub adaptive: bool,
    pub indicator: IndicatorKind,
    pub threshold: f64,
    /// Coarsening is skipped while t < coarsen_start.
    pub coarsen_start: f64,
    pub projection_penalty: f64,
    pub max_adapt_iter: usize,

    pub mean: f64,
    pub perturbation: f64,
    pub seed: u64,
    pub consistent_initial_velocity: bool,

    pub output_dir: PathBuf,
    /// Snapshot cadence in steps; 0 writes only the initial and final ones.
    pub output_every: usize,
    pub raster_resolution: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            x_min: 0.0,
            y_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
            degree: 2,
            base_elements_x: 4,
            base_elements_y: 4,
            levels: 5,
            mu: None,
            lambda: 6.15e-4,
            sigma: 1.0,
            nu: 1.0,
            nitsche_factor: 1e4,
            dt: 1e-3,
            t_end: 1.0,
            rho_inf: 0.5,
            newton_abs_tol: 1e-10,
            newton_rel_tol: 1e-10,
            newton_max_iter: 20,
            adaptive: true,
            indicator: IndicatorKind::Field,
            threshold: 0.1,
            coarsen_start: 0.0,
            projection_penalty: 1e3,
            max_adapt_iter: 10,
            mean: 0.0,
            perturbation: 0.005,
            seed: 0,
            consistent_initial_velocity: false,
            output_dir: PathBuf::from("output"),
            output_every: 100,
            raster_resolution: 256,
        }
    }
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("configuration", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Serialized form with `mu` resolved.
    pub fn to_toml(&self) -> Result<String> {
        let mut resolved = self.clone();
        resolved.mu = Some(self.mu());
        toml::to_string(&resolved).map_err(|e| Error::parse("configuration", e))
    }

    pub fn mu(&self) -> usize {
        self.mu.unwrap_or(self.degree)
    }

    pub fn geometry(&self) -> Result<Rect> {
        Rect::new([self.x_min, self.y_min], [self.x_max, self.y_max])
    }

    pub fn base(&self) -> [usize; 2] {
        [self.base_elements_x, self.base_elements_y]
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams {
            lambda: self.lambda,
            sigma: self.sigma,
            nu: self.nu,
            nitsche: self.nitsche_factor * self.lambda,
        }
    }

    pub fn alpha(&self) -> Result<AlphaParams> {
        AlphaParams::new(self.rho_inf)
    }

    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            abs_tol: self.newton_abs_tol,
            rel_tol: self.newton_rel_tol,
            max_iter: self.newton_max_iter,
        }
    }

    /// Largest element size on the finest level.
    pub fn finest_h(&self) -> f64 {
        let scale = (1usize << self.levels.saturating_sub(1)) as f64;
        ((self.x_max - self.x_min) / (self.base_elements_x as f64 * scale))
            .max((self.y_max - self.y_min) / (self.base_elements_y as f64 * scale))
    }

    /// Number of time steps to reach `t_end`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.geometry()?;
        if self.degree < 2 {
            return fail(format!("degree {} is too low for a fourth-order problem", self.degree));
        }
        if self.base_elements_x < 4 || self.base_elements_y < 4 {
            return fail("the base mesh must have at least 4x4 elements".into());
        }
        if self.levels == 0 {
            return fail("levels must be at least 1".into());
        }
        if self.mu() < 2 {
            return fail(format!("mu = {} must be at least 2", self.mu()));
        }
        self.material().validate()?;
        if self.sigma <= 0.0 {
            return fail("sigma must be positive".into());
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return fail("dt must be positive and t_end nonnegative".into());
        }
        self.alpha()?;
        self.newton().validate()?;
        if !(self.threshold > 0.0) {
            return fail("threshold must be positive".into());
        }
        if self.indicator == IndicatorKind::Field && self.threshold >= 1.0 {
            return fail("field-indicator threshold must be below 1".into());
        }
        if self.projection_penalty < 0.0 || self.perturbation < 0.0 {
            return fail("projection_penalty and perturbation must be nonnegative".into());
        }
        if self.max_adapt_iter == 0 {
            return fail("max_adapt_iter must be at least 1".into());
        }
        if self.raster_resolution < 2 {
            return fail("raster_resolution must be at least 2".into());
        }
        let h = self.finest_h();
        let ideal = (self.lambda / 2.5).sqrt();
        if (h / ideal).ln().abs() > 2f64.ln() {
            log::warn!(
                "finest element size {h:.4e} is far from the interface-resolving size sqrt(lambda/2.5) = {ideal:.4e}"
            );
        }
        Ok(())
    }
}
