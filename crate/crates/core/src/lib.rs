//! Adaptive isogeometric solver for the Cahn-Hilliard equation on a
//! rectangle, discretized with truncated hierarchical B-splines.
//!
//! The crate is organized bottom-up: [`splines`] (univariate and tensor
//! B-splines), [`hierarchy`] (hierarchical meshes and THB spaces),
//! [`assembly`] (operators, residual, diagnostics), [`timestep`]
//! (generalized-alpha with Newton), [`projection`] (field transfer),
//! [`adaptivity`] (indicators, admissible refine/coarsen) and [`driver`]
//! (configuration, time loop, outputs).

pub mod adaptivity;
pub mod assembly;
pub mod driver;
pub mod error;
pub mod hierarchy;
pub mod projection;
pub mod quadrature;
pub mod sparse;
pub mod splines;
pub mod timestep;

pub use adaptivity::{check_admissible, AdmissibilityReport, IndicatorField, IndicatorKind, MarkSet};
pub use assembly::{BasisCache, MaterialParams, SystemOperators};
pub use driver::{error_metric, Simulation, SimulationConfig, TimeSeriesRecord};
pub use error::{Error, Result};
pub use hierarchy::{build_space, Cell, CellState, HierarchicalMesh, HierarchicalSpace};
pub use quadrature::QuadratureRule;
pub use sparse::CsrMatrix;
pub use splines::{KnotVector, Rect, TensorSpace, TwoScaleOperator};
pub use timestep::{AlphaParams, NewtonSettings, State, StepReport};
