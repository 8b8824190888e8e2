//! Space deformation for non-stationary geostatistics.
//!
//! A non-stationary random function `Z(x)` is modelled as `Y(f(x))` where `Y`
//! is stationary and isotropic and `f` is a smooth bijection of the plane (or
//! line). The pipeline estimates `f` on a small set of anchor points from a
//! kernel variogram estimator and weighted non-metric MDS, extends it with a
//! thin-plate spline, fits a variogram mixture in the deformed space, and then
//! kriges or simulates through the deformation.

pub mod dissimilarity;
pub mod error;
pub mod io;
pub mod kernel;
pub mod nmds;
pub mod parallel;
pub mod pipeline;
pub mod prediction;
pub mod spatial;
pub mod synthetic;
pub mod tps;
pub mod tuning;
pub mod variogram;

pub use nalgebra;

pub use error::{Error, Result};
pub use nmds::{Configuration, StressValue};
pub use pipeline::{fit_deformation, fit_stationary, DeformationFit, FitOptions};
pub use prediction::{KrigingResult, MeanModel, SimulationEnsemble};
pub use spatial::{AnchorSet, Dataset, GaugeTransform, Location, Sample};
pub use tps::ThinPlateSpline;
pub use tuning::{HyperParams, ScoreReport};
pub use variogram::{BasicStructure, MixtureVariogram, StructureKind};
