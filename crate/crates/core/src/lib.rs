//! Stochastic block BFGS.
//!
//! A variable-metric SVRG method whose metric is refreshed by block BFGS
//! updates built from sketched, subsampled Hessian actions. The crate
//! provides the pieces separately so they can be tested and benchmarked:
//!
//! - [`linalg`]: column-major dense matrices, Cholesky, triangular solves.
//! - [`dataset`]: LIBSVM parsing, the bias column, without-replacement sampling.
//! - [`objective`]: L2-regularized logistic loss and a quadratic test model.
//! - [`sketch`]: Gaussian, previous-direction and self-conditioning sketches.
//! - [`metric`]: block triples, dense update, two-loop and factored recursions.
//! - [`optimizer`]: the outer/inner loop driver and the SVRG baseline.
//! - [`analysis`]: spectral bounds, the linear rate, and the variance bound check.
//!
//! ```
//! use blockbfgs::{dataset, objective::LogisticModel, optimizer, rng::RandomStream};
//! use blockbfgs::{SketchStrategy, Strategy, OptimizerConfig};
//!
//! let data = dataset::synthetic_logistic(&mut RandomStream::new(1), 200, 10, 1.0, 0.1);
//! let model = LogisticModel::with_default_reg(&data).unwrap();
//! let config = OptimizerConfig {
//!     max_outer: 5,
//!     ..OptimizerConfig::new(200, 0.5, Strategy::Sketched(SketchStrategy::Gaussian { q: 3 }))
//! };
//! let result = optimizer::run(&model, &config).unwrap();
//! let first = result.trace.records[0].fvalue;
//! assert!(result.trace.last().unwrap().fvalue < first);
//! ```

pub mod analysis;
pub mod dataset;
pub mod linalg;
pub mod metric;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod sketch;

pub use dataset::{Dataset, IndexSample, SparseExample};
pub use linalg::{LowerTriangularFactor, Matrix};
pub use metric::{BlockTriple, CurvatureBuffer};
pub use objective::{LogisticModel, Objective, QuadraticModel};
pub use optimizer::{
    OptimizerConfig, OuterOption, RunResult, RunStatus, RunTrace, Strategy, TraceRecord, UpdateOption,
};
pub use rng::RandomStream;
pub use sketch::SketchStrategy;
