//! Supervised feature selection by orthogonality-constrained regression.
//!
//! The pipeline: load a dataset ([`dataset`]), reduce the regression to its
//! centered form ([`objective`]), solve it on the Stiefel manifold with a
//! hybrid non-monotone line search ([`optimizer`]), pick direction weights by
//! descent-curve area ([`sweep`]), score features by polygon area
//! ([`scoring`]), and validate rankings with backward elimination ([`eval`]).
//!
//! ```
//! use polyrank_core::prelude::*;
//!
//! let ds = synth::gaussian_blobs(6, 60, 2, 3.0, 7);
//! let ds = dataset::standardize(&ds);
//! let problem = objective::build_problem(ds.features(), &dataset::one_hot(&ds)).unwrap();
//! let mut cfg = SearchConfig::for_shape(ds.n_features(), ds.n_classes());
//! cfg.seed = 7;
//! let grid = sweep::build_grid(0.25).unwrap();
//! let result = sweep::sweep(&problem, &grid, &cfg, CurveScoring::Normalized).unwrap();
//! let ranking = scoring::rank_features(&scoring::quadrant_process(&result.best_w));
//! assert_eq!(ranking.len(), 6);
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
pub mod objective;
pub mod optimizer;
pub mod scoring;
pub mod seeds;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};

/// The names most callers need.
pub mod prelude {
    pub use crate::dataset::{self, CsvOptions, Dataset, LabelColumn, OneHotLabels, SplitIndices};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{self, Classifier, EvalConfig, EvalCurve};
    pub use crate::objective::{self, CenteredProblem, StiefelPoint};
    pub use crate::optimizer::{
        self, DescentTrace, SearchConfig, SearchMode, SimplexWeights,
    };
    pub use crate::scoring::{self, FeatureRanking, QuadrantWeights};
    pub use crate::seeds;
    pub use crate::sweep::{self, CurveScoring, SimplexGrid, SweepResult};
    pub use crate::synth;
}
