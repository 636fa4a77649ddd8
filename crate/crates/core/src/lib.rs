//! Analytics for zero-sum revenue-transfer systems.
//!
//! Plans in a marketplace receive or pay transfers `T_i` whose
//! share-weighted sum is zero. Given the plans' market shares and the
//! covariance of every plan's transfer except one focal plan, this crate
//! derives the focal plan's mean and variance, the full covariance matrix,
//! the sensitivity of the focal variance to share changes, and which
//! per-plan transfer caps are actually attainable. A Monte Carlo sampler
//! checks the closed forms empirically.
//!
//! ```
//! use zerosum::{build_full_covariance, BaseCovariance, MarketShares};
//!
//! let shares = MarketShares::new(vec![0.90, 0.06, 0.04], None).unwrap();
//! let lambda = BaseCovariance::from_rows(&[vec![4.0, -0.6], vec![-0.6, 3.0]]).unwrap();
//! let sigma = build_full_covariance(&shares, &lambda).unwrap();
//! assert!((sigma.get(2, 2) - 1991.25).abs() < 1e-9);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod caps;
pub mod cli;
pub mod error;
pub mod io;
mod linalg;
pub mod model;
pub mod moments;
pub mod sensitivity;
pub mod simulation;

pub use caps::{effective_caps, unboundedness_demo, CapReport};
pub use error::{Error, Result};
pub use linalg::symmetric_eigenvalues;
pub use model::{validate_scenario, BaseCovariance, FullCovariance, MarketShares, MeanSpec, RawScenario, Scenario};
pub use moments::{build_full_covariance, cross_covariances, focal_variance, implied_mean};
pub use sensitivity::{
    check_prop2, find_prop2_examples, focal_variance_gradient, share_sweep, GradientReport, Redistribution,
    SweepResult,
};
pub use simulation::{sample_transfers, summarize, Distribution, SimulationSummary, TransferDraw};
