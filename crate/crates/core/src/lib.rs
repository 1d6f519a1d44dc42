//! Conformal classifiers trained for small prediction sets.
//!
//! The usual inductive conformal predictor (ICP) inherits its conformity
//! measure from a classifier fitted for accuracy. This crate instead fits a
//! multiclass linear conformity measure by gradient descent on a smooth
//! surrogate of the ICP's own objective: mean prediction-set inefficiency
//! plus a penalty keeping soft training coverage at `1 - ε`. The fitted
//! measure is then calibrated on held-out data like any other ICP, so the
//! coverage guarantee is unaffected.
//!
//! A multinomial logistic regression ICP is provided as the reference point.
//!
//! ```
//! use ndarray::array;
//! use scpo::conformity::ThetaMatrix;
//! use scpo::data::{add_intercept, Dataset};
//! use scpo::icp::IcpModel;
//!
//! let x = array![[-1.0], [-0.8], [0.9], [1.2], [-1.1], [1.0]];
//! let calib = add_intercept(&Dataset::from_parts(x, vec![0, 0, 1, 1, 0, 1], 2)?)?;
//! let theta = ThetaMatrix::from_matrix(array![[-2.0, 2.0], [0.0, 0.0]])?;
//! let icp = IcpModel::fit(theta, &calib, 0.2)?;
//! let sets = icp.predict(array![[-1.0, 1.0]].view())?;
//! assert!(sets[0].contains(0));
//! # Ok::<(), scpo::Error>(())
//! ```

pub mod baseline;
pub mod conformity;
pub mod data;
pub mod error;
pub mod icp;
pub mod metrics;
pub mod search;
pub mod surrogate;

pub use error::{Error, Result};
