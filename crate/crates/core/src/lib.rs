//! Verification and search toolkit for contact connections on
//! left-invariant contact Lie groups and their twistor spaces.
//!
//! The exact path works over [`rational::Rational`]; fibre geometry,
//! twistor scans and the solver work in `f64`.

pub mod cli;
pub mod connection;
pub mod corpus;
pub mod curvature;
pub mod document;
pub mod fiber;
pub mod lie_contact;
pub mod linalg;
pub mod rational;
pub mod solver;
pub mod twistor;
