//! Numerical building blocks shared by the statistical modules.

pub mod optim;
pub mod quad;
pub mod special;
