//! Numerical building blocks: compensated sums, adaptive quadrature,
//! distribution tail functions.

pub mod quad;
pub mod special;
pub mod sum;
