pub mod error;
pub mod linalg;
pub mod symbols;
pub mod regularity;
pub mod factorization;
pub mod operators;
pub mod determinants;
pub mod traces;
pub mod harness;
