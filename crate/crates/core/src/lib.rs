#![no_std]
// `num_traits::Float` supplies f64 math without std and is shadowed when std is linked.
#![allow(unused_imports)]
//! Structure-preserving interpolatory model reduction for linear port-Hamiltonian systems.

extern crate alloc;

pub mod analysis;
pub mod balancing;
pub mod error;
pub mod irka;
pub mod linalg;
pub mod models;
pub mod reduction;
pub mod system;

pub use error::{Error, Result, StructureKind, Warning};
