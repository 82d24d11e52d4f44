#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dual;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod flatness;
pub mod moving;
pub mod optim;
pub mod solvers;
