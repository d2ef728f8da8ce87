//! Layered squared-ReLU network representation and constructive builders.

pub mod build;
