//! Geometric shared autonomy: canal surfaces learned from two
//! demonstrations, a ratio-rule controller that rides them, and a dynamic
//! mapping from 2D joystick input to in-disk corrections.
#![no_std]
// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod canal_model;
pub mod controller;
pub mod demo_pipeline;
pub mod error;
pub mod geometry;
pub mod input_mapping;
pub mod simulation;
