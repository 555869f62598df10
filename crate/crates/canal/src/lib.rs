//! File formats, command-line tools and the live WebSocket bridge around
//! [`canal_core`].

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod cli;
pub mod formats;
pub mod protocol;
