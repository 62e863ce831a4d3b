//! File formats, seeded synthetic data, experiment drivers and the command
//! line front-end for [`safescreen_core`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;
pub mod synth;
