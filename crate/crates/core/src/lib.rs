#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod evaluation;
pub mod frames;
pub mod geom;
pub mod io;
pub mod localization;
pub mod map;
pub mod ndt;
pub mod pipeline;
pub mod plots;
pub mod raster;
pub mod scenario;
pub mod stixel;
pub mod tracking;
