//! File formats, campaign IO and the command-line front end for
//! `xaifuzz-core`.

pub mod campaign;
pub mod config;
pub mod idx;
pub mod pgm;
pub mod report;
pub mod roadfile;
pub mod svg;
pub mod train;
pub mod weights;
