pub mod error;
pub mod audiofeat;
pub mod geometry;
pub mod io;
pub mod nn;
pub mod synthdata;
pub mod filtering;
pub mod models;
pub mod training;
pub mod evaluation;
pub mod pipeline;

pub use error::{Error, Result};
