pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod funkan;
pub mod gibbs;
pub mod hermite;
pub mod io;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod raster;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use raster::Image;
pub use tensor::{Mode, Scalar, Tensor};
