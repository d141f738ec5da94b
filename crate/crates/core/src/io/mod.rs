//! Configuration, data, model artifacts and output tables.

pub mod config;
pub mod data;
pub mod model;
pub mod report;
pub mod tables;

pub use config::{DatasetSource, RunConfig};
pub use data::{load_dataset, LoadedData};
pub use model::{read_model, write_model, ModelHeader};
