//! File formats: CSV streams and matrices, JSON model files.

pub mod csv;
pub mod model;

pub use self::csv::{load_streams, read_numeric, read_streams, save_streams, write_numeric, write_streams, NumericCsv};
pub use model::{ModelFile, FORMAT_VERSION};
