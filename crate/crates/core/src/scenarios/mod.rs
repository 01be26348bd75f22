//! Model documents, generators for the example structures, and study
//! drivers producing CSV tables.

mod document;
mod generators;
mod studies;

pub use document::*;
pub use generators::*;
pub use studies::*;
