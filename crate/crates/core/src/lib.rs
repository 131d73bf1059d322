pub mod error;
pub mod veccore;

pub use error::{Error, ErrorKind, Result, Stage};
pub mod losses;
pub mod datastore;
pub mod adapters;
pub mod classify;
pub mod experiments;
