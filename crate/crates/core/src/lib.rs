pub mod error;
pub mod margins;
pub mod vine;
pub mod data;
pub mod fitting;
pub mod prediction;
pub mod bicop;
pub mod numeric;
pub mod tail;
pub mod evaluation;

pub use error::{Error, Result};
pub mod io;
