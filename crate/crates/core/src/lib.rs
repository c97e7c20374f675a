//! Learning linear capability/requirement constraints from team samples and
//! embedding them in a multi-agent task-allocation program.

pub mod alloc;
pub mod bench;
pub mod error;
pub mod io;
pub mod learner;
pub mod lp;
pub mod model;

pub use error::{Error, Result};
