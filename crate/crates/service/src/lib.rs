//! Command-line tool and HTTP service over `polymodal-core`.

pub mod artifacts;
pub mod cli;
pub mod server;
