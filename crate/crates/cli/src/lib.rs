//! Front ends over [`envkb::api`]: a command line with one subcommand per
//! workflow and a small JSON-over-HTTP service. Both go through the same
//! request handlers, so a query run from either returns the same JSON.

pub mod cli;
pub mod server;

pub use cli::{run, Cli, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use server::{router, serve, AppState};
