//! Script runner for the effhom engine: bind spaces, query homology and bases,
//! probe equivalences.

pub mod script;
pub mod session;

pub use script::{parse_script, Command, Statement};
pub use session::{exit_code, probe_equivalence, run_script, Config, ProbeReport, Session};
