//! Benchmark sweeps over random Erdős–Rényi quantum walks, plus the
//! plotting used by the `qnet` command-line tool.

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{RankTest, SweepConfig, SweepKind};
pub use sweep::{run_sweep, CellRecord, SweepError, SweepResult};
