//! Erdős–Rényi sweep runner.
//!
//! Each trial draws a network and a random excited node from a seed that
//! depends only on `(d, trial)`, so every `(τ, ñ_s)` cell at a given `d`
//! sees the same networks and cells can be compared trial by trial.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use qnet_core::dynamics::sample_trajectory;
use qnet_core::identify::{
    build_p_trapezoid, build_q, commutant_dimension, relative_error, solve_commutator,
    stacked_rank_test, Outcome, SolveOptions,
};
use qnet_core::netmodel::{basis_density, erdos_renyi};
use qnet_core::SeededRng;

use crate::config::{RankTest, SweepConfig, SweepKind};

pub const CSV_HEADER: &str = "d,tau,n_tilde,trials,solvability_mean,eps_median,eps_q1,eps_q3,wall_ms,seed";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellRecord {
    pub d: usize,
    pub tau: f64,
    pub n_tilde: usize,
    pub trials: usize,
    pub solvability_mean: f64,
    pub eps_median: Option<f64>,
    pub eps_q1: Option<f64>,
    pub eps_q3: Option<f64>,
    pub wall_ms: Option<f64>,
    pub seed: u64,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl CellRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.d,
            self.tau,
            self.n_tilde,
            self.trials,
            self.solvability_mean,
            opt(self.eps_median),
            opt(self.eps_q1),
            opt(self.eps_q3),
            opt(self.wall_ms),
            self.seed
        )
    }
}

pub fn to_csv(records: &[CellRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(out, "{}", r.csv_line()).unwrap();
    }
    out
}

/// Critical sizes for one `(τ, ñ_s)` curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalSize {
    pub tau: f64,
    pub n_tilde: usize,
    /// Largest `d` with `𝔰̄ = 1`.
    pub last_full: Option<usize>,
    /// Smallest `d` from which `𝔰̄ = 0` for the rest of the grid.
    pub zero_from: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub config: SweepConfig,
    pub records: Vec<CellRecord>,
    pub critical: Vec<CriticalSize>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("trial failed at d={d}, tau={tau}, trial={trial}: {message}")]
    Numerical {
        d: usize,
        tau: f64,
        trial: usize,
        message: String,
        partial: Vec<CellRecord>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Clone, Copy, Debug)]
struct TrialOutcome {
    solvable: bool,
    eps: Option<f64>,
    wall_ms: f64,
}

/// One network and initial state at `(d, trial)`, evaluated at every divisor.
fn run_unit(cfg: &SweepConfig, d: usize, tau: f64, trial: usize) -> qnet_core::Result<Vec<TrialOutcome>> {
    let start = Instant::now();
    let mut rng = SeededRng::new(cfg.seed).derive(&[d as u64, trial as u64]).next_rng();
    let graph = erdos_renyi(d, cfg.p_link, &mut rng)?;
    let node = rng.random_range(0..d);
    let rho0 = basis_density(d, node)?;
    let traj = sample_trajectory(&graph.to_hamiltonian(), &rho0, tau, cfg.dt, cfg.hbar)?;
    let truth = graph.to_admissible();
    let shared_ms = start.elapsed().as_secs_f64() * 1e3;

    cfg.subsample
        .iter()
        .map(|&div| {
            let start = Instant::now();
            let p = build_p_trapezoid(&traj, div)?;
            let candidate = match cfg.rank_test {
                RankTest::Hermitian => commutant_dimension(&p, cfg.rtol)? == 0,
                RankTest::Stacked => stacked_rank_test(&p, cfg.rtol)?.full(),
            };
            let mut solvable = false;
            let mut eps = None;
            if candidate {
                let q = build_q(traj.initial(), traj.last(), cfg.hbar, None, None)?;
                let report = solve_commutator(&p, &q, &SolveOptions::rank_only(cfg.rtol))?;
                solvable = match cfg.rank_test {
                    RankTest::Hermitian => report.outcome == Outcome::Unique,
                    RankTest::Stacked => true,
                };
                if solvable && truth.matrix().norm() > 0.0 {
                    eps = Some(relative_error(&report.estimate, &truth)?);
                }
            }
            Ok(TrialOutcome {
                solvable,
                eps,
                wall_ms: shared_ms + start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn reduce_cell(cfg: &SweepConfig, d: usize, tau: f64, div: usize, outcomes: &[TrialOutcome]) -> CellRecord {
    let solvable = outcomes.iter().filter(|o| o.solvable).count();
    let mut eps: Vec<f64> = outcomes.iter().filter_map(|o| o.eps).collect();
    eps.sort_by(f64::total_cmp);
    CellRecord {
        d,
        tau,
        n_tilde: cfg.n_s(tau) / div,
        trials: outcomes.len(),
        solvability_mean: solvable as f64 / outcomes.len() as f64,
        eps_median: quantile(&eps, 0.5),
        eps_q1: quantile(&eps, 0.25),
        eps_q3: quantile(&eps, 0.75),
        wall_ms: cfg.timing.then(|| outcomes.iter().map(|o| o.wall_ms).sum()),
        seed: cfg.seed,
    }
}

pub fn critical_sizes(records: &[CellRecord]) -> Vec<CriticalSize> {
    let mut curves: Vec<(f64, usize)> = Vec::new();
    for r in records {
        if !curves.iter().any(|&(t, n)| t == r.tau && n == r.n_tilde) {
            curves.push((r.tau, r.n_tilde));
        }
    }
    curves
        .into_iter()
        .map(|(tau, n_tilde)| {
            let mut curve: Vec<&CellRecord> = records
                .iter()
                .filter(|r| r.tau == tau && r.n_tilde == n_tilde)
                .collect();
            curve.sort_by_key(|r| r.d);
            let last_full = curve.iter().filter(|r| r.solvability_mean == 1.0).map(|r| r.d).max();
            let zeros = curve.iter().rev().take_while(|r| r.solvability_mean == 0.0).count();
            let zero_from = (zeros > 0).then(|| curve[curve.len() - zeros].d);
            CriticalSize {
                tau,
                n_tilde,
                last_full,
                zero_from,
            }
        })
        .collect()
}

/// Runs the sweep, handing each finished cell to `sink` in grid order
/// (d ascending, then τ, then divisor as configured).
pub fn run_sweep<F>(cfg: &SweepConfig, kind: SweepKind, mut sink: F) -> Result<SweepResult, SweepError>
where
    F: FnMut(&CellRecord) -> std::io::Result<()>,
{
    cfg.validate().map_err(SweepError::Config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| SweepError::Config(vec![format!("cannot start worker pool: {e}")]))?;
    let mut records = Vec::new();
    for d in cfg.d_min..=cfg.d_max {
        let units: Vec<(f64, usize)> = cfg
            .tau
            .iter()
            .flat_map(|&tau| (0..cfg.trials).map(move |t| (tau, t)))
            .collect();
        let results: Vec<Result<Vec<TrialOutcome>, String>> = pool.install(|| {
            units
                .par_iter()
                .map(|&(tau, trial)| {
                    match catch_unwind(AssertUnwindSafe(|| run_unit(cfg, d, tau, trial))) {
                        Ok(Ok(v)) => Ok(v),
                        Ok(Err(e)) => Err(e.to_string()),
                        Err(_) => Err("trial panicked".to_string()),
                    }
                })
                .collect()
        });
        if let Some((i, Err(message))) = results.iter().enumerate().find(|(_, r)| r.is_err()) {
            let (tau, trial) = units[i];
            return Err(SweepError::Numerical {
                d,
                tau,
                trial,
                message: message.clone(),
                partial: records,
            });
        }
        let results: Vec<Vec<TrialOutcome>> = results.into_iter().map(Result::unwrap).collect();
        for (ti, &tau) in cfg.tau.iter().enumerate() {
            let block = &results[ti * cfg.trials..(ti + 1) * cfg.trials];
            for (si, &div) in cfg.subsample.iter().enumerate() {
                let outcomes: Vec<TrialOutcome> = block.iter().map(|v| v[si]).collect();
                let record = reduce_cell(cfg, d, tau, div, &outcomes);
                debug!("{}", record.csv_line());
                sink(&record)?;
                records.push(record);
            }
        }
        info!("d = {d} done");
    }
    let critical = critical_sizes(&records);
    Ok(SweepResult {
        kind,
        config: cfg.clone(),
        records,
        critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_type7() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.5), Some(2.5));
        assert_eq!(quantile(&x, 0.25), Some(1.75));
        assert_eq!(quantile(&x, 0.75), Some(3.25));
        assert_eq!(quantile(&[7.0], 0.25), Some(7.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    fn rec(d: usize, s: f64) -> CellRecord {
        CellRecord {
            d,
            tau: 3.0,
            n_tilde: 300,
            trials: 1,
            solvability_mean: s,
            eps_median: None,
            eps_q1: None,
            eps_q3: None,
            wall_ms: None,
            seed: 0,
        }
    }

    #[test]
    fn critical_size_definitions() {
        let recs: Vec<_> = [(2, 0.8), (3, 1.0), (4, 1.0), (5, 0.4), (6, 0.0), (7, 0.0)]
            .iter()
            .map(|&(d, s)| rec(d, s))
            .collect();
        let c = &critical_sizes(&recs)[0];
        assert_eq!(c.last_full, Some(4));
        assert_eq!(c.zero_from, Some(6));
        let c = &critical_sizes(&recs[..4])[0];
        assert_eq!(c.zero_from, None);
    }

    #[test]
    fn csv_line_format() {
        let mut r = rec(4, 0.5);
        r.eps_median = Some(0.25);
        assert_eq!(r.csv_line(), "4,3,300,1,0.5,0.25,,,,0");
    }

    #[test]
    fn small_sweep_is_order_independent() {
        let cfg = SweepConfig {
            d_min: 3,
            d_max: 4,
            tau: vec![1.0, 2.0],
            subsample: vec![5, 1],
            trials: 4,
            jobs: 1,
            ..SweepConfig::default()
        };
        let a = run_sweep(&cfg, SweepKind::Error, |_| Ok(())).unwrap();
        let reversed = SweepConfig {
            tau: vec![2.0, 1.0],
            subsample: vec![1, 5],
            ..cfg.clone()
        };
        let b = run_sweep(&reversed, SweepKind::Error, |_| Ok(())).unwrap();
        for r in &a.records {
            assert!(b.records.contains(r));
        }
    }

    #[test]
    fn config_errors_surface() {
        let cfg = SweepConfig {
            trials: 0,
            ..SweepConfig::default()
        };
        assert!(matches!(run_sweep(&cfg, SweepKind::Solvability, |_| Ok(())), Err(SweepError::Config(_))));
    }
}
