use serde::{Deserialize, Serialize};

use qnet_core::dynamics::grid_steps;
use qnet_core::linalg::DEFAULT_RTOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Solvability,
    Error,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Solvability => "solvability",
            SweepKind::Error => "error",
        }
    }
}

/// Which uniqueness test sets the solvability label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RankTest {
    /// Full column rank of the real system over Hermitian zero-diagonal `M`.
    Hermitian,
    /// Full rank of the complex system with diagonal and symmetry rows.
    Stacked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub d_min: usize,
    pub d_max: usize,
    pub p_link: f64,
    pub tau: Vec<f64>,
    pub dt: f64,
    /// Divisors of `n_s`; each gives `ñ_s = n_s / divisor` trapezoid panels.
    pub subsample: Vec<usize>,
    pub trials: usize,
    pub hbar: f64,
    pub rtol: f64,
    pub rank_test: RankTest,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    /// Fill the `wall_ms` column. Off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::for_kind(SweepKind::Solvability)
    }
}

impl SweepConfig {
    /// Solvability: d in [2, 12], τ = 3, full sampling.
    /// Error: d in [2, 12], τ in {1, 2}, ñ_s in {n_s/20, n_s/10, n_s/5, n_s}.
    pub fn for_kind(kind: SweepKind) -> Self {
        let (tau, subsample) = match kind {
            SweepKind::Solvability => (vec![3.0], vec![1]),
            SweepKind::Error => (vec![1.0, 2.0], vec![20, 10, 5, 1]),
        };
        SweepConfig {
            seed: 0,
            d_min: 2,
            d_max: 12,
            p_link: 0.5,
            tau,
            dt: 0.01,
            subsample,
            trials: 100,
            hbar: 1.0,
            rtol: DEFAULT_RTOL,
            rank_test: RankTest::Hermitian,
            jobs: 0,
            timing: false,
        }
    }

    pub fn extended(mut self) -> Self {
        self.d_max = 30;
        self
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.d_min < 2 {
            errs.push(format!("d_min must be at least 2, got {}", self.d_min));
        }
        if self.d_max < self.d_min {
            errs.push(format!("d_max ({}) is below d_min ({})", self.d_max, self.d_min));
        }
        if !(0.0..=1.0).contains(&self.p_link) {
            errs.push(format!("p_link must lie in [0, 1], got {}", self.p_link));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.tau.is_empty() {
            errs.push("at least one tau is required".into());
        }
        if self.subsample.is_empty() {
            errs.push("at least one subsample divisor is required".into());
        }
        for &tau in &self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                errs.push(format!("tau must be positive, got {tau}"));
                continue;
            }
            if self.dt > 0.0 {
                match grid_steps(tau, self.dt) {
                    Ok(n) => {
                        for &s in &self.subsample {
                            if s == 0 || n % s != 0 {
                                errs.push(format!(
                                    "subsample divisor {s} does not divide n_s = {n} for tau = {tau}"
                                ));
                            }
                        }
                    }
                    Err(_) => errs.push(format!("dt = {} does not divide tau = {tau}", self.dt)),
                }
            }
        }
        if self.trials == 0 {
            errs.push("trials must be at least 1".into());
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            errs.push(format!("hbar must be positive, got {}", self.hbar));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            errs.push(format!("rtol must lie in (0, 1), got {}", self.rtol));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn n_s(&self, tau: f64) -> usize {
        grid_steps(tau, self.dt).expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(SweepConfig::for_kind(SweepKind::Solvability).validate().is_ok());
        assert!(SweepConfig::for_kind(SweepKind::Error).validate().is_ok());
        assert_eq!(SweepConfig::default().extended().d_max, 30);
    }

    #[test]
    fn all_violations_reported() {
        let cfg = SweepConfig {
            d_min: 1,
            d_max: 0,
            p_link: 1.5,
            tau: vec![1.0],
            dt: 0.3,
            trials: 0,
            hbar: -1.0,
            rtol: 0.0,
            ..SweepConfig::default()
        };
        let errs = cfg.validate().unwrap_err();
        assert_eq!(errs.len(), 7, "{errs:?}");
    }

    #[test]
    fn subsample_must_divide() {
        let cfg = SweepConfig {
            subsample: vec![7],
            ..SweepConfig::default()
        };
        let errs = cfg.validate().unwrap_err();
        assert!(errs[0].contains("does not divide n_s = 300"));
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let cfg = SweepConfig::for_kind(SweepKind::Error);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SweepConfig>(&text).unwrap(), cfg);
        let partial: SweepConfig = serde_json::from_str(r#"{"seed": 9, "trials": 3}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.d_max, 12);
        assert!(serde_json::from_str::<SweepConfig>(r#"{"sead": 9}"#).is_err());
    }
}
