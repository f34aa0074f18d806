//! Verification reports and the seeded trial runner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Outcome of a randomized identity check.
///
/// `pass` is `(max_rel_err < tol) != expected_fail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub command: String,
    pub params: Value,
    pub trials: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub pass: bool,
    pub expected_fail: bool,
    pub seed: u64,
    pub runtime_ms: u64,
}

impl VerificationReport {
    pub fn single(command: &str, trials: usize, abs: f64, rel: f64, tol: f64) -> Self {
        VerificationReport {
            command: command.to_string(),
            params: Value::Null,
            trials,
            max_abs_err: abs,
            max_rel_err: rel,
            pass: rel < tol,
            expected_fail: false,
            seed: 0,
            runtime_ms: 0,
        }
    }

    pub fn from_errors(command: &str, errs: ErrorStats, tol: f64, expected_fail: bool, seed: u64) -> Self {
        VerificationReport {
            command: command.to_string(),
            params: Value::Null,
            trials: errs.trials,
            max_abs_err: errs.max_abs,
            max_rel_err: errs.max_rel,
            pass: (errs.max_rel < tol) != expected_fail,
            expected_fail,
            seed,
            runtime_ms: 0,
        }
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn with_runtime(mut self, ms: u64) -> Self {
        self.runtime_ms = ms;
        self
    }

    /// `null` when the error is not finite, which JSON cannot carry.
    pub fn to_json(&self, pretty: bool) -> String {
        if pretty {
            serde_json::to_string_pretty(self).expect("report serializes")
        } else {
            serde_json::to_string(self).expect("report serializes")
        }
    }
}

/// Max reduction of per-trial `(abs, rel)` errors. A NaN error counts as
/// infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub trials: usize,
    pub max_abs: f64,
    pub max_rel: f64,
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

impl ErrorStats {
    pub fn empty() -> Self {
        ErrorStats {
            trials: 0,
            max_abs: 0.0,
            max_rel: 0.0,
        }
    }

    pub fn push(&mut self, abs: f64, rel: f64) {
        self.trials += 1;
        self.max_abs = nan_max(self.max_abs, abs);
        self.max_rel = nan_max(self.max_rel, rel);
    }

    pub fn merge(mut self, other: ErrorStats) -> Self {
        self.trials += other.trials;
        self.max_abs = nan_max(self.max_abs, other.max_abs);
        self.max_rel = nan_max(self.max_rel, other.max_rel);
        self
    }
}

/// Per-trial RNG: stream `trial` of the generator seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs `trials` independent trials on `jobs` threads (0 means the rayon
/// default) and reduces their errors. The first error in trial order wins.
pub fn run_trials<F>(trials: usize, seed: u64, jobs: usize, f: F) -> Result<ErrorStats>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<(f64, f64)> + Sync + Send,
{
    let body = || -> Vec<Result<(f64, f64)>> {
        (0..trials)
            .into_par_iter()
            .map(|t| f(t, &mut trial_rng(seed, t)))
            .collect()
    };
    let results = if jobs == 0 {
        body()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(body)
    };
    let mut stats = ErrorStats::empty();
    for r in results {
        let (a, b) = r?;
        stats.push(a, b);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pass_rule() {
        let s = ErrorStats { trials: 3, max_abs: 1.0, max_rel: 1e-3 };
        assert!(!VerificationReport::from_errors("x", s, 1e-6, false, 1).pass);
        assert!(VerificationReport::from_errors("x", s, 1e-6, true, 1).pass);
        let s = ErrorStats { trials: 3, max_abs: 0.0, max_rel: 1e-9 };
        assert!(VerificationReport::from_errors("x", s, 1e-6, false, 1).pass);
        assert!(!VerificationReport::from_errors("x", s, 1e-6, true, 1).pass);
    }

    #[test]
    fn nan_is_a_failure() {
        let mut s = ErrorStats::empty();
        s.push(f64::NAN, 0.0);
        s.push(0.0, f64::NAN);
        assert_eq!(s.max_rel, f64::INFINITY);
        assert!(!VerificationReport::from_errors("x", s, 1.0, false, 0).pass);
    }

    #[test]
    fn trials_are_deterministic_across_job_counts() {
        let f = |_t: usize, rng: &mut ChaCha8Rng| Ok((rng.random::<f64>(), rng.random::<f64>()));
        let a = run_trials(100, 9, 1, f).unwrap();
        let b = run_trials(100, 9, 4, f).unwrap();
        let c = run_trials(100, 10, 4, f).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.trials, 100);
    }

    #[test]
    fn json_round_trip() {
        let r = VerificationReport::single("jhalf", 5, 1e-12, 2e-12, 1e-9)
            .with_params(serde_json::json!({"n": 2}));
        let back: VerificationReport = serde_json::from_str(&r.to_json(false)).unwrap();
        assert_eq!(back, r);
        assert!(!r.to_json(false).contains('\n'));
    }
}
