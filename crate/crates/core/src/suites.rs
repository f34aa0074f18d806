//! Seeded verification suites behind `halfweight verify`.

use num_complex::Complex64;
use rand::Rng;
use serde_json::json;
use std::time::Instant;

use crate::autfactors::{j_half, j_matrix};
use crate::error::{Error, Result};
use crate::groups::{
    meta_lift, meta_mul, random_generator, random_word, siegel_action, word_element, GenKind,
    Generator, GeneratorKind, HeisenbergElement, JacobiPoint, MetaElement, SymplecticElement,
    WordOptions,
};
use crate::matcore::{c, random_siegel_with, CMat, IndexMatrix, RMat, SiegelPoint};
use crate::report::{run_trials, ErrorStats, VerificationReport};
use crate::theta::{
    check_unimodular, counterexample_theta_transform, poisson_sides, random_probe, rho_m_word,
    theta_transform_residual, Counterexample, ThetaParams, DEFAULT_MAX_RADIUS,
};
use crate::weilrep::{
    covariance_residual, covariant_map, weil_action, weil_action_numeric, GridFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    JHalf,
    Cocycle,
    Covariance,
    ThetaTransform,
    Poisson,
    WeilOps,
}

pub const SUITES: [Suite; 6] = [
    Suite::JHalf,
    Suite::Cocycle,
    Suite::Covariance,
    Suite::ThetaTransform,
    Suite::Poisson,
    Suite::WeilOps,
];

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        SUITES.iter().copied().find(|x| x.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::JHalf => "jhalf",
            Suite::Cocycle => "cocycle",
            Suite::Covariance => "covariance",
            Suite::ThetaTransform => "theta-transform",
            Suite::Poisson => "poisson",
            Suite::WeilOps => "weil-ops",
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            Suite::ThetaTransform => 1e-8,
            Suite::WeilOps => 1e-6,
            _ => 1e-9,
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::JHalf => 1000,
            Suite::Cocycle => 300,
            Suite::Covariance => 800,
            Suite::ThetaTransform => 104,
            Suite::Poisson => 50,
            Suite::WeilOps => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// `None` cycles over the default degrees of the suite.
    pub n: Option<usize>,
    pub m: Option<usize>,
    /// `None` means the identity of the trial's `m`.
    pub index: Option<IndexMatrix>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    pub truncation_tol: f64,
    pub seed: u64,
    pub jobs: usize,
    pub counterexample: Option<Counterexample>,
    pub timing: bool,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        SuiteConfig {
            suite,
            n: None,
            m: None,
            index: None,
            trials: None,
            tol: None,
            truncation_tol: 1e-12,
            seed: 0,
            jobs: 0,
            counterexample: None,
            timing: true,
        }
    }

    pub fn trials(&self) -> usize {
        match (self.trials, self.counterexample) {
            (Some(t), _) => t,
            (None, Some(_)) => 10,
            (None, None) => self.suite.default_trials(),
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(self.suite.default_tol())
    }

    fn params_json(&self) -> serde_json::Value {
        json!({
            "suite": self.suite.name(),
            "n": self.n,
            "m": self.m,
            "M": self.index.as_ref().map(|i| crate::matcore::MatrixJson::from_real(i.matrix())),
            "trials": self.trials(),
            "tol": self.tol(),
            "truncation_tol": self.truncation_tol,
            "counterexample": self.counterexample.map(|c| c.name()),
        })
    }

    fn pick_n(&self, t: usize, cycle: &[usize]) -> usize {
        self.n.unwrap_or(cycle[t % cycle.len()])
    }

    fn pick_m(&self, t: usize, cycle: &[usize]) -> usize {
        if let Some(i) = &self.index {
            return i.degree();
        }
        self.m.unwrap_or(cycle[(t / 3 + t) % cycle.len()])
    }

    fn index_for(&self, m: usize) -> IndexMatrix {
        self.index.clone().unwrap_or_else(|| IndexMatrix::identity(m))
    }

    fn validate(&self) -> Result<()> {
        if matches!(self.n, Some(0)) || matches!(self.m, Some(0)) {
            return Err(Error::InvalidInput("n and m must be positive".into()));
        }
        if let (Some(m), Some(i)) = (self.m, &self.index) {
            if i.degree() != m {
                return Err(Error::ShapeMismatch(format!("M is {0}x{0} but m = {m}", i.degree())));
            }
        }
        if !(self.tol() > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if self.counterexample.is_some() && self.suite != Suite::ThetaTransform {
            return Err(Error::InvalidInput("--counterexample applies to theta-transform only".into()));
        }
        Ok(())
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let tol = cfg.tol();
    let report = if let Some(kind) = cfg.counterexample {
        let n = cfg.n.unwrap_or(1);
        let m = cfg.m.unwrap_or(1);
        counterexample_theta_transform(
            kind,
            n,
            m,
            cfg.trials(),
            tol,
            cfg.truncation_tol,
            cfg.seed,
            cfg.jobs,
        )?
    } else {
        let stats = match cfg.suite {
            Suite::JHalf => jhalf(cfg)?,
            Suite::Cocycle => cocycle(cfg)?,
            Suite::Covariance => covariance(cfg)?,
            Suite::ThetaTransform => theta_transform(cfg)?,
            Suite::Poisson => poisson(cfg)?,
            Suite::WeilOps => weil_ops(cfg)?,
        };
        VerificationReport::from_errors(cfg.suite.name(), stats, tol, false, cfg.seed)
    };
    let mut report = report.with_params(cfg.params_json());
    report.command = format!("verify {}", cfg.suite.name());
    if cfg.timing {
        report.runtime_ms = start.elapsed().as_millis() as u64;
    }
    Ok(report)
}

fn random_meta<R: Rng>(rng: &mut R, n: usize) -> Result<MetaElement> {
    let len = rng.random_range(1..=4);
    let word = random_word(rng, n, 1, len, WordOptions::default());
    let g = word
        .iter()
        .try_fold(SymplecticElement::identity(n), |acc, w| Ok::<_, Error>(acc.mul(&w.symplectic()?)))?;
    meta_lift(&g, if rng.random_bool(0.5) { 1 } else { -1 })
}

fn random_omega<R: Rng>(rng: &mut R, n: usize) -> SiegelPoint {
    random_siegel_with(rng, n, 1.0, 0.3)
}

fn rel(a: Complex64, b: Complex64) -> (f64, f64) {
    let d = (a - b).norm();
    (d, d / b.norm())
}

fn jhalf(cfg: &SuiteConfig) -> Result<ErrorStats> {
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let n = cfg.pick_n(t, &[1, 2, 3]);
        let g = random_meta(rng, n)?;
        let omega = random_omega(rng, n);
        let j = j_half(&g, &omega)?;
        Ok(rel(j * j, j_matrix(&g.g, &omega).determinant()))
    })
}

fn cocycle(cfg: &SuiteConfig) -> Result<ErrorStats> {
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let n = cfg.pick_n(t, &[1, 2, 3]);
        let g1 = random_meta(rng, n)?;
        let g2 = random_meta(rng, n)?;
        let omega = random_omega(rng, n);
        let lhs = j_half(&meta_mul(&g1, &g2)?, &omega)?;
        let rhs = j_half(&g1, &siegel_action(&g2.g, &omega)?)? * j_half(&g2, &omega)?;
        Ok(rel(lhs, rhs))
    })
}

const KINDS: [GenKind; 4] = [
    GenKind::Heisenberg,
    GenKind::Translation,
    GenKind::Dilation,
    GenKind::Inversion,
];

fn random_point<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<JacobiPoint> {
    let omega = random_omega(rng, n);
    let z = CMat::from_fn(m, n, |_, _| c(rng.random_range(-1.0..=1.0), rng.random_range(-0.5..=0.5)));
    JacobiPoint::new(omega, z)
}

fn covariance(cfg: &SuiteConfig) -> Result<ErrorStats> {
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let kind = KINDS[t % 4];
        let n = cfg.pick_n(t / 4, &[1, 2]);
        let m = cfg.pick_m(t / 4, &[1, 3]);
        let opts = WordOptions {
            heisenberg: true,
            ..Default::default()
        };
        let w = random_generator(rng, n, m, kind, opts);
        let p = random_point(rng, n, m)?;
        covariance_residual(std::slice::from_ref(&w), &p, &cfg.index_for(m), 8, rng)
    })
}

fn theta_transform(cfg: &SuiteConfig) -> Result<ErrorStats> {
    if let Some(i) = &cfg.index {
        check_unimodular(i)?;
    }
    let opts = WordOptions {
        integral: true,
        heisenberg: true,
        random_sheets: true,
    };
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let n = cfg.pick_n(t, &[1, 2]);
        let m = cfg.pick_m(t, &[1, 3]);
        let index = cfg.index_for(m);
        let word = if t < 4 {
            vec![random_generator(rng, n, m, KINDS[t], opts)]
        } else {
            let len = rng.random_range(1..=5);
            random_word(rng, n, m, len, opts)
        };
        let rho = rho_m_word(&word, &index)?.value;
        let x = word_element(&word, n, m)?;
        let params = ThetaParams::new(index, cfg.truncation_tol)?;
        let p = random_probe(rng, &x)?;
        theta_transform_residual(&x, rho, &p, &params)
    })
}

fn poisson(cfg: &SuiteConfig) -> Result<ErrorStats> {
    if let Some(i) = &cfg.index {
        if !i.is_unimodular() {
            return Err(Error::NonUnimodularM { det: i.det() });
        }
    }
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let n = cfg.pick_n(t, &[1]);
        let m = cfg.pick_m(t, &[1, 3]);
        let p = random_point(rng, n, m)?;
        let (l, r) = poisson_sides(&p.omega, &p.z, &cfg.index_for(m), cfg.truncation_tol, DEFAULT_MAX_RADIUS)?;
        Ok(rel(r.value, l.value))
    })
}

/// Grid size used by the quadrature oracle for `mn` coordinates.
pub fn grid_points(dim: usize) -> Result<usize> {
    match dim {
        1 => Ok(257),
        2 => Ok(129),
        _ => Err(Error::InvalidInput(format!(
            "the grid oracle supports mn <= 2, got {dim}"
        ))),
    }
}

/// Generator of the given kind with `lambda = mu = 0` for the Heisenberg kind.
pub fn parity_generator<R: Rng>(rng: &mut R, n: usize, m: usize, kind: GenKind) -> Result<Generator> {
    let sign = if rng.random_bool(0.5) { 1 } else { -1 };
    match kind {
        GenKind::Heisenberg => {
            let kappa = crate::matcore::random_symmetric(rng, m, 0.5);
            let h = HeisenbergElement::new(RMat::zeros(m, n), RMat::zeros(m, n), kappa)?;
            Generator::principal(GeneratorKind::Heisenberg(h), sign)
        }
        k => Ok(random_generator(rng, n, m, k, WordOptions::default())),
    }
}

/// Even and odd test functions on the oracle grid: a centred Gaussian and
/// the first coordinate times it.
pub fn parity_inputs<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<[GridFunction; 2]> {
    let omega = random_siegel_with(rng, n, 0.5, 0.4);
    let f = covariant_map(&omega, &CMat::zeros(m, n), &IndexMatrix::identity(m))?;
    let np = grid_points(m * n)?;
    let even = GridFunction::sample(m, n, 6.0, np, |x| f.eval(x))?;
    let odd = GridFunction::sample(m, n, 6.0, np, |x| f.eval(x) * x[(0, 0)])?;
    Ok([even, odd])
}

/// Largest parity leakage of the four generator kinds on even and odd inputs.
pub fn parity_leakage<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<f64> {
    let inputs = parity_inputs(rng, n, m)?;
    let index = IndexMatrix::identity(m);
    let mut worst = 0.0f64;
    for kind in KINDS {
        let w = parity_generator(rng, n, m, kind)?;
        for (f, s) in inputs.iter().zip([1.0, -1.0]) {
            let g = weil_action_numeric(&w, f, &index)?;
            worst = worst.max(g.parity_leakage(s));
        }
    }
    Ok(worst)
}

/// Closed-form inversion against the grid quadrature at `n = m = 1`,
/// relative to the largest output sample.
pub fn inversion_agreement<R: Rng>(rng: &mut R) -> Result<f64> {
    let omega = random_siegel_with(rng, 1, 0.5, 0.4);
    let z = CMat::from_element(1, 1, c(rng.random_range(-0.3..=0.3), rng.random_range(-0.1..=0.1)));
    let index = IndexMatrix::identity(1);
    let f = covariant_map(&omega, &z, &index)?;
    let grid = GridFunction::sample(1, 1, 6.0, 257, |x| f.eval(x))?;
    let sign = if rng.random_bool(0.5) { 1 } else { -1 };
    let w = Generator::principal(GeneratorKind::Inversion(1), sign)?;
    let num = weil_action_numeric(&w, &grid, &index)?;
    let exact = weil_action(&w, &f)?;
    let err = (0..grid.len())
        .map(|k| (num.samples[k] - exact.eval(&grid.node(k))).norm())
        .fold(0.0, f64::max);
    Ok(err / num.max_abs())
}

fn weil_ops(cfg: &SuiteConfig) -> Result<ErrorStats> {
    run_trials(cfg.trials(), cfg.seed, cfg.jobs, |t, rng| {
        let n = cfg.n.unwrap_or(1);
        let m = cfg.m.unwrap_or(1);
        let leak = parity_leakage(rng, n, m)?;
        let agree = if t % 2 == 0 { inversion_agreement(rng)? } else { 0.0 };
        let e = leak.max(agree);
        Ok((e, e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quick(suite: Suite, trials: usize) -> VerificationReport {
        let mut cfg = SuiteConfig::new(suite);
        cfg.trials = Some(trials);
        cfg.seed = 7;
        cfg.timing = false;
        run_suite(&cfg).unwrap()
    }

    #[test]
    fn every_suite_passes_briefly() {
        for s in SUITES {
            let r = quick(s, 8);
            assert!(r.pass, "{} {}", s.name(), r.max_rel_err);
            assert_eq!(r.trials, 8);
            assert_eq!(r.command, format!("verify {}", s.name()));
        }
    }

    #[test]
    fn deterministic_reports() {
        let a = quick(Suite::Covariance, 12).to_json(false);
        let b = quick(Suite::Covariance, 12).to_json(false);
        assert_eq!(a, b);
        let mut cfg = SuiteConfig::new(Suite::JHalf);
        cfg.trials = Some(50);
        cfg.timing = false;
        cfg.jobs = 1;
        let one = run_suite(&cfg).unwrap();
        cfg.jobs = 3;
        assert_eq!(one, run_suite(&cfg).unwrap());
    }

    #[test]
    fn counterexample_report() {
        let mut cfg = SuiteConfig::new(Suite::ThetaTransform);
        cfg.counterexample = Some(Counterexample::OddDiagonal);
        cfg.timing = false;
        let r = run_suite(&cfg).unwrap();
        assert!(r.expected_fail && r.pass);
        cfg.suite = Suite::Poisson;
        assert!(run_suite(&cfg).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = SuiteConfig::new(Suite::ThetaTransform);
        cfg.index = Some(IndexMatrix::new(RMat::from_element(1, 1, 2.0)).unwrap());
        assert!(matches!(run_suite(&cfg), Err(Error::NonUnimodularM { .. })));
        let mut cfg = SuiteConfig::new(Suite::JHalf);
        cfg.n = Some(0);
        assert!(run_suite(&cfg).is_err());
    }

    #[test]
    fn parity_on_two_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(parity_leakage(&mut rng, 1, 2).unwrap() < 1e-10);
        assert!(parity_leakage(&mut rng, 2, 1).unwrap() < 1e-10);
    }
}
