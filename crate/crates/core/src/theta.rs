//! Theta series `Θ_M(Ω, Z) = Σ_ξ e^{πiσ(M(ξΩξ^t + 2ξZ^t))}` over integral
//! `m x n` matrices, its character on the integral generators, the
//! transformation check and the Poisson summation identity.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde_json::json;
use std::f64::consts::PI;

use crate::autfactors::j_m_star;
use crate::error::{Error, Result};
use crate::groups::{word_element, Generator, GeneratorKind, JacobiPoint, MetaJacobiElement};
use crate::lattice::{box_sum, certified_sum, GaussianEnvelope, LatticeSum};
use crate::matcore::{
    c, im_part, inverse_with_cond, lambda_min, random_siegel_with, to_complex, CMat, IndexMatrix,
    RMat, SiegelPoint, COND_MAX, I,
};
use crate::report::{run_trials, VerificationReport};
use crate::weilrep::fourier_of_covariant;

pub const DEFAULT_MAX_RADIUS: usize = 64;
/// Probes with `|Θ| <= THETA_FLOOR` are discarded.
pub const THETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    pub index: IndexMatrix,
    pub truncation_tol: f64,
    pub max_radius: usize,
}

impl ThetaParams {
    pub fn new(index: IndexMatrix, truncation_tol: f64) -> Result<Self> {
        if !index.is_integral() {
            return Err(Error::NonIntegralParams("theta series needs an integral index".into()));
        }
        if !(truncation_tol > 0.0 && truncation_tol <= 1e-3) {
            return Err(Error::InvalidInput(format!(
                "truncation tolerance {truncation_tol} outside (0, 1e-3]"
            )));
        }
        Ok(ThetaParams {
            index,
            truncation_tol,
            max_radius: DEFAULT_MAX_RADIUS,
        })
    }

    pub fn with_max_radius(mut self, r: usize) -> Self {
        self.max_radius = r;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaValue {
    pub value: Complex64,
    /// Infinity-norm radius enclosing the summed terms.
    pub radius: usize,
    /// Absolute error bound: the certified truncation tail plus a rounding
    /// estimate.
    pub certified_tol: f64,
    /// Certified bound on the truncation error alone; at most
    /// `truncation_tol * max(1, K)` for the envelope peak `K`.
    pub tail: f64,
    pub terms: usize,
}

impl From<LatticeSum> for ThetaValue {
    fn from(s: LatticeSum) -> Self {
        ThetaValue {
            value: s.value,
            radius: s.certificate.radius,
            certified_tol: s.certified_tol,
            tail: s.certificate.tail,
            terms: s.terms,
        }
    }
}

/// Modulus envelope of `ξ ↦ e^{πiσ(M(ξΩξ^t + 2ξZ^t))}` in the row-major
/// coordinates of `ξ`, with `log_shift` added to the peak.
pub fn theta_envelope(omega: &SiegelPoint, z: &CMat, index: &RMat, log_shift: f64) -> Result<GaussianEnvelope> {
    let y = omega.im();
    let v = im_part(z);
    let yinv = y
        .clone()
        .cholesky()
        .ok_or(Error::ImNotPositiveDefinite { min_eig: lambda_min(&y) })?
        .inverse();
    let vy = &v * &yinv;
    let (m, n) = v.shape();
    let center = DVector::from_fn(m * n, |k, _| -vy[(k / n, k % n)]);
    let log_peak = PI * (index * &vy * v.transpose()).trace() + log_shift;
    Ok(GaussianEnvelope {
        q: index.kronecker(&y),
        center,
        log_peak,
    })
}

/// The quadratic data `(M ⊗ Ω, vec(MZ))` of a term.
struct TermForm {
    q: CMat,
    w: Vec<Complex64>,
}

impl TermForm {
    fn new(omega: &CMat, z: &CMat, index: &RMat) -> Self {
        let mz = to_complex(index) * z;
        let n = z.ncols();
        TermForm {
            q: to_complex(index).kronecker(omega),
            w: (0..mz.len()).map(|k| mz[(k / n, k % n)]).collect(),
        }
    }

    /// Exponent and the sum of the moduli of its partial products.
    fn exponent(&self, v: &[i32]) -> (Complex64, f64) {
        let d = v.len();
        let mut s = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for i in 0..d {
            if v[i] == 0 {
                continue;
            }
            let vi = v[i] as f64;
            let mut row = self.q[(i, i)] * (vi * 0.5);
            let mut rmag = self.q[(i, i)].norm() * vi.abs() * 0.5;
            for j in 0..i {
                row += self.q[(i, j)] * v[j] as f64;
                rmag += self.q[(i, j)].norm() * (v[j] as f64).abs();
            }
            s += (row * 2.0 + self.w[i] * 2.0) * vi;
            mag += (2.0 * rmag + 2.0 * self.w[i].norm()) * vi.abs();
        }
        (s, mag)
    }

    fn term(&self, v: &[i32]) -> Complex64 {
        (I * PI * self.exponent(v).0).exp()
    }

    /// Term with a first-order bound on its evaluation error.
    fn term_with_error(&self, v: &[i32]) -> (Complex64, f64) {
        let (s, mag) = self.exponent(v);
        let t = (I * PI * s).exp();
        let k = 2.0 * v.len() as f64 + 4.0;
        (t, f64::EPSILON * (4.0 + PI * k * mag) * t.norm())
    }
}

fn check_point(omega: &SiegelPoint, z: &CMat, m: usize) -> Result<()> {
    if z.shape() != (m, omega.n()) {
        return Err(Error::ShapeMismatch(format!(
            "Z is {}x{}, expected {m}x{}",
            z.nrows(),
            z.ncols(),
            omega.n()
        )));
    }
    Ok(())
}

/// Radius `R` beyond which the certified tail is below `tol` (relative to
/// `max(1, K)` with `K` the envelope peak).
pub fn truncation_radius(
    index: &IndexMatrix,
    omega: &SiegelPoint,
    z: &CMat,
    tol: f64,
    max_radius: usize,
) -> Result<usize> {
    check_point(omega, z, index.degree())?;
    let env = theta_envelope(omega, z, index.matrix(), 0.0)?;
    Ok(crate::lattice::certify(&env, tol, max_radius)?.radius)
}

/// Certified sum of `e^{πiσ(M(ξΩξ^t + 2ξZ^t))}` for any real positive
/// definite `M`. A diagonal `M` splits the sum into one `n`-dimensional sum
/// per row of `ξ`.
pub fn gaussian_lattice_sum(
    omega: &SiegelPoint,
    z: &CMat,
    index: &RMat,
    tol: f64,
    max_radius: usize,
) -> Result<ThetaValue> {
    check_point(omega, z, index.nrows())?;
    let (lambda, shifted) = reduce_z(omega, z, index);
    let lam = to_complex(&lambda);
    // Σ_ξ f(ξ) = e^{πiσ(M(λΩλ^t + 2λZ^t))} Σ_ξ f_{Z + λΩ + μ}(ξ)
    let e = (to_complex(index) * (&lam * omega.omega() * lam.transpose() + (&lam * z.transpose()).scale(2.0))).trace();
    let pre = (I * PI * e).exp();
    let inner = reduced_lattice_sum(omega, &shifted, index, tol, max_radius)?;
    let rel = f64::EPSILON * (8.0 + 4.0 * PI * e.norm());
    let lmax = lambda.iter().fold(0.0f64, |a, x| a.max(x.abs())) as usize;
    Ok(ThetaValue {
        value: pre * inner.value,
        radius: inner.radius + lmax,
        certified_tol: pre.norm() * (inner.certified_tol + rel * inner.value.norm()),
        tail: pre.norm() * inner.tail,
        terms: inner.terms,
    })
}

/// Integral `λ` (and the shifted `Z + λΩ + μ`) moving the envelope centre
/// into the unit cell; `μ` is used only for integral `M`.
fn reduce_z(omega: &SiegelPoint, z: &CMat, index: &RMat) -> (RMat, CMat) {
    let y = omega.im();
    let (m, n) = z.shape();
    let yinv = match y.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => return (RMat::zeros(m, n), z.clone()),
    };
    let lambda = (im_part(z) * yinv).map(|x| -x.round());
    let mut shifted = z + to_complex(&lambda) * omega.omega();
    if index.iter().all(|&x| is_integer(x)) {
        shifted = shifted.map(|w| c(w.re - w.re.round(), w.im));
    }
    (lambda, shifted)
}

fn reduced_lattice_sum(
    omega: &SiegelPoint,
    z: &CMat,
    index: &RMat,
    tol: f64,
    max_radius: usize,
) -> Result<ThetaValue> {
    let m = index.nrows();
    let diagonal = (0..m).all(|a| (0..m).all(|b| a == b || index[(a, b)] == 0.0));
    if m == 1 || !diagonal {
        return full_lattice_sum(omega, z, index, tol, max_radius);
    }
    let env = theta_envelope(omega, z, index, 0.0)?;
    let target = tol * env.log_peak.max(0.0).exp();
    let mut factor_tol = tol / (2.0 * m as f64);
    for _ in 0..6 {
        let factor_tol_eff = factor_tol.max(crate::lattice::ROUNDOFF_FLOOR);
        let mut value = c(1.0, 0.0);
        let mut upper = 1.0;
        let mut upper_tail = 1.0;
        let mut lower = 1.0;
        let mut radius = 0;
        let mut terms = 0;
        for a in 0..m {
            let row = z.rows(a, 1).into_owned();
            let f = full_lattice_sum(
                omega,
                &row,
                &RMat::from_element(1, 1, index[(a, a)]),
                factor_tol_eff,
                max_radius,
            )?;
            value *= f.value;
            upper *= f.value.norm() + f.certified_tol;
            upper_tail *= f.value.norm() + f.tail;
            lower *= f.value.norm();
            radius = radius.max(f.radius);
            terms += f.terms;
        }
        let tail = upper_tail - lower;
        if tail <= target {
            return Ok(ThetaValue {
                value,
                radius,
                certified_tol: (upper - lower) + 2.0 * m as f64 * f64::EPSILON * value.norm(),
                tail,
                terms,
            });
        }
        if factor_tol <= crate::lattice::ROUNDOFF_FLOOR {
            break;
        }
        factor_tol *= 0.5 * target / tail;
    }
    full_lattice_sum(omega, z, index, tol, max_radius)
}

fn full_lattice_sum(
    omega: &SiegelPoint,
    z: &CMat,
    index: &RMat,
    tol: f64,
    max_radius: usize,
) -> Result<ThetaValue> {
    let env = theta_envelope(omega, z, index, 0.0)?;
    let form = TermForm::new(omega.omega(), z, index);
    Ok(certified_sum(&env, tol, max_radius, |v| form.term_with_error(v))?.into())
}

pub fn theta_eval(p: &JacobiPoint, params: &ThetaParams) -> Result<ThetaValue> {
    gaussian_lattice_sum(
        &p.omega,
        &p.z,
        params.index.matrix(),
        params.truncation_tol,
        params.max_radius,
    )
}

/// Plain box sum over `max |ξ_ij| <= radius`.
pub fn theta_eval_box(p: &JacobiPoint, index: &IndexMatrix, radius: usize) -> Result<Complex64> {
    check_point(&p.omega, &p.z, index.degree())?;
    let form = TermForm::new(p.omega.omega(), &p.z, index.matrix());
    Ok(box_sum(p.m() * p.n(), radius, |v| form.term(v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterValue {
    pub value: Complex64,
    /// Largest distance of a probe ratio from `value` (zero for closed forms).
    pub deviation: f64,
    pub probes: usize,
}

impl CharacterValue {
    fn exact(value: Complex64) -> Self {
        CharacterValue {
            value,
            deviation: 0.0,
            probes: 0,
        }
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

fn all_integer(a: &RMat) -> bool {
    a.iter().all(|&x| is_integer(x))
}

/// Integrality hypotheses of the theta transformation law on a generator.
pub fn check_admissible(w: &Generator) -> Result<()> {
    match &w.kind {
        GeneratorKind::Heisenberg(h) => {
            if !h.is_integral() {
                return Err(Error::NonIntegralParams("lambda, mu, kappa must be integral".into()));
            }
        }
        GeneratorKind::Translation(b) => {
            if !all_integer(b) {
                return Err(Error::NonIntegralParams("b must be integral".into()));
            }
            if (0..b.nrows()).any(|i| b[(i, i)].round() as i64 % 2 != 0) {
                return Err(Error::OddDiagonalB);
            }
        }
        GeneratorKind::Dilation(a) => {
            if !all_integer(a) || !is_integer(a.determinant()) || (a.determinant().abs() - 1.0).abs() > 1e-9 {
                return Err(Error::NonIntegralParams("alpha must lie in GL(n, Z)".into()));
            }
        }
        GeneratorKind::Inversion(_) => {}
    }
    Ok(())
}

/// The character value of a generator without checking admissibility.
pub fn rho_formula(w: &Generator, index: &IndexMatrix) -> Complex64 {
    let em = w.sheet.powi(index.degree() as i32);
    match &w.kind {
        GeneratorKind::Heisenberg(h) => {
            let s = (index.matrix() * (&h.kappa + &h.mu * h.lambda.transpose())).trace();
            em * Complex64::from_polar(1.0, -PI * s)
        }
        _ => em,
    }
}

pub fn rho_m_generator(w: &Generator, index: &IndexMatrix) -> Result<CharacterValue> {
    check_admissible(w)?;
    Ok(CharacterValue::exact(rho_formula(w, index)))
}

pub fn rho_m_word(word: &[Generator], index: &IndexMatrix) -> Result<CharacterValue> {
    let mut v = c(1.0, 0.0);
    for w in word {
        v *= rho_m_generator(w, index)?.value;
    }
    Ok(CharacterValue::exact(v))
}

/// Hypotheses of the transformation law on the index: integral, `det M = 1`,
/// `m` odd.
pub fn check_unimodular(index: &IndexMatrix) -> Result<()> {
    if !index.is_unimodular() {
        return Err(Error::NonUnimodularM { det: index.det() });
    }
    if index.degree() % 2 == 0 {
        return Err(Error::EvenM { m: index.degree() });
    }
    Ok(())
}

fn component_median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// `Θ(x·p) / (J*(x, p) Θ(p))`.
pub fn character_ratio(x: &MetaJacobiElement, p: &JacobiPoint, params: &ThetaParams) -> Result<Option<Complex64>> {
    let t0 = theta_eval(p, params)?.value;
    if t0.norm() <= THETA_FLOOR {
        return Ok(None);
    }
    let q = x.act(p)?;
    let t1 = theta_eval(&q, params)?.value;
    let js = j_m_star(x, p, &params.index)?;
    Ok(Some(t1 / (js * t0)))
}

/// Median of the probe ratios, componentwise.
pub fn derived_character(
    x: &MetaJacobiElement,
    params: &ThetaParams,
    probes: &[JacobiPoint],
) -> Result<CharacterValue> {
    check_unimodular(&params.index)?;
    let mut ratios = Vec::new();
    for p in probes {
        if let Some(r) = character_ratio(x, p, params)? {
            ratios.push(r);
        }
    }
    if ratios.is_empty() {
        return Err(Error::ThetaNearZero);
    }
    let value = c(
        component_median(ratios.iter().map(|r| r.re).collect()),
        component_median(ratios.iter().map(|r| r.im).collect()),
    );
    let deviation = ratios.iter().map(|r| (r - value).norm()).fold(0.0, f64::max);
    Ok(CharacterValue {
        value,
        deviation,
        probes: ratios.len(),
    })
}

/// Probe point with `Im Ω ⪰ 0.5 I`, redrawn until the image under `x` keeps
/// `λ_min(Im) >= 0.2` (64 tries; the best draw is kept otherwise).
pub fn random_probe<R: Rng>(rng: &mut R, x: &MetaJacobiElement) -> Result<JacobiPoint> {
    let (n, m) = (x.n(), x.m());
    let mut best: Option<(f64, JacobiPoint)> = None;
    for _ in 0..64 {
        let omega = random_siegel_with(rng, n, 0.5, 0.5);
        let z = CMat::from_fn(m, n, |_, _| {
            c(rng.random_range(-0.5..=0.5), rng.random_range(-0.25..=0.25))
        });
        let p = JacobiPoint::new(omega, z)?;
        let image = lambda_min(&x.act(&p)?.omega.im());
        if image >= 0.2 {
            return Ok(p);
        }
        if best.as_ref().is_none_or(|(b, _)| image > *b) {
            best = Some((image, p));
        }
    }
    Ok(best.expect("at least one draw").1)
}

/// Draws `count` probes and evaluates [`derived_character`], retrying with
/// fresh probes up to 10 times on [`Error::ThetaNearZero`].
pub fn derived_character_random<R: Rng>(
    x: &MetaJacobiElement,
    params: &ThetaParams,
    count: usize,
    rng: &mut R,
) -> Result<CharacterValue> {
    let mut last = Error::ThetaNearZero;
    for _ in 0..10 {
        let probes = (0..count)
            .map(|_| random_probe(rng, x))
            .collect::<Result<Vec<_>>>()?;
        match derived_character(x, params, &probes) {
            Err(Error::ThetaNearZero) => last = Error::ThetaNearZero,
            r => return r,
        }
    }
    Err(last)
}

/// `(|Θ(x·p) - ρ J* Θ(p)|, the same relative to |J* Θ(p)|)`.
pub fn theta_transform_residual(
    x: &MetaJacobiElement,
    rho: Complex64,
    p: &JacobiPoint,
    params: &ThetaParams,
) -> Result<(f64, f64)> {
    let t0 = theta_eval(p, params)?.value;
    let t1 = theta_eval(&x.act(p)?, params)?.value;
    let js = j_m_star(x, p, &params.index)?;
    let expect = rho * js * t0;
    let abs = (t1 - expect).norm();
    Ok((abs, abs / expect.norm()))
}

/// Transformation check of a word at `trials` random probes, with `rho`
/// supplied by the caller and no hypothesis checks.
pub fn theta_transform_report(
    word: &[Generator],
    rho: Complex64,
    params: &ThetaParams,
    trials: usize,
    tol: f64,
    seed: u64,
    jobs: usize,
    expected_fail: bool,
) -> Result<VerificationReport> {
    let n = word.first().map(|w| w.n()).unwrap_or(1);
    let x = word_element(word, n, params.index.degree())?;
    let stats = run_trials(trials, seed, jobs, |_, rng| {
        let p = random_probe(rng, &x)?;
        theta_transform_residual(&x, rho, &p, params)
    })?;
    Ok(VerificationReport::from_errors("theta-transform", stats, tol, expected_fail, seed))
}

pub fn verify_theta_transform(
    word: &[Generator],
    params: &ThetaParams,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport> {
    check_unimodular(&params.index)?;
    let rho = rho_m_word(word, &params.index)?.value;
    theta_transform_report(word, rho, params, trials, tol, seed, 0, false)
}

/// Counterexamples to the hypotheses of the transformation law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    /// `t(I_n)`, whose `b` has odd diagonal entries.
    OddDiagonal,
    /// The inversion with `M = diag(2, 1, ..., 1)`.
    Det2,
}

impl Counterexample {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "odd-diagonal" => Some(Counterexample::OddDiagonal),
            "det2" | "det-2" => Some(Counterexample::Det2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Counterexample::OddDiagonal => "odd-diagonal",
            Counterexample::Det2 => "det2",
        }
    }

    /// The offending word and index, with `ρ` taken from the generator
    /// formulas as if the hypotheses held.
    pub fn instance(self, n: usize, m: usize) -> Result<(Vec<Generator>, IndexMatrix)> {
        match self {
            Counterexample::OddDiagonal => Ok((
                vec![Generator::principal(GeneratorKind::Translation(RMat::identity(n, n)), 1)?],
                IndexMatrix::identity(m),
            )),
            Counterexample::Det2 => {
                let mut mm = RMat::identity(m, m);
                mm[(0, 0)] = 2.0;
                Ok((
                    vec![Generator::principal(GeneratorKind::Inversion(n), 1)?],
                    IndexMatrix::new(mm)?,
                ))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn counterexample_theta_transform(
    kind: Counterexample,
    n: usize,
    m: usize,
    trials: usize,
    tol: f64,
    truncation_tol: f64,
    seed: u64,
    jobs: usize,
) -> Result<VerificationReport> {
    let (word, index) = kind.instance(n, m)?;
    let rho = word.iter().map(|w| rho_formula(w, &index)).product();
    let params = ThetaParams::new(index, truncation_tol)?;
    let r = theta_transform_report(&word, rho, &params, trials, tol, seed, jobs, true)?;
    Ok(r.with_params(json!({"n": n, "m": m, "counterexample": kind.name()})))
}

/// Both sides of `Σ_A F_{Ω,Z}(A) = Σ_A F̂_{Ω,Z}(M^{-1}A)` where the right
/// side uses [`fourier_of_covariant`] termwise.
pub fn poisson_sides(
    omega: &SiegelPoint,
    z: &CMat,
    index: &IndexMatrix,
    tol: f64,
    max_radius: usize,
) -> Result<(ThetaValue, ThetaValue)> {
    let lhs = gaussian_lattice_sum(omega, z, index.matrix(), tol, max_radius)?;
    let (oinv, cond) =
        inverse_with_cond(omega.omega()).ok_or(Error::SingularOmega { cond: f64::INFINITY })?;
    if cond > COND_MAX {
        return Err(Error::SingularOmega { cond });
    }
    // the dual side is itself a Gaussian lattice sum of index M^{-1}
    let minv = index.inverse();
    let dual_omega = SiegelPoint::from_action(-&oinv)?;
    let dual_z = index.complex() * z * &oinv;
    let pre = fourier_of_covariant(omega, z, index, &CMat::zeros(z.nrows(), z.ncols()))?;
    let env = theta_envelope(&dual_omega, &dual_z, &minv, pre.norm().ln())?;
    let minv_c = to_complex(&minv);
    let (m, n) = z.shape();
    let rhs = certified_sum(&env, tol, max_radius, |v| {
        let a = CMat::from_fn(m, n, |i, j| c(v[i * n + j] as f64, 0.0));
        let t = fourier_of_covariant(omega, z, index, &(&minv_c * a)).expect("validated inputs");
        (t, 64.0 * f64::EPSILON * t.norm())
    })?;
    Ok((lhs, rhs.into()))
}

/// Poisson identity at one point; requires `det M = 1`.
pub fn verify_poisson(omega: &SiegelPoint, z: &CMat, index: &IndexMatrix, tol: f64) -> Result<VerificationReport> {
    if !index.is_unimodular() {
        return Err(Error::NonUnimodularM { det: index.det() });
    }
    let sum_tol = (tol * 1e-2).max(crate::lattice::ROUNDOFF_FLOOR * 4.0);
    let (l, r) = poisson_sides(omega, z, index, sum_tol, DEFAULT_MAX_RADIUS)?;
    let abs = (l.value - r.value).norm();
    Ok(VerificationReport::single("poisson", 1, abs, abs / l.value.norm(), tol))
}
