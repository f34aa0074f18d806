//! Symplectic, Heisenberg and Jacobi groups, their actions on the Siegel and
//! Siegel-Jacobi spaces, and the metaplectic cover anchored at `i I_n`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    det_sqrt_at, inverse_with_cond, principal_sqrt, random_symmetric, to_complex, CMat,
    DetArg, MatrixJson, RMat, SiegelPoint, COND_MAX,
};

const SYMPLECTIC_TOL: f64 = 1e-10;
const HEIS_TOL: f64 = 1e-12;
const SHEET_TOL: f64 = 1e-10;

fn j_form(n: usize) -> RMat {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `max |g^t J g - J|` entrywise.
pub fn symplectic_residual(g: &RMat) -> f64 {
    let n = g.nrows() / 2;
    let j = j_form(n);
    (g.transpose() * &j * g - j).amax()
}

/// Real `2n x 2n` matrix with `g^t J_n g = J_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticElement {
    g: RMat,
}

impl SymplecticElement {
    /// Validates `g`. The residual is measured relative to `max(1, |g|_max^2)`
    /// so that products of moderately large generators are not rejected.
    pub fn new(g: RMat) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() % 2 != 0 || g.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "symplectic matrix must be 2n x 2n, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let residual = symplectic_residual(&g);
        let scale = g.amax().powi(2).max(1.0);
        if residual > SYMPLECTIC_TOL * scale {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(SymplecticElement { g })
    }

    pub fn identity(n: usize) -> Self {
        SymplecticElement {
            g: RMat::identity(2 * n, 2 * n),
        }
    }

    /// `t(b) = [[I, b], [0, I]]` with `b` symmetric.
    pub fn translation(b: &RMat) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n || n == 0 {
            return Err(Error::ShapeMismatch("b must be square".into()));
        }
        let max_asym = (b - b.transpose()).amax();
        if max_asym > HEIS_TOL * b.amax().max(1.0) {
            return Err(Error::NotSymmetric { max_asym });
        }
        let mut g = RMat::identity(2 * n, 2 * n);
        g.view_mut((0, n), (n, n)).copy_from(b);
        Ok(SymplecticElement { g })
    }

    /// `g(alpha) = diag(alpha^t, alpha^{-1})`.
    pub fn dilation(alpha: &RMat) -> Result<Self> {
        let n = alpha.nrows();
        if alpha.ncols() != n || n == 0 {
            return Err(Error::ShapeMismatch("alpha must be square".into()));
        }
        let inv = alpha
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("alpha is not invertible".into()))?;
        let mut g = RMat::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&alpha.transpose());
        g.view_mut((n, n), (n, n)).copy_from(&inv);
        Ok(SymplecticElement { g })
    }

    /// `sigma_n = [[0, -I], [I, 0]]`.
    pub fn inversion(n: usize) -> Self {
        let mut g = RMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            g[(i, n + i)] = -1.0;
            g[(n + i, i)] = 1.0;
        }
        SymplecticElement { g }
    }

    pub fn n(&self) -> usize {
        self.g.nrows() / 2
    }

    pub fn matrix(&self) -> &RMat {
        &self.g
    }

    fn block(&self, r: usize, c: usize) -> RMat {
        let n = self.n();
        self.g.view((r * n, c * n), (n, n)).into_owned()
    }

    pub fn a(&self) -> RMat {
        self.block(0, 0)
    }
    pub fn b(&self) -> RMat {
        self.block(0, 1)
    }
    pub fn c(&self) -> RMat {
        self.block(1, 0)
    }
    pub fn d(&self) -> RMat {
        self.block(1, 1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        SymplecticElement {
            g: &self.g * &other.g,
        }
    }

    /// `g^{-1} = [[D^t, -B^t], [-C^t, A^t]]`.
    pub fn inv(&self) -> Self {
        let n = self.n();
        let mut g = RMat::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&self.d().transpose());
        g.view_mut((0, n), (n, n)).copy_from(&(-self.b().transpose()));
        g.view_mut((n, 0), (n, n)).copy_from(&(-self.c().transpose()));
        g.view_mut((n, n), (n, n)).copy_from(&self.a().transpose());
        SymplecticElement { g }
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.g)
    }
}

/// `(lambda, mu; kappa)` in the Heisenberg group, composition law `∘`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergElement {
    pub lambda: RMat,
    pub mu: RMat,
    pub kappa: RMat,
}

impl HeisenbergElement {
    pub fn new(lambda: RMat, mu: RMat, kappa: RMat) -> Result<Self> {
        let (m, n) = lambda.shape();
        if mu.shape() != (m, n) || kappa.shape() != (m, m) || m == 0 || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "lambda {:?}, mu {:?}, kappa {:?}",
                lambda.shape(),
                mu.shape(),
                kappa.shape()
            )));
        }
        if lambda.iter().chain(mu.iter()).chain(kappa.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let s = &kappa + &mu * lambda.transpose();
        let residual = (&s - s.transpose()).amax();
        if residual > HEIS_TOL * s.amax().max(1.0) {
            return Err(Error::HeisenbergNotSymmetric { residual });
        }
        Ok(HeisenbergElement { lambda, mu, kappa })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        HeisenbergElement {
            lambda: RMat::zeros(m, n),
            mu: RMat::zeros(m, n),
            kappa: RMat::zeros(m, m),
        }
    }

    pub fn m(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn n(&self) -> usize {
        self.lambda.ncols()
    }

    /// Element whose bracket coordinates are `[lambda, mu; kappa]`.
    pub fn from_bracket(lambda: RMat, mu: RMat, kappa: RMat) -> Result<Self> {
        let k = &kappa - &mu * lambda.transpose();
        Self::new(lambda, mu, k)
    }

    /// Bracket coordinates `kappa + mu lambda^t`.
    pub fn to_bracket(&self) -> (RMat, RMat, RMat) {
        (
            self.lambda.clone(),
            self.mu.clone(),
            &self.kappa + &self.mu * self.lambda.transpose(),
        )
    }

    pub fn is_integral(&self) -> bool {
        let int = |a: &RMat| a.iter().all(|x| (x - x.round()).abs() <= 1e-12);
        int(&self.lambda) && int(&self.mu) && int(&self.kappa)
    }
}

pub fn heis_mul(h1: &HeisenbergElement, h2: &HeisenbergElement) -> Result<HeisenbergElement> {
    if h1.lambda.shape() != h2.lambda.shape() {
        return Err(Error::ShapeMismatch("Heisenberg shapes differ".into()));
    }
    Ok(HeisenbergElement {
        lambda: &h1.lambda + &h2.lambda,
        mu: &h1.mu + &h2.mu,
        kappa: &h1.kappa + &h2.kappa + &h1.lambda * h2.mu.transpose()
            - &h1.mu * h2.lambda.transpose(),
    })
}

pub fn heis_inv(h: &HeisenbergElement) -> HeisenbergElement {
    HeisenbergElement {
        lambda: -&h.lambda,
        mu: -&h.mu,
        kappa: -&h.kappa + &h.lambda * h.mu.transpose() - &h.mu * h.lambda.transpose(),
    }
}

/// `⋄` product in bracket coordinates.
pub fn bracket_mul(
    a: (&RMat, &RMat, &RMat),
    b: (&RMat, &RMat, &RMat),
) -> (RMat, RMat, RMat) {
    let (l, m, k) = a;
    let (l0, m0, k0) = b;
    (
        l + l0,
        m + m0,
        k + k0 + l * m0.transpose() + m0 * l.transpose(),
    )
}

/// Siegel-Jacobi point `(Omega, Z)` with `Z` an `m x n` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPoint {
    pub omega: SiegelPoint,
    pub z: CMat,
}

impl JacobiPoint {
    pub fn new(omega: SiegelPoint, z: CMat) -> Result<Self> {
        if z.ncols() != omega.n() || z.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "Z is {}x{} but Omega has degree {}",
                z.nrows(),
                z.ncols(),
                omega.n()
            )));
        }
        if !crate::matcore::is_finite(&z) {
            return Err(Error::NonFinite);
        }
        Ok(JacobiPoint { omega, z })
    }

    pub fn n(&self) -> usize {
        self.omega.n()
    }

    pub fn m(&self) -> usize {
        self.z.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiElement {
    pub g: SymplecticElement,
    pub h: HeisenbergElement,
}

impl JacobiElement {
    pub fn new(g: SymplecticElement, h: HeisenbergElement) -> Result<Self> {
        if g.n() != h.n() {
            return Err(Error::ShapeMismatch("degree of g and h differ".into()));
        }
        Ok(JacobiElement { g, h })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        JacobiElement {
            g: SymplecticElement::identity(n),
            h: HeisenbergElement::identity(m, n),
        }
    }
}

/// `(lambda, mu) g'` split back into its two `m x n` halves.
fn twist(h: &HeisenbergElement, g2: &SymplecticElement) -> (RMat, RMat) {
    let (a, b, c, d) = (g2.a(), g2.b(), g2.c(), g2.d());
    (
        &h.lambda * a + &h.mu * c,
        &h.lambda * b + &h.mu * d,
    )
}

fn jacobi_heis_part(
    h1: &HeisenbergElement,
    g2: &SymplecticElement,
    h2: &HeisenbergElement,
) -> HeisenbergElement {
    let (lt, mt) = twist(h1, g2);
    HeisenbergElement {
        kappa: &h1.kappa + &h2.kappa + &lt * h2.mu.transpose() - &mt * h2.lambda.transpose(),
        lambda: lt + &h2.lambda,
        mu: mt + &h2.mu,
    }
}

pub fn jacobi_mul(x1: &JacobiElement, x2: &JacobiElement) -> Result<JacobiElement> {
    if x1.g.n() != x2.g.n() || x1.h.m() != x2.h.m() {
        return Err(Error::ShapeMismatch("Jacobi elements differ in (n, m)".into()));
    }
    Ok(JacobiElement {
        g: x1.g.mul(&x2.g),
        h: jacobi_heis_part(&x1.h, &x2.g, &x2.h),
    })
}

/// `J(g, Omega) = C Omega + D` together with its inverse, rejecting
/// numerically singular cases.
pub(crate) fn j_and_inverse(g: &SymplecticElement, omega: &SiegelPoint) -> Result<(CMat, CMat)> {
    let j = to_complex(&g.c()) * omega.omega() + to_complex(&g.d());
    let (inv, cond) = inverse_with_cond(&j).ok_or(Error::SingularJ { cond: f64::INFINITY })?;
    if cond > COND_MAX {
        return Err(Error::SingularJ { cond });
    }
    Ok((j, inv))
}

pub fn siegel_action(g: &SymplecticElement, omega: &SiegelPoint) -> Result<SiegelPoint> {
    if g.n() != omega.n() {
        return Err(Error::ShapeMismatch("degree of g and Omega differ".into()));
    }
    let (_, jinv) = j_and_inverse(g, omega)?;
    let num = to_complex(&g.a()) * omega.omega() + to_complex(&g.b());
    SiegelPoint::from_action(num * jinv)
}

fn jacobi_action_parts(
    g: &SymplecticElement,
    h: &HeisenbergElement,
    p: &JacobiPoint,
) -> Result<JacobiPoint> {
    if g.n() != p.n() || h.n() != p.n() || h.m() != p.m() {
        return Err(Error::ShapeMismatch("element and point differ in (n, m)".into()));
    }
    let (_, jinv) = j_and_inverse(g, &p.omega)?;
    let num = to_complex(&g.a()) * p.omega.omega() + to_complex(&g.b());
    let omega = SiegelPoint::from_action(num * &jinv)?;
    let x = &p.z + to_complex(&h.lambda) * p.omega.omega() + to_complex(&h.mu);
    Ok(JacobiPoint { omega, z: x * jinv })
}

pub fn jacobi_action(x: &JacobiElement, p: &JacobiPoint) -> Result<JacobiPoint> {
    jacobi_action_parts(&x.g, &x.h, p)
}

fn det_j(g: &SymplecticElement, omega: &SiegelPoint) -> Result<Complex64> {
    let (j, _) = j_and_inverse(g, omega)?;
    Ok(j.determinant())
}

/// `alpha_Omega(g) = det J(g, Omega) / |det J(g, Omega)|`.
pub fn alpha_factor(omega: &SiegelPoint, g: &SymplecticElement) -> Result<Complex64> {
    let d = det_j(g, omega)?;
    Ok(d / d.norm())
}

fn domain(e: Error) -> Error {
    match e {
        Error::ReNotPositiveDefinite { min_eig } => Error::DomainViolation(format!(
            "real part has smallest eigenvalue {min_eig:e}"
        )),
        other => other,
    }
}

/// The unit-modulus factor
/// `det^{-1/2}((g Omega' - conj(g Omega)) / 2i) det^{1/2}((Omega' - conj Omega) / 2i)
///  |det J(g, Omega')|^{-1/2} |det J(g, Omega)|^{-1/2}`.
pub fn epsilon_factor(
    g: &SymplecticElement,
    omega_prime: &SiegelPoint,
    omega: &SiegelPoint,
) -> Result<Complex64> {
    let gp = siegel_action(g, omega_prime)?;
    let go = siegel_action(g, omega)?;
    let top = det_sqrt_at(DetArg::Pair { prime: &gp, base: &go }, -1).map_err(domain)?;
    let bottom = det_sqrt_at(
        DetArg::Pair {
            prime: omega_prime,
            base: omega,
        },
        1,
    )
    .map_err(domain)?;
    let mag = (det_j(g, omega_prime)?.norm() * det_j(g, omega)?.norm()).sqrt();
    Ok(top * bottom / mag)
}

/// `beta_Omega(g1, g2) = epsilon(g1; Omega, g2 Omega)`.
pub fn beta_cocycle(
    omega: &SiegelPoint,
    g1: &SymplecticElement,
    g2: &SymplecticElement,
) -> Result<Complex64> {
    let g2o = siegel_action(g2, omega)?;
    epsilon_factor(g1, omega, &g2o)
}

/// Element `(g, epsilon)` of the cover `G_*` with `epsilon^2 = alpha_{iI}(g)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaElement {
    pub g: SymplecticElement,
    pub epsilon: Complex64,
}

pub fn sheet_residual(g: &SymplecticElement, epsilon: Complex64) -> Result<f64> {
    let a = alpha_factor(&SiegelPoint::base(g.n()), g)?;
    Ok((epsilon * epsilon * a - 1.0).norm().max((epsilon.norm() - 1.0).abs()))
}

impl MetaElement {
    pub fn new(g: SymplecticElement, epsilon: Complex64) -> Result<Self> {
        let residual = sheet_residual(&g, epsilon)?;
        if residual > SHEET_TOL {
            return Err(Error::InvalidSheet { residual });
        }
        Ok(MetaElement { g, epsilon })
    }

    pub fn identity(n: usize) -> Self {
        MetaElement {
            g: SymplecticElement::identity(n),
            epsilon: Complex64::new(1.0, 0.0),
        }
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// Same base element on the other sheet.
    pub fn flipped(&self) -> Self {
        MetaElement {
            g: self.g.clone(),
            epsilon: -self.epsilon,
        }
    }

    pub fn sheet_residual(&self) -> f64 {
        sheet_residual(&self.g, self.epsilon).unwrap_or(f64::INFINITY)
    }
}

/// `(g1 g2, eps1 eps2 beta_{iI}(g1, g2))`, renormalized to unit modulus.
pub fn meta_mul(a: &MetaElement, b: &MetaElement) -> Result<MetaElement> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch("degrees differ".into()));
    }
    let beta = beta_cocycle(&SiegelPoint::base(a.n()), &a.g, &b.g)?;
    let e = a.epsilon * b.epsilon * beta;
    Ok(MetaElement {
        g: a.g.mul(&b.g),
        epsilon: e / e.norm(),
    })
}

/// `epsilon = sign * principal_sqrt(alpha_{iI}(g)^{-1})`.
pub fn meta_lift(g: &SymplecticElement, sign: i8) -> Result<MetaElement> {
    let a = alpha_factor(&SiegelPoint::base(g.n()), g)?;
    let s = if sign < 0 { -1.0 } else { 1.0 };
    Ok(MetaElement {
        g: g.clone(),
        epsilon: principal_sqrt(a.inv()) * s,
    })
}

/// Element of `G_* ⋉ H` acting on the Siegel-Jacobi space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaJacobiElement {
    pub base: MetaElement,
    pub h: HeisenbergElement,
}

impl MetaJacobiElement {
    pub fn new(base: MetaElement, h: HeisenbergElement) -> Result<Self> {
        if base.n() != h.n() {
            return Err(Error::ShapeMismatch("degree of g and h differ".into()));
        }
        Ok(MetaJacobiElement { base, h })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        MetaJacobiElement {
            base: MetaElement::identity(n),
            h: HeisenbergElement::identity(m, n),
        }
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> usize {
        self.h.m()
    }

    pub fn jacobi(&self) -> JacobiElement {
        JacobiElement {
            g: self.base.g.clone(),
            h: self.h.clone(),
        }
    }

    pub fn flipped(&self) -> Self {
        MetaJacobiElement {
            base: self.base.flipped(),
            h: self.h.clone(),
        }
    }

    pub fn act(&self, p: &JacobiPoint) -> Result<JacobiPoint> {
        jacobi_action_parts(&self.base.g, &self.h, p)
    }
}

pub fn meta_jacobi_mul(x1: &MetaJacobiElement, x2: &MetaJacobiElement) -> Result<MetaJacobiElement> {
    if x1.n() != x2.n() || x1.m() != x2.m() {
        return Err(Error::ShapeMismatch("elements differ in (n, m)".into()));
    }
    Ok(MetaJacobiElement {
        base: meta_mul(&x1.base, &x2.base)?,
        h: jacobi_heis_part(&x1.h, &x2.base.g, &x2.h),
    })
}

/// The generators `h(lambda, mu; kappa)`, `t(b)`, `g(alpha)`, `sigma_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    Heisenberg(HeisenbergElement),
    Translation(RMat),
    Dilation(RMat),
    Inversion(usize),
}

/// A generator together with its sheet label.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub sheet: Complex64,
}

impl Generator {
    /// Validates the sheet: `±1` over Heisenberg and translation elements,
    /// `epsilon^2 = sign det alpha` over dilations, `epsilon^2 = (-i)^n`
    /// over the inversion.
    pub fn new(kind: GeneratorKind, sheet: Complex64) -> Result<Self> {
        let g = Generator { kind, sheet };
        let residual = sheet_residual(&g.symplectic()?, sheet)?;
        if residual > SHEET_TOL {
            return Err(Error::InvalidSheet { residual });
        }
        Ok(g)
    }

    /// Generator on its principal sheet (`sign = +1`) or the other one.
    pub fn principal(kind: GeneratorKind, sign: i8) -> Result<Self> {
        let g = Generator {
            kind,
            sheet: Complex64::new(1.0, 0.0),
        };
        let lift = meta_lift(&g.symplectic()?, sign)?;
        Ok(Generator {
            kind: g.kind,
            sheet: lift.epsilon,
        })
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            GeneratorKind::Heisenberg(h) => h.n(),
            GeneratorKind::Translation(b) => b.nrows(),
            GeneratorKind::Dilation(a) => a.nrows(),
            GeneratorKind::Inversion(n) => *n,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            GeneratorKind::Heisenberg(_) => "heisenberg",
            GeneratorKind::Translation(_) => "translation",
            GeneratorKind::Dilation(_) => "dilation",
            GeneratorKind::Inversion(_) => "inversion",
        }
    }

    pub fn symplectic(&self) -> Result<SymplecticElement> {
        match &self.kind {
            GeneratorKind::Heisenberg(h) => Ok(SymplecticElement::identity(h.n())),
            GeneratorKind::Translation(b) => SymplecticElement::translation(b),
            GeneratorKind::Dilation(a) => SymplecticElement::dilation(a),
            GeneratorKind::Inversion(n) => Ok(SymplecticElement::inversion(*n)),
        }
    }

    pub fn meta(&self) -> Result<MetaElement> {
        Ok(MetaElement {
            g: self.symplectic()?,
            epsilon: self.sheet,
        })
    }

    pub fn to_element(&self, m: usize) -> Result<MetaJacobiElement> {
        let base = self.meta()?;
        let h = match &self.kind {
            GeneratorKind::Heisenberg(h) => {
                if h.m() != m {
                    return Err(Error::ShapeMismatch(format!(
                        "Heisenberg generator has m = {} but m = {m} requested",
                        h.m()
                    )));
                }
                h.clone()
            }
            _ => HeisenbergElement::identity(m, base.n()),
        };
        Ok(MetaJacobiElement { base, h })
    }

    pub fn flipped(&self) -> Self {
        Generator {
            kind: self.kind.clone(),
            sheet: -self.sheet,
        }
    }
}

/// Product of the meta-Jacobi lifts of a word, left to right.
pub fn word_element(word: &[Generator], n: usize, m: usize) -> Result<MetaJacobiElement> {
    let mut acc = MetaJacobiElement::identity(n, m);
    for w in word {
        if w.n() != n {
            return Err(Error::ShapeMismatch("generator degree differs".into()));
        }
        acc = meta_jacobi_mul(&acc, &w.to_element(m)?)?;
    }
    Ok(acc)
}

/// Parameter regime for random generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordOptions {
    /// Integral parameters: `b` with even diagonal, `alpha` in `GL(n, Z)`,
    /// integral Heisenberg triples.
    pub integral: bool,
    /// Whether Heisenberg generators may appear.
    pub heisenberg: bool,
    /// Draw either sheet over each generator (otherwise principal).
    pub random_sheets: bool,
}

impl Default for WordOptions {
    fn default() -> Self {
        WordOptions {
            integral: false,
            heisenberg: false,
            random_sheets: true,
        }
    }
}

/// Kind selector for [`random_generator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Heisenberg,
    Translation,
    Dilation,
    Inversion,
}

fn random_int_symmetric<R: Rng>(rng: &mut R, n: usize, even_diag: bool) -> RMat {
    let mut b = RMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j && even_diag {
                2.0 * rng.random_range(-1i32..=1) as f64
            } else {
                rng.random_range(-1i32..=1) as f64
            };
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

fn random_gl_z<R: Rng>(rng: &mut R, n: usize) -> RMat {
    let mut a = RMat::identity(n, n);
    if n > 1 {
        for _ in 0..2 {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut e = RMat::identity(n, n);
            e[(i, j)] = s;
            a = e * a;
        }
    }
    for i in 0..n {
        if rng.random_bool(0.3) {
            a.row_mut(i).neg_mut();
        }
    }
    a
}

fn random_real_alpha<R: Rng>(rng: &mut R, n: usize) -> RMat {
    let mut a = RMat::identity(n, n)
        + RMat::from_fn(n, n, |_, _| rng.random_range(-0.3..=0.3));
    if rng.random_bool(0.3) {
        a.row_mut(0).neg_mut();
    }
    a
}

fn random_heisenberg<R: Rng>(rng: &mut R, n: usize, m: usize, integral: bool) -> HeisenbergElement {
    let (lambda, mu, s) = if integral {
        let f = |rng: &mut R| RMat::from_fn(m, n, |_, _| rng.random_range(-1i32..=1) as f64);
        let l = f(rng);
        let u = f(rng);
        (l, u, random_int_symmetric(rng, m, false))
    } else {
        let f = |rng: &mut R| RMat::from_fn(m, n, |_, _| rng.random_range(-0.5..=0.5));
        let l = f(rng);
        let u = f(rng);
        (l, u, random_symmetric(rng, m, 0.5))
    };
    let kappa = s - &mu * lambda.transpose();
    HeisenbergElement { lambda, mu, kappa }
}

pub fn random_generator<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    kind: GenKind,
    opts: WordOptions,
) -> Generator {
    let kind = match kind {
        GenKind::Heisenberg => GeneratorKind::Heisenberg(random_heisenberg(rng, n, m, opts.integral)),
        GenKind::Translation => GeneratorKind::Translation(if opts.integral {
            random_int_symmetric(rng, n, true)
        } else {
            random_symmetric(rng, n, 0.5)
        }),
        GenKind::Dilation => GeneratorKind::Dilation(if opts.integral {
            random_gl_z(rng, n)
        } else {
            random_real_alpha(rng, n)
        }),
        GenKind::Inversion => GeneratorKind::Inversion(n),
    };
    let sign = if opts.random_sheets && rng.random_bool(0.5) { -1 } else { 1 };
    Generator::principal(kind, sign).expect("random generators are well formed")
}

pub fn random_word<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    length: usize,
    opts: WordOptions,
) -> Vec<Generator> {
    let kinds: &[GenKind] = if opts.heisenberg {
        &[GenKind::Heisenberg, GenKind::Translation, GenKind::Dilation, GenKind::Inversion]
    } else {
        &[GenKind::Translation, GenKind::Dilation, GenKind::Inversion]
    };
    (0..length)
        .map(|_| {
            let k = kinds[rng.random_range(0..kinds.len())];
            random_generator(rng, n, m, k, opts)
        })
        .collect()
}

/// Random product of real `t(b)`, `g(alpha)`, `sigma_n`, with the word kept.
pub fn random_symplectic_word(
    n: usize,
    length: usize,
    seed: u64,
) -> (SymplecticElement, Vec<Generator>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = random_word(&mut rng, n, 1, length.max(1), WordOptions::default());
    let g = word
        .iter()
        .fold(SymplecticElement::identity(n), |acc, w| {
            acc.mul(&w.symplectic().expect("valid generator"))
        });
    (g, word)
}

/// Wire form of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GeneratorJson {
    Heisenberg {
        lambda: MatrixJson,
        mu: MatrixJson,
        kappa: MatrixJson,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sheet: Option<[f64; 2]>,
    },
    Translation {
        b: MatrixJson,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sheet: Option<[f64; 2]>,
    },
    Dilation {
        alpha: MatrixJson,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sheet: Option<[f64; 2]>,
    },
    Inversion {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sheet: Option<[f64; 2]>,
    },
}

fn sheet_of(kind: GeneratorKind, sheet: Option<[f64; 2]>) -> Result<Generator> {
    match sheet {
        Some([re, im]) => Generator::new(kind, Complex64::new(re, im)),
        None => Generator::principal(kind, 1),
    }
}

impl GeneratorJson {
    pub fn to_generator(&self) -> Result<Generator> {
        match self {
            GeneratorJson::Heisenberg { lambda, mu, kappa, sheet } => {
                let h = HeisenbergElement::new(lambda.to_real()?, mu.to_real()?, kappa.to_real()?)?;
                sheet_of(GeneratorKind::Heisenberg(h), *sheet)
            }
            GeneratorJson::Translation { b, sheet } => {
                sheet_of(GeneratorKind::Translation(b.to_real()?), *sheet)
            }
            GeneratorJson::Dilation { alpha, sheet } => {
                sheet_of(GeneratorKind::Dilation(alpha.to_real()?), *sheet)
            }
            GeneratorJson::Inversion { n, sheet } => {
                if *n == 0 {
                    return Err(Error::InvalidInput("inversion needs n >= 1".into()));
                }
                sheet_of(GeneratorKind::Inversion(*n), *sheet)
            }
        }
    }

    pub fn from_generator(g: &Generator) -> Self {
        let sheet = Some([g.sheet.re, g.sheet.im]);
        match &g.kind {
            GeneratorKind::Heisenberg(h) => GeneratorJson::Heisenberg {
                lambda: MatrixJson::from_real(&h.lambda),
                mu: MatrixJson::from_real(&h.mu),
                kappa: MatrixJson::from_real(&h.kappa),
                sheet,
            },
            GeneratorKind::Translation(b) => GeneratorJson::Translation {
                b: MatrixJson::from_real(b),
                sheet,
            },
            GeneratorKind::Dilation(a) => GeneratorJson::Dilation {
                alpha: MatrixJson::from_real(a),
                sheet,
            },
            GeneratorKind::Inversion(n) => GeneratorJson::Inversion { n: *n, sheet },
        }
    }
}

/// Wire form of a group element:
/// `{"kind": "symplectic"|"heisenberg"|"meta"|"jacobi", "g": ..., "lambda": ...,
///   "mu": ..., "kappa": ..., "epsilon": [re, im], "word": [...]}`.
///
/// When `word` is present it defines the element and `g`/`epsilon` are
/// ignored. A `jacobi` element carrying `epsilon` is a meta-Jacobi element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<GeneratorJson>>,
}

impl ElementJson {
    /// Resolves any element kind to a meta-Jacobi element of index degree `m`.
    /// Symplectic and Jacobi elements without `epsilon` go on the principal sheet.
    pub fn to_meta_jacobi(&self, n: usize, m: usize) -> Result<MetaJacobiElement> {
        if let Some(word) = &self.word {
            let gens = word.iter().map(|w| w.to_generator()).collect::<Result<Vec<_>>>()?;
            return word_element(&gens, n, m);
        }
        let h = match (&self.lambda, &self.mu, &self.kappa) {
            (None, None, None) => HeisenbergElement::identity(m, n),
            (l, u, k) => {
                let get = |x: &Option<MatrixJson>, r: usize, c: usize| -> Result<RMat> {
                    match x {
                        Some(j) => j.to_real(),
                        None => Ok(RMat::zeros(r, c)),
                    }
                };
                HeisenbergElement::new(get(l, m, n)?, get(u, m, n)?, get(k, m, m)?)?
            }
        };
        let g = match (&self.g, self.kind.as_str()) {
            (_, "heisenberg") => SymplecticElement::identity(n),
            (Some(g), _) => SymplecticElement::new(g.to_real()?)?,
            (None, _) => SymplecticElement::identity(n),
        };
        if g.n() != n || h.n() != n || h.m() != m {
            return Err(Error::ShapeMismatch("element does not match (n, m)".into()));
        }
        let base = match (self.kind.as_str(), self.epsilon) {
            ("symplectic" | "meta" | "jacobi" | "heisenberg", Some([re, im])) => {
                MetaElement::new(g, Complex64::new(re, im))?
            }
            ("symplectic" | "meta" | "jacobi" | "heisenberg", None) => meta_lift(&g, 1)?,
            (other, _) => {
                return Err(Error::InvalidInput(format!("unknown element kind '{other}'")))
            }
        };
        Ok(MetaJacobiElement { base, h })
    }

    pub fn from_meta_jacobi(x: &MetaJacobiElement) -> Self {
        ElementJson {
            kind: "jacobi".into(),
            g: Some(MatrixJson::from_real(x.base.g.matrix())),
            lambda: Some(MatrixJson::from_real(&x.h.lambda)),
            mu: Some(MatrixJson::from_real(&x.h.mu)),
            kappa: Some(MatrixJson::from_real(&x.h.kappa)),
            epsilon: Some([x.base.epsilon.re, x.base.epsilon.im]),
            word: None,
        }
    }
}
