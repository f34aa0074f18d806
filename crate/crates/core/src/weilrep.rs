//! The Schrödinger-Weil action on the covariant Gaussian family and on
//! sampled grid functions, the Gaussian integral and the Fourier transform
//! of a covariant Gaussian.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::autfactors::j_m_star;
use crate::error::{Error, Result};
use crate::groups::{Generator, GeneratorKind, HeisenbergElement, JacobiPoint};
use crate::matcore::{
    det_sqrt_at, inverse_with_cond, principal_sqrt, to_complex, trace, CMat, DetArg,
    IndexMatrix, RMat, SiegelPoint, COND_MAX, I,
};
use crate::report::VerificationReport;

pub type WeilGenerator = Generator;

/// `coeff * exp(πi σ(M(x Ω x^t + 2 x Z^t)))` as a function of real `m x n` `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianElement {
    pub coeff: Complex64,
    pub omega: SiegelPoint,
    pub z: CMat,
    pub index: IndexMatrix,
}

pub fn covariant_map(omega: &SiegelPoint, z: &CMat, index: &IndexMatrix) -> Result<GaussianElement> {
    if z.ncols() != omega.n() || z.nrows() != index.degree() {
        return Err(Error::ShapeMismatch("Z must be m x n".into()));
    }
    Ok(GaussianElement {
        coeff: Complex64::new(1.0, 0.0),
        omega: omega.clone(),
        z: z.clone(),
        index: index.clone(),
    })
}

fn gaussian_exponent(omega: &CMat, z: &CMat, index: &CMat, x: &CMat) -> Complex64 {
    trace(&(index * (x * omega * x.transpose() + (x * z.transpose()).scale(2.0))))
}

impl GaussianElement {
    pub fn n(&self) -> usize {
        self.omega.n()
    }

    pub fn m(&self) -> usize {
        self.index.degree()
    }

    pub fn point(&self) -> JacobiPoint {
        JacobiPoint {
            omega: self.omega.clone(),
            z: self.z.clone(),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        GaussianElement {
            coeff: self.coeff * s,
            ..self.clone()
        }
    }

    pub fn eval(&self, x: &RMat) -> Complex64 {
        let e = gaussian_exponent(self.omega.omega(), &self.z, &self.index.complex(), &to_complex(x));
        self.coeff * (I * PI * e).exp()
    }
}

pub fn eval_gaussian(g: &GaussianElement, x: &RMat) -> Result<Complex64> {
    if x.shape() != (g.m(), g.n()) {
        return Err(Error::ShapeMismatch("x must be m x n".into()));
    }
    Ok(g.eval(x))
}

/// Samples on the uniform grid `[-L, L]^{mn}` with `N` points per axis.
/// Coordinates follow the row-major order of `x`; the first coordinate is the
/// slowest varying index of `samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(with = "complex_pairs")]
    pub samples: Vec<Complex64>,
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[a, b]| Complex64::new(a, b)).collect())
    }
}

impl GridFunction {
    pub fn sample<F: Fn(&RMat) -> Complex64 + Sync>(
        m: usize,
        n: usize,
        half_width: f64,
        points: usize,
        f: F,
    ) -> Result<Self> {
        if points % 2 == 0 || points < 3 {
            return Err(Error::InvalidInput("grid needs an odd number of points >= 3".into()));
        }
        let mut g = GridFunction {
            m,
            n,
            half_width,
            points,
            samples: Vec::new(),
        };
        g.samples = (0..g.len()).into_par_iter().map(|k| f(&g.node(k))).collect();
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for c in (0..d).rev() {
            idx[c] = k % self.points;
            k /= self.points;
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    pub fn node(&self, k: usize) -> RMat {
        let idx = self.multi_index(k);
        RMat::from_fn(self.m, self.n, |a, j| self.coord(idx[a * self.n + j]))
    }

    /// Index of the node at `-x`.
    pub fn mirror(&self, k: usize) -> usize {
        let idx: Vec<usize> = self.multi_index(k).iter().map(|&i| self.points - 1 - i).collect();
        self.flat(&idx)
    }

    /// Multilinear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: &RMat) -> Complex64 {
        let d = self.dim();
        let h = self.step();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..self.m {
            for j in 0..self.n {
                let c = a * self.n + j;
                let s = (x[(a, j)] + self.half_width) / h;
                if !(0.0..=(self.points - 1) as f64).contains(&s) {
                    return Complex64::new(0.0, 0.0);
                }
                let f = s.floor().min((self.points - 2) as f64);
                base[c] = f as usize;
                frac[c] = s - f;
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for c in 0..d {
                let hi = (corner >> c) & 1 == 1;
                idx[c] = base[c] + hi as usize;
                w *= if hi { frac[c] } else { 1.0 - frac[c] };
            }
            if w != 0.0 {
                acc += self.samples[self.flat(&idx)] * w;
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest sample modulus on the boundary of the box.
    pub fn boundary_max(&self) -> f64 {
        (0..self.len())
            .filter(|&k| {
                self.multi_index(k)
                    .iter()
                    .any(|&i| i == 0 || i == self.points - 1)
            })
            .map(|k| self.samples[k].norm())
            .fold(0.0, f64::max)
    }

    /// Trapezoid `L^2` norm.
    pub fn l2_norm(&self) -> f64 {
        let h = self.step();
        let s: f64 = (0..self.len())
            .map(|k| self.trapezoid_weight(k) * self.samples[k].norm_sqr())
            .sum();
        (s * h.powi(self.dim() as i32)).sqrt()
    }

    fn trapezoid_weight(&self, k: usize) -> f64 {
        self.multi_index(k)
            .iter()
            .map(|&i| if i == 0 || i == self.points - 1 { 0.5 } else { 1.0 })
            .product()
    }

    /// `max |f(x) - s f(-x)| / max |f|`, the component of parity `-s`.
    pub fn parity_leakage(&self, s: f64) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.len())
            .map(|k| (self.samples[k] - self.samples[self.mirror(k)] * s).norm() * 0.5)
            .fold(0.0, f64::max)
            / scale
    }

    fn map_points<F: Fn(&RMat, usize) -> Complex64 + Sync>(&self, f: F) -> Self {
        let samples = (0..self.len())
            .into_par_iter()
            .map(|k| f(&self.node(k), k))
            .collect();
        GridFunction {
            samples,
            ..self.clone()
        }
    }
}

/// Relative boundary mass above which a grid does not resolve its function.
pub const GRID_BOUNDARY_TOL: f64 = 1e-12;

/// The scalar `t` the Weil formulas are applied with for a generator on
/// sheet `epsilon`: `epsilon` for Heisenberg and translation elements,
/// `-i epsilon` for dilations with `det alpha < 0`, `epsilon e^{iπn/4}` for
/// the inversion. Each lies in `{±1}` on the admissible sheets.
pub fn weil_label(w: &WeilGenerator) -> Complex64 {
    match &w.kind {
        GeneratorKind::Heisenberg(_) | GeneratorKind::Translation(_) => w.sheet,
        GeneratorKind::Dilation(a) => {
            if a.determinant() < 0.0 {
                -I * w.sheet
            } else {
                w.sheet
            }
        }
        GeneratorKind::Inversion(n) => w.sheet * Complex64::from_polar(1.0, PI * *n as f64 / 4.0),
    }
}

/// Schrödinger action `e^{πiσ(c(κ + μλ^t + 2xμ^t))} f(x + λ)` on a Gaussian;
/// the result stays in the family when `c` is the Gaussian's index.
pub fn schrodinger_action(
    h: &HeisenbergElement,
    f: &GaussianElement,
    c: &IndexMatrix,
) -> Result<GaussianElement> {
    if h.m() != f.m() || h.n() != f.n() {
        return Err(Error::ShapeMismatch("Heisenberg element and Gaussian differ in (m, n)".into()));
    }
    if c != &f.index {
        return Err(Error::IndexMismatch);
    }
    let mc = c.complex();
    let lam = to_complex(&h.lambda);
    let om = f.omega.omega();
    let inner = to_complex(&h.kappa)
        + to_complex(&(&h.mu * h.lambda.transpose()))
        + &lam * om * lam.transpose()
        + (&lam * f.z.transpose()).scale(2.0);
    Ok(GaussianElement {
        coeff: f.coeff * (I * PI * trace(&(mc * inner))).exp(),
        omega: f.omega.clone(),
        z: &f.z + &lam * om + to_complex(&h.mu),
        index: f.index.clone(),
    })
}

/// Grid version of [`schrodinger_action`] with linear interpolation.
pub fn schrodinger_action_grid(
    h: &HeisenbergElement,
    f: &GridFunction,
    c: &IndexMatrix,
) -> Result<GridFunction> {
    if h.m() != f.m || h.n() != f.n || c.degree() != f.m {
        return Err(Error::ShapeMismatch("Heisenberg element and grid differ in (m, n)".into()));
    }
    let mc = c.matrix();
    let k0 = (mc * (&h.kappa + &h.mu * h.lambda.transpose())).trace();
    Ok(f.map_points(|x, _| {
        let phase = k0 + 2.0 * (mc * x * h.mu.transpose()).trace();
        (I * PI * phase).exp() * f.interpolate(&(x + &h.lambda))
    }))
}

fn check_shape(w: &WeilGenerator, n: usize, m: usize) -> Result<()> {
    if w.n() != n {
        return Err(Error::ShapeMismatch("generator degree differs from the function's n".into()));
    }
    if let GeneratorKind::Heisenberg(h) = &w.kind {
        if h.m() != m {
            return Err(Error::ShapeMismatch("Heisenberg generator has a different m".into()));
        }
    }
    Ok(())
}

pub fn weil_action(w: &WeilGenerator, g: &GaussianElement) -> Result<GaussianElement> {
    weil_action_with_label(w, weil_label(w), g)
}

/// Closed-form Weil action with an arbitrary unit label `t`.
pub fn weil_action_with_label(
    w: &WeilGenerator,
    t: Complex64,
    g: &GaussianElement,
) -> Result<GaussianElement> {
    check_shape(w, g.n(), g.m())?;
    let m = g.m() as i32;
    let n = g.n() as i32;
    let tm = t.powi(m);
    match &w.kind {
        GeneratorKind::Heisenberg(h) => Ok(schrodinger_action(h, g, &g.index)?.scaled(tm)),
        GeneratorKind::Translation(b) => {
            let omega = SiegelPoint::from_action(g.omega.omega() + to_complex(b))?;
            Ok(GaussianElement {
                coeff: g.coeff * tm,
                omega,
                ..g.clone()
            })
        }
        GeneratorKind::Dilation(alpha) => {
            let a = to_complex(alpha);
            let omega = SiegelPoint::from_action(a.transpose() * g.omega.omega() * &a)?;
            let d = half_power_det(alpha.determinant(), m);
            Ok(GaussianElement {
                coeff: g.coeff * tm * d,
                omega,
                z: &g.z * a,
                index: g.index.clone(),
            })
        }
        GeneratorKind::Inversion(_) => {
            let (oinv, cond) = inverse_with_cond(g.omega.omega())
                .ok_or(Error::SingularOmega { cond: f64::INFINITY })?;
            if cond > COND_MAX {
                return Err(Error::SingularOmega { cond });
            }
            let mc = g.index.complex();
            let dsq = det_sqrt_at(DetArg::OmegaOverI(&g.omega), -m)?;
            let quad = trace(&(&mc * &g.z * &oinv * g.z.transpose()));
            let norm = Complex64::from_polar(1.0, -PI * (m * n) as f64 / 4.0);
            Ok(GaussianElement {
                coeff: g.coeff * tm * norm * dsq * (-I * PI * quad).exp(),
                omega: SiegelPoint::from_action(-&oinv)?,
                z: &g.z * oinv,
                index: g.index.clone(),
            })
        }
    }
}

/// `(d^{1/2})^k` with the principal root.
fn half_power_det(d: f64, k: i32) -> Complex64 {
    principal_sqrt(Complex64::new(d, 0.0)).powi(k)
}

/// Weil action on a sampled function: pointwise formulas for Heisenberg,
/// translation and dilation elements, trapezoid quadrature of the integral
/// transform for the inversion.
pub fn weil_action_numeric(
    w: &WeilGenerator,
    f: &GridFunction,
    index: &IndexMatrix,
) -> Result<GridFunction> {
    weil_action_numeric_with_label(w, weil_label(w), f, index)
}

pub fn weil_action_numeric_with_label(
    w: &WeilGenerator,
    t: Complex64,
    f: &GridFunction,
    index: &IndexMatrix,
) -> Result<GridFunction> {
    if index.degree() != f.m {
        return Err(Error::ShapeMismatch("index degree differs from the grid's m".into()));
    }
    check_shape(w, f.n, f.m)?;
    let m = f.m as i32;
    let n = f.n as i32;
    let tm = t.powi(m);
    let mm = index.matrix();
    match &w.kind {
        GeneratorKind::Heisenberg(h) => {
            let g = schrodinger_action_grid(h, f, index)?;
            Ok(GridFunction {
                samples: g.samples.iter().map(|z| z * tm).collect(),
                ..g
            })
        }
        GeneratorKind::Translation(b) => Ok(f.map_points(|x, k| {
            let phase = (mm * x * b * x.transpose()).trace();
            tm * (I * PI * phase).exp() * f.samples[k]
        })),
        GeneratorKind::Dilation(alpha) => {
            let d = tm * half_power_det(alpha.determinant(), m);
            let at = alpha.transpose();
            Ok(f.map_points(|x, _| d * f.interpolate(&(x * &at))))
        }
        GeneratorKind::Inversion(_) => {
            let scale = f.max_abs();
            let boundary = f.boundary_max() / scale.max(f64::MIN_POSITIVE);
            if boundary > GRID_BOUNDARY_TOL {
                return Err(Error::GridTooCoarse { boundary });
            }
            let pre = tm
                * Complex64::from_polar(1.0, -PI * (m * n) as f64 / 4.0)
                * index.det().powf(n as f64 / 2.0)
                * f.step().powi(f.dim() as i32);
            let weights: Vec<Complex64> = (0..f.len())
                .map(|k| f.samples[k] * f.trapezoid_weight(k))
                .collect();
            let d = f.dim();
            let np = f.points;
            let coords: Vec<f64> = (0..np).map(|i| f.coord(i)).collect();
            let samples = (0..f.len())
                .into_par_iter()
                .map(|k| {
                    let x = f.node(k);
                    // kernel e^{-2πi σ(M y x^t)} = Π_c e^{-2πi y_c (Mx)_c}
                    let mx = mm * &x;
                    let freq: Vec<f64> = (0..d).map(|c| mx[(c / f.n, c % f.n)]).collect();
                    let table: Vec<Vec<Complex64>> = freq
                        .iter()
                        .map(|&w| {
                            coords
                                .iter()
                                .map(|&y| Complex64::from_polar(1.0, -2.0 * PI * y * w))
                                .collect()
                        })
                        .collect();
                    pre * kernel_sum(&weights, &table, np, d)
                })
                .collect();
            Ok(GridFunction {
                samples,
                ..f.clone()
            })
        }
    }
}

/// `Σ_y w(y) Π_c table[c][y_c]`, contracting one axis at a time.
fn kernel_sum(weights: &[Complex64], table: &[Vec<Complex64>], np: usize, d: usize) -> Complex64 {
    let mut cur: Vec<Complex64> = weights.to_vec();
    for c in (0..d).rev() {
        let outer = cur.len() / np;
        let mut next = vec![Complex64::new(0.0, 0.0); outer];
        for (o, slot) in next.iter_mut().enumerate() {
            let row = &cur[o * np..(o + 1) * np];
            *slot = row.iter().zip(&table[c]).map(|(a, b)| a * b).sum();
        }
        cur = next;
    }
    cur[0]
}

/// `∫ e^{πiσ(M(yΩy^t + 2yZ^t))} dy = (det M)^{-n/2} det^{1/2}(Ω/i)^{-m}
/// e^{-πiσ(M Z Ω^{-1} Z^t)}`.
pub fn gaussian_integral(omega: &SiegelPoint, z: &CMat, index: &IndexMatrix) -> Result<Complex64> {
    let (m, n) = (index.degree() as i32, omega.n() as i32);
    if z.shape() != (m as usize, n as usize) {
        return Err(Error::ShapeMismatch("Z must be m x n".into()));
    }
    let (oinv, cond) =
        inverse_with_cond(omega.omega()).ok_or(Error::SingularOmega { cond: f64::INFINITY })?;
    if cond > COND_MAX {
        return Err(Error::SingularOmega { cond });
    }
    let dsq = det_sqrt_at(DetArg::OmegaOverI(omega), -m)?;
    let quad = trace(&(index.complex() * z * oinv * z.transpose()));
    Ok(index.det().powf(-n as f64 / 2.0) * dsq * (-I * PI * quad).exp())
}

/// The `M = I` case: `(det Ω/i)^{-m/2} e^{-πiσ(Z Ω^{-1} Z^t)}` with `m` the
/// number of rows of `Z`.
pub fn gaussian_lattice_integral(omega: &SiegelPoint, z: &CMat) -> Result<Complex64> {
    gaussian_integral(omega, z, &IndexMatrix::identity(z.nrows().max(1)))
}

/// `F̂_{Ω,Z}(Mx)` for the transform `F̂(ξ) = ∫ F(y) e^{-2πiσ(y ξ^t)} dy`.
pub fn fourier_of_covariant(
    omega: &SiegelPoint,
    z: &CMat,
    index: &IndexMatrix,
    x: &CMat,
) -> Result<Complex64> {
    if x.shape() != z.shape() {
        return Err(Error::ShapeMismatch("x must be m x n".into()));
    }
    gaussian_integral(omega, &(z - x), index)
}

/// Covariance check at `samples` random points `x ∈ [-1, 1]^{m x n}`:
/// `ω(w_k ... w_1) F_p` versus `J*(w, p)^{-1} F_{w p}`.
pub fn covariance_residual<R: Rng>(
    word: &[WeilGenerator],
    p: &JacobiPoint,
    index: &IndexMatrix,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let m = index.degree();
    if m % 2 == 0 {
        return Err(Error::EvenM { m });
    }
    let f = covariant_map(&p.omega, &p.z, index)?;
    let mut lhs = f;
    for w in word.iter().rev() {
        lhs = weil_action(w, &lhs)?;
    }
    let x = crate::groups::word_element(word, p.n(), m)?;
    let jstar = j_m_star(&x, p, index)?;
    let q = x.act(p)?;
    let rhs = covariant_map(&q.omega, &q.z, index)?.scaled(jstar.inv());
    let (mut abs, mut rel) = (0.0f64, 0.0f64);
    for _ in 0..samples.max(1) {
        let xs = RMat::from_fn(m, p.n(), |_, _| rng.random_range(-1.0..=1.0));
        let a = lhs.eval(&xs);
        let b = rhs.eval(&xs);
        abs = abs.max((a - b).norm());
        rel = rel.max((a - b).norm() / b.norm());
    }
    Ok((abs, rel))
}

/// [`covariance_residual`] for a single generator, as a report.
pub fn verify_covariance<R: Rng>(
    w: &WeilGenerator,
    p: &JacobiPoint,
    index: &IndexMatrix,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<VerificationReport> {
    let (abs, rel) = covariance_residual(std::slice::from_ref(w), p, index, samples, rng)?;
    Ok(VerificationReport::single("covariance", samples, abs, rel, tol))
}
