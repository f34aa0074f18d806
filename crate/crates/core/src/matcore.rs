//! Complex matrix primitives, Siegel points and the holomorphic square root
//! of the determinant on symmetric matrices with positive definite real part.
//!
//! Matrices are plain `nalgebra` dynamic matrices. The validated wrappers
//! ([`SiegelPoint`], [`RightHalfMatrix`], [`IndexMatrix`]) are the only way
//! the rest of the crate receives them, so their invariants hold everywhere
//! downstream.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Absolute per-entry symmetry tolerance.
pub const SYM_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue for positive definiteness checks.
pub const PD_TOL: f64 = 1e-12;
/// Condition number above which `C*Omega + D` (or Omega) counts as singular.
pub const COND_MAX: f64 = 1e12;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `z^{1/2}` with `-pi/2 < arg <= pi/2`; the negative real axis maps to `+i`.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re < 0.0 {
        Complex64::new(0.0, (-z.re).sqrt())
    } else {
        z.sqrt()
    }
}

/// `(z^{1/2})^k` for any integer `k`.
pub fn half_power(z: Complex64, k: i32) -> Complex64 {
    principal_sqrt(z).powi(k)
}

/// Largest entry modulus.
pub fn cmax(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn re_part(a: &CMat) -> RMat {
    a.map(|z| z.re)
}

pub fn im_part(a: &CMat) -> RMat {
    a.map(|z| z.im)
}

pub fn symmetrize(a: &CMat) -> CMat {
    (a + a.transpose()).scale(0.5)
}

pub fn symmetrize_real(a: &RMat) -> RMat {
    (a + a.transpose()) * 0.5
}

pub fn max_asymmetry(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).norm());
        }
    }
    worst
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn lambda_min(a: &RMat) -> f64 {
    let e = symmetrize_real(a).symmetric_eigenvalues();
    e.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn lambda_max(a: &RMat) -> f64 {
    let e = symmetrize_real(a).symmetric_eigenvalues();
    e.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with the 1-norm condition number.
pub fn inverse_with_cond(a: &CMat) -> Option<(CMat, f64)> {
    let inv = a.clone().try_inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if cond.is_finite() {
        Some((inv, cond))
    } else {
        None
    }
}

/// Symmetric complex `n x n` matrix with positive definite imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    omega: CMat,
}

impl SiegelPoint {
    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &CMat {
        &self.omega
    }

    pub fn re(&self) -> RMat {
        re_part(&self.omega)
    }

    pub fn im(&self) -> RMat {
        im_part(&self.omega)
    }

    /// `i * I_n`, the base point of the metaplectic cover.
    pub fn base(n: usize) -> Self {
        SiegelPoint {
            omega: CMat::identity(n, n) * I,
        }
    }

    /// Wraps the output of a group action: symmetrizes unconditionally and
    /// only checks the imaginary part. Long products drift off symmetry by
    /// far more than [`SYM_TOL`].
    pub(crate) fn from_action(omega: CMat) -> Result<Self> {
        if !is_finite(&omega) {
            return Err(Error::NonFinite);
        }
        let omega = symmetrize(&omega);
        let min_eig = lambda_min(&im_part(&omega));
        if min_eig <= PD_TOL {
            return Err(Error::ImNotPositiveDefinite { min_eig });
        }
        Ok(SiegelPoint { omega })
    }

    pub fn into_inner(self) -> CMat {
        self.omega
    }
}

pub fn validate_siegel(omega: &CMat) -> Result<SiegelPoint> {
    if omega.nrows() != omega.ncols() {
        return Err(Error::NotSquare {
            rows: omega.nrows(),
            cols: omega.ncols(),
        });
    }
    if !is_finite(omega) {
        return Err(Error::NonFinite);
    }
    let max_asym = max_asymmetry(omega);
    if max_asym > SYM_TOL {
        return Err(Error::NotSymmetric { max_asym });
    }
    let omega = symmetrize(omega);
    let min_eig = lambda_min(&im_part(&omega));
    if min_eig <= PD_TOL {
        return Err(Error::ImNotPositiveDefinite { min_eig });
    }
    Ok(SiegelPoint { omega })
}

/// Symmetric complex matrix with positive definite real part: the domain of
/// the holomorphic `det^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RightHalfMatrix {
    s: CMat,
}

impl RightHalfMatrix {
    pub fn new(s: &CMat) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::NotSquare {
                rows: s.nrows(),
                cols: s.ncols(),
            });
        }
        if !is_finite(s) {
            return Err(Error::NonFinite);
        }
        let max_asym = max_asymmetry(s);
        if max_asym > SYM_TOL {
            return Err(Error::NotSymmetric { max_asym });
        }
        Self::new_symmetrized(symmetrize(s))
    }

    /// Accepts computed matrices whose asymmetry is rounding noise.
    pub(crate) fn new_symmetrized(s: CMat) -> Result<Self> {
        let s = symmetrize(&s);
        let min_eig = lambda_min(&re_part(&s));
        if min_eig <= 0.0 {
            return Err(Error::ReNotPositiveDefinite { min_eig });
        }
        Ok(RightHalfMatrix { s })
    }

    pub fn matrix(&self) -> &CMat {
        &self.s
    }
}

/// The holomorphic square root of `det S` on matrices with `Re S > 0`.
///
/// The eigenvalues of such `S` lie in the open right half-plane, so the
/// product of their principal roots is single valued and continuous, and it
/// equals the positive root on real positive definite `S`. That product fixes
/// the branch; the returned magnitude comes from the LU determinant.
pub fn det_sqrt_holo(s: &RightHalfMatrix) -> Complex64 {
    let m = s.matrix();
    let n = m.nrows();
    if n == 1 {
        return principal_sqrt(m[(0, 0)]);
    }
    let branch: Complex64 = match Schur::new(m.clone()).eigenvalues() {
        Some(ev) => ev.iter().map(|&l| principal_sqrt(l)).product(),
        None => return principal_sqrt(m.determinant()),
    };
    let root = principal_sqrt(m.determinant());
    if (root - branch).norm() <= (root + branch).norm() {
        root
    } else {
        -root
    }
}

/// Which matrix built from Siegel points `det^{1/2}` is taken of.
#[derive(Debug, Clone, Copy)]
pub enum DetArg<'a> {
    /// `Omega / i`
    OmegaOverI(&'a SiegelPoint),
    /// `(Omega' - conj(Omega)) / (2i)`
    Pair {
        prime: &'a SiegelPoint,
        base: &'a SiegelPoint,
    },
}

impl DetArg<'_> {
    pub fn matrix(&self) -> CMat {
        match self {
            DetArg::OmegaOverI(p) => p.omega().map(|z| z / I),
            DetArg::Pair { prime, base } => {
                (prime.omega() - base.omega().conjugate()).map(|z| z / (2.0 * I))
            }
        }
    }
}

/// `(det^{1/2} S)^k` for `S` one of the [`DetArg`] shapes.
pub fn det_sqrt_at(arg: DetArg<'_>, k: i32) -> Result<Complex64> {
    let s = RightHalfMatrix::new_symmetrized(arg.matrix())?;
    Ok(det_sqrt_holo(&s).powi(k))
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> RMat {
    let mut x = RMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-scale..=scale);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

/// `X + iY` with `X` symmetric in `[-x_scale, x_scale]` and
/// `Y = A A^t + y_floor * I`.
pub fn random_siegel_with<R: Rng>(
    rng: &mut R,
    n: usize,
    x_scale: f64,
    y_floor: f64,
) -> SiegelPoint {
    let x = random_symmetric(rng, n, x_scale);
    let a = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let y = &a * a.transpose() + RMat::identity(n, n) * y_floor;
    let omega = CMat::from_fn(n, n, |i, j| Complex64::new(x[(i, j)], y[(i, j)]));
    SiegelPoint::from_action(omega).expect("Y is positive definite by construction")
}

pub fn random_siegel(n: usize, seed: u64) -> SiegelPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_siegel_with(&mut rng, n, 1.0, 0.1)
}

/// Real symmetric positive definite `m x m` index matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMatrix {
    m: RMat,
    integral: bool,
    det: f64,
}

impl IndexMatrix {
    pub fn new(m: RMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let max_asym = (&m - m.transpose()).amax();
        if max_asym != 0.0 {
            return Err(Error::NotSymmetric { max_asym });
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or(Error::IndexNotPositiveDefinite)?;
        let det = chol.determinant();
        let integral = m.iter().all(|x| (x - x.round()).abs() <= 1e-12);
        Ok(IndexMatrix { m, integral, det })
    }

    pub fn identity(m: usize) -> Self {
        Self::new(RMat::identity(m, m)).expect("identity is positive definite")
    }

    pub fn degree(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &RMat {
        &self.m
    }

    pub fn complex(&self) -> CMat {
        to_complex(&self.m)
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn is_unimodular(&self) -> bool {
        (self.det - 1.0).abs() <= 1e-12
    }

    pub fn inverse(&self) -> RMat {
        self.m
            .clone()
            .cholesky()
            .expect("validated positive definite")
            .inverse()
    }
}

/// Wire format shared by every CLI matrix input:
/// `{"n": int, "re": [[...]], "im": [[...]]}`. `n` and `im` are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<RMat> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|row| row.len() != cols) {
        return Err(Error::InvalidInput("ragged or empty rows".into()));
    }
    Ok(RMat::from_fn(r, cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(a: &RMat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

impl MatrixJson {
    pub fn to_complex(&self) -> Result<CMat> {
        let re = rows_to_matrix(&self.re)?;
        let im = match &self.im {
            Some(rows) => rows_to_matrix(rows)?,
            None => RMat::zeros(re.nrows(), re.ncols()),
        };
        if im.shape() != re.shape() {
            return Err(Error::InvalidInput("re/im shapes differ".into()));
        }
        if let Some(n) = self.n {
            if re.nrows() != n || re.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "declared n = {n} but matrix is {}x{}",
                    re.nrows(),
                    re.ncols()
                )));
            }
        }
        Ok(CMat::from_fn(re.nrows(), re.ncols(), |i, j| {
            Complex64::new(re[(i, j)], im[(i, j)])
        }))
    }

    pub fn to_real(&self) -> Result<RMat> {
        let a = self.to_complex()?;
        if a.iter().any(|z| z.im != 0.0) {
            return Err(Error::InvalidInput("expected a real matrix".into()));
        }
        Ok(re_part(&a))
    }

    pub fn from_complex(a: &CMat) -> Self {
        MatrixJson {
            n: (a.nrows() == a.ncols()).then_some(a.nrows()),
            re: matrix_to_rows(&re_part(a)),
            im: Some(matrix_to_rows(&im_part(a))),
        }
    }

    pub fn from_real(a: &RMat) -> Self {
        MatrixJson {
            n: (a.nrows() == a.ncols()).then_some(a.nrows()),
            re: matrix_to_rows(a),
            im: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn cm(n: usize, entries: &[Complex64]) -> CMat {
        CMat::from_row_slice(n, n, entries)
    }

    #[test]
    fn validate_accepts_and_rejects() {
        validate_siegel(&(CMat::identity(2, 2) * I)).unwrap();
        let asym = cm(2, &[I, c(1.0, 0.0), c(0.0, 0.0), I]);
        assert!(matches!(
            validate_siegel(&asym),
            Err(Error::NotSymmetric { .. })
        ));
        // Im part diag(1, 0.5) with zero off-diagonal imaginary part.
        let ok = cm(2, &[c(1.0, 1.0), c(0.3, 0.0), c(0.3, 0.0), c(2.0, 0.5)]);
        validate_siegel(&ok).unwrap();
        let flat = cm(2, &[c(1.0, 1.0), c(0.0, 2.0), c(0.0, 2.0), c(2.0, 1.0)]);
        assert!(matches!(
            validate_siegel(&flat),
            Err(Error::ImNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn det_sqrt_examples() {
        for n in 1..=4 {
            let s = RightHalfMatrix::new(&CMat::identity(n, n)).unwrap();
            assert!((det_sqrt_holo(&s) - 1.0).norm() < 1e-14);
        }
        let s = RightHalfMatrix::new(&cm(1, &[c(4.0, 0.0)])).unwrap();
        assert!((det_sqrt_holo(&s) - 2.0).norm() < 1e-14);
        // eigenvalues 1 +- i/2, product of principal roots = sqrt(5)/2
        let s = RightHalfMatrix::new(&cm(2, &[c(1.0, 0.0), c(0.0, 0.5), c(0.0, 0.5), c(1.0, 0.0)]))
            .unwrap();
        assert!((det_sqrt_holo(&s) - c(5f64.sqrt() / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn det_sqrt_rejects_left_half() {
        let s = cm(2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            RightHalfMatrix::new(&s),
            Err(Error::ReNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn det_sqrt_at_examples() {
        let base = SiegelPoint::base(3);
        assert!((det_sqrt_at(DetArg::OmegaOverI(&base), -3).unwrap() - 1.0).norm() < 1e-14);
        let two_i = validate_siegel(&cm(1, &[c(0.0, 2.0)])).unwrap();
        let v = det_sqrt_at(DetArg::OmegaOverI(&two_i), -1).unwrap();
        assert!((v - 0.5f64.sqrt()).norm() < 1e-15);
        let b2 = SiegelPoint::base(2);
        let v = det_sqrt_at(DetArg::Pair { prime: &b2, base: &b2 }, 1).unwrap();
        assert!((v - 1.0).norm() < 1e-14);
    }

    #[test]
    fn principal_sqrt_branch() {
        assert_eq!(principal_sqrt(c(-4.0, 0.0)), c(0.0, 2.0));
        assert_eq!(principal_sqrt(c(-4.0, -0.0)), c(0.0, 2.0));
        let r = principal_sqrt(c(-1.0, -1e-300));
        assert!(r.im < 0.0);
    }

    #[test]
    fn random_siegel_is_deterministic_and_valid() {
        let a = random_siegel(2, 1);
        let b = random_siegel(2, 1);
        assert_eq!(a, b);
        assert!(lambda_min(&a.im()) >= 0.1 - 1e-12);
        let one = random_siegel(1, 0);
        validate_siegel(one.omega()).unwrap();
    }

    #[test]
    fn index_matrix_flags() {
        let m = IndexMatrix::identity(3);
        assert!(m.is_integral() && m.is_unimodular());
        let m = IndexMatrix::new(RMat::from_row_slice(1, 1, &[2.0])).unwrap();
        assert!(m.is_integral() && !m.is_unimodular());
        let m = IndexMatrix::new(RMat::from_row_slice(1, 1, &[0.5])).unwrap();
        assert!(!m.is_integral());
        assert!(IndexMatrix::new(RMat::from_row_slice(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn matrix_json_parses_wire_examples() {
        let j: MatrixJson = serde_json::from_str(r#"{"re":[[0]],"im":[[1]]}"#).unwrap();
        assert_eq!(j.to_complex().unwrap()[(0, 0)], I);
        let j: MatrixJson = serde_json::from_str(r#"{"n":2,"re":[[1,0]],"im":[[0,0]]}"#).unwrap();
        assert!(j.to_complex().is_err());
    }

    fn right_half(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
        let p = &a * a.transpose() + RMat::identity(n, n) * 0.05;
        let q = random_symmetric(&mut rng, n, 2.0);
        CMat::from_fn(n, n, |i, j| c(p[(i, j)], q[(i, j)]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn det_sqrt_squares_to_det(n in 1usize..=4, seed in any::<u64>()) {
            let s = RightHalfMatrix::new(&right_half(n, seed)).unwrap();
            let w = det_sqrt_holo(&s);
            let d = s.matrix().determinant();
            prop_assert!((w * w - d).norm() <= 1e-10 * d.norm());
        }

        #[test]
        fn det_sqrt_positive_on_real_slice(n in 1usize..=4, seed in any::<u64>()) {
            let s = re_part(&right_half(n, seed));
            let w = det_sqrt_holo(&RightHalfMatrix::new(&to_complex(&s)).unwrap());
            prop_assert!(w.im.abs() <= 1e-12 * w.norm().max(1.0));
            prop_assert!(w.re > 0.0);
        }

        #[test]
        fn det_sqrt_continuous_along_segments(n in 1usize..=4, seed in any::<u64>()) {
            let s0 = right_half(n, seed);
            let id = CMat::identity(n, n);
            let mut prev = Complex64::new(1.0, 0.0);
            for k in 1..=100 {
                let t = k as f64 / 100.0;
                let st = &id * c(1.0 - t, 0.0) + &s0 * c(t, 0.0);
                let w = det_sqrt_holo(&RightHalfMatrix::new_symmetrized(st).unwrap());
                prop_assert!((w - prev).norm() < (w + prev).norm());
                prev = w;
            }
        }
    }
}
