//! Automorphic factors `J(g, Omega)`, `J_{1/2}`, `J_M`, `J*_M`, `J_{k,M}` and
//! the slash operator.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::groups::{
    epsilon_factor, j_and_inverse, JacobiElement, JacobiPoint, MetaElement,
    MetaJacobiElement, SymplecticElement, HeisenbergElement,
};
use crate::matcore::{to_complex, trace, CMat, IndexMatrix, SiegelPoint, I};

/// Weight numerator `k` and index `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlashParams {
    pub k: i32,
    pub index: IndexMatrix,
}

impl SlashParams {
    pub fn new(k: i32, index: IndexMatrix) -> Self {
        SlashParams { k, index }
    }

    /// True when `k` is odd, the genuinely half-integral case.
    pub fn is_half_integral(&self) -> bool {
        self.k % 2 != 0
    }
}

/// `C Omega + D`.
pub fn j_matrix(g: &SymplecticElement, omega: &SiegelPoint) -> CMat {
    to_complex(&g.c()) * omega.omega() + to_complex(&g.d())
}

/// `eps^{-1} epsilon(g; Omega, iI) |det J(g, Omega)|^{1/2}`.
pub fn j_half(g: &MetaElement, omega: &SiegelPoint) -> Result<Complex64> {
    if g.n() != omega.n() {
        return Err(Error::ShapeMismatch("degree of g and Omega differ".into()));
    }
    let (j, _) = j_and_inverse(&g.g, omega)?;
    let e = epsilon_factor(&g.g, omega, &SiegelPoint::base(g.n()))?;
    Ok(e / g.epsilon * j.determinant().norm().sqrt())
}

/// `sigma(M X (C Omega + D)^{-1} C X^t) - sigma(M(lambda Omega lambda^t
/// + 2 lambda Z^t + kappa + mu lambda^t))` with `X = Z + lambda Omega + mu`.
fn jacobi_exponent(
    g: &SymplecticElement,
    h: &HeisenbergElement,
    p: &JacobiPoint,
    index: &IndexMatrix,
) -> Result<Complex64> {
    if g.n() != p.n() || h.n() != p.n() || h.m() != p.m() || index.degree() != p.m() {
        return Err(Error::ShapeMismatch("element, point and index differ in (n, m)".into()));
    }
    let (_, jinv) = j_and_inverse(g, &p.omega)?;
    let m = index.complex();
    let om = p.omega.omega();
    let lam = to_complex(&h.lambda);
    let x = &p.z + &lam * om + to_complex(&h.mu);
    let first = trace(&(&m * &x * jinv * to_complex(&g.c()) * x.transpose()));
    let inner = &lam * om * lam.transpose()
        + (&lam * p.z.transpose()).scale(2.0)
        + to_complex(&h.kappa)
        + to_complex(&(&h.mu * h.lambda.transpose()));
    Ok(first - trace(&(m * inner)))
}

pub fn j_m(x: &JacobiElement, p: &JacobiPoint, index: &IndexMatrix) -> Result<Complex64> {
    let e = jacobi_exponent(&x.g, &x.h, p, index)?;
    Ok((I * 2.0 * PI * e).exp())
}

pub fn j_m_star(x: &MetaJacobiElement, p: &JacobiPoint, index: &IndexMatrix) -> Result<Complex64> {
    let m = index.degree();
    if m % 2 == 0 {
        return Err(Error::EvenM { m });
    }
    let e = jacobi_exponent(&x.base.g, &x.h, p, index)?;
    let jh = j_half(&x.base, &p.omega)?;
    Ok((I * PI * e).exp() * jh.powi(m as i32))
}

pub fn j_k_m(x: &MetaJacobiElement, p: &JacobiPoint, params: &SlashParams) -> Result<Complex64> {
    let e = jacobi_exponent(&x.base.g, &x.h, p, &params.index)?;
    let jh = j_half(&x.base, &p.omega)?;
    Ok((I * 2.0 * PI * e).exp() * jh.powi(params.k))
}

/// A function on the Siegel-Jacobi space.
pub type JacobiFn<'a> = Box<dyn Fn(&JacobiPoint) -> Result<Complex64> + Send + Sync + 'a>;

/// `f|[x](Omega, Z) = J_M(x, (Omega, Z))^{-1} det(C Omega + D)^{-k} f(x (Omega, Z))`.
pub fn slash<'a, F>(f: F, x: JacobiElement, params: SlashParams) -> JacobiFn<'a>
where
    F: Fn(&JacobiPoint) -> Result<Complex64> + Send + Sync + 'a,
{
    Box::new(move |p: &JacobiPoint| {
        let jm = j_m(&x, p, &params.index)?;
        let det = j_matrix(&x.g, &p.omega).determinant();
        let q = crate::groups::jacobi_action(&x, p)?;
        Ok(f(&q)? / (jm * det.powi(params.k)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{
        jacobi_mul, meta_jacobi_mul, meta_lift, meta_mul, random_word, siegel_action,
        word_element, WordOptions,
    };
    use crate::matcore::{c, random_siegel_with, RMat};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point<R: Rng>(rng: &mut R, n: usize, m: usize) -> JacobiPoint {
        let om = random_siegel_with(rng, n, 1.0, 0.3);
        let z = CMat::from_fn(m, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        JacobiPoint::new(om, z).unwrap()
    }

    fn meta<R: Rng>(rng: &mut R, n: usize, len: usize) -> MetaElement {
        word_element(&random_word(rng, n, 1, len, WordOptions::default()), n, 1)
            .unwrap()
            .base
    }

    #[test]
    fn j_matrix_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let om = random_siegel_with(&mut rng, 2, 1.0, 0.3);
        assert_eq!(j_matrix(&SymplecticElement::identity(2), &om), CMat::identity(2, 2));
        assert_eq!(&j_matrix(&SymplecticElement::inversion(2), &om), om.omega());
        let b = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let t = SymplecticElement::translation(&b).unwrap();
        assert_eq!(j_matrix(&t, &om), CMat::identity(2, 2));
    }

    #[test]
    fn j_half_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=3 {
            let om = random_siegel_with(&mut rng, n, 1.0, 0.3);
            let id = MetaElement::identity(n);
            assert!((j_half(&id, &om).unwrap() - 1.0).norm() < 1e-12);
            assert!((j_half(&id.flipped(), &om).unwrap() + 1.0).norm() < 1e-12);

            let alpha = RMat::identity(n, n) * 1.5 + RMat::from_fn(n, n, |i, j| if i < j { 0.3 } else { 0.0 });
            let g = meta_lift(&SymplecticElement::dilation(&alpha).unwrap(), 1).unwrap();
            let expect = alpha.determinant().powf(-0.5);
            assert!((j_half(&g, &om).unwrap() - expect).norm() < 1e-12);

            let s = meta_lift(&SymplecticElement::inversion(n), 1).unwrap();
            let dsq = crate::matcore::det_sqrt_at(crate::matcore::DetArg::OmegaOverI(&om), 1).unwrap();
            assert!((j_half(&s, &om).unwrap() - dsq / s.epsilon).norm() < 1e-12);
        }
    }

    #[test]
    fn j_half_negative_dilation_sheets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let om = random_siegel_with(&mut rng, 1, 1.0, 0.3);
        let alpha = RMat::from_row_slice(1, 1, &[-4.0]);
        let g = meta_lift(&SymplecticElement::dilation(&alpha).unwrap(), 1).unwrap();
        assert!((g.epsilon * g.epsilon + 1.0).norm() < 1e-14);
        let v = j_half(&g, &om).unwrap();
        assert!((v - 0.5 / g.epsilon).norm() < 1e-12);
        assert!((v * v + 0.25).norm() < 1e-12);
    }

    #[test]
    fn j_m_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = point(&mut rng, 2, 1);
        let index = IndexMatrix::identity(1);
        let id = JacobiElement::identity(2, 1);
        assert!((j_m(&id, &p, &index).unwrap() - 1.0).norm() < 1e-14);
        let kappa = RMat::from_row_slice(1, 1, &[0.3]);
        let h = HeisenbergElement::new(RMat::zeros(1, 2), RMat::zeros(1, 2), kappa).unwrap();
        let x = JacobiElement::new(SymplecticElement::identity(2), h).unwrap();
        let expect = (I * (-2.0 * PI * 0.3)).exp();
        assert!((j_m(&x, &p, &index).unwrap() - expect).norm() < 1e-14);
        let b = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let t = JacobiElement::new(SymplecticElement::translation(&b).unwrap(), HeisenbergElement::identity(1, 2))
            .unwrap();
        assert!((j_m(&t, &p, &index).unwrap() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn j_m_modulus_depends_on_imaginary_parts_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let opts = WordOptions { heisenberg: true, random_sheets: false, integral: false };
        for _ in 0..20 {
            let gen = crate::groups::random_generator(&mut rng, 2, 1, crate::groups::GenKind::Heisenberg, opts);
            let x = gen.to_element(1).unwrap().jacobi();
            let p = point(&mut rng, 2, 1);
            let dx = crate::matcore::random_symmetric(&mut rng, 2, 0.4);
            let du = RMat::from_fn(1, 2, |_, _| rng.random_range(-0.5..0.5));
            let om2 = crate::matcore::validate_siegel(&(p.omega.omega() + to_complex(&dx))).unwrap();
            let q = JacobiPoint::new(om2, &p.z + to_complex(&du)).unwrap();
            let index = IndexMatrix::identity(1);
            let a = j_m(&x, &p, &index).unwrap().norm();
            let b = j_m(&x, &q, &index).unwrap().norm();
            assert!((a - b).abs() < 1e-12 * a.max(b));
        }
    }

    #[test]
    fn j_m_star_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (n, m) in [(1, 1), (2, 3)] {
            let p = point(&mut rng, n, m);
            let index = IndexMatrix::identity(m);
            let id = MetaJacobiElement::identity(n, m);
            assert!((j_m_star(&id, &p, &index).unwrap() - 1.0).norm() < 1e-13);

            let opts = WordOptions { heisenberg: true, ..Default::default() };
            let gen = crate::groups::random_generator(&mut rng, n, m, crate::groups::GenKind::Heisenberg, WordOptions { random_sheets: false, ..opts });
            let x = gen.to_element(m).unwrap();
            let h = &x.h;
            let mc = index.complex();
            let lam = to_complex(&h.lambda);
            let om = p.omega.omega();
            let inner = &lam * om * lam.transpose() + (&lam * p.z.transpose()).scale(2.0)
                + to_complex(&h.kappa) + to_complex(&(&h.mu * h.lambda.transpose()));
            let expect = (-I * PI * trace(&(&mc * inner))).exp();
            assert!((j_m_star(&x, &p, &index).unwrap() - expect).norm() < 1e-12 * expect.norm());

            let s = meta_lift(&SymplecticElement::inversion(n), 1).unwrap();
            let x = MetaJacobiElement::new(s.clone(), HeisenbergElement::identity(m, n)).unwrap();
            let oinv = om.clone().try_inverse().unwrap();
            let dsq = crate::matcore::det_sqrt_at(crate::matcore::DetArg::OmegaOverI(&p.omega), m as i32).unwrap();
            let expect = s.epsilon.powi(-(m as i32)) * dsq
                * (I * PI * trace(&(&mc * &p.z * oinv * p.z.transpose()))).exp();
            let got = j_m_star(&x, &p, &index).unwrap();
            assert!((got - expect).norm() < 1e-12 * expect.norm());
        }
        let p = point(&mut rng, 1, 2);
        assert!(matches!(
            j_m_star(&MetaJacobiElement::identity(1, 2), &p, &IndexMatrix::identity(2)),
            Err(Error::EvenM { m: 2 })
        ));
    }

    #[test]
    fn j_k_m_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let opts = WordOptions { heisenberg: true, ..Default::default() };
        for k in -3..=3 {
            let p = point(&mut rng, 2, 1);
            let params = SlashParams::new(k, IndexMatrix::identity(1));
            let id = MetaJacobiElement::identity(2, 1);
            assert!((j_k_m(&id, &p, &params).unwrap() - 1.0).norm() < 1e-13);
        }
        let params = SlashParams::new(2, IndexMatrix::identity(1));
        assert!(!params.is_half_integral());
        for _ in 0..10 {
            let x = word_element(&random_word(&mut rng, 2, 1, 3, opts), 2, 1).unwrap();
            let p = point(&mut rng, 2, 1);
            let Ok(v) = j_k_m(&x, &p, &params) else { continue };
            let det = j_matrix(&x.base.g, &p.omega).determinant();
            let expect = j_m(&x.jacobi(), &p, &params.index).unwrap() * det;
            assert!((v - expect).norm() < 1e-9 * expect.norm());
        }
    }

    #[test]
    fn slash_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p = point(&mut rng, 1, 1);
        let params = SlashParams::new(1, IndexMatrix::identity(1));
        let f = |q: &JacobiPoint| -> Result<Complex64> { Ok(q.omega.omega()[(0, 0)] * 2.0 + q.z[(0, 0)]) };
        let g = slash(f, JacobiElement::identity(1, 1), params.clone());
        assert!((g(&p).unwrap() - f(&p).unwrap()).norm() < 1e-14);
        let kappa = RMat::from_row_slice(1, 1, &[0.25]);
        let h = HeisenbergElement::new(RMat::zeros(1, 1), RMat::zeros(1, 1), kappa).unwrap();
        let x = JacobiElement::new(SymplecticElement::identity(1), h).unwrap();
        let one = slash(|_: &JacobiPoint| Ok(Complex64::new(1.0, 0.0)), x, params);
        let expect = (I * 2.0 * PI * 0.25).exp();
        assert!((one(&p).unwrap() - expect).norm() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn j_half_square_cocycle_and_flip(n in 1usize..=3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let om = random_siegel_with(&mut rng, n, 1.0, 0.3);
            let g = meta(&mut rng, n, 3);
            let h = meta(&mut rng, n, 3);
            let v = j_half(&g, &om).unwrap();
            let det = j_matrix(&g.g, &om).determinant();
            prop_assert!((v * v - det).norm() <= 1e-9 * det.norm());
            prop_assert_eq!(j_half(&g.flipped(), &om).unwrap(), -v);
            let gh = meta_mul(&g, &h).unwrap();
            let lhs = j_half(&gh, &om).unwrap();
            let rhs = j_half(&g, &siegel_action(&h.g, &om).unwrap()).unwrap() * j_half(&h, &om).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm());
        }

        #[test]
        fn j_m_star_automorphic(n in 1usize..=2, mi in 0usize..2, seed in any::<u64>()) {
            let m = [1, 3][mi];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let opts = WordOptions { heisenberg: true, ..Default::default() };
            let x = word_element(&random_word(&mut rng, n, m, 2, opts), n, m).unwrap();
            let y = word_element(&random_word(&mut rng, n, m, 2, opts), n, m).unwrap();
            let p = point(&mut rng, n, m);
            let index = IndexMatrix::identity(m);
            let xy = meta_jacobi_mul(&x, &y).unwrap();
            let lhs = j_m_star(&xy, &p, &index).unwrap();
            let rhs = j_m_star(&x, &y.act(&p).unwrap(), &index).unwrap() * j_m_star(&y, &p, &index).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()));
        }

        #[test]
        fn slash_cocycle(n in 1usize..=2, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 1;
            let opts = WordOptions { heisenberg: true, ..Default::default() };
            let x = word_element(&random_word(&mut rng, n, m, 2, opts), n, m).unwrap().jacobi();
            let y = word_element(&random_word(&mut rng, n, m, 2, opts), n, m).unwrap().jacobi();
            let params = SlashParams::new(3, IndexMatrix::identity(m));
            let f = |q: &JacobiPoint| -> Result<Complex64> {
                Ok((q.omega.omega()[(0, 0)] + q.z[(0, 0)] * 0.5).exp())
            };
            let fx = slash(f, x.clone(), params.clone());
            let fxy = slash(fx, y.clone(), params.clone());
            let direct = slash(f, jacobi_mul(&x, &y).unwrap(), params);
            for _ in 0..20 {
                let p = point(&mut rng, n, m);
                let a = fxy(&p).unwrap();
                let b = direct(&p).unwrap();
                prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0));
            }
        }
    }
}
