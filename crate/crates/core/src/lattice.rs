//! Certified summation of Gaussian-envelope lattice sums.
//!
//! A sum `Σ_{v ∈ Z^d} f(v)` qualifies when `|f(v)| = K exp(-π q(v - c))` for a
//! real positive definite form `q`. Terms outside the ellipsoid
//! `q(v - c) <= T` are bounded through the lattice point count
//! `N(t) <= V_d (sqrt t + ρ)^d / sqrt(det q)`, `ρ = ½ sqrt(Σ|q_ij|)`, which
//! gives `Σ_{q > T} e^{-π q} <= π ∫_T^∞ e^{-π t} N(t) dt`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::RMat;

/// Relative tolerance below which double precision cannot certify a sum.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;
/// Enumeration refuses more points than this.
pub const MAX_POINTS: usize = 8_000_000;

/// `|f(v)| = exp(log_peak) exp(-π (v - center)^t q (v - center))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnvelope {
    pub q: RMat,
    pub center: DVector<f64>,
    pub log_peak: f64,
}

/// Result of [`certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Ellipsoid level `T`.
    pub threshold: f64,
    /// Infinity-norm radius of the box enclosing the ellipsoid.
    pub radius: usize,
    /// Absolute bound on the discarded terms.
    pub tail: f64,
    /// `max(1, K)`, the scale the tolerance is relative to.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSum {
    pub value: Complex64,
    pub certificate: Certificate,
    /// Tail bound plus an a-posteriori rounding estimate.
    pub certified_tol: f64,
    pub terms: usize,
}

fn unit_ball_volume(d: usize) -> f64 {
    let (mut a, mut b) = (1.0, 2.0);
    if d == 0 {
        return a;
    }
    for k in 2..=d {
        let next = 2.0 * std::f64::consts::PI / k as f64 * a;
        a = b;
        b = next;
    }
    b
}

impl GaussianEnvelope {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn count_params(&self) -> (f64, f64) {
        let d = self.dim();
        let det = self.q.clone().cholesky().map(|c| c.determinant()).unwrap_or(0.0);
        let rho = 0.5 * self.q.iter().map(|x| x.abs()).sum::<f64>().sqrt();
        (unit_ball_volume(d) / det.sqrt(), rho)
    }

    /// Upper bound on `#{v : q(v - c) <= t}`.
    pub fn count_bound(&self, t: f64) -> f64 {
        let (a, rho) = self.count_params();
        a * (t.max(0.0).sqrt() + rho).powi(self.dim() as i32)
    }

    /// Upper bound on `Σ_{q(v - c) > T} exp(-π q(v - c))` (peak excluded).
    pub fn tail_bound(&self, threshold: f64) -> f64 {
        let (a, rho) = self.count_params();
        let d = self.dim() as i32;
        let pi = std::f64::consts::PI;
        let g = |t: f64| (-pi * t).exp() * (t.sqrt() + rho).powi(d);
        let h = 0.02;
        let mut t = threshold.max(0.0);
        let mut acc = 0.0;
        loop {
            // e^{-πt} decreases and the polynomial increases on [t, t + h].
            let piece = h * (-pi * t).exp() * ((t + h).sqrt() + rho).powi(d);
            acc += piece;
            t += h;
            // log-derivative of g is <= -π/2 once d / (2 sqrt(t)(sqrt(t) + ρ)) <= π/2
            let decaying = d as f64 <= pi * t.sqrt() * (t.sqrt() + rho);
            if decaying && piece <= 1e-20 * acc {
                acc += g(t) * 2.0 / pi;
                break;
            }
            if !acc.is_finite() {
                break;
            }
        }
        pi * a * acc
    }

    /// Box radius `max_i ceil(|c_i| + sqrt(T (q^{-1})_ii))`.
    pub fn box_radius(&self, threshold: f64) -> usize {
        let qinv = self
            .q
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| RMat::from_element(self.dim(), self.dim(), f64::INFINITY));
        (0..self.dim())
            .map(|i| (self.center[i].abs() + (threshold * qinv[(i, i)]).sqrt()).ceil())
            .fold(0.0, f64::max) as usize
    }
}

/// Smallest level `T` (to bisection accuracy) whose tail is within
/// `tol * max(1, K)`.
pub fn certify(env: &GaussianEnvelope, tol: f64, max_radius: usize) -> Result<Certificate> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if tol < ROUNDOFF_FLOOR {
        return Err(Error::RadiusCapExceeded {
            needed: None,
            cap: max_radius,
        });
    }
    let scale = env.log_peak.max(0.0).exp();
    // K * tail(T) <= tol * max(1, K)
    let target = tol * (env.log_peak.max(0.0) - env.log_peak).exp();
    let ok = |t: f64| env.tail_bound(t) <= target;
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::RadiusCapExceeded {
                needed: None,
                cap: max_radius,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let radius = env.box_radius(hi);
    if radius > max_radius {
        return Err(Error::RadiusCapExceeded {
            needed: Some(radius),
            cap: max_radius,
        });
    }
    Ok(Certificate {
        threshold: hi,
        radius,
        tail: env.tail_bound(hi) * env.log_peak.exp(),
        scale,
    })
}

/// Integer points with `q(v - c) <= T`, in increasing infinity norm and
/// lexicographic order within a shell. Returned flat, `d` entries per point.
pub fn enumerate(env: &GaussianEnvelope, threshold: f64) -> Result<Vec<i32>> {
    let d = env.dim();
    let chol = env
        .q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("quadratic form is not positive definite".into()))?;
    // q = U^t U with U upper triangular
    let u = chol.l().transpose();
    let budget = threshold * (1.0 + 1e-12) + 1e-12;
    let mut out: Vec<i32> = Vec::new();
    let mut x = vec![0i32; d];
    let mut count = 0usize;
    enum_rec(&u, &env.center, d, budget, &mut x, &mut out, &mut count)?;
    let npts = out.len() / d.max(1);
    let mut idx: Vec<usize> = (0..npts).collect();
    let key = |i: usize| {
        let p = &out[i * d..(i + 1) * d];
        (p.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0), p.to_vec())
    };
    idx.sort_by_cached_key(|&i| key(i));
    let mut sorted = Vec::with_capacity(out.len());
    for i in idx {
        sorted.extend_from_slice(&out[i * d..(i + 1) * d]);
    }
    Ok(sorted)
}

fn enum_rec(
    u: &RMat,
    c: &DVector<f64>,
    level: usize,
    budget: f64,
    x: &mut [i32],
    out: &mut Vec<i32>,
    count: &mut usize,
) -> Result<()> {
    if level == 0 {
        *count += 1;
        if *count > MAX_POINTS {
            return Err(Error::RadiusCapExceeded {
                needed: None,
                cap: MAX_POINTS,
            });
        }
        out.extend_from_slice(x);
        return Ok(());
    }
    let i = level - 1;
    let d = x.len();
    let uii = u[(i, i)];
    let mut s = 0.0;
    for j in (i + 1)..d {
        s += u[(i, j)] * (x[j] as f64 - c[j]);
    }
    // row i contributes (uii (x_i - c_i) + s)^2
    let mid = c[i] - s / uii;
    let r = budget.max(0.0).sqrt() / uii;
    let lo = (mid - r).ceil() as i64;
    let hi = (mid + r).floor() as i64;
    for xi in lo..=hi {
        x[i] = xi as i32;
        let t = uii * (xi as f64 - c[i]) + s;
        let rest = budget - t * t;
        if rest < 0.0 {
            continue;
        }
        enum_rec(u, c, level - 1, rest, x, out, count)?;
    }
    x[i] = 0;
    Ok(())
}

/// Certified sum of `f` over `Z^d` for an envelope bounding `|f|`. `f`
/// returns each term with a bound on its evaluation error; terms are added
/// with Neumaier compensation in enumeration order.
pub fn certified_sum<F>(
    env: &GaussianEnvelope,
    tol: f64,
    max_radius: usize,
    f: F,
) -> Result<LatticeSum>
where
    F: Fn(&[i32]) -> (Complex64, f64),
{
    let cert = certify(env, tol, max_radius)?;
    let d = env.dim();
    let pts = enumerate(env, cert.threshold)?;
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    let mut eval_err = 0.0;
    let terms = pts.len() / d.max(1);
    for p in pts.chunks_exact(d) {
        let (t, e) = f(p);
        re.add(t.re);
        im.add(t.im);
        eval_err += e;
    }
    let value = Complex64::new(re.total(), im.total());
    let rounding = 2.0 * f64::EPSILON * value.norm()
        + terms as f64 * f64::EPSILON * f64::EPSILON * (re.abs + im.abs)
        + eval_err * (1.0 + terms as f64 * f64::EPSILON);
    Ok(LatticeSum {
        value,
        certificate: cert,
        certified_tol: cert.tail + rounding,
        terms,
    })
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Plain box sum over `max |v_i| <= radius` in shell order, no certification.
pub fn box_sum<F>(d: usize, radius: usize, f: F) -> Complex64
where
    F: Fn(&[i32]) -> Complex64,
{
    let r = radius as i32;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut v = vec![0i32; d];
    for shell in 0..=r {
        v.fill(-shell);
        'walk: loop {
            if v.iter().any(|x| x.abs() == shell) {
                acc += f(&v);
            }
            let mut k = d;
            while k > 0 {
                k -= 1;
                if v[k] < shell {
                    v[k] += 1;
                    v[k + 1..].fill(-shell);
                    continue 'walk;
                }
            }
            break;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(d: usize, s: f64) -> GaussianEnvelope {
        GaussianEnvelope {
            q: RMat::identity(d, d) * s,
            center: DVector::zeros(d),
            log_peak: 0.0,
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn count_bound_dominates_enumeration() {
        for d in 1..=4 {
            let env = GaussianEnvelope {
                q: RMat::from_fn(d, d, |i, j| if i == j { 1.3 } else { 0.4 }),
                center: DVector::from_fn(d, |i, _| 0.3 * i as f64 - 0.2),
                log_peak: 0.0,
            };
            for t in [0.5, 2.0, 7.0, 15.0] {
                let n = enumerate(&env, t).unwrap().len() / d;
                assert!(n as f64 <= env.count_bound(t), "d={d} t={t} n={n}");
            }
        }
    }

    #[test]
    fn tail_bound_dominates_direct_tail() {
        for d in 1..=3 {
            let env = GaussianEnvelope {
                q: RMat::from_fn(d, d, |i, j| if i == j { 0.9 } else { 0.2 }),
                center: DVector::from_fn(d, |i, _| 0.4 - 0.25 * i as f64),
                log_peak: 0.0,
            };
            let qf = |v: &[i32]| {
                let y = DVector::from_fn(d, |i, _| v[i] as f64 - env.center[i]);
                (y.transpose() * &env.q * &y)[(0, 0)]
            };
            for t in [1.0, 3.0, 6.0] {
                let direct: f64 = {
                    let all = enumerate(&env, 60.0).unwrap();
                    all.chunks_exact(d)
                        .map(|v| qf(v))
                        .filter(|&q| q > t)
                        .map(|q| (-std::f64::consts::PI * q).exp())
                        .sum()
                };
                assert!(direct <= env.tail_bound(t), "d={d} t={t}");
            }
        }
    }

    #[test]
    fn enumeration_order_and_completeness() {
        let env = GaussianEnvelope {
            q: RMat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.7]),
            center: DVector::from_vec(vec![0.4, -0.6]),
            log_peak: 0.0,
        };
        let t = 5.0;
        let pts = enumerate(&env, t).unwrap();
        let mut brute = Vec::new();
        for a in -10i32..=10 {
            for b in -10i32..=10 {
                let y = DVector::from_vec(vec![a as f64 - 0.4, b as f64 + 0.6]);
                if (y.transpose() * &env.q * &y)[(0, 0)] <= t {
                    brute.push((a.abs().max(b.abs()), vec![a, b]));
                }
            }
        }
        brute.sort();
        let flat: Vec<i32> = brute.into_iter().flat_map(|(_, v)| v).collect();
        assert_eq!(pts, flat);
    }

    #[test]
    fn certificate_monotone() {
        let r1 = certify(&iso(1, 1.0), 1e-6, 100).unwrap().radius;
        let r2 = certify(&iso(1, 1.0), 1e-12, 100).unwrap().radius;
        assert!(r1 <= r2);
        let r3 = certify(&iso(2, 4.0), 1e-12, 100).unwrap().radius;
        let r4 = certify(&iso(2, 1.0), 1e-12, 100).unwrap().radius;
        assert!(r3 <= r4);
        assert!(matches!(
            certify(&iso(1, 1.0), 1e-30, 100),
            Err(Error::RadiusCapExceeded { .. })
        ));
        assert!(matches!(
            certify(&iso(1, 1e-6), 1e-12, 10),
            Err(Error::RadiusCapExceeded { needed: Some(_), .. })
        ));
    }

    #[test]
    fn box_sum_visits_every_point_once() {
        for d in 1..=3 {
            let n = box_sum(d, 2, |_| Complex64::new(1.0, 0.0));
            assert_eq!(n.re as usize, 5usize.pow(d as u32));
        }
    }
}
