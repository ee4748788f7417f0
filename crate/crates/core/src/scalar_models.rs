//! Closed-form comparison models.
//!
//! Two scalar functions drive every comparison bound:
//!
//! * `s_κ(t)`, the trace solution of the Riemannian model `ṡ + κ + s² = 0` with `s ~ 1/t` at zero;
//! * `s_{κa,κb}(t)`, the trace `tr(b_I v(t))` of the 2×2 type-I Riccati model with constant
//!   curvature `diag(κa, κb)`.
//!
//! Both are evaluated exactly, together with their first blow-up times.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{domain, Error, Result};

/// First blow-up time of a Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowUpTime {
    Finite(f64),
    Infinite,
}

impl BlowUpTime {
    /// The time as an extended real (`+∞` for [`BlowUpTime::Infinite`]).
    pub fn value(self) -> f64 {
        match self {
            BlowUpTime::Finite(t) => t,
            BlowUpTime::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, BlowUpTime::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            BlowUpTime::Finite(t) => Some(t),
            BlowUpTime::Infinite => None,
        }
    }
}

impl std::fmt::Display for BlowUpTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowUpTime::Finite(t) => write!(f, "{t}"),
            BlowUpTime::Infinite => write!(f, "inf"),
        }
    }
}

/// Curvature-type constants entering the comparison theorems. Negative values are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonConstants {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub kappa_omega: f64,
}

impl ComparisonConstants {
    pub fn new(kappa_a: f64, kappa_b: f64, kappa_c: f64, kappa_omega: f64) -> Result<Self> {
        for (what, value) in [
            ("kappa_a", kappa_a),
            ("kappa_b", kappa_b),
            ("kappa_c", kappa_c),
            ("kappa_omega", kappa_omega),
        ] {
            if !value.is_finite() {
                return Err(domain(what, value, "finite reals"));
            }
        }
        Ok(Self {
            kappa_a,
            kappa_b,
            kappa_c,
            kappa_omega,
        })
    }
}

/// The complex frequencies `θ±` attached to `(κa, κb)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair {
    pub x: C64,
    pub y: C64,
    pub theta_plus: C64,
    pub theta_minus: C64,
}

impl ThetaPair {
    /// `(κa, κb)` recovered from the frequencies.
    pub fn recovered_kappas(&self) -> (f64, f64) {
        let p2 = self.theta_plus * self.theta_plus;
        let m2 = self.theta_minus * self.theta_minus;
        let diff = p2 - m2;
        ((-(diff * diff)).re, (2.0 * (p2 + m2)).re)
    }
}

/// Below this `|κa|` the type-I model is treated as the `κa = 0` model.
pub const KAPPA_A_ZERO: f64 = 1e-14;

const COINCIDENCE_REL: f64 = 1e-7;
const IMAG_TOL: f64 = 1e-10;
const ROOT_SCAN_STEPS: usize = 1024;
const ROOT_TOL: f64 = 1e-12;

pub fn theta_from_kappas(kappa_a: f64, kappa_b: f64) -> ThetaPair {
    let x = C64::new(kappa_b / 2.0, 0.0);
    let y = C64::new(4.0 * kappa_a + kappa_b * kappa_b, 0.0).sqrt() / 2.0;
    let sp = (x + y).sqrt();
    let sm = (x - y).sqrt();
    ThetaPair {
        x,
        y,
        theta_plus: (sp + sm) / 2.0,
        theta_minus: (sp - sm) / 2.0,
    }
}

/// `sin z / z` with the removable singularity filled in.
pub fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `sinc'(u) / u`, smooth and even in `u` with value `-1/3` at zero.
fn sinc_prime_over_u(u: C64) -> C64 {
    if u.norm() < 0.1 {
        let u2 = u * u;
        // Coefficients (-1)^k 2k / (2k+1)! for k = 1..5.
        let c = [
            -1.0 / 3.0,
            1.0 / 30.0,
            -1.0 / 840.0,
            1.0 / 45360.0,
            -1.0 / 3991680.0,
        ];
        let mut acc = C64::new(c[4], 0.0);
        for &ck in c[..4].iter().rev() {
            acc = acc * u2 + ck;
        }
        acc
    } else {
        (u * u.cos() - u.sin()) / (u * u * u)
    }
}

pub fn blowup_time_kc(kappa_c: f64) -> BlowUpTime {
    if kappa_c > 0.0 {
        BlowUpTime::Finite(PI / kappa_c.sqrt())
    } else {
        BlowUpTime::Infinite
    }
}

pub fn eval_s_kc(kappa_c: f64, t: f64) -> Result<f64> {
    let tbar = blowup_time_kc(kappa_c).value();
    if !(t > 0.0 && t < tbar) || !kappa_c.is_finite() {
        return Err(domain("t", t, format!("(0, {tbar})")));
    }
    Ok(if kappa_c > 0.0 {
        let r = kappa_c.sqrt();
        r / (r * t).tan()
    } else if kappa_c < 0.0 {
        let r = (-kappa_c).sqrt();
        r / (r * t).tanh()
    } else {
        1.0 / t
    })
}

/// Conditions under which the type-I model blows up in finite time.
pub fn finiteness_predicate(kappa_a: f64, kappa_b: f64) -> bool {
    (kappa_b >= 0.0 && kappa_b * kappa_b + 4.0 * kappa_a > 0.0) || (kappa_b < 0.0 && kappa_a > 0.0)
}

/// `2π / Re(√(x+y) − √(x−y))`, or `+∞` when the denominator vanishes.
pub fn upper_bound_kab(kappa_a: f64, kappa_b: f64) -> f64 {
    let th = theta_from_kappas(kappa_a, kappa_b);
    let den = 2.0 * th.theta_minus.re;
    if den <= 1e-300 {
        f64::INFINITY
    } else {
        2.0 * PI / den
    }
}

/// First positive root of `f` in `[lo, hi]`, where `f(lo) > 0`.
fn first_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let step = (hi - lo) / ROOT_SCAN_STEPS as f64;
    let mut a = lo;
    let mut fa = f(a);
    for j in 1..=ROOT_SCAN_STEPS {
        let b = if j == ROOT_SCAN_STEPS {
            hi
        } else {
            lo + j as f64 * step
        };
        let fb = f(b);
        if fb == 0.0 {
            return Some(b);
        }
        if fa.signum() != fb.signum() {
            let (mut a, mut b) = (a, b);
            while b - a > ROOT_TOL * b.abs().max(1.0) {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    return Some(m);
                }
                if fm.signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        a = b;
        fa = fb;
    }
    None
}

pub fn blowup_time_kab(kappa_a: f64, kappa_b: f64) -> BlowUpTime {
    if kappa_a.abs() < KAPPA_A_ZERO {
        return if kappa_b > 0.0 {
            BlowUpTime::Finite(2.0 * PI / kappa_b.sqrt())
        } else {
            BlowUpTime::Infinite
        };
    }
    if !finiteness_predicate(kappa_a, kappa_b) {
        return BlowUpTime::Infinite;
    }
    let th = theta_from_kappas(kappa_a, kappa_b);
    if kappa_a > 0.0 {
        // Complex-conjugate frequencies α ∓ iβ with β > 0.
        let x = th.x.re;
        let y = th.y.re;
        let alpha = (x + y).sqrt() / 2.0;
        let beta = (y - x).max(0.0).sqrt() / 2.0;
        if beta == 0.0 {
            return BlowUpTime::Finite(PI / alpha);
        }
        let g = |t: f64| alpha * (alpha * t).sin() + beta * (alpha * t).cos() * (beta * t).tanh();
        let root = first_root(g, PI / (2.0 * alpha), PI / alpha)
            .expect("bracket (π/2α, π/α) always contains a sign change");
        BlowUpTime::Finite(root)
    } else {
        let tp = th.theta_plus.re;
        let tm = th.theta_minus.re;
        let chi = |t: f64| {
            let a = sinc(C64::new(tm * t, 0.0)).re;
            let b = sinc(C64::new(tp * t, 0.0)).re;
            a * a - b * b
        };
        let root = first_root(chi, PI / tp, PI / tm)
            .expect("bracket (π/θ+, π/θ−) always contains a sign change");
        BlowUpTime::Finite(root)
    }
}

fn check_real(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "{what} has imaginary part {} (real part {})",
            z.im, z.re
        )));
    }
    Ok(z.re)
}

/// `θ−` replaced by `−θ−` when that brings it closer to `θ+`; all model expressions are even in each θ.
fn aligned_thetas(th: &ThetaPair) -> (C64, C64) {
    let p = th.theta_plus;
    let m = th.theta_minus;
    if (p + m).norm() < (p - m).norm() {
        (p, -m)
    } else {
        (p, m)
    }
}

fn is_coincident(p: C64, m: C64) -> bool {
    (p - m).norm() <= COINCIDENCE_REL * p.norm().max(m.norm())
}

pub fn eval_s_kab(kappa_a: f64, kappa_b: f64, t: f64) -> Result<f64> {
    if !(kappa_a.is_finite() && kappa_b.is_finite()) {
        return Err(domain("kappa", f64::NAN, "finite reals"));
    }
    let tbar = blowup_time_kab(kappa_a, kappa_b).value();
    if !(t > 0.0 && t < tbar) {
        return Err(domain("t", t, format!("(0, {tbar})")));
    }
    let ka = if kappa_a.abs() < KAPPA_A_ZERO {
        0.0
    } else {
        kappa_a
    };
    let th = theta_from_kappas(ka, kappa_b);
    let (p, m) = aligned_thetas(&th);
    let value = if is_coincident(p, m) {
        // Limit of the difference quotient: ratio of θ-derivatives at the midpoint.
        let u = (p + m) / 2.0 * t;
        let ratio = 2.0 * sinc_prime_over_u(2.0 * u) / (sinc(u) * sinc_prime_over_u(u));
        2.0 * ratio / t
    } else {
        let num = sinc(2.0 * m * t) - sinc(2.0 * p * t);
        let sm = sinc(m * t);
        let sp = sinc(p * t);
        (2.0 / t) * num / (sm * sm - sp * sp)
    };
    check_real(value, "s_{κa,κb}")
}

/// `det n(t)` of the type-I Jacobi system with constant curvature `diag(κa, κb)`.
pub fn type_i_det_n(kappa_a: f64, kappa_b: f64, t: f64) -> Result<f64> {
    let th = theta_from_kappas(kappa_a, kappa_b);
    let (p, m) = aligned_thetas(&th);
    let t2 = t * t;
    let value = if is_coincident(p, m) {
        // d/dθ sinc(θt)² / (2θ) at the midpoint.
        let mid = (p + m) / 2.0;
        let u = mid * t;
        t2 * t2 * sinc(u) * sinc_prime_over_u(u) / (-4.0)
    } else {
        let sm = sinc(m * t);
        let sp = sinc(p * t);
        t2 * (sm * sm - sp * sp) / (4.0 * (p * p - m * m))
    };
    check_real(value, "det n")
}

/// Which step of the diameter argument certifies `t̄ ≤ π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateBranch {
    /// `v = 0`: `t̄(0, 4) = π` exactly.
    Equality,
    /// `‖v‖ > √(8/7)`: `Re θ− > 1`.
    LargeVertical,
    /// `0 < ‖v‖ ≤ √(8/7)`: `χ_v(π) ≤ 0`.
    SmallVertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterCertificate {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub tbar: BlowUpTime,
    pub chi_at_pi: f64,
    pub theta_minus_re: f64,
    pub branch: CertificateBranch,
    /// Whether the branch-specific inequality holds.
    pub branch_holds: bool,
    pub passes: bool,
}

/// Threshold `√(8/7)` separating the two certificate branches.
pub fn certificate_threshold() -> f64 {
    (8.0f64 / 7.0).sqrt()
}

/// Bound constants `κa(v), κb(v)` for a 3-Sasakian manifold with sectional curvature `≥ K`.
pub fn sasakian_kappas(v_norm: f64, k: f64) -> (f64, f64) {
    let s = v_norm * v_norm;
    (s * (1.5 * k - 3.5 - 15.0 / 8.0 * s), 4.0 + 5.0 * s)
}

pub fn diameter_certificate(v_norm: f64, k: f64) -> Result<DiameterCertificate> {
    if !(v_norm >= 0.0) || !v_norm.is_finite() {
        return Err(domain("v_norm", v_norm, "[0, ∞)"));
    }
    if !(k >= -1.0) || !k.is_finite() {
        return Err(domain("K", k, "[-1, ∞)"));
    }
    let (kappa_a, kappa_b) = sasakian_kappas(v_norm, k);
    let tbar = blowup_time_kab(kappa_a, kappa_b);
    let th = theta_from_kappas(kappa_a, kappa_b);
    let (p, m) = aligned_thetas(&th);
    let sm = sinc(m * PI);
    let sp = sinc(p * PI);
    let chi_at_pi = (sm * sm - sp * sp).re;
    let theta_minus_re = th.theta_minus.re;
    let (branch, branch_holds) = if v_norm == 0.0 {
        (CertificateBranch::Equality, (tbar.value() - PI).abs() < 1e-12)
    } else if v_norm > certificate_threshold() {
        (CertificateBranch::LargeVertical, theta_minus_re > 1.0)
    } else {
        (CertificateBranch::SmallVertical, chi_at_pi <= 0.0)
    };
    Ok(DiameterCertificate {
        kappa_a,
        kappa_b,
        tbar,
        chi_at_pi,
        theta_minus_re,
        branch,
        branch_holds,
        passes: tbar.value() <= PI + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn s_kc_branches() {
        assert!(eval_s_kc(1.0, PI / 2.0).unwrap().abs() < 1e-15);
        assert_eq!(eval_s_kc(0.0, 2.0).unwrap(), 0.5);
        assert_relative_eq!(eval_s_kc(-1.0, 1.0).unwrap(), 1.0 / 1f64.tanh(), epsilon = 1e-15);
        assert!(eval_s_kc(1.0, PI).is_err());
        assert!(eval_s_kc(1.0, 0.0).is_err());
    }

    #[test]
    fn s_kc_is_continuous_at_zero_curvature() {
        let t = 0.7;
        let left = eval_s_kc(-1e-9, t).unwrap();
        let right = eval_s_kc(1e-9, t).unwrap();
        let mid = eval_s_kc(0.0, t).unwrap();
        assert!((left - mid).abs() < 1e-9 && (right - mid).abs() < 1e-9);
    }

    #[test]
    fn blowup_kc_values() {
        assert_eq!(blowup_time_kc(4.0), BlowUpTime::Finite(PI / 2.0));
        assert_eq!(blowup_time_kc(0.0), BlowUpTime::Infinite);
        assert_eq!(blowup_time_kc(-1.0), BlowUpTime::Infinite);
    }

    #[test]
    fn theta_examples() {
        let th = theta_from_kappas(0.0, 4.0);
        assert_relative_eq!(th.theta_plus.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(th.theta_minus.re, 1.0, epsilon = 1e-15);

        let th = theta_from_kappas(1.0, 0.0);
        assert_relative_eq!(th.theta_plus.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(th.theta_plus.im, 0.5, epsilon = 1e-15);
        assert_relative_eq!(th.theta_minus.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(th.theta_minus.im, -0.5, epsilon = 1e-15);

        let th = theta_from_kappas(-3.0, 4.0);
        let r3 = 3f64.sqrt();
        assert_relative_eq!(th.theta_plus.re, (r3 + 1.0) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(th.theta_minus.re, (r3 - 1.0) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn theta_recovers_kappas() {
        for &(ka, kb) in &[(-3.0, 4.0), (1.0, 0.0), (2.5, -1.5), (-0.3, -2.0), (0.0, 4.0)] {
            let (ra, rb) = theta_from_kappas(ka, kb).recovered_kappas();
            assert!((ra - ka).abs() <= 1e-12 * ka.abs().max(1.0));
            assert!((rb - kb).abs() <= 1e-12 * kb.abs().max(1.0));
        }
    }

    #[test]
    fn finiteness_examples() {
        assert!(finiteness_predicate(1.0, -5.0));
        assert!(!finiteness_predicate(0.0, 0.0));
        assert!(!finiteness_predicate(-1.0, 1.0));
        assert!(finiteness_predicate(1.0, 0.0));
        assert!(finiteness_predicate(0.0, 4.0));
    }

    #[test]
    fn blowup_kab_examples() {
        assert_relative_eq!(blowup_time_kab(0.0, 4.0).value(), PI, epsilon = 1e-15);
        assert_eq!(blowup_time_kab(0.0, 0.0), BlowUpTime::Infinite);
        let t = blowup_time_kab(-3.0, 4.0).value();
        let th = theta_from_kappas(-3.0, 4.0);
        assert!(t > PI / th.theta_plus.re && t < PI / th.theta_minus.re);
        assert!(t > 2.3005 && t < 8.5836);
    }

    #[test]
    fn blowup_kab_tiny_kappa_a_with_nonpositive_kappa_b() {
        assert_eq!(blowup_time_kab(1e-15, -1.0), BlowUpTime::Infinite);
        assert_eq!(blowup_time_kab(-1e-15, 0.0), BlowUpTime::Infinite);
    }

    #[test]
    fn upper_bound_examples() {
        assert_relative_eq!(upper_bound_kab(0.0, 4.0), PI, epsilon = 1e-15);
        assert_relative_eq!(upper_bound_kab(1.0, 0.0), 2.0 * PI, epsilon = 1e-14);
        assert!(blowup_time_kab(1.0, 0.0).value() < 2.0 * PI);
        let b = upper_bound_kab(-3.0, 4.0);
        assert_relative_eq!(b, 2.0 * PI / (3f64.sqrt() - 1.0), epsilon = 1e-12);
        assert!(blowup_time_kab(-3.0, 4.0).value() < b);
        assert_eq!(upper_bound_kab(0.0, 0.0), f64::INFINITY);
        assert_eq!(upper_bound_kab(-1.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn s_kab_coincident_limit() {
        assert_relative_eq!(eval_s_kab(0.0, 4.0, PI / 2.0).unwrap(), PI / 2.0, epsilon = 1e-12);
        // Closed form α(αt/(1 − αt cot αt) + cot αt) with α = 1.
        let t = 1.3f64;
        let cot = 1.0 / t.tan();
        let expected = t / (1.0 - t * cot) + cot;
        assert_relative_eq!(eval_s_kab(0.0, 4.0, t).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn s_kab_near_coincidence_is_continuous() {
        let t = 1.1;
        let exact = eval_s_kab(0.0, 4.0, t).unwrap();
        for &eps in &[1e-9, 1e-8, 1e-6, 1e-5] {
            let near = eval_s_kab(-eps, 4.0, t).unwrap();
            assert!((near - exact).abs() < 1e-4, "eps = {eps}: {near} vs {exact}");
        }
    }

    #[test]
    fn s_kab_small_t_limit() {
        for &(ka, kb) in &[(-3.0, 4.0), (1.0, 0.0), (0.0, 4.0), (0.0, 0.0), (-1.0, 1.0)] {
            let t = 1e-3;
            let v = t * eval_s_kab(ka, kb, t).unwrap();
            assert!((v - 4.0).abs() < 1e-5, "({ka},{kb}) gives {v}");
        }
    }

    #[test]
    fn s_kab_domain_errors() {
        assert!(eval_s_kab(0.0, 4.0, PI).is_err());
        assert!(eval_s_kab(0.0, 4.0, -1.0).is_err());
        assert!(eval_s_kab(0.0, 0.0, 50.0).is_ok());
    }

    #[test]
    fn det_n_free_case() {
        for &t in &[0.1, 1.0, 2.5] {
            let d = type_i_det_n(0.0, 0.0, t).unwrap();
            assert_relative_eq!(d, t.powi(4) / 12.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn det_n_vanishes_at_blowup() {
        for &(ka, kb) in &[(-3.0, 4.0), (1.0, 0.0), (1.0, -5.0), (0.0, 4.0)] {
            let t = blowup_time_kab(ka, kb).value();
            let d = type_i_det_n(ka, kb, t).unwrap();
            let scale = type_i_det_n(ka, kb, t / 2.0).unwrap().abs();
            // Steep crossings: the root is only resolved to ROOT_TOL in t.
            let h = 1e-6 * t;
            let slope = (type_i_det_n(ka, kb, t + h).unwrap() - type_i_det_n(ka, kb, t - h).unwrap()) / (2.0 * h);
            let allowed = 1e-9 * scale.max(1.0) + 10.0 * ROOT_TOL * t * slope.abs();
            assert!(d.abs() < allowed, "({ka},{kb}): {d} vs {allowed}");
        }
    }

    #[test]
    fn certificate_examples() {
        let c = diameter_certificate(0.0, -1.0).unwrap();
        assert_eq!((c.kappa_a, c.kappa_b), (0.0, 4.0));
        assert_relative_eq!(c.tbar.value(), PI, epsilon = 1e-15);
        assert!(c.passes && c.branch_holds);

        let c = diameter_certificate(1.0, 1.0).unwrap();
        assert_relative_eq!(c.kappa_a, -3.875, epsilon = 1e-15);
        assert_eq!(c.kappa_b, 9.0);
        assert!(c.passes);

        let c = diameter_certificate(2.0, -1.0).unwrap();
        assert_eq!(c.branch, CertificateBranch::LargeVertical);
        assert!(c.branch_holds && c.passes);

        assert!(diameter_certificate(1.0, -1.5).is_err());
        assert!(diameter_certificate(-1.0, 0.0).is_err());
    }

    #[test]
    fn certificate_small_branch_holds_for_k_minus_one() {
        let rho = certificate_threshold();
        for i in 1..=200 {
            let v = rho * i as f64 / 200.0;
            let c = diameter_certificate(v, -1.0).unwrap();
            assert_eq!(c.branch, CertificateBranch::SmallVertical);
            assert!(c.branch_holds, "v = {v}: χ(π) = {}", c.chi_at_pi);
            assert!(c.passes);
        }
    }
}
