//! The verification suite: twelve numbered checks of the comparison bounds, run end to end.
//!
//! Every check is deterministic for a given seed. Wall-clock limits only affect the pass bit,
//! never the reported numbers, so two runs with the same seed print the same details.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fat_structure::trace_inequality_gap;
use crate::qhf_geodesics::{
    conjugate_time_with, integrate_extremal, random_unit_covector, sublaplacian_along,
};
use crate::riccati_engine::{first_blowup, integrate_jacobi, StructuralPair};
use crate::sasakian_curvature::{
    curvature_blocks, qhf_curvature_inputs, ricci_scalars, VerticalVector,
};
use crate::scalar_models::{
    blowup_time_kab, blowup_time_kc, eval_s_kab, eval_s_kc, finiteness_predicate,
    upper_bound_kab, BlowUpTime, KAPPA_A_ZERO,
};

pub const DEFAULT_SEED: u64 = 42;

/// Deliberate defects, used to check that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flips the sign of the canonical curvature matrix.
    CurvatureSign,
}

impl Fault {
    fn curvature_scale(self) -> f64 {
        match self {
            Fault::None => 1.0,
            Fault::CurvatureSign => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub fault: Fault,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// The worst observed error or margin, in the units of the check.
    pub worst: f64,
    pub detail: String,
    pub elapsed: Duration,
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "exact anchors"),
    (2, "scalar vs Jacobi blow-up"),
    (3, "closed-form upper bound"),
    (4, "Riemannian sanity"),
    (5, "QHF d=2 conjugate time"),
    (6, "QHF d=1 conjugate time"),
    (7, "conservation along extremals"),
    (8, "algebraic identities"),
    (9, "Ricci traces"),
    (10, "sub-Laplacian comparison"),
    (11, "homogeneity"),
    (12, "suite runtime and determinism"),
];

const SUITE_LIMIT: Duration = Duration::from_secs(120);

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ id as u64)
}

struct Check {
    passed: bool,
    worst: f64,
    detail: String,
}

/// Runs one numbered check; `12` re-runs the cheap seeded checks to test determinism.
pub fn run_criterion(id: u8, cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .ok_or_else(|| Error::InvalidInput(format!("no criterion {id}")))?;
    let start = Instant::now();
    let res = match id {
        1 => anchors(),
        2 => cross_oracle(cfg),
        3 => upper_bound(cfg),
        4 => riemannian(),
        5 => qhf_conjugate(2, cfg),
        6 => qhf_conjugate(1, cfg),
        7 => conservation(cfg),
        8 => identities(cfg),
        9 => ricci_traces(cfg),
        10 => laplacian(),
        11 => homogeneity(cfg),
        _ => determinism(cfg),
    };
    let elapsed = start.elapsed();
    let mut check = res.unwrap_or_else(|e| Check {
        passed: false,
        worst: f64::NAN,
        detail: format!("error: {e}"),
    });
    let limit = match id {
        1 => Some(Duration::from_secs(1)),
        2 => Some(Duration::from_secs(10)),
        5 => Some(Duration::from_secs(60)),
        _ => None,
    };
    if limit.is_some_and(|l| elapsed > l) {
        check.passed = false;
    }
    Ok(CriterionOutcome {
        id,
        name,
        passed: check.passed,
        worst: check.worst,
        detail: check.detail,
        elapsed,
    })
}

/// All twelve checks in order. The last one fails if the whole run exceeds two minutes.
pub fn run_all(cfg: &VerifyConfig) -> Vec<CriterionOutcome> {
    let start = Instant::now();
    let mut out: Vec<CriterionOutcome> = CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, cfg).expect("known criterion"))
        .collect();
    if start.elapsed() > SUITE_LIMIT {
        out.last_mut().unwrap().passed = false;
    }
    out
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.abs().max(1.0)
}

fn anchors() -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (ka, kb, expect) in [(0.0, 4.0, PI), (0.0, 1.0, 2.0 * PI)] {
        let e = (blowup_time_kab(ka, kb).value() - expect).abs();
        ok &= e < 1e-9;
        worst = worst.max(e);
    }
    for k in [1.0f64, 4.0, 9.0] {
        let e = (blowup_time_kc(k).value() - PI / k.sqrt()).abs();
        ok &= e < 1e-12;
        worst = worst.max(e);
    }
    Ok(Check {
        passed: ok,
        worst,
        detail: format!("max abs error {worst:.3e}"),
    })
}

fn diag2(ka: f64, kb: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[ka, 0.0, 0.0, kb])
}

/// Blow-up time of the 2×2 type-I model with `Q = diag(κa, κb)` from the Jacobi system alone,
/// searched on `(0, horizon]`.
pub fn jacobi_blowup_kab(ka: f64, kb: f64, horizon: f64, tol: f64) -> Result<BlowUpTime> {
    let pair = StructuralPair::type_i();
    let q = diag2(ka, kb);
    let sol = integrate_jacobi(&pair, |_| q.clone(), horizon, tol)?;
    first_blowup(&sol, 1e-4 * horizon.min(1.0), 1e-12)
}

fn kappa_samples(cfg: &VerifyConfig, id: u8, finite: usize, infinite: usize) -> Vec<(f64, f64)> {
    let mut rng = rng_for(cfg.seed, id);
    let (mut nf, mut ni) = (0, 0);
    let mut out = Vec::with_capacity(finite + infinite);
    while nf < finite || ni < infinite {
        let ka: f64 = rng.random_range(-5.0..5.0);
        let kb: f64 = rng.random_range(-5.0..5.0);
        if finiteness_predicate(ka, kb) {
            if nf < finite {
                nf += 1;
                out.push((ka, kb));
            }
        } else if ni < infinite {
            ni += 1;
            out.push((ka, kb));
        }
    }
    out
}

fn cross_oracle(cfg: &VerifyConfig) -> Result<Check> {
    let samples = kappa_samples(cfg, 2, 60, 20);
    let mut worst: f64 = 0.0;
    let mut spurious = 0;
    let mut finite = 0;
    for &(ka, kb) in &samples {
        match blowup_time_kab(ka, kb) {
            BlowUpTime::Finite(t) => {
                finite += 1;
                let j = jacobi_blowup_kab(ka, kb, 1.1 * t, 1e-11)?;
                worst = worst.max((j.value() - t).abs());
            }
            BlowUpTime::Infinite => {
                // Only the absence of a zero matters here, so a looser tolerance will do.
                if jacobi_blowup_kab(ka, kb, 1e3, 1e-8)?.is_finite() {
                    spurious += 1;
                }
            }
        }
    }
    Ok(Check {
        passed: worst < 1e-6 && spurious == 0,
        worst,
        detail: format!(
            "{finite} finite samples, max |Δt| {worst:.3e}; {} samples without (⋆), {spurious} spurious zeros",
            samples.len() - finite
        ),
    })
}

fn upper_bound(cfg: &VerifyConfig) -> Result<Check> {
    let mut samples = kappa_samples(cfg, 3, 200, 0);
    let mut rng = rng_for(cfg.seed, 103);
    for _ in 0..20 {
        samples.push((0.0, rng.random_range(0.1..5.0)));
    }
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for &(ka, kb) in &samples {
        let t = blowup_time_kab(ka, kb).value();
        let b = upper_bound_kab(ka, kb);
        let margin = b - t;
        worst = worst.min(margin);
        let equal = margin.abs() < 1e-9;
        if margin < -1e-12 || equal != (ka.abs() < KAPPA_A_ZERO) {
            bad += 1;
        }
    }
    Ok(Check {
        passed: bad == 0,
        worst,
        detail: format!(
            "{} samples ({} with κ_a = 0), min margin {worst:.3e}, {bad} violations",
            samples.len(),
            20
        ),
    })
}

fn riemannian() -> Result<Check> {
    let pair = StructuralPair::riemannian(3);
    let mut worst: f64 = 0.0;
    for k in [0.25f64, 1.0, 4.0] {
        let expect = PI / k.sqrt();
        let q = DMatrix::identity(3, 3) * k;
        let sol = integrate_jacobi(&pair, |_| q.clone(), 1.2 * expect, 1e-11)?;
        let t = first_blowup(&sol, 1e-3, 1e-12)?;
        worst = worst.max((t.value() - expect).abs());
    }
    Ok(Check {
        passed: worst < 1e-8,
        worst,
        detail: format!("max abs error {worst:.3e}"),
    })
}

/// `n` points `lo + (hi−lo) i/(n−1)`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn qhf_conjugate(d: usize, cfg: &VerifyConfig) -> Result<Check> {
    let scale = cfg.fault.curvature_scale();
    let mut worst = f64::INFINITY;
    let mut anchor = 0.0;
    for (i, vn) in linspace(0.0, 3.0, 30).into_iter().enumerate() {
        let res = conjugate_time_with(d, &VerticalVector::along_i(vn), 1e-10, scale)?;
        if i == 0 {
            anchor = (res.t_star - PI).abs();
        }
        worst = worst.min(res.margin_kab);
        if let Some(m) = res.margin_sphere {
            worst = worst.min(m);
        }
        if d == 1 {
            worst = worst.min(PI - res.t_star);
        }
    }
    let passed = worst >= -1e-6 && (d != 2 || anchor < 1e-6);
    Ok(Check {
        passed,
        worst,
        detail: format!("30 values of ‖v‖ in [0,3], |t*(0) − π| {anchor:.3e}, min margin {worst:.3e}"),
    })
}

fn conservation(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg.seed, 7);
    let mut h: f64 = 0.0;
    let mut v: f64 = 0.0;
    for d in [1, 2] {
        for _ in 0..10 {
            let vert = VerticalVector::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let s0 = random_unit_covector(d, &vert, &mut rng);
            let res = integrate_extremal(&s0, 2.0 * PI, 1e-12, 16)?;
            h = h.max(res.h_drift);
            v = v.max(res.v_drift);
        }
    }
    let worst = h.max(v);
    Ok(Check {
        passed: worst < 1e-8,
        worst,
        detail: format!("20 extremals, H drift {h:.3e}, v drift {v:.3e}"),
    })
}

fn symmetric_gaussian<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn identities(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg.seed, 8);
    let mut alg: f64 = 0.0;
    for _ in 0..1000 {
        let v = VerticalVector::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let m = v.skew();
        let s = v.norm_squared();
        let c = v.components();
        let e1 = (m * m * m + m * s).amax();
        let e2 = (c * c.transpose() - m * m - nalgebra::Matrix3::identity() * s).amax();
        let e3 = (m * c).amax();
        alg = alg.max(e1).max(e2).max(e3);
    }
    let mut gap = f64::INFINITY;
    let mut failed = 0;
    for i in 0..10_000 {
        let m = [2, 3, 5][i % 3];
        let x = symmetric_gaussian(m, &mut rng);
        let y = symmetric_gaussian(m, &mut rng);
        let g = trace_inequality_gap(&x, &y)?;
        let scale = x.norm_squared() * y.norm_squared();
        gap = gap.min(g / scale.max(1e-300));
        if g < -1e-9 * scale.max(1.0) {
            failed += 1;
        }
    }
    Ok(Check {
        passed: alg < 1e-12 && failed == 0,
        worst: alg,
        detail: format!(
            "1000 vectors, max identity residual {alg:.3e}; 10000 pairs, min relative gap {gap:.3e}, {failed} failures"
        ),
    })
}

fn ricci_traces(cfg: &VerifyConfig) -> Result<Check> {
    let scale = cfg.fault.curvature_scale();
    let mut rng = rng_for(cfg.seed, 9);
    let mut err: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for d in 1..=3 {
        for _ in 0..50 {
            let v = VerticalVector::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let t: f64 = rng.random_range(0.0..10.0);
            let inputs = qhf_curvature_inputs(d, &v);
            let rho = inputs.rho_a;
            let blocks = curvature_blocks(&v, inputs)?;
            let want = ricci_scalars(&v, rho, d);
            let got = blocks.traces(t);
            let zero = blocks.traces(0.0);
            for (g, z, w) in [
                (got.a, zero.a, want.a),
                (got.b, zero.b, want.b),
                (got.c, zero.c, want.c),
            ] {
                err = err.max(rel((scale * g - w).abs(), w));
                drift = drift.max(rel((g - z).abs(), w));
            }
        }
    }
    let worst = err.max(drift);
    Ok(Check {
        passed: worst < 1e-10,
        worst,
        detail: format!("150 samples, d = 1..3, max error {err:.3e}, max t-drift {drift:.3e}"),
    })
}

fn laplacian() -> Result<Check> {
    let d = 2;
    let v = VerticalVector::zero();
    let t_star = conjugate_time_with(d, &v, 1e-10, 1.0)?.t_star;
    let grid = linspace(0.1, 0.95 * t_star, 20);
    let rep = sublaplacian_along(d, &v, &grid, 1e-10)?;
    let margin = rep.min_margin();
    let diff = rep.rows.iter().map(|r| r.margin.abs()).fold(0.0, f64::max);
    let small = sublaplacian_along(d, &v, &[1e-3], 1e-10)?;
    let limit = (small.rows[0].r_delta_r - (4 * d + 8) as f64).abs();
    Ok(Check {
        passed: margin >= -1e-6 && diff < 1e-4 && limit < 1e-3,
        worst: margin,
        detail: format!(
            "20 radii, min margin {margin:.3e}, max |difference| {diff:.3e}, |rΔr − 16| at r = 1e−3: {limit:.3e}"
        ),
    })
}

fn homogeneity(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg.seed, 11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let alpha: f64 = rng.random_range(0.5..2.0);
        let u: f64 = rng.random_range(0.05..0.9);

        let kc: f64 = rng.random_range(-5.0..5.0);
        let tc = u * blowup_time_kc(alpha * alpha * kc).value().min(5.0);
        let lhs = eval_s_kc(alpha * alpha * kc, tc)?;
        let rhs = alpha * eval_s_kc(kc, alpha * tc)?;
        worst = worst.max(rel((lhs - rhs).abs(), lhs));

        let ka: f64 = rng.random_range(-5.0..5.0);
        let kb: f64 = rng.random_range(-5.0..5.0);
        let (a2, a4) = (alpha * alpha, alpha.powi(4));
        let tab = u * blowup_time_kab(a4 * ka, a2 * kb).value().min(5.0);
        let lhs = eval_s_kab(a4 * ka, a2 * kb, tab)?;
        let rhs = alpha * eval_s_kab(ka, kb, alpha * tab)?;
        worst = worst.max(rel((lhs - rhs).abs(), lhs));
    }
    Ok(Check {
        passed: worst < 1e-10,
        worst,
        detail: format!("100 triples for each family, max relative error {worst:.3e}"),
    })
}

fn determinism(cfg: &VerifyConfig) -> Result<Check> {
    let mut same = true;
    for id in [3, 8, 11] {
        let a = run_criterion(id, cfg)?;
        let b = run_criterion(id, cfg)?;
        same &= a.detail == b.detail && a.worst.to_bits() == b.worst.to_bits();
    }
    Ok(Check {
        passed: same,
        worst: 0.0,
        detail: format!(
            "repeat runs of criteria 3, 8, 11 {}; suite limit {} s",
            if same { "identical" } else { "differ" },
            SUITE_LIMIT.as_secs()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(13, &VerifyConfig::default()).is_err());
    }

    #[test]
    fn cheap_criteria_pass() {
        let cfg = VerifyConfig::default();
        for id in [1, 3, 4, 8, 11] {
            let o = run_criterion(id, &cfg).unwrap();
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn sign_fault_breaks_traces() {
        let cfg = VerifyConfig {
            seed: 1,
            fault: Fault::CurvatureSign,
        };
        assert!(!run_criterion(9, &cfg).unwrap().passed);
    }
}
