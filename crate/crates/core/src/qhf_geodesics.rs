//! The quaternionic Hopf fibration `S³ → S^{4d+3} → ℍP^d`.
//!
//! Points live on the unit sphere of `ℍ^{d+1} = ℝ^{4(d+1)}`, each quaternion stored as
//! `(x, y, z, w)`. `Φ_α` is left multiplication by `α ∈ {I, J, K}`, the Reeb fields are
//! `ξ_α(q) = −Φ_α q`, and the distribution is their orthogonal complement in `T_q S`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::fat_structure::{build_structural, FatDims};
use crate::ode::{Dopri5, Tolerances};
use crate::riccati_engine::{
    first_blowup, integrate_jacobi_with, JacobiOptions, StructuralPair,
};
use crate::sasakian_curvature::{
    curvature_blocks, qhf_curvature_inputs, ricci_scalars, z_vectors, CurvatureBlocks,
    VerticalVector,
};
use crate::scalar_models::{
    blowup_time_kab, eval_s_kab, eval_s_kc, sasakian_kappas, BlowUpTime,
};

/// `Φ_α x` for `α = 0, 1, 2` (`I, J, K`), acting on each quaternion block.
pub fn quaternion_left(alpha: usize, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for b in 0..x.len() / 4 {
        let (x0, y0, z0, w0) = (x[4 * b], x[4 * b + 1], x[4 * b + 2], x[4 * b + 3]);
        let r = match alpha {
            0 => [-y0, x0, -w0, z0],
            1 => [-z0, w0, x0, -y0],
            2 => [-w0, -z0, y0, x0],
            _ => panic!("quaternion index must be 0, 1 or 2"),
        };
        out.rows_mut(4 * b, 4).copy_from_slice(&r);
    }
    out
}

/// Matrix of `Φ_α` on `ℝ^{4(d+1)}`.
pub fn quaternion_matrix(alpha: usize, d: usize) -> DMatrix<f64> {
    let dim = 4 * (d + 1);
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        m.set_column(j, &quaternion_left(alpha, &e));
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    q: DVector<f64>,
}

impl AmbientPoint {
    pub fn new(q: DVector<f64>) -> Result<Self> {
        if q.len() < 8 || q.len() % 4 != 0 {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, need 4(d+1) with d ≥ 1",
                q.len()
            )));
        }
        if (q.norm() - 1.0).abs() > 1e-10 {
            return Err(domain("‖q‖", q.norm(), "1"));
        }
        Ok(Self { q })
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let q = DVector::from_fn(4 * (d + 1), |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { q: q.normalize() }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn d(&self) -> usize {
        self.q.len() / 4 - 1
    }
}

/// Reeb fields, contact forms and the endomorphisms `φ_α` at one point.
#[derive(Debug, Clone)]
pub struct Frames {
    q: DVector<f64>,
    xi: [DVector<f64>; 3],
}

pub fn build_frames(q: &AmbientPoint) -> Frames {
    let x = q.coords().clone();
    let xi = std::array::from_fn(|a| -quaternion_left(a, &x));
    Frames { q: x, xi }
}

impl Frames {
    pub fn xi(&self, alpha: usize) -> &DVector<f64> {
        &self.xi[alpha]
    }

    pub fn eta(&self, alpha: usize, x: &DVector<f64>) -> f64 {
        self.xi[alpha].dot(x)
    }

    pub fn tangent_part(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.q * self.q.dot(x)
    }

    pub fn horizontal_part(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut h = self.tangent_part(x);
        for xi in &self.xi {
            h -= xi * xi.dot(x);
        }
        h
    }

    /// `φ_α X = pr(Φ_α X)`.
    pub fn phi(&self, alpha: usize, x: &DVector<f64>) -> DVector<f64> {
        self.tangent_part(&quaternion_left(alpha, x))
    }
}

/// A point of `T*S^{4d+3}` in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

fn hamiltonian_parts(q: &DVector<f64>, p: &DVector<f64>) -> (f64, f64, [f64; 3], [DVector<f64>; 3]) {
    let phiq: [DVector<f64>; 3] = std::array::from_fn(|a| quaternion_left(a, q));
    let c = std::array::from_fn(|a| p.dot(&phiq[a]));
    (q.norm_squared(), p.dot(q), c, phiq)
}

impl ExtremalState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Dimension("q and p must have the same length".into()));
        }
        AmbientPoint::new(q.clone())?;
        Ok(Self { q, p })
    }

    pub fn d(&self) -> usize {
        self.q.len() / 4 - 1
    }

    /// `½(|q|²|p|² − (p·q)² − Σ (p·Φ_α q)²)`, i.e. `½(‖p_T‖² − Σ v_α²)` on the sphere.
    pub fn hamiltonian(&self) -> f64 {
        let (q2, pq, c, _) = hamiltonian_parts(&self.q, &self.p);
        0.5 * (q2 * self.p.norm_squared() - pq * pq - c.iter().map(|x| x * x).sum::<f64>())
    }

    /// `v_α = ⟨p, ξ_α⟩`.
    pub fn vertical(&self) -> VerticalVector {
        let (_, _, c, _) = hamiltonian_parts(&self.q, &self.p);
        VerticalVector::new(-c[0], -c[1], -c[2])
    }

    /// `γ̇ = ∂H/∂p`.
    pub fn velocity(&self) -> DVector<f64> {
        let (q2, pq, c, phiq) = hamiltonian_parts(&self.q, &self.p);
        let mut v = &self.p * q2 - &self.q * pq;
        for a in 0..3 {
            v -= &phiq[a] * c[a];
        }
        v
    }

    fn p_dot(&self) -> DVector<f64> {
        let (_, pq, c, _) = hamiltonian_parts(&self.q, &self.p);
        let mut g = &self.q * self.p.norm_squared() - &self.p * pq;
        for a in 0..3 {
            // Φ_αᵀ p = −Φ_α p.
            g += quaternion_left(a, &self.p) * c[a];
        }
        -g
    }

    pub fn point(&self) -> AmbientPoint {
        AmbientPoint { q: self.q.clone() }
    }
}

/// Unit covector with vertical part `v` and horizontal direction obtained from `seed`.
pub fn unit_covector(
    q: &AmbientPoint,
    v: &VerticalVector,
    seed: &DVector<f64>,
) -> Result<ExtremalState> {
    if seed.len() != q.coords().len() {
        return Err(Error::Dimension("direction seed has the wrong length".into()));
    }
    let fr = build_frames(q);
    let u = fr.horizontal_part(seed);
    if u.norm() < 1e-8 {
        return Err(Error::InvalidInput("direction seed has no horizontal part".into()));
    }
    let mut p = u.normalize();
    let c = v.components();
    for a in 0..3 {
        p += fr.xi(a) * c[a];
    }
    Ok(ExtremalState {
        q: q.coords().clone(),
        p,
    })
}

/// Random point, random horizontal direction, given vertical part.
pub fn random_unit_covector<R: Rng + ?Sized>(
    d: usize,
    v: &VerticalVector,
    rng: &mut R,
) -> ExtremalState {
    let q = AmbientPoint::random(d, rng);
    loop {
        let seed = DVector::from_fn(4 * (d + 1), |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(s) = unit_covector(&q, v, &seed) {
            return s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicResult {
    pub times: Vec<f64>,
    pub states: Vec<ExtremalState>,
    /// `max |H(t) − H(0)|` over all accepted steps.
    pub h_drift: f64,
    /// `max_α |v_α(t) − v_α(0)|` over all accepted steps.
    pub v_drift: f64,
    /// `max_α |η_α(γ̇(t))|` over all accepted steps.
    pub horizontality: f64,
    /// `max |‖γ̇(t)‖ − 1|` over all accepted steps.
    pub speed_error: f64,
}

impl GeodesicResult {
    pub fn last(&self) -> &ExtremalState {
        self.states.last().unwrap()
    }
}

/// Integrates the extremal flow on `[0, t_max]`, sampling `samples + 1` equally spaced states.
pub fn integrate_extremal(
    state0: &ExtremalState,
    t_max: f64,
    tol: f64,
    samples: usize,
) -> Result<GeodesicResult> {
    let h0 = state0.hamiltonian();
    if (h0 - 0.5).abs() > 1e-10 {
        return Err(domain("H(λ₀)", h0, "1/2"));
    }
    if !(t_max > 0.0) || samples == 0 {
        return Err(domain("t_max", t_max, "(0, ∞) with at least one sample"));
    }
    let dim = state0.q.len();
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let s = ExtremalState {
            q: DVector::from_column_slice(&y[..dim]),
            p: DVector::from_column_slice(&y[dim..]),
        };
        dy[..dim].copy_from_slice(s.velocity().as_slice());
        dy[dim..].copy_from_slice(s.p_dot().as_slice());
    };
    let mut y0 = state0.q.as_slice().to_vec();
    y0.extend_from_slice(state0.p.as_slice());
    let mut stepper = Dopri5::new(rhs, 0.0, y0, Tolerances::new(tol, tol * 1e-2));
    let v0 = state0.vertical().components();
    let times: Vec<f64> = (0..=samples)
        .map(|i| t_max * i as f64 / samples as f64)
        .collect();
    let mut states = vec![state0.clone()];
    let mut next = 1;
    let mut res = GeodesicResult {
        times: times.clone(),
        states: Vec::new(),
        h_drift: 0.0,
        v_drift: 0.0,
        horizontality: 0.0,
        speed_error: 0.0,
    };
    while stepper.t() < t_max {
        let step = stepper.step(t_max)?;
        while next < times.len() && times[next] <= step.t1() {
            let y = step.eval(times[next]);
            states.push(ExtremalState {
                q: DVector::from_column_slice(&y[..dim]),
                p: DVector::from_column_slice(&y[dim..]),
            });
            next += 1;
        }
        let y = stepper.state();
        let mut q = DVector::from_column_slice(&y[..dim]);
        let p = DVector::from_column_slice(&y[dim..]);
        q /= q.norm();
        let p = &p - &q * p.dot(&q);
        let s = ExtremalState { q, p };
        let fr = build_frames(&s.point());
        let vel = s.velocity();
        res.h_drift = res.h_drift.max((s.hamiltonian() - h0).abs());
        res.v_drift = res.v_drift.max((s.vertical().components() - v0).amax());
        res.speed_error = res.speed_error.max((vel.norm() - 1.0).abs());
        for a in 0..3 {
            res.horizontality = res.horizontality.max(fr.eta(a, &vel).abs());
        }
        let mut y = s.q.as_slice().to_vec();
        y.extend_from_slice(s.p.as_slice());
        stepper.set_state(y);
    }
    res.states = states;
    Ok(res)
}

/// Canonical splitting of the tangent space along an extremal.
#[derive(Debug, Clone)]
pub struct SplittingFrame {
    pub gamma_dot: DVector<f64>,
    pub f_a: [DVector<f64>; 3],
    pub f_b: [DVector<f64>; 3],
    /// `4d − 3` horizontal vectors; the last one is `γ̇`.
    pub f_c: Vec<DVector<f64>>,
}

pub fn canonical_splitting(state: &ExtremalState) -> SplittingFrame {
    let fr = build_frames(&state.point());
    let gd = state.velocity();
    let v = state.vertical();
    let c = v.components();
    let f_b: [DVector<f64>; 3] = std::array::from_fn(|a| fr.phi(a, &gd));
    let z = z_vectors(&v, &f_b);
    let f_a = std::array::from_fn(|a| fr.xi(a) * 2.0 - &gd * (2.0 * c[a]) + &z[a] * 1.5);

    let dim = state.q.len();
    let mut basis: Vec<DVector<f64>> = vec![state.q.clone()];
    basis.extend(fr.xi.iter().cloned());
    basis.push(gd.clone());
    basis.extend(f_b.iter().cloned());
    let fixed = basis.len();
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&e);
                e -= b * proj;
            }
        }
        if e.norm() > 1e-6 {
            basis.push(e.normalize());
        }
        if basis.len() == dim {
            break;
        }
    }
    let mut f_c: Vec<DVector<f64>> = basis.drain(fixed..).collect();
    f_c.push(gd.clone());
    SplittingFrame {
        gamma_dot: gd,
        f_a,
        f_b,
        f_c,
    }
}

/// Structural pair and curvature of the canonical Jacobi system along a QHF extremal.
pub fn qhf_jacobi_system(d: usize, v: &VerticalVector) -> Result<(StructuralPair, CurvatureBlocks)> {
    let dims = FatDims::qhf(d)?;
    let blocks = curvature_blocks(v, qhf_curvature_inputs(d, v))?;
    Ok((build_structural(dims), blocks))
}

/// `α² Λ R(αt) Λ` with `Λ = diag(α I_a, I_b, I_c)`: the curvature along the rescaled covector `αλ`.
pub fn rescaled_curvature(blocks: &CurvatureBlocks, alpha: f64, t: f64) -> DMatrix<f64> {
    let dims = blocks.dims();
    let mut r = blocks.at(alpha * t).into_matrix() * (alpha * alpha);
    let a = dims.corank();
    for i in 0..a {
        r.row_mut(i).scale_mut(alpha);
        r.column_mut(i).scale_mut(alpha);
    }
    r
}

/// First conjugate time of a Jacobi system on `(0, horizon]`.
pub fn first_conjugate_time<Q>(
    pair: &StructuralPair,
    q: Q,
    horizon: f64,
    tol: f64,
) -> Result<BlowUpTime>
where
    Q: Fn(f64) -> DMatrix<f64>,
{
    let sol = integrate_jacobi_with(pair, q, horizon, &JacobiOptions::with_tol(tol))?;
    first_blowup(&sol, 1e-4 * horizon, 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateResult {
    pub d: usize,
    pub v: VerticalVector,
    pub t_star: f64,
    /// `π/√(1+‖v‖²)`; stated for `d ≥ 2` only.
    pub bound_sphere: Option<f64>,
    /// `t̄(κ_a(v), κ_b(v))` with `K = 1`.
    pub bound_kab: BlowUpTime,
    pub margin_sphere: Option<f64>,
    pub margin_kab: f64,
}

impl ConjugateResult {
    pub fn passes(&self, tol: f64) -> bool {
        self.margin_kab >= -tol && self.margin_sphere.is_none_or(|m| m >= -tol)
    }
}

/// Upper bounds for the first conjugate time: `(π/√(1+‖v‖²), t̄(κ_a(v), κ_b(v)))`.
pub fn conjugate_bounds(d: usize, v: &VerticalVector) -> (Option<f64>, BlowUpTime) {
    let s = v.norm_squared();
    let cor = (d >= 2).then(|| std::f64::consts::PI / (1.0 + s).sqrt());
    let (ka, kb) = sasakian_kappas(v.norm(), 1.0);
    (cor, blowup_time_kab(ka, kb))
}

pub fn conjugate_time(d: usize, v: &VerticalVector, tol: f64) -> Result<ConjugateResult> {
    conjugate_time_with(d, v, tol, 1.0)
}

/// As [`conjugate_time`], with the curvature multiplied by `curvature_scale` (fault injection).
pub fn conjugate_time_with(
    d: usize,
    v: &VerticalVector,
    tol: f64,
    curvature_scale: f64,
) -> Result<ConjugateResult> {
    let (pair, blocks) = qhf_jacobi_system(d, v)?;
    let (cor, thm) = conjugate_bounds(d, v);
    let horizon = 1.1 * cor.unwrap_or(f64::INFINITY).min(thm.value());
    let t = first_conjugate_time(&pair, |t| blocks.at(t).into_matrix() * curvature_scale, horizon, tol)?;
    let t_star = t.finite().ok_or_else(|| {
        Error::Inconsistent(format!(
            "no conjugate time below {horizon} for d = {d}, ‖v‖ = {}",
            v.norm()
        ))
    })?;
    Ok(ConjugateResult {
        d,
        v: *v,
        t_star,
        bound_sphere: cor,
        bound_kab: thm,
        margin_sphere: cor.map(|b| b - t_star),
        margin_kab: thm.value() - t_star,
    })
}

/// Conjugate time of the covector `αλ`; equals `t_star(λ)/α`.
pub fn conjugate_time_scaled(d: usize, v: &VerticalVector, alpha: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(domain("alpha", alpha, "(0, ∞)"));
    }
    let (pair, blocks) = qhf_jacobi_system(d, v)?;
    let (cor, thm) = conjugate_bounds(d, v);
    let horizon = 1.1 * cor.unwrap_or(f64::INFINITY).min(thm.value()) / alpha;
    first_conjugate_time(&pair, |t| rescaled_curvature(&blocks, alpha, t), horizon, tol)?
        .finite()
        .ok_or_else(|| Error::Inconsistent(format!("no conjugate time below {horizon}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianRow {
    pub r: f64,
    /// `Δ_ω r` from the trace formula.
    pub delta_r: f64,
    /// Comparison bound `(n−k) s_{κa,κb}(r) + (2k−n−1) s_{κc}(r) + κ_ω`.
    pub rhs: f64,
    pub margin: f64,
    pub r_delta_r: f64,
}

#[derive(Debug, Clone)]
pub struct LaplacianReport {
    pub d: usize,
    pub v: VerticalVector,
    pub t_star: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub rows: Vec<LaplacianRow>,
}

impl LaplacianReport {
    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
}

/// `Δ_ω f` at time 1 for the covector `rλ`, with `f = r²/2` the half squared distance model:
/// `tr(B W(1))` where `W` is the Riccati solution of the rescaled system.
fn unit_time_laplacian(pair: &StructuralPair, blocks: &CurvatureBlocks, r: f64, tol: f64) -> Result<f64> {
    let sol = integrate_jacobi_with(
        pair,
        |t| rescaled_curvature(blocks, r, t),
        1.0,
        &JacobiOptions::with_tol(tol),
    )?;
    let w = sol
        .stored(1.0)
        .riccati()
        .ok_or_else(|| Error::Inconsistent(format!("N(1) singular at r = {r}")))?;
    Ok((pair.b() * w).trace())
}

/// Sub-Laplacian of the distance from the initial point along the extremal, against its bound.
pub fn sublaplacian_along(
    d: usize,
    v: &VerticalVector,
    r_grid: &[f64],
    tol: f64,
) -> Result<LaplacianReport> {
    let conj = conjugate_time(d, v, tol)?;
    let (pair, blocks) = qhf_jacobi_system(d, v)?;
    let dims = blocks.dims();
    let ric = ricci_scalars(v, blocks.inputs().rho_a, d);
    let m = dims.corank() as f64;
    let cprime = dims.c_size() - 1;
    let kappa_a = ric.a / m;
    let kappa_b = ric.b / m;
    let kappa_c = if cprime > 0 { ric.c / cprime as f64 } else { 0.0 };
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(r > 0.0 && r < conj.t_star) {
            return Err(domain("r", r, format!("(0, {})", conj.t_star)));
        }
        let lap_f = unit_time_laplacian(&pair, &blocks, r, tol)?;
        let delta_r = (lap_f - 1.0) / r;
        let mut rhs = m * eval_s_kab(kappa_a, kappa_b, r)?;
        if cprime > 0 {
            rhs += cprime as f64 * eval_s_kc(kappa_c, r)?;
        }
        rows.push(LaplacianRow {
            r,
            delta_r,
            rhs,
            margin: rhs - delta_r,
            r_delta_r: r * delta_r,
        });
    }
    Ok(LaplacianReport {
        d,
        v: *v,
        t_star: conj.t_star,
        kappa_a,
        kappa_b,
        kappa_c,
        rows,
    })
}
