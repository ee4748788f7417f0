//! Matrix Riccati equations with limit initial datum, solved through the linear Jacobi system.
//!
//! For a constant pair `(A, B)` with `B ⪰ 0` and a symmetric curvature `Q(t)`, the solution of
//!
//! ```text
//! V̇ + AᵀV + VA + Q + VBV = 0,    V(t)⁻¹ → 0 as t → 0⁺
//! ```
//!
//! is `V = M N⁻¹`, where `(M; N)` solves `d/dt (M; N) = [[−Aᵀ, −Q], [B, A]] (M; N)` with
//! `M(0) = I`, `N(0) = 0`. Blow-up of `V` is exactly the first singular time of `N`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{domain, Error, Result};
use crate::ode::{DenseStep, Dopri5, Tolerances};
use crate::scalar_models::{finiteness_predicate, BlowUpTime};

/// Constant structural matrices `(A, B)` of a Jacobi system.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralPair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl StructuralPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!(
                "A is {}x{}, B is {}x{}; both must be square of the same positive size",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let scale = b.norm().max(1.0);
        if asymmetry(&b) > 1e-12 * scale {
            return Err(Error::InvalidInput("B must be symmetric".into()));
        }
        if min_sym_eigenvalue(&b) < -1e-12 * scale {
            return Err(Error::InvalidInput("B must be positive semidefinite".into()));
        }
        Ok(Self { a, b })
    }

    /// The 2×2 type-I pair `a = ((0,1),(0,0))`, `b = diag(0,1)`.
    pub fn type_i() -> Self {
        Self {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        }
    }

    /// `A = 0`, `B = I`: the Riemannian Jacobi system in dimension `n`.
    pub fn riemannian(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(n, n),
            b: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// The Hamiltonian matrix `[[−Aᵀ, −Q], [B, A]]`.
    pub fn hamiltonian(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&(-self.a.transpose()));
        h.view_mut((0, n), (n, n)).copy_from(&(-q));
        h.view_mut((n, 0), (n, n)).copy_from(&self.b);
        h.view_mut((n, n), (n, n)).copy_from(&self.a);
        h
    }
}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Whether `[B, AB, …, A^m B]` has full row rank for some `m ≤ m_max`.
pub fn kalman_check(a: &DMatrix<f64>, b: &DMatrix<f64>, m_max: usize) -> Result<bool> {
    Ok(kalman_index(a, b)?.is_some_and(|m| m <= m_max))
}

/// Smallest `m` for which `[B, AB, …, A^m B]` has full row rank, if any.
pub fn kalman_index(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Option<usize>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Dimension("kalman_check needs square matrices of equal size".into()));
    }
    let mut blocks: Vec<DMatrix<f64>> = vec![b.clone()];
    for m in 0..n {
        let k = DMatrix::from_fn(n, n * blocks.len(), |i, j| blocks[j / n][(i, j % n)]);
        if rank(&k, 1e-10) == n {
            return Ok(Some(m));
        }
        let next = a * blocks.last().unwrap();
        blocks.push(next);
    }
    Ok(None)
}

/// Integration controls for [`integrate_jacobi_with`].
#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest entry of the stored `(M; N)` before it is re-orthonormalised.
    pub renorm_threshold: f64,
    pub max_steps: usize,
}

impl JacobiOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-6,
            renorm_threshold: 1e6,
            max_steps: 2_000_000,
        }
    }
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

/// Change of basis between stored and actual solutions: `actual = stored · exp(log_scale) · c`.
#[derive(Debug, Clone)]
struct Frame {
    c: DMatrix<f64>,
    log_scale: f64,
}

/// Dense solution of the Jacobi system on `[0, t_max]`.
///
/// The solution is stored up to right multiplication by an invertible matrix with positive
/// determinant, which leaves `M N⁻¹`, the column span and the sign of `det N` unchanged.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    n: usize,
    t_max: f64,
    steps: Vec<DenseStep>,
    step_frame: Vec<usize>,
    frames: Vec<Frame>,
}

/// Snapshot of the solution at one time, in the stored frame.
#[derive(Debug, Clone)]
pub struct JacobiPoint {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

impl JacobiPoint {
    /// Scale-invariant distance of the Lagrangian plane from the vertical: the smallest singular
    /// value of the `N` rows of an orthonormal basis of span `(M; N)`. It vanishes exactly where
    /// `N` is singular.
    pub fn vertical_distance(&self) -> f64 {
        let n = self.n.nrows();
        let mut y = DMatrix::zeros(2 * n, n);
        y.view_mut((0, 0), (n, n)).copy_from(&self.m);
        y.view_mut((n, 0), (n, n)).copy_from(&self.n);
        let q = y.qr().q();
        q.rows(n, n)
            .into_owned()
            .singular_values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// `|det N| / √det(MᵀM + NᵀN)`: the product of all the singular values whose minimum is
    /// [`vertical_distance`](Self::vertical_distance), each at most one, so never larger than it.
    pub fn distance_lower_bound(&self) -> f64 {
        let g = self.m.transpose() * &self.m + self.n.transpose() * &self.n;
        let dg = g.determinant();
        if !(dg > 0.0) {
            return 0.0;
        }
        self.n.determinant().abs() / dg.sqrt()
    }

    pub fn det_n_sign(&self) -> f64 {
        let d = self.n.determinant();
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// `V = M N⁻¹`.
    pub fn riccati(&self) -> Option<DMatrix<f64>> {
        let x = self.n.transpose().lu().solve(&self.m.transpose())?;
        Some(x.transpose())
    }
}

impl JacobiSolution {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Accepted step boundaries, starting at 0 and ending at `t_max`.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        ts.push(self.t_max);
        ts
    }

    fn locate(&self, t: f64) -> usize {
        self.steps
            .partition_point(|s| s.t1() < t)
            .min(self.steps.len() - 1)
    }

    /// Solution at `t` in the stored frame.
    pub fn stored(&self, t: f64) -> JacobiPoint {
        let n = self.n;
        let y = self.steps[self.locate(t)].eval(t);
        let y = DMatrix::from_column_slice(2 * n, n, &y);
        JacobiPoint {
            m: y.rows(0, n).into_owned(),
            n: y.rows(n, n).into_owned(),
        }
    }

    /// The actual `(M(t), N(t))`; entries overflow to infinity for very long runs.
    pub fn actual(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.stored(t);
        let f = &self.frames[self.step_frame[self.locate(t)]];
        let c = &f.c * f.log_scale.exp();
        (p.m * &c, p.n * &c)
    }

    pub fn m_at(&self, t: f64) -> DMatrix<f64> {
        self.actual(t).0
    }

    pub fn n_at(&self, t: f64) -> DMatrix<f64> {
        self.actual(t).1
    }

    pub fn det_n(&self, t: f64) -> f64 {
        let p = self.stored(t);
        let f = &self.frames[self.step_frame[self.locate(t)]];
        p.n.determinant() * f.c.determinant() * (self.n as f64 * f.log_scale).exp()
    }

    pub fn det_n_sign(&self, t: f64) -> f64 {
        self.stored(t).det_n_sign()
    }

    /// `‖MᵀN − NᵀM‖_max / ‖(M; N)‖²` in the stored frame; zero for exact solutions.
    pub fn symplectic_defect(&self, t: f64) -> f64 {
        let p = self.stored(t);
        let w = p.m.transpose() * &p.n - p.n.transpose() * &p.m;
        let scale = p.m.norm_squared() + p.n.norm_squared();
        w.amax() / scale.max(f64::MIN_POSITIVE)
    }
}

fn check_potential(q: &DMatrix<f64>, n: usize, t: f64) -> Result<()> {
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "Q({t}) is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    if asymmetry(q) > 1e-10 * q.amax().max(1.0) {
        return Err(Error::InvalidInput(format!("Q({t}) is not symmetric")));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("Q({t}) has non-finite entries")));
    }
    Ok(())
}

pub fn integrate_jacobi<Q>(
    pair: &StructuralPair,
    q: Q,
    t_max: f64,
    tol: f64,
) -> Result<JacobiSolution>
where
    Q: Fn(f64) -> DMatrix<f64>,
{
    integrate_jacobi_with(pair, q, t_max, &JacobiOptions::with_tol(tol))
}

pub fn integrate_jacobi_with<Q>(
    pair: &StructuralPair,
    q: Q,
    t_max: f64,
    opts: &JacobiOptions,
) -> Result<JacobiSolution>
where
    Q: Fn(f64) -> DMatrix<f64>,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(domain("t_max", t_max, "(0, ∞)"));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(domain("tol", opts.rtol.min(opts.atol), "(0, ∞)"));
    }
    let n = pair.n();
    for k in 0..=3 {
        let t = t_max * k as f64 / 3.0;
        check_potential(&q(t), n, t)?;
    }

    let neg_at = -pair.a.transpose();
    let a = pair.a.clone();
    let b = pair.b.clone();
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let ym = DMatrix::from_column_slice(2 * n, n, y);
        let m = ym.rows(0, n);
        let nn = ym.rows(n, n);
        let qt = q(t);
        let dm = &neg_at * m - qt * nn;
        let dn = &b * m + &a * nn;
        for j in 0..n {
            for i in 0..n {
                dy[j * 2 * n + i] = dm[(i, j)];
                dy[j * 2 * n + n + i] = dn[(i, j)];
            }
        }
    };

    let mut y0 = DMatrix::<f64>::zeros(2 * n, n);
    for i in 0..n {
        y0[(i, i)] = 1.0;
    }
    let tol = Tolerances {
        rtol: opts.rtol,
        atol: opts.atol,
        max_steps: opts.max_steps,
        h_max: f64::INFINITY,
    };
    let mut stepper = Dopri5::new(rhs, 0.0, y0.as_slice().to_vec(), tol);
    let mut steps = Vec::new();
    let mut step_frame = Vec::new();
    let mut frames = vec![Frame {
        c: DMatrix::identity(n, n),
        log_scale: 0.0,
    }];
    while stepper.t() < t_max {
        let step = stepper.step(t_max)?;
        steps.push(step);
        step_frame.push(frames.len() - 1);
        let state = stepper.state();
        let big = state.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if !big.is_finite() {
            return Err(Error::Integration {
                t: stepper.t(),
                reason: "non-finite state".into(),
            });
        }
        if big > opts.renorm_threshold {
            let y = DMatrix::from_column_slice(2 * n, n, state);
            let qr = y.qr();
            let mut qm = qr.q();
            let mut r = qr.r();
            for i in 0..n {
                if r[(i, i)] < 0.0 {
                    r.row_mut(i).neg_mut();
                    qm.column_mut(i).neg_mut();
                }
            }
            let prev = frames.last().unwrap();
            let c = r * &prev.c;
            let s = c.amax();
            frames.push(Frame {
                c: c / s,
                log_scale: prev.log_scale + s.ln(),
            });
            stepper.set_state(qm.as_slice().to_vec());
        }
    }
    Ok(JacobiSolution {
        n,
        t_max,
        steps,
        step_frame,
        frames,
    })
}

/// Threshold on [`JacobiPoint::vertical_distance`] below which a local minimum counts as a zero.
pub const TOUCH_TOL: f64 = 1e-7;
const SCAN_POINTS: usize = 2048;
const SCREEN: f64 = 0.05;

/// Default scan start relative to the integration horizon.
pub fn default_t_min(sol: &JacobiSolution) -> f64 {
    1e-4 * sol.t_max()
}

fn bisect_sign(sol: &JacobiSolution, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let sa = sol.det_n_sign(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let sm = sol.det_n_sign(m);
        if sm == 0.0 {
            return m;
        }
        if sm == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// First singular time of `N` on `(t_min, t_max]`.
///
/// Zeros of odd multiplicity are found from sign changes of `det N`. Zeros of even multiplicity
/// (which occur when the kernel of `N` is invariant under a complex structure) are found as local
/// minima of [`JacobiPoint::vertical_distance`] that reach [`TOUCH_TOL`]. The earlier event wins.
pub fn first_blowup(sol: &JacobiSolution, t_min: f64, tol: f64) -> Result<BlowUpTime> {
    let t_max = sol.t_max();
    if !(t_min > 0.0 && t_min < t_max) {
        return Err(domain("t_min", t_min, format!("(0, {t_max})")));
    }
    if sol.det_n_sign(t_min) <= 0.0 {
        return Err(domain("t_min", t_min, "det N(t_min) > 0 required"));
    }
    let count = SCAN_POINTS.max(4 * sol.num_steps());
    let grid: Vec<f64> = (0..=count)
        .map(|i| t_min + (t_max - t_min) * i as f64 / count as f64)
        .collect();
    let pts: Vec<JacobiPoint> = grid.iter().map(|&t| sol.stored(t)).collect();
    let signs: Vec<f64> = pts.iter().map(|p| p.det_n_sign()).collect();
    // The exact distance is only needed where the cheap lower bound is small; elsewhere it is
    // known to exceed SCREEN, which is all the local-minimum test below needs.
    let dist: Vec<f64> = pts
        .iter()
        .map(|p| {
            if p.distance_lower_bound() < SCREEN {
                p.vertical_distance()
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let first_sign = (1..grid.len())
        .find(|&i| signs[i] != signs[i - 1])
        .map(|i| bisect_sign(sol, grid[i - 1], grid[i], tol));

    let horizon = first_sign.unwrap_or(f64::INFINITY);
    let mut first_touch = None;
    for i in 1..grid.len() - 1 {
        if grid[i - 1] > horizon {
            break;
        }
        if dist[i] < dist[i - 1] && dist[i] <= dist[i + 1] {
            let (t, d) = golden_min(
                |t| sol.stored(t).vertical_distance(),
                grid[i - 1],
                grid[i + 1],
                tol,
            );
            if d < TOUCH_TOL {
                first_touch = Some(t);
                break;
            }
        }
    }
    if first_touch.is_none() && dist[grid.len() - 1] < TOUCH_TOL {
        first_touch = Some(t_max);
    }
    Ok(match (first_sign, first_touch) {
        (Some(a), Some(b)) => BlowUpTime::Finite(a.min(b)),
        (Some(a), None) | (None, Some(a)) => BlowUpTime::Finite(a),
        (None, None) => BlowUpTime::Infinite,
    })
}

/// Riccati solution `V = M N⁻¹` on `(0, t̄)`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution<'a> {
    sol: &'a JacobiSolution,
    blowup: BlowUpTime,
}

pub fn riccati_solution(sol: &JacobiSolution) -> Result<RiccatiSolution<'_>> {
    let blowup = first_blowup(sol, default_t_min(sol), 1e-12)?;
    Ok(RiccatiSolution { sol, blowup })
}

impl<'a> RiccatiSolution<'a> {
    pub fn blowup(&self) -> BlowUpTime {
        self.blowup
    }

    pub fn jacobi(&self) -> &'a JacobiSolution {
        self.sol
    }

    /// `V(t)`, symmetrised after checking the asymmetry is at rounding level.
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let upper = self.blowup.value().min(self.sol.t_max());
        if !(t > 0.0 && (t < upper || (t == upper && !self.blowup.is_finite()))) {
            return Err(domain("t", t, format!("(0, {upper})")));
        }
        let v = self
            .sol
            .stored(t)
            .riccati()
            .ok_or_else(|| Error::Inconsistent(format!("N({t}) is singular")))?;
        if asymmetry(&v) > 1e-6 * v.amax().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "V({t}) asymmetric by {:e}",
                asymmetry(&v)
            )));
        }
        Ok(symmetrize(&v))
    }

    pub fn sample(&self, grid: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        grid.iter().map(|&t| self.at(t)).collect()
    }

    /// `‖V(t)⁻¹‖` is decreasing along the given decreasing sequence of times.
    pub fn limit_datum_trend(&self, decreasing_times: &[f64]) -> Result<bool> {
        let mut prev = f64::INFINITY;
        for &t in decreasing_times {
            let p = self.sol.stored(t);
            let inv = p
                .m
                .transpose()
                .lu()
                .solve(&p.n.transpose())
                .ok_or_else(|| Error::Inconsistent(format!("M({t}) is singular")))?;
            let norm = inv.norm();
            if norm >= prev {
                return Ok(false);
            }
            prev = norm;
        }
        Ok(true)
    }
}

/// Outcome of a two-curvature comparison run.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub blowup1: BlowUpTime,
    pub blowup2: BlowUpTime,
    /// `(t, λ_min(V₂ − V₁) / max(1, ‖V₁‖, ‖V₂‖))` on grid points before both blow-ups.
    pub gaps: Vec<(f64, f64)>,
    pub min_gap: f64,
    pub monotone: bool,
    pub ordering: bool,
}

impl ComparisonReport {
    pub fn passes(&self) -> bool {
        self.monotone && self.ordering
    }
}

/// Verifies `V₁ ⪯ V₂` and `t̄₁ ≤ t̄₂` when `Q₁ ⪰ Q₂`.
pub fn comparison_harness<Q1, Q2>(
    pair: &StructuralPair,
    q1: Q1,
    q2: Q2,
    t_grid: &[f64],
    tol: f64,
) -> Result<ComparisonReport>
where
    Q1: Fn(f64) -> DMatrix<f64>,
    Q2: Fn(f64) -> DMatrix<f64>,
{
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "time grid must be positive and strictly increasing".into(),
        ));
    }
    for &t in t_grid {
        let gap = min_sym_eigenvalue(&(q1(t) - q2(t)));
        if gap < -1e-10 {
            return Err(Error::Hypothesis(format!(
                "Q1 - Q2 has eigenvalue {gap:e} at t = {t}"
            )));
        }
    }
    let t_max = *t_grid.last().unwrap();
    let s1 = integrate_jacobi(pair, &q1, t_max, tol)?;
    let s2 = integrate_jacobi(pair, &q2, t_max, tol)?;
    let r1 = riccati_solution(&s1)?;
    let r2 = riccati_solution(&s2)?;
    let horizon = r1.blowup().value().min(r2.blowup().value());
    let mut gaps = Vec::new();
    for &t in t_grid {
        if t >= horizon || t < default_t_min(&s1) {
            continue;
        }
        let v1 = r1.at(t)?;
        let v2 = r2.at(t)?;
        let scale = v1.amax().max(v2.amax()).max(1.0);
        gaps.push((t, min_sym_eigenvalue(&(v2 - v1)) / scale));
    }
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let (b1, b2) = (r1.blowup(), r2.blowup());
    Ok(ComparisonReport {
        blowup1: b1,
        blowup2: b2,
        monotone: min_gap >= -1e-7,
        ordering: b1.value() <= b2.value() + 1e-6,
        gaps,
        min_gap,
    })
}

/// Finite blow-up for constant curvature.
///
/// The type-I 2×2 model with diagonal `Q` is decided from the characteristic polynomial
/// `x⁴ + κb x² − κa`; everything else from the Jordan structure of the Hamiltonian matrix.
pub fn finite_blowup_constant(pair: &StructuralPair, q: &DMatrix<f64>) -> Result<bool> {
    check_potential(q, pair.n(), 0.0)?;
    if *pair == StructuralPair::type_i() && q[(0, 1)] == 0.0 {
        let (ka, kb) = (q[(0, 0)], q[(1, 1)]);
        let delta = kb * kb + 4.0 * ka;
        if ka.abs() <= 1e-12 || delta.abs() <= 1e-12 {
            return Ok(finiteness_predicate(ka, kb));
        }
        if delta < 0.0 {
            return Ok(false);
        }
        // Roots x² = (−κb ± √Δ)/2; a negative one gives simple imaginary eigenvalues.
        return Ok(kb + delta.sqrt() > 0.0);
    }
    finite_blowup_spectral(pair, q)
}

/// Jordan-structure criterion: some purely imaginary eigenvalue of the Hamiltonian matrix
/// carries a Jordan block of odd size.
pub fn finite_blowup_spectral(pair: &StructuralPair, q: &DMatrix<f64>) -> Result<bool> {
    check_potential(q, pair.n(), 0.0)?;
    let h = pair.hamiltonian(q);
    let dim = h.nrows();
    let scale = h.amax().max(1.0);
    let eig = h.clone().complex_eigenvalues();
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for &l in eig.iter() {
        match clusters.iter_mut().find(|c| {
            let center = c.iter().sum::<C64>() / c.len() as f64;
            (center - l).norm() < 1e-4 * scale
        }) {
            Some(c) => c.push(l),
            None => clusters.push(vec![l]),
        }
    }
    let hc: DMatrix<C64> = h.map(|x| C64::new(x, 0.0));
    for c in &clusters {
        let center = c.iter().sum::<C64>() / c.len() as f64;
        if center.re.abs() >= 1e-9 * scale {
            continue;
        }
        let center = C64::new(0.0, center.im);
        let shifted = &hc - DMatrix::<C64>::identity(dim, dim) * center;
        let shift_norm = shifted.map(|z| z.norm()).amax().max(1.0);
        let mut ranks = vec![dim];
        let mut power = DMatrix::<C64>::identity(dim, dim);
        for k in 1..=c.len() {
            power = &power * &shifted;
            let tol = 1e-8 * shift_norm.powi(k as i32);
            let r = power.singular_values().iter().filter(|&&s| s > tol).count();
            ranks.push(r);
            if r == ranks[k - 1] {
                break;
            }
        }
        let at_least: Vec<usize> = ranks.windows(2).map(|w| w[0] - w[1]).collect();
        let total: usize = at_least.iter().sum();
        if total != c.len() {
            // Numerically split cluster: treat as simple imaginary eigenvalues.
            return Ok(true);
        }
        for k in 0..at_least.len() {
            let exact = at_least[k] - at_least.get(k + 1).copied().unwrap_or(0);
            if exact > 0 && (k + 1) % 2 == 1 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
