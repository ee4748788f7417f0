//! Adaptive Dormand–Prince 5(4) integrator with continuous extension.
//!
//! The stepper is driven one accepted step at a time so callers can inspect or rescale the state
//! between steps (see [`Dopri5::set_state`]).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size; `f64::INFINITY` for none.
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

/// Dense output on one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rcont[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    /// State at the end of the step.
    pub fn end_state(&self) -> Vec<f64> {
        self.rcont[0]
            .iter()
            .zip(&self.rcont[1])
            .map(|(a, b)| a + b)
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One-step-at-a-time Dormand–Prince integrator for `y' = f(t, y)`.
pub struct Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    f: F,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    h: f64,
    steps: usize,
    tmp: Vec<f64>,
    ynew: Vec<f64>,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, tol: Tolerances) -> Self {
        let n = y0.len();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        f(t0, &y0, &mut k[0]);
        let mut s = Self {
            f,
            tol,
            t: t0,
            y: y0,
            k,
            h: 0.0,
            steps: 0,
            tmp: vec![0.0; n],
            ynew: vec![0.0; n],
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    /// Replace the current state (same time), e.g. after a rescaling.
    pub fn set_state(&mut self, y: Vec<f64>) {
        assert_eq!(y.len(), self.y.len());
        self.y = y;
        (self.f)(self.t, &self.y, &mut self.k[0]);
    }

    fn err_scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.y.len() {
            let sk = self.err_scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.k[0][i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.tol.h_max);
        for i in 0..self.y.len() {
            self.tmp[i] = self.y[i] + h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; self.y.len()];
        (self.f)(self.t + h0, &self.tmp, &mut f1);
        let mut d2 = 0.0;
        for i in 0..self.y.len() {
            let sk = self.err_scale(self.y[i], self.y[i]);
            d2 += ((f1[i] - self.k[0][i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.tol.h_max)
    }

    /// Take one accepted step, not going past `t_end`. Returns the dense output of the step.
    pub fn step(&mut self, t_end: f64) -> Result<DenseStep> {
        let n = self.y.len();
        let mut reject = false;
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::Integration {
                    t: self.t,
                    reason: format!("step budget of {} exhausted", self.tol.max_steps),
                });
            }
            self.steps += 1;
            let mut h = self.h.min(self.tol.h_max);
            let last = self.t + h >= t_end;
            if last {
                h = t_end - self.t;
            }
            if !(h > 1e-15 * self.t.abs().max(1e-300)) || !h.is_finite() {
                return Err(Error::Integration {
                    t: self.t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let t = self.t;
            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let tmp = &mut self.tmp;
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            (self.f)(t + C2 * h, tmp, k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.f)(t + C3 * h, tmp, k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.f)(t + C4 * h, tmp, k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.f)(t + C5 * h, tmp, k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.f)(t + h, tmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.f)(t + h, ynew, k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                self.h = h * 0.1;
                reject = true;
                continue;
            }
            let fac = (0.9 / err.powf(0.2)).clamp(0.2, if reject { 1.0 } else { 10.0 });
            if err <= 1.0 {
                let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let dense = DenseStep { t0: t, h, rcont };
                std::mem::swap(&mut self.y, &mut self.ynew);
                let k7 = std::mem::take(&mut self.k[6]);
                self.k[0].copy_from_slice(&k7);
                self.k[6] = k7;
                self.t = if last { t_end } else { t + h };
                self.h = h * fac;
                return Ok(dense);
            }
            self.h = h * fac;
            reject = true;
        }
    }
}

/// Integrate over `[t0, t1]`, returning every accepted step.
pub fn integrate<F>(f: F, t0: f64, y0: Vec<f64>, t1: f64, tol: Tolerances) -> Result<Vec<DenseStep>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut stepper = Dopri5::new(f, t0, y0, tol);
    let mut steps = Vec::new();
    while stepper.t() < t1 {
        steps.push(stepper.step(t1)?);
    }
    Ok(steps)
}

/// Dense evaluation across a sequence of consecutive steps.
pub fn eval_steps(steps: &[DenseStep], t: f64) -> Vec<f64> {
    let idx = steps.partition_point(|s| s.t1() < t).min(steps.len() - 1);
    steps[idx].eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let steps = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            vec![1.0],
            5.0,
            Tolerances::new(1e-12, 1e-14),
        )
        .unwrap();
        let end = steps.last().unwrap().end_state();
        assert!((end[0] - (-5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dense_output_harmonic_oscillator() {
        let steps = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            vec![0.0, 1.0],
            10.0,
            Tolerances::new(1e-11, 1e-13),
        )
        .unwrap();
        for i in 0..=200 {
            let t = 10.0 * i as f64 / 200.0;
            let y = eval_steps(&steps, t);
            assert!((y[0] - t.sin()).abs() < 1e-8, "t={t}: {}", y[0]);
            assert!((y[1] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn set_state_restarts_consistently() {
        let mut st = Dopri5::new(|_, y, dy| dy[0] = y[0], 0.0, vec![1.0], Tolerances::default());
        while st.t() < 1.0 {
            st.step(1.0).unwrap();
            let y = st.state()[0];
            st.set_state(vec![y * 0.5]);
        }
        assert!(st.state()[0].is_finite());
    }

    #[test]
    fn step_budget_is_reported() {
        let tol = Tolerances {
            max_steps: 3,
            ..Tolerances::new(1e-12, 1e-14)
        };
        let r = integrate(|_, y, dy| dy[0] = y[0], 0.0, vec![1.0], 100.0, tol);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
