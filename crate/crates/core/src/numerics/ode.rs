//! Dormand–Prince 5(4) explicit Runge–Kutta integrator with adaptive steps.
//!
//! The integrator advances a fixed-size real state `[f64; N]`. Callers step
//! it to a sequence of output times with [`DormandPrince::advance_to`]; the
//! internal step size is carried across calls, and a step is only shortened
//! when it would overshoot the requested time.

use crate::error::{Error, Result};

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

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Relative tolerance applied per component.
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: f64,
    /// Initial step.
    pub initial_step: f64,
    /// Steps smaller than this are treated as a collapse.
    pub min_step: f64,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// Hard limit on attempted steps across the integrator's life.
    pub max_steps: u64,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Stats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

pub struct DormandPrince<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    control: StepControl,
    stats: Stats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        *o += h * acc;
    }
    out
}

impl<const N: usize, F> DormandPrince<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], control: StepControl) -> Self {
        let k1 = rhs(t0, &y0);
        Self {
            rhs,
            t: t0,
            y: y0,
            k1,
            h: control.initial_step,
            control,
            stats: Stats {
                evaluations: 1,
                ..Stats::default()
            },
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Integrates until `t == t_end` exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            let accepted_h = self.try_step(h)?;
            if let Some(h_next) = accepted_h {
                if clipped {
                    self.t = t_end;
                    // keep the natural step for the next call
                    self.h = self.h.max(h_next.min(self.control.max_step));
                } else {
                    self.h = h_next.min(self.control.max_step);
                }
            }
        }
        Ok(())
    }

    /// Attempts one step of size `h`. On acceptance returns the proposed
    /// next step; on rejection shrinks `self.h` and returns `None`.
    fn try_step(&mut self, h: f64) -> Result<Option<f64>> {
        if self.stats.accepted + self.stats.rejected >= self.control.max_steps {
            return Err(Error::StepSizeCollapse {
                t: self.t,
                step: h,
                state: self.y.to_vec(),
            });
        }
        let t = self.t;
        let y = &self.y;
        let k1 = self.k1;
        let f = &mut self.rhs;
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(
                y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(t + h, &y_new);
        self.stats.evaluations += 6;

        let mut sum = 0.0;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.control.atol + self.control.rtol * y[i].abs().max(y_new[i].abs());
            sum += (e / scale).powi(2);
        }
        let err = (sum / N as f64).sqrt();
        if !err.is_finite() {
            self.stats.rejected += 1;
            self.h = 0.1 * h;
            return self.check_collapse().map(|_| None);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            self.stats.accepted += 1;
            self.t = t + h;
            self.y = y_new;
            self.k1 = k7;
            Ok(Some(h * factor))
        } else {
            self.stats.rejected += 1;
            self.h = h * factor.min(1.0);
            self.check_collapse().map(|_| None)
        }
    }

    fn check_collapse(&self) -> Result<()> {
        if self.h < self.control.min_step {
            Err(Error::StepSizeCollapse {
                t: self.t,
                step: self.h,
                state: self.y.to_vec(),
            })
        } else {
            Ok(())
        }
    }
}
