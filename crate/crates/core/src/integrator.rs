//! Dormand–Prince 5(4) integration with Hairer's fourth-order continuous
//! extension, sampled onto a uniform output grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, StateVector};

/// First-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn derivative(&self, t: f64, y: &[f64], out: &mut [f64]);
}

impl OdeSystem for ModelParams {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn derivative(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.derivative_into(t, y, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Uniformly sampled displacement and velocity histories.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// One row per oscillator, one column per sample.
    pub displacements: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn n_osc(&self) -> usize {
        self.displacements.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State vector at sample `k`.
    pub fn state_at(&self, k: usize) -> StateVector {
        StateVector(
            self.displacements
                .iter()
                .chain(&self.velocities)
                .map(|row| row[k])
                .collect(),
        )
    }
}

/// Number of samples on `[0, t_end]` at spacing `dt`, endpoints included.
pub fn sample_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt).round() as usize + 1
}

// Dormand–Prince tableau.
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
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    cont: [Vec<f64>; 5],
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            cont: std::array::from_fn(|_| vec![0.0; n]),
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sk = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / y.len() as f64).sqrt()
}

/// Starting step guess (Hairer, Nørsett & Wanner, II.4).
fn initial_step<S: OdeSystem + ?Sized>(sys: &S, y: &[f64], f0: &[f64], cfg: &IntegratorConfig, span: f64) -> f64 {
    let n = y.len();
    let scale: Vec<f64> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    sys.derivative(h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates the ring from `x0` at `t = 0` and samples it every `dt_out`
/// up to `t_end`.
pub fn integrate(
    params: &ModelParams,
    x0: &StateVector,
    t_end: f64,
    dt_out: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    params.validate()?;
    x0.check(params.n_osc)?;
    let n_osc = params.n_osc;
    let samples = integrate_system(params, &x0.0, t_end, dt_out, cfg)?;
    let mut displacements = vec![Vec::with_capacity(samples.len()); n_osc];
    let mut velocities = vec![Vec::with_capacity(samples.len()); n_osc];
    for y in &samples {
        for i in 0..n_osc {
            displacements[i].push(y[i]);
            velocities[i].push(y[n_osc + i]);
        }
    }
    Ok(Trajectory {
        dt: dt_out,
        times: (0..samples.len()).map(|k| k as f64 * dt_out).collect(),
        displacements,
        velocities,
    })
}

/// Integrates any [`OdeSystem`] from `y0` at `t = 0`, returning the state at
/// every multiple of `dt_out` up to `t_end` (dense output between steps).
pub fn integrate_system<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    dt_out: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dim = sys.dim();
    if y0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: y0.len(),
        });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("t_end", format!("must be positive, got {t_end}")));
    }
    if !(dt_out > 0.0) || !dt_out.is_finite() {
        return Err(Error::invalid("dt_out", format!("must be positive, got {dt_out}")));
    }

    let samples = sample_count(t_end, dt_out);
    let times: Vec<f64> = (0..samples).map(|k| k as f64 * dt_out).collect();
    let t_final = times[samples - 1];
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(samples);

    let mut y = y0.to_vec();
    out.push(y.clone());
    let mut next_out = 1;

    let mut ws = Workspace::new(dim);
    let mut t = 0.0;
    sys.derivative(t, &y, &mut ws.k[0]);
    let mut h = initial_step(sys, &y, &ws.k[0], cfg, t_final.max(f64::MIN_POSITIVE));
    let mut steps = 0usize;

    while next_out < samples {
        if steps >= cfg.max_steps {
            return Err(Error::StepBudgetExhausted {
                t,
                max_steps: cfg.max_steps,
            });
        }
        let mut last = false;
        if t + 1.01 * h >= t_final {
            h = t_final - t;
            last = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        steps += 1;

        let Workspace { k, tmp, y_new, cont } = &mut ws;
        let stage = |coef: &[(usize, f64)], tmp: &mut Vec<f64>, k: &[Vec<f64>; 7]| {
            for i in 0..dim {
                let mut acc = y[i];
                for &(s, a) in coef {
                    acc += h * a * k[s][i];
                }
                tmp[i] = acc;
            }
        };
        stage(&[(0, A21)], tmp, k);
        sys.derivative(t + C2 * h, tmp, &mut k[1]);
        stage(&[(0, A31), (1, A32)], tmp, k);
        sys.derivative(t + C3 * h, tmp, &mut k[2]);
        stage(&[(0, A41), (1, A42), (2, A43)], tmp, k);
        sys.derivative(t + C4 * h, tmp, &mut k[3]);
        stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], tmp, k);
        sys.derivative(t + C5 * h, tmp, &mut k[4]);
        stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], tmp, k);
        let t_new = if last { t_final } else { t + h };
        sys.derivative(t_new, tmp, &mut k[5]);
        stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], y_new, k);
        sys.derivative(t_new, y_new, &mut k[6]);

        for i in 0..dim {
            tmp[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
        }
        let err = error_norm(&y, y_new, tmp, cfg);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if h < 1e-12 {
                return Err(Error::NonFiniteState { t });
            }
            h *= FAC_MIN;
            continue;
        }

        if err <= 1.0 {
            for i in 0..dim {
                let diff = y_new[i] - y[i];
                let bspl = h * k[0][i] - diff;
                cont[0][i] = y[i];
                cont[1][i] = diff;
                cont[2][i] = bspl;
                cont[3][i] = diff - h * k[6][i] - bspl;
                cont[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                        + D7 * k[6][i]);
            }
            while next_out < samples && (times[next_out] <= t_new || last) {
                let to = times[next_out];
                if next_out == samples - 1 {
                    out.push(y_new.clone());
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..dim {
                        tmp[i] = cont[0][i]
                            + theta
                                * (cont[1][i]
                                    + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
                    }
                    out.push(tmp.clone());
                }
                next_out += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, y_new);
            k.swap(0, 6);
            let fac = (err.max(1e-10).powf(0.2) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            h /= fac;
        } else {
            let fac = (err.powf(0.2) / SAFETY).min(1.0 / FAC_MIN);
            h /= fac;
        }
    }

    Ok(out)
}
