//! Fixtures that pin conventions and check the numerics: a one-way driven
//! master/slave pair for the sign of `Δ`, the symmetric ring for a single
//! SCC, and a damped linear oscillator with a closed-form solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiment::fixture_ic;
use crate::graph::strongly_connected_components;
use crate::integrator::{integrate, integrate_system, IntegratorConfig, OdeSystem};
use crate::model::ModelParams;
use crate::netinfer::{infer_network, infer_pair, CouplingDirection, DRIVER_SIGN};
use crate::recurrence::RecurrenceConfig;

/// Forced oscillator `i` feeding an unforced copy `j` through the coupling
/// spring; nothing flows back from `j` to `i`.
///
/// State: `[x_i, x_j, ẋ_i, ẋ_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterSlave {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub k_cubic: f64,
    pub k_coupling: f64,
    pub force_amp: f64,
    pub force_freq: f64,
}

impl MasterSlave {
    /// Both oscillators copy oscillator 0 of `params`, including its
    /// diagonal ring stiffness.
    pub fn from_model(params: &ModelParams) -> Self {
        Self {
            mass: params.masses[0],
            damping: params.alpha * params.masses[0],
            stiffness: params.diagonal_stiffness(0),
            k_cubic: params.k_cubic[0],
            k_coupling: params.k_coupling,
            force_amp: params.force_amp,
            force_freq: params.force_freq,
        }
    }
}

impl OdeSystem for MasterSlave {
    fn dim(&self) -> usize {
        4
    }

    fn derivative(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let restoring = |x: f64| self.stiffness * x + self.k_cubic * x * x * x;
        out[0] = y[2];
        out[1] = y[3];
        let f = self.force_amp * (self.force_freq * t).cos();
        out[2] = (f - self.damping * y[2] - restoring(y[0])) / self.mass;
        out[3] = (self.k_coupling * y[0] - self.damping * y[3] - restoring(y[1])) / self.mass;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasterSlaveReport {
    /// `T^{ms} - T^{sm}` per initial condition, master first.
    pub deltas: Vec<f64>,
    pub directions: Vec<CouplingDirection>,
}

impl MasterSlaveReport {
    /// Common sign of every `Δ`, if they share one.
    pub fn observed_sign(&self) -> Option<f64> {
        if self.deltas.iter().all(|d| *d > 0.0) {
            Some(1.0)
        } else if self.deltas.iter().all(|d| *d < 0.0) {
            Some(-1.0)
        } else {
            None
        }
    }

    /// Every case classified as master → slave.
    pub fn all_forward(&self) -> bool {
        self.directions.iter().all(|d| *d == CouplingDirection::Forward)
    }

    pub fn passed(&self) -> bool {
        self.observed_sign() == Some(DRIVER_SIGN) && self.all_forward()
    }
}

/// Runs the master/slave pair from `n_ics` initial conditions uniform in
/// `[0, ic_high)` and records `Δ` and the inferred direction.
pub fn master_slave_fixture(
    params: &ModelParams,
    rec: &RecurrenceConfig,
    integ: &IntegratorConfig,
    n_ics: usize,
    ic_high: f64,
    t_end: f64,
    seed: u64,
) -> Result<MasterSlaveReport> {
    let sys = MasterSlave::from_model(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::with_capacity(n_ics);
    let mut directions = Vec::with_capacity(n_ics);
    for _ in 0..n_ics {
        let y0: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..ic_high)).collect();
        let ys = integrate_system(&sys, &y0, t_end, 0.05, integ)?;
        let master: Vec<f64> = ys.iter().map(|y| y[0]).collect();
        let slave: Vec<f64> = ys.iter().map(|y| y[1]).collect();
        let p = infer_pair(&master, &slave, rec)?;
        deltas.push(p.delta);
        directions.push(p.direction);
    }
    Ok(MasterSlaveReport { deltas, directions })
}

/// SCC count of the network inferred for each named fixture IC at the
/// given parameters.
pub fn fixture_scc_counts(
    params: &ModelParams,
    rec: &RecurrenceConfig,
    integ: &IntegratorConfig,
    t_end: f64,
    names: &[&str],
) -> Result<Vec<(String, usize)>> {
    names
        .iter()
        .map(|name| {
            let x0 = fixture_ic(name)
                .ok_or_else(|| crate::Error::invalid("fixture", format!("unknown fixture `{name}`")))?;
            let tr = integrate(params, &x0, t_end, 0.05, integ)?;
            let net = infer_network(&tr.displacements, rec)?.network;
            Ok((name.to_string(), strongly_connected_components(&net).len()))
        })
        .collect()
}

/// `ẍ + α ẋ + ω₀² x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedLinear {
    pub alpha: f64,
    pub omega0: f64,
}

impl DampedLinear {
    /// Closed-form displacement for the underdamped case.
    pub fn exact(&self, t: f64, x0: f64, v0: f64) -> f64 {
        let zeta_w = self.alpha / 2.0;
        let wd = (self.omega0 * self.omega0 - zeta_w * zeta_w).sqrt();
        let b = (v0 + zeta_w * x0) / wd;
        (-zeta_w * t).exp() * (x0 * (wd * t).cos() + b * (wd * t).sin())
    }
}

impl OdeSystem for DampedLinear {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -self.alpha * y[1] - self.omega0 * self.omega0 * y[0];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorCheck {
    /// `max |x_num - x_exact| / max |x_exact|` over the output grid.
    pub max_rel_error: f64,
    /// Endpoint change when both tolerances are halved.
    pub endpoint_shift: f64,
}

/// Damped linear oscillator (α = 0.1, ω₀ = 1) from `x = 1, ẋ = 0` over `t_end`.
pub fn integrator_fixture(integ: &IntegratorConfig, t_end: f64) -> Result<IntegratorCheck> {
    let sys = DampedLinear { alpha: 0.1, omega0: 1.0 };
    let y0 = [1.0, 0.0];
    let dt = 0.05;
    let ys = integrate_system(&sys, &y0, t_end, dt, integ)?;
    let exact: Vec<f64> = (0..ys.len()).map(|k| sys.exact(k as f64 * dt, y0[0], y0[1])).collect();
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_err = ys.iter().zip(&exact).map(|(y, e)| (y[0] - e).abs()).fold(0.0, f64::max);
    let halved = IntegratorConfig {
        rel_tol: integ.rel_tol / 2.0,
        abs_tol: integ.abs_tol / 2.0,
        ..*integ
    };
    let ys2 = integrate_system(&sys, &y0, t_end, dt, &halved)?;
    let (a, b) = (ys.last().expect("non-empty"), ys2.last().expect("non-empty"));
    let shift = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(IntegratorCheck {
        max_rel_error: max_err / scale,
        endpoint_shift: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn master_slave_has_no_back_coupling() {
        let sys = MasterSlave::from_model(&ModelParams::default());
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        sys.derivative(0.3, &[0.2, 0.0, 0.1, 0.0], &mut a);
        sys.derivative(0.3, &[0.2, 0.7, 0.1, -0.4], &mut b);
        assert_eq!(a[2], b[2]);
        assert_ne!(a[3], b[3]);
    }

    #[test]
    fn integrator_check_is_tight() {
        let c = integrator_fixture(&IntegratorConfig::default(), 10.0).unwrap();
        assert!(c.max_rel_error < 1e-6, "{c:?}");
        assert!(c.endpoint_shift < 1e-6, "{c:?}");
    }
}
