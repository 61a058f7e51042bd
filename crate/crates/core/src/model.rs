//! Ring of harmonically forced Duffing oscillators with nearest-neighbour
//! coupling:
//!
//! ```text
//! M ẍ + D ẋ + K₁ x + F_nl(x) = f(t)
//! M = diag(mᵢ), D = α M, F_nl,i = k_nl,i xᵢ³, fᵢ(t) = F cos(Ω t)
//! ```
//!
//! `K₁` carries `-k_c` towards both ring neighbours, wrapping from the last
//! oscillator back to the first. Its diagonal depends on [`StiffnessLayout`].

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the diagonal of `K₁` is built from `k₁,ᵢ` and `k_c`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StiffnessLayout {
    /// Each mass hangs on a ground spring `k₁,ᵢ` plus its two coupling
    /// springs: `K₁,ᵢᵢ = k₁,ᵢ + 2 k_c`. Rows sum to `k₁,ᵢ`.
    #[default]
    Grounded,
    /// `K₁,ᵢᵢ = 2 k₁,ᵢ` independent of the coupling.
    Doubled,
}

/// Physical parameters of the oscillator ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_osc: usize,
    pub masses: Vec<f64>,
    /// Damping ratio coefficient, `dᵢ = α mᵢ`.
    pub alpha: f64,
    pub k_lin: Vec<f64>,
    pub k_coupling: f64,
    pub k_cubic: Vec<f64>,
    pub force_amp: f64,
    /// Angular forcing frequency.
    pub force_freq: f64,
    #[serde(default)]
    pub stiffness_layout: StiffnessLayout,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::uniform(10)
    }
}

impl ModelParams {
    /// `n` identical oscillators with the reference parameter set
    /// (m = 1, α = 0.1, k₁ = 1, k_c = 0.1, k_nl = 2, F = 1, Ω = 2).
    pub fn uniform(n: usize) -> Self {
        Self {
            n_osc: n,
            masses: vec![1.0; n],
            alpha: 0.1,
            k_lin: vec![1.0; n],
            k_coupling: 0.1,
            k_cubic: vec![2.0; n],
            force_amp: 1.0,
            force_freq: 2.0,
            stiffness_layout: StiffnessLayout::Grounded,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_osc;
        if n < 2 {
            return Err(Error::invalid("n_osc", format!("need at least 2 oscillators, got {n}")));
        }
        for (name, v) in [
            ("masses", &self.masses),
            ("k_lin", &self.k_lin),
            ("k_cubic", &self.k_cubic),
        ] {
            if v.len() != n {
                return Err(Error::invalid(name, format!("length {} != n_osc {n}", v.len())));
            }
        }
        if let Some(m) = self.masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::invalid("masses", format!("mass must be positive, got {m}")));
        }
        let stiff = self.k_lin.iter().chain(&self.k_cubic).chain([&self.k_coupling]);
        if let Some(k) = stiff.into_iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::invalid("stiffness", format!("must be non-negative, got {k}")));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be non-negative, got {}", self.alpha)));
        }
        if !self.force_amp.is_finite() || !self.force_freq.is_finite() {
            return Err(Error::invalid("forcing", "amplitude and frequency must be finite"));
        }
        Ok(())
    }

    /// Copy with the mass of oscillator `index` (0-based) replaced.
    pub fn with_mass(&self, index: usize, mass: f64) -> Self {
        let mut p = self.clone();
        p.masses[index] = mass;
        p
    }

    pub fn state_len(&self) -> usize {
        2 * self.n_osc
    }

    /// `K₁[i][i]`.
    pub fn diagonal_stiffness(&self, i: usize) -> f64 {
        match self.stiffness_layout {
            StiffnessLayout::Grounded => self.k_lin[i] + 2.0 * self.k_coupling,
            StiffnessLayout::Doubled => 2.0 * self.k_lin[i],
        }
    }

    /// Writes the first-order derivative `[ẋ; M⁻¹(f − Dẋ − K₁x − F_nl)]` into `out`.
    ///
    /// Uses the ring structure of `K₁` directly instead of a dense product.
    pub fn derivative_into(&self, t: f64, state: &[f64], out: &mut [f64]) {
        let n = self.n_osc;
        let (x, v) = state.split_at(n);
        let (dx, dv) = out.split_at_mut(n);
        dx.copy_from_slice(v);
        let forcing = self.force_amp * (self.force_freq * t).cos();
        let kc = self.k_coupling;
        for i in 0..n {
            let left = x[(i + n - 1) % n];
            let right = x[(i + 1) % n];
            let restoring = self.diagonal_stiffness(i) * x[i] - kc * (left + right);
            let m = self.masses[i];
            let damping = self.alpha * m * v[i];
            let cubic = self.k_cubic[i] * x[i] * x[i] * x[i];
            dv[i] = (forcing - damping - restoring - cubic) / m;
        }
    }
}

/// Dense mass, damping and linear stiffness matrices of the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

pub fn assemble_matrices(params: &ModelParams) -> Result<SystemMatrices> {
    params.validate()?;
    let n = params.n_osc;
    let mass = DMatrix::from_diagonal(&params.masses.clone().into());
    let damping = &mass * params.alpha;
    let mut stiffness = DMatrix::zeros(n, n);
    for i in 0..n {
        stiffness[(i, i)] = params.diagonal_stiffness(i);
        // accumulate so that the two-oscillator ring gets both springs
        stiffness[(i, (i + 1) % n)] -= params.k_coupling;
        stiffness[(i, (i + n - 1) % n)] -= params.k_coupling;
    }
    Ok(SystemMatrices {
        mass,
        damping,
        stiffness,
    })
}

/// Full state: displacements `x₁..x_N` followed by velocities `ẋ₁..ẋ_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn zeros(n_osc: usize) -> Self {
        StateVector(vec![0.0; 2 * n_osc])
    }

    pub fn from_parts(x: &[f64], v: &[f64]) -> Result<Self> {
        if x.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: v.len(),
            });
        }
        Ok(StateVector(x.iter().chain(v).copied().collect()))
    }

    pub fn n_osc(&self) -> usize {
        self.0.len() / 2
    }

    pub fn displacements(&self) -> &[f64] {
        &self.0[..self.n_osc()]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.0[self.n_osc()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, n_osc: usize) -> Result<()> {
        if self.0.len() != 2 * n_osc {
            return Err(Error::DimensionMismatch {
                expected: 2 * n_osc,
                actual: self.0.len(),
            });
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: f64::NAN });
        }
        Ok(())
    }
}

/// Time derivative of `state` at time `t`.
pub fn equations_of_motion(t: f64, state: &StateVector, params: &ModelParams) -> Result<StateVector> {
    state.check(params.n_osc)?;
    let mut out = vec![0.0; state.0.len()];
    params.derivative_into(t, &state.0, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    Ok(StateVector(out))
}

/// Elementwise `k_cubic[i] * x[i]^3`.
pub fn nonlinear_force(x: &[f64], k_cubic: &[f64]) -> Result<Vec<f64>> {
    if x.len() != k_cubic.len() {
        return Err(Error::DimensionMismatch {
            expected: k_cubic.len(),
            actual: x.len(),
        });
    }
    Ok(x.iter().zip(k_cubic).map(|(x, k)| k * x * x * x).collect())
}

/// Multiplies every mass, linear and cubic stiffness by an independent
/// uniform factor in `[1 - level, 1 + level]`. Coupling, damping and
/// forcing are left alone.
pub fn perturb_params<R: Rng + ?Sized>(params: &ModelParams, level: f64, rng: &mut R) -> Result<ModelParams> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid("level", format!("must lie in [0, 1), got {level}")));
    }
    let mut p = params.clone();
    if level == 0.0 {
        return Ok(p);
    }
    for v in p
        .masses
        .iter_mut()
        .chain(p.k_lin.iter_mut())
        .chain(p.k_cubic.iter_mut())
    {
        *v *= rng.random_range(1.0 - level..=1.0 + level);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doubled(n: usize) -> ModelParams {
        ModelParams {
            stiffness_layout: StiffnessLayout::Doubled,
            ..ModelParams::uniform(n)
        }
    }

    #[test]
    fn doubled_stiffness_matrix() {
        let m = assemble_matrices(&doubled(10)).unwrap();
        for i in 0..10 {
            assert_eq!(m.stiffness[(i, i)], 2.0);
            assert_eq!(m.mass[(i, i)], 1.0);
            assert_relative_eq!(m.damping[(i, i)], 0.1);
        }
        assert_relative_eq!(m.stiffness[(0, 1)], -0.1);
        assert_relative_eq!(m.stiffness[(0, 9)], -0.1);
        assert_relative_eq!(m.stiffness[(9, 0)], -0.1);
        assert_eq!(m.stiffness[(0, 5)], 0.0);
        assert_eq!(m.stiffness, m.stiffness.transpose());
    }

    #[test]
    fn grounded_stiffness_matrix() {
        let m = assemble_matrices(&ModelParams::default()).unwrap();
        for i in 0..10 {
            assert_relative_eq!(m.stiffness[(i, i)], 1.2);
            assert_relative_eq!(m.stiffness.row(i).sum(), 1.0, epsilon = 1e-14);
        }
        assert_relative_eq!(m.stiffness[(3, 4)], -0.1);
        assert_eq!(m.stiffness, m.stiffness.transpose());
    }

    #[test]
    fn decoupled_pair() {
        let mut p = doubled(2);
        p.k_coupling = 0.0;
        let m = assemble_matrices(&p).unwrap();
        assert_eq!(m.stiffness, DMatrix::from_diagonal_element(2, 2, 2.0));
    }

    #[test]
    fn ring_of_three_is_complete() {
        let mut p = doubled(3);
        p.k_coupling = 0.5;
        let m = assemble_matrices(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { -0.5 };
                assert_eq!(m.stiffness[(i, j)], want);
            }
        }
    }

    #[test]
    fn row_sums_uniform() {
        let mut p = doubled(7);
        p.k_lin = vec![1.3; 7];
        p.k_coupling = 0.25;
        let m = assemble_matrices(&p).unwrap();
        for row in m.stiffness.row_iter() {
            assert_relative_eq!(row.sum(), 2.0 * 1.3 - 2.0 * 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ModelParams::uniform(3);
        p.masses[1] = 0.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::uniform(3);
        p.k_cubic.pop();
        assert!(p.validate().is_err());
        assert!(ModelParams::uniform(1).validate().is_err());
        let mut p = ModelParams::uniform(3);
        p.alpha = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn unforced_equilibrium() {
        let mut p = ModelParams::default();
        p.force_amp = 0.0;
        let d = equations_of_motion(1.7, &StateVector::zeros(10), &p).unwrap();
        assert!(d.0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forcing_at_rest() {
        let d = equations_of_motion(0.0, &StateVector::zeros(10), &ModelParams::default()).unwrap();
        assert!(d.displacements().iter().all(|v| *v == 0.0));
        assert!(d.velocities().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn single_oscillator_substitution() {
        let mut p = doubled(2);
        p.k_coupling = 0.0;
        p.force_amp = 0.0;
        p.masses[0] = 1.7;
        p.k_lin[0] = 0.8;
        let a = 0.6;
        let s = StateVector(vec![a, 0.0, 0.0, 0.0]);
        let d = equations_of_motion(0.0, &s, &p).unwrap();
        let want = -(2.0 * 0.8 * a + 2.0 * a * a * a) / 1.7;
        assert_relative_eq!(d.0[2], want, epsilon = 1e-15);
        assert_eq!(d.0[3], 0.0);
    }

    #[test]
    fn eom_matches_dense_matrices() {
        for layout in [StiffnessLayout::Grounded, StiffnessLayout::Doubled] {
            eom_matches_dense(layout);
        }
    }

    fn eom_matches_dense(layout: StiffnessLayout) {
        let mut p = ModelParams::uniform(6);
        p.stiffness_layout = layout;
        p.masses = vec![1.0, 0.9, 1.2, 0.8, 1.1, 1.05];
        p.k_lin = vec![1.0, 1.1, 0.9, 1.0, 1.2, 0.95];
        let m = assemble_matrices(&p).unwrap();
        let x = nalgebra::DVector::from_vec(vec![0.1, -0.3, 0.25, 0.4, -0.05, 0.2]);
        let v = nalgebra::DVector::from_vec(vec![0.2, 0.1, -0.4, 0.0, 0.3, -0.2]);
        let t = 0.37;
        let fnl = nonlinear_force(x.as_slice(), &p.k_cubic).unwrap();
        let f = nalgebra::DVector::from_element(6, p.force_amp * (p.force_freq * t).cos());
        let rhs = f - &m.damping * &v - &m.stiffness * &x - nalgebra::DVector::from_vec(fnl);
        let acc = m.mass.clone().try_inverse().unwrap() * rhs;
        let s = StateVector::from_parts(x.as_slice(), v.as_slice()).unwrap();
        let d = equations_of_motion(t, &s, &p).unwrap();
        for i in 0..6 {
            assert_relative_eq!(d.0[i], v[i]);
            assert_relative_eq!(d.0[6 + i], acc[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let p = ModelParams::default();
        let n = 10;
        let s: Vec<f64> = (0..2 * n).map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let d = equations_of_motion(0.9, &StateVector(s.clone()), &p).unwrap();
        let r = 3;
        let rot = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; 2 * n];
            for i in 0..n {
                out[(i + r) % n] = v[i];
                out[n + (i + r) % n] = v[n + i];
            }
            out
        };
        let dr = equations_of_motion(0.9, &StateVector(rot(&s)), &p).unwrap();
        assert_eq!(dr.0, rot(&d.0));
    }

    #[test]
    fn nonlinear_force_values() {
        assert_eq!(nonlinear_force(&[0.0; 3], &[2.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(nonlinear_force(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(nonlinear_force(&[-0.5], &[2.0]).unwrap(), vec![-0.25]);
        assert!(nonlinear_force(&[1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn perturbation_bounds_and_determinism() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(perturb_params(&p, 0.0, &mut rng).unwrap(), p);

        let a = perturb_params(&p, 0.01, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = perturb_params(&p, 0.01, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.masses.iter().all(|m| (0.99..=1.01).contains(m)));
        assert!(a.k_lin.iter().all(|k| (0.99..=1.01).contains(k)));
        assert!(a.k_cubic.iter().all(|k| (1.98..=2.02).contains(k)));
        assert_ne!(a.masses, p.masses);
        assert_eq!(a.k_coupling, p.k_coupling);
        assert_eq!(a.alpha, p.alpha);
        assert!(perturb_params(&p, 1.0, &mut rng).is_err());
    }
}
