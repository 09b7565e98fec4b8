//! Strang splitting for `i u_t - Δu + f(u) = 0`.
//!
//! Written as `i u_t = Δu - f(u)`, the equation splits into two flows that
//! are solved exactly:
//!
//! - linear: `i u_t = Δu`, i.e. `û_ξ(τ) = exp(i|ξ|²τ) û_ξ(0)`;
//! - nonlinear: `i u_t = -u F'(|u|²/2)`, which keeps `|u|` fixed pointwise,
//!   so `u(τ) = u(0) exp(i F'(|u(0)|²/2) τ)`.
//!
//! Both are isometries of `L²`, so the mass is conserved to rounding. The
//! conserved Hamiltonian of this sign convention is `½‖∇u‖² + ∫F(|u|²/2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{nls_energy, nls_leakage, sup_norm_complex, tensor_bump, EnergyReport, GridSpec, NlsState, Spectral};
use crate::nonlinearity::NlsNonlinearitySpec;
use crate::wave::{perturbation_profile, relative_drift, LEAKAGE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsData {
    pub amplitude: f64,
    pub radius: f64,
    /// Size of the off-centre half-radius bump added to the data.
    pub perturbation: f64,
}

impl NlsData {
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        Self { amplitude, radius, perturbation: 0.0 }
    }

    pub fn with_perturbation(mut self, eps: f64) -> Self {
        self.perturbation = eps;
        self
    }

    pub fn initial_state(&self, grid: GridSpec) -> Result<NlsState> {
        let mut u = tensor_bump(&grid, self.amplitude, self.radius, 0.0);
        if self.perturbation != 0.0 {
            for (a, b) in u.iter_mut().zip(perturbation_profile(&grid, self.radius)) {
                *a += self.perturbation * b;
            }
        }
        NlsState::new(grid, u.into_iter().map(|x| Complex64::new(x, 0.0)).collect(), 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct NlsRunConfig {
    pub grid: GridSpec,
    pub spec: NlsNonlinearitySpec,
    pub dt: f64,
    pub t_final: f64,
    pub data: NlsData,
    pub stride: usize,
    pub margin: f64,
}

impl NlsRunConfig {
    pub fn new(grid: GridSpec, spec: NlsNonlinearitySpec, dt: f64, t_final: f64, data: NlsData) -> Self {
        Self { grid, spec, dt, t_final, data, stride: 1, margin: grid.l / 8.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.dt > 0.0) || self.dt > self.grid.h() {
            return Err(Error::Invalid(format!(
                "time step must satisfy 0 < dt <= h = {}, got {}",
                self.grid.h(),
                self.dt
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Invalid(format!("horizon T must be nonnegative, got {}", self.t_final)));
        }
        if self.stride == 0 {
            return Err(Error::Invalid("diagnostics stride must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Exact flow of `i u_t = Δu` over time `tau`.
pub fn linear_flow(state: &mut NlsState, tau: f64, spectral: &Spectral) -> Result<()> {
    state.grid.check_len(state.u.len())?;
    spectral.forward(&mut state.u);
    for (v, &k2) in state.u.iter_mut().zip(spectral.symbol()) {
        *v *= Complex64::from_polar(1.0, k2 * tau);
    }
    spectral.inverse(&mut state.u);
    Ok(())
}

/// Exact pointwise flow of `i u_t = -f(u)` over time `tau`.
pub fn nonlinear_flow(state: &mut NlsState, tau: f64, spec: &NlsNonlinearitySpec) -> Result<()> {
    for z in state.u.iter_mut() {
        let phase = spec.density_derivative(0.5 * z.norm_sqr()) * tau;
        if !phase.is_finite() {
            return Err(Error::NonFinite { what: "nonlinear phase", t: state.t });
        }
        *z *= Complex64::from_polar(1.0, phase);
    }
    Ok(())
}

/// Half nonlinear, full linear, half nonlinear.
pub fn strang_step(state: &mut NlsState, dt: f64, spec: &NlsNonlinearitySpec, spectral: &Spectral) -> Result<()> {
    let last_valid_t = state.t;
    nonlinear_flow(state, 0.5 * dt, spec)?;
    linear_flow(state, dt, spectral)?;
    nonlinear_flow(state, 0.5 * dt, spec)?;
    state.t += dt;
    if !state.is_finite() {
        return Err(Error::BlowUp { last_valid_t });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsDiagnostics {
    pub t: f64,
    pub energy: EnergyReport,
    pub leakage: f64,
    pub sup_norm: f64,
}

pub const NLS_TRACE_HEADER: &str = "t,mass,H_total,H_gradient,H_potential,leakage,sup_norm";

impl NlsDiagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.energy.mass.unwrap_or(0.0),
            self.energy.total,
            self.energy.kinetic,
            self.energy.potential,
            self.leakage,
            self.sup_norm
        )
    }
}

#[derive(Debug, Clone)]
pub struct NlsRun {
    pub grid: GridSpec,
    pub dt: f64,
    pub snapshots: Vec<NlsState>,
    pub trace: Vec<NlsDiagnostics>,
    pub leakage_flag: bool,
}

impl NlsRun {
    pub fn final_state(&self) -> &NlsState {
        self.snapshots.last().expect("a run records at least the initial snapshot")
    }

    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.trace.iter().map(|r| r.energy.mass.unwrap_or(0.0)))
    }

    pub fn hamiltonian_drift(&self) -> f64 {
        relative_drift(self.trace.iter().map(|r| r.energy.total))
    }

    pub fn max_leakage(&self) -> f64 {
        self.trace.iter().map(|r| r.leakage).fold(0.0, f64::max)
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(NLS_TRACE_HEADER);
        out.push('\n');
        for row in &self.trace {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

pub fn run(cfg: &NlsRunConfig) -> Result<NlsRun> {
    cfg.validate()?;
    let state = cfg.data.initial_state(cfg.grid)?;
    run_from(cfg, state)
}

pub fn run_from(cfg: &NlsRunConfig, mut state: NlsState) -> Result<NlsRun> {
    cfg.validate()?;
    let spectral = Spectral::new(cfg.grid)?;
    let steps = cfg.steps();
    let mut snapshots = Vec::with_capacity(steps / cfg.stride + 2);
    let mut trace = Vec::with_capacity(steps / cfg.stride + 2);
    let mut record = |st: &NlsState| -> Result<()> {
        trace.push(NlsDiagnostics {
            t: st.t,
            energy: nls_energy(st, &cfg.spec, &spectral)?,
            leakage: nls_leakage(st, cfg.margin)?,
            sup_norm: sup_norm_complex(&st.u),
        });
        snapshots.push(st.clone());
        Ok(())
    };
    record(&state)?;
    for n in 1..=steps {
        strang_step(&mut state, cfg.dt, &cfg.spec, &spectral)?;
        if n % cfg.stride == 0 || n == steps {
            record(&state)?;
        }
    }
    let leakage_flag = trace.iter().any(|r| r.leakage > LEAKAGE_LIMIT);
    Ok(NlsRun { grid: cfg.grid, dt: cfg.dt, snapshots, trace, leakage_flag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_norm_sq_complex;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(1, 64, 4.0).unwrap()
    }

    #[test]
    fn plane_wave_gains_exact_phase() {
        let g = grid();
        let sp = Spectral::new(g).unwrap();
        let k = 2.0 * PI / g.l;
        let u: Vec<Complex64> = (0..64).map(|j| Complex64::from_polar(1.0, k * g.coord(j))).collect();
        let mut st = NlsState::new(g, u.clone(), 0.0).unwrap();
        let tau = 0.3;
        linear_flow(&mut st, tau, &sp).unwrap();
        let rot = Complex64::from_polar(1.0, k * k * tau);
        let err = st.u.iter().zip(&u).map(|(a, b)| (a - b * rot).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn constant_field_is_fixed_by_linear_flow() {
        let g = grid();
        let sp = Spectral::new(g).unwrap();
        let mut st = NlsState::new(g, vec![Complex64::new(0.3, -0.2); 64], 0.0).unwrap();
        linear_flow(&mut st, 1.7, &sp).unwrap();
        assert!(st.u.iter().all(|z| (z - Complex64::new(0.3, -0.2)).norm() < 1e-15));
    }

    #[test]
    fn linear_flow_is_unitary() {
        let g = grid();
        let sp = Spectral::new(g).unwrap();
        let mut st = NlsData::bump(1.0, 1.0).initial_state(g).unwrap();
        let m0 = l2_norm_sq_complex(&st.u, &g).unwrap();
        linear_flow(&mut st, 0.77, &sp).unwrap();
        let m1 = l2_norm_sq_complex(&st.u, &g).unwrap();
        assert!(((m1 - m0) / m0).abs() < 1e-13);
    }

    #[test]
    fn nonlinear_flow_scalar_closed_form() {
        // F(s) = s², F'(1/2) = 1: u(τ) = exp(iτ) under i u_t = -f(u).
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let spec = NlsNonlinearitySpec::pure_power(3.0).unwrap();
        let mut st = NlsState::new(g, vec![Complex64::new(1.0, 0.0); 8], 0.0).unwrap();
        nonlinear_flow(&mut st, 0.4, &spec).unwrap();
        assert!((st.u[0] - Complex64::from_polar(1.0, 0.4)).norm() < 1e-15);
        let mut z = NlsState::new(g, vec![Complex64::new(0.0, 0.0); 8], 0.0).unwrap();
        nonlinear_flow(&mut z, 0.4, &spec).unwrap();
        assert!(z.u.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn nonlinear_flow_preserves_modulus() {
        let g = grid();
        let spec = NlsNonlinearitySpec::coercive_exp();
        let mut st = NlsData::bump(2.0, 1.0).initial_state(g).unwrap();
        let before: Vec<f64> = st.u.iter().map(|z| z.norm()).collect();
        nonlinear_flow(&mut st, 0.9, &spec).unwrap();
        for (z, b) in st.u.iter().zip(&before) {
            if *b > 0.0 {
                assert!(((z.norm() - b) / b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn linear_run_conserves_hamiltonian_exactly() {
        let g = GridSpec::new(1, 128, 16.0).unwrap();
        let cfg = NlsRunConfig::new(g, NlsNonlinearitySpec::linear(), 1e-2, 0.5, NlsData::bump(1.0, 1.0));
        let r = run(&cfg).unwrap();
        assert!(r.hamiltonian_drift() < 1e-12);
        assert!(r.mass_drift() < 1e-13);
    }

    #[test]
    fn rejects_large_step() {
        let g = grid();
        let cfg = NlsRunConfig::new(g, NlsNonlinearitySpec::linear(), 2.0 * g.h(), 1.0, NlsData::bump(1.0, 1.0));
        assert!(run(&cfg).is_err());
    }
}
