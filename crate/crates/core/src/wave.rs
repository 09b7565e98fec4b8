//! Störmer–Verlet integration of `u_tt - Δu + f(u) = 0` on a periodic box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    inner, integrate_by, l2_norm_sq, sup_norm, tensor_bump, wave_energy, wave_leakage, EnergyReport,
    GridSpec, Spectral, WaveState,
};
use crate::nonlinearity::NonlinearitySpec;
use crate::sampling::cumulative_trapezoid;

/// Stability factor: `dt <= CFL_SAFETY * h / sqrt(d)`.
pub const CFL_SAFETY: f64 = 0.25;

/// Relative tolerance for the CFL check, so that `dt = 0.25 h` typed in
/// decimal is accepted.
const CFL_SLACK: f64 = 1e-12;

/// Leakage above this fraction marks a run as invalid for the unbounded domain.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

pub fn cfl_bound(grid: &GridSpec) -> f64 {
    CFL_SAFETY * grid.h() / (grid.d as f64).sqrt()
}

/// Compactly supported initial data built from tensor bumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveData {
    /// Peak of `u₀`.
    pub amplitude: f64,
    pub radius: f64,
    /// Peak of `u₁` (same profile as `u₀`).
    pub velocity: f64,
    /// Size of an extra bump of half the radius added to `u₀`.
    pub perturbation: f64,
}

impl WaveData {
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        Self { amplitude, radius, velocity: 0.0, perturbation: 0.0 }
    }

    pub fn with_perturbation(mut self, eps: f64) -> Self {
        self.perturbation = eps;
        self
    }

    pub fn initial_state(&self, grid: GridSpec) -> Result<WaveState> {
        let mut u = tensor_bump(&grid, self.amplitude, self.radius, 0.0);
        if self.perturbation != 0.0 {
            let p = perturbation_profile(&grid, self.radius);
            for (a, b) in u.iter_mut().zip(p) {
                *a += self.perturbation * b;
            }
        }
        let ut = tensor_bump(&grid, self.velocity, self.radius, 0.0);
        WaveState::new(grid, u, ut, 0.0)
    }
}

/// Unit-peak bump of half radius, shifted off centre so that it is not
/// collinear with the base data.
pub fn perturbation_profile(grid: &GridSpec, radius: f64) -> Vec<f64> {
    tensor_bump(grid, 1.0, 0.5 * radius, 0.25 * radius)
}

#[derive(Debug, Clone)]
pub struct WaveRunConfig {
    pub grid: GridSpec,
    pub spec: NonlinearitySpec,
    pub dt: f64,
    pub t_final: f64,
    pub data: WaveData,
    /// Steps between recorded snapshots and diagnostics.
    pub stride: usize,
    /// Width of the boundary shell monitored for leakage.
    pub margin: f64,
}

impl WaveRunConfig {
    pub fn new(grid: GridSpec, spec: NonlinearitySpec, dt: f64, t_final: f64, data: WaveData) -> Self {
        Self { grid, spec, dt, t_final, data, stride: 1, margin: grid.l / 8.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bound = cfl_bound(&self.grid);
        if !(self.dt > 0.0) || self.dt > bound * (1.0 + CFL_SLACK) {
            return Err(Error::Cfl { dt: self.dt, bound });
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

/// Velocity-Verlet stepper; caches the acceleration `Δu - f(u)` of the
/// current state.
pub struct Verlet {
    spectral: Spectral,
    spec: NonlinearitySpec,
    dt: f64,
    state: WaveState,
    accel: Vec<f64>,
}

impl Verlet {
    pub fn new(state: WaveState, spec: NonlinearitySpec, dt: f64) -> Result<Self> {
        let spectral = Spectral::new(state.grid)?;
        Self::with_spectral(state, spec, dt, spectral)
    }

    pub fn with_spectral(state: WaveState, spec: NonlinearitySpec, dt: f64, spectral: Spectral) -> Result<Self> {
        state.check_finite()?;
        let accel = acceleration(&spectral, &spec, &state.u)?;
        Ok(Self { spectral, spec, dt, state, accel })
    }

    pub fn state(&self) -> &WaveState {
        &self.state
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Replaces the velocity, e.g. to integrate backwards in time.
    pub fn negate_velocity(&mut self) {
        for v in self.state.ut.iter_mut() {
            *v = -*v;
        }
    }

    /// One step: half kick, drift, half kick.
    pub fn step(&mut self) -> Result<()> {
        let half = 0.5 * self.dt;
        let s = &mut self.state;
        for ((u, v), a) in s.u.iter_mut().zip(s.ut.iter_mut()).zip(&self.accel) {
            *v += half * a;
            *u += self.dt * *v;
        }
        self.accel = acceleration(&self.spectral, &self.spec, &self.state.u)?;
        let s = &mut self.state;
        for (v, a) in s.ut.iter_mut().zip(&self.accel) {
            *v += half * a;
        }
        let last_valid_t = s.t;
        s.t += self.dt;
        if !s.is_finite() || self.accel.iter().any(|a| !a.is_finite()) {
            return Err(Error::BlowUp { last_valid_t });
        }
        Ok(())
    }

    pub fn energy(&self) -> Result<EnergyReport> {
        wave_energy(&self.state, &self.spec, &self.spectral)
    }

    /// Energy conserved exactly by the scheme on linear problems:
    /// `½⟨u_t^{n-½}, u_t^{n+½}⟩ + ½‖∇u‖² + ∫F(u)`.
    pub fn discrete_energy(&self, report: &EnergyReport) -> Result<f64> {
        let a2 = l2_norm_sq(&self.accel, &self.state.grid)?;
        Ok(report.total - self.dt * self.dt / 8.0 * a2)
    }
}

fn acceleration(spectral: &Spectral, spec: &NonlinearitySpec, u: &[f64]) -> Result<Vec<f64>> {
    let mut lap = spectral.laplacian(u)?;
    for (l, &x) in lap.iter_mut().zip(u) {
        *l -= spec.force(x);
    }
    Ok(lap)
}

/// One diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveDiagnostics {
    pub t: f64,
    pub energy: EnergyReport,
    pub discrete_energy: f64,
    pub leakage: f64,
    pub sup_norm: f64,
}

pub const WAVE_TRACE_HEADER: &str = "t,E_total,E_kinetic,E_gradient,E_potential,leakage,sup_norm,E_discrete";

impl WaveDiagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.t,
            self.energy.total,
            self.energy.kinetic,
            self.energy.gradient,
            self.energy.potential,
            self.leakage,
            self.sup_norm,
            self.discrete_energy
        )
    }
}

#[derive(Debug, Clone)]
pub struct WaveRun {
    pub grid: GridSpec,
    pub dt: f64,
    pub snapshots: Vec<WaveState>,
    pub trace: Vec<WaveDiagnostics>,
    pub leakage_flag: bool,
}

impl WaveRun {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &WaveState {
        self.snapshots.last().expect("a run records at least the initial snapshot")
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(WAVE_TRACE_HEADER);
        out.push('\n');
        for row in &self.trace {
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }

    /// `max_t |E(t) - E(0)| / |E(0)|` for the synchronous energy.
    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.trace.iter().map(|r| r.energy.total))
    }

    /// Same as [`WaveRun::energy_drift`] for the scheme's discrete energy.
    pub fn discrete_energy_drift(&self) -> f64 {
        relative_drift(self.trace.iter().map(|r| r.discrete_energy))
    }

    /// `max_t (E(t) - E(0)) / |E(0)|`: positive values break the energy
    /// inequality.
    pub fn max_energy_excess(&self) -> f64 {
        let e: Vec<f64> = self.trace.iter().map(|r| r.discrete_energy).collect();
        let e0 = e[0];
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        e.iter().map(|x| (x - e0) / scale).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let e0 = v[0];
    let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
    v.iter().map(|x| (x - e0).abs() / scale).fold(0.0, f64::max)
}

/// Evolves the configured data to `T`, recording snapshots and diagnostics
/// every `stride` steps (and at the final step).
pub fn run(cfg: &WaveRunConfig) -> Result<WaveRun> {
    cfg.validate()?;
    let state = cfg.data.initial_state(cfg.grid)?;
    run_from(cfg, state)
}

pub fn run_from(cfg: &WaveRunConfig, state: WaveState) -> Result<WaveRun> {
    cfg.validate()?;
    let mut stepper = Verlet::new(state, cfg.spec.clone(), cfg.dt)?;
    let steps = cfg.steps();
    let mut snapshots = Vec::with_capacity(steps / cfg.stride + 2);
    let mut trace = Vec::with_capacity(steps / cfg.stride + 2);
    let mut record = |st: &Verlet| -> Result<()> {
        let energy = st.energy()?;
        let discrete_energy = st.discrete_energy(&energy)?;
        let leakage = wave_leakage(st.state(), cfg.margin)?;
        trace.push(WaveDiagnostics {
            t: st.state().t,
            energy,
            discrete_energy,
            leakage,
            sup_norm: sup_norm(&st.state().u),
        });
        snapshots.push(st.state().clone());
        Ok(())
    };
    record(&stepper)?;
    for n in 1..=steps {
        stepper.step()?;
        if n % cfg.stride == 0 || n == steps {
            record(&stepper)?;
        }
    }
    let leakage_flag = trace.iter().any(|r| r.leakage > LEAKAGE_LIMIT);
    Ok(WaveRun { grid: cfg.grid, dt: cfg.dt, snapshots, trace, leakage_flag })
}

/// Both sides of the virial identity
/// `∫₀ᵀ∫(|∇v|² - |v_t|² + v f(v)) = ∫(v_t(0) v(0) - v_t(T) v(T))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates the virial identity on a recorded trajectory: trapezoid in time,
/// spectral in space.
pub fn verify_prop_weak_identity(snapshots: &[WaveState], spec: &NonlinearitySpec) -> Result<WeakIdentity> {
    let first = snapshots.first().ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
    let last = snapshots.last().unwrap();
    let grid = first.grid;
    let spectral = Spectral::new(grid)?;
    let mut times = Vec::with_capacity(snapshots.len());
    let mut integrand = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        if s.grid != grid {
            return Err(Error::Mismatch("snapshots on different grids".into()));
        }
        let grad = spectral.gradient_norm_sq(&s.u)?;
        let vel = l2_norm_sq(&s.ut, &grid)?;
        let pot = integrate_by(&grid, |i| s.u[i] * spec.force(s.u[i]));
        times.push(s.t);
        integrand.push(grad - vel + pot);
    }
    let lhs = *cumulative_trapezoid(&times, &integrand).last().unwrap();
    let rhs = inner(&first.ut, &first.u, &grid)? - inner(&last.ut, &last.u, &grid)?;
    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1e-300);
    Ok(WeakIdentity { lhs, rhs, residual })
}
