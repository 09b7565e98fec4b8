//! Weak-strong comparison of trajectory pairs.
//!
//! A "strong" reference `u` is compared against a "weak-like" trajectory
//! `v` produced by one of three proxies: a Lipschitz truncation ladder, a
//! coarser grid, or perturbed data. For `w = v - u` we record the
//! discrepancy `G(t)`, the drift integral
//! `I(t) = ∫₀ᵗ∫(f(u) + f'(u)w - f(u+w)) u_t` and the remainder
//! `J(t) = ∫(½|Dw|² + F(u+w) - F(u) - f(u)w)`, then fit the Gronwall
//! envelope `G(t) <= G(0) e^{Ct}`.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    inner, integrate_by, l2_norm_sq, l2_norm_sq_complex, prolong_complex, prolong_real, wave_energy, GridSpec,
    NlsState, Spectral, WaveState,
};
use crate::nls::{self, NlsRun, NlsRunConfig};
use crate::nonlinearity::{find_truncation_abscissae, two_star, AssumptionClass, NlsNonlinearitySpec, NonlinearitySpec};
use crate::sampling::{cumulative_trapezoid, pairwise_sum_by, stream};
use crate::wave::{self, WaveRun, WaveRunConfig};

/// Floor added to `G(0)` in the envelope fit.
pub const G_FLOOR: f64 = 1e-14;
/// Relative slack of the ladder monotonicity checks.
pub const MONOTONE_SLACK: f64 = 0.10;
/// Energy inequality tolerance `E(t) <= E(0) + tol·|E(0)|`.
pub const ENERGY_TOL: f64 = 1e-6;
/// Absolute slack per unit volume for the shifted NLS remainder.
pub const REMAINDER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallTrace {
    pub times: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    pub w_l2: Vec<f64>,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    /// Smallest `C` with `G(t) <= fitted_G0·e^{Ct}` on the trace.
    pub fitted_c: f64,
    #[serde(rename = "fitted_G0")]
    pub fitted_g0: f64,
    /// Least-squares slope of `log(G + floor)` against `t`.
    pub lsq_slope: f64,
    /// Smallest `C` with `G(t) <= G(0) + C∫₀ᵗ(G + ‖w‖²)`.
    pub integral_c: f64,
    /// NLS only: the shifted remainder `∫((A+1)|w|² + F(|u+w|²/2) - F(|u|²/2) - f(u)·w)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder: Option<Vec<f64>>,
}

impl GronwallTrace {
    fn from_series(times: Vec<f64>, g: Vec<f64>, w_l2: Vec<f64>, i: Vec<f64>, j: Vec<f64>) -> Self {
        let fit = fit_gronwall(&times, &g, &w_l2);
        Self {
            times,
            g,
            w_l2,
            i,
            j,
            fitted_c: fit.c,
            fitted_g0: fit.g0,
            lsq_slope: fit.lsq_slope,
            integral_c: fit.integral_c,
            remainder: None,
        }
    }

    /// `fitted_G0·e^{fitted_C·t}` at the recorded times.
    pub fn bound(&self) -> Vec<f64> {
        self.times.iter().map(|t| self.fitted_g0 * (self.fitted_c * t).exp()).collect()
    }

    pub fn g0(&self) -> f64 {
        self.g[0]
    }

    /// `max_t G(t) / (G(0) + floor)`.
    pub fn sup_ratio(&self) -> f64 {
        self.g.iter().fold(0.0_f64, |m, &x| m.max(x)) / self.fitted_g0
    }

    /// Whether the fitted envelope covers every recorded value.
    pub fn envelope_holds(&self) -> bool {
        self.g.iter().zip(self.bound()).all(|(g, b)| *g <= b * (1.0 + 1e-12))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("t,G,w_l2,I,J,bound");
        if self.remainder.is_some() {
            out.push_str(",remainder");
        }
        out.push('\n');
        let bound = self.bound();
        for n in 0..self.times.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[n], self.g[n], self.w_l2[n], self.i[n], self.j[n], bound[n]
            ));
            if let Some(r) = &self.remainder {
                out.push_str(&format!(",{:e}", r[n]));
            }
            out.push('\n');
        }
        out
    }
}

struct GronwallFit {
    c: f64,
    g0: f64,
    lsq_slope: f64,
    integral_c: f64,
}

fn fit_gronwall(times: &[f64], g: &[f64], w_l2: &[f64]) -> GronwallFit {
    let g0 = g[0] + G_FLOOR;
    let t0 = times[0];
    let mut c = 0.0_f64;
    for (t, x) in times.iter().zip(g) {
        let dt = t - t0;
        if dt > 0.0 && *x > g0 {
            c = c.max((x / g0).ln() / dt);
        }
    }
    // least squares for log(G + floor)
    let n = times.len() as f64;
    let ys: Vec<f64> = g.iter().map(|x| (x + G_FLOOR).ln()).collect();
    let mt = times.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = times.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let lsq_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let total: Vec<f64> = g.iter().zip(w_l2).map(|(a, b)| a + b).collect();
    let cum = cumulative_trapezoid(times, &total);
    let mut integral_c = 0.0_f64;
    for (x, s) in g.iter().zip(&cum) {
        if *s > 0.0 && *x > g[0] {
            integral_c = integral_c.max((x - g[0]) / s);
        }
    }
    GronwallFit { c, g0, lsq_slope, integral_c }
}

fn check_wave_pair(u: &WaveRun, v: &WaveRun) -> Result<()> {
    if u.grid != v.grid {
        return Err(Error::Mismatch("trajectories live on different grids".into()));
    }
    if u.snapshots.len() != v.snapshots.len() {
        return Err(Error::Mismatch(format!(
            "trajectories have {} and {} snapshots",
            u.snapshots.len(),
            v.snapshots.len()
        )));
    }
    for (a, b) in u.snapshots.iter().zip(&v.snapshots) {
        if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
            return Err(Error::Mismatch(format!("snapshot times differ: {} vs {}", a.t, b.t)));
        }
    }
    if (u.dt - v.dt).abs() > 1e-15 * u.dt {
        return Err(Error::Mismatch(format!("time steps differ: {} vs {}", u.dt, v.dt)));
    }
    Ok(())
}

/// `E(v) = E(u) + I(t) + J(t) + K(0)` along a trajectory pair, where
/// `K = ∫(Du·Dw + f(u)w)` and `K(t) - K(0) = I(t)` for exact solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub times: Vec<f64>,
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    pub k0: f64,
    pub residuals: Vec<f64>,
    /// `max_t |E(v) - E(u) - I - J - K(0)| / scale`.
    pub residual: f64,
    /// `|E(u,0)| + |E(v,0)|` (1 if both vanish).
    pub scale: f64,
}

/// Energy expansion of a wave trajectory pair.
///
/// Energies are the integrator's discrete energy
/// `E - dt²/8 ‖Δu - f(u)‖²`, with the `dt²` term split between `J` and `K`
/// in the same way as the continuous terms. For linear problems the
/// expansion then closes to rounding error; otherwise the residual is the
/// `O(dt²)` defect of `K(t) - K(0) = I(t)`. `I` is integrated by the
/// trapezoid rule on the snapshot times.
pub fn energy_expansion(u: &WaveRun, v: &WaveRun, spec: &NonlinearitySpec) -> Result<Expansion> {
    check_wave_pair(u, v)?;
    let grid = u.grid;
    let spectral = Spectral::new(grid)?;
    let dt2 = u.dt * u.dt;
    let n = u.snapshots.len();
    let mut times = Vec::with_capacity(n);
    let mut i_rate = Vec::with_capacity(n);
    let mut j = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut de = Vec::with_capacity(n);
    let mut e0 = (0.0, 0.0);
    for (idx, (su, sv)) in u.snapshots.iter().zip(&v.snapshots).enumerate() {
        let w: Vec<f64> = sv.u.iter().zip(&su.u).map(|(a, b)| a - b).collect();
        let wt: Vec<f64> = sv.ut.iter().zip(&su.ut).map(|(a, b)| a - b).collect();
        let eu = wave_energy(su, spec, &spectral)?;
        let ev = wave_energy(sv, spec, &spectral)?;
        let au = accel(&spectral, spec, &su.u)?;
        let av = accel(&spectral, spec, &sv.u)?;
        let da: Vec<f64> = av.iter().zip(&au).map(|(a, b)| a - b).collect();
        let edu = eu.total - dt2 / 8.0 * l2_norm_sq(&au, &grid)?;
        let edv = ev.total - dt2 / 8.0 * l2_norm_sq(&av, &grid)?;
        if idx == 0 {
            e0 = (eu.total, ev.total);
        }
        i_rate.push(integrate_by(&grid, |p| {
            let (a, b) = (su.u[p], sv.u[p]);
            (spec.force(a) + spec.force_prime(a) * (b - a) - spec.force(b)) * su.ut[p]
        }));
        let jc = 0.5 * (l2_norm_sq(&wt, &grid)? + spectral.gradient_norm_sq(&w)?)
            + integrate_by(&grid, |p| {
                let (a, b) = (su.u[p], sv.u[p]);
                spec.potential(b) - spec.potential(a) - spec.force(a) * (b - a)
            });
        let kc = inner(&su.ut, &wt, &grid)?
            + spectral.gradient_inner(&su.u, &w)?
            + integrate_by(&grid, |p| spec.force(su.u[p]) * w[p]);
        j.push(jc);
        k.push(kc - dt2 / 4.0 * inner(&au, &da, &grid)?);
        de.push((edv - edu) + dt2 / 8.0 * l2_norm_sq(&da, &grid)?);
        times.push(su.t);
    }
    let i = cumulative_trapezoid(&times, &i_rate);
    let k0 = k[0];
    let scale = {
        let s = e0.0.abs() + e0.1.abs();
        if s > 0.0 { s } else { 1.0 }
    };
    // de = E_d(v) - E_d(u) + dt²/8‖Δa‖², so that de - J = K_d(t)
    let residuals: Vec<f64> = (0..n).map(|t| (de[t] - i[t] - j[t] - k0).abs() / scale).collect();
    let residual = residuals.iter().fold(0.0_f64, |m, &x| m.max(x));
    Ok(Expansion { times, i, j, k0, residuals, residual, scale })
}

fn accel(spectral: &Spectral, spec: &NonlinearitySpec, u: &[f64]) -> Result<Vec<f64>> {
    let mut lap = spectral.laplacian(u)?;
    for (l, &x) in lap.iter_mut().zip(u) {
        *l -= spec.force(x);
    }
    Ok(lap)
}

/// `G(t) = ‖Dw(t)‖²` along a wave trajectory pair, with `I`, `J` from
/// [`energy_expansion`] and the fitted envelope.
pub fn gronwall_trace_wave(u: &WaveRun, v: &WaveRun, spec: &NonlinearitySpec) -> Result<GronwallTrace> {
    let ex = energy_expansion(u, v, spec)?;
    let grid = u.grid;
    let spectral = Spectral::new(grid)?;
    let mut g = Vec::with_capacity(ex.times.len());
    let mut w_l2 = Vec::with_capacity(ex.times.len());
    for (su, sv) in u.snapshots.iter().zip(&v.snapshots) {
        let w: Vec<f64> = sv.u.iter().zip(&su.u).map(|(a, b)| a - b).collect();
        let wt: Vec<f64> = sv.ut.iter().zip(&su.ut).map(|(a, b)| a - b).collect();
        g.push(l2_norm_sq(&wt, &grid)? + spectral.gradient_norm_sq(&w)?);
        w_l2.push(l2_norm_sq(&w, &grid)?);
    }
    Ok(GronwallTrace::from_series(ex.times, g, w_l2, ex.i, ex.j))
}

fn check_nls_pair(u: &NlsRun, v: &NlsRun) -> Result<()> {
    if u.grid != v.grid {
        return Err(Error::Mismatch("trajectories live on different grids".into()));
    }
    if u.snapshots.len() != v.snapshots.len() {
        return Err(Error::Mismatch(format!(
            "trajectories have {} and {} snapshots",
            u.snapshots.len(),
            v.snapshots.len()
        )));
    }
    for (a, b) in u.snapshots.iter().zip(&v.snapshots) {
        if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
            return Err(Error::Mismatch(format!("snapshot times differ: {} vs {}", a.t, b.t)));
        }
    }
    Ok(())
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    (a * b.conj()).re
}

/// `G(t) = ‖∇w‖² + (A+1)‖w‖²` along an NLS trajectory pair.
///
/// `I(t) = ∫₀ᵗ∫(f(u) - f(u+w))·(iw)`, which equals `½(‖w(t)‖² - ‖w(0)‖²)`
/// for exact solutions; `J` and `remainder` hold the shifted remainder,
/// which the shift `A` makes nonnegative.
pub fn gronwall_trace_nls(u: &NlsRun, v: &NlsRun, spec: &NlsNonlinearitySpec, a: f64) -> Result<GronwallTrace> {
    check_nls_pair(u, v)?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::Invalid(format!("shift A must be finite and nonnegative, got {a}")));
    }
    let grid = u.grid;
    let spectral = Spectral::new(grid)?;
    let i_unit = Complex64::new(0.0, 1.0);
    let floor = -REMAINDER_SLACK * grid.len() as f64 * grid.cell_volume();
    let n = u.snapshots.len();
    let (mut times, mut g, mut w_l2, mut rate, mut rem) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (su, sv) in u.snapshots.iter().zip(&v.snapshots) {
        let w: Vec<Complex64> = sv.u.iter().zip(&su.u).map(|(a, b)| a - b).collect();
        let m = l2_norm_sq_complex(&w, &grid)?;
        g.push(spectral.gradient_norm_sq_complex(&w)? + (a + 1.0) * m);
        w_l2.push(m);
        rate.push(integrate_by(&grid, |p| dot(spec.force(su.u[p]) - spec.force(sv.u[p]), i_unit * w[p])));
        let r = integrate_by(&grid, |p| {
            (a + 1.0) * w[p].norm_sqr() + spec.potential(sv.u[p]) - spec.potential(su.u[p]) - dot(spec.force(su.u[p]), w[p])
        });
        if r < floor {
            return Err(Error::Invalid(format!(
                "shifted remainder {r:e} is negative at t = {}: the shift A = {a} is invalid, re-estimate it",
                su.t
            )));
        }
        rem.push(r);
        times.push(su.t);
    }
    let i = cumulative_trapezoid(&times, &rate);
    let mut trace = GronwallTrace::from_series(times, g, w_l2, i, rem.clone());
    trace.remainder = Some(rem);
    Ok(trace)
}

/// Which proxy generates the weak-like trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ApproxMode {
    /// Truncation heights `k`.
    TruncationLadder(Vec<f64>),
    /// Coarse resolutions `N`, each at most the base resolution.
    CoarseGrid(Vec<usize>),
    /// Perturbation sizes `ε` added to the base data.
    PerturbedData(Vec<f64>),
}

impl ApproxMode {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ApproxMode::TruncationLadder(v) | ApproxMode::PerturbedData(v) => v.clone(),
            ApproxMode::CoarseGrid(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ApproxMode::TruncationLadder(_) => "truncation_ladder",
            ApproxMode::CoarseGrid(_) => "coarse_grid",
            ApproxMode::PerturbedData(_) => "perturbed_data",
        }
    }
}

#[derive(Debug, Clone)]
pub enum BaseRun {
    Wave(WaveRunConfig),
    Nls(NlsRunConfig),
}

#[derive(Debug, Clone)]
pub struct WeakApproxConfig {
    pub mode: ApproxMode,
    pub base: BaseRun,
    /// Constant of the abscissa condition `r f(r) >= -C r²`; defaults to the
    /// spec's lower-bound constant.
    pub truncation_c: Option<f64>,
    /// Convexity shift for NLS traces.
    pub shift: f64,
    /// Maximum number of members simulated at once (0: all).
    pub jobs: usize,
    /// Runs the integrability probe on every wave member.
    pub integrability: Option<IntegrabilitySettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilitySettings {
    pub half_width: f64,
    pub trials: usize,
    pub seed: u64,
    pub q_max: f64,
}

impl WeakApproxConfig {
    pub fn new(mode: ApproxMode, base: BaseRun) -> Self {
        Self { mode, base, truncation_c: None, shift: 0.0, jobs: 0, integrability: None }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = self.mode.values();
        if vals.is_empty() {
            return Err(Error::Invalid("ladder is empty".into()));
        }
        if vals.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Invalid(format!("ladder values must be strictly increasing, got {vals:?}")));
        }
        if vals.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Invalid(format!("ladder values must be positive, got {vals:?}")));
        }
        match (&self.mode, &self.base) {
            (ApproxMode::TruncationLadder(_), BaseRun::Nls(_)) => {
                return Err(Error::Invalid("the truncation ladder is defined for wave nonlinearities only".into()))
            }
            (ApproxMode::CoarseGrid(ns), base) => {
                let g = base_grid(base);
                for &n in ns {
                    GridSpec::new(g.d, n, g.l)?;
                    if n > g.n {
                        return Err(Error::Invalid(format!("coarse N = {n} exceeds the reference N = {}", g.n)));
                    }
                }
            }
            _ => {}
        }
        match &self.base {
            BaseRun::Wave(c) => c.validate(),
            BaseRun::Nls(c) => c.validate(),
        }
    }
}

fn base_grid(base: &BaseRun) -> GridSpec {
    match base {
        BaseRun::Wave(c) => c.grid,
        BaseRun::Nls(c) => c.grid,
    }
}

/// Per-member comparison with the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub value: f64,
    /// `sup_t ‖v - u‖_{L²}`.
    pub l2_discrepancy: f64,
    /// `∫₀ᵀ∫|f_member(v) - f(u)|`.
    pub l1_force_discrepancy: f64,
    /// `max_t (E(t) - E(0)) / |E(0)|` of the member run.
    pub energy_excess: f64,
    pub energy_ok: bool,
    pub leakage_flag: bool,
    #[serde(rename = "G0")]
    pub g0: f64,
    pub sup_ratio: f64,
    pub fitted_c: f64,
    pub expansion_residual: Option<f64>,
    /// Truncation abscissae `(r_minus, r_plus)` for ladder members.
    pub abscissae: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrability: Option<IntegrabilityFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: String,
    pub nonlinearity: String,
    /// What the members are compared against.
    pub reference: String,
    pub members: Vec<MemberReport>,
    pub l2_monotone: bool,
    pub l1_monotone: bool,
    pub energy_monotone: bool,
    pub energy_inequality_holds: bool,
    /// Non-fatal findings kept for analysis.
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LadderOutcome {
    pub report: ConvergenceReport,
    pub traces: Vec<GronwallTrace>,
}

/// `xs` nonincreasing up to the relative slack (and rounding at the scale of
/// the largest entry).
pub fn nonincreasing_with_slack(xs: &[f64], slack: f64) -> bool {
    let top = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    xs.windows(2).all(|p| p[1] <= p[0] * (1.0 + slack) + 1e-12 * top)
}

/// Orders ladder members for the monotonicity checks: refinement order
/// (`k` or `N` increasing, `ε` decreasing).
fn refinement_order(mode: &ApproxMode, n: usize) -> Vec<usize> {
    match mode {
        ApproxMode::PerturbedData(_) => (0..n).rev().collect(),
        _ => (0..n).collect(),
    }
}

/// Runs every ladder member concurrently against a reference and reduces
/// the comparisons in ladder order.
pub fn run_ladder(cfg: &WeakApproxConfig) -> Result<LadderOutcome> {
    cfg.validate()?;
    match &cfg.base {
        BaseRun::Wave(base) => run_wave_ladder(cfg, base),
        BaseRun::Nls(base) => run_nls_ladder(cfg, base),
    }
}

/// The Appendix construction: a truncation ladder of at least three levels.
pub fn appendix_construction(cfg: &WeakApproxConfig) -> Result<LadderOutcome> {
    match &cfg.mode {
        ApproxMode::TruncationLadder(ks) if ks.len() >= 3 => run_ladder(cfg),
        ApproxMode::TruncationLadder(ks) => {
            Err(Error::Invalid(format!("the construction needs at least 3 truncation levels, got {}", ks.len())))
        }
        _ => Err(Error::Invalid("the construction runs on a truncation ladder".into())),
    }
}

/// Evaluates `f(0..n)` on scoped threads, at most `jobs` at a time, and
/// returns the results in index order.
fn run_members<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Vec<Result<T>> {
    let width = if jobs == 0 { n.max(1) } else { jobs };
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(width) {
        let end = (start + width).min(n);
        std::thread::scope(|s| {
            let f = &f;
            let handles: Vec<_> = (start..end).map(|i| s.spawn(move || f(i))).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("ladder member panicked")));
        });
    }
    out
}

fn run_wave_ladder(cfg: &WeakApproxConfig, base: &WaveRunConfig) -> Result<LadderOutcome> {
    let spec = &base.spec;
    let c = cfg.truncation_c.unwrap_or_else(|| spec.h21_constant());
    let mut flagged = Vec::new();
    // member configs
    let mut member_cfgs = Vec::new();
    let mut abscissae = Vec::new();
    match &cfg.mode {
        ApproxMode::TruncationLadder(ks) => {
            for &k in ks {
                let level = find_truncation_abscissae(spec, k, c)?;
                abscissae.push(Some((level.r_minus, level.r_plus)));
                let mut m = base.clone();
                m.spec = spec.truncate(level)?;
                member_cfgs.push(m);
            }
        }
        ApproxMode::CoarseGrid(ns) => {
            for &n in ns {
                let mut m = base.clone();
                m.grid = GridSpec::new(base.grid.d, n, base.grid.l)?;
                member_cfgs.push(m);
                abscissae.push(None);
            }
        }
        ApproxMode::PerturbedData(eps) => {
            for &e in eps {
                let mut m = base.clone();
                m.data = base.data.with_perturbation(e);
                member_cfgs.push(m);
                abscissae.push(None);
            }
        }
    }
    let mut results = run_members(member_cfgs.len() + 1, cfg.jobs, |i| {
        if i == 0 { wave::run(base) } else { wave::run(&member_cfgs[i - 1]) }
    });
    let members: Vec<Result<WaveRun>> = results.split_off(1);
    let reference_run = results.pop().expect("reference slot");
    // the untruncated flow is the reference when it exists; otherwise the
    // finest truncation level stands in
    let (reference, reference_label, ref_spec) = match (reference_run, &cfg.mode) {
        (Ok(r), _) => (r, format!("{} (untruncated)", spec.name()), spec.clone()),
        (Err(e), ApproxMode::TruncationLadder(ks)) => {
            flagged.push(format!("untruncated reference failed ({e}); using k = {} instead", ks[ks.len() - 1]));
            let last = members.last().expect("nonempty ladder").clone()?;
            (last, format!("finest truncation k = {}", ks[ks.len() - 1]), member_cfgs.last().unwrap().spec.clone())
        }
        (Err(e), _) => return Err(e),
    };
    let ref_spectral = Spectral::new(reference.grid)?;
    let values = cfg.mode.values();
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for (idx, (run, mcfg)) in members.into_iter().zip(&member_cfgs).enumerate() {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                flagged.push(format!("member {idx} (value {}) failed: {e}", values[idx]));
                continue;
            }
        };
        let lifted = if run.grid != reference.grid { lift_wave(&run, &ref_spectral)? } else { run.clone() };
        let trace = gronwall_trace_wave(&reference, &lifted, &ref_spec)?;
        let expansion_residual = if run.grid == reference.grid && matches!(cfg.mode, ApproxMode::PerturbedData(_)) {
            Some(energy_expansion(&reference, &lifted, &ref_spec)?.residual)
        } else {
            None
        };
        let (l2, l1) = wave_discrepancies(&reference, &lifted, &ref_spec, &mcfg.spec, &run)?;
        let excess = run.max_energy_excess();
        let integrability = match &cfg.integrability {
            Some(s) => Some(uniform_integrability_probe(&run, &mcfg.spec, s.half_width, s.trials, s.seed, s.q_max)?),
            None => None,
        };
        if run.leakage_flag {
            flagged.push(format!("member {idx} (value {}) leaked through the boundary layer", values[idx]));
        }
        reports.push(MemberReport {
            index: idx,
            value: values[idx],
            l2_discrepancy: l2,
            l1_force_discrepancy: l1,
            energy_excess: excess,
            energy_ok: excess <= ENERGY_TOL,
            leakage_flag: run.leakage_flag,
            g0: trace.g0(),
            sup_ratio: trace.sup_ratio(),
            fitted_c: trace.fitted_c,
            expansion_residual,
            abscissae: abscissae[idx],
            integrability,
        });
        traces.push(trace);
    }
    Ok(LadderOutcome {
        report: summarize(cfg, spec.name(), reference_label, reports, flagged),
        traces,
    })
}

fn lift_wave(run: &WaveRun, fine: &Spectral) -> Result<WaveRun> {
    let coarse = Spectral::new(run.grid)?;
    let grid = *fine.grid();
    let snapshots = run
        .snapshots
        .iter()
        .map(|s| WaveState::new(grid, prolong_real(&s.u, &coarse, fine)?, prolong_real(&s.ut, &coarse, fine)?, s.t))
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveRun { grid, dt: run.dt, snapshots, trace: run.trace.clone(), leakage_flag: run.leakage_flag })
}

fn wave_discrepancies(
    reference: &WaveRun,
    member: &WaveRun,
    ref_spec: &NonlinearitySpec,
    member_spec: &NonlinearitySpec,
    raw: &WaveRun,
) -> Result<(f64, f64)> {
    let grid = reference.grid;
    let mut l2 = 0.0_f64;
    let mut rate = Vec::new();
    let mut times = Vec::new();
    for (n, (su, sv)) in reference.snapshots.iter().zip(&member.snapshots).enumerate() {
        let w: Vec<f64> = sv.u.iter().zip(&su.u).map(|(a, b)| a - b).collect();
        l2 = l2.max(l2_norm_sq(&w, &grid)?.sqrt());
        // forces are compared on each trajectory's own grid values
        let r = if raw.grid == grid {
            integrate_by(&grid, |p| (member_spec.force(sv.u[p]) - ref_spec.force(su.u[p])).abs())
        } else {
            let lifted_force = lift_force(&raw.snapshots[n], member_spec, &grid)?;
            integrate_by(&grid, |p| (lifted_force[p] - ref_spec.force(su.u[p])).abs())
        };
        rate.push(r);
        times.push(su.t);
    }
    let l1 = *cumulative_trapezoid(&times, &rate).last().unwrap_or(&0.0);
    Ok((l2, l1))
}

fn lift_force(state: &WaveState, spec: &NonlinearitySpec, fine: &GridSpec) -> Result<Vec<f64>> {
    let f: Vec<f64> = state.u.iter().map(|&x| spec.force(x)).collect();
    prolong_real(&f, &Spectral::new(state.grid)?, &Spectral::new(*fine)?)
}

fn run_nls_ladder(cfg: &WeakApproxConfig, base: &NlsRunConfig) -> Result<LadderOutcome> {
    let spec = &base.spec;
    let mut flagged = Vec::new();
    let mut member_cfgs = Vec::new();
    match &cfg.mode {
        ApproxMode::CoarseGrid(ns) => {
            for &n in ns {
                let mut m = base.clone();
                m.grid = GridSpec::new(base.grid.d, n, base.grid.l)?;
                member_cfgs.push(m);
            }
        }
        ApproxMode::PerturbedData(eps) => {
            for &e in eps {
                let mut m = base.clone();
                m.data = base.data.with_perturbation(e);
                member_cfgs.push(m);
            }
        }
        ApproxMode::TruncationLadder(_) => unreachable!("rejected by validate"),
    }
    let mut results = run_members(member_cfgs.len() + 1, cfg.jobs, |i| {
        if i == 0 { nls::run(base) } else { nls::run(&member_cfgs[i - 1]) }
    });
    let members = results.split_off(1);
    let reference = results.pop().expect("reference slot")?;
    let ref_spectral = Spectral::new(reference.grid)?;
    let values = cfg.mode.values();
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for (idx, run) in members.into_iter().enumerate() {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                flagged.push(format!("member {idx} (value {}) failed: {e}", values[idx]));
                continue;
            }
        };
        let lifted = if run.grid != reference.grid { lift_nls(&run, &ref_spectral)? } else { run.clone() };
        let trace = gronwall_trace_nls(&reference, &lifted, spec, cfg.shift)?;
        let grid = reference.grid;
        let mut l2 = 0.0_f64;
        let mut rate = Vec::new();
        let mut times = Vec::new();
        for (su, sv) in reference.snapshots.iter().zip(&lifted.snapshots) {
            l2 = l2.max(l2_norm_sq_complex(&sub(&sv.u, &su.u), &grid)?.sqrt());
            rate.push(integrate_by(&grid, |p| (spec.force(sv.u[p]) - spec.force(su.u[p])).norm()));
            times.push(su.t);
        }
        let l1 = *cumulative_trapezoid(&times, &rate).last().unwrap_or(&0.0);
        let h: Vec<f64> = run.trace.iter().map(|r| r.energy.total).collect();
        let scale = if h[0] == 0.0 { 1.0 } else { h[0].abs() };
        let excess = h.iter().map(|x| (x - h[0]) / scale).fold(f64::NEG_INFINITY, f64::max);
        if run.leakage_flag {
            flagged.push(format!("member {idx} (value {}) leaked through the boundary layer", values[idx]));
        }
        reports.push(MemberReport {
            index: idx,
            value: values[idx],
            l2_discrepancy: l2,
            l1_force_discrepancy: l1,
            energy_excess: excess,
            energy_ok: excess <= ENERGY_TOL,
            leakage_flag: run.leakage_flag,
            g0: trace.g0(),
            sup_ratio: trace.sup_ratio(),
            fitted_c: trace.fitted_c,
            expansion_residual: None,
            abscissae: None,
            integrability: None,
        });
        traces.push(trace);
    }
    Ok(LadderOutcome {
        report: summarize(cfg, spec.name(), format!("{} (base data, base grid)", spec.name()), reports, flagged),
        traces,
    })
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn lift_nls(run: &NlsRun, fine: &Spectral) -> Result<NlsRun> {
    let coarse = Spectral::new(run.grid)?;
    let grid = *fine.grid();
    let snapshots = run
        .snapshots
        .iter()
        .map(|s| NlsState::new(grid, prolong_complex(&s.u, &coarse, fine)?, s.t))
        .collect::<Result<Vec<_>>>()?;
    Ok(NlsRun { grid, dt: run.dt, snapshots, trace: run.trace.clone(), leakage_flag: run.leakage_flag })
}

fn summarize(
    cfg: &WeakApproxConfig,
    name: &str,
    reference: String,
    members: Vec<MemberReport>,
    mut flagged: Vec<String>,
) -> ConvergenceReport {
    let order = refinement_order(&cfg.mode, members.len());
    let pick = |f: &dyn Fn(&MemberReport) -> f64| -> Vec<f64> { order.iter().map(|&i| f(&members[i])).collect() };
    let l2_monotone = nonincreasing_with_slack(&pick(&|m| m.l2_discrepancy), MONOTONE_SLACK);
    let l1_monotone = nonincreasing_with_slack(&pick(&|m| m.l1_force_discrepancy), MONOTONE_SLACK);
    let energy_monotone = nonincreasing_with_slack(&pick(&|m| m.energy_excess.max(0.0)), MONOTONE_SLACK);
    let energy_inequality_holds = members.iter().all(|m| m.energy_ok);
    for (ok, what) in [
        (l2_monotone, "L2 discrepancy"),
        (l1_monotone, "L1 force discrepancy"),
        (energy_monotone, "energy excess"),
    ] {
        if !ok {
            flagged.push(format!("{what} is not monotone along the ladder"));
        }
    }
    if !energy_inequality_holds {
        flagged.push(format!("energy inequality exceeded the {ENERGY_TOL:e} tolerance"));
    }
    ConvergenceReport {
        mode: cfg.mode.label().to_string(),
        nonlinearity: name.to_string(),
        reference,
        members,
        l2_monotone,
        l1_monotone,
        energy_monotone,
        energy_inequality_holds,
        flagged,
    }
}

/// Log-log fit of `∫_E|f(v)|` against `|E|` over random space-time sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityFit {
    pub slope: f64,
    pub intercept: f64,
    /// `2* - q`.
    pub eta: f64,
    pub two_star: f64,
    /// `η/2* - 0.1`.
    pub threshold: f64,
    pub passes: bool,
    /// All sampled integrals vanished.
    pub vacuous: bool,
    /// `(|E|, ∫_E|f(v)|)` per trial.
    pub points: Vec<(f64, f64)>,
}

/// Samples `trials` random unions of space-time cells inside the box
/// `|x_a| <= half_width`, with `|E|` log-uniform over four decades up to the
/// full box, and fits `log ∫_E|f(v)|` against `log |E|`.
pub fn uniform_integrability_probe(
    run: &WaveRun,
    spec: &NonlinearitySpec,
    half_width: f64,
    trials: usize,
    seed: u64,
    q_max: f64,
) -> Result<IntegrabilityFit> {
    let growth = spec
        .growth()
        .ok_or_else(|| Error::Invalid(format!("{} carries no growth exponent", spec.name())))?;
    let grid = run.grid;
    let crit = {
        let t = two_star(grid.d);
        if t.is_finite() { t } else { q_max }
    };
    let eta = crit - growth.q;
    let threshold = eta / crit - 0.1;
    let cells: Vec<usize> =
        (0..grid.len()).filter(|&i| grid.point(i)[..grid.d].iter().all(|x| x.abs() <= half_width)).collect();
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.t).collect();
    let nt = times.len();
    if cells.is_empty() || nt < 2 {
        return Err(Error::Invalid("integrability probe needs a nonempty box and two snapshots".into()));
    }
    // trapezoid weights in time
    let tw: Vec<f64> = (0..nt)
        .map(|n| {
            let left = if n > 0 { times[n] - times[n - 1] } else { 0.0 };
            let right = if n + 1 < nt { times[n + 1] - times[n] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let vol = grid.cell_volume();
    let total = cells.len() * nt;
    let density = |c: usize| -> (f64, f64) {
        let (n, i) = (c / cells.len(), c % cells.len());
        let wgt = tw[n] * vol;
        (wgt, wgt * spec.force(run.snapshots[n].u[cells[i]]).abs())
    };
    let mut rng = stream(seed, "integrability");
    let mut points = Vec::with_capacity(trials + 1);
    let full = pairwise_sum_by(total, |c| density(c).0);
    let full_int = pairwise_sum_by(total, |c| density(c).1);
    points.push((full, full_int));
    let min_m = (total as f64 * 1e-4).max(1.0);
    for _ in 0..trials {
        let m = (min_m * (rng.gen::<f64>() * (total as f64 / min_m).ln()).exp()).round().clamp(1.0, total as f64);
        let idx = sample(&mut rng, total, m as usize).into_vec();
        let meas = pairwise_sum_by(idx.len(), |k| density(idx[k]).0);
        let int = pairwise_sum_by(idx.len(), |k| density(idx[k]).1);
        points.push((meas, int));
    }
    let usable: Vec<(f64, f64)> = points.iter().filter(|(m, i)| *m > 0.0 && *i > 0.0).map(|(m, i)| (m.ln(), i.ln())).collect();
    if usable.len() < 2 {
        return Ok(IntegrabilityFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            eta,
            two_star: crit,
            threshold,
            passes: false,
            vacuous: true,
            points,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(IntegrabilityFit {
        slope,
        intercept: my - slope * mx,
        eta,
        two_star: crit,
        threshold,
        passes: slope >= threshold,
        vacuous: false,
        points,
    })
}

/// Both sides of `I(t) <= C(∫₀ᵗ‖w‖² + ∫₀ᵗ∫w(f(u+w) - f(u)))` and the
/// smallest `C` that makes the bound hold at every recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Main33Report {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs_l2: Vec<f64>,
    pub rhs_force: Vec<f64>,
    pub c: f64,
    pub finite: bool,
}

pub fn lemma_main33_probe(u: &WaveRun, v: &WaveRun, spec: &NonlinearitySpec) -> Result<Main33Report> {
    if spec.class() != AssumptionClass::Defocusing {
        return Err(Error::Invalid(format!("{} is not defocusing; the lemma assumes u f(u) >= 0", spec.name())));
    }
    let ex = energy_expansion(u, v, spec)?;
    let grid = u.grid;
    let mut l2_rate = Vec::new();
    let mut f_rate = Vec::new();
    for (su, sv) in u.snapshots.iter().zip(&v.snapshots) {
        l2_rate.push(integrate_by(&grid, |p| (sv.u[p] - su.u[p]).powi(2)));
        f_rate.push(integrate_by(&grid, |p| (sv.u[p] - su.u[p]) * (spec.force(sv.u[p]) - spec.force(su.u[p]))));
    }
    let rhs_l2 = cumulative_trapezoid(&ex.times, &l2_rate);
    let rhs_force = cumulative_trapezoid(&ex.times, &f_rate);
    let mut c = 0.0_f64;
    let mut finite = true;
    for n in 0..ex.times.len() {
        let lhs = ex.i[n];
        let rhs = rhs_l2[n] + rhs_force[n];
        if lhs <= 0.0 {
            continue;
        }
        if rhs > 0.0 {
            c = c.max(lhs / rhs);
        } else {
            finite = false;
        }
    }
    Ok(Main33Report { times: ex.times, lhs: ex.i, rhs_l2, rhs_force, c: if finite { c } else { f64::INFINITY }, finite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nls::NlsData;
    use crate::wave::WaveData;

    fn wave_cfg(spec: NonlinearitySpec, n: usize, dt_frac: f64, t: f64) -> WaveRunConfig {
        let grid = GridSpec::new(1, n, 8.0).unwrap();
        let mut c = WaveRunConfig::new(grid, spec, dt_frac * grid.h(), t, WaveData::bump(0.5, 1.0));
        c.stride = 4;
        c
    }

    #[test]
    fn identical_trajectories_expand_to_zero() {
        let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
        let run = wave::run(&wave_cfg(spec.clone(), 64, 0.25, 0.5)).unwrap();
        let ex = energy_expansion(&run, &run, &spec).unwrap();
        assert_eq!(ex.residual, 0.0);
        assert!(ex.i.iter().chain(&ex.j).all(|x| *x == 0.0));
        let tr = gronwall_trace_wave(&run, &run, &spec).unwrap();
        assert!(tr.g.iter().all(|x| *x == 0.0));
        assert_eq!(tr.fitted_c, 0.0);
        assert!(tr.envelope_holds());
    }

    #[test]
    fn linear_expansion_closes_to_rounding() {
        let spec = NonlinearitySpec::linear();
        let c = wave_cfg(spec.clone(), 128, 0.25, 1.0);
        let u = wave::run(&c).unwrap();
        let mut cv = c.clone();
        cv.data = cv.data.with_perturbation(0.3);
        let v = wave::run(&cv).unwrap();
        let ex = energy_expansion(&u, &v, &spec).unwrap();
        assert!(ex.i.iter().all(|x| *x == 0.0));
        assert!(ex.residual < 1e-8, "{}", ex.residual);
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let spec = NonlinearitySpec::linear();
        let u = wave::run(&wave_cfg(spec.clone(), 64, 0.25, 0.25)).unwrap();
        let v = wave::run(&wave_cfg(spec.clone(), 128, 0.25, 0.25)).unwrap();
        assert!(energy_expansion(&u, &v, &spec).is_err());
    }

    #[test]
    fn envelope_fit_covers_the_trace() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let g: Vec<f64> = times.iter().map(|t| 1e-4 * (2.0 * t).exp() * (1.0 + 0.1 * (9.0 * t).sin())).collect();
        let w: Vec<f64> = g.iter().map(|x| 0.1 * x).collect();
        let tr = GronwallTrace::from_series(times.clone(), g.clone(), w, vec![0.0; 50], vec![0.0; 50]);
        assert!(tr.envelope_holds());
        assert!(tr.fitted_c > 1.5 && tr.fitted_c < 4.0, "{}", tr.fitted_c);
        assert!((tr.lsq_slope - 2.0).abs() < 0.3);
        assert!(tr.integral_c > 0.0);
        let csv = tr.csv();
        assert!(csv.starts_with("t,G,w_l2,I,J,bound\n"));
        assert_eq!(csv.lines().count(), 51);
    }

    #[test]
    fn inactive_truncation_reproduces_the_flow_bitwise() {
        let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
        let base = wave_cfg(spec, 64, 0.25, 0.5);
        let cfg = WeakApproxConfig::new(ApproxMode::TruncationLadder(vec![2.0, 4.0, 8.0]), BaseRun::Wave(base));
        let out = appendix_construction(&cfg).unwrap();
        for (m, tr) in out.report.members.iter().zip(&out.traces) {
            assert_eq!(m.l2_discrepancy, 0.0);
            assert!(tr.g.iter().all(|x| *x < 1e-20));
        }
        assert!(out.report.l2_monotone && out.report.l1_monotone);
    }

    #[test]
    fn ladder_validation() {
        let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
        let base = BaseRun::Wave(wave_cfg(spec, 64, 0.25, 0.5));
        let bad = WeakApproxConfig::new(ApproxMode::TruncationLadder(vec![4.0, 2.0, 8.0]), base.clone());
        assert!(bad.validate().is_err());
        let short = WeakApproxConfig::new(ApproxMode::TruncationLadder(vec![2.0, 4.0]), base.clone());
        assert!(appendix_construction(&short).is_err());
        let coarse = WeakApproxConfig::new(ApproxMode::CoarseGrid(vec![32, 128]), base);
        assert!(coarse.validate().is_err());
        let nls_base = BaseRun::Nls(NlsRunConfig::new(
            GridSpec::new(1, 64, 16.0).unwrap(),
            NlsNonlinearitySpec::coercive_exp(),
            1e-2,
            0.1,
            NlsData::bump(1.0, 2.0),
        ));
        let trunc = WeakApproxConfig::new(ApproxMode::TruncationLadder(vec![1.0, 2.0, 3.0]), nls_base);
        assert!(trunc.validate().is_err());
    }

    #[test]
    fn coarse_grid_members_converge() {
        let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
        let base = wave_cfg(spec, 128, 0.25, 0.5);
        let cfg = WeakApproxConfig::new(ApproxMode::CoarseGrid(vec![32, 64]), BaseRun::Wave(base));
        let out = run_ladder(&cfg).unwrap();
        let m = &out.report.members;
        assert!(m[1].l2_discrepancy < m[0].l2_discrepancy);
    }

    #[test]
    fn nls_identical_trajectories() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let spec = NlsNonlinearitySpec::coercive_exp();
        let mut cfg = NlsRunConfig::new(grid, spec.clone(), 1e-2, 0.2, NlsData::bump(1.0, 2.0));
        cfg.stride = 2;
        let run = nls::run(&cfg).unwrap();
        let tr = gronwall_trace_nls(&run, &run, &spec, 0.0).unwrap();
        assert!(tr.g.iter().chain(&tr.i).chain(&tr.j).all(|x| *x == 0.0));
        assert!(gronwall_trace_nls(&run, &run, &spec, -1.0).is_err());
    }

    #[test]
    fn nls_drift_integral_tracks_mass_of_difference() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let spec = NlsNonlinearitySpec::coercive_exp();
        let mut cfg = NlsRunConfig::new(grid, spec.clone(), 2e-3, 0.5, NlsData::bump(1.0, 2.0));
        cfg.stride = 5;
        let u = nls::run(&cfg).unwrap();
        let mut cv = cfg.clone();
        cv.data = cv.data.with_perturbation(0.1);
        let v = nls::run(&cv).unwrap();
        let tr = gronwall_trace_nls(&u, &v, &spec, 0.0).unwrap();
        let last = tr.times.len() - 1;
        let half_mass_change = 0.5 * (tr.w_l2[last] - tr.w_l2[0]);
        assert!((tr.i[last] - half_mass_change).abs() < 1e-3 * tr.w_l2[0], "{} {}", tr.i[last], half_mass_change);
        assert!(tr.remainder.as_ref().unwrap().iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn integrability_probe_vacuous_and_anchored() {
        let spec = NonlinearitySpec::oscillating_sin(1.0).unwrap();
        let grid = GridSpec::new(1, 64, 8.0).unwrap();
        let mut c = WaveRunConfig::new(grid, spec.clone(), 0.25 * grid.h(), 0.25, WaveData::bump(0.0, 1.0));
        c.stride = 2;
        let zero = wave::run(&c).unwrap();
        let fit = uniform_integrability_probe(&zero, &spec, 2.0, 50, 1, 10.0).unwrap();
        assert!(fit.vacuous && !fit.passes);
        c.data = WaveData::bump(1.0, 1.0);
        let run = wave::run(&c).unwrap();
        let fit = uniform_integrability_probe(&run, &spec, 2.0, 200, 1, 10.0).unwrap();
        assert!(!fit.vacuous);
        let (full_meas, _) = fit.points[0];
        assert!((full_meas - fit.points.iter().map(|p| p.0).fold(0.0, f64::max)).abs() < 1e-12);
        assert!(fit.slope > 0.5 && fit.slope < 1.5, "{}", fit.slope);
    }

    #[test]
    fn main33_requires_defocusing_and_vanishes_on_diagonal() {
        let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
        let run = wave::run(&wave_cfg(spec.clone(), 64, 0.25, 0.5)).unwrap();
        let rep = lemma_main33_probe(&run, &run, &spec).unwrap();
        assert!(rep.lhs.iter().chain(&rep.rhs_l2).chain(&rep.rhs_force).all(|x| *x == 0.0));
        assert!(rep.finite && rep.c == 0.0);
        let osc = NonlinearitySpec::oscillating_sin(1.0).unwrap();
        assert!(lemma_main33_probe(&run, &run, &osc).is_err());
    }

    #[test]
    fn monotone_with_slack() {
        assert!(nonincreasing_with_slack(&[3.0, 2.0, 2.1, 0.0], 0.1));
        assert!(!nonincreasing_with_slack(&[3.0, 2.0, 2.3], 0.1));
        assert!(nonincreasing_with_slack(&[0.0, 0.0, 0.0], 0.1));
    }
}
