//! Dispatch of a validated config to the numerical modules. Each kind
//! produces an in-memory file set plus an outcome; nothing here touches the
//! filesystem.

use serde::Serialize;
use serde_json::json;

use supercrit_core::assumption_lab::{
    self, check_coercive, classify, find_convexity_shift, verify_nls_cancellation, InequalityReport, SamplePlan,
    COERCIVE_DENSITY_FLOOR,
};
use supercrit_core::nls::{self, NlsData, NlsRunConfig};
use supercrit_core::wave::{self, WaveData, WaveRunConfig};
use supercrit_core::weak_strong::{
    appendix_construction, energy_expansion, run_ladder, ApproxMode, BaseRun, IntegrabilitySettings, LadderOutcome,
    WeakApproxConfig,
};
use supercrit_core::{AssumptionClass, Error, GridSpec, NlsNonlinearitySpec, NonlinearitySpec, Selection};

use crate::config::{ExperimentConfig, Kind, Mode, Shift};
use crate::store::Outcome;

/// Random complex pairs in the cancellation identity check.
pub const CANCELLATION_SAMPLES: usize = 100_000;
/// Pass threshold of the virial identity residual.
pub const WEAK_IDENTITY_TOL: f64 = 1e-4;
/// Pass threshold of the cancellation identity residual.
pub const CANCELLATION_TOL: f64 = 1e-12;
/// Nominal convergence order of the identity residuals.
pub const MIN_ORDER: f64 = 2.0;
/// Measurement slack on an empirical order: an `O(dt²)` residual fluctuates
/// around 2 in the fourth digit.
pub const ORDER_SLACK: f64 = 0.05;

fn order_ok(orders: &[f64]) -> bool {
    orders.iter().all(|o| *o >= MIN_ORDER - ORDER_SLACK)
}
/// Perturbation size of the expansion study when the config sets none.
pub const EXPANSION_EPS: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct Payload {
    /// `(file name, bytes)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub outcome: Outcome,
    pub message: Option<String>,
}

impl Payload {
    fn ok(files: Vec<(String, Vec<u8>)>) -> Self {
        Self { files, outcome: Outcome::Ok, message: None }
    }

    fn with(mut self, outcome: Outcome, message: String) -> Self {
        if self.outcome == Outcome::Ok {
            self.outcome = outcome;
            self.message = Some(message);
        }
        self
    }

    fn failed(err: Error) -> Self {
        let outcome = match err {
            Error::BlowUp { .. } | Error::NonFinite { .. } => Outcome::AbortedBlowup,
            _ => Outcome::InvariantViolation,
        };
        Self { files: Vec::new(), outcome, message: Some(err.to_string()) }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable payload");
    s.push('\n');
    s.into_bytes()
}

/// Runs `f` over `items` on scoped threads, at most `jobs` at a time,
/// keeping input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let width = if jobs == 0 { items.len().max(1) } else { jobs };
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(width) {
        std::thread::scope(|s| {
            let f = &f;
            let handles: Vec<_> = chunk.iter().map(|x| s.spawn(move || f(x))).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("worker panicked")));
        });
    }
    out
}

pub fn execute(cfg: &ExperimentConfig, jobs: usize) -> Payload {
    let result = match cfg.kind {
        Kind::CheckAssumptions => Ok(check_assumptions(cfg, jobs)),
        Kind::SimulateWave => simulate_wave(cfg),
        Kind::SimulateNls => simulate_nls(cfg),
        Kind::WeakStrong | Kind::AppendixConstruct => ladder(cfg, jobs),
        Kind::IdentityCheck => identity_check(cfg),
    };
    result.unwrap_or_else(Payload::failed)
}

fn plan(cfg: &ExperimentConfig) -> SamplePlan {
    SamplePlan { random: cfg.samples, grid: cfg.grid_points, seed: cfg.seed, q_max: cfg.q_max }
}

fn wave_spec(cfg: &ExperimentConfig) -> NonlinearitySpec {
    match cfg.selection() {
        Selection::Wave(s) => s,
        Selection::Nls(s) => unreachable!("{} rejected at parse", s.name()),
    }
}

fn nls_spec(cfg: &ExperimentConfig) -> NlsNonlinearitySpec {
    match cfg.selection() {
        Selection::Nls(s) => s,
        Selection::Wave(s) => unreachable!("{} rejected at parse", s.name()),
    }
}

pub fn wave_config(cfg: &ExperimentConfig) -> WaveRunConfig {
    let data = WaveData {
        amplitude: cfg.amplitude,
        radius: cfg.radius,
        velocity: cfg.velocity,
        perturbation: cfg.perturbation,
    };
    let mut c = WaveRunConfig::new(cfg.grid(), wave_spec(cfg), cfg.dt, cfg.t, data);
    c.stride = cfg.stride;
    c.margin = cfg.margin;
    c
}

pub fn nls_config(cfg: &ExperimentConfig) -> NlsRunConfig {
    let data = NlsData { amplitude: cfg.amplitude, radius: cfg.radius, perturbation: cfg.perturbation };
    let mut c = NlsRunConfig::new(cfg.grid(), nls_spec(cfg), cfg.dt, cfg.t, data);
    c.stride = cfg.stride;
    c.margin = cfg.margin;
    c
}

#[derive(Serialize)]
struct RadiusReports {
    #[serde(rename = "R")]
    r: f64,
    reports: Vec<InequalityReport>,
}

fn check_assumptions(cfg: &ExperimentConfig, jobs: usize) -> Payload {
    let selection = cfg.selection();
    let plan = plan(cfg);
    let per_radius = parallel_map(&cfg.radii, jobs, |&r| {
        let mut reports = classify(&selection, r, cfg.d, &plan);
        if let Selection::Nls(s) = &selection {
            if s.class() == AssumptionClass::NlsCoercive {
                let mut restricted = check_coercive(s, r, COERCIVE_DENSITY_FLOOR, &plan);
                restricted.note = Some(format!("restricted to densities s >= {COERCIVE_DENSITY_FLOOR}"));
                reports.push(restricted);
            }
        }
        RadiusReports { r, reports }
    });
    let cancellation = match &selection {
        Selection::Nls(s) => Some(
            verify_nls_cancellation(s, CANCELLATION_SAMPLES, cfg.seed).unwrap_or_else(|e| failed_report(e)),
        ),
        Selection::Wave(_) => None,
    };
    // the restricted coercivity check is informational: the literal one
    // decides the outcome
    let failing: Vec<String> = per_radius
        .iter()
        .flat_map(|rr| {
            rr.reports
                .iter()
                .filter(|rep| !rep.holds && rep.note.as_deref().map_or(true, |n| !n.starts_with("restricted")))
                .map(move |rep| format!("{:?} at R = {}", rep.inequality, rr.r))
        })
        .chain(cancellation.iter().filter(|c| !c.holds).map(|_| "Gronw4 cancellation".to_string()))
        .collect();
    let body = json!({
        "nonlinearity": selection.name(),
        "class": format!("{:?}", selection.class()),
        "d": cfg.d,
        "plan": plan,
        "radii": per_radius,
        "cancellation": cancellation,
    });
    let payload = Payload::ok(vec![("reports.json".into(), json_bytes(&body))]);
    if failing.is_empty() {
        payload
    } else {
        payload.with(Outcome::InvariantViolation, format!("inequalities failed: {}", failing.join(", ")))
    }
}

fn failed_report(e: Error) -> InequalityReport {
    InequalityReport {
        inequality: assumption_lab::Inequality::Gronw4,
        holds: false,
        constant: assumption_lab::ConstantEstimate {
            name: "gronw4".into(),
            r: 0.0,
            value: f64::NAN,
            samples: 0,
            worst_pair: (assumption_lab::Point::Real(0.0), assumption_lab::Point::Real(0.0)),
        },
        violations: Vec::new(),
        note: Some(e.to_string()),
    }
}

fn simulate_wave(cfg: &ExperimentConfig) -> Result<Payload, Error> {
    let run = wave::run(&wave_config(cfg))?;
    let summary = json!({
        "nonlinearity": cfg.nonlinearity,
        "steps": cfg.steps(),
        "dt": cfg.dt,
        "t_final": run.final_state().t,
        "snapshots": run.snapshots.len(),
        "energy_drift": run.energy_drift(),
        "discrete_energy_drift": run.discrete_energy_drift(),
        "max_energy_excess": run.max_energy_excess(),
        "max_leakage": run.trace.iter().map(|r| r.leakage).fold(0.0, f64::max),
        "max_sup_norm": run.trace.iter().map(|r| r.sup_norm).fold(0.0, f64::max),
        "leakage_flag": run.leakage_flag,
    });
    let payload = Payload::ok(vec![
        ("trace.csv".into(), run.trace_csv().into_bytes()),
        ("summary.json".into(), json_bytes(&summary)),
    ]);
    Ok(leakage(payload, run.leakage_flag))
}

fn leakage(payload: Payload, flag: bool) -> Payload {
    if flag {
        payload.with(
            Outcome::LeakageFlag,
            format!("boundary leakage exceeded {:e}; enlarge the box", supercrit_core::wave::LEAKAGE_LIMIT),
        )
    } else {
        payload
    }
}

fn simulate_nls(cfg: &ExperimentConfig) -> Result<Payload, Error> {
    let run = nls::run(&nls_config(cfg))?;
    let summary = json!({
        "nonlinearity": cfg.nonlinearity,
        "steps": cfg.steps(),
        "dt": cfg.dt,
        "t_final": run.snapshots.last().map(|s| s.t),
        "snapshots": run.snapshots.len(),
        "mass_drift": run.mass_drift(),
        "hamiltonian_drift": run.hamiltonian_drift(),
        "max_leakage": run.max_leakage(),
        "leakage_flag": run.leakage_flag,
    });
    let payload = Payload::ok(vec![
        ("trace.csv".into(), run.trace_csv().into_bytes()),
        ("summary.json".into(), json_bytes(&summary)),
    ]);
    Ok(leakage(payload, run.leakage_flag))
}

fn approx_mode(cfg: &ExperimentConfig) -> ApproxMode {
    match cfg.mode {
        Mode::PerturbedData => ApproxMode::PerturbedData(cfg.ladder.clone()),
        Mode::TruncationLadder => ApproxMode::TruncationLadder(cfg.ladder.clone()),
        Mode::CoarseGrid => ApproxMode::CoarseGrid(cfg.ladder.iter().map(|&n| n as usize).collect()),
    }
}

/// Radius bounding both trajectories of an NLS pair at `t = 0`, doubled.
fn shift_radius(cfg: &ExperimentConfig) -> f64 {
    let eps = if cfg.mode == Mode::PerturbedData { cfg.ladder.iter().fold(0.0_f64, |m, x| m.max(*x)) } else { 0.0 };
    2.0 * (cfg.amplitude.abs() + cfg.perturbation.abs() + eps)
}

fn ladder(cfg: &ExperimentConfig, jobs: usize) -> Result<Payload, Error> {
    let mode = approx_mode(cfg);
    let (base, shift) = match cfg.selection() {
        Selection::Wave(_) => (BaseRun::Wave(wave_config(cfg)), None),
        Selection::Nls(s) => {
            let a = match cfg.shift {
                Shift::Fixed(a) => a,
                Shift::Auto => find_convexity_shift(&s, shift_radius(cfg), &plan(cfg))?.estimate.value,
            };
            (BaseRun::Nls(nls_config(cfg)), Some(a))
        }
    };
    let mut wac = WeakApproxConfig::new(mode, base);
    wac.shift = shift.unwrap_or(0.0);
    wac.jobs = jobs;
    let out: LadderOutcome = if cfg.kind == Kind::AppendixConstruct {
        wac.integrability = Some(IntegrabilitySettings {
            half_width: (cfg.radius + cfg.t).min(cfg.l / 2.0),
            trials: cfg.trials,
            seed: cfg.seed,
            q_max: cfg.q_max,
        });
        appendix_construction(&wac)?
    } else {
        run_ladder(&wac)?
    };
    let mut files = Vec::new();
    for (m, tr) in out.report.members.iter().zip(&out.traces) {
        files.push((format!("{}.csv", m.index), tr.csv().into_bytes()));
        files.push((format!("{}.json", m.index), json_bytes(&json!({ "member": m, "trace": tr }))));
    }
    files.push((
        "convergence.json".into(),
        json_bytes(&json!({ "report": out.report, "shift": shift, "ladder": cfg.ladder })),
    ));
    let mut payload = Payload::ok(files);
    let broken: Vec<usize> =
        out.report.members.iter().zip(&out.traces).filter(|(_, t)| !t.envelope_holds()).map(|(m, _)| m.index).collect();
    if !broken.is_empty() {
        payload = payload.with(Outcome::InvariantViolation, format!("Gronwall envelope fails for members {broken:?}"));
    }
    if out.report.members.len() < cfg.ladder.len() {
        payload = payload.with(Outcome::AbortedBlowup, out.report.flagged.join("; "));
    }
    let leaked = out.report.members.iter().any(|m| m.leakage_flag);
    Ok(leakage(payload, leaked))
}

/// `log2` ratios of successive residuals.
pub fn orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

fn identity_check(cfg: &ExperimentConfig) -> Result<Payload, Error> {
    let mut failures = Vec::new();
    let body = match cfg.selection() {
        Selection::Wave(spec) => {
            // virial identity: dt, dt/2, dt/4 at the configured grid, every
            // step recorded
            let mut levels = Vec::new();
            for m in [1usize, 2, 4] {
                let mut c = wave_config(cfg);
                c.dt = cfg.dt / m as f64;
                c.stride = 1;
                let run = wave::run(&c)?;
                let w = wave::verify_prop_weak_identity(&run.snapshots, &spec)?;
                levels.push(json!({ "dt": c.dt, "lhs": w.lhs, "rhs": w.rhs, "residual": w.residual }));
            }
            let res: Vec<f64> = levels.iter().map(|l| l["residual"].as_f64().unwrap()).collect();
            let weak_orders = orders(&res);
            if !(res[0] < WEAK_IDENTITY_TOL) {
                failures.push(format!("virial residual {:e} >= {WEAK_IDENTITY_TOL:e}", res[0]));
            }
            if !order_ok(&weak_orders) {
                failures.push(format!("virial residual order {weak_orders:?} below {MIN_ORDER}"));
            }
            // energy expansion: simultaneous (h, dt) refinement; the stride
            // stays fixed so the time quadrature of I refines with dt
            let eps = if cfg.perturbation != 0.0 { cfg.perturbation } else { EXPANSION_EPS };
            let mut exp_levels = Vec::new();
            let coarse_dt = cfg.dt * cfg.n as f64 / (cfg.n / 4).max(8) as f64;
            let stride = ((cfg.t / coarse_dt).round() as usize / crate::config::SNAPSHOTS).max(1);
            for n in [cfg.n / 4, cfg.n / 2, cfg.n] {
                let grid = GridSpec::new(cfg.d, n.max(8), cfg.l)?;
                let mut c = wave_config(cfg);
                c.grid = grid;
                c.dt = cfg.dt * grid.h() / cfg.grid().h();
                c.stride = stride;
                c.data.perturbation = 0.0;
                let u = wave::run(&c)?;
                let mut cv = c.clone();
                cv.data.perturbation = eps;
                let v = wave::run(&cv)?;
                let ex = energy_expansion(&u, &v, &spec)?;
                exp_levels.push(json!({ "n": grid.n, "dt": c.dt, "residual": ex.residual, "scale": ex.scale }));
            }
            let ex_res: Vec<f64> = exp_levels.iter().map(|l| l["residual"].as_f64().unwrap()).collect();
            let ex_orders = orders(&ex_res);
            if !order_ok(&ex_orders) {
                failures.push(format!("expansion residual order {ex_orders:?} below {MIN_ORDER}"));
            }
            json!({
                "nonlinearity": spec.name(),
                "weak_identity": { "levels": levels, "orders": weak_orders, "tolerance": WEAK_IDENTITY_TOL },
                "energy_expansion": { "epsilon": eps, "levels": exp_levels, "orders": ex_orders },
                "min_order": MIN_ORDER,
                "order_slack": ORDER_SLACK,
            })
        }
        Selection::Nls(spec) => {
            let rep = verify_nls_cancellation(&spec, CANCELLATION_SAMPLES, cfg.seed)?;
            if !(rep.constant.value < CANCELLATION_TOL) {
                failures.push(format!("cancellation residual {:e} >= {CANCELLATION_TOL:e}", rep.constant.value));
            }
            json!({
                "nonlinearity": spec.name(),
                "cancellation": rep,
                "samples": CANCELLATION_SAMPLES,
                "tolerance": CANCELLATION_TOL,
            })
        }
    };
    let payload = Payload::ok(vec![("identities.json".into(), json_bytes(&body))]);
    Ok(if failures.is_empty() { payload } else { payload.with(Outcome::InvariantViolation, failures.join("; ")) })
}
