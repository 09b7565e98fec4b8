//! Acceptance suite: one PASS/FAIL line per criterion, followed by indented
//! measurements. Exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use supercrit_cli::config::{parse_config, APPENDIX_DT_FRACTION, DEFAULT_SEED, SNAPSHOTS};
use supercrit_cli::experiment::{CANCELLATION_SAMPLES, CANCELLATION_TOL, ORDER_SLACK, WEAK_IDENTITY_TOL};
use supercrit_core::assumption_lab::{
    check_coercive, classify, find_convexity_shift, verify_nls_cancellation, SamplePlan, CLASS_RADII,
    COERCIVE_DENSITY_FLOOR,
};
use supercrit_core::nls::{self, NlsData, NlsRunConfig};
use supercrit_core::nonlinearity::{beta_cutoff, beta_cutoff_derivative, builtin_catalog, find_truncation_abscissae};
use supercrit_core::wave::{self, cfl_bound, WaveData, WaveRunConfig};
use supercrit_core::weak_strong::{
    energy_expansion, gronwall_trace_nls, gronwall_trace_wave, run_ladder, uniform_integrability_probe, ApproxMode,
    BaseRun, WeakApproxConfig,
};
use supercrit_core::{GridSpec, NlsNonlinearitySpec, NonlinearitySpec, Selection};

const ENERGY_TOL: f64 = 1e-6;
const MASS_TOL: f64 = 1e-12;
const HAMILTONIAN_TOL: f64 = 1e-6;
/// Drift ratio under dt halving for a second-order scheme.
const RATIO_BAND: (f64, f64) = (3.0, 5.0);
const MIN_ORDER: f64 = 2.0;
const KNOT_TOL: f64 = 1e-6;
const G0_SPREAD: f64 = 2.0;
const SUP_RATIO_SPREAD: f64 = 0.5;
const C_STABILITY: f64 = 0.2;
const EPSILONS: [f64; 3] = [1e-3, 1e-2, 1e-1];

struct Verdict {
    pass: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(format!("{} {note}", if ok { "ok  " } else { "FAIL" }));
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("info {note}"));
    }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

fn wave_cfg(spec: &NonlinearitySpec, d: usize, n: usize, l: f64, dt_frac: f64, t: f64, data: WaveData) -> WaveRunConfig {
    let g = GridSpec::new(d, n, l).unwrap();
    WaveRunConfig::new(g, spec.clone(), dt_frac * g.h() / (d as f64).sqrt(), t, data)
}

fn nls_cfg(n: usize, dt: f64) -> NlsRunConfig {
    let g = GridSpec::new(1, n, 64.0).unwrap();
    NlsRunConfig::new(g, NlsNonlinearitySpec::coercive_exp(), dt, 1.0, NlsData::bump(1.0, 4.0))
}

fn algebraic_identities() -> Verdict {
    let mut v = Verdict::new();
    for sel in builtin_catalog() {
        if let Selection::Nls(spec) = sel {
            let r = verify_nls_cancellation(&spec, CANCELLATION_SAMPLES, DEFAULT_SEED).unwrap();
            v.check(
                r.constant.value < CANCELLATION_TOL,
                format!("{} cancellation residual {:.2e} (< {CANCELLATION_TOL:e})", spec.name(), r.constant.value),
            );
        }
    }
    let mut worst = (0.0f64, 0.0f64);
    for k in [0.5, 1.0, 2.0, 4.0, 8.0] {
        for knot in [k, 2.0 * k, -k, -2.0 * k] {
            let d = 1e-9 * k;
            let value = (beta_cutoff(knot + d, k) - beta_cutoff(knot - d, k)).abs();
            let slope = (beta_cutoff_derivative(knot + d, k) - beta_cutoff_derivative(knot - d, k)).abs();
            worst = (worst.0.max(value), worst.1.max(slope));
        }
    }
    v.check(
        worst.0 < KNOT_TOL && worst.1 < KNOT_TOL,
        format!("cutoff jumps at knots: value {:.2e}, derivative {:.2e} (< {KNOT_TOL:e})", worst.0, worst.1),
    );
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for sel in builtin_catalog() {
        let Selection::Wave(spec) = sel else { continue };
        for k in [1.0, 2.0, 4.0, 8.0] {
            let level = match find_truncation_abscissae(&spec, k, spec.h21_constant()) {
                Ok(l) => l,
                Err(e) => {
                    v.check(false, format!("{} k={k}: {e}", spec.name()));
                    continue;
                }
            };
            let t = spec.truncate(level).unwrap();
            for i in 1..2000 {
                let u = level.r_minus + (level.r_plus - level.r_minus) * i as f64 / 2000.0;
                checked += 1;
                if t.force(u).to_bits() != spec.force(u).to_bits()
                    || t.potential(u).to_bits() != spec.potential(u).to_bits()
                {
                    mismatches += 1;
                }
            }
        }
    }
    v.check(mismatches == 0, format!("truncation inside the window: {mismatches} of {checked} points differ bitwise"));
    v
}

fn assumption_suite() -> Verdict {
    let mut v = Verdict::new();
    let plan = SamplePlan::default();
    let catalog = builtin_catalog();
    let reports: Vec<(String, f64, Vec<_>)> = std::thread::scope(|s| {
        let handles: Vec<_> = catalog
            .iter()
            .flat_map(|sel| CLASS_RADII.iter().map(move |&r| (sel, r)))
            .map(|(sel, r)| {
                let plan = &plan;
                s.spawn(move || (sel.name().to_string(), r, classify(sel, r, 1, plan)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (name, r, reps) in &reports {
        let failed: Vec<String> = reps
            .iter()
            .filter(|x| !x.holds)
            .map(|x| format!("{:?}{}", x.inequality, x.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()))
            .collect();
        v.check(failed.is_empty(), format!("{name} R={r}: {} checks{}", reps.len(), if failed.is_empty() {
            String::new()
        } else {
            format!(", failing {}", failed.join(", "))
        }));
    }
    for sel in &catalog {
        if let Selection::Nls(spec) = sel {
            if matches!(spec.class(), supercrit_core::AssumptionClass::NlsCoercive) {
                for r in CLASS_RADII {
                    let rep = check_coercive(spec, r, COERCIVE_DENSITY_FLOOR, &plan);
                    v.info(format!(
                        "{} R={r}: coercivity restricted to s >= {COERCIVE_DENSITY_FLOOR}: holds={} C={:.4}",
                        spec.name(),
                        rep.holds,
                        rep.constant.value
                    ));
                }
            }
        }
    }
    v
}

fn conservation() -> Verdict {
    let mut v = Verdict::new();
    let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
    let runs: Vec<_> = [0.25, 0.125]
        .iter()
        .map(|&f| wave::run(&wave_cfg(&spec, 1, 256, 8.0, f, 1.0, WaveData::bump(0.5, 1.0))).unwrap())
        .collect();
    let drift = runs[0].energy_drift();
    v.check(drift < ENERGY_TOL, format!("wave energy drift {drift:.3e} at dt=0.25h (< {ENERGY_TOL:e})"));
    let ratio = drift / runs[1].energy_drift();
    v.check(
        (RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio),
        format!("wave drift ratio under dt halving {ratio:.3}"),
    );
    v.info(format!(
        "wave discrete (shadow) energy drift {:.3e}, {:.3e}",
        runs[0].discrete_energy_drift(),
        runs[1].discrete_energy_drift()
    ));
    let a = nls::run(&nls_cfg(256, 1e-3)).unwrap();
    let b = nls::run(&nls_cfg(256, 5e-4)).unwrap();
    v.check(a.mass_drift() < MASS_TOL, format!("nls mass drift {:.3e} (< {MASS_TOL:e})", a.mass_drift()));
    v.check(
        a.hamiltonian_drift() < HAMILTONIAN_TOL,
        format!("nls hamiltonian drift {:.3e} (< {HAMILTONIAN_TOL:e})", a.hamiltonian_drift()),
    );
    let ratio = a.hamiltonian_drift() / b.hamiltonian_drift();
    v.check(
        (RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio),
        format!("nls hamiltonian drift ratio under dt halving {ratio:.3}"),
    );
    v.info(format!("nls max leakage {:.2e}", a.max_leakage()));
    v
}

fn weak_identity() -> Verdict {
    let mut v = Verdict::new();
    let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
    let res: Vec<f64> = [0.125, 0.0625, 0.03125]
        .iter()
        .map(|&f| {
            let mut c = wave_cfg(&spec, 1, 256, 8.0, f, 1.0, WaveData::bump(0.5, 2.0));
            c.stride = 1;
            let run = wave::run(&c).unwrap();
            wave::verify_prop_weak_identity(&run.snapshots, &spec).unwrap().residual
        })
        .collect();
    v.check(res[0] < WEAK_IDENTITY_TOL, format!("virial residual {:.3e} at dt=h/8 (< {WEAK_IDENTITY_TOL:e})", res[0]));
    let o = orders(&res);
    v.check(
        o.iter().all(|x| *x >= MIN_ORDER - ORDER_SLACK),
        format!("residuals {}, orders {o:.4?} (>= {MIN_ORDER} - {ORDER_SLACK})", sci(&res)),
    );
    v
}

fn expansion() -> Verdict {
    let mut v = Verdict::new();
    let spec = NonlinearitySpec::defocusing_exp(1).unwrap();
    let mut res = Vec::new();
    for n in [64, 128, 256] {
        let mut c = wave_cfg(&spec, 1, n, 8.0, 0.125, 1.0, WaveData::bump(0.5, 2.0));
        // fixed stride so the time quadrature of I refines with dt
        c.stride = 1;
        let u = wave::run(&c).unwrap();
        let mut cv = c.clone();
        cv.data = cv.data.with_perturbation(1e-2);
        let w = wave::run(&cv).unwrap();
        res.push(energy_expansion(&u, &w, &spec).unwrap().residual);
        if n == 64 {
            let same = energy_expansion(&u, &u, &spec).unwrap();
            v.check(same.residual == 0.0, format!("v = u residual {:e}", same.residual));
        }
    }
    let o = orders(&res);
    v.check(
        o.iter().all(|x| *x >= MIN_ORDER - ORDER_SLACK),
        format!("residuals {}, orders {o:.4?} (>= {MIN_ORDER} - {ORDER_SLACK})", sci(&res)),
    );
    v
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn epsilon_ladders() -> Verdict {
    let mut v = Verdict::new();
    // (label, G0/ε², sup G/G0, C) per dt level
    let mut families: Vec<(String, Vec<Vec<(f64, f64, f64)>>)> = Vec::new();
    for spec in [NonlinearitySpec::defocusing_exp(1).unwrap(), NonlinearitySpec::oscillating_sin(1.0).unwrap()] {
        let mut levels = Vec::new();
        for (frac, stride) in [(0.25, 1), (0.125, 2)] {
            let mut c = wave_cfg(&spec, 1, 256, 8.0, frac, 1.0, WaveData::bump(0.5, 1.0));
            c.stride = stride;
            let u = wave::run(&c).unwrap();
            let row: Vec<_> = EPSILONS
                .iter()
                .map(|&eps| {
                    let mut cv = c.clone();
                    cv.data = cv.data.with_perturbation(eps);
                    let tr = gronwall_trace_wave(&u, &wave::run(&cv).unwrap(), &spec).unwrap();
                    (tr.g0() / (eps * eps), tr.sup_ratio(), tr.fitted_c)
                })
                .collect();
            levels.push(row);
        }
        families.push((spec.name().to_string(), levels));
    }
    let spec = NlsNonlinearitySpec::coercive_exp();
    let r = 2.0 * (1.0 + EPSILONS[2]);
    let a = find_convexity_shift(&spec, r, &SamplePlan::default()).unwrap().estimate.value;
    v.info(format!("{} convexity shift A = {a:.4} on |u| <= {r}", spec.name()));
    let mut levels = Vec::new();
    for (dt, stride) in [(1e-3, 8), (5e-4, 16)] {
        let mut c = nls_cfg(256, dt);
        c.stride = stride;
        let u = nls::run(&c).unwrap();
        let row: Vec<_> = EPSILONS
            .iter()
            .map(|&eps| {
                let mut cv = c.clone();
                cv.data = cv.data.with_perturbation(eps);
                let tr = gronwall_trace_nls(&u, &nls::run(&cv).unwrap(), &spec, a).unwrap();
                (tr.g0() / (eps * eps), tr.sup_ratio(), tr.fitted_c)
            })
            .collect();
        levels.push(row);
    }
    families.push((spec.name().to_string(), levels));
    for (name, levels) in &families {
        let g0: Vec<f64> = levels[0].iter().map(|x| x.0).collect();
        v.check(spread(&g0) <= G0_SPREAD, format!("{name}: G0/eps^2 {g0:.4?}"));
        let sup: Vec<f64> = levels[0].iter().map(|x| x.1).collect();
        v.check(spread(&sup) - 1.0 < SUP_RATIO_SPREAD, format!("{name}: sup G/G0 {sup:.4?}"));
        let coarse: Vec<f64> = levels[0].iter().map(|x| x.2).collect();
        let fine: Vec<f64> = levels[1].iter().map(|x| x.2).collect();
        let stable = coarse.iter().zip(&fine).all(|(a, b)| (b / a - 1.0).abs() <= C_STABILITY);
        v.check(stable, format!("{name}: fitted C {coarse:.4?} -> {fine:.4?} under dt halving"));
    }
    v
}

fn appendix() -> Verdict {
    let mut v = Verdict::new();
    let spec = NonlinearitySpec::oscillating_sin(1.0).unwrap();
    let mut base = wave_cfg(&spec, 1, 256, 8.0, APPENDIX_DT_FRACTION, 1.0, WaveData::bump(3.0, 1.0));
    base.stride = (base.steps() / SNAPSHOTS).max(1);
    let mut cfg = WeakApproxConfig::new(ApproxMode::TruncationLadder(vec![1.0, 2.0, 4.0, 8.0]), BaseRun::Wave(base));
    cfg.truncation_c = Some(spec.h21_constant());
    let out = run_ladder(&cfg).unwrap();
    let rep = &out.report;
    let l2: Vec<f64> = rep.members.iter().map(|m| m.l2_discrepancy).collect();
    let l1: Vec<f64> = rep.members.iter().map(|m| m.l1_force_discrepancy).collect();
    let ex: Vec<f64> = rep.members.iter().map(|m| m.energy_excess).collect();
    v.check(rep.l2_monotone, format!("L2 discrepancy {} non-increasing in k", sci(&l2)));
    v.check(rep.l1_monotone, format!("L1 force discrepancy {} non-increasing in k", sci(&l1)));
    v.check(
        rep.members.iter().all(|m| m.energy_ok),
        format!("energy excess {} (< {ENERGY_TOL:e})", sci(&ex)),
    );
    for m in &rep.members {
        if let Some((a, b)) = m.abscissae {
            v.info(format!("k={}: window ({a:.4}, {b:.4})", m.value));
        }
    }
    for f in &rep.flagged {
        v.info(format!("flag: {f}"));
    }
    let mut c = wave_cfg(&spec, 3, 16, 8.0, 1.0, 0.5, WaveData::bump(1.0, 1.0));
    c.dt = cfl_bound(&c.grid);
    c.stride = 1;
    let run = wave::run(&c).unwrap();
    let fit = uniform_integrability_probe(&run, &spec, 2.0, 1000, 7, 10.0).unwrap();
    v.check(
        fit.passes && !fit.vacuous,
        format!("d=3 integrability slope {:.3} (>= {:.3}, eta {})", fit.slope, fit.threshold, fit.eta),
    );
    v
}

fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn cli(out: &Path, args: &[&str]) -> (i32, String) {
    let mut c = Command::new(env!("CARGO_BIN_EXE_supercrit"));
    for (k, _) in std::env::vars() {
        if k.starts_with("SUPERCRIT_") {
            c.env_remove(k);
        }
    }
    let o = c.arg("--output").arg(out).args(args).output().unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let runs: [&[&str]; 2] = [
        &["weak-strong", "--nonlinearity", "oscillating_sin:q=1", "--set", "n=64", "--set", "t=0.5"],
        &["check-assumptions", "--nonlinearity", "defocusing_exp:m=1", "--set", "samples=20000", "--set", "radii=1"],
    ];
    for args in runs {
        let (c1, s1) = cli(p, args);
        let first = payload(&p.join(s1.split_whitespace().next().unwrap_or("")));
        let (c2, s2) = cli(p, &[&["--jobs", "1"], args].concat());
        let second = payload(&p.join(s2.split_whitespace().next().unwrap_or("")));
        v.check(
            c1 == 0 && c1 == c2 && s1 == s2 && !first.is_empty() && first == second,
            format!("{}: {} files byte-identical across runs and job counts", args[0], first.len()),
        );
    }
    let text = "[experiment]\nkind = weak-strong\nnonlinearity = defocusing_exp:m=1\n[grid]\nn = 64\n";
    let cfg = parse_config(text).unwrap();
    v.check(parse_config(&cfg.serialize()).unwrap() == cfg, "config serialize/parse round trip".into());
    let cases: [(&[&str], i32); 4] = [
        (&["simulate-wave", "--nonlinearity", "linear", "--set", "n=64"], 0),
        (&["simulate-wave", "--nonlinearity", "linear", "--set", "n=100"], 2),
        (&["simulate-wave", "--nonlinearity", "defocusing_exp:m=2", "--set", "amplitude=6", "--set", "n=64"], 3),
        (&["simulate-wave", "--nonlinearity", "linear", "--set", "radius=3.9", "--set", "n=64"], 4),
    ];
    let codes: Vec<i32> = cases.iter().map(|(a, _)| cli(p, a).0).collect();
    let want: Vec<i32> = cases.iter().map(|(_, c)| *c).collect();
    v.check(codes == want, format!("exit codes {codes:?} (expected {want:?})"));
    v
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("algebraic identities", algebraic_identities),
        ("assumption suite", assumption_suite),
        ("conservation", conservation),
        ("weak identity", weak_identity),
        ("energy expansion", expansion),
        ("gronwall epsilon-ladders", epsilon_ladders),
        ("truncation ladder", appendix),
        ("determinism and exit codes", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {} {name} ({secs:.1}s)", if v.pass { "PASS" } else { "FAIL" }, i + 1);
        for n in &v.notes {
            println!("    {n}");
        }
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
