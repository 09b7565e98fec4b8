//! Sampled verification of the structural inequalities and estimation of
//! their constants.
//!
//! Every constant is a supremum of a ratio `numerator / denominator` over a
//! box of `(u, w)` pairs. The box is covered by a quasi-uniform grid plus
//! seeded pseudo-random pairs. An estimate is accepted only when it is stable
//! under sample doubling and does not keep growing as the `w`-box doubles;
//! it is then polished by a local pattern search and re-checked on a fresh
//! sample.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{two_star, AssumptionClass, NlsNonlinearitySpec, NonlinearitySpec, Selection};
use crate::sampling::stream;

/// Absolute slack for sampled `>= 0` assertions.
pub const SLACK: f64 = 1e-9;
/// Relative headroom granted to an estimated constant on re-verification.
pub const VERIFY_HEADROOM: f64 = 1e-6;
/// Relative change tolerated under sample doubling.
pub const STABILITY_TOL: f64 = 0.05;
/// Largest convexity shift searched for.
pub const MAX_SHIFT: f64 = 1e6;
/// Smallest `|w|` sampled by the sup estimators; below it the remainders
/// are dominated by cancellation error.
pub const W_FLOOR: f64 = 1e-3;
/// Bisection resolution for the convexity shift.
pub const SHIFT_RESOLUTION: f64 = 1e-3;
/// Radius of the complex disk used by the cancellation check.
pub const CANCELLATION_DISK: f64 = 5.0;

const MAX_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Pseudo-random pairs in the coarse pass (the fine pass doubles this).
    pub random: usize,
    /// Grid points per axis in the coarse pass.
    pub grid: usize,
    pub seed: u64,
    /// Exponent standing in for `2*` when `d <= 2`.
    pub q_max: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self { random: 1_000_000, grid: 201, seed: 0x5EED, q_max: 10.0 }
    }
}

impl SamplePlan {
    pub fn with_random(mut self, random: usize) -> Self {
        self.random = random;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `2*` in dimension `d`, or `q_max` where it is infinite.
    pub fn critical_exponent(&self, d: usize) -> f64 {
        let e = two_star(d);
        if e.is_finite() { e } else { self.q_max }
    }
}

/// A sample point: real for wave nonlinearities, complex (re, im) for NLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub name: String,
    #[serde(rename = "R")]
    pub r: f64,
    pub value: f64,
    pub samples: usize,
    pub worst_pair: (Point, Point),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Inequality {
    H1,
    H2,
    H21,
    H11,
    H22,
    Coercive,
    Nls1,
    Nls2,
    Gronw4,
    H222,
    Gronw6,
    ClaimA,
    /// `F_k(u) >= -C|u|²` for the truncated potentials.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub u: Point,
    pub w: Point,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: Inequality,
    pub holds: bool,
    pub constant: ConstantEstimate,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InequalityReport {
    fn new(inequality: Inequality, constant: ConstantEstimate, violations: Vec<Violation>) -> Self {
        Self { inequality, holds: violations.is_empty(), constant, violations, note: None }
    }

    fn failed(inequality: Inequality, name: &str, r: f64, err: &Error) -> Self {
        let value = match err {
            Error::Unstable { fine, .. } => *fine,
            _ => f64::INFINITY,
        };
        Self {
            inequality,
            holds: false,
            constant: ConstantEstimate {
                name: name.to_string(),
                r,
                value,
                samples: 0,
                worst_pair: (Point::Real(f64::NAN), Point::Real(f64::NAN)),
            },
            violations: Vec::new(),
            note: Some(err.to_string()),
        }
    }
}

/// Whether a violation means the left side fell below or rose above the bound.
#[derive(Clone, Copy)]
enum Sense {
    /// `lhs >= -C·den`, stored as numerator `-lhs`.
    AtLeast,
    /// `lhs <= C·den`, stored as numerator `lhs`.
    AtMost,
}

/// A sup problem over a box `[lo, hi]^k`. `eval` returns
/// `(numerator, denominator)` or `None` outside the admissible region.
struct SupProblem<'a> {
    name: &'a str,
    lo: Vec<f64>,
    hi: Vec<f64>,
    eval: &'a dyn Fn(&[f64]) -> Option<(f64, f64)>,
    to_pair: &'a dyn Fn(&[f64]) -> (Point, Point),
}

#[derive(Debug, Clone)]
struct SupResult {
    value: f64,
    arg: Vec<f64>,
    samples: usize,
}

impl SupProblem<'_> {
    fn ratio(&self, x: &[f64]) -> Option<f64> {
        let (num, den) = (self.eval)(x)?;
        if den <= 0.0 {
            return None;
        }
        let r = num / den;
        if r.is_nan() { None } else { Some(r) }
    }

    fn consider(&self, x: &[f64], best: &mut SupResult) {
        best.samples += 1;
        if let Some(r) = self.ratio(x) {
            if r > best.value {
                best.value = r;
                best.arg.clear();
                best.arg.extend_from_slice(x);
            }
        }
    }

    fn grid_pass(&self, per_axis: usize, best: &mut SupResult) {
        let k = self.lo.len();
        let total = per_axis.pow(k as u32);
        let mut x = vec![0.0; k];
        for idx in 0..total {
            let mut rem = idx;
            for a in 0..k {
                let j = rem % per_axis;
                rem /= per_axis;
                let t = if per_axis == 1 { 0.5 } else { j as f64 / (per_axis - 1) as f64 };
                x[a] = self.lo[a] + (self.hi[a] - self.lo[a]) * t;
            }
            self.consider(&x, best);
        }
    }

    fn random_pass<R: Rng>(&self, n: usize, rng: &mut R, best: &mut SupResult) {
        let k = self.lo.len();
        let mut x = vec![0.0; k];
        for _ in 0..n {
            for a in 0..k {
                x[a] = rng.gen_range(self.lo[a]..=self.hi[a]);
            }
            self.consider(&x, best);
        }
    }

    /// Coarse and doubled sups, each polished; errors if they disagree by
    /// more than the stability tolerance.
    fn stable_sup(&self, plan: &SamplePlan, label: &str, seeds: &[SupResult]) -> Result<SupResult> {
        let k = self.lo.len();
        let grid = grid_per_axis(plan.grid, k);
        let mut empty = SupResult { value: 0.0, arg: vec![0.0; k], samples: 0 };
        // a valid pair even when nothing beats zero
        empty.arg[k / 2] = W_FLOOR;
        for s in seeds {
            self.consider(&s.arg, &mut empty);
        }
        let mut rng = stream(plan.seed, label);
        let mut coarse = empty.clone();
        self.grid_pass(grid, &mut coarse);
        self.random_pass(plan.random, &mut rng, &mut coarse);
        let mut fine = empty;
        self.grid_pass(2 * grid - 1, &mut fine);
        fine.samples += coarse.samples - grid.pow(k as u32);
        if coarse.value > fine.value {
            fine.value = coarse.value;
            fine.arg = coarse.arg.clone();
        }
        self.random_pass(plan.random, &mut rng, &mut fine);
        let coarse = self.polish(coarse);
        let fine = self.polish(fine);
        if fine.value > 0.0 && (fine.value - coarse.value) > STABILITY_TOL * fine.value {
            return Err(Error::Unstable { name: self.name.to_string(), coarse: coarse.value, fine: fine.value });
        }
        Ok(fine)
    }

    /// Real pairs only: dense grid in `u` (spacing `floor/2`) against
    /// `|w| in {1, 1.5, 2}·floor`.
    fn small_w_scan(&self, r: f64, floor: f64) -> SupResult {
        let n = ((4.0 * r / floor).ceil() as usize).clamp(2, 1 << 18) + 1;
        let mut best = SupResult { value: 0.0, arg: vec![0.0, floor], samples: 0 };
        for i in 0..n {
            let u = -r + 2.0 * r * i as f64 / (n - 1) as f64;
            for m in [1.0, 1.5, 2.0, -1.0, -1.5, -2.0] {
                self.consider(&[u, m * floor], &mut best);
            }
        }
        best
    }

    /// Real pairs only: the edges `u = ±R` against log-spaced `|w|` from the
    /// floor to the box size, both signs.
    fn edge_scan(&self, r: f64, floor: f64, wmax: f64) -> SupResult {
        const N: usize = 20_000;
        let mut best = SupResult { value: 0.0, arg: vec![r, floor], samples: 0 };
        let span = (wmax / floor).ln();
        for i in 0..N {
            let w = floor * (span * i as f64 / (N - 1) as f64).exp();
            for (u, sign) in [(r, 1.0), (r, -1.0), (-r, 1.0), (-r, -1.0)] {
                self.consider(&[u, sign * w], &mut best);
            }
        }
        best
    }

    /// Local pattern search from the best sample.
    fn polish(&self, mut best: SupResult) -> SupResult {
        if best.value <= 0.0 {
            return best;
        }
        let k = self.lo.len();
        let mut step: Vec<f64> = (0..k).map(|a| (self.hi[a] - self.lo[a]) * 1e-3).collect();
        let min_step: Vec<f64> = (0..k).map(|a| (self.hi[a] - self.lo[a]) * 1e-13).collect();
        let mut x = best.arg.clone();
        for _ in 0..4000 {
            let mut improved = false;
            for a in 0..k {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[a] = (y[a] + dir * step[a]).clamp(self.lo[a], self.hi[a]);
                    if let Some(r) = self.ratio(&y) {
                        if r > best.value {
                            best.value = r;
                            x = y;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                let mut all_small = true;
                for a in 0..k {
                    step[a] *= 0.5;
                    all_small &= step[a] < min_step[a];
                }
                if all_small {
                    break;
                }
            }
        }
        best.arg = x;
        best
    }

    /// Fresh-sample check of `num <= C·den` (with headroom and slack).
    fn verify(&self, c: f64, sense: Sense, plan: &SamplePlan, label: &str) -> Vec<Violation> {
        let k = self.lo.len();
        let mut rng = stream(plan.seed, &format!("{label}:verify"));
        let mut x = vec![0.0; k];
        let mut out = Vec::new();
        for _ in 0..plan.random {
            for a in 0..k {
                x[a] = rng.gen_range(self.lo[a]..=self.hi[a]);
            }
            let Some((num, den)) = (self.eval)(&x) else { continue };
            if num.is_nan() {
                continue;
            }
            let bound = c * (1.0 + VERIFY_HEADROOM) * den + SLACK;
            if num > bound {
                let (u, w) = (self.to_pair)(&x);
                let (lhs, rhs) = match sense {
                    Sense::AtLeast => (-num, -c * den),
                    Sense::AtMost => (num, c * den),
                };
                out.push(Violation { u, w, lhs, rhs });
                if out.len() >= MAX_VIOLATIONS {
                    break;
                }
            }
        }
        out
    }
}

fn grows_monotonically(sups: &[f64]) -> bool {
    sups.windows(2).all(|p| p[1] > 0.0 && p[1] > p[0] * (1.0 + STABILITY_TOL))
}

fn grid_per_axis(grid: usize, k: usize) -> usize {
    // keep the grid at roughly grid² points whatever the dimension
    let total = (grid * grid) as f64;
    (total.powf(1.0 / k as f64).round() as usize).max(3)
}

/// Runs the sup estimate on boxes `w0, 2w0, 4w0, 8w0`; fails when the sup
/// grows by more than the stability tolerance on every doubling. The same
/// test is applied to three successive halvings of the `|w|` floor: for real
/// pairs by a dense scan in `u` at `|w| ~ floor`, for complex pairs by
/// re-polishing the worst pair.
fn estimate_with_box_doubling(
    name: &str,
    r: f64,
    w0: f64,
    plan: &SamplePlan,
    build: &dyn Fn(f64, f64) -> SupProblemOwned,
    real: bool,
) -> Result<(SupResult, SupProblemOwned)> {
    let mut seed = None;
    if real {
        let mut chain = Vec::new();
        for j in 0..4 {
            let floor = W_FLOOR / f64::powi(2.0, j);
            let thin = build(2.0 * floor, floor);
            let res = thin.with(|p| p.polish(p.small_w_scan(r, floor)));
            chain.push(res.value);
            if j == 0 {
                seed = Some(res);
            }
        }
        if grows_monotonically(&chain) {
            return Err(Error::Unbounded { name: name.to_string() });
        }
    }
    let mut sups = Vec::new();
    let mut best: Option<(SupResult, SupProblemOwned, f64)> = None;
    for j in 0..4 {
        let w = w0 * f64::powi(2.0, j);
        let owned = build(w, W_FLOOR);
        let label = format!("{name}:R={r}:W={w}");
        let mut seeds: Vec<SupResult> = seed.iter().cloned().collect();
        if real {
            seeds.push(owned.with(|p| p.polish(p.edge_scan(r, W_FLOOR, w))));
        }
        let res = owned.with(|p| p.stable_sup(plan, &label, &seeds))?;
        sups.push(res.value);
        let replace = best.as_ref().map_or(true, |(b, _, _)| res.value > b.value);
        if replace {
            best = Some((res, owned, w));
        }
    }
    if grows_monotonically(&sups) {
        return Err(Error::Unbounded { name: name.to_string() });
    }
    let (mut res, mut owned, w) = best.expect("four boxes evaluated");
    if !real {
        let mut chain = vec![res.value];
        for j in 1..4 {
            let refined = build(w, W_FLOOR / f64::powi(2.0, j));
            let next = refined.with(|p| p.polish(res.clone()));
            chain.push(next.value);
            res = next;
            owned = refined;
        }
        if grows_monotonically(&chain) {
            return Err(Error::Unbounded { name: name.to_string() });
        }
    }
    Ok((res, owned))
}

/// Owns the closures backing a [`SupProblem`].
struct SupProblemOwned {
    name: String,
    lo: Vec<f64>,
    hi: Vec<f64>,
    eval: Box<dyn Fn(&[f64]) -> Option<(f64, f64)>>,
    to_pair: Box<dyn Fn(&[f64]) -> (Point, Point)>,
}

impl SupProblemOwned {
    fn with<T>(&self, f: impl FnOnce(&SupProblem<'_>) -> T) -> T {
        let p = SupProblem {
            name: &self.name,
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            eval: self.eval.as_ref(),
            to_pair: self.to_pair.as_ref(),
        };
        f(&p)
    }
}

fn real_pair(x: &[f64]) -> (Point, Point) {
    (Point::Real(x[0]), Point::Real(x[1]))
}

fn complex_pair(x: &[f64]) -> (Point, Point) {
    (Point::Complex([x[0], x[1]]), Point::Complex([x[2], x[3]]))
}

fn finish(name: &str, r: f64, res: &SupResult, to_pair: &dyn Fn(&[f64]) -> (Point, Point)) -> ConstantEstimate {
    ConstantEstimate {
        name: name.to_string(),
        r,
        value: res.value.max(0.0),
        samples: res.samples,
        worst_pair: to_pair(&res.arg),
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Invalid(format!("window radius R must be positive, got {r}")));
    }
    Ok(())
}

fn remainder_problem(spec: &NonlinearitySpec, r: f64, w: f64, floor: f64) -> SupProblemOwned {
    let s = spec.clone();
    SupProblemOwned {
        name: "H11".into(),
        lo: vec![-r, -w],
        hi: vec![r, w],
        eval: Box::new(move |x| {
            let (u, w) = (x[0], x[1]);
            if w.abs() < floor {
                return None;
            }
            let rem = s.potential(u + w) - s.potential(u) - s.force(u) * w;
            Some((-rem, w * w))
        }),
        to_pair: Box::new(real_pair),
    }
}

/// `C(R)` of `F(u+w) - F(u) - f(u)w >= -C(R)|w|²` for `|u| <= R`.
pub fn estimate_remainder_constant(spec: &NonlinearitySpec, r: f64, plan: &SamplePlan) -> Result<ConstantEstimate> {
    Ok(remainder_report(spec, r, plan)?.constant)
}

fn remainder_report(spec: &NonlinearitySpec, r: f64, plan: &SamplePlan) -> Result<InequalityReport> {
    check_radius(r)?;
    let build = |w: f64, floor: f64| remainder_problem(spec, r, w, floor);
    let (res, owned) = estimate_with_box_doubling("H11", r, 8.0 * r, plan, &build, true)?;
    let est = finish("H11", r, &res, &real_pair);
    let violations = owned.with(|p| p.verify(est.value, Sense::AtLeast, plan, &format!("H11:R={r}")));
    Ok(InequalityReport::new(Inequality::H11, est, violations))
}

fn taylor_problem(spec: &NonlinearitySpec, r: f64, w: f64, floor: f64, crit: f64) -> SupProblemOwned {
    let s = spec.clone();
    SupProblemOwned {
        name: "H22".into(),
        lo: vec![-r, -w],
        hi: vec![r, w],
        eval: Box::new(move |x| {
            let (u, w) = (x[0], x[1]);
            if w.abs() < floor {
                return None;
            }
            let rem = s.force(u + w) - s.force(u) - s.force_prime(u) * w;
            Some((rem.abs(), w * w + w.abs().powf(crit)))
        }),
        to_pair: Box::new(real_pair),
    }
}

/// `C(R)` of `|f(u+w) - f(u) - f'(u)w| <= C(R)(|w|² + |w|^{2*})` for `|u| <= R`.
pub fn estimate_taylor_constant(
    spec: &NonlinearitySpec,
    r: f64,
    d: usize,
    plan: &SamplePlan,
) -> Result<ConstantEstimate> {
    Ok(taylor_report(spec, r, d, plan)?.constant)
}

fn taylor_report(spec: &NonlinearitySpec, r: f64, d: usize, plan: &SamplePlan) -> Result<InequalityReport> {
    check_radius(r)?;
    let g = spec
        .growth()
        .filter(|_| spec.class().has_growth_bound())
        .ok_or_else(|| Error::Invalid(format!("{} carries no polynomial growth bound", spec.name())))?;
    if d >= 3 {
        crate::nonlinearity::check_subcritical(g.q, d)?;
    }
    let crit = plan.critical_exponent(d);
    let build = |w: f64, floor: f64| taylor_problem(spec, r, w, floor, crit);
    let (res, owned) = estimate_with_box_doubling("H22", r, 8.0 * r, plan, &build, true)?;
    let est = finish("H22", r, &res, &real_pair);
    let violations = owned.with(|p| p.verify(est.value, Sense::AtMost, plan, &format!("H22:R={r}")));
    Ok(InequalityReport::new(Inequality::H22, est, violations))
}

/// Smallest `(F(u+w) - F(u) - f(u)w)/w²` over `|u| <= R`, `0 < |w| <= 1`,
/// against the Taylor bound `½ inf_{|s| <= R+1} F''(s)`.
pub fn taylor_lower_bound(spec: &NonlinearitySpec, r: f64, n: usize) -> (f64, f64) {
    let mut min_ratio = f64::INFINITY;
    for i in 0..n {
        let u = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let w = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            if w == 0.0 {
                continue;
            }
            let rem = spec.potential(u + w) - spec.potential(u) - spec.force(u) * w;
            min_ratio = min_ratio.min(rem / (w * w));
        }
    }
    let m = 20 * n;
    let inf_fpp = (0..=m)
        .map(|i| spec.force_prime(-(r + 1.0) + 2.0 * (r + 1.0) * i as f64 / m as f64))
        .fold(f64::INFINITY, f64::min);
    (min_ratio, 0.5 * inf_fpp)
}

/// Dense one-dimensional sample of `[-R, R]`: a uniform grid plus seeded
/// random points.
fn line_sample(r: f64, plan: &SamplePlan, label: &str, n: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..n).map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64).collect();
    let mut rng = stream(plan.seed, label);
    pts.extend((0..n).map(|_| rng.gen_range(-r..=r)));
    pts
}

/// Points per class-check sample.
pub const CLASS_SAMPLE_POINTS: usize = 10_000;

/// Checks the defining inequality of a wave spec's class on `[-R, R]`.
pub fn check_class(spec: &NonlinearitySpec, r: f64, plan: &SamplePlan) -> Vec<InequalityReport> {
    let pts = line_sample(r, plan, &format!("class:{}:R={r}", spec.name()), CLASS_SAMPLE_POINTS);
    let n = pts.len();
    let mut out = Vec::new();
    match spec.class() {
        AssumptionClass::Defocusing => {
            // exact: no slack
            let mut worst = (f64::INFINITY, 0.0);
            let mut violations = Vec::new();
            for &s in &pts {
                let v = s * spec.force(s);
                if v < worst.0 {
                    worst = (v, s);
                }
                if v < 0.0 && violations.len() < MAX_VIOLATIONS {
                    violations.push(Violation { u: Point::Real(s), w: Point::Real(0.0), lhs: v, rhs: 0.0 });
                }
            }
            out.push(InequalityReport::new(
                Inequality::H1,
                ConstantEstimate {
                    name: "H1".into(),
                    r,
                    value: worst.0,
                    samples: n,
                    worst_pair: (Point::Real(worst.1), Point::Real(0.0)),
                },
                violations,
            ));
            // (H1) implies the lower bound with C = 0
            out.push(pointwise_report(Inequality::H21, "H21", r, &pts, 0.0, |s| (-spec.potential(s), s * s)));
        }
        AssumptionClass::Oscillating => {
            let g = spec.growth().expect("oscillating specs carry a growth bound");
            out.push(pointwise_report(Inequality::H2, "H2", r, &pts, g.c, |s| {
                (spec.force(s).abs(), s.abs().powf(g.q))
            }));
            out.push(pointwise_report(Inequality::H21, "H21", r, &pts, spec.h21_constant(), |s| {
                (-spec.potential(s), s * s)
            }));
        }
        _ => {}
    }
    out
}

/// Truncation heights used by the lower-bound check.
pub const LOWER_LADDER: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Checks `F_k(u) >= -C|u|²` with the (H21) constant for the truncations at
/// heights `ks`, sampling far enough out to cover the linear tails.
pub fn check_truncation_lower(spec: &NonlinearitySpec, ks: &[f64], r: f64, plan: &SamplePlan) -> Result<InequalityReport> {
    let c = spec.h21_constant();
    let mut worst = (0.0_f64, 0.0);
    let mut violations = Vec::new();
    let mut n = 0;
    for &k in ks {
        let level = crate::nonlinearity::find_truncation_abscissae(spec, k, c)?;
        let trunc = spec.truncate(level)?;
        let span = r.max(4.0 * k);
        let pts = line_sample(span, plan, &format!("lower:{}:k={k}", spec.name()), CLASS_SAMPLE_POINTS);
        for &u in &pts {
            n += 1;
            let fk = trunc.potential(u);
            if u != 0.0 && -fk / (u * u) > worst.0 {
                worst = (-fk / (u * u), u);
            }
            if fk < -c * u * u - SLACK && violations.len() < MAX_VIOLATIONS {
                violations.push(Violation { u: Point::Real(u), w: Point::Real(k), lhs: fk, rhs: -c * u * u });
            }
        }
    }
    Ok(InequalityReport::new(
        Inequality::Lower,
        ConstantEstimate {
            name: "lower".into(),
            r,
            value: worst.0,
            samples: n,
            worst_pair: (Point::Real(worst.1), Point::Real(0.0)),
        },
        violations,
    ))
}

/// Reports `num(s) <= C·den(s)` at every point; the constant estimate is the
/// largest observed ratio.
fn pointwise_report(
    inequality: Inequality,
    name: &str,
    r: f64,
    pts: &[f64],
    c: f64,
    f: impl Fn(f64) -> (f64, f64),
) -> InequalityReport {
    let mut worst = (0.0_f64, 0.0);
    let mut violations = Vec::new();
    for &s in pts {
        let (num, den) = f(s);
        if den > 0.0 && num / den > worst.0 {
            worst = (num / den, s);
        }
        if num > c * den + SLACK && violations.len() < MAX_VIOLATIONS {
            violations.push(Violation { u: Point::Real(s), w: Point::Real(0.0), lhs: num, rhs: c * den });
        }
    }
    InequalityReport::new(
        inequality,
        ConstantEstimate {
            name: name.into(),
            r,
            value: worst.0,
            samples: pts.len(),
            worst_pair: (Point::Real(worst.1), Point::Real(0.0)),
        },
        violations,
    )
}

/// Density floor of the restricted coercivity check. Near `s = 0` the
/// literal ratio `sqrt(s)F'(s)/F(s)` behaves like `1/sqrt(s)` for any `F`
/// with `F'(0) > 0`, so no finite `C` exists there.
pub const COERCIVE_DENSITY_FLOOR: f64 = 0.5;

/// Checks `0 <= sqrt(s) F'(s) <= C F(s)` at `s = u²/2` for sampled
/// `|u| <= R` with `s >= s_floor`.
pub fn check_coercive(spec: &NlsNonlinearitySpec, r: f64, s_floor: f64, plan: &SamplePlan) -> InequalityReport {
    let pts = line_sample(r, plan, &format!("coercive:{}:R={r}", spec.name()), CLASS_SAMPLE_POINTS);
    let c = spec.coercivity_constant();
    let mut worst = (0.0_f64, 0.0);
    let mut violations = Vec::new();
    let mut n = 0;
    for &u in &pts {
        let s = 0.5 * u * u;
        if s < s_floor {
            continue;
        }
        n += 1;
        let lhs = s.sqrt() * spec.density_derivative(s);
        let rhs = c * spec.density_potential(s);
        let ratio = spec.coercivity_ratio(s);
        if ratio > worst.0 {
            worst = (ratio, u);
        }
        let bad = lhs < -SLACK || lhs > rhs + SLACK;
        if bad && violations.len() < MAX_VIOLATIONS {
            violations.push(Violation { u: Point::Real(u), w: Point::Real(0.0), lhs, rhs });
        }
    }
    InequalityReport::new(
        Inequality::Coercive,
        ConstantEstimate {
            name: "coercive".into(),
            r,
            value: worst.0,
            samples: n,
            worst_pair: (Point::Real(worst.1), Point::Real(0.0)),
        },
        violations,
    )
}

/// Growth and lower bounds for the subcritical NLS class.
pub fn check_nls_growth(spec: &NlsNonlinearitySpec, r: f64, plan: &SamplePlan) -> Vec<InequalityReport> {
    let pts = line_sample(r, plan, &format!("nlsclass:{}:R={r}", spec.name()), CLASS_SAMPLE_POINTS);
    let mut out = Vec::new();
    if let Some(g) = spec.growth() {
        out.push(pointwise_report(Inequality::Nls1, "NLS1", r, &pts, g.c, |u| {
            (spec.force(Complex64::new(u, 0.0)).norm(), u.abs().powf(g.q))
        }));
    }
    out.push(pointwise_report(Inequality::Nls2, "NLS2", r, &pts, spec.lower_constant(), |u| {
        (-spec.potential(Complex64::new(u, 0.0)), u * u)
    }));
    out
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    (a * b.conj()).re
}

/// Checks `(f(u) - f(u+w))·(iw) = f(u)·(iw) + f(u+w)·(iu)` with
/// `a·b = Re(a b̄)` on random pairs from the disk `|z| <= 5`.
pub fn verify_nls_cancellation(spec: &NlsNonlinearitySpec, samples: usize, seed: u64) -> Result<InequalityReport> {
    if samples == 0 {
        return Err(Error::Invalid("cancellation check needs at least one sample".into()));
    }
    let mut rng = stream(seed, &format!("gronw4:{}", spec.name()));
    let i = Complex64::new(0.0, 1.0);
    let mut worst = (0.0_f64, Complex64::default(), Complex64::default());
    let mut violations = Vec::new();
    for _ in 0..samples {
        let u = disk_point(&mut rng, CANCELLATION_DISK);
        let w = disk_point(&mut rng, CANCELLATION_DISK);
        let (res, lhs, rhs) = cancellation_residual(spec, u, w);
        if res > worst.0 {
            worst = (res, u, w);
        }
        if res > 1e-12 && violations.len() < MAX_VIOLATIONS {
            violations.push(Violation {
                u: Point::Complex([u.re, u.im]),
                w: Point::Complex([w.re, w.im]),
                lhs,
                rhs,
            });
        }
    }
    let _ = i;
    Ok(InequalityReport::new(
        Inequality::Gronw4,
        ConstantEstimate {
            name: "Gronw4 relative residual".into(),
            r: CANCELLATION_DISK,
            value: worst.0,
            samples,
            worst_pair: (Point::Complex([worst.1.re, worst.1.im]), Point::Complex([worst.2.re, worst.2.im])),
        },
        violations,
    ))
}

/// Relative residual of the cancellation identity at one pair, with both
/// sides.
pub fn cancellation_residual(spec: &NlsNonlinearitySpec, u: Complex64, w: Complex64) -> (f64, f64, f64) {
    let i = Complex64::new(0.0, 1.0);
    let fu = spec.force(u);
    let fuw = spec.force(u + w);
    let lhs = dot(fu - fuw, i * w);
    let a = dot(fu, i * w);
    let b = dot(fuw, i * u);
    let rhs = a + b;
    // size of the individual products, which bounds their rounding error
    let scale = fu.norm() * w.norm() + fuw.norm() * (u.norm() + w.norm());
    let res = if scale == 0.0 { (lhs - rhs).abs() } else { (lhs - rhs).abs() / scale };
    (res, lhs, rhs)
}

fn disk_point<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let rho = radius * rng.gen::<f64>().sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(rho, theta)
}

fn complex_box(r: f64, w: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![-r, -r, -w, -w], vec![r, r, w, w])
}

fn in_disks(x: &[f64], r: f64, w: f64) -> Option<(Complex64, Complex64)> {
    let u = Complex64::new(x[0], x[1]);
    let v = Complex64::new(x[2], x[3]);
    if u.norm() > r || v.norm() > w { None } else { Some((u, v)) }
}

/// `C(R)` of `|f(u+w) - f(u) - Df(u)w| <= C(R)(|w|² + |w|^{2*})`, complex.
pub fn estimate_nls_taylor_constant(
    spec: &NlsNonlinearitySpec,
    r: f64,
    d: usize,
    plan: &SamplePlan,
) -> Result<InequalityReport> {
    check_radius(r)?;
    let crit = plan.critical_exponent(d);
    let build = |wmax: f64, floor: f64| {
        let s = spec.clone();
        let (lo, hi) = complex_box(r, wmax);
        SupProblemOwned {
            name: "H222".into(),
            lo,
            hi,
            eval: Box::new(move |x| {
                let (u, w) = in_disks(x, r, wmax)?;
                let n = w.norm();
                if n < floor {
                    return None;
                }
                let rem = s.force(u + w) - s.force(u) - s.force_derivative_apply(u, w);
                Some((rem.norm(), n * n + n.powf(crit)))
            }),
            to_pair: Box::new(complex_pair),
        }
    };
    let (res, owned) = estimate_with_box_doubling("H222", r, 8.0 * r, plan, &build, false)?;
    let est = finish("H222", r, &res, &complex_pair);
    let violations = owned.with(|p| p.verify(est.value, Sense::AtMost, plan, &format!("H222:R={r}")));
    Ok(InequalityReport::new(Inequality::H222, est, violations))
}

/// `C(R)` of `|(f(u) - f(u+w))·(iw)| <= C(R)(|w|² + |w|^{2*})`.
pub fn estimate_gronw6_constant(
    spec: &NlsNonlinearitySpec,
    r: f64,
    d: usize,
    plan: &SamplePlan,
) -> Result<InequalityReport> {
    check_radius(r)?;
    let crit = plan.critical_exponent(d);
    let i = Complex64::new(0.0, 1.0);
    let build = |wmax: f64, floor: f64| {
        let s = spec.clone();
        let (lo, hi) = complex_box(r, wmax);
        SupProblemOwned {
            name: "Gronw6".into(),
            lo,
            hi,
            eval: Box::new(move |x| {
                let (u, w) = in_disks(x, r, wmax)?;
                let n = w.norm();
                if n < floor {
                    return None;
                }
                let v = dot(s.force(u) - s.force(u + w), i * w);
                Some((v.abs(), n * n + n.powf(crit)))
            }),
            to_pair: Box::new(complex_pair),
        }
    };
    let (res, owned) = estimate_with_box_doubling("Gronw6", r, 8.0 * r, plan, &build, false)?;
    let est = finish("Gronw6", r, &res, &complex_pair);
    let violations = owned.with(|p| p.verify(est.value, Sense::AtMost, plan, &format!("Gronw6:R={r}")));
    Ok(InequalityReport::new(Inequality::Gronw6, est, violations))
}

/// `F(|u+w|²/2) - F(|u|²/2) - f(u)·w`.
pub fn convexity_remainder(spec: &NlsNonlinearitySpec, u: Complex64, w: Complex64) -> f64 {
    spec.potential(u + w) - spec.potential(u) - dot(spec.force(u), w)
}

/// Outcome of the shift search: the smallest admissible `A` on the sample
/// and the bisection bracket that located it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub estimate: ConstantEstimate,
    pub bracket: (f64, f64),
    pub w_box: f64,
}

/// Smallest `A >= 0` with `F(|u+w|²/2) - F(|u|²/2) - f(u)·w + (A+1)|w|² >= 0`
/// on a dense complex sample with `|u| <= R`; doubles the `w`-box until the
/// shift is stable.
pub fn find_convexity_shift(spec: &NlsNonlinearitySpec, r: f64, plan: &SamplePlan) -> Result<ShiftEstimate> {
    check_radius(r)?;
    if !matches!(spec.class(), AssumptionClass::NlsCoercive | AssumptionClass::NlsSubcritGrowth) {
        return Err(Error::Invalid(format!("{} is not an NLS nonlinearity", spec.name())));
    }
    let mut prev: Option<ShiftEstimate> = None;
    let mut wmax = 2.0 * r;
    for _ in 0..8 {
        let cur = shift_on_box(spec, r, wmax, plan)?;
        if let Some(p) = &prev {
            let a0 = p.estimate.value;
            let a1 = cur.estimate.value;
            if a1 <= a0 * (1.0 + STABILITY_TOL) + SHIFT_RESOLUTION {
                return Ok(if a1 >= a0 { cur } else { p.clone() });
            }
        }
        prev = Some(cur);
        wmax *= 2.0;
    }
    Err(Error::Unbounded { name: "ClaimA".into() })
}

fn shift_on_box(spec: &NlsNonlinearitySpec, r: f64, wmax: f64, plan: &SamplePlan) -> Result<ShiftEstimate> {
    let mut rng = stream(plan.seed, &format!("claimA:{}:R={r}:W={wmax}", spec.name()));
    let n = plan.random;
    // (remainder, |w|², u, w)
    let mut rows: Vec<(f64, f64, Complex64, Complex64)> = Vec::with_capacity(n + 1);
    for _ in 0..n {
        let u = disk_point(&mut rng, r);
        let w = disk_point(&mut rng, wmax);
        let rem = convexity_remainder(spec, u, w);
        if rem.is_finite() {
            rows.push((rem, w.norm_sqr(), u, w));
        }
    }
    let min_q = |a: f64| rows.iter().map(|(rem, w2, _, _)| rem + (a + 1.0) * w2).fold(f64::INFINITY, f64::min);
    let admissible = |a: f64| min_q(a) >= -SLACK;
    if !admissible(MAX_SHIFT) {
        return Err(Error::NoShift { max: MAX_SHIFT });
    }
    let (mut lo, mut hi) = (0.0, MAX_SHIFT);
    if admissible(0.0) {
        hi = 0.0;
    } else {
        while hi - lo > SHIFT_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if admissible(mid) { hi = mid } else { lo = mid }
        }
    }
    // exact binding ratio behind the bisection
    let mut worst = (f64::NEG_INFINITY, Complex64::default(), Complex64::default());
    for (rem, w2, u, w) in &rows {
        if *w2 > 0.0 {
            let ratio = -rem / w2 - 1.0;
            if ratio > worst.0 {
                worst = (ratio, *u, *w);
            }
        }
    }
    let value = worst.0.max(0.0);
    Ok(ShiftEstimate {
        estimate: ConstantEstimate {
            name: "A".into(),
            r,
            value,
            samples: rows.len(),
            worst_pair: (Point::Complex([worst.1.re, worst.1.im]), Point::Complex([worst.2.re, worst.2.im])),
        },
        bracket: (lo, hi),
        w_box: wmax,
    })
}

fn shift_report(spec: &NlsNonlinearitySpec, r: f64, plan: &SamplePlan) -> Result<InequalityReport> {
    let shift = find_convexity_shift(spec, r, plan)?;
    let a = shift.bracket.1;
    let mut rng = stream(plan.seed, &format!("claimA:{}:R={r}:verify", spec.name()));
    let mut violations = Vec::new();
    for _ in 0..plan.random {
        let u = disk_point(&mut rng, r);
        let w = disk_point(&mut rng, shift.w_box);
        let rem = convexity_remainder(spec, u, w);
        let q = rem + (a + 1.0) * w.norm_sqr();
        if q < -SLACK && violations.len() < MAX_VIOLATIONS {
            violations.push(Violation {
                u: Point::Complex([u.re, u.im]),
                w: Point::Complex([w.re, w.im]),
                lhs: rem,
                rhs: -(a + 1.0) * w.norm_sqr(),
            });
        }
    }
    Ok(InequalityReport::new(Inequality::ClaimA, shift.estimate, violations))
}

/// Default radii for the class checks.
pub const CLASS_RADII: [f64; 3] = [1.0, 2.0, 4.0];

/// Runs every verifier applicable to the selection's class at radius `r`
/// in dimension `d`. Estimation failures are reported, not raised.
pub fn classify(selection: &Selection, r: f64, d: usize, plan: &SamplePlan) -> Vec<InequalityReport> {
    let mut out = Vec::new();
    let mut push = |ineq: Inequality, name: &str, res: Result<InequalityReport>| match res {
        Ok(rep) => out.push(rep),
        Err(e) => out.push(InequalityReport::failed(ineq, name, r, &e)),
    };
    match selection {
        Selection::Wave(spec) => {
            for rep in check_class(spec, r, plan) {
                push(rep.inequality, "", Ok(rep));
            }
            if spec.class() == AssumptionClass::Oscillating && !spec.is_truncated() {
                push(Inequality::Lower, "lower", check_truncation_lower(spec, &LOWER_LADDER, r, plan));
            }
            push(Inequality::H11, "H11", remainder_report(spec, r, plan));
            if spec.class() == AssumptionClass::Oscillating {
                push(Inequality::H22, "H22", taylor_report(spec, r, d, plan));
            }
        }
        Selection::Nls(spec) => {
            match spec.class() {
                AssumptionClass::NlsCoercive => {
                    push(Inequality::Coercive, "", Ok(check_coercive(spec, r, 0.0, plan)));
                }
                _ => {
                    for rep in check_nls_growth(spec, r, plan) {
                        push(rep.inequality, "", Ok(rep));
                    }
                }
            }
            push(Inequality::Gronw4, "Gronw4", verify_nls_cancellation(spec, plan.random.min(100_000), plan.seed));
            if spec.class() == AssumptionClass::NlsSubcritGrowth {
                push(Inequality::H222, "H222", estimate_nls_taylor_constant(spec, r, d, plan));
                push(Inequality::Gronw6, "Gronw6", estimate_gronw6_constant(spec, r, d, plan));
            }
            push(Inequality::ClaimA, "A", shift_report(spec, r, plan));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{parse_selection, NlsCustomLaw};

    fn plan() -> SamplePlan {
        SamplePlan { random: 20_000, grid: 61, ..SamplePlan::default() }
    }

    fn wave(name: &str) -> NonlinearitySpec {
        match parse_selection(name).unwrap() {
            Selection::Wave(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defocusing_remainder_is_nonnegative() {
        let s = wave("defocusing_exp:m=1");
        let c = estimate_remainder_constant(&s, 1.0, &plan()).unwrap();
        assert_eq!(c.value, 0.0);
        let (min_ratio, half_inf) = taylor_lower_bound(&s, 1.0, 201);
        assert!(half_inf == 1.0 && min_ratio >= half_inf - 1e-9, "{min_ratio} {half_inf}");
    }

    #[test]
    fn pure_power_origin_row_contributes_nothing() {
        let s = wave("pure_power:p=3");
        for w in [-3.0, -0.5, 0.1, 2.0] {
            let rem = s.potential(w) - s.potential(0.0) - s.force(0.0) * w;
            assert!((rem - w.powi(4) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn oscillating_remainder_constant_is_finite_and_reproducible() {
        let s = wave("oscillating_sin:q=1");
        let c = estimate_remainder_constant(&s, 2.0, &plan()).unwrap();
        assert!(c.value.is_finite() && c.value > 0.0);
        let (Point::Real(u), Point::Real(w)) = c.worst_pair else { panic!() };
        let ratio = -(s.potential(u + w) - s.potential(u) - s.force(u) * w) / (w * w);
        assert!(((ratio - c.value) / c.value).abs() < 1e-10);
    }

    #[test]
    fn unbounded_remainder_is_diagnosed() {
        fn potential(u: f64) -> f64 {
            -u.powi(4)
        }
        fn force(u: f64) -> f64 {
            -4.0 * u.powi(3)
        }
        fn force_prime(u: f64) -> f64 {
            -12.0 * u * u
        }
        let s = NonlinearitySpec::custom(
            "focusing",
            crate::nonlinearity::CustomLaw { potential, force, force_prime },
            AssumptionClass::Oscillating,
            None,
            1.0,
        );
        let e = estimate_remainder_constant(&s, 1.0, &plan()).unwrap_err();
        assert!(matches!(e, Error::Unbounded { .. }), "{e}");
    }

    #[test]
    fn taylor_vanishes_at_zero_w() {
        let s = wave("oscillating_sin:q=2");
        for u in [-1.0, 0.0, 0.3] {
            assert_eq!(s.force(u + 0.0) - s.force(u) - s.force_prime(u) * 0.0, 0.0);
        }
    }

    #[test]
    fn taylor_small_w_limit() {
        // remainder / w² -> |f''(u)|/2 as w -> 0
        let s = wave("pure_power:p=2");
        let u = 0.7;
        let w = 1e-4;
        let ratio = (s.force(u + w) - s.force(u) - s.force_prime(u) * w).abs() / (w * w);
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}"); // f = u|u|, f'' = 2 sgn u
        assert!(ratio <= 2.0);
    }

    #[test]
    fn taylor_constant_smooth_oscillating() {
        let s = wave("oscillating_sin:q=2");
        let c = estimate_taylor_constant(&s, 1.0, 3, &plan()).unwrap();
        assert!(c.value.is_finite() && c.value > 0.0);
    }

    #[test]
    fn taylor_constant_requires_growth_bound() {
        let s = wave("defocusing_exp:m=1");
        assert!(estimate_taylor_constant(&s, 1.0, 3, &plan()).is_err());
    }

    #[test]
    fn cancellation_trivial_slices() {
        let spec = NlsNonlinearitySpec::coercive_exp();
        let z = Complex64::new(0.0, 0.0);
        let w = Complex64::new(1.3, -0.4);
        let (res, lhs, rhs) = cancellation_residual(&spec, z, w);
        assert!(res < 1e-15 && lhs.abs() < 1e-12 && rhs.abs() < 1e-12);
        let (res, lhs, rhs) = cancellation_residual(&spec, w, z);
        assert_eq!((res, lhs, rhs), (0.0, 0.0, 0.0));
        let rep = verify_nls_cancellation(&spec, 10_000, 3).unwrap();
        assert!(rep.holds && rep.constant.value < 1e-12);
        assert!(verify_nls_cancellation(&spec, 0, 3).is_err());
    }

    #[test]
    fn convex_potential_needs_no_shift() {
        let spec = NlsNonlinearitySpec::coercive_exp();
        for u in [Complex64::new(0.0, 0.0)] {
            for w in [Complex64::new(2.0, 1.0), Complex64::new(-0.1, 0.0)] {
                assert!(convexity_remainder(&spec, u, w) >= 0.0);
            }
        }
        let a = find_convexity_shift(&spec, 2.0, &plan()).unwrap();
        assert_eq!(a.estimate.value, 0.0);
        assert_eq!(a.bracket.1, 0.0);
    }

    #[test]
    fn bounded_nonconvex_potential_needs_a_shift() {
        fn potential(s: f64) -> f64 {
            (2.0 * s).sin() * 3.0
        }
        fn derivative(s: f64) -> f64 {
            6.0 * (2.0 * s).cos()
        }
        fn second(s: f64) -> f64 {
            -12.0 * (2.0 * s).sin()
        }
        let spec = NlsNonlinearitySpec::custom(
            "wobbly",
            NlsCustomLaw { potential, derivative, second_derivative: second },
            AssumptionClass::NlsSubcritGrowth,
            None,
            0.0,
        );
        let a = find_convexity_shift(&spec, 1.0, &plan()).unwrap();
        assert!(a.estimate.value > 0.0 && a.estimate.value < MAX_SHIFT);
        assert!(a.bracket.1 - a.bracket.0 <= SHIFT_RESOLUTION);
        assert!(a.bracket.1 >= a.estimate.value - 1e-12);
        // w = 0 slice: the quantity vanishes for every A
        assert_eq!(convexity_remainder(&spec, Complex64::new(0.5, 0.1), Complex64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn classify_bundles_reports() {
        let reps = classify(&parse_selection("defocusing_exp:m=1").unwrap(), 1.0, 2, &plan());
        let kinds: Vec<_> = reps.iter().map(|r| r.inequality).collect();
        assert_eq!(kinds, vec![Inequality::H1, Inequality::H21, Inequality::H11]);
        assert!(reps.iter().all(|r| r.holds));

        let reps = classify(&parse_selection("oscillating_sin:q=2").unwrap(), 1.0, 3, &plan());
        let kinds: Vec<_> = reps.iter().map(|r| r.inequality).collect();
        assert_eq!(kinds, vec![Inequality::H2, Inequality::H21, Inequality::Lower, Inequality::H11, Inequality::H22]);

        let reps = classify(&parse_selection("nls_coercive_exp").unwrap(), 1.0, 2, &plan());
        let kinds: Vec<_> = reps.iter().map(|r| r.inequality).collect();
        assert_eq!(kinds, vec![Inequality::Coercive, Inequality::Gronw4, Inequality::ClaimA]);
    }

    #[test]
    fn report_json_shape() {
        let spec = NlsNonlinearitySpec::coercive_exp();
        let rep = verify_nls_cancellation(&spec, 100, 1).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["inequality"], "Gronw4");
        assert!(v["constant"]["R"].is_number() && v["constant"]["value"].is_number());
        assert!(v["violations"].is_array());
    }
}
