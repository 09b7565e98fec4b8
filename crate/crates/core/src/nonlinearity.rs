//! Catalog of supercritical nonlinearities, their Lipschitz truncations and
//! the odd C¹ saturation cutoff.
//!
//! Wave nonlinearities are described by a potential `F`, force `f = F'` and
//! `f' = F''`. Schrödinger nonlinearities are described in the density
//! variable `s = |u|²/2`, with the complex force recovered as
//! `f(u) = u F'(|u|²/2)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NonlinearityError, Result};

/// Which family of structural hypotheses a nonlinearity is declared to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionClass {
    /// Sign condition `u f(u) >= 0`.
    Defocusing,
    /// Polynomial growth `|f(u)| <= C|u|^q` together with `F(u) >= -C|u|²`.
    Oscillating,
    /// `0 <= sqrt(s) F'(s) <= C F(s)`.
    NlsCoercive,
    /// `|f(u)| <= C|u|^q` together with `F(|u|²/2) >= -C|u|²`.
    NlsSubcritGrowth,
}

impl AssumptionClass {
    pub fn has_growth_bound(self) -> bool {
        matches!(self, AssumptionClass::Oscillating | AssumptionClass::NlsSubcritGrowth)
    }
}

/// Polynomial growth bound `|f(u)| <= c |u|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub q: f64,
    pub c: f64,
}

/// Critical Sobolev exponent `2d/(d-2)`; infinite for `d <= 2`.
pub fn two_star(d: usize) -> f64 {
    if d <= 2 {
        f64::INFINITY
    } else {
        2.0 * d as f64 / (d as f64 - 2.0)
    }
}

/// Checks that a growth exponent is energy-subcritical in dimension `d`.
pub fn check_subcritical(q: f64, d: usize) -> Result<()> {
    let crit = two_star(d);
    if q >= crit {
        return Err(NonlinearityError::Supercritical { q, d, two_star: crit }.into());
    }
    Ok(())
}

#[derive(Clone, Copy)]
pub struct CustomLaw {
    pub potential: fn(f64) -> f64,
    pub force: fn(f64) -> f64,
    pub force_prime: fn(f64) -> f64,
}

#[derive(Clone)]
enum Law {
    Zero,
    DefocusingExp { m: u32 },
    OscillatingSin { q: f64 },
    PurePower { p: f64 },
    Custom(CustomLaw),
    Truncated(Box<Truncation>),
}

#[derive(Clone)]
struct Truncation {
    base: Law,
    level: TruncationLevel,
    potential_minus: f64,
    potential_plus: f64,
    force_minus: f64,
    force_plus: f64,
}

impl Law {
    fn potential(&self, u: f64) -> f64 {
        match self {
            Law::Zero => 0.0,
            Law::DefocusingExp { m } => (u.powi(2 * *m as i32)).exp_m1(),
            Law::OscillatingSin { q } => (u * u.abs().powf(*q)).sin(),
            Law::PurePower { p } => u.abs().powf(p + 1.0) / (p + 1.0),
            Law::Custom(c) => (c.potential)(u),
            Law::Truncated(t) => {
                let lv = &t.level;
                if u < lv.r_minus {
                    t.potential_minus + t.force_minus * (u - lv.r_minus)
                } else if u > lv.r_plus {
                    t.potential_plus + t.force_plus * (u - lv.r_plus)
                } else {
                    t.base.potential(u)
                }
            }
        }
    }

    fn force(&self, u: f64) -> f64 {
        match self {
            Law::Zero => 0.0,
            Law::DefocusingExp { m } => {
                let m = *m as i32;
                2.0 * m as f64 * u.powi(2 * m - 1) * u.powi(2 * m).exp()
            }
            Law::OscillatingSin { q } => {
                let a = u.abs().powf(*q);
                (u * a).cos() * (q + 1.0) * a
            }
            Law::PurePower { p } => u.abs().powf(p - 1.0) * u,
            Law::Custom(c) => (c.force)(u),
            Law::Truncated(t) => {
                let lv = &t.level;
                if u < lv.r_minus {
                    t.force_minus
                } else if u > lv.r_plus {
                    t.force_plus
                } else {
                    t.base.force(u)
                }
            }
        }
    }

    fn force_prime(&self, u: f64) -> f64 {
        match self {
            Law::Zero => 0.0,
            Law::DefocusingExp { m } => {
                let m = *m as i32;
                let mf = m as f64;
                let e = u.powi(2 * m).exp();
                if m == 1 {
                    e * (2.0 + 4.0 * u * u)
                } else {
                    e * (2.0 * mf * (2.0 * mf - 1.0) * u.powi(2 * m - 2)
                        + 4.0 * mf * mf * u.powi(4 * m - 2))
                }
            }
            Law::OscillatingSin { q } => {
                // F = sin(g), g = u|u|^q; F'' = g'' cos g - g'^2 sin g.
                let a = u.abs();
                let g = u * a.powf(*q);
                let g1 = (q + 1.0) * a.powf(*q);
                let g2 = if a == 0.0 {
                    0.0
                } else {
                    (q + 1.0) * q * a.powf(q - 1.0) * u.signum()
                };
                g2 * g.cos() - g1 * g1 * g.sin()
            }
            Law::PurePower { p } => {
                if u == 0.0 && *p > 1.0 {
                    0.0
                } else {
                    p * u.abs().powf(p - 1.0)
                }
            }
            Law::Custom(c) => (c.force_prime)(u),
            Law::Truncated(t) => {
                let lv = &t.level;
                if u < lv.r_minus || u > lv.r_plus {
                    0.0
                } else {
                    t.base.force_prime(u)
                }
            }
        }
    }
}

/// A real nonlinearity `f = F'` for the wave equation `u_tt - Δu + f(u) = 0`.
#[derive(Clone)]
pub struct NonlinearitySpec {
    name: String,
    law: Law,
    class: AssumptionClass,
    growth: Option<Growth>,
    h21_constant: f64,
    lipschitz: Option<f64>,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("growth", &self.growth)
            .field("h21_constant", &self.h21_constant)
            .finish()
    }
}

impl NonlinearitySpec {
    /// `f ≡ 0`, the linear wave equation.
    pub fn linear() -> Self {
        Self {
            name: "linear".into(),
            law: Law::Zero,
            class: AssumptionClass::Defocusing,
            growth: Some(Growth { q: 1.0, c: 0.0 }),
            h21_constant: 0.0,
            lipschitz: Some(0.0),
        }
    }

    /// `F(u) = exp(u^{2m}) - 1`.
    pub fn defocusing_exp(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(NonlinearityError::BadParameter("m must be a positive integer".into()).into());
        }
        Ok(Self {
            name: format!("defocusing_exp:m={m}"),
            law: Law::DefocusingExp { m },
            class: AssumptionClass::Defocusing,
            growth: None,
            h21_constant: 0.0,
            lipschitz: None,
        })
    }

    /// `F(u) = sin(u|u|^q)`.
    pub fn oscillating_sin(q: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(NonlinearityError::BadParameter(format!("q must be >= 1, got {q}")).into());
        }
        Ok(Self {
            name: format!("oscillating_sin:q={q}"),
            law: Law::OscillatingSin { q },
            class: AssumptionClass::Oscillating,
            growth: Some(Growth { q, c: q + 1.0 }),
            h21_constant: 1.0,
            lipschitz: None,
        })
    }

    /// `F(u) = |u|^{p+1}/(p+1)`.
    pub fn pure_power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(NonlinearityError::BadParameter(format!("p must be >= 1, got {p}")).into());
        }
        Ok(Self {
            name: format!("pure_power:p={p}"),
            law: Law::PurePower { p },
            class: AssumptionClass::Defocusing,
            growth: Some(Growth { q: p, c: 1.0 }),
            h21_constant: 0.0,
            lipschitz: None,
        })
    }

    /// A user-supplied nonlinearity with analytic evaluators.
    pub fn custom(
        name: &str,
        law: CustomLaw,
        class: AssumptionClass,
        growth: Option<Growth>,
        h21_constant: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            law: Law::Custom(law),
            class,
            growth,
            h21_constant,
            lipschitz: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> AssumptionClass {
        self.class
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    /// The constant `C` of `F(u) >= -C|u|²` (zero for defocusing entries).
    pub fn h21_constant(&self) -> f64 {
        self.h21_constant
    }

    /// Global Lipschitz constant of `f`, known for truncated and linear specs.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.law, Law::Truncated(_))
    }

    /// Truncation window, if this spec is a truncation.
    pub fn truncation_level(&self) -> Option<TruncationLevel> {
        match &self.law {
            Law::Truncated(t) => Some(t.level),
            _ => None,
        }
    }

    #[inline]
    pub fn potential(&self, u: f64) -> f64 {
        self.law.potential(u)
    }

    #[inline]
    pub fn force(&self, u: f64) -> f64 {
        self.law.force(u)
    }

    #[inline]
    pub fn force_prime(&self, u: f64) -> f64 {
        self.law.force_prime(u)
    }

    /// Checks the defining inequality of the declared class at `s`, with
    /// `-slack` absolute tolerance.
    pub fn class_holds_at(&self, s: f64, slack: f64) -> bool {
        match self.class {
            AssumptionClass::Defocusing => s * self.force(s) >= -slack,
            AssumptionClass::Oscillating => {
                let g = self.growth.expect("oscillating class carries a growth bound");
                let growth_ok = self.force(s).abs() <= g.c * s.abs().powf(g.q) + slack;
                let lower_ok = self.potential(s) >= -self.h21_constant * s * s - slack;
                growth_ok && lower_ok
            }
            AssumptionClass::NlsCoercive | AssumptionClass::NlsSubcritGrowth => false,
        }
    }

    /// Largest central-difference mismatch of `F' = f` and `f' = F''` over
    /// `points`, with step `h`.
    pub fn derivative_mismatch(&self, points: &[f64], h: f64) -> (f64, f64) {
        let mut e1 = 0.0_f64;
        let mut e2 = 0.0_f64;
        for &s in points {
            let d1 = (self.potential(s + h) - self.potential(s - h)) / (2.0 * h);
            let d2 = (self.force(s + h) - self.force(s - h)) / (2.0 * h);
            let scale1 = 1.0 + self.force(s).abs();
            let scale2 = 1.0 + self.force_prime(s).abs();
            e1 = e1.max((d1 - self.force(s)).abs() / scale1);
            e2 = e2.max((d2 - self.force_prime(s)).abs() / scale2);
        }
        (e1, e2)
    }

    /// Lipschitz truncation `f_k`: frozen at `f(r_minus)` below the window,
    /// at `f(r_plus)` above it, and equal to `f` inside.
    pub fn truncate(&self, level: TruncationLevel) -> Result<NonlinearitySpec> {
        if !(level.r_minus < 0.0 && 0.0 < level.r_plus) {
            return Err(NonlinearityError::InvalidTruncation(format!(
                "need r_minus < 0 < r_plus, got ({}, {})",
                level.r_minus, level.r_plus
            ))
            .into());
        }
        for r in [level.r_minus, level.r_plus] {
            if r * self.force(r) < -level.c * r * r {
                return Err(NonlinearityError::InvalidTruncation(format!(
                    "sign condition r f(r) >= -C r^2 fails at r = {r} (C = {})",
                    level.c
                ))
                .into());
            }
        }
        let lipschitz = window_sup_abs(|s| self.force_prime(s), level.r_minus, level.r_plus);
        let t = Truncation {
            base: self.law.clone(),
            level,
            potential_minus: self.potential(level.r_minus),
            potential_plus: self.potential(level.r_plus),
            force_minus: self.force(level.r_minus),
            force_plus: self.force(level.r_plus),
        };
        Ok(NonlinearitySpec {
            name: format!("{}|k={}", self.name, level.k),
            law: Law::Truncated(Box::new(t)),
            class: self.class,
            growth: self.growth,
            h21_constant: self.h21_constant,
            lipschitz: Some(lipschitz),
        })
    }
}

const LIPSCHITZ_SAMPLES: usize = 200_000;

fn window_sup_abs(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = LIPSCHITZ_SAMPLES;
    (0..=n)
        .map(|i| g(a + (b - a) * i as f64 / n as f64).abs())
        .fold(0.0, f64::max)
}

/// Cut abscissae `r_minus < 0 < r_plus` of one level of the truncation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevel {
    pub k: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    /// The constant of the admissibility condition `r f(r) >= -C r²`.
    pub c: f64,
}

/// Number of uniform samples of `[k, 2k]` scanned for an admissible abscissa.
pub const ABSCISSA_SCAN_SAMPLES: usize = 1000;

/// Picks cut abscissae for level `k` with `r f(r) >= -C r²`.
pub fn find_truncation_abscissae(spec: &NonlinearitySpec, k: f64, c: f64) -> Result<TruncationLevel> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(NonlinearityError::BadParameter(format!("k must be positive, got {k}")).into());
    }
    if spec.class() == AssumptionClass::Defocusing {
        return Ok(TruncationLevel { k, r_plus: k, r_minus: -k, c });
    }
    let admissible = |s: f64| s * spec.force(s) >= -c * s * s;
    let n = ABSCISSA_SCAN_SAMPLES;
    let scan = |sign: f64| {
        (0..n)
            .map(|i| sign * (k + k * i as f64 / (n - 1) as f64))
            .find(|&s| admissible(s))
    };
    match (scan(1.0), scan(-1.0)) {
        (Some(r_plus), Some(r_minus)) => Ok(TruncationLevel { k, r_plus, r_minus, c }),
        _ => Err(NonlinearityError::NoAdmissibleAbscissa { k }.into()),
    }
}

/// Odd C¹ cutoff: identity on `[0, k]`, a quadratic blend on `[k, 2k]`, and
/// saturated at `3k/2` beyond `2k`.
pub fn beta_cutoff(s: f64, k: f64) -> f64 {
    let a = s.abs();
    let v = if a <= k {
        a
    } else if a <= 2.0 * k {
        a - (a - k).powi(2) / (2.0 * k)
    } else {
        1.5 * k
    };
    v.copysign(s)
}

/// Derivative of [`beta_cutoff`]; lies in `[0, 1]`.
pub fn beta_cutoff_derivative(s: f64, k: f64) -> f64 {
    let a = s.abs();
    if a <= k {
        1.0
    } else if a <= 2.0 * k {
        1.0 - (a - k) / k
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
pub struct NlsCustomLaw {
    pub potential: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
    pub second_derivative: fn(f64) -> f64,
}

#[derive(Clone, Copy)]
enum NlsLaw {
    Zero,
    CoerciveExp,
    PurePower { p: f64 },
    Custom(NlsCustomLaw),
}

/// A Schrödinger nonlinearity `f(u) = u F'(|u|²/2)`, described by `F` in the
/// density variable `s = |u|²/2`.
#[derive(Clone)]
pub struct NlsNonlinearitySpec {
    name: String,
    law: NlsLaw,
    class: AssumptionClass,
    growth: Option<Growth>,
    coercivity_constant: f64,
    lower_constant: f64,
}

impl fmt::Debug for NlsNonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NlsNonlinearitySpec")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("growth", &self.growth)
            .field("coercivity_constant", &self.coercivity_constant)
            .finish()
    }
}

/// Density threshold above which the coercivity bound is declared to hold
/// for the exponential entry (`|u| >= 1`).
pub const COERCIVE_DENSITY_FLOOR: f64 = 0.5;

impl NlsNonlinearitySpec {
    pub fn linear() -> Self {
        Self {
            name: "nls_linear".into(),
            law: NlsLaw::Zero,
            class: AssumptionClass::NlsSubcritGrowth,
            growth: Some(Growth { q: 1.0, c: 0.0 }),
            coercivity_constant: 0.0,
            lower_constant: 0.0,
        }
    }

    /// `F(s) = exp(sqrt(1 + 2s)) - e`.
    pub fn coercive_exp() -> Self {
        Self {
            name: "nls_coercive_exp".into(),
            law: NlsLaw::CoerciveExp,
            class: AssumptionClass::NlsCoercive,
            growth: None,
            coercivity_constant: 1.5,
            lower_constant: 0.0,
        }
    }

    /// `F(s) = (2s)^{(p+1)/2}/(p+1)`, so that `f(u) = |u|^{p-1} u`.
    pub fn pure_power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(NonlinearityError::BadParameter(format!("p must be >= 1, got {p}")).into());
        }
        Ok(Self {
            name: format!("nls_pure_power:p={p}"),
            law: NlsLaw::PurePower { p },
            class: AssumptionClass::NlsSubcritGrowth,
            growth: Some(Growth { q: p, c: 1.0 }),
            coercivity_constant: 0.0,
            lower_constant: 0.0,
        })
    }

    pub fn custom(
        name: &str,
        law: NlsCustomLaw,
        class: AssumptionClass,
        growth: Option<Growth>,
        coercivity_constant: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            law: NlsLaw::Custom(law),
            class,
            growth,
            coercivity_constant,
            lower_constant: 0.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> AssumptionClass {
        self.class
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn coercivity_constant(&self) -> f64 {
        self.coercivity_constant
    }

    /// The constant `C` of `F(|u|²/2) >= -C|u|²`.
    pub fn lower_constant(&self) -> f64 {
        self.lower_constant
    }

    /// `F(s)`.
    pub fn density_potential(&self, s: f64) -> f64 {
        match self.law {
            NlsLaw::Zero => 0.0,
            NlsLaw::CoerciveExp => (1.0 + 2.0 * s).sqrt().exp() - std::f64::consts::E,
            NlsLaw::PurePower { p } => (2.0 * s).powf(0.5 * (p + 1.0)) / (p + 1.0),
            NlsLaw::Custom(c) => (c.potential)(s),
        }
    }

    /// `F'(s)`.
    pub fn density_derivative(&self, s: f64) -> f64 {
        match self.law {
            NlsLaw::Zero => 0.0,
            NlsLaw::CoerciveExp => {
                let y = (1.0 + 2.0 * s).sqrt();
                y.exp() / y
            }
            NlsLaw::PurePower { p } => (2.0 * s).powf(0.5 * (p - 1.0)),
            NlsLaw::Custom(c) => (c.derivative)(s),
        }
    }

    /// `F''(s)`.
    pub fn density_second_derivative(&self, s: f64) -> f64 {
        match self.law {
            NlsLaw::Zero => 0.0,
            NlsLaw::CoerciveExp => {
                let y = (1.0 + 2.0 * s).sqrt();
                y.exp() * (y - 1.0) / (y * y * y)
            }
            NlsLaw::PurePower { p } => {
                if p == 1.0 {
                    0.0
                } else if s == 0.0 {
                    if p < 3.0 { f64::INFINITY } else if p == 3.0 { 2.0 } else { 0.0 }
                } else {
                    (p - 1.0) * (2.0 * s).powf(0.5 * (p - 3.0))
                }
            }
            NlsLaw::Custom(c) => (c.second_derivative)(s),
        }
    }

    /// `F(|z|²/2)`.
    #[inline]
    pub fn potential(&self, z: Complex64) -> f64 {
        self.density_potential(0.5 * z.norm_sqr())
    }

    /// `f(z) = z F'(|z|²/2)`.
    #[inline]
    pub fn force(&self, z: Complex64) -> Complex64 {
        z * self.density_derivative(0.5 * z.norm_sqr())
    }

    /// Real-linear derivative `Df(u) w = w F'(s) + u F''(s) Re(ū w)`.
    pub fn force_derivative_apply(&self, u: Complex64, w: Complex64) -> Complex64 {
        let s = 0.5 * u.norm_sqr();
        let g1 = self.density_derivative(s);
        let re = (u.conj() * w).re;
        let g2 = if re == 0.0 { 0.0 } else { self.density_second_derivative(s) };
        w * g1 + u * (g2 * re)
    }

    /// Coercivity ratio `sqrt(s) F'(s) / F(s)` (zero where `F(s) = 0` and the
    /// numerator vanishes).
    pub fn coercivity_ratio(&self, s: f64) -> f64 {
        let num = s.sqrt() * self.density_derivative(s);
        let den = self.density_potential(s);
        if num == 0.0 {
            0.0
        } else if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }
}

/// A parsed nonlinearity selection.
#[derive(Debug, Clone)]
pub enum Selection {
    Wave(NonlinearitySpec),
    Nls(NlsNonlinearitySpec),
}

impl Selection {
    pub fn name(&self) -> &str {
        match self {
            Selection::Wave(s) => s.name(),
            Selection::Nls(s) => s.name(),
        }
    }

    pub fn growth(&self) -> Option<Growth> {
        match self {
            Selection::Wave(s) => s.growth(),
            Selection::Nls(s) => s.growth(),
        }
    }

    pub fn class(&self) -> AssumptionClass {
        match self {
            Selection::Wave(s) => s.class(),
            Selection::Nls(s) => s.class(),
        }
    }
}

/// Parses `name[:key=value{,key=value}]`.
pub fn parse_selection(text: &str) -> Result<Selection> {
    let text = text.trim();
    let (name, params) = match text.split_once(':') {
        Some((n, p)) => (n.trim(), p.trim()),
        None => (text, ""),
    };
    let mut kv: Vec<(String, f64)> = Vec::new();
    if !params.is_empty() {
        for item in params.split(',') {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                NonlinearityError::Selection(format!("expected key=value, got '{item}'"))
            })?;
            let v: f64 = v.trim().parse().map_err(|_| {
                NonlinearityError::Selection(format!("value of '{}' is not a number", k.trim()))
            })?;
            kv.push((k.trim().to_string(), v));
        }
    }
    let take = |key: &str, default: Option<f64>| -> Result<f64> {
        for (k, _) in &kv {
            if k != key {
                return Err(NonlinearityError::Selection(format!("unknown parameter '{k}' for '{name}'")).into());
            }
        }
        match kv.iter().find(|(k, _)| k == key) {
            Some((_, v)) => Ok(*v),
            None => default.ok_or_else(|| {
                NonlinearityError::Selection(format!("'{name}' requires parameter '{key}'")).into()
            }),
        }
    };
    let no_params = || -> Result<()> {
        if kv.is_empty() {
            Ok(())
        } else {
            Err(NonlinearityError::Selection(format!("'{name}' takes no parameters")).into())
        }
    };
    match name {
        "linear" => no_params().map(|_| Selection::Wave(NonlinearitySpec::linear())),
        "defocusing_exp" => {
            let m = take("m", Some(1.0))?;
            if m.fract() != 0.0 || m < 1.0 {
                return Err(NonlinearityError::BadParameter(format!("m must be a positive integer, got {m}")).into());
            }
            NonlinearitySpec::defocusing_exp(m as u32).map(Selection::Wave)
        }
        "oscillating_sin" => NonlinearitySpec::oscillating_sin(take("q", None)?).map(Selection::Wave),
        "pure_power" => NonlinearitySpec::pure_power(take("p", None)?).map(Selection::Wave),
        "nls_linear" => no_params().map(|_| Selection::Nls(NlsNonlinearitySpec::linear())),
        "nls_coercive_exp" => no_params().map(|_| Selection::Nls(NlsNonlinearitySpec::coercive_exp())),
        "nls_pure_power" => NlsNonlinearitySpec::pure_power(take("p", None)?).map(Selection::Nls),
        other => Err(NonlinearityError::Selection(format!("unknown nonlinearity '{other}'")).into()),
    }
}

/// Every catalog entry.
pub fn builtin_catalog() -> Vec<Selection> {
    let mut out = Vec::new();
    for m in [1, 2] {
        out.push(Selection::Wave(NonlinearitySpec::defocusing_exp(m).unwrap()));
    }
    for q in [1.0, 2.0, 3.0] {
        out.push(Selection::Wave(NonlinearitySpec::oscillating_sin(q).unwrap()));
    }
    for p in [2.0, 3.0, 5.0] {
        out.push(Selection::Wave(NonlinearitySpec::pure_power(p).unwrap()));
    }
    out.push(Selection::Nls(NlsNonlinearitySpec::coercive_exp()));
    out.push(Selection::Nls(NlsNonlinearitySpec::pure_power(3.0).unwrap()));
    out
}
