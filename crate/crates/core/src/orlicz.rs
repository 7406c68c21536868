//! Young functions, their complementary functions and Luxemburg norms.
//!
//! The three logarithmic families have the form `φ(t) = t L(t)` with
//! `L` built from the iterated logarithms `log_1 x = 1 + log_+ x`,
//! `log_k x = log_1(log_{k-1} x)`. Their complementary functions have no
//! elementary form, so `ψ` is computed by a numerical Legendre transform.
//! The theorem-level constants use the surrogate `L` in place of `ψ^{-1}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Cube, CubeField, StepFunction};
use crate::error::{Error, Result};

/// `log_k(x)`; always `≥ 1`.
pub fn log_k(k: u32, x: f64) -> f64 {
    assert!(k >= 1, "log_k needs k >= 1");
    let mut v = x;
    for _ in 0..k {
        v = 1.0 + v.ln().max(0.0);
    }
    v
}

/// `log_k(t)` given `ln t`, for arguments too large for a double.
pub fn log_k_from_ln(k: u32, ln_t: f64) -> f64 {
    assert!(k >= 1, "log_k needs k >= 1");
    let mut v = 1.0 + ln_t.max(0.0);
    for _ in 1..k {
        v = 1.0 + v.ln();
    }
    v
}

/// A Young function tabulated at nodes and interpolated log-log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedYoung {
    t: Vec<f64>,
    phi: Vec<f64>,
    phi_at_one: f64,
}

impl TabulatedYoung {
    /// Nodes must be positive and strictly increasing; values nonnegative,
    /// nondecreasing, and convex as measured by secant slopes.
    pub fn new(t: Vec<f64>, phi: Vec<f64>, phi_at_one: f64) -> Result<Self> {
        if t.len() < 2 || t.len() != phi.len() {
            return Err(Error::InvalidParameter(
                "tabulated Young function needs >= 2 matching nodes".into(),
            ));
        }
        if t.iter().any(|&x| !(x > 0.0 && x.is_finite())) || t.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidParameter(
                "tabulated nodes must be positive and strictly increasing".into(),
            ));
        }
        if phi.iter().any(|&y| !(y >= 0.0 && y.is_finite())) || phi.windows(2).any(|p| p[1] < p[0])
        {
            return Err(Error::InvalidParameter(
                "tabulated values must be finite, nonnegative and nondecreasing".into(),
            ));
        }
        let table = TabulatedYoung { t, phi, phi_at_one };
        let declared = table.eval(1.0);
        if (declared - phi_at_one).abs() > 1e-6 * phi_at_one.max(1e-300) {
            return Err(Error::InvalidParameter(format!(
                "declared phi(1) = {phi_at_one} but the table gives {declared}"
            )));
        }
        Ok(table)
    }

    pub fn phi_at_one(&self) -> f64 {
        self.phi_at_one
    }

    fn segment_exponent(&self, i: usize) -> Option<f64> {
        let (t0, t1, y0, y1) = (self.t[i], self.t[i + 1], self.phi[i], self.phi[i + 1]);
        (y0 > 0.0 && y1 > 0.0).then(|| (y1 / y0).ln() / (t1 / t0).ln())
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.t.len();
        if t <= self.t[0] {
            return match self.segment_exponent(0) {
                Some(e) if self.phi[0] > 0.0 => self.phi[0] * (t / self.t[0]).powf(e),
                _ => self.phi[0] * t / self.t[0],
            };
        }
        if t >= self.t[n - 1] {
            let e = self.segment_exponent(n - 2).unwrap_or(1.0);
            return self.phi[n - 1] * (t / self.t[n - 1]).powf(e);
        }
        let i = self.t.partition_point(|&x| x <= t) - 1;
        match self.segment_exponent(i) {
            Some(e) => self.phi[i] * (t / self.t[i]).powf(e),
            None => {
                let s = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
                self.phi[i] + s * (self.phi[i + 1] - self.phi[i])
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        let h = 1e-7 * t.max(1e-300);
        (self.eval(t + h) - self.eval((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum YoungFunction {
    /// `t^r`, `r >= 1`.
    Power {
        r: f64,
    },
    /// `t (log_1 t)^ε`, `0 < ε < 1`.
    LLogEps {
        eps: f64,
    },
    /// `t (log_2 t)^α`, `1 < α < 2`.
    LLog2Alpha {
        alpha: f64,
    },
    /// `t log_2 t (log_3 t)^α`, `1 < α < 2`.
    LLog2Log3Alpha {
        alpha: f64,
    },
    Tabulated(TabulatedYoung),
}

impl YoungFunction {
    pub fn power(r: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power exponent r = {r} must be >= 1"
            )));
        }
        Ok(YoungFunction::Power { r })
    }

    pub fn llog_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} must lie in (0, 1)"
            )));
        }
        Ok(YoungFunction::LLogEps { eps })
    }

    pub fn llog2_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (1, 2)"
            )));
        }
        Ok(YoungFunction::LLog2Alpha { alpha })
    }

    pub fn llog2_log3_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie in (1, 2)"
            )));
        }
        Ok(YoungFunction::LLog2Log3Alpha { alpha })
    }

    pub fn is_log_family(&self) -> bool {
        matches!(
            self,
            YoungFunction::LLogEps { .. }
                | YoungFunction::LLog2Alpha { .. }
                | YoungFunction::LLog2Log3Alpha { .. }
        )
    }

    /// `lim φ(t)/t = ∞`; only these have a finite complementary function.
    pub fn is_superlinear(&self) -> bool {
        match self {
            YoungFunction::Power { r } => *r > 1.0,
            YoungFunction::Tabulated(t) => {
                t.segment_exponent(t.t.len() - 2).is_some_and(|e| e > 1.0)
            }
            _ => true,
        }
    }

    pub fn phi_at_one(&self) -> f64 {
        match self {
            YoungFunction::Tabulated(t) => t.phi_at_one,
            _ => 1.0,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!(
                "Young function evaluated at t = {t}"
            )));
        }
        Ok(self.eval(t))
    }

    /// Unchecked evaluation for `t >= 0`.
    pub(crate) fn eval(&self, t: f64) -> f64 {
        match self {
            YoungFunction::Power { r } => {
                if *r == 2.0 {
                    t * t
                } else {
                    t.powf(*r)
                }
            }
            YoungFunction::Tabulated(table) => table.eval(t),
            _ => t * self.surrogate_unchecked(t),
        }
    }

    /// `φ'(t)` (right derivative at kinks).
    pub(crate) fn derivative(&self, t: f64) -> f64 {
        match self {
            YoungFunction::Power { r } => r * t.powf(r - 1.0),
            YoungFunction::LLogEps { eps } => {
                if t < 1.0 {
                    1.0
                } else {
                    let a = 1.0 + t.ln();
                    a.powf(*eps) + eps * a.powf(eps - 1.0)
                }
            }
            YoungFunction::LLog2Alpha { alpha } => {
                if t < 1.0 {
                    1.0
                } else {
                    let a = 1.0 + t.ln();
                    let b = 1.0 + a.ln();
                    b.powf(*alpha) + alpha * b.powf(alpha - 1.0) / a
                }
            }
            YoungFunction::LLog2Log3Alpha { alpha } => {
                if t < 1.0 {
                    1.0
                } else {
                    let a = 1.0 + t.ln();
                    let b = 1.0 + a.ln();
                    let c = 1.0 + b.ln();
                    b * c.powf(*alpha) + c.powf(*alpha) / a + alpha * c.powf(alpha - 1.0) / a
                }
            }
            YoungFunction::Tabulated(table) => table.derivative(t),
        }
    }

    /// The logarithmic part `L` with `φ(t) = t L(t)`.
    pub fn surrogate(&self, t: f64) -> Result<f64> {
        if !self.is_log_family() {
            return Err(Error::Unsupported(format!("surrogate L for {self}")));
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("surrogate evaluated at t = {t}")));
        }
        Ok(self.surrogate_unchecked(t))
    }

    fn surrogate_unchecked(&self, t: f64) -> f64 {
        self.surrogate_from_ln(t.ln())
    }

    /// `L(t)` from `ln t`; reaches `t = 2^{2^64}` without overflow.
    pub(crate) fn surrogate_from_ln(&self, ln_t: f64) -> f64 {
        match self {
            YoungFunction::LLogEps { eps } => log_k_from_ln(1, ln_t).powf(*eps),
            YoungFunction::LLog2Alpha { alpha } => log_k_from_ln(2, ln_t).powf(*alpha),
            YoungFunction::LLog2Log3Alpha { alpha } => {
                log_k_from_ln(2, ln_t) * log_k_from_ln(3, ln_t).powf(*alpha)
            }
            _ => unreachable!("surrogate only exists for the logarithmic families"),
        }
    }

    /// `ψ(s) = sup_{t>0} (s t - φ(t))` by a log-grid scan plus golden-section refinement.
    pub fn complementary(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::Domain(format!("complementary function at s = {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        legendre_sup(|t| s * t - self.eval(t)).ok_or(Error::Unbounded(s))
    }

    /// Exact `ψ^{-1}` for the power family, in log form: returns `ln ψ^{-1}(y)` given `ln y`.
    pub fn ln_exact_inverse_complementary(&self, ln_y: f64) -> Option<f64> {
        match self {
            // ψ(s) = (r-1) r^{-r'} s^{r'},  r' = r/(r-1)
            YoungFunction::Power { r } if *r > 1.0 => {
                let rp = r / (r - 1.0);
                Some((ln_y - (r - 1.0).ln() + rp * r.ln()) / rp)
            }
            YoungFunction::Power { .. } => Some(0.0),
            _ => None,
        }
    }

    /// `ψ^{-1}(y)` by bisection on the numerical complementary function.
    pub fn inverse_complementary(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("inverse complementary at y = {y}")));
        }
        // ψ(s) < y on [0, lo], ψ(hi) >= y (or ψ(hi) = ∞)
        let at_least = |s: f64| -> (bool, bool) {
            match self.complementary(s) {
                Ok(v) => (v >= y, false),
                Err(_) => (true, true),
            }
        };
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut hi_unbounded;
        loop {
            let (reached, unbounded) = at_least(hi);
            hi_unbounded = unbounded;
            if reached {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Unbounded(hi));
            }
        }
        for _ in 0..400 {
            if hi - lo <= 1e-10 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let (reached, unbounded) = at_least(mid);
            if reached {
                hi = mid;
                hi_unbounded = unbounded;
            } else {
                lo = mid;
            }
        }
        if hi_unbounded {
            return Err(Error::Unbounded(hi));
        }
        Ok(0.5 * (lo + hi))
    }

    /// Denominator `ψ^{-1}(2^{2^k})` of the `k`-th term of `c_φ`: exact for
    /// powers, `L(2^{2^k})` for log families when `use_surrogate`, numeric otherwise.
    pub fn band_scale(&self, k: u32, use_surrogate: bool) -> Result<f64> {
        let ln_y = (k as f64).exp2() * std::f64::consts::LN_2;
        if use_surrogate {
            if !self.is_log_family() {
                return Err(Error::Unsupported(format!("surrogate L for {self}")));
            }
            return Ok(self.surrogate_from_ln(ln_y));
        }
        if let Some(ln) = self.ln_exact_inverse_complementary(ln_y) {
            return Ok(ln.exp());
        }
        let y = ln_y.exp();
        if !y.is_finite() {
            return Err(Error::Domain(format!("2^(2^{k}) overflows a double")));
        }
        self.inverse_complementary(y)
    }

    /// `ψ^{-1}` used by the verification layer: surrogate `L` for log families,
    /// exact for powers, numeric for tabulated functions.
    pub fn verification_inverse(&self, y: f64) -> Result<f64> {
        if self.is_log_family() {
            return self.surrogate(y);
        }
        match self.ln_exact_inverse_complementary(y.ln()) {
            Some(ln) => Ok(ln.exp()),
            None => self.inverse_complementary(y),
        }
    }
}

/// `sup_{t>0} h(t)` for concave `h` with `h(0+) = 0`; `None` when the
/// maximiser escapes to `t → ∞`.
fn legendre_sup(h: impl Fn(f64) -> f64) -> Option<f64> {
    const NODES: usize = 2048;
    const T_MIN: f64 = 1e-9;
    const T_MAX: f64 = 1e12;
    const T_LIMIT: f64 = 1e300;
    let ratio = (T_MAX / T_MIN).powf(1.0 / (NODES - 1) as f64);
    let mut nodes: Vec<f64> = (0..NODES).map(|i| T_MIN * ratio.powi(i as i32)).collect();
    let mut values: Vec<f64> = nodes.iter().map(|&t| h(t)).collect();
    let mut best = argmax(&values);
    // extend past the default range while the maximiser sits on the edge
    while best == nodes.len() - 1 {
        let last = *nodes.last().unwrap();
        if last * ratio > T_LIMIT {
            return None;
        }
        let extra: Vec<f64> = (1..=NODES)
            .map(|i| last * ratio.powi(i as i32))
            .take_while(|&t| t <= T_LIMIT)
            .collect();
        if extra.is_empty() {
            return None;
        }
        values.extend(extra.iter().map(|&t| h(t)));
        nodes.extend(extra);
        best = argmax(&values);
    }
    let lo = if best == 0 { 0.0 } else { nodes[best - 1] };
    let hi = nodes[best + 1];
    let refined = golden_max(&h, lo, hi);
    Some(refined.max(values[best]).max(0.0))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn golden_max(h: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b.abs() {
            break;
        }
        if hc > hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
    }
    hc.max(hd)
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YoungFunction::Power { r } => write!(f, "power:r={r}"),
            YoungFunction::LLogEps { eps } => write!(f, "llog:eps={eps}"),
            YoungFunction::LLog2Alpha { alpha } => write!(f, "llog2:alpha={alpha}"),
            YoungFunction::LLog2Log3Alpha { alpha } => write!(f, "llog2log3:alpha={alpha}"),
            YoungFunction::Tabulated(t) => write!(f, "tabulated:nodes={}", t.t.len()),
        }
    }
}

/// Splits `name:key=value,...` (or `name:value` for one-parameter specs).
pub(crate) fn split_spec<'a>(
    what: &'static str,
    input: &'a str,
) -> Result<(&'a str, Vec<(Option<&'a str>, &'a str)>)> {
    let (name, rest) = match input.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (input.trim(), ""),
    };
    if name.is_empty() {
        return Err(Error::parse(what, input, "missing family name"));
    }
    let params = rest
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| match p.split_once('=') {
            Some((k, v)) => (Some(k.trim()), v.trim()),
            None => (None, p),
        })
        .collect();
    Ok((name, params))
}

pub(crate) fn single_param(
    what: &'static str,
    input: &str,
    params: &[(Option<&str>, &str)],
    key: &str,
) -> Result<f64> {
    match params {
        [(k, v)] if k.is_none() || *k == Some(key) => v
            .parse::<f64>()
            .map_err(|e| Error::parse(what, input, e.to_string())),
        _ => Err(Error::parse(
            what,
            input,
            format!("expected exactly one parameter `{key}`"),
        )),
    }
}

impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const WHAT: &str = "Young function";
        let (name, params) = split_spec(WHAT, s)?;
        let built = match name {
            "power" => YoungFunction::power(single_param(WHAT, s, &params, "r")?),
            "llog" => YoungFunction::llog_eps(single_param(WHAT, s, &params, "eps")?),
            "llog2" => YoungFunction::llog2_alpha(single_param(WHAT, s, &params, "alpha")?),
            "llog2log3" => {
                YoungFunction::llog2_log3_alpha(single_param(WHAT, s, &params, "alpha")?)
            }
            other => return Err(Error::parse(WHAT, s, format!("unknown family `{other}`"))),
        };
        built.map_err(|e| Error::parse(WHAT, s, e.to_string()))
    }
}

/// `ψ` tabulated on a log-spaced grid of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaryTable {
    s: Vec<f64>,
    psi: Vec<f64>,
}

impl ComplementaryTable {
    pub fn build(phi: &YoungFunction, s_min: f64, s_max: f64, nodes: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min && nodes >= 2) {
            return Err(Error::InvalidParameter(
                "bad complementary table range".into(),
            ));
        }
        let ratio = (s_max / s_min).powf(1.0 / (nodes - 1) as f64);
        let s: Vec<f64> = (0..nodes).map(|i| s_min * ratio.powi(i as i32)).collect();
        let psi = s
            .iter()
            .map(|&x| phi.complementary(x))
            .collect::<Result<Vec<_>>>()?;
        let table = ComplementaryTable { s, psi };
        table.check_invariants()?;
        Ok(table)
    }

    fn check_invariants(&self) -> Result<()> {
        let slack = 1e-9;
        for i in 1..self.s.len() {
            let (p0, p1) = (self.psi[i - 1], self.psi[i]);
            if p1 < p0 * (1.0 - slack) {
                return Err(Error::InvalidParameter(
                    "tabulated psi is not nondecreasing".into(),
                ));
            }
            if p1 / self.s[i] < (p0 / self.s[i - 1]) * (1.0 - slack) {
                return Err(Error::InvalidParameter(
                    "tabulated psi(s)/s is not nondecreasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    /// The table as a Young function (log-log interpolation, power-law tails).
    pub fn to_young(&self) -> Result<YoungFunction> {
        let raw = TabulatedYoung {
            t: self.s.clone(),
            phi: self.psi.clone(),
            phi_at_one: 0.0,
        };
        let at_one = raw.eval(1.0);
        TabulatedYoung::new(self.s.clone(), self.psi.clone(), at_one).map(YoungFunction::Tabulated)
    }
}

/// Luxemburg norm of the values of one cube.
///
/// Solves `avg φ(v μ) = 1` for `μ = 1/λ` by Newton's method started above the
/// root; `H(μ) = avg φ(v μ) - 1` is convex increasing, so the iterates decrease
/// monotonically onto the root.
pub fn luxemburg_norm_of(values: &[f64], phi: &YoungFunction) -> f64 {
    let n = values.len() as f64;
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let h = |mu: f64| values.iter().map(|&v| phi.eval(v * mu)).sum::<f64>() / n - 1.0;
    let dh = |mu: f64| {
        values
            .iter()
            .map(|&v| v * phi.derivative(v * mu))
            .sum::<f64>()
            / n
    };

    // Jensen with φ(1) = 1 gives ‖f‖ ∈ [mean, max]; widen for other normalisations.
    let mut mu_hi = 1.0 / mean;
    while h(mu_hi) < 0.0 {
        mu_hi *= 2.0;
    }
    let mut mu_lo = 1.0 / max;
    while h(mu_lo) > 0.0 {
        mu_lo *= 0.5;
    }

    let mut mu = mu_hi;
    let mut hv = h(mu);
    for _ in 0..100 {
        if hv <= 1e-13 {
            break;
        }
        let slope = dh(mu);
        let next = mu - hv / slope;
        if !(next < mu && next > mu_lo) {
            break;
        }
        mu = next;
        hv = h(mu);
        if hv < 0.0 {
            // rounding pushed past the root
            mu_lo = mu;
            break;
        }
    }
    if hv > 1e-12 || hv < 0.0 {
        // bisection fallback on [mu_lo, mu]
        let mut lo = mu_lo;
        let mut hi = mu;
        for _ in 0..200 {
            if hi - lo <= 1e-14 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mu = 0.5 * (lo + hi);
    }
    1.0 / mu
}

/// `‖f‖_{φ(L),Q} = inf{λ > 0 : ⟨φ(f/λ)⟩_Q ≤ 1}`.
pub fn luxemburg_norm(f: &StepFunction, cube: &Cube, phi: &YoungFunction) -> f64 {
    luxemburg_norm_of(&f.values()[cube.cell_range(f.depth())], phi)
}

/// Luxemburg norms of `w` on every cube of the grid.
pub fn luxemburg_field(w: &StepFunction, phi: &YoungFunction) -> CubeField {
    if let YoungFunction::Power { r } = phi {
        if *r == 1.0 {
            return CubeField::averages(w);
        }
    }
    CubeField::from_fn(w.grid(), |q| luxemburg_norm(w, &q, phi))
}

/// `M_{φ(L)} w(x) = max_{Q ∋ x} ‖w‖_{φ(L),Q}` over dyadic `Q`.
pub fn orlicz_maximal(w: &StepFunction, phi: &YoungFunction) -> StepFunction {
    luxemburg_field(w, phi).ancestor_max()
}

/// Result of summing `c_φ = Σ_k 1/ψ^{-1}(2^{2^k})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPhiReport {
    pub family: String,
    /// Partial sum plus the tail bound when the sum was truncated at the cap.
    pub value: f64,
    pub partial_sum: f64,
    /// Integral-test bound on `Σ_{k > truncation_k}`; `None` when no closed form exists.
    pub tail_bound: Option<f64>,
    pub terms: Vec<f64>,
    pub truncation_k: u32,
    pub converged: bool,
    pub surrogate: bool,
}

pub const C_PHI_MAX_K: u32 = 64;

/// Sums `c_φ` until a term drops below `rtol` times the partial sum, capped at `k = 64`.
pub fn c_phi(phi: &YoungFunction, use_surrogate: bool, rtol: f64) -> Result<CPhiReport> {
    let mut terms = Vec::new();
    let mut sum = 0.0;
    let mut converged = false;
    let mut last_k = 0;
    for k in 1..=C_PHI_MAX_K {
        let scale = match phi.band_scale(k, use_surrogate) {
            Ok(v) => v,
            // numeric ψ^{-1} runs out of double range; stop here
            Err(Error::Domain(_) | Error::Unbounded(_)) if !use_surrogate && k > 1 => break,
            Err(e) => return Err(e),
        };
        let term = 1.0 / scale;
        terms.push(term);
        sum += term;
        last_k = k;
        if term < rtol * sum {
            converged = true;
            break;
        }
    }
    let first = terms[0];
    let last = *terms.last().unwrap();
    if !converged && last >= first {
        return Err(Error::Divergent {
            k: last_k,
            term: last,
        });
    }
    let tail_bound = if converged {
        Some(0.0)
    } else if use_surrogate && last_k == C_PHI_MAX_K {
        Some(surrogate_tail(phi, last_k))
    } else {
        None
    };
    let value = sum
        + if converged {
            0.0
        } else {
            tail_bound.unwrap_or(0.0)
        };
    Ok(CPhiReport {
        family: phi.to_string(),
        value,
        partial_sum: sum,
        tail_bound,
        terms,
        truncation_k: last_k,
        converged,
        surrogate: use_surrogate,
    })
}

/// `∫_K^∞ dx / L(2^{2^x})`, closed form once `ln t = 2^x ln 2` dwarfs 1
/// (exact to double precision for `K = 64`), so that
/// `log_2 t = a x + b` with `a = ln 2`, `b = 1 + ln ln 2`.
fn surrogate_tail(phi: &YoungFunction, k: u32) -> f64 {
    use std::f64::consts::LN_2;
    let a = LN_2;
    let b = 1.0 + LN_2.ln();
    let x = k as f64;
    match phi {
        YoungFunction::LLogEps { eps } => LN_2.powf(-eps) * (-eps * x * LN_2).exp() / (eps * LN_2),
        YoungFunction::LLog2Alpha { alpha } => (a * x + b).powf(1.0 - alpha) / (a * (alpha - 1.0)),
        YoungFunction::LLog2Log3Alpha { alpha } => {
            (1.0 + (a * x + b).ln()).powf(1.0 - alpha) / (a * (alpha - 1.0))
        }
        _ => unreachable!("surrogate tail only for log families"),
    }
}

/// `max_t sup_{0<s<t} s (L(t) - L(s)) / t` over a log grid of `t ≤ t_max`.
pub fn verify_surrogate(phi: &YoungFunction, t_max: f64) -> Result<f64> {
    if !phi.is_log_family() {
        return Err(Error::Unsupported(format!("surrogate check for {phi}")));
    }
    if t_max <= 1.0 {
        return Ok(0.0);
    }
    let ln_max = t_max.ln();
    let outer = 256;
    let inner = 512;
    let mut worst = 0.0f64;
    for i in 1..=outer {
        let tau = ln_max * i as f64 / outer as f64;
        let lt = phi.surrogate_from_ln(tau);
        // s ≤ 1 contributes at most L(t) - 1 at s = 1
        let ratio_at = |sigma: f64| (sigma - tau).exp() * (lt - phi.surrogate_from_ln(sigma));
        let mut best = ratio_at(0.0);
        let mut best_j: usize = 0;
        for j in 1..inner {
            let v = ratio_at(tau * j as f64 / inner as f64);
            if v > best {
                best = v;
                best_j = j;
            }
        }
        let lo = tau * best_j.saturating_sub(1) as f64 / inner as f64;
        let hi = tau * (best_j + 1).min(inner) as f64 / inner as f64;
        best = best.max(golden_max(&ratio_at, lo, hi));
        worst = worst.max(best);
    }
    Ok(worst)
}
