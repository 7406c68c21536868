//! Muckenhoupt characteristics of dyadic weights, and weight generators.
//!
//! All suprema over cubes run over the dyadic cubes of the grid.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{dyadic_maximal, local_maximal, Cube, CubeField, DyadicGrid, StepFunction};
use crate::error::{Error, Result};
use crate::orlicz::{single_param, split_spec};

/// Weights are clamped to `max / min ≤ 10^12`.
pub const MAX_DYNAMIC_RANGE: f64 = 1e12;

/// A strictly positive step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunction", into = "StepFunction")]
pub struct Weight(StepFunction);

impl Weight {
    pub fn new(f: StepFunction) -> Result<Self> {
        let min = f.min_value();
        if !(min > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights must be strictly positive (min = {min})"
            )));
        }
        let range = f.max_value() / min;
        if range > MAX_DYNAMIC_RANGE * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "weight dynamic range {range:e} exceeds {MAX_DYNAMIC_RANGE:e}"
            )));
        }
        Ok(Weight(f))
    }

    /// Raises values below `max / 10^12` to that floor.
    pub fn clamped(f: StepFunction) -> Result<Self> {
        let floor = f.max_value() / MAX_DYNAMIC_RANGE;
        Weight::new(f.map(|v| v.max(floor))?)
    }

    pub fn unit(grid: DyadicGrid) -> Self {
        Weight(StepFunction::constant(grid, 1.0).expect("constant 1 is a valid step function"))
    }

    pub fn as_function(&self) -> &StepFunction {
        &self.0
    }

    pub fn into_function(self) -> StepFunction {
        self.0
    }

    pub fn dynamic_range(&self) -> f64 {
        self.0.max_value() / self.0.min_value()
    }
}

impl Deref for Weight {
    type Target = StepFunction;

    fn deref(&self) -> &StepFunction {
        &self.0
    }
}

impl TryFrom<StepFunction> for Weight {
    type Error = Error;

    fn try_from(f: StepFunction) -> Result<Self> {
        Weight::new(f)
    }
}

impl From<Weight> for StepFunction {
    fn from(w: Weight) -> StepFunction {
        w.0
    }
}

/// `σ = w^{-1/(p-1)}`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("dual weight needs p > 1, got {p}")));
    }
    let e = -1.0 / (p - 1.0);
    let sigma = if p == 2.0 {
        w.map(|v| 1.0 / v)?
    } else {
        w.map(|v| v.powf(e))?
    };
    Ok(Weight(sigma))
}

/// `⟨w⟩_Q ⟨σ⟩_Q^{p-1}` on every cube.
pub fn ap_products(w: &Weight, p: f64) -> Result<CubeField> {
    let sigma = dual_weight(w, p)?;
    let wa = CubeField::averages(w);
    let sa = CubeField::averages(&sigma);
    Ok(CubeField::from_fn(w.grid(), |q| {
        let s = sa.get(&q);
        wa.get(&q) * if p == 2.0 { s } else { s.powf(p - 1.0) }
    }))
}

/// `[w]_{A_p} = sup_Q ⟨w⟩_Q ⟨w^{-1/(p-1)}⟩_Q^{p-1}`.
pub fn ap_constant(w: &Weight, p: f64) -> Result<f64> {
    Ok(ap_products(w, p)?.max())
}

/// `[w]_{A_1} = max Mw / w`.
pub fn a1_constant(w: &Weight) -> f64 {
    let mw = dyadic_maximal(w);
    mw.values()
        .iter()
        .zip(w.values())
        .map(|(m, v)| m / v)
        .fold(1.0, f64::max)
}

/// Fujii–Wilson `[w]_{A_∞} = sup_Q ∫_Q M(w 1_Q) / w(Q)`.
pub fn ainf_constant(w: &Weight) -> f64 {
    let averages = CubeField::averages(w);
    w.grid()
        .cubes()
        .map(|q| {
            let local = local_maximal(&averages, &q);
            let mean_max = local.iter().sum::<f64>() / local.len() as f64;
            mean_max / averages.get(&q)
        })
        .fold(1.0, f64::max)
}

/// `max_Q ⟨w^r⟩_Q^{1/r} / ⟨w⟩_Q`.
pub fn reverse_holder_check(w: &Weight, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!(
            "reverse Hölder exponent r = {r} < 1"
        )));
    }
    let wa = CubeField::averages(w);
    let wr = CubeField::averages(&w.powf(r)?);
    Ok(w.grid()
        .cubes()
        .map(|q| wr.get(&q).powf(1.0 / r) / wa.get(&q))
        .fold(1.0, f64::max))
}

/// `r(w) = 1 + 1/(c [w]_{A_∞})`.
pub fn reverse_holder_exponent(ainf: f64, c: f64) -> f64 {
    1.0 + 1.0 / (c * ainf)
}

/// Smallest `c` (to relative `1e-6`) with
/// `reverse_holder_check(w, 1 + 1/(c [w]_{A_∞})) ≤ target`; `0` if every `c` works.
pub fn min_reverse_holder_c(w: &Weight, target: f64) -> Result<f64> {
    let ainf = ainf_constant(w);
    let ok = |c: f64| -> Result<bool> {
        Ok(reverse_holder_check(w, reverse_holder_exponent(ainf, c))? <= target)
    };
    // r = 2 is the largest exponent considered
    if ok(1.0 / ainf)? {
        return Ok(0.0);
    }
    let mut lo = 1.0 / ainf;
    let mut hi = 2.0 * lo;
    while !ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter(
                "reverse Hölder calibration diverged".into(),
            ));
        }
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Weight generator specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant {
        c: f64,
    },
    /// Cell averages of `|x - x0|^a`, `a > -1`.
    PowerLaw {
        a: f64,
        x0: f64,
    },
    /// Multiplicative cascade with multipliers `1 ± θ` down to `depth` levels.
    Cascade {
        theta: f64,
        depth: Option<u32>,
        seed: u64,
    },
    /// `h` on `[0, 2^{-j})`, `1` elsewhere; `h` defaults to `2^j`.
    Spike {
        j: u32,
        h: Option<f64>,
    },
}

impl WeightSpec {
    /// The generated function, before positivity checks.
    pub fn generate_function(&self, grid: DyadicGrid) -> Result<StepFunction> {
        match self {
            WeightSpec::Constant { c } => StepFunction::constant(grid, *c),
            WeightSpec::PowerLaw { a, x0 } => power_law(grid, *a, *x0),
            WeightSpec::Cascade { theta, depth, seed } => {
                cascade(grid, *theta, depth.unwrap_or(grid.depth()), *seed)
            }
            WeightSpec::Spike { j, h } => {
                if *j > grid.depth() {
                    return Err(Error::InvalidParameter(format!(
                        "spike level {j} exceeds grid depth {}",
                        grid.depth()
                    )));
                }
                let height = h.unwrap_or((*j as f64).exp2());
                let mut f = StepFunction::constant(grid, 1.0)?;
                f.scale_on(&Cube::new(*j, 0)?, height);
                Ok(f)
            }
        }
    }

    pub fn generate(&self, grid: DyadicGrid) -> Result<Weight> {
        let f = self.generate_function(grid)?;
        if f.min_value() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{self} produces a non-positive weight"
            )));
        }
        Weight::clamped(f)
    }
}

fn power_law(grid: DyadicGrid, a: f64, x0: f64) -> Result<StepFunction> {
    if !(a > -1.0) || !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidParameter(format!(
            "power law needs a > -1 and x0 in [0, 1], got a = {a}, x0 = {x0}"
        )));
    }
    // antiderivative of |x - x0|^a
    let anti = |x: f64| {
        let d = x - x0;
        d.signum() * d.abs().powf(a + 1.0) / (a + 1.0)
    };
    let h = grid.cell_length();
    let values = (0..grid.cells())
        .map(|i| {
            let (l, r) = (i as f64 * h, (i + 1) as f64 * h);
            (anti(r) - anti(l)) / h
        })
        .collect();
    StepFunction::new(grid.depth(), values)
}

pub(crate) fn cascade(
    grid: DyadicGrid,
    theta: f64,
    levels: u32,
    seed: u64,
) -> Result<StepFunction> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "cascade theta = {theta} must lie in [0, 1) to keep the weight positive"
        )));
    }
    if levels > grid.depth() {
        return Err(Error::InvalidParameter(format!(
            "cascade depth {levels} exceeds grid depth {}",
            grid.depth()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = StepFunction::constant(grid, 1.0)?;
    for level in 0..levels {
        for index in 0..1usize << level {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let [left, right] = Cube::new(level, index)?.children();
            f.scale_on(&left, 1.0 + sign * theta);
            f.scale_on(&right, 1.0 - sign * theta);
        }
    }
    Ok(f)
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant { c } => write!(f, "const:{c}"),
            WeightSpec::PowerLaw { a, x0 } => write!(f, "power:a={a},x0={x0}"),
            WeightSpec::Cascade { theta, depth, seed } => match depth {
                Some(d) => write!(f, "cascade:theta={theta},depth={d},seed={seed}"),
                None => write!(f, "cascade:theta={theta},seed={seed}"),
            },
            WeightSpec::Spike { j, h } => match h {
                Some(h) => write!(f, "spike:j={j},h={h}"),
                None => write!(f, "spike:j={j}"),
            },
        }
    }
}

pub(crate) fn keyed_params<'a>(
    what: &'static str,
    input: &str,
    params: &[(Option<&'a str>, &'a str)],
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a str)>> {
    params
        .iter()
        .map(|(k, v)| match k {
            Some(k) if allowed.contains(k) => Ok((*k, *v)),
            Some(k) => Err(Error::parse(what, input, format!("unknown key `{k}`"))),
            None => Err(Error::parse(
                what,
                input,
                format!("expected key=value, got `{v}`"),
            )),
        })
        .collect()
}

pub(crate) fn lookup<T: FromStr>(
    what: &'static str,
    input: &str,
    params: &[(&str, &str)],
    key: &str,
) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| {
            v.parse::<T>()
                .map_err(|e| Error::parse(what, input, e.to_string()))
        })
        .transpose()
}

pub(crate) fn required<T: FromStr>(
    what: &'static str,
    input: &str,
    params: &[(&str, &str)],
    key: &str,
) -> Result<T>
where
    T::Err: fmt::Display,
{
    lookup(what, input, params, key)?
        .ok_or_else(|| Error::parse(what, input, format!("missing `{key}`")))
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const WHAT: &str = "weight spec";
        let (name, params) = split_spec(WHAT, s)?;
        match name {
            "const" => Ok(WeightSpec::Constant {
                c: single_param(WHAT, s, &params, "c")?,
            }),
            "power" => {
                let kv = keyed_params(WHAT, s, &params, &["a", "x0"])?;
                Ok(WeightSpec::PowerLaw {
                    a: required(WHAT, s, &kv, "a")?,
                    x0: lookup(WHAT, s, &kv, "x0")?.unwrap_or(0.5),
                })
            }
            "cascade" => {
                let kv = keyed_params(WHAT, s, &params, &["theta", "depth", "seed"])?;
                Ok(WeightSpec::Cascade {
                    theta: required(WHAT, s, &kv, "theta")?,
                    depth: lookup(WHAT, s, &kv, "depth")?,
                    seed: lookup(WHAT, s, &kv, "seed")?.unwrap_or(0),
                })
            }
            "spike" => {
                let kv = keyed_params(WHAT, s, &params, &["j", "h"])?;
                Ok(WeightSpec::Spike {
                    j: required(WHAT, s, &kv, "j")?,
                    h: lookup(WHAT, s, &kv, "h")?,
                })
            }
            other => Err(Error::parse(WHAT, s, format!("unknown kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(depth: u32) -> DyadicGrid {
        DyadicGrid::new(depth).unwrap()
    }

    fn weight(depth: u32, values: &[f64]) -> Weight {
        Weight::new(StepFunction::new(depth, values.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn constant_weights_have_unit_constants() {
        for c in [1.0, 3.7] {
            let w = WeightSpec::Constant { c }.generate(grid(5)).unwrap();
            assert!((ap_constant(&w, 2.0).unwrap() - 1.0).abs() < 1e-14);
            assert!((ap_constant(&w, 3.5).unwrap() - 1.0).abs() < 1e-12);
            assert!((a1_constant(&w) - 1.0).abs() < 1e-14);
            assert!((ainf_constant(&w) - 1.0).abs() < 1e-14);
            assert!((reverse_holder_check(&w, 1.7).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_one_hand_enumeration() {
        // [0,1): ⟨w⟩ = 5/2, ⟨σ⟩ = 5/8
        let w = weight(1, &[4.0, 1.0]);
        assert!((ap_constant(&w, 2.0).unwrap() - 25.0 / 16.0).abs() < 1e-15);
        let w = weight(1, &[2.0, 1.0]);
        assert!((a1_constant(&w) - 1.5).abs() < 1e-15);
        // root: ∫ M(w 1_Q) = (2 + 3/2)/2, w(Q) = 3/2
        assert!((ainf_constant(&w) - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn dual_weights() {
        let w = weight(2, &[4.0, 4.0, 4.0, 4.0]);
        let s = dual_weight(&w, 3.0).unwrap();
        assert!(s.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let w = weight(2, &[2.0, 0.5, 1.0, 8.0]);
        assert_eq!(
            dual_weight(&w, 2.0).unwrap().values(),
            &[0.5, 2.0, 1.0, 0.125]
        );
        assert!(dual_weight(&w, 1.0).is_err());
        // [w]_{A_p} = [σ]_{A_{p'}}^{p-1}
        for p in [1.5, 2.0, 3.0] {
            let pp = p / (p - 1.0);
            let lhs = ap_constant(&w, p).unwrap();
            let rhs = ap_constant(&dual_weight(&w, p).unwrap(), pp)
                .unwrap()
                .powf(p - 1.0);
            assert!((lhs - rhs).abs() < 1e-12 * lhs, "p = {p}");
        }
    }

    #[test]
    fn spike_a1_grows_with_level() {
        let g = grid(10);
        let a1: Vec<f64> = (1..=10)
            .map(|j| a1_constant(&WeightSpec::Spike { j, h: None }.generate(g).unwrap()))
            .collect();
        assert!(a1.windows(2).all(|p| p[1] > p[0]), "{a1:?}");
    }

    #[test]
    fn degenerate_cascade_is_flat() {
        let w = WeightSpec::Cascade {
            theta: 0.0,
            depth: None,
            seed: 9,
        }
        .generate(grid(6))
        .unwrap();
        assert!(w.values().iter().all(|&v| v == 1.0));
        assert!(WeightSpec::Cascade {
            theta: 1.0,
            depth: None,
            seed: 9
        }
        .generate(grid(6))
        .is_err());
    }

    #[test]
    fn cascade_is_seed_deterministic() {
        let spec = WeightSpec::Cascade {
            theta: 0.4,
            depth: Some(6),
            seed: 17,
        };
        let a = spec.generate(grid(8)).unwrap();
        let b = spec.generate(grid(8)).unwrap();
        assert_eq!(a, b);
        // total mass is preserved by the 1 ± θ multipliers
        assert!((a.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_weights() {
        let w = WeightSpec::PowerLaw { a: -0.5, x0: 0.5 }
            .generate(grid(8))
            .unwrap();
        // ∫_0^1 |x - 1/2|^{-1/2} = 2 · 2 (1/2)^{1/2}
        assert!((w.integral() - 4.0 * 0.5f64.sqrt()).abs() < 1e-12);
        assert!(WeightSpec::PowerLaw { a: -1.0, x0: 0.5 }
            .generate(grid(4))
            .is_err());
        let w = WeightSpec::PowerLaw { a: 3.0, x0: 0.0 }
            .generate(grid(12))
            .unwrap();
        assert!(w.dynamic_range() <= MAX_DYNAMIC_RANGE * (1.0 + 1e-12));
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(Weight::new(StepFunction::new(1, vec![1.0, 0.0]).unwrap()).is_err());
        assert!(Weight::new(StepFunction::new(1, vec![1e13, 0.5]).unwrap()).is_err());
    }

    #[test]
    fn reverse_holder_calibration() {
        let w = WeightSpec::Spike { j: 6, h: None }
            .generate(grid(8))
            .unwrap();
        let c = min_reverse_holder_c(&w, 2.0).unwrap();
        let ainf = ainf_constant(&w);
        assert!(reverse_holder_check(&w, reverse_holder_exponent(ainf, c)).unwrap() <= 2.0);
        assert!(reverse_holder_check(&w, reverse_holder_exponent(ainf, 0.9 * c)).unwrap() > 2.0);
        assert_eq!(
            min_reverse_holder_c(&Weight::unit(grid(4)), 2.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn spec_strings() {
        for s in [
            "const:1",
            "power:a=0.5,x0=0.5",
            "cascade:theta=0.3,depth=6,seed=4",
            "spike:j=8",
        ] {
            let spec: WeightSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("spike:k=8".parse::<WeightSpec>().is_err());
        assert!("const".parse::<WeightSpec>().is_err());
        assert!("blob:1".parse::<WeightSpec>().is_err());
    }
}
