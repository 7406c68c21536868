//! Inequality verifiers over reproducible corpora.
//!
//! Each verifier evaluates one instance at a time into a [`Sample`]; the
//! runner reduces samples by maximum into one [`VerificationReport`] per
//! depth plus an aggregate report carrying the depth-drift check. The
//! reduction is order independent, so callers may evaluate instances in
//! parallel through [`run_with`].

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub mod corpus;
pub mod square;
pub mod structure;
pub mod weak;

pub use corpus::{CorpusSpec, FunctionSpec, Instance, Materialized, WeightTable};

/// Largest admissible ratio between the deepest and shallowest fitted constants.
pub const MAX_DEPTH_DRIFT: f64 = 1.5;

/// Relative slack for comparisons between two floating-point sums of the
/// same nonnegative terms.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// One pointwise assertion `value ≤ bound` evaluated on an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSample {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    /// Relative slack; `0` for integer counts.
    pub rel_tol: f64,
}

impl CheckSample {
    pub fn new(name: &'static str, value: f64, bound: f64, rel_tol: f64) -> Self {
        CheckSample {
            name,
            value,
            bound,
            rel_tol,
        }
    }

    pub fn exact(name: &'static str, value: f64, bound: f64) -> Self {
        CheckSample::new(name, value, bound, 0.0)
    }

    pub fn holds(&self) -> bool {
        self.value <= self.bound + self.rel_tol * self.bound.abs()
    }

    /// `value / bound`, with `0/0 = 0`.
    pub fn margin(&self) -> f64 {
        if self.bound > 0.0 {
            self.value / self.bound
        } else if self.value <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Outcome of one instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` when the instance is vacuous.
    pub ratio: Option<f64>,
    pub checks: Vec<CheckSample>,
    /// Named quantities reduced by maximum.
    pub records: Vec<(&'static str, f64)>,
}

impl Sample {
    pub fn vacuous() -> Self {
        Sample::default()
    }

    pub fn from_sides(lhs: f64, rhs: f64) -> Self {
        Sample {
            lhs,
            rhs,
            // `+ 0.0` turns a `-0.0` quotient into `0.0`
            ratio: (rhs > 0.0).then(|| lhs / rhs + 0.0),
            ..Sample::default()
        }
    }

    pub fn check(mut self, check: CheckSample) -> Self {
        self.checks.push(check);
        self
    }

    pub fn record(mut self, name: &'static str, value: f64) -> Self {
        self.records.push((name, value));
        self
    }

    /// Keeps whichever ratio is larger, merging checks and records.
    pub fn merge(self, other: Sample) -> Sample {
        let (mut best, rest) =
            if other.ratio.unwrap_or(f64::NEG_INFINITY) > self.ratio.unwrap_or(f64::NEG_INFINITY) {
                (other, self)
            } else {
                (self, other)
            };
        best.checks.extend(rest.checks);
        best.records.extend(rest.records);
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub evaluated: usize,
    pub failures: usize,
    /// Largest `value / bound` seen.
    pub worst_margin: f64,
}

/// Structured record of one inequality over (part of) a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub inequality: String,
    pub phi: Option<String>,
    pub p: Option<f64>,
    /// `None` for the aggregate over all depths.
    pub depth: Option<u32>,
    pub instances: usize,
    pub vacuous: usize,
    /// Sides and ratio of the worst instance.
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Corpus maximum of the ratio.
    pub fitted_constant: f64,
    pub seed: Option<u64>,
    pub witness: Option<Instance>,
    pub checks: Vec<CheckOutcome>,
    pub records: BTreeMap<String, f64>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn record(&self, name: &str) -> Option<f64> {
        self.records.get(name).copied()
    }
}

/// A corpus verifier: pure per-instance evaluation.
pub trait Verifier: Sync {
    fn id(&self) -> String;

    fn phi(&self) -> Option<String> {
        None
    }

    fn p(&self) -> Option<f64> {
        None
    }

    /// Whether the aggregate asserts depth stability of the fitted constant.
    /// Verifiers that assert an explicit bound instead only record the drift.
    fn asserts_drift(&self) -> bool {
        true
    }

    fn evaluate(&self, instance: &Instance) -> Result<Sample>;
}

/// Evaluator handed to the executor in [`run_with`].
pub type Evaluate<'a> = dyn Fn(&Instance) -> Result<Sample> + Sync + 'a;

/// Runs `verifier` over `instances` sequentially.
pub fn run<V: Verifier>(verifier: &V, instances: &[Instance]) -> Result<Vec<VerificationReport>> {
    run_with(verifier, instances, |xs, eval| {
        xs.iter().map(eval).collect()
    })
}

/// Runs `verifier` with a caller-supplied executor (for example a parallel
/// map); the executor must return results in instance order.
pub fn run_with<V, E>(
    verifier: &V,
    instances: &[Instance],
    exec: E,
) -> Result<Vec<VerificationReport>>
where
    V: Verifier,
    E: FnOnce(&[Instance], &Evaluate<'_>) -> Vec<Result<Sample>>,
{
    let start = Instant::now();
    let samples = exec(instances, &|inst| verifier.evaluate(inst));
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_>>()?;
    let mut depths: Vec<u32> = instances.iter().map(|i| i.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let mut reports: Vec<VerificationReport> = depths
        .iter()
        .map(|&d| {
            let picked: Vec<(&Instance, &Sample)> = instances
                .iter()
                .zip(&samples)
                .filter(|(i, _)| i.depth == d)
                .collect();
            reduce(verifier, Some(d), &picked)
        })
        .collect();
    let all: Vec<(&Instance, &Sample)> = instances.iter().zip(&samples).collect();
    let mut aggregate = reduce(verifier, None, &all);
    if reports.len() >= 2 {
        let drift = depth_drift(&reports);
        aggregate.records.insert("depth_drift".into(), drift);
        if verifier.asserts_drift() {
            aggregate.checks.push(CheckOutcome {
                name: "depth_drift".into(),
                passed: drift <= MAX_DEPTH_DRIFT,
                evaluated: 1,
                failures: usize::from(drift > MAX_DEPTH_DRIFT),
                worst_margin: drift / MAX_DEPTH_DRIFT,
            });
        }
    }
    let elapsed = start.elapsed();
    for r in reports.iter_mut() {
        r.runtime = elapsed;
    }
    aggregate.runtime = elapsed;
    reports.push(aggregate);
    Ok(reports)
}

/// Fitted constant at the deepest depth over that at the shallowest
/// (`1` when both vanish).
pub fn depth_drift(per_depth: &[VerificationReport]) -> f64 {
    let by_depth: Vec<&VerificationReport> =
        per_depth.iter().filter(|r| r.depth.is_some()).collect();
    let (Some(first), Some(last)) = (
        by_depth.iter().min_by_key(|r| r.depth),
        by_depth.iter().max_by_key(|r| r.depth),
    ) else {
        return 1.0;
    };
    match (first.fitted_constant, last.fitted_constant) {
        (a, b) if a == 0.0 && b == 0.0 => 1.0,
        (a, _) if a == 0.0 => f64::INFINITY,
        (a, b) => b / a,
    }
}

fn reduce<V: Verifier>(
    verifier: &V,
    depth: Option<u32>,
    picked: &[(&Instance, &Sample)],
) -> VerificationReport {
    let mut worst: Option<(&Instance, &Sample, f64)> = None;
    let mut vacuous = 0;
    let mut checks: BTreeMap<&'static str, CheckOutcome> = BTreeMap::new();
    let mut records: BTreeMap<String, f64> = BTreeMap::new();
    for (inst, s) in picked {
        match s.ratio {
            Some(r) => {
                if worst.is_none_or(|(_, _, best)| r > best) {
                    worst = Some((inst, s, r));
                }
            }
            None => vacuous += 1,
        }
        for c in &s.checks {
            let entry = checks.entry(c.name).or_insert_with(|| CheckOutcome {
                name: c.name.to_string(),
                passed: true,
                evaluated: 0,
                failures: 0,
                worst_margin: 0.0,
            });
            entry.evaluated += 1;
            if !c.holds() {
                entry.passed = false;
                entry.failures += 1;
            }
            entry.worst_margin = entry.worst_margin.max(c.margin());
        }
        for &(name, v) in &s.records {
            let e = records.entry(name.to_string()).or_insert(f64::NEG_INFINITY);
            *e = e.max(v);
        }
    }
    let (lhs, rhs, ratio, seed, witness) = match worst {
        Some((inst, s, r)) => (s.lhs, s.rhs, r, Some(inst.seed), Some((*inst).clone())),
        None => (0.0, 0.0, 0.0, None, None),
    };
    VerificationReport {
        inequality: verifier.id(),
        phi: verifier.phi(),
        p: verifier.p(),
        depth,
        instances: picked.len(),
        vacuous,
        lhs,
        rhs,
        ratio,
        fitted_constant: ratio,
        seed,
        witness,
        checks: checks.into_values().collect(),
        records,
        runtime: Duration::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed;

    impl Verifier for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }

        fn evaluate(&self, inst: &Instance) -> Result<Sample> {
            let r = inst.depth as f64 + inst.seed as f64 / 100.0;
            Ok(
                Sample::from_sides(r, 1.0).check(CheckSample::exact(
                    "count",
                    inst.seed as f64,
                    2.0,
                )),
            )
        }
    }

    fn instances() -> Vec<Instance> {
        let spec = CorpusSpec {
            depths: vec![4, 6],
            seeds: vec![1, 2, 3],
            weights: vec![crate::weights::WeightSpec::Constant { c: 1.0 }],
            functions: vec![FunctionSpec::Constant { c: 1.0 }],
            strategies: vec![crate::sparse::SparseStrategy::StoppingCubes { ratio: 2.0 }],
        };
        spec.instances().unwrap()
    }

    #[test]
    fn reduction_by_depth() {
        let reports = run(&Fixed, &instances()).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].depth, Some(4));
        assert_eq!(reports[0].fitted_constant, 4.03);
        assert_eq!(reports[0].seed, Some(3));
        assert_eq!(reports[1].fitted_constant, 6.03);
        let agg = &reports[2];
        assert_eq!(agg.depth, None);
        assert_eq!(agg.instances, 6);
        assert!((agg.record("depth_drift").unwrap() - 6.03 / 4.03).abs() < 1e-15);
        let count = agg.check("count").unwrap();
        assert_eq!((count.evaluated, count.failures), (6, 2));
        assert!(!agg.passed());
    }

    #[test]
    fn reduction_is_order_independent() {
        let insts = instances();
        let forward = run(&Fixed, &insts).unwrap();
        let reversed = run_with(&Fixed, &insts, |xs, eval| {
            let mut out: Vec<_> = xs.iter().rev().map(eval).collect();
            out.reverse();
            out
        })
        .unwrap();
        let strip = |rs: Vec<VerificationReport>| -> Vec<VerificationReport> {
            rs.into_iter()
                .map(|r| VerificationReport {
                    runtime: Duration::ZERO,
                    ..r
                })
                .collect()
        };
        assert_eq!(strip(forward), strip(reversed));
    }

    #[test]
    fn margins() {
        assert_eq!(CheckSample::exact("a", 0.0, 0.0).margin(), 0.0);
        assert!(CheckSample::exact("a", 0.0, 0.0).holds());
        assert!(!CheckSample::exact("a", 1.0, 0.0).holds());
        assert!(CheckSample::new("a", 1.0 + 1e-13, 1.0, SUM_TOLERANCE).holds());
    }
}
