//! Reproducible corpora: generator specs crossed with depths and seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::dyadic::{Cube, DyadicGrid, StepFunction};
use crate::error::{Error, Result};
use crate::orlicz::{single_param, split_spec};
use crate::sparse::{SparseFamily, SparseStrategy};
use crate::weights::{cascade, keyed_params, lookup, required, Weight, WeightSpec};

/// Generators for the test function `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Constant {
        c: f64,
    },
    Indicator {
        level: u32,
        index: usize,
    },
    /// Log-normal values on a random support of the given density.
    Random {
        density: f64,
        seed: u64,
    },
    Cascade {
        theta: f64,
        seed: u64,
    },
}

impl FunctionSpec {
    pub fn generate(&self, grid: DyadicGrid) -> Result<StepFunction> {
        match self {
            FunctionSpec::Constant { c } => StepFunction::constant(grid, *c),
            FunctionSpec::Indicator { level, index } => {
                let cube = Cube::new(*level, *index)?;
                if !grid.contains(&cube) {
                    return Err(Error::InvalidParameter(format!(
                        "indicator cube {cube:?} is finer than the grid"
                    )));
                }
                Ok(StepFunction::indicator(grid, &cube))
            }
            FunctionSpec::Random { density, seed } => {
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "random function density {density} must lie in (0, 1]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values_dist = LogNormal::new(0.0, 1.0).expect("valid log-normal parameters");
                let mut values: Vec<f64> = (0..grid.cells())
                    .map(|_| {
                        if rng.random::<f64>() < *density {
                            values_dist.sample(&mut rng)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if values.iter().all(|&v| v == 0.0) {
                    let cell = rng.random_range(0..grid.cells());
                    values[cell] = 1.0;
                }
                StepFunction::new(grid.depth(), values)
            }
            FunctionSpec::Cascade { theta, seed } => cascade(grid, *theta, grid.depth(), *seed),
        }
    }

    fn reseeded(&self, seed: u64) -> FunctionSpec {
        match self {
            FunctionSpec::Random { density, seed: s } => FunctionSpec::Random {
                density: *density,
                seed: mix(*s, seed),
            },
            FunctionSpec::Cascade { theta, seed: s } => FunctionSpec::Cascade {
                theta: *theta,
                seed: mix(*s, seed),
            },
            other => other.clone(),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Constant { c } => write!(f, "const:{c}"),
            FunctionSpec::Indicator { level, index } => {
                write!(f, "indicator:level={level},index={index}")
            }
            FunctionSpec::Random { density, seed } => {
                write!(f, "random:density={density},seed={seed}")
            }
            FunctionSpec::Cascade { theta, seed } => write!(f, "cascade:theta={theta},seed={seed}"),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const WHAT: &str = "function spec";
        let (name, params) = split_spec(WHAT, s)?;
        match name {
            "const" => Ok(FunctionSpec::Constant {
                c: single_param(WHAT, s, &params, "c")?,
            }),
            "indicator" => {
                let kv = keyed_params(WHAT, s, &params, &["level", "index"])?;
                Ok(FunctionSpec::Indicator {
                    level: required(WHAT, s, &kv, "level")?,
                    index: lookup(WHAT, s, &kv, "index")?.unwrap_or(0),
                })
            }
            "random" => {
                let kv = keyed_params(WHAT, s, &params, &["density", "seed"])?;
                Ok(FunctionSpec::Random {
                    density: required(WHAT, s, &kv, "density")?,
                    seed: lookup(WHAT, s, &kv, "seed")?.unwrap_or(0),
                })
            }
            "cascade" => {
                let kv = keyed_params(WHAT, s, &params, &["theta", "seed"])?;
                Ok(FunctionSpec::Cascade {
                    theta: required(WHAT, s, &kv, "theta")?,
                    seed: lookup(WHAT, s, &kv, "seed")?.unwrap_or(0),
                })
            }
            other => Err(Error::parse(WHAT, s, format!("unknown kind `{other}`"))),
        }
    }
}

/// SplitMix64 finaliser of `a ^ golden * b`, used to derive per-instance seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn reseed_weight(spec: &WeightSpec, seed: u64) -> WeightSpec {
    match spec {
        WeightSpec::Cascade {
            theta,
            depth,
            seed: s,
        } => WeightSpec::Cascade {
            theta: *theta,
            depth: *depth,
            seed: mix(*s, seed),
        },
        other => other.clone(),
    }
}

fn reseed_strategy(spec: &SparseStrategy, seed: u64) -> SparseStrategy {
    match spec {
        SparseStrategy::RandomPruned { density, seed: s } => SparseStrategy::RandomPruned {
            density: *density,
            seed: mix(*s, seed),
        },
        other => other.clone(),
    }
}

/// Cross product `depths × seeds × weights × functions × strategies`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub depths: Vec<u32>,
    pub seeds: Vec<u64>,
    pub weights: Vec<WeightSpec>,
    pub functions: Vec<FunctionSpec>,
    pub strategies: Vec<SparseStrategy>,
}

impl CorpusSpec {
    /// Depths 6–12, 8 seeds, 5 weights, 5 functions, 3 strategies: 2400 instances.
    pub fn standard() -> Self {
        CorpusSpec {
            depths: vec![6, 8, 10, 12],
            seeds: (1..=8).collect(),
            weights: vec![
                WeightSpec::Constant { c: 1.0 },
                WeightSpec::PowerLaw { a: -0.5, x0: 0.3 },
                WeightSpec::PowerLaw { a: 1.0, x0: 0.5 },
                WeightSpec::Cascade {
                    theta: 0.5,
                    depth: None,
                    seed: 1,
                },
                WeightSpec::Spike { j: 4, h: None },
            ],
            functions: vec![
                FunctionSpec::Random {
                    density: 0.5,
                    seed: 2,
                },
                FunctionSpec::Random {
                    density: 0.05,
                    seed: 3,
                },
                FunctionSpec::Cascade {
                    theta: 0.6,
                    seed: 4,
                },
                FunctionSpec::Indicator { level: 3, index: 1 },
                FunctionSpec::Indicator { level: 6, index: 1 },
            ],
            strategies: vec![
                SparseStrategy::StoppingCubes { ratio: 2.0 },
                SparseStrategy::RandomPruned {
                    density: 0.3,
                    seed: 5,
                },
                SparseStrategy::RandomPruned {
                    density: 0.8,
                    seed: 6,
                },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.depths.len()
            * self.seeds.len()
            * self.weights.len()
            * self.functions.len()
            * self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Instances in a fixed order: depth, seed, weight, function, strategy.
    pub fn instances(&self) -> Result<Vec<Instance>> {
        for &d in &self.depths {
            DyadicGrid::new(d)?;
        }
        let mut out = Vec::with_capacity(self.len());
        for &depth in &self.depths {
            for &seed in &self.seeds {
                for weight in &self.weights {
                    for function in &self.functions {
                        for strategy in &self.strategies {
                            out.push(Instance {
                                id: out.len(),
                                depth,
                                seed,
                                weight: reseed_weight(weight, seed),
                                function: function.reseeded(seed),
                                strategy: reseed_strategy(strategy, seed),
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One corpus member with every seed already resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub depth: u32,
    pub seed: u64,
    pub weight: WeightSpec,
    pub function: FunctionSpec,
    pub strategy: SparseStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Materialized {
    pub w: Weight,
    pub f: StepFunction,
    pub family: SparseFamily,
}

impl Instance {
    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid::new(self.depth).expect("corpus depths are validated")
    }

    /// Key shared by all instances with the same generated weight.
    pub fn weight_key(&self) -> (u32, String) {
        (self.depth, self.weight.to_string())
    }

    pub fn materialize(&self) -> Result<Materialized> {
        let grid = self.grid();
        let w = self.weight.generate(grid)?;
        let f = self.function.generate(grid)?;
        let family = self.strategy.generate(grid, &f)?;
        Ok(Materialized { w, f, family })
    }
}

/// Per-weight precomputation shared across the instances of a corpus.
#[derive(Debug, Clone)]
pub struct WeightTable<T> {
    entries: BTreeMap<(u32, String), T>,
}

impl<T> WeightTable<T> {
    pub fn build(
        instances: &[Instance],
        mut compute: impl FnMut(&Weight) -> Result<T>,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for inst in instances {
            let key = inst.weight_key();
            if !entries.contains_key(&key) {
                let w = inst.weight.generate(inst.grid())?;
                entries.insert(key, compute(&w)?);
            }
        }
        Ok(WeightTable { entries })
    }

    pub fn get(&self, instance: &Instance) -> &T {
        self.entries
            .get(&instance.weight_key())
            .expect("weight table built from the same instances")
    }
}
