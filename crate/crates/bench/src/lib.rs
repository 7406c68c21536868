//! Fixtures shared by the benchmarks.

use weaklab::sparse::{SparseFamily, SparseStrategy};
use weaklab::verify::FunctionSpec;
use weaklab::{DyadicGrid, StepFunction, Weight, WeightSpec};

/// A cascade weight, a random function and its stopping family at `depth`.
pub fn fixture(depth: u32) -> (Weight, StepFunction, SparseFamily) {
    let grid = DyadicGrid::new(depth).expect("valid depth");
    let w = WeightSpec::Cascade {
        theta: 0.5,
        depth: None,
        seed: 1,
    }
    .generate(grid)
    .expect("cascade weight");
    let f = FunctionSpec::Random {
        density: 0.5,
        seed: 2,
    }
    .generate(grid)
    .expect("random function");
    let family = SparseStrategy::StoppingCubes { ratio: 2.0 }
        .generate(grid, &f)
        .expect("stopping family");
    (w, f, family)
}
