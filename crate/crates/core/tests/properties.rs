use proptest::prelude::*;

use weaklab::dyadic::{dyadic_maximal, weak_norm, CellSet, Cube, DyadicGrid, StepFunction};
use weaklab::orlicz::luxemburg_norm;
use weaklab::sparse::{
    apply_sparse, apply_sparse_square, random_pruned, stopping_cubes, validate_sparsity, SparseFamily, DEFAULT_ETA,
};
use weaklab::verify::weak::weak_type_ratio;
use weaklab::{Weight, YoungFunction};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn step(depth: u32) -> impl Strategy<Value = StepFunction> {
    prop::collection::vec(0.0f64..10.0, 1usize << depth).prop_map(move |v| StepFunction::new(depth, v).unwrap())
}

fn positive(depth: u32) -> impl Strategy<Value = StepFunction> {
    prop::collection::vec(0.01f64..10.0, 1usize << depth).prop_map(move |v| StepFunction::new(depth, v).unwrap())
}

/// A pruned random family together with a non-negative function on the same grid.
fn family_and_function() -> impl Strategy<Value = (SparseFamily, StepFunction)> {
    (1u32..=8, 0.0f64..1.0, any::<u64>()).prop_flat_map(|(depth, density, seed)| {
        let family = random_pruned(DyadicGrid::new(depth).unwrap(), density, seed, DEFAULT_ETA).unwrap();
        (Just(family), step(depth))
    })
}

/// `Σ_{Q ∋ x} ⟨f⟩_Q`, cube by cube.
fn sparse_oracle(family: &SparseFamily, f: &StepFunction, square: bool) -> Vec<f64> {
    let depth = f.depth();
    let mut out = vec![0.0; f.len()];
    for q in family.cubes() {
        let a = f.average(q);
        for cell in q.cell_range(depth) {
            out[cell] += if square { a * a } else { a };
        }
    }
    if square {
        out.iter_mut().for_each(|v| *v = v.sqrt());
    }
    out
}

#[test]
fn generated_families_are_sparse() {
    for seed in 0..1000u64 {
        let depth = 4 + (seed % 7) as u32;
        let grid = DyadicGrid::new(depth).unwrap();
        let density = (seed % 10) as f64 / 10.0;
        let family = random_pruned(grid, density, seed, DEFAULT_ETA).unwrap();
        assert!(validate_sparsity(&family).passed, "random seed {seed}");

        let f = StepFunction::new(
            depth,
            (0..grid.cells()).map(|c| ((c as u64 * 2654435761 + seed) % 97) as f64).collect(),
        )
        .unwrap();
        let stop = stopping_cubes(&f, 2.0, DEFAULT_ETA).unwrap();
        assert!(validate_sparsity(&stop).passed, "stopping seed {seed}");
    }
}

#[test]
fn maximal_function_of_an_indicator() {
    let grid = DyadicGrid::new(3).unwrap();
    let f = StepFunction::indicator(grid, &Cube::new(3, 0).unwrap());
    let m = dyadic_maximal(&f);
    assert_eq!(m.values(), &[1.0, 0.5, 0.25, 0.25, 0.125, 0.125, 0.125, 0.125]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sparse_operator_matches_brute_force((family, f) in family_and_function()) {
        let tf = apply_sparse(&family, &f).unwrap();
        for (a, b) in tf.values().iter().zip(sparse_oracle(&family, &f, false)) {
            prop_assert!(close(*a, b, 1e-12));
        }
        let sf = apply_sparse_square(&family, &f).unwrap();
        for (a, b) in sf.values().iter().zip(sparse_oracle(&family, &f, true)) {
            prop_assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn sparse_operator_is_linear_and_monotone(
        (family, f) in family_and_function(),
        a in 0.0f64..5.0,
        b in 0.0f64..5.0,
        bump in 0.0f64..3.0,
    ) {
        let g = StepFunction::new(f.depth(), f.values().iter().rev().copied().collect()).unwrap();
        let combo = StepFunction::new(
            f.depth(),
            f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(),
        ).unwrap();
        let (tf, tg, tc) = (
            apply_sparse(&family, &f).unwrap(),
            apply_sparse(&family, &g).unwrap(),
            apply_sparse(&family, &combo).unwrap(),
        );
        for i in 0..f.len() {
            let expected = a * tf.value(i) + b * tg.value(i);
            prop_assert!((tc.value(i) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        }
        let larger = StepFunction::new(f.depth(), f.values().iter().map(|v| v + bump).collect()).unwrap();
        let tl = apply_sparse(&family, &larger).unwrap();
        for i in 0..f.len() {
            prop_assert!(tl.value(i) >= tf.value(i) - 1e-12 * tf.value(i));
        }
    }

    #[test]
    fn maximal_function_matches_brute_force(f in (1u32..=7).prop_flat_map(step)) {
        let m = dyadic_maximal(&f);
        let depth = f.depth();
        for cell in 0..f.len() {
            let brute = (0..=depth)
                .map(|level| f.average(&Cube::new(level, cell >> (depth - level)).unwrap()))
                .fold(0.0, f64::max);
            prop_assert!(close(m.value(cell), brute, 1e-12));
        }
    }

    #[test]
    fn weak_norm_matches_level_sets(
        (g, w) in (1u32..=6).prop_flat_map(|d| (step(d), positive(d))),
        p in 1.0f64..4.0,
        c in 0.1f64..10.0,
    ) {
        let cell = g.grid().cell_length();
        // the supremum over λ is approached from below each value of g
        let brute = g.values().iter().filter(|v| **v > 0.0).map(|&v| {
            let mass: f64 = g.values().iter().zip(w.values()).filter(|(x, _)| **x >= v).map(|(_, m)| m).sum();
            v * (mass * cell).powf(1.0 / p)
        }).fold(0.0, f64::max);
        let n = weak_norm(&g, &w, p).unwrap();
        prop_assert!(close(n, brute, 1e-12));
        let scaled = StepFunction::new(g.depth(), g.values().iter().map(|v| c * v).collect()).unwrap();
        prop_assert!(close(weak_norm(&scaled, &w, p).unwrap(), c * n, 1e-12));
    }

    #[test]
    fn weak_type_ratio_is_scale_invariant(
        (family, f) in family_and_function(),
        c in 0.01f64..100.0,
    ) {
        prop_assume!(f.integral() > 0.0);
        let w = Weight::unit(f.grid());
        let majorant = dyadic_maximal(w.as_function());
        let r = weak_type_ratio(&family, &f, &w, &majorant).unwrap();
        let scaled = StepFunction::new(f.depth(), f.values().iter().map(|v| c * v).collect()).unwrap();
        let rs = weak_type_ratio(&family, &scaled, &w, &majorant).unwrap();
        prop_assert!(close(r, rs, 1e-10));
    }

    #[test]
    fn luxemburg_norm_is_homogeneous_and_between_averages(
        w in (1u32..=6).prop_flat_map(positive),
        c in 0.01f64..100.0,
        r in 1.2f64..4.0,
    ) {
        let phi = YoungFunction::power(r).unwrap();
        let root = Cube::new(0, 0).unwrap();
        let n = luxemburg_norm(&w, &root, &phi);
        let scaled = StepFunction::new(w.depth(), w.values().iter().map(|v| c * v).collect()).unwrap();
        prop_assert!(close(luxemburg_norm(&scaled, &root, &phi), c * n, 1e-9));
        prop_assert!(n >= w.average(&root) * (1.0 - 1e-9));
        prop_assert!(n <= w.max_value() * (1.0 + 1e-9));
    }

    #[test]
    fn binary_and_hex_forms_round_trip(
        f in (1u32..=8).prop_flat_map(step),
        bits in prop::collection::vec(any::<bool>(), 256),
    ) {
        prop_assert_eq!(StepFunction::from_bytes(&f.to_bytes()).unwrap(), f.clone());
        let grid = f.grid();
        let set = CellSet::from_predicate(grid, |c| bits[c % bits.len()]);
        prop_assert_eq!(CellSet::from_hex(grid.depth(), &set.to_hex()).unwrap(), set);
    }
}
