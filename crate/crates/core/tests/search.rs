use rayon::prelude::*;

use weaklab::search::{best_of, restart_chain, search, Objective, SearchInstance, SearchParams};
use weaklab::DyadicGrid;

fn params() -> SearchParams {
    SearchParams {
        iters: 120,
        ..SearchParams::default()
    }
}

#[test]
fn parallel_restarts_match_sequential_search() {
    let start = SearchInstance::constant(DyadicGrid::new(6).unwrap());
    let objective: Objective = "orlicz:llog:eps=0.5".parse().unwrap();
    let (r, seq) = search(&objective, &start, &params(), 9, 3).unwrap();
    let chains: Vec<_> = (0..3u64)
        .into_par_iter()
        .map(|r| (r, restart_chain(&objective, &start, &params(), 9, r).unwrap()))
        .collect();
    let (rp, par) = best_of(chains).unwrap();
    assert_eq!(r, rp);
    assert_eq!(serde_json::to_string(&seq).unwrap(), serde_json::to_string(&par).unwrap());
}

#[test]
fn best_instance_is_valid_and_improves_on_the_start() {
    for objective in ["plain-m", "orlicz:power:r=2", "square:p=2"] {
        let objective: Objective = objective.parse().unwrap();
        let start = SearchInstance::random(DyadicGrid::new(5).unwrap(), 4).unwrap();
        let (_, best) = search(&objective, &start, &params(), 1, 2).unwrap();
        best.best.validate().unwrap();
        // restart 0 climbs from `start` and never accepts a loss
        assert!(best.best_value >= objective.value(&start).unwrap());
        let trace_max = best.trace.iter().filter(|s| s.accepted).map(|s| s.value).fold(0.0, f64::max);
        assert!(trace_max <= best.best_value);
    }
}
