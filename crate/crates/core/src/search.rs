//! Randomized hill climbing over `(w, f, family)` for large weak-type ratios.
//!
//! A chain starts from a seed instance. Each iteration picks one dyadic cube
//! and applies one or more moves to it: multiply the block of `w` or of `f`
//! by a log-normal factor, or toggle the cube in the family. A proposal is
//! accepted iff it strictly improves the objective and the instance stays
//! valid (positive weight within the dynamic range cap, sparse family).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dyadic::{dyadic_maximal, weak_norm, Cube, DyadicGrid, StepFunction};
use crate::error::{Error, Result};
use crate::orlicz::{orlicz_maximal, YoungFunction};
use crate::sparse::{apply_sparse_square, random_pruned, validate_sparsity, SparseFamily, DEFAULT_ETA};
use crate::verify::corpus::{mix, FunctionSpec};
use crate::verify::square::WeightConstants;
use crate::verify::weak::weak_type_ratio;
use crate::weights::{Weight, WeightSpec};

/// What the search maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `‖Tf‖_{L^{1,∞}(w)} / ∫ f M_{φ(L)} w`.
    RatioVsOrlicz(YoungFunction),
    /// `‖Tf‖_{L^{1,∞}(w)} / ∫ f M w`.
    RatioVsPlainM,
    /// `‖Sf‖_{L^{p,∞}(w)} / (C_p(w) ‖f‖_{L^p(w)})`.
    SquareRatio(f64),
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::RatioVsOrlicz(phi) => write!(f, "orlicz:{phi}"),
            Objective::RatioVsPlainM => write!(f, "plain-m"),
            Objective::SquareRatio(p) => write!(f, "square:p={p}"),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: String| Error::parse("objective", s, why);
        match s.split_once(':') {
            None if s == "plain-m" => Ok(Objective::RatioVsPlainM),
            Some(("orlicz", phi)) => Ok(Objective::RatioVsOrlicz(phi.parse()?)),
            Some(("square", p)) => {
                let p = p.strip_prefix("p=").unwrap_or(p);
                let p: f64 = p.parse().map_err(|_| bad(format!("`{p}` is not a number")))?;
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(bad(format!("p = {p} must be >= 1")));
                }
                Ok(Objective::SquareRatio(p))
            }
            _ => Err(bad("expected `orlicz:<phi>`, `plain-m` or `square:p=<p>`".into())),
        }
    }
}

/// The quantities of an objective that depend on `w` only.
#[derive(Debug, Clone)]
enum WeightTerms {
    Majorant(StepFunction),
    Square(WeightConstants),
}

impl Objective {
    fn weight_terms(&self, w: &Weight) -> Result<WeightTerms> {
        Ok(match self {
            Objective::RatioVsOrlicz(phi) => WeightTerms::Majorant(orlicz_maximal(w, phi)),
            Objective::RatioVsPlainM => WeightTerms::Majorant(dyadic_maximal(w)),
            Objective::SquareRatio(p) => WeightTerms::Square(WeightConstants::compute(w, *p)?),
        })
    }

    fn value_with(&self, inst: &SearchInstance, terms: &WeightTerms) -> Result<f64> {
        match (self, terms) {
            (Objective::SquareRatio(p), WeightTerms::Square(k)) => {
                let sf = apply_sparse_square(&inst.family, &inst.f)?;
                let norm = inst.f.lp_norm(&inst.w, *p)?;
                if !(norm > 0.0) {
                    return Err(Error::Degenerate("‖f‖_{L^p(w)} = 0".into()));
                }
                Ok(weak_norm(&sf, &inst.w, *p)? / (k.square_bound(*p) * norm))
            }
            (_, WeightTerms::Majorant(m)) => weak_type_ratio(&inst.family, &inst.f, &inst.w, m),
            _ => unreachable!("weight terms are built by the same objective"),
        }
    }

    /// Objective value of `inst`.
    pub fn value(&self, inst: &SearchInstance) -> Result<f64> {
        self.value_with(inst, &self.weight_terms(&inst.w)?)
    }
}

/// A point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchInstance {
    pub family: SparseFamily,
    pub f: StepFunction,
    pub w: Weight,
}

impl SearchInstance {
    /// `w ≡ 1`, `f ≡ 1`, family `{[0, 1)}`.
    pub fn constant(grid: DyadicGrid) -> Self {
        SearchInstance {
            family: SparseFamily::new(grid, [Cube::ROOT], DEFAULT_ETA).expect("root family"),
            f: StepFunction::constant(grid, 1.0).expect("constant 1"),
            w: Weight::unit(grid),
        }
    }

    /// Log-normal `f` on half the cells, cascade `w`, randomly pruned family.
    pub fn random(grid: DyadicGrid, seed: u64) -> Result<Self> {
        Ok(SearchInstance {
            family: random_pruned(grid, 0.3, mix(seed, 1), DEFAULT_ETA)?,
            f: FunctionSpec::Random {
                density: 0.5,
                seed: mix(seed, 2),
            }
            .generate(grid)?,
            w: WeightSpec::Cascade {
                theta: 0.5,
                depth: None,
                seed: mix(seed, 3),
            }
            .generate(grid)?,
        })
    }

    pub fn grid(&self) -> DyadicGrid {
        self.family.grid()
    }

    /// Errors unless the family is sparse, `f` is nonzero and all grids agree.
    pub fn validate(&self) -> Result<()> {
        self.f.check_same_grid(&self.w)?;
        if self.family.depth() != self.f.depth() {
            return Err(Error::InvalidParameter("family and function grids differ".into()));
        }
        let report = validate_sparsity(&self.family);
        if !report.passed {
            return Err(Error::InvalidParameter(format!(
                "family is not {}-sparse (worst fraction {})",
                self.family.eta(),
                report.worst_fraction
            )));
        }
        if self.f.is_zero() {
            return Err(Error::InvalidParameter("f vanishes identically".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    WeightBlock,
    FunctionBlock,
    ToggleCube,
}

/// One coordinate perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub cube: Cube,
    /// Block factor; `1` for toggles.
    pub factor: f64,
}

/// One iteration of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: u64,
    pub moves: Vec<Move>,
    pub accepted: bool,
    /// Current objective after the step.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub iters: u64,
    /// Standard deviation of `ln factor` for block moves.
    pub sigma: f64,
    /// A proposal applies between 1 and `max_moves` moves on one random cube.
    pub max_moves: u32,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            iters: 1000,
            sigma: 2.0,
            max_moves: 3,
        }
    }
}

/// Relative gain a proposal needs to be accepted; smaller gains are
/// indistinguishable from rounding in the objective.
pub const ACCEPT_RTOL: f64 = 1e-12;

/// State of one hill-climbing chain. Accepting only strict improvements
/// makes the current instance also the best so far.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchState {
    pub objective: String,
    pub seed: u64,
    pub iteration: u64,
    pub params: SearchParams,
    pub best: SearchInstance,
    pub best_value: f64,
    pub accepted: u64,
    pub trace: Vec<TraceStep>,
    #[serde(skip)]
    rng: Option<ChaCha8Rng>,
}

impl SearchState {
    /// The chain's generator, positioned after the last iteration.
    pub fn rng(&self) -> Option<&ChaCha8Rng> {
        self.rng.as_ref()
    }
}

/// Uniform level, then uniform cube at that level.
fn random_cube(rng: &mut ChaCha8Rng, grid: DyadicGrid) -> Cube {
    let level = rng.random_range(0..=grid.depth());
    let index = rng.random_range(0..1usize << level);
    Cube::new(level, index).expect("level within the grid")
}

fn random_move(rng: &mut ChaCha8Rng, cube: Cube, normal: &Normal<f64>) -> Move {
    let kind = match rng.random_range(0..3u8) {
        0 => MoveKind::WeightBlock,
        1 => MoveKind::FunctionBlock,
        _ => MoveKind::ToggleCube,
    };
    let factor = match kind {
        MoveKind::ToggleCube => 1.0,
        _ => normal.sample(rng).exp(),
    };
    Move { kind, cube, factor }
}

/// Applies `moves`; `None` if the result leaves the search space.
fn apply_moves(inst: &SearchInstance, moves: &[Move]) -> Option<SearchInstance> {
    let mut out = inst.clone();
    let mut w = None;
    for m in moves {
        match m.kind {
            MoveKind::WeightBlock => w.get_or_insert_with(|| inst.w.as_function().clone()).scale_on(&m.cube, m.factor),
            MoveKind::FunctionBlock => out.f.scale_on(&m.cube, m.factor),
            MoveKind::ToggleCube => out.family = out.family.toggled(m.cube),
        }
    }
    if let Some(w) = w {
        out.w = Weight::new(w).ok()?;
    }
    let f_ok = out.f.values().iter().all(|v| v.is_finite()) && !out.f.is_zero();
    let family_ok = moves.iter().all(|m| m.kind != MoveKind::ToggleCube)
        || (!out.family.is_empty() && validate_sparsity(&out.family).passed);
    (f_ok && family_ok).then_some(out)
}

/// Hill climbing from `start` for `params.iters` iterations.
pub fn hill_climb(objective: &Objective, start: &SearchInstance, params: &SearchParams, seed: u64) -> Result<SearchState> {
    start.validate()?;
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {} must be positive", params.sigma)));
    }
    if params.max_moves == 0 {
        return Err(Error::InvalidParameter("max_moves must be >= 1".into()));
    }
    let grid = start.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, params.sigma).expect("positive sigma");
    let mut current = start.clone();
    let mut terms = objective.weight_terms(&current.w)?;
    let mut value = objective.value_with(&current, &terms)?;
    let mut trace = Vec::with_capacity(params.iters as usize);
    let mut accepted_count = 0;
    for iteration in 1..=params.iters {
        let cube = random_cube(&mut rng, grid);
        let count = rng.random_range(1..=params.max_moves);
        let moves: Vec<Move> = (0..count).map(|_| random_move(&mut rng, cube, &normal)).collect();
        let touches_w = moves.iter().any(|m| m.kind == MoveKind::WeightBlock);
        let mut evaluated = None;
        if let Some(proposal) = apply_moves(&current, &moves) {
            let new_terms = if touches_w { objective.weight_terms(&proposal.w).ok() } else { None };
            if !touches_w || new_terms.is_some() {
                if let Ok(v) = objective.value_with(&proposal, new_terms.as_ref().unwrap_or(&terms)) {
                    if v.is_finite() && v > value * (1.0 + ACCEPT_RTOL) {
                        evaluated = Some((proposal, new_terms, v));
                    }
                }
            }
        }
        let accepted = evaluated.is_some();
        if let Some((proposal, new_terms, v)) = evaluated {
            current = proposal;
            value = v;
            if let Some(t) = new_terms {
                terms = t;
            }
            accepted_count += 1;
        }
        trace.push(TraceStep {
            iteration,
            moves,
            accepted,
            value,
        });
    }
    Ok(SearchState {
        objective: objective.to_string(),
        seed,
        iteration: params.iters,
        params: params.clone(),
        best: current,
        best_value: value,
        accepted: accepted_count,
        trace,
        rng: Some(rng),
    })
}

/// Seed of restart `r` of a search seeded with `seed`.
pub fn restart_seed(seed: u64, r: u64) -> u64 {
    mix(seed, r)
}

/// Best chain by value; ties go to the lower restart index, so the result
/// does not depend on the order in which chains finished.
pub fn best_of(chains: Vec<(u64, SearchState)>) -> Option<(u64, SearchState)> {
    chains
        .into_iter()
        .reduce(|a, b| match b.1.best_value.total_cmp(&a.1.best_value).then(a.0.cmp(&b.0)) {
            std::cmp::Ordering::Greater => b,
            _ => a,
        })
}

/// Chain `r` of a search: restart 0 climbs from `start`, later restarts
/// from a random instance on the same grid.
pub fn restart_chain(
    objective: &Objective,
    start: &SearchInstance,
    params: &SearchParams,
    seed: u64,
    r: u64,
) -> Result<SearchState> {
    let chain_seed = restart_seed(seed, r);
    if r == 0 {
        hill_climb(objective, start, params, chain_seed)
    } else {
        let random = SearchInstance::random(start.grid(), chain_seed)?;
        hill_climb(objective, &random, params, chain_seed)
    }
}

/// `restarts` independent chains (see [`restart_chain`]), run sequentially.
pub fn search(
    objective: &Objective,
    start: &SearchInstance,
    params: &SearchParams,
    seed: u64,
    restarts: u64,
) -> Result<(u64, SearchState)> {
    let chains = (0..restarts.max(1))
        .map(|r| Ok((r, restart_chain(objective, start, params, seed, r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_of(chains).expect("at least one restart"))
}

/// Serialized instance attaining a search value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub family: SparseFamily,
    pub f: StepFunction,
    pub w: Weight,
    pub objective: String,
    pub value: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl Witness {
    pub fn from_state(state: &SearchState, config_hash: &str) -> Self {
        Witness {
            family: state.best.family.clone(),
            f: state.best.f.clone(),
            w: state.best.w.clone(),
            objective: state.objective.clone(),
            value: state.best_value,
            seed: state.seed,
            config_hash: config_hash.to_string(),
        }
    }
}

/// One row of the Muckenhoupt–Wheeden probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub depth: u32,
    /// Best plain-`M` ratio found.
    pub plain_m_best: f64,
    /// Orlicz ratio with `φ = llog:eps=0.5` on the same instance.
    pub orlicz_best: f64,
}

/// Majorant family used by the probe's Orlicz column.
pub fn probe_phi() -> YoungFunction {
    YoungFunction::llog_eps(0.5).expect("valid epsilon")
}

/// Plain-`M` search at one depth from the constant instance, then the
/// Orlicz ratio of the best instance found. Also returns the best chain.
pub fn mw_probe_chain(depth: u32, params: &SearchParams, seed: u64, restarts: u64) -> Result<(ProbeRow, SearchState)> {
    let start = SearchInstance::constant(DyadicGrid::new(depth)?);
    let (_, best) = search(&Objective::RatioVsPlainM, &start, params, mix(seed, u64::from(depth)), restarts)?;
    let row = ProbeRow {
        depth,
        plain_m_best: best.best_value,
        orlicz_best: Objective::RatioVsOrlicz(probe_phi()).value(&best.best)?,
    };
    Ok((row, best))
}

pub fn mw_probe_row(depth: u32, params: &SearchParams, seed: u64, restarts: u64) -> Result<ProbeRow> {
    Ok(mw_probe_chain(depth, params, seed, restarts)?.0)
}

/// Probe table over increasing `depths`.
pub fn mw_probe(depths: &[u32], params: &SearchParams, seed: u64, restarts: u64) -> Result<Vec<ProbeRow>> {
    if depths.windows(2).any(|d| d[0] >= d[1]) {
        return Err(Error::InvalidParameter("probe depths must be increasing".into()));
    }
    depths.iter().map(|&d| mw_probe_row(d, params, seed, restarts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(iters: u64) -> SearchParams {
        SearchParams {
            iters,
            ..SearchParams::default()
        }
    }

    #[test]
    fn objective_specs() {
        for s in ["plain-m", "square:p=2", "orlicz:llog:eps=0.5"] {
            assert_eq!(s.parse::<Objective>().unwrap().to_string(), s);
        }
        assert!("square:p=0.5".parse::<Objective>().is_err());
        assert!("nope".parse::<Objective>().is_err());
    }

    #[test]
    fn zero_iterations_keep_the_seed_value() {
        let start = SearchInstance::constant(DyadicGrid::new(5).unwrap());
        let state = hill_climb(&Objective::RatioVsPlainM, &start, &params(0), 3).unwrap();
        assert_eq!(state.best, start);
        assert!((state.best_value - 1.0).abs() < 1e-12);
        assert!(state.trace.is_empty());
    }

    #[test]
    fn best_so_far_is_monotone_and_valid() {
        let start = SearchInstance::constant(DyadicGrid::new(6).unwrap());
        for objective in [Objective::RatioVsPlainM, Objective::SquareRatio(2.0)] {
            let state = hill_climb(&objective, &start, &params(300), 11).unwrap();
            let mut last = f64::NEG_INFINITY;
            for step in &state.trace {
                assert!(step.value >= last);
                last = step.value;
            }
            state.best.validate().unwrap();
            assert!((objective.value(&state.best).unwrap() - state.best_value).abs() <= 1e-12 * state.best_value);
        }
    }

    #[test]
    fn chains_are_deterministic() {
        let start = SearchInstance::constant(DyadicGrid::new(6).unwrap());
        let a = hill_climb(&Objective::RatioVsPlainM, &start, &params(200), 5).unwrap();
        let b = hill_climb(&Objective::RatioVsPlainM, &start, &params(200), 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = hill_climb(&Objective::RatioVsPlainM, &start, &params(200), 6).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn best_of_prefers_lower_restart_on_ties() {
        let start = SearchInstance::constant(DyadicGrid::new(4).unwrap());
        let s = hill_climb(&Objective::RatioVsPlainM, &start, &params(0), 1).unwrap();
        let (r, _) = best_of(vec![(2, s.clone()), (0, s.clone()), (1, s)]).unwrap();
        assert_eq!(r, 0);
    }

    #[test]
    fn probe_rows() {
        let rows = mw_probe(&[4, 5], &params(50), 1, 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.plain_m_best >= 1.0 - 1e-12 && r.orlicz_best > 0.0));
        assert!(mw_probe(&[5, 4], &params(1), 1, 1).is_err());
    }

    #[test]
    fn invalid_seed_instance_is_rejected() {
        let grid = DyadicGrid::new(4).unwrap();
        let mut start = SearchInstance::constant(grid);
        start.family = SparseFamily::new(grid, [Cube::ROOT, Cube::new(1, 0).unwrap()], DEFAULT_ETA).unwrap();
        assert!(hill_climb(&Objective::RatioVsPlainM, &start, &params(1), 0).is_err());
    }
}
