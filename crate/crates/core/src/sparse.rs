//! Sparse families of dyadic cubes and the decompositions built on them.
//!
//! A family `S` is `η`-sparse when for every `Q ∈ S` the union of the
//! strictly smaller members of `S` inside `Q` has measure at most `η|Q|`.
//! Inclusion among dyadic cubes is a forest order, so each subfamily carries
//! a parent/children structure: the maximal strict descendants of `Q` are
//! its forest children, and they are pairwise disjoint.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dyadic::{CellSet, Cube, CubeField, DyadicGrid, StepFunction};
use crate::error::{Error, Result};
use crate::orlicz::split_spec;
use crate::weights::{keyed_params, lookup, required};

/// Sparsity parameter used by every theorem-level check.
pub const DEFAULT_ETA: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    depth: u32,
    eta: f64,
    cubes: Vec<Cube>,
}

impl SparseFamily {
    /// Collects `cubes` (deduplicated, sorted coarse to fine). Sparsity is
    /// not enforced here; see [`validate_sparsity`].
    pub fn new(grid: DyadicGrid, cubes: impl IntoIterator<Item = Cube>, eta: f64) -> Result<Self> {
        let mut cubes: Vec<Cube> = cubes.into_iter().collect();
        if let Some(bad) = cubes.iter().find(|q| !grid.contains(q)) {
            return Err(Error::InvalidParameter(format!(
                "cube {bad:?} is finer than the grid depth {}",
                grid.depth()
            )));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsity eta = {eta} must lie in (0, 1)"
            )));
        }
        cubes.sort();
        cubes.dedup();
        Ok(SparseFamily {
            depth: grid.depth(),
            eta,
            cubes,
        })
    }

    pub fn empty(grid: DyadicGrid) -> Self {
        SparseFamily {
            depth: grid.depth(),
            eta: DEFAULT_ETA,
            cubes: Vec::new(),
        }
    }

    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid::new(self.depth).expect("family depth is a valid grid depth")
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, cube: &Cube) -> bool {
        self.cubes.binary_search(cube).is_ok()
    }

    /// The family with `cube` added or removed.
    pub fn toggled(&self, cube: Cube) -> SparseFamily {
        let mut next = self.clone();
        match next.cubes.binary_search(&cube) {
            Ok(i) => {
                next.cubes.remove(i);
            }
            Err(i) => next.cubes.insert(i, cube),
        }
        next
    }
}

/// Parent/children links of a set of dyadic cubes under strict inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub cubes: Vec<Cube>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Number of strict ancestors inside the set.
    pub generation: Vec<u32>,
}

impl Forest {
    /// `cubes` must be sorted coarse to fine.
    pub fn build(cubes: &[Cube]) -> Self {
        let index: HashMap<Cube, usize> = cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let mut parent = vec![None; cubes.len()];
        let mut children = vec![Vec::new(); cubes.len()];
        let mut generation = vec![0u32; cubes.len()];
        for (i, q) in cubes.iter().enumerate() {
            if let Some(p) = q.ancestors().find_map(|a| index.get(&a).copied()) {
                parent[i] = Some(p);
                children[p].push(i);
                // parents precede children in coarse-to-fine order
                generation[i] = generation[p] + 1;
            }
        }
        Forest {
            cubes: cubes.to_vec(),
            parent,
            children,
            generation,
        }
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cubes.len()).filter(|&i| self.parent[i].is_none())
    }

    /// Descendants exactly `u` generations below `i`.
    pub fn descendants_at(&self, i: usize, u: u32) -> Vec<usize> {
        let mut frontier = vec![i];
        for _ in 0..u {
            frontier = frontier
                .iter()
                .flat_map(|&j| self.children[j].iter().copied())
                .collect();
            if frontier.is_empty() {
                break;
            }
        }
        frontier
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub passed: bool,
    /// Largest `|∪ strict descendants| / |Q|` over the family.
    pub worst_fraction: f64,
    pub worst_cube: Option<Cube>,
}

/// Exact check of the sparsity condition with integer cell counts.
pub fn validate_sparsity(family: &SparseFamily) -> SparsityReport {
    let forest = Forest::build(&family.cubes);
    let depth = family.depth;
    let mut report = SparsityReport {
        passed: true,
        worst_fraction: 0.0,
        worst_cube: None,
    };
    for (i, q) in forest.cubes.iter().enumerate() {
        let total = q.cell_count(depth);
        let covered: usize = forest.children[i]
            .iter()
            .map(|&c| forest.cubes[c].cell_count(depth))
            .sum();
        let fraction = covered as f64 / total as f64;
        if covered as f64 > family.eta * total as f64 {
            report.passed = false;
        }
        if report.worst_cube.is_none() || fraction > report.worst_fraction {
            report.worst_fraction = fraction;
            report.worst_cube = Some(*q);
        }
    }
    report
}

/// Which maximal descendant of a violating cube is dropped next.
pub enum PruneOrder<'a> {
    /// Largest first, leftmost among equals.
    Largest,
    Random(&'a mut ChaCha8Rng),
}

/// Makes a candidate set sparse by thinning the descendants of violators.
///
/// Cubes are visited deepest first. While the maximal strict descendants
/// of `Q` cover more than `η|Q|`, one of them is dropped and replaced by its
/// own maximal descendants. Cubes strictly between `Q` and a dropped cube do
/// not exist and ancestors of `Q` keep their coverage, so one pass suffices;
/// the coarsest candidates (in particular the root) always survive.
pub fn prune_to_sparse(
    grid: DyadicGrid,
    candidates: &[Cube],
    eta: f64,
    mut order: PruneOrder<'_>,
) -> Result<SparseFamily> {
    let depth = grid.depth();
    let mut present: Vec<Vec<bool>> = (0..=depth).map(|l| vec![false; 1 << l]).collect();
    for q in candidates {
        if !grid.contains(q) {
            return Err(Error::InvalidParameter(format!(
                "cube {q:?} is finer than the grid"
            )));
        }
        present[q.level as usize][q.index] = true;
    }
    let maximal_below = |present: &Vec<Vec<bool>>, q: Cube| -> Vec<Cube> {
        let mut out = Vec::new();
        if q.level == depth {
            return out;
        }
        let mut stack: Vec<Cube> = q.children().to_vec();
        while let Some(r) = stack.pop() {
            if present[r.level as usize][r.index] {
                out.push(r);
            } else if r.level < depth {
                stack.extend(r.children());
            }
        }
        out
    };
    for level in (0..depth).rev() {
        for index in 0..1usize << level {
            if !present[level as usize][index] {
                continue;
            }
            let q = Cube { level, index };
            let limit = eta * q.cell_count(depth) as f64;
            let mut kids = maximal_below(&present, q);
            let mut covered: usize = kids.iter().map(|c| c.cell_count(depth)).sum();
            while covered as f64 > limit {
                let pick = match &mut order {
                    PruneOrder::Largest => {
                        let mut best = 0;
                        for (i, c) in kids.iter().enumerate() {
                            if (c.level, c.index) < (kids[best].level, kids[best].index) {
                                best = i;
                            }
                        }
                        best
                    }
                    PruneOrder::Random(rng) => rng.random_range(0..kids.len()),
                };
                let dropped = kids.swap_remove(pick);
                present[dropped.level as usize][dropped.index] = false;
                let exposed = maximal_below(&present, dropped);
                covered -= dropped.cell_count(depth);
                covered += exposed.iter().map(|c| c.cell_count(depth)).sum::<usize>();
                kids.extend(exposed);
            }
        }
    }
    let kept = (0..=depth).flat_map(|level| {
        let row = &present[level as usize];
        (0..row.len())
            .filter(move |&i| row[i])
            .map(move |index| Cube { level, index })
    });
    SparseFamily::new(grid, kept.collect::<Vec<_>>(), eta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SparseStrategy {
    /// Stopping cubes of `f`: maximal `R` with `⟨f⟩_R > ratio ⟨f⟩_Q` below each stopping cube `Q`.
    StoppingCubes { ratio: f64 },
    /// Each cube independently with probability `density` (the root always), then pruned.
    RandomPruned { density: f64, seed: u64 },
}

impl SparseStrategy {
    pub fn generate(&self, grid: DyadicGrid, f: &StepFunction) -> Result<SparseFamily> {
        match self {
            SparseStrategy::StoppingCubes { ratio } => stopping_cubes(f, *ratio, DEFAULT_ETA),
            SparseStrategy::RandomPruned { density, seed } => {
                random_pruned(grid, *density, *seed, DEFAULT_ETA)
            }
        }
    }
}

impl fmt::Display for SparseStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparseStrategy::StoppingCubes { ratio } => write!(f, "stopping:ratio={ratio}"),
            SparseStrategy::RandomPruned { density, seed } => {
                write!(f, "random:density={density},seed={seed}")
            }
        }
    }
}

impl FromStr for SparseStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        const WHAT: &str = "sparse strategy";
        let (name, params) = split_spec(WHAT, s)?;
        match name {
            "stopping" => {
                let kv = keyed_params(WHAT, s, &params, &["ratio"])?;
                let ratio: f64 = lookup(WHAT, s, &kv, "ratio")?.unwrap_or(8.0);
                if !(ratio > 1.0) {
                    return Err(Error::parse(WHAT, s, "ratio must exceed 1"));
                }
                Ok(SparseStrategy::StoppingCubes { ratio })
            }
            "random" => {
                let kv = keyed_params(WHAT, s, &params, &["density", "seed"])?;
                let density: f64 = required(WHAT, s, &kv, "density")?;
                if !(0.0..=1.0).contains(&density) {
                    return Err(Error::parse(WHAT, s, "density must lie in [0, 1]"));
                }
                Ok(SparseStrategy::RandomPruned {
                    density,
                    seed: lookup(WHAT, s, &kv, "seed")?.unwrap_or(0),
                })
            }
            other => Err(Error::parse(WHAT, s, format!("unknown strategy `{other}`"))),
        }
    }
}

/// Calderón–Zygmund stopping cubes of `f`, pruned to `eta`-sparsity.
pub fn stopping_cubes(f: &StepFunction, ratio: f64, eta: f64) -> Result<SparseFamily> {
    if !(ratio > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stopping ratio {ratio} must exceed 1"
        )));
    }
    let grid = f.grid();
    if f.is_zero() {
        return SparseFamily::new(grid, [], eta);
    }
    let averages = CubeField::averages(f);
    let mut selected = Vec::new();
    let mut pending = vec![Cube::ROOT];
    while let Some(top) = pending.pop() {
        selected.push(top);
        let threshold = ratio * averages.get(&top);
        let mut stack: Vec<Cube> = if top.level < grid.depth() {
            top.children().to_vec()
        } else {
            vec![]
        };
        while let Some(r) = stack.pop() {
            if averages.get(&r) > threshold {
                pending.push(r);
            } else if r.level < grid.depth() {
                stack.extend(r.children());
            }
        }
    }
    prune_to_sparse(grid, &selected, eta, PruneOrder::Largest)
}

pub fn random_pruned(grid: DyadicGrid, density: f64, seed: u64, eta: f64) -> Result<SparseFamily> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!(
            "density {density} must lie in [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = vec![Cube::ROOT];
    for q in grid.cubes().skip(1) {
        if rng.random::<f64>() < density {
            candidates.push(q);
        }
    }
    prune_to_sparse(grid, &candidates, eta, PruneOrder::Random(&mut rng))
}

fn check_grid(family: &SparseFamily, f: &StepFunction) -> Result<()> {
    if family.depth != f.depth() {
        return Err(Error::GridMismatch {
            expected: family.depth,
            found: f.depth(),
        });
    }
    Ok(())
}

/// `Σ_{Q ∈ S} field(Q) 1_Q`, evaluated per cell.
fn sum_over_family(
    family: &SparseFamily,
    averages: &CubeField,
    term: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let grid = family.grid();
    let mut field = CubeField::from_fn(grid, |_| 0.0);
    for q in &family.cubes {
        field.set(q, term(averages.get(q)));
    }
    field.ancestor_sum()
}

/// `Tf = Σ_{Q ∈ S} ⟨f⟩_Q 1_Q`.
pub fn apply_sparse(family: &SparseFamily, f: &StepFunction) -> Result<StepFunction> {
    check_grid(family, f)?;
    apply_sparse_with(family, &CubeField::averages(f))
}

pub fn apply_sparse_with(family: &SparseFamily, averages: &CubeField) -> Result<StepFunction> {
    StepFunction::new(family.depth, sum_over_family(family, averages, |a| a))
}

/// `Sf = (Σ_{Q ∈ S} ⟨f⟩_Q^2 1_Q)^{1/2}`.
pub fn apply_sparse_square(family: &SparseFamily, f: &StepFunction) -> Result<StepFunction> {
    check_grid(family, f)?;
    apply_sparse_square_with(family, &CubeField::averages(f))
}

pub fn apply_sparse_square_with(
    family: &SparseFamily,
    averages: &CubeField,
) -> Result<StepFunction> {
    let sq = sum_over_family(family, averages, |a| a * a);
    StepFunction::new(family.depth, sq.into_iter().map(f64::sqrt).collect())
}

/// The integer `k` with `base^{-k-1} < a ≤ base^{-k}`.
pub fn band_index(a: f64, base: u32) -> i32 {
    assert!(
        a > 0.0 && a.is_finite(),
        "band index of a non-positive average"
    );
    let b = base as f64;
    let mut k = (-a.ln() / b.ln()).floor() as i32;
    while a > b.powi(-k) {
        k -= 1;
    }
    while a <= b.powi(-k - 1) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSplit {
    pub base: u32,
    pub bands: BTreeMap<i32, Vec<Cube>>,
    /// Cubes with `⟨f⟩_Q = 0`; no band contains them.
    pub zero_average: Vec<Cube>,
}

impl BandSplit {
    pub fn band(&self, k: i32) -> &[Cube] {
        self.bands.get(&k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Bands `k` with `base^{-k} ≤ cap`, i.e. cubes with `⟨f⟩_Q ≤ cap` when
    /// `cap` is a power of the base.
    pub fn bands_at_most(&self, cap: f64) -> impl Iterator<Item = (i32, &Vec<Cube>)> {
        let b = self.base as f64;
        self.bands
            .iter()
            .filter(move |(k, _)| b.powi(-**k) <= cap)
            .map(|(k, v)| (*k, v))
    }
}

/// Assigns each cube to its `base`-adic band of `⟨f⟩_Q` (base 4 or 2).
pub fn split_by_average(
    family: &SparseFamily,
    averages: &CubeField,
    base: u32,
) -> Result<BandSplit> {
    if base != 2 && base != 4 {
        return Err(Error::InvalidParameter(format!(
            "band base must be 2 or 4, got {base}"
        )));
    }
    let mut split = BandSplit {
        base,
        bands: BTreeMap::new(),
        zero_average: Vec::new(),
    };
    for q in &family.cubes {
        let a = averages.get(q);
        if a > 0.0 {
            split.bands.entry(band_index(a, base)).or_default().push(*q);
        } else {
            split.zero_average.push(*q);
        }
    }
    Ok(split)
}

/// One band of a family peeled into layers of maximal cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredFamily {
    pub band: i32,
    pub depth: u32,
    pub forest: Forest,
    /// Indices into `forest.cubes`, grouped by layer.
    pub layers: Vec<Vec<usize>>,
}

/// Peels `cubes` into layers: layer 0 the maximal cubes, layer `v + 1` the
/// maximal cubes of what remains. Layer index equals the number of strict
/// ancestors inside the band.
pub fn layer_decompose(band: i32, depth: u32, cubes: &[Cube]) -> LayeredFamily {
    let mut sorted = cubes.to_vec();
    sorted.sort();
    sorted.dedup();
    let forest = Forest::build(&sorted);
    let count = forest
        .generation
        .iter()
        .copied()
        .max()
        .map_or(0, |g| g as usize + 1);
    let mut layers = vec![Vec::new(); count];
    for (i, &g) in forest.generation.iter().enumerate() {
        layers[g as usize].push(i);
    }
    LayeredFamily {
        band,
        depth,
        forest,
        layers,
    }
}

impl LayeredFamily {
    pub fn len(&self) -> usize {
        self.forest.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forest.cubes.is_empty()
    }

    pub fn cube(&self, i: usize) -> Cube {
        self.forest.cubes[i]
    }

    pub fn layer_of(&self, i: usize) -> u32 {
        self.forest.generation[i]
    }

    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid::new(self.depth).expect("valid depth")
    }

    /// `E_Q = Q \ ∪{Q' in the next layer}`.
    pub fn exceptional_set(&self, i: usize) -> CellSet {
        let mut set = CellSet::from_cube(self.grid(), &self.cube(i));
        for &c in &self.forest.children[i] {
            set.remove_cube(&self.cube(c));
        }
        set
    }

    /// Cell count of `E_Q`.
    pub fn exceptional_cells(&self, i: usize) -> usize {
        let own = self.cube(i).cell_count(self.depth);
        own - self.forest.children[i]
            .iter()
            .map(|&c| self.cube(c).cell_count(self.depth))
            .sum::<usize>()
    }

    /// `∫_{E_Q} f` from the cube integrals of `f`.
    pub fn exceptional_integral(&self, i: usize, f: &StepFunction) -> f64 {
        let q = self.cube(i);
        let mut total = f.integral_over(&q);
        for &c in &self.forest.children[i] {
            total -= f.integral_over(&self.cube(c));
        }
        total
    }

    /// Indices of the layer-`(v+u)` cubes inside the layer-`v` cube `i`.
    pub fn deep_descendants(&self, i: usize, u: u32) -> Vec<usize> {
        self.forest.descendants_at(i, u)
    }

    /// `Q_u = ∪{Q' ∈ S_{k,v+u} : Q' ⊂ Q}`.
    pub fn deep_descendant_set(&self, i: usize, u: u32) -> Result<CellSet> {
        if u == 0 {
            return Err(Error::InvalidParameter(
                "deep descendant depth u must be >= 1".into(),
            ));
        }
        let mut set = CellSet::empty(self.grid());
        for j in self.deep_descendants(i, u) {
            set.insert_cube(&self.cube(j));
        }
        Ok(set)
    }

    pub fn deep_descendant_cells(&self, i: usize, u: u32) -> usize {
        self.deep_descendants(i, u)
            .iter()
            .map(|&j| self.cube(j).cell_count(self.depth))
            .sum()
    }

    /// `b(x) = Σ_{Q in the band} 1_Q(x)`, exact integer counts.
    pub fn counting_function(&self) -> Vec<u32> {
        let mut counts = vec![0u32; 1 << self.depth];
        for q in &self.forest.cubes {
            for c in q.cell_range(self.depth) {
                counts[c] += 1;
            }
        }
        counts
    }

    /// Union of the maximal cubes.
    pub fn support(&self) -> CellSet {
        let mut set = CellSet::empty(self.grid());
        for i in self.forest.roots() {
            set.insert_cube(&self.cube(i));
        }
        set
    }

    /// JSON tree `layer → [{cube, e_q}]`.
    pub fn report(&self) -> Value {
        let layers: serde_json::Map<String, Value> = self
            .layers
            .iter()
            .enumerate()
            .map(|(v, members)| {
                let entries: Vec<Value> = members
                    .iter()
                    .map(|&i| {
                        json!({
                            "cube": self.cube(i),
                            "e_q": self.exceptional_set(i).to_hex(),
                        })
                    })
                    .collect();
                (v.to_string(), Value::Array(entries))
            })
            .collect();
        Value::Object(layers)
    }
}

/// Layered bands of a base-4 split (the `S_k` families).
pub fn band_layers(split: &BandSplit, depth: u32) -> BTreeMap<i32, LayeredFamily> {
    split
        .bands
        .iter()
        .map(|(k, cubes)| (*k, layer_decompose(*k, depth, cubes)))
        .collect()
}

/// JSON tree `k → layer → [{cube, e_q}]`.
pub fn band_layers_report(layers: &BTreeMap<i32, LayeredFamily>) -> Value {
    Value::Object(
        layers
            .iter()
            .map(|(k, l)| (k.to_string(), l.report()))
            .collect(),
    )
}

/// Base-2 decomposition `S_m = {Q : 2^{-m-1} < ⟨f⟩_Q ≤ 2^{-m}}` with
/// `E_m(Q)`, counting functions `b_m` and supports `B_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFamily {
    pub depth: u32,
    pub bands: BTreeMap<i32, LayeredFamily>,
    pub zero_average: Vec<Cube>,
}

pub fn power_decompose(family: &SparseFamily, f: &StepFunction) -> Result<PowerFamily> {
    check_grid(family, f)?;
    let averages = CubeField::averages(f);
    let split = split_by_average(family, &averages, 2)?;
    Ok(PowerFamily {
        depth: family.depth,
        bands: band_layers(&split, family.depth),
        zero_average: split.zero_average,
    })
}

impl PowerFamily {
    /// `(S_m f)^2` per cell.
    pub fn band_square(&self, m: i32, averages: &CubeField) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.depth];
        if let Some(band) = self.bands.get(&m) {
            for q in &band.forest.cubes {
                let a = averages.get(q);
                for c in q.cell_range(self.depth) {
                    out[c] += a * a;
                }
            }
        }
        out
    }

    pub fn counting_function(&self, m: i32) -> Vec<u32> {
        self.bands
            .get(&m)
            .map(LayeredFamily::counting_function)
            .unwrap_or_else(|| vec![0; 1 << self.depth])
    }

    pub fn support(&self, m: i32) -> CellSet {
        self.bands
            .get(&m)
            .map(LayeredFamily::support)
            .unwrap_or_else(|| CellSet::empty(DyadicGrid::new(self.depth).expect("valid depth")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(depth: u32) -> DyadicGrid {
        DyadicGrid::new(depth).unwrap()
    }

    fn cube(level: u32, index: usize) -> Cube {
        Cube::new(level, index).unwrap()
    }

    fn family(depth: u32, cubes: &[(u32, usize)]) -> SparseFamily {
        SparseFamily::new(
            grid(depth),
            cubes.iter().map(|&(l, i)| cube(l, i)),
            DEFAULT_ETA,
        )
        .unwrap()
    }

    #[test]
    fn sparsity_examples() {
        let ok = validate_sparsity(&family(4, &[(0, 0), (3, 0)]));
        assert!(ok.passed);
        assert_eq!(ok.worst_fraction, 0.125);
        let bad = validate_sparsity(&family(4, &[(0, 0), (1, 0)]));
        assert!(!bad.passed);
        assert_eq!(bad.worst_fraction, 0.5);
        assert_eq!(bad.worst_cube, Some(Cube::ROOT));
        let antichain = validate_sparsity(&family(4, &[(2, 0), (2, 1), (3, 7)]));
        assert!(antichain.passed);
        assert_eq!(antichain.worst_fraction, 0.0);
    }

    #[test]
    fn stopping_cubes_of_constant() {
        let f = StepFunction::constant(grid(6), 1.0).unwrap();
        let fam = stopping_cubes(&f, 2.0, DEFAULT_ETA).unwrap();
        assert_eq!(fam.cubes(), &[Cube::ROOT]);
        let zero = StepFunction::zero(grid(6));
        assert!(stopping_cubes(&zero, 2.0, DEFAULT_ETA).unwrap().is_empty());
    }

    #[test]
    fn stopping_cubes_of_a_spike() {
        // averages double per level, and the ratio 8 must be exceeded strictly
        let mut values = vec![0.0; 512];
        values[0] = 1.0;
        let f = StepFunction::new(9, values).unwrap();
        let fam = stopping_cubes(&f, 8.0, DEFAULT_ETA).unwrap();
        assert!(validate_sparsity(&fam).passed);
        assert_eq!(fam.cubes(), &[Cube::ROOT, cube(4, 0), cube(8, 0)]);
    }

    #[test]
    fn random_pruned_conventions() {
        let fam = random_pruned(grid(8), 0.0, 3, DEFAULT_ETA).unwrap();
        assert_eq!(fam.cubes(), &[Cube::ROOT]);
        let fam = random_pruned(grid(10), 0.5, 7, DEFAULT_ETA).unwrap();
        assert!(validate_sparsity(&fam).passed);
        assert!(!fam.is_empty());
        assert_eq!(fam, random_pruned(grid(10), 0.5, 7, DEFAULT_ETA).unwrap());
    }

    #[test]
    fn sparse_operator_examples() {
        let g = grid(4);
        let one = StepFunction::constant(g, 1.0).unwrap();
        let root = family(4, &[(0, 0)]);
        assert_eq!(apply_sparse(&root, &one).unwrap(), one);
        assert_eq!(apply_sparse_square(&root, &one).unwrap(), one);
        assert!(apply_sparse(&SparseFamily::empty(g), &one)
            .unwrap()
            .is_zero());

        let f = StepFunction::indicator(g, &cube(3, 0));
        let fam = family(4, &[(0, 0), (3, 0)]);
        let tf = apply_sparse(&fam, &f).unwrap();
        let sf = apply_sparse_square(&fam, &f).unwrap();
        for c in 0..16 {
            if c < 2 {
                assert_eq!(tf.value(c), 1.0 + 0.125);
                assert_eq!(sf.value(c), (1.0f64 + 1.0 / 64.0).sqrt());
            } else {
                assert_eq!(tf.value(c), 0.125);
                assert_eq!(sf.value(c), 0.125);
            }
        }
        // a single cube: S f = T f
        let fam = family(4, &[(2, 1)]);
        assert_eq!(
            apply_sparse(&fam, &f).unwrap(),
            apply_sparse_square(&fam, &f).unwrap()
        );
    }

    #[test]
    fn band_indices() {
        assert_eq!(band_index(0.2, 4), 1);
        assert_eq!(band_index(0.25, 4), 1);
        assert_eq!(band_index(0.0625, 4), 2);
        assert_eq!(band_index(0.3, 2), 1);
        assert_eq!(band_index(1.0, 2), 0);
        assert_eq!(band_index(3.0, 2), -2);
        assert_eq!(band_index(0.5, 2), 1);
    }

    #[test]
    fn split_reports_zero_averages() {
        let f = StepFunction::indicator(grid(3), &cube(1, 0));
        let fam = family(3, &[(0, 0), (2, 3)]);
        let split = split_by_average(&fam, &CubeField::averages(&f), 4).unwrap();
        assert_eq!(split.zero_average, vec![cube(2, 3)]);
        assert_eq!(split.band(0), &[Cube::ROOT]);
        assert!(split_by_average(&fam, &CubeField::averages(&f), 3).is_err());
    }

    #[test]
    fn chain_layers() {
        let chain = [cube(0, 0), cube(3, 0), cube(6, 0)];
        let layered = layer_decompose(1, 8, &chain);
        assert_eq!(layered.layers, vec![vec![0], vec![1], vec![2]]);
        let mut e0 = CellSet::from_cube(grid(8), &chain[0]);
        e0.remove_cube(&chain[1]);
        assert_eq!(layered.exceptional_set(0), e0);
        assert_eq!(
            layered.deep_descendant_set(0, 1).unwrap(),
            CellSet::from_cube(grid(8), &chain[1])
        );
        assert!(layered.deep_descendant_set(0, 5).unwrap().is_empty());
        assert!(layered.deep_descendant_set(0, 0).is_err());
    }

    #[test]
    fn antichain_layers() {
        let cubes = [cube(2, 0), cube(2, 1), cube(3, 7)];
        let layered = layer_decompose(1, 5, &cubes);
        assert_eq!(layered.layers.len(), 1);
        for i in 0..3 {
            assert_eq!(
                layered.exceptional_set(i),
                CellSet::from_cube(grid(5), &layered.cube(i))
            );
        }
    }

    #[test]
    fn power_decomposition_single_cube() {
        let g = grid(4);
        let f = StepFunction::constant(g, 0.3).unwrap();
        let q = cube(1, 1);
        let fam = family(4, &[(1, 1)]);
        let pf = power_decompose(&fam, &f).unwrap();
        assert_eq!(pf.bands.keys().copied().collect::<Vec<_>>(), vec![1]);
        let band = &pf.bands[&1];
        assert_eq!(band.exceptional_set(0), CellSet::from_cube(g, &q));
        assert_eq!(pf.support(1), CellSet::from_cube(g, &q));
        let b = pf.counting_function(1);
        assert!(b
            .iter()
            .enumerate()
            .all(|(c, &n)| n == u32::from(q.cell_range(4).contains(&c))));
    }

    #[test]
    fn spec_strings() {
        for s in ["stopping:ratio=8", "random:density=0.5,seed=7"] {
            assert_eq!(s.parse::<SparseStrategy>().unwrap().to_string(), s);
        }
        assert!("stopping:ratio=1".parse::<SparseStrategy>().is_err());
        assert!("random:density=2".parse::<SparseStrategy>().is_err());
    }

    #[test]
    fn family_json_shape() {
        let fam = family(3, &[(0, 0), (3, 5)]);
        let json = serde_json::to_value(&fam).unwrap();
        assert_eq!(
            json["cubes"],
            json!([{"level": 0, "index": 0}, {"level": 3, "index": 5}])
        );
        let back: SparseFamily = serde_json::from_value(json).unwrap();
        assert_eq!(back, fam);
    }
}
