//! Finite dyadic model of `[0, 1)`.
//!
//! Everything in the crate lives on a [`DyadicGrid`] of depth `N`: functions
//! are constant on the `2^N` finest cells, so integrals, averages and
//! maximal functions are exact finite computations.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported depth (`2^24` cells).
pub const MAX_DEPTH: u32 = 24;

/// Above this many terms sums switch to compensated accumulation.
const COMPENSATED_THRESHOLD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicGrid {
    depth: u32,
}

impl DyadicGrid {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "grid depth must lie in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        Ok(DyadicGrid { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of finest cells, `2^N`.
    pub fn cells(&self) -> usize {
        1 << self.depth
    }

    /// Number of dyadic cubes, `2^{N+1} - 1`.
    pub fn cube_count(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    pub fn cell_length(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// All cubes, coarse to fine, left to right within a level.
    pub fn cubes(&self) -> impl Iterator<Item = Cube> {
        let depth = self.depth;
        (0..=depth).flat_map(|level| (0..1usize << level).map(move |index| Cube { level, index }))
    }

    pub fn contains(&self, cube: &Cube) -> bool {
        cube.level <= self.depth
    }

    /// The finest cube containing cell `cell`.
    pub fn cell_cube(&self, cell: usize) -> Cube {
        Cube {
            level: self.depth,
            index: cell,
        }
    }
}

/// A dyadic interval `[i 2^{-j}, (i+1) 2^{-j})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub level: u32,
    pub index: usize,
}

impl Cube {
    pub const ROOT: Cube = Cube { level: 0, index: 0 };

    pub fn new(level: u32, index: usize) -> Result<Self> {
        if level > MAX_DEPTH || index >= 1usize << level {
            return Err(Error::InvalidParameter(format!(
                "cube index {index} out of range at level {level}"
            )));
        }
        Ok(Cube { level, index })
    }

    /// Lebesgue measure `2^{-level}`.
    pub fn measure(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn left_endpoint(&self) -> f64 {
        self.index as f64 * self.measure()
    }

    /// Number of finest cells inside the cube on a grid of the given depth.
    pub fn cell_count(&self, depth: u32) -> usize {
        debug_assert!(self.level <= depth);
        1 << (depth - self.level)
    }

    pub fn cell_range(&self, depth: u32) -> Range<usize> {
        let shift = depth - self.level;
        (self.index << shift)..((self.index + 1) << shift)
    }

    pub fn parent(&self) -> Option<Cube> {
        (self.level > 0).then(|| Cube {
            level: self.level - 1,
            index: self.index >> 1,
        })
    }

    pub fn children(&self) -> [Cube; 2] {
        let level = self.level + 1;
        [
            Cube {
                level,
                index: 2 * self.index,
            },
            Cube {
                level,
                index: 2 * self.index + 1,
            },
        ]
    }

    /// The ancestor at `level`, or `None` if `level` is finer than the cube.
    pub fn ancestor_at(&self, level: u32) -> Option<Cube> {
        (level <= self.level).then(|| Cube {
            level,
            index: self.index >> (self.level - level),
        })
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self) -> impl Iterator<Item = Cube> {
        let me = *self;
        (0..me.level).rev().map(move |l| Cube {
            level: l,
            index: me.index >> (me.level - l),
        })
    }

    /// Inclusive containment: `other ⊆ self`.
    pub fn contains(&self, other: &Cube) -> bool {
        other.level >= self.level && other.index >> (other.level - self.level) == self.index
    }

    pub fn strictly_contains(&self, other: &Cube) -> bool {
        other.level > self.level && self.contains(other)
    }
}

impl PartialOrd for Cube {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cube {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.level, self.index).cmp(&(other.level, other.index))
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let len = self.measure();
        write!(
            f,
            "[{}, {})",
            self.left_endpoint(),
            self.left_endpoint() + len
        )
    }
}

/// Sum with Neumaier compensation once the input is large.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let iter = values.into_iter().peekable();
    let (lo, _) = iter.size_hint();
    if lo <= COMPENSATED_THRESHOLD {
        return iter.sum();
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in iter {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A nonnegative function constant on each finest cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFunction")]
pub struct StepFunction {
    depth: u32,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepFunction {
    depth: u32,
    values: Vec<f64>,
}

impl TryFrom<RawStepFunction> for StepFunction {
    type Error = Error;

    fn try_from(raw: RawStepFunction) -> Result<Self> {
        StepFunction::new(raw.depth, raw.values)
    }
}

impl StepFunction {
    pub fn new(depth: u32, values: Vec<f64>) -> Result<Self> {
        let grid = DyadicGrid::new(depth)?;
        if values.len() != grid.cells() {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} needs {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "cell {i} has value {v}; step functions are finite and nonnegative"
            )));
        }
        Ok(StepFunction { depth, values })
    }

    pub fn constant(grid: DyadicGrid, c: f64) -> Result<Self> {
        StepFunction::new(grid.depth, vec![c; grid.cells()])
    }

    pub fn zero(grid: DyadicGrid) -> Self {
        StepFunction {
            depth: grid.depth,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn indicator(grid: DyadicGrid, cube: &Cube) -> Self {
        let mut values = vec![0.0; grid.cells()];
        values[cube.cell_range(grid.depth)].fill(1.0);
        StepFunction {
            depth: grid.depth,
            values,
        }
    }

    pub fn indicator_of(set: &CellSet) -> Self {
        StepFunction {
            depth: set.depth,
            values: (0..set.len())
                .map(|i| if set.contains(i) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid { depth: self.depth }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_same_grid(&self, other: &StepFunction) -> Result<()> {
        if self.depth != other.depth {
            return Err(Error::GridMismatch {
                expected: self.depth,
                found: other.depth,
            });
        }
        Ok(())
    }

    /// `∫_Q f`.
    pub fn integral_over(&self, cube: &Cube) -> f64 {
        let sum = accurate_sum(self.values[cube.cell_range(self.depth)].iter().copied());
        sum * self.grid().cell_length()
    }

    pub fn integral(&self) -> f64 {
        self.integral_over(&Cube::ROOT)
    }

    /// `⟨f⟩_Q = |Q|^{-1} ∫_Q f`.
    pub fn average(&self, cube: &Cube) -> f64 {
        let range = cube.cell_range(self.depth);
        let n = range.len();
        accurate_sum(self.values[range].iter().copied()) / n as f64
    }

    /// `∫ f g`.
    pub fn inner(&self, other: &StepFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let sum = accurate_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b));
        Ok(sum * self.grid().cell_length())
    }

    /// `(∫ |f|^p w)^{1/p}`.
    pub fn lp_norm(&self, weight: &StepFunction, p: f64) -> Result<f64> {
        self.check_same_grid(weight)?;
        let sum = accurate_sum(
            self.values
                .iter()
                .zip(&weight.values)
                .map(|(f, w)| f.powf(p) * w),
        );
        Ok((sum * self.grid().cell_length()).powf(1.0 / p))
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<StepFunction> {
        StepFunction::new(self.depth, self.values.iter().map(|&v| op(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<StepFunction> {
        self.map(|v| c * v)
    }

    pub fn powf(&self, r: f64) -> Result<StepFunction> {
        self.map(|v| v.powf(r))
    }

    pub fn product(&self, other: &StepFunction) -> Result<StepFunction> {
        self.check_same_grid(other)?;
        StepFunction::new(
            self.depth,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Restriction `f 1_E`.
    pub fn restricted(&self, set: &CellSet) -> StepFunction {
        debug_assert_eq!(set.depth, self.depth);
        StepFunction {
            depth: self.depth,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| if set.contains(i) { v } else { 0.0 })
                .collect(),
        }
    }

    /// Multiply the values on one cube by `factor`.
    pub fn scale_on(&mut self, cube: &Cube, factor: f64) {
        for v in &mut self.values[cube.cell_range(self.depth)] {
            *v *= factor;
        }
    }

    /// Little-endian binary form: `u32` depth followed by `2^N` `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.values.len());
        out.extend_from_slice(&self.depth.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header: [u8; 4] = bytes
            .get(..4)
            .and_then(|h| h.try_into().ok())
            .ok_or_else(|| Error::parse("step function", "<binary>", "missing depth header"))?;
        let depth = u32::from_le_bytes(header);
        let body = &bytes[4..];
        if body.len() % 8 != 0 {
            return Err(Error::parse(
                "step function",
                "<binary>",
                "truncated value block",
            ));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        StepFunction::new(depth, values)
    }
}

/// Values attached to every cube of a grid, indexed `[level][index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeField {
    depth: u32,
    levels: Vec<Vec<f64>>,
}

impl CubeField {
    pub fn from_fn(grid: DyadicGrid, mut value: impl FnMut(Cube) -> f64) -> Self {
        let levels = (0..=grid.depth)
            .map(|level| {
                (0..1usize << level)
                    .map(|index| value(Cube { level, index }))
                    .collect()
            })
            .collect();
        CubeField {
            depth: grid.depth,
            levels,
        }
    }

    /// Averages of `f` on every cube, built bottom-up by pairwise summation.
    pub fn averages(f: &StepFunction) -> Self {
        let depth = f.depth;
        let mut levels = vec![Vec::new(); depth as usize + 1];
        levels[depth as usize] = f.values.clone();
        for level in (0..depth as usize).rev() {
            let finer = &levels[level + 1];
            let coarser = finer.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            levels[level] = coarser;
        }
        CubeField { depth, levels }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn get(&self, cube: &Cube) -> f64 {
        self.levels[cube.level as usize][cube.index]
    }

    pub fn set(&mut self, cube: &Cube, value: f64) {
        self.levels[cube.level as usize][cube.index] = value;
    }

    pub fn level(&self, level: u32) -> &[f64] {
        &self.levels[level as usize]
    }

    pub fn max(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `x ↦ max_{Q ∋ x} field(Q)`, propagated top-down.
    pub fn ancestor_max(&self) -> StepFunction {
        let mut current = self.levels[0].clone();
        for level in 1..=self.depth as usize {
            current = self.levels[level]
                .iter()
                .enumerate()
                .map(|(i, &v)| v.max(current[i >> 1]))
                .collect();
        }
        StepFunction {
            depth: self.depth,
            values: current,
        }
    }

    /// `x ↦ Σ_{Q ∋ x} field(Q)`.
    pub fn ancestor_sum(&self) -> Vec<f64> {
        let mut current = self.levels[0].clone();
        for level in 1..=self.depth as usize {
            current = self.levels[level]
                .iter()
                .enumerate()
                .map(|(i, &v)| v + current[i >> 1])
                .collect();
        }
        current
    }
}

/// A union of finest cells, stored as a bitmask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "HexCellSet", try_from = "HexCellSet")]
pub struct CellSet {
    depth: u32,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct HexCellSet {
    depth: u32,
    mask: String,
}

impl From<CellSet> for HexCellSet {
    fn from(set: CellSet) -> Self {
        HexCellSet {
            depth: set.depth,
            mask: set.to_hex(),
        }
    }
}

impl TryFrom<HexCellSet> for CellSet {
    type Error = Error;

    fn try_from(raw: HexCellSet) -> Result<Self> {
        CellSet::from_hex(raw.depth, &raw.mask)
    }
}

impl CellSet {
    pub fn empty(grid: DyadicGrid) -> Self {
        CellSet {
            depth: grid.depth,
            words: vec![0; grid.cells().div_ceil(64)],
        }
    }

    pub fn full(grid: DyadicGrid) -> Self {
        let mut set = CellSet::empty(grid);
        set.insert_range(0..grid.cells());
        set
    }

    pub fn from_cube(grid: DyadicGrid, cube: &Cube) -> Self {
        let mut set = CellSet::empty(grid);
        set.insert_cube(cube);
        set
    }

    pub fn from_predicate(grid: DyadicGrid, pred: impl Fn(usize) -> bool) -> Self {
        let mut set = CellSet::empty(grid);
        for i in 0..grid.cells() {
            if pred(i) {
                set.insert(i);
            }
        }
        set
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of cells in the ambient grid.
    pub fn len(&self) -> usize {
        1 << self.depth
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.words[cell / 64] >> (cell % 64) & 1 == 1
    }

    pub fn insert(&mut self, cell: usize) {
        self.words[cell / 64] |= 1 << (cell % 64);
    }

    pub fn remove(&mut self, cell: usize) {
        self.words[cell / 64] &= !(1 << (cell % 64));
    }

    pub fn insert_range(&mut self, range: Range<usize>) {
        for cell in range {
            self.insert(cell);
        }
    }

    pub fn insert_cube(&mut self, cube: &Cube) {
        self.insert_range(cube.cell_range(self.depth));
    }

    pub fn remove_cube(&mut self, cube: &Cube) {
        for cell in cube.cell_range(self.depth) {
            self.remove(cell);
        }
    }

    /// Number of cells in the set.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_in(&self, cube: &Cube) -> usize {
        cube.cell_range(self.depth)
            .filter(|&c| self.contains(c))
            .count()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * (-(self.depth as f64)).exp2()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&c| self.contains(c))
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    fn zip_words(&self, other: &CellSet, op: impl Fn(u64, u64) -> u64) -> CellSet {
        assert_eq!(self.depth, other.depth, "cell sets on different grids");
        CellSet {
            depth: self.depth,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Hex string of the little-endian byte image: cell `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_hex(&self) -> String {
        let nbytes = self.len().div_ceil(8);
        let bytes: Vec<u8> = self
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(depth: u32, mask: &str) -> Result<Self> {
        let grid = DyadicGrid::new(depth)?;
        let bytes = hex::decode(mask).map_err(|e| Error::parse("cell set", mask, e.to_string()))?;
        if bytes.len() != grid.cells().div_ceil(8) {
            return Err(Error::parse(
                "cell set",
                mask,
                format!(
                    "expected {} bytes for depth {depth}",
                    grid.cells().div_ceil(8)
                ),
            ));
        }
        let mut set = CellSet::empty(grid);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            set.words[i] = u64::from_le_bytes(word);
        }
        if set.iter_raw_bits().any(|c| c >= grid.cells()) {
            return Err(Error::parse("cell set", mask, "bits set beyond the grid"));
        }
        Ok(set)
    }

    fn iter_raw_bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64)
                .filter(move |b| w >> b & 1 == 1)
                .map(move |b| wi * 64 + b)
        })
    }
}

/// `w(E) = ∫_E w`.
pub fn weighted_measure(w: &StepFunction, set: &CellSet) -> f64 {
    debug_assert_eq!(w.depth, set.depth);
    let sum = accurate_sum(set.iter().map(|c| w.values[c]));
    sum * w.grid().cell_length()
}

/// `{g > λ}`, strict.
pub fn super_level_set(g: &StepFunction, lambda: f64) -> CellSet {
    CellSet::from_predicate(g.grid(), |c| g.values[c] > lambda)
}

/// `sup_λ λ w(g > λ)^{1/p}`, realised as `max_v v · w(g ≥ v)^{1/p}` over the
/// distinct values `v` of `g`.
pub fn weak_norm(g: &StepFunction, w: &StepFunction, p: f64) -> Result<f64> {
    g.check_same_grid(w)?;
    if p < 1.0 {
        return Err(Error::Domain(format!("weak norm exponent p = {p} < 1")));
    }
    let cell = g.grid().cell_length();
    let mut pairs: Vec<(f64, f64)> = g
        .values
        .iter()
        .zip(&w.values)
        .filter(|(gv, _)| **gv > 0.0)
        .map(|(&gv, &wv)| (gv, wv))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut mass = 0.0f64;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            mass += pairs[i].1;
            i += 1;
        }
        best = best.max(v * (mass * cell).powf(1.0 / p));
    }
    Ok(best)
}

/// Dyadic Hardy–Littlewood maximal function `Mf(x) = max_{Q ∋ x} ⟨|f|⟩_Q`.
pub fn dyadic_maximal(f: &StepFunction) -> StepFunction {
    CubeField::averages(f).ancestor_max()
}

/// Maximal function restricted to the subcubes of `cube`, evaluated on the
/// cells of `cube` (in order). Used for `M(w 1_Q)` on `Q`.
pub fn local_maximal(averages: &CubeField, cube: &Cube) -> Vec<f64> {
    let depth = averages.depth();
    let mut current = vec![averages.get(cube)];
    for level in cube.level + 1..=depth {
        let offset = cube.index << (level - cube.level);
        let row = &averages.level(level)[offset..offset + (1 << (level - cube.level))];
        current = row
            .iter()
            .enumerate()
            .map(|(i, &v)| v.max(current[i >> 1]))
            .collect();
    }
    current
}
