//! Square-function verifiers: the weak-type theorem with its three-part
//! split, the `A_∞` tail lemma, the `A_p` band bound, and the spike sweep.

use serde::{Deserialize, Serialize};

use crate::dyadic::{
    dyadic_maximal, weak_norm, CellSet, Cube, CubeField, DyadicGrid, StepFunction,
};
use crate::error::{Error, Result};
use crate::orlicz::log_k;
use crate::sparse::{
    apply_sparse_square, power_decompose, stopping_cubes, PowerFamily, SparseFamily, DEFAULT_ETA,
};
use crate::verify::{CheckSample, Instance, Sample, Verifier, WeightTable, SUM_TOLERANCE};
use crate::weights::{
    a1_constant, ainf_constant, ap_constant, dual_weight, min_reverse_holder_c,
    reverse_holder_exponent, Weight, WeightSpec,
};

/// Weight characteristics used by the square-function bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    /// `[w]_{A_p}` (`[w]_{A_1}` when `p = 1`).
    pub ap: f64,
    pub ainf: f64,
}

impl WeightConstants {
    pub fn compute(w: &Weight, p: f64) -> Result<Self> {
        let ap = if p == 1.0 {
            a1_constant(w)
        } else {
            ap_constant(w, p)?
        };
        Ok(WeightConstants {
            ap,
            ainf: ainf_constant(w),
        })
    }

    /// `C_p(w)`: `[w]_{A_p}^{1/p}` for `p < 2`, `([w]_{A_p} log_1 [w]_{A_∞})^{1/2}` otherwise.
    pub fn square_bound(&self, p: f64) -> f64 {
        if p < 2.0 {
            self.ap.powf(1.0 / p)
        } else {
            (self.ap * log_k(1, self.ainf)).sqrt()
        }
    }
}

/// `m₀ = ⌈log₂(1 + [w]_{A_∞})⌉ + 1`.
pub fn split_level(ainf: f64) -> i32 {
    (1.0 + ainf).log2().ceil() as i32 + 1
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "p = {p} must be a finite number >= 1"
        )));
    }
    Ok(())
}

/// `∫ g w` over the cells of `set`.
fn weighted_integral(g: &[f64], w: &StepFunction, set: impl Iterator<Item = usize>) -> f64 {
    let h = w.grid().cell_length();
    set.map(|c| g[c] * w.value(c) * h).sum()
}

/// `‖g‖_{L^p(w)}^p` for a per-cell vector.
fn lp_power(g: &[f64], w: &StepFunction, p: f64) -> f64 {
    weighted_integral(
        &g.iter().map(|v| v.powf(p)).collect::<Vec<_>>(),
        w,
        0..g.len(),
    )
}

/// Per-cell `Σ_{m ∈ range} (S_m f)^2`.
fn band_squares(pf: &PowerFamily, averages: &CubeField, keep: impl Fn(i32) -> bool) -> Vec<f64> {
    let mut out = vec![0.0; 1 << pf.depth];
    for &m in pf.bands.keys().filter(|m| keep(**m)) {
        for (o, v) in out.iter_mut().zip(pf.band_square(m, averages)) {
            *o += v;
        }
    }
    out
}

/// Terms of `w((Sf)^2 > 2) ≤ w(Mf > 1) + w(Σ_{m<m₀} > 1) + w(Σ_{m≥m₀} > 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareSplit {
    pub m0: i32,
    pub total: f64,
    pub maximal: f64,
    pub moderate: f64,
    pub tail: f64,
    /// Cells of `{(Sf)^2 > 2}` outside the union of the three sets.
    pub uncovered_cells: usize,
    /// `(Σ_{0≤m<m₀} ‖S_m f‖^2_{L^p(w)})^{p/2}`.
    pub moderate_bound: f64,
    /// `max_m ‖S_m f‖^2_{L^p(w)}` over `0 ≤ m < m₀`.
    pub max_band_norm: f64,
}

/// Evaluates the split at `λ = 2` for `f`, `family`, `w`.
pub fn square_split(
    family: &SparseFamily,
    f: &StepFunction,
    w: &Weight,
    p: f64,
    m0: i32,
) -> Result<SquareSplit> {
    let averages = CubeField::averages(f);
    let pf = power_decompose(family, f)?;
    let all = band_squares(&pf, &averages, |_| true);
    let moderate = band_squares(&pf, &averages, |m| (0..m0).contains(&m));
    let tail = band_squares(&pf, &averages, |m| m >= m0);
    let mf = dyadic_maximal(f);
    let grid = f.grid();
    let event = CellSet::from_predicate(grid, |c| all[c] > 2.0);
    let big_m = CellSet::from_predicate(grid, |c| mf.value(c) > 1.0);
    let big_mod = CellSet::from_predicate(grid, |c| moderate[c] > 1.0);
    let big_tail = CellSet::from_predicate(grid, |c| tail[c] > 1.0);
    let union = big_m.union(&big_mod).union(&big_tail);
    let mut band_norms = Vec::new();
    for &m in pf.bands.keys().filter(|m| (0..m0).contains(*m)) {
        let sq = pf.band_square(m, &averages);
        band_norms
            .push(lp_power(&sq.iter().map(|v| v.sqrt()).collect::<Vec<_>>(), w, p).powf(2.0 / p));
    }
    let wm = |s: &CellSet| crate::dyadic::weighted_measure(w, s);
    Ok(SquareSplit {
        m0,
        total: wm(&event),
        maximal: wm(&big_m),
        moderate: wm(&big_mod),
        tail: wm(&big_tail),
        uncovered_cells: event.difference(&union).count(),
        moderate_bound: band_norms.iter().sum::<f64>().powf(p / 2.0),
        max_band_norm: band_norms.iter().copied().fold(0.0, f64::max),
    })
}

/// `‖Sf‖_{L^{p,∞}(w)} / (C_p(w) ‖f‖_{L^p(w)})`, with the split checked for `p ≥ 2`.
pub struct SquareTheorem {
    p: f64,
    constants: WeightTable<WeightConstants>,
}

impl SquareTheorem {
    pub fn new(p: f64, instances: &[Instance]) -> Result<Self> {
        check_p(p)?;
        Ok(SquareTheorem {
            p,
            constants: WeightTable::build(instances, |w| WeightConstants::compute(w, p))?,
        })
    }
}

impl Verifier for SquareTheorem {
    fn id(&self) -> String {
        "square_theorem".into()
    }

    fn p(&self) -> Option<f64> {
        Some(self.p)
    }

    fn evaluate(&self, inst: &Instance) -> Result<Sample> {
        let m = inst.materialize()?;
        let k = self.constants.get(inst);
        let sf = apply_sparse_square(&m.family, &m.f)?;
        let norm = m.f.lp_norm(&m.w, self.p)?;
        let lhs = weak_norm(&sf, &m.w, self.p)?;
        let mut sample = Sample::from_sides(lhs, k.square_bound(self.p) * norm).record(
            "ratio_over_ap_root",
            lhs / (k.ap.powf(1.0 / self.p.max(2.0)) * norm),
        );
        if self.p >= 2.0 && sf.max_value() > 0.0 {
            let m0 = split_level(k.ainf);
            let unit = m.f.scaled(1.0 / norm)?;
            let s_unit = sf.max_value() / norm;
            for i in 0..4 {
                let g = unit.scaled(2f64.sqrt() * (i as f64).exp2() / s_unit)?;
                let g_norm = g.lp_norm(&m.w, self.p)?.powf(self.p);
                let split = square_split(&m.family, &g, &m.w, self.p, m0)?;
                sample = sample
                    .check(CheckSample::exact(
                        "split_inclusion",
                        split.uncovered_cells as f64,
                        0.0,
                    ))
                    .check(CheckSample::new(
                        "split_sum",
                        split.total,
                        split.maximal + split.moderate + split.tail,
                        SUM_TOLERANCE,
                    ))
                    .check(CheckSample::new(
                        "chebyshev_minkowski",
                        split.moderate,
                        split.moderate_bound,
                        SUM_TOLERANCE,
                    ))
                    .check(CheckSample::new(
                        "maximal_term",
                        split.maximal,
                        k.ap * g_norm,
                        1e-10,
                    ))
                    .record(
                        "moderate_band_constant",
                        split.max_band_norm / (k.ap * g_norm.powf(2.0 / self.p)),
                    )
                    .record(
                        "tail_constant",
                        split.tail / (k.ap * (k.ainf / (m0 as f64).exp2()).powf(self.p) * g_norm),
                    );
            }
        }
        Ok(sample)
    }
}

/// Largest `c` over the weights making `r(w) = 1 + 1/(c [w]_{A_∞})` satisfy
/// the reverse Hölder inequality with constant 2.
pub fn calibrate_reverse_holder<'a>(weights: impl IntoIterator<Item = &'a Weight>) -> Result<f64> {
    let mut c: f64 = 0.0;
    for w in weights {
        c = c.max(min_reverse_holder_c(w, 2.0)?);
    }
    Ok(c)
}

/// Lemma (A∞): `w(Σ_{m≥m₀} (S_m f)^2 > 1) / ([w]_{A_p} ([w]_{A_∞}/2^{m₀})^p ‖f‖^p)`,
/// with the `b_m` level-set and `β(Q)` checks.
pub struct AinftyLemma {
    m0: i32,
    p: f64,
    /// Reverse Hölder calibration constant (`r(w) = 1 + 1/(c [w]_{A_∞})`).
    rh_c: f64,
    constants: WeightTable<WeightConstants>,
}

impl AinftyLemma {
    pub fn new(m0: i32, p: f64, instances: &[Instance]) -> Result<Self> {
        check_p(p)?;
        if m0 < 1 {
            return Err(Error::InvalidParameter(format!("m0 = {m0} must be >= 1")));
        }
        let mut weights = Vec::new();
        let _ = WeightTable::build(instances, |w| {
            weights.push(w.clone());
            Ok(())
        })?;
        Ok(AinftyLemma {
            m0,
            p,
            rh_c: calibrate_reverse_holder(&weights)?,
            constants: WeightTable::build(instances, |w| WeightConstants::compute(w, p))?,
        })
    }

    pub fn reverse_holder_c(&self) -> f64 {
        self.rh_c
    }
}

/// `|{b_m > t}| ≤ 8^{-t} |B_m|` for integers `t ≥ 0`, as cell counts:
/// returns `(max over t of cells·8^t / |B_m|, 8^{-t+1} bound held, 8^{-t} bound held)`.
pub fn level_set_counts(pf: &PowerFamily, m: i32) -> (f64, bool, bool) {
    let b = pf.counting_function(m);
    let support = pf.support(m).count() as u128;
    let top = b.iter().copied().max().unwrap_or(0);
    let mut worst: f64 = 0.0;
    let (mut spec_ok, mut sharp_ok) = (true, true);
    for t in 0..top {
        let above = b.iter().filter(|&&v| v > t).count() as u128;
        let scaled = above * 8u128.pow(t);
        spec_ok &= scaled <= 8 * support;
        sharp_ok &= scaled <= support;
        worst = worst.max(scaled as f64 / support as f64);
    }
    (worst, spec_ok, sharp_ok)
}

impl Verifier for AinftyLemma {
    fn id(&self) -> String {
        format!("ainfty_lemma:m0={}", self.m0)
    }

    fn p(&self) -> Option<f64> {
        Some(self.p)
    }

    fn evaluate(&self, inst: &Instance) -> Result<Sample> {
        let m = inst.materialize()?;
        let k = self.constants.get(inst);
        // exponents above 2 are never calibrated
        let r = reverse_holder_exponent(k.ainf, self.rh_c).min(2.0);
        let r_dual = r / (r - 1.0);
        let w_avg = CubeField::averages(&m.w);
        let wr_avg = CubeField::averages(&m.w.powf(r)?);
        let peak = m.f.max_value();
        let mut best = Sample::vacuous();
        for i in 0..3 {
            let g = m.f.scaled(((i - self.m0) as f64).exp2() / peak)?;
            let averages = CubeField::averages(&g);
            let pf = power_decompose(&m.family, &g)?;
            let tail = band_squares(&pf, &averages, |mm| mm >= self.m0);
            let event = CellSet::from_predicate(inst.grid(), |c| tail[c] > 1.0);
            let lhs = crate::dyadic::weighted_measure(&m.w, &event);
            let g_norm = g.lp_norm(&m.w, self.p)?.powf(self.p);
            let rhs = k.ap * (k.ainf / (self.m0 as f64).exp2()).powf(self.p) * g_norm;
            let mut s = Sample::from_sides(lhs, rhs);
            for (&mm, band) in &pf.bands {
                let (worst, spec_ok, sharp_ok) = level_set_counts(&pf, mm);
                s = s
                    .check(CheckSample::exact(
                        "level_sets",
                        f64::from(u8::from(!spec_ok)),
                        0.0,
                    ))
                    .check(CheckSample::exact(
                        "level_sets_sharp",
                        f64::from(u8::from(!sharp_ok)),
                        0.0,
                    ))
                    .record("level_set_ratio", worst);
                if mm < self.m0 {
                    continue;
                }
                let b = band.counting_function();
                let threshold = ((self.m0 + mm - 1) as f64).exp2();
                for root in band.forest.roots() {
                    let q = band.cube(root);
                    let beta = CellSet::from_predicate(inst.grid(), |c| {
                        q.cell_range(inst.depth).contains(&c) && f64::from(b[c]) > threshold
                    });
                    let frac = beta.count() as f64 / q.cell_count(inst.depth) as f64;
                    let w_beta = m.w.restricted(&beta).average(&q);
                    let holder = frac.powf(1.0 / r_dual) * wr_avg.get(&q).powf(1.0 / r);
                    s = s
                        .check(CheckSample::new(
                            "beta_holder",
                            w_beta,
                            holder,
                            SUM_TOLERANCE,
                        ))
                        .check(CheckSample::new(
                            "reverse_holder",
                            wr_avg.get(&q).powf(1.0 / r),
                            2.0 * w_avg.get(&q),
                            1e-12,
                        ));
                }
            }
            best = best.merge(s);
        }
        Ok(best.record("reverse_holder_c", self.rh_c))
    }
}

/// Lemma (A_p bound): `‖S_m f‖^2_{L^p(w)} / ([w]_{A_p} ‖f‖^2_{L^p(w)})`, with the
/// `p = 2` chain checked cube by cube and cell by cell.
pub struct ApBoundLemma {
    p: f64,
    ap: WeightTable<f64>,
}

impl ApBoundLemma {
    pub fn new(p: f64, instances: &[Instance]) -> Result<Self> {
        if !(p >= 2.0) {
            return Err(Error::Domain(format!(
                "the A_p band bound is stated for p >= 2, got {p}"
            )));
        }
        Ok(ApBoundLemma {
            p,
            ap: WeightTable::build(instances, |w| ap_constant(w, p))?,
        })
    }
}

/// Derived constant of the `p = 2` chain: `⟨f⟩_Q ≤ (4/3) ⟨f 1_{E_m(Q)}⟩_Q`.
pub const GOOD_CONTROL: f64 = 4.0 / 3.0;

impl Verifier for ApBoundLemma {
    fn id(&self) -> String {
        "ap_bound_lemma".into()
    }

    fn asserts_drift(&self) -> bool {
        self.p != 2.0
    }

    fn p(&self) -> Option<f64> {
        Some(self.p)
    }

    fn evaluate(&self, inst: &Instance) -> Result<Sample> {
        let m = inst.materialize()?;
        let ap = *self.ap.get(inst);
        let averages = CubeField::averages(&m.f);
        let pf = power_decompose(&m.family, &m.f)?;
        let f_norm2 = m.f.lp_norm(&m.w, self.p)?.powi(2);
        let exact_p2 = self.p == 2.0;
        let sigma = dual_weight(&m.w, 2.0)?;
        let f2w = m.f.product(&m.f)?.product(&m.w)?;
        let w_avg = CubeField::averages(&m.w);
        let s_avg = CubeField::averages(&sigma);
        let mut best = Sample::vacuous();
        for (&mm, band) in &pf.bands {
            let sq = pf.band_square(mm, &averages);
            let lhs = lp_power(
                &sq.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
                &m.w,
                self.p,
            )
            .powf(2.0 / self.p);
            let mut s = Sample::from_sides(lhs, ap * f_norm2);
            if exact_p2 {
                let mut per_cell = vec![0.0; 1 << inst.depth];
                for i in 0..band.len() {
                    let q = band.cube(i);
                    let on_q = m.f.integral_over(&q);
                    let on_e = band.exceptional_integral(i, &m.f);
                    let f2w_e = f2w.integral_over(&q)
                        - band.forest.children[i]
                            .iter()
                            .map(|&c| f2w.integral_over(&band.cube(c)))
                            .sum::<f64>();
                    let len = q.measure();
                    let product = w_avg.get(&q) * s_avg.get(&q);
                    s = s
                        .check(CheckSample::new(
                            "good_control",
                            on_q,
                            GOOD_CONTROL * on_e,
                            SUM_TOLERANCE,
                        ))
                        .check(CheckSample::new(
                            "cauchy_schwarz",
                            (on_e / len).powi(2),
                            (f2w_e.max(0.0) / len) * s_avg.get(&q),
                            1e-10,
                        ))
                        .record(
                            "good_control_ratio",
                            if on_e > 0.0 {
                                on_q / on_e
                            } else {
                                f64::INFINITY
                            },
                        );
                    for c in band.exceptional_set(i).iter() {
                        per_cell[c] += product;
                    }
                }
                let worst_cell = per_cell.iter().copied().fold(0.0, f64::max);
                s = s
                    .check(CheckSample::new(
                        "cellwise_ap",
                        worst_cell,
                        ap,
                        SUM_TOLERANCE,
                    ))
                    .check(CheckSample::new(
                        "chain_bound",
                        lhs,
                        GOOD_CONTROL.powi(2) * ap * f_norm2,
                        1e-10,
                    ));
            }
            best = best.merge(s);
        }
        Ok(best)
    }
}

/// One row of the spike sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRow {
    pub j: u32,
    pub a2: f64,
    pub ainf: f64,
    /// Best `‖Sf‖_{L^{2,∞}(w)} / ‖f‖_{L^2(w)}` over the probes.
    pub best: f64,
    /// `best / ([w]_{A_2} log_1 [w]_{A_∞})^{1/2}`.
    pub normalized: f64,
    /// `best / [w]_{A_2}^{1/2}`.
    pub over_root_a2: f64,
    pub best_probe: String,
}

/// Probes for the spike weight at level `j`: indicators of the cubes at
/// levels `j-1..=j+1` next to the spike, each with its stopping family and
/// the 3-spaced ancestor chain through its parent.
fn spike_probes(grid: DyadicGrid, j: u32) -> Result<Vec<(String, StepFunction, SparseFamily)>> {
    let mut out = Vec::new();
    for level in j.saturating_sub(1).max(1)..=(j + 1).min(grid.depth()) {
        for index in 0..4usize.min(1 << level) {
            let cube = Cube::new(level, index)?;
            let f = StepFunction::indicator(grid, &cube);
            let mut chain = vec![cube];
            if let Some(parent) = cube.parent() {
                let mut l = parent.level as i64;
                while l >= 0 {
                    chain.push(cube.ancestor_at(l as u32).expect("coarser level"));
                    l -= 3;
                }
            }
            let chain_family = SparseFamily::new(grid, chain, DEFAULT_ETA)?;
            let chain_family = if crate::sparse::validate_sparsity(&chain_family).passed {
                chain_family
            } else {
                // drop the probe cube itself when it is too large inside its parent
                SparseFamily::new(
                    grid,
                    chain_family.cubes().iter().copied().filter(|q| *q != cube),
                    DEFAULT_ETA,
                )?
            };
            out.push((format!("chain:{level}:{index}"), f.clone(), chain_family));
            let stopping = stopping_cubes(&f, 2.0, DEFAULT_ETA)?;
            out.push((format!("stopping:{level}:{index}"), f, stopping));
        }
    }
    Ok(out)
}

/// Best square-function ratio against spike weights `spike:j` for each `j`.
pub fn spike_sweep(depth: u32, js: &[u32]) -> Result<Vec<SpikeRow>> {
    let grid = DyadicGrid::new(depth)?;
    js.iter()
        .map(|&j| {
            let w = WeightSpec::Spike { j, h: None }.generate(grid)?;
            let k = WeightConstants::compute(&w, 2.0)?;
            let mut best = 0.0;
            let mut best_probe = String::new();
            for (name, f, family) in spike_probes(grid, j)? {
                let sf = apply_sparse_square(&family, &f)?;
                let ratio = weak_norm(&sf, &w, 2.0)? / f.lp_norm(&w, 2.0)?;
                if ratio > best {
                    best = ratio;
                    best_probe = name;
                }
            }
            Ok(SpikeRow {
                j,
                a2: k.ap,
                ainf: k.ainf,
                best,
                normalized: best / k.square_bound(2.0),
                over_root_a2: best / k.ap.sqrt(),
                best_probe,
            })
        })
        .collect()
}
