//! Structural invariants of sparse families and their band decompositions,
//! and the reverse Hölder calibration of the weight corpus.

use crate::dyadic::CubeField;
use crate::error::Result;
use crate::sparse::{
    band_layers, power_decompose, split_by_average, validate_sparsity, LayeredFamily,
};
use crate::verify::{CheckSample, Instance, Sample, Verifier, WeightTable, SUM_TOLERANCE};
use crate::weights::{ainf_constant, reverse_holder_check, reverse_holder_exponent, Weight};

/// Constant in `∫_Q f ≤ C ∫_{E_Q} f` for the base-4 bands.
pub const EQ_CONSTANT: f64 = 8.0 / 3.0;

/// Checks that hold for every band of a layered family: `|Q_u| 8^u ≤ |Q|`
/// for all `u ≥ 1`, and `Σ |E_Q| ≤ |∪ Q|`.
fn layered_checks(band: &LayeredFamily, mut sample: Sample) -> Sample {
    let depth = band.depth;
    let mut e_cells = 0usize;
    for i in 0..band.len() {
        let own = band.cube(i).cell_count(depth) as u128;
        let mut u = 1u32;
        loop {
            let deep = band.deep_descendant_cells(i, u) as u128;
            sample = sample.check(CheckSample::exact(
                "deep_descendants",
                (deep * 8u128.pow(u)) as f64,
                own as f64,
            ));
            if deep == 0 {
                break;
            }
            u += 1;
        }
        e_cells += band.exceptional_cells(i);
    }
    let union = band.support().count();
    sample.check(CheckSample::exact(
        "exceptional_disjoint",
        e_cells as f64,
        union as f64,
    ))
}

/// Sparsity, `E_Q` control, deep-descendant decay, exceptional-set
/// disjointness and the band identity `Σ_m (S_m f)^2 = (Sf)^2`.
///
/// The ratio is `max_Q ∫_Q f / ∫_{E_Q} f` over the base-4 bands.
pub struct Structure;

impl Verifier for Structure {
    fn id(&self) -> String {
        "structure".into()
    }

    fn asserts_drift(&self) -> bool {
        false
    }

    fn evaluate(&self, inst: &Instance) -> Result<Sample> {
        let m = inst.materialize()?;
        let sparsity = validate_sparsity(&m.family);
        let averages = CubeField::averages(&m.f);
        let mut sample = Sample::vacuous().check(CheckSample::exact(
            "sparsity",
            sparsity.worst_fraction,
            m.family.eta(),
        ));

        let split = split_by_average(&m.family, &averages, 4)?;
        let mut worst_eq: Option<(f64, f64)> = None;
        for band in band_layers(&split, inst.depth).values() {
            for i in 0..band.len() {
                let on_q = m.f.integral_over(&band.cube(i));
                let on_e = band.exceptional_integral(i, &m.f);
                sample = sample.check(CheckSample::new(
                    "eq_bound",
                    on_q,
                    EQ_CONSTANT * on_e,
                    SUM_TOLERANCE,
                ));
                if worst_eq.is_none_or(|(q, e)| on_q * e > q * on_e) {
                    worst_eq = Some((on_q, on_e));
                }
            }
            sample = layered_checks(band, sample);
        }

        let pf = power_decompose(&m.family, &m.f)?;
        let mut sum = vec![0.0; 1 << inst.depth];
        for (&mm, band) in &pf.bands {
            for (s, v) in sum.iter_mut().zip(pf.band_square(mm, &averages)) {
                *s += v;
            }
            sample = layered_checks(band, sample);
        }
        let full = crate::sparse::apply_sparse_square_with(&m.family, &averages)?;
        let mut worst_gap: f64 = 0.0;
        for (c, s) in sum.iter().enumerate() {
            let t = full.value(c) * full.value(c);
            if t > 0.0 {
                worst_gap = worst_gap.max((s - t).abs() / t);
            } else if *s != 0.0 {
                worst_gap = f64::INFINITY;
            }
        }
        sample = sample.check(CheckSample::new(
            "band_identity",
            worst_gap,
            SUM_TOLERANCE,
            0.0,
        ));

        let (lhs, rhs) = worst_eq.unwrap_or((0.0, 0.0));
        let mut out = Sample::from_sides(lhs, rhs);
        out.checks = sample.checks;
        out.records = sample.records;
        Ok(out)
    }
}

/// Calibration of `r(w) = 1 + 1/(c [w]_{A_∞})` over a weight corpus.
pub struct ReverseHolder {
    c: f64,
    ainf: WeightTable<f64>,
}

impl ReverseHolder {
    /// Calibrates `c` as the smallest constant that works for every weight of the corpus.
    pub fn calibrate(instances: &[Instance]) -> Result<Self> {
        let mut weights: Vec<Weight> = Vec::new();
        WeightTable::build(instances, |w| {
            weights.push(w.clone());
            Ok(())
        })?;
        let c = super::square::calibrate_reverse_holder(&weights)?;
        Ok(ReverseHolder {
            c,
            ainf: WeightTable::build(instances, |w| Ok(ainf_constant(w)))?,
        })
    }

    pub fn with_constant(c: f64, instances: &[Instance]) -> Result<Self> {
        Ok(ReverseHolder {
            c,
            ainf: WeightTable::build(instances, |w| Ok(ainf_constant(w)))?,
        })
    }

    pub fn constant(&self) -> f64 {
        self.c
    }
}

impl Verifier for ReverseHolder {
    fn id(&self) -> String {
        "reverse_holder".into()
    }

    fn asserts_drift(&self) -> bool {
        false
    }

    /// Ratio `max_Q ⟨w^r⟩_Q^{1/r} / ⟨w⟩_Q` against the bound 2.
    fn evaluate(&self, inst: &Instance) -> Result<Sample> {
        let w = inst.weight.generate(inst.grid())?;
        let ainf = *self.ainf.get(inst);
        let r = reverse_holder_exponent(ainf, self.c).min(2.0);
        let worst = reverse_holder_check(&w, r)?;
        Ok(Sample::from_sides(worst, 2.0)
            .check(CheckSample::new("reverse_holder", worst, 2.0, 0.0))
            .record("exponent_min", -r)
            .record("calibrated_c", self.c))
    }
}
