//! `weaklab`: run verifiers over seeded corpora, search for extremal
//! instances, and emit JSON-lines/CSV reports.
//!
//! Exit codes: 0 when every hard assertion passes, 1 when one fails, 2 for
//! usage, configuration and I/O errors.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rayon::ThreadPool;

use weaklab::dyadic::Cube;
use weaklab::orlicz::{c_phi, luxemburg_norm};
use weaklab::search::{
    best_of, mw_probe_chain, probe_phi, restart_chain, Objective, ProbeRow, SearchInstance, SearchState, Witness,
};
use weaklab::verify::square::{spike_sweep, AinftyLemma, ApBoundLemma, SquareTheorem};
use weaklab::verify::structure::{ReverseHolder, Structure};
use weaklab::verify::weak::{theorem_constant, FeffermanStein, LemmaBasic, MainTheorem, OrliczLemma, SharpMaximal};
use weaklab::verify::{run_with, Instance, VerificationReport, Verifier};
use weaklab::{DyadicGrid, WeightSpec, YoungFunction};

use config::{ExperimentConfig, SeedList};
use output::{num, write_csv, write_jsonl, write_reports, Meta, VERSION};

/// Relative slack when comparing a search value with a corpus-fitted bound.
const BOUND_RTOL: f64 = 1e-9;

/// Largest spread of the normalized spike-sweep ratio.
const SPIKE_FLATNESS: f64 = 3.0;

/// Default output directory when neither `--out` nor the config sets one.
const OUT_ENV: &str = "WEAKLAB_OUT";

#[derive(Parser)]
#[command(name = "weaklab", version, about = "Weak-type endpoint experiments for sparse operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `output.dir`, then $WEAKLAB_OUT, then `weaklab-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Clone, Default)]
struct CorpusArgs {
    /// Grid depths, comma separated.
    #[arg(long, value_delimiter = ',')]
    depths: Vec<u32>,
    /// Corpus seeds, e.g. `1..100` or `1,4,9` (ranges inclusive).
    #[arg(long)]
    seeds: Option<SeedList>,
    /// Weight generator spec, e.g. `power:a=-0.5,x0=0.3`; repeatable.
    #[arg(long = "weight")]
    weights: Vec<String>,
    /// Function generator spec, e.g. `random:density=0.5,seed=2`; repeatable.
    #[arg(long = "function")]
    functions: Vec<String>,
    /// Sparse strategy spec, e.g. `stopping:ratio=2`; repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
}

impl CorpusArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if !self.depths.is_empty() {
            cfg.corpus.depths = self.depths.clone();
        }
        if let Some(s) = &self.seeds {
            cfg.corpus.seeds = s.clone();
        }
        if !self.weights.is_empty() {
            cfg.corpus.weights = self.weights.clone();
        }
        if !self.functions.is_empty() {
            cfg.corpus.functions = self.functions.clone();
        }
        if !self.strategies.is_empty() {
            cfg.corpus.strategies = self.strategies.clone();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Luxemburg norm of a generated weight over one dyadic cube.
    OrliczNorm {
        /// Young function spec, e.g. `power:r=2`.
        #[arg(long)]
        family: String,
        /// Weight generator spec, e.g. `const:3`.
        #[arg(long)]
        weight: String,
        /// Grid depth.
        #[arg(long, default_value_t = 4)]
        depth: u32,
        /// Cube as `level:index`.
        #[arg(long, default_value = "0:0")]
        cube: String,
    },
    /// The series constant c_φ as a JSON report (value, terms, truncation index).
    Cphi {
        /// Young function spec, e.g. `llog:eps=0.5`.
        #[arg(long)]
        family: String,
        /// Use the closed-form surrogate of ψ^{-1} (log families only).
        #[arg(long)]
        surrogate: bool,
        /// Relative truncation tolerance.
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
    },
    /// Weak-type bound for sparse operators with the Orlicz maximal majorant.
    VerifyWeak {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Young function spec; repeatable.
        #[arg(long = "family")]
        families: Vec<String>,
    },
    /// Band/layer lemma, Orlicz–Hölder lemma and structural invariants.
    VerifyLemma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Young function spec; repeatable.
        #[arg(long = "family")]
        families: Vec<String>,
    },
    /// Fefferman–Stein and the sharp weak-type bound for M.
    VerifyFs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Exponents for the sharp maximal bound, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Weak-type bound for the sparse square function, plus the spike sweep.
    VerifySquare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Exponents, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Grid depth of the spike sweep.
        #[arg(long)]
        spike_depth: Option<u32>,
        /// Spike levels j, comma separated.
        #[arg(long, value_delimiter = ',')]
        spike_levels: Vec<u32>,
    },
    /// Tail lemma for the bands m ≥ m₀ and the reverse Hölder calibration.
    VerifyAinfty {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Cut levels m₀, comma separated.
        #[arg(long, value_delimiter = ',')]
        m0: Vec<i32>,
        /// Exponents, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// A_p bound for a single band S_m.
    VerifyApbound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Exponents (≥ 2), comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Randomized hill climbing for large objective values.
    Search {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// `plain-m`, `orlicz:<phi>` or `square:p=<p>`.
        #[arg(long)]
        objective: Option<String>,
        /// Grid depth.
        #[arg(long)]
        depth: Option<u32>,
        /// Iterations per chain.
        #[arg(long)]
        iters: Option<u64>,
        /// Independent chains; chain 0 starts at the seed instance, the others at random instances.
        #[arg(long)]
        restarts: Option<u64>,
        /// Standard deviation of the log block factor.
        #[arg(long)]
        sigma: Option<f64>,
        /// Largest number of moves per proposal.
        #[arg(long)]
        max_moves: Option<u32>,
        /// Search seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Seed instance: `constant` or `random`.
        #[arg(long)]
        start: Option<String>,
        /// Bound for `orlicz:` objectives (default: fitted constant over the
        /// configured corpus times c_φ); exceeding it writes a witness and exits 1.
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Plain-M search against the Orlicz majorant across depths.
    MwProbe {
        #[command(flatten)]
        common: Common,
        /// Probe depths, increasing, comma separated.
        #[arg(long, value_delimiter = ',')]
        depths: Vec<u32>,
        /// Iterations per chain.
        #[arg(long)]
        iters: Option<u64>,
        /// Chains per depth.
        #[arg(long)]
        restarts: Option<u64>,
        /// Probe seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    /// Usage, configuration or I/O problem.
    Setup(String),
    /// A hard assertion failed; outputs were written.
    Assertion(String),
}

impl From<weaklab::Error> for Failure {
    fn from(e: weaklab::Error) -> Self {
        Failure::Setup(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Setup(format!("I/O error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Setup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Loaded config, worker pool and output location of one run.
struct Run {
    cfg: ExperimentConfig,
    pool: ThreadPool,
    out: PathBuf,
}

impl Run {
    fn new(common: &Common, overrides: impl FnOnce(&mut ExperimentConfig)) -> Result<Self, Failure> {
        let mut cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path).map_err(Failure::Setup)?,
            None => ExperimentConfig::default(),
        };
        overrides(&mut cfg);
        cfg.validate().map_err(Failure::Setup)?;
        let out = common
            .out
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("weaklab-out"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build()
            .map_err(|e| Failure::Setup(e.to_string()))?;
        Ok(Run { cfg, pool, out })
    }

    fn meta(&self, seeds: &SeedList) -> Meta {
        Meta {
            config_hash: self.cfg.hash(),
            seeds: seeds.to_string(),
            version: VERSION,
        }
    }

    fn instances(&self) -> Result<Vec<Instance>, Failure> {
        Ok(self.cfg.corpus_spec().map_err(Failure::Setup)?.instances()?)
    }

    fn verify<V: Verifier>(&self, verifier: &V, instances: &[Instance]) -> Result<Vec<VerificationReport>, Failure> {
        let exec = |xs: &[Instance], eval: &weaklab::verify::Evaluate<'_>| {
            self.pool.install(|| xs.par_iter().map(eval).collect())
        };
        Ok(run_with(verifier, instances, exec)?)
    }

    /// Writes the reports, prints one line per aggregate and fails if any check failed.
    fn finish(&self, stem: &str, reports: &[VerificationReport]) -> Outcome {
        let meta = self.meta(&self.cfg.corpus.seeds);
        for path in write_reports(&self.out, stem, reports, &meta)? {
            println!("wrote {}", path.display());
        }
        let mut failed = Vec::new();
        for r in reports.iter().filter(|r| r.depth.is_none()) {
            let label = match (&r.phi, r.p) {
                (Some(phi), _) => format!("{} [{phi}]", r.inequality),
                (None, Some(p)) => format!("{} [p={p}]", r.inequality),
                _ => r.inequality.clone(),
            };
            let drift = r.record("depth_drift").map_or(String::new(), |d| format!(" drift={d:.4}"));
            println!(
                "{} {label}: fitted={:.6e}{drift} instances={} vacuous={}",
                if r.passed() { "PASS" } else { "FAIL" },
                r.fitted_constant,
                r.instances,
                r.vacuous
            );
            for c in r.checks.iter().filter(|c| !c.passed) {
                println!("    check {} failed on {}/{} (worst margin {:.6e})", c.name, c.failures, c.evaluated, c.worst_margin);
                failed.push(format!("{label}: {}", c.name));
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Assertion(failed.join(", ")))
        }
    }
}

fn parse_list<T: std::str::FromStr>(what: &str, specs: &[String]) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    specs
        .iter()
        .map(|s| s.parse().map_err(|e| Failure::Setup(format!("{what} `{s}`: {e}"))))
        .collect()
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::OrliczNorm {
            family,
            weight,
            depth,
            cube,
        } => orlicz_norm(&family, &weight, depth, &cube),
        Command::Cphi {
            family,
            surrogate,
            rtol,
        } => {
            let phi: YoungFunction = parse_list("family", &[family])?.remove(0);
            let report = c_phi(&phi, surrogate, rtol)?;
            println!("{}", serde_json::to_string(&report).map_err(|e| Failure::Setup(e.to_string()))?);
            Ok(())
        }
        Command::VerifyWeak {
            common,
            corpus,
            families,
        } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !families.is_empty() {
                    cfg.verify.families = families.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = Vec::new();
            for phi in run.cfg.families().map_err(Failure::Setup)? {
                reports.extend(run.verify(&MainTheorem::new(&phi, &insts)?, &insts)?);
            }
            run.finish("verify-weak", &reports)
        }
        Command::VerifyLemma {
            common,
            corpus,
            families,
        } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !families.is_empty() {
                    cfg.verify.families = families.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = Vec::new();
            for phi in run.cfg.families().map_err(Failure::Setup)? {
                reports.extend(run.verify(&LemmaBasic::new(&phi, &insts)?, &insts)?);
                reports.extend(run.verify(&OrliczLemma::new(&phi), &insts)?);
            }
            reports.extend(run.verify(&Structure, &insts)?);
            run.finish("verify-lemma", &reports)
        }
        Command::VerifyFs { common, corpus, p } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !p.is_empty() {
                    cfg.verify.p = p.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = run.verify(&FeffermanStein::new(&insts)?, &insts)?;
            for &p in &run.cfg.verify.p {
                reports.extend(run.verify(&SharpMaximal::new(p, &insts)?, &insts)?);
            }
            run.finish("verify-fs", &reports)
        }
        Command::VerifySquare {
            common,
            corpus,
            p,
            spike_depth,
            spike_levels,
        } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !p.is_empty() {
                    cfg.verify.p = p.clone();
                }
                if let Some(d) = spike_depth {
                    cfg.verify.spike_depth = d;
                }
                if !spike_levels.is_empty() {
                    cfg.verify.spike_levels = spike_levels.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = Vec::new();
            for &p in &run.cfg.verify.p {
                reports.extend(run.verify(&SquareTheorem::new(p, &insts)?, &insts)?);
            }
            let spike = match spike_check(&run) {
                Err(Failure::Setup(e)) => return Err(Failure::Setup(e)),
                other => other,
            };
            run.finish("verify-square", &reports).and(spike)
        }
        Command::VerifyAinfty { common, corpus, m0, p } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !m0.is_empty() {
                    cfg.verify.m0 = m0.clone();
                }
                if !p.is_empty() {
                    cfg.verify.p = p.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = Vec::new();
            for &p in &run.cfg.verify.p {
                for &m0 in &run.cfg.verify.m0 {
                    reports.extend(run.verify(&AinftyLemma::new(m0, p, &insts)?, &insts)?);
                }
            }
            reports.extend(run.verify(&ReverseHolder::calibrate(&insts)?, &insts)?);
            run.finish("verify-ainfty", &reports)
        }
        Command::VerifyApbound { common, corpus, p } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                if !p.is_empty() {
                    cfg.verify.p = p.clone();
                }
            })?;
            let insts = run.instances()?;
            let mut reports = Vec::new();
            for &p in &run.cfg.verify.p {
                reports.extend(run.verify(&ApBoundLemma::new(p, &insts)?, &insts)?);
            }
            run.finish("verify-apbound", &reports)
        }
        Command::Search {
            common,
            corpus,
            objective,
            depth,
            iters,
            restarts,
            sigma,
            max_moves,
            seed,
            start,
            bound,
        } => {
            let run = Run::new(&common, |cfg| {
                corpus.apply(cfg);
                let s = &mut cfg.search;
                s.objective = objective.unwrap_or(s.objective.clone());
                s.depth = depth.unwrap_or(s.depth);
                s.iters = iters.unwrap_or(s.iters);
                s.restarts = restarts.unwrap_or(s.restarts);
                s.sigma = sigma.unwrap_or(s.sigma);
                s.max_moves = max_moves.unwrap_or(s.max_moves);
                s.seed = seed.unwrap_or(s.seed);
                s.start = start.unwrap_or(s.start.clone());
            })?;
            search(&run, bound)
        }
        Command::MwProbe {
            common,
            depths,
            iters,
            restarts,
            seed,
        } => {
            let run = Run::new(&common, |cfg| {
                let p = &mut cfg.probe;
                if !depths.is_empty() {
                    p.depths = depths.clone();
                }
                p.iters = iters.unwrap_or(p.iters);
                p.restarts = restarts.unwrap_or(p.restarts);
                p.seed = seed.unwrap_or(p.seed);
            })?;
            mw_probe(&run)
        }
    }
}

fn orlicz_norm(family: &str, weight: &str, depth: u32, cube: &str) -> Outcome {
    let phi: YoungFunction = parse_list("family", &[family.to_string()])?.remove(0);
    let spec: WeightSpec = parse_list("weight", &[weight.to_string()])?.remove(0);
    let bad_cube = || Failure::Setup(format!("cube `{cube}` must be `level:index`"));
    let (level, index) = cube.split_once(':').ok_or_else(bad_cube)?;
    let cube = Cube::new(
        level.trim().parse().map_err(|_| bad_cube())?,
        index.trim().parse().map_err(|_| bad_cube())?,
    )?;
    let grid = DyadicGrid::new(depth)?;
    if !grid.contains(&cube) {
        return Err(Failure::Setup(format!("cube {cube} is finer than depth {depth}")));
    }
    let w = spec.generate_function(grid)?;
    println!("{}", luxemburg_norm(&w, &cube, &phi));
    Ok(())
}

/// `C_emp · c_φ` from the weak-type verifier over the configured corpus.
fn corpus_bound(run: &Run, phi: &YoungFunction) -> Result<f64, Failure> {
    let insts = run.instances()?;
    let reports = run.verify(&MainTheorem::new(phi, &insts)?, &insts)?;
    let fitted = reports.last().expect("aggregate report").fitted_constant;
    Ok(fitted * theorem_constant(phi)?)
}

fn write_witness(path: &Path, witness: &Witness) -> Result<(), Failure> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    let json = serde_json::to_string_pretty(witness).map_err(|e| Failure::Setup(e.to_string()))?;
    std::fs::write(path, json + "\n")?;
    println!("wrote witness {}", path.display());
    Ok(())
}

fn search(run: &Run, bound: Option<f64>) -> Outcome {
    let s = &run.cfg.search;
    let objective = run.cfg.objective().map_err(Failure::Setup)?;
    let grid = DyadicGrid::new(s.depth)?;
    let start = match s.start.as_str() {
        "random" => SearchInstance::random(grid, s.seed)?,
        _ => SearchInstance::constant(grid),
    };
    let params = s.params();
    let chains: Vec<(u64, SearchState)> = run.pool.install(|| {
        (0..s.restarts.max(1))
            .into_par_iter()
            .map(|r| restart_chain(&objective, &start, &params, s.seed, r).map(|st| (r, st)))
            .collect::<weaklab::Result<_>>()
    })?;
    let meta = run.meta(&SeedList(vec![s.seed]));
    std::fs::create_dir_all(&run.out)?;
    let states: Vec<&SearchState> = chains.iter().map(|(_, st)| st).collect();
    write_jsonl(&run.out.join("search.jsonl"), &states, &meta)?;
    let rows: Vec<Vec<String>> = chains
        .iter()
        .map(|(r, st)| {
            vec![
                r.to_string(),
                st.seed.to_string(),
                st.iteration.to_string(),
                st.accepted.to_string(),
                num(st.best_value),
            ]
        })
        .collect();
    write_csv(
        &run.out.join("search.csv"),
        &["restart", "chain_seed", "iterations", "accepted", "best_value"],
        &rows,
        &meta,
    )?;
    let (r, best) = best_of(chains).expect("at least one chain");
    println!("objective {}", best.objective);
    println!("best {} (restart {r}, chain seed {})", num(best.best_value), best.seed);

    let bound = match (&objective, bound) {
        (Objective::RatioVsOrlicz(_), Some(b)) => Some(b),
        (Objective::RatioVsOrlicz(phi), None) => Some(corpus_bound(run, phi)?),
        (_, None) => None,
        _ => return Err(Failure::Setup("a bound applies only to `orlicz:` objectives".into())),
    };
    if let Some(b) = bound {
        println!("bound {}", num(b));
        if best.best_value > b * (1.0 + BOUND_RTOL) {
            write_witness(&run.out.join("witness.json"), &Witness::from_state(&best, &meta.config_hash))?;
            return Err(Failure::Assertion(format!(
                "search value {} exceeds the fitted bound {}",
                num(best.best_value),
                num(b)
            )));
        }
    }
    Ok(())
}

fn mw_probe(run: &Run) -> Outcome {
    let p = &run.cfg.probe;
    let params = weaklab::search::SearchParams {
        iters: p.iters,
        ..run.cfg.search.params()
    };
    let phi = probe_phi();
    let bound = corpus_bound(run, &phi)?;
    let results: Vec<(ProbeRow, SearchState)> = run.pool.install(|| {
        p.depths
            .par_iter()
            .map(|&d| mw_probe_chain(d, &params, p.seed, p.restarts))
            .collect::<weaklab::Result<_>>()
    })?;
    let meta = run.meta(&SeedList(vec![p.seed]));
    std::fs::create_dir_all(&run.out)?;
    let rows: Vec<&ProbeRow> = results.iter().map(|(row, _)| row).collect();
    write_jsonl(&run.out.join("mw-probe.jsonl"), &rows, &meta)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.depth.to_string(), num(r.plain_m_best), num(r.orlicz_best)])
        .collect();
    write_csv(
        &run.out.join("mw-probe.csv"),
        &["depth", "plainM_best", "orlicz_best"],
        &csv_rows,
        &meta,
    )?;
    println!("orlicz bound {} ({phi})", num(bound));
    println!("depth plainM_best orlicz_best");
    let mut violations = Vec::new();
    for (row, state) in &results {
        println!("{} {} {}", row.depth, num(row.plain_m_best), num(row.orlicz_best));
        if row.orlicz_best > bound * (1.0 + BOUND_RTOL) {
            let mut witness = Witness::from_state(state, &meta.config_hash);
            witness.objective = format!("orlicz:{phi}");
            witness.value = row.orlicz_best;
            write_witness(&run.out.join(format!("witness-depth{}.json", row.depth)), &witness)?;
            violations.push(row.depth);
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("Orlicz column exceeds the fitted bound at depths {violations:?}")))
    }
}

/// Spike sweep of the square-function bound; fails if the normalized ratio
/// spreads by more than a factor 3.
fn spike_check(run: &Run) -> Outcome {
    let v = &run.cfg.verify;
    if v.spike_levels.is_empty() {
        return Ok(());
    }
    let rows = spike_sweep(v.spike_depth, &v.spike_levels)?;
    let meta = run.meta(&SeedList(vec![0]));
    std::fs::create_dir_all(&run.out)?;
    write_jsonl(&run.out.join("spike.jsonl"), &rows, &meta)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.j.to_string(),
                num(r.a2),
                num(r.ainf),
                num(r.best),
                num(r.normalized),
                num(r.over_root_a2),
                r.best_probe.clone(),
            ]
        })
        .collect();
    write_csv(
        &run.out.join("spike.csv"),
        &["j", "a2", "ainf", "best_ratio", "normalized", "over_root_a2", "best_probe"],
        &csv_rows,
        &meta,
    )?;
    let hi = rows.iter().map(|r| r.normalized).fold(f64::MIN, f64::max);
    let lo = rows.iter().map(|r| r.normalized).fold(f64::MAX, f64::min);
    let spread = hi / lo;
    println!(
        "{} spike sweep: normalized ratio spread {spread:.4} over [w]_A2 in [{:.4e}, {:.4e}]",
        if spread <= SPIKE_FLATNESS { "PASS" } else { "FAIL" },
        rows.first().map_or(0.0, |r| r.a2),
        rows.last().map_or(0.0, |r| r.a2),
    );
    if spread <= SPIKE_FLATNESS {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("spike sweep spread {spread} > {SPIKE_FLATNESS}")))
    }
}
