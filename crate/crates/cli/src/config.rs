//! Experiment configuration: a TOML file with sections, overridden by flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use weaklab::search::{Objective, SearchParams};
use weaklab::verify::{CorpusSpec, FunctionSpec};
use weaklab::{SparseStrategy, WeightSpec, YoungFunction};

/// Seeds given as a list, or as a string like `1..8` or `1..4,9` (ranges inclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad seed `{t}` in `{s}`"));
            match part.split_once("..") {
                Some((a, b)) => {
                    let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
                    if a > b {
                        return Err(format!("empty seed range `{part}`"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(num(part)?),
            }
        }
        if out.is_empty() {
            return Err("no seeds given".into());
        }
        Ok(SeedList(out))
    }
}

impl fmt::Display for SeedList {
    /// Compact form with inclusive ranges, e.g. `1..8,10`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i;
            while j + 1 < self.0.len() && self.0[j + 1] == self.0[j] + 1 {
                j += 1;
            }
            parts.push(if j > i + 1 {
                format!("{}..{}", self.0[i], self.0[j])
            } else if j == i + 1 {
                format!("{},{}", self.0[i], self.0[j])
            } else {
                self.0[i].to_string()
            });
            i = j + 1;
        }
        f.write_str(&parts.join(","))
    }
}

impl<'de> Deserialize<'de> for SeedList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<u64>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) if !v.is_empty() => Ok(SeedList(v)),
            Raw::List(_) => Err(serde::de::Error::custom("no seeds given")),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub depths: Vec<u32>,
    pub seeds: SeedList,
    pub weights: Vec<String>,
    pub functions: Vec<String>,
    pub strategies: Vec<String>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let std = CorpusSpec::standard();
        CorpusSection {
            depths: std.depths,
            seeds: SeedList(std.seeds),
            weights: std.weights.iter().map(ToString::to_string).collect(),
            functions: std.functions.iter().map(ToString::to_string).collect(),
            strategies: std.strategies.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Young function specs.
    pub families: Vec<String>,
    pub p: Vec<f64>,
    pub m0: Vec<i32>,
    /// Grid depth of the spike-weight sweep run by `verify-square`.
    pub spike_depth: u32,
    pub spike_levels: Vec<u32>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            families: ["power:r=2", "llog:eps=0.5", "llog2:alpha=1.5", "llog2log3:alpha=1.5"]
                .map(String::from)
                .to_vec(),
            p: vec![2.0],
            m0: vec![1, 2, 3],
            spike_depth: 14,
            spike_levels: (2..=13).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub objective: String,
    pub depth: u32,
    pub iters: u64,
    pub restarts: u64,
    pub sigma: f64,
    pub max_moves: u32,
    pub seed: u64,
    /// `constant` or `random`.
    pub start: String,
}

impl Default for SearchSection {
    fn default() -> Self {
        let p = SearchParams::default();
        SearchSection {
            objective: "plain-m".into(),
            depth: 10,
            iters: p.iters,
            restarts: 4,
            sigma: p.sigma,
            max_moves: p.max_moves,
            seed: 1,
            start: "constant".into(),
        }
    }
}

impl SearchSection {
    pub fn params(&self) -> SearchParams {
        SearchParams {
            iters: self.iters,
            sigma: self.sigma,
            max_moves: self.max_moves,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub depths: Vec<u32>,
    pub iters: u64,
    pub restarts: u64,
    pub seed: u64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            depths: vec![6, 8, 10, 12, 14],
            iters: 2000,
            restarts: 4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Everything a run depends on. The output section is excluded from the hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSection,
    pub verify: VerifySection,
    pub search: SearchSection,
    pub probe: ProbeSection,
    pub output: OutputSection,
}

fn parse_all<T: FromStr>(what: &str, specs: &[String]) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    specs
        .iter()
        .map(|s| s.parse::<T>().map_err(|e| format!("{what} `{s}`: {e}")))
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
    }

    /// Parses every spec so that errors surface before any work starts.
    pub fn validate(&self) -> Result<(), String> {
        self.corpus_spec()?;
        self.families()?;
        self.objective()?;
        if self.verify.p.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
            return Err(format!("p values must be >= 1, got {:?}", self.verify.p));
        }
        if !matches!(self.search.start.as_str(), "constant" | "random") {
            return Err(format!("search start must be `constant` or `random`, got `{}`", self.search.start));
        }
        if self.probe.depths.windows(2).any(|d| d[0] >= d[1]) {
            return Err("probe depths must be increasing".into());
        }
        Ok(())
    }

    pub fn corpus_spec(&self) -> Result<CorpusSpec, String> {
        let c = &self.corpus;
        if c.depths.is_empty() {
            return Err("corpus needs at least one depth".into());
        }
        Ok(CorpusSpec {
            depths: c.depths.clone(),
            seeds: c.seeds.0.clone(),
            weights: parse_all::<WeightSpec>("weight", &c.weights)?,
            functions: parse_all::<FunctionSpec>("function", &c.functions)?,
            strategies: parse_all::<SparseStrategy>("strategy", &c.strategies)?,
        })
    }

    pub fn families(&self) -> Result<Vec<YoungFunction>, String> {
        parse_all("family", &self.verify.families)
    }

    pub fn objective(&self) -> Result<Objective, String> {
        self.search
            .objective
            .parse()
            .map_err(|e| format!("objective `{}`: {e}", self.search.objective))
    }

    /// SHA-256 of the canonical JSON form, output section excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputSection::default();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(json))
    }
}
