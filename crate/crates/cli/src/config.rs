//! Experiment configuration: defaults, algorithm identifiers, parameter
//! grids, and the fully-resolved config echo written next to every output.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use saga_core::evaluation::GroupKind;

/// Input dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// MovieLens `ratings.dat`: `UserID::MovieID::Rating::Timestamp`.
    MovielensDat,
    /// Plain `user,item,rating` lines.
    Csv,
}

impl FromStr for InputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "movielens-dat" => Ok(InputFormat::MovielensDat),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown format '{other}' (movielens-dat, csv)")),
        }
    }
}

/// Recommendation algorithms runnable by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Consensus greedy, f = ln(1+x), g = identity.
    SagaLinear,
    /// Consensus greedy, f = ln(1+x), g = sqrt.
    SagaConcave,
    /// Average misery: top-k by summed predicted score.
    Am,
    /// Scalarized relevance/disagreement trade-off.
    Fm,
    LeastMisery,
    MostPleasure,
    Plurality,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::SagaLinear => "saga-linear",
            Algorithm::SagaConcave => "saga-concave",
            Algorithm::Am => "am",
            Algorithm::Fm => "fm",
            Algorithm::LeastMisery => "least-misery",
            Algorithm::MostPleasure => "most-pleasure",
            Algorithm::Plurality => "plurality",
        }
    }

    /// Whether the algorithm sweeps a parameter (gamma for the consensus
    /// variants, lambda for fm).
    pub fn is_parametric(&self) -> bool {
        matches!(
            self,
            Algorithm::SagaLinear | Algorithm::SagaConcave | Algorithm::Fm
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "saga-linear" => Ok(Algorithm::SagaLinear),
            "saga-concave" => Ok(Algorithm::SagaConcave),
            "am" => Ok(Algorithm::Am),
            "fm" => Ok(Algorithm::Fm),
            "least-misery" => Ok(Algorithm::LeastMisery),
            "most-pleasure" => Ok(Algorithm::MostPleasure),
            "plurality" => Ok(Algorithm::Plurality),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

pub fn parse_group_kind(s: &str) -> Result<GroupKind, String> {
    match s {
        "random" => Ok(GroupKind::Random),
        "similar" => Ok(GroupKind::Similar),
        other => Err(format!("unknown group kind '{other}' (random, similar)")),
    }
}

/// Per-batch group counts used when the config does not override them,
/// matching the benchmark regime (random groups are plentiful, similar
/// groups get scarcer with size).
pub fn default_group_count(kind: GroupKind, size: usize) -> usize {
    match (kind, size) {
        (GroupKind::Random, 2) => 294,
        (GroupKind::Random, 4) => 146,
        (GroupKind::Random, 6) => 98,
        (GroupKind::Random, 8) => 72,
        (GroupKind::Similar, 2) => 190,
        (GroupKind::Similar, 4) => 40,
        (GroupKind::Similar, 6) => 18,
        (GroupKind::Similar, 8) => 10,
        (GroupKind::Random, _) => 100,
        (GroupKind::Similar, _) => 20,
    }
}

fn serialize_kinds<S: serde::Serializer>(
    kinds: &[GroupKind],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(kinds.iter().map(|k| k.as_str()))
}

fn deserialize_kinds<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<GroupKind>, D::Error> {
    let raw: Vec<String> = Vec::deserialize(d)?;
    raw.iter()
        .map(|s| parse_group_kind(s).map_err(serde::de::Error::custom))
        .collect()
}

/// Fully-resolved experiment configuration. Serialized as JSON next to
/// every output so results carry their provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub out: PathBuf,
    pub min_ratings: usize,
    pub holdout_frac: f64,
    pub repetitions: usize,
    pub d: usize,
    pub reg: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub gamma_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    #[serde(serialize_with = "serialize_kinds", deserialize_with = "deserialize_kinds")]
    pub group_kinds: Vec<GroupKind>,
    pub group_sizes: Vec<usize>,
    /// Uniform override of the per-(kind, size) group counts.
    pub group_count: Option<usize>,
    pub sim_threshold: f64,
    pub retry_budget: usize,
    pub k_list: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub beta: f64,
    pub relevance_threshold: f64,
    pub dcg_log_base: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults used by the benchmark protocol.
    pub fn new(input: PathBuf, format: InputFormat, out: PathBuf) -> Self {
        ExperimentConfig {
            input,
            format,
            out,
            min_ratings: 100,
            holdout_frac: 0.30,
            repetitions: 5,
            d: 150,
            reg: 0.1,
            max_iters: 50,
            tol: 1e-6,
            gamma_grid: default_gamma_grid(),
            lambda_grid: default_lambda_grid(),
            group_kinds: vec![GroupKind::Random, GroupKind::Similar],
            group_sizes: vec![2, 4, 6, 8],
            group_count: None,
            sim_threshold: 0.60,
            retry_budget: 1000,
            k_list: (1..=10).collect(),
            algorithms: vec![
                Algorithm::SagaLinear,
                Algorithm::SagaConcave,
                Algorithm::Am,
                Algorithm::Fm,
            ],
            beta: 0.5,
            relevance_threshold: 4.0,
            dcg_log_base: 2.0,
            seed: 0,
        }
    }

    pub fn group_count_for(&self, kind: GroupKind, size: usize) -> usize {
        self.group_count
            .unwrap_or_else(|| default_group_count(kind, size))
    }

    pub fn max_k(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return Err(format!("holdout_frac {} must be in (0, 1)", self.holdout_frac));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(format!("beta {} must be in (0, 1)", self.beta));
        }
        if self.repetitions == 0 {
            return Err("repetitions must be >= 1".into());
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err("k list must be nonempty with k >= 1".into());
        }
        if self.dcg_log_base <= 1.0 {
            return Err(format!("dcg_log_base {} must be > 1", self.dcg_log_base));
        }
        let needs_gamma = self
            .algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::SagaLinear | Algorithm::SagaConcave));
        if needs_gamma && (self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|&g| g <= 0.0))
        {
            return Err("gamma grid must be nonempty and positive".into());
        }
        if self.algorithms.contains(&Algorithm::Fm)
            && (self.lambda_grid.is_empty()
                || self.lambda_grid.iter().any(|&l| !(0.0..=1.0).contains(&l)))
        {
            return Err("lambda grid must be nonempty within [0, 1]".into());
        }
        Ok(())
    }
}

/// `2^-3 .. 2^3` in multiples of two.
pub fn default_gamma_grid() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
}

/// `0, 0.1, ..., 1.0`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}
