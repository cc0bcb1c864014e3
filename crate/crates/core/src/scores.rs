//! Long-format benchmark score tables (`benchmark,metric,config,n_l,score`).

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_HEADER: [&str; 5] = ["benchmark", "metric", "config", "n_l", "score"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub benchmark: String,
    pub metric: String,
    pub config: String,
    pub n_l: u32,
    pub score: f64,
}

/// Score observations keyed uniquely by `(benchmark, metric, config, n_l)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    rows: Vec<ScoreRecord>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !r.score.is_finite() {
                return Err(Error::Parse(format!(
                    "non-finite score for ({}, {}, {}, {})",
                    r.benchmark, r.metric, r.config, r.n_l
                )));
            }
            if r.n_l == 0 {
                return Err(Error::Parse(format!(
                    "n_l must be positive for ({}, {}, {})",
                    r.benchmark, r.metric, r.config
                )));
            }
            if !seen.insert((&r.benchmark, &r.metric, &r.config, r.n_l)) {
                return Err(Error::DuplicateKey {
                    benchmark: r.benchmark.clone(),
                    metric: r.metric.clone(),
                    config: r.config.clone(),
                    n_l: r.n_l,
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_reader(rdr: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.iter().ne(SCORE_HEADER) {
            return Err(Error::Parse(format!(
                "expected header {}, found {}",
                SCORE_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ScoreRecord>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[ScoreRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(n_l, score)` points of one series, sorted by `n_l`.
    pub fn series(&self, benchmark: &str, metric: &str, config: &str) -> Vec<(u32, f64)> {
        let mut pts: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.benchmark == benchmark && r.metric == metric && r.config == config)
            .map(|r| (r.n_l, r.score))
            .collect();
        pts.sort_by_key(|p| p.0);
        pts
    }

    /// Distinct `(benchmark, metric, config)` triples in first-seen order.
    pub fn selectors(&self) -> Vec<(String, String, String)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            let key = (r.benchmark.clone(), r.metric.clone(), r.config.clone());
            if seen.insert(key.clone()) {
                out.push(key);
            }
        }
        out
    }
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let file = std::fs::File::open(path)?;
    ScoreTable::from_reader(file)
}
