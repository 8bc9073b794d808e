//! Dataset ingestion: MovieLens `ratings.dat` and plain CSV.
//!
//! External ids are densified to 0-based internal ids in order of first
//! appearance; the mapping is kept so outputs can be translated back.
//! Malformed lines (bad field count, unparseable numbers, ratings outside
//! 1-5, duplicate user/item pairs) are counted and skipped.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::config::InputFormat;
use saga_core::model::{build_ratings, RatingsMatrix};

/// External-id to dense-internal-id table.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    forward: HashMap<u64, usize>,
    back: Vec<u64>,
}

impl IdMap {
    fn intern(&mut self, external: u64) -> usize {
        if let Some(&idx) = self.forward.get(&external) {
            return idx;
        }
        let idx = self.back.len();
        self.forward.insert(external, idx);
        self.back.push(external);
        idx
    }

    pub fn external(&self, internal: usize) -> Option<u64> {
        self.back.get(internal).copied()
    }

    pub fn internal(&self, external: u64) -> Option<usize> {
        self.forward.get(&external).copied()
    }

    pub fn len(&self) -> usize {
        self.back.len()
    }

    pub fn is_empty(&self) -> bool {
        self.back.is_empty()
    }

    /// External ids in internal-id order.
    pub fn externals(&self) -> &[u64] {
        &self.back
    }
}

/// Result of parsing a dataset file.
#[derive(Debug)]
pub struct Ingested {
    pub ratings: RatingsMatrix,
    pub users: IdMap,
    pub items: IdMap,
    pub malformed: usize,
}

fn parse_line(line: &str, format: InputFormat) -> Option<(u64, u64, u8)> {
    let (fields, expected): (Vec<&str>, usize) = match format {
        // the timestamp field must be present even though it is ignored
        InputFormat::MovielensDat => (line.split("::").collect(), 4),
        InputFormat::Csv => (line.split(',').collect(), 3),
    };
    if fields.len() != expected {
        return None;
    }
    let user: u64 = fields[0].trim().parse().ok()?;
    let item: u64 = fields[1].trim().parse().ok()?;
    let rating: u8 = fields[2].trim().parse().ok()?;
    if !(1..=5).contains(&rating) {
        return None;
    }
    Some((user, item, rating))
}

/// Parse `path` into a ratings matrix with every entry marked train.
pub fn ingest(path: &Path, format: InputFormat) -> Result<Ingested> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;

    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
    let mut triples: Vec<(usize, usize, u8)> = Vec::new();
    let mut malformed = 0usize;

    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((ue, ie, rating)) = parse_line(line, format) else {
            malformed += 1;
            continue;
        };
        let u = users.intern(ue);
        let i = items.intern(ie);
        if seen.insert((u, i), ()).is_some() {
            malformed += 1;
            continue;
        }
        triples.push((u, i, rating));
    }

    if triples.is_empty() {
        bail!("no valid rating lines in {}", path.display());
    }
    let ratings = build_ratings(&triples).context("assembling the ratings matrix")?;
    Ok(Ingested {
        ratings,
        users,
        items,
        malformed,
    })
}
