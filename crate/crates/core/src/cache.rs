//! Prompt-embedding cache with top-1 cosine retrieval and per-entry latent
//! trajectories.
//!
//! On disk a cache is a directory holding `index.jsonl` (a header line,
//! then one metadata record per entry) and `latents/<id>.chrl`, the entry's
//! `N + 1` trajectory latents as consecutive `CHRL` records.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{read_chrl, write_chrl, LatentTensor, Trajectory};
use crate::world::{PromptTokens, Scene};
use crate::{Error, Result};

const INDEX_FILE: &str = "index.jsonl";
const INDEX_FORMAT: &str = "dit-reuse-cache";
const INDEX_VERSION: u32 = 1;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub id: u64,
    /// Assigned by [`Cache::insert`].
    pub seq: u64,
    pub tokens: PromptTokens,
    pub embedding: Vec<f64>,
    pub scene: Scene,
    pub trajectory: Trajectory<f32>,
}

impl CacheEntry {
    pub fn final_latent(&self) -> &LatentTensor<f32> {
        self.trajectory.final_latent()
    }
}

/// Result of a top-1 lookup. `m` is `-inf` for an empty cache.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    /// Position of the best entry in [`Cache::entries`].
    pub entry: Option<usize>,
    pub m: f64,
    pub hit: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cache {
    entries: Vec<CacheEntry>,
    next_seq: u64,
    /// When set, the serving loop stops inserting.
    pub frozen: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Cache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn entry(&self, pos: usize) -> &CacheEntry {
        &self.entries[pos]
    }

    /// Exhaustive top-1 by cosine similarity. Entries are scanned in
    /// insertion order and only a strictly better score replaces the
    /// incumbent, so ties go to the smallest sequence number.
    pub fn lookup(&self, embedding: &[f64], tau: f64) -> MatchResult {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let m = dot(embedding, &e.embedding);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
        match best {
            Some((i, m)) => MatchResult {
                entry: Some(i),
                m,
                hit: m >= tau,
            },
            None => MatchResult {
                entry: None,
                m: f64::NEG_INFINITY,
                hit: false,
            },
        }
    }

    /// Appends an entry and returns its sequence number.
    pub fn insert(&mut self, mut entry: CacheEntry) -> Result<u64> {
        if self.entries.iter().any(|e| e.id == entry.id) {
            return Err(Error::DuplicateEntry(entry.id));
        }
        let norm = dot(&entry.embedding, &entry.embedding).sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Shape(format!("cache embedding norm {norm} is not 1")));
        }
        if entry.trajectory.latents.is_empty() {
            return Err(Error::Shape("cache entry has an empty trajectory".into()));
        }
        let seq = self.next_seq;
        entry.seq = seq;
        self.next_seq += 1;
        self.entries.push(entry);
        Ok(seq)
    }

    /// Serializes the cache as `(relative path, bytes)` files.
    pub fn encode(&self) -> Result<BTreeMap<String, Vec<u8>>> {
        let mut files = BTreeMap::new();
        let mut index = Vec::new();
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
        };
        writeln!(index, "{}", serde_json::to_string(&header)?).expect("writing to a Vec cannot fail");
        for e in &self.entries {
            let record = IndexRecord {
                id: e.id,
                seq: e.seq,
                tokens: e.tokens.0.clone(),
                embedding: e.embedding.clone(),
                scene: e.scene.clone(),
                latents: e.trajectory.latents.len(),
            };
            writeln!(index, "{}", serde_json::to_string(&record)?).expect("writing to a Vec cannot fail");
            let mut blob = Vec::new();
            for latent in &e.trajectory.latents {
                write_chrl(&mut blob, latent).expect("writing to a Vec cannot fail");
            }
            files.insert(latent_path(e.id), blob);
        }
        files.insert(INDEX_FILE.into(), index);
        Ok(files)
    }

    /// Inverse of [`Cache::encode`]; `read` returns a file's bytes by
    /// relative path.
    pub fn decode(mut read: impl FnMut(&str) -> Result<Vec<u8>>) -> Result<Self> {
        let index = read(INDEX_FILE)?;
        let text = String::from_utf8(index).map_err(|_| Error::IncompatibleFormat)?;
        let mut lines = text.lines();
        let header: IndexHeader = lines
            .next()
            .and_then(|l| serde_json::from_str(l).ok())
            .ok_or(Error::IncompatibleFormat)?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(Error::IncompatibleFormat);
        }
        let mut cache = Cache::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: IndexRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: INDEX_FILE.into(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            let blob = read(&latent_path(record.id))?;
            let mut reader = blob.as_slice();
            let mut latents = Vec::with_capacity(record.latents);
            while let Some(latent) = read_chrl(&mut reader)? {
                latents.push(latent);
            }
            if latents.len() != record.latents {
                return Err(Error::IncompatibleFormat);
            }
            let entry = CacheEntry {
                id: record.id,
                seq: record.seq,
                tokens: PromptTokens(record.tokens),
                embedding: record.embedding,
                scene: record.scene,
                trajectory: Trajectory { latents },
            };
            if cache.entries.iter().any(|e| e.id == entry.id) {
                return Err(Error::DuplicateEntry(entry.id));
            }
            cache.next_seq = cache.next_seq.max(entry.seq + 1);
            cache.entries.push(entry);
        }
        cache.entries.sort_by_key(|e| e.seq);
        Ok(cache)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("latents")).map_err(|e| Error::io(dir, e))?;
        for (rel, bytes) in self.encode()? {
            let path = dir.join(&rel);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::decode(|rel| {
            let path = dir.join(rel);
            fs::read(&path).map_err(|e| Error::io(&path, e))
        })
    }
}

fn latent_path(id: u64) -> String {
    format!("latents/{id}.chrl")
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexRecord {
    id: u64,
    seq: u64,
    tokens: Vec<u32>,
    embedding: Vec<f64>,
    scene: Scene,
    latents: usize,
}
