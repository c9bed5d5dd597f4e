//! Per-request records and their line-delimited file format.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scheduler::Mode;
use crate::world::{AlignmentScore, TokenId};
use crate::{Error, Result};

/// MACs spent per stage, and what a no-reuse run would have spent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMacs {
    pub stage1: u64,
    pub stage2: u64,
    pub stage3: u64,
    pub full: u64,
}

impl StageMacs {
    pub fn total(&self) -> u64 {
        self.stage1 + self.stage2 + self.stage3
    }

    pub fn fraction(&self) -> f64 {
        self.total() as f64 / self.full as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestRecord {
    pub index: usize,
    pub cluster: usize,
    pub mode: Mode,
    pub prompt: String,
    pub tokens: Vec<TokenId>,
    /// Top-1 cosine similarity; `null` when the cache was empty.
    pub m: Option<f64>,
    pub hit: bool,
    /// Cache entry id the request reused.
    pub source: Option<u64>,
    pub k1: usize,
    pub k2: usize,
    pub diff_indices: Vec<usize>,
    /// The prompts did not share a template, so the whole frame was
    /// recomputed during the selective stage.
    pub fallback: bool,
    pub see_cells: usize,
    pub edit_cells: usize,
    pub macs: StageMacs,
    pub compute_fraction: f64,
    /// Alignment against the target and source scenes over the divergent
    /// object cells; absent for misses and for diffs with no object cells.
    pub alignment: Option<AlignmentScore>,
    /// Mean squared distance to the request's own no-reuse output.
    pub reference_distance: Option<f64>,
    /// Informational; includes retrieval, mask construction and the oracle.
    pub wall_time_s: f64,
}

pub fn write_records<W: Write>(w: &mut W, records: &[RequestRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(w, "{line}").map_err(|e| Error::io("<records>", e))?;
    }
    Ok(())
}

/// Parses a record stream; `path` is only used in error messages.
pub fn read_records<R: std::io::Read>(r: R, path: &Path) -> Result<Vec<RequestRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn sample_record(index: usize, hit: bool, fraction_half: bool, mode: Mode) -> RequestRecord {
    let full = 1000;
    let spent = if fraction_half { 500 } else { 1000 };
    RequestRecord {
        index,
        cluster: 0,
        mode,
        prompt: "beach spotted dog running".into(),
        tokens: vec![0, 20, 8, 32],
        m: if index == 0 { None } else { Some(0.9) },
        hit,
        source: hit.then_some(0),
        k1: 0,
        k2: 0,
        diff_indices: vec![],
        fallback: false,
        see_cells: 0,
        edit_cells: 0,
        macs: StageMacs {
            stage1: 0,
            stage2: 0,
            stage3: spent,
            full,
        },
        compute_fraction: spent as f64 / full as f64,
        alignment: None,
        reference_distance: Some(0.0),
        wall_time_s: 0.01,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_null_m() {
        let rs = vec![sample_record(0, false, false, Mode::Chorus), sample_record(1, true, true, Mode::Chorus)];
        let mut buf = Vec::new();
        write_records(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"m\":null"));
        assert_eq!(read_records(buf.as_slice(), Path::new("r.jsonl")).unwrap(), rs);
    }

    #[test]
    fn malformed_line_is_named() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample_record(0, false, false, Mode::Baseline)]).unwrap();
        buf.extend_from_slice(b"{\"index\": \"x\"}\n");
        match read_records(buf.as_slice(), Path::new("r.jsonl")) {
            Err(Error::MalformedRecord { line, path, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(path, Path::new("r.jsonl"));
            }
            other => panic!("expected a malformed record error, got {other:?}"),
        }
    }
}
