//! Windowed and overall statistics over request records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::serving::record::RequestRecord;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: usize,
    /// Position of the window's first record in the stream.
    pub start: usize,
    pub requests: usize,
    pub hits: usize,
    pub hit_rate: f64,
    /// Hit rate over every record up to the end of this window.
    pub cumulative_hit_rate: f64,
    pub mean_compute_fraction: f64,
    pub mean_alignment: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub requests: usize,
    pub hits: usize,
    pub hit_rate: f64,
    pub mean_compute_fraction: f64,
    pub hit_mean_compute_fraction: Option<f64>,
    /// `1 / mean_compute_fraction`.
    pub proxy_speedup: f64,
    /// `1 / hit_mean_compute_fraction`.
    pub hit_proxy_speedup: Option<f64>,
    /// Mean normalized alignment of records that have one, keyed by mode.
    pub mean_alignment: BTreeMap<String, f64>,
    pub mean_reference_distance: Option<f64>,
    pub windows: Vec<WindowRow>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(records: &[RequestRecord], window: usize) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if window == 0 {
        return Err(Error::Config("aggregation window must be >= 1".into()));
    }
    let mut windows = Vec::new();
    let mut hits_so_far = 0;
    for (w, chunk) in records.chunks(window).enumerate() {
        let hits = chunk.iter().filter(|r| r.hit).count();
        hits_so_far += hits;
        let end = w * window + chunk.len();
        windows.push(WindowRow {
            window: w,
            start: w * window,
            requests: chunk.len(),
            hits,
            hit_rate: hits as f64 / chunk.len() as f64,
            cumulative_hit_rate: hits_so_far as f64 / end as f64,
            mean_compute_fraction: mean(chunk.iter().map(|r| r.compute_fraction)).expect("chunks are non-empty"),
            mean_alignment: mean(chunk.iter().filter_map(|r| r.alignment.map(|a| a.normalized))),
        });
    }
    let hits = records.iter().filter(|r| r.hit).count();
    let mean_fraction = mean(records.iter().map(|r| r.compute_fraction)).expect("records are non-empty");
    let hit_fraction = mean(records.iter().filter(|r| r.hit).map(|r| r.compute_fraction));
    let mut by_mode: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(a) = r.alignment {
            let slot = by_mode.entry(r.mode.as_str().to_string()).or_default();
            slot.0 += a.normalized;
            slot.1 += 1;
        }
    }
    Ok(Summary {
        requests: records.len(),
        hits,
        hit_rate: hits as f64 / records.len() as f64,
        mean_compute_fraction: mean_fraction,
        hit_mean_compute_fraction: hit_fraction,
        proxy_speedup: 1.0 / mean_fraction,
        hit_proxy_speedup: hit_fraction.map(|f| 1.0 / f),
        mean_alignment: by_mode.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        mean_reference_distance: mean(records.iter().filter_map(|r| r.reference_distance)),
        windows,
    })
}

/// Plot-ready CSV with one row per window.
pub fn windows_csv(summary: &Summary) -> String {
    let mut out = String::from("window,start,requests,hits,hit_rate,cumulative_hit_rate,mean_compute_fraction,mean_alignment\n");
    for w in &summary.windows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            w.window,
            w.start,
            w.requests,
            w.hits,
            w.hit_rate,
            w.cumulative_hit_rate,
            w.mean_compute_fraction,
            w.mean_alignment.map(|a| a.to_string()).unwrap_or_default()
        ));
    }
    out
}
