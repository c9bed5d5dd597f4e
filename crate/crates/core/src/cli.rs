//! Command-line front end: `gen-workload`, `run`, `report` and `verify`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, CONFIG_ENV};
use crate::scheduler::Mode;
use crate::serving::{aggregate, read_records, windows_csv, write_records, Pipeline, RequestRecord, Summary};
use crate::verify::{run_checks, CheckResult, VerifyOptions};
use crate::world::workload::vocab_path;
use crate::world::{gen_workload, read_workload, write_workload, GridDims, Vocabulary, Workload};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dit-reuse", version, about = "Inter-request latent reuse simulator for video DiT serving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set scheduler.tau=0.8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a workload file (and its vocabulary file).
    GenWorkload {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path; defaults to `output.workload`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a workload and write records, summary and window CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Overrides `mode` from the config.
        #[arg(long)]
        mode: Option<Mode>,
        /// Workload file from `gen-workload`; generated in memory if absent.
        #[arg(long)]
        workload: Option<PathBuf>,
        /// Print the mask hierarchy of every selective request to stderr.
        #[arg(long)]
        dump_masks: bool,
    },
    /// Summarize a records file.
    Report {
        records: PathBuf,
        #[arg(long, default_value_t = 100)]
        window: usize,
    },
    /// Run the built-in invariant checks.
    Verify,
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn gen_workload_cmd(cfg: &RunConfig, out: &Path) -> Result<String> {
    let cfg = cfg.resolved();
    let vocab = Vocabulary::new(cfg.workload.vocab_seed);
    let workload = gen_workload(&cfg.workload, &vocab, GridDims::of(&cfg.model))?;
    let mut buf = Vec::new();
    write_workload(&mut buf, &workload, &vocab)?;
    write_atomic(&vocab_path(out), vocab.to_json()?.as_bytes())?;
    write_atomic(out, &buf)?;
    let distinct: std::collections::BTreeSet<_> = workload.requests.iter().map(|r| crate::world::build_prompt(&r.scene).0).collect();
    Ok(format!(
        "wrote {} ({} warm + {} test requests, {} clusters x {} variants, {} distinct prompts)\n",
        out.display(),
        workload.warm().count(),
        workload.test().count(),
        cfg.workload.clusters,
        cfg.workload.prompts_per_cluster,
        distinct.len()
    ))
}

pub fn load_workload(path: &Path, cfg: &RunConfig) -> Result<(Workload, Vocabulary)> {
    let vpath = vocab_path(path);
    let text = fs::read_to_string(&vpath).map_err(|e| Error::io(&vpath, e))?;
    let vocab = Vocabulary::from_json(&text)?;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let workload = read_workload(file, path, &vocab, GridDims::of(&cfg.model))?;
    Ok((workload, vocab))
}

/// Runs the stream and writes every output only after it succeeded.
pub fn run_cmd(cfg: &RunConfig, workload_path: Option<&Path>, dump_masks: bool) -> Result<(Summary, String)> {
    let cfg = cfg.resolved();
    let (workload, vocab) = match workload_path {
        Some(p) => load_workload(p, &cfg)?,
        None => {
            let vocab = Vocabulary::new(cfg.workload.vocab_seed);
            (gen_workload(&cfg.workload, &vocab, GridDims::of(&cfg.model))?, vocab)
        }
    };
    let pipeline = Pipeline::new(&cfg, vocab)?;
    let out = pipeline.run_stream(&workload)?;
    let summary = aggregate(&out.records, cfg.output.window)?;
    let mut dump = String::new();
    if dump_masks {
        for r in out.records.iter().filter(|r| r.k2 > r.k1) {
            let request = workload.requests.iter().find(|q| q.index == r.index).expect("record comes from the workload");
            let source = out.cache.entries().iter().find(|e| Some(e.id) == r.source).expect("source is cached");
            let (masks, _, _) = pipeline.plan_masks(&request.scene, &source.scene)?;
            let _ = writeln!(dump, "## request {} (source {})", r.index, source.id);
            dump.push_str(&masks.debug_dump());
        }
    }
    let mut records = Vec::new();
    write_records(&mut records, &out.records)?;
    write_atomic(&cfg.output.records, &records)?;
    write_atomic(&cfg.output.summary, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    write_atomic(&cfg.output.windows_csv, windows_csv(&summary).as_bytes())?;
    if let Some(dir) = &cfg.cache.dir {
        out.cache.save(dir)?;
    }
    Ok((summary, dump))
}

fn render_summary(out: &mut String, summary: &Summary) {
    let _ = writeln!(out, "{:>6} {:>6} {:>8} {:>6} {:>9} {:>9} {:>9}", "window", "start", "requests", "hits", "hit_rate", "cum_hit", "compute");
    for w in &summary.windows {
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>8} {:>6} {:>9.3} {:>9.3} {:>9.3}",
            w.window, w.start, w.requests, w.hits, w.hit_rate, w.cumulative_hit_rate, w.mean_compute_fraction
        );
    }
    let _ = writeln!(
        out,
        "total: {} requests, {} hits (rate {:.3}), mean compute {:.3}, proxy speedup {:.3}x",
        summary.requests, summary.hits, summary.hit_rate, summary.mean_compute_fraction, summary.proxy_speedup
    );
    if let (Some(f), Some(s)) = (summary.hit_mean_compute_fraction, summary.hit_proxy_speedup) {
        let _ = writeln!(out, "hits: mean compute {f:.3}, proxy speedup {s:.3}x");
    }
    for (mode, a) in &summary.mean_alignment {
        let _ = writeln!(out, "mean alignment ({mode}): {a:.4}");
    }
    if let Some(d) = summary.mean_reference_distance {
        let _ = writeln!(out, "mean distance to no-reuse output: {d:.6}");
    }
}

/// Human-readable report; mixed-mode files get one table per mode.
pub fn report(records: &[RequestRecord], window: usize) -> Result<String> {
    let mut out = String::new();
    let mut modes: Vec<Mode> = records.iter().map(|r| r.mode).collect();
    modes.sort_by_key(|m| m.as_str());
    modes.dedup();
    if modes.len() <= 1 {
        render_summary(&mut out, &aggregate(records, window)?);
        return Ok(out);
    }
    for mode in modes {
        let subset: Vec<RequestRecord> = records.iter().filter(|r| r.mode == mode).cloned().collect();
        let _ = writeln!(out, "== mode {}", mode.as_str());
        render_summary(&mut out, &aggregate(&subset, window)?);
    }
    Ok(out)
}

pub fn report_cmd(path: &Path, window: usize) -> Result<String> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    report(&read_records(file, path)?, window)
}

pub fn render_checks(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for c in results {
        let _ = writeln!(out, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out
}

pub fn verify_cmd(opts: &VerifyOptions) -> (bool, String) {
    let results = run_checks(opts);
    (results.iter().all(|c| c.passed), render_checks(&results))
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenWorkload { config, out } => {
            let cfg = config.load()?;
            let out = out.unwrap_or_else(|| cfg.output.workload.clone());
            print!("{}", gen_workload_cmd(&cfg, &out)?);
        }
        Command::Run {
            config,
            mode,
            workload,
            dump_masks,
        } => {
            let mut cfg = config.load()?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            let (summary, dump) = run_cmd(&cfg, workload.as_deref(), dump_masks)?;
            eprint!("{dump}");
            let mut out = String::new();
            render_summary(&mut out, &summary);
            print!("{out}");
            println!("records: {}", cfg.output.records.display());
        }
        Command::Report { records, window } => print!("{}", report_cmd(&records, window)?),
        Command::Verify => {
            let (ok, text) = verify_cmd(&VerifyOptions::default());
            print!("{text}");
            return Ok(ok);
        }
    }
    Ok(true)
}

/// Entry point shared by the binary.
pub fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
