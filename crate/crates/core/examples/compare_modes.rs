//! Serve the same workload in every mode and compare compute and alignment.
//!
//! cargo run --example compare_modes

use dit_reuse::config::RunConfig;
use dit_reuse::scheduler::Mode;
use dit_reuse::serving::{aggregate, Pipeline};
use dit_reuse::world::{gen_workload, WorkloadParams};

fn main() -> dit_reuse::Result<()> {
    for mode in [Mode::Baseline, Mode::Nirvana, Mode::Chorus] {
        let cfg = RunConfig {
            mode,
            workload: WorkloadParams {
                clusters: 6,
                prompts_per_cluster: 6,
                warm_start: 12,
                ..WorkloadParams::default()
            },
            ..RunConfig::default()
        };
        let pipeline = Pipeline::with_default_vocab(&cfg)?;
        let workload = gen_workload(&cfg.workload, &pipeline.vocab, pipeline.dims())?;
        let s = aggregate(&pipeline.run_stream(&workload)?.records, 100)?;
        let alignment = s.mean_alignment.get(mode.as_str()).map_or("n/a".to_string(), |a| format!("{a:.4}"));
        println!(
            "{:<8} hit rate {:.2}  compute {:.3}  alignment {alignment:>6}  distance {:.6}",
            mode.as_str(),
            s.hit_rate,
            s.mean_compute_fraction,
            s.mean_reference_distance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
