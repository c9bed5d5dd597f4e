//! Serve a generated workload and print the per-window summary.
//!
//! cargo run --example serve_stream

use dit_reuse::config::RunConfig;
use dit_reuse::serving::{aggregate, Pipeline};
use dit_reuse::world::{gen_workload, WorkloadParams};

fn main() -> dit_reuse::Result<()> {
    let cfg = RunConfig {
        reference_oracle: false,
        workload: WorkloadParams {
            clusters: 8,
            prompts_per_cluster: 8,
            warm_start: 24,
            ..WorkloadParams::default()
        },
        ..RunConfig::default()
    };
    let pipeline = Pipeline::with_default_vocab(&cfg)?;
    let workload = gen_workload(&cfg.workload, &pipeline.vocab, pipeline.dims())?;
    let out = pipeline.run_stream(&workload)?;
    for r in out.records.iter().take(5) {
        println!("#{:<3} hit={:<5} k1={} k2={} compute={:.3} {}", r.index, r.hit, r.k1, r.k2, r.compute_fraction, r.prompt);
    }
    let summary = aggregate(&out.records, 10)?;
    for w in &summary.windows {
        println!("window {}: hit rate {:.2}, cumulative {:.2}, compute {:.3}", w.window, w.hit_rate, w.cumulative_hit_rate, w.mean_compute_fraction);
    }
    println!("overall proxy speedup {:.3}x", summary.proxy_speedup);
    Ok(())
}
