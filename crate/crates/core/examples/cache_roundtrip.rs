//! Fill a cache, save it to disk, reload it and repeat a lookup.
//!
//! cargo run --example cache_roundtrip

use dit_reuse::cache::Cache;
use dit_reuse::config::RunConfig;
use dit_reuse::serving::Pipeline;
use dit_reuse::world::{build_prompt, embed_prompt, gen_workload, WorkloadParams};

fn main() -> dit_reuse::Result<()> {
    let cfg = RunConfig {
        workload: WorkloadParams {
            clusters: 3,
            prompts_per_cluster: 3,
            warm_start: 4,
            ..WorkloadParams::default()
        },
        ..RunConfig::default()
    };
    let pipeline = Pipeline::with_default_vocab(&cfg)?;
    let workload = gen_workload(&cfg.workload, &pipeline.vocab, pipeline.dims())?;
    let mut cache = Cache::new();
    pipeline.warm_start(workload.warm(), &mut cache)?;

    let dir = std::env::temp_dir().join("dit-reuse-cache-example");
    cache.save(&dir)?;
    let loaded = Cache::load(&dir)?;
    println!("saved and reloaded {} entries under {}", loaded.len(), dir.display());

    for request in workload.test() {
        let query = embed_prompt(&build_prompt(&request.scene), &pipeline.vocab);
        let (a, b) = (cache.lookup(&query, cfg.scheduler.tau), loaded.lookup(&query, cfg.scheduler.tau));
        println!("request {}: m = {:.4}, hit = {}, same after reload = {}", request.index, a.m, a.hit, a == b);
    }
    Ok(())
}
