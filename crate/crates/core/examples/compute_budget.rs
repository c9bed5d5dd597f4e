//! Tabulate MAC fractions for a hit as the recomputed region grows.
//!
//! cargo run --example compute_budget

use dit_reuse::model::{mac_count, MacKind, ModelConfig};
use dit_reuse::scheduler::{plan_stages, Mode, SchedulerParams};

fn main() {
    let cfg = ModelConfig::distilled();
    let sched = SchedulerParams::default();
    let l = cfg.tokens();
    let prompt_len = 7;
    let step = |n| mac_count(MacKind::Step, n, prompt_len, &cfg);
    println!("L = {l} tokens, d = {}, full step = {} MACs", cfg.channels, step(l));
    for m in [0.85, 0.95, 1.0] {
        let plan = plan_stages(m, cfg.steps, &sched, Mode::Chorus);
        println!("m = {m}: plan ({}, {})", plan.k1, plan.k2);
        for see in [l / 8, l / 4, l / 2, l] {
            let used = plan.selective_steps() as u64 * step(see) + plan.full_steps() as u64 * step(l);
            let fraction = used as f64 / (cfg.steps as u64 * step(l)) as f64;
            println!("  |see| = {see:>4}: step ratio {:.3}, fraction {fraction:.3}, speedup {:.2}x", step(see) as f64 / step(l) as f64, 1.0 / fraction);
        }
    }
}
