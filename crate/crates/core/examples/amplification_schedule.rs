//! Print the per-step key and output amplification for a few match strengths.
//!
//! cargo run --example amplification_schedule

use dit_reuse::scheduler::{plan_stages, Mode, SchedulerParams};
use dit_reuse::tgaa::{schedule, TgaaParams};

fn main() {
    let sched = SchedulerParams::vanilla();
    let params = TgaaParams::default();
    let steps = 50;
    for m in [0.8, 0.9, 0.97] {
        let plan = plan_stages(m, steps, &sched, Mode::Chorus);
        let table = schedule(&plan, m, sched.tau, &params);
        println!("m = {m}: reuse {} steps, selective {}, full {}", plan.k1, plan.selective_steps(), plan.full_steps());
        for t in (plan.k1..plan.k2).step_by(4) {
            let a = table.at(t);
            println!("  t = {t:>2}  gamma_k {:.3}  gamma_o {:.3}", a.key, a.output);
        }
    }
}
