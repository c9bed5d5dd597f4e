use dit_reuse::cache::Cache;
use dit_reuse::config::RunConfig;
use dit_reuse::model::{mac_count, MacKind, ModelConfig};
use dit_reuse::scheduler::Mode;
use dit_reuse::serving::Pipeline;
use dit_reuse::world::{build_prompt, gen_workload, Motion, Rect, Request, Scene, SceneObject, Section, Vocabulary, WorkloadParams};

fn config(mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        model: ModelConfig {
            frames: 2,
            grid_h: 8,
            grid_w: 8,
            channels: 16,
            heads: 2,
            ..ModelConfig::distilled()
        },
        workload: WorkloadParams {
            clusters: 4,
            prompts_per_cluster: 6,
            warm_start: 4,
            ..WorkloadParams::default()
        },
        ..RunConfig::default()
    }
}

fn scene(v: &Vocabulary, attribute: &str) -> Scene {
    Scene {
        background: v.lookup("beach").unwrap(),
        objects: vec![
            SceneObject {
                object: v.lookup("dog").unwrap(),
                attribute: v.lookup(attribute).unwrap(),
                verb: v.lookup("running").unwrap(),
                region: Rect { row: 1, col: 1, rows: 3, cols: 3 },
                motion: Motion { rows: 0, cols: 1 },
            },
            SceneObject {
                object: v.lookup("cat").unwrap(),
                attribute: v.lookup("tiny").unwrap(),
                verb: v.lookup("sleeping").unwrap(),
                region: Rect { row: 5, col: 4, rows: 2, cols: 3 },
                motion: Motion::default(),
            },
        ],
    }
}

fn request(index: usize, scene: Scene) -> Request {
    Request {
        index,
        section: Section::Test,
        cluster: 0,
        scene,
    }
}

#[test]
fn repeated_prompt_is_one_miss_then_hits() {
    let mut cfg = config(Mode::Chorus);
    cfg.cache.freeze_after_warm = false;
    let p = Pipeline::with_default_vocab(&cfg).unwrap();
    let s = scene(&p.vocab, "red");
    let mut cache = Cache::new();
    let hits: Vec<bool> = (0..5).map(|i| p.process_request(&request(i, s.clone()), &mut cache).unwrap().1.hit).collect();
    assert_eq!(hits, [false, true, true, true, true]);
    assert_eq!(cache.len(), 1);
}

#[test]
fn identical_hit_reuses_everything_it_is_allowed_to() {
    let cfg = config(Mode::Chorus);
    let p = Pipeline::with_default_vocab(&cfg).unwrap();
    let s = scene(&p.vocab, "red");
    let mut cache = Cache::new();
    p.warm_start([&request(0, s.clone())], &mut cache).unwrap();
    let (_, r) = p.process_request(&request(1, s), &mut cache).unwrap();
    assert!(r.hit);
    assert!((r.m.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.macs.stage1, 0);
    assert!(r.compute_fraction < 1.0);
}

#[test]
fn mac_fraction_matches_closed_form() {
    let cfg = config(Mode::Chorus);
    let p = Pipeline::with_default_vocab(&cfg).unwrap();
    let mut cache = Cache::new();
    p.warm_start([&request(0, scene(&p.vocab, "red"))], &mut cache).unwrap();
    let (_, r) = p.process_request(&request(1, scene(&p.vocab, "golden")), &mut cache).unwrap();
    assert!(r.hit);
    let m = &cfg.model;
    let lp = r.tokens.len();
    let l = m.tokens();
    let step = |n| mac_count(MacKind::Step, n, lp, m);
    let expected = ((r.k2 - r.k1) as u64 * step(r.see_cells) + (m.steps - r.k2) as u64 * step(l)) as f64 / (m.steps as u64 * step(l)) as f64;
    assert_eq!(r.compute_fraction, expected);
}

#[test]
fn baseline_matches_its_own_reference() {
    let cfg = config(Mode::Baseline);
    let p = Pipeline::with_default_vocab(&cfg).unwrap();
    let w = gen_workload(&cfg.workload, &p.vocab, p.dims()).unwrap();
    let out = p.run_stream(&w).unwrap();
    assert!(out.records.iter().all(|r| !r.hit && r.reference_distance == Some(0.0) && r.compute_fraction == 1.0));
}

#[test]
fn oracle_toggle_only_affects_reference_distance() {
    let on = config(Mode::Chorus);
    let off = RunConfig {
        reference_oracle: false,
        ..on.clone()
    };
    let run = |cfg: &RunConfig| {
        let p = Pipeline::with_default_vocab(cfg).unwrap();
        let w = gen_workload(&cfg.workload, &p.vocab, p.dims()).unwrap();
        p.run_stream(&w).unwrap().records
    };
    let (a, b) = (run(&on), run(&off));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(x.reference_distance.is_some());
        assert!(y.reference_distance.is_none());
        assert_eq!((x.hit, x.k1, x.k2, x.compute_fraction), (y.hit, y.k1, y.k2, y.compute_fraction));
        assert_eq!(x.alignment, y.alignment);
    }
}

#[test]
fn stream_is_deterministic() {
    let cfg = config(Mode::Chorus);
    let run = || {
        let p = Pipeline::with_default_vocab(&cfg).unwrap();
        let w = gen_workload(&cfg.workload, &p.vocab, p.dims()).unwrap();
        let mut records = p.run_stream(&w).unwrap().records;
        for r in &mut records {
            r.wall_time_s = 0.0;
        }
        records
    };
    assert_eq!(run(), run());
}

#[test]
fn warm_section_fills_the_cache_with_distinct_prompts() {
    let cfg = config(Mode::Chorus);
    let p = Pipeline::with_default_vocab(&cfg).unwrap();
    let w = gen_workload(&cfg.workload, &p.vocab, p.dims()).unwrap();
    let out = p.run_stream(&w).unwrap();
    assert!(out.cache.frozen);
    let distinct: std::collections::BTreeSet<_> = w.warm().map(|r| build_prompt(&r.scene).0).collect();
    assert_eq!(out.cache.len(), distinct.len());
    assert_eq!(out.records.len(), w.test().count());
}
