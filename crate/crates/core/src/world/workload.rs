//! Clustered request streams and their line-delimited file format.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::world::scene::{build_prompt, GridDims, Motion, Rect, Scene, SceneObject, MAX_OBJECTS};
use crate::world::vocab::{TokenClass, Vocabulary};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadParams {
    pub clusters: usize,
    pub prompts_per_cluster: usize,
    pub p_object: f64,
    pub p_attribute: f64,
    pub p_background: f64,
    pub p_verb: f64,
    pub seed: u64,
    /// Leading requests used to populate the cache before the test stream.
    pub warm_start: usize,
    pub max_objects: usize,
    pub vocab_seed: u64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            clusters: 20,
            prompts_per_cluster: 10,
            p_object: 0.1,
            p_attribute: 0.3,
            p_background: 0.05,
            p_verb: 0.1,
            seed: 7,
            warm_start: 100,
            max_objects: 2,
            vocab_seed: 11,
        }
    }
}

impl WorkloadParams {
    pub fn total(&self) -> usize {
        self.clusters * self.prompts_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_object", self.p_object),
            ("p_attribute", self.p_attribute),
            ("p_background", self.p_background),
            ("p_verb", self.p_verb),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("workload.{name} = {p} is not in [0, 1]")));
            }
        }
        if self.clusters == 0 || self.prompts_per_cluster == 0 {
            return Err(Error::Config("workload needs at least one cluster and one prompt per cluster".into()));
        }
        if !(1..=MAX_OBJECTS).contains(&self.max_objects) {
            return Err(Error::Config(format!("workload.max_objects must be in 1..={MAX_OBJECTS}")));
        }
        if self.warm_start > self.total() {
            return Err(Error::Config(format!(
                "workload.warm_start = {} exceeds the {} generated requests",
                self.warm_start,
                self.total()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Warm,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub index: usize,
    pub section: Section,
    pub cluster: usize,
    pub scene: Scene,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload {
    pub requests: Vec<Request>,
}

impl Workload {
    pub fn warm(&self) -> impl Iterator<Item = &Request> {
        self.requests.iter().filter(|r| r.section == Section::Warm)
    }

    pub fn test(&self) -> impl Iterator<Item = &Request> {
        self.requests.iter().filter(|r| r.section == Section::Test)
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

fn random_object(vocab: &Vocabulary, dims: GridDims, rng: &mut ChaCha8Rng) -> SceneObject {
    let max_rows = (dims.grid_h / 3).max(1);
    let max_cols = (dims.grid_w / 3).max(1);
    let rows = rng.random_range(1..=max_rows).max(2.min(dims.grid_h));
    let cols = rng.random_range(1..=max_cols).max(2.min(dims.grid_w));
    let region = Rect {
        row: rng.random_range(0..=dims.grid_h - rows),
        col: rng.random_range(0..=dims.grid_w - cols),
        rows,
        cols,
    };
    let motion = match rng.random_range(0..4) {
        0 => Motion { rows: 0, cols: 1 },
        1 => Motion { rows: 0, cols: -1 },
        2 => Motion { rows: 1, cols: 0 },
        _ => Motion::default(),
    };
    SceneObject {
        object: vocab.pick(TokenClass::Object, rng),
        attribute: vocab.pick(TokenClass::Attribute, rng),
        verb: vocab.pick(TokenClass::Verb, rng),
        region,
        motion,
    }
}

fn base_scene(params: &WorkloadParams, vocab: &Vocabulary, dims: GridDims, rng: &mut ChaCha8Rng) -> Scene {
    let n = rng.random_range(1..=params.max_objects);
    Scene {
        background: vocab.pick(TokenClass::Background, rng),
        objects: (0..n).map(|_| random_object(vocab, dims, rng)).collect(),
    }
}

fn variant(base: &Scene, params: &WorkloadParams, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Scene {
    let swap = |id, p: f64, rng: &mut ChaCha8Rng| {
        if rng.random_bool(p) {
            vocab.substitute(id, rng)
        } else {
            id
        }
    };
    let mut scene = base.clone();
    scene.background = swap(scene.background, params.p_background, rng);
    for o in &mut scene.objects {
        o.attribute = swap(o.attribute, params.p_attribute, rng);
        o.object = swap(o.object, params.p_object, rng);
        o.verb = swap(o.verb, params.p_verb, rng);
    }
    scene
}

/// Generates `clusters × prompts_per_cluster` requests. Each cluster has a
/// base scene; every request is a token-substituted variant of its base
/// with the base geometry. The clusters are interleaved by a seeded shuffle
/// and the first `warm_start` requests form the warm section.
pub fn gen_workload(params: &WorkloadParams, vocab: &Vocabulary, dims: GridDims) -> Result<Workload> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bases: Vec<Scene> = (0..params.clusters).map(|_| base_scene(params, vocab, dims, &mut rng)).collect();
    let mut items: Vec<(usize, Scene)> = Vec::with_capacity(params.total());
    for (c, base) in bases.iter().enumerate() {
        for _ in 0..params.prompts_per_cluster {
            items.push((c, variant(base, params, vocab, &mut rng)));
        }
    }
    items.shuffle(&mut rng);
    let requests = items
        .into_iter()
        .enumerate()
        .map(|(index, (cluster, scene))| Request {
            index,
            section: if index < params.warm_start { Section::Warm } else { Section::Test },
            cluster,
            scene,
        })
        .collect();
    Ok(Workload { requests })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectLine {
    attribute: String,
    object: String,
    verb: String,
    region: Rect,
    #[serde(default)]
    motion: Motion,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestLine {
    index: usize,
    section: Section,
    cluster: usize,
    tokens: Vec<String>,
    background: String,
    objects: Vec<ObjectLine>,
}

fn to_line(r: &Request, vocab: &Vocabulary) -> RequestLine {
    let name = |id| vocab.name(id).to_string();
    RequestLine {
        index: r.index,
        section: r.section,
        cluster: r.cluster,
        tokens: build_prompt(&r.scene).0.into_iter().map(name).collect(),
        background: name(r.scene.background),
        objects: r
            .scene
            .objects
            .iter()
            .map(|o| ObjectLine {
                attribute: name(o.attribute),
                object: name(o.object),
                verb: name(o.verb),
                region: o.region,
                motion: o.motion,
            })
            .collect(),
    }
}

fn from_line(line: RequestLine, vocab: &Vocabulary, dims: GridDims) -> std::result::Result<Request, String> {
    let id = |s: &str| vocab.lookup(s).map_err(|e| e.to_string());
    let mut objects = Vec::with_capacity(line.objects.len());
    for o in &line.objects {
        objects.push(SceneObject {
            object: id(&o.object)?,
            attribute: id(&o.attribute)?,
            verb: id(&o.verb)?,
            region: o.region,
            motion: o.motion,
        });
    }
    let scene = Scene {
        background: id(&line.background)?,
        objects,
    };
    scene.validate(vocab, dims).map_err(|e| e.to_string())?;
    let tokens: Vec<String> = build_prompt(&scene).0.into_iter().map(|t| vocab.name(t).to_string()).collect();
    if tokens != line.tokens {
        return Err(format!("tokens {:?} do not match the scene ({:?})", line.tokens, tokens));
    }
    Ok(Request {
        index: line.index,
        section: line.section,
        cluster: line.cluster,
        scene,
    })
}

pub fn write_workload<W: Write>(w: &mut W, workload: &Workload, vocab: &Vocabulary) -> Result<()> {
    for r in &workload.requests {
        let line = serde_json::to_string(&to_line(r, vocab))?;
        writeln!(w, "{line}").map_err(|e| Error::io("<workload>", e))?;
    }
    Ok(())
}

/// Parses a workload stream; `path` is only used in error messages.
pub fn read_workload<R: std::io::Read>(r: R, path: &Path, vocab: &Vocabulary, dims: GridDims) -> Result<Workload> {
    let mut requests = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let parsed: RequestLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        requests.push(from_line(parsed, vocab, dims).map_err(malformed)?);
    }
    Ok(Workload { requests })
}

/// Conventional vocabulary path stored next to a workload file.
pub fn vocab_path(workload: &Path) -> std::path::PathBuf {
    workload.with_extension("vocab.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims {
            frames: 4,
            grid_h: 16,
            grid_w: 16,
        }
    }

    #[test]
    fn zero_probabilities_reproduce_the_base() {
        let v = Vocabulary::new(1);
        let p = WorkloadParams {
            p_object: 0.0,
            p_attribute: 0.0,
            p_background: 0.0,
            p_verb: 0.0,
            clusters: 3,
            warm_start: 0,
            ..WorkloadParams::default()
        };
        let w = gen_workload(&p, &v, dims()).unwrap();
        for c in 0..3 {
            let scenes: Vec<&Scene> = w.requests.iter().filter(|r| r.cluster == c).map(|r| &r.scene).collect();
            assert_eq!(scenes.len(), 10);
            assert!(scenes.iter().all(|s| *s == scenes[0]));
        }
    }

    #[test]
    fn attribute_only_substitution() {
        let v = Vocabulary::new(1);
        let p = WorkloadParams {
            clusters: 1,
            p_object: 0.0,
            p_attribute: 1.0,
            p_background: 0.0,
            p_verb: 0.0,
            warm_start: 0,
            ..WorkloadParams::default()
        };
        let w = gen_workload(&p, &v, dims()).unwrap();
        let first = &w.requests[0].scene;
        for r in &w.requests {
            assert_eq!(r.scene.background, first.background);
            for (a, b) in r.scene.objects.iter().zip(&first.objects) {
                assert_eq!((a.object, a.verb, a.region), (b.object, b.verb, b.region));
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let v = Vocabulary::new(1);
        let p = WorkloadParams::default();
        let a = gen_workload(&p, &v, dims()).unwrap();
        assert_eq!(a, gen_workload(&p, &v, dims()).unwrap());
        let b = gen_workload(&WorkloadParams { seed: 8, ..p.clone() }, &v, dims()).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.warm().count(), 100);
        assert_eq!(a.test().count(), 100);
    }

    #[test]
    fn rejects_bad_params() {
        let v = Vocabulary::new(1);
        for p in [
            WorkloadParams {
                prompts_per_cluster: 0,
                ..WorkloadParams::default()
            },
            WorkloadParams {
                p_verb: 1.5,
                ..WorkloadParams::default()
            },
            WorkloadParams {
                warm_start: 1000,
                ..WorkloadParams::default()
            },
        ] {
            assert!(gen_workload(&p, &v, dims()).is_err());
        }
    }

    #[test]
    fn file_round_trip_and_line_errors() {
        let v = Vocabulary::new(1);
        let w = gen_workload(&WorkloadParams::default(), &v, dims()).unwrap();
        let mut buf = Vec::new();
        write_workload(&mut buf, &w, &v).unwrap();
        let back = read_workload(buf.as_slice(), Path::new("w.jsonl"), &v, dims()).unwrap();
        assert_eq!(back, w);
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replacen("\"section\":\"warm\"", "\"section\":\"lukewarm\"", 1);
        match read_workload(text.as_bytes(), Path::new("w.jsonl"), &v, dims()) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }
}
