//! Reproducible experiment recipes: where the data comes from, which graph
//! to build and how to train it, all driven by one seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSpec, LinkSpec, NodeSpec, RelationGraph, RelaxParams, Schedules, Stage};
use crate::synth::{generate, TopologySpec};
use crate::table::{Sample, StreamTable};
use crate::vision::{extract_streams, scene_table, synth_sequence, Sampling, SequenceKind, SCENE_COLUMNS};

pub const DEFAULT_NEURONS: usize = 100;

/// A shipped topology by name, or a full description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologyRef {
    Preset(String),
    Custom(TopologySpec),
}

impl TopologyRef {
    pub fn resolve(&self) -> Result<TopologySpec> {
        let spec = match self {
            TopologyRef::Preset(name) => TopologySpec::preset(name).ok_or_else(|| {
                Error::Configuration(format!(
                    "unknown topology preset `{name}` (known: {})",
                    TopologySpec::PRESETS.join(", ")
                ))
            })?,
            TopologyRef::Custom(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Synthetic moving scene measured with the in-repo operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionScene {
    pub sequence: SequenceKind,
    pub velocity: [f64; 2],
    pub frames: usize,
    pub size: [usize; 2],
    pub wavelength: f64,
    /// Lucas-Kanade window.
    pub window: usize,
    /// Pixels sampled per frame pair; all interior pixels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels_per_pair: Option<usize>,
}

impl Default for VisionScene {
    fn default() -> Self {
        VisionScene {
            sequence: SequenceKind::TranslatingTexture,
            velocity: [1.0, 0.0],
            frames: 30,
            size: [200, 200],
            wavelength: 16.0,
            window: 5,
            pixels_per_pair: Some(2000),
        }
    }
}

impl VisionScene {
    /// Stream table of the scene, rows shuffled with `seed`.
    pub fn streams(&self, seed: u64) -> Result<StreamTable> {
        let seq = synth_sequence(
            self.sequence,
            self.velocity,
            self.frames,
            (self.size[0], self.size[1]),
            self.wavelength,
        )?;
        let sampling = match self.pixels_per_pair {
            Some(k) => Sampling::RandomK { k, seed },
            None => Sampling::AllPixels,
        };
        let table = scene_table(&extract_streams(&seq, sampling, self.window)?);
        let mut rows = table.rows().to_vec();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        StreamTable::with_rows(table.names().to_vec(), rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        topology: TopologyRef,
        n: usize,
        #[serde(default)]
        noise_sigma: f64,
    },
    Vision(VisionScene),
    /// Streams supplied as a CSV file at run time.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Training {
    /// Every node and edge adapts on every step.
    Joint { steps: u64 },
    /// Edge by edge, optionally followed by joint steps over the whole graph.
    Pairwise {
        stages: Vec<Stage>,
        #[serde(default)]
        fine_tune_steps: u64,
    },
}

impl Training {
    /// Length of the longest uninterrupted schedule run.
    pub fn planned_steps(&self) -> u64 {
        match self {
            Training::Joint { steps } => *steps,
            Training::Pairwise { stages, fine_tune_steps } => {
                stages.iter().map(|s| s.steps).max().unwrap_or(0).max(*fine_tune_steps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    #[serde(default = "default_neurons")]
    pub n_neurons: usize,
    /// Derived from the data source when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    pub training: Training,
    /// Defaults scaled to the planned training length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Schedules>,
    #[serde(default)]
    pub relax: RelaxParams,
}

fn default_neurons() -> usize {
    DEFAULT_NEURONS
}

impl ExperimentConfig {
    /// Joint training on a synthetic preset.
    pub fn synthetic(preset: &str, n_rows: usize, steps: u64, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            data: DataSource::Synthetic {
                topology: TopologyRef::Preset(preset.into()),
                n: n_rows,
                noise_sigma: 0.0,
            },
            n_neurons: DEFAULT_NEURONS,
            graph: None,
            training: Training::Joint { steps },
            schedules: None,
            relax: RelaxParams::default(),
        }
    }

    /// The visual-scene network (intensity, gradient magnitude, temporal
    /// derivative, and joint flow/gradient) trained pair by pair.
    pub fn vision(scene: VisionScene, steps_per_stage: u64, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            data: DataSource::Vision(scene),
            n_neurons: DEFAULT_NEURONS,
            graph: None,
            training: Training::Pairwise {
                stages: vec![
                    Stage::new("i", "v", steps_per_stage),
                    Stage::new("i", "g", steps_per_stage),
                    Stage::new("fg", "v", steps_per_stage),
                ],
                fine_tune_steps: 0,
            },
            schedules: None,
            relax: RelaxParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Streams the configured data source provides, if known before loading.
    pub fn stream_names(&self) -> Result<Option<Vec<String>>> {
        Ok(match &self.data {
            DataSource::Synthetic { topology, .. } => Some(topology.resolve()?.stream_names()),
            DataSource::Vision(_) => Some(SCENE_COLUMNS.iter().map(|s| s.to_string()).collect()),
            DataSource::File => None,
        })
    }

    pub fn graph_spec(&self) -> Result<GraphSpec> {
        if let Some(g) = &self.graph {
            return Ok(g.clone());
        }
        match &self.data {
            DataSource::Synthetic { topology, .. } => {
                let topo = topology.resolve()?;
                Ok(GraphSpec {
                    nodes: topo.stream_names().iter().map(|n| NodeSpec::scalar(n, self.n_neurons)).collect(),
                    edges: topo.edges.iter().map(|e| LinkSpec::new(&e.from, &e.to)).collect(),
                })
            }
            DataSource::Vision(_) => Ok(vision_graph(self.n_neurons)),
            DataSource::File => {
                Err(Error::Configuration("file data needs an explicit `graph` section".into()))
            }
        }
    }

    pub fn schedules(&self) -> Schedules {
        self.schedules.unwrap_or_else(|| Schedules::defaults(self.training.planned_steps()))
    }

    /// Check the whole recipe before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::Configuration("n_neurons must be positive".into()));
        }
        if let Some(s) = &self.schedules {
            s.validate()?;
        }
        self.relax.validate()?;
        match &self.data {
            DataSource::Synthetic { n, noise_sigma, .. } => {
                if *n == 0 {
                    return Err(Error::Configuration("synthetic data needs n > 0".into()));
                }
                if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                    return Err(Error::Configuration(format!("invalid noise_sigma {noise_sigma}")));
                }
            }
            DataSource::Vision(v) => {
                if v.frames < 2 {
                    return Err(Error::Configuration("vision data needs at least 2 frames".into()));
                }
                if v.window < 3 || v.window % 2 == 0 {
                    return Err(Error::Configuration(format!("window must be odd and at least 3, got {}", v.window)));
                }
            }
            DataSource::File => {}
        }
        let spec = self.graph_spec()?;
        spec.validate()?;
        if let Some(streams) = self.stream_names()? {
            for n in &spec.nodes {
                for c in n.input_columns() {
                    if !streams.contains(&c) {
                        return Err(Error::Configuration(format!(
                            "node `{}` reads `{c}`, which the data source does not provide",
                            n.name
                        )));
                    }
                }
            }
        }
        if let Training::Pairwise { stages, .. } = &self.training {
            for s in stages {
                let known = spec
                    .edges
                    .iter()
                    .any(|e| (e.a == s.a && e.b == s.b) || (e.a == s.b && e.b == s.a));
                if !known {
                    return Err(Error::Configuration(format!("stage references unknown edge {}-{}", s.a, s.b)));
                }
            }
        }
        Ok(())
    }

    /// Generate the configured data. File sources have nothing to generate.
    pub fn generate_data(&self) -> Result<StreamTable> {
        match &self.data {
            DataSource::Synthetic { topology, n, noise_sigma } => {
                generate(&topology.resolve()?, *n, *noise_sigma, self.seed)
            }
            DataSource::Vision(scene) => scene.streams(self.seed),
            DataSource::File => Err(Error::Configuration("data comes from a file; none to generate".into())),
        }
    }

    /// Build and train the graph on `data`. `progress` receives the step and
    /// the mean squared quantization error per node every 1000 steps of
    /// joint training or of each pairwise stage.
    pub fn train(
        &self,
        data: &StreamTable,
        mut progress: impl FnMut(&str, u64, &BTreeMap<String, f64>),
    ) -> Result<RelationGraph> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut graph = RelationGraph::new(&self.graph_spec()?, self.schedules(), self.relax, data, &mut rng)?;
        match &self.training {
            Training::Joint { steps } => {
                graph.train(data, *steps, &mut rng, |k, e| progress("joint", k, e))?;
            }
            Training::Pairwise { stages, fine_tune_steps } => {
                graph.train_pairwise_with(data, stages, &mut rng, |k, step, e| {
                    let s = &stages[k];
                    progress(&format!("{}-{}", s.a, s.b), step, e)
                })?;
                if *fine_tune_steps > 0 {
                    graph.train(data, *fine_tune_steps, &mut rng, |k, e| progress("fine-tune", k, e))?;
                }
            }
        }
        Ok(graph)
    }
}

/// Nodes `i`, `g` (gradient magnitude), `v` and the joint `fg` = (f_par,
/// g_mag), linked i-v, i-g and fg-v.
pub fn vision_graph(n_neurons: usize) -> GraphSpec {
    GraphSpec {
        nodes: vec![
            NodeSpec::scalar("i", n_neurons),
            NodeSpec::vector("g", &["g_mag"], n_neurons),
            NodeSpec::scalar("v", n_neurons),
            NodeSpec::vector("fg", &["f_par", "g_mag"], n_neurons),
        ],
        edges: vec![LinkSpec::new("i", "v"), LinkSpec::new("i", "g"), LinkSpec::new("fg", "v")],
    }
}

/// One row of a relation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub probe: f64,
    pub value: f64,
    pub confidence: f64,
}

/// Infer `to` from `probes` evenly spaced values of `from` across the
/// learned range of `from`.
pub fn relation_sweep(graph: &RelationGraph, from: &str, to: &str, probes: usize) -> Result<Vec<SweepPoint>> {
    let som = &graph.node(from)?.som;
    if som.input_dim() != 1 || graph.node(to)?.som.input_dim() != 1 {
        return Err(Error::Configuration("relation sweeps need scalar nodes".into()));
    }
    if probes < 2 {
        return Err(Error::Parameter("a sweep needs at least 2 probes".into()));
    }
    let (lo, hi) = som.preferred_bounds(0);
    let query = [to.to_string()];
    (0..probes)
        .map(|k| {
            let probe = lo + (hi - lo) * k as f64 / (probes - 1) as f64;
            let mut observed = Sample::new();
            observed.insert(from.to_string(), vec![probe]);
            let r = graph.infer(&observed, &query)?;
            let d = &r.values[to];
            Ok(SweepPoint { probe, value: d.scalar(), confidence: d.confidence })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::synthetic("tree", 500, 1000, 3);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let v = ExperimentConfig::vision(VisionScene::default(), 100, 4);
        assert_eq!(ExperimentConfig::from_json(&v.to_json().unwrap()).unwrap(), v);
    }

    #[test]
    fn minimal_json() {
        let text = r#"{"seed": 9, "data": {"source": "synthetic", "topology": "pair_sqrt", "n": 50},
                      "training": {"mode": "joint", "steps": 10}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.n_neurons, DEFAULT_NEURONS);
        assert_eq!(cfg.relax, RelaxParams::default());
        assert_eq!(cfg.graph_spec().unwrap().nodes.len(), 2);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = r#"{"data": {"source": "synthetic", "topology": "pair_sqrt", "n": 50},
                      "training": {"mode": "joint", "steps": 10}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn invalid_recipes() {
        let mut cfg = ExperimentConfig::synthetic("nope", 10, 10, 1);
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::synthetic("pair_square", 0, 10, 1);
        assert!(cfg.validate().is_err());
        cfg = ExperimentConfig::synthetic("pair_square", 10, 10, 1);
        cfg.training = Training::Pairwise { stages: vec![Stage::new("x", "q", 5)], fine_tune_steps: 0 };
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
        cfg = ExperimentConfig::synthetic("pair_square", 10, 10, 1);
        cfg.graph = Some(GraphSpec::scalar(&["x", "z"], 5, &[("x", "z")]));
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
        cfg = ExperimentConfig::synthetic("pair_square", 10, 10, 1);
        cfg.data = DataSource::File;
        assert!(cfg.validate().is_err());
        cfg.graph = Some(GraphSpec::scalar(&["x", "z"], 5, &[("x", "z")]));
        cfg.validate().unwrap();
        cfg.relax.lambda = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = ExperimentConfig::synthetic("pair_square", 300, 300, 21);
        let data = cfg.generate_data().unwrap();
        let a = cfg.train(&data, |_, _, _| {}).unwrap();
        let b = cfg.train(&data, |_, _, _| {}).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 22;
        assert_ne!(other.train(&data, |_, _, _| {}).unwrap(), a);
    }

    #[test]
    fn progress_every_thousand_steps() {
        let cfg = ExperimentConfig::synthetic("pair_square", 100, 2500, 5);
        let data = cfg.generate_data().unwrap();
        let mut seen = Vec::new();
        cfg.train(&data, |_, k, e| {
            assert_eq!(e.len(), 2);
            seen.push(k)
        })
        .unwrap();
        assert_eq!(seen, [1000, 2000, 2500]);
    }

    #[test]
    fn zero_steps_gives_an_initialized_graph() {
        let cfg = ExperimentConfig::synthetic("chain", 100, 0, 5);
        let g = cfg.train(&cfg.generate_data().unwrap(), |_, _, _| {}).unwrap();
        assert_eq!(g.step_count(), 0);
        assert!(g.edges().iter().all(|e| e.link.frobenius_norm() == 0.0));
    }

    #[test]
    fn vision_rows_and_graph() {
        let scene = VisionScene { size: [24, 24], frames: 3, pixels_per_pair: None, ..VisionScene::default() };
        let cfg = ExperimentConfig::vision(scene, 50, 1);
        let data = cfg.generate_data().unwrap();
        assert_eq!(data.names(), SCENE_COLUMNS);
        assert!(!data.is_empty());
        let g = cfg.train(&data, |_, _, _| {}).unwrap();
        assert_eq!(g.node("fg").unwrap().som.input_dim(), 2);
        assert!(g.edges().iter().all(|e| e.link.step_count() == 50));
    }

    #[test]
    fn sweep_covers_the_learned_range() {
        let cfg = ExperimentConfig::synthetic("pair_square", 1000, 3000, 8);
        let g = cfg.train(&cfg.generate_data().unwrap(), |_, _, _| {}).unwrap();
        let sweep = relation_sweep(&g, "x", "y", 11).unwrap();
        let (lo, hi) = g.node("x").unwrap().som.preferred_bounds(0);
        assert_eq!(sweep.len(), 11);
        assert_eq!(sweep[0].probe, lo);
        assert!((sweep[10].probe - hi).abs() < 1e-12);
        assert!(relation_sweep(&g, "x", "q", 11).is_err());
        assert!(relation_sweep(&g, "x", "y", 1).is_err());
    }
}
