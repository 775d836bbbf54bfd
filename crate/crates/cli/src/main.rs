//! `cuenet`: generate streams, train relation graphs, query them and export
//! plot-ready CSV.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};

use cuenet::experiment::{relation_sweep, DataSource};
use cuenet::io::{load_streams, write_numeric, write_streams, ModelFile};
use cuenet::vision::{extract_streams, scene_table, Frame, FrameSequence, Sampling};
use cuenet::{ExperimentConfig, Inference, RelationGraph, Sample, StreamTable};

#[derive(Parser)]
#[command(name = "cuenet", version, about = "Learn relations among co-occurring sensory streams")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model file (JSON), written by `train` and read by the query commands.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic or visual streams as CSV.
    Gen {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a graph and write the model file.
    Train {
        /// Stream CSV; replaces the configured data source.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Infer unobserved streams from observed ones.
    Infer {
        /// Observations as `name=value` (`name=v1,v2` for vector nodes).
        #[arg(required = true)]
        observed: Vec<String>,
        /// Streams to infer; every unobserved node by default.
        #[arg(short, long, value_delimiter = ',')]
        query: Vec<String>,
    },
    /// Clean a full set of noisy observations.
    Denoise {
        #[arg(required = true)]
        observed: Vec<String>,
    },
    /// Export learned state as CSV.
    Export {
        #[command(subcommand)]
        what: Export,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Measure intensity, gradient, temporal derivative and flow streams from frames.
    VisionExtract {
        /// PGM (P5) frames in temporal order; the configured scene otherwise.
        #[arg(long, num_args = 1..)]
        frames: Vec<PathBuf>,
        /// Lucas-Kanade window for PGM input.
        #[arg(long, default_value_t = 5)]
        window: usize,
        /// Also write the rendered scene frames here as PGM.
        #[arg(long)]
        save_frames: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Export {
    /// Link matrix of the edge between two nodes, rows indexed by the first.
    Wcross { a: String, b: String },
    /// Per-neuron preferred value and tuning width.
    Tuning { node: String },
    /// Inferred `to` across the learned range of `from`.
    Relation {
        from: String,
        to: String,
        #[arg(long, default_value_t = 200)]
        probes: usize,
    },
}

/// Mistakes on the command line, as opposed to problems with the data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen { output } => {
            let cfg = config(&cli)?;
            let table = cfg.generate_data()?;
            with_output(output.as_deref(), |w| Ok(write_streams(w, &table)?))
        }
        Command::Train { data } => train(&cli, data.as_deref()),
        Command::Infer { observed, query } => {
            let graph = model(&cli)?;
            let observed = parse_observed(&graph, observed)?;
            let query = if query.is_empty() {
                graph.node_names().into_iter().filter(|n| !observed.contains_key(n)).collect()
            } else {
                for q in query {
                    graph.node(q).map_err(|_| usage(format!("unknown stream `{q}`")))?;
                    if observed.contains_key(q) {
                        return Err(usage(format!("`{q}` is both observed and queried")));
                    }
                }
                query.clone()
            };
            let result = graph.infer(&observed, &query)?;
            print_inference(&graph, &result)
        }
        Command::Denoise { observed } => {
            let graph = model(&cli)?;
            let observed = parse_observed(&graph, observed)?;
            for n in graph.node_names() {
                if !observed.contains_key(&n) {
                    return Err(usage(format!("denoising needs every stream; `{n}` is missing")));
                }
            }
            let result = graph.denoise(&observed)?;
            print_inference(&graph, &result)
        }
        Command::Export { what, output } => {
            let graph = model(&cli)?;
            export(&graph, what, output.as_deref())
        }
        Command::VisionExtract { frames, window, save_frames, output } => {
            vision_extract(&cli, frames, *window, save_frames.as_deref(), output.as_deref())
        }
    }
}

fn config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| usage("this command needs --config"))?;
    let mut cfg =
        ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn model(cli: &Cli) -> anyhow::Result<RelationGraph> {
    let path = cli.model.as_ref().ok_or_else(|| usage("this command needs --model"))?;
    let file = ModelFile::load(path).with_context(|| format!("reading model {}", path.display()))?;
    Ok(file.graph)
}

fn train(cli: &Cli, data: Option<&Path>) -> anyhow::Result<()> {
    let cfg = config(cli)?;
    let out = cli.model.as_ref().ok_or_else(|| usage("train needs --model for the output file"))?;
    let table = match data {
        Some(path) => load_streams(path).with_context(|| format!("reading {}", path.display()))?,
        None if matches!(cfg.data, DataSource::File) => {
            return Err(usage("the config reads streams from a file; pass --data"))
        }
        None => cfg.generate_data()?,
    };
    let stdout = io::stdout();
    let mut log = stdout.lock();
    let graph = cfg.train(&table, |label, step, errs| {
        let cols: Vec<String> = errs.iter().map(|(n, e)| format!("{n}={e:.6e}")).collect();
        let _ = writeln!(log, "[{label}] step {step}: {}", cols.join(" "));
    })?;
    ModelFile::new(graph, Some(cfg)).save(out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn parse_observed(graph: &RelationGraph, args: &[String]) -> anyhow::Result<Sample> {
    let mut sample = Sample::new();
    for arg in args {
        let (name, values) =
            arg.split_once('=').ok_or_else(|| usage(format!("expected name=value, got `{arg}`")))?;
        let node = graph.node(name).map_err(|_| usage(format!("unknown stream `{name}`")))?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|_| usage(format!("cannot parse the value in `{arg}`")))?;
        if values.len() != node.som.input_dim() {
            return Err(usage(format!(
                "`{name}` takes {} value(s), got {}",
                node.som.input_dim(),
                values.len()
            )));
        }
        if sample.insert(name.to_string(), values).is_some() {
            return Err(usage(format!("`{name}` given twice")));
        }
    }
    Ok(sample)
}

fn print_inference(graph: &RelationGraph, result: &Inference) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "name,value,confidence")?;
    for (name, d) in &result.values {
        let node = graph.node(name)?;
        if d.value.len() == 1 {
            writeln!(out, "{name},{},{}", d.value[0], d.confidence)?;
        } else {
            for (col, v) in node.columns.iter().zip(&d.value) {
                writeln!(out, "{name}.{col},{v},{}", d.confidence)?;
            }
        }
    }
    if !result.converged {
        eprintln!("warning: relaxation stopped after {} iterations without converging", result.iterations);
    }
    Ok(())
}

fn export(graph: &RelationGraph, what: &Export, output: Option<&Path>) -> anyhow::Result<()> {
    let unknown = |e: cuenet::Error| usage(e.to_string());
    match what {
        Export::Wcross { a, b } => {
            let edge = graph.edge(a, b).map_err(unknown)?;
            let link = &edge.link;
            let rows: Vec<Vec<f64>> = if &edge.a == a {
                link.rows().map(|r| r.to_vec()).collect()
            } else {
                (0..link.n_q()).map(|j| (0..link.n_p()).map(|i| link.weight(i, j)).collect()).collect()
            };
            with_output(output, |w| Ok(write_numeric(w, None, &rows)?))
        }
        Export::Tuning { node } => {
            let node = graph.node(node).map_err(unknown)?;
            let som = &node.som;
            let mut header = vec!["index".to_string()];
            if som.input_dim() == 1 {
                header.push("preferred".into());
            } else {
                header.extend(node.columns.iter().cloned());
            }
            header.push("xi".into());
            let rows: Vec<Vec<f64>> = (0..som.n_neurons())
                .map(|i| {
                    let mut r = vec![i as f64];
                    r.extend_from_slice(som.preferred(i));
                    r.push(som.tuning_var()[i].sqrt());
                    r
                })
                .collect();
            with_output(output, |w| Ok(write_numeric(w, Some(&header), &rows)?))
        }
        Export::Relation { from, to, probes } => {
            if *probes < 2 {
                return Err(usage("--probes must be at least 2"));
            }
            for n in [from, to] {
                graph.node(n).map_err(unknown)?;
            }
            let sweep = relation_sweep(graph, from, to, *probes)?;
            let header = [from.clone(), to.clone(), "confidence".to_string()];
            let rows: Vec<Vec<f64>> = sweep.iter().map(|p| vec![p.probe, p.value, p.confidence]).collect();
            with_output(output, |w| Ok(write_numeric(w, Some(&header), &rows)?))
        }
    }
}

fn vision_extract(
    cli: &Cli,
    frames: &[PathBuf],
    window: usize,
    save_frames: Option<&Path>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let table: StreamTable = if frames.is_empty() {
        let cfg = config(cli)?;
        let DataSource::Vision(scene) = &cfg.data else {
            return Err(usage("vision-extract needs --frames or a config with a vision data source"));
        };
        if let Some(dir) = save_frames {
            let seq = cuenet::vision::synth_sequence(
                scene.sequence,
                scene.velocity,
                scene.frames,
                (scene.size[0], scene.size[1]),
                scene.wavelength,
            )?;
            std::fs::create_dir_all(dir)?;
            for (t, f) in seq.frames.iter().enumerate() {
                f.save_pgm(&dir.join(format!("frame_{t:04}.pgm")))?;
            }
        }
        scene.streams(cfg.seed)?
    } else {
        if save_frames.is_some() {
            return Err(usage("--save-frames only applies to rendered scenes"));
        }
        if frames.len() < 2 {
            return Err(usage("--frames needs at least two files"));
        }
        let loaded = frames
            .iter()
            .map(|p| Frame::load_pgm(p).with_context(|| format!("reading {}", p.display())))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let seq = FrameSequence::from_frames(loaded)?;
        if window < 3 || window % 2 == 0 {
            return Err(usage(format!("--window must be odd and at least 3, got {window}")));
        }
        scene_table(&extract_streams(&seq, Sampling::AllPixels, window)?)
    };
    if table.is_empty() {
        bail!("no textured interior pixels to measure");
    }
    with_output(output, |w| Ok(write_streams(w, &table)?))
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| anyhow!("writing {}: {e}", p.display()))
        }
        None => {
            let mut w = io::stdout().lock();
            f(&mut w)?;
            Ok(w.flush()?)
        }
    }
}
