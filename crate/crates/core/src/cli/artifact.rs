//! Stage directories, stamped JSON and CSV files, and graph loading.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliResult, Failure, RunConfig};
use crate::graph::io::{load_graph, write_edges, write_nodes};
use crate::graph::PaymentGraph;

pub(crate) const GRAPHS: &str = "graphs";
const MANIFEST: &str = "manifest.json";

/// SHA-256 of the configuration's JSON form with the output directory left
/// out, so the same run aimed at two directories hashes identically.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("out");
    }
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// Envelope of every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Config hash of the graphs this artifact was computed from.
    pub upstream: Option<String>,
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub label: String,
    /// Paths relative to the graphs directory.
    pub edges: String,
    pub nodes: String,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphsManifest {
    /// `build` or `synth`.
    pub source: String,
    pub windows: Vec<WindowEntry>,
}

pub(crate) struct Run {
    pub cfg: RunConfig,
    pub hash: String,
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

impl Run {
    pub fn new(cfg: RunConfig) -> Self {
        let hash = config_hash(&cfg);
        Run { cfg, hash }
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.cfg.out.join(stage)
    }

    /// Empties (or creates) a stage directory before it is rewritten.
    pub fn fresh_stage(&self, stage: &str) -> CliResult<PathBuf> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        Ok(dir)
    }

    pub fn stamp(&self, stage: &str) -> String {
        format!("# paynet stage={stage} config_hash={} seed={}", self.hash, self.cfg.seed)
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, stage: &str, upstream: Option<&str>, data: T) -> CliResult<()> {
        let a = Artifact {
            stage: stage.to_string(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            upstream: upstream.map(str::to_string),
            data,
        };
        let mut text = serde_json::to_string_pretty(&a).map_err(|e| Failure::Data(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| io_failure(path, e))
    }

    /// CSV with a leading `#` stamp line, which gnuplot and `csv` readers with
    /// comment support skip.
    pub fn write_csv<I>(&self, path: &Path, stage: &str, header: &[&str], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", self.stamp(stage)).map_err(|e| io_failure(path, e))?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Failure::Data(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_failure(path, e))
    }

    pub fn save_graph(&self, g: &PaymentGraph, dir: &Path, label: &str) -> CliResult<WindowEntry> {
        let edges = format!("{label}.edges.csv");
        let nodes = format!("{label}.nodes.csv");
        for (name, is_edges) in [(&edges, true), (&nodes, false)] {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
            let mut out = BufWriter::new(file);
            writeln!(out, "{}", self.stamp(GRAPHS)).map_err(|e| io_failure(&path, e))?;
            if is_edges {
                write_edges(g, out)?;
            } else {
                write_nodes(g, out)?;
            }
        }
        Ok(WindowEntry { label: label.to_string(), edges, nodes, n: g.n(), m: g.m() })
    }

    /// Reads the graph manifest, failing with a dependency error when no
    /// graph-producing stage has run.
    pub fn graphs_manifest(&self) -> CliResult<Artifact<GraphsManifest>> {
        let path = self.stage_dir(GRAPHS).join(MANIFEST);
        if !path.exists() {
            return Err(Failure::missing("build", "run `paynet build` or `paynet synth` first"));
        }
        read_json(&path)
    }

    /// Every window graph, restricted to the configured subgraph, together
    /// with the config hash of the stage that produced them.
    pub fn load_graphs(&self) -> CliResult<(String, Vec<(String, PaymentGraph)>)> {
        let manifest = self.graphs_manifest()?;
        let dir = self.stage_dir(GRAPHS);
        let mut out = Vec::with_capacity(manifest.data.windows.len());
        for w in &manifest.data.windows {
            let g = load_graph(&dir.join(&w.edges), &dir.join(&w.nodes))?;
            let sub = self.cfg.subgraph;
            out.push((w.label.clone(), g.subgraph(|f| sub.keeps(f))));
        }
        Ok((manifest.config_hash, out))
    }

    pub fn write_manifest(&self, dir: &Path, manifest: GraphsManifest) -> CliResult<()> {
        self.write_json(&dir.join(MANIFEST), GRAPHS, None, manifest)
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Reader for stamped CSV files.
pub(crate) fn csv_reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Shortest round-trip formatting; NaN becomes an empty cell.
pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub(crate) fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}
