//! Graph-producing stages and the per-window analyses.

use std::collections::BTreeMap;
use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifact::{num, Run, GRAPHS};
use super::summary::{summarize, SummaryRow};
use super::{CliResult, Failure, GraphsManifest};
use crate::graph::{bow_tie, components, Connectivity, PaymentGraph};
use crate::ingest::{activity_summary, build_network, parse_firms, parse_transactions, ActivitySeries, BuildDiagnostics, RowError, TimeWindow};
use crate::metrics::{
    assortativity, ccdf, degree_class_assortativity, mixing_matrix, powerlaw_fit, rating_labels, size_proxy_tertiles,
    Assortativity, ClassAttribute, LogBins, PowerLawFit,
};
use crate::partition::{group_risk_profiles, louvain_best, minimize_agony, AgonyMode, GroupProfiles, ProfileSummary, RankedPartition, EXACT_MAX_N};
use crate::rating::{Rating, Risk};
use crate::riskstats::{
    compare_excess, distance_conditional_ratings, excess_volume_samples, fit_cumulative_logit, rating_given_degree,
    CumulativeLogitModel, DegreeRow, DistanceTable, ExcessComparison, Flow,
};
use crate::synth::generate;

/// A per-window result that may be undefined on that window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Failed(String),
}

impl<T> From<crate::Result<T>> for Outcome<T> {
    fn from(r: crate::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }

    pub fn error(&self) -> String {
        match self {
            Outcome::Ok(_) => String::new(),
            Outcome::Failed(e) => e.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_rejected: usize,
    pub rejected: Vec<RowError>,
    pub self_loops_dropped: u64,
    pub windows: Vec<BuildDiagnostics>,
    pub activity: ActivitySeries,
}

fn write_summary(run: &Run, dir: &std::path::Path, graphs: &[(String, PaymentGraph)]) -> CliResult<()> {
    let rows = summarize(graphs, run.cfg.diameter);
    run.write_csv(&dir.join("summary.csv"), GRAPHS, &SummaryRow::HEADER, rows.iter().map(SummaryRow::cells))
}

pub(crate) fn build(run: &Run) -> CliResult<()> {
    let path = run.cfg.transactions.as_ref().ok_or_else(|| Failure::Config("build needs a transactions file".into()))?;
    let open = |p: &std::path::Path| fs::File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())));
    let parsed = parse_transactions(std::io::BufReader::new(open(path)?))?;
    let firms = match &run.cfg.firms {
        Some(p) => parse_firms(std::io::BufReader::new(open(p)?))?,
        None => Vec::new(),
    };
    if parsed.records.is_empty() {
        return Err(Failure::Data(format!("{}: no valid transactions", path.display())));
    }
    let windows = TimeWindow::spanning(&parsed.records, run.cfg.window);
    let built = windows
        .par_iter()
        .map(|&w| build_network(&parsed.records, &firms, w).map(|(g, d)| (w.to_string(), g, d)))
        .collect::<crate::Result<Vec<_>>>()?;

    let dir = run.fresh_stage(GRAPHS)?;
    let mut entries = Vec::with_capacity(built.len());
    for (label, g, _) in &built {
        entries.push(run.save_graph(g, &dir, label)?);
    }
    let diagnostics: Vec<BuildDiagnostics> = built.iter().map(|b| b.2.clone()).collect();
    let report = IngestReport {
        rows_read: parsed.rows_read,
        rows_rejected: parsed.rejected.len(),
        rejected: parsed.rejected.clone(),
        self_loops_dropped: diagnostics.iter().map(|d| d.self_loops_dropped).sum(),
        windows: diagnostics,
        activity: activity_summary(&parsed.records, run.cfg.window),
    };
    run.write_json(&dir.join("diagnostics.json"), GRAPHS, None, report)?;
    let sub = run.cfg.subgraph;
    let graphs: Vec<(String, PaymentGraph)> = built.into_iter().map(|(l, g, _)| (l, g.subgraph(|f| sub.keeps(f)))).collect();
    write_summary(run, &dir, &graphs)?;
    run.write_manifest(&dir, GraphsManifest { source: "build".into(), windows: entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: crate::synth::SynthKind,
    pub spec: crate::synth::SynthSpec,
    pub planted_agony: Option<u64>,
    pub mixing_achieved: Option<Vec<Vec<f64>>>,
    pub mixing_max_abs_error: Option<f64>,
}

pub const SYNTH_LABEL: &str = "synthetic";

pub(crate) fn synth(run: &Run) -> CliResult<()> {
    let mut spec = run
        .cfg
        .synth
        .clone()
        .ok_or_else(|| Failure::Config("synth needs a spec (`--spec FILE` or a `synth` config section)".into()))?;
    // the run seed is the single source of randomness
    spec.seed = run.cfg.seed;
    let gen = generate(&spec)?;
    let dir = run.fresh_stage(GRAPHS)?;
    let entry = run.save_graph(&gen.graph, &dir, SYNTH_LABEL)?;
    let g = &gen.graph;
    let rows = (0..g.n()).map(|i| {
        vec![
            g.node(i).id.clone(),
            super::artifact::opt(gen.modules.as_ref().map(|m| m[i])),
            super::artifact::opt(gen.ranks.as_ref().map(|r| r[i])),
            gen.classes.as_ref().map_or_else(String::new, |c| c[i].as_str().to_string()),
        ]
    });
    run.write_csv(&dir.join("ground_truth.csv"), GRAPHS, &["id", "module", "rank", "class"], rows)?;
    let truth = GroundTruth {
        kind: spec.kind,
        planted_agony: gen.planted_agony,
        mixing_achieved: gen.mixing.as_ref().map(|p| p.achieved.iter().map(|r| r.to_vec()).collect()),
        mixing_max_abs_error: gen.mixing.as_ref().map(|p| p.max_abs_error),
        spec,
    };
    run.write_json(&dir.join("ground_truth.json"), GRAPHS, None, truth)?;
    let sub = run.cfg.subgraph;
    write_summary(run, &dir, &[(SYNTH_LABEL.to_string(), gen.graph.subgraph(|f| sub.keeps(f)))])?;
    run.write_manifest(&dir, GraphsManifest { source: "synth".into(), windows: vec![entry] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowTieSizes {
    pub scc: usize,
    pub in_comp: usize,
    pub out_comp: usize,
    pub tendrils_other: usize,
    pub outside: usize,
    pub payers_only: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window: String,
    pub n: usize,
    pub m: usize,
    /// Degree fits are discrete, strength fits continuous.
    pub fits: BTreeMap<String, Outcome<PowerLawFit>>,
    pub assortativity: BTreeMap<String, Outcome<Assortativity>>,
    pub weak_components: usize,
    pub largest_weak: usize,
    pub strong_components: usize,
    pub largest_strong: usize,
    pub bow_tie: BowTieSizes,
}

pub const METRICS: &str = "metrics";

fn quantities(g: &PaymentGraph) -> [(&'static str, Vec<f64>, bool); 4] {
    let n = g.n();
    [
        ("in_degree", (0..n).map(|i| g.in_degree(i) as f64).filter(|&x| x > 0.0).collect(), true),
        ("out_degree", (0..n).map(|i| g.out_degree(i) as f64).filter(|&x| x > 0.0).collect(), true),
        ("in_strength", (0..n).map(|i| g.in_strength(i)).filter(|&x| x > 0.0).collect(), false),
        ("out_strength", (0..n).map(|i| g.out_strength(i)).filter(|&x| x > 0.0).collect(), false),
    ]
}

fn window_metrics(label: &str, g: &PaymentGraph) -> (WindowMetrics, Vec<Vec<String>>) {
    let mut fits = BTreeMap::new();
    let mut ccdf_rows = Vec::new();
    for (name, samples, discrete) in quantities(g) {
        fits.insert(name.to_string(), powerlaw_fit(&samples, discrete).into());
        ccdf_rows.extend(ccdf(&samples).into_iter().map(|(x, p)| vec![name.to_string(), num(x), num(p)]));
    }
    let labels = rating_labels(g);
    let rated = g.subgraph(|f| f.rating.is_known());
    let rated_labels = rating_labels(&rated);
    let mut assort: BTreeMap<String, Outcome<Assortativity>> = BTreeMap::new();
    for weighted in [false, true] {
        let suffix = if weighted { "_weighted" } else { "" };
        assort.insert(format!("rating{suffix}"), mixing_matrix(g, &labels, 4, weighted).and_then(|m| assortativity(&m)).into());
        assort.insert(
            format!("rating_rated_only{suffix}"),
            mixing_matrix(&rated, &rated_labels, 3, weighted).and_then(|m| assortativity(&m)).into(),
        );
    }
    assort.insert("degree".into(), degree_class_assortativity(g, ClassAttribute::Degree, LogBins::default()).into());
    assort.insert("strength".into(), degree_class_assortativity(g, ClassAttribute::Strength, LogBins::default()).into());
    let weak = components(g, Connectivity::Weak);
    let strong = components(g, Connectivity::Strong);
    let bt = bow_tie(g);
    let m = WindowMetrics {
        window: label.to_string(),
        n: g.n(),
        m: g.m(),
        fits,
        assortativity: assort,
        weak_components: weak.count(),
        largest_weak: weak.sizes.first().copied().unwrap_or(0),
        strong_components: strong.count(),
        largest_strong: strong.sizes.first().copied().unwrap_or(0),
        bow_tie: BowTieSizes {
            scc: bt.scc.len(),
            in_comp: bt.in_comp.len(),
            out_comp: bt.out_comp.len(),
            tendrils_other: bt.tendrils_other.len(),
            outside: bt.outside.len(),
            payers_only: bt.payers_only.len(),
            degenerate: bt.degenerate,
        },
    };
    (m, ccdf_rows)
}

pub(crate) fn metrics(run: &Run) -> CliResult<()> {
    let (upstream, graphs) = run.load_graphs()?;
    let results: Vec<_> = graphs.par_iter().map(|(l, g)| window_metrics(l, g)).collect();
    let dir = run.fresh_stage(METRICS)?;
    for (m, rows) in results {
        run.write_csv(&dir.join(format!("{}.ccdf.csv", m.window)), METRICS, &["quantity", "x", "ccdf"], rows)?;
        run.write_json(&dir.join(format!("{}.json", m.window)), METRICS, Some(&upstream), m)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitEntry {
    pub flow: Flow,
    pub predictors: Vec<String>,
    pub model: Outcome<CumulativeLogitModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub label: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRisk {
    pub window: String,
    pub degree_in: Outcome<Vec<DegreeRow>>,
    pub degree_out: Outcome<Vec<DegreeRow>>,
    pub logit: Vec<LogitEntry>,
    /// One table per source rating L, M, H.
    pub distance: Vec<Outcome<DistanceTable>>,
    pub excess_sizes: Vec<SampleSize>,
    pub excess: Outcome<Vec<ExcessComparison>>,
}

pub const RISK: &str = "risk";

fn window_risk(run: &Run, label: &str, g: &PaymentGraph) -> WindowRisk {
    let tertile = size_proxy_tertiles(g);
    let rated: Vec<usize> = (0..g.n()).filter(|&i| g.node(i).rating.is_known()).collect();
    let y: Vec<Risk> = rated.iter().filter_map(|&i| g.node(i).rating.risk()).collect();
    let mut logit = Vec::new();
    for flow in [Flow::In, Flow::Out] {
        let degree = |i: usize| match flow {
            Flow::In => g.in_degree(i) as f64,
            Flow::Out => g.out_degree(i) as f64,
        };
        let one: Vec<Vec<f64>> = rated.iter().map(|&i| vec![degree(i)]).collect();
        let two: Vec<Vec<f64>> = rated.iter().map(|&i| vec![degree(i), tertile[i] as f64]).collect();
        logit.push(LogitEntry { flow, predictors: vec!["degree".into()], model: fit_cumulative_logit(&one, &y).into() });
        logit.push(LogitEntry {
            flow,
            predictors: vec!["degree".into(), "size_tertile".into()],
            model: fit_cumulative_logit(&two, &y).into(),
        });
    }
    let distance = Risk::ALL
        .iter()
        .map(|&r| distance_conditional_ratings(g, r, run.cfg.k_max, run.cfg.p_s).into())
        .collect();
    let samples = excess_volume_samples(&g.subgraph(|f| f.rating.is_known()));
    let (excess_sizes, excess) = match samples {
        Ok(s) => (s.iter().map(|x| SampleSize { label: x.label(), n: x.values.len() }).collect(), compare_excess(&s).into()),
        Err(e) => (Vec::new(), Outcome::Failed(e.to_string())),
    };
    WindowRisk {
        window: label.to_string(),
        degree_in: rating_given_degree(g, Flow::In).into(),
        degree_out: rating_given_degree(g, Flow::Out).into(),
        logit,
        distance,
        excess_sizes,
        excess,
    }
}

pub(crate) fn risk(run: &Run) -> CliResult<()> {
    let (upstream, graphs) = run.load_graphs()?;
    let results: Vec<WindowRisk> = graphs.par_iter().map(|(l, g)| window_risk(run, l, g)).collect();
    let dir = run.fresh_stage(RISK)?;
    for r in results {
        let mut rows = Vec::new();
        for (flow, table) in [(Flow::In, &r.degree_in), (Flow::Out, &r.degree_out)] {
            for d in table.ok().into_iter().flatten() {
                let mut row = vec![flow.to_string(), d.degree.to_string()];
                row.extend(d.counts.iter().map(|c| c.to_string()));
                row.extend(d.shares.iter().map(|&s| num(s)));
                rows.push(row);
            }
        }
        let header = ["flow", "degree", "n_l", "n_m", "n_h", "share_l", "share_m", "share_h"];
        run.write_csv(&dir.join(format!("{}.degree.csv", r.window)), RISK, &header, rows)?;
        run.write_json(&dir.join(format!("{}.json", r.window)), RISK, Some(&upstream), r)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n_groups: usize,
    /// Modularity for modules, hierarchy `h` for the ranking.
    pub score: f64,
    pub levels: usize,
    pub agony: Option<u64>,
    pub exact: bool,
    pub group_sizes: Vec<usize>,
    pub summary: ProfileSummary,
    pub profiles: GroupProfiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPartition {
    pub window: String,
    pub modules: Outcome<PartitionReport>,
    pub hierarchy: Outcome<PartitionReport>,
}

pub const PARTITION: &str = "partition";

pub const ENRICHMENT_HEADER: [&str; 12] =
    ["partition", "group", "rating", "k", "n", "big_k", "big_n", "p_value", "direction", "tie", "threshold", "significant"];

fn profile(p: RankedPartition, ratings: &[Rating], run: &Run) -> crate::Result<(PartitionReport, Vec<usize>)> {
    let profiles = group_risk_profiles(&p, ratings, run.cfg.min_rated, run.cfg.p_s)?;
    let report = PartitionReport {
        n_groups: p.n_groups,
        score: p.score,
        levels: p.levels,
        agony: p.agony,
        exact: p.exact,
        group_sizes: p.group_sizes(),
        summary: profiles.summary(),
        profiles,
    };
    Ok((report, p.assignment))
}

type Assigned = Outcome<(PartitionReport, Vec<usize>)>;

fn window_partition(run: &Run, g: &PaymentGraph) -> (Assigned, Assigned) {
    let ratings: Vec<Rating> = g.nodes().iter().map(|f| f.rating).collect();
    let modules = louvain_best(g, &run.cfg.louvain_seeds()).and_then(|p| profile(p, &ratings, run));
    let mode = if g.n() <= EXACT_MAX_N { AgonyMode::ExactSmall } else { AgonyMode::Heuristic };
    let hierarchy = minimize_agony(g, mode).and_then(|p| profile(p, &ratings, run));
    (modules.into(), hierarchy.into())
}

pub(crate) fn enrichment_rows(kind: &str, report: &PartitionReport) -> Vec<Vec<String>> {
    report
        .profiles
        .results
        .iter()
        .map(|r| {
            let t = &r.test;
            vec![
                kind.to_string(),
                r.group.to_string(),
                r.rating.as_str().to_string(),
                t.k.to_string(),
                t.n.to_string(),
                t.big_k.to_string(),
                t.big_n.to_string(),
                num(t.p_value),
                t.direction.as_str().to_string(),
                t.tie.to_string(),
                num(t.threshold),
                t.significant.to_string(),
            ]
        })
        .collect()
}

pub(crate) fn partition(run: &Run) -> CliResult<()> {
    let (upstream, graphs) = run.load_graphs()?;
    let results: Vec<_> = graphs.par_iter().map(|(_, g)| window_partition(run, g)).collect();
    let dir = run.fresh_stage(PARTITION)?;
    for ((label, g), (modules, hierarchy)) in graphs.iter().zip(results) {
        let column = |o: &Assigned, i: usize| o.ok().map_or_else(String::new, |(_, a)| a[i].to_string());
        let rows = (0..g.n()).map(|i| vec![g.node(i).id.clone(), column(&modules, i), column(&hierarchy, i)]);
        run.write_csv(&dir.join(format!("{label}.assignment.csv")), PARTITION, &["id", "module", "rank"], rows)?;
        let mut rows = Vec::new();
        for (kind, o) in [("modules", &modules), ("hierarchy", &hierarchy)] {
            if let Some((report, _)) = o.ok() {
                rows.extend(enrichment_rows(kind, report));
            }
        }
        run.write_csv(&dir.join(format!("{label}.enrichment.csv")), PARTITION, &ENRICHMENT_HEADER, rows)?;
        let strip = |o: Assigned| match o {
            Outcome::Ok((r, _)) => Outcome::Ok(r),
            Outcome::Failed(e) => Outcome::Failed(e),
        };
        let report = WindowPartition { window: label.clone(), modules: strip(modules), hierarchy: strip(hierarchy) };
        run.write_json(&dir.join(format!("{label}.json")), PARTITION, Some(&upstream), report)?;
    }
    Ok(())
}
