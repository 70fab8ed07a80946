//! Flattens stage JSON into CSV tables for plotting and inspection.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::artifact::{csv_reader, num, opt, read_json, Artifact, Run, GRAPHS};
use super::classify::{Evaluation, CLASSIFY};
use super::stages::{enrichment_rows, WindowMetrics, WindowPartition, WindowRisk, ENRICHMENT_HEADER, METRICS, PARTITION, RISK};
use super::summary::SummaryRow;
use super::{CliResult, Failure};

pub const REPORT: &str = "report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub stages: Vec<String>,
    pub files: Vec<String>,
}

/// Window JSON files of a stage, sorted by name; `None` when the stage never ran.
fn stage_files(run: &Run, stage: &str) -> CliResult<Option<Vec<PathBuf>>> {
    let dir = run.stage_dir(stage);
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(Some(files))
}

fn load<T: DeserializeOwned>(run: &Run, stage: &str, upstream: &str) -> CliResult<Option<Vec<T>>> {
    let Some(files) = stage_files(run, stage)? else { return Ok(None) };
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let a: Artifact<T> = read_json(&f)?;
        if a.upstream.as_deref() != Some(upstream) {
            return Err(Failure::missing(stage, format!("{} predates the current graphs; rerun `paynet {stage}`", f.display())));
        }
        out.push(a.data);
    }
    Ok(Some(out))
}

struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn metrics_tables(all: &[WindowMetrics]) -> Vec<Table> {
    let mut fits = Vec::new();
    let mut assort = Vec::new();
    let mut comps = Vec::new();
    for w in all {
        for (q, f) in &w.fits {
            let mut row = vec![w.window.clone(), q.clone()];
            match f.ok() {
                Some(f) => row.extend([num(f.alpha), num(f.xmin), num(f.ks), f.n_tail.to_string(), num(f.tail_fraction), f.discrete.to_string()]),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            row.push(f.error());
            fits.push(row);
        }
        for (a, r) in &w.assortativity {
            let (v, lo) = r.ok().map_or((String::new(), String::new()), |r| (num(r.r), num(r.r_min)));
            assort.push(vec![w.window.clone(), a.clone(), v, lo, r.error()]);
        }
        let b = &w.bow_tie;
        comps.push(
            [
                w.window.clone(),
                w.n.to_string(),
                w.m.to_string(),
                w.weak_components.to_string(),
                w.largest_weak.to_string(),
                w.strong_components.to_string(),
                w.largest_strong.to_string(),
                b.scc.to_string(),
                b.in_comp.to_string(),
                b.out_comp.to_string(),
                b.tendrils_other.to_string(),
                b.outside.to_string(),
                b.payers_only.to_string(),
                b.degenerate.to_string(),
            ]
            .to_vec(),
        );
    }
    vec![
        Table {
            name: "fits",
            header: vec!["window", "quantity", "alpha", "xmin", "ks", "n_tail", "tail_fraction", "discrete", "error"],
            rows: fits,
        },
        Table { name: "assortativity", header: vec!["window", "attribute", "r", "r_min", "error"], rows: assort },
        Table {
            name: "components",
            header: vec![
                "window",
                "n",
                "m",
                "weak_components",
                "largest_weak",
                "strong_components",
                "largest_strong",
                "scc",
                "in",
                "out",
                "tendrils_other",
                "outside",
                "payers_only",
                "degenerate",
            ],
            rows: comps,
        },
    ]
}

fn join(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

fn risk_tables(all: &[WindowRisk]) -> Vec<Table> {
    let mut degree = Vec::new();
    let mut logit = Vec::new();
    let mut distance = Vec::new();
    let mut excess = Vec::new();
    for w in all {
        for (flow, t) in [("in", &w.degree_in), ("out", &w.degree_out)] {
            for d in t.ok().into_iter().flatten() {
                let mut row = vec![w.window.clone(), flow.to_string(), d.degree.to_string()];
                row.extend(d.counts.iter().map(|c| c.to_string()));
                row.extend(d.shares.iter().map(|&s| num(s)));
                degree.push(row);
            }
        }
        for e in &w.logit {
            let mut row = vec![w.window.clone(), e.flow.to_string(), e.predictors.join(";")];
            match e.model.ok() {
                Some(m) => row.extend([
                    num(m.a_l),
                    num(m.a_m),
                    join(&m.b_l),
                    join(&m.b_m),
                    m.ordering_violations.to_string(),
                    m.separated.to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 6)),
            }
            row.push(e.model.error());
            logit.push(row);
        }
        for t in w.distance.iter().filter_map(|t| t.ok()) {
            for r in &t.rows {
                let mut row = vec![w.window.clone(), t.source.as_str().to_string(), r.k.to_string(), r.pairs.to_string()];
                row.extend(r.shares.iter().map(|&s| num(s)));
                row.extend(t.null_shares.iter().map(|&s| num(s)));
                row.extend(r.tests.iter().map(|x| num(x.p_value)));
                row.extend(r.tests.iter().map(|x| x.direction.as_str().to_string()));
                row.extend(r.tests.iter().map(|x| x.significant.to_string()));
                distance.push(row);
            }
        }
        for c in w.excess.ok().into_iter().flatten() {
            excess.push(vec![w.window.clone(), c.a.clone(), c.b.clone(), num(c.u), num(c.p_greater), num(c.p_two_sided)]);
        }
    }
    vec![
        Table {
            name: "degree_curves",
            header: vec!["window", "flow", "degree", "n_l", "n_m", "n_h", "share_l", "share_m", "share_h"],
            rows: degree,
        },
        Table {
            name: "logit",
            header: vec!["window", "flow", "predictors", "a_l", "a_m", "b_l", "b_m", "ordering_violations", "separated", "error"],
            rows: logit,
        },
        Table {
            name: "distance",
            header: vec![
                "window", "source", "k", "pairs", "share_l", "share_m", "share_h", "null_l", "null_m", "null_h", "p_l", "p_m",
                "p_h", "direction_l", "direction_m", "direction_h", "significant_l", "significant_m", "significant_h",
            ],
            rows: distance,
        },
        Table { name: "excess", header: vec!["window", "a", "b", "u", "p_greater", "p_two_sided"], rows: excess },
    ]
}

fn partition_tables(all: &[WindowPartition]) -> Vec<Table> {
    let mut summary = Vec::new();
    let mut enrichment = Vec::new();
    for w in all {
        for (kind, o) in [("modules", &w.modules), ("hierarchy", &w.hierarchy)] {
            let Some(r) = o.ok() else {
                let mut row = vec![w.window.clone(), kind.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 11));
                row.push(o.error());
                summary.push(row);
                continue;
            };
            let s = &r.summary;
            let mut row = vec![
                w.window.clone(),
                kind.to_string(),
                r.n_groups.to_string(),
                num(r.score),
                opt(r.agony),
                s.tested.to_string(),
                s.total_groups.to_string(),
            ];
            row.extend(s.over.iter().chain(&s.under).map(|x| x.to_string()));
            row.push(String::new());
            summary.push(row);
            for mut row in enrichment_rows(kind, r) {
                row.insert(0, w.window.clone());
                enrichment.push(row);
            }
        }
    }
    let mut header = vec!["window"];
    header.extend(ENRICHMENT_HEADER);
    vec![
        Table {
            name: "partitions",
            header: vec![
                "window", "partition", "n_groups", "score", "agony", "tested", "total_groups", "over_l", "over_m", "over_h",
                "under_l", "under_m", "under_h", "error",
            ],
            rows: summary,
        },
        Table { name: "enrichment", header, rows: enrichment },
    ]
}

fn classify_table(all: &[Evaluation]) -> Table {
    let mut rows = Vec::new();
    for e in all {
        for (method, s) in [(e.method.clone(), &e.scores), (format!("random {}", e.method.split(' ').nth(1).unwrap_or("")), &e.baseline.scores)] {
            rows.push(vec![
                e.window.clone(),
                method,
                num(s.accuracy),
                num(s.recall_l),
                num(s.recall_m),
                num(s.recall_h),
                num(s.ws_acc),
                num(s.ws_rec),
                num(s.ws_pr),
            ]);
        }
    }
    Table {
        name: "classify",
        header: vec!["window", "method", "accuracy", "recall_l", "recall_m", "recall_h", "ws_acc", "ws_rec", "ws_pr"],
        rows,
    }
}

fn copy_summary(from: &Path) -> CliResult<Table> {
    let mut r = csv_reader(from)?;
    let err = |e: csv::Error| Failure::Data(format!("{}: {e}", from.display()));
    let header = SummaryRow::HEADER.to_vec();
    if r.headers().map_err(err)?.iter().ne(header.iter().copied()) {
        return Err(Failure::Data(format!("{}: unexpected columns", from.display())));
    }
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(err)?;
    Ok(Table { name: "summary", header, rows })
}

pub(crate) fn report(run: &Run) -> CliResult<()> {
    let graphs = run.graphs_manifest()?;
    let upstream = graphs.config_hash.as_str();
    let mut stages = Vec::new();
    let mut tables = vec![copy_summary(&run.stage_dir(GRAPHS).join("summary.csv"))?];
    if let Some(m) = load::<WindowMetrics>(run, METRICS, upstream)? {
        stages.push(METRICS.to_string());
        tables.extend(metrics_tables(&m));
    }
    if let Some(r) = load::<WindowRisk>(run, RISK, upstream)? {
        stages.push(RISK.to_string());
        tables.extend(risk_tables(&r));
    }
    if let Some(p) = load::<WindowPartition>(run, PARTITION, upstream)? {
        stages.push(PARTITION.to_string());
        tables.extend(partition_tables(&p));
    }
    let eval_path = run.stage_dir(CLASSIFY).join("eval.json");
    if eval_path.exists() {
        let e: Artifact<Evaluation> = read_json(&eval_path)?;
        if e.upstream.as_deref() != Some(upstream) {
            return Err(Failure::missing(CLASSIFY, "the model predates the current graphs; rerun `paynet classify train`"));
        }
        stages.push(CLASSIFY.to_string());
        tables.push(classify_table(&[e.data]));
    }
    if stages.is_empty() {
        return Err(Failure::missing("metrics", "run at least one of `metrics`, `risk`, `partition` or `classify train`"));
    }
    let dir = run.fresh_stage(REPORT)?;
    let mut files = Vec::new();
    for t in tables {
        let name = format!("{}.csv", t.name);
        run.write_csv(&dir.join(&name), REPORT, &t.header, t.rows)?;
        files.push(name);
    }
    run.write_json(&dir.join("index.json"), REPORT, Some(upstream), ReportIndex { stages, files })
}
