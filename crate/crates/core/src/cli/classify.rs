//! `classify train` and `classify predict`.

use serde::{Deserialize, Serialize};

use super::artifact::{num, read_json, Artifact, Run};
use super::{CliResult, Failure, Strategy};
use crate::classify::{
    build_features, depth_grid, evaluate, feature_names, grid_search, network_context, random_baseline, stratified_split,
    BaseKind, Baseline, ConfusionMatrix, FeatureTable, GridResult, Hyper, NetworkContext, OneStepModel, PenaltyMatrices,
    Preprocessor, Scores, TwoStepHyper, TwoStepModel,
};
use crate::classify::{train_one_step, train_two_step};
use crate::graph::PaymentGraph;
use crate::partition::{louvain_best, minimize_agony, AgonyMode};
use crate::rating::{Rating, Risk};

pub const CLASSIFY: &str = "classify";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Trained {
    OneStep(OneStepModel),
    TwoStep(TwoStepModel),
}

impl Trained {
    pub fn predict(&self, x: &[f64]) -> Risk {
        match self {
            Trained::OneStep(m) => m.predict(x),
            Trained::TwoStep(m) => m.predict(x),
        }
    }
}

/// Everything needed to rebuild features and predict on a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub window: String,
    pub base: BaseKind,
    pub strategy: Strategy,
    pub hyper: TwoStepHyper,
    pub louvain_seeds: Vec<u64>,
    pub feature_names: Vec<String>,
    pub preprocessor: Preprocessor,
    pub model: Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub window: String,
    pub method: String,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
    /// Feature-blind classifier drawing classes at training prevalence.
    pub baseline: Baseline,
    pub chosen: TwoStepHyper,
    pub grid: Option<GridResult>,
}

fn default_grid(base: BaseKind) -> Vec<TwoStepHyper> {
    match base {
        BaseKind::Tree => depth_grid(),
        BaseKind::Softmax => vec![TwoStepHyper::default()],
        BaseKind::Mlp => [vec![10], vec![50], vec![5, 5]].into_iter().map(|h| TwoStepHyper::same(Hyper::mlp(h))).collect(),
    }
}

fn read_grid(run: &Run) -> CliResult<Vec<TwoStepHyper>> {
    let Some(path) = &run.cfg.classify.grid else {
        return Ok(default_grid(run.cfg.classify.base));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let grid: Vec<TwoStepHyper> =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if grid.is_empty() {
        return Err(Failure::Config(format!("{}: empty grid", path.display())));
    }
    Ok(grid)
}

fn pick_window(graphs: Vec<(String, PaymentGraph)>, label: Option<&str>) -> CliResult<(String, PaymentGraph)> {
    match label {
        Some(l) => graphs
            .into_iter()
            .find(|(w, _)| w == l)
            .ok_or_else(|| Failure::Config(format!("no window labelled `{l}`"))),
        None => graphs.into_iter().next().ok_or_else(|| Failure::Data("no window graphs".into())),
    }
}

fn rows_of(t: &FeatureTable, idx: &[usize]) -> CliResult<(Vec<Vec<f64>>, Vec<usize>)> {
    Ok(t.select(idx)?)
}

fn train_final(
    x: &[Vec<f64>],
    y: &[usize],
    base: BaseKind,
    strategy: Strategy,
    hyper: &TwoStepHyper,
    seed: u64,
) -> crate::Result<Trained> {
    Ok(match strategy {
        Strategy::OneStep => Trained::OneStep(train_one_step(x, y, base, &hyper.step1, seed)?),
        Strategy::TwoStep => Trained::TwoStep(train_two_step(x, y, base, hyper, seed)?),
    })
}

pub(crate) fn train(run: &Run) -> CliResult<()> {
    let c = &run.cfg.classify;
    let grid = read_grid(run)?;
    let (upstream, graphs) = run.load_graphs()?;
    let (window, g) = pick_window(graphs, c.label.as_deref())?;
    let seed = run.cfg.seed;
    let seeds = run.cfg.louvain_seeds();
    let NetworkContext { modules, hierarchy, preprocessor } = network_context(&g, &seeds, run.cfg.min_module_size)?;

    let rated: Vec<usize> = (0..g.n()).filter(|&i| g.node(i).rating.is_known()).collect();
    let labels: Vec<usize> = rated.iter().map(|&i| g.node(i).rating.risk().expect("rated").index()).collect();
    let (tr, te) = stratified_split(&labels, c.train_frac, seed);
    let train_nodes: Vec<usize> = tr.iter().map(|&k| rated[k]).collect();
    let test_nodes: Vec<usize> = te.iter().map(|&k| rated[k]).collect();
    if train_nodes.is_empty() || test_nodes.is_empty() {
        return Err(Failure::Data(format!("window {window}: {} rated nodes are too few to split", rated.len())));
    }

    // test ratings are hidden before neighbor fractions are computed
    let mut hidden_nodes = g.nodes().to_vec();
    test_nodes.iter().for_each(|&i| hidden_nodes[i].rating = Rating::NA);
    let hidden = PaymentGraph::new(hidden_nodes, g.edges().collect())?;
    let mut table = build_features(&hidden, &modules, &hierarchy, &preprocessor)?;
    let (x_train, y_train) = rows_of(&table, &train_nodes)?;
    test_nodes.iter().for_each(|&i| table.labels[i] = g.node(i).rating);
    let (x_test, y_test) = rows_of(&table, &test_nodes)?;

    let penalties = PenaltyMatrices::default();
    let scheme = c.strategy.scheme();
    let (chosen, grid_result) = if grid.len() == 1 {
        (grid[0].clone(), None)
    } else {
        let (a, b) = stratified_split(&y_train, c.train_frac, seed.wrapping_add(1));
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
            (idx.iter().map(|&i| x_train[i].clone()).collect(), idx.iter().map(|&i| y_train[i]).collect())
        };
        let (xa, ya) = pick(&a);
        let (xb, yb) = pick(&b);
        let r = grid_search((&xa, &ya), (&xb, &yb), c.base, scheme, &grid, c.objective, &penalties, seed)?;
        (r.best_hyper().clone(), Some(r))
    };
    let model = train_final(&x_train, &y_train, c.base, c.strategy, &chosen, seed)?;

    let truth: Vec<Risk> = y_test.iter().map(|&k| Risk::ALL[k]).collect();
    let predicted: Vec<Risk> = x_test.iter().map(|r| model.predict(r)).collect();
    let confusion = ConfusionMatrix::from_predictions(&truth, &predicted)?;
    let scores = evaluate(&confusion, &penalties)?;
    let mut q = [0.0; 3];
    y_train.iter().for_each(|&k| q[k] += 1.0 / y_train.len() as f64);
    let baseline = random_baseline(q, scheme, chosen.tie, &penalties)?;

    let dir = run.fresh_stage(CLASSIFY)?;
    let method = format!("{} {}", c.base.as_str(), if scheme == crate::classify::Scheme::OneStep { "1-step" } else { "2-step" });
    let rows = test_nodes
        .iter()
        .zip(truth.iter().zip(&predicted))
        .map(|(&i, (t, p))| vec![g.node(i).id.clone(), t.as_str().to_string(), p.as_str().to_string()]);
    run.write_csv(&dir.join("test_predictions.csv"), CLASSIFY, &["id", "truth", "predicted"], rows)?;
    if let Some(r) = &grid_result {
        let rows = r.rows.iter().enumerate().map(|(i, row)| {
            let s = &row.scores;
            vec![
                i.to_string(),
                serde_json::to_string(&row.hyper).expect("hyper serializes"),
                num(s.accuracy),
                num(s.recall_l),
                num(s.recall_m),
                num(s.recall_h),
                num(s.ws_acc),
                num(s.ws_rec),
                num(s.ws_pr),
                (i == r.best).to_string(),
            ]
        });
        let header = ["point", "hyper", "accuracy", "recall_l", "recall_m", "recall_h", "ws_acc", "ws_rec", "ws_pr", "best"];
        run.write_csv(&dir.join("grid.csv"), CLASSIFY, &header, rows)?;
    }
    let eval = Evaluation {
        window: window.clone(),
        method,
        n_train: train_nodes.len(),
        n_test: test_nodes.len(),
        confusion,
        scores,
        baseline,
        chosen: chosen.clone(),
        grid: grid_result,
    };
    run.write_json(&dir.join("eval.json"), CLASSIFY, Some(&upstream), eval)?;
    let stored = StoredModel {
        window,
        base: c.base,
        strategy: c.strategy,
        hyper: chosen,
        louvain_seeds: seeds,
        feature_names: feature_names(),
        preprocessor,
        model,
    };
    run.write_json(&dir.join("model.json"), CLASSIFY, Some(&upstream), stored)
}

pub(crate) fn predict(run: &Run) -> CliResult<()> {
    let path = run.stage_dir(CLASSIFY).join("model.json");
    if !path.exists() {
        return Err(Failure::missing("classify train", "train a model with `paynet classify train` first"));
    }
    let stored: Artifact<StoredModel> = read_json(&path)?;
    let (_, graphs) = run.load_graphs()?;
    let m = stored.data;
    let (_, g) = pick_window(graphs, Some(&m.window))?;
    let modules = louvain_best(&g, &m.louvain_seeds)?;
    let hierarchy = minimize_agony(&g, AgonyMode::Heuristic)?;
    let table = build_features(&g, &modules, &hierarchy, &m.preprocessor)?;
    let rows = (0..g.n())
        .filter(|&i| !g.node(i).rating.is_known())
        .map(|i| vec![g.node(i).id.clone(), m.model.predict(&table.rows[i]).as_str().to_string()]);
    run.write_csv(&run.stage_dir(CLASSIFY).join("predictions.csv"), CLASSIFY, &["id", "predicted"], rows)
}
