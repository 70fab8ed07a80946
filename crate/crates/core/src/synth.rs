//! Synthetic payment networks with planted ground truth.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Zeta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PaymentGraph;
use crate::rating::{FirmMeta, Rating, Risk, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Powerlaw,
    Hierarchy,
    Modular,
    Customer,
}

/// Generator configuration, readable from JSON. Fields not used by the
/// chosen `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
    pub degree_alpha_in: f64,
    pub degree_alpha_out: f64,
    /// Share of nodes that only pay (in-degree 0).
    pub payer_only_share: f64,
    /// Share of nodes that only receive (out-degree 0).
    pub payee_only_share: f64,
    /// Added to both degrees of nodes that pay and receive.
    pub core_degree_offset: usize,
    /// Log-normal edge weights.
    pub weight_mu: f64,
    pub weight_sigma: f64,
    /// `(q_L, q_M, q_H, q_NA)`.
    pub rating_prior: [f64; 4],
    /// Target row-normalized volume mixing over `L, M, H, NA`; `None` keeps
    /// i.i.d. ratings.
    pub mixing: Option<[[f64; 4]; 4]>,
    pub mixing_sweeps: usize,
    pub n_modules: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Per-module rating priors overriding `rating_prior`.
    pub module_priors: Vec<Option<[f64; 4]>>,
    pub n_ranks: usize,
    pub forward_edge_prob: f64,
    pub noise_prob: f64,
    /// Fraction of noise edges pointing one rank back instead of lateral.
    pub backward_share: f64,
    pub customer: CustomerSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Powerlaw,
            n: 1000,
            seed: 0,
            degree_alpha_in: 2.55,
            degree_alpha_out: 2.8,
            payer_only_share: 0.0,
            payee_only_share: 0.0,
            core_degree_offset: 0,
            weight_mu: 8.0,
            weight_sigma: 2.0,
            rating_prior: [0.3, 0.35, 0.07, 0.28],
            mixing: None,
            mixing_sweeps: 20,
            n_modules: 4,
            p_in: 0.3,
            p_out: 0.01,
            module_priors: Vec::new(),
            n_ranks: 10,
            forward_edge_prob: 0.02,
            noise_prob: 0.1,
            backward_share: 0.0,
            customer: CustomerSpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        check_prior(&self.rating_prior)?;
        if let Some(mix) = &self.mixing {
            for row in mix {
                check_prior(row)?;
            }
        }
        for p in self.module_priors.iter().flatten() {
            check_prior(p)?;
        }
        for (name, p) in [
            ("payer_only_share", self.payer_only_share),
            ("payee_only_share", self.payee_only_share),
            ("forward_edge_prob", self.forward_edge_prob),
            ("backward_share", self.backward_share),
            ("p_in", self.p_in),
            ("p_out", self.p_out),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.noise_prob) {
            return Err(Error::invalid(format!("noise_prob = {} outside [0, 1)", self.noise_prob)));
        }
        if self.payer_only_share + self.payee_only_share > 1.0 {
            return Err(Error::invalid("payer-only and payee-only shares exceed 1"));
        }
        Ok(())
    }
}

fn check_prior(p: &[f64]) -> Result<()> {
    let s: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("distribution {p:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

/// Zero-padded ids so lexicographic order equals index order.
pub fn node_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).max(1).to_string().len();
    (0..n).map(|i| format!("s{i:0width$}")).collect()
}

fn customers(n: usize, ratings: Option<&[Rating]>) -> Vec<FirmMeta> {
    node_ids(n)
        .into_iter()
        .enumerate()
        .map(|(i, id)| FirmMeta {
            id,
            status: Status::Customer,
            rating: ratings.map_or(Rating::NA, |r| r[i]),
            sector: None,
        })
        .collect()
}

/// Visits each index of `0..total` independently with probability `p`.
fn bernoulli_indices(rng: &mut ChaCha8Rng, total: u64, p: f64, mut visit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(visit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut i: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if !skip.is_finite() || i as f64 + skip >= total as f64 {
            return;
        }
        i += skip as u64;
        visit(i);
        i += 1;
        if i >= total {
            return;
        }
    }
}

fn sample_category(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&q| q > 0.0).unwrap_or(0)
}

/// Directed configuration model on zeta-distributed in- and out-degrees.
///
/// The longer stub list is trimmed at random until both sums agree;
/// self-loops are dropped and repeated pairs merged.
pub fn gen_powerlaw_digraph(spec: &SynthSpec) -> Result<PaymentGraph> {
    spec.validate()?;
    if !(spec.degree_alpha_in > 2.0 && spec.degree_alpha_out > 2.0) {
        return Err(Error::invalid("degree exponents must exceed 2"));
    }
    if spec.n < 2 {
        return Err(Error::invalid("need at least two nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = LogNormal::new(spec.weight_mu, spec.weight_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let n = spec.n;
    let cap = (n - 1) as f64;
    for _attempt in 0..10 {
        let zin = Zeta::new(spec.degree_alpha_in).map_err(|e| Error::invalid(e.to_string()))?;
        let zout = Zeta::new(spec.degree_alpha_out).map_err(|e| Error::invalid(e.to_string()))?;
        let mut kin = vec![0usize; n];
        let mut kout = vec![0usize; n];
        for i in 0..n {
            let role: f64 = rng.random();
            let payer_only = role < spec.payer_only_share;
            let payee_only = !payer_only && role < spec.payer_only_share + spec.payee_only_share;
            let both = !payer_only && !payee_only;
            let extra = if both { spec.core_degree_offset } else { 0 };
            if !payer_only {
                kin[i] = zin.sample(&mut rng).min(cap) as usize + extra;
            }
            if !payee_only {
                kout[i] = zout.sample(&mut rng).min(cap) as usize + extra;
            }
        }
        let mut out_stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, kout[i])).collect();
        let mut in_stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, kin[i])).collect();
        out_stubs.shuffle(&mut rng);
        in_stubs.shuffle(&mut rng);
        let m = out_stubs.len().min(in_stubs.len());
        out_stubs.truncate(m);
        in_stubs.truncate(m);
        let edges: Vec<(usize, usize, f64)> = out_stubs
            .into_iter()
            .zip(in_stubs)
            .filter(|(u, v)| u != v)
            .map(|(u, v)| (u, v, weights.sample(&mut rng)))
            .collect();
        if edges.is_empty() {
            continue;
        }
        return PaymentGraph::new(customers(n, None), edges);
    }
    Err(Error::invalid("could not draw a non-empty degree sequence in 10 attempts"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRatings {
    pub ratings: Vec<Rating>,
    /// Achieved row-normalized volume mixing over `L, M, H, NA`.
    pub achieved: [[f64; 4]; 4],
    pub max_abs_error: f64,
    pub converged: bool,
    pub accepted_swaps: usize,
}

fn row_normalize(v: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        let s: f64 = v[i].iter().sum();
        if s > 0.0 {
            for j in 0..4 {
                out[i][j] = v[i][j] / s;
            }
        }
    }
    out
}

fn mixing_distance(v: &[[f64; 4]; 4], target: &[[f64; 4]; 4]) -> (f64, f64) {
    let r = row_normalize(v);
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    for i in 0..4 {
        if v[i].iter().sum::<f64>() == 0.0 {
            continue;
        }
        for j in 0..4 {
            let d = r[i][j] - target[i][j];
            sq += d * d;
            max = max.max(d.abs());
        }
    }
    (sq, max)
}

/// Exact class counts from a prior by largest remainder.
fn apportion(n: usize, prior: &[f64; 4]) -> [usize; 4] {
    let raw: Vec<f64> = prior.iter().map(|q| q * n as f64).collect();
    let mut counts: [usize; 4] = std::array::from_fn(|i| raw[i].floor() as usize);
    let mut rest: Vec<usize> = (0..4).collect();
    rest.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut missing = n - counts.iter().sum::<usize>();
    for &i in rest.iter().cycle() {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

/// Assigns ratings with exact prior proportions, then swaps pairs of labels
/// whenever the swap moves the row-normalized volume mixing closer to
/// `target`. Stops after `sweeps × n` proposals or when every entry is
/// within 0.01 of the target.
pub fn plant_ratings(
    g: &PaymentGraph,
    prior: &[f64; 4],
    target: &[[f64; 4]; 4],
    sweeps: usize,
    seed: u64,
) -> Result<PlantedRatings> {
    check_prior(prior)?;
    for row in target {
        check_prior(row)?;
    }
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = apportion(n, prior);
    let mut label: Vec<usize> = (0..4).flat_map(|c| std::iter::repeat_n(c, counts[c])).collect();
    label.shuffle(&mut rng);

    let mut vol = [[0.0f64; 4]; 4];
    for (u, v, w) in g.edges() {
        vol[label[u]][label[v]] += w;
    }
    let relabel = |x: usize, to: usize, label: &mut Vec<usize>, vol: &mut [[f64; 4]; 4]| {
        let from = label[x];
        for (v, w) in g.out_edges(x) {
            vol[from][label[v]] -= w;
            vol[to][label[v]] += w;
        }
        for (u, w) in g.in_edges(x) {
            vol[label[u]][from] -= w;
            vol[label[u]][to] += w;
        }
        label[x] = to;
    };
    let (mut dist, mut max_err) = mixing_distance(&vol, target);
    let mut accepted = 0;
    let proposals = sweeps.saturating_mul(n);
    if n >= 2 {
        for _ in 0..proposals {
            if max_err <= 0.01 {
                break;
            }
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let (a, b) = (label[i], label[j]);
            if a == b {
                continue;
            }
            relabel(i, b, &mut label, &mut vol);
            relabel(j, a, &mut label, &mut vol);
            let (d, m) = mixing_distance(&vol, target);
            if d < dist {
                dist = d;
                max_err = m;
                accepted += 1;
            } else {
                relabel(j, b, &mut label, &mut vol);
                relabel(i, a, &mut label, &mut vol);
            }
        }
    }
    // recompute from scratch to shed accumulated rounding
    let mut vol = [[0.0f64; 4]; 4];
    for (u, v, w) in g.edges() {
        vol[label[u]][label[v]] += w;
    }
    let (_, max_abs_error) = mixing_distance(&vol, target);
    Ok(PlantedRatings {
        ratings: label.into_iter().map(Rating::from_category).collect(),
        achieved: row_normalize(&vol),
        max_abs_error,
        converged: max_abs_error <= 0.01,
        accepted_swaps: accepted,
    })
}

/// Returns a copy of `g` with ratings replaced.
pub fn with_ratings(g: &PaymentGraph, ratings: &[Rating]) -> Result<PaymentGraph> {
    if ratings.len() != g.n() {
        return Err(Error::invalid("one rating per node required"));
    }
    let nodes = g.nodes().iter().zip(ratings).map(|(f, &r)| FirmMeta { rating: r, ..f.clone() }).collect();
    PaymentGraph::new(nodes, g.edges().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyGraph {
    pub graph: PaymentGraph,
    /// Planted rank per node, `1..=n_ranks`.
    pub ranks: Vec<usize>,
    /// Agony of the planted ranking.
    pub planted_agony: u64,
    /// Edges that do not climb one rank under the planted ranking.
    pub planted_backward: usize,
}

/// Nodes spread evenly over ranks in random order. Each pair in adjacent
/// ranks gets a forward edge with probability `forward_prob`; noise edges,
/// a `noise_prob` fraction of all edges, join nodes of equal rank or, with
/// probability `backward_share`, point one rank down.
pub fn gen_hierarchy_graph(
    n: usize,
    n_ranks: usize,
    forward_prob: f64,
    noise_prob: f64,
    backward_share: f64,
    seed: u64,
) -> Result<HierarchyGraph> {
    if n_ranks < 2 || n < 2 * n_ranks {
        return Err(Error::invalid("need n_ranks ≥ 2 and at least two nodes per rank"));
    }
    if !(0.0..=1.0).contains(&forward_prob) || !(0.0..1.0).contains(&noise_prob) || !(0.0..=1.0).contains(&backward_share)
    {
        return Err(Error::invalid("probabilities out of range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut ranks = vec![0usize; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_ranks];
    for (slot, &node) in perm.iter().enumerate() {
        let r = slot * n_ranks / n;
        ranks[node] = r + 1;
        members[r].push(node);
    }
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges = Vec::new();
    for r in 0..n_ranks - 1 {
        let (lo, hi) = (&members[r], &members[r + 1]);
        let total = (lo.len() * hi.len()) as u64;
        bernoulli_indices(&mut rng, total, forward_prob, |idx| {
            let (a, b) = (lo[(idx / hi.len() as u64) as usize], hi[(idx % hi.len() as u64) as usize]);
            seen.insert((a, b));
            edges.push((a, b, 1.0));
        });
    }
    let forward = edges.len();
    let noise = ((noise_prob / (1.0 - noise_prob)) * forward as f64).round() as usize;
    let mut planted_agony = 0u64;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < noise && attempts < 100 * (noise + 1) {
        attempts += 1;
        let backward = rng.random::<f64>() < backward_share;
        let (u, v) = if backward {
            let r = rng.random_range(1..n_ranks);
            (*members[r].choose(&mut rng).expect("non-empty rank"), *members[r - 1].choose(&mut rng).expect("non-empty rank"))
        } else {
            let r = rng.random_range(0..n_ranks);
            (*members[r].choose(&mut rng).expect("non-empty rank"), *members[r].choose(&mut rng).expect("non-empty rank"))
        };
        if u == v || !seen.insert((u, v)) {
            continue;
        }
        edges.push((u, v, 1.0));
        planted_agony += if backward { 2 } else { 1 };
        placed += 1;
    }
    let graph = PaymentGraph::new(customers(n, None), edges)?;
    Ok(HierarchyGraph { graph, ranks, planted_agony, planted_backward: placed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularGraph {
    pub graph: PaymentGraph,
    /// Planted module per node, `1..=n_modules`.
    pub modules: Vec<usize>,
}

/// Directed planted partition: pairs inside a module are linked with
/// probability `p_in`, other pairs with `p_out`. Ratings are drawn from the
/// module's prior (`module_priors`) or from `rating_prior`.
pub fn gen_modular_graph(spec: &SynthSpec) -> Result<ModularGraph> {
    spec.validate()?;
    if spec.p_in <= spec.p_out {
        return Err(Error::invalid(format!("p_in = {} must exceed p_out = {}", spec.p_in, spec.p_out)));
    }
    let (n, k) = (spec.n, spec.n_modules);
    if k == 0 || n < k {
        return Err(Error::invalid("need 1 ≤ n_modules ≤ n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = LogNormal::new(spec.weight_mu, spec.weight_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut modules = vec![0usize; n];
    for (slot, &node) in perm.iter().enumerate() {
        modules[node] = slot * k / n + 1;
    }
    let mut edges = Vec::new();
    let total = (n * n) as u64;
    // one pass per probability; pairs of the other kind are skipped
    for (p, inside) in [(spec.p_in, true), (spec.p_out, false)] {
        bernoulli_indices(&mut rng, total, p, |idx| {
            let (u, v) = ((idx / n as u64) as usize, (idx % n as u64) as usize);
            if u != v && (modules[u] == modules[v]) == inside {
                edges.push((u, v));
            }
        });
    }
    let edges: Vec<(usize, usize, f64)> = edges.into_iter().map(|(u, v)| (u, v, weights.sample(&mut rng))).collect();
    let ratings: Vec<Rating> = (0..n)
        .map(|i| {
            let prior = spec.module_priors.get(modules[i] - 1).copied().flatten().unwrap_or(spec.rating_prior);
            Rating::from_category(sample_category(&mut rng, &prior))
        })
        .collect();
    Ok(ModularGraph { graph: PaymentGraph::new(customers(n, Some(&ratings)), edges)?, modules })
}

/// Parameters of the customer-network generator used for prediction
/// experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomerSpec {
    /// Mean out-degree multiplier per class `L, M, H`.
    pub activity: [f64; 3],
    /// Probability that a payment stays inside the payer's module.
    pub module_affinity: f64,
    /// Probability that a payment goes to a node of the payer's class.
    pub homophily: f64,
    /// Share of modules whose members are mostly of one class.
    pub module_purity: f64,
    pub n_modules: usize,
    /// Share of nodes whose rating is hidden (`NA`).
    pub hidden_share: f64,
    pub class_prior: [f64; 3],
    /// Extra log-weight of payments between nodes of equal class.
    pub volume_homophily: f64,
}

impl Default for CustomerSpec {
    fn default() -> Self {
        CustomerSpec {
            activity: [1.6, 1.1, 0.8],
            module_affinity: 0.6,
            homophily: 0.1,
            module_purity: 0.3,
            n_modules: 24,
            hidden_share: 0.2,
            class_prior: [0.45, 0.45, 0.10],
            volume_homophily: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerGraph {
    pub graph: PaymentGraph,
    /// Every node's class, including those whose rating is hidden.
    pub classes: Vec<Risk>,
    pub modules: Vec<usize>,
}

/// Customer-network generator with degree–risk link, module structure and
/// homophily of risk.
///
/// Each node draws a class, a module whose composition leans toward one
/// class, and a zeta out-degree scaled by its class activity. Every payment
/// picks its target pool (own module or everyone, own class or any class)
/// and then a target in the pool in proportion to popularity.
pub fn gen_customer_graph(spec: &SynthSpec) -> Result<CustomerGraph> {
    spec.validate()?;
    let c = &spec.customer;
    check_prior(&c.class_prior)?;
    let n = spec.n;
    let k = c.n_modules.max(1);
    if n < 2 * k {
        return Err(Error::invalid("too few nodes for the module count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = LogNormal::new(spec.weight_mu, spec.weight_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let zout = Zeta::new(spec.degree_alpha_out).map_err(|e| Error::invalid(e.to_string()))?;
    let zin = Zeta::new(spec.degree_alpha_in).map_err(|e| Error::invalid(e.to_string()))?;

    // modules are split into per-class blocks sized by the prior; a node
    // joins a module of its own class's block with probability `module_purity`
    let classes: Vec<usize> = (0..n).map(|_| sample_category(&mut rng, &c.class_prior)).collect();
    let block_sizes = apportion_modules(k, &c.class_prior);
    let block_start: Vec<usize> = block_sizes.iter().scan(0, |acc, &s| { let start = *acc; *acc += s; Some(start) }).collect();
    let modules: Vec<usize> = classes
        .iter()
        .map(|&cl| {
            if block_sizes[cl] > 0 && rng.random::<f64>() < c.module_purity {
                block_start[cl] + rng.random_range(0..block_sizes[cl])
            } else {
                rng.random_range(0..k)
            }
        })
        .collect();
    // popularity drives in-degree
    let pop: Vec<f64> = (0..n).map(|i| zin.sample(&mut rng) * c.activity[classes[i]]).collect();
    // cumulative popularity per (module, class) pool, per module, per class, and overall
    let pools = |key: &dyn Fn(usize) -> usize, count: usize| -> Vec<(Vec<usize>, Vec<f64>)> {
        let mut out = vec![(Vec::new(), Vec::new()); count];
        for i in 0..n {
            let (ids, cum): &mut (Vec<usize>, Vec<f64>) = &mut out[key(i)];
            let last = cum.last().copied().unwrap_or(0.0);
            ids.push(i);
            cum.push(last + pop[i]);
        }
        out
    };
    let by_mc = pools(&|i| modules[i] * 3 + classes[i], 3 * k);
    let by_m = pools(&|i| modules[i], k);
    let by_c = pools(&|i| classes[i], 3);
    let all = pools(&|_| 0, 1);
    let draw = |pool: &(Vec<usize>, Vec<f64>), rng: &mut ChaCha8Rng| -> Option<usize> {
        let total = *pool.1.last()?;
        let u = rng.random::<f64>() * total;
        let idx = pool.1.partition_point(|&x| x <= u).min(pool.0.len() - 1);
        Some(pool.0[idx])
    };

    let mut edges = Vec::new();
    for u in 0..n {
        // stochastic rounding keeps the class effect on degree gradual
        let scaled = zout.sample(&mut rng) * c.activity[classes[u]];
        let d = (scaled.floor() + (rng.random::<f64>() < scaled.fract()) as u8 as f64).clamp(1.0, (n - 1) as f64) as usize;
        for _ in 0..d {
            let local = rng.random::<f64>() < c.module_affinity;
            let same = rng.random::<f64>() < c.homophily;
            let pool = match (local, same) {
                (true, true) => &by_mc[modules[u] * 3 + classes[u]],
                (true, false) => &by_m[modules[u]],
                (false, true) => &by_c[classes[u]],
                (false, false) => &all[0],
            };
            let Some(v) = draw(pool, &mut rng) else { continue };
            if v == u {
                continue;
            }
            let boost = if classes[u] == classes[v] { c.volume_homophily } else { 0.0 };
            edges.push((u, v, weights.sample(&mut rng) * boost.exp()));
        }
    }
    let ratings: Vec<Rating> = classes
        .iter()
        .map(|&cl| {
            if rng.random::<f64>() < c.hidden_share {
                Rating::NA
            } else {
                Rating::Known(Risk::from_index(cl).expect("class index"))
            }
        })
        .collect();
    let graph = PaymentGraph::new(customers(n, Some(&ratings)), edges)?;
    Ok(CustomerGraph {
        graph,
        classes: classes.into_iter().map(|c| Risk::from_index(c).expect("class index")).collect(),
        modules: modules.into_iter().map(|m| m + 1).collect(),
    })
}

/// Modules per class block, at least one for every class with mass.
fn apportion_modules(k: usize, prior: &[f64; 3]) -> [usize; 3] {
    let mut sizes = [0usize; 3];
    let mut left = k;
    for c in 0..3 {
        if prior[c] > 0.0 && left > 0 {
            sizes[c] = 1;
            left -= 1;
        }
    }
    for _ in 0..left {
        // the block with the most prior mass per module gets the next one
        let c = (0..3).filter(|&c| prior[c] > 0.0).fold(0, |b, c| if prior[c] / (sizes[c] + 1) as f64 > prior[b] / (sizes[b] + 1) as f64 { c } else { b });
        sizes[c] += 1;
    }
    sizes
}

/// Output of [`generate`]: the graph plus whatever ground truth the kind plants.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub graph: PaymentGraph,
    pub modules: Option<Vec<usize>>,
    pub ranks: Option<Vec<usize>>,
    pub planted_agony: Option<u64>,
    pub mixing: Option<PlantedRatings>,
    /// True class of every node, hidden ratings included.
    pub classes: Option<Vec<Risk>>,
}

/// Dispatches on `spec.kind`; ratings are planted afterwards when
/// `spec.mixing` is set.
pub fn generate(spec: &SynthSpec) -> Result<Generated> {
    spec.validate()?;
    let mut out = match spec.kind {
        SynthKind::Powerlaw => {
            let g = gen_powerlaw_digraph(spec)?;
            Generated { graph: g, modules: None, ranks: None, planted_agony: None, mixing: None, classes: None }
        }
        SynthKind::Hierarchy => {
            let h = gen_hierarchy_graph(spec.n, spec.n_ranks, spec.forward_edge_prob, spec.noise_prob, spec.backward_share, spec.seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
            let ratings: Vec<Rating> =
                (0..spec.n).map(|_| Rating::from_category(sample_category(&mut rng, &spec.rating_prior))).collect();
            Generated {
                graph: with_ratings(&h.graph, &ratings)?,
                modules: None,
                ranks: Some(h.ranks),
                planted_agony: Some(h.planted_agony),
                mixing: None,
                classes: None,
            }
        }
        SynthKind::Modular => {
            let m = gen_modular_graph(spec)?;
            Generated { graph: m.graph, modules: Some(m.modules), ranks: None, planted_agony: None, mixing: None, classes: None }
        }
        SynthKind::Customer => {
            let c = gen_customer_graph(spec)?;
            Generated { graph: c.graph, modules: Some(c.modules), ranks: None, planted_agony: None, mixing: None, classes: Some(c.classes) }
        }
    };
    if let Some(target) = &spec.mixing {
        let planted = plant_ratings(&out.graph, &spec.rating_prior, target, spec.mixing_sweeps, spec.seed ^ 0x9a7e)?;
        out.graph = with_ratings(&out.graph, &planted.ratings)?;
        out.mixing = Some(planted);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bow_tie, degrees};
    use crate::metrics::{assortativity, mixing_matrix, rating_labels};
    use crate::partition::{minimize_agony, AgonyMode};

    #[test]
    fn powerlaw_smoke_and_determinism() {
        let spec = SynthSpec { n: 10, seed: 4, ..SynthSpec::default() };
        let g = gen_powerlaw_digraph(&spec).unwrap();
        assert_eq!(g.n(), 10);
        let d = degrees(&g);
        assert_eq!(d.in_degree.iter().sum::<usize>(), g.m());
        assert_eq!(d.out_degree.iter().sum::<usize>(), g.m());
        assert_eq!(g, gen_powerlaw_digraph(&spec).unwrap());
        let bad = SynthSpec { degree_alpha_in: 1.9, ..spec };
        assert!(gen_powerlaw_digraph(&bad).is_err());
    }

    #[test]
    fn bow_tie_shape() {
        let spec = SynthSpec {
            n: 20_000,
            seed: 1,
            payer_only_share: 0.5,
            payee_only_share: 0.28,
            core_degree_offset: 8,
            ..SynthSpec::default()
        };
        let g = gen_powerlaw_digraph(&spec).unwrap();
        let bt = bow_tie(&g);
        let node_share = bt.scc.len() as f64 / g.n() as f64;
        let mut in_core = vec![false; g.n()];
        bt.scc.iter().for_each(|&i| in_core[i] = true);
        let edge_share = g.edges().filter(|&(u, v, _)| in_core[u] && in_core[v]).count() as f64 / g.m() as f64;
        assert!((0.15..=0.25).contains(&node_share), "{node_share}");
        assert!(edge_share > 0.5, "{edge_share}");
    }

    #[test]
    fn swaps_preserve_prior_and_reach_homophily() {
        let spec = SynthSpec { n: 3000, seed: 2, ..SynthSpec::default() };
        let g = gen_powerlaw_digraph(&spec).unwrap();
        let prior = [0.3, 0.4, 0.1, 0.2];
        let mut target = [[0.1 / 3.0; 4]; 4];
        for (i, row) in target.iter_mut().enumerate() {
            row[i] = 0.9;
        }
        let p = plant_ratings(&g, &prior, &target, 30, 5).unwrap();
        let counts = |r: &[Rating]| (0..4).map(|c| r.iter().filter(|x| x.category() == c).count()).collect::<Vec<_>>();
        assert_eq!(counts(&p.ratings), vec![900, 1200, 300, 600]);
        let rg = with_ratings(&g, &p.ratings).unwrap();
        let r = assortativity(&mixing_matrix(&rg, &rating_labels(&rg), 4, true).unwrap()).unwrap();
        assert!(r.r > 0.5, "{r:?} {p:?}");
    }

    #[test]
    fn independent_target_gives_no_assortativity() {
        let spec = SynthSpec { n: 5000, seed: 3, ..SynthSpec::default() };
        let g = gen_powerlaw_digraph(&spec).unwrap();
        let prior = [0.25; 4];
        let target = [prior; 4];
        let p = plant_ratings(&g, &prior, &target, 30, 6).unwrap();
        let rg = with_ratings(&g, &p.ratings).unwrap();
        let r = assortativity(&mixing_matrix(&rg, &rating_labels(&rg), 4, true).unwrap()).unwrap();
        assert!(r.r.abs() < 0.02, "{r:?}");
    }

    #[test]
    fn hierarchy_noise_free_is_dag() {
        let h = gen_hierarchy_graph(300, 5, 0.05, 0.0, 0.0, 1).unwrap();
        assert_eq!(h.planted_agony, 0);
        let p = minimize_agony(&h.graph, AgonyMode::Heuristic).unwrap();
        assert_eq!(p.score, 1.0);
    }

    #[test]
    fn hierarchy_heuristic_beats_planted() {
        let h = gen_hierarchy_graph(1000, 8, 0.03, 0.25, 0.3, 2).unwrap();
        assert_eq!(crate::partition::agony(&h.graph, &h.ranks.iter().map(|&r| r as i64).collect::<Vec<_>>()).unwrap(), h.planted_agony);
        let p = minimize_agony(&h.graph, AgonyMode::Heuristic).unwrap();
        assert!(p.agony.unwrap() <= h.planted_agony, "{:?} > {}", p.agony, h.planted_agony);
    }

    fn midranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (midranks(a), midranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn recovered_ranks_track_planted() {
        let h = gen_hierarchy_graph(2000, 10, 0.02, 0.1, 0.0, 3).unwrap();
        let p = minimize_agony(&h.graph, AgonyMode::Heuristic).unwrap();
        assert!(p.agony.unwrap() <= h.planted_agony);
        let m = h.graph.m() as f64;
        assert!(p.score >= 0.95 * (1.0 - h.planted_backward as f64 / m), "{} {}", p.score, h.planted_backward);
        let planted: Vec<f64> = h.ranks.iter().map(|&r| r as f64).collect();
        let found: Vec<f64> = p.assignment.iter().map(|&r| r as f64).collect();
        let rho = spearman(&planted, &found);
        assert!(rho > 0.8, "{rho}");
    }

    #[test]
    fn unbiased_modules_rarely_flagged() {
        let mut flagged = 0;
        for seed in 0..20 {
            let spec = SynthSpec { kind: SynthKind::Modular, n: 2000, n_modules: 4, p_in: 0.01, p_out: 0.001, seed, rating_prior: [0.4, 0.4, 0.1, 0.1], ..SynthSpec::default() };
            let m = gen_modular_graph(&spec).unwrap();
            let (assignment, n_groups) = crate::partition::relabel_by_size(&m.modules.iter().map(|&x| x - 1).collect::<Vec<_>>());
            let part = crate::partition::RankedPartition { assignment, ordered: false, n_groups, score: 0.0, levels: 0, agony: None, exact: false };
            let ratings: Vec<Rating> = m.graph.nodes().iter().map(|f| f.rating).collect();
            let prof = crate::partition::group_risk_profiles(&part, &ratings, 300, 0.01).unwrap();
            flagged += prof.results.iter().filter(|r| r.test.significant).count();
        }
        // 20 runs × 12 tests at family-wise 0.01
        assert!(flagged <= 2, "{flagged}");
    }

    #[test]
    fn modular_precondition_and_bias() {
        let spec = SynthSpec { kind: SynthKind::Modular, n: 400, p_in: 0.01, p_out: 0.01, ..SynthSpec::default() };
        assert!(gen_modular_graph(&spec).is_err());
        let spec = SynthSpec {
            p_in: 0.3,
            module_priors: vec![Some([0.1, 0.1, 0.8, 0.0])],
            rating_prior: [0.45, 0.45, 0.1, 0.0],
            ..spec
        };
        let m = gen_modular_graph(&spec).unwrap();
        let in_one: Vec<usize> = (0..400).filter(|&i| m.modules[i] == 1).collect();
        let h = in_one.iter().filter(|&&i| m.graph.node(i).rating == Rating::H).count() as f64 / in_one.len() as f64;
        assert!(h > 0.65, "{h}");
        assert_eq!(m, gen_modular_graph(&spec).unwrap());
    }

    #[test]
    fn spec_round_trips_json() {
        let spec = SynthSpec { kind: SynthKind::Hierarchy, mixing: Some([[0.25; 4]; 4]), ..SynthSpec::default() };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SynthSpec>(&s).unwrap(), spec);
        let partial: SynthSpec = serde_json::from_str(r#"{"kind":"modular","n":50}"#).unwrap();
        assert_eq!(partial.n, 50);
        assert!(serde_json::from_str::<SynthSpec>(r#"{"bogus":1}"#).is_err());
    }
}
