//! Basic per-window metrics table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{bow_tie, components, degrees, density, diameter, Connectivity, DiameterMode, PaymentGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub window: String,
    pub n: usize,
    pub m: usize,
    /// `m / n`, the same for in- and out-degree.
    pub mean_degree: f64,
    /// Mean in-degree over nodes that receive at least one payment.
    pub mean_in_degree_active: f64,
    /// Mean out-degree over nodes that make at least one payment.
    pub mean_out_degree_active: f64,
    /// `None` below two nodes.
    pub density: Option<f64>,
    pub diameter: Option<usize>,
    pub diameter_upper: Option<usize>,
    /// Largest weak component.
    pub gc_n: usize,
    pub gc_m: usize,
    pub gc_density: Option<f64>,
    /// Largest strong component.
    pub scc_n: usize,
    pub scc_m: usize,
    pub scc_density: Option<f64>,
    /// Weight on edges inside the largest strong component over total weight.
    pub scc_volume_share: Option<f64>,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 16] = [
        "window",
        "n",
        "m",
        "mean_degree",
        "mean_in_degree_active",
        "mean_out_degree_active",
        "density",
        "diameter",
        "diameter_upper",
        "gc_n",
        "gc_m",
        "gc_density",
        "scc_n",
        "scc_m",
        "scc_density",
        "scc_volume_share",
    ];

    pub fn cells(&self) -> Vec<String> {
        use super::artifact::{num, opt};
        vec![
            self.window.clone(),
            self.n.to_string(),
            self.m.to_string(),
            num(self.mean_degree),
            num(self.mean_in_degree_active),
            num(self.mean_out_degree_active),
            opt(self.density),
            opt(self.diameter),
            opt(self.diameter_upper),
            self.gc_n.to_string(),
            self.gc_m.to_string(),
            opt(self.gc_density),
            self.scc_n.to_string(),
            self.scc_m.to_string(),
            opt(self.scc_density),
            opt(self.scc_volume_share),
        ]
    }
}

fn summarize_one(window: &str, g: &PaymentGraph, mode: DiameterMode) -> SummaryRow {
    let means = degrees(g).means();
    let inside = |mask: &[bool]| -> (usize, f64) {
        g.edges()
            .filter(|&(u, v, _)| mask[u] && mask[v])
            .fold((0, 0.0), |(m, w), (_, _, x)| (m + 1, w + x))
    };
    let mask_of = |members: &[usize]| {
        let mut mask = vec![false; g.n()];
        members.iter().for_each(|&i| mask[i] = true);
        mask
    };
    let weak = components(g, Connectivity::Weak);
    let gc: Vec<usize> = if weak.count() > 0 { weak.members(0) } else { Vec::new() };
    let (gc_m, _) = inside(&mask_of(&gc));
    let scc = bow_tie(g).scc;
    let (scc_m, scc_w) = inside(&mask_of(&scc));
    let total = g.total_weight();
    let d = diameter(g, mode).ok();
    SummaryRow {
        window: window.to_string(),
        n: g.n(),
        m: g.m(),
        mean_degree: means.all_nodes,
        mean_in_degree_active: means.in_nonzero,
        mean_out_degree_active: means.out_nonzero,
        density: density(g.n(), g.m()).ok(),
        diameter: d.map(|d| d.value),
        diameter_upper: d.map(|d| d.upper),
        gc_n: gc.len(),
        gc_m,
        gc_density: density(gc.len(), gc_m).ok(),
        scc_n: scc.len(),
        scc_m,
        scc_density: density(scc.len(), scc_m).ok(),
        scc_volume_share: (total > 0.0).then(|| scc_w / total),
    }
}

/// One row of basic metrics per window graph, computed in parallel.
pub fn summarize(graphs: &[(String, PaymentGraph)], mode: DiameterMode) -> Vec<SummaryRow> {
    graphs.par_iter().map(|(w, g)| summarize_one(w, g, mode)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::weighted;

    #[test]
    fn toy_graph_row() {
        // 3-cycle 0→1→2→0 feeding 3, plus an isolated pair 4→5
        let g = weighted(6, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (2, 3, 4.0), (4, 5, 10.0)]);
        let rows = summarize(&[("t".into(), g.clone())], DiameterMode::Exact);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.n, r.m), (6, 5));
        assert_eq!(r.density, density(6, 5).ok());
        assert_eq!((r.gc_n, r.gc_m, r.scc_n, r.scc_m), (4, 4, 3, 3));
        assert_eq!(r.scc_volume_share, Some(6.0 / 20.0));
        let direct: f64 = g.edges().filter(|&(u, v, _)| u < 3 && v < 3).map(|e| e.2).sum();
        assert_eq!(r.scc_volume_share.unwrap(), direct / g.total_weight());
        assert_eq!(r.diameter, Some(2));
    }

    #[test]
    fn empty_graph_has_no_density() {
        let rows = summarize(&[("e".into(), PaymentGraph::empty())], DiameterMode::DoubleSweepBound);
        assert_eq!(rows[0].density, None);
        assert_eq!(rows[0].scc_volume_share, None);
    }
}
