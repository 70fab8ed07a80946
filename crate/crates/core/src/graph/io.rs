//! Edge-list (`src,dst,weight`) and node-attribute (`id,status,rating,sector`)
//! serialization. Rows are written in node-index order so output is
//! reproducible.

use std::io::{Read, Write};
use std::path::Path;

use super::PaymentGraph;
use crate::error::{Error, Result};
use crate::rating::FirmMeta;

pub fn write_edges<W: Write>(g: &PaymentGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "weight"])?;
    for (u, v, wt) in g.edges() {
        w.write_record([g.node(u).id.as_str(), g.node(v).id.as_str(), &wt.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<edges>", e))?;
    Ok(())
}

pub fn write_nodes<W: Write>(g: &PaymentGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "status", "rating", "sector"])?;
    for f in g.nodes() {
        w.write_record([f.id.as_str(), f.status.as_str(), f.rating.as_str(), f.sector.as_deref().unwrap_or("")])?;
    }
    w.flush().map_err(|e| Error::io("<nodes>", e))?;
    Ok(())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

pub fn read_nodes<R: Read>(input: R) -> Result<Vec<FirmMeta>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let (ci, cs, cr) = (column(&headers, "id")?, column(&headers, "status")?, column(&headers, "rating")?);
    let csec = column(&headers, "sector").ok();
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let sector = csec.and_then(|c| row.get(c)).filter(|s| !s.is_empty()).map(str::to_string);
        out.push(FirmMeta {
            id: row.get(ci).unwrap_or_default().to_string(),
            status: row.get(cs).unwrap_or_default().parse()?,
            rating: row.get(cr).unwrap_or_default().parse()?,
            sector,
        });
    }
    Ok(out)
}

/// Reads a graph back from an edge list and its node sidecar.
pub fn read_graph<R1: Read, R2: Read>(edges: R1, nodes: R2) -> Result<PaymentGraph> {
    let nodes = read_nodes(nodes)?;
    let index: std::collections::HashMap<&str, usize> =
        nodes.iter().enumerate().map(|(i, f)| (f.id.as_str(), i)).collect();
    let mut r = csv::Reader::from_reader(edges);
    let headers = r.headers()?.clone();
    let (cs, cd, cw) = (column(&headers, "src")?, column(&headers, "dst")?, column(&headers, "weight")?);
    let mut list = Vec::new();
    for row in r.records() {
        let row = row?;
        let lookup = |c: usize| {
            let id = row.get(c).unwrap_or_default();
            index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
        };
        let w: f64 = row
            .get(cw)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::invalid(format!("bad weight in row {:?}", row)))?;
        list.push((lookup(cs)?, lookup(cd)?, w));
    }
    PaymentGraph::new(nodes, list)
}

pub fn save_graph(g: &PaymentGraph, edges_path: &Path, nodes_path: &Path) -> Result<()> {
    let e = std::fs::File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
    write_edges(g, std::io::BufWriter::new(e))?;
    let n = std::fs::File::create(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    write_nodes(g, std::io::BufWriter::new(n))?;
    Ok(())
}

/// Drops leading lines that start with `#`, such as provenance stamps.
pub fn skip_preamble(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

/// Loads a graph from files, ignoring a leading `#` preamble in each.
pub fn load_graph(edges_path: &Path, nodes_path: &Path) -> Result<PaymentGraph> {
    let e = std::fs::read_to_string(edges_path).map_err(|e| Error::io(edges_path, e))?;
    let n = std::fs::read_to_string(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    read_graph(skip_preamble(&e).as_bytes(), skip_preamble(&n).as_bytes())
}
