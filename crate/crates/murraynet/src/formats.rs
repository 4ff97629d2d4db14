//! Network JSON and CSV field files.

use std::fmt::Write as _;
use std::path::Path;

use murraynet_core::continuum_grid::RectGrid;
use murraynet_core::network::{EdgeSpec, Network};
use murraynet_core::{EdgeFault, Error};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    #[serde(default)]
    pub source: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub length: f64,
    pub conductivity: f64,
}

/// On-disk network: nodes listed with ids `0..N` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        let nodes = (0..net.node_count())
            .map(|id| NodeRecord {
                id,
                source: net.sources()[id],
                position: net.position(id).map(|p| p.to_vec()),
            })
            .collect();
        let edges = net
            .edge_specs()
            .map(|e| EdgeRecord {
                i: e.i,
                j: e.j,
                length: e.length,
                conductivity: e.conductivity,
            })
            .collect();
        NetworkFile { nodes, edges }
    }

    pub fn to_network(&self, path: &Path) -> Result<Network> {
        for (k, n) in self.nodes.iter().enumerate() {
            if n.id != k {
                return Err(CliError::input(
                    path,
                    None,
                    format!("nodes[{k}].id: expected {k}, found {}", n.id),
                ));
            }
        }
        let edges: Vec<EdgeSpec> = self
            .edges
            .iter()
            .map(|e| EdgeSpec::new(e.i, e.j, e.length, e.conductivity))
            .collect();
        let sources = self.nodes.iter().map(|n| n.source).collect();
        let net = Network::new(self.nodes.len(), &edges, sources)
            .map_err(|e| self.schema_error(path, e))?;
        if self.nodes.iter().any(|n| n.position.is_some()) {
            let pos = self.nodes.iter().map(|n| n.position.clone()).collect();
            return net
                .with_positions(pos)
                .map_err(|e| self.schema_error(path, e));
        }
        Ok(net)
    }

    fn schema_error(&self, path: &Path, e: Error) -> CliError {
        match e {
            Error::InvalidEdge {
                edge: (a, b),
                fault,
            } => {
                let what = match fault {
                    EdgeFault::IndexOutOfRange => "node index out of range",
                    EdgeFault::SelfLoop => "self loop",
                    EdgeFault::Duplicate => "duplicate edge",
                    EdgeFault::NonPositiveLength => "length must be positive",
                    EdgeFault::NegativeConductivity => "conductivity must be nonnegative",
                    EdgeFault::NotFinite => "value is not finite",
                };
                let at = self
                    .edges
                    .iter()
                    .position(|e| (e.i, e.j) == (a, b) || (e.j, e.i) == (a, b))
                    .map(|k| format!("edges[{k}]"))
                    .unwrap_or_else(|| format!("edge ({a}, {b})"));
                CliError::input(path, None, format!("{at}: {what}"))
            }
            other => CliError::input(path, None, other.to_string()),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = read_text(path)?;
    let file: NetworkFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(path, Some(e.line()), e.to_string()))?;
    file.to_network(path)
}

pub fn network_json(net: &Network) -> String {
    pretty(&NetworkFile::from_network(net))
}

pub fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn node_values_csv(name: &str, values: &[f64]) -> String {
    let mut c = Csv::new(&["node", name]);
    for (i, v) in values.iter().enumerate() {
        c.row(&[i.to_string(), num(*v)]);
    }
    c.finish()
}

pub fn edge_flux_csv(net: &Network, flux: &[f64]) -> String {
    let mut c = Csv::new(&["i", "j", "flux"]);
    for (&(i, j), q) in net.edges().iter().zip(flux) {
        c.row(&[i.to_string(), j.to_string(), num(*q)]);
    }
    c.finish()
}

/// Cell field as `i,value` (1-D) or `i,j,value` (2-D).
pub fn cell_csv(grid: &RectGrid, values: &[f64]) -> String {
    let mut out = String::new();
    if grid.dim() == 1 {
        out.push_str("i,value\n");
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", num(*v));
        }
    } else {
        out.push_str("i,j,value\n");
        for (c, v) in values.iter().enumerate() {
            let [i, j] = grid.cell_coords(c);
            let _ = writeln!(out, "{i},{j},{}", num(*v));
        }
    }
    out
}

/// Face field of axis `k`, indexed by the face's lattice position.
pub fn face_csv(grid: &RectGrid, k: usize, values: &[f64]) -> String {
    let mut out = String::new();
    let n0 = grid.n(0);
    if grid.dim() == 1 {
        out.push_str("i,value\n");
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", num(*v));
        }
    } else {
        out.push_str("i,j,value\n");
        let width = if k == 0 { n0 + 1 } else { n0 };
        for (f, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", f % width, f / width, num(*v));
        }
    }
    out
}

/// Reads a cell field written in the [`cell_csv`] layout.
pub fn read_cell_csv(path: &Path, grid: &RectGrid) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let want = grid.dim() + 1;
    let mut out = vec![f64::NAN; grid.cell_count()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            CliError::input(path, e.position().map(|p| p.line() as usize), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize);
        if rec.len() != want {
            return Err(CliError::input(
                path,
                line,
                format!("expected {want} columns, found {}", rec.len()),
            ));
        }
        let idx = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| CliError::input(path, line, format!("bad index {:?}", &rec[k])))
        };
        let (i, j) = (idx(0)?, if want == 3 { idx(1)? } else { 0 });
        if i >= grid.n(0) || j >= grid.n(1) {
            return Err(CliError::input(
                path,
                line,
                format!("cell ({i}, {j}) outside the grid"),
            ));
        }
        let v: f64 = rec[want - 1]
            .parse()
            .map_err(|_| CliError::input(path, line, format!("bad value {:?}", &rec[want - 1])))?;
        out[grid.cell_index(i, j)] = v;
    }
    if let Some(c) = out.iter().position(|v| v.is_nan()) {
        return Err(CliError::input(
            path,
            None,
            format!("missing value for cell {:?}", grid.cell_coords(c)),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_round_trip() {
        let edges = [EdgeSpec::new(0, 1, 1.0, 0.5), EdgeSpec::new(1, 2, 2.0, 1.5)];
        let net = Network::new(3, &edges, vec![1.0, 0.0, -1.0]).unwrap();
        let file: NetworkFile = serde_json::from_str(&network_json(&net)).unwrap();
        let back = file.to_network(Path::new("x")).unwrap();
        assert_eq!(back.edges(), net.edges());
        assert_eq!(back.lengths(), net.lengths());
        assert_eq!(back.conductivities(), net.conductivities());
        assert_eq!(back.sources(), net.sources());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0, 1e-300, -2.5e10, 1.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn bad_edge_is_located() {
        let file = NetworkFile {
            nodes: vec![
                NodeRecord {
                    id: 0,
                    source: 0.0,
                    position: None,
                },
                NodeRecord {
                    id: 1,
                    source: 0.0,
                    position: None,
                },
            ],
            edges: vec![EdgeRecord {
                i: 0,
                j: 1,
                length: -1.0,
                conductivity: 1.0,
            }],
        };
        let e = file.to_network(Path::new("net.json")).unwrap_err();
        assert!(e.to_string().contains("edges[0]"), "{e}");
    }
}
