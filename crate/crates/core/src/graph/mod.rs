//! Minimum spanning trees over distance matrices, scored and exported.

mod export;
mod mst;
mod score;
mod union_find;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{export_tree, sector_color, ExportFormat};
pub use mst::minimum_spanning_tree;
pub use score::{sector_adjacency_score, sector_subtree_score, LabelLevel};
pub use union_find::UnionFind;

/// Sector assigned to symbols with no label.
pub const UNKNOWN_SECTOR: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub sector: String,
    pub industry: String,
}

impl Label {
    fn unknown() -> Self {
        Label {
            sector: UNKNOWN_SECTOR.to_string(),
            industry: UNKNOWN_SECTOR.to_string(),
        }
    }
}

/// Symbol -> (sector, industry). Lookups of unlabeled symbols fall back to
/// the `UNKNOWN` sector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectorLabeling {
    labels: BTreeMap<String, Label>,
}

impl SectorLabeling {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        symbol: impl Into<String>,
        sector: impl Into<String>,
        industry: impl Into<String>,
    ) {
        self.labels.insert(
            symbol.into(),
            Label {
                sector: sector.into(),
                industry: industry.into(),
            },
        );
    }

    pub fn label(&self, symbol: &str) -> Label {
        self.labels
            .get(symbol)
            .cloned()
            .unwrap_or_else(Label::unknown)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.labels.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Label)> {
        self.labels.iter()
    }

    /// Reads `symbol,sector,industry` CSV with header. An empty sector maps
    /// to `UNKNOWN`; an empty industry inherits the sector.
    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let parse_err = |line: u64, message: String| Error::Parse {
            source_name: source.to_string(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["symbol", "sector", "industry"] {
            return Err(parse_err(
                1,
                "expected header `symbol,sector,industry`".into(),
            ));
        }
        let mut out = Self::new();
        for rec in rdr.records() {
            let rec =
                rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 3 || rec[0].is_empty() {
                return Err(parse_err(line, "expected `symbol,sector,industry`".into()));
            }
            if out.contains(&rec[0]) {
                return Err(parse_err(
                    line,
                    format!("duplicate label for `{}`", &rec[0]),
                ));
            }
            let sector = if rec[1].is_empty() {
                UNKNOWN_SECTOR
            } else {
                &rec[1]
            };
            let industry = if rec[2].is_empty() { sector } else { &rec[2] };
            out.insert(&rec[0], sector, industry);
        }
        Ok(out)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("symbol,sector,industry\n");
        for (sym, l) in &self.labels {
            s.push_str(&format!("{sym},{},{}\n", l.sector, l.industry));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub symbol: String,
    pub sector: String,
    pub industry: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Spanning tree over the symbols of a distance matrix. Nodes are sorted by
/// symbol; every edge has `source < target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyTree {
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<TreeEdge>,
}

impl TaxonomyTree {
    /// Copies sector and industry labels onto the nodes.
    pub fn with_labels(mut self, labels: &SectorLabeling) -> Self {
        for node in &mut self.nodes {
            let l = labels.label(&node.symbol);
            node.sector = l.sector;
            node.industry = l.industry;
        }
        self
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn node_index(&self, symbol: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.symbol == symbol)
    }

    /// Edges as sorted index pairs.
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| {
                let a = self.node_index(&e.source).expect("edge endpoint is a node");
                let b = self.node_index(&e.target).expect("edge endpoint is a node");
                (a.min(b), a.max(b))
            })
            .collect()
    }

    /// `N - 1` edges connecting every node, hence acyclic.
    pub fn is_spanning_tree(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 || self.edges.len() != n - 1 {
            return false;
        }
        if self
            .edges
            .iter()
            .any(|e| self.node_index(&e.source).is_none() || self.node_index(&e.target).is_none())
        {
            return false;
        }
        let mut uf = UnionFind::new(n);
        self.edge_indices().into_iter().all(|(a, b)| uf.union(a, b))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tree: TaxonomyTree =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("tree JSON: {e}")))?;
        if !tree.is_spanning_tree() {
            return Err(Error::validation(
                "tree JSON does not describe a spanning tree",
            ));
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_csv() {
        let csv = "symbol,sector,industry\nJPM,Financial,Banks\nXOM,Energy,\nZZ,,\n";
        let l = SectorLabeling::read_csv(csv.as_bytes(), "labels.csv").unwrap();
        assert_eq!(l.label("JPM").industry, "Banks");
        assert_eq!(l.label("XOM").industry, "Energy");
        assert_eq!(l.label("ZZ").sector, UNKNOWN_SECTOR);
        assert_eq!(l.label("NOPE").sector, UNKNOWN_SECTOR);
        let back = SectorLabeling::read_csv(l.to_csv().as_bytes(), "x").unwrap();
        assert_eq!(back, l);

        let dup = "symbol,sector,industry\nA,S,I\nA,S,I\n";
        let err = SectorLabeling::read_csv(dup.as_bytes(), "labels.csv").unwrap_err();
        assert!(err.to_string().starts_with("labels.csv:3:"));
        assert!(SectorLabeling::read_csv("sym,sec\n".as_bytes(), "l").is_err());
    }
}
