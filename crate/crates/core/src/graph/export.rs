use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{SectorLabeling, TaxonomyTree, TreeEdge, UNKNOWN_SECTOR};
use crate::error::{Error, Result};
use crate::numfmt::{fmt_sig, round_sig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Dot => "dot",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::validation(format!(
                "unknown export format `{other}`"
            ))),
        }
    }
}

const UNKNOWN_COLOR: &str = "gray";

// Sectors without an entry in the fixed table take these in sorted order.
const EXTRA_PALETTE: [&str; 8] = [
    "khaki",
    "salmon",
    "tan",
    "lavender",
    "aquamarine",
    "gold",
    "turquoise",
    "wheat",
];

/// Graphviz color for a known sector name (case-insensitive), following the
/// usual market-map palette: financials green, energy gray, and so on.
pub fn sector_color(sector: &str) -> Option<&'static str> {
    let s = sector.trim().to_ascii_lowercase();
    let color = match s.as_str() {
        "basic material" | "basic materials" => "yellow",
        "conglomerates" => "white",
        "healthcare" => "pink",
        "transportation" | "transportations" => "darkblue",
        "technology" => "red",
        "capital goods" => "orange",
        "utilities" => "sienna",
        "consumer" | "consumer cyclical" | "consumer non-cyclical" => "violet",
        "financial" | "financials" => "green",
        "energy" => "gray40",
        "services" => "lightblue",
        _ if sector == UNKNOWN_SECTOR => UNKNOWN_COLOR,
        _ => return None,
    };
    Some(color)
}

struct Palette {
    extra: Vec<String>,
}

impl Palette {
    fn new(sectors: &BTreeSet<String>) -> Self {
        Self {
            extra: sectors
                .iter()
                .filter(|s| sector_color(s).is_none())
                .cloned()
                .collect(),
        }
    }

    fn color(&self, sector: &str) -> &'static str {
        sector_color(sector).unwrap_or_else(|| {
            let k = self.extra.iter().position(|s| s == sector).unwrap_or(0);
            EXTRA_PALETTE[k % EXTRA_PALETTE.len()]
        })
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn canonical(tree: &TaxonomyTree, labels: &SectorLabeling) -> TaxonomyTree {
    let mut t = tree.clone().with_labels(labels);
    t.nodes.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    t.edges = t
        .edges
        .into_iter()
        .map(|e| {
            let (source, target) = if e.source <= e.target {
                (e.source, e.target)
            } else {
                (e.target, e.source)
            };
            TreeEdge {
                source,
                target,
                weight: round_sig(e.weight),
            }
        })
        .collect();
    t.edges.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then_with(|| a.target.cmp(&b.target))
    });
    t
}

/// Serializes the tree deterministically: nodes by symbol, edges by
/// `(min endpoint, max endpoint)`, weights at 12 significant digits.
pub fn export_tree(
    tree: &TaxonomyTree,
    labels: &SectorLabeling,
    format: ExportFormat,
) -> Result<String> {
    if !tree.is_spanning_tree() {
        return Err(Error::validation("cannot export: not a spanning tree"));
    }
    let t = canonical(tree, labels);
    Ok(match format {
        ExportFormat::Dot => to_dot(&t),
        ExportFormat::Graphml => to_graphml(&t),
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&t).expect("tree serializes");
            s.push('\n');
            s
        }
    })
}

fn to_dot(t: &TaxonomyTree) -> String {
    let sectors: BTreeSet<String> = t.nodes.iter().map(|n| n.sector.clone()).collect();
    let palette = Palette::new(&sectors);
    let mut s = String::new();
    s.push_str("graph taxonomy {\n");
    s.push_str("  node [shape=ellipse, style=filled];\n");
    for n in &t.nodes {
        let _ = writeln!(
            s,
            "  \"{}\" [fillcolor=\"{}\", tooltip=\"{} / {}\"];",
            dot_escape(&n.symbol),
            palette.color(&n.sector),
            dot_escape(&n.sector),
            dot_escape(&n.industry)
        );
    }
    for e in &t.edges {
        let _ = writeln!(
            s,
            "  \"{}\" -- \"{}\" [label=\"{}\"];",
            dot_escape(&e.source),
            dot_escape(&e.target),
            fmt_sig(e.weight)
        );
    }
    s.push_str("  subgraph cluster_legend {\n    label=\"Sectors\";\n    node [shape=box];\n");
    for sector in &sectors {
        let _ = writeln!(
            s,
            "    \"legend:{}\" [label=\"{}\", fillcolor=\"{}\"];",
            dot_escape(sector),
            dot_escape(sector),
            palette.color(sector)
        );
    }
    s.push_str("  }\n}\n");
    s
}

fn to_graphml(t: &TaxonomyTree) -> String {
    let sectors: BTreeSet<String> = t.nodes.iter().map(|n| n.sector.clone()).collect();
    let palette = Palette::new(&sectors);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"sector\" for=\"node\" attr.name=\"sector\" attr.type=\"string\"/>\n");
    s.push_str(
        "  <key id=\"industry\" for=\"node\" attr.name=\"industry\" attr.type=\"string\"/>\n",
    );
    s.push_str("  <key id=\"color\" for=\"node\" attr.name=\"color\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    s.push_str("  <graph id=\"taxonomy\" edgedefault=\"undirected\">\n");
    for n in &t.nodes {
        let _ = writeln!(
            s,
            "    <node id=\"{}\"><data key=\"sector\">{}</data><data key=\"industry\">{}</data><data key=\"color\">{}</data></node>",
            xml_escape(&n.symbol),
            xml_escape(&n.sector),
            xml_escape(&n.industry),
            palette.color(&n.sector)
        );
    }
    for (k, e) in t.edges.iter().enumerate() {
        let _ = writeln!(
            s,
            "    <edge id=\"e{k}\" source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data></edge>",
            xml_escape(&e.source),
            xml_escape(&e.target),
            fmt_sig(e.weight)
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TreeNode;

    fn pair_tree(a: &str, b: &str, w: f64) -> TaxonomyTree {
        let node = |s: &str| TreeNode {
            symbol: s.into(),
            sector: UNKNOWN_SECTOR.into(),
            industry: UNKNOWN_SECTOR.into(),
        };
        TaxonomyTree {
            nodes: vec![node(a), node(b)],
            edges: vec![TreeEdge {
                source: a.into(),
                target: b.into(),
                weight: w,
            }],
        }
    }

    #[test]
    fn two_node_dot() {
        let mut labels = SectorLabeling::new();
        labels.insert("JPM", "Financial", "Banks");
        labels.insert("XOM", "Energy", "Oil & Gas");
        let dot = export_tree(&pair_tree("JPM", "XOM", 0.25), &labels, ExportFormat::Dot).unwrap();
        let node_lines = dot
            .lines()
            .filter(|l| l.contains("fillcolor") && !l.contains("legend:"))
            .count();
        let edge_lines: Vec<&str> = dot.lines().filter(|l| l.contains(" -- ")).collect();
        assert_eq!(node_lines, 2);
        assert_eq!(edge_lines, vec!["  \"JPM\" -- \"XOM\" [label=\"0.25\"];"]);
        assert!(dot.contains("\"JPM\" [fillcolor=\"green\""));
        assert!(dot.contains("\"XOM\" [fillcolor=\"gray40\""));
    }

    #[test]
    fn export_is_deterministic() {
        let labels = SectorLabeling::new();
        let t = pair_tree("B", "A", 0.5);
        for f in [ExportFormat::Dot, ExportFormat::Graphml, ExportFormat::Json] {
            assert_eq!(
                export_tree(&t, &labels, f).unwrap(),
                export_tree(&t, &labels, f).unwrap()
            );
        }
        let json = export_tree(&t, &labels, ExportFormat::Json).unwrap();
        let back = TaxonomyTree::from_json(&json).unwrap();
        assert_eq!(back.edges[0].source, "A");
        assert_eq!(
            export_tree(&back, &labels, ExportFormat::Json).unwrap(),
            json
        );
    }

    #[test]
    fn unknown_sector_is_gray_with_legend() {
        let mut labels = SectorLabeling::new();
        labels.insert("A", "Technology", "Software");
        let dot = export_tree(&pair_tree("A", "Z", 1.0), &labels, ExportFormat::Dot).unwrap();
        assert!(dot.contains("\"Z\" [fillcolor=\"gray\""));
        assert!(dot.contains("\"legend:UNKNOWN\" [label=\"UNKNOWN\", fillcolor=\"gray\"]"));
        assert!(dot.contains("\"legend:Technology\""));
    }

    #[test]
    fn graphml_escapes() {
        let mut labels = SectorLabeling::new();
        labels.insert("A", "Energy", "Oil & Gas");
        let xml = export_tree(&pair_tree("A", "B", 0.1), &labels, ExportFormat::Graphml).unwrap();
        assert!(xml.contains("Oil &amp; Gas"));
        assert!(xml.contains(
            "<edge id=\"e0\" source=\"A\" target=\"B\"><data key=\"weight\">0.1</data></edge>"
        ));
    }

    #[test]
    fn rejects_unknown_format_and_invalid_tree() {
        assert!(matches!(
            "svg".parse::<ExportFormat>(),
            Err(Error::Validation(_))
        ));
        let mut t = pair_tree("A", "B", 1.0);
        t.edges.clear();
        assert!(export_tree(&t, &SectorLabeling::new(), ExportFormat::Dot).is_err());
    }
}
