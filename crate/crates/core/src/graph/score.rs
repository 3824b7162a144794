use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{SectorLabeling, TaxonomyTree, UNKNOWN_SECTOR};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelLevel {
    Sector,
    Industry,
}

impl LabelLevel {
    fn of(self, labels: &SectorLabeling, symbol: &str) -> Option<String> {
        let l = labels.label(symbol);
        if l.sector == UNKNOWN_SECTOR {
            return None;
        }
        Some(match self {
            LabelLevel::Sector => l.sector,
            LabelLevel::Industry => l.industry,
        })
    }
}

impl fmt::Display for LabelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelLevel::Sector => "sector",
            LabelLevel::Industry => "industry",
        })
    }
}

impl FromStr for LabelLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sector" => Ok(LabelLevel::Sector),
            "industry" => Ok(LabelLevel::Industry),
            other => Err(Error::Validation(format!("unknown label level `{other}`"))),
        }
    }
}

/// Fraction of tree edges whose endpoints carry the same label. An
/// `UNKNOWN` endpoint never matches.
pub fn sector_adjacency_score(
    tree: &TaxonomyTree,
    labels: &SectorLabeling,
    level: LabelLevel,
) -> f64 {
    if tree.edges.is_empty() {
        return 0.0;
    }
    let same = tree
        .edges
        .iter()
        .filter(
            |e| match (level.of(labels, &e.source), level.of(labels, &e.target)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        )
        .count();
    same as f64 / tree.edges.len() as f64
}

/// Fraction of label groups with at least two members whose members induce a
/// connected subtree. `UNKNOWN` nodes form no group. With no qualifying group
/// the score is 1 (nothing is split).
pub fn sector_subtree_score(
    tree: &TaxonomyTree,
    labels: &SectorLabeling,
    level: LabelLevel,
) -> f64 {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        if let Some(l) = level.of(labels, &node.symbol) {
            groups.entry(l).or_default().push(i);
        }
    }
    let edges = tree.edge_indices();
    let mut total = 0;
    let mut contiguous = 0;
    for members in groups.values().filter(|m| m.len() >= 2) {
        total += 1;
        // In a forest, an induced subgraph on k nodes is connected iff it
        // has k - 1 edges.
        let inside = edges
            .iter()
            .filter(|(a, b)| members.binary_search(a).is_ok() && members.binary_search(b).is_ok())
            .count();
        if inside + 1 == members.len() {
            contiguous += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        contiguous as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{TreeEdge, TreeNode};

    fn tree(nodes: &[&str], edges: &[(&str, &str)]) -> TaxonomyTree {
        let mut nodes: Vec<TreeNode> = nodes
            .iter()
            .map(|s| TreeNode {
                symbol: s.to_string(),
                sector: UNKNOWN_SECTOR.into(),
                industry: UNKNOWN_SECTOR.into(),
            })
            .collect();
        nodes.sort_by(|a, b| a.symbol.cmp(&b.symbol));
        TaxonomyTree {
            nodes,
            edges: edges
                .iter()
                .map(|(a, b)| TreeEdge {
                    source: a.to_string(),
                    target: b.to_string(),
                    weight: 1.0,
                })
                .collect(),
        }
    }

    fn labels(pairs: &[(&str, &str)]) -> SectorLabeling {
        let mut l = SectorLabeling::new();
        for (s, sec) in pairs {
            l.insert(*s, *sec, format!("{sec}-ind"));
        }
        l
    }

    #[test]
    fn single_sector_scores_one() {
        let t = tree(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let l = labels(&[("A", "S"), ("B", "S"), ("C", "S")]);
        assert_eq!(sector_adjacency_score(&t, &l, LabelLevel::Sector), 1.0);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Sector), 1.0);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Industry), 1.0);
    }

    #[test]
    fn star_with_foreign_center_scores_zero() {
        let t = tree(
            &["C", "L1", "L2", "L3"],
            &[("C", "L1"), ("C", "L2"), ("C", "L3")],
        );
        let l = labels(&[("C", "Hub"), ("L1", "Leaf"), ("L2", "Leaf"), ("L3", "Leaf")]);
        assert_eq!(sector_adjacency_score(&t, &l, LabelLevel::Sector), 0.0);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Sector), 0.0);
    }

    #[test]
    fn split_group_on_path() {
        // A1 - B1 - A2: group A is split, singleton group B is not scored.
        let t = tree(&["A1", "A2", "B1"], &[("A1", "B1"), ("A2", "B1")]);
        let l = labels(&[("A1", "A"), ("A2", "A"), ("B1", "B")]);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Sector), 0.0);
        assert_eq!(sector_adjacency_score(&t, &l, LabelLevel::Sector), 0.0);
    }

    #[test]
    fn contiguous_branches() {
        let t = tree(
            &["A1", "A2", "A3", "B1", "B2"],
            &[("A1", "A2"), ("A2", "A3"), ("A2", "B1"), ("B1", "B2")],
        );
        let l = labels(&[
            ("A1", "A"),
            ("A2", "A"),
            ("A3", "A"),
            ("B1", "B"),
            ("B2", "B"),
        ]);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Sector), 1.0);
        assert_eq!(sector_adjacency_score(&t, &l, LabelLevel::Sector), 0.75);
    }

    #[test]
    fn unknown_never_matches() {
        let t = tree(&["X", "Y"], &[("X", "Y")]);
        let l = SectorLabeling::new();
        assert_eq!(sector_adjacency_score(&t, &l, LabelLevel::Sector), 0.0);
        assert_eq!(sector_subtree_score(&t, &l, LabelLevel::Sector), 1.0);
    }
}
