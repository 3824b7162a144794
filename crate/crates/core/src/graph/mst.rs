use super::{TaxonomyTree, TreeEdge, TreeNode, UnionFind, UNKNOWN_SECTOR};
use crate::error::{Error, Result};
use crate::metrics::DistanceMatrix;

/// Kruskal's algorithm on the complete graph of `matrix`.
///
/// Edges are taken in order of `(weight, min symbol, max symbol)`, so equal
/// weights resolve the same way on every run. Nodes come back labeled
/// `UNKNOWN`; see [`TaxonomyTree::with_labels`].
pub fn minimum_spanning_tree(matrix: &DistanceMatrix) -> Result<TaxonomyTree> {
    let n = matrix.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "a spanning tree needs at least 2 symbols, got {n}"
        )));
    }
    let missing = matrix.missing_pairs();
    if !missing.is_empty() {
        let names: Vec<String> = missing
            .iter()
            .map(|&(i, j)| format!("({}, {})", matrix.symbols()[i], matrix.symbols()[j]))
            .collect();
        return Err(Error::validation(format!(
            "distance matrix has missing entries: {}",
            names.join(", ")
        )));
    }

    let symbols = matrix.symbols();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| symbols[a].cmp(&symbols[b]));
    // rank[i] = position of symbol i in sorted order
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = matrix.get(i, j).expect("completeness checked above");
            let (a, b) = (rank[i].min(rank[j]), rank[i].max(rank[j]));
            edges.push((w, a, b));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut uf = UnionFind::new(n);
    let mut chosen = Vec::with_capacity(n - 1);
    for (w, a, b) in edges {
        if uf.union(a, b) {
            chosen.push((a, b, w));
            if chosen.len() == n - 1 {
                break;
            }
        }
    }
    chosen.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));

    let name = |r: usize| symbols[order[r]].clone();
    Ok(TaxonomyTree {
        nodes: (0..n)
            .map(|r| TreeNode {
                symbol: name(r),
                sector: UNKNOWN_SECTOR.to_string(),
                industry: UNKNOWN_SECTOR.to_string(),
            })
            .collect(),
        edges: chosen
            .into_iter()
            .map(|(a, b, weight)| TreeEdge {
                source: name(a),
                target: name(b),
                weight,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricKind;

    fn matrix(symbols: &[&str], w: &[(usize, usize, f64)]) -> DistanceMatrix {
        let n = symbols.len();
        let mut rows = vec![vec![Some(0.0); n]; n];
        for &(i, j, d) in w {
            rows[i][j] = Some(d);
            rows[j][i] = Some(d);
        }
        DistanceMatrix::from_rows(
            symbols.iter().map(|s| s.to_string()).collect(),
            MetricKind::Correlation,
            rows,
            None,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn three_node_example() {
        // Correlation distances live in [0, 2], so the 1/2/3 example is halved.
        let m = matrix(&["A", "B", "C"], &[(0, 1, 0.5), (0, 2, 1.0), (1, 2, 1.5)]);
        let t = minimum_spanning_tree(&m).unwrap();
        let pairs: Vec<(&str, &str)> = t
            .edges
            .iter()
            .map(|e| (e.source.as_str(), e.target.as_str()))
            .collect();
        assert_eq!(pairs, vec![("A", "B"), ("A", "C")]);
        assert_eq!(t.total_weight(), 1.5);
        assert!(t.is_spanning_tree());
    }

    #[test]
    fn ties_break_by_symbol() {
        // Matrix order differs from symbol order; all weights equal.
        let m = matrix(&["C", "A", "B"], &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        let t = minimum_spanning_tree(&m).unwrap();
        assert_eq!(t.edges[0].source, "A");
        assert_eq!(t.edges[0].target, "B");
        assert_eq!(t.edges[1].source, "A");
        assert_eq!(t.edges[1].target, "C");
    }

    #[test]
    fn missing_entries_are_listed() {
        let rows = vec![
            vec![Some(0.0), None, Some(1.0)],
            vec![None, Some(0.0), Some(1.0)],
            vec![Some(1.0), Some(1.0), Some(0.0)],
        ];
        let m = DistanceMatrix::from_rows(
            vec!["A".into(), "B".into(), "C".into()],
            MetricKind::Coherence,
            rows,
            None,
            vec![],
        )
        .unwrap();
        let err = minimum_spanning_tree(&m).unwrap_err();
        assert!(err.to_string().contains("(A, B)"));
        let single = matrix(&["A"], &[]);
        assert!(minimum_spanning_tree(&single).is_err());
    }
}
