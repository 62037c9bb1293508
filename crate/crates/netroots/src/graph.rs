//! Undirected simple graphs over dense node indices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph with external string labels.
///
/// Node indices are dense (`0..n`). Labels are only used at I/O boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    self_loops_dropped: usize,
    duplicates_collapsed: usize,
}

impl LabeledGraph {
    /// Builds a graph on `n` nodes labeled `0..n`. Self-loops are dropped
    /// and duplicates collapsed.
    pub fn from_edges<I>(n: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(labels, edges)
    }

    /// Builds a graph with the given labels (one per node, unique).
    pub fn with_labels<I>(labels: Vec<String>, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        let mut self_loops = 0;
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for n={n}");
            if u == v {
                self_loops += 1;
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut dups = 0;
        for list in adj.iter_mut() {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            dups += before - list.len();
        }
        let mut edges = Vec::new();
        for (u, list) in adj.iter().enumerate() {
            for &v in list {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        LabeledGraph {
            adj,
            edges,
            labels,
            index,
            self_loops_dropped: self_loops,
            // each duplicate was counted once per endpoint
            duplicates_collapsed: dups / 2,
        }
    }

    /// Parses a whitespace-separated edge list.
    ///
    /// Blank lines and lines starting with `#` are skipped. Each remaining line
    /// must hold exactly two tokens.
    pub fn load_edge_list(text: &str) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut raw = Vec::new();
        let mut intern = |tok: &str, labels: &mut Vec<String>| -> usize {
            if let Some(&i) = index.get(tok) {
                return i;
            }
            let i = labels.len();
            labels.push(tok.to_string());
            index.insert(tok.to_string(), i);
            i
        };
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 2 tokens, found {}", toks.len()),
                });
            }
            let u = intern(toks[0], &mut labels);
            let v = intern(toks[1], &mut labels);
            raw.push((u, v));
        }
        let g = Self::with_labels(labels, raw);
        if g.self_loops_dropped > 0 || g.duplicates_collapsed > 0 {
            log::warn!(
                "edge list: dropped {} self-loops, collapsed {} duplicate edges",
                g.self_loops_dropped,
                g.duplicates_collapsed
            );
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    /// Sorted neighbor list of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self, u: usize) -> &str {
        &self.labels[u]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    pub fn duplicates_collapsed(&self) -> usize {
        self.duplicates_collapsed
    }

    /// Connected component id per node and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.components().1 == 1
    }

    /// Renders the graph as an edge list using its labels.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.m() * 12);
        for &(u, v) in &self.edges {
            out.push_str(&self.labels[u]);
            out.push(' ');
            out.push_str(&self.labels[v]);
            out.push('\n');
        }
        out
    }

    /// Same graph with node `u` renamed to `perm[u]`; labels move with their nodes.
    pub fn permuted(&self, perm: &[usize]) -> LabeledGraph {
        let n = self.n();
        let mut labels = vec![String::new(); n];
        for u in 0..n {
            labels[perm[u]] = self.labels[u].clone();
        }
        LabeledGraph::with_labels(labels, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }
}

/// Serializable edge-list form of a graph.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphRecord {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl From<&LabeledGraph> for GraphRecord {
    fn from(g: &LabeledGraph) -> Self {
        GraphRecord {
            labels: g.labels.clone(),
            edges: g.edges.clone(),
        }
    }
}

impl From<GraphRecord> for LabeledGraph {
    fn from(r: GraphRecord) -> Self {
        LabeledGraph::with_labels(r.labels, r.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_list() {
        let g = LabeledGraph::load_edge_list("a b\nb c").unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
    }

    #[test]
    fn drops_self_loops_and_duplicates() {
        let g = LabeledGraph::load_edge_list("a a\na b").unwrap();
        assert_eq!((g.n(), g.m(), g.self_loops_dropped()), (2, 1, 1));
        let g = LabeledGraph::load_edge_list("a b\nb a").unwrap();
        assert_eq!((g.n(), g.m(), g.duplicates_collapsed()), (2, 1, 1));
    }

    #[test]
    fn comments_and_errors() {
        let g = LabeledGraph::load_edge_list("# header\n\nx y\n  # indented\n").unwrap();
        assert_eq!(g.m(), 1);
        match LabeledGraph::load_edge_list("a b\nc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(LabeledGraph::load_edge_list("a b c").is_err());
    }

    #[test]
    fn components_and_roundtrip() {
        let g = LabeledGraph::from_edges(5, [(0, 1), (2, 3)]);
        assert_eq!(g.components().1, 3);
        assert!(!g.is_connected());
        let h = LabeledGraph::load_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(h.m(), 2);
        let rec = GraphRecord::from(&g);
        assert_eq!(LabeledGraph::from(rec), g);
    }
}
