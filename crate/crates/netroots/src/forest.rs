//! Latent spanning forests, arrival orderings and uniform spanning-forest draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

/// Rooted spanning forest stored as parent pointers.
///
/// `parent[u]` is `None` exactly when `u` is a root. Children lists are kept
/// in sync by every mutator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forest {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    n_roots: usize,
}

impl Forest {
    /// Forest of `n` singleton trees.
    pub fn singletons(n: usize) -> Self {
        Forest {
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            n_roots: n,
        }
    }

    /// Builds a forest from a parent array, rejecting cycles and bad indices.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        let mut f = Forest::singletons(n);
        for (u, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == u {
                    return Err(Error::InvalidState(format!("bad parent {p} for node {u}")));
                }
                f.attach(u, p);
            }
        }
        f.check().map_err(Error::InvalidState)?;
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, u: usize) -> Option<usize> {
        self.parent[u]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, u: usize) -> &[usize] {
        &self.children[u]
    }

    pub fn is_root(&self, u: usize) -> bool {
        self.parent[u].is_none()
    }

    pub fn num_trees(&self) -> usize {
        self.n_roots
    }

    pub fn num_edges(&self) -> usize {
        self.n() - self.n_roots
    }

    /// Forest degree (parent edge plus children).
    pub fn degree(&self, u: usize) -> usize {
        self.children[u].len() + usize::from(self.parent[u].is_some())
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.parent[u].is_none()).collect()
    }

    /// Removes the edge from `u` to its parent, making `u` a root.
    pub fn detach(&mut self, u: usize) -> Option<usize> {
        let p = self.parent[u].take()?;
        let pos = self.children[p]
            .iter()
            .position(|&c| c == u)
            .expect("children list out of sync");
        self.children[p].swap_remove(pos);
        self.n_roots += 1;
        Some(p)
    }

    /// Attaches root `u` below `p`. The caller guarantees `p` is outside `u`'s subtree.
    pub fn attach(&mut self, u: usize, p: usize) {
        debug_assert!(self.parent[u].is_none(), "attach on non-root {u}");
        self.parent[u] = Some(p);
        self.children[p].push(u);
        self.n_roots -= 1;
    }

    pub fn root_of(&self, mut u: usize) -> usize {
        while let Some(p) = self.parent[u] {
            u = p;
        }
        u
    }

    /// Makes `u` the root of its tree by reversing the path to the old root.
    pub fn reroot(&mut self, u: usize) {
        let mut path = vec![u];
        let mut x = u;
        while let Some(p) = self.parent[x] {
            path.push(p);
            x = p;
        }
        for w in path.windows(2).rev() {
            let (child, par) = (w[0], w[1]);
            self.detach(child);
            self.attach(par, child);
        }
    }

    /// Nodes of the tree rooted at `root`, in preorder.
    pub fn preorder(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.children[u].iter().rev());
        }
        out
    }

    /// Per-tree node lists (preorder), in increasing order of root index.
    pub fn trees(&self) -> Vec<Vec<usize>> {
        self.roots().into_iter().map(|r| self.preorder(r)).collect()
    }

    /// Root node of each node's tree.
    pub fn tree_ids(&self) -> Vec<usize> {
        let mut id = vec![usize::MAX; self.n()];
        for r in self.roots() {
            for u in self.preorder(r) {
                id[u] = r;
            }
        }
        id
    }

    /// Subtree size of every node under the current rooting.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.n()];
        for r in self.roots() {
            let order = self.preorder(r);
            for &u in order.iter().rev() {
                if let Some(p) = self.parent[u] {
                    size[p] += size[u];
                }
            }
        }
        size
    }

    /// Edges as `(child, parent)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .filter_map(|u| self.parent[u].map(|p| (u, p)))
            .collect()
    }

    /// Sorted undirected edge list, handy as a hashable key.
    pub fn edge_key(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn is_subgraph_of(&self, g: &LabeledGraph) -> bool {
        self.edges().iter().all(|&(u, p)| g.has_edge(u, p))
    }

    /// Checks the structural invariants. Returns a description of the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        let n = self.n();
        let roots = self.parent.iter().filter(|p| p.is_none()).count();
        if roots != self.n_roots {
            return Err(format!("root count {} != cached {}", roots, self.n_roots));
        }
        for u in 0..n {
            for &c in &self.children[u] {
                if self.parent[c] != Some(u) {
                    return Err(format!("child {c} of {u} has parent {:?}", self.parent[c]));
                }
            }
            if let Some(p) = self.parent[u] {
                if !self.children[p].contains(&u) {
                    return Err(format!("{u} missing from children of {p}"));
                }
            }
        }
        let reached: usize = self.roots().iter().map(|&r| self.preorder(r).len()).sum();
        if reached != n {
            return Err(format!("only {reached} of {n} nodes reachable from roots (cycle)"));
        }
        Ok(())
    }
}

/// Bijection between arrival positions (0-based) and nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    pos_to_node: Vec<usize>,
    node_to_pos: Vec<usize>,
}

impl Ordering {
    pub fn identity(n: usize) -> Self {
        Ordering {
            pos_to_node: (0..n).collect(),
            node_to_pos: (0..n).collect(),
        }
    }

    /// Builds an ordering from the node sequence `nodes[0], nodes[1], ...`.
    pub fn from_nodes(nodes: Vec<usize>) -> Result<Self> {
        let n = nodes.len();
        let mut inv = vec![usize::MAX; n];
        for (i, &u) in nodes.iter().enumerate() {
            if u >= n || inv[u] != usize::MAX {
                return Err(Error::InvalidState(format!("not a permutation at position {i}")));
            }
            inv[u] = i;
        }
        Ok(Ordering {
            pos_to_node: nodes,
            node_to_pos: inv,
        })
    }

    pub fn len(&self) -> usize {
        self.pos_to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos_to_node.is_empty()
    }

    pub fn node_at(&self, pos: usize) -> usize {
        self.pos_to_node[pos]
    }

    pub fn position(&self, node: usize) -> usize {
        self.node_to_pos[node]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.pos_to_node
    }

    pub fn swap_positions(&mut self, i: usize, j: usize) {
        self.pos_to_node.swap(i, j);
        self.node_to_pos[self.pos_to_node[i]] = i;
        self.node_to_pos[self.pos_to_node[j]] = j;
    }

    /// Overwrites position `i` with node `u`; the caller restores bijectivity.
    pub(crate) fn set(&mut self, i: usize, u: usize) {
        self.pos_to_node[i] = u;
        self.node_to_pos[u] = i;
    }

    /// Every non-root arrives after its parent.
    pub fn is_history_of(&self, f: &Forest) -> bool {
        self.len() == f.n()
            && (0..f.n()).all(|u| match f.parent(u) {
                Some(p) => self.node_to_pos[p] < self.node_to_pos[u],
                None => true,
            })
    }

    pub fn check(&self) -> bool {
        self.pos_to_node.len() == self.node_to_pos.len()
            && self
                .pos_to_node
                .iter()
                .enumerate()
                .all(|(i, &u)| self.node_to_pos.get(u) == Some(&i))
    }
}

/// Uniform spanning forest of `g`: one uniform spanning tree per connected
/// component (Wilson's loop-erased random walk), rooted at a uniform node.
pub fn uniform_spanning_forest<R: Rng + ?Sized>(g: &LabeledGraph, rng: &mut R) -> Forest {
    let n = g.n();
    let (comp, k) = g.components();
    let mut members = vec![Vec::new(); k];
    for u in 0..n {
        members[comp[u]].push(u);
    }
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    for nodes in &members {
        let root = nodes[rng.random_range(0..nodes.len())];
        in_tree[root] = true;
        for &start in nodes {
            let mut u = start;
            while !in_tree[u] {
                let nb = g.neighbors(u);
                next[u] = nb[rng.random_range(0..nb.len())];
                u = next[u];
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                parent[u] = Some(next[u]);
                u = next[u];
            }
        }
    }
    Forest::from_parents(parent).expect("Wilson walk produced an invalid forest")
}
