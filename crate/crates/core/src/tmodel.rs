//! Semi-plane rooted trees and T-models.
//!
//! A semi-plane rooted tree has internal nodes of two flavors: A-nodes leave
//! their children unordered, C-nodes carry a linear order on them. A T-model
//! of complexity `(n, h)` decorates such a tree of height at most `h` with a
//! leaf coloring `gamma` into `[n]` and one truth table `kappa` per internal
//! node; [`TModel::build`] reads a graph off the leaves: two leaves are
//! adjacent iff the table at their lowest common ancestor accepts their color
//! pair, order-sensitively when that ancestor is a C-node.
//!
//! Height counts vertices, not edges: a single-leaf tree has height 1.
//!
//! The module also provides the three relational encodings of trees (see
//! [`SemiPlaneTree::encode`]), decoding from the weakest one, restrictions
//! `M<X>`, submodels, and isomorphism of models fixing the ground pointwise.

use crate::structure::{Graph, RelStructure};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Opaque node identifier. Leaves of models share ids with graph vertices.
pub type NodeId = String;

/// Node flavor: leaf, unordered internal (A), or ordered internal (C).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "leaf")]
    Leaf,
    A,
    C,
}

/// Errors raised by tree and model operations.
#[derive(Debug, Error)]
pub enum TModelError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("`{0}` is not a leaf of the model")]
    NotALeaf(String),
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("not a valid sigma3 tree encoding: {0}")]
    Sigma3(String),
    #[error("json: {0}")]
    Json(String),
}

// ---------------------------------------------------------------------------
// SemiPlaneTree
// ---------------------------------------------------------------------------

/// Rooted tree with node kinds and child orders at C-nodes.
///
/// The parent map sends the root to itself. An empty tree (no nodes) is the
/// degenerate value returned by restrictions to the empty leaf set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SemiPlaneTree {
    kind: BTreeMap<NodeId, NodeKind>,
    parent: BTreeMap<NodeId, NodeId>,
    child_order: BTreeMap<NodeId, Vec<NodeId>>,
    root: Option<NodeId>,
}

impl SemiPlaneTree {
    /// Creates the empty tree.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Creates a single-node tree (the node is the root and a leaf).
    pub fn leaf(id: &str) -> Self {
        let mut t = Self::empty();
        t.kind.insert(id.to_string(), NodeKind::Leaf);
        t.parent.insert(id.to_string(), id.to_string());
        t.root = Some(id.to_string());
        t
    }

    /// Inserts a fresh node under an existing parent. The node kind may be
    /// upgraded later when children are attached; `child_order` for C-nodes
    /// is the attachment order.
    pub fn attach(&mut self, id: &str, kind: NodeKind, parent: &str) -> Result<(), TModelError> {
        if !self.kind.contains_key(parent) {
            return Err(TModelError::UnknownNode(parent.to_string()));
        }
        self.kind.insert(id.to_string(), kind);
        self.parent.insert(id.to_string(), parent.to_string());
        if self.kind[parent] == NodeKind::C {
            self.child_order
                .entry(parent.to_string())
                .or_default()
                .push(id.to_string());
        }
        Ok(())
    }

    /// Assembles a tree from raw maps; callers are expected to produce
    /// structurally valid data (checked by [`Self::violations`] on demand).
    pub fn from_parts(
        kind: BTreeMap<NodeId, NodeKind>,
        parent: BTreeMap<NodeId, NodeId>,
        child_order: BTreeMap<NodeId, Vec<NodeId>>,
        root: Option<NodeId>,
    ) -> Self {
        SemiPlaneTree { kind, parent, child_order, root }
    }

    /// Reverses the child order at a C-node; no-op elsewhere.
    pub fn reverse_children(&mut self, id: &str) {
        if let Some(seq) = self.child_order.get_mut(id) {
            seq.reverse();
        }
    }

    /// Starts a tree with an internal root node.
    pub fn with_root(id: &str, kind: NodeKind) -> Self {
        let mut t = Self::empty();
        t.kind.insert(id.to_string(), kind);
        t.parent.insert(id.to_string(), id.to_string());
        if kind == NodeKind::C {
            t.child_order.insert(id.to_string(), Vec::new());
        }
        t.root = Some(id.to_string());
        t
    }

    pub fn root(&self) -> Option<&NodeId> {
        self.root.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.kind.contains_key(id)
    }

    pub fn kind_of(&self, id: &str) -> Option<NodeKind> {
        self.kind.get(id).copied()
    }

    /// All node ids, sorted.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.kind.keys()
    }

    pub fn parent_of(&self, id: &str) -> Option<&NodeId> {
        self.parent.get(id)
    }

    /// Children of a node: in stored order for C-nodes, sorted by id for
    /// A-nodes (A-children are semantically unordered).
    pub fn children(&self, id: &str) -> Vec<NodeId> {
        if let Some(seq) = self.child_order.get(id) {
            return seq.clone();
        }
        self.parent
            .iter()
            .filter(|(c, p)| *p == id && *c != id)
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// Leaves in sorted order.
    pub fn leaves(&self) -> BTreeSet<NodeId> {
        self.kind
            .iter()
            .filter(|(_, k)| **k == NodeKind::Leaf)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.kind.get(id) == Some(&NodeKind::Leaf)
    }

    /// Path from `id` up to the root, inclusive on both ends.
    pub fn ancestors(&self, id: &str) -> Vec<NodeId> {
        let mut out = vec![id.to_string()];
        let mut cur = id.to_string();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            out.push(p.clone());
            cur = p.clone();
        }
        out
    }

    /// True iff `a` is an ancestor of `x` (reflexively).
    pub fn is_ancestor(&self, a: &str, x: &str) -> bool {
        self.ancestors(x).iter().any(|p| p == a)
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, x: &str, y: &str) -> Option<NodeId> {
        let xa: BTreeSet<_> = self.ancestors(x).into_iter().collect();
        self.ancestors(y).into_iter().find(|p| xa.contains(p))
    }

    /// The child of `w` on the path toward its proper descendant `x`.
    pub fn step_toward(&self, w: &str, x: &str) -> Option<NodeId> {
        let path = self.ancestors(x);
        let pos = path.iter().position(|p| p == w)?;
        if pos == 0 {
            return None;
        }
        Some(path[pos - 1].clone())
    }

    /// Nodes of the subtree rooted at `id` (including `id`).
    pub fn descendants(&self, id: &str) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.to_string()];
        while let Some(v) = stack.pop() {
            if out.insert(v.clone()) {
                stack.extend(self.children(&v));
            }
        }
        out
    }

    /// Leaves below `id` (a leaf is below itself).
    pub fn leaves_below(&self, id: &str) -> BTreeSet<NodeId> {
        self.descendants(id)
            .into_iter()
            .filter(|v| self.is_leaf(v))
            .collect()
    }

    /// Height as a vertex count: the number of nodes on a longest root-leaf
    /// path. The empty tree has height 0, a single leaf height 1.
    pub fn height(&self) -> usize {
        match &self.root {
            None => 0,
            Some(r) => self.height_below(r),
        }
    }

    fn height_below(&self, id: &str) -> usize {
        1 + self
            .children(id)
            .iter()
            .map(|c| self.height_below(c))
            .max()
            .unwrap_or(0)
    }

    /// Depth of a node in vertices: the root has depth 1.
    pub fn depth(&self, id: &str) -> usize {
        self.ancestors(id).len()
    }

    /// Structural validity: rooted parent map, child counts per kind, and
    /// child orders that are permutations of the C-node children.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.root {
            None => {
                if !self.kind.is_empty() {
                    out.push("no root but nonempty node set".into());
                }
                return out;
            }
            Some(r) => {
                if !self.kind.contains_key(r) {
                    out.push(format!("root `{r}` is not a node"));
                    return out;
                }
                if self.parent.get(r) != Some(r) {
                    out.push(format!("root `{r}` must be its own parent"));
                }
            }
        }
        let root = self.root.clone().expect("checked above");
        for (v, p) in &self.parent {
            if !self.kind.contains_key(v) {
                out.push(format!("parent map mentions unknown node `{v}`"));
            }
            if !self.kind.contains_key(p) {
                out.push(format!("parent of `{v}` is unknown node `{p}`"));
            }
        }
        for v in self.kind.keys() {
            if !self.parent.contains_key(v) {
                out.push(format!("node `{v}` has no parent entry"));
            }
        }
        if !out.is_empty() {
            return out;
        }
        // Reachability: every node must walk up to the root without cycles.
        for v in self.kind.keys() {
            let mut cur = v.clone();
            let mut steps = 0;
            loop {
                if cur == root {
                    break;
                }
                let p = self.parent[&cur].clone();
                if p == cur {
                    out.push(format!("`{cur}` is a non-root fixpoint of the parent map"));
                    break;
                }
                cur = p;
                steps += 1;
                if steps > self.kind.len() {
                    out.push(format!("parent chain from `{v}` never reaches the root"));
                    break;
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        for (v, k) in &self.kind {
            let cs = self.children(v);
            match k {
                NodeKind::Leaf => {
                    if !cs.is_empty() {
                        out.push(format!("leaf `{v}` has children"));
                    }
                }
                NodeKind::A | NodeKind::C => {
                    if cs.is_empty() {
                        out.push(format!("internal node `{v}` has no children"));
                    }
                }
            }
            if *k == NodeKind::C {
                let declared: BTreeSet<_> = self
                    .child_order
                    .get(v)
                    .map(|s| s.iter().cloned().collect())
                    .unwrap_or_default();
                let actual: BTreeSet<_> = self
                    .parent
                    .iter()
                    .filter(|(c, p)| *p == v && *c != v)
                    .map(|(c, _)| c.clone())
                    .collect();
                let order_len = self.child_order.get(v).map(|s| s.len()).unwrap_or(0);
                if declared != actual || order_len != actual.len() {
                    out.push(format!("child order at C-node `{v}` is not a permutation of its children"));
                }
            } else if self.child_order.contains_key(v) {
                out.push(format!("non-C node `{v}` carries a child order"));
            }
        }
        out
    }

    /// The strict order combining ancestry with sibling orders: `x < y` iff
    /// `x` is a proper ancestor of `y`, or `x` and `y` are incomparable and
    /// at their lowest common ancestor (a C-node) the child toward `x`
    /// precedes the child toward `y`.
    pub fn node_lt(&self, x: &str, y: &str) -> bool {
        if x == y || !self.has_node(x) || !self.has_node(y) {
            return false;
        }
        if self.is_ancestor(x, y) {
            return true;
        }
        if self.is_ancestor(y, x) {
            return false;
        }
        let w = match self.lca(x, y) {
            Some(w) => w,
            None => return false,
        };
        if self.kind_of(&w) != Some(NodeKind::C) {
            return false;
        }
        let cx = self.step_toward(&w, x).expect("x below lca");
        let cy = self.step_toward(&w, y).expect("y below lca");
        let order = &self.child_order[&w];
        let px = order.iter().position(|c| *c == cx).expect("child of w");
        let py = order.iter().position(|c| *c == cy).expect("child of w");
        px < py
    }

    /// Relational encoding at one of the three levels.
    ///
    /// - [`SigmaLevel::Sigma1`]: `C` (unary, C-nodes), `Inf` (ternary,
    ///   `Inf(x,y,z)` iff `z` is the lowest common ancestor of `x` and `y`),
    ///   and `Ord` (binary, the strict order among children of a C-node).
    /// - [`SigmaLevel::Sigma2`]: `Lt` (the order of [`Self::node_lt`]) and
    ///   `E` (the symmetric parent-child adjacency).
    /// - [`SigmaLevel::Sigma3`]: `Root` (unary), `E`, and `Ord`.
    pub fn encode(&self, level: SigmaLevel) -> RelStructure {
        let mut sig = BTreeMap::new();
        match level {
            SigmaLevel::Sigma1 => {
                sig.insert("C".to_string(), 1);
                sig.insert("Inf".to_string(), 3);
                sig.insert("Ord".to_string(), 2);
            }
            SigmaLevel::Sigma2 => {
                sig.insert("Lt".to_string(), 2);
                sig.insert("E".to_string(), 2);
            }
            SigmaLevel::Sigma3 => {
                sig.insert("Root".to_string(), 1);
                sig.insert("E".to_string(), 2);
                sig.insert("Ord".to_string(), 2);
            }
        }
        let mut s = RelStructure::new(sig);
        for v in self.kind.keys() {
            s.add_element(v);
        }
        let add = |s: &mut RelStructure, rel: &str, t: Vec<String>| {
            s.add_tuple(rel, t).expect("tuples are valid by construction");
        };
        match level {
            SigmaLevel::Sigma1 => {
                for (v, k) in &self.kind {
                    if *k == NodeKind::C {
                        add(&mut s, "C", vec![v.clone()]);
                    }
                }
                for x in self.kind.keys() {
                    for y in self.kind.keys() {
                        if let Some(z) = self.lca(x, y) {
                            add(&mut s, "Inf", vec![x.clone(), y.clone(), z]);
                        }
                    }
                }
                self.add_sibling_order(&mut s);
            }
            SigmaLevel::Sigma2 => {
                for x in self.kind.keys() {
                    for y in self.kind.keys() {
                        if self.node_lt(x, y) {
                            add(&mut s, "Lt", vec![x.clone(), y.clone()]);
                        }
                    }
                }
                self.add_cover_edges(&mut s);
            }
            SigmaLevel::Sigma3 => {
                if let Some(r) = &self.root {
                    add(&mut s, "Root", vec![r.clone()]);
                }
                self.add_cover_edges(&mut s);
                self.add_sibling_order(&mut s);
            }
        }
        s
    }

    fn add_cover_edges(&self, s: &mut RelStructure) {
        for (v, p) in &self.parent {
            if v != p {
                s.add_tuple("E", vec![v.clone(), p.clone()]).expect("valid");
                s.add_tuple("E", vec![p.clone(), v.clone()]).expect("valid");
            }
        }
    }

    fn add_sibling_order(&self, s: &mut RelStructure) {
        for order in self.child_order.values() {
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    s.add_tuple("Ord", vec![order[i].clone(), order[j].clone()])
                        .expect("valid");
                }
            }
        }
    }

    /// Reconstructs a tree from its weakest encoding (`Root`, `E`, `Ord`).
    ///
    /// The tree is rebuilt by breadth-first search from the root mark, which
    /// reaches every node within `h` levels for a tree of height at most
    /// `h`. A node becomes a C-node iff some pair of its children is
    /// `Ord`-comparable; the orders must then linearly order the children.
    /// An internal node with a single child therefore decodes as an A-node:
    /// the encoding cannot express order on one child, and no leaf pair has
    /// its lowest common ancestor there, so the built graph is unaffected.
    pub fn decode_sigma3(s: &RelStructure, h: usize) -> Result<SemiPlaneTree, TModelError> {
        let roots = s.unary_set("Root");
        if s.domain().is_empty() {
            if roots.is_empty() {
                return Ok(SemiPlaneTree::empty());
            }
            return Err(TModelError::Sigma3("root mark on empty domain".into()));
        }
        if roots.len() != 1 {
            return Err(TModelError::Sigma3(format!(
                "expected exactly one root mark, found {}",
                roots.len()
            )));
        }
        let root = roots.into_iter().next().expect("one root");
        // Symmetrize E defensively; a valid encoding is already symmetric.
        let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for t in s.rel("E") {
            adj.entry(t[0].clone()).or_default().insert(t[1].clone());
            adj.entry(t[1].clone()).or_default().insert(t[0].clone());
        }
        let mut tree = SemiPlaneTree::with_root(&root, NodeKind::A);
        tree.kind.insert(root.clone(), NodeKind::Leaf);
        let mut depth: BTreeMap<String, usize> = BTreeMap::from([(root.clone(), 1)]);
        let mut frontier = vec![root.clone()];
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        while let Some(v) = frontier.pop() {
            let d = depth[&v];
            if d > h {
                return Err(TModelError::Sigma3(format!(
                    "node `{v}` sits deeper than the declared height bound {h}"
                )));
            }
            for w in adj.get(&v).cloned().unwrap_or_default() {
                if w == v {
                    return Err(TModelError::Sigma3(format!("self-edge on `{w}`")));
                }
                if let Some(dw) = depth.get(&w) {
                    // Parent link back is fine; anything else is a cycle or
                    // cross edge and cannot come from a tree.
                    let is_parent = *dw + 1 == d && adj[&w].contains(&v);
                    let ok = is_parent && tree.parent.get(&v) == Some(&w);
                    if !ok && !(d + 1 == *dw && tree.parent.get(&w) == Some(&v)) {
                        return Err(TModelError::Sigma3(format!(
                            "edge {v} - {w} is not a tree edge"
                        )));
                    }
                    continue;
                }
                depth.insert(w.clone(), d + 1);
                tree.kind.insert(w.clone(), NodeKind::Leaf);
                tree.parent.insert(w.clone(), v.clone());
                children.entry(v.clone()).or_default().push(w.clone());
                frontier.push(w.clone());
            }
        }
        if depth.len() != s.domain().len() {
            return Err(TModelError::Sigma3(
                "encoding is not connected: some nodes are unreachable from the root".into(),
            ));
        }
        // Sibling orders decide kinds.
        let ord = s.rel("Ord");
        for (v, cs) in &children {
            let ordered_pairs: Vec<(&String, &String)> = ord
                .iter()
                .filter(|t| cs.contains(&t[0]) && cs.contains(&t[1]))
                .map(|t| (&t[0], &t[1]))
                .collect();
            if ordered_pairs.is_empty() {
                tree.kind.insert(v.clone(), NodeKind::A);
            } else {
                // Require a total strict order on the children.
                let mut seq = cs.clone();
                for a in cs {
                    for b in cs {
                        if a != b {
                            let ab = ord.contains(&vec![a.clone(), b.clone()]);
                            let ba = ord.contains(&vec![b.clone(), a.clone()]);
                            if ab == ba {
                                return Err(TModelError::Sigma3(format!(
                                    "sibling order at `{v}` does not compare `{a}` and `{b}` exactly once"
                                )));
                            }
                        }
                    }
                }
                seq.sort_by(|a, b| {
                    if ord.contains(&vec![a.clone(), b.clone()]) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                });
                tree.kind.insert(v.clone(), NodeKind::C);
                tree.child_order.insert(v.clone(), seq);
            }
        }
        for t in &ord {
            let pa = tree.parent.get(&t[0]);
            let pb = tree.parent.get(&t[1]);
            if pa != pb || pa.map(|p| tree.kind_of(p)) != Some(Some(NodeKind::C)) {
                return Err(TModelError::Sigma3(format!(
                    "order pair ({}, {}) does not relate children of one C-node",
                    t[0], t[1]
                )));
            }
        }
        let v = tree.violations();
        if !v.is_empty() {
            return Err(TModelError::Sigma3(v.join("; ")));
        }
        Ok(tree)
    }
}

/// Encoding level selector for [`SemiPlaneTree::encode`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaLevel {
    Sigma1,
    Sigma2,
    Sigma3,
}

// ---------------------------------------------------------------------------
// Kappa tables
// ---------------------------------------------------------------------------

/// Truth table `[n] x [n] -> {false, true}` attached to an internal node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kappa(pub Vec<Vec<bool>>);

impl Kappa {
    /// All-false table of size `n`.
    pub fn falses(n: usize) -> Self {
        Kappa(vec![vec![false; n]; n])
    }

    /// Table from a closure over 1-based color pairs.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        Kappa((1..=n).map(|i| (1..=n).map(|j| f(i, j)).collect()).collect())
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    /// Entry at 1-based color pair `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.0[i - 1][j - 1]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.size();
        (1..=n).all(|i| (1..=n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_square(&self, n: usize) -> bool {
        self.0.len() == n && self.0.iter().all(|row| row.len() == n)
    }
}

// ---------------------------------------------------------------------------
// TModel
// ---------------------------------------------------------------------------

/// A tree model: semi-plane tree, leaf coloring, and per-node tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TModel {
    tree: SemiPlaneTree,
    gamma: BTreeMap<NodeId, usize>,
    kappa: BTreeMap<NodeId, Kappa>,
    n: usize,
}

impl TModel {
    /// Assembles a model; call [`TModel::validate`] to check invariants.
    pub fn new(
        tree: SemiPlaneTree,
        gamma: BTreeMap<NodeId, usize>,
        kappa: BTreeMap<NodeId, Kappa>,
        n: usize,
    ) -> Self {
        Self { tree, gamma, kappa, n }
    }

    /// The empty model over color budget `n`.
    pub fn empty(n: usize) -> Self {
        Self::new(SemiPlaneTree::empty(), BTreeMap::new(), BTreeMap::new(), n)
    }

    /// Single-leaf model.
    pub fn single(id: &str, color: usize, n: usize) -> Self {
        Self::new(
            SemiPlaneTree::leaf(id),
            BTreeMap::from([(id.to_string(), color)]),
            BTreeMap::new(),
            n,
        )
    }

    pub fn tree(&self) -> &SemiPlaneTree {
        &self.tree
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &BTreeMap<NodeId, usize> {
        &self.gamma
    }

    pub fn color_of(&self, leaf: &str) -> Option<usize> {
        self.gamma.get(leaf).copied()
    }

    pub fn kappa_of(&self, node: &str) -> Option<&Kappa> {
        self.kappa.get(node)
    }

    /// The ground: the leaf set of the tree.
    pub fn ground(&self) -> BTreeSet<NodeId> {
        self.tree.leaves()
    }

    pub fn height(&self) -> usize {
        self.tree.height()
    }

    /// Checks every invariant and reports each violation.
    pub fn validate(&self) -> Vec<String> {
        let mut out = self.tree.violations();
        for leaf in self.tree.leaves() {
            match self.gamma.get(&leaf) {
                None => out.push(format!("leaf `{leaf}` has no color")),
                Some(c) if *c < 1 || *c > self.n => {
                    out.push(format!("leaf `{leaf}` has color {c} outside 1..={}", self.n))
                }
                _ => {}
            }
        }
        for leaf in self.gamma.keys() {
            if !self.tree.is_leaf(leaf) {
                out.push(format!("gamma colors non-leaf `{leaf}`"));
            }
        }
        for v in self.tree.nodes() {
            match self.tree.kind_of(v) {
                Some(NodeKind::A) | Some(NodeKind::C) => match self.kappa.get(v) {
                    None => out.push(format!("internal node `{v}` has no kappa table")),
                    Some(k) => {
                        if !k.is_square(self.n) {
                            out.push(format!("kappa at `{v}` is not {0}x{0}", self.n));
                        } else if self.tree.kind_of(v) == Some(NodeKind::A) && !k.is_symmetric() {
                            out.push(format!("kappa at A-node `{v}` is not symmetric"));
                        }
                    }
                },
                _ => {
                    if self.kappa.contains_key(v) {
                        out.push(format!("leaf `{v}` carries a kappa table"));
                    }
                }
            }
        }
        for v in self.kappa.keys() {
            if !self.tree.has_node(v) {
                out.push(format!("kappa table on unknown node `{v}`"));
            }
        }
        out
    }

    fn ensure_valid(&self) -> Result<(), TModelError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(TModelError::Invalid(v))
        }
    }

    /// Adjacency of two distinct leaves, read at their lowest common
    /// ancestor: the table accepts the (order-sensitive at C-nodes) color
    /// pair in either direction.
    pub fn leaves_adjacent(&self, x: &str, y: &str) -> bool {
        if x == y {
            return false;
        }
        let w = match self.tree.lca(x, y) {
            Some(w) => w,
            None => return false,
        };
        let kw = match self.kappa.get(&w) {
            Some(k) => k,
            None => return false,
        };
        let (cx, cy) = (self.gamma[x], self.gamma[y]);
        match self.tree.kind_of(&w) {
            Some(NodeKind::A) => kw.get(cx, cy) || kw.get(cy, cx),
            Some(NodeKind::C) => {
                if self.tree.node_lt(x, y) {
                    kw.get(cx, cy)
                } else {
                    kw.get(cy, cx)
                }
            }
            _ => false,
        }
    }

    /// Builds the modeled graph on the leaves.
    pub fn build(&self) -> Result<Graph, TModelError> {
        self.ensure_valid()?;
        let leaves: Vec<_> = self.tree.leaves().into_iter().collect();
        let mut g = Graph::new();
        for v in &leaves {
            g.add_vertex(v);
        }
        for i in 0..leaves.len() {
            for j in i + 1..leaves.len() {
                if self.leaves_adjacent(&leaves[i], &leaves[j]) {
                    g.add_edge(&leaves[i], &leaves[j]).expect("vertices added");
                }
            }
        }
        Ok(g)
    }

    /// Restriction `M<X>`: the model induced by the ancestors of `x`.
    /// Internal nodes are never suppressed, so single-child chains survive.
    /// The empty restriction is the empty model.
    pub fn restrict(&self, x: &BTreeSet<NodeId>) -> Result<TModel, TModelError> {
        let leaves = self.tree.leaves();
        for v in x {
            if !leaves.contains(v) {
                return Err(TModelError::NotALeaf(v.clone()));
            }
        }
        if x.is_empty() {
            return Ok(TModel::empty(self.n));
        }
        let mut keep: BTreeSet<NodeId> = BTreeSet::new();
        for v in x {
            keep.extend(self.tree.ancestors(v));
        }
        let mut tree = SemiPlaneTree::empty();
        tree.root = self.tree.root.clone();
        for v in &keep {
            tree.kind.insert(v.clone(), self.tree.kind[v]);
            tree.parent.insert(v.clone(), self.tree.parent[v].clone());
        }
        for (v, order) in &self.tree.child_order {
            if keep.contains(v) {
                let seq: Vec<_> = order.iter().filter(|c| keep.contains(*c)).cloned().collect();
                tree.child_order.insert(v.clone(), seq);
            }
        }
        let gamma = self
            .gamma
            .iter()
            .filter(|(v, _)| x.contains(*v))
            .map(|(v, c)| (v.clone(), *c))
            .collect();
        let kappa = self
            .kappa
            .iter()
            .filter(|(v, _)| keep.contains(*v))
            .map(|(v, k)| (v.clone(), k.clone()))
            .collect();
        Ok(TModel::new(tree, gamma, kappa, self.n))
    }

    /// The submodel induced by the subtree rooted at `u`.
    pub fn subtree_at(&self, u: &str) -> Result<TModel, TModelError> {
        if !self.tree.has_node(u) {
            return Err(TModelError::UnknownNode(u.to_string()));
        }
        let keep = self.tree.descendants(u);
        let mut tree = SemiPlaneTree::empty();
        tree.root = Some(u.to_string());
        for v in &keep {
            tree.kind.insert(v.clone(), self.tree.kind[v]);
            let p = if v == u { u.to_string() } else { self.tree.parent[v].clone() };
            tree.parent.insert(v.clone(), p);
        }
        for (v, order) in &self.tree.child_order {
            if keep.contains(v) {
                tree.child_order.insert(v.clone(), order.clone());
            }
        }
        let gamma = self
            .gamma
            .iter()
            .filter(|(v, _)| keep.contains(*v))
            .map(|(v, c)| (v.clone(), *c))
            .collect();
        let kappa = self
            .kappa
            .iter()
            .filter(|(v, _)| keep.contains(*v))
            .map(|(v, k)| (v.clone(), k.clone()))
            .collect();
        Ok(TModel::new(tree, gamma, kappa, self.n))
    }

    /// Canonical code of the submodel at `node`: leaf ids appear in codes,
    /// A-children are sorted by code, C-children keep their order. Two
    /// models over the same ground are isomorphic by a leaf-fixing map iff
    /// their root codes agree.
    pub fn canonical_code(&self, node: &str) -> String {
        match self.tree.kind_of(node) {
            Some(NodeKind::Leaf) => format!("L({},{})", node, self.gamma[node]),
            Some(k) => {
                let mut codes: Vec<String> = self
                    .tree
                    .children(node)
                    .iter()
                    .map(|c| self.canonical_code(c))
                    .collect();
                let tag = match k {
                    NodeKind::A => {
                        codes.sort();
                        "A"
                    }
                    NodeKind::C => "C",
                    NodeKind::Leaf => unreachable!(),
                };
                let kap = self
                    .kappa
                    .get(node)
                    .map(|k| {
                        k.0.iter()
                            .map(|row| {
                                row.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>()
                            })
                            .collect::<Vec<_>>()
                            .join("|")
                    })
                    .unwrap_or_default();
                format!("{tag}[{kap}]({})", codes.join(","))
            }
            None => String::new(),
        }
    }

    /// Isomorphism fixing the ground pointwise: same color budget, same leaf
    /// set, and a tree isomorphism preserving kinds, colors, tables, and
    /// C-node child orders, with A-node children compared as multisets.
    pub fn iso_fixing_ground(&self, other: &TModel) -> bool {
        if self.n != other.n {
            return false;
        }
        if self.ground() != other.ground() {
            return false;
        }
        match (&self.tree.root, &other.tree.root) {
            (None, None) => true,
            (Some(a), Some(b)) => self.canonical_code(a) == other.canonical_code(b),
            _ => false,
        }
    }

    /// Encodes the model as a relational structure for the formula
    /// evaluator: `Lf` marks leaves, `NA`/`NC` mark node kinds, `Inf` is the
    /// ternary lowest-common-ancestor relation, `Lt` the semi-plane order,
    /// `Gam{i}` the leaf colors, and `Kap{i}_{j}` marks the internal nodes
    /// whose table accepts the color pair `(i, j)`.
    pub fn logic_structure(&self) -> RelStructure {
        let mut sig = BTreeMap::from([
            ("Lf".to_string(), 1),
            ("NA".to_string(), 1),
            ("NC".to_string(), 1),
            ("Inf".to_string(), 3),
            ("Lt".to_string(), 2),
        ]);
        for i in 1..=self.n {
            sig.insert(format!("Gam{i}"), 1);
            for j in 1..=self.n {
                sig.insert(format!("Kap{i}_{j}"), 1);
            }
        }
        let mut s = RelStructure::new(sig);
        for v in self.tree.nodes() {
            s.add_element(v);
        }
        for v in self.tree.nodes() {
            match self.tree.kind_of(v) {
                Some(NodeKind::Leaf) => {
                    s.add_tuple("Lf", vec![v.clone()]).expect("valid");
                    let c = self.gamma[v];
                    s.add_tuple(&format!("Gam{c}"), vec![v.clone()]).expect("valid");
                }
                Some(NodeKind::A) => s.add_tuple("NA", vec![v.clone()]).expect("valid"),
                Some(NodeKind::C) => s.add_tuple("NC", vec![v.clone()]).expect("valid"),
                None => {}
            }
            if let Some(k) = self.kappa.get(v) {
                for i in 1..=self.n {
                    for j in 1..=self.n {
                        if k.get(i, j) {
                            s.add_tuple(&format!("Kap{i}_{j}"), vec![v.clone()]).expect("valid");
                        }
                    }
                }
            }
        }
        for x in self.tree.nodes() {
            for y in self.tree.nodes() {
                if let Some(z) = self.tree.lca(x, y) {
                    s.add_tuple("Inf", vec![x.clone(), y.clone(), z]).expect("valid");
                }
                if self.tree.node_lt(x, y) {
                    s.add_tuple("Lt", vec![x.clone(), y.clone()]).expect("valid");
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        self.to_json_annotated(&BTreeMap::new())
    }

    /// JSON rendering with optional per-node annotations (used by bicotree
    /// exports to tag U/B/O types). Deterministic: nodes sorted by id.
    pub fn to_json_annotated(&self, ntypes: &BTreeMap<NodeId, String>) -> String {
        let nodes: Vec<NodeJson> = self
            .tree
            .kind
            .iter()
            .map(|(id, k)| {
                let parent = self.tree.parent[id].clone();
                let order_index = self
                    .tree
                    .parent_of(id)
                    .filter(|p| *p != id)
                    .and_then(|p| self.tree.child_order.get(p))
                    .and_then(|seq| seq.iter().position(|c| c == id));
                NodeJson {
                    id: id.clone(),
                    kind: *k,
                    parent,
                    order_index,
                    ntype: ntypes.get(id).cloned(),
                }
            })
            .collect();
        let doc = TModelJson {
            n: self.n,
            nodes,
            gamma: self.gamma.clone(),
            kappa: self.kappa.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TModel, TModelError> {
        let doc: TModelJson = serde_json::from_str(text).map_err(|e| TModelError::Json(e.to_string()))?;
        let mut tree = SemiPlaneTree::empty();
        for node in &doc.nodes {
            tree.kind.insert(node.id.clone(), node.kind);
            tree.parent.insert(node.id.clone(), node.parent.clone());
            if node.parent == node.id {
                if tree.root.is_some() && tree.root != Some(node.id.clone()) {
                    return Err(TModelError::Json("multiple roots".into()));
                }
                tree.root = Some(node.id.clone());
            }
        }
        // Child orders from order indices.
        let mut buckets: BTreeMap<NodeId, Vec<(usize, NodeId)>> = BTreeMap::new();
        for node in &doc.nodes {
            if node.parent != node.id {
                if let Some(ix) = node.order_index {
                    buckets.entry(node.parent.clone()).or_default().push((ix, node.id.clone()));
                }
            }
        }
        for (p, mut seq) in buckets {
            seq.sort();
            for w in seq.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(TModelError::Json(format!(
                        "duplicate order_index {} under `{p}`",
                        w[0].0
                    )));
                }
            }
            tree.child_order.insert(p, seq.into_iter().map(|(_, id)| id).collect());
        }
        // C-nodes with one child may omit indices; synthesize their order.
        for (v, k) in tree.kind.clone() {
            if k == NodeKind::C && !tree.child_order.contains_key(&v) {
                let cs = tree.children(&v);
                tree.child_order.insert(v, cs);
            }
        }
        let m = TModel::new(tree, doc.gamma, doc.kappa, doc.n);
        m.ensure_valid()?;
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: NodeId,
    kind: NodeKind,
    parent: NodeId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    order_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    ntype: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TModelJson {
    n: usize,
    nodes: Vec<NodeJson>,
    gamma: BTreeMap<NodeId, usize>,
    kappa: BTreeMap<NodeId, Kappa>,
}

// ---------------------------------------------------------------------------
// Fresh node ids
// ---------------------------------------------------------------------------

/// Generates internal node ids guaranteed not to collide with a given set
/// of taken ids (typically graph vertex ids reused as leaf ids).
pub struct IdGen {
    prefix: String,
    counter: usize,
}

impl IdGen {
    /// Picks the shortest `$`-prefix no taken id starts with.
    pub fn avoiding<'a>(taken: impl Iterator<Item = &'a str> + Clone) -> Self {
        let mut prefix = "$".to_string();
        while taken.clone().any(|t| t.starts_with(&prefix)) {
            prefix.push('$');
        }
        IdGen { prefix, counter: 0 }
    }

    pub fn next_id(&mut self) -> NodeId {
        let id = format!("{}{}", self.prefix, self.counter);
        self.counter += 1;
        id
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
