//! Splits and amalgam models.
//!
//! A split of size `N` and height `h` colors a graph's vertices into cells
//! so that every cell induces a shallow cograph and every pair of cells
//! semi-induces a shallow ordered bicograph. The amalgam glues one cotree
//! per cell and one bicotree per cell pair onto the ground vertex set,
//! attaching each ground vertex to its leaf copies; [`sbuild`] reads the
//! original graph back off the amalgam, and [`coupling_view`] flattens the
//! whole thing into one relational structure whose order reduct is a
//! disjoint union of chains (the child sequences of ordered nodes).

use crate::bicotree::{sob_decompose, Bicotree, BicotreeError, BicotreeType};
use crate::cotree::{cograph_decompose, Cotree, CotreeError};
use crate::structure::{BipartiteGraph, Graph, RelStructure, StructureError, VertexId};
use crate::tmodel::{Kappa, NodeId, NodeKind, SemiPlaneTree, TModel, TModelError};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Errors raised by split and amalgam operations.
#[derive(Debug, Error)]
pub enum SplitError {
    #[error("split verification failed: {}", .0.join("; "))]
    SplitInvalid(Vec<String>),
    #[error("graph does not match the split's graph")]
    GraphMismatch,
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("broken injection system: {0}")]
    BrokenInjection(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Cotree(#[from] CotreeError),
    #[error(transparent)]
    Bicotree(#[from] BicotreeError),
    #[error(transparent)]
    Model(#[from] TModelError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

/// A graph with a cell coloring and the claimed size/height budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub graph: Graph,
    pub gamma: BTreeMap<VertexId, usize>,
    pub size: usize,
    pub height: usize,
}

impl Split {
    pub fn cell(&self, i: usize) -> BTreeSet<VertexId> {
        self.gamma
            .iter()
            .filter(|(_, c)| **c == i)
            .map(|(v, _)| v.clone())
            .collect()
    }

    pub fn verify(&self) -> SplitReport {
        verify_split(&self.graph, &self.gamma, self.size, self.height)
    }
}

/// Outcome of checking a coloring against the split definition. Cell
/// failures carry induced-path witnesses; pair heights are reported but not
/// enforced, since bicotree models of a graph are not unique and the
/// decomposer's height is not necessarily the minimum.
#[derive(Clone, Debug, Default)]
pub struct SplitReport {
    pub issues: Vec<String>,
    pub notes: Vec<String>,
    pub cell_heights: BTreeMap<usize, usize>,
    pub pair_heights: BTreeMap<(usize, usize), usize>,
}

impl SplitReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks that every cell induces a cograph whose clean cotree fits the
/// height budget and every cell pair semi-induces a decomposable bipartite
/// graph. Failures are report entries, never errors.
pub fn verify_split(
    g: &Graph,
    gamma: &BTreeMap<VertexId, usize>,
    size: usize,
    height: usize,
) -> SplitReport {
    let mut report = SplitReport::default();
    for v in g.vertices() {
        match gamma.get(v) {
            None => report.issues.push(format!("vertex `{v}` has no cell")),
            Some(c) if *c < 1 || *c > size => {
                report.issues.push(format!("vertex `{v}` has cell {c} outside 1..={size}"))
            }
            _ => {}
        }
    }
    for v in gamma.keys() {
        if !g.has_vertex(v) {
            report.issues.push(format!("coloring mentions unknown vertex `{v}`"));
        }
    }
    if !report.issues.is_empty() {
        return report;
    }
    let cell = |i: usize| -> BTreeSet<VertexId> {
        gamma
            .iter()
            .filter(|(_, c)| **c == i)
            .map(|(v, _)| v.clone())
            .collect()
    };
    for i in 1..=size {
        let vi = cell(i);
        if vi.is_empty() {
            report.notes.push(format!("cell {i} is empty"));
            continue;
        }
        let gi = g.induced_subgraph(&vi).expect("cell vertices");
        match cograph_decompose(&gi) {
            Ok(t) => {
                let h = t.height();
                report.cell_heights.insert(i, h);
                if h > height {
                    report.issues.push(format!(
                        "cell {i} needs a cotree of height {h}, exceeding the budget {height}"
                    ));
                }
            }
            Err(CotreeError::NotCograph { witness }) => report.issues.push(format!(
                "cell {i} is not a cograph: induced path {}",
                witness.join(" - ")
            )),
            Err(e) => report.issues.push(format!("cell {i}: {e}")),
        }
    }
    for i in 1..=size {
        for j in i + 1..=size {
            let (vi, vj) = (cell(i), cell(j));
            if vi.is_empty() && vj.is_empty() {
                report.notes.push(format!("pair ({i}, {j}) is empty"));
                continue;
            }
            let b = BipartiteGraph::semi_induced(g, &vi, &vj).expect("cell vertices");
            match sob_decompose(&b) {
                Ok(t) => {
                    let h = t.height();
                    report.pair_heights.insert((i, j), h);
                    if h > height {
                        report.notes.push(format!(
                            "pair ({i}, {j}) decomposed at height {h} over the budget {height}; \
                             informational only, bicotree height is not canonical"
                        ));
                    }
                }
                Err(BicotreeError::NotSob { detail, p7 }) => {
                    let witness = p7
                        .map(|p| format!("; induced path {}", p.join(" - ")))
                        .unwrap_or_default();
                    report.issues.push(format!(
                        "pair ({i}, {j}) is not a shallow ordered bicograph: {detail}{witness}"
                    ));
                }
                Err(e) => report.issues.push(format!("pair ({i}, {j}): {e}")),
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Split extraction from a model
// ---------------------------------------------------------------------------

/// A split together with the witness trees extracted from a model.
#[derive(Clone, Debug)]
pub struct TModelSplit {
    pub split: Split,
    pub cell_trees: BTreeMap<usize, Cotree>,
    pub pair_trees: BTreeMap<(usize, usize), Bicotree>,
}

/// Reads a split off a model: the leaf coloring becomes the cell coloring;
/// restricting the tree to one cell (tables narrowed to that color, orders
/// dropped) witnesses the cell cograph; restricting to a cell pair
/// (recolored 1/2, tables classified into U/B/O, reversed-order tables
/// flipped into forward O-nodes) witnesses the pair bicograph. Heights
/// never exceed the model's height.
pub fn split_from_tmodel(m: &TModel) -> Result<TModelSplit, SplitError> {
    let graph = m.build()?;
    let gamma = m.gamma().clone();
    let size = m.n();
    let height = m.height();
    let mut cell_trees = BTreeMap::new();
    let mut pair_trees = BTreeMap::new();
    for i in 1..=size {
        let vi: BTreeSet<VertexId> = gamma
            .iter()
            .filter(|(_, c)| **c == i)
            .map(|(v, _)| v.clone())
            .collect();
        cell_trees.insert(i, Cotree::from_model(cell_tree_model(m, i, &vi)?)?);
    }
    for i in 1..=size {
        for j in i + 1..=size {
            let vij: BTreeSet<VertexId> = gamma
                .iter()
                .filter(|(_, c)| **c == i || **c == j)
                .map(|(v, _)| v.clone())
                .collect();
            pair_trees.insert((i, j), Bicotree::from_model(pair_tree_model(m, i, j, &vij)?)?);
        }
    }
    Ok(TModelSplit {
        split: Split { graph, gamma, size, height },
        cell_trees,
        pair_trees,
    })
}

fn cell_tree_model(m: &TModel, i: usize, vi: &BTreeSet<VertexId>) -> Result<TModel, SplitError> {
    let r = m.restrict(vi)?;
    if r.tree().is_empty() {
        return Ok(TModel::empty(1));
    }
    // Narrow every table to the single entry (i, i); ordered nodes become
    // unordered since a constant table ignores the order.
    let mut kinds = BTreeMap::new();
    let mut parents = BTreeMap::new();
    let mut kappa = BTreeMap::new();
    for v in r.tree().nodes() {
        let kind = match r.tree().kind_of(v).expect("node") {
            NodeKind::Leaf => NodeKind::Leaf,
            _ => NodeKind::A,
        };
        kinds.insert(v.clone(), kind);
        parents.insert(v.clone(), r.tree().parent_of(v).expect("node").clone());
        if let Some(k) = r.kappa_of(v) {
            kappa.insert(v.clone(), Kappa::from_fn(1, |_, _| k.get(i, i)));
        }
    }
    let root = r.tree().root().cloned();
    let tree = SemiPlaneTree::from_parts(kinds, parents, BTreeMap::new(), root);
    let gamma = vi.iter().map(|v| (v.clone(), 1)).collect();
    Ok(TModel::new(tree, gamma, kappa, 1))
}

fn pair_tree_model(
    m: &TModel,
    i: usize,
    j: usize,
    vij: &BTreeSet<VertexId>,
) -> Result<TModel, SplitError> {
    let r = m.restrict(vij)?;
    if r.tree().is_empty() {
        return Ok(TModel::empty(2));
    }
    let mut kinds = BTreeMap::new();
    let mut parents = BTreeMap::new();
    let mut orders = BTreeMap::new();
    let mut kappa = BTreeMap::new();
    for v in r.tree().nodes() {
        parents.insert(v.clone(), r.tree().parent_of(v).expect("node").clone());
        match r.tree().kind_of(v).expect("node") {
            NodeKind::Leaf => {
                kinds.insert(v.clone(), NodeKind::Leaf);
            }
            kind => {
                let k = r.kappa_of(v).expect("internal node");
                let (fwd, bwd) = (k.get(i, j), k.get(j, i));
                let (ty, reverse) = match (fwd, bwd) {
                    (false, false) => (BicotreeType::U, false),
                    (true, true) => (BicotreeType::B, false),
                    (true, false) => (BicotreeType::O, false),
                    (false, true) => (BicotreeType::O, true),
                };
                debug_assert!(
                    kind == NodeKind::C || fwd == bwd,
                    "unordered nodes carry symmetric tables"
                );
                let (table, node_kind) = match ty {
                    BicotreeType::U => (crate::bicotree::kappa_u(), NodeKind::A),
                    BicotreeType::B => (crate::bicotree::kappa_b(), NodeKind::A),
                    BicotreeType::O => (crate::bicotree::kappa_o(), NodeKind::C),
                };
                kinds.insert(v.clone(), node_kind);
                kappa.insert(v.clone(), table);
                if node_kind == NodeKind::C {
                    let mut seq = r.tree().children(v);
                    if reverse {
                        seq.reverse();
                    }
                    orders.insert(v.clone(), seq);
                }
            }
        }
    }
    let root = r.tree().root().cloned();
    let tree = SemiPlaneTree::from_parts(kinds, parents, orders, root);
    let gamma = vij
        .iter()
        .map(|v| {
            let c = m.color_of(v).expect("leaf of m");
            (v.clone(), if c == i { 1 } else { 2 })
        })
        .collect();
    Ok(TModel::new(tree, gamma, kappa, 2))
}

// ---------------------------------------------------------------------------
// Amalgam
// ---------------------------------------------------------------------------

/// The glued model: ground vertices, one tree per cell and per cell pair
/// (node ids namespaced away from the ground), explicit leaf injections,
/// and explicit attachment edges from each ground vertex to its copies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Amalgam {
    ground: BTreeSet<VertexId>,
    gamma: BTreeMap<VertexId, usize>,
    size: usize,
    cell_trees: BTreeMap<usize, TModel>,
    pair_trees: BTreeMap<(usize, usize), TModel>,
    inj_cell: BTreeMap<VertexId, NodeId>,
    inj_pair: BTreeMap<(usize, usize), BTreeMap<VertexId, NodeId>>,
    attachments: BTreeSet<(VertexId, NodeId)>,
}

impl Amalgam {
    pub fn ground(&self) -> &BTreeSet<VertexId> {
        &self.ground
    }

    pub fn gamma(&self) -> &BTreeMap<VertexId, usize> {
        &self.gamma
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell_tree(&self, i: usize) -> Option<&TModel> {
        self.cell_trees.get(&i)
    }

    pub fn pair_tree(&self, i: usize, j: usize) -> Option<&TModel> {
        self.pair_trees.get(&(i.min(j), i.max(j)))
    }

    /// Leaf copy of a ground vertex inside its cell tree.
    pub fn cell_leaf(&self, v: &str) -> Option<&NodeId> {
        self.inj_cell.get(v)
    }

    /// Leaf copy of a ground vertex inside a pair tree it belongs to.
    pub fn pair_leaf(&self, i: usize, j: usize, v: &str) -> Option<&NodeId> {
        self.inj_pair.get(&(i.min(j), i.max(j)))?.get(v)
    }

    pub fn attachments(&self) -> &BTreeSet<(VertexId, NodeId)> {
        &self.attachments
    }

    /// Checks the injection system: every ground vertex has a leaf copy in
    /// its cell tree and in every pair tree of its cell, copies are leaves
    /// with the right colors, the maps are bijections onto the leaf sets,
    /// and the attachment edges are exactly the copy links.
    pub fn validate(&self) -> Result<(), SplitError> {
        let broken = |msg: String| Err(SplitError::BrokenInjection(msg));
        let mut expected_attach: BTreeSet<(VertexId, NodeId)> = BTreeSet::new();
        for i in 1..=self.size {
            let vi: BTreeSet<&VertexId> =
                self.ground.iter().filter(|v| self.gamma.get(*v) == Some(&i)).collect();
            let tree = match self.cell_trees.get(&i) {
                Some(t) => t,
                None => return broken(format!("missing cell tree {i}")),
            };
            let mut leaves = tree.ground();
            for v in &vi {
                match self.inj_cell.get(*v) {
                    None => return broken(format!("vertex `{v}` has no cell copy")),
                    Some(leaf) => {
                        if !leaves.remove(leaf) {
                            return broken(format!(
                                "cell copy of `{v}` is not a fresh leaf of cell tree {i}"
                            ));
                        }
                        expected_attach.insert(((*v).clone(), leaf.clone()));
                    }
                }
            }
            if !leaves.is_empty() {
                return broken(format!("cell tree {i} has unmatched leaves"));
            }
        }
        for i in 1..=self.size {
            for j in i + 1..=self.size {
                let vij: BTreeSet<&VertexId> = self
                    .ground
                    .iter()
                    .filter(|v| matches!(self.gamma.get(*v), Some(c) if *c == i || *c == j))
                    .collect();
                let tree = match self.pair_trees.get(&(i, j)) {
                    Some(t) => t,
                    None => return broken(format!("missing pair tree ({i}, {j})")),
                };
                let inj = self.inj_pair.get(&(i, j)).cloned().unwrap_or_default();
                let mut leaves = tree.ground();
                for v in &vij {
                    match inj.get(*v) {
                        None => return broken(format!("vertex `{v}` has no copy in pair ({i}, {j})")),
                        Some(leaf) => {
                            if !leaves.remove(leaf) {
                                return broken(format!(
                                    "pair copy of `{v}` is not a fresh leaf of pair tree ({i}, {j})"
                                ));
                            }
                            let want = if self.gamma[*v] == i { 1 } else { 2 };
                            if tree.color_of(leaf) != Some(want) {
                                return broken(format!(
                                    "pair copy of `{v}` has the wrong color in pair tree ({i}, {j})"
                                ));
                            }
                            expected_attach.insert(((*v).clone(), leaf.clone()));
                        }
                    }
                }
                if !leaves.is_empty() {
                    return broken(format!("pair tree ({i}, {j}) has unmatched leaves"));
                }
            }
        }
        if expected_attach != self.attachments {
            return broken("attachment edges do not match the injections".into());
        }
        Ok(())
    }
}

fn namespace_prefix(taken: &BTreeSet<VertexId>, tag: &str) -> String {
    let mut bars = "_".to_string();
    while taken.iter().any(|v| v.starts_with(&bars)) {
        bars.push('_');
    }
    format!("{bars}{tag}:")
}

fn prefix_model(m: &TModel, prefix: &str) -> TModel {
    let t = m.tree();
    let ren = |v: &str| format!("{prefix}{v}");
    let mut kinds = BTreeMap::new();
    let mut parents = BTreeMap::new();
    let mut orders = BTreeMap::new();
    for v in t.nodes() {
        kinds.insert(ren(v), t.kind_of(v).expect("node"));
        parents.insert(ren(v), ren(t.parent_of(v).expect("node")));
        if t.kind_of(v) == Some(NodeKind::C) {
            orders.insert(ren(v), t.children(v).iter().map(|c| ren(c)).collect());
        }
    }
    let tree = SemiPlaneTree::from_parts(kinds, parents, orders, t.root().map(|r| ren(r)));
    let gamma = m.gamma().iter().map(|(v, c)| (ren(v), *c)).collect();
    let kappa = t
        .nodes()
        .filter_map(|v| m.kappa_of(v).map(|k| (ren(v), k.clone())))
        .collect();
    TModel::new(tree, gamma, kappa, m.n())
}

/// Decomposes every cell and cell pair of a valid split and glues the
/// resulting clean trees onto the ground.
pub fn amalgam_build(g: &Graph, split: &Split) -> Result<Amalgam, SplitError> {
    if *g != split.graph {
        return Err(SplitError::GraphMismatch);
    }
    let report = split.verify();
    if !report.passed() {
        return Err(SplitError::SplitInvalid(report.issues));
    }
    let ground: BTreeSet<VertexId> = g.vertices().clone();
    let mut cell_trees = BTreeMap::new();
    let mut pair_trees = BTreeMap::new();
    let mut inj_cell = BTreeMap::new();
    let mut inj_pair = BTreeMap::new();
    let mut attachments = BTreeSet::new();
    for i in 1..=split.size {
        let vi = split.cell(i);
        let prefix = namespace_prefix(&ground, &format!("c{i}"));
        let model = if vi.is_empty() {
            TModel::empty(1)
        } else {
            let gi = g.induced_subgraph(&vi)?;
            prefix_model(cograph_decompose(&gi)?.model(), &prefix)
        };
        for v in &vi {
            let leaf = format!("{prefix}{v}");
            inj_cell.insert(v.clone(), leaf.clone());
            attachments.insert((v.clone(), leaf));
        }
        cell_trees.insert(i, model);
    }
    for i in 1..=split.size {
        for j in i + 1..=split.size {
            let (vi, vj) = (split.cell(i), split.cell(j));
            let prefix = namespace_prefix(&ground, &format!("p{i}_{j}"));
            let union: BTreeSet<VertexId> = vi.union(&vj).cloned().collect();
            let model = if union.is_empty() {
                TModel::empty(2)
            } else {
                let b = BipartiteGraph::semi_induced(g, &vi, &vj)?;
                prefix_model(sob_decompose(&b)?.model(), &prefix)
            };
            let mut inj = BTreeMap::new();
            for v in &union {
                let leaf = format!("{prefix}{v}");
                inj.insert(v.clone(), leaf.clone());
                attachments.insert((v.clone(), leaf));
            }
            inj_pair.insert((i, j), inj);
            pair_trees.insert((i, j), model);
        }
    }
    let a = Amalgam {
        ground,
        gamma: split.gamma.clone(),
        size: split.size,
        cell_trees,
        pair_trees,
        inj_cell,
        inj_pair,
        attachments,
    };
    a.validate()?;
    Ok(a)
}

/// Reads the graph back: same-cell adjacency through the cell tree, cross-
/// cell adjacency through the pair tree, always at the leaf copies.
pub fn sbuild(a: &Amalgam) -> Result<Graph, SplitError> {
    a.validate()?;
    let mut g = Graph::new();
    for v in &a.ground {
        g.add_vertex(v);
    }
    let verts: Vec<&VertexId> = a.ground.iter().collect();
    for (p, x) in verts.iter().enumerate() {
        for y in verts.iter().skip(p + 1) {
            let (ci, cj) = (a.gamma[*x], a.gamma[*y]);
            let adjacent = if ci == cj {
                let tree = a.cell_trees.get(&ci).expect("validated");
                tree.leaves_adjacent(&a.inj_cell[*x], &a.inj_cell[*y])
            } else {
                let key = (ci.min(cj), ci.max(cj));
                let tree = a.pair_trees.get(&key).expect("validated");
                let inj = &a.inj_pair[&key];
                tree.leaves_adjacent(&inj[*x], &inj[*y])
            };
            if adjacent {
                g.add_edge(x, y).expect("vertices added");
            }
        }
    }
    Ok(g)
}

/// Restricts every component of the amalgam to a ground subset.
pub fn amalgam_restrict(a: &Amalgam, w: &BTreeSet<VertexId>) -> Result<Amalgam, SplitError> {
    for v in w {
        if !a.ground.contains(v) {
            return Err(SplitError::UnknownVertex(v.clone()));
        }
    }
    let mut cell_trees = BTreeMap::new();
    let mut inj_cell = BTreeMap::new();
    let mut attachments = BTreeSet::new();
    for (i, tree) in &a.cell_trees {
        let keep: BTreeSet<NodeId> = w
            .iter()
            .filter(|v| a.gamma.get(*v) == Some(i))
            .map(|v| a.inj_cell[v].clone())
            .collect();
        cell_trees.insert(*i, tree.restrict(&keep)?);
    }
    let mut pair_trees = BTreeMap::new();
    let mut inj_pair = BTreeMap::new();
    for (key, tree) in &a.pair_trees {
        let inj = &a.inj_pair[key];
        let keep: BTreeSet<NodeId> = w
            .iter()
            .filter(|v| inj.contains_key(*v))
            .map(|v| inj[v].clone())
            .collect();
        pair_trees.insert(*key, tree.restrict(&keep)?);
        let sub: BTreeMap<VertexId, NodeId> = inj
            .iter()
            .filter(|(v, _)| w.contains(*v))
            .map(|(v, l)| (v.clone(), l.clone()))
            .collect();
        for (v, l) in &sub {
            attachments.insert((v.clone(), l.clone()));
        }
        inj_pair.insert(*key, sub);
    }
    for (v, l) in &a.inj_cell {
        if w.contains(v) {
            inj_cell.insert(v.clone(), l.clone());
            attachments.insert((v.clone(), l.clone()));
        }
    }
    Ok(Amalgam {
        ground: w.clone(),
        gamma: a
            .gamma
            .iter()
            .filter(|(v, _)| w.contains(*v))
            .map(|(v, c)| (v.clone(), *c))
            .collect(),
        size: a.size,
        cell_trees,
        pair_trees,
        inj_cell,
        inj_pair,
        attachments,
    })
}

/// Rebuilds an amalgam on a ground subset with replacement trees, for
/// constructions that restructure the trees rather than restrict them.
///
/// The replacement models must keep the original leaf naming: every kept
/// vertex appears under the same copy ids, so injections and attachments
/// carry over by filtering. The result is validated before it is returned.
pub fn amalgam_reshape(
    a: &Amalgam,
    w: &BTreeSet<VertexId>,
    cell_trees: BTreeMap<usize, TModel>,
    pair_trees: BTreeMap<(usize, usize), TModel>,
) -> Result<Amalgam, SplitError> {
    for v in w {
        if !a.ground.contains(v) {
            return Err(SplitError::UnknownVertex(v.clone()));
        }
    }
    let mut inj_cell = BTreeMap::new();
    let mut inj_pair = BTreeMap::new();
    let mut attachments = BTreeSet::new();
    for (v, l) in &a.inj_cell {
        if w.contains(v) {
            inj_cell.insert(v.clone(), l.clone());
            attachments.insert((v.clone(), l.clone()));
        }
    }
    for (key, inj) in &a.inj_pair {
        let sub: BTreeMap<VertexId, NodeId> = inj
            .iter()
            .filter(|(v, _)| w.contains(*v))
            .map(|(v, l)| (v.clone(), l.clone()))
            .collect();
        for (v, l) in &sub {
            attachments.insert((v.clone(), l.clone()));
        }
        inj_pair.insert(*key, sub);
    }
    let out = Amalgam {
        ground: w.clone(),
        gamma: a
            .gamma
            .iter()
            .filter(|(v, _)| w.contains(*v))
            .map(|(v, c)| (v.clone(), *c))
            .collect(),
        size: a.size,
        cell_trees,
        pair_trees,
        inj_cell,
        inj_pair,
        attachments,
    };
    out.validate()?;
    Ok(out)
}

/// Flattens the amalgam into one relational structure: `E` holds the tree
/// edges plus the attachment edges (symmetric), `Lt` chains the children of
/// each ordered node (a disjoint union of linear orders), `Gr` marks the
/// ground, `L{i}` the cells, `Lf` the tree leaves, and `TU`/`TJ`/`TB`/`TO`
/// the internal node types.
pub fn coupling_view(a: &Amalgam) -> RelStructure {
    let mut sig = BTreeMap::from([
        ("E".to_string(), 2),
        ("Lt".to_string(), 2),
        ("Gr".to_string(), 1),
        ("Lf".to_string(), 1),
        ("TU".to_string(), 1),
        ("TJ".to_string(), 1),
        ("TB".to_string(), 1),
        ("TO".to_string(), 1),
    ]);
    for i in 1..=a.size {
        sig.insert(format!("L{i}"), 1);
    }
    let mut s = RelStructure::new(sig);
    for v in &a.ground {
        s.add_element(v);
        s.add_tuple("Gr", vec![v.clone()]).expect("valid");
        let i = a.gamma[v];
        s.add_tuple(&format!("L{i}"), vec![v.clone()]).expect("valid");
    }
    let mut add_tree = |m: &TModel, is_pair: bool| {
        let t = m.tree();
        for v in t.nodes() {
            s.add_element(v);
        }
        for v in t.nodes() {
            match t.kind_of(v).expect("node") {
                NodeKind::Leaf => s.add_tuple("Lf", vec![v.clone()]).expect("valid"),
                _ => {
                    let k = m.kappa_of(v).expect("internal node");
                    let mark = if is_pair {
                        match crate::bicotree::classify_table(k).expect("bicotree table") {
                            BicotreeType::U => "TU",
                            BicotreeType::B => "TB",
                            BicotreeType::O => "TO",
                        }
                    } else if k.get(1, 1) {
                        "TJ"
                    } else {
                        "TU"
                    };
                    s.add_tuple(mark, vec![v.clone()]).expect("valid");
                }
            }
            let p = t.parent_of(v).expect("node");
            if p != v {
                s.add_tuple("E", vec![v.clone(), p.clone()]).expect("valid");
                s.add_tuple("E", vec![p.clone(), v.clone()]).expect("valid");
            }
            if t.kind_of(v) == Some(NodeKind::C) {
                let seq = t.children(v);
                for x in 0..seq.len() {
                    for y in x + 1..seq.len() {
                        s.add_tuple("Lt", vec![seq[x].clone(), seq[y].clone()]).expect("valid");
                    }
                }
            }
        }
    };
    for tree in a.cell_trees.values() {
        add_tree(tree, false);
    }
    for tree in a.pair_trees.values() {
        add_tree(tree, true);
    }
    for (v, l) in &a.attachments {
        s.add_tuple("E", vec![v.clone(), l.clone()]).expect("valid");
        s.add_tuple("E", vec![l.clone(), v.clone()]).expect("valid");
    }
    s
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

impl Amalgam {
    pub fn to_json(&self) -> String {
        let trees = |m: &BTreeMap<usize, TModel>| -> Value {
            Value::Object(
                m.iter()
                    .map(|(i, t)| {
                        (i.to_string(), serde_json::from_str(&t.to_json()).expect("model json"))
                    })
                    .collect(),
            )
        };
        let pair_key = |(i, j): &(usize, usize)| format!("{i},{j}");
        let doc = json!({
            "size": self.size,
            "ground": self.ground.iter().collect::<Vec<_>>(),
            "gamma": self.gamma,
            "cell_trees": trees(&self.cell_trees),
            "pair_trees": Value::Object(
                self.pair_trees
                    .iter()
                    .map(|(k, t)| {
                        (pair_key(k), serde_json::from_str(&t.to_json()).expect("model json"))
                    })
                    .collect(),
            ),
            "inj_cell": self.inj_cell,
            "inj_pair": Value::Object(
                self.inj_pair
                    .iter()
                    .map(|(k, m)| (pair_key(k), serde_json::to_value(m).expect("map json")))
                    .collect(),
            ),
            "attachments": self.attachments.iter().collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("amalgam serializes")
    }

    pub fn from_json(text: &str) -> Result<Amalgam, SplitError> {
        let err = |msg: &str| SplitError::Json(msg.to_string());
        let doc: Value = serde_json::from_str(text).map_err(|e| SplitError::Json(e.to_string()))?;
        let size = doc["size"].as_u64().ok_or_else(|| err("missing size"))? as usize;
        let ground: BTreeSet<VertexId> = serde_json::from_value(doc["ground"].clone())
            .map_err(|e| SplitError::Json(e.to_string()))?;
        let gamma: BTreeMap<VertexId, usize> = serde_json::from_value(doc["gamma"].clone())
            .map_err(|e| SplitError::Json(e.to_string()))?;
        let parse_pair_key = |k: &str| -> Result<(usize, usize), SplitError> {
            let (i, j) = k.split_once(',').ok_or_else(|| err("bad pair key"))?;
            Ok((
                i.parse().map_err(|_| err("bad pair key"))?,
                j.parse().map_err(|_| err("bad pair key"))?,
            ))
        };
        let tree_map = |v: &Value| -> Result<BTreeMap<String, TModel>, SplitError> {
            let obj = v.as_object().ok_or_else(|| err("expected a tree map"))?;
            obj.iter()
                .map(|(k, t)| {
                    let text = serde_json::to_string(t).expect("value serializes");
                    Ok((k.clone(), TModel::from_json(&text)?))
                })
                .collect()
        };
        let mut cell_trees = BTreeMap::new();
        for (k, t) in tree_map(&doc["cell_trees"])? {
            cell_trees.insert(k.parse::<usize>().map_err(|_| err("bad cell key"))?, t);
        }
        let mut pair_trees = BTreeMap::new();
        for (k, t) in tree_map(&doc["pair_trees"])? {
            pair_trees.insert(parse_pair_key(&k)?, t);
        }
        let inj_cell: BTreeMap<VertexId, NodeId> = serde_json::from_value(doc["inj_cell"].clone())
            .map_err(|e| SplitError::Json(e.to_string()))?;
        let mut inj_pair = BTreeMap::new();
        let inj_obj = doc["inj_pair"].as_object().ok_or_else(|| err("missing inj_pair"))?;
        for (k, v) in inj_obj {
            let m: BTreeMap<VertexId, NodeId> = serde_json::from_value(v.clone())
                .map_err(|e| SplitError::Json(e.to_string()))?;
            inj_pair.insert(parse_pair_key(k)?, m);
        }
        let attachments: BTreeSet<(VertexId, NodeId)> =
            serde_json::from_value(doc["attachments"].clone())
                .map_err(|e| SplitError::Json(e.to_string()))?;
        let a = Amalgam {
            ground,
            gamma,
            size,
            cell_trees,
            pair_trees,
            inj_cell,
            inj_pair,
            attachments,
        };
        a.validate()?;
        Ok(a)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{complete_graph, cycle_graph, path_graph, vset};
    use crate::tmodel::Kappa;

    fn alternating_c4() -> (Graph, Split) {
        let g = cycle_graph(&["a", "b", "c", "d"]);
        let gamma = BTreeMap::from([
            ("a".to_string(), 1),
            ("b".to_string(), 2),
            ("c".to_string(), 1),
            ("d".to_string(), 2),
        ]);
        let split = Split { graph: g.clone(), gamma, size: 2, height: 2 };
        (g, split)
    }

    #[test]
    fn verify_split_accepts_alternating_cycle() {
        let (_, split) = alternating_c4();
        let report = split.verify();
        assert!(report.passed(), "{:?}", report.issues);
        assert_eq!(report.cell_heights[&1], 2, "edgeless pair of vertices");
        assert!(report.pair_heights.contains_key(&(1, 2)));
    }

    #[test]
    fn verify_split_flags_monochromatic_four_path() {
        let g = path_graph(&["p", "q", "r", "s"]);
        let gamma: BTreeMap<_, _> = g.vertices().iter().map(|v| (v.clone(), 1)).collect();
        let report = verify_split(&g, &gamma, 1, 4);
        assert!(!report.passed());
        assert!(report.issues[0].contains("not a cograph"));
        assert!(report.issues[0].contains(" - "), "witness path listed");
    }

    #[test]
    fn verify_split_accepts_the_empty_graph() {
        let report = verify_split(&Graph::new(), &BTreeMap::new(), 2, 1);
        assert!(report.passed());
        assert!(report.notes.iter().any(|n| n.contains("empty")));
    }

    #[test]
    fn verify_split_flags_missing_and_out_of_range_colors() {
        let g = complete_graph(&["x", "y"]);
        let gamma = BTreeMap::from([("x".to_string(), 5)]);
        let report = verify_split(&g, &gamma, 2, 3);
        assert_eq!(report.issues.len(), 2);
    }

    fn half_graph_tmodel() -> TModel {
        // C-root over a1, b1, a2, b2 with the order-sensitive table.
        let mut tree = SemiPlaneTree::with_root("r", NodeKind::C);
        for leaf in ["a1", "b1", "a2", "b2"] {
            tree.attach(leaf, NodeKind::Leaf, "r").unwrap();
        }
        let gamma = BTreeMap::from([
            ("a1".to_string(), 1),
            ("b1".to_string(), 2),
            ("a2".to_string(), 1),
            ("b2".to_string(), 2),
        ]);
        let kappa = BTreeMap::from([("r".to_string(), Kappa::from_fn(2, |i, j| i == 1 && j == 2))]);
        TModel::new(tree, gamma, kappa, 2)
    }

    #[test]
    fn split_from_single_color_model_is_a_cotree_skeleton() {
        let mut tree = SemiPlaneTree::with_root("r", NodeKind::A);
        tree.attach("x", NodeKind::Leaf, "r").unwrap();
        tree.attach("y", NodeKind::Leaf, "r").unwrap();
        let gamma = BTreeMap::from([("x".to_string(), 1), ("y".to_string(), 1)]);
        let kappa = BTreeMap::from([("r".to_string(), Kappa::from_fn(1, |_, _| true))]);
        let m = TModel::new(tree, gamma, kappa, 1);
        let s = split_from_tmodel(&m).unwrap();
        assert_eq!(s.split.size, 1);
        let cell = &s.cell_trees[&1];
        assert_eq!(cell.build().unwrap(), m.build().unwrap());
        assert!(s.pair_trees.is_empty());
    }

    #[test]
    fn split_from_tmodel_passes_verification_and_matches_semi_induced() {
        let m = half_graph_tmodel();
        let s = split_from_tmodel(&m).unwrap();
        assert!(s.split.verify().passed());
        let g = m.build().unwrap();
        let pair = &s.pair_trees[&(1, 2)];
        let expected = BipartiteGraph::semi_induced(&g, &s.split.cell(1), &s.split.cell(2)).unwrap();
        assert_eq!(pair.build_bipartite().unwrap().graph(), expected.graph());
        assert!(pair.height() <= m.height());
        for (i, cell) in &s.cell_trees {
            assert!(cell.height() <= m.height(), "cell {i}");
        }
    }

    #[test]
    fn reversed_order_tables_flip_into_forward_o_nodes() {
        // Same tree as the half graph but with the table transposed: the
        // pair tree must reverse the children and keep the same graph.
        let mut tree = SemiPlaneTree::with_root("r", NodeKind::C);
        for leaf in ["a1", "b1", "a2", "b2"] {
            tree.attach(leaf, NodeKind::Leaf, "r").unwrap();
        }
        let gamma = BTreeMap::from([
            ("a1".to_string(), 1),
            ("b1".to_string(), 2),
            ("a2".to_string(), 1),
            ("b2".to_string(), 2),
        ]);
        let kappa = BTreeMap::from([("r".to_string(), Kappa::from_fn(2, |i, j| i == 2 && j == 1))]);
        let m = TModel::new(tree, gamma, kappa, 2);
        let g = m.build().unwrap();
        let s = split_from_tmodel(&m).unwrap();
        let pair = &s.pair_trees[&(1, 2)];
        let root = pair.model().tree().root().unwrap().clone();
        assert_eq!(pair.type_of(&root), Some(BicotreeType::O));
        assert_eq!(
            pair.model().tree().children(&root),
            vec!["b2", "a2", "b1", "a1"],
            "children reversed"
        );
        let expected = BipartiteGraph::semi_induced(&g, &s.split.cell(1), &s.split.cell(2)).unwrap();
        assert_eq!(pair.build_bipartite().unwrap().graph(), expected.graph());
    }

    #[test]
    fn amalgam_round_trips_the_alternating_cycle() {
        let (g, split) = alternating_c4();
        let a = amalgam_build(&g, &split).unwrap();
        assert_eq!(sbuild(&a).unwrap(), g);
        // Two edgeless cells and one complete-cross pair.
        assert_eq!(a.cell_tree(1).unwrap().build().unwrap().edge_count(), 0);
        assert_eq!(a.cell_tree(2).unwrap().build().unwrap().edge_count(), 0);
        let pair = Bicotree::from_model(a.pair_tree(1, 2).unwrap().clone()).unwrap();
        let root = pair.model().tree().root().unwrap().clone();
        assert_eq!(pair.type_of(&root), Some(BicotreeType::B));
    }

    #[test]
    fn amalgam_of_k1_with_a_spare_cell_has_three_elements() {
        let g = complete_graph(&["v"]);
        let split = Split {
            graph: g.clone(),
            gamma: BTreeMap::from([("v".to_string(), 1)]),
            size: 2,
            height: 1,
        };
        let a = amalgam_build(&g, &split).unwrap();
        let s = coupling_view(&a);
        assert_eq!(s.domain().len(), 3, "vertex plus its two leaf copies");
        assert_eq!(sbuild(&a).unwrap(), g);
    }

    #[test]
    fn amalgam_round_trips_a_split_four_path() {
        let g = path_graph(&["p", "q", "r", "s"]);
        let gamma = BTreeMap::from([
            ("p".to_string(), 1),
            ("q".to_string(), 1),
            ("r".to_string(), 2),
            ("s".to_string(), 2),
        ]);
        let split = Split { graph: g.clone(), gamma, size: 2, height: 3 };
        let a = amalgam_build(&g, &split).unwrap();
        assert_eq!(sbuild(&a).unwrap(), g);
    }

    #[test]
    fn amalgam_build_rejects_bad_splits() {
        let g = path_graph(&["p", "q", "r", "s"]);
        let gamma: BTreeMap<_, _> = g.vertices().iter().map(|v| (v.clone(), 1)).collect();
        let split = Split { graph: g.clone(), gamma, size: 1, height: 4 };
        assert!(matches!(
            amalgam_build(&g, &split),
            Err(SplitError::SplitInvalid(_))
        ));
    }

    fn three_cell_fixture() -> (Graph, Split) {
        // Six vertices in three cells of two; within cells an edge, across
        // cells a staircase pattern that stays decomposable.
        let mut g = Graph::new();
        for v in ["a1", "a2", "b1", "b2", "c1", "c2"] {
            g.add_vertex(v);
        }
        for (u, v) in [
            ("a1", "a2"),
            ("b1", "b2"),
            ("a1", "b1"),
            ("a1", "b2"),
            ("b1", "c1"),
            ("a2", "c2"),
        ] {
            g.add_edge(u, v).unwrap();
        }
        let gamma = BTreeMap::from([
            ("a1".to_string(), 1),
            ("a2".to_string(), 1),
            ("b1".to_string(), 2),
            ("b2".to_string(), 2),
            ("c1".to_string(), 3),
            ("c2".to_string(), 3),
        ]);
        let split = Split { graph: g.clone(), gamma, size: 3, height: 4 };
        (g, split)
    }

    #[test]
    fn three_cell_amalgam_round_trips_and_restricts() {
        let (g, split) = three_cell_fixture();
        assert!(split.verify().passed());
        let a = amalgam_build(&g, &split).unwrap();
        assert_eq!(sbuild(&a).unwrap(), g);
        // Exhaustive restriction commutation over all ground subsets.
        let verts: Vec<VertexId> = a.ground().iter().cloned().collect();
        for mask in 0u32..(1 << verts.len()) {
            let w: BTreeSet<VertexId> = verts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, v)| v.clone())
                .collect();
            let restricted = amalgam_restrict(&a, &w).unwrap();
            let via_amalgam = sbuild(&restricted).unwrap();
            let via_graph = g.induced_subgraph(&w).unwrap();
            assert_eq!(via_amalgam, via_graph, "mask {mask:b}");
        }
    }

    #[test]
    fn amalgam_restrict_handles_identity_and_empty() {
        let (g, split) = alternating_c4();
        let a = amalgam_build(&g, &split).unwrap();
        assert_eq!(amalgam_restrict(&a, a.ground()).unwrap(), a);
        let empty = amalgam_restrict(&a, &BTreeSet::new()).unwrap();
        assert!(empty.ground().is_empty());
        assert_eq!(sbuild(&empty).unwrap().vertex_count(), 0);
        assert!(matches!(
            amalgam_restrict(&a, &vset(&["nope"])),
            Err(SplitError::UnknownVertex(_))
        ));
    }

    #[test]
    fn coupling_view_order_is_a_union_of_chains() {
        let m = half_graph_tmodel();
        let s = split_from_tmodel(&m).unwrap();
        let a = amalgam_build(&s.split.graph.clone(), &s.split).unwrap();
        let view = coupling_view(&a);
        let lt = view.rel("Lt");
        // Every element's comparability set must be totally ordered.
        for e in view.domain() {
            let comp: BTreeSet<&String> = lt
                .iter()
                .filter(|t| &t[0] == e || &t[1] == e)
                .map(|t| if &t[0] == e { &t[1] } else { &t[0] })
                .collect();
            for x in &comp {
                for y in &comp {
                    if x < y {
                        let related = lt.contains(&vec![(*x).clone(), (*y).clone()])
                            || lt.contains(&vec![(*y).clone(), (*x).clone()]);
                        assert!(related, "chain broken at {e}: {x} vs {y}");
                    }
                }
            }
        }
        // The edge reduct stays sparse.
        let mut eg = Graph::new();
        for v in view.domain() {
            eg.add_vertex(v);
        }
        for t in view.rel("E") {
            if t[0] < t[1] {
                eg.add_edge(&t[0], &t[1]).expect("elements added");
            }
        }
        assert!(eg.degeneracy() <= 3, "degeneracy {}", eg.degeneracy());
    }

    #[test]
    fn sbuild_detects_broken_injections() {
        let (g, split) = alternating_c4();
        let mut a = amalgam_build(&g, &split).unwrap();
        a.inj_cell.remove("a");
        assert!(matches!(sbuild(&a), Err(SplitError::BrokenInjection(_))));
    }

    #[test]
    fn amalgam_json_round_trip() {
        let (g, split) = three_cell_fixture();
        let a = amalgam_build(&g, &split).unwrap();
        let text = a.to_json();
        let back = Amalgam::from_json(&text).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_json(), text);
    }
}
