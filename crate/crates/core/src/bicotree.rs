//! Shallow ordered bicographs and their bicotree models.
//!
//! A bicotree is a two-color tree model whose internal nodes carry one of
//! three types: U (no cross edges between different children), B (all
//! cross-color edges between different children), or O (ordered children;
//! a color-1 leaf is adjacent to every color-2 leaf hanging under a later
//! child). Built graphs are always bipartite with the leaf coloring as
//! sides, since no table accepts a same-color pair.
//!
//! A bicotree is clean when every U-child models a connected graph, every
//! B-child models a co-connected graph (connected bipartite complement),
//! and every O-child contains leaves of both colors. [`clean_bicotree`]
//! converts any bicotree into a clean one modeling the same graph while at
//! most tripling the height; [`sob_decompose`] reconstructs a clean
//! bicotree from a bipartite graph, refusing exactly when the ordered
//! partition machinery of [`o_partition`] finds no valid cut.

use crate::structure::{BipartiteGraph, Graph, StructureError, VertexId};
use crate::tmodel::{IdGen, Kappa, NodeId, NodeKind, SemiPlaneTree, TModel, TModelError};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Internal node types of a bicotree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BicotreeType {
    U,
    B,
    O,
}

impl BicotreeType {
    pub fn letter(self) -> &'static str {
        match self {
            BicotreeType::U => "U",
            BicotreeType::B => "B",
            BicotreeType::O => "O",
        }
    }
}

/// The all-false table of a U-node.
pub fn kappa_u() -> Kappa {
    Kappa::falses(2)
}

/// The unequal-colors table of a B-node.
pub fn kappa_b() -> Kappa {
    Kappa::from_fn(2, |i, j| i != j)
}

/// The increasing-colors table of an O-node.
pub fn kappa_o() -> Kappa {
    Kappa::from_fn(2, |i, j| i < j)
}

/// Why no ordered partition exists for a bipartite graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OPartitionObstruction {
    /// The graph is disconnected.
    NotConnected,
    /// The bipartite complement has no edges at all, i.e. the graph is a
    /// complete cross join; ordering cannot separate anything then.
    CoDisconnected,
    /// One side of the bipartition is empty.
    MissingColor(u8),
    /// Peeling produced no valid cut into at least two ordered parts.
    NoCut { detail: String },
}

impl std::fmt::Display for OPartitionObstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotConnected => write!(f, "graph is disconnected"),
            Self::CoDisconnected => write!(f, "bipartite complement has no edges"),
            Self::MissingColor(c) => write!(f, "no vertex of color {c}"),
            Self::NoCut { detail } => write!(f, "no valid cut: {detail}"),
        }
    }
}

/// Errors raised by bicotree operations.
#[derive(Debug, Error)]
pub enum BicotreeError {
    #[error("not a bicotree: {0}")]
    NotABicotree(String),
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("input graph is empty")]
    EmptyInput,
    #[error("no ordered partition: {0}")]
    NoOPartition(OPartitionObstruction),
    #[error("not a shallow ordered bicograph: {detail}{}", p7_note(.p7))]
    NotSob {
        detail: String,
        /// Induced seven-vertex path, when one exists (sufficient but not
        /// necessary evidence of refusal).
        p7: Option<Vec<VertexId>>,
    },
    #[error(transparent)]
    Model(#[from] TModelError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn p7_note(p7: &Option<Vec<VertexId>>) -> String {
    match p7 {
        Some(path) => format!("; induced P7 witness: {}", path.join(" - ")),
        None => String::new(),
    }
}

// ---------------------------------------------------------------------------
// Bicotree
// ---------------------------------------------------------------------------

/// A two-color tree model whose internal nodes are all U, B, or O typed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bicotree {
    model: TModel,
}

impl Bicotree {
    /// Validates and wraps a model: two colors, every internal node's table
    /// one of the three patterns, O on C-kind nodes, U/B on A-kind nodes.
    pub fn from_model(model: TModel) -> Result<Bicotree, BicotreeError> {
        let report = model.validate();
        if !report.is_empty() {
            return Err(BicotreeError::Invalid(report));
        }
        if model.n() != 2 {
            return Err(BicotreeError::NotABicotree(format!(
                "expected 2 colors, model has {}",
                model.n()
            )));
        }
        for v in model.tree().nodes() {
            let kind = model.tree().kind_of(v).expect("node exists");
            if kind == NodeKind::Leaf {
                continue;
            }
            let table = model.kappa_of(v).expect("validated internal node");
            let ty = classify_table(table);
            match (ty, kind) {
                (Some(BicotreeType::U), NodeKind::A) => {}
                (Some(BicotreeType::B), NodeKind::A) => {}
                (Some(BicotreeType::O), NodeKind::C) => {}
                (Some(t), _) => {
                    return Err(BicotreeError::NotABicotree(format!(
                        "node `{v}` has the {} table but the wrong node kind",
                        t.letter()
                    )))
                }
                (None, _) => {
                    return Err(BicotreeError::NotABicotree(format!(
                        "table at `{v}` is none of U, B, O"
                    )))
                }
            }
        }
        Ok(Bicotree { model })
    }

    pub fn model(&self) -> &TModel {
        &self.model
    }

    pub fn into_model(self) -> TModel {
        self.model
    }

    pub fn height(&self) -> usize {
        self.model.height()
    }

    pub fn ground(&self) -> BTreeSet<VertexId> {
        self.model.ground()
    }

    /// Type of an internal node; `None` for leaves and unknown ids.
    pub fn type_of(&self, v: &str) -> Option<BicotreeType> {
        self.model.kappa_of(v).and_then(classify_table)
    }

    /// Builds the modeled bipartite graph; sides are the leaf colors.
    pub fn build_bipartite(&self) -> Result<BipartiteGraph, BicotreeError> {
        let g = self.model.build()?;
        let side = self
            .model
            .gamma()
            .iter()
            .map(|(v, c)| (v.clone(), *c as u8))
            .collect();
        Ok(BipartiteGraph::new(g, side)?)
    }

    /// JSON rendering with U/B/O annotations on internal nodes.
    pub fn to_json(&self) -> String {
        let ntypes: BTreeMap<NodeId, String> = self
            .model
            .tree()
            .nodes()
            .filter_map(|v| self.type_of(v).map(|t| (v.clone(), t.letter().to_string())))
            .collect();
        self.model.to_json_annotated(&ntypes)
    }

    pub fn from_json(text: &str) -> Result<Bicotree, BicotreeError> {
        Bicotree::from_model(TModel::from_json(text)?)
    }
}

/// Recognizes one of the three bicotree connection tables, if the table is
/// one of them.
pub fn classify_table(k: &Kappa) -> Option<BicotreeType> {
    if *k == kappa_u() {
        Some(BicotreeType::U)
    } else if *k == kappa_b() {
        Some(BicotreeType::B)
    } else if *k == kappa_o() {
        Some(BicotreeType::O)
    } else {
        None
    }
}

fn table_for(ty: BicotreeType) -> (Kappa, NodeKind) {
    match ty {
        BicotreeType::U => (kappa_u(), NodeKind::A),
        BicotreeType::B => (kappa_b(), NodeKind::A),
        BicotreeType::O => (kappa_o(), NodeKind::C),
    }
}

// ---------------------------------------------------------------------------
// Assembly helpers
// ---------------------------------------------------------------------------

/// Renames the internal nodes of a model with fresh ids, keeping leaves.
fn relabel_internal(m: &TModel, gen: &mut IdGen) -> TModel {
    let tree = m.tree();
    let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for v in tree.nodes() {
        if tree.is_leaf(v) {
            rename.insert(v.clone(), v.clone());
        } else {
            rename.insert(v.clone(), gen.next_id());
        }
    }
    let mut out = SemiPlaneTree::empty();
    if let Some(r) = tree.root() {
        let mut kind = BTreeMap::new();
        let mut parent = BTreeMap::new();
        let mut child_order = BTreeMap::new();
        for v in tree.nodes() {
            kind.insert(rename[v].clone(), tree.kind_of(v).expect("node"));
            parent.insert(
                rename[v].clone(),
                rename[tree.parent_of(v).expect("node")].clone(),
            );
            if tree.kind_of(v) == Some(NodeKind::C) {
                let seq = tree.children(v).iter().map(|c| rename[c].clone()).collect();
                child_order.insert(rename[v].clone(), seq);
            }
        }
        out = SemiPlaneTree::from_parts(kind, parent, child_order, Some(rename[r].clone()));
    }
    let gamma = m.gamma().clone();
    let kappa = m
        .tree()
        .nodes()
        .filter_map(|v| m.kappa_of(v).map(|k| (rename[v].clone(), k.clone())))
        .collect();
    TModel::new(out, gamma, kappa, m.n())
}

/// Joins child models under a fresh typed root. Child grounds must be
/// pairwise disjoint; internal node ids are freshened to avoid collisions.
fn assemble(ty: BicotreeType, children: Vec<TModel>) -> TModel {
    let leaf_ids: Vec<String> = children
        .iter()
        .flat_map(|c| c.ground().into_iter())
        .collect();
    let mut gen = IdGen::avoiding(leaf_ids.iter().map(|s| s.as_str()));
    let root = gen.next_id();
    let (table, kind) = table_for(ty);
    let mut kinds = BTreeMap::from([(root.clone(), kind)]);
    let mut parents = BTreeMap::from([(root.clone(), root.clone())]);
    let mut orders: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    if kind == NodeKind::C {
        orders.insert(root.clone(), Vec::new());
    }
    let mut gamma = BTreeMap::new();
    let mut kappa = BTreeMap::from([(root.clone(), table)]);
    for child in children {
        let child = relabel_internal(&child, &mut gen);
        let croot = child.tree().root().expect("nonempty child").clone();
        for v in child.tree().nodes() {
            kinds.insert(v.clone(), child.tree().kind_of(v).expect("node"));
            let p = if *v == croot {
                root.clone()
            } else {
                child.tree().parent_of(v).expect("node").clone()
            };
            parents.insert(v.clone(), p);
            if child.tree().kind_of(v) == Some(NodeKind::C) {
                orders.insert(v.clone(), child.tree().children(v));
            }
        }
        if kind == NodeKind::C {
            orders.get_mut(&root).expect("order slot").push(croot);
        }
        gamma.extend(child.gamma().clone());
        for v in child.tree().nodes() {
            if let Some(k) = child.kappa_of(v) {
                kappa.insert(v.clone(), k.clone());
            }
        }
    }
    let tree = SemiPlaneTree::from_parts(kinds, parents, orders, Some(root));
    TModel::new(tree, gamma, kappa, 2)
}

fn leaf_model(v: &str, color: usize) -> TModel {
    TModel::single(v, color, 2)
}

/// Joins nonempty child bicotrees under a fresh root of the given type.
/// Child grounds must be pairwise disjoint; for an O root the children keep
/// the given order.
pub fn bicotree_node(ty: BicotreeType, children: Vec<Bicotree>) -> Bicotree {
    Bicotree {
        model: assemble(ty, children.into_iter().map(Bicotree::into_model).collect()),
    }
}

/// A single-leaf bicotree with the given color.
pub fn bicotree_leaf(v: &str, color: usize) -> Bicotree {
    Bicotree {
        model: leaf_model(v, color),
    }
}

// ---------------------------------------------------------------------------
// Dual
// ---------------------------------------------------------------------------

fn dual_star_model(m: &TModel) -> TModel {
    let mut tree = m.tree().clone();
    let mut kappa = BTreeMap::new();
    for v in m.tree().nodes() {
        if let Some(k) = m.kappa_of(v) {
            let swapped = match classify_table(k).expect("bicotree table") {
                BicotreeType::U => kappa_b(),
                BicotreeType::B => kappa_u(),
                BicotreeType::O => {
                    tree.reverse_children(v);
                    kappa_o()
                }
            };
            kappa.insert(v.clone(), swapped);
        }
    }
    TModel::new(tree, m.gamma().clone(), kappa, 2)
}

/// Exchanges U and B types and reverses every O-node child order. The dual
/// models the bipartite complement and is an involution; cleanness is
/// preserved in both directions.
pub fn dual_star(t: &Bicotree) -> Bicotree {
    Bicotree {
        model: dual_star_model(&t.model),
    }
}

// ---------------------------------------------------------------------------
// Cleanness
// ---------------------------------------------------------------------------

/// Lists every violated clean condition, one entry per offending child.
pub fn clean_violations(t: &Bicotree) -> Vec<String> {
    let m = &t.model;
    let mut out = Vec::new();
    for v in m.tree().nodes() {
        let ty = match t.type_of(v) {
            Some(ty) => ty,
            None => continue,
        };
        for c in m.tree().children(v) {
            match ty {
                BicotreeType::U => {
                    let sub = m.subtree_at(&c).expect("child exists");
                    let g = sub.build().expect("valid submodel");
                    if !g.is_connected() {
                        out.push(format!("U-node `{v}`: child `{c}` models a disconnected graph"));
                    }
                }
                BicotreeType::B => {
                    let sub = Bicotree {
                        model: m.subtree_at(&c).expect("child exists"),
                    };
                    let b = sub.build_bipartite().expect("valid submodel");
                    if !b.co_connected() {
                        out.push(format!(
                            "B-node `{v}`: child `{c}` models a graph with disconnected bipartite complement"
                        ));
                    }
                }
                BicotreeType::O => {
                    let colors: BTreeSet<usize> = m
                        .tree()
                        .leaves_below(&c)
                        .iter()
                        .map(|l| m.color_of(l).expect("colored leaf"))
                        .collect();
                    if colors.len() < 2 {
                        out.push(format!(
                            "O-node `{v}`: child `{c}` does not contain both colors"
                        ));
                    }
                }
            }
        }
    }
    out
}

pub fn is_clean_bicotree(t: &Bicotree) -> bool {
    clean_violations(t).is_empty()
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// Rebuilds a bicotree into a clean one modeling the same bipartite graph.
/// The output height is at most three times the input height.
pub fn clean_bicotree(t: &Bicotree) -> Result<Bicotree, BicotreeError> {
    let report = t.model.validate();
    if !report.is_empty() {
        return Err(BicotreeError::Invalid(report));
    }
    let model = clean_model(&t.model);
    Bicotree::from_model(model)
}

fn clean_model(m: &TModel) -> TModel {
    let t = Bicotree { model: m.clone() };
    if is_clean_bicotree(&t) {
        return m.clone();
    }
    let tree = m.tree();
    let root = match tree.root() {
        None => return m.clone(),
        Some(r) => r.clone(),
    };
    if tree.is_leaf(&root) {
        return m.clone();
    }
    let ty = classify_table(m.kappa_of(&root).expect("internal root")).expect("bicotree table");
    match ty {
        BicotreeType::U => {
            // Components never cross U-children; descend into the hosting
            // child so recursion shrinks the height.
            let g = m.build().expect("valid model");
            let mut parts = Vec::new();
            for comp in g.connected_components() {
                let host = tree
                    .children(&root)
                    .into_iter()
                    .find(|c| {
                        let leaves = tree.leaves_below(c);
                        comp.iter().next().map(|v| leaves.contains(v)).unwrap_or(false)
                    })
                    .expect("component lies under some child");
                let sub = m.subtree_at(&host).expect("child exists");
                let restricted = sub.restrict(&comp).expect("component leaves");
                parts.push(clean_model(&restricted));
            }
            assemble(BicotreeType::U, parts)
        }
        BicotreeType::B => dual_star_model(&clean_model(&dual_star_model(m))),
        BicotreeType::O => clean_o_root(m, &root),
    }
}

fn clean_o_root(m: &TModel, root: &str) -> TModel {
    let g = m.build().expect("valid model");
    if g.vertex_count() == 1 {
        let v = g.vertices().iter().next().expect("one vertex").clone();
        return leaf_model(&v, m.color_of(&v).expect("colored leaf"));
    }
    let comps = g.connected_components();
    if comps.len() > 1 {
        // Components may cross O-children; restrict the whole tree. Each
        // restriction is connected, so the recursion lands in the handling
        // below rather than back here.
        let parts = comps
            .into_iter()
            .map(|c| clean_model(&m.restrict(&c).expect("component leaves")))
            .collect();
        return assemble(BicotreeType::U, parts);
    }
    // Connected, at least two vertices: group the ordered children into
    // blocks shaped 1*X2* (around a bicolored child) or 1+2+ (all
    // monochromatic). A connected build forces the token word to start with
    // 1 or X and end with 2 or X, so the greedy scan below is total.
    let children = m.tree().children(root);
    let token = |c: &str| -> char {
        let colors: BTreeSet<usize> = m
            .tree()
            .leaves_below(c)
            .iter()
            .map(|l| m.color_of(l).expect("colored leaf"))
            .collect();
        if colors.len() == 2 {
            'X'
        } else if colors.contains(&1) {
            '1'
        } else {
            '2'
        }
    };
    let tokens: Vec<(NodeId, char)> = children.iter().map(|c| (c.clone(), token(c))).collect();
    struct Block {
        ones: Vec<NodeId>,
        pivot: Option<NodeId>,
        twos: Vec<NodeId>,
    }
    let mut blocks: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let start = i;
        while i < tokens.len() && tokens[i].1 == '1' {
            i += 1;
        }
        let ones: Vec<NodeId> = tokens[start..i].iter().map(|(c, _)| c.clone()).collect();
        let pivot = match tokens.get(i).map(|(_, t)| *t) {
            Some('X') => {
                let p = tokens[i].0.clone();
                i += 1;
                Some(p)
            }
            Some('2') => {
                if ones.is_empty() {
                    unreachable!("a block of a connected build cannot start with a color-2 child");
                }
                None
            }
            _ => unreachable!("a connected build cannot end with a dangling color-1 run"),
        };
        let t_start = i;
        while i < tokens.len() && tokens[i].1 == '2' {
            i += 1;
        }
        let twos: Vec<NodeId> = tokens[t_start..i].iter().map(|(c, _)| c.clone()).collect();
        blocks.push(Block { ones, pivot, twos });
    }
    let mono_leaves = |ids: &[NodeId]| -> Vec<TModel> {
        ids.iter()
            .flat_map(|c| m.tree().leaves_below(c))
            .map(|l| leaf_model(&l, m.color_of(&l).expect("colored leaf")))
            .collect()
    };
    let mut block_models = Vec::new();
    for block in &blocks {
        let mut parts: Vec<TModel> = Vec::new();
        parts.extend(mono_leaves(&block.ones));
        if let Some(pivot) = &block.pivot {
            // The block graph is the pivot's graph plus mono leaves joined
            // to everything of the other color; its bipartite complement is
            // the pivot complement with the mono leaves isolated. A B-node
            // over the complement's components models it cleanly.
            let sub = m.subtree_at(pivot).expect("child exists");
            let dual_sub = dual_star_model(&sub);
            let comp_graph = dual_sub.build().expect("valid submodel");
            for comp in comp_graph.connected_components() {
                let piece = dual_sub.restrict(&comp).expect("component leaves");
                parts.push(dual_star_model(&clean_model(&piece)));
            }
        }
        parts.extend(mono_leaves(&block.twos));
        block_models.push(assemble(BicotreeType::B, parts));
    }
    if block_models.len() == 1 {
        block_models.into_iter().next().expect("one block")
    } else {
        assemble(BicotreeType::O, block_models)
    }
}

// ---------------------------------------------------------------------------
// Ordered partition
// ---------------------------------------------------------------------------

/// Splits a connected two-colored bipartite graph into ordered parts so
/// that a color-1 vertex and a color-2 vertex in different parts are
/// adjacent exactly when the color-1 part comes first. Each part contains
/// both colors; adjacency inside a part is unconstrained. Complete cross
/// joins are rejected up front (nothing separates their vertices); every
/// other refusal comes out of the peeling itself. The definitional
/// equivalence is re-checked exhaustively before returning.
pub fn o_partition(b: &BipartiteGraph) -> Result<Vec<BTreeSet<VertexId>>, BicotreeError> {
    let g = b.graph();
    for c in [1u8, 2u8] {
        if b.part(c).is_empty() {
            return Err(BicotreeError::NoOPartition(OPartitionObstruction::MissingColor(c)));
        }
    }
    if !g.is_connected() {
        return Err(BicotreeError::NoOPartition(OPartitionObstruction::NotConnected));
    }
    if b.bipartite_complement().graph().edge_count() == 0 {
        return Err(BicotreeError::NoOPartition(OPartitionObstruction::CoDisconnected));
    }
    let color1 = b.part(1);
    let color2 = b.part(2);
    // Any union of leading parts is closed: a color-1 member keeps its
    // color-2 non-neighbors inside, a color-2 member keeps its color-1
    // neighbors inside. Peel minimal closed sets left to right, preferring
    // the smallest (then lexicographically least) closure.
    let closure = |seed: &VertexId, remaining: &BTreeSet<VertexId>| -> BTreeSet<VertexId> {
        let mut s: BTreeSet<VertexId> = BTreeSet::from([seed.clone()]);
        let mut stack = vec![seed.clone()];
        while let Some(v) = stack.pop() {
            let pulled: Vec<VertexId> = if color1.contains(&v) {
                color2
                    .iter()
                    .filter(|w| remaining.contains(*w) && !g.has_edge(&v, w))
                    .cloned()
                    .collect()
            } else {
                g.neighbors(&v)
                    .into_iter()
                    .filter(|w| color1.contains(w) && remaining.contains(w))
                    .collect()
            };
            for w in pulled {
                if s.insert(w.clone()) {
                    stack.push(w);
                }
            }
        }
        s
    };
    let mut remaining: BTreeSet<VertexId> = g.vertices().clone();
    let mut atoms: Vec<BTreeSet<VertexId>> = Vec::new();
    while !remaining.is_empty() {
        let atom = remaining
            .iter()
            .map(|seed| closure(seed, &remaining))
            .min_by_key(|s| (s.len(), s.iter().next().cloned()))
            .expect("remaining is nonempty");
        for v in &atom {
            remaining.remove(v);
        }
        atoms.push(atom);
    }
    // Merge consecutive atoms into minimal bicolored parts; a trailing
    // monochromatic run joins the last part.
    let mut parts: Vec<BTreeSet<VertexId>> = Vec::new();
    let mut current: BTreeSet<VertexId> = BTreeSet::new();
    for atom in atoms {
        current.extend(atom);
        let has1 = current.iter().any(|v| color1.contains(v));
        let has2 = current.iter().any(|v| color2.contains(v));
        if has1 && has2 {
            parts.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        let last = parts
            .last_mut()
            .expect("both colors exist, so some part closed");
        last.extend(current);
    }
    if parts.len() < 2 {
        return Err(BicotreeError::NoOPartition(OPartitionObstruction::NoCut {
            detail: "partition collapses to a single part".into(),
        }));
    }
    // Exhaustive definitional check.
    for (i, pi) in parts.iter().enumerate() {
        for x in pi.iter().filter(|v| color1.contains(*v)) {
            for (j, pj) in parts.iter().enumerate() {
                if i == j {
                    continue;
                }
                for y in pj.iter().filter(|v| color2.contains(*v)) {
                    if g.has_edge(x, y) != (i < j) {
                        return Err(BicotreeError::NoOPartition(OPartitionObstruction::NoCut {
                            detail: format!(
                                "adjacency between `{x}` and `{y}` contradicts the part order"
                            ),
                        }));
                    }
                }
            }
        }
    }
    Ok(parts)
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

/// Reconstructs a clean bicotree modeling a bipartite graph.
///
/// Recursion: a single vertex becomes a leaf; a disconnected graph a U-root
/// over its components; a graph with disconnected bipartite complement a
/// B-root through the dual of the complement's decomposition; anything else
/// an O-root over the parts of [`o_partition`]. Refusal happens exactly
/// when some recursive call finds no ordered partition; the error carries
/// an induced seven-vertex path when one exists in the offending subgraph.
pub fn sob_decompose(b: &BipartiteGraph) -> Result<Bicotree, BicotreeError> {
    let model = sob_model(b)?;
    Bicotree::from_model(model)
}

fn sob_model(b: &BipartiteGraph) -> Result<TModel, BicotreeError> {
    let g = b.graph();
    if g.vertex_count() == 0 {
        return Err(BicotreeError::EmptyInput);
    }
    if g.vertex_count() == 1 {
        let v = g.vertices().iter().next().expect("one vertex").clone();
        let color = b.side_of(&v).expect("sided vertex") as usize;
        return Ok(leaf_model(&v, color));
    }
    let comps = g.connected_components();
    if comps.len() > 1 {
        let parts = comps
            .into_iter()
            .map(|c| sob_model(&b.induced(&c)?))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(assemble(BicotreeType::U, parts));
    }
    let co = b.bipartite_complement();
    if !co.graph().is_connected() {
        return Ok(dual_star_model(&sob_model(&co)?));
    }
    let parts = match o_partition(b) {
        Ok(parts) => parts,
        Err(BicotreeError::NoOPartition(reason)) => {
            return Err(BicotreeError::NotSob {
                detail: reason.to_string(),
                p7: g.induced_path_witness(7),
            })
        }
        Err(e) => return Err(e),
    };
    let children = parts
        .into_iter()
        .map(|p| sob_model(&b.induced(&p)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(BicotreeType::O, children))
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// The half graph on `2k` vertices: `a1..ak` on side 1, `b1..bk` on side 2,
/// with `ai` adjacent to `bj` exactly when `i <= j`.
pub fn half_graph(k: usize) -> BipartiteGraph {
    let mut g = Graph::new();
    let mut side = BTreeMap::new();
    for i in 1..=k {
        g.add_vertex(&format!("a{i}"));
        g.add_vertex(&format!("b{i}"));
        side.insert(format!("a{i}"), 1);
        side.insert(format!("b{i}"), 2);
    }
    for i in 1..=k {
        for j in i..=k {
            g.add_edge(&format!("a{i}"), &format!("b{j}")).expect("vertices added");
        }
    }
    BipartiteGraph::new(g, side).expect("half graph is bipartite")
}

/// The flat one-node model of [`half_graph`]: an O-root whose children are
/// the leaves `a1, b1, a2, b2, ...` in interleaved order. Not clean (the
/// children are monochromatic), which makes it a handy cleaning input.
pub fn half_graph_bicotree(k: usize) -> Bicotree {
    let mut tree = SemiPlaneTree::with_root("o", NodeKind::C);
    let mut gamma = BTreeMap::new();
    for i in 1..=k {
        tree.attach(&format!("a{i}"), NodeKind::Leaf, "o").expect("root exists");
        tree.attach(&format!("b{i}"), NodeKind::Leaf, "o").expect("root exists");
        gamma.insert(format!("a{i}"), 1);
        gamma.insert(format!("b{i}"), 2);
    }
    let kappa = BTreeMap::from([("o".to_string(), kappa_o())]);
    Bicotree::from_model(TModel::new(tree, gamma, kappa, 2)).expect("valid model")
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
