//! Shallow cographs and their cotrees.
//!
//! A cotree is a one-color tree model whose internal nodes are either
//! disjoint-union nodes (type U, the all-false table) or join nodes
//! (type J, the all-true table); all internal nodes are unordered. A
//! cotree is clean when node types alternate along every root-leaf path
//! and every internal node has at least two children. Cographs are exactly
//! the graphs with an induced-P4-free structure, and each nonempty cograph
//! has a unique clean cotree, reconstructed by [`cograph_decompose`].

use crate::structure::{Graph, VertexId};
use crate::tmodel::{IdGen, Kappa, NodeId, NodeKind, SemiPlaneTree, TModel, TModelError};
use std::collections::BTreeMap;
use thiserror::Error;

/// Internal node types of a cotree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CotreeType {
    /// Disjoint union: no edges between different children.
    U,
    /// Join: all edges between different children.
    J,
}

impl CotreeType {
    pub fn letter(self) -> &'static str {
        match self {
            CotreeType::U => "U",
            CotreeType::J => "J",
        }
    }
}

/// Errors raised by cotree operations.
#[derive(Debug, Error)]
pub enum CotreeError {
    #[error("not a cotree: {0}")]
    NotACotree(String),
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("input graph is empty")]
    EmptyInput,
    #[error("not a cograph: induced four-vertex path {}", .witness.join(" - "))]
    NotCograph { witness: Vec<VertexId> },
    #[error(transparent)]
    Model(#[from] TModelError),
}

/// A one-color tree model with U/J typed internal nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cotree {
    model: TModel,
}

impl Cotree {
    /// Validates and wraps a model: one color, no ordered nodes, every
    /// internal table constant false (U) or constant true (J).
    pub fn from_model(model: TModel) -> Result<Cotree, CotreeError> {
        let report = model.validate();
        if !report.is_empty() {
            return Err(CotreeError::Invalid(report));
        }
        if model.n() != 1 {
            return Err(CotreeError::NotACotree(format!(
                "expected 1 color, model has {}",
                model.n()
            )));
        }
        for v in model.tree().nodes() {
            match model.tree().kind_of(v) {
                Some(NodeKind::C) => {
                    return Err(CotreeError::NotACotree(format!(
                        "node `{v}` is ordered; cotree nodes are unordered"
                    )))
                }
                Some(NodeKind::A) => {
                    // A 1x1 table is always one of the two types.
                    debug_assert!(model.kappa_of(v).is_some());
                }
                _ => {}
            }
        }
        Ok(Cotree { model })
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

    pub fn ground(&self) -> std::collections::BTreeSet<VertexId> {
        self.model.ground()
    }

    /// Type of an internal node; `None` for leaves and unknown ids.
    pub fn type_of(&self, v: &str) -> Option<CotreeType> {
        self.model
            .kappa_of(v)
            .map(|k| if k.get(1, 1) { CotreeType::J } else { CotreeType::U })
    }

    pub fn build(&self) -> Result<Graph, CotreeError> {
        Ok(self.model.build()?)
    }

    /// JSON rendering with U/J annotations on internal nodes.
    pub fn to_json(&self) -> String {
        let ntypes: BTreeMap<NodeId, String> = self
            .model
            .tree()
            .nodes()
            .filter_map(|v| self.type_of(v).map(|t| (v.clone(), t.letter().to_string())))
            .collect();
        self.model.to_json_annotated(&ntypes)
    }

    pub fn from_json(text: &str) -> Result<Cotree, CotreeError> {
        Cotree::from_model(TModel::from_json(text)?)
    }
}

fn kappa_for(ty: CotreeType) -> Kappa {
    match ty {
        CotreeType::U => Kappa::falses(1),
        CotreeType::J => Kappa::from_fn(1, |_, _| true),
    }
}

/// Joins child models under a fresh typed root (children's grounds must be
/// pairwise disjoint).
pub fn cotree_node(ty: CotreeType, children: Vec<Cotree>) -> Cotree {
    let leaf_ids: Vec<String> = children
        .iter()
        .flat_map(|c| c.ground().into_iter())
        .collect();
    let mut gen = IdGen::avoiding(leaf_ids.iter().map(|s| s.as_str()));
    let root = gen.next_id();
    let mut kinds = BTreeMap::from([(root.clone(), NodeKind::A)]);
    let mut parents = BTreeMap::from([(root.clone(), root.clone())]);
    let mut gamma = BTreeMap::new();
    let mut kappa = BTreeMap::from([(root.clone(), kappa_for(ty))]);
    for child in children {
        let m = child.into_model();
        // Rename internal ids so grafts never collide.
        let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for v in m.tree().nodes() {
            if m.tree().is_leaf(v) {
                rename.insert(v.clone(), v.clone());
            } else {
                rename.insert(v.clone(), gen.next_id());
            }
        }
        let croot = m.tree().root().expect("nonempty child");
        for v in m.tree().nodes() {
            kinds.insert(rename[v].clone(), m.tree().kind_of(v).expect("node"));
            let p = if v == croot {
                root.clone()
            } else {
                rename[m.tree().parent_of(v).expect("node")].clone()
            };
            parents.insert(rename[v].clone(), p);
            if let Some(k) = m.kappa_of(v) {
                kappa.insert(rename[v].clone(), k.clone());
            }
        }
        gamma.extend(m.gamma().clone());
    }
    let tree = SemiPlaneTree::from_parts(kinds, parents, BTreeMap::new(), Some(root));
    Cotree {
        model: TModel::new(tree, gamma, kappa, 1),
    }
}

/// Single-leaf cotree.
pub fn cotree_leaf(v: &str) -> Cotree {
    Cotree {
        model: TModel::single(v, 1, 1),
    }
}

/// True iff node types alternate along every root-leaf path and every
/// internal node has at least two children.
pub fn is_clean_cotree(t: &Cotree) -> bool {
    let m = t.model();
    for v in m.tree().nodes() {
        let ty = match t.type_of(v) {
            Some(ty) => ty,
            None => continue,
        };
        let children = m.tree().children(v);
        if children.len() < 2 {
            return false;
        }
        for c in &children {
            if t.type_of(c) == Some(ty) {
                return false;
            }
        }
    }
    true
}

/// Height of the underlying tree, counted in vertices.
pub fn cotree_height(t: &Cotree) -> usize {
    t.height()
}

/// Reconstructs the unique clean cotree of a cograph.
///
/// Recursion: a single vertex becomes a leaf; a disconnected graph a
/// U-root over its components; a graph with disconnected complement a
/// J-root over its co-components. When neither splits and at least two
/// vertices remain, the graph contains an induced four-vertex path, which
/// is returned as the refusal witness.
pub fn cograph_decompose(g: &Graph) -> Result<Cotree, CotreeError> {
    if g.vertex_count() == 0 {
        return Err(CotreeError::EmptyInput);
    }
    if g.vertex_count() == 1 {
        let v = g.vertices().iter().next().expect("one vertex");
        return Ok(cotree_leaf(v));
    }
    let comps = g.connected_components();
    if comps.len() > 1 {
        let children = comps
            .into_iter()
            .map(|c| cograph_decompose(&g.induced_subgraph(&c).expect("component vertices")))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(cotree_node(CotreeType::U, children));
    }
    let co_comps = g.complement().connected_components();
    if co_comps.len() > 1 {
        let children = co_comps
            .into_iter()
            .map(|c| cograph_decompose(&g.induced_subgraph(&c).expect("co-component vertices")))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(cotree_node(CotreeType::J, children));
    }
    let witness = g
        .induced_path_witness(4)
        .expect("a connected, co-connected graph on >= 2 vertices contains an induced P4");
    Err(CotreeError::NotCograph { witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{complete_graph, cycle_graph, path_graph, vset};

    #[test]
    fn single_vertex_decomposes_to_a_leaf() {
        let g = complete_graph(&["k"]);
        let t = cograph_decompose(&g).unwrap();
        assert_eq!(t.ground(), vset(&["k"]));
        assert_eq!(cotree_height(&t), 1);
        assert!(is_clean_cotree(&t));
    }

    #[test]
    fn three_path_decomposes_to_join_over_center_and_union() {
        // a - b - c: the complement keeps b isolated and joins a to c.
        let g = path_graph(&["a", "b", "c"]);
        let t = cograph_decompose(&g).unwrap();
        let root = t.model().tree().root().unwrap().clone();
        assert_eq!(t.type_of(&root), Some(CotreeType::J));
        assert_eq!(cotree_height(&t), 3);
        let children = t.model().tree().children(&root);
        assert_eq!(children.len(), 2);
        let leaf_child = children
            .iter()
            .find(|c| t.model().tree().is_leaf(c))
            .expect("one leaf child");
        assert_eq!(leaf_child, "b");
        let union_child = children.iter().find(|c| !t.model().tree().is_leaf(c)).unwrap();
        assert_eq!(t.type_of(union_child), Some(CotreeType::U));
        assert_eq!(t.model().tree().leaves_below(union_child), vset(&["a", "c"]));
        assert_eq!(t.build().unwrap(), g);
    }

    #[test]
    fn four_path_is_refused_with_a_witness() {
        let g = path_graph(&["p", "q", "r", "s"]);
        match cograph_decompose(&g) {
            Err(CotreeError::NotCograph { witness }) => {
                assert_eq!(witness.len(), 4);
                for w in witness.windows(2) {
                    assert!(g.has_edge(&w[0], &w[1]));
                }
                assert!(!g.has_edge(&witness[0], &witness[2]));
                assert!(!g.has_edge(&witness[0], &witness[3]));
                assert!(!g.has_edge(&witness[1], &witness[3]));
            }
            other => panic!("expected a refusal, got {other:?}"),
        }
    }

    #[test]
    fn four_cycle_decomposes_to_join_of_two_unions() {
        let g = cycle_graph(&["a", "b", "c", "d"]);
        let t = cograph_decompose(&g).unwrap();
        let root = t.model().tree().root().unwrap().clone();
        assert_eq!(t.type_of(&root), Some(CotreeType::J));
        let children = t.model().tree().children(&root);
        assert_eq!(children.len(), 2);
        for c in &children {
            assert_eq!(t.type_of(c), Some(CotreeType::U));
            assert_eq!(t.model().tree().children(c).len(), 2);
        }
        assert_eq!(t.build().unwrap(), g);
    }

    #[test]
    fn decompose_errors_exactly_on_induced_four_paths() {
        // Exhaustive over all graphs on four labeled vertices.
        let names = ["a", "b", "c", "d"];
        let pairs: Vec<(usize, usize)> =
            (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let mut g = Graph::new();
            for v in names {
                g.add_vertex(v);
            }
            for (bit, (i, j)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    g.add_edge(names[*i], names[*j]).unwrap();
                }
            }
            let expect_refusal = g.has_induced_path(4);
            match cograph_decompose(&g) {
                Ok(t) => {
                    assert!(!expect_refusal, "mask {mask:b} should have been refused");
                    assert_eq!(t.build().unwrap(), g, "mask {mask:b}");
                    assert!(is_clean_cotree(&t), "mask {mask:b}");
                }
                Err(CotreeError::NotCograph { .. }) => {
                    assert!(expect_refusal, "mask {mask:b} should have decomposed");
                }
                Err(other) => panic!("unexpected error on mask {mask:b}: {other}"),
            }
        }
    }

    #[test]
    fn clean_checks_reject_degenerate_shapes() {
        // Single-child root.
        let one = cotree_node(CotreeType::U, vec![cotree_leaf("x")]);
        assert!(!is_clean_cotree(&one));
        // Nested same-type nodes.
        let inner = cotree_node(CotreeType::J, vec![cotree_leaf("p"), cotree_leaf("q")]);
        let outer = cotree_node(CotreeType::J, vec![inner, cotree_leaf("z")]);
        assert!(!is_clean_cotree(&outer));
        // Alternating with >= 2 children everywhere.
        let u = cotree_node(CotreeType::U, vec![cotree_leaf("p"), cotree_leaf("q")]);
        let j = cotree_node(CotreeType::J, vec![u, cotree_leaf("z")]);
        assert!(is_clean_cotree(&j));
    }

    #[test]
    fn round_trip_on_handcrafted_clean_cotrees() {
        let u = cotree_node(CotreeType::U, vec![cotree_leaf("p"), cotree_leaf("q")]);
        let j = cotree_node(CotreeType::J, vec![u, cotree_leaf("z"), cotree_leaf("w")]);
        let top = cotree_node(CotreeType::U, vec![j, cotree_leaf("solo")]);
        for t in [&top] {
            assert!(is_clean_cotree(t));
            let g = t.build().unwrap();
            let back = cograph_decompose(&g).unwrap();
            assert_eq!(back.build().unwrap(), g);
            assert!(back.model().iso_fixing_ground(t.model()), "unique clean form");
        }
    }

    #[test]
    fn from_model_rejects_ordered_nodes_and_wrong_color_count() {
        assert!(matches!(
            Cotree::from_model(TModel::single("v", 1, 2)),
            Err(CotreeError::NotACotree(_))
        ));
        let mut tree = SemiPlaneTree::with_root("r", NodeKind::C);
        tree.attach("x", NodeKind::Leaf, "r").unwrap();
        tree.attach("y", NodeKind::Leaf, "r").unwrap();
        let gamma = BTreeMap::from([("x".to_string(), 1), ("y".to_string(), 1)]);
        let kappa = BTreeMap::from([("r".to_string(), Kappa::from_fn(1, |_, _| true))]);
        assert!(matches!(
            Cotree::from_model(TModel::new(tree, gamma, kappa, 1)),
            Err(CotreeError::NotACotree(_))
        ));
    }

    #[test]
    fn json_round_trip_keeps_type_annotations() {
        let g = path_graph(&["a", "b", "c"]);
        let t = cograph_decompose(&g).unwrap();
        let text = t.to_json();
        assert!(text.contains("\"ntype\": \"J\""));
        assert!(text.contains("\"ntype\": \"U\""));
        let back = Cotree::from_json(&text).unwrap();
        assert_eq!(back, t);
    }
}
