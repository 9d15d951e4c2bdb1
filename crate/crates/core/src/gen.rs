//! Seeded random instance generators for trees, models, graphs, couplings,
//! and formulas.
//!
//! Every generator is deterministic in its seed: the same seed and bounds
//! produce the same instance, so any property failure can be replayed from
//! the seed echoed in a report. Clean trees are enforced constructively:
//! cotrees alternate types level by level, and clean bicotrees come from
//! redecomposing the graph of a raw tree, falling back to smaller raw
//! trees until the height budget is met.

use crate::bicotree::{
    bicotree_leaf, bicotree_node, is_clean_bicotree, sob_decompose, Bicotree, BicotreeType,
};
use crate::cotree::{cotree_leaf, cotree_node, Cotree, CotreeType};
use crate::folang::Formula;
use crate::posetenc::ground_structure;
use crate::structure::{Graph, RelStructure};
use crate::tmodel::{Kappa, NodeKind, SemiPlaneTree, TModel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Errors raised by the generators.
#[derive(Debug, Error)]
pub enum GenError {
    #[error("infeasible bounds: {0}")]
    Infeasible(String),
}

fn require_positive(bounds: &[(&str, usize)]) -> Result<(), GenError> {
    for (name, value) in bounds {
        if *value == 0 {
            return Err(GenError::Infeasible(format!("{name} must be at least 1")));
        }
    }
    Ok(())
}

/// Splits `budget` into `parts` summands, each at least one.
fn split_budget(rng: &mut ChaCha8Rng, budget: usize, parts: usize) -> Vec<usize> {
    let mut out = vec![1usize; parts];
    for _ in 0..budget.saturating_sub(parts) {
        let at = rng.gen_range(0..parts);
        out[at] += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Trees and models
// ---------------------------------------------------------------------------

/// Generates a clean cotree with at most `max_leaves` leaves and height at
/// most `max_height`, alternating node types by construction.
pub fn gen_clean_cotree(
    seed: u64,
    max_leaves: usize,
    max_height: usize,
) -> Result<Cotree, GenError> {
    require_positive(&[("max_leaves", max_leaves), ("max_height", max_height)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=max_leaves);
    let mut counter = 0usize;
    Ok(clean_cotree_at(&mut rng, target, max_height, None, &mut counter))
}

fn clean_cotree_at(
    rng: &mut ChaCha8Rng,
    budget: usize,
    height_left: usize,
    required: Option<CotreeType>,
    counter: &mut usize,
) -> Cotree {
    if budget == 1 || height_left == 1 {
        let leaf = cotree_leaf(&format!("v{counter}"));
        *counter += 1;
        return leaf;
    }
    let ty = required.unwrap_or_else(|| {
        if rng.gen_bool(0.5) {
            CotreeType::U
        } else {
            CotreeType::J
        }
    });
    let flipped = match ty {
        CotreeType::U => CotreeType::J,
        CotreeType::J => CotreeType::U,
    };
    let arity = if height_left == 2 {
        budget
    } else {
        rng.gen_range(2..=budget.min(4))
    };
    let children = split_budget(rng, budget, arity)
        .into_iter()
        .map(|part| clean_cotree_at(rng, part, height_left - 1, Some(flipped), counter))
        .collect();
    cotree_node(ty, children)
}

/// Generates a bicotree with no cleanness guarantees: node types are
/// unconstrained and single-child internal nodes are allowed.
pub fn gen_bicotree_raw(
    seed: u64,
    max_leaves: usize,
    max_height: usize,
) -> Result<Bicotree, GenError> {
    require_positive(&[("max_leaves", max_leaves), ("max_height", max_height)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=max_leaves);
    let mut counter = 0usize;
    Ok(raw_bicotree_at(&mut rng, target, max_height, &mut counter))
}

fn raw_bicotree_at(
    rng: &mut ChaCha8Rng,
    budget: usize,
    height_left: usize,
    counter: &mut usize,
) -> Bicotree {
    if budget == 1 || height_left == 1 || rng.gen_bool(0.15) {
        let color = rng.gen_range(1..=2);
        let leaf = bicotree_leaf(&format!("v{counter}"), color);
        *counter += 1;
        return leaf;
    }
    let ty = [BicotreeType::U, BicotreeType::B, BicotreeType::O][rng.gen_range(0..3)];
    let arity = if height_left == 2 {
        budget
    } else {
        rng.gen_range(1..=budget.min(4))
    };
    let children = split_budget(rng, budget, arity)
        .into_iter()
        .map(|part| raw_bicotree_at(rng, part, height_left - 1, counter))
        .collect();
    bicotree_node(ty, children)
}

/// Generates a clean bicotree with at most `max_leaves` leaves and height
/// at most `max_height`, by redecomposing the bipartite graph of a raw
/// tree; the raw budget shrinks until the decomposition fits the height.
pub fn gen_clean_bicotree(
    seed: u64,
    max_leaves: usize,
    max_height: usize,
) -> Result<Bicotree, GenError> {
    require_positive(&[("max_leaves", max_leaves), ("max_height", max_height)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leaf_budget = max_leaves;
    let mut height_budget = max_height;
    for _ in 0..24 {
        let target = rng.gen_range(1..=leaf_budget);
        let mut counter = 0usize;
        let raw = raw_bicotree_at(&mut rng, target, height_budget, &mut counter);
        let graph = raw.build_bipartite().expect("constructed trees build");
        let clean = sob_decompose(&graph).expect("built graphs decompose");
        if clean.height() <= max_height {
            debug_assert!(is_clean_bicotree(&clean));
            return Ok(clean);
        }
        height_budget = (height_budget - 1).max(1);
        leaf_budget = (leaf_budget * 3 / 4).max(1);
    }
    let mut counter = 0usize;
    Ok(raw_bicotree_at(&mut rng, 1, 1, &mut counter))
}

/// Generates a valid model: a semi-plane tree within the bounds, random
/// leaf colors in `1..=n`, symmetric tables on unordered nodes, and
/// unrestricted tables on ordered nodes.
pub fn gen_tmodel(
    seed: u64,
    n: usize,
    max_leaves: usize,
    max_height: usize,
) -> Result<TModel, GenError> {
    require_positive(&[
        ("n", n),
        ("max_leaves", max_leaves),
        ("max_height", max_height),
    ])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(1..=max_leaves);
    if target == 1 || max_height == 1 {
        let color = rng.gen_range(1..=n);
        return Ok(TModel::single("v0", color, n));
    }
    let root_kind = if rng.gen_bool(0.5) { NodeKind::A } else { NodeKind::C };
    let mut tree = SemiPlaneTree::with_root("t0", root_kind);
    let mut gamma = BTreeMap::new();
    let mut kappa = BTreeMap::new();
    kappa.insert("t0".to_string(), random_kappa(&mut rng, n, root_kind));
    let mut leaf_counter = 0usize;
    let mut node_counter = 1usize;
    expand_tmodel(
        &mut rng,
        &mut tree,
        &mut gamma,
        &mut kappa,
        "t0",
        target,
        max_height,
        n,
        &mut leaf_counter,
        &mut node_counter,
    );
    let model = TModel::new(tree, gamma, kappa, n);
    debug_assert!(model.validate().is_empty());
    Ok(model)
}

fn random_kappa(rng: &mut ChaCha8Rng, n: usize, kind: NodeKind) -> Kappa {
    let mut table = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if kind == NodeKind::A && j < i {
                table[i][j] = table[j][i];
            } else {
                table[i][j] = rng.gen_bool(0.5);
            }
        }
    }
    Kappa(table)
}

#[allow(clippy::too_many_arguments)]
fn expand_tmodel(
    rng: &mut ChaCha8Rng,
    tree: &mut SemiPlaneTree,
    gamma: &mut BTreeMap<String, usize>,
    kappa: &mut BTreeMap<String, Kappa>,
    parent: &str,
    budget: usize,
    height_left: usize,
    n: usize,
    leaf_counter: &mut usize,
    node_counter: &mut usize,
) {
    let arity = if height_left == 2 {
        budget
    } else {
        rng.gen_range(2..=budget.min(3))
    };
    for part in split_budget(rng, budget, arity) {
        if part == 1 || height_left == 2 || rng.gen_bool(0.2) {
            let id = format!("v{leaf_counter}");
            *leaf_counter += 1;
            tree.attach(&id, NodeKind::Leaf, parent).expect("parent exists");
            gamma.insert(id, rng.gen_range(1..=n));
        } else {
            let id = format!("t{node_counter}");
            *node_counter += 1;
            let kind = if rng.gen_bool(0.5) { NodeKind::A } else { NodeKind::C };
            tree.attach(&id, kind, parent).expect("parent exists");
            kappa.insert(id.clone(), random_kappa(rng, n, kind));
            expand_tmodel(
                rng,
                tree,
                gamma,
                kappa,
                &id,
                part,
                height_left - 1,
                n,
                leaf_counter,
                node_counter,
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Graphs, couplings, and formulas
// ---------------------------------------------------------------------------

/// Generates a graph on at most `max_vertices` vertices with independent
/// edges.
pub fn gen_graph(seed: u64, max_vertices: usize) -> Result<Graph, GenError> {
    require_positive(&[("max_vertices", max_vertices)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_vertices);
    let mut g = Graph::new();
    for i in 0..count {
        g.add_vertex(&format!("v{i}"));
    }
    for i in 0..count {
        for j in i + 1..count {
            if rng.gen_bool(0.35) {
                g.add_edge(&format!("v{i}"), &format!("v{j}")).expect("vertices added");
            }
        }
    }
    Ok(g)
}

/// Generates a fully grounded coupling on at most `max_elements` elements:
/// a random acyclic order closed transitively, random symmetric edges, and
/// every element in the ground set.
pub fn gen_coupling(seed: u64, max_elements: usize) -> Result<RelStructure, GenError> {
    require_positive(&[("max_elements", max_elements)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_elements);
    let names: Vec<String> = (0..count).map(|i| format!("e{i}")).collect();
    let mut lt = Vec::new();
    let mut edges = Vec::new();
    for i in 0..count {
        for j in i + 1..count {
            if rng.gen_bool(0.3) {
                lt.push((names[i].as_str(), names[j].as_str()));
            }
            if rng.gen_bool(0.3) {
                edges.push((names[i].as_str(), names[j].as_str()));
            }
        }
    }
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Ok(ground_structure(&refs, &lt, &edges))
}

/// Generates a coupling whose order is a disjoint union of chains and
/// whose adjacency has no complete two-by-two bipartite subgraph.
pub fn gen_chain_coupling(seed: u64, max_elements: usize) -> Result<RelStructure, GenError> {
    require_positive(&[("max_elements", max_elements)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_elements);
    let names: Vec<String> = (0..count).map(|i| format!("e{i}")).collect();
    let mut shuffled = names.clone();
    shuffled.shuffle(&mut rng);
    let mut lt: Vec<(usize, usize)> = Vec::new();
    let mut at = 0;
    while at < count {
        let len = rng.gen_range(1..=(count - at).min(4));
        for k in 0..len - 1 {
            let a = names.iter().position(|n| *n == shuffled[at + k]).expect("present");
            let b = names
                .iter()
                .position(|n| *n == shuffled[at + k + 1])
                .expect("present");
            lt.push((a, b));
        }
        at += len;
    }
    let mut graph = Graph::new();
    for n in &names {
        graph.add_vertex(n);
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..count {
        for j in i + 1..count {
            if !rng.gen_bool(0.3) {
                continue;
            }
            graph.add_edge(&names[i], &names[j]).expect("vertices added");
            if graph.has_ktt_subgraph(2) {
                let mut pruned = Graph::new();
                for n in &names {
                    pruned.add_vertex(n);
                }
                for (a, b) in &edges {
                    pruned.add_edge(&names[*a], &names[*b]).expect("vertices added");
                }
                graph = pruned;
            } else {
                edges.push((i, j));
            }
        }
    }
    let lt_refs: Vec<(&str, &str)> = lt
        .iter()
        .map(|(a, b)| (names[*a].as_str(), names[*b].as_str()))
        .collect();
    let edge_refs: Vec<(&str, &str)> = edges
        .iter()
        .map(|(a, b)| (names[*a].as_str(), names[*b].as_str()))
        .collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Ok(ground_structure(&refs, &lt_refs, &edge_refs))
}

/// Signature of the random evaluation instances: one binary and one unary
/// relation.
pub fn eval_signature() -> BTreeMap<String, usize> {
    BTreeMap::from([("E".to_string(), 2), ("P".to_string(), 1)])
}

/// Generates a structure over [`eval_signature`] with at most
/// `max_elements` elements.
pub fn gen_eval_structure(seed: u64, max_elements: usize) -> Result<RelStructure, GenError> {
    require_positive(&[("max_elements", max_elements)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_elements);
    let mut s = RelStructure::new(eval_signature());
    let names: Vec<String> = (0..count).map(|i| format!("e{i}")).collect();
    for e in &names {
        s.add_element(e);
    }
    for u in &names {
        if rng.gen_bool(0.5) {
            s.add_tuple("P", vec![u.clone()]).expect("valid");
        }
        for v in &names {
            if rng.gen_bool(0.3) {
                s.add_tuple("E", vec![u.clone(), v.clone()]).expect("valid");
            }
        }
    }
    Ok(s)
}

/// Generates a formula over [`eval_signature`] with the variables `x`,
/// `y`, `z` and connective depth at most `max_depth`.
pub fn gen_eval_formula(seed: u64, max_depth: usize) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(0..=max_depth);
    random_formula(&mut rng, depth)
}

fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    let var = |rng: &mut ChaCha8Rng| ["x", "y", "z"][rng.gen_range(0..3)].to_string();
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => Formula::Atom {
                rel: "E".to_string(),
                args: vec![var(rng), var(rng)],
            },
            1 => Formula::Atom {
                rel: "P".to_string(),
                args: vec![var(rng)],
            },
            _ => Formula::Eq(var(rng), var(rng)),
        };
    }
    match rng.gen_range(0..6) {
        0 => Formula::Not(Box::new(random_formula(rng, depth - 1))),
        1 => Formula::And(
            Box::new(random_formula(rng, depth - 1)),
            Box::new(random_formula(rng, depth - 1)),
        ),
        2 => Formula::Or(
            Box::new(random_formula(rng, depth - 1)),
            Box::new(random_formula(rng, depth - 1)),
        ),
        3 => Formula::Implies(
            Box::new(random_formula(rng, depth - 1)),
            Box::new(random_formula(rng, depth - 1)),
        ),
        4 => Formula::Exists(var(rng), Box::new(random_formula(rng, depth - 1))),
        _ => Formula::Forall(var(rng), Box::new(random_formula(rng, depth - 1))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicotree::clean_bicotree;
    use crate::cotree::is_clean_cotree;
    use crate::structure::Poset;

    #[test]
    fn the_same_seed_reproduces_the_instance() {
        for seed in [0u64, 7, 271_828] {
            assert_eq!(
                gen_clean_cotree(seed, 10, 5).unwrap(),
                gen_clean_cotree(seed, 10, 5).unwrap()
            );
            assert_eq!(
                gen_clean_bicotree(seed, 12, 4).unwrap(),
                gen_clean_bicotree(seed, 12, 4).unwrap()
            );
            assert_eq!(
                gen_tmodel(seed, 3, 8, 3).unwrap(),
                gen_tmodel(seed, 3, 8, 3).unwrap()
            );
            assert_eq!(gen_coupling(seed, 6).unwrap(), gen_coupling(seed, 6).unwrap());
        }
    }

    #[test]
    fn generated_cotrees_are_clean_and_within_bounds() {
        for seed in 0..60 {
            let t = gen_clean_cotree(seed, 10, 5).unwrap();
            assert!(is_clean_cotree(&t), "seed {seed}");
            assert!(t.height() <= 5, "seed {seed}");
            assert!(t.ground().len() <= 10, "seed {seed}");
            t.build().expect("clean trees build");
        }
    }

    #[test]
    fn generated_bicotrees_are_clean_and_round_trip() {
        for seed in 0..40 {
            let t = gen_clean_bicotree(seed, 12, 4).unwrap();
            assert!(is_clean_bicotree(&t), "seed {seed}");
            assert!(t.height() <= 4, "seed {seed}");
            assert!(t.ground().len() <= 12, "seed {seed}");
            let b = t.build_bipartite().expect("builds");
            let again = sob_decompose(&b).expect("round trips");
            assert_eq!(
                again.build_bipartite().expect("builds").graph(),
                b.graph(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn raw_bicotrees_respect_bounds_and_clean_up() {
        for seed in 0..40 {
            let t = gen_bicotree_raw(seed, 8, 3).unwrap();
            assert!(t.height() <= 3, "seed {seed}");
            assert!(t.ground().len() <= 8, "seed {seed}");
            let cleaned = clean_bicotree(&t).expect("cleans");
            assert!(is_clean_bicotree(&cleaned), "seed {seed}");
            assert!(cleaned.height() <= 3 * t.height(), "seed {seed}");
        }
    }

    #[test]
    fn generated_models_validate_within_bounds() {
        for seed in 0..60 {
            let m = gen_tmodel(seed, 3, 8, 3).unwrap();
            assert!(m.validate().is_empty(), "seed {seed}");
            assert!(m.height() <= 3, "seed {seed}");
            assert!(m.ground().len() <= 8, "seed {seed}");
            m.build().expect("valid models build");
        }
    }

    #[test]
    fn zero_bounds_are_infeasible() {
        assert!(matches!(gen_clean_cotree(1, 0, 5), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_clean_cotree(1, 5, 0), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_clean_bicotree(1, 0, 4), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_tmodel(1, 0, 5, 3), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_graph(1, 0), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_coupling(1, 0), Err(GenError::Infeasible(_))));
    }

    #[test]
    fn chain_couplings_are_sparse_chain_unions() {
        for seed in 0..30 {
            let s = gen_chain_coupling(seed, 10).unwrap();
            let poset = Poset::new(s.domain().clone(), s.rel("Lt").iter().map(|t| (t[0].clone(), t[1].clone())).collect()).expect("closed order");
            assert!(poset.is_union_of_chains(), "seed {seed}");
            let mut g = Graph::new();
            for v in s.domain() {
                g.add_vertex(v);
            }
            for t in s.rel("E") {
                if t[0] < t[1] {
                    g.add_edge(&t[0], &t[1]).expect("vertices added");
                }
            }
            assert!(!g.has_ktt_subgraph(2), "seed {seed}");
        }
    }

    #[test]
    fn couplings_ground_every_element() {
        for seed in 0..20 {
            let s = gen_coupling(seed, 6).unwrap();
            assert_eq!(&s.unary_set("Gr"), s.domain(), "seed {seed}");
        }
    }

    #[test]
    fn eval_instances_are_seed_stable() {
        assert_eq!(gen_eval_structure(5, 5).unwrap(), gen_eval_structure(5, 5).unwrap());
        assert_eq!(gen_eval_formula(5, 3), gen_eval_formula(5, 3));
        let f = gen_eval_formula(9, 2);
        assert!(f.free_vars().len() <= 3);
    }
}
