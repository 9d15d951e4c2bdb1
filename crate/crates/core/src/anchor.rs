//! Anchors: witness maps that make leaf restrictions reconstructible.
//!
//! An anchor assigns every ground vertex `u` a small witness set `F(u)`
//! containing `u`. It is anchoring for a pair of models when, for every
//! vertex set `X` whose witness union survives into the second model's
//! ground, the two models restrict identically on `X`. [`cotree_anchor`],
//! [`bicotree_anchor`], and [`amalgam_anchor`] build canonical anchors of
//! bounded size; [`restricted_cotree`] and [`restricted_bicotree`] rebuild
//! a clean model for any surviving leaf set that the canonical anchor
//! certifies; [`verify_anchoring`] brute-forces the definition; and
//! [`build_cover`] packages restricted amalgams by color set so that every
//! small query lands inside some piece.

use crate::bicotree::{
    bicotree_node, clean_bicotree, dual_star, is_clean_bicotree, Bicotree, BicotreeError,
    BicotreeType,
};
use crate::cotree::{
    cograph_decompose, cotree_node, is_clean_cotree, Cotree, CotreeError,
};
use crate::exec;
use crate::splitdec::{amalgam_reshape, amalgam_restrict, Amalgam, SplitError};
use crate::structure::{Graph, StructureError, VertexId};
use crate::tmodel::{IdGen, Kappa, NodeId, NodeKind, SemiPlaneTree, TModel, TModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use thiserror::Error;

/// Errors raised by anchor construction, restriction, and covers.
#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("not clean: {0}")]
    NotClean(String),
    #[error("unknown leaf `{0}`")]
    UnknownLeaf(String),
    #[error("invalid anchor input: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Cotree(#[from] CotreeError),
    #[error(transparent)]
    Bicotree(#[from] BicotreeError),
    #[error(transparent)]
    Model(#[from] TModelError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

// ---------------------------------------------------------------------------
// Anchor
// ---------------------------------------------------------------------------

/// A witness map over ground vertices: every vertex carries a witness set
/// containing itself, no larger than the declared bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    map: BTreeMap<VertexId, BTreeSet<VertexId>>,
    size_bound: usize,
}

impl Anchor {
    /// Validates reflexivity and the size bound.
    pub fn new(
        map: BTreeMap<VertexId, BTreeSet<VertexId>>,
        size_bound: usize,
    ) -> Result<Anchor, AnchorError> {
        let mut issues = Vec::new();
        for (u, set) in &map {
            if !set.contains(u) {
                issues.push(format!("witness set of `{u}` does not contain it"));
            }
            if set.len() > size_bound {
                issues.push(format!(
                    "witness set of `{u}` has {} elements, above the bound {size_bound}",
                    set.len()
                ));
            }
        }
        if issues.is_empty() {
            Ok(Anchor { map, size_bound })
        } else {
            Err(AnchorError::Invalid(issues))
        }
    }

    pub fn map(&self) -> &BTreeMap<VertexId, BTreeSet<VertexId>> {
        &self.map
    }

    /// Witness set of one vertex.
    pub fn of(&self, u: &str) -> Option<&BTreeSet<VertexId>> {
        self.map.get(u)
    }

    pub fn size_bound(&self) -> usize {
        self.size_bound
    }

    /// Size of the largest witness set actually present.
    pub fn size(&self) -> usize {
        self.map.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Union of the witness sets over a vertex set.
    pub fn witness_union(
        &self,
        xs: &BTreeSet<VertexId>,
    ) -> Result<BTreeSet<VertexId>, AnchorError> {
        let mut out = BTreeSet::new();
        for x in xs {
            let set = self
                .of(x)
                .ok_or_else(|| AnchorError::UnknownLeaf(x.clone()))?;
            out.extend(set.iter().cloned());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        json!({ "size_bound": self.size_bound, "map": self.map })
    }

    pub fn from_json(doc: &Value) -> Result<Anchor, AnchorError> {
        let size_bound = doc["size_bound"]
            .as_u64()
            .ok_or_else(|| AnchorError::Json("missing size_bound".into()))?
            as usize;
        let map: BTreeMap<VertexId, BTreeSet<VertexId>> =
            serde_json::from_value(doc["map"].clone())
                .map_err(|e| AnchorError::Json(e.to_string()))?;
        Anchor::new(map, size_bound)
    }
}

// ---------------------------------------------------------------------------
// Canonical anchors
// ---------------------------------------------------------------------------

/// Builds the canonical anchor of a clean cotree: a lone leaf witnesses
/// itself, and below a typed root each branch anchor grows by the smallest
/// leaf outside the branch, so witness sets never exceed the height.
pub fn cotree_anchor(t: &Cotree) -> Result<Anchor, AnchorError> {
    if !is_clean_cotree(t) {
        return Err(AnchorError::NotClean(
            "cotree types repeat along an edge or a node has a single child".into(),
        ));
    }
    let map = cotree_anchor_map(t.model())?;
    Anchor::new(map, t.height())
}

fn cotree_anchor_map(m: &TModel) -> Result<BTreeMap<VertexId, BTreeSet<VertexId>>, AnchorError> {
    let leaves = m.ground();
    if leaves.len() <= 1 {
        return Ok(leaves
            .into_iter()
            .map(|u| (u.clone(), BTreeSet::from([u])))
            .collect());
    }
    let root = m.tree().root().expect("a model with leaves has a root").clone();
    let mut map = BTreeMap::new();
    for child in m.tree().children(&root) {
        let sub = m.subtree_at(&child)?;
        let inside = sub.ground();
        let outside = leaves
            .iter()
            .find(|u| !inside.contains(*u))
            .expect("internal nodes of clean cotrees have two branches")
            .clone();
        for (u, mut set) in cotree_anchor_map(&sub)? {
            set.insert(outside.clone());
            map.insert(u, set);
        }
    }
    Ok(map)
}

/// Builds the canonical anchor of a clean bicotree.
///
/// Union roots close each branch anchor under shortest paths to the
/// branch's smallest leaf; join roots delegate to the bipartite
/// complement; order roots add both colors' smallest leaves from the
/// first, the last, and the adjacent branches. With height `h`, witness
/// sets stay strictly below `5^(h+1)`.
pub fn bicotree_anchor(t: &Bicotree) -> Result<Anchor, AnchorError> {
    if !is_clean_bicotree(t) {
        return Err(AnchorError::NotClean(
            "bicotree branches are not connected, co-connected, or two-colored as their parent type requires"
                .into(),
        ));
    }
    let map = bicotree_anchor_map(t)?;
    let bound = five_power(t.height() + 1)? - 1;
    Anchor::new(map, bound)
}

fn five_power(exp: usize) -> Result<usize, AnchorError> {
    u32::try_from(exp)
        .ok()
        .and_then(|e| 5usize.checked_pow(e))
        .ok_or_else(|| AnchorError::Invalid(vec![format!("5^{exp} overflows the witness bound")]))
}

fn bicotree_anchor_map(
    t: &Bicotree,
) -> Result<BTreeMap<VertexId, BTreeSet<VertexId>>, AnchorError> {
    let m = t.model();
    let leaves = m.ground();
    if leaves.len() <= 1 {
        return Ok(leaves
            .into_iter()
            .map(|u| (u.clone(), BTreeSet::from([u])))
            .collect());
    }
    let root = m.tree().root().expect("a model with leaves has a root").clone();
    match t.type_of(&root).expect("two leaves force an internal root") {
        BicotreeType::U => {
            let mut map = BTreeMap::new();
            for child in m.tree().children(&root) {
                let sub = Bicotree::from_model(m.subtree_at(&child)?)?;
                let target = sub
                    .ground()
                    .into_iter()
                    .next()
                    .expect("branches are nonempty");
                let graph = sub.build_bipartite()?.graph().clone();
                let dist = graph.distances_from(&target);
                for (u, set) in bicotree_anchor_map(&sub)? {
                    let mut closed = BTreeSet::new();
                    for x in &set {
                        closed.extend(lex_shortest_path(&graph, &dist, x)?);
                    }
                    map.insert(u, closed);
                }
            }
            Ok(map)
        }
        BicotreeType::B => bicotree_anchor_map(&dual_star(t)),
        BicotreeType::O => {
            let children = m.tree().children(&root);
            let k = children.len();
            let mut smallest: Vec<[VertexId; 2]> = Vec::with_capacity(k);
            for child in &children {
                let mut pair = [None, None];
                for v in &m.tree().leaves_below(child) {
                    let c = m.color_of(v).expect("leaves are colored");
                    if pair[c - 1].is_none() {
                        pair[c - 1] = Some(v.clone());
                    }
                }
                let [one, two] = pair;
                smallest.push([
                    one.expect("order branches carry color 1"),
                    two.expect("order branches carry color 2"),
                ]);
            }
            let mut map = BTreeMap::new();
            for (i, child) in children.iter().enumerate() {
                let sub = Bicotree::from_model(m.subtree_at(child)?)?;
                let mut marked = BTreeSet::from([0, k - 1, i]);
                if i > 0 {
                    marked.insert(i - 1);
                }
                if i + 1 < k {
                    marked.insert(i + 1);
                }
                let mut witnesses = BTreeSet::new();
                for &s in &marked {
                    witnesses.insert(smallest[s][0].clone());
                    witnesses.insert(smallest[s][1].clone());
                }
                for (u, mut set) in bicotree_anchor_map(&sub)? {
                    set.extend(witnesses.iter().cloned());
                    map.insert(u, set);
                }
            }
            Ok(map)
        }
    }
}

/// Vertices of the lexicographically smallest shortest path from `from`
/// down a BFS distance table (computed from the path's other endpoint).
fn lex_shortest_path(
    graph: &Graph,
    dist: &BTreeMap<VertexId, usize>,
    from: &str,
) -> Result<Vec<VertexId>, AnchorError> {
    let start = *dist.get(from).ok_or_else(|| {
        AnchorError::Invalid(vec![format!("`{from}` cannot reach the branch witness")])
    })?;
    let mut path = vec![from.to_string()];
    let mut cur = from.to_string();
    for step in (0..start).rev() {
        cur = graph
            .neighbors(&cur)
            .into_iter()
            .find(|w| dist.get(w) == Some(&step))
            .expect("a shortest path steps down the distance table");
        path.push(cur.clone());
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Restricted models
// ---------------------------------------------------------------------------

/// Rebuilds the restricted model of a clean cotree on a surviving leaf set.
///
/// When some surviving leaf keeps its whole witness set inside `lprime`,
/// the root type is kept: every occupied branch contributes its own
/// restricted tree, spliced up one level when that tree's root repeats the
/// parent type. Otherwise (the escape case) the result is the fresh clean
/// decomposition of the restricted graph. Either way the output is clean,
/// models the induced subgraph, and the canonical anchor is anchoring for
/// the pair.
pub fn restricted_cotree(
    t: &Cotree,
    f: &Anchor,
    lprime: &BTreeSet<VertexId>,
) -> Result<Cotree, AnchorError> {
    if !is_clean_cotree(t) {
        return Err(AnchorError::NotClean("restriction needs a clean cotree".into()));
    }
    let ground = t.ground();
    if let Some(missing) = lprime.iter().find(|u| !ground.contains(*u)) {
        return Err(AnchorError::UnknownLeaf(missing.clone()));
    }
    restricted_cotree_inner(t, f.map(), lprime)
}

fn restricted_cotree_inner(
    t: &Cotree,
    f: &BTreeMap<VertexId, BTreeSet<VertexId>>,
    lprime: &BTreeSet<VertexId>,
) -> Result<Cotree, AnchorError> {
    if lprime.is_empty() {
        return Ok(Cotree::from_model(TModel::empty(1))?);
    }
    let ground = t.ground();
    if *lprime == ground {
        return Ok(t.clone());
    }
    let anchored = lprime
        .iter()
        .any(|u| f.get(u).is_some_and(|set| set.is_subset(lprime)));
    if !anchored {
        let graph = t.build()?.induced_subgraph(lprime)?;
        return Ok(cograph_decompose(&graph)?);
    }
    let m = t.model();
    let root = m.tree().root().expect("a model with leaves has a root").clone();
    let ty = t
        .type_of(&root)
        .expect("a proper nonempty restriction leaves at least two leaves");
    let mut pieces = Vec::new();
    for child in m.tree().children(&root) {
        let sub = Cotree::from_model(m.subtree_at(&child)?)?;
        let occupied: BTreeSet<VertexId> = sub.ground().intersection(lprime).cloned().collect();
        if occupied.is_empty() {
            continue;
        }
        let branch_anchor = cotree_anchor(&sub)?;
        let piece = restricted_cotree_inner(&sub, branch_anchor.map(), &occupied)?;
        let piece_root = piece.model().tree().root().expect("occupied piece").clone();
        if piece.type_of(&piece_root) == Some(ty) {
            for grand in piece.model().tree().children(&piece_root) {
                pieces.push(Cotree::from_model(piece.model().subtree_at(&grand)?)?);
            }
        } else {
            pieces.push(piece);
        }
    }
    if pieces.len() == 1 {
        return Ok(pieces.pop().expect("one piece"));
    }
    Ok(cotree_node(ty, pieces))
}

/// Rebuilds the restricted model of a clean bicotree on a surviving leaf
/// set.
///
/// Union roots keep one child per connected component of each occupied
/// branch's restricted graph: the component holding the branch's smallest
/// leaf recurses, the others get fresh clean models. Join roots go through
/// the bipartite complement. Order roots group the occupied branches into
/// contiguous two-colored runs where a two-colored branch flanked by
/// two-colored neighbors keeps a child of its own; monochromatic runs
/// collapse into fresh clean models, and if no such grouping exists the
/// whole restriction is rebuilt fresh. The escape case (no surviving leaf
/// keeps its witnesses) likewise returns the fresh clean decomposition.
pub fn restricted_bicotree(
    t: &Bicotree,
    f: &Anchor,
    lprime: &BTreeSet<VertexId>,
) -> Result<Bicotree, AnchorError> {
    if !is_clean_bicotree(t) {
        return Err(AnchorError::NotClean("restriction needs a clean bicotree".into()));
    }
    let ground = t.ground();
    if let Some(missing) = lprime.iter().find(|u| !ground.contains(*u)) {
        return Err(AnchorError::UnknownLeaf(missing.clone()));
    }
    restricted_bicotree_inner(t, f.map(), lprime)
}

fn fresh_bicotree(m: &TModel, lprime: &BTreeSet<VertexId>) -> Result<Bicotree, AnchorError> {
    Ok(clean_bicotree(&Bicotree::from_model(m.restrict(lprime)?)?)?)
}

fn restricted_bicotree_inner(
    t: &Bicotree,
    f: &BTreeMap<VertexId, BTreeSet<VertexId>>,
    lprime: &BTreeSet<VertexId>,
) -> Result<Bicotree, AnchorError> {
    if lprime.is_empty() {
        return Ok(Bicotree::from_model(TModel::empty(2))?);
    }
    let ground = t.ground();
    if *lprime == ground {
        return Ok(t.clone());
    }
    let anchored = lprime
        .iter()
        .any(|u| f.get(u).is_some_and(|set| set.is_subset(lprime)));
    let m = t.model();
    if !anchored {
        return fresh_bicotree(m, lprime);
    }
    let root = m.tree().root().expect("a model with leaves has a root").clone();
    match t
        .type_of(&root)
        .expect("a proper nonempty restriction leaves at least two leaves")
    {
        BicotreeType::U => {
            let mut branches = Vec::new();
            for child in m.tree().children(&root) {
                let sub = Bicotree::from_model(m.subtree_at(&child)?)?;
                let occupied: BTreeSet<VertexId> =
                    sub.ground().intersection(lprime).cloned().collect();
                if occupied.is_empty() {
                    continue;
                }
                let target = sub
                    .ground()
                    .into_iter()
                    .next()
                    .expect("branches are nonempty");
                let graph = sub.build_bipartite()?.graph().induced_subgraph(&occupied)?;
                for component in graph.connected_components() {
                    if component.contains(&target) {
                        let branch_anchor = bicotree_anchor(&sub)?;
                        branches.push(restricted_bicotree_inner(
                            &sub,
                            branch_anchor.map(),
                            &component,
                        )?);
                    } else {
                        branches.push(fresh_bicotree(sub.model(), &component)?);
                    }
                }
            }
            Ok(bicotree_node(BicotreeType::U, branches))
        }
        BicotreeType::B => Ok(dual_star(&restricted_bicotree_inner(
            &dual_star(t),
            f,
            lprime,
        )?)),
        BicotreeType::O => {
            let mut occupied: Vec<(NodeId, BTreeSet<VertexId>, Colors)> = Vec::new();
            for child in m.tree().children(&root) {
                let inside: BTreeSet<VertexId> = m
                    .tree()
                    .leaves_below(&child)
                    .intersection(lprime)
                    .cloned()
                    .collect();
                if inside.is_empty() {
                    continue;
                }
                let one = inside.iter().any(|v| m.color_of(v) == Some(1));
                let two = inside.iter().any(|v| m.color_of(v) == Some(2));
                occupied.push((child, inside, Colors::from_flags(one, two)));
            }
            let colors: Vec<Colors> = occupied.iter().map(|(_, _, c)| *c).collect();
            let Some(runs) = order_blocks(&colors) else {
                return fresh_bicotree(m, lprime);
            };
            let mut out = Vec::new();
            for run in runs {
                if run.len() == 1 && occupied[run.start].2 == Colors::Both {
                    let (child, inside, _) = &occupied[run.start];
                    let sub = Bicotree::from_model(m.subtree_at(child)?)?;
                    let branch_anchor = bicotree_anchor(&sub)?;
                    out.push(restricted_bicotree_inner(&sub, branch_anchor.map(), inside)?);
                } else {
                    let mut union = BTreeSet::new();
                    for (_, inside, _) in &occupied[run] {
                        union.extend(inside.iter().cloned());
                    }
                    out.push(fresh_bicotree(m, &union)?);
                }
            }
            Ok(bicotree_node(BicotreeType::O, out))
        }
    }
}

/// Which leaf colors survive in an occupied branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Colors {
    One,
    Two,
    Both,
}

impl Colors {
    fn from_flags(one: bool, two: bool) -> Colors {
        match (one, two) {
            (true, true) => Colors::Both,
            (true, false) => Colors::One,
            (false, true) => Colors::Two,
            (false, false) => unreachable!("occupied branches keep a colored leaf"),
        }
    }
}

/// Groups a sequence of occupied-branch colors into contiguous runs that
/// are each two-colored as a whole: a two-colored branch opens a run and
/// absorbs following color-2 branches (color-1 branches may precede it),
/// and otherwise a color-1 run must be closed by color-2 branches.
/// Returns `None` when no such grouping exists.
fn order_blocks(colors: &[Colors]) -> Option<Vec<Range<usize>>> {
    let n = colors.len();
    let mut runs = Vec::new();
    let mut p = 0;
    while p < n {
        match colors[p] {
            Colors::Both => {
                let mut q = p + 1;
                while q < n && colors[q] == Colors::Two {
                    q += 1;
                }
                runs.push(p..q);
                p = q;
            }
            Colors::One => {
                let mut q = p;
                while q < n && colors[q] == Colors::One {
                    q += 1;
                }
                if q == n {
                    return None;
                }
                if colors[q] == Colors::Both {
                    q += 1;
                }
                while q < n && colors[q] == Colors::Two {
                    q += 1;
                }
                runs.push(p..q);
                p = q;
            }
            Colors::Two => return None,
        }
    }
    Some(runs)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Largest ground size that is checked exhaustively.
pub const EXHAUSTIVE_GROUND_LIMIT: usize = 16;
/// Number of sampled vertex sets when the ground is above the limit.
pub const SAMPLE_BUDGET: usize = 10_000;
const SAMPLE_SEED: u64 = 271_828;

/// Outcome of an anchoring check.
#[derive(Clone, Debug)]
pub struct AnchoringReport {
    /// No qualifying vertex set separated the two models.
    pub pass: bool,
    /// The smallest-index separating vertex set found, if any.
    pub witness: Option<BTreeSet<VertexId>>,
    /// Number of candidate vertex sets in the scan.
    pub checked: usize,
    /// Whether the scan enumerated every subset of the ground.
    pub exhaustive: bool,
    /// Whether the ground size forced the sampling fallback.
    pub cap_applied: bool,
    /// Problems that prevented the check from running at all.
    pub issues: Vec<String>,
}

/// Brute-forces the anchoring condition: for every vertex set `X` whose
/// witness union survives into `tprime`'s ground, the two models must
/// restrict identically on `X` (isomorphic with the ground fixed).
/// Grounds above [`EXHAUSTIVE_GROUND_LIMIT`] are sampled instead, with
/// [`SAMPLE_BUDGET`] subsets drawn from a fixed seed, and the report says
/// so.
pub fn verify_anchoring(t: &TModel, tprime: &TModel, f: &Anchor) -> AnchoringReport {
    let ground = t.ground();
    let lprime = tprime.ground();
    let mut issues = Vec::new();
    if !lprime.is_subset(&ground) {
        issues.push("the restricted ground is not a subset of the original".to_string());
    }
    for u in &ground {
        if f.of(u).is_none() {
            issues.push(format!("the anchor map misses `{u}`"));
        }
    }
    if !issues.is_empty() {
        return AnchoringReport {
            pass: false,
            witness: None,
            checked: 0,
            exhaustive: false,
            cap_applied: false,
            issues,
        };
    }
    let order: Vec<VertexId> = ground.iter().cloned().collect();
    let check = |x: &BTreeSet<VertexId>| -> Option<BTreeSet<VertexId>> {
        let mut witnesses = BTreeSet::new();
        for u in x {
            witnesses.extend(f.of(u).expect("checked total").iter().cloned());
        }
        if !witnesses.is_subset(&lprime) {
            return None;
        }
        match (t.restrict(x), tprime.restrict(x)) {
            (Ok(a), Ok(b)) if a.iso_fixing_ground(&b) => None,
            _ => Some(x.clone()),
        }
    };
    let n = order.len();
    if n <= EXHAUSTIVE_GROUND_LIMIT {
        let total = 1usize << n;
        let hit = exec::find_first_failure(total, |mask| {
            let x: BTreeSet<VertexId> = order
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, v)| v.clone())
                .collect();
            check(&x)
        });
        AnchoringReport {
            pass: hit.is_none(),
            witness: hit.map(|(_, w)| w),
            checked: total,
            exhaustive: true,
            cap_applied: false,
            issues: Vec::new(),
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let samples: Vec<BTreeSet<VertexId>> = (0..SAMPLE_BUDGET)
            .map(|_| {
                order
                    .iter()
                    .filter(|_| rng.gen_bool(0.5))
                    .cloned()
                    .collect()
            })
            .collect();
        let hit = exec::find_first_failure(samples.len(), |i| check(&samples[i]));
        AnchoringReport {
            pass: hit.is_none(),
            witness: hit.map(|(_, w)| w),
            checked: samples.len(),
            exhaustive: false,
            cap_applied: true,
            issues: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Amalgam anchors and covers
// ---------------------------------------------------------------------------

/// Builds the anchor of an amalgam: each vertex unites its cell tree's
/// anchor with the anchors of every pair tree its cell belongs to, all
/// translated back to ground ids through the leaf injections. With tree
/// heights at most `h` and `n` cells, sizes stay within
/// `h + 5^(h+1) * (n - 1)`.
pub fn amalgam_anchor(a: &Amalgam) -> Result<Anchor, AnchorError> {
    a.validate()?;
    let n = a.size();
    let mut height = 0usize;
    let mut map: BTreeMap<VertexId, BTreeSet<VertexId>> = a
        .ground()
        .iter()
        .map(|v| (v.clone(), BTreeSet::new()))
        .collect();
    for i in 1..=n {
        let copies: BTreeMap<NodeId, VertexId> = a
            .ground()
            .iter()
            .filter(|v| a.gamma().get(*v) == Some(&i))
            .map(|v| (a.cell_leaf(v).expect("validated").clone(), v.clone()))
            .collect();
        if copies.is_empty() {
            continue;
        }
        let tree = a.cell_tree(i).expect("validated");
        height = height.max(tree.height());
        let anchor = cotree_anchor(&Cotree::from_model(tree.clone())?)?;
        pull_back(&mut map, &anchor, &copies)?;
    }
    for i in 1..=n {
        for j in i + 1..=n {
            let copies: BTreeMap<NodeId, VertexId> = a
                .ground()
                .iter()
                .filter(|v| matches!(a.gamma().get(*v), Some(c) if *c == i || *c == j))
                .map(|v| (a.pair_leaf(i, j, v).expect("validated").clone(), v.clone()))
                .collect();
            if copies.is_empty() {
                continue;
            }
            let tree = a.pair_tree(i, j).expect("validated");
            height = height.max(tree.height());
            let anchor = bicotree_anchor(&Bicotree::from_model(tree.clone())?)?;
            pull_back(&mut map, &anchor, &copies)?;
        }
    }
    let bound = height + five_power(height + 1)? * n.saturating_sub(1);
    Anchor::new(map, bound)
}

/// Translates a tree anchor back to ground ids through a copy table and
/// unions it into the accumulating map.
fn pull_back(
    map: &mut BTreeMap<VertexId, BTreeSet<VertexId>>,
    anchor: &Anchor,
    copies: &BTreeMap<NodeId, VertexId>,
) -> Result<(), AnchorError> {
    for (leaf, v) in copies {
        let set = anchor
            .of(leaf)
            .ok_or_else(|| AnchorError::UnknownLeaf(leaf.clone()))?;
        let entry = map.get_mut(v).expect("every ground vertex has an entry");
        for w in set {
            let back = copies
                .get(w)
                .ok_or_else(|| AnchorError::UnknownLeaf(w.clone()))?;
            entry.insert(back.clone());
        }
    }
    Ok(())
}

/// The ground vertex standing for one coupling element: a ground vertex is
/// its own witness; a tree node is represented by the smallest ground
/// vertex with a leaf copy below it.
pub fn ground_witness(a: &Amalgam, x: &str) -> Option<VertexId> {
    if a.ground().contains(x) {
        return Some(x.to_string());
    }
    let n = a.size();
    for i in 1..=n {
        if let Some(tree) = a.cell_tree(i) {
            if tree.tree().has_node(x) {
                let below = tree.tree().leaves_below(x);
                return a
                    .ground()
                    .iter()
                    .find(|v| a.cell_leaf(v).is_some_and(|l| below.contains(l)))
                    .cloned();
            }
        }
        for j in i + 1..=n {
            if let Some(tree) = a.pair_tree(i, j) {
                if tree.tree().has_node(x) {
                    let below = tree.tree().leaves_below(x);
                    return a
                        .ground()
                        .iter()
                        .find(|v| a.pair_leaf(i, j, v).is_some_and(|l| below.contains(l)))
                        .cloned();
                }
            }
        }
    }
    None
}

/// Witness closure of a query over the coupling domain: each element is
/// replaced by its ground witness, then the anchor sets are united.
pub fn query_witnesses(
    a: &Amalgam,
    f: &Anchor,
    xs: &BTreeSet<String>,
) -> Result<BTreeSet<VertexId>, AnchorError> {
    let mut out = BTreeSet::new();
    for x in xs {
        let v = ground_witness(a, x).ok_or_else(|| AnchorError::UnknownLeaf(x.clone()))?;
        out.extend(
            f.of(&v)
                .ok_or_else(|| AnchorError::UnknownLeaf(v.clone()))?
                .iter()
                .cloned(),
        );
    }
    Ok(out)
}

/// One piece of a cover: the color set, the vertices whose whole witness
/// set wears those colors, and the restricted amalgam built for them.
#[derive(Clone, Debug)]
pub struct CoverPiece {
    pub colors: BTreeSet<usize>,
    pub members: BTreeSet<VertexId>,
    pub amalgam: Amalgam,
}

const COVER_PALETTE_LIMIT: usize = 16;

/// Builds restricted amalgams for every color set of size at most `p * q`,
/// where `q` is the size of the amalgam's anchor. A piece's member set
/// collects the vertices whose whole witness set is colored inside the
/// piece's color set; its trees are the restricted models on the members'
/// leaf copies. Queries of at most `p` vertices land inside some piece
/// through their witness closure.
pub fn build_cover(
    a: &Amalgam,
    zeta: &BTreeMap<VertexId, usize>,
    p: usize,
) -> Result<Vec<CoverPiece>, AnchorError> {
    if p == 0 {
        return Err(AnchorError::Invalid(vec![
            "the query size must be at least one".into(),
        ]));
    }
    for v in a.ground() {
        if !zeta.contains_key(v) {
            return Err(AnchorError::Invalid(vec![format!(
                "the coloring misses `{v}`"
            )]));
        }
    }
    let anchor = amalgam_anchor(a)?;
    let budget = p.saturating_mul(anchor.size().max(1));
    let palette: Vec<usize> = a
        .ground()
        .iter()
        .map(|v| zeta[v])
        .collect::<BTreeSet<usize>>()
        .into_iter()
        .collect();
    if palette.len() > COVER_PALETTE_LIMIT {
        return Err(AnchorError::Invalid(vec![format!(
            "{} colors are too many to enumerate",
            palette.len()
        )]));
    }
    let mut pieces = Vec::new();
    for mask in 0u32..(1u32 << palette.len()) {
        let colors: BTreeSet<usize> = palette
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, c)| *c)
            .collect();
        if colors.len() > budget {
            continue;
        }
        let members: BTreeSet<VertexId> = a
            .ground()
            .iter()
            .filter(|v| {
                anchor
                    .of(v)
                    .expect("anchors cover the ground")
                    .iter()
                    .all(|w| colors.contains(&zeta[w]))
            })
            .cloned()
            .collect();
        let amalgam = cover_member(a, &members)?;
        pieces.push(CoverPiece {
            colors,
            members,
            amalgam,
        });
    }
    Ok(pieces)
}

/// Builds the restricted amalgam for one member set: every tree is the
/// restricted model on the members' leaf copies, internal nodes renamed
/// away from each other and from the ground.
fn cover_member(a: &Amalgam, members: &BTreeSet<VertexId>) -> Result<Amalgam, AnchorError> {
    let n = a.size();
    let mut cell_trees = BTreeMap::new();
    let mut pair_trees = BTreeMap::new();
    for i in 1..=n {
        let tree = a.cell_tree(i).expect("validated");
        let keep: BTreeSet<NodeId> = members
            .iter()
            .filter(|v| a.gamma().get(*v) == Some(&i))
            .map(|v| a.cell_leaf(v).expect("validated").clone())
            .collect();
        let cotree = Cotree::from_model(tree.clone())?;
        let anchor = cotree_anchor(&cotree)?;
        cell_trees.insert(i, restricted_cotree(&cotree, &anchor, &keep)?.into_model());
    }
    for i in 1..=n {
        for j in i + 1..=n {
            let tree = a.pair_tree(i, j).expect("validated");
            let keep: BTreeSet<NodeId> = members
                .iter()
                .filter(|v| matches!(a.gamma().get(*v), Some(c) if *c == i || *c == j))
                .map(|v| a.pair_leaf(i, j, v).expect("validated").clone())
                .collect();
            let bicotree = Bicotree::from_model(tree.clone())?;
            let anchor = bicotree_anchor(&bicotree)?;
            pair_trees.insert(
                (i, j),
                restricted_bicotree(&bicotree, &anchor, &keep)?.into_model(),
            );
        }
    }
    let mut taken: BTreeSet<String> = members.clone();
    for tree in cell_trees.values().chain(pair_trees.values()) {
        taken.extend(tree.ground());
    }
    let cell_trees = cell_trees
        .into_iter()
        .map(|(i, tree)| (i, rebrand_internals(&tree, &mut taken)))
        .collect();
    let pair_trees = pair_trees
        .into_iter()
        .map(|(key, tree)| (key, rebrand_internals(&tree, &mut taken)))
        .collect();
    Ok(amalgam_reshape(a, members, cell_trees, pair_trees)?)
}

/// Renames the internal nodes of a model away from a taken id set, leaving
/// the leaves untouched; extends the set with the new names.
fn rebrand_internals(m: &TModel, taken: &mut BTreeSet<String>) -> TModel {
    let t = m.tree();
    let mut gen = IdGen::avoiding(taken.iter().map(String::as_str));
    let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut fresh = Vec::new();
    for v in t.nodes() {
        if t.is_leaf(v) {
            rename.insert(v.clone(), v.clone());
        } else {
            let id = gen.next_id();
            fresh.push(id.clone());
            rename.insert(v.clone(), id);
        }
    }
    taken.extend(fresh);
    let mut kinds = BTreeMap::new();
    let mut parents = BTreeMap::new();
    let mut orders = BTreeMap::new();
    for v in t.nodes() {
        let nv = rename[v].clone();
        kinds.insert(nv.clone(), t.kind_of(v).expect("node"));
        parents.insert(nv.clone(), rename[t.parent_of(v).expect("node")].clone());
        if t.kind_of(v) == Some(NodeKind::C) {
            orders.insert(
                nv,
                t.children(v).iter().map(|c| rename[c].clone()).collect(),
            );
        }
    }
    let root = t.root().map(|r| rename[r].clone());
    let kappa: BTreeMap<NodeId, Kappa> = t
        .nodes()
        .filter_map(|v| m.kappa_of(v).map(|k| (rename[v].clone(), k.clone())))
        .collect();
    TModel::new(
        SemiPlaneTree::from_parts(kinds, parents, orders, root),
        m.gamma().clone(),
        kappa,
        m.n(),
    )
}

/// True iff the two amalgams restrict identically on a common ground
/// subset: same coloring and piecewise isomorphic trees with the leaves
/// fixed. The trees must use matching leaf copy ids, which holds between
/// an amalgam and its cover pieces.
pub fn amalgams_agree_on(
    a: &Amalgam,
    b: &Amalgam,
    w: &BTreeSet<VertexId>,
) -> Result<bool, AnchorError> {
    if !w.is_subset(a.ground()) || !w.is_subset(b.ground()) {
        return Ok(false);
    }
    let ra = amalgam_restrict(a, w)?;
    let rb = amalgam_restrict(b, w)?;
    if ra.size() != rb.size() || ra.gamma() != rb.gamma() {
        return Ok(false);
    }
    let n = ra.size();
    for i in 1..=n {
        match (ra.cell_tree(i), rb.cell_tree(i)) {
            (Some(x), Some(y)) if x.iso_fixing_ground(y) => {}
            (None, None) => {}
            _ => return Ok(false),
        }
    }
    for i in 1..=n {
        for j in i + 1..=n {
            match (ra.pair_tree(i, j), rb.pair_tree(i, j)) {
                (Some(x), Some(y)) if x.iso_fixing_ground(y) => {}
                (None, None) => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

/// True iff some piece holds the whole witness set among its members and
/// agrees with the amalgam there.
pub fn cover_serves(
    a: &Amalgam,
    pieces: &[CoverPiece],
    witnesses: &BTreeSet<VertexId>,
) -> Result<bool, AnchorError> {
    for piece in pieces {
        if witnesses.is_subset(&piece.members)
            && amalgams_agree_on(a, &piece.amalgam, witnesses)?
        {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicotree::bicotree_leaf;
    use crate::cotree::{cotree_leaf, CotreeType};
    use crate::splitdec::{amalgam_build, coupling_view, sbuild, Split};
    use crate::structure::Graph;

    fn set(vs: &[&str]) -> BTreeSet<VertexId> {
        vs.iter().map(|v| v.to_string()).collect()
    }

    fn graph(edges: &[(&str, &str)], isolated: &[&str]) -> Graph {
        let mut g = Graph::new();
        for v in isolated {
            g.add_vertex(v);
        }
        for (x, y) in edges {
            g.add_vertex(x);
            g.add_vertex(y);
            g.add_edge(x, y).expect("vertices added");
        }
        g
    }

    fn two_join_pairs() -> Cotree {
        cotree_node(
            CotreeType::U,
            vec![
                cotree_node(CotreeType::J, vec![cotree_leaf("a"), cotree_leaf("b")]),
                cotree_node(CotreeType::J, vec![cotree_leaf("c"), cotree_leaf("d")]),
            ],
        )
    }

    fn deep_cotree() -> Cotree {
        cotree_node(
            CotreeType::U,
            vec![
                cotree_node(
                    CotreeType::J,
                    vec![
                        cotree_node(CotreeType::U, vec![cotree_leaf("a"), cotree_leaf("b")]),
                        cotree_leaf("c"),
                    ],
                ),
                cotree_node(CotreeType::J, vec![cotree_leaf("d"), cotree_leaf("e")]),
            ],
        )
    }

    fn join_pair(i: usize) -> Bicotree {
        bicotree_node(
            BicotreeType::B,
            vec![
                bicotree_leaf(&format!("x{i}"), 1),
                bicotree_leaf(&format!("y{i}"), 2),
            ],
        )
    }

    fn pivot_row(k: usize) -> Bicotree {
        bicotree_node(BicotreeType::O, (1..=k).map(join_pair).collect())
    }

    fn path_branch_union() -> Bicotree {
        // The first branch models the path x-y-z (a complete join over
        // colors {x:1, z:1} and {y:2}); the second is a lone leaf.
        let branch = bicotree_node(
            BicotreeType::B,
            vec![
                bicotree_leaf("x", 1),
                bicotree_leaf("y", 2),
                bicotree_leaf("z", 1),
            ],
        );
        bicotree_node(BicotreeType::U, vec![branch, bicotree_leaf("w", 1)])
    }

    fn subset_of(order: &[VertexId], mask: u32) -> BTreeSet<VertexId> {
        order
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, v)| v.clone())
            .collect()
    }

    fn c4() -> Graph {
        graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")], &[])
    }

    fn c4_two_cell_amalgam() -> Amalgam {
        let g = c4();
        let split = Split {
            graph: g.clone(),
            gamma: BTreeMap::from([
                ("a".to_string(), 1),
                ("b".to_string(), 2),
                ("c".to_string(), 1),
                ("d".to_string(), 2),
            ]),
            size: 2,
            height: 2,
        };
        amalgam_build(&g, &split).expect("valid split")
    }

    fn c4_zeta() -> BTreeMap<VertexId, usize> {
        BTreeMap::from([
            ("a".to_string(), 1),
            ("b".to_string(), 2),
            ("c".to_string(), 1),
            ("d".to_string(), 2),
        ])
    }

    #[test]
    fn anchors_require_every_vertex_to_witness_itself() {
        let map = BTreeMap::from([("a".to_string(), set(&["b"]))]);
        assert!(matches!(Anchor::new(map, 3), Err(AnchorError::Invalid(_))));
        let map = BTreeMap::from([("a".to_string(), set(&["a", "b", "c"]))]);
        assert!(matches!(Anchor::new(map, 2), Err(AnchorError::Invalid(_))));
    }

    #[test]
    fn anchor_json_round_trip() {
        let anchor = cotree_anchor(&two_join_pairs()).expect("clean");
        let back = Anchor::from_json(&anchor.to_json()).expect("round trip");
        assert_eq!(back, anchor);
    }

    #[test]
    fn a_single_leaf_witnesses_itself() {
        let anchor = cotree_anchor(&cotree_leaf("u")).expect("clean");
        assert_eq!(anchor.of("u"), Some(&set(&["u"])));
        assert_eq!(anchor.size_bound(), 1);
    }

    #[test]
    fn join_pair_leaves_witness_each_other() {
        let t = cotree_node(CotreeType::J, vec![cotree_leaf("a"), cotree_leaf("b")]);
        let anchor = cotree_anchor(&t).expect("clean");
        assert_eq!(anchor.of("a"), Some(&set(&["a", "b"])));
        assert_eq!(anchor.of("b"), Some(&set(&["a", "b"])));
        assert_eq!(anchor.size_bound(), 2);
    }

    #[test]
    fn cotree_witness_sets_grow_by_one_per_level() {
        let anchor = cotree_anchor(&two_join_pairs()).expect("clean");
        assert_eq!(anchor.of("a"), Some(&set(&["a", "b", "c"])));
        assert_eq!(anchor.of("c"), Some(&set(&["a", "c", "d"])));
        assert_eq!(anchor.size_bound(), 3);
        assert_eq!(anchor.size(), 3);
    }

    #[test]
    fn cotree_anchors_require_clean_trees() {
        let t = cotree_node(
            CotreeType::U,
            vec![
                cotree_leaf("a"),
                cotree_node(CotreeType::U, vec![cotree_leaf("b"), cotree_leaf("c")]),
            ],
        );
        assert!(matches!(cotree_anchor(&t), Err(AnchorError::NotClean(_))));
    }

    #[test]
    fn restriction_to_all_leaves_or_none_is_trivial() {
        let t = two_join_pairs();
        let anchor = cotree_anchor(&t).expect("clean");
        let all = restricted_cotree(&t, &anchor, &t.ground()).expect("build");
        assert!(all.model().iso_fixing_ground(t.model()));
        let none = restricted_cotree(&t, &anchor, &BTreeSet::new()).expect("build");
        assert!(none.ground().is_empty());
    }

    #[test]
    fn escape_restrictions_decompose_the_induced_graph_fresh() {
        let t = two_join_pairs();
        let anchor = cotree_anchor(&t).expect("clean");
        let lprime = set(&["a", "c"]);
        assert!(lprime
            .iter()
            .all(|u| !anchor.of(u).expect("total").is_subset(&lprime)));
        let restricted = restricted_cotree(&t, &anchor, &lprime).expect("build");
        assert_eq!(restricted.ground(), lprime);
        assert_eq!(restricted.build().expect("cograph").edge_count(), 0);
    }

    #[test]
    fn the_escape_case_is_vacuously_anchoring() {
        let t = two_join_pairs();
        let anchor = cotree_anchor(&t).expect("clean");
        let lprime = set(&["a", "d"]);
        let order: Vec<VertexId> = t.ground().into_iter().collect();
        for mask in 1u32..16 {
            let x = subset_of(&order, mask);
            let y = anchor.witness_union(&x).expect("total");
            assert!(!y.is_subset(&lprime), "the escape premise must stay empty");
        }
        let restricted = restricted_cotree(&t, &anchor, &lprime).expect("build");
        assert!(verify_anchoring(t.model(), restricted.model(), &anchor).pass);
    }

    #[test]
    fn cotree_restrictions_are_anchoring_for_every_leaf_set() {
        for t in [two_join_pairs(), deep_cotree()] {
            let anchor = cotree_anchor(&t).expect("clean");
            let full = t.build().expect("graph");
            let order: Vec<VertexId> = t.ground().into_iter().collect();
            for mask in 0u32..(1u32 << order.len()) {
                let lprime = subset_of(&order, mask);
                let restricted = restricted_cotree(&t, &anchor, &lprime).expect("build");
                assert!(is_clean_cotree(&restricted));
                assert_eq!(restricted.ground(), lprime);
                if !lprime.is_empty() {
                    assert_eq!(
                        restricted.build().expect("graph"),
                        full.induced_subgraph(&lprime).expect("subset")
                    );
                }
                let report = verify_anchoring(t.model(), restricted.model(), &anchor);
                assert!(
                    report.pass,
                    "separated at {lprime:?}: {:?}",
                    report.witness
                );
                assert!(report.exhaustive);
            }
        }
    }

    #[test]
    fn verification_pins_a_separating_vertex_set() {
        let join = cotree_node(CotreeType::J, vec![cotree_leaf("a"), cotree_leaf("b")]);
        let union = cotree_node(CotreeType::U, vec![cotree_leaf("a"), cotree_leaf("b")]);
        let full = Anchor::new(
            BTreeMap::from([
                ("a".to_string(), set(&["a", "b"])),
                ("b".to_string(), set(&["a", "b"])),
            ]),
            2,
        )
        .expect("valid");
        let report = verify_anchoring(join.model(), union.model(), &full);
        assert!(!report.pass);
        assert_eq!(report.witness, Some(set(&["a"])));
        let report = verify_anchoring(join.model(), join.model(), &full);
        assert!(report.pass);
        assert_eq!(report.checked, 4);
    }

    #[test]
    fn grounds_above_the_limit_fall_back_to_sampling() {
        let mut children = vec![cotree_leaf("q")];
        for i in 0..8 {
            children.push(cotree_node(
                CotreeType::J,
                vec![
                    cotree_leaf(&format!("x{i}")),
                    cotree_leaf(&format!("y{i}")),
                ],
            ));
        }
        let t = cotree_node(CotreeType::U, children);
        assert_eq!(t.ground().len(), 17);
        let anchor = cotree_anchor(&t).expect("clean");
        let report = verify_anchoring(t.model(), t.model(), &anchor);
        assert!(report.pass);
        assert!(report.cap_applied);
        assert!(!report.exhaustive);
        assert_eq!(report.checked, SAMPLE_BUDGET);
    }

    #[test]
    fn union_roots_close_witnesses_under_shortest_paths() {
        let t = path_branch_union();
        let anchor = bicotree_anchor(&t).expect("clean");
        assert_eq!(anchor.of("x"), Some(&set(&["x"])));
        assert_eq!(anchor.of("y"), Some(&set(&["x", "y"])));
        assert_eq!(anchor.of("z"), Some(&set(&["x", "y", "z"])));
        assert_eq!(anchor.of("w"), Some(&set(&["w"])));
        assert_eq!(anchor.size_bound(), five_power(t.height() + 1).expect("small") - 1);
    }

    #[test]
    fn join_root_pairs_delegate_to_the_complement() {
        let t = join_pair(1);
        let anchor = bicotree_anchor(&t).expect("clean");
        assert_eq!(anchor.of("x1"), Some(&set(&["x1"])));
        assert_eq!(anchor.of("y1"), Some(&set(&["y1"])));
        assert!(anchor.size() <= 6);
    }

    #[test]
    fn order_roots_mark_boundary_and_neighbor_branches() {
        let anchor = bicotree_anchor(&pivot_row(4)).expect("clean");
        assert_eq!(
            anchor.of("x2"),
            Some(&set(&["x1", "x2", "x3", "x4", "y1", "y2", "y3", "y4"]))
        );
        assert_eq!(
            anchor.of("x1"),
            Some(&set(&["x1", "x2", "x4", "y1", "y2", "y4"]))
        );
    }

    #[test]
    fn bicotree_restrictions_are_anchoring_for_every_leaf_set() {
        let complement_case = bicotree_node(
            BicotreeType::B,
            vec![
                bicotree_node(
                    BicotreeType::U,
                    vec![bicotree_leaf("a", 1), bicotree_leaf("b", 2)],
                ),
                bicotree_leaf("c", 2),
            ],
        );
        for t in [path_branch_union(), pivot_row(3), complement_case] {
            let anchor = bicotree_anchor(&t).expect("clean");
            let full = t.build_bipartite().expect("graph").graph().clone();
            let order: Vec<VertexId> = t.ground().into_iter().collect();
            for mask in 0u32..(1u32 << order.len()) {
                let lprime = subset_of(&order, mask);
                let restricted = restricted_bicotree(&t, &anchor, &lprime).expect("build");
                assert!(is_clean_bicotree(&restricted));
                assert_eq!(restricted.ground(), lprime);
                if !lprime.is_empty() {
                    assert_eq!(
                        restricted.build_bipartite().expect("graph").graph(),
                        &full.induced_subgraph(&lprime).expect("subset")
                    );
                }
                let report = verify_anchoring(t.model(), restricted.model(), &anchor);
                assert!(
                    report.pass,
                    "separated at {lprime:?}: {:?}",
                    report.witness
                );
            }
        }
    }

    #[test]
    fn anchored_pivots_stay_children_after_restriction() {
        let wide_first = bicotree_node(
            BicotreeType::O,
            vec![
                bicotree_node(
                    BicotreeType::B,
                    vec![
                        bicotree_leaf("x1", 1),
                        bicotree_leaf("y1", 2),
                        bicotree_leaf("z1", 2),
                    ],
                ),
                join_pair(2),
                join_pair(3),
            ],
        );
        let anchor = bicotree_anchor(&wide_first).expect("clean");
        let lprime = set(&["x1", "y1", "x2", "y2", "x3", "y3"]);
        assert!(anchor.of("x1").expect("total").is_subset(&lprime));
        let restricted = restricted_bicotree(&wide_first, &anchor, &lprime).expect("build");
        let expected = pivot_row(3);
        assert!(restricted.model().iso_fixing_ground(expected.model()));
    }

    #[test]
    fn monochromatic_runs_collapse_into_fresh_blocks() {
        let t = pivot_row(5);
        let anchor = bicotree_anchor(&t).expect("clean");
        let lprime = set(&["x1", "y1", "x2", "y2", "x3", "y4", "x5", "y5"]);
        assert!(anchor.of("x1").expect("total").is_subset(&lprime));
        let restricted = restricted_bicotree(&t, &anchor, &lprime).expect("build");
        let expected = bicotree_node(
            BicotreeType::O,
            vec![
                join_pair(1),
                join_pair(2),
                bicotree_node(
                    BicotreeType::B,
                    vec![bicotree_leaf("x3", 1), bicotree_leaf("y4", 2)],
                ),
                join_pair(5),
            ],
        );
        assert!(restricted.model().iso_fixing_ground(expected.model()));
        assert!(verify_anchoring(t.model(), restricted.model(), &anchor).pass);
    }

    #[test]
    fn branch_runs_group_into_two_colored_blocks() {
        use Colors::{Both as X, One, Two};
        assert_eq!(
            order_blocks(&[X, X, One, Two, X]),
            Some(vec![0..1, 1..2, 2..4, 4..5])
        );
        assert_eq!(order_blocks(&[One, X, Two]), Some(vec![0..3]));
        assert_eq!(order_blocks(&[X, Two, Two, One, X]), Some(vec![0..3, 3..5]));
        assert_eq!(order_blocks(&[One, Two, One, Two]), Some(vec![0..2, 2..4]));
        assert_eq!(order_blocks(&[Two, X]), None);
        assert_eq!(order_blocks(&[X, One]), None);
        assert_eq!(order_blocks(&[]), Some(vec![]));
    }

    #[test]
    fn one_cell_amalgams_reduce_to_the_cotree_anchor() {
        let g = c4();
        let split = Split {
            graph: g.clone(),
            gamma: g.vertices().iter().map(|v| (v.clone(), 1)).collect(),
            size: 1,
            height: 3,
        };
        let a = amalgam_build(&g, &split).expect("valid split");
        let anchor = amalgam_anchor(&a).expect("anchor");
        let direct = cotree_anchor(&cograph_decompose(&g).expect("cograph")).expect("clean");
        assert_eq!(anchor.map(), direct.map());
        assert_eq!(anchor.size_bound(), 3);
    }

    #[test]
    fn amalgam_witness_sets_respect_the_combined_bound() {
        let a = c4_two_cell_amalgam();
        let anchor = amalgam_anchor(&a).expect("anchor");
        let height = (1..=2)
            .filter_map(|i| a.cell_tree(i))
            .map(TModel::height)
            .chain(a.pair_tree(1, 2).map(TModel::height))
            .max()
            .expect("trees");
        assert_eq!(
            anchor.size_bound(),
            height + five_power(height + 1).expect("small")
        );
        for v in a.ground() {
            assert!(anchor.of(v).expect("total").contains(v));
        }
    }

    #[test]
    fn query_witnesses_cover_their_own_queries() {
        let a = c4_two_cell_amalgam();
        let anchor = amalgam_anchor(&a).expect("anchor");
        for x in coupling_view(&a).domain() {
            let w = ground_witness(&a, x).expect("coupling elements sit over the ground");
            let y =
                query_witnesses(&a, &anchor, &BTreeSet::from([x.clone()])).expect("witnesses");
            assert!(y.contains(&w));
            let restricted = amalgam_restrict(&a, &y).expect("restrict");
            let survives = restricted.ground().contains(x)
                || (1..=2).any(|i| {
                    restricted
                        .cell_tree(i)
                        .is_some_and(|t| t.tree().has_node(x))
                })
                || restricted
                    .pair_tree(1, 2)
                    .is_some_and(|t| t.tree().has_node(x));
            assert!(survives, "`{x}` vanished from its own witness closure");
        }
    }

    #[test]
    fn the_full_palette_piece_reproduces_the_amalgam() {
        let a = c4_two_cell_amalgam();
        let pieces = build_cover(&a, &c4_zeta(), 2).expect("cover");
        let full: Vec<&CoverPiece> = pieces
            .iter()
            .filter(|p| p.colors == BTreeSet::from([1, 2]))
            .collect();
        assert_eq!(full.len(), 1);
        assert_eq!(&full[0].members, a.ground());
        assert!(amalgams_agree_on(&a, &full[0].amalgam, a.ground()).expect("agree"));
        assert_eq!(
            sbuild(&full[0].amalgam).expect("graph"),
            sbuild(&a).expect("graph")
        );
    }

    #[test]
    fn covers_serve_every_small_query() {
        let a = c4_two_cell_amalgam();
        let anchor = amalgam_anchor(&a).expect("anchor");
        let pieces = build_cover(&a, &c4_zeta(), 2).expect("cover");
        let domain: Vec<String> = coupling_view(&a).domain().iter().cloned().collect();
        for (idx, x1) in domain.iter().enumerate() {
            for x2 in domain.iter().skip(idx) {
                let query = BTreeSet::from([x1.clone(), x2.clone()]);
                let y = query_witnesses(&a, &anchor, &query).expect("witnesses");
                assert!(
                    cover_serves(&a, &pieces, &y).expect("check"),
                    "no piece serves {query:?}"
                );
            }
        }
    }

    #[test]
    fn covers_need_total_colorings_and_positive_query_sizes() {
        let a = c4_two_cell_amalgam();
        let mut partial = c4_zeta();
        partial.remove("d");
        assert!(matches!(
            build_cover(&a, &partial, 2),
            Err(AnchorError::Invalid(_))
        ));
        assert!(matches!(
            build_cover(&a, &c4_zeta(), 0),
            Err(AnchorError::Invalid(_))
        ));
    }
}
