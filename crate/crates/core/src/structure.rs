//! Finite graphs, bipartite colored graphs, posets, and generic relational
//! structures.
//!
//! Everything downstream consumes these types. Vertex and element ids are
//! opaque strings preserved through all constructions, so provenance stays
//! traceable across modules (injection systems, anchors). Collections are
//! B-tree based throughout: iteration order is deterministic, which keeps
//! witnesses and serialized output reproducible.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Opaque vertex identifier.
pub type VertexId = String;

/// Errors raised by the basic combinatorial types.
#[derive(Debug, Error)]
pub enum StructureError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on `{0}` is not allowed")]
    SelfLoop(String),
    #[error("edge {0} - {1} does not join side 1 to side 2")]
    NotBipartite(String, String),
    #[error("vertex `{0}` has no side assignment")]
    MissingSide(String),
    #[error("side of `{0}` must be 1 or 2, got {1}")]
    BadSide(String, u8),
    #[error("not a strict partial order: {0}")]
    NotAPoset(String),
    #[error("relation `{0}` is not declared in the signature")]
    UnknownRelation(String),
    #[error("relation `{rel}` expects arity {expected}, got tuple of length {got}")]
    ArityMismatch {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("tuple for `{rel}` mentions `{element}` outside the domain")]
    TupleOutsideDomain { rel: String, element: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn norm_pair(u: &str, v: &str) -> (VertexId, VertexId) {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

/// Simple undirected loopless graph with optional unary labels.
///
/// Edges are stored normalized (lexicographically smaller endpoint first),
/// so the edge set is symmetric by construction and never contains loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    vertices: BTreeSet<VertexId>,
    edges: BTreeSet<(VertexId, VertexId)>,
    labels: BTreeMap<VertexId, BTreeSet<String>>,
}

impl Graph {
    /// Creates an empty graph.
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from vertex and edge iterators; endpoints must be
    /// listed as vertices.
    pub fn from_parts<'a>(
        vertices: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, StructureError> {
        let mut g = Graph::new();
        for v in vertices {
            g.add_vertex(v);
        }
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Builds a graph from an edge iterator, inserting endpoints as needed.
    pub fn from_edges<'a>(
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, StructureError> {
        let mut g = Graph::new();
        for (u, v) in edges {
            g.add_vertex(u);
            g.add_vertex(v);
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Inserts a vertex (idempotent).
    pub fn add_vertex(&mut self, v: &str) {
        self.vertices.insert(v.to_string());
    }

    /// Inserts an undirected edge between existing vertices.
    pub fn add_edge(&mut self, u: &str, v: &str) -> Result<(), StructureError> {
        if u == v {
            return Err(StructureError::SelfLoop(u.to_string()));
        }
        for w in [u, v] {
            if !self.vertices.contains(w) {
                return Err(StructureError::UnknownVertex(w.to_string()));
            }
        }
        self.edges.insert(norm_pair(u, v));
        Ok(())
    }

    /// Attaches a unary label to a vertex.
    pub fn add_label(&mut self, v: &str, label: &str) -> Result<(), StructureError> {
        if !self.vertices.contains(v) {
            return Err(StructureError::UnknownVertex(v.to_string()));
        }
        self.labels
            .entry(v.to_string())
            .or_default()
            .insert(label.to_string());
        Ok(())
    }

    pub fn vertices(&self) -> &BTreeSet<VertexId> {
        &self.vertices
    }

    /// Edge set, normalized with the smaller endpoint first.
    pub fn edges(&self) -> &BTreeSet<(VertexId, VertexId)> {
        &self.edges
    }

    pub fn labels_of(&self, v: &str) -> BTreeSet<String> {
        self.labels.get(v).cloned().unwrap_or_default()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.vertices.contains(v)
    }

    pub fn has_edge(&self, u: &str, v: &str) -> bool {
        u != v && self.edges.contains(&norm_pair(u, v))
    }

    /// Neighborhood of `v`.
    pub fn neighbors(&self, v: &str) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for (a, b) in &self.edges {
            if a == v {
                out.insert(b.clone());
            } else if b == v {
                out.insert(a.clone());
            }
        }
        out
    }

    /// Induced subgraph on `keep`.
    pub fn induced_subgraph(&self, keep: &BTreeSet<VertexId>) -> Result<Graph, StructureError> {
        for v in keep {
            if !self.vertices.contains(v) {
                return Err(StructureError::UnknownVertex(v.clone()));
            }
        }
        let mut g = Graph::new();
        for v in keep {
            g.vertices.insert(v.clone());
            if let Some(ls) = self.labels.get(v) {
                g.labels.insert(v.clone(), ls.clone());
            }
        }
        for (u, v) in &self.edges {
            if keep.contains(u) && keep.contains(v) {
                g.edges.insert((u.clone(), v.clone()));
            }
        }
        Ok(g)
    }

    /// Complement graph on the same vertex set (labels preserved).
    pub fn complement(&self) -> Graph {
        let mut g = Graph {
            vertices: self.vertices.clone(),
            edges: BTreeSet::new(),
            labels: self.labels.clone(),
        };
        let vs: Vec<_> = self.vertices.iter().cloned().collect();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                if !self.has_edge(&vs[i], &vs[j]) {
                    g.edges.insert((vs[i].clone(), vs[j].clone()));
                }
            }
        }
        g
    }

    /// Connected components, sorted by their smallest vertex id.
    pub fn connected_components(&self) -> Vec<BTreeSet<VertexId>> {
        let mut seen: BTreeSet<VertexId> = BTreeSet::new();
        let mut comps = Vec::new();
        for start in &self.vertices {
            if seen.contains(start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start.clone()]);
            seen.insert(start.clone());
            while let Some(v) = queue.pop_front() {
                comp.insert(v.clone());
                for w in self.neighbors(&v) {
                    if seen.insert(w.clone()) {
                        queue.push_back(w);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// BFS distance between two vertices; `None` means unreachable. The
    /// infinite distance is this distinct sentinel, never a large integer.
    pub fn distance(&self, u: &str, v: &str) -> Result<Option<usize>, StructureError> {
        for w in [u, v] {
            if !self.vertices.contains(w) {
                return Err(StructureError::UnknownVertex(w.to_string()));
            }
        }
        if u == v {
            return Ok(Some(0));
        }
        let mut dist: BTreeMap<VertexId, usize> = BTreeMap::from([(u.to_string(), 0)]);
        let mut queue = VecDeque::from([u.to_string()]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for w in self.neighbors(&x) {
                if !dist.contains_key(&w) {
                    if w == v {
                        return Ok(Some(d + 1));
                    }
                    dist.insert(w.clone(), d + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(None)
    }

    /// BFS distances from `u` to every reachable vertex.
    pub fn distances_from(&self, u: &str) -> BTreeMap<VertexId, usize> {
        let mut dist: BTreeMap<VertexId, usize> = BTreeMap::from([(u.to_string(), 0)]);
        let mut queue = VecDeque::from([u.to_string()]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for w in self.neighbors(&x) {
                if !dist.contains_key(&w) {
                    dist.insert(w.clone(), d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// True iff the graph contains an induced path on `k` vertices.
    pub fn has_induced_path(&self, k: usize) -> bool {
        self.induced_path_witness(k).is_some()
    }

    /// Finds an induced path on `k` vertices if one exists; the returned
    /// witness is the lexicographically least one in DFS order.
    pub fn induced_path_witness(&self, k: usize) -> Option<Vec<VertexId>> {
        if k == 0 {
            return Some(Vec::new());
        }
        if k == 1 {
            return self.vertices.iter().next().map(|v| vec![v.clone()]);
        }
        let mut path: Vec<VertexId> = Vec::new();
        for start in &self.vertices {
            path.push(start.clone());
            if self.extend_induced_path(&mut path, k) {
                return Some(path);
            }
            path.pop();
        }
        None
    }

    fn extend_induced_path(&self, path: &mut Vec<VertexId>, k: usize) -> bool {
        if path.len() == k {
            return true;
        }
        let last = path.last().expect("path is nonempty").clone();
        for w in self.neighbors(&last) {
            if path.contains(&w) {
                continue;
            }
            // Induced: w may touch only the current endpoint.
            if path[..path.len() - 1].iter().any(|p| self.has_edge(p, &w)) {
                continue;
            }
            path.push(w);
            if self.extend_induced_path(path, k) {
                return true;
            }
            path.pop();
        }
        false
    }

    /// True iff some K_{t,t} occurs as a (not necessarily induced) subgraph:
    /// brute force over t-subsets with common-neighborhood counting.
    pub fn has_ktt_subgraph(&self, t: usize) -> bool {
        if t == 0 {
            return true;
        }
        let vs: Vec<_> = self.vertices.iter().cloned().collect();
        if vs.len() < 2 * t {
            return false;
        }
        let mut subset = Vec::new();
        self.ktt_search(&vs, 0, t, &mut subset)
    }

    fn ktt_search(&self, vs: &[VertexId], from: usize, t: usize, subset: &mut Vec<VertexId>) -> bool {
        if subset.len() == t {
            let mut common: Option<BTreeSet<VertexId>> = None;
            for a in subset.iter() {
                let n = self.neighbors(a);
                common = Some(match common {
                    None => n,
                    Some(c) => c.intersection(&n).cloned().collect(),
                });
            }
            let common = common.expect("t >= 1");
            let disjoint = common.iter().filter(|v| !subset.contains(v)).count();
            return disjoint >= t;
        }
        for i in from..vs.len() {
            subset.push(vs[i].clone());
            if self.ktt_search(vs, i + 1, t, subset) {
                return true;
            }
            subset.pop();
        }
        false
    }

    /// Degeneracy: the minimum d such that every subgraph has a vertex of
    /// degree at most d, computed by repeated min-degree peeling.
    pub fn degeneracy(&self) -> usize {
        let mut remaining = self.clone();
        let mut best = 0;
        while remaining.vertex_count() > 0 {
            let (v, d) = remaining
                .vertices
                .iter()
                .map(|v| (v.clone(), remaining.neighbors(v).len()))
                .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
                .expect("nonempty");
            best = best.max(d);
            let keep: BTreeSet<_> = remaining.vertices.iter().filter(|w| **w != v).cloned().collect();
            remaining = remaining.induced_subgraph(&keep).expect("subset of vertices");
        }
        best
    }

    /// Parses the edge-list text format: one `u v` edge or one isolated
    /// vertex `u` per line; `# label u L` attaches labels; other `#` lines
    /// are comments.
    pub fn parse_edge_list(text: &str) -> Result<Graph, StructureError> {
        let mut g = Graph::new();
        let mut deferred_labels = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<_> = rest.split_whitespace().collect();
                if toks.first() == Some(&"label") {
                    if toks.len() != 3 {
                        return Err(StructureError::Parse {
                            line: idx + 1,
                            msg: "expected `# label <vertex> <label>`".into(),
                        });
                    }
                    deferred_labels.push((idx + 1, toks[1].to_string(), toks[2].to_string()));
                }
                continue;
            }
            let toks: Vec<_> = line.split_whitespace().collect();
            match toks.as_slice() {
                [v] => g.add_vertex(v),
                [u, v] => {
                    g.add_vertex(u);
                    g.add_vertex(v);
                    g.add_edge(u, v).map_err(|e| StructureError::Parse {
                        line: idx + 1,
                        msg: e.to_string(),
                    })?;
                }
                _ => {
                    return Err(StructureError::Parse {
                        line: idx + 1,
                        msg: format!("expected 1 or 2 tokens, got {}", toks.len()),
                    })
                }
            }
        }
        for (line, v, label) in deferred_labels {
            g.add_label(&v, &label)
                .map_err(|e| StructureError::Parse { line, msg: e.to_string() })?;
        }
        Ok(g)
    }

    /// Serializes to the edge-list text format, deterministically ordered.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let covered: BTreeSet<_> = self.edges.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
        for v in &self.vertices {
            if !covered.contains(v) {
                out.push_str(v);
                out.push('\n');
            }
        }
        for (u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        for (v, ls) in &self.labels {
            for l in ls {
                out.push_str(&format!("# label {v} {l}\n"));
            }
        }
        out
    }

    /// DOT rendering (undirected).
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("graph {name} {{\n");
        for v in &self.vertices {
            let labels = self.labels_of(v);
            if labels.is_empty() {
                out.push_str(&format!("  \"{v}\";\n"));
            } else {
                let tag: Vec<_> = labels.iter().cloned().collect();
                out.push_str(&format!("  \"{v}\" [label=\"{v}\\n{}\"];\n", tag.join(",")));
            }
        }
        for (u, v) in &self.edges {
            out.push_str(&format!("  \"{u}\" -- \"{v}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// BipartiteGraph
// ---------------------------------------------------------------------------

/// Bipartite graph: an underlying graph plus a total side assignment into
/// {1, 2}; every edge must join side 1 to side 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    underlying: Graph,
    side: BTreeMap<VertexId, u8>,
}

impl BipartiteGraph {
    /// Validates and wraps a graph with its side assignment.
    pub fn new(underlying: Graph, side: BTreeMap<VertexId, u8>) -> Result<Self, StructureError> {
        for v in underlying.vertices() {
            match side.get(v) {
                None => return Err(StructureError::MissingSide(v.clone())),
                Some(s) if *s != 1 && *s != 2 => {
                    return Err(StructureError::BadSide(v.clone(), *s))
                }
                _ => {}
            }
        }
        for v in side.keys() {
            if !underlying.has_vertex(v) {
                return Err(StructureError::UnknownVertex(v.clone()));
            }
        }
        for (u, v) in underlying.edges() {
            if side[u] == side[v] {
                return Err(StructureError::NotBipartite(u.clone(), v.clone()));
            }
        }
        Ok(Self { underlying, side })
    }

    /// Builds the semi-induced bipartite graph between two disjoint vertex
    /// sets of `g`: only the cross edges survive.
    pub fn semi_induced(
        g: &Graph,
        part1: &BTreeSet<VertexId>,
        part2: &BTreeSet<VertexId>,
    ) -> Result<Self, StructureError> {
        let mut und = Graph::new();
        let mut side = BTreeMap::new();
        for v in part1 {
            if !g.has_vertex(v) {
                return Err(StructureError::UnknownVertex(v.clone()));
            }
            und.add_vertex(v);
            side.insert(v.clone(), 1);
        }
        for v in part2 {
            if !g.has_vertex(v) {
                return Err(StructureError::UnknownVertex(v.clone()));
            }
            und.add_vertex(v);
            side.insert(v.clone(), 2);
        }
        for u in part1 {
            for v in part2 {
                if g.has_edge(u, v) {
                    und.add_edge(u, v)?;
                }
            }
        }
        Self::new(und, side)
    }

    pub fn graph(&self) -> &Graph {
        &self.underlying
    }

    pub fn side_of(&self, v: &str) -> Option<u8> {
        self.side.get(v).copied()
    }

    pub fn sides(&self) -> &BTreeMap<VertexId, u8> {
        &self.side
    }

    /// Vertices on the given side (1 or 2).
    pub fn part(&self, s: u8) -> BTreeSet<VertexId> {
        self.side
            .iter()
            .filter(|(_, t)| **t == s)
            .map(|(v, _)| v.clone())
            .collect()
    }

    /// Complements the edge relation between the two sides; sides unchanged.
    pub fn bipartite_complement(&self) -> BipartiteGraph {
        let mut und = Graph::new();
        for v in self.underlying.vertices() {
            und.add_vertex(v);
        }
        for u in self.part(1) {
            for v in self.part(2) {
                if !self.underlying.has_edge(&u, &v) {
                    und.add_edge(&u, &v).expect("vertices present");
                }
            }
        }
        BipartiteGraph {
            underlying: und,
            side: self.side.clone(),
        }
    }

    /// Induced sub-bipartite-graph on `keep`.
    pub fn induced(&self, keep: &BTreeSet<VertexId>) -> Result<BipartiteGraph, StructureError> {
        let und = self.underlying.induced_subgraph(keep)?;
        let side = self
            .side
            .iter()
            .filter(|(v, _)| keep.contains(*v))
            .map(|(v, s)| (v.clone(), *s))
            .collect();
        BipartiteGraph::new(und, side)
    }

    /// True iff the bipartite complement is connected.
    pub fn co_connected(&self) -> bool {
        self.bipartite_complement().underlying.is_connected()
    }

    /// Parses edge-list text extended with mandatory `# side v 1|2` lines.
    pub fn parse_edge_list(text: &str) -> Result<Self, StructureError> {
        let underlying = Graph::parse_edge_list(text)?;
        let mut side = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<_> = rest.split_whitespace().collect();
                if toks.first() == Some(&"side") {
                    if toks.len() != 3 {
                        return Err(StructureError::Parse {
                            line: idx + 1,
                            msg: "expected `# side <vertex> <1|2>`".into(),
                        });
                    }
                    let s: u8 = toks[2].parse().map_err(|_| StructureError::Parse {
                        line: idx + 1,
                        msg: format!("bad side `{}`", toks[2]),
                    })?;
                    side.insert(toks[1].to_string(), s);
                }
            }
        }
        Self::new(underlying, side)
    }

    /// Serializes to edge-list text with `# side` lines.
    pub fn to_edge_list(&self) -> String {
        let mut out = self.underlying.to_edge_list();
        for (v, s) in &self.side {
            out.push_str(&format!("# side {v} {s}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Poset
// ---------------------------------------------------------------------------

/// Finite strict partial order. The full strict relation is stored, not just
/// covers, so transitivity is directly assertable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset {
    elements: BTreeSet<String>,
    lt: BTreeSet<(String, String)>,
}

impl Poset {
    /// Validates irreflexivity, asymmetry, and transitivity (exhaustive
    /// triple scan) and wraps the relation.
    pub fn new(
        elements: BTreeSet<String>,
        lt: BTreeSet<(String, String)>,
    ) -> Result<Self, StructureError> {
        for (a, b) in &lt {
            if !elements.contains(a) || !elements.contains(b) {
                return Err(StructureError::NotAPoset(format!(
                    "pair ({a}, {b}) mentions an element outside the domain"
                )));
            }
            if a == b {
                return Err(StructureError::NotAPoset(format!("reflexive pair ({a}, {a})")));
            }
            if lt.contains(&(b.clone(), a.clone())) {
                return Err(StructureError::NotAPoset(format!(
                    "asymmetry violated on ({a}, {b})"
                )));
            }
        }
        for (a, b) in &lt {
            for c in &elements {
                if lt.contains(&(b.clone(), c.clone())) && !lt.contains(&(a.clone(), c.clone())) {
                    return Err(StructureError::NotAPoset(format!(
                        "transitivity violated: {a} < {b} < {c} but not {a} < {c}"
                    )));
                }
            }
        }
        Ok(Self { elements, lt })
    }

    /// Builds a poset as the transitive closure of generator pairs; fails if
    /// the closure is cyclic.
    pub fn from_generators(
        elements: BTreeSet<String>,
        gens: &BTreeSet<(String, String)>,
    ) -> Result<Self, StructureError> {
        Self::new(elements, transitive_closure(gens))
    }

    pub fn elements(&self) -> &BTreeSet<String> {
        &self.elements
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.lt
    }

    pub fn lt(&self, a: &str, b: &str) -> bool {
        self.lt.contains(&(a.to_string(), b.to_string()))
    }

    /// The cover pairs: a < b with no c strictly between.
    pub fn cover_relation(&self) -> BTreeSet<(String, String)> {
        self.lt
            .iter()
            .filter(|(a, b)| {
                !self
                    .elements
                    .iter()
                    .any(|c| self.lt(a, c) && self.lt(c, b))
            })
            .cloned()
            .collect()
    }

    /// Covers sitting directly below `b`.
    pub fn covers_below(&self, b: &str) -> BTreeSet<String> {
        self.cover_relation()
            .into_iter()
            .filter(|(_, y)| y == b)
            .map(|(x, _)| x)
            .collect()
    }

    /// Symmetrization of the cover relation as a graph.
    pub fn cover_graph(&self) -> Graph {
        let mut g = Graph::new();
        for e in &self.elements {
            g.add_vertex(e);
        }
        for (a, b) in self.cover_relation() {
            g.add_edge(&a, &b).expect("elements present");
        }
        g
    }

    /// Strict down-set of `a`.
    pub fn down_set(&self, a: &str) -> BTreeSet<String> {
        self.lt
            .iter()
            .filter(|(_, y)| y == a)
            .map(|(x, _)| x.clone())
            .collect()
    }

    /// Whether the order is a disjoint union of chains: every element's
    /// strict up-set and down-set must be totally ordered, which makes
    /// comparability transitive and its classes chains.
    pub fn is_union_of_chains(&self) -> bool {
        for e in &self.elements {
            let ups: Vec<&String> = self
                .lt
                .iter()
                .filter(|(x, _)| x == e)
                .map(|(_, y)| y)
                .collect();
            let downs: Vec<&String> = self
                .lt
                .iter()
                .filter(|(_, y)| y == e)
                .map(|(x, _)| x)
                .collect();
            for side in [&ups, &downs] {
                for (i, a) in side.iter().enumerate() {
                    for b in side.iter().skip(i + 1) {
                        if !self.lt(a, b) && !self.lt(b, a) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Transitive closure of a binary relation given as a pair set.
pub fn transitive_closure(pairs: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    let mut closed = pairs.clone();
    loop {
        let mut added = Vec::new();
        for (a, b) in &closed {
            for (c, d) in &closed {
                if b == c && !closed.contains(&(a.clone(), d.clone())) {
                    added.push((a.clone(), d.clone()));
                }
            }
        }
        if added.is_empty() {
            return closed;
        }
        closed.extend(added);
    }
}

// ---------------------------------------------------------------------------
// RelStructure
// ---------------------------------------------------------------------------

/// Generic finite relational structure over a named signature. Unary and
/// binary relations suffice for the encodings here, but arbitrary arities
/// are supported (the tree encodings use a ternary infimum relation).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelStructure {
    signature: BTreeMap<String, usize>,
    domain: BTreeSet<String>,
    #[serde(rename = "relations")]
    tuples: BTreeMap<String, BTreeSet<Vec<String>>>,
}

impl RelStructure {
    /// Creates an empty structure over the given signature.
    pub fn new(signature: BTreeMap<String, usize>) -> Self {
        let tuples = signature.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        Self {
            signature,
            domain: BTreeSet::new(),
            tuples,
        }
    }

    pub fn signature(&self) -> &BTreeMap<String, usize> {
        &self.signature
    }

    pub fn domain(&self) -> &BTreeSet<String> {
        &self.domain
    }

    pub fn add_element(&mut self, e: &str) {
        self.domain.insert(e.to_string());
    }

    /// Inserts a tuple after arity and domain validation.
    pub fn add_tuple(&mut self, rel: &str, tuple: Vec<String>) -> Result<(), StructureError> {
        let arity = *self
            .signature
            .get(rel)
            .ok_or_else(|| StructureError::UnknownRelation(rel.to_string()))?;
        if tuple.len() != arity {
            return Err(StructureError::ArityMismatch {
                rel: rel.to_string(),
                expected: arity,
                got: tuple.len(),
            });
        }
        for e in &tuple {
            if !self.domain.contains(e) {
                return Err(StructureError::TupleOutsideDomain {
                    rel: rel.to_string(),
                    element: e.clone(),
                });
            }
        }
        self.tuples.entry(rel.to_string()).or_default().insert(tuple);
        Ok(())
    }

    /// All tuples of a relation (empty set if the relation holds nowhere).
    pub fn rel(&self, name: &str) -> BTreeSet<Vec<String>> {
        self.tuples.get(name).cloned().unwrap_or_default()
    }

    pub fn has(&self, name: &str, tuple: &[&str]) -> bool {
        let t: Vec<String> = tuple.iter().map(|s| s.to_string()).collect();
        self.tuples.get(name).map(|ts| ts.contains(&t)).unwrap_or(false)
    }

    /// Members of a unary relation.
    pub fn unary_set(&self, name: &str) -> BTreeSet<String> {
        self.rel(name).into_iter().filter_map(|t| t.into_iter().next()).collect()
    }

    /// Re-checks every invariant; useful after deserialization.
    pub fn validate(&self) -> Result<(), StructureError> {
        for (rel, ts) in &self.tuples {
            let arity = *self
                .signature
                .get(rel)
                .ok_or_else(|| StructureError::UnknownRelation(rel.clone()))?;
            for t in ts {
                if t.len() != arity {
                    return Err(StructureError::ArityMismatch {
                        rel: rel.clone(),
                        expected: arity,
                        got: t.len(),
                    });
                }
                for e in t {
                    if !self.domain.contains(e) {
                        return Err(StructureError::TupleOutsideDomain {
                            rel: rel.clone(),
                            element: e.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Induced substructure on `keep`.
    pub fn induced(&self, keep: &BTreeSet<String>) -> RelStructure {
        let mut out = RelStructure::new(self.signature.clone());
        for e in keep.intersection(&self.domain) {
            out.add_element(e);
        }
        for (rel, ts) in &self.tuples {
            for t in ts {
                if t.iter().all(|e| out.domain.contains(e)) {
                    out.tuples.entry(rel.clone()).or_default().insert(t.clone());
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("structure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let s: RelStructure = serde_json::from_str(text).map_err(|e| e.to_string())?;
        s.validate().map_err(|e| e.to_string())?;
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// Shared test fixtures
// ---------------------------------------------------------------------------

/// Convenience: a sorted vertex set from string slices.
pub fn vset(ids: &[&str]) -> BTreeSet<VertexId> {
    ids.iter().map(|s| s.to_string()).collect()
}

/// Path graph on the given vertices, in order.
pub fn path_graph(ids: &[&str]) -> Graph {
    let mut g = Graph::new();
    for v in ids {
        g.add_vertex(v);
    }
    for w in ids.windows(2) {
        g.add_edge(w[0], w[1]).expect("fresh vertices");
    }
    g
}

/// Cycle graph on the given vertices, in order.
pub fn cycle_graph(ids: &[&str]) -> Graph {
    let mut g = path_graph(ids);
    if ids.len() > 2 {
        g.add_edge(ids[0], ids[ids.len() - 1]).expect("fresh vertices");
    }
    g
}

/// Complete graph on the given vertices.
pub fn complete_graph(ids: &[&str]) -> Graph {
    let mut g = Graph::new();
    for v in ids {
        g.add_vertex(v);
    }
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            g.add_edge(ids[i], ids[j]).expect("fresh vertices");
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diamond() -> Poset {
        let elems = vset(&["a", "b", "bot", "top"]);
        let gens: BTreeSet<_> = [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        Poset::from_generators(elems, &gens).expect("diamond is a poset")
    }

    #[test]
    fn induced_subgraph_of_clique_is_clique() {
        let k3 = complete_graph(&["a", "b", "c"]);
        let sub = k3.induced_subgraph(&vset(&["a", "b"])).unwrap();
        assert_eq!(sub.vertex_count(), 2);
        assert!(sub.has_edge("a", "b"));
    }

    #[test]
    fn induced_subgraph_empty_set() {
        let k3 = complete_graph(&["a", "b", "c"]);
        let sub = k3.induced_subgraph(&BTreeSet::new()).unwrap();
        assert_eq!(sub.vertex_count(), 0);
        assert_eq!(sub.edge_count(), 0);
    }

    #[test]
    fn induced_subgraph_of_path_endpoints() {
        let p4 = path_graph(&["a", "b", "c", "d"]);
        let sub = p4.induced_subgraph(&vset(&["a", "c"])).unwrap();
        assert_eq!(sub.vertex_count(), 2);
        assert_eq!(sub.edge_count(), 0);
    }

    #[test]
    fn induced_subgraph_rejects_unknown_vertex() {
        let g = complete_graph(&["a", "b"]);
        assert!(matches!(
            g.induced_subgraph(&vset(&["a", "z"])),
            Err(StructureError::UnknownVertex(v)) if v == "z"
        ));
    }

    fn complete_bipartite(side1: &[&str], side2: &[&str]) -> BipartiteGraph {
        let mut g = Graph::new();
        let mut side = BTreeMap::new();
        for v in side1 {
            g.add_vertex(v);
            side.insert(v.to_string(), 1);
        }
        for v in side2 {
            g.add_vertex(v);
            side.insert(v.to_string(), 2);
        }
        for u in side1 {
            for v in side2 {
                g.add_edge(u, v).unwrap();
            }
        }
        BipartiteGraph::new(g, side).unwrap()
    }

    #[test]
    fn complement_of_complete_bipartite_is_edgeless() {
        let b = complete_bipartite(&["a1", "a2"], &["b1", "b2"]);
        let c = b.bipartite_complement();
        assert_eq!(c.graph().edge_count(), 0);
        assert_eq!(c.sides(), b.sides());
    }

    #[test]
    fn complement_of_edgeless_is_complete_bipartite() {
        let mut g = Graph::new();
        let mut side = BTreeMap::new();
        for (v, s) in [("a", 1u8), ("b", 2), ("c", 2)] {
            g.add_vertex(v);
            side.insert(v.to_string(), s);
        }
        let b = BipartiteGraph::new(g, side).unwrap();
        let c = b.bipartite_complement();
        assert_eq!(c.graph().edge_count(), 2);
        assert!(c.graph().has_edge("a", "b") && c.graph().has_edge("a", "c"));
    }

    #[test]
    fn bipartite_rejects_same_side_edge() {
        let mut g = Graph::new();
        g.add_vertex("a");
        g.add_vertex("b");
        g.add_edge("a", "b").unwrap();
        let side = BTreeMap::from([("a".to_string(), 1u8), ("b".to_string(), 1u8)]);
        assert!(matches!(
            BipartiteGraph::new(g, side),
            Err(StructureError::NotBipartite(_, _))
        ));
    }

    #[test]
    fn cover_relation_of_chain() {
        let elems = vset(&["1", "2", "3"]);
        let gens: BTreeSet<_> = [("1", "2"), ("2", "3")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        let p = Poset::from_generators(elems, &gens).unwrap();
        assert!(p.lt("1", "3"), "closure adds the long pair");
        let covers = p.cover_relation();
        assert_eq!(covers, gens);
    }

    #[test]
    fn cover_relation_of_antichain_is_empty() {
        let p = Poset::new(vset(&["x", "y", "z"]), BTreeSet::new()).unwrap();
        assert!(p.cover_relation().is_empty());
    }

    #[test]
    fn cover_relation_of_diamond_drops_long_pair() {
        let p = diamond();
        let covers = p.cover_relation();
        assert_eq!(covers.len(), 4);
        assert!(!covers.contains(&("bot".to_string(), "top".to_string())));
    }

    #[test]
    fn cover_graph_of_diamond_is_c4() {
        let g = diamond().cover_graph();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);
        // Every vertex has degree 2 and the graph is connected: a 4-cycle.
        assert!(g.vertices().iter().all(|v| g.neighbors(v).len() == 2));
        assert!(g.is_connected());
    }

    #[test]
    fn cover_graph_of_chain_is_path() {
        let elems = vset(&["1", "2", "3", "4"]);
        let gens: BTreeSet<_> = [("1", "2"), ("2", "3"), ("3", "4")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        let p = Poset::from_generators(elems, &gens).unwrap();
        let g = p.cover_graph();
        assert_eq!(g.edge_count(), 3);
        assert!(g.has_induced_path(4));
    }

    #[test]
    fn chain_unions_forbid_forks() {
        let gens = |pairs: &[(&str, &str)]| -> BTreeSet<(String, String)> {
            pairs.iter().map(|(x, y)| (x.to_string(), y.to_string())).collect()
        };
        let chains = Poset::from_generators(
            vset(&["a", "b", "c", "d", "e"]),
            &gens(&[("a", "b"), ("b", "c"), ("d", "e")]),
        )
        .unwrap();
        assert!(chains.is_union_of_chains());
        let fork_up = Poset::from_generators(
            vset(&["a", "b", "c"]),
            &gens(&[("a", "b"), ("a", "c")]),
        )
        .unwrap();
        assert!(!fork_up.is_union_of_chains());
        let fork_down = Poset::from_generators(
            vset(&["a", "b", "c"]),
            &gens(&[("a", "c"), ("b", "c")]),
        )
        .unwrap();
        assert!(!fork_down.is_union_of_chains());
    }

    #[test]
    fn poset_rejects_cycle() {
        let elems = vset(&["a", "b"]);
        let gens: BTreeSet<_> = [("a", "b"), ("b", "a")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        assert!(Poset::from_generators(elems, &gens).is_err());
    }

    #[test]
    fn poset_rejects_missing_transitive_pair() {
        let elems = vset(&["a", "b", "c"]);
        let lt: BTreeSet<_> = [("a", "b"), ("b", "c")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        assert!(matches!(Poset::new(elems, lt), Err(StructureError::NotAPoset(_))));
    }

    #[test]
    fn induced_path_found_in_p7_and_c6() {
        let p7 = path_graph(&["1", "2", "3", "4", "5", "6", "7"]);
        assert!(p7.has_induced_path(7));
        let c6 = cycle_graph(&["1", "2", "3", "4", "5", "6"]);
        assert!(c6.has_induced_path(5), "deleting one vertex leaves P5");
        assert!(!c6.has_induced_path(6), "C6 has no induced P6");
    }

    #[test]
    fn clique_has_no_induced_p3() {
        let k4 = complete_graph(&["a", "b", "c", "d"]);
        assert!(!k4.has_induced_path(3), "all triples contain a chord");
        assert!(k4.has_induced_path(2));
    }

    #[test]
    fn ktt_detection() {
        let b = complete_bipartite(&["a1", "a2"], &["b1", "b2"]);
        assert!(b.graph().has_ktt_subgraph(2));
        let tree = path_graph(&["1", "2", "3", "4", "5"]);
        assert!(!tree.has_ktt_subgraph(2), "trees are acyclic");
        let k5 = complete_graph(&["a", "b", "c", "d", "e"]);
        assert!(k5.has_ktt_subgraph(2), "any 2+2 split of a clique works");
    }

    #[test]
    fn components_and_distance() {
        let mut g = Graph::from_edges([("a", "b"), ("c", "d")]).unwrap();
        assert_eq!(g.connected_components().len(), 2);
        g.add_vertex("e");
        assert_eq!(g.connected_components().len(), 3);
        let p3 = path_graph(&["a", "b", "c"]);
        assert_eq!(p3.distance("a", "c").unwrap(), Some(2));
        assert_eq!(g.distance("a", "c").unwrap(), None, "infinite distance is None");
        assert!(g.distance("a", "zz").is_err());
    }

    #[test]
    fn degeneracy_values() {
        let tree = path_graph(&["1", "2", "3", "4"]);
        assert_eq!(tree.degeneracy(), 1);
        let k4 = complete_graph(&["a", "b", "c", "d"]);
        assert_eq!(k4.degeneracy(), 3);
        let c5 = cycle_graph(&["1", "2", "3", "4", "5"]);
        assert_eq!(c5.degeneracy(), 2);
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = Graph::from_edges([("a", "b"), ("b", "c")]).unwrap();
        g.add_vertex("lonely");
        g.add_label("a", "mark").unwrap();
        let text = g.to_edge_list();
        let back = Graph::parse_edge_list(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn bipartite_edge_list_round_trip() {
        let b = complete_bipartite(&["x"], &["y", "z"]);
        let text = b.to_edge_list();
        let back = BipartiteGraph::parse_edge_list(&text).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn edge_list_parse_errors_carry_line_numbers() {
        let err = Graph::parse_edge_list("a b\nx x\n").unwrap_err();
        assert!(matches!(err, StructureError::Parse { line: 2, .. }));
        let err = Graph::parse_edge_list("a b c d\n").unwrap_err();
        assert!(matches!(err, StructureError::Parse { line: 1, .. }));
    }

    #[test]
    fn rel_structure_validation() {
        let sig = BTreeMap::from([("E".to_string(), 2usize), ("Gr".to_string(), 1usize)]);
        let mut s = RelStructure::new(sig);
        s.add_element("a");
        s.add_element("b");
        s.add_tuple("E", vec!["a".into(), "b".into()]).unwrap();
        s.add_tuple("Gr", vec!["a".into()]).unwrap();
        assert!(s.has("E", &["a", "b"]));
        assert!(!s.has("E", &["b", "a"]));
        assert!(matches!(
            s.add_tuple("E", vec!["a".into()]),
            Err(StructureError::ArityMismatch { .. })
        ));
        assert!(matches!(
            s.add_tuple("E", vec!["a".into(), "zz".into()]),
            Err(StructureError::TupleOutsideDomain { .. })
        ));
        assert!(matches!(
            s.add_tuple("Q", vec!["a".into()]),
            Err(StructureError::UnknownRelation(_))
        ));
    }

    #[test]
    fn rel_structure_json_round_trip() {
        let sig = BTreeMap::from([("E".to_string(), 2usize)]);
        let mut s = RelStructure::new(sig);
        s.add_element("u");
        s.add_element("v");
        s.add_tuple("E", vec!["u".into(), "v".into()]).unwrap();
        let text = s.to_json();
        let back = RelStructure::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert!(text.contains("\"relations\""));
    }

    // Small random graph strategy for the property checks below.
    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (1..=max_n)
            .prop_flat_map(|n| {
                let edges = n * (n.max(2) - 1) / 2;
                proptest::collection::vec(proptest::bool::ANY, edges).prop_map(move |bits| {
                    let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
                    let mut g = Graph::new();
                    for id in &ids {
                        g.add_vertex(id);
                    }
                    let mut k = 0;
                    for i in 0..n {
                        for j in i + 1..n {
                            if bits[k] {
                                g.add_edge(&ids[i], &ids[j]).unwrap();
                            }
                            k += 1;
                        }
                    }
                    g
                })
            })
            .no_shrink()
    }

    proptest! {
        #[test]
        fn bipartite_complement_is_involution(g in arb_graph(8), mask in proptest::collection::vec(proptest::bool::ANY, 8)) {
            // Assign sides by mask, then drop same-side edges to force bipartiteness.
            let vs: Vec<_> = g.vertices().iter().cloned().collect();
            let side: BTreeMap<_, _> = vs.iter().enumerate()
                .map(|(i, v)| (v.clone(), if mask[i % mask.len()] { 1u8 } else { 2u8 }))
                .collect();
            let mut und = Graph::new();
            for v in &vs { und.add_vertex(v); }
            for (u, v) in g.edges() {
                if side[u] != side[v] { und.add_edge(u, v).unwrap(); }
            }
            let b = BipartiteGraph::new(und, side).unwrap();
            prop_assert_eq!(b.bipartite_complement().bipartite_complement(), b);
        }

        #[test]
        fn restricting_twice_equals_intersection(g in arb_graph(8), keep1 in proptest::collection::vec(proptest::bool::ANY, 8), keep2 in proptest::collection::vec(proptest::bool::ANY, 8)) {
            let vs: Vec<_> = g.vertices().iter().cloned().collect();
            let x: BTreeSet<_> = vs.iter().enumerate().filter(|(i, _)| keep1[i % keep1.len()]).map(|(_, v)| v.clone()).collect();
            let y: BTreeSet<_> = vs.iter().enumerate().filter(|(i, _)| keep2[i % keep2.len()]).map(|(_, v)| v.clone()).collect();
            let xy: BTreeSet<_> = x.intersection(&y).cloned().collect();
            let twice = g.induced_subgraph(&x).unwrap().induced_subgraph(&xy).unwrap();
            let once = g.induced_subgraph(&xy).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn cover_closure_reproduces_lt(n in 1usize..6, bits in proptest::collection::vec(proptest::bool::ANY, 15)) {
            // Random DAG edges i -> j for i < j, closed transitively.
            let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
            let mut gens = BTreeSet::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k % bits.len()] { gens.insert((ids[i].clone(), ids[j].clone())); }
                    k += 1;
                }
            }
            let p = Poset::from_generators(ids.iter().cloned().collect(), &gens).unwrap();
            let covers = p.cover_relation();
            let reclosed = transitive_closure(&covers);
            prop_assert_eq!(&reclosed, p.pairs());
        }
    }
}
