//! Encoding coupled structures into colored posets and back.
//!
//! [`encode_poset`] replaces every element of an `{Lt, E, Gr}` structure by
//! four clones and generates a strict partial order in which the source
//! order survives on the fourth clones and the source edges become strict
//! pairs between second and third clones. [`decode_poset`] reads both
//! relations back through the cover relation, and
//! [`weak_sparseness_probe`] checks the cover graph for large bicliques.

use crate::structure::{transitive_closure, Graph, Poset, RelStructure, StructureError};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Errors raised by the encoder.
#[derive(Debug, Error)]
pub enum PosetEncError {
    #[error("input structure is missing `{0}` (or has it at the wrong arity)")]
    BadSignature(String),
    #[error("`Lt` is not a strict partial order: {0}")]
    NotPartialOrder(String),
    #[error("`E` is not a loop-free symmetric relation: {0}")]
    BadEdges(String),
    #[error("invalid colored poset: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A strict partial order whose elements carry one of four part marks, a
/// ground mark on some first-part elements, and a provenance pointer back
/// to the source element each clone was made from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredPosetStructure {
    poset: Poset,
    gr: BTreeSet<String>,
    parts: BTreeMap<String, u8>,
    clone_of: BTreeMap<String, String>,
}

impl ColoredPosetStructure {
    pub fn new(
        poset: Poset,
        gr: BTreeSet<String>,
        parts: BTreeMap<String, u8>,
        clone_of: BTreeMap<String, String>,
    ) -> Result<Self, PosetEncError> {
        let s = Self { poset, gr, parts, clone_of };
        let issues = s.validate();
        if issues.is_empty() {
            Ok(s)
        } else {
            Err(PosetEncError::Invalid(issues))
        }
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn gr(&self) -> &BTreeSet<String> {
        &self.gr
    }

    pub fn part_of(&self, e: &str) -> Option<u8> {
        self.parts.get(e).copied()
    }

    /// Elements carrying mark `i`.
    pub fn mark_set(&self, i: u8) -> BTreeSet<String> {
        self.parts
            .iter()
            .filter(|(_, p)| **p == i)
            .map(|(e, _)| e.clone())
            .collect()
    }

    pub fn clone_of(&self, e: &str) -> Option<&String> {
        self.clone_of.get(e)
    }

    /// Checks the mark invariants: the four parts partition the domain and
    /// the ground mark sits inside the first part. The order itself is
    /// validated by [`Poset`].
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for e in self.poset.elements() {
            match self.parts.get(e) {
                None => issues.push(format!("element `{e}` has no part mark")),
                Some(p) if !(1..=4).contains(p) => {
                    issues.push(format!("element `{e}` has part mark {p} outside 1..=4"))
                }
                _ => {}
            }
            if !self.clone_of.contains_key(e) {
                issues.push(format!("element `{e}` has no provenance"));
            }
        }
        for e in self.parts.keys() {
            if !self.poset.elements().contains(e) {
                issues.push(format!("part mark on unknown element `{e}`"));
            }
        }
        for g in &self.gr {
            if self.parts.get(g) != Some(&1) {
                issues.push(format!("ground mark on `{g}` which is not in the first part"));
            }
        }
        issues
    }

    /// Encodes the colored poset as a relational structure for the formula
    /// evaluator: `Lt` is the strict order, `Gr` the ground mark, and
    /// `P1`..`P4` the part marks.
    pub fn logic_structure(&self) -> RelStructure {
        let mut sig = BTreeMap::from([("Lt".to_string(), 2), ("Gr".to_string(), 1)]);
        for i in 1..=4 {
            sig.insert(format!("P{i}"), 1);
        }
        let mut s = RelStructure::new(sig);
        for e in self.poset.elements() {
            s.add_element(e);
        }
        for (a, b) in self.poset.pairs() {
            s.add_tuple("Lt", vec![a.clone(), b.clone()]).expect("valid");
        }
        for g in &self.gr {
            s.add_tuple("Gr", vec![g.clone()]).expect("valid");
        }
        for (e, p) in &self.parts {
            s.add_tuple(&format!("P{p}"), vec![e.clone()]).expect("valid");
        }
        s
    }

    /// DOT rendering of the cover graph, parts as fill colors, ground
    /// elements double-bordered.
    pub fn cover_dot(&self) -> String {
        let fill = |p: u8| match p {
            1 => "lightblue",
            2 => "khaki",
            3 => "palegreen",
            4 => "lightpink",
            _ => "white",
        };
        let mut out = String::from("digraph cover {\n  rankdir=BT;\n");
        for e in self.poset.elements() {
            let p = self.parts.get(e).copied().unwrap_or(0);
            let peri = if self.gr.contains(e) { 2 } else { 1 };
            out.push_str(&format!(
                "  \"{e}\" [style=filled, fillcolor={}, peripheries={peri}, label=\"{e}\\nP{p}\"];\n",
                fill(p)
            ));
        }
        for (a, b) in self.poset.cover_relation() {
            out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        let elements: Vec<Value> = self
            .poset
            .elements()
            .iter()
            .map(|e| {
                json!({
                    "id": e,
                    "part": self.parts[e],
                    "gr": self.gr.contains(e),
                    "clone_of": self.clone_of[e],
                })
            })
            .collect();
        let lt: Vec<Value> = self.poset.pairs().iter().map(|(a, b)| json!([a, b])).collect();
        serde_json::to_string_pretty(&json!({ "elements": elements, "lt": lt }))
            .expect("colored poset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PosetEncError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| PosetEncError::Json(e.to_string()))?;
        let items = doc["elements"]
            .as_array()
            .ok_or_else(|| PosetEncError::Json("missing elements".into()))?;
        let mut elements = BTreeSet::new();
        let mut gr = BTreeSet::new();
        let mut parts = BTreeMap::new();
        let mut clone_of = BTreeMap::new();
        for item in items {
            let id = item["id"]
                .as_str()
                .ok_or_else(|| PosetEncError::Json("element without id".into()))?
                .to_string();
            let part = item["part"]
                .as_u64()
                .ok_or_else(|| PosetEncError::Json(format!("`{id}` has no part")))?;
            if item["gr"].as_bool() == Some(true) {
                gr.insert(id.clone());
            }
            let src = item["clone_of"].as_str().unwrap_or(&id).to_string();
            parts.insert(id.clone(), part as u8);
            clone_of.insert(id.clone(), src);
            elements.insert(id);
        }
        let lt_items = doc["lt"]
            .as_array()
            .ok_or_else(|| PosetEncError::Json("missing lt".into()))?;
        let mut lt = BTreeSet::new();
        for pair in lt_items {
            match (pair[0].as_str(), pair[1].as_str()) {
                (Some(a), Some(b)) => {
                    lt.insert((a.to_string(), b.to_string()));
                }
                _ => return Err(PosetEncError::Json("malformed lt pair".into())),
            }
        }
        let poset = Poset::new(elements, lt)?;
        Self::new(poset, gr, parts, clone_of)
    }
}

/// Clone id of the `i`-th copy of `e`. The suffix has fixed length, so two
/// clone ids coincide only when both the source and the index do.
fn clone_id(e: &str, i: u8) -> String {
    format!("{e}#{i}")
}

/// Encodes an `{Lt, E, Gr}` structure (extra relations are ignored) into a
/// colored poset: four clones per element; generators `u4 < v4` for each
/// source pair `u Lt v`, `u2 < u1`, `u3 < u1`, `u4 < u1` for every element,
/// and `u2 < v3`, `u2 < v1` for every edge; the output order is the
/// transitive closure of the generators. Ground marks move to the first
/// clones of ground elements.
pub fn encode_poset(m: &RelStructure) -> Result<ColoredPosetStructure, PosetEncError> {
    for (name, arity) in [("Lt", 2), ("E", 2), ("Gr", 1)] {
        if m.signature().get(name) != Some(&arity) {
            return Err(PosetEncError::BadSignature(name.to_string()));
        }
    }
    let lt_src: BTreeSet<(String, String)> = m
        .rel("Lt")
        .into_iter()
        .map(|t| (t[0].clone(), t[1].clone()))
        .collect();
    for (a, b) in &lt_src {
        if a == b {
            return Err(PosetEncError::NotPartialOrder(format!("`{a}` is below itself")));
        }
        for (c, d) in &lt_src {
            if b == c && !lt_src.contains(&(a.clone(), d.clone())) {
                return Err(PosetEncError::NotPartialOrder(format!(
                    "`{a}` < `{b}` < `{d}` but `{a}` < `{d}` is missing"
                )));
            }
        }
    }
    let edges: BTreeSet<(String, String)> = m
        .rel("E")
        .into_iter()
        .map(|t| (t[0].clone(), t[1].clone()))
        .collect();
    for (a, b) in &edges {
        if a == b {
            return Err(PosetEncError::BadEdges(format!("loop at `{a}`")));
        }
        if !edges.contains(&(b.clone(), a.clone())) {
            return Err(PosetEncError::BadEdges(format!(
                "`{a}` - `{b}` present without its reverse"
            )));
        }
    }
    let mut elements = BTreeSet::new();
    let mut parts = BTreeMap::new();
    let mut clone_of = BTreeMap::new();
    let mut gr = BTreeSet::new();
    let mut gens: BTreeSet<(String, String)> = BTreeSet::new();
    for e in m.domain() {
        for i in 1..=4 {
            let c = clone_id(e, i);
            parts.insert(c.clone(), i);
            clone_of.insert(c.clone(), e.clone());
            elements.insert(c);
        }
        for i in 2..=4 {
            gens.insert((clone_id(e, i), clone_id(e, 1)));
        }
    }
    for g in m.unary_set("Gr") {
        gr.insert(clone_id(&g, 1));
    }
    for (u, v) in &lt_src {
        gens.insert((clone_id(u, 4), clone_id(v, 4)));
    }
    for (u, v) in &edges {
        gens.insert((clone_id(u, 2), clone_id(v, 3)));
        gens.insert((clone_id(u, 2), clone_id(v, 1)));
    }
    // The generator set is acyclic: fourth clones copy the source order and
    // every other generator increases the rank P2 < P3, P4 < P1, so the
    // closure is a strict partial order and construction cannot fail.
    let poset = Poset::from_generators(elements, &gens)?;
    ColoredPosetStructure::new(poset, gr, parts, clone_of)
}

/// Decodes the ground structure back out of a colored poset. The output
/// domain is the provenance of the ground-marked elements; `u Lt v` holds
/// when fourth-part covers below the two ground elements are ordered, and
/// `E(u, v)` when a second-part cover below `u` sits under a third-part
/// cover below `v`.
pub fn decode_poset(p: &ColoredPosetStructure) -> RelStructure {
    let sig = BTreeMap::from([
        ("Lt".to_string(), 2),
        ("E".to_string(), 2),
        ("Gr".to_string(), 1),
    ]);
    let mut out = RelStructure::new(sig);
    let covers = p.poset().cover_relation();
    let mut below: BTreeMap<&String, BTreeMap<u8, BTreeSet<&String>>> = BTreeMap::new();
    for (a, b) in &covers {
        if let Some(part) = p.part_of(a) {
            below.entry(b).or_default().entry(part).or_default().insert(a);
        }
    }
    let empty = BTreeSet::new();
    let covers_in_part = |g: &String, i: u8| -> &BTreeSet<&String> {
        below.get(g).and_then(|m| m.get(&i)).unwrap_or(&empty)
    };
    let name = |g: &String| -> String { p.clone_of(g).cloned().unwrap_or_else(|| g.clone()) };
    for g in p.gr() {
        out.add_element(&name(g));
        out.add_tuple("Gr", vec![name(g)]).expect("valid");
    }
    for u in p.gr() {
        for v in p.gr() {
            if u == v {
                continue;
            }
            let ordered = covers_in_part(u, 4)
                .iter()
                .any(|a| covers_in_part(v, 4).iter().any(|b| p.poset().lt(a, b)));
            if ordered {
                out.add_tuple("Lt", vec![name(u), name(v)]).expect("valid");
            }
            let adjacent = covers_in_part(u, 2)
                .iter()
                .any(|a| covers_in_part(v, 3).iter().any(|b| p.poset().lt(a, b)));
            if adjacent {
                out.add_tuple("E", vec![name(u), name(v)]).expect("valid");
            }
        }
    }
    out
}

/// True when the cover graph of the poset has no complete bipartite
/// subgraph with `t` vertices on each side. Expects `t >= 1`.
pub fn weak_sparseness_probe(p: &ColoredPosetStructure, t: usize) -> bool {
    !cover_graph_of(p).has_ktt_subgraph(t)
}

fn cover_graph_of(p: &ColoredPosetStructure) -> Graph {
    p.poset().cover_graph()
}

/// Convenience for tests and the command line: an `{Lt, E, Gr}` structure
/// over the given elements with every element ground.
pub fn ground_structure(
    elements: &[&str],
    lt: &[(&str, &str)],
    edges: &[(&str, &str)],
) -> RelStructure {
    let sig = BTreeMap::from([
        ("Lt".to_string(), 2),
        ("E".to_string(), 2),
        ("Gr".to_string(), 1),
    ]);
    let mut s = RelStructure::new(sig);
    for e in elements {
        s.add_element(e);
        s.add_tuple("Gr", vec![e.to_string()]).expect("valid");
    }
    let closed = transitive_closure(
        &lt.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
    );
    for (a, b) in closed {
        s.add_tuple("Lt", vec![a, b]).expect("valid");
    }
    for (a, b) in edges {
        s.add_tuple("E", vec![a.to_string(), b.to_string()]).expect("valid");
        s.add_tuple("E", vec![b.to_string(), a.to_string()]).expect("valid");
    }
    s
}
