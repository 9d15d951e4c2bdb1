//! Named check suites shared by the acceptance tests and the command-line
//! driver.
//!
//! Each suite generates seeded instances, checks the advertised
//! properties on every one of them, and folds the outcomes into a
//! [`RunReport`] with one line per property. A line carries the pass
//! count over the instances that reached it and, on failure, the first
//! failing instance's witness. Instances run in parallel when the
//! `parallel` feature is on; outcomes merge in instance order, so the
//! report is identical either way.

use crate::anchor::{
    amalgam_anchor, bicotree_anchor, build_cover, cotree_anchor, cover_serves, query_witnesses,
    restricted_bicotree, restricted_cotree, verify_anchoring,
};
use crate::bicotree::{clean_bicotree, is_clean_bicotree, o_partition, sob_decompose, BicotreeError};
use crate::cotree::{cograph_decompose, is_clean_cotree, CotreeError};
use crate::exec::map_indices;
use crate::folang::{
    apply_step, builtin_formulas, copy_name, edge_formula, eval, parse_formula,
    poset_code_signature, satisfying_set, Formula, Interpretation, NamedFormula, TransductionStep,
};
use crate::gen::{
    gen_bicotree_raw, gen_chain_coupling, gen_clean_bicotree, gen_clean_cotree, gen_coupling,
    gen_eval_formula, gen_eval_structure, gen_tmodel,
};
use crate::posetenc::{decode_poset, encode_poset, ground_structure};
use crate::report::RunReport;
use crate::splitdec::{
    amalgam_build, amalgam_restrict, coupling_view, sbuild, split_from_tmodel, Split, SplitError,
};
use crate::structure::{cycle_graph, path_graph, BipartiteGraph, Graph, Poset, VertexId};
use crate::tmodel::{Kappa, NodeKind, SemiPlaneTree, TModel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

/// Errors raised by the suite dispatcher.
#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}`; known suites: anchors, roundtrips, posetenc")]
    UnknownSuite(String),
}

/// One property outcome on one instance: the property name, and `None`
/// on pass or a witness on failure.
type Outcome = (&'static str, Option<String>);

/// Per-instance result: property outcomes plus numeric statistics.
type InstanceRow = (Vec<Outcome>, Vec<(&'static str, u64)>);

/// Per-instance seed, spread so that neighboring run seeds still produce
/// distinct instance streams.
fn instance_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
}

/// Folds per-instance rows into one report line per property (pass count
/// plus first witness) and one `max_*` statistic per reported key.
fn merge_rows(report: &mut RunReport, rows: Vec<InstanceRow>) {
    let mut order: Vec<&'static str> = Vec::new();
    for (outcomes, _) in &rows {
        for (name, _) in outcomes {
            if !order.contains(name) {
                order.push(name);
            }
        }
    }
    for name in order {
        let mut reached = 0usize;
        let mut failed = 0usize;
        let mut witness = None;
        for (i, (outcomes, _)) in rows.iter().enumerate() {
            for (n, w) in outcomes {
                if *n != name {
                    continue;
                }
                reached += 1;
                if let Some(w) = w {
                    failed += 1;
                    if witness.is_none() {
                        witness = Some(format!("instance {i}: {w}"));
                    }
                }
            }
        }
        let label = format!("{name} [{}/{reached}]", reached - failed);
        report.check(&label, failed == 0, witness);
    }
    let mut maxima: BTreeMap<&'static str, u64> = BTreeMap::new();
    for (_, stats) in &rows {
        for (key, value) in stats {
            let slot = maxima.entry(key).or_insert(0);
            *slot = (*slot).max(*value);
        }
    }
    for (key, value) in maxima {
        report.stat(&format!("max_{key}"), json!(value));
    }
}

/// Appends a sub-report's checks and statistics under a tag.
fn absorb(into: &mut RunReport, tag: &str, sub: RunReport) {
    for c in sub.checks {
        into.checks.push(crate::report::CheckResult {
            name: format!("{tag}: {}", c.name),
            pass: c.pass,
            witness: c.witness,
        });
    }
    for (k, v) in sub.stats {
        into.stat(&format!("{tag}.{k}"), v);
    }
}

fn builtin(name: &str) -> NamedFormula {
    builtin_formulas()
        .into_iter()
        .find(|f| f.name == name)
        .unwrap_or_else(|| panic!("`{name}` is a library formula"))
}

/// Enumerates the subsets of an ordered slice by bit mask.
fn subset_of(order: &[VertexId], mask: u64) -> BTreeSet<VertexId> {
    order
        .iter()
        .enumerate()
        .filter(|(p, _)| mask & (1 << p) != 0)
        .map(|(_, v)| v.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Round-trip suites
// ---------------------------------------------------------------------------

/// Cograph round trips: seed-generated clean cotrees build graphs that
/// decompose back into clean cotrees building the same graph, and the
/// decomposition is stable under one more round.
pub fn cograph_roundtrip_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite cograph round trips");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        let mut row: Vec<Outcome> = Vec::new();
        let mut stats: Vec<(&'static str, u64)> = Vec::new();
        let t = gen_clean_cotree(s, 10, 5).expect("positive bounds");
        stats.push(("cotree_leaves", t.ground().len() as u64));
        stats.push(("cotree_height", t.height() as u64));
        let g = match t.build() {
            Ok(g) => g,
            Err(e) => {
                row.push(("clean cotrees build graphs", Some(format!("seed {s}: {e}"))));
                return (row, stats);
            }
        };
        row.push(("clean cotrees build graphs", None));
        let d = match cograph_decompose(&g) {
            Ok(d) => d,
            Err(e) => {
                row.push(("built graphs decompose", Some(format!("seed {s}: {e}"))));
                return (row, stats);
            }
        };
        row.push(("built graphs decompose", None));
        row.push((
            "decompositions are clean cotrees",
            if is_clean_cotree(&d) { None } else { Some(format!("seed {s}")) },
        ));
        match d.build() {
            Ok(h) if h == g => row.push(("round trips rebuild the exact graph", None)),
            Ok(_) => row.push((
                "round trips rebuild the exact graph",
                Some(format!("seed {s}: rebuilt graph differs")),
            )),
            Err(e) => row.push((
                "round trips rebuild the exact graph",
                Some(format!("seed {s}: {e}")),
            )),
        }
        row.push((
            "decompositions are isomorphic to the source tree",
            if d.model().iso_fixing_ground(t.model()) {
                None
            } else {
                Some(format!("seed {s}: the trees differ beyond isomorphism"))
            },
        ));
        (row, stats)
    });
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("max_leaves_bound", json!(10));
    report.stat("max_height_bound", json!(5));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

/// Bipartite round trips: clean bicotrees rebuild their bipartite graph
/// through redecomposition, raw trees clean up within triple height
/// without changing the graph, and accepted graphs avoid induced
/// seven-vertex paths.
pub fn sob_roundtrip_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite bipartite round trips");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        let mut row: Vec<Outcome> = Vec::new();
        let mut stats: Vec<(&'static str, u64)> = Vec::new();
        let t = gen_clean_bicotree(s, 12, 4).expect("positive bounds");
        stats.push(("bicotree_leaves", t.ground().len() as u64));
        stats.push(("bicotree_height", t.height() as u64));
        match t.build_bipartite() {
            Err(e) => row.push(("clean bicotrees build graphs", Some(format!("seed {s}: {e}")))),
            Ok(b) => {
                row.push(("clean bicotrees build graphs", None));
                match sob_decompose(&b) {
                    Err(e) => {
                        row.push(("built bipartite graphs decompose", Some(format!("seed {s}: {e}"))))
                    }
                    Ok(d) => {
                        row.push(("built bipartite graphs decompose", None));
                        row.push((
                            "redecompositions are clean bicotrees",
                            if is_clean_bicotree(&d) { None } else { Some(format!("seed {s}")) },
                        ));
                        row.push((
                            "round trips rebuild the exact bipartite graph",
                            match d.build_bipartite() {
                                Ok(h) if h == b => None,
                                Ok(_) => Some(format!("seed {s}: rebuilt graph differs")),
                                Err(e) => Some(format!("seed {s}: {e}")),
                            },
                        ));
                        row.push((
                            "accepted graphs have no induced seven-vertex path",
                            if b.graph().has_induced_path(7) {
                                Some(format!("seed {s}: accepted graph contains one"))
                            } else {
                                None
                            },
                        ));
                    }
                }
            }
        }
        let raw = gen_bicotree_raw(s ^ 0x5bd1_e995, 8, 3).expect("positive bounds");
        match (raw.build_bipartite(), clean_bicotree(&raw)) {
            (Ok(rb), Ok(c)) => {
                row.push((
                    "raw trees clean up without changing the graph",
                    match c.build_bipartite() {
                        Ok(cb) if cb == rb => None,
                        Ok(_) => Some(format!("seed {s}: the graph changed")),
                        Err(e) => Some(format!("seed {s}: {e}")),
                    },
                ));
                row.push((
                    "cleaned trees are clean",
                    if is_clean_bicotree(&c) { None } else { Some(format!("seed {s}")) },
                ));
                row.push((
                    "cleaning stays within triple height",
                    if c.height() <= 3 * raw.height() {
                        None
                    } else {
                        Some(format!(
                            "seed {s}: height went from {} to {}",
                            raw.height(),
                            c.height()
                        ))
                    },
                ));
            }
            (Err(e), _) | (_, Err(e)) => row.push((
                "raw trees clean up without changing the graph",
                Some(format!("seed {s}: {e}")),
            )),
        }
        (row, stats)
    });
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("max_leaves_bound", json!(12));
    report.stat("max_height_bound", json!(4));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

/// Amalgam round trips: models split into verified colorings, the split
/// amalgamates and rebuilds the exact graph, restriction commutes with
/// induced subgraphs over every vertex subset, and the coupling view's
/// order is a disjoint union of chains.
pub fn amalgam_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite amalgam round trips");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        let mut row: Vec<Outcome> = Vec::new();
        let mut stats: Vec<(&'static str, u64)> = Vec::new();
        let n = 1 + i % 3;
        let m = gen_tmodel(s, n, 8, 3).expect("positive bounds");
        stats.push(("model_ground", m.ground().len() as u64));
        stats.push(("model_height", m.height() as u64));
        let ts = match split_from_tmodel(&m) {
            Ok(ts) => ts,
            Err(e) => {
                row.push(("models split", Some(format!("seed {s}: {e}"))));
                return (row, stats);
            }
        };
        row.push(("models split", None));
        let verdict = ts.split.verify();
        row.push((
            "splits verify",
            if verdict.passed() {
                None
            } else {
                Some(format!("seed {s}: {}", verdict.issues.join("; ")))
            },
        ));
        let g = m.build().expect("valid models build");
        let a = match amalgam_build(&g, &ts.split) {
            Ok(a) => a,
            Err(e) => {
                row.push(("splits amalgamate", Some(format!("seed {s}: {e}"))));
                return (row, stats);
            }
        };
        row.push(("splits amalgamate", None));
        stats.push(("amalgam_cells", a.size() as u64));
        row.push((
            "amalgams rebuild the exact graph",
            match sbuild(&a) {
                Ok(h) if h == g => None,
                Ok(_) => Some(format!("seed {s}: rebuilt graph differs")),
                Err(e) => Some(format!("seed {s}: {e}")),
            },
        ));
        let order: Vec<VertexId> = a.ground().iter().cloned().collect();
        let mut commute_witness = None;
        if order.len() <= 10 {
            'masks: for mask in 0..(1u64 << order.len()) {
                let w = subset_of(&order, mask);
                let restricted = match amalgam_restrict(&a, &w) {
                    Ok(r) => r,
                    Err(e) => {
                        commute_witness = Some(format!("seed {s}, subset {w:?}: {e}"));
                        break 'masks;
                    }
                };
                let direct = g.induced_subgraph(&w).expect("subset of vertices");
                match sbuild(&restricted) {
                    Ok(h) if h == direct => {}
                    Ok(_) => {
                        commute_witness =
                            Some(format!("seed {s}, subset {w:?}: graphs differ"));
                        break 'masks;
                    }
                    Err(e) => {
                        commute_witness = Some(format!("seed {s}, subset {w:?}: {e}"));
                        break 'masks;
                    }
                }
            }
        }
        row.push(("restriction commutes with induced subgraphs", commute_witness));
        let view = coupling_view(&a);
        let pairs: BTreeSet<(String, String)> = view
            .rel("Lt")
            .into_iter()
            .map(|t| (t[0].clone(), t[1].clone()))
            .collect();
        row.push((
            "coupling orders are disjoint unions of chains",
            match Poset::new(view.domain().clone(), pairs) {
                Ok(p) if p.is_union_of_chains() => None,
                Ok(_) => Some(format!("seed {s}: the order forks")),
                Err(e) => Some(format!("seed {s}: {e}")),
            },
        ));
        (row, stats)
    });
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("max_colors", json!(3));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

// ---------------------------------------------------------------------------
// Poset encoding suite
// ---------------------------------------------------------------------------

/// Poset encoding round trips: random couplings encode into valid colored
/// posets, decode back to the exact coupling, and couplings with sparse
/// adjacency and chain orders keep their cover graphs sparse.
pub fn posetenc_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite poset encoding");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        let mut row: Vec<Outcome> = Vec::new();
        let mut stats: Vec<(&'static str, u64)> = Vec::new();
        let c = gen_coupling(s, 6).expect("positive bounds");
        stats.push(("coupling_elements", c.domain().len() as u64));
        match encode_poset(&c) {
            Err(e) => row.push(("couplings encode", Some(format!("seed {s}: {e}")))),
            Ok(p) => {
                row.push(("couplings encode", None));
                stats.push(("code_elements", p.poset().elements().len() as u64));
                let issues = p.validate();
                row.push((
                    "encodings validate",
                    if issues.is_empty() {
                        None
                    } else {
                        Some(format!("seed {s}: {}", issues.join("; ")))
                    },
                ));
                let back = decode_poset(&p);
                let mut mismatch = None;
                if back.domain() != c.domain() {
                    mismatch = Some("domains differ".to_string());
                }
                for rel in ["Lt", "E", "Gr"] {
                    if mismatch.is_none() && back.rel(rel) != c.rel(rel) {
                        mismatch = Some(format!("`{rel}` differs"));
                    }
                }
                row.push((
                    "decoding inverts encoding",
                    mismatch.map(|m| format!("seed {s}: {m}")),
                ));
            }
        }
        let sparse = gen_chain_coupling(s ^ 0xa5a5_a5a5, 8).expect("positive bounds");
        row.push((
            "sparse chain couplings keep cover graphs thin",
            match encode_poset(&sparse) {
                Ok(p) => {
                    if p.poset().cover_graph().has_ktt_subgraph(3) {
                        Some(format!("seed {s}: the cover graph holds a three-by-three biclique"))
                    } else {
                        None
                    }
                }
                Err(e) => Some(format!("seed {s}: {e}")),
            },
        ));
        (row, stats)
    });
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("max_elements_bound", json!(6));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

// ---------------------------------------------------------------------------
// Anchor suite
// ---------------------------------------------------------------------------

/// Anchors and covers: anchor sizes respect the height bounds, every
/// restriction of every instance passes the exhaustive anchoring check,
/// amalgam anchors respect the combined bound, and covers serve every
/// query of at most two elements.
pub fn anchor_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite anchors");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        if i % 2 == 0 {
            cotree_anchor_case(s)
        } else {
            bicotree_anchor_case(s)
        }
    });
    merge_rows(&mut report, rows);
    let amalgam_count = (instances / 4).max(1);
    let rows = map_indices(amalgam_count, |j| amalgam_anchor_case(instance_seed(seed ^ 0x0c0f_fee0, j), j));
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("amalgam_instances", json!(amalgam_count));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

fn cotree_anchor_case(s: u64) -> InstanceRow {
    let mut row: Vec<Outcome> = Vec::new();
    let mut stats: Vec<(&'static str, u64)> = Vec::new();
    let t = gen_clean_cotree(s, 10, 5).expect("positive bounds");
    stats.push(("cotree_leaves", t.ground().len() as u64));
    let f = match cotree_anchor(&t) {
        Ok(f) => f,
        Err(e) => {
            row.push(("cotree anchors build", Some(format!("seed {s}: {e}"))));
            return (row, stats);
        }
    };
    row.push(("cotree anchors build", None));
    stats.push(("cotree_anchor_size", f.size() as u64));
    row.push((
        "cotree anchor sizes stay within the height",
        if f.size() <= t.height() {
            None
        } else {
            Some(format!("seed {s}: size {} over height {}", f.size(), t.height()))
        },
    ));
    let order: Vec<VertexId> = t.ground().iter().cloned().collect();
    let mut witness = None;
    'masks: for mask in 0..(1u64 << order.len()) {
        let lprime = subset_of(&order, mask);
        let restricted = match restricted_cotree(&t, &f, &lprime) {
            Ok(r) => r,
            Err(e) => {
                witness = Some(format!("seed {s}, leaf set {lprime:?}: {e}"));
                break 'masks;
            }
        };
        let verdict = verify_anchoring(t.model(), restricted.model(), &f);
        if !verdict.pass || !verdict.exhaustive {
            witness = Some(format!(
                "seed {s}, leaf set {lprime:?}: separated by {:?}",
                verdict.witness
            ));
            break 'masks;
        }
    }
    row.push(("cotree restrictions are anchoring for every leaf set", witness));
    (row, stats)
}

fn bicotree_anchor_case(s: u64) -> InstanceRow {
    let mut row: Vec<Outcome> = Vec::new();
    let mut stats: Vec<(&'static str, u64)> = Vec::new();
    let t = gen_clean_bicotree(s, 10, 4).expect("positive bounds");
    stats.push(("bicotree_leaves", t.ground().len() as u64));
    let f = match bicotree_anchor(&t) {
        Ok(f) => f,
        Err(e) => {
            row.push(("bicotree anchors build", Some(format!("seed {s}: {e}"))));
            return (row, stats);
        }
    };
    row.push(("bicotree anchors build", None));
    stats.push(("bicotree_anchor_size", f.size() as u64));
    let bound = 5u64.pow(t.height() as u32 + 1);
    row.push((
        "bicotree anchor sizes stay under the order bound",
        if (f.size() as u64) < bound {
            None
        } else {
            Some(format!("seed {s}: size {} at bound {bound}", f.size()))
        },
    ));
    let order: Vec<VertexId> = t.ground().iter().cloned().collect();
    let mut witness = None;
    'masks: for mask in 0..(1u64 << order.len()) {
        let lprime = subset_of(&order, mask);
        let restricted = match restricted_bicotree(&t, &f, &lprime) {
            Ok(r) => r,
            Err(e) => {
                witness = Some(format!("seed {s}, leaf set {lprime:?}: {e}"));
                break 'masks;
            }
        };
        let verdict = verify_anchoring(t.model(), restricted.model(), &f);
        if !verdict.pass || !verdict.exhaustive {
            witness = Some(format!(
                "seed {s}, leaf set {lprime:?}: separated by {:?}",
                verdict.witness
            ));
            break 'masks;
        }
    }
    row.push(("bicotree restrictions are anchoring for every leaf set", witness));
    (row, stats)
}

fn amalgam_anchor_case(s: u64, j: usize) -> InstanceRow {
    let mut row: Vec<Outcome> = Vec::new();
    let mut stats: Vec<(&'static str, u64)> = Vec::new();
    let n = 1 + j % 3;
    let m = gen_tmodel(s, n, 10, 3).expect("positive bounds");
    let a = match split_from_tmodel(&m)
        .map_err(|e| e.to_string())
        .and_then(|ts| {
            amalgam_build(&m.build().expect("valid models build"), &ts.split)
                .map_err(|e| e.to_string())
        }) {
        Ok(a) => a,
        Err(e) => {
            row.push(("amalgams assemble for anchoring", Some(format!("seed {s}: {e}"))));
            return (row, stats);
        }
    };
    row.push(("amalgams assemble for anchoring", None));
    let f = match amalgam_anchor(&a) {
        Ok(f) => f,
        Err(e) => {
            row.push(("amalgam anchors build", Some(format!("seed {s}: {e}"))));
            return (row, stats);
        }
    };
    row.push(("amalgam anchors build", None));
    stats.push(("amalgam_anchor_size", f.size() as u64));
    let mut h = 0usize;
    for i in 1..=a.size() {
        if let Some(t) = a.cell_tree(i) {
            h = h.max(t.height());
        }
        for k in i + 1..=a.size() {
            if let Some(t) = a.pair_tree(i, k) {
                h = h.max(t.height());
            }
        }
    }
    let bound = h as u64 + 5u64.pow(h as u32 + 1) * (a.size() as u64 - 1);
    row.push((
        "amalgam anchor sizes stay within the combined bound",
        if f.size() as u64 <= bound {
            None
        } else {
            Some(format!("seed {s}: size {} over bound {bound}", f.size()))
        },
    ));
    let mut zrng = ChaCha8Rng::seed_from_u64(s ^ 0x00c0_ffee);
    let zeta: BTreeMap<VertexId, usize> = a
        .ground()
        .iter()
        .map(|v| (v.clone(), zrng.gen_range(1..=3)))
        .collect();
    let pieces = match build_cover(&a, &zeta, 2) {
        Ok(p) => p,
        Err(e) => {
            row.push(("covers build", Some(format!("seed {s}: {e}"))));
            return (row, stats);
        }
    };
    row.push(("covers build", None));
    stats.push(("cover_pieces", pieces.len() as u64));
    let domain: Vec<String> = coupling_view(&a).domain().iter().cloned().collect();
    let mut witness = None;
    'queries: for (idx, x1) in domain.iter().enumerate() {
        for x2 in domain.iter().skip(idx) {
            let query = BTreeSet::from([x1.clone(), x2.clone()]);
            let y = match query_witnesses(&a, &f, &query) {
                Ok(y) => y,
                Err(_) => continue,
            };
            match cover_serves(&a, &pieces, &y) {
                Ok(true) => {}
                Ok(false) => {
                    witness = Some(format!("seed {s}: no piece serves {query:?}"));
                    break 'queries;
                }
                Err(e) => {
                    witness = Some(format!("seed {s}, query {query:?}: {e}"));
                    break 'queries;
                }
            }
        }
    }
    row.push(("covers serve every small query", witness));
    (row, stats)
}

// ---------------------------------------------------------------------------
// Formula oracle suite
// ---------------------------------------------------------------------------

/// Formula oracles: the adjacency formulas match model building edge for
/// edge, the encoding and decoding formulas reproduce the poset encoder
/// and decoder, and direct evaluation matches the set-algebra reference
/// evaluator.
pub fn oracle_suite(seed: u64, instances: usize) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite formula oracles");
    report.set_seed(seed);
    let rows = map_indices(instances, |i| {
        let s = instance_seed(seed, i);
        let mut row: Vec<Outcome> = Vec::new();
        let mut stats: Vec<(&'static str, u64)> = Vec::new();
        let n = 1 + i % 3;
        let m = gen_tmodel(s, n, 6, 3).expect("positive bounds");
        let structure = m.logic_structure();
        stats.push(("model_nodes", structure.domain().len() as u64));
        let nf = edge_formula(n);
        let g = m.build().expect("valid models build");
        let mut witness = None;
        'pairs: for u in structure.domain() {
            for v in structure.domain() {
                let env = BTreeMap::from([
                    ("x".to_string(), u.clone()),
                    ("y".to_string(), v.clone()),
                ]);
                match eval(&structure, &nf.formula, &env) {
                    Ok(holds) if holds == g.has_edge(u, v) => {}
                    Ok(_) => {
                        witness = Some(format!("seed {s}: pair `{u}`, `{v}` disagrees"));
                        break 'pairs;
                    }
                    Err(e) => {
                        witness = Some(format!("seed {s}: {e}"));
                        break 'pairs;
                    }
                }
            }
        }
        row.push(("edge formulas match built graphs", witness));
        let c = gen_coupling(s ^ 0x51ed_270b, 5).expect("positive bounds");
        row.push((
            "encoding formulas reproduce the poset code",
            encode_formulas_match(&c).err().map(|m| format!("seed {s}: {m}")),
        ));
        row.push((
            "decoding formulas reproduce the decoded coupling",
            decode_formulas_match(&c).err().map(|m| format!("seed {s}: {m}")),
        ));
        (row, stats)
    });
    merge_rows(&mut report, rows);
    let eval_count = instances * 5;
    let rows = map_indices(eval_count, |j| {
        let s = instance_seed(seed ^ 0x7e57_ab1e, j);
        let mut row: Vec<Outcome> = Vec::new();
        let structure = gen_eval_structure(s, 4).expect("positive bounds");
        let formula = gen_eval_formula(s ^ 0x77, 2);
        row.push((
            "direct evaluation matches the reference evaluator",
            eval_matches_reference(&structure, &formula).err().map(|m| format!("seed {s}: {m}")),
        ));
        (row, Vec::new())
    });
    merge_rows(&mut report, rows);
    report.stat("instances", json!(instances));
    report.stat("eval_instances", json!(eval_count));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

/// Runs the copying pipeline with the encoding formulas and compares the
/// generated order against the poset encoder.
fn encode_formulas_match(c: &crate::structure::RelStructure) -> Result<(), String> {
    let fail = |e: &dyn std::fmt::Display| e.to_string();
    let copied = apply_step(c, &TransductionStep::Copy(4)).map_err(|e| fail(&e))?;
    let interp = Interpretation::new(
        "u",
        Formula::Bool(true),
        BTreeMap::from([
            (
                "Gr".to_string(),
                (vec!["u".to_string()], builtin("rho_gr_enc").formula),
            ),
            (
                "Lt".to_string(),
                (
                    vec!["u".to_string(), "v".to_string()],
                    builtin("rho_lt_enc").formula,
                ),
            ),
        ]),
    )
    .map_err(|e| fail(&e))?;
    let out = apply_step(&copied, &TransductionStep::Interpret(interp)).map_err(|e| fail(&e))?;
    let generators: BTreeSet<(String, String)> = out
        .rel("Lt")
        .into_iter()
        .map(|t| (t[0].clone(), t[1].clone()))
        .collect();
    let closure =
        Poset::from_generators(out.domain().clone(), &generators).map_err(|e| fail(&e))?;
    let encoded = encode_poset(c).map_err(|e| fail(&e))?;
    if closure.pairs() != encoded.poset().pairs() {
        return Err("the generated order differs from the encoder".to_string());
    }
    if out.unary_set("Gr") != *encoded.gr() {
        return Err("the generated ground marks differ from the encoder".to_string());
    }
    Ok(())
}

/// Interprets the decoding formulas on an encoded coupling and compares
/// the result against the poset decoder.
fn decode_formulas_match(c: &crate::structure::RelStructure) -> Result<(), String> {
    let fail = |e: &dyn std::fmt::Display| e.to_string();
    let encoded = encode_poset(c).map_err(|e| fail(&e))?;
    let view = encoded.logic_structure();
    let gr = parse_formula("Gr(u)", &poset_code_signature()).map_err(|e| fail(&e))?;
    let pair = vec!["u".to_string(), "v".to_string()];
    let interp = Interpretation::new(
        "u",
        gr.clone(),
        BTreeMap::from([
            ("Gr".to_string(), (vec!["u".to_string()], gr)),
            ("Lt".to_string(), (pair.clone(), builtin("rho_lt_dec").formula)),
            ("E".to_string(), (pair, builtin("rho_e_dec").formula)),
        ]),
    )
    .map_err(|e| fail(&e))?;
    let out = apply_step(&view, &TransductionStep::Interpret(interp)).map_err(|e| fail(&e))?;
    let decoded = decode_poset(&encoded);
    let lifted_domain: BTreeSet<String> =
        decoded.domain().iter().map(|e| copy_name(e, 1)).collect();
    if out.domain() != &lifted_domain {
        return Err("the decoded domains differ".to_string());
    }
    for rel in ["Lt", "E", "Gr"] {
        let lifted: BTreeSet<Vec<String>> = decoded
            .rel(rel)
            .into_iter()
            .map(|t| t.iter().map(|e| copy_name(e, 1)).collect())
            .collect();
        if out.rel(rel) != lifted {
            return Err(format!("the decoded `{rel}` relations differ"));
        }
    }
    Ok(())
}

/// Compares direct evaluation against the set-algebra satisfying set over
/// every assignment of `x`, `y`, `z`.
fn eval_matches_reference(
    structure: &crate::structure::RelStructure,
    formula: &Formula,
) -> Result<(), String> {
    let vars: Vec<String> = ["x", "y", "z"].iter().map(|v| v.to_string()).collect();
    let table = satisfying_set(structure, formula, &vars).map_err(|e| e.to_string())?;
    for a in structure.domain() {
        for b in structure.domain() {
            for c in structure.domain() {
                let env = BTreeMap::from([
                    ("x".to_string(), a.clone()),
                    ("y".to_string(), b.clone()),
                    ("z".to_string(), c.clone()),
                ]);
                let direct = eval(structure, formula, &env).map_err(|e| e.to_string())?;
                let row = vec![a.clone(), b.clone(), c.clone()];
                if direct != table.contains(&row) {
                    return Err(format!("assignment {row:?} disagrees on `{formula}`"));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Negative suite
// ---------------------------------------------------------------------------

/// Obstruction witnesses and mutation coverage: the decomposers refuse
/// their minimal obstructions with concrete witnesses, and twenty
/// targeted corruptions of valid artifacts are each caught by the
/// validator advertised for them.
pub fn negative_suite() -> RunReport {
    let start = Instant::now();
    let mut report = RunReport::new("suite negative checks");
    obstruction_checks(&mut report);
    model_mutation_checks(&mut report);
    amalgam_mutation_checks(&mut report);
    code_mutation_checks(&mut report);
    cover_mutation_checks(&mut report);
    report.stat("mutations", json!(20));
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

fn obstruction_checks(report: &mut RunReport) {
    let p4 = path_graph(&["a", "b", "c", "d"]);
    match cograph_decompose(&p4) {
        Err(CotreeError::NotCograph { witness }) => {
            let genuine = witness.len() == 4
                && p4.has_edge(&witness[0], &witness[1])
                && p4.has_edge(&witness[1], &witness[2])
                && p4.has_edge(&witness[2], &witness[3])
                && !p4.has_edge(&witness[0], &witness[2])
                && !p4.has_edge(&witness[0], &witness[3])
                && !p4.has_edge(&witness[1], &witness[3]);
            report.check(
                "a four-vertex path is refused with an induced path witness",
                genuine,
                Some(format!("witness {witness:?}")),
            );
        }
        other => report.check(
            "a four-vertex path is refused with an induced path witness",
            false,
            Some(format!("got {other:?}")),
        ),
    }
    let p7_ids = ["x1", "y1", "x2", "y2", "x3", "y3", "x4"];
    let sides: BTreeMap<VertexId, u8> = p7_ids
        .iter()
        .map(|v| (v.to_string(), if v.starts_with('x') { 1 } else { 2 }))
        .collect();
    let p7 = BipartiteGraph::new(path_graph(&p7_ids), sides).expect("sides cover the path");
    match sob_decompose(&p7) {
        Err(BicotreeError::NotSob { p7: Some(witness), .. }) => report.check(
            "a seven-vertex path is refused with an induced path witness",
            witness.len() == 7,
            Some(format!("witness {witness:?}")),
        ),
        other => report.check(
            "a seven-vertex path is refused with an induced path witness",
            false,
            Some(format!("got {other:?}")),
        ),
    }
    let c6_ids = ["x1", "y1", "x2", "y2", "x3", "y3"];
    let sides: BTreeMap<VertexId, u8> = c6_ids
        .iter()
        .map(|v| (v.to_string(), if v.starts_with('x') { 1 } else { 2 }))
        .collect();
    let c6 = BipartiteGraph::new(cycle_graph(&c6_ids), sides).expect("sides cover the cycle");
    match o_partition(&c6) {
        Err(BicotreeError::NoOPartition(reason)) => report.check(
            "a six-cycle admits no ordered partition",
            true,
            Some(format!("{reason}")),
        ),
        other => report.check(
            "a six-cycle admits no ordered partition",
            false,
            Some(format!("got {other:?}")),
        ),
    }
}

/// A small valid model with an unordered root, an ordered internal node,
/// and leaves on both: the surface the model mutations corrupt.
fn mutation_model() -> TModel {
    let mut tree = SemiPlaneTree::with_root("r", NodeKind::A);
    tree.attach("a", NodeKind::Leaf, "r").expect("root exists");
    tree.attach("b", NodeKind::Leaf, "r").expect("root exists");
    tree.attach("c", NodeKind::C, "r").expect("root exists");
    tree.attach("d", NodeKind::Leaf, "c").expect("node exists");
    tree.attach("e", NodeKind::Leaf, "c").expect("node exists");
    let gamma = BTreeMap::from([
        ("a".to_string(), 1),
        ("b".to_string(), 2),
        ("d".to_string(), 1),
        ("e".to_string(), 2),
    ]);
    let symmetric = Kappa(vec![vec![true, true], vec![true, false]]);
    let skew = Kappa(vec![vec![false, true], vec![false, false]]);
    let kappa = BTreeMap::from([("r".to_string(), symmetric), ("c".to_string(), skew)]);
    TModel::new(tree, gamma, kappa, 2)
}

fn model_mutation_checks(report: &mut RunReport) {
    let base = mutation_model();
    report.check(
        "the mutation base model validates",
        base.validate().is_empty(),
        Some(base.validate().join("; ")),
    );
    let mutations: Vec<(&str, Box<dyn Fn(&TModel) -> TModel>, &str)> = vec![
        (
            "mutation: an asymmetric table on an unordered node is flagged",
            Box::new(|m| {
                let mut kappa = kappa_map(m);
                kappa.insert("r".to_string(), Kappa(vec![vec![true, true], vec![false, false]]));
                TModel::new(m.tree().clone(), m.gamma().clone(), kappa, m.n())
            }),
            "not symmetric",
        ),
        (
            "mutation: a wrongly sized table is flagged",
            Box::new(|m| {
                let mut kappa = kappa_map(m);
                kappa.insert("c".to_string(), Kappa(vec![vec![true]]));
                TModel::new(m.tree().clone(), m.gamma().clone(), kappa, m.n())
            }),
            "is not 2x2",
        ),
        (
            "mutation: a leaf color of zero is flagged",
            Box::new(|m| {
                let mut gamma = m.gamma().clone();
                gamma.insert("a".to_string(), 0);
                TModel::new(m.tree().clone(), gamma, kappa_map(m), m.n())
            }),
            "outside 1..=2",
        ),
        (
            "mutation: a missing leaf color is flagged",
            Box::new(|m| {
                let mut gamma = m.gamma().clone();
                gamma.remove("a");
                TModel::new(m.tree().clone(), gamma, kappa_map(m), m.n())
            }),
            "has no color",
        ),
        (
            "mutation: a color on an internal node is flagged",
            Box::new(|m| {
                let mut gamma = m.gamma().clone();
                gamma.insert("c".to_string(), 1);
                TModel::new(m.tree().clone(), gamma, kappa_map(m), m.n())
            }),
            "colors non-leaf",
        ),
        (
            "mutation: a missing internal table is flagged",
            Box::new(|m| {
                let mut kappa = kappa_map(m);
                kappa.remove("c");
                TModel::new(m.tree().clone(), m.gamma().clone(), kappa, m.n())
            }),
            "has no kappa table",
        ),
        (
            "mutation: a table on a leaf is flagged",
            Box::new(|m| {
                let mut kappa = kappa_map(m);
                kappa.insert("a".to_string(), Kappa(vec![vec![true, true], vec![true, true]]));
                TModel::new(m.tree().clone(), m.gamma().clone(), kappa, m.n())
            }),
            "carries a kappa table",
        ),
        (
            "mutation: a table on an unknown node is flagged",
            Box::new(|m| {
                let mut kappa = kappa_map(m);
                kappa.insert("zz".to_string(), Kappa(vec![vec![true, true], vec![true, true]]));
                TModel::new(m.tree().clone(), m.gamma().clone(), kappa, m.n())
            }),
            "unknown node",
        ),
    ];
    for (name, mutate, fragment) in mutations {
        let issues = mutate(&base).validate();
        let caught = issues.iter().any(|i| i.contains(fragment));
        report.check(
            name,
            caught,
            Some(if issues.is_empty() {
                "the validator stayed silent".to_string()
            } else {
                issues.join("; ")
            }),
        );
    }
}

fn kappa_map(m: &TModel) -> BTreeMap<String, Kappa> {
    m.tree()
        .nodes()
        .filter_map(|v| m.kappa_of(v).map(|k| (v.clone(), k.clone())))
        .collect()
}

/// The four-cycle split into two opposite cells, used as the amalgam
/// mutation surface.
fn mutation_amalgam() -> crate::splitdec::Amalgam {
    let mut g = Graph::new();
    for v in ["a", "b", "c", "d"] {
        g.add_vertex(v);
    }
    for (x, y) in [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")] {
        g.add_edge(x, y).expect("vertices added");
    }
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

fn amalgam_mutation_checks(report: &mut RunReport) {
    let base = mutation_amalgam();
    let json: serde_json::Value =
        serde_json::from_str(&base.to_json()).expect("amalgams serialize");
    report.check(
        "the mutation base amalgam round trips through json",
        crate::splitdec::Amalgam::from_json(&base.to_json()).is_ok(),
        None,
    );
    let mutations: Vec<(&str, Box<dyn Fn(&mut serde_json::Value)>)> = vec![
        (
            "mutation: a dropped attachment edge is flagged",
            Box::new(|doc| {
                let list = doc["attachments"].as_array_mut().expect("array");
                list.pop();
            }),
        ),
        (
            "mutation: a cell copy pointed at a taken leaf is flagged",
            Box::new(|doc| {
                let stolen = doc["inj_cell"]["c"].clone();
                doc["inj_cell"]["a"] = stolen;
            }),
        ),
        (
            "mutation: a removed cell copy is flagged",
            Box::new(|doc| {
                doc["inj_cell"].as_object_mut().expect("object").remove("a");
            }),
        ),
        (
            "mutation: a removed pair tree is flagged",
            Box::new(|doc| {
                doc["pair_trees"].as_object_mut().expect("object").remove("1,2");
            }),
        ),
        (
            "mutation: an out-of-range cell color is flagged",
            Box::new(|doc| {
                doc["gamma"]["a"] = json!(3);
            }),
        ),
        (
            "mutation: a removed pair copy is flagged",
            Box::new(|doc| {
                doc["inj_pair"]["1,2"].as_object_mut().expect("object").remove("a");
            }),
        ),
    ];
    for (name, mutate) in mutations {
        let mut doc = json.clone();
        mutate(&mut doc);
        let text = serde_json::to_string(&doc).expect("value serializes");
        match crate::splitdec::Amalgam::from_json(&text) {
            Err(SplitError::BrokenInjection(detail)) => report.check(name, true, Some(detail)),
            Err(other) => report.check(
                name,
                false,
                Some(format!("a different validator fired: {other}")),
            ),
            Ok(_) => report.check(name, false, Some("the validator stayed silent".to_string())),
        }
    }
}

fn code_mutation_checks(report: &mut RunReport) {
    let coupling = ground_structure(&["a", "b", "c"], &[("a", "b"), ("b", "c")], &[("a", "c")]);
    let base = encode_poset(&coupling).expect("encodes");
    let json: serde_json::Value =
        serde_json::from_str(&base.to_json()).expect("codes serialize");
    report.check(
        "the mutation base code round trips through json",
        crate::posetenc::ColoredPosetStructure::from_json(&base.to_json()).is_ok(),
        None,
    );
    let set_element = |doc: &mut serde_json::Value, id: &str, key: &str, value: serde_json::Value| {
        for item in doc["elements"].as_array_mut().expect("array") {
            if item["id"] == json!(id) {
                item[key] = value;
                return;
            }
        }
        panic!("element `{id}` is in the code");
    };
    let mutations: Vec<(&str, Box<dyn Fn(&mut serde_json::Value)>)> = vec![
        (
            "mutation: an out-of-range part mark is flagged",
            Box::new(move |doc| set_element(doc, "a#2", "part", json!(5))),
        ),
        (
            "mutation: a ground mark moved off the first part is flagged",
            Box::new(move |doc| set_element(doc, "a#1", "part", json!(2))),
        ),
        (
            "mutation: a ground mark on a clone is flagged",
            Box::new(move |doc| set_element(doc, "a#2", "gr", json!(true))),
        ),
        (
            "mutation: a dropped order pair is flagged",
            Box::new(|doc| {
                let list = doc["lt"].as_array_mut().expect("array");
                let wanted = json!(["a#4", "c#4"]);
                list.retain(|pair| pair != &wanted);
            }),
        ),
    ];
    for (name, mutate) in mutations {
        let mut doc = json.clone();
        mutate(&mut doc);
        let text = serde_json::to_string(&doc).expect("value serializes");
        match crate::posetenc::ColoredPosetStructure::from_json(&text) {
            Err(e) => report.check(name, true, Some(e.to_string())),
            Ok(_) => report.check(name, false, Some("the validator stayed silent".to_string())),
        }
    }
}

fn cover_mutation_checks(report: &mut RunReport) {
    let a = mutation_amalgam();
    let anchor = amalgam_anchor(&a).expect("anchors");
    let zeta: BTreeMap<VertexId, usize> = BTreeMap::from([
        ("a".to_string(), 1),
        ("b".to_string(), 2),
        ("c".to_string(), 1),
        ("d".to_string(), 2),
    ]);
    let pieces = build_cover(&a, &zeta, 2).expect("covers build");
    let query = BTreeSet::from(["a".to_string(), "c".to_string()]);
    let y = query_witnesses(&a, &anchor, &query).expect("witnesses");
    report.check(
        "the mutation base cover serves the probe query",
        cover_serves(&a, &pieces, &y).expect("check"),
        None,
    );
    let dropped: Vec<_> = pieces
        .iter()
        .filter(|p| !y.is_subset(&p.members))
        .cloned()
        .collect();
    report.check(
        "mutation: removing the serving pieces defeats the cover",
        !cover_serves(&a, &dropped, &y).expect("check"),
        Some("the thinned cover still serves".to_string()),
    );
    let victim = y.iter().next().expect("nonempty witnesses").clone();
    let shrunk: Vec<_> = pieces
        .iter()
        .map(|p| {
            let mut piece = p.clone();
            piece.members.remove(&victim);
            piece
        })
        .collect();
    report.check(
        "mutation: shrinking piece members defeats the cover",
        !cover_serves(&a, &shrunk, &y).expect("check"),
        Some("the shrunken cover still serves".to_string()),
    );
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

/// Runs a named suite with `budget` instances per sub-suite. The known
/// names are `roundtrips` (cograph, bipartite, and amalgam round trips),
/// `anchors`, and `posetenc`.
pub fn run_suite(name: &str, seed: u64, budget: usize) -> Result<RunReport, SuiteError> {
    let start = Instant::now();
    let mut report = match name {
        "roundtrips" => {
            let mut r = RunReport::new("suite roundtrips");
            absorb(&mut r, "cograph", cograph_roundtrip_suite(seed, budget));
            absorb(&mut r, "bipartite", sob_roundtrip_suite(seed, budget));
            absorb(&mut r, "amalgam", amalgam_suite(seed, budget));
            r
        }
        "anchors" => anchor_suite(seed, budget),
        "posetenc" => posetenc_suite(seed, budget),
        other => return Err(SuiteError::UnknownSuite(other.to_string())),
    };
    report.set_seed(seed);
    report.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}
