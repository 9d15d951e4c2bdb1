//! A small first-order language over relational structures.
//!
//! [`parse_formula`] reads formulas in a plain text grammar (relation
//! atoms, equality, `!`, `&`, `|`, `->`, `exists`, `forall`), [`eval`]
//! decides them by naive domain enumeration, and [`satisfying_set`] is an
//! independent set-algebra evaluator used to cross-check `eval`.
//! [`apply_step`] runs atomic structure transformations (copying,
//! coloring, interpretation). [`builtin_formulas`] collects named formulas
//! that mirror the hand-coded constructions, so every semantic operation
//! with a formula counterpart can be checked against an evaluator that
//! knows nothing about trees: the adjacency formula behind model building,
//! the branch and order formulas of ordered bipartite decompositions,
//! reachability within distance six, and the relations of the poset
//! encoding and its inverse.

use crate::structure::{RelStructure, StructureError};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Errors raised by parsing, evaluation, and transduction steps.
#[derive(Debug, Error)]
pub enum FolangError {
    #[error("syntax error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{rel}` expects {expected} arguments, got {got}")]
    Arity {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid variable list: {0}")]
    BadVariables(String),
    #[error("invalid interpretation: {0}")]
    BadInterpretation(String),
    #[error("invalid step: {0}")]
    BadStep(String),
    #[error("signature clash: `{0}` is already present")]
    SignatureClash(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

/// First-order formula with named variables over a relational signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    /// Constant truth value.
    Bool(bool),
    /// Relation atom `R(x, ...)`.
    Atom { rel: String, args: Vec<String> },
    /// Variable equality `x = y`.
    Eq(String, String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

impl Formula {
    /// Variables with a free occurrence.
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::Bool(_) => BTreeSet::new(),
            Formula::Atom { args, .. } => args.iter().cloned().collect(),
            Formula::Eq(a, b) => BTreeSet::from([a.clone(), b.clone()]),
            Formula::Not(f) => f.free_vars(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                let mut out = l.free_vars();
                out.extend(r.free_vars());
                out
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                let mut out = f.free_vars();
                out.remove(v);
                out
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Formula::Exists(..) | Formula::Forall(..) => 0,
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(_) => 4,
            Formula::Bool(_) | Formula::Atom { .. } | Formula::Eq(..) => 5,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, out)
    }
}

fn write_prec(node: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = node.prec() < min;
    if wrap {
        write!(out, "(")?;
    }
    match node {
        Formula::Bool(b) => write!(out, "{b}")?,
        Formula::Atom { rel, args } => write!(out, "{rel}({})", args.join(", "))?,
        Formula::Eq(a, b) => write!(out, "{a} = {b}")?,
        Formula::Not(inner) => {
            if let Formula::Eq(a, b) = inner.as_ref() {
                write!(out, "{a} != {b}")?;
            } else {
                write!(out, "!")?;
                write_prec(inner, 4, out)?;
            }
        }
        Formula::And(l, r) => {
            write_prec(l, 3, out)?;
            write!(out, " & ")?;
            write_prec(r, 4, out)?;
        }
        Formula::Or(l, r) => {
            write_prec(l, 2, out)?;
            write!(out, " | ")?;
            write_prec(r, 3, out)?;
        }
        Formula::Implies(l, r) => {
            write_prec(l, 2, out)?;
            write!(out, " -> ")?;
            write_prec(r, 1, out)?;
        }
        Formula::Exists(..) | Formula::Forall(..) => {
            let keyword = if matches!(node, Formula::Exists(..)) {
                "exists"
            } else {
                "forall"
            };
            let mut vars = Vec::new();
            let mut body = node;
            loop {
                match (keyword, body) {
                    ("exists", Formula::Exists(v, inner)) => {
                        vars.push(v.clone());
                        body = inner;
                    }
                    ("forall", Formula::Forall(v, inner)) => {
                        vars.push(v.clone());
                        body = inner;
                    }
                    _ => break,
                }
            }
            write!(out, "{keyword} {} ", vars.join(", "))?;
            write_prec(body, 0, out)?;
        }
    }
    if wrap {
        write!(out, ")")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    LPar,
    RPar,
    Comma,
    AndOp,
    OrOp,
    Arrow,
    Bang,
    EqOp,
    NeqOp,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FolangError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                out.push((Tok::LPar, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RPar, i));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            '&' => {
                out.push((Tok::AndOp, i));
                i += 1;
            }
            '|' => {
                out.push((Tok::OrOp, i));
                i += 1;
            }
            '=' => {
                out.push((Tok::EqOp, i));
                i += 1;
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Tok::NeqOp, i));
                    i += 2;
                } else {
                    out.push((Tok::Bang, i));
                    i += 1;
                }
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    out.push((Tok::Arrow, i));
                    i += 2;
                } else {
                    return Err(FolangError::Parse {
                        pos: i,
                        msg: "expected `->`".into(),
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Name(text[start..i].to_string()), start));
            }
            _ => {
                return Err(FolangError::Parse {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    cursor: usize,
    sig: &'a BTreeMap<String, usize>,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.cursor).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.cursor).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, FolangError> {
        Err(FolangError::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FolangError> {
        if self.peek() == Some(&tok) {
            self.cursor += 1;
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn variable(&mut self) -> Result<String, FolangError> {
        match self.peek().cloned() {
            Some(Tok::Name(n)) => {
                if matches!(n.as_str(), "exists" | "forall" | "true" | "false") {
                    self.fail(format!("keyword `{n}` cannot name a variable"))
                } else {
                    self.cursor += 1;
                    Ok(n)
                }
            }
            _ => self.fail("expected a variable"),
        }
    }

    fn implies(&mut self) -> Result<Formula, FolangError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.cursor += 1;
            let rhs = self.implies()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, FolangError> {
        let mut f = self.conjunction()?;
        while self.peek() == Some(&Tok::OrOp) {
            self.cursor += 1;
            let rhs = self.conjunction()?;
            f = Formula::Or(Box::new(f), Box::new(rhs));
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula, FolangError> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::AndOp) {
            self.cursor += 1;
            let rhs = self.unary()?;
            f = Formula::And(Box::new(f), Box::new(rhs));
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, FolangError> {
        match self.peek().cloned() {
            Some(Tok::Bang) => {
                self.cursor += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LPar) => {
                self.cursor += 1;
                let f = self.implies()?;
                self.expect(Tok::RPar, "`)`")?;
                Ok(f)
            }
            Some(Tok::Name(n)) => match n.as_str() {
                "true" => {
                    self.cursor += 1;
                    Ok(Formula::Bool(true))
                }
                "false" => {
                    self.cursor += 1;
                    Ok(Formula::Bool(false))
                }
                "exists" | "forall" => {
                    self.cursor += 1;
                    let mut vars = vec![self.variable()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.cursor += 1;
                        vars.push(self.variable()?);
                    }
                    let mut body = self.implies()?;
                    for v in vars.into_iter().rev() {
                        body = if n == "exists" {
                            Formula::Exists(v, Box::new(body))
                        } else {
                            Formula::Forall(v, Box::new(body))
                        };
                    }
                    Ok(body)
                }
                _ => {
                    let name_pos = self.pos();
                    self.cursor += 1;
                    match self.peek() {
                        Some(Tok::LPar) => {
                            self.cursor += 1;
                            let mut args = vec![self.variable()?];
                            while self.peek() == Some(&Tok::Comma) {
                                self.cursor += 1;
                                args.push(self.variable()?);
                            }
                            self.expect(Tok::RPar, "`)`")?;
                            match self.sig.get(&n) {
                                None => Err(FolangError::Parse {
                                    pos: name_pos,
                                    msg: format!("unknown relation `{n}`"),
                                }),
                                Some(&arity) if arity != args.len() => Err(FolangError::Parse {
                                    pos: name_pos,
                                    msg: format!(
                                        "relation `{n}` expects {arity} arguments, got {}",
                                        args.len()
                                    ),
                                }),
                                Some(_) => Ok(Formula::Atom { rel: n, args }),
                            }
                        }
                        Some(Tok::EqOp) => {
                            self.cursor += 1;
                            Ok(Formula::Eq(n, self.variable()?))
                        }
                        Some(Tok::NeqOp) => {
                            self.cursor += 1;
                            Ok(Formula::Not(Box::new(Formula::Eq(n, self.variable()?))))
                        }
                        _ => self.fail(format!("expected `(`, `=`, or `!=` after `{n}`")),
                    }
                }
            },
            Some(_) => self.fail("expected a formula"),
            None => self.fail("unexpected end of input"),
        }
    }
}

/// Parses a formula in the documented grammar against a signature.
///
/// Grammar: atoms `R(x, y)`, equalities `x = y` and `x != y`, constants
/// `true`/`false`, negation `!`, conjunction `&`, disjunction `|`, and
/// implication `->` (right associative), with `!` binding tightest, then
/// `&`, then `|`, then `->`. Quantifiers are written `exists x, y body`
/// and `forall x body`; their bodies extend as far right as possible, to
/// the end of the enclosing parenthesized group. Atoms are checked against
/// the signature, so unknown relations and arity mismatches are rejected
/// with the offending offset.
pub fn parse_formula(
    text: &str,
    sig: &BTreeMap<String, usize>,
) -> Result<Formula, FolangError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        cursor: 0,
        sig,
        end: text.len(),
    };
    let f = parser.implies()?;
    if parser.cursor != parser.toks.len() {
        return parser.fail("unexpected trailing input");
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Decides a formula on a structure under a variable assignment, by plain
/// recursion with quantifiers enumerating the domain.
pub fn eval(
    s: &RelStructure,
    f: &Formula,
    env: &BTreeMap<String, String>,
) -> Result<bool, FolangError> {
    let mut stack: Vec<(String, String)> =
        env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    eval_on(s, f, &mut stack)
}

fn lookup<'a>(stack: &'a [(String, String)], name: &str) -> Option<&'a String> {
    stack.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
}

fn eval_on(
    s: &RelStructure,
    f: &Formula,
    stack: &mut Vec<(String, String)>,
) -> Result<bool, FolangError> {
    match f {
        Formula::Bool(b) => Ok(*b),
        Formula::Atom { rel, args } => {
            let arity = *s
                .signature()
                .get(rel)
                .ok_or_else(|| FolangError::UnknownRelation(rel.clone()))?;
            if args.len() != arity {
                return Err(FolangError::Arity {
                    rel: rel.clone(),
                    expected: arity,
                    got: args.len(),
                });
            }
            let mut tuple = Vec::with_capacity(args.len());
            for a in args {
                tuple.push(
                    lookup(stack, a)
                        .ok_or_else(|| FolangError::Unbound(a.clone()))?
                        .as_str(),
                );
            }
            Ok(s.has(rel, &tuple))
        }
        Formula::Eq(a, b) => {
            let va = lookup(stack, a).ok_or_else(|| FolangError::Unbound(a.clone()))?;
            let vb = lookup(stack, b).ok_or_else(|| FolangError::Unbound(b.clone()))?;
            Ok(va == vb)
        }
        Formula::Not(g) => Ok(!eval_on(s, g, stack)?),
        Formula::And(l, r) => Ok(eval_on(s, l, stack)? && eval_on(s, r, stack)?),
        Formula::Or(l, r) => Ok(eval_on(s, l, stack)? || eval_on(s, r, stack)?),
        Formula::Implies(l, r) => Ok(!eval_on(s, l, stack)? || eval_on(s, r, stack)?),
        Formula::Exists(v, body) => {
            for e in s.domain() {
                stack.push((v.clone(), e.clone()));
                let hit = eval_on(s, body, stack)?;
                stack.pop();
                if hit {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, body) => {
            for e in s.domain() {
                stack.push((v.clone(), e.clone()));
                let hit = eval_on(s, body, stack)?;
                stack.pop();
                if !hit {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// All assignments of `k` domain elements, in domain order.
fn all_rows(s: &RelStructure, k: usize) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::from([Vec::new()]);
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for row in &out {
            for d in s.domain() {
                let mut r = row.clone();
                r.push(d.clone());
                next.insert(r);
            }
        }
        out = next;
    }
    out
}

/// Reference evaluator: computes the full satisfying set of a formula over
/// an ordered variable list by set algebra (complements, intersections,
/// unions, and projections), with no shared code with [`eval`]. The
/// variables must be distinct and cover the free variables of the formula;
/// each returned row assigns them in order.
pub fn satisfying_set(
    s: &RelStructure,
    f: &Formula,
    vars: &[String],
) -> Result<BTreeSet<Vec<String>>, FolangError> {
    let distinct: BTreeSet<&String> = vars.iter().collect();
    if distinct.len() != vars.len() {
        return Err(FolangError::BadVariables("variables repeat".into()));
    }
    match f {
        Formula::Bool(true) => Ok(all_rows(s, vars.len())),
        Formula::Bool(false) => Ok(BTreeSet::new()),
        Formula::Atom { rel, args } => {
            let arity = *s
                .signature()
                .get(rel)
                .ok_or_else(|| FolangError::UnknownRelation(rel.clone()))?;
            if args.len() != arity {
                return Err(FolangError::Arity {
                    rel: rel.clone(),
                    expected: arity,
                    got: args.len(),
                });
            }
            let mut positions = Vec::with_capacity(args.len());
            for a in args {
                positions.push(
                    vars.iter()
                        .position(|w| w == a)
                        .ok_or_else(|| FolangError::Unbound(a.clone()))?,
                );
            }
            Ok(all_rows(s, vars.len())
                .into_iter()
                .filter(|row| {
                    let tuple: Vec<&str> = positions.iter().map(|p| row[*p].as_str()).collect();
                    s.has(rel, &tuple)
                })
                .collect())
        }
        Formula::Eq(a, b) => {
            let pa = vars
                .iter()
                .position(|w| w == a)
                .ok_or_else(|| FolangError::Unbound(a.clone()))?;
            let pb = vars
                .iter()
                .position(|w| w == b)
                .ok_or_else(|| FolangError::Unbound(b.clone()))?;
            Ok(all_rows(s, vars.len())
                .into_iter()
                .filter(|row| row[pa] == row[pb])
                .collect())
        }
        Formula::Not(g) => {
            let inner = satisfying_set(s, g, vars)?;
            Ok(all_rows(s, vars.len())
                .into_iter()
                .filter(|row| !inner.contains(row))
                .collect())
        }
        Formula::And(l, r) => {
            let a = satisfying_set(s, l, vars)?;
            let b = satisfying_set(s, r, vars)?;
            Ok(a.intersection(&b).cloned().collect())
        }
        Formula::Or(l, r) => {
            let a = satisfying_set(s, l, vars)?;
            let b = satisfying_set(s, r, vars)?;
            Ok(a.union(&b).cloned().collect())
        }
        Formula::Implies(l, r) => {
            let a = satisfying_set(s, l, vars)?;
            let b = satisfying_set(s, r, vars)?;
            Ok(all_rows(s, vars.len())
                .into_iter()
                .filter(|row| !a.contains(row) || b.contains(row))
                .collect())
        }
        Formula::Exists(v, body) => {
            let reduced: Vec<String> = vars.iter().filter(|w| *w != v).cloned().collect();
            let mut inner_vars = reduced.clone();
            inner_vars.push(v.clone());
            let inner = satisfying_set(s, body, &inner_vars)?;
            let projected: BTreeSet<Vec<String>> = inner
                .into_iter()
                .map(|mut row| {
                    row.pop();
                    row
                })
                .collect();
            if reduced.len() == vars.len() {
                return Ok(projected);
            }
            let k = vars.iter().position(|w| w == v).expect("v occurs in vars");
            let mut out = BTreeSet::new();
            for row in &projected {
                for d in s.domain() {
                    let mut r = row.clone();
                    r.insert(k, d.clone());
                    out.insert(r);
                }
            }
            Ok(out)
        }
        Formula::Forall(v, body) => {
            let rewritten = Formula::Not(Box::new(Formula::Exists(
                v.clone(),
                Box::new(Formula::Not(body.clone())),
            )));
            satisfying_set(s, &rewritten, vars)
        }
    }
}

// ---------------------------------------------------------------------------
// Transduction steps
// ---------------------------------------------------------------------------

/// A first-order interpretation: a domain formula with one free variable
/// and one formula per output relation, evaluated over the source
/// structure with arguments drawn from the new domain.
#[derive(Clone, Debug)]
pub struct Interpretation {
    domain_var: String,
    domain: Formula,
    relations: BTreeMap<String, (Vec<String>, Formula)>,
}

impl Interpretation {
    /// Validates that every formula only uses its declared variables.
    pub fn new(
        domain_var: &str,
        domain: Formula,
        relations: BTreeMap<String, (Vec<String>, Formula)>,
    ) -> Result<Interpretation, FolangError> {
        let allowed = BTreeSet::from([domain_var.to_string()]);
        if !domain.free_vars().is_subset(&allowed) {
            return Err(FolangError::BadInterpretation(format!(
                "the domain formula may only use `{domain_var}`"
            )));
        }
        for (rel, (vars, f)) in &relations {
            if vars.is_empty() {
                return Err(FolangError::BadInterpretation(format!(
                    "relation `{rel}` needs at least one argument"
                )));
            }
            let distinct: BTreeSet<&String> = vars.iter().collect();
            if distinct.len() != vars.len() {
                return Err(FolangError::BadInterpretation(format!(
                    "the arguments of `{rel}` repeat"
                )));
            }
            let declared: BTreeSet<String> = vars.iter().cloned().collect();
            if !f.free_vars().is_subset(&declared) {
                return Err(FolangError::BadInterpretation(format!(
                    "the formula for `{rel}` uses variables outside its argument list"
                )));
            }
        }
        Ok(Interpretation {
            domain_var: domain_var.to_string(),
            domain,
            relations,
        })
    }

    pub fn domain_var(&self) -> &str {
        &self.domain_var
    }

    pub fn domain(&self) -> &Formula {
        &self.domain
    }

    pub fn relations(&self) -> &BTreeMap<String, (Vec<String>, Formula)> {
        &self.relations
    }
}

/// One atomic structure transformation.
#[derive(Clone, Debug)]
pub enum TransductionStep {
    /// Replaces the structure by `k` disjoint copies of itself: relations
    /// hold within each copy, the binary relation `F` links distinct
    /// clones of the same element, and `M1`..`Mk` mark the copies.
    Copy(usize),
    /// Adds explicitly valued unary predicates.
    Color(BTreeMap<String, BTreeSet<String>>),
    /// Replaces the structure by the image of an interpretation.
    Interpret(Interpretation),
}

/// Name of the `i`-th copy of an element, matching the clone ids of the
/// poset encoder so pipelines can be compared against it directly.
pub fn copy_name(e: &str, i: usize) -> String {
    format!("{e}#{i}")
}

/// Applies one transduction step to a structure.
pub fn apply_step(s: &RelStructure, step: &TransductionStep) -> Result<RelStructure, FolangError> {
    match step {
        TransductionStep::Copy(k) => {
            let k = *k;
            if k == 0 {
                return Err(FolangError::BadStep("the copy count must be at least one".into()));
            }
            let mut sig = s.signature().clone();
            for name in std::iter::once("F".to_string()).chain((1..=k).map(|i| format!("M{i}"))) {
                if sig.contains_key(&name) {
                    return Err(FolangError::SignatureClash(name));
                }
                let arity = if name == "F" { 2 } else { 1 };
                sig.insert(name, arity);
            }
            let mut out = RelStructure::new(sig);
            for e in s.domain() {
                for i in 1..=k {
                    out.add_element(&copy_name(e, i));
                }
            }
            for (rel, _) in s.signature() {
                for tuple in s.rel(rel) {
                    for i in 1..=k {
                        let mapped: Vec<String> =
                            tuple.iter().map(|e| copy_name(e, i)).collect();
                        out.add_tuple(rel, mapped)?;
                    }
                }
            }
            for e in s.domain() {
                for i in 1..=k {
                    out.add_tuple(&format!("M{i}"), vec![copy_name(e, i)])?;
                    for j in 1..=k {
                        if i != j {
                            out.add_tuple("F", vec![copy_name(e, i), copy_name(e, j)])?;
                        }
                    }
                }
            }
            Ok(out)
        }
        TransductionStep::Color(colors) => {
            let mut sig = s.signature().clone();
            for name in colors.keys() {
                if sig.contains_key(name) {
                    return Err(FolangError::SignatureClash(name.clone()));
                }
                sig.insert(name.clone(), 1);
            }
            let mut out = RelStructure::new(sig);
            for e in s.domain() {
                out.add_element(e);
            }
            for (rel, _) in s.signature() {
                for tuple in s.rel(rel) {
                    out.add_tuple(rel, tuple)?;
                }
            }
            for (name, elems) in colors {
                for e in elems {
                    if !s.domain().contains(e) {
                        return Err(FolangError::UnknownElement(e.clone()));
                    }
                    out.add_tuple(name, vec![e.clone()])?;
                }
            }
            Ok(out)
        }
        TransductionStep::Interpret(interp) => {
            let sig: BTreeMap<String, usize> = interp
                .relations()
                .iter()
                .map(|(rel, (vars, _))| (rel.clone(), vars.len()))
                .collect();
            let mut out = RelStructure::new(sig);
            let mut env = BTreeMap::new();
            for e in s.domain() {
                env.insert(interp.domain_var().to_string(), e.clone());
                if eval(s, interp.domain(), &env)? {
                    out.add_element(e);
                }
            }
            let kept: BTreeSet<String> = out.domain().clone();
            for (rel, (vars, f)) in interp.relations() {
                for tuple in rows_over(&kept, vars.len()) {
                    let env: BTreeMap<String, String> = vars
                        .iter()
                        .cloned()
                        .zip(tuple.iter().cloned())
                        .collect();
                    if eval(s, f, &env)? {
                        out.add_tuple(rel, tuple)?;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// All tuples of `k` elements from a set, in order.
fn rows_over(domain: &BTreeSet<String>, k: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for row in &out {
            for d in domain {
                let mut r = row.clone();
                r.push(d.clone());
                next.push(r);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Builtin formulas
// ---------------------------------------------------------------------------

/// A parsed formula with its name, argument order, and home signature.
#[derive(Clone, Debug)]
pub struct NamedFormula {
    pub name: String,
    /// Free variables in the documented argument order.
    pub args: Vec<String>,
    /// Signature the formula was checked against.
    pub signature: BTreeMap<String, usize>,
    pub formula: Formula,
    /// One-line description for listings.
    pub about: String,
}

/// Signature of the relational encoding of a model with `n` leaf colors,
/// matching the model's own logic encoding.
pub fn model_signature(n: usize) -> BTreeMap<String, usize> {
    let mut sig = BTreeMap::from([
        ("Lf".to_string(), 1),
        ("NA".to_string(), 1),
        ("NC".to_string(), 1),
        ("Inf".to_string(), 3),
        ("Lt".to_string(), 2),
    ]);
    for i in 1..=n {
        sig.insert(format!("Gam{i}"), 1);
        for j in 1..=n {
            sig.insert(format!("Kap{i}_{j}"), 1);
        }
    }
    sig
}

/// Signature of a two-sided graph with branch indices: adjacency `E`,
/// colors `C1`/`C2`, and index marks `K1`/`K2`/`K3` cycling through the
/// branches of an ordered decomposition.
pub fn indexed_sob_signature() -> BTreeMap<String, usize> {
    BTreeMap::from([
        ("E".to_string(), 2),
        ("C1".to_string(), 1),
        ("C2".to_string(), 1),
        ("K1".to_string(), 1),
        ("K2".to_string(), 1),
        ("K3".to_string(), 1),
    ])
}

/// Signature of a plain graph.
pub fn graph_signature() -> BTreeMap<String, usize> {
    BTreeMap::from([("E".to_string(), 2)])
}

/// Signature of a coupling: a strict order, a symmetric adjacency, and a
/// ground mark.
pub fn coupling_signature() -> BTreeMap<String, usize> {
    BTreeMap::from([
        ("Lt".to_string(), 2),
        ("E".to_string(), 2),
        ("Gr".to_string(), 1),
    ])
}

/// Signature of a coupling after `Copy(4)`: the coupling relations plus
/// the clone relation and the four copy marks.
pub fn copied_coupling_signature() -> BTreeMap<String, usize> {
    let mut sig = coupling_signature();
    sig.insert("F".to_string(), 2);
    for i in 1..=4 {
        sig.insert(format!("M{i}"), 1);
    }
    sig
}

/// Signature of an encoded poset: the strict order, the ground mark, and
/// the four part marks.
pub fn poset_code_signature() -> BTreeMap<String, usize> {
    let mut sig = BTreeMap::from([("Lt".to_string(), 2), ("Gr".to_string(), 1)]);
    for i in 1..=4 {
        sig.insert(format!("P{i}"), 1);
    }
    sig
}

/// Directed adjacency read off a model encoding: the pair is stored at the
/// infimum, unordered nodes ask for distinct arguments, ordered nodes ask
/// for the order, and the node's table must accept the color pair.
fn lambda_text(n: usize, a: &str, b: &str, w: &str) -> String {
    let table = if n == 0 {
        "false".to_string()
    } else {
        (1..=n)
            .flat_map(|i| {
                (1..=n).map(move |j| format!("(Gam{i}({a}) & Gam{j}({b}) & Kap{i}_{j}({w}))"))
            })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    format!(
        "(exists {w} (Inf({a}, {b}, {w}) & ((NA({w}) & !({a} = {b})) | (NC({w}) & Lt({a}, {b}))) & ({table})))"
    )
}

fn named(
    name: &str,
    args: &[&str],
    signature: BTreeMap<String, usize>,
    text: &str,
    about: &str,
) -> NamedFormula {
    let formula = parse_formula(text, &signature).expect("builtin formulas parse");
    NamedFormula {
        name: name.to_string(),
        args: args.iter().map(|a| a.to_string()).collect(),
        signature,
        formula,
        about: about.to_string(),
    }
}

/// The one-sided adjacency formula over a model encoding with `n` colors.
pub fn lambda_formula(n: usize) -> NamedFormula {
    named(
        &format!("lambda{n}"),
        &["x", "y"],
        model_signature(n),
        &lambda_text(n, "x", "y", "w"),
        "directed adjacency stored at the infimum of a model encoding",
    )
}

/// The symmetric edge formula over a model encoding with `n` colors: two
/// leaves are adjacent when either orientation of the adjacency holds.
pub fn edge_formula(n: usize) -> NamedFormula {
    let text = format!(
        "Lf(x) & Lf(y) & ({} | {})",
        lambda_text(n, "x", "y", "w"),
        lambda_text(n, "y", "x", "w")
    );
    named(
        &format!("rho_edge{n}"),
        &["x", "y"],
        model_signature(n),
        &text,
        "graph adjacency of two leaves in a model encoding",
    )
}

fn k_differ(a: &str, b: &str) -> String {
    format!(
        "((K1({a}) & (K2({b}) | K3({b}))) | (K2({a}) & (K1({b}) | K3({b}))) | (K3({a}) & (K1({b}) | K2({b}))))"
    )
}

fn k_same(a: &str, b: &str) -> String {
    format!("((K1({a}) & K1({b})) | (K2({a}) & K2({b})) | (K3({a}) & K3({b})))")
}

fn chi1_text(x: &str, y: &str, z: &str) -> String {
    format!(
        "(exists {z} ({kd} & E({x}, {z}) & !E({z}, {y})))",
        kd = k_differ(x, z)
    )
}

fn chi2_text(x: &str, y: &str, z1: &str, z2: &str) -> String {
    format!(
        "(exists {z1}, {z2} ({kd1} & {kd2} & E({x}, {z1}) & !E({z1}, {z2}) & E({z2}, {y})))",
        kd1 = k_differ(x, z1),
        kd2 = k_differ(x, z2)
    )
}

fn chi3_text(x: &str, y: &str, z1: &str, z2: &str) -> String {
    format!(
        "(C1({x}) & C2({y}) & (exists {z1}, {z2} (C2({z1}) & C1({z2}) & {kd1} & {kd2} & !E({x}, {z1}) & E({z2}, {z1}) & !E({z2}, {y}))))",
        kd1 = k_differ(x, z1),
        kd2 = k_differ(x, z2)
    )
}

fn cover_text(a: &str, b: &str) -> String {
    format!("(Lt({a}, {b}) & !(exists c (Lt({a}, c) & Lt(c, {b}))))")
}

/// Named formula library.
///
/// Over model encodings: `lambda1`..`lambda3` and `rho_edge1`..`rho_edge3`
/// reproduce model building. Over indexed two-sided graphs: `chi1`,
/// `chi2`, and `chi3` separate branches, `sim_branch` is the same-branch
/// relation, and `order_before` is the branch order read off the
/// adjacency. Over plain
/// graphs: `sim6` is reachability within distance six. Over copied
/// couplings and encoded posets: `rho_gr_enc`/`rho_lt_enc` generate the
/// poset encoding and `rho_lt_dec`/`rho_e_dec` read it back through cover
/// pairs.
pub fn builtin_formulas() -> Vec<NamedFormula> {
    let mut out = Vec::new();
    for n in 1..=3 {
        out.push(lambda_formula(n));
        out.push(edge_formula(n));
    }
    out.push(named(
        "chi1",
        &["x", "y"],
        indexed_sob_signature(),
        &chi1_text("x", "y", "z"),
        "a branch lies strictly between two same-colored vertices",
    ));
    out.push(named(
        "chi2",
        &["x", "y"],
        indexed_sob_signature(),
        &chi2_text("x", "y", "z1", "z2"),
        "two stepping branches separate two opposite-colored vertices",
    ));
    out.push(named(
        "chi3",
        &["x", "y"],
        indexed_sob_signature(),
        &chi3_text("x", "y", "z1", "z2"),
        "a non-neighbor chain shows the second vertex's branch strictly precedes the first's",
    ));
    out.push(named(
        "sim_branch",
        &["x", "y"],
        indexed_sob_signature(),
        &format!(
            "{ks} & ((((C1(x) & C1(y)) | (C2(x) & C2(y))) & !{c1xy} & !{c1yx}) | (((C1(x) & C2(y)) | (C2(x) & C1(y))) & !{c2xy} & !{c2yx} & !{c3xy} & !{c3yx}))",
            ks = k_same("x", "y"),
            c1xy = chi1_text("x", "y", "z"),
            c1yx = chi1_text("y", "x", "z"),
            c2xy = chi2_text("x", "y", "z1", "z2"),
            c2yx = chi2_text("y", "x", "z1", "z2"),
            c3xy = chi3_text("x", "y", "z1", "z2"),
            c3yx = chi3_text("y", "x", "z1", "z2"),
        ),
        "two vertices sit in the same branch of the ordered decomposition",
    ));
    out.push(named(
        "order_before",
        &["x", "y"],
        indexed_sob_signature(),
        &format!(
            "C1(x) & C2(y) & (({kd} & E(x, y)) | ({ks} & {c2}))",
            kd = k_differ("x", "y"),
            ks = k_same("x", "y"),
            c2 = chi2_text("x", "y", "z1", "z2"),
        ),
        "the first vertex's branch precedes the second's",
    ));
    let mut hops = vec!["x = y".to_string(), "E(x, y)".to_string()];
    for m in 1..=5usize {
        let vars: Vec<String> = (1..=m).map(|i| format!("z{i}")).collect();
        let mut chain = vec!["E(x, z1)".to_string()];
        for i in 1..m {
            chain.push(format!("E(z{i}, z{})", i + 1));
        }
        chain.push(format!("E(z{m}, y)"));
        hops.push(format!("(exists {} ({}))", vars.join(", "), chain.join(" & ")));
    }
    out.push(named(
        "sim6",
        &["x", "y"],
        graph_signature(),
        &hops.join(" | "),
        "the two vertices are at distance at most six",
    ));
    out.push(named(
        "rho_gr_enc",
        &["u"],
        copied_coupling_signature(),
        "M1(u) & Gr(u)",
        "ground mark of the poset encoding: first clones of ground elements",
    ));
    out.push(named(
        "rho_lt_enc",
        &["u", "v"],
        copied_coupling_signature(),
        "(M4(u) & M4(v) & Lt(u, v)) | (F(u, v) & M1(v) & (M2(u) | M3(u) | M4(u))) | (M2(u) & (M3(v) | M1(v)) & exists w (M2(w) & F(v, w) & E(u, w)))",
        "order generators of the poset encoding over four copies",
    ));
    out.push(named(
        "rho_lt_dec",
        &["u", "v"],
        poset_code_signature(),
        &format!(
            "Gr(u) & Gr(v) & (exists a, b (P4(a) & P4(b) & {ca} & {cb} & Lt(a, b)))",
            ca = cover_text("a", "u"),
            cb = cover_text("b", "v"),
        ),
        "decoded order: fourth-part covers below the two ground elements are ordered",
    ));
    out.push(named(
        "rho_e_dec",
        &["u", "v"],
        poset_code_signature(),
        &format!(
            "Gr(u) & Gr(v) & (exists a, b (P2(a) & P3(b) & {ca} & {cb} & Lt(a, b)))",
            ca = cover_text("a", "u"),
            cb = cover_text("b", "v"),
        ),
        "decoded adjacency: a second-part cover below one end sits under a third-part cover below the other",
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicotree::{bicotree_leaf, bicotree_node, o_partition, BicotreeType};
    use crate::cotree::{cotree_leaf, cotree_node, CotreeType};
    use crate::posetenc::{decode_poset, encode_poset, ground_structure};
    use crate::structure::{BipartiteGraph, Graph, Poset};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn atom(rel: &str, args: &[&str]) -> Formula {
        Formula::Atom {
            rel: rel.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    fn ev(s: &RelStructure, f: &Formula, binds: &[(&str, &str)]) -> bool {
        let env: BTreeMap<String, String> = binds
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        eval(s, f, &env).expect("evaluates")
    }

    fn builtin(name: &str) -> NamedFormula {
        builtin_formulas()
            .into_iter()
            .find(|f| f.name == name)
            .expect("library contains the formula")
    }

    fn path3() -> RelStructure {
        let mut s = RelStructure::new(graph_signature());
        for e in ["a", "b", "c"] {
            s.add_element(e);
        }
        for (u, v) in [("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")] {
            s.add_tuple("E", vec![u.to_string(), v.to_string()]).expect("valid");
        }
        s
    }

    fn graph_structure(g: &Graph) -> RelStructure {
        let mut s = RelStructure::new(graph_signature());
        for v in g.vertices() {
            s.add_element(v);
        }
        for (u, v) in g.edges() {
            s.add_tuple("E", vec![u.clone(), v.clone()]).expect("valid");
            s.add_tuple("E", vec![v.clone(), u.clone()]).expect("valid");
        }
        s
    }

    #[test]
    fn parses_conjunctions_of_atoms() {
        let sig = graph_signature();
        let f = parse_formula("E(x,y) & !E(y,z)", &sig).expect("parses");
        let expected = Formula::And(
            Box::new(atom("E", &["x", "y"])),
            Box::new(Formula::Not(Box::new(atom("E", &["y", "z"])))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn quantifier_bodies_extend_to_the_right() {
        let sig = graph_signature();
        let spaced = parse_formula("exists z E(x,z) & !E(z,y)", &sig).expect("parses");
        let grouped = parse_formula("exists z (E(x,z) & !E(z,y))", &sig).expect("parses");
        assert_eq!(spaced, grouped);
        let listed = parse_formula("exists u, v E(u,v)", &sig).expect("parses");
        let nested = parse_formula("exists u (exists v E(u,v))", &sig).expect("parses");
        assert_eq!(listed, nested);
    }

    #[test]
    fn connective_precedence_is_not_or_and_implies() {
        let sig = BTreeMap::from([
            ("P".to_string(), 1),
            ("Q".to_string(), 1),
            ("R".to_string(), 1),
            ("S".to_string(), 1),
        ]);
        let f = parse_formula("P(x) | Q(x) & !R(x) -> S(x)", &sig).expect("parses");
        let expected = Formula::Implies(
            Box::new(Formula::Or(
                Box::new(atom("P", &["x"])),
                Box::new(Formula::And(
                    Box::new(atom("Q", &["x"])),
                    Box::new(Formula::Not(Box::new(atom("R", &["x"])))),
                )),
            )),
            Box::new(atom("S", &["x"])),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn syntax_errors_carry_their_offset() {
        let sig = graph_signature();
        match parse_formula("E(x", &sig) {
            Err(FolangError::Parse { pos, .. }) => assert_eq!(pos, 3),
            other => panic!("expected a syntax error, got {other:?}"),
        }
        match parse_formula("E(x,y) & Q(x)", &sig) {
            Err(FolangError::Parse { pos, msg }) => {
                assert_eq!(pos, 9);
                assert!(msg.contains("unknown relation"));
            }
            other => panic!("expected an unknown relation error, got {other:?}"),
        }
        match parse_formula("E(x)", &sig) {
            Err(FolangError::Parse { pos, msg }) => {
                assert_eq!(pos, 0);
                assert!(msg.contains("expects 2 arguments"));
            }
            other => panic!("expected an arity error, got {other:?}"),
        }
        assert!(matches!(
            parse_formula("E(x,y) y", &sig),
            Err(FolangError::Parse { pos: 7, .. })
        ));
    }

    #[test]
    fn builtins_print_and_reparse_unchanged() {
        for nf in builtin_formulas() {
            let text = nf.formula.to_string();
            let back = parse_formula(&text, &nf.signature).expect("printed form parses");
            assert_eq!(back, nf.formula, "round trip of `{}`", nf.name);
        }
    }

    #[test]
    fn builtins_declare_their_free_variables() {
        let library = builtin_formulas();
        assert!(library.len() >= 6);
        let names: BTreeSet<&String> = library.iter().map(|f| &f.name).collect();
        assert_eq!(names.len(), library.len(), "names are unique");
        for nf in &library {
            let declared: BTreeSet<String> = nf.args.iter().cloned().collect();
            assert_eq!(nf.formula.free_vars(), declared, "free variables of `{}`", nf.name);
        }
    }

    #[test]
    fn equality_holds_under_matching_bindings() {
        let mut s = RelStructure::new(BTreeMap::new());
        s.add_element("only");
        let f = parse_formula("x = x", &BTreeMap::new()).expect("parses");
        assert!(ev(&s, &f, &[("x", "only")]));
        let g = parse_formula("x = y", &BTreeMap::new()).expect("parses");
        assert!(matches!(
            eval(&s, &g, &BTreeMap::from([("x".to_string(), "only".to_string())])),
            Err(FolangError::Unbound(v)) if v == "y"
        ));
    }

    #[test]
    fn quantifiers_enumerate_the_domain() {
        let s = path3();
        let sig = graph_signature();
        let everyone = parse_formula("forall x exists y E(x, y)", &sig).expect("parses");
        assert!(ev(&s, &everyone, &[]));
        let isolated = parse_formula("exists x forall y !E(x, y)", &sig).expect("parses");
        assert!(!ev(&s, &isolated, &[]));
        let triangle = parse_formula(
            "exists x, y, z (E(x, y) & E(y, z) & E(z, x))",
            &sig,
        )
        .expect("parses");
        assert!(!ev(&s, &triangle, &[]));
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

    fn random_structure(rng: &mut ChaCha8Rng) -> RelStructure {
        let sig = BTreeMap::from([("E".to_string(), 2), ("P".to_string(), 1)]);
        let mut s = RelStructure::new(sig);
        let size = rng.gen_range(1..=4);
        let names: Vec<String> = (0..size).map(|i| format!("e{i}")).collect();
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
        s
    }

    #[test]
    fn eval_matches_the_reference_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(60_221);
        for _ in 0..300 {
            let s = random_structure(&mut rng);
            let depth = rng.gen_range(0..=2);
            let f = random_formula(&mut rng, depth);
            let vars: Vec<String> = f.free_vars().into_iter().collect();
            let sat = satisfying_set(&s, &f, &vars).expect("reference evaluates");
            for row in rows_over(s.domain(), vars.len()) {
                let env: BTreeMap<String, String> =
                    vars.iter().cloned().zip(row.iter().cloned()).collect();
                let direct = eval(&s, &f, &env).expect("evaluates");
                assert_eq!(
                    direct,
                    sat.contains(&row),
                    "evaluators disagree on {f} at {row:?}"
                );
            }
        }
    }

    #[test]
    fn copying_builds_disjoint_marked_clones() {
        let mut single = RelStructure::new(graph_signature());
        single.add_element("a");
        let copied = apply_step(&single, &TransductionStep::Copy(2)).expect("copies");
        assert_eq!(
            copied.domain(),
            &BTreeSet::from(["a#1".to_string(), "a#2".to_string()])
        );
        assert!(copied.has("F", &["a#1", "a#2"]));
        assert!(copied.has("F", &["a#2", "a#1"]));
        assert!(copied.has("M1", &["a#1"]));
        assert!(copied.has("M2", &["a#2"]));
        assert!(copied.rel("E").is_empty());

        let pair = graph_structure(&{
            let mut g = Graph::new();
            g.add_vertex("a");
            g.add_vertex("b");
            g.add_edge("a", "b").expect("vertices added");
            g
        });
        let copied = apply_step(&pair, &TransductionStep::Copy(2)).expect("copies");
        assert!(copied.has("E", &["a#1", "b#1"]));
        assert!(copied.has("E", &["a#2", "b#2"]));
        assert!(!copied.has("E", &["a#1", "b#2"]), "copies stay disjoint");
        assert!(!copied.has("F", &["a#1", "b#2"]), "only clones are linked");
    }

    #[test]
    fn coloring_adds_explicit_unaries_without_clashes() {
        let s = path3();
        let colored = apply_step(
            &s,
            &TransductionStep::Color(BTreeMap::from([(
                "Mark".to_string(),
                BTreeSet::from(["a".to_string()]),
            )])),
        )
        .expect("colors");
        assert!(colored.has("Mark", &["a"]));
        assert!(!colored.has("Mark", &["b"]));
        assert!(matches!(
            apply_step(
                &s,
                &TransductionStep::Color(BTreeMap::from([(
                    "E".to_string(),
                    BTreeSet::new()
                )]))
            ),
            Err(FolangError::SignatureClash(n)) if n == "E"
        ));
        assert!(matches!(
            apply_step(
                &s,
                &TransductionStep::Color(BTreeMap::from([(
                    "Mark".to_string(),
                    BTreeSet::from(["ghost".to_string()])
                )]))
            ),
            Err(FolangError::UnknownElement(e)) if e == "ghost"
        ));
    }

    #[test]
    fn interpreting_with_a_false_domain_empties_the_structure() {
        let s = path3();
        let interp = Interpretation::new(
            "x",
            Formula::Bool(false),
            BTreeMap::from([(
                "E".to_string(),
                (
                    vec!["x".to_string(), "y".to_string()],
                    atom("E", &["x", "y"]),
                ),
            )]),
        )
        .expect("valid");
        let out = apply_step(&s, &TransductionStep::Interpret(interp)).expect("interprets");
        assert!(out.domain().is_empty());
        assert!(out.rel("E").is_empty());
    }

    #[test]
    fn interpretations_validate_their_formulas() {
        assert!(matches!(
            Interpretation::new("x", atom("P", &["y"]), BTreeMap::new()),
            Err(FolangError::BadInterpretation(_))
        ));
        let stray = BTreeMap::from([(
            "R".to_string(),
            (vec!["x".to_string()], atom("E", &["x", "y"])),
        )]);
        assert!(matches!(
            Interpretation::new("x", Formula::Bool(true), stray),
            Err(FolangError::BadInterpretation(_))
        ));
        let repeated = BTreeMap::from([(
            "R".to_string(),
            (
                vec!["x".to_string(), "x".to_string()],
                Formula::Bool(true),
            ),
        )]);
        assert!(matches!(
            Interpretation::new("x", Formula::Bool(true), repeated),
            Err(FolangError::BadInterpretation(_))
        ));
    }

    #[test]
    fn the_copy_pipeline_reproduces_the_poset_encoding_generators() {
        let s = ground_structure(&["a", "b", "c"], &[("a", "b")], &[("b", "c")]);
        let copied = apply_step(&s, &TransductionStep::Copy(4)).expect("copies");
        assert_eq!(copied.signature(), &copied_coupling_signature());
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
        .expect("valid");
        let out = apply_step(&copied, &TransductionStep::Interpret(interp)).expect("interprets");
        let mut expected: BTreeSet<Vec<String>> = BTreeSet::new();
        for e in ["a", "b", "c"] {
            for i in 2..=4 {
                expected.insert(vec![copy_name(e, i), copy_name(e, 1)]);
            }
        }
        expected.insert(vec![copy_name("a", 4), copy_name("b", 4)]);
        for (u, v) in [("b", "c"), ("c", "b")] {
            expected.insert(vec![copy_name(u, 2), copy_name(v, 3)]);
            expected.insert(vec![copy_name(u, 2), copy_name(v, 1)]);
        }
        assert_eq!(out.rel("Lt"), expected);
        assert_eq!(
            out.unary_set("Gr"),
            BTreeSet::from(["a#1".to_string(), "b#1".to_string(), "c#1".to_string()])
        );
        let closure = Poset::from_generators(
            out.domain().clone(),
            &expected
                .into_iter()
                .map(|t| (t[0].clone(), t[1].clone()))
                .collect(),
        )
        .expect("acyclic");
        let encoded = encode_poset(&s).expect("encodes");
        assert_eq!(closure.pairs(), encoded.poset().pairs());
    }

    #[test]
    fn decode_formulas_read_the_encoding_back() {
        let s = ground_structure(
            &["a", "b", "c", "d"],
            &[("a", "b")],
            &[("b", "c"), ("c", "d")],
        );
        let encoded = encode_poset(&s).expect("encodes");
        let view = encoded.logic_structure();
        let pair = vec!["u".to_string(), "v".to_string()];
        let interp = Interpretation::new(
            "u",
            parse_formula("Gr(u)", &poset_code_signature()).expect("parses"),
            BTreeMap::from([
                (
                    "Gr".to_string(),
                    (
                        vec!["u".to_string()],
                        parse_formula("Gr(u)", &poset_code_signature()).expect("parses"),
                    ),
                ),
                ("Lt".to_string(), (pair.clone(), builtin("rho_lt_dec").formula)),
                ("E".to_string(), (pair, builtin("rho_e_dec").formula)),
            ]),
        )
        .expect("valid");
        let out = apply_step(&view, &TransductionStep::Interpret(interp)).expect("interprets");
        let decoded = decode_poset(&encoded);
        let lift = |t: &Vec<String>| -> Vec<String> {
            t.iter().map(|e| copy_name(e, 1)).collect()
        };
        assert_eq!(
            out.domain(),
            &decoded.domain().iter().map(|e| copy_name(e, 1)).collect()
        );
        for rel in ["Lt", "E", "Gr"] {
            let expected: BTreeSet<Vec<String>> = decoded.rel(rel).iter().map(lift).collect();
            assert_eq!(out.rel(rel), expected, "decoded `{rel}` matches");
        }
    }

    #[test]
    fn edge_formulas_match_model_building() {
        let cotree = cotree_node(
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
        );
        let bicotree = bicotree_node(
            BicotreeType::O,
            (1..=3)
                .map(|i| {
                    bicotree_node(
                        BicotreeType::B,
                        vec![
                            bicotree_leaf(&format!("x{i}"), 1),
                            bicotree_leaf(&format!("y{i}"), 2),
                        ],
                    )
                })
                .collect(),
        );
        let cases = [
            (cotree.model().clone(), edge_formula(1)),
            (bicotree.model().clone(), edge_formula(2)),
        ];
        for (model, nf) in cases {
            let s = model.logic_structure();
            assert_eq!(
                s.signature(),
                &nf.signature,
                "the model encoding and the formula share a signature"
            );
            let graph = model.build().expect("builds");
            for u in s.domain() {
                for v in s.domain() {
                    let formula_edge = ev(&s, &nf.formula, &[("x", u), ("y", v)]);
                    assert_eq!(
                        formula_edge,
                        graph.has_edge(u, v),
                        "edge `{u}` - `{v}`"
                    );
                }
            }
        }
    }

    /// Half graph over `k` two-leaf branches: `xi` is adjacent to `yj`
    /// exactly when `i <= j`, so the ordered decomposition has the blocks
    /// `{x1, y1}, ..., {xk, yk}` in index order.
    fn half_graph_indexed(k: usize) -> (RelStructure, BTreeMap<String, usize>) {
        let mut g = Graph::new();
        let mut sides = BTreeMap::new();
        for i in 1..=k {
            g.add_vertex(&format!("x{i}"));
            g.add_vertex(&format!("y{i}"));
            sides.insert(format!("x{i}"), 1);
            sides.insert(format!("y{i}"), 2);
        }
        for i in 1..=k {
            for j in i..=k {
                g.add_edge(&format!("x{i}"), &format!("y{j}")).expect("vertices added");
            }
        }
        let bp = BipartiteGraph::new(g.clone(), sides.clone()).expect("two-sided");
        let blocks = o_partition(&bp).expect("ordered decomposition");
        let mut block_of = BTreeMap::new();
        let mut s = RelStructure::new(indexed_sob_signature());
        for v in g.vertices() {
            s.add_element(v);
        }
        for (pos, block) in blocks.iter().enumerate() {
            let index = 1 + (pos + 1) % 3;
            for v in block {
                block_of.insert(v.clone(), pos + 1);
                s.add_tuple(&format!("K{index}"), vec![v.clone()]).expect("valid");
            }
        }
        for (v, side) in &sides {
            s.add_tuple(&format!("C{side}"), vec![v.clone()]).expect("valid");
        }
        for (u, v) in g.edges() {
            s.add_tuple("E", vec![u.clone(), v.clone()]).expect("valid");
            s.add_tuple("E", vec![v.clone(), u.clone()]).expect("valid");
        }
        (s, block_of)
    }

    #[test]
    fn branch_formulas_recover_the_ordered_decomposition() {
        let (s, block_of) = half_graph_indexed(4);
        let sim = builtin("sim_branch");
        let before = builtin("order_before");
        for u in s.domain() {
            for v in s.domain() {
                let same = ev(&s, &sim.formula, &[("x", u), ("y", v)]);
                assert_eq!(
                    same,
                    block_of[u] == block_of[v],
                    "same-branch relation on `{u}`, `{v}`"
                );
                let lt = ev(&s, &before.formula, &[("x", u), ("y", v)]);
                let expected = u.starts_with('x') && v.starts_with('y') && block_of[u] < block_of[v];
                assert_eq!(lt, expected, "branch order on `{u}`, `{v}`");
            }
        }
    }

    #[test]
    fn branch_formulas_hold_on_random_staircase_graphs() {
        let sim = builtin("sim_branch");
        let before = builtin("order_before");
        let mut rng = ChaCha8Rng::seed_from_u64(4_181);
        for _ in 0..12 {
            let branches = rng.gen_range(1..=4);
            let mut s = RelStructure::new(indexed_sob_signature());
            let mut branch_of: BTreeMap<String, usize> = BTreeMap::new();
            let mut side_of: BTreeMap<String, u8> = BTreeMap::new();
            for b in 1..=branches {
                let index = 1 + b % 3;
                for side in [1u8, 2] {
                    let count = if rng.gen_bool(0.3) { 2 } else { 1 };
                    for i in 0..count {
                        let name = format!("b{b}s{side}v{i}");
                        s.add_element(&name);
                        s.add_tuple(&format!("C{side}"), vec![name.clone()]).expect("valid");
                        s.add_tuple(&format!("K{index}"), vec![name.clone()]).expect("valid");
                        branch_of.insert(name.clone(), b);
                        side_of.insert(name, side);
                    }
                }
            }
            let names: Vec<String> = s.domain().iter().cloned().collect();
            for u in &names {
                for v in &names {
                    if side_of[u] != 1 || side_of[v] != 2 {
                        continue;
                    }
                    let adjacent = if branch_of[u] < branch_of[v] {
                        true
                    } else if branch_of[u] == branch_of[v] {
                        rng.gen_bool(0.4)
                    } else {
                        false
                    };
                    if adjacent {
                        s.add_tuple("E", vec![u.clone(), v.clone()]).expect("valid");
                        s.add_tuple("E", vec![v.clone(), u.clone()]).expect("valid");
                    }
                }
            }
            for u in &names {
                for v in &names {
                    let same = ev(&s, &sim.formula, &[("x", u), ("y", v)]);
                    assert_eq!(
                        same,
                        branch_of[u] == branch_of[v],
                        "same-branch relation on `{u}`, `{v}`"
                    );
                    let lt = ev(&s, &before.formula, &[("x", u), ("y", v)]);
                    let expected =
                        side_of[u] == 1 && side_of[v] == 2 && branch_of[u] < branch_of[v];
                    assert_eq!(lt, expected, "branch order on `{u}`, `{v}`");
                }
            }
        }
    }

    #[test]
    fn sim6_matches_bfs_distances() {
        let sim6 = builtin("sim6");
        let mut path8 = Graph::new();
        for i in 0..8 {
            path8.add_vertex(&format!("v{i}"));
        }
        for i in 0..7 {
            path8
                .add_edge(&format!("v{i}"), &format!("v{}", i + 1))
                .expect("vertices added");
        }
        let mut instances = vec![path8];
        let mut rng = ChaCha8Rng::seed_from_u64(31_337);
        for _ in 0..10 {
            let size = rng.gen_range(2..=6);
            let mut g = Graph::new();
            for i in 0..size {
                g.add_vertex(&format!("v{i}"));
            }
            for i in 0..size {
                for j in i + 1..size {
                    if rng.gen_bool(0.3) {
                        g.add_edge(&format!("v{i}"), &format!("v{j}")).expect("vertices added");
                    }
                }
            }
            instances.push(g);
        }
        for g in &instances {
            let s = graph_structure(g);
            for u in g.vertices() {
                for v in g.vertices() {
                    let near = ev(&s, &sim6.formula, &[("x", u), ("y", v)]);
                    let dist = g.distance(u, v).expect("vertices exist");
                    assert_eq!(
                        near,
                        dist.is_some_and(|d| d <= 6),
                        "distance check on `{u}`, `{v}`"
                    );
                }
            }
        }
    }
}
