//! RTL patterns: RTL expressions whose machine-specific parts are replaced
//! by named parameters (`$modeN`, `$argN`).
//!
//! Extraction keeps every operator that [`CodeContext::is_pattern_operator`]
//! accepts and turns anything else (operands, constants, registers, unknown
//! codes) into an argument hole. Modes on kept operators become mode holes.
//! Equal replaced text within one expression reuses the same hole, and
//! holes are numbered by first occurrence in pre-order, so an extracted
//! pattern is already canonical.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::reader::{parse_str, Location, SExpr, SExprKind};
use crate::rtl::{CodeContext, CodeLookup, RtlArg, RtlExpr, RtlTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Mode,
    Arg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamName {
    pub kind: ParamKind,
    pub index: u32,
}

impl ParamName {
    pub fn mode(index: u32) -> Self {
        ParamName {
            kind: ParamKind::Mode,
            index,
        }
    }

    pub fn arg(index: u32) -> Self {
        ParamName {
            kind: ParamKind::Arg,
            index,
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParamKind::Mode => write!(f, "$mode{}", self.index),
            ParamKind::Arg => write!(f, "$arg{}", self.index),
        }
    }
}

impl FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, digits) = if let Some(d) = s.strip_prefix("$mode") {
            (ParamKind::Mode, d)
        } else if let Some(d) = s.strip_prefix("$arg") {
            (ParamKind::Arg, d)
        } else {
            return Err(format!("`{s}` is not a parameter name"));
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("`{s}` is not a parameter name"));
        }
        let index = digits.parse().map_err(|_| format!("parameter index out of range in `{s}`"))?;
        Ok(ParamName { kind, index })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModeSlot {
    Param(u32),
    Literal(String),
}

/// A node of a pattern tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatTerm {
    Op {
        code: String,
        mode: Option<ModeSlot>,
        args: Vec<PatTerm>,
    },
    Vector(Vec<PatTerm>),
    /// Argument hole `$argN`.
    Hole(u32),
}

impl PatTerm {
    fn height(&self) -> usize {
        match self {
            PatTerm::Hole(_) => 1,
            PatTerm::Op { args, .. } => 1 + args.iter().map(PatTerm::height).max().unwrap_or(0),
            PatTerm::Vector(items) => items.iter().map(PatTerm::height).max().unwrap_or(0),
        }
    }

    fn render(&self, out: &mut String, subst: &dyn Fn(ParamName) -> Option<String>) -> Result<(), ParamName> {
        let param = |name: ParamName| subst(name).ok_or(name);
        match self {
            PatTerm::Hole(i) => out.push_str(&param(ParamName::arg(*i))?),
            PatTerm::Op { code, mode, args } => {
                out.push('(');
                out.push_str(code);
                match mode {
                    Some(ModeSlot::Param(i)) => {
                        out.push(':');
                        out.push_str(&param(ParamName::mode(*i))?);
                    }
                    Some(ModeSlot::Literal(m)) => {
                        out.push(':');
                        out.push_str(m);
                    }
                    None => {}
                }
                for a in args {
                    out.push(' ');
                    a.render(out, subst)?;
                }
                out.push(')');
            }
            PatTerm::Vector(items) => {
                out.push('[');
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    a.render(out, subst)?;
                }
                out.push(']');
            }
        }
        Ok(())
    }

    /// Parameters in pre-order of first occurrence (mode before arguments).
    fn collect_params(&self, out: &mut Vec<ParamName>) {
        let mut push = |p: ParamName| {
            if !out.contains(&p) {
                out.push(p);
            }
        };
        match self {
            PatTerm::Hole(i) => push(ParamName::arg(*i)),
            PatTerm::Op { mode, args, .. } => {
                if let Some(ModeSlot::Param(i)) = mode {
                    push(ParamName::mode(*i));
                }
                args.iter().for_each(|a| a.collect_params(out));
            }
            PatTerm::Vector(items) => items.iter().for_each(|a| a.collect_params(out)),
        }
    }

    fn renumber(&self, map: &HashMap<ParamName, u32>) -> PatTerm {
        match self {
            PatTerm::Hole(i) => PatTerm::Hole(map[&ParamName::arg(*i)]),
            PatTerm::Op { code, mode, args } => PatTerm::Op {
                code: code.clone(),
                mode: match mode {
                    Some(ModeSlot::Param(i)) => Some(ModeSlot::Param(map[&ParamName::mode(*i)])),
                    other => other.clone(),
                },
                args: args.iter().map(|a| a.renumber(map)).collect(),
            },
            PatTerm::Vector(items) => PatTerm::Vector(items.iter().map(|a| a.renumber(map)).collect()),
        }
    }

    /// Pre-order walk over operator subterms.
    pub fn for_each_op<'s>(&'s self, f: &mut impl FnMut(&'s PatTerm)) {
        match self {
            PatTerm::Hole(_) => {}
            PatTerm::Op { args, .. } => {
                f(self);
                args.iter().for_each(|a| a.for_each_op(f));
            }
            PatTerm::Vector(items) => items.iter().for_each(|a| a.for_each_op(f)),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("cannot parse pattern: {0}")]
    Syntax(String),
    #[error("parameter {missing} has no value")]
    MissingParam { missing: ParamName },
    #[error("binding has {given} parameters but the pattern has {expected}")]
    ArityMismatch { expected: usize, given: usize },
}

/// A pattern tree with its height and text rendering.
#[derive(Debug, Clone)]
pub struct RtlPattern {
    root: PatTerm,
    height: usize,
    text: String,
}

impl PartialEq for RtlPattern {
    fn eq(&self, other: &Self) -> bool {
        pattern_equal(self, other)
    }
}

impl Eq for RtlPattern {}

impl RtlPattern {
    pub fn new(root: PatTerm) -> RtlPattern {
        let height = root.height().max(1);
        let mut text = String::new();
        root.render(&mut text, &|p| Some(p.to_string())).expect("identity substitution is total");
        RtlPattern { root, height, text }
    }

    pub fn root(&self) -> &PatTerm {
        &self.root
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Single-line S-expression rendering, e.g.
    /// `[(set $arg0 (plus:$mode0 $arg1 $arg2))]`.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Parameters in first-occurrence pre-order.
    pub fn params(&self) -> Vec<ParamName> {
        let mut out = Vec::new();
        self.root.collect_params(&mut out);
        out
    }

    /// Parses the text form produced by [`RtlPattern::text`].
    pub fn parse(text: &str) -> Result<RtlPattern, PatternError> {
        let data = parse_str(text, "<pattern>").map_err(|e| PatternError::Syntax(e.to_string()))?;
        let [datum] = &data[..] else {
            return Err(PatternError::Syntax(format!("expected one datum, found {}", data.len())));
        };
        Ok(RtlPattern::new(term_from_sexpr(datum)?))
    }

    /// Fills every hole from `values` and renders the resulting RTL text.
    /// The parameter set of `values` must match the pattern's exactly.
    pub fn instantiate(&self, values: &[(ParamName, String)]) -> Result<String, PatternError> {
        let params = self.params();
        let map: HashMap<ParamName, &str> = values.iter().map(|(p, v)| (*p, v.as_str())).collect();
        if map.len() != params.len() || values.len() != params.len() {
            return Err(PatternError::ArityMismatch {
                expected: params.len(),
                given: values.len(),
            });
        }
        let mut out = String::new();
        self.root
            .render(&mut out, &|p| map.get(&p).map(|v| v.to_string()))
            .map_err(|missing| PatternError::MissingParam { missing })?;
        Ok(out)
    }
}

impl fmt::Display for RtlPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn term_from_sexpr(s: &SExpr) -> Result<PatTerm, PatternError> {
    match &s.kind {
        SExprKind::Symbol(sym) => match sym.parse::<ParamName>() {
            Ok(ParamName {
                kind: ParamKind::Arg,
                index,
            }) => Ok(PatTerm::Hole(index)),
            _ => Err(PatternError::Syntax(format!("unexpected atom `{sym}`"))),
        },
        SExprKind::Vector(items) => Ok(PatTerm::Vector(items.iter().map(term_from_sexpr).collect::<Result<_, _>>()?)),
        SExprKind::List(items) => {
            let (head, rest) = items
                .split_first()
                .ok_or_else(|| PatternError::Syntax("empty list".into()))?;
            let head = head
                .as_symbol()
                .ok_or_else(|| PatternError::Syntax(format!("bad operator `{head}`")))?;
            let (code, mode) = match head.split_once(':') {
                None => (head, None),
                Some((c, m)) => match m.parse::<ParamName>() {
                    Ok(ParamName {
                        kind: ParamKind::Mode,
                        index,
                    }) => (c, Some(ModeSlot::Param(index))),
                    _ => (c, Some(ModeSlot::Literal(m.to_string()))),
                },
            };
            Ok(PatTerm::Op {
                code: code.to_string(),
                mode,
                args: rest.iter().map(term_from_sexpr).collect::<Result<_, _>>()?,
            })
        }
        _ => Err(PatternError::Syntax(format!("unexpected atom `{s}`"))),
    }
}

/// Renumbers parameters by first occurrence in pre-order, separately per
/// kind. The result is the representative of the pattern's alpha-equivalence
/// class.
pub fn canonicalize(p: &RtlPattern) -> RtlPattern {
    let mut next = [0u32; 2];
    let map: HashMap<ParamName, u32> = p
        .params()
        .into_iter()
        .map(|name| {
            let slot = &mut next[name.kind as usize];
            *slot += 1;
            (name, *slot - 1)
        })
        .collect();
    RtlPattern::new(p.root.renumber(&map))
}

/// Structural equality, gated on height.
pub fn pattern_equal(a: &RtlPattern, b: &RtlPattern) -> bool {
    a.height == b.height && a.root == b.root
}

/// Result of abstracting one RTL template or expression.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub pattern: RtlPattern,
    /// Hole values in first-occurrence pre-order.
    pub assignments: Vec<(ParamName, String)>,
    /// Codes absent from the code table that were turned into holes.
    pub unknown_codes: Vec<String>,
}

struct Abstractor<'c> {
    ctx: &'c CodeContext<'c>,
    args: HashMap<String, u32>,
    modes: HashMap<String, u32>,
    assignments: Vec<(ParamName, String)>,
    unknown_codes: Vec<String>,
}

impl<'c> Abstractor<'c> {
    fn new(ctx: &'c CodeContext<'c>) -> Self {
        Abstractor {
            ctx,
            args: HashMap::new(),
            modes: HashMap::new(),
            assignments: Vec::new(),
            unknown_codes: Vec::new(),
        }
    }

    fn hole(&mut self, text: String) -> PatTerm {
        let next = self.args.len() as u32;
        let index = *self.args.entry(text.clone()).or_insert_with(|| {
            self.assignments.push((ParamName::arg(next), text));
            next
        });
        PatTerm::Hole(index)
    }

    fn mode(&mut self, text: &str) -> ModeSlot {
        let next = self.modes.len() as u32;
        let index = *self.modes.entry(text.to_string()).or_insert_with(|| {
            self.assignments.push((ParamName::mode(next), text.to_string()));
            next
        });
        ModeSlot::Param(index)
    }

    fn expr(&mut self, e: &RtlExpr) -> PatTerm {
        if !self.ctx.is_pattern_operator(&e.code) {
            if self.ctx.rtx_class(&e.code) == CodeLookup::UnknownCode {
                self.unknown_codes.push(e.code.clone());
            }
            return self.hole(e.to_text());
        }
        let mode = e.mode.as_deref().map(|m| self.mode(m));
        PatTerm::Op {
            code: e.code.clone(),
            mode,
            args: e.args.iter().map(|a| self.arg(a)).collect(),
        }
    }

    fn arg(&mut self, a: &RtlArg) -> PatTerm {
        match a {
            RtlArg::Expr(e) => self.expr(e),
            RtlArg::Leaf(s) => self.hole(s.to_text()),
            RtlArg::Vector(items) => PatTerm::Vector(items.iter().map(|i| self.arg(i)).collect()),
        }
    }

    fn finish(self, root: PatTerm) -> Extraction {
        Extraction {
            pattern: RtlPattern::new(root),
            assignments: self.assignments,
            unknown_codes: self.unknown_codes,
        }
    }
}

/// Abstracts a whole define template. The bracket vector is the pattern root.
pub fn extract_template(t: &RtlTemplate, ctx: &CodeContext<'_>) -> Extraction {
    let mut a = Abstractor::new(ctx);
    let root = PatTerm::Vector(t.elements.iter().map(|e| a.arg(e)).collect());
    a.finish(root)
}

/// Abstracts a single RTL expression.
pub fn extract_pattern(e: &RtlExpr, ctx: &CodeContext<'_>) -> Extraction {
    let mut a = Abstractor::new(ctx);
    let root = a.expr(e);
    a.finish(root)
}

/// Where a parameter binding came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormOrigin {
    /// Head of the define form, e.g. `define_insn`.
    pub kind: String,
    pub name: String,
    pub location: Option<Location>,
}

/// Machine-specific values that turn a pattern back into one expression.
#[derive(Debug, Clone)]
pub struct ParamBinding {
    pub pattern_id: u64,
    pub assignments: Vec<(ParamName, String)>,
    pub origin: FormOrigin,
}

impl PartialEq for ParamBinding {
    /// Source locations are not archived, so they take no part in equality.
    fn eq(&self, other: &Self) -> bool {
        self.pattern_id == other.pattern_id
            && self.assignments == other.assignments
            && self.origin.kind == other.origin.kind
            && self.origin.name == other.origin.name
    }
}

impl Eq for ParamBinding {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPattern {
    pub id: u64,
    pub pattern: RtlPattern,
    pub count: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("pattern id {0} is already in use")]
    DuplicateId(u64),
    #[error("pattern `{0}` is already stored")]
    DuplicatePattern(String),
}

/// Unique patterns bucketed by height, each with an occurrence count.
#[derive(Debug, Clone, Default)]
pub struct PatternStore {
    buckets: BTreeMap<usize, Vec<StoredPattern>>,
    by_text: HashMap<(usize, String), usize>,
    by_id: HashMap<u64, (usize, usize)>,
    next_id: u64,
    total_templates: u64,
}

impl PartialEq for PatternStore {
    fn eq(&self, other: &Self) -> bool {
        self.total_templates == other.total_templates && self.iter().eq(other.iter())
    }
}

impl PatternStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn find(&self, p: &RtlPattern) -> Option<usize> {
        self.by_text.get(&(p.height, p.text.clone())).copied()
    }

    /// Records one occurrence of a canonical pattern. Returns its id and
    /// whether it was new.
    pub fn insert(&mut self, p: RtlPattern) -> (u64, bool) {
        self.total_templates += 1;
        if let Some(idx) = self.find(&p) {
            let entry = &mut self.buckets.get_mut(&p.height).unwrap()[idx];
            debug_assert!(pattern_equal(&entry.pattern, &p));
            entry.count += 1;
            return (entry.id, false);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.push(id, p, 1);
        (id, true)
    }

    fn push(&mut self, id: u64, p: RtlPattern, count: u64) {
        let height = p.height;
        let bucket = self.buckets.entry(height).or_default();
        self.by_text.insert((height, p.text.clone()), bucket.len());
        self.by_id.insert(id, (height, bucket.len()));
        bucket.push(StoredPattern { id, pattern: p, count });
    }

    /// Adds a pattern with a known id and count, as when loading an archive.
    pub fn insert_entry(&mut self, id: u64, p: RtlPattern, count: u64) -> Result<(), StoreError> {
        if self.by_id.contains_key(&id) {
            return Err(StoreError::DuplicateId(id));
        }
        if self.find(&p).is_some() {
            return Err(StoreError::DuplicatePattern(p.text));
        }
        self.total_templates += count;
        self.next_id = self.next_id.max(id + 1);
        self.push(id, p, count);
        Ok(())
    }

    pub fn get(&self, id: u64) -> Option<&StoredPattern> {
        let (h, i) = self.by_id.get(&id)?;
        Some(&self.buckets[h][*i])
    }

    /// Looks up a pattern by canonical equality.
    pub fn lookup(&self, p: &RtlPattern) -> Option<&StoredPattern> {
        self.find(p).map(|i| &self.buckets[&p.height][i])
    }

    /// Entries in (height, id) order.
    pub fn iter(&self) -> impl Iterator<Item = &StoredPattern> {
        self.buckets.values().flat_map(|bucket| {
            let mut sorted: Vec<_> = bucket.iter().collect();
            sorted.sort_by_key(|e| e.id);
            sorted
        })
    }

    pub fn bucket(&self, height: usize) -> &[StoredPattern] {
        self.buckets.get(&height).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn heights(&self) -> impl Iterator<Item = usize> + '_ {
        self.buckets.keys().copied()
    }

    /// Number of unique patterns.
    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Number of expressions inserted, i.e. the sum of all counts.
    pub fn total_templates(&self) -> u64 {
        self.total_templates
    }
}
