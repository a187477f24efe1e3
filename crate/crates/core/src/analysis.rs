//! Per-architecture analysis: every considered template in a corpus is
//! abstracted into a pattern and counted.

use std::collections::BTreeMap;

use crate::pattern::{canonicalize, extract_template, FormOrigin, ParamBinding, PatTerm, PatternStore, RtlPattern};
use crate::reader::{extract_template_vector, FormKind, Location, SExpr, TopLevelForm};
use crate::rtl::{code_iterators_from_forms, CodeContext, CodeIterators, RtlArg, RtlExpr, RtlTemplate, RtxCodeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Keep non-commutative binary arithmetic operators in patterns.
    pub bin_arith_in_patterns: bool,
    /// Replace each code iterator by every member code, producing one
    /// expression per combination.
    pub expand_code_iterators: bool,
    /// Also count every operator sub-pattern in a separate store.
    pub count_subpatterns: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bin_arith_in_patterns: true,
            expand_code_iterators: false,
            count_subpatterns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedForm {
    pub name: String,
    pub location: Location,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Unknown codes turned into holes, with how often each was seen.
    pub unknown_codes: BTreeMap<String, u64>,
    pub skipped: Vec<SkippedForm>,
    /// Heads of forms that were not analyzed, with counts.
    pub ignored_heads: BTreeMap<String, u64>,
}

/// Everything learned about one architecture's MD corpus.
#[derive(Debug, Clone)]
pub struct MdAnalysis {
    pub arch_name: String,
    pub store: PatternStore,
    /// One binding per analyzed expression, in corpus order.
    pub bindings: Vec<ParamBinding>,
    /// Single-line text of each analyzed template, parallel to `bindings`.
    pub expressions: Vec<String>,
    /// Iterator and attribute definitions, in corpus order.
    pub iterator_defs: Vec<SExpr>,
    pub code_iterators: CodeIterators,
    pub diagnostics: Diagnostics,
    /// Present when sub-pattern counting was requested.
    pub subpatterns: Option<PatternStore>,
}

impl MdAnalysis {
    /// Number of analyzed expressions (E).
    pub fn expr_count(&self) -> u64 {
        self.store.total_templates()
    }

    /// Number of unique patterns (P).
    pub fn pattern_count(&self) -> usize {
        self.store.len()
    }
}

/// Analyzes the top-level forms of one architecture.
pub fn analyze(arch_name: &str, forms: &[TopLevelForm], table: &RtxCodeTable, options: &AnalysisOptions) -> MdAnalysis {
    let iterator_defs: Vec<SExpr> = forms
        .iter()
        .filter(|f| matches!(f.kind, FormKind::IteratorDef(_)))
        .map(|f| f.body.clone())
        .collect();
    let code_iterators = code_iterators_from_forms(&iterator_defs);
    let ctx = CodeContext {
        table,
        iterators: &code_iterators,
        bin_arith_in_patterns: options.bin_arith_in_patterns,
    };

    let mut analysis = MdAnalysis {
        arch_name: arch_name.to_string(),
        store: PatternStore::new(),
        bindings: Vec::new(),
        expressions: Vec::new(),
        iterator_defs: Vec::new(),
        code_iterators: code_iterators.clone(),
        diagnostics: Diagnostics::default(),
        subpatterns: options.count_subpatterns.then(PatternStore::new),
    };

    for form in forms {
        let head = match &form.kind {
            FormKind::ConsideredTemplate(h) => h,
            other => {
                if !matches!(other, FormKind::IteratorDef(_)) {
                    *analysis.diagnostics.ignored_heads.entry(other.head().to_string()).or_default() += 1;
                }
                continue;
            }
        };
        let template = match extract_template_vector(form)
            .map_err(|e| e.to_string())
            .and_then(|v| RtlTemplate::from_vector(v).map_err(|e| e.to_string()))
        {
            Ok(t) => t,
            Err(reason) => {
                analysis.diagnostics.skipped.push(SkippedForm {
                    name: form.name.clone(),
                    location: form.origin.clone(),
                    reason,
                });
                continue;
            }
        };
        let variants = if options.expand_code_iterators {
            expand_iterators(&template, &code_iterators)
        } else {
            vec![template]
        };
        for t in variants {
            let x = extract_template(&t, &ctx);
            for code in x.unknown_codes {
                *analysis.diagnostics.unknown_codes.entry(code).or_default() += 1;
            }
            if let Some(subs) = analysis.subpatterns.as_mut() {
                x.pattern.root().for_each_op(&mut |op| {
                    subs.insert(canonicalize(&RtlPattern::new(op.clone())));
                });
            }
            let (pattern_id, _) = analysis.store.insert(x.pattern);
            analysis.expressions.push(t.to_text());
            analysis.bindings.push(ParamBinding {
                pattern_id,
                assignments: x.assignments,
                origin: FormOrigin {
                    kind: head.clone(),
                    name: form.name.clone(),
                    location: Some(form.origin.clone()),
                },
            });
        }
    }
    analysis.iterator_defs = iterator_defs;
    analysis
}

fn iterator_codes_in(t: &RtlTemplate, iterators: &CodeIterators) -> Vec<String> {
    let mut found = Vec::new();
    for e in &t.elements {
        e.for_each_node(&mut |n: &RtlExpr| {
            if iterators.contains_key(&n.code) && !found.contains(&n.code) {
                found.push(n.code.clone());
            }
        });
    }
    found
}

/// One template per combination of member codes. Every occurrence of the
/// same iterator takes the same member within one combination.
pub fn expand_iterators(t: &RtlTemplate, iterators: &CodeIterators) -> Vec<RtlTemplate> {
    let mut out = vec![t.clone()];
    for name in iterator_codes_in(t, iterators) {
        let members = &iterators[&name];
        out = out
            .iter()
            .flat_map(|base| {
                let name = &name;
                members.iter().map(move |code| RtlTemplate {
                    elements: base.elements.iter().map(|e| rename_code(e, name, code)).collect(),
                })
            })
            .collect();
    }
    out
}

fn rename_code(a: &RtlArg, from: &str, to: &str) -> RtlArg {
    match a {
        RtlArg::Expr(e) => RtlArg::Expr(RtlExpr {
            code: if e.code == from { to.to_string() } else { e.code.clone() },
            mode: e.mode.clone(),
            args: e.args.iter().map(|c| rename_code(c, from, to)).collect(),
        }),
        RtlArg::Leaf(s) => RtlArg::Leaf(s.clone()),
        RtlArg::Vector(items) => RtlArg::Vector(items.iter().map(|c| rename_code(c, from, to)).collect()),
    }
}

/// True if `p` keeps an operator that `ctx` would have turned into a hole.
pub fn has_machine_specific_node(p: &RtlPattern, ctx: &CodeContext<'_>) -> bool {
    let mut bad = false;
    p.root().for_each_op(&mut |t| {
        if let PatTerm::Op { code, .. } = t {
            bad |= !ctx.is_pattern_operator(code);
        }
    });
    bad
}
