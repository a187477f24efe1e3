//! RTX code classes and typed RTL expression trees.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::reader::{SExpr, SExprKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RtxClass {
    Obj,
    ConstObj,
    Compare,
    CommCompare,
    Unary,
    CommArith,
    BinArith,
    BitfieldOps,
    Ternary,
    Insn,
    Match,
    Autoinc,
    Extra,
}

impl RtxClass {
    pub const ALL: [RtxClass; 13] = [
        RtxClass::Obj,
        RtxClass::ConstObj,
        RtxClass::Compare,
        RtxClass::CommCompare,
        RtxClass::Unary,
        RtxClass::CommArith,
        RtxClass::BinArith,
        RtxClass::BitfieldOps,
        RtxClass::Ternary,
        RtxClass::Insn,
        RtxClass::Match,
        RtxClass::Autoinc,
        RtxClass::Extra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RtxClass::Obj => "obj",
            RtxClass::ConstObj => "const_obj",
            RtxClass::Compare => "compare",
            RtxClass::CommCompare => "comm_compare",
            RtxClass::Unary => "unary",
            RtxClass::CommArith => "comm_arith",
            RtxClass::BinArith => "bin_arith",
            RtxClass::BitfieldOps => "bitfield_ops",
            RtxClass::Ternary => "ternary",
            RtxClass::Insn => "insn",
            RtxClass::Match => "match",
            RtxClass::Autoinc => "autoinc",
            RtxClass::Extra => "extra",
        }
    }
}

impl fmt::Display for RtxClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RtxClass {
    type Err = String;

    /// Accepts `comm_arith`, `COMM_ARITH` and `RTX_COMM_ARITH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let key = lower.strip_prefix("rtx_").unwrap_or(&lower);
        RtxClass::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| format!("unknown RTX class `{s}`"))
    }
}

pub const SIDE_EFFECT_CODES: [&str; 13] = [
    "set",
    "return",
    "call",
    "clobber",
    "use",
    "parallel",
    "cond_exec",
    "sequence",
    "asm_input",
    "unspec",
    "unspec_volatile",
    "addr_vec",
    "addr_diff_vec",
];

// Codes and classes as in GCC's rtl.def (4.6 era). symbol_ref is listed
// as an object here even though rtl.def files it as a constant object;
// both are holes in a pattern.
const DEFAULT_CODES: &[(RtxClass, &[&str])] = &[
    (
        RtxClass::Obj,
        &["reg", "mem", "symbol_ref", "scratch", "pc", "cc0", "concat", "concatn", "lo_sum", "value", "debug_expr"],
    ),
    (
        RtxClass::ConstObj,
        &["const_int", "const_double", "const_fixed", "const_vector", "const_string", "const", "high", "label_ref"],
    ),
    (
        RtxClass::Compare,
        &["ge", "gt", "le", "lt", "geu", "gtu", "leu", "ltu", "unge", "ungt", "unle", "unlt"],
    ),
    (
        RtxClass::CommCompare,
        &["eq", "ne", "ordered", "unordered", "uneq", "ltgt"],
    ),
    (
        RtxClass::Unary,
        &[
            "neg", "not", "abs", "ffs", "clz", "ctz", "popcount", "parity", "bswap", "sqrt",
            "sign_extend", "zero_extend", "truncate", "float_extend", "float_truncate", "float",
            "fix", "unsigned_float", "unsigned_fix", "fract_convert", "unsigned_fract_convert",
            "sat_fract", "unsigned_sat_fract", "ss_neg", "us_neg", "ss_abs", "ss_truncate",
            "us_truncate", "vec_duplicate",
        ],
    ),
    (
        RtxClass::CommArith,
        &[
            "plus", "mult", "and", "ior", "xor", "smin", "smax", "umin", "umax", "ss_plus",
            "us_plus", "ss_mult", "us_mult",
        ],
    ),
    (
        RtxClass::BinArith,
        &[
            "minus", "compare", "div", "mod", "udiv", "umod", "ashift", "ashiftrt", "lshiftrt",
            "rotate", "rotatert", "ss_minus", "us_minus", "ss_div", "us_div", "ss_ashift",
            "us_ashift", "vec_select", "vec_concat",
        ],
    ),
    (RtxClass::BitfieldOps, &["zero_extract", "sign_extract"]),
    (RtxClass::Ternary, &["if_then_else", "vec_merge", "fma"]),
    (RtxClass::Insn, &["insn", "jump_insn", "call_insn", "debug_insn"]),
    (
        RtxClass::Match,
        &[
            "match_operand", "match_scratch", "match_dup", "match_operator", "match_op_dup",
            "match_parallel", "match_par_dup",
        ],
    ),
    (
        RtxClass::Autoinc,
        &["pre_dec", "pre_inc", "post_dec", "post_inc", "pre_modify", "post_modify"],
    ),
    (
        RtxClass::Extra,
        &[
            "subreg", "strict_low_part", "note", "barrier", "code_label", "expr_list", "insn_list",
            "address", "asm_operands", "prefetch", "trap_if", "eh_return", "var_location",
            "match_code", "match_test", "debug_implicit_ptr", "entry_value",
        ],
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CodeInfo {
    pub class: RtxClass,
    pub side_effect: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeTableError {
    #[error("line {line}: expected `<code> <class> <side-effect flag>`")]
    Malformed { line: usize },
    #[error("line {line}: {message}")]
    BadField { line: usize, message: String },
    #[error("line {line}: side-effect code `{code}` must be classed extra")]
    SideEffectNotExtra { line: usize, code: String },
}

/// Mapping from RTX code name to its class and side-effect flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtxCodeTable {
    codes: HashMap<String, CodeInfo>,
}

impl Default for RtxCodeTable {
    fn default() -> Self {
        let mut codes = HashMap::new();
        for (class, names) in DEFAULT_CODES {
            for name in *names {
                codes.insert(
                    name.to_string(),
                    CodeInfo {
                        class: *class,
                        side_effect: false,
                    },
                );
            }
        }
        for name in SIDE_EFFECT_CODES {
            codes.insert(
                name.to_string(),
                CodeInfo {
                    class: RtxClass::Extra,
                    side_effect: true,
                },
            );
        }
        RtxCodeTable { codes }
    }
}

impl RtxCodeTable {
    pub fn get(&self, code: &str) -> Option<CodeInfo> {
        self.codes.get(code).copied()
    }

    pub fn insert(&mut self, code: impl Into<String>, info: CodeInfo) {
        self.codes.insert(code.into(), info);
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Entries sorted by code name.
    pub fn entries(&self) -> BTreeMap<&str, CodeInfo> {
        self.codes.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }

    /// Applies override lines of the form `code class flag`. Blank lines and
    /// lines starting with `#` are skipped. The flag is `0`/`1`, `yes`/`no`
    /// or `true`/`false`.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), CodeTableError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let [code, class, flag] = fields[..] else {
                return Err(CodeTableError::Malformed { line });
            };
            let class: RtxClass = class.parse().map_err(|message| CodeTableError::BadField { line, message })?;
            let side_effect = match flag.to_ascii_lowercase().as_str() {
                "1" | "yes" | "true" => true,
                "0" | "no" | "false" => false,
                other => {
                    return Err(CodeTableError::BadField {
                        line,
                        message: format!("bad side-effect flag `{other}`"),
                    })
                }
            };
            if side_effect && class != RtxClass::Extra {
                return Err(CodeTableError::SideEffectNotExtra {
                    line,
                    code: code.to_string(),
                });
            }
            self.insert(code, CodeInfo { class, side_effect });
        }
        Ok(())
    }
}

/// Result of looking up an operator name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeLookup {
    Known(CodeInfo),
    /// A code iterator defined in the current file. Treated as class extra.
    IteratorAlias,
    UnknownCode,
}

impl CodeLookup {
    pub fn class(self) -> Option<RtxClass> {
        match self {
            CodeLookup::Known(info) => Some(info.class),
            CodeLookup::IteratorAlias => Some(RtxClass::Extra),
            CodeLookup::UnknownCode => None,
        }
    }
}

/// Code iterators of one MD corpus: iterator name to member codes.
pub type CodeIterators = BTreeMap<String, Vec<String>>;

/// Decides which operators survive into a pattern.
#[derive(Debug, Clone, Copy)]
pub struct CodeContext<'a> {
    pub table: &'a RtxCodeTable,
    pub iterators: &'a CodeIterators,
    /// Whether non-commutative binary arithmetic (minus, div, shifts) is
    /// kept in patterns.
    pub bin_arith_in_patterns: bool,
}

impl<'a> CodeContext<'a> {
    pub fn new(table: &'a RtxCodeTable, iterators: &'a CodeIterators) -> Self {
        CodeContext {
            table,
            iterators,
            bin_arith_in_patterns: true,
        }
    }

    pub fn rtx_class(&self, code: &str) -> CodeLookup {
        if let Some(info) = self.table.get(code) {
            CodeLookup::Known(info)
        } else if self.iterators.contains_key(code) {
            CodeLookup::IteratorAlias
        } else {
            CodeLookup::UnknownCode
        }
    }

    pub fn is_pattern_operator(&self, code: &str) -> bool {
        match self.rtx_class(code) {
            CodeLookup::IteratorAlias => true,
            CodeLookup::UnknownCode => false,
            CodeLookup::Known(info) => {
                info.side_effect
                    || match info.class {
                        RtxClass::Compare
                        | RtxClass::CommCompare
                        | RtxClass::Unary
                        | RtxClass::CommArith
                        | RtxClass::BitfieldOps
                        | RtxClass::Ternary
                        | RtxClass::Autoinc => true,
                        RtxClass::BinArith => self.bin_arith_in_patterns,
                        _ => false,
                    }
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("{0}: expected an RTL expression list")]
    NotAList(crate::reader::Location),
    #[error("{0}: empty RTL expression")]
    EmptyList(crate::reader::Location),
    #[error("{0}: RTL expression head is not a symbol")]
    BadHead(crate::reader::Location),
}

/// Argument of an RTL operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RtlArg {
    Expr(RtlExpr),
    /// Integer, string, symbol or brace block, kept verbatim.
    Leaf(SExpr),
    /// A bracketed operand vector, as in `parallel` and `unspec` bodies.
    Vector(Vec<RtlArg>),
}

/// An operator-labelled RTL tree, e.g. `(plus:SI (reg 1) (reg 2))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlExpr {
    /// Operator or code-iterator name as written.
    pub code: String,
    /// Text after the first `:` of the head symbol, if any.
    pub mode: Option<String>,
    pub args: Vec<RtlArg>,
}

impl RtlExpr {
    pub fn from_sexpr(s: &SExpr) -> Result<RtlExpr, TreeError> {
        let items = s.as_list().ok_or_else(|| TreeError::NotAList(s.location.clone()))?;
        let (head, rest) = items.split_first().ok_or_else(|| TreeError::EmptyList(s.location.clone()))?;
        let head = head.as_symbol().ok_or_else(|| TreeError::BadHead(head.location.clone()))?;
        let (code, mode) = match head.split_once(':') {
            Some((c, m)) => (c.to_string(), Some(m.to_string())),
            None => (head.to_string(), None),
        };
        let args = rest.iter().map(RtlArg::from_sexpr).collect::<Result<_, _>>()?;
        Ok(RtlExpr { code, mode, args })
    }

    pub fn head_text(&self) -> String {
        match &self.mode {
            Some(m) => format!("{}:{}", self.code, m),
            None => self.code.clone(),
        }
    }

    /// Longest root-to-leaf path counted in nodes. Leaf payloads are not
    /// nodes and vectors are transparent.
    pub fn height(&self) -> usize {
        1 + self.args.iter().map(RtlArg::height).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    pub fn write_text(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.code);
        if let Some(m) = &self.mode {
            out.push(':');
            out.push_str(m);
        }
        for arg in &self.args {
            out.push(' ');
            arg.write_text(out);
        }
        out.push(')');
    }

    /// Pre-order walk over every expression node.
    pub fn for_each_node<'s>(&'s self, f: &mut impl FnMut(&'s RtlExpr)) {
        f(self);
        for arg in &self.args {
            arg.for_each_node(f);
        }
    }
}

impl RtlArg {
    pub fn from_sexpr(s: &SExpr) -> Result<RtlArg, TreeError> {
        Ok(match &s.kind {
            SExprKind::List(_) => RtlArg::Expr(RtlExpr::from_sexpr(s)?),
            SExprKind::Vector(items) => RtlArg::Vector(items.iter().map(RtlArg::from_sexpr).collect::<Result<_, _>>()?),
            _ => RtlArg::Leaf(s.clone()),
        })
    }

    /// Height contribution: 0 for a leaf payload, the deepest member for a
    /// vector.
    pub fn height(&self) -> usize {
        match self {
            RtlArg::Expr(e) => e.height(),
            RtlArg::Leaf(_) => 0,
            RtlArg::Vector(items) => items.iter().map(RtlArg::height).max().unwrap_or(0),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    pub fn write_text(&self, out: &mut String) {
        match self {
            RtlArg::Expr(e) => e.write_text(out),
            RtlArg::Leaf(s) => s.write_text(out),
            RtlArg::Vector(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    item.write_text(out);
                }
                out.push(']');
            }
        }
    }

    pub fn for_each_node<'s>(&'s self, f: &mut impl FnMut(&'s RtlExpr)) {
        match self {
            RtlArg::Expr(e) => e.for_each_node(f),
            RtlArg::Leaf(_) => {}
            RtlArg::Vector(items) => items.iter().for_each(|i| i.for_each_node(f)),
        }
    }
}

/// The RTL template of one define form: the bracket vector of top-level
/// expressions, treated as a single synthetic root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlTemplate {
    pub elements: Vec<RtlArg>,
}

impl RtlTemplate {
    pub fn from_vector(items: &[SExpr]) -> Result<RtlTemplate, TreeError> {
        Ok(RtlTemplate {
            elements: items.iter().map(RtlArg::from_sexpr).collect::<Result<_, _>>()?,
        })
    }

    /// The synthetic root adds no level; an empty template has height 1.
    pub fn height(&self) -> usize {
        self.elements.iter().map(RtlArg::height).max().unwrap_or(0).max(1)
    }

    pub fn to_text(&self) -> String {
        RtlArg::Vector(self.elements.clone()).to_text()
    }
}

/// Collects `define_code_iterator` definitions. Members may be bare codes
/// or `(code "condition")` lists.
pub fn code_iterators_from_forms<'f>(forms: impl IntoIterator<Item = &'f SExpr>) -> CodeIterators {
    let mut out = CodeIterators::new();
    for form in forms {
        let Some(items) = form.as_list() else { continue };
        if items.first().and_then(SExpr::as_symbol) != Some("define_code_iterator") {
            continue;
        }
        let (Some(name), Some(members)) = (items.get(1).and_then(SExpr::as_symbol), items.get(2).and_then(SExpr::as_vector)) else {
            continue;
        };
        let codes = members
            .iter()
            .filter_map(|m| m.as_symbol().or_else(|| m.head()))
            .map(str::to_string)
            .collect();
        out.insert(name.to_string(), codes);
    }
    out
}
