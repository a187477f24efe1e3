//! Shared test support: a random MD corpus generator, an abstraction oracle
//! that works on the generator's own trees, and brute-force pattern counts.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdpattern_core::archive::{self, merge, PatternFile};
use mdpattern_core::similarity::{expression_similarity, pattern_similarity, target_coverage};
use mdpattern_core::{analyze, parse_md, AnalysisOptions, MdAnalysis, ReaderOptions, RtlPattern, RtxCodeTable};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn analyze_source(arch: &str, src: &str) -> MdAnalysis {
    analyze_source_with(arch, src, &AnalysisOptions::default())
}

pub fn analyze_source_with(arch: &str, src: &str, options: &AnalysisOptions) -> MdAnalysis {
    let forms = parse_md(src, arch, &ReaderOptions::default()).expect("generated source parses");
    analyze(arch, &forms, &RtxCodeTable::default(), options)
}

/// Operators kept in patterns, with the arity used when generating them.
/// Classes follow GCC's rtl.def.
const KEPT: &[(&str, usize)] = &[
    // unary
    ("neg", 1),
    ("not", 1),
    ("abs", 1),
    ("sign_extend", 1),
    ("zero_extend", 1),
    ("truncate", 1),
    ("float", 1),
    // commutative arithmetic
    ("plus", 2),
    ("mult", 2),
    ("and", 2),
    ("ior", 2),
    ("xor", 2),
    ("smin", 2),
    // comparisons
    ("eq", 2),
    ("ne", 2),
    ("lt", 2),
    ("gtu", 2),
    ("ge", 2),
    // ternary and bitfield
    ("if_then_else", 3),
    ("zero_extract", 3),
    ("sign_extract", 3),
    // autoinc
    ("post_inc", 1),
    ("pre_dec", 1),
];

/// Non-commutative binary arithmetic, kept only when the toggle is on.
const BIN_ARITH: &[&str] = &["minus", "div", "udiv", "mod", "ashift", "lshiftrt", "compare"];

const SIDE_EFFECT_TOP: &[&str] = &["set", "set", "set", "clobber", "use", "parallel", "unspec", "unspec_volatile", "call", "return"];

const MODES: &[&str] = &["SI", "DI", "QI", "HI", "SF", "GPR"];
const PREDICATES: &[&str] = &["register_operand", "general_operand", "arith_operand", "memory_operand"];
const CONSTRAINTS: &[&str] = &["r", "=r", "rm", "i", ""];

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Op {
        code: String,
        mode: Option<String>,
        args: Vec<Node>,
    },
    Vector(Vec<Node>),
    Int(i64),
    Sym(String),
    Str(String),
}

impl Node {
    fn op(code: &str, mode: Option<&str>, args: Vec<Node>) -> Node {
        Node::Op {
            code: code.to_string(),
            mode: mode.map(str::to_string),
            args,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Node::Op { code, mode, args } => {
                let mut s = format!("({code}");
                if let Some(m) = mode {
                    s.push(':');
                    s.push_str(m);
                }
                for a in args {
                    s.push(' ');
                    s.push_str(&a.render());
                }
                s.push(')');
                s
            }
            Node::Vector(items) => format!("[{}]", items.iter().map(Node::render).collect::<Vec<_>>().join(" ")),
            Node::Int(i) => i.to_string(),
            Node::Sym(s) => s.clone(),
            Node::Str(s) => format!("\"{s}\""),
        }
    }

    /// Consistently renames every leaf and mode, which must not change the
    /// pattern.
    pub fn alpha_rename(&self) -> Node {
        match self {
            Node::Op { code, mode, args } => Node::Op {
                code: code.clone(),
                mode: mode.as_ref().map(|m| format!("{m}x")),
                args: args.iter().map(Node::alpha_rename).collect(),
            },
            Node::Vector(items) => Node::Vector(items.iter().map(Node::alpha_rename).collect()),
            Node::Int(i) => Node::Int(i + 1000),
            Node::Sym(s) => Node::Sym(format!("{s}_r")),
            Node::Str(s) => Node::Str(format!("{s}_r")),
        }
    }
}

/// Structure decisions come from `shape`, operand choices from `leaf`, so
/// one shape seed with different leaf streams yields alpha-variants.
pub struct Generator {
    pub shape: ChaCha8Rng,
    pub leaf: ChaCha8Rng,
    pub bin_arith: bool,
}

impl Generator {
    pub fn new(shape_seed: u64, leaf_seed: u64) -> Generator {
        Generator {
            shape: ChaCha8Rng::seed_from_u64(shape_seed),
            leaf: ChaCha8Rng::seed_from_u64(leaf_seed),
            bin_arith: true,
        }
    }

    fn mode(&mut self) -> Option<String> {
        if self.leaf.gen_bool(0.2) {
            None
        } else {
            Some(MODES.choose(&mut self.leaf).unwrap().to_string())
        }
    }

    fn small_int(&mut self) -> i64 {
        self.leaf.gen_range(0..4)
    }

    /// A machine-specific operand; these always become holes.
    pub fn operand(&mut self, depth: usize) -> Node {
        let mode = self.mode();
        let m = mode.as_deref();
        match self.shape.gen_range(0..10) {
            0..=3 => Node::op(
                "match_operand",
                m,
                vec![
                    Node::Int(self.small_int()),
                    Node::Str(PREDICATES.choose(&mut self.leaf).unwrap().to_string()),
                    Node::Str(CONSTRAINTS.choose(&mut self.leaf).unwrap().to_string()),
                ],
            ),
            4 => Node::op("match_dup", None, vec![Node::Int(self.small_int())]),
            5 => Node::op("reg", m, vec![Node::Int(self.small_int())]),
            6 => Node::op("const_int", None, vec![Node::Int(self.small_int() - 1)]),
            7 if depth > 1 => {
                let inner = self.operand(depth - 1);
                Node::op("mem", m, vec![inner])
            }
            7 => Node::op("scratch", m, vec![]),
            8 => Node::Int(self.small_int()),
            _ => Node::Sym(["pc", "cc0", "FOO_REGNUM"].choose(&mut self.leaf).unwrap().to_string()),
        }
    }

    /// An expression of height at most `depth`.
    pub fn expr(&mut self, depth: usize) -> Node {
        if depth <= 1 || self.shape.gen_bool(0.3) {
            return self.operand(depth);
        }
        let use_bin = self.bin_arith_pick();
        let (code, arity) = match use_bin {
            Some(code) => (code, 2),
            None => *KEPT.choose(&mut self.shape).unwrap(),
        };
        let mode = self.mode();
        let args = (0..arity).map(|_| self.expr(depth - 1)).collect();
        Node::Op {
            code: code.to_string(),
            mode,
            args,
        }
    }

    fn bin_arith_pick(&mut self) -> Option<&'static str> {
        self.shape.gen_bool(0.25).then(|| *BIN_ARITH.choose(&mut self.shape).unwrap())
    }

    /// One top-level template element (height at most `depth`).
    pub fn element(&mut self, depth: usize) -> Node {
        let depth = depth.max(2);
        match *SIDE_EFFECT_TOP.choose(&mut self.shape).unwrap() {
            "set" => Node::op("set", None, vec![self.operand(depth - 1), self.expr(depth - 1)]),
            "clobber" => Node::op("clobber", None, vec![self.operand(depth - 1)]),
            "use" => Node::op("use", None, vec![self.expr(depth - 1)]),
            "return" => Node::op("return", None, vec![]),
            "call" => Node::op("call", None, vec![self.operand(depth - 1), self.operand(depth - 1)]),
            "parallel" => {
                let n = self.shape.gen_range(1..=2);
                let items = (0..n).map(|_| self.expr(depth - 1)).collect();
                Node::op("parallel", None, vec![Node::Vector(items)])
            }
            code => {
                let n = self.shape.gen_range(1..=2);
                let items = (0..n).map(|_| self.expr(depth - 1)).collect();
                let mode = self.mode();
                Node::op(code, mode.as_deref(), vec![Node::Vector(items), Node::Int(self.small_int())])
            }
        }
    }

    /// A template vector with up to three elements and height at most 4.
    pub fn template(&mut self) -> Vec<Node> {
        let n = self.shape.gen_range(1..=3);
        (0..n).map(|_| self.element(4)).collect()
    }
}

pub fn template_text(t: &[Node]) -> String {
    format!("[{}]", t.iter().map(Node::render).collect::<Vec<_>>().join(" "))
}

/// A define form around a template; `i` picks the head and the name.
pub fn define_form(i: usize, t: &[Node]) -> String {
    let tpl = template_text(t);
    match i % 4 {
        0 | 1 => format!("(define_insn \"insn_{i}\" {tpl} \"\" \"nop\")"),
        2 => format!("(define_expand \"expand_{i}\" {tpl} \"\" \"\")"),
        _ => format!("(define_split {tpl} \"\" [(const_int 0)] \"\")"),
    }
}

pub fn corpus_source(templates: &[Vec<Node>]) -> String {
    templates
        .iter()
        .enumerate()
        .map(|(i, t)| define_form(i, t))
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_kept(code: &str, bin_arith: bool) -> bool {
    KEPT.iter().any(|(c, _)| *c == code)
        || SIDE_EFFECT_TOP.contains(&code)
        || (bin_arith && BIN_ARITH.contains(&code))
}

/// Independent abstraction of one generated template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OraclePattern {
    pub text: String,
    /// `($argN | $modeN, verbatim text)` in first-occurrence order.
    pub bindings: Vec<(String, String)>,
}

struct Oracle {
    bin_arith: bool,
    args: Vec<String>,
    modes: Vec<String>,
    bindings: Vec<(String, String)>,
}

impl Oracle {
    fn hole(&mut self, text: String) -> String {
        let i = match self.args.iter().position(|a| *a == text) {
            Some(i) => i,
            None => {
                self.args.push(text.clone());
                self.bindings.push((format!("$arg{}", self.args.len() - 1), text));
                self.args.len() - 1
            }
        };
        format!("$arg{i}")
    }

    fn mode(&mut self, text: &str) -> String {
        let i = match self.modes.iter().position(|m| m == text) {
            Some(i) => i,
            None => {
                self.modes.push(text.to_string());
                self.bindings.push((format!("$mode{}", self.modes.len() - 1), text.to_string()));
                self.modes.len() - 1
            }
        };
        format!("$mode{i}")
    }

    fn walk(&mut self, n: &Node) -> String {
        match n {
            Node::Op { code, mode, args } if is_kept(code, self.bin_arith) => {
                let mut s = format!("({code}");
                if let Some(m) = mode {
                    s.push(':');
                    s.push_str(&self.mode(m));
                }
                for a in args {
                    s.push(' ');
                    s.push_str(&self.walk(a));
                }
                s.push(')');
                s
            }
            Node::Vector(items) => format!("[{}]", items.iter().map(|i| self.walk(i)).collect::<Vec<_>>().join(" ")),
            other => self.hole(other.render()),
        }
    }
}

pub fn oracle_pattern(t: &[Node], bin_arith: bool) -> OraclePattern {
    let mut o = Oracle {
        bin_arith,
        args: Vec::new(),
        modes: Vec::new(),
        bindings: Vec::new(),
    };
    let text = o.walk(&Node::Vector(t.to_vec()));
    OraclePattern { text, bindings: o.bindings }
}

/// Unique pattern texts with counts, by pairwise comparison.
pub fn brute_force_unique(texts: &[String]) -> Vec<(String, u64)> {
    let mut unique: Vec<(String, u64)> = Vec::new();
    for t in texts {
        let mut found = false;
        for u in unique.iter_mut() {
            if u.0 == *t {
                u.1 += 1;
                found = true;
            }
        }
        if !found {
            unique.push((t.clone(), 1));
        }
    }
    unique
}

/// (common unique patterns, covered expressions in a, covered in b).
pub fn brute_force_common(a: &[(String, u64)], b: &[(String, u64)]) -> (u64, u64, u64) {
    let (mut p, mut ea, mut eb) = (0, 0, 0);
    for (ta, ca) in a {
        for (tb, cb) in b {
            if ta == tb {
                p += 1;
                ea += ca;
                eb += cb;
            }
        }
    }
    (p, ea, eb)
}

/// Two random corpora of at most `max` templates; about half of the second
/// corpus reuses shapes from the first with fresh operands.
pub fn random_corpus_pair(seed: u64, max: usize) -> (Vec<Vec<Node>>, Vec<Vec<Node>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = rng.gen_range(0..=max);
    let nb = rng.gen_range(0..=max);
    let shapes_a: Vec<u64> = (0..na).map(|_| rng.gen_range(0..40)).collect();
    let a = shapes_a
        .iter()
        .map(|s| Generator::new(*s, rng.gen()).template())
        .collect();
    let b = (0..nb)
        .map(|_| {
            let shape = if !shapes_a.is_empty() && rng.gen_bool(0.5) {
                *shapes_a.choose(&mut rng).unwrap()
            } else {
                rng.gen_range(0..80)
            };
            Generator::new(shape, rng.gen()).template()
        })
        .collect();
    (a, b)
}

/// Every library invariant on one analysis pair. Returns a description of
/// the first violation.
pub fn check_invariants(a: &MdAnalysis, b: &MdAnalysis) -> Result<(), String> {
    for x in [a, b] {
        let sum: u64 = x.store.iter().map(|e| e.count).sum();
        if sum != x.expr_count() || sum != x.bindings.len() as u64 {
            return Err(format!("{}: counts sum to {sum}, E = {}", x.arch_name, x.expr_count()));
        }
        for (binding, text) in x.bindings.iter().zip(&x.expressions) {
            let p = &x.store.get(binding.pattern_id).ok_or("dangling binding")?.pattern;
            let names: Vec<_> = binding.assignments.iter().map(|(n, _)| n.to_string()).collect();
            let params: Vec<_> = p.params().iter().map(ToString::to_string).collect();
            if names != params {
                return Err(format!("holes {params:?} but bindings {names:?}"));
            }
            let back = p.instantiate(&binding.assignments).map_err(|e| e.to_string())?;
            if archive::normalize_whitespace(&back) != archive::normalize_whitespace(text) {
                return Err(format!("substitution gave {back}, expected {text}"));
            }
        }
        let (pt, qt) = archive::write_archives(x);
        let loaded = archive::read_archives(&pt, &qt).map_err(|e| e.to_string())?;
        if loaded.store != x.store || loaded.bindings != x.bindings {
            return Err(format!("{}: archive read/write is not the identity", x.arch_name));
        }
        if !archive::verify(x).map_err(|e| e.to_string())?.is_clean() {
            return Err(format!("{}: verify is not clean", x.arch_name));
        }
    }
    let in_range = |v: f64| (0.0..=100.0).contains(&v);
    if a.pattern_count() + b.pattern_count() > 0 {
        let (ab, ba) = (pattern_similarity(a, b).unwrap(), pattern_similarity(b, a).unwrap());
        if ab != ba || !in_range(ab) {
            return Err(format!("pattern similarity {ab} vs {ba}"));
        }
        let (ab, ba) = (expression_similarity(a, b).unwrap(), expression_similarity(b, a).unwrap());
        if ab.expression_similarity_pct != ba.expression_similarity_pct || !in_range(ab.expression_similarity_pct) {
            return Err(format!("expression similarity {ab:?} vs {ba:?}"));
        }
        if a.expr_count() > 0 && b.expr_count() > 0 {
            let cab = target_coverage(a, b).unwrap();
            let cba = target_coverage(b, a).unwrap();
            let composed = (cab.pct * b.expr_count() as f64 + cba.pct * a.expr_count() as f64) / (a.expr_count() + b.expr_count()) as f64;
            if (composed - ab.expression_similarity_pct).abs() > 1e-9 {
                return Err(format!("composition {composed} vs {}", ab.expression_similarity_pct));
            }
        }
    }
    let files = [
        PatternFile::from_store(&a.arch_name, &a.store, &a.iterator_defs),
        PatternFile::from_store(&b.arch_name, &b.store, &b.iterator_defs),
    ];
    let mut previous: Option<Vec<String>> = None;
    for k in 0..4 {
        let kept: Vec<String> = merge(&files, k).entries.into_iter().map(|e| e.text).collect();
        if let Some(prev) = &previous {
            if kept.iter().any(|t| !prev.contains(t)) {
                return Err(format!("merge with min_count {k} kept a pattern dropped at {}", k - 1));
            }
        }
        previous = Some(kept);
    }
    Ok(())
}

/// Alpha-renamed variants must abstract to an equal pattern.
pub fn check_alpha_invariance(t: &[Node]) -> Result<(), String> {
    let renamed: Vec<Node> = t.iter().map(Node::alpha_rename).collect();
    let a = analyze_source("a", &corpus_source(&[t.to_vec()]));
    let b = analyze_source("b", &corpus_source(&[renamed]));
    let pa = &a.store.iter().next().ok_or("no pattern")?.pattern;
    let pb = &b.store.iter().next().ok_or("no pattern")?.pattern;
    if pa != pb {
        return Err(format!("{} != {}", pa.text(), pb.text()));
    }
    let reparsed = RtlPattern::parse(pa.text()).map_err(|e| e.to_string())?;
    if &reparsed != pa {
        return Err(format!("{} does not reparse to itself", pa.text()));
    }
    Ok(())
}

/// Library result against the oracle for one corpus pair.
pub fn check_oracle(seed: u64, bin_arith: bool) -> Result<(), String> {
    let (ta, tb) = random_corpus_pair(seed, 20);
    let options = AnalysisOptions {
        bin_arith_in_patterns: bin_arith,
        ..AnalysisOptions::default()
    };
    let a = analyze_source_with("a", &corpus_source(&ta), &options);
    let b = analyze_source_with("b", &corpus_source(&tb), &options);
    let mut uniques = Vec::new();
    for (analysis, templates) in [(&a, &ta), (&b, &tb)] {
        let oracle: Vec<OraclePattern> = templates.iter().map(|t| oracle_pattern(t, bin_arith)).collect();
        for (i, (o, binding)) in oracle.iter().zip(&analysis.bindings).enumerate() {
            let got = &analysis.store.get(binding.pattern_id).unwrap().pattern;
            if got.text() != o.text {
                return Err(format!("seed {seed} template {i}: {} vs oracle {}", got.text(), o.text));
            }
            let names: Vec<(String, String)> = binding.assignments.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
            if names != o.bindings {
                return Err(format!("seed {seed} template {i}: bindings {names:?} vs oracle {:?}", o.bindings));
            }
        }
        let texts: Vec<String> = oracle.into_iter().map(|o| o.text).collect();
        let unique = brute_force_unique(&texts);
        let store: HashMap<&str, u64> = analysis.store.iter().map(|e| (e.pattern.text(), e.count)).collect();
        let oracle_map: HashMap<&str, u64> = unique.iter().map(|(t, c)| (t.as_str(), *c)).collect();
        if store != oracle_map || analysis.expr_count() != templates.len() as u64 {
            return Err(format!("seed {seed}: store {store:?} vs brute force {oracle_map:?}"));
        }
        uniques.push(unique);
    }
    let (p, ea, eb) = brute_force_common(&uniques[0], &uniques[1]);
    if a.pattern_count() + b.pattern_count() > 0 {
        let r = expression_similarity(&a, &b).unwrap();
        if (r.common_pattern_count, r.covered_expr_a, r.covered_expr_b) != (p, ea, eb) {
            return Err(format!("seed {seed}: common {r:?} vs brute force ({p}, {ea}, {eb})"));
        }
    }
    Ok(())
}
