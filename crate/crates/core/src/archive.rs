//! Text archives for pattern stores and parameter bindings.
//!
//! Pattern file:
//!
//! ```text
//! # arch: arm
//! # total_templates: 3
//! # iterator: (define_mode_iterator GPR [SI DI])
//! 0 3 2 [(set $arg0 (plus:$mode0 $arg1 $arg2))]
//! ```
//!
//! Entries are `<id> <height> <count> <pattern>`, sorted by height then id.
//!
//! Param file, one record per analyzed expression:
//!
//! ```text
//! 0 define_expand "addsi3" $arg0=(match_operand:SI%200%20...) $mode0=SI ...
//! ```
//!
//! Values and form names are percent-escaped for space, `%`, newline, tab
//! and carriage return; form names additionally escape `"` and are quoted
//! so an empty name is representable.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::MdAnalysis;
use crate::pattern::{canonicalize, FormOrigin, ParamBinding, ParamName, PatternError, PatternStore, RtlPattern, StoreError};
use crate::reader::{extract_template_vector, parse_md, write_string_literal, ReaderOptions, SExpr};
use crate::rtl::RtlTemplate;

/// Written in the output-template slot of regenerated define_insn forms.
pub const OUTPUT_PLACEHOLDER: &str = "<output template not archived>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArchiveError {
    #[error("line {line}: bad header: {message}")]
    BadHeader { line: usize, message: String },
    #[error("line {line}: record refers to unknown pattern id {id}")]
    DanglingPatternId { line: usize, id: u64 },
    #[error("line {line}: malformed entry: {message}")]
    MalformedEntry { line: usize, message: String },
    #[error("binding {index} ({name}): {source}")]
    ArityMismatch {
        index: usize,
        name: String,
        source: PatternError,
    },
    #[error("binding {index} ({name}) refers to unknown pattern id {id}")]
    UnresolvedBinding { index: usize, name: String, id: u64 },
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
    #[error("regenerated forms do not parse: {0}")]
    Regenerated(String),
}

const NAME_ESCAPES: &[char] = &[' ', '%', '\n', '\t', '\r', '"'];
const VALUE_ESCAPES: &[char] = &[' ', '%', '\n', '\t', '\r'];

fn escape(text: &str, special: &[char]) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if special.contains(&c) {
            let _ = write!(out, "%{:02X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

pub fn escape_value(text: &str) -> String {
    escape(text, VALUE_ESCAPES)
}

pub fn unescape_value(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let hex: String = chars.by_ref().take(2).collect();
        let code = (hex.len() == 2)
            .then(|| u8::from_str_radix(&hex, 16).ok())
            .flatten()
            .ok_or_else(|| format!("bad escape `%{hex}`"))?;
        out.push(code as char);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternFileHeader {
    pub arch_names: Vec<String>,
    pub total_templates: u64,
    /// Iterator and attribute definitions, one per line.
    pub iterators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEntry {
    pub id: u64,
    pub height: usize,
    pub count: u64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternFile {
    pub header: PatternFileHeader,
    pub entries: Vec<PatternEntry>,
}

impl PatternFile {
    pub fn from_store(arch: &str, store: &PatternStore, iterator_defs: &[SExpr]) -> PatternFile {
        let mut entries: Vec<PatternEntry> = store
            .iter()
            .map(|e| PatternEntry {
                id: e.id,
                height: e.pattern.height(),
                count: e.count,
                text: e.pattern.text().to_string(),
            })
            .collect();
        entries.sort_by_key(|e| (e.height, e.id));
        PatternFile {
            header: PatternFileHeader {
                arch_names: vec![arch.to_string()],
                total_templates: store.total_templates(),
                iterators: iterator_defs.iter().map(SExpr::to_text).collect(),
            },
            entries,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for arch in &self.header.arch_names {
            let _ = writeln!(out, "# arch: {arch}");
        }
        let _ = writeln!(out, "# total_templates: {}", self.header.total_templates);
        for it in &self.header.iterators {
            let _ = writeln!(out, "# iterator: {}", it.replace('\n', " "));
        }
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {}", e.id, e.height, e.count, e.text);
        }
        out
    }

    pub fn parse(text: &str) -> Result<PatternFile, ArchiveError> {
        let mut file = PatternFile::default();
        let mut saw_total = false;
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if !file.entries.is_empty() {
                    return Err(ArchiveError::BadHeader {
                        line,
                        message: "header line after entries".into(),
                    });
                }
                let (key, value) = rest.split_once(':').ok_or_else(|| ArchiveError::BadHeader {
                    line,
                    message: format!("expected `# key: value`, got `{trimmed}`"),
                })?;
                let value = value.trim();
                match key.trim() {
                    "arch" => file.header.arch_names.push(value.to_string()),
                    "total_templates" => {
                        file.header.total_templates = value.parse().map_err(|_| ArchiveError::BadHeader {
                            line,
                            message: format!("bad template count `{value}`"),
                        })?;
                        saw_total = true;
                    }
                    "iterator" => file.header.iterators.push(value.to_string()),
                    other => {
                        return Err(ArchiveError::BadHeader {
                            line,
                            message: format!("unknown key `{other}`"),
                        })
                    }
                }
                continue;
            }
            file.entries.push(parse_entry(trimmed, line)?);
        }
        if file.header.arch_names.is_empty() || !saw_total {
            return Err(ArchiveError::BadHeader {
                line: last_line.max(1),
                message: "missing `arch` or `total_templates`".into(),
            });
        }
        let sum: u64 = file.entries.iter().map(|e| e.count).sum();
        if sum != file.header.total_templates {
            return Err(ArchiveError::BadHeader {
                line: 1,
                message: format!("total_templates is {} but entry counts sum to {sum}", file.header.total_templates),
            });
        }
        Ok(file)
    }

    /// Rebuilds the pattern store described by the entries.
    pub fn to_store(&self) -> Result<PatternStore, ArchiveError> {
        let mut store = PatternStore::new();
        for (i, e) in self.entries.iter().enumerate() {
            let pattern = RtlPattern::parse(&e.text).map_err(|err| ArchiveError::MalformedEntry {
                line: i + 1,
                message: err.to_string(),
            })?;
            store
                .insert_entry(e.id, pattern, e.count)
                .map_err(|err: StoreError| ArchiveError::MalformedEntry {
                    line: i + 1,
                    message: err.to_string(),
                })?;
        }
        Ok(store)
    }
}

fn parse_entry(line_text: &str, line: usize) -> Result<PatternEntry, ArchiveError> {
    let malformed = |message: String| ArchiveError::MalformedEntry { line, message };
    let mut parts = line_text.splitn(4, ' ');
    let mut number = |what: &str| -> Result<u64, ArchiveError> {
        let field = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| malformed(format!("missing {what}")))?;
        field.parse().map_err(|_| malformed(format!("bad {what} `{field}`")))
    };
    let id = number("id")?;
    let height = number("height")? as usize;
    let count = number("count")?;
    let text = parts.next().ok_or_else(|| malformed("missing pattern".into()))?.trim();
    let pattern = RtlPattern::parse(text).map_err(|e| malformed(e.to_string()))?;
    if pattern.height() != height {
        return Err(malformed(format!("height {height} does not match pattern height {}", pattern.height())));
    }
    if canonicalize(&pattern).text() != text {
        return Err(malformed(format!("pattern `{text}` is not in canonical form")));
    }
    if count == 0 {
        return Err(malformed("zero occurrence count".into()));
    }
    Ok(PatternEntry {
        id,
        height,
        count,
        text: text.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRecord {
    pub pattern_id: u64,
    pub form_kind: String,
    pub form_name: String,
    pub params: Vec<(ParamName, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamFile {
    pub arch: Option<String>,
    pub records: Vec<ParamRecord>,
}

impl ParamFile {
    pub fn from_bindings(arch: &str, bindings: &[ParamBinding]) -> ParamFile {
        ParamFile {
            arch: Some(arch.to_string()),
            records: bindings
                .iter()
                .map(|b| ParamRecord {
                    pattern_id: b.pattern_id,
                    form_kind: b.origin.kind.clone(),
                    form_name: b.origin.name.clone(),
                    params: b.assignments.clone(),
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(arch) = &self.arch {
            let _ = writeln!(out, "# arch: {arch}");
        }
        for r in &self.records {
            let _ = write!(out, "{} {} \"{}\"", r.pattern_id, r.form_kind, escape(&r.form_name, NAME_ESCAPES));
            for (p, v) in &r.params {
                let _ = write!(out, " {p}={}", escape_value(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<ParamFile, ArchiveError> {
        let mut file = ParamFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                match rest.split_once(':') {
                    Some((k, v)) if k.trim() == "arch" => file.arch = Some(v.trim().to_string()),
                    _ => {
                        return Err(ArchiveError::BadHeader {
                            line,
                            message: format!("unexpected header `{trimmed}`"),
                        })
                    }
                }
                continue;
            }
            file.records.push(parse_record(trimmed, line)?);
        }
        Ok(file)
    }

    pub fn to_bindings(&self) -> Vec<ParamBinding> {
        self.records
            .iter()
            .map(|r| ParamBinding {
                pattern_id: r.pattern_id,
                assignments: r.params.clone(),
                origin: FormOrigin {
                    kind: r.form_kind.clone(),
                    name: r.form_name.clone(),
                    location: None,
                },
            })
            .collect()
    }
}

fn parse_record(text: &str, line: usize) -> Result<ParamRecord, ArchiveError> {
    let malformed = |message: String| ArchiveError::MalformedEntry { line, message };
    let mut fields = text.split(' ');
    let id_text = fields.next().unwrap_or_default();
    let pattern_id = id_text.parse().map_err(|_| malformed(format!("bad pattern id `{id_text}`")))?;
    let form_kind = fields.next().filter(|s| !s.is_empty()).ok_or_else(|| malformed("missing form kind".into()))?;
    let quoted = fields.next().ok_or_else(|| malformed("missing form name".into()))?;
    let form_name = quoted
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|_| quoted.len() >= 2)
        .ok_or_else(|| malformed(format!("form name `{quoted}` is not quoted")))?;
    let form_name = unescape_value(form_name).map_err(malformed)?;
    let mut params = Vec::new();
    for field in fields {
        let (name, value) = field.split_once('=').ok_or_else(|| malformed(format!("expected `$param=value`, got `{field}`")))?;
        let name: ParamName = name.parse().map_err(malformed)?;
        let value = unescape_value(value).map_err(malformed)?;
        if value.is_empty() {
            return Err(malformed(format!("empty value for {name}")));
        }
        params.push((name, value));
    }
    Ok(ParamRecord {
        pattern_id,
        form_kind: form_kind.to_string(),
        form_name,
        params,
    })
}

/// Serializes an analysis into (pattern file, param file) texts.
pub fn write_archives(analysis: &MdAnalysis) -> (String, String) {
    let patterns = PatternFile::from_store(&analysis.arch_name, &analysis.store, &analysis.iterator_defs);
    let params = ParamFile::from_bindings(&analysis.arch_name, &analysis.bindings);
    (patterns.to_text(), params.to_text())
}

pub fn write_archive_files(analysis: &MdAnalysis, pattern_path: &Path, param_path: &Path) -> Result<(), ArchiveError> {
    let (patterns, params) = write_archives(analysis);
    for (path, text) in [(pattern_path, patterns), (param_path, params)] {
        std::fs::write(path, text).map_err(|e| ArchiveError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedArchive {
    pub header: PatternFileHeader,
    pub store: PatternStore,
    pub bindings: Vec<ParamBinding>,
}

/// Parses a pattern file and its param file. Every param record must name
/// a pattern present in the pattern file.
pub fn read_archives(pattern_text: &str, param_text: &str) -> Result<LoadedArchive, ArchiveError> {
    let patterns = PatternFile::parse(pattern_text)?;
    let store = patterns.to_store()?;
    let params = ParamFile::parse(param_text)?;
    let header_lines = param_text.lines().take_while(|l| l.trim().is_empty() || l.trim_start().starts_with('#')).count();
    for (record_line, r) in (header_lines + 1..).zip(&params.records) {
        if store.get(r.pattern_id).is_none() {
            return Err(ArchiveError::DanglingPatternId {
                line: record_line,
                id: r.pattern_id,
            });
        }
    }
    Ok(LoadedArchive {
        header: patterns.header,
        store,
        bindings: params.to_bindings(),
    })
}

fn render_form(kind: &str, name: &str, template: &str) -> String {
    let mut quoted = String::new();
    write_string_literal(name, &mut quoted);
    let mut placeholder = String::new();
    write_string_literal(OUTPUT_PLACEHOLDER, &mut placeholder);
    match kind {
        "define_insn" => format!("({kind} {quoted} {template} \"\" {placeholder})"),
        "define_insn_and_split" => format!("({kind} {quoted} {template} \"\" {placeholder} \"\" [] \"\")"),
        "define_expand" => format!("({kind} {quoted} {template} \"\" \"\")"),
        "define_split" => format!("({kind} {template} \"\" [] \"\")"),
        _ => format!("({kind} {quoted} {template})"),
    }
}

/// Regenerates one define form per binding, in binding order.
pub fn recombine(store: &PatternStore, bindings: &[ParamBinding]) -> Result<Vec<String>, ArchiveError> {
    bindings
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let entry = store.get(b.pattern_id).ok_or_else(|| ArchiveError::UnresolvedBinding {
                index,
                name: b.origin.name.clone(),
                id: b.pattern_id,
            })?;
            let template = entry.pattern.instantiate(&b.assignments).map_err(|source| ArchiveError::ArityMismatch {
                index,
                name: b.origin.name.clone(),
                source,
            })?;
            Ok(render_form(&b.origin.kind, &b.origin.name, &template))
        })
        .collect()
}

/// Unions pattern files by canonical text, summing counts and keeping only
/// patterns that occur strictly more than `min_count` times. Ids are
/// reassigned in (height, text) order.
pub fn merge(files: &[PatternFile], min_count: u64) -> PatternFile {
    let mut merged: BTreeMap<(usize, String), u64> = BTreeMap::new();
    let mut header = PatternFileHeader::default();
    for f in files {
        for arch in &f.header.arch_names {
            if !header.arch_names.contains(arch) {
                header.arch_names.push(arch.clone());
            }
        }
        for it in &f.header.iterators {
            if !header.iterators.contains(it) {
                header.iterators.push(it.clone());
            }
        }
        for e in &f.entries {
            *merged.entry((e.height, e.text.clone())).or_default() += e.count;
        }
    }
    let entries: Vec<PatternEntry> = merged
        .into_iter()
        .filter(|(_, count)| *count > min_count)
        .enumerate()
        .map(|(id, ((height, text), count))| PatternEntry {
            id: id as u64,
            height,
            count,
            text,
        })
        .collect();
    header.total_templates = entries.iter().map(|e| e.count).sum();
    PatternFile { header, entries }
}

/// Collapses whitespace runs to one space and drops spaces next to
/// parentheses and brackets.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    let mut in_string = false;
    let mut escaped = false;
    for c in text.chars() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        let after_open = matches!(out.chars().last(), Some('(' | '['));
        if pending_space && !out.is_empty() && !after_open && !matches!(c, ')' | ']') {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
        if c == '"' {
            in_string = true;
        }
    }
    out
}

/// One analyzed expression identified by form kind, form name and text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprKey {
    pub kind: String,
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub missing: Vec<ExprKey>,
    pub extra: Vec<ExprKey>,
    /// (original, regenerated) pairs with the same form but different text.
    pub changed: Vec<(ExprKey, ExprKey)>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.changed.is_empty()
    }
}

/// Multiset comparison. Leftovers on both sides that share a form kind and
/// name are reported as changed.
pub fn compare_expressions(original: &[ExprKey], regenerated: &[ExprKey]) -> VerifyReport {
    let mut counts: HashMap<&ExprKey, i64> = HashMap::new();
    for k in original {
        *counts.entry(k).or_default() += 1;
    }
    for k in regenerated {
        *counts.entry(k).or_default() -= 1;
    }
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for k in original.iter().chain(regenerated) {
        if !seen.insert(k) {
            continue;
        }
        let n = counts[k];
        let target = if n > 0 { &mut missing } else { &mut extra };
        for _ in 0..n.unsigned_abs() {
            target.push(k.clone());
        }
    }
    let mut changed = Vec::new();
    let mut still_missing = Vec::new();
    for m in missing {
        if let Some(pos) = extra.iter().position(|e| e.kind == m.kind && e.name == m.name) {
            changed.push((m, extra.remove(pos)));
        } else {
            still_missing.push(m);
        }
    }
    VerifyReport {
        missing: still_missing,
        extra,
        changed,
    }
}

pub fn original_expressions(analysis: &MdAnalysis) -> Vec<ExprKey> {
    analysis
        .bindings
        .iter()
        .zip(&analysis.expressions)
        .map(|(b, text)| ExprKey {
            kind: b.origin.kind.clone(),
            name: b.origin.name.clone(),
            text: normalize_whitespace(text),
        })
        .collect()
}

/// Reads regenerated forms back and keys each by its template text.
pub fn regenerated_expressions(forms: &[String]) -> Result<Vec<ExprKey>, ArchiveError> {
    let source = forms.join("\n");
    let heads = forms
        .iter()
        .filter_map(|f| f.strip_prefix('(')?.split([' ', ')']).next())
        .map(str::to_string)
        .collect();
    let options = ReaderOptions {
        considered_heads: heads,
        resolve_includes: false,
    };
    let parsed = parse_md(&source, "<regenerated>", &options).map_err(|e| ArchiveError::Regenerated(e.to_string()))?;
    parsed
        .iter()
        .map(|form| {
            let vector = extract_template_vector(form).map_err(|e| ArchiveError::Regenerated(e.to_string()))?;
            let template = RtlTemplate::from_vector(vector).map_err(|e| ArchiveError::Regenerated(e.to_string()))?;
            Ok(ExprKey {
                kind: form.kind.head().to_string(),
                name: form.name.clone(),
                text: normalize_whitespace(&template.to_text()),
            })
        })
        .collect()
}

/// Recombines the given archives and compares the result against the
/// analyzed expressions.
pub fn verify_archives(original: &[ExprKey], pattern_text: &str, param_text: &str) -> Result<VerifyReport, ArchiveError> {
    let loaded = read_archives(pattern_text, param_text)?;
    let forms = recombine(&loaded.store, &loaded.bindings)?;
    Ok(compare_expressions(original, &regenerated_expressions(&forms)?))
}

/// Split, recombine and compare in one step.
pub fn verify(analysis: &MdAnalysis) -> Result<VerifyReport, ArchiveError> {
    let (patterns, params) = write_archives(analysis);
    verify_archives(&original_expressions(analysis), &patterns, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, AnalysisOptions};
    use crate::rtl::RtxCodeTable;

    fn analysis(name: &str, src: &str) -> MdAnalysis {
        let forms = parse_md(src, name, &ReaderOptions::default()).unwrap();
        analyze(name, &forms, &RtxCodeTable::default(), &AnalysisOptions::default())
    }

    const THREE: &str = r#"
(define_insn "a" [(set (match_operand:SI 0 "r" "=r") (plus:SI (match_operand:SI 1 "r" "r") (match_operand:SI 2 "i" "")))] "" "add")
(define_insn "b" [(set (match_operand:DI 0 "r" "=r") (plus:DI (match_operand:DI 1 "r" "r") (match_operand:DI 2 "r" "r")))] "" "add")
(define_insn "c" [(set (match_operand:QI 0 "q" "") (plus:QI (match_operand:QI 1 "q" "") (const_int 1)))] "" "inc")
"#;

    #[test]
    fn escaping_round_trips() {
        for s in ["a b", "100%", "x\ny", "%20", "", "tab\there"] {
            assert_eq!(unescape_value(&escape_value(s)).unwrap(), s);
        }
        assert_eq!(escape_value("a b%\n"), "a%20b%25%0A");
        assert!(unescape_value("%zz").is_err());
        assert!(unescape_value("%2").is_err());
    }

    #[test]
    fn three_expression_fixture() {
        let a = analysis("t", THREE);
        let (patterns, params) = write_archives(&a);
        let pf = PatternFile::parse(&patterns).unwrap();
        assert_eq!(pf.entries.len(), 1);
        assert_eq!(pf.entries[0].count, 3);
        assert_eq!(ParamFile::parse(&params).unwrap().records.len(), 3);
    }

    #[test]
    fn empty_analysis_writes_headers_only() {
        let a = analysis("empty", "");
        let (patterns, params) = write_archives(&a);
        assert_eq!(patterns, "# arch: empty\n# total_templates: 0\n");
        assert_eq!(params, "# arch: empty\n");
        assert!(recombine(&a.store, &a.bindings).unwrap().is_empty());
        assert!(verify(&a).unwrap().is_clean());
    }

    #[test]
    fn read_inverts_write() {
        let a = analysis("t", THREE);
        let (patterns, params) = write_archives(&a);
        let loaded = read_archives(&patterns, &params).unwrap();
        assert_eq!(loaded.store, a.store);
        assert_eq!(loaded.bindings, a.bindings);
    }

    #[test]
    fn read_errors() {
        let good = "# arch: x\n# total_templates: 1\n0 1 1 [$arg0]\n";
        assert!(matches!(
            read_archives(good, "5 define_insn \"n\" $arg0=(reg%200)\n"),
            Err(ArchiveError::DanglingPatternId { line: 1, id: 5 })
        ));
        assert!(matches!(
            read_archives("# arch: x\n# total_templates: 1\n0 1\n", ""),
            Err(ArchiveError::MalformedEntry { line: 3, .. })
        ));
        assert!(matches!(read_archives("# total_templates: 0\n", ""), Err(ArchiveError::BadHeader { .. })));
        assert!(matches!(
            read_archives("# arch: x\n# total_templates: 2\n0 1 1 [$arg0]\n", ""),
            Err(ArchiveError::BadHeader { .. })
        ));
        assert!(matches!(
            read_archives("# arch: x\n# total_templates: 1\n0 2 1 [$arg0]\n", ""),
            Err(ArchiveError::MalformedEntry { .. })
        ));
        assert!(matches!(
            read_archives(good, "0 define_insn noquote $arg0=x\n"),
            Err(ArchiveError::MalformedEntry { .. })
        ));
    }

    #[test]
    fn recombine_checks_arity() {
        let a = analysis("t", THREE);
        let mut bindings = a.bindings.clone();
        bindings[1].assignments.pop();
        assert!(matches!(recombine(&a.store, &bindings), Err(ArchiveError::ArityMismatch { index: 1, .. })));
    }

    #[test]
    fn recombined_forms_reproduce_templates() {
        let a = analysis("t", THREE);
        let forms = recombine(&a.store, &a.bindings).unwrap();
        assert!(forms[0].starts_with("(define_insn \"a\" [(set (match_operand:SI 0 \"r\" \"=r\")"));
        let report = verify(&a).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn corrupted_record_is_reported_as_changed() {
        let a = analysis("t", THREE);
        let (patterns, params) = write_archives(&a);
        let corrupted = params.replacen("$mode0=DI", "$mode0=TI", 1);
        assert_ne!(corrupted, params);
        let report = verify_archives(&original_expressions(&a), &patterns, &corrupted).unwrap();
        assert_eq!((report.missing.len(), report.extra.len(), report.changed.len()), (0, 0, 1));
    }

    #[test]
    fn merge_threshold_is_strict() {
        let a = analysis("a", THREE);
        let b = analysis("b", r#"(define_insn "r" [(return)] "" "")"#);
        let fa = PatternFile::from_store("a", &a.store, &[]);
        let fb = PatternFile::from_store("b", &b.store, &[]);

        let doubled = merge(&[fa.clone(), fa.clone()], 0);
        assert_eq!(doubled.entries.len(), 1);
        assert_eq!(doubled.entries[0].count, 6);
        assert_eq!(doubled.header.arch_names, ["a"]);

        let both = merge(&[fa.clone(), fb.clone()], 0);
        assert_eq!(both.entries.len(), 2);
        assert_eq!(both.header.arch_names, ["a", "b"]);
        assert_eq!(both.header.total_templates, 4);
        assert_eq!(merge(&[fa.clone(), fb.clone()], 1).entries.len(), 1);
        assert!(merge(&[fa, fb], 3).entries.is_empty());
        assert!(PatternFile::parse(&both.to_text()).is_ok());
    }

    #[test]
    fn whitespace_normalization() {
        assert_eq!(normalize_whitespace("( set  (reg 0)\n\t (reg 1) )"), "(set (reg 0) (reg 1))");
        assert_eq!(normalize_whitespace("[ (a \"x  y\") ]"), "[(a \"x  y\")]");
    }
}
