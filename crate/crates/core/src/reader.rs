//! Machine-description reader.
//!
//! MD files are Lisp-like: parenthesised lists, bracket vectors, symbols,
//! integers, double-quoted strings and `{ ... }` blocks of embedded C code.
//! Comments start with `;` and run to end of line; `/* ... */` is also
//! accepted.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

/// Position of a token or form in its source file. Lines and columns are
/// 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(file: impl Into<Arc<str>>, line: u32, column: u32) -> Self {
        Location {
            file: file.into(),
            line,
            column,
        }
    }

    /// A placeholder for values built in memory rather than read from a file.
    pub fn synthetic() -> Self {
        Location::new("<synthetic>", 0, 0)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReadError {
    #[error("{0}: unterminated string literal")]
    UnterminatedString(Location),
    #[error("{0}: unterminated brace block")]
    UnterminatedBlock(Location),
    #[error("{0}: unterminated comment")]
    UnterminatedComment(Location),
    #[error("{0}: unbalanced parenthesis or bracket")]
    UnbalancedParen(Location),
    #[error("{location}: unexpected {found}")]
    UnexpectedToken { location: Location, found: String },
    #[error("{location}: cannot read {path}: {message}")]
    Io {
        location: Location,
        path: PathBuf,
        message: String,
    },
    #[error("{location}: included file not found: {path}")]
    MissingInclude { location: Location, path: PathBuf },
    #[error("include cycle: {}", .chain.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" -> "))]
    IncludeCycle { chain: Vec<PathBuf> },
    #[error("{0}: form has no RTL template vector")]
    MissingTemplateVector(Location),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Symbol(String),
    Integer(i64),
    Str(String),
    Brace(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub location: Location,
}

/// Decodes MD source bytes. Every byte maps to the code point of the same
/// value, so arbitrary 8-bit input is accepted.
pub fn decode_source(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    file: &'a Arc<str>,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn location(&self) -> Location {
        Location {
            file: Arc::clone(self.file),
            line: self.line,
            column: self.column,
        }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | '"' | ';' | '{' | '}')
}

fn parse_integer(text: &str) -> Option<i64> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Splits MD source into tokens.
pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>, ReadError> {
    let file: Arc<str> = Arc::from(file);
    let mut cur = Cursor {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        file: &file,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let location = cur.location();
        match c {
            _ if c.is_whitespace() => {
                cur.bump();
            }
            ';' => {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '/' if cur.peek_at(1) == Some('*') => skip_block_comment(&mut cur, location)?,
            '(' | ')' | '[' | ']' => {
                cur.bump();
                let kind = match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '[' => TokenKind::LBracket,
                    _ => TokenKind::RBracket,
                };
                tokens.push(Token { kind, location });
            }
            '"' => {
                cur.bump();
                let text = read_string(&mut cur, location.clone())?;
                tokens.push(Token {
                    kind: TokenKind::Str(text),
                    location,
                });
            }
            '{' => {
                let text = read_brace_block(&mut cur, location.clone())?;
                tokens.push(Token {
                    kind: TokenKind::Brace(text),
                    location,
                });
            }
            '}' => {
                return Err(ReadError::UnexpectedToken {
                    location,
                    found: "'}'".to_string(),
                })
            }
            _ => {
                let mut text = String::new();
                while let Some(c) = cur.peek() {
                    if is_delimiter(c) {
                        break;
                    }
                    text.push(c);
                    cur.bump();
                }
                let kind = match parse_integer(&text) {
                    Some(v) => TokenKind::Integer(v),
                    None => TokenKind::Symbol(text),
                };
                tokens.push(Token { kind, location });
            }
        }
    }
    Ok(tokens)
}

fn skip_block_comment(cur: &mut Cursor<'_>, start: Location) -> Result<(), ReadError> {
    cur.bump();
    cur.bump();
    loop {
        match cur.bump() {
            None => return Err(ReadError::UnterminatedComment(start)),
            Some('*') if cur.peek() == Some('/') => {
                cur.bump();
                return Ok(());
            }
            Some(_) => {}
        }
    }
}

// The opening quote has been consumed.
fn read_string(cur: &mut Cursor<'_>, start: Location) -> Result<String, ReadError> {
    let mut text = String::new();
    loop {
        match cur.bump() {
            None => return Err(ReadError::UnterminatedString(start)),
            Some('"') => return Ok(text),
            Some('\\') => match cur.bump() {
                None => return Err(ReadError::UnterminatedString(start)),
                Some('n') => text.push('\n'),
                Some('t') => text.push('\t'),
                Some('"') => text.push('"'),
                Some('\\') => text.push('\\'),
                Some(other) => {
                    text.push('\\');
                    text.push(other);
                }
            },
            Some(c) => text.push(c),
        }
    }
}

// Captures `{ ... }` verbatim, braces included. C string and character
// literals and comments inside the block do not affect brace balancing.
fn read_brace_block(cur: &mut Cursor<'_>, start: Location) -> Result<String, ReadError> {
    let mut text = String::new();
    let mut depth = 0usize;
    let unterminated = || ReadError::UnterminatedBlock(start.clone());
    loop {
        let c = cur.bump().ok_or_else(unterminated)?;
        text.push(c);
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok(text);
                }
            }
            '"' | '\'' => loop {
                let d = cur.bump().ok_or_else(unterminated)?;
                text.push(d);
                if d == '\\' {
                    text.push(cur.bump().ok_or_else(unterminated)?);
                } else if d == c || (d == '\n' && c == '\'') {
                    break;
                }
            },
            '/' if cur.peek() == Some('*') => {
                text.push(cur.bump().unwrap());
                loop {
                    let d = cur.bump().ok_or_else(unterminated)?;
                    text.push(d);
                    if d == '*' && cur.peek() == Some('/') {
                        text.push(cur.bump().unwrap());
                        break;
                    }
                }
            }
            '/' if cur.peek() == Some('/') => {
                while let Some(d) = cur.peek() {
                    if d == '\n' {
                        break;
                    }
                    text.push(d);
                    cur.bump();
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone)]
pub enum SExprKind {
    Symbol(String),
    Integer(i64),
    StringLit(String),
    BraceBlock(String),
    List(Vec<SExpr>),
    Vector(Vec<SExpr>),
}

/// A parsed MD datum. Equality is structural and ignores the location.
#[derive(Debug, Clone)]
pub struct SExpr {
    pub kind: SExprKind,
    pub location: Location,
}

impl PartialEq for SExprKind {
    fn eq(&self, other: &Self) -> bool {
        use SExprKind::*;
        match (self, other) {
            (Symbol(a), Symbol(b)) => a == b,
            (Integer(a), Integer(b)) => a == b,
            (StringLit(a), StringLit(b)) => a == b,
            (BraceBlock(a), BraceBlock(b)) => a == b,
            (List(a), List(b)) | (Vector(a), Vector(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for SExprKind {}

impl PartialEq for SExpr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for SExpr {}

impl SExpr {
    pub fn new(kind: SExprKind) -> Self {
        SExpr {
            kind,
            location: Location::synthetic(),
        }
    }

    pub fn symbol(s: impl Into<String>) -> Self {
        SExpr::new(SExprKind::Symbol(s.into()))
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match &self.kind {
            SExprKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match &self.kind {
            SExprKind::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[SExpr]> {
        match &self.kind {
            SExprKind::Vector(items) => Some(items),
            _ => None,
        }
    }

    /// Head symbol of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_symbol()
    }

    /// Single-line rendering with one space between items.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    pub fn write_text(&self, out: &mut String) {
        match &self.kind {
            SExprKind::Symbol(s) => out.push_str(s),
            SExprKind::Integer(v) => out.push_str(&v.to_string()),
            SExprKind::StringLit(s) => write_string_literal(s, out),
            SExprKind::BraceBlock(s) => out.push_str(s),
            SExprKind::List(items) => write_seq('(', ')', items, out),
            SExprKind::Vector(items) => write_seq('[', ']', items, out),
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn write_seq(open: char, close: char, items: &[SExpr], out: &mut String) {
    out.push(open);
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        item.write_text(out);
    }
    out.push(close);
}

/// Renders `text` as an MD string literal, escaping quotes, backslashes,
/// newlines and tabs.
pub fn write_string_literal(text: &str, out: &mut String) {
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            _ => out.push(c),
        }
    }
    out.push('"');
}

/// Parses a token stream into a sequence of data.
pub fn parse_sexprs(tokens: &[Token]) -> Result<Vec<SExpr>, ReadError> {
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < tokens.len() {
        out.push(parse_one(tokens, &mut pos)?);
    }
    Ok(out)
}

/// Tokenizes and parses a source text.
pub fn parse_str(source: &str, file: &str) -> Result<Vec<SExpr>, ReadError> {
    parse_sexprs(&tokenize(source, file)?)
}

fn parse_one(tokens: &[Token], pos: &mut usize) -> Result<SExpr, ReadError> {
    let tok = &tokens[*pos];
    *pos += 1;
    let location = tok.location.clone();
    let kind = match &tok.kind {
        TokenKind::Symbol(s) => SExprKind::Symbol(s.clone()),
        TokenKind::Integer(v) => SExprKind::Integer(*v),
        TokenKind::Str(s) => SExprKind::StringLit(s.clone()),
        TokenKind::Brace(s) => SExprKind::BraceBlock(s.clone()),
        TokenKind::LParen | TokenKind::LBracket => {
            let is_list = tok.kind == TokenKind::LParen;
            let mut items = Vec::new();
            loop {
                let Some(next) = tokens.get(*pos) else {
                    return Err(ReadError::UnbalancedParen(location));
                };
                match &next.kind {
                    TokenKind::RParen | TokenKind::RBracket => {
                        if (next.kind == TokenKind::RParen) != is_list {
                            return Err(ReadError::UnexpectedToken {
                                location: next.location.clone(),
                                found: describe(&next.kind),
                            });
                        }
                        *pos += 1;
                        break;
                    }
                    _ => items.push(parse_one(tokens, pos)?),
                }
            }
            if is_list {
                SExprKind::List(items)
            } else {
                SExprKind::Vector(items)
            }
        }
        TokenKind::RParen | TokenKind::RBracket => return Err(ReadError::UnbalancedParen(location)),
    };
    Ok(SExpr { kind, location })
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::LParen => "'('".into(),
        TokenKind::RParen => "')'".into(),
        TokenKind::LBracket => "'['".into(),
        TokenKind::RBracket => "']'".into(),
        TokenKind::Symbol(s) => format!("symbol `{s}`"),
        TokenKind::Integer(v) => format!("integer {v}"),
        TokenKind::Str(_) => "string literal".into(),
        TokenKind::Brace(_) => "brace block".into(),
    }
}

pub const DEFAULT_CONSIDERED_HEADS: [&str; 4] = [
    "define_insn",
    "define_expand",
    "define_insn_and_split",
    "define_split",
];

pub const ITERATOR_HEADS: [&str; 4] = [
    "define_mode_iterator",
    "define_code_iterator",
    "define_mode_attr",
    "define_code_attr",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FormKind {
    ConsideredTemplate(String),
    IteratorDef(String),
    Include,
    Ignored(String),
}

impl FormKind {
    pub fn head(&self) -> &str {
        match self {
            FormKind::ConsideredTemplate(h) | FormKind::IteratorDef(h) | FormKind::Ignored(h) => h,
            FormKind::Include => "include",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopLevelForm {
    pub kind: FormKind,
    /// First string argument of the define, or empty.
    pub name: String,
    pub body: SExpr,
    pub origin: Location,
}

/// Reader configuration. Which define heads count as RTL templates and
/// whether `include` directives are followed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReaderOptions {
    pub considered_heads: BTreeSet<String>,
    pub resolve_includes: bool,
}

impl Default for ReaderOptions {
    fn default() -> Self {
        ReaderOptions {
            considered_heads: DEFAULT_CONSIDERED_HEADS.iter().map(|s| s.to_string()).collect(),
            resolve_includes: true,
        }
    }
}

impl ReaderOptions {
    pub fn classify(&self, head: &str) -> FormKind {
        if self.considered_heads.contains(head) {
            FormKind::ConsideredTemplate(head.to_string())
        } else if ITERATOR_HEADS.contains(&head) {
            FormKind::IteratorDef(head.to_string())
        } else if head == "include" {
            FormKind::Include
        } else {
            FormKind::Ignored(head.to_string())
        }
    }
}

/// Parses MD source into top-level forms.
pub fn parse_md(source: &str, origin: &str, options: &ReaderOptions) -> Result<Vec<TopLevelForm>, ReadError> {
    parse_str(source, origin)?
        .into_iter()
        .map(|body| {
            let Some(items) = body.as_list() else {
                return Err(ReadError::UnexpectedToken {
                    location: body.location.clone(),
                    found: "top-level datum that is not a list".into(),
                });
            };
            let head = items.first().and_then(SExpr::as_symbol).unwrap_or("");
            let name = match items.get(1).map(|s| &s.kind) {
                Some(SExprKind::StringLit(s)) => s.clone(),
                _ => String::new(),
            };
            Ok(TopLevelForm {
                kind: options.classify(head),
                name,
                origin: body.location.clone(),
                body,
            })
        })
        .collect()
}

fn read_file(path: &Path, location: &Location) -> Result<String, ReadError> {
    std::fs::read(path).map(|b| decode_source(&b)).map_err(|e| ReadError::Io {
        location: location.clone(),
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads and parses an MD file, following includes when enabled.
pub fn load_md_file(path: &Path, options: &ReaderOptions) -> Result<Vec<TopLevelForm>, ReadError> {
    let source = read_file(path, &Location::new(path.display().to_string(), 0, 0))?;
    let forms = parse_md(&source, &path.display().to_string(), options)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let root = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    let mut stack = vec![root];
    expand_includes(forms, base, options, &mut stack)
}

/// Replaces `include` forms by the contents of the named files, resolved
/// against `base_dir`. When `options.resolve_includes` is off the include
/// forms are kept and reclassified as ignored.
pub fn resolve_includes(
    forms: Vec<TopLevelForm>,
    base_dir: &Path,
    options: &ReaderOptions,
) -> Result<Vec<TopLevelForm>, ReadError> {
    let mut stack = Vec::new();
    if let Some(first) = forms.first() {
        if let Ok(p) = Path::new(&*first.origin.file).canonicalize() {
            stack.push(p);
        }
    }
    expand_includes(forms, base_dir, options, &mut stack)
}

fn expand_includes(
    forms: Vec<TopLevelForm>,
    base_dir: &Path,
    options: &ReaderOptions,
    stack: &mut Vec<PathBuf>,
) -> Result<Vec<TopLevelForm>, ReadError> {
    let mut out = Vec::with_capacity(forms.len());
    for mut form in forms {
        if form.kind != FormKind::Include {
            out.push(form);
            continue;
        }
        if !options.resolve_includes {
            form.kind = FormKind::Ignored("include".into());
            out.push(form);
            continue;
        }
        let target = base_dir.join(&form.name);
        if !target.is_file() {
            return Err(ReadError::MissingInclude {
                location: form.origin.clone(),
                path: target,
            });
        }
        let canonical = target.canonicalize().unwrap_or_else(|_| target.clone());
        if stack.contains(&canonical) {
            let mut chain = stack.clone();
            chain.push(canonical);
            return Err(ReadError::IncludeCycle { chain });
        }
        let source = read_file(&target, &form.origin)?;
        let nested = parse_md(&source, &target.display().to_string(), options)?;
        let nested_base = target.parent().unwrap_or(base_dir).to_path_buf();
        stack.push(canonical);
        out.extend(expand_includes(nested, &nested_base, options, stack)?);
        stack.pop();
    }
    Ok(out)
}

/// The RTL template of a considered define: its first bracket vector.
pub fn extract_template_vector(form: &TopLevelForm) -> Result<&[SExpr], ReadError> {
    form.body
        .as_list()
        .into_iter()
        .flatten()
        .skip(1)
        .find_map(SExpr::as_vector)
        .ok_or_else(|| ReadError::MissingTemplateVector(form.origin.clone()))
}
