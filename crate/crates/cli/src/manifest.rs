//! Corpus manifests.
//!
//! One architecture per line:
//!
//! ```text
//! # name = root-file [flags]
//! arm  = gcc-4.6.1/gcc/config/arm/arm.md
//! vax  = gcc-4.6.1/gcc/config/vax/vax.md no-includes
//! mips = gcc-4.6.1/gcc/config/mips/mips.md heads=define_insn,define_expand
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mdpattern_core::ReaderOptions;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
    #[error("line {line}: expected `name = path [flags]`")]
    Malformed { line: usize },
    #[error("line {line}: unknown flag `{flag}`")]
    UnknownFlag { line: usize, flag: String },
    #[error("line {line}: architecture `{name}` listed twice")]
    DuplicateArch { line: usize, name: String },
    #[error("line {line}: {} does not exist", .path.display())]
    MissingFile { line: usize, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub arch: String,
    pub path: PathBuf,
    pub resolve_includes: bool,
    pub heads: Option<BTreeSet<String>>,
}

impl ManifestEntry {
    pub fn reader_options(&self) -> ReaderOptions {
        let mut options = ReaderOptions {
            resolve_includes: self.resolve_includes,
            ..ReaderOptions::default()
        };
        if let Some(heads) = &self.heads {
            options.considered_heads = heads.clone();
        }
        options
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<CorpusManifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        CorpusManifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<CorpusManifest, ManifestError> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (name, rest) = trimmed.split_once('=').ok_or(ManifestError::Malformed { line })?;
            let name = name.trim();
            let mut fields = rest.split_whitespace();
            let (false, Some(file)) = (name.is_empty() || name.contains(char::is_whitespace), fields.next()) else {
                return Err(ManifestError::Malformed { line });
            };
            let mut entry = ManifestEntry {
                arch: name.to_string(),
                path: base_dir.join(file),
                resolve_includes: true,
                heads: None,
            };
            for flag in fields {
                match flag {
                    "no-includes" => entry.resolve_includes = false,
                    "includes" => entry.resolve_includes = true,
                    _ => match flag.strip_prefix("heads=") {
                        Some(list) => {
                            entry.heads = Some(list.split(',').filter(|h| !h.is_empty()).map(str::to_string).collect())
                        }
                        None => {
                            return Err(ManifestError::UnknownFlag {
                                line,
                                flag: flag.to_string(),
                            })
                        }
                    },
                }
            }
            if entries.iter().any(|e| e.arch == entry.arch) {
                return Err(ManifestError::DuplicateArch {
                    line,
                    name: entry.arch,
                });
            }
            if !entry.path.is_file() {
                return Err(ManifestError::MissingFile { line, path: entry.path });
            }
            entries.push(entry);
        }
        Ok(CorpusManifest { entries })
    }

    pub fn get(&self, arch: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.arch == arch)
    }
}
