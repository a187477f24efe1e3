use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use mdpattern_core::archive::{self, PatternFile};
use mdpattern_core::similarity::{similarity_matrix, Metric};
use mdpattern_core::{analyze, load_md_file, AnalysisOptions, MdAnalysis, ReaderOptions, RtxCodeTable};

use crate::manifest::{CorpusManifest, ManifestEntry};
use crate::report::{Report, VerifyRow};

pub const CODE_TABLE_ENV: &str = "MDPATTERN_CODE_TABLE";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

/// Settings shared by every command that analyzes MD sources.
#[derive(Debug, Clone, Default)]
pub struct AnalysisSettings {
    pub options: AnalysisOptions,
    pub no_includes: bool,
    pub heads: Option<Vec<String>>,
    pub code_table: Option<PathBuf>,
}

impl AnalysisSettings {
    fn reader_options(&self, entry: &ManifestEntry) -> ReaderOptions {
        let mut options = entry.reader_options();
        if self.no_includes {
            options.resolve_includes = false;
        }
        if let Some(heads) = &self.heads {
            options.considered_heads = heads.iter().cloned().collect();
        }
        options
    }

    /// The built-in code table, with overrides from `--code-table` or the
    /// environment applied on top.
    pub fn code_table(&self) -> Result<RtxCodeTable, CliError> {
        let mut table = RtxCodeTable::default();
        let path = self
            .code_table
            .clone()
            .or_else(|| std::env::var_os(CODE_TABLE_ENV).map(PathBuf::from));
        if let Some(path) = path {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            table
                .apply_overrides(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        Ok(table)
    }
}

fn analyze_entry(entry: &ManifestEntry, settings: &AnalysisSettings, table: &RtxCodeTable) -> Result<MdAnalysis, String> {
    let forms = load_md_file(&entry.path, &settings.reader_options(entry)).map_err(|e| format!("{}: {e}", entry.arch))?;
    Ok(analyze(&entry.arch, &forms, table, &settings.options))
}

/// Analyzes the manifest's architectures in parallel. Architectures that
/// fail to parse are reported on stderr and left out; the error is returned
/// alongside the successful analyses.
pub fn analyze_manifest(
    manifest: &CorpusManifest,
    settings: &AnalysisSettings,
) -> Result<(Vec<MdAnalysis>, Option<CliError>), CliError> {
    let table = settings.code_table()?;
    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| analyze_entry(e, settings, &table))
        .collect();
    let mut analyses = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(a) => {
                for s in &a.diagnostics.skipped {
                    eprintln!("warning: {}: skipped {:?} at {}: {}", a.arch_name, s.name, s.location, s.reason);
                }
                analyses.push(a);
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                failures.push(msg);
            }
        }
    }
    let failure = (!failures.is_empty()).then(|| CliError::Parse(format!("{} architecture(s) failed to parse", failures.len())));
    Ok((analyses, failure))
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest, CliError> {
    CorpusManifest::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn select(manifest: &CorpusManifest, archs: &[String]) -> Result<CorpusManifest, CliError> {
    let entries = archs
        .iter()
        .map(|a| {
            manifest
                .get(a)
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("architecture `{a}` is not in the manifest")))
        })
        .collect::<Result<_, _>>()?;
    Ok(CorpusManifest { entries })
}

fn all_or_fail(manifest: &CorpusManifest, settings: &AnalysisSettings) -> Result<Vec<MdAnalysis>, CliError> {
    match analyze_manifest(manifest, settings)? {
        (a, None) => Ok(a),
        (_, Some(e)) => Err(e),
    }
}

pub fn cmd_stats(manifest: &CorpusManifest, settings: &AnalysisSettings) -> Result<(Vec<Report>, Option<CliError>), CliError> {
    let (analyses, failure) = analyze_manifest(manifest, settings)?;
    let reports = vec![Report::stats(&analyses)];
    if settings.options.count_subpatterns {
        for a in &analyses {
            if let Some(subs) = &a.subpatterns {
                eprintln!("{}: {} distinct operator sub-patterns", a.arch_name, subs.len());
            }
        }
    }
    Ok((reports, failure))
}

pub fn cmd_compare(
    manifest: &CorpusManifest,
    arch_a: &str,
    arch_b: &str,
    metrics: &[Metric],
    settings: &AnalysisSettings,
) -> Result<Vec<Report>, CliError> {
    let pair = select(manifest, &[arch_a.to_string(), arch_b.to_string()])?;
    let analyses = all_or_fail(&pair, settings)?;
    Ok(metrics.iter().map(|m| Report::matrix(&similarity_matrix(&analyses, *m))).collect())
}

pub fn cmd_matrix(manifest: &CorpusManifest, metrics: &[Metric], settings: &AnalysisSettings) -> Result<Vec<Report>, CliError> {
    let analyses = all_or_fail(manifest, settings)?;
    Ok(metrics.iter().map(|m| Report::matrix(&similarity_matrix(&analyses, *m))).collect())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Writes `<arch>.patterns` and `<arch>.params` into `out_dir`.
pub fn write_split(analysis: &MdAnalysis, out_dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Usage(format!("{}: {e}", out_dir.display())))?;
    let (patterns, params) = archive::write_archives(analysis);
    let pattern_path = out_dir.join(format!("{}.patterns", analysis.arch_name));
    let param_path = out_dir.join(format!("{}.params", analysis.arch_name));
    write_file(&pattern_path, &patterns)?;
    write_file(&param_path, &params)?;
    Ok((pattern_path, param_path))
}

pub fn cmd_extract(manifest: &CorpusManifest, arch: &str, out_dir: &Path, settings: &AnalysisSettings) -> Result<(PathBuf, PathBuf), CliError> {
    let one = select(manifest, &[arch.to_string()])?;
    let analyses = all_or_fail(&one, settings)?;
    write_split(&analyses[0], out_dir)
}

pub fn cmd_split(md_file: &Path, arch: &str, out_dir: &Path, settings: &AnalysisSettings) -> Result<(PathBuf, PathBuf), CliError> {
    if !md_file.is_file() {
        return Err(CliError::Usage(format!("{} does not exist", md_file.display())));
    }
    let entry = ManifestEntry {
        arch: arch.to_string(),
        path: md_file.to_path_buf(),
        resolve_includes: true,
        heads: None,
    };
    let analysis = analyze_entry(&entry, settings, &settings.code_table()?).map_err(CliError::Parse)?;
    write_split(&analysis, out_dir)
}

pub fn cmd_recombine(pattern_file: &Path, param_file: &Path) -> Result<String, CliError> {
    let loaded = archive::read_archives(&read_file(pattern_file)?, &read_file(param_file)?).map_err(|e| CliError::Parse(e.to_string()))?;
    let forms = archive::recombine(&loaded.store, &loaded.bindings).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut out = String::new();
    for f in forms {
        out.push_str(&f);
        out.push_str("\n\n");
    }
    Ok(out)
}

pub fn cmd_merge(files: &[PathBuf], min_count: u64) -> Result<String, CliError> {
    let parsed = files
        .iter()
        .map(|p| PatternFile::parse(&read_file(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(archive::merge(&parsed, min_count).to_text())
}

/// Splits, recombines and compares each architecture. Fails with a
/// verification error when any expression is missing, extra or changed.
pub fn cmd_verify(manifest: &CorpusManifest, archs: &[String], settings: &AnalysisSettings) -> Result<(Report, Option<CliError>), CliError> {
    let chosen = if archs.is_empty() { manifest.clone() } else { select(manifest, archs)? };
    let (analyses, mut failure) = analyze_manifest(&chosen, settings)?;
    let mut rows = Vec::new();
    let mut dirty = 0;
    for a in &analyses {
        let r = archive::verify(a).map_err(|e| CliError::Parse(format!("{}: {e}", a.arch_name)))?;
        if !r.is_clean() {
            dirty += 1;
            for (orig, regen) in r.changed.iter().take(5) {
                eprintln!("{}: {} {:?} changed:\n  - {}\n  + {}", a.arch_name, orig.kind, orig.name, orig.text, regen.text);
            }
        }
        rows.push(VerifyRow {
            arch: a.arch_name.clone(),
            expressions: a.expr_count(),
            missing: r.missing.len() as u64,
            extra: r.extra.len() as u64,
            changed: r.changed.len() as u64,
        });
    }
    if dirty > 0 {
        failure = Some(CliError::Verify(format!("{dirty} architecture(s) did not round-trip")));
    }
    Ok((Report::verify(rows), failure))
}
