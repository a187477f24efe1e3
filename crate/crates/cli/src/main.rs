//! `mdpattern`: pattern statistics and similarity for GCC machine descriptions.

mod commands;
mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mdpattern_core::similarity::Metric;
use mdpattern_core::AnalysisOptions;

use commands::{AnalysisSettings, CliError};
use report::Report;

#[derive(Parser)]
#[command(name = "mdpattern", version, about = "Pattern statistics and similarity for GCC machine descriptions")]
struct Cli {
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Pattern,
    Expression,
    Coverage,
    All,
}

impl MetricArg {
    fn metrics(self) -> Vec<Metric> {
        match self {
            MetricArg::Pattern => vec![Metric::Pattern],
            MetricArg::Expression => vec![Metric::Expression],
            MetricArg::Coverage => vec![Metric::Coverage],
            MetricArg::All => vec![Metric::Pattern, Metric::Expression, Metric::Coverage],
        }
    }
}

#[derive(Args)]
struct AnalysisArgs {
    /// Do not follow `(include ...)` forms.
    #[arg(long)]
    no_includes: bool,
    /// Comma-separated form heads to analyze instead of the defaults.
    #[arg(long, value_delimiter = ',')]
    heads: Option<Vec<String>>,
    /// Expand code iterators into one expression per member code.
    #[arg(long)]
    expand_iterators: bool,
    /// Also count operator sub-patterns (reported on stderr).
    #[arg(long)]
    count_subpatterns: bool,
    /// Turn non-commutative binary arithmetic operators into holes.
    #[arg(long)]
    no_bin_arith: bool,
    /// RTX code table overrides (`code class flag` per line).
    #[arg(long, value_name = "FILE")]
    code_table: Option<PathBuf>,
}

impl AnalysisArgs {
    fn settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            options: AnalysisOptions {
                bin_arith_in_patterns: !self.no_bin_arith,
                expand_code_iterators: self.expand_iterators,
                count_subpatterns: self.count_subpatterns,
            },
            no_includes: self.no_includes,
            heads: self.heads.clone(),
            code_table: self.code_table.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Expressions, unique patterns and their ratio per architecture.
    Stats {
        manifest: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Similarity between two architectures of a manifest.
    Compare {
        manifest: PathBuf,
        arch_a: String,
        arch_b: String,
        #[arg(long, value_enum, default_value_t = MetricArg::All)]
        metric: MetricArg,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// All-pairs similarity tables.
    Matrix {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::All)]
        metric: MetricArg,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Write the pattern and parameter archives of one manifest architecture.
    Extract {
        manifest: PathBuf,
        arch: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Write the pattern and parameter archives of a single MD file.
    Split {
        md_file: PathBuf,
        /// Architecture name; defaults to the file stem.
        #[arg(long)]
        arch: Option<String>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Regenerate define forms from a pattern and a parameter archive.
    Recombine {
        patterns: PathBuf,
        params: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Union pattern archives, keeping patterns seen more than --min-count times.
    Merge {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        min_count: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Split and recombine every architecture and compare with the original.
    Verify {
        manifest: PathBuf,
        /// Restrict to these architectures.
        archs: Vec<String>,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
}

fn render(reports: &[Report], format: Format) -> String {
    match format {
        Format::Text => reports.iter().map(Report::to_text).collect::<Vec<_>>().join("\n"),
        Format::Json if reports.len() == 1 => reports[0].to_json() + "\n",
        Format::Json => serde_json::to_string_pretty(reports).expect("reports always serialize") + "\n",
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    match cli.command {
        Command::Stats { manifest, analysis } => {
            let m = commands::load_manifest(&manifest)?;
            let (reports, failure) = commands::cmd_stats(&m, &analysis.settings())?;
            print!("{}", render(&reports, format));
            failure.map_or(Ok(()), Err)
        }
        Command::Compare {
            manifest,
            arch_a,
            arch_b,
            metric,
            analysis,
        } => {
            let m = commands::load_manifest(&manifest)?;
            let reports = commands::cmd_compare(&m, &arch_a, &arch_b, &metric.metrics(), &analysis.settings())?;
            print!("{}", render(&reports, format));
            Ok(())
        }
        Command::Matrix { manifest, metric, analysis } => {
            let m = commands::load_manifest(&manifest)?;
            let reports = commands::cmd_matrix(&m, &metric.metrics(), &analysis.settings())?;
            print!("{}", render(&reports, format));
            Ok(())
        }
        Command::Extract {
            manifest,
            arch,
            out,
            analysis,
        } => {
            let m = commands::load_manifest(&manifest)?;
            let (p, q) = commands::cmd_extract(&m, &arch, &out, &analysis.settings())?;
            eprintln!("wrote {} and {}", p.display(), q.display());
            Ok(())
        }
        Command::Split {
            md_file,
            arch,
            out,
            analysis,
        } => {
            let arch = arch.unwrap_or_else(|| md_file.file_stem().map_or("md".into(), |s| s.to_string_lossy().into_owned()));
            let (p, q) = commands::cmd_split(&md_file, &arch, &out, &analysis.settings())?;
            eprintln!("wrote {} and {}", p.display(), q.display());
            Ok(())
        }
        Command::Recombine { patterns, params, out } => emit(&commands::cmd_recombine(&patterns, &params)?, out.as_deref()),
        Command::Merge { files, min_count, out } => emit(&commands::cmd_merge(&files, min_count)?, out.as_deref()),
        Command::Verify {
            manifest,
            archs,
            analysis,
        } => {
            let m = commands::load_manifest(&manifest)?;
            let (report, failure) = commands::cmd_verify(&m, &archs, &analysis.settings())?;
            print!("{}", render(&[report], format));
            failure.map_or(Ok(()), Err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
