//! The `fcs` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 numerical failure,
//! 4 split certificate failed.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fcs_core::certify::{detailed_balance, full_report, purity_certificate, PurityCertificate, ReportParams, SplitVerdict};
use fcs_core::io::{emit_report, examples_catalog, parse_observable, report_value, ReportFormat, ReportHeader, SystemFile, CATALOG_NAMES, SCHEMA_VERSION};
use fcs_core::modular::ModularData;
use fcs_core::state::{expectation, two_point, window_operator_norm, WindowNorm};
use fcs_core::transfer::{build_transfer, gauge_group_detect, spectral_report, GaugeGroup, SpectralReport};
use fcs_core::{CanonicalSystem, Error, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fcs", version, about = "Finitely correlated spin-chain states: analysis and certificates")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TolArgs {
    /// Bound on ‖Σ v v* − I‖.
    #[arg(long, env = "TOL_CUNTZ", default_value_t = 1e-9, global = true)]
    tol_cuntz: f64,
    /// Eigenvalue clustering tolerance.
    #[arg(long, env = "TOL_SPECTRAL", default_value_t = 1e-8, global = true)]
    tol_spectral: f64,
    /// Comparison tolerance for derived identities.
    #[arg(long, env = "TOL_COMPARE", default_value_t = 1e-9, global = true)]
    tol_compare: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances { cuntz: self.tol_cuntz, spectral: self.tol_spectral, compare: self.tol_compare }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a system file parses and satisfies Σ v v* = I.
    Validate { file: PathBuf },
    /// Spectral and symmetry analysis.
    Analyze {
        file: PathBuf,
        /// Longest word used by the gauge-group detector.
        #[arg(long, default_value_t = 4)]
        max_word_len: usize,
        /// Window size up to which reality and lattice symmetry are checked.
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Two-point function ω(Q₁ θ(Q₂)) for gaps 0..=gap-max.
    Correlations {
        file: PathBuf,
        #[arg(long)]
        obs: String,
        /// Second observable; defaults to --obs.
        #[arg(long)]
        obs2: Option<String>,
        #[arg(long, default_value_t = 10)]
        gap_max: usize,
    },
    /// Full certificate report with the split bound table.
    Certify {
        file: PathBuf,
        /// Half-width of the two-sided windows in the split check.
        #[arg(long, default_value_t = 2)]
        window: usize,
        /// Largest distance k from the bond in the split check.
        #[arg(long, default_value_t = 6)]
        gap_max: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        reflection_window: usize,
        #[arg(long, default_value_t = 4)]
        max_word_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a catalog example as a system file.
    Examples {
        /// aklt, neel_flip, product_pure, ghz_mixture, markov_chain or random_ergodic:SEED.
        #[arg(long)]
        name: Option<String>,
        /// List the catalog instead.
        #[arg(long)]
        list: bool,
    },
    /// Operator norm of a window observable.
    Norm {
        file: PathBuf,
        #[arg(long)]
        obs: String,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ShapeMismatch(_)
        | Error::CuntzRelationViolated { .. }
        | Error::LetterOutOfRange { .. }
        | Error::LengthMismatch { .. }
        | Error::SizeCapExceeded { .. }
        | Error::OverlapError(_)
        | Error::ParseError { .. }
        | Error::UnknownExample(_)
        | Error::Io(_) => EXIT_INVALID,
        Error::SupportCompressionBrokeCuntz { .. }
        | Error::RhoSingular { .. }
        | Error::NumericalFailure(_)
        | Error::AlphaIsOne { .. }
        | Error::NotDetailedBalance => EXIT_NUMERICAL,
    }
}

/// `NOT_APPLICABLE` is a result, not a failure.
pub fn verdict_exit_code(verdict: &SplitVerdict) -> i32 {
    match verdict {
        SplitVerdict::Failed => EXIT_FAILED,
        SplitVerdict::Certified | SplitVerdict::NotApplicable(_) => EXIT_OK,
    }
}

/// Parses `argv` (program name first) and runs the command. Results go to
/// `out` or to `--out`, diagnostics to `err`.
pub fn run_cli<S: AsRef<str>>(argv: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(|s| s.as_ref())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Input {
    file: SystemFile,
    hash: String,
}

fn load(path: &Path) -> Result<Input, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::ParseError { path: path.display().to_string(), message: "file is not UTF-8".into() })?;
    let file = SystemFile::from_json_str(&text).map_err(|e| match e {
        Error::ParseError { path: field, message } => Error::ParseError { path: format!("{}: {field}", path.display()), message },
        other => other,
    })?;
    Ok(Input { file, hash: hex::encode(Sha256::digest(&bytes)) })
}

fn canonical(input: &Input, tol: &Tolerances) -> Result<CanonicalSystem, Error> {
    input.file.to_system(tol.cuntz)?.canonicalize(tol)
}

impl Cli {
    fn header(&self, command: &str, input: &Input, parameters: Value) -> ReportHeader {
        ReportHeader {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input_name: input.file.name.clone(),
            input_hash: input.hash.clone(),
            parameters,
        }
    }

    fn emit<T: Serialize>(&self, header: &ReportHeader, body: &T, out: &mut dyn Write) -> Result<(), Error> {
        let value = report_value(header, body)?;
        let format = match self.format {
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        };
        emit_report(&value, format, self.out.as_deref(), out)
    }
}

#[derive(Serialize)]
struct Analysis {
    bond_dim: usize,
    original_bond_dim: usize,
    fixed_dim: usize,
    ergodic: bool,
    algebra_dim: usize,
    fixed_point_residual: f64,
    purity: PurityCertificate,
    gauge_g: GaugeGroup,
    real: bool,
    lattice_symmetric: bool,
    detailed_balance: bool,
    kms_symmetric: bool,
    kms_defect: f64,
    warnings: Vec<String>,
    spectral: SpectralReport,
}

#[derive(Serialize)]
struct CorrelationRow {
    gap: usize,
    value: [f64; 2],
    connected: [f64; 2],
}

#[derive(Serialize)]
struct Correlations {
    obs: String,
    obs2: String,
    expectation_1: [f64; 2],
    expectation_2: [f64; 2],
    rows: Vec<CorrelationRow>,
}

#[derive(Serialize)]
struct NormReport {
    obs: String,
    first_site: i64,
    n_sites: usize,
    #[serde(flatten)]
    norm: WindowNorm,
}

fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let tol = cli.tol.tolerances();
    let tol_json = serde_json::to_value(tol).expect("tolerances serialize");
    match &cli.command {
        Command::Validate { file } => {
            let input = load(file)?;
            let sys = input.file.to_system(tol.cuntz)?;
            let msg = format!(
                "valid: {} (d = {}, bond_dim = {}, residual = {:e})\n",
                input.file.name,
                sys.d(),
                sys.k(),
                sys.residual()
            );
            write_plain(cli, &msg, out)?;
            Ok(EXIT_OK)
        }
        Command::Analyze { file, max_word_len, depth } => {
            let input = load(file)?;
            let csys = canonical(&input, &tol)?;
            let modular = ModularData::new(&csys)?;
            let kms = modular.kms_space(&csys)?;
            let db = detailed_balance(&csys, &kms, *depth)?;
            let body = Analysis {
                bond_dim: csys.k(),
                original_bond_dim: csys.original_k(),
                fixed_dim: csys.fixed_dim(),
                ergodic: csys.ergodic(),
                algebra_dim: csys.algebra_dim(),
                fixed_point_residual: csys.fixed_point_residual(),
                purity: purity_certificate(&csys, 8)?,
                gauge_g: gauge_group_detect(&csys, *max_word_len)?,
                real: db.real,
                lattice_symmetric: db.lattice_symmetric,
                detailed_balance: db.detailed_balance,
                kms_symmetric: db.kms_symmetric,
                kms_defect: db.kms_defect,
                warnings: db.warning.into_iter().collect(),
                spectral: spectral_report(&build_transfer(&csys), tol.spectral)?,
            };
            let params = json!({"tolerances": tol_json, "max_word_len": max_word_len, "depth": depth});
            cli.emit(&cli.header("analyze", &input, params), &body, out)?;
            Ok(EXIT_OK)
        }
        Command::Correlations { file, obs, obs2, gap_max } => {
            let input = load(file)?;
            let csys = canonical(&input, &tol)?;
            let basis = input.file.site_basis()?;
            let obs2 = obs2.clone().unwrap_or_else(|| obs.clone());
            let q1 = parse_observable(obs, csys.d(), basis)?;
            let q2 = parse_observable(&obs2, csys.d(), basis)?;
            let e1 = expectation(&csys, &q1)?;
            let e2 = expectation(&csys, &q2)?;
            let rows = (0..=*gap_max)
                .map(|gap| {
                    let v = two_point(&csys, &q1, &q2, gap as i64)?;
                    let c = v - e1 * e2;
                    Ok(CorrelationRow { gap, value: [v.re, v.im], connected: [c.re, c.im] })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let body = Correlations {
                obs: obs.clone(),
                obs2: obs2.clone(),
                expectation_1: [e1.re, e1.im],
                expectation_2: [e2.re, e2.im],
                rows,
            };
            let params = json!({"tolerances": tol_json, "gap_max": gap_max});
            cli.emit(&cli.header("correlations", &input, params), &body, out)?;
            Ok(EXIT_OK)
        }
        Command::Certify { file, window, gap_max, depth, reflection_window, max_word_len, seed } => {
            let input = load(file)?;
            let csys = canonical(&input, &tol)?;
            let params = ReportParams {
                symmetry_depth: *depth,
                reflection_window: *reflection_window,
                split_window: *window,
                split_k_max: *gap_max,
                gauge_word_len: *max_word_len,
                decay_seed: *seed,
                ..ReportParams::default()
            };
            let report = full_report(&csys, &params)?;
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let param_json = json!({"tolerances": tol_json, "report": params});
            cli.emit(&cli.header("certify", &input, param_json), &report, out)?;
            Ok(verdict_exit_code(&report.split.verdict))
        }
        Command::Examples { name, list } => {
            if *list {
                write_plain(cli, &(CATALOG_NAMES.join("\n") + "\n"), out)?;
                return Ok(EXIT_OK);
            }
            let Some(name) = name else {
                let _ = writeln!(err, "error: examples needs --name or --list");
                return Ok(EXIT_USAGE);
            };
            let f = examples_catalog(name)?;
            write_plain(cli, &f.to_json_string(), out)?;
            Ok(EXIT_OK)
        }
        Command::Norm { file, obs } => {
            let input = load(file)?;
            input.file.to_system(tol.cuntz)?;
            let q = parse_observable(obs, input.file.d, input.file.site_basis()?)?;
            let two_sided = q.n_sites() % 2 == 0 && q.first_site() == 1 - (q.n_sites() / 2) as i64;
            let body = NormReport {
                obs: obs.clone(),
                first_site: q.first_site(),
                n_sites: q.n_sites(),
                norm: window_operator_norm(&q, two_sided)?,
            };
            let params = json!({"tolerances": tol_json});
            cli.emit(&cli.header("norm", &input, params), &body, out)?;
            Ok(EXIT_OK)
        }
    }
}

fn write_plain(cli: &Cli, text: &str, out: &mut dyn Write) -> Result<(), Error> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => out.write_all(text.as_bytes()).map_err(Error::from),
    }
}
