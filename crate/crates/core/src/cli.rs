//! `cvtomo` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 protocol or numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_cells_csv, write_json, write_mesh_csv};
use crate::mesh::{Mode, RefinementConfig, SamplingPlan};
use crate::numerics::{QuadratureSpec, RandomStream};
use crate::states::PureState;
use crate::tomography::{estimate_element, fidelity, reconstruct, ReconstructionConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cvtomo", version, about = "Selective quantum state tomography for continuous-variable states")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunFlags,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate one density-matrix element rho(x, x').
    Estimate {
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        xp: Option<f64>,
    },
    /// Reconstruct the full kernel on an adaptive mesh.
    Reconstruct,
    /// Regenerate a fidelity table.
    FidelityTable {
        #[arg(long, value_enum)]
        table: Option<Table>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Squeezed,
    Oscillator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeFlag {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct RunFlags {
    /// oscillator:<n> or squeezed:<mean_x>,<mean_p>,<sigma>
    #[arg(long, global = true)]
    pub state: Option<String>,
    /// Detector window width.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Weight threshold of the mesh / region condition.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeFlag>,
    /// Target uncertainty of sampled element estimates.
    #[arg(long = "shots-epsilon", global = true)]
    pub shots_epsilon: Option<f64>,
    /// Failure probability of the Chernoff bounds.
    #[arg(long = "fail-prob", global = true)]
    pub fail_prob: Option<f64>,
    #[arg(long, global = true, env = "CVTOMO_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file whose fields override the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Optional overrides read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub state: Option<String>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub mode: Option<ModeFlag>,
    pub shots_epsilon: Option<f64>,
    pub fail_prob: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub x: Option<f64>,
    pub xp: Option<f64>,
    pub table: Option<Table>,
}

/// Fully resolved run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub state: PureState,
    pub delta: f64,
    pub epsilon: f64,
    pub mode: ModeFlag,
    pub fail_prob: f64,
    pub shots_epsilon: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn refinement(&self, epsilon: f64) -> Result<RefinementConfig> {
        let mode = match self.mode {
            ModeFlag::Exact => Mode::Exact,
            ModeFlag::Sampled => Mode::Sampled(SamplingPlan::new(self.shots_epsilon, self.fail_prob)),
        };
        let cfg = RefinementConfig::new(epsilon)?.with_mode(mode);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve(flags: &RunFlags, file: &ConfigFile) -> Result<RunConfig> {
    let state_text = file.state.clone().or_else(|| flags.state.clone()).unwrap_or_else(|| "oscillator:0".into());
    Ok(RunConfig {
        state: state_text.parse()?,
        delta: file.delta.or(flags.delta).unwrap_or(0.1),
        epsilon: file.epsilon.or(flags.epsilon).unwrap_or(0.01),
        mode: file.mode.or(flags.mode).unwrap_or(ModeFlag::Exact),
        fail_prob: file.fail_prob.or(flags.fail_prob).unwrap_or(0.05),
        shots_epsilon: file.shots_epsilon.or(flags.shots_epsilon).unwrap_or(0.1),
        seed: file.seed.or(flags.seed).unwrap_or(0),
        out: file.out.clone().or_else(|| flags.out.clone()),
        format: file.format.or(flags.format),
    })
}

fn load_config_file(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                what: "config file",
                reason: e.to_string(),
            })
        }
    }
}

/// Usage errors map to exit code 2, everything else to 3.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::Parse { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` and runs the command. Results go to `stdout` (or the
/// `--out` file), diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let file = load_config_file(cli.run.config.as_deref())?;
    let config = resolve(&cli.run, &file)?;
    match &cli.command {
        Command::Estimate { x, xp } => {
            let x = file.x.or(*x).ok_or_else(|| Error::InvalidArgument("--x is required".into()))?;
            let xp = file.xp.or(*xp).ok_or_else(|| Error::InvalidArgument("--xp is required".into()))?;
            cmd_estimate(&config, x, xp, stdout)
        }
        Command::Reconstruct => cmd_reconstruct(&config, stdout, stderr),
        Command::FidelityTable { table } => {
            let table = file
                .table
                .or(*table)
                .ok_or_else(|| Error::InvalidArgument("--table is required".into()))?;
            cmd_fidelity_table(&config, table, stdout, stderr)
        }
    }
}

fn with_output<F>(config: &RunConfig, stdout: &mut dyn Write, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match &config.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => body(stdout),
    }
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    state: String,
    x: f64,
    xp: f64,
    re: f64,
    im: f64,
    r: f64,
    rp: f64,
    delta: f64,
    epsilon: f64,
    mode: &'static str,
    seed: u64,
    shots: u64,
    condition_shots: u64,
    plan: Option<crate::protocol::ChernoffPlan>,
    ladder: &'a [crate::mesh::LadderStep],
}

pub fn cmd_estimate(config: &RunConfig, x: f64, xp: f64, stdout: &mut dyn Write) -> Result<()> {
    let refinement = config.refinement(config.epsilon)?;
    let mut stream = RandomStream::new(config.seed, 0);
    let e = estimate_element(&config.state, x, xp, config.delta, config.epsilon, &refinement, &mut stream)?;
    let report = EstimateReport {
        state: config.state.to_string(),
        x,
        xp,
        re: e.value.re,
        im: e.value.im,
        r: e.r,
        rp: e.rp,
        delta: e.delta,
        epsilon: e.epsilon_weight,
        mode: e.mode.name(),
        seed: config.seed,
        shots: e.shots_used,
        condition_shots: e.selection.condition_shots_used,
        plan: e.plan,
        ladder: &e.selection.ladder,
    };
    if config.format == Some(Format::Csv) {
        return Err(Error::InvalidArgument("estimate only writes JSON".into()));
    }
    with_output(config, stdout, |w| write_json(&report, w))
}

fn mesh_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "reconstruction".into());
    out.with_file_name(format!("{stem}.mesh.csv"))
}

/// Writes the reconstruction in `--format` (JSON by default) and, next to
/// an `--out` file, the mesh lines as `<stem>.mesh.csv`.
pub fn cmd_reconstruct(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut rc = ReconstructionConfig::new(config.refinement(config.epsilon)?, config.delta);
    rc.seed = config.seed;
    let recon = reconstruct(&config.state, &rc)?;
    let format = config.format.unwrap_or(Format::Json);
    with_output(config, stdout, |w| match format {
        Format::Json => write_json(&recon, w),
        Format::Csv => write_cells_csv(&recon, w),
    })?;
    if let Some(out) = &config.out {
        let mesh = mesh_path(out);
        write_mesh_csv(recon.partition(), BufWriter::new(File::create(&mesh)?))?;
        let _ = writeln!(
            stderr,
            "{}: {} x {} cells, {} shots -> {} (mesh: {})",
            config.state,
            recon.size(),
            recon.size(),
            recon.total_shots(),
            out.display(),
            mesh.display()
        );
    }
    Ok(())
}

/// One table entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub row_param: f64,
    pub epsilon: f64,
    pub fidelity: f64,
}

pub const SQUEEZED_SIGMAS: [f64; 3] = [0.1, 0.4, 0.9];
pub const SQUEEZED_EPSILONS: [f64; 3] = [0.01, 0.05, 0.1];
pub const SQUEEZED_MEAN_X: f64 = 0.0;
pub const SQUEEZED_MEAN_P: f64 = 0.5;
pub const OSCILLATOR_LEVELS: std::ops::RangeInclusive<u32> = 1..=10;
pub const OSCILLATOR_EPSILONS: [f64; 2] = [0.01, 0.05];

/// States and weight thresholds of a table, row by row.
pub fn table_grid(table: Table) -> Result<Vec<(f64, PureState, Vec<f64>)>> {
    match table {
        Table::Squeezed => SQUEEZED_SIGMAS
            .iter()
            .map(|&s| Ok((s, PureState::squeezed(SQUEEZED_MEAN_X, SQUEEZED_MEAN_P, s)?, SQUEEZED_EPSILONS.to_vec())))
            .collect(),
        Table::Oscillator => OSCILLATOR_LEVELS
            .map(|n| Ok((f64::from(n), PureState::oscillator(n)?, OSCILLATOR_EPSILONS.to_vec())))
            .collect(),
    }
}

/// Reconstructs every table state at every threshold and scores it.
pub fn fidelity_table(config: &RunConfig, table: Table) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (param, state, epsilons) in table_grid(table)? {
        for eps in epsilons {
            let mut rc = ReconstructionConfig::new(config.refinement(eps)?, config.delta);
            rc.seed = config.seed;
            let recon = reconstruct(&state, &rc)?;
            let report = fidelity(&recon, &state, &QuadratureSpec::default())?;
            rows.push(TableRow {
                row_param: param,
                epsilon: eps,
                fidelity: report.fidelity,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_fidelity_table(config: &RunConfig, table: Table, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let rows = fidelity_table(config, table)?;
    let format = config.format.unwrap_or(Format::Csv);
    with_output(config, stdout, |w| match format {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            for row in &rows {
                c.serialize(row)?;
            }
            c.flush()?;
            Ok(())
        }
        Format::Json => write_json(&rows, w),
    })?;
    if let Some(out) = &config.out {
        let _ = writeln!(stderr, "{table:?} table: {} entries -> {}", rows.len(), out.display());
    }
    Ok(())
}
