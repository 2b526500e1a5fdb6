//! Command-line pipeline driver.
//!
//! Data goes to files or standard output, logs to standard error. Every
//! output embeds a configuration fingerprint: the SHA-256 of the command
//! name, its effective settings and the contents of its input files.

mod commands;

use crate::connectivity::{ConnectivityError, MeasureConfig};
use crate::flowsim::FlowError;
use crate::geometry::GeometryError;
use crate::metrics::{CostMode, MetricsError};
use crate::network::{BAreaMode, EdgeDirection, NetworkError};
use crate::trajectory::{TemporalContext, TrajectoryError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "aeronet", version, about = "Trajectory-based connectivity networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// sampling | transport
    #[arg(long, global = true)]
    pub edge_direction: Option<EdgeDirection>,
    /// reciprocal | direct
    #[arg(long, global = true)]
    pub cost_mode: Option<CostMode>,
    /// unit | real
    #[arg(long, global = true)]
    pub b_area: Option<BAreaMode>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Regular lon-lat grid partition, optionally restricted to a mask.
    Grid(GridArgs),
    /// Geodesic circular buffers around centre points.
    Buffers(BuffersArgs),
    /// Area-proportional random arrival points per region.
    Arrivals(ArrivalsArgs),
    /// Synthetic trajectories from an analytic flow.
    Simulate(SimulateArgs),
    /// Windowed connectivity networks from a corpus and a partition.
    Network(NetworkArgs),
    /// The eight network indices per window.
    Indices(IndicesArgs),
    /// Complete-linkage clustering of index vectors.
    Cluster(ClusterArgs),
    /// Edge-class distance and bearing tables.
    Appendix(AppendixArgs),
    /// HYSPLIT tdump to the corpus CSV format.
    ConvertTdump(ConvertTdumpArgs),
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// lon0,lat0,lon1,lat1,cell_km
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Keep only cells whose centroid lies in this partition.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BuffersArgs {
    /// CSV with columns id,lon,lat
    #[arg(long)]
    pub centers: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub radius_km: f64,
    #[arg(long, default_value_t = 64)]
    pub vertices: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ArrivalsArgs {
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Points in the smallest region.
    #[arg(long, default_value_t = 1)]
    pub min: usize,
    /// Points in the largest region.
    #[arg(long, default_value_t = 10)]
    pub max: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Uniform,
    Rotation,
    Shear,
    DoubleGyre,
    Linear,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub field: FieldKind,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub v: f64,
    /// Rotation rate (rad per time unit); also the double-gyre frequency.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Rotation centre x,y in planar units.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub center: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k: f64,
    /// Double-gyre amplitude.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub amplitude: f64,
    /// Double-gyre perturbation.
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    pub epsilon: f64,
    /// Linear field matrix m11,m12,m21,m22.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// CSV with columns lon,lat and optional receptor.
    #[arg(long)]
    pub arrivals: PathBuf,
    /// One arrival time per line (RFC 3339 or Unix seconds).
    #[arg(long)]
    pub times: PathBuf,
    /// Signed lag, e.g. -48h.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// RK4 step.
    #[arg(long, default_value = "60s")]
    pub h: String,
    #[arg(long, default_value = "1h")]
    pub fix_interval: String,
    /// Geographic position of the planar origin, lon,lat.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub anchor: String,
    #[arg(long, default_value_t = 1.0)]
    pub km_per_unit: f64,
    /// Seconds per flow time unit; field rates are per this unit.
    #[arg(long, default_value = "1h")]
    pub time_unit: String,
    /// Record |det J| per fix with this finite-difference half-width.
    #[arg(long)]
    pub jacobian_eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NetworkArgs {
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// whole | yearly | monthly-pooled
    #[arg(long)]
    pub context: Option<TemporalContext>,
    #[arg(long)]
    pub t_length: Option<f64>,
    /// Measure name with default parameters; the config [measure] table
    /// allows parameters.
    #[arg(long)]
    pub measure: Option<String>,
    /// Declared lag checked against the corpus.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one dense matrix CSV per window here.
    #[arg(long)]
    pub dense: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IndicesArgs {
    #[arg(long)]
    pub edges: PathBuf,
    /// Null-model replicates for small-worldness.
    #[arg(long)]
    pub n_null: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub indices: PathBuf,
    /// Cluster raw indices instead of z-scores.
    #[arg(long)]
    pub raw: bool,
    /// Newick output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Merge table CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Cut the tree into this many clusters for --assignments.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub assignments: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AppendixArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    #[arg(long, default_value_t = 16)]
    pub sectors: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConvertTdumpArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Prefix for generated trajectory ids.
    #[arg(long, default_value = "")]
    pub prefix: String,
    /// Receptor region id stamped on every trajectory.
    #[arg(long)]
    pub receptor: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run configuration file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub edge_direction: Option<EdgeDirection>,
    pub cost_mode: Option<CostMode>,
    pub b_area: Option<BAreaMode>,
    pub partition: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub context: Option<TemporalContext>,
    pub t_length: Option<f64>,
    pub delta: Option<String>,
    pub standardize: Option<bool>,
    pub measure: Option<MeasureConfig>,
    pub null: Option<NullTable>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullTable {
    pub n_null: Option<usize>,
}

/// Effective settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub threads: usize,
    pub direction: EdgeDirection,
    pub cost_mode: CostMode,
    pub b_area: BAreaMode,
    pub run: RunConfig,
    pub base_dir: PathBuf,
}

impl Settings {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The flag value, else the config value resolved against its file.
    fn path_or_config(&self, flag: Option<&PathBuf>, cfg: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
        match (flag, cfg) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(p)) => Ok(self.resolve(p)),
            (None, None) => Err(CliError::Validation(format!(
                "no {what} given (use --{what} or set it in the config)"
            ))),
        }
    }

    /// Explicit output path, else `<output_dir>/<name>`, else stdout.
    fn output(&self, flag: Option<&PathBuf>, name: &str) -> Option<PathBuf> {
        flag.cloned()
            .or_else(|| self.run.output_dir.as_ref().map(|d| self.resolve(d).join(name)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or partition; exit code 2.
    #[error("{0}")]
    Validation(String),
    /// Inputs that parse but cannot be processed; exit code 3.
    #[error("{0}")]
    Data(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    /// Prefixes the message with a file name.
    fn at(self, path: &Path) -> CliError {
        let p = path.display();
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{p}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{p}: {m}")),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::SamplingStalled { .. } => CliError::Data(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::BlowUp { .. } | FlowError::Trajectory(_) => CliError::Data(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConnectivityError> for CliError {
    fn from(e: ConnectivityError) -> Self {
        match e {
            ConnectivityError::NoSamples(_)
            | ConnectivityError::Diagonal(_)
            | ConnectivityError::NegativeConnectivity { .. } => CliError::Data(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Connectivity(c) => c.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidArgument(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Parses `[-]<number>[s|m|h|d]`; a bare number is seconds.
pub fn parse_duration(s: &str) -> Result<i64, String> {
    let t = s.trim();
    let (num, mult) = match t.char_indices().last() {
        Some((i, 's')) => (&t[..i], 1),
        Some((i, 'm')) => (&t[..i], 60),
        Some((i, 'h')) => (&t[..i], 3600),
        Some((i, 'd')) => (&t[..i], 86_400),
        _ => (t, 1),
    };
    let v: f64 = num
        .parse()
        .map_err(|_| format!("bad duration {s:?} (expected e.g. -48h, 30m, 90s)"))?;
    let secs = v * mult as f64;
    if !secs.is_finite() || secs.fract() != 0.0 {
        return Err(format!("duration {s:?} is not a whole number of seconds"));
    }
    Ok(secs as i64)
}

fn duration_arg(s: &str, flag: &str) -> Result<i64> {
    parse_duration(s).map_err(|e| CliError::Validation(format!("--{flag}: {e}")))
}

/// Comma-separated floats, exactly `n` of them.
fn parse_floats(s: &str, n: usize, flag: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("--{flag}: expected {n} comma-separated numbers, got {s:?}")))?;
    if v.len() != n {
        return Err(CliError::Validation(format!(
            "--{flag}: expected {n} comma-separated numbers, got {}",
            v.len()
        )));
    }
    Ok(v)
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("input file not found: {}", path.display())))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    require_file(path)?;
    std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Hash of the command, its settings and the bytes of each input.
pub fn fingerprint(command: &str, settings: &serde_json::Value, inputs: &[&[u8]]) -> String {
    let digests: Vec<String> = inputs.iter().map(|b| hex::encode(Sha256::digest(b))).collect();
    let record = serde_json::json!({
        "command": command,
        "settings": settings,
        "inputs": digests,
    });
    hex::encode(Sha256::digest(record.to_string().as_bytes()))
}

/// Writes to `path`, or to standard output when `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            log::info!("wrote {}", p.display());
            Ok(())
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn load_settings(g: &GlobalArgs) -> Result<Settings> {
    let (run, base_dir) = match &g.config {
        Some(path) => {
            let text = String::from_utf8(read_file(path)?)
                .map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))?;
            let run: RunConfig = toml::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (run, dir)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    Ok(Settings {
        seed: g.seed.or(run.seed).unwrap_or(0),
        threads: g.threads.or(run.threads).unwrap_or(0),
        direction: g.edge_direction.or(run.edge_direction).unwrap_or_default(),
        cost_mode: g.cost_mode.or(run.cost_mode).unwrap_or_default(),
        b_area: g.b_area.or(run.b_area).unwrap_or_default(),
        run,
        base_dir,
    })
}

pub fn execute(cli: Cli) -> Result<()> {
    let settings = load_settings(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Grid(a) => commands::grid(a, &settings),
        Command::Buffers(a) => commands::buffers(a, &settings),
        Command::Arrivals(a) => commands::arrivals(a, &settings),
        Command::Simulate(a) => commands::simulate(a, &settings),
        Command::Network(a) => commands::network(a, &settings),
        Command::Indices(a) => commands::indices(a, &settings),
        Command::Cluster(a) => commands::cluster(a, &settings),
        Command::Appendix(a) => commands::appendix(a, &settings),
        Command::ConvertTdump(a) => commands::convert_tdump(a, &settings),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
