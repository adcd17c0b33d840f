//! Command line front end: wires a background capture and attack parameters
//! through statistics, generation, merging, labeling, and quality auditing.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 I/O failure,
//! 4 malformed capture, 5 attack generation failure.

use std::collections::BTreeMap;
use std::env;
use std::fmt;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sha2::{Digest, Sha224};

use pcapforge_core::attack::{
    find_attack, registry, validate_and_default, AttackError, GeneratedAttack,
};
use pcapforge_core::inject::{merge_into, write_labels};
use pcapforge_core::pcap::PcapError;
use pcapforge_core::stats::{load_or_compute, CacheOutcome, StatsDb, StatsError, WindowSpec};
use pcapforge_core::tided::{emit_report, run_audit, TidedError};

/// Manifest line to stdout. A closed pipe means the reader is done with us,
/// not that anything failed, so exit quietly instead of panicking.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(
    name = "pcapforge",
    version,
    about = "Inject labeled synthetic attacks into PCAP captures and audit dataset quality",
    after_help = "Exit codes:\n  \
        0  success\n  \
        2  usage or parameter error\n  \
        3  I/O failure\n  \
        4  malformed or unsupported capture\n  \
        5  attack generation failure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate attacks and merge them into a background capture
    Inject(InjectArgs),
    /// Audit a capture and write the quality report file set
    Analyze(AnalyzeArgs),
    /// List available attacks and their parameters
    ListAttacks,
}

#[derive(Args)]
struct WindowArgs {
    /// Split the capture span into this many equal analysis windows
    #[arg(long, value_name = "N", conflicts_with = "window_seconds")]
    windows: Option<usize>,
    /// Analysis window length in seconds
    #[arg(long, value_name = "SECONDS")]
    window_seconds: Option<f64>,
}

impl WindowArgs {
    fn spec(&self) -> Result<WindowSpec, CliError> {
        match (self.windows, self.window_seconds) {
            (Some(0), _) => Err(CliError::usage("--windows must be at least 1")),
            (Some(n), _) => Ok(WindowSpec::Count(n)),
            (_, Some(s)) if !(s.is_finite() && s > 0.0) => {
                Err(CliError::usage("--window-seconds must be positive"))
            }
            (_, Some(s)) => Ok(WindowSpec::Seconds(s)),
            _ => Ok(WindowSpec::default()),
        }
    }
}

#[derive(Args)]
struct CacheArgs {
    /// Statistics cache directory; PCAPFORGE_CACHE_DIR overrides the
    /// default, this flag overrides both
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Skip the statistics cache entirely (neither read nor written)
    #[arg(long)]
    no_cache: bool,
}

impl CacheArgs {
    fn resolve(&self) -> Option<PathBuf> {
        if self.no_cache {
            return None;
        }
        if let Some(dir) = &self.cache_dir {
            return Some(dir.clone());
        }
        if let Some(dir) = env::var_os("PCAPFORGE_CACHE_DIR") {
            return Some(PathBuf::from(dir));
        }
        Some(default_cache_dir())
    }
}

#[derive(Args)]
struct InjectArgs {
    /// Background capture the attacks are injected into
    #[arg(short, long, value_name = "PCAP")]
    input: PathBuf,
    /// Merged capture to write; labels go to <OUTPUT>.labels.xml
    #[arg(short, long, value_name = "PCAP")]
    output: PathBuf,
    /// Attack name followed by key=value parameters; repeatable
    #[arg(
        short = 'a',
        long = "attack",
        value_name = "NAME [KEY=VALUE]...",
        num_args = 1..,
        action = ArgAction::Append,
        required = true
    )]
    attacks: Vec<String>,
    /// Master seed; every attack derives its own stream from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also audit the input capture and write the report set to
    /// <OUTPUT>.tided/
    #[arg(long)]
    tided: bool,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Capture to audit
    #[arg(short, long, value_name = "PCAP")]
    input: PathBuf,
    /// Directory the report file set is written into
    #[arg(short, long, value_name = "DIR")]
    output: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    cache: CacheArgs,
}

/// Error wrapper carrying a stable machine-readable code and exit status.
enum CliError {
    Usage(String),
    Attack(AttackError),
    Stats(StatsError),
    Pcap(PcapError),
    Tided(TidedError),
    Io(std::io::Error),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Attack(e) => match e {
                AttackError::UnknownAttack(_) => "unknown-attack",
                AttackError::UnknownParameter(_) => "unknown-parameter",
                AttackError::InvalidValue { .. } => "invalid-value",
                AttackError::PayloadTooLarge { .. } => "payload-too-large",
                AttackError::EmptyBackground => "empty-background",
                AttackError::NoOpenPorts(_) => "no-open-ports",
                AttackError::AmbiguousTemplate(_)
                | AttackError::NoTcp
                | AttackError::LengthMismatch { .. } => "bad-template",
                AttackError::EmptyDistribution(_) => "empty-distribution",
                AttackError::CsvParse { .. } | AttackError::UnboundBot(_) => "bad-schedule",
                AttackError::InsufficientHosts { .. } => "insufficient-hosts",
                AttackError::Pcap(_) => "bad-capture",
                AttackError::Stats(e) => stats_code(e),
                AttackError::Io(_) => "io",
            },
            CliError::Stats(e) => stats_code(e),
            CliError::Pcap(_) => "bad-capture",
            CliError::Tided(e) => match e {
                TidedError::Pcap(_) => "bad-capture",
                TidedError::Io(_) => "io",
                _ => "empty-capture",
            },
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.code() {
            "usage" | "unknown-attack" | "unknown-parameter" | "invalid-value"
            | "payload-too-large" | "bad-schedule" | "unknown-host" | "unknown-field" => 2,
            "io" => 3,
            "bad-capture" => 4,
            _ => 5,
        }
    }
}

fn stats_code(e: &StatsError) -> &'static str {
    match e {
        StatsError::Pcap(_) => "bad-capture",
        StatsError::Io(_) => "io",
        StatsError::UnknownHost(_) => "unknown-host",
        StatsError::UnknownField(_) => "unknown-field",
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Attack(e) => write!(f, "{e}"),
            CliError::Stats(e) => write!(f, "{e}"),
            CliError::Pcap(e) => write!(f, "{e}"),
            CliError::Tided(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        CliError::Attack(e)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Stats(e)
    }
}

impl From<PcapError> for CliError {
    fn from(e: PcapError) -> Self {
        CliError::Pcap(e)
    }
}

impl From<TidedError> for CliError {
    fn from(e: TidedError) -> Self {
        CliError::Tided(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn default_cache_dir() -> PathBuf {
    if let Some(dir) = env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("pcapforge");
    }
    if let Some(home) = env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("pcapforge");
    }
    env::temp_dir().join("pcapforge-cache")
}

/// Per-attack seed: independent of every other attack's position so adding
/// one never perturbs the streams of those before it.
fn attack_seed(global: u64, index: u64) -> u64 {
    let mut hasher = Sha224::new();
    hasher.update(global.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha224 yields 28 bytes"))
}

/// One `-a NAME key=value...` occurrence split into its parts.
struct AttackSpec {
    name: String,
    params: BTreeMap<String, String>,
}

fn parse_attack_specs(raw: &[Vec<String>]) -> Result<Vec<AttackSpec>, CliError> {
    let mut specs = Vec::with_capacity(raw.len());
    for group in raw {
        let name = group[0].clone();
        let mut params = BTreeMap::new();
        for pair in &group[1..] {
            let Some((key, value)) = pair.split_once('=') else {
                return Err(CliError::usage(format!(
                    "attack parameter {pair:?} is not key=value"
                )));
            };
            if params.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::usage(format!(
                    "attack parameter {key:?} given twice"
                )));
            }
        }
        specs.push(AttackSpec { name, params });
    }
    Ok(specs)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

fn describe_cache(outcome: CacheOutcome, dir: Option<&Path>) -> String {
    match outcome {
        CacheOutcome::Hit => format!("cache hit ({})", dir.unwrap().display()),
        CacheOutcome::Computed => format!("computed, cached ({})", dir.unwrap().display()),
        CacheOutcome::RecomputedInvalid => {
            format!("recomputed over invalid entry ({})", dir.unwrap().display())
        }
        CacheOutcome::Disabled => "computed, cache disabled".into(),
    }
}

fn load_stats(
    input: &Path,
    cache_dir: Option<&Path>,
    spec: WindowSpec,
) -> Result<StatsDb, CliError> {
    let (db, outcome) = load_or_compute(input, cache_dir, spec)?;
    outln!("stats: {}", describe_cache(outcome, cache_dir));
    Ok(db)
}

fn run_inject(args: &InjectArgs, groups: &[Vec<String>]) -> Result<(), CliError> {
    if same_file(&args.input, &args.output) {
        return Err(CliError::usage("output must differ from input"));
    }
    let spec = args.window.spec()?;
    let specs = parse_attack_specs(groups)?;
    // resolve every attack name before any file or cache work so an
    // unknown name exits without side effects
    let descriptors = specs
        .iter()
        .map(|s| find_attack(&s.name))
        .collect::<Result<Vec<_>, _>>()?;

    outln!("input: {}", args.input.display());
    outln!("output: {}", args.output.display());
    outln!("seed: {}", args.seed);

    let cache_dir = args.cache.resolve();
    let db = load_stats(&args.input, cache_dir.as_deref(), spec)?;

    let mut attacks: Vec<GeneratedAttack> = Vec::with_capacity(specs.len());
    for (index, (spec_item, desc)) in specs.iter().zip(&descriptors).enumerate() {
        let seed = attack_seed(args.seed, index as u64);
        let params =
            validate_and_default(&spec_item.name, &(desc.schema)(), &spec_item.params, &db, seed)?;
        let generated = (desc.generate)(&params, &db)?;

        outln!("attack {index}: {}", spec_item.name);
        for line in params.canonical_lines() {
            outln!("  {line}");
        }
        outln!("  digest: {}", generated.params_digest);
        match (generated.start(), generated.end()) {
            (Some(start), Some(end)) => outln!(
                "  packets: {} spanning {:.6}s to {:.6}s",
                generated.packets.len(),
                start.as_secs_f64(),
                end.as_secs_f64()
            ),
            _ => outln!("  packets: 0"),
        }
        attacks.push(generated);
    }

    let audit = if args.tided {
        Some(run_audit(&args.input, &db, spec)?)
    } else {
        None
    };

    // all generation succeeded; only now touch the output locations
    let out_dir = args.output.parent().filter(|p| !p.as_os_str().is_empty());
    let out_dir = out_dir.unwrap_or(Path::new("."));
    let pcap_tmp = tempfile::NamedTempFile::new_in(out_dir)?;
    let report = merge_into(&args.input, &attacks, BufWriter::new(pcap_tmp.as_file()))?;

    let labels_path = labels_path_for(&args.output);
    let labels_tmp = tempfile::NamedTempFile::new_in(out_dir)?;
    write_labels(BufWriter::new(labels_tmp.as_file()), &report.labels)?;

    pcap_tmp.persist(&args.output).map_err(|e| e.error)?;
    labels_tmp.persist(&labels_path).map_err(|e| e.error)?;
    outln!(
        "merged: {} background + {} attack packets",
        report.background_packets, report.attack_packets
    );
    outln!("labels: {} ({} attacks)", labels_path.display(), report.labels.len());

    if let Some(audit) = audit {
        let report_dir = args.output.with_extension(format!(
            "{}tided",
            args.output
                .extension()
                .map(|e| format!("{}.", e.to_string_lossy()))
                .unwrap_or_default()
        ));
        let written = emit_report_atomically(&audit, &report_dir, out_dir)?;
        outln!("tided: {} ({} files)", report_dir.display(), written);
    }
    Ok(())
}

fn labels_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".labels.xml");
    output.with_file_name(name)
}

/// Emits the report set into a temp directory and swaps it into place so a
/// failure cannot leave a half-written report behind.
fn emit_report_atomically(
    report: &pcapforge_core::tided::TidedReport,
    final_dir: &Path,
    parent: &Path,
) -> Result<usize, CliError> {
    let staging = tempfile::tempdir_in(parent)?;
    let written = emit_report(report, staging.path())?.len();
    if final_dir.exists() {
        std::fs::remove_dir_all(final_dir)?;
    }
    std::fs::rename(staging.keep(), final_dir)?;
    Ok(written)
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let spec = args.window.spec()?;
    outln!("input: {}", args.input.display());

    let cache_dir = args.cache.resolve();
    let db = load_stats(&args.input, cache_dir.as_deref(), spec)?;
    let report = run_audit(&args.input, &db, spec)?;

    let parent = args.output.parent().filter(|p| !p.as_os_str().is_empty());
    let parent = parent.unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let written = emit_report_atomically(&report, &args.output, parent)?;
    outln!("report: {} ({} files)", args.output.display(), written);
    for warning in &report.warnings {
        outln!("warning: {}: {}", warning.code, warning.message);
    }
    Ok(())
}

fn run_list_attacks() {
    for desc in registry() {
        outln!("{}", desc.name);
        outln!("  {}", desc.summary);
        for param in (desc.schema)().params {
            let default = match &param.default {
                d @ pcapforge_core::attack::DefaultSource::Constant(v) => {
                    format!("{} ({v})", d.kind())
                }
                d => d.kind().to_string(),
            };
            outln!(
                "  {:<14} {:<13} {:<24} {}",
                param.key,
                param.ty.name(),
                default,
                param.help
            );
        }
    }
}

/// The derive API flattens repeated `-a` values, so the grouping by
/// occurrence is recovered from the raw matches.
fn attack_groups(matches: &ArgMatches) -> Vec<Vec<String>> {
    let Some(sub) = matches.subcommand_matches("inject") else {
        return Vec::new();
    };
    sub.get_occurrences::<String>("attacks")
        .map(|occurrences| {
            occurrences
                .map(|values| values.cloned().collect())
                .collect()
        })
        .unwrap_or_default()
}

fn run(cli: &Cli, matches: &ArgMatches) -> Result<(), CliError> {
    match &cli.command {
        Command::Inject(args) => run_inject(args, &attack_groups(matches)),
        Command::Analyze(args) => run_analyze(args),
        Command::ListAttacks => {
            run_list_attacks();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // one line, stable leading code, for scripted callers
            let message = e.to_string().replace('\n', "; ");
            eprintln!("error: {}: {}", e.code(), message);
            ExitCode::from(e.exit_code())
        }
    }
}
