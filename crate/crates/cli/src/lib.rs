//! Batch front end: subcommands over job configs, JSON on stdout, a
//! JSON-lines result cache and CSV/SVG artifacts.
//!
//! Exit codes: 0 success (a bounded-norm Brody run included), 2 invalid
//! input, 3 numerical failure or a failed `verify` check.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use betti_core::forms_generic::Schedule;
use betti_core::Precision;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cache::{cache_append, cache_lookup, job_hash, ResultRecord, TOOL_VERSION};
use config::JobConfig;
use error::CliError;

const CORPUS: [(&str, &str); 4] = [
    ("p1t", include_str!("../../../corpus/p1t.json")),
    ("torsion", include_str!("../../../corpus/torsion.json")),
    (
        "power_family",
        include_str!("../../../corpus/power_family.json"),
    ),
    (
        "bounded_family",
        include_str!("../../../corpus/bounded_family.json"),
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    #[value(name = "paper")]
    Bounded,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "betti-heights",
    version,
    about = "Heights of sections of elliptic surfaces over C(t)"
)]
struct Cli {
    /// Evaluation precision of sections along the base.
    #[arg(long, global = true, value_enum, default_value = "double")]
    precision: PrecisionArg,
    /// Skip the result cache for both lookup and storage.
    #[arg(long, global = true)]
    no_cache: bool,
    /// JSON-lines result store.
    #[arg(long, global = true, default_value = ".betti-heights-cache.jsonl")]
    cache: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Job {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    section: usize,
}

#[derive(Debug, Args)]
struct Artifacts {
    /// CSV artifact path (overrides the config's outputs.csv).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// SVG artifact path (overrides the config's outputs.svg).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Naive and canonical height of a section.
    Height(Job),
    /// Betti partial height over a disc.
    Partial {
        #[command(flatten)]
        job: Job,
        #[arg(long, default_value_t = 0)]
        disc: usize,
        #[command(flatten)]
        out: Artifacts,
    },
    /// Full height over the base against the canonical height.
    Full(Job),
    /// Gram matrix of the partial pairing on all sections.
    Gram {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        disc: usize,
    },
    /// Partial over canonical heights of mP.
    Nondeg {
        #[command(flatten)]
        job: Job,
        #[arg(long, default_value_t = 0)]
        disc: usize,
        #[arg(long)]
        m_max: Option<i64>,
    },
    /// Partial heights of (z, a_n z^n) over |z| < r, closed form and quadrature.
    Example23 {
        #[arg(long, default_value_t = 6)]
        n_max: i64,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, value_enum, default_value = "paper")]
        schedule: ScheduleArg,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print the table as CSV instead of JSON.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Zoom, reparametrize and probe a family of disc maps.
    Brody {
        /// Config with `family` and `brody`; defaults to (z, z^n) on the unit disc.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Limit samples of the last map.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Invariant suite on a named corpus entry or a config file.
    Verify {
        /// One of p1t, torsion, power_family, bounded_family.
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        config: Option<PathBuf>,
    },
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BETTI_HEIGHTS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage("BETTI_HEIGHTS_THREADS must be a positive integer".into())
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn corpus_entry(name: &str) -> Result<JobConfig, CliError> {
    let text = CORPUS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::Usage(format!("unknown corpus entry `{name}`")))?;
    JobConfig::from_text(text)
}

fn seed_of(hash: &str) -> u64 {
    u64::from_str_radix(&hash[..16], 16).unwrap_or(0)
}

struct Prepared {
    name: &'static str,
    args: Value,
    config: Option<JobConfig>,
    artifacts: bool,
}

fn prepare(cmd: &Command) -> Result<Prepared, CliError> {
    let load = |p: &Path| JobConfig::load(p).map(Some);
    let some = |o: &Option<PathBuf>| o.is_some();
    Ok(match cmd {
        Command::Height(j) => Prepared {
            name: "height",
            args: json!({"section": j.section}),
            config: load(&j.config)?,
            artifacts: false,
        },
        Command::Partial { job, disc, out } => {
            let config = load(&job.config)?;
            let outputs = &config.as_ref().expect("loaded").outputs;
            Prepared {
                name: "partial",
                args: json!({"section": job.section, "disc": disc}),
                artifacts: some(&out.csv)
                    || some(&out.svg)
                    || some(&outputs.csv)
                    || some(&outputs.svg),
                config,
            }
        }
        Command::Full(j) => Prepared {
            name: "full",
            args: json!({"section": j.section}),
            config: load(&j.config)?,
            artifacts: false,
        },
        Command::Gram { config, disc } => Prepared {
            name: "gram",
            args: json!({"disc": disc}),
            config: load(config)?,
            artifacts: false,
        },
        Command::Nondeg { job, disc, m_max } => Prepared {
            name: "nondeg",
            args: json!({"section": job.section, "disc": disc, "m_max": m_max}),
            config: load(&job.config)?,
            artifacts: false,
        },
        Command::Example23 {
            n_max,
            r,
            schedule,
            csv,
            ..
        } => Prepared {
            name: "example23",
            args: json!({"n_max": n_max, "r": r, "schedule": schedule.to_possible_value().map(|v| v.get_name().to_string())}),
            config: None,
            artifacts: csv.is_some(),
        },
        Command::Brody { config, csv } => {
            let config = config.as_deref().map(JobConfig::load).transpose()?;
            let artifacts =
                csv.is_some() || config.as_ref().is_some_and(|c| c.outputs.csv.is_some());
            Prepared {
                name: "brody",
                args: json!({}),
                config,
                artifacts,
            }
        }
        Command::Verify { name, config } => {
            let cfg = match (name, config) {
                (Some(n), _) => corpus_entry(n)?,
                (None, Some(p)) => JobConfig::load(p)?,
                (None, None) => {
                    return Err(CliError::Usage(
                        "verify needs a corpus name or --config".into(),
                    ))
                }
            };
            Prepared {
                name: "verify",
                args: json!({}),
                config: Some(cfg),
                artifacts: false,
            }
        }
    })
}

fn pick<'a>(flag: &'a Option<PathBuf>, cfg: Option<&'a JobConfig>, csv: bool) -> Option<&'a Path> {
    flag.as_deref().or_else(|| {
        cfg.and_then(|c| {
            if csv {
                c.outputs.csv.as_deref()
            } else {
                c.outputs.svg.as_deref()
            }
        })
    })
}

fn execute(cmd: &Command, prep: &Prepared, hash: &str) -> Result<Value, CliError> {
    let cfg = prep.config.as_ref();
    let need = || cfg.ok_or_else(|| CliError::Usage("missing --config".into()));
    match cmd {
        Command::Height(j) => commands::height(need()?, j.section),
        Command::Partial { job, disc, out } => commands::partial(
            need()?,
            job.section,
            *disc,
            pick(&out.csv, cfg, true),
            pick(&out.svg, cfg, false),
        ),
        Command::Full(j) => commands::full(need()?, j.section),
        Command::Gram { disc, .. } => commands::gram_cmd(need()?, *disc),
        Command::Nondeg { job, disc, m_max } => {
            commands::nondeg(need()?, job.section, *disc, *m_max)
        }
        Command::Example23 {
            n_max,
            r,
            schedule,
            csv,
            ..
        } => {
            let s = match schedule {
                ScheduleArg::Bounded => Schedule::Bounded,
                ScheduleArg::Unit => Schedule::Unit,
            };
            commands::example23(*n_max, *r, s, csv.as_deref())
        }
        Command::Brody { csv, .. } => commands::brody(cfg, pick(csv, cfg, true)),
        Command::Verify { .. } => commands::verify(need()?, seed_of(hash)),
    }
}

fn emit(out: &mut dyn Write, v: &Value) {
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).expect("serializable")
    );
}

fn fail(out: &mut dyn Write, err: &mut dyn Write, e: &CliError) -> i32 {
    emit(out, &e.to_json());
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}

/// Runs one invocation, writing JSON to `out` and diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            return fail(out, err, &CliError::Usage(e.to_string()));
        }
    };
    if let Err(e) = threads_from_env() {
        return fail(out, err, &e);
    }
    let precision = match cli.precision {
        PrecisionArg::Double => Precision::Double,
        PrecisionArg::Extended => Precision::Extended,
    };
    Precision::set_working(precision);
    let prep = match prepare(&cli.command) {
        Ok(p) => p,
        Err(e) => return fail(out, err, &e),
    };
    let job = json!({
        "command": prep.name,
        "args": prep.args,
        "config": prep.config.as_ref().map(|c| c.raw.clone()),
        "precision": precision,
    });
    let hash = job_hash(&job);
    let use_cache = !cli.no_cache && !prep.artifacts;
    if use_cache {
        match cache_lookup(&cli.cache, &hash, Some(TOOL_VERSION)) {
            Ok(l) => {
                if l.skipped > 0 {
                    let _ = writeln!(err, "warning: skipped {} corrupt cache lines", l.skipped);
                }
                if let Some(r) = l.record {
                    return finish(out, &prep, r.value, &hash, true);
                }
            }
            Err(e) => {
                let _ = writeln!(err, "warning: cache unreadable: {e}");
            }
        }
    }
    if matches!(
        cli.command,
        Command::Example23 {
            format: Format::Csv,
            ..
        }
    ) {
        return match execute(&cli.command, &prep, &hash) {
            Ok(v) => {
                let _ = write!(out, "{}", v["csv"].as_str().unwrap_or_default());
                0
            }
            Err(e) => fail(out, err, &e),
        };
    }
    match execute(&cli.command, &prep, &hash) {
        Ok(value) => {
            if !cli.no_cache {
                let record = ResultRecord {
                    job_hash: hash.clone(),
                    command: prep.name.to_string(),
                    value: value.clone(),
                    timestamp: SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map_or(0, |d| d.as_secs()),
                    tool_version: TOOL_VERSION.to_string(),
                };
                if let Err(e) = cache_append(&cli.cache, &record) {
                    let _ = writeln!(err, "warning: cache not written: {e}");
                }
            }
            finish(out, &prep, value, &hash, false)
        }
        Err(e) => fail(out, err, &e),
    }
}

fn finish(out: &mut dyn Write, prep: &Prepared, value: Value, hash: &str, cached: bool) -> i32 {
    let failed_checks = prep.name == "verify" && value["passed"] != json!(true);
    let mut v = value;
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), json!(prep.name));
        m.insert("job_hash".into(), json!(hash));
        m.insert("cached".into(), json!(cached));
    }
    emit(out, &v);
    if failed_checks {
        3
    } else {
        0
    }
}
