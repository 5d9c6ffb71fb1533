//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use polymodal_core::audio::{find_order, PlaybackOrder, ScheduleOptions};
use polymodal_core::defaults::defaults_for_selection;
use polymodal_core::model::MultimodalSpec;
use polymodal_core::{infer_key, schemas, validate, DataFormat, Dataset, Predicate, Value};

use crate::artifacts::{self, json_bytes};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Parser)]
#[command(name = "polymodal", version, about = "Compile one data spec to linked chart, text and audio views")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecSource {
    /// Spec JSON file.
    #[arg(long, conflicts_with = "defaults", required_unless_present = "defaults")]
    spec: Option<PathBuf>,
    /// Generate the default spec for the selected fields.
    #[arg(long)]
    defaults: bool,
    /// Fields to select with --defaults (all columns when omitted).
    #[arg(long, value_delimiter = ',', requires = "defaults")]
    fields: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Write the visual document, text tree and audio schedule.
    Compile {
        dataset: PathBuf,
        #[command(flatten)]
        source: SpecSource,
        out: PathBuf,
        /// Also render WAV files with cue sidecars.
        #[arg(long)]
        wav: bool,
        #[arg(long, default_value_t = artifacts::DEFAULT_SAMPLE_RATE)]
        sample_rate: u32,
    },
    /// Render the sonification to WAV and cue files.
    Sonify {
        dataset: PathBuf,
        #[command(flatten)]
        source: SpecSource,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Playback order descriptor, e.g. "AAPL by date".
        #[arg(long)]
        order: Option<String>,
        /// Selected values for playback orders, as field=value.
        #[arg(long = "at")]
        at: Vec<String>,
        /// Predicate JSON restricting the rows played.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, value_enum, default_value = "on")]
        ticks: Switch,
        #[arg(long, default_value_t = artifacts::DEFAULT_SAMPLE_RATE)]
        sample_rate: u32,
    },
    /// Print the text tree.
    Tree {
        dataset: PathBuf,
        #[command(flatten)]
        source: SpecSource,
        #[arg(long)]
        filter: Option<String>,
        /// Print JSON instead of the indented outline.
        #[arg(long)]
        json: bool,
    },
    /// Print the inferred key.
    Key {
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fields: Vec<String>,
    },
    /// Print the default spec.
    Defaults {
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fields: Vec<String>,
    },
    /// Check a spec and print its validation report.
    Validate { spec: PathBuf },
    /// Print a JSON Schema, or write all of them to a directory.
    Schema {
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "POLYMODAL_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug)]
enum Failure {
    Parse(String),
    Invalid(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Invalid(m) | Failure::Other(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    let bytes = read(path)?;
    let format = DataFormat::from_path(&path.to_string_lossy());
    Dataset::load_typed(&bytes, format).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn select(dataset: &Dataset, fields: &[String]) -> Result<Vec<String>, Failure> {
    if fields.is_empty() {
        return Ok(dataset.column_names().iter().map(|s| s.to_string()).collect());
    }
    for f in fields {
        if dataset.column_index(f).is_none() {
            return Err(Failure::Parse(format!("unknown column `{f}`")));
        }
    }
    Ok(fields.to_vec())
}

fn load_spec(path: &Path) -> Result<MultimodalSpec, Failure> {
    let bytes = read(path)?;
    let spec: MultimodalSpec =
        serde_json::from_slice(&bytes).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let report = validate(&spec);
    if !report.is_valid() {
        return Err(Failure::Invalid(format!("invalid spec {}:\n{report}", path.display())));
    }
    Ok(spec)
}

/// The dataset, typed per the spec, and the spec.
fn resolve(dataset: &Path, source: &SpecSource) -> Result<(Dataset, MultimodalSpec), Failure> {
    let ds = load_data(dataset)?;
    match &source.spec {
        Some(path) => {
            let spec = load_spec(path)?;
            let missing = artifacts::missing_columns(&ds, &spec);
            if !missing.is_empty() {
                return Err(Failure::Invalid(format!("spec fields missing from the dataset: {}", missing.join(", "))));
            }
            Ok((artifacts::typed_for(&ds, &spec), spec))
        }
        None => {
            let selected = select(&ds, &source.fields)?;
            let spec = defaults_for_selection(&ds, &selected);
            Ok((ds, spec))
        }
    }
}

fn parse_filter(text: Option<&str>, dataset: &Dataset) -> Result<Predicate, Failure> {
    let Some(text) = text else {
        return Ok(Predicate::True);
    };
    let p: Predicate = serde_json::from_str(text).map_err(|e| Failure::Parse(format!("--filter: {e}")))?;
    p.check(dataset).map_err(|e| Failure::Parse(format!("--filter: {e}")))?;
    Ok(p)
}

fn parse_at(items: &[String]) -> Result<Vec<(String, Value)>, Failure> {
    items
        .iter()
        .map(|item| {
            let (f, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Parse(format!("--at expects field=value, got `{item}`")))?;
            let value = v.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(v));
            Ok((f.to_string(), value))
        })
        .collect()
}

fn resolve_order(spec: &MultimodalSpec, dataset: &Dataset, descriptor: &str, at: &[(String, Value)]) -> Result<PlaybackOrder, Failure> {
    spec.audio
        .iter()
        .find_map(|u| find_order(u, at, dataset, descriptor))
        .ok_or_else(|| {
            let available: Vec<String> = spec
                .audio
                .iter()
                .flat_map(|u| polymodal_core::audio::enumerate_playback_orders(u, at, dataset))
                .map(|o| format!("`{}`", o.descriptor))
                .collect();
            Failure::Parse(format!("no playback order `{descriptor}`; available: {}", available.join(", ")))
        })
}

fn out_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn write_wavs(spec: &MultimodalSpec, schedules: &[polymodal_core::audio::AudioSchedule], out: &Path, sample_rate: u32) -> Outcome {
    let files = artifacts::wav_files(spec, schedules, sample_rate).map_err(|e| Failure::Other(e.to_string()))?;
    for f in files {
        write(&out.join(format!("{}.wav", f.name)), &f.wav)?;
        write(&out.join(format!("{}.cues.json", f.name)), &f.cues)?;
    }
    Ok(())
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Compile {
            dataset,
            source,
            out,
            wav,
            sample_rate,
        } => {
            let (ds, spec) = resolve(&dataset, &source)?;
            out_dir(&out)?;
            if spec.visual.is_empty() {
                eprintln!("no visual units; skipping {}", artifacts::VISUAL_FILE);
            } else {
                let doc = artifacts::visual(&spec, &ds).map_err(|e| Failure::Invalid(e.to_string()))?;
                write(&out.join(artifacts::VISUAL_FILE), &doc)?;
            }
            let tree = artifacts::tree(&spec, &ds, &Predicate::True);
            write(&out.join(artifacts::TEXT_FILE), &artifacts::text_json(&tree))?;
            write(&out.join(artifacts::TEXT_PLAIN_FILE), &artifacts::text_plain(&tree))?;
            let schedules = artifacts::schedules(&spec, &ds, &ScheduleOptions::default())
                .map_err(|e| Failure::Invalid(e.to_string()))?;
            write(&out.join(artifacts::AUDIO_FILE), &artifacts::audio_json(&schedules))?;
            if wav {
                write_wavs(&spec, &schedules, &out, sample_rate)?;
            }
            Ok(())
        }
        Command::Sonify {
            dataset,
            source,
            out,
            order,
            at,
            filter,
            rate,
            ticks,
            sample_rate,
        } => {
            let (ds, spec) = resolve(&dataset, &source)?;
            if !(rate > 0.0) {
                return Err(Failure::Parse("--rate must be positive".into()));
            }
            let filter = parse_filter(filter.as_deref(), &ds)?;
            let at = parse_at(&at)?;
            let order = order
                .map(|d| resolve_order(&spec, &ds, &d, &at))
                .transpose()?;
            let options = ScheduleOptions {
                rate,
                ticks: ticks == Switch::On,
                filter,
                order,
            };
            let schedules = artifacts::schedules(&spec, &ds, &options).map_err(|e| Failure::Invalid(e.to_string()))?;
            out_dir(&out)?;
            write(&out.join(artifacts::AUDIO_FILE), &artifacts::audio_json(&schedules))?;
            write_wavs(&spec, &schedules, &out, sample_rate)
        }
        Command::Tree {
            dataset,
            source,
            filter,
            json,
        } => {
            let (ds, spec) = resolve(&dataset, &source)?;
            let filter = parse_filter(filter.as_deref(), &ds)?;
            let tree = artifacts::tree(&spec, &ds, &filter);
            let bytes = if json { artifacts::text_json(&tree) } else { artifacts::text_plain(&tree) };
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
        Command::Key { dataset, fields } => {
            let ds = load_data(&dataset)?;
            let selected = select(&ds, &fields)?;
            print!("{}", String::from_utf8_lossy(&json_bytes(&infer_key(&ds, &selected))));
            Ok(())
        }
        Command::Defaults { dataset, fields } => {
            let ds = load_data(&dataset)?;
            let selected = select(&ds, &fields)?;
            print!("{}", String::from_utf8_lossy(&json_bytes(&defaults_for_selection(&ds, &selected))));
            Ok(())
        }
        Command::Validate { spec } => {
            load_spec(&spec)?;
            println!("valid");
            Ok(())
        }
        Command::Schema { name, out } => match (name, out) {
            (_, Some(dir)) => {
                out_dir(&dir)?;
                for (name, schema) in schemas::all() {
                    write(&dir.join(format!("{name}.schema.json")), &json_bytes(&schema))?;
                }
                Ok(())
            }
            (Some(name), None) => {
                let schema = schemas::get(&name).ok_or_else(|| {
                    let names: Vec<&str> = schemas::all().iter().map(|(n, _)| *n).collect();
                    Failure::Parse(format!("unknown schema `{name}`; one of {}", names.join(", ")))
                })?;
                print!("{}", String::from_utf8_lossy(&json_bytes(&schema)));
                Ok(())
            }
            (None, None) => {
                for (name, _) in schemas::all() {
                    println!("{name}");
                }
                Ok(())
            }
        },
        Command::Serve { addr } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
            runtime
                .block_on(crate::server::serve(&addr))
                .map_err(|e| Failure::Other(format!("{addr}: {e}")))
        }
    }
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
