//! `deformstream` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use deformstream_core::abr::AbrError;
use deformstream_core::codec::CodecError;
use deformstream_core::deform::DeformError;
use deformstream_core::mesh::MeshError;
use deformstream_core::metrics::MetricsError;
use deformstream_core::netsim::NetsimError;
use deformstream_core::registration::RegistrationError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Abr(#[from] AbrError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
}

const WRAPPERS: [&str; 7] = ["Mesh", "Codec", "Deform", "Registration", "Metrics", "Abr", "Netsim"];

impl CliError {
    /// Name of the innermost error variant, e.g. `MissingDirectory`.
    pub fn kind(&self) -> String {
        let repr = format!("{self:?}");
        let mut rest = repr.as_str();
        loop {
            let end = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
            let ident = &rest[..end];
            match rest[end..].strip_prefix('(') {
                Some(inner) if WRAPPERS.contains(&ident) => rest = inner,
                _ => return ident.to_string(),
            }
        }
    }
}

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (`key=value`); may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(name = "deformstream", version, about = "Deformation-graph mesh sequence codec and streaming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a directory of OBJ frames into a stream file.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the rate-distortion curve of the ladder as CSV.
        #[arg(long)]
        rd_curve: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Decode a stream into OBJ frames at one level or following a plan file.
    Decode {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Ladder level index for every P-frame (default: finest).
        #[arg(long, conflicts_with = "plan")]
        level: Option<usize>,
        /// JSON-lines plan as written by `simulate`.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Ground-truth OBJ directory for per-frame Hausdorff and raw frames.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Stream an encoded file over a bandwidth trace.
    Simulate {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Directory for report.json, report.csv and plans.jsonl.
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Decode-time model JSON written by `profile-decode`.
        #[arg(long)]
        decode_model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// BD-rate of curve B against curve A, in percent.
    Bdrate { reference: PathBuf, test: PathBuf },
    /// Fit the per-frame decode time against node count.
    ProfileDecode {
        /// Mesh to deform; defaults to a 5114-vertex sphere.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "120,500,1000,2000,4600")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic OBJ sequence.
    GenSynthetic {
        /// rigid_translate, rigid_rotate or bend.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 0.5)]
        magnitude: f64,
        /// sphere, cylinder, cube or grid.
        #[arg(long, default_value = "cylinder")]
        primitive: String,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Encode { input, output, rd_curve, common } => commands::encode(&input, &output, rd_curve.as_deref(), &common),
        Command::Decode { stream, output, level, plan, reference, common } => {
            commands::decode(&stream, &output, level, plan.as_deref(), reference.as_deref(), &common)
        }
        Command::Simulate { stream, trace, output_dir, reference, decode_model, common } => {
            commands::simulate(&stream, &trace, &output_dir, reference.as_deref(), decode_model.as_deref(), &common)
        }
        Command::Bdrate { reference, test } => commands::bdrate(&reference, &test),
        Command::ProfileDecode { mesh, counts, repetitions, output, common } => {
            commands::profile(mesh.as_deref(), &counts, repetitions, output.as_deref(), &common)
        }
        Command::GenSynthetic { kind, output, frames, magnitude, primitive, resolution, common } => {
            commands::gen_synthetic(&kind, &output, frames, magnitude, &primitive, resolution, &common)
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    println!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let err = CliError::Usage(e.kind().to_string());
            return fail(&err.kind(), &err.to_string(), 1);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => fail(&e.kind(), &e.to_string(), 1),
        Err(_) => fail("Internal", "internal error", 2),
    }
}
