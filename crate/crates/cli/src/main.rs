//! `loadpath`: batch pipeline and streaming service launcher.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 unstable verdict
//! under `analyze --strict`.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "loadpath", version, about = "Toolpaths, motion programs and print analysis for robotic clay extrusion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write machine output here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// mm/s
    #[arg(long, default_value_t = 30.0)]
    pub extrude_speed: f64,
    /// mm/s
    #[arg(long, default_value_t = 60.0)]
    pub travel_speed: f64,
    /// g/s
    #[arg(long, default_value_t = 2.0)]
    pub flow: f64,
    /// Longest emitted move, mm.
    #[arg(long, default_value_t = 12.0)]
    pub max_segment: f64,
    /// Dwell after each EXT ON, s.
    #[arg(long, default_value_t = 0.5)]
    pub lead_dwell: f64,
    /// Travel lift, mm.
    #[arg(long, default_value_t = 2.0)]
    pub hop: f64,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Mesh to toolpath JSON.
    Slice {
        mesh: PathBuf,
        #[arg(long)]
        layer_height: f64,
        /// Infill shell depth from the outer wall, mm.
        #[arg(long, requires = "infill_spacing", conflicts_with = "spiral")]
        shell: Option<f64>,
        #[arg(long, requires = "shell")]
        infill_spacing: Option<f64>,
        #[arg(long, default_value = "zigzag", value_parser = ["zigzag", "concentric"])]
        pattern: String,
        /// One continuous climbing extrusion.
        #[arg(long)]
        spiral: bool,
        /// Overhang warning threshold, degrees from vertical.
        #[arg(long, default_value_t = 30.0)]
        overhang_angle: f64,
        #[command(flatten)]
        output: Output,
    },
    /// L-system grammar script to toolpath JSON.
    Lsys {
        grammar: PathBuf,
        /// Comma-separated generations, stacked bottom to top.
        #[arg(long, value_delimiter = ',', required = true)]
        generations: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        z_step: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Weave spec JSON to toolpath JSON.
    Weave {
        spec: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Toolpath JSON to CPL.
    Plan {
        toolpath: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        output: Output,
    },
    /// CPL to program statistics JSON.
    Stats {
        program: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Toolpath and material to stability report JSON.
    Analyze {
        toolpath: PathBuf,
        #[arg(long)]
        material: PathBuf,
        /// Bead cross-section, mm².
        #[arg(long, default_value_t = 50.0)]
        bead_area: f64,
        /// Required distance of the centre of mass inside the base, mm.
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        /// Shortest layer time that lets the layer below firm up, s.
        #[arg(long, default_value_t = 10.0)]
        min_layer_time: f64,
        /// Exit 3 unless the verdict is stable.
        #[arg(long)]
        strict: bool,
        /// Also write the per-layer table to stderr.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        output: Output,
    },
    /// CPL to print report JSON from the virtual printer.
    Simulate {
        program: PathBuf,
        #[arg(long, default_value = "stop_and_go")]
        pump_mode: String,
        /// A fault spec JSON file, or a count of random disruptions.
        #[arg(long)]
        faults: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace every EXT ON flow, g/s.
        #[arg(long)]
        pump_flow: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        start_latency: f64,
        #[arg(long, default_value_t = 0.0)]
        stop_latency: f64,
        /// Operator stop at this time, s.
        #[arg(long)]
        halt_at: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Stream a CPL program to a printer endpoint under operator control.
    Serve {
        program: PathBuf,
        /// Operator WebSocket address.
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: String,
        /// Printer endpoint `host:port`, or `virtual` for the in-process printer.
        #[arg(long, default_value = "virtual")]
        endpoint: String,
        #[arg(long, default_value_t = loadpath_streamd::session::DEFAULT_WINDOW)]
        window: usize,
        /// Virtual printer execution time per MOVE, ms.
        #[arg(long, default_value_t = 0)]
        move_delay_ms: u64,
        /// Start printing without waiting for an operator.
        #[arg(long)]
        autostart: bool,
    },
    /// Pre-scale a mesh against firing shrinkage.
    Compensate {
        mesh: PathBuf,
        /// Linear shrinkage fraction in [0, 1).
        #[arg(long, required_unless_present = "material", conflicts_with = "material")]
        shrinkage: Option<f64>,
        /// Take the shrinkage from this material's firing table.
        #[arg(long, requires = "firing_temp")]
        material: Option<PathBuf>,
        /// °C
        #[arg(long)]
        firing_temp: Option<u32>,
        /// Write ASCII STL instead of binary.
        #[arg(long)]
        ascii: bool,
        #[command(flatten)]
        output: Output,
    },
}

/// Failures mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Unstable(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    let filter = std::env::var("LOADPATH_LOG").unwrap_or_else(|_| "warn".into());
    env_logger::Builder::new().parse_filters(&filter).format_timestamp(None).init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Unstable(v)) => {
            eprintln!("unstable: {v}");
            ExitCode::from(3)
        }
    }
}
