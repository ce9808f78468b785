use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "sit-stab", version, about = "Sterile insect release feedback, observers and certificates")]
pub struct Cli {
    /// Model parameter file (JSON). Defaults to the built-in field calibration.
    #[arg(long, global = true, env = "SIT_STAB_PARAMS")]
    pub params: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Run a scenario and write its trajectory as CSV.
    Simulate(SimulateArgs),
    /// Print the release-ratio threshold theta* and the basic offspring number.
    Threshold,
    /// Check an observer certificate at every vertex of the parameter box.
    Certify(CertifyArgs),
    /// Compute an observer certificate.
    Synthesize(SynthesizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ClosedLoop,
    Proportional,
    Robustness,
    Observer,
    Coupled,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::ClosedLoop => "closed-loop",
            Kind::Proportional => "proportional",
            Kind::Robustness => "robustness",
            Kind::Observer => "observer",
            Kind::Coupled => "coupled",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    #[default]
    Rk4,
    Rk45,
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Scenario file (JSON); its values take precedence over flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Mating rate eta2 of the simulated plant (robustness runs).
    #[arg(long)]
    pub eta2_plant: Option<f64>,
    /// Carrying capacity: a number or "inf".
    #[arg(long = "K", alias = "k")]
    pub capacity: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Initial state E,M,Y,F,U[,Ms]; a missing Ms is 0.
    #[arg(long)]
    pub x0: Option<String>,
    /// Initial estimate, same layout as --x0.
    #[arg(long)]
    pub xh0: Option<String>,
    /// Constant release rate for observer runs.
    #[arg(long)]
    pub u_const: Option<f64>,
    /// Observer gain file {"L": [[..]]}.
    #[arg(long)]
    pub gain: Option<PathBuf>,
    /// Certificate file; supplies L = P^-1 R' and the error metric P.
    #[arg(long)]
    pub cert: Option<PathBuf>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every N-th step to the CSV.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
    /// Also write the summary as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    #[arg(long)]
    pub no_projection: bool,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Certificate file {"P": .., "R": .., "xi": ..}; R may be omitted.
    #[arg(long)]
    pub cert: PathBuf,
    /// Override the decay parameter stored in the file.
    #[arg(long)]
    pub xi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub margin: f64,
    #[arg(long)]
    pub out: PathBuf,
}
