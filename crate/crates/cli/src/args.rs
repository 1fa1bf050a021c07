//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Single-photon emitter characterization toolkit: Monte Carlo stream
/// simulation, g² correlation, decay and saturation fitting, blinking
/// statistics, FLID maps, and spectral metrics.
#[derive(Parser, Debug)]
#[command(name = "photonstat", version, max_term_width = 100)]
pub struct Cli {
    /// RNG seed; overrides the seed stored in a model file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for correlation and density grids
    /// (falls back to the PHOTONSTAT_THREADS environment variable).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a photon stream from an emitter model.
    Simulate(SimulateArgs),
    /// Cross-correlate the two detector channels and extract g²(0).
    G2(G2Args),
    /// Build the decay histogram and fit the tri-exponential model.
    Decay(DecayArgs),
    /// Fit the saturation curve to (power, intensity) points.
    Satfit(SatfitArgs),
    /// Segment the intensity trace and fit the OFF-duration statistics.
    Blink(BlinkArgs),
    /// Build the fluorescence lifetime-intensity distribution map.
    Flid(FlidArgs),
    /// Extract peak metrics (CEW, FWHM) from an emission spectrum.
    Spectrum(SpectrumArgs),
    /// Aggregate per-emitter peak metrics into cohort statistics.
    Cohort(CohortArgs),
    /// Run the full pipeline on a bundled emitter profile and compare
    /// against its targets.
    Repro(ReproArgs),
    /// Convert a stream between the binary and TSV formats.
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Emitter model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Acquisition length (e.g. 600s, the trace length of the reference
    /// measurements).
    #[arg(long, default_value = "600s")]
    pub duration: String,
    /// Output stream path (.psph or .tsv).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct G2Args {
    /// Input stream (.psph or .tsv).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Correlation bin width.
    #[arg(long, default_value = "1ns")]
    pub bin: String,
    /// Delay half-range; defaults to 25 pulse periods.
    #[arg(long)]
    pub max_delay: Option<String>,
    /// Delay beyond which side peaks normalize to 1; defaults to
    /// 10 pulse periods (must exceed the blinking correlation time).
    #[arg(long)]
    pub reference_delay: Option<String>,
    /// Subtract uncorrelated background (dark counts) before
    /// normalization.
    #[arg(long)]
    pub clean: bool,
    /// Side peaks averaged for the g²(0) reference area.
    #[arg(long, default_value_t = 20)]
    pub side_peaks: usize,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecayArgs {
    /// Input stream (.psph or .tsv).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Micro-time bin width.
    #[arg(long, default_value = "100ps")]
    pub bin: String,
    /// Decay model to fit.
    #[arg(long, value_enum, default_value_t = DecayModel::Triexp)]
    pub fit: DecayModel,
    /// Plain least squares instead of Poisson weighting.
    #[arg(long)]
    pub unweighted: bool,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum DecayModel {
    Triexp,
}

#[derive(Args, Debug)]
pub struct SatfitArgs {
    /// CSV of `power,intensity` rows.
    #[arg(long)]
    pub csv: PathBuf,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(Args, Debug)]
pub struct BlinkArgs {
    /// Input stream (.psph or .tsv).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Intensity bin width (10 ms in the reference measurements).
    #[arg(long, default_value = "10ms")]
    pub bin: String,
    /// ON/OFF threshold in counts per bin; bins strictly below are OFF.
    #[arg(long, default_value_t = 15)]
    pub threshold: u32,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(Args, Debug)]
pub struct FlidArgs {
    /// Input stream (.psph or .tsv).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Intensity bin width.
    #[arg(long, default_value = "10ms")]
    pub bin: String,
    /// Density grid resolution, e.g. 128x128.
    #[arg(long, default_value = "128x128")]
    pub grid: String,
    /// CSV output path (`intensity,lifetime_ns,density` rows).
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Spectrum CSV (`wavelength_nm,counts`).
    #[arg(long)]
    pub csv: PathBuf,
    /// Peak extraction method.
    #[arg(long, value_enum, default_value_t = Method::Gaussian)]
    pub method: Method,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Method {
    Gaussian,
    Halfmax,
}

#[derive(Args, Debug)]
pub struct CohortArgs {
    /// Glob over per-emitter metric JSON files, e.g. 'dots/*.json'.
    #[arg(long)]
    pub glob: String,
    /// JSON output path.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReproArgs {
    /// Bundled emitter profile.
    #[arg(long, value_enum)]
    pub profile: Profile,
    /// Acquisition length per stage.
    #[arg(long, default_value = "600s")]
    pub duration: String,
    /// Directory for the generated artifacts.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Profile {
    X0,
    X08,
    X1,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Input stream; format inferred from the extension.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output stream; format inferred from the extension.
    #[arg(long)]
    pub out: PathBuf,
}
