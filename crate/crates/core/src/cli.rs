//! Command-line front end. Each subcommand reads and writes plain files and
//! echoes its full configuration into the output report.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bell::{chsh_s, simulate_chsh_trials, AnalyzerAngles, ChshResult, EntangledModel};
use crate::coincidence::{
    count_coincidences, delay_grid, delay_scan, heralding_ratio, CoincidenceConfig, DEFAULT_SCAN_STEP_PS,
};
use crate::correction::{solve_inverse_with, CountModel, PropagationMode, WindowParams};
use crate::error::{Error, Result};
use crate::fit::fit_gaussian;
use crate::pipeline::{run_batch, run_pipeline, PipelineConfig, ZSummary};
use crate::report::{read_input, write_atomic, write_json, Report, TOOL_VERSION};
use crate::sim::{simulate, SourceModel};
use crate::stream::{read_csv, read_streams, sidecar_path, write_csv, Channel, EventStream, StreamMetadata};
use crate::trace::{
    discriminate, pulse_height_histogram, replica_trace, synthesize, DiscriminatorConfig, HistogramBins, Polarity,
    PulseShape, Waveform, WaveformHeader,
};

#[derive(Debug, Parser)]
#[command(name = "heralded", version, about = "Heralded photon source simulation and rate correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate signal and herald detection streams into a timestamp CSV.
    Simulate(SimulateArgs),
    /// Count singles and coincidences in a timestamp CSV.
    Count(CountArgs),
    /// Coincidence rate as a function of signal delay.
    ScanDelay(ScanArgs),
    /// Recover pair rate and efficiencies from measured rates.
    Correct(CorrectArgs),
    /// Synthesize an analog trace from events or the built-in replica.
    Synthesize(SynthesizeArgs),
    /// Leading-edge discrimination of a trace into a timestamp CSV.
    Discriminate(DiscriminateArgs),
    /// Pulse-height histogram of a trace.
    Phd(PhdArgs),
    /// CHSH test on a simulated polarization-entangled source.
    Chsh(ChshArgs),
    /// Simulate, count and correct, then compare with the truth.
    Pipeline(PipelineArgs),
}

fn parse_polarity(s: &str) -> std::result::Result<Polarity, String> {
    match s {
        "positive" => Ok(Polarity::Positive),
        "negative" => Ok(Polarity::Negative),
        _ => Err(format!("expected `positive` or `negative`, got `{s}`")),
    }
}

fn parse_channel(s: &str) -> std::result::Result<Channel, String> {
    s.parse::<u8>()
        .ok()
        .and_then(|c| Channel::from_code(c).ok())
        .ok_or_else(|| format!("expected channel 1 or 2, got `{s}`"))
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct SourceArgs {
    #[arg(long, default_value_t = 57_200.0)]
    pub pair_rate_hz: f64,
    #[arg(long, default_value_t = 0.822)]
    pub eta_signal: f64,
    #[arg(long, default_value_t = 0.115)]
    pub eta_herald: f64,
    #[arg(long, default_value_t = 50_000)]
    pub deadtime_signal_ps: i64,
    #[arg(long, default_value_t = 1_000_000)]
    pub deadtime_herald_ps: i64,
    #[arg(long, default_value_t = 0)]
    pub jitter_fwhm_signal_ps: i64,
    #[arg(long, default_value_t = 0)]
    pub jitter_fwhm_herald_ps: i64,
    #[arg(long, default_value_t = 0.0)]
    pub background_rate_signal_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    pub background_rate_herald_hz: f64,
    #[arg(long, default_value_t = 100_000_000_000_000)]
    pub duration_ps: i64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

impl SourceArgs {
    pub fn model(&self) -> SourceModel {
        SourceModel {
            pair_rate_hz: self.pair_rate_hz,
            eta_signal: self.eta_signal,
            eta_herald: self.eta_herald,
            deadtime_signal_ps: self.deadtime_signal_ps,
            deadtime_herald_ps: self.deadtime_herald_ps,
            jitter_fwhm_signal_ps: self.jitter_fwhm_signal_ps,
            jitter_fwhm_herald_ps: self.jitter_fwhm_herald_ps,
            background_rate_signal_hz: self.background_rate_signal_hz,
            background_rate_herald_hz: self.background_rate_herald_hz,
            duration_ps: self.duration_ps,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct CoincidenceArgs {
    #[arg(long, default_value_t = 50_000)]
    pub pulse_len_signal_ps: i64,
    #[arg(long, default_value_t = 1_000_000)]
    pub pulse_len_herald_ps: i64,
    #[arg(long, default_value_t = 3_000)]
    pub min_overlap_ps: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub delay_offset_ps: i64,
}

impl CoincidenceArgs {
    pub fn config(&self) -> CoincidenceConfig {
        CoincidenceConfig {
            pulse_len_signal_ps: self.pulse_len_signal_ps,
            pulse_len_herald_ps: self.pulse_len_herald_ps,
            min_overlap_ps: self.min_overlap_ps,
            delay_offset_ps: self.delay_offset_ps,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Output CSV, or `-` for stdout. A `.json` sidecar is written next to files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct StreamInput {
    /// Timestamp CSV, or `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    /// Acquisition length; read from the sidecar when omitted.
    #[arg(long)]
    pub duration_ps: Option<i64>,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct CountArgs {
    #[command(flatten)]
    pub input: StreamInput,
    #[command(flatten)]
    pub coincidence: CoincidenceArgs,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: StreamInput,
    #[command(flatten)]
    pub coincidence: CoincidenceArgs,
    #[arg(long, default_value_t = -2_000_000, allow_hyphen_values = true)]
    pub start_ps: i64,
    #[arg(long, default_value_t = 2_000_000, allow_hyphen_values = true)]
    pub stop_ps: i64,
    #[arg(long, default_value_t = DEFAULT_SCAN_STEP_PS)]
    pub step_ps: i64,
    /// Fit a Gaussian plus baseline to the scan.
    #[arg(long)]
    pub fit: bool,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PropagationArg {
    Jacobian,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CountModelArg {
    Independent,
    SharedCoincidences,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct CorrectArgs {
    /// Rates JSON, or `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = PropagationArg::Jacobian)]
    pub propagation: PropagationArg,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CountModelArg::Independent)]
    pub count_model: CountModelArg,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct SynthesizeArgs {
    /// Timestamp CSV whose events become pulses.
    #[arg(long, conflicts_with = "replica", required_unless_present = "replica")]
    pub input: Option<PathBuf>,
    /// Which channel of the input to render.
    #[arg(long, default_value = "1", value_parser = parse_channel)]
    pub channel: Channel,
    /// Render the built-in four-pulse replica trace instead.
    #[arg(long)]
    pub replica: bool,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 100_000)]
    pub rise_time_ps: i64,
    #[arg(long, default_value_t = 1_500_000)]
    pub decay_time_ps: i64,
    #[arg(long, default_value_t = 0.0)]
    pub wiggle_amplitude: f64,
    #[arg(long, default_value_t = 0)]
    pub wiggle_delay_ps: i64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_rms: f64,
    #[arg(long, default_value_t = 1_000)]
    pub sample_period_ps: i64,
    /// Trace length; defaults to the input sidecar duration.
    #[arg(long)]
    pub duration_ps: Option<i64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "positive", value_parser = parse_polarity)]
    pub polarity: Polarity,
    /// Raw little-endian f32 samples; the header goes to a `.json` sidecar.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct DiscriminatorArgs {
    /// Raw f32 trace with a `.json` sidecar header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub rearm_dead_ps: i64,
    /// Overrides the polarity recorded in the sidecar.
    #[arg(long, value_parser = parse_polarity)]
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct DiscriminateArgs {
    #[command(flatten)]
    pub disc: DiscriminatorArgs,
    #[arg(long, default_value = "1", value_parser = parse_channel)]
    pub channel: Channel,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct PhdArgs {
    #[command(flatten)]
    pub disc: DiscriminatorArgs,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub min: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub max: f64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct ChshArgs {
    #[arg(long, default_value_t = 0.8874)]
    pub visibility: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a_prime: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b_prime: Option<f64>,
    #[arg(long, default_value_t = 0.797)]
    pub heralding_eta: f64,
    #[arg(long, default_value_t = 0.85)]
    pub analyzer_transmission: f64,
    #[arg(long, default_value_t = 18_000.0)]
    pub pair_rate_hz: f64,
    #[arg(long, default_value_t = 1.0)]
    pub integration_s_per_setting: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct PipelineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub coincidence: CoincidenceArgs,
    /// Independent repetitions on per-trial random substreams.
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

/// Rates file accepted by `correct`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesInput {
    pub s1_hz: f64,
    pub s2_hz: f64,
    pub cc_hz: f64,
    pub duration_s: f64,
    pub tau_w_ps: i64,
    pub tau_max_ps: i64,
    pub tau_d1_ps: i64,
    pub tau_d2_ps: i64,
}

impl RatesInput {
    pub fn window(&self) -> WindowParams {
        WindowParams {
            tau_w_ps: self.tau_w_ps,
            tau_max_ps: self.tau_max_ps,
            tau_d_signal_ps: self.tau_d1_ps,
            tau_d_herald_ps: self.tau_d2_ps,
        }
    }
}

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn load_streams(input: &StreamInput) -> Result<(EventStream, EventStream, i64)> {
    let bytes = read_input(&input.input)?;
    let duration_ps = match input.duration_ps {
        Some(d) => d,
        None if is_stdio(&input.input) => {
            return Err(Error::Validation("--duration_ps is required when reading stdin".into()));
        }
        None => read_stream_metadata(&input.input)?.duration_ps,
    };
    let (s, h) = read_streams(bytes.as_slice(), duration_ps)?;
    Ok((s, h, duration_ps))
}

fn read_stream_metadata(csv: &Path) -> Result<StreamMetadata> {
    let side = sidecar_path(csv);
    let bytes = fs::read(&side)
        .map_err(|e| Error::Validation(format!("no duration given and sidecar {} unreadable: {e}", side.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn write_stream_file(out: &Path, streams: &[&EventStream], meta: &StreamMetadata) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(&mut buf, streams)?;
    write_atomic(out, &buf)?;
    if !is_stdio(out) {
        write_json(&sidecar_path(out), meta)?;
    }
    Ok(())
}

fn load_waveform(path: &Path) -> Result<Waveform> {
    let header: WaveformHeader = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    Waveform::from_le_bytes(&fs::read(path)?, &header)
}

fn disc_config(args: &DiscriminatorArgs, w: &Waveform) -> DiscriminatorConfig {
    DiscriminatorConfig {
        threshold: args.threshold,
        rearm_dead_ps: args.rearm_dead_ps,
        polarity: args.polarity.unwrap_or(w.polarity()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Count(a) => cmd_count(&a),
        Command::ScanDelay(a) => cmd_scan(&a),
        Command::Correct(a) => cmd_correct(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Discriminate(a) => cmd_discriminate(&a),
        Command::Phd(a) => cmd_phd(&a),
        Command::Chsh(a) => cmd_chsh(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let model = a.source.model();
    let (signal, herald) = simulate(&model)?;
    let meta = StreamMetadata {
        duration_ps: model.duration_ps,
        source_model: Some(model),
        tool_version: TOOL_VERSION.to_string(),
    };
    write_stream_file(&a.out, &[&signal, &herald], &meta)
}

#[derive(Serialize)]
struct StreamConfig<'a, C: Serialize> {
    input: &'a Path,
    duration_ps: i64,
    #[serde(flatten)]
    params: C,
}

pub fn cmd_count(a: &CountArgs) -> Result<()> {
    let cfg = a.coincidence.config();
    let (s, h, duration_ps) = load_streams(&a.input)?;
    let counts = count_coincidences(&s, &h, &cfg)?;
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        counts: crate::coincidence::CountsSummary,
        heralding_ratio: Option<crate::coincidence::HeraldingRatio>,
    }
    let out = Out { heralding_ratio: heralding_ratio(&counts).ok(), counts };
    let config = StreamConfig { input: &a.input.input, duration_ps, params: cfg };
    write_json(&a.out, &Report::new(&config, out))
}

pub fn cmd_scan(a: &ScanArgs) -> Result<()> {
    let cfg = a.coincidence.config();
    let (s, h, duration_ps) = load_streams(&a.input)?;
    let delays = delay_grid(a.start_ps, a.stop_ps, a.step_ps)?;
    let scan = delay_scan(&s, &h, &cfg, &delays)?;
    #[derive(Serialize)]
    struct FitOut {
        #[serde(flatten)]
        fit: crate::fit::GaussianFit,
        fwhm_ps: f64,
        fwhm_deconvolved_ps: f64,
    }
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        scan: crate::coincidence::DelayScan,
        #[serde(skip_serializing_if = "Option::is_none")]
        fit: Option<FitOut>,
    }
    let fit = if a.fit {
        let x: Vec<f64> = scan.delays_ps.iter().map(|&d| d as f64).collect();
        let f = fit_gaussian(&x, &scan.coincidence_rates_hz)?;
        Some(FitOut {
            fwhm_ps: f.fwhm(),
            fwhm_deconvolved_ps: f.fwhm_deconvolved(cfg.effective_window_ps() as f64),
            fit: f,
        })
    } else {
        None
    };
    #[derive(Serialize)]
    struct Cfg {
        #[serde(flatten)]
        coincidence: CoincidenceConfig,
        start_ps: i64,
        stop_ps: i64,
        step_ps: i64,
    }
    let params = Cfg { coincidence: cfg, start_ps: a.start_ps, stop_ps: a.stop_ps, step_ps: a.step_ps };
    let config = StreamConfig { input: &a.input.input, duration_ps, params };
    write_json(&a.out, &Report::new(&config, Out { scan, fit }))
}

pub fn cmd_correct(a: &CorrectArgs) -> Result<()> {
    let rates: RatesInput = serde_json::from_slice(&read_input(&a.input)?)?;
    let measured =
        crate::coincidence::CountsSummary::from_rates(rates.s1_hz, rates.s2_hz, rates.cc_hz, rates.duration_s)?;
    let mode = match a.propagation {
        PropagationArg::Jacobian => PropagationMode::Jacobian,
        PropagationArg::MonteCarlo => PropagationMode::MonteCarlo { draws: a.draws, seed: a.seed },
    };
    let counts = match a.count_model {
        CountModelArg::Independent => CountModel::Independent,
        CountModelArg::SharedCoincidences => CountModel::SharedCoincidences,
    };
    let est = solve_inverse_with(&measured, &rates.window(), mode, counts)?;
    #[derive(Serialize)]
    struct Cfg {
        #[serde(flatten)]
        rates: RatesInput,
        propagation: PropagationMode,
        count_model: CountModel,
    }
    let config = Cfg { rates, propagation: mode, count_model: counts };
    write_json(&a.out, &Report::new(&config, est))
}

pub fn cmd_synthesize(a: &SynthesizeArgs) -> Result<()> {
    let w = if a.replica {
        replica_trace()?.waveform
    } else {
        let input = a.input.as_ref().ok_or_else(|| Error::Validation("--input or --replica required".into()))?;
        let (s, h) = read_csv(read_input(input)?.as_slice())?;
        let duration_ps = match a.duration_ps {
            Some(d) => d,
            None if is_stdio(input) => {
                return Err(Error::Validation("--duration_ps is required when reading stdin".into()))
            }
            None => read_stream_metadata(input)?.duration_ps,
        };
        let events = match a.channel {
            Channel::Signal => s,
            Channel::Herald => h,
        };
        let shape = PulseShape::new(a.amplitude, a.rise_time_ps, a.decay_time_ps)?
            .with_wiggle(a.wiggle_amplitude, a.wiggle_delay_ps);
        let events: Vec<i64> = events.into_iter().filter(|&t| t < duration_ps).collect();
        let w = synthesize(&events, &shape, a.noise_rms, duration_ps, a.sample_period_ps, a.seed)?;
        if a.polarity == Polarity::Negative {
            let samples = w.samples().iter().map(|v| -v).collect();
            Waveform::new(samples, w.sample_period_ps(), w.t0_ps(), Polarity::Negative)?
        } else {
            w
        }
    };
    if is_stdio(&a.out) {
        return Err(Error::Validation("waveform output needs a file path".into()));
    }
    write_atomic(&a.out, &w.to_le_bytes())?;
    write_json(&sidecar_path(&a.out), &w.header())
}

pub fn cmd_discriminate(a: &DiscriminateArgs) -> Result<()> {
    let w = load_waveform(&a.disc.input)?;
    let cfg = disc_config(&a.disc, &w);
    let events = discriminate(&w, &cfg, a.channel)?;
    let meta = StreamMetadata { duration_ps: w.end_ps(), source_model: None, tool_version: TOOL_VERSION.to_string() };
    write_stream_file(&a.out, &[&events], &meta)
}

pub fn cmd_phd(a: &PhdArgs) -> Result<()> {
    let w = load_waveform(&a.disc.input)?;
    let cfg = disc_config(&a.disc, &w);
    let bins = HistogramBins { min: a.min, max: a.max, count: a.bins };
    let hist = pulse_height_histogram(&w, &cfg, &bins)?;
    #[derive(Serialize)]
    struct Cfg<'a> {
        input: &'a Path,
        #[serde(flatten)]
        discriminator: DiscriminatorConfig,
        bins: HistogramBins,
    }
    let config = Cfg { input: &a.disc.input, discriminator: cfg, bins };
    write_json(&a.out, &Report::new(&config, hist))
}

pub fn cmd_chsh(a: &ChshArgs) -> Result<()> {
    let c = AnalyzerAngles::canonical();
    let model = EntangledModel {
        visibility: a.visibility,
        angles: AnalyzerAngles {
            a: a.a.unwrap_or(c.a),
            a_prime: a.a_prime.unwrap_or(c.a_prime),
            b: a.b.unwrap_or(c.b),
            b_prime: a.b_prime.unwrap_or(c.b_prime),
        },
        heralding_eta: a.heralding_eta,
        analyzer_transmission: a.analyzer_transmission,
    };
    if a.trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    let runs = simulate_chsh_trials(&model, a.pair_rate_hz, a.integration_s_per_setting, a.seed, a.trials)?;
    #[derive(Serialize)]
    struct Cfg {
        #[serde(flatten)]
        model: EntangledModel,
        pair_rate_hz: f64,
        integration_s_per_setting: f64,
        seed: u64,
        trials: u64,
    }
    #[derive(Serialize)]
    struct Out {
        s_expected: f64,
        s_spread: ZSummary,
        runs: Vec<ChshResult>,
    }
    let out = Out { s_expected: chsh_s(&model), s_spread: ZSummary::of(runs.iter().map(|r| r.s)), runs };
    let config = Cfg {
        model,
        pair_rate_hz: a.pair_rate_hz,
        integration_s_per_setting: a.integration_s_per_setting,
        seed: a.seed,
        trials: a.trials,
    };
    write_json(&a.out, &Report::new(&config, out))
}

pub fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig { source: a.source.model(), coincidence: a.coincidence.config() };
    match a.trials {
        0 => Err(Error::Validation("trials must be at least 1".into())),
        1 => write_json(&a.out, &Report::new(&cfg, run_pipeline(&cfg, 0)?)),
        n => write_json(&a.out, &Report::new(&cfg, run_batch(&cfg, n)?)),
    }
}
