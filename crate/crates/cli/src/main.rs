//! `stae`: encode and decode clips, plan budgets, run channel simulations.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 malformed
//! input or data, 5 no option meets the deadline.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use stae_core::attention::{synthesize_encoder_weights, SemanticEncoder};
use stae_core::budget::{BudgetPair, BudgetSets, SpatialBudget};
use stae_core::clip::{clip_from_bytes, clip_to_bytes, import_planar_u8, CLIP_MAGIC};
use stae_core::codec::{decode_packet, encode_packet_with_stats, PayloadEncoding, PACKET_MAGIC};
use stae_core::latency::{LinkModel, SizeConvention, REFERENCE_DIMS};
use stae_core::planner::{enumerate_options, select, PlannerOptions};
use stae_core::profile::{DeploymentProfile, Method};
use stae_core::recovery::{
    recover, synthesize_recovery_weights, zero_fill, RecoveryMode, RecoveryNetConfig,
};
use stae_core::simulator::{
    export_records, frontier, frontier_csv, rate_sweep, rate_sweep_csv, run, ChannelTrace,
    Interpolation, ReportFormat, Scenario,
};
use stae_core::tensor::ClipDims;
use stae_core::weights::{WeightBundle, WEIGHT_MAGIC};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_FORMAT: u8 = 4;
const EXIT_INFEASIBLE: u8 = 5;

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
    Format(anyhow::Error),
    Infeasible(Value),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_IO,
            Failure::Format(_) => EXIT_FORMAT,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

type CmdResult = Result<Value, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn format(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Format(e.into())
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Io)
}

#[derive(Parser)]
#[command(name = "stae", version, about = "Attention-based video compression and offloading planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a clip into a semantic packet.
    Encode(EncodeArgs),
    /// Decode a packet and recover the missing pixels.
    Decode(DecodeArgs),
    /// Choose execution mode, budgets and entropy coding for a link and deadline.
    Plan(PlanArgs),
    /// Replay periodic tasks over a channel trace.
    Simulate(SimulateArgs),
    /// Dump the deployment profile and plot tables.
    Tables(TablesArgs),
    /// Describe a packet, clip or weight file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct WeightArgs {
    /// Weight bundle file.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Synthesize weights from this seed instead of loading a file.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntropyFlag {
    Auto,
    On,
    Off,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Treat the input as planar 8-bit video with these dims (F,C,H,W).
    #[arg(long, value_name = "F,C,H,W")]
    raw_rgb: Option<String>,
    #[arg(long)]
    alpha_k: usize,
    /// Spatial budget in percent.
    #[arg(long)]
    beta_m: f64,
    /// `auto` codes the payload only if that makes the packet smaller.
    #[arg(long, value_enum, default_value = "auto")]
    entropy: EntropyFlag,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecoveryArg {
    Fr,
    Interpolate,
    Zero,
}

impl From<RecoveryArg> for RecoveryMode {
    fn from(r: RecoveryArg) -> Self {
        match r {
            RecoveryArg::Fr => RecoveryMode::Fr,
            RecoveryArg::Interpolate => RecoveryMode::Interpolate,
            RecoveryArg::Zero => RecoveryMode::Zero,
        }
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "interpolate")]
    recovery: RecoveryArg,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Stae,
    Deepisc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Stae => Method::Stae,
            MethodArg::Deepisc => Method::Deepisc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    PayloadOnly,
    FullPacket,
}

impl From<SizeArg> for SizeConvention {
    fn from(s: SizeArg) -> Self {
        match s {
            SizeArg::PayloadOnly => SizeConvention::PayloadOnly,
            SizeArg::FullPacket => SizeConvention::FullPacket,
        }
    }
}

#[derive(Args)]
struct ProfileArgs {
    /// Profile CSV; defaults to the embedded measurement tables.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// On-device inference time in ms for local execution.
    #[arg(long)]
    local_ms: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    /// JSON file supplying defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Uplink rate in Mbps.
    #[arg(long)]
    rate: Option<f64>,
    /// Deadline in ms; `inf` for none.
    #[arg(long)]
    deadline: Option<f64>,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Frame budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<usize>>,
    /// Spatial budgets in percent, comma separated.
    #[arg(long, value_delimiter = ',')]
    spatial: Option<Vec<f64>>,
    /// Only consider budget pairs tabulated in the profile.
    #[arg(long)]
    strict: bool,
    /// Also consider running inference on the device.
    #[arg(long)]
    allow_local: bool,
    /// Encoder whose profile rows are searched.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Force entropy coding on or off instead of searching both.
    #[arg(long, value_enum)]
    entropy: Option<EntropyFlag>,
    /// Whether packet overhead counts toward the transmitted size.
    #[arg(long, value_enum)]
    size_convention: Option<SizeArg>,
    /// Clip dims F,C,H,W the budgets apply to.
    #[arg(long, value_name = "F,C,H,W")]
    dims: Option<String>,
    /// Also write every option with its Pareto flag to this CSV.
    #[arg(long)]
    frontier: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlanConfig {
    rate: Option<f64>,
    deadline: Option<f64>,
    frames: Option<Vec<usize>>,
    spatial: Option<Vec<f64>>,
    #[serde(default)]
    strict: bool,
    #[serde(default)]
    allow_local: bool,
    method: Option<Method>,
    size_convention: Option<SizeConvention>,
    dims: Option<ClipDims>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON. `trace` may be given inline or as `trace_csv`
    /// (relative to the scenario file) with optional `interpolation`.
    #[arg(long, short)]
    scenario: PathBuf,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Directory for records.csv, report.json and frontier.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct TablesArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
    /// Instead of the profile, print completion time against these rates
    /// (Mbps) for STAE, DeepISC, full offload and local execution.
    #[arg(long, value_delimiter = ',')]
    sweep_rates: Option<Vec<f64>>,
    /// Budget pair for the sweep as αk,βm%.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 40.0])]
    sweep_pair: Vec<f64>,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
}

fn parse_dims(s: &str) -> Result<ClipDims, Failure> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(anyhow!("dims must be F,C,H,W positive integers, got `{s}`")))?;
    let [f, c, h, w] = v[..] else {
        return Err(usage(anyhow!("dims must have four components, got `{s}`")));
    };
    let d = ClipDims::new(f, c, h, w);
    d.validate().map_err(usage)?;
    Ok(d)
}

fn budget(percent: f64) -> Result<SpatialBudget, Failure> {
    SpatialBudget::from_percent(percent)
        .ok_or_else(|| usage(anyhow!("spatial budget {percent}% outside (0, 100]")))
}

fn load_bundle(args: &WeightArgs) -> Result<Option<WeightBundle>, Failure> {
    match &args.weights {
        Some(p) => WeightBundle::from_bytes(&read(p)?)
            .with_context(|| format!("loading weights from {}", p.display()))
            .map(Some)
            .map_err(Failure::Format),
        None => Ok(None),
    }
}

fn load_profile(args: &ProfileArgs) -> Result<DeploymentProfile, Failure> {
    let p = match &args.profile {
        Some(path) => DeploymentProfile::from_reader(read(path)?.as_slice())
            .with_context(|| format!("loading profile {}", path.display()))
            .map_err(Failure::Format)?,
        None => DeploymentProfile::builtin(),
    };
    match args.local_ms {
        Some(ms) => p.with_local_inference_time(ms).map_err(usage),
        None => Ok(p),
    }
}

fn cmd_encode(a: EncodeArgs) -> CmdResult {
    let bytes = read(&a.input)?;
    let x = match &a.raw_rgb {
        Some(d) => import_planar_u8(&bytes, parse_dims(d)?),
        None => clip_from_bytes(&bytes),
    }
    .with_context(|| format!("reading clip {}", a.input.display()))
    .map_err(Failure::Format)?;
    let dims = x.dims();
    if a.alpha_k == 0 || a.alpha_k > dims.frames {
        return Err(usage(anyhow!(
            "alpha-k must be in 1..={} for this clip",
            dims.frames
        )));
    }
    let pair = BudgetPair::new(a.alpha_k, budget(a.beta_m)?);
    let weights = match load_bundle(&a.weights)? {
        Some(b) => b,
        None => {
            let mut b = WeightBundle::new();
            synthesize_encoder_weights(&mut b, dims.frames, a.weights.seed).map_err(format)?;
            b
        }
    };
    let sel = SemanticEncoder::new(&weights)
        .encode(&x, pair)
        .map_err(format)?;
    let encode = |enc| {
        encode_packet_with_stats(&sel, dims, enc)
            .map(|(p, st, sz)| (p, st, sz, enc))
            .map_err(format)
    };
    let (packet, stats, sizes, encoding) = match a.entropy {
        EntropyFlag::On => encode(PayloadEncoding::Huffman)?,
        EntropyFlag::Off => encode(PayloadEncoding::Raw)?,
        EntropyFlag::Auto => {
            let raw = encode(PayloadEncoding::Raw)?;
            let coded = encode(PayloadEncoding::Huffman)?;
            if coded.0.len() < raw.0.len() {
                coded
            } else {
                raw
            }
        }
    };
    write(&a.output, &packet)?;
    Ok(json!({
        "dims": dims,
        "alpha_k": pair.alpha_k,
        "beta_m_percent": pair.beta_m.percent(),
        "frame_indices": sel.frame_indices,
        "k_px": sel.k_px,
        "element_count": stats.element_count,
        "raw_payload_bytes": stats.raw_bits / 8,
        "encoding": encoding,
        "coded_bits": stats.coded_bits,
        "table_bits": stats.table_bits,
        "bits_per_element": stats.bits_per_element,
        "amortized_bits_per_element": stats.amortized_bits_per_element(),
        "sizes": sizes,
        "packet_bytes": packet.len(),
    }))
}

fn cmd_decode(a: DecodeArgs) -> CmdResult {
    let packet = decode_packet(&read(&a.input)?)
        .with_context(|| format!("decoding {}", a.input.display()))
        .map_err(Failure::Format)?;
    let mc = zero_fill(&packet.selection, packet.dims).map_err(format)?;
    let mode = RecoveryMode::from(a.recovery);
    let weights = match (mode, load_bundle(&a.weights)?) {
        (_, Some(b)) => Some(b),
        (RecoveryMode::Fr, None) => {
            let c = packet.dims.channels;
            let mut b = WeightBundle::new();
            synthesize_recovery_weights(&mut b, &RecoveryNetConfig::for_channels(c), c, a.weights.seed)
                .map_err(format)?;
            Some(b)
        }
        _ => None,
    };
    let out = recover(&mc, mode, weights.as_ref()).map_err(format)?;
    write(&a.output, &clip_to_bytes(&out))?;
    let px = packet.dims.pixels();
    Ok(json!({
        "dims": packet.dims,
        "output_dims": out.dims(),
        "frame_indices": packet.selection.frame_indices,
        "encoding": packet.encoding,
        "k_px": packet.selection.k_px,
        "known_fraction": packet.selection.k_px as f64 / px as f64,
        "missing_pixels_per_frame": px - packet.selection.k_px,
        "recovery": mode,
        "stats": packet.stats,
        "sizes": packet.sizes,
    }))
}

fn cmd_plan(a: PlanArgs) -> CmdResult {
    let cfg: PlanConfig = match &a.config {
        Some(p) => serde_json::from_slice(&read(p)?)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(Failure::Format)?,
        None => PlanConfig::default(),
    };
    let rate = a
        .rate
        .or(cfg.rate)
        .ok_or_else(|| usage(anyhow!("--rate is required")))?;
    let deadline = a
        .deadline
        .or(cfg.deadline)
        .ok_or_else(|| usage(anyhow!("--deadline is required")))?;
    let profile = load_profile(&a.profile)?;
    let mut budgets = BudgetSets::default();
    if let Some(f) = a.frames.or(cfg.frames) {
        budgets.frames = f;
    }
    if let Some(s) = a.spatial.or(cfg.spatial) {
        budgets.spatial = s.into_iter().map(budget).collect::<Result<_, _>>()?;
    }
    let dims = match &a.dims {
        Some(d) => parse_dims(d)?,
        None => cfg.dims.unwrap_or(REFERENCE_DIMS),
    };
    let opts = PlannerOptions {
        budgets,
        strict: a.strict || cfg.strict,
        allow_local: a.allow_local || cfg.allow_local,
        method: a.method.map(Method::from).or(cfg.method).unwrap_or(Method::Stae),
        dims,
    };
    let size = a
        .size_convention
        .map(SizeConvention::from)
        .or(cfg.size_convention)
        .unwrap_or_default();
    let link = LinkModel::with_convention(rate, size).map_err(usage)?;
    let mut options = enumerate_options(&link, deadline, &profile, &opts).map_err(usage)?;
    match a.entropy {
        Some(EntropyFlag::On) => options.retain(|o| o.entropy_on || o.size_bits == 0.0),
        Some(EntropyFlag::Off) => options.retain(|o| !o.entropy_on),
        _ => {}
    }
    let decision = select(&options).ok_or_else(|| usage(anyhow!("no options left")))?;
    if let Some(path) = &a.frontier {
        let rows = frontier(&link, deadline, &profile, &opts).map_err(format)?;
        write(path, frontier_csv(&rows).map_err(format)?.as_bytes())?;
    }
    let v = serde_json::to_value(decision).map_err(format)?;
    if decision.feasible {
        Ok(v)
    } else {
        Err(Failure::Infeasible(v))
    }
}

#[derive(Deserialize)]
struct TraceFileRef {
    trace_csv: Option<PathBuf>,
    #[serde(default)]
    interpolation: Interpolation,
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let bytes = read(path)?;
    let mut v: Value = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Format)?;
    let r: TraceFileRef = serde_json::from_value(v.clone()).map_err(format)?;
    if let Some(rel) = r.trace_csv {
        let trace_path = path.parent().unwrap_or(Path::new(".")).join(rel);
        let trace = ChannelTrace::from_csv_reader(read(&trace_path)?.as_slice(), r.interpolation)
            .with_context(|| format!("loading trace {}", trace_path.display()))
            .map_err(Failure::Format)?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| format(anyhow!("scenario must be a JSON object")))?;
        obj.remove("trace_csv");
        obj.remove("interpolation");
        obj.insert("trace".into(), serde_json::to_value(trace).map_err(format)?);
    }
    serde_json::from_value(v)
        .with_context(|| format!("invalid scenario {}", path.display()))
        .map_err(Failure::Format)
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let scenario = load_scenario(&a.scenario)?;
    let profile = load_profile(&a.profile)?;
    let result = run(&scenario, &profile).map_err(format)?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))
        .map_err(Failure::Io)?;
    let csv = export_records(&result, ReportFormat::Csv).map_err(format)?;
    let json = export_records(&result, ReportFormat::Json).map_err(format)?;
    write(&a.out_dir.join("records.csv"), &csv)?;
    write(&a.out_dir.join("report.json"), &json)?;
    let first = &result.records[0];
    let link = LinkModel::with_convention(first.gamma_at_release_mbps, scenario.size_convention)
        .map_err(format)?;
    let rows = frontier(&link, scenario.deadline_ms, &profile, &scenario.planner_options())
        .map_err(format)?;
    write(
        &a.out_dir.join("frontier.csv"),
        frontier_csv(&rows).map_err(format)?.as_bytes(),
    )?;
    serde_json::to_value(result.summary).map_err(format)
}

fn cmd_tables(a: TablesArgs) -> Result<String, Failure> {
    let profile = load_profile(&a.profile)?;
    if let Some(rates) = a.sweep_rates {
        let [alpha, beta] = a.sweep_pair[..] else {
            return Err(usage(anyhow!("--sweep-pair takes αk,βm%")));
        };
        if alpha < 1.0 || alpha.fract() != 0.0 {
            return Err(usage(anyhow!("αk must be a positive integer")));
        }
        let pair = BudgetPair::new(alpha as usize, budget(beta)?);
        if rates.iter().any(|&g| g.is_nan() || g <= 0.0) {
            return Err(usage(anyhow!("rates must be positive")));
        }
        let rows = rate_sweep(&rates, pair, &profile, REFERENCE_DIMS).map_err(format)?;
        return match a.format {
            TableFormat::Csv => rate_sweep_csv(&rows).map_err(format),
            TableFormat::Json => serde_json::to_string_pretty(&rows).map_err(format),
        };
    }
    Ok(match a.format {
        TableFormat::Csv => profile.to_csv_string(),
        TableFormat::Json => {
            let entries: Vec<_> = profile.entries().collect();
            serde_json::to_string_pretty(&json!({
                "local_inference_time_ms": profile.local_inference_time_ms(),
                "entries": entries,
            }))
            .map_err(format)?
        }
    })
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let bytes = read(&a.file)?;
    let magic = bytes.get(..6).unwrap_or(&[]);
    if magic == PACKET_MAGIC {
        let p = decode_packet(&bytes).map_err(format)?;
        Ok(json!({
            "kind": "packet",
            "dims": p.dims,
            "encoding": p.encoding,
            "alpha_k": p.selection.alpha_k(),
            "frame_indices": p.selection.frame_indices,
            "k_px": p.selection.k_px,
            "stats": p.stats,
            "sizes": p.sizes,
        }))
    } else if magic == CLIP_MAGIC {
        let x = clip_from_bytes(&bytes).map_err(format)?;
        let d = x.data();
        let min = d.iter().copied().fold(f32::INFINITY, f32::min);
        let max = d.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mean = d.iter().map(|&v| v as f64).sum::<f64>() / d.len() as f64;
        Ok(json!({ "kind": "clip", "dims": x.dims(), "min": min, "max": max, "mean": mean }))
    } else if magic == WEIGHT_MAGIC {
        let b = WeightBundle::from_bytes(&bytes).map_err(format)?;
        let arrays: Vec<Value> = b
            .names()
            .map(|n| json!({ "name": n, "shape": b.get(n).map(|a| a.shape.clone()).unwrap_or_default() }))
            .collect();
        Ok(json!({ "kind": "weights", "arrays": arrays }))
    } else {
        Err(format(anyhow!("{}: unrecognized file type", a.file.display())))
    }
}

// A closed stdout (e.g. piped into `head`) is not an error worth reporting.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("json value serializes")));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Tables(a) => cmd_tables(a).map(|s| {
            emit(&s);
            Value::Null
        }),
    };
    match result {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            print_json(&v);
            ExitCode::SUCCESS
        }
        Err(Failure::Infeasible(v)) => {
            print_json(&v);
            eprintln!("error: no option meets the deadline; best-effort decision printed");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(f) => {
            let code = f.code();
            if let Failure::Usage(e) | Failure::Io(e) | Failure::Format(e) = f {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
