//! Command-line driver for the ternary inference library and the
//! accelerator cycle simulator.
//!
//! Subcommands chain into a pipeline: `encode` turns an image batch into
//! a sparse ternary archive, `genweights` fabricates reproducible random
//! parameters for a network description, `infer` runs the reference
//! model, `simulate` runs the cycle model and checks it against the
//! reference on every input, and `report` folds the results into one
//! metrics document.
//!
//! Exit codes: 0 success, 2 malformed input data, 3 simulator output
//! diverging from the reference, 4 invalid configuration.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use tbn::dvs::{calibrate_thresholds, catalog_config, GrayFrame};
use tbn::format::{read_archive, write_archive, ArchiveEntry};
use tbn::metrics::{render_report, PowerModel, ReportFormat, ReportInputs};
use tbn::network::{
    default_topology, generate_params, GenOptions, Inference, LayerTrace, Network, NetworkConfig,
};
use tbn::sim::{simulate_network, AccelConfig, NetworkSim};
use tbn::tensor::{decode_sparse, encode_sparse, TernaryTensor, TraversalOrder};

#[derive(Parser)]
#[command(
    name = "tbn",
    version,
    about = "Sparse ternary network inference and accelerator simulation"
)]
struct Cli {
    /// Seed for every random choice (weights, synthetic inputs).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML manifest supplying defaults for any flag or path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Directory that output files default into.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Layout for printed reports.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Print per-step progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    /// Worker threads for archive processing (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode an image batch into a sparse ternary archive.
    Encode(EncodeArgs),
    /// Generate random weights and calibrated thresholds for a network.
    Genweights(GenweightsArgs),
    /// Run reference inference over an encoded archive.
    Infer(InferArgs),
    /// Run the cycle simulator and check every label against the reference.
    Simulate(SimulateArgs),
    /// Combine size, MAC, cycle, energy, and figure-of-merit numbers.
    Report(ReportArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// CIFAR-10 binary batch file (label byte + 3072 pixel bytes per record).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Encoder geometry from the built-in catalog (1..=5).
    #[arg(long)]
    dvs_config: Option<u8>,

    /// Fixed positive threshold (pair with --neg-threshold).
    #[arg(long)]
    pos_threshold: Option<i32>,

    /// Fixed negative threshold (pair with --pos-threshold).
    #[arg(long, allow_hyphen_values = true)]
    neg_threshold: Option<i32>,

    /// Calibrate symmetric thresholds to this non-zero density on the
    /// first 256 frames.
    #[arg(long)]
    target_density: Option<f64>,

    /// Output archive path (default: <out-dir>/encoded.tbna).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenweightsArgs {
    /// Network description TOML.
    #[arg(long)]
    net: Option<PathBuf>,

    /// Use the built-in topology and write its description to
    /// <out-dir>/net.toml.
    #[arg(long, conflicts_with = "net")]
    default_net: bool,

    /// Directory for the parameter files (default: <out-dir>/params).
    #[arg(long)]
    params: Option<PathBuf>,

    /// Probe inputs per quantize layer during threshold calibration.
    #[arg(long, default_value_t = 16)]
    probe_frames: usize,

    /// Non-zero density the calibration aims for.
    #[arg(long)]
    target_density: Option<f64>,
}

#[derive(Args)]
struct InferArgs {
    /// Network description TOML.
    #[arg(long)]
    net: Option<PathBuf>,

    /// Directory holding the parameter files.
    #[arg(long)]
    params: Option<PathBuf>,

    /// Encoded input archive.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Label and logit listing (default: <out-dir>/labels.txt).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write each weight layer's ternary input as
    /// <out-dir>/activations_NNNN.tbna.
    #[arg(long)]
    dump_activations: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network description TOML.
    #[arg(long)]
    net: Option<PathBuf>,

    /// Directory holding the parameter files.
    #[arg(long)]
    params: Option<PathBuf>,

    /// Encoded input archive.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Also run a named baseline configuration; `bnn` disables zero
    /// skipping and reordering, and the cycle reduction is printed.
    #[arg(long)]
    baseline: Option<String>,

    /// Sweep processing elements per column over an inclusive range,
    /// e.g. 1..6, and print a cycle table with and without reordering.
    #[arg(long)]
    pe_sweep: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Network description TOML.
    #[arg(long)]
    net: Option<PathBuf>,

    /// Directory holding the parameter files.
    #[arg(long)]
    params: Option<PathBuf>,

    /// Encoded input archive.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Archive entry the per-layer tables describe.
    #[arg(long, default_value_t = 0)]
    index: usize,

    /// Include simulated cycle, throughput, and energy sections.
    #[arg(long)]
    simulate: bool,

    /// Accuracy percentage for a this-run figure of merit.
    #[arg(long)]
    accuracy: Option<f64>,

    /// Also write the document to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Table,
    Kv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Kv => ReportFormat::Kv,
        }
    }
}

/// Manifest fields mirror the flags; explicit flags win.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Manifest {
    input: Option<PathBuf>,
    net: Option<PathBuf>,
    params: Option<PathBuf>,
    dvs_config: Option<u8>,
    pos_threshold: Option<i32>,
    neg_threshold: Option<i32>,
    target_density: Option<f64>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<FormatArg>,
    workers: Option<usize>,
    accuracy: Option<f64>,
    accel: Option<AccelConfig>,
    /// Power anchor points as [clock_hz, milliwatts] pairs.
    power: Option<Vec<(u64, f64)>>,
    allow_power_extrapolation: Option<bool>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }

    fn mismatch(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<tbn::Error> for Failure {
    fn from(e: tbn::Error) -> Self {
        let code = match e {
            tbn::Error::Format(_) | tbn::Error::Io(_) | tbn::Error::Overflow(_) => 2,
            tbn::Error::Shape(_) | tbn::Error::Config(_) | tbn::Error::Calibration(_) => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult<T> = Result<T, Failure>;

/// Everything resolved from flags plus manifest, in that priority.
struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    format: ReportFormat,
    verbose: bool,
    accel: AccelConfig,
    power: PowerModel,
    manifest: Manifest,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult<()> {
    let manifest = match &cli.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::config(format!("manifest {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                Failure::config(format!("manifest {}: {e}", path.display()))
            })?
        }
        None => Manifest::default(),
    };

    let accel = manifest.accel.unwrap_or_default();
    accel.validate().map_err(Failure::from)?;
    let power = match &manifest.power {
        Some(points) => PowerModel::new(
            points.clone(),
            manifest.allow_power_extrapolation.unwrap_or(false),
        )?,
        None => {
            let mut p = PowerModel::default();
            p.allow_extrapolation = manifest.allow_power_extrapolation.unwrap_or(false);
            p
        }
    };
    let ctx = Ctx {
        seed: cli.seed.or(manifest.seed).unwrap_or(1),
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| manifest.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        format: cli.format.or(manifest.format).unwrap_or(FormatArg::Table).into(),
        verbose: cli.verbose,
        accel,
        power,
        manifest,
    };

    let workers = cli.workers.or(ctx.manifest.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::config(format!("worker pool: {e}")))?;

    fs::create_dir_all(&ctx.out_dir).map_err(|e| {
        Failure::config(format!("output directory {}: {e}", ctx.out_dir.display()))
    })?;

    match cli.command {
        Command::Encode(args) => cmd_encode(&ctx, &pool, args),
        Command::Genweights(args) => cmd_genweights(&ctx, args),
        Command::Infer(args) => cmd_infer(&ctx, &pool, args),
        Command::Simulate(args) => cmd_simulate(&ctx, &pool, args),
        Command::Report(args) => cmd_report(&ctx, args),
    }
}

fn required<T>(value: Option<T>, what: &str) -> CmdResult<T> {
    value.ok_or_else(|| Failure::config(format!("missing {what} (flag or manifest entry)")))
}

fn create_file(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::config(format!("{}: {e}", parent.display())))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Failure::config(format!("{}: {e}", path.display()))
    })?))
}

fn open_file(path: &Path) -> CmdResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })?))
}

fn load_network(ctx: &Ctx, net: Option<PathBuf>, params: Option<PathBuf>) -> CmdResult<Network> {
    let net_path = required(net.or_else(|| ctx.manifest.net.clone()), "--net")?;
    let params_dir = required(params.or_else(|| ctx.manifest.params.clone()), "--params")?;
    let config = NetworkConfig::load(&net_path)?;
    ctx.say(format!(
        "loaded {} ({} layers), parameters from {}",
        net_path.display(),
        config.layers.len(),
        params_dir.display()
    ));
    Ok(Network::load(config, &params_dir)?)
}

fn load_inputs(ctx: &Ctx, input: Option<PathBuf>) -> CmdResult<(PathBuf, Vec<ArchiveEntry>)> {
    let path = required(input.or_else(|| ctx.manifest.input.clone()), "--input")?;
    let entries = read_archive(&mut open_file(&path)?)?;
    ctx.say(format!("{}: {} entries", path.display(), entries.len()));
    Ok((path, entries))
}

fn cmd_encode(ctx: &Ctx, pool: &rayon::ThreadPool, args: EncodeArgs) -> CmdResult<()> {
    let input = required(args.input.or_else(|| ctx.manifest.input.clone()), "--input")?;
    let frames = tbn::cifar::read_cifar_gray(&mut open_file(&input)?)?;
    let id = args.dvs_config.or(ctx.manifest.dvs_config).unwrap_or(4);
    let mut cfg = catalog_config(id)?;

    let pos = args.pos_threshold.or(ctx.manifest.pos_threshold);
    let neg = args.neg_threshold.or(ctx.manifest.neg_threshold);
    let target = args.target_density.or(ctx.manifest.target_density);
    match (pos, neg) {
        (Some(p), Some(n)) => cfg = cfg.with_thresholds(p, n),
        (None, None) => {
            if let Some(density) = target {
                if frames.is_empty() {
                    return Err(Failure::config(
                        "cannot calibrate thresholds on an empty input",
                    ));
                }
                let probe: Vec<GrayFrame> =
                    frames.iter().take(256).map(|(_, f)| f.clone()).collect();
                let (p, n) = calibrate_thresholds(&probe, &cfg.channel_patterns, density)?;
                cfg = cfg.with_thresholds(p, n);
                ctx.say(format!("calibrated thresholds ({p}, {n}) for density {density}"));
            }
        }
        _ => {
            return Err(Failure::config(
                "--pos-threshold and --neg-threshold must be given together",
            ))
        }
    }
    cfg.validate()?;

    let out = args.out.unwrap_or_else(|| ctx.out_dir.join("encoded.tbna"));
    if frames.is_empty() {
        eprintln!("warning: {} holds no records, writing an empty archive", input.display());
        write_archive(&mut create_file(&out)?, &[])?;
        println!("encoded 0 frames to {}", out.display());
        return Ok(());
    }

    let entries: Vec<(ArchiveEntry, f64)> = pool.install(|| {
        frames
            .par_iter()
            .map(|(label, frame)| {
                let t = tbn::dvs::encode_frame(frame, &cfg)?;
                let density = t.density();
                let tensor = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
                Ok((ArchiveEntry { label: *label, tensor }, density))
            })
            .collect::<tbn::Result<_>>()
    })?;

    let archive: Vec<ArchiveEntry> = entries.iter().map(|(e, _)| e.clone()).collect();
    write_archive(&mut create_file(&out)?, &archive)?;

    let densities: Vec<f64> = entries.iter().map(|&(_, d)| d).collect();
    let mean = densities.iter().sum::<f64>() / densities.len() as f64;
    let min = densities.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = densities.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "encoded {} frames with configuration #{} thresholds ({}, {})",
        archive.len(),
        cfg.id,
        cfg.pos_threshold,
        cfg.neg_threshold
    );
    println!("density mean {mean:.4} min {min:.4} max {max:.4}");
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_genweights(ctx: &Ctx, args: GenweightsArgs) -> CmdResult<()> {
    let config = if args.default_net {
        default_topology()
    } else {
        let path = required(args.net.or_else(|| ctx.manifest.net.clone()), "--net")?;
        NetworkConfig::load(&path)?
    };
    let opts = GenOptions {
        seed: ctx.seed,
        probe_frames: args.probe_frames,
        target_density: args
            .target_density
            .or(ctx.manifest.target_density)
            .unwrap_or(GenOptions::default().target_density),
    };
    ctx.say(format!(
        "generating parameters for {} layers with seed {}",
        config.layers.len(),
        opts.seed
    ));
    let generated = generate_params(&config, &opts)?;

    let params_dir = args
        .params
        .or_else(|| ctx.manifest.params.clone())
        .unwrap_or_else(|| ctx.out_dir.join("params"));
    generated.network.save_params(&params_dir)?;
    if args.default_net {
        let net_path = ctx.out_dir.join("net.toml");
        config.save(&net_path)?;
        println!("wrote {}", net_path.display());
    }
    for c in &generated.calibration {
        println!(
            "calibrated {}: threshold {} probe density {:.4}",
            c.layer, c.threshold, c.density
        );
    }
    if generated.calibration.is_empty() {
        println!("no quantize layers, weights only");
    }
    println!("wrote parameters for {} layers to {}", config.layers.len(), params_dir.display());
    Ok(())
}

fn decode_entry(index: usize, entry: &ArchiveEntry) -> tbn::Result<TernaryTensor> {
    decode_sparse(&entry.tensor).map_err(|e| e.context(format!("entry {index}")))
}

fn cmd_infer(ctx: &Ctx, pool: &rayon::ThreadPool, args: InferArgs) -> CmdResult<()> {
    let network = load_network(ctx, args.net, args.params)?;
    let (_, entries) = load_inputs(ctx, args.input)?;
    let dump = args.dump_activations;

    let results: Vec<(Inference, Vec<LayerTrace>)> = pool.install(|| {
        entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let input = decode_entry(i, entry)?;
                if dump {
                    network.infer_traced(&input)
                } else {
                    network.infer(&input).map(|inf| (inf, Vec::new()))
                }
            })
            .collect::<tbn::Result<_>>()
    })?;

    let out = args.out.unwrap_or_else(|| ctx.out_dir.join("labels.txt"));
    let mut w = create_file(&out)?;
    let mut agree = 0usize;
    for (i, (entry, (inf, _))) in entries.iter().zip(&results).enumerate() {
        agree += (entry.label as usize == inf.label) as usize;
        write!(w, "{i} given {} predicted {} logits", entry.label, inf.label)
            .map_err(tbn::Error::from)?;
        for l in &inf.logits {
            write!(w, " {l}").map_err(tbn::Error::from)?;
        }
        writeln!(w).map_err(tbn::Error::from)?;
    }
    w.flush().map_err(tbn::Error::from)?;

    if dump {
        for (i, (_, traces)) in results.iter().enumerate() {
            let path = ctx.out_dir.join(format!("activations_{i:04}.tbna"));
            let dump_entries: Vec<ArchiveEntry> = traces
                .iter()
                .map(|t| ArchiveEntry {
                    label: t.layer_index as u8,
                    tensor: encode_sparse(&t.input, TraversalOrder::ChannelGroupMajor),
                })
                .collect();
            write_archive(&mut create_file(&path)?, &dump_entries)?;
            ctx.say(format!("wrote {}", path.display()));
        }
    }

    println!(
        "inferred {} inputs, {} predicted labels match the archive labels",
        entries.len(),
        agree
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_sweep(text: &str) -> CmdResult<std::ops::RangeInclusive<usize>> {
    let parse = |s: &str| {
        s.trim().parse::<usize>().map_err(|_| {
            Failure::config(format!("bad element count {s:?} in --pe-sweep {text:?}"))
        })
    };
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let n = parse(text)?;
            (n, n)
        }
    };
    if lo == 0 || hi < lo {
        return Err(Failure::config(format!("empty sweep range {text:?}")));
    }
    Ok(lo..=hi)
}

fn cmd_simulate(ctx: &Ctx, pool: &rayon::ThreadPool, args: SimulateArgs) -> CmdResult<()> {
    let network = load_network(ctx, args.net, args.params)?;
    let (_, entries) = load_inputs(ctx, args.input)?;
    let baseline_cfg = match args.baseline.as_deref() {
        None => None,
        Some("bnn") => Some(AccelConfig {
            zero_skip_enabled: false,
            reorder_enabled: false,
            ..ctx.accel
        }),
        Some(other) => {
            return Err(Failure::config(format!(
                "unknown baseline {other:?}, the only baseline is \"bnn\""
            )))
        }
    };

    if entries.is_empty() {
        println!("0 entries, nothing to simulate");
        return Ok(());
    }

    struct EntryRun {
        golden: Inference,
        sim: NetworkSim,
        baseline: Option<NetworkSim>,
    }

    let runs: Vec<EntryRun> = pool.install(|| {
        entries
            .par_iter()
            .enumerate()
            .map(|(i, entry)| {
                let input = decode_entry(i, entry)?;
                let golden = network.infer(&input)?;
                let sim = simulate_network(&network, &input, &ctx.accel)?;
                let baseline = match &baseline_cfg {
                    Some(cfg) => Some(simulate_network(&network, &input, cfg)?),
                    None => None,
                };
                Ok(EntryRun { golden, sim, baseline })
            })
            .collect::<tbn::Result<_>>()
    })?;

    let mut mismatches = Vec::new();
    let mut reduction_sum = 0.0;
    for (i, run) in runs.iter().enumerate() {
        let path = ctx.out_dir.join(format!("sim_{i:04}.kv"));
        let mut w = create_file(&path)?;
        w.write_all(run.sim.to_kv().as_bytes()).map_err(tbn::Error::from)?;
        w.flush().map_err(tbn::Error::from)?;

        let ok = run.sim.inference.logits == run.golden.logits
            && run.sim.inference.label == run.golden.label;
        if !ok {
            mismatches.push(i);
        }
        print!(
            "entry {i}: {} cycles, {:.4} s, label {}{}",
            run.sim.total_cycles(),
            run.sim.wall_seconds(),
            run.sim.inference.label,
            if ok { "" } else { " MISMATCH" }
        );
        if let Some(base) = &run.baseline {
            let bpath = ctx.out_dir.join(format!("baseline_{i:04}.kv"));
            let mut bw = create_file(&bpath)?;
            bw.write_all(base.to_kv().as_bytes()).map_err(tbn::Error::from)?;
            bw.flush().map_err(tbn::Error::from)?;
            let reduction = 100.0
                * (base.total_cycles() as f64 - run.sim.total_cycles() as f64)
                / base.total_cycles() as f64;
            reduction_sum += reduction;
            print!(", baseline {} cycles, reduction {reduction:.1}%", base.total_cycles());
        }
        println!();
    }
    if baseline_cfg.is_some() {
        println!(
            "mean cycle reduction over baseline: {:.1}%",
            reduction_sum / runs.len() as f64
        );
    }

    if let Some(sweep) = &args.pe_sweep {
        let range = parse_sweep(sweep)?;
        println!("{:>3} {:>14} {:>14} {:>8}", "pe", "no-reorder", "reorder", "saved");
        for pe in range {
            let mut with = 0u64;
            let mut without = 0u64;
            for (i, entry) in entries.iter().enumerate() {
                let input = decode_entry(i, entry)?;
                let plain = AccelConfig {
                    pe_per_pcl: pe,
                    reorder_enabled: false,
                    ..ctx.accel
                };
                let sorted = AccelConfig { pe_per_pcl: pe, reorder_enabled: true, ..ctx.accel };
                without += simulate_network(&network, &input, &plain)?.total_cycles();
                with += simulate_network(&network, &input, &sorted)?.total_cycles();
            }
            println!(
                "{pe:>3} {without:>14} {with:>14} {:>7.1}%",
                100.0 * (without - with) as f64 / without as f64
            );
        }
    }

    if let Some(first) = mismatches.first() {
        return Err(Failure::mismatch(format!(
            "simulated output diverged from the reference on {} of {} entries (first: entry {first})",
            mismatches.len(),
            runs.len()
        )));
    }
    println!("all {} simulated labels match the reference", runs.len());
    Ok(())
}

fn cmd_report(ctx: &Ctx, args: ReportArgs) -> CmdResult<()> {
    let network = load_network(ctx, args.net, args.params)?;
    let (_, entries) = load_inputs(ctx, args.input)?;

    let mut traces: Vec<LayerTrace> = Vec::new();
    let mut sim = None;
    let mut baseline = None;
    if entries.is_empty() {
        eprintln!("warning: empty archive, reporting network-level numbers only");
    } else {
        if args.index >= entries.len() {
            return Err(Failure::config(format!(
                "--index {} out of range, archive holds {} entries",
                args.index,
                entries.len()
            )));
        }
        let input = decode_entry(args.index, &entries[args.index])?;
        let (_, t) = network.infer_traced(&input)?;
        traces = t;
        if args.simulate {
            sim = Some(simulate_network(&network, &input, &ctx.accel)?);
            baseline = Some(simulate_network(
                &network,
                &input,
                &AccelConfig {
                    zero_skip_enabled: false,
                    reorder_enabled: false,
                    ..ctx.accel
                },
            )?);
        }
    }

    let inputs = ReportInputs {
        net: network.config(),
        traces: &traces,
        sim: sim.as_ref(),
        baseline: baseline.as_ref(),
        power: &ctx.power,
        accuracy_percent: args.accuracy.or(ctx.manifest.accuracy),
    };
    let text = render_report(&inputs, ctx.format)?;
    print!("{text}");
    if let Some(path) = &args.out {
        let mut w = create_file(path)?;
        w.write_all(text.as_bytes()).map_err(tbn::Error::from)?;
        w.flush().map_err(tbn::Error::from)?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}
