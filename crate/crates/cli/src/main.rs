//! `logsim` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use logsim::analysis::{
    collected_gp_distribution, gc_grid, observation_stats, traffic_table, user_grid, ObservationReport,
};
use logsim::model::{BLOCKS_PER_GIB, BLOCK_SIZE};
use logsim::report::{
    load_volumes, parse_bytes, replay, simulate, sweep, sweep_csv_header, sweep_csv_row, write_outputs, RunConfig,
    Source, SweepGrid, ENV_PREFIX, KEYS,
};
use logsim::workload::{
    annotate_bits, filter_volumes, parse_trace, serialize_record, split_volumes, volume_stats, write_annotation,
    TraceFormat, WriteRecord,
};
use logsim::{Error, SchemeKind, SelectionPolicy};

#[derive(Parser)]
#[command(name = "logsim", version, about = "Trace-driven GC simulator for log-structured block storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace or synthetic workload under one scheme.
    Replay(ReplayArgs),
    /// Replay over a grid of schemes, selectors, segment sizes, thresholds and skewness.
    Sweep(SweepArgs),
    /// Closed-form probability grids under the Zipf model.
    Math(MathArgs),
    /// Write a synthetic workload as native CSV.
    Gen(GenArgs),
    /// Write per-volume lifespan annotation sidecars for a trace.
    Annotate(AnnotateArgs),
    /// Print per-volume working-set and traffic stats and the filter verdict.
    Filter(FilterArgs),
    /// Print lifespan observations per volume, optionally with the collected-GP distribution.
    Stats(StatsArgs),
}

/// Run configuration. Precedence: `--config` file, then `LOGSIM_<KEY>`
/// environment variables, then these flags.
#[derive(Args)]
struct RunFlags {
    /// Flat `key=value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nosep|sepgc|sepbit|uw|gw|dac|fk|ideal
    #[arg(long)]
    scheme: Option<String>,
    /// greedy|cost-benefit
    #[arg(long)]
    selector: Option<String>,
    /// Segment size in bytes (suffixes K, M, G accepted).
    #[arg(long)]
    segment_size: Option<String>,
    #[arg(long)]
    gp_threshold: Option<String>,
    /// Bytes retrieved per GC operation; defaults to one segment.
    #[arg(long)]
    gc_retrieval: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    /// Comma-separated multiples of ℓ, or method1:C, method2:C, bitgw.
    #[arg(long)]
    sepbit_thresholds: Option<String>,
    #[arg(long)]
    sepbit_scale: Option<String>,
    /// fifo|exact
    #[arg(long)]
    sepbit_index: Option<String>,
    /// Trace file; replaces the synthetic source.
    #[arg(long)]
    trace: Option<String>,
    /// native|alibaba|tencent
    #[arg(long)]
    format: Option<String>,
    /// Column overrides, e.g. `volume=0,offset=2,unit=512`.
    #[arg(long)]
    columns: Option<String>,
    /// Volumes need a write WSS above this size.
    #[arg(long)]
    wss_min: Option<String>,
    /// Volumes need write traffic above this multiple of their WSS.
    #[arg(long)]
    traffic_multiple: Option<String>,
    /// zipf|two-region
    #[arg(long)]
    synthetic: Option<String>,
    /// Synthetic working-set size in bytes.
    #[arg(long)]
    wss: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Synthetic traffic as a multiple of the WSS.
    #[arg(long)]
    traffic: Option<String>,
    #[arg(long)]
    total_writes: Option<String>,
    #[arg(long)]
    hot_fraction: Option<String>,
    /// Bytes written between hot-region re-permutations.
    #[arg(long)]
    churn_period: Option<String>,
    #[arg(long)]
    volumes: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Also write per-volume GC event logs.
    #[arg(long)]
    gc_log: bool,
    /// Volumes replayed in parallel.
    #[arg(long)]
    jobs: Option<String>,
}

impl RunFlags {
    fn values(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("trace", self.trace.clone()),
            ("format", self.format.clone()),
            ("columns", self.columns.clone()),
            ("wss_min", self.wss_min.clone()),
            ("traffic_multiple", self.traffic_multiple.clone()),
            ("synthetic", self.synthetic.clone()),
            ("wss", self.wss.clone()),
            ("alpha", self.alpha.clone()),
            ("traffic", self.traffic.clone()),
            ("total_writes", self.total_writes.clone()),
            ("hot_fraction", self.hot_fraction.clone()),
            ("churn_period", self.churn_period.clone()),
            ("volumes", self.volumes.clone()),
            ("seed", self.seed.clone()),
            ("scheme", self.scheme.clone()),
            ("selector", self.selector.clone()),
            ("segment_size", self.segment_size.clone()),
            ("gp_threshold", self.gp_threshold.clone()),
            ("gc_retrieval", self.gc_retrieval.clone()),
            ("classes", self.classes.clone()),
            ("sepbit_thresholds", self.sepbit_thresholds.clone()),
            ("sepbit_scale", self.sepbit_scale.clone()),
            ("sepbit_index", self.sepbit_index.clone()),
            ("out_dir", self.out_dir.clone()),
            ("gc_log", self.gc_log.then(|| "true".to_string())),
            ("jobs", self.jobs.clone()),
        ]
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        cfg.apply_env(std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)))?;
        for (key, value) in self.values() {
            debug_assert!(KEYS.contains(&key) || key == "total_writes");
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Comma-separated scheme axis.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    selectors: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    segment_sizes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    gp_thresholds: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<String>,
}

#[derive(Args)]
struct MathArgs {
    #[command(subcommand)]
    grid: MathGrid,
    /// Number of LBAs.
    #[arg(long, global = true, default_value_t = 10 * BLOCKS_PER_GIB as usize)]
    n: usize,
    /// Comma-separated skewness values.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
    alpha: Vec<f64>,
    /// Output file; standard output if absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MathGrid {
    /// Pr(u <= u0 | v <= v0) over u0 x v0 (sizes in bytes).
    User {
        #[arg(long, value_delimiter = ',', default_values_t = gib_list(&["0.25G", "0.5G", "1G", "2G", "4G"]))]
        u0: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = gib_list(&["0.25G", "0.5G", "1G", "2G", "4G"]))]
        v0: Vec<String>,
    },
    /// Pr(u <= g0 + r0 | u >= g0) over g0 x r0 (sizes in bytes).
    Gc {
        #[arg(long, value_delimiter = ',', default_values_t = gib_list(&["2G", "4G", "8G", "16G", "32G"]))]
        g0: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = gib_list(&["1G", "2G", "4G", "8G"]))]
        r0: Vec<String>,
    },
    /// Share of traffic received by the most frequently written LBAs.
    Traffic {
        #[arg(long, default_value_t = 0.2)]
        top: f64,
    },
}

fn gib_list(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Output file; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TraceInput {
    /// Trace file.
    trace: PathBuf,
    #[arg(long, default_value = "native")]
    format: String,
    #[arg(long)]
    columns: Option<String>,
}

impl TraceInput {
    fn volumes(&self) -> Result<std::collections::BTreeMap<String, Vec<logsim::Lba>>> {
        let format: TraceFormat = self.format.parse()?;
        let mut cols = format.columns();
        if let Some(c) = &self.columns {
            cols = cols.with_overrides(c)?;
        }
        let file = File::open(&self.trace).with_context(|| format!("opening {}", self.trace.display()))?;
        Ok(split_volumes(parse_trace(BufReader::new(file), cols))?)
    }
}

#[derive(Args)]
struct AnnotateArgs {
    #[command(flatten)]
    input: TraceInput,
    /// Directory receiving `<volume>.ann.csv`.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: TraceInput,
    #[arg(long, default_value = "10G")]
    wss_min: String,
    #[arg(long, default_value_t = 2.0)]
    traffic_multiple: f64,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Also replay each volume and print the GP distribution of collected segments.
    #[arg(long)]
    gp_cdf: bool,
}

fn output_sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn blocks(list: &[String]) -> Result<Vec<u64>> {
    list.iter().map(|s| Ok(parse_bytes(s)? / BLOCK_SIZE)).collect()
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let res = replay(&cfg)?;
    match &cfg.out_dir {
        Some(dir) => {
            for path in write_outputs(dir, &cfg, &res)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print!("{}", logsim::report::results_csv(&res)),
    }
    eprintln!(
        "{} volume(s), scheme {}, selector {}: overall WA {:.4}",
        res.volumes.len(),
        cfg.scheme,
        cfg.selector,
        res.aggregate.wa
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let parse_all = |v: &[String], what: &str| -> Result<Vec<f64>> {
        v.iter()
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad {what} `{s}`")).into()))
            .collect()
    };
    let grid = SweepGrid {
        schemes: args.schemes.iter().map(|s| s.parse::<SchemeKind>()).collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|s| match cfg.scheme.sepbit_params() {
                Some(p) => s.with_sepbit_params(p.clone()),
                None => s,
            })
            .collect(),
        selectors: args.selectors.iter().map(|s| s.parse::<SelectionPolicy>()).collect::<Result<Vec<_>, _>>()?,
        segment_sizes: args.segment_sizes.iter().map(|s| parse_bytes(s)).collect::<Result<Vec<_>, _>>()?,
        gp_thresholds: parse_all(&args.gp_thresholds, "GP threshold")?,
        alphas: parse_all(&args.alphas, "alpha")?,
    };
    let path = cfg.out_dir.as_ref().map(|d| -> Result<PathBuf> {
        fs::create_dir_all(d)?;
        Ok(d.join("sweep.csv"))
    });
    let path = path.transpose()?;
    let mut out = output_sink(path.as_deref())?;
    writeln!(out, "{}", sweep_csv_header())?;
    out.flush()?;
    let result = sweep(&cfg, &grid, |row| {
        writeln!(out, "{}", sweep_csv_row(row))?;
        out.flush()?;
        Ok(())
    });
    if let Some(p) = &path {
        eprintln!("wrote {}", p.display());
    }
    result?;
    Ok(())
}

fn cmd_math(args: &MathArgs) -> Result<()> {
    let mut out = output_sink(args.output.as_deref())?;
    match &args.grid {
        MathGrid::User { u0, v0 } => {
            writeln!(out, "alpha,u0_blocks,v0_blocks,probability")?;
            for r in user_grid(args.n, &args.alpha, &blocks(u0)?, &blocks(v0)?)? {
                writeln!(out, "{},{},{},{}", r.alpha, r.u0_blocks, r.v0_blocks, r.probability)?;
            }
        }
        MathGrid::Gc { g0, r0 } => {
            writeln!(out, "alpha,g0_blocks,r0_blocks,probability")?;
            for r in gc_grid(args.n, &args.alpha, &blocks(g0)?, &blocks(r0)?)? {
                writeln!(out, "{},{},{},{}", r.alpha, r.g0_blocks, r.r0_blocks, r.probability)?;
            }
        }
        MathGrid::Traffic { top } => {
            writeln!(out, "alpha,top_fraction,traffic_fraction")?;
            for r in traffic_table(args.n, &args.alpha, *top)? {
                writeln!(out, "{},{},{}", r.alpha, r.top_fraction, r.traffic_fraction)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    if !matches!(cfg.source, Source::Synthetic { .. }) {
        return Err(Error::Config("gen needs a synthetic workload, not a trace".into()).into());
    }
    let mut out = output_sink(args.output.as_deref())?;
    for vol in load_volumes(&cfg)? {
        for (i, lba) in vol.lbas.iter().enumerate() {
            let rec = WriteRecord {
                timestamp_us: i as u64,
                volume: vol.name.clone(),
                offset: lba.byte_offset(),
                length: BLOCK_SIZE,
            };
            serialize_record(&rec, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_annotate(args: &AnnotateArgs) -> Result<()> {
    fs::create_dir_all(&args.output)?;
    for (name, lbas) in args.input.volumes()? {
        let path = args.output.join(format!("{name}.ann.csv"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_annotation(&annotate_bits(&lbas), BufWriter::new(file))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_filter(args: &FilterArgs) -> Result<()> {
    let wss_min = parse_bytes(&args.wss_min)? / BLOCK_SIZE;
    let stats: Vec<_> = args.input.volumes()?.iter().map(|(n, l)| volume_stats(n, l)).collect();
    let kept = filter_volumes(&stats, wss_min, args.traffic_multiple);
    let mut out = io::stdout().lock();
    writeln!(out, "volume,wss_blocks,write_blocks,kept")?;
    for s in &stats {
        writeln!(out, "{},{},{},{}", s.volume, s.wss_blocks, s.write_blocks, kept.contains(&s.volume))?;
    }
    eprintln!("{} of {} volume(s) kept", kept.len(), stats.len());
    Ok(())
}

fn print_observations(out: &mut impl Write, volume: &str, r: &ObservationReport) -> Result<()> {
    writeln!(out, "# volume {volume}: {} writes, WSS {} blocks", r.writes, r.wss_blocks)?;
    if let Some(b) = &r.short_lived {
        for x in b {
            writeln!(out, "{volume},short_lived,{},{}", x.wss_multiple, x.fraction)?;
        }
    }
    // Update counts exclude each LBA's first write.
    for g in &r.frequency_groups {
        let cv = g.cv.map(|c| c.to_string()).unwrap_or_default();
        writeln!(out, "{volume},frequency_group,{}-{},{},{cv}", g.from_rank, g.to_rank, g.lbas)?;
    }
    if let Some(f) = r.rare_write_fraction {
        writeln!(out, "{volume},rare_write_fraction,{f}")?;
    }
    if let Some(b) = &r.rare_lifespans {
        for x in b {
            writeln!(out, "{volume},rare_lifespan,{},{}", x.wss_multiple, x.fraction)?;
        }
    }
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let mut out = BufWriter::new(io::stdout().lock());
    let volumes = load_volumes(&cfg)?;
    if volumes.is_empty() {
        return Err(Error::Degenerate("no volume passed the filter").into());
    }
    for vol in &volumes {
        let ann = annotate_bits(&vol.lbas);
        print_observations(&mut out, &vol.name, &observation_stats(&ann, vol.wss_blocks()))?;
        if args.gp_cdf {
            let sim = simulate(&cfg.scheme, cfg.selector, &cfg.volume_config(), &vol.lbas)?;
            let dist = collected_gp_distribution(&sim.gc_log)?;
            writeln!(out, "{},collected_gp_median,{}", vol.name, dist.median)?;
            for (gp, cdf) in dist.points() {
                writeln!(out, "{},collected_gp_cdf,{gp},{cdf}", vol.name)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay(a) => cmd_replay(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Math(a) => cmd_math(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
