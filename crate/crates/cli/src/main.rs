use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use cfm::anomaly::AggregationKind;
use cfm::features::ExtractorKind;
use cfm::harness::{
    convert, run_bench, run_eval, run_infer, run_train, write_benchmark, BenchmarkSpec, ConfigFile, Preset, RunConfig,
};
use cfm::mapping::{Arch, Mode};
use cfm::Error;

#[derive(Parser)]
#[command(name = "cfm", version, about = "Crossmodal feature mapping for RGB + point cloud anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a manifest from an MVTec-style directory tree.
    Convert {
        dataset: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the synthetic benchmark, its manifest and a desk-scale config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        train: usize,
        #[arg(long, default_value_t = 20)]
        test_per_kind: usize,
    },
    /// Train one mapping pair per category.
    Train(RunArgs),
    /// Score test samples and compute metrics.
    Eval(RunArgs),
    /// Score a split and export anomaly maps, without metrics.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Single-threaded inference timing and peak memory.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 21)]
        limit: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` TOML file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    /// Restrict to these categories (repeatable).
    #[arg(long = "category")]
    categories: Vec<String>,
    #[arg(long, value_parser = parse_extractor)]
    extractor: Option<ExtractorKind>,
    #[arg(long)]
    features_dir: Option<PathBuf>,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    agg: Option<AggregationKind>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Arch>,
    #[arg(long)]
    few_shot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    export_maps: bool,
}

fn parse_extractor(s: &str) -> Result<ExtractorKind, String> {
    match s {
        "toy" => Ok(ExtractorKind::Toy),
        "external" => Ok(ExtractorKind::External),
        _ => Err(format!("unknown extractor '{s}' (toy or external)")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "cross" => Ok(Mode::Cross),
        "intra" => Ok(Mode::Intra),
        _ => Err(format!("unknown mode '{s}' (cross or intra)")),
    }
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    match s {
        "projection" => Ok(Arch::Projection),
        "encdec" | "encoder_decoder" => Ok(Arch::EncoderDecoder),
        _ => Err(format!("unknown architecture '{s}' (projection or encdec)")),
    }
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, Error> {
        let file = match &self.config {
            Some(path) => ConfigFile::read(path)?,
            None => ConfigFile::default(),
        };
        let cli = ConfigFile {
            preset: self.preset,
            manifest: self.manifest,
            output: self.output,
            checkpoints: self.checkpoints,
            categories: (!self.categories.is_empty()).then_some(self.categories),
            extractor: self.extractor,
            features_dir: self.features_dir,
            layer: self.layer,
            mode: self.mode,
            arch: self.arch,
            aggregation: self.agg,
            sigma: self.sigma,
            few_shot: self.few_shot,
            seed: self.seed,
            epochs: self.epochs,
            export_maps: self.export_maps.then_some(true),
            ..ConfigFile::default()
        };
        file.overlay(cli).resolve()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Convert { dataset, out } => {
            let m = convert(&dataset, &out)?;
            println!("{} samples in {} categories -> {}", m.samples.len(), m.categories().len(), out.join("manifest.json").display());
        }
        Command::Synth {
            out,
            seed,
            train,
            test_per_kind,
        } => {
            let spec = BenchmarkSpec {
                train,
                test_per_kind,
                seed,
                ..BenchmarkSpec::default()
            };
            let m = write_benchmark(&spec, &out)?;
            let config = ConfigFile {
                preset: Some(Preset::Desk),
                manifest: Some("manifest.json".into()),
                output: Some("run".into()),
                seed: Some(seed),
                ..ConfigFile::default()
            };
            let path = out.join("desk.toml");
            std::fs::write(&path, config.to_toml()).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            println!("{} samples -> {}; config {}", m.samples.len(), out.display(), path.display());
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            for s in run_train(&cfg)? {
                println!("{}: {} samples, final loss {:.6}, {}", s.category, s.train_ids.len(), s.final_loss, s.checkpoint.display());
            }
        }
        Command::Eval(args) => {
            let cfg = args.resolve()?;
            let report = run_eval(&cfg)?;
            print!("{}", report.to_csv());
            info!("reports written to {}", cfg.output.display());
        }
        Command::Infer { run, split } => {
            let cfg = run.resolve()?;
            for r in run_infer(&cfg, &split)? {
                println!("{},{:.6}", r.sample_id, r.score);
            }
        }
        Command::Bench { run, limit } => {
            let cfg = run.resolve()?;
            let b = run_bench(&cfg, limit)?;
            let rss = b.peak_rss_mb.map_or("n/a".to_string(), |m| format!("{m:.1} MiB"));
            println!(
                "{} (layer {}): {:.2} fps, {:.2} ms/sample over {} samples, peak RSS {rss}",
                b.variant, b.layer, b.frames_per_second, b.mean_ms, b.samples
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
