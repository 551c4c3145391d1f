use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otnw_core::sliced::write_trace_csv;
use otnw_core::{
    column_mosaic, load_flo, load_image, save_image, transfer_images, Error, ErrorKind,
    MetricReport, Mode, SmoothTarget, TransferConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "otnw",
    version,
    about = "Patch-based colour transfer with sliced optimal transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recolour SOURCE to match TARGET.
    Transfer(TransferArgs),
    /// Write PSNR and SSIM of two images (CSV, or JSON for a .json path).
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interleave column strips of two images.
    Mosaic {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 16)]
        strip: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Swd,
    Idt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Displacement,
    Map,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Middlebury .flo field displacing the target's pixel positions.
    #[arg(long)]
    flow: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Patch side, odd.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10.0)]
    stretch: f64,
    /// Smoothing bandwidth in projected units.
    #[arg(long, default_value_t = 10.0)]
    bandwidth: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Swd)]
    mode: ModeArg,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = 32)]
    dirs: usize,
    #[arg(long, default_value_t = 256)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_nw: bool,
    #[arg(long, value_enum, default_value_t = TargetArg::Displacement)]
    smooth: TargetArg,
    /// Smooth only on the last iteration.
    #[arg(long)]
    nw_final_only: bool,
    /// Patch count above which 1D maps are fitted on a subsample.
    #[arg(long, default_value_t = 500_000)]
    max_patches: usize,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, requires = "ground_truth")]
    report: Option<PathBuf>,
    #[arg(long, requires = "report")]
    ground_truth: Option<PathBuf>,
}

impl TransferArgs {
    fn config(&self) -> TransferConfig {
        TransferConfig {
            k: self.k,
            w_stretch: self.stretch,
            h: self.bandwidth,
            mode: match self.mode {
                ModeArg::Swd => Mode::Swd,
                ModeArg::Idt => Mode::Idt,
            },
            iterations: self.iters,
            directions_per_iteration: self.dirs,
            histogram_bins: self.bins,
            seed: self.seed,
            nw_enabled: !self.no_nw,
            nw_target: match self.smooth {
                TargetArg::Displacement => SmoothTarget::Displacement,
                TargetArg::Map => SmoothTarget::Map,
            },
            nw_final_only: self.nw_final_only,
            max_solve_samples: self.max_patches,
            ..TransferConfig::default()
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_report(report: &MetricReport, path: &Path) -> Result<(), Error> {
    let mut out = create(path)?;
    let json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let written = if json {
        serde_json::to_writer_pretty(&mut out, report)
            .map_err(std::io::Error::from)
            .and_then(|_| writeln!(out))
    } else {
        writeln!(out, "{}", MetricReport::CSV_HEADER)
            .and_then(|_| writeln!(out, "{}", report.csv_row()))
    };
    written
        .and_then(|_| out.flush())
        .map_err(|e| io_error(path, e))
}

fn transfer(args: &TransferArgs) -> Result<(), Error> {
    let cfg = args.config();
    cfg.validate()?;
    let source = load_image(&args.source)?;
    let target = load_image(&args.target)?;
    let flow = args.flow.as_ref().map(load_flo).transpose()?;
    let ground_truth = args.ground_truth.as_ref().map(load_image).transpose()?;

    let result = transfer_images(&source, &target, flow.as_ref(), &cfg)?;
    let report = ground_truth
        .map(|g| MetricReport::compute(&result.image, &g))
        .transpose()?;

    save_image(&result.image, &args.out)?;
    if let Some(path) = &args.trace {
        let mut out = create(path)?;
        write_trace_csv(&result.trace, &mut out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(path, e))?;
    }
    if let (Some(report), Some(path)) = (report, &args.report) {
        write_report(&report, path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Transfer(args) => transfer(&args),
        Command::Metrics { a, b, out } => {
            let report = MetricReport::compute(&load_image(a)?, &load_image(b)?)?;
            write_report(&report, &out)
        }
        Command::Mosaic { a, b, strip, out } => {
            let m = column_mosaic(&load_image(a)?, &load_image(b)?, strip)?;
            save_image(&m, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otnw: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Dimension | ErrorKind::Config => EXIT_INVALID,
            })
        }
    }
}
