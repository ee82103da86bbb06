use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vlcambc::ambd::AmbdKind;
use vlcambc::harness::record::{read_csv, write_csv};
use vlcambc::harness::report::{report, theory_report};
use vlcambc::harness::selftest::selftest;
use vlcambc::harness::sweep::run_sweep_to;
use vlcambc::harness::{run_point, Point, RunConfig};

#[derive(Parser)]
#[command(name = "vlcambc", version, about = "Joint VLC and ambient backscatter link simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Configuration file with dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Device kinds: eh, relay, control or all.
    #[arg(long, global = true)]
    bd: Option<String>,
    /// Frames per point.
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Keep rows already present in the output file.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the distance and power grid.
    Sweep,
    /// Run a single cell and print every metric.
    Point {
        #[arg(long, default_value_t = 0.3)]
        d_led: f64,
        #[arg(long, default_value_t = 0.5)]
        d_rx: f64,
        #[arg(long, default_value_t = 0.0)]
        p_tx: f64,
    },
    /// Print the BFSK waterfall and link-budget curves.
    Theory,
    /// Check a sweep CSV; without one, print the theory curves.
    Report { csv: Option<PathBuf> },
    /// Run the quick invariant suite.
    Selftest,
}

enum Failure {
    Usage(anyhow::Error),
    Acceptance,
    Io(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let io = e.chain().any(|c| c.is::<std::io::Error>() || c.is::<csv::Error>());
        if io {
            Self::Io(e)
        } else {
            Self::Usage(e)
        }
    }
}

fn parse_kinds(s: &str) -> anyhow::Result<Vec<AmbdKind>> {
    if s == "all" {
        return Ok(AmbdKind::ALL.to_vec());
    }
    s.split(',').map(|k| Ok(k.trim().parse::<AmbdKind>()?)).collect()
}

fn build_config(g: &Global) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.context(format!("reading {}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(b) = &g.bd {
        cfg.kinds = parse_kinds(b)?;
    }
    if let Some(f) = g.frames {
        cfg.frames = f;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            let mut f = File::create(p).map_err(|e| anyhow::Error::new(e).context(format!("writing {}", p.display())))?;
            f.write_all(text.as_bytes())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = build_config(&cli.global)?;
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::Sweep => {
            let path = out.unwrap_or(Path::new("sweep.csv"));
            let rows = run_sweep_to(&cfg, path, cli.global.resume)?;
            eprintln!("{} rows written to {}", rows.len(), path.display());
        }
        Command::Point { d_led, d_rx, p_tx } => {
            let mut rows = Vec::new();
            for &kind in &cfg.kinds {
                let point = Point {
                    kind,
                    d_led_bd: d_led,
                    d_rx_bd: d_rx,
                    p_tx_dbm: p_tx,
                };
                let r = run_point(&cfg, point).map_err(anyhow::Error::from)?;
                eprintln!("{r:#?}");
                rows.push(r);
            }
            match out {
                Some(p) => {
                    let f = File::create(p).map_err(anyhow::Error::from)?;
                    write_csv(BufWriter::new(f), &rows)?;
                }
                None => write_csv(std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Theory => emit(out, &theory_report(&cfg))?,
        Command::Report { csv } => match csv {
            None => emit(out, &theory_report(&cfg))?,
            Some(path) => {
                let file = File::open(&path).map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))?;
                let rows = read_csv(file)?;
                let r = report(&rows, &cfg).map_err(anyhow::Error::from)?;
                emit(out, &r.to_string())?;
                if !r.passed() {
                    return Err(Failure::Acceptance);
                }
            }
        },
        Command::Selftest => {
            let lines = selftest(&cfg);
            for l in &lines {
                println!("{l}");
            }
            if lines.iter().any(|l| !l.passed) {
                return Err(Failure::Acceptance);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Acceptance) => {
            eprintln!("acceptance checks failed");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e:#}");
            ExitCode::from(3)
        }
    }
}
