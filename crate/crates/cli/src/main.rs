//! `zdyn`: figures, pair tracking, avoidance experiments and atlas dumps.

mod figures;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use zeta_dyn::atlas::{gram_law_check, ladder, write_ladder_csv, LadderFamily};
use zeta_dyn::config::RunConfig;
use zeta_dyn::rearranger::{auto_search, reflection_map, run_avoidance_experiment, ReflectionMap};
use zeta_dyn::tracker::{
    count_zeros_region, event_summary, locate_online_zeros, track_pair, write_trajectory_csv, BoxRegion,
    PairTrajectory, TrackRequest,
};
use zeta_dyn::{Error, Executor, Family, Rearrangement, Section, SectionSpec};

#[derive(Parser, Debug)]
#[command(name = "zdyn", version, about = "Zeros of zeta sections and their collisions")]
struct Cli {
    /// JSON run configuration; ZC_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the configured output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Absolute tolerance for root refinement.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct PairArgs {
    /// Consecutive zero indices, e.g. 132,133.
    #[arg(long, value_parser = parse_pair)]
    pair: (usize, usize),
    #[arg(long, default_value = "accelerated")]
    family: Family,
    #[arg(long = "N-max")]
    n_max: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Data behind one figure (fig1 .. fig11).
    Figure { id: String },
    /// Track a pair of consecutive zeros.
    Track {
        #[command(flatten)]
        pair: PairArgs,
        /// Rearrangement JSON file.
        #[arg(long)]
        rearrangement: Option<PathBuf>,
    },
    /// On-line zeros and box counts of one section.
    Scan {
        #[arg(long)]
        t_lo: f64,
        #[arg(long)]
        t_hi: f64,
        #[arg(long, default_value = "accelerated")]
        family: Family,
        #[arg(long = "N")]
        n: usize,
    },
    /// Closed-form zero ladders with refinements.
    Atlas {
        #[arg(long, value_enum, default_value = "fl")]
        family: AtlasFamily,
        /// Term index for the bk ladder.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        lo: usize,
        #[arg(long)]
        hi: usize,
    },
    /// Gram's law signs.
    Gram {
        #[arg(long, default_value_t = 0)]
        lo: usize,
        #[arg(long)]
        hi: usize,
    },
    /// Compare natural and rearranged summation order.
    Avoid {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, conflicts_with_all = ["builtin", "auto"])]
        rearrangement: Option<PathBuf>,
        /// Use the built-in reflection map of the family.
        #[arg(long)]
        builtin: bool,
        /// Search interval reversals.
        #[arg(long)]
        auto: bool,
    },
    /// Track a Davenport-Heilbronn pair.
    DhTrack {
        #[arg(long, value_parser = parse_pair)]
        pair: (usize, usize),
        #[arg(long = "N-max")]
        n_max: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AtlasFamily {
    Fl,
    Bk,
    Gram,
    Dh,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad index '{a}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad index '{b}'"))?;
    if b != a + 1 || a == 0 {
        return Err("pair must be two consecutive positive indices".into());
    }
    Ok((a, b))
}

enum Status {
    Complete,
    Partial,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => {
            eprintln!("warning: tracking ended early; partial output written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Env {
    cfg: RunConfig,
    out: PathBuf,
    exec: Executor,
    command: String,
}

fn run(cli: Cli) -> Result<Status> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(w) = cli.workers {
        cfg.worker_count = w;
    }
    if let Some(t) = cli.tol {
        cfg.abs_eps = t;
    }
    cfg.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let exec = Executor::parallel(Some(cfg.worker_count));
    let command = std::iter::once("zdyn".to_string())
        .chain(std::env::args().skip(1))
        .collect::<Vec<_>>()
        .join(" ");
    let env = Env { cfg, out, exec, command };
    match cli.command {
        Command::Figure { id } => figure(&env, &id),
        Command::Track { pair, rearrangement } => {
            let r = rearrangement.as_deref().map(Rearrangement::load).transpose()?;
            let req = TrackRequest::new(pair.pair.0, pair.family, pair.n_max).with_rearrangement(r);
            write_track(&env, &track_pair(&req, &env.cfg.tracker())?, "track")
        }
        Command::Scan { t_lo, t_hi, family, n } => scan(&env, t_lo, t_hi, family, n),
        Command::Atlas { family, k, lo, hi } => {
            let fam = match family {
                AtlasFamily::Fl => LadderFamily::Fl,
                AtlasFamily::Bk => LadderFamily::Bk,
                AtlasFamily::Gram => LadderFamily::Gram,
                AtlasFamily::Dh => LadderFamily::Dh,
            };
            let rows = ladder(fam, k, lo, hi)?;
            let path = env.out.join(format!("atlas_{}.csv", format!("{family:?}").to_lowercase()));
            write_ladder_csv(BufWriter::new(File::create(&path)?), &rows, &env.command)?;
            println!("{}", path.display());
            Ok(Status::Complete)
        }
        Command::Gram { lo, hi } => gram(&env, lo, hi),
        Command::Avoid {
            pair,
            rearrangement,
            builtin,
            auto,
        } => avoid(&env, &pair, rearrangement.as_deref(), builtin, auto),
        Command::DhTrack { pair, n_max } => {
            let traj = zeta_dyn::dh::dh_track_pair(pair.0, n_max, &env.cfg.tracker())?;
            write_track(&env, &traj, "dh_track")
        }
    }
}

fn figure(env: &Env, id: &str) -> Result<Status> {
    let ctx = figures::Ctx {
        out: &env.out,
        command: &env.command,
        tol: env.cfg.tolerance(),
        tracker: env.cfg.tracker(),
        exec: env.exec,
    };
    let emitted = figures::emit(id, &ctx)?;
    for f in &emitted.files {
        println!("{}", f.display());
    }
    Ok(if emitted.partial { Status::Partial } else { Status::Complete })
}

fn write_track(env: &Env, traj: &PairTrajectory, stem: &str) -> Result<Status> {
    let base = format!("{stem}_{}_{}_{}", traj.family, traj.pair.0, traj.pair.1);
    let csv = env.out.join(format!("{base}.csv"));
    let json = env.out.join(format!("{base}.events.json"));
    write_trajectory_csv(BufWriter::new(File::create(&csv)?), traj, &env.command)?;
    fs::write(&json, serde_json::to_string_pretty(&event_summary(traj))? + "\n")?;
    println!("{}", csv.display());
    println!("{}", json.display());
    Ok(if traj.is_complete() { Status::Complete } else { Status::Partial })
}

/// Counts zeros in `[0, 1] × [a, b]`, nudging edges that pass through a zero.
fn box_count(sec: &Section, a: f64, b: f64) -> Result<usize> {
    let mut shift = 0.0;
    for _ in 0..8 {
        let region = BoxRegion::new(0.0, 1.0, a + shift, b + shift)?;
        match count_zeros_region(sec, 0.0, &region) {
            Err(Error::BoundaryZero { .. }) => shift += 1e-3,
            other => return Ok(other?),
        }
    }
    bail!("boundary zeros persist near [{a}, {b}]")
}

fn scan(env: &Env, t_lo: f64, t_hi: f64, family: Family, n: usize) -> Result<Status> {
    if !(t_lo.is_finite() && t_hi.is_finite()) || t_lo < 0.0 {
        bail!("scan range must be finite and non-negative");
    }
    let sec = Section::new(&SectionSpec::new(family, n)?)?;
    let zeros = if t_hi > t_lo && t_lo > 0.0 {
        locate_online_zeros(&sec, 0.0, t_lo, t_hi)?
    } else {
        Vec::new()
    };
    let base = format!("scan_{family}_N{n}");
    let zpath = env.out.join(format!("{base}_zeros.csv"));
    let mut w = BufWriter::new(File::create(&zpath)?);
    writeln!(w, "# {}", env.command)?;
    writeln!(w, "index,t,residual")?;
    for (i, z) in zeros.iter().enumerate() {
        writeln!(w, "{},{:.12},{:.3e}", i + 1, z.location.t, z.residual)?;
    }
    w.flush()?;
    let mut edges = Vec::new();
    let mut a = t_lo;
    while a < t_hi {
        let b = (a + 1.0).min(t_hi);
        edges.push((a, b));
        a = b;
    }
    let counts = env.exec.map(&edges, |&(a, b)| box_count(&sec, a, b));
    let bpath = env.out.join(format!("{base}_boxes.csv"));
    let mut w = BufWriter::new(File::create(&bpath)?);
    writeln!(w, "# {}", env.command)?;
    writeln!(w, "t_lo,t_hi,online,box_count,discrepancy")?;
    for (&(a, b), c) in edges.iter().zip(counts) {
        let c = c?;
        let online = zeros
            .iter()
            .filter(|z| z.location.t >= a && z.location.t < b)
            .count();
        writeln!(w, "{a:.6},{b:.6},{online},{c},{}", c != online)?;
    }
    w.flush()?;
    println!("{}", zpath.display());
    println!("{}", bpath.display());
    Ok(Status::Complete)
}

fn gram(env: &Env, lo: usize, hi: usize) -> Result<Status> {
    if hi < lo {
        bail!("empty range");
    }
    let ns: Vec<usize> = (lo..=hi).collect();
    let checks = env.exec.map(&ns, |&n| gram_law_check(n));
    let path = env.out.join("gram.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "# {}", env.command)?;
    writeln!(w, "n,gram_point,signed_z,holds")?;
    for c in checks {
        let c = c?;
        writeln!(w, "{},{:.12},{:.12e},{}", c.n, c.gram_point, c.value, c.holds)?;
    }
    w.flush()?;
    println!("{}", path.display());
    Ok(Status::Complete)
}

fn avoid(env: &Env, pair: &PairArgs, file: Option<&Path>, builtin: bool, auto: bool) -> Result<Status> {
    let tracker = env.cfg.tracker();
    let (a, b) = pair.pair;
    let report = if auto {
        let outcome = auto_search(a, pair.family, pair.n_max, env.cfg.search_cap, env.cfg.min_interval_len, &tracker, &env.exec)?;
        let path = env.out.join(format!("avoid_search_{}_{a}_{b}.json", pair.family));
        fs::write(&path, serde_json::to_string_pretty(&outcome)? + "\n")?;
        println!("{}", path.display());
        outcome.report
    } else {
        let r = match (file, builtin) {
            (Some(p), _) => Rearrangement::load(p)?,
            (None, true) => match pair.family {
                Family::Classical => reflection_map(ReflectionMap::Classical),
                Family::Accelerated => reflection_map(ReflectionMap::Accelerated),
                Family::Dh => bail!("no built-in rearrangement for the dh family"),
            },
            (None, false) => bail!("give --rearrangement FILE, --builtin or --auto"),
        };
        let report = run_avoidance_experiment(a, pair.family, pair.n_max, &r, &tracker)?;
        let path = env.out.join(format!("avoid_{}_{a}_{b}.json", pair.family));
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        println!("{}", path.display());
        report
    };
    println!("verdict: {:?}", report.verdict);
    Ok(if report.partial { Status::Partial } else { Status::Complete })
}
