//! Data series behind each figure, written as CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use zeta_dyn::atlas::gram_point;
use zeta_dyn::rearranger::{reflection_map, ReflectionMap};
use zeta_dyn::sections::{b_term, partial_sum_series, RawFamily};
use zeta_dyn::special::zeta_reference;
use zeta_dyn::tracker::{track_pairs, write_trajectory_csv, PairTrajectory, TrackRequest, TrackerConfig};
use zeta_dyn::{ComplexPoint, Executor, Family, Section, SectionSpec, Tolerance};

pub const FIGURES: [&str; 11] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11",
];

pub struct Ctx<'a> {
    pub out: &'a Path,
    pub command: &'a str,
    pub tol: Tolerance,
    pub tracker: TrackerConfig,
    pub exec: Executor,
}

pub struct Emitted {
    pub files: Vec<PathBuf>,
    pub partial: bool,
}

fn create(ctx: &Ctx, name: &str, header: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = ctx.out.join(name);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "# {}", ctx.command)?;
    writeln!(w, "{header}")?;
    Ok((path, w))
}

fn ln_abs(z: zeta_dyn::C64) -> f64 {
    z.norm().ln()
}

pub fn emit(id: &str, ctx: &Ctx) -> Result<Emitted> {
    match id {
        "fig1" => raw_sums(ctx, "fig1.csv", 17_500.0, 5000, false),
        "fig2" => raw_sums(ctx, "fig2.csv", 1200.0, 600, true),
        "fig3" => fig3(ctx),
        "fig4" => fig4(ctx),
        "fig5" => section_values(ctx, "fig5.csv", &[8, 9]),
        "fig6" => section_values(ctx, "fig6.csv", &[22, 23]),
        "fig7" => fig7(ctx),
        "fig8" => trajectories(
            ctx,
            "fig8",
            vec![
                TrackRequest::new(132, Family::Classical, 150),
                TrackRequest::new(132, Family::Accelerated, 150),
            ],
        ),
        "fig9" => trajectories(ctx, "fig9", vec![TrackRequest::new(725, Family::Accelerated, LONG_N_MAX)]),
        "fig10" => trajectories(
            ctx,
            "fig10",
            vec![TrackRequest::new(725, Family::Accelerated, LONG_N_MAX)
                .with_rearrangement(Some(reflection_map(ReflectionMap::Accelerated)))],
        ),
        "fig11" => trajectories(ctx, "fig11", vec![TrackRequest::new(44, Family::Dh, 200)]),
        other => bail!("unknown figure '{other}' (expected one of {})", FIGURES.join(", ")),
    }
}

/// `[t/2] + 20` for the pair near `t = 1094`; past the end of both reflected
/// blocks of the accelerated rearrangement.
pub const LONG_N_MAX: usize = 567;

/// `ln|S_N|` (and `ln|S̃_N|`) against `N`, with `ln|ζ|` as a reference column.
fn raw_sums(ctx: &Ctx, name: &str, t: f64, n_max: usize, accelerated: bool) -> Result<Emitted> {
    let s = ComplexPoint::on_line(t);
    let zeta = ln_abs(zeta_reference(s, &ctx.tol)?);
    let kinds: Vec<RawFamily> = if accelerated {
        vec![RawFamily::ClassicalRaw, RawFamily::AcceleratedRaw]
    } else {
        vec![RawFamily::ClassicalRaw]
    };
    let series: Vec<_> = ctx
        .exec
        .map(&kinds, |&k| partial_sum_series(k, n_max, s))
        .into_iter()
        .collect::<zeta_dyn::Result<_>>()?;
    let header = if accelerated {
        "N,ln_abs_S,ln_abs_S_acc,ln_abs_zeta"
    } else {
        "N,ln_abs_S,ln_abs_zeta"
    };
    let (path, mut w) = create(ctx, name, header)?;
    for n in 1..=n_max {
        // the classical series starts at N = 1, the accelerated one at N = 0
        write!(w, "{n},{:.10}", ln_abs(series[0][n - 1]))?;
        if accelerated {
            write!(w, ",{:.10}", ln_abs(series[1][n]))?;
        }
        writeln!(w, ",{zeta:.10}")?;
    }
    w.flush()?;
    Ok(Emitted { files: vec![path], partial: false })
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn fig3(ctx: &Ctx) -> Result<Emitted> {
    let sec = Section::new(&SectionSpec::new(Family::Classical, 1)?)?;
    let ts = grid(0.0, 50.0, 0.05);
    let rows = ctx.exec.map(&ts, |&t| -> zeta_dyn::Result<(f64, f64)> {
        let s = ComplexPoint::on_line(t);
        Ok((ln_abs(zeta_reference(s, &ctx.tol)?), ln_abs(sec.eval(0.0, s.to_c64())?)))
    });
    let (path, mut w) = create(ctx, "fig3.csv", "t,ln_abs_zeta,ln_abs_zeta1")?;
    for (t, r) in ts.iter().zip(rows) {
        let (a, b) = r?;
        writeln!(w, "{t:.4},{a:.10},{b:.10}")?;
    }
    w.flush()?;
    Ok(Emitted { files: vec![path], partial: false })
}

fn fig4(ctx: &Ctx) -> Result<Emitted> {
    let ts = grid(0.0, 150.0, 0.05);
    let (path, mut w) = create(ctx, "fig4.csv", "t,ln_abs_B3")?;
    for t in ts {
        writeln!(w, "{t:.4},{:.10}", ln_abs(b_term(3, ComplexPoint::on_line(t))?))?;
    }
    w.flush()?;
    Ok(Emitted { files: vec![path], partial: false })
}

/// `ln|ζ̃_N(½+it)|` and the rotated real value over `[86, 90]`.
fn section_values(ctx: &Ctx, name: &str, ns: &[usize]) -> Result<Emitted> {
    let ts = grid(86.0, 90.0, 0.005);
    let (path, mut w) = create(ctx, name, "N,t,ln_abs_section,z")?;
    for &n in ns {
        let sec = Section::new(&SectionSpec::new(Family::Accelerated, n)?)?;
        for &t in &ts {
            let v = sec.eval(0.0, ComplexPoint::on_line(t).to_c64())?;
            writeln!(w, "{n},{t:.4},{:.10},{:.12e}", ln_abs(v), sec.z(0.0, t))?;
        }
    }
    w.flush()?;
    Ok(Emitted { files: vec![path], partial: false })
}

/// The accelerated zero that starts just below `g_126` (zero 127 in the
/// usual numbering) against that Gram point.
fn fig7(ctx: &Ctx) -> Result<Emitted> {
    let traj = zeta_dyn::tracker::track_pair(&TrackRequest::new(127, Family::Accelerated, 89), &ctx.tracker)?;
    let g = gram_point(126)?;
    let (path, mut w) = create(ctx, "fig7.csv", "N,t_zero,gram_126")?;
    for s in traj.section_samples() {
        writeln!(w, "{},{:.12},{g:.12}", s.n_terms, s.lo.location.t)?;
    }
    w.flush()?;
    Ok(Emitted { files: vec![path], partial: !traj.is_complete() })
}

fn trajectories(ctx: &Ctx, stem: &str, reqs: Vec<TrackRequest>) -> Result<Emitted> {
    let results = track_pairs(&reqs, &ctx.tracker, &ctx.exec);
    let mut files = Vec::new();
    let mut partial = false;
    for (req, r) in reqs.iter().zip(results) {
        let traj: PairTrajectory = r?;
        partial |= !traj.is_complete();
        let name = if reqs.len() > 1 {
            format!("{stem}_{}.csv", req.family)
        } else {
            format!("{stem}.csv")
        };
        let path = ctx.out.join(&name);
        let w = BufWriter::new(File::create(&path)?);
        write_trajectory_csv(w, &traj, ctx.command)?;
        files.push(path);
    }
    Ok(Emitted { files, partial })
}
