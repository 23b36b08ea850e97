//! Reordering the summands and checking whether that removes collisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::sections::{Family, Piece, PieceKind, Rearrangement};
use crate::tracker::{collision_intervals_for, track_pair, CollisionEvent, PairTrajectory, TrackRequest, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionMap {
    /// For classical sections.
    Classical,
    /// For accelerated sections.
    Accelerated,
}

/// The two hard-coded reflection maps.
pub fn reflection_map(which: ReflectionMap) -> Rearrangement {
    let (start, a, b, c) = match which {
        ReflectionMap::Classical => (1, (14, 27, 41), (28, 85), (86, 170, 256)),
        ReflectionMap::Accelerated => (0, (31, 53, 84), (54, 177), (178, 326, 504)),
    };
    let pieces = vec![
        Piece { from: start, to: a.0 - 1, kind: PieceKind::Identity },
        Piece { from: a.0, to: a.1, kind: PieceKind::Reflect { c: a.2 } },
        Piece { from: b.0, to: b.1, kind: PieceKind::Identity },
        Piece { from: c.0, to: c.1, kind: PieceKind::Reflect { c: c.2 } },
    ];
    Rearrangement::new((start, c.1), pieces).expect("fixture is a permutation")
}

/// Which part of each interval is reversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReversalMode {
    #[default]
    Full,
    /// Only the upper half `[⌈(lo+hi)/2⌉, hi]`.
    Upper,
}

/// Identity off the intervals and `n ↦ lo + hi - n` inside each.
pub fn reverse_interval_rearrangement(intervals: &[(usize, usize)], mode: ReversalMode) -> Result<Rearrangement> {
    let mut ivs: Vec<(usize, usize)> = intervals
        .iter()
        .map(|&(lo, hi)| match mode {
            ReversalMode::Full => (lo, hi),
            ReversalMode::Upper => ((lo + hi).div_ceil(2), hi),
        })
        .collect();
    if ivs.iter().any(|&(lo, hi)| lo > hi) {
        return Err(Error::InvalidRearrangement("interval with lo > hi".into()));
    }
    ivs.sort_unstable();
    for w in ivs.windows(2) {
        if w[1].0 <= w[0].1 {
            return Err(Error::InvalidRearrangement(format!(
                "intervals [{}, {}] and [{}, {}] overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    if ivs.is_empty() {
        return Rearrangement::identity((0, 0));
    }
    let start = ivs[0].0;
    let end = ivs[ivs.len() - 1].1;
    let mut pieces = Vec::new();
    let mut next = start;
    for (lo, hi) in ivs {
        if lo > next {
            pieces.push(Piece { from: next, to: lo - 1, kind: PieceKind::Identity });
        }
        pieces.push(Piece { from: lo, to: hi, kind: PieceKind::Reflect { c: (lo + hi) as i64 } });
        next = hi + 1;
    }
    Rearrangement::new((start, end), pieces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Avoided,
    Reduced,
    Unchanged,
    Worsened,
}

pub fn verdict(baseline: &[CollisionEvent], rearranged: &[CollisionEvent]) -> Verdict {
    match (baseline.len(), rearranged.len()) {
        (b, 0) if b > 0 => Verdict::Avoided,
        (b, r) if r < b => Verdict::Reduced,
        (b, r) if r == b => Verdict::Unchanged,
        _ => Verdict::Worsened,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceReport {
    pub pair: (usize, usize),
    pub family: Family,
    pub n_max: usize,
    pub baseline_events: Vec<CollisionEvent>,
    pub rearranged_events: Vec<CollisionEvent>,
    pub rearrangement: Rearrangement,
    pub verdict: Verdict,
    /// Largest difference of the final zero locations under the two orders.
    pub final_difference: Option<f64>,
    /// Set when either run lost track.
    pub partial: bool,
}

fn final_difference(a: &PairTrajectory, b: &PairTrajectory) -> Option<f64> {
    let (x, y) = (a.final_sample()?, b.final_sample()?);
    if x.n_terms != y.n_terms || x.t_param != y.t_param {
        return None;
    }
    let d = |p: crate::special::ComplexPoint, q: crate::special::ComplexPoint| {
        (p.sigma - q.sigma).hypot(p.t - q.t)
    };
    Some(d(x.lo.location, y.lo.location).max(d(x.hi.location, y.hi.location)))
}

fn check_closed(r: &Rearrangement, first: usize, n_max: usize) -> Result<()> {
    let (lo, hi) = r.domain();
    if hi > n_max || (lo < first && hi >= lo && !r.is_identity()) {
        return Err(Error::InvalidRearrangement(format!(
            "domain [{lo}, {hi}] must lie inside [{first}, {n_max}]"
        )));
    }
    Ok(())
}

fn report(
    req: &TrackRequest,
    baseline: &PairTrajectory,
    rearranged: &PairTrajectory,
    rearrangement: Rearrangement,
) -> AvoidanceReport {
    AvoidanceReport {
        pair: baseline.pair,
        family: req.family,
        n_max: req.n_max,
        baseline_events: baseline.events.clone(),
        rearranged_events: rearranged.events.clone(),
        verdict: verdict(&baseline.events, &rearranged.events),
        final_difference: final_difference(baseline, rearranged),
        partial: !(baseline.is_complete() && rearranged.is_complete()),
        rearrangement,
    }
}

/// Tracks the pair in the natural order and under `rearrangement`, which
/// must permute `[first, n_max]` so both runs end at the same section.
pub fn run_avoidance_experiment(
    pair_lo: usize,
    family: Family,
    n_max: usize,
    rearrangement: &Rearrangement,
    cfg: &TrackerConfig,
) -> Result<AvoidanceReport> {
    check_closed(rearrangement, family.first_index(), n_max)?;
    let req = TrackRequest::new(pair_lo, family, n_max);
    let baseline = track_pair(&req, cfg)?;
    run_against(&req, &baseline, rearrangement, cfg)
}

fn run_against(
    req: &TrackRequest,
    baseline: &PairTrajectory,
    rearrangement: &Rearrangement,
    cfg: &TrackerConfig,
) -> Result<AvoidanceReport> {
    let rearranged = if rearrangement.is_identity() {
        baseline.clone()
    } else {
        track_pair(&req.clone().with_rearrangement(Some(rearrangement.clone())), cfg)?
    };
    Ok(report(req, baseline, &rearranged, rearrangement.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub report: AvoidanceReport,
    /// Candidate intervals, largest first.
    pub candidates: Vec<(usize, usize)>,
    pub tried: usize,
    /// No avoiding rearrangement among the tried subsets.
    pub exhausted: bool,
}

/// Reverses subsets of candidate intervals and keeps the first subset (in
/// bitmask order) that removes every event, else the one with the fewest
/// events. Only the first `k` candidates with `2^k - 1 <= cap` are combined,
/// and subsets with overlapping intervals are skipped.
pub fn auto_search(
    pair_lo: usize,
    family: Family,
    n_max: usize,
    cap: usize,
    min_len: usize,
    cfg: &TrackerConfig,
    exec: &Executor,
) -> Result<SearchOutcome> {
    let req = TrackRequest::new(pair_lo, family, n_max);
    let baseline = track_pair(&req, cfg)?;
    let first = family.first_index();
    let identity = Rearrangement::identity((first, first))?;
    if baseline.events.is_empty() {
        return Ok(SearchOutcome {
            report: report(&req, &baseline, &baseline, identity),
            candidates: Vec::new(),
            tried: 0,
            exhausted: false,
        });
    }
    let t = baseline
        .final_sample()
        .map(|s| 0.5 * (s.lo.location.t + s.hi.location.t))
        .ok_or_else(|| Error::TrackingLoss {
            n_terms: first,
            t_param: 0.0,
            reason: "no samples".into(),
        })?;
    let candidates = search_candidates(family, t, first, n_max, min_len, &baseline.events)?;
    let k = (usize::BITS - 1 - (cap.max(1) + 1).leading_zeros()) as usize;
    let used = &candidates[..candidates.len().min(k).min(16)];
    let masks: Vec<u32> = (1..(1u32 << used.len()))
        .filter(|&mask| {
            let chosen = pick(used, mask);
            chosen.iter().enumerate().all(|(i, a)| {
                chosen[i + 1..].iter().all(|b| a.1 < b.0 || b.1 < a.0)
            })
        })
        .collect();
    let results = exec.map(&masks, |&mask| -> Result<AvoidanceReport> {
        let r = reverse_interval_rearrangement(&pick(used, mask), ReversalMode::Full)?;
        run_against(&req, &baseline, &r, cfg)
    });
    let mut best: Option<AvoidanceReport> = None;
    let tried = results.len();
    for r in results {
        let r = r?;
        if r.verdict == Verdict::Avoided && !r.partial {
            return Ok(SearchOutcome {
                report: r,
                candidates,
                tried,
                exhausted: false,
            });
        }
        let better = match &best {
            None => true,
            Some(b) => r.rearranged_events.len() < b.rearranged_events.len(),
        };
        if better {
            best = Some(r);
        }
    }
    Ok(SearchOutcome {
        report: best.unwrap_or_else(|| report(&req, &baseline, &baseline, identity)),
        candidates,
        tried,
        exhausted: true,
    })
}

fn pick(candidates: &[(usize, usize)], mask: u32) -> Vec<(usize, usize)> {
    candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, iv)| *iv)
        .collect()
}

/// Candidate reversal intervals, in search order. First, for every
/// departure/return span of the baseline (a span without return runs to
/// `n_max`), the union of the fluctuation windows it touches; then the
/// windows with at least `min_len` integers, largest first. Windows are taken
/// half-open, `(n_lo, n_hi]`, since neighbours share an endpoint.
pub fn search_candidates(
    family: Family,
    t: f64,
    first: usize,
    n_max: usize,
    min_len: usize,
    events: &[CollisionEvent],
) -> Result<Vec<(usize, usize)>> {
    let clip = |lo: usize, hi: usize| {
        let lo = lo.max(first + 1);
        let hi = hi.min(n_max);
        (hi > lo).then_some((lo, hi))
    };
    let all = collision_intervals_for(family, t, 1)?.intervals;
    let window_of = |n: usize| all.iter().find(|iv| iv.n_lo < n && n <= iv.n_hi);
    let mut spans = Vec::new();
    let mut it = events.iter();
    while let Some(dep) = it.next() {
        let ret = it.next().map(|e| e.n_terms).unwrap_or(n_max);
        let lo = window_of(dep.n_terms).map(|iv| iv.n_lo + 1).unwrap_or(dep.n_terms);
        let hi = window_of(ret).map(|iv| iv.n_hi).unwrap_or(ret);
        if let Some(iv) = clip(lo, hi) {
            spans.push(iv);
        }
    }
    spans.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut windows: Vec<(usize, usize)> = all
        .iter()
        .filter(|iv| iv.len() >= min_len.max(1))
        .filter_map(|iv| clip(iv.n_lo + 1, iv.n_hi))
        .collect();
    windows.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut out = spans;
    for w in windows {
        if !out.contains(&w) {
            out.push(w);
        }
    }
    Ok(out)
}
