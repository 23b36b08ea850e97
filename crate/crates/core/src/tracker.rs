//! Continuation of section zeros along the homotopy `F_N + τ·(next term)`.
//!
//! A pair of consecutive zeros is followed in one of two modes. On the line
//! the pair is two real ordinates of the rotated function `Z`, advanced by a
//! predictor (`dt/dτ = -Z_τ/Z'`) and a Newton corrector. When the two
//! ordinates merge, the local maximum of `Z` between them (taken with the
//! sign it has there) changes sign; that is the departure test. Off the line
//! one zero `ρ` with `Re ρ > ½` is followed by complex Newton on `F` and its
//! partner is `1 - conj(ρ)`. The return test is the same extremum test with
//! the opposite sign.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::atlas::{initial_zero, local_spacing};
use crate::error::{Error, Result};
use crate::roots::{bracket_root, maximize};
use crate::sections::{fluctuation_intervals_for, Family, FluctuationInterval, Rearrangement, Section, SectionSpec};
use crate::special::{ComplexPoint, Tolerance, C64};

/// One located zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub location: ComplexPoint,
    pub on_line: bool,
    /// `|F|` at the location.
    pub residual: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Departure,
    Return,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Departure => "departure",
            EventKind::Return => "return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub t_param: f64,
    pub location: ComplexPoint,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n_terms: usize,
    pub t_param: f64,
    pub lo: ZeroRecord,
    pub hi: ZeroRecord,
    pub event: Option<EventKind>,
}

/// Where tracking stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingLoss {
    pub n_terms: usize,
    pub t_param: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrajectory {
    pub pair: (usize, usize),
    pub family: Family,
    pub samples: Vec<Sample>,
    pub events: Vec<CollisionEvent>,
    /// Collisions of one tracked zero with a zero outside the pair.
    pub external_events: Vec<ExternalEvent>,
    /// `Some` when the run ended early; `samples` hold the last good state.
    pub loss: Option<TrackingLoss>,
}

impl PairTrajectory {
    pub fn is_complete(&self) -> bool {
        self.loss.is_none()
    }

    /// Converts a partial trajectory into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.loss {
            None => Ok(self),
            Some(l) => Err(Error::TrackingLoss {
                n_terms: l.n_terms,
                t_param: l.t_param,
                reason: l.reason.clone(),
            }),
        }
    }

    /// Samples taken at integer sections (`τ = 0`).
    pub fn section_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples
            .iter()
            .filter(|s| s.t_param == 0.0 && s.event.is_none())
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.iter().rev().find(|s| s.event.is_none())
    }

    pub fn departures(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Departure).count()
    }

    pub fn returns(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Return).count()
    }
}

/// Step and threshold policy of the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Initial and maximal homotopy step.
    pub initial_step: f64,
    /// Smallest step before giving up.
    pub min_step: f64,
    /// Gap below which a departure is tested, as a fraction of the initial gap.
    pub collision_eps_factor: f64,
    /// `|σ - ½|` below which an off-line zero counts as returned.
    pub online_eps: f64,
    /// Largest move of a zero in one step, as a fraction of the initial gap.
    pub move_limit_factor: f64,
    /// Width in `τ` to which event times are bisected.
    pub event_tol: f64,
    pub tol: Tolerance,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.125,
            min_step: 1e-9,
            collision_eps_factor: 0.05,
            online_eps: 1e-6,
            move_limit_factor: 0.25,
            event_tol: 1e-10,
            tol: Tolerance::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        let positive = [
            self.initial_step,
            self.min_step,
            self.collision_eps_factor,
            self.online_eps,
            self.move_limit_factor,
            self.event_tol,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.initial_step > 1.0 {
            return Err(Error::Config("tracker thresholds must be positive (step <= 1)".into()));
        }
        Ok(())
    }
}

/// `(1-τ) F_N(s) + τ F_{N+1}(s)` for the section described by `spec`.
pub fn homotopy_eval(spec: &SectionSpec, t_param: f64, s: ComplexPoint) -> Result<C64> {
    check_tau(t_param)?;
    Section::new(spec)?.eval(t_param, s.to_c64())
}

fn check_tau(t_param: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t_param) {
        return Err(Error::Domain {
            func: "homotopy",
            arg: t_param,
            detail: "t_param must lie in [0, 1]",
        });
    }
    Ok(())
}

fn online_record(sec: &Section, tau: f64, t: f64) -> ZeroRecord {
    ZeroRecord {
        location: ComplexPoint::on_line(t),
        on_line: true,
        residual: sec.z(tau, t).abs(),
        newton_iters: 0,
    }
}

/// On-line zeros of a section (at homotopy parameter `tau`) in `[t_lo, t_hi]`.
///
/// Scans `Z` on a grid of a thirty-second of the mean zero gap, brackets
/// every sign change to `1e-10`, and also opens up local minima of `|Z|`
/// that hide a close pair between two grid points.
pub fn locate_online_zeros(sec: &Section, tau: f64, t_lo: f64, t_hi: f64) -> Result<Vec<ZeroRecord>> {
    check_tau(tau)?;
    if !(t_hi > t_lo && t_lo > 0.0) {
        return Ok(Vec::new());
    }
    let step = local_spacing(t_hi) / 32.0;
    let n = ((t_hi - t_lo) / step).ceil().max(2.0) as usize;
    let h = (t_hi - t_lo) / n as f64;
    let ts: Vec<f64> = (0..=n).map(|i| t_lo + h * i as f64).collect();
    let zs: Vec<f64> = ts.iter().map(|&t| sec.z(tau, t)).collect();
    let f = |t: f64| sec.z(tau, t);
    let mut out = Vec::new();
    for i in 0..n {
        if zs[i] == 0.0 {
            out.push(ts[i]);
        } else if zs[i].signum() != zs[i + 1].signum() && zs[i + 1] != 0.0 {
            if let Some(r) = bracket_root(f, ts[i], ts[i + 1], 1e-10) {
                out.push(r);
            }
        } else if i > 0
            && zs[i - 1].signum() == zs[i].signum()
            && zs[i].signum() == zs[i + 1].signum()
            && zs[i].abs() < zs[i - 1].abs()
            && zs[i].abs() <= zs[i + 1].abs()
        {
            let sign = zs[i].signum();
            let (tm, vm) = maximize(|t| -sign * f(t), ts[i - 1], ts[i + 1], 9, 1e-12);
            if vm > 0.0 {
                let a = bracket_root(f, ts[i - 1], tm, 1e-10);
                let b = bracket_root(f, tm, ts[i + 1], 1e-10);
                if let (Some(a), Some(b)) = (a, b) {
                    out.push(a);
                    out.push(b);
                }
            }
        }
    }
    if zs[n] == 0.0 {
        out.push(ts[n]);
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(out.into_iter().map(|t| online_record(sec, tau, t)).collect())
}

/// Newton refinement of a zero of `F` from a complex guess.
///
/// Results within `online_eps` of the critical line are re-solved on the line
/// with the real rotated function and reported with `σ = ½` exactly.
pub fn refine_zero(sec: &Section, tau: f64, guess: ComplexPoint, tol: &Tolerance) -> Result<ZeroRecord> {
    refine_zero_with(sec, tau, guess, tol, 1e-6)
}

pub fn refine_zero_with(
    sec: &Section,
    tau: f64,
    guess: ComplexPoint,
    tol: &Tolerance,
    online_eps: f64,
) -> Result<ZeroRecord> {
    check_tau(tau)?;
    tol.validate()?;
    let (rho, iters) = complex_newton(sec, tau, guess.to_c64(), tol)?;
    if (rho.re - 0.5).abs() <= online_eps {
        if let Some((t, it)) = real_newton(sec, tau, rho.im, f64::INFINITY, tol) {
            return Ok(ZeroRecord {
                location: ComplexPoint::on_line(t),
                on_line: true,
                residual: sec.eval(tau, C64::new(0.5, t))?.norm(),
                newton_iters: iters + it,
            });
        }
    }
    Ok(ZeroRecord {
        location: rho.into(),
        on_line: false,
        residual: sec.eval(tau, rho)?.norm(),
        newton_iters: iters,
    })
}

fn complex_newton(sec: &Section, tau: f64, mut s: C64, tol: &Tolerance) -> Result<(C64, usize)> {
    for it in 0..tol.max_iter {
        let (f, fp) = sec.eval_with_derivative(tau, s)?;
        if f.norm() == 0.0 {
            return Ok((s, it));
        }
        if fp.norm() == 0.0 {
            return Err(Error::DerivativeSingular {
                func: "refine_zero",
                sigma: s.re,
                t: s.im,
            });
        }
        let step = f / fp;
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            break;
        }
        if step.norm() <= tol.threshold(s.norm()).max(1e-14 * s.norm()) {
            return Ok((s, it + 1));
        }
    }
    Err(Error::NonConvergence {
        func: "refine_zero",
        iterations: tol.max_iter,
    })
}

/// Newton on `Z(τ, ·)` from `t0`, abandoning runs that wander further than
/// `limit`.
fn real_newton(sec: &Section, tau: f64, t0: f64, limit: f64, tol: &Tolerance) -> Option<(f64, usize)> {
    let mut t = t0;
    for it in 0..tol.max_iter.min(40) {
        let (z, dz) = sec.z_with_derivative(tau, t);
        if z == 0.0 {
            return Some((t, it));
        }
        if dz == 0.0 || !dz.is_finite() {
            return None;
        }
        let step = z / dz;
        t -= step;
        if !t.is_finite() || (t - t0).abs() > limit {
            return None;
        }
        if step.abs() <= 1e-13 * t.abs().max(1.0) {
            return Some((t, it + 1));
        }
    }
    None
}

/// Axis-aligned rectangle `[σ_lo, σ_hi] × [t_lo, t_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl BoxRegion {
    pub fn new(sigma_lo: f64, sigma_hi: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(sigma_hi > sigma_lo && t_hi > t_lo) {
            return Err(Error::Domain {
                func: "count_zeros_region",
                arg: t_lo,
                detail: "degenerate box",
            });
        }
        Ok(Self {
            sigma_lo,
            sigma_hi,
            t_lo,
            t_hi,
        })
    }

    pub fn split_t(&self, t_mid: f64) -> (Self, Self) {
        (
            Self { t_hi: t_mid, ..*self },
            Self { t_lo: t_mid, ..*self },
        )
    }

    pub fn split_sigma(&self, sigma_mid: f64) -> (Self, Self) {
        (
            Self { sigma_hi: sigma_mid, ..*self },
            Self { sigma_lo: sigma_mid, ..*self },
        )
    }
}

const MAX_DEPTH: usize = 40;

/// Number of zeros of `F_N + τ·(next)` inside `region`, by the argument
/// principle.
///
/// Each edge is sampled on a grid of a sixteenth of the mean zero gap and
/// bisected wherever consecutive phases differ by `π/2` or more. A sample
/// whose modulus is below `1e-10` of the largest boundary modulus is treated
/// as a zero on the contour.
pub fn count_zeros_region(sec: &Section, tau: f64, region: &BoxRegion) -> Result<usize> {
    check_tau(tau)?;
    let corners = [
        C64::new(region.sigma_lo, region.t_lo),
        C64::new(region.sigma_hi, region.t_lo),
        C64::new(region.sigma_hi, region.t_hi),
        C64::new(region.sigma_lo, region.t_hi),
    ];
    let grid = local_spacing(region.t_hi.abs().max(10.0)) / 16.0;
    let mut edges = Vec::with_capacity(4);
    let mut scale: f64 = 0.0;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let n = (((b - a).norm() / grid).ceil() as usize).max(8);
        let mut pts = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let s = a + (b - a) * (j as f64 / n as f64);
            let v = sec.eval(tau, s)?;
            scale = scale.max(v.norm());
            pts.push((s, v));
        }
        edges.push(pts);
    }
    let floor = 1e-10 * scale;
    let mut total = 0.0;
    for pts in &edges {
        for w in pts.windows(2) {
            total += phase_change(sec, tau, w[0], w[1], floor, 0)?;
        }
    }
    let winding = total / (2.0 * std::f64::consts::PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.1 || rounded < 0.0 {
        return Err(Error::PhaseStep);
    }
    Ok(rounded as usize)
}

fn phase_change(
    sec: &Section,
    tau: f64,
    a: (C64, C64),
    b: (C64, C64),
    floor: f64,
    depth: usize,
) -> Result<f64> {
    for (s, v) in [a, b] {
        if v.norm() <= floor {
            return Err(Error::BoundaryZero { sigma: s.re, t: s.im });
        }
    }
    let d = (b.1 / a.1).arg();
    if d.abs() < std::f64::consts::FRAC_PI_2 {
        return Ok(d);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::PhaseStep);
    }
    let ms = 0.5 * (a.0 + b.0);
    let m = (ms, sec.eval(tau, ms)?);
    Ok(phase_change(sec, tau, a, m, floor, depth + 1)? + phase_change(sec, tau, m, b, floor, depth + 1)?)
}

/// Which zeros take part in an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventScope {
    /// The two tracked zeros with each other.
    Pair,
    /// The lower tracked zero with the zero just below the pair.
    Lower,
    /// The upper tracked zero with the zero just above the pair.
    Upper,
}

/// A collision of one tracked zero with a zero outside the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalEvent {
    pub scope: EventScope,
    pub event: CollisionEvent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unit {
    /// Ordinate on the line; `d` is the sign of `Z'` there.
    Real { t: f64, d: f64 },
    /// Off the line together with the outside neighbour; `Z` has sign
    /// `s_gap` on the line near `Im ρ`.
    Ext { rho: C64, s_gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairState {
    Split { lo: Unit, hi: Unit },
    /// The tracked zeros are `ρ` and `1 - conj(ρ)`.
    Merged { rho: C64, s_gap: f64 },
}

struct Tracker<'a> {
    cfg: &'a TrackerConfig,
    scale: f64,
}

/// Result of probing the local extremum of `sign·Z` in a window.
#[derive(Debug, Clone, Copy)]
struct Probe {
    ends_negative: bool,
    t_max: f64,
    value: f64,
}

enum Couple {
    Exists(f64, f64),
    Departed { t_event: f64, t_location: f64, rho: C64, s_gap: f64 },
    Undecided,
}

enum Off {
    Stays(C64),
    Returned { t_event: f64, t_location: f64, lo: f64, hi: f64 },
    Undecided,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    scope: EventScope,
    kind: EventKind,
    t_event: f64,
    t_location: f64,
}

/// Steps at or below this size run the full event analysis.
const PROBE_STEP: f64 = 1.0 / 1024.0;

impl<'a> Tracker<'a> {
    fn collision_eps(&self) -> f64 {
        self.cfg.collision_eps_factor * self.scale
    }

    fn move_limit(&self) -> f64 {
        self.cfg.move_limit_factor * self.scale
    }

    fn probe(&self, sec: &Section, tau: f64, sign: f64, a: f64, b: f64) -> Probe {
        let f = |t: f64| sign * sec.z(tau, t);
        let ends_negative = f(a) < 0.0 && f(b) < 0.0;
        let (t_max, value) = maximize(f, a, b, 33, 1e-12 * b.abs().max(1.0));
        Probe {
            ends_negative,
            t_max,
            value,
        }
    }

    /// Two zeros on either side of the maximiser of `sign·Z` in `[a, b]`.
    fn split_roots(&self, sec: &Section, tau: f64, a: f64, t_max: f64, b: f64) -> Option<(f64, f64)> {
        let f = |t: f64| sec.z(tau, t);
        let lo = bracket_root(f, a, t_max, 1e-13 * t_max)?;
        let hi = bracket_root(f, t_max, b, 1e-13 * t_max)?;
        Some((lo, hi))
    }

    /// Bisects `τ` in `[good, bad]` where `pred(τ)` flips from true to false.
    fn bisect_event<P: Fn(f64) -> bool>(&self, mut good: f64, mut bad: f64, pred: P) -> f64 {
        for _ in 0..80 {
            if (bad - good).abs() <= self.cfg.event_tol {
                break;
            }
            let mid = 0.5 * (good + bad);
            if pred(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        0.5 * (good + bad)
    }

    /// Predictor and Newton corrector for one real ordinate.
    fn real_step(&self, sec: &Section, tau: f64, h: f64, t: f64, d: f64) -> Option<f64> {
        let limit = self.move_limit();
        let (_, dz) = sec.z_with_derivative(tau, t);
        let v = -sec.z_tau(t) / dz;
        if !((h * v).abs() <= limit) {
            return None;
        }
        let (x, _) = real_newton(sec, tau + h, t + h * v, limit, &self.cfg.tol)?;
        let (_, dx) = sec.z_with_derivative(tau + h, x);
        ((x - t).abs() <= limit && dx.signum() == d).then_some(x)
    }

    /// Follows the adjacent zeros `a < b`, between which `Z` has sign `s`,
    /// from `tau` to `tn`, or finds the moment they leave the line.
    fn couple(&self, sec: &Section, tau: f64, tn: f64, a: f64, b: f64, s: f64) -> Couple {
        let limit = self.move_limit();
        let gap = b - a;
        let w = gap.max(self.collision_eps());
        let (wa, wb) = (a - w, b + w);
        let p = self.probe(sec, tn, s, wa, wb);
        if !p.ends_negative {
            return Couple::Undecided;
        }
        if p.value > 0.0 {
            return match self.split_roots(sec, tn, wa, p.t_max, wb) {
                Some((x, y)) if (x - a).abs() <= limit && (y - b).abs() <= limit => Couple::Exists(x, y),
                _ => Couple::Undecided,
            };
        }
        let exists = |t: f64| self.probe(sec, t, s, wa, wb).value > 0.0;
        if !exists(tau) {
            return Couple::Undecided;
        }
        let t_event = self.bisect_event(tau, tn, exists);
        let at_event = self.probe(sec, t_event, s, wa, wb);
        // quadratic model s·Z ≈ v - c (t - t*)² puts the zeros at σ - ½ ≈ ±sqrt(-v/c)
        let d = (gap * 0.1).max(1e-6);
        let f = |t: f64| s * sec.z(tn, t);
        let curv = (2.0 * f(p.t_max) - f(p.t_max - d) - f(p.t_max + d)) / (2.0 * d * d);
        let offset = if curv > 0.0 { (-p.value / curv).sqrt() } else { 1e-3 };
        let seed = C64::new(0.5 + offset.max(1e-8), p.t_max);
        let rho = match complex_newton(sec, tn, seed, &self.cfg.tol) {
            Ok((r, _)) => mirror_right(r),
            Err(_) => return Couple::Undecided,
        };
        if (rho - seed).norm() > limit || rho.re <= 0.5 {
            return Couple::Undecided;
        }
        Couple::Departed {
            t_event,
            t_location: at_event.t_max,
            rho,
            s_gap: -s,
        }
    }

    /// Follows an off-line zero `ρ` (`Re ρ > ½`). With `events` set, also
    /// tests whether it has come back to the line.
    fn off(&self, sec: &Section, tau: f64, h: f64, rho: C64, s_gap: f64, events: bool) -> Off {
        let tn = tau + h;
        let limit = self.move_limit();
        let mut candidate = None;
        if let (Ok((_, fp)), Ok(ft)) = (sec.eval_with_derivative(tau, rho), sec.eval_tau(rho)) {
            if fp.norm() > 0.0 {
                let pred = rho - h * ft / fp;
                if (pred - rho).norm() <= limit {
                    if let Ok((r, _)) = complex_newton(sec, tn, pred, &self.cfg.tol) {
                        let r = mirror_right(r);
                        if (r - rho).norm() <= limit {
                            candidate = Some(r);
                        }
                    }
                }
            }
        }
        if let Some(r) = candidate {
            if r.re - 0.5 > self.cfg.online_eps.max(1e-3 * (rho.re - 0.5)) {
                return Off::Stays(r);
            }
        }
        if !events {
            return Off::Undecided;
        }
        let w = (4.0 * (rho.re - 0.5)).max(self.collision_eps());
        let (a, b) = (rho.im - w, rho.im + w);
        let p = self.probe(sec, tn, -s_gap, a, b);
        if !p.ends_negative {
            return Off::Undecided;
        }
        if p.value <= 0.0 {
            return match candidate {
                Some(r) if r.re > 0.5 => Off::Stays(r),
                _ => Off::Undecided,
            };
        }
        let apart = |t: f64| self.probe(sec, t, -s_gap, a, b).value <= 0.0;
        if !apart(tau) {
            return Off::Undecided;
        }
        let t_event = self.bisect_event(tau, tn, apart);
        let at_event = self.probe(sec, t_event, -s_gap, a, b);
        match self.split_roots(sec, tn, a, p.t_max, b) {
            Some((lo, hi)) => Off::Returned {
                t_event,
                t_location: at_event.t_max,
                lo,
                hi,
            },
            None => Off::Undecided,
        }
    }

    /// The nearest zero beyond `t` on the given side, within the move limit.
    fn outside_neighbour(&self, sec: &Section, tau: f64, t: f64, d: f64, above: bool) -> Option<f64> {
        let dt = self.collision_eps() / 8.0;
        let steps = (self.move_limit() / dt).ceil() as usize;
        let dir = if above { 1.0 } else { -1.0 };
        // sign of Z just beyond t on that side
        let beyond = if above { d } else { -d };
        let mut prev = t;
        for k in 1..=steps {
            let x = t + dir * dt * k as f64;
            let z = sec.z(tau, x);
            if z.signum() != beyond {
                let (a, b) = if above { (prev, x) } else { (x, prev) };
                return bracket_root(|u| sec.z(tau, u), a, b, 1e-13 * t);
            }
            prev = x;
        }
        None
    }

    /// Advances one tracked zero that is not merged with its partner. With
    /// `events` set, collisions with the outside neighbour are resolved.
    fn unit(&self, sec: &Section, tau: f64, h: f64, u: Unit, above: bool, events: bool) -> Option<(Unit, Option<Pending>)> {
        let scope = if above { EventScope::Upper } else { EventScope::Lower };
        match u {
            Unit::Real { t, d } => {
                if let Some(x) = self.real_step(sec, tau, h, t, d) {
                    return Some((Unit::Real { t: x, d }, None));
                }
                if !events {
                    return None;
                }
                let n = self.outside_neighbour(sec, tau, t, d, above)?;
                let (a, b, s) = if above { (t, n, d) } else { (n, t, -d) };
                match self.couple(sec, tau, tau + h, a, b, s) {
                    Couple::Exists(x, y) => Some((Unit::Real { t: if above { x } else { y }, d }, None)),
                    Couple::Departed { t_event, t_location, rho, s_gap } => Some((
                        Unit::Ext { rho, s_gap },
                        Some(Pending {
                            scope,
                            kind: EventKind::Departure,
                            t_event,
                            t_location,
                        }),
                    )),
                    Couple::Undecided => None,
                }
            }
            Unit::Ext { rho, s_gap } => match self.off(sec, tau, h, rho, s_gap, events) {
                Off::Stays(r) => Some((Unit::Ext { rho: r, s_gap }, None)),
                Off::Returned { t_event, t_location, lo, hi } => {
                    // the member is the returned zero nearer its partner
                    let (t, d) = if above { (lo, -s_gap) } else { (hi, s_gap) };
                    Some((
                        Unit::Real { t, d },
                        Some(Pending {
                            scope,
                            kind: EventKind::Return,
                            t_event,
                            t_location,
                        }),
                    ))
                }
                Off::Undecided => None,
            },
        }
    }

    fn step(&self, sec: &Section, tau: f64, h: f64, state: PairState) -> Option<(PairState, Vec<Pending>)> {
        let tn = tau + h;
        let eps = self.collision_eps();
        match state {
            PairState::Merged { rho, s_gap } => {
                let events = h <= PROBE_STEP || rho.re - 0.5 < eps;
                match self.off(sec, tau, h, rho, s_gap, events) {
                    Off::Stays(r) => Some((PairState::Merged { rho: r, s_gap }, Vec::new())),
                    Off::Returned { t_event, t_location, lo, hi } => Some((
                        PairState::Split {
                            lo: Unit::Real { t: lo, d: -s_gap },
                            hi: Unit::Real { t: hi, d: s_gap },
                        },
                        vec![Pending {
                            scope: EventScope::Pair,
                            kind: EventKind::Return,
                            t_event,
                            t_location,
                        }],
                    )),
                    Off::Undecided => None,
                }
            }
            PairState::Split { lo, hi } => {
                let internal = match (lo, hi) {
                    (Unit::Real { t: a, d }, Unit::Real { t: b, .. }) => Some((a, b, d)),
                    _ => None,
                };
                let near_line = |u: Unit| matches!(u, Unit::Ext { rho, .. } if rho.re - 0.5 < eps);
                let close = internal.is_some_and(|(a, b, _)| b - a < eps);
                let events = h <= PROBE_STEP || close || near_line(lo) || near_line(hi);
                if close {
                    let (a, b, d) = internal.expect("both real");
                    return match self.couple(sec, tau, tn, a, b, d) {
                        Couple::Exists(x, y) => Some((
                            PairState::Split {
                                lo: Unit::Real { t: x, d },
                                hi: Unit::Real { t: y, d: -d },
                            },
                            Vec::new(),
                        )),
                        Couple::Departed { t_event, t_location, rho, s_gap } => Some((
                            PairState::Merged { rho, s_gap },
                            vec![Pending {
                                scope: EventScope::Pair,
                                kind: EventKind::Departure,
                                t_event,
                                t_location,
                            }],
                        )),
                        Couple::Undecided => None,
                    };
                }
                let (nlo, elo) = self.unit(sec, tau, h, lo, false, events)?;
                let (nhi, ehi) = self.unit(sec, tau, h, hi, true, events)?;
                if let (Unit::Real { t: a, d }, Unit::Real { t: b, .. }) = (nlo, nhi) {
                    if !(a < b && d * sec.z(tn, 0.5 * (a + b)) > 0.0) {
                        return None;
                    }
                }
                Some((PairState::Split { lo: nlo, hi: nhi }, elo.into_iter().chain(ehi).collect()))
            }
        }
    }
}

fn mirror_right(r: C64) -> C64 {
    if r.re < 0.5 {
        C64::new(1.0 - r.re, r.im)
    } else {
        r
    }
}

/// What to track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRequest {
    /// Index of the lower zero; the pair is `(n, n + 1)`.
    pub n: usize,
    pub family: Family,
    /// Last section index.
    pub n_max: usize,
    /// Samples are emitted from this section on (tracking always starts at
    /// the first section of the family).
    pub n_emit_from: usize,
    pub rearrangement: Option<Rearrangement>,
}

impl TrackRequest {
    pub fn new(n: usize, family: Family, n_max: usize) -> Self {
        Self {
            n,
            family,
            n_max,
            n_emit_from: family.first_index(),
            rearrangement: None,
        }
    }

    pub fn with_rearrangement(mut self, r: Option<Rearrangement>) -> Self {
        self.rearrangement = r;
        self
    }
}

/// Tracks independent pairs through `exec`; results keep the input order.
pub fn track_pairs(reqs: &[TrackRequest], cfg: &TrackerConfig, exec: &crate::exec::Executor) -> Vec<Result<PairTrajectory>> {
    exec.map(reqs, |r| track_pair(r, cfg))
}

fn unit_record(sec: &Section, tau: f64, u: Unit) -> ZeroRecord {
    match u {
        Unit::Real { t, .. } => online_record(sec, tau, t),
        Unit::Ext { rho, .. } => ZeroRecord {
            location: rho.into(),
            on_line: false,
            residual: sec.eval(tau, rho).map(|v| v.norm()).unwrap_or(f64::NAN),
            newton_iters: 0,
        },
    }
}

fn sample_from_state(sec: &Section, n_terms: usize, tau: f64, state: &PairState) -> Sample {
    let (lo, hi) = match *state {
        PairState::Split { lo, hi } => (unit_record(sec, tau, lo), unit_record(sec, tau, hi)),
        PairState::Merged { rho, .. } => {
            let right = unit_record(sec, tau, Unit::Ext { rho, s_gap: 0.0 });
            let left = ZeroRecord {
                location: ComplexPoint::new(1.0 - rho.re, rho.im),
                ..right
            };
            (left, right)
        }
    };
    Sample {
        n_terms,
        t_param: tau,
        lo,
        hi,
        event: None,
    }
}

fn state_summary(state: &PairState) -> String {
    let unit = |u: Unit| match u {
        Unit::Real { t, .. } => format!("{t:.6}"),
        Unit::Ext { rho, .. } => format!("{:.6}+{:.6}i", rho.re, rho.im),
    };
    match *state {
        PairState::Split { lo, hi } => format!("step failed near {}, {}", unit(lo), unit(hi)),
        PairState::Merged { rho, .. } => format!("off-line step failed near {:.6}+{:.6}i", rho.re, rho.im),
    }
}

/// Tracks the pair `(n, n+1)` from the first section of the family to
/// `n_max`. Tracking problems end the run early with `loss` set rather than
/// failing, so the samples up to that point stay available.
pub fn track_pair(req: &TrackRequest, cfg: &TrackerConfig) -> Result<PairTrajectory> {
    cfg.validate()?;
    if req.n == 0 {
        return Err(Error::Index("zero indices start at 1".into()));
    }
    let first = req.family.first_index();
    if req.n_max < first {
        return Err(Error::InvalidSpec(format!("N_max must be at least {first}")));
    }
    let mut spec = SectionSpec::new(req.family, first)?;
    if let Some(r) = &req.rearrangement {
        spec = spec.with_rearrangement(r.clone())?;
        if spec.term_at(first) != first {
            return Err(Error::InvalidRearrangement(
                "the first term must stay in place".into(),
            ));
        }
    }
    let mut sec = Section::new(&spec)?;
    let lo0 = initial_zero(req.family, req.n)?;
    let hi0 = initial_zero(req.family, req.n + 1)?;
    let (_, dz) = sec.z_with_derivative(0.0, lo0);
    let tracker = Tracker {
        cfg,
        scale: hi0 - lo0,
    };
    let mut state = PairState::Split {
        lo: Unit::Real { t: lo0, d: dz.signum() },
        hi: Unit::Real { t: hi0, d: -dz.signum() },
    };
    let mut traj = PairTrajectory {
        pair: (req.n, req.n + 1),
        family: req.family,
        samples: Vec::new(),
        events: Vec::new(),
        external_events: Vec::new(),
        loss: None,
    };
    let mut n_terms = first;
    loop {
        let emit = n_terms >= req.n_emit_from;
        if emit {
            traj.samples.push(sample_from_state(&sec, n_terms, 0.0, &state));
        }
        if n_terms >= req.n_max {
            break;
        }
        let mut tau = 0.0;
        let mut h = cfg.initial_step;
        while tau < 1.0 {
            h = h.min(1.0 - tau);
            let tn = if h >= 1.0 - tau { 1.0 } else { tau + h };
            let Some((next, pending)) = tracker.step(&sec, tau, tn - tau, state) else {
                h *= 0.5;
                if h < cfg.min_step {
                    traj.loss = Some(TrackingLoss {
                        n_terms,
                        t_param: tau,
                        reason: state_summary(&state),
                    });
                    return Ok(traj);
                }
                continue;
            };
            let mut pending = pending;
            pending.sort_by(|a, b| a.t_event.total_cmp(&b.t_event));
            for p in pending {
                let event = CollisionEvent {
                    n_terms,
                    t_param: p.t_event,
                    location: ComplexPoint::on_line(p.t_location),
                    kind: p.kind,
                };
                if p.scope == EventScope::Pair {
                    traj.events.push(event);
                    if emit {
                        let rec = online_record(&sec, p.t_event, p.t_location);
                        traj.samples.push(Sample {
                            n_terms,
                            t_param: p.t_event,
                            lo: rec,
                            hi: rec,
                            event: Some(p.kind),
                        });
                    }
                } else {
                    traj.external_events.push(ExternalEvent { scope: p.scope, event });
                }
            }
            state = next;
            tau = tn;
            h = (2.0 * h).min(cfg.initial_step);
            if emit && tau < 1.0 {
                traj.samples.push(sample_from_state(&sec, n_terms, tau, &state));
            }
        }
        sec.advance();
        n_terms += 1;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepClass {
    Attracting,
    Repelling,
    Neutral,
}

/// Compares the gap at sections `N` and `N + 1`: growth is repelling,
/// shrinkage attracting, equality within `1e-12` neutral.
pub fn classify_step(traj: &PairTrajectory, n_terms: usize) -> Result<StepClass> {
    let find = |n: usize| traj.section_samples().find(|s| s.n_terms == n).copied();
    let (a, b) = match (find(n_terms), find(n_terms + 1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Index(format!("sections {n_terms}, {} not sampled", n_terms + 1))),
    };
    if !(a.lo.on_line && a.hi.on_line && b.lo.on_line && b.hi.on_line) {
        return Err(Error::Index(format!("step {n_terms} lies in an off-line span")));
    }
    Ok(classify_gaps(a.hi.location.t - a.lo.location.t, b.hi.location.t - b.lo.location.t))
}

pub fn classify_gaps(before: f64, after: f64) -> StepClass {
    let (g0, g1) = (before.abs(), after.abs());
    if (g1 - g0).abs() <= 1e-12 {
        StepClass::Neutral
    } else if g1 > g0 {
        StepClass::Repelling
    } else {
        StepClass::Attracting
    }
}

/// Fluctuation windows long enough to host collisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionWindows {
    pub chaotic_boundary: usize,
    pub intervals: Vec<FluctuationInterval>,
}

/// Classical windows `[t/(2(M+1)π)], [t/(2Mπ)]` with at least `min_len`
/// integers; the chaotic boundary is `[t/(2 M_0 π)]` for the largest such `M_0`.
pub fn collision_intervals(t: f64, min_len: usize) -> Result<CollisionWindows> {
    collision_intervals_for(Family::Classical, t, min_len)
}

/// As [`collision_intervals`] with the family's own resonance spacing
/// (`π` for accelerated sections, `π/5` for DH).
pub fn collision_intervals_for(family: Family, t: f64, min_len: usize) -> Result<CollisionWindows> {
    let scale = family.resonance_scale();
    let m_max = ((t / scale).floor() as usize).max(1);
    let all = fluctuation_intervals_for(family, t, m_max)?;
    let intervals: Vec<FluctuationInterval> =
        all.into_iter().filter(|iv| iv.len() >= min_len.max(1)).collect();
    let chaotic_boundary = intervals
        .iter()
        .map(|iv| iv.m)
        .max()
        .map(|m0| (t / (m0 as f64 * scale)).floor() as usize)
        .unwrap_or(0);
    Ok(CollisionWindows {
        chaotic_boundary,
        intervals,
    })
}

pub const TRAJECTORY_HEADER: &str = "pair_lo,pair_hi,family,N,t_param,sigma_lo,t_lo,sigma_hi,t_hi,on_line,event";

pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &PairTrajectory, command: &str) -> Result<()> {
    writeln!(out, "# {command}")?;
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    write_trajectory_rows(&mut out, traj)
}

pub fn write_trajectory_rows<W: Write>(out: &mut W, traj: &PairTrajectory) -> Result<()> {
    for s in &traj.samples {
        writeln!(
            out,
            "{},{},{},{},{:.12},{:.12},{:.12},{:.12},{:.12},{},{}",
            traj.pair.0,
            traj.pair.1,
            traj.family,
            s.n_terms,
            s.t_param,
            s.lo.location.sigma,
            s.lo.location.t,
            s.hi.location.sigma,
            s.hi.location.t,
            s.lo.on_line && s.hi.on_line,
            s.event.map(EventKind::as_str).unwrap_or("")
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub pair: (usize, usize),
    pub family: Family,
    pub events: Vec<EventRow>,
    pub external_events: Vec<ExternalRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<TrackingLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub t_param: f64,
    pub sigma: f64,
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalRow {
    pub scope: EventScope,
    #[serde(flatten)]
    pub row: EventRow,
}

fn event_row(e: &CollisionEvent) -> EventRow {
    EventRow {
        n_terms: e.n_terms,
        t_param: e.t_param,
        sigma: e.location.sigma,
        t: e.location.t,
        kind: e.kind,
    }
}

pub fn event_summary(traj: &PairTrajectory) -> EventSummary {
    EventSummary {
        pair: traj.pair,
        family: traj.family,
        events: traj.events.iter().map(event_row).collect(),
        external_events: traj
            .external_events
            .iter()
            .map(|e| ExternalRow {
                scope: e.scope,
                row: event_row(&e.event),
            })
            .collect(),
        loss: traj.loss.clone(),
    }
}
