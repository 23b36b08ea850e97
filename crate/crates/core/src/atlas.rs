//! Closed-form zero predictions: zeros of `1 + χ`, of single terms `B_k`,
//! Gram points, and the checks built on them.

use std::f64::consts::{E, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::bracket_root;
use crate::sections::{Family, Section, SectionSpec};
use crate::special::{
    hardy_z, lambert_w, rs_theta, rs_theta_derivative, LambertBranch, ZetaReference,
};

/// Predicted zero of the `k`-th term (`k = 1` is `1 + χ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasZero {
    pub k: usize,
    pub m: i64,
    pub t_predicted: f64,
}

/// `t_n^0 = (8n - 11)π / (4 W_0((8n - 11)/(8e)))`.
pub fn fl_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Index("fl_zero indices start at 1".into()));
    }
    let a = 8.0 * n as f64 - 11.0;
    let w = lambert_w(LambertBranch::Principal, a / (8.0 * E))?;
    Ok(a * PI / (4.0 * w))
}

/// Residual of `(t/2π) ln(t/(2πe)) = n - 11/8`.
pub fn fl_residual(n: usize, t: f64) -> f64 {
    let x = t / (2.0 * PI);
    x * (x.ln() - 1.0) - (n as f64 - 11.0 / 8.0)
}

/// Which Lambert branch produced a term zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Lower,
    Principal,
}

/// Zero `t_m^k` of `B_k` on the critical line together with the branch used.
pub fn bk_zero_with_branch(k: usize, m: usize) -> Result<(f64, Branch)> {
    if k == 0 || m == 0 {
        return Err(Error::Index("bk_zero needs k, m >= 1".into()));
    }
    let k2 = (k * k) as f64;
    let m_f = m as f64;
    if m <= k * k {
        let a = 5.0 - 8.0 * m_f;
        let w = lambert_w(LambertBranch::Lower, a / (8.0 * k2 * E))?;
        Ok((a * PI / (4.0 * w), Branch::Lower))
    } else {
        let a = 8.0 * (m_f - 2.0 * k2) - 3.0;
        let w = lambert_w(LambertBranch::Principal, a / (8.0 * k2 * E))?;
        Ok((a * PI / (4.0 * w), Branch::Principal))
    }
}

pub fn bk_zero(k: usize, m: usize) -> Result<f64> {
    bk_zero_with_branch(k, m).map(|(t, _)| t)
}

/// Lambert-free ladder `T̃_j^k = (8N + 8πj - 11π) / (4(ln N - ln(πk²)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltZero {
    pub t: f64,
    pub j_lo: f64,
    pub j_hi: f64,
    /// False when `j` lies outside `[j_lo, j_hi]`; a warning, not an error.
    pub in_window: bool,
}

pub fn bk_zero_alt(k: usize, n: usize, j: i64) -> Result<AltZero> {
    let l = (n as f64).ln() - (PI * (k * k) as f64).ln();
    if k == 0 || !(l > 0.0) {
        return Err(Error::Domain {
            func: "bk_zero_alt",
            arg: n as f64,
            detail: "requires N > πk²",
        });
    }
    let n_f = n as f64;
    let t = (8.0 * n_f + 8.0 * PI * j as f64 - 11.0 * PI) / (4.0 * l);
    let j_lo = n_f / PI * (l - 1.0) + 11.0 / 8.0;
    let j_hi = j_lo + l / PI;
    let jf = j as f64;
    Ok(AltZero {
        t,
        j_lo,
        j_hi,
        in_window: jf >= j_lo && jf <= j_hi,
    })
}

/// `|2π / (ln N - ln(πk²))|`.
pub fn spacing(n: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::Index("spacing needs N, k >= 1".into()));
    }
    let d = (n as f64).ln() - (PI * (k * k) as f64).ln();
    if d == 0.0 {
        return Err(Error::Domain {
            func: "spacing",
            arg: n as f64,
            detail: "N = πk²",
        });
    }
    Ok((2.0 * PI / d).abs())
}

/// Mean gap between zeros of ζ near height `t`: `2π / ln(t/2π)`.
pub fn local_spacing(t: f64) -> f64 {
    2.0 * PI / (t / (2.0 * PI)).ln().max(0.5)
}

/// Seed `(8n+1)π / (4 W_0((8n+1)/(8e)))` for the `n`-th Gram point.
pub fn gram_seed(n: usize) -> Result<f64> {
    let a = 8.0 * n as f64 + 1.0;
    Ok(a * PI / (4.0 * lambert_w(LambertBranch::Principal, a / (8.0 * E))?))
}

/// Solves `θ(t) = target` for `t > 7` (where θ is increasing) from `seed`.
fn solve_theta<T: Fn(f64) -> f64, D: Fn(f64) -> f64>(
    theta: T,
    dtheta: D,
    target: f64,
    seed: f64,
    func: &'static str,
) -> Result<f64> {
    let mut t = seed.max(7.0);
    for _ in 0..50 {
        let f = theta(t) - target;
        let step = f / dtheta(t);
        let next = (t - step).max(7.0);
        if (next - t).abs() <= 1e-13 * t {
            return Ok(next);
        }
        t = next;
    }
    // fall back to a bracket around the Newton iterate
    let mut lo = (t - 1.0).max(7.0);
    let mut hi = t + 1.0;
    while theta(lo) > target {
        lo = (lo - 2.0).max(7.0);
        if lo == 7.0 {
            break;
        }
    }
    while theta(hi) < target {
        hi += 2.0;
    }
    bracket_root(|x| theta(x) - target, lo, hi, 1e-12).ok_or(Error::NonConvergence {
        func,
        iterations: 50,
    })
}

/// Gram point `g_n`: `θ(g_n) = πn`, refined from [`gram_seed`].
pub fn gram_point(n: usize) -> Result<f64> {
    solve_theta(
        |t| rs_theta(t).unwrap_or(f64::NAN),
        rs_theta_derivative,
        PI * n as f64,
        gram_seed(n)?,
        "gram_point",
    )
}

/// Ordinate of the `n`-th zero of `½(1 + χ)`: `θ(t) = π(n - 3/2)`.
/// The index matches [`fl_zero`] and the usual numbering of ζ zeros.
pub fn zeta1_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Index("zero indices start at 1".into()));
    }
    solve_theta(
        |t| rs_theta(t).unwrap_or(f64::NAN),
        rs_theta_derivative,
        PI * (n as f64 - 1.5),
        fl_zero(n)?,
        "zeta1_zero",
    )
}

/// Ordinate of the `n`-th zero of the DH section `ξ̃_0`: `θ_DH(t) = π(n - ½)`.
pub fn dh0_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Index("zero indices start at 1".into()));
    }
    solve_theta(
        crate::dh::theta_dh,
        crate::dh::theta_dh_derivative,
        PI * (n as f64 - 0.5),
        crate::dh::dh_zero(n)?,
        "dh0_zero",
    )
}

/// Exact initial zero of a family's first section.
pub fn initial_zero(family: Family, n: usize) -> Result<f64> {
    match family {
        Family::Classical | Family::Accelerated => zeta1_zero(n),
        Family::Dh => dh0_zero(n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramCheck {
    pub n: usize,
    pub gram_point: f64,
    /// `(-1)^n Z(g_n)`
    pub value: f64,
    pub holds: bool,
}

/// Gram's law `(-1)^n Z(g_n) > 0` with `Z` from the reference zeta.
pub fn gram_law_check(n: usize) -> Result<GramCheck> {
    let g = gram_point(n)?;
    let z = hardy_z(g, &ZetaReference::default())?;
    let value = if n.is_multiple_of(2) { z } else { -z };
    Ok(GramCheck {
        n,
        gram_point: g,
        value,
        holds: value > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterlaceReport {
    pub n_lo: usize,
    pub n_hi: usize,
    /// Position in the merged ladder of the first violation.
    pub first_violation: Option<usize>,
}

impl InterlaceReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks strict alternation of two sorted ladders; returns the position in
/// the merged sequence where two entries of the same ladder are adjacent.
pub fn check_alternation(zeros: &[f64], grams: &[f64]) -> Option<usize> {
    let mut merged: Vec<(f64, u8)> = zeros
        .iter()
        .map(|&t| (t, 0))
        .chain(grams.iter().map(|&t| (t, 1)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    merged.windows(2).position(|w| w[0].1 == w[1].1 || w[0].0 == w[1].0)
}

/// Refines the zero of `ζ_1` near `fl_zero(n)` by a sign change of its
/// rotated value.
pub fn refine_zeta1_zero(n: usize) -> Result<f64> {
    let sec = Section::new(&SectionSpec::new(Family::Classical, 1)?)?;
    let guess = fl_zero(n)?;
    let half = 0.45 * local_spacing(guess.max(10.0)).min(guess / 4.0);
    let f = |t: f64| sec.z(0.0, t);
    let (mut a, mut b) = (guess - half, guess + half);
    for _ in 0..4 {
        if f(a).signum() != f(b).signum() {
            break;
        }
        a -= half / 2.0;
        b += half / 2.0;
    }
    bracket_root(f, a, b, 1e-12).ok_or(Error::NonConvergence {
        func: "refine_zeta1_zero",
        iterations: 4,
    })
}

/// Interlacing of refined `ζ_1` zeros with Gram points over `n_lo..=n_hi`.
pub fn interlace_check(n_lo: usize, n_hi: usize) -> Result<InterlaceReport> {
    if n_hi < n_lo {
        return Err(Error::Index("empty interlace range".into()));
    }
    let zeros: Vec<f64> = (n_lo..=n_hi).map(refine_zeta1_zero).collect::<Result<_>>()?;
    // zero n sits between g_{n-2} and g_{n-1}
    let first_gram = n_lo.saturating_sub(2);
    let grams: Vec<f64> = (first_gram..first_gram + zeros.len())
        .map(gram_point)
        .collect::<Result<_>>()?;
    Ok(InterlaceReport {
        n_lo,
        n_hi,
        first_violation: check_alternation(&zeros, &grams),
    })
}

/// Maps each atlas ordinate to the index of the nearest tracked ordinate.
pub fn align_indices(atlas: &[f64], tracked: &[f64]) -> Vec<Option<usize>> {
    atlas
        .iter()
        .map(|&a| {
            tracked
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - a).abs().total_cmp(&(y.1 - a).abs()))
                .map(|(i, _)| i)
        })
        .collect()
}

/// One row of a ladder export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub family: LadderFamily,
    pub k: usize,
    pub index: i64,
    pub t_predicted: f64,
    pub t_refined: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderFamily {
    Fl,
    Bk,
    Gram,
    Dh,
}

impl LadderFamily {
    fn as_str(self) -> &'static str {
        match self {
            LadderFamily::Fl => "fl",
            LadderFamily::Bk => "bk",
            LadderFamily::Gram => "gram",
            LadderFamily::Dh => "dh",
        }
    }
}

/// Ladder rows for indices `lo..=hi`.
pub fn ladder(family: LadderFamily, k: usize, lo: usize, hi: usize) -> Result<Vec<LadderRow>> {
    let mut rows = Vec::new();
    for n in lo..=hi {
        let row = match family {
            LadderFamily::Fl => {
                let p = fl_zero(n)?;
                let r = refine_zeta1_zero(n)?;
                LadderRow { family, k: 1, index: n as i64, t_predicted: p, t_refined: r, residual: fl_residual(n, p) }
            }
            LadderFamily::Bk => {
                let p = bk_zero(k, n)?;
                let r = refine_bk_zero(k, p)?;
                LadderRow { family, k, index: n as i64, t_predicted: p, t_refined: r, residual: r - p }
            }
            LadderFamily::Gram => {
                let p = gram_seed(n)?;
                let r = gram_point(n)?;
                let res = rs_theta(r)? - PI * n as f64;
                LadderRow { family, k: 0, index: n as i64, t_predicted: p, t_refined: r, residual: res }
            }
            LadderFamily::Dh => {
                let p = crate::dh::dh_zero(n)?;
                let r = dh0_zero(n)?;
                LadderRow { family, k: 0, index: n as i64, t_predicted: p, t_refined: r, residual: r - p }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Zero of the rotated `B_k` nearest to `guess`: `θ(t) - t ln k = π(j + ½)`.
pub fn refine_bk_zero(k: usize, guess: f64) -> Result<f64> {
    let ln_k = (k as f64).ln();
    let phase = |t: f64| rs_theta(t).unwrap_or(f64::NAN) - t * ln_k;
    let j = (phase(guess) / PI - 0.5).round();
    let target = PI * (j + 0.5);
    let d = |t: f64| rs_theta_derivative(t) - ln_k;
    let mut t = guess;
    for _ in 0..60 {
        let step = (phase(t) - target) / d(t);
        t -= step;
        if step.abs() <= 1e-12 * t.abs().max(1.0) {
            return Ok(t);
        }
    }
    Err(Error::NonConvergence {
        func: "refine_bk_zero",
        iterations: 60,
    })
}

pub fn write_ladder_csv<W: Write>(mut out: W, rows: &[LadderRow], command: &str) -> Result<()> {
    writeln!(out, "# {command}")?;
    writeln!(out, "family,k,index,t_predicted,t_refined,residual")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.12},{:.12},{:.6e}",
            r.family.as_str(),
            r.k,
            r.index,
            r.t_predicted,
            r.t_refined,
            r.residual
        )?;
    }
    Ok(())
}
