//! Sections of the approximate functional equation.
//!
//! Every family is a sum of symmetrised terms `½[A_n(s) + χ_f(s) A_n(1-s)]`
//! where `A_n` is a finite Dirichlet polynomial:
//!
//! * classical: `A_n(s) = n^{-s}`, `n >= 1`;
//! * accelerated: `Ã(s, n) = 2^{-(n+1)} Σ_k C(n,k) (k+1)^{-s}`, `n >= 0`;
//! * Davenport-Heilbronn: the accelerated term with 5-periodic real
//!   coefficients and its own χ (see [`crate::dh`]).
//!
//! A section is therefore `½[D(s) + χ_f(s) D(1-s)]` with `D(s) = Σ_m c_m m^{-s}`
//! and [`Section`] keeps exactly those coefficients. That form is what the
//! tracker evaluates; [`section_eval`] sums term by term and serves as the
//! slow cross-check.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    self, chi_c, chi_log_derivative_c, exp_checked, log_gamma_c, ComplexPoint, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Classical,
    Accelerated,
    Dh,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Classical => "classical",
            Family::Accelerated => "accelerated",
            Family::Dh => "dh",
        }
    }

    /// Index of the first term.
    pub fn first_index(self) -> usize {
        match self {
            Family::Classical => 1,
            Family::Accelerated | Family::Dh => 0,
        }
    }

    /// Rotation angle making the section real on the critical line.
    pub fn theta(self, t: f64) -> f64 {
        match self {
            Family::Classical | Family::Accelerated => special::rs_theta_unchecked(t),
            Family::Dh => crate::dh::theta_dh(t),
        }
    }

    pub fn theta_derivative(self, t: f64) -> f64 {
        match self {
            Family::Classical | Family::Accelerated => special::rs_theta_derivative(t),
            Family::Dh => crate::dh::theta_dh_derivative(t),
        }
    }

    /// The factor `χ_f` in `F(s) = χ_f(s) F(1-s)`.
    pub fn chi(self, s: C64) -> Result<C64> {
        match self {
            Family::Classical | Family::Accelerated => chi_c(s),
            Family::Dh => crate::dh::chi_dh(s),
        }
    }

    /// `χ_f'(s) / χ_f(s)`.
    pub fn chi_log_derivative(self, s: C64) -> Result<C64> {
        match self {
            Family::Classical | Family::Accelerated => chi_log_derivative_c(s),
            Family::Dh => crate::dh::chi_dh_log_derivative(s),
        }
    }

    /// Dirichlet coefficient multiplying `m^{-s}` before any weighting.
    pub fn coefficient(self, m: usize) -> f64 {
        match self {
            Family::Classical | Family::Accelerated => 1.0,
            Family::Dh => crate::dh::dh_coefficient(m),
        }
    }

    /// `t / N` ratio at which the `M`-th resonance sits is `scale * M`.
    pub fn resonance_scale(self) -> f64 {
        match self {
            Family::Classical => 2.0 * PI,
            Family::Accelerated => PI,
            Family::Dh => PI / 5.0,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" | "zeta" => Ok(Family::Classical),
            "accelerated" | "acc" => Ok(Family::Accelerated),
            "dh" => Ok(Family::Dh),
            other => Err(Error::InvalidSpec(format!("unknown family '{other}'"))),
        }
    }
}

/// How one piece of a [`Rearrangement`] maps its indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PieceKind {
    Identity,
    /// `n ↦ c - n`
    Reflect { c: i64 },
    /// `n ↦ n + c`
    Shift { c: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub kind: PieceKind,
}

impl Piece {
    fn map(&self, n: usize) -> i64 {
        let n = n as i64;
        match self.kind {
            PieceKind::Identity => n,
            PieceKind::Reflect { c } => c - n,
            PieceKind::Shift { c } => n + c,
        }
    }
}

/// A permutation of term indices, identity outside `domain`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rearrangement {
    domain: (usize, usize),
    pieces: Vec<Piece>,
    #[serde(skip)]
    table: Vec<usize>,
}

#[derive(Deserialize)]
struct RawRearrangement {
    domain: (usize, usize),
    pieces: Vec<Piece>,
}

impl<'de> Deserialize<'de> for Rearrangement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawRearrangement::deserialize(d)?;
        Rearrangement::new(raw.domain, raw.pieces).map_err(serde::de::Error::custom)
    }
}

impl Rearrangement {
    /// Builds and checks that the pieces tile the domain and induce a
    /// bijection of it.
    pub fn new(domain: (usize, usize), mut pieces: Vec<Piece>) -> Result<Self> {
        let (lo, hi) = domain;
        if lo > hi {
            return Err(Error::InvalidRearrangement(format!(
                "empty domain [{lo}, {hi}]"
            )));
        }
        pieces.sort_by_key(|p| p.from);
        let mut next = lo;
        for p in &pieces {
            if p.from > p.to {
                return Err(Error::InvalidRearrangement(format!(
                    "piece [{}, {}] is reversed",
                    p.from, p.to
                )));
            }
            if p.from != next {
                return Err(Error::InvalidRearrangement(format!(
                    "pieces do not tile the domain at {next}"
                )));
            }
            next = p.to + 1;
        }
        if next != hi + 1 {
            return Err(Error::InvalidRearrangement(format!(
                "pieces end at {} but the domain ends at {hi}",
                next.saturating_sub(1)
            )));
        }
        let mut table = Vec::with_capacity(hi - lo + 1);
        let mut seen = vec![false; hi - lo + 1];
        for p in &pieces {
            for n in p.from..=p.to {
                let image = p.map(n);
                if image < lo as i64 || image > hi as i64 {
                    return Err(Error::InvalidRearrangement(format!(
                        "{n} maps to {image}, outside [{lo}, {hi}]"
                    )));
                }
                let slot = image as usize - lo;
                if seen[slot] {
                    return Err(Error::InvalidRearrangement(format!(
                        "{image} is hit twice"
                    )));
                }
                seen[slot] = true;
                table.push(image as usize);
            }
        }
        Ok(Self {
            domain,
            pieces,
            table,
        })
    }

    /// A rearrangement given by an explicit image table over `start..`.
    pub fn from_table(start: usize, images: &[usize]) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidRearrangement("empty table".into()));
        }
        let hi = start + images.len() - 1;
        let pieces = images
            .iter()
            .enumerate()
            .map(|(i, &img)| Piece {
                from: start + i,
                to: start + i,
                kind: PieceKind::Shift {
                    c: img as i64 - (start + i) as i64,
                },
            })
            .collect();
        Self::new((start, hi), pieces)
    }

    pub fn identity(domain: (usize, usize)) -> Result<Self> {
        Self::new(
            domain,
            vec![Piece {
                from: domain.0,
                to: domain.1,
                kind: PieceKind::Identity,
            }],
        )
    }

    pub fn domain(&self) -> (usize, usize) {
        self.domain
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn apply(&self, n: usize) -> usize {
        let (lo, hi) = self.domain;
        if n < lo || n > hi {
            n
        } else {
            self.table[n - lo]
        }
    }

    /// `self ∘ self`; used to check involutions.
    pub fn compose(&self, other: &Rearrangement) -> Result<Rearrangement> {
        let lo = self.domain.0.min(other.domain.0);
        let hi = self.domain.1.max(other.domain.1);
        let images: Vec<usize> = (lo..=hi).map(|n| self.apply(other.apply(n))).collect();
        Rearrangement::from_table(lo, &images)
    }

    pub fn is_identity(&self) -> bool {
        let lo = self.domain.0;
        self.table.iter().enumerate().all(|(i, &v)| v == lo + i)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// A stable short hash for keying reports.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the image table
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in std::iter::once(self.domain.0).chain(self.table.iter().copied()) {
            for b in (v as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Which section to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub family: Family,
    pub n_terms: usize,
    #[serde(default)]
    pub rearrangement: Option<Rearrangement>,
}

impl SectionSpec {
    pub fn new(family: Family, n_terms: usize) -> Result<Self> {
        let spec = Self {
            family,
            n_terms,
            rearrangement: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rearrangement(mut self, r: Rearrangement) -> Result<Self> {
        self.rearrangement = Some(r);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms < self.family.first_index() {
            return Err(Error::InvalidSpec(format!(
                "{} sections need N >= {}",
                self.family,
                self.family.first_index()
            )));
        }
        if let Some(r) = &self.rearrangement {
            if r.domain().0 < self.family.first_index() {
                return Err(Error::InvalidSpec(format!(
                    "rearrangement domain starts at {} below the first term index",
                    r.domain().0
                )));
            }
        }
        Ok(())
    }

    /// Term index added at summation step `n`.
    pub fn term_at(&self, step: usize) -> usize {
        match &self.rearrangement {
            Some(r) => r.apply(step),
            None => step,
        }
    }

    /// Term indices of the section, in summation order.
    pub fn order(&self) -> impl Iterator<Item = usize> + '_ {
        (self.family.first_index()..=self.n_terms).map(|n| self.term_at(n))
    }
}

/// `C(n,k) / 2^{n+1}` for `k = 0..=n`.
///
/// Uses the multiplicative recurrence `w_{k+1} = w_k (n-k)/(k+1)`. The start
/// `2^{-(n+1)}` is exact while it is a normal double; beyond that the walk
/// starts at the central coefficient (computed in log space) and goes
/// outward, so only genuinely negligible tails underflow.
pub fn binomial_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n <= 1000 {
        w[0] = 0.5f64.powi(n as i32 + 1);
        for k in 0..n {
            w[k + 1] = w[k] * (n - k) as f64 / (k + 1) as f64;
        }
        return w;
    }
    let mid = n / 2;
    let ln_mid = ln_factorial(n) - ln_factorial(mid) - ln_factorial(n - mid) - (n as f64 + 1.0) * LN_2;
    w[mid] = ln_mid.exp();
    for k in mid..n {
        w[k + 1] = w[k] * (n - k) as f64 / (k + 1) as f64;
    }
    for k in (1..=mid).rev() {
        w[k - 1] = w[k] * k as f64 / (n - k + 1) as f64;
    }
    w
}

fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    log_gamma_c(C64::new(n as f64 + 1.0, 0.0))
        .expect("positive argument")
        .re
}

fn check_point(s: C64) -> Result<()> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::Domain {
            func: "section",
            arg: s.re,
            detail: "non-finite point",
        });
    }
    Ok(())
}

/// `m^{-s}` for real `m >= 1`, via its logarithm.
#[inline]
fn pow_neg(ln_m: f64, s: C64) -> C64 {
    (-s * ln_m).exp()
}

/// Classical term `B_n(s) = ½[n^{-s} + χ(s) n^{s-1}]`.
pub fn b_term(n: usize, s: ComplexPoint) -> Result<C64> {
    if n == 0 {
        return Err(Error::Index("classical terms start at n = 1".into()));
    }
    let s = s.to_c64();
    check_point(s)?;
    let chi = chi_c(s)?;
    let ln_n = (n as f64).ln();
    Ok(0.5 * (pow_neg(ln_n, s) + chi * pow_neg(ln_n, 1.0 - s)))
}

/// Euler-transformed term `Ã(s, n)`.
pub fn accel_a_term(n: usize, s: ComplexPoint) -> C64 {
    accel_a_term_c(n, s.to_c64())
}

fn accel_a_term_c(n: usize, s: C64) -> C64 {
    let w = binomial_weights(n);
    let mut acc = C64::new(0.0, 0.0);
    for (k, &wk) in w.iter().enumerate() {
        if wk != 0.0 {
            acc += wk * pow_neg(((k + 1) as f64).ln(), s);
        }
    }
    acc
}

/// `ã(k, N) = Σ_{n=k}^{N} C(n,k) / 2^{n+1}`, the total weight that the
/// accelerated section `N` puts on `(k+1)^{-s}`.
pub fn weight(k: usize, n_max: usize) -> Result<f64> {
    if k > n_max {
        return Err(Error::Index(format!("weight: k = {k} exceeds N = {n_max}")));
    }
    // log of C(n,k)/2^{n+1}, advanced by (n+1)/(2(n+1-k)) per step
    let mut ln_term = -(k as f64 + 1.0) * LN_2;
    let mut acc = 0.0;
    for n in k..=n_max {
        acc += ln_term.exp();
        ln_term += ((n + 1) as f64).ln() - LN_2 - ((n + 1 - k) as f64).ln();
    }
    Ok(acc)
}

/// Accelerated term `B̃_n(s) = ½[Ã(s,n) + χ(s) Ã(1-s,n)]`.
pub fn accel_b_term(n: usize, s: ComplexPoint) -> Result<C64> {
    let s = s.to_c64();
    check_point(s)?;
    let chi = chi_c(s)?;
    Ok(0.5 * (accel_a_term_c(n, s) + chi * accel_a_term_c(n, 1.0 - s)))
}

/// Raw polynomial `A_n(s)` of a family (before symmetrisation).
fn raw_term(family: Family, n: usize, s: C64) -> C64 {
    match family {
        Family::Classical => pow_neg((n as f64).ln(), s),
        Family::Accelerated => accel_a_term_c(n, s),
        Family::Dh => crate::dh::dh_a_term_c(n, s),
    }
}

/// Term-by-term evaluation of a section in its summation order.
///
/// For the DH family this returns the completed `ξ̃_N(s)`.
pub fn section_eval(spec: &SectionSpec, s: ComplexPoint) -> Result<C64> {
    spec.validate()?;
    let s = s.to_c64();
    check_point(s)?;
    let chi = spec.family.chi(s)?;
    let mut acc = C64::new(0.0, 0.0);
    for n in spec.order() {
        acc += 0.5 * (raw_term(spec.family, n, s) + chi * raw_term(spec.family, n, 1.0 - s));
    }
    if spec.family == Family::Dh {
        acc *= exp_checked("dh_xi_section", crate::dh::log_completion(s)?)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawFamily {
    ClassicalRaw,
    AcceleratedRaw,
}

/// Plain partial sums `S_N = Σ_{n=1}^{N} n^{-s}` or `S̃_N = Σ_{n=0}^{N} Ã(s,n)`.
pub fn partial_sum(family: RawFamily, n_max: usize, s: ComplexPoint) -> Result<C64> {
    let s = s.to_c64();
    check_point(s)?;
    match family {
        RawFamily::ClassicalRaw => {
            if n_max == 0 {
                return Err(Error::Index("S_N needs N >= 1".into()));
            }
            Ok((1..=n_max).map(|n| pow_neg((n as f64).ln(), s)).sum())
        }
        RawFamily::AcceleratedRaw => {
            // Σ_n Ã(s,n) = Σ_k ã(k,N) (k+1)^{-s}
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..=n_max {
                acc += weight(k, n_max)? * pow_neg(((k + 1) as f64).ln(), s);
            }
            Ok(acc)
        }
    }
}

/// All running partial sums `S_1..S_N` (or `S̃_0..S̃_N`) in one pass.
pub fn partial_sum_series(family: RawFamily, n_max: usize, s: ComplexPoint) -> Result<Vec<C64>> {
    let s = s.to_c64();
    check_point(s)?;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = C64::new(0.0, 0.0);
    match family {
        RawFamily::ClassicalRaw => {
            for n in 1..=n_max {
                acc += pow_neg((n as f64).ln(), s);
                out.push(acc);
            }
        }
        RawFamily::AcceleratedRaw => {
            let powers: Vec<C64> = (0..=n_max)
                .map(|k| pow_neg(((k + 1) as f64).ln(), s))
                .collect();
            for n in 0..=n_max {
                let w = binomial_weights(n);
                for (k, &wk) in w.iter().enumerate() {
                    acc += wk * powers[k];
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// One fluctuation window `[t/(2(M+1)π)] <= N <= [t/(2Mπ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluctuationInterval {
    pub m: usize,
    pub n_lo: usize,
    pub n_hi: usize,
}

impl FluctuationInterval {
    pub fn len(&self) -> usize {
        self.n_hi + 1 - self.n_lo
    }

    pub fn is_empty(&self) -> bool {
        self.n_hi < self.n_lo
    }
}

/// Classical fluctuation windows for `M = 1..=m_max`.
pub fn fluctuation_intervals(t: f64, m_max: usize) -> Result<Vec<FluctuationInterval>> {
    fluctuation_intervals_scaled(t, m_max, 2.0 * PI)
}

/// Windows `[t/((M+1)a)] <= N <= [t/(Ma)]` for a family-specific scale `a`.
pub fn fluctuation_intervals_for(
    family: Family,
    t: f64,
    m_max: usize,
) -> Result<Vec<FluctuationInterval>> {
    let scale = family.resonance_scale();
    let mut out = fluctuation_intervals_scaled(t, m_max, scale)?;
    if family == Family::Dh {
        // resonances at multiples of 5 carry zero coefficient
        out.retain(|iv| iv.m % 5 != 0);
    }
    Ok(out)
}

fn fluctuation_intervals_scaled(t: f64, m_max: usize, scale: f64) -> Result<Vec<FluctuationInterval>> {
    if !(t > 2.0 * PI) {
        return Err(Error::Domain {
            func: "fluctuation_intervals",
            arg: t,
            detail: "requires t > 2π",
        });
    }
    if m_max == 0 {
        return Err(Error::Index("M_max must be at least 1".into()));
    }
    let mut out = Vec::new();
    for m in 1..=m_max {
        let n_lo = (t / ((m + 1) as f64 * scale)).floor() as usize;
        let n_hi = (t / (m as f64 * scale)).floor() as usize;
        if n_hi >= n_lo {
            out.push(FluctuationInterval { m, n_lo, n_hi });
        }
    }
    Ok(out)
}

/// A section in Dirichlet-coefficient form, with the next summation step
/// kept separately so that the homotopy `F_N + τ·(next term)` is cheap.
#[derive(Debug, Clone)]
pub struct Section {
    family: Family,
    spec: SectionSpec,
    ln_m: Vec<f64>,
    amp: Vec<f64>,
    base: Vec<f64>,
    next: Vec<f64>,
}

impl Section {
    pub fn new(spec: &SectionSpec) -> Result<Self> {
        spec.validate()?;
        let mut sec = Self {
            family: spec.family,
            spec: spec.clone(),
            ln_m: Vec::new(),
            amp: Vec::new(),
            base: Vec::new(),
            next: Vec::new(),
        };
        let order: Vec<usize> = spec.order().collect();
        for n in order {
            let base = std::mem::take(&mut sec.base);
            sec.base = sec.add_term(base, n, 1.0);
        }
        let upcoming = spec.term_at(spec.n_terms + 1);
        sec.next = sec.add_term(Vec::new(), upcoming, 1.0);
        sec.pad();
        Ok(sec)
    }

    fn add_term(&mut self, mut into: Vec<f64>, n: usize, scale: f64) -> Vec<f64> {
        match self.family {
            Family::Classical => {
                if into.len() < n {
                    into.resize(n, 0.0);
                }
                into[n - 1] += scale * self.family.coefficient(n);
            }
            Family::Accelerated | Family::Dh => {
                if into.len() < n + 1 {
                    into.resize(n + 1, 0.0);
                }
                for (k, w) in binomial_weights(n).into_iter().enumerate() {
                    into[k] += scale * w * self.family.coefficient(k + 1);
                }
            }
        }
        into
    }

    fn pad(&mut self) {
        let len = self.base.len().max(self.next.len());
        self.base.resize(len, 0.0);
        self.next.resize(len, 0.0);
        while self.ln_m.len() < len {
            let m = (self.ln_m.len() + 1) as f64;
            self.ln_m.push(m.ln());
            self.amp.push(m.powf(-0.5));
        }
    }

    /// Moves to section `N + 1`.
    pub fn advance(&mut self) {
        for (b, x) in self.base.iter_mut().zip(&self.next) {
            *b += x;
        }
        self.spec.n_terms += 1;
        let upcoming = self.spec.term_at(self.spec.n_terms + 1);
        self.next = self.add_term(Vec::new(), upcoming, 1.0);
        self.pad();
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_terms(&self) -> usize {
        self.spec.n_terms
    }

    pub fn spec(&self) -> &SectionSpec {
        &self.spec
    }

    /// Coefficients `c_m` of `D` at homotopy parameter `tau`.
    pub fn coefficients(&self, tau: f64) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.next)
            .map(|(b, x)| b + tau * x)
            .collect()
    }

    #[inline]
    fn coef(&self, i: usize, tau: f64) -> f64 {
        self.base[i] + tau * self.next[i]
    }

    fn dirichlet(&self, tau: f64, s: C64) -> (C64, C64) {
        let mut d = C64::new(0.0, 0.0);
        let mut dd = C64::new(0.0, 0.0);
        for i in 0..self.base.len() {
            let c = self.coef(i, tau);
            if c == 0.0 {
                continue;
            }
            let v = c * pow_neg(self.ln_m[i], s);
            d += v;
            dd -= v * self.ln_m[i];
        }
        (d, dd)
    }

    /// `F(s) = ½[D(s) + χ_f(s) D(1-s)]` at homotopy parameter `tau`.
    pub fn eval(&self, tau: f64, s: C64) -> Result<C64> {
        check_point(s)?;
        let chi = self.family.chi(s)?;
        let (d, _) = self.dirichlet(tau, s);
        let (d1, _) = self.dirichlet(tau, 1.0 - s);
        Ok(0.5 * (d + chi * d1))
    }

    /// `F(s)` and `F'(s)`.
    pub fn eval_with_derivative(&self, tau: f64, s: C64) -> Result<(C64, C64)> {
        check_point(s)?;
        let chi = self.family.chi(s)?;
        let log_der = self.family.chi_log_derivative(s)?;
        let (d, dd) = self.dirichlet(tau, s);
        let (d1, dd1) = self.dirichlet(tau, 1.0 - s);
        let f = 0.5 * (d + chi * d1);
        let fp = 0.5 * (dd + chi * (log_der * d1 - dd1));
        Ok((f, fp))
    }

    /// `∂F/∂τ`: the completed next term at `s`.
    pub fn eval_tau(&self, s: C64) -> Result<C64> {
        check_point(s)?;
        let chi = self.family.chi(s)?;
        let sum = |x: C64| {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &c) in self.next.iter().enumerate() {
                if c != 0.0 {
                    acc += c * pow_neg(self.ln_m[i], x);
                }
            }
            acc
        };
        Ok(0.5 * (sum(s) + chi * sum(1.0 - s)))
    }

    /// Real rotated value `Z(t) = Re[e^{iθ} D(½+it)]` on the critical line.
    pub fn z(&self, tau: f64, t: f64) -> f64 {
        let theta = self.family.theta(t);
        let mut acc = 0.0;
        for i in 0..self.base.len() {
            let c = self.coef(i, tau);
            if c != 0.0 {
                acc += c * self.amp[i] * (theta - t * self.ln_m[i]).cos();
            }
        }
        acc
    }

    /// `Z(t)` and `dZ/dt`.
    pub fn z_with_derivative(&self, tau: f64, t: f64) -> (f64, f64) {
        let theta = self.family.theta(t);
        let dtheta = self.family.theta_derivative(t);
        let mut z = 0.0;
        let mut dz = 0.0;
        for i in 0..self.base.len() {
            let c = self.coef(i, tau);
            if c == 0.0 {
                continue;
            }
            let phase = theta - t * self.ln_m[i];
            let (sin, cos) = phase.sin_cos();
            z += c * self.amp[i] * cos;
            dz -= c * self.amp[i] * sin * (dtheta - self.ln_m[i]);
        }
        (z, dz)
    }

    /// `∂Z/∂τ`: the rotated next term.
    pub fn z_tau(&self, t: f64) -> f64 {
        let theta = self.family.theta(t);
        let mut acc = 0.0;
        for i in 0..self.next.len() {
            let c = self.next[i];
            if c != 0.0 {
                acc += c * self.amp[i] * (theta - t * self.ln_m[i]).cos();
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{zeta_reference, Tolerance};

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / (1.0 + b.norm())
    }

    #[test]
    fn binomial_weights_match_exact_rows() {
        let w = binomial_weights(4);
        let want = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 32.0);
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 2e-15 * b, "{a} {b}");
        }
        // rows sum to 1/2 even where C(n,k) overflows
        for n in [0, 1, 7, 600, 2000] {
            let s: f64 = binomial_weights(n).iter().sum();
            assert!((s - 0.5).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn first_terms() {
        let s = ComplexPoint::new(0.3, 21.0);
        let chi = special::chi(s).unwrap();
        assert!((b_term(1, s).unwrap() - 0.5 * (1.0 + chi)).norm() < 1e-15);
        assert!((accel_a_term(0, s) - 0.5).norm() < 1e-15);
        assert!((accel_a_term(1, ComplexPoint::new(0.0, 0.0)) - 0.5).norm() < 1e-15);
        let spec = SectionSpec::new(Family::Accelerated, 0).unwrap();
        let z0 = section_eval(&spec, s).unwrap();
        assert!((z0 - 0.25 * (1.0 + chi)).norm() < 1e-14);
        assert!(b_term(0, s).is_err());
    }

    #[test]
    fn weight_closed_forms() {
        for n in [0usize, 1, 5, 40, 300] {
            let last = weight(n, n).unwrap();
            assert!((last - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);
            let first = weight(0, n).unwrap();
            assert!((first - (1.0 - 0.5f64.powi(n as i32 + 1))).abs() < 1e-14);
            let total: f64 = (0..=n).map(|k| weight(k, n).unwrap()).sum();
            assert!((total - (n as f64 + 1.0) / 2.0).abs() < 1e-12);
        }
        assert!(weight(5, 4).is_err());
    }

    #[test]
    fn weights_are_the_reordered_term_sum() {
        // Σ_{n<=N} Ã(s,n) = Σ_k ã(k,N) (k+1)^{-s}
        let s = ComplexPoint::new(0.7, 13.0);
        let direct: C64 = (0..=30).map(|n| accel_a_term(n, s)).sum();
        let reordered = partial_sum(RawFamily::AcceleratedRaw, 30, s).unwrap();
        assert!(rel(direct, reordered) < 1e-13);
    }

    #[test]
    fn accelerated_terms_recover_zeta_at_t_100() {
        let s = ComplexPoint::on_line(100.0);
        let sum: C64 = (0..=80).map(|n| accel_b_term(n, s).unwrap()).sum();
        let zeta = zeta_reference(s, &Tolerance::default()).unwrap();
        assert!((sum - zeta).norm() < 1e-8, "{}", (sum - zeta).norm());
    }

    #[test]
    fn fast_form_matches_term_sums() {
        for fam in [Family::Classical, Family::Accelerated, Family::Dh] {
            let spec = SectionSpec::new(fam, 17).unwrap();
            let sec = Section::new(&spec).unwrap();
            for s in [C64::new(0.5, 40.0), C64::new(0.8, 31.5), C64::new(0.1, 12.0)] {
                let slow = section_eval(&spec, s.into()).unwrap();
                let mut fast = sec.eval(0.0, s).unwrap();
                if fam == Family::Dh {
                    fast *= crate::dh::log_completion(s).unwrap().exp();
                }
                assert!(rel(slow, fast) < 1e-12, "{fam} {s}");
            }
        }
    }

    #[test]
    fn homotopy_endpoints_and_advance() {
        for fam in [Family::Classical, Family::Accelerated] {
            let spec = SectionSpec::new(fam, 9).unwrap();
            let mut sec = Section::new(&spec).unwrap();
            let s = C64::new(0.5, 88.0);
            let one = sec.eval(1.0, s).unwrap();
            let next = Section::new(&SectionSpec::new(fam, 10).unwrap()).unwrap();
            assert!(rel(one, next.eval(0.0, s).unwrap()) < 1e-13);
            sec.advance();
            assert!(rel(sec.eval(0.0, s).unwrap(), one) < 1e-13);
        }
    }

    #[test]
    fn rotated_value_matches_complex_form() {
        let spec = SectionSpec::new(Family::Accelerated, 12).unwrap();
        let sec = Section::new(&spec).unwrap();
        for t in [30.0, 88.1, 140.0] {
            let f = sec.eval(0.3, C64::new(0.5, t)).unwrap();
            let theta = special::rs_theta(t).unwrap();
            // F = e^{-iθ} Z
            let z = sec.z(0.3, t);
            assert!((f * C64::from_polar(1.0, theta) - z).norm() < 1e-12);
            let h = 1e-6;
            let fd = (sec.z(0.3, t + h) - sec.z(0.3, t - h)) / (2.0 * h);
            assert!((sec.z_with_derivative(0.3, t).1 - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn complex_derivative_matches_difference() {
        let spec = SectionSpec::new(Family::Accelerated, 9).unwrap();
        let sec = Section::new(&spec).unwrap();
        let s = C64::new(0.74, 88.12);
        let h = 1e-6;
        let (_, fp) = sec.eval_with_derivative(0.5, s).unwrap();
        let fd = (sec.eval(0.5, s + h).unwrap() - sec.eval(0.5, s - h).unwrap()) / (2.0 * h);
        assert!((fp - fd).norm() < 1e-7 * (1.0 + fp.norm()));
    }

    #[test]
    fn fluctuation_windows() {
        let iv = fluctuation_intervals(1100.0, 5).unwrap();
        assert_eq!((iv[0].m, iv[0].n_lo, iv[0].n_hi), (1, 87, 175));
        assert_eq!((iv[4].m, iv[4].n_lo, iv[4].n_hi), (5, 29, 35));
        for w in iv.windows(2) {
            assert!(w[1].n_hi <= w[0].n_lo + 1);
        }
        assert!(fluctuation_intervals(6.0, 3).is_err());
    }

    #[test]
    fn rearrangement_validation_and_json() {
        let r = Rearrangement::new(
            (1, 10),
            vec![
                Piece { from: 1, to: 3, kind: PieceKind::Identity },
                Piece { from: 4, to: 7, kind: PieceKind::Reflect { c: 11 } },
                Piece { from: 8, to: 10, kind: PieceKind::Identity },
            ],
        )
        .unwrap();
        assert_eq!(r.apply(4), 7);
        assert_eq!(r.apply(5), 6);
        assert_eq!(r.apply(42), 42);
        let back = Rearrangement::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.compose(&r).unwrap().is_identity());

        let bad = Rearrangement::new(
            (1, 4),
            vec![Piece { from: 1, to: 4, kind: PieceKind::Reflect { c: 6 } }],
        );
        assert!(bad.is_err());
        let gap = Rearrangement::new(
            (1, 4),
            vec![Piece { from: 1, to: 2, kind: PieceKind::Identity }],
        );
        assert!(gap.is_err());
        let json = r#"{"domain":[1,3],"pieces":[{"from":1,"to":3,"kind":"reflect","c":5}]}"#;
        assert!(Rearrangement::from_json(json).is_err());
        assert!(Rearrangement::from_table(2, &[3, 2, 4]).is_ok());
        assert!(Rearrangement::from_table(2, &[3, 3, 4]).is_err());
    }
}
