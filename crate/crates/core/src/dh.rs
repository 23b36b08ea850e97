//! The Davenport-Heilbronn function as a control family.
//!
//! `D(s) = Σ d_m m^{-s}` with 5-periodic real coefficients
//! `d = (1, κ, -κ, -1, 0)`, obtained from `½[(1-iκ)χ(m) + (1+iκ)χ̄(m)]` for the
//! character mod 5 with `χ(2) = i`. The completed function
//! `ξ(s) = G(s) D(s)`, `G(s) = (π/5)^{-s/2} Γ((1+s)/2)`, satisfies
//! `ξ(s) = ξ(1-s)`, so sections are built with `χ_DH(s) = G(1-s)/G(s)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sections::{binomial_weights, section_eval, Family, Section, SectionSpec};
use crate::tracker::{track_pair, PairTrajectory, TrackRequest, TrackerConfig};
use crate::special::{
    digamma_c, exp_checked, hurwitz_zeta, lambert_w, log_gamma_c, ComplexPoint, LambertBranch,
    Tolerance, C64,
};

/// ln(π/5)
const LN_PI_OVER_5: f64 = -0.464_708_026_584_700_23;

/// `κ = (√(10 - 2√5) - 2) / (√5 - 1)`.
pub fn kappa() -> f64 {
    let r5 = 5f64.sqrt();
    ((10.0 - 2.0 * r5).sqrt() - 2.0) / (r5 - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DHConfig {
    pub kappa: f64,
    /// `χ(1), ..., χ(5)`.
    pub character_table: [C64; 5],
}

impl Default for DHConfig {
    fn default() -> Self {
        Self {
            kappa: kappa(),
            character_table: [
                C64::new(1.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(-1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        }
    }
}

impl DHConfig {
    pub fn validate(&self) -> Result<()> {
        if (self.kappa - kappa()).abs() > 1e-14 {
            return Err(Error::Config(format!("kappa {} is not the DH constant", self.kappa)));
        }
        let c = &self.character_table;
        if (c[0] - 1.0).norm() > 1e-15 || c[4].norm() > 1e-15 {
            return Err(Error::Config("character must have χ(1) = 1 and χ(5) = 0".into()));
        }
        for a in 1..=5usize {
            for b in 1..=5usize {
                let lhs = c[(a * b - 1) % 5];
                let rhs = c[a - 1] * c[b - 1];
                if (lhs - rhs).norm() > 1e-14 {
                    return Err(Error::Config(format!("character not multiplicative at {a}·{b}")));
                }
            }
        }
        Ok(())
    }

    /// `½[(1-iκ)χ(m) + (1+iκ)χ̄(m)]`, real for every `m`.
    pub fn coefficient(&self, m: usize) -> f64 {
        let chi = self.character_table[(m + 4) % 5];
        let k = C64::new(0.0, self.kappa);
        (0.5 * ((1.0 - k) * chi + (1.0 + k) * chi.conj())).re
    }
}

/// Coefficient `d_m` of the default configuration.
pub fn dh_coefficient(m: usize) -> f64 {
    let k = kappa();
    match m % 5 {
        1 => 1.0,
        2 => k,
        3 => -k,
        4 => -1.0,
        _ => 0.0,
    }
}

/// Euler-transformed DH term `2^{-(n+1)} Σ_k C(n,k) d_{k+1} (k+1)^{-s}`.
pub fn dh_a_term(n: usize, s: ComplexPoint) -> C64 {
    dh_a_term_c(n, s.to_c64())
}

pub(crate) fn dh_a_term_c(n: usize, s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, w) in binomial_weights(n).into_iter().enumerate() {
        let d = dh_coefficient(k + 1);
        if w != 0.0 && d != 0.0 {
            acc += w * d * (-s * ((k + 1) as f64).ln()).exp();
        }
    }
    acc
}

/// `log G(s) = -(s/2) ln(π/5) + log Γ((1+s)/2)`.
pub fn log_completion(s: C64) -> Result<C64> {
    let lg = log_gamma_c((1.0 + s) * 0.5)?;
    Ok(-0.5 * s * LN_PI_OVER_5 + lg)
}

/// `χ_DH(s) = G(1-s) / G(s)`.
pub fn chi_dh(s: C64) -> Result<C64> {
    let v = log_completion(1.0 - s)? - log_completion(s)?;
    exp_checked("chi_dh", v)
}

pub fn chi_dh_log_derivative(s: C64) -> Result<C64> {
    let a = digamma_c((2.0 - s) * 0.5)?;
    let b = digamma_c((1.0 + s) * 0.5)?;
    Ok(LN_PI_OVER_5 - 0.5 * a - 0.5 * b)
}

/// `arg G(½ + it)`; the DH section times `e^{iθ}` is real on the line.
pub fn theta_dh(t: f64) -> f64 {
    let lg = log_gamma_c(C64::new(0.75, 0.5 * t)).expect("no pole off the real axis");
    -0.5 * t * LN_PI_OVER_5 + lg.im
}

pub fn theta_dh_derivative(t: f64) -> f64 {
    let psi = digamma_c(C64::new(0.75, 0.5 * t)).expect("no pole off the real axis");
    -0.5 * LN_PI_OVER_5 + 0.5 * psi.re
}

/// Completed accelerated section `ξ̃_N(s)`.
pub fn dh_xi_section(n_terms: usize, s: ComplexPoint) -> Result<C64> {
    section_eval(&SectionSpec::new(Family::Dh, n_terms)?, s)
}

/// `D(s) = 5^{-s} Σ_{a=1}^{4} d_a ζ(s, a/5)`, valid everywhere except `s = 1`
/// (where the coefficients sum to zero, so the pole cancels; it is still
/// rejected).
pub fn dh_reference(s: ComplexPoint, tol: &Tolerance) -> Result<C64> {
    let sc = s.to_c64();
    let mut acc = C64::new(0.0, 0.0);
    for a in 1..=4usize {
        acc += dh_coefficient(a) * hurwitz_zeta(s, a as f64 / 5.0, tol)?;
    }
    Ok(acc * (-sc * 5f64.ln()).exp())
}

/// Completed reference `ξ(s) = G(s) D(s)`.
pub fn dh_xi_reference(s: ComplexPoint, tol: &Tolerance) -> Result<C64> {
    let g = exp_checked("dh_xi_reference", log_completion(s.to_c64())?)?;
    Ok(g * dh_reference(s, tol)?)
}

/// Closed-form ordinate of the `n`-th zero of `ξ̃_0`:
/// `2π(n - 5/8) / W_0(5(n - 5/8)/e)`.
pub fn dh_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Index("dh_zero indices start at 1".into()));
    }
    let a = n as f64 - 0.625;
    let w = lambert_w(LambertBranch::Principal, 5.0 * a / E)?;
    Ok(2.0 * PI * a / w)
}

/// Largest `|Im e^{iθ} ξ̃_N(½+it)| / (1 + |ξ̃_N|)` over `samples` points of
/// `[t_lo, t_hi]`; the DH tracker relies on this being at rounding level.
pub fn dh_realness_defect(n_terms: usize, t_lo: f64, t_hi: f64, samples: usize) -> Result<f64> {
    let sec = Section::new(&SectionSpec::new(Family::Dh, n_terms)?)?;
    let mut worst: f64 = 0.0;
    for i in 0..samples.max(2) {
        let t = t_lo + (t_hi - t_lo) * i as f64 / (samples.max(2) - 1) as f64;
        let f = sec.eval(0.0, C64::new(0.5, t))?;
        let r = f * C64::from_polar(1.0, theta_dh(t));
        worst = worst.max(r.im.abs() / (1.0 + r.norm()));
    }
    Ok(worst)
}

/// Tracks the DH pair `(n, n+1)` from `ξ̃_0` to `ξ̃_{n_max}`.
pub fn dh_track_pair(n: usize, n_max: usize, cfg: &TrackerConfig) -> Result<PairTrajectory> {
    track_pair(&TrackRequest::new(n, Family::Dh, n_max), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sections::Section;

    #[test]
    fn kappa_and_coefficients() {
        assert!((kappa() - 0.284_079_043_840_412_3).abs() < 1e-15);
        let cfg = DHConfig::default();
        cfg.validate().unwrap();
        for m in 1..=20 {
            assert!((cfg.coefficient(m) - dh_coefficient(m)).abs() < 1e-15, "{m}");
        }
        let mut bad = cfg.clone();
        bad.character_table[1] = C64::new(1.0, 0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn first_term_is_one_half() {
        let s = ComplexPoint::new(0.3, 7.0);
        assert!((dh_a_term(0, s) - 0.5).norm() < 1e-15);
    }

    #[test]
    fn accelerated_terms_sum_to_direct_series_at_two() {
        let s = ComplexPoint::new(2.0, 0.0);
        let sum: C64 = (0..=150).map(|n| dh_a_term(n, s)).sum();
        // absolutely convergent direct series with an integral tail
        let mut direct = 0.0;
        for m in 1..=2_000_000usize {
            direct += dh_coefficient(m) / (m as f64 * m as f64);
        }
        assert!((sum.re - direct).abs() < 1e-8);
        assert!((sum.re - 1.000_068_337_809_782_7).abs() < 1e-8);
        let reference = dh_reference(s, &Tolerance::default()).unwrap();
        assert!((reference.re - 1.000_068_337_809_782_7).abs() < 1e-12);
    }

    #[test]
    fn coefficients_are_real_so_conjugate_symmetric() {
        let s = ComplexPoint::new(0.4, 17.0);
        let a = dh_a_term(7, s.conj());
        let b = dh_a_term(7, s).conj();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn completion_symmetry() {
        for (sigma, t) in [(0.2, 15.0), (0.7, 48.0), (0.5, 80.0)] {
            let s = ComplexPoint::new(sigma, t);
            for n in [0, 5, 33] {
                let a = dh_xi_section(n, s).unwrap();
                let b = dh_xi_section(n, s.reflect()).unwrap();
                assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()), "{n} {s:?}");
            }
            let x = dh_xi_reference(s, &Tolerance::default()).unwrap();
            let y = dh_xi_reference(s.reflect(), &Tolerance::default()).unwrap();
            assert!((x - y).norm() <= 1e-9 * (1.0 + x.norm()), "{x} {y}");
        }
    }

    #[test]
    fn theta_rotation_makes_sections_real() {
        let sec = Section::new(&SectionSpec::new(Family::Dh, 25).unwrap()).unwrap();
        for t in [12.0, 55.5, 190.0] {
            let f = sec.eval(0.0, C64::new(0.5, t)).unwrap();
            let r = f * C64::from_polar(1.0, theta_dh(t));
            assert!(r.im.abs() <= 1e-12 * (1.0 + r.re.abs()));
        }
        let h = 1e-5;
        let fd = (theta_dh(40.0 + h) - theta_dh(40.0 - h)) / (2.0 * h);
        assert!((theta_dh_derivative(40.0) - fd).abs() < 1e-8);
    }

    #[test]
    fn dh_zero_is_increasing() {
        let mut prev = 0.0;
        for n in 1..200 {
            let t = dh_zero(n).unwrap();
            assert!(t > prev);
            prev = t;
        }
        assert!(dh_zero(0).is_err());
    }

    #[test]
    fn real_on_the_line() {
        assert!(dh_realness_defect(40, 10.0, 300.0, 400).unwrap() < 1e-9);
    }

    #[test]
    fn essential_collision() {
        let tr = dh_track_pair(44, 40, &TrackerConfig::default()).unwrap();
        assert!(tr.is_complete());
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].n_terms, 12);
        let last = tr.final_sample().unwrap();
        // the classical off-line DH zero near 0.8085 + 85.6993i
        assert!(!last.hi.on_line && last.hi.location.t > 85.0 && last.hi.location.t < 86.5);
    }
}
