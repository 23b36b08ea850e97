//! Complex special functions: log-gamma, digamma, the functional-equation
//! factor chi, the Riemann-Siegel theta, Lambert W and a reference zeta.
//!
//! Everything that can grow like `exp(t)` is computed in log space. Values
//! whose log-modulus leaves the `f64` range are reported as
//! [`Error::Overflow`] instead of silently becoming infinite.

use std::f64::consts::{E, LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// ln(2π)/2
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;
/// Largest log-modulus we are willing to exponentiate.
const MAX_LOG_MODULUS: f64 = 709.0;

/// A point `s = sigma + i t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub sigma: f64,
    pub t: f64,
}

impl ComplexPoint {
    pub const fn new(sigma: f64, t: f64) -> Self {
        Self { sigma, t }
    }

    /// The point `1/2 + i t` on the critical line.
    pub const fn on_line(t: f64) -> Self {
        Self { sigma: 0.5, t }
    }

    /// `1 - s`
    pub fn reflect(self) -> Self {
        Self::new(1.0 - self.sigma, -self.t)
    }

    pub fn conj(self) -> Self {
        Self::new(self.sigma, -self.t)
    }

    /// `1 - conj(s)`, the mirror image across the critical line.
    pub fn mirror(self) -> Self {
        Self::new(1.0 - self.sigma, self.t)
    }

    pub fn is_finite(self) -> bool {
        self.sigma.is_finite() && self.t.is_finite()
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.sigma, self.t)
    }
}

impl From<C64> for ComplexPoint {
    fn from(z: C64) -> Self {
        Self::new(z.re, z.im)
    }
}

impl From<ComplexPoint> for C64 {
    fn from(p: ComplexPoint) -> Self {
        p.to_c64()
    }
}

/// Stopping rule shared by the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_eps: f64,
    pub rel_eps: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs_eps: f64, rel_eps: f64, max_iter: usize) -> Result<Self> {
        let tol = Self {
            abs_eps,
            rel_eps,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_eps >= 0.0 && self.rel_eps >= 0.0) {
            return Err(Error::InvalidTolerance(
                "abs_eps and rel_eps must be non-negative".into(),
            ));
        }
        if self.abs_eps + self.rel_eps <= 0.0 {
            return Err(Error::InvalidTolerance(
                "abs_eps + rel_eps must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidTolerance("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Threshold for a quantity of the given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs_eps.max(self.rel_eps * scale.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_eps: 1e-12,
            rel_eps: 1e-14,
            max_iter: 100,
        }
    }
}

/// Lanczos coefficients for g = 607/128, n = 15.
const LANCZOS_G: f64 = 4.742_187_5;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_76e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_103_2e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

/// `B_{2j} / (2j)!` for `j = 1..=30`.
pub(crate) const BERNOULLI_OVER_FACTORIAL: [f64; 30] = [
    8.333_333_333_333_333e-2,
    -1.388_888_888_888_889e-3,
    3.306_878_306_878_307e-5,
    -8.267_195_767_195_768e-7,
    2.087_675_698_786_81e-8,
    -5.284_190_138_687_493e-10,
    1.338_253_653_068_468e-11,
    -3.389_680_296_322_583e-13,
    8.586_062_056_277_845e-15,
    -2.174_868_698_558_062e-16,
    5.509_002_828_360_23e-18,
    -1.395_446_468_581_252e-19,
    3.534_707_039_629_467e-21,
    -8.953_517_427_037_546e-23,
    2.267_952_452_337_683e-24,
    -5.744_790_668_872_202e-26,
    1.455_172_475_614_865e-27,
    -3.685_994_940_665_31e-29,
    9.336_734_257_095_045e-31,
    -2.365_022_415_700_63e-32,
    5.990_671_762_482_134e-34,
    -1.517_454_884_468_29e-35,
    3.843_758_125_454_189e-37,
    -9.736_353_072_646_691e-39,
    2.466_247_044_200_681e-40,
    -6.247_076_741_820_743e-42,
    1.582_403_024_464_491e-43,
    -4.008_273_685_948_936e-45,
    1.015_307_585_556_956e-46,
    -2.571_804_158_241_872e-48,
];

/// Bernoulli numbers B_2 .. B_20 for the Stirling and digamma series.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174_611.0 / 330.0,
];

/// Modulus above which the asymptotic series are used directly.
const ASYMPTOTIC_RADIUS: f64 = 15.0;

fn is_nonpositive_integer(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Principal branch of `log Γ(s)` (continuous off the negative real axis).
pub fn log_gamma(s: ComplexPoint) -> Result<C64> {
    log_gamma_c(s.to_c64())
}

pub(crate) fn log_gamma_c(z: C64) -> Result<C64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain {
            func: "log_gamma",
            arg: z.re,
            detail: "non-finite argument",
        });
    }
    if is_nonpositive_integer(z) {
        return Err(Error::Pole {
            func: "log_gamma",
            sigma: z.re,
            t: z.im,
        });
    }
    if z.norm() >= ASYMPTOTIC_RADIUS && (z.re >= 0.0 || z.im.abs() >= ASYMPTOTIC_RADIUS) {
        return Ok(stirling_log_gamma(z));
    }
    // Shift into the right half-plane: log Γ(z) = log Γ(z+k) - Σ log(z+j).
    let mut shifted = z;
    let mut correction = C64::new(0.0, 0.0);
    while shifted.re < 0.5 {
        correction += shifted.ln();
        shifted += 1.0;
    }
    Ok(lanczos_log_gamma(shifted) - correction)
}

fn lanczos_log_gamma(z: C64) -> C64 {
    let zm1 = z - 1.0;
    let mut series = C64::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (zm1 + k as f64);
    }
    let base = zm1 + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (zm1 + 0.5) * base.ln() - base + series.ln()
}

fn stirling_log_gamma(z: C64) -> C64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut term = inv;
    let mut tail = C64::new(0.0, 0.0);
    for (j, &b) in BERNOULLI.iter().enumerate() {
        let two_j = 2.0 * (j as f64 + 1.0);
        tail += term * (b / (two_j * (two_j - 1.0)));
        term *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + tail
}

/// Digamma ψ(z) = Γ'(z)/Γ(z).
pub fn digamma(s: ComplexPoint) -> Result<C64> {
    digamma_c(s.to_c64())
}

pub(crate) fn digamma_c(z: C64) -> Result<C64> {
    if is_nonpositive_integer(z) {
        return Err(Error::Pole {
            func: "digamma",
            sigma: z.re,
            t: z.im,
        });
    }
    let mut shifted = z;
    let mut correction = C64::new(0.0, 0.0);
    while shifted.norm() < ASYMPTOTIC_RADIUS || (shifted.re < 0.0 && shifted.im.abs() < ASYMPTOTIC_RADIUS)
    {
        correction += shifted.inv();
        shifted += 1.0;
    }
    let inv = shifted.inv();
    let inv2 = inv * inv;
    let mut term = inv2;
    let mut value = shifted.ln() - 0.5 * inv;
    for (j, &b) in BERNOULLI.iter().enumerate() {
        let two_j = 2.0 * (j as f64 + 1.0);
        value -= term * (b / two_j);
        term *= inv2;
    }
    Ok(value - correction)
}

/// `log sin(z)` on some branch, computed without overflow for large `|Im z|`.
fn log_sin(z: C64) -> C64 {
    let i = C64::i();
    if z.im > 5.0 {
        // sin z = e^{-iz} (1 - e^{2iz}) (i/2)
        -i * z + (C64::new(1.0, 0.0) - (2.0 * i * z).exp()).ln() + C64::new(0.0, 0.5).ln()
    } else if z.im < -5.0 {
        // sin z = e^{iz} (1 - e^{-2iz}) (-i/2)
        i * z + (C64::new(1.0, 0.0) - (-2.0 * i * z).exp()).ln() + C64::new(0.0, -0.5).ln()
    } else {
        z.sin().ln()
    }
}

/// `cot(z)` without overflow for large `|Im z|`.
fn cot(z: C64) -> C64 {
    let i = C64::i();
    if z.im >= 0.0 {
        let e = (2.0 * i * z).exp();
        i * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-2.0 * i * z).exp();
        -i * (e + 1.0) / (e - 1.0)
    }
}

fn is_real_integer(z: C64) -> bool {
    z.im == 0.0 && z.re == z.re.round()
}

/// A branch of `log χ(s)` with `χ(s) = 2^s π^{s-1} sin(πs/2) Γ(1-s)`.
pub fn log_chi(s: ComplexPoint) -> Result<C64> {
    log_chi_c(s.to_c64())
}

pub(crate) fn log_chi_c(s: C64) -> Result<C64> {
    // Γ(1-s) has poles at s = 1, 2, ...; sin(πs/2) vanishes at even s. Both
    // are rejected rather than resolved as limits.
    if is_real_integer(s) && (s.re >= 1.0 || (s.re as i64) % 2 == 0) {
        return Err(Error::Undefined {
            func: "chi",
            sigma: s.re,
            t: s.im,
        });
    }
    let lg = log_gamma_c(C64::new(1.0, 0.0) - s)?;
    Ok(s * LN_2 + (s - 1.0) * LN_PI + log_sin(s * (PI / 2.0)) + lg)
}

pub(crate) fn exp_checked(func: &'static str, log_value: C64) -> Result<C64> {
    if !log_value.re.is_finite() || log_value.re > MAX_LOG_MODULUS {
        return Err(Error::Overflow {
            func,
            log_modulus: log_value.re,
        });
    }
    Ok(log_value.exp())
}

/// The functional-equation factor `χ(s)` with `ζ(s) = χ(s) ζ(1-s)`.
pub fn chi(s: ComplexPoint) -> Result<C64> {
    chi_c(s.to_c64())
}

pub(crate) fn chi_c(s: C64) -> Result<C64> {
    exp_checked("chi", log_chi_c(s)?)
}

/// `χ'(s)/χ(s) = ln 2π + (π/2) cot(πs/2) - ψ(1-s)`.
pub fn chi_log_derivative(s: ComplexPoint) -> Result<C64> {
    chi_log_derivative_c(s.to_c64())
}

pub(crate) fn chi_log_derivative_c(s: C64) -> Result<C64> {
    let psi = digamma_c(C64::new(1.0, 0.0) - s)?;
    Ok(LN_2 + LN_PI + (PI / 2.0) * cot(s * (PI / 2.0)) - psi)
}

/// Leading-order asymptotic of χ: `(2π/t)^{σ + it - 1/2} e^{i(t + π/4)}`.
pub fn chi_asymptotic(sigma: f64, t: f64) -> Result<C64> {
    if !(t > 2.0 * PI) {
        return Err(Error::Domain {
            func: "chi_asymptotic",
            arg: t,
            detail: "requires t > 2π",
        });
    }
    let exponent = C64::new(sigma - 0.5, t);
    let log_value = exponent * (2.0 * PI / t).ln() + C64::new(0.0, t + PI / 4.0);
    exp_checked("chi_asymptotic", log_value)
}

/// Real branches of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambertBranch {
    /// Principal branch `W_0`, `W >= -1`.
    Principal,
    /// Lower branch `W_{-1}`, `W <= -1`.
    Lower,
}

const INV_E: f64 = 1.0 / E;

/// Solves `W e^W = x` on the requested real branch by Halley iteration.
///
/// Initial guesses: the branch-point series in `p = ±sqrt(2(ex + 1))` near
/// `x = -1/e`, `ln x - ln ln x` for large `x` on the principal branch,
/// `ln(-x) - ln(-ln(-x))` near `0-` on the lower branch, and `ln(1 + x)`
/// otherwise.
pub fn lambert_w(branch: LambertBranch, x: f64) -> Result<f64> {
    let in_domain = match branch {
        LambertBranch::Principal => x >= -INV_E,
        LambertBranch::Lower => (-INV_E..0.0).contains(&x),
    };
    if !x.is_finite() || !in_domain {
        return Err(Error::Domain {
            func: "lambert_w",
            arg: x,
            detail: match branch {
                LambertBranch::Principal => "branch 0 requires x >= -1/e",
                LambertBranch::Lower => "branch -1 requires -1/e <= x < 0",
            },
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let gap = E * x + 1.0;
    if gap <= 0.0 {
        return Ok(-1.0);
    }
    let mut w = if gap < 0.3 {
        let p = match branch {
            LambertBranch::Principal => (2.0 * gap).sqrt(),
            LambertBranch::Lower => -(2.0 * gap).sqrt(),
        };
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        match branch {
            LambertBranch::Principal if x > 3.0 => {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
            LambertBranch::Principal => x.ln_1p(),
            LambertBranch::Lower => {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    if (w * w.exp() - x).abs() <= 1e-13 * (1.0 + x.abs()) {
        Ok(w)
    } else {
        Err(Error::NonConvergence {
            func: "lambert_w",
            iterations: 64,
        })
    }
}

/// Riemann-Siegel theta `θ(t) = Im log Γ(1/4 + it/2) - (t/2) ln π`.
pub fn rs_theta(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            func: "rs_theta",
            arg: t,
            detail: "requires t > 0",
        });
    }
    Ok(rs_theta_unchecked(t))
}

pub(crate) fn rs_theta_unchecked(t: f64) -> f64 {
    // The argument 1/4 + it/2 is never a pole.
    let lg = log_gamma_c(C64::new(0.25, 0.5 * t)).expect("no pole off the real axis");
    lg.im - 0.5 * t * LN_PI
}

/// `θ'(t) = Re ψ(1/4 + it/2)/2 - (ln π)/2`.
pub fn rs_theta_derivative(t: f64) -> f64 {
    let psi = digamma_c(C64::new(0.25, 0.5 * t)).expect("no pole off the real axis");
    0.5 * psi.re - 0.5 * LN_PI
}

/// Hurwitz zeta `ζ(s, a)` by Euler-Maclaurin summation.
///
/// The head is summed directly up to `M = ceil((|s| + 60)/π) + 10` terms,
/// then Bernoulli corrections are added until five consecutive corrections
/// fall below a tenth of the requested tolerance.
pub fn hurwitz_zeta(s: ComplexPoint, a: f64, tol: &Tolerance) -> Result<C64> {
    tol.validate()?;
    let s = s.to_c64();
    if s == C64::new(1.0, 0.0) {
        return Err(Error::Pole {
            func: "hurwitz_zeta",
            sigma: 1.0,
            t: 0.0,
        });
    }
    if !(a > 0.0) {
        return Err(Error::Domain {
            func: "hurwitz_zeta",
            arg: a,
            detail: "requires a > 0",
        });
    }
    let head_len = ((s.norm() + 60.0) / PI).ceil() as usize + 10;
    let mut head = C64::new(0.0, 0.0);
    for n in 0..head_len {
        head += (-s * (n as f64 + a).ln()).exp();
    }
    let x = head_len as f64 + a;
    let ln_x = x.ln();
    let x_pow = (-s * ln_x).exp();
    let mut sum = head + x_pow * x / (s - 1.0) + 0.5 * x_pow;

    // (s)_{2j-1} x^{-s-2j+1}, updated by two factors per order.
    let mut rising = s * x_pow / x;
    let mut small_run = 0;
    let mut converged = false;
    for (j, &coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate().take(tol.max_iter) {
        let term = rising * coeff;
        sum += term;
        let thresh = tol.threshold(sum.norm()) / 10.0;
        if term.norm() < thresh {
            small_run += 1;
            if small_run >= 5 {
                converged = true;
                break;
            }
        } else {
            small_run = 0;
        }
        let k = 2.0 * j as f64 + 1.0;
        rising *= (s + k) * (s + k + 1.0) / (x * x);
    }
    if !converged {
        return Err(Error::NonConvergence {
            func: "hurwitz_zeta",
            iterations: BERNOULLI_OVER_FACTORIAL.len().min(tol.max_iter),
        });
    }
    Ok(sum)
}

/// Reference value of `ζ(s)`; the ground truth for every accuracy check.
pub fn zeta_reference(s: ComplexPoint, tol: &Tolerance) -> Result<C64> {
    hurwitz_zeta(s, 1.0, tol).map_err(|e| match e {
        Error::Pole { sigma, t, .. } => Error::Pole {
            func: "zeta",
            sigma,
            t,
        },
        other => other,
    })
}

/// Anything that can be evaluated at a complex point.
pub trait Evaluator {
    fn eval(&self, s: ComplexPoint) -> Result<C64>;
}

impl<F> Evaluator for F
where
    F: Fn(ComplexPoint) -> Result<C64>,
{
    fn eval(&self, s: ComplexPoint) -> Result<C64> {
        self(s)
    }
}

/// ζ(s) through [`zeta_reference`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ZetaReference {
    pub tol: Tolerance,
}

impl Evaluator for ZetaReference {
    fn eval(&self, s: ComplexPoint) -> Result<C64> {
        zeta_reference(s, &self.tol)
    }
}

/// `Re[e^{iθ(t)} F(1/2 + it)]` for an evaluator with `F(s) = χ(s) F(1-s)` and
/// real Dirichlet coefficients. The imaginary part must vanish to
/// `1e-8 (1 + |Re|)`; otherwise the evaluator is broken and an error is
/// returned.
pub fn hardy_z<E: Evaluator + ?Sized>(t: f64, evaluator: &E) -> Result<f64> {
    let theta = rs_theta(t)?;
    let value = evaluator.eval(ComplexPoint::on_line(t))?;
    let rotated = value * C64::from_polar(1.0, theta);
    if rotated.im.abs() > 1e-8 * (1.0 + rotated.re.abs()) {
        return Err(Error::SymmetryViolation {
            t,
            re: rotated.re,
            im: rotated.im,
        });
    }
    Ok(rotated.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, eps: f64) -> bool {
        (a - b).norm() <= eps
    }

    /// Independent oracle: recurrence shift by 40 followed by Stirling.
    fn shifted_stirling(z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut w = z;
        for _ in 0..40 {
            acc += w.ln();
            w += 1.0;
        }
        stirling_log_gamma(w) - acc
    }

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(ComplexPoint::new(1.0, 0.0)).unwrap().norm() < 1e-14);
        let half = log_gamma(ComplexPoint::new(0.5, 0.0)).unwrap();
        assert!((half.re - 0.5 * PI.ln()).abs() < 1e-14);
        assert!(half.im.abs() < 1e-15);
        // Γ(5) = 24
        let five = log_gamma(ComplexPoint::new(5.0, 0.0)).unwrap();
        assert!((five.re - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn log_gamma_matches_shift_oracle() {
        let z = C64::new(0.25, 50.0);
        let got = log_gamma_c(z).unwrap();
        assert!(close(got, shifted_stirling(z), 1e-10));
        for &(re, im) in &[(0.3, 2.0), (2.5, -7.0), (0.75, 14.0), (-3.3, 1.5), (0.5, 0.0)] {
            let z = C64::new(re, im);
            assert!(close(log_gamma_c(z).unwrap(), shifted_stirling(z), 1e-11), "{z}");
        }
    }

    #[test]
    fn log_gamma_golden_values() {
        // Principal loggamma at a few points (40-digit reference values).
        let cases = [
            ((0.25, 50.0), (-78.598_880_432_701_84, 145.208_659_524_257_23)),
            ((0.5, 1000.0), (-1569.877_388_261_692, 5907.755_320_648_806)),
            ((0.25, 2500.0), (-3928.027_889_955_501, 17059.722_332_225_698)),
            ((3.7, -2.2), (0.726_446_751_624_426_5, -2.718_064_292_441_145_7)),
            ((-2.5, 0.3), (-0.432_088_892_613_201_9, -9.093_345_421_289_741)),
            ((0.1, 0.01), (2.247_665_823_230_351_3, -0.103_905_891_665_381_66)),
        ];
        for ((re, im), (lr, li)) in cases {
            let got = log_gamma_c(C64::new(re, im)).unwrap();
            let want = C64::new(lr, li);
            // relative error of exp(result) is the absolute error of the log
            assert!(close(got, want, 2e-12), "{re}+{im}i: {got} vs {want}");
        }
    }

    #[test]
    fn log_gamma_rejects_poles() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(
                log_gamma(ComplexPoint::new(x, 0.0)),
                Err(Error::Pole { .. })
            ));
        }
    }

    #[test]
    fn digamma_matches_finite_difference_of_log_gamma() {
        for &(re, im) in &[(0.25, 10.0), (2.0, 0.5), (-1.5, 3.0), (0.75, 300.0)] {
            let z = C64::new(re, im);
            let h = 1e-5;
            let fd = (log_gamma_c(z + h).unwrap() - log_gamma_c(z - h).unwrap()) / (2.0 * h);
            assert!(close(digamma_c(z).unwrap(), fd, 1e-8), "{z}");
        }
    }

    #[test]
    fn chi_reflection_and_modulus() {
        for &(sigma, t) in &[(0.3, 20.0), (0.9, 77.0), (0.5, 5.5)] {
            let s = ComplexPoint::new(sigma, t);
            let prod = chi(s).unwrap() * chi(s.reflect()).unwrap();
            assert!(close(prod, C64::new(1.0, 0.0), 1e-10));
        }
        for t in [20.0, 200.0, 2000.0] {
            let m = chi(ComplexPoint::on_line(t)).unwrap().norm();
            assert!((m - 1.0).abs() < 1e-10, "t={t}: {m}");
        }
    }

    #[test]
    fn chi_against_asymptotic_band() {
        let exact = chi(ComplexPoint::new(0.3, 30.0)).unwrap();
        let approx = chi_asymptotic(0.3, 30.0).unwrap();
        assert!((exact - approx).norm() / exact.norm() <= 5.0 / 30.0);
    }

    #[test]
    fn chi_rejects_undefined_points() {
        for x in [1.0, 3.0, 2.0, 0.0, -2.0] {
            assert!(chi(ComplexPoint::new(x, 0.0)).is_err(), "{x}");
        }
        assert!(chi(ComplexPoint::new(-1.0, 0.0)).is_ok());
    }

    #[test]
    fn chi_overflow_is_an_error() {
        assert!(matches!(
            chi(ComplexPoint::new(-400.0, 3000.0)),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn chi_log_derivative_matches_finite_difference() {
        for &(sigma, t) in &[(0.5, 88.0), (0.2, 14.0), (0.9, 600.0)] {
            let s = C64::new(sigma, t);
            let h = 1e-6;
            let ratio = chi_c(s + h).unwrap() / chi_c(s - h).unwrap();
            let fd = ratio.ln() / (2.0 * h);
            let got = chi_log_derivative_c(s).unwrap();
            assert!(close(got, fd, 1e-6), "{s}: {got} vs {fd}");
        }
    }

    #[test]
    fn chi_asymptotic_domain_and_modulus() {
        assert!(chi_asymptotic(0.5, 6.0).is_err());
        for t in [7.0, 100.0, 4321.0] {
            assert!((chi_asymptotic(0.5, t).unwrap().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lambert_w_trivial_values() {
        assert_eq!(lambert_w(LambertBranch::Principal, 0.0).unwrap(), 0.0);
        assert!((lambert_w(LambertBranch::Principal, E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w(LambertBranch::Lower, -INV_E).unwrap() + 1.0).abs() < 1e-7);
        assert!((lambert_w(LambertBranch::Principal, -INV_E).unwrap() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn lambert_w_branch_ranges() {
        for x in [-0.3678, -0.2, -1e-3, -1e-12] {
            let w0 = lambert_w(LambertBranch::Principal, x).unwrap();
            let wm = lambert_w(LambertBranch::Lower, x).unwrap();
            assert!(w0 >= -1.0 && wm <= -1.0);
            assert!((w0 * w0.exp() - x).abs() <= 1e-13 * (1.0 + x.abs()));
            assert!((wm * wm.exp() - x).abs() <= 1e-13 * (1.0 + x.abs()));
        }
        for x in [0.5, 3.0, 10.0, 1e6, 1e300] {
            let w = lambert_w(LambertBranch::Principal, x).unwrap();
            assert!(((w * w.exp() - x) / x).abs() <= 1e-13, "{x}");
        }
    }

    #[test]
    fn lambert_w_domain_errors() {
        assert!(lambert_w(LambertBranch::Principal, -0.5).is_err());
        assert!(lambert_w(LambertBranch::Lower, 0.0).is_err());
        assert!(lambert_w(LambertBranch::Lower, 0.1).is_err());
        assert!(lambert_w(LambertBranch::Lower, f64::NAN).is_err());
    }

    #[test]
    fn theta_reference_values() {
        assert!((rs_theta(100.0).unwrap() - 87.972_165_231_787_22).abs() < 1e-10);
        assert!((rs_theta(1000.0).unwrap() - 2034.546_428_038_031_6).abs() < 1e-9);
        assert!(rs_theta(17.845_599_540_410_86).unwrap().abs() < 1e-9);
        assert!(rs_theta(0.0).is_err());
    }

    #[test]
    fn theta_derivative_matches_difference() {
        for t in [12.0, 150.0, 1500.0] {
            let fd = (rs_theta_unchecked(t + 1e-5) - rs_theta_unchecked(t - 1e-5)) / 2e-5;
            assert!((rs_theta_derivative(t) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn zeta_reference_known_values() {
        let tol = Tolerance::default();
        let z2 = zeta_reference(ComplexPoint::new(2.0, 0.0), &tol).unwrap();
        assert!((z2 - PI * PI / 6.0).norm() < 1e-10);
        let z0 = zeta_reference(ComplexPoint::new(0.0, 0.0), &tol).unwrap();
        assert!((z0 + 0.5).norm() < 1e-10);
        let first = zeta_reference(ComplexPoint::on_line(14.134_725_141_734_694), &tol).unwrap();
        assert!(first.norm() < 1e-6);
        assert!(matches!(
            zeta_reference(ComplexPoint::new(1.0, 0.0), &tol),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn zeta_reference_golden_values_on_line() {
        let tol = Tolerance::default();
        let cases = [
            (100.0, (2.692_619_885_681_324, -0.020_386_029_602_598_16)),
            (500.0, (-0.396_256_507_275_146_6, -1.418_126_741_345_370_8)),
            (1200.0, (1.397_452_530_388_198_7, 0.064_404_960_124_029_68)),
        ];
        for (t, (re, im)) in cases {
            let z = zeta_reference(ComplexPoint::on_line(t), &tol).unwrap();
            assert!(close(z, C64::new(re, im), 1e-11), "t={t}: {z}");
        }
    }

    #[test]
    fn zeta_reference_against_dirichlet_sum_at_sigma_two() {
        let tol = Tolerance::default();
        for t in [0.5, 3.0, 40.0] {
            let s = ComplexPoint::new(2.0, t);
            let sc = s.to_c64();
            let cutoff = 200_000usize;
            let mut direct = C64::new(0.0, 0.0);
            for n in 1..=cutoff {
                direct += (-sc * (n as f64).ln()).exp();
            }
            // integral tail ∫_{M}^{∞} x^{-s} dx plus the half endpoint term
            let m = cutoff as f64;
            let tail = (-(sc - 1.0) * m.ln()).exp() / (sc - 1.0) - 0.5 * (-sc * m.ln()).exp();
            let want = direct + tail;
            assert!(close(zeta_reference(s, &tol).unwrap(), want, 1e-8), "t={t}");
        }
    }

    #[test]
    fn hardy_z_vanishes_at_first_zero_and_flags_asymmetric_evaluators() {
        let reference = ZetaReference::default();
        assert!(hardy_z(14.134_725_141_734_694, &reference).unwrap().abs() < 1e-8);
        let broken = |s: ComplexPoint| -> Result<C64> { Ok(C64::new(1.0, 0.0) + s.to_c64() * 0.0) };
        assert!(matches!(
            hardy_z(30.0, &broken),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(0.0, 0.0, 10).is_err());
        assert!(Tolerance::new(1e-10, 0.0, 0).is_err());
        assert!(Tolerance::new(-1.0, 1.0, 1).is_err());
        assert!(Tolerance::new(0.0, 1e-12, 5).is_ok());
    }
}
