//! Small bracketing solvers used by the atlas and the tracker.

/// Root of `f` in `[a, b]` where `f(a)` and `f(b)` have opposite signs.
///
/// Illinois-modified regula falsi with a bisection fallback; returns the
/// bracket midpoint once its width is below `xtol`.
pub fn bracket_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let mut side = 0i8;
    for i in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        // every fourth step is a plain bisection to guarantee shrinkage
        let c = if i % 4 == 3 {
            0.5 * (a + b)
        } else {
            let c = (a * fb - b * fa) / (fb - fa);
            if c > a.min(b) && c < a.max(b) {
                c
            } else {
                0.5 * (a + b)
            }
        };
        let fc = f(c);
        if fc == 0.0 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(0.5 * (a + b))
}

/// Maximiser of `f` on `[a, b]`: a coarse scan with `samples` points followed
/// by golden-section refinement around the best sample.
pub fn maximize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, samples: usize, xtol: f64) -> (f64, f64) {
    let samples = samples.max(3);
    let h = (b - a) / (samples - 1) as f64;
    let mut best = (a, f(a));
    for i in 1..samples {
        let x = a + h * i as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut lo = (best.0 - h).max(a);
    let mut hi = (best.0 + h).min(b);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let (x, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if v >= best.1 {
        (x, v)
    } else {
        best
    }
}
