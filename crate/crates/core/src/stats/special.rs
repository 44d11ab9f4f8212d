//! Special functions: regularized incomplete beta, Student t and the
//! noncentral t distribution.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::{erfc, exp, fabs, lgamma, log, pow, sqrt};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Modified Lentz continued fraction for the incomplete beta.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student t CDF with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * inc_beta(x, 0.5 * df, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_c = lgamma(0.5 * (df + 1.0)) - lgamma(0.5 * df) - 0.5 * log(df * PI);
    exp(ln_c - 0.5 * (df + 1.0) * log(1.0 + t * t / df))
}

/// Quantile of Student t: the `t` with `t_cdf(t, df) = p`.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t_quantile needs p in (0, 1)");
    if p < 0.5 {
        return -t_quantile(1.0 - p, df);
    }
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    // Newton steps, falling back to bisection when a step leaves the bracket.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = t_cdf(t, df) - p;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - f / t_pdf(t, df);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if fabs(next - t) <= 1e-14 * (1.0 + fabs(t)) {
            return next;
        }
        t = next;
    }
    t
}

/// CDF of the noncentral t distribution, `P(T <= t)` for `T ~ t(df, delta)`.
///
/// Series in incomplete beta functions (Lenth's algorithm AS 243), with a
/// normal approximation once `exp(-delta^2 / 2)` underflows.
pub fn noncentral_t_cdf(t: f64, df: f64, delta: f64) -> f64 {
    const ERRMAX: f64 = 1e-13;
    const ITRMAX: u32 = 20_000;
    if delta == 0.0 {
        return t_cdf(t, df);
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let (tt, del, negate) = if t < 0.0 { (-t, -delta, true) } else { (t, delta, false) };
    let lambda = del * del;
    if 0.5 * lambda > 700.0 {
        // Far noncentrality: Abramowitz-Stegun 26.7.10.
        let z = (tt * (1.0 - 1.0 / (4.0 * df)) - del) / sqrt(1.0 + tt * tt / (2.0 * df));
        let p = normal_cdf(z);
        return if negate { 1.0 - p } else { p };
    }
    let x = tt * tt / (tt * tt + df);
    let mut tnc = 0.0;
    if x > 0.0 {
        let mut p = 0.5 * exp(-0.5 * lambda);
        let mut q = sqrt(2.0 / PI) * p * del;
        let mut s = 0.5 - p;
        let mut a = 0.5;
        let b = 0.5 * df;
        let rxb = pow(1.0 - x, b);
        let albeta = 0.5 * log(PI) + lgamma(b) - lgamma(0.5 + b);
        let mut xodd = inc_beta(x, a, b);
        let mut godd = 2.0 * rxb * exp(a * log(x) - albeta);
        let mut xeven = 1.0 - rxb;
        let mut geven = b * x * rxb;
        tnc = p * xodd + q * xeven;
        let mut en = 1.0;
        loop {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * en);
            q *= lambda / (2.0 * en + 1.0);
            s -= p;
            en += 1.0;
            tnc += p * xodd + q * xeven;
            let errbd = 2.0 * s * (xodd - godd);
            // Past the Poisson mode the error bound is reliable.
            if (fabs(errbd) <= ERRMAX && en > 0.5 * lambda) || en > f64::from(ITRMAX) {
                break;
            }
        }
    }
    tnc += normal_cdf(-del);
    let tnc = tnc.clamp(0.0, 1.0);
    if negate {
        1.0 - tnc
    } else {
        tnc
    }
}
