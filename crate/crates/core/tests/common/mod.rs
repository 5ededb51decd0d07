//! Reference computations shared by the integration tests. Nothing in here
//! calls into the closed forms under test; everything is brute force.

#![allow(dead_code)]

use jadce::harness::ResultTable;
use jadce::C64;
use statrs::function::erf::erfc;

/// `ln Phi(x)`; continued fraction for the Mills ratio in the far lower tail.
pub fn ln_phi(x: f64) -> f64 {
    if x > -20.0 {
        return (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln();
    }
    // Lentz evaluation of R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))), Phi(-t) = phi(t) R(t)
    let t = -x;
    let tiny = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64;
        d = t + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = t + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -0.5 * t * t - 0.5 * (2.0 * std::f64::consts::PI).ln() - f.ln()
}

/// `ln(Phi(a) - Phi(b))` for `b < a`.
pub fn ln_phi_diff(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        let (la, lb) = (ln_phi(a), ln_phi(b));
        la + (-(lb - la).exp()).ln_1p()
    } else if b >= 0.0 {
        ln_phi_diff(-b, -a)
    } else {
        (-(ln_phi(b).exp() + ln_phi(-a).exp())).ln_1p()
    }
}

fn simpson<const N: usize>(a: f64, b: f64, fa: [f64; N], fm: [f64; N], fb: [f64; N]) -> [f64; N] {
    let h = (b - a) / 6.0;
    std::array::from_fn(|i| h * (fa[i] + 4.0 * fm[i] + fb[i]))
}

#[allow(clippy::too_many_arguments)]
fn adapt<const N: usize>(
    f: &impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
    tol: f64,
    depth: u32,
) -> [f64; N] {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = (0..N).map(|i| (left[i] + right[i] - whole[i]).abs()).fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        return std::array::from_fn(|i| left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0);
    }
    let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    std::array::from_fn(|i| l[i] + r[i])
}

/// Adaptive Simpson quadrature of a vector-valued integrand over `[a, b]`,
/// started from `panels` equal sub-intervals.
pub fn integrate<const N: usize>(f: impl Fn(f64) -> [f64; N], a: f64, b: f64, panels: usize, tol: f64) -> [f64; N] {
    let w = (b - a) / panels as f64;
    let mut total = [0.0; N];
    for p in 0..panels {
        let lo = a + w * p as f64;
        let hi = lo + w;
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(lo, hi, fa, fm, fb);
        let part = adapt(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 30);
        for i in 0..N {
            total[i] += part[i];
        }
    }
    total
}

/// Posterior mean and variance of `x ~ N(u, v/2)` given that
/// `x + w`, `w ~ N(0, sigma2/2)`, fell in `(lo, hi]`, by quadrature.
pub fn truncated_posterior(u: f64, v: f64, sigma2: f64, lo: f64, hi: f64) -> (f64, f64) {
    let sv = (0.5 * v).sqrt();
    let sw = (0.5 * sigma2).sqrt();
    let log_density = |x: f64| -0.5 * ((x - u) / sv).powi(2) + ln_phi_diff((hi - x) / sw, (lo - x) / sw);

    // log-concave: ternary search for the mode
    let spread = (sv * sv + sw * sw).sqrt();
    let (mut a, mut b) = (u.min(lo) - 10.0 * spread, u.max(hi) + 10.0 * spread);
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if log_density(m1) < log_density(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let mode = 0.5 * (a + b);
    let peak = log_density(mode);

    // posterior sd never exceeds the prior sd
    let half = 40.0 * sv;
    let moments = integrate(
        |x| {
            let p = (log_density(x) - peak).exp();
            let d = x - mode;
            [p, p * d, p * d * d]
        },
        mode - half,
        mode + half,
        400,
        1e-10 * sv,
    );
    let mean = moments[1] / moments[0];
    let var = moments[2] / moments[0] - mean * mean;
    (mode + mean, var)
}

/// Bayes posterior of a scalar spike-and-slab prior
/// `(1 - lambda) delta_0 + lambda CN(0, psi)` observed through `CN(0, tau)`
/// noise: `(P(slab | r), E[x | r])`, straight from the two Gaussian densities.
pub fn spike_slab_posterior(r: C64, tau: f64, lambda: f64, psi: f64) -> (f64, C64) {
    let e = r.norm_sqr();
    let slab = lambda * (-e / (tau + psi)).exp() / (std::f64::consts::PI * (tau + psi));
    let spike = (1.0 - lambda) * (-e / tau).exp() / (std::f64::consts::PI * tau);
    let pi = slab / (slab + spike);
    (pi, r * (pi * psi / (psi + tau)))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// One-sided 95% normal quantile.
pub const Z95: f64 = 1.644_853_626_951_472_2;

/// `(mean, stderr)` of a table cell; panics when absent.
pub fn cell(table: &ResultTable, value: f64, algorithm: &str, metric: &str) -> (f64, f64) {
    let row = table.get(value, algorithm, metric).unwrap_or_else(|| panic!("no row for {algorithm}/{metric} at {value}"));
    (row.mean, row.stderr)
}

/// True when `a - b > 0` clears the one-sided 95% bound, treating the two
/// estimates as independent.
pub fn significantly_greater(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 - b.0 > Z95 * (a.1 * a.1 + b.1 * b.1).sqrt()
}
