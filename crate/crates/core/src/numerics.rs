//! Numeric kernels shared across the crate: compensated summation,
//! power-law partial sums, Hurwitz zeta, regression and interpolation.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use std::f64::consts::LN_2;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from a value already split into a leading part and a correction.
    pub fn from_parts(hi: f64, lo: f64) -> Self {
        Self { sum: hi, comp: lo }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Leading part and correction term, `value ≈ hi + lo` to about 106 bits.
    pub fn parts(&self) -> (f64, f64) {
        let hi = self.sum + self.comp;
        let lo = self.comp - (hi - self.sum);
        (hi, lo)
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

const CHUNK: u64 = 4096;

/// Sum of `f(i)` over `lo..=hi`, split into fixed chunks that may run on
/// worker threads. Chunk partials are reduced in index order, so the result
/// does not depend on the number of workers.
pub fn range_sum<F>(lo: u64, hi: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    if hi < lo {
        return 0.0;
    }
    let chunks = (hi - lo) / CHUNK + 1;
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let a = lo + c * CHUNK;
            let b = a.saturating_add(CHUNK - 1).min(hi);
            (a..=b).map(&f).collect::<CompensatedSum>().value()
        })
        .collect();
    partials.into_iter().collect::<CompensatedSum>().value()
}

// B_{2k} / (2k)! for k = 1..=6.
const EM_COEFFS: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

/// Rising factorial p (p+1) ... (p+m-1).
fn rising(p: f64, m: usize) -> f64 {
    (0..m).map(|k| p + k as f64).product()
}

/// Integral of (x + h)^(-p) over [a, b], stable when b is close to a.
pub fn power_integral(p: f64, h: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let u = a + h;
    let rel = (b - a) / u;
    let q = 1.0 - p;
    if q.abs() < 1e-14 {
        rel.ln_1p()
    } else {
        u.powf(q) * (q * rel.ln_1p()).exp_m1() / q
    }
}

/// Euler–Maclaurin evaluation of sum_{i=a}^{b} (i + h)^(-p) for a + h ≥ 32.
fn power_sum_em(p: f64, h: f64, a: f64, b: f64) -> f64 {
    let f = |x: f64| (x + h).powf(-p);
    let mut acc = CompensatedSum::new();
    acc.add(power_integral(p, h, a, b));
    acc.add(0.5 * (f(a) + f(b)));
    for (k, c) in EM_COEFFS.iter().enumerate() {
        let m = 2 * k + 1;
        // f^{(m)}(x) = (-1)^m rising(p, m) (x+h)^{-p-m}, m odd.
        let r = rising(p, m);
        let db = -r * (b + h).powf(-p - m as f64);
        let da = -r * (a + h).powf(-p - m as f64);
        acc.add(c * (db - da));
    }
    acc.value()
}

const DIRECT_HEAD: u64 = 32;

/// sum_{i=a}^{b} (i + h)^(-p) for integers a ≤ b with a + h > 0.
///
/// Short ranges are summed directly; long ranges sum a short head directly
/// and the rest by Euler–Maclaurin (relative error below 1e-15 once the
/// head has been peeled off).
pub fn power_sum(p: f64, h: f64, a: u64, b: u64) -> f64 {
    if b < a {
        return 0.0;
    }
    let head_end = if (a as f64 + h) < DIRECT_HEAD as f64 {
        (DIRECT_HEAD as f64 - h).ceil().max(a as f64) as u64
    } else {
        a
    };
    if b - a < 64 || head_end >= b {
        return (a..=b).map(|i| (i as f64 + h).powf(-p)).collect::<CompensatedSum>().value();
    }
    let mut acc: CompensatedSum = (a..head_end).map(|i| (i as f64 + h).powf(-p)).collect();
    acc.add(power_sum_em(p, h, head_end as f64, b as f64));
    acc.value()
}

/// Same sum for real endpoints far beyond the exact integer range; only the
/// Euler–Maclaurin route is used.
pub fn power_sum_real(p: f64, h: f64, a: f64, b: f64) -> f64 {
    if b < a {
        return 0.0;
    }
    power_sum_em(p, h, a, b)
}

/// Hurwitz zeta sum_{k≥0} (a + k)^(-s). Infinite for s ≤ 1.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0, "hurwitz_zeta needs a > 0");
    if s <= 1.0 {
        return f64::INFINITY;
    }
    let mut acc = CompensatedSum::new();
    let mut x = a;
    while x < DIRECT_HEAD as f64 {
        acc.add(x.powf(-s));
        x += 1.0;
    }
    acc.add(x.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * x.powf(-s));
    for (k, c) in EM_COEFFS.iter().enumerate() {
        let m = 2 * k + 1;
        acc.add(c * rising(s, m) * x.powf(-s - m as f64));
    }
    acc.value()
}

/// Riemann zeta for s > 1.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Natural log of a big integer, without overflowing through f64.
pub fn ln_biguint(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().map(f64::ln).unwrap_or(f64::INFINITY)
    } else {
        let shift = bits - 64;
        let top: BigUint = n >> shift;
        top.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * LN_2
    }
}

/// ln(e^a + e^b).
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln sum_i e^{x_i}.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_infinite() {
        return max;
    }
    let s: CompensatedSum = xs.iter().map(|x| (x - max).exp()).collect();
    max + s.value().ln()
}

/// Rational approximation p/q of `alpha` with q ≤ 16, when one is exact to
/// 1e-12.
pub(crate) fn small_rational(alpha: f64) -> Option<(u32, u32)> {
    for q in 1..=16u32 {
        let pq = alpha * q as f64;
        let p = pq.round();
        if (pq - p).abs() < 1e-12 && (0.0..4096.0).contains(&p) {
            return Some((p as u32, q));
        }
    }
    None
}

/// floor(n^alpha) and whether n^alpha is an integer. `None` on overflow of
/// u64. Rational exponents with small denominators are handled exactly.
pub fn pow_floor(n: u64, alpha: f64) -> Option<(u64, bool)> {
    if n == 0 {
        return Some((0, true));
    }
    if let Some((p, q)) = small_rational(alpha) {
        let base = BigUint::from(n).pow(p);
        let root = base.nth_root(q);
        let exact = root.pow(q) == base;
        return root.to_u64().map(|r| (r, exact));
    }
    let v = (n as f64).powf(alpha);
    if !v.is_finite() || v >= u64::MAX as f64 {
        return None;
    }
    let f = v.floor();
    Some((f as u64, f == v))
}

/// ceil(n^alpha), `None` on overflow.
pub fn pow_ceil(n: u64, alpha: f64) -> Option<u64> {
    let (f, exact) = pow_floor(n, alpha)?;
    if exact {
        Some(f)
    } else {
        f.checked_add(1)
    }
}

/// Least-squares line through (x, y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares. `None` when fewer than two points or the x
/// values do not vary.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        residual_rms: (sse / nf).sqrt(),
        slope_stderr,
    })
}

/// Barycentric interpolation on Chebyshev points of the second kind.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    /// `m ≥ 2` nodes on [-1, 1], ordered from -1 to 1.
    pub fn new(m: usize) -> Self {
        assert!(m >= 2);
        let nodes = (0..m)
            .map(|k| -(std::f64::consts::PI * k as f64 / (m - 1) as f64).cos())
            .collect();
        let weights = (0..m)
            .map(|k| {
                let w = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == m - 1 {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node positions mapped to [lo, hi].
    pub fn nodes_on(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        self.nodes
            .iter()
            .map(move |t| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t)
    }

    /// Interpolant of `values` (sampled at `nodes_on(lo, hi)`) evaluated at x.
    pub fn eval(&self, lo: f64, hi: f64, values: &[f64], x: f64) -> f64 {
        let t = (2.0 * x - lo - hi) / (hi - lo);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((node, w), v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let diff = t - node;
            if diff == 0.0 {
                return *v;
            }
            let c = w / diff;
            num += c * v;
            den += c;
        }
        num / den
    }
}
