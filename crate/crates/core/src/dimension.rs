//! Dimension estimates: truncated Bowen equations, restricted cover sums,
//! box counting and the closed-form predictions.

use crate::error::{invalid, Error, Result};
use crate::ifs_core::{BoundKind, Continuants, DSystem, PowerLaw, SystemKind};
use crate::numerics::{hurwitz_zeta, linear_fit, log_sum_exp, range_sum, Chebyshev};
use crate::restrictions::{count_restricted_words, enumerate_restricted_words, min_next_table, Phi};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BowenRoot,
    CoverSum,
    BoxCount,
    ClosedForm,
    LocalDimension,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub method: Method,
    pub bracket: Option<(f64, f64)>,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl DimensionEstimate {
    fn new(value: f64, method: Method) -> Self {
        Self { value, method, bracket: None, diagnostics: BTreeMap::new(), flags: Vec::new() }
    }

    fn diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

const GROWTH_CAP: f64 = 64.0;
const MAX_BISECTIONS: usize = 400;

/// Root of a strictly decreasing `f` with f(0) > 1 on [0, s_hi], where s_hi
/// doubles from 1 up to the growth cap. Returns (root, lo, hi, residual).
fn solve_unit_level(f: impl Fn(f64) -> f64, tol: f64) -> Result<(f64, f64, f64, f64)> {
    let mut hi = 1.0;
    while f(hi) >= 1.0 {
        hi *= 2.0;
        if hi > GROWTH_CAP {
            return Err(Error::NoRoot(format!("sum stays >= 1 up to s = {GROWTH_CAP}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let root = 0.5 * (lo + hi);
        if hi - lo <= tol && (f(root) - 1.0).abs() <= tol {
            break;
        }
    }
    let root = 0.5 * (lo + hi);
    Ok((root, lo, hi, f(root) - 1.0))
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return invalid(format!("tol must be positive, got {tol}"));
    }
    Ok(())
}

/// Root s of sum_i r_i^s = 1 over explicit ratios.
pub fn bowen_root_ratios(ratios: &[f64], tol: f64) -> Result<DimensionEstimate> {
    check_tol(tol)?;
    if ratios.iter().any(|&r| !(r > 0.0)) {
        return invalid("ratios must be positive");
    }
    if ratios.iter().filter(|&&r| r < 1.0).count() < 2 {
        return invalid("at least two ratios below 1 are required");
    }
    let lns: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let f = |s: f64| lns.iter().map(|l| (s * l).exp()).sum::<f64>();
    let (root, lo, hi, residual) = solve_unit_level(f, tol)?;
    let mut est = DimensionEstimate::new(root, Method::BowenRoot).diag("residual", residual);
    est.bracket = Some((lo, hi));
    Ok(est)
}

/// sum_{i=k}^{m} law(i)^s.
fn law_power_sum(law: &PowerLaw, k: u64, m: u64, s: f64) -> f64 {
    law.powf(s).sum(k, m)
}

/// Root s of sum_{i=k}^{m} r_i^s = 1 with r the chosen derivative bound.
pub fn bowen_root(system: &DSystem, bound: BoundKind, k: u64, m: u64, tol: f64) -> Result<DimensionEstimate> {
    check_tol(tol)?;
    if k < 1 || k > m {
        return invalid(format!("bowen root needs 1 <= k <= m, got k = {k}, m = {m}"));
    }
    if let Some(limit) = system.map_limit() {
        if m > limit {
            return Err(Error::DigitOutOfTable { digit: m, available: limit });
        }
    }
    let law = system.bound_law(bound);
    if law.eval(k) >= 1.0 {
        return Err(Error::NoRoot(format!(
            "ratio at index {k} is {} >= 1, so the sum never drops below 1",
            law.eval(k)
        )));
    }
    if m == k {
        return invalid("at least two ratios below 1 are required");
    }
    let f = |s: f64| law_power_sum(&law, k, m, s);
    let (root, lo, hi, residual) = solve_unit_level(f, tol)?;
    let mut est = DimensionEstimate::new(root, Method::BowenRoot)
        .diag("residual", residual)
        .diag("k", k as f64)
        .diag("m", m as f64);
    est.bracket = Some((lo, hi));
    Ok(est)
}

/// Root of sum_{i≥k} r_i^s = 1. The sum up to `m0` is explicit and the rest
/// is bracketed by integrals, so the returned bracket is certified.
pub fn bowen_root_infinite(system: &DSystem, bound: BoundKind, k: u64, m0: u64, tol: f64) -> Result<DimensionEstimate> {
    check_tol(tol)?;
    if k < 1 || m0 < k {
        return invalid("infinite bowen root needs 1 <= k <= m0");
    }
    if system.map_limit().is_some() {
        return invalid("infinite bowen root needs an unbounded map family");
    }
    let law = system.bound_law(bound);
    if law.eval(k) >= 1.0 {
        return Err(Error::NoRoot(format!("ratio at index {k} is >= 1")));
    }
    let floor_s = 1.0 / law.exponent;
    let head = |s: f64| law_power_sum(&law, k, m0, s);
    let tail_int = |s: f64, from: f64| {
        let p = law.powf(s);
        if p.exponent <= 1.0 {
            f64::INFINITY
        } else {
            p.coef * (from + p.shift).powf(1.0 - p.exponent) / (p.exponent - 1.0)
        }
    };
    // Decreasing integrand: ∫_{m0+1}^∞ ≤ tail ≤ ∫_{m0}^∞.
    let lower_sum = |s: f64| if s <= floor_s { f64::INFINITY } else { head(s) + tail_int(s, (m0 + 1) as f64) };
    let upper_sum = |s: f64| if s <= floor_s { f64::INFINITY } else { head(s) + tail_int(s, m0 as f64) };
    let exact = |s: f64| {
        if s <= floor_s {
            f64::INFINITY
        } else {
            let p = law.powf(s);
            p.coef * hurwitz_zeta(p.exponent, k as f64 + p.shift)
        }
    };
    let (lo_root, ..) = solve_unit_level(lower_sum, tol)?;
    let (hi_root, ..) = solve_unit_level(upper_sum, tol)?;
    let (root, _, _, residual) = solve_unit_level(exact, tol)?;
    let mut est = DimensionEstimate::new(root, Method::BowenRoot)
        .diag("residual", residual)
        .diag("k", k as f64)
        .diag("m0", m0 as f64);
    est.bracket = Some((lo_root - tol, hi_root + tol));
    est.flags.push("infinite-tail".into());
    Ok(est)
}

/// Lower bound from ξ and upper bound from λ for the subsystem on k..=m.
/// The upper bound is capped at 1 (and flagged) when λ_k ≥ 1.
pub fn subsystem_dim_bounds(
    system: &DSystem,
    k: u64,
    m: u64,
    tol: f64,
) -> Result<(DimensionEstimate, DimensionEstimate)> {
    let lower = bowen_root(system, BoundKind::Xi, k, m, tol)?;
    let upper = match bowen_root(system, BoundKind::Lambda, k, m, tol) {
        Ok(u) if u.value <= 1.0 => u,
        Ok(_) | Err(Error::NoRoot(_)) => {
            let mut capped = DimensionEstimate::new(1.0, Method::BowenRoot);
            capped.flags.push("capped-at-one".into());
            capped
        }
        Err(e) => return Err(e),
    };
    Ok((lower, upper))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMethod {
    /// Every word enumerated with exact cylinder lengths.
    Exact,
    /// Product structure summed level by level (exact for affine maps,
    /// Chebyshev interpolation of the continuant tail for Gauss maps).
    Transfer,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSum {
    pub depth: usize,
    pub s: f64,
    pub cap: u64,
    pub value: f64,
    pub ln_value: f64,
    #[serde(serialize_with = "crate::report::serialize_u128")]
    pub words: u128,
    pub method: CoverMethod,
    /// depth · sum_{i>cap} λ_i^s / sum_{i≤cap} λ_i^s.
    pub tail_ratio: f64,
    pub warning: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverOptions {
    pub strict: bool,
    /// Enumerate words one by one up to this many.
    pub exact_limit: u128,
    /// Chebyshev nodes on [0, 1] for the Gauss transfer.
    pub nodes: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self { strict: true, exact_limit: 200_000, nodes: 24 }
    }
}

pub const DEFAULT_COVER_CAP: u64 = 10_000;
const TAIL_WARN: f64 = 0.01;

/// sum over restricted words of length `depth` of |C_w|^s.
pub fn cover_sum(system: &DSystem, phi: &Phi, depth: usize, s: f64, cap: u64) -> Result<CoverSum> {
    let mut all = cover_sums(system, phi, depth, s, cap, &CoverOptions::default())?;
    Ok(all.pop().expect("depth >= 1"))
}

/// Cover sums for every depth 1..=max_depth.
pub fn cover_sums(
    system: &DSystem,
    phi: &Phi,
    max_depth: usize,
    s: f64,
    cap: u64,
    opts: &CoverOptions,
) -> Result<Vec<CoverSum>> {
    if !(s > 0.0 && s <= 1.0) {
        return invalid(format!("cover sum exponent must lie in (0, 1], got {s}"));
    }
    if max_depth == 0 || cap == 0 {
        return invalid("cover sums need depth >= 1 and cap >= 1");
    }
    if max_depth > system.depth_cap() {
        return Err(Error::DepthCapExceeded { depth: max_depth, cap: system.depth_cap() });
    }
    if let Some(limit) = system.map_limit() {
        if cap > limit {
            return Err(Error::DigitOutOfTable { digit: cap, available: limit });
        }
    }
    let lam = system.lambda_law().powf(s);
    let inside = lam.sum(1, cap);
    let outside = lam.tail(cap + 1);
    let per_level_tail = outside / inside;

    let mut transfer: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(max_depth);
    for depth in 1..=max_depth {
        let words = count_restricted_words(phi, depth, cap, opts.strict)?;
        let (ln_value, method) = if words <= opts.exact_limit {
            (exact_cover_ln(system, phi, depth, s, cap, opts.strict)?, CoverMethod::Exact)
        } else {
            if transfer.is_none() {
                transfer = Some(match system.kind() {
                    SystemKind::Gauss => gauss_transfer_ln(phi, max_depth, s, cap, opts)?,
                    _ => affine_transfer_ln(system, phi, max_depth, s, cap, opts.strict)?,
                });
            }
            (transfer.as_ref().expect("computed")[depth - 1], CoverMethod::Transfer)
        };
        let tail_ratio = depth as f64 * per_level_tail;
        let warning = (tail_ratio > TAIL_WARN).then(|| {
            format!("digit cap {cap} truncation may exceed 1% of the sum (tail ratio {tail_ratio:.3e})")
        });
        out.push(CoverSum {
            depth,
            s,
            cap,
            value: ln_value.exp(),
            ln_value,
            words,
            method,
            tail_ratio,
            warning,
        });
    }
    Ok(out)
}

fn exact_cover_ln(system: &DSystem, phi: &Phi, depth: usize, s: f64, cap: u64, strict: bool) -> Result<f64> {
    let mut terms = Vec::new();
    for w in enumerate_restricted_words(phi, depth, cap, strict)? {
        let ln_len = match system.kind() {
            SystemKind::Gauss => Continuants::from_digits(w.digits()).ln_cylinder_length(),
            _ => w.digits().iter().map(|&a| system.ln_ratio(a).expect("affine kind")).sum(),
        };
        terms.push(s * ln_len);
    }
    Ok(log_sum_exp(&terms))
}

/// Affine maps: |C_w|^s = prod r_{a_i}^s, summed by suffix sums.
fn affine_transfer_ln(system: &DSystem, phi: &Phi, depth: usize, s: f64, cap: u64, strict: bool) -> Result<Vec<f64>> {
    let n = cap as usize;
    let min_next = min_next_table(phi, cap, strict)?;
    let w: Vec<f64> = (0..=n)
        .map(|a| if a == 0 { 0.0 } else { (s * system.ln_ratio(a as u64).expect("affine kind")).exp() })
        .collect();
    let mut g = vec![1.0; n + 1];
    let mut ln_scale = 0.0;
    let mut totals = Vec::with_capacity(depth);
    for level in 1..=depth {
        let total: f64 = (1..=n).map(|a| w[a] * g[a]).sum();
        totals.push(total.ln() + ln_scale);
        if level == depth {
            break;
        }
        let mut suffix = vec![0.0; n + 2];
        for a in (1..=n).rev() {
            suffix[a] = suffix[a + 1] + w[a] * g[a];
        }
        let mut next: Vec<f64> = (0..=n)
            .map(|a| {
                let m = min_next[a];
                if a == 0 || m > cap {
                    0.0
                } else {
                    suffix[m as usize]
                }
            })
            .collect();
        let max = next.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            next.iter_mut().for_each(|v| *v /= max);
            ln_scale += max.ln();
        }
        g = next;
    }
    Ok(totals)
}

/// Gauss maps: |C_w|^s = prod (a_k + y_{k-1})^(-2s) (1 + y_n)^(-s) with
/// y_k = 1/(a_k + y_{k-1}), y_0 = 0. Tail sums
/// F_r(b, y) = sum_{j=b}^{cap} (j + y)^(-2s) F_{r-1}(Φ⁺(j), 1/(j + y))
/// are tabulated at Chebyshev nodes in y ∈ [0, 1]; the depth-r total is F_r(1, 0).
fn gauss_transfer_ln(phi: &Phi, depth: usize, s: f64, cap: u64, opts: &CoverOptions) -> Result<Vec<f64>> {
    let n = cap as usize;
    let cheb = Chebyshev::new(opts.nodes.max(4));
    let nodes: Vec<f64> = cheb.nodes_on(0.0, 1.0).collect();
    let m = nodes.len();
    let min_next = min_next_table(phi, cap, opts.strict)?;
    // f[b * m + k] = F_r(b, nodes[k]) for b in 1..=cap+1; F(cap+1, ·) = 0.
    let mut f: Vec<f64> = Vec::new();
    let mut ln_scale = 0.0;
    let mut totals = Vec::with_capacity(depth);
    for level in 1..=depth {
        let prev = std::mem::take(&mut f);
        // terms[j * m + k] = (j + y_k)^(-2s) G_{r-1}(j, 1/(j + y_k))
        let mut terms = vec![0.0; (n + 2) * m];
        terms
            .chunks_mut(m)
            .enumerate()
            .skip(1)
            .take(n)
            .for_each(|(j, row)| {
                for (k, slot) in row.iter_mut().enumerate() {
                    let x = j as f64 + nodes[k];
                    let inner = 1.0 / x;
                    let g = if level == 1 {
                        (1.0 + inner).powf(-s)
                    } else {
                        let b = min_next[j];
                        if b > cap {
                            0.0
                        } else {
                            let row = &prev[b as usize * m..(b as usize + 1) * m];
                            cheb.eval(0.0, 1.0, row, inner)
                        }
                    };
                    *slot = x.powf(-2.0 * s) * g;
                }
            });
        let mut cur = vec![0.0; (n + 2) * m];
        for b in (1..=n).rev() {
            for k in 0..m {
                cur[b * m + k] = cur[(b + 1) * m + k] + terms[b * m + k];
            }
        }
        // nodes[0] = 0
        let total = cur[m];
        totals.push(total.ln() + ln_scale);
        let max = cur.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            cur.iter_mut().for_each(|v| *v /= max);
            ln_scale += max.ln();
        }
        f = cur;
    }
    Ok(totals)
}

/// δ_j = 2^(-j) for j in j_min..=j_max.
pub fn dyadic_scales(j_min: u32, j_max: u32) -> Vec<f64> {
    (j_min..=j_max).map(|j| (-(j as f64)).exp2()).collect()
}

/// Left endpoints of all depth-`depth` cylinders of the affine system
/// x ↦ ratio_k x + offset_k.
pub fn self_similar_points(maps: &[(f64, f64)], depth: u32) -> Vec<f64> {
    let mut pts = vec![0.0];
    for _ in 0..depth {
        // applying a map to every point of the previous level
        pts = maps
            .iter()
            .flat_map(|&(r, o)| pts.iter().map(move |&x| r * x + o))
            .collect();
    }
    pts
}

/// Middle share of scales used in the regression.
const MIDDLE_SHARE: f64 = 0.6;

fn box_count(sorted: &[f64], delta: f64) -> u64 {
    let mut count = 0;
    let mut last = i64::MIN;
    for &x in sorted {
        let b = (x / delta).floor() as i64;
        if b != last {
            count += 1;
            last = b;
        }
    }
    count
}

/// (δ, N(δ)) for every scale, in the given order.
pub fn box_counts(points: &[f64], scales: &[f64]) -> Vec<(f64, u64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    scales.iter().map(|&d| (d, box_count(&sorted, d))).collect()
}

/// Slope of ln N(δ) against ln(1/δ) over the middle 60% of the scales.
pub fn box_dim_estimate(points: &[f64], scales: &[f64]) -> Result<DimensionEstimate> {
    if points.len() < 2 {
        return invalid("box counting needs at least two points");
    }
    if points.iter().any(|x| !x.is_finite()) {
        return invalid("points must be finite");
    }
    if scales.len() < 3 || scales.iter().any(|&d| !(d > 0.0)) {
        return invalid("box counting needs at least three positive scales");
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = {
        let mut v = sorted.clone();
        v.dedup();
        v.len() as u64
    };
    let mut scales = scales.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    let drop = ((1.0 - MIDDLE_SHARE) / 2.0 * scales.len() as f64).floor() as usize;
    let used = &scales[drop..scales.len() - drop];
    let counts: Vec<u64> = used.iter().map(|&d| box_count(&sorted, d)).collect();
    let x: Vec<f64> = used.iter().map(|d| -d.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    if counts.iter().all(|&c| c == counts[0]) {
        if counts[0] == distinct {
            let mut est = DimensionEstimate::new(0.0, Method::BoxCount)
                .diag("points", points.len() as f64)
                .diag("scales_used", used.len() as f64);
            est.flags.push("finite-set-resolved".into());
            return Ok(est);
        }
        return Err(Error::Degenerate(format!("all box counts equal {} across the scales", counts[0])));
    }
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::Degenerate("regression failed".into()))?;
    let mut est = DimensionEstimate::new(fit.slope.clamp(0.0, 1.0), Method::BoxCount)
        .diag("slope", fit.slope)
        .diag("r_squared", fit.r_squared)
        .diag("residual_rms", fit.residual_rms)
        .diag("slope_stderr", fit.slope_stderr)
        .diag("points", points.len() as f64)
        .diag("scales_used", used.len() as f64);
    est.bracket = Some((
        (fit.slope - 2.0 * fit.slope_stderr).clamp(0.0, 1.0),
        (fit.slope + 2.0 * fit.slope_stderr).clamp(0.0, 1.0),
    ));
    if counts.first().is_some_and(|&c| c == distinct) || counts.last().is_some_and(|&c| c == distinct) {
        est.flags.push("saturated-scales".into());
    }
    Ok(est)
}

/// Closed-form Hausdorff value, or an interval when only bounds are known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum HausdorffPrediction {
    Value(f64),
    Interval { lo: f64, hi: f64 },
}

impl HausdorffPrediction {
    pub fn upper(&self) -> f64 {
        match *self {
            HausdorffPrediction::Value(v) => v,
            HausdorffPrediction::Interval { hi, .. } => hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub hausdorff: HausdorffPrediction,
    pub packing: f64,
    pub notes: Vec<String>,
}

/// 1/(1 + α(d − 1)).
pub fn power_restriction_dimension(d: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + alpha * (d - 1.0))
}

/// Growth exponent of a table restriction from a log-log fit over the
/// upper half of the table.
fn table_growth(values: &[u64]) -> Option<f64> {
    let start = values.len() / 2;
    let (x, y): (Vec<f64>, Vec<f64>) = values
        .iter()
        .enumerate()
        .skip(start.max(1))
        .map(|(k, &v)| (((k + 1) as f64).ln(), (v as f64).ln()))
        .unzip();
    linear_fit(&x, &y).map(|f| f.slope)
}

/// Exponent above which a table restriction counts as super-linear.
pub const SUPERLINEAR_EXPONENT: f64 = 1.05;

/// Hausdorff and packing dimension predictions for X_Φ.
pub fn predict_dimensions(d: f64, phi: &Phi, s0: f64, gauss_like: bool) -> Result<Prediction> {
    if !(d > 1.0) || !d.is_finite() {
        return invalid(format!("predictions need d > 1, got {d}"));
    }
    if !(0.0..=1.0).contains(&s0) {
        return invalid(format!("s0 must lie in [0, 1], got {s0}"));
    }
    let packing = s0.max(1.0 / d);
    let mut notes = Vec::new();
    let power = |alpha: f64, notes: &mut Vec<String>| {
        let lo = power_restriction_dimension(d, alpha);
        if gauss_like {
            HausdorffPrediction::Value(lo)
        } else {
            notes.push("without the Gauss-like property only bounds hold; a gap construction attains 1/d".into());
            HausdorffPrediction::Interval { lo, hi: 1.0 / d }
        }
    };
    let hausdorff = match phi {
        Phi::Linear { .. } => HausdorffPrediction::Value(1.0 / d),
        Phi::Power { alpha } => power(*alpha, &mut notes),
        Phi::Table { values, .. } => {
            let growth = table_growth(values).unwrap_or(1.0);
            if growth <= SUPERLINEAR_EXPONENT {
                notes.push(format!("table growth exponent {growth:.4} treated as linear"));
                HausdorffPrediction::Value(1.0 / d)
            } else if gauss_like {
                notes.push(format!("table treated as a power restriction with fitted exponent {growth:.4}"));
                HausdorffPrediction::Value(power_restriction_dimension(d, growth))
            } else {
                return Err(Error::PredictionDeclined(format!(
                    "super-linear table restriction (growth exponent {growth:.4}) on a system that is not Gauss-like"
                )));
            }
        }
    };
    Ok(Prediction { hausdorff, packing, notes })
}

/// Endpoints {f_i(0) : i ≤ n} of the first-level images.
pub fn first_level_points(system: &DSystem, n: u64) -> Result<Vec<f64>> {
    if let Some(limit) = system.map_limit() {
        if n > limit {
            return Err(Error::DigitOutOfTable { digit: n, available: limit });
        }
    }
    (1..=n).map(|i| system.map_eval(i, 0.0)).collect()
}

/// sum_{i=k}^{m} law(i)^s summed term by term with a deterministic reduction.
pub fn direct_power_sum(law: &PowerLaw, k: u64, m: u64, s: f64) -> f64 {
    let p = law.powf(s);
    range_sum(k, m, |i| p.eval(i))
}
