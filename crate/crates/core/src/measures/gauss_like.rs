use crate::dimension::{power_restriction_dimension, DimensionEstimate, Method};
use crate::error::{invalid, Error, Result};
use crate::ifs_core::{DSystem, DigitWord, IndexValue};
use crate::numerics::{hurwitz_zeta, linear_fit, pow_ceil};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Markov measure on digits: a_1 = K and, given a_n = i, the next digit j
/// has probability c_i i^(α(d−1)s) j^(−p) for j ≥ ⌈i^α⌉ and 0 otherwise,
/// with s = 1/(1 + α(d−1)) and p = (d + α(d−1)) s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussLikeMeasure {
    pub d: f64,
    pub alpha: f64,
    pub s: f64,
    pub p: f64,
    pub k: u64,
}

/// Digits from here on are sampled from the continuous tail.
const CONTINUOUS_FROM: u64 = 1 << 50;
const LOCAL_STEPS: usize = 8;

impl GaussLikeMeasure {
    pub fn new(d: f64, alpha: f64, k: u64) -> Result<Self> {
        if !(d > 1.0) || !d.is_finite() {
            return invalid(format!("measure needs d > 1, got {d}"));
        }
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return invalid(format!("measure needs alpha >= 1, got {alpha}"));
        }
        if k == 0 {
            return invalid("first digit must be positive");
        }
        let s = power_restriction_dimension(d, alpha);
        let p = (d + alpha * (d - 1.0)) * s;
        Ok(Self { d, alpha, s, p, k })
    }

    /// First admissible successor ⌈i^α⌉.
    pub fn support_start(&self, i: u64) -> Option<u64> {
        pow_ceil(i, self.alpha)
    }

    fn ln_support_start(&self, i: IndexValue) -> IndexValue {
        match i {
            IndexValue::Exact(n) => match self.support_start(n) {
                Some(j) if j < IndexValue::EXACT_LIMIT => IndexValue::Exact(j),
                _ => IndexValue::Approx { ln: self.alpha * i.ln() },
            },
            IndexValue::Approx { ln } => IndexValue::Approx { ln: self.alpha * ln },
        }
    }

    /// ln sum_{j ≥ J} j^(−p).
    fn ln_tail(&self, start: IndexValue) -> f64 {
        match start {
            IndexValue::Exact(j) if j < CONTINUOUS_FROM => hurwitz_zeta(self.p, j as f64).ln(),
            other => {
                let q = self.p - 1.0;
                // Euler–Maclaurin leading terms: J^(1-p)/(p-1) (1 + (p-1)/(2J))
                -q * other.ln() - q.ln() + (0.5 * q * (-other.ln()).exp()).ln_1p()
            }
        }
    }

    /// Normalizer c_i = 1 / (i^(α(d−1)s) sum_{j ≥ ⌈i^α⌉} j^(−p)).
    pub fn normalizer(&self, i: u64) -> f64 {
        self.ln_normalizer(IndexValue::Exact(i)).exp()
    }

    pub fn ln_normalizer(&self, i: IndexValue) -> f64 {
        -(self.alpha * (self.d - 1.0) * self.s * i.ln()) - self.ln_tail(self.ln_support_start(i))
    }

    /// P(a_{n+1} = j | a_n = i).
    pub fn conditional(&self, i: u64, j: u64) -> f64 {
        self.ln_conditional(IndexValue::Exact(i), IndexValue::Exact(j)).exp()
    }

    pub fn ln_conditional(&self, i: IndexValue, j: IndexValue) -> f64 {
        let start = self.ln_support_start(i);
        if j < start {
            return f64::NEG_INFINITY;
        }
        -self.p * j.ln() - self.ln_tail(start)
    }

    /// Smallest j ≥ J with sum_{m > j} m^(−p) ≤ v · sum_{m ≥ J} m^(−p).
    fn invert(&self, start: IndexValue, v: f64) -> IndexValue {
        let q = self.p - 1.0;
        let IndexValue::Exact(big_j) = start else {
            return IndexValue::Approx { ln: start.ln() - v.ln() / q };
        };
        if big_j >= CONTINUOUS_FROM {
            return IndexValue::Approx { ln: start.ln() - v.ln() / q };
        }
        let target = v * hurwitz_zeta(self.p, big_j as f64);
        let tail_after = |j: u64| hurwitz_zeta(self.p, (j + 1) as f64);
        // (x − 1/2)^(−q)/q ≈ tail from x; solve for the first index past target.
        let guess = (target * q).powf(-1.0 / q) - 0.5;
        if !guess.is_finite() || guess >= CONTINUOUS_FROM as f64 {
            return IndexValue::Approx { ln: start.ln() - v.ln() / q };
        }
        let mut j = (guess.floor().max(big_j as f64)) as u64;
        for _ in 0..LOCAL_STEPS {
            let here = tail_after(j) <= target;
            let before = j == big_j || tail_after(j - 1) > target;
            if here && before {
                return IndexValue::Exact(j);
            }
            if here {
                j -= 1;
            } else {
                j += 1;
            }
        }
        let (mut lo, mut hi) = (big_j, j.max(big_j));
        if tail_after(lo) <= target {
            return IndexValue::Exact(lo);
        }
        while tail_after(hi) > target {
            hi = hi.saturating_mul(2).min(CONTINUOUS_FROM);
            if hi == CONTINUOUS_FROM {
                return IndexValue::Approx { ln: start.ln() - v.ln() / q };
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail_after(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        IndexValue::Exact(hi)
    }

    fn next_digit(&self, prev: IndexValue, rng: &mut ChaCha8Rng) -> IndexValue {
        // v in (0, 1]
        let v = 1.0 - rng.random::<f64>();
        self.invert(self.ln_support_start(prev), v)
    }
}

/// Largest admissible ln of a sampled digit.
pub const MAX_LN_DIGIT: f64 = 1e300;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample path a_1 = K, a_2, … in log form. Stops early when a digit's
/// logarithm leaves the finite range; the boolean reports truncation.
pub fn sample_mu_path(measure: &GaussLikeMeasure, depth: usize, seed: u64, stream: u64) -> (Vec<IndexValue>, bool) {
    let mut rng = rng_for(seed, stream);
    let mut path = vec![IndexValue::Exact(measure.k)];
    while path.len() < depth {
        let next = measure.next_digit(*path.last().expect("non-empty"), &mut rng);
        if !next.ln().is_finite() || next.ln() > MAX_LN_DIGIT {
            return (path, true);
        }
        path.push(next);
    }
    (path, false)
}

/// Sample word of exact digits; fails once a digit leaves the exact range.
pub fn sample_mu(measure: &GaussLikeMeasure, depth: usize, seed: u64) -> Result<DigitWord> {
    if depth == 0 {
        return invalid("sampling needs depth >= 1");
    }
    let (path, _) = sample_mu_path(measure, depth, seed, 0);
    let digits: Vec<u64> = path.iter().map_while(|v| v.exact()).collect();
    if digits.len() < depth {
        return Err(Error::DigitOverflow { achieved_depth: digits.len() });
    }
    DigitWord::new(digits)
}

/// One sample's per-level record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRecord {
    pub n: usize,
    pub digit: IndexValue,
    /// ln |Δ_n| bracket.
    pub log_r_lo: f64,
    pub log_r_hi: f64,
    /// ln μ(C_n) = ln μ(Δ_n).
    pub log_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleTrace {
    pub sample_id: u64,
    pub levels: Vec<LevelRecord>,
    pub truncated: bool,
    pub slope: Option<f64>,
    pub slope_lo: Option<f64>,
    pub slope_hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimension {
    pub estimate: DimensionEstimate,
    pub samples: Vec<SampleTrace>,
}

fn trace_sample(measure: &GaussLikeMeasure, system: &DSystem, depth: usize, seed: u64, id: u64) -> SampleTrace {
    let (path, truncated) = sample_mu_path(measure, depth, seed, id);
    let xi = system.xi_law();
    let lambda = system.lambda_law();
    let mut levels = Vec::with_capacity(path.len());
    let (mut ln_xi, mut ln_lambda, mut ln_mass) = (0.0, 0.0, 0.0);
    for (k, &a) in path.iter().enumerate() {
        if k > 0 {
            ln_mass += measure.ln_conditional(path[k - 1], a);
        }
        ln_xi += xi.ln_at(a);
        ln_lambda += lambda.ln_at(a);
        let ln_tail = system.ln_tail_image_length(measure.ln_support_start(a));
        levels.push(LevelRecord {
            n: k + 1,
            digit: a,
            log_r_lo: ln_xi + ln_tail,
            log_r_hi: ln_lambda + ln_tail,
            log_mass: ln_mass,
        });
    }
    let fit_with = |pick: &dyn Fn(&LevelRecord) -> f64| {
        let used: Vec<&LevelRecord> = levels.iter().filter(|l| l.n >= 2).collect();
        let x: Vec<f64> = used.iter().map(|l| pick(l)).collect();
        let y: Vec<f64> = used.iter().map(|l| l.log_mass).collect();
        linear_fit(&x, &y).map(|f| f.slope).filter(|s| s.is_finite())
    };
    SampleTrace {
        sample_id: id,
        slope: fit_with(&|l| 0.5 * (l.log_r_lo + l.log_r_hi)),
        slope_lo: fit_with(&|l| l.log_r_lo),
        slope_hi: fit_with(&|l| l.log_r_hi),
        levels,
        truncated,
    }
}

/// Mean over samples of the regression slope of ln μ(Δ_n) on ln |Δ_n|, with
/// a 95% interval widened by the spread between bracket endpoints.
pub fn local_dim_estimate(
    measure: &GaussLikeMeasure,
    system: &DSystem,
    samples: u64,
    depth: usize,
    seed: u64,
) -> Result<LocalDimension> {
    if samples < 2 {
        return invalid("local dimension needs at least two samples");
    }
    if depth < 3 {
        return invalid("local dimension needs depth >= 3");
    }
    if !system.is_gauss_like() {
        return invalid("local dimension needs a Gauss-like system (gauss or linear-power)");
    }
    if (system.d() - measure.d).abs() > 1e-12 {
        return invalid(format!("system exponent {} differs from the measure's d = {}", system.d(), measure.d));
    }
    let traces: Vec<SampleTrace> = (0..samples)
        .into_par_iter()
        .map(|id| trace_sample(measure, system, depth, seed, id))
        .collect();
    let slopes: Vec<f64> = traces.iter().filter_map(|t| t.slope).collect();
    if slopes.len() < 2 {
        return Err(Error::Degenerate("fewer than two samples produced a slope".into()));
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let spreads: Vec<f64> = traces
        .iter()
        .filter_map(|t| Some((t.slope_hi? - t.slope_lo?).abs() * 0.5))
        .collect();
    let spread = spreads.iter().sum::<f64>() / spreads.len().max(1) as f64;
    let half = 1.96 * sd / n.sqrt() + spread;
    let truncated = traces.iter().filter(|t| t.truncated).count();
    let mut estimate = DimensionEstimate {
        value: mean,
        method: Method::LocalDimension,
        bracket: Some((mean - half, mean + half)),
        diagnostics: Default::default(),
        flags: Vec::new(),
    };
    estimate.diagnostics.insert("samples".into(), samples as f64);
    estimate.diagnostics.insert("slopes".into(), n);
    estimate.diagnostics.insert("slope_sd".into(), sd);
    estimate.diagnostics.insert("bracket_spread".into(), spread);
    estimate.diagnostics.insert("target".into(), measure.s);
    estimate.diagnostics.insert("truncated_samples".into(), truncated as f64);
    if truncated > 0 {
        estimate.flags.push("digit-overflow".into());
    }
    Ok(LocalDimension { estimate, samples: traces })
}

/// Writes one CSV row per sample and level:
/// sample_id, n, digit, log_r_lo, log_r_hi, log_mass.
pub fn write_local_dim_csv<W: Write>(out: W, traces: &[SampleTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "n", "digit", "log_r_lo", "log_r_hi", "log_mass"])
        ?;
    for t in traces {
        for l in &t.levels {
            let digit = match l.digit {
                IndexValue::Exact(v) => v.to_string(),
                IndexValue::Approx { ln } => format!("exp({ln:.17e})"),
            };
            w.write_record([
                t.sample_id.to_string(),
                l.n.to_string(),
                digit,
                format!("{:.17e}", l.log_r_lo),
                format!("{:.17e}", l.log_r_hi),
                format!("{:.17e}", l.log_mass),
            ])
            ?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Range of normalizers over 1..=i_max and the empirical limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizerSummary {
    pub i_max: u64,
    pub min: f64,
    pub max: f64,
    /// max(max, 1/min).
    pub c3: f64,
    pub last: f64,
    /// max |c_i − c_last| over i ≥ i_max/10.
    pub tail_variation: f64,
}

pub fn normalizer_summary(measure: &GaussLikeMeasure, i_max: u64) -> Result<NormalizerSummary> {
    if i_max < 10 {
        return invalid("normalizer summary needs i_max >= 10");
    }
    let values: Vec<f64> = (1..=i_max).map(|i| measure.normalizer(i)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    let last = *values.last().expect("non-empty");
    let tail_variation = values[(i_max / 10) as usize..]
        .iter()
        .map(|c| (c - last).abs())
        .fold(0.0, f64::max);
    Ok(NormalizerSummary { i_max, min, max, c3: max.max(1.0 / min), last, tail_variation })
}
