use crate::dimension::bowen_root_ratios;
use crate::error::{invalid, Error, Result};
use crate::ifs_core::{cylinder_length_bounds, Continuants, DSystem, DigitWord, IndexValue, PowerLaw, SystemKind};
use crate::restrictions::{ladder, Ladder, Phi};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Which digits of each window carry mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportPolicy {
    /// The whole window I(n).
    #[default]
    FullWindow,
    /// The window without the digits whose images are leftmost and rightmost.
    TrimExtremes,
}

impl std::str::FromStr for SupportPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-window" => Ok(SupportPolicy::FullWindow),
            "trim" | "trim-extremes" => Ok(SupportPolicy::TrimExtremes),
            other => invalid(format!("unknown support policy {other:?}; expected full or trim")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrostmanLevel {
    pub level: usize,
    /// I(n) = [Φ(l_n)] + 1 ..= l_{n+1}, inclusive.
    pub window: (u64, u64),
    /// I′(n): the window without its two extreme digits.
    pub trimmed: (u64, u64),
    /// Digits carrying mass under the support policy.
    pub support: (u64, u64),
    /// s_n with sum over the support of ξ_i^(s_n) = 1.
    pub exponent: f64,
    /// s_n < 1/d − ε.
    pub below_floor: bool,
}

impl FrostmanLevel {
    fn contains(&self, digit: u64) -> bool {
        digit >= self.support.0 && digit <= self.support.1
    }

    fn size(&self) -> u64 {
        self.support.1 - self.support.0 + 1
    }
}

/// Product measure on the ladder windows with level masses ξ_i^(s_n).
#[derive(Clone, Debug)]
pub struct FrostmanMeasure {
    system: DSystem,
    xi: PowerLaw,
    eps: f64,
    policy: SupportPolicy,
    ladder: Ladder,
    levels: Vec<FrostmanLevel>,
}

const EXPONENT_TOL: f64 = 1e-14;

pub fn frostman_build(system: &DSystem, phi: &Phi, eps: f64, depth: usize) -> Result<FrostmanMeasure> {
    frostman_build_with(system, phi, eps, depth, SupportPolicy::default())
}

pub fn frostman_build_with(
    system: &DSystem,
    phi: &Phi,
    eps: f64,
    depth: usize,
    policy: SupportPolicy,
) -> Result<FrostmanMeasure> {
    if depth == 0 {
        return invalid("frostman measure needs depth >= 1");
    }
    let lad = ladder(system, phi, eps, depth + 1)?;
    let xi = system.xi_law();
    let floor = 1.0 / system.d() - eps;
    let mut levels = Vec::with_capacity(depth);
    for level in 1..=depth {
        let (lo, hi) = lad.window(level).expect("ladder has depth + 1 values");
        let (IndexValue::Exact(lo), IndexValue::Exact(hi)) = (lo, hi) else {
            return Err(Error::BudgetExceeded(format!(
                "window at level {level} is beyond the exactly representable digit range"
            )));
        };
        if let Some(limit) = system.map_limit() {
            if hi > limit {
                return Err(Error::DigitOutOfTable { digit: hi, available: limit });
            }
        }
        let size = hi + 1 - lo;
        let needed = match policy {
            SupportPolicy::FullWindow => 2,
            SupportPolicy::TrimExtremes => 4,
        };
        if size < needed {
            return Err(Error::WindowTooSmall { level, size, needed });
        }
        // Images are ordered in reverse of the index for every family, so
        // the rightmost image is the smallest digit and the leftmost the largest.
        let trimmed = (lo + 1, hi - 1);
        let support = match policy {
            SupportPolicy::FullWindow => (lo, hi),
            SupportPolicy::TrimExtremes => trimmed,
        };
        let exponent = support_exponent(&xi, support)?;
        levels.push(FrostmanLevel {
            level,
            window: (lo, hi),
            trimmed,
            support,
            exponent,
            below_floor: exponent < floor,
        });
    }
    Ok(FrostmanMeasure { system: system.clone(), xi, eps, policy, ladder: lad, levels })
}

fn support_exponent(xi: &PowerLaw, (lo, hi): (u64, u64)) -> Result<f64> {
    if hi - lo < 64 {
        let ratios: Vec<f64> = (lo..=hi).map(|i| xi.eval(i)).collect();
        return Ok(bowen_root_ratios(&ratios, EXPONENT_TOL)?.value);
    }
    let f = |s: f64| xi.powf(s).sum(lo, hi);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    while f(b) >= 1.0 {
        b *= 2.0;
        if b > 64.0 {
            return Err(Error::NoRoot("level exponent above 64".into()));
        }
    }
    while b - a > EXPONENT_TOL {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) >= 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

impl FrostmanMeasure {
    pub fn levels(&self) -> &[FrostmanLevel] {
        &self.levels
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn policy(&self) -> SupportPolicy {
        self.policy
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Shifts the exponent of one level (1-based) without renormalizing.
    #[doc(hidden)]
    pub fn perturb_exponent(&mut self, level: usize, delta: f64) {
        if let Some(l) = level.checked_sub(1).and_then(|k| self.levels.get_mut(k)) {
            l.exponent += delta;
        }
    }

    /// ln ν(C_w); −∞ when a digit lies outside its level's support.
    pub fn ln_mass(&self, word: &DigitWord) -> Result<f64> {
        if word.len() > self.depth() {
            return invalid(format!(
                "word of length {} exceeds the built depth {}",
                word.len(),
                self.depth()
            ));
        }
        let mut total = 0.0;
        for (level, &a) in self.levels.iter().zip(word.digits()) {
            if !level.contains(a) {
                return Ok(f64::NEG_INFINITY);
            }
            total += level.exponent * self.xi.ln_eval(a);
        }
        Ok(total)
    }

    pub fn mass(&self, word: &DigitWord) -> Result<f64> {
        Ok(self.ln_mass(word)?.exp())
    }

    fn ln_length(&self, word: &DigitWord) -> Result<f64> {
        Ok(match self.system.kind() {
            SystemKind::Gauss => Continuants::from_digits(word.digits()).ln_cylinder_length(),
            _ => cylinder_length_bounds(&self.system, word)?.ln_lower,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrostmanReport {
    pub depth: usize,
    pub checked: u64,
    pub passed: u64,
    pub fraction: f64,
    pub sampled: bool,
    /// max over checked words of ln ν(C) − (1/d − ε) ln |C|; negative when all pass.
    pub worst_margin: f64,
    pub levels_below_floor: Vec<usize>,
}

/// Words checked one by one up to this many; beyond it a random sample.
pub const FROSTMAN_EXHAUSTIVE_LIMIT: u64 = 100_000;

/// Fraction of supported depth-`depth` cylinders with ν(C) ≤ |C|^(1/d − ε).
pub fn frostman_verify(measure: &FrostmanMeasure, depth: usize) -> Result<FrostmanReport> {
    frostman_verify_seeded(measure, depth, 0)
}

pub fn frostman_verify_seeded(measure: &FrostmanMeasure, depth: usize, seed: u64) -> Result<FrostmanReport> {
    if depth > measure.depth() {
        return invalid(format!("depth {depth} exceeds the built depth {}", measure.depth()));
    }
    let levels = &measure.levels[..depth];
    let levels_below_floor = levels.iter().filter(|l| l.below_floor).map(|l| l.level).collect();
    if depth == 0 {
        return Ok(FrostmanReport {
            depth,
            checked: 0,
            passed: 0,
            fraction: 1.0,
            sampled: false,
            worst_margin: f64::NEG_INFINITY,
            levels_below_floor,
        });
    }
    let t = 1.0 / measure.system.d() - measure.eps;
    let total = levels.iter().try_fold(1u64, |acc, l| acc.checked_mul(l.size()));
    let sampled = total.is_none_or(|n| n > FROSTMAN_EXHAUSTIVE_LIMIT);
    let mut checked = 0u64;
    let mut passed = 0u64;
    let mut worst = f64::NEG_INFINITY;
    let mut check = |digits: Vec<u64>| -> Result<()> {
        let word = DigitWord::new(digits)?;
        let margin = measure.ln_mass(&word)? - t * measure.ln_length(&word)?;
        checked += 1;
        if margin <= 0.0 {
            passed += 1;
        }
        worst = worst.max(margin);
        Ok(())
    };
    if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..FROSTMAN_EXHAUSTIVE_LIMIT {
            let digits = levels.iter().map(|l| rng.random_range(l.support.0..=l.support.1)).collect();
            check(digits)?;
        }
    } else {
        let mut digits: Vec<u64> = levels.iter().map(|l| l.support.0).collect();
        'outer: loop {
            check(digits.clone())?;
            for k in (0..depth).rev() {
                if digits[k] < levels[k].support.1 {
                    digits[k] += 1;
                    continue 'outer;
                }
                digits[k] = levels[k].support.0;
            }
            break;
        }
    }
    Ok(FrostmanReport {
        depth,
        checked,
        passed,
        fraction: passed as f64 / checked as f64,
        sampled,
        worst_margin: worst,
        levels_below_floor,
    })
}
