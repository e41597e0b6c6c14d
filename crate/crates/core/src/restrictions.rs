//! Restriction functions Φ, ladder sequences and restricted word enumeration.

use crate::error::{invalid, Error, Result};
use crate::ifs_core::{verify_d_decay, DSystem, DigitWord, IndexValue, PowerLaw, DEFAULT_DECAY_HORIZON};
use crate::numerics::{pow_ceil, pow_floor, small_rational, CompensatedSum};
use serde::Serialize;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

/// Restriction function: admissible words satisfy a_{n+1} > Φ(a_n).
#[derive(Clone, Debug, PartialEq)]
pub enum Phi {
    /// Φ(n) = β n with β ≥ 1.
    Linear { beta: f64 },
    /// Φ(n) = n^α with α > 1.
    Power { alpha: f64 },
    /// Φ(n) = values[n - 1]; strictly increasing with Φ(n) ≥ n.
    Table { values: Arc<Vec<u64>>, source: String },
}

impl Phi {
    pub fn linear(beta: f64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return invalid(format!("linear restriction needs beta >= 1, got {beta}"));
        }
        Ok(Phi::Linear { beta })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return invalid(format!("power restriction needs alpha > 1, got {alpha}"));
        }
        Ok(Phi::Power { alpha })
    }

    pub fn table(values: Vec<u64>, source: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return invalid("restriction table is empty");
        }
        for (k, &v) in values.iter().enumerate() {
            let n = k as u64 + 1;
            if v < n {
                return invalid(format!("restriction table violates phi(n) >= n at n = {n}"));
            }
            if k > 0 && v <= values[k - 1] {
                return invalid(format!("restriction table is not strictly increasing at n = {n}"));
            }
        }
        Ok(Phi::Table { values: Arc::new(values), source: source.into() })
    }

    /// Reads a table file with one integer per line; blank lines are skipped.
    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<u64>().map_err(|e| Error::Parse(format!("table entry {l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::table(values, path.display().to_string())
    }

    fn table_value(values: &[u64], n: u64) -> Result<u64> {
        usize::try_from(n - 1)
            .ok()
            .and_then(|k| values.get(k).copied())
            .ok_or(Error::TableExhausted(n))
    }

    /// Real value Φ(n); may be infinite for huge arguments.
    pub fn eval(&self, n: u64) -> Result<f64> {
        Ok(match self {
            Phi::Linear { beta } => beta * n as f64,
            Phi::Power { alpha } => (n as f64).powf(*alpha),
            Phi::Table { values, .. } => Self::table_value(values, n)? as f64,
        })
    }

    /// ln Φ(n) for an index given exactly or through its logarithm.
    pub fn ln_eval(&self, n: IndexValue) -> Result<f64> {
        match (self, n) {
            (Phi::Linear { beta }, n) => Ok(beta.ln() + n.ln()),
            (Phi::Power { alpha }, n) => Ok(alpha * n.ln()),
            (Phi::Table { values, .. }, IndexValue::Exact(n)) => Ok((Self::table_value(values, n)? as f64).ln()),
            (Phi::Table { values, .. }, IndexValue::Approx { .. }) => Err(Error::TableExhausted(values.len() as u64 + 1)),
        }
    }

    /// Integer part [Φ(n)], computed exactly whenever it fits below 2^53.
    pub fn floor(&self, n: IndexValue) -> Result<IndexValue> {
        let IndexValue::Exact(k) = n else {
            return Ok(IndexValue::Approx { ln: self.ln_eval(n)? });
        };
        let exact = match self {
            Phi::Linear { beta } => match small_rational(*beta) {
                Some((p, q)) => u64::try_from(k as u128 * p as u128 / q as u128).ok(),
                None => {
                    let v = (beta * k as f64).floor();
                    (v < u64::MAX as f64).then_some(v as u64)
                }
            },
            Phi::Power { alpha } => pow_floor(k, *alpha).map(|(f, _)| f),
            Phi::Table { values, .. } => Some(Self::table_value(values, k)?),
        };
        Ok(match exact {
            Some(v) if v < IndexValue::EXACT_LIMIT => IndexValue::Exact(v),
            _ => IndexValue::Approx { ln: self.ln_eval(n)? },
        })
    }

    /// Smallest digit allowed after `prev`: [Φ(prev)] + 1 when strict,
    /// ⌈Φ(prev)⌉ otherwise. `None` when it does not fit in u64.
    pub fn min_next(&self, prev: u64, strict: bool) -> Result<Option<u64>> {
        if strict {
            return Ok(match self.floor(IndexValue::Exact(prev))? {
                IndexValue::Exact(v) => Some(v + 1),
                IndexValue::Approx { .. } => None,
            });
        }
        Ok(match self {
            Phi::Linear { beta } => match small_rational(*beta) {
                Some((p, q)) => u64::try_from((prev as u128 * p as u128).div_ceil(q as u128)).ok(),
                None => {
                    let v = (beta * prev as f64).ceil();
                    (v < u64::MAX as f64).then_some(v as u64)
                }
            },
            Phi::Power { alpha } => pow_ceil(prev, *alpha),
            Phi::Table { values, .. } => Some(Self::table_value(values, prev)?),
        })
    }

    /// Whether `next` may follow `prev`.
    pub fn allows(&self, prev: u64, next: u64, strict: bool) -> Result<bool> {
        Ok(self.min_next(prev, strict)?.is_some_and(|m| next >= m))
    }
}

impl FromStr for Phi {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("restriction {s:?}: expected lin:<beta>, pow:<alpha> or table:<path>")))?;
        let num = |a: &str| a.trim().parse::<f64>().map_err(|e| Error::Parse(format!("restriction {s:?}: {e}")));
        match kind.trim() {
            "lin" => Phi::linear(num(arg)?),
            "pow" => Phi::power(num(arg)?),
            "table" => Phi::load_table(Path::new(arg.trim())),
            other => Err(Error::Parse(format!("unknown restriction kind {other:?}"))),
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Linear { beta } => write!(f, "lin:{beta}"),
            Phi::Power { alpha } => write!(f, "pow:{alpha}"),
            Phi::Table { source, .. } => write!(f, "table:{source}"),
        }
    }
}

impl Serialize for Phi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Limits on ladder growth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderBudget {
    /// Terms summed one by one before switching to Euler–Maclaurin.
    pub direct_terms: u64,
    /// Largest admissible ln of a ladder value.
    pub max_ln_index: f64,
}

impl Default for LadderBudget {
    fn default() -> Self {
        Self { direct_terms: 1 << 20, max_ln_index: 1e6 }
    }
}

/// The sequence l_1 < l_2 < … where each block ([Φ(l_n)], l_{n+1}] carries
/// at least unit mass of `summand`, minimally.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ladder {
    pub eps: f64,
    /// First value (threshold index for system ladders, 1 for gap ladders).
    pub k: u64,
    pub values: Vec<IndexValue>,
    /// [Φ(l_n)] for every n with a successor.
    pub floors: Vec<IndexValue>,
    pub summand: PowerLaw,
}

impl Ladder {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Window of level n (1-based): digits [Φ(l_n)] + 1 ..= l_{n+1}.
    pub fn window(&self, n: usize) -> Option<(IndexValue, IndexValue)> {
        let floor = *self.floors.get(n.checked_sub(1)?)?;
        let hi = *self.values.get(n)?;
        let lo = match floor {
            IndexValue::Exact(v) => IndexValue::Exact(v + 1),
            approx => approx,
        };
        Some((lo, hi))
    }

    /// Number of complete windows.
    pub fn levels(&self) -> usize {
        self.floors.len().min(self.values.len().saturating_sub(1))
    }
}

/// Minimal L > `after` with sum_{i=after+1}^{L} summand(i) ≥ 1.
pub fn ladder_step(summand: &PowerLaw, after: IndexValue, budget: &LadderBudget) -> Result<IndexValue> {
    if let IndexValue::Exact(a) = after {
        let mut acc = CompensatedSum::new();
        let end = a.saturating_add(budget.direct_terms).min(IndexValue::EXACT_LIMIT);
        for i in a + 1..=end {
            acc.add(summand.eval(i));
            if acc.value() >= 1.0 {
                return Ok(IndexValue::Exact(i));
            }
        }
        if end < IndexValue::EXACT_LIMIT {
            let head = acc.value();
            let mass = |l: u64| head + summand.sum(end + 1, l);
            let mut step = budget.direct_terms.max(1);
            let mut lo = end;
            loop {
                let hi = end.saturating_add(step);
                if hi >= IndexValue::EXACT_LIMIT {
                    break;
                }
                if mass(hi) >= 1.0 {
                    let mut hi = hi;
                    while hi - lo > 1 {
                        let mid = lo + (hi - lo) / 2;
                        if mass(mid) >= 1.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    return Ok(IndexValue::Exact(hi));
                }
                lo = hi;
                step = step.saturating_mul(2);
            }
        }
    }
    asymptotic_step(summand, after.ln(), budget)
}

/// Continuous approximation c (L^q − A^q)/q = 1 with q = 1 − p, solved in logs.
fn asymptotic_step(summand: &PowerLaw, ln_a: f64, budget: &LadderBudget) -> Result<IndexValue> {
    let c = summand.coef;
    let q = 1.0 - summand.exponent;
    let ln_l = if q.abs() < 1e-12 {
        ln_a + 1.0 / c
    } else if q > 0.0 {
        ln_a + ((q / c) * (-q * ln_a).exp()).ln_1p() / q
    } else {
        let r = -q;
        let x = (r / c) * (r * ln_a).exp();
        if x >= 1.0 {
            return Err(Error::NoConvergence(format!(
                "summand tail beyond exp({ln_a}) has mass below 1; the ladder stops"
            )));
        }
        ln_a - (-x).ln_1p() / r
    };
    if !ln_l.is_finite() || ln_l > budget.max_ln_index {
        return Err(Error::BudgetExceeded(format!(
            "ladder value exp({ln_l}) exceeds the index budget exp({})",
            budget.max_ln_index
        )));
    }
    Ok(IndexValue::Approx { ln: ln_l })
}

/// Ladder with explicit first value and summand; `steps` values in total.
pub fn ladder_from(
    summand: PowerLaw,
    phi: &Phi,
    first: u64,
    eps: f64,
    steps: usize,
    budget: &LadderBudget,
) -> Result<Ladder> {
    if steps == 0 {
        return invalid("a ladder needs at least one step");
    }
    if first == 0 {
        return invalid("ladder values start at 1");
    }
    let mut values = vec![IndexValue::Exact(first)];
    let mut floors = Vec::with_capacity(steps);
    while values.len() < steps {
        let last = *values.last().expect("non-empty");
        let floor = phi.floor(last)?;
        values.push(ladder_step(&summand, floor, budget)?);
        floors.push(floor);
    }
    Ok(Ladder { eps, k: first, values, floors, summand })
}

/// Ladder of a d-decaying system: l_1 = K from the decay sandwich and
/// summand ξ_i^(1/d − ε).
pub fn ladder(system: &DSystem, phi: &Phi, eps: f64, steps: usize) -> Result<Ladder> {
    ladder_with_budget(system, phi, eps, steps, &LadderBudget::default())
}

pub fn ladder_with_budget(
    system: &DSystem,
    phi: &Phi,
    eps: f64,
    steps: usize,
    budget: &LadderBudget,
) -> Result<Ladder> {
    let d = system.d();
    if !(eps > 0.0 && eps < 1.0 / d) {
        return invalid(format!("ladder needs 0 < eps < 1/d = {}, got {eps}", 1.0 / d));
    }
    let k = verify_d_decay(system, eps, DEFAULT_DECAY_HORIZON)?.k;
    let summand = system.xi_law().powf(1.0 / d - eps);
    ladder_from(summand, phi, k, eps, steps, budget)
}

/// Ratios l_{n+1} / Φ(l_n) for every step of the ladder.
pub fn gamma_ratios(ladder: &Ladder, phi: &Phi) -> Result<Vec<f64>> {
    ladder
        .values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (IndexValue::Exact(a), IndexValue::Exact(b)) => Ok(b as f64 / phi.eval(a)?),
            (a, b) => Ok((b.ln() - phi.ln_eval(a)?).exp()),
        })
        .collect()
}

/// max_n l_{n+1} / Φ(l_n).
pub fn gamma_bound(ladder: &Ladder, phi: &Phi) -> Result<f64> {
    if ladder.len() < 2 {
        return invalid("gamma bound needs at least two ladder values");
    }
    Ok(gamma_ratios(ladder, phi)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Lexicographic stream of the words (a_1, …, a_depth) with digits in
/// 1..=cap and each a_{i+1} admissible after a_i.
#[derive(Clone, Debug)]
pub struct RestrictedWords {
    /// min_next[a] for a in 1..=cap; index 0 unused.
    min_next: Vec<u64>,
    cap: u64,
    depth: usize,
    stack: Vec<u64>,
    started: bool,
    done: bool,
}

impl RestrictedWords {
    fn fill(&mut self) -> bool {
        if self.stack.is_empty() {
            if self.cap == 0 {
                return false;
            }
            self.stack.push(1);
        }
        while self.stack.len() < self.depth {
            let next = self.min_next[*self.stack.last().expect("non-empty") as usize];
            if next > self.cap {
                return false;
            }
            self.stack.push(next);
        }
        true
    }

    fn bump(&mut self) -> bool {
        while let Some(top) = self.stack.pop() {
            if top < self.cap {
                self.stack.push(top + 1);
                return true;
            }
        }
        false
    }
}

impl Iterator for RestrictedWords {
    type Item = DigitWord;

    fn next(&mut self) -> Option<DigitWord> {
        if self.done {
            return None;
        }
        if self.depth == 0 {
            self.done = true;
            return Some(DigitWord::empty());
        }
        loop {
            let ok = if self.started {
                self.bump() && self.fill()
            } else {
                self.started = true;
                self.fill()
            };
            if ok {
                return Some(DigitWord::new(self.stack.clone()).expect("digits are positive"));
            }
            if self.stack.is_empty() {
                self.done = true;
                return None;
            }
        }
    }
}

pub(crate) fn min_next_table(phi: &Phi, cap: u64, strict: bool) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(cap as usize + 1);
    out.push(0);
    for a in 1..=cap {
        let m = match phi.min_next(a, strict) {
            Ok(m) => m.unwrap_or(u64::MAX),
            // A strictly increasing table already past the cap keeps every
            // later value past it too.
            Err(Error::TableExhausted(_)) => match phi {
                Phi::Table { values, .. } if *values.last().expect("non-empty") >= cap => u64::MAX,
                _ => return Err(Error::TableExhausted(a)),
            },
            Err(e) => return Err(e),
        };
        out.push(m);
    }
    Ok(out)
}

/// Stream of admissible words; strict means a_{i+1} > Φ(a_i), otherwise
/// a_{i+1} ≥ Φ(a_i).
pub fn enumerate_restricted_words(phi: &Phi, depth: usize, cap: u64, strict: bool) -> Result<RestrictedWords> {
    if usize::try_from(cap).is_err() {
        return invalid("digit cap too large");
    }
    Ok(RestrictedWords {
        min_next: min_next_table(phi, cap, strict)?,
        cap,
        depth,
        stack: Vec::with_capacity(depth),
        started: false,
        done: false,
    })
}

/// Number of admissible words, saturating at u128::MAX.
pub fn count_restricted_words(phi: &Phi, depth: usize, cap: u64, strict: bool) -> Result<u128> {
    if depth == 0 {
        return Ok(1);
    }
    let min_next = min_next_table(phi, cap, strict)?;
    let n = cap as usize;
    // ways[a] = admissible suffixes of the current length starting at a
    let mut ways = vec![1u128; n + 2];
    ways[0] = 0;
    ways[n + 1] = 0;
    for _ in 1..depth {
        let mut suffix = vec![0u128; n + 2];
        for a in (1..=n).rev() {
            suffix[a] = suffix[a + 1].saturating_add(ways[a]);
        }
        for a in 1..=n {
            let m = min_next[a];
            ways[a] = if m as usize <= n && m <= cap { suffix[m as usize] } else { 0 };
        }
    }
    Ok(ways[1..=n].iter().fold(0u128, |acc, &w| acc.saturating_add(w)))
}
