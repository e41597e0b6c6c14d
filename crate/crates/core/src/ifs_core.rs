//! d-decaying systems, digit words and cylinder geometry.
//!
//! A [`DSystem`] is one of three concrete families (Gauss maps, linear maps
//! with power-law ratios, and the piecewise-linear gap construction). Maps
//! are evaluated on demand; the index set is unbounded except for the gap
//! kind, whose offsets are tabulated up to a build-time length.

use crate::error::{invalid, Error, Result};
use crate::families::GapSystem;
use crate::numerics::{hurwitz_zeta, ln_biguint, power_sum};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub const DEFAULT_DEPTH_CAP: usize = 64;

/// ln(1e-300); products below this are only reported in log form.
pub const LN_FLOAT_FLOOR: f64 = -690.775_527_898_213_7;

/// Index horizon used when a decay threshold is needed implicitly.
pub const DEFAULT_DECAY_HORIZON: u64 = 1_000_000;

/// Largest m tried when certifying uniform contraction of m-fold compositions.
pub const MAX_CONTRACTION_DEPTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Gauss,
    LinearPower,
    Gap,
}

/// Which derivative bound to use: ξ (lower) or λ (upper).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Xi,
    Lambda,
}

impl FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi" => Ok(BoundKind::Xi),
            "lambda" => Ok(BoundKind::Lambda),
            other => invalid(format!("unknown bound kind {other:?}; expected xi or lambda")),
        }
    }
}

/// `coef · (i + shift)^(-exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coef: f64,
    pub shift: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, i: u64) -> f64 {
        self.coef * (i as f64 + self.shift).powf(-self.exponent)
    }

    pub fn ln_eval(&self, i: u64) -> f64 {
        self.coef.ln() - self.exponent * (i as f64 + self.shift).ln()
    }

    /// ln of the law at an index given only through its logarithm.
    pub fn ln_eval_ln(&self, ln_i: f64) -> f64 {
        let corr = if self.shift == 0.0 {
            0.0
        } else {
            (self.shift * (-ln_i).exp()).ln_1p()
        };
        self.coef.ln() - self.exponent * (ln_i + corr)
    }

    pub fn ln_at(&self, i: IndexValue) -> f64 {
        match i {
            IndexValue::Exact(n) => self.ln_eval(n),
            IndexValue::Approx { ln } => self.ln_eval_ln(ln),
        }
    }

    /// The law raised to the power `t`.
    pub fn powf(&self, t: f64) -> PowerLaw {
        PowerLaw {
            coef: self.coef.powf(t),
            shift: self.shift,
            exponent: self.exponent * t,
        }
    }

    /// sum_{i=a}^{b}.
    pub fn sum(&self, a: u64, b: u64) -> f64 {
        self.coef * power_sum(self.exponent, self.shift, a, b)
    }

    /// sum_{i≥a}; infinite when the exponent is at most 1.
    pub fn tail(&self, a: u64) -> f64 {
        self.coef * hurwitz_zeta(self.exponent, a as f64 + self.shift)
    }
}

/// A positive integer index that may be too large to hold exactly.
///
/// Values below 2^53 are kept as integers; larger ones only by their
/// natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexValue {
    Exact(u64),
    Approx { ln: f64 },
}

impl IndexValue {
    pub const EXACT_LIMIT: u64 = 1 << 53;

    /// Exact when `n` fits below the exact limit.
    pub fn from_u64(n: u64) -> Self {
        if n < Self::EXACT_LIMIT {
            IndexValue::Exact(n)
        } else {
            IndexValue::Approx { ln: (n as f64).ln() }
        }
    }

    pub fn exact(self) -> Option<u64> {
        match self {
            IndexValue::Exact(n) => Some(n),
            IndexValue::Approx { .. } => None,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, IndexValue::Exact(_))
    }

    pub fn ln(self) -> f64 {
        match self {
            IndexValue::Exact(n) => (n as f64).ln(),
            IndexValue::Approx { ln } => ln,
        }
    }

    /// Nearest f64; infinite beyond the float range.
    pub fn to_f64(self) -> f64 {
        match self {
            IndexValue::Exact(n) => n as f64,
            IndexValue::Approx { ln } => ln.exp(),
        }
    }
}

impl PartialOrd for IndexValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (IndexValue::Exact(a), IndexValue::Exact(b)) => a.partial_cmp(b),
            _ => self.ln().partial_cmp(&other.ln()),
        }
    }
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Exact(n) => write!(f, "{n}"),
            IndexValue::Approx { ln } => write!(f, "exp({ln})"),
        }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Gauss,
    LinearPower { d: f64, zeta: f64 },
    Gap(Arc<GapSystem>),
}

/// A d-decaying iterated function system on [0, 1].
#[derive(Clone, Debug)]
pub struct DSystem {
    inner: Inner,
    depth_cap: usize,
}

impl DSystem {
    pub(crate) fn gauss() -> Self {
        Self {
            inner: Inner::Gauss,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub(crate) fn linear_power(d: f64, zeta: f64) -> Self {
        Self {
            inner: Inner::LinearPower { d, zeta },
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn from_gap(gap: GapSystem) -> Self {
        Self {
            inner: Inner::Gap(Arc::new(gap)),
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn kind(&self) -> SystemKind {
        match self.inner {
            Inner::Gauss => SystemKind::Gauss,
            Inner::LinearPower { .. } => SystemKind::LinearPower,
            Inner::Gap(_) => SystemKind::Gap,
        }
    }

    /// Decay exponent d.
    pub fn d(&self) -> f64 {
        match &self.inner {
            Inner::Gauss => 2.0,
            Inner::LinearPower { d, .. } => *d,
            Inner::Gap(g) => g.d(),
        }
    }

    pub fn gap(&self) -> Option<&GapSystem> {
        match &self.inner {
            Inner::Gap(g) => Some(g),
            _ => None,
        }
    }

    /// First-level images tile [0, 1] in reverse index order.
    pub fn is_gauss_like(&self) -> bool {
        matches!(self.inner, Inner::Gauss | Inner::LinearPower { .. })
    }

    /// Number of maps that can be evaluated; `None` when unbounded.
    pub fn map_limit(&self) -> Option<u64> {
        match &self.inner {
            Inner::Gap(g) => Some(g.table_len()),
            _ => None,
        }
    }

    pub fn xi_law(&self) -> PowerLaw {
        match &self.inner {
            // |f_i'| = (x+i)^-2 on [0,1]
            Inner::Gauss => PowerLaw { coef: 1.0, shift: 1.0, exponent: 2.0 },
            Inner::LinearPower { d, zeta } => PowerLaw { coef: 1.0 / zeta, shift: 0.0, exponent: *d },
            Inner::Gap(g) => PowerLaw { coef: g.c(), shift: 0.0, exponent: g.d() },
        }
    }

    pub fn lambda_law(&self) -> PowerLaw {
        match &self.inner {
            Inner::Gauss => PowerLaw { coef: 1.0, shift: 0.0, exponent: 2.0 },
            _ => self.xi_law(),
        }
    }

    pub fn bound_law(&self, kind: BoundKind) -> PowerLaw {
        match kind {
            BoundKind::Xi => self.xi_law(),
            BoundKind::Lambda => self.lambda_law(),
        }
    }

    pub fn xi(&self, i: u64) -> f64 {
        self.xi_law().eval(i)
    }

    pub fn lambda(&self, i: u64) -> f64 {
        self.lambda_law().eval(i)
    }

    /// Contraction ratio of map i for the linear kinds.
    pub fn ln_ratio(&self, i: u64) -> Option<f64> {
        match self.inner {
            Inner::Gauss => None,
            _ => Some(self.xi_law().ln_eval(i)),
        }
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i == 0 {
            return invalid("map indices start at 1");
        }
        if let Some(limit) = self.map_limit() {
            if i > limit {
                return Err(Error::DigitOutOfTable { digit: i, available: limit });
            }
        }
        Ok(())
    }

    /// Left end and ratio of the affine map i (linear kinds).
    fn affine(&self, i: u64) -> Option<(f64, f64)> {
        match &self.inner {
            Inner::Gauss => None,
            Inner::LinearPower { d, zeta } => {
                let ratio = (i as f64).powf(-d) / zeta;
                let left = hurwitz_zeta(*d, (i + 1) as f64) / zeta;
                Some((left, ratio))
            }
            Inner::Gap(g) => Some((g.offset(i)?, g.ratio(i))),
        }
    }

    /// f_i(x).
    pub fn map_eval(&self, i: u64, x: f64) -> Result<f64> {
        self.check_index(i)?;
        Ok(match self.affine(i) {
            None => 1.0 / (x + i as f64),
            Some((left, ratio)) => left + ratio * x,
        })
    }

    /// |f_i'(x)|.
    pub fn map_derivative(&self, i: u64, x: f64) -> Result<f64> {
        self.check_index(i)?;
        Ok(match self.affine(i) {
            None => (x + i as f64).powi(-2),
            Some((_, ratio)) => ratio,
        })
    }

    /// f_i([0, 1]) as (lo, hi).
    pub fn image(&self, i: u64) -> Result<(f64, f64)> {
        let a = self.map_eval(i, 0.0)?;
        let b = self.map_eval(i, 1.0)?;
        Ok((a.min(b), a.max(b)))
    }

    /// ln of the total length of the images f_j([0, 1]) over j ≥ `from`.
    pub fn ln_tail_image_length(&self, from: IndexValue) -> f64 {
        let d = self.d();
        let law = self.xi_law();
        match (&self.inner, from) {
            (Inner::Gauss, j) => -j.ln(),
            (_, IndexValue::Exact(j)) if j < 1 << 40 => {
                PowerLaw { coef: law.coef, shift: 0.0, exponent: d }.tail(j).ln()
            }
            (_, j) => law.coef.ln() + (1.0 - d) * j.ln() - (d - 1.0).ln(),
        }
    }
}

/// Finite digit sequence (a_1, …, a_n) with every a_i ≥ 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct DigitWord(Vec<u64>);

impl DigitWord {
    pub fn new(digits: Vec<u64>) -> Result<Self> {
        if digits.contains(&0) {
            return invalid("digits must be positive integers");
        }
        Ok(Self(digits))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn digits(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// This word extended by one digit.
    pub fn child(&self, digit: u64) -> Result<Self> {
        if digit == 0 {
            return invalid("digits must be positive integers");
        }
        let mut v = self.0.clone();
        v.push(digit);
        Ok(Self(v))
    }
}

impl TryFrom<Vec<u64>> for DigitWord {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DigitWord> for Vec<u64> {
    fn from(w: DigitWord) -> Self {
        w.0
    }
}

impl fmt::Display for DigitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for DigitWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        if body.trim().is_empty() {
            return Ok(Self::empty());
        }
        let digits = body
            .split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|e| Error::Parse(format!("digit {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(digits)
    }
}

/// Continued-fraction continuants p_n, q_n with their predecessors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Continuants {
    pub p_prev: BigUint,
    pub p: BigUint,
    pub q_prev: BigUint,
    pub q: BigUint,
}

impl Default for Continuants {
    fn default() -> Self {
        Self::new()
    }
}

impl Continuants {
    pub fn new() -> Self {
        Self {
            p_prev: BigUint::one(),
            p: BigUint::zero(),
            q_prev: BigUint::zero(),
            q: BigUint::one(),
        }
    }

    pub fn from_digits(digits: &[u64]) -> Self {
        let mut c = Self::new();
        for &a in digits {
            c.push(a);
        }
        c
    }

    pub fn push(&mut self, a: u64) {
        let p = &self.p * a + &self.p_prev;
        let q = &self.q * a + &self.q_prev;
        self.p_prev = std::mem::replace(&mut self.p, p);
        self.q_prev = std::mem::replace(&mut self.q, q);
    }

    /// f_w(0) = p_n/q_n and f_w(1) = (p_n + p_{n-1})/(q_n + q_{n-1}).
    pub fn endpoints(&self) -> (BigRational, BigRational) {
        let at0 = BigRational::new(BigInt::from(self.p.clone()), BigInt::from(self.q.clone()));
        let at1 = BigRational::new(
            BigInt::from(&self.p + &self.p_prev),
            BigInt::from(&self.q + &self.q_prev),
        );
        (at0, at1)
    }

    /// ln of 1 / (q_n (q_n + q_{n-1})).
    pub fn ln_cylinder_length(&self) -> f64 {
        -ln_biguint(&self.q) - ln_biguint(&(&self.q + &self.q_prev))
    }
}

/// The interval f_{a_1} ∘ … ∘ f_{a_n}([0, 1]).
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderInterval {
    pub word: DigitWord,
    pub lo: f64,
    pub hi: f64,
    exact: Option<(BigRational, BigRational)>,
    ln_length: f64,
}

impl CylinderInterval {
    /// Exact rational endpoints (Gauss kind only).
    pub fn exact(&self) -> Option<(&BigRational, &BigRational)> {
        self.exact.as_ref().map(|(a, b)| (a, b))
    }

    pub fn ln_length(&self) -> f64 {
        self.ln_length
    }

    pub fn length(&self) -> f64 {
        self.ln_length.exp()
    }

    /// Containment, decided on exact endpoints when both sides have them.
    /// Rounded affine enclosures cannot separate touching cylinders, so
    /// they are compared through their words: every supported family has
    /// first-level images with disjoint interiors.
    pub fn contains(&self, other: &CylinderInterval) -> bool {
        match (self.exact(), other.exact()) {
            (Some((a, b)), Some((c, d))) => a <= c && d <= b,
            _ => other.word.digits().starts_with(self.word.digits()),
        }
    }

    /// Interiors do not meet.
    pub fn interior_disjoint(&self, other: &CylinderInterval) -> bool {
        match (self.exact(), other.exact()) {
            (Some((a, b)), Some((c, d))) => b <= c || d <= a,
            _ => {
                let (u, v) = (self.word.digits(), other.word.digits());
                !u.starts_with(v) && !v.starts_with(u)
            }
        }
    }
}

fn check_word(system: &DSystem, word: &DigitWord) -> Result<()> {
    if word.len() > system.depth_cap() {
        return Err(Error::DepthCapExceeded { depth: word.len(), cap: system.depth_cap() });
    }
    for &a in word.digits() {
        system.check_index(a)?;
    }
    Ok(())
}

/// Exact image of [0, 1] under the composition named by `word`.
pub fn cylinder_interval(system: &DSystem, word: &DigitWord) -> Result<CylinderInterval> {
    check_word(system, word)?;
    if system.kind() == SystemKind::Gauss {
        let c = Continuants::from_digits(word.digits());
        let (at0, at1) = c.endpoints();
        let (lo, hi) = if at0 <= at1 { (at0, at1) } else { (at1, at0) };
        return Ok(CylinderInterval {
            word: word.clone(),
            lo: lo.to_f64().unwrap_or(0.0),
            hi: hi.to_f64().unwrap_or(0.0),
            ln_length: c.ln_cylinder_length(),
            exact: Some((lo, hi)),
        });
    }
    // Affine maps composed innermost first, rounded outward.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut ln_length = 0.0;
    for &a in word.digits().iter().rev() {
        let (left, ratio) = system.affine(a).ok_or(Error::DigitOutOfTable {
            digit: a,
            available: system.map_limit().unwrap_or(0),
        })?;
        lo = (left + ratio * lo).next_down().max(0.0);
        hi = (left + ratio * hi).next_up().min(1.0);
        ln_length += ratio.ln();
    }
    Ok(CylinderInterval { word: word.clone(), lo, hi, exact: None, ln_length })
}

/// Log-domain bounds Π ξ(a_i) and Π λ(a_i) on a cylinder length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LengthBounds {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl LengthBounds {
    /// Linear values, or `None` when the lower product is below 1e-300.
    pub fn linear(&self) -> Option<(f64, f64)> {
        if self.ln_lower < LN_FLOAT_FLOOR {
            None
        } else {
            Some((self.ln_lower.exp(), self.ln_upper.exp()))
        }
    }
}

pub fn cylinder_length_bounds(system: &DSystem, word: &DigitWord) -> Result<LengthBounds> {
    if word.is_empty() {
        return invalid("length bounds need a non-empty word");
    }
    check_word(system, word)?;
    let xi = system.xi_law();
    let lambda = system.lambda_law();
    Ok(LengthBounds {
        ln_lower: word.digits().iter().map(|&a| xi.ln_eval(a)).sum(),
        ln_upper: word.digits().iter().map(|&a| lambda.ln_eval(a)).sum(),
    })
}

/// Witness for uniform contraction of m-fold compositions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub m: usize,
    /// Largest sampled |(f_{a_1} ∘ … ∘ f_{a_m})'|.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub d: f64,
    pub eps: f64,
    pub i_max: u64,
    /// Smallest K with k^(-d-eps) ≤ ξ_k ≤ λ_k ≤ k^(-d+eps) on [K, i_max].
    pub k: u64,
    /// Constants making the sandwich hold from index 1 on the sampled range.
    pub c1: f64,
    pub c2: f64,
    pub contraction: Option<ContractionCertificate>,
}

impl DecayReport {
    /// Whether c1 k^(-d-eps) ≤ ξ_k ≤ λ_k ≤ c2 k^(-d+eps) holds for every
    /// sampled k ≥ `from`, with a relative slack of 1e-12.
    pub fn holds_with_constants(&self, system: &DSystem, from: u64) -> bool {
        let (xi, lambda) = (system.xi_law(), system.lambda_law());
        (from.max(1)..=self.i_max).all(|k| {
            let lk = (k as f64).ln();
            let lo = self.c1.ln() - (self.d + self.eps) * lk;
            let hi = self.c2.ln() - (self.d - self.eps) * lk;
            lo <= xi.ln_eval(k) + 1e-12 && lambda.ln_eval(k) <= hi + 1e-12 && xi.ln_eval(k) <= lambda.ln_eval(k)
        })
    }
}

fn sandwich_holds(system: &DSystem, eps: f64, k: u64) -> bool {
    let d = system.d();
    let lk = (k as f64).ln();
    let ln_xi = system.xi_law().ln_eval(k);
    let ln_lambda = system.lambda_law().ln_eval(k);
    -(d + eps) * lk <= ln_xi && ln_xi <= ln_lambda && ln_lambda <= -(d - eps) * lk
}

/// Checks the d-decay sandwich up to `i_max` and certifies uniform
/// contraction of m-fold compositions on a sample of digits and points.
pub fn verify_d_decay(system: &DSystem, eps: f64, i_max: u64) -> Result<DecayReport> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return invalid(format!("eps must be a non-negative finite number, got {eps}"));
    }
    if i_max < 2 {
        return invalid("i_max must be at least 2");
    }
    let d = system.d();
    if !sandwich_holds(system, eps, i_max) {
        return Err(Error::NotDecaying { eps, i_max });
    }
    let mut k = i_max;
    while k > 1 && sandwich_holds(system, eps, k - 1) {
        k -= 1;
    }
    let (xi, lambda) = (system.xi_law(), system.lambda_law());
    let mut ln_c1 = f64::INFINITY;
    let mut ln_c2 = f64::NEG_INFINITY;
    for i in 1..=i_max {
        let li = (i as f64).ln();
        ln_c1 = ln_c1.min(xi.ln_eval(i) + (d + eps) * li);
        ln_c2 = ln_c2.max(lambda.ln_eval(i) + (d - eps) * li);
    }
    Ok(DecayReport {
        d,
        eps,
        i_max,
        k,
        c1: ln_c1.exp(),
        c2: ln_c2.exp(),
        contraction: contraction_certificate(system),
    })
}

const SAMPLE_DIGITS: [u64; 5] = [1, 2, 3, 5, 8];
const SAMPLE_POINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn sup_derivative(system: &DSystem, digits: &[u64], m: usize, prefix: &mut Vec<u64>) -> f64 {
    if prefix.len() == m {
        return SAMPLE_POINTS
            .iter()
            .map(|&x0| {
                // innermost map applied first
                let mut x = x0;
                let mut der = 1.0;
                for &a in prefix.iter().rev() {
                    der *= system.map_derivative(a, x).unwrap_or(f64::NAN);
                    x = system.map_eval(a, x).unwrap_or(f64::NAN);
                }
                der
            })
            .fold(0.0, f64::max);
    }
    let mut best = 0.0f64;
    for &a in digits {
        prefix.push(a);
        best = best.max(sup_derivative(system, digits, m, prefix));
        prefix.pop();
    }
    best
}

fn contraction_certificate(system: &DSystem) -> Option<ContractionCertificate> {
    let limit = system.map_limit().unwrap_or(u64::MAX);
    let digits: Vec<u64> = SAMPLE_DIGITS.iter().copied().filter(|&a| a <= limit).collect();
    (1..=MAX_CONTRACTION_DEPTH).find_map(|m| {
        let bound = sup_derivative(system, &digits, m, &mut Vec::with_capacity(m));
        (bound < 1.0).then_some(ContractionCertificate { m, bound })
    })
}

/// f_{a_1} ∘ … ∘ f_{a_n}(1) together with the cylinder length, which bounds
/// the distance to the projection of any infinite extension.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedPoint {
    pub point: f64,
    pub exact: Option<BigRational>,
    pub error_bound: f64,
}

pub fn project_point(system: &DSystem, word: &DigitWord) -> Result<ProjectedPoint> {
    if word.is_empty() {
        return invalid("projection needs a non-empty word");
    }
    let cyl = cylinder_interval(system, word)?;
    if system.kind() == SystemKind::Gauss {
        let (_, at1) = Continuants::from_digits(word.digits()).endpoints();
        return Ok(ProjectedPoint {
            point: at1.to_f64().unwrap_or(f64::NAN),
            exact: Some(at1),
            error_bound: cyl.length(),
        });
    }
    let mut x = 1.0;
    for &a in word.digits().iter().rev() {
        x = system.map_eval(a, x)?;
    }
    Ok(ProjectedPoint { point: x, exact: None, error_bound: cyl.length() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_gauss, make_linear_power};
    use approx::assert_relative_eq;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn word(d: &[u64]) -> DigitWord {
        DigitWord::new(d.to_vec()).unwrap()
    }

    #[test]
    fn gauss_cylinders_are_exact() {
        let g = make_gauss();
        let c = cylinder_interval(&g, &word(&[1])).unwrap();
        assert_eq!(c.exact().unwrap(), (&rat(1, 2), &rat(1, 1)));
        let c = cylinder_interval(&g, &word(&[2, 1])).unwrap();
        assert_eq!(c.exact().unwrap(), (&rat(1, 3), &rat(2, 5)));
        let c = cylinder_interval(&g, &word(&[1, 1])).unwrap();
        assert_eq!(c.exact().unwrap(), (&rat(1, 2), &rat(2, 3)));
        let root = cylinder_interval(&g, &DigitWord::empty()).unwrap();
        assert_eq!(root.exact().unwrap(), (&rat(0, 1), &rat(1, 1)));
    }

    #[test]
    fn depth_cap_is_enforced() {
        let g = make_gauss().with_depth_cap(3);
        let err = cylinder_interval(&g, &word(&[1, 1, 1, 1])).unwrap_err();
        assert!(matches!(err, Error::DepthCapExceeded { depth: 4, cap: 3 }));
    }

    #[test]
    fn zero_digit_rejected() {
        assert!(DigitWord::new(vec![1, 0]).is_err());
        assert!("(3,0)".parse::<DigitWord>().is_err());
        assert_eq!("(3, 4)".parse::<DigitWord>().unwrap(), word(&[3, 4]));
    }

    #[test]
    fn gauss_length_bounds_bracket_exact_length() {
        let g = make_gauss();
        let b = cylinder_length_bounds(&g, &word(&[2])).unwrap();
        let (lo, hi) = b.linear().unwrap();
        assert_relative_eq!(lo, 1.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(hi, 0.25, max_relative = 1e-15);
        let len = cylinder_interval(&g, &word(&[2])).unwrap().length();
        assert_relative_eq!(len, 1.0 / 6.0, max_relative = 1e-15);
        assert!(lo <= len && len <= hi);
    }

    #[test]
    fn length_bounds_are_multiplicative() {
        let g = make_gauss();
        let a = cylinder_length_bounds(&g, &word(&[3])).unwrap();
        let b = cylinder_length_bounds(&g, &word(&[7])).unwrap();
        let ab = cylinder_length_bounds(&g, &word(&[3, 7])).unwrap();
        assert_relative_eq!(ab.ln_lower, a.ln_lower + b.ln_lower);
        assert_relative_eq!(ab.ln_upper, a.ln_upper + b.ln_upper);
    }

    #[test]
    fn length_bounds_fall_back_to_log_domain() {
        let g = make_gauss();
        let deep = word(&[1_000_000; 60]);
        let b = cylinder_length_bounds(&g, &deep).unwrap();
        assert!(b.linear().is_none());
        assert!(b.ln_lower < LN_FLOAT_FLOOR);
    }

    #[test]
    fn linear_power_bounds_equal_ratio() {
        let sys = make_linear_power(2.0).unwrap();
        let b = cylinder_length_bounds(&sys, &word(&[3])).unwrap();
        let z = std::f64::consts::PI.powi(2) / 6.0;
        assert_relative_eq!(b.ln_lower, (1.0 / (9.0 * z)).ln(), max_relative = 1e-14);
        assert_eq!(b.ln_lower, b.ln_upper);
    }

    #[test]
    fn gauss_decay_threshold() {
        let g = make_gauss();
        let r = verify_d_decay(&g, 0.1, 100).unwrap();
        assert_eq!(r.k, 9);
        let cert = r.contraction.unwrap();
        assert_eq!(cert.m, 2);
        assert_relative_eq!(cert.bound, 0.25, max_relative = 1e-12);
        assert!(matches!(verify_d_decay(&g, 0.0, 100), Err(Error::NotDecaying { .. })));
        assert!(verify_d_decay(&g, -0.1, 100).is_err());
    }

    #[test]
    fn linear_power_decay_with_fitted_constants() {
        let sys = make_linear_power(2.0).unwrap();
        let r = verify_d_decay(&sys, 0.1, 1000).unwrap();
        let z = std::f64::consts::PI.powi(2) / 6.0;
        assert_relative_eq!(r.c1, 1.0 / z, max_relative = 1e-12);
        assert_relative_eq!(r.c2, 1.0 / z, max_relative = 1e-12);
        assert!(r.holds_with_constants(&sys, 1));
        assert_eq!(r.contraction.unwrap().m, 1);
    }

    #[test]
    fn projection_examples() {
        let g = make_gauss();
        let p = project_point(&g, &word(&[1])).unwrap();
        assert_eq!(p.exact.unwrap(), rat(1, 2));
        assert!(p.error_bound <= 0.5 + 1e-15);
        let p = project_point(&g, &word(&[2, 2])).unwrap();
        assert_eq!(p.exact.unwrap(), rat(3, 7));
        let len = cylinder_interval(&g, &word(&[2, 2])).unwrap().length();
        assert_relative_eq!(p.error_bound, len);
    }

    #[test]
    fn golden_ratio_convergents() {
        // Oracle: Fibonacci ratios F_n / F_{n+1} from the continuant recursion.
        let g = make_gauss();
        let (mut a, mut b) = (1u64, 1u64);
        for n in 1..=40usize {
            let p = project_point(&g, &word(&vec![1; n])).unwrap();
            // f_1^n(1) = F_{n+1} / F_{n+2} with F_1 = F_2 = 1
            let (fa, fb) = (b, a + b);
            assert_eq!(p.exact.unwrap(), rat(fa as i64, fb as i64));
            let t = a + b;
            a = b;
            b = t;
        }
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let p = project_point(&g, &word(&[1; 40])).unwrap();
        assert!((p.point - golden).abs() <= p.error_bound);
    }

    #[test]
    fn index_value_ordering() {
        assert!(IndexValue::Exact(5) < IndexValue::Exact(6));
        assert!(IndexValue::Exact(1 << 52) < IndexValue::Approx { ln: 100.0 });
        assert_eq!(IndexValue::from_u64(1 << 60).exact(), None);
    }
}
