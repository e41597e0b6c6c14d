//! Concrete systems: Gauss maps, linear power-law maps and the
//! piecewise-linear gap construction.

use crate::error::{invalid, Error, Result};
use crate::ifs_core::{verify_d_decay, DSystem, IndexValue, PowerLaw, DEFAULT_DECAY_HORIZON};
use crate::numerics::{hurwitz_zeta, zeta, CompensatedSum};
use crate::restrictions::{ladder_step, LadderBudget, Phi};
use serde::{Deserialize, Serialize};

/// f_n(x) = 1/(x + n).
pub fn make_gauss() -> DSystem {
    DSystem::gauss()
}

/// Affine maps with ratios i^(-d)/ζ(d), laid right to left so that the
/// images tile [0, 1].
pub fn make_linear_power(d: f64) -> Result<DSystem> {
    if !(d > 1.0) || !d.is_finite() {
        return invalid(format!("linear-power systems need d > 1, got {d}"));
    }
    Ok(DSystem::linear_power(d, zeta(d)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapOptions {
    /// Number of maps whose offsets are tabulated.
    pub table_len: u64,
    /// Stop when successive normalizers differ by less than this.
    pub c_tol: f64,
    pub max_iterations: usize,
    /// Certified tail of the gap series relative to the whole normalizer.
    pub tail_rel: f64,
    /// Hard limit on ladder blocks.
    pub max_blocks: usize,
    pub budget: LadderBudget,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            table_len: 10_000,
            c_tol: 1e-12,
            max_iterations: 200,
            tail_rel: 1e-10,
            max_blocks: 1_000_000,
            budget: LadderBudget::default(),
        }
    }
}

/// Indices lo+1 ..= hi each get a gap of C j^(-2) / hi before them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapBlock {
    pub j: u64,
    /// [Φ(l_j)].
    pub lo: IndexValue,
    /// l_{j+1}.
    pub hi: IndexValue,
}

impl GapBlock {
    /// (hi − lo)/hi.
    fn fill_fraction(&self) -> f64 {
        match (self.lo, self.hi) {
            (IndexValue::Exact(a), IndexValue::Exact(l)) => (l - a) as f64 / l as f64,
            (a, l) => -(a.ln() - l.ln()).exp_m1(),
        }
    }

    fn contains(&self, n: u64) -> bool {
        match (self.lo, self.hi) {
            (IndexValue::Exact(a), IndexValue::Exact(l)) => n > a && n <= l,
            (IndexValue::Exact(a), IndexValue::Approx { .. }) => n > a,
            _ => false,
        }
    }

    /// Gap size divided by C.
    fn unit_gap(&self) -> f64 {
        (-2.0 * (self.j as f64).ln() - self.hi.ln()).exp()
    }
}

/// Piecewise-linear system T_i(x) = C i^(-d) x + a_i.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSystem {
    phi: Phi,
    d: f64,
    eps: f64,
    c: f64,
    zeta_d: f64,
    ladder: Vec<IndexValue>,
    blocks: Vec<GapBlock>,
    /// Bound on the omitted part of sum_j j^(-2) (l_{j+1} − [Φ(l_j)]) / l_{j+1}.
    tail_bound: f64,
    gap_series: f64,
    iterations: usize,
    offsets: Vec<(f64, f64)>,
}

struct LadderPass {
    ladder: Vec<IndexValue>,
    blocks: Vec<GapBlock>,
    gap_series: f64,
    tail_bound: f64,
}

fn gap_ladder_pass(phi: &Phi, d: f64, eps: f64, c: f64, opts: &GapOptions) -> Result<LadderPass> {
    let summand = PowerLaw { coef: c.powf(1.0 / d - eps), shift: 0.0, exponent: 1.0 - d * eps };
    let mut ladder = vec![IndexValue::Exact(1)];
    let mut blocks = Vec::new();
    let mut series = CompensatedSum::new();
    loop {
        let last = *ladder.last().expect("non-empty");
        let lo = phi.floor(last)?;
        let hi = ladder_step(&summand, lo, &opts.budget)?;
        let block = GapBlock { j: blocks.len() as u64 + 1, lo, hi };
        series.add(block.fill_fraction() / (block.j as f64).powi(2));
        blocks.push(block);
        ladder.push(hi);
        let n = blocks.len() as f64;
        // each later block has fill fraction below 1/l + l^(-dε)/c'
        let rho = (-hi.ln()).exp() + (-d * eps * hi.ln()).exp() / summand.coef;
        let tail = rho / n;
        let covers_table = hi >= IndexValue::Exact(opts.table_len);
        if covers_table && tail <= opts.tail_rel * (zeta(d) + series.value()) {
            return Ok(LadderPass { ladder, blocks, gap_series: series.value(), tail_bound: tail });
        }
        if blocks.len() >= opts.max_blocks {
            return Err(Error::BudgetExceeded(format!(
                "gap series tail {tail:e} still above tolerance after {} ladder blocks",
                opts.max_blocks
            )));
        }
    }
}

/// Builds the gap system for restriction `phi`, exponent `d` and `eps`.
pub fn build_gap_system(phi: &Phi, d: f64, eps: f64) -> Result<GapSystem> {
    build_gap_system_with(phi, d, eps, &GapOptions::default())
}

pub fn build_gap_system_with(phi: &Phi, d: f64, eps: f64, opts: &GapOptions) -> Result<GapSystem> {
    if !(d > 1.0) || !d.is_finite() {
        return invalid(format!("gap systems need d > 1, got {d}"));
    }
    let eps_max = ((d - 1.0) / 2.0).min(1.0 / d);
    if !(eps > 0.0 && eps < eps_max) {
        return invalid(format!("gap systems need 0 < eps < {eps_max}, got {eps}"));
    }
    if opts.table_len < 2 {
        return invalid("gap table needs at least two maps");
    }
    let zeta_d = zeta(d);
    let mut c = 1.0 / zeta_d;
    for iteration in 1..=opts.max_iterations {
        let pass = gap_ladder_pass(phi, d, eps, c, opts)?;
        let next = 1.0 / (zeta_d + pass.gap_series);
        if (next - c).abs() < opts.c_tol {
            let c = next;
            let pass = gap_ladder_pass(phi, d, eps, c, opts)?;
            let mut sys = GapSystem {
                phi: phi.clone(),
                d,
                eps,
                c,
                zeta_d,
                ladder: pass.ladder,
                blocks: pass.blocks,
                tail_bound: pass.tail_bound,
                gap_series: pass.gap_series,
                iterations: iteration,
                offsets: Vec::new(),
            };
            sys.fill_offsets(opts.table_len);
            return Ok(sys);
        }
        c = next;
    }
    Err(Error::NoConvergence(format!(
        "normalizer did not settle within {} iterations",
        opts.max_iterations
    )))
}

impl GapSystem {
    fn fill_offsets(&mut self, len: u64) {
        let mut acc = CompensatedSum::from_parts(1.0, 0.0);
        let mut offsets = Vec::with_capacity(len as usize);
        for n in 1..=len {
            acc.add(-self.ratio(n));
            if let Some(g) = self.gap_before(n) {
                acc.add(-g);
            }
            offsets.push(acc.parts());
        }
        self.offsets = offsets;
    }

    fn block_of(&self, n: u64) -> Option<&GapBlock> {
        let k = self.blocks.partition_point(|b| match b.hi {
            IndexValue::Exact(l) => l < n,
            IndexValue::Approx { .. } => false,
        });
        self.blocks.get(k).filter(|b| b.contains(n))
    }

    /// Gap inserted between T_{n-1} and T_n, if any.
    pub fn gap_before(&self, n: u64) -> Option<f64> {
        self.block_of(n).map(|b| self.c * b.unit_gap())
    }

    /// Block index j of a gap before n.
    pub fn gap_block(&self, n: u64) -> Option<u64> {
        self.block_of(n).map(|b| b.j)
    }

    pub fn phi(&self) -> &Phi {
        &self.phi
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn table_len(&self) -> u64 {
        self.offsets.len() as u64
    }

    /// The ladder l_1 = 1, l_2, … used by the construction.
    pub fn ladder(&self) -> &[IndexValue] {
        &self.ladder
    }

    pub fn blocks(&self) -> &[GapBlock] {
        &self.blocks
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Truncated value of sum_j j^(-2) (l_{j+1} − [Φ(l_j)]) / l_{j+1}.
    pub fn gap_series(&self) -> f64 {
        self.gap_series
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// C i^(-d).
    pub fn ratio(&self, i: u64) -> f64 {
        self.c * (i as f64).powf(-self.d)
    }

    /// a_i rounded to f64.
    pub fn offset(&self, i: u64) -> Option<f64> {
        self.offset_parts(i).map(|(hi, lo)| hi + lo)
    }

    /// a_i as an unevaluated sum hi + lo.
    pub fn offset_parts(&self, i: u64) -> Option<(f64, f64)> {
        usize::try_from(i.checked_sub(1)?).ok().and_then(|k| self.offsets.get(k).copied())
    }

    /// Mass to the left of T_n([0, 1]) implied by the construction:
    /// C (ζ(d, n+1) + later gaps), with the certified tail bound.
    pub fn remaining_mass(&self, n: u64) -> (f64, f64) {
        let mut acc = CompensatedSum::new();
        acc.add(hurwitz_zeta(self.d, (n + 1) as f64));
        for b in &self.blocks {
            match (b.lo, b.hi) {
                (IndexValue::Exact(a), IndexValue::Exact(l)) => {
                    if l > n {
                        acc.add(b.unit_gap() * (l - a.max(n)) as f64);
                    }
                }
                (lo, hi) => {
                    let ln_start = lo.ln().max((n as f64).ln());
                    acc.add(-(ln_start - hi.ln()).exp_m1() / (b.j as f64).powi(2));
                }
            }
        }
        (self.c * acc.value(), self.c * self.tail_bound)
    }

    /// Shifts a_i by `delta` without touching any other offset.
    #[doc(hidden)]
    pub fn perturb_offset(&mut self, i: u64, delta: f64) {
        if let Some(slot) = usize::try_from(i.saturating_sub(1)).ok().and_then(|k| self.offsets.get_mut(k)) {
            let mut acc = CompensatedSum::from_parts(slot.0, slot.1);
            acc.add(delta);
            *slot = acc.parts();
        }
    }

    /// Serializable description; offsets are written for the first
    /// `max_offsets` maps.
    pub fn document(&self, max_offsets: usize) -> GapDocument {
        GapDocument {
            schema: GAP_SCHEMA.to_string(),
            phi: self.phi.to_string(),
            d: self.d,
            eps: self.eps,
            c: self.c,
            table_len: self.table_len(),
            iterations: self.iterations,
            tail_bound: self.tail_bound,
            gap_series: self.gap_series,
            ladder: self.ladder.clone(),
            offsets: self.offsets.iter().take(max_offsets).copied().collect(),
        }
    }

    /// Rebuilds a system from its document and checks that the normalizer
    /// and the stored offsets are reproduced.
    pub fn from_document(doc: &GapDocument) -> Result<Self> {
        if doc.schema != GAP_SCHEMA {
            return Err(Error::Parse(format!("unsupported gap document schema {:?}", doc.schema)));
        }
        let phi: Phi = doc.phi.parse()?;
        let opts = GapOptions { table_len: doc.table_len, ..GapOptions::default() };
        let sys = build_gap_system_with(&phi, doc.d, doc.eps, &opts)?;
        if (sys.c - doc.c).abs() > 1e-12 {
            return Err(Error::Parse(format!(
                "gap document normalizer {} does not match the rebuilt value {}",
                doc.c, sys.c
            )));
        }
        for (k, &(hi, lo)) in doc.offsets.iter().enumerate() {
            let (rh, rl) = sys.offsets[k];
            if ((rh - hi) + (rl - lo)).abs() > 1e-15 {
                return Err(Error::Parse(format!("gap document offset {} does not match", k + 1)));
            }
        }
        Ok(sys)
    }
}

impl From<GapSystem> for DSystem {
    fn from(g: GapSystem) -> Self {
        DSystem::from_gap(g)
    }
}

pub const GAP_SCHEMA: &str = "ifsdim-gapsys/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapDocument {
    pub schema: String,
    pub phi: String,
    pub d: f64,
    pub eps: f64,
    pub c: f64,
    pub table_len: u64,
    pub iterations: usize,
    pub tail_bound: f64,
    pub gap_series: f64,
    pub ladder: Vec<IndexValue>,
    /// (hi, lo) pairs; a_i = hi + lo.
    pub offsets: Vec<(f64, f64)>,
}

/// Outcome of one validation assertion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub pass: bool,
    /// First index at which the assertion fails.
    pub witness: Option<u64>,
    pub detail: String,
}

impl Check {
    fn ok(detail: impl Into<String>) -> Self {
        Self { pass: true, witness: None, detail: detail.into() }
    }

    fn fail(witness: u64, detail: impl Into<String>) -> Self {
        Self { pass: false, witness: Some(witness), detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapValidation {
    pub n_max: u64,
    pub disjoint: Check,
    pub contained: Check,
    pub gap_floor: Check,
    pub decaying: Check,
    pub normalization: Check,
    /// |a_{n_max} − remaining mass|.
    pub normalization_error: f64,
    /// |C (ζ(d) + gap series) − 1|.
    pub normalizer_residual: f64,
}

impl GapValidation {
    pub fn all_pass(&self) -> bool {
        self.disjoint.pass && self.contained.pass && self.gap_floor.pass && self.decaying.pass && self.normalization.pass
    }
}

pub const NORMALIZATION_TOL: f64 = 1e-9;
const GAP_FLOOR_REL: f64 = 1e-12;

/// Checks disjointness, containment, gap floors, d-decay and normalization
/// on the first `n_max` maps.
pub fn validate_gap_system(sys: &GapSystem, n_max: u64) -> Result<GapValidation> {
    if n_max < 2 || n_max > sys.table_len() {
        return invalid(format!(
            "n_max must lie in 2..={} (the tabulated range), got {n_max}",
            sys.table_len()
        ));
    }
    let parts = |i: u64| sys.offset_parts(i).expect("within table");
    // Signed space between T_n's right end and T_{n-1}'s left end.
    let spacing = |n: u64| {
        let (h1, l1) = parts(n - 1);
        let (h2, l2) = parts(n);
        (h1 - h2) + (l1 - l2) - sys.ratio(n)
    };

    let mut disjoint = Check::ok(format!("images 1..={n_max} pairwise disjoint"));
    let mut gap_floor = Check::ok("every in-block gap meets its floor");
    for n in 2..=n_max {
        let space = spacing(n);
        if disjoint.pass && space < -4.0 * f64::EPSILON * sys.ratio(n) {
            disjoint = Check::fail(n, format!("images {} and {n} overlap by {:e}", n - 1, -space));
        }
        if let (Some(j), Some(g)) = (sys.gap_block(n), sys.gap_before(n)) {
            if gap_floor.pass && space < g * (1.0 - GAP_FLOOR_REL) {
                gap_floor = Check::fail(n, format!("gap before {n} is {space:e}, floor {g:e} (block {j})"));
            }
        }
    }

    let (h1, l1) = parts(1);
    let top = (h1 - 1.0) + l1 + sys.ratio(1);
    let mut contained = if top > 4.0 * f64::EPSILON {
        Check::fail(1, format!("image 1 ends at 1 + {top:e}"))
    } else {
        Check::ok("images inside [0, 1]")
    };
    if contained.pass {
        if let Some(n) = (1..=n_max).find(|&n| sys.offset(n).is_some_and(|a| a < 0.0)) {
            contained = Check::fail(n, format!("offset of map {n} is negative"));
        }
    }

    let system = DSystem::from_gap(sys.clone());
    let decaying = match verify_d_decay(&system, sys.eps, DEFAULT_DECAY_HORIZON) {
        Ok(r) => Check::ok(format!("d-decaying with threshold index {}", r.k)),
        Err(e) => Check::fail(DEFAULT_DECAY_HORIZON, e.to_string()),
    };

    let (remaining, tail) = sys.remaining_mass(n_max);
    let a_n = sys.offset(n_max).expect("within table");
    let normalization_error = (a_n - remaining).abs();
    let normalization = if normalization_error <= NORMALIZATION_TOL + tail {
        Check::ok(format!("offset {a_n:e} matches remaining mass {remaining:e}"))
    } else {
        Check::fail(n_max, format!("offset {a_n:e} differs from remaining mass {remaining:e}"))
    };

    Ok(GapValidation {
        n_max,
        disjoint,
        contained,
        gap_floor,
        decaying,
        normalization,
        normalization_error,
        normalizer_residual: (sys.c * (sys.zeta_d + sys.gap_series) - 1.0).abs(),
    })
}
