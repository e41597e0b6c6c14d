use super::*;
use crate::dimension::{
    bowen_root, bowen_root_infinite, box_counts, box_dim_estimate, cover_sums, dyadic_scales, first_level_points,
    predict_dimensions, self_similar_points, subsystem_dim_bounds, CoverOptions, DimensionEstimate,
    HausdorffPrediction,
};
use crate::error::invalid;
use crate::families::{build_gap_system_with, validate_gap_system, GapOptions};
use crate::ifs_core::{BoundKind, IndexValue};
use crate::measures::{
    frostman_build_with, frostman_verify_seeded, local_dim_estimate, normalizer_summary, write_local_dim_csv,
    GaussLikeMeasure, SupportPolicy,
};
use crate::report::{serialize_u128, to_value};
use crate::restrictions::{count_restricted_words, enumerate_restricted_words, gamma_bound, gamma_ratios, ladder, Phi};
use serde_json::{json, Value};

pub(super) fn dispatch(command: &Command, format: Format) -> Result<Outcome> {
    match command {
        Command::Bowen(a) => bowen(a),
        Command::Ladder(a) => ladder_cmd(a),
        Command::Words(a) => words(a),
        Command::Cover(a) => cover(a),
        Command::Boxdim(a) => boxdim(a),
        Command::Predict(a) => predict(a),
        Command::Frostman(a) => frostman(a),
        Command::Localdim(a) => localdim(a, format),
        Command::Gapsys(a) => gapsys(a),
        Command::Battery(_) => invalid("battery runs through run_battery"),
    }
}

fn fl(x: f64) -> String {
    format!("{x:.16e}")
}

fn idx(v: IndexValue) -> String {
    match v {
        IndexValue::Exact(n) => n.to_string(),
        IndexValue::Approx { ln } => format!("exp({ln:.16e})"),
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn outcome(name: &str, args: &impl Serialize, result: Value, csv: Option<Vec<u8>>) -> Result<Outcome> {
    Ok(Outcome { report: Report::new(name, to_value(args)?, result), csv })
}

fn phi_of(spec: &str) -> Result<Phi> {
    spec.parse()
}

fn bowen_json(bound: &str, e: &DimensionEstimate) -> Value {
    json!({
        "bound": bound,
        "s": e.value,
        "bracket": e.bracket,
        "residual": e.diagnostics.get("residual"),
        "flags": e.flags,
    })
}

fn bowen_row(bound: &str, a: &BowenArgs, e: &DimensionEstimate) -> Vec<String> {
    let (lo, hi) = e.bracket.unwrap_or((e.value, e.value));
    let residual = e.diagnostics.get("residual").copied().unwrap_or(f64::NAN);
    vec![bound.into(), a.k.to_string(), a.m.to_string(), fl(e.value), fl(lo), fl(hi), fl(residual)]
}

fn bowen(a: &BowenArgs) -> Result<Outcome> {
    let system = parse_system(&a.system)?;
    const HEADER: [&str; 7] = ["bound", "k", "m", "s", "bracket_lo", "bracket_hi", "residual"];
    let solve = |bound: BoundKind| {
        if a.infinite {
            bowen_root_infinite(&system, bound, a.k, a.m, a.tol)
        } else {
            bowen_root(&system, bound, a.k, a.m, a.tol)
        }
    };
    if a.bound == "both" {
        if a.infinite {
            return invalid("--infinite supports a single bound");
        }
        let (lower, upper) = subsystem_dim_bounds(&system, a.k, a.m, a.tol)?;
        let result = json!({ "lower": bowen_json("xi", &lower), "upper": bowen_json("lambda", &upper) });
        let csv = table(&HEADER, vec![bowen_row("xi", a, &lower), bowen_row("lambda", a, &upper)])?;
        return outcome("bowen", a, result, Some(csv));
    }
    let bound: BoundKind = a.bound.parse()?;
    let est = solve(bound)?;
    let csv = table(&HEADER, vec![bowen_row(&a.bound, a, &est)])?;
    outcome("bowen", a, bowen_json(&a.bound, &est), Some(csv))
}

fn ladder_cmd(a: &LadderArgs) -> Result<Outcome> {
    let system = parse_system(&a.system)?;
    let phi = phi_of(&a.phi)?;
    let lad = ladder(&system, &phi, a.eps, a.steps)?;
    let ratios = gamma_ratios(&lad, &phi)?;
    let gamma = if lad.len() >= 2 { Some(gamma_bound(&lad, &phi)?) } else { None };
    let rows = lad
        .values
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            vec![
                (n + 1).to_string(),
                idx(v),
                lad.floors.get(n).map(|&f| idx(f)).unwrap_or_default(),
                fl(v.ln()),
                ratios.get(n).map(|&r| fl(r)).unwrap_or_default(),
            ]
        })
        .collect();
    let csv = table(&["n", "l", "floor_phi", "ln_l", "gamma_ratio"], rows)?;
    let result = json!({
        "values": lad.values,
        "floors": lad.floors,
        "k": lad.k,
        "summand": lad.summand,
        "gamma_ratios": ratios,
        "gamma_bound": gamma,
    });
    outcome("ladder", a, result, Some(csv))
}

#[derive(Serialize)]
struct Count(#[serde(serialize_with = "serialize_u128")] u128);

fn words(a: &WordsArgs) -> Result<Outcome> {
    let phi = phi_of(&a.phi)?;
    let strict = !a.non_strict;
    let count = count_restricted_words(&phi, a.depth, a.cap, strict)?;
    let mut result = json!({ "count": to_value(&Count(count))?, "strict": strict });
    let csv = if a.list {
        let listed: Vec<Vec<u64>> =
            enumerate_restricted_words(&phi, a.depth, a.cap, strict)?.take(a.limit).map(|w| w.digits().to_vec()).collect();
        let rows = listed
            .iter()
            .enumerate()
            .map(|(k, w)| vec![k.to_string(), w.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")])
            .collect();
        result["truncated"] = json!(count > listed.len() as u128);
        result["words"] = json!(listed);
        table(&["index", "word"], rows)?
    } else {
        table(&["depth", "cap", "strict", "count"], vec![vec![
            a.depth.to_string(),
            a.cap.to_string(),
            strict.to_string(),
            count.to_string(),
        ]])?
    };
    outcome("words", a, result, Some(csv))
}

fn trend(values: &[f64]) -> &'static str {
    if values.len() < 2 {
        "undetermined"
    } else if values.windows(2).all(|w| w[1] < w[0]) {
        "decreasing"
    } else if values.windows(2).all(|w| w[1] > w[0]) {
        "increasing"
    } else {
        "mixed"
    }
}

fn cover(a: &CoverArgs) -> Result<Outcome> {
    let system = parse_system(&a.system)?;
    let phi = phi_of(&a.phi)?;
    let opts = CoverOptions { strict: !a.non_strict, exact_limit: a.exact_limit as u128, ..CoverOptions::default() };
    let sums = cover_sums(&system, &phi, a.depth, a.s, a.cap, &opts)?;
    let from = a.trend_from.max(1);
    let considered: Vec<f64> = sums.iter().filter(|c| c.depth >= from).map(|c| c.ln_value).collect();
    let rows = sums
        .iter()
        .map(|c| {
            vec![
                c.depth.to_string(),
                fl(c.s),
                c.cap.to_string(),
                fl(c.value),
                fl(c.ln_value),
                c.words.to_string(),
                to_value(&c.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                fl(c.tail_ratio),
            ]
        })
        .collect();
    let csv = table(&["depth", "s", "cap", "value", "ln_value", "words", "method", "tail_ratio"], rows)?;
    let result = json!({ "sums": to_value(&sums)?, "trend": trend(&considered), "trend_from": from });
    outcome("cover", a, result, Some(csv))
}

fn parse_count<T: std::str::FromStr>(spec: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad size in point source {spec:?}")))
}

fn boxdim_points(a: &BoxdimArgs) -> Result<Vec<f64>> {
    let spec = a.source.as_str();
    match spec.split_once(':') {
        Some(("reciprocal", n)) => {
            let n: u64 = parse_count(spec, n)?;
            Ok((1..=n).map(|i| 1.0 / i as f64).collect())
        }
        Some(("cantor", depth)) => {
            let depth: u32 = parse_count(spec, depth)?;
            if depth > 24 {
                return invalid("cantor depth is limited to 24");
            }
            Ok(self_similar_points(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], depth))
        }
        Some(("first-level", n)) => first_level_points(&parse_system(&a.system)?, parse_count(spec, n)?),
        Some(("file", path)) => {
            let text = std::fs::read_to_string(path)?;
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.parse::<f64>().map_err(|_| Error::Parse(format!("bad point {l:?} in {path}"))))
                .collect()
        }
        _ => Err(Error::Parse(format!(
            "unknown point source {spec:?}; expected reciprocal:<n>, cantor:<depth>, first-level:<n> or file:<path>"
        ))),
    }
}

fn boxdim(a: &BoxdimArgs) -> Result<Outcome> {
    if a.j_min > a.j_max || a.j_max > 60 {
        return invalid("scales need j-min <= j-max <= 60");
    }
    let points = boxdim_points(a)?;
    let scales = dyadic_scales(a.j_min, a.j_max);
    let est = box_dim_estimate(&points, &scales)?;
    let counts = box_counts(&points, &scales);
    let rows = counts.iter().map(|&(d, c)| vec![fl(d), c.to_string()]).collect();
    let csv = table(&["delta", "count"], rows)?;
    let result = json!({
        "estimate": to_value(&est)?,
        "points": points.len(),
        "counts": counts.iter().map(|&(d, c)| json!({"delta": d, "count": c})).collect::<Vec<_>>(),
    });
    outcome("boxdim", a, result, Some(csv))
}

fn predict(a: &PredictArgs) -> Result<Outcome> {
    let phi = phi_of(&a.phi)?;
    let p = predict_dimensions(a.d, &phi, a.s0, a.gauss_like)?;
    let (lo, hi) = match p.hausdorff {
        HausdorffPrediction::Value(v) => (v, v),
        HausdorffPrediction::Interval { lo, hi } => (lo, hi),
    };
    let csv = table(&["hausdorff_lo", "hausdorff_hi", "packing"], vec![vec![fl(lo), fl(hi), fl(p.packing)]])?;
    outcome("predict", a, to_value(&p)?, Some(csv))
}

fn frostman(a: &FrostmanArgs) -> Result<Outcome> {
    let system = parse_system(&a.system)?;
    let phi = phi_of(&a.phi)?;
    let policy: SupportPolicy = a.policy.parse()?;
    let measure = frostman_build_with(&system, &phi, a.eps, a.depth, policy)?;
    let check = frostman_verify_seeded(&measure, a.depth, a.seed)?;
    let rows = measure
        .levels()
        .iter()
        .map(|l| {
            vec![
                l.level.to_string(),
                l.window.0.to_string(),
                l.window.1.to_string(),
                l.trimmed.0.to_string(),
                l.trimmed.1.to_string(),
                l.support.0.to_string(),
                l.support.1.to_string(),
                fl(l.exponent),
                l.below_floor.to_string(),
            ]
        })
        .collect();
    let csv = table(
        &["level", "window_lo", "window_hi", "trimmed_lo", "trimmed_hi", "support_lo", "support_hi", "exponent", "below_floor"],
        rows,
    )?;
    let result = json!({
        "floor": 1.0 / system.d() - a.eps,
        "ladder": measure.ladder().values,
        "levels": to_value(measure.levels())?,
        "check": to_value(&check)?,
        "all_pass": check.passed == check.checked,
    });
    outcome("frostman", a, result, Some(csv))
}

fn localdim(a: &LocaldimArgs, format: Format) -> Result<Outcome> {
    let measure = GaussLikeMeasure::new(a.d, a.alpha, a.k)?;
    let spec = a.system.clone().unwrap_or_else(|| if a.d == 2.0 { "gauss".into() } else { format!("linpow:{}", a.d) });
    let system = parse_system(&spec)?;
    let est = local_dim_estimate(&measure, &system, a.samples, a.depth, a.seed)?;
    let normalizers = normalizer_summary(&measure, a.normalizer_range)?;
    let csv = if format == Format::Csv {
        let mut buf = Vec::new();
        write_local_dim_csv(&mut buf, &est.samples)?;
        Some(buf)
    } else {
        None
    };
    let mut result = json!({
        "system": spec,
        "measure": to_value(&measure)?,
        "estimate": to_value(&est.estimate)?,
        "target": measure.s,
        "normalizers": to_value(&normalizers)?,
    });
    if a.traces {
        result["samples"] = to_value(&est.samples)?;
    }
    outcome("localdim", a, result, csv)
}

fn gapsys(a: &GapsysArgs) -> Result<Outcome> {
    let sys = match &a.load {
        Some(path) => load_gap_system(path)?,
        None => {
            let phi = phi_of(&a.phi)?;
            let opts = GapOptions { table_len: a.table_len, ..GapOptions::default() };
            build_gap_system_with(&phi, a.d, a.eps, &opts)?
        }
    };
    let validation = validate_gap_system(&sys, a.n_max)?;
    if let Some(path) = &a.save {
        let doc = sys.document(sys.table_len() as usize);
        let mut f = std::fs::File::create(path)?;
        crate::report::write_json(&mut f, &doc)?;
    }
    let checks = [
        ("disjoint", &validation.disjoint),
        ("contained", &validation.contained),
        ("gap_floor", &validation.gap_floor),
        ("decaying", &validation.decaying),
        ("normalization", &validation.normalization),
    ];
    let rows = checks
        .iter()
        .map(|(name, c)| {
            vec![name.to_string(), c.pass.to_string(), c.witness.map(|w| w.to_string()).unwrap_or_default(), c.detail.clone()]
        })
        .collect();
    let csv = table(&["check", "pass", "witness", "detail"], rows)?;
    let summary = sys.document(16);
    let result = json!({
        "phi": sys.phi().to_string(),
        "d": sys.d(),
        "eps": sys.eps(),
        "c": sys.c(),
        "iterations": sys.iterations(),
        "tail_bound": sys.tail_bound(),
        "gap_series": sys.gap_series(),
        "table_len": sys.table_len(),
        "ladder_head": summary.ladder.iter().take(16).collect::<Vec<_>>(),
        "validation": to_value(&validation)?,
        "all_pass": validation.all_pass(),
    });
    outcome("gapsys", a, result, Some(csv))
}
