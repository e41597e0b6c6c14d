use super::{execute, Cli, Command, Format};
use crate::error::{Error, Result};
use crate::report::{lookup, write_json};
use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

/// One experiment of a battery file:
///
/// ```toml
/// [gauss_ladder]
/// command = "ladder --system gauss --phi lin:1 --eps 0.1 --steps 2"
/// expect_field = "result.values.1"
/// expect_value = 18
/// expect_tol = 0
/// ```
#[derive(Clone, Debug, PartialEq)]
struct Experiment {
    name: String,
    command: String,
    field: Option<String>,
    value: Option<toml::Value>,
    tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatteryRow {
    pub name: String,
    pub command: String,
    pub field: String,
    pub expected: String,
    pub tol: f64,
    pub actual: String,
    pub pass: bool,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatteryOutcome {
    pub experiments: usize,
    pub passed: usize,
    pub all_pass: bool,
    pub rows: Vec<BatteryRow>,
}

fn parse_config(text: &str) -> Result<Vec<Experiment>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    table
        .into_iter()
        .map(|(name, section)| {
            let bad = |what: &str| Error::Parse(format!("experiment [{name}]: {what}"));
            let section = section.as_table().ok_or_else(|| bad("expected a section"))?;
            for key in section.keys() {
                if !["command", "expect_field", "expect_value", "expect_tol"].contains(&key.as_str()) {
                    return Err(bad(&format!("unknown key {key:?}")));
                }
            }
            let command = section
                .get("command")
                .and_then(toml::Value::as_str)
                .ok_or_else(|| bad("missing string key \"command\""))?
                .to_string();
            let field = match section.get("expect_field") {
                None => None,
                Some(v) => Some(v.as_str().ok_or_else(|| bad("expect_field must be a string"))?.to_string()),
            };
            let value = section.get("expect_value").cloned();
            if field.is_some() != value.is_some() {
                return Err(bad("expect_field and expect_value go together"));
            }
            let tol = match section.get("expect_tol") {
                None => 0.0,
                Some(toml::Value::Float(f)) => *f,
                Some(toml::Value::Integer(i)) => *i as f64,
                Some(_) => return Err(bad("expect_tol must be a number")),
            };
            if !(tol >= 0.0) {
                return Err(bad("expect_tol must be non-negative"));
            }
            Ok(Experiment { name, command, field, value, tol })
        })
        .collect()
}

fn as_number(v: &Value) -> Option<f64> {
    v.as_f64().or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

fn matches(expected: &toml::Value, actual: &Value, tol: f64) -> bool {
    match expected {
        toml::Value::Integer(i) => as_number(actual).is_some_and(|a| (a - *i as f64).abs() <= tol),
        toml::Value::Float(f) => as_number(actual).is_some_and(|a| (a - f).abs() <= tol),
        toml::Value::Boolean(b) => actual.as_bool() == Some(*b),
        toml::Value::String(s) => actual.as_str() == Some(s.as_str()),
        _ => false,
    }
}

fn run_one(exp: &Experiment, out_dir: &Path) -> BatteryRow {
    let mut row = BatteryRow {
        name: exp.name.clone(),
        command: exp.command.clone(),
        field: exp.field.clone().unwrap_or_default(),
        expected: exp.value.as_ref().map(|v| v.to_string()).unwrap_or_default(),
        tol: exp.tol,
        actual: String::new(),
        pass: false,
        error: String::new(),
    };
    let mut argv = vec!["ifsdim".to_string()];
    argv.extend(exp.command.split_whitespace().skip_while(|&t| t == "ifsdim").map(String::from));
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            row.error = e.to_string().lines().next().unwrap_or("bad command").to_string();
            return row;
        }
    };
    if matches!(cli.command, Command::Battery(_)) {
        row.error = "batteries cannot nest".into();
        return row;
    }
    let outcome = match execute(&cli.command, Format::Json, false) {
        Ok(o) => o,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let report = match crate::report::to_value(&outcome.report) {
        Ok(v) => v,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let written = std::fs::File::create(out_dir.join(format!("{}.json", exp.name)))
        .map_err(Error::from)
        .and_then(|f| write_json(f, &outcome.report));
    if let Err(e) = written {
        row.error = e.to_string();
        return row;
    }
    match (&exp.field, &exp.value) {
        (Some(field), Some(expected)) => match lookup(&report, field) {
            Some(actual) => {
                row.actual = actual.to_string();
                row.pass = matches(expected, actual, exp.tol);
            }
            None => row.error = format!("field {field:?} not in report"),
        },
        _ => row.pass = true,
    }
    row
}

/// Runs every experiment of `config` (in parallel, reported in name order),
/// writing `summary.csv` and one JSON report per experiment to `out_dir`.
pub fn run_battery(config: &Path, out_dir: &Path) -> Result<BatteryOutcome> {
    let text = std::fs::read_to_string(config)?;
    let experiments = parse_config(&text)?;
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<BatteryRow> = experiments.par_iter().map(|e| run_one(e, out_dir)).collect();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(out_dir.join("summary.csv"))?;
    w.write_record(["name", "command", "field", "expected", "tol", "actual", "pass", "error"])?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let passed = rows.iter().filter(|r| r.pass).count();
    Ok(BatteryOutcome { experiments: rows.len(), passed, all_pass: passed == rows.len(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_in_name_order() {
        let exps = parse_config(
            "[b]\ncommand = \"predict --d 2 --phi lin:1 --s0 0\"\n\
             [a]\ncommand = \"words --phi lin:1 --depth 2 --cap 3\"\nexpect_field = \"result.count\"\nexpect_value = 3\n",
        )
        .unwrap();
        assert_eq!(exps.iter().map(|e| e.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(exps[0].tol, 0.0);
        assert!(exps[1].field.is_none());
    }

    #[test]
    fn rejects_malformed_sections() {
        assert!(parse_config("[a]\nexpect_value = 3\n").is_err());
        assert!(parse_config("[a]\ncommand = \"x\"\nexpect_value = 3\n").is_err());
        assert!(parse_config("[a]\ncommand = \"x\"\ntypo = 1\n").is_err());
        assert!(parse_config("top = 1\n").is_err());
        assert!(parse_config("").unwrap().is_empty());
    }

    #[test]
    fn expectation_matching() {
        assert!(matches(&toml::Value::Float(0.5), &Value::from(0.5000001), 1e-6));
        assert!(!matches(&toml::Value::Float(0.5), &Value::from(0.6), 1e-6));
        assert!(matches(&toml::Value::Integer(3), &Value::from("3"), 0.0));
        assert!(matches(&toml::Value::Boolean(true), &Value::from(true), 0.0));
    }
}
