//! `report.json`: one section per subcommand, merged across runs into the
//! same output directory.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_FORMAT: u64 = 1;

pub fn load(out: &Path) -> Result<Map<String, Value>, CliError> {
    let path = out.join(REPORT_FILE);
    if !path.exists() {
        return Ok(Map::new());
    }
    let text = std::fs::read_to_string(&path)?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) if m.get("fairsim_report") == Some(&json!(REPORT_FORMAT)) => Ok(m),
        _ => {
            log::warn!(
                "{} is not a report of this format; starting a new one",
                path.display()
            );
            Ok(Map::new())
        }
    }
}

/// Merges `sections` into the report in `out` and records `config` under
/// `subcommand`. Keys are kept sorted so output is byte-stable.
pub fn merge(
    out: &Path,
    subcommand: &str,
    config: Value,
    dataset: Option<Value>,
    sections: Vec<(&str, Value)>,
) -> Result<(), CliError> {
    let mut report = load(out)?;
    report.insert("fairsim_report".into(), json!(REPORT_FORMAT));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Some(d) = dataset {
        report.insert("dataset".into(), d);
    }
    let configs = report.entry("config").or_insert_with(|| json!({}));
    if let Value::Object(c) = configs {
        c.insert(subcommand.into(), config);
    }
    for (name, value) in sections {
        report.insert(name.into(), value);
    }
    let text = serde_json::to_string_pretty(&Value::Object(report)).expect("report serializes");
    std::fs::write(out.join(REPORT_FILE), text + "\n")?;
    Ok(())
}
