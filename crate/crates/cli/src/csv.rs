//! Optional flat CSV emission: one file per scenario with every check and
//! every leaf value of the results tree, addressed by dotted path. Meant
//! for spreadsheets and plotting scripts, not for round-tripping.

use serde_json::Value;
use std::path::Path;

use crate::report::BatchReport;
use crate::InputError;

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), v, rows);
            }
        }
        Value::Null => rows.push((prefix.to_owned(), String::new())),
        Value::Bool(b) => rows.push((prefix.to_owned(), b.to_string())),
        Value::Number(n) => rows.push((prefix.to_owned(), n.to_string())),
        Value::String(s) => rows.push((prefix.to_owned(), s.clone())),
    }
}

/// Write `scenario-NNN-<command>.csv` files into `dir`.
pub fn emit(report: &BatchReport, dir: &Path) -> Result<(), InputError> {
    std::fs::create_dir_all(dir)?;
    for scenario in &report.scenarios {
        let mut lines = vec!["section,name,value".to_owned()];
        lines.push(format!(
            "status,scenario,{}",
            serde_json::to_value(scenario.status)
                .expect("status serializes")
                .as_str()
                .expect("status is a string")
        ));
        for check in &scenario.checks {
            lines.push(format!("check,{},{}", escape(&check.name), check.pass));
        }
        let mut rows = Vec::new();
        flatten("", &scenario.results, &mut rows);
        for (path, value) in rows {
            lines.push(format!("result,{},{}", escape(&path), escape(&value)));
        }
        if let Some(err) = &scenario.error {
            lines.push(format!("error,message,{}", escape(err)));
        }
        let name = format!("scenario-{:03}-{}.csv", scenario.index, scenario.command);
        std::fs::write(dir.join(name), lines.join("\n") + "\n")?;
    }
    Ok(())
}
