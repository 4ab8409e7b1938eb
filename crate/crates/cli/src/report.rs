//! Versioned report envelope and its JSON / CSV renderings.

use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::config::{AnalysisConfig, OutputFormat};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "sizeshare";

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub arguments: Value,
    pub config: AnalysisConfig,
    pub results: Value,
    pub warnings: Vec<String>,
    pub generated_at_unix: Option<u64>,
}

/// Rewrite every non-integer number with 17 significant digits.
pub fn fix_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.as_i64().is_none() && n.as_u64().is_none() => match n.as_f64() {
            Some(x) => Number::from_str(&format!("{x:.16e}")).map(Value::Number).unwrap_or(Value::Null),
            None => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(fix_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fix_precision(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

impl Report {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema_version".into(), SCHEMA_VERSION.into());
        m.insert("tool".into(), TOOL.into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("command".into(), self.command.clone().into());
        m.insert("arguments".into(), self.arguments.clone());
        m.insert("config".into(), to_value(&self.config));
        m.insert("seed".into(), self.seed().into());
        m.insert("results".into(), self.results.clone());
        m.insert("warnings".into(), to_value(&self.warnings));
        if let Some(t) = self.generated_at_unix {
            m.insert("generated_at_unix".into(), t.into());
        }
        fix_precision(Value::Object(m))
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.render_json(),
            OutputFormat::Csv => self.render_csv(),
        }
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).unwrap_or_default();
        s.push('\n');
        s
    }

    /// `field,value` rows with dotted paths for nested results.
    pub fn render_csv(&self) -> String {
        let v = self.to_value();
        let mut rows = Vec::new();
        for key in ["schema_version", "tool", "version", "command", "seed"] {
            flatten(key, &v[key], &mut rows);
        }
        flatten("results", &v["results"], &mut rows);
        for (i, w) in self.warnings.iter().enumerate() {
            rows.push((format!("warnings.{i}"), w.clone()));
        }
        if let Some(t) = self.generated_at_unix {
            rows.push(("generated_at_unix".into(), t.to_string()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["field", "value"]);
        for (k, val) in rows {
            let _ = w.write_record([k, val]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Report {
        Report {
            command: "weighting".into(),
            arguments: json!({"xi": 2.0}),
            config: AnalysisConfig::default(),
            results: json!({"macro_ls": 0.1 + 0.2, "n": 30, "nested": [1.5, null]}),
            warnings: vec!["w".into()],
            generated_at_unix: None,
        }
    }

    #[test]
    fn seventeen_digits() {
        let text = sample().render_json();
        assert!(text.contains("\"macro_ls\": 3.0000000000000004e-1"), "{text}");
        assert!(text.contains("\"n\": 30"));
        assert!(text.contains("\"seed\": 0"));
        assert!(text.contains("\"xi\": 2.0000000000000000e+0"));
        assert!(!text.contains("generated_at_unix"));
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["results"]["macro_ls"].as_f64(), Some(0.1 + 0.2));
    }

    #[test]
    fn key_order_is_stable() {
        let text = sample().render_json();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("schema_version") < pos("command"));
        assert!(pos("command") < pos("config"));
        assert!(pos("config") < pos("results"));
        assert_eq!(text, sample().render_json());
    }

    #[test]
    fn csv_flattening() {
        let text = sample().render_csv();
        assert!(text.starts_with("field,value\n"));
        assert!(text.contains("results.macro_ls,3.0000000000000004e-1\n"));
        assert!(text.contains("results.nested.0,1.5000000000000000e+0\n"));
        assert!(text.contains("results.nested.1,\n"));
        assert!(text.contains("warnings.0,w\n"));
    }
}
