//! Run reports: `key = value` lines grouped in `[section]`s separated by blank
//! lines. The only line that changes between identical runs is `timestamp`.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Clone, Debug, Default)]
pub struct Report {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    /// Start a new section; subsequent entries go into it.
    pub fn section(&mut self, name: &str) -> &mut Self {
        self.sections.push((name.to_string(), Vec::new()));
        self
    }

    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        if self.sections.is_empty() {
            self.section("run");
        }
        self.sections.last_mut().unwrap().1.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .filter(|(s, _)| s == section)
            .flat_map(|(_, kv)| kv.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Render with a `timestamp` line at the end of the first section.
    pub fn render(&self, timestamp: Option<u64>) -> String {
        let mut out = String::new();
        for (n, (name, kv)) in self.sections.iter().enumerate() {
            if n > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in kv {
                let _ = writeln!(out, "{k} = {v}");
            }
            if n == 0 {
                if let Some(t) = timestamp {
                    let _ = writeln!(out, "timestamp = {t}");
                }
            }
        }
        out
    }
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A report with its `timestamp` line removed, for comparing runs.
pub fn strip_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("timestamp = ")).map(|l| format!("{l}\n")).collect()
}

/// Full-precision float formatting used in reports.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut r = Report::new();
        r.put("command", "radial").section("result").put("sigma", num(1.5));
        let text = r.render(Some(42));
        assert_eq!(text, "[run]\ncommand = radial\ntimestamp = 42\n\n[result]\nsigma = 1.500000000000e0\n");
        assert_eq!(strip_timestamp(&text), r.render(None));
        assert_eq!(r.get("result", "sigma"), Some("1.500000000000e0"));
    }
}
