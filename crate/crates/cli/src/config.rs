//! Numbers with an optional `pi` suffix and flat `key = value` config files.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;

use meanfield::Error;

/// Parse a real number, accepting multiples of π: `12pi`, `12π`, `0.5*pi`, `pi`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (body, factor) = if let Some(b) = lower.strip_suffix("pi") {
        (b.to_string(), PI)
    } else if let Some(b) = t.strip_suffix('π') {
        (b.to_string(), PI)
    } else {
        (t.to_string(), 1.0)
    };
    let body = body.trim().trim_end_matches('*').trim();
    let v = if body.is_empty() && factor != 1.0 {
        1.0
    } else {
        body.parse::<f64>().map_err(|e| format!("`{s}` is not a number: {e}"))?
    };
    let v = v * factor;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Parse a comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(parse_real).collect()
}

/// Effective settings: command-line flags override values from a config file,
/// which override built-in defaults. Every resolved value is recorded so the
/// report can embed the full configuration.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, (usize, String)>,
    used: BTreeSet<String>,
    effective: Vec<(String, String)>,
}

impl Settings {
    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut file = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: k + 1, message: format!("expected `key = value`, got `{raw}`") })?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::Parse { line: k + 1, message: "empty key".into() });
            }
            if file.insert(key.clone(), (k + 1, value.trim().to_string())).is_some() {
                return Err(Error::Parse { line: k + 1, message: format!("duplicate key `{key}`") });
            }
        }
        Ok(Settings { file, ..Default::default() })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => Settings::from_text(&std::fs::read_to_string(p)?),
        }
    }

    fn file_value<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, Error> {
        match self.file.get(key) {
            None => Ok(None),
            Some((line, v)) => {
                self.used.insert(key.to_string());
                parse(v).map(Some).map_err(|message| Error::Parse { line: *line, message: format!("{key}: {message}") })
            }
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.effective.push((key.to_string(), value));
    }

    /// Resolve a real value; `None` when neither flag, file nor default supplies one.
    pub fn real_opt(&mut self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<Option<f64>, Error> {
        let file = self.file_value(key, parse_real)?;
        let v = flag.or(file).or(default);
        if let Some(x) = v {
            self.record(key, format!("{x}"));
        }
        Ok(v)
    }

    pub fn real(&mut self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64, Error> {
        self.real_opt(key, flag, default)?.ok_or_else(|| Error::Config(format!("missing required value `{key}`")))
    }

    pub fn count(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize, Error> {
        let file = self.file_value(key, |s| s.parse::<usize>().map_err(|e| e.to_string()))?;
        let v = flag.or(file).unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64, Error> {
        let file = self.file_value("seed", |s| s.parse::<u64>().map_err(|e| e.to_string()))?;
        let v = flag.or(file).unwrap_or(0);
        self.record("seed", v.to_string());
        Ok(v)
    }

    pub fn text(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<String, Error> {
        let file = self.file_value(key, |s| Ok(s.to_string()))?;
        let v = flag.or(file).unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn text_opt(&mut self, key: &str, flag: Option<String>) -> Result<Option<String>, Error> {
        let file = self.file_value(key, |s| Ok(s.to_string()))?;
        let v = flag.or(file);
        if let Some(x) = &v {
            self.record(key, x.clone());
        }
        Ok(v)
    }

    pub fn list(&mut self, key: &str, flag: Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>, Error> {
        let file = self.file_value(key, parse_list)?;
        let v = flag.or(file).unwrap_or_else(|| default.to_vec());
        self.record(key, v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    /// Whether the config file sets `key` (used to detect explicit geometry).
    pub fn file_has(&self, key: &str) -> bool {
        self.file.contains_key(key)
    }

    /// The effective configuration, failing on config-file keys that no
    /// option consumed.
    pub fn finish(&self) -> Result<Vec<(String, String)>, Error> {
        let unknown: Vec<&str> = self.file.keys().filter(|k| !self.used.contains(*k)).map(|k| k.as_str()).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        Ok(self.effective.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_suffix() {
        assert_eq!(parse_real("12pi").unwrap(), 12.0 * PI);
        assert_eq!(parse_real("12π").unwrap(), 12.0 * PI);
        assert_eq!(parse_real("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("37.699").unwrap(), 37.699);
        assert_eq!(parse_real("-1e3").unwrap(), -1e3);
        assert!(parse_real("twelve").is_err());
        assert!(parse_real("").is_err());
        assert_eq!(parse_list("10, 30,100").unwrap(), vec![10.0, 30.0, 100.0]);
    }

    #[test]
    fn flags_override_file_and_unknown_keys_fail() {
        let mut s = Settings::from_text("rho = 10pi\nnr = 32 # comment\n\n").unwrap();
        assert_eq!(s.real("rho", Some(1.0), None).unwrap(), 1.0);
        assert_eq!(s.count("nr", None, 64).unwrap(), 32);
        assert_eq!(s.count("ntheta", None, 128).unwrap(), 128);
        let eff = s.finish().unwrap();
        assert_eq!(eff[0], ("rho".to_string(), "1".to_string()));

        let mut t = Settings::from_text("rho = 10pi\nbogus = 1\n").unwrap();
        t.real("rho", None, None).unwrap();
        assert!(matches!(t.finish(), Err(Error::Config(_))));
        assert!(matches!(Settings::from_text("rho 3"), Err(Error::Parse { line: 1, .. })));
        let mut u = Settings::from_text("\nrho = abc").unwrap();
        assert!(matches!(u.real("rho", None, None), Err(Error::Parse { line: 2, .. })));
    }
}
