//! `--config` files: flat TOML key-value pairs overriding the defaults.

use std::collections::BTreeSet;
use std::path::Path;

use toml::{Table, Value};

use crate::CliError;

/// Keys read from a config file; whatever is left unread is an error.
#[derive(Debug, Default)]
pub struct Overrides {
    table: Table,
    used: BTreeSet<String>,
}

impl Overrides {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("bad config: {}", e.message())))?;
        Ok(Self {
            table,
            used: BTreeSet::new(),
        })
    }

    fn get(&mut self, key: &str) -> Option<&Value> {
        let v = self.table.get(key)?;
        self.used.insert(key.to_string());
        Some(v)
    }

    pub fn f64(&mut self, key: &str, target: &mut f64) -> Result<(), CliError> {
        match self.get(key) {
            None => Ok(()),
            Some(Value::Float(x)) => {
                *target = *x;
                Ok(())
            }
            Some(Value::Integer(i)) => {
                *target = *i as f64;
                Ok(())
            }
            Some(v) => Err(CliError::Usage(format!("config key {key}: expected a number, got {v}"))),
        }
    }

    pub fn opt_f64(&mut self, key: &str, target: &mut Option<f64>) -> Result<(), CliError> {
        let mut x = f64::NAN;
        self.f64(key, &mut x)?;
        if !x.is_nan() {
            *target = Some(x);
        }
        Ok(())
    }

    pub fn usize(&mut self, key: &str, target: &mut usize) -> Result<(), CliError> {
        match self.get(key) {
            None => Ok(()),
            Some(Value::Integer(i)) if *i >= 0 => {
                *target = *i as usize;
                Ok(())
            }
            Some(v) => Err(CliError::Usage(format!(
                "config key {key}: expected a non-negative integer, got {v}"
            ))),
        }
    }

    pub fn string(&mut self, key: &str, target: &mut String) -> Result<(), CliError> {
        match self.get(key) {
            None => Ok(()),
            Some(Value::String(s)) => {
                *target = s.clone();
                Ok(())
            }
            Some(v) => Err(CliError::Usage(format!("config key {key}: expected a string, got {v}"))),
        }
    }

    /// Fails on any key no reader asked for.
    pub fn finish(self) -> Result<(), CliError> {
        let unknown: Vec<&String> = self.table.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("unknown config keys: {unknown:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_numbers_and_rejects_leftovers() {
        let mut o = Overrides::parse("rel_tol = 1e-10\nsegments = 30\nbogus = 1\n").unwrap();
        let (mut r, mut s) = (0.0, 0);
        o.f64("rel_tol", &mut r).unwrap();
        o.usize("segments", &mut s).unwrap();
        assert_eq!((r, s), (1e-10, 30));
        assert!(matches!(o.finish(), Err(CliError::Usage(m)) if m.contains("bogus")));
    }

    #[test]
    fn integer_promotes_to_float_but_not_back() {
        let mut o = Overrides::parse("a = 2\nb = 2.5\n").unwrap();
        let mut a = 0.0;
        o.f64("a", &mut a).unwrap();
        assert_eq!(a, 2.0);
        let mut b = 0;
        assert!(o.usize("b", &mut b).is_err());
    }
}
