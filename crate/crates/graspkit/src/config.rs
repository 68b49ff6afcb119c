//! Run configuration: flat `key = value` files merged under command-line
//! flags, with every resolved value recorded for echoing.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::formats::content_lines;
use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    file: BTreeMap<String, (usize, String)>,
    used: Vec<String>,
    resolved: Vec<(String, String)>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (n, line) in content_lines(text) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {n}: expected key = value")))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {n}: empty key")));
            }
            if file
                .insert(key.clone(), (n, v.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "config line {n}: duplicate key {key:?}"
                )));
            }
        }
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        let Some((line, raw)) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.push(key.to_string());
        raw.parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "config line {line}: invalid value {raw:?} for {key}"
            ))
        })
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Flag, else file, else `None`.
    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        let value = match flag {
            Some(v) => {
                self.used.push(key.to_string());
                Some(v)
            }
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn value<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        let v = self.optional(key, flag)?;
        Ok(match v {
            Some(v) => v,
            None => {
                self.record(key, &default);
                default
            }
        })
    }

    pub fn required<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<T, CliError> {
        self.optional(key, flag)?.ok_or_else(|| {
            CliError::Usage(format!(
                "missing required option --{key} (flag or config file)"
            ))
        })
    }

    /// Errors on file keys no option consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        for (key, (line, _)) in &self.file {
            if !self.used.contains(key) && !self.resolved.iter().any(|(k, _)| k == key) {
                return Err(CliError::Usage(format!(
                    "config line {line}: unknown key {key:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }

    pub fn echo(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("config: {k} = {v}\n"))
            .collect()
    }
}
