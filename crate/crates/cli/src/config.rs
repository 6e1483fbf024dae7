//! TOML configuration. A file holds a required top-level `seed`, an
//! optional `stages` list for `run`, and one table per subcommand whose keys
//! are that subcommand's long flag names. Relative paths in a file resolve
//! against the file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

/// An all-optional flag set that can be merged with a config section.
pub trait Flags: Sized + Default + Serialize + DeserializeOwned {
    const FIELDS: &'static [&'static str];

    fn config(&self) -> Option<&Path>;

    /// Keeps every value set on `self`, taking the rest from `fallback`.
    fn or(self, fallback: Self) -> Self;

    fn rebase(&mut self, dir: &Path);
}

pub trait Rebase {
    fn rebase(&mut self, _dir: &Path) {}
}

impl Rebase for Option<PathBuf> {
    fn rebase(&mut self, dir: &Path) {
        if let Some(p) = self {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

macro_rules! no_rebase {
    ($($t:ty),*) => { $( impl Rebase for Option<$t> {} )* };
}
no_rebase!(String, usize, u64, f64, f32, bool);

#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| error(path, e.message().to_string()))?;
        for (key, value) in &table {
            match (key.as_str(), value) {
                ("seed", toml::Value::Integer(s)) if *s >= 0 => {}
                ("seed", _) => return Err(error(path, "seed must be a non-negative integer")),
                ("stages", toml::Value::Array(a)) if a.iter().all(toml::Value::is_str) => {}
                ("stages", _) => return Err(error(path, "stages must be a list of strings")),
                (_, toml::Value::Table(_)) => {}
                (k, _) => return Err(error(path, format!("unknown top-level key {k:?}"))),
            }
        }
        if !table.contains_key("seed") {
            return Err(error(path, "missing required top-level seed"));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { path: path.to_path_buf(), dir, table })
    }

    pub fn seed(&self) -> u64 {
        self.table["seed"].as_integer().map_or(0, |s| s as u64)
    }

    pub fn stages(&self) -> Vec<String> {
        match self.table.get("stages") {
            Some(toml::Value::Array(a)) => a.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
            _ => Vec::new(),
        }
    }

    /// Flags from the dotted section `name`, with the top-level seed filled
    /// in for flags that take one.
    pub fn section<T: Flags>(&self, name: &str) -> Result<T> {
        let mut node = &self.table;
        for part in name.split('.') {
            node = match node.get(part) {
                Some(toml::Value::Table(t)) => t,
                Some(_) => return Err(error(&self.path, format!("{name:?} is not a table"))),
                None => return Err(error(&self.path, format!("no [{name}] section"))),
            };
        }
        // Nested tables are sibling stages such as [search.dense].
        let mut flat: toml::Table = node.iter().filter(|(_, v)| !v.is_table()).map(|(k, v)| (k.clone(), v.clone())).collect();
        for key in ["seed", "embed_seed"] {
            let kebab = key.replace('_', "-");
            if T::FIELDS.contains(&key) && !flat.contains_key(&kebab) {
                flat.insert(kebab, toml::Value::Integer(self.seed() as i64));
            }
        }
        let mut flags: T = toml::Value::Table(flat)
            .try_into()
            .map_err(|e: toml::de::Error| error(&self.path, format!("[{name}]: {}", e.message())))?;
        flags.rebase(&self.dir);
        Ok(flags)
    }
}

fn error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_path_buf(), message: message.into() }
}

/// Merges `flags` with the `name` section of its `--config` file, if any.
pub fn resolve<T: Flags>(flags: T, name: &str) -> Result<T> {
    match flags.config().map(Path::to_path_buf) {
        Some(path) => {
            let file = ConfigFile::load(&path)?;
            Ok(flags.or(file.section(name)?))
        }
        None => Ok(flags),
    }
}
