//! Optional TOML config file with one table per subcommand, e.g.
//!
//! ```toml
//! [estimate]
//! stride = 4
//! table = "lut.bin"
//! ```
//!
//! Keys are the long flag names with `-` replaced by `_`. Flags given on the
//! command line win over the file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn load(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    text.parse().with_context(|| format!("parsing config {}", path.display()))
}

/// `flags` with any unset option filled from `config[section]`.
pub fn resolve<T: Args + Serialize + DeserializeOwned>(flags: T, section: &str, config: Option<&toml::Table>) -> Result<T> {
    let Some(entry) = config.and_then(|c| c.get(section)) else {
        return Ok(flags);
    };
    let Some(base) = entry.as_table() else {
        bail!("config section [{section}] is not a table");
    };
    let cmd = T::augment_args(clap::Command::new("config"));
    if let Some(key) = base.keys().find(|k| cmd.get_arguments().all(|a| a.get_id() != k.as_str())) {
        bail!("config section [{section}]: unknown key `{key}`");
    }
    let mut merged = base.clone();
    match toml::Value::try_from(&flags)? {
        toml::Value::Table(given) => merged.extend(given),
        _ => unreachable!("argument structs serialize to tables"),
    }
    toml::Value::Table(merged)
        .try_into()
        .with_context(|| format!("config section [{section}]"))
}
