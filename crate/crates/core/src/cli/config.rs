use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::CliError;
use crate::data::SynthConfig;
use crate::model::ArchConfig;
use crate::train::RunConfig;

/// Sections of a config file, in echo order.
const SECTIONS: [&str; 3] = ["run", "synth", "arch"];

/// Path-valued run keys, absent from a serialized default.
const OPTIONAL_KEYS: [&str; 5] = ["run.data", "run.labels", "run.templates", "run.init", "run.out"];

/// Flags that flip a boolean key off.
const NEGATIONS: [(&str, &str); 4] = [
    ("no_names", "use_names"),
    ("no_descriptions", "use_descriptions"),
    ("no_shared_text", "share_text_encoder"),
    ("no_activity_text", "use_activity_text"),
];

/// The fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub run: RunConfig,
    pub synth: SynthConfig,
    pub arch: ArchConfig,
}

impl CliConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes the resolved config as `config.toml` in `dir`.
    pub fn echo(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), self.to_toml())?;
        Ok(())
    }
}

/// A `--key value` pair lifted off the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub flag: String,
    pub value: Option<String>,
}

/// Where each source of settings stands, lowest precedence first.
#[derive(Debug, Clone, Default)]
pub struct Sources<'a> {
    pub env_seed: Option<String>,
    pub file: Option<&'a Path>,
    pub overrides: &'a [Override],
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                flatten(&format!("{prefix}.{k}"), v, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn base_table(run: &RunConfig) -> Table {
    let base = CliConfig {
        run: run.clone(),
        synth: SynthConfig::default(),
        arch: ArchConfig::default(),
    };
    match Value::try_from(base).expect("config serializes") {
        Value::Table(t) => t,
        _ => unreachable!("config is a table"),
    }
}

/// Every settable key with its default, `None` for unset paths.
fn known_keys(base: &Table) -> Vec<(String, Option<Value>)> {
    let mut out = Vec::new();
    for s in SECTIONS {
        let mut leaves = Vec::new();
        flatten(s, &base[s], &mut leaves);
        out.extend(leaves.into_iter().map(|(k, v)| (k, Some(v))));
    }
    out.extend(OPTIONAL_KEYS.iter().map(|k| (k.to_string(), None)));
    out
}

fn set(table: &mut Table, key: &str, value: Value) {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("sections are tables");
    }
    t.insert(last.to_string(), value);
}

/// Keys a flag name refers to: a full key, a key inside a section, or
/// every key whose last component matches.
fn resolve_flag(name: &str, keys: &[(String, Option<Value>)]) -> Vec<usize> {
    let exact: Vec<usize> = keys
        .iter()
        .enumerate()
        .filter(|(_, (k, _))| k == name || k.split_once('.').is_some_and(|(_, rest)| rest == name))
        .map(|(i, _)| i)
        .collect();
    if !exact.is_empty() {
        return exact;
    }
    keys.iter()
        .enumerate()
        .filter(|(_, (k, _))| k.rsplit('.').next() == Some(name))
        .map(|(i, _)| i)
        .collect()
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.into()))
}

/// True when `flag` names a config key or a negation alias.
pub fn is_config_flag(flag: &str) -> bool {
    let name = normalize(flag);
    NEGATIONS.iter().any(|(n, _)| *n == name) || !resolve_flag(&name, &known_keys(&base_table(&RunConfig::pretrain()))).is_empty()
}

/// True when `flag` names a boolean key and may stand without a value.
pub fn is_bool_flag(flag: &str) -> bool {
    let name = normalize(flag);
    if NEGATIONS.iter().any(|(n, _)| *n == name) {
        return true;
    }
    let keys = known_keys(&base_table(&RunConfig::pretrain()));
    let hits = resolve_flag(&name, &keys);
    !hits.is_empty() && hits.iter().all(|&i| matches!(keys[i].1, Some(Value::Boolean(_))))
}

fn normalize(flag: &str) -> String {
    flag.trim_start_matches('-').replace('-', "_")
}

fn check_file_keys(file: &Table, keys: &[(String, Option<Value>)]) -> Result<(), CliError> {
    for (section, v) in file {
        if !SECTIONS.contains(&section.as_str()) {
            return Err(CliError::Config(format!("unknown key `{section}`")));
        }
        let mut leaves = Vec::new();
        flatten(section, v, &mut leaves);
        for (k, _) in leaves {
            if !keys.iter().any(|(known, _)| *known == k) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }
    }
    Ok(())
}

fn merge(into: &mut Table, from: &Table) {
    for (k, v) in from {
        match (into.get_mut(k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}

fn section<T: for<'de> Deserialize<'de>>(table: &Table, name: &str) -> Result<T, CliError> {
    table[name]
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{name}: {}", e.message().trim())))
}

fn parse_sections(table: &Table) -> Result<CliConfig, CliError> {
    Ok(CliConfig {
        run: section(table, "run")?,
        synth: section(table, "synth")?,
        arch: section(table, "arch")?,
    })
}

/// The first key whose resolved value alone breaks the defaults.
fn blame(run: &RunConfig, keys: &[(String, Option<Value>)], table: &Table) -> Option<CliError> {
    let mut leaves = Vec::new();
    for s in SECTIONS {
        flatten(s, &table[s], &mut leaves);
    }
    leaves.into_iter().find_map(|(k, v)| {
        if keys.iter().any(|(known, default)| *known == k && default.as_ref() == Some(&v)) {
            return None;
        }
        let mut probe = base_table(run);
        set(&mut probe, &k, v);
        parse_sections(&probe).err().map(|e| {
            let msg = e.to_string();
            let detail = msg.splitn(3, ": ").nth(2).unwrap_or(&msg);
            CliError::Config(format!("{k}: {detail}"))
        })
    })
}

/// Layers defaults, `CLEF_SEED`, the config file and flag overrides, in
/// that order, on top of `run`.
pub fn resolve(run: RunConfig, src: &Sources) -> Result<CliConfig, CliError> {
    let stage = run.stage;
    let mut table = base_table(&run);
    let keys = known_keys(&table);
    if let Some(raw) = &src.env_seed {
        let seed: u64 = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("CLEF_SEED: {raw:?} is not an unsigned integer")))?;
        set(&mut table, "run.seed", Value::Integer(seed as i64));
        set(&mut table, "synth.seed", Value::Integer(seed as i64));
    }
    if let Some(path) = src.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        let file: Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Config(format!("config: {}", e.message().trim().replace('\n', " ")))
        })?;
        check_file_keys(&file, &keys)?;
        merge(&mut table, &file);
    }
    for o in src.overrides {
        let name = normalize(&o.flag);
        if let Some((_, target)) = NEGATIONS.iter().find(|(n, _)| *n == name) {
            for i in resolve_flag(target, &keys) {
                set(&mut table, &keys[i].0, Value::Boolean(false));
            }
            continue;
        }
        let hits = resolve_flag(&name, &keys);
        if hits.is_empty() {
            return Err(CliError::Config(format!("unknown key `{name}`")));
        }
        let value = match &o.value {
            Some(raw) => parse_value(raw),
            None if hits.iter().all(|&i| matches!(keys[i].1, Some(Value::Boolean(_)))) => Value::Boolean(true),
            None => return Err(CliError::Config(format!("{name}: missing value"))),
        };
        for i in hits {
            set(&mut table, &keys[i].0, value.clone());
        }
    }
    let mut cfg = match parse_sections(&table) {
        Ok(cfg) => cfg,
        Err(e) => return Err(blame(&run, &keys, &table).unwrap_or(e)),
    };
    cfg.run.stage = stage;
    Ok(cfg)
}
