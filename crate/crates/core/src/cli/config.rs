//! Layered run configuration: defaults <- config file <- manifest <- command line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ict::{IctConfig, Method};

/// Everything about a run that is not a training hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub method: Method,
    /// Labeled CSV to split; two moons are generated when unset.
    pub data: Option<String>,
    /// Two-moons size and noise.
    pub n: usize,
    pub noise: f64,
    /// Seed for generation and splitting; defaults to the training seed.
    pub data_seed: Option<u64>,
    pub labels_per_class: usize,
    pub unlabeled_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    pub include_labeled_in_unlabeled: bool,
    /// Scale every split with statistics of the unlabeled set.
    pub standardize: bool,
    /// Save student and teacher every this many steps; 0 disables.
    pub checkpoint_every: usize,
    /// Write every n-th step to the trace (epoch ends are always written).
    pub log_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            method: Method::Ict,
            data: None,
            n: 2506,
            noise: 0.1,
            data_seed: None,
            labels_per_class: 3,
            unlabeled_count: 1000,
            validation_count: 500,
            test_count: 1000,
            include_labeled_in_unlabeled: true,
            standardize: false,
            checkpoint_every: 0,
            log_every: 1,
        }
    }
}

/// Where a resolved key got its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    File,
    Manifest,
    Cli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub options: RunOptions,
    /// Hyperparameters with the method preset applied.
    pub ict: IctConfig,
    pub sources: BTreeMap<String, Source>,
}

impl Resolved {
    /// Flat key/value form, as stored in manifests and accepted back by `--replay`.
    pub fn flat(&self) -> Map<String, Value> {
        let mut m = to_map(&self.options);
        m.extend(to_map(&self.ict));
        m
    }
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("config is a struct"),
    }
}

fn ict_keys() -> Map<String, Value> {
    to_map(&IctConfig::default())
}

/// Merges `layers` over the defaults, later layers winning, and records the
/// source of every key. Unknown keys and ill-typed values are rejected.
pub fn resolve(layers: &[(Source, Map<String, Value>)]) -> Result<Resolved> {
    let ict_defaults = ict_keys();
    let mut run_map = to_map(&RunOptions::default());
    let mut ict_map = ict_defaults.clone();
    let mut sources: BTreeMap<String, Source> = run_map
        .keys()
        .chain(ict_map.keys())
        .map(|k| (k.clone(), Source::Default))
        .collect();

    for (source, layer) in layers {
        for (key, value) in layer {
            let target = if ict_defaults.contains_key(key) {
                &mut ict_map
            } else if run_map.contains_key(key) {
                &mut run_map
            } else {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key `{key}`"
                )));
            };
            target.insert(key.clone(), value.clone());
            sources.insert(key.clone(), *source);
        }
    }

    let options: RunOptions = serde_json::from_value(Value::Object(run_map))
        .map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
    let mut ict: IctConfig = serde_json::from_value(Value::Object(ict_map))
        .map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
    ict.apply_method(options.method);
    ict.validate()?;
    if options.log_every == 0 {
        return Err(Error::InvalidArgument("log_every must be >= 1".into()));
    }
    Ok(Resolved {
        options,
        ict,
        sources,
    })
}

/// Reads the given sections of a TOML config file, later sections overriding earlier ones.
pub fn read_config_file(path: &Path, sections: &[&str]) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e
            .span()
            .map_or(0, |s| text[..s.start].matches('\n').count() + 1),
        message: format!("{}: {}", path.display(), e.message()),
    })?;
    for key in table.keys() {
        if !["train", "experiment"].contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "{}: unknown section `[{key}]`",
                path.display()
            )));
        }
    }
    let mut out = Map::new();
    for section in sections {
        match table.get(*section) {
            None => {}
            Some(toml::Value::Table(t)) => {
                if let Value::Object(m) = serde_json::to_value(t).expect("toml converts") {
                    out.extend(m);
                }
            }
            Some(_) => {
                return Err(Error::InvalidArgument(format!(
                    "{}: `{section}` must be a table",
                    path.display()
                )))
            }
        }
    }
    Ok(out)
}

/// The `config` object of a run manifest.
pub fn read_manifest_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })?;
    match v.get("config") {
        Some(Value::Object(m)) => Ok(m.clone()),
        _ => Err(Error::Schema(format!(
            "{}: no `config` object",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn layer(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn defaults_only() {
        let r = resolve(&[]).unwrap();
        assert_eq!(r.ict, IctConfig::default());
        assert_eq!(r.options, RunOptions::default());
        assert!(r.sources.values().all(|s| *s == Source::Default));
    }

    #[test]
    fn later_layers_win_and_are_recorded() {
        let r = resolve(&[
            (
                Source::File,
                layer(json!({"w_max": 10, "seed": 4, "n": 300})),
            ),
            (Source::Cli, layer(json!({"w_max": 100.0}))),
        ])
        .unwrap();
        assert_eq!(r.ict.w_max, 100.0);
        assert_eq!(r.ict.seed, 4);
        assert_eq!(r.options.n, 300);
        assert_eq!(r.sources["w_max"], Source::Cli);
        assert_eq!(r.sources["seed"], Source::File);
        assert_eq!(r.sources["beta_alpha"], Source::Default);
    }

    #[test]
    fn method_preset_is_applied() {
        let r = resolve(&[(
            Source::Cli,
            layer(json!({"method": "supervised", "w_max": 5})),
        )])
        .unwrap();
        assert_eq!(r.ict.w_max, 0.0);
    }

    #[test]
    fn bad_keys_and_values() {
        assert!(resolve(&[(Source::File, layer(json!({"wmax": 1})))]).is_err());
        assert!(resolve(&[(Source::File, layer(json!({"w_max": "big"})))]).is_err());
        assert!(resolve(&[(Source::File, layer(json!({"ema_decay": 1.5})))]).is_err());
        assert!(resolve(&[(Source::File, layer(json!({"method": "vat"})))]).is_err());
    }

    #[test]
    fn flat_form_round_trips() {
        let r = resolve(&[(
            Source::Cli,
            layer(json!({"hidden": [8, 8], "method": "ict_no_teacher"})),
        )])
        .unwrap();
        let again = resolve(&[(Source::Manifest, r.flat())]).unwrap();
        assert_eq!(again.ict, r.ict);
        assert_eq!(again.options, r.options);
    }

    #[test]
    fn toml_sections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[train]\nw_max = 3\nseed = 1\n[experiment]\nseed = 9\n").unwrap();
        let m = read_config_file(&p, &["train", "experiment"]).unwrap();
        assert_eq!(m["seed"], json!(9));
        assert_eq!(m["w_max"], json!(3));
        std::fs::write(&p, "[bogus]\nx = 1\n").unwrap();
        assert!(read_config_file(&p, &["train"]).is_err());
        std::fs::write(&p, "[train]\nw_max = \n").unwrap();
        assert!(matches!(
            read_config_file(&p, &["train"]),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
