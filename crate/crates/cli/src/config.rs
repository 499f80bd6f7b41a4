//! `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known and its value must parse; anything else is rejected up front.
//! Command-line flags override file values, which override built-in
//! defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const CONFIG_ENV: &str = "GEOVLM_CONFIG";

#[derive(Clone, Copy)]
enum Kind {
    Usize,
    U64,
    Real,
    Bool,
    Text,
    UsizeList,
    RealList,
    OneOf(&'static [&'static str]),
}

const KEYS: &[(&str, Kind)] = &[
    // retrieval
    ("k", Kind::Usize),
    ("accumulation", Kind::OneOf(&["f32", "f64"])),
    // dimensions, used by synth and ingest
    ("image_dim", Kind::Usize),
    ("text_dim", Kind::Usize),
    // reranker
    ("latent_dim", Kind::Usize),
    ("aligner_layers", Kind::Usize),
    ("aligner_hidden", Kind::Usize),
    ("ln_epsilon", Kind::Real),
    ("shared_projections", Kind::Bool),
    ("init_seed", Kind::U64),
    // training
    ("margin", Kind::Real),
    ("optimizer", Kind::OneOf(&["sgd", "adam"])),
    ("lr", Kind::Real),
    ("adam_beta1", Kind::Real),
    ("adam_beta2", Kind::Real),
    ("adam_eps", Kind::Real),
    ("batch_size", Kind::Usize),
    ("epochs", Kind::Usize),
    ("shuffle_seed", Kind::U64),
    ("grad_clip", Kind::Real),
    ("loss_on", Kind::OneOf(&["scores", "logits"])),
    ("val_split", Kind::Real),
    ("drop_semi_positives", Kind::Bool),
    // evaluation
    ("ks", Kind::UsizeList),
    ("thresholds_km", Kind::RealList),
    ("earth_radius_km", Kind::Real),
    // synthetic data
    ("n_locations", Kind::Usize),
    ("group_size", Kind::Usize),
    ("image_noise", Kind::Real),
    ("location_spread", Kind::Real),
    ("text_separation", Kind::Real),
    ("label_semi_positives", Kind::Bool),
    // embedding endpoint
    ("embed_url", Kind::Text),
    ("embed_model", Kind::Text),
    ("embed_text_dim", Kind::Usize),
];

fn check_value(kind: Kind, value: &str) -> bool {
    match kind {
        Kind::Usize => value.parse::<usize>().is_ok(),
        Kind::U64 => value.parse::<u64>().is_ok(),
        Kind::Real => value.parse::<f64>().is_ok(),
        Kind::Bool => value.parse::<bool>().is_ok(),
        Kind::Text => true,
        Kind::UsizeList => parse_list::<usize>(value).is_ok(),
        Kind::RealList => parse_list::<f64>(value).is_ok(),
        Kind::OneOf(options) => options.contains(&value),
    }
}

/// Comma-separated values, e.g. `0.0,0.5`.
pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| format!("bad list item {v:?}")))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| CliError::Validation(format!("{origin}:{}: {m}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let kind = KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, kind)| *kind)
                .ok_or_else(|| bad(format!("unknown key {key:?}")))?;
            if !check_value(kind, value) {
                return Err(bad(format!("bad value {value:?} for {key}")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(bad(format!("duplicate key {key:?}")));
            }
        }
        Ok(Self { values })
    }

    /// Reads `path`, or the file named by `GEOVLM_CONFIG` when `path` is
    /// `None`. No file at all gives an empty configuration.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let env_path = std::env::var_os(CONFIG_ENV).filter(|p| !p.is_empty());
        let path = match (path, &env_path) {
            (Some(p), _) => p,
            (None, Some(p)) => Path::new(p),
            (None, None) => return Ok(Self::default()),
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "unregistered key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// `flag`, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> T {
        flag.or_else(|| self.raw(key).and_then(|v| v.parse().ok()))
            .unwrap_or(default)
    }

    /// Like [`pick`](Self::pick) with no default.
    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Option<T> {
        flag.or_else(|| self.raw(key).and_then(|v| v.parse().ok()))
    }

    pub fn pick_list<T: FromStr + Clone>(&self, flag: Option<&[T]>, key: &str, default: &[T]) -> Vec<T> {
        match (flag, self.raw(key)) {
            (Some(f), _) => f.to_vec(),
            (None, Some(v)) => parse_list(v).unwrap_or_else(|_| default.to_vec()),
            (None, None) => default.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = RunConfig::parse("# comment\nk = 5\nthresholds_km=0.0,0.25\n\nloss_on=logits\n", "c").unwrap();
        assert_eq!(c.pick(None, "k", 10usize), 5);
        assert_eq!(c.pick(Some(3usize), "k", 10), 3);
        assert_eq!(c.pick(None, "epochs", 7usize), 7);
        assert_eq!(c.pick_list::<f64>(None, "thresholds_km", &[]), vec![0.0, 0.25]);
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let err = RunConfig::parse("k=5\nbogus=1\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("cfg:2"));
        assert!(err.to_string().contains("bogus"));
        assert!(RunConfig::parse("k=five\n", "c").is_err());
        assert!(RunConfig::parse("optimizer=rmsprop\n", "c").is_err());
        assert!(RunConfig::parse("k=1\nk=2\n", "c").is_err());
        assert!(RunConfig::parse("just a line\n", "c").is_err());
    }
}
