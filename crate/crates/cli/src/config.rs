//! `key = value` configuration files. Flags given on the command line take
//! precedence over file values.

use std::path::PathBuf;

use citykg_geometry::{Crs, Hemisphere};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub epsilon_adjacent: Option<f64>,
    pub zone: Option<Crs>,
    pub rules: Option<PathBuf>,
}

/// `32`, `32N` or `33S`.
pub fn parse_zone(text: &str) -> Result<Crs, String> {
    let t = text.trim();
    let (digits, hemisphere) = match t.chars().last() {
        Some('N' | 'n') => (&t[..t.len() - 1], Hemisphere::North),
        Some('S' | 's') => (&t[..t.len() - 1], Hemisphere::South),
        _ => (t, Hemisphere::North),
    };
    let zone: u8 = digits.parse().map_err(|_| format!("invalid UTM zone `{text}`"))?;
    Crs::utm(zone, hemisphere).map_err(|e| e.to_string())
}

fn number(key: &str, value: &str) -> Result<f64, String> {
    value.parse().map_err(|_| format!("`{key}` expects a number, got `{value}`"))
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = FileConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected key = value", i + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            let at = |e: String| format!("line {}: {e}", i + 1);
            match key {
                "store" => cfg.store = Some(PathBuf::from(value)),
                "threshold" => cfg.threshold = Some(number(key, value).map_err(at)?),
                "epsilon_adjacent" => cfg.epsilon_adjacent = Some(number(key, value).map_err(at)?),
                "zone" => cfg.zone = Some(parse_zone(value).map_err(at)?),
                "rules" => cfg.rules = Some(PathBuf::from(value)),
                _ => return Err(at(format!("unknown key `{key}`"))),
            }
        }
        Ok(cfg)
    }
}
