//! Plain-text run configuration: `key = value` pairs grouped under
//! `[section]` headers, `#` comments. The exact grammar is documented in the
//! repository README; keys mirror the command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use llc_core::{Error, Result, SamplerConfig, TrainConfig};

pub type Sections = BTreeMap<String, BTreeMap<String, String>>;

pub fn parse_str(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::from("global");
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::Format(format!(
                    "line {}: unterminated section header",
                    lineno + 1
                )));
            };
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Format(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        sections
            .entry(current.clone())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(sections)
}

pub fn parse_file(path: &Path) -> Result<Sections> {
    let text = std::fs::read_to_string(path)?;
    parse_str(&text)
}

fn bad_key(section: &str, key: &str, value: &str, what: &str) -> Error {
    Error::Format(format!("[{section}] {key} = {value}: expected {what}"))
}

/// Typed view over one section with flag-style overrides applied on top.
pub struct SectionView<'a> {
    pub name: &'a str,
    map: BTreeMap<String, String>,
}

impl<'a> SectionView<'a> {
    pub fn new(name: &'a str, sections: Option<&Sections>) -> Self {
        let map = sections
            .and_then(|s| s.get(name))
            .cloned()
            .unwrap_or_default();
        SectionView { name, map }
    }

    pub fn set_override(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.map.insert(key.to_string(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| bad_key(self.name, key, v, "a number")),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| bad_key(self.name, key, v, "a nonnegative integer")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| bad_key(self.name, key, v, "an integer seed")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("on") => Ok(true),
            Some("false") | Some("0") | Some("off") => Ok(false),
            Some(v) => Err(bad_key(self.name, key, v, "true or false")),
        }
    }

    /// `beta = auto` (the 1/log n default) or an explicit number.
    pub fn beta(&self) -> Result<Option<f64>> {
        match self.get("beta") {
            None | Some("auto") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| bad_key(self.name, "beta", v, "`auto` or a number")),
        }
    }

    /// `preconditioner = none` or a comma-separated list of positive floats.
    pub fn preconditioner(&self) -> Result<Option<Vec<f64>>> {
        match self.get("preconditioner") {
            None | Some("none") | Some("identity") => Ok(None),
            Some(v) => v
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| bad_key(self.name, "preconditioner", v, "floats"))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }
}

/// Build a sampler configuration from a `[sampler]` section; every key is
/// optional except epsilon, which the caller must ensure is present (from
/// the file or a flag).
pub fn sampler_from_view(view: &SectionView) -> Result<SamplerConfig> {
    let epsilon = match view.get("epsilon") {
        Some(v) => v
            .parse()
            .map_err(|_| bad_key(view.name, "epsilon", v, "a number"))?,
        None => {
            return Err(Error::InvalidArgument(
                "no step size: set epsilon in the config file or pass --epsilon".into(),
            ))
        }
    };
    Ok(SamplerConfig {
        epsilon,
        gamma: view.f64_or("gamma", 1.0)?,
        beta: view.beta()?,
        steps: view.usize_or("steps", 10_000)?,
        burnin_frac: view.f64_or("burnin_frac", 0.9)?,
        batch_size: view.usize_or("batch_size", 500)?,
        chains: view.usize_or("chains", 4)?,
        seed: view.u64_or("seed", 0)?,
        preconditioner: view.preconditioner()?,
        precondition_noise: view.bool_or("precondition_noise", false)?,
        precondition_localizer: view.bool_or("precondition_localizer", true)?,
        mala_probe_stride: view.usize_or("mala_probe_stride", 20)?,
        record_full_batch_loss: view.bool_or("record_full_batch_loss", false)?,
        state_record_stride: view.usize_or("state_record_stride", 0)?,
    })
}

pub fn train_from_view(view: &SectionView) -> Result<TrainConfig> {
    Ok(TrainConfig {
        learning_rate: view.f64_or("learning_rate", 0.01)?,
        momentum: view.f64_or("momentum", 0.9)?,
        batch_size: view.usize_or("batch_size", 500)?,
        steps: view.usize_or("steps", 50_000)?,
        seed: view.u64_or("seed", 0)?,
    })
}

/// Key/value pairs echoed into emitted artifacts so every output embeds the
/// configuration that produced it.
pub fn sampler_echo(cfg: &SamplerConfig) -> Vec<(String, String)> {
    let mut kv = vec![
        ("epsilon".into(), format!("{:e}", cfg.epsilon)),
        ("gamma".into(), cfg.gamma.to_string()),
        (
            "beta".into(),
            cfg.beta.map_or("auto".into(), |b| format!("{b:e}")),
        ),
        ("steps".into(), cfg.steps.to_string()),
        ("burnin_frac".into(), cfg.burnin_frac.to_string()),
        ("batch_size".into(), cfg.batch_size.to_string()),
        ("chains".into(), cfg.chains.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        (
            "mala_probe_stride".into(),
            cfg.mala_probe_stride.to_string(),
        ),
    ];
    if let Some(a) = &cfg.preconditioner {
        kv.push(("preconditioner".into(), format!("<{} entries>", a.len())));
        kv.push((
            "precondition_noise".into(),
            cfg.precondition_noise.to_string(),
        ));
    } else {
        kv.push(("preconditioner".into(), "none".into()));
    }
    kv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text = "\
# run settings
[sampler]
epsilon = 5e-7   # table default
gamma = 1.0
steps = 10000

[train]
learning_rate = 0.01
";
        let s = parse_str(text).unwrap();
        assert_eq!(s["sampler"]["epsilon"], "5e-7");
        assert_eq!(s["train"]["learning_rate"], "0.01");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_str("[sampler\nepsilon = 1").is_err());
        assert!(parse_str("epsilon 1").is_err());
    }

    #[test]
    fn sampler_defaults_and_overrides() {
        let s = parse_str("[sampler]\nepsilon = 1e-6\nbeta = auto\n").unwrap();
        let mut view = SectionView::new("sampler", Some(&s));
        view.set_override("gamma", Some("5.0".into()));
        let cfg = sampler_from_view(&view).unwrap();
        assert_eq!(cfg.epsilon, 1e-6);
        assert_eq!(cfg.gamma, 5.0);
        assert_eq!(cfg.beta, None);
        assert_eq!(cfg.burnin_frac, 0.9);
        assert_eq!(cfg.mala_probe_stride, 20);
    }

    #[test]
    fn preconditioner_list_parses() {
        let s = parse_str("[sampler]\nepsilon = 1e-6\npreconditioner = 1.0, 2.0, 0.5\n").unwrap();
        let view = SectionView::new("sampler", Some(&s));
        let cfg = sampler_from_view(&view).unwrap();
        assert_eq!(cfg.preconditioner, Some(vec![1.0, 2.0, 0.5]));
    }

    #[test]
    fn missing_epsilon_is_an_error() {
        let view = SectionView::new("sampler", None);
        assert!(sampler_from_view(&view).is_err());
    }
}
