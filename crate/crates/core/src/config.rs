//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! ratings    = data/ratings.tsv
//! meta       = data/meta.tsv
//! split_year = 2010
//! alphas     = 1,2,3
//! models     = cooc,svd,ae,aae
//! modality   = both          # items | titles | both, or a comma list
//! runs       = 3
//! seed       = 0
//! epochs     = 20
//! embeddings = builtin:hash:50:0
//! svd_rank   = 1000
//! out        = results.csv
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{default_embeddings, DataSource, ExperimentConfig};
use crate::recommenders::TrainConfig;

const KEYS: &[&str] = &[
    "ratings", "meta", "split_year", "alphas", "models", "modality", "runs", "seed", "epochs",
    "embeddings", "out", "svd_rank",
];

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| e.to_string()))
        .collect()
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("invalid value `{value}`: {e}"))
}

/// Parses config text; `path` labels errors and anchors relative paths.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let mut ratings = None;
    let mut meta = None;
    let mut split_year = None;
    let mut out = None;
    let mut embeddings = None;
    let mut cfg = ExperimentConfig::new(
        DataSource::Files {
            ratings: PathBuf::new(),
            meta: PathBuf::new(),
        },
        0,
    );
    let mut train = TrainConfig::default();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            path: path.to_path_buf(),
            line,
            key: key.to_string(),
            message,
        };
        let Some((key, value)) = content.split_once('=') else {
            return Err(err("", "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(key, format!("unknown key (valid: {})", KEYS.join(", "))));
        }
        if value.is_empty() {
            return Err(err(key, "empty value".into()));
        }
        let r: std::result::Result<(), String> = (|| {
            match key {
                "ratings" => ratings = Some(resolve(value)),
                "meta" => meta = Some(resolve(value)),
                "out" => out = Some(resolve(value)),
                "split_year" => split_year = Some(scalar(value)?),
                "alphas" => cfg.alphas = list(value)?,
                "models" => cfg.models = list(value)?,
                "modality" => cfg.modalities = list(value)?,
                "runs" => cfg.runs = scalar(value)?,
                "seed" => cfg.seed = scalar(value)?,
                "epochs" => train.epochs = scalar(value)?,
                "svd_rank" => train.svd_rank = scalar(value)?,
                "embeddings" => {
                    embeddings = Some(if value.starts_with("builtin:") {
                        value.to_string()
                    } else {
                        resolve(value).to_string_lossy().into_owned()
                    })
                }
                _ => unreachable!("key list checked above"),
            }
            Ok(())
        })();
        r.map_err(|m| err(key, m))?;
        let checked = match key {
            "alphas" if cfg.alphas.is_empty() || cfg.alphas.contains(&0) => {
                Some("alphas must be a non-empty list of positive integers")
            }
            "runs" if cfg.runs == 0 => Some("runs must be at least 1"),
            "svd_rank" if train.svd_rank == 0 => Some("svd_rank must be at least 1"),
            "models" if cfg.models.is_empty() => Some("model list is empty"),
            "modality" if cfg.modalities.is_empty() => Some("modality list is empty"),
            _ => None,
        };
        if let Some(m) = checked {
            return Err(err(key, m.to_string()));
        }
    }

    let missing = |key: &str| Error::Config {
        path: path.to_path_buf(),
        line: 0,
        key: key.to_string(),
        message: "required key is missing".into(),
    };
    cfg.data = DataSource::Files {
        ratings: ratings.ok_or_else(|| missing("ratings"))?,
        meta: meta.ok_or_else(|| missing("meta"))?,
    };
    cfg.split_year = split_year.ok_or_else(|| missing("split_year"))?;
    cfg.out = Some(out.ok_or_else(|| missing("out"))?);
    cfg.embeddings = embeddings.unwrap_or_else(|| default_embeddings(cfg.seed));
    cfg.train = train;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommenders::{ModelKind, Modality};

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("/exp/run.cfg"))
    }

    const MINIMAL: &str = "ratings = r.tsv\nmeta = m.tsv\nsplit_year = 2011\nout = res.csv\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.train.epochs, 20);
        assert_eq!(c.modalities, vec![Modality::Both]);
        assert_eq!(c.models, ModelKind::ALL.to_vec());
        assert_eq!(c.embeddings, "builtin:hash:50:0");
        assert_eq!(
            c.data,
            DataSource::Files {
                ratings: "/exp/r.tsv".into(),
                meta: "/exp/m.tsv".into()
            }
        );
        assert_eq!(c.out.as_deref(), Some(Path::new("/exp/res.csv")));
    }

    #[test]
    fn lists_and_comments() {
        let c = parse(&format!(
            "{MINIMAL}alphas = 15,20,25  # sweep\nmodels = cooc, aae\nmodality = items,both\nseed = 4\n"
        ))
        .unwrap();
        assert_eq!(c.alphas, vec![15, 20, 25]);
        assert_eq!(c.models, vec![ModelKind::Cooc, ModelKind::Aae]);
        assert_eq!(c.modalities, vec![Modality::Items, Modality::Both]);
        assert_eq!(c.embeddings, "builtin:hash:50:4");
    }

    #[test]
    fn unknown_model_lists_valid_names() {
        let e = parse(&format!("{MINIMAL}models = gcn\n")).unwrap_err().to_string();
        assert!(e.contains("models") && e.contains("run.cfg:5:"), "{e}");
        assert!(e.contains("cooc, svd, mlp, ae, aae"), "{e}");
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse("ratings = r\nfoo = 1\n").unwrap_err().to_string();
        assert!(e.contains("foo") && e.contains("run.cfg:2:"), "{e}");
        let e = parse(&format!("{MINIMAL}runs = many\n")).unwrap_err().to_string();
        assert!(e.contains("runs") && e.contains("run.cfg:5:"), "{e}");
        let e = parse("ratings = r\n").unwrap_err().to_string();
        assert!(e.contains("meta"), "{e}");
        assert!(parse(&format!("{MINIMAL}runs = 0\n")).is_err());
        assert!(parse(&format!("{MINIMAL}models = mlp\nmodality = items\n")).is_err());
    }

    #[test]
    fn unreadable_path_is_an_error() {
        let e = load_config("/nonexistent/exp.cfg").unwrap_err().to_string();
        assert!(e.contains("/nonexistent/exp.cfg"), "{e}");
    }
}
