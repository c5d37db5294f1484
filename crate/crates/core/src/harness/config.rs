//! Experiment configuration: a flat `key = value` text format with dotted
//! section names and `#` comments. Unknown or repeated keys are errors,
//! and every error names the offending line.
//!
//! ```text
//! # FedMOEAC on the synthetic blobs
//! algorithm = fedmoeac
//! seed = 0
//! evolution.population = 10
//! federated.participation = 0.4
//! dataset.kind = synthetic
//! ```
//!
//! See [`KEYS`] for every accepted key and its default.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionParams, Linkage};
use crate::federated::{ObjectiveMode, PartitionScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Fedmoeac,
    Nsga2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Fedmoeac => "fedmoeac",
            Algorithm::Nsga2 => "nsga2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        samples: usize,
        classes: usize,
        dim: usize,
        separation: f64,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples.
        limit: Option<usize>,
    },
}

/// Every tunable of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Not part of the run record.
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Worker threads for client training and candidate evaluation. Results
    /// do not depend on it, so it is not part of the run record.
    #[serde(skip)]
    pub workers: usize,

    pub population: usize,
    pub generations: usize,
    pub mating_clusters: usize,
    pub linkage: Linkage,
    pub fitness_weights: [f64; 3],
    pub evolution: EvolutionParams,

    pub clients: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub partition: PartitionScheme,
    pub objective_mode: ObjectiveMode,

    pub hidden: Vec<usize>,

    pub delta: f64,
    pub clip_z: f64,
    pub budget_ceiling: f64,

    pub dataset: DatasetSpec,
    pub holdout_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Fedmoeac,
            seed: 0,
            output_dir: PathBuf::from("out"),
            workers: 1,
            population: 10,
            generations: 12,
            mating_clusters: 3,
            linkage: Linkage::Centroid,
            fitness_weights: [1.0; 3],
            evolution: EvolutionParams::default(),
            clients: 10,
            participation: 0.4,
            local_epochs: 2,
            batch_size: 64,
            learning_rate: 0.01,
            partition: PartitionScheme::Iid,
            objective_mode: ObjectiveMode::Aggregated,
            hidden: vec![128],
            delta: 1e-5,
            clip_z: 1.0,
            budget_ceiling: 10.0,
            dataset: DatasetSpec::Synthetic {
                samples: 2000,
                classes: 4,
                dim: 10,
                separation: 4.0,
            },
            holdout_fraction: 0.1,
        }
    }
}

/// Accepted keys with a one-line description, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("algorithm", "fedmoeac | nsga2"),
    ("seed", "master seed (u64)"),
    ("output.dir", "directory for run.json, fronts.csv, hv.csv"),
    ("workers", "worker threads; results do not depend on it"),
    ("evolution.population", "population size N (>= 2)"),
    ("evolution.generations", "generations G_max"),
    ("evolution.mating_clusters", "k-means clusters m for mating (1..=N)"),
    ("evolution.linkage", "centroid | single | complete"),
    ("evolution.fitness_weights", "three comma-separated weights"),
    ("evolution.crossover_prob", "SBX probability per gene"),
    ("evolution.crossover_eta", "SBX distribution index"),
    ("evolution.mutation_prob", "polynomial mutation probability per gene"),
    ("evolution.mutation_eta", "polynomial mutation distribution index"),
    ("evolution.xi_init", "mean,std of the initial pruning threshold"),
    ("evolution.sigma_init", "mean,std of the initial noise scale"),
    ("evolution.xi_bounds", "lower,upper of the pruning threshold"),
    ("evolution.sigma_bounds", "lower,upper of the noise scale (lower > 0)"),
    ("federated.clients", "client count K"),
    ("federated.participation", "fraction of clients per round, in (0, 1]"),
    ("federated.local_epochs", "local epochs E"),
    ("federated.batch_size", "mini-batch size B"),
    ("federated.learning_rate", "SGD learning rate"),
    ("federated.partition", "iid | label_shard"),
    ("federated.objective_mode", "aggregated | per_client"),
    ("model.hidden", "comma-separated hidden widths (may be empty)"),
    ("privacy.delta", "delta in (0, 1)"),
    ("privacy.clip_z", "clipping norm Z (> 0)"),
    ("privacy.budget_ceiling", "budget reported for sigma = 0"),
    ("dataset.kind", "synthetic | mnist"),
    ("dataset.samples", "synthetic: sample count"),
    ("dataset.classes", "synthetic: class count"),
    ("dataset.dim", "synthetic: input dimension (>= classes)"),
    ("dataset.separation", "synthetic: distance between class means"),
    ("dataset.mnist_images", "mnist: IDX image file"),
    ("dataset.mnist_labels", "mnist: IDX label file"),
    ("dataset.mnist_limit", "mnist: keep only the first n samples"),
    ("dataset.holdout_fraction", "share held out for reporting, in [0, 1)"),
];

fn parse_value<T: FromStr>(raw: &str, what: &str) -> std::result::Result<T, String> {
    raw.parse::<T>()
        .map_err(|_| format!("cannot parse {raw:?} as {what}"))
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| parse_value(p.trim(), what)).collect()
}

fn parse_pair(raw: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list::<f64>(raw, "a number")?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got {raw:?}")),
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(raw: &str, choices: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(raw.to_string()))
        .map_err(|_| format!("expected one of {choices}, got {raw:?}"))
}

#[derive(Default)]
struct DatasetFields {
    kind: Option<String>,
    samples: Option<usize>,
    classes: Option<usize>,
    dim: Option<usize>,
    separation: Option<f64>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    limit: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        // Relative dataset paths are resolved against the config file.
        if let DatasetSpec::Mnist { images, labels, .. } = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [images, labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Parses config text. `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut lines: HashMap<String, usize> = HashMap::new();
        let mut ds = DatasetFields::default();
        let known: HashMap<&str, ()> = KEYS.iter().map(|(k, _)| (*k, ())).collect();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::ConfigLine {
                path: origin.to_string(),
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !known.contains_key(key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if let Some(first) = lines.insert(key.to_string(), line_no) {
                return Err(err(format!("`{key}` already set on line {first}")));
            }
            cfg.apply(key, value, &mut ds).map_err(err)?;
        }
        cfg.dataset = build_dataset(ds, &lines, origin)?;
        cfg.validate_with_lines(&lines, origin)?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str, ds: &mut DatasetFields) -> std::result::Result<(), String> {
        let int = "a non-negative integer";
        let num = "a number";
        match key {
            "algorithm" => self.algorithm = parse_enum(v, "fedmoeac, nsga2")?,
            "seed" => self.seed = parse_value(v, int)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "workers" => self.workers = parse_value(v, int)?,
            "evolution.population" => self.population = parse_value(v, int)?,
            "evolution.generations" => self.generations = parse_value(v, int)?,
            "evolution.mating_clusters" => self.mating_clusters = parse_value(v, int)?,
            "evolution.linkage" => self.linkage = parse_enum(v, "centroid, single, complete")?,
            "evolution.fitness_weights" => {
                let w: Vec<f64> = parse_list(v, num)?;
                self.fitness_weights = w
                    .try_into()
                    .map_err(|_| "expected three comma-separated weights".to_string())?;
            }
            "evolution.crossover_prob" => self.evolution.crossover_prob = parse_value(v, num)?,
            "evolution.crossover_eta" => self.evolution.crossover_eta = parse_value(v, num)?,
            "evolution.mutation_prob" => self.evolution.mutation_prob = parse_value(v, num)?,
            "evolution.mutation_eta" => self.evolution.mutation_eta = parse_value(v, num)?,
            "evolution.xi_init" => {
                (self.evolution.xi_init_mean, self.evolution.xi_init_std) = parse_pair(v)?
            }
            "evolution.sigma_init" => {
                (self.evolution.sigma_init_mean, self.evolution.sigma_init_std) = parse_pair(v)?
            }
            "evolution.xi_bounds" => {
                let (lo, hi) = parse_pair(v)?;
                self.evolution.bounds.lower[0] = lo;
                self.evolution.bounds.upper[0] = hi;
            }
            "evolution.sigma_bounds" => {
                let (lo, hi) = parse_pair(v)?;
                self.evolution.bounds.lower[2] = lo;
                self.evolution.bounds.upper[2] = hi;
            }
            "federated.clients" => self.clients = parse_value(v, int)?,
            "federated.participation" => self.participation = parse_value(v, num)?,
            "federated.local_epochs" => self.local_epochs = parse_value(v, int)?,
            "federated.batch_size" => self.batch_size = parse_value(v, int)?,
            "federated.learning_rate" => self.learning_rate = parse_value(v, num)?,
            "federated.partition" => self.partition = parse_enum(v, "iid, label_shard")?,
            "federated.objective_mode" => {
                self.objective_mode = parse_enum(v, "aggregated, per_client")?
            }
            "model.hidden" => self.hidden = parse_list(v, "a positive integer")?,
            "privacy.delta" => self.delta = parse_value(v, num)?,
            "privacy.clip_z" => self.clip_z = parse_value(v, num)?,
            "privacy.budget_ceiling" => self.budget_ceiling = parse_value(v, num)?,
            "dataset.kind" => {
                if v != "synthetic" && v != "mnist" {
                    return Err(format!("expected one of synthetic, mnist, got {v:?}"));
                }
                ds.kind = Some(v.to_string());
            }
            "dataset.samples" => ds.samples = Some(parse_value(v, int)?),
            "dataset.classes" => ds.classes = Some(parse_value(v, int)?),
            "dataset.dim" => ds.dim = Some(parse_value(v, int)?),
            "dataset.separation" => ds.separation = Some(parse_value(v, num)?),
            "dataset.mnist_images" => ds.images = Some(PathBuf::from(v)),
            "dataset.mnist_labels" => ds.labels = Some(PathBuf::from(v)),
            "dataset.mnist_limit" => ds.limit = Some(parse_value(v, int)?),
            "dataset.holdout_fraction" => self.holdout_fraction = parse_value(v, num)?,
            other => unreachable!("key table and parser disagree on `{other}`"),
        }
        Ok(())
    }

    /// Domain checks. Errors point at the line that set the offending key
    /// when the config came from text.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_lines(&HashMap::new(), "<config>")
    }

    fn validate_with_lines(&self, lines: &HashMap<String, usize>, origin: &str) -> Result<()> {
        let fail = |key: &str, message: String| match lines.get(key) {
            Some(&line) => Error::ConfigLine {
                path: origin.to_string(),
                line,
                message,
            },
            None => Error::Config(format!("{key}: {message}")),
        };
        let e = &self.evolution;
        let b = &e.bounds;
        let checks: Vec<(&str, bool, String)> = vec![
            ("workers", self.workers >= 1, "must be >= 1".into()),
            ("evolution.population", self.population >= 2, "must be >= 2".into()),
            (
                "evolution.mating_clusters",
                self.mating_clusters >= 1 && self.mating_clusters <= self.population,
                format!("must lie in [1, {}]", self.population),
            ),
            (
                "evolution.fitness_weights",
                self.fitness_weights.iter().all(|w| *w >= 0.0 && w.is_finite())
                    && self.fitness_weights.iter().any(|w| *w > 0.0),
                "weights must be non-negative and not all zero".into(),
            ),
            ("evolution.crossover_prob", (0.0..=1.0).contains(&e.crossover_prob), "must lie in [0, 1]".into()),
            ("evolution.mutation_prob", (0.0..=1.0).contains(&e.mutation_prob), "must lie in [0, 1]".into()),
            ("evolution.crossover_eta", e.crossover_eta >= 0.0, "must be >= 0".into()),
            ("evolution.mutation_eta", e.mutation_eta >= 0.0, "must be >= 0".into()),
            ("evolution.xi_init", e.xi_init_std > 0.0, "std must be > 0".into()),
            ("evolution.sigma_init", e.sigma_init_std > 0.0, "std must be > 0".into()),
            (
                "evolution.xi_bounds",
                b.lower[0] >= 0.0 && b.upper[0] > b.lower[0],
                "need 0 <= lower < upper".into(),
            ),
            (
                "evolution.sigma_bounds",
                b.lower[2] > 0.0 && b.upper[2] > b.lower[2],
                "need 0 < lower < upper".into(),
            ),
            ("federated.clients", self.clients >= 1, "must be >= 1".into()),
            (
                "federated.participation",
                self.participation > 0.0 && self.participation <= 1.0,
                "must lie in (0, 1]".into(),
            ),
            ("federated.batch_size", self.batch_size >= 1, "must be >= 1".into()),
            (
                "federated.learning_rate",
                self.learning_rate > 0.0 && self.learning_rate.is_finite(),
                "must be > 0".into(),
            ),
            ("model.hidden", self.hidden.iter().all(|&h| h > 0), "widths must be positive".into()),
            ("privacy.delta", self.delta > 0.0 && self.delta < 1.0, "must lie in (0, 1)".into()),
            ("privacy.clip_z", self.clip_z > 0.0 && self.clip_z.is_finite(), "must be > 0".into()),
            (
                "privacy.budget_ceiling",
                self.budget_ceiling > 0.0 && self.budget_ceiling.is_finite(),
                "must be > 0".into(),
            ),
            (
                "dataset.holdout_fraction",
                (0.0..1.0).contains(&self.holdout_fraction),
                "must lie in [0, 1)".into(),
            ),
        ];
        for (key, ok, message) in checks {
            if !ok {
                return Err(fail(key, message));
            }
        }
        if let DatasetSpec::Synthetic {
            samples,
            classes,
            dim,
            separation,
        } = &self.dataset
        {
            if *samples == 0 {
                return Err(fail("dataset.samples", "must be >= 1".into()));
            }
            if *classes < 2 {
                return Err(fail("dataset.classes", "must be >= 2".into()));
            }
            if dim < classes {
                return Err(fail("dataset.dim", format!("must be >= dataset.classes ({classes})")));
            }
            if !(*separation > 0.0) {
                return Err(fail("dataset.separation", "must be > 0".into()));
            }
            let train = *samples - (self.holdout_fraction * *samples as f64).round() as usize;
            if train < self.clients {
                return Err(fail(
                    "federated.clients",
                    format!("{} clients but only {train} training samples", self.clients),
                ));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Layer widths for a dataset of the given shape.
    pub fn architecture(&self, dim: usize, classes: usize) -> Vec<usize> {
        let mut a = vec![dim];
        a.extend(&self.hidden);
        a.push(classes);
        a
    }

    /// Renders the config in the text format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let e = &self.evolution;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let enum_str = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
        put("algorithm", self.algorithm.to_string());
        put("seed", self.seed.to_string());
        put("output.dir", self.output_dir.display().to_string());
        put("workers", self.workers.to_string());
        put("evolution.population", self.population.to_string());
        put("evolution.generations", self.generations.to_string());
        put("evolution.mating_clusters", self.mating_clusters.to_string());
        put("evolution.linkage", enum_str(serde_json::to_value(self.linkage).unwrap()));
        put("evolution.fitness_weights", join(&self.fitness_weights));
        put("evolution.crossover_prob", e.crossover_prob.to_string());
        put("evolution.crossover_eta", e.crossover_eta.to_string());
        put("evolution.mutation_prob", e.mutation_prob.to_string());
        put("evolution.mutation_eta", e.mutation_eta.to_string());
        put("evolution.xi_init", join(&[e.xi_init_mean, e.xi_init_std]));
        put("evolution.sigma_init", join(&[e.sigma_init_mean, e.sigma_init_std]));
        put("evolution.xi_bounds", join(&[e.bounds.lower[0], e.bounds.upper[0]]));
        put("evolution.sigma_bounds", join(&[e.bounds.lower[2], e.bounds.upper[2]]));
        put("federated.clients", self.clients.to_string());
        put("federated.participation", self.participation.to_string());
        put("federated.local_epochs", self.local_epochs.to_string());
        put("federated.batch_size", self.batch_size.to_string());
        put("federated.learning_rate", self.learning_rate.to_string());
        put("federated.partition", enum_str(serde_json::to_value(self.partition).unwrap()));
        put("federated.objective_mode", enum_str(serde_json::to_value(self.objective_mode).unwrap()));
        put(
            "model.hidden",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        put("privacy.delta", self.delta.to_string());
        put("privacy.clip_z", self.clip_z.to_string());
        put("privacy.budget_ceiling", self.budget_ceiling.to_string());
        match &self.dataset {
            DatasetSpec::Synthetic {
                samples,
                classes,
                dim,
                separation,
            } => {
                put("dataset.kind", "synthetic".into());
                put("dataset.samples", samples.to_string());
                put("dataset.classes", classes.to_string());
                put("dataset.dim", dim.to_string());
                put("dataset.separation", separation.to_string());
            }
            DatasetSpec::Mnist {
                images,
                labels,
                limit,
            } => {
                put("dataset.kind", "mnist".into());
                put("dataset.mnist_images", images.display().to_string());
                put("dataset.mnist_labels", labels.display().to_string());
                if let Some(l) = limit {
                    put("dataset.mnist_limit", l.to_string());
                }
            }
        }
        put("dataset.holdout_fraction", self.holdout_fraction.to_string());
        out
    }
}

fn build_dataset(ds: DatasetFields, lines: &HashMap<String, usize>, origin: &str) -> Result<DatasetSpec> {
    let line_of = |key: &str| lines.get(key).copied();
    let fail = |key: &str, message: String| match line_of(key) {
        Some(line) => Error::ConfigLine {
            path: origin.to_string(),
            line,
            message,
        },
        None => Error::Config(message),
    };
    let defaults = match ExperimentConfig::default().dataset {
        DatasetSpec::Synthetic {
            samples,
            classes,
            dim,
            separation,
        } => (samples, classes, dim, separation),
        DatasetSpec::Mnist { .. } => unreachable!("default dataset is synthetic"),
    };
    match ds.kind.as_deref().unwrap_or("synthetic") {
        "mnist" => {
            for key in ["dataset.samples", "dataset.classes", "dataset.dim", "dataset.separation"] {
                if line_of(key).is_some() {
                    return Err(fail(key, format!("`{key}` only applies to dataset.kind = synthetic")));
                }
            }
            let images = ds
                .images
                .ok_or_else(|| fail("dataset.kind", "mnist needs dataset.mnist_images".into()))?;
            let labels = ds
                .labels
                .ok_or_else(|| fail("dataset.kind", "mnist needs dataset.mnist_labels".into()))?;
            Ok(DatasetSpec::Mnist {
                images,
                labels,
                limit: ds.limit,
            })
        }
        _ => {
            for key in ["dataset.mnist_images", "dataset.mnist_labels", "dataset.mnist_limit"] {
                if line_of(key).is_some() {
                    return Err(fail(key, format!("`{key}` only applies to dataset.kind = mnist")));
                }
            }
            Ok(DatasetSpec::Synthetic {
                samples: ds.samples.unwrap_or(defaults.0),
                classes: ds.classes.unwrap_or(defaults.1),
                dim: ds.dim.unwrap_or(defaults.2),
                separation: ds.separation.unwrap_or(defaults.3),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_text() {
        let cfg = ExperimentConfig::default();
        let parsed = ExperimentConfig::parse(&cfg.to_text(), "t").unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(cfg.population, 10);
        assert_eq!(cfg.generations, 12);
        assert_eq!(cfg.participation, 0.4);
        assert_eq!((cfg.local_epochs, cfg.batch_size, cfg.learning_rate), (2, 64, 0.01));
    }

    #[test]
    fn comments_and_values() {
        let text = "# header\nalgorithm = nsga2  # trailing\n\nevolution.population = 6\nmodel.hidden = 16,8\n";
        let cfg = ExperimentConfig::parse(text, "t").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Nsga2);
        assert_eq!(cfg.population, 6);
        assert_eq!(cfg.hidden, vec![16, 8]);
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::ConfigLine { line, .. } => line,
            other => panic!("expected a line error, got {other}"),
        }
    }

    #[test]
    fn unknown_key_names_its_line() {
        let err = ExperimentConfig::parse("seed = 1\nfederated.clinets = 3\n", "t").unwrap_err();
        assert_eq!(line_of(err), 2);
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert_eq!(line_of(ExperimentConfig::parse("seed = 1\nseed = 2\n", "t").unwrap_err()), 2);
        assert_eq!(line_of(ExperimentConfig::parse("seed\n", "t").unwrap_err()), 1);
        assert_eq!(line_of(ExperimentConfig::parse("seed = -4\n", "t").unwrap_err()), 1);
        assert_eq!(line_of(ExperimentConfig::parse("\nevolution.linkage = ward\n", "t").unwrap_err()), 2);
    }

    #[test]
    fn domain_errors_point_at_the_key() {
        let text = "seed = 3\nevolution.population = 4\nevolution.mating_clusters = 5\n";
        assert_eq!(line_of(ExperimentConfig::parse(text, "t").unwrap_err()), 3);
        let text = "\n\nfederated.participation = 1.5\n";
        assert_eq!(line_of(ExperimentConfig::parse(text, "t").unwrap_err()), 3);
        let text = "dataset.kind = synthetic\ndataset.mnist_limit = 3\n";
        assert_eq!(line_of(ExperimentConfig::parse(text, "t").unwrap_err()), 2);
    }

    #[test]
    fn mnist_requires_paths() {
        assert!(ExperimentConfig::parse("dataset.kind = mnist\n", "t").is_err());
        let text = "dataset.kind = mnist\ndataset.mnist_images = a\ndataset.mnist_labels = b\ndataset.mnist_limit = 5\n";
        let cfg = ExperimentConfig::parse(text, "t").unwrap();
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Mnist {
                images: "a".into(),
                labels: "b".into(),
                limit: Some(5)
            }
        );
    }

    #[test]
    fn every_key_is_documented_and_parsed() {
        let text = ExperimentConfig::default().to_text();
        let written: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        for (key, _) in KEYS {
            if key.starts_with("dataset.mnist") {
                continue;
            }
            assert!(written.contains(key), "{key} missing from to_text");
        }
    }
}
