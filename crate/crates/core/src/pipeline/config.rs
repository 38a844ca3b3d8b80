use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Method, DEFAULT_REPEATS};
use crate::model::HyperParams;

/// Environment variable read for the worker count when none is configured.
pub const WORKERS_ENV: &str = "KGLINK_WORKERS";

/// Training and ranking settings of one method. Seeds are not configured
/// per method; they derive from the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    pub factors: usize,
    pub learning_rate: f64,
    pub lambda_subject: f64,
    pub lambda_positive: f64,
    pub lambda_negative: f64,
    pub epochs: usize,
    pub top_n: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        let hp = HyperParams::default();
        MethodParams {
            factors: hp.factors,
            learning_rate: hp.learning_rate,
            lambda_subject: hp.lambda_subject,
            lambda_positive: hp.lambda_positive,
            lambda_negative: hp.lambda_negative,
            epochs: hp.epochs,
            top_n: hp.top_n,
        }
    }
}

impl MethodParams {
    pub fn with_seed(&self, seed: u64) -> HyperParams {
        HyperParams {
            factors: self.factors,
            learning_rate: self.learning_rate,
            lambda_subject: self.lambda_subject,
            lambda_positive: self.lambda_positive,
            lambda_negative: self.lambda_negative,
            epochs: self.epochs,
            top_n: self.top_n,
            seed,
        }
    }

    fn apply(&mut self, patch: &MethodParamsPatch) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = patch.$f { self.$f = v; })* };
        }
        set!(factors, learning_rate, lambda_subject, lambda_positive, lambda_negative, epochs, top_n);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParamsPatch {
    pub factors: Option<usize>,
    pub learning_rate: Option<f64>,
    /// Sets all three regularisation weights at once; the specific keys win.
    pub lambda: Option<f64>,
    pub lambda_subject: Option<f64>,
    pub lambda_positive: Option<f64>,
    pub lambda_negative: Option<f64>,
    pub epochs: Option<usize>,
    pub top_n: Option<usize>,
}

impl MethodParamsPatch {
    fn expanded(&self) -> MethodParamsPatch {
        MethodParamsPatch {
            lambda_subject: self.lambda_subject.or(self.lambda),
            lambda_positive: self.lambda_positive.or(self.lambda),
            lambda_negative: self.lambda_negative.or(self.lambda),
            ..self.clone()
        }
    }
}

/// `"all"` or an explicit list of predicate labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredicateSelection {
    Keyword(String),
    List(Vec<String>),
}

impl Default for PredicateSelection {
    fn default() -> Self {
        PredicateSelection::Keyword("all".into())
    }
}

impl PredicateSelection {
    pub fn parse(s: &str) -> Self {
        if s == "all" {
            PredicateSelection::default()
        } else {
            PredicateSelection::List(s.split(',').map(|p| p.trim().to_owned()).filter(|p| !p.is_empty()).collect())
        }
    }

    /// Resolves against the predicates present in the input, in input order.
    pub fn resolve<'a>(&self, available: impl Iterator<Item = &'a str>) -> Vec<String> {
        match self {
            PredicateSelection::Keyword(_) => available.map(str::to_owned).collect(),
            PredicateSelection::List(list) => list.clone(),
        }
    }
}

/// On-disk configuration (TOML). Every key is optional; command-line
/// overrides are applied on top, then defaults fill the rest.
///
/// ```toml
/// input_path = "triples.tsv"
/// predicates = "all"              # or ["import", "export"]
/// methods = ["bpr", "mf", "mp", "random"]
/// repeat_count = 5
/// output_dir = "out"
/// seed = 42
/// workers = 4                     # 0 = one per core
///
/// [hyperparams]                   # shared by every method
/// factors = 50
/// learning_rate = 0.2
/// lambda = 0.005                  # or lambda_subject / lambda_positive / lambda_negative
/// epochs = 50
/// top_n = 10
///
/// [method_hyperparams.mf]         # per-method overrides
/// learning_rate = 0.05
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input_path: Option<PathBuf>,
    pub predicates: Option<PredicateSelection>,
    pub methods: Option<Vec<String>>,
    pub repeat_count: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub hyperparams: MethodParamsPatch,
    #[serde(default)]
    pub method_hyperparams: BTreeMap<String, MethodParamsPatch>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }
}

/// Command-line overrides; `None` leaves the file value in place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub input_path: Option<PathBuf>,
    pub predicates: Option<PredicateSelection>,
    pub methods: Option<Vec<String>>,
    pub repeat_count: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub hyperparams: MethodParamsPatch,
}

/// Fully resolved experiment. This is what gets written to
/// `config.resolved.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input_path: PathBuf,
    pub predicates: PredicateSelection,
    pub methods: Vec<Method>,
    pub repeat_count: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 means one per core. Not part of the artifact content.
    pub workers: usize,
    pub hyperparams: BTreeMap<Method, MethodParams>,
}

impl ExperimentConfig {
    pub fn new(input_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let methods = Method::ALL.to_vec();
        ExperimentConfig {
            input_path: input_path.into(),
            predicates: PredicateSelection::default(),
            hyperparams: methods.iter().map(|&m| (m, MethodParams::default())).collect(),
            methods,
            repeat_count: DEFAULT_REPEATS,
            output_dir: output_dir.into(),
            seed: 0,
            workers: 0,
        }
    }

    pub fn resolve(file: ConfigFile, overrides: ConfigOverrides) -> Result<Self> {
        let input_path = overrides
            .input_path
            .or(file.input_path)
            .ok_or_else(|| Error::InvalidConfig("input_path is required".into()))?;
        let output_dir = overrides
            .output_dir
            .or(file.output_dir)
            .ok_or_else(|| Error::InvalidConfig("output_dir is required".into()))?;
        let method_names =
            overrides.methods.or(file.methods).unwrap_or_else(|| Method::ALL.iter().map(|m| m.to_string()).collect());
        let mut methods = Vec::new();
        for name in &method_names {
            let m: Method = name.trim().parse()?;
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        for key in file.method_hyperparams.keys() {
            key.parse::<Method>()?;
        }
        let workers = match overrides.workers.or(file.workers) {
            Some(w) => w,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{WORKERS_ENV}=`{v}` is not a worker count")))?,
                Err(_) => 0,
            },
        };

        let mut shared = MethodParams::default();
        shared.apply(&file.hyperparams.expanded());
        let cli = overrides.hyperparams.expanded();
        let hyperparams = methods
            .iter()
            .map(|&m| {
                let mut p = shared.clone();
                if let Some(patch) = file.method_hyperparams.get(m.as_str()) {
                    p.apply(&patch.expanded());
                }
                p.apply(&cli);
                (m, p)
            })
            .collect();

        let cfg = ExperimentConfig {
            input_path,
            predicates: overrides.predicates.or(file.predicates).unwrap_or_default(),
            methods,
            repeat_count: overrides.repeat_count.or(file.repeat_count).unwrap_or(DEFAULT_REPEATS),
            output_dir,
            seed: overrides.seed.or(file.seed).unwrap_or(0),
            workers,
            hyperparams,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods must not be empty".into()));
        }
        if self.repeat_count == 0 {
            return Err(Error::InvalidConfig("repeat_count must be >= 1".into()));
        }
        if let PredicateSelection::Keyword(k) = &self.predicates {
            if k != "all" {
                return Err(Error::InvalidConfig(format!("predicates must be \"all\" or a list, got \"{k}\"")));
            }
        }
        if let PredicateSelection::List(list) = &self.predicates {
            if list.is_empty() {
                return Err(Error::InvalidConfig("predicate list must not be empty".into()));
            }
        }
        for m in &self.methods {
            let params = self
                .hyperparams
                .get(m)
                .ok_or_else(|| Error::InvalidConfig(format!("no hyperparameters resolved for {m}")))?;
            params.with_seed(0).validate().map_err(|e| Error::InvalidConfig(format!("{m}: {e}")))?;
        }
        Ok(())
    }

    pub fn params(&self, method: Method) -> &MethodParams {
        &self.hyperparams[&method]
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
