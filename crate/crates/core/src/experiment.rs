//! Experiment files: where the data comes from, how it is preprocessed and
//! which strategies to run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{
    run_strategy, write_report, Dataset, LearningCurve, PreprocessConfig, RunConfig, Strategy,
};
use crate::error::{Error, Result};
use crate::io::load_dataset;
use crate::volume::{generate_synthetic, LabelVolume, SyntheticConfig, Volume};

/// Either a header file on disk or a generated phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default)]
    pub header: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

impl DataSource {
    pub fn synthetic(config: SyntheticConfig) -> Self {
        Self {
            header: None,
            synthetic: Some(config),
        }
    }

    pub fn load(&self) -> Result<(Volume, LabelVolume)> {
        match (&self.header, &self.synthetic) {
            (Some(path), None) => {
                let (vol, labels) = load_dataset(path)?;
                let labels = labels.ok_or_else(|| {
                    Error::Config(format!("{} has no ground-truth labels", path.display()))
                })?;
                Ok((vol, labels))
            }
            (None, Some(cfg)) => generate_synthetic(cfg),
            _ => Err(Error::Config(
                "a data source needs exactly one of `header` or `synthetic`".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        match (&self.header, &self.synthetic) {
            (Some(path), None) if path.is_file() => Ok(()),
            (Some(path), None) => Err(Error::Config(format!(
                "data header {} does not exist",
                path.display()
            ))),
            (None, Some(cfg)) => cfg.validate(),
            _ => Err(Error::Config(
                "a data source needs exactly one of `header` or `synthetic`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Master seed for every stochastic step of the loop.
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    /// Patch radii for the radius sweep.
    #[serde(default = "default_sweep_radii")]
    pub sweep_radii: Vec<f64>,
    pub train_data: DataSource,
    pub test_data: DataSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_sweep_radii() -> Vec<f64> {
    vec![10.0, 15.0, 20.0]
}

impl ExperimentSpec {
    /// Parses a spec; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for src in [&mut spec.train_data, &mut spec.test_data] {
            if let Some(h) = &src.header {
                src.header = Some(base_dir.join(h));
            }
        }
        spec.out_dir = base_dir.join(&spec.out_dir);
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.train_data.validate()?;
        self.test_data.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        if self.preprocess.target_supervoxels == 0 {
            return Err(Error::Config("target_supervoxels must be positive".into()));
        }
        if !(self.preprocess.compactness > 0.0 && self.preprocess.compactness.is_finite()) {
            return Err(Error::Config("compactness must be positive".into()));
        }
        if !(self.preprocess.slic_smoothing >= 0.0 && self.preprocess.slic_smoothing.is_finite()) {
            return Err(Error::Config("slic_smoothing must be nonnegative".into()));
        }
        if self.preprocess.k == Some(0) {
            return Err(Error::Config("k must be positive".into()));
        }
        if self
            .sweep_radii
            .iter()
            .any(|r| !(*r >= 0.0 && r.is_finite()))
        {
            return Err(Error::Config("sweep radii must be nonnegative".into()));
        }
        self.run_config(self.run.strategy).validate()
    }

    /// The shared run settings specialised to one strategy, carrying the master seed.
    pub fn run_config(&self, strategy: Strategy) -> RunConfig {
        RunConfig {
            strategy,
            rng_seed: self.seed,
            ..self.run.clone()
        }
    }

    pub fn prepare(&self) -> Result<(Dataset, Dataset)> {
        let (v, l) = self.train_data.load()?;
        let train = Dataset::prepare(v, l, &self.preprocess)?;
        let test = if self.test_data == self.train_data {
            train.clone()
        } else {
            let (v, l) = self.test_data.load()?;
            Dataset::prepare(v, l, &self.preprocess)?
        };
        Ok((train, test))
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every strategy of the experiment and writes the report into its output directory.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<LearningCurve>> {
    let (train, test) = spec.prepare()?;
    let curves = with_threads(threads, || {
        spec.strategies
            .iter()
            .map(|&s| run_strategy(&train, &test, &spec.run_config(s)))
            .collect::<Result<Vec<_>>>()
    })??;
    write_report(&curves, &spec.out_dir)?;
    Ok(curves)
}

/// Repeats the patch strategy with combined uncertainty once per radius.
pub fn sweep_radius(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<LearningCurve>> {
    if spec.sweep_radii.is_empty() {
        return Err(Error::Config("no radii to sweep".into()));
    }
    let (train, test) = spec.prepare()?;
    let curves = with_threads(threads, || {
        spec.sweep_radii
            .iter()
            .map(|&r| {
                let cfg = RunConfig {
                    radius: r,
                    ..spec.run_config(Strategy::PCUs)
                };
                let mut c = run_strategy(&train, &test, &cfg)?;
                c.label = format!("pCUs_r{r}");
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    write_report(&curves, &spec.out_dir)?;
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    const SPEC: &str = r#"
seed = 3
out_dir = "out"
strategies = ["Rs", "pCUs"]

[train_data.synthetic]
dims = { nx = 24, ny = 24, nz = 24 }
blob_count = 3
blob_radius_range = [3.0, 5.0]
noise_sigma = 0.1
fg_intensity = 0.7
bg_intensity = 0.3
rng_seed = 1

[test_data.synthetic]
dims = { nx = 24, ny = 24, nz = 24 }
blob_count = 3
blob_radius_range = [3.0, 5.0]
noise_sigma = 0.1
fg_intensity = 0.7
bg_intensity = 0.3
rng_seed = 2

[preprocess]
target_supervoxels = 200

[run]
effort_budget = 6
repetitions = 2
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let spec = ExperimentSpec::from_toml(SPEC, Path::new("/tmp/x")).unwrap();
        assert_eq!(spec.out_dir, Path::new("/tmp/x/out"));
        assert_eq!(spec.strategies, vec![Strategy::Rs, Strategy::PCUs]);
        assert_eq!(spec.run.seed_pos, 5);
        assert_eq!(spec.sweep_radii, vec![10.0, 15.0, 20.0]);
        assert_eq!(
            spec.train_data.synthetic.as_ref().unwrap().dims,
            Dims::cube(24)
        );
        assert_eq!(spec.run_config(Strategy::CUs).rng_seed, 3);
    }

    #[test]
    fn toml_round_trip() {
        let spec = ExperimentSpec::from_toml(SPEC, Path::new("/tmp/x")).unwrap();
        let again = ExperimentSpec::from_toml(&spec.to_toml(), Path::new("/")).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn rejects_bad_specs() {
        let both = SPEC.replace(
            "[train_data.synthetic]",
            "[train_data]\nheader = \"a.hdr\"\n[train_data.synthetic]",
        );
        assert!(matches!(
            ExperimentSpec::from_toml(&both, Path::new("/")),
            Err(Error::Config(_))
        ));
        let missing = SPEC.replace(
            "[test_data.synthetic]",
            "[test_data]\nheader = \"missing.hdr\"\n[unused.synthetic]",
        );
        assert!(ExperimentSpec::from_toml(&missing, Path::new("/")).is_err());
        let unknown = format!("{SPEC}\nbogus = 1\n");
        assert!(matches!(
            ExperimentSpec::from_toml(&unknown, Path::new("/")),
            Err(Error::Parse(_))
        ));
        let none = SPEC.replace("strategies = [\"Rs\", \"pCUs\"]", "strategies = []");
        assert!(matches!(
            ExperimentSpec::from_toml(&none, Path::new("/")),
            Err(Error::Config(_))
        ));
        let budget = SPEC.replace("effort_budget = 6", "effort_budget = 0");
        assert!(matches!(
            ExperimentSpec::from_toml(&budget, Path::new("/")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn runs_and_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::from_toml(SPEC, dir.path()).unwrap();
        let curves = run_experiment(&spec, Some(2)).unwrap();
        assert_eq!(curves.len(), 2);
        for name in [
            "curve_Rs.csv",
            "curve_pCUs.csv",
            "summary.csv",
            "learning_curves.svg",
        ] {
            assert!(spec.out_dir.join(name).is_file(), "{name}");
        }
    }
}
