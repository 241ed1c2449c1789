use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotator::{Annotator, LabelStore, PATCH_QUERY_COST, SINGLE_QUERY_COST};
use crate::classifier::{fit_adaptive_threshold, predict_proba, train_boosted, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{extract_features, gaussian_smooth, FeatureConfig, FeatureMatrix};
use crate::plane::{
    select_query_patch_2d, select_query_plane, SupervoxelCloud, DEFAULT_PLANAR_NEIGHBORS,
    DEFAULT_QUERY_ORIGINS,
};
use crate::seed::{derive_seed, stream_rng, tags};
use crate::supervoxel::{
    build_graph, default_k, slic_oversegment, SupervoxelGraph, SupervoxelPartition,
};
use crate::uncertainty::{UncertaintyMap, DEFAULT_TAU_MAX};
use crate::volume::{LabelVolume, Volume};

use super::metrics::{dice_from_counts, voc_from_counts};
use super::select::{select_random, select_uncertain};

/// Query selection strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Random sampling.
    Rs,
    /// Single supervoxel, feature uncertainty.
    FUs,
    /// Single supervoxel, combined uncertainty.
    CUs,
    /// Planar patch, feature uncertainty.
    #[serde(rename = "pFUs")]
    PFUs,
    /// Planar patch, combined uncertainty.
    #[serde(rename = "pCUs")]
    PCUs,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Rs,
        Strategy::FUs,
        Strategy::CUs,
        Strategy::PFUs,
        Strategy::PCUs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rs => "Rs",
            Strategy::FUs => "FUs",
            Strategy::CUs => "CUs",
            Strategy::PFUs => "pFUs",
            Strategy::PCUs => "pCUs",
        }
    }

    pub fn cost(self) -> u64 {
        if self.is_patch() {
            PATCH_QUERY_COST
        } else {
            SINGLE_QUERY_COST
        }
    }

    pub fn is_patch(self) -> bool {
        matches!(self, Strategy::PFUs | Strategy::PCUs)
    }

    fn needs_geometry(self) -> bool {
        matches!(self, Strategy::CUs | Strategy::PCUs)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown strategy `{s}` (expected Rs, FUs, CUs, pFUs or pCUs)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_supervoxels: usize,
    pub compactness: f64,
    /// Gaussian scale applied to the copy of the volume that SLIC clusters;
    /// 0 clusters raw intensities. Features always use the raw volume.
    pub slic_smoothing: f64,
    /// Neighbour count of the transition graph; derived from adjacency when absent.
    pub k: Option<usize>,
    pub features: FeatureConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_supervoxels: 2000,
            compactness: 0.1,
            slic_smoothing: 1.0,
            k: None,
            features: FeatureConfig::default(),
        }
    }
}

/// A volume with its ground truth and every per-supervoxel structure the
/// loop needs.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub volume: Volume,
    pub labels: LabelVolume,
    pub partition: SupervoxelPartition,
    pub graph: SupervoxelGraph,
    pub features: FeatureMatrix,
    /// Majority ground-truth label per supervoxel.
    pub truth: Vec<u8>,
    /// Foreground voxel count per supervoxel.
    fg_voxels: Vec<usize>,
}

impl Dataset {
    pub fn prepare(volume: Volume, labels: LabelVolume, config: &PreprocessConfig) -> Result<Self> {
        if volume.dims() != labels.dims() {
            return Err(Error::dims(volume.dims(), labels.dims()));
        }
        let partition = if config.slic_smoothing > 0.0 {
            let raw: Vec<f64> = volume.data().iter().map(|&x| x as f64).collect();
            let smooth = gaussian_smooth(&raw, volume.dims(), config.slic_smoothing);
            let smooth = Volume::new(
                volume.dims(),
                volume.spacing(),
                smooth.into_iter().map(|x| x as f32).collect(),
            )?;
            slic_oversegment(&smooth, config.target_supervoxels, config.compactness)?
        } else {
            slic_oversegment(&volume, config.target_supervoxels, config.compactness)?
        };
        let k = config.k.unwrap_or_else(|| default_k(&partition));
        let graph = build_graph(&partition, k)?;
        let features = extract_features(&volume, &partition, &config.features)?;
        let annotator = Annotator::new(&labels, &partition)?;
        let mut fg_voxels = vec![0; partition.count()];
        for (&id, &l) in partition.assignment().iter().zip(labels.labels()) {
            fg_voxels[id as usize] += l as usize;
        }
        Ok(Self {
            volume,
            labels,
            partition,
            graph,
            features,
            truth: annotator.truth().to_vec(),
            fg_voxels,
        })
    }

    pub fn count(&self) -> usize {
        self.partition.count()
    }

    /// VOC and Dice of a per-supervoxel prediction expanded to voxels.
    pub fn score_prediction(&self, predicted_fg: &[bool]) -> (f64, f64) {
        let sizes = self.partition.sizes();
        let (mut inter, mut pred) = (0, 0);
        for (s, &fg) in predicted_fg.iter().enumerate() {
            if fg {
                inter += self.fg_voxels[s];
                pred += sizes[s];
            }
        }
        let gt = self.fg_voxels.iter().sum();
        (
            voc_from_counts(inter, pred, gt),
            dice_from_counts(inter, pred, gt),
        )
    }

    /// Voxel mask of a per-supervoxel prediction.
    pub fn expand(&self, predicted_fg: &[bool]) -> Vec<bool> {
        self.partition
            .assignment()
            .iter()
            .map(|&id| predicted_fg[id as usize])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub effort_budget: u64,
    pub seed_pos: usize,
    pub seed_neg: usize,
    pub repetitions: usize,
    pub tau_max: usize,
    /// Patch radius in voxels.
    pub radius: f64,
    /// Candidate origins for plane search.
    pub t: usize,
    pub train: TrainConfig,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::PCUs,
            effort_budget: 100,
            seed_pos: 5,
            seed_neg: 5,
            repetitions: 10,
            tau_max: DEFAULT_TAU_MAX,
            radius: 12.0,
            t: DEFAULT_QUERY_ORIGINS,
            train: TrainConfig::default(),
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.effort_budget == 0 || self.repetitions == 0 || self.t == 0 || self.tau_max == 0 {
            return Err(Error::Config(
                "budget, repetitions, t and tau_max must be positive".into(),
            ));
        }
        if self.seed_pos < 2 || self.seed_neg < 2 {
            return Err(Error::Config(
                "at least two seeds per class are needed to fit the threshold".into(),
            ));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "radius {} must be nonnegative",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub effort: u64,
    pub voc: f64,
    pub dice: f64,
}

/// Score trajectories of one strategy, one per repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct LearningCurve {
    pub label: String,
    pub strategy: Strategy,
    pub repetitions: Vec<Vec<CurvePoint>>,
}

impl LearningCurve {
    pub fn final_points(&self) -> Vec<CurvePoint> {
        self.repetitions
            .iter()
            .filter_map(|r| r.last().copied())
            .collect()
    }

    pub fn final_voc(&self) -> Vec<f64> {
        self.final_points().iter().map(|p| p.voc).collect()
    }

    pub fn final_dice(&self) -> Vec<f64> {
        self.final_points().iter().map(|p| p.dice).collect()
    }
}

/// One annotator interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub round: usize,
    /// Supervoxels shown to the annotator (the origin alone for single queries).
    pub ids: Vec<usize>,
    /// Members that were still unlabeled and received a label.
    pub newly_labeled: usize,
    /// Cumulative effort after the query.
    pub effort: u64,
}

impl QueryRecord {
    pub fn audit_line(&self) -> String {
        let ids: Vec<String> = self.ids.iter().map(|i| i.to_string()).collect();
        let kind = if self.ids.len() == 1 {
            "single"
        } else {
            "patch"
        };
        format!(
            "round={} type={kind} effort={} new={} ids=[{}]",
            self.round,
            self.effort,
            self.newly_labeled,
            ids.join(" ")
        )
    }
}

/// Per-repetition trace kept alongside the curve for auditing.
#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionTrace {
    pub points: Vec<CurvePoint>,
    pub queries: Vec<QueryRecord>,
    pub rounds: usize,
    pub single_queries: u64,
    pub patch_queries: u64,
    pub effort: u64,
    pub initial_labels: Vec<usize>,
}

/// Draws the initial labeled set; depends only on the seed and repetition.
pub fn initial_labels(
    truth: &[u8],
    seed_pos: usize,
    seed_neg: usize,
    rng_seed: u64,
    rep: usize,
) -> Result<Vec<usize>> {
    let mut rng = stream_rng(rng_seed, &[tags::INITIAL_LABELS, rep as u64]);
    let mut out = Vec::with_capacity(seed_pos + seed_neg);
    for (class, want) in [(1u8, seed_pos), (0u8, seed_neg)] {
        let pool: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == class).collect();
        if pool.len() < want {
            return Err(Error::TooFewSamples {
                class,
                count: pool.len(),
                required: want,
            });
        }
        out.extend(
            sample(&mut rng, pool.len(), want)
                .into_iter()
                .map(|i| pool[i]),
        );
    }
    out.sort_unstable();
    Ok(out)
}

/// Runs one repetition of the loop and returns its trace.
pub fn run_repetition(
    train: &Dataset,
    test: &Dataset,
    config: &RunConfig,
    rep: usize,
) -> Result<RepetitionTrace> {
    let strategy = config.strategy;
    let annotator = Annotator::from_truth(train.truth.clone());
    let mut store = LabelStore::new(train.count());
    let seeds = initial_labels(
        &train.truth,
        config.seed_pos,
        config.seed_neg,
        config.rng_seed,
        rep,
    )?;
    for &s in &seeds {
        store.seed(s, train.truth[s])?;
    }
    let mut select_rng = stream_rng(config.rng_seed, &[tags::RANDOM_SELECT, rep as u64]);
    let mut tie_rng = stream_rng(config.rng_seed, &[tags::TIE_BREAK, rep as u64]);
    let cloud = SupervoxelCloud::from(&train.partition);
    let planar = train.partition.dims().is_planar();

    let mut points = Vec::new();
    let mut queries = Vec::new();
    let mut rounds = 0;
    loop {
        let ids: Vec<usize> = store.labels().keys().copied().collect();
        let rows: Vec<&[f64]> = ids.iter().map(|&i| train.features.row(i)).collect();
        let labels: Vec<u8> = store.labels().values().copied().collect();
        let train_cfg = TrainConfig {
            rng_seed: derive_seed(config.rng_seed, &[tags::TRAIN, rep as u64, rounds as u64]),
            ..config.train.clone()
        };
        let model = train_boosted(&rows, &labels, &train_cfg)?;
        let train_scores: Vec<f64> = rows
            .iter()
            .map(|r| model.raw_score(r))
            .collect::<Result<_>>()?;
        let h_star = fit_adaptive_threshold(&train_scores, &labels)?.h_star;

        let test_pred: Vec<bool> = model
            .raw_scores(&test.features)?
            .iter()
            .map(|&f| f > h_star)
            .collect();
        let (voc, dice) = test.score_prediction(&test_pred);
        points.push(CurvePoint {
            effort: store.effort_spent(),
            voc,
            dice,
        });
        if store.effort_spent() >= config.effort_budget || store.unlabeled_count() == 0 {
            break;
        }

        let mask = store.labeled_mask();
        let (ids, newly_labeled) = if strategy == Strategy::Rs {
            let id = select_random(mask, &mut select_rng)?;
            annotator.label_supervoxel(&mut store, id)?;
            (vec![id], 1)
        } else {
            let p_theta: Vec<f64> = model
                .raw_scores(&train.features)?
                .into_iter()
                .map(|f| predict_proba(f, h_star))
                .collect();
            let u = if strategy.needs_geometry() {
                UncertaintyMap::from_probabilities(&train.graph, p_theta, config.tau_max)?.h_comb
            } else {
                p_theta
                    .iter()
                    .map(|&p| crate::uncertainty::feature_entropy(p))
                    .collect::<Result<Vec<_>>>()?
            };
            if strategy.is_patch() {
                let query = if planar {
                    select_query_patch_2d(cloud, &u, mask, config.t, DEFAULT_PLANAR_NEIGHBORS)?
                } else {
                    select_query_plane(cloud, &u, mask, config.t, config.radius)?
                };
                let n = annotator.label_patch(&mut store, &query);
                (query.members, n)
            } else {
                let id = select_uncertain(&u, mask, &mut tie_rng)?;
                annotator.label_supervoxel(&mut store, id)?;
                (vec![id], 1)
            }
        };
        queries.push(QueryRecord {
            round: rounds,
            ids,
            newly_labeled,
            effort: store.effort_spent(),
        });
        rounds += 1;
    }
    let (single_queries, patch_queries) = store.query_counts();
    Ok(RepetitionTrace {
        points,
        queries,
        rounds,
        single_queries,
        patch_queries,
        effort: store.effort_spent(),
        initial_labels: seeds,
    })
}

/// Runs every repetition (in parallel) and collects the learning curve.
pub fn run_strategy_traced(
    train: &Dataset,
    test: &Dataset,
    config: &RunConfig,
) -> Result<(LearningCurve, Vec<RepetitionTrace>)> {
    config.validate()?;
    let traces = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(train, test, config, rep))
        .collect::<Result<Vec<_>>>()?;
    let curve = LearningCurve {
        label: config.strategy.name().to_string(),
        strategy: config.strategy,
        repetitions: traces.iter().map(|t| t.points.clone()).collect(),
    };
    Ok((curve, traces))
}

pub fn run_strategy(train: &Dataset, test: &Dataset, config: &RunConfig) -> Result<LearningCurve> {
    run_strategy_traced(train, test, config).map(|(c, _)| c)
}
