//! Feature, geometric and combined uncertainty of every supervoxel.

use std::path::Path;

use crate::classifier::{predict_proba, BoostedModel};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::supervoxel::SupervoxelGraph;

pub const DEFAULT_TAU_MAX: usize = 20;

/// Binary Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn feature_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Probability(p));
    }
    Ok(binary_entropy(p))
}

/// Entropy of a propagated probability; same contract as [`feature_entropy`].
pub fn geometric_entropy(p_g: f64) -> Result<f64> {
    feature_entropy(p_g)
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn binary_entropy(p: f64) -> f64 {
    // terms ordered by magnitude so p and 1 - p sum in the same order
    let q = 1.0 - p;
    -(xlnx(p.min(q)) + xlnx(p.max(q)))
}

/// Upper bound on the joint entropy: the sum of the two entropies.
pub fn combined_uncertainty(h_feat: f64, h_geom: f64) -> Result<f64> {
    if h_feat < 0.0 {
        return Err(Error::Negative {
            index: 0,
            value: h_feat,
        });
    }
    if h_geom < 0.0 {
        return Err(Error::Negative {
            index: 1,
            value: h_geom,
        });
    }
    Ok(h_feat + h_geom)
}

/// Applies the transition operator `tau_max` times to `p_theta`.
///
/// The first application is the neighbour average of the classifier
/// probabilities; each further step re-averages the previous estimate.
pub fn propagate_geometric(
    graph: &SupervoxelGraph,
    p_theta: &[f64],
    tau_max: usize,
) -> Result<Vec<f64>> {
    if p_theta.len() != graph.len() {
        return Err(Error::dims(graph.len(), p_theta.len()));
    }
    if tau_max == 0 {
        return Err(Error::Config("tau_max must be at least 1".into()));
    }
    for i in 0..graph.len() {
        let sum: f64 = graph.transition(i).iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::UnnormalizedRow { row: i, sum });
        }
    }
    let mut cur = p_theta.to_vec();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..tau_max {
        graph.apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Per-supervoxel probabilities and entropies.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyMap {
    pub p_theta: Vec<f64>,
    pub p_g: Vec<f64>,
    pub h_feat: Vec<f64>,
    pub h_geom: Vec<f64>,
    pub h_comb: Vec<f64>,
    pub tau_max: usize,
}

impl UncertaintyMap {
    /// Builds the map from classifier probabilities.
    pub fn from_probabilities(
        graph: &SupervoxelGraph,
        p_theta: Vec<f64>,
        tau_max: usize,
    ) -> Result<Self> {
        if let Some(&p) = p_theta.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Probability(p));
        }
        let p_g = propagate_geometric(graph, &p_theta, tau_max)?;
        let h_feat: Vec<f64> = p_theta.iter().map(|&p| binary_entropy(p)).collect();
        // clamp guards against 1 + 1e-16 from summation
        let h_geom: Vec<f64> = p_g
            .iter()
            .map(|&p| binary_entropy(p.clamp(0.0, 1.0)))
            .collect();
        let h_comb = h_feat.iter().zip(&h_geom).map(|(a, b)| a + b).collect();
        Ok(Self {
            p_theta,
            p_g,
            h_feat,
            h_geom,
            h_comb,
            tau_max,
        })
    }

    pub fn len(&self) -> usize {
        self.p_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_theta.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["id", "p_theta", "p_g", "h_feat", "h_geom", "h_comb"])
            .map_err(csv_err)?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                self.p_theta[i].to_string(),
                self.p_g[i].to_string(),
                self.h_feat[i].to_string(),
                self.h_geom[i].to_string(),
                self.h_comb[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Scores every supervoxel, converts to probabilities at `h_star` and builds
/// the uncertainty map.
pub fn compute_uncertainty_map(
    graph: &SupervoxelGraph,
    model: &BoostedModel,
    h_star: f64,
    features: &FeatureMatrix,
    tau_max: usize,
) -> Result<UncertaintyMap> {
    if features.len() != graph.len() {
        return Err(Error::dims(graph.len(), features.len()));
    }
    let p_theta = model
        .raw_scores(features)?
        .into_iter()
        .map(|f| predict_proba(f, h_star))
        .collect();
    UncertaintyMap::from_probabilities(graph, p_theta, tau_max)
}
