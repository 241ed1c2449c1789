//! Simulated expert backed by ground truth, with effort accounting.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::plane::PatchQuery;
use crate::supervoxel::SupervoxelPartition;
use crate::volume::LabelVolume;

pub const SINGLE_QUERY_COST: u64 = 1;
pub const PATCH_QUERY_COST: u64 = 2;

/// Majority ground-truth label of every supervoxel (ties go to foreground).
pub fn majority_labels(gt: &LabelVolume, partition: &SupervoxelPartition) -> Result<Vec<u8>> {
    if gt.dims() != partition.dims() {
        return Err(Error::dims(partition.dims(), gt.dims()));
    }
    let mut fg = vec![0usize; partition.count()];
    for (&id, &l) in partition.assignment().iter().zip(gt.labels()) {
        fg[id as usize] += l as usize;
    }
    Ok(fg
        .iter()
        .zip(partition.sizes())
        .map(|(&f, &s)| (2 * f >= s) as u8)
        .collect())
}

/// Majority ground-truth label of supervoxel `id`.
pub fn majority_label(gt: &LabelVolume, partition: &SupervoxelPartition, id: usize) -> Result<u8> {
    if id >= partition.count() {
        return Err(Error::Config(format!("supervoxel {id} out of range")));
    }
    Ok(majority_labels(gt, partition)?[id])
}

/// Labels revealed so far (`S_L`) and the effort spent on them.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelStore {
    labels: BTreeMap<usize, u8>,
    mask: Vec<bool>,
    effort: u64,
    single_queries: u64,
    patch_queries: u64,
}

impl LabelStore {
    pub fn new(count: usize) -> Self {
        Self {
            labels: BTreeMap::new(),
            mask: vec![false; count],
            effort: 0,
            single_queries: 0,
            patch_queries: 0,
        }
    }

    /// Seeds labels at no cost.
    pub fn seed(&mut self, id: usize, label: u8) -> Result<()> {
        if self.mask[id] {
            return Err(Error::AlreadyLabeled(id));
        }
        self.mask[id] = true;
        self.labels.insert(id, label);
        Ok(())
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn labels(&self) -> &BTreeMap<usize, u8> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn effort_spent(&self) -> u64 {
        self.effort
    }

    pub fn query_counts(&self) -> (u64, u64) {
        (self.single_queries, self.patch_queries)
    }

    pub fn unlabeled_count(&self) -> usize {
        self.mask.len() - self.labels.len()
    }
}

/// Answers queries from precomputed per-supervoxel ground truth.
#[derive(Clone, Debug)]
pub struct Annotator {
    truth: Vec<u8>,
}

impl Annotator {
    pub fn new(gt: &LabelVolume, partition: &SupervoxelPartition) -> Result<Self> {
        Ok(Self {
            truth: majority_labels(gt, partition)?,
        })
    }

    pub fn from_truth(truth: Vec<u8>) -> Self {
        Self { truth }
    }

    pub fn truth(&self) -> &[u8] {
        &self.truth
    }

    /// Reveals one supervoxel for one unit of effort.
    pub fn label_supervoxel(&self, store: &mut LabelStore, id: usize) -> Result<()> {
        store.seed(id, self.truth[id])?;
        store.effort += SINGLE_QUERY_COST;
        store.single_queries += 1;
        Ok(())
    }

    /// Reveals every unlabeled member of a patch for two units of effort.
    /// Returns the number of newly labeled supervoxels.
    pub fn label_patch(&self, store: &mut LabelStore, query: &PatchQuery) -> usize {
        let mut added = 0;
        for &id in &query.members {
            if !store.mask[id] {
                store.mask[id] = true;
                store.labels.insert(id, self.truth[id]);
                added += 1;
            }
        }
        store.effort += PATCH_QUERY_COST;
        store.patch_queries += 1;
        added
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn setup() -> (LabelVolume, SupervoxelPartition) {
        // ids: [0 0 1 1 2 2 2 2], gt: [1 1 0 0 1 1 0 0]
        let dims = Dims::new(8, 1, 1);
        let gt = LabelVolume::new(dims, vec![1, 1, 0, 0, 1, 1, 0, 0]).unwrap();
        let p = SupervoxelPartition::from_assignment(dims, [1.0; 3], vec![0, 0, 1, 1, 2, 2, 2, 2])
            .unwrap();
        (gt, p)
    }

    #[test]
    fn majority_with_tie_to_foreground() {
        let (gt, p) = setup();
        assert_eq!(majority_label(&gt, &p, 0).unwrap(), 1);
        assert_eq!(majority_label(&gt, &p, 1).unwrap(), 0);
        assert_eq!(majority_label(&gt, &p, 2).unwrap(), 1);
    }

    #[test]
    fn single_queries() {
        let (gt, p) = setup();
        let a = Annotator::new(&gt, &p).unwrap();
        let mut s = LabelStore::new(3);
        a.label_supervoxel(&mut s, 1).unwrap();
        assert!(s.labeled_mask()[1]);
        assert_eq!(s.effort_spent(), 1);
        assert!(matches!(
            a.label_supervoxel(&mut s, 1),
            Err(Error::AlreadyLabeled(1))
        ));
        assert_eq!(s.effort_spent(), 1);
    }

    #[test]
    fn hundred_singles() {
        let a = Annotator::from_truth(vec![0; 200]);
        let mut s = LabelStore::new(200);
        for i in 0..100 {
            a.label_supervoxel(&mut s, i).unwrap();
        }
        assert_eq!(s.effort_spent(), 100);
    }

    fn patch(members: Vec<usize>) -> PatchQuery {
        PatchQuery {
            origin_id: members[0],
            plane: None,
            radius: 0.0,
            members,
            score: 0.0,
            evaluations: 0,
            bound_evaluations: 0,
        }
    }

    #[test]
    fn patches_cost_two() {
        let a = Annotator::from_truth((0..20).map(|i| (i % 2) as u8).collect());
        let mut s = LabelStore::new(20);
        assert_eq!(a.label_patch(&mut s, &patch((0..12).collect())), 12);
        assert_eq!(s.effort_spent(), 2);
        let mut s = LabelStore::new(20);
        for i in [2, 5, 9] {
            a.label_supervoxel(&mut s, i).unwrap();
        }
        assert_eq!(a.label_patch(&mut s, &patch((0..12).collect())), 9);
        assert_eq!(s.effort_spent(), 3 + 2);
        assert_eq!(a.label_patch(&mut s, &patch(vec![4])), 0);
        assert_eq!(s.effort_spent(), 7);
        assert_eq!(s.query_counts(), (3, 2));
        for (&id, &l) in s.labels() {
            assert_eq!(l, a.truth()[id]);
        }
    }

    #[test]
    fn origin_only_patch() {
        let a = Annotator::from_truth(vec![1; 5]);
        let mut s = LabelStore::new(5);
        assert_eq!(a.label_patch(&mut s, &patch(vec![3])), 1);
        assert_eq!(s.labels().keys().cloned().collect::<Vec<_>>(), vec![3]);
        assert_eq!(s.effort_spent(), 2);
    }
}
