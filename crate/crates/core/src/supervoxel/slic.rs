//! Grid-seeded SLIC on (intensity, x, y, z) with connectivity enforcement.

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

use super::partition::SupervoxelPartition;

pub const SLIC_ITERATIONS: usize = 10;

const UNASSIGNED: u32 = u32::MAX;

/// Chooses seeds per axis so the grid cell count is close to `target` and
/// cells are close to cubic.
pub fn grid_layout(dims: Dims, target: usize) -> [usize; 3] {
    let ext = dims.as_array();
    let target = target.max(1) as f64;
    let score = |cells: [usize; 3]| {
        let count = (cells[0] * cells[1] * cells[2]) as f64;
        let sides: Vec<f64> = (0..3)
            .filter(|&a| ext[a] > 1)
            .map(|a| ext[a] as f64 / cells[a] as f64)
            .collect();
        let aspect = match (
            sides.iter().cloned().reduce(f64::max),
            sides.iter().cloned().reduce(f64::min),
        ) {
            (Some(hi), Some(lo)) => hi / lo,
            _ => 1.0,
        };
        (count / target).ln().abs() + 0.5 * aspect.ln()
    };
    let mut best = [1, 1, 1];
    let mut best_score = score(best);
    for a in 1..=ext[0] {
        for b in 1..=ext[1] {
            let c_ideal = target / (a * b) as f64;
            let lo = (c_ideal.floor() as usize).clamp(1, ext[2]);
            let hi = (c_ideal.ceil() as usize).clamp(1, ext[2]);
            for c in [lo, hi] {
                let s = score([a, b, c]);
                if s < best_score {
                    best_score = s;
                    best = [a, b, c];
                }
            }
        }
    }
    best
}

struct Cluster {
    intensity: f64,
    pos: [f64; 3],
}

/// Oversegments `volume` into roughly `target` compact supervoxels.
///
/// `compactness` weights spatial against intensity distance; intensities are
/// expected on a unit scale, so values around 0.1 to 0.5 balance the two.
pub fn slic_oversegment(
    volume: &Volume,
    target: usize,
    compactness: f64,
) -> Result<SupervoxelPartition> {
    let dims = volume.dims();
    if target == 0 || target > dims.len() {
        return Err(Error::Config(format!(
            "target of {target} supervoxels for {} voxels",
            dims.len()
        )));
    }
    if !(compactness > 0.0 && compactness.is_finite()) {
        return Err(Error::Config(format!(
            "compactness must be positive, got {compactness}"
        )));
    }
    let ext = dims.as_array();
    let cells = grid_layout(dims, target);
    let sides: [f64; 3] = std::array::from_fn(|a| ext[a] as f64 / cells[a] as f64);
    let active: Vec<f64> = (0..3).filter(|&a| ext[a] > 1).map(|a| sides[a]).collect();
    let step = if active.is_empty() {
        1.0
    } else {
        active
            .iter()
            .product::<f64>()
            .powf(1.0 / active.len() as f64)
    };
    let spatial_weight = (compactness / step).powi(2);
    let window: [isize; 3] = std::array::from_fn(|a| sides[a].ceil() as isize);

    let data = volume.data();
    let mut clusters = Vec::with_capacity(cells.iter().product());
    for k in 0..cells[2] {
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                let pos = [
                    (i as f64 + 0.5) * sides[0] - 0.5,
                    (j as f64 + 0.5) * sides[1] - 0.5,
                    (k as f64 + 0.5) * sides[2] - 0.5,
                ];
                let v: [usize; 3] =
                    std::array::from_fn(|a| (pos[a].round().max(0.0) as usize).min(ext[a] - 1));
                clusters.push(Cluster {
                    intensity: data[dims.index(v[0], v[1], v[2])] as f64,
                    pos,
                });
            }
        }
    }

    let mut labels = vec![UNASSIGNED; dims.len()];
    let mut dist = vec![f64::INFINITY; dims.len()];
    for _ in 0..SLIC_ITERATIONS {
        labels.fill(UNASSIGNED);
        dist.fill(f64::INFINITY);
        for (id, c) in clusters.iter().enumerate() {
            let range = |a: usize| {
                let center = c.pos[a].round() as isize;
                let lo = (center - window[a]).max(0) as usize;
                let hi = ((center + window[a]).max(0) as usize).min(ext[a] - 1);
                lo..=hi
            };
            for z in range(2) {
                let dz = z as f64 - c.pos[2];
                for y in range(1) {
                    let dy = y as f64 - c.pos[1];
                    for x in range(0) {
                        let dx = x as f64 - c.pos[0];
                        let idx = dims.index(x, y, z);
                        let di = data[idx] as f64 - c.intensity;
                        let d = di * di + (dx * dx + dy * dy + dz * dz) * spatial_weight;
                        if d < dist[idx] {
                            dist[idx] = d;
                            labels[idx] = id as u32;
                        }
                    }
                }
            }
        }
        let mut acc = vec![[0.0f64; 5]; clusters.len()];
        for (idx, &l) in labels.iter().enumerate() {
            if l == UNASSIGNED {
                continue;
            }
            let [x, y, z] = dims.coords(idx);
            let a = &mut acc[l as usize];
            a[0] += data[idx] as f64;
            a[1] += x as f64;
            a[2] += y as f64;
            a[3] += z as f64;
            a[4] += 1.0;
        }
        for (c, a) in clusters.iter_mut().zip(&acc) {
            if a[4] > 0.0 {
                c.intensity = a[0] / a[4];
                c.pos = [a[1] / a[4], a[2] / a[4], a[3] / a[4]];
            }
        }
    }

    let assignment = enforce_connectivity(dims, &labels);
    SupervoxelPartition::from_assignment(dims, volume.spacing(), assignment)
}

/// Keeps the largest 6-connected component of each cluster and merges every
/// other component (and unassigned voxels) into its largest adjacent
/// supervoxel. Returns contiguous ids ordered by original cluster id.
fn enforce_connectivity(dims: Dims, labels: &[u32]) -> Vec<u32> {
    let n = dims.len();
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let l = labels[start];
        let mut size = 0;
        comp[start] = id;
        stack.push(start);
        while let Some(v) = stack.pop() {
            size += 1;
            dims.for_each_face_neighbor(v, |nb| {
                if comp[nb] == usize::MAX && labels[nb] == l {
                    comp[nb] = id;
                    stack.push(nb);
                }
            });
        }
        comp_label.push(l);
        comp_size.push(size);
    }
    let ncomp = comp_label.len();

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for v in 0..n {
        let [x, y, z] = dims.coords(v);
        let mut link = |nb: usize| {
            let (a, b) = (comp[v], comp[nb]);
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        };
        if x + 1 < dims.nx {
            link(v + 1);
        }
        if y + 1 < dims.ny {
            link(v + dims.nx);
        }
        if z + 1 < dims.nz {
            link(v + dims.nx * dims.ny);
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }

    // main component per cluster label: largest, ties to lowest component id
    let mut main_of_label = std::collections::BTreeMap::<u32, usize>::new();
    for c in 0..ncomp {
        let l = comp_label[c];
        if l == UNASSIGNED {
            continue;
        }
        main_of_label
            .entry(l)
            .and_modify(|m| {
                if comp_size[c] > comp_size[*m] {
                    *m = c;
                }
            })
            .or_insert(c);
    }
    // owner[c] = the cluster label component c ends up in
    let mut owner: Vec<Option<u32>> = vec![None; ncomp];
    let mut label_size = std::collections::BTreeMap::<u32, usize>::new();
    for (&l, &m) in &main_of_label {
        owner[m] = Some(l);
        label_size.insert(l, comp_size[m]);
    }
    loop {
        let mut progressed = false;
        let mut pending = false;
        for c in 0..ncomp {
            if owner[c].is_some() {
                continue;
            }
            let best = adjacency[c]
                .iter()
                .filter_map(|&nb| owner[nb])
                .max_by(|a, b| label_size[a].cmp(&label_size[b]).then(b.cmp(a)));
            match best {
                Some(l) => {
                    owner[c] = Some(l);
                    *label_size.get_mut(&l).unwrap() += comp_size[c];
                    progressed = true;
                }
                None => pending = true,
            }
        }
        if !pending || !progressed {
            break;
        }
    }

    let compact: std::collections::BTreeMap<u32, u32> = main_of_label
        .keys()
        .enumerate()
        .map(|(i, &l)| (l, i as u32))
        .collect();
    comp.iter()
        .map(|&c| compact[&owner[c].expect("grid is connected, every component resolves")])
        .collect()
}
