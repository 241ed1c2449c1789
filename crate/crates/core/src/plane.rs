//! Circular planar patch queries.
//!
//! A plane through supervoxel center `c_i` is spanned by
//! `u(phi) = (cos phi, sin phi, 0)` and `v(gamma) = (0, cos gamma, sin gamma)`
//! with both angles in `(0, pi)`. Supervoxel `j` belongs to the patch when its
//! center lies within `r` of `c_i` and its equivalent sphere (radius `rho_j`)
//! meets the plane: `|n . (c_j - c_i)| <= rho_j`.
//!
//! The best plane maximizes the summed uncertainty of its members. The
//! branch-and-bound search subdivides the angle square into dyadic boxes and
//! bounds each box with interval arithmetic on the unnormalized normal
//! `u x v`; boxes at the terminal resolution are evaluated exactly at their
//! centers. The result is the exact maximum over the grid of terminal-cell
//! centers, which is the grid [`best_plane_exhaustive`] scans at matched
//! resolution, with the same lexicographic tie-break.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::supervoxel::SupervoxelPartition;

/// Spanning pairs with `|u x v|` at or below this are rejected.
pub const DEGENERACY_EPS: f64 = 1e-6;
pub const DEFAULT_QUERY_ORIGINS: usize = 5;
pub const DEFAULT_PLANAR_NEIGHBORS: usize = 4;

/// Centers (voxel coordinates) and radii of a set of supervoxels.
#[derive(Clone, Copy, Debug)]
pub struct SupervoxelCloud<'a> {
    pub centers: &'a [[f64; 3]],
    pub radii: &'a [f64],
}

impl<'a> SupervoxelCloud<'a> {
    pub fn new(centers: &'a [[f64; 3]], radii: &'a [f64]) -> Self {
        assert_eq!(centers.len(), radii.len(), "one radius per center");
        Self { centers, radii }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn mean_radius(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.radii.len().max(1) as f64
    }
}

impl<'a> From<&'a SupervoxelPartition> for SupervoxelCloud<'a> {
    fn from(p: &'a SupervoxelPartition) -> Self {
        Self::new(p.centers(), p.radii())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub origin_id: usize,
    pub phi: f64,
    pub gamma: f64,
    pub normal: [f64; 3],
}

impl Plane {
    pub fn new(origin_id: usize, phi: f64, gamma: f64) -> Result<Self> {
        let (_, _, normal) = plane_basis(phi, gamma)?;
        Ok(Self {
            origin_id,
            phi,
            gamma,
            normal,
        })
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Spanning vectors and unit normal of the plane with angles `(phi, gamma)`.
pub fn plane_basis(phi: f64, gamma: f64) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    if !(phi > 0.0 && phi < PI && gamma > 0.0 && gamma < PI) {
        return Err(Error::Config(format!(
            "angles ({phi}, {gamma}) outside (0, pi)"
        )));
    }
    let u = [phi.cos(), phi.sin(), 0.0];
    let v = [0.0, gamma.cos(), gamma.sin()];
    let w = cross(u, v);
    let norm = dot(w, w).sqrt();
    if norm <= DEGENERACY_EPS {
        return Err(Error::DegeneratePlane(norm));
    }
    Ok((u, v, [w[0] / norm, w[1] / norm, w[2] / norm]))
}

#[inline]
fn in_slab(normal: [f64; 3], d: [f64; 3], rho: f64) -> bool {
    dot(normal, d).abs() <= rho
}

/// Supervoxels of the circular patch of radius `r` on `plane`, in id order.
/// The origin is always a member.
pub fn patch_members(
    cloud: SupervoxelCloud<'_>,
    origin_id: usize,
    plane: &Plane,
    r: f64,
) -> Vec<usize> {
    let c = cloud.centers[origin_id];
    (0..cloud.len())
        .filter(|&j| {
            if j == origin_id {
                return true;
            }
            let d = sub(cloud.centers[j], c);
            dot(d, d).sqrt() <= r && in_slab(plane.normal, d, cloud.radii[j])
        })
        .collect()
}

/// Summed uncertainty of `members`.
pub fn patch_score(members: &[usize], u: &[f64]) -> f64 {
    members.iter().map(|&j| u[j]).sum()
}

/// A selected patch.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchQuery {
    pub origin_id: usize,
    /// `None` for the planar neighbour patch used on 2D images.
    pub plane: Option<Plane>,
    pub radius: f64,
    pub members: Vec<usize>,
    pub score: f64,
    /// Patch scores computed while searching.
    pub evaluations: usize,
    /// Box bounds computed while searching (zero for the exhaustive grid).
    pub bound_evaluations: usize,
}

impl PatchQuery {
    pub fn debug_line(&self) -> String {
        let (phi, gamma) = self
            .plane
            .map(|p| (p.phi, p.gamma))
            .unwrap_or((f64::NAN, f64::NAN));
        let ids: Vec<String> = self.members.iter().map(|m| m.to_string()).collect();
        format!(
            "origin={} phi={phi:.6} gamma={gamma:.6} score={:.9} evals={} bounds={} members=[{}]",
            self.origin_id,
            self.score,
            self.evaluations,
            self.bound_evaluations,
            ids.join(" ")
        )
    }
}

/// Terminal angle of cell `index` on a grid of `steps` cells over `(0, pi)`.
#[inline]
fn cell_center(index: usize, steps: usize) -> f64 {
    (index as f64 + 0.5) * PI / steps as f64
}

/// Grid resolution (a power of two) whose cell extent is at most `tolerance`.
pub fn grid_steps_for_tolerance(tolerance: f64) -> usize {
    let need = (PI / tolerance).ceil().max(2.0) as usize;
    need.next_power_of_two()
}

/// Default terminal angular extent: below it, planes in a box move by less
/// than half a mean-sized supervoxel at the patch rim.
pub fn default_angle_tolerance(mean_radius: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return PI / 2.0;
    }
    2.0 * (mean_radius / (2.0 * r)).atan()
}

fn check_uncertainty(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::dims(n, u.len()));
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(Error::Negative { index, value });
    }
    Ok(())
}

/// Evaluates every cell center of a `grid_steps x grid_steps` grid and keeps
/// the first maximum in `(phi, gamma)` lexicographic order.
pub fn best_plane_exhaustive(
    cloud: SupervoxelCloud<'_>,
    origin_id: usize,
    u: &[f64],
    r: f64,
    grid_steps: usize,
) -> Result<PatchQuery> {
    check_uncertainty(u, cloud.len())?;
    if grid_steps < 2 {
        return Err(Error::Config("grid_steps must be at least 2".into()));
    }
    let mut best: Option<(f64, Plane, Vec<usize>)> = None;
    let mut evaluations = 0;
    for a in 0..grid_steps {
        for b in 0..grid_steps {
            let Ok(plane) = Plane::new(
                origin_id,
                cell_center(a, grid_steps),
                cell_center(b, grid_steps),
            ) else {
                continue;
            };
            evaluations += 1;
            let members = patch_members(cloud, origin_id, &plane, r);
            let score = patch_score(&members, u);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, plane, members));
            }
        }
    }
    let (score, plane, members) = best.expect("grid has non-degenerate cells");
    Ok(PatchQuery {
        origin_id,
        plane: Some(plane),
        radius: r,
        members,
        score,
        evaluations,
        bound_evaluations: 0,
    })
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    const PAD: f64 = 1e-12;

    fn padded(lo: f64, hi: f64) -> Self {
        Self {
            lo: lo - Self::PAD,
            hi: hi + Self::PAD,
        }
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        Interval {
            lo: c.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn scale(self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval {
                lo: self.lo * k,
                hi: self.hi * k,
            }
        } else {
            Interval {
                lo: self.hi * k,
                hi: self.lo * k,
            }
        }
    }

    fn add(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }

    fn min_abs(self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    fn min_sq(self) -> f64 {
        let m = self.min_abs();
        m * m
    }
}

/// Range of `sin` over `[a, b]`.
fn sin_range(a: f64, b: f64) -> Interval {
    let (sa, sb) = (a.sin(), b.sin());
    let mut lo = sa.min(sb);
    let mut hi = sa.max(sb);
    let contains = |t: f64| {
        // smallest t + 2k pi that is >= a
        let k = ((a - t) / (2.0 * PI)).ceil();
        t + k * 2.0 * PI <= b
    };
    if contains(FRAC_PI_2) {
        hi = 1.0;
    }
    if contains(-FRAC_PI_2) {
        lo = -1.0;
    }
    Interval::padded(lo, hi)
}

fn cos_range(a: f64, b: f64) -> Interval {
    sin_range(a + FRAC_PI_2, b + FRAC_PI_2)
}

/// A ball member with a positive uncertainty, prepared for bounding.
/// The origin is stored as a candidate too and always counts.
struct Candidate {
    always: bool,
    d: [f64; 3],
    rho: f64,
    u: f64,
    /// `d_x sin(phi) - d_y cos(phi) = amp * sin(phi - phase)`
    amp: f64,
    phase: f64,
}

/// Candidates are kept in id order and every score is summed in that order:
/// with nonnegative terms, rounding is then monotone under adding members,
/// so a box bound can never fall below the exact score of a cell inside it.
struct Search {
    candidates: Vec<Candidate>,
    origin_id: usize,
    steps: usize,
    cell: f64,
    evaluations: usize,
    bounds: usize,
}

impl Search {
    /// Upper bound of the patch score over the box of cells `[a0, a1) x [b0, b1)`.
    fn bound(&mut self, a0: usize, a1: usize, b0: usize, b1: usize) -> f64 {
        self.bounds += 1;
        let (p0, p1) = (a0 as f64 * self.cell, a1 as f64 * self.cell);
        let (g0, g1) = (b0 as f64 * self.cell, b1 as f64 * self.cell);
        let sin_g = sin_range(g0, g1);
        let cos_g = cos_range(g0, g1);
        let cos_p = cos_range(p0, p1);
        let sin_p = sin_range(p0, p1);
        // |u x v|^2 = 1 - cos^2(gamma) sin^2(phi)
        let norm_max = (1.0 - cos_g.min_sq() * sin_p.min_sq()).max(0.0).sqrt() + Interval::PAD;
        let cos_pg = cos_p.mul(cos_g);
        let mut total = 0.0;
        for c in &self.candidates {
            if c.always {
                total += c.u;
                continue;
            }
            let a = sin_range(p0 - c.phase, p1 - c.phase).scale(c.amp);
            let g = sin_g.mul(a).add(cos_pg.scale(c.d[2]));
            if g.min_abs() <= c.rho * norm_max * (1.0 + 1e-9) + 1e-12 {
                total += c.u;
            }
        }
        total
    }

    /// Exact score at the center of cell `(a, b)`.
    fn exact(&mut self, a: usize, b: usize) -> Option<f64> {
        self.evaluations += 1;
        let plane = Plane::new(
            self.origin_id,
            cell_center(a, self.steps),
            cell_center(b, self.steps),
        )
        .ok()?;
        Some(
            self.candidates
                .iter()
                .filter(|c| c.always || in_slab(plane.normal, c.d, c.rho))
                .map(|c| c.u)
                .sum(),
        )
    }
}

/// How far an item's key has been refined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    /// Key inherited from the parent box.
    Inherited,
    /// Key is the item's own box bound.
    Bounded,
    /// Key is the exact score of a single cell.
    Exact,
}

#[derive(Debug)]
struct Item {
    key: f64,
    a0: usize,
    a1: usize,
    b0: usize,
    b1: usize,
    stage: Stage,
}

impl Item {
    fn is_cell(&self) -> bool {
        self.a1 - self.a0 == 1 && self.b1 - self.b0 == 1
    }
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    // max-heap: larger key first, then lexicographically smaller lower corner,
    // then the more refined item
    fn cmp(&self, o: &Self) -> Ordering {
        self.key
            .total_cmp(&o.key)
            .then_with(|| (o.a0, o.b0).cmp(&(self.a0, self.b0)))
            .then_with(|| self.stage.cmp(&o.stage))
    }
}

/// Ball members with positive uncertainty plus the origin, in id order.
fn candidates(cloud: SupervoxelCloud<'_>, origin_id: usize, u: &[f64], r: f64) -> Vec<Candidate> {
    let c = cloud.centers[origin_id];
    (0..cloud.len())
        .filter(|&j| j == origin_id || u[j] > 0.0)
        .filter_map(|j| {
            let d = sub(cloud.centers[j], c);
            (j == origin_id || dot(d, d).sqrt() <= r).then(|| Candidate {
                always: j == origin_id,
                d,
                rho: cloud.radii[j],
                u: u[j],
                amp: d[0].hypot(d[1]),
                phase: d[1].atan2(d[0]),
            })
        })
        .collect()
}

/// Best-first branch-and-bound over `(phi, gamma)` boxes.
///
/// Requires `u >= 0`, which makes the box bound (the summed uncertainty of
/// every supervoxel that some plane in the box could reach) an upper bound of
/// the objective. Boxes are split along their longer side until their extent
/// is at most `angle_tolerance`. Children start with their parent's bound and
/// are only bounded (or, for single cells, scored) when they reach the top of
/// the queue, so siblings that can never win cost nothing.
pub fn best_plane_bnb(
    cloud: SupervoxelCloud<'_>,
    origin_id: usize,
    u: &[f64],
    r: f64,
    angle_tolerance: f64,
) -> Result<PatchQuery> {
    check_uncertainty(u, cloud.len())?;
    if angle_tolerance.is_nan() || angle_tolerance <= 0.0 {
        return Err(Error::Config("angle_tolerance must be positive".into()));
    }
    let steps = grid_steps_for_tolerance(angle_tolerance);
    let mut search = Search {
        candidates: candidates(cloud, origin_id, u, r),
        origin_id,
        steps,
        cell: PI / steps as f64,
        evaluations: 0,
        bounds: 0,
    };

    let mut heap = BinaryHeap::new();
    // a cheap incumbent: the first cell, which also ends the search at once
    // when nothing else is reachable
    if let Some(key) = search.exact(0, 0) {
        heap.push(Item {
            key,
            a0: 0,
            a1: 1,
            b0: 0,
            b1: 1,
            stage: Stage::Exact,
        });
    }
    let root = search.bound(0, steps, 0, steps);
    heap.push(Item {
        key: root,
        a0: 0,
        a1: steps,
        b0: 0,
        b1: steps,
        stage: Stage::Bounded,
    });

    let winner = loop {
        let mut item = heap
            .pop()
            .expect("the grid always holds a non-degenerate cell");
        match item.stage {
            Stage::Exact => break item,
            Stage::Inherited if item.is_cell() => {
                if let Some(key) = search.exact(item.a0, item.b0) {
                    item.key = key;
                    item.stage = Stage::Exact;
                    heap.push(item);
                }
                continue;
            }
            Stage::Inherited => {
                item.key = search.bound(item.a0, item.a1, item.b0, item.b1);
                item.stage = Stage::Bounded;
                heap.push(item);
                continue;
            }
            Stage::Bounded => {}
        }
        let (wa, wb) = (item.a1 - item.a0, item.b1 - item.b0);
        let halves = if wa >= wb {
            let m = item.a0 + wa / 2;
            [
                (item.a0, m, item.b0, item.b1),
                (m, item.a1, item.b0, item.b1),
            ]
        } else {
            let m = item.b0 + wb / 2;
            [
                (item.a0, item.a1, item.b0, m),
                (item.a0, item.a1, m, item.b1),
            ]
        };
        for (a0, a1, b0, b1) in halves {
            if (a0, b0) == (0, 0) && a1 - a0 == 1 && b1 - b0 == 1 {
                continue; // scored up front
            }
            heap.push(Item {
                key: item.key,
                a0,
                a1,
                b0,
                b1,
                stage: Stage::Inherited,
            });
        }
    };

    let plane = Plane::new(
        origin_id,
        cell_center(winner.a0, steps),
        cell_center(winner.b0, steps),
    )?;
    let members = patch_members(cloud, origin_id, &plane, r);
    let score = patch_score(&members, u);
    debug_assert_eq!(score, winner.key);
    Ok(PatchQuery {
        origin_id,
        plane: Some(plane),
        radius: r,
        members,
        score,
        evaluations: search.evaluations,
        bound_evaluations: search.bounds,
    })
}

/// Unlabeled ids in decreasing uncertainty, ties to the lower id, at most `t`.
fn top_unlabeled(u: &[f64], labeled: &[bool], t: usize) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = (0..u.len()).filter(|&i| !labeled[i]).collect();
    if ids.is_empty() {
        return Err(Error::NoneUnlabeled);
    }
    ids.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    ids.truncate(t.max(1));
    Ok(ids)
}

fn pick_best(queries: Vec<PatchQuery>) -> PatchQuery {
    queries
        .into_iter()
        .reduce(|best, q| {
            if q.score > best.score || (q.score == best.score && q.origin_id < best.origin_id) {
                q
            } else {
                best
            }
        })
        .expect("at least one origin")
}

/// Runs the plane search from the `t` most uncertain unlabeled supervoxels
/// and returns the best patch overall.
pub fn select_query_plane(
    cloud: SupervoxelCloud<'_>,
    u: &[f64],
    labeled: &[bool],
    t: usize,
    r: f64,
) -> Result<PatchQuery> {
    let tolerance = default_angle_tolerance(cloud.mean_radius(), r);
    select_query_plane_with_tolerance(cloud, u, labeled, t, r, tolerance)
}

pub fn select_query_plane_with_tolerance(
    cloud: SupervoxelCloud<'_>,
    u: &[f64],
    labeled: &[bool],
    t: usize,
    r: f64,
    angle_tolerance: f64,
) -> Result<PatchQuery> {
    check_uncertainty(u, cloud.len())?;
    if labeled.len() != u.len() {
        return Err(Error::dims(u.len(), labeled.len()));
    }
    let origins = top_unlabeled(u, labeled, t)?;
    let queries = origins
        .into_iter()
        .map(|o| best_plane_bnb(cloud, o, u, r, angle_tolerance))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_best(queries))
}

/// Patch selection on depth-one volumes: each of the `t` most uncertain
/// unlabeled superpixels together with its `neighbors` nearest superpixels.
pub fn select_query_patch_2d(
    cloud: SupervoxelCloud<'_>,
    u: &[f64],
    labeled: &[bool],
    t: usize,
    neighbors: usize,
) -> Result<PatchQuery> {
    check_uncertainty(u, cloud.len())?;
    if labeled.len() != u.len() {
        return Err(Error::dims(u.len(), labeled.len()));
    }
    let origins = top_unlabeled(u, labeled, t)?;
    let queries = origins
        .into_iter()
        .map(|o| {
            let c = cloud.centers[o];
            let mut near: Vec<(f64, usize)> = (0..cloud.len())
                .filter(|&j| j != o)
                .map(|j| {
                    let d = sub(cloud.centers[j], c);
                    (dot(d, d), j)
                })
                .collect();
            near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let radius = near
                .get(neighbors.saturating_sub(1))
                .map(|x| x.0.sqrt())
                .unwrap_or(0.0);
            let mut members: Vec<usize> = near.iter().take(neighbors).map(|x| x.1).collect();
            members.push(o);
            members.sort_unstable();
            PatchQuery {
                origin_id: o,
                plane: None,
                radius,
                score: patch_score(&members, u),
                members,
                evaluations: 1,
                bound_evaluations: 0,
            }
        })
        .collect();
    Ok(pick_best(queries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() < 1e-12)
    }

    #[test]
    fn axis_aligned_bases() {
        let (u, v, n) = plane_basis(FRAC_PI_2, FRAC_PI_2).unwrap();
        assert!(
            close(u, [0.0, 1.0, 0.0]) && close(v, [0.0, 0.0, 1.0]) && close(n, [1.0, 0.0, 0.0])
        );
        let (_, _, n) = plane_basis(1e-13, FRAC_PI_2).unwrap();
        assert!(close(n, [0.0, -1.0, 0.0]));
        assert!(matches!(
            plane_basis(FRAC_PI_2, 1e-9),
            Err(Error::DegeneratePlane(_))
        ));
        assert!(plane_basis(0.0, 1.0).is_err());
    }

    #[test]
    fn normal_is_unit_and_orthogonal() {
        for &(p, g) in &[(0.3, 0.4), (1.2, 2.9), (2.0, 0.1), (3.0, 1.5)] {
            let (u, v, n) = plane_basis(p, g).unwrap();
            assert!((dot(n, n) - 1.0).abs() < 1e-12);
            assert!(dot(n, u).abs() < 1e-12 && dot(n, v).abs() < 1e-12);
        }
    }

    fn cloud_of(centers: &[[f64; 3]], radii: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>) {
        (centers.to_vec(), radii.to_vec())
    }

    #[test]
    fn membership_predicates() {
        // yz-plane through the origin (normal along x)
        let (c, rad) = cloud_of(
            &[
                [0.0; 3],
                [0.0, 5.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 11.0, 0.0],
                [0.9, 0.0, 3.0],
            ],
            &[1.0, 1.0, 1.0, 1.0, 1.0],
        );
        let cloud = SupervoxelCloud::new(&c, &rad);
        let plane = Plane::new(0, FRAC_PI_2, FRAC_PI_2).unwrap();
        // on-plane at distance 5: member; perpendicular distance 2 rho: excluded;
        // beyond r: excluded; inside slab: member
        assert_eq!(patch_members(cloud, 0, &plane, 10.0), vec![0, 1, 4]);
        assert_eq!(patch_members(cloud, 0, &plane, 0.0), vec![0]);
    }

    #[test]
    fn members_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let c: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                [
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                ]
            })
            .collect();
        let rad: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..3.0)).collect();
        let cloud = SupervoxelCloud::new(&c, &rad);
        for _ in 0..30 {
            let (phi, gamma) = (rng.random_range(0.01..3.13), rng.random_range(0.01..3.13));
            let o = rng.random_range(0..20);
            let Ok(plane) = Plane::new(o, phi, gamma) else {
                continue;
            };
            // normal from the explicit cross product formula
            let w = [
                phi.sin() * gamma.sin(),
                -phi.cos() * gamma.sin(),
                phi.cos() * gamma.cos(),
            ];
            let norm = dot(w, w).sqrt();
            let expected: Vec<usize> = (0..20)
                .filter(|&j| {
                    let d = sub(c[j], c[o]);
                    j == o || (dot(d, d).sqrt() <= 9.0 && (dot(w, d) / norm).abs() <= rad[j])
                })
                .collect();
            assert_eq!(patch_members(cloud, o, &plane, 9.0), expected);
        }
    }

    #[test]
    fn scores() {
        assert_eq!(patch_score(&[], &[1.0]), 0.0);
        assert_eq!(patch_score(&[0, 1], &[0.0, 0.0]), 0.0);
        assert!((patch_score(&[0, 1, 2], &[0.1, 0.2, 0.3]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn lone_uncertain_origin() {
        let c = vec![[0.0; 3], [1.0, 2.0, 0.0], [3.0, 0.0, 1.0]];
        let rad = vec![1.0; 3];
        let cloud = SupervoxelCloud::new(&c, &rad);
        let u = [0.4, 0.0, 0.0];
        let ex = best_plane_exhaustive(cloud, 0, &u, 10.0, 16).unwrap();
        assert_eq!(ex.score, 0.4);
        let p = ex.plane.unwrap();
        assert_eq!((p.phi, p.gamma), (cell_center(0, 16), cell_center(0, 16)));
        let bb = best_plane_bnb(cloud, 0, &u, 10.0, PI / 16.0).unwrap();
        assert_eq!(bb.score, 0.4);
        assert_eq!(bb.plane.unwrap().phi, p.phi);
        // the root bound matches the first cell, so the search stops right away
        assert_eq!((bb.evaluations, bb.bound_evaluations), (1, 1));
        let zero = best_plane_bnb(cloud, 0, &[0.0; 3], 10.0, 0.1).unwrap();
        assert_eq!(zero.score, 0.0);
    }

    #[test]
    fn negative_uncertainty_rejected() {
        let c = vec![[0.0; 3], [1.0; 3]];
        let rad = vec![1.0; 2];
        assert!(matches!(
            best_plane_bnb(SupervoxelCloud::new(&c, &rad), 0, &[0.1, -0.2], 5.0, 0.1),
            Err(Error::Negative { index: 1, .. })
        ));
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
        r: f64,
    ) -> (Vec<[f64; 3]>, Vec<f64>, Vec<f64>) {
        let c: Vec<[f64; 3]> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-r..r)))
            .collect();
        let rad = (0..n).map(|_| rng.random_range(1.0..2.5)).collect();
        let u = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        (c, rad, u)
    }

    #[test]
    fn bnb_agrees_with_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..20 {
            let r = rng.random_range(8.0..15.0);
            let (c, rad, u) = random_instance(&mut rng, 40, r);
            let cloud = SupervoxelCloud::new(&c, &rad);
            let tol = default_angle_tolerance(cloud.mean_radius(), r);
            let bb = best_plane_bnb(cloud, 0, &u, r, tol).unwrap();
            let ex = best_plane_exhaustive(cloud, 0, &u, r, grid_steps_for_tolerance(tol)).unwrap();
            assert_eq!(bb.score, ex.score);
            assert_eq!(bb.plane, ex.plane);
            assert!(bb.evaluations < ex.evaluations);
        }
    }

    #[test]
    fn bound_is_sound_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let r = 12.0;
            let (c, rad, u) = random_instance(&mut rng, 30, r);
            let cloud = SupervoxelCloud::new(&c, &rad);
            let steps = 32;
            let mut s = Search {
                candidates: candidates(cloud, 0, &u, r),
                origin_id: 0,
                steps,
                cell: PI / steps as f64,
                evaluations: 0,
                bounds: 0,
            };
            for _ in 0..20 {
                let a0 = rng.random_range(0..steps - 1);
                let a1 = rng.random_range(a0 + 1..=steps);
                let b0 = rng.random_range(0..steps - 1);
                let b1 = rng.random_range(b0 + 1..=steps);
                let outer = s.bound(a0, a1, b0, b1);
                // nested box
                let inner = s.bound(a0, a0 + (a1 - a0).div_ceil(2), b0, b1);
                assert!(inner <= outer);
                for _ in 0..20 {
                    let phi = rng.random_range(a0 as f64 * s.cell..a1 as f64 * s.cell);
                    let gamma = rng.random_range(b0 as f64 * s.cell..b1 as f64 * s.cell);
                    let Ok(plane) = Plane::new(0, phi, gamma) else {
                        continue;
                    };
                    let score = patch_score(&patch_members(cloud, 0, &plane, r), &u);
                    assert!(score <= outer + 1e-12);
                }
            }
        }
    }

    #[test]
    fn top_t_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (c, rad, u) = random_instance(&mut rng, 30, 10.0);
        let cloud = SupervoxelCloud::new(&c, &rad);
        let labeled = vec![false; 30];
        let argmax = (0..30).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
        let one = select_query_plane(cloud, &u, &labeled, 1, 10.0).unwrap();
        assert_eq!(one.origin_id, argmax);
        let tol = default_angle_tolerance(cloud.mean_radius(), 10.0);
        assert_eq!(one, best_plane_bnb(cloud, argmax, &u, 10.0, tol).unwrap());
        let five = select_query_plane(cloud, &u, &labeled, DEFAULT_QUERY_ORIGINS, 10.0).unwrap();
        assert!(five.score >= one.score);
        // t beyond the unlabeled count clamps to what is left
        let mut mostly = vec![true; 30];
        mostly[3] = false;
        mostly[7] = false;
        let q = select_query_plane(cloud, &u, &mostly, 50, 10.0).unwrap();
        assert!(q.origin_id == 3 || q.origin_id == 7);
        assert!(matches!(
            select_query_plane(cloud, &u, &[true; 30], 5, 10.0),
            Err(Error::NoneUnlabeled)
        ));
    }

    #[test]
    fn zero_radius_is_single_supervoxel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (c, rad, u) = random_instance(&mut rng, 25, 10.0);
        let cloud = SupervoxelCloud::new(&c, &rad);
        let q = select_query_plane(cloud, &u, &[false; 25], 5, 0.0).unwrap();
        assert_eq!(q.members, vec![q.origin_id]);
    }

    #[test]
    fn planar_patch() {
        let c: Vec<[f64; 3]> = (0..9)
            .map(|i| [(i % 3) as f64 * 4.0, (i / 3) as f64 * 4.0, 0.0])
            .collect();
        let rad = vec![2.0; 9];
        let mut u = vec![0.1; 9];
        u[4] = 0.9;
        let q =
            select_query_patch_2d(SupervoxelCloud::new(&c, &rad), &u, &[false; 9], 1, 4).unwrap();
        assert_eq!(q.origin_id, 4);
        assert_eq!(q.members, vec![1, 3, 4, 5, 7]);
    }

    #[test]
    fn sin_range_cases() {
        let i = sin_range(0.0, PI);
        assert!(i.lo <= 0.0 && (i.hi - 1.0).abs() < 1e-9);
        let i = sin_range(-2.0, -1.0);
        assert!((i.lo + 1.0).abs() < 1e-9);
        let i = sin_range(0.1, 0.2);
        assert!((i.lo - 0.1f64.sin()).abs() < 1e-9 && (i.hi - 0.2f64.sin()).abs() < 1e-9);
        let i = sin_range(5.0, 7.0);
        assert!((i.lo - 5.0f64.sin()).abs() < 1e-9 && (i.hi - 7.0f64.sin()).abs() < 1e-9);
    }
}
