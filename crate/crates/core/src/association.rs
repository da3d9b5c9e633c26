//! Detection-to-landmark data association.
//!
//! Costs are Mahalanobis distances (LiDAR, in the working frame) or squared
//! wrapped angle differences (camera bearings). Candidate pairs above the
//! gate get an infinite cost, and a global optimal assignment is solved so
//! that one detection never claims a landmark a neighbor needs more —
//! nearest-neighbor greedy matching demonstrably mis-assigns under map
//! offsets.

use crate::camera::BearingSet;
use crate::error::{Error, Result};
use crate::geometry::angular_diff;
use crate::pole_map::{CameraAngleMap, Landmark};
use nalgebra::{Matrix2, Point2};

/// Mahalanobis distance `sqrt((m - y)^T R^-1 (m - y))` between a measurement
/// `y` and a landmark `m` under measurement covariance `R`.
///
/// Fails when `R` is not symmetric positive definite.
pub fn mahalanobis_cost(y: Point2<f64>, m: Point2<f64>, r: &Matrix2<f64>) -> Result<f64> {
    let det = r[(0, 0)] * r[(1, 1)] - r[(0, 1)] * r[(1, 0)];
    if !(r[(0, 0)] > 0.0 && det > 0.0) {
        return Err(Error::domain("measurement covariance must be positive definite"));
    }
    let d = m - y;
    // Closed-form 2x2 inverse.
    let q = (r[(1, 1)] * d.x * d.x - (r[(0, 1)] + r[(1, 0)]) * d.x * d.y + r[(0, 0)] * d.y * d.y) / det;
    if q < 0.0 {
        return Err(Error::domain("covariance produced a negative quadratic form"));
    }
    Ok(q.sqrt())
}

/// Squared wrapped angular difference between a measured bearing and a
/// candidate map bearing.
#[inline]
pub fn bearing_cost(y_alpha: f64, m_alpha: f64) -> f64 {
    let d = angular_diff(m_alpha, y_alpha);
    d * d
}

/// Dense cost matrix. Entries are non-negative finite costs or `+inf` for
/// forbidden (gated-out) pairs.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Creates a matrix with every pair forbidden.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![f64::INFINITY; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Sets one entry. Costs must be non-negative; `+inf` forbids the pair.
    pub fn set(&mut self, i: usize, j: usize, cost: f64) {
        assert!(cost >= 0.0 || cost.is_infinite(), "cost must be >= 0 or +inf, got {cost}");
        self.data[i * self.cols + j] = cost;
    }
}

/// Result of an assignment solve, in matrix index space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    /// Matched `(row, col)` pairs, ascending by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of the matched pair costs, accumulated in row order.
    pub total_cost: f64,
}

/// Jonker-Volgenant shortest-augmenting-path solve of a square problem.
/// `cost` must return finite values. Returns the column of every row.
fn jv_square(n: usize, cost: &impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row (1-based) assigned to column j; column 0 is virtual
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Optimal value of the square problem restricted to the given free rows and
/// columns (both index lists must have equal length).
fn jv_value(rows: &[usize], cols: &[usize], cost: &impl Fn(usize, usize) -> f64) -> f64 {
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return 0.0;
    }
    let sub = |a: usize, b: usize| cost(rows[a], cols[b]);
    let assign = jv_square(rows.len(), &sub);
    (0..rows.len()).map(|a| sub(a, assign[a])).sum()
}

/// Solves the rectangular assignment problem on `c`.
///
/// Gated (`+inf`) pairs are internally replaced by a finite cost large enough
/// to dominate any sum of real costs, so the solver first maximizes the
/// number of allowed matches and then minimizes their total cost. Rows and
/// columns that end up on a padded or forbidden entry are reported unmatched.
///
/// Among cost-equal optima the solution with the lexicographically smallest
/// `(row, col)` pairs is returned, which pins the result down deterministically.
pub fn hungarian_solve(c: &CostMatrix) -> Assignment {
    let (r, k) = (c.rows, c.cols);
    if r == 0 || k == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..r).collect(),
            unmatched_cols: (0..k).collect(),
            total_cost: 0.0,
        };
    }
    let n = r.max(k);
    let max_finite = c.data.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let big = (max_finite + 1.0) * (n as f64 + 1.0) * 2.0;
    let padded = |i: usize, j: usize| -> f64 {
        if i < r && j < k {
            let v = c.at(i, j);
            if v.is_finite() {
                v
            } else {
                big
            }
        } else {
            big
        }
    };

    // Optimal value first, then commit rows in order to the smallest column
    // that still completes optimally.
    let first = jv_square(n, &padded);
    let t_opt: f64 = (0..n).map(|i| padded(i, first[i])).sum();
    let eps = 1e-9 * (1.0 + t_opt.abs());

    let mut free_cols: Vec<usize> = (0..n).collect();
    let mut committed = vec![usize::MAX; n];
    let mut acc = 0.0f64;
    for i in 0..r {
        let rest_rows: Vec<usize> = ((i + 1)..n).collect();
        let mut chosen = None;
        for (slot, &j) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols
                .iter()
                .copied()
                .filter(|&cj| cj != j)
                .collect();
            let t = acc + padded(i, j) + jv_value(&rest_rows, &rest_cols, &padded);
            if t <= t_opt + eps {
                chosen = Some((slot, j));
                break;
            }
        }
        let (slot, j) = chosen.expect("assignment refinement lost the optimum");
        committed[i] = j;
        acc += padded(i, j);
        free_cols.remove(slot);
    }

    let mut pairs = Vec::new();
    let mut unmatched_rows = Vec::new();
    let mut matched_col = vec![false; k];
    let mut total = 0.0f64;
    for i in 0..r {
        let j = committed[i];
        if j < k && c.at(i, j).is_finite() {
            pairs.push((i, j));
            matched_col[j] = true;
            total += c.at(i, j);
        } else {
            unmatched_rows.push(i);
        }
    }
    let unmatched_cols = (0..k).filter(|&j| !matched_col[j]).collect();
    Assignment { pairs, unmatched_rows, unmatched_cols, total_cost: total }
}

/// One confirmed measurement-to-landmark pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPair {
    /// Index into the measurement set.
    pub measurement: usize,
    /// Map landmark id.
    pub landmark: u64,
}

/// Result of gating plus assignment for one sensor frame.
#[derive(Debug, Clone, Default)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
    pub unmatched_measurements: Vec<usize>,
    pub unmatched_landmarks: Vec<u64>,
}

/// Associates LiDAR pole detections (already expressed in the working frame,
/// each with its combined gating covariance) to candidate landmarks.
///
/// Pairs whose Mahalanobis distance exceeds `gate` are forbidden, as are
/// pairs farther than `max_distance` metres apart: when the pose prior is
/// weak the Mahalanobis ellipse grows with it, and the absolute ceiling is
/// what keeps far-off clutter out of the assignment.
pub fn gate_and_match_lidar(
    measurements: &[(Point2<f64>, Matrix2<f64>)],
    candidates: &[&Landmark],
    gate: f64,
    max_distance: f64,
) -> Result<MatchSet> {
    if !(gate > 0.0) {
        return Err(Error::domain(format!("association gate must be positive, got {gate}")));
    }
    if !(max_distance > 0.0) {
        return Err(Error::domain(format!(
            "association distance ceiling must be positive, got {max_distance}"
        )));
    }
    let mut c = CostMatrix::new(measurements.len(), candidates.len());
    for (i, (y, r)) in measurements.iter().enumerate() {
        for (j, l) in candidates.iter().enumerate() {
            let d = mahalanobis_cost(*y, l.position, r)?;
            if d <= gate && (y - l.position).norm() <= max_distance {
                c.set(i, j, d);
            }
        }
    }
    Ok(to_match_set(hungarian_solve(&c), candidates))
}

/// Associates measured bearings to projected map bearings of one camera.
///
/// The cost is the squared wrapped angle difference; pairs farther apart
/// than `gate_rad` are forbidden.
pub fn gate_and_match_bearings(y: &BearingSet, m: &CameraAngleMap, gate_rad: f64) -> Result<MatchSet> {
    if !(gate_rad > 0.0) {
        return Err(Error::domain(format!("bearing gate must be positive, got {gate_rad}")));
    }
    let mut c = CostMatrix::new(y.bearings.len(), m.entries.len());
    for (i, b) in y.bearings.iter().enumerate() {
        for (j, e) in m.entries.iter().enumerate() {
            let d = angular_diff(e.alpha, b.alpha);
            if d.abs() <= gate_rad {
                c.set(i, j, d * d);
            }
        }
    }
    let assignment = hungarian_solve(&c);
    let mut pairs = Vec::new();
    for &(i, j) in &assignment.pairs {
        pairs.push(MatchPair { measurement: i, landmark: m.entries[j].id });
    }
    let unmatched_landmarks = assignment.unmatched_cols.iter().map(|&j| m.entries[j].id).collect();
    Ok(MatchSet { pairs, unmatched_measurements: assignment.unmatched_rows, unmatched_landmarks })
}

/// Associates measured bearings to projected map bearings with one gate per
/// candidate, then drops any match a nearby alternative makes ambiguous.
///
/// `gates[j]` is the acceptance half-width for candidate `j`, letting the
/// caller scale each gate with that landmark's range. After the assignment,
/// a pair only survives if the runner-up candidate for the same measurement
/// sits at least `ambiguity_ratio` times farther away than the matched one;
/// everything else is left unmatched rather than risked on a coin flip.
pub fn gate_and_match_bearings_scaled(
    y: &BearingSet,
    m: &CameraAngleMap,
    gates: &[f64],
    ambiguity_ratio: f64,
) -> Result<MatchSet> {
    if gates.len() != m.entries.len() {
        return Err(Error::domain(format!(
            "{} gates for {} candidates",
            gates.len(),
            m.entries.len()
        )));
    }
    if !(ambiguity_ratio >= 1.0) {
        return Err(Error::domain(format!("ambiguity ratio must be >= 1, got {ambiguity_ratio}")));
    }
    for &g in gates {
        if !(g > 0.0) {
            return Err(Error::domain(format!("bearing gate must be positive, got {g}")));
        }
    }
    let mut c = CostMatrix::new(y.bearings.len(), m.entries.len());
    for (i, b) in y.bearings.iter().enumerate() {
        for (j, e) in m.entries.iter().enumerate() {
            let d = angular_diff(e.alpha, b.alpha);
            if d.abs() <= gates[j] {
                c.set(i, j, d * d);
            }
        }
    }
    let assignment = hungarian_solve(&c);
    let mut pairs = Vec::new();
    let mut unmatched_measurements = assignment.unmatched_rows;
    let mut dropped_cols = Vec::new();
    for &(i, j) in &assignment.pairs {
        let alpha = y.bearings[i].alpha;
        let matched = angular_diff(m.entries[j].alpha, alpha).abs();
        let runner_up = m
            .entries
            .iter()
            .enumerate()
            .filter(|&(k, e)| k != j && angular_diff(e.alpha, alpha).abs() <= gates[k])
            .map(|(_, e)| angular_diff(e.alpha, alpha).abs())
            .fold(f64::INFINITY, f64::min);
        if runner_up < ambiguity_ratio * matched {
            unmatched_measurements.push(i);
            dropped_cols.push(j);
        } else {
            pairs.push(MatchPair { measurement: i, landmark: m.entries[j].id });
        }
    }
    unmatched_measurements.sort_unstable();
    let unmatched_landmarks = assignment
        .unmatched_cols
        .iter()
        .chain(dropped_cols.iter())
        .map(|&j| m.entries[j].id)
        .collect();
    Ok(MatchSet { pairs, unmatched_measurements, unmatched_landmarks })
}

fn to_match_set(a: Assignment, candidates: &[&Landmark]) -> MatchSet {
    MatchSet {
        pairs: a
            .pairs
            .iter()
            .map(|&(i, j)| MatchPair { measurement: i, landmark: candidates[j].id })
            .collect(),
        unmatched_measurements: a.unmatched_rows,
        unmatched_landmarks: a.unmatched_cols.iter().map(|&j| candidates[j].id).collect(),
    }
}
