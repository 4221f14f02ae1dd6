//! Planar coordinates, distance matrices, capacity-balanced K-means and the
//! per-cluster terminal selection used to open each intra-cluster tour.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_KMEANS_ITERATIONS: usize = 100;
const KMEANS_RESTARTS: usize = 8;

/// A planar location in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2})", self.x, self.y)
    }
}

/// A customer location with its stable identifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

impl Customer {
    pub fn new(id: u32, point: Point) -> Self {
        Self {
            id,
            x: point.x,
            y: point.y,
        }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Depot plus an ordered customer list. List order is the global index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub depot: Point,
    pub customers: Vec<Customer>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    depot: [f64; 2],
    customers: Vec<Customer>,
}

impl Dataset {
    pub fn new(depot: Point, customers: Vec<Customer>) -> Result<Self> {
        if !depot.is_finite() {
            return Err(Error::invalid("depot coordinates must be finite"));
        }
        let mut seen = HashSet::new();
        for c in &customers {
            if c.id == 0 {
                return Err(Error::invalid("customer ids must be positive"));
            }
            if !c.point().is_finite() {
                return Err(Error::invalid(format!(
                    "customer {} has non-finite coordinates",
                    c.id
                )));
            }
            if !seen.insert(c.id) {
                return Err(Error::invalid(format!("duplicate customer id {}", c.id)));
            }
        }
        Ok(Self { depot, customers })
    }

    /// The 13-location example instance: depot at (50, 50) and 12 customers.
    pub fn example() -> Self {
        let coords = [
            (72.49, 84.01),
            (79.64, 76.97),
            (68.12, 68.12),
            (66.16, 82.32),
            (77.02, 29.16),
            (65.41, 34.40),
            (81.65, 19.25),
            (68.64, 18.67),
            (21.08, 25.50),
            (23.64, 20.82),
            (27.24, 17.79),
            (20.84, 22.33),
        ];
        let customers = coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Customer::new(i as u32 + 1, Point::new(x, y)))
            .collect();
        Self {
            depot: Point::new(50.0, 50.0),
            customers,
        }
    }

    pub fn customer(&self, id: u32) -> Option<&Customer> {
        self.customers.iter().find(|c| c.id == id)
    }

    fn position(&self, id: u32) -> usize {
        self.customers
            .iter()
            .position(|c| c.id == id)
            .unwrap_or(usize::MAX)
    }

    /// Parses a dataset document. TOML is the default; `.json` files are read as JSON.
    pub fn from_str_with_format(text: &str, json: bool, origin: &str) -> Result<Self> {
        let file: DatasetFile = if json {
            serde_json::from_str(text).map_err(|e| Error::Parse {
                path: origin.to_string(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| Error::Parse {
                path: origin.to_string(),
                message: e.to_string(),
            })?
        };
        Self::new(Point::new(file.depot[0], file.depot[1]), file.customers)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::from_str_with_format(&text, json, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        let file = DatasetFile {
            depot: [self.depot.x, self.depot.y],
            customers: self.customers.clone(),
        };
        toml::to_string(&file).expect("dataset serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e == "json") {
            let file = DatasetFile {
                depot: [self.depot.x, self.depot.y],
                customers: self.customers.clone(),
            };
            serde_json::to_string_pretty(&file).expect("dataset serializes")
        } else {
            self.to_toml()
        };
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Shifts every location by the same offset.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            depot: self.depot.translate(dx, dy),
            customers: self
                .customers
                .iter()
                .map(|c| Customer::new(c.id, c.point().translate(dx, dy)))
                .collect(),
        }
    }
}

/// A group of customers. Member order defines local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// 1-based label, assigned by ascending smallest member id.
    pub label: usize,
    pub members: Vec<Customer>,
    pub centroid: Point,
}

impl Cluster {
    pub fn member_ids(&self) -> Vec<u32> {
        self.members.iter().map(|c| c.id).collect()
    }

    pub fn points(&self) -> Vec<Point> {
        self.members.iter().map(Customer::point).collect()
    }

    /// Local (0-based) index of a member id.
    pub fn local_index(&self, id: u32) -> Option<usize> {
        self.members.iter().position(|c| c.id == id)
    }

    pub fn distance_matrix(&self) -> Result<DistanceMatrix> {
        build_distance_matrix(&self.points())
    }
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from explicit rows, validating shape and symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("distance matrix must be square with n >= 2"));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Self { n, entries };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let w = m.get(i, j);
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!("bad weight at ({i}, {j})")));
                }
                if (w - m.get(j, i)).abs() > 1e-12 {
                    return Err(Error::invalid(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Reorders locations: entry (i, j) of the result is entry (order[i], order[j]).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = order.len();
        let mut entries = Vec::with_capacity(n * n);
        for &i in order {
            for &j in order {
                entries.push(self.get(i, j));
            }
        }
        Self { n, entries }
    }
}

impl fmt::Display for DistanceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|w| format!("{w:8.2}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Entry and exit customers of an open intra-cluster tour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terminals {
    pub initial: u32,
    pub final_: u32,
}

pub fn euclidean_distance(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

pub fn build_distance_matrix(points: &[Point]) -> Result<DistanceMatrix> {
    if points.len() < 2 {
        return Err(Error::invalid("distance matrix needs at least 2 points"));
    }
    let n = points.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean_distance(points[i], points[j]);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

pub fn centroid(points: &[Point]) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::invalid("centroid of an empty point set"));
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Point::new(sx / n, sy / n))
}

/// Distance matrix over `[depot, centroids...]`.
pub fn inter_cluster_matrix(depot: Point, centroids: &[Point]) -> Result<DistanceMatrix> {
    let mut locations = Vec::with_capacity(centroids.len() + 1);
    locations.push(depot);
    locations.extend_from_slice(centroids);
    build_distance_matrix(&locations)
}

/// Picks the two members closest (in summed distance) to the depot and the
/// other clusters' centroids. The closest becomes the initial node, the runner-up
/// the final node; ties go to the smaller id.
pub fn select_terminals(
    cluster: &Cluster,
    depot: Point,
    other_centroids: &[Point],
) -> Result<Terminals> {
    if cluster.members.len() < 2 {
        return Err(Error::invalid(format!(
            "cluster {} needs at least 2 members to pick terminals",
            cluster.label
        )));
    }
    let mut scored: Vec<(f64, u32)> = cluster
        .members
        .iter()
        .map(|m| {
            let p = m.point();
            let score = euclidean_distance(p, depot)
                + other_centroids
                    .iter()
                    .map(|&c| euclidean_distance(p, c))
                    .sum::<f64>();
            (score, m.id)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(Terminals {
        initial: scored[0].1,
        final_: scored[1].1,
    })
}

/// Sum of squared member-to-centroid distances.
pub fn within_cluster_ss(clusters: &[Cluster]) -> f64 {
    clusters
        .iter()
        .map(|c| {
            c.members
                .iter()
                .map(|m| {
                    let d = euclidean_distance(m.point(), c.centroid);
                    d * d
                })
                .sum::<f64>()
        })
        .sum()
}

fn assignment_cost(points: &[Point], assignment: &[usize], k: usize) -> f64 {
    let centroids = centroids_of(points, assignment, k);
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| {
            let d = euclidean_distance(*p, centroids[a]);
            d * d
        })
        .sum()
}

fn centroids_of(points: &[Point], assignment: &[usize], k: usize) -> Vec<Point> {
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &a) in points.iter().zip(assignment) {
        sums[a].0 += p.x;
        sums[a].1 += p.y;
        sums[a].2 += 1;
    }
    sums.into_iter()
        .map(|(sx, sy, n)| {
            let n = n.max(1) as f64;
            Point::new(sx / n, sy / n)
        })
        .collect()
}

/// Greedy capacity-respecting assignment: (point, centroid) pairs in ascending
/// distance order, skipping full clusters. Ties resolve by point index then
/// centroid index.
pub(crate) fn greedy_balanced_assignment(
    points: &[Point],
    centroids: &[Point],
    capacity: usize,
) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(points.len() * centroids.len());
    for (i, p) in points.iter().enumerate() {
        for (c, q) in centroids.iter().enumerate() {
            pairs.push((euclidean_distance(*p, *q), i, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; points.len()];
    let mut load = vec![0usize; centroids.len()];
    for (_, i, c) in pairs {
        if assignment[i] == usize::MAX && load[c] < capacity {
            assignment[i] = c;
            load[c] += 1;
        }
    }
    assignment
}

fn kmeans_pp_seeds(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut seeds = vec![*points.choose(rng).expect("non-empty")];
    while seeds.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| {
                seeds
                    .iter()
                    .map(|s| {
                        let d = euclidean_distance(*p, *s);
                        d * d
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // all remaining points coincide with a seed
            seeds.push(*points.choose(rng).expect("non-empty"));
            continue;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        seeds.push(points[pick]);
    }
    seeds
}

/// Pairwise member swaps between clusters until none lowers the objective.
fn swap_descent(points: &[Point], assignment: &mut [usize], k: usize) {
    let mut cost = assignment_cost(points, assignment, k);
    loop {
        let mut improved = false;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if assignment[i] == assignment[j] {
                    continue;
                }
                assignment.swap(i, j);
                let trial = assignment_cost(points, assignment, k);
                if trial < cost - 1e-12 {
                    cost = trial;
                    improved = true;
                } else {
                    assignment.swap(i, j);
                }
            }
        }
        if !improved {
            return;
        }
    }
}

fn lloyd_balanced(points: &[Point], k: usize, capacity: usize, seeds: Vec<Point>) -> Vec<usize> {
    let mut centroids = seeds;
    let mut assignment = greedy_balanced_assignment(points, &centroids, capacity);
    for _ in 0..MAX_KMEANS_ITERATIONS {
        centroids = centroids_of(points, &assignment, k);
        let next = greedy_balanced_assignment(points, &centroids, capacity);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    assignment
}

/// Capacity-constrained K-means: every cluster receives exactly `capacity`
/// customers. Deterministic per seed; labels are canonicalised by ascending
/// smallest member id, members keep dataset order.
pub fn balanced_kmeans(
    dataset: &Dataset,
    k: usize,
    capacity: usize,
    seed: u64,
) -> Result<Vec<Cluster>> {
    let n = dataset.customers.len();
    if k == 0 || capacity == 0 || k * capacity != n {
        return Err(Error::invalid(format!(
            "k ({k}) x capacity ({capacity}) must equal the customer count ({n})"
        )));
    }
    let points: Vec<Point> = dataset.customers.iter().map(Customer::point).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let seeds = kmeans_pp_seeds(&points, k, &mut rng);
        let mut assignment = lloyd_balanced(&points, k, capacity, seeds);
        swap_descent(&points, &mut assignment, k);
        let cost = assignment_cost(&points, &assignment, k);
        if best.as_ref().is_none_or(|(b, _)| cost < b - 1e-12) {
            best = Some((cost, assignment));
        }
    }
    let (_, assignment) = best.expect("at least one restart");
    Ok(clusters_from_assignment(dataset, &assignment, k))
}

pub(crate) fn clusters_from_assignment(
    dataset: &Dataset,
    assignment: &[usize],
    k: usize,
) -> Vec<Cluster> {
    let mut groups: Vec<Vec<Customer>> = vec![Vec::new(); k];
    for (c, &a) in dataset.customers.iter().zip(assignment) {
        groups[a].push(*c);
    }
    for g in &mut groups {
        g.sort_by_key(|c| dataset.position(c.id));
    }
    groups.sort_by_key(|g| g.iter().map(|c| c.id).min().unwrap_or(u32::MAX));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, members)| {
            let pts: Vec<Point> = members.iter().map(Customer::point).collect();
            Cluster {
                label: i + 1,
                centroid: centroid(&pts).unwrap_or(Point::new(f64::NAN, f64::NAN)),
                members,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(ids: &[u32]) -> Vec<Point> {
        let ds = Dataset::example();
        ids.iter()
            .map(|&i| ds.customer(i).unwrap().point())
            .collect()
    }

    #[test]
    fn distance_examples() {
        let d = euclidean_distance(Point::new(72.49, 84.01), Point::new(79.64, 76.97));
        assert_abs_diff_eq!(d, 10.03, epsilon = 0.01);
        let p = Point::new(3.0, -4.0);
        assert_eq!(euclidean_distance(p, p), 0.0);
        let d = euclidean_distance(Point::new(50.0, 50.0), Point::new(73.18, 25.37));
        assert_abs_diff_eq!(d, 33.83, epsilon = 0.01);
    }

    #[test]
    fn distance_matrix_needs_two_points() {
        assert!(build_distance_matrix(&[Point::new(0.0, 0.0)]).is_err());
        let m = build_distance_matrix(&[Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).unwrap();
        assert_eq!(m.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn centroid_examples() {
        let c = centroid(&pts(&[5, 6, 7, 8])).unwrap();
        assert_abs_diff_eq!(c.x, 73.18, epsilon = 0.01);
        assert_abs_diff_eq!(c.y, 25.37, epsilon = 0.01);
        let c = centroid(&pts(&[1, 2, 3, 4])).unwrap();
        assert_abs_diff_eq!(c.x, 71.60, epsilon = 0.01);
        assert_abs_diff_eq!(c.y, 77.86, epsilon = 0.01);
        let p = Point::new(-2.5, 7.0);
        assert_eq!(centroid(&[p]).unwrap(), p);
        assert!(centroid(&[]).is_err());
    }

    #[test]
    fn kmeans_rejects_bad_shape() {
        let mut ds = Dataset::example();
        ds.customers.pop();
        assert!(balanced_kmeans(&ds, 3, 4, 0).is_err());
    }

    #[test]
    fn kmeans_coincident_points() {
        let p = Point::new(10.0, 20.0);
        let ds = Dataset::new(
            Point::new(0.0, 0.0),
            (1..=4).map(|i| Customer::new(i, p)).collect(),
        )
        .unwrap();
        let clusters = balanced_kmeans(&ds, 1, 4, 3).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].centroid, p);
        assert_eq!(clusters[0].member_ids(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn inter_cluster_with_centroid_on_depot() {
        let depot = Point::new(5.0, 5.0);
        let m = inter_cluster_matrix(depot, &[depot, Point::new(8.0, 9.0)]).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_abs_diff_eq!(m.get(0, 2), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn terminals_need_two_members() {
        let c = Cluster {
            label: 1,
            members: vec![Customer::new(1, Point::new(0.0, 0.0))],
            centroid: Point::new(0.0, 0.0),
        };
        assert!(select_terminals(&c, Point::new(1.0, 1.0), &[]).is_err());
    }

    #[test]
    fn dataset_rejects_duplicate_ids() {
        let p = Point::new(0.0, 0.0);
        assert!(Dataset::new(p, vec![Customer::new(1, p), Customer::new(1, p)]).is_err());
        assert!(Dataset::new(p, vec![Customer::new(0, p)]).is_err());
    }

    #[test]
    fn dataset_toml_round_trip() {
        let ds = Dataset::example();
        let back = Dataset::from_str_with_format(&ds.to_toml(), false, "mem").unwrap();
        assert_eq!(ds, back);
    }
}
