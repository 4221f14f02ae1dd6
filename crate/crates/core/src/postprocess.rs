//! Decoding of measured bitstrings into directed edges, constraint
//! verification, and best-feasible selection over a batch of samples.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::exact::{enumerate_otsp_optimum, enumerate_vrp_optimum, route_length};
use crate::geometry::DistanceMatrix;
use crate::qubo::{EdgeVarIndex, OtspSpec, VrpSpec};

/// Relative slack used when comparing route lengths.
const DISTANCE_TOLERANCE: f64 = 1e-9;

/// Selected directed edges over `n` locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= n || j >= n || i == j) {
            return Err(Error::invalid(format!(
                "edge ({i}, {j}) is not a valid pair over {n} locations"
            )));
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }

    fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == v).map(|e| e.1)
    }

    /// Nodes reachable from `start` along directed edges, `start` included.
    fn reachable_from(&self, start: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in self.successors(v) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    pub fn to_bitstring(&self) -> Result<Bitstring> {
        let idx = EdgeVarIndex::new(self.n)?;
        Ok(self
            .edges
            .iter()
            .fold(Bitstring::zeros(idx.nvars()), |b, &(i, j)| {
                b.with(idx.index(i, j), true)
            }))
    }

    /// Sum of the weights of the selected edges.
    pub fn weight(&self, weights: &DistanceMatrix) -> f64 {
        self.edges.iter().map(|&(i, j)| weights.get(i, j)).sum()
    }
}

pub fn decode_edges(bits: Bitstring, n: usize) -> Result<EdgeSet> {
    let idx = EdgeVarIndex::new(n)?;
    if bits.len() != idx.nvars() {
        return Err(Error::invalid(format!(
            "bitstring of length {} cannot encode edges over {n} locations (need {})",
            bits.len(),
            idx.nvars()
        )));
    }
    let edges = (0..idx.nvars())
        .filter(|&v| bits.get(v))
        .map(|v| idx.unindex(v));
    EdgeSet::new(n, edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, constraint: &str, detail: String) {
        self.violations.push(Violation {
            constraint: constraint.to_string(),
            detail,
        });
    }

    fn degree(&mut self, kind: &str, node: usize, got: usize, want: usize) {
        if got != want {
            self.push(
                &format!("{kind}-degree"),
                format!("node {node} has {kind}-degree {got}, expected {want}"),
            );
        }
    }
}

pub fn verify_otsp(edges: &EdgeSet, initial: usize, final_: usize) -> Verdict {
    let n = edges.n();
    let mut verdict = Verdict::default();
    for v in 0..n {
        verdict.degree("out", v, edges.out_degree(v), usize::from(v != final_));
        verdict.degree("in", v, edges.in_degree(v), usize::from(v != initial));
    }
    let reached = edges.reachable_from(initial);
    if reached.len() != n {
        let missing: Vec<usize> = (0..n).filter(|v| !reached.contains(v)).collect();
        verdict.push(
            "disconnected subtour",
            format!("nodes {missing:?} are not on the path leaving node {initial}"),
        );
    }
    verdict
}

/// Location 0 is the depot.
pub fn verify_vrp(edges: &EdgeSet, vehicles: usize) -> Verdict {
    let n = edges.n();
    let mut verdict = Verdict::default();
    verdict.degree("out", 0, edges.out_degree(0), vehicles);
    verdict.degree("in", 0, edges.in_degree(0), vehicles);
    for v in 1..n {
        verdict.degree("out", v, edges.out_degree(v), 1);
        verdict.degree("in", v, edges.in_degree(v), 1);
    }
    let reached = edges.reachable_from(0);
    let missing: Vec<usize> = (1..n).filter(|v| !reached.contains(v)).collect();
    if !missing.is_empty() {
        verdict.push(
            "customers unreachable from depot",
            format!("customers {missing:?} lie on no route from the depot"),
        );
    }
    verdict
}

/// Which routing problem a bitstring encodes, in local indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingProblem {
    Otsp { initial: usize, final_: usize },
    Vrp { vehicles: usize },
}

impl RoutingProblem {
    pub fn verify(&self, edges: &EdgeSet) -> Verdict {
        match *self {
            RoutingProblem::Otsp { initial, final_ } => verify_otsp(edges, initial, final_),
            RoutingProblem::Vrp { vehicles } => verify_vrp(edges, vehicles),
        }
    }

    /// Node sequences of a feasible edge set: one path for OTSP, one
    /// depot-anchored cycle per depot exit for VRP (sorted by first customer).
    pub fn routes(&self, edges: &EdgeSet) -> Result<Vec<Vec<usize>>> {
        if !self.verify(edges).feasible() {
            return Err(Error::invalid(
                "routes requested for an infeasible edge set",
            ));
        }
        let next = |v: usize| edges.successors(v).next().expect("degree checked");
        match *self {
            RoutingProblem::Otsp { initial, final_ } => {
                let mut path = vec![initial];
                while *path.last().unwrap() != final_ {
                    path.push(next(*path.last().unwrap()));
                }
                Ok(vec![path])
            }
            RoutingProblem::Vrp { .. } => Ok(edges
                .successors(0)
                .map(|first| {
                    let mut route = vec![0, first];
                    while *route.last().unwrap() != 0 {
                        route.push(next(*route.last().unwrap()));
                    }
                    route
                })
                .collect()),
        }
    }

    /// Exact optimum of this problem under `weights`.
    pub fn oracle(&self, weights: &DistanceMatrix) -> Result<RouteSolution> {
        let sol = match *self {
            RoutingProblem::Otsp { initial, final_ } => enumerate_otsp_optimum(&OtspSpec {
                weights: weights.clone(),
                initial,
                final_,
            })?,
            RoutingProblem::Vrp { vehicles } => enumerate_vrp_optimum(&VrpSpec {
                weights: weights.clone(),
                vehicles,
            })?,
        };
        Ok(RouteSolution {
            routes: sol.routes,
            distance: sol.energy,
            bitstring: sol.bitstring,
            feasible: true,
            repaired: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteSolution {
    pub routes: Vec<Vec<usize>>,
    pub distance: f64,
    pub bitstring: Bitstring,
    pub feasible: bool,
    /// Set when no sample was feasible and the oracle optimum was substituted.
    pub repaired: bool,
}

/// Cheapest feasible sample (ties to the smallest bitstring value), or the
/// exact optimum flagged as repaired when no sample is feasible.
pub fn extract_best_feasible(
    samples: &[Bitstring],
    weights: &DistanceMatrix,
    problem: &RoutingProblem,
) -> Result<RouteSolution> {
    let n = weights.n();
    let distinct: BTreeSet<Bitstring> = samples.iter().copied().collect();
    let mut best: Option<RouteSolution> = None;
    for bits in distinct {
        let edges = decode_edges(bits, n)?;
        if !problem.verify(&edges).feasible() {
            continue;
        }
        let routes = problem.routes(&edges)?;
        let distance: f64 = routes.iter().map(|r| route_length(weights, r)).sum();
        let better = best
            .as_ref()
            .is_none_or(|b| distance < b.distance - DISTANCE_TOLERANCE);
        if better {
            best = Some(RouteSolution {
                routes,
                distance,
                bitstring: bits,
                feasible: true,
                repaired: false,
            });
        }
    }
    match best {
        Some(sol) => Ok(sol),
        None => {
            let mut sol = problem.oracle(weights)?;
            sol.repaired = true;
            Ok(sol)
        }
    }
}
