//! Exhaustive reference solvers: a full scan over QUBO assignments and direct
//! enumeration of feasible routes. Both are exact at the 12-variable scale.

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;
use crate::qubo::{EdgeVarIndex, OtspSpec, QuboModel, VrpSpec};

pub const MAX_BRUTE_FORCE_VARS: usize = 24;

/// Energies closer than this are treated as ties.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub bitstring: Bitstring,
    /// QUBO energy, or route length for the enumerators (equal on feasible routes).
    pub energy: f64,
    /// Node sequences in matrix indices; empty for a bare QUBO scan.
    pub routes: Vec<Vec<usize>>,
}

/// Scans all `2^nvars` assignments. Ties go to the smallest bitstring value.
pub fn brute_force_qubo_min(model: &QuboModel) -> Result<ExactSolution> {
    let n = model.nvars();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::Unsupported(format!(
            "exhaustive scan limited to {MAX_BRUTE_FORCE_VARS} variables, model has {n}"
        )));
    }
    let mut best_value = 0u64;
    let mut best_energy = f64::INFINITY;
    for value in 0..(1u64 << n) {
        let e = model.energy_unchecked(value);
        if e < best_energy - TIE_TOLERANCE {
            best_energy = e;
            best_value = value;
        }
    }
    Ok(ExactSolution {
        bitstring: Bitstring::new(best_value, n)?,
        energy: best_energy,
        routes: Vec::new(),
    })
}

pub(crate) fn route_length(weights: &DistanceMatrix, route: &[usize]) -> f64 {
    route.windows(2).map(|w| weights.get(w[0], w[1])).sum()
}

pub(crate) fn encode_routes(n: usize, routes: &[Vec<usize>]) -> Result<Bitstring> {
    let idx = EdgeVarIndex::new(n)?;
    let mut b = Bitstring::zeros(idx.nvars());
    for r in routes {
        for w in r.windows(2) {
            b = b.with(idx.index(w[0], w[1]), true);
        }
    }
    Ok(b)
}

/// Lexicographic permutations of `items`.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Shortest Hamiltonian path from `initial` to `final`. Ties resolve to the
/// lexicographically smallest node order.
pub fn enumerate_otsp_optimum(spec: &OtspSpec) -> Result<ExactSolution> {
    let n = spec.weights.n();
    if spec.initial >= n || spec.final_ >= n || spec.initial == spec.final_ {
        return Err(Error::invalid("terminals must be distinct valid nodes"));
    }
    let middle: Vec<usize> = (0..n)
        .filter(|&v| v != spec.initial && v != spec.final_)
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(&middle) {
        let mut path = Vec::with_capacity(n);
        path.push(spec.initial);
        path.extend(perm);
        path.push(spec.final_);
        let len = route_length(&spec.weights, &path);
        if best.as_ref().is_none_or(|(b, _)| len < b - TIE_TOLERANCE) {
            best = Some((len, path));
        }
    }
    let (energy, path) = best.expect("at least one path");
    Ok(ExactSolution {
        bitstring: encode_routes(n, std::slice::from_ref(&path))?,
        energy,
        routes: vec![path],
    })
}

/// Every split of the customers into `vehicles` non-empty depot-anchored
/// routes, in every visiting order. Ties go to the smallest bitstring value.
pub fn enumerate_vrp_optimum(spec: &VrpSpec) -> Result<ExactSolution> {
    let n = spec.weights.n();
    let m = spec.vehicles;
    let customers: Vec<usize> = (1..n).collect();
    if m == 0 || m > customers.len() {
        return Err(Error::invalid(format!(
            "{m} vehicles cannot each serve a customer among {}",
            customers.len()
        )));
    }
    let mut best: Option<(f64, Bitstring, Vec<Vec<usize>>)> = None;
    for perm in permutations(&customers) {
        // choose m-1 cut points among the len-1 gaps
        let gaps = perm.len() - 1;
        for mask in 0u32..(1 << gaps) {
            if mask.count_ones() as usize != m - 1 {
                continue;
            }
            let mut routes = Vec::with_capacity(m);
            let mut current = vec![0];
            for (k, &c) in perm.iter().enumerate() {
                current.push(c);
                if k < gaps && (mask >> k) & 1 == 1 {
                    current.push(0);
                    routes.push(std::mem::replace(&mut current, vec![0]));
                }
            }
            current.push(0);
            routes.push(current);
            routes.sort();

            let len: f64 = routes.iter().map(|r| route_length(&spec.weights, r)).sum();
            let bits = encode_routes(n, &routes)?;
            let better = match &best {
                None => true,
                Some((b, bb, _)) => {
                    len < b - TIE_TOLERANCE || (len <= b + TIE_TOLERANCE && bits < *bb)
                }
            };
            if better {
                best = Some((len, bits, routes));
            }
        }
    }
    let (energy, bitstring, routes) = best.expect("at least one split");
    Ok(ExactSolution {
        bitstring,
        energy,
        routes,
    })
}
