//! Balanced incomplete block designs: construction, validation, JSON I/O.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UldpError};

/// Largest complete design that will be materialised.
pub const MAX_COMPLETE_EDGES: u64 = 1_000_000;

/// Parameters `(v, b, r, k, λ)` of a block design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignParams {
    pub v: usize,
    pub b: usize,
    pub r: usize,
    pub k: usize,
    pub lambda: usize,
}

/// A validated `(v, b, r, k, λ)` block design on vertices `0..v`.
///
/// Every edge is a sorted list of distinct vertices. Repeated edges are
/// allowed and counted with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDesign {
    params: DesignParams,
    edges: Vec<Vec<usize>>,
}

impl BlockDesign {
    /// Validates `edges` (0-based) and returns the design, or an error
    /// carrying the first violation found.
    pub fn new(v: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let edges: Vec<Vec<usize>> = edges
            .into_iter()
            .map(|mut e| {
                e.sort_unstable();
                e
            })
            .collect();
        match validate_design(v, &edges) {
            DesignReport::Valid(params) => Ok(Self { params, edges }),
            DesignReport::Invalid(violation) => Err(UldpError::Design(violation.to_string())),
        }
    }

    pub fn params(&self) -> DesignParams {
        self.params
    }

    pub fn v(&self) -> usize {
        self.params.v
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DesignFile {
            v: self.params.v,
            edges: self
                .edges
                .iter()
                .map(|e| e.iter().map(|x| x + 1).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses `{"v": .., "edges": [[..], ..]}` with 1-based vertices.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(s)?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in file.edges {
            let mut edge = Vec::with_capacity(e.len());
            for x in e {
                if x == 0 || x > file.v {
                    return Err(UldpError::Design(format!(
                        "vertex {x} outside 1..={}",
                        file.v
                    )));
                }
                edge.push(x - 1);
            }
            edges.push(edge);
        }
        Self::new(file.v, edges)
    }
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    v: usize,
    edges: Vec<Vec<usize>>,
}

/// All `C(v, k)` subsets of size `k`.
pub fn complete_design(v: usize, k: usize) -> Result<BlockDesign> {
    if v < 1 || k < 1 || k > v {
        return Err(UldpError::Domain(format!(
            "complete design needs 1 <= k <= v, got v = {v}, k = {k}"
        )));
    }
    match binomial_u64(v, k) {
        Some(b) if b <= MAX_COMPLETE_EDGES => {}
        _ => {
            return Err(UldpError::TooLarge(format!(
                "complete design C({v}, {k})"
            )))
        }
    }
    let edges: Vec<Vec<usize>> = (0..v).combinations(k).collect();
    let params = DesignParams {
        v,
        b: edges.len(),
        r: binomial_u64(v - 1, k - 1).unwrap() as usize,
        k,
        lambda: if k >= 2 {
            binomial_u64(v - 2, k - 2).unwrap() as usize
        } else {
            0
        },
    };
    Ok(BlockDesign { params, edges })
}

/// Outcome of [`validate_design`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignReport {
    Valid(DesignParams),
    Invalid(DesignViolation),
}

impl DesignReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, DesignReport::Valid(_))
    }
}

/// First violated design condition. Vertices and edges are 0-based here;
/// `Display` prints them 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignViolation {
    Empty,
    OutOfRange { edge: usize, vertex: usize },
    RepeatedVertex { edge: usize, vertex: usize },
    NonUniform { edge: usize, size: usize, expected: usize },
    NonRegular { vertex: usize, degree: usize, other: usize, other_degree: usize },
    NonBalanced {
        pair: (usize, usize),
        count: usize,
        other: (usize, usize),
        other_count: usize,
    },
    Counting { relation: &'static str, params: DesignParams },
}

impl fmt::Display for DesignViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DesignViolation::Empty => write!(f, "design has no edges"),
            DesignViolation::OutOfRange { edge, vertex } => {
                write!(f, "edge {} contains out-of-range vertex {}", edge + 1, vertex + 1)
            }
            DesignViolation::RepeatedVertex { edge, vertex } => {
                write!(f, "edge {} repeats vertex {}", edge + 1, vertex + 1)
            }
            DesignViolation::NonUniform { edge, size, expected } => write!(
                f,
                "edge {} has size {size}, expected {expected}",
                edge + 1
            ),
            DesignViolation::NonRegular { vertex, degree, other, other_degree } => write!(
                f,
                "vertex {} has degree {degree} but vertex {} has degree {other_degree}",
                vertex + 1,
                other + 1
            ),
            DesignViolation::NonBalanced { pair, count, other, other_count } => write!(
                f,
                "pair {{{}, {}}} appears in {count} edges but pair {{{}, {}}} appears in {other_count}",
                pair.0 + 1,
                pair.1 + 1,
                other.0 + 1,
                other.1 + 1
            ),
            DesignViolation::Counting { relation, params } => write!(
                f,
                "parameters (v={}, b={}, r={}, k={}, lambda={}) violate {relation}",
                params.v, params.b, params.r, params.k, params.lambda
            ),
        }
    }
}

/// Checks uniformity, regularity, pairwise balance and the standard counting
/// relations, returning the parameters or the first violation.
///
/// `b >= v` is only required when `k < v`; the complete `(v, v)` design has
/// a single edge.
pub fn validate_design(v: usize, edges: &[Vec<usize>]) -> DesignReport {
    use DesignViolation::*;
    let fail = DesignReport::Invalid;
    if edges.is_empty() || v == 0 {
        return fail(Empty);
    }
    let k = edges[0].len();
    let mut degree = vec![0usize; v];
    let mut pairs = vec![0usize; v * v];
    let mut seen = vec![usize::MAX; v];
    for (i, e) in edges.iter().enumerate() {
        if e.len() != k {
            return fail(NonUniform { edge: i, size: e.len(), expected: k });
        }
        for &x in e {
            if x >= v {
                return fail(OutOfRange { edge: i, vertex: x });
            }
            if seen[x] == i {
                return fail(RepeatedVertex { edge: i, vertex: x });
            }
            seen[x] = i;
            degree[x] += 1;
        }
        for (a, &x) in e.iter().enumerate() {
            for &y in &e[a + 1..] {
                let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                pairs[lo * v + hi] += 1;
            }
        }
    }
    if k == 0 {
        return fail(NonUniform { edge: 0, size: 0, expected: 1 });
    }
    let r = degree[0];
    if let Some(x) = (1..v).find(|&x| degree[x] != r) {
        return fail(NonRegular {
            vertex: 0,
            degree: r,
            other: x,
            other_degree: degree[x],
        });
    }
    let lambda = if v >= 2 { pairs[1] } else { 0 };
    for x in 0..v {
        for y in x + 1..v {
            let c = pairs[x * v + y];
            if c != lambda {
                return fail(NonBalanced {
                    pair: (0, 1),
                    count: lambda,
                    other: (x, y),
                    other_count: c,
                });
            }
        }
    }
    let params = DesignParams { v, b: edges.len(), r, k, lambda };
    let b = params.b;
    if b * k != v * r {
        return fail(Counting { relation: "bk = vr", params });
    }
    if v >= 2 && r * (k - 1) != lambda * (v - 1) {
        return fail(Counting { relation: "r(k-1) = lambda(v-1)", params });
    }
    if k > v || (k < v && b < v) {
        return fail(Counting { relation: "b >= v >= k", params });
    }
    if !(b >= r && r >= lambda) {
        return fail(Counting { relation: "b >= r >= lambda", params });
    }
    DesignReport::Valid(params)
}

/// `C(n, k)` as an exact integer, or `None` on overflow.
pub fn binomial_u64(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `C(n, k)` in floating point; usable far beyond `u64`.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fano() -> Vec<Vec<usize>> {
        [[1, 2, 3], [1, 4, 5], [1, 6, 7], [2, 4, 6], [2, 5, 7], [3, 4, 7], [3, 5, 6]]
            .iter()
            .map(|e| e.iter().map(|x| x - 1).collect())
            .collect()
    }

    #[test]
    fn complete_4_2() {
        let d = complete_design(4, 2).unwrap();
        assert_eq!(
            d.params(),
            DesignParams { v: 4, b: 6, r: 3, k: 2, lambda: 1 }
        );
    }

    #[test]
    fn fano_plane_is_valid() {
        let report = validate_design(7, &fano());
        assert_eq!(
            report,
            DesignReport::Valid(DesignParams { v: 7, b: 7, r: 3, k: 3, lambda: 1 })
        );
    }

    #[test]
    fn irregular_design_reports_degrees() {
        let edges = vec![vec![0, 1], vec![0, 2]];
        match validate_design(3, &edges) {
            DesignReport::Invalid(DesignViolation::NonRegular {
                vertex: 0,
                degree: 2,
                other: 1,
                other_degree: 1,
            }) => {}
            other => panic!("unexpected report {other:?}"),
        }
    }

    #[test]
    fn complete_designs_validate() {
        for v in 1..=12 {
            for k in 1..=v {
                let d = complete_design(v, k).unwrap();
                let report = validate_design(v, d.edges());
                assert_eq!(report, DesignReport::Valid(d.params()), "v={v} k={k}");
            }
        }
    }

    #[test]
    fn refuses_huge_complete_design() {
        assert!(matches!(
            complete_design(40, 20),
            Err(UldpError::TooLarge(_))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let d = BlockDesign::new(7, fano()).unwrap();
        let back = BlockDesign::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(BlockDesign::new(3, vec![vec![0, 0]]).is_err());
        assert!(BlockDesign::new(3, vec![vec![0, 3]]).is_err());
        assert!(BlockDesign::new(3, vec![]).is_err());
        assert!(BlockDesign::from_json(r#"{"v": 3, "edges": [[0, 1]]}"#).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u64(10, 3), Some(120));
        assert_eq!(binomial_u64(3, 5), Some(0));
        assert!((binomial_f64(30, 15) - 155117520.0).abs() < 1e-3);
    }
}
