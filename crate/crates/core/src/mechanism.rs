//! Privatisation mechanisms: dense channel matrices and a streaming sampler
//! for mixtures of complete block designs.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::designs::{binomial_f64, complete_design, BlockDesign};
use crate::error::{check_budget, Result, UldpError};
use crate::simplex::{Mixture, Partition};

/// Largest dense channel, counted in matrix entries.
pub const MAX_DENSE_ENTRIES: usize = 10_000_000;

const ROW_TOL: f64 = 1e-12;
const RATIO_SLACK: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-10;

/// A privatised output: a protected subset of sensitive symbols, or an
/// invertible singleton naming a non-sensitive symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutputSymbol {
    Protected(Vec<usize>),
    Invertible(usize),
}

impl OutputSymbol {
    pub fn is_protected(&self) -> bool {
        matches!(self, OutputSymbol::Protected(_))
    }

    /// Whether symbol `x` belongs to the output set.
    pub fn contains(&self, x: usize) -> bool {
        match self {
            OutputSymbol::Protected(s) => s.binary_search(&x).is_ok(),
            OutputSymbol::Invertible(y) => *y == x,
        }
    }
}

impl Ord for OutputSymbol {
    /// Protected outputs first, ordered by size then lexicographically,
    /// followed by invertible outputs in symbol order.
    fn cmp(&self, other: &Self) -> Ordering {
        use OutputSymbol::*;
        match (self, other) {
            (Protected(a), Protected(b)) => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
            (Protected(_), Invertible(_)) => Ordering::Less,
            (Invertible(_), Protected(_)) => Ordering::Greater,
            (Invertible(a), Invertible(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for OutputSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for OutputSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (tag, items): (&str, Vec<usize>) = match self {
            OutputSymbol::Protected(s) => ("P", s.iter().map(|x| x + 1).collect()),
            OutputSymbol::Invertible(x) => ("I", vec![x + 1]),
        };
        write!(f, "{tag}{{")?;
        for (i, x) in items.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// Provenance of a mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismKind {
    /// LDP block-design mechanism on the sensitive alphabet alone.
    BlockDesign { k: usize },
    /// Extremal mechanism built from arbitrary gamma weights.
    Extremal,
    /// Mixture of block-design mechanisms with weights `t`.
    Ubd { mixture: Mixture },
    /// Loaded from a channel matrix.
    Imported,
}

/// Weights `γ(y)` on protected subsets of the sensitive alphabet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GammaWeights(BTreeMap<Vec<usize>, f64>);

impl GammaWeights {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` to subset `y` (0-based). Repeated subsets accumulate.
    pub fn add(&mut self, mut y: Vec<usize>, weight: f64) {
        y.sort_unstable();
        *self.0.entry(y).or_insert(0.0) += weight;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.0.iter().map(|(y, &g)| (y, g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }
}

#[derive(Debug)]
struct Dense {
    outputs: Vec<OutputSymbol>,
    /// Row-major `w x outputs.len()`.
    matrix: Vec<f64>,
    samplers: OnceLock<Vec<WeightedIndex<f64>>>,
}

impl Clone for Dense {
    fn clone(&self) -> Self {
        Self {
            outputs: self.outputs.clone(),
            matrix: self.matrix.clone(),
            samplers: OnceLock::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct Streaming {
    /// Block size drawn for a sensitive input.
    sensitive_class: WeightedIndex<f64>,
    /// Index `k - 1` for a protected output of size `k`, index `v` for the
    /// invertible output.
    nonsensitive_class: WeightedIndex<f64>,
    /// `P(x in Y | x, |Y| = k)` for sensitive `x`.
    member_prob: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Backend {
    Dense(Dense),
    Streaming(Streaming),
}

/// A channel `Q(y | x)` from `0..w` to output symbols.
#[derive(Debug, Clone)]
pub struct Mechanism {
    w: usize,
    v: usize,
    epsilon: f64,
    kind: MechanismKind,
    backend: Backend,
}

/// Result of sampling into a caller-provided buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampled {
    /// The buffer holds the sorted protected subset.
    Protected,
    Invertible(usize),
}

impl Mechanism {
    pub fn w(&self) -> usize {
        self.w
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> &MechanismKind {
        &self.kind
    }

    /// The sensitive/non-sensitive split, absent for pure LDP mechanisms.
    pub fn partition(&self) -> Option<Partition> {
        Partition::new(self.w, self.v).ok()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    /// Mixture weights for block-design mixtures.
    pub fn mixture(&self) -> Option<&Mixture> {
        match &self.kind {
            MechanismKind::Ubd { mixture } => Some(mixture),
            _ => None,
        }
    }

    /// Output alphabet of a dense mechanism, in canonical order.
    pub fn outputs(&self) -> Option<&[OutputSymbol]> {
        match &self.backend {
            Backend::Dense(d) => Some(&d.outputs),
            Backend::Streaming(_) => None,
        }
    }

    /// Row `Q(. | x)` of a dense mechanism.
    pub fn row(&self, x: usize) -> Option<&[f64]> {
        match &self.backend {
            Backend::Dense(d) => {
                let m = d.outputs.len();
                Some(&d.matrix[x * m..(x + 1) * m])
            }
            Backend::Streaming(_) => None,
        }
    }

    /// Column `Q(y | .)` for any output symbol; zero if `y` is not an output.
    pub fn column(&self, y: &OutputSymbol) -> Vec<f64> {
        match &self.backend {
            Backend::Dense(d) => match d.outputs.binary_search(y) {
                Ok(j) => {
                    let m = d.outputs.len();
                    (0..self.w).map(|x| d.matrix[x * m + j]).collect()
                }
                Err(_) => vec![0.0; self.w],
            },
            Backend::Streaming(_) => self.streaming_column(y),
        }
    }

    fn streaming_column(&self, y: &OutputSymbol) -> Vec<f64> {
        let (w, v, e) = (self.w, self.v, self.epsilon.exp());
        let t = self.mixture().expect("streaming backend is always a mixture");
        let mut col = vec![0.0; w];
        match y {
            OutputSymbol::Protected(s) => {
                let k = s.len();
                if k == 0 || k > v || s.iter().any(|&x| x >= v) {
                    return col;
                }
                let gamma = t.weight(k) * v as f64
                    / (binomial_f64(v, k) * (k as f64 * e + (v - k) as f64));
                for (x, c) in col.iter_mut().enumerate() {
                    *c = if y.contains(x) { gamma * e } else { gamma };
                }
            }
            OutputSymbol::Invertible(x0) => {
                if *x0 >= v && *x0 < w {
                    col[*x0] = invertible_mass(t, v, self.epsilon);
                }
            }
        }
        col
    }

    /// Draws `Y ~ Q(. | x)` into `buf`, avoiding allocation.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        x: usize,
        rng: &mut R,
        buf: &mut Vec<usize>,
    ) -> Sampled {
        buf.clear();
        match &self.backend {
            Backend::Dense(d) => {
                let samplers = d.samplers.get_or_init(|| {
                    let m = d.outputs.len();
                    d.matrix
                        .chunks(m)
                        .map(|row| WeightedIndex::new(row).expect("rows are stochastic"))
                        .collect()
                });
                match &d.outputs[samplers[x].sample(rng)] {
                    OutputSymbol::Protected(s) => {
                        buf.extend_from_slice(s);
                        Sampled::Protected
                    }
                    OutputSymbol::Invertible(y) => Sampled::Invertible(*y),
                }
            }
            Backend::Streaming(s) => {
                let v = self.v;
                if x < v {
                    let k = s.sensitive_class.sample(rng) + 1;
                    let member = rng.gen::<f64>() < s.member_prob[k - 1];
                    uniform_subset(rng, v, k, x, member, buf);
                    Sampled::Protected
                } else {
                    let c = s.nonsensitive_class.sample(rng);
                    if c == v {
                        Sampled::Invertible(x)
                    } else {
                        uniform_subset(rng, v, c + 1, usize::MAX, false, buf);
                        Sampled::Protected
                    }
                }
            }
        }
    }

    /// Draws one output for input `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> OutputSymbol {
        let mut buf = Vec::new();
        match self.sample_into(x, rng, &mut buf) {
            Sampled::Protected => OutputSymbol::Protected(buf),
            Sampled::Invertible(y) => OutputSymbol::Invertible(y),
        }
    }

    /// Builds a dense mechanism from an explicit channel matrix. Shapes and
    /// entry signs are checked here; the privacy conditions are checked by
    /// [`validate_uldp`]. Repeated outputs are merged.
    pub fn from_rows(
        w: usize,
        v: usize,
        epsilon: f64,
        outputs: Vec<OutputSymbol>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_budget(epsilon)?;
        if v < 1 || v > w {
            return Err(UldpError::Domain(format!("need 1 <= v <= w, got w = {w}, v = {v}")));
        }
        if rows.len() != w {
            return Err(UldpError::Domain(format!("expected {w} rows, got {}", rows.len())));
        }
        let m = outputs.len();
        let mut columns: BTreeMap<OutputSymbol, Vec<f64>> = BTreeMap::new();
        for (j, y) in outputs.into_iter().enumerate() {
            let y = canonical_output(y, v, w)?;
            let col = columns.entry(y).or_insert_with(|| vec![0.0; w]);
            for (x, row) in rows.iter().enumerate() {
                if row.len() != m {
                    return Err(UldpError::Domain(format!(
                        "row {} has {} entries, expected {m}",
                        x + 1,
                        row.len()
                    )));
                }
                let q = row[j];
                if !q.is_finite() || q < 0.0 {
                    return Err(UldpError::Domain(format!(
                        "entry ({}, {}) is {q}",
                        x + 1,
                        j + 1
                    )));
                }
                col[x] += q;
            }
        }
        Ok(Self {
            w,
            v,
            epsilon,
            kind: MechanismKind::Imported,
            backend: Backend::Dense(dense_from_columns(w, columns)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let Backend::Dense(d) = &self.backend else {
            return Err(UldpError::Unsupported("JSON export"));
        };
        let file = MechanismFile {
            w: self.w,
            v: self.v,
            epsilon: self.epsilon,
            outputs: d.outputs.iter().map(OutputEntry::from).collect(),
            rows: d.matrix.chunks(d.outputs.len()).map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses the format written by [`Mechanism::to_json`]; symbols are 1-based.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: MechanismFile = serde_json::from_str(s)?;
        let outputs = file
            .outputs
            .into_iter()
            .map(OutputSymbol::try_from)
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(file.w, file.v, file.epsilon, outputs, file.rows)
    }
}

fn canonical_output(y: OutputSymbol, v: usize, w: usize) -> Result<OutputSymbol> {
    match y {
        OutputSymbol::Protected(mut s) => {
            s.sort_unstable();
            let distinct = s.windows(2).all(|p| p[0] < p[1]);
            if s.is_empty() || !distinct || s.iter().any(|&x| x >= v) {
                return Err(UldpError::Domain(format!(
                    "protected output must be a non-empty subset of 1..={v}"
                )));
            }
            Ok(OutputSymbol::Protected(s))
        }
        OutputSymbol::Invertible(x) if x < w => Ok(OutputSymbol::Invertible(x)),
        OutputSymbol::Invertible(x) => Err(UldpError::Domain(format!(
            "invertible output {} outside 1..={w}",
            x + 1
        ))),
    }
}

/// Drops all-zero columns and lays the rest out row-major.
fn dense_from_columns(w: usize, columns: BTreeMap<OutputSymbol, Vec<f64>>) -> Result<Dense> {
    let kept: Vec<(OutputSymbol, Vec<f64>)> = columns
        .into_iter()
        .filter(|(_, c)| c.iter().any(|&q| q > 0.0))
        .collect();
    let m = kept.len();
    if m == 0 {
        return Err(UldpError::Domain("mechanism has no outputs".into()));
    }
    if w.saturating_mul(m) > MAX_DENSE_ENTRIES {
        return Err(UldpError::TooLarge(format!("channel with {w} x {m} entries")));
    }
    let mut matrix = vec![0.0; w * m];
    for (j, (_, col)) in kept.iter().enumerate() {
        for x in 0..w {
            matrix[x * m + j] = col[x];
        }
    }
    Ok(Dense {
        outputs: kept.into_iter().map(|(y, _)| y).collect(),
        matrix,
        samplers: OnceLock::new(),
    })
}

#[derive(Serialize, Deserialize)]
struct MechanismFile {
    w: usize,
    v: usize,
    epsilon: f64,
    outputs: Vec<OutputEntry>,
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct OutputEntry {
    kind: OutputKind,
    subset: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutputKind {
    Protected,
    Invertible,
}

impl From<&OutputSymbol> for OutputEntry {
    fn from(y: &OutputSymbol) -> Self {
        match y {
            OutputSymbol::Protected(s) => OutputEntry {
                kind: OutputKind::Protected,
                subset: s.iter().map(|x| x + 1).collect(),
            },
            OutputSymbol::Invertible(x) => OutputEntry {
                kind: OutputKind::Invertible,
                subset: vec![x + 1],
            },
        }
    }
}

impl TryFrom<OutputEntry> for OutputSymbol {
    type Error = UldpError;

    fn try_from(e: OutputEntry) -> Result<Self> {
        if e.subset.iter().any(|&x| x == 0) {
            return Err(UldpError::Domain("symbols are 1-based".into()));
        }
        let s: Vec<usize> = e.subset.into_iter().map(|x| x - 1).collect();
        match e.kind {
            OutputKind::Protected => Ok(OutputSymbol::Protected(s)),
            OutputKind::Invertible if s.len() == 1 => Ok(OutputSymbol::Invertible(s[0])),
            OutputKind::Invertible => Err(UldpError::Domain(
                "invertible output must be a singleton".into(),
            )),
        }
    }
}

/// Fills `buf` with a uniform `k`-subset of `0..v`, sorted. If `x < v`, the
/// subset contains `x` when `member` holds and excludes it otherwise.
fn uniform_subset<R: Rng + ?Sized>(
    rng: &mut R,
    v: usize,
    k: usize,
    x: usize,
    member: bool,
    buf: &mut Vec<usize>,
) {
    buf.clear();
    if x >= v {
        buf.extend(rand::seq::index::sample(rng, v, k).iter());
    } else {
        let need = if member { k - 1 } else { k };
        buf.extend(
            rand::seq::index::sample(rng, v - 1, need)
                .iter()
                .map(|i| if i >= x { i + 1 } else { i }),
        );
        if member {
            buf.push(x);
        }
    }
    buf.sort_unstable();
}

/// Probability that a non-sensitive input is released through its
/// invertible output.
pub(crate) fn invertible_mass(t: &Mixture, v: usize, epsilon: f64) -> f64 {
    let (e, e1) = (epsilon.exp(), epsilon.exp_m1());
    let f: f64 = (1..=v)
        .map(|k| t.weight(k) * k as f64 * e1 / (k as f64 * e + (v - k) as f64))
        .sum();
    f.clamp(0.0, 1.0)
}

/// LDP mechanism on `0..v` from a block design:
/// `Q(y | x) ∝ e^ε` if `x ∈ y`, else `∝ 1`.
pub fn bd_mechanism(design: &BlockDesign, epsilon: f64) -> Result<Mechanism> {
    check_budget(epsilon)?;
    let p = design.params();
    let e = epsilon.exp();
    let z = p.r as f64 * e + (p.b - p.r) as f64;
    let mut columns: BTreeMap<OutputSymbol, Vec<f64>> = BTreeMap::new();
    for edge in design.edges() {
        let col = columns
            .entry(OutputSymbol::Protected(edge.clone()))
            .or_insert_with(|| vec![0.0; p.v]);
        for (x, c) in col.iter_mut().enumerate() {
            *c += if edge.binary_search(&x).is_ok() { e / z } else { 1.0 / z };
        }
    }
    Ok(Mechanism {
        w: p.v,
        v: p.v,
        epsilon,
        kind: MechanismKind::BlockDesign { k: p.k },
        backend: Backend::Dense(dense_from_columns(p.v, columns)?),
    })
}

/// Extremal ULDP mechanism determined by `γ`: sensitive rows are `γ(y) e^ε`
/// on subsets containing the input and `γ(y)` elsewhere; non-sensitive rows
/// are `γ(y)` on protected outputs and the remaining mass on their own
/// invertible output.
pub fn extremal_from_gamma(
    part: &Partition,
    epsilon: f64,
    gamma: &GammaWeights,
) -> Result<Mechanism> {
    build_extremal(part, epsilon, gamma, MechanismKind::Extremal)
}

fn build_extremal(
    part: &Partition,
    epsilon: f64,
    gamma: &GammaWeights,
    kind: MechanismKind,
) -> Result<Mechanism> {
    check_budget(epsilon)?;
    let (w, v) = (part.w(), part.v());
    let (e, e1) = (epsilon.exp(), epsilon.exp_m1());
    let mut load = vec![0.0; v];
    let mut total = 0.0;
    for (y, g) in gamma.iter() {
        if y.is_empty() || y.iter().any(|&x| x >= v) {
            return Err(UldpError::Domain(format!(
                "gamma key must be a non-empty subset of 1..={v}"
            )));
        }
        if !g.is_finite() || g < 0.0 {
            return Err(UldpError::Domain(format!("gamma weight {g} is negative")));
        }
        total += g;
        for &x in y {
            load[x] += g;
        }
    }
    for (x, l) in load.iter().enumerate() {
        let residual = total + e1 * l - 1.0;
        if residual.abs() > FEASIBILITY_TOL {
            return Err(UldpError::Infeasible { symbol: x + 1, residual });
        }
    }
    let m = gamma.len() + (w - v);
    if w.saturating_mul(m) > MAX_DENSE_ENTRIES {
        return Err(UldpError::TooLarge(format!("channel with {w} x {m} entries")));
    }
    let invertible = (1.0 - total).max(0.0);
    let mut columns: BTreeMap<OutputSymbol, Vec<f64>> = BTreeMap::new();
    for (y, g) in gamma.iter() {
        let mut col = vec![g; w];
        for &x in y {
            col[x] = g * e;
        }
        columns.insert(OutputSymbol::Protected(y.clone()), col);
    }
    for x in v..w {
        let mut col = vec![0.0; w];
        col[x] = invertible;
        columns.insert(OutputSymbol::Invertible(x), col);
    }
    Ok(Mechanism {
        w,
        v,
        epsilon,
        kind,
        backend: Backend::Dense(dense_from_columns(w, columns)?),
    })
}

/// Dense mixture of block-design mechanisms with weights `t`. `designs`
/// maps block size to design; when `None`, complete designs are used.
pub fn ubd_mechanism(
    part: &Partition,
    epsilon: f64,
    mixture: &Mixture,
    designs: Option<&BTreeMap<usize, BlockDesign>>,
) -> Result<Mechanism> {
    check_budget(epsilon)?;
    let v = part.v();
    check_mixture(mixture, v)?;
    let e1 = epsilon.exp_m1();
    let mut gamma = GammaWeights::new();
    for k in mixture.support() {
        let owned;
        let design = match designs {
            Some(map) => map.get(&k).ok_or(UldpError::MissingDesign(k))?,
            None => {
                owned = complete_design(v, k)?;
                &owned
            }
        };
        let p = design.params();
        if p.v != v || p.k != k {
            return Err(UldpError::Design(format!(
                "design for block size {k} has v = {}, k = {}",
                p.v, p.k
            )));
        }
        let g = mixture.weight(k) / (p.r as f64 * e1 + p.b as f64);
        for edge in design.edges() {
            gamma.add(edge.clone(), g);
        }
    }
    build_extremal(
        part,
        epsilon,
        &gamma,
        MechanismKind::Ubd { mixture: mixture.clone() },
    )
}

/// Streaming form of the complete-design mixture. It never materialises the
/// channel, so it works for any `v`.
pub fn ubd_streaming(part: &Partition, epsilon: f64, mixture: &Mixture) -> Result<Mechanism> {
    check_budget(epsilon)?;
    let v = part.v();
    check_mixture(mixture, v)?;
    let e = epsilon.exp();
    let denom = |k: usize| k as f64 * e + (v - k) as f64;
    let member_prob: Vec<f64> = (1..=v).map(|k| k as f64 * e / denom(k)).collect();
    let mut ns: Vec<f64> = (1..=v)
        .map(|k| mixture.weight(k) * v as f64 / denom(k))
        .collect();
    ns.push(invertible_mass(mixture, v, epsilon));
    let bad = |_| UldpError::Distribution("mixture has no positive weight".into());
    Ok(Mechanism {
        w: part.w(),
        v,
        epsilon,
        kind: MechanismKind::Ubd { mixture: mixture.clone() },
        backend: Backend::Streaming(Streaming {
            sensitive_class: WeightedIndex::new(mixture.as_slice()).map_err(bad)?,
            nonsensitive_class: WeightedIndex::new(&ns).map_err(bad)?,
            member_prob,
        }),
    })
}

fn check_mixture(mixture: &Mixture, v: usize) -> Result<()> {
    if mixture.v() != v {
        return Err(UldpError::Domain(format!(
            "mixture has {} entries, expected {v}",
            mixture.v()
        )));
    }
    Ok(())
}

/// Outcome of [`validate_uldp`].
#[derive(Debug, Clone, PartialEq)]
pub enum UldpReport {
    Valid,
    Invalid(UldpViolation),
}

impl UldpReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, UldpReport::Valid)
    }
}

/// First violated condition, with 0-based witnesses.
#[derive(Debug, Clone, PartialEq)]
pub enum UldpViolation {
    /// `Q(y | x) > e^ε Q(y | x')` for a protected `y`.
    Ratio { y: OutputSymbol, x: usize, x_prime: usize, ratio: f64 },
    /// An invertible output is reachable from a sensitive input, from more
    /// than one input, or from no input.
    Invertible { y: OutputSymbol, inputs: Vec<usize> },
    /// A row does not sum to one.
    Row { x: usize, sum: f64 },
}

impl fmt::Display for UldpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UldpViolation::Ratio { y, x, x_prime, ratio } => write!(
                f,
                "Q({y}|{}) / Q({y}|{}) = {ratio} exceeds e^eps",
                x + 1,
                x_prime + 1
            ),
            UldpViolation::Invertible { y, inputs } => {
                let inputs: Vec<usize> = inputs.iter().map(|x| x + 1).collect();
                write!(f, "invertible output {y} is reachable from inputs {inputs:?}")
            }
            UldpViolation::Row { x, sum } => write!(f, "row {} sums to {sum}", x + 1),
        }
    }
}

/// Checks the ULDP conditions: bounded likelihood ratios on protected
/// outputs, and invertible outputs reachable from exactly their own
/// non-sensitive input. Rows must also be stochastic.
pub fn validate_uldp(m: &Mechanism) -> UldpReport {
    let Backend::Dense(d) = &m.backend else {
        return UldpReport::Valid;
    };
    let ncol = d.outputs.len();
    let bound = m.epsilon.exp() * (1.0 + RATIO_SLACK);
    for (j, y) in d.outputs.iter().enumerate() {
        let col = (0..m.w).map(|x| d.matrix[x * ncol + j]);
        match y {
            OutputSymbol::Protected(_) => {
                let (mut hi, mut lo) = ((0, f64::NEG_INFINITY), (0, f64::INFINITY));
                for (x, q) in col.enumerate() {
                    if q > hi.1 {
                        hi = (x, q);
                    }
                    if q < lo.1 {
                        lo = (x, q);
                    }
                }
                if hi.1 > bound * lo.1 {
                    return UldpReport::Invalid(UldpViolation::Ratio {
                        y: y.clone(),
                        x: hi.0,
                        x_prime: lo.0,
                        ratio: hi.1 / lo.1,
                    });
                }
            }
            OutputSymbol::Invertible(label) => {
                let inputs: Vec<usize> = col
                    .enumerate()
                    .filter(|(_, q)| *q > 0.0)
                    .map(|(x, _)| x)
                    .collect();
                if inputs.len() != 1 || inputs[0] != *label || inputs[0] < m.v {
                    return UldpReport::Invalid(UldpViolation::Invertible {
                        y: y.clone(),
                        inputs,
                    });
                }
            }
        }
    }
    for (x, row) in d.matrix.chunks(ncol).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return UldpReport::Invalid(UldpViolation::Row { x, sum });
        }
    }
    UldpReport::Valid
}
