//! Probability vectors on `[w]`, the sensitive/non-sensitive split, and the
//! orthogonal direction basis used by the Fisher-information routines.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UldpError};

const SUM_TOL: f64 = 1e-12;
const MIXTURE_SUM_TOL: f64 = 1e-9;

/// Split of the alphabet `0..w` into sensitive symbols `0..v` and
/// non-sensitive symbols `v..w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    w: usize,
    v: usize,
}

impl Partition {
    pub fn new(w: usize, v: usize) -> Result<Self> {
        if v < 1 {
            return Err(UldpError::Domain("v >= 1 required".into()));
        }
        if v >= w {
            return Err(UldpError::Domain(format!(
                "v < w required, got w = {w}, v = {v}"
            )));
        }
        Ok(Self { w, v })
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn v(&self) -> usize {
        self.v
    }

    /// Number of non-sensitive symbols.
    pub fn n_nonsensitive(&self) -> usize {
        self.w - self.v
    }

    pub fn is_sensitive(&self, x: usize) -> bool {
        x < self.v
    }
}

/// A probability vector on `0..w` with `w >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates and renormalises. Entries must be finite and non-negative and
    /// sum to one within `1e-12`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(UldpError::Distribution(format!(
                "need at least 2 symbols, got {}",
                p.len()
            )));
        }
        normalise(p, SUM_TOL).map(Self)
    }

    pub fn uniform(w: usize) -> Result<Self> {
        Self::new(vec![1.0 / w as f64; w])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total mass on the sensitive block.
    pub fn sensitive_mass(&self, part: &Partition) -> f64 {
        self.0[..part.v()].iter().sum()
    }

    /// Sum of squared entries.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mixture weights `t` over block sizes `1..=v`; entry `k - 1` is `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture(Vec<f64>);

impl Mixture {
    /// Validates and renormalises. The sum must be one within `1e-9`.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(UldpError::Distribution("empty mixture".into()));
        }
        normalise(t, MIXTURE_SUM_TOL).map(Self)
    }

    /// Point mass on block size `k` (1-based).
    pub fn vertex(v: usize, k: usize) -> Result<Self> {
        if k < 1 || k > v {
            return Err(UldpError::Domain(format!("block size {k} outside 1..={v}")));
        }
        let mut t = vec![0.0; v];
        t[k - 1] = 1.0;
        Ok(Self(t))
    }

    pub fn uniform(v: usize) -> Result<Self> {
        Self::new(vec![1.0 / v as f64; v])
    }

    /// Number of block sizes, which equals `v`.
    pub fn v(&self) -> usize {
        self.0.len()
    }

    /// Weight on block size `k` (1-based).
    pub fn weight(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Block sizes with positive weight, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0)
            .map(|(i, _)| i + 1)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn normalise(mut p: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    if let Some((i, x)) = p
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < 0.0)
    {
        return Err(UldpError::Distribution(format!(
            "entry {} is {x}",
            i + 1
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(UldpError::Distribution(format!("entries sum to {s}")));
    }
    for x in &mut p {
        *x /= s;
    }
    Ok(p)
}

/// `P^(α)`: mass `α` spread uniformly on the sensitive block and `1 - α`
/// uniformly on the non-sensitive block.
pub fn p_alpha(part: &Partition, alpha: f64) -> Result<Distribution> {
    check_unit(alpha, "alpha")?;
    let (w, v) = (part.w(), part.v());
    let mut p = vec![alpha / v as f64; v];
    p.resize(w, (1.0 - alpha) / (w - v) as f64);
    Ok(Distribution(p))
}

pub(crate) fn check_unit(x: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(UldpError::Domain(format!("{name} = {x} is outside [0, 1]")))
    }
}

/// The three mutually orthogonal subspaces of the direction space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subspace {
    /// Zero-sum vectors supported on the sensitive block.
    Sensitive,
    /// Zero-sum vectors supported on the non-sensitive block.
    NonSensitive,
    /// The line moving mass between the two blocks.
    Mass,
}

impl Subspace {
    pub const ALL: [Subspace; 3] = [Subspace::Sensitive, Subspace::NonSensitive, Subspace::Mass];

    /// Dimension of the subspace.
    pub fn dim(self, part: &Partition) -> usize {
        match self {
            Subspace::Sensitive => part.v() - 1,
            Subspace::NonSensitive => part.n_nonsensitive() - 1,
            Subspace::Mass => 1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Subspace::Sensitive => 1,
            Subspace::NonSensitive => 2,
            Subspace::Mass => 3,
        }
    }
}

impl TryFrom<usize> for Subspace {
    type Error = UldpError;

    fn try_from(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Subspace::Sensitive),
            2 => Ok(Subspace::NonSensitive),
            3 => Ok(Subspace::Mass),
            _ => Err(UldpError::Domain(format!("subspace index {i} not in 1..=3"))),
        }
    }
}

/// Orthogonal projection of `h` onto one of the three subspaces.
pub fn project_subspace(part: &Partition, h: &[f64], sub: Subspace) -> Result<Vec<f64>> {
    let (w, v) = (part.w(), part.v());
    if h.len() != w {
        return Err(UldpError::Domain(format!(
            "vector has length {}, expected {w}",
            h.len()
        )));
    }
    let mut out = vec![0.0; w];
    match sub {
        Subspace::Sensitive => {
            let mean = h[..v].iter().sum::<f64>() / v as f64;
            for x in 0..v {
                out[x] = h[x] - mean;
            }
        }
        Subspace::NonSensitive => {
            let mean = h[v..].iter().sum::<f64>() / (w - v) as f64;
            for x in v..w {
                out[x] = h[x] - mean;
            }
        }
        Subspace::Mass => {
            let (a, b) = ((w - v) as f64, v as f64);
            let dot = a * h[..v].iter().sum::<f64>() - b * h[v..].iter().sum::<f64>();
            let c = dot / (v as f64 * (w - v) as f64 * w as f64);
            for (x, o) in out.iter_mut().enumerate() {
                *o = if x < v { c * a } else { -c * b };
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of the zero-sum hyperplane in `R^w`, ordered as
/// `v - 1` sensitive vectors, `w - v - 1` non-sensitive vectors, then the
/// mass direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBasis {
    part: Partition,
    vectors: Vec<Vec<f64>>,
}

impl DirectionBasis {
    /// Helmert contrasts within each block plus the normalised mass direction.
    pub fn helmert(part: &Partition) -> Self {
        let (w, v) = (part.w(), part.v());
        let mut vectors = Vec::with_capacity(w - 1);
        helmert_block(w, 0, v, &mut vectors);
        helmert_block(w, v, w, &mut vectors);
        let norm = (v as f64 * (w - v) as f64 * w as f64).sqrt();
        vectors.push(
            (0..w)
                .map(|x| if x < v { (w - v) as f64 } else { -(v as f64) } / norm)
                .collect(),
        );
        Self {
            part: *part,
            vectors,
        }
    }

    /// Builds a basis from explicit vectors. Each vector must lie in the
    /// stated subspace, and the whole set must be orthonormal to within `tol`.
    pub fn from_blocks(
        part: &Partition,
        sensitive: Vec<Vec<f64>>,
        nonsensitive: Vec<Vec<f64>>,
        mass: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        let mut vectors = sensitive;
        vectors.extend(nonsensitive);
        vectors.push(mass);
        let basis = Self {
            part: *part,
            vectors,
        };
        for sub in Subspace::ALL {
            if basis.range(sub).len() != sub.dim(part) {
                return Err(UldpError::Domain(format!(
                    "subspace {} needs {} vectors",
                    sub.index(),
                    sub.dim(part)
                )));
            }
            for i in basis.range(sub) {
                let h = &basis.vectors[i];
                let p = project_subspace(part, h, sub)?;
                let off: f64 = h.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                if off > tol {
                    return Err(UldpError::Domain(format!(
                        "basis vector {} is not inside subspace {}",
                        i + 1,
                        sub.index()
                    )));
                }
            }
        }
        for i in 0..basis.vectors.len() {
            for j in 0..=i {
                let d: f64 = dot(&basis.vectors[i], &basis.vectors[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                if (d - target).abs() > tol {
                    return Err(UldpError::Domain(format!(
                        "basis vectors {} and {} are not orthonormal",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(basis)
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Indices of the basis vectors spanning `sub`.
    pub fn range(&self, sub: Subspace) -> std::ops::Range<usize> {
        let d1 = Subspace::Sensitive.dim(&self.part);
        let d2 = Subspace::NonSensitive.dim(&self.part);
        match sub {
            Subspace::Sensitive => 0..d1,
            Subspace::NonSensitive => d1..d1 + d2,
            Subspace::Mass => d1 + d2..d1 + d2 + 1,
        }
    }
}

fn helmert_block(w: usize, lo: usize, hi: usize, out: &mut Vec<Vec<f64>>) {
    for j in 1..hi - lo {
        let norm = ((j * (j + 1)) as f64).sqrt();
        let mut h = vec![0.0; w];
        for x in lo..lo + j {
            h[x] = 1.0 / norm;
        }
        h[lo + j] = -(j as f64) / norm;
        out.push(h);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
