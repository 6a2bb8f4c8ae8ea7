//! Score vectors, Fisher information, and the score-based unbiased estimator
//! for block-design mixtures.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, UldpError};
use crate::mechanism::{Mechanism, OutputSymbol, Sampled};
use crate::put::Problem;
use crate::simplex::{
    check_unit, dot, p_alpha, project_subspace, DirectionBasis, Distribution, Mixture, Partition,
    Subspace,
};

/// `η(y) = Q(y | ·) / Q_P(y)`.
pub fn score_vector(m: &Mechanism, p: &Distribution, y: &OutputSymbol) -> Result<Vec<f64>> {
    check_len(m, p)?;
    let col = m.column(y);
    let qp = dot(&col, p.as_slice());
    if qp <= 0.0 {
        return Err(UldpError::UndefinedScore);
    }
    Ok(col.into_iter().map(|q| q / qp).collect())
}

fn check_len(m: &Mechanism, p: &Distribution) -> Result<()> {
    if p.len() != m.w() {
        return Err(UldpError::Domain(format!(
            "distribution has {} entries, mechanism has {}",
            p.len(),
            m.w()
        )));
    }
    Ok(())
}

/// Fisher information in the coordinates of a direction basis.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    basis: DirectionBasis,
    matrix: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &DirectionBasis {
        &self.basis
    }

    /// Diagonal block belonging to `sub`.
    pub fn block(&self, sub: Subspace) -> DMatrix<f64> {
        let r = self.basis.range(sub);
        self.matrix
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    pub fn block_trace(&self, sub: Subspace) -> f64 {
        self.block(sub).trace()
    }

    /// `tr(J⁻¹)`, infinite when `J` is singular.
    pub fn trace_inverse(&self) -> f64 {
        match self.matrix.clone().cholesky() {
            Some(c) => c.inverse().trace(),
            None => f64::INFINITY,
        }
    }
}

/// `J = Cov_{Y ~ Q_P}[⟨η(Y), h_i⟩]` over the basis vectors `h_i`.
pub fn fisher_information(
    m: &Mechanism,
    p: &Distribution,
    basis: &DirectionBasis,
) -> Result<FisherMatrix> {
    check_len(m, p)?;
    let outputs = m.outputs().ok_or(UldpError::Unsupported("Fisher information"))?;
    if basis.partition().w() != m.w() {
        return Err(UldpError::Domain("basis does not match mechanism".into()));
    }
    let d = basis.vectors().len();
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut first = vec![0.0; d];
    for y in outputs {
        let col = m.column(y);
        let qp = dot(&col, p.as_slice());
        if qp <= 0.0 {
            continue;
        }
        let s: Vec<f64> = basis.vectors().iter().map(|h| dot(&col, h) / qp).collect();
        for i in 0..d {
            first[i] += qp * s[i];
            for j in 0..=i {
                second[(i, j)] += qp * s[i] * s[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let c = second[(i, j)] - first[i] * first[j];
            second[(i, j)] = c;
            second[(j, i)] = c;
        }
    }
    Ok(FisherMatrix {
        basis: basis.clone(),
        matrix: second,
    })
}

/// Mixture weights `t(Q)` read off a non-sensitive row of an extremal
/// mechanism: `t_k = Σ_{|y|=k} γ(y)(k e^ε + v - k) / v`.
pub fn induced_mixture(m: &Mechanism) -> Result<Vec<f64>> {
    let part = m
        .partition()
        .ok_or_else(|| UldpError::Domain("mechanism has no non-sensitive symbols".into()))?;
    let (v, e) = (part.v(), m.epsilon().exp());
    let outputs = m.outputs().ok_or(UldpError::Unsupported("induced mixture"))?;
    let row = m.row(v).expect("dense");
    let mut t = vec![0.0; v];
    for (y, &g) in outputs.iter().zip(row) {
        if let OutputSymbol::Protected(s) = y {
            let k = s.len();
            t[k - 1] += g * (k as f64 * e + (v - k) as f64) / v as f64;
        }
    }
    Ok(t)
}

/// `|tr(B_i) - d_i² / M_i(α, t(Q))|` for the three diagonal blocks of the
/// Fisher matrix at `P^(α)`, for an extremal mechanism.
pub fn block_trace_check(m: &Mechanism, alpha: f64) -> Result<[f64; 3]> {
    check_unit(alpha, "alpha")?;
    let part = m
        .partition()
        .ok_or_else(|| UldpError::Domain("mechanism has no non-sensitive symbols".into()))?;
    let t = induced_mixture(m)?;
    let obj = Problem::new(part.w(), part.v(), m.epsilon())?.objective(alpha, &t)?;
    let p = p_alpha(&part, alpha)?;
    let basis = DirectionBasis::helmert(&part);
    let j = fisher_information(m, &p, &basis)?;
    let mi = [obj.m1, obj.m2, obj.m3];
    let mut out = [0.0; 3];
    for (i, sub) in Subspace::ALL.into_iter().enumerate() {
        let d = sub.dim(&part) as f64;
        let expect = if d == 0.0 { 0.0 } else { d * d / mi[i] };
        out[i] = (j.block_trace(sub) - expect).abs();
    }
    Ok(out)
}

fn ubd_setup(m: &Mechanism) -> Result<(Partition, Mixture)> {
    let part = m
        .partition()
        .ok_or_else(|| UldpError::Domain("mechanism has no non-sensitive symbols".into()))?;
    let t = m
        .mixture()
        .ok_or_else(|| UldpError::Domain("mechanism is not a block-design mixture".into()))?;
    Ok((part, t.clone()))
}

/// Largest deviation of `E_{Y ~ Q_P}[Π_i η(Y)]` from
/// `Π_i(P - P^(α)) d_i / M_i(α, t)`, per subspace. Needs `α ∈ (0, 1)` and a
/// dense mixture mechanism.
pub fn score_linearity_residual(m: &Mechanism, alpha: f64, p: &Distribution) -> Result<[f64; 3]> {
    let (part, t) = ubd_setup(m)?;
    check_open_alpha(alpha)?;
    check_len(m, p)?;
    let outputs = m.outputs().ok_or(UldpError::Unsupported("score residual"))?;
    let pa = p_alpha(&part, alpha)?;
    let obj = Problem::new(part.w(), part.v(), m.epsilon())?.objective(alpha, t.as_slice())?;
    let mi = [obj.m1, obj.m2, obj.m3];
    let w = part.w();
    let mut mean = vec![vec![0.0; w]; 3];
    for y in outputs {
        let col = m.column(y);
        let qp = dot(&col, p.as_slice());
        if qp == 0.0 {
            continue;
        }
        let eta = score_vector(m, &pa, y)?;
        for (i, sub) in Subspace::ALL.into_iter().enumerate() {
            let proj = project_subspace(&part, &eta, sub)?;
            for x in 0..w {
                mean[i][x] += qp * proj[x];
            }
        }
    }
    let diff: Vec<f64> = (0..w).map(|x| p[x] - pa[x]).collect();
    let mut out = [0.0; 3];
    for (i, sub) in Subspace::ALL.into_iter().enumerate() {
        let d = sub.dim(&part) as f64;
        let proj = project_subspace(&part, &diff, sub)?;
        let scale = if d == 0.0 { 0.0 } else { d / mi[i] };
        out[i] = (0..w)
            .map(|x| (mean[i][x] - proj[x] * scale).abs())
            .fold(0.0, f64::max);
    }
    Ok(out)
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(UldpError::Domain(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// Single-report estimate `P^(α) + Σ_i (M_i / d_i) Π_i η(y)`, evaluated
/// directly from the channel. Needs `α ∈ (0, 1)`.
pub fn score_estimate(m: &Mechanism, alpha: f64, y: &OutputSymbol) -> Result<Vec<f64>> {
    let (part, t) = ubd_setup(m)?;
    check_open_alpha(alpha)?;
    let pa = p_alpha(&part, alpha)?;
    let obj = Problem::new(part.w(), part.v(), m.epsilon())?.objective(alpha, t.as_slice())?;
    if !obj.m1.is_finite() {
        return Err(UldpError::EstimatorDegenerate);
    }
    let mi = [obj.m1, obj.m2, obj.m3];
    let eta = score_vector(m, &pa, y)?;
    let mut out = pa.into_vec();
    for (i, sub) in Subspace::ALL.into_iter().enumerate() {
        let d = sub.dim(&part);
        if d == 0 {
            continue;
        }
        let proj = project_subspace(&part, &eta, sub)?;
        let c = mi[i] / d as f64;
        for (o, p) in out.iter_mut().zip(proj) {
            *o += c * p;
        }
    }
    Ok(out)
}

/// Closed-form per-report estimates of the score-based estimator for a
/// block-design mixture, valid for every `α ∈ [0, 1]`.
///
/// Entries depend only on the output class: protected outputs by their size
/// and whether they contain the coordinate, invertible outputs by whether
/// they name the coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorTable {
    #[serde(skip)]
    part: Partition,
    epsilon: f64,
    alpha: f64,
    t: Vec<f64>,
    /// Sensitive coordinate inside a protected output of size `k` (index `k - 1`).
    pub member: Vec<f64>,
    /// Sensitive coordinate outside a protected output of size `k`.
    pub nonmember: Vec<f64>,
    /// Non-sensitive coordinate for a protected output of size `k`.
    pub nonsensitive: Vec<f64>,
    /// Sensitive coordinate for any invertible output.
    pub invertible_sensitive: f64,
    /// Non-sensitive coordinate named by the invertible output.
    pub invertible_hit: f64,
    /// Non-sensitive coordinate not named by the invertible output.
    pub invertible_miss: f64,
}

impl EstimatorTable {
    pub fn new(part: &Partition, epsilon: f64, alpha: f64, mixture: &Mixture) -> Result<Self> {
        check_unit(alpha, "alpha")?;
        let (w, v) = (part.w(), part.v());
        let problem = Problem::new(w, v, epsilon)?;
        let t = mixture.as_slice();
        let obj = problem.objective(alpha, t)?;
        if !obj.m1.is_finite() {
            return Err(UldpError::EstimatorDegenerate);
        }
        let s = problem.sums(alpha, t);
        let (wf, vf, nf) = (w as f64, v as f64, (w - v) as f64);
        let e1 = epsilon.exp_m1();
        let c1 = if v >= 2 { obj.m1 / (vf - 1.0) } else { 0.0 };
        let c3 = obj.m3;
        let (mut member, mut nonmember, mut nonsensitive) = (vec![], vec![], vec![]);
        for k in 1..=v {
            let kf = k as f64;
            let a = alpha * kf * e1 + vf;
            let mass = c3 * kf * nf * e1 / (wf * a);
            member.push(alpha / vf + c1 * (vf - kf) * e1 / a + mass);
            nonmember.push(alpha / vf - c1 * kf * e1 / a + mass);
            nonsensitive.push((1.0 - alpha) / nf - c3 * vf * kf * e1 / (wf * a));
        }
        let r2 = 1.0 / (nf * e1 * s[1]);
        let r3 = 1.0 / (e1 * s[2]);
        Ok(Self {
            part: *part,
            epsilon,
            alpha,
            t: t.to_vec(),
            member,
            nonmember,
            nonsensitive,
            invertible_sensitive: alpha / vf - r3 / vf,
            invertible_hit: (1.0 - alpha) / nf + (nf - 1.0) * r2 + r3 / nf,
            invertible_miss: (1.0 - alpha) / nf - r2 + r3 / nf,
        })
    }

    /// Table for a mixture mechanism at the given `α`.
    pub fn for_mechanism(m: &Mechanism, alpha: f64) -> Result<Self> {
        let (part, t) = ubd_setup(m)?;
        Self::new(&part, m.epsilon(), alpha, &t)
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mixture(&self) -> &[f64] {
        &self.t
    }

    /// Whether `m` is the mixture this table was built for.
    pub fn matches(&self, m: &Mechanism) -> bool {
        m.w() == self.part.w()
            && m.v() == self.part.v()
            && m.epsilon() == self.epsilon
            && m.mixture()
                .is_some_and(|t| t.as_slice().iter().zip(&self.t).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    /// Estimate from a single report.
    pub fn estimate_output(&self, y: &OutputSymbol) -> Vec<f64> {
        let (w, v) = (self.part.w(), self.part.v());
        match y {
            OutputSymbol::Protected(s) => {
                let k = s.len() - 1;
                (0..w)
                    .map(|x| {
                        if x >= v {
                            self.nonsensitive[k]
                        } else if y.contains(x) {
                            self.member[k]
                        } else {
                            self.nonmember[k]
                        }
                    })
                    .collect()
            }
            OutputSymbol::Invertible(x0) => (0..w)
                .map(|x| {
                    if x < v {
                        self.invertible_sensitive
                    } else if x == *x0 {
                        self.invertible_hit
                    } else {
                        self.invertible_miss
                    }
                })
                .collect(),
        }
    }

    /// Average of single-report estimates, from sufficient statistics.
    pub fn estimate(&self, stats: &SufficientStats) -> Result<Vec<f64>> {
        let (w, v) = (self.part.w(), self.part.v());
        if stats.w != w || stats.v != v {
            return Err(UldpError::StatsMismatch(format!(
                "statistics are for (w, v) = ({}, {}), estimator for ({w}, {v})",
                stats.w, stats.v
            )));
        }
        if stats.n == 0 {
            return Err(UldpError::EmptySample);
        }
        let n = stats.n as f64;
        let inv_total: u64 = stats.invertible.iter().sum();
        let mut out = vec![0.0; w];
        let mut protected_ns = 0.0;
        for k in 0..v {
            protected_ns += stats.size[k] as f64 * self.nonsensitive[k];
        }
        for (x, o) in out.iter_mut().enumerate().take(v) {
            let mut acc = inv_total as f64 * self.invertible_sensitive;
            for k in 0..v {
                let hit = stats.member[k * v + x];
                acc += hit as f64 * self.member[k] + (stats.size[k] - hit) as f64 * self.nonmember[k];
            }
            *o = acc / n;
        }
        for x in v..w {
            let hit = stats.invertible[x - v];
            out[x] = (protected_ns
                + hit as f64 * self.invertible_hit
                + (inv_total - hit) as f64 * self.invertible_miss)
                / n;
        }
        Ok(out)
    }
}

/// Counts from which the estimator is computed in `O(w + v²)` memory:
/// protected outputs per size, per-symbol membership per size, and
/// invertible outputs per symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SufficientStats {
    w: usize,
    v: usize,
    n: u64,
    size: Vec<u64>,
    member: Vec<u64>,
    invertible: Vec<u64>,
}

impl SufficientStats {
    pub fn new(part: &Partition) -> Self {
        let (w, v) = (part.w(), part.v());
        Self {
            w,
            v,
            n: 0,
            size: vec![0; v],
            member: vec![0; v * v],
            invertible: vec![0; w - v],
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Records a protected output given as a subset of `0..v`.
    pub fn record_protected(&mut self, subset: &[usize]) {
        let k = subset.len() - 1;
        self.n += 1;
        self.size[k] += 1;
        for &x in subset {
            self.member[k * self.v + x] += 1;
        }
    }

    /// Records an invertible output naming non-sensitive symbol `x`.
    pub fn record_invertible(&mut self, x: usize) {
        self.n += 1;
        self.invertible[x - self.v] += 1;
    }

    pub fn record(&mut self, y: &OutputSymbol) {
        match y {
            OutputSymbol::Protected(s) => self.record_protected(s),
            OutputSymbol::Invertible(x) => self.record_invertible(*x),
        }
    }

    /// Records the result of [`Mechanism::sample_into`].
    pub fn record_sampled(&mut self, sampled: Sampled, buf: &[usize]) {
        match sampled {
            Sampled::Protected => self.record_protected(buf),
            Sampled::Invertible(x) => self.record_invertible(x),
        }
    }

    pub fn merge(&mut self, other: &SufficientStats) -> Result<()> {
        if (self.w, self.v) != (other.w, other.v) {
            return Err(UldpError::StatsMismatch("cannot merge different domains".into()));
        }
        self.n += other.n;
        for (a, b) in self.size.iter_mut().zip(&other.size) {
            *a += b;
        }
        for (a, b) in self.member.iter_mut().zip(&other.member) {
            *a += b;
        }
        for (a, b) in self.invertible.iter_mut().zip(&other.invertible) {
            *a += b;
        }
        Ok(())
    }

    /// Writes non-zero counts as CSV rows `kind,k,symbol,count` with 1-based
    /// symbols.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["kind", "k", "symbol", "count"])?;
        let v = self.v;
        for k in 0..v {
            if self.size[k] > 0 {
                wr.write_record(["size", &(k + 1).to_string(), "", &self.size[k].to_string()])?;
            }
            for x in 0..v {
                let c = self.member[k * v + x];
                if c > 0 {
                    wr.write_record([
                        "member",
                        &(k + 1).to_string(),
                        &(x + 1).to_string(),
                        &c.to_string(),
                    ])?;
                }
            }
        }
        for (i, &c) in self.invertible.iter().enumerate() {
            if c > 0 {
                wr.write_record(["invertible", "", &(v + i + 1).to_string(), &c.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}
