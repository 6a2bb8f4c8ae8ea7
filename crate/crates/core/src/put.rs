//! Worst-case asymptotic error of block-design mixtures and the minimax
//! problem `sup_α inf_t M(α, t)` that gives the optimal privacy-utility
//! tradeoff.
//!
//! Block sizes are 1-based (`k ∈ 1..=v`); slices of mixture weights store
//! `t_k` at index `k - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_budget, Result, UldpError};
use crate::simplex::{check_unit, Distribution, Mixture, Partition};

const GOLDEN_TOL: f64 = 1e-8;
const FW_GAP_TOL: f64 = 1e-10;
const FW_MAX_ITER: usize = 100_000;
const ZERO_CUTOFF: f64 = 1e-8;
const CERT_TOL: f64 = 1e-6;
const CERT_ALPHA_POINTS: usize = 21;
const CERT_SEED: u64 = 0x5eed_0f_ce27;

/// The three terms of `M(α, t)` and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub total: f64,
}

/// Result of minimising `M(α, ·)` over the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerSolution {
    pub t: Vec<f64>,
    pub value: f64,
    /// Frank–Wolfe duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Numerical,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::ClosedForm => "closed_form",
            SolveMethod::Numerical => "numerical",
        })
    }
}

/// A saddle point `(α*, t*)` with its value `M*` and a numerical certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleSolution {
    pub alpha_star: f64,
    pub t_star: Vec<f64>,
    pub value: f64,
    pub method: SolveMethod,
    /// Largest relative violation of the saddle inequalities on a probe grid.
    pub certificate: f64,
}

/// Boundaries of the regime without a known closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeThresholds {
    pub eps_low: f64,
    pub eps_high: f64,
}

/// Optimal LDP block sizes and the optimal LDP error on `v` symbols.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpOptimum {
    pub k_star: Vec<usize>,
    pub value: f64,
}

/// A `(w, v, ε)` instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    part: Partition,
    epsilon: f64,
}

/// Per-α constants: `M_i = C_i / S_i` with `S_i = Σ_k t_k u_{i,k}`.
struct Coeffs {
    c: [f64; 3],
    u: [Vec<f64>; 3],
}

impl Coeffs {
    fn sums(&self, t: &[f64]) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (k, &tk) in t.iter().enumerate() {
            if tk != 0.0 {
                for i in 0..3 {
                    s[i] += tk * self.u[i][k];
                }
            }
        }
        s
    }

    fn value(&self, s: &[f64; 3]) -> f64 {
        (0..3).map(|i| term(self.c[i], s[i])).sum()
    }

    fn vertex_value(&self, k: usize) -> f64 {
        (0..3).map(|i| term(self.c[i], self.u[i][k])).sum()
    }
}

fn term(c: f64, s: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if s <= 0.0 {
        f64::INFINITY
    } else {
        c / s
    }
}

impl Problem {
    pub fn new(w: usize, v: usize, epsilon: f64) -> Result<Self> {
        check_budget(epsilon)?;
        Ok(Self {
            part: Partition::new(w, v)?,
            epsilon,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn w(&self) -> usize {
        self.part.w()
    }

    pub fn v(&self) -> usize {
        self.part.v()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn coeffs(&self, alpha: f64) -> Coeffs {
        let (w, v) = (self.w() as f64, self.v() as f64);
        let e1 = self.epsilon.exp_m1();
        let c1 = if self.v() >= 2 {
            (v - 1.0).powi(2) / (v * e1 * e1)
        } else {
            0.0
        };
        let c2 = (w - v - 1.0) * (1.0 - alpha) / ((w - v) * e1);
        let c3 = w * (1.0 - alpha) / (v * (w - v) * e1);
        let mut u = [Vec::new(), Vec::new(), Vec::new()];
        for k in 1..=self.v() {
            let kf = k as f64;
            let b = kf * e1 + v;
            let a = alpha * kf * e1 + v;
            u[0].push(kf * (v - kf) / (a * b));
            u[1].push(kf / b);
            u[2].push(kf / a);
        }
        Coeffs { c: [c1, c2, c3], u }
    }

    fn check_t(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.v() {
            return Err(UldpError::Domain(format!(
                "mixture has {} entries, expected {}",
                t.len(),
                self.v()
            )));
        }
        Mixture::new(t.to_vec()).map(|_| ())
    }

    /// `M(α, t) = M₁ + M₂ + M₃`. `M₁` is infinite when all weight sits on
    /// block size `v ≥ 2`.
    pub fn objective(&self, alpha: f64, t: &[f64]) -> Result<ObjectiveValue> {
        check_unit(alpha, "alpha")?;
        self.check_t(t)?;
        Ok(self.objective_unchecked(alpha, t))
    }

    fn objective_unchecked(&self, alpha: f64, t: &[f64]) -> ObjectiveValue {
        let co = self.coeffs(alpha);
        let s = co.sums(t);
        let m = [term(co.c[0], s[0]), term(co.c[1], s[1]), term(co.c[2], s[2])];
        ObjectiveValue {
            m1: m[0],
            m2: m[1],
            m3: m[2],
            total: m[0] + m[1] + m[2],
        }
    }

    /// `(S₁, S₂, S₃)` with `M_i = C_i / S_i`.
    pub(crate) fn sums(&self, alpha: f64, t: &[f64]) -> [f64; 3] {
        self.coeffs(alpha).sums(t)
    }

    fn value(&self, alpha: f64, t: &[f64]) -> f64 {
        self.objective_unchecked(alpha, t).total
    }

    /// `∂M/∂α`. When `M₁` is infinite it is constant in `α` and contributes
    /// nothing.
    pub fn objective_dalpha(&self, alpha: f64, t: &[f64]) -> Result<f64> {
        check_unit(alpha, "alpha")?;
        self.check_t(t)?;
        let (w, v) = (self.w() as f64, self.v() as f64);
        let e1 = self.epsilon.exp_m1();
        let co = self.coeffs(alpha);
        let s = co.sums(t);
        let (mut ds1, mut ds3) = (0.0, 0.0);
        for (k, &tk) in t.iter().enumerate() {
            let kf = (k + 1) as f64;
            let a = alpha * kf * e1 + v;
            let b = kf * e1 + v;
            ds1 -= tk * kf * (v - kf) * kf * e1 / (a * a * b);
            ds3 -= tk * kf * kf * e1 / (a * a);
        }
        let mut d = 0.0;
        if co.c[0] > 0.0 && s[0] > 0.0 {
            d -= co.c[0] * ds1 / (s[0] * s[0]);
        }
        let c2 = (w - v - 1.0) / ((w - v) * e1);
        let c3 = w / (v * (w - v) * e1);
        d -= c2 / s[1];
        d -= c3 / s[2] + c3 * (1.0 - alpha) * ds3 / (s[2] * s[2]);
        Ok(d)
    }

    /// `∂M/∂t_k` for each block size (infinite entries when `M₁` is).
    pub fn objective_grad_t(&self, alpha: f64, t: &[f64]) -> Result<Vec<f64>> {
        check_unit(alpha, "alpha")?;
        self.check_t(t)?;
        let co = self.coeffs(alpha);
        let s = co.sums(t);
        Ok(grad(&co, &s))
    }

    /// Minimises `M(α, ·)` over the simplex by pairwise Frank–Wolfe with an
    /// exact line search, starting from the best vertex.
    pub fn inner_min(&self, alpha: f64) -> Result<InnerSolution> {
        check_unit(alpha, "alpha")?;
        Ok(self.inner_min_unchecked(alpha))
    }

    fn inner_min_unchecked(&self, alpha: f64) -> InnerSolution {
        let v = self.v();
        let co = self.coeffs(alpha);
        let start = (0..v)
            .min_by(|&a, &b| co.vertex_value(a).total_cmp(&co.vertex_value(b)))
            .expect("v >= 1");
        let mut t = vec![0.0; v];
        t[start] = 1.0;
        let mut s = co.sums(&t);
        let mut value = co.value(&s);
        let mut gap = 0.0;
        let mut iterations = 0;
        while iterations < FW_MAX_ITER {
            iterations += 1;
            let g = grad(&co, &s);
            let toward = argmin(&g);
            let away = (0..v)
                .filter(|&k| t[k] > 0.0)
                .max_by(|&a, &b| g[a].total_cmp(&g[b]))
                .expect("t has support");
            gap = (0..v).map(|k| t[k] * g[k]).sum::<f64>() - g[toward];
            if gap <= FW_GAP_TOL * value || toward == away {
                break;
            }
            let delta: [f64; 3] =
                std::array::from_fn(|i| co.u[i][toward] - co.u[i][away]);
            let max_step = t[away];
            let step = line_search(&co, &s, &delta, max_step);
            if step <= 0.0 {
                break;
            }
            if step >= max_step {
                t[toward] += t[away];
                t[away] = 0.0;
            } else {
                t[toward] += step;
                t[away] -= step;
            }
            s = co.sums(&t);
            let next = co.value(&s);
            let stalled = next > value;
            value = next;
            if stalled {
                break;
            }
        }
        InnerSolution {
            t,
            value,
            gap,
            iterations,
        }
    }

    /// Numerical saddle point: golden-section search of the concave function
    /// `α ↦ inf_t M(α, t)`, then the inner minimiser at `α*`. Weights below
    /// `1e-8` are zeroed. When a closed form applies, the two must agree.
    pub fn saddle_solve(&self) -> Result<SaddleSolution> {
        let g = |a: f64| self.inner_min_unchecked(a).value;
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (g(x1), g(x2));
        while hi - lo > GOLDEN_TOL {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = g(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = g(x1);
            }
        }
        let mut alpha = 0.5 * (lo + hi);
        let mut best = g(alpha);
        for end in [0.0, 1.0] {
            let ge = g(end);
            if ge > best {
                best = ge;
                alpha = end;
            }
        }
        let mut t = cleaned(self.inner_min_unchecked(alpha).t);
        let mut certificate = self.certificate(alpha, &t)?;
        if certificate > CERT_TOL {
            // the inner minimiser is not unique at α*; pick from the face
            if let Some((tr, cr)) = self.tie_break(alpha) {
                if cr < certificate {
                    (t, certificate) = (tr, cr);
                }
            }
        }
        let value = self.value(alpha, &t);
        if !value.is_finite() {
            return Err(UldpError::SolverFailure(format!(
                "saddle value is not finite at alpha = {alpha}"
            )));
        }
        if certificate > CERT_TOL {
            return Err(UldpError::SolverFailure(format!(
                "saddle certificate {certificate:e} exceeds {CERT_TOL:e} (alpha = {alpha}, value = {value})"
            )));
        }
        if let Some(cf) = self.closed_form() {
            let rel = (cf.value - value).abs() / cf.value.abs().max(f64::MIN_POSITIVE);
            if rel > CERT_TOL {
                return Err(UldpError::SolverFailure(format!(
                    "numerical value {value} disagrees with closed form {}",
                    cf.value
                )));
            }
        }
        Ok(SaddleSolution {
            alpha_star: alpha,
            t_star: t,
            value,
            method: SolveMethod::Numerical,
            certificate,
        })
    }

    /// When several `t` minimise `M(α*, ·)`, the saddle partner is the one
    /// with `∂M/∂α` balanced at `α*`. Minimisers just left and right of `α*`
    /// bracket it; mix them by bisection on the sign of `∂M/∂α`.
    fn tie_break(&self, alpha: f64) -> Option<(Vec<f64>, f64)> {
        const STEP: f64 = 1e-6;
        let left = (alpha > 0.0).then(|| cleaned(self.inner_min_unchecked(alpha - STEP).t));
        let right = (alpha < 1.0).then(|| cleaned(self.inner_min_unchecked(alpha + STEP).t));
        let mut candidates: Vec<Vec<f64>> = left.iter().chain(&right).cloned().collect();
        if let (Some(l), Some(r)) = (&left, &right) {
            let mix = |lam: f64| -> Vec<f64> {
                l.iter().zip(r).map(|(a, b)| lam * a + (1.0 - lam) * b).collect()
            };
            let slope = |lam: f64| self.objective_dalpha(alpha, &mix(lam)).unwrap_or(f64::NAN);
            // left minimisers have the larger slope
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            if slope(lo) <= 0.0 && slope(hi) >= 0.0 {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if slope(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                candidates.push(cleaned(mix(0.5 * (lo + hi))));
            }
        }
        candidates
            .into_iter()
            .filter_map(|t| Some((self.certificate(alpha, &t).ok()?, t)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(c, t)| (t, c))
    }

    /// Closed form when available, otherwise [`Problem::saddle_solve`].
    pub fn solve(&self) -> Result<SaddleSolution> {
        match self.closed_form() {
            Some(s) => Ok(s),
            None => self.saddle_solve(),
        }
    }

    /// Closed-form saddle point in the low- and high-budget regimes.
    pub fn closed_form(&self) -> Option<SaddleSolution> {
        let (w, v, eps) = (self.w(), self.v(), self.epsilon);
        let e1 = eps.exp_m1();
        let case_a = v == 1
            || eps >= eps_high(w, v)
            || (v == 2 && eps <= eps_low(w, v));
        let (alpha, k) = if case_a {
            let a = v as f64 * (e1 - (w - v) as f64) / (w as f64 * e1);
            (a.clamp(0.0, 1.0), 1)
        } else if v >= 4 && eps <= bd_threshold(v, 1) {
            let k = ldp_k_star(v, eps).into_iter().find(|&k| k >= 2 && k < v)?;
            (1.0, k)
        } else {
            return None;
        };
        let t = Mixture::vertex(v, k).ok()?.into_vec();
        let value = self.value(alpha, &t);
        let certificate = self.certificate(alpha, &t).ok()?;
        Some(SaddleSolution {
            alpha_star: alpha,
            t_star: t,
            value,
            method: SolveMethod::ClosedForm,
            certificate,
        })
    }

    /// Largest relative violation of `M(α, t*) ≤ M(α*, t*) ≤ M(α*, t)` over a
    /// 21-point α grid and a t grid of finite vertices plus `2v` random
    /// simplex points from a fixed seed.
    pub fn certificate(&self, alpha: f64, t: &[f64]) -> Result<f64> {
        check_unit(alpha, "alpha")?;
        self.check_t(t)?;
        let v = self.v();
        let value = self.value(alpha, t);
        let scale = value.abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..CERT_ALPHA_POINTS {
            let a = i as f64 / (CERT_ALPHA_POINTS - 1) as f64;
            worst = worst.max((self.value(a, t) - value) / scale);
        }
        let mut probe = vec![0.0; v];
        for k in 0..v {
            probe.iter_mut().for_each(|x| *x = 0.0);
            probe[k] = 1.0;
            worst = worst.max((value - self.value(alpha, &probe)) / scale);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(CERT_SEED);
        for _ in 0..2 * v {
            for x in probe.iter_mut() {
                *x = -(1.0 - rng.gen::<f64>()).ln();
            }
            let total: f64 = probe.iter().sum();
            probe.iter_mut().for_each(|x| *x /= total);
            worst = worst.max((value - self.value(alpha, &probe)) / scale);
        }
        Ok(worst)
    }

    /// `ε_L` and `ε_H`; between them no closed form is known.
    pub fn thresholds(&self) -> Result<RegimeThresholds> {
        if self.v() == 1 {
            return Err(UldpError::NoIntermediateRegime);
        }
        Ok(RegimeThresholds {
            eps_low: eps_low(self.w(), self.v()),
            eps_high: eps_high(self.w(), self.v()),
        })
    }

    /// Worst-case asymptotic error of the uBD mechanism with its score-based
    /// estimator. The worst case over distributions reduces to a concave
    /// quadratic in the sensitive mass `β`, maximised in closed form.
    pub fn ubd_asymptotic_error(&self, alpha: f64, t: &[f64]) -> Result<f64> {
        let (m, f) = self.ubd_profile_params(alpha, t)?;
        let c = self.curvature();
        let beta = (alpha + f / (2.0 * c)).clamp(0.0, 1.0);
        Ok(ubd_profile(m, f, c, beta - alpha))
    }

    /// Asymptotic error of the uBD mechanism at `P^(β)`.
    pub fn ubd_error_at(&self, alpha: f64, t: &[f64], beta: f64) -> Result<f64> {
        check_unit(beta, "beta")?;
        let (m, f) = self.ubd_profile_params(alpha, t)?;
        Ok(ubd_profile(m, f, self.curvature(), beta - alpha))
    }

    fn ubd_profile_params(&self, alpha: f64, t: &[f64]) -> Result<(f64, f64)> {
        let m = self.objective(alpha, t)?.total;
        if !m.is_finite() {
            return Err(UldpError::EstimatorDegenerate);
        }
        Ok((m, self.objective_dalpha(alpha, t)?))
    }

    fn curvature(&self) -> f64 {
        let (w, v) = (self.w() as f64, self.v() as f64);
        w / (v * (w - v))
    }

    /// Distribution error of utility-optimised subset selection with subset
    /// size `k`.
    pub fn uss_error(&self, k: usize, p: &Distribution) -> Result<f64> {
        if p.len() != self.w() {
            return Err(UldpError::Domain(format!(
                "distribution has {} entries, expected {}",
                p.len(),
                self.w()
            )));
        }
        let l = self.uss_terms(k)?;
        let ps = p.sensitive_mass(&self.part);
        Ok(l[0] + ps * l[1] + (1.0 - ps) * l[2] + 1.0 - p.norm_sq())
    }

    /// Worst case of [`Problem::uss_error`] over all distributions.
    pub fn uss_worst_case(&self, k: usize) -> Result<f64> {
        let l = self.uss_terms(k)?;
        let (v, nv) = (self.v() as f64, (self.w() - self.v()) as f64);
        let f = |b: f64| {
            l[0] + b * l[1] + (1.0 - b) * l[2] + 1.0 - b * b / v - (1.0 - b) * (1.0 - b) / nv
        };
        let curv = 1.0 / v + 1.0 / nv;
        let beta = ((l[1] - l[2] + 2.0 / nv) / (2.0 * curv)).clamp(0.0, 1.0);
        Ok(f(beta))
    }

    /// Smallest worst-case subset-selection error over `k ∈ 1..v`, absent
    /// when `v = 1`.
    pub fn uss_min_worst_case(&self) -> Option<f64> {
        (1..self.v())
            .filter_map(|k| self.uss_worst_case(k).ok())
            .min_by(f64::total_cmp)
    }

    fn uss_terms(&self, k: usize) -> Result<[f64; 3]> {
        let v = self.v();
        if k < 1 || k >= v {
            return Err(UldpError::Domain(format!(
                "subset size {k} outside 1..{v}"
            )));
        }
        let (kf, vf) = (k as f64, v as f64);
        let e = self.epsilon.exp();
        let e1 = self.epsilon.exp_m1();
        let l1 = vf * (kf * e - e + vf - kf) * (kf * e - kf + vf - 1.0)
            / (kf * (vf - kf) * e1 * e1);
        let l2 = (kf * (1.0 - kf) * e1 + (vf - 1.0) * (vf - 2.0 * kf)) / (kf * (vf - kf) * e1);
        let l3 = vf / (kf * e1);
        Ok([l1, l2, l3])
    }
}

fn ubd_profile(m: f64, f: f64, c: f64, d: f64) -> f64 {
    -c * d * d + d * f + m
}

fn grad(co: &Coeffs, s: &[f64; 3]) -> Vec<f64> {
    let v = co.u[0].len();
    (0..v)
        .map(|k| {
            (0..3)
                .filter(|&i| co.c[i] != 0.0)
                .map(|i| {
                    if s[i] <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        -co.c[i] * co.u[i][k] / (s[i] * s[i])
                    }
                })
                .sum()
        })
        .collect()
}

fn argmin(g: &[f64]) -> usize {
    (0..g.len())
        .min_by(|&a, &b| g[a].total_cmp(&g[b]))
        .expect("non-empty")
}

/// Exact line search of the convex function `γ ↦ Σ C_i / (S_i + γ Δ_i)` on
/// `[0, max_step]` by bisection on its derivative.
fn line_search(co: &Coeffs, s: &[f64; 3], delta: &[f64; 3], max_step: f64) -> f64 {
    let deriv = |g: f64| -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            if co.c[i] == 0.0 {
                continue;
            }
            let si = s[i] + g * delta[i];
            if si <= 0.0 {
                return f64::INFINITY;
            }
            d -= co.c[i] * delta[i] / (si * si);
        }
        d
    };
    if deriv(max_step) <= 0.0 {
        return max_step;
    }
    let (mut lo, mut hi) = (0.0, max_step);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Zeroes weights below the cutoff and renormalises.
fn cleaned(mut t: Vec<f64>) -> Vec<f64> {
    for x in &mut t {
        if *x < ZERO_CUTOFF {
            *x = 0.0;
        }
    }
    let total: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= total);
    t
}

fn eps_low(w: usize, v: usize) -> f64 {
    if v == 2 {
        (1.0 + (2.0 * (w - 2) as f64 / (w - 1) as f64).sqrt()).ln()
    } else {
        bd_threshold(v, 1)
    }
}

fn eps_high(w: usize, v: usize) -> f64 {
    ((w - v) as f64 + ((w - 1) as f64 * (w - 2) as f64 / 2.0).sqrt()).ln()
}

/// Budget `E(v, k)` at which block sizes `k` and `k + 1` tie for the LDP
/// block-design mechanism; `E(v, 0) = ∞` and `E(v, v - 1) = -∞`.
pub fn bd_threshold(v: usize, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    let (v, k) = (v as f64, k as f64);
    0.5 * ((v - k) * (v - k - 1.0) / (k * (k + 1.0))).ln()
}

/// Worst-case error of the LDP block-design mechanism with block size `k`.
pub fn rbd(v: usize, k: usize, epsilon: f64) -> Result<f64> {
    check_budget(epsilon)?;
    if v < 2 || k < 1 || k >= v {
        return Err(UldpError::Domain(format!(
            "need v >= 2 and 1 <= k < v, got v = {v}, k = {k}"
        )));
    }
    let (vf, kf) = (v as f64, k as f64);
    let e = epsilon.exp();
    let e1 = epsilon.exp_m1();
    let num = (vf - 1.0).powi(2) * (kf * e + vf - kf).powi(2);
    Ok(num / (vf * kf * (vf - kf) * e1 * e1))
}

fn ldp_k_star(v: usize, epsilon: f64) -> Vec<usize> {
    (1..v)
        .filter(|&k| bd_threshold(v, k) <= epsilon && epsilon <= bd_threshold(v, k - 1))
        .collect()
}

/// Optimal block sizes and the optimal LDP error on `v` symbols.
pub fn ldp_optimum(v: usize, epsilon: f64) -> Result<LdpOptimum> {
    check_budget(epsilon)?;
    if v < 2 {
        return Err(UldpError::Domain(format!("need v >= 2, got {v}")));
    }
    let value = (1..v)
        .map(|k| rbd(v, k, epsilon))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(LdpOptimum {
        k_star: ldp_k_star(v, epsilon),
        value,
    })
}
