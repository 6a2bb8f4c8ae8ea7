//! Monte-Carlo estimation experiments and exact error evaluation.
//!
//! Every client draws from its own ChaCha8 counter range, keyed by
//! `(seed, trial, client)`, so results are identical for any worker count.

use std::io::Write;

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, UldpError};
use crate::estimation::{EstimatorTable, SufficientStats};
use crate::mechanism::{invertible_mass, Mechanism, OutputSymbol};
use crate::put::Problem;
use crate::simplex::{check_unit, dot, p_alpha, Distribution, Mixture};

/// Version tag written in the comment line of every CSV this crate emits.
pub const CSV_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    /// Clients per trial.
    pub n: u64,
    pub trials: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Summary of repeated trials of `n · ||P̂ - P||²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub n: u64,
    pub trials: usize,
    pub mean_scaled_mse: f64,
    pub stderr: f64,
    /// Exact `E ||P̂₁ - P||²` for the simulated distribution.
    pub theory: f64,
    /// Average estimate across trials.
    pub mean_estimate: Vec<f64>,
    /// Standard error of each coordinate of `mean_estimate`.
    pub estimate_stderr: Vec<f64>,
}

/// One point of a worst-case sweep over the sensitive mass `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub result: SimResult,
    /// Asymptotic error at `P^(β)` from the quadratic profile.
    pub theory: f64,
}

fn check_config(cfg: &SimConfig) -> Result<()> {
    if cfg.n == 0 || cfg.trials == 0 || cfg.workers == 0 {
        return Err(UldpError::Domain(
            "n, trials and workers must all be positive".into(),
        ));
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| UldpError::Domain(format!("thread pool: {e}")))
}

/// Runs `cfg.trials` independent experiments with `cfg.n` clients drawn
/// from `p`, each privatised by `m` and decoded by `table`.
pub fn run_trials(
    m: &Mechanism,
    table: &EstimatorTable,
    p: &Distribution,
    cfg: &SimConfig,
) -> Result<SimResult> {
    check_config(cfg)?;
    if !table.matches(m) {
        return Err(UldpError::StatsMismatch(
            "estimator table was built for a different mechanism".into(),
        ));
    }
    if p.len() != m.w() {
        return Err(UldpError::Domain(format!(
            "distribution has {} entries, mechanism has {}",
            p.len(),
            m.w()
        )));
    }
    let inputs = WeightedIndex::new(p.as_slice())
        .map_err(|e| UldpError::Distribution(e.to_string()))?;
    let trials: Vec<(f64, Vec<f64>)> = pool(cfg.workers)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_one(m, table, p, &inputs, cfg, trial as u64))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(summarise(cfg, trials, exact_mse(table, p)?))
}

fn run_one(
    m: &Mechanism,
    table: &EstimatorTable,
    p: &Distribution,
    inputs: &WeightedIndex<f64>,
    cfg: &SimConfig,
    trial: u64,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let mut stats = SufficientStats::new(table.partition());
    let mut buf = Vec::new();
    for client in 0..cfg.n {
        rng.set_word_pos((client as u128) << 32);
        let x = inputs.sample(&mut rng);
        let out = m.sample_into(x, &mut rng, &mut buf);
        stats.record_sampled(out, &buf);
    }
    let est = table.estimate(&stats)?;
    let err: f64 = est
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((cfg.n as f64 * err, est))
}

fn summarise(cfg: &SimConfig, trials: Vec<(f64, Vec<f64>)>, theory: f64) -> SimResult {
    let r = trials.len() as f64;
    let w = trials[0].1.len();
    let mean = trials.iter().map(|t| t.0).sum::<f64>() / r;
    let se = |xs: &mut dyn Iterator<Item = f64>, mu: f64| -> f64 {
        if trials.len() < 2 {
            return 0.0;
        }
        let ss: f64 = xs.map(|x| (x - mu) * (x - mu)).sum();
        (ss / (r - 1.0) / r).sqrt()
    };
    let stderr = se(&mut trials.iter().map(|t| t.0), mean);
    let mean_estimate: Vec<f64> = (0..w)
        .map(|x| trials.iter().map(|t| t.1[x]).sum::<f64>() / r)
        .collect();
    let estimate_stderr = (0..w)
        .map(|x| se(&mut trials.iter().map(|t| t.1[x]), mean_estimate[x]))
        .collect();
    SimResult {
        n: cfg.n,
        trials: cfg.trials,
        mean_scaled_mse: mean,
        stderr,
        theory,
        mean_estimate,
        estimate_stderr,
    }
}

/// Runs [`run_trials`] at `P^(β)` for each `β`, alongside the asymptotic
/// error profile.
pub fn worst_case_sweep(
    m: &Mechanism,
    table: &EstimatorTable,
    betas: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<BetaPoint>> {
    let part = *table.partition();
    let problem = Problem::new(part.w(), part.v(), table.epsilon())?;
    betas
        .iter()
        .map(|&beta| {
            let p = p_alpha(&part, beta)?;
            Ok(BetaPoint {
                beta,
                result: run_trials(m, table, &p, cfg)?,
                theory: problem.ubd_error_at(table.alpha(), table.mixture(), beta)?,
            })
        })
        .collect()
}

/// Exact `E_{X ~ P} E_{Y ~ Q(·|X)} ||P̂₁(Y) - P||²` for a block-design
/// mixture, using only the inclusion probabilities of balanced designs.
pub fn exact_mse(table: &EstimatorTable, p: &Distribution) -> Result<f64> {
    let part = table.partition();
    let (w, v) = (part.w(), part.v());
    if p.len() != w {
        return Err(UldpError::Domain("distribution length mismatch".into()));
    }
    let p = p.as_slice();
    let e = table.epsilon().exp();
    let t = table.mixture();
    let (vf, sq) = (v as f64, |a: f64, b: f64| (a - b) * (a - b));
    let sum_s = |c: f64| p[..v].iter().map(|&q| sq(c, q)).sum::<f64>();
    let sum_n = |c: f64| p[v..].iter().map(|&q| sq(c, q)).sum::<f64>();
    let sm: Vec<f64> = table.member.iter().map(|&c| sum_s(c)).collect();
    let sn: Vec<f64> = table.nonmember.iter().map(|&c| sum_s(c)).collect();
    let ns: Vec<f64> = table.nonsensitive.iter().map(|&c| sum_n(c)).collect();
    let mut total = 0.0;
    for &px in p.iter().take(v) {
        if px == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for k in 1..=v {
            let tk = t[k - 1];
            if tk == 0.0 {
                continue;
            }
            let (kf, i) = (k as f64, k - 1);
            let denom = kf * e + vf - kf;
            let pin = kf * e / denom;
            let dm = sq(table.member[i], px);
            let dn = sq(table.nonmember[i], px);
            let mut r = pin * dm + (1.0 - pin) * dn + ns[i];
            if v >= 2 {
                let q = kf * ((kf - 1.0) * e + vf - kf) / ((vf - 1.0) * denom);
                r += q * (sm[i] - dm) + (1.0 - q) * (sn[i] - dn);
            }
            acc += tk * r;
        }
        total += px * acc;
    }
    let mixture = Mixture::new(t.to_vec())?;
    let f = invertible_mass(&mixture, v, table.epsilon());
    let mut protected = 0.0;
    for k in 1..=v {
        let (kf, i) = (k as f64, k - 1);
        let pi = t[i] * vf / (kf * e + vf - kf);
        protected += pi * (kf / vf * sm[i] + (1.0 - kf / vf) * sn[i] + ns[i]);
    }
    let inv_s = sum_s(table.invertible_sensitive);
    let miss = sum_n(table.invertible_miss);
    for &px in &p[v..] {
        if px == 0.0 {
            continue;
        }
        let inv = inv_s + sq(table.invertible_hit, px) + miss - sq(table.invertible_miss, px);
        total += px * (f * inv + protected);
    }
    Ok(total)
}

/// Same quantity as [`exact_mse`], summed over every output of a dense
/// channel without using any design structure.
pub fn exact_mse_dense(m: &Mechanism, table: &EstimatorTable, p: &Distribution) -> Result<f64> {
    let outputs = m.outputs().ok_or(UldpError::Unsupported("dense error evaluation"))?;
    let p = p.as_slice();
    let mut total = 0.0;
    for y in outputs {
        let qp = dot(&m.column(y), p);
        if qp == 0.0 {
            continue;
        }
        let est = table.estimate_output(y);
        total += qp * est.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

/// Exact error at `P^(β)` for a dense channel, precomputed so each `β`
/// costs one pass over the outputs.
#[derive(Debug, Clone)]
pub struct DenseBetaProfile {
    w: usize,
    v: usize,
    /// Per output: `||P̂(y)||²`, `Σ_S P̂(y)`, `Σ_N P̂(y)`, `Σ_S Q(y|x)`, `Σ_N Q(y|x)`.
    rows: Vec<[f64; 5]>,
}

impl DenseBetaProfile {
    pub fn new(m: &Mechanism, table: &EstimatorTable) -> Result<Self> {
        let outputs = m.outputs().ok_or(UldpError::Unsupported("dense error evaluation"))?;
        let v = m.v();
        let rows = outputs
            .iter()
            .map(|y: &OutputSymbol| {
                let est = table.estimate_output(y);
                let col = m.column(y);
                [
                    est.iter().map(|a| a * a).sum(),
                    est[..v].iter().sum(),
                    est[v..].iter().sum(),
                    col[..v].iter().sum(),
                    col[v..].iter().sum(),
                ]
            })
            .collect();
        Ok(Self { w: m.w(), v, rows })
    }

    /// `E ||P̂₁ - P^(β)||²` under `P^(β)`.
    pub fn error_at(&self, beta: f64) -> Result<f64> {
        check_unit(beta, "beta")?;
        let (a, b) = (beta / self.v as f64, (1.0 - beta) / (self.w - self.v) as f64);
        let norm = beta * a + (1.0 - beta) * b;
        Ok(self
            .rows
            .iter()
            .map(|r| (a * r[3] + b * r[4]) * (r[0] - 2.0 * (a * r[1] + b * r[2]) + norm))
            .sum())
    }
}

/// Converts a frequency-estimation error into distribution-estimation error:
/// `freq_mse + (1 - Σ P²) / n`.
pub fn freq_mse_translate(n: u64, p: &Distribution, freq_mse: f64) -> Result<f64> {
    if n == 0 {
        return Err(UldpError::Domain("n must be positive".into()));
    }
    Ok(freq_mse + (1.0 - p.norm_sq()) / n as f64)
}

/// Writes `beta,empirical,stderr,theory` rows after a `# ` comment line.
pub fn write_beta_csv<W: Write>(mut out: W, meta: &str, points: &[BetaPoint]) -> Result<()> {
    writeln!(out, "# uldp-lab worst-case {CSV_VERSION} {meta}")?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["beta", "empirical", "stderr", "theory"])?;
    for pt in points {
        wr.write_record([
            pt.beta.to_string(),
            pt.result.mean_scaled_mse.to_string(),
            pt.result.stderr.to_string(),
            pt.theory.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes a one-row summary of a simulation after a `# ` comment line.
pub fn write_result_csv<W: Write>(mut out: W, meta: &str, r: &SimResult) -> Result<()> {
    writeln!(out, "# uldp-lab simulate {CSV_VERSION} {meta}")?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["n", "trials", "mean_scaled_mse", "stderr", "theory"])?;
    wr.write_record([
        r.n.to_string(),
        r.trials.to_string(),
        r.mean_scaled_mse.to_string(),
        r.stderr.to_string(),
        r.theory.to_string(),
    ])?;
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{ubd_mechanism, ubd_streaming};
    use crate::simplex::Partition;

    fn setup(w: usize, v: usize, eps: f64, t: &[f64], alpha: f64) -> (Mechanism, EstimatorTable) {
        let part = Partition::new(w, v).unwrap();
        let m = ubd_mechanism(&part, eps, &Mixture::new(t.to_vec()).unwrap(), None).unwrap();
        let table = EstimatorTable::for_mechanism(&m, alpha).unwrap();
        (m, table)
    }

    #[test]
    fn exact_routes_agree() {
        let (m, table) = setup(7, 3, 0.8, &[0.4, 0.35, 0.25], 0.3);
        let p = Distribution::new(vec![0.1, 0.3, 0.05, 0.2, 0.15, 0.1, 0.1]).unwrap();
        let a = exact_mse(&table, &p).unwrap();
        let b = exact_mse_dense(&m, &table, &p).unwrap();
        assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
    }

    #[test]
    fn beta_profile_matches_quadratic() {
        let (m, table) = setup(6, 3, 1.2, &[0.5, 0.5, 0.0], 0.4);
        let prof = DenseBetaProfile::new(&m, &table).unwrap();
        let problem = Problem::new(6, 3, 1.2).unwrap();
        for &beta in &[0.0, 0.25, 0.7, 1.0] {
            let a = prof.error_at(beta).unwrap();
            let b = problem.ubd_error_at(0.4, &[0.5, 0.5, 0.0], beta).unwrap();
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{beta}: {a} vs {b}");
        }
    }

    #[test]
    fn translate_example() {
        let p = Distribution::uniform(4).unwrap();
        let r = freq_mse_translate(100, &p, 0.01).unwrap();
        assert!((r - (0.01 + 0.75 / 100.0)).abs() < 1e-15);
        assert!(freq_mse_translate(0, &p, 0.01).is_err());
    }

    #[test]
    fn deterministic_across_workers() {
        let part = Partition::new(6, 3).unwrap();
        let t = Mixture::new(vec![0.5, 0.5, 0.0]).unwrap();
        let m = ubd_streaming(&part, 1.0, &t).unwrap();
        let table = EstimatorTable::for_mechanism(&m, 0.5).unwrap();
        let p = p_alpha(&part, 0.5).unwrap();
        let cfg = |workers| SimConfig { n: 500, trials: 6, seed: 11, workers };
        let a = run_trials(&m, &table, &p, &cfg(1)).unwrap();
        let b = run_trials(&m, &table, &p, &cfg(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_mismatched_table() {
        let (m, _) = setup(6, 3, 1.0, &[1.0, 0.0, 0.0], 0.5);
        let (_, other) = setup(6, 3, 1.0, &[0.0, 1.0, 0.0], 0.5);
        let p = Distribution::uniform(6).unwrap();
        let cfg = SimConfig { n: 10, trials: 1, seed: 0, workers: 1 };
        assert!(run_trials(&m, &other, &p, &cfg).is_err());
    }
}
