//! Optimal tradeoff across a range of privacy budgets.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, UldpError};
use crate::put::{ldp_optimum, Problem, SolveMethod};
use crate::sim::CSV_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub alpha_star: f64,
    pub t_star: Vec<f64>,
    pub m_star: f64,
    /// Worst-case error of the uBD scheme at `(α*, t*)`.
    pub r_ubd: f64,
    /// Best worst-case error of subset selection, absent when `v = 1`.
    pub r_uss_min: Option<f64>,
    /// Optimal LDP error on the sensitive alphabet alone (0 when `v = 1`).
    pub m_ldp_lower: f64,
    pub method: SolveMethod,
}

/// Log-spaced budgets in `[eps_min, eps_max]` plus the regime boundaries
/// `ε_L`, `ε_H` when they fall strictly inside.
pub fn sweep_grid(w: usize, v: usize, eps_min: f64, eps_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max >= eps_min && eps_max.is_finite()) || points == 0 {
        return Err(UldpError::Domain(format!(
            "need 0 < eps_min <= eps_max and points >= 1, got [{eps_min}, {eps_max}] with {points} points"
        )));
    }
    let mut grid: Vec<f64> = if points == 1 {
        vec![eps_min]
    } else {
        let (a, b) = (eps_min.ln(), eps_max.ln());
        (0..points)
            .map(|i| match i {
                0 => eps_min,
                i if i == points - 1 => eps_max,
                i => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
            })
            .collect()
    };
    if let Ok(th) = Problem::new(w, v, eps_min)?.thresholds() {
        for e in [th.eps_low, th.eps_high] {
            if e > eps_min && e < eps_max && !grid.contains(&e) {
                grid.push(e);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

/// Solves the tradeoff at each budget of [`sweep_grid`], in parallel.
pub fn sweep(
    w: usize,
    v: usize,
    eps_min: f64,
    eps_max: f64,
    points: usize,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    let grid = sweep_grid(w, v, eps_min, eps_max, points)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| UldpError::Domain(format!("thread pool: {e}")))?;
    pool.install(|| grid.par_iter().map(|&eps| sweep_row(w, v, eps)).collect())
}

/// One row of a sweep.
pub fn sweep_row(w: usize, v: usize, epsilon: f64) -> Result<SweepRow> {
    let problem = Problem::new(w, v, epsilon)?;
    let sol = problem.solve()?;
    let r_ubd = problem.ubd_asymptotic_error(sol.alpha_star, &sol.t_star)?;
    let m_ldp_lower = if v >= 2 {
        ldp_optimum(v, epsilon)?.value
    } else {
        0.0
    };
    Ok(SweepRow {
        epsilon,
        alpha_star: sol.alpha_star,
        t_star: sol.t_star,
        m_star: sol.value,
        r_ubd,
        r_uss_min: problem.uss_min_worst_case(),
        m_ldp_lower,
        method: sol.method,
    })
}

/// `k:weight` pairs for the non-zero weights, joined by `;`.
pub fn sparse_weights(t: &[f64]) -> String {
    t.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(k, x)| format!("{}:{}", k + 1, x))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes rows as CSV after a `# ` comment line.
pub fn write_sweep_csv<W: Write>(mut out: W, meta: &str, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "# uldp-lab sweep {CSV_VERSION} {meta}")?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record([
        "epsilon",
        "alpha_star",
        "t_star",
        "m_star",
        "r_ubd",
        "r_uss_min",
        "m_ldp_lower",
        "method",
    ])?;
    for r in rows {
        wr.write_record([
            r.epsilon.to_string(),
            r.alpha_star.to_string(),
            sparse_weights(&r.t_star),
            r.m_star.to_string(),
            r.r_ubd.to_string(),
            r.r_uss_min.map(|x| x.to_string()).unwrap_or_default(),
            r.m_ldp_lower.to_string(),
            r.method.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_boundaries() {
        let g = sweep_grid(20, 5, 0.1, 10.0, 5).unwrap();
        let th = Problem::new(20, 5, 1.0).unwrap().thresholds().unwrap();
        assert_eq!(g.len(), 7);
        assert!(g.contains(&th.eps_low) && g.contains(&th.eps_high));
        assert!(g.windows(2).all(|p| p[0] < p[1]));
        assert_eq!((g[0], g[6]), (0.1, 10.0));
    }

    #[test]
    fn small_sweep_is_consistent() {
        let rows = sweep(12, 4, 0.2, 6.0, 8, 2).unwrap();
        for r in &rows {
            assert!((r.r_ubd - r.m_star).abs() <= 1e-6 * r.m_star, "{r:?}");
            assert!(r.m_star <= r.r_uss_min.unwrap() * (1.0 + 1e-9));
            assert!(r.m_star >= r.m_ldp_lower * (1.0 - 1e-9));
        }
        for p in rows.windows(2) {
            assert!(p[1].m_star <= p[0].m_star * (1.0 + 1e-9));
        }
    }

    #[test]
    fn v_one_has_empty_uss_column() {
        let rows = sweep(4, 1, 0.5, 2.0, 3, 1).unwrap();
        assert!(rows.iter().all(|r| r.r_uss_min.is_none() && r.m_ldp_lower == 0.0));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, "w=4 v=1", &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# uldp-lab sweep v1"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn sparse_format() {
        assert_eq!(sparse_weights(&[0.25, 0.0, 0.75]), "1:0.25;3:0.75");
    }
}
