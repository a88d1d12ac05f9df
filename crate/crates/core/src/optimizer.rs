//! Search for the local rows that maximize the CHSH violation of the
//! postselected pair.
//!
//! The objective is `chsh_max(postselect(werner(x), n, U, V))`. Rows are
//! real (the Werner matrix is real), so a point in the search space is the
//! pair `(u0, u1)` in `R^(2 * 2^n)`, or `(u0, u1, v0, v1)` when Bob's rows
//! are searched independently. Each start runs projected ascent: a central
//! finite-difference gradient in the ambient space, a backtracking step,
//! and Gram-Schmidt back onto the orthonormal pairs.

use std::thread;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::chsh::{correlation_from_matrix, TSIRELSON_BOUND};
use crate::collective::{mirror_rows, postselect_with, xor_rows, LocalRows, PairPower, MIN_SUCCESS_PROBABILITY};
use crate::densemat::ComplexMatrix;
use crate::error::{Error, Result};
use crate::states::werner;

/// Largest pair count accepted by [`optimize`].
pub const MAX_OPTIMIZE_PAIRS: usize = 5;

/// Minimum gain over the XOR objective that counts as a transition.
pub const TRANSITION_GAIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BobMode {
    /// Bob's rows follow Alice's through the parity sign map.
    Mirrored,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartSet {
    Random,
    RandomPlusXor,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub objective_tol: f64,
    pub gradient_step: f64,
    pub seed: u64,
    pub mode: BobMode,
    pub start_set: StartSet,
    /// Worker threads for independent restarts. Results do not depend on it.
    pub threads: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 2000,
            step_tol: 1e-10,
            objective_tol: 1e-9,
            gradient_step: 1e-6,
            seed: 0,
            mode: BobMode::Mirrored,
            start_set: StartSet::RandomPlusXor,
            threads: 1,
        }
    }
}

impl OptimizerConfig {
    fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::OutOfRange("restarts must be at least 1".into()));
        }
        for (name, v) in [
            ("step_tol", self.step_tol),
            ("objective_tol", self.objective_tol),
            ("gradient_step", self.gradient_step),
        ] {
            if !(v > 0.0) {
                return Err(Error::OutOfRange(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Xor,
    Warm,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartResult {
    pub start: usize,
    pub kind: StartKind,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerReport {
    pub best_value: f64,
    pub best_rows: LocalRows,
    /// Bob's rows; the mirror of `best_rows` in mirrored mode.
    pub best_bob_rows: LocalRows,
    pub best_success_probability: f64,
    pub per_restart: Vec<RestartResult>,
    pub xor_value: f64,
    pub used_xor_start: bool,
}

/// Bob's rows for an objective evaluation.
#[derive(Debug, Clone, Copy)]
pub enum BobRows<'a> {
    Mirrored,
    Independent(&'a LocalRows),
}

/// `chsh_max` of the postselected state of `n` Werner pairs, through the
/// general complex postselection path. Annihilating rows give `-inf`.
pub fn objective(x: f64, n: usize, u: &LocalRows, bob: BobRows<'_>) -> Result<f64> {
    let power = PairPower::new(&werner(x)?, n)?;
    let v = match bob {
        BobRows::Mirrored => mirror_rows(u),
        BobRows::Independent(v) => v.clone(),
    };
    match postselect_with(&power, u, &v) {
        Ok(out) => crate::chsh::chsh_max(&out.rho_new),
        Err(Error::Annihilated(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Real-arithmetic objective over a cached pair power.
#[derive(Debug, Clone)]
pub struct Evaluator {
    n: usize,
    mode: BobMode,
    entries: Vec<(usize, usize, f64)>,
}

impl Evaluator {
    pub fn new(x: f64, n: usize, mode: BobMode) -> Result<Self> {
        let power = PairPower::new(&werner(x)?, n)?;
        let dense = power.to_matrix();
        let dim = dense.dim();
        let mut entries = Vec::with_capacity(power.nonzeros());
        for r in 0..dim {
            for c in 0..dim {
                let z = dense.get(r, c);
                if z.re != 0.0 {
                    entries.push((r, c, z.re));
                }
            }
        }
        Ok(Self { n, mode, entries })
    }

    pub fn pairs(&self) -> usize {
        self.n
    }

    /// Number of real parameters in one search point.
    pub fn param_len(&self) -> usize {
        let rows = 2 << self.n;
        match self.mode {
            BobMode::Mirrored => rows,
            BobMode::Independent => 2 * rows,
        }
    }

    /// Projects raw parameters onto orthonormal row pairs.
    pub fn project(&self, params: &[f64]) -> Option<(LocalRows, LocalRows)> {
        let len = 1 << self.n;
        let u = LocalRows::orthonormalize(self.n, &params[..len], &params[len..2 * len])?;
        let v = match self.mode {
            BobMode::Mirrored => mirror_rows(&u),
            BobMode::Independent => {
                LocalRows::orthonormalize(self.n, &params[2 * len..3 * len], &params[3 * len..])?
            }
        };
        Some((u, v))
    }

    pub fn params_of(&self, u: &LocalRows, v: &LocalRows) -> Vec<f64> {
        let mut p = u.to_real_params();
        if self.mode == BobMode::Independent {
            p.extend(v.to_real_params());
        }
        p
    }

    /// Objective and success probability at projected rows.
    pub fn evaluate_rows(&self, u: &LocalRows, v: &LocalRows) -> Result<(f64, f64)> {
        let re = |row: &[Complex64]| -> Vec<f64> { row.iter().map(|z| z.re).collect() };
        let (u0, u1, v0, v1) = (re(u.u0()), re(u.u1()), re(v.u0()), re(v.u1()));
        let mask = (1usize << self.n) - 1;
        let mut out = [0.0f64; 16];
        for &(r, c, val) in &self.entries {
            let (a, b) = (r >> self.n, r & mask);
            let (ap, bp) = (c >> self.n, c & mask);
            let left = [u0[a] * v0[b], u0[a] * v1[b], u1[a] * v0[b], u1[a] * v1[b]];
            let right = [
                u0[ap] * v0[bp],
                u0[ap] * v1[bp],
                u1[ap] * v0[bp],
                u1[ap] * v1[bp],
            ];
            for i in 0..4 {
                let li = left[i] * val;
                if li == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    out[i * 4 + j] += li * right[j];
                }
            }
        }
        let p = out[0] + out[5] + out[10] + out[15];
        if !(p >= MIN_SUCCESS_PROBABILITY) {
            return Ok((f64::NEG_INFINITY, p.max(0.0)));
        }
        let m = ComplexMatrix::from_fn(4, |r, c| {
            Complex64::new(0.5 * (out[r * 4 + c] + out[c * 4 + r]) / p, 0.0)
        });
        let t = correlation_from_matrix(&m)?;
        Ok((2.0 * t.m_value()?.sqrt(), p))
    }

    pub fn evaluate(&self, params: &[f64]) -> f64 {
        match self.project(params) {
            Some((u, v)) => self.evaluate_rows(&u, &v).map(|r| r.0).unwrap_or(f64::NEG_INFINITY),
            None => f64::NEG_INFINITY,
        }
    }

    fn gradient(&self, params: &[f64], h: f64) -> Vec<f64> {
        let mut probe = params.to_vec();
        (0..params.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + h;
                let up = self.evaluate(&probe);
                probe[i] = orig - h;
                let down = self.evaluate(&probe);
                probe[i] = orig;
                if up.is_finite() && down.is_finite() {
                    (up - down) / (2.0 * h)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Projected ascent from `start`. Returns the final projected point,
    /// its value and the number of iterations taken.
    pub fn ascend(&self, start: &[f64], cfg: &OptimizerConfig) -> (Vec<f64>, f64, usize) {
        let mut p = match self.project(start) {
            Some((u, v)) => self.params_of(&u, &v),
            None => return (start.to_vec(), f64::NEG_INFINITY, 0),
        };
        let mut f = self.evaluate(&p);
        if !f.is_finite() {
            return (p, f, 0);
        }
        let mut alpha = 0.1;
        let mut iters = 0;
        while iters < cfg.max_iters {
            iters += 1;
            let g = self.gradient(&p, cfg.gradient_step);
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2 == 0.0 {
                break;
            }
            let mut accepted = None;
            let mut step = alpha;
            for _ in 0..60 {
                let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                if let Some((u, v)) = self.project(&trial) {
                    let q = self.params_of(&u, &v);
                    let fq = self.evaluate(&q);
                    if fq > f + 1e-4 * step * g2 {
                        accepted = Some((q, fq, step));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((q, fq, step)) = accepted else {
                break;
            };
            let moved = p
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let gain = fq - f;
            p = q;
            f = fq;
            alpha = (2.0 * step).min(10.0);
            if moved < cfg.step_tol || gain < cfg.objective_tol {
                break;
            }
        }
        (p, f, iters)
    }
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn random_start(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

struct Start {
    kind: StartKind,
    params: Option<Vec<f64>>,
}

fn run_starts(
    eval: &Evaluator,
    starts: &[Start],
    cfg: &OptimizerConfig,
) -> Vec<(Vec<f64>, f64, usize)> {
    let run_one = |i: usize| {
        let params = match &starts[i].params {
            Some(p) => p.clone(),
            None => random_start(eval.param_len(), &mut restart_rng(cfg.seed, i)),
        };
        eval.ascend(&params, cfg)
    };
    let threads = cfg.threads.max(1).min(starts.len());
    if threads == 1 {
        return (0..starts.len()).map(run_one).collect();
    }
    let mut results: Vec<Option<(Vec<f64>, f64, usize)>> = vec![None; starts.len()];
    thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run_one = &run_one;
                s.spawn(move || {
                    (w..starts.len())
                        .step_by(threads)
                        .map(|i| (i, run_one(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("optimizer worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.expect("every start ran")).collect()
}

fn optimize_from(
    eval: &Evaluator,
    cfg: &OptimizerConfig,
    warm: Option<&[f64]>,
) -> Result<OptimizerReport> {
    cfg.check()?;
    let n = eval.pairs();
    let xor = xor_rows(n)?;
    let xor_bob = mirror_rows(&xor);
    let (xor_value, _) = eval.evaluate_rows(&xor, &xor_bob)?;

    let mut starts = Vec::new();
    let used_xor_start = cfg.start_set == StartSet::RandomPlusXor;
    if used_xor_start {
        starts.push(Start {
            kind: StartKind::Xor,
            params: Some(eval.params_of(&xor, &xor_bob)),
        });
    }
    if let Some(w) = warm {
        starts.push(Start {
            kind: StartKind::Warm,
            params: Some(w.to_vec()),
        });
    }
    for _ in 0..cfg.restarts {
        starts.push(Start {
            kind: StartKind::Random,
            params: None,
        });
    }

    let results = run_starts(eval, &starts, cfg);
    let mut per_restart = Vec::with_capacity(results.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, value, iterations)) in results.iter().enumerate() {
        per_restart.push(RestartResult {
            start: i,
            kind: starts[i].kind,
            value: *value,
            iterations: *iterations,
        });
        if value.is_finite() && best.is_none_or(|(_, b)| *value > b) {
            best = Some((i, *value));
        }
    }

    let (best_rows, best_bob_rows, best_value) = match best {
        Some((i, value)) => {
            let (u, v) = eval
                .project(&results[i].0)
                .expect("finite objective implies a valid projection");
            (u, v, value)
        }
        None => (xor.clone(), xor_bob.clone(), xor_value),
    };
    let (_, best_success_probability) = eval.evaluate_rows(&best_rows, &best_bob_rows)?;
    Ok(OptimizerReport {
        best_value,
        best_rows,
        best_bob_rows,
        best_success_probability,
        per_restart,
        xor_value,
        used_xor_start,
    })
}

/// Maximizes the postselected CHSH value over local rows for `n` Werner
/// pairs with singlet fraction `x`.
pub fn optimize(x: f64, n: usize, cfg: &OptimizerConfig) -> Result<OptimizerReport> {
    if n == 0 || n > MAX_OPTIMIZE_PAIRS {
        return Err(Error::OutOfRange(format!(
            "optimize supports 1..={MAX_OPTIMIZE_PAIRS} pairs, got {n}"
        )));
    }
    optimize_from(&Evaluator::new(x, n, cfg.mode)?, cfg, None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub x: f64,
    pub best_value: f64,
    pub xor_value: f64,
    pub success_probability: f64,
}

/// One [`optimize`] per grid point, in increasing `x`, each warm-started
/// from the previous point's best rows.
pub fn scan_curve(n: usize, x_grid: &[f64], cfg: &OptimizerConfig) -> Result<Vec<ScanPoint>> {
    if n == 0 || n > MAX_OPTIMIZE_PAIRS {
        return Err(Error::OutOfRange(format!(
            "scan supports 1..={MAX_OPTIMIZE_PAIRS} pairs, got {n}"
        )));
    }
    let mut grid = x_grid.to_vec();
    if let Some(bad) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfRange(format!("grid value {bad} outside [0, 1]")));
    }
    grid.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for (k, &x) in grid.iter().enumerate() {
        let eval = Evaluator::new(x, n, cfg.mode)?;
        let point_cfg = OptimizerConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        let report = optimize_from(&eval, &point_cfg, warm.as_deref())?;
        warm = Some(eval.params_of(&report.best_rows, &report.best_bob_rows));
        out.push(ScanPoint {
            x,
            best_value: report.best_value,
            xor_value: report.xor_value,
            success_probability: report.best_success_probability,
        });
    }
    Ok(out)
}

/// Smallest grid `x` where the optimum beats the XOR rows by more than
/// [`TRANSITION_GAIN`].
pub fn transition_point(points: &[ScanPoint]) -> Option<f64> {
    points
        .iter()
        .find(|p| p.best_value - p.xor_value > TRANSITION_GAIN)
        .map(|p| p.x)
}

/// Evenly spaced grid from `lo` to `hi` inclusive with the given spacing,
/// rounded to suppress accumulation error.
pub fn grid(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let steps = ((hi - lo) / spacing + 1e-9).floor() as usize;
    (0..=steps)
        .map(|k| ((lo + k as f64 * spacing) * 1e12).round() / 1e12)
        .collect()
}

pub fn within_chsh_ceiling(v: f64) -> bool {
    v <= TSIRELSON_BOUND + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn quick(restarts: usize) -> OptimizerConfig {
        OptimizerConfig {
            restarts,
            seed: 7,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn single_pair_rotation_keeps_value() {
        let th = 0.37f64;
        let u = LocalRows::from_real(1, &[th.cos(), th.sin()], &[-th.sin(), th.cos()]).unwrap();
        let v = objective(0.9, 1, &u, BobRows::Mirrored).unwrap();
        assert_abs_diff_eq!(v, 2.0 * SQRT_2 * 0.9, epsilon = 1e-12);
    }

    #[test]
    fn xor_objectives() {
        let u = xor_rows(2).unwrap();
        assert_abs_diff_eq!(
            objective(1.0, 2, &u, BobRows::Mirrored).unwrap(),
            2.0 * SQRT_2,
            epsilon = 1e-12
        );
        let u = xor_rows(5).unwrap();
        assert_abs_diff_eq!(
            objective(0.5, 5, &u, BobRows::Mirrored).unwrap(),
            2.000873,
            epsilon = 5e-7
        );
    }

    #[test]
    fn fast_path_matches_general_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=4 {
            for mode in [BobMode::Mirrored, BobMode::Independent] {
                let eval = Evaluator::new(0.63, n, mode).unwrap();
                let p = random_start(eval.param_len(), &mut rng);
                let (u, v) = eval.project(&p).unwrap();
                let fast = eval.evaluate_rows(&u, &v).unwrap().0;
                let slow = objective(0.63, n, &u, BobRows::Independent(&v)).unwrap();
                assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn one_pair_optimum_is_closed_form() {
        let r = optimize(0.9, 1, &quick(4)).unwrap();
        assert_abs_diff_eq!(r.best_value, 2.0 * SQRT_2 * 0.9, epsilon = 1e-6);
    }

    #[test]
    fn two_pairs_xor_is_optimal() {
        let r = optimize(0.5, 2, &quick(16)).unwrap();
        assert!(r.best_value - r.xor_value <= 1e-6);
        assert!(r.best_value >= r.xor_value - 1e-9);
    }

    #[test]
    fn three_pairs_beat_xor_above_transition() {
        let r = optimize(0.7, 3, &quick(16)).unwrap();
        assert!(r.best_value > r.xor_value + TRANSITION_GAIN, "{} vs {}", r.best_value, r.xor_value);
        assert!(r.best_rows.orthonormality_defect() < 1e-12);
        assert!(within_chsh_ceiling(r.best_value));
    }

    #[test]
    fn restarts_are_deterministic_across_threads() {
        let mut cfg = quick(6);
        let a = optimize(0.6, 3, &cfg).unwrap();
        cfg.threads = 3;
        let b = optimize(0.6, 3, &cfg).unwrap();
        assert_eq!(a.best_value, b.best_value);
        let va: Vec<f64> = a.per_restart.iter().map(|r| r.value).collect();
        let vb: Vec<f64> = b.per_restart.iter().map(|r| r.value).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn independent_mode_runs() {
        let cfg = OptimizerConfig {
            mode: BobMode::Independent,
            ..quick(4)
        };
        let r = optimize(0.8, 2, &cfg).unwrap();
        assert!(r.best_value >= r.xor_value - 1e-9);
        assert!(r.best_bob_rows.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn rejects_large_n_and_bad_config() {
        assert!(optimize(0.5, 6, &quick(1)).is_err());
        assert!(optimize(0.5, 2, &quick(0)).is_err());
        assert!(scan_curve(2, &[0.5, 1.5], &quick(1)).is_err());
    }

    #[test]
    fn grid_spacing() {
        let g = grid(0.5, 0.6, 0.01);
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.53);
        assert_eq!(*g.last().unwrap(), 0.6);
    }
}
