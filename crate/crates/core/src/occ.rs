//! ν one-class SVM trained on the target class only.
//!
//! The dual problem
//!
//! ```text
//! min ½ αᵀKα   s.t.  0 ≤ αᵢ ≤ 1,  Σ αᵢ = ν·n
//! ```
//!
//! is solved by sequential minimal optimization with second-order working
//! set selection. The returned model is rescaled so that `Σ αᵢ = 1`; its
//! decision value is `f(x) = Σ αᵢ K(xᵢ, x) − ρ`, positive inside the target
//! region. Training is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    /// Separates the data from the origin, so it needs features that are
    /// not centred on the target itself: pass a population scaler through
    /// [`Context`] or turn `standardize` off.
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearNuOcsvm,
    RbfNuOcsvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kernel: KernelChoice,
    /// Searched in order; ties keep the earlier entry.
    pub nu_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// z-score features with training-set statistics before fitting.
    pub standardize: bool,
    /// Cross-validation folds for grid search; below 2 uses held-in
    /// acceptance.
    pub folds: usize,
    /// Uniform background points for the boundary-volume penalty.
    pub background_samples: usize,
    pub grid_search: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Rbf,
            nu_grid: vec![0.05, 0.1, 0.2, 0.3],
            gamma_grid: vec![0.1, 0.5, 1.0, 2.0],
            seed: 7,
            max_iter: 100_000,
            tol: 1e-6,
            standardize: true,
            folds: 3,
            background_samples: 200,
            grid_search: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(Error::Config("nu and gamma grids must be nonempty".into()));
        }
        if let Some(nu) = self.nu_grid.iter().find(|&&nu| !(nu > 0.0 && nu <= 1.0)) {
            return Err(Error::Config(format!("nu must be in (0, 1], got {nu}")));
        }
        if let Some(g) = self.gamma_grid.iter().find(|&&g| g.is_nan() || g <= 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {g}")));
        }
        Ok(())
    }

    /// Same configuration narrowed to one grid point.
    pub fn at(&self, nu: f64, gamma: f64) -> TrainConfig {
        TrainConfig {
            nu_grid: vec![nu],
            gamma_grid: vec![gamma],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassModel {
    pub kind: ModelKind,
    pub nu: f64,
    /// Only set for the RBF kernel.
    pub gamma: Option<f64>,
    pub feature_dim: usize,
    pub standardizer: Option<Standardizer>,
    /// Support vectors in (standardized) training space.
    pub support: Vec<Vec<f64>>,
    /// Dual coefficients of `support`, summing to 1.
    pub coef: Vec<f64>,
    /// Primal weight vector for the linear kernel.
    pub weights: Option<Vec<f64>>,
    pub rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Linear,
    Rbf(f64),
}

impl Kernel {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf(g) => (-g * sq_dist(a, b)).exp(),
        }
    }
}

impl OneClassModel {
    fn kernel(&self) -> Kernel {
        match (self.kind, self.gamma) {
            (ModelKind::RbfNuOcsvm, Some(g)) => Kernel::Rbf(g),
            _ => Kernel::Linear,
        }
    }

    fn raw_decision(&self, z: &[f64]) -> f64 {
        match &self.weights {
            Some(w) => dot(w, z),
            None => {
                let k = self.kernel();
                self.support.iter().zip(&self.coef).map(|(sv, c)| c * k.eval(sv, z)).sum()
            }
        }
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(match &self.standardizer {
            Some(st) => st.transform(x),
            None => x.to_vec(),
        })
    }

    /// Signed margin of `x`: nonnegative means inside the target region.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let z = self.prepare(x)?;
        Ok(self.raw_decision(&z) - self.rho)
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        Ok(self.score(x)? >= 0.0)
    }
}

const TAU: f64 = 1e-12;

/// SMO on the unscaled dual (`0 ≤ αᵢ ≤ 1`, `Σ αᵢ = ν·n`). Returns α.
fn solve_dual(q: &[Vec<f64>], nu: f64, max_iter: usize, tol: f64) -> Vec<f64> {
    let n = q.len();
    let total = nu * n as f64;
    let mut alpha = vec![0.0; n];
    let full = (total.floor() as usize).min(n);
    for a in alpha.iter_mut().take(full) {
        *a = 1.0;
    }
    if full < n {
        alpha[full] = total - full as f64;
    }
    let mut grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * alpha[j]).sum()).collect();

    for _ in 0..max_iter {
        // i: steepest feasible ascent direction among α below the bound
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if alpha[t] < 1.0 && -grad[t] > g_max {
                g_max = -grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };

        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if alpha[t] > 0.0 {
                g_max2 = g_max2.max(grad[t]);
                let b = g_max + grad[t];
                if b > 0.0 {
                    let mut a = q[i][i] + q[t][t] - 2.0 * q[i][t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if g_max + g_max2 < tol {
            break;
        }
        let Some(j) = j_sel else { break };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = q[i][i] + q[j][j] - 2.0 * q[i][j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (grad[i] - grad[j]) / quad;
        let sum = old_i + old_j;
        let (mut ai, mut aj) = (old_i - delta, old_j + delta);
        if sum > 1.0 {
            if ai > 1.0 {
                ai = 1.0;
                aj = sum - 1.0;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > 1.0 {
            if aj > 1.0 {
                aj = 1.0;
                ai = sum - 1.0;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q[t][i] * di + q[t][j] * dj;
        }
    }
    alpha
}

/// ρ from the KKT conditions: the decision value shared by the free support
/// vectors, else the midpoint of the feasible interval.
fn offset(raw: &[f64], alpha: &[f64]) -> f64 {
    let free: Vec<f64> = raw
        .iter()
        .zip(alpha)
        .filter(|(_, &a)| a > 0.0 && a < 1.0)
        .map(|(&r, _)| r)
        .collect();
    if !free.is_empty() {
        // Free vectors agree up to the solver tolerance; taking the lowest
        // keeps every one of them on the inside.
        return free.iter().copied().fold(f64::INFINITY, f64::min);
    }
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for (&r, &a) in raw.iter().zip(alpha) {
        if a >= 1.0 {
            lb = lb.max(r);
        } else {
            ub = ub.min(r);
        }
    }
    match (lb.is_finite(), ub.is_finite()) {
        (true, true) => (lb + ub) / 2.0,
        (true, false) => lb,
        (false, true) => ub,
        (false, false) => 0.0,
    }
}

type Augment<'a> = &'a (dyn Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>> + Sync);

/// Hooks for fitting inside a larger pipeline.
#[derive(Clone, Copy, Default)]
pub struct Context<'a> {
    /// Feature scaling fixed by the caller, e.g. from the unlabelled users
    /// of a campaign. Takes precedence over `TrainConfig::standardize`.
    pub scaler: Option<&'a Standardizer>,
    /// Applied to every training split during grid search.
    pub augment: Option<Augment<'a>>,
}

impl Context<'_> {
    fn augment(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self.augment {
            Some(f) => f(x),
            None => Ok(x.to_vec()),
        }
    }
}

/// Fits a model at the first grid point of `cfg`.
pub fn fit(target: &[Vec<f64>], cfg: &TrainConfig) -> Result<OneClassModel> {
    fit_in(target, cfg, Context::default())
}

/// [`fit`] with caller-supplied scaling.
pub fn fit_in(target: &[Vec<f64>], cfg: &TrainConfig, ctx: Context) -> Result<OneClassModel> {
    cfg.validate()?;
    if target.len() < 2 {
        return Err(Error::InsufficientSamples(target.len()));
    }
    let dim = target[0].len();
    if let Some(bad) = target.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let nu = cfg.nu_grid[0];
    let standardizer = match ctx.scaler {
        Some(st) if st.mean.len() != dim => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: st.mean.len(),
            })
        }
        Some(st) => Some(st.clone()),
        None if cfg.standardize => Some(Standardizer::fit(target)?),
        None => None,
    };
    let z: Vec<Vec<f64>> = match &standardizer {
        Some(st) => target.iter().map(|x| st.transform(x)).collect(),
        None => target.to_vec(),
    };
    let (kind, gamma, kernel) = match cfg.kernel {
        KernelChoice::Linear => (ModelKind::LinearNuOcsvm, None, Kernel::Linear),
        KernelChoice::Rbf => (ModelKind::RbfNuOcsvm, Some(cfg.gamma_grid[0]), Kernel::Rbf(cfg.gamma_grid[0])),
    };

    let q: Vec<Vec<f64>> = z.iter().map(|a| z.iter().map(|b| kernel.eval(a, b)).collect()).collect();
    let alpha = solve_dual(&q, nu, cfg.max_iter, cfg.tol);
    let scale = nu * target.len() as f64;

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (x, &a) in z.iter().zip(&alpha) {
        if a > 0.0 {
            support.push(x.clone());
            coef.push(a / scale);
        }
    }
    let weights = match kernel {
        Kernel::Linear => {
            let mut w = vec![0.0; dim];
            for (sv, c) in support.iter().zip(&coef) {
                for (wk, xk) in w.iter_mut().zip(sv) {
                    *wk += c * xk;
                }
            }
            Some(w)
        }
        Kernel::Rbf(_) => None,
    };
    let mut model = OneClassModel {
        kind,
        nu,
        gamma,
        feature_dim: dim,
        standardizer,
        support,
        coef,
        weights,
        rho: 0.0,
    };
    // ρ is taken from the model's own decision values so that training
    // scores are reproduced exactly by `score`.
    let raw: Vec<f64> = z.iter().map(|x| model.raw_decision(x)).collect();
    model.rho = offset(&raw, &alpha);
    Ok(model)
}

/// Uniform points in the bounding box of `target` widened on each side by
/// one standard deviation of `scale` (the target itself by default; one
/// unit for constant columns).
fn background(target: &[Vec<f64>], scale: Option<&Standardizer>, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let st = match scale {
        Some(st) => st.clone(),
        None => Standardizer::fit(target)?,
    };
    let dim = st.mean.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in target {
        for d in 0..dim {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            (0..dim)
                .map(|d| rng.gen_range((lo[d] - st.sd[d])..(hi[d] + st.sd[d])))
                .collect()
        })
        .collect())
}

fn fraction_accepted(model: &OneClassModel, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for p in points {
        hits += usize::from(model.accepts(p)?);
    }
    Ok(hits as f64 / points.len() as f64)
}

/// Acceptance of target points minus acceptance of background points for
/// one grid point. Target acceptance is measured on held-out folds (at most
/// one per sample) when every training split keeps two samples, else on
/// the training set itself.
pub fn grid_objective(target: &[Vec<f64>], cfg: &TrainConfig, folds: usize, ctx: Context) -> Result<(f64, f64, f64)> {
    let full = fit_in(&ctx.augment(target)?, cfg, ctx)?;
    let bg = background(target, ctx.scaler, cfg.background_samples, cfg.seed)?;
    let bg_rate = fraction_accepted(&full, &bg)?;

    let n = target.len();
    // small sets fall back to leave-one-out; every split keeps two samples
    let folds = folds.min(n);
    let acceptance = if folds >= 2 && n - n.div_ceil(folds) >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut accepted = 0usize;
        for f in 0..folds {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| k % folds == f);
            let train: Vec<Vec<f64>> = kept.iter().map(|&k| target[order[k]].clone()).collect();
            let model = fit_in(&ctx.augment(&train)?, cfg, ctx)?;
            for &k in &held {
                accepted += usize::from(model.accepts(&target[order[k]])?);
            }
        }
        accepted as f64 / n as f64
    } else {
        fraction_accepted(&full, target)?
    };
    Ok((acceptance - bg_rate, acceptance, bg_rate))
}

/// [`grid_search`] with caller-supplied scaling and augmentation.
pub fn grid_search_in(target: &[Vec<f64>], cfg: &TrainConfig, folds: usize, ctx: Context) -> Result<TrainConfig> {
    cfg.validate()?;
    let gammas: &[f64] = match cfg.kernel {
        KernelChoice::Rbf => &cfg.gamma_grid,
        KernelChoice::Linear => &cfg.gamma_grid[..1],
    };
    if cfg.nu_grid.len() == 1 && gammas.len() == 1 {
        return Ok(cfg.at(cfg.nu_grid[0], gammas[0]));
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for &nu in &cfg.nu_grid {
        for &gamma in gammas {
            let (objective, _, _) = grid_objective(target, &cfg.at(nu, gamma), folds, ctx)?;
            if best.is_none_or(|(b, _, _)| objective > b) {
                best = Some((objective, nu, gamma));
            }
        }
    }
    let (_, nu, gamma) = best.expect("nonempty grid");
    Ok(cfg.at(nu, gamma))
}

/// Picks `(ν, γ)` maximizing target acceptance minus background acceptance.
pub fn grid_search(target: &[Vec<f64>], cfg: &TrainConfig, folds: usize) -> Result<TrainConfig> {
    grid_search_in(target, cfg, folds, Context::default())
}
