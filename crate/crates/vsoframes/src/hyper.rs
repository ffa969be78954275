//! Posterior resampling of Dirichlet concentration parameters by univariate
//! slice sampling in log space, plus the cross-chain calibration harness.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::dirmult::{dm1_log_pmf_hist, grid_log_posterior};
use crate::error::{Error, Result};
use crate::model::{CountTables, DocMask, Hyperparams, ModelConfig, ModelVariant, SharedCounts};

/// Prior over a concentration parameter. The default is improper uniform on
/// the log scale (the target is the bare likelihood in log space); the
/// alternative is uniform on the linear scale, which adds the log-Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HyperPrior {
    #[default]
    UniformLog,
    UniformLinear,
}

/// When and how concentration parameters are resampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperSchedule {
    /// Sweeps before the first update.
    pub burnin: u64,
    /// Sweeps between updates thereafter.
    pub interval: u64,
    /// Slice updates per parameter per resampling event.
    pub slice_iters: u32,
    /// Initial stepping-out width, in log-concentration units.
    pub step_width: f64,
    /// Step-outs per side before the widen-and-retry fallback.
    pub max_stepouts: u32,
    /// Hard support window in log space. The likelihood flattens to a
    /// positive constant as the concentration grows, so an unbounded
    /// improper-uniform target is not integrable; this window truncates it
    /// far outside any plausible value.
    pub log_domain: (f64, f64),
    pub prior: HyperPrior,
}

impl Default for HyperSchedule {
    fn default() -> Self {
        HyperSchedule {
            burnin: 100,
            interval: 100,
            slice_iters: 10,
            step_width: 1.0,
            max_stepouts: 32,
            log_domain: (-30.0, 30.0),
            prior: HyperPrior::default(),
        }
    }
}

impl HyperSchedule {
    /// Whether iteration `t` (1-based, counted after the sweep) is a
    /// resampling event: none before burn-in, then exactly every `interval`.
    pub fn due(&self, iteration: u64) -> bool {
        iteration >= self.burnin && (iteration - self.burnin).is_multiple_of(self.interval.max(1))
    }
}

fn slice_step(
    f: &mut dyn FnMut(f64) -> f64,
    x0: f64,
    fx0: f64,
    width: f64,
    max_stepouts: u32,
    domain: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let y = fx0 + rng.random::<f64>().ln();

    // Stepping out, clipped to the domain.
    let mut l = x0 - width * rng.random::<f64>();
    let mut r = l + width;
    let mut expand = |l: &mut f64, r: &mut f64, width: f64| -> bool {
        let mut steps = 0;
        loop {
            if *l <= domain.0 {
                *l = domain.0;
                break;
            }
            if f(*l) <= y {
                break;
            }
            *l -= width;
            steps += 1;
            if steps > max_stepouts {
                return false;
            }
        }
        steps = 0;
        loop {
            if *r >= domain.1 {
                *r = domain.1;
                break;
            }
            if f(*r) <= y {
                break;
            }
            *r += width;
            steps += 1;
            if steps > max_stepouts {
                return false;
            }
        }
        true
    };
    if !expand(&mut l, &mut r, width) {
        // Widen and retry once with a span covering the whole failed search.
        let wide = width * max_stepouts as f64;
        l = x0 - wide * rng.random::<f64>();
        r = l + wide;
        if !expand(&mut l, &mut r, wide) {
            return Err(Error::Numeric(
                "slice sampler exceeded the step-out budget twice".into(),
            ));
        }
    }

    // Shrinkage.
    loop {
        let x1 = l + rng.random::<f64>() * (r - l);
        let fx1 = f(x1);
        if fx1 > y {
            return Ok((x1, fx1));
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
        if (r - l) < 1e-300 {
            return Ok((x0, fx0));
        }
    }
}

/// Run `schedule.slice_iters` univariate slice updates (stepping out, then
/// shrinkage) on the given log density, starting from `x0`. The returned
/// point always has a finite density.
pub fn slice_sample_scalar(
    mut log_density: impl FnMut(f64) -> f64,
    x0: f64,
    schedule: &HyperSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut x = x0;
    let mut fx = log_density(x);
    if !fx.is_finite() {
        return Err(Error::Numeric(format!(
            "slice sampler started at x0={x0} where the log density is {fx}"
        )));
    }
    for _ in 0..schedule.slice_iters {
        let (x1, fx1) = slice_step(
            &mut log_density,
            x,
            fx,
            schedule.step_width,
            schedule.max_stepouts,
            schedule.log_domain,
            rng,
        )?;
        x = x1;
        fx = fx1;
    }
    Ok(x)
}

/// Count groups in histogram form: the likelihood of a symmetric
/// concentration is the sum of single-path DM terms over the groups.
#[derive(Clone, Debug, Default)]
pub struct GroupedCounts {
    groups: Vec<GroupHist>,
}

#[derive(Clone, Debug)]
struct GroupHist {
    hist: Vec<(u32, u32)>,
    total: u64,
    dim: usize,
}

impl GroupedCounts {
    pub fn push_counts(&mut self, counts: impl IntoIterator<Item = u32>, dim: usize) {
        let mut hist: BTreeMap<u32, u32> = BTreeMap::new();
        let mut total = 0u64;
        for c in counts {
            if c > 0 {
                *hist.entry(c).or_insert(0) += 1;
                total += c as u64;
            }
        }
        self.groups.push(GroupHist {
            hist: hist.into_iter().collect(),
            total,
            dim,
        });
    }

    pub fn log_likelihood(&self, per_component: f64) -> f64 {
        self.groups
            .iter()
            .map(|g| dm1_log_pmf_hist(&g.hist, g.total, g.dim, per_component))
            .sum()
    }

    /// The slice target over the log concentration.
    pub fn log_target(&self, prior: HyperPrior) -> impl Fn(f64) -> f64 + '_ {
        move |la: f64| {
            let ll = self.log_likelihood(la.exp());
            match prior {
                HyperPrior::UniformLog => ll,
                HyperPrior::UniformLinear => ll + la,
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(|g| g.total == 0)
    }
}

/// Document-frame count groups (one group per document), respecting a mask.
pub fn doc_frame_groups(tables: &CountTables, mask: Option<&DocMask>) -> GroupedCounts {
    let mut grouped = GroupedCounts::default();
    let docs = tables.docs.doc_total.len();
    let frames = tables.docs.frames;
    for d in 0..docs {
        let row = tables.docs.row(d);
        match mask {
            Some(m) => {
                let dim = m.allowed_count[d] as usize;
                if dim == 0 {
                    continue;
                }
                grouped.push_counts(
                    row.iter()
                        .zip(&m.allowed[d])
                        .filter_map(|(&c, &ok)| ok.then_some(c)),
                    dim,
                );
            }
            None => grouped.push_counts(row.iter().copied(), frames),
        }
    }
    grouped
}

/// Word count groups for the beta likelihood: per (frame, position) for
/// models 0/1, per class for model 2.
pub fn word_groups(tables: &CountTables, config: &ModelConfig, vocab_real: usize) -> GroupedCounts {
    let word_dim = config.word_dim(vocab_real);
    let mut grouped = GroupedCounts::default();
    match config.variant {
        ModelVariant::Independent | ModelVariant::DocTuple => {
            let slots = config.frames * 3;
            let mut hists: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); slots];
            for w in tables.shared.word_fa.sorted_words() {
                let block = tables.shared.word_fa.block(WordId(w)).unwrap();
                for (slot, &c) in block.iter().enumerate() {
                    if c > 0 {
                        *hists[slot].entry(c).or_insert(0) += 1;
                    }
                }
            }
            for (slot, hist) in hists.into_iter().enumerate() {
                grouped.groups.push(GroupHist {
                    hist: hist.into_iter().collect(),
                    total: tables.shared.fa_total[slot] as u64,
                    dim: word_dim,
                });
            }
        }
        ModelVariant::DocTupleClass => {
            let classes = config.classes;
            let mut hists: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); classes];
            for w in tables.shared.class_word.sorted_words() {
                let block = tables.shared.class_word.block(WordId(w)).unwrap();
                for (c, &n) in block.iter().enumerate() {
                    if n > 0 {
                        *hists[c].entry(n).or_insert(0) += 1;
                    }
                }
            }
            for (c, hist) in hists.into_iter().enumerate() {
                grouped.groups.push(GroupHist {
                    hist: hist.into_iter().collect(),
                    total: tables.shared.class_total[c] as u64,
                    dim: word_dim,
                });
            }
        }
    }
    grouped
}

/// Linker count groups for one argument position (model 2): one group per
/// frame, over classes.
pub fn link_groups(tables: &CountTables, config: &ModelConfig, position: usize) -> GroupedCounts {
    let mut grouped = GroupedCounts::default();
    for f in 0..config.frames {
        grouped.push_counts(
            (0..config.classes).map(|c| tables.shared.link(f, position, c)),
            config.classes,
        );
    }
    grouped
}

fn resample_concentration(
    grouped: &GroupedCounts,
    current: f64,
    schedule: &HyperSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if grouped.is_empty() {
        return Ok(current);
    }
    let target = grouped.log_target(schedule.prior);
    let la = slice_sample_scalar(&target, current.ln(), schedule, rng)?;
    Ok(la.exp())
}

/// Slice-resample alpha against the per-document frame counts; the new value
/// is stored in `hypers` and returned. Resampled concentrations are strictly
/// positive by construction.
pub fn resample_alpha(
    tables: &CountTables,
    mask: Option<&DocMask>,
    hypers: &mut Hyperparams,
    schedule: &HyperSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let grouped = doc_frame_groups(tables, mask);
    hypers.alpha = resample_concentration(&grouped, hypers.alpha, schedule, rng)?;
    Ok(hypers.alpha)
}

/// Slice-resample beta against the word counts (frame-argument groups for
/// models 0/1, class groups for model 2).
pub fn resample_beta(
    tables: &CountTables,
    config: &ModelConfig,
    vocab_real: usize,
    hypers: &mut Hyperparams,
    schedule: &HyperSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let grouped = word_groups(tables, config, vocab_real);
    hypers.beta = resample_concentration(&grouped, hypers.beta, schedule, rng)?;
    Ok(hypers.beta)
}

/// Slice-resample one gamma (model 2) against its linker counts.
pub fn resample_gamma(
    tables: &CountTables,
    config: &ModelConfig,
    position: usize,
    hypers: &mut Hyperparams,
    schedule: &HyperSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let grouped = link_groups(tables, config, position);
    hypers.gamma[position] =
        resample_concentration(&grouped, hypers.gamma[position], schedule, rng)?;
    Ok(hypers.gamma[position])
}

/// How calibration chains are initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QqInit {
    /// Start every chain at this concentration value.
    Value(f64),
    /// Start every chain at the grid-posterior mode.
    GridMode,
}

#[derive(Clone, Debug)]
pub struct QqOptions {
    pub true_alpha: f64,
    pub groups: usize,
    pub obs_per_group: usize,
    pub dim: usize,
    pub chains: usize,
    pub iters: usize,
    pub init: QqInit,
    pub seed: u64,
    /// Log-concentration window of the reference grid. With an improper
    /// uniform prior the likelihood plateaus for large concentrations, so
    /// the window is part of what "the posterior" means here; the chains are
    /// run over the same window.
    pub grid_window: (f64, f64),
}

impl Default for QqOptions {
    fn default() -> Self {
        QqOptions {
            true_alpha: 1.0,
            groups: 10,
            obs_per_group: 10,
            dim: 10,
            chains: 500,
            iters: 10,
            init: QqInit::GridMode,
            seed: 0,
            grid_window: (-6.0, 4.0),
        }
    }
}

/// Cross-chain states at one iteration, paired with matching grid-posterior
/// quantiles, plus the Kolmogorov-Smirnov distance between them.
#[derive(Clone, Debug)]
pub struct QqIteration {
    pub iteration: usize,
    /// Sorted chain states (log concentration).
    pub states: Vec<f64>,
    /// Grid-posterior quantiles at ranks (i - 0.5) / n.
    pub posterior_quantiles: Vec<f64>,
    pub ks_stat: f64,
    pub ks_p: f64,
}

#[derive(Clone, Debug)]
pub struct QqResult {
    pub dataset: Vec<Vec<u32>>,
    pub grid: Vec<f64>,
    pub grid_masses: Vec<f64>,
    /// Grid-posterior mode, in log space.
    pub map_log_alpha: f64,
    pub iterations: Vec<QqIteration>,
}

/// Asymptotic Kolmogorov-Smirnov p-value for a one-sample test.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

// The grid posterior is treated as a continuous distribution whose CDF rises
// linearly across each cell: F(grid[k]) = cum[k], with the k-th point's mass
// spread over (grid[k-1], grid[k]]. grid_cdf and grid_quantile are exact
// inverses under this convention.

/// Piecewise-linear CDF of the grid posterior at `x`.
fn grid_cdf(grid: &[f64], cum: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return if x == grid[0] { cum[0] } else { 0.0 };
    }
    if x >= *grid.last().unwrap() {
        return 1.0;
    }
    let j = grid.partition_point(|&g| g < x); // grid[j-1] < x <= grid[j]
    let (g0, g1) = (grid[j - 1], grid[j]);
    let (c0, c1) = (cum[j - 1], cum[j]);
    c0 + (c1 - c0) * (x - g0) / (g1 - g0)
}

/// Inverse of the piecewise-linear CDF.
fn grid_quantile(grid: &[f64], cum: &[f64], p: f64) -> f64 {
    let j = cum.partition_point(|&c| c < p); // cum[j] >= p
    if j == 0 {
        return grid[0];
    }
    if j >= grid.len() {
        return *grid.last().unwrap();
    }
    let (c0, c1) = (cum[j - 1], cum[j]);
    let (g0, g1) = (grid[j - 1], grid[j]);
    if c1 <= c0 {
        return g1;
    }
    g0 + (g1 - g0) * ((p - c0) / (c1 - c0)).clamp(0.0, 1.0)
}

/// Sample one Dirichlet-multinomial count vector through the Polya urn.
fn sample_dm_counts(
    rng: &mut ChaCha8Rng,
    per_component: f64,
    dim: usize,
    draws: usize,
) -> Vec<u32> {
    let mut counts = vec![0u32; dim];
    for drawn in 0..draws {
        let denom = per_component * dim as f64 + drawn as f64;
        let mut u = rng.random::<f64>() * denom;
        let mut pick = dim - 1;
        for (k, &c) in counts.iter().enumerate() {
            let w = per_component + c as f64;
            if u < w {
                pick = k;
                break;
            }
            u -= w;
        }
        counts[pick] += 1;
    }
    counts
}

/// The slice-sampler calibration experiment: simulate a grouped DM dataset
/// from a known concentration, run independent slice chains on log alpha,
/// and compare the cross-chain state distribution per iteration against the
/// near-exact grid posterior.
pub fn calibration_qq(opts: &QqOptions, schedule: &HyperSchedule) -> Result<QqResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dataset: Vec<Vec<u32>> = (0..opts.groups)
        .map(|_| sample_dm_counts(&mut rng, opts.true_alpha, opts.dim, opts.obs_per_group))
        .collect();

    let (lo, hi) = opts.grid_window;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::Numeric("empty grid window".into()));
    }
    let points = 2001usize;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let grid_masses = grid_log_posterior(&dataset, &grid)?;
    let mut cum = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for &m in &grid_masses {
        acc += m;
        cum.push(acc);
    }
    let map_idx = grid_masses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let map_log_alpha = grid[map_idx];

    let mut grouped = GroupedCounts::default();
    for g in &dataset {
        grouped.push_counts(g.iter().copied(), opts.dim);
    }
    let target = grouped.log_target(schedule.prior);

    // The chains must sample the same truncated measure the grid posterior
    // represents: with weak data the likelihood flattens to a plateau for
    // large concentrations, so the support window is part of the target.
    let mut schedule = *schedule;
    schedule.log_domain = (grid[0], *grid.last().unwrap());

    let init_la = match opts.init {
        QqInit::Value(alpha) => alpha.ln(),
        QqInit::GridMode => map_log_alpha,
    };

    let mut states = vec![init_la; opts.chains];
    let mut fvals = vec![target(init_la); opts.chains];
    let mut chain_rngs: Vec<ChaCha8Rng> = (0..opts.chains)
        .map(|c| {
            ChaCha8Rng::seed_from_u64(
                opts.seed ^ (c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )
        })
        .collect();

    let mut iterations = Vec::with_capacity(opts.iters + 1);
    let snapshot = |iter_no: usize, states: &[f64]| -> QqIteration {
        let mut sorted = states.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let posterior_quantiles: Vec<f64> = (0..n)
            .map(|i| grid_quantile(&grid, &cum, (i as f64 + 0.5) / n as f64))
            .collect();
        let mut d: f64 = 0.0;
        for (i, &x) in sorted.iter().enumerate() {
            let fx = grid_cdf(&grid, &cum, x);
            d = d.max((fx - i as f64 / n as f64).abs());
            d = d.max(((i as f64 + 1.0) / n as f64 - fx).abs());
        }
        QqIteration {
            iteration: iter_no,
            states: sorted,
            posterior_quantiles,
            ks_stat: d,
            ks_p: ks_p_value(d, n),
        }
    };
    iterations.push(snapshot(0, &states));

    for it in 1..=opts.iters {
        for c in 0..opts.chains {
            let (x1, fx1) = slice_step(
                &mut |x| target(x),
                states[c],
                fvals[c],
                schedule.step_width,
                schedule.max_stepouts,
                schedule.log_domain,
                &mut chain_rngs[c],
            )?;
            states[c] = x1;
            fvals[c] = fx1;
        }
        iterations.push(snapshot(it, &states));
    }

    Ok(QqResult {
        dataset,
        grid,
        grid_masses,
        map_log_alpha,
        iterations,
    })
}

/// Write the QQ table as CSV: (iteration, chain_quantile, posterior_quantile,
/// ks_statistic).
pub fn write_qq_csv(result: &QqResult, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "iteration,chain_quantile,posterior_quantile,ks_statistic"
    )
    .map_err(|e| Error::io(path, e))?;
    for it in &result.iterations {
        for (state, pq) in it.states.iter().zip(&it.posterior_quantiles) {
            writeln!(out, "{},{},{},{}", it.iteration, state, pq, it.ks_stat)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
