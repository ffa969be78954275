//! Dirichlet-multinomial numerics.
//!
//! Everything is computed in log-gamma space so that count totals in the
//! millions stay representable. The central quantities are the DM log PMF
//! over count vectors, its "single path" variant (the probability of one
//! specific sequence with those counts), the posterior predictive of the
//! next draw, and a grid posterior over symmetric concentration parameters.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A Dirichlet prior, either symmetric (one scalar per component) or a full
/// vector. Full vectors may contain zeros: a zero component contributes
/// nothing when its count is zero and forces the density to negative
/// infinity otherwise (this is what a label mask produces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DirichletPrior {
    Symmetric { per_component: f64, dim: usize },
    Full(Vec<f64>),
}

impl DirichletPrior {
    pub fn symmetric(per_component: f64, dim: usize) -> Self {
        DirichletPrior::Symmetric { per_component, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            DirichletPrior::Symmetric { dim, .. } => *dim,
            DirichletPrior::Full(v) => v.len(),
        }
    }

    /// The concentration parameter: the sum of all components.
    pub fn concentration(&self) -> f64 {
        match self {
            DirichletPrior::Symmetric { per_component, dim } => per_component * *dim as f64,
            DirichletPrior::Full(v) => v.iter().sum(),
        }
    }

    pub fn component(&self, k: usize) -> f64 {
        match self {
            DirichletPrior::Symmetric { per_component, .. } => *per_component,
            DirichletPrior::Full(v) => v[k],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DirichletPrior::Symmetric { per_component, dim } => {
                *per_component > 0.0 && per_component.is_finite() && *dim > 0
            }
            // Zeros are allowed in full vectors (masked priors); negatives are not.
            DirichletPrior::Full(v) => {
                !v.is_empty() && v.iter().all(|&a| a >= 0.0 && a.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Numeric(format!("invalid Dirichlet prior: {self:?}")))
        }
    }
}

/// log B(alpha) = sum_k log Gamma(alpha_k) - log Gamma(sum_k alpha_k).
pub fn log_multivariate_beta(alpha: &[f64]) -> Result<f64> {
    if alpha.is_empty() || alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::Numeric(
            "log_multivariate_beta requires strictly positive components".into(),
        ));
    }
    let total: f64 = alpha.iter().sum();
    Ok(alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(total))
}

fn check_dims(counts: &[u32], prior: &DirichletPrior) -> Result<()> {
    prior.validate()?;
    if counts.len() != prior.dim() {
        return Err(Error::Numeric(format!(
            "dimension mismatch: {} counts vs {} prior components",
            counts.len(),
            prior.dim()
        )));
    }
    Ok(())
}

/// Log PMF of the Dirichlet-multinomial (multivariate Polya) distribution:
/// log of [N!/prod x_k!] [Gamma(A)/Gamma(A+N)] prod_k Gamma(a_k+x_k)/Gamma(a_k).
pub fn dm_log_pmf(counts: &[u32], prior: &DirichletPrior) -> Result<f64> {
    check_dims(counts, prior)?;
    let total: u64 = counts.iter().map(|&x| x as u64).sum();
    let mut log_coef = ln_gamma(total as f64 + 1.0);
    for &x in counts {
        log_coef -= ln_gamma(x as f64 + 1.0);
    }
    Ok(log_coef + dm1_checked(counts, prior))
}

/// Log probability of one specific sequence having the given counts: the DM
/// PMF without the multinomial coefficient.
pub fn dm1_log_pmf(counts: &[u32], prior: &DirichletPrior) -> Result<f64> {
    check_dims(counts, prior)?;
    Ok(dm1_checked(counts, prior))
}

fn dm1_checked(counts: &[u32], prior: &DirichletPrior) -> f64 {
    let a = prior.concentration();
    let total: u64 = counts.iter().map(|&x| x as u64).sum();
    let mut acc = ln_gamma(a) - ln_gamma(a + total as f64);
    for (k, &x) in counts.iter().enumerate() {
        if x == 0 {
            continue; // Gamma(a_k + 0) / Gamma(a_k) = 1, including a_k = 0
        }
        let ak = prior.component(k);
        if ak == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += ln_gamma(ak + x as f64) - ln_gamma(ak);
    }
    acc
}

/// Single-path DM log PMF for a symmetric prior given only the nonzero count
/// histogram: `hist` holds (count value, multiplicity) pairs for the nonzero
/// components, `total` their sum, and `dim` the full dimension.
pub fn dm1_log_pmf_hist(hist: &[(u32, u32)], total: u64, dim: usize, per_component: f64) -> f64 {
    let a = per_component * dim as f64;
    let base = ln_gamma(per_component);
    let mut acc = ln_gamma(a) - ln_gamma(a + total as f64);
    for &(value, mult) in hist {
        acc += mult as f64 * (ln_gamma(per_component + value as f64) - base);
    }
    acc
}

/// Probability that the next draw is outcome `k` given previous draws with
/// counts `held_out`: (a_k + n_k) / (A + N).
pub fn posterior_predictive(k: usize, held_out: &[u32], prior: &DirichletPrior) -> Result<f64> {
    check_dims(held_out, prior)?;
    if k >= prior.dim() {
        return Err(Error::Numeric(format!(
            "outcome index {k} out of range for dimension {}",
            prior.dim()
        )));
    }
    let total: u64 = held_out.iter().map(|&x| x as u64).sum();
    Ok((prior.component(k) + held_out[k] as f64) / (prior.concentration() + total as f64))
}

/// log(sum_i exp(x_i)) computed stably.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior over candidate log-concentrations for a symmetric Dirichlet,
/// evaluated on a grid. For each grid point, the log likelihood is the sum of
/// single-path DM log PMFs over the groups; the result is normalized over the
/// grid to a probability vector.
pub fn grid_log_posterior(groups: &[Vec<u32>], log_grid: &[f64]) -> Result<Vec<f64>> {
    if log_grid.is_empty() {
        return Err(Error::Numeric("empty concentration grid".into()));
    }
    if log_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Numeric(
            "concentration grid must be strictly increasing".into(),
        ));
    }
    let dim = match groups.first() {
        Some(g) => g.len(),
        None => {
            // No data: uniform over the grid.
            return Ok(vec![1.0 / log_grid.len() as f64; log_grid.len()]);
        }
    };
    if groups.iter().any(|g| g.len() != dim) {
        return Err(Error::Numeric("groups must share one dimension".into()));
    }
    let log_liks: Vec<f64> = log_grid
        .iter()
        .map(|&la| {
            let prior = DirichletPrior::symmetric(la.exp(), dim);
            groups.iter().map(|g| dm1_checked(g, &prior)).sum()
        })
        .collect();
    let norm = log_sum_exp(&log_liks);
    Ok(log_liks.iter().map(|&l| (l - norm).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sym(a: f64, dim: usize) -> DirichletPrior {
        DirichletPrior::symmetric(a, dim)
    }

    #[test]
    fn ln_gamma_matches_integer_factorials() {
        let mut fact = 1f64;
        for n in 1u32..=20 {
            fact *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            let want = fact.ln();
            assert!(
                (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                "lgamma({}) = {got}, ln({n}!) = {want}",
                n + 1
            );
        }
    }

    #[test]
    fn log_beta_small_cases() {
        assert_abs_diff_eq!(
            log_multivariate_beta(&[1.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            log_multivariate_beta(&[2.0, 2.0]).unwrap(),
            (1.0f64 / 6.0).ln(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            log_multivariate_beta(&[1.0, 1.0, 1.0]).unwrap(),
            -(2.0f64.ln()),
            epsilon = 1e-13
        );
    }

    #[test]
    fn log_beta_rejects_nonpositive() {
        assert!(log_multivariate_beta(&[1.0, 0.0]).is_err());
        assert!(log_multivariate_beta(&[1.0, -2.0]).is_err());
        assert!(log_multivariate_beta(&[]).is_err());
    }

    #[test]
    fn dm_single_draw_is_uniform() {
        // One draw under a symmetric prior lands uniformly.
        assert_abs_diff_eq!(
            dm_log_pmf(&[1, 0], &sym(1.0, 2)).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn dm_two_same_draws() {
        // Polya enumeration of the 4 length-2 sequences gives P(x=(2,0)) = 1/3.
        assert_abs_diff_eq!(
            dm_log_pmf(&[2, 0], &sym(1.0, 2)).unwrap(),
            (1.0f64 / 3.0).ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn dm_normalizes_over_count_vectors() {
        let prior = sym(1.0, 3);
        let mut mass = 0.0;
        for x0 in 0..=2u32 {
            for x1 in 0..=(2 - x0) {
                let x2 = 2 - x0 - x1;
                mass += dm_log_pmf(&[x0, x1, x2], &prior).unwrap().exp();
            }
        }
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dm_rejects_dimension_mismatch() {
        assert!(dm_log_pmf(&[1, 0, 0], &sym(1.0, 2)).is_err());
    }

    #[test]
    fn dm1_empty_counts() {
        assert_abs_diff_eq!(
            dm1_log_pmf(&[0, 0, 0], &sym(0.7, 3)).unwrap(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn dm1_small_cases() {
        assert_abs_diff_eq!(
            dm1_log_pmf(&[1, 0], &sym(1.0, 2)).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-13
        );
        // A specific 2-symbol sequence under the urn: (1/2)(1/3) = 1/6.
        assert_abs_diff_eq!(
            dm1_log_pmf(&[1, 1], &sym(1.0, 2)).unwrap(),
            (1.0f64 / 6.0).ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn dm1_hist_agrees_with_dense() {
        let counts = [4u32, 0, 1, 7, 0, 1];
        let hist = [(4u32, 1u32), (1, 2), (7, 1)];
        let dense = dm1_log_pmf(&counts, &sym(0.3, 6)).unwrap();
        let sparse = dm1_log_pmf_hist(&hist, 13, 6, 0.3);
        assert_abs_diff_eq!(dense, sparse, epsilon = 1e-12);
    }

    #[test]
    fn zero_prior_components() {
        let prior = DirichletPrior::Full(vec![1.0, 0.0, 2.0]);
        // Zero component with zero count: defined.
        let ok = dm1_log_pmf(&[2, 0, 1], &prior).unwrap();
        assert!(ok.is_finite());
        // Zero component with positive count: density -inf.
        assert_eq!(dm1_log_pmf(&[2, 1, 0], &prior).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn predictive_prior_mean() {
        let prior = sym(2.0, 3);
        for k in 0..3 {
            assert_abs_diff_eq!(
                posterior_predictive(k, &[0, 0, 0], &prior).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn predictive_matches_polya_urn_monte_carlo() {
        // Independent oracle: simulate the next draw from the urn 1e6 times.
        // With alpha = (1,1,1) and two previous draws of outcome 0, the urn
        // holds weights (3,1,1), so the predictive is 3/5.
        let prior = sym(1.0, 3);
        let held = [2u32, 0, 0];
        let weights = [3.0, 1.0, 1.0];
        let wsum: f64 = weights.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..draws {
            let mut u = rng.random::<f64>() * wsum;
            let mut pick = weights.len() - 1;
            for (k, &w) in weights.iter().enumerate() {
                if u < w {
                    pick = k;
                    break;
                }
                u -= w;
            }
            if pick == 0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        let p = posterior_predictive(0, &held, &prior).unwrap();
        assert_abs_diff_eq!(p, 0.6, epsilon = 1e-14);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "freq {freq} vs p {p}");
    }

    #[test]
    fn predictive_sums_to_one() {
        let prior = sym(0.4, 4);
        let held = [3u32, 0, 9, 1];
        let total: f64 = (0..4)
            .map(|k| posterior_predictive(k, &held, &prior).unwrap())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn predictive_large_concentration_limit() {
        let prior = sym(1e8, 5);
        let held = [40u32, 1, 7, 0, 2];
        for k in 0..5 {
            let p = posterior_predictive(k, &held, &prior).unwrap();
            assert!((p - 0.2).abs() < 1e-6, "k={k}: {p}");
        }
    }

    #[test]
    fn predictive_index_out_of_range() {
        assert!(posterior_predictive(2, &[0, 0], &sym(1.0, 2)).is_err());
    }

    #[test]
    fn grid_singleton_gets_all_mass() {
        let groups = vec![vec![3u32, 1, 0]];
        let masses = grid_log_posterior(&groups, &[0.0]).unwrap();
        assert_eq!(masses, vec![1.0]);
    }

    #[test]
    fn grid_masses_sum_to_one() {
        let groups = vec![vec![3u32, 1, 0], vec![0, 0, 5], vec![2, 2, 2]];
        let grid: Vec<f64> = (0..50).map(|i| -3.0 + i as f64 * 0.2).collect();
        let masses = grid_log_posterior(&groups, &grid).unwrap();
        let total: f64 = masses.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_rejects_bad_grids() {
        let groups = vec![vec![1u32, 0]];
        assert!(grid_log_posterior(&groups, &[]).is_err());
        assert!(grid_log_posterior(&groups, &[0.0, 0.0]).is_err());
        assert!(grid_log_posterior(&groups, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn grid_argmax_matches_dense_scan() {
        // Simulate grouped counts from a known concentration via the urn,
        // then check the coarse-grid argmax sits within one step of the
        // maximizer found by an independent dense scan.
        let true_alpha = 0.9f64.exp();
        let dim = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut groups = Vec::new();
        for _ in 0..12 {
            let mut counts = vec![0u32; dim];
            for _ in 0..15 {
                let total: u64 = counts.iter().map(|&c| c as u64).sum();
                let denom = true_alpha * dim as f64 + total as f64;
                let mut u = rng.random::<f64>() * denom;
                let mut pick = dim - 1;
                for (k, &c) in counts.iter().enumerate() {
                    let w = true_alpha + c as f64;
                    if u < w {
                        pick = k;
                        break;
                    }
                    u -= w;
                }
                counts[pick] += 1;
            }
            groups.push(counts);
        }
        let step = 0.25;
        let coarse: Vec<f64> = (0..33).map(|i| -4.0 + i as f64 * step).collect();
        let masses = grid_log_posterior(&groups, &coarse).unwrap();
        let coarse_best = coarse[argmax(&masses)];

        let dense: Vec<f64> = (0..8001).map(|i| -4.0 + i as f64 * 0.001).collect();
        let dense_masses = grid_log_posterior(&groups, &dense).unwrap();
        let dense_best = dense[argmax(&dense_masses)];

        assert!(
            (coarse_best - dense_best).abs() <= step + 1e-9,
            "coarse argmax {coarse_best} vs dense {dense_best}"
        );
    }

    fn argmax(xs: &[f64]) -> usize {
        xs.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    }

    fn log_multinomial_coef(counts: &[u32]) -> f64 {
        let total: u64 = counts.iter().map(|&x| x as u64).sum();
        ln_gamma(total as f64 + 1.0)
            - counts
                .iter()
                .map(|&x| ln_gamma(x as f64 + 1.0))
                .sum::<f64>()
    }

    proptest! {
        #[test]
        fn path_consistency(counts in proptest::collection::vec(0u32..8, 1..5),
                            alpha in 0.05f64..20.0) {
            let prior = sym(alpha, counts.len());
            let dm = dm_log_pmf(&counts, &prior).unwrap();
            let dm1 = dm1_log_pmf(&counts, &prior).unwrap();
            prop_assert!((dm - (log_multinomial_coef(&counts) + dm1)).abs() < 1e-12);
        }

        #[test]
        fn urn_equivalence(counts in proptest::collection::vec(0u32..6, 1..5),
                           alpha in 0.05f64..20.0) {
            // dm1 of the counts equals the summed log posterior predictive of
            // any sequence realizing them; use the in-order sequence.
            let prior = sym(alpha, counts.len());
            let dm1 = dm1_log_pmf(&counts, &prior).unwrap();
            let mut sofar = vec![0u32; counts.len()];
            let mut chain = 0.0;
            for (k, &x) in counts.iter().enumerate() {
                for _ in 0..x {
                    chain += posterior_predictive(k, &sofar, &prior).unwrap().ln();
                    sofar[k] += 1;
                }
            }
            prop_assert!((dm1 - chain).abs() < 1e-12, "dm1 {} chain {}", dm1, chain);
        }
    }
}
