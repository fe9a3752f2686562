//! Intrinsic dimension estimation with locally adaptive uniform-neighborhood
//! selection.
//!
//! The estimator alternates two steps until the dimension estimate settles:
//!
//! 1. For each point, grow the neighborhood order k until a likelihood-ratio
//!    test rejects local homogeneity of the sampling intensity, comparing the
//!    point's hyperspherical shell volumes against those of its (k+1)-th
//!    neighbor. The first rejecting k is that point's `k*`.
//! 2. Count sample points inside nested balls of radius ratio `tau` at every
//!    point and update the dimension with the closed-form binomial estimate
//!    d = ln(sum k_A / sum k_B) / ln(tau).
//!
//! Everything here is deterministic given the input cloud and configuration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::dataset::PointCloud;
use crate::neighbors::{build_neighbor_table, NeighborTable};

/// Tuning knobs of the adaptive estimator.
#[derive(Debug, Clone)]
pub struct AbideConfig {
    /// Significance level of the per-point homogeneity test, in (0, 1).
    pub alpha: f64,
    /// Ball radius ratio r_A / r_B, in (0, 1).
    pub tau: f64,
    /// Convergence tolerance on |d_{t+1} - d_t|.
    pub d_tolerance: f64,
    pub max_iterations: usize,
    /// Smallest tested neighbor order.
    pub k_min: usize,
    /// Cap on the neighbor order; `None` means min(n - 2, 1000).
    pub k_max: Option<usize>,
}

impl Default for AbideConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            tau: 0.5,
            d_tolerance: 1e-3,
            max_iterations: 100,
            k_min: 2,
            k_max: None,
        }
    }
}

impl AbideConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument("tau must lie in (0, 1)".into()));
        }
        if !(self.d_tolerance > 0.0) {
            return Err(Error::InvalidArgument("d_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        if self.k_min < 1 {
            return Err(Error::InvalidArgument("k_min must be at least 1".into()));
        }
        Ok(())
    }

    /// The neighbor-order cap actually used for an n-point cloud.
    pub fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or(1000).min(n.saturating_sub(2))
    }
}

/// Output of [`abide`].
#[derive(Debug, Clone)]
pub struct AbideResult {
    /// Final real-valued dimension estimate.
    pub d_hat: f64,
    /// Nearest integer to `d_hat`, floored at 1.
    pub d_star: usize,
    /// Per-point uniform-neighborhood orders from the final iteration.
    pub k_star: Vec<usize>,
    /// Dimension value after the bootstrap and after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Closed-form binomial dimension estimate with a flag for the boundary case
/// where the two counts coincide.
#[derive(Debug, Clone, Copy)]
pub struct BideEstimate {
    pub d_hat: f64,
    /// Set when sum(k_A) == sum(k_B); `d_hat` is then 0.
    pub ratio_one: bool,
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Natural log of the Gamma function for positive real arguments
/// (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0, "ln_gamma domain");
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (std::f64::consts::TAU).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Volume of the unit ball in `d` (real-valued) dimensions:
/// pi^(d/2) / Gamma(d/2 + 1).
pub fn unit_ball_volume(d: f64) -> f64 {
    debug_assert!(d > 0.0);
    (0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d + 1.0)).exp()
}

/// Inverse standard normal CDF (Wichura's PPND16 rational approximation,
/// absolute accuracy near machine precision).
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_461,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_545_5,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_87,
        0.026_532_189_526_576_123,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_9,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];

    fn ratio(num: &[f64; 8], den: &[f64; 8], r: f64) -> f64 {
        let mut n = num[7];
        let mut d = den[7];
        for i in (0..7).rev() {
            n = n * r + num[i];
            d = d * r + den[i];
        }
        n / d
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * ratio(&A, &B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        ratio(&C, &D, r)
    } else {
        r -= 5.0;
        ratio(&E, &F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Quantile of the chi-squared distribution with one degree of freedom.
///
/// Uses the identity q = z^2 with z the standard normal quantile of
/// (1 + p) / 2; relative error well below 1e-8.
pub fn chi2_quantile_1df(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let z = inverse_normal_cdf(0.5 * (1.0 + p));
    Ok(z * z)
}

// ---------------------------------------------------------------------------
// Shell volumes and the likelihood-ratio statistic
// ---------------------------------------------------------------------------

/// Volumes of the nested hyperspherical shells between consecutive neighbor
/// radii, v_j = Omega_d (r_j^d - r_{j-1}^d) with r_0 = 0.
pub fn shell_volumes(radii: &[f64], d: f64) -> Result<Vec<f64>> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let omega = unit_ball_volume(d);
    let mut prev = 0.0f64;
    let mut prev_pow = 0.0f64;
    let mut out = Vec::with_capacity(radii.len());
    for (j, &r) in radii.iter().enumerate() {
        if !r.is_finite() || r < 0.0 || r < prev {
            return Err(Error::InvalidArgument(format!(
                "radii must be non-negative and non-decreasing (violation at index {j})"
            )));
        }
        let pow = r.powf(d);
        out.push(omega * (pow - prev_pow));
        prev = r;
        prev_pow = pow;
    }
    Ok(out)
}

/// Likelihood-ratio statistic comparing the shell intensities of two points
/// at neighbor order `k`, given their cumulative shell volumes `v_i`, `v_j`.
///
/// Equal volumes give exactly 0; the statistic is symmetric in its volume
/// arguments and asymptotically chi-squared with one degree of freedom under
/// homogeneity.
pub fn lrt_statistic(k: usize, v_i: f64, v_j: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("shell count k must be positive".into()));
    }
    if !(v_i > 0.0 && v_i.is_finite() && v_j > 0.0 && v_j.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cumulative shell volumes must be positive, got {v_i} and {v_j}"
        )));
    }
    let kf = k as f64;
    let separate = kf * (kf / v_i).ln() + kf * (kf / v_j).ln();
    let pooled = 2.0 * kf * ((2.0 * kf) / (v_i + v_j)).ln();
    Ok((2.0 * (separate - pooled)).max(0.0))
}

// ---------------------------------------------------------------------------
// Per-point neighborhood selection
// ---------------------------------------------------------------------------

/// Powers r^d of every materialized neighbor radius, refreshed whenever the
/// running dimension changes. Shared across the per-point scans of one
/// iteration so each radius is exponentiated once.
struct PoweredRadii {
    flat: Vec<f64>,
    depth: usize,
}

impl PoweredRadii {
    fn compute(table: &NeighborTable, d: f64) -> Self {
        let depth = table.depth();
        let flat: Vec<f64> = (0..table.n())
            .into_par_iter()
            .flat_map_iter(|i| {
                table
                    .dists_row(i)
                    .iter()
                    .map(move |r| r.powf(d))
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { flat, depth }
    }

    #[inline]
    fn get(&self, row: usize, pos: usize) -> f64 {
        self.flat[row * self.depth + pos]
    }
}

fn leading_zeros(dists: &[f64]) -> usize {
    dists.iter().take_while(|&&r| r == 0.0).count()
}

/// Scan neighbor orders for one center until the homogeneity test rejects.
///
/// `center_dists` / `center_ids` describe the center's sorted neighbors
/// (which need not be a row of `table`, e.g. an out-of-sample point);
/// `table` supplies the shells of the comparison neighbors. Coincident
/// (zero-radius) leading neighbors are skipped on both sides so the
/// exponential shell likelihood stays well-defined. Returns the triggering
/// raw neighbor order, or `None` if no tested order rejects.
fn scan_k_star(
    center_dists: &[f64],
    center_ids: &[u32],
    table: &NeighborTable,
    powered: Option<&PoweredRadii>,
    d: f64,
    threshold: f64,
    k_min: usize,
    k_max: usize,
) -> Option<usize> {
    let omega = unit_ball_volume(d);
    let z_c = leading_zeros(center_dists);
    let depth = center_dists.len();

    let mut k = k_min;
    loop {
        let raw = z_c + k; // 1-based order of the outermost homogeneous shell
        if raw > k_max || raw >= depth {
            return None;
        }
        // raw-th neighbor radius sits at position raw - 1; the comparison
        // point is the next neighbor out.
        let r_center = center_dists[raw - 1];
        let j = center_ids[raw] as usize;
        let j_dists = table.dists_row(j);
        let z_j = leading_zeros(j_dists);
        let j_pos = z_j + k - 1;
        if j_pos >= table.depth() {
            return None;
        }
        let v_center = omega * r_center.powf(d);
        let v_j = omega
            * match powered {
                Some(p) => p.get(j, j_pos),
                None => j_dists[j_pos].powf(d),
            };
        if v_center > 0.0 && v_j > 0.0 {
            let stat = lrt_statistic(k, v_center, v_j).expect("positive volumes");
            if stat >= threshold {
                return Some(raw.min(k_max));
            }
        }
        k += 1;
    }
}

/// First neighbor order at which point `i` fails the homogeneity test at
/// dimension `d`; `k_max` when no tested order fails.
pub fn select_k_star(
    table: &NeighborTable,
    i: usize,
    d: f64,
    threshold: f64,
    config: &AbideConfig,
) -> Result<usize> {
    let k_max = config.k_max_for(table.n());
    if table.depth() < k_max + 1 {
        return Err(Error::TableTooShallow {
            depth: table.depth(),
            needed: k_max + 1,
        });
    }
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    Ok(scan_k_star(
        table.dists_row(i),
        table.ids_row(i),
        table,
        None,
        d,
        threshold,
        config.k_min,
        k_max,
    )
    .unwrap_or(k_max))
}

/// Out-of-sample variant of [`select_k_star`]: the center is described by its
/// own sorted distance/id row over the table's points. Returns `None` when no
/// order triggers so the caller can apply its fallback policy.
pub(crate) fn select_k_star_for_row(
    center_dists: &[f64],
    center_ids: &[u32],
    table: &NeighborTable,
    d: f64,
    threshold: f64,
    config: &AbideConfig,
) -> Option<usize> {
    let k_max = config.k_max_for(table.n() + 1);
    scan_k_star(
        center_dists,
        center_ids,
        table,
        None,
        d,
        threshold,
        config.k_min,
        k_max,
    )
}

// ---------------------------------------------------------------------------
// The dimension estimate and the fixed-point iteration
// ---------------------------------------------------------------------------

/// Binomial dimension estimate from per-point inner/outer ball counts.
pub fn bide(k_a: &[usize], k_b: &[usize], tau: f64) -> Result<BideEstimate> {
    if k_a.len() != k_b.len() {
        return Err(Error::DimensionMismatch {
            expected: k_b.len(),
            actual: k_a.len(),
        });
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument("tau must lie in (0, 1)".into()));
    }
    let sum_a: usize = k_a.iter().sum();
    let sum_b: usize = k_b.iter().sum();
    if sum_b == 0 {
        return Err(Error::InvalidArgument(
            "outer counts sum to zero; nothing to estimate from".into(),
        ));
    }
    if sum_a > sum_b {
        return Err(Error::InvalidArgument(format!(
            "inner counts ({sum_a}) exceed outer counts ({sum_b})"
        )));
    }
    if sum_a == 0 {
        return Err(Error::DegenerateRatio);
    }
    if sum_a == sum_b {
        log::warn!("inner and outer counts coincide; dimension estimate collapses to 0");
        return Ok(BideEstimate {
            d_hat: 0.0,
            ratio_one: true,
        });
    }
    Ok(BideEstimate {
        d_hat: ((sum_a as f64) / (sum_b as f64)).ln() / tau.ln(),
        ratio_one: false,
    })
}

/// Count of neighbors within `radius` (boundary ties inside) in a sorted row.
#[inline]
fn count_within(dists: &[f64], radius: f64) -> usize {
    dists.partition_point(|&d| d <= radius)
}

/// Run the adaptive estimator on a cloud.
pub fn abide(cloud: &PointCloud, config: &AbideConfig) -> Result<AbideResult> {
    config.validate()?;
    let n = cloud.n();
    if n < config.k_min + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least k_min + 2 = {} points, got {n}",
            config.k_min + 2
        )));
    }
    let k_max = config.k_max_for(n);
    if k_max < config.k_min {
        return Err(Error::InsufficientData(format!(
            "neighbor cap {k_max} below k_min {}",
            config.k_min
        )));
    }
    let table = build_neighbor_table(cloud, k_max + 1)?;
    abide_with_table(&table, config)
}

/// As [`abide`] but reusing a prebuilt table of depth at least
/// `k_max_for(n) + 1`.
pub fn abide_with_table(table: &NeighborTable, config: &AbideConfig) -> Result<AbideResult> {
    config.validate()?;
    let n = table.n();
    let k_max = config.k_max_for(n);
    if table.depth() < k_max + 1 {
        return Err(Error::TableTooShallow {
            depth: table.depth(),
            needed: k_max + 1,
        });
    }
    if (0..n).all(|i| *table.dists_row(i).last().unwrap() == 0.0) {
        return Err(Error::DegenerateGeometry(
            "every pairwise distance is zero".into(),
        ));
    }

    let threshold = chi2_quantile_1df(1.0 - config.alpha)?;
    let tau = config.tau;

    // Bootstrap: one closed-form estimate with a uniform neighbor order.
    let k_boot = 20.min(n - 2).max(1);
    let mut k_a = vec![0usize; n];
    let mut k_b = vec![0usize; n];
    for i in 0..n {
        let dists = table.dists_row(i);
        let r_b = dists[k_boot - 1];
        k_b[i] = k_boot;
        k_a[i] = count_within(dists, tau * r_b).min(k_boot);
    }
    let boot = bide(&k_a, &k_b, tau).map_err(|e| e.at_stage("estimation bootstrap"))?;
    if boot.ratio_one {
        return Err(Error::DegenerateGeometry(
            "bootstrap ball counts coincide at every radius ratio".into(),
        ));
    }
    let mut d = boot.d_hat;
    let mut trace = vec![d];
    let mut converged = false;
    let mut k_star = vec![k_max; n];

    for _ in 0..config.max_iterations {
        let powered = PoweredRadii::compute(table, d);
        k_star = (0..n)
            .into_par_iter()
            .map(|i| {
                scan_k_star(
                    table.dists_row(i),
                    table.ids_row(i),
                    table,
                    Some(&powered),
                    d,
                    threshold,
                    config.k_min,
                    k_max,
                )
                .unwrap_or(k_max)
            })
            .collect();

        let mut k_a = vec![0usize; n];
        let mut k_b = vec![0usize; n];
        for i in 0..n {
            let dists = table.dists_row(i);
            let ks = k_star[i];
            let r_b = dists[ks - 1];
            k_b[i] = ks;
            // Boundary ties count as inside; the min guards heavily
            // duplicated points where the tie rule would overshoot.
            k_a[i] = count_within(dists, tau * r_b).min(ks);
        }
        let est = bide(&k_a, &k_b, tau)?;
        if est.ratio_one {
            return Err(Error::DegenerateGeometry(
                "ball counts coincide for every point; geometry carries no scale".into(),
            ));
        }
        let d_next = est.d_hat;
        trace.push(d_next);
        let delta = (d_next - d).abs();
        d = d_next;
        if delta < config.d_tolerance {
            converged = true;
            break;
        }
    }

    Ok(AbideResult {
        d_hat: d,
        d_star: (d.round() as i64).max(1) as usize,
        k_star,
        trace,
        converged,
    })
}
