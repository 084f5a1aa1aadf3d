//! The headline experiments: the conditional-expectation gap between the
//! mostly-East and mostly-West dressings (the bad-configuration witness),
//! the order-parameter histogram, and the spectral contrast between the
//! constrained and unconstrained models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::constraint::VisibleSpec;
use crate::couplings::CouplingModel;
use crate::energy::{ew_flip, hessian, EnergyModel};
use crate::error::{Error, Result};
use crate::groundstate::{ground_pair, DescentOptions};
use crate::lattice::{build_box, LatticeBox, SpinConfig};
use crate::sampler::{
    assemble_dressed_model, bulk_tile, derive_seed, run_chain, sample_stats, ChainRun,
    DressingKind, FixedSpins, McParams, Observable, OutsideSpins, SampleStats,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Inputs of the discontinuity-gap experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapProbe {
    pub dimension: usize,
    pub coupling: CouplingModel,
    pub betas: Vec<f64>,
    /// Free-region radii; each a multiple of 4, increasing.
    pub radii: Vec<i64>,
    /// Gap threshold for the verdict.
    pub delta: f64,
    /// Width of the dressed shell beyond the largest radius (multiple of 4),
    /// so that the outermost free region is still fully dressed.
    pub margin: i64,
    pub mc: McParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Gap exceeds delta with 3 sigma confidence at the largest radius.
    Witnessed,
    /// Gap consistent with zero at the largest radius.
    Vanishes,
    Inconclusive,
}

/// One (radius, dressing) measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapCell {
    pub beta: f64,
    pub radius: i64,
    pub dressing: String,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub stats: SampleStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GapEstimate {
    pub radius: i64,
    pub gap: f64,
    pub stderr: f64,
}

/// Per-beta outcome of the gap probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeResult {
    pub beta: f64,
    pub radii: Vec<i64>,
    pub gaps: Vec<GapEstimate>,
    pub delta: f64,
    pub verdict: Verdict,
    pub seeds: Vec<u64>,
    pub cells: Vec<GapCell>,
}

/// Estimate E[sigma^(1) at the visible origin] under the mostly-East and
/// mostly-West dressings for every (beta, radius) and report the gap.
///
/// Geometry per radius r: hidden sites with sup-norm <= r are free, the
/// visible origin is free, the remaining visible sites inside r are frozen
/// to the doubly-alternating pattern, and everything beyond r (out to the
/// box edge at r_max + margin, and beyond via the 8-periodic bulk tile) is
/// fixed at the ME (resp. MW) ground-state angles.
pub fn discontinuity_gap(probe: &GapProbe) -> Result<Vec<ProbeResult>> {
    validate_gap_probe(probe)?;
    let r_max = *probe.radii.last().unwrap();
    let lattice = build_box(probe.dimension, r_max + probe.margin)?;
    let base = EnergyModel::constrained(lattice, probe.coupling, VisibleSpec::DoublyAlternating)?;
    let pair = ground_pair(&base, &DescentOptions::default())?;
    let me_state = pair.me.config.clone();
    let mw_state = ew_flip(&me_state);

    // every (beta, radius, dressing) cell is an independent chain
    let mut cells: Vec<(usize, f64, i64, DressingKind)> = Vec::new();
    for &beta in &probe.betas {
        for &radius in &probe.radii {
            for dressing in [DressingKind::Me, DressingKind::Mw] {
                cells.push((cells.len(), beta, radius, dressing));
            }
        }
    }

    let run_cell = |&(index, beta, radius, dressing): &(usize, f64, i64, DressingKind)| -> Result<GapCell> {
        let seed = derive_seed(probe.mc.seed, index as u64);
        let params = McParams {
            beta,
            seed,
            ..probe.mc
        };
        let (model, init) = gap_cell_model(
            lattice,
            probe.coupling,
            radius,
            &me_state,
            &mw_state,
            dressing,
        );
        let run = run_chain(&model, &init, &params, Observable::Sigma1Origin)?;
        Ok(GapCell {
            beta,
            radius,
            dressing: dressing.label(),
            seed,
            acceptance_rate: run.acceptance_rate,
            stats: run.stats,
        })
    };

    #[cfg(feature = "parallel")]
    let results: Vec<GapCell> = cells
        .par_iter()
        .map(run_cell)
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<GapCell> = cells.iter().map(run_cell).collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for &beta in &probe.betas {
        let per_beta: Vec<&GapCell> = results.iter().filter(|c| c.beta == beta).collect();
        let mut gaps = Vec::new();
        for &radius in &probe.radii {
            let me = per_beta
                .iter()
                .find(|c| c.radius == radius && c.dressing == "me")
                .unwrap();
            let mw = per_beta
                .iter()
                .find(|c| c.radius == radius && c.dressing == "mw")
                .unwrap();
            gaps.push(GapEstimate {
                radius,
                gap: me.stats.mean - mw.stats.mean,
                stderr: me.stats.stderr.hypot(mw.stats.stderr),
            });
        }
        let last = gaps.last().unwrap();
        let verdict = if last.gap - 3.0 * last.stderr > probe.delta {
            Verdict::Witnessed
        } else if last.gap.abs() <= 3.0 * last.stderr {
            Verdict::Vanishes
        } else {
            Verdict::Inconclusive
        };
        out.push(ProbeResult {
            beta,
            radii: probe.radii.clone(),
            gaps,
            delta: probe.delta,
            verdict,
            seeds: per_beta.iter().map(|c| c.seed).collect(),
            cells: per_beta.into_iter().cloned().collect(),
        });
    }
    Ok(out)
}

fn validate_gap_probe(probe: &GapProbe) -> Result<()> {
    let ok = !probe.radii.is_empty()
        && probe.radii.windows(2).all(|w| w[0] < w[1])
        && probe.radii.iter().all(|&r| r >= 4 && r % 4 == 0);
    if !ok {
        return Err(Error::InvalidRadii(probe.radii.clone()));
    }
    if probe.delta.is_nan() || probe.delta <= 0.0 {
        return Err(Error::InvalidDelta(probe.delta));
    }
    if probe.margin < 4 || probe.margin % 4 != 0 {
        return Err(Error::InvalidHalfExtent(probe.margin));
    }
    probe.mc.validate()?;
    probe.coupling.check_dimension(probe.dimension)?;
    Ok(())
}

/// Model and start for one gap cell. The MW variants are exact mirrors of
/// the ME ones.
fn gap_cell_model(
    lattice: LatticeBox,
    coupling: CouplingModel,
    radius: i64,
    me_state: &SpinConfig,
    mw_state: &SpinConfig,
    dressing: DressingKind,
) -> (EnergyModel, SpinConfig) {
    let sup = |s: crate::lattice::Site| s[0].abs().max(s[1].abs());
    let free: Vec<usize> = lattice
        .sites()
        .enumerate()
        .filter(|&(_, s)| sup(s) <= radius && (!LatticeBox::is_frozen(s) || s == [0, 0]))
        .map(|(i, _)| i)
        .collect();
    let in_box: Vec<[f64; 2]> = lattice
        .sites()
        .map(|s| me_state.angle(s).unit_vector())
        .collect();
    let fixed = FixedSpins {
        in_box,
        outside: OutsideSpins::Tile(bulk_tile(me_state)),
    };
    let fixed = if dressing == DressingKind::Mw {
        fixed.flipped()
    } else {
        fixed
    };
    let model = assemble_dressed_model(lattice, coupling, free, &fixed);
    let init = match dressing {
        DressingKind::Mw => mw_state.clone(),
        _ => me_state.clone(),
    };
    (model, init)
}

/// Binned distribution of the horizontal magnetisation density, pooled over
/// independent chains started at random.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistogramReport {
    pub beta: f64,
    pub bins: usize,
    /// Bin edges over [-1, 1], length bins + 1.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
    pub chain_seeds: Vec<u64>,
    pub chain_means: Vec<f64>,
    pub pooled_mean: f64,
}

/// Reflection-symmetric bin index over [-1, 1]: the index of -v is always
/// bins - 1 - index(v), so mirrored streams give exactly mirrored counts.
pub fn mirror_bin_index(v: f64, bins: usize) -> usize {
    fn nonneg(v: f64, bins: usize) -> usize {
        let cell = 2.0 / bins as f64;
        let k = if bins % 2 == 1 {
            (bins - 1) / 2 + ((v + cell / 2.0) / cell) as usize
        } else {
            bins / 2 + (v / cell) as usize
        };
        k.min(bins - 1)
    }
    if v.is_sign_negative() {
        bins - 1 - nonneg(-v, bins)
    } else {
        nonneg(v, bins)
    }
}

pub fn histogram_counts(stream: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &v in stream {
        counts[mirror_bin_index(v.clamp(-1.0, 1.0), bins)] += 1;
    }
    counts
}

/// Pooled magnetisation histogram of the undressed constrained box.
pub fn spinflop_histogram(
    lattice: LatticeBox,
    coupling: CouplingModel,
    mc: &McParams,
    chains: usize,
    bins: usize,
) -> Result<HistogramReport> {
    mc.validate()?;
    let model = EnergyModel::constrained(lattice, coupling, VisibleSpec::DoublyAlternating)?;
    let chain_ids: Vec<usize> = (0..chains).collect();
    let run_one = |&k: &usize| -> Result<ChainRun> {
        let seed = derive_seed(mc.seed, 0x5eed_0000 + k as u64);
        let params = McParams { seed, ..*mc };
        let mut init = model.reference_config(Angle::EAST);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
            derive_seed(seed, 0x1217),
        );
        for &idx in model.free_sites() {
            let theta = rand::Rng::random_range(&mut rng, -std::f64::consts::PI..std::f64::consts::PI);
            init.set_angle_at(idx, Angle::from_radians(theta));
        }
        run_chain(&model, &init, &params, Observable::MewDensity)
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<ChainRun> = chain_ids.par_iter().map(run_one).collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<ChainRun> = chain_ids.iter().map(run_one).collect::<Result<Vec<_>>>()?;

    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.stream.iter().copied()).collect();
    let counts = histogram_counts(&pooled, bins);
    let edges: Vec<f64> = (0..=bins)
        .map(|k| -1.0 + 2.0 * k as f64 / bins as f64)
        .collect();
    Ok(HistogramReport {
        beta: mc.beta,
        bins,
        edges,
        counts,
        n_samples: pooled.len(),
        chain_seeds: runs.iter().map(|r| r.params.seed).collect(),
        chain_means: runs.iter().map(|r| r.stats.mean).collect(),
        pooled_mean: sample_stats(&pooled).mean,
    })
}

/// Smallest Hessian eigenvalue of the constrained model at its mostly-East
/// ground state versus the unconstrained aligned box (whose soft mode is
/// the global rotation).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralGapReport {
    pub half_extent: i64,
    pub coupling_strength: f64,
    pub lambda_min_constrained: f64,
    pub lambda_min_unconstrained: f64,
    /// Component variance of the unconstrained soft mode (uniform => 0).
    pub zero_mode_variance: f64,
    pub zero_mode_sign_constant: bool,
}

pub fn spectral_gap_contrast(strength: f64, half_extent: i64) -> Result<SpectralGapReport> {
    let lattice = build_box(2, half_extent)?;
    let coupling = CouplingModel::nearest_neighbor(strength)?;

    let constrained =
        EnergyModel::constrained(lattice, coupling, VisibleSpec::DoublyAlternating)?;
    let pair = ground_pair(&constrained, &DescentOptions::default())?;
    let h = hessian(&constrained, &pair.me.config)?;
    let (lambda_min_constrained, _) = smallest_eigenpair(&h)?;

    let unconstrained = EnergyModel::unconstrained(lattice, coupling)?;
    let aligned = SpinConfig::constant(lattice, Angle::EAST);
    let h0 = hessian(&unconstrained, &aligned)?;
    let (lambda_min_unconstrained, mode) = smallest_eigenpair(&h0)?;

    let n = mode.len() as f64;
    let mean = mode.iter().sum::<f64>() / n;
    let zero_mode_variance = mode.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let zero_mode_sign_constant =
        mode.iter().all(|&x| x > 0.0) || mode.iter().all(|&x| x < 0.0);

    Ok(SpectralGapReport {
        half_extent,
        coupling_strength: strength,
        lambda_min_constrained,
        lambda_min_unconstrained,
        zero_mode_variance,
        zero_mode_sign_constant,
    })
}

pub(crate) fn smallest_eigenpair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let eig = m.clone().symmetric_eigen();
    let mut min_idx = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
        if !v.is_finite() {
            return Err(Error::EigenFailed(format!("non-finite eigenvalue {v}")));
        }
    }
    Ok((
        eig.eigenvalues[min_idx],
        eig.eigenvectors.column(min_idx).into_owned(),
    ))
}
