//! Finite-temperature Metropolis sampling of the constrained models.
//!
//! One chain owns one configuration and one RNG; the trajectory is a pure
//! function of (model, init, params). The mostly-East and mostly-West
//! boundary dressings are assembled so that the two chains of a paired-seed
//! run are exact floating-point mirrors of each other (see the kernel notes
//! in `energy`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{odd_sin, wrap, Angle};
use crate::constraint::VisibleSpec;
use crate::couplings::CouplingModel;
use crate::energy::{
    psi_delta_h, psi_energy, psi_from_config, psi_m_ew, psi_to_angle, write_psi_to_config,
    EnergyModel,
};
use crate::error::{Error, Result};
use crate::groundstate::{ground_pair, DescentOptions};
use crate::lattice::{frozen_constraint_angle, LatticeBox, Site, SpinConfig};

/// Parameters of one Metropolis chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase", default)]
pub struct McParams {
    /// Inverse temperature.
    pub beta: f64,
    /// Measurement sweeps (one proposal per free site per sweep).
    pub sweeps: usize,
    /// Discarded equilibration sweeps.
    pub burnin: usize,
    pub seed: u64,
    /// Half-width of the uniform angle proposal, in (0, pi].
    pub proposal_width: f64,
    /// Target a 50% acceptance rate during burn-in; the width is frozen
    /// afterwards so the measured kernel satisfies detailed balance.
    pub adapt: bool,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            beta: 1.0,
            sweeps: 10_000,
            burnin: 1_000,
            seed: 1,
            proposal_width: 1.0,
            adapt: false,
        }
    }
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidMcParams(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidMcParams("sweeps must be positive".into()));
        }
        let w = self.proposal_width;
        if w.is_nan() || w <= 0.0 || w > std::f64::consts::PI {
            return Err(Error::InvalidMcParams(format!(
                "proposal width must lie in (0, pi], got {}",
                self.proposal_width
            )));
        }
        Ok(())
    }
}

/// Boundary dressing outside the free volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "angle", rename_all = "kebab-case")]
pub enum DressingKind {
    /// Ground-state angles of the mostly-East phase.
    Me,
    /// Its exact East-West mirror.
    Mw,
    /// Every site outside the box fixed at one angle (radians).
    Homogeneous(f64),
    /// No dressing: open edges, only the visible pattern extends.
    Free,
}

impl DressingKind {
    pub fn label(&self) -> String {
        match self {
            DressingKind::Me => "me".into(),
            DressingKind::Mw => "mw".into(),
            DressingKind::Homogeneous(a) => format!("homogeneous({a})"),
            DressingKind::Free => "free".into(),
        }
    }
}

/// Observables measured once per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Horizontal component of the spin at the origin; the origin is
    /// released from the constraint for this observable.
    Sigma1Origin,
    /// Mean horizontal component over the free hidden spins.
    MewDensity,
    /// Free-system energy per free spin.
    EnergyDensity,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Sigma1Origin => "sigma1-origin",
            Observable::MewDensity => "mew-density",
            Observable::EnergyDensity => "energy-density",
        }
    }

    pub fn needs_free_origin(&self) -> bool {
        matches!(self, Observable::Sigma1Origin)
    }
}

/// Summary statistics with autocorrelation-aware error bars.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleStats {
    pub mean: f64,
    pub stderr: f64,
    /// Integrated autocorrelation time in sweeps (1 for iid samples).
    pub autocorr_time: f64,
    pub n_effective: f64,
    pub n_samples: usize,
    /// Set when n_effective < 100: the error bar is unreliable.
    pub flagged: bool,
}

/// Integrated autocorrelation time by self-consistent windowing: the window
/// W is the smallest lag with W >= 5 tau(W), tau(W) = 1 + 2 sum_{t<=W} rho(t).
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let max_lag = n / 4;
    let mut tau = 1.0;
    for w in 1..=max_lag {
        let mut c = 0.0;
        for t in 0..n - w {
            c += (series[t] - mean) * (series[t + w] - mean);
        }
        let rho = c / (n - w) as f64 / c0;
        tau += 2.0 * rho;
        if (w as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Batched statistics: batch length >= 5x the autocorrelation time.
pub fn sample_stats(series: &[f64]) -> SampleStats {
    let n = series.len();
    if n == 0 {
        return SampleStats {
            mean: f64::NAN,
            stderr: f64::NAN,
            autocorr_time: f64::NAN,
            n_effective: 0.0,
            n_samples: 0,
            flagged: true,
        };
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let tau = integrated_autocorr_time(series);
    let n_effective = n as f64 / tau.max(1.0);
    let batch = ((5.0 * tau).ceil() as usize).max(1);
    let n_batches = n / batch;
    let stderr = if n_batches >= 2 {
        let means: Vec<f64> = (0..n_batches)
            .map(|b| series[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
            .collect();
        let bm = means.iter().sum::<f64>() / n_batches as f64;
        let var = means.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>()
            / (n_batches - 1) as f64;
        (var / n_batches as f64).sqrt()
    } else {
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n as f64 - 1.0).max(1.0);
        (var * tau.max(1.0) / n as f64).sqrt()
    };
    SampleStats {
        mean,
        stderr,
        autocorr_time: tau,
        n_effective,
        n_samples: n,
        flagged: n_effective < 100.0,
    }
}

/// A Metropolis chain over the free spins of a model.
pub struct Chain<'a> {
    model: &'a EnergyModel,
    psi: Vec<f64>,
    beta: f64,
    width: f64,
    adapt: bool,
    mirror: bool,
    rng: ChaCha8Rng,
    proposals: u64,
    accepted: u64,
    window_proposals: u64,
    window_accepted: u64,
}

impl<'a> Chain<'a> {
    pub fn new(model: &'a EnergyModel, init: &SpinConfig, params: &McParams) -> Result<Chain<'a>> {
        params.validate()?;
        if init.lattice() != model.lattice() {
            return Err(Error::BoxMismatch);
        }
        Ok(Chain {
            model,
            psi: psi_from_config(model, init),
            beta: params.beta,
            width: params.proposal_width,
            adapt: params.adapt,
            mirror: false,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            proposals: 0,
            accepted: 0,
            window_proposals: 0,
            window_accepted: 0,
        })
    }

    /// The exact mirror of `other` under a flipped model: negated kernel
    /// state, negated proposals, identical RNG stream. With `flipped` the
    /// e1-negation of `other`'s model, the two trajectories stay bitwise
    /// mirror images.
    pub fn mirrored<'b>(other: &Chain<'_>, flipped: &'b EnergyModel) -> Chain<'b> {
        Chain {
            model: flipped,
            psi: other.psi.iter().map(|&p| if p == std::f64::consts::PI { p } else { -p }).collect(),
            beta: other.beta,
            width: other.width,
            adapt: other.adapt,
            mirror: !other.mirror,
            rng: other.rng.clone(),
            proposals: other.proposals,
            accepted: other.accepted,
            window_proposals: other.window_proposals,
            window_accepted: other.window_accepted,
        }
    }

    /// One proposal per free site, in site order.
    pub fn sweep(&mut self) {
        let n = self.psi.len();
        for rank in 0..n {
            let delta_raw: f64 = self.rng.random_range(-self.width..self.width);
            let delta = if self.mirror { -delta_raw } else { delta_raw };
            let u: f64 = self.rng.random();
            let old = self.psi[rank];
            let new = wrap(old + delta);
            let dh = psi_delta_h(self.model, &self.psi, rank, old, new);
            self.proposals += 1;
            self.window_proposals += 1;
            if u < (-self.beta * dh).exp() {
                self.psi[rank] = new;
                self.accepted += 1;
                self.window_accepted += 1;
            }
        }
    }

    /// Burn-in sweeps; with `adapt` the proposal width is retuned every 100
    /// sweeps toward 50% acceptance, then frozen.
    pub fn run_burnin(&mut self, sweeps: usize) {
        for s in 0..sweeps {
            self.sweep();
            if self.adapt && (s + 1) % 100 == 0 && self.window_proposals > 0 {
                let rate = self.window_accepted as f64 / self.window_proposals as f64;
                if rate < 0.4 {
                    self.width *= 0.9;
                } else if rate > 0.6 {
                    self.width = (self.width * 1.1).min(std::f64::consts::PI);
                }
                self.window_proposals = 0;
                self.window_accepted = 0;
            }
        }
    }

    pub fn measure(&self, observable: Observable) -> f64 {
        match observable {
            Observable::Sigma1Origin => {
                let rank = self
                    .model
                    .free_rank_of([0, 0])
                    .expect("sigma1-origin requires a free origin spin");
                -odd_sin(self.psi[rank])
            }
            Observable::MewDensity => psi_m_ew(self.model, &self.psi),
            Observable::EnergyDensity => {
                psi_energy(self.model, &self.psi) / self.model.free_count() as f64
            }
        }
    }

    pub fn free_angle(&self, rank: usize) -> Angle {
        psi_to_angle(self.psi[rank])
    }

    pub fn config(&self) -> SpinConfig {
        let mut c = self.model.reference_config(Angle::EAST);
        write_psi_to_config(self.model, &self.psi, &mut c);
        c
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposals as f64
    }

    pub fn proposal_width(&self) -> f64 {
        self.width
    }

    #[cfg(test)]
    pub(crate) fn psi(&self) -> &[f64] {
        &self.psi
    }
}

/// One sweep over a configuration; a convenience wrapper for stepping a
/// `SpinConfig` directly. Long-running measurements should hold a [`Chain`],
/// which keeps its kernel state between sweeps.
pub fn metropolis_sweep(
    model: &EnergyModel,
    config: &mut SpinConfig,
    params: &McParams,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    params.validate()?;
    if config.lattice() != model.lattice() {
        return Err(Error::BoxMismatch);
    }
    let mut psi = psi_from_config(model, config);
    for rank in 0..psi.len() {
        let delta: f64 = rng.random_range(-params.proposal_width..params.proposal_width);
        let u: f64 = rng.random();
        let old = psi[rank];
        let new = wrap(old + delta);
        let dh = psi_delta_h(model, &psi, rank, old, new);
        if u < (-params.beta * dh).exp() {
            psi[rank] = new;
        }
    }
    write_psi_to_config(model, &psi, config);
    Ok(())
}

/// Result of a measured chain.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub observable: Observable,
    pub stats: SampleStats,
    pub stream: Vec<f64>,
    pub acceptance_rate: f64,
    pub final_proposal_width: f64,
    pub params: McParams,
}

/// Fixed spins surrounding the free volume, as exact unit vectors.
pub(crate) struct FixedSpins {
    /// Unit vectors for in-box sites (indexed by box index); entries for
    /// free sites are unused.
    pub(crate) in_box: Vec<[f64; 2]>,
    /// What lives beyond the box edge.
    pub(crate) outside: OutsideSpins,
}

pub(crate) enum OutsideSpins {
    /// Visible pattern only; hidden sites outside are absent (open edges).
    VisiblePattern,
    /// Every outside site fixed at one unit vector.
    Homogeneous([f64; 2]),
    /// Ground-state tile: site -> unit vector by coordinates mod 8.
    Tile(Vec<[f64; 2]>),
}

impl FixedSpins {
    fn unit_at(&self, lattice: &LatticeBox, site: Site) -> Option<[f64; 2]> {
        if lattice.contains(site) {
            return Some(self.in_box[lattice.index_of(site).unwrap()]);
        }
        match &self.outside {
            OutsideSpins::VisiblePattern => LatticeBox::is_frozen(site).then(|| {
                frozen_constraint_angle(lattice.dimension(), site).unit_vector()
            }),
            OutsideSpins::Homogeneous(u) => Some(*u),
            OutsideSpins::Tile(tile) => Some(tile[tile_index(lattice.dimension(), site)]),
        }
    }

    /// Negate every horizontal component; exact.
    pub(crate) fn flipped(&self) -> FixedSpins {
        let flip = |u: &[f64; 2]| [-u[0], u[1]];
        FixedSpins {
            in_box: self.in_box.iter().map(flip).collect(),
            outside: match &self.outside {
                OutsideSpins::VisiblePattern => OutsideSpins::VisiblePattern,
                OutsideSpins::Homogeneous(u) => OutsideSpins::Homogeneous(flip(u)),
                OutsideSpins::Tile(t) => OutsideSpins::Tile(t.iter().map(flip).collect()),
            },
        }
    }
}

pub(crate) fn tile_index(dimension: usize, site: Site) -> usize {
    let x = site[0].rem_euclid(8) as usize;
    if dimension == 1 {
        x
    } else {
        x * 8 + site[1].rem_euclid(8) as usize
    }
}

/// The 8-periodic bulk tile of a configuration, read from the centre of the
/// box where the state has converged to its periodic bulk form.
pub(crate) fn bulk_tile(config: &SpinConfig) -> Vec<[f64; 2]> {
    let dim = config.lattice().dimension();
    let size = if dim == 1 { 8 } else { 64 };
    let mut tile = vec![[0.0, 0.0]; size];
    for x in -4..4i64 {
        if dim == 1 {
            tile[tile_index(1, [x, 0])] = config.angle([x, 0]).unit_vector();
        } else {
            for y in -4..4i64 {
                tile[tile_index(2, [x, y])] = config.angle([x, y]).unit_vector();
            }
        }
    }
    tile
}

/// Assemble the model for a free-site set surrounded by fixed spins: the
/// external field of each free site collects every fixed spin within the
/// coupling range.
pub(crate) fn assemble_dressed_model(
    lattice: LatticeBox,
    coupling: CouplingModel,
    free: Vec<usize>,
    fixed: &FixedSpins,
) -> EnergyModel {
    let mut free_mask = vec![false; lattice.site_count()];
    for &idx in &free {
        free_mask[idx] = true;
    }
    let probe = EnergyModel::assemble(lattice, coupling, vec![[0.0, 0.0]; lattice.site_count()], free.clone());
    let mut h = vec![[0.0, 0.0]; lattice.site_count()];
    for &idx in &free {
        let site = lattice.site_at(idx);
        let mut acc = [0.0, 0.0];
        for &(d, j) in probe.displacements() {
            let partner = [site[0] + d[0], site[1] + d[1]];
            let partner_free = lattice
                .index_of(partner)
                .map(|p| free_mask[p])
                .unwrap_or(false);
            if partner_free {
                continue;
            }
            if let Some(u) = fixed.unit_at(&lattice, partner) {
                acc[0] += j * u[0];
                acc[1] += j * u[1];
            }
        }
        h[idx] = acc;
    }
    EnergyModel::assemble(lattice, coupling, h, free)
}

/// Model + initial configuration for a dressed constrained box: hidden
/// spins free (plus the origin when requested), visible spins frozen to the
/// doubly-alternating pattern, and the chosen dressing outside the box.
pub fn dressed_model(
    lattice: LatticeBox,
    coupling: CouplingModel,
    dressing: DressingKind,
    free_origin: bool,
) -> Result<(EnergyModel, SpinConfig)> {
    coupling.check_dimension(lattice.dimension())?;
    let dim = lattice.dimension();
    let free: Vec<usize> = lattice
        .sites()
        .enumerate()
        .filter(|&(_, s)| !LatticeBox::is_frozen(s) || (free_origin && s == [0, 0]))
        .map(|(i, _)| i)
        .collect();

    // in-box fixed spins are the frozen visible sites
    let in_box: Vec<[f64; 2]> = lattice
        .sites()
        .map(|s| {
            if LatticeBox::is_frozen(s) {
                frozen_constraint_angle(dim, s).unit_vector()
            } else {
                [0.0, 0.0] // unused: hidden sites are free
            }
        })
        .collect();

    let (outside, init_hidden): (OutsideSpins, Option<SpinConfig>) = match dressing {
        DressingKind::Free => (OutsideSpins::VisiblePattern, None),
        DressingKind::Homogeneous(theta) => (
            OutsideSpins::Homogeneous(Angle::from_radians(theta).unit_vector()),
            None,
        ),
        DressingKind::Me | DressingKind::Mw => {
            let base =
                EnergyModel::constrained(lattice, coupling, VisibleSpec::DoublyAlternating)?;
            let pair = ground_pair(&base, &DescentOptions::default())?;
            (
                OutsideSpins::Tile(bulk_tile(&pair.me.config)),
                Some(pair.me.config),
            )
        }
    };
    let fixed = FixedSpins { in_box, outside };
    let fixed = if dressing == DressingKind::Mw {
        fixed.flipped()
    } else {
        fixed
    };
    let model = assemble_dressed_model(lattice, coupling, free, &fixed);

    let init = match (dressing, init_hidden) {
        (DressingKind::Mw, Some(me)) => crate::energy::ew_flip(&me),
        (_, Some(me)) => me,
        _ => model.reference_config(Angle::EAST),
    };
    Ok((model, init))
}

/// Sample one observable on the dressed constrained box.
pub fn sample_observable(
    lattice: LatticeBox,
    coupling: CouplingModel,
    dressing: DressingKind,
    params: &McParams,
    observable: Observable,
) -> Result<ChainRun> {
    params.validate()?;
    let (model, mut init) = dressed_model(lattice, coupling, dressing, observable.needs_free_origin())?;
    // Undressed starts are drawn at random so independent chains pick their
    // phase by seed rather than by construction.
    if matches!(dressing, DressingKind::Free | DressingKind::Homogeneous(_)) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, 0x1217));
        for &idx in model.free_sites() {
            init.set_angle_at(
                idx,
                Angle::from_radians(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
            );
        }
    }
    run_chain(&model, &init, params, observable)
}

/// Burn in, then measure `observable` once per sweep.
pub fn run_chain(
    model: &EnergyModel,
    init: &SpinConfig,
    params: &McParams,
    observable: Observable,
) -> Result<ChainRun> {
    if observable.needs_free_origin() && model.free_rank_of([0, 0]).is_none() {
        return Err(Error::SiteNotFree([0, 0]));
    }
    let mut chain = Chain::new(model, init, params)?;
    chain.run_burnin(params.burnin);
    let mut stream = Vec::with_capacity(params.sweeps);
    for _ in 0..params.sweeps {
        chain.sweep();
        stream.push(chain.measure(observable));
    }
    Ok(ChainRun {
        observable,
        stats: sample_stats(&stream),
        stream,
        acceptance_rate: chain.acceptance_rate(),
        final_proposal_width: chain.proposal_width(),
        params: *params,
    })
}

/// Deterministic per-cell seed derivation (splitmix64).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(feature = "parallel")]
mod checkerboard {
    //! Two-colour parallel sweep for nearest-neighbour models. Within one
    //! colour no two sites interact, so the colour updates in parallel with
    //! per-site counter-based randomness. The trajectory is deterministic
    //! at every thread count but differs from the sequential sweep;
    //! equivalence is at the level of the sampled distribution.

    use super::*;
    use crate::couplings::Family;
    use rayon::prelude::*;

    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn unit_f64(bits: u64) -> f64 {
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    impl Chain<'_> {
        /// One checkerboard sweep (nearest-neighbour couplings only).
        pub fn sweep_checkerboard(&mut self, sweep_index: u64) {
            assert_eq!(
                self.model.coupling().family(),
                Family::NearestNeighbor,
                "checkerboard sweeps need nearest-neighbour couplings"
            );
            let lattice = *self.model.lattice();
            let free = self.model.free_sites();
            let seed = mix(sweep_index.wrapping_add(0x5851_f42d_4c95_7f2d));
            for color in 0..2i64 {
                let model = self.model;
                let beta = self.beta;
                let width = self.width;
                let psi_snapshot = self.psi.clone();
                let (proposed, accepted): (u64, u64) = self
                    .psi
                    .par_iter_mut()
                    .enumerate()
                    .map(|(rank, p)| {
                        let site = lattice.site_at(free[rank]);
                        if (site[0] + site[1]).rem_euclid(2) != color {
                            return (0u64, 0u64);
                        }
                        let k = mix(seed ^ (rank as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                        let delta = (2.0 * unit_f64(k) - 1.0) * width;
                        let u = unit_f64(mix(k));
                        let old = *p;
                        let new = wrap(old + delta);
                        let dh = psi_delta_h(model, &psi_snapshot, rank, old, new);
                        if u < (-beta * dh).exp() {
                            *p = new;
                            (1, 1)
                        } else {
                            (1, 0)
                        }
                    })
                    .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                self.accepted += accepted;
                self.proposals += proposed;
            }
        }
    }
}
