//! Zero-temperature solver: exact single-site alignment sweeps.
//!
//! Each update rotates one spin onto its local field, the exact minimiser of
//! the energy as a function of that angle, so the energy decreases
//! monotonically. From the all-East and all-West starts the solver produces
//! the two spin-flop ground states (mostly East and mostly West), which are
//! exact mirror images because the sweep kernel is flip-covariant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angle::{odd_atan2, wrap, Angle};
use crate::couplings::Family;
use crate::energy::{
    gradient, psi_energy, psi_from_config, psi_local_field, psi_m_ew,
    write_psi_to_config, EnergyModel,
};
use crate::error::Result;
use crate::lattice::SpinConfig;

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Convergence: largest single-site angle change in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Record the energy after every sweep (for monotonicity checks).
    pub record_energy: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-12,
            max_sweeps: 20_000,
            record_energy: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub config: SpinConfig,
    pub energy: f64,
    pub gradient_norm: f64,
    /// Mean horizontal spin component over the free hidden sites.
    pub m_ew: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Sites whose local field vanished in the final sweep; their angles
    /// are left unchanged (any angle is stationary there).
    pub degenerate_sites: usize,
    pub energy_trace: Vec<f64>,
}

/// Sweep order: two-colour for nearest-neighbour couplings (each colour is
/// an exact block minimisation), lexicographic otherwise. Both orders are
/// flip-equivariant.
fn sweep_order(model: &EnergyModel) -> Vec<usize> {
    let n = model.free_count();
    if model.coupling().family() == Family::NearestNeighbor {
        let color_of = |rank: usize| {
            let s = model.lattice().site_at(model.free_sites()[rank]);
            (s[0] + s[1]).rem_euclid(2)
        };
        let mut order: Vec<usize> = (0..n).filter(|&r| color_of(r) == 0).collect();
        order.extend((0..n).filter(|&r| color_of(r) == 1));
        order
    } else {
        (0..n).collect()
    }
}

pub fn coordinate_descent(
    model: &EnergyModel,
    init: &SpinConfig,
    opts: &DescentOptions,
) -> Result<GroundStateResult> {
    let mut psi = psi_from_config(model, init);
    let order = sweep_order(model);
    let mut sweeps = 0;
    let mut converged = false;
    let mut degenerate_sites = 0;
    let mut energy_trace = Vec::new();
    while sweeps < opts.max_sweeps {
        let mut max_delta = 0.0f64;
        degenerate_sites = 0;
        for &rank in &order {
            let b = psi_local_field(model, &psi, rank);
            if b[0] == 0.0 && b[1] == 0.0 {
                degenerate_sites += 1;
                continue;
            }
            // align u = (-sin psi, cos psi) with b
            let new = wrap(odd_atan2(-b[0], b[1]));
            max_delta = max_delta.max(wrap(new - psi[rank]).abs());
            psi[rank] = new;
        }
        sweeps += 1;
        if opts.record_energy {
            energy_trace.push(psi_energy(model, &psi));
        }
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }
    let mut config = init.clone();
    write_psi_to_config(model, &psi, &mut config);
    let g = gradient(model, &config)?;
    let gradient_norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(GroundStateResult {
        config,
        energy: psi_energy(model, &psi),
        gradient_norm,
        m_ew: psi_m_ew(model, &psi),
        sweeps,
        converged,
        degenerate_sites,
        energy_trace,
    })
}

/// The two spin-flop ground states and their degeneracy diagnostics.
#[derive(Debug, Clone)]
pub struct GroundPair {
    pub me: GroundStateResult,
    pub mw: GroundStateResult,
    pub energy_rel_gap: f64,
    pub mew_sum: f64,
    /// Largest angular distance between mw and the flip of me.
    pub flip_distance: f64,
    pub symmetric: bool,
    pub diagnostics: Vec<String>,
}

/// Run the descent from the all-East and all-West starts and check that the
/// two results form a degenerate mirror pair with opposite horizontal
/// magnetisation.
pub fn ground_pair(model: &EnergyModel, opts: &DescentOptions) -> Result<GroundPair> {
    let me = coordinate_descent(model, &model.reference_config(Angle::EAST), opts)?;
    let mw = coordinate_descent(model, &model.reference_config(Angle::WEST), opts)?;
    let energy_rel_gap = (me.energy - mw.energy).abs() / me.energy.abs().max(f64::MIN_POSITIVE);
    let mew_sum = me.m_ew + mw.m_ew;
    let mut flip_distance = 0.0f64;
    for &idx in model.free_sites() {
        let flipped = me.config.angle_at(idx).ew_flip();
        flip_distance = flip_distance.max(flipped.separation(mw.config.angle_at(idx)).abs());
    }
    let mut diagnostics = Vec::new();
    if !me.converged || !mw.converged {
        diagnostics.push("descent did not converge".to_string());
    }
    if energy_rel_gap >= 1e-8 {
        diagnostics.push(format!("energies not degenerate: rel gap {energy_rel_gap:.3e}"));
    }
    if mew_sum.abs() >= 1e-6 {
        diagnostics.push(format!("magnetisations not opposite: sum {mew_sum:.3e}"));
    }
    if me.m_ew <= 0.0 {
        diagnostics.push(format!("East start did not order East: mEW {}", me.m_ew));
    }
    if flip_distance >= 1e-6 {
        diagnostics.push(format!("states are not flip conjugate: {flip_distance:.3e}"));
    }
    Ok(GroundPair {
        symmetric: diagnostics.is_empty(),
        me,
        mw,
        energy_rel_gap,
        mew_sum,
        flip_distance,
        diagnostics,
    })
}

/// Basin statistics from random restarts.
#[derive(Debug, Clone)]
pub struct BasinReport {
    pub results: Vec<GroundStateResult>,
    pub n_mostly_east: usize,
    pub n_mostly_west: usize,
    pub n_other: usize,
    pub best_energy: f64,
}

/// Random-start descent, reporting which basin each start fell into.
pub fn multistart(
    model: &EnergyModel,
    opts: &DescentOptions,
    n_starts: usize,
    seed: u64,
) -> Result<BasinReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(n_starts);
    for _ in 0..n_starts {
        let mut init = model.reference_config(Angle::EAST);
        for &idx in model.free_sites() {
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            init.set_angle_at(idx, Angle::from_radians(theta));
        }
        results.push(coordinate_descent(model, &init, opts)?);
    }
    let best_energy = results.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    let mut n_mostly_east = 0;
    let mut n_mostly_west = 0;
    let mut n_other = 0;
    for r in &results {
        if r.m_ew > 0.02 {
            n_mostly_east += 1;
        } else if r.m_ew < -0.02 {
            n_mostly_west += 1;
        } else {
            n_other += 1;
        }
    }
    Ok(BasinReport {
        results,
        n_mostly_east,
        n_mostly_west,
        n_other,
        best_energy,
    })
}
