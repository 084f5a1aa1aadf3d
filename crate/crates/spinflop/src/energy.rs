//! The constrained Hamiltonian over the free spins and its calculus.
//!
//! A model is a set of free sites in a box, pair couplings among them, and a
//! per-site external field that already contains every fixed spin within the
//! coupling range (frozen visible spins and, for dressed geometries, the
//! boundary dressing):
//!
//!   H = - sum_{free pairs} J(i,j) cos(theta_i - theta_j)
//!       - sum_{free i} h_i . (cos theta_i, sin theta_i)
//!
//! Pair sums run in lexicographic site order with compensated accumulation,
//! so energies are reproducible across runs and thread counts.

use nalgebra::DMatrix;

use crate::angle::Angle;
use crate::constraint::{effective_field, FieldMap, VisibleSpec};
use crate::couplings::CouplingModel;
use crate::error::{Error, Result};
use crate::lattice::{frozen_constraint_angle, LatticeBox, Site, SpinConfig};

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// The free-spin system: geometry, couplings, external field.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    lattice: LatticeBox,
    coupling: CouplingModel,
    h: Vec<[f64; 2]>,
    free: Vec<usize>,
    free_rank: Vec<i32>,
    displacements: Vec<(Site, f64)>,
    half_displacements: Vec<(Site, f64)>,
}

impl EnergyModel {
    /// The standard constrained model: visible spins frozen, hidden free.
    pub fn constrained(
        lattice: LatticeBox,
        coupling: CouplingModel,
        visible: VisibleSpec<'_>,
    ) -> Result<Self> {
        let field = effective_field(lattice, &coupling, visible)?;
        Ok(Self::from_field_map(&field))
    }

    /// Free spins on the hidden sites, field taken from a precomputed map.
    pub fn from_field_map(field: &FieldMap) -> Self {
        let lattice = *field.lattice();
        let free: Vec<usize> = lattice
            .sites()
            .enumerate()
            .filter(|&(_, s)| !LatticeBox::is_frozen(s))
            .map(|(i, _)| i)
            .collect();
        Self::assemble(lattice, *field.model(), field.fields().to_vec(), free)
    }

    /// Every site free, no external field: the unconstrained rotator box.
    pub fn unconstrained(lattice: LatticeBox, coupling: CouplingModel) -> Result<Self> {
        coupling.check_dimension(lattice.dimension())?;
        let n = lattice.site_count();
        Ok(Self::assemble(
            lattice,
            coupling,
            vec![[0.0, 0.0]; n],
            (0..n).collect(),
        ))
    }

    /// A model with an explicit free-site list; fields are read from `field`
    /// on the free sites.
    pub fn with_free_sites(field: &FieldMap, free_sites: &[Site]) -> Result<Self> {
        let lattice = *field.lattice();
        let mut free = Vec::with_capacity(free_sites.len());
        for &s in free_sites {
            let idx = lattice.index_of(s).ok_or(Error::SiteOutsideBox(s))?;
            free.push(idx);
        }
        free.sort_unstable();
        free.dedup();
        Ok(Self::assemble(
            lattice,
            *field.model(),
            field.fields().to_vec(),
            free,
        ))
    }

    /// Fully explicit assembly for dressed geometries.
    pub(crate) fn assemble(
        lattice: LatticeBox,
        coupling: CouplingModel,
        h: Vec<[f64; 2]>,
        free: Vec<usize>,
    ) -> Self {
        let mut free_rank = vec![-1i32; lattice.site_count()];
        for (rank, &idx) in free.iter().enumerate() {
            free_rank[idx] = rank as i32;
        }
        let displacements = enumerate_displacements(&coupling, lattice.dimension(), false);
        let half_displacements = enumerate_displacements(&coupling, lattice.dimension(), true);
        EnergyModel {
            lattice,
            coupling,
            h,
            free,
            free_rank,
            displacements,
            half_displacements,
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn coupling(&self) -> &CouplingModel {
        &self.coupling
    }

    /// Box indices of the free sites, ascending.
    pub fn free_sites(&self) -> &[usize] {
        &self.free
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn free_site_coords(&self) -> impl Iterator<Item = Site> + '_ {
        self.free.iter().map(|&i| self.lattice.site_at(i))
    }

    pub fn is_free(&self, site: Site) -> bool {
        self.free_rank_of(site).is_some()
    }

    pub(crate) fn free_rank_of(&self, site: Site) -> Option<usize> {
        let idx = self.lattice.index_of(site)?;
        let r = self.free_rank[idx];
        (r >= 0).then_some(r as usize)
    }

    pub fn field(&self, site: Site) -> [f64; 2] {
        self.h[self.lattice.index_of(site).expect("site outside box")]
    }

    pub(crate) fn field_of_rank(&self, rank: usize) -> [f64; 2] {
        self.h[self.free[rank]]
    }

    /// Multiply every external field by `factor`, couplings unchanged.
    pub fn with_scaled_field(mut self, factor: f64) -> Self {
        for h in &mut self.h {
            h[0] *= factor;
            h[1] *= factor;
        }
        self
    }

    pub(crate) fn displacements(&self) -> &[(Site, f64)] {
        &self.displacements
    }

    pub(crate) fn half_displacements(&self) -> &[(Site, f64)] {
        &self.half_displacements
    }

    /// Reference configuration: free sites at `free_angle`, frozen sites at
    /// the doubly-alternating constraint, any other fixed site at East.
    pub fn reference_config(&self, free_angle: Angle) -> SpinConfig {
        let dim = self.lattice.dimension();
        SpinConfig::from_fn(self.lattice, |s| {
            if self.is_free(s) {
                free_angle
            } else if LatticeBox::is_frozen(s) {
                frozen_constraint_angle(dim, s)
            } else {
                Angle::EAST
            }
        })
    }

    fn check_config(&self, config: &SpinConfig) -> Result<()> {
        if config.lattice() != &self.lattice {
            return Err(Error::BoxMismatch);
        }
        Ok(())
    }
}

/// All displacement classes with a nonzero coupling, lexicographic; with
/// `half` only the lexicographically positive ones (each unordered pair is
/// then visited exactly once).
fn enumerate_displacements(
    coupling: &CouplingModel,
    dimension: usize,
    half: bool,
) -> Vec<(Site, f64)> {
    let range = coupling.range();
    let mut out = Vec::new();
    for dx in -range..=range {
        let ys: Box<dyn Iterator<Item = i64>> = if dimension == 1 {
            Box::new(std::iter::once(0))
        } else {
            Box::new(-range..=range)
        };
        for dy in ys {
            if half && !(dx > 0 || (dx == 0 && dy > 0)) {
                continue;
            }
            let d2 = dx * dx + dy * dy;
            if d2 == 0 {
                continue;
            }
            let j = coupling.coupling_for_d2(d2);
            if j != 0.0 {
                out.push(([dx, dy], j));
            }
        }
    }
    out
}

/// Total energy of the free system.
pub fn energy(model: &EnergyModel, config: &SpinConfig) -> Result<f64> {
    model.check_config(config)?;
    let mut acc = KahanSum::default();
    pair_terms(model, config, &mut acc);
    field_terms(model, config, &mut acc);
    Ok(acc.value())
}

/// Pair term alone, used for rotation-invariance checks.
pub fn pair_energy(model: &EnergyModel, config: &SpinConfig) -> Result<f64> {
    model.check_config(config)?;
    let mut acc = KahanSum::default();
    pair_terms(model, config, &mut acc);
    Ok(acc.value())
}

fn pair_terms(model: &EnergyModel, config: &SpinConfig, acc: &mut KahanSum) {
    for &idx in model.free_sites() {
        let site = model.lattice.site_at(idx);
        let ti = config.angle_at(idx).radians();
        for &(d, j) in model.half_displacements() {
            let partner = [site[0] + d[0], site[1] + d[1]];
            if let Some(pidx) = model.lattice.index_of(partner) {
                if model.free_rank[pidx] >= 0 {
                    acc.add(-j * (ti - config.angle_at(pidx).radians()).cos());
                }
            }
        }
    }
}

fn field_terms(model: &EnergyModel, config: &SpinConfig, acc: &mut KahanSum) {
    for &idx in model.free_sites() {
        let [h1, h2] = model.h[idx];
        if h1 != 0.0 || h2 != 0.0 {
            let t = config.angle_at(idx).radians();
            acc.add(-(h1 * t.cos() + h2 * t.sin()));
        }
    }
}

/// Local field b_i = sum_j J(i,j) u(theta_j) + h_i over the free partners of
/// a free site. The energy as a function of theta_i alone is
/// -|b_i| cos(theta_i - arg b_i) + const.
pub fn local_field(model: &EnergyModel, config: &SpinConfig, site: Site) -> Result<[f64; 2]> {
    model.check_config(config)?;
    if !model.is_free(site) {
        return Err(Error::SiteNotFree(site));
    }
    let mut b = model.field(site);
    for &(d, j) in model.displacements() {
        let partner = [site[0] + d[0], site[1] + d[1]];
        if let Some(pidx) = model.lattice.index_of(partner) {
            if model.free_rank[pidx] >= 0 {
                let u = config.angle_at(pidx).unit_vector();
                b[0] += j * u[0];
                b[1] += j * u[1];
            }
        }
    }
    Ok(b)
}

/// Analytic gradient dH/d theta_i over the free sites, in free-site order.
pub fn gradient(model: &EnergyModel, config: &SpinConfig) -> Result<Vec<f64>> {
    model.check_config(config)?;
    let mut g = Vec::with_capacity(model.free_count());
    for &idx in model.free_sites() {
        let site = model.lattice.site_at(idx);
        let ti = config.angle_at(idx).radians();
        let mut gi = 0.0;
        for &(d, j) in model.displacements() {
            let partner = [site[0] + d[0], site[1] + d[1]];
            if let Some(pidx) = model.lattice.index_of(partner) {
                if model.free_rank[pidx] >= 0 {
                    gi += j * (ti - config.angle_at(pidx).radians()).sin();
                }
            }
        }
        let [h1, h2] = model.h[idx];
        gi += h1 * ti.sin() - h2 * ti.cos();
        g.push(gi);
    }
    Ok(g)
}

/// Analytic Hessian d2H / d theta_i d theta_j over the free sites.
pub fn hessian(model: &EnergyModel, config: &SpinConfig) -> Result<DMatrix<f64>> {
    model.check_config(config)?;
    let n = model.free_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (rank, &idx) in model.free_sites().iter().enumerate() {
        let site = model.lattice.site_at(idx);
        let ti = config.angle_at(idx).radians();
        let mut diag = 0.0;
        for &(d, j) in model.displacements() {
            let partner = [site[0] + d[0], site[1] + d[1]];
            if let Some(pidx) = model.lattice.index_of(partner) {
                let r = model.free_rank[pidx];
                if r >= 0 {
                    let c = (ti - config.angle_at(pidx).radians()).cos();
                    diag += j * c;
                    m[(rank, r as usize)] = -j * c;
                }
            }
        }
        let [h1, h2] = model.h[idx];
        m[(rank, rank)] = diag + h1 * ti.cos() + h2 * ti.sin();
    }
    Ok(m)
}

/// Flip every spin about the vertical axis: theta -> pi - theta. Frozen N/S
/// spins are fixed points, so the doubly-alternating constraint is preserved.
pub fn ew_flip(config: &SpinConfig) -> SpinConfig {
    SpinConfig::from_fn(*config.lattice(), |s| config.angle(s).ew_flip())
}

/// Rotate every spin by `alpha`.
pub fn global_rotate(config: &SpinConfig, alpha: f64) -> SpinConfig {
    SpinConfig::from_fn(*config.lattice(), |s| config.angle(s).rotated(alpha))
}

/// The per-edge potential of the decorated lattice:
/// phi(x, y) = -J <x, y> - h_x . x - h_y . y.
pub fn phi_bond(j: f64, h_x: [f64; 2], h_y: [f64; 2], x: Angle, y: Angle) -> f64 {
    let ux = x.unit_vector();
    let uy = y.unit_vector();
    -j * (ux[0] * uy[0] + ux[1] * uy[1]) - (h_x[0] * ux[0] + h_x[1] * ux[1])
        - (h_y[0] * uy[0] + h_y[1] * uy[1])
}

/// Minimum of phi over both angles, by alternating exact single-angle
/// minimisation from a grid of starts.
pub fn phi_bond_min(j: f64, h_x: [f64; 2], h_y: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    let starts = 16;
    for a in 0..starts {
        for b in 0..starts {
            let mut tx = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * a as f64 / starts as f64;
            let mut ty = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * b as f64 / starts as f64;
            for _ in 0..60 {
                // minimise over x with y fixed: align x with J u(y) + h_x
                let uy = Angle::from_radians(ty).unit_vector();
                tx = (j * uy[1] + h_x[1]).atan2(j * uy[0] + h_x[0]);
                let ux = Angle::from_radians(tx).unit_vector();
                ty = (j * ux[1] + h_y[1]).atan2(j * ux[0] + h_y[0]);
            }
            let v = phi_bond(
                j,
                h_x,
                h_y,
                Angle::from_radians(tx),
                Angle::from_radians(ty),
            );
            if v < best {
                best = v;
            }
        }
    }
    best
}

// --- kernel-space state -------------------------------------------------
//
// The sweep kernels (coordinate descent and Metropolis) store each free spin
// as its angle psi measured from North, psi = theta - pi/2 in (-pi, pi].
// In that coordinate the East-West flip is the exact floating-point negation
// psi -> -psi, and with the even/odd-forced trig from `angle` every energy
// difference evaluates bitwise identically under the flip. That is what
// makes paired ME/MW trajectories exact mirrors.

use crate::angle::{even_cos, odd_sin, wrap};
use std::f64::consts::FRAC_PI_2;

/// Kernel angles of the free sites, in free-site order.
pub(crate) fn psi_from_config(model: &EnergyModel, config: &SpinConfig) -> Vec<f64> {
    model
        .free_sites()
        .iter()
        .map(|&idx| wrap(config.angle_at(idx).radians() - FRAC_PI_2))
        .collect()
}

pub(crate) fn psi_to_angle(psi: f64) -> Angle {
    Angle::from_radians(psi + FRAC_PI_2)
}

pub(crate) fn write_psi_to_config(model: &EnergyModel, psi: &[f64], config: &mut SpinConfig) {
    for (rank, &idx) in model.free_sites().iter().enumerate() {
        config.set_angle_at(idx, psi_to_angle(psi[rank]));
    }
}

/// Local field at a free site in the standard frame, partners read from the
/// kernel state. b flips to (-b1, b2) exactly under the mirror.
pub(crate) fn psi_local_field(model: &EnergyModel, psi: &[f64], rank: usize) -> [f64; 2] {
    let site = model.lattice.site_at(model.free[rank]);
    let [mut b1, mut b2] = model.field_of_rank(rank);
    for &(d, j) in model.displacements() {
        let partner = [site[0] + d[0], site[1] + d[1]];
        if let Some(pidx) = model.lattice.index_of(partner) {
            let r = model.free_rank[pidx];
            if r >= 0 {
                let p = psi[r as usize];
                // u(theta) = (-sin psi, cos psi)
                b1 += j * (-odd_sin(p));
                b2 += j * even_cos(p);
            }
        }
    }
    [b1, b2]
}

/// Energy change for moving one free spin from `old` to `new`.
pub(crate) fn psi_delta_h(
    model: &EnergyModel,
    psi: &[f64],
    rank: usize,
    old: f64,
    new: f64,
) -> f64 {
    let site = model.lattice.site_at(model.free[rank]);
    let mut dh = 0.0;
    for &(d, j) in model.displacements() {
        let partner = [site[0] + d[0], site[1] + d[1]];
        if let Some(pidx) = model.lattice.index_of(partner) {
            let r = model.free_rank[pidx];
            if r >= 0 {
                let p = psi[r as usize];
                dh += j * (even_cos(old - p) - even_cos(new - p));
            }
        }
    }
    let [h1, h2] = model.field_of_rank(rank);
    dh += h1 * (odd_sin(new) - odd_sin(old)) - h2 * (even_cos(new) - even_cos(old));
    dh
}

/// Free-system energy from the kernel state; bitwise invariant under the
/// mirror.
pub(crate) fn psi_energy(model: &EnergyModel, psi: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for (rank, &idx) in model.free_sites().iter().enumerate() {
        let site = model.lattice.site_at(idx);
        let pi_ = psi[rank];
        for &(d, j) in model.half_displacements() {
            let partner = [site[0] + d[0], site[1] + d[1]];
            if let Some(pidx) = model.lattice.index_of(partner) {
                let r = model.free_rank[pidx];
                if r >= 0 {
                    acc.add(-j * even_cos(pi_ - psi[r as usize]));
                }
            }
        }
        let [h1, h2] = model.h[idx];
        if h1 != 0.0 || h2 != 0.0 {
            acc.add(h1 * odd_sin(pi_) - h2 * even_cos(pi_));
        }
    }
    acc.value()
}

/// Mean horizontal spin component over the free hidden sites; negates
/// exactly under the mirror.
pub(crate) fn psi_m_ew(model: &EnergyModel, psi: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (rank, &idx) in model.free_sites().iter().enumerate() {
        if !LatticeBox::is_frozen(model.lattice.site_at(idx)) {
            sum += -odd_sin(psi[rank]);
            n += 1;
        }
    }
    sum / n as f64
}

/// Report of [`bond_infimum`].
#[derive(Debug, Clone)]
pub struct BondInfimum {
    pub value: f64,
    pub bond: (Site, Site),
}

/// Infimum over the nearest-neighbour free-free edges of the per-edge
/// potential, with each site's field split evenly over the edges of the
/// infinite decorated lattice (degree 2 for sites with one odd coordinate,
/// 4 for odd-odd sites), so the edge potentials sum back to the bulk
/// Hamiltonian.
pub fn bond_infimum(model: &EnergyModel) -> Option<BondInfimum> {
    let lattice = model.lattice;
    let degree = |site: Site| -> usize {
        if site[0].rem_euclid(2) == 1 && site[1].rem_euclid(2) == 1 {
            4
        } else {
            2
        }
    };
    let j = model.coupling.coupling_for_d2(1);
    let mut best: Option<BondInfimum> = None;
    for &idx in model.free_sites() {
        let site = lattice.site_at(idx);
        for d in [[1, 0], [0, 1]] {
            let partner = [site[0] + d[0], site[1] + d[1]];
            if !model.is_free(partner) {
                continue;
            }
            let share = |s: Site| -> [f64; 2] {
                let h = model.field(s);
                let deg = degree(s) as f64;
                [h[0] / deg, h[1] / deg]
            };
            let v = phi_bond_min(j, share(site), share(partner));
            if best.as_ref().is_none_or(|b| v < b.value) {
                best = Some(BondInfimum {
                    value: v,
                    bond: (site, partner),
                });
            }
        }
    }
    best
}
