//! Finite boxes on Z^d with the even sublattice marked, the decimation map,
//! the doubly-alternating visible constraint and site-type classification.
//!
//! Sites are original-lattice coordinates. Visible (decimated) spins sit on
//! the even sublattice (2Z)^d; the remaining "hidden" sites form the
//! decorated lattice. The doubly-alternating pattern assigns N or S to the
//! visible spin with decimated coordinates (i', j') by the parity of
//! floor(i'/2) + floor(j'/2), so it has period 4 on the decimated lattice
//! and period 8 on the original one.

use std::collections::HashMap;
use std::io::Write;

use crate::angle::Angle;
use crate::error::{Error, Result};

/// Original-lattice coordinates. One-dimensional boxes keep the second
/// component at zero.
pub type Site = [i64; 2];

/// A centered box {-L..L}^d with the even sublattice frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    dimension: usize,
    half_extent: i64,
}

/// Build a box, enforcing the constraint-period precondition: the half
/// extent must be a positive multiple of 4 so that the doubly-alternating
/// pattern closes consistently on the box.
pub fn build_box(dimension: usize, half_extent: i64) -> Result<LatticeBox> {
    LatticeBox::build(dimension, half_extent)
}

impl LatticeBox {
    pub fn build(dimension: usize, half_extent: i64) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidDimension(dimension));
        }
        if half_extent < 4 || half_extent % 4 != 0 {
            return Err(Error::InvalidHalfExtent(half_extent));
        }
        Ok(LatticeBox {
            dimension,
            half_extent,
        })
    }

    /// Boxes produced as decimation images may have any positive extent.
    pub(crate) fn unvalidated(dimension: usize, half_extent: i64) -> Self {
        LatticeBox {
            dimension,
            half_extent,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_extent(&self) -> i64 {
        self.half_extent
    }

    fn side(&self) -> i64 {
        2 * self.half_extent + 1
    }

    pub fn site_count(&self) -> usize {
        let side = self.side() as usize;
        if self.dimension == 1 {
            side
        } else {
            side * side
        }
    }

    /// Number of frozen (all-even-coordinate) sites in the box.
    pub fn frozen_count(&self) -> usize {
        let evens = (self.half_extent + 1) as usize; // half_extent is even
        if self.dimension == 1 {
            evens
        } else {
            evens * evens
        }
    }

    pub fn contains(&self, site: Site) -> bool {
        let l = self.half_extent;
        let in_x = site[0].abs() <= l;
        match self.dimension {
            1 => in_x && site[1] == 0,
            _ => in_x && site[1].abs() <= l,
        }
    }

    /// Row-major index of a site, x fastest in 1d, y fastest in 2d.
    pub fn index_of(&self, site: Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let l = self.half_extent;
        Some(if self.dimension == 1 {
            (site[0] + l) as usize
        } else {
            ((site[0] + l) * self.side() + (site[1] + l)) as usize
        })
    }

    pub fn site_at(&self, index: usize) -> Site {
        let l = self.half_extent;
        if self.dimension == 1 {
            [index as i64 - l, 0]
        } else {
            let side = self.side();
            let i = index as i64;
            [i / side - l, i % side - l]
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count()).map(|i| self.site_at(i))
    }

    /// A site is frozen when every coordinate is even.
    pub fn is_frozen(site: Site) -> bool {
        site[0] % 2 == 0 && site[1] % 2 == 0
    }

    pub fn frozen_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites().filter(|&s| Self::is_frozen(s))
    }

    pub fn hidden_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites().filter(|&s| !Self::is_frozen(s))
    }
}

/// Sign of the doubly-alternating pattern at decimated coordinates:
/// +1 (North) when floor(i'/2) + floor(j'/2) is even, else -1 (South).
pub fn dblyalt_sign(dimension: usize, visible: Site) -> i8 {
    let mut s = visible[0].div_euclid(2);
    if dimension == 2 {
        s += visible[1].div_euclid(2);
    }
    if s.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Doubly-alternating visible angle at decimated coordinates: N or S.
pub fn dblyalt_angle(dimension: usize, visible: Site) -> Angle {
    if dblyalt_sign(dimension, visible) > 0 {
        Angle::NORTH
    } else {
        Angle::SOUTH
    }
}

/// Constraint angle at an original-lattice frozen site (all coordinates
/// even), extended over all of Z^d.
pub fn frozen_constraint_angle(dimension: usize, site: Site) -> Angle {
    debug_assert!(LatticeBox::is_frozen(site));
    dblyalt_angle(dimension, [site[0] / 2, site[1] / 2])
}

/// The site types of the decorated lattice under the doubly-alternating
/// constraint. In one dimension only `Frozen` and types 1-3 occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteClass {
    Frozen,
    /// Between two N's.
    Type1,
    /// Between two S's.
    Type2,
    /// Between an N and an S.
    Type3,
    /// Inside an N-square.
    Type4,
    /// Inside an S-square.
    Type5,
    /// Two N and two S diagonal neighbours, the equal pairs on parallel axes.
    Type6,
    /// Two N and two S diagonal neighbours on diagonally opposite sites.
    Type7,
}

impl std::fmt::Display for SiteClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SiteClass::Frozen => "Frozen",
            SiteClass::Type1 => "Type1",
            SiteClass::Type2 => "Type2",
            SiteClass::Type3 => "Type3",
            SiteClass::Type4 => "Type4",
            SiteClass::Type5 => "Type5",
            SiteClass::Type6 => "Type6",
            SiteClass::Type7 => "Type7",
        };
        write!(f, "{name}")
    }
}

/// Classify a site against the infinite doubly-alternating pattern. Edge
/// sites of a finite box classify exactly like bulk sites because the
/// pattern extends over all of Z^d.
pub fn classify_site(lattice: &LatticeBox, site: Site) -> SiteClass {
    classify_with(lattice.dimension(), site, |v| {
        dblyalt_sign(lattice.dimension(), [v[0] / 2, v[1] / 2]) > 0
    })
}

/// Classification with an arbitrary N/S assignment on the frozen sublattice;
/// `north` receives original-lattice frozen coordinates.
pub(crate) fn classify_with(
    dimension: usize,
    site: Site,
    north: impl Fn(Site) -> bool,
) -> SiteClass {
    let parity = [site[0].rem_euclid(2), site[1].rem_euclid(2)];
    if parity == [0, 0] {
        return SiteClass::Frozen;
    }
    if dimension == 1 {
        let left = north([site[0] - 1, 0]);
        let right = north([site[0] + 1, 0]);
        return match (left, right) {
            (true, true) => SiteClass::Type1,
            (false, false) => SiteClass::Type2,
            _ => SiteClass::Type3,
        };
    }
    if parity[0] != parity[1] {
        // One odd coordinate: the two nearest neighbours along it are frozen.
        let axis = if parity[0] == 1 { 0 } else { 1 };
        let mut a = site;
        let mut b = site;
        a[axis] -= 1;
        b[axis] += 1;
        return match (north(a), north(b)) {
            (true, true) => SiteClass::Type1,
            (false, false) => SiteClass::Type2,
            _ => SiteClass::Type3,
        };
    }
    // Both coordinates odd: the four diagonal neighbours are frozen.
    let ll = north([site[0] - 1, site[1] - 1]);
    let lr = north([site[0] + 1, site[1] - 1]);
    let ul = north([site[0] - 1, site[1] + 1]);
    let ur = north([site[0] + 1, site[1] + 1]);
    let n_count = [ll, lr, ul, ur].iter().filter(|&&b| b).count();
    match n_count {
        4 => SiteClass::Type4,
        0 => SiteClass::Type5,
        _ => {
            // Two of each. Same column or same row => parallel axes.
            if (ll == ul && lr == ur) || (ll == lr && ul == ur) {
                SiteClass::Type6
            } else {
                SiteClass::Type7
            }
        }
    }
}

/// Angles for every site of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfig {
    lattice: LatticeBox,
    angles: Vec<Angle>,
}

impl SpinConfig {
    pub fn constant(lattice: LatticeBox, angle: Angle) -> Self {
        SpinConfig {
            lattice,
            angles: vec![angle; lattice.site_count()],
        }
    }

    /// Doubly-alternating angles on the frozen sublattice, `hidden` everywhere else.
    pub fn constrained(lattice: LatticeBox, hidden: Angle) -> Self {
        Self::from_fn(lattice, |s| {
            if LatticeBox::is_frozen(s) {
                frozen_constraint_angle(lattice.dimension(), s)
            } else {
                hidden
            }
        })
    }

    pub fn from_fn(lattice: LatticeBox, f: impl Fn(Site) -> Angle) -> Self {
        SpinConfig {
            lattice,
            angles: lattice.sites().map(f).collect(),
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    /// Panics when the site lies outside the box.
    pub fn angle(&self, site: Site) -> Angle {
        let idx = self
            .lattice
            .index_of(site)
            .unwrap_or_else(|| panic!("site ({}, {}) outside box", site[0], site[1]));
        self.angles[idx]
    }

    pub fn angle_at(&self, index: usize) -> Angle {
        self.angles[index]
    }

    pub fn set_angle(&mut self, site: Site, angle: Angle) {
        let idx = self
            .lattice
            .index_of(site)
            .unwrap_or_else(|| panic!("site ({}, {}) outside box", site[0], site[1]));
        self.angles[idx] = angle;
    }

    pub fn set_angle_at(&mut self, index: usize, angle: Angle) {
        self.angles[index] = angle;
    }

    /// Mean horizontal component over hidden sites.
    pub fn m_ew(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (idx, site) in self.lattice.sites().enumerate() {
            if !LatticeBox::is_frozen(site) {
                sum += self.angles[idx].unit_vector()[0];
                n += 1;
            }
        }
        sum / n as f64
    }

    /// CSV dump with columns `x[,y],theta,frozen,site_class`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.lattice.dimension() == 1 {
            writeln!(w, "x,theta,frozen,site_class")?;
        } else {
            writeln!(w, "x,y,theta,frozen,site_class")?;
        }
        for (idx, site) in self.lattice.sites().enumerate() {
            let frozen = LatticeBox::is_frozen(site) as u8;
            let class = classify_site(&self.lattice, site);
            if self.lattice.dimension() == 1 {
                writeln!(w, "{},{},{},{}", site[0], self.angles[idx], frozen, class)?;
            } else {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    site[0], site[1], self.angles[idx], frozen, class
                )?;
            }
        }
        Ok(())
    }
}

/// The decimation map: keep the spin at original site 2i' as the visible
/// spin at decimated site i'. An exact copy, no arithmetic on angles.
pub fn decimate(full: &SpinConfig) -> Result<SpinConfig> {
    let l = full.lattice().half_extent();
    if l % 2 != 0 {
        return Err(Error::OddHalfExtent(l));
    }
    let image = LatticeBox::unvalidated(full.lattice().dimension(), l / 2);
    Ok(SpinConfig::from_fn(image, |s| {
        full.angle([2 * s[0], 2 * s[1]])
    }))
}

/// Explicit visible angles for the frozen sites of a box.
pub type VisibleAngles = HashMap<Site, Angle>;
