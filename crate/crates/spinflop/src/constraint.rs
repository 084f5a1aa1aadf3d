//! Effective external fields on hidden sites induced by freezing the
//! visible spins.
//!
//! The field at a hidden site is the coupling-weighted vector sum of the
//! frozen spins within the truncation radius. Contributions are grouped by
//! squared distance before multiplying by the coupling, so for pure N/S
//! constraints every cancellation is an exact integer cancellation and the
//! zero-field site classes come out as exactly (0, 0).

use std::collections::BTreeMap;
use std::io::Write;

use crate::angle::Angle;
use crate::couplings::{CouplingModel, Family};
use crate::error::{Error, Result};
use crate::lattice::{
    classify_site, frozen_constraint_angle, LatticeBox, Site, SiteClass, VisibleAngles,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the frozen sublattice is dressed.
#[derive(Debug, Clone, Copy)]
pub enum VisibleSpec<'a> {
    /// The doubly-alternating pattern, extended over all of Z^d.
    DoublyAlternating,
    /// Its global N/S flip.
    DoublyAlternatingFlipped,
    /// Explicit angles for the frozen sites of the box; no extension beyond
    /// the box. Must cover every frozen site.
    Explicit(&'a VisibleAngles),
}

/// Per-site effective field, zero on frozen sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    lattice: LatticeBox,
    model: CouplingModel,
    h: Vec<[f64; 2]>,
}

/// Compute the effective field induced on every hidden site of the box.
pub fn effective_field(
    lattice: LatticeBox,
    model: &CouplingModel,
    visible: VisibleSpec<'_>,
) -> Result<FieldMap> {
    model.check_dimension(lattice.dimension())?;
    if let VisibleSpec::Explicit(map) = visible {
        for site in lattice.frozen_sites() {
            if !map.contains_key(&site) {
                return Err(Error::MissingFrozenAngle(site[0], site[1]));
            }
        }
    }

    let indices: Vec<usize> = (0..lattice.site_count()).collect();
    let field_at = |&idx: &usize| -> [f64; 2] {
        let site = lattice.site_at(idx);
        if LatticeBox::is_frozen(site) {
            [0.0, 0.0]
        } else {
            site_field(&lattice, model, &visible, site)
        }
    };

    #[cfg(feature = "parallel")]
    let h: Vec<[f64; 2]> = indices.par_iter().map(field_at).collect();
    #[cfg(not(feature = "parallel"))]
    let h: Vec<[f64; 2]> = indices.iter().map(field_at).collect();

    Ok(FieldMap {
        lattice,
        model: *model,
        h,
    })
}

fn site_field(
    lattice: &LatticeBox,
    model: &CouplingModel,
    visible: &VisibleSpec<'_>,
    site: Site,
) -> [f64; 2] {
    let range = model.range();
    let dim = lattice.dimension();
    // Vector sums per squared-distance class. Canonical N/S unit vectors are
    // exact, so a class whose signs cancel sums to exactly zero.
    let mut classes: BTreeMap<i64, [f64; 2]> = BTreeMap::new();
    let add = |v: Site, classes: &mut BTreeMap<i64, [f64; 2]>| {
        let angle = match visible {
            VisibleSpec::DoublyAlternating => frozen_constraint_angle(dim, v),
            VisibleSpec::DoublyAlternatingFlipped => {
                let a = frozen_constraint_angle(dim, v);
                if a == Angle::NORTH {
                    Angle::SOUTH
                } else {
                    Angle::NORTH
                }
            }
            VisibleSpec::Explicit(map) => {
                if !lattice.contains(v) {
                    return;
                }
                map[&v]
            }
        };
        let dx = site[0] - v[0];
        let dy = site[1] - v[1];
        let d2 = dx * dx + dy * dy;
        let u = angle.unit_vector();
        let entry = classes.entry(d2).or_insert([0.0, 0.0]);
        entry[0] += u[0];
        entry[1] += u[1];
    };

    let even_lo = |c: i64| -> i64 {
        let lo = c - range;
        if lo % 2 == 0 {
            lo
        } else {
            lo + 1
        }
    };
    let mut vx = even_lo(site[0]);
    while vx <= site[0] + range {
        if dim == 1 {
            let d = (site[0] - vx).abs();
            if d > 0 && d <= range {
                add([vx, 0], &mut classes);
            }
        } else {
            let mut vy = even_lo(site[1]);
            while vy <= site[1] + range {
                let dx = site[0] - vx;
                let dy = site[1] - vy;
                let d2 = dx * dx + dy * dy;
                if d2 > 0 && d2 <= range * range {
                    add([vx, vy], &mut classes);
                }
                vy += 2;
            }
        }
        vx += 2;
    }

    let mut h = [0.0, 0.0];
    for (d2, vec) in classes {
        let j = model.coupling_for_d2(d2);
        if j != 0.0 && (vec[0] != 0.0 || vec[1] != 0.0) {
            h[0] += j * vec[0];
            h[1] += j * vec[1];
        }
    }
    h
}

impl FieldMap {
    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn model(&self) -> &CouplingModel {
        &self.model
    }

    pub fn field(&self, site: Site) -> [f64; 2] {
        let idx = self
            .lattice
            .index_of(site)
            .unwrap_or_else(|| panic!("site ({}, {}) outside box", site[0], site[1]));
        self.h[idx]
    }

    pub fn field_at(&self, index: usize) -> [f64; 2] {
        self.h[index]
    }

    pub fn fields(&self) -> &[[f64; 2]] {
        &self.h
    }

    /// A copy with every field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FieldMap {
        FieldMap {
            lattice: self.lattice,
            model: self.model,
            h: self.h.iter().map(|h| [factor * h[0], factor * h[1]]).collect(),
        }
    }

    /// Overwrite one field value; used for negative controls and variants.
    pub fn set_field(&mut self, site: Site, h: [f64; 2]) {
        let idx = self
            .lattice
            .index_of(site)
            .unwrap_or_else(|| panic!("site ({}, {}) outside box", site[0], site[1]));
        self.h[idx] = h;
    }

    /// CSV dump with columns `x[,y],h1,h2,site_class`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.lattice.dimension() == 1 {
            writeln!(w, "x,h1,h2,site_class")?;
        } else {
            writeln!(w, "x,y,h1,h2,site_class")?;
        }
        for (idx, site) in self.lattice.sites().enumerate() {
            let class = classify_site(&self.lattice, site);
            let [h1, h2] = self.h[idx];
            if self.lattice.dimension() == 1 {
                writeln!(w, "{},{},{},{}", site[0], h1, h2, class)?;
            } else {
                writeln!(w, "{},{},{},{},{}", site[0], site[1], h1, h2, class)?;
            }
        }
        Ok(())
    }
}

/// One failed cancellation or sign check.
#[derive(Debug, Clone)]
pub struct CancellationViolation {
    pub site: Site,
    pub class: SiteClass,
    pub h: [f64; 2],
    pub rule: String,
}

/// Report of [`verify_cancellation`].
#[derive(Debug, Clone)]
pub struct CancellationReport {
    pub checked: usize,
    pub violations: Vec<CancellationViolation>,
}

impl CancellationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check a field map computed from a doubly-alternating constraint: the
/// horizontal component vanishes everywhere, and each site class carries
/// the field (exact zero, positive, or negative) its family dictates.
pub fn verify_cancellation(map: &FieldMap) -> CancellationReport {
    let lattice = map.lattice();
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for (idx, site) in lattice.sites().enumerate() {
        checked += 1;
        let class = classify_site(lattice, site);
        let h = map.field_at(idx);
        let mut fail = |rule: &str| {
            violations.push(CancellationViolation {
                site,
                class,
                h,
                rule: rule.to_string(),
            });
        };
        if class == SiteClass::Frozen {
            if h != [0.0, 0.0] {
                fail("frozen sites carry no field");
            }
            continue;
        }
        if h[0] != 0.0 {
            fail("e1 component must vanish for N/S constraints");
            continue;
        }
        match expected_sign(map.model().family(), class) {
            Some(0) => {
                if h[1] != 0.0 {
                    fail("cancellation must be exact");
                }
            }
            Some(s) if h[1] * s as f64 <= 0.0 || h[1].is_nan() => {
                fail("field sign must follow the site class");
            }
            Some(_) => {}
            None => {}
        }
    }
    CancellationReport {
        checked,
        violations,
    }
}

/// Expected sign of the e2 field per class: 0 for exact cancellation,
/// +1/-1 for N/S-aligned fields, None when the class does not occur.
fn expected_sign(family: Family, class: SiteClass) -> Option<i8> {
    use SiteClass::*;
    match (family, class) {
        (_, Type1) => Some(1),
        (_, Type2) => Some(-1),
        (_, Type3) => Some(0),
        (Family::LongRange2d, Type4) => Some(1),
        (Family::LongRange2d, Type5) => Some(-1),
        (Family::LongRange2d, Type6 | Type7) => Some(0),
        (_, Type4 | Type5 | Type6 | Type7) => Some(0),
        (_, Frozen) => None,
    }
}
