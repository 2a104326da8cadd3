//! Hexagonal site layout, UE drops and cell attachment.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::{LayoutConfig, Scenario};
use crate::error::{Error, Result};
use crate::radio::{antenna_gain, LinkState};
use crate::traffic::stream_rng;

/// Stream id of the layout generator; UE streams use small ids.
const LAYOUT_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub index: usize,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub site: usize,
    /// Boresight azimuth, degrees counter-clockwise from east. Ignored for
    /// omni cells.
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeDrop {
    pub ue_id: u32,
    pub group: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub serving_cell: usize,
    /// Link to the serving cell.
    pub link: LinkState,
    /// Coupling loss to every cell, by cell index. Infinite for cells a
    /// pinned UE does not see.
    pub coupling_loss_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub ues: Vec<UeDrop>,
}

/// Sites within `rings` of the origin: `1 + 3 r (r + 1)` of them.
pub fn hex_sites(rings: u32, isd_m: f64) -> Vec<Site> {
    let r = rings as i64;
    let mut out = Vec::new();
    for q in -r..=r {
        for s in (-r).max(-q - r)..=r.min(-q + r) {
            let (x, y) = axial_to_xy(q, s, isd_m);
            out.push((q.abs().max(s.abs()).max((q + s).abs()), x, y));
        }
    }
    // centre first, then ring by ring, stable within a ring
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.total_cmp(&b.2)).then(a.1.total_cmp(&b.1)));
    out.into_iter().enumerate().map(|(index, (_, x_m, y_m))| Site { index, x_m, y_m }).collect()
}

fn axial_to_xy(q: i64, r: i64, isd: f64) -> (f64, f64) {
    (isd * (q as f64 + r as f64 / 2.0), isd * (3f64.sqrt() / 2.0) * r as f64)
}

/// Offsets of the six wraparound images of a layout with `rings` rings.
pub fn wrap_offsets(rings: u32, isd_m: f64) -> Vec<(f64, f64)> {
    let r = rings as i64;
    // axial shift (2r + 1, -r), rotated in 60 degree steps
    let (mut q, mut s) = (2 * r + 1, -r);
    let mut out = Vec::with_capacity(6);
    for _ in 0..6 {
        out.push(axial_to_xy(q, s, isd_m));
        // 60 degree rotation in cube coordinates: (q, r, s) -> (-s, -q, -r)
        let cube_s = -q - s;
        (q, s) = (-cube_s, -q);
    }
    out
}

/// True when `(x, y)` lies inside the hexagon of a site at the origin.
fn in_hexagon(x: f64, y: f64, isd: f64) -> bool {
    let half = isd / 2.0 + 1e-9;
    [0f64, 60.0, 120.0].iter().all(|a| {
        let (s, c) = a.to_radians().sin_cos();
        (x * c + y * s).abs() <= half
    })
}

fn cells_for(sites: &[Site], sectors: u32) -> Vec<Cell> {
    let mut out = Vec::new();
    for s in sites {
        for k in 0..sectors {
            let azimuth_deg = if sectors == 1 { 0.0 } else { 30.0 + 120.0 * f64::from(k) };
            out.push(Cell { index: out.len(), site: s.index, azimuth_deg });
        }
    }
    out
}

/// Link from a UE at `(x, y)` to `cell`, with the nearest wraparound image
/// of its site when wraparound is on.
#[allow(clippy::too_many_arguments)]
fn link_to(
    cfg: &LayoutConfig,
    site: &Site,
    cell: &Cell,
    x: f64,
    y: f64,
    shadow_db: f64,
    images: &[(f64, f64)],
) -> Result<LinkState> {
    let mut best = (x - site.x_m, y - site.y_m);
    for &(ox, oy) in images {
        let d = (x - site.x_m - ox, y - site.y_m - oy);
        if d.0.hypot(d.1) < best.0.hypot(best.1) {
            best = d;
        }
    }
    let dist = best.0.hypot(best.1).max(cfg.path_loss.min_distance_m);
    let pl = cfg.path_loss.loss_db(dist)?;
    let elevation = (cfg.bs_height_m - cfg.ue_height_m).atan2(dist).to_degrees();
    let azimuth = best.1.atan2(best.0).to_degrees() - cell.azimuth_deg;
    let gain = antenna_gain(azimuth, elevation, &cfg.antenna);
    Ok(LinkState::new(dist, pl, shadow_db, cfg.body_loss_db, gain, cfg.ue_antenna_gain_db))
}

/// Builds sites and cells, drops every UE and attaches it to the cell with
/// the smallest coupling loss. UE `i` is dropped uniformly in the area of
/// cell `i mod cells`.
pub fn build_layout(sc: &Scenario) -> Result<Layout> {
    let cfg = &sc.layout;
    let n_ues: u32 = sc.ue_groups.iter().map(|g| g.count).sum();
    if n_ues == 0 {
        return Err(Error::config("ue_groups", "need at least one UE"));
    }
    let sites = hex_sites(cfg.rings, cfg.isd_m);
    let cells = cells_for(&sites, cfg.sectors);
    let images = if cfg.wraparound { wrap_offsets(cfg.rings, cfg.isd_m) } else { Vec::new() };
    let mut rng = stream_rng(sc.seed, LAYOUT_STREAM);
    let shadow = Normal::new(0.0, cfg.shadowing_std_db).map_err(|e| Error::config("layout.shadowing_std_db", e.to_string()))?;

    let mut ues = Vec::with_capacity(n_ues as usize);
    let mut ue_id = 0u32;
    for (group, g) in sc.ue_groups.iter().enumerate() {
        for _ in 0..g.count {
            let home = &cells[ue_id as usize % cells.len()];
            let site = &sites[home.site];
            if let Some(cl) = g.fixed_coupling_loss_db {
                let mut loss = vec![f64::INFINITY; cells.len()];
                loss[home.index] = cl;
                ues.push(UeDrop {
                    ue_id,
                    group,
                    x_m: site.x_m,
                    y_m: site.y_m,
                    serving_cell: home.index,
                    link: LinkState::with_coupling_loss(cl),
                    coupling_loss_db: loss,
                });
                ue_id += 1;
                continue;
            }
            let (dx, dy) = loop {
                let dx = (rng.random::<f64>() * 2.0 - 1.0) * cfg.isd_m / 3f64.sqrt();
                let dy = (rng.random::<f64>() * 2.0 - 1.0) * cfg.isd_m / 3f64.sqrt();
                if !in_hexagon(dx, dy, cfg.isd_m) || dx.hypot(dy) < cfg.path_loss.min_distance_m {
                    continue;
                }
                let off = crate::radio::wrap_deg(dy.atan2(dx).to_degrees() - home.azimuth_deg);
                if cfg.sectors == 1 || off.abs() <= 60.0 {
                    break (dx, dy);
                }
            };
            let (x, y) = (site.x_m + dx, site.y_m + dy);
            // one shadowing draw per UE and site, shared by its sectors
            let shadows: Vec<f64> = sites.iter().map(|_| shadow.sample(&mut rng)).collect();
            let links: Vec<LinkState> = cells
                .iter()
                .map(|c| link_to(cfg, &sites[c.site], c, x, y, shadows[c.site], &images))
                .collect::<Result<_>>()?;
            let serving = attach(&links);
            ues.push(UeDrop {
                ue_id,
                group,
                x_m: x,
                y_m: y,
                serving_cell: serving,
                link: links[serving],
                coupling_loss_db: links.iter().map(|l| l.coupling_loss_db).collect(),
            });
            ue_id += 1;
        }
    }
    Ok(Layout { sites, cells, ues })
}

/// Index of the minimum coupling loss; ties go to the lower index.
fn attach(links: &[LinkState]) -> usize {
    let mut best = 0;
    for (i, l) in links.iter().enumerate() {
        if l.coupling_loss_db < links[best].coupling_loss_db {
            best = i;
        }
    }
    best
}
