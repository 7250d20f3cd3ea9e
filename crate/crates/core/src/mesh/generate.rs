//! Deterministic polar-grid triangulation of the unit disk.
//!
//! Nodes sit on concentric rings. Every ring holds a multiple of the
//! electrode count `L` nodes, so the mesh is invariant under rotation by
//! `2π/L` and rotating a homogeneous problem by one electrode maps the mesh
//! onto itself. Ring sizes grow by a fixed step from the centre until they
//! reach the boundary count and then stay constant; the number of rings is
//! chosen to land near the requested element count.

use std::f64::consts::PI;

use super::{ElectrodeLayout, TriMesh};
use crate::error::{Error, Result};

/// Elements per squared boundary-node count in the reference meshes
/// (1968 / 128², 492 / 64²).
const ELEMENTS_PER_BOUNDARY_NODE_SQ: f64 = 0.12;
const MIN_TARGET: usize = 64;
const MIN_FIRST_RING: usize = 6;
/// Accept the first plan (ordered by closeness to the reference density)
/// whose element count is within this fraction of the target.
const ACCEPT_REL_ERR: f64 = 0.05;
const MAX_REL_ERR: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq)]
struct RingPlan {
    /// Boundary edges per electrode sector.
    per_sector: usize,
    /// Node count of each ring divided by `L`, innermost first.
    multiples: Vec<usize>,
}

impl RingPlan {
    fn element_count(&self, electrodes: usize) -> usize {
        let total: usize = self.multiples.iter().sum();
        2 * electrodes * total - electrodes * self.per_sector
    }
}

fn electrode_edges_per_sector(per_sector: usize, coverage: f64) -> usize {
    ((per_sector as f64 * coverage).round() as usize).min(per_sector.saturating_sub(1))
}

fn plan_rings(target: usize, layout: &ElectrodeLayout) -> Result<RingPlan> {
    let l = layout.count;
    let ideal_boundary = (target as f64 / ELEMENTS_PER_BOUNDARY_NODE_SQ).sqrt();
    let max_sector = ((2.0 * ideal_boundary / l as f64).ceil() as usize).max(2);

    let mut sectors: Vec<usize> = (2..=max_sector)
        .filter(|&p| electrode_edges_per_sector(p, layout.coverage_fraction) >= 1)
        .collect();
    if sectors.is_empty() {
        return Err(Error::MeshGeneration(format!(
            "{target} elements are too few to give each of {l} electrodes a boundary edge"
        )));
    }
    sectors.sort_by(|&a, &b| {
        let da = (a as f64 * l as f64 - ideal_boundary).abs();
        let db = (b as f64 * l as f64 - ideal_boundary).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });

    let first_step = MIN_FIRST_RING.div_ceil(l).max(1);
    let mut best: Option<(f64, RingPlan)> = None;
    for &p in &sectors {
        let mut best_for_p: Option<(f64, RingPlan)> = None;
        for step in first_step..=p {
            let mut multiples: Vec<usize> = Vec::new();
            let mut k = 1;
            loop {
                multiples.push((step * k).min(p));
                k += 1;
                if *multiples.last().unwrap() < p {
                    continue;
                }
                let plan = RingPlan { per_sector: p, multiples: multiples.clone() };
                let count = plan.element_count(l);
                let err = (count as f64 - target as f64).abs() / target as f64;
                if best_for_p.as_ref().is_none_or(|(e, _)| err < *e) {
                    best_for_p = Some((err, plan));
                }
                if count > 2 * target {
                    break;
                }
            }
        }
        let Some((err, plan)) = best_for_p else { continue };
        if err <= ACCEPT_REL_ERR {
            return Ok(plan);
        }
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, plan));
        }
    }
    match best {
        Some((err, plan)) if err <= MAX_REL_ERR => Ok(plan),
        Some((err, _)) => Err(Error::MeshGeneration(format!(
            "closest polar mesh misses {target} elements by {:.0}%",
            100.0 * err
        ))),
        None => Err(Error::MeshGeneration(format!("no admissible ring plan for {target} elements"))),
    }
}

/// Generates a disk mesh with roughly `target_elements` triangles and
/// `layout.count` equispaced electrodes numbered clockwise.
///
/// Electrode `l` is centred in the angular sector starting at
/// `-2πl/L` (electrode 0 at angle 0, electrode 1 next in the clockwise
/// direction), covering `coverage_fraction` of that sector.
pub fn generate_disk_mesh(target_elements: usize, layout: &ElectrodeLayout) -> Result<TriMesh> {
    layout.validate()?;
    if target_elements < MIN_TARGET {
        return Err(Error::MeshGeneration(format!(
            "target of {target_elements} elements is below the minimum of {MIN_TARGET}"
        )));
    }
    let plan = plan_rings(target_elements, layout)?;
    let l = layout.count;
    let rings = plan.multiples.len();

    // Angles are kept as exact fractions (2i + half_offset) / (2n) of a turn so
    // the zipper below makes the same choice in every sector.
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings);
    let mut ring_size = Vec::with_capacity(rings);
    let mut ring_offset = Vec::with_capacity(rings);
    for (k, &m) in plan.multiples.iter().enumerate() {
        let n = m * l;
        let offset = (rings - 1 - k) % 2;
        let radius = if k + 1 == rings { 1.0 } else { (k + 1) as f64 / rings as f64 };
        ring_start.push(nodes.len());
        ring_size.push(n);
        ring_offset.push(offset);
        for i in 0..n {
            let theta = 2.0 * PI * (2 * i + offset) as f64 / (2 * n) as f64;
            nodes.push([radius * theta.cos(), radius * theta.sin()]);
        }
    }

    let mut elements = Vec::new();
    let (s0, n0) = (ring_start[0], ring_size[0]);
    for i in 0..n0 {
        elements.push([0, s0 + i, s0 + (i + 1) % n0]);
    }
    for k in 1..rings {
        let (sa, na, oa) = (ring_start[k - 1], ring_size[k - 1], ring_offset[k - 1]);
        let (sb, nb, ob) = (ring_start[k], ring_size[k], ring_offset[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            // Compare the angles of the next inner and next outer node.
            let inner_next = (2 * (i + 1) + oa) * nb;
            let outer_next = (2 * (j + 1) + ob) * na;
            let advance_inner = j == nb || (i < na && inner_next <= outer_next);
            if advance_inner {
                elements.push([sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                elements.push([sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            }
        }
    }
    for tri in &mut elements {
        if super::signed_area(&nodes, *tri) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let boundary_start = ring_start[rings - 1];
    let nb = ring_size[rings - 1];
    let p = plan.per_sector;
    let covered = electrode_edges_per_sector(p, layout.coverage_fraction);
    let lead = (p - covered) / 2;
    let electrodes = (0..l)
        .map(|e| {
            let sector = (l - e) % l;
            (0..covered)
                .map(|t| {
                    let edge = sector * p + lead + t;
                    [boundary_start + edge, boundary_start + (edge + 1) % nb]
                })
                .collect()
        })
        .collect();

    TriMesh::from_parts(nodes, elements, electrodes)
}
