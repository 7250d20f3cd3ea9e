use std::collections::HashMap;

use eit_core::experiment::{Phantom, PhantomId, Workbench, MeshSpec, build_phantom};
use eit_core::forward::ForwardModel;
use eit_core::mesh::{build_transfer, generate_disk_mesh, parse_mesh, format_mesh, DifferenceOperator, ElectrodeLayout};
use eit_core::Exec;

fn layout() -> ElectrodeLayout {
    ElectrodeLayout::standard16()
}

#[test]
fn reference_meshes_are_valid_and_near_target_counts() {
    for (target, nodes) in [(1968, 1049), (492, 279)] {
        let mesh = generate_disk_mesh(target, &layout()).unwrap();
        mesh.validate().unwrap();
        let e = mesh.element_count() as f64;
        let n = mesh.node_count() as f64;
        assert!((e / target as f64 - 1.0).abs() < 0.15, "{e} elements for {target}");
        assert!((n / nodes as f64 - 1.0).abs() < 0.15, "{n} nodes for {nodes}");
        assert_eq!(mesh.electrode_count(), 16);
        assert!(mesh.electrode_edges().iter().all(|e| !e.is_empty()));
        for &[a, b] in mesh.boundary_edges() {
            for p in [mesh.nodes()[a], mesh.nodes()[b]] {
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-9);
            }
        }
        let reread = parse_mesh(&format_mesh(&mesh), "mem".as_ref()).unwrap();
        assert_eq!(reread.id(), mesh.id());
    }
}

#[test]
fn difference_rows_are_interior_edges() {
    let mesh = generate_disk_mesh(492, &layout()).unwrap();
    let mut edges: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (e, t) in mesh.elements().iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edges.entry([a.min(b), a.max(b)]).or_default().push(e);
        }
    }
    assert!(edges.values().all(|v| v.len() <= 2));
    let mut shared: Vec<[usize; 2]> = edges.values().filter(|v| v.len() == 2).map(|v| [v[0].min(v[1]), v[0].max(v[1])]).collect();
    shared.sort();
    let r = DifferenceOperator::from_mesh(&mesh);
    assert_eq!(r.rows(), shared.len());
    let mut pairs: Vec<[usize; 2]> = r.pairs().iter().map(|&[i, j]| [i.min(j), i.max(j)]).collect();
    pairs.sort();
    assert_eq!(pairs, shared);
    let ones = vec![3.5; mesh.element_count()];
    assert!(r.apply(&ones).iter().all(|&v| v == 0.0));
}

#[test]
fn transfer_covers_every_coarse_element_and_conserves_area() {
    let fine = generate_disk_mesh(1968, &layout()).unwrap();
    let coarse = generate_disk_mesh(492, &layout()).unwrap();
    let t = build_transfer(&fine, &coarse).unwrap();
    assert!(t.contributions().iter().all(|c| !c.is_empty()));
    let area: f64 = fine.areas().iter().sum();
    let coarse_area = coarse.total_area();
    // the coarse polygon is inscribed in the fine one, so the overlap is all of it
    assert!(coarse_area < area);
    assert!((t.total_weight() - coarse_area).abs() <= 1e-9 * coarse_area);
    // polygonal disks: areas sit just under π
    for a in [area, coarse_area] {
        let deficit = 1.0 - a / std::f64::consts::PI;
        assert!(deficit > 0.0 && deficit < 5e-3, "{deficit}");
    }
    let mapped = t.map_values(&vec![0.25; fine.element_count()]).unwrap();
    assert!(mapped.iter().all(|&v| (v - 0.25).abs() < 1e-14));
}

#[test]
fn phantom_a_system_factors_and_grounds() {
    let wb = Workbench::new(&MeshSpec::default(), Exec::default()).unwrap();
    let (fine, _) = wb.truth(&Phantom::reference(PhantomId::A)).unwrap();
    let sol = wb.fine.solve_forward(fine.values()).unwrap();
    for u in &sol.electrode_potentials {
        assert!(u.iter().all(|v| v.is_finite()));
        let scale = u.amax();
        assert!(u.sum().abs() <= 1e-14 * scale * u.len() as f64);
    }
    let u = wb.fine.predict(fine.values()).unwrap();
    assert_eq!(u.len(), 208);
    let _ = build_phantom(&Phantom::background(), wb.coarse.mesh()).unwrap();
}
