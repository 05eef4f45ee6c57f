//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use kfp_core::maximal::CylinderFamily;
use kfp_core::GridField;

/// Exhaustive scan: every node against every cylinder of the family.
pub fn maximal_oracle(f: &GridField, fam: &CylinderFamily, oscillation: bool) -> Vec<f64> {
    let g = &f.spec;
    let d = g.d;
    let slab = g.slab_len();
    let mut best = vec![0.0f64; g.len()];
    let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut inside = Vec::new();
    for q in fam.cylinders(g).unwrap() {
        inside.clear();
        for i in 0..g.len() {
            let t = g.time(i / slab);
            g.spatial_coords(i % slab, &mut x, &mut v);
            if q.contains_raw(t, &x, &v) {
                inside.push(i);
            }
        }
        if inside.is_empty() {
            continue;
        }
        let m = inside.len() as f64;
        let val = if oscillation {
            let mean = inside.iter().map(|&i| f.values[i]).sum::<f64>() / m;
            inside.iter().map(|&i| (f.values[i] - mean).abs()).sum::<f64>() / m
        } else {
            inside.iter().map(|&i| f.values[i].abs()).sum::<f64>() / m
        };
        for &i in &inside {
            best[i] = best[i].max(val);
        }
    }
    best
}
