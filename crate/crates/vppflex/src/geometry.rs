//! 2-D computational geometry over PQ point clouds.
//!
//! Convex hulls (Andrew's monotone chain), shoelace areas and membership
//! tests. Hulls are used to approximate region boundaries; the underlying
//! regions may be non-convex, so a hull is always an outer approximation.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Convex polygon over (p_kw, q_kvar) points, vertices in counter-clockwise
/// order. Degenerate inputs (single point, collinear set) produce hulls with
/// one or two vertices and zero area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hull {
    pub vertices: Vec<(f64, f64)>,
    pub area_kw_kvar: f64,
}

// Orientation with a relative epsilon: cross products smaller than
// 1e-12 times the coordinate magnitude count as collinear.
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn collinear_eps(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let scale = o.0.abs().max(o.1.abs()).max(a.0.abs()).max(a.1.abs()).max(b.0.abs()).max(b.1.abs());
    1e-12 * scale * scale
}

fn shoelace(vertices: &[(f64, f64)]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..vertices.len() {
        let (x1, y1) = vertices[i];
        let (x2, y2) = vertices[(i + 1) % vertices.len()];
        acc += x1 * y2 - x2 * y1;
    }
    acc / 2.0
}

/// Minimal convex polygon containing all input points.
///
/// Errors on empty input. One point yields a single-vertex hull, a
/// collinear set yields the two extreme points; both have area 0.
pub fn convex_hull(points: &[(f64, f64)]) -> Result<Hull> {
    if points.is_empty() {
        return Err(Error::Geometry("convex hull of an empty point set".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("non-finite coordinate"));
    pts.dedup();

    if pts.len() == 1 {
        return Ok(Hull {
            vertices: pts,
            area_kw_kvar: 0.0,
        });
    }

    // Monotone chain: lower then upper hull, non-left turns dropped.
    fn build(iter: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
        let mut chain: Vec<(f64, f64)> = Vec::new();
        for p in iter {
            while chain.len() >= 2 {
                let o = chain[chain.len() - 2];
                let a = chain[chain.len() - 1];
                if cross(o, a, p) <= collinear_eps(o, a, p) {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(p);
        }
        chain
    }

    let mut lower = build(pts.iter().copied());
    let mut upper = build(pts.iter().rev().copied());

    // each chain ends where the other begins
    lower.pop();
    upper.pop();
    let mut vertices = lower;
    vertices.append(&mut upper);
    // collinear input collapses to the two extremes
    if vertices.len() < 2 {
        vertices = vec![*pts.first().unwrap(), *pts.last().unwrap()];
    }

    let area = shoelace(&vertices);
    Ok(Hull {
        vertices,
        area_kw_kvar: area.max(0.0),
    })
}

/// Shoelace area of the hull, ≥ 0.
pub fn hull_area(hull: &Hull) -> f64 {
    hull.area_kw_kvar
}

/// True iff the point lies inside or on the boundary of the hull.
///
/// Half-plane tests with a tolerance of 1e-9 of the hull diameter, so
/// vertices and boundary points test inside.
pub fn hull_contains(hull: &Hull, point: (f64, f64)) -> bool {
    let v = &hull.vertices;
    match v.len() {
        0 => false,
        1 => {
            let d = dist(v[0], point);
            d <= tol_of(hull)
        }
        2 => dist_to_segment(v[0], v[1], point) <= tol_of(hull),
        _ => {
            let tol = tol_of(hull) * diameter(hull);
            for i in 0..v.len() {
                let a = v[i];
                let b = v[(i + 1) % v.len()];
                if cross(a, b, point) < -tol {
                    return false;
                }
            }
            true
        }
    }
}

fn tol_of(hull: &Hull) -> f64 {
    let d = diameter(hull);
    if d == 0.0 {
        1e-9
    } else {
        1e-9 * d
    }
}

fn diameter(hull: &Hull) -> f64 {
    let v = &hull.vertices;
    let mut d: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d = d.max(dist(v[i], v[j]));
        }
    }
    d.max(1.0)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn dist_to_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (((p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1)) / len2).clamp(0.0, 1.0);
    dist((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)), p)
}

/// Centroid of the hull vertices (arithmetic mean). For a non-degenerate
/// hull this is an interior point.
pub fn hull_centroid(hull: &Hull) -> (f64, f64) {
    let n = hull.vertices.len() as f64;
    let (sp, sq) = hull
        .vertices
        .iter()
        .fold((0.0, 0.0), |(sp, sq), (p, q)| (sp + p, sq + q));
    (sp / n, sq / n)
}
