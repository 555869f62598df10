//! Independent reference implementations used only by tests. Plain
//! `[f64; 3]` arithmetic, no shared code with the library.
#![allow(dead_code)]

pub type V = [f64; 3];

pub fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: V, k: f64) -> V {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn norm(a: V) -> f64 {
    dot(a, a).sqrt()
}

fn ground(a: V) -> V {
    [a[0], a[1], 0.0]
}

fn arccos_between(a: V, b: V) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0).acos()
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn literal_band(theta: f64) -> bool {
    std::f64::consts::PI / 3.0 < theta && theta < 2.0 * std::f64::consts::PI / 3.0
}

pub fn prose_band(theta: f64) -> bool {
    !literal_band(theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1 {
    pub a_x: V,
    pub d_x: f64,
    pub a_y: V,
    pub d_y: f64,
    pub class: &'static str,
}

/// Dynamic input mapping, line by line. `near_horizontal(θ)` decides the
/// first branch. Ties on the projected dot products go to `x_s`; the
/// sideways test uses `d_s − o_U`. Returns `None` when the vertical branch
/// has a zero ground projection.
#[allow(clippy::too_many_arguments)]
pub fn algorithm1(
    x_s: V,
    y_s: V,
    j_x: V,
    j_y: V,
    e_t: V,
    d_s: V,
    o_u: V,
    near_horizontal: fn(f64) -> bool,
) -> Option<Alg1> {
    let z_g = [0.0, 0.0, 1.0];
    let theta = arccos_between(e_t, z_g);
    if near_horizontal(theta) {
        let p_x = ground(x_s);
        let p_y = ground(y_s);
        let (a_x, d_x) = if dot(j_x, p_x).abs() >= dot(j_x, p_y).abs() {
            (x_s, sgn(dot(j_x, p_x)))
        } else {
            (y_s, sgn(dot(j_x, p_y)))
        };
        let (a_y, d_y) = if dot(j_y, p_x).abs() >= dot(j_y, p_y).abs() {
            (x_s, sgn(dot(j_y, p_x)))
        } else {
            (y_s, sgn(dot(j_y, p_y)))
        };
        return Some(Alg1 { a_x, d_x, a_y, d_y, class: "near-horizontal" });
    }
    let (a_y, a_x, d_y) = if dot(y_s, z_g).abs() > dot(x_s, z_g).abs() {
        (y_s, x_s, sgn(dot(y_s, z_g)))
    } else {
        (x_s, y_s, sgn(dot(x_s, z_g)))
    };
    let p_x = ground(a_x);
    if norm(p_x) < 1e-9 {
        return None;
    }
    let theta_ax = arccos_between(p_x, j_y);
    let pi = std::f64::consts::PI;
    if 5.0 * pi / 6.0 > theta_ax && theta_ax > pi / 6.0 {
        return Some(Alg1 { a_x, d_x: sgn(dot(j_x, p_x)), a_y, d_y, class: "facing-user" });
    }
    // R = [j_x j_y j_x×j_y]; Rᵀ·v = (j_x·v, j_y·v, (j_x×j_y)·v)
    let rel = sub(d_s, o_u);
    let big_p_x = dot(j_x, rel);
    let d_x = if big_p_x < 0.0 { sgn(dot(j_y, p_x)) } else { -sgn(dot(j_y, p_x)) };
    let class = if big_p_x < 0.0 { "sideways-left" } else { "sideways-right" };
    Some(Alg1 { a_x, d_x, a_y, d_y, class })
}

/// Exhaustive DTW: minimum over every monotone warping path of the
/// forward-summed Euclidean cost.
pub fn dtw_enumerate(a: &[V], b: &[V]) -> (f64, Vec<(usize, usize)>) {
    fn walk(
        a: &[V],
        b: &[V],
        i: usize,
        j: usize,
        acc: f64,
        path: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        let acc = acc + norm(sub(a[i], b[j]));
        path.push((i, j));
        if i + 1 == a.len() && j + 1 == b.len() {
            if acc < best.0 {
                *best = (acc, path.clone());
            }
        } else {
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, path, best);
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, path, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, path, best);
            }
        }
        path.pop();
    }
    let mut best = (f64::INFINITY, Vec::new());
    walk(a, b, 0, 0, 0.0, &mut Vec::new(), &mut best);
    best
}

pub fn path_cost(a: &[V], b: &[V], path: &[(usize, usize)]) -> f64 {
    path.iter().fold(0.0, |acc, &(i, j)| acc + norm(sub(a[i], b[j])))
}

pub fn path_is_valid(path: &[(usize, usize)], n: usize, m: usize) -> bool {
    path.first() == Some(&(0, 0))
        && path.last() == Some(&(n - 1, m - 1))
        && path.windows(2).all(|w| {
            let (di, dj) = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
}

/// Exact test of whether two solid disks `(center, unit normal, radius)`
/// share a point.
pub fn disks_intersect(c1: V, n1: V, r1: f64, c2: V, n2: V, r2: f64) -> bool {
    let line = cross(n1, n2);
    let ll = dot(line, line);
    if ll < 1e-24 {
        // Parallel planes: touch only when coplanar.
        let gap = dot(sub(c2, c1), n1).abs();
        if gap > 1e-12 {
            return false;
        }
        let off = sub(c2, c1);
        let in_plane = sub(off, scale(n1, dot(off, n1)));
        return norm(in_plane) <= r1 + r2;
    }
    // Point on both planes: p = (h1 (n2×L) + h2 (L×n1)) / |L|².
    let (h1, h2) = (dot(n1, c1), dot(n2, c2));
    let p0 = scale(add(scale(cross(n2, line), h1), scale(cross(line, n1), h2)), 1.0 / ll);
    let u = scale(line, 1.0 / ll.sqrt());
    let chord = |c: V, r: f64| -> Option<(f64, f64)> {
        let w = sub(p0, c);
        let b = dot(w, u);
        let disc = b * b - (dot(w, w) - r * r);
        if disc < 0.0 {
            None
        } else {
            let s = disc.sqrt();
            Some((-b - s, -b + s))
        }
    };
    match (chord(c1, r1), chord(c2, r2)) {
        (Some((a0, a1)), Some((b0, b1))) => a0 <= b1 && b0 <= a1,
        _ => false,
    }
}

/// Cumulative arc length at each vertex.
pub fn arc_table(p: &[V]) -> Vec<f64> {
    let mut out = vec![0.0];
    for w in p.windows(2) {
        let last = *out.last().unwrap();
        out.push(last + norm(sub(w[1], w[0])));
    }
    out
}

/// Point at arc length `s` along the polyline.
pub fn point_at_arc(p: &[V], table: &[f64], s: f64) -> V {
    let k = table.partition_point(|&t| t <= s).clamp(1, p.len() - 1);
    let seg = table[k] - table[k - 1];
    let t = if seg > 0.0 { (s - table[k - 1]) / seg } else { 0.0 };
    add(p[k - 1], scale(sub(p[k], p[k - 1]), t))
}
