//! Convex hulls of small point clouds in one, two and three dimensions,
//! described by vertices and outward facet half-spaces.

use crate::error::{Error, Result};

/// Distance under which two points are merged before hulling.
pub const DEDUP_TOL: f64 = 1e-9;

const SNAP: f64 = (1u64 << 40) as f64;

/// Half-space `normal · x <= offset` bounding the hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Indices into [`Hull::vertices`].
    pub vertices: Vec<usize>,
    /// Unit outward normal.
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub facets: Vec<Facet>,
    /// Affine dimension of the cloud; smaller than `dim` for flat clouds,
    /// whose facets then include both sides of the supporting subspace.
    pub affine_dim: usize,
}

impl Hull {
    /// Membership up to `tol` in every facet's half-space.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        !self.facets.is_empty()
            && self
                .facets
                .iter()
                .all(|f| dot(&f.normal, point) <= f.offset + tol)
    }

    /// Max of `weights · v` over the hull.
    pub fn max_linear(&self, weights: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(weights, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Sorts lexicographically and drops points within [`DEDUP_TOL`] (max-norm)
/// of an earlier kept point.
pub fn dedup(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(sorted.len());
    for p in sorted {
        let dup = kept
            .iter()
            .rev()
            .take_while(|q| p[0] - q[0] <= DEDUP_TOL)
            .any(|q| p.iter().zip(q.iter()).all(|(x, y)| (x - y).abs() <= DEDUP_TOL));
        if !dup {
            kept.push(p);
        }
    }
    kept
}

/// Convex hull of `points`, all of the same dimension 1, 2 or 3.
pub fn convex_hull(points: &[Vec<f64>]) -> Result<Hull> {
    let dim = points.first().map(Vec::len).unwrap_or(0);
    if points.is_empty() {
        return Err(Error::InvalidArgument("hull of an empty point set".into()));
    }
    if !(1..=3).contains(&dim) || points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "hulls are built in 1 to 3 dimensions with equal-length points, got {dim}"
        )));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("hull input has non-finite coordinates".into()));
    }
    // Snapping merges coordinates that differ only by rounding, which would
    // otherwise break the lexicographic sweep on vertical runs.
    let snapped: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().map(|x| (x * SNAP).round() / SNAP).collect())
        .collect();
    let pts = dedup(&snapped);
    let scale = pts.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
    let eps = 1e-12 * scale;
    match dim {
        1 => Ok(hull_1d(&pts)),
        2 => Ok(hull_2d(&pts, eps)),
        _ => Ok(hull_3d(&pts, eps)),
    }
}

fn hull_1d(pts: &[Vec<f64>]) -> Hull {
    let lo = pts.first().unwrap()[0];
    let hi = pts.last().unwrap()[0];
    let vertices = if hi > lo { vec![vec![lo], vec![hi]] } else { vec![vec![lo]] };
    let last = vertices.len() - 1;
    Hull {
        dim: 1,
        facets: vec![
            Facet {
                vertices: vec![0],
                normal: vec![-1.0],
                offset: -lo,
            },
            Facet {
                vertices: vec![last],
                normal: vec![1.0],
                offset: hi,
            },
        ],
        affine_dim: usize::from(hi > lo),
        vertices,
    }
}

/// Counter-clockwise monotone chain on lexicographically sorted points.
fn chain_2d(pts: &[[f64; 2]], eps: f64) -> Vec<[f64; 2]> {
    if pts.len() < 3 {
        return pts.to_vec();
    }
    let turn = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn hull_2d(pts: &[Vec<f64>], eps: f64) -> Hull {
    let flat: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
    let ring = chain_2d(&flat, eps);
    let vertices: Vec<Vec<f64>> = ring.iter().map(|p| p.to_vec()).collect();
    let facets = match vertices.len() {
        1 => point_facets(&vertices[0]),
        2 => segment_facets(&vertices[0], &vertices[1]),
        n => (0..n)
            .map(|i| {
                let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
                let normal = unit(&[b[1] - a[1], a[0] - b[0]]);
                Facet {
                    offset: dot(&normal, a),
                    normal,
                    vertices: vec![i, (i + 1) % n],
                }
            })
            .collect(),
    };
    Hull {
        dim: 2,
        affine_dim: vertices.len().min(3) - 1,
        vertices,
        facets,
    }
}

/// Axis-aligned box of zero width around a single point.
fn point_facets(p: &[f64]) -> Vec<Facet> {
    let mut out = Vec::new();
    for axis in 0..p.len() {
        for sign in [1.0, -1.0] {
            let mut normal = vec![0.0; p.len()];
            normal[axis] = sign;
            out.push(Facet {
                vertices: vec![0],
                offset: sign * p[axis],
                normal,
            });
        }
    }
    out
}

/// Segment in 2D: both sides of its line plus the two end caps.
fn segment_facets(a: &[f64], b: &[f64]) -> Vec<Facet> {
    let d = unit(&sub(b, a));
    let n = vec![-d[1], d[0]];
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    vec![
        Facet { vertices: vec![0, 1], offset: dot(&n, a), normal: n.clone() },
        Facet { vertices: vec![0, 1], offset: -dot(&n, a), normal: neg(&n) },
        Facet { vertices: vec![0], offset: -dot(&d, a), normal: neg(&d) },
        Facet { vertices: vec![1], offset: dot(&d, b), normal: d },
    ]
}

fn hull_3d(pts: &[Vec<f64>], eps: f64) -> Hull {
    let Some(seed) = initial_simplex(pts, eps) else {
        return flat_hull_3d(pts, eps);
    };
    // Triangles oriented so that (b - a) x (c - a) points outward.
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let [i0, i1, i2, i3] = seed;
    let centroid: Vec<f64> = (0..3)
        .map(|d| (pts[i0][d] + pts[i1][d] + pts[i2][d] + pts[i3][d]) / 4.0)
        .collect();
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        faces.push(orient(pts, tri, &centroid));
    }
    let plane = |f: &[usize; 3]| {
        let n = cross(&sub(&pts[f[1]], &pts[f[0]]), &sub(&pts[f[2]], &pts[f[0]]));
        let n = unit(&n);
        let off = dot(&n, &pts[f[0]]);
        (n, off)
    };
    let mut planes: Vec<(Vec<f64>, f64)> = faces.iter().map(plane).collect();
    for (idx, p) in pts.iter().enumerate() {
        if seed.contains(&idx) {
            continue;
        }
        let visible: Vec<bool> = planes.iter().map(|(n, off)| dot(n, p) - off > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges = std::collections::HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for e in 0..3 {
                edges.insert((f[e], f[(e + 1) % 3]));
            }
        }
        let mut next_faces = Vec::with_capacity(faces.len());
        let mut next_planes = Vec::with_capacity(faces.len());
        for ((f, pl), &v) in faces.iter().zip(planes).zip(&visible) {
            if v {
                for e in 0..3 {
                    let (a, b) = (f[e], f[(e + 1) % 3]);
                    if !edges.contains(&(b, a)) {
                        let tri = [a, b, idx];
                        next_planes.push(plane(&tri));
                        next_faces.push(tri);
                    }
                }
            } else {
                next_faces.push(*f);
                next_planes.push(pl);
            }
        }
        faces = next_faces;
        planes = next_planes;
    }
    let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap = |i: usize| used.binary_search(&i).unwrap();
    let facets = faces
        .iter()
        .zip(planes)
        .map(|(f, (normal, offset))| Facet {
            vertices: f.iter().map(|&i| remap(i)).collect(),
            normal,
            offset,
        })
        .collect();
    Hull {
        dim: 3,
        vertices: used.iter().map(|&i| pts[i].clone()).collect(),
        facets,
        affine_dim: 3,
    }
}

fn orient(pts: &[Vec<f64>], tri: [usize; 3], inside: &[f64]) -> [usize; 3] {
    let n = cross(&sub(&pts[tri[1]], &pts[tri[0]]), &sub(&pts[tri[2]], &pts[tri[0]]));
    if dot(&n, &sub(inside, &pts[tri[0]])) > 0.0 {
        [tri[0], tri[2], tri[1]]
    } else {
        tri
    }
}

fn initial_simplex(pts: &[Vec<f64>], eps: f64) -> Option<[usize; 4]> {
    let i0 = 0;
    let farthest = |score: &dyn Fn(&[f64]) -> f64| {
        (0..pts.len())
            .map(|i| (i, score(&pts[i])))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    };
    let (i1, d1) = farthest(&|p| norm(&sub(p, &pts[i0])));
    if d1 <= eps {
        return None;
    }
    let dir = sub(&pts[i1], &pts[i0]);
    let (i2, d2) = farthest(&|p| norm(&cross(&dir, &sub(p, &pts[i0]))) / norm(&dir));
    if d2 <= eps {
        return None;
    }
    let n = unit(&cross(&dir, &sub(&pts[i2], &pts[i0])));
    let (i3, d3) = farthest(&|p| dot(&n, &sub(p, &pts[i0])).abs());
    if d3 <= eps {
        return None;
    }
    Some([i0, i1, i2, i3])
}

/// Planar or lower-dimensional cloud in 3D: hull inside the plane, bounded
/// by both sides of the plane plus one vertical facet per edge.
fn flat_hull_3d(pts: &[Vec<f64>], eps: f64) -> Hull {
    let o = pts[0].clone();
    let far = pts
        .iter()
        .max_by(|a, b| norm(&sub(a, &o)).total_cmp(&norm(&sub(b, &o))))
        .unwrap();
    if norm(&sub(far, &o)) <= eps {
        return Hull {
            dim: 3,
            vertices: vec![o.clone()],
            facets: point_facets(&o),
            affine_dim: 0,
        };
    }
    let u = unit(&sub(far, &o));
    let off_line = |p: &Vec<f64>| {
        let d = sub(p, &o);
        let along = dot(&d, &u);
        norm(&d.iter().zip(&u).map(|(x, y)| x - along * y).collect::<Vec<_>>())
    };
    let side = pts.iter().max_by(|a, b| off_line(a).total_cmp(&off_line(b))).unwrap();
    let (v, n) = if off_line(side) > eps {
        let n = unit(&cross(&u, &sub(side, &o)));
        (cross(&n, &u).to_vec(), n.to_vec())
    } else {
        // Collinear: pick any normal pair orthogonal to the line.
        let seed = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let n = unit(&cross(&u, &seed));
        (cross(&n, &u).to_vec(), n)
    };
    let mut flat: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            let d = sub(p, &o);
            [dot(&d, &u), dot(&d, &v)]
        })
        .collect();
    flat.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let ring = chain_2d(&flat, eps);
    let lift = |q: &[f64; 2]| (0..3).map(|d| o[d] + q[0] * u[d] + q[1] * v[d]).collect::<Vec<f64>>();
    let vertices: Vec<Vec<f64>> = ring.iter().map(lift).collect();
    let neg: Vec<f64> = n.iter().map(|x| -x).collect();
    let all: Vec<usize> = (0..vertices.len()).collect();
    let mut facets = vec![
        Facet { vertices: all.clone(), offset: dot(&n, &o), normal: n.clone() },
        Facet { vertices: all, offset: dot(&neg, &o), normal: neg },
    ];
    let k = ring.len();
    let affine_dim = if k >= 3 { 2 } else { 1 };
    let mut edge = |a: usize, b: usize, normal2: [f64; 2]| {
        let normal = unit(&(0..3).map(|d| normal2[0] * u[d] + normal2[1] * v[d]).collect::<Vec<_>>());
        facets.push(Facet {
            offset: dot(&normal, &vertices[a]),
            normal,
            vertices: if a == b { vec![a] } else { vec![a, b] },
        });
    };
    if k >= 3 {
        for i in 0..k {
            let (a, b) = (ring[i], ring[(i + 1) % k]);
            edge(i, (i + 1) % k, [b[1] - a[1], a[0] - b[0]]);
        }
    } else {
        let (a, b) = (ring[0], ring[k - 1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        edge(0, 0, [-d[0], -d[1]]);
        edge(k - 1, k - 1, d);
        edge(0, k - 1, [-d[1], d[0]]);
        edge(0, k - 1, [d[1], -d[0]]);
    }
    Hull {
        dim: 3,
        vertices,
        facets,
        affine_dim,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_with_interior_points() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.5, 0.0],
        ];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 4);
        assert_eq!(h.facets.len(), 4);
        assert!(h.contains(&[0.5, 0.25], 0.0));
        assert!(!h.contains(&[1.1, 0.5], 1e-9));
        assert_eq!(h.max_linear(&[1.0, 1.0]), 2.0);
    }

    #[test]
    fn cube_corners() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 8);
        assert_eq!(h.facets.len(), 12);
        assert!(h.contains(&[0.2, 0.9, 0.5], 0.0));
        assert!(!h.contains(&[0.2, 0.9, 1.01], 1e-9));
    }

    #[test]
    fn flat_clouds() {
        let seg = convex_hull(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!((seg.vertices.len(), seg.affine_dim), (2, 1));
        assert!(seg.contains(&[0.3, 0.3], 1e-12));
        assert!(!seg.contains(&[0.3, 0.4], 1e-9));
        assert!(!seg.contains(&[1.2, 1.2], 1e-9));
        let tri = convex_hull(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(tri.affine_dim, 2);
        assert!(tri.contains(&[0.2, 0.2, 0.0], 1e-12));
        assert!(!tri.contains(&[0.2, 0.2, 0.1], 1e-9));
        assert!(!tri.contains(&[0.8, 0.8, 0.0], 1e-9));
        let line = convex_hull(&[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]).unwrap();
        assert!(line.contains(&[0.5, 0.5, 0.5], 1e-12));
        assert!(!line.contains(&[0.5, 0.5, 0.6], 1e-9));
        let one = convex_hull(&[vec![2.0], vec![2.0 + 1e-12]]).unwrap();
        assert_eq!(one.vertices.len(), 1);
    }

    #[test]
    fn dedup_merges_close_points() {
        let d = dedup(&[vec![0.0, 0.0], vec![1e-10, 0.0], vec![1.0, 0.0]]);
        assert_eq!(d.len(), 2);
    }

    fn cloud(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, dim), 5..60)
    }

    proptest! {
        #[test]
        fn every_input_point_is_inside_2d(pts in cloud(2)) {
            let h = convex_hull(&pts).unwrap();
            for p in &pts {
                prop_assert!(h.contains(p, 1e-9));
            }
        }

        #[test]
        fn every_input_point_is_inside_3d(pts in cloud(3)) {
            let h = convex_hull(&pts).unwrap();
            for p in &pts {
                prop_assert!(h.contains(p, 1e-9));
            }
            for v in &h.vertices {
                prop_assert!(pts.iter().any(|p| p.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-12)));
            }
        }
    }
}
