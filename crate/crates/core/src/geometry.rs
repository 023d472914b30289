//! Small fixed-size vector helpers.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm3(sub3(a, b))
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

pub fn det3(m: &Mat3) -> f64 {
    dot3(m[0], cross(m[1], m[2]))
}

pub fn transpose3(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Frobenius norm.
pub fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn inverse3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    // Rows of the inverse transpose are cross products of the rows.
    let c0 = cross(m[1], m[2]);
    let c1 = cross(m[2], m[0]);
    let c2 = cross(m[0], m[1]);
    let inv_t = [scale3(1.0 / det, c0), scale3(1.0 / det, c1), scale3(1.0 / det, c2)];
    Some(transpose3(&inv_t))
}

/// Jacobian of the affine map from the reference tet: columns are edge vectors.
pub fn tet_jacobian(p: &[Vec3; 4]) -> Mat3 {
    let e1 = sub3(p[1], p[0]);
    let e2 = sub3(p[2], p[0]);
    let e3 = sub3(p[3], p[0]);
    [[e1[0], e2[0], e3[0]], [e1[1], e2[1], e3[1]], [e1[2], e2[2], e3[2]]]
}

pub fn tet_points(vertices: &[Vec3], tet: [usize; 4]) -> [Vec3; 4] {
    tet.map(|v| vertices[v])
}

pub fn signed_volume(vertices: &[Vec3], tet: [usize; 4]) -> f64 {
    det3(&tet_jacobian(&tet_points(vertices, tet))) / 6.0
}

/// Gradients of the four barycentric coordinates of a tet.
pub fn barycentric_gradients(p: &[Vec3; 4]) -> [Vec3; 4] {
    let e1 = sub3(p[1], p[0]);
    let e2 = sub3(p[2], p[0]);
    let e3 = sub3(p[3], p[0]);
    let det = dot3(e1, cross(e2, e3));
    let g1 = scale3(1.0 / det, cross(e2, e3));
    let g2 = scale3(1.0 / det, cross(e3, e1));
    let g3 = scale3(1.0 / det, cross(e1, e2));
    let g0 = scale3(-1.0, add3(add3(g1, g2), g3));
    [g0, g1, g2, g3]
}

pub fn barycentric(vertices: &[Vec3], tet: [usize; 4], x: Vec3) -> [f64; 4] {
    let p = tet_points(vertices, tet);
    let g = barycentric_gradients(&p);
    let d = sub3(x, p[0]);
    let l1 = dot3(g[1], d);
    let l2 = dot3(g[2], d);
    let l3 = dot3(g[3], d);
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

/// Point with the given barycentric coordinates.
pub fn from_barycentric(p: &[Vec3; 4], l: [f64; 4]) -> Vec3 {
    let mut x = [0.0; 3];
    for (pi, li) in p.iter().zip(l) {
        x = add3(x, scale3(li, *pi));
    }
    x
}
