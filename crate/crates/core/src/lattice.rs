//! Exact integer geometry: lattice triangles, half-planes, cones, unimodular
//! bases, shift vectors and the two-run edge split of a convex polygon.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of Z², used both as a frequency and as a direction.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct FrequencyPoint {
    pub u: i64,
    pub v: i64,
}

impl FrequencyPoint {
    pub const ORIGIN: FrequencyPoint = FrequencyPoint { u: 0, v: 0 };

    pub const fn new(u: i64, v: i64) -> Self {
        Self { u, v }
    }

    pub fn dot(self, o: Self) -> i128 {
        self.u as i128 * o.u as i128 + self.v as i128 * o.v as i128
    }

    /// z-component of the cross product `self x o`.
    pub fn cross(self, o: Self) -> i128 {
        self.u as i128 * o.v as i128 - self.v as i128 * o.u as i128
    }

    pub fn is_zero(self) -> bool {
        self.u == 0 && self.v == 0
    }

    pub fn norm(self) -> f64 {
        (self.u as f64).hypot(self.v as f64)
    }

    pub fn gcd(self) -> i64 {
        self.u.gcd(&self.v)
    }

    /// Divides out the gcd of the components. Zero stays zero.
    pub fn primitive(self) -> Self {
        let g = self.gcd();
        if g == 0 {
            self
        } else {
            Self::new(self.u / g, self.v / g)
        }
    }
}

impl Add for FrequencyPoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.u + o.u, self.v + o.v)
    }
}

impl Sub for FrequencyPoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.u - o.u, self.v - o.v)
    }
}

impl Neg for FrequencyPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.u, -self.v)
    }
}

impl Mul<FrequencyPoint> for i64 {
    type Output = FrequencyPoint;
    fn mul(self, p: FrequencyPoint) -> FrequencyPoint {
        FrequencyPoint::new(self * p.u, self * p.v)
    }
}

impl From<(i64, i64)> for FrequencyPoint {
    fn from((u, v): (i64, i64)) -> Self {
        Self::new(u, v)
    }
}

/// Nonzero integer vector with coprime components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct PrimitiveVector {
    alpha: i64,
    beta: i64,
}

impl PrimitiveVector {
    pub fn new(alpha: i64, beta: i64) -> Result<Self> {
        if alpha.gcd(&beta) != 1 {
            return Err(Error::NotPrimitive(alpha, beta));
        }
        Ok(Self { alpha, beta })
    }

    /// Primitive direction of a nonzero point.
    pub fn direction_of(p: FrequencyPoint) -> Result<Self> {
        if p.is_zero() {
            return Err(Error::NotPrimitive(0, 0));
        }
        let q = p.primitive();
        Ok(Self {
            alpha: q.u,
            beta: q.v,
        })
    }

    pub fn alpha(self) -> i64 {
        self.alpha
    }

    pub fn beta(self) -> i64 {
        self.beta
    }

    pub fn point(self) -> FrequencyPoint {
        FrequencyPoint::new(self.alpha, self.beta)
    }

    pub fn negated(self) -> Self {
        Self {
            alpha: -self.alpha,
            beta: -self.beta,
        }
    }
}

impl TryFrom<[i64; 2]> for PrimitiveVector {
    type Error = Error;
    fn try_from(a: [i64; 2]) -> Result<Self> {
        Self::new(a[0], a[1])
    }
}

impl From<PrimitiveVector> for [i64; 2] {
    fn from(p: PrimitiveVector) -> Self {
        [p.alpha, p.beta]
    }
}

/// Position of a point relative to a closed half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfSpaceSide {
    Interior,
    Boundary,
    Exterior,
}

/// Closed half-planes `<normal, x> <= offset`, one per polygon side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceFamily {
    pub normals: Vec<PrimitiveVector>,
    pub offsets: Vec<i64>,
}

impl HalfSpaceFamily {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Classifies `p` against side `i` (1-based).
    pub fn sign(&self, i: usize, p: FrequencyPoint) -> HalfSpaceSide {
        let s = self.normals[i - 1].point().dot(p);
        match s.cmp(&(self.offsets[i - 1] as i128)) {
            Ordering::Less => HalfSpaceSide::Interior,
            Ordering::Equal => HalfSpaceSide::Boundary,
            Ordering::Greater => HalfSpaceSide::Exterior,
        }
    }

    /// Membership in the open complement of side `i`.
    pub fn in_complement(&self, i: usize, p: FrequencyPoint) -> bool {
        self.sign(i, p) == HalfSpaceSide::Exterior
    }

    /// Same test for the half-plane translated through the origin.
    pub fn in_complement_at_origin(&self, i: usize, p: FrequencyPoint) -> bool {
        self.normals[i - 1].point().dot(p) > 0
    }

    pub fn contains(&self, p: FrequencyPoint) -> bool {
        (1..=self.len()).all(|i| self.sign(i, p) != HalfSpaceSide::Exterior)
    }
}

/// Convex lattice polygon; vertices in either orientation, stored as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<FrequencyPoint>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<FrequencyPoint>) -> Result<Self> {
        let m = vertices.len();
        if m < 3 {
            return Err(Error::NotConvex);
        }
        let mut sign = 0i32;
        for k in 0..m {
            let a = vertices[k];
            let b = vertices[(k + 1) % m];
            let c = vertices[(k + 2) % m];
            let s = (b - a).cross(c - b).signum() as i32;
            if s == 0 || (sign != 0 && s != sign) {
                return Err(Error::NotConvex);
            }
            sign = s;
        }
        Ok(Self { vertices })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Side `i` (1-based) runs from vertex `i` to vertex `i+1`.
    pub fn side(&self, i: usize) -> (FrequencyPoint, FrequencyPoint) {
        let m = self.len();
        (self.vertices[i - 1], self.vertices[i % m])
    }

    fn vertex_sum(&self) -> FrequencyPoint {
        self.vertices
            .iter()
            .fold(FrequencyPoint::ORIGIN, |acc, &p| acc + p)
    }

    /// Primitive exterior normals and offsets, oriented against the centroid.
    pub fn half_spaces(&self) -> HalfSpaceFamily {
        let m = self.len() as i64;
        let sum = self.vertex_sum();
        let mut normals = Vec::with_capacity(self.len());
        let mut offsets = Vec::with_capacity(self.len());
        for i in 1..=self.len() {
            let (p, q) = self.side(i);
            let d = q - p;
            let mut n = FrequencyPoint::new(d.v, -d.u).primitive();
            // centroid * m - p * m points inward
            let inward = sum - m * p;
            if n.dot(inward) > 0 {
                n = -n;
            }
            offsets.push(n.dot(p) as i64);
            normals.push(PrimitiveVector {
                alpha: n.u,
                beta: n.v,
            });
        }
        HalfSpaceFamily { normals, offsets }
    }

    /// Largest absolute vertex coordinate.
    pub fn extent(&self) -> usize {
        self.vertices
            .iter()
            .map(|p| p.u.unsigned_abs().max(p.v.unsigned_abs()))
            .max()
            .unwrap_or(0) as usize
    }
}

/// Triangle with vertices O, (λβ₁, −λα₁), (aλ, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleInstance {
    pub nu1: PrimitiveVector,
    pub a: i64,
    pub lambda: u32,
    pub vertices: [FrequencyPoint; 3],
    /// Exterior primitive normals of sides O→A1, A1→A2, A2→O.
    pub normals: [PrimitiveVector; 3],
    pub side_lengths: [f64; 3],
    pub unit_normals: [(f64, f64); 3],
    /// Geometric weights at λ = 1.
    pub s1: f64,
    pub s2: f64,
    pub n_points: usize,
    pub half_spaces: HalfSpaceFamily,
}

impl TriangleInstance {
    pub fn new(nu1: PrimitiveVector, a: i64, lambda: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::ZeroLambda);
        }
        if a <= 0 {
            return Err(Error::NonPositiveSide);
        }
        let l = lambda as i64;
        let o = FrequencyPoint::ORIGIN;
        let a1 = FrequencyPoint::new(l * nu1.beta(), -l * nu1.alpha());
        let a2 = FrequencyPoint::new(a * l, 0);
        if a1.cross(a2) == 0 {
            return Err(Error::DegenerateTriangle);
        }
        let polygon = ConvexPolygon::new(vec![o, a1, a2])?;
        let half_spaces = polygon.half_spaces();
        let mut side_lengths = [0.0; 3];
        let mut unit_normals = [(0.0, 0.0); 3];
        let mut normals = [nu1; 3];
        for i in 0..3 {
            let (p, q) = polygon.side(i + 1);
            side_lengths[i] = (q - p).norm();
            let n = half_spaces.normals[i];
            let len = n.point().norm();
            unit_normals[i] = (n.alpha() as f64 / len, n.beta() as f64 / len);
            normals[i] = n;
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..3 {
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            s1 += sign * unit_normals[i].0 * side_lengths[i];
            s2 += sign * unit_normals[i].1 * side_lengths[i];
        }
        let s1 = 0.5 * s1 / lambda as f64;
        let s2 = 0.5 * s2 / lambda as f64;
        let tol = 1e-12;
        if s1 <= tol || s2 <= tol {
            return Err(Error::HypothesisTViolated { s1, s2 });
        }
        let mut t = Self {
            nu1,
            a,
            lambda,
            vertices: [o, a1, a2],
            normals,
            side_lengths,
            unit_normals,
            s1,
            s2,
            n_points: 0,
            half_spaces,
        };
        t.n_points = t.lattice_points().len();
        Ok(t)
    }

    /// Same shape at another scale.
    pub fn at_lambda(&self, lambda: u32) -> Result<Self> {
        Self::new(self.nu1, self.a, lambda)
    }

    pub fn s1_at_lambda(&self) -> f64 {
        self.s1 * self.lambda as f64
    }

    pub fn s2_at_lambda(&self) -> f64 {
        self.s2 * self.lambda as f64
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.to_vec(),
        }
    }

    pub fn extent(&self) -> usize {
        self.polygon().extent()
    }

    /// Lattice points of the closed triangle in lexicographic order.
    pub fn lattice_points(&self) -> Vec<FrequencyPoint> {
        let umin = self.vertices.iter().map(|p| p.u).min().unwrap();
        let umax = self.vertices.iter().map(|p| p.u).max().unwrap();
        let vmin = self.vertices.iter().map(|p| p.v).min().unwrap();
        let vmax = self.vertices.iter().map(|p| p.v).max().unwrap();
        let mut pts = Vec::new();
        for u in umin..=umax {
            for v in vmin..=vmax {
                let p = FrequencyPoint::new(u, v);
                if self.half_spaces.contains(p) {
                    pts.push(p);
                }
            }
        }
        pts
    }

    pub fn contains(&self, p: FrequencyPoint) -> bool {
        self.half_spaces.contains(p)
    }

    pub fn halfspace_sign(&self, i: usize, p: FrequencyPoint) -> HalfSpaceSide {
        self.half_spaces.sign(i, p)
    }
}

/// Half-cone of nonnegative combinations of two primitive generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub e1: PrimitiveVector,
    pub e2: PrimitiveVector,
}

impl ConeSpec {
    pub fn new(e1: PrimitiveVector, e2: PrimitiveVector) -> Result<Self> {
        if e1.point().cross(e2.point()) == 0 {
            return Err(Error::EmptyInterior);
        }
        Ok(Self { e1, e2 })
    }

    pub fn from_points(e1: FrequencyPoint, e2: FrequencyPoint) -> Result<Self> {
        Self::new(
            PrimitiveVector::direction_of(e1)?,
            PrimitiveVector::direction_of(e2)?,
        )
    }

    pub fn det(&self) -> i128 {
        self.e1.point().cross(self.e2.point())
    }

    pub fn orientation(&self) -> i32 {
        self.det().signum() as i32
    }

    fn sides(&self, p: FrequencyPoint) -> (i128, i128) {
        let d = self.det().signum();
        (
            p.cross(self.e2.point()).signum() * d,
            self.e1.point().cross(p).signum() * d,
        )
    }

    /// p = s e1 + t e2 with s, t >= 0.
    pub fn contains(&self, p: FrequencyPoint) -> bool {
        let (a, b) = self.sides(p);
        a >= 0 && b >= 0
    }

    /// p = s e1 + t e2 with s, t > 0.
    pub fn contains_strictly(&self, p: FrequencyPoint) -> bool {
        let (a, b) = self.sides(p);
        a > 0 && b > 0
    }

    /// Membership in C⁺ ∪ (−C⁺).
    pub fn in_double_cone(&self, p: FrequencyPoint) -> bool {
        self.contains(p) || self.contains(-p)
    }

    pub fn is_unimodular(&self) -> bool {
        self.det().abs() == 1
    }

    /// Columns are the generators.
    pub fn basis_matrix(&self) -> [[i64; 2]; 2] {
        [
            [self.e1.alpha(), self.e2.alpha()],
            [self.e1.beta(), self.e2.beta()],
        ]
    }

    /// Integer inverse of the basis matrix; needs a unimodular cone.
    pub fn coordinate_matrix(&self) -> Result<[[i64; 2]; 2]> {
        let d = self.det();
        if d.abs() != 1 {
            return Err(Error::NotUnimodular(d as i64));
        }
        let d = d as i64;
        let b = self.basis_matrix();
        Ok([[b[1][1] * d, -b[0][1] * d], [-b[1][0] * d, b[0][0] * d]])
    }

    /// Coordinates of `p` in the generator basis (unimodular cones only).
    pub fn coordinates(&self, p: FrequencyPoint) -> Result<FrequencyPoint> {
        Ok(apply_matrix(&self.coordinate_matrix()?, p))
    }

    pub fn from_coordinates(&self, c: FrequencyPoint) -> FrequencyPoint {
        apply_matrix(&self.basis_matrix(), c)
    }
}

pub fn apply_matrix(m: &[[i64; 2]; 2], p: FrequencyPoint) -> FrequencyPoint {
    FrequencyPoint::new(m[0][0] * p.u + m[0][1] * p.v, m[1][0] * p.u + m[1][1] * p.v)
}

pub fn matrix_det(m: &[[i64; 2]; 2]) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Sub-cone with a Z-basis of generators. Unimodular cones come back unchanged.
pub fn find_unimodular_subcone(c: &ConeSpec) -> Result<ConeSpec> {
    if c.det() == 0 {
        return Err(Error::EmptyInterior);
    }
    if c.is_unimodular() {
        return Ok(*c);
    }
    let w = (c.e1.point() + c.e2.point()).primitive();
    // Bezout partner with det(w, u) = 1
    let ext = w.u.extended_gcd(&w.v);
    let sgn = ext.gcd.signum();
    let u0 = FrequencyPoint::new(-ext.y * sgn, ext.x * sgn);
    debug_assert_eq!(w.cross(u0), 1);
    let mut k: i64 = 0;
    loop {
        let cand = u0 + k * w;
        if c.contains_strictly(cand) {
            return ConeSpec::from_points(w, cand);
        }
        let back = u0 - k * w;
        if k > 0 && c.contains_strictly(back) {
            return ConeSpec::from_points(w, back);
        }
        k += 1;
    }
}

/// Shift vector for a finite set in a unimodular cone: every nonzero
/// multiple pushes the set into C⁺ ∪ (−C⁺) without hitting the origin.
pub fn shift_vector(c: &ConeSpec, set: &[FrequencyPoint]) -> Result<FrequencyPoint> {
    let mut acc = FrequencyPoint::ORIGIN;
    for &p in set {
        let q = c.coordinates(p)?;
        if !q.is_zero() {
            acc = acc + FrequencyPoint::new(2 * q.u.abs(), 2 * q.v.abs());
        }
    }
    if acc.is_zero() {
        acc = FrequencyPoint::new(1, 1);
    }
    Ok(c.from_coordinates(acc))
}

/// Two-run split of the sides of a convex polygon at a vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSplit {
    /// Sides labelled with the cone-supported factor (1-based, sorted).
    pub first: Vec<usize>,
    /// Sides labelled with its conjugate.
    pub second: Vec<usize>,
    pub cone: ConeSpec,
}

/// Vertex cone at vertex `k` (1-based): spanned by the two incident sides.
pub fn vertex_cone(polygon: &ConvexPolygon, k: usize) -> Result<ConeSpec> {
    let m = polygon.len();
    let a = polygon.vertices[k - 1];
    let prev = polygon.vertices[(k + m - 2) % m];
    let next = polygon.vertices[k % m];
    ConeSpec::from_points(prev - a, next - a)
}

/// Splits the sides into two contiguous runs using the first sector of the
/// origin-translated side pencil inside the vertex cone at `vertex`.
pub fn minimal_split(polygon: &ConvexPolygon, vertex: usize) -> Result<EdgeSplit> {
    let polygon = ConvexPolygon::new(polygon.vertices.clone())?;
    let m = polygon.len();
    if vertex == 0 || vertex > m {
        return Err(Error::InvalidConfig(format!("vertex {vertex} out of range")));
    }
    let vc = vertex_cone(&polygon, vertex)?;
    let start = vc.e1.point();
    let mut rays = Vec::with_capacity(2 * m);
    for i in 1..=m {
        let (p, q) = polygon.side(i);
        let d = (q - p).primitive();
        rays.push(d);
        rays.push(-d);
    }
    // first pencil ray strictly inside, ordered by angle from `start`
    let mut first: Option<FrequencyPoint> = None;
    for r in rays.into_iter().filter(|&r| vc.contains_strictly(r)) {
        first = match first {
            None => Some(r),
            // r comes before f iff it is between start and f
            Some(f) if ConeSpec::from_points(start, f)?.contains_strictly(r) => Some(r),
            keep => keep,
        };
    }
    let end = first.unwrap_or(vc.e2.point());
    let cone = ConeSpec::from_points(start, end)?;
    let d = cone.e1.point() + cone.e2.point();
    let hs = polygon.half_spaces();
    let mut split = EdgeSplit {
        first: Vec::new(),
        second: Vec::new(),
        cone,
    };
    for i in 1..=m {
        if hs.normals[i - 1].point().dot(d) < 0 {
            split.first.push(i);
        } else {
            split.second.push(i);
        }
    }
    Ok(split)
}
