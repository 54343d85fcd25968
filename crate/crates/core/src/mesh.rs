//! Structured conforming triangulations with face connectivity.
//!
//! Conventions:
//! - triangles are stored counterclockwise;
//! - local edge `e` of a triangle runs from its vertex `e` to vertex `(e + 1) % 3`;
//! - every face stores one canonical orientation, inherited from its `left`
//!   element, so `normal` points out of `left`. The `right` element (if any)
//!   sees the face reversed and uses `-normal`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Split direction of each grid square.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    #[default]
    Right,
    /// Lower-right to upper-left.
    Left,
}

impl core::str::FromStr for Diagonal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Diagonal::Right),
            "left" => Ok(Diagonal::Left),
            other => Err(Error::invalid(alloc::format!("unknown diagonal `{other}`"))),
        }
    }
}

impl core::fmt::Display for Diagonal {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Diagonal::Right => "right",
            Diagonal::Left => "left",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Vertex pair in the orientation seen by `left`.
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
    /// Unit normal, outward from `left`.
    pub normal: Point,
    pub length: f64,
}

impl Face {
    pub fn kind(&self) -> FaceKind {
        if self.right.is_some() {
            FaceKind::Interior
        } else {
            FaceKind::Boundary
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// A face as seen from one of its elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementFace {
    pub face: usize,
    /// `true` when the element is the face's `left` element, i.e. the
    /// canonical normal is outward for this element.
    pub outward: bool,
}

impl ElementFace {
    #[inline]
    pub fn sign(&self) -> f64 {
        if self.outward {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    pub element_faces: Vec<[ElementFace; 3]>,
    pub h_max: f64,
    pub h_min: f64,
}

/// The two computational domains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Domain {
    #[default]
    UnitSquare,
    /// `(0,1)² \ [1/2,1)×(0,1/2]`.
    LShape,
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 0.75,
        }
    }

    pub fn perimeter(&self) -> f64 {
        4.0
    }

    /// Boundary polygon, counterclockwise.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        let corners: &[Point] = match self {
            Domain::UnitSquare => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            Domain::LShape => &[
                [0.0, 0.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [1.0, 0.5],
                [1.0, 1.0],
                [0.0, 1.0],
            ],
        };
        (0..corners.len())
            .map(|i| Segment::new(corners[i], corners[(i + 1) % corners.len()]))
            .collect()
    }

    pub fn build(&self, n: usize, diagonal: Diagonal) -> Result<Mesh> {
        match self {
            Domain::UnitSquare => build_unit_square(n, diagonal),
            Domain::LShape => build_lshape(n, diagonal),
        }
    }
}

impl core::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" | "unit_square" => Ok(Domain::UnitSquare),
            "lshape" | "l_shape" => Ok(Domain::LShape),
            other => Err(Error::invalid(alloc::format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

impl Segment {
    pub fn new(start: Point, end: Point) -> Self {
        Segment { start, end }
    }

    pub fn length(&self) -> f64 {
        dist(self.start, self.end)
    }

    /// Whether `p` lies on the closed segment, up to `tol`.
    fn contains(&self, p: Point, tol: f64) -> bool {
        let d = sub(self.end, self.start);
        let len2 = d[0] * d[0] + d[1] * d[1];
        let w = sub(p, self.start);
        let t = (w[0] * d[0] + w[1] * d[1]) / len2;
        if t < -tol || t > 1.0 + tol {
            return false;
        }
        let cross = d[0] * w[1] - d[1] * w[0];
        libm::fabs(cross) / libm::sqrt(len2) <= tol
    }
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// `n × n` squares on `(0,1)²`, each cut in two along `diagonal`.
pub fn build_unit_square(n: usize, diagonal: Diagonal) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("unit square needs n >= 1"));
    }
    grid_mesh(n, diagonal, |_, _| true)
}

/// The unit-square construction with the cells in `[1/2,1)×(0,1/2]` removed.
pub fn build_lshape(n: usize, diagonal: Diagonal) -> Result<Mesh> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::invalid("L-shape needs a positive even n"));
    }
    let half = n / 2;
    grid_mesh(n, diagonal, |i, j| !(i >= half && j < half))
}

fn grid_mesh(n: usize, diagonal: Diagonal, keep_cell: impl Fn(usize, usize) -> bool) -> Result<Mesh> {
    let grid = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            if !keep_cell(i, j) {
                continue;
            }
            let (v00, v10, v01, v11) = (grid(i, j), grid(i + 1, j), grid(i, j + 1), grid(i + 1, j + 1));
            match diagonal {
                Diagonal::Right => {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
                Diagonal::Left => {
                    triangles.push([v00, v10, v01]);
                    triangles.push([v10, v11, v01]);
                }
            }
        }
    }

    // Compact away grid vertices not touched by any kept cell.
    let mut remap = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    let nf = n as f64;
    for tri in triangles.iter_mut() {
        for v in tri.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = vertices.len();
                let (i, j) = (*v % (n + 1), *v / (n + 1));
                vertices.push([i as f64 / nf, j as f64 / nf]);
            }
            *v = remap[*v];
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

impl Mesh {
    /// Builds face connectivity for a conforming triangulation given with
    /// counterclockwise triangles.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let mut faces: Vec<Face> = Vec::with_capacity(3 * triangles.len() / 2 + 1);
        let mut element_faces = Vec::with_capacity(triangles.len());
        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;

        for (e, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if area2 <= 2e-14 {
                return Err(Error::DegenerateElement { element: e });
            }
            let diam = dist(a, b).max(dist(b, c)).max(dist(c, a));
            h_max = h_max.max(diam);
            h_min = h_min.min(diam);

            let mut local = [ElementFace { face: 0, outward: true }; 3];
            for (le, slot) in local.iter_mut().enumerate() {
                let (v0, v1) = (tri[le], tri[(le + 1) % 3]);
                let key = (v0.min(v1), v0.max(v1));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.right.is_some() || face.vertices != [v1, v0] {
                            return Err(Error::invalid("triangulation is not conforming or not oriented"));
                        }
                        face.right = Some(e);
                        *slot = ElementFace { face: f, outward: false };
                    }
                    None => {
                        let (p0, p1) = (vertices[v0], vertices[v1]);
                        let length = dist(p0, p1);
                        let normal = [(p1[1] - p0[1]) / length, -(p1[0] - p0[0]) / length];
                        lookup.insert(key, faces.len());
                        *slot = ElementFace { face: faces.len(), outward: true };
                        faces.push(Face { vertices: [v0, v1], left: e, right: None, normal, length });
                    }
                }
            }
            element_faces.push(local);
        }

        Ok(Mesh { vertices, triangles, faces, element_faces, h_max, h_min })
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 3] {
        self.triangles[e].map(|v| self.vertices[v])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_vertices(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Outward unit normal of local edge `le` of element `e`.
    pub fn outward_normal(&self, e: usize, le: usize) -> Point {
        let ef = self.element_faces[e][le];
        let n = self.faces[ef.face].normal;
        let s = ef.sign();
        [s * n[0], s * n[1]]
    }

    pub fn face_endpoints(&self, f: usize) -> [Point; 2] {
        self.faces[f].vertices.map(|v| self.vertices[v])
    }

    pub fn boundary_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary()).collect()
    }

    pub fn interior_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| !self.faces[f].is_boundary()).collect()
    }

    /// Faces whose closure lies on the union of `segments`.
    ///
    /// Every segment must start and end at mesh vertices and be covered
    /// exactly by mesh faces; otherwise the interface is unresolved.
    pub fn mark_interface(&self, segments: &[Segment]) -> Result<Vec<usize>> {
        let tol = 1e-12;
        let unresolved = |s: &Segment| Error::UnresolvedInterface {
            x0: s.start[0],
            y0: s.start[1],
            x1: s.end[0],
            y1: s.end[1],
        };
        let mut marked = vec![false; self.faces.len()];
        for seg in segments {
            if seg.length() <= tol {
                return Err(Error::invalid("degenerate interface segment"));
            }
            for p in [seg.start, seg.end] {
                if !self.vertices.iter().any(|&v| dist(v, p) <= tol) {
                    return Err(unresolved(seg));
                }
            }
            let mut covered = 0.0;
            for (f, face) in self.faces.iter().enumerate() {
                let [p0, p1] = face.vertices.map(|v| self.vertices[v]);
                if seg.contains(p0, tol) && seg.contains(p1, tol) {
                    covered += face.length;
                    marked[f] = true;
                }
            }
            if libm::fabs(covered - seg.length()) > 1e-10 * seg.length() {
                return Err(unresolved(seg));
            }
        }
        Ok((0..self.faces.len()).filter(|&f| marked[f]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force edge enumeration that ignores the mesh's own connectivity.
    fn count_edges(mesh: &Mesh) -> (usize, usize) {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for t in &mesh.triangles {
            for le in 0..3 {
                let (a, b) = (t[le], t[(le + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort();
        let mut total = 0;
        let mut boundary = 0;
        let mut i = 0;
        while i < edges.len() {
            let mut j = i;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            total += 1;
            if j - i == 1 {
                boundary += 1;
            }
            i = j;
        }
        (total, boundary)
    }

    fn check_invariants(mesh: &Mesh, domain: Domain) {
        let area: f64 = (0..mesh.num_elements()).map(|e| mesh.element_area(e)).sum();
        assert!((area - domain.area()).abs() <= 1e-12 * domain.area());
        let perimeter: f64 = mesh.boundary_faces().iter().map(|&f| mesh.faces[f].length).sum();
        assert!((perimeter - 4.0).abs() <= 1e-12 * 4.0);

        let mut refs = vec![0usize; mesh.num_faces()];
        for (e, efs) in mesh.element_faces.iter().enumerate() {
            assert!(mesh.element_area(e) > 0.0);
            let mut closure = [0.0, 0.0];
            for (le, ef) in efs.iter().enumerate() {
                refs[ef.face] += 1;
                let n = mesh.outward_normal(e, le);
                closure[0] += mesh.faces[ef.face].length * n[0];
                closure[1] += mesh.faces[ef.face].length * n[1];
                // outward normal points away from the centroid
                let [a, b, c] = mesh.element_vertices(e);
                let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
                let [p0, _] = mesh.face_endpoints(ef.face);
                let w = sub(p0, centroid);
                assert!(w[0] * n[0] + w[1] * n[1] > 0.0);
            }
            assert!(closure[0].abs() < 1e-14 && closure[1].abs() < 1e-14);
        }
        for (f, face) in mesh.faces.iter().enumerate() {
            let expected = if face.is_boundary() { 1 } else { 2 };
            assert_eq!(refs[f], expected);
            if let Some(r) = face.right {
                let lf = mesh.element_faces[face.left].iter().find(|ef| ef.face == f).unwrap();
                let rf = mesh.element_faces[r].iter().find(|ef| ef.face == f).unwrap();
                assert!(lf.outward && !rf.outward);
            }
        }
        assert!(mesh.h_max / mesh.h_min <= 2.0);
    }

    #[test]
    fn smallest_square() {
        let m = build_unit_square(1, Diagonal::Right).unwrap();
        assert_eq!((m.num_elements(), m.vertices.len(), m.num_faces()), (2, 4, 5));
        assert_eq!(m.boundary_faces().len(), 4);
    }

    #[test]
    fn two_by_two_square_matches_brute_force() {
        for diag in [Diagonal::Right, Diagonal::Left] {
            let m = build_unit_square(2, diag).unwrap();
            assert_eq!(m.num_elements(), 8);
            assert_eq!(m.vertices.len(), 9);
            assert_eq!(count_edges(&m), (16, 8));
            assert_eq!(m.num_faces(), 16);
            assert_eq!(m.boundary_faces().len(), 8);
            check_invariants(&m, Domain::UnitSquare);
        }
    }

    #[test]
    fn square_counts_and_h() {
        for n in [1, 3, 4, 7, 32] {
            let m = build_unit_square(n, Diagonal::Right).unwrap();
            assert_eq!(m.num_elements(), 2 * n * n);
            assert_eq!(m.vertices.len(), (n + 1) * (n + 1));
            assert_eq!(count_edges(&m).0, m.num_faces());
            check_invariants(&m, Domain::UnitSquare);
            let h_over_sqrt2 = m.h_max / core::f64::consts::SQRT_2;
            assert!((h_over_sqrt2 - 1.0 / n as f64).abs() < 1e-15);
        }
        let m32 = build_unit_square(32, Diagonal::Left).unwrap();
        assert_eq!(m32.h_max / core::f64::consts::SQRT_2, 2f64.powi(-5));
    }

    #[test]
    fn doubling_halves_h() {
        for domain in [Domain::UnitSquare, Domain::LShape] {
            let coarse = domain.build(4, Diagonal::Right).unwrap();
            let fine = domain.build(8, Diagonal::Right).unwrap();
            assert!((coarse.h_max / fine.h_max - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lshape() {
        let m = build_lshape(2, Diagonal::Right).unwrap();
        assert_eq!(m.num_elements(), 6);
        assert_eq!(m.vertices.len(), 8);
        let perimeter: f64 = m.boundary_faces().iter().map(|&f| m.faces[f].length).sum();
        assert!((perimeter - 4.0).abs() < 1e-14);
        for n in [2, 4, 8, 16] {
            for diag in [Diagonal::Right, Diagonal::Left] {
                let m = build_lshape(n, diag).unwrap();
                assert_eq!(m.num_elements(), 2 * n * n - n * n / 2);
                assert_eq!(count_edges(&m), (m.num_faces(), m.boundary_faces().len()));
                check_invariants(&m, Domain::LShape);
            }
        }
        // the reentrant corner is a vertex
        let m = build_lshape(4, Diagonal::Right).unwrap();
        assert!(m.vertices.iter().any(|&v| v == [0.5, 0.5]));
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(build_unit_square(0, Diagonal::Right), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_lshape(3, Diagonal::Right), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_lshape(0, Diagonal::Left), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn interfaces() {
        let m = build_unit_square(2, Diagonal::Right).unwrap();
        let boundary = m.mark_interface(&Domain::UnitSquare.boundary_segments()).unwrap();
        assert_eq!(boundary, m.boundary_faces());
        assert_eq!(boundary.len(), 8);

        let mid = m.mark_interface(&[Segment::new([0.5, 0.0], [0.5, 1.0])]).unwrap();
        assert_eq!(mid.len(), 2);
        for f in mid {
            let [p0, p1] = m.face_endpoints(f);
            assert_eq!((p0[0], p1[0]), (0.5, 0.5));
        }

        let err = m.mark_interface(&[Segment::new([1.0 / 3.0, 0.0], [1.0 / 3.0, 1.0])]);
        assert!(matches!(err, Err(Error::UnresolvedInterface { .. })));

        let l = build_lshape(4, Diagonal::Left).unwrap();
        let lb = l.mark_interface(&Domain::LShape.boundary_segments()).unwrap();
        assert_eq!(lb, l.boundary_faces());
    }
}
