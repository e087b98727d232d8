//! Interface-conforming triangulations of the unit cell and of tiled domains.
//!
//! Vertices on the membrane are stored twice: the copy referenced by inner
//! triangles and the copy referenced by outer triangles. The potential jump
//! `[u] = u_out - u_in` is then a plain difference of nodal values.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{arc_angle, CellGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Inner,
    Outer,
}

impl Subdomain {
    pub fn index(self) -> usize {
        match self {
            Subdomain::Inner => 0,
            Subdomain::Outer => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfacePair {
    pub inner: usize,
    pub outer: usize,
}

/// Axis-aligned square `[x0, x0 + size] x [y0, y0 + size]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub origin: [f64; 2],
    pub size: f64,
}

#[derive(Debug, Clone)]
pub struct InterfaceMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<Subdomain>,
    pub interface_pairs: Vec<InterfacePair>,
    /// Edges of the membrane polygon as indices into `interface_pairs`,
    /// traversed counter-clockwise around their cell.
    pub interface_edges: Vec<[usize; 2]>,
    /// `(inner triangle, outer triangle)` adjacent to each interface edge.
    pub edge_triangles: Vec<[usize; 2]>,
    pub boundary_vertices: Vec<usize>,
    /// Cell index owning each interface pair.
    pub pair_cell: Vec<usize>,
    pub cell_centers: Vec<[f64; 2]>,
    pub domain: Square,
    /// Target edge length the mesh was generated with.
    pub h: f64,
    /// Number of boundary segments per side of one cell.
    pub boundary_divisions: usize,
}

impl InterfaceMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.interface_pairs.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Gradients of the three P1 hat functions on triangle `t`, and its area.
    pub fn hat_gradients(&self, t: usize) -> Result<([[f64; 2]; 3], f64)> {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let area = self.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::SingularElement(t));
        }
        let s = 0.5 / area;
        Ok((
            [
                [(q[1] - r[1]) * s, (r[0] - q[0]) * s],
                [(r[1] - p[1]) * s, (p[0] - r[0]) * s],
                [(p[1] - q[1]) * s, (q[0] - p[0]) * s],
            ],
            area,
        ))
    }

    pub fn subdomain_area(&self, tag: Subdomain) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.tags[t] == tag)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Mesh-measured `|Y_i| / |Y|`.
    pub fn volume_fraction(&self) -> f64 {
        self.subdomain_area(Subdomain::Inner) / self.total_area()
    }

    pub fn edge_vector(&self, e: usize) -> [f64; 2] {
        let [i, j] = self.interface_edges[e];
        let p = self.vertices[self.interface_pairs[i].inner];
        let q = self.vertices[self.interface_pairs[j].inner];
        [q[0] - p[0], q[1] - p[1]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let d = self.edge_vector(e);
        d[0].hypot(d[1])
    }

    /// Unit normal of an interface edge pointing from the inner to the outer subdomain.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let d = self.edge_vector(e);
        let l = d[0].hypot(d[1]);
        [d[1] / l, -d[0] / l]
    }

    pub fn interface_length(&self) -> f64 {
        (0..self.interface_edges.len()).map(|e| self.edge_length(e)).sum()
    }

    pub fn pair_position(&self, k: usize) -> [f64; 2] {
        self.vertices[self.interface_pairs[k].inner]
    }

    /// Polar angle of interface pair `k` about its cell center.
    pub fn pair_angle(&self, k: usize) -> f64 {
        arc_angle(self.cell_centers[self.pair_cell[k]], self.pair_position(k))
    }

    /// One third of the adjacent triangle areas, per vertex.
    pub fn lumped_vertex_areas(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.signed_area(t) / 3.0;
            for &v in tri {
                w[v] += a;
            }
        }
        w
    }

    /// Representative vertex under the periodic identification of opposite
    /// sides of `domain` (left with right, bottom with top).
    pub fn periodic_representatives(&self) -> Vec<usize> {
        let tol = self.h * 1e-6;
        let key = |x: f64| (x / tol).round() as i64;
        let Square { origin, size } = self.domain;
        let mut rep: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(rep: &mut [usize], mut v: usize) -> usize {
            while rep[v] != v {
                rep[v] = rep[rep[v]];
                v = rep[v];
            }
            v
        }
        for axis in 0..2 {
            let other = 1 - axis;
            let mut low: HashMap<i64, usize> = HashMap::new();
            for &v in &self.boundary_vertices {
                if (self.vertices[v][axis] - origin[axis]).abs() <= tol {
                    low.insert(key(self.vertices[v][other]), v);
                }
            }
            for &v in &self.boundary_vertices {
                if (self.vertices[v][axis] - origin[axis] - size).abs() <= tol {
                    if let Some(&u) = low.get(&key(self.vertices[v][other])) {
                        let (ru, rv) = (find(&mut rep, u), find(&mut rep, v));
                        if ru != rv {
                            let (lo, hi) = (ru.min(rv), ru.max(rv));
                            rep[hi] = lo;
                        }
                    }
                }
            }
        }
        (0..rep.len()).map(|v| find(&mut rep, v)).collect()
    }

    /// Checks the structural invariants of an interface mesh.
    pub fn check_invariants(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if !(self.signed_area(t) > 0.0) {
                return Err(Error::SingularElement(t));
            }
        }
        let mut seen_in = vec![false; self.vertices.len()];
        let mut seen_out = vec![false; self.vertices.len()];
        for p in &self.interface_pairs {
            if p.inner == p.outer || seen_in[p.inner] || seen_out[p.outer] {
                return Err(Error::MeshGeneration("interface pairing is not a bijection".into()));
            }
            seen_in[p.inner] = true;
            seen_out[p.outer] = true;
            if self.vertices[p.inner] != self.vertices[p.outer] {
                return Err(Error::MeshGeneration("paired vertices do not coincide".into()));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                let bad = match self.tags[t] {
                    Subdomain::Inner => seen_out[v],
                    Subdomain::Outer => seen_in[v],
                };
                if bad {
                    return Err(Error::MeshGeneration(format!(
                        "triangle {t} references the wrong interface copy"
                    )));
                }
            }
        }
        for (e, &[i, j]) in self.interface_edges.iter().enumerate() {
            let [ti, to] = self.edge_triangles[e];
            let (pi, pj) = (self.interface_pairs[i], self.interface_pairs[j]);
            let has = |t: usize, a: usize, b: usize| {
                let tri = self.triangles[t];
                tri.contains(&a) && tri.contains(&b)
            };
            if self.tags[ti] != Subdomain::Inner
                || self.tags[to] != Subdomain::Outer
                || !has(ti, pi.inner, pj.inner)
                || !has(to, pi.outer, pj.outer)
            {
                return Err(Error::MeshGeneration(format!("interface edge {e} is not shared correctly")));
            }
        }
        Ok(())
    }

    /// Plain-text export: counts, `x y` vertex lines, `i j k tag` triangle
    /// lines (tag 0 inner, 1 outer) and `i_in i_out` interface-pair lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for (tri, tag) in self.triangles.iter().zip(&self.tags) {
            writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], tag.index())?;
        }
        writeln!(w, "interface_pairs {}", self.interface_pairs.len())?;
        for p in &self.interface_pairs {
            writeln!(w, "{} {}", p.inner, p.outer)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Places `n` membrane nodes counter-clockwise, denser where the curvature
/// radius is small.
fn membrane_parameters(geometry: &CellGeometry, h: f64) -> Vec<f64> {
    let spacing = |t: f64| h.min(geometry.curvature_radius_at(t) * PI / 8.0);
    if geometry.is_circle() {
        let r = geometry.semi_axes().0;
        let n = ((2.0 * PI * r / spacing(0.0)).ceil() as usize).max(16).next_multiple_of(4);
        return (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    }
    let samples = 8192;
    let dt = 2.0 * PI / samples as f64;
    let mut cum = vec![0.0; samples + 1];
    for i in 0..samples {
        let t = (i as f64 + 0.5) * dt;
        cum[i + 1] = cum[i] + geometry.speed_at(t) * dt / spacing(t);
    }
    let n = (cum[samples].ceil() as usize).max(16).next_multiple_of(4);
    let step = cum[samples] / n as f64;
    let mut params = Vec::with_capacity(n);
    let mut i = 0;
    for j in 0..n {
        let target = j as f64 * step;
        while cum[i + 1] < target {
            i += 1;
        }
        let frac = if cum[i + 1] > cum[i] { (target - cum[i]) / (cum[i + 1] - cum[i]) } else { 0.0 };
        params.push((i as f64 + frac) * dt);
    }
    params
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Bucketed point set for nearest-neighbour rejection during fill.
struct PointGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<[f64; 2]>>,
}

impl PointGrid {
    fn new(cell: f64) -> Self {
        Self { cell, buckets: HashMap::new() }
    }

    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: [f64; 2]) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(p);
    }

    fn nearest_within(&self, p: [f64; 2], r: f64) -> bool {
        let (kx, ky) = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(b) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if b.iter().any(|&q| dist(p, q) < r) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Meshes the unit cell `[0, L]^2` with a conforming membrane polygon.
///
/// Layout: uniform boundary nodes, membrane nodes spaced by
/// `min(h, pi/8 * curvature radius)`, one staggered ring of nodes on each
/// side of the membrane, and a triangular lattice fill; the point set is
/// triangulated by constrained Delaunay with the membrane edges enforced.
pub fn build_unit_cell_mesh(geometry: &CellGeometry, h_target: f64) -> Result<InterfaceMesh> {
    geometry.validate()?;
    let l = geometry.cell_size;
    if !(h_target > 0.0) {
        return Err(Error::InvalidInput(format!("h_target {h_target} must be positive")));
    }
    let perimeter = geometry.perimeter();
    if perimeter / h_target < 16.0 {
        return Err(Error::InsufficientInterfaceResolution(format!(
            "perimeter/h = {:.2} < 16",
            perimeter / h_target
        )));
    }
    let h = h_target;

    let mut points: Vec<[f64; 2]> = Vec::new();
    let nb = ((l / h).ceil() as usize).max(2);
    let mut boundary = Vec::with_capacity(4 * nb);
    for i in 0..nb {
        boundary.push([i as f64 * l / nb as f64, 0.0]);
    }
    for i in 0..nb {
        boundary.push([l, i as f64 * l / nb as f64]);
    }
    for i in 0..nb {
        boundary.push([l - i as f64 * l / nb as f64, l]);
    }
    for i in 0..nb {
        boundary.push([0.0, l - i as f64 * l / nb as f64]);
    }
    let boundary_ids: Vec<usize> = (0..boundary.len()).collect();
    points.extend_from_slice(&boundary);

    let params = membrane_parameters(geometry, h);
    let gamma: Vec<[f64; 2]> = params.iter().map(|&t| geometry.point_at(t)).collect();
    let m = gamma.len();
    let gamma_start = points.len();
    points.extend_from_slice(&gamma);

    let mut structural = PointGrid::new(h);
    for &p in &gamma {
        structural.insert(p);
    }
    let gap_to_boundary = |p: [f64; 2]| p[0].min(p[1]).min(l - p[0]).min(l - p[1]);

    // Boundary-layer rings at the edge midpoints, offset along the edge normal.
    let rho_min = geometry.min_curvature_radius();
    let (sa, sb) = geometry.semi_axes();
    let mut rings = PointGrid::new(h);
    let mut ring_points = Vec::new();
    for j in 0..m {
        let (p, q) = (gamma[j], gamma[(j + 1) % m]);
        let len = dist(p, q);
        let nrm = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let d = 0.5 * 3f64.sqrt() * len;
        for side in [-1.0, 1.0] {
            let c = [mid[0] + side * d * nrm[0], mid[1] + side * d * nrm[1]];
            let inside = point_in_polygon(c, &gamma);
            if inside != (side < 0.0) {
                continue;
            }
            if side < 0.0 && (d > 0.5 * rho_min.max(len) || d > 0.45 * sa.min(sb)) {
                continue;
            }
            if side > 0.0 && gap_to_boundary(c) < 0.75 * h {
                continue;
            }
            if structural.nearest_within(c, 0.75 * len) || rings.nearest_within(c, 0.7 * len) {
                continue;
            }
            rings.insert(c);
            ring_points.push(c);
        }
    }
    for &p in &ring_points {
        structural.insert(p);
    }
    points.extend_from_slice(&ring_points);

    let dy = 0.5 * 3f64.sqrt() * h;
    let rows = (l / dy).floor() as i64 + 1;
    let cols = (l / h).floor() as i64 + 2;
    for j in 0..rows {
        let y = (l - (rows - 1) as f64 * dy) * 0.5 + j as f64 * dy;
        let shift = if j % 2 == 0 { 0.0 } else { 0.5 * h };
        for i in -1..cols {
            let x = (l - (cols - 2) as f64 * h) * 0.5 + i as f64 * h + shift;
            let p = [x, y];
            if gap_to_boundary(p) < 0.6 * h || structural.nearest_within(p, 0.75 * h) {
                continue;
            }
            points.push(p);
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    let mut handle_to_id = HashMap::new();
    for (id, p) in points.iter().enumerate() {
        let hnd = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::MeshGeneration(format!("point insertion failed: {e:?}")))?;
        if handle_to_id.insert(hnd.index(), id).is_some() {
            return Err(Error::MeshGeneration(format!("duplicate mesh point {p:?}")));
        }
        handles.push(hnd);
    }
    for j in 0..m {
        let (a, b) = (handles[gamma_start + j], handles[gamma_start + (j + 1) % m]);
        if cdt.try_add_constraint(a, b).len() != 1 {
            return Err(Error::MeshGeneration(format!("membrane edge {j} could not be enforced")));
        }
    }

    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (slot, v) in tri.iter_mut().zip(vs.iter()) {
            *slot = handle_to_id[&v.fix().index()];
        }
        let (p, q, r) = (points[tri[0]], points[tri[1]], points[tri[2]]);
        let area = 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
        if area < 0.0 {
            tri.swap(1, 2);
        }
        let c = [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0];
        tags.push(if point_in_polygon(c, &gamma) { Subdomain::Inner } else { Subdomain::Outer });
        triangles.push(tri);
    }
    // Deterministic ordering independent of the triangulation's internal layout.
    let mut order: Vec<usize> = (0..triangles.len()).collect();
    order.sort_by_key(|&t| {
        let mut s = triangles[t];
        s.sort_unstable();
        s
    });
    let mut triangles: Vec<[usize; 3]> = order.iter().map(|&t| triangles[t]).collect();
    let tags: Vec<Subdomain> = order.iter().map(|&t| tags[t]).collect();

    let mut vertices = points;
    let mut outer_copy = HashMap::new();
    let mut interface_pairs = Vec::with_capacity(m);
    for j in 0..m {
        let inner = gamma_start + j;
        let outer = vertices.len();
        vertices.push(vertices[inner]);
        outer_copy.insert(inner, outer);
        interface_pairs.push(InterfacePair { inner, outer });
    }
    for (tri, tag) in triangles.iter_mut().zip(&tags) {
        if *tag == Subdomain::Outer {
            for v in tri.iter_mut() {
                if let Some(&o) = outer_copy.get(v) {
                    *v = o;
                }
            }
        }
    }

    let interface_edges: Vec<[usize; 2]> = (0..m).map(|j| [j, (j + 1) % m]).collect();
    let edge_triangles = locate_edge_triangles(&triangles, &tags, &interface_pairs, &interface_edges)?;

    let mesh = InterfaceMesh {
        vertices,
        triangles,
        tags,
        interface_pairs,
        interface_edges,
        edge_triangles,
        boundary_vertices: boundary_ids,
        pair_cell: vec![0; m],
        cell_centers: vec![geometry.center()],
        domain: Square { origin: [0.0, 0.0], size: l },
        h,
        boundary_divisions: nb,
    };
    mesh.check_invariants()?;
    Ok(mesh)
}

fn locate_edge_triangles(
    triangles: &[[usize; 3]],
    tags: &[Subdomain],
    pairs: &[InterfacePair],
    edges: &[[usize; 2]],
) -> Result<Vec<[usize; 2]>> {
    let mut by_edge: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            by_edge.insert((a.min(b), a.max(b)), t);
        }
    }
    let mut out = Vec::with_capacity(edges.len());
    for (e, &[i, j]) in edges.iter().enumerate() {
        let look = |a: usize, b: usize| by_edge.get(&(a.min(b), a.max(b))).copied();
        let ti = look(pairs[i].inner, pairs[j].inner);
        let to = look(pairs[i].outer, pairs[j].outer);
        match (ti, to) {
            (Some(ti), Some(to)) if tags[ti] == Subdomain::Inner && tags[to] == Subdomain::Outer => {
                out.push([ti, to])
            }
            _ => return Err(Error::MeshGeneration(format!("interface edge {e} lost in triangulation"))),
        }
    }
    Ok(out)
}

/// `n x n` scaled copies of the unit-cell mesh covering `[0, domain_size]^2`,
/// with `n = domain_size / (eps * L)`.
pub fn build_tiled_mesh(
    geometry: &CellGeometry,
    eps: f64,
    domain_size: f64,
    h_target: f64,
) -> Result<InterfaceMesh> {
    let unit = build_unit_cell_mesh(geometry, h_target)?;
    tile_mesh(&unit, eps, domain_size)
}

/// Tiles an existing unit-cell mesh; see [`build_tiled_mesh`].
pub fn tile_mesh(unit: &InterfaceMesh, eps: f64, domain_size: f64) -> Result<InterfaceMesh> {
    let l = unit.domain.size;
    let ratio = domain_size / (eps * l);
    let n = ratio.round();
    if !(eps > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * n {
        return Err(Error::NonConformingTiling(ratio));
    }
    let n = n as usize;
    let tile = domain_size / n as f64;
    let scale = tile / l;
    let grid = tile / unit.boundary_divisions as f64;
    let grid_key = |p: [f64; 2]| ((p[0] / grid).round() as i64, (p[1] / grid).round() as i64);

    let mut is_boundary = vec![false; unit.vertices.len()];
    for &v in &unit.boundary_vertices {
        is_boundary[v] = true;
    }
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    let mut pairs = Vec::new();
    let mut edges = Vec::new();
    let mut edge_triangles = Vec::new();
    let mut pair_cell = Vec::new();
    let mut centers = Vec::new();
    let mut shared: HashMap<(i64, i64), usize> = HashMap::new();
    for cj in 0..n {
        for ci in 0..n {
            let off = [ci as f64 * tile, cj as f64 * tile];
            let mut map = Vec::with_capacity(unit.vertices.len());
            for (v, p) in unit.vertices.iter().enumerate() {
                let q = [off[0] + p[0] * scale, off[1] + p[1] * scale];
                if is_boundary[v] {
                    let id = *shared.entry(grid_key(q)).or_insert_with(|| {
                        vertices.push(q);
                        vertices.len() - 1
                    });
                    map.push(id);
                } else {
                    vertices.push(q);
                    map.push(vertices.len() - 1);
                }
            }
            let t0 = triangles.len();
            for (tri, tag) in unit.triangles.iter().zip(&unit.tags) {
                triangles.push([map[tri[0]], map[tri[1]], map[tri[2]]]);
                tags.push(*tag);
            }
            let p0 = pairs.len();
            let cell = centers.len();
            for p in &unit.interface_pairs {
                pairs.push(InterfacePair { inner: map[p.inner], outer: map[p.outer] });
                pair_cell.push(cell);
            }
            for (e, et) in unit.interface_edges.iter().zip(&unit.edge_triangles) {
                edges.push([p0 + e[0], p0 + e[1]]);
                edge_triangles.push([t0 + et[0], t0 + et[1]]);
            }
            let c = unit.cell_centers[0];
            centers.push([off[0] + c[0] * scale, off[1] + c[1] * scale]);
        }
    }
    let tol = 1e-9 * domain_size;
    let boundary_vertices = (0..vertices.len())
        .filter(|&v| {
            let p: [f64; 2] = vertices[v];
            p[0].abs() < tol || p[1].abs() < tol || (p[0] - domain_size).abs() < tol || (p[1] - domain_size).abs() < tol
        })
        .collect();
    let mesh = InterfaceMesh {
        vertices,
        triangles,
        tags,
        interface_pairs: pairs,
        interface_edges: edges,
        edge_triangles,
        boundary_vertices,
        pair_cell,
        cell_centers: centers,
        domain: Square { origin: [0.0, 0.0], size: domain_size },
        h: unit.h * scale,
        boundary_divisions: unit.boundary_divisions,
    };
    mesh.check_invariants()?;
    Ok(mesh)
}

/// Structured mesh of a square without membrane, every triangle tagged outer.
pub fn build_square_mesh(domain: Square, divisions: usize) -> Result<InterfaceMesh> {
    if divisions == 0 {
        return Err(Error::InvalidInput("square mesh needs at least one division".into()));
    }
    let n = divisions;
    let hx = domain.size / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([domain.origin[0] + i as f64 * hx, domain.origin[1] + j as f64 * hx]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let boundary_vertices = (0..vertices.len())
        .filter(|&v| {
            let (i, j) = (v % (n + 1), v / (n + 1));
            i == 0 || j == 0 || i == n || j == n
        })
        .collect();
    let tags = vec![Subdomain::Outer; triangles.len()];
    Ok(InterfaceMesh {
        vertices,
        triangles,
        tags,
        interface_pairs: Vec::new(),
        interface_edges: Vec::new(),
        edge_triangles: Vec::new(),
        boundary_vertices,
        pair_cell: Vec::new(),
        cell_centers: Vec::new(),
        domain,
        h: hx,
        boundary_divisions: n,
    })
}

/// Human-readable one-line summary, used in logs.
pub fn describe(mesh: &InterfaceMesh) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{} vertices, {} triangles, {} interface pairs, f = {:.6}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.interface_pairs.len(),
        if mesh.interface_pairs.is_empty() { 0.0 } else { mesh.volume_fraction() }
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> CellGeometry {
        CellGeometry::circle(2e-4, 0.5e-4)
    }

    #[test]
    fn circle_fraction_within_one_percent() {
        let mesh = build_unit_cell_mesh(&table1(), 2e-4 / 24.0).unwrap();
        let f = mesh.volume_fraction();
        assert!((f - PI / 16.0).abs() / (PI / 16.0) < 1e-2, "f = {f}");
        assert!((mesh.total_area() - 4e-8).abs() < 1e-20);
    }

    #[test]
    fn degenerate_ellipse_matches_circle() {
        let h = 2e-4 / 20.0;
        let c = build_unit_cell_mesh(&table1(), h).unwrap();
        let e = build_unit_cell_mesh(&CellGeometry::ellipse(2e-4, 0.5e-4, 0.5e-4, 0.0), h).unwrap();
        assert_eq!(c.to_text(), e.to_text());
    }

    #[test]
    fn rotation_preserves_fraction() {
        let h = 2e-4 / 30.0;
        let g0 = CellGeometry::ellipse(2e-4, 0.6e-4, 0.3e-4, 0.0);
        let g1 = CellGeometry { lattice_angle: PI / 2.0, ..g0 };
        let f0 = build_unit_cell_mesh(&g0, h).unwrap().volume_fraction();
        let f1 = build_unit_cell_mesh(&g1, h).unwrap().volume_fraction();
        assert!((f0 - f1).abs() / f0 < 1e-2, "{f0} vs {f1}");
    }

    #[test]
    fn normals_point_outward() {
        let g = table1();
        let mesh = build_unit_cell_mesh(&g, 2e-4 / 16.0).unwrap();
        let c = g.center();
        for e in 0..mesh.interface_edges.len() {
            let n = mesh.edge_normal(e);
            let [i, _] = mesh.interface_edges[e];
            let p = mesh.pair_position(i);
            assert!(n[0] * (p[0] - c[0]) + n[1] * (p[1] - c[1]) > 0.0);
        }
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        let err = build_unit_cell_mesh(&table1(), 2.5e-5).unwrap_err();
        assert!(matches!(err, Error::InsufficientInterfaceResolution(_)));
    }

    #[test]
    fn chord_error_respects_bound() {
        let g = CellGeometry::ellipse(2e-4, 0.7e-4, 0.25e-4, 0.4);
        let h = 2e-4 / 30.0;
        let mesh = build_unit_cell_mesh(&g, h).unwrap();
        let bound = h * h / (2.0 * g.min_curvature_radius());
        let seg_dist = |p: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            dist(p, [a[0] + t * dx, a[1] + t * dy])
        };
        let mut worst: f64 = 0.0;
        for s in 0..4000 {
            let p = g.point_at(2.0 * PI * s as f64 / 4000.0);
            let d = (0..mesh.interface_edges.len())
                .map(|e| {
                    let [i, j] = mesh.interface_edges[e];
                    seg_dist(p, mesh.pair_position(i), mesh.pair_position(j))
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        assert!(worst <= bound, "chord error {worst:e} > {bound:e}");
    }

    #[test]
    fn periodic_sides_are_identified() {
        let mesh = build_unit_cell_mesh(&table1(), 2e-4 / 16.0).unwrap();
        let rep = mesh.periodic_representatives();
        let corners: Vec<usize> = mesh
            .boundary_vertices
            .iter()
            .copied()
            .filter(|&v| {
                let p = mesh.vertices[v];
                (p[0] == 0.0 || p[0] == 2e-4) && (p[1] == 0.0 || p[1] == 2e-4)
            })
            .collect();
        assert_eq!(corners.len(), 4);
        assert!(corners.iter().all(|&c| rep[c] == rep[corners[0]]));
        let classes: std::collections::HashSet<usize> =
            mesh.boundary_vertices.iter().map(|&v| rep[v]).collect();
        assert_eq!(classes.len(), 2 * mesh.boundary_divisions - 1);
    }

    #[test]
    fn single_tile_is_identity() {
        let unit = build_unit_cell_mesh(&table1(), 2e-4 / 16.0).unwrap();
        let tiled = tile_mesh(&unit, 1.0, 2e-4).unwrap();
        assert_eq!(unit.to_text(), tiled.to_text());
    }

    #[test]
    fn tiling_scales_interface_length() {
        let unit = build_unit_cell_mesh(&table1(), 2e-4 / 16.0).unwrap();
        let t4 = tile_mesh(&unit, 0.25, 2e-4).unwrap();
        assert_eq!(t4.cell_centers.len(), 16);
        let ratio = t4.interface_length() / unit.interface_length();
        assert!((ratio - 4.0).abs() < 1e-10, "ratio {ratio}");
        assert!((t4.volume_fraction() - unit.volume_fraction()).abs() < 1e-12);
        let t2 = tile_mesh(&unit, 0.5, 2e-4).unwrap();
        assert_eq!(t2.cell_centers.len(), 4);
    }

    #[test]
    fn non_integer_tiling_is_rejected() {
        let unit = build_unit_cell_mesh(&table1(), 2e-4 / 16.0).unwrap();
        assert!(matches!(tile_mesh(&unit, 0.3, 2e-4), Err(Error::NonConformingTiling(_))));
    }
}
