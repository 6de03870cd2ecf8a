//! Static reference-domain meshes: uniform grids of intervals, triangles or
//! rectangles, affine element maps, and face connectivity with periodic or
//! reflective boundary treatment.
//!
//! The mesh lives entirely on the fixed reference domain; all curvature and
//! motion enter later through the ALE map. Mesh files use a small ASCII
//! format (see [`Mesh::write_file`]).

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::ref_element::{ElementKind, RefElement};

/// Boundary treatment applied by [`connect_faces`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySpec {
    /// Opposite boundary faces are identified.
    Periodic,
    /// Boundary faces get mirror-state (Dirichlet `p = 0`) treatment.
    Reflective,
}

/// Where a face leads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceConnection {
    /// Shares quadrature points with `(elem, face)`; `flipped` says whether
    /// the neighbour traverses the face in the opposite direction.
    Interior {
        elem: usize,
        face: usize,
        flipped: bool,
    },
    /// Mirror-state boundary.
    Reflective,
    /// Not yet connected.
    Unset,
}

/// Affine map from the reference element onto a mesh element.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    /// Columns are d(xi)/dr and d(xi)/ds (second column unused in 1D).
    pub jac: [[f64; 2]; 2],
    pub offset: [f64; 2],
    /// Inverse Jacobian, rows are dr/d(xi_j).
    pub inv: [[f64; 2]; 2],
    /// Jacobian determinant (length/area scale versus the reference element).
    pub detj: f64,
}

/// Per-element-face geometry and connectivity.
#[derive(Debug, Clone, Copy)]
pub struct ElemFace {
    /// Outward unit normal in reference-domain coordinates.
    pub normal: [f64; 2],
    /// Physical-face-length over reference parameter length (so a face
    /// integral is `sj * sum(w_i f_i)`; equals 1 for interval endpoints).
    pub sj: f64,
    pub conn: FaceConnection,
}

/// A conforming mesh of the reference domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: ElementKind,
    pub verts: Vec<[f64; 2]>,
    pub elems: Vec<Vec<usize>>,
    pub affine: Vec<AffineMap>,
    pub faces: Vec<Vec<ElemFace>>,
    /// Characteristic mesh size used by refinement studies.
    pub h: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub boundary: Option<BoundarySpec>,
}

fn affine_for(kind: ElementKind, verts: &[[f64; 2]]) -> Result<AffineMap> {
    let (jac, offset) = match kind {
        ElementKind::Segment => {
            let a = (verts[1][0] - verts[0][0]) / 2.0;
            ([[a, 0.0], [0.0, 1.0]], [(verts[0][0] + verts[1][0]) / 2.0, 0.0])
        }
        ElementKind::Triangle => {
            let dr = [
                (verts[1][0] - verts[0][0]) / 2.0,
                (verts[1][1] - verts[0][1]) / 2.0,
            ];
            let ds = [
                (verts[2][0] - verts[0][0]) / 2.0,
                (verts[2][1] - verts[0][1]) / 2.0,
            ];
            // Phi(-1,-1) = v0
            let off = [verts[0][0] + dr[0] + ds[0], verts[0][1] + dr[1] + ds[1]];
            ([[dr[0], ds[0]], [dr[1], ds[1]]], off)
        }
        ElementKind::Quad => {
            let dr = [
                (verts[1][0] - verts[0][0]) / 2.0,
                (verts[1][1] - verts[0][1]) / 2.0,
            ];
            let ds = [
                (verts[3][0] - verts[0][0]) / 2.0,
                (verts[3][1] - verts[0][1]) / 2.0,
            ];
            let v2 = [
                verts[0][0] + 2.0 * dr[0] + 2.0 * ds[0],
                verts[0][1] + 2.0 * dr[1] + 2.0 * ds[1],
            ];
            if (v2[0] - verts[2][0]).abs() + (v2[1] - verts[2][1]).abs() > 1e-10 {
                return Err(Error::NonConformingMesh(
                    "quad element is not a parallelogram".into(),
                ));
            }
            let off = [verts[0][0] + dr[0] + ds[0], verts[0][1] + dr[1] + ds[1]];
            ([[dr[0], ds[0]], [dr[1], ds[1]]], off)
        }
    };
    let detj = match kind {
        ElementKind::Segment => jac[0][0],
        _ => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
    };
    if detj <= 0.0 {
        return Err(Error::NonConformingMesh(
            "element has nonpositive orientation".into(),
        ));
    }
    let inv = match kind {
        ElementKind::Segment => [[1.0 / jac[0][0], 0.0], [0.0, 1.0]],
        _ => [
            [jac[1][1] / detj, -jac[0][1] / detj],
            [-jac[1][0] / detj, jac[0][0] / detj],
        ],
    };
    Ok(AffineMap {
        jac,
        offset,
        inv,
        detj,
    })
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn num_elems(&self) -> usize {
        self.elems.len()
    }

    fn from_parts(
        kind: ElementKind,
        verts: Vec<[f64; 2]>,
        elems: Vec<Vec<usize>>,
        h: f64,
        lo: [f64; 2],
        hi: [f64; 2],
    ) -> Result<Mesh> {
        let mut affine = Vec::with_capacity(elems.len());
        let mut faces = Vec::with_capacity(elems.len());
        for ev in &elems {
            let coords: Vec<[f64; 2]> = ev.iter().map(|&v| verts[v]).collect();
            let map = affine_for(kind, &coords)?;
            affine.push(map);
            let mut ef = Vec::new();
            for (fv, _) in kind.face_vertices() {
                let (a, b) = (coords[fv[0]], coords[fv[1]]);
                let (normal, sj) = if kind == ElementKind::Segment {
                    (
                        if fv[0] == 0 { [-1.0, 0.0] } else { [1.0, 0.0] },
                        1.0,
                    )
                } else {
                    let t = [b[0] - a[0], b[1] - a[1]];
                    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
                    ([t[1] / len, -t[0] / len], len / 2.0)
                };
                ef.push(ElemFace {
                    normal,
                    sj,
                    conn: FaceConnection::Unset,
                });
            }
            faces.push(ef);
        }
        Ok(Mesh {
            kind,
            verts,
            elems,
            affine,
            faces,
            h,
            lo,
            hi,
            boundary: None,
        })
    }

    /// Map reference points (`n x dim`) into element `k`.
    pub fn map_points(&self, k: usize, pts: &ArrayView2<f64>) -> Array2<f64> {
        let m = &self.affine[k];
        let dim = self.dim();
        let mut out = Array2::zeros((pts.nrows(), dim));
        for (i, p) in pts.outer_iter().enumerate() {
            let r = p[0];
            let s = if dim > 1 { p[1] } else { 0.0 };
            out[(i, 0)] = m.offset[0] + m.jac[0][0] * r + m.jac[0][1] * s;
            if dim > 1 {
                out[(i, 1)] = m.offset[1] + m.jac[1][0] * r + m.jac[1][1] * s;
            }
        }
        out
    }

    /// Reference-domain coordinates of the face quadrature points of
    /// `(elem, face)` for the given reference element.
    pub fn face_quad_points(&self, re: &RefElement, k: usize, f: usize) -> Array2<f64> {
        self.map_points(k, &re.faces[f].points.view())
    }

    /// Total measure of the mesh, `sum_k detj_k * |ref element|`.
    pub fn total_measure(&self, ref_measure: f64) -> f64 {
        self.affine.iter().map(|a| a.detj * ref_measure).sum()
    }

    /// Write the ASCII mesh format: a `dim K Nv kind` header, `Nv` coordinate
    /// lines, `K` lines of 1-based vertex indices, then one
    /// `face_elem face_local tag` line per boundary face (1-based).
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let kind = match self.kind {
            ElementKind::Segment => "segment",
            ElementKind::Triangle => "tri",
            ElementKind::Quad => "quad",
        };
        let dim = self.dim();
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {} {}\n",
            dim,
            self.elems.len(),
            self.verts.len(),
            kind
        ));
        for v in &self.verts {
            if dim == 1 {
                out.push_str(&format!("{:.16e}\n", v[0]));
            } else {
                out.push_str(&format!("{:.16e} {:.16e}\n", v[0], v[1]));
            }
        }
        for e in &self.elems {
            let ids: Vec<String> = e.iter().map(|v| (v + 1).to_string()).collect();
            out.push_str(&ids.join(" "));
            out.push('\n');
        }
        let tag = match self.boundary {
            Some(BoundarySpec::Periodic) => "periodic",
            _ => "reflective",
        };
        for (k, ef) in self.faces.iter().enumerate() {
            for (f, face) in ef.iter().enumerate() {
                let boundary_like = match (self.boundary, face.conn) {
                    (Some(BoundarySpec::Periodic), FaceConnection::Interior { .. }) => {
                        self.is_boundary_face(k, f)
                    }
                    (_, FaceConnection::Reflective) => true,
                    (None, FaceConnection::Unset) => self.is_boundary_face(k, f),
                    _ => false,
                };
                if boundary_like {
                    out.push_str(&format!("{} {} {}\n", k + 1, f + 1, tag));
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    fn is_boundary_face(&self, k: usize, f: usize) -> bool {
        let fv = self.kind.face_vertices()[f].0;
        let dim = self.dim();
        let a = self.verts[self.elems[k][fv[0]]];
        let b = self.verts[self.elems[k][fv[1]]];
        (0..dim).any(|d| {
            ((a[d] - self.lo[d]).abs() < 1e-10 && (b[d] - self.lo[d]).abs() < 1e-10)
                || ((a[d] - self.hi[d]).abs() < 1e-10 && (b[d] - self.hi[d]).abs() < 1e-10)
        })
    }

    /// Parse the ASCII format written by [`Mesh::write_file`] and reconnect
    /// faces according to the stored boundary tags.
    pub fn read_file(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens = Vec::new();
        for line in text.lines() {
            let stripped = line.split('#').next().unwrap_or("");
            tokens.extend(stripped.split_whitespace().map(|s| s.to_string()));
        }
        let mut it = tokens.into_iter();
        let mut next = || {
            it.next()
                .ok_or_else(|| Error::MeshParse("unexpected end of file".into()))
        };
        let dim: usize = next()?
            .parse()
            .map_err(|_| Error::MeshParse("bad dim".into()))?;
        let k: usize = next()?
            .parse()
            .map_err(|_| Error::MeshParse("bad K".into()))?;
        let nv: usize = next()?
            .parse()
            .map_err(|_| Error::MeshParse("bad Nv".into()))?;
        let kind = match next()?.as_str() {
            "segment" => ElementKind::Segment,
            "tri" => ElementKind::Triangle,
            "quad" => ElementKind::Quad,
            other => return Err(Error::MeshParse(format!("unknown element kind {other}"))),
        };
        if kind.dim() != dim {
            return Err(Error::MeshParse("dim and kind disagree".into()));
        }
        let mut verts = Vec::with_capacity(nv);
        for _ in 0..nv {
            let x: f64 = next()?
                .parse()
                .map_err(|_| Error::MeshParse("bad coordinate".into()))?;
            let y: f64 = if dim == 2 {
                next()?
                    .parse()
                    .map_err(|_| Error::MeshParse("bad coordinate".into()))?
            } else {
                0.0
            };
            verts.push([x, y]);
        }
        let nvert_per = match kind {
            ElementKind::Segment => 2,
            ElementKind::Triangle => 3,
            ElementKind::Quad => 4,
        };
        let mut elems = Vec::with_capacity(k);
        for _ in 0..k {
            let mut ev = Vec::with_capacity(nvert_per);
            for _ in 0..nvert_per {
                let id: usize = next()?
                    .parse()
                    .map_err(|_| Error::MeshParse("bad vertex index".into()))?;
                if id == 0 || id > nv {
                    return Err(Error::MeshParse(format!("vertex index {id} out of range")));
                }
                ev.push(id - 1);
            }
            elems.push(ev);
        }
        let mut tags = Vec::new();
        while let Some(tok) = it.next() {
            let elem_id: usize = tok
                .parse()
                .map_err(|_| Error::MeshParse("bad boundary element".into()))?;
            let face_id: usize = it
                .next()
                .ok_or_else(|| Error::MeshParse("missing face index".into()))?
                .parse()
                .map_err(|_| Error::MeshParse("bad boundary face".into()))?;
            let tag = it
                .next()
                .ok_or_else(|| Error::MeshParse("missing boundary tag".into()))?;
            tags.push((elem_id, face_id, tag));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &verts {
            for d in 0..dim {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        for d in dim..2 {
            lo[d] = 0.0;
            hi[d] = 0.0;
        }
        let mut hmin = f64::INFINITY;
        for e in &elems {
            let a = verts[e[0]];
            let b = verts[e[1]];
            hmin = hmin.min(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
        let mesh = Mesh::from_parts(kind, verts, elems, hmin, lo, hi)?;
        let spec = if tags.is_empty() || tags.iter().any(|(_, _, t)| t == "periodic") {
            if tags.iter().any(|(_, _, t)| t == "reflective") && tags.iter().any(|(_, _, t)| t == "periodic") {
                return Err(Error::MeshParse("mixed boundary tags are not supported".into()));
            }
            BoundarySpec::Periodic
        } else {
            BoundarySpec::Reflective
        };
        connect_faces(mesh, spec)
    }
}

/// Uniform mesh of an axis-aligned box. `h` must evenly divide every edge;
/// triangles split each grid cell along the lower-left to upper-right
/// diagonal so meshes are deterministic.
pub fn build_uniform_mesh(
    lo: [f64; 2],
    hi: [f64; 2],
    h: f64,
    kind: ElementKind,
) -> Result<Mesh> {
    let dim = kind.dim();
    let mut cells = [1usize; 2];
    for d in 0..dim {
        let extent = hi[d] - lo[d];
        let n = (extent / h).round();
        if n < 1.0 || ((n * h - extent) / extent).abs() > 1e-9 {
            return Err(Error::NonDivisibleMeshSize { h, extent });
        }
        cells[d] = n as usize;
    }
    match kind {
        ElementKind::Segment => {
            let n = cells[0];
            let verts: Vec<[f64; 2]> = (0..=n).map(|i| [lo[0] + i as f64 * h, 0.0]).collect();
            let elems: Vec<Vec<usize>> = (0..n).map(|i| vec![i, i + 1]).collect();
            Mesh::from_parts(kind, verts, elems, h, lo, hi)
        }
        ElementKind::Quad | ElementKind::Triangle => {
            let (nx, ny) = (cells[0], cells[1]);
            let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
            for i in 0..=nx {
                for j in 0..=ny {
                    verts.push([lo[0] + i as f64 * h, lo[1] + j as f64 * h]);
                }
            }
            let vid = |i: usize, j: usize| i * (ny + 1) + j;
            let mut elems = Vec::new();
            for i in 0..nx {
                for j in 0..ny {
                    let (bl, br, tr, tl) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                    if kind == ElementKind::Quad {
                        elems.push(vec![bl, br, tr, tl]);
                    } else {
                        elems.push(vec![bl, br, tr]);
                        elems.push(vec![bl, tr, tl]);
                    }
                }
            }
            Mesh::from_parts(kind, verts, elems, h, lo, hi)
        }
    }
}

/// Pair interior faces (and periodic boundary faces) or tag reflective ones.
///
/// Fails on meshes with unpaired interior faces.
pub fn connect_faces(mut mesh: Mesh, spec: BoundarySpec) -> Result<Mesh> {
    let face_defs = mesh.kind.face_vertices();
    // interior pairing by sorted vertex key
    let mut by_key: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
    for (k, ev) in mesh.elems.iter().enumerate() {
        for (f, (fv, _)) in face_defs.iter().enumerate() {
            let mut key = vec![ev[fv[0]], ev[fv[1]]];
            key.sort_unstable();
            key.dedup();
            by_key.entry(key).or_default().push((k, f));
        }
    }
    let mut leftovers: Vec<(usize, usize)> = Vec::new();
    for (_, members) in by_key.iter() {
        match members.len() {
            1 => leftovers.push(members[0]),
            2 => {
                let ((k1, f1), (k2, f2)) = (members[0], members[1]);
                let (a1, b1) = face_vert_ids(&mesh, k1, f1);
                let (a2, b2) = face_vert_ids(&mesh, k2, f2);
                let flipped = if mesh.kind == ElementKind::Segment {
                    false
                } else if a1 == b2 && b1 == a2 {
                    true
                } else if a1 == a2 && b1 == b2 {
                    false
                } else {
                    return Err(Error::NonConformingMesh(format!(
                        "faces ({k1},{f1}) and ({k2},{f2}) share vertices inconsistently"
                    )));
                };
                mesh.faces[k1][f1].conn = FaceConnection::Interior {
                    elem: k2,
                    face: f2,
                    flipped,
                };
                mesh.faces[k2][f2].conn = FaceConnection::Interior {
                    elem: k1,
                    face: f1,
                    flipped,
                };
            }
            n => {
                return Err(Error::NonConformingMesh(format!(
                    "face shared by {n} elements"
                )))
            }
        }
    }

    match spec {
        BoundarySpec::Reflective => {
            for &(k, f) in &leftovers {
                if !mesh.is_boundary_face(k, f) {
                    return Err(Error::NonConformingMesh(format!(
                        "unpaired interior face on element {k}"
                    )));
                }
                mesh.faces[k][f].conn = FaceConnection::Reflective;
            }
        }
        BoundarySpec::Periodic => {
            let dim = mesh.dim();
            let tol = 1e-10;
            let mut used = vec![false; leftovers.len()];
            for i in 0..leftovers.len() {
                if used[i] {
                    continue;
                }
                let (k1, f1) = leftovers[i];
                if !mesh.is_boundary_face(k1, f1) {
                    return Err(Error::NonConformingMesh(format!(
                        "unpaired interior face on element {k1}"
                    )));
                }
                let (va1, vb1) = face_vert_coords(&mesh, k1, f1);
                let mut matched = false;
                'outer: for d in 0..dim {
                    let extent = mesh.hi[d] - mesh.lo[d];
                    for &shift in &[extent, -extent] {
                        let sa = shifted(va1, d, shift);
                        let sb = shifted(vb1, d, shift);
                        for j in 0..leftovers.len() {
                            if used[j] || j == i {
                                continue;
                            }
                            let (k2, f2) = leftovers[j];
                            let (va2, vb2) = face_vert_coords(&mesh, k2, f2);
                            let same = close(sa, va2, tol) && close(sb, vb2, tol);
                            let flip = close(sa, vb2, tol) && close(sb, va2, tol);
                            if same || flip {
                                let flipped = if mesh.kind == ElementKind::Segment {
                                    false
                                } else {
                                    flip
                                };
                                mesh.faces[k1][f1].conn = FaceConnection::Interior {
                                    elem: k2,
                                    face: f2,
                                    flipped,
                                };
                                mesh.faces[k2][f2].conn = FaceConnection::Interior {
                                    elem: k1,
                                    face: f1,
                                    flipped,
                                };
                                used[i] = true;
                                used[j] = true;
                                matched = true;
                                break 'outer;
                            }
                        }
                    }
                }
                if !matched {
                    return Err(Error::NonConformingMesh(format!(
                        "no periodic partner for face ({k1},{f1})"
                    )));
                }
            }
        }
    }
    mesh.boundary = Some(spec);
    Ok(mesh)
}

fn face_vert_ids(mesh: &Mesh, k: usize, f: usize) -> (usize, usize) {
    let fv = mesh.kind.face_vertices()[f].0;
    (mesh.elems[k][fv[0]], mesh.elems[k][fv[1]])
}

fn face_vert_coords(mesh: &Mesh, k: usize, f: usize) -> ([f64; 2], [f64; 2]) {
    let (a, b) = face_vert_ids(mesh, k, f);
    (mesh.verts[a], mesh.verts[b])
}

fn shifted(v: [f64; 2], d: usize, by: f64) -> [f64; 2] {
    let mut out = v;
    out[d] += by;
    out
}

fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol
}
