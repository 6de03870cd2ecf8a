//! Reference elements: approximation spaces, quadrature and discrete operators.
//!
//! A [`RefElement`] bundles everything the solver needs on the bi-unit
//! reference segment, triangle `{(r,s) >= -1, r+s <= 0}` or square: volume
//! quadrature exact for total degree `2N+1`, the interpolation matrix `Vq`,
//! the quadrature-based L2 projection `Pq = M^{-1} Vq^T diag(w)`, modal
//! differentiation, face quadrature/interpolation and a unisolvent set of
//! geometry nodes whose edge points are shared between neighbouring elements.
//!
//! Polynomial spaces use L2-orthonormal bases (tensor Legendre on segment and
//! square, the Koornwinder-Dubiner family on the triangle) so the reference
//! mass matrix is the identity up to roundoff. Spline spaces reuse the same
//! container; see the `spline` module.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::quadrature::{
    gauss_legendre, gauss_lobatto_nodes, jacobi_deriv, jacobi_seq, triangle_quadrature,
    triangle_to_collapsed,
};
use crate::spline::SplineSpace;

/// Reference element geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Segment,
    Triangle,
    Quad,
}

impl ElementKind {
    pub fn dim(&self) -> usize {
        match self {
            ElementKind::Segment => 1,
            _ => 2,
        }
    }

    pub fn num_faces(&self) -> usize {
        match self {
            ElementKind::Segment => 2,
            ElementKind::Triangle => 3,
            ElementKind::Quad => 4,
        }
    }

    /// Reference vertices in counterclockwise order.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        match self {
            ElementKind::Segment => vec![[-1.0, 0.0], [1.0, 0.0]],
            ElementKind::Triangle => vec![[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]],
            ElementKind::Quad => vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
        }
    }

    /// Local vertex indices (a, b) of each face, following the boundary
    /// orientation, plus the outward unit normal.
    pub fn face_vertices(&self) -> Vec<([usize; 2], [f64; 2])> {
        let rt2 = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            ElementKind::Segment => vec![([0, 0], [-1.0, 0.0]), ([1, 1], [1.0, 0.0])],
            ElementKind::Triangle => vec![
                ([0, 1], [0.0, -1.0]),
                ([1, 2], [rt2, rt2]),
                ([2, 0], [-1.0, 0.0]),
            ],
            ElementKind::Quad => vec![
                ([0, 1], [0.0, -1.0]),
                ([1, 2], [1.0, 0.0]),
                ([2, 3], [0.0, 1.0]),
                ([3, 0], [-1.0, 0.0]),
            ],
        }
    }
}

/// Basis evaluation backend.
#[derive(Debug, Clone)]
pub enum BasisFamily {
    /// Orthonormal Legendre on [-1,1].
    Legendre { n: usize },
    /// Tensor product of orthonormal Legendre, index `c = i*(n+1) + j`.
    TensorLegendre { n: usize },
    /// Koornwinder-Dubiner orthonormal basis on the bi-unit triangle.
    Dubiner { n: usize },
    /// Open-knot B-splines on [-1,1].
    Spline1d(SplineSpace),
    /// Tensor product B-splines, index `c = i*(n+h) + j`.
    TensorSpline(SplineSpace),
}

impl BasisFamily {
    pub fn np(&self) -> usize {
        match self {
            BasisFamily::Legendre { n } => n + 1,
            BasisFamily::TensorLegendre { n } => (n + 1) * (n + 1),
            BasisFamily::Dubiner { n } => (n + 1) * (n + 2) / 2,
            BasisFamily::Spline1d(sp) => sp.num_basis(),
            BasisFamily::TensorSpline(sp) => sp.num_basis() * sp.num_basis(),
        }
    }

    /// Values of all basis functions at the given reference points.
    pub fn values(&self, pts: &ArrayView2<f64>) -> Array2<f64> {
        self.tabulate(pts, None)
    }

    /// Values of the `dir`-derivative of all basis functions.
    pub fn derivs(&self, dir: usize, pts: &ArrayView2<f64>) -> Array2<f64> {
        self.tabulate(pts, Some(dir))
    }

    fn tabulate(&self, pts: &ArrayView2<f64>, deriv: Option<usize>) -> Array2<f64> {
        let m = pts.nrows();
        let np = self.np();
        let mut out = Array2::zeros((m, np));
        for (k, p) in pts.outer_iter().enumerate() {
            let row = self.eval_point(&p, deriv);
            out.row_mut(k).assign(&Array1::from(row));
        }
        out
    }

    fn eval_point(&self, p: &ArrayView1<f64>, deriv: Option<usize>) -> Vec<f64> {
        match self {
            BasisFamily::Legendre { n } => {
                let r = p[0];
                match deriv {
                    None => jacobi_seq(r, 0, 0, *n),
                    Some(_) => (0..=*n).map(|k| jacobi_deriv(r, 0, 0, k)).collect(),
                }
            }
            BasisFamily::TensorLegendre { n } => {
                let (r, sx) = (p[0], p[1]);
                let vr = jacobi_seq(r, 0, 0, *n);
                let vs = jacobi_seq(sx, 0, 0, *n);
                let dr: Vec<f64> = (0..=*n).map(|k| jacobi_deriv(r, 0, 0, k)).collect();
                let ds: Vec<f64> = (0..=*n).map(|k| jacobi_deriv(sx, 0, 0, k)).collect();
                let (fr, fs): (&[f64], &[f64]) = match deriv {
                    None => (&vr, &vs),
                    Some(0) => (&dr, &vs),
                    Some(_) => (&vr, &ds),
                };
                let mut out = Vec::with_capacity((n + 1) * (n + 1));
                for i in 0..=*n {
                    for j in 0..=*n {
                        out.push(fr[i] * fs[j]);
                    }
                }
                out
            }
            BasisFamily::Dubiner { n } => dubiner_point(*n, p[0], p[1], deriv),
            BasisFamily::Spline1d(sp) => {
                let r = p[0];
                match deriv {
                    None => sp.eval_all(r),
                    Some(_) => sp.eval_all_deriv(r),
                }
            }
            BasisFamily::TensorSpline(sp) => {
                let (r, sx) = (p[0], p[1]);
                let (fr, fs) = match deriv {
                    None => (sp.eval_all(r), sp.eval_all(sx)),
                    Some(0) => (sp.eval_all_deriv(r), sp.eval_all(sx)),
                    Some(_) => (sp.eval_all(r), sp.eval_all_deriv(sx)),
                };
                let nb = sp.num_basis();
                let mut out = Vec::with_capacity(nb * nb);
                for i in 0..nb {
                    for j in 0..nb {
                        out.push(fr[i] * fs[j]);
                    }
                }
                out
            }
        }
    }
}

/// Koornwinder-Dubiner value or derivative at a single triangle point.
fn dubiner_point(n: usize, r: f64, s: f64, deriv: Option<usize>) -> Vec<f64> {
    let [a, b] = triangle_to_collapsed(r, s);
    let sqrt2 = std::f64::consts::SQRT_2;
    let pa = jacobi_seq(a, 0, 0, n);
    let da: Vec<f64> = (0..=n).map(|k| jacobi_deriv(a, 0, 0, k)).collect();
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        let alpha = 2 * i + 1;
        let pb = jacobi_seq(b, alpha, 0, n - i);
        let db: Vec<f64> = (0..=(n - i)).map(|k| jacobi_deriv(b, alpha, 0, k)).collect();
        let pow_i = (1.0 - b).powi(i as i32);
        let pow_im1 = if i >= 1 { (1.0 - b).powi(i as i32 - 1) } else { 0.0 };
        for j in 0..=(n - i) {
            let val = match deriv {
                None => sqrt2 * pa[i] * pb[j] * pow_i,
                Some(0) => 2.0 * sqrt2 * da[i] * pb[j] * pow_im1,
                Some(_) => {
                    sqrt2
                        * ((da[i] * (1.0 + a) - i as f64 * pa[i]) * pb[j] * pow_im1
                            + pa[i] * db[j] * pow_i)
                }
            };
            out.push(val);
        }
    }
    out
}

/// Dense or Kronecker-factored volume operators.
#[derive(Debug, Clone)]
pub enum VolumeOps {
    Dense {
        vq: Array2<f64>,
        vq_d: Vec<Array2<f64>>,
        pq: Array2<f64>,
    },
    /// One-dimensional factors; 2D application is `A x B^T` on reshaped data.
    Tensor {
        v1: Array2<f64>,
        vd1: Array2<f64>,
        p1: Array2<f64>,
        minv1: Array2<f64>,
    },
}

/// Surface quadrature and trace interpolation for one reference face.
#[derive(Debug, Clone)]
pub struct RefFace {
    /// Face quadrature points in element reference coordinates, `nfq x dim`.
    pub points: Array2<f64>,
    /// Quadrature weights on the parameterized face (sum to 2; a single 1.0
    /// for segment endpoints).
    pub weights: Array1<f64>,
    /// Trace interpolation, `nfq x np`.
    pub vf: Array2<f64>,
    /// Outward unit normal of the reference element.
    pub normal: [f64; 2],
}

/// Degree-N approximation space on a reference element with all discrete
/// operators used by the solvers.
#[derive(Debug, Clone)]
pub struct RefElement {
    pub kind: ElementKind,
    pub degree: usize,
    pub np: usize,
    pub nq: usize,
    /// Volume quadrature points, `nq x dim`.
    pub rq: Array2<f64>,
    pub wq: Array1<f64>,
    /// Reference mass matrix `Vq^T diag(w) Vq`.
    pub mass: Array2<f64>,
    mass_inv: Array2<f64>,
    mass_is_identity: bool,
    pub ops: VolumeOps,
    pub faces: Vec<RefFace>,
    /// All face interpolation matrices stacked row-wise.
    pub vf_all: Array2<f64>,
    /// Row offset of each face inside `vf_all` (length `num_faces + 1`).
    pub face_offsets: Vec<usize>,
    /// Unisolvent geometry nodes (`np x dim`); edge nodes are shared with
    /// neighbouring elements so interpolated fields have single-valued traces.
    pub geo_nodes: Array2<f64>,
    geo_interp: GeoInterp,
    pub basis: BasisFamily,
    /// Sub-element count for spline spaces (1 for polynomials).
    pub subcells: usize,
    dense_vq: OnceLock<Array2<f64>>,
}

#[derive(Debug, Clone)]
enum GeoInterp {
    Dense(Array2<f64>),
    Tensor(Array2<f64>),
}

fn invert(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let inv = dm
        .lu()
        .try_inverse()
        .expect("interpolation matrix is singular");
    Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)])
}

fn check_degree(n: usize) -> Result<()> {
    if (1..=8).contains(&n) {
        Ok(())
    } else {
        Err(Error::DegreeOutOfRange(n))
    }
}

/// Gauss-Legendre points along the face from vertex `a` to vertex `b`.
fn face_rule(a: [f64; 2], b: [f64; 2], npts: usize) -> (Array2<f64>, Array1<f64>) {
    let (t, w) = gauss_legendre(npts);
    let mut pts = Array2::zeros((npts, 2));
    for (k, &tk) in t.iter().enumerate() {
        let lam = 0.5 * (tk + 1.0);
        pts[(k, 0)] = a[0] + lam * (b[0] - a[0]);
        pts[(k, 1)] = a[1] + lam * (b[1] - a[1]);
    }
    (pts, Array1::from(w))
}

impl RefElement {
    /// Assemble a reference element from a basis, quadrature and geometry
    /// nodes. Shared by the polynomial and spline constructors.
    pub(crate) fn assemble(
        kind: ElementKind,
        degree: usize,
        basis: BasisFamily,
        rq: Array2<f64>,
        wq: Array1<f64>,
        face_pts_per_cell: usize,
        geo_nodes: Array2<f64>,
        subcells: usize,
    ) -> Self {
        let np = basis.np();
        let nq = rq.nrows();
        let dim = kind.dim();

        // Tensor spline spaces get Kronecker-factored operators; everything
        // else is dense.
        let (ops, mass, mass_inv) = if let BasisFamily::TensorSpline(sp) = &basis {
            let (v1, vd1, p1, minv1, m1) = sp.operators_1d_full();
            let kron = |a: &Array2<f64>, b: &Array2<f64>| {
                let n1 = a.nrows();
                Array2::from_shape_fn((n1 * n1, n1 * n1), |(r, c)| {
                    a[(r / n1, c / n1)] * b[(r % n1, c % n1)]
                })
            };
            let mass = kron(&m1, &m1);
            let mass_inv = kron(&minv1, &minv1);
            (VolumeOps::Tensor { v1, vd1, p1, minv1 }, mass, mass_inv)
        } else {
            let vq = basis.values(&rq.view());
            let vq_d: Vec<Array2<f64>> =
                (0..dim).map(|d| basis.derivs(d, &rq.view())).collect();
            let wvq = &vq * &wq.view().insert_axis(ndarray::Axis(1));
            let mass = vq.t().dot(&wvq);
            let mass_inv = invert(&mass);
            let pq = mass_inv.dot(&wvq.t());
            (VolumeOps::Dense { vq, vq_d, pq }, mass, mass_inv)
        };
        let mass_is_identity = {
            let mut dev: f64 = 0.0;
            for i in 0..np {
                for j in 0..np {
                    let target = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((mass[(i, j)] - target).abs());
                }
            }
            dev < 1e-12
        };

        // Faces: per sub-cell Gauss so spline traces integrate exactly.
        let verts = kind.vertices();
        let mut faces = Vec::new();
        for (fv, normal) in kind.face_vertices() {
            if kind == ElementKind::Segment {
                let r = verts[fv[0]][0];
                let points = Array2::from_shape_vec((1, 1), vec![r]).unwrap();
                let vf = basis.values(&points.view());
                faces.push(RefFace {
                    points,
                    weights: Array1::from(vec![1.0]),
                    vf,
                    normal,
                });
                continue;
            }
            let (a, b) = (verts[fv[0]], verts[fv[1]]);
            let mut pts = Array2::zeros((subcells * face_pts_per_cell, 2));
            let mut wts = Array1::zeros(subcells * face_pts_per_cell);
            for c in 0..subcells {
                let lam0 = c as f64 / subcells as f64;
                let lam1 = (c + 1) as f64 / subcells as f64;
                let a_c = [
                    a[0] + lam0 * (b[0] - a[0]),
                    a[1] + lam0 * (b[1] - a[1]),
                ];
                let b_c = [
                    a[0] + lam1 * (b[0] - a[0]),
                    a[1] + lam1 * (b[1] - a[1]),
                ];
                let (p, w) = face_rule(a_c, b_c, face_pts_per_cell);
                pts.slice_mut(s![c * face_pts_per_cell..(c + 1) * face_pts_per_cell, ..])
                    .assign(&p);
                for (k, &wk) in w.iter().enumerate() {
                    wts[c * face_pts_per_cell + k] = wk / subcells as f64;
                }
            }
            let vf = basis.values(&pts.view());
            faces.push(RefFace {
                points: pts,
                weights: wts,
                vf,
                normal,
            });
        }

        let nfq_total: usize = faces.iter().map(|f| f.vf.nrows()).sum();
        let mut vf_all = Array2::zeros((nfq_total, np));
        let mut face_offsets = vec![0usize];
        let mut row = 0;
        for f in &faces {
            let nf = f.vf.nrows();
            vf_all.slice_mut(s![row..row + nf, ..]).assign(&f.vf);
            row += nf;
            face_offsets.push(row);
        }

        let geo_interp = match &basis {
            BasisFamily::TensorSpline(sp) => {
                let g1 = sp.greville();
                let pts1 = Array2::from_shape_fn((g1.len(), 1), |(i, _)| g1[i]);
                let v1 = BasisFamily::Spline1d(sp.clone()).values(&pts1.view());
                GeoInterp::Tensor(invert(&v1))
            }
            BasisFamily::TensorLegendre { n } => {
                let g1 = gauss_lobatto_nodes(n + 1);
                let pts1 = Array2::from_shape_fn((g1.len(), 1), |(i, _)| g1[i]);
                let v1 = BasisFamily::Legendre { n: *n }.values(&pts1.view());
                GeoInterp::Tensor(invert(&v1))
            }
            _ => GeoInterp::Dense(invert(&basis.values(&geo_nodes.view()))),
        };

        RefElement {
            kind,
            degree,
            np,
            nq,
            rq,
            wq,
            mass,
            mass_inv,
            mass_is_identity,
            ops,
            faces,
            vf_all,
            face_offsets,
            geo_nodes,
            geo_interp,
            basis,
            subcells,
            dense_vq: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Total number of face quadrature points over all faces.
    pub fn nfq_total(&self) -> usize {
        self.vf_all.nrows()
    }

    /// Interpolation matrix `Vq` (materialized on demand for tensor spaces).
    pub fn vq(&self) -> &Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { vq, .. } => vq,
            VolumeOps::Tensor { .. } => self
                .dense_vq
                .get_or_init(|| self.basis.values(&self.rq.view())),
        }
    }

    fn tensor_sizes(&self) -> (usize, usize) {
        // (1D quad points, 1D basis count)
        match &self.ops {
            VolumeOps::Tensor { v1, .. } => (v1.nrows(), v1.ncols()),
            _ => unreachable!(),
        }
    }

    fn tensor_block(a: &Array2<f64>, b: &Array2<f64>, x: &ArrayView2<f64>) -> Array2<f64> {
        // Apply (A ⊗ B) to each column of x, row-major index c = i*n + j.
        let (ma, na) = (a.nrows(), a.ncols());
        let (mb, nb) = (b.nrows(), b.ncols());
        let cols = x.ncols();
        let mut out = Array2::zeros((ma * mb, cols));
        for c in 0..cols {
            let xm = x
                .column(c)
                .to_shape((na, nb))
                .expect("tensor block shape mismatch")
                .to_owned();
            let y = a.dot(&xm).dot(&b.t());
            out.column_mut(c)
                .assign(&y.into_shape_with_order(ma * mb).unwrap());
        }
        out
    }

    /// Values at volume quadrature points for a block of elements (`np x K`).
    pub fn interp_block(&self, coeffs: &ArrayView2<f64>) -> Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { vq, .. } => vq.dot(coeffs),
            VolumeOps::Tensor { v1, .. } => Self::tensor_block(v1, v1, coeffs),
        }
    }

    /// Reference-direction derivative values at quadrature points.
    pub fn interp_deriv_block(&self, dir: usize, coeffs: &ArrayView2<f64>) -> Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { vq_d, .. } => vq_d[dir].dot(coeffs),
            VolumeOps::Tensor { v1, vd1, .. } => {
                if dir == 0 {
                    Self::tensor_block(vd1, v1, coeffs)
                } else {
                    Self::tensor_block(v1, vd1, coeffs)
                }
            }
        }
    }

    /// Discrete L2 projection of quadrature-point values (`nq x K -> np x K`).
    pub fn project_block(&self, values: &ArrayView2<f64>) -> Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { pq, .. } => pq.dot(values),
            VolumeOps::Tensor { p1, .. } => Self::tensor_block(p1, p1, values),
        }
    }

    /// `Vq^T x` accumulation (quadrature values pre-multiplied by weights).
    pub fn interp_t_block(&self, values: &ArrayView2<f64>) -> Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { vq, .. } => vq.t().dot(values),
            VolumeOps::Tensor { v1, .. } => {
                let vt = v1.t().to_owned();
                Self::tensor_block(&vt, &vt, values)
            }
        }
    }

    /// `(dVq/d r_dir)^T x` accumulation.
    pub fn deriv_t_block(&self, dir: usize, values: &ArrayView2<f64>) -> Array2<f64> {
        match &self.ops {
            VolumeOps::Dense { vq_d, .. } => vq_d[dir].t().dot(values),
            VolumeOps::Tensor { v1, vd1, .. } => {
                let vt = v1.t().to_owned();
                let vdt = vd1.t().to_owned();
                if dir == 0 {
                    Self::tensor_block(&vdt, &vt, values)
                } else {
                    Self::tensor_block(&vt, &vdt, values)
                }
            }
        }
    }

    /// Trace values at all face quadrature points (`nfq_total x K`).
    pub fn face_interp_block(&self, coeffs: &ArrayView2<f64>) -> Array2<f64> {
        self.vf_all.dot(coeffs)
    }

    /// `Vf_all^T x` accumulation of face contributions.
    pub fn face_interp_t_block(&self, values: &ArrayView2<f64>) -> Array2<f64> {
        self.vf_all.t().dot(values)
    }

    /// Solve `M x = b` columnwise (identity shortcut for orthonormal bases).
    pub fn mass_solve_block(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        if self.mass_is_identity {
            return rhs.to_owned();
        }
        match &self.ops {
            VolumeOps::Tensor { minv1, .. } => Self::tensor_block(minv1, minv1, rhs),
            VolumeOps::Dense { .. } => self.mass_inv.dot(rhs),
        }
    }

    /// Apply the reference mass matrix columnwise.
    pub fn mass_apply_block(&self, coeffs: &ArrayView2<f64>) -> Array2<f64> {
        if self.mass_is_identity {
            return coeffs.to_owned();
        }
        self.mass.dot(coeffs)
    }

    /// Interpolate analytic samples at the geometry nodes into coefficients.
    pub fn geo_coeffs_block(&self, node_values: &ArrayView2<f64>) -> Array2<f64> {
        match &self.geo_interp {
            GeoInterp::Dense(inv) => inv.dot(node_values),
            GeoInterp::Tensor(inv1) => Self::tensor_block(inv1, inv1, node_values),
        }
    }

    /// Discrete L2 projection of samples at the volume quadrature points.
    ///
    /// Projecting samples of any function already in the space reproduces its
    /// coefficients (up to roundoff).
    pub fn project(&self, values_at_quad: &[f64]) -> Result<Vec<f64>> {
        if values_at_quad.len() != self.nq {
            return Err(Error::LengthMismatch {
                expected: self.nq,
                got: values_at_quad.len(),
            });
        }
        let v = Array2::from_shape_vec((self.nq, 1), values_at_quad.to_vec()).unwrap();
        Ok(self.project_block(&v.view()).column(0).to_vec())
    }

    /// Exact modal differentiation for polynomial spaces (for splines this is
    /// the L2 projection of the derivative, which leaves the spline space).
    pub fn differentiate(&self, coeffs: &[f64]) -> Result<Vec<Vec<f64>>> {
        if coeffs.len() != self.np {
            return Err(Error::LengthMismatch {
                expected: self.np,
                got: coeffs.len(),
            });
        }
        let c = Array2::from_shape_vec((self.np, 1), coeffs.to_vec()).unwrap();
        Ok((0..self.dim())
            .map(|d| {
                let dv = self.interp_deriv_block(d, &c.view());
                self.project_block(&dv.view()).column(0).to_vec()
            })
            .collect())
    }

    /// Modal differentiation matrices `D_r` (and `D_s` in 2D).
    pub fn diff_matrices(&self) -> Vec<Array2<f64>> {
        let eye = Array2::eye(self.np);
        (0..self.dim())
            .map(|d| {
                let dv = self.interp_deriv_block(d, &eye.view());
                self.project_block(&dv.view())
            })
            .collect()
    }

    /// Condition-number estimate of the mass matrix (ratio of extreme
    /// eigenvalues), logged by the operator validation suite.
    pub fn mass_condition(&self) -> f64 {
        let n = self.np;
        let m = DMatrix::from_fn(n, n, |i, j| self.mass[(i, j)]);
        let eig = m.symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &e in eig.eigenvalues.iter() {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        hi / lo
    }

    fn validate_quadrature(&self) -> Result<()> {
        let expect: f64 = match self.kind {
            ElementKind::Segment => 2.0,
            ElementKind::Triangle => 2.0,
            ElementKind::Quad => 4.0,
        };
        let total: f64 = self.wq.sum();
        if (total - expect).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "quadrature weights sum to {total}, expected {expect}"
            )));
        }
        if self.kind == ElementKind::Triangle {
            // Spot-check exactness at the contract degree 2N+1.
            let d = 2 * self.degree + 1;
            let quad: f64 = self
                .rq
                .outer_iter()
                .zip(self.wq.iter())
                .map(|(p, w)| w * p[0].powi(d as i32))
                .sum();
            let exact = crate::quadrature::triangle_monomial_integral(d, 0);
            if (quad - exact).abs() > 1e-10 {
                return Err(Error::InvalidConfig(format!(
                    "triangle quadrature not exact at degree {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Degree-N orthonormal Legendre space on the reference segment [-1,1].
pub fn build_reference_segment(n: usize) -> Result<RefElement> {
    check_degree(n)?;
    let (x, w) = gauss_legendre(n + 1);
    let rq = Array2::from_shape_fn((n + 1, 1), |(i, _)| x[i]);
    let geo = gauss_lobatto_nodes(n + 1);
    let geo_nodes = Array2::from_shape_fn((n + 1, 1), |(i, _)| geo[i]);
    let elem = RefElement::assemble(
        ElementKind::Segment,
        n,
        BasisFamily::Legendre { n },
        rq,
        Array1::from(w),
        n + 1,
        geo_nodes,
        1,
    );
    elem.validate_quadrature()?;
    Ok(elem)
}

/// Degree-N Koornwinder-Dubiner space on the bi-unit right triangle.
///
/// The volume rule integrates total degree `2N+1` exactly; geometry nodes are
/// the equidistant lattice so each edge carries `N+1` nodes shared with the
/// neighbouring element.
pub fn build_reference_triangle(n: usize) -> Result<RefElement> {
    check_degree(n)?;
    let (pts, w) = triangle_quadrature(n + 1);
    let nq = pts.len();
    let rq = Array2::from_shape_fn((nq, 2), |(i, d)| pts[i][d]);
    let np = (n + 1) * (n + 2) / 2;
    let mut geo = Array2::zeros((np, 2));
    let mut row = 0;
    for i in 0..=n {
        for j in 0..=(n - i) {
            geo[(row, 0)] = -1.0 + 2.0 * i as f64 / n as f64;
            geo[(row, 1)] = -1.0 + 2.0 * j as f64 / n as f64;
            row += 1;
        }
    }
    let elem = RefElement::assemble(
        ElementKind::Triangle,
        n,
        BasisFamily::Dubiner { n },
        rq,
        Array1::from(w),
        n + 1,
        geo,
        1,
    );
    elem.validate_quadrature()?;
    Ok(elem)
}

/// Degree-N tensor Legendre space on the bi-unit square.
pub fn build_reference_quad(n: usize) -> Result<RefElement> {
    check_degree(n)?;
    let (x, w) = gauss_legendre(n + 1);
    let m = n + 1;
    let mut rq = Array2::zeros((m * m, 2));
    let mut wq = Array1::zeros(m * m);
    for i in 0..m {
        for j in 0..m {
            rq[(i * m + j, 0)] = x[i];
            rq[(i * m + j, 1)] = x[j];
            wq[i * m + j] = w[i] * w[j];
        }
    }
    let gl = gauss_lobatto_nodes(m);
    let mut geo = Array2::zeros((m * m, 2));
    for i in 0..m {
        for j in 0..m {
            geo[(i * m + j, 0)] = gl[i];
            geo[(i * m + j, 1)] = gl[j];
        }
    }
    let elem = RefElement::assemble(
        ElementKind::Quad,
        n,
        BasisFamily::TensorLegendre { n },
        rq,
        wq,
        n + 1,
        geo,
        1,
    );
    elem.validate_quadrature()?;
    Ok(elem)
}

/// Dump the discrete operators as plain CSV (row-major, 17 significant
/// digits) for cross-implementation diffing.
pub fn write_operator_dump(elem: &RefElement, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, m: &Array2<f64>| -> Result<()> {
        let mut out = String::new();
        for row in m.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        std::fs::write(dir.join(name), out)?;
        Ok(())
    };
    write("rq.csv", &elem.rq)?;
    write(
        "wq.csv",
        &Array2::from_shape_fn((elem.nq, 1), |(i, _)| elem.wq[i]),
    )?;
    write("vq.csv", elem.vq())?;
    let eye = Array2::eye(elem.np);
    write("pq.csv", &elem.project_block(&elem.interp_block(&eye.view()).view()))?;
    write("mass.csv", &elem.mass)?;
    for (d, m) in elem.diff_matrices().iter().enumerate() {
        write(if d == 0 { "dr.csv" } else { "ds.csv" }, m)?;
    }
    write("vf_all.csv", &elem.vf_all)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    #[test]
    fn counts_match_dimension_formulas() {
        assert_eq!(build_reference_triangle(1).unwrap().np, 3);
        assert_eq!(build_reference_triangle(4).unwrap().np, 15);
        assert_eq!(build_reference_quad(2).unwrap().np, 9);
        assert_eq!(build_reference_segment(3).unwrap().np, 4);
        assert!(matches!(
            build_reference_triangle(0),
            Err(Error::DegreeOutOfRange(0))
        ));
        assert!(matches!(
            build_reference_quad(9),
            Err(Error::DegreeOutOfRange(9))
        ));
    }

    #[test]
    fn triangle_quadrature_moments() {
        let elem = build_reference_triangle(3).unwrap();
        let total: f64 = elem.wq.sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
        let mr: f64 = elem
            .rq
            .outer_iter()
            .zip(elem.wq.iter())
            .map(|(p, w)| w * p[0])
            .sum();
        assert_abs_diff_eq!(mr, -2.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn quad_rule_integrates_x2y2_at_degree_one() {
        let elem = build_reference_quad(1).unwrap();
        let q: f64 = elem
            .rq
            .outer_iter()
            .zip(elem.wq.iter())
            .map(|(p, w)| w * p[0] * p[0] * p[1] * p[1])
            .sum();
        assert_abs_diff_eq!(q, 4.0 / 9.0, epsilon = 1e-13);
        assert_abs_diff_eq!(elem.wq.sum(), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn mass_is_identity_for_orthonormal_bases() {
        for elem in [
            build_reference_segment(5).unwrap(),
            build_reference_triangle(4).unwrap(),
            build_reference_quad(3).unwrap(),
        ] {
            for i in 0..elem.np {
                for j in 0..elem.np {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(elem.mass[(i, j)], e, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_reproduces_space() {
        let elem = build_reference_triangle(4).unwrap();
        // samples of r*s are degree 2 <= N, so projection is exact
        let vals: Vec<f64> = elem.rq.outer_iter().map(|p| p[0] * p[1]).collect();
        let coeffs = elem.project(&vals).unwrap();
        let c = Array2::from_shape_vec((elem.np, 1), coeffs).unwrap();
        let back = elem.interp_block(&c.view());
        for (k, p) in elem.rq.outer_iter().enumerate() {
            assert_abs_diff_eq!(back[(k, 0)], p[0] * p[1], epsilon = 1e-12);
        }
        assert!(matches!(
            elem.project(&vals[..3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pq_vq_is_identity() {
        for elem in [
            build_reference_triangle(4).unwrap(),
            build_reference_quad(4).unwrap(),
        ] {
            let eye = Array2::eye(elem.np);
            let pv = elem.project_block(&elem.interp_block(&eye.view()).view());
            for i in 0..elem.np {
                for j in 0..elem.np {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(pv[(i, j)], e, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn differentiation_exact_for_polynomials() {
        let elem = build_reference_triangle(3).unwrap();
        // coefficients of r^2 via projection
        let vals: Vec<f64> = elem.rq.outer_iter().map(|p| p[0] * p[0]).collect();
        let coeffs = elem.project(&vals).unwrap();
        let d = elem.differentiate(&coeffs).unwrap();
        let dc = Array2::from_shape_vec((elem.np, 1), d[0].clone()).unwrap();
        let dr = elem.interp_block(&dc.view());
        for (k, p) in elem.rq.outer_iter().enumerate() {
            assert_abs_diff_eq!(dr[(k, 0)], 2.0 * p[0], epsilon = 1e-13);
        }
        let ds = Array2::from_shape_vec((elem.np, 1), d[1].clone()).unwrap();
        let dsv = elem.interp_block(&ds.view());
        for k in 0..elem.nq {
            assert_abs_diff_eq!(dsv[(k, 0)], 0.0, epsilon = 1e-13);
        }

        // constants differentiate to zero
        let ones: Vec<f64> = vec![1.0; elem.nq];
        let c1 = elem.project(&ones).unwrap();
        let d1 = elem.differentiate(&c1).unwrap();
        for dir in d1 {
            for v in dir {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn face_rules_integrate_high_degree() {
        // each face rule must integrate univariate degree 2N+1 exactly
        let n = 4;
        let elem = build_reference_triangle(n).unwrap();
        for face in &elem.faces {
            // parameterize by arc length; integrate t^(2N+1) over the face
            // against the exact value computed from endpoints
            let d = (2 * n + 1) as i32;
            let quad: f64 = face
                .points
                .outer_iter()
                .zip(face.weights.iter())
                .map(|(p, w)| {
                    let t = 0.5 * (p[0] - p[1]); // linear function on the face
                    w * t.powi(d)
                })
                .sum();
            // exact: parameterize lam in [0,1], t is affine in lam
            let a = [face.points[(0, 0)], face.points[(0, 1)]];
            let _ = a;
            let verts = elem.kind.face_vertices();
            let vs = elem.kind.vertices();
            let (v0, v1) = {
                let idx = verts
                    .iter()
                    .position(|(_, nrm)| *nrm == face.normal)
                    .unwrap();
                (vs[verts[idx].0[0]], vs[verts[idx].0[1]])
            };
            let t0 = 0.5 * (v0[0] - v0[1]);
            let t1 = 0.5 * (v1[0] - v1[1]);
            // ∫_{-1}^{1} ((t0+t1)/2 + u (t1-t0)/2)^d du
            let exact = {
                let n_sub = 2000;
                let mut acc = 0.0;
                for k in 0..n_sub {
                    let u = -1.0 + 2.0 * (k as f64 + 0.5) / n_sub as f64;
                    let t = 0.5 * (t0 + t1) + 0.5 * u * (t1 - t0);
                    acc += t.powi(d) * 2.0 / n_sub as f64;
                }
                acc
            };
            assert_abs_diff_eq!(quad, exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn random_polynomial_inner_products_match_monomial_oracle() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 3;
        let elem = build_reference_triangle(n).unwrap();
        // random polynomials as monomial combinations of total degree <= N
        let monos: Vec<(usize, usize)> = (0..=n)
            .flat_map(|i| (0..=(n - i)).map(move |j| (i, j)))
            .collect();
        for _ in 0..5 {
            let c1: Vec<f64> = monos.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let c2: Vec<f64> = monos.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let quad: f64 = elem
                .rq
                .outer_iter()
                .zip(elem.wq.iter())
                .map(|(p, w)| {
                    let f: f64 = monos
                        .iter()
                        .zip(&c1)
                        .map(|((i, j), c)| c * p[0].powi(*i as i32) * p[1].powi(*j as i32))
                        .sum();
                    let g: f64 = monos
                        .iter()
                        .zip(&c2)
                        .map(|((i, j), c)| c * p[0].powi(*i as i32) * p[1].powi(*j as i32))
                        .sum();
                    w * f * g
                })
                .sum();
            let mut exact = 0.0;
            for ((i1, j1), a) in monos.iter().zip(&c1) {
                for ((i2, j2), b) in monos.iter().zip(&c2) {
                    exact +=
                        a * b * crate::quadrature::triangle_monomial_integral(i1 + i2, j1 + j2);
                }
            }
            assert_abs_diff_eq!(quad, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn sine_projection_close_to_dense_least_squares() {
        // N = 4 projection of sin(pi r) compared against a normal-equations
        // fit on a much finer quadrature
        let elem = build_reference_segment(4).unwrap();
        let vals: Vec<f64> = elem
            .rq
            .outer_iter()
            .map(|p| (std::f64::consts::PI * p[0]).sin())
            .collect();
        let coeffs = elem.project(&vals).unwrap();

        let (xf, wf) = gauss_legendre(40);
        let basis = BasisFamily::Legendre { n: 4 };
        let ptsf = Array2::from_shape_fn((40, 1), |(i, _)| xf[i]);
        let vf = basis.values(&ptsf.view());
        // normal equations: (V^T W V) c = V^T W f  (V^T W V = I here)
        let mut oracle = vec![0.0; 5];
        for (k, &x) in xf.iter().enumerate() {
            let f = (std::f64::consts::PI * x).sin();
            for j in 0..5 {
                oracle[j] += wf[k] * vf[(k, j)] * f;
            }
        }
        // The coarse-quadrature projection cannot beat the dense fit, but its
        // approximation error must stay within a small factor of it.
        let err = |c: &[f64]| -> f64 {
            let mut e: f64 = 0.0;
            for k in 0..=200 {
                let x = -1.0 + 0.01 * k as f64;
                let v: f64 = (0..5)
                    .map(|j| c[j] * crate::quadrature::jacobi(x, 0, 0, j))
                    .sum();
                e = e.max((v - (std::f64::consts::PI * x).sin()).abs());
            }
            e
        };
        let e_proj = err(&coeffs);
        let e_fit = err(&oracle);
        assert!(
            e_proj <= 2.0 * e_fit + 1e-12,
            "projection error {e_proj} vs dense fit {e_fit}"
        );
    }

    #[test]
    fn mass_condition_is_finite() {
        let elem = build_reference_triangle(8).unwrap();
        let cond = elem.mass_condition();
        assert!(cond.is_finite() && cond < 10.0, "cond = {cond}");
    }
}
