//! Open-knot B-spline spaces with Cox-de Boor evaluation and tensor-product
//! operator application.
//!
//! A degree-N space with H sub-elements uses the open knot vector on [-1,1]
//! with the end knots repeated N+1 times and H-1 uniform interior knots, for
//! `N + H` basis functions. With `H = 1` the basis reduces to the degree-N
//! Bernstein polynomials. Quadrature is per-knot-interval Gauss, so products
//! of two splines integrate exactly.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::ref_element::{BasisFamily, ElementKind, RefElement};

/// Degree-N B-spline space on an open uniform knot vector over [-1,1].
#[derive(Debug, Clone)]
pub struct SplineSpace {
    pub degree: usize,
    pub subcells: usize,
    pub knots: Vec<f64>,
}

impl SplineSpace {
    /// Open uniform knot vector: end knots repeated `degree + 1` times,
    /// `subcells - 1` uniform interior knots.
    pub fn new(degree: usize, subcells: usize) -> Self {
        assert!(subcells >= 1, "need at least one sub-element");
        let mut knots = vec![-1.0; degree + 1];
        for c in 1..subcells {
            knots.push(-1.0 + 2.0 * c as f64 / subcells as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        debug_assert_eq!(knots.len(), 2 * degree + subcells + 1);
        SplineSpace {
            degree,
            subcells,
            knots,
        }
    }

    /// Number of basis functions, `N + H`.
    pub fn num_basis(&self) -> usize {
        self.degree + self.subcells
    }

    /// Sub-element size `h_sub / H` for an element of size `h_sub`.
    pub fn subcell_size(&self, h_sub: f64) -> f64 {
        h_sub / self.subcells as f64
    }

    /// Values of all degree-N basis functions at `x`.
    ///
    /// Right-continuous at interior knots; `x = 1` evaluates in the last
    /// nonempty interval so the final basis function is 1 there.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        self.eval_degree_row(x, self.degree)
    }

    /// Derivatives of all degree-N basis functions at `x`.
    pub fn eval_all_deriv(&self, x: f64) -> Vec<f64> {
        let n = self.degree;
        let nb = self.num_basis();
        if n == 0 {
            return vec![0.0; nb];
        }
        let lower = self.eval_degree_row(x, n - 1);
        let mut out = vec![0.0; nb];
        for i in 0..nb {
            let d1 = self.knots[i + n] - self.knots[i];
            let d2 = self.knots[i + n + 1] - self.knots[i + 1];
            let t1 = if d1 > 0.0 { lower[i] / d1 } else { 0.0 };
            let t2 = if d2 > 0.0 { lower[i + 1] / d2 } else { 0.0 };
            out[i] = n as f64 * (t1 - t2);
        }
        out
    }

    /// Cox-de Boor table up to degree `k`, returning the degree-`k` row.
    fn eval_degree_row(&self, x: f64, k: usize) -> Vec<f64> {
        let nknots = self.knots.len();
        let top = *self.knots.last().unwrap();
        let mut b: Vec<f64> = (0..nknots - 1)
            .map(|i| {
                let (lo, hi) = (self.knots[i], self.knots[i + 1]);
                let inside = (x >= lo && x < hi) || (x == top && hi == top && lo < top);
                if inside {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for deg in 1..=k {
            let count = nknots - deg - 1;
            for i in 0..count {
                let d1 = self.knots[i + deg] - self.knots[i];
                let d2 = self.knots[i + deg + 1] - self.knots[i + 1];
                let r1 = if d1 > 0.0 {
                    (x - self.knots[i]) / d1
                } else {
                    0.0
                };
                let r2 = if d2 > 0.0 {
                    (self.knots[i + deg + 1] - x) / d2
                } else {
                    0.0
                };
                b[i] = r1 * b[i] + r2 * b[i + 1];
            }
            b.truncate(count);
        }
        b.truncate(nknots - k - 1);
        b
    }

    /// Greville abscissae (knot averages); include ±1 and are unisolvent for
    /// interpolation in the space.
    pub fn greville(&self) -> Vec<f64> {
        let n = self.degree.max(1);
        (0..self.num_basis())
            .map(|i| {
                let sum: f64 = self.knots[i + 1..=i + n].iter().sum();
                sum / n as f64
            })
            .collect()
    }

    /// Per-sub-element Gauss quadrature exact for products of two splines.
    pub fn quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        let npc = self.degree + 1;
        let (t, w) = gauss_legendre(npc);
        let hcell = 2.0 / self.subcells as f64;
        let mut pts = Vec::with_capacity(npc * self.subcells);
        let mut wts = Vec::with_capacity(npc * self.subcells);
        for c in 0..self.subcells {
            let lo = -1.0 + c as f64 * hcell;
            for (tk, wk) in t.iter().zip(&w) {
                pts.push(lo + 0.5 * (tk + 1.0) * hcell);
                wts.push(wk * hcell / 2.0);
            }
        }
        (pts, wts)
    }

    /// One-dimensional discrete operators `(Vq, dVq, Pq, M^{-1}, M)`.
    pub fn operators_1d(&self) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let (v1, vd1, p1, minv1, _m1) = self.operators_1d_full();
        (v1, vd1, p1, minv1)
    }

    pub(crate) fn operators_1d_full(
        &self,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let (pts, wts) = self.quadrature();
        let nq = pts.len();
        let nb = self.num_basis();
        let mut v1 = Array2::zeros((nq, nb));
        let mut vd1 = Array2::zeros((nq, nb));
        for (k, &x) in pts.iter().enumerate() {
            let vals = self.eval_all(x);
            let ders = self.eval_all_deriv(x);
            for j in 0..nb {
                v1[(k, j)] = vals[j];
                vd1[(k, j)] = ders[j];
            }
        }
        let w = Array1::from(wts);
        let wv = &v1 * &w.view().insert_axis(ndarray::Axis(1));
        let m1 = v1.t().dot(&wv);
        let minv1 = {
            let n = nb;
            let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m1[(i, j)]);
            let inv = dm
                .cholesky()
                .expect("spline mass matrix is SPD")
                .inverse();
            Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)])
        };
        let p1 = minv1.dot(&wv.t());
        (v1, vd1, p1, minv1, m1)
    }

    /// The degree-(N-1) spline space on the same breakpoints that contains
    /// derivatives of this space.
    pub fn derivative_space(&self) -> SplineSpace {
        assert!(self.degree >= 1);
        SplineSpace {
            degree: self.degree - 1,
            subcells: self.subcells,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
        }
    }
}

/// Value of the 1-based `i`-th degree-N basis function at `x`.
pub fn eval_bspline(space: &SplineSpace, i: usize, x: f64) -> Result<f64> {
    if i == 0 || i > space.num_basis() {
        return Err(Error::IndexOutOfRange(i, space.num_basis()));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::PointOutOfRange(x));
    }
    Ok(space.eval_all(x)[i - 1])
}

/// Apply `A ⊗ B` to a row-major-indexed coefficient vector without forming
/// the Kronecker product.
pub fn tensor_apply(
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    coeffs: &[f64],
) -> Result<Vec<f64>> {
    let (ma, na) = (a.nrows(), a.ncols());
    let (mb, nb) = (b.nrows(), b.ncols());
    if coeffs.len() != na * nb {
        return Err(Error::LengthMismatch {
            expected: na * nb,
            got: coeffs.len(),
        });
    }
    let x = Array2::from_shape_vec((na, nb), coeffs.to_vec()).unwrap();
    let y = a.dot(&x).dot(&b.t());
    let _ = (ma, mb);
    Ok(y.into_shape_with_order(ma * mb).unwrap().to_vec())
}

/// Degree-N spline space with H sub-elements on the reference segment.
pub fn build_spline_segment(n: usize, h: usize) -> Result<RefElement> {
    if n == 0 || n > 8 {
        return Err(Error::DegreeOutOfRange(n));
    }
    let sp = SplineSpace::new(n, h);
    let (pts, wts) = sp.quadrature();
    let rq = Array2::from_shape_fn((pts.len(), 1), |(i, _)| pts[i]);
    let g = sp.greville();
    let geo = Array2::from_shape_fn((g.len(), 1), |(i, _)| g[i]);
    Ok(RefElement::assemble(
        ElementKind::Segment,
        n,
        BasisFamily::Spline1d(sp),
        rq,
        Array1::from(wts),
        n + 1,
        geo,
        h,
    ))
}

/// Tensor-product spline space on the reference square; volume operators are
/// applied in Kronecker-factored form.
pub fn build_spline_quad(n: usize, h: usize) -> Result<RefElement> {
    if n == 0 || n > 8 {
        return Err(Error::DegreeOutOfRange(n));
    }
    let sp = SplineSpace::new(n, h);
    let (p1, w1) = sp.quadrature();
    let mq = p1.len();
    let mut rq = Array2::zeros((mq * mq, 2));
    let mut wq = Array1::zeros(mq * mq);
    for i in 0..mq {
        for j in 0..mq {
            rq[(i * mq + j, 0)] = p1[i];
            rq[(i * mq + j, 1)] = p1[j];
            wq[i * mq + j] = w1[i] * w1[j];
        }
    }
    let g = sp.greville();
    let nb = g.len();
    let mut geo = Array2::zeros((nb * nb, 2));
    for i in 0..nb {
        for j in 0..nb {
            geo[(i * nb + j, 0)] = g[i];
            geo[(i * nb + j, 1)] = g[j];
        }
    }
    Ok(RefElement::assemble(
        ElementKind::Quad,
        n,
        BasisFamily::TensorSpline(sp),
        rq,
        wq,
        n + 1,
        geo,
        h,
    ))
}

/// Spec-level constructor: the 1D space plus validation of its invariants.
pub fn build_spline_space(n: usize, h: usize) -> Result<SplineSpace> {
    if n == 0 {
        return Err(Error::DegreeOutOfRange(n));
    }
    if h == 0 {
        return Err(Error::InvalidConfig("need at least one sub-element".into()));
    }
    Ok(SplineSpace::new(n, h))
}
