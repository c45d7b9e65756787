//! Dense complex matrices and state vectors.
//!
//! Everything here is small: the largest operator the toolkit ever
//! materializes densely is a few hundred rows wide, so storage is a flat
//! row-major `Vec` and products are the schoolbook triple loop.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance for algebraic identities (unitarity, commutation, orthogonality).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for simulated probabilities.
pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch { op: "ComplexMatrix::new", left: (rows, cols), right: (data.len(), 1) });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn pauli_x() -> Self {
        Self { rows: 2, cols: 2, data: vec![ZERO, ONE, ONE, ZERO] }
    }

    /// `|v><v|` for a single vector (not necessarily normalized).
    pub fn outer(v: &StateVector) -> Self {
        Self::outer_sum(std::slice::from_ref(v), v.dim())
    }

    /// `sum_k |v_k><v_k|` on a space of dimension `dim`.
    pub fn outer_sum(vs: &[StateVector], dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for v in vs {
            for r in 0..dim {
                for c in 0..dim {
                    m.data[r * dim + c] += v.amps[r] * v.amps[c].conj();
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, z: C64) {
        self.data[r * self.cols + c] = z;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch { op: "matmul", left: self.shape(), right: other.shape() });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.cols != v.dim() {
            return Err(Error::ShapeMismatch { op: "apply", left: self.shape(), right: (v.dim(), 1) });
        }
        let amps = (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(&v.amps).map(|(a, b)| a * b).sum())
            .collect();
        Ok(StateVector { amps })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * z).collect() }
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { op, left: self.shape(), right: other.shape() });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::NotSquare { op: "trace", rows: self.rows, cols: self.cols });
        }
        Ok((0..self.rows).map(|i| self.data[i * self.cols + i]).sum())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix add: shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix sub: shape mismatch")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs).expect("matmul: shape mismatch")
    }
}

/// Kronecker product `a ⊗ b`; the left factor is the slowest-varying index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a.get(ar, ac);
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out.data[(ar * b.rows + br) * cols + ac * b.cols + bc] = x * b.get(br, bc);
                }
            }
        }
    }
    out
}

/// True iff `||u^† u - I||_F <= tol`.
pub fn is_unitary(u: &ComplexMatrix, tol: f64) -> Result<bool> {
    if !u.is_square() {
        return Err(Error::NotSquare { op: "is_unitary", rows: u.rows, cols: u.cols });
    }
    let gram = u.adjoint().matmul(u)?;
    let dev = gram.try_sub(&ComplexMatrix::identity(u.rows))?;
    Ok(dev.frobenius_norm() <= tol)
}

/// `||ab - ba||_F`.
pub fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { op: "commutator_norm", left: a.shape(), right: b.shape() });
    }
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(ab.try_sub(&ba)?.frobenius_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self { amps })
    }

    pub fn from_real(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![ZERO; dim] }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[k] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amps: self.amps.iter().map(|z| z / n).collect() })
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self { amps }
    }

    pub fn scaled(&self, z: C64) -> Self {
        Self { amps: self.amps.iter().map(|a| a * z).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect() }
    }

    /// `|<self|other>|^2` for normalized vectors; equals 1 up to a global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kcbs_v(k: usize) -> StateVector {
        let a = (1.0f64 / 3.0).sqrt();
        let b = 0.5f64.sqrt();
        let xs: [f64; 3] = match k {
            1 => [a, -a, a],
            2 => [b, b, 0.0],
            3 => [0.0, 0.0, 1.0],
            4 => [1.0, 0.0, 0.0],
            5 => [0.0, b, b],
            _ => unreachable!(),
        };
        StateVector::from_real(&xs).unwrap()
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));
    }

    #[test]
    fn kron_x_identity_flips_first_qubit() {
        let k = kron(&ComplexMatrix::pauli_x(), &ComplexMatrix::identity(2));
        let out = k.apply(&StateVector::basis(4, 0)).unwrap();
        assert_eq!(out, StateVector::basis(4, 2));
    }

    #[test]
    fn kron_trace_is_multiplicative() {
        let p = ComplexMatrix::outer(&kcbs_v(1));
        let k = kron(&p, &ComplexMatrix::identity(2));
        let t = k.trace().unwrap();
        assert!((t.re - 2.0).abs() < 1e-12 && t.im.abs() < 1e-12);
        let prod = p.trace().unwrap() * ComplexMatrix::identity(2).trace().unwrap();
        assert!((t - prod).norm() < 1e-12);
    }

    #[test]
    fn unitarity_checks() {
        assert!(is_unitary(&ComplexMatrix::identity(3), 1e-12).unwrap());
        let ones = ComplexMatrix::new(3, 3, vec![ONE; 9]).unwrap();
        assert!(!is_unitary(&ones, 1e-12).unwrap());
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(is_unitary(&rect, 1e-12), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn commutators_of_kcbs_projectors() {
        let p1 = ComplexMatrix::outer(&kcbs_v(1));
        let p2 = ComplexMatrix::outer(&kcbs_v(2));
        let p3 = ComplexMatrix::outer(&kcbs_v(3));
        assert!(commutator_norm(&p1, &p2).unwrap() <= 1e-12);
        // [P1,P3] has norm sqrt(2)|g|sqrt(1-|g|^2) with g = <v1|v3> = 1/sqrt(3).
        let expected = (2.0f64).sqrt() * (1.0f64 / 3.0).sqrt() * (2.0f64 / 3.0).sqrt();
        let got = commutator_norm(&p1, &p3).unwrap();
        assert!(got > 0.1);
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(commutator_norm(&ComplexMatrix::identity(3), &p3).unwrap(), 0.0);
        assert!(commutator_norm(&p1, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
        assert!(ComplexMatrix::from_real(1, 1, &[f64::NAN]).is_err());
        assert!(StateVector::from_real(&[f64::INFINITY]).is_err());
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |xs| {
            ComplexMatrix::new(rows, cols, xs.into_iter().map(|(r, i)| C64::new(r, i)).collect()).unwrap()
        })
    }

    /// Unitary from a Householder reflection `I - 2|w><w|/<w|w>`.
    fn householder(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_filter("nonzero", |w| w.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
            .prop_map(move |w| {
                let v = StateVector::new(w.into_iter().map(|(r, i)| C64::new(r, i)).collect())
                    .unwrap()
                    .normalized()
                    .unwrap();
                &ComplexMatrix::identity(dim) - &ComplexMatrix::outer(&v).scale(C64::new(2.0, 0.0))
            })
    }

    proptest! {
        #[test]
        fn kron_is_associative(a in small_matrix(2, 2), b in small_matrix(2, 3), c in small_matrix(3, 2)) {
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            prop_assert!(left.try_sub(&right).unwrap().frobenius_norm() < 1e-12);
        }

        #[test]
        fn unitaries_preserve_norm(u in householder(4), s in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)) {
            prop_assume!(s.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3));
            prop_assert!(is_unitary(&u, 1e-12).unwrap());
            let state = StateVector::new(s.into_iter().map(|(r, i)| C64::new(r, i)).collect())
                .unwrap()
                .normalized()
                .unwrap();
            let out = u.apply(&state).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn commutator_norm_is_symmetric(a in small_matrix(3, 3), b in small_matrix(3, 3)) {
            let ab = commutator_norm(&a, &b).unwrap();
            let ba = commutator_norm(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
