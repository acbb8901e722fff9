//! Heisenberg and quaternion Lie algebras and left-invariant metrics on them.
//!
//! Basis indices are 0-based. For `H_n` the basis is `e_1..e_{2n+1}` with
//! `[e_i, e_{n+i}] = e_{2n+1}`. For `Q_n` the basis is
//! `X_{1l}, .., X_{4l}` (stored at offsets `0, n, 2n, 3n`) followed by the
//! central `Z_1, Z_2, Z_3` at `4n..4n+3`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{degenerate, invalid, Result};
use crate::tensor::Tensor3;

/// Threshold below which a metric eigenvalue or diagonal entry counts as zero.
pub const EPS_POS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupFamily {
    Heisenberg,
    Quaternion,
}

impl GroupFamily {
    /// Dimension of the algebra for parameter `n`.
    pub fn dim(self, n: usize) -> usize {
        match self {
            GroupFamily::Heisenberg => 2 * n + 1,
            GroupFamily::Quaternion => 4 * n + 3,
        }
    }

    pub fn center_dim(self) -> usize {
        match self {
            GroupFamily::Heisenberg => 1,
            GroupFamily::Quaternion => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupFamily::Heisenberg => "heisenberg",
            GroupFamily::Quaternion => "quaternion",
        }
    }
}

impl fmt::Display for GroupFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One independent structure constant: `[e_i, e_j] = value · e_k` contributes
/// `C[i][j][k] = value` and `C[j][i][k] = -value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// A 2-step nilpotent Lie algebra given by sparse structure constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraSpec {
    family: GroupFamily,
    n: usize,
    dim: usize,
    brackets: Vec<Bracket>,
    center: Vec<usize>,
    complement: Vec<usize>,
}

/// Builds the algebra of `H_n` or `Q_n`.
pub fn build_group(family: GroupFamily, n: usize) -> Result<LieAlgebraSpec> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let dim = family.dim(n);
    let mut brackets = Vec::new();
    match family {
        GroupFamily::Heisenberg => {
            for i in 0..n {
                brackets.push(Bracket { i, j: n + i, k: 2 * n, value: 1.0 });
            }
        }
        GroupFamily::Quaternion => {
            let z = |r: usize| 4 * n + r - 1;
            for l in 0..n {
                let x = |a: usize| (a - 1) * n + l;
                // [X1,X2] = -Z1, [X1,X3] = Z3, [X1,X4] = Z2,
                // [X2,X3] = Z2,  [X2,X4] = -Z3, [X3,X4] = -Z1
                let table = [
                    (1, 2, 1, -1.0),
                    (1, 3, 3, 1.0),
                    (1, 4, 2, 1.0),
                    (2, 3, 2, 1.0),
                    (2, 4, 3, -1.0),
                    (3, 4, 1, -1.0),
                ];
                for (a, b, r, value) in table {
                    brackets.push(Bracket { i: x(a), j: x(b), k: z(r), value });
                }
            }
        }
    }
    let split = dim - family.center_dim();
    Ok(LieAlgebraSpec {
        family,
        n,
        dim,
        brackets,
        center: (split..dim).collect(),
        complement: (0..split).collect(),
    })
}

impl LieAlgebraSpec {
    pub fn family(&self) -> GroupFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Independent brackets, one per unordered basis pair.
    pub fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    pub fn center_indices(&self) -> &[usize] {
        &self.center
    }

    pub fn complement_indices(&self) -> &[usize] {
        &self.complement
    }

    pub fn is_central(&self, index: usize) -> bool {
        self.center.contains(&index)
    }

    /// Dense `C[i][j][k]` with both orderings filled in.
    pub fn structure_constants(&self) -> Tensor3 {
        let mut c = Tensor3::zeros(self.dim);
        for b in &self.brackets {
            c[(b.i, b.j, b.k)] += b.value;
            c[(b.j, b.i, b.k)] -= b.value;
        }
        c
    }

    /// Matrix of `ad X` in the basis, `(ad X)[k][j] = Σ_i x_i C[i][j][k]`.
    pub fn ad_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for b in &self.brackets {
            m[(b.k, b.j)] += x[b.i] * b.value;
            m[(b.k, b.i)] -= x[b.j] * b.value;
        }
        Ok(m)
    }

    /// Lie bracket `[X, Y]` extended bilinearly from the structure constants.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        let mut out = vec![0.0; self.dim];
        for b in &self.brackets {
            out[b.k] += b.value * (x[b.i] * y[b.j] - x[b.j] * y[b.i]);
        }
        Ok(out)
    }

    /// Unit basis vector `e_index` (0-based).
    pub fn basis(&self, index: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[index] = 1.0;
        v
    }

    /// Places complement coordinates into a full algebra vector.
    pub fn embed_complement(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (&idx, &xi) in self.complement.iter().zip(x) {
            v[idx] = xi;
        }
        v
    }

    /// Places center coordinates into a full algebra vector.
    pub fn embed_center(&self, z: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (&idx, &zi) in self.center.iter().zip(z) {
            v[idx] = zi;
        }
        v
    }

    pub fn project_complement(&self, v: &[f64]) -> Vec<f64> {
        self.complement.iter().map(|&i| v[i]).collect()
    }

    pub fn project_center(&self, v: &[f64]) -> Vec<f64> {
        self.center.iter().map(|&i| v[i]).collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(invalid(format!(
                "vector of length {} for algebra of dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// A left-invariant metric, i.e. an inner product on the Lie algebra.
#[derive(Debug, Clone)]
pub struct MetricState {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    t: f64,
    diagonal: bool,
}

impl MetricState {
    pub fn from_diagonal(diag: &[f64], t: f64) -> Result<Self> {
        if diag.is_empty() {
            return Err(invalid("empty metric"));
        }
        if let Some((i, v)) = diag
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > EPS_POS))
        {
            return Err(degenerate(format!("g_{} = {v}", i + 1)));
        }
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        let g_inv = DMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|v| 1.0 / v),
        ));
        Ok(Self { g, g_inv, t, diagonal: true })
    }

    /// General symmetric positive-definite metric.
    pub fn from_matrix(g: DMatrix<f64>, t: f64) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(invalid("metric must be a non-empty square matrix"));
        }
        let d = g.nrows();
        let scale = g.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > 1e-14 * scale {
                    return Err(invalid(format!("metric not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(invalid("metric has non-finite entries"));
        }
        let eig = g.clone().symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= EPS_POS {
            return Err(degenerate(format!("smallest eigenvalue {min:e}")));
        }
        let chol = Cholesky::<f64, Dyn>::new(g.clone())
            .ok_or_else(|| degenerate("Cholesky factorization failed"))?;
        let g_inv = chol.inverse();
        let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || g[(i, j)] == 0.0));
        Ok(Self { g, g_inv, t, diagonal })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            g: DMatrix::identity(dim, dim),
            g_inv: DMatrix::identity(dim, dim),
            t: 0.0,
            diagonal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.g.diagonal().iter().cloned().collect()
    }

    /// `Xᵀ g Y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || y.len() != d {
            return Err(invalid(format!(
                "vectors of length {} and {} for metric of dimension {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(self.inner_unchecked(x, y))
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.inner(x, x)?.max(0.0).sqrt())
    }

    pub(crate) fn inner_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim();
        if self.diagonal {
            return (0..d).map(|i| x[i] * self.g[(i, i)] * y[i]).sum();
        }
        let mut s = 0.0;
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                s += x[i] * self.g[(i, j)] * y[j];
            }
        }
        s
    }

    /// Restriction of the metric to a set of basis indices.
    pub fn block(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |a, b| self.g[(indices[a], indices[b])])
    }
}
