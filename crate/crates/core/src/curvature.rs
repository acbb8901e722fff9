//! Levi-Civita connection and curvature of left-invariant metrics.
//!
//! The canonical path builds the connection from
//! `∇_X Y = ½{[X,Y] − (ad X)*Y − (ad Y)*X}` and the curvature from the
//! commutator `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`, with the lowered
//! convention `R_ijkl = ⟨R(e_i,e_j)e_k, e_l⟩`. Under this convention the
//! sectional curvature of the plane `{X, Y}` is `⟨R(X,Y)Y,X⟩` and
//! `Ric_ij = g^{km} R_kijm`.
//!
//! The bracket identity for `4⟨R(X,Y)Z,W⟩`, the index form of the same tensor
//! and the contracted index form of the Ricci tensor are kept as independent
//! cross-checks. The two index forms are evaluated exactly as printed,
//! including their unbalanced terms.

use nalgebra::DMatrix;

use crate::algebra::{GroupFamily, LieAlgebraSpec, MetricState};
use crate::error::{degenerate, invalid, Result};
use crate::tensor::{Tensor3, Tensor4};

/// Connection coefficients `∇_{e_i} e_j = γ_ij^k e_k` and adjoint
/// coefficients `(ad e_i)* e_j = a_ij^k e_k`.
#[derive(Debug, Clone)]
pub struct ConnectionCoeffs {
    pub gamma: Tensor3,
    pub adjoint: Tensor3,
}

#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub riemann: Tensor4,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// `Σ` for `H_n` or `Σ′` for `Q_n`, present for diagonal metrics.
    pub sigma: Option<f64>,
    /// Ricci tensor from the literal contracted index formula.
    pub ricci_index_form: DMatrix<f64>,
    /// Largest entrywise gap between `ricci` and `ricci_index_form`.
    pub index_form_discrepancy: f64,
}

fn check_dims(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<()> {
    if spec.dim() != metric.dim() {
        return Err(invalid(format!(
            "metric of dimension {} for algebra of dimension {}",
            metric.dim(),
            spec.dim()
        )));
    }
    Ok(())
}

/// `L[(i,j,l)] = ⟨[e_i, e_j], e_l⟩ = C_ij^m g_lm`.
fn lowered_brackets(c: &Tensor3, g: &DMatrix<f64>) -> Tensor3 {
    let d = c.dim();
    let mut low = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for m in 0..d {
                let cm = c[(i, j, m)];
                if cm == 0.0 {
                    continue;
                }
                for l in 0..d {
                    low[(i, j, l)] += cm * g[(l, m)];
                }
            }
        }
    }
    low
}

/// `a_ij^k = C_il^m g_jm g^{kl}`.
pub fn adjoint_coeffs(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Tensor3> {
    check_dims(spec, metric)?;
    let c = spec.structure_constants();
    let low = lowered_brackets(&c, metric.matrix());
    let g_inv = metric.inverse();
    let d = spec.dim();
    let mut a = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                let v = low[(i, l, j)];
                if v == 0.0 {
                    continue;
                }
                for k in 0..d {
                    a[(i, j, k)] += g_inv[(k, l)] * v;
                }
            }
        }
    }
    Ok(a)
}

/// Connection coefficients from the index formula
/// `γ_ij^k = ½ g^{kl}(C_ij^m g_lm − C_il^m g_jm − C_jl^m g_im)`.
pub fn christoffel(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<ConnectionCoeffs> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let c = spec.structure_constants();
    let low = lowered_brackets(&c, metric.matrix());
    let g_inv = metric.inverse();
    let mut gamma = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                let inner = low[(i, j, l)] - low[(i, l, j)] - low[(j, l, i)];
                if inner == 0.0 {
                    continue;
                }
                for k in 0..d {
                    gamma[(i, j, k)] += 0.5 * g_inv[(k, l)] * inner;
                }
            }
        }
    }
    let adjoint = adjoint_coeffs(spec, metric)?;
    Ok(ConnectionCoeffs { gamma, adjoint })
}

/// Metric adjoint of `ad X`: `(ad X)* = g⁻¹ (ad X)ᵀ g`.
pub fn ad_adjoint_matrix(spec: &LieAlgebraSpec, metric: &MetricState, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(spec, metric)?;
    let ad = spec.ad_matrix(x)?;
    Ok(metric.inverse() * ad.transpose() * metric.matrix())
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

/// `∇_X Y = ½{(ad X)Y − (ad X)*Y − (ad Y)*X}`.
pub fn covariant_derivative(
    spec: &LieAlgebraSpec,
    metric: &MetricState,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    let xy = spec.bracket(x, y)?;
    let ax_y = mat_vec(&ad_adjoint_matrix(spec, metric, x)?, y);
    let ay_x = mat_vec(&ad_adjoint_matrix(spec, metric, y)?, x);
    Ok((0..spec.dim())
        .map(|k| 0.5 * (xy[k] - ax_y[k] - ay_x[k]))
        .collect())
}

/// `U(X,Y) = −½{(ad X)*Y + (ad Y)*X}`.
pub fn symmetric_u(spec: &LieAlgebraSpec, metric: &MetricState, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let ax_y = mat_vec(&ad_adjoint_matrix(spec, metric, x)?, y);
    let ay_x = mat_vec(&ad_adjoint_matrix(spec, metric, y)?, x);
    Ok(ax_y.iter().zip(&ay_x).map(|(a, b)| -0.5 * (a + b)).collect())
}

/// Connection coefficients through the operator form of `∇`, independent of
/// the index formula used by [`christoffel`].
pub fn christoffel_from_operators(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Tensor3> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let mut gamma = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let v = covariant_derivative(spec, metric, &spec.basis(i), &spec.basis(j))?;
            for (k, vk) in v.into_iter().enumerate() {
                gamma[(i, j, k)] = vk;
            }
        }
    }
    Ok(gamma)
}

/// Lowered Riemann tensor `R_ijkl = ⟨R(e_i,e_j)e_k, e_l⟩` from the
/// covariant-derivative commutator.
pub fn riemann(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Tensor4> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let gamma = christoffel_from_operators(spec, metric)?;
    // nabla[i][(q, p)] = γ_ip^q, the action of ∇_{e_i} on coordinates.
    let nabla: Vec<DMatrix<f64>> = (0..d)
        .map(|i| DMatrix::from_fn(d, d, |q, p| gamma[(i, p, q)]))
        .collect();
    let c = spec.structure_constants();
    let g = metric.matrix();
    let mut r = Tensor4::zeros(d);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let mut op = &nabla[i] * &nabla[j] - &nabla[j] * &nabla[i];
            for p in 0..d {
                let cp = c[(i, j, p)];
                if cp != 0.0 {
                    op -= &nabla[p] * cp;
                }
            }
            let lowered = g * &op;
            for k in 0..d {
                for l in 0..d {
                    r[(i, j, k, l)] = lowered[(l, k)];
                }
            }
        }
    }
    Ok(r)
}

/// `4⟨R(X,Y)Z,W⟩` via brackets and `U`, evaluated on basis vectors and
/// divided by four.
pub fn riemann_bracket_form(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Tensor4> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let basis: Vec<Vec<f64>> = (0..d).map(|i| spec.basis(i)).collect();
    let mut br = vec![vec![Vec::new(); d]; d];
    let mut u = vec![vec![Vec::new(); d]; d];
    for a in 0..d {
        for b in 0..d {
            br[a][b] = spec.bracket(&basis[a], &basis[b])?;
            u[a][b] = symmetric_u(spec, metric, &basis[a], &basis[b])?;
        }
    }
    let ip = |x: &[f64], y: &[f64]| metric.inner_unchecked(x, y);
    let mut r = Tensor4::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let xy = &br[i][j];
            for k in 0..d {
                for l in 0..d {
                    let zw = &br[k][l];
                    let mut s = 2.0 * ip(xy, zw) + ip(&br[i][k], &br[j][l]) - ip(&br[i][l], &br[j][k]);
                    s -= ip(&spec.bracket(xy, &basis[k])?, &basis[l]);
                    s += ip(&spec.bracket(xy, &basis[l])?, &basis[k]);
                    s -= ip(&spec.bracket(zw, &basis[i])?, &basis[j]);
                    s += ip(&spec.bracket(zw, &basis[j])?, &basis[i]);
                    s += 4.0 * ip(&u[i][k], &u[j][l]) - 4.0 * ip(&u[i][l], &u[j][k]);
                    r[(i, j, k, l)] = 0.25 * s;
                }
            }
        }
    }
    Ok(r)
}

/// Riemann tensor from the printed index formula, term for term (including
/// `C_ij^p C_pl^q g_pk`, whose summation indices do not balance).
pub fn riemann_index_form(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Tensor4> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let c = spec.structure_constants();
    let a = adjoint_coeffs(spec, metric)?;
    let g = metric.matrix();
    let cc = |x: (usize, usize), y: (usize, usize)| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            let cp = c[(x.0, x.1, p)];
            if cp == 0.0 {
                continue;
            }
            for q in 0..d {
                s += cp * c[(y.0, y.1, q)] * g[(p, q)];
            }
        }
        s
    };
    // Σ_pq C_{x}^p C_{p y}^q g_{q w}
    let nested = |x: (usize, usize), y: usize, w: usize| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            let cp = c[(x.0, x.1, p)];
            if cp == 0.0 {
                continue;
            }
            for q in 0..d {
                s += cp * c[(p, y, q)] * g[(q, w)];
            }
        }
        s
    };
    let aa = |x: (usize, usize), y: (usize, usize)| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            let ap = a[(x.0, x.1, p)] + a[(x.1, x.0, p)];
            if ap == 0.0 {
                continue;
            }
            for q in 0..d {
                s += ap * (a[(y.0, y.1, q)] + a[(y.1, y.0, q)]) * g[(p, q)];
            }
        }
        s
    };
    let mut r = Tensor4::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut s = 2.0 * cc((i, j), (k, l)) + cc((i, k), (j, l)) - cc((i, l), (j, k));
                    s -= nested((i, j), k, l);
                    // printed as C_ij^p C_pl^q g_pk
                    let mut typo = 0.0;
                    for p in 0..d {
                        let cp = c[(i, j, p)];
                        if cp == 0.0 {
                            continue;
                        }
                        for q in 0..d {
                            typo += cp * c[(p, l, q)] * g[(p, k)];
                        }
                    }
                    s += typo;
                    s -= nested((k, l), i, j);
                    s += nested((k, l), j, i);
                    s += aa((i, k), (j, l)) - aa((i, l), (j, k));
                    r[(i, j, k, l)] = 0.25 * s;
                }
            }
        }
    }
    Ok(r)
}

/// Canonical Ricci tensor, `Ric_ij = g^{km} R_kijm`.
pub fn ricci_general(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<DMatrix<f64>> {
    let r = riemann(spec, metric)?;
    Ok(ricci_from_riemann(&r, metric))
}

pub fn ricci_from_riemann(r: &Tensor4, metric: &MetricState) -> DMatrix<f64> {
    let d = r.dim();
    let g_inv = metric.inverse();
    let mut ric = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                for m in 0..d {
                    let w = g_inv[(k, m)];
                    if w != 0.0 {
                        s += w * r[(k, i, j, m)];
                    }
                }
            }
            ric[(i, j)] = s;
        }
    }
    ric
}

/// Ricci tensor from the printed contracted index formula, evaluated
/// literally (the term `C_jm^p C_pj^q g_qk` included as written).
pub fn ricci_index_form(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<DMatrix<f64>> {
    check_dims(spec, metric)?;
    let d = spec.dim();
    let c = spec.structure_constants();
    let a = adjoint_coeffs(spec, metric)?;
    let g = metric.matrix();
    let g_inv = metric.inverse();
    let sym_a = |x: usize, y: usize, p: usize| a[(x, y, p)] + a[(y, x, p)];
    let mut ric = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut total = 0.0;
            for k in 0..d {
                for m in 0..d {
                    let w = g_inv[(k, m)];
                    if w == 0.0 {
                        continue;
                    }
                    let mut s = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            let gpq = g[(p, q)];
                            s += 2.0 * c[(k, i, p)] * c[(j, m, q)] * gpq
                                + c[(k, j, p)] * c[(i, m, q)] * gpq
                                - c[(k, m, p)] * c[(i, j, q)] * gpq
                                - c[(k, i, p)] * c[(p, j, q)] * g[(q, m)]
                                + c[(k, i, p)] * c[(p, m, q)] * g[(q, j)]
                                - c[(j, m, p)] * c[(p, k, q)] * g[(q, i)]
                                + c[(j, m, p)] * c[(p, j, q)] * g[(q, k)]
                                + sym_a(j, k, p) * sym_a(i, m, q) * gpq
                                - sym_a(k, m, p) * sym_a(i, j, q) * gpq;
                        }
                    }
                    total += w * s;
                }
            }
            ric[(i, j)] = 0.25 * total;
        }
    }
    Ok(ric)
}

/// `R = g^{ij} Ric_ij`.
pub fn scalar_curvature(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<f64> {
    let ric = ricci_general(spec, metric)?;
    Ok(trace_with_inverse(&ric, metric))
}

fn trace_with_inverse(ric: &DMatrix<f64>, metric: &MetricState) -> f64 {
    let g_inv = metric.inverse();
    let d = ric.nrows();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += g_inv[(i, j)] * ric[(i, j)];
        }
    }
    s
}

/// Curvature data of one metric, with the index-form Ricci cross-check.
pub fn curvature_report(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<CurvatureReport> {
    let riemann = riemann(spec, metric)?;
    let ricci = ricci_from_riemann(&riemann, metric);
    let scalar = trace_with_inverse(&ricci, metric);
    let ricci_index_form = ricci_index_form(spec, metric)?;
    let index_form_discrepancy = (&ricci - &ricci_index_form).amax();
    let sigma = if metric.is_diagonal() {
        let diag = metric.diagonal();
        Some(match spec.family() {
            GroupFamily::Heisenberg => sigma_heisenberg(&diag, spec.n())?,
            GroupFamily::Quaternion => sigma_quaternion(&diag, spec.n())?.total,
        })
    } else {
        None
    };
    Ok(CurvatureReport {
        riemann,
        ricci,
        scalar,
        sigma,
        ricci_index_form,
        index_form_discrepancy,
    })
}

fn check_diag(family: GroupFamily, diag: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let dim = family.dim(n);
    if diag.len() != dim {
        return Err(invalid(format!(
            "{family} n={n} needs {dim} metric components, got {}",
            diag.len()
        )));
    }
    if let Some((i, v)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(degenerate(format!("g_{} = {v}", i + 1)));
    }
    Ok(())
}

/// `Σ = Σ_k 1/(g_k g_{n+k})` for a diagonal metric on `H_n`.
pub fn sigma_heisenberg(diag: &[f64], n: usize) -> Result<f64> {
    check_diag(GroupFamily::Heisenberg, diag, n)?;
    Ok(sigma_h(diag, n))
}

fn sigma_h(g: &[f64], n: usize) -> f64 {
    (0..n).map(|k| 1.0 / (g[k] * g[n + k])).sum()
}

/// The sums entering the curvature of `Q_n`:
/// `Σ′ = g_{4n+1}Σ₁ + g_{4n+2}Σ₂ + g_{4n+3}Σ₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionSigma {
    pub total: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl QuaternionSigma {
    pub fn component(&self, k: usize) -> f64 {
        match k {
            0 => self.s1,
            1 => self.s2,
            2 => self.s3,
            _ => panic!("center component {k} out of range"),
        }
    }
}

pub fn sigma_quaternion(diag: &[f64], n: usize) -> Result<QuaternionSigma> {
    check_diag(GroupFamily::Quaternion, diag, n)?;
    Ok(sigma_q(diag, n))
}

fn sigma_q(g: &[f64], n: usize) -> QuaternionSigma {
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b, c, d) = (g[i], g[n + i], g[2 * n + i], g[3 * n + i]);
        s1 += 1.0 / (a * b) + 1.0 / (c * d);
        s2 += 1.0 / (a * d) + 1.0 / (b * c);
        s3 += 1.0 / (a * c) + 1.0 / (b * d);
    }
    let z = &g[4 * n..];
    QuaternionSigma {
        total: z[0] * s1 + z[1] * s2 + z[2] * s3,
        s1,
        s2,
        s3,
    }
}

/// Diagonal Ricci tensor from the closed-form component expressions for
/// diagonal metrics on `H_n` and `Q_n`.
pub fn ricci_specialized(family: GroupFamily, diag: &[f64], n: usize) -> Result<Vec<f64>> {
    check_diag(family, diag, n)?;
    Ok(ricci_diag_unchecked(family, diag, n))
}

pub(crate) fn ricci_diag_unchecked(family: GroupFamily, g: &[f64], n: usize) -> Vec<f64> {
    let mut ric = vec![0.0; g.len()];
    match family {
        GroupFamily::Heisenberg => {
            let gn = g[2 * n];
            for i in 0..n {
                ric[i] = -0.5 * gn / g[n + i];
                ric[n + i] = -0.5 * gn / g[i];
            }
            ric[2 * n] = 0.5 * gn * gn * sigma_h(g, n);
        }
        GroupFamily::Quaternion => {
            let (z1, z2, z3) = (g[4 * n], g[4 * n + 1], g[4 * n + 2]);
            for i in 0..n {
                let (a, b, c, d) = (g[i], g[n + i], g[2 * n + i], g[3 * n + i]);
                ric[i] = -0.5 * (z1 / b + z3 / c + z2 / d);
                ric[n + i] = -0.5 * (z1 / a + z2 / c + z3 / d);
                ric[2 * n + i] = -0.5 * (z3 / a + z2 / b + z1 / d);
                ric[3 * n + i] = -0.5 * (z2 / a + z3 / b + z1 / c);
            }
            let s = sigma_q(g, n);
            ric[4 * n] = 0.5 * z1 * z1 * s.s1;
            ric[4 * n + 1] = 0.5 * z2 * z2 * s.s2;
            ric[4 * n + 2] = 0.5 * z3 * z3 * s.s3;
        }
    }
    ric
}

/// Scalar curvature of a diagonal metric: `−½ g_N Σ` on `H_n`, `−½ Σ′` on `Q_n`.
pub fn scalar_specialized(family: GroupFamily, diag: &[f64], n: usize) -> Result<f64> {
    check_diag(family, diag, n)?;
    Ok(scalar_diag_unchecked(family, diag, n))
}

pub(crate) fn scalar_diag_unchecked(family: GroupFamily, g: &[f64], n: usize) -> f64 {
    match family {
        GroupFamily::Heisenberg => -0.5 * g[2 * n] * sigma_h(g, n),
        GroupFamily::Quaternion => -0.5 * sigma_q(g, n).total,
    }
}
