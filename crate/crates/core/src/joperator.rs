//! The skew maps `j(Z)` on the complement `𝒱` and their spectra.
//!
//! `j(Z)` is defined by `⟨j(Z)X, Y⟩ = ⟨Z, [X, Y]⟩` for `X, Y ∈ 𝒱`. In
//! complement coordinates with Gram block `g_V` and
//! `ω_ab = ⟨Z, [e_a, e_b]⟩`, this is `j(Z) = −g_V⁻¹ ω`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{GroupFamily, LieAlgebraSpec, MetricState};
use crate::error::{degenerate, invalid, NilflowError, Result};

/// Relative gap below which two eigenvalues of `j(Z)²` count as equal.
pub const CLUSTER_RTOL: f64 = 1e-9;
/// Tolerance for `j(Z)² = −|Z|² Id`.
pub const HEISENBERG_TYPE_RTOL: f64 = 1e-10;
/// Tolerance on the part of `[j(Z)X, X]` orthogonal to `Z`.
pub const HEISENBERG_LIKE_RTOL: f64 = 1e-9;

/// Random center directions used by [`classify`] on top of the center basis.
const CLASSIFY_RANDOM_DIRECTIONS: usize = 8;
const CLASSIFY_SEED: u64 = 0x6a5f_2c01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    HeisenbergType,
    HeisenbergLike,
    Neither,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HeisenbergType => "heisenberg-type",
            Verdict::HeisenbergLike => "heisenberg-like",
            Verdict::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Number of distinct eigenvalues of `j(Z)²`.
    pub mu: usize,
    /// `θ_1 < … < θ_μ` with `−θ_m²` the distinct eigenvalues.
    pub thetas: Vec<f64>,
    pub subspace_dims: Vec<usize>,
    /// Bases of the eigenspaces `W_m`, in complement coordinates.
    pub subspaces: Vec<Vec<Vec<f64>>>,
    /// All eigenvalues of `j(Z)²`, ordered by increasing magnitude.
    pub eigenvalues: Vec<f64>,
    pub z_norm_sq: f64,
    /// `j(Z)² = −|Z|² Id` to [`HEISENBERG_TYPE_RTOL`].
    pub type_condition: bool,
    /// `[j(Z)X_m, X_m] ∈ span Z` on every `W_m`.
    pub like_condition: bool,
    pub verdict: Verdict,
    /// `θ_1²/|Z|²` when `μ = 1`.
    pub p_factor_observed: Option<f64>,
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

fn check_central(spec: &LieAlgebraSpec, z: &[f64]) -> Result<()> {
    if z.len() != spec.dim() {
        return Err(invalid(format!("Z has length {}, expected {}", z.len(), spec.dim())));
    }
    let scale = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if spec.complement_indices().iter().any(|&i| z[i].abs() > 1e-14 * scale.max(1e-300)) {
        return Err(invalid("Z does not lie in the center"));
    }
    Ok(())
}

/// Matrix of `j(Z)` on `𝒱` in complement coordinates.
pub fn j_matrix(spec: &LieAlgebraSpec, metric: &MetricState, z: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(spec, metric)?;
    check_central(spec, z)?;
    let comp = spec.complement_indices();
    let m = comp.len();
    let mut omega = DMatrix::zeros(m, m);
    let gz: Vec<f64> = (0..spec.dim())
        .map(|k| (0..spec.dim()).map(|l| metric.matrix()[(k, l)] * z[l]).sum())
        .collect();
    let pos = |idx: usize| comp.iter().position(|&c| c == idx);
    for b in spec.brackets() {
        let (Some(a), Some(c)) = (pos(b.i), pos(b.j)) else {
            continue;
        };
        let w = b.value * gz[b.k];
        omega[(a, c)] += w;
        omega[(c, a)] -= w;
    }
    if metric.is_diagonal() {
        let mut out = -omega;
        for (r, &idx) in comp.iter().enumerate() {
            let inv = 1.0 / metric.matrix()[(idx, idx)];
            out.row_mut(r).scale_mut(inv);
        }
        return Ok(out);
    }
    let gv = metric.block(comp);
    let chol = Cholesky::<f64, Dyn>::new(gv).ok_or_else(|| degenerate("complement block not positive definite"))?;
    Ok(-chol.solve(&omega))
}

fn complement_gram(spec: &LieAlgebraSpec, metric: &MetricState) -> DMatrix<f64> {
    metric.block(spec.complement_indices())
}

fn inner_v(gv: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..x.len() {
        for b in 0..y.len() {
            s += x[a] * gv[(a, b)] * y[b];
        }
    }
    s
}

fn apply(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().cloned().collect()
}

/// Eigen-analysis of `j(Z)²` and the per-`Z` classification tests.
pub fn spectrum(spec: &LieAlgebraSpec, metric: &MetricState, z: &[f64]) -> Result<SpectralReport> {
    let j = j_matrix(spec, metric, z)?;
    let z_norm_sq = metric.inner(z, z)?;
    if z_norm_sq == 0.0 {
        return Err(invalid("Z must be nonzero"));
    }
    let gv = complement_gram(spec, metric);
    let chol = Cholesky::<f64, Dyn>::new(gv.clone())
        .ok_or_else(|| degenerate("complement block not positive definite"))?;
    let l = chol.l();
    let l_inv_t = l
        .clone()
        .try_inverse()
        .ok_or_else(|| degenerate("singular Cholesky factor"))?
        .transpose();
    // In g_V-orthonormal coordinates j(Z) is skew; its square is symmetric.
    let jt = l.transpose() * &j * &l_inv_t;
    let sq = &jt * &jt;
    let sym = (&sq + sq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| (-eig.eigenvalues[a]).total_cmp(&(-eig.eigenvalues[b])));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        let start_new = match clusters.last() {
            None => true,
            Some(_) => (eigenvalues[pos] - eigenvalues[pos - 1]).abs() > CLUSTER_RTOL * scale,
        };
        if start_new {
            clusters.push(vec![idx]);
        } else {
            clusters.last_mut().expect("cluster exists").push(idx);
        }
    }

    let mut thetas = Vec::with_capacity(clusters.len());
    let mut subspaces = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let mean = cluster.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / cluster.len() as f64;
        thetas.push((-mean).max(0.0).sqrt());
        let basis: Vec<Vec<f64>> = cluster
            .iter()
            .map(|&i| {
                let y = eig.eigenvectors.column(i).clone_owned();
                (&l_inv_t * y).iter().cloned().collect()
            })
            .collect();
        subspaces.push(basis);
    }
    let mu = thetas.len();
    let subspace_dims = subspaces.iter().map(Vec::len).collect();

    let m = j.nrows();
    let residual = (&j * &j + DMatrix::<f64>::identity(m, m) * z_norm_sq).amax();
    let type_condition = residual <= HEISENBERG_TYPE_RTOL * z_norm_sq;
    let like_condition = like_condition_holds(spec, metric, z, &j, &gv, &subspaces)?;
    let verdict = if type_condition {
        Verdict::HeisenbergType
    } else if like_condition {
        Verdict::HeisenbergLike
    } else {
        Verdict::Neither
    };
    let p_factor_observed = (mu == 1).then(|| thetas[0] * thetas[0] / z_norm_sq);

    Ok(SpectralReport {
        mu,
        thetas,
        subspace_dims,
        subspaces,
        eigenvalues,
        z_norm_sq,
        type_condition,
        like_condition,
        verdict,
        p_factor_observed,
    })
}

/// Checks `[j(Z)X, X] ∈ span Z` for all `X` in each eigenspace through the
/// polarized form `[j(Z)X, Y] + [j(Z)Y, X]` on basis pairs.
fn like_condition_holds(
    spec: &LieAlgebraSpec,
    metric: &MetricState,
    z: &[f64],
    j: &DMatrix<f64>,
    gv: &DMatrix<f64>,
    subspaces: &[Vec<Vec<f64>>],
) -> Result<bool> {
    let z_sq = metric.inner(z, z)?;
    for basis in subspaces {
        let images: Vec<Vec<f64>> = basis.iter().map(|x| apply(j, x)).collect();
        let norms: Vec<f64> = basis.iter().map(|x| inner_v(gv, x, x).sqrt()).collect();
        let image_norms: Vec<f64> = images.iter().map(|x| inner_v(gv, x, x).sqrt()).collect();
        for a in 0..basis.len() {
            for b in a..basis.len() {
                let jxa = spec.embed_complement(&images[a]);
                let jxb = spec.embed_complement(&images[b]);
                let xa = spec.embed_complement(&basis[a]);
                let xb = spec.embed_complement(&basis[b]);
                let p = spec.bracket(&jxa, &xb)?;
                let q = spec.bracket(&jxb, &xa)?;
                let sum: Vec<f64> = p.iter().zip(&q).map(|(u, v)| u + v).collect();
                let along = metric.inner(&sum, z)? / z_sq;
                let perp: Vec<f64> = sum.iter().zip(z).map(|(s, zi)| s - along * zi).collect();
                let perp_norm = metric.norm(&perp)?;
                let scale = image_norms[a] * norms[b] + image_norms[b] * norms[a];
                if perp_norm > HEISENBERG_LIKE_RTOL * scale.max(f64::MIN_POSITIVE) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn unit_center_vector(spec: &LieAlgebraSpec, metric: &MetricState, coords: &[f64]) -> Result<Vec<f64>> {
    let z = spec.embed_center(coords);
    let norm = metric.norm(&z)?;
    Ok(z.into_iter().map(|v| v / norm).collect())
}

fn random_center_vector<R: Rng>(spec: &LieAlgebraSpec, metric: &MetricState, rng: &mut R) -> Result<Vec<f64>> {
    loop {
        let coords: Vec<f64> = (0..spec.center_indices().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if coords.iter().map(|c| c * c).sum::<f64>() > 1e-6 {
            return unit_center_vector(spec, metric, &coords);
        }
    }
}

/// Classifies the metric Lie algebra over the center basis plus a fixed set
/// of random unit center directions.
pub fn classify(spec: &LieAlgebraSpec, metric: &MetricState) -> Result<Verdict> {
    check_dims(spec, metric)?;
    let mut directions = Vec::new();
    for k in 0..spec.center_indices().len() {
        let mut coords = vec![0.0; spec.center_indices().len()];
        coords[k] = 1.0;
        directions.push(unit_center_vector(spec, metric, &coords)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(CLASSIFY_SEED);
    for _ in 0..CLASSIFY_RANDOM_DIRECTIONS {
        directions.push(random_center_vector(spec, metric, &mut rng)?);
    }
    let mut all_type = true;
    let mut all_like = true;
    for z in &directions {
        let report = spectrum(spec, metric, z)?;
        all_type &= report.type_condition;
        all_like &= report.like_condition;
    }
    Ok(if all_type {
        Verdict::HeisenbergType
    } else if all_like {
        Verdict::HeisenbergLike
    } else {
        Verdict::Neither
    })
}

/// `η_t = 1/((n+2−nρ)t+1)` on `H_n`, `ζ_t = 1/((6+2n−6nρ)t+1)` on `Q_n`.
pub fn theoretical_p_factor(family: GroupFamily, n: usize, rho: f64, t: f64) -> Result<f64> {
    let nf = n as f64;
    let rate = match family {
        GroupFamily::Heisenberg => nf + 2.0 - nf * rho,
        GroupFamily::Quaternion => 6.0 + 2.0 * nf - 6.0 * nf * rho,
    };
    let denom = rate * t + 1.0;
    if !(denom > 0.0) {
        return Err(NilflowError::OutOfDomain(format!("{rate}·t + 1 = {denom} at t = {t}")));
    }
    Ok(1.0 / denom)
}

/// Whether `g0` meets the extra initial condition under which `j(Z)²` is a
/// multiple of the identity along the exact solution: `g_{2n+1}(0) =
/// g_i(0) g_{n+i}(0)` on `H_n`, `g_{4n+1}(0) = g_1(0)²` (with the exact-solution
/// hypotheses) on `Q_n`.
pub fn p_factor_condition_holds(family: GroupFamily, g0: &[f64], n: usize) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if g0.len() != family.dim(n) || n == 0 {
        return false;
    }
    match family {
        GroupFamily::Heisenberg => (0..n).all(|i| close(g0[i] * g0[n + i], g0[2 * n])),
        GroupFamily::Quaternion => {
            (0..4 * n).all(|j| close(g0[j], g0[0]))
                && (0..3).all(|k| close(g0[4 * n + k], g0[4 * n]))
                && close(g0[4 * n], g0[0] * g0[0])
        }
    }
}

/// Largest residual of each of the five inner-product identities satisfied
/// by `j` when `j(Z)² = −P|Z|² Id`:
///
/// 1. `⟨j(Z)X, j(Z*)X⟩ = P⟨Z,Z*⟩⟨X,X⟩`
/// 2. `⟨j(Z)X, j(Z)Y⟩ = P⟨Z,Z⟩⟨X,Y⟩`
/// 3. `|j(Z)X| = P^{1/2}|Z||X|`
/// 4. `j(Z)j(Z*) + j(Z*)j(Z) = −2P⟨Z,Z*⟩ Id`
/// 5. `[X, j(Z)X] = P⟨X,X⟩Z`
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResiduals {
    pub residuals: [f64; 5],
    pub samples: usize,
}

impl IdentityResiduals {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Evaluates the five identities on `samples` random unit `(X, Y, Z, Z*)`.
pub fn verify_j_identities(
    spec: &LieAlgebraSpec,
    metric: &MetricState,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<IdentityResiduals> {
    check_dims(spec, metric)?;
    let gv = complement_gram(spec, metric);
    let m = spec.complement_indices().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_v = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = inner_v(&gv, &x, &x).sqrt();
            if norm > 1e-3 {
                return x.into_iter().map(|v| v / norm).collect();
            }
        }
    };
    let mut res = [0.0_f64; 5];
    for _ in 0..samples {
        let x = random_v(&mut rng);
        let y = random_v(&mut rng);
        let z = random_center_vector(spec, metric, &mut rng)?;
        let zs = random_center_vector(spec, metric, &mut rng)?;
        let jz = j_matrix(spec, metric, &z)?;
        let jzs = j_matrix(spec, metric, &zs)?;
        let zz = metric.inner(&z, &z)?;
        let zzs = metric.inner(&z, &zs)?;
        let xx = inner_v(&gv, &x, &x);
        let xy = inner_v(&gv, &x, &y);
        let jx = apply(&jz, &x);
        let jsx = apply(&jzs, &x);
        let jy = apply(&jz, &y);

        res[0] = res[0].max((inner_v(&gv, &jx, &jsx) - p * zzs * xx).abs());
        res[1] = res[1].max((inner_v(&gv, &jx, &jy) - p * zz * xy).abs());
        res[2] = res[2].max((inner_v(&gv, &jx, &jx).sqrt() - p.sqrt() * zz.sqrt() * xx.sqrt()).abs());
        let anti = &jz * &jzs + &jzs * &jz + DMatrix::<f64>::identity(m, m) * (2.0 * p * zzs);
        res[3] = res[3].max(anti.amax());
        let br = spec.bracket(&spec.embed_complement(&x), &spec.embed_complement(&jx))?;
        let diff: Vec<f64> = br.iter().zip(&z).map(|(b, zi)| b - p * xx * zi).collect();
        res[4] = res[4].max(metric.norm(&diff)?);
    }
    Ok(IdentityResiduals { residuals: res, samples })
}
