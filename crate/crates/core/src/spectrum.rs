//! Geodesics through the identity, periods of central elements, and how
//! lengths rescale along the exact flow.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{GroupFamily, LieAlgebraSpec, MetricState};
use crate::error::{invalid, NilflowError, Result};
use crate::flow::{closed_form, closed_form_coeffs};
use crate::joperator::j_matrix;

/// Relative gap under which two periods are treated as the same length.
pub const PERIOD_DEDUP_RTOL: f64 = 1e-12;

/// Initial velocity `X0 + Z0` of a geodesic at the identity together with
/// the data of the explicit solution. Vectors are full algebra coordinates.
#[derive(Debug, Clone)]
pub struct GeodesicData {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub t: f64,
    /// `√P |Z0|`.
    pub theta: f64,
    /// `j(Z0)` on the complement.
    pub j: DMatrix<f64>,
    pub p: f64,
    j_inv: DMatrix<f64>,
    x0_norm_sq: f64,
    z0_norm_sq: f64,
    complement: Vec<usize>,
}

impl GeodesicData {
    /// Requires `j(Z0)² = −P|Z0|² Id` on the complement, which is what makes
    /// the explicit solution valid.
    pub fn new(spec: &LieAlgebraSpec, metric: &MetricState, p: f64, x0: &[f64], z0: &[f64]) -> Result<Self> {
        if x0.len() != spec.dim() || z0.len() != spec.dim() {
            return Err(invalid("initial velocity has the wrong dimension"));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(invalid(format!("P must be positive, got {p}")));
        }
        if spec.center_indices().iter().any(|&i| x0[i] != 0.0) {
            return Err(invalid("X0 has a central component"));
        }
        let z0_norm_sq = metric.inner(z0, z0)?;
        if z0_norm_sq == 0.0 {
            return Err(NilflowError::NotApplicable("Z0 = 0 gives a straight line".into()));
        }
        let j = j_matrix(spec, metric, z0)?;
        let theta = (p * z0_norm_sq).sqrt();
        let m = j.nrows();
        let residual = (&j * &j + DMatrix::<f64>::identity(m, m) * (theta * theta)).amax();
        if residual > 1e-9 * theta * theta {
            return Err(NilflowError::NotApplicable(format!(
                "j(Z0)² is not −P|Z0|² Id (residual {residual:e})"
            )));
        }
        let j_inv = -&j / (theta * theta);
        Ok(Self {
            x0: x0.to_vec(),
            z0: z0.to_vec(),
            t: metric.time(),
            theta,
            j,
            p,
            j_inv,
            x0_norm_sq: metric.inner(x0, x0)?,
            z0_norm_sq,
            complement: spec.complement_indices().to_vec(),
        })
    }
}

/// `(X(s), Z(s))` of the geodesic with `σ(0) = e` and `σ'(0) = X0 + Z0`,
/// as exponential coordinates.
pub fn geodesic_point(data: &GeodesicData, s: f64) -> (Vec<f64>, Vec<f64>) {
    let th = data.theta;
    let (sin, cos) = (s * th).sin_cos();
    let x0v = DVector::from_iterator(data.complement.len(), data.complement.iter().map(|&i| data.x0[i]));
    let xv = &data.j_inv * &x0v * (cos - 1.0) + &x0v * (sin / th);
    let mut x = vec![0.0; data.x0.len()];
    for (r, &i) in data.complement.iter().enumerate() {
        x[i] = xv[r];
    }
    let a = data.x0_norm_sq / (2.0 * data.z0_norm_sq);
    let coef = s * (1.0 + a) - (sin / th) * a;
    let z = data.z0.iter().map(|v| coef * v).collect();
    (x, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodSource {
    Central,
    Noncentral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSet {
    /// Distinct lengths, ascending.
    pub values: Vec<f64>,
    /// Every length with repetition, in generation order.
    pub multiset: Vec<f64>,
    pub source: PeriodSource,
}

/// Periods of a central element of norm `z`: `z` itself and
/// `√(4πk(z − πk))` for integers `1 ≤ k ≤ z/2π`.
pub fn central_periods(z_norm: f64) -> Result<PeriodSet> {
    if !(z_norm > 0.0 && z_norm.is_finite()) {
        return Err(invalid(format!("central norm must be positive, got {z_norm}")));
    }
    let mut multiset = vec![z_norm];
    let bound = z_norm / (2.0 * PI);
    let mut k = 1_u64;
    while (k as f64) <= bound {
        let kf = k as f64;
        multiset.push((4.0 * PI * kf * (z_norm - PI * kf)).sqrt());
        k += 1;
    }
    let mut values = multiset.clone();
    values.sort_by(f64::total_cmp);
    values.dedup_by(|b, a| (*b - *a).abs() <= PERIOD_DEDUP_RTOL * a.abs().max(b.abs()));
    Ok(PeriodSet {
        values,
        multiset,
        source: PeriodSource::Central,
    })
}

fn flowed_norm(family: GroupFamily, n: usize, rho: f64, g0: &[f64], t: f64, v_star: &[f64]) -> Result<(f64, f64)> {
    let spec = crate::algebra::build_group(family, n)?;
    if v_star.len() != spec.complement_indices().len() {
        return Err(invalid(format!(
            "V* has length {}, expected {}",
            v_star.len(),
            spec.complement_indices().len()
        )));
    }
    if v_star.iter().all(|&v| v == 0.0) {
        return Err(invalid("V* must be nonzero"));
    }
    let g_t = closed_form(family, g0, n, rho, t)?;
    let v = spec.embed_complement(v_star);
    let m0 = MetricState::from_diagonal(g0, 0.0)?;
    let mt = MetricState::from_diagonal(&g_t, t)?;
    Ok((m0.norm(&v)?, mt.norm(&v)?))
}

/// The unique period `|V*|_t` of a noncentral element, measured in the exact
/// flowed metric. `v_star` is given in complement coordinates.
pub fn noncentral_period(family: GroupFamily, n: usize, rho: f64, g0: &[f64], t: f64, v_star: &[f64]) -> Result<f64> {
    Ok(flowed_norm(family, n, rho, g0, t, v_star)?.1)
}

/// Factors by which squared norms of complement and center vectors change
/// between time 0 and `t`.
pub fn length_scaling_factors(family: GroupFamily, n: usize, rho: f64, g0: &[f64], t: f64) -> Result<(f64, f64)> {
    let coeffs = closed_form_coeffs(family, g0, n, rho)?;
    if t == 0.0 {
        return Ok((1.0, 1.0));
    }
    let base = coeffs.base(t)?;
    Ok((base.powf(coeffs.vector_exponent), base.powf(coeffs.center_exponent)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    /// Rescaled element `W* = f^{−1/2} V*`, complement coordinates.
    pub w_star: Vec<f64>,
    pub norm_w_t: f64,
    pub norm_v_0: f64,
    /// The period `|V*|_t` before rescaling.
    pub omega_t: f64,
    pub residual: f64,
}

impl WitnessReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.residual <= tol * self.norm_v_0.max(1.0)
    }
}

/// Rescales `V*` by the inverse square root of the vector factor so that its
/// flowed length matches the initial length of `V*`.
pub fn length_spectrum_witness(
    family: GroupFamily,
    n: usize,
    rho: f64,
    g0: &[f64],
    t: f64,
    v_star: &[f64],
) -> Result<WitnessReport> {
    let (norm_v_0, omega_t) = flowed_norm(family, n, rho, g0, t, v_star)?;
    let (vf, _) = length_scaling_factors(family, n, rho, g0, t)?;
    let scale = vf.powf(-0.5);
    let w_star: Vec<f64> = v_star.iter().map(|v| v * scale).collect();
    let (_, norm_w_t) = flowed_norm(family, n, rho, g0, t, &w_star)?;
    Ok(WitnessReport {
        w_star,
        norm_w_t,
        norm_v_0,
        omega_t,
        residual: (norm_w_t - norm_v_0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_group;
    use crate::curvature::ad_adjoint_matrix;
    use crate::joperator::theoretical_p_factor;
    use approx::assert_abs_diff_eq;

    /// Integrates `V' = (ad V)* V` and `W' = V + ½[W, V]` for the exponential
    /// coordinates `W` of the geodesic.
    fn integrate_geodesic(spec: &LieAlgebraSpec, metric: &MetricState, v0: &[f64], s_end: f64, steps: usize) -> Vec<f64> {
        let d = spec.dim();
        let rhs = |state: &[f64]| -> Vec<f64> {
            let (w, v) = state.split_at(d);
            let adj = ad_adjoint_matrix(spec, metric, v).unwrap();
            let dv = &adj * DVector::from_column_slice(v);
            let br = spec.bracket(w, v).unwrap();
            let mut out: Vec<f64> = (0..d).map(|k| v[k] + 0.5 * br[k]).collect();
            out.extend(dv.iter());
            out
        };
        let mut y: Vec<f64> = vec![0.0; d];
        y.extend_from_slice(v0);
        let h = s_end / steps as f64;
        for _ in 0..steps {
            let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
            let k1 = rhs(&y);
            let k2 = rhs(&add(&y, &k1, h / 2.0));
            let k3 = rhs(&add(&y, &k2, h / 2.0));
            let k4 = rhs(&add(&y, &k3, h));
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y.truncate(d);
        y
    }

    fn split_sum(x: &[f64], z: &[f64]) -> Vec<f64> {
        x.iter().zip(z).map(|(a, b)| a + b).collect()
    }

    #[test]
    fn explicit_geodesic_matches_integration() {
        let cases: Vec<(GroupFamily, usize, f64, f64)> = vec![
            (GroupFamily::Heisenberg, 1, 0.0, 0.0),
            (GroupFamily::Heisenberg, 2, -0.5, 1.0),
            (GroupFamily::Quaternion, 1, 0.0, 0.7),
            (GroupFamily::Quaternion, 2, 0.1, 0.3),
        ];
        for (family, n, rho, t) in cases {
            let spec = build_group(family, n).unwrap();
            let g = closed_form(family, &vec![1.0; family.dim(n)], n, rho, t).unwrap();
            let metric = MetricState::from_diagonal(&g, t).unwrap();
            let p = theoretical_p_factor(family, n, rho, t).unwrap();
            let xc: Vec<f64> = (0..spec.complement_indices().len()).map(|i| 0.3 - 0.17 * i as f64).collect();
            let zc: Vec<f64> = (0..family.center_dim()).map(|i| 0.8 + 0.25 * i as f64).collect();
            let x0 = spec.embed_complement(&xc);
            let z0 = spec.embed_center(&zc);
            let data = GeodesicData::new(&spec, &metric, p, &x0, &z0).unwrap();
            let s = 2.3;
            let (x, z) = geodesic_point(&data, s);
            let numeric = integrate_geodesic(&spec, &metric, &split_sum(&x0, &z0), s, 4000);
            let explicit = split_sum(&x, &z);
            for k in 0..spec.dim() {
                assert_abs_diff_eq!(explicit[k], numeric[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn geodesic_examples() {
        let h = build_group(GroupFamily::Heisenberg, 1).unwrap();
        let id = MetricState::identity(3);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let x0 = [r, 0.0, 0.0];
        let z0 = [0.0, 0.0, r];
        let data = GeodesicData::new(&h, &id, 1.0, &x0, &z0).unwrap();
        assert_abs_diff_eq!(data.theta, r, epsilon = 1e-15);
        let (x, z) = geodesic_point(&data, 2.0_f64.sqrt() * PI);
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[2], 1.5 * PI, epsilon = 1e-14);

        let (x, z) = geodesic_point(&data, 0.0);
        assert!(x.iter().chain(&z).all(|&v| v == 0.0));

        let (x, _) = geodesic_point(&data, 2.0 * PI / data.theta);
        assert!(x.iter().all(|v| v.abs() < 1e-14));

        let still = GeodesicData::new(&h, &id, 1.0, &[0.0; 3], &z0).unwrap();
        let (x, z) = geodesic_point(&still, 1.7);
        assert!(x.iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(z[2], 1.7 * r, epsilon = 1e-15);

        assert!(matches!(
            GeodesicData::new(&h, &id, 1.0, &x0, &[0.0; 3]),
            Err(NilflowError::NotApplicable(_))
        ));
    }

    #[test]
    fn initial_velocity_by_central_differences() {
        let q = build_group(GroupFamily::Quaternion, 1).unwrap();
        let g = closed_form(GroupFamily::Quaternion, &[1.0; 7], 1, 0.0, 1.0).unwrap();
        let m = MetricState::from_diagonal(&g, 1.0).unwrap();
        let p = theoretical_p_factor(GroupFamily::Quaternion, 1, 0.0, 1.0).unwrap();
        let x0 = q.embed_complement(&[0.4, -0.2, 0.9, 0.1]);
        let z0 = q.embed_center(&[0.3, 0.6, -0.5]);
        let data = GeodesicData::new(&q, &m, p, &x0, &z0).unwrap();
        let h = 1e-5;
        let (xp, zp) = geodesic_point(&data, h);
        let (xm, zm) = geodesic_point(&data, -h);
        for k in 0..7 {
            let d = (xp[k] + zp[k] - xm[k] - zm[k]) / (2.0 * h);
            assert_abs_diff_eq!(d, x0[k] + z0[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn mismatched_p_is_rejected() {
        let h = build_group(GroupFamily::Heisenberg, 1).unwrap();
        let id = MetricState::identity(3);
        assert!(matches!(
            GeodesicData::new(&h, &id, 0.5, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
            Err(NilflowError::NotApplicable(_))
        ));
    }

    #[test]
    fn central_period_examples() {
        let p = central_periods(PI).unwrap();
        assert_eq!(p.values, vec![PI]);
        assert_eq!(p.source, PeriodSource::Central);

        let p = central_periods(2.0 * PI).unwrap();
        assert_eq!(p.values.len(), 1);
        assert_abs_diff_eq!(p.values[0], 2.0 * PI, epsilon = 1e-12);
        assert_eq!(p.multiset.len(), 2);

        let p = central_periods(4.0 * PI).unwrap();
        assert_eq!(p.values.len(), 2);
        assert_abs_diff_eq!(p.values[0], 2.0 * 3.0_f64.sqrt() * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values[1], 4.0 * PI, epsilon = 1e-12);
        assert_eq!(p.multiset.len(), 3);

        assert!(central_periods(0.0).is_err());
        assert!(central_periods(-1.0).is_err());
    }

    #[test]
    fn noncentral_period_examples() {
        let h = noncentral_period(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3], 1.0, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(h, 4.0_f64.powf(1.0 / 6.0), epsilon = 1e-14);
        let h0 = noncentral_period(GroupFamily::Heisenberg, 1, 0.0, &[2.0, 1.0, 1.0], 0.0, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(h0, 3.0_f64.sqrt(), epsilon = 1e-15);
        let q = noncentral_period(GroupFamily::Quaternion, 1, 0.0, &[1.0; 7], 1.0, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(q, 9.0_f64.powf(3.0 / 16.0), epsilon = 1e-14);
        assert!(matches!(
            noncentral_period(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3], 1.0, &[0.0, 0.0]),
            Err(NilflowError::InvalidParameter(_))
        ));
    }

    #[test]
    fn scaling_factor_examples() {
        let (v, c) = length_scaling_factors(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3], 1.0).unwrap();
        assert_abs_diff_eq!(v, 4.0_f64.powf(1.0 / 3.0), epsilon = 1e-14);
        // center exponent −(n+nρ)/(n+2−nρ) = −1/3
        assert_abs_diff_eq!(c, 4.0_f64.powf(-1.0 / 3.0), epsilon = 1e-14);
        let (v, c) = length_scaling_factors(GroupFamily::Quaternion, 1, 0.0, &[1.0; 7], 1.0).unwrap();
        assert_abs_diff_eq!(v, 9.0_f64.powf(3.0 / 8.0), epsilon = 1e-14);
        assert_abs_diff_eq!(c, 9.0_f64.powf(-0.25), epsilon = 1e-14);
        for family in [GroupFamily::Heisenberg, GroupFamily::Quaternion] {
            let g0 = vec![1.0; family.dim(2)];
            assert_eq!(length_scaling_factors(family, 2, -0.5, &g0, 0.0).unwrap(), (1.0, 1.0));
        }
        assert!(matches!(
            length_scaling_factors(GroupFamily::Heisenberg, 1, 10.0, &[1.0; 3], 1.0),
            Err(NilflowError::OutOfDomain(_))
        ));
    }

    #[test]
    fn witness_examples() {
        let w = length_spectrum_witness(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3], 1.0, &[1.0, 0.0]).unwrap();
        assert!(w.holds(1e-12), "{w:?}");
        let w = length_spectrum_witness(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3], 0.0, &[0.5, 2.0]).unwrap();
        assert_eq!(w.w_star, vec![0.5, 2.0]);
        let w = length_spectrum_witness(GroupFamily::Quaternion, 1, 0.0, &[1.0; 7], 2.0, &[1.0, 1.0, 0.0, 0.0])
            .unwrap();
        assert!(w.holds(1e-12), "{w:?}");
    }
}
