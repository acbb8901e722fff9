//! Ricci-Bourguignon flow `∂g/∂t = −2 Ric + 2ρ R g` on diagonal
//! left-invariant metrics of `H_n` and `Q_n`.
//!
//! The diagonal systems are integrated with fixed-step classical RK4. Exact
//! solutions exist for initial data with `g_i(0) g_{n+i}(0)` independent of
//! `i` on `H_n`, and for equal complement and equal center components on
//! `Q_n`; both grow like powers of `1 + bt` (resp. `1 + ct`).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::algebra::{GroupFamily, LieAlgebraSpec, MetricState, EPS_POS};
use crate::curvature::{
    ricci_diag_unchecked, ricci_general, scalar_curvature, scalar_diag_unchecked,
    sigma_heisenberg, sigma_quaternion,
};
use crate::error::{degenerate, invalid, NilflowError, Result};
use crate::format::fmt_f64;

/// Components above this value end an integration with [`Termination::Overflow`].
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Relative tolerance for the closed-form hypotheses on `g0`.
const HYPOTHESIS_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub family: GroupFamily,
    pub n: usize,
    pub rho: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl FlowParams {
    /// Defaults: `dt = 1e-3`, `t_end = 1`, a sample every 10 steps.
    pub fn new(family: GroupFamily, n: usize, rho: f64) -> Self {
        Self {
            family,
            n,
            rho,
            dt: 1e-3,
            t_end: 1.0,
            record_every: 10,
        }
    }

    pub fn with_step(mut self, dt: f64, t_end: f64) -> Self {
        self.dt = dt;
        self.t_end = t_end;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn dim(&self) -> usize {
        self.family.dim(self.n)
    }

    /// `1/(2(dim − 1))`, the bound on ρ below which short-time existence is known.
    pub fn existence_threshold(&self) -> f64 {
        1.0 / (2.0 * (self.dim() as f64 - 1.0))
    }

    pub fn exceeds_existence_threshold(&self) -> bool {
        self.rho >= self.existence_threshold()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !self.rho.is_finite() {
            return Err(invalid("rho must be finite"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(invalid(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(invalid(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    Degenerate,
    Overflow,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Horizon => "horizon",
            Termination::Degenerate => "degenerate",
            Termination::Overflow => "overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: FlowParams,
    pub samples: Vec<Sample>,
    /// Largest relative drift `|Q(t) − Q(0)| / |Q(0)|` of each conserved
    /// quantity over every accepted step.
    pub invariant_ledger: BTreeMap<String, f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Writes `t,g_1,...,g_dim` with one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_samples_csv(&self.samples, self.params.dim(), &mut out)
    }
}

pub fn write_samples_csv<W: Write>(samples: &[Sample], dim: usize, out: &mut W) -> std::io::Result<()> {
    let mut header = String::from("t");
    for i in 1..=dim {
        header.push_str(&format!(",g_{i}"));
    }
    writeln!(out, "{header}")?;
    for s in samples {
        let mut row = fmt_f64(s.t);
        for v in &s.g {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Parses a trajectory CSV as written by [`Trajectory::write_csv`].
pub fn read_samples_csv<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| invalid(format!("csv read: {e}")))?,
        None => return Err(invalid("empty trajectory csv")),
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(invalid(format!("unexpected csv header {header:?}")));
    }
    for (i, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("g_{i}") {
            return Err(invalid(format!("unexpected csv column {c:?}")));
        }
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| invalid(format!("csv read: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .trim()
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("csv row {}: {e}", lineno + 2)))?;
        if values.len() != cols.len() {
            return Err(invalid(format!(
                "csv row {} has {} fields, expected {}",
                lineno + 2,
                values.len(),
                cols.len()
            )));
        }
        samples.push(Sample {
            t: values[0],
            g: values[1..].to_vec(),
        });
    }
    Ok(samples)
}

/// `−2 Ric + 2ρ R g` for an arbitrary metric, from the canonical curvature.
pub fn rb_rhs_general(spec: &LieAlgebraSpec, metric: &MetricState, rho: f64) -> Result<DMatrix<f64>> {
    let ric = ricci_general(spec, metric)?;
    let scalar = scalar_curvature(spec, metric)?;
    Ok(ric * -2.0 + metric.matrix() * (2.0 * rho * scalar))
}

fn check_state(family: GroupFamily, g: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if g.len() != family.dim(n) {
        return Err(invalid(format!(
            "{family} n={n} needs {} components, got {}",
            family.dim(n),
            g.len()
        )));
    }
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v > EPS_POS && v.is_finite())) {
        return Err(degenerate(format!("g_{} = {v}", i + 1)));
    }
    Ok(())
}

/// Time derivative of the diagonal components, `−2 Ric_ii + 2ρ R g_i`,
/// built from the component Ricci expressions.
pub fn rhs_diagonal(family: GroupFamily, g: &[f64], n: usize, rho: f64) -> Result<Vec<f64>> {
    check_state(family, g, n)?;
    Ok(rhs_unchecked(family, g, n, rho))
}

fn rhs_unchecked(family: GroupFamily, g: &[f64], n: usize, rho: f64) -> Vec<f64> {
    let ric = ricci_diag_unchecked(family, g, n);
    let scalar = scalar_diag_unchecked(family, g, n);
    ric.iter()
        .zip(g)
        .map(|(r, gi)| -2.0 * r + 2.0 * rho * scalar * gi)
        .collect()
}

/// Constants of the exact solution: the rate `b` (or `c`) and the exponents
/// of the complement and center components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCoeffs {
    pub rate: f64,
    pub vector_exponent: f64,
    pub center_exponent: f64,
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= HYPOTHESIS_RTOL * a.abs().max(b.abs())
}

pub fn closed_form_coeffs(family: GroupFamily, g0: &[f64], n: usize, rho: f64) -> Result<ClosedFormCoeffs> {
    check_state(family, g0, n)?;
    let nf = n as f64;
    match family {
        GroupFamily::Heisenberg => {
            let p = g0[0] * g0[n];
            if let Some(i) = (1..n).find(|&i| !approx_eq(g0[i] * g0[n + i], p)) {
                return Err(NilflowError::NotApplicable(format!(
                    "g_{}(0) g_{}(0) differs from g_1(0) g_{}(0)",
                    i + 1,
                    n + i + 1,
                    n + 1
                )));
            }
            let denom = nf + 2.0 - nf * rho;
            if denom == 0.0 {
                return Err(NilflowError::OutOfDomain("n + 2 − nρ vanishes".into()));
            }
            Ok(ClosedFormCoeffs {
                rate: denom * g0[2 * n] / p,
                vector_exponent: (1.0 - nf * rho) / denom,
                center_exponent: (nf + nf * rho) / (nf * rho - nf - 2.0),
            })
        }
        GroupFamily::Quaternion => {
            let a = g0[0];
            if let Some(j) = (1..4 * n).find(|&j| !approx_eq(g0[j], a)) {
                return Err(NilflowError::NotApplicable(format!(
                    "g_{}(0) differs from g_1(0)",
                    j + 1
                )));
            }
            let z = g0[4 * n];
            if !(approx_eq(g0[4 * n + 1], z) && approx_eq(g0[4 * n + 2], z)) {
                return Err(NilflowError::NotApplicable(
                    "center components of g0 are not equal".into(),
                ));
            }
            let denom = 6.0 + 2.0 * nf - 6.0 * nf * rho;
            if denom == 0.0 {
                return Err(NilflowError::OutOfDomain("6 + 2n − 6nρ vanishes".into()));
            }
            Ok(ClosedFormCoeffs {
                rate: z / (a * a) * denom,
                vector_exponent: 3.0 * (1.0 - 2.0 * nf * rho) / denom,
                center_exponent: -nf * (1.0 + 3.0 * rho) / (3.0 + nf - 3.0 * nf * rho),
            })
        }
    }
}

impl ClosedFormCoeffs {
    /// `1 + rate·t`, rejected when nonpositive.
    pub fn base(&self, t: f64) -> Result<f64> {
        let base = 1.0 + self.rate * t;
        if !(base > 0.0) {
            return Err(NilflowError::OutOfDomain(format!("1 + {}·t = {base} at t = {t}", self.rate)));
        }
        Ok(base)
    }
}

/// Exact solution at time `t` for admissible `g0`.
pub fn closed_form(family: GroupFamily, g0: &[f64], n: usize, rho: f64, t: f64) -> Result<Vec<f64>> {
    let coeffs = closed_form_coeffs(family, g0, n, rho)?;
    if t == 0.0 {
        return Ok(g0.to_vec());
    }
    let base = coeffs.base(t)?;
    let vf = base.powf(coeffs.vector_exponent);
    let cf = base.powf(coeffs.center_exponent);
    let split = g0.len() - family.center_dim();
    Ok(match family {
        GroupFamily::Heisenberg => g0
            .iter()
            .enumerate()
            .map(|(j, v)| if j < split { v * vf } else { v * cf })
            .collect(),
        GroupFamily::Quaternion => (0..g0.len())
            .map(|j| if j < split { g0[0] * vf } else { g0[split] * cf })
            .collect(),
    })
}

/// Ratios `A_i = g_i / g_{n+i}` on `H_n`; constant for any diagonal initial data.
pub fn ratio_invariants(g: &[f64], n: usize) -> BTreeMap<String, f64> {
    (0..n).map(|i| (format!("A_{}", i + 1), g[i] / g[n + i])).collect()
}

/// Conserved quantities of the diagonal flow.
///
/// `H_n`: the ratios `A_i` plus `G_lower = g_1⋯g_n g_N^e` and
/// `G_upper = g_{n+1}⋯g_{2n} g_N^e` with `e = (1 − nρ)/(1 + ρ)`.
/// `Q_n`: `G = g_1⋯g_{4n} (g_{4n+1}g_{4n+2}g_{4n+3})^{2(1−2nρ)/(1+3ρ)}`.
pub fn conserved_quantities(family: GroupFamily, n: usize, rho: f64, g: &[f64]) -> Result<BTreeMap<String, f64>> {
    check_state(family, g, n)?;
    let nf = n as f64;
    match family {
        GroupFamily::Heisenberg => {
            if (1.0 + rho).abs() < 1e-12 {
                return Err(NilflowError::SingularExponent("ρ = −1 on H_n".into()));
            }
            let e = (1.0 - nf * rho) / (1.0 + rho);
            let gn = g[2 * n].powf(e);
            let mut out = ratio_invariants(g, n);
            out.insert("G_lower".into(), g[..n].iter().product::<f64>() * gn);
            out.insert("G_upper".into(), g[n..2 * n].iter().product::<f64>() * gn);
            Ok(out)
        }
        GroupFamily::Quaternion => {
            if (1.0 + 3.0 * rho).abs() < 1e-12 {
                return Err(NilflowError::SingularExponent("ρ = −1/3 on Q_n".into()));
            }
            let e = 2.0 * (1.0 - 2.0 * nf * rho) / (1.0 + 3.0 * rho);
            let center: f64 = g[4 * n..].iter().product();
            let mut out = BTreeMap::new();
            out.insert("G".into(), g[..4 * n].iter().product::<f64>() * center.powf(e));
            Ok(out)
        }
    }
}

fn tracked_invariants(params: &FlowParams, g: &[f64]) -> BTreeMap<String, f64> {
    match conserved_quantities(params.family, params.n, params.rho, g) {
        Ok(q) => q,
        Err(_) if params.family == GroupFamily::Heisenberg => ratio_invariants(g, params.n),
        Err(_) => BTreeMap::new(),
    }
}

fn step_count(dt: f64, t_end: f64) -> usize {
    if t_end == 0.0 {
        return 0;
    }
    let ratio = t_end / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

enum StepOutcome {
    Ok(Vec<f64>),
    Stop(Termination),
}

fn classify_state(g: &[f64]) -> Option<Termination> {
    if g.iter().any(|v| !v.is_finite() || *v > OVERFLOW_LIMIT) {
        Some(Termination::Overflow)
    } else if g.iter().any(|v| *v <= EPS_POS) {
        Some(Termination::Degenerate)
    } else {
        None
    }
}

fn rk4_step(params: &FlowParams, g: &[f64], h: f64) -> StepOutcome {
    let (family, n, rho) = (params.family, params.n, params.rho);
    let f = |state: &[f64]| -> std::result::Result<Vec<f64>, Termination> {
        if let Some(stop) = classify_state(state) {
            return Err(stop);
        }
        Ok(rhs_unchecked(family, state, n, rho))
    };
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { g.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    let run = || -> std::result::Result<Vec<f64>, Termination> {
        let k1 = f(g)?;
        let k2 = f(&axpy(0.5 * h, &k1))?;
        let k3 = f(&axpy(0.5 * h, &k2))?;
        let k4 = f(&axpy(h, &k3))?;
        let next: Vec<f64> = (0..g.len())
            .map(|i| g[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        match classify_state(&next) {
            Some(stop) => Err(stop),
            None => Ok(next),
        }
    };
    match run() {
        Ok(next) => StepOutcome::Ok(next),
        Err(stop) => StepOutcome::Stop(stop),
    }
}

/// Integrates the diagonal flow from `g0` with fixed-step RK4.
///
/// A component dropping to `EPS_POS` or below (at any stage) ends the run with
/// [`Termination::Degenerate`]; a component above [`OVERFLOW_LIMIT`] or a
/// non-finite value ends it with [`Termination::Overflow`]. The last accepted
/// state is always recorded.
pub fn integrate(params: &FlowParams, g0: &[f64]) -> Result<Trajectory> {
    params.validate()?;
    check_state(params.family, g0, params.n)?;

    let reference = tracked_invariants(params, g0);
    let mut ledger: BTreeMap<String, f64> = reference.keys().map(|k| (k.clone(), 0.0)).collect();

    let steps = step_count(params.dt, params.t_end);
    let time_at = |k: usize| if k == steps { params.t_end } else { k as f64 * params.dt };

    let mut samples = vec![Sample { t: 0.0, g: g0.to_vec() }];
    let mut g = g0.to_vec();
    let mut termination = Termination::Horizon;
    let mut last_recorded = 0;

    for k in 0..steps {
        let h = time_at(k + 1) - time_at(k);
        match rk4_step(params, &g, h) {
            StepOutcome::Ok(next) => g = next,
            StepOutcome::Stop(stop) => {
                termination = stop;
                if last_recorded != k {
                    samples.push(Sample { t: time_at(k), g: g.clone() });
                }
                break;
            }
        }
        let current = tracked_invariants(params, &g);
        for (name, v0) in &reference {
            if let Some(v) = current.get(name) {
                let drift = (v - v0).abs() / v0.abs();
                let slot = ledger.get_mut(name).expect("ledger keys match reference");
                *slot = slot.max(drift);
            }
        }
        let done = k + 1;
        if done % params.record_every == 0 || done == steps {
            samples.push(Sample { t: time_at(done), g: g.clone() });
            last_recorded = done;
        }
    }

    Ok(Trajectory {
        params: params.clone(),
        samples,
        invariant_ledger: ledger,
        termination,
    })
}

/// Lower bound `g_c(t) ≥ 1/(Σ_c(0) t + g_c(0)⁻¹)` on one center component.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterBound {
    /// 0-based index of the center component.
    pub index: usize,
    pub sigma0: f64,
    pub g0: f64,
    /// `min_t (g_c(t) − bound(t))` over all samples.
    pub min_slack: f64,
    /// Trapezoid estimate of `∫₀ᵗ g_c` at the last sample.
    pub running_integral: f64,
    /// The running integral is nondecreasing sample to sample.
    pub integral_monotone: bool,
    /// `∫₀ᵗ bound = ln(1 + Σ_c(0) g_c(0) t)/Σ_c(0)` at the last sample.
    pub bound_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthBoundReport {
    pub components: Vec<CenterBound>,
}

impl GrowthBoundReport {
    pub fn min_slack(&self) -> f64 {
        self.components.iter().map(|c| c.min_slack).fold(f64::INFINITY, f64::min)
    }
}

/// Checks the center lower bound at every sample of a trajectory run with ρ < 0.
pub fn center_growth_bound(trajectory: &Trajectory) -> Result<GrowthBoundReport> {
    let params = &trajectory.params;
    if params.rho >= 0.0 {
        return Err(NilflowError::NotApplicable(format!(
            "center growth bound needs ρ < 0, got {}",
            params.rho
        )));
    }
    let first = &trajectory.samples[0];
    let n = params.n;
    let sigmas: Vec<(usize, f64)> = match params.family {
        GroupFamily::Heisenberg => vec![(2 * n, sigma_heisenberg(&first.g, n)?)],
        GroupFamily::Quaternion => {
            let s = sigma_quaternion(&first.g, n)?;
            (0..3).map(|k| (4 * n + k, s.component(k))).collect()
        }
    };
    let components = sigmas
        .into_iter()
        .map(|(index, sigma0)| {
            let g0 = first.g[index];
            let bound = |t: f64| 1.0 / (sigma0 * t + 1.0 / g0);
            let mut min_slack = f64::INFINITY;
            let mut integral = 0.0;
            let mut monotone = true;
            let mut prev: Option<&Sample> = None;
            for s in &trajectory.samples {
                min_slack = min_slack.min(s.g[index] - bound(s.t));
                if let Some(p) = prev {
                    let inc = 0.5 * (s.t - p.t) * (s.g[index] + p.g[index]);
                    monotone &= inc >= 0.0;
                    integral += inc;
                }
                prev = Some(s);
            }
            let t_last = trajectory.last().t;
            CenterBound {
                index,
                sigma0,
                g0,
                min_slack,
                running_integral: integral,
                integral_monotone: monotone,
                bound_integral: (1.0 + sigma0 * g0 * t_last).ln() / sigma0,
            }
        })
        .collect();
    Ok(GrowthBoundReport { components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_group;
    use approx::assert_abs_diff_eq;

    #[test]
    fn general_rhs_examples() {
        let h = build_group(GroupFamily::Heisenberg, 1).unwrap();
        let id = MetricState::identity(3);
        let r0 = rb_rhs_general(&h, &id, 0.0).unwrap();
        let r1 = rb_rhs_general(&h, &id, 0.1).unwrap();
        for (i, (e0, e1)) in [(1.0, 0.9), (1.0, 0.9), (-1.0, -1.1)].into_iter().enumerate() {
            assert_abs_diff_eq!(r0[(i, i)], e0, epsilon = 1e-14);
            assert_abs_diff_eq!(r1[(i, i)], e1, epsilon = 1e-14);
        }
        let ric = ricci_general(&h, &id).unwrap();
        assert_eq!(r0, ric * -2.0);
    }

    #[test]
    fn diagonal_rhs_examples() {
        let h = rhs_diagonal(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.0).unwrap();
        assert_eq!(h, vec![1.0, 1.0, -1.0]);
        let q = rhs_diagonal(GroupFamily::Quaternion, &[1.0; 7], 1, 0.0).unwrap();
        assert_eq!(q, vec![3.0, 3.0, 3.0, 3.0, -2.0, -2.0, -2.0]);
        let h = rhs_diagonal(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.1).unwrap();
        for (v, e) in h.iter().zip([0.9, 0.9, -1.1]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
        assert!(matches!(
            rhs_diagonal(GroupFamily::Heisenberg, &[1.0, -1.0, 1.0], 1, 0.0),
            Err(NilflowError::DegenerateMetric(_))
        ));
    }

    #[test]
    fn closed_form_examples() {
        let g = closed_form(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(g[0], 4f64.powf(1.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 4f64.powf(1.0 / 3.0), epsilon = 1e-15);
        // center exponent (n + nρ)/(nρ − n − 2) = −1/3
        assert_abs_diff_eq!(g[2], 4f64.powf(-1.0 / 3.0), epsilon = 1e-15);
        let q = closed_form(GroupFamily::Quaternion, &[1.0; 7], 1, 0.0, 1.0).unwrap();
        for v in &q[..4] {
            assert_abs_diff_eq!(*v, 9f64.powf(3.0 / 8.0), epsilon = 1e-14);
        }
        for v in &q[4..] {
            assert_abs_diff_eq!(*v, 9f64.powf(-0.25), epsilon = 1e-15);
        }
        let g0 = [2.0, 0.5, 3.0];
        assert_eq!(closed_form(GroupFamily::Heisenberg, &g0, 1, 0.3, 0.0).unwrap(), g0.to_vec());
    }

    #[test]
    fn closed_form_errors() {
        // g_1 g_3 != g_2 g_4
        let bad = [1.0, 2.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            closed_form(GroupFamily::Heisenberg, &bad, 2, 0.0, 1.0),
            Err(NilflowError::NotApplicable(_))
        ));
        let mut q = [1.0; 7];
        q[6] = 2.0;
        assert!(matches!(
            closed_form(GroupFamily::Quaternion, &q, 1, 0.0, 1.0),
            Err(NilflowError::NotApplicable(_))
        ));
        // b = 3, 1 + bt <= 0 at t = -1
        assert!(matches!(
            closed_form(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.0, -1.0),
            Err(NilflowError::OutOfDomain(_))
        ));
    }

    #[test]
    fn closed_form_coeff_formulas() {
        let c = closed_form_coeffs(GroupFamily::Heisenberg, &[2.0, 3.0, 1.5, 1.0, 5.0], 2, 0.25).unwrap();
        assert_abs_diff_eq!(c.rate, (2.0 + 2.0 - 0.5) * 5.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.vector_exponent, 0.5 / 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.center_exponent, 2.5 / (0.5 - 4.0), epsilon = 1e-15);
        let q = closed_form_coeffs(GroupFamily::Quaternion, &[2.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0], 1, -0.5).unwrap();
        assert_abs_diff_eq!(q.rate, 3.0 / 4.0 * 11.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.vector_exponent, 6.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.center_exponent, 0.5 / 5.5, epsilon = 1e-15);
    }

    #[test]
    fn conserved_examples() {
        let q = conserved_quantities(GroupFamily::Heisenberg, 1, 0.0, &[1.0; 3]).unwrap();
        assert_eq!(q["A_1"], 1.0);
        assert_eq!(q["G_lower"], 1.0);
        for t in [0.0, 0.5, 1.0] {
            let g = closed_form(GroupFamily::Heisenberg, &[1.0; 3], 1, 0.0, t).unwrap();
            let q = conserved_quantities(GroupFamily::Heisenberg, 1, 0.0, &g).unwrap();
            assert_abs_diff_eq!(q["G_lower"], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(q["G_upper"], 1.0, epsilon = 1e-15);
        }
        let g = closed_form(GroupFamily::Quaternion, &[1.0; 7], 1, 0.0, 1.0).unwrap();
        let q = conserved_quantities(GroupFamily::Quaternion, 1, 0.0, &g).unwrap();
        assert_abs_diff_eq!(q["G"], 1.0, epsilon = 1e-14);
        assert!(matches!(
            conserved_quantities(GroupFamily::Heisenberg, 1, -1.0, &[1.0; 3]),
            Err(NilflowError::SingularExponent(_))
        ));
        assert!(matches!(
            conserved_quantities(GroupFamily::Quaternion, 1, -1.0 / 3.0, &[1.0; 7]),
            Err(NilflowError::SingularExponent(_))
        ));
    }

    #[test]
    fn integrate_matches_closed_form_at_t1() {
        let p = FlowParams::new(GroupFamily::Heisenberg, 1, 0.0).with_step(1e-3, 1.0);
        let tr = integrate(&p, &[1.0; 3]).unwrap();
        assert_eq!(tr.termination, Termination::Horizon);
        assert_eq!(tr.last().t, 1.0);
        assert!((tr.last().g[0] - 1.5874010519682).abs() < 1e-8);
        assert_eq!(tr.samples.len(), 101);

        let p = FlowParams::new(GroupFamily::Quaternion, 1, 0.0).with_step(1e-3, 1.0);
        let tr = integrate(&p, &[1.0; 7]).unwrap();
        assert!((tr.last().g[4] - 0.5773502691896).abs() < 1e-8);
    }

    #[test]
    fn integrate_zero_horizon() {
        let p = FlowParams::new(GroupFamily::Heisenberg, 2, 0.0).with_step(1e-3, 0.0);
        let g0 = [1.0, 2.0, 3.0, 4.0, 5.0];
        let tr = integrate(&p, &g0).unwrap();
        assert_eq!(tr.samples, vec![Sample { t: 0.0, g: g0.to_vec() }]);
    }

    #[test]
    fn integrate_rejects_bad_params() {
        let g0 = [1.0; 3];
        let base = FlowParams::new(GroupFamily::Heisenberg, 1, 0.0);
        assert!(integrate(&base.clone().with_step(0.0, 1.0), &g0).is_err());
        assert!(integrate(&base.clone().with_step(2.0, 1.0), &g0).is_err());
        assert!(integrate(&base.clone().with_record_every(0), &g0).is_err());
        assert!(matches!(
            integrate(&base, &[1.0, 0.0, 1.0]),
            Err(NilflowError::DegenerateMetric(_))
        ));
    }

    #[test]
    fn integrate_uneven_horizon_lands_on_t_end() {
        let p = FlowParams::new(GroupFamily::Heisenberg, 1, 0.0).with_step(0.3, 1.0).with_record_every(1);
        let tr = integrate(&p, &[1.0; 3]).unwrap();
        let times: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn degenerate_run_is_recorded_not_thrown() {
        // Large ρ: g_N' = -(1+ρ) g_N² Σ drives the center to zero quickly,
        // then the complement components collapse under -ρ g_i g_N Σ.
        let p = FlowParams::new(GroupFamily::Heisenberg, 1, 40.0).with_step(1e-2, 50.0);
        let tr = integrate(&p, &[1.0; 3]).unwrap();
        assert_ne!(tr.termination, Termination::Horizon);
        assert!(tr.samples.iter().all(|s| s.g.iter().all(|v| *v > 0.0)));
        assert!(tr.last().t < 50.0);
    }

    #[test]
    fn existence_threshold() {
        let p = FlowParams::new(GroupFamily::Heisenberg, 1, 0.3);
        assert_eq!(p.existence_threshold(), 0.25);
        assert!(p.exceeds_existence_threshold());
        let q = FlowParams::new(GroupFamily::Quaternion, 1, 0.05);
        assert!(!q.exceeds_existence_threshold());
    }

    #[test]
    fn growth_bound_basics() {
        let p = FlowParams::new(GroupFamily::Heisenberg, 1, -0.5).with_step(1e-3, 2.0);
        let tr = integrate(&p, &[1.0; 3]).unwrap();
        let report = center_growth_bound(&tr).unwrap();
        let c = &report.components[0];
        assert_eq!(c.index, 2);
        assert!(c.min_slack >= 0.0);
        assert!(c.integral_monotone);
        assert!(c.running_integral >= c.bound_integral);
        let p0 = FlowParams::new(GroupFamily::Heisenberg, 1, 0.0).with_step(1e-3, 0.1);
        let tr0 = integrate(&p0, &[1.0; 3]).unwrap();
        assert!(matches!(center_growth_bound(&tr0), Err(NilflowError::NotApplicable(_))));
    }

    #[test]
    fn csv_round_trip() {
        let p = FlowParams::new(GroupFamily::Quaternion, 1, 0.1).with_step(1e-2, 0.5);
        let tr = integrate(&p, &[1.0, 1.2, 0.8, 1.1, 0.9, 1.3, 0.7]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,g_1,g_2,g_3,g_4,g_5,g_6,g_7\n"));
        let parsed = read_samples_csv(&buf[..]).unwrap();
        assert_eq!(parsed, tr.samples);
        assert!(read_samples_csv(&b"x,g_1\n"[..]).is_err());
    }
}
