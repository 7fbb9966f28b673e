//! Time integration of the downward YMH flow through the gauge group.
//!
//! The integrator evolves the gauge transformation g_t with classical
//! Runge-Kutta on ∂g/∂t·g⁻¹ = −i·μ(g·y₀) (+ the block correction γ for
//! the modified flow) and re-applies g_t to the exact initial pair, so the
//! trajectory stays in the complex-gauge orbit by construction. Steps are
//! halved whenever the energy increases beyond the integrator tolerance;
//! eight failed halvings abort the run.

use crate::error::{Error, Result};
use crate::field::TwistedField;
use crate::grid::FormType;
use crate::higgs::{
    char_poly_invariants, field_spectrum_mean, gauge_act, grad_ymh, hermitian_moment,
    holomorphy_residual, GaugeField, HiggsPair, TangentPair,
};
use crate::slice::CriticalPoint;
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Initial step; `None` uses 0.01/(1 + max|spec(i·μ)|) capped by the
    /// stencil stability limit.
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Stop once the flow-metric gradient norm falls below this.
    pub grad_tol: f64,
    /// Sampling stride, in accepted steps.
    pub record_every: usize,
    /// Halve the step on energy increase.
    pub adaptive: bool,
    /// Keep sampled gauge transformations in the trace (needed by paired
    /// metric tracking).
    pub store_gauges: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt: None,
            t_max: 100.0,
            grad_tol: 1e-8,
            record_every: 10,
            adaptive: true,
            store_gauges: false,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config("flow dt must be positive".into()));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config("flow t_max must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config("flow grad_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    /// ‖grad‖ < grad_tol.
    Converged,
    /// Reached t_max without meeting grad_tol.
    HorizonReached,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Site-averaged ascending spectrum of i·μ per sample.
    pub spectra: Vec<Vec<f64>>,
    pub hol_residuals: Vec<f64>,
    /// sup σ per sample for paired runs (filled by `track_relative_metric`).
    pub sup_sigma: Vec<f64>,
    pub final_pair: HiggsPair,
    /// Cumulative gauge transformation g with final_pair = g · y₀.
    pub final_gauge: GaugeField,
    pub gauges: Vec<(f64, GaugeField)>,
    pub status: FlowStatus,
    pub steps: usize,
}

impl FlowTrace {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&0.0)
    }
}

/// Conservative step bound for the explicit integrator: the stiffest mode
/// of the linearised flow scales like 2s·|∂|²_max with the stencil symbol.
fn stability_dt(y: &HiggsPair) -> f64 {
    let grid = y.grid();
    let order_max = match grid.stencil_order {
        2 => 1.0,
        4 => 1.372,
        6 => 1.586,
        8 => 1.745,
        _ => 2.0,
    };
    let d1 = order_max * grid.n as f64;
    let tau = grid.tau;
    let cmax = (tau.norm() + 1.0) / (2.0 * tau.im) * d1;
    let lam = 2.0 * grid.one_form_weight() * cmax * cmax;
    2.5 / lam
}

pub fn default_dt(y: &HiggsPair) -> Result<f64> {
    let m = hermitian_moment(y)?;
    let sites = y.grid().sites();
    let mut max_spec = 0.0f64;
    for s in 0..sites {
        let eigs = m.site_matrix(s).herm_eigenvalues();
        for &l in &eigs[..m.rows] {
            max_spec = max_spec.max(l.abs());
        }
    }
    Ok((0.01 / (1.0 + max_spec)).min(stability_dt(y)))
}

struct Integrator<'a> {
    y0: &'a HiggsPair,
    /// Block correction for the modified flow: γ(y) = P₋(iμ) − P₋(iμ)†.
    gamma_blocks: Option<&'a [bool]>,
}

impl<'a> Integrator<'a> {
    /// RHS generator N with ∂g/∂t = N(g·y₀)·g.
    fn generator(&self, y: &HiggsPair) -> Result<TwistedField> {
        let m = hermitian_moment(y)?;
        let mut gen = m.scaled(-C::ONE);
        if let Some(mask) = self.gamma_blocks {
            let mneg = m.masked(mask);
            let gamma = mneg.sub(&mneg.adjoint())?;
            gen = gen.add(&gamma)?;
        }
        Ok(gen)
    }

    fn rhs(&self, g: &GaugeField) -> Result<TwistedField> {
        let y = gauge_act(g, self.y0)?;
        let gen = self.generator(&y)?;
        gen.matmul(&g.0)
    }

    fn rk4_step(&self, g: &GaugeField, dt: f64) -> Result<GaugeField> {
        let k1 = self.rhs(g)?;
        let mut g2 = g.0.clone();
        g2.axpy(C::new(0.5 * dt, 0.0), &k1);
        let k2 = self.rhs(&GaugeField(g2))?;
        let mut g3 = g.0.clone();
        g3.axpy(C::new(0.5 * dt, 0.0), &k2);
        let k3 = self.rhs(&GaugeField(g3))?;
        let mut g4 = g.0.clone();
        g4.axpy(C::new(dt, 0.0), &k3);
        let k4 = self.rhs(&GaugeField(g4))?;
        let mut out = g.0.clone();
        out.axpy(C::new(dt / 6.0, 0.0), &k1);
        out.axpy(C::new(dt / 3.0, 0.0), &k2);
        out.axpy(C::new(dt / 3.0, 0.0), &k3);
        out.axpy(C::new(dt / 6.0, 0.0), &k4);
        Ok(GaugeField(out))
    }
}

fn run_flow(
    y0: &HiggsPair,
    opts: &FlowOptions,
    gamma_blocks: Option<&[bool]>,
    mut snapshot: Option<&mut dyn FnMut(f64, &GaugeField, &HiggsPair) -> bool>,
) -> Result<FlowTrace> {
    opts.validate()?;
    let integ = Integrator { y0, gamma_blocks };
    let mut g = GaugeField::identity(&y0.bg);
    let mut y = y0.clone();
    let mut t = 0.0f64;
    let mut dt = match opts.dt {
        Some(v) => v.min(stability_dt(y0)),
        None => default_dt(y0)?,
    };
    let mut energy = crate::higgs::ymh_energy(&y)?;

    let mut trace = FlowTrace {
        times: vec![],
        energies: vec![],
        grad_norms: vec![],
        spectra: vec![],
        hol_residuals: vec![],
        sup_sigma: vec![],
        final_pair: y.clone(),
        final_gauge: g.clone(),
        gauges: vec![],
        status: FlowStatus::HorizonReached,
        steps: 0,
    };

    let record = |t: f64, y: &HiggsPair, g: &GaugeField, trace: &mut FlowTrace| -> Result<f64> {
        let m = hermitian_moment(y)?;
        let e = m.norm_l2().powi(2);
        let gnorm = grad_ymh(y)?.flow_norm();
        trace.times.push(t);
        trace.energies.push(e);
        trace.grad_norms.push(gnorm);
        trace.spectra.push(field_spectrum_mean(&m));
        trace.hol_residuals.push(holomorphy_residual(y)?);
        if opts.store_gauges {
            trace.gauges.push((t, g.clone()));
        }
        Ok(gnorm)
    };

    let gnorm = record(0.0, &y, &g, &mut trace)?;
    if let Some(f) = snapshot.as_deref_mut() {
        if !f(0.0, &g, &y) {
            trace.final_pair = y;
            trace.final_gauge = g;
            return Ok(trace);
        }
    }
    if gnorm < opts.grad_tol {
        trace.status = FlowStatus::Converged;
        trace.final_pair = y;
        trace.final_gauge = g;
        return Ok(trace);
    }

    let mut steps_since_record = 0usize;
    while t < opts.t_max {
        let step_dt = dt.min(opts.t_max - t);
        let mut halvings = 0usize;
        let (g_new, y_new, e_new) = loop {
            let cand = integ.rk4_step(&g, step_dt / (1 << halvings) as f64)?;
            let y_cand = gauge_act(&cand, y0)?;
            let e_cand = crate::higgs::ymh_energy(&y_cand)?;
            if !opts.adaptive || e_cand <= energy + 1e-10 * (1.0 + energy.abs()) {
                break (cand, y_cand, e_cand);
            }
            halvings += 1;
            if halvings > 8 {
                return Err(Error::IntegratorDivergence(halvings - 1));
            }
        };
        if halvings > 0 {
            dt = step_dt / (1 << halvings) as f64;
        }
        t += step_dt / (1 << halvings) as f64;
        g = g_new;
        y = y_new;
        energy = e_new;
        trace.steps += 1;
        steps_since_record += 1;

        if let Some(f) = snapshot.as_deref_mut() {
            if !f(t, &g, &y) {
                break;
            }
        }

        if steps_since_record >= opts.record_every || t >= opts.t_max {
            steps_since_record = 0;
            let gnorm = record(t, &y, &g, &mut trace)?;
            if gnorm < opts.grad_tol {
                trace.status = FlowStatus::Converged;
                break;
            }
        }
    }

    trace.final_pair = y;
    trace.final_gauge = g;
    Ok(trace)
}

/// Downward YMH flow from y₀, stopping at grad_tol or t_max.
pub fn flow(y0: &HiggsPair, opts: &FlowOptions) -> Result<FlowTrace> {
    run_flow(y0, opts, None, None)
}

/// Downward flow with a per-step state callback; returning `false` stops
/// the integration (used by the scattering stage bracketing).
pub fn flow_with_snapshots(
    y0: &HiggsPair,
    opts: &FlowOptions,
    snapshot: &mut dyn FnMut(f64, &GaugeField, &HiggsPair) -> bool,
) -> Result<FlowTrace> {
    run_flow(y0, opts, None, Some(snapshot))
}

/// One RK4 step of the plain flow generator from the state g (with
/// trajectory g·y₀); exposed for the energy-level bisection.
pub fn single_step(y0: &HiggsPair, g: &GaugeField, dt: f64) -> Result<GaugeField> {
    let integ = Integrator { y0, gamma_blocks: None };
    integ.rk4_step(g, dt)
}

/// Modified flow: the generator −i·μ + γ(y) with γ = P₋(iμ) − P₋(iμ)†
/// stays in the parabolic subgroup determined by the critical point.
pub fn modified_flow(x: &CriticalPoint, y0: &HiggsPair, opts: &FlowOptions) -> Result<FlowTrace> {
    run_flow(y0, opts, Some(x.negative_mask()), None)
}

/// Exact linearised flow at a critical point: block (r, c) of the tangent
/// pair is scaled by exp((λ_r − λ_c)·t).
pub fn linearized_flow(x: &CriticalPoint, dx: &TangentPair, t: f64) -> TangentPair {
    let lam = &x.spectrum;
    let m = lam.len();
    let sites = x.pair.grid().sites();
    let mut out = dx.clone();
    for r in 0..m {
        for c in 0..m {
            let factor = C::new(((lam[r] - lam[c]) * t).exp(), 0.0);
            let e = r * m + c;
            for v in &mut out.da.values[e * sites..(e + 1) * sites] {
                *v *= factor;
            }
            for v in &mut out.dphi.values[e * sites..(e + 1) * sites] {
                *v *= factor;
            }
        }
    }
    out
}

/// The constant gauge transformation e^{iβt} of a critical point.
pub fn linearized_gauge(x: &CriticalPoint, t: f64) -> GaugeField {
    let grid = x.pair.grid();
    let degrees: Vec<i64> = x.pair.bg.degrees();
    let entries: Vec<C> = x.spectrum.iter().map(|&l| C::new((l * t).exp(), 0.0)).collect();
    GaugeField(TwistedField::const_diagonal(grid, &degrees, &entries, FormType::Zero))
}

/// sup σ of the relative metric along two paired traces that share sample
/// times: h_t = G_t† G_t with G_t = g_t(A)·g₀·g_t(B)⁻¹ connecting
/// y_A(t) = G_t · y_B(t). The distance-decreasing estimate makes
/// t ↦ sup σ(h_t) non-increasing.
pub fn track_relative_metric(
    trace_a: &FlowTrace,
    trace_b: &FlowTrace,
    g0: &GaugeField,
) -> Result<Vec<(f64, f64)>> {
    if trace_a.gauges.len() != trace_b.gauges.len() || trace_a.gauges.is_empty() {
        return Err(Error::Shape(
            "paired traces must store gauges on a shared time grid".into(),
        ));
    }
    let mut out = Vec::with_capacity(trace_a.gauges.len());
    for ((ta, ga), (tb, gb)) in trace_a.gauges.iter().zip(trace_b.gauges.iter()) {
        if (ta - tb).abs() > 1e-12 * (1.0 + ta.abs()) {
            return Err(Error::Shape("paired traces sampled at different times".into()));
        }
        let gt = ga.compose(g0)?.compose(&gb.inverse()?)?;
        let (_, sup) = gt.metric()?.sigma()?;
        out.push((*ta, sup));
    }
    Ok(out)
}

/// Energy monotonicity check for a recorded trace: every recorded step
/// decreases or is within `tol` of flat.
pub fn energy_monotone(trace: &FlowTrace, tol: f64) -> bool {
    trace
        .energies
        .windows(2)
        .all(|w| w[1] <= w[0] + tol * (1.0 + w[0].abs()))
}

/// Verifies dE/dt = −‖grad‖² against the recorded trace by centered
/// differences; returns the worst relative defect over interior samples.
pub fn energy_dissipation_defect(trace: &FlowTrace) -> f64 {
    let mut worst: f64 = 0.0;
    let n = trace.times.len();
    if n < 3 {
        return 0.0;
    }
    for i in 1..n - 1 {
        let dt = trace.times[i + 1] - trace.times[i - 1];
        if dt <= 0.0 {
            continue;
        }
        let de = (trace.energies[i + 1] - trace.energies[i - 1]) / dt;
        let g2 = trace.grad_norms[i].powi(2);
        // relative to the larger of the two magnitudes, with a floor for
        // converged tails where both vanish
        let denom = de.abs().max(g2).max(1e-12);
        worst = worst.max((de + g2).abs() / denom);
    }
    worst
}

/// Conservation defect of the gauge-invariant coefficients (tr φ, det φ)
/// along a flow relative to the initial pair.
pub fn char_poly_drift(y0: &HiggsPair, yt: &HiggsPair) -> f64 {
    let (tr0, det0) = char_poly_invariants(y0);
    let (tr1, det1) = char_poly_invariants(yt);
    ((tr1 - tr0).norm()).max((det1 - det0).norm())
}

/// Distance-decreasing check for the conjugation schedule
/// g_t = e^{−iβt} g₀ e^{iβt} of an upper-triangular g₀: σ(h_t) pointwise
/// non-increasing in t. Returns the sampled sup σ values.
pub fn conjugation_sigma_schedule(
    x: &CriticalPoint,
    g0: &GaugeField,
    times: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let em = linearized_gauge(x, -t);
        let ep = linearized_gauge(x, t);
        let gt = em.compose(g0)?.compose(&ep)?;
        let (_, sup) = gt.metric()?.sigma()?;
        out.push(sup);
    }
    Ok(out)
}
