//! Residual a posteriori estimators and the assembled error bound.
//!
//! The element residual of the reconstruction problem is
//! `f + sigma + Lap(w) - wdot`; together with the normal-flux jumps it is
//! weighted by
//!
//! ```text
//! eta0^2       = sum_K h_K^4 ||res||^2_K   + sum_e h_e^3 ||J||^2_e
//! eta1^2       = sum_K h_K^6 ||res_t||^2_K + sum_e h_e^5 ||J_t||^2_e
//! eta_energy^2 = sum_K h_K^2 ||res||^2_K   + sum_e h_e   ||J||^2_e
//! ```
//!
//! `eta1` needs degree >= 2; degree-1 runs replace it by `eta0` of the
//! time-differenced fields. A flag switches the element residual to the
//! alternative published form (`f + sigma + Lap(wdot) - w` and its time
//! derivative) for side-by-side comparison; the weights and jumps are
//! unchanged.
//!
//! Edge contributions are split evenly between the two adjacent elements so
//! that the per-element values sum to the squared total exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::assemble::{assemble_load, interpolate, l2_error, norm_with, FieldRef};
use crate::error::{invalid, numeric, Result};
use crate::math;
use crate::multiplier::{
    compute_sigma_with, dual_norm_with, MassMode, SigmaContext, SigmaRecord, VerificationRun,
};
use crate::quadrature::{EDGE_POINTS, EDGE_WEIGHTS, TRI_POINTS, TRI_WEIGHTS};
use crate::space::{FeFunction, Space};
use crate::stepper::{ProblemSpec, Trajectory};

/// Element-residual expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualForm {
    /// The form matching the reconstruction identity (default).
    ProofConsistent,
    /// The alternative published form, kept for comparison.
    Printed,
}

/// Normal-flux jumps of a function at the edge quadrature points.
#[derive(Debug, Clone)]
pub struct EdgeJumps {
    /// One triple per edge; zero on boundary edges.
    pub values: Vec<[f64; 3]>,
}

impl EdgeJumps {
    /// `sum_e h_e^pow ||J||^2_e` over interior edges.
    pub fn weighted_total(&self, mesh: &crate::mesh::Mesh, pow: u32) -> f64 {
        let mut total = 0.0;
        for e in 0..mesh.n_edges() {
            if !mesh.is_boundary_edge(e) {
                total += int_pow(mesh.h_e(e), pow) * edge_l2_sq(mesh.h_e(e), &self.values[e]);
            }
        }
        total
    }
}

fn int_pow(x: f64, pow: u32) -> f64 {
    let mut out = 1.0;
    for _ in 0..pow {
        out *= x;
    }
    out
}

fn edge_l2_sq(h_e: f64, vals: &[f64; 3]) -> f64 {
    0.5 * h_e
        * vals
            .iter()
            .zip(EDGE_WEIGHTS.iter())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
}

/// Barycentric coordinates, with respect to element `t`, of the Gauss
/// points of edge `e` (which must be an edge of `t`).
pub fn edge_points_in_element(space: &Space, t: usize, e: usize) -> [[f64; 3]; 3] {
    let [a, b] = space.mesh().edge(e);
    let pa = space.mesh().vertex(a);
    let pb = space.mesh().vertex(b);
    let mut out = [[0.0; 3]; 3];
    for (q, &s) in EDGE_POINTS.iter().enumerate() {
        let x = [
            0.5 * (pa[0] + pb[0]) + 0.5 * s * (pb[0] - pa[0]),
            0.5 * (pa[1] + pb[1]) + 0.5 * s * (pb[1] - pa[1]),
        ];
        out[q] = space.barycentric_of(t, x);
    }
    out
}

/// Jumps `(grad u|_K1 - grad u|_K2) . n` across interior edges at the edge
/// Gauss points. The normal points from the first adjacent element to the
/// second; the squared magnitude used downstream does not depend on that
/// choice.
pub fn jump_residual(space: &Space, u: &FeFunction) -> EdgeJumps {
    let mesh = space.mesh();
    let mut values = vec![[0.0; 3]; mesh.n_edges()];
    for e in 0..mesh.n_edges() {
        let (t1, t2) = match mesh.edge_elements(e) {
            (t1, Some(t2)) => (t1, t2),
            _ => continue,
        };
        let [a, b] = mesh.edge(e);
        let pa = mesh.vertex(a);
        let pb = mesh.vertex(b);
        let len = mesh.h_e(e);
        let mut n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let c1 = mesh.element_centroid(t1);
        let c2 = mesh.element_centroid(t2);
        if (c2[0] - c1[0]) * n[0] + (c2[1] - c1[1]) * n[1] < 0.0 {
            n = [-n[0], -n[1]];
        }
        let lam1 = edge_points_in_element(space, t1, e);
        let lam2 = edge_points_in_element(space, t2, e);
        for q in 0..3 {
            let g1 = space.eval_gradient(u, t1, lam1[q]);
            let g2 = space.eval_gradient(u, t2, lam2[q]);
            values[e][q] = (g1[0] - g2[0]) * n[0] + (g1[1] - g2[1]) * n[1];
        }
    }
    EdgeJumps { values }
}

/// Per-element squared contributions plus the square-rooted total.
#[derive(Debug, Clone)]
pub struct EtaResult {
    pub per_element_sq: Vec<f64>,
    pub total: f64,
}

struct EstimatorFields<'a> {
    /// Function carrying the flux jumps and the element Laplacian.
    principal: &'a FeFunction,
    /// Function subtracted pointwise in the residual.
    subtracted: &'a FeFunction,
    sigma: &'a FeFunction,
    source: FieldRef<'a>,
    t: f64,
}

fn weighted_residual(
    space: &Space,
    fields: &EstimatorFields<'_>,
    form: ResidualForm,
    elem_pow: u32,
    edge_pow: u32,
) -> Result<EtaResult> {
    let mesh = space.mesh();
    let mut per_element = vec![0.0; mesh.n_elements()];
    for t in 0..mesh.n_elements() {
        let area = mesh.element_area(t);
        // Lap of the jump-carrying function in the proof-consistent form;
        // the printed form swaps which function is differentiated twice.
        let lap = match form {
            ResidualForm::ProofConsistent => space.element_laplacian(fields.principal, t),
            ResidualForm::Printed => space.element_laplacian(fields.subtracted, t),
        };
        let mut elem_sq = 0.0;
        for (q, &lam) in TRI_POINTS.iter().enumerate() {
            let x = space.point_in_element(t, lam);
            let fv = (fields.source)(x[0], x[1], fields.t);
            if !fv.is_finite() {
                return Err(numeric(format!(
                    "source not finite at ({}, {})",
                    x[0], x[1]
                )));
            }
            let sig = space.eval(fields.sigma, t, lam);
            let res = match form {
                ResidualForm::ProofConsistent => {
                    fv + sig + lap - space.eval(fields.subtracted, t, lam)
                }
                ResidualForm::Printed => fv + sig + lap - space.eval(fields.principal, t, lam),
            };
            elem_sq += TRI_WEIGHTS[q] * area * res * res;
        }
        per_element[t] += int_pow(mesh.h_k(t), elem_pow) * elem_sq;
    }
    let jumps = jump_residual(space, fields.principal);
    for e in 0..mesh.n_edges() {
        if let (t1, Some(t2)) = mesh.edge_elements(e) {
            let contrib = int_pow(mesh.h_e(e), edge_pow) * edge_l2_sq(mesh.h_e(e), &jumps.values[e]);
            per_element[t1] += 0.5 * contrib;
            per_element[t2] += 0.5 * contrib;
        }
    }
    let total_sq: f64 = per_element.iter().sum();
    Ok(EtaResult {
        per_element_sq: per_element,
        total: math::sqrt(total_sq.max(0.0)),
    })
}

/// L2-norm residual estimator with weights `h_K^4` and `h_e^3`.
pub fn eta0(
    space: &Space,
    w: &FeFunction,
    wdot: &FeFunction,
    sigma: &FeFunction,
    source: FieldRef<'_>,
    t: f64,
    form: ResidualForm,
) -> Result<EtaResult> {
    weighted_residual(
        space,
        &EstimatorFields {
            principal: w,
            subtracted: wdot,
            sigma,
            source,
            t,
        },
        form,
        4,
        3,
    )
}

/// Dual-norm residual estimator of the time-differenced fields with weights
/// `h_K^6` and `h_e^5`; only meaningful for degree >= 2.
pub fn eta1(
    space: &Space,
    wdot: &FeFunction,
    wddot: &FeFunction,
    sigmadot: &FeFunction,
    source_dt: FieldRef<'_>,
    t: f64,
    form: ResidualForm,
) -> Result<EtaResult> {
    if space.degree() < 2 {
        return Err(invalid(
            "eta1 needs polynomial degree >= 2; degree-1 runs use eta0 of the differenced fields",
        ));
    }
    weighted_residual(
        space,
        &EstimatorFields {
            principal: wdot,
            subtracted: wddot,
            sigma: sigmadot,
            source: source_dt,
            t,
        },
        form,
        6,
        5,
    )
}

/// Energy-norm residual estimator with weights `h_K^2` and `h_e`.
pub fn eta_energy(
    space: &Space,
    w: &FeFunction,
    wdot: &FeFunction,
    sigma: &FeFunction,
    source: FieldRef<'_>,
    t: f64,
) -> Result<f64> {
    let res = weighted_residual(
        space,
        &EstimatorFields {
            principal: w,
            subtracted: wdot,
            sigma,
            source,
            t,
        },
        ResidualForm::ProofConsistent,
        2,
        1,
    )?;
    Ok(res.total)
}

/// How the negative-part pairing against the reconstruction is evaluated.
pub enum NegTermMode<'a> {
    /// `|(sigma-, w - chi)| + ||sigma-||_L2 * eta0`: computable upper bound
    /// without a fine-mesh solve.
    Surrogate { eta0_value: f64 },
    /// `(sigma-, w_ref - chi)` against the reconstruction on the fine space.
    Verification {
        run: &'a VerificationRun,
        w_ref: &'a FeFunction,
    },
}

/// Complementarity quantities of one step.
#[derive(Debug, Clone, Copy)]
pub struct CompTerms {
    /// `(sigma, w - chi)`, signed; the bound takes the absolute value of its
    /// time integral.
    pub comp_signed: f64,
    /// `|(sigma, w - chi)|`.
    pub term_comp: f64,
    /// Negative-part term, per the selected mode.
    pub neg_signed: f64,
}

pub fn complementarity_terms(
    ctx: &SigmaContext,
    rec: &SigmaRecord,
    w: &FeFunction,
    chi: &FeFunction,
    mode: NegTermMode<'_>,
) -> CompTerms {
    let gap = w.axpy(-1.0, chi);
    let m_gap = ctx.mass.apply(&gap.coeffs);
    let comp_signed: f64 = rec.sigma.coeffs.iter().zip(&m_gap).map(|(s, g)| s * g).sum();
    let neg_signed = match mode {
        NegTermMode::Surrogate { eta0_value } => {
            let pair: f64 = rec
                .sigma_minus
                .coeffs
                .iter()
                .zip(&m_gap)
                .map(|(s, g)| s * g)
                .sum();
            let l2_minus = norm_with(&ctx.mass, &rec.sigma_minus);
            math::abs(pair) + l2_minus * eta0_value
        }
        NegTermMode::Verification { run, w_ref } => {
            let lifted_minus = run.ctx.prolongation.apply(&rec.sigma_minus);
            let lifted_chi = run.ctx.prolongation.apply(chi);
            let gap_fine = w_ref.axpy(-1.0, &lifted_chi);
            let m_gap_fine = run.ctx.mass_fine.apply(&gap_fine.coeffs);
            lifted_minus
                .coeffs
                .iter()
                .zip(&m_gap_fine)
                .map(|(s, g)| s * g)
                .sum()
        }
    };
    CompTerms {
        comp_signed,
        term_comp: math::abs(comp_signed),
        neg_signed,
    }
}

/// Right-endpoint rectangle rule accumulator for the time integrals.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningIntegral {
    value: f64,
}

impl RunningIntegral {
    pub fn new() -> RunningIntegral {
        RunningIntegral { value: 0.0 }
    }

    pub fn push(&mut self, integrand: f64, tau: f64) {
        self.value += tau * integrand;
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Accumulated integrals feeding the final bound; every component must be
/// present before assembly.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundComponents {
    /// `int ||sigma-||^2_{V*}`.
    pub int_signeg_dual_sq: Option<f64>,
    /// `int (sigma, w - chi)`, signed.
    pub int_comp: Option<f64>,
    /// `int` of the negative-part term, signed.
    pub int_neg: Option<f64>,
    /// `int ||sigma||_{V*} eta_energy`.
    pub int_dual_eta: Option<f64>,
    /// `int eta_dt^2` (eta1, or eta0 of the differenced fields for degree 1).
    pub int_etadt_sq: Option<f64>,
    pub eta0_final: Option<f64>,
    pub eta0_initial: Option<f64>,
    /// `||w_h(0) - w0||_L2`.
    pub initial_l2: Option<f64>,
}

/// Assembled bound with every addend retained.
#[derive(Debug, Clone)]
pub struct EstimatorBreakdown {
    pub degree: usize,
    pub term_signeg: f64,
    pub term_comp: f64,
    pub term_neg: f64,
    pub term_dual: f64,
    pub term_dt: f64,
    pub eta0_final: f64,
    pub eta0_initial: f64,
    pub initial_l2: f64,
    pub total: f64,
    /// Raw integrals behind the addends.
    pub int_signeg_dual_sq: f64,
    pub int_comp: f64,
    pub int_neg: f64,
    pub int_dual_eta: f64,
    pub int_etadt_sq: f64,
    /// L2-variant of the dual product, reported alongside.
    pub int_dual_eta_l2: f64,
    pub per_element_eta0_sq: Vec<f64>,
    pub per_element_etadt_sq: Option<Vec<f64>>,
    /// The eta_dt integral always omits the first step (no history yet).
    pub first_step_skipped: bool,
    pub printed_form: bool,
}

impl EstimatorBreakdown {
    /// Recombine the stored addends; must reproduce `total` exactly.
    pub fn recompute_total(&self) -> f64 {
        self.term_signeg
            + self.term_comp
            + self.term_neg
            + self.term_dual
            + 0.5 * self.eta0_final
            + self.term_dt
            + 0.5 * self.initial_l2
            + 0.5 * self.eta0_initial
    }
}

/// Assemble the final bound
/// `total = sqrt(int ||sigma-||^2) + sqrt|int (sigma, w - chi)| + sqrt|int neg|
///        + sqrt(int ||sigma|| eta_V) + eta0(T)/2 + sqrt(int eta_dt^2)
///        + ||w_h(0) - w0||/2 + eta0(0)/2`.
pub fn total_bound(c: &BoundComponents, degree: usize) -> Result<EstimatorBreakdown> {
    let get = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| invalid(format!("missing bound component {name}")))
    };
    let int_signeg = get(c.int_signeg_dual_sq, "int_signeg_dual_sq")?;
    let int_comp = get(c.int_comp, "int_comp")?;
    let int_neg = get(c.int_neg, "int_neg")?;
    let int_dual = get(c.int_dual_eta, "int_dual_eta")?;
    let int_dt = get(c.int_etadt_sq, "int_etadt_sq")?;
    let eta0_final = get(c.eta0_final, "eta0_final")?;
    let eta0_initial = get(c.eta0_initial, "eta0_initial")?;
    let initial_l2 = get(c.initial_l2, "initial_l2")?;

    let term_signeg = math::sqrt(int_signeg.max(0.0));
    let term_comp = math::sqrt(math::abs(int_comp));
    let term_neg = math::sqrt(math::abs(int_neg));
    let term_dual = math::sqrt(int_dual.max(0.0));
    let term_dt = math::sqrt(int_dt.max(0.0));
    let mut breakdown = EstimatorBreakdown {
        degree,
        term_signeg,
        term_comp,
        term_neg,
        term_dual,
        term_dt,
        eta0_final,
        eta0_initial,
        initial_l2,
        total: 0.0,
        int_signeg_dual_sq: int_signeg,
        int_comp,
        int_neg,
        int_dual_eta: int_dual,
        int_etadt_sq: int_dt,
        int_dual_eta_l2: 0.0,
        per_element_eta0_sq: Vec::new(),
        per_element_etadt_sq: None,
        first_step_skipped: true,
        printed_form: false,
    };
    breakdown.total = breakdown.recompute_total();
    Ok(breakdown)
}

/// Per-step estimator values along a trajectory.
#[derive(Debug, Clone)]
pub struct StepEstimates {
    pub t: f64,
    pub eta0: f64,
    pub eta_energy: f64,
    /// None at the first step (no second difference yet).
    pub eta_dt: Option<f64>,
    pub sigma_dual: f64,
    pub sigma_l2: f64,
    pub signeg_dual: f64,
    pub signeg_l2: f64,
    pub comp_signed: f64,
    pub neg_signed: f64,
    /// Bound assembled from the integrals accumulated up to this step.
    pub total_at_t: f64,
}

pub struct AssessOptions<'a> {
    pub sigma_mode: MassMode,
    pub residual_form: ResidualForm,
    pub verification: Option<&'a VerificationRun>,
}

impl Default for AssessOptions<'_> {
    fn default() -> Self {
        AssessOptions {
            sigma_mode: MassMode::Lumped,
            residual_form: ResidualForm::ProofConsistent,
            verification: None,
        }
    }
}

pub struct TrajectoryAssessment {
    pub steps: Vec<StepEstimates>,
    pub sigma: Vec<SigmaRecord>,
    pub breakdown: EstimatorBreakdown,
}

/// Walk a trajectory once: multipliers, per-step estimators, accumulated
/// integrals, and the assembled bound at the final time.
pub fn assess_trajectory(
    space: &Space,
    problem: &ProblemSpec,
    traj: &Trajectory,
    opts: &AssessOptions<'_>,
) -> Result<TrajectoryAssessment> {
    let n = traj.n_steps();
    if n == 0 {
        return Err(invalid("trajectory has no steps"));
    }
    let tau = traj.tau;
    let ctx = SigmaContext::new(space);
    let source = problem.source.as_ref();
    let backward_dt = move |x: f64, y: f64, t: f64| (source(x, y, t) - source(x, y, t - tau)) / tau;
    let source_dt: FieldRef<'_> = match &problem.source_dt {
        Some(f) => f.as_ref(),
        None => &backward_dt,
    };

    let mut sigma_records: Vec<SigmaRecord> = Vec::with_capacity(n);
    for k in 1..=n {
        let load = assemble_load(space, source, traj.states[k].t)?;
        sigma_records.push(compute_sigma_with(
            &ctx,
            &traj.states[k].w,
            &traj.states[k - 1].w,
            tau,
            &load,
            opts.sigma_mode,
        )?);
    }

    // Initial terms: the step-zero residual data is backfilled from the
    // first step, since backward Euler has no derivative at t = 0.
    let initial_l2 = l2_error(space, &traj.states[0].w, problem.initial.as_ref(), 0.0);
    let eta0_initial = eta0(
        space,
        &traj.states[0].w,
        &sigma_records[0].wdot,
        &sigma_records[0].sigma,
        source,
        0.0,
        opts.residual_form,
    )?
    .total;

    let mut int_signeg_sq = RunningIntegral::new();
    let mut int_comp = RunningIntegral::new();
    let mut int_neg = RunningIntegral::new();
    let mut int_dual = RunningIntegral::new();
    let mut int_dual_l2 = RunningIntegral::new();
    let mut int_dt_sq = RunningIntegral::new();

    let mut steps = Vec::with_capacity(n);
    let mut final_eta0: Option<EtaResult> = None;
    let mut final_etadt: Option<EtaResult> = None;

    for k in 1..=n {
        let state = &traj.states[k];
        let rec = &sigma_records[k - 1];
        let chi = interpolate(space, problem.obstacle.as_ref(), state.t)?;

        let eta0_res = eta0(
            space,
            &state.w,
            &rec.wdot,
            &rec.sigma,
            source,
            state.t,
            opts.residual_form,
        )?;
        let eta_v = eta_energy(space, &state.w, &rec.wdot, &rec.sigma, source, state.t)?;

        let sigma_dual = dual_norm_with(&ctx, &rec.sigma)?;
        let signeg_dual = dual_norm_with(&ctx, &rec.sigma_minus)?;
        let sigma_l2 = norm_with(&ctx.mass, &rec.sigma);
        let signeg_l2 = norm_with(&ctx.mass, &rec.sigma_minus);

        let neg_mode = match opts.verification {
            Some(run) => NegTermMode::Verification {
                run,
                w_ref: &run.w_refs[k - 1],
            },
            None => NegTermMode::Surrogate {
                eta0_value: eta0_res.total,
            },
        };
        let comp = complementarity_terms(&ctx, rec, &state.w, &chi, neg_mode);

        let eta_dt = if k >= 2 {
            let prev_rec = &sigma_records[k - 2];
            let wddot = rec.wdot.axpy(-1.0, &prev_rec.wdot).scaled(1.0 / tau);
            let sigmadot = rec.sigma.axpy(-1.0, &prev_rec.sigma).scaled(1.0 / tau);
            let res = if space.degree() >= 2 {
                eta1(
                    space,
                    &rec.wdot,
                    &wddot,
                    &sigmadot,
                    source_dt,
                    state.t,
                    opts.residual_form,
                )?
            } else {
                eta0(
                    space,
                    &rec.wdot,
                    &wddot,
                    &sigmadot,
                    source_dt,
                    state.t,
                    opts.residual_form,
                )?
            };
            Some(res)
        } else {
            None
        };

        int_signeg_sq.push(signeg_dual * signeg_dual, tau);
        int_comp.push(comp.comp_signed, tau);
        int_neg.push(comp.neg_signed, tau);
        int_dual.push(sigma_dual * eta_v, tau);
        int_dual_l2.push(sigma_l2 * eta_v, tau);
        if let Some(res) = &eta_dt {
            int_dt_sq.push(res.total * res.total, tau);
        }

        let running = BoundComponents {
            int_signeg_dual_sq: Some(int_signeg_sq.value()),
            int_comp: Some(int_comp.value()),
            int_neg: Some(int_neg.value()),
            int_dual_eta: Some(int_dual.value()),
            int_etadt_sq: Some(int_dt_sq.value()),
            eta0_final: Some(eta0_res.total),
            eta0_initial: Some(eta0_initial),
            initial_l2: Some(initial_l2),
        };
        let bound_here = total_bound(&running, space.degree())?;

        steps.push(StepEstimates {
            t: state.t,
            eta0: eta0_res.total,
            eta_energy: eta_v,
            eta_dt: eta_dt.as_ref().map(|r| r.total),
            sigma_dual,
            sigma_l2,
            signeg_dual,
            signeg_l2,
            comp_signed: comp.comp_signed,
            neg_signed: comp.neg_signed,
            total_at_t: bound_here.total,
        });
        if k == n {
            final_eta0 = Some(eta0_res);
            final_etadt = eta_dt;
        }
    }

    let final_eta0 = final_eta0.unwrap();
    let components = BoundComponents {
        int_signeg_dual_sq: Some(int_signeg_sq.value()),
        int_comp: Some(int_comp.value()),
        int_neg: Some(int_neg.value()),
        int_dual_eta: Some(int_dual.value()),
        int_etadt_sq: Some(int_dt_sq.value()),
        eta0_final: Some(final_eta0.total),
        eta0_initial: Some(eta0_initial),
        initial_l2: Some(initial_l2),
    };
    let mut breakdown = total_bound(&components, space.degree())?;
    breakdown.int_dual_eta_l2 = int_dual_l2.value();
    breakdown.per_element_eta0_sq = final_eta0.per_element_sq;
    breakdown.per_element_etadt_sq = final_etadt.map(|r| r.per_element_sq);
    breakdown.printed_form = opts.residual_form == ResidualForm::Printed;

    Ok(TrajectoryAssessment {
        steps,
        sigma: sigma_records,
        breakdown,
    })
}
