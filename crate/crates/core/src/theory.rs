//! Numerical embodiment of the convergence analysis: the constants ledger,
//! the 4x4 coupled-error system matrix, the admissible step-size bound, and
//! the weighted-norm certificate for its spectral radius.
//!
//! The error-system state tracks, in order: the network agreement error,
//! the optimality error, the gradient-learning error, and the tracking
//! error. Stability of the iteration matrix certifies linear convergence of
//! the solver; the decaying input matrix is diagnostic only.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::netgraph::DirectedNetwork;

/// Every scalar feeding the error-system matrix.
#[derive(Debug, Clone)]
pub struct TheoryConstants {
    pub mu: f64,
    pub lipschitz: f64,
    /// Condition number `Q = L / mu`.
    pub cond_q: f64,
    pub m: usize,
    pub sigma_a: f64,
    pub pi_max: f64,
    pub pi_min: f64,
    /// `theta = pi_max / pi_min`.
    pub theta_ratio: f64,
    /// `T = sqrt(theta) ||1 - m pi||_2`.
    pub t_const: f64,
    /// `Y = sup_k ||Y_k||_2`.
    pub y_sup: f64,
    /// `Y~ = sup_k ||Y_k^{-1}||_2`.
    pub y_inv_sup: f64,
    /// Directivity constant `delta = Y (1 + T) theta Y~^2`.
    pub delta: f64,
    /// `d1 = (1 + T) Y~^2`.
    pub d1: f64,
    /// `d2 = T (T + 1) Y~^2`.
    pub d2: f64,
    pub p_max: f64,
    pub p_min: f64,
}

impl TheoryConstants {
    /// Assembles the ledger from a network, the objective's `(mu, L)`, and
    /// the trigger probabilities. `Y` and `Y~` are measured from the actual
    /// push-sum trajectory rather than bounded analytically; the horizon
    /// defaults to the point where the push-sum residue drops below 1e-12.
    pub fn derive(
        net: &DirectedNetwork,
        mu: f64,
        lipschitz: f64,
        trigger_probs: &[f64],
    ) -> Result<Self> {
        Self::derive_with_horizon(net, mu, lipschitz, trigger_probs, None)
    }

    /// [`derive`](TheoryConstants::derive) with an explicit horizon for the
    /// push-sum extrema estimate.
    pub fn derive_with_horizon(
        net: &DirectedNetwork,
        mu: f64,
        lipschitz: f64,
        trigger_probs: &[f64],
        horizon: Option<usize>,
    ) -> Result<Self> {
        if mu <= 0.0 {
            return Err(CoreError::NonPositiveParameter {
                name: "mu",
                value: mu,
            });
        }
        if lipschitz < mu {
            return Err(CoreError::NonPositiveParameter {
                name: "lipschitz - mu",
                value: lipschitz - mu,
            });
        }
        if trigger_probs.is_empty() {
            return Err(CoreError::Config("no trigger probabilities".into()));
        }
        for &p in trigger_probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CoreError::InvalidTriggerProbability(p));
            }
        }
        let s = net.spectral();
        let horizon = horizon.unwrap_or_else(|| default_y_horizon(s.sigma_a));
        let (y_sup, y_inv_sup) = estimate_y_bounds(net, horizon);
        let t_const = s.t_const();
        let theta_ratio = s.theta_ratio;
        let delta = y_sup * (1.0 + t_const) * theta_ratio * y_inv_sup * y_inv_sup;
        let d1 = (1.0 + t_const) * y_inv_sup * y_inv_sup;
        let d2 = t_const * (t_const + 1.0) * y_inv_sup * y_inv_sup;
        let p_max = trigger_probs.iter().cloned().fold(f64::MIN, f64::max);
        let p_min = trigger_probs.iter().cloned().fold(f64::MAX, f64::min);
        let consts = TheoryConstants {
            mu,
            lipschitz,
            cond_q: lipschitz / mu,
            m: net.agents(),
            sigma_a: s.sigma_a,
            pi_max: s.pi_max,
            pi_min: s.pi_min,
            theta_ratio,
            t_const,
            y_sup,
            y_inv_sup,
            delta,
            d1,
            d2,
            p_max,
            p_min,
        };
        debug_assert!(consts.cond_q >= 1.0);
        debug_assert!(consts.theta_ratio >= 1.0 - 1e-12);
        debug_assert!(consts.delta >= 1.0 - 1e-12);
        debug_assert!(consts.d1 <= consts.delta + 1e-12);
        debug_assert!(consts.d2 <= consts.delta * consts.t_const + 1e-12);
        Ok(consts)
    }
}

/// Horizon after which the push-sum residue is below 1e-12.
pub fn default_y_horizon(sigma_a: f64) -> usize {
    if sigma_a <= 0.0 {
        return 1;
    }
    let k = (1e-12f64.ln() / sigma_a.ln()).ceil() as usize;
    k.clamp(1, 200_000)
}

/// Runs `y_{k+1} = A y_k` from the all-ones vector and records the extreme
/// diagonal values over the trajectory and the limit `m pi`. Returns
/// `(Y, Y~)`, the suprema of `||Y_k||_2` and `||Y_k^{-1}||_2`.
pub fn estimate_y_bounds(net: &DirectedNetwork, k_max: usize) -> (f64, f64) {
    let m = net.agents();
    let pi = &net.spectral().pi;
    let mut y = vec![1.0; m];
    let mut next = vec![0.0; m];
    let mut y_sup: f64 = 1.0;
    let mut y_inv_sup: f64 = 1.0;
    for _ in 0..k_max {
        net.mix_scalar_into(&y, &mut next);
        std::mem::swap(&mut y, &mut next);
        let mut settled = true;
        for (yi, &pi_i) in y.iter().zip(pi) {
            y_sup = y_sup.max(*yi);
            y_inv_sup = y_inv_sup.max(1.0 / yi);
            if (yi - m as f64 * pi_i).abs() > 1e-15 * m as f64 {
                settled = false;
            }
        }
        if settled {
            break;
        }
    }
    for &p in pi {
        y_sup = y_sup.max(m as f64 * p);
        y_inv_sup = y_inv_sup.max(1.0 / (m as f64 * p));
    }
    (y_sup, y_inv_sup)
}

/// The 4x4 iteration matrix of the coupled error system at step-size
/// `alpha`. Entries are exactly the displayed coefficients; the rows couple
/// the agreement, optimality, gradient-learning, and tracking errors.
pub fn build_h_alpha(c: &TheoryConstants, alpha: f64) -> [[f64; 4]; 4] {
    let s2 = c.sigma_a * c.sigma_a;
    let l2 = c.lipschitz * c.lipschitz;
    let m = c.m as f64;
    [
        [0.5 * (1.0 + s2), 0.0, 0.0, 2.0 * alpha * alpha / (1.0 - s2)],
        [
            2.0 * c.pi_max * c.delta * alpha * l2 / c.mu,
            1.0 - 0.5 * c.mu * alpha,
            2.0 * alpha * alpha / m,
            0.0,
        ],
        [
            2.0 * c.p_max * c.pi_max * c.d1 * l2,
            2.0 * m * c.p_max * l2,
            1.0 - c.p_min,
            0.0,
        ],
        [
            194.0 * c.delta * l2 / (1.0 - s2),
            169.0 * l2 / (c.pi_min * (1.0 - s2)),
            110.0 / (3.0 * c.pi_min * (1.0 - s2)),
            0.25 * (3.0 + s2),
        ],
    ]
}

/// The decaying input matrix at iteration `k`: only the first column is
/// nonzero and every entry carries the factor `T sigma_a^k`.
pub fn build_g_k(c: &TheoryConstants, alpha: f64, k: u32) -> [[f64; 4]; 4] {
    let s2 = c.sigma_a * c.sigma_a;
    let l2 = c.lipschitz * c.lipschitz;
    let decay = c.t_const * c.sigma_a.powi(k as i32);
    let mut g = [[0.0; 4]; 4];
    g[1][0] = 2.0 * c.delta * alpha * l2 / c.mu * decay;
    g[2][0] = 2.0 * c.p_max * c.d2 * l2 * decay;
    g[3][0] = 194.0 * l2 * c.delta * c.delta / (c.pi_min * (1.0 - s2)) * decay;
    g
}

/// Spectral radius of a small dense matrix by scaled repeated squaring:
/// `rho = lim ||A^k||^(1/k)` along `k = 2^j`, with every squaring
/// renormalized so nothing over- or underflows. Sixty-four squarings put
/// the polynomial-growth error below 1e-16 even for defective matrices.
pub fn spectral_radius_dense(a: &[f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut buf = vec![0.0; n * n];
    let mut log_scale = 0.0f64;
    const SQUARINGS: usize = 64;
    for _ in 0..SQUARINGS {
        let s = linalg::frobenius(&m);
        if s == 0.0 {
            return 0.0;
        }
        if !s.is_finite() {
            return f64::INFINITY;
        }
        for v in m.iter_mut() {
            *v /= s;
        }
        buf.fill(0.0);
        linalg::mat_mul_square(&m, &m, n, &mut buf);
        std::mem::swap(&mut m, &mut buf);
        log_scale = 2.0 * (log_scale + s.ln());
    }
    let k = (SQUARINGS as f64).exp2();
    ((log_scale + linalg::frobenius(&m).ln()) / k).exp()
}

/// Spectral radius of the 4x4 error-system matrix.
pub fn spectral_radius(h: &[[f64; 4]; 4]) -> f64 {
    let flat: Vec<f64> = h.iter().flatten().copied().collect();
    spectral_radius_dense(&flat, 4)
}

/// The admissible constant step-size:
/// `min( (1-sigma) p_min / (6 mu), (1-sigma)^2 p_min / (480 delta L Q p_max) )`.
pub fn theorem_step_bound(c: &TheoryConstants) -> f64 {
    let gap = 1.0 - c.sigma_a;
    let first = gap * c.p_min / (6.0 * c.mu);
    let second = gap * gap * c.p_min / (480.0 * c.delta * c.lipschitz * c.cond_q * c.p_max);
    first.min(second)
}

/// The step hypothesis under which the error-system inequality is derived:
/// `(1 - sigma^2) sqrt(p_min) / (28 L Q delta sqrt(p_max))`.
pub fn prop1_step_hypothesis(c: &TheoryConstants) -> f64 {
    (1.0 - c.sigma_a * c.sigma_a) * c.p_min.sqrt()
        / (28.0 * c.lipschitz * c.cond_q * c.delta * c.p_max.sqrt())
}

/// Iteration-count estimate for an epsilon-accurate solution, with the
/// O(.) constant set to 1 (an order estimate, not a guarantee):
/// `max( 1/((1-sigma) p_min), delta Q^2 p_max / ((1-sigma)^2 p_min) ) ln(1/eps)`.
pub fn iteration_complexity_estimate(c: &TheoryConstants, epsilon: f64) -> f64 {
    let gap = 1.0 - c.sigma_a;
    let first = 1.0 / (gap * c.p_min);
    let second = c.delta * c.cond_q * c.cond_q * c.p_max / (gap * gap * c.p_min);
    first.max(second) * (1.0 / epsilon).ln()
}

/// Outcome of the weighted-norm stability check at one step-size.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub alpha: f64,
    pub h_matrix: [[f64; 4]; 4],
    /// Independently computed spectral radius of the matrix.
    pub rho: f64,
    /// `eta = 1 - mu alpha / 4`.
    pub eta: f64,
    /// Weight vector from the certificate statement.
    pub theta_statement: [f64; 4],
    /// Weight vector the derivation actually picks (the two differ; both
    /// are checked, neither is assumed correct).
    pub theta_proof: [f64; 4],
    pub statement_ok: bool,
    pub proof_ok: bool,
    /// Some weight vector certifies `H theta <= eta theta` elementwise.
    /// When true, `rho <= eta` is guaranteed. Feasibility of the published
    /// weight vectors degrades with the agent count, so this flag can stay
    /// false even for step-sizes with a provably stable system matrix.
    pub elementwise_ok: bool,
    /// The step-size gate: `alpha` lies inside the admissible range of the
    /// convergence theorem. The sharper hypothesis from the error-system
    /// derivation is reported separately as a warning flag only.
    pub admissible: bool,
    pub within_theorem_bound: bool,
    pub within_prop1_hypothesis: bool,
}

fn dominates(h: &[[f64; 4]; 4], theta: &[f64; 4], eta: f64) -> bool {
    (0..4).all(|r| {
        let lhs: f64 = (0..4).map(|c| h[r][c] * theta[c]).sum();
        lhs <= eta * theta[r]
    })
}

/// Evaluates `H_alpha theta <= eta theta` for both candidate weight
/// vectors and reports the spectral radius alongside. Pure report: an
/// inadmissible step-size is not an error.
pub fn check_stability_certificate(c: &TheoryConstants, alpha: f64) -> CertificateReport {
    let h = build_h_alpha(c, alpha);
    let eta = 1.0 - 0.25 * c.mu * alpha;
    let rho = spectral_radius(&h);
    let q2 = c.cond_q * c.cond_q;
    let l2 = c.lipschitz * c.lipschitz;
    let gap2 = 1.0 - c.sigma_a * c.sigma_a;
    let ratio = c.p_max / c.p_min;
    let theta_statement = [
        1.0,
        9.0 * c.pi_max * c.delta * q2,
        60.0 * c.pi_max * c.delta * l2 * q2 * ratio,
        20165.0 * c.p_max * c.theta_ratio * c.delta * l2 * q2 / (c.p_min * gap2 * gap2),
    ];
    let theta_proof = [
        1.0,
        9.0 * c.pi_max * c.delta * q2,
        22.0 * c.m as f64 * c.pi_max * c.delta * l2 * q2 * ratio,
        25300.0 * c.p_max * c.theta_ratio * c.delta * l2 * q2 / (c.p_min * gap2 * gap2),
    ];
    let statement_ok = alpha > 0.0 && dominates(&h, &theta_statement, eta);
    let proof_ok = alpha > 0.0 && dominates(&h, &theta_proof, eta);
    let elementwise_ok = statement_ok || proof_ok;
    let within_theorem_bound = alpha > 0.0 && alpha <= theorem_step_bound(c);
    CertificateReport {
        alpha,
        h_matrix: h,
        rho,
        eta,
        theta_statement,
        theta_proof,
        statement_ok,
        proof_ok,
        elementwise_ok,
        admissible: within_theorem_bound,
        within_theorem_bound,
        within_prop1_hypothesis: alpha > 0.0 && alpha <= prop1_step_hypothesis(c),
    }
}
