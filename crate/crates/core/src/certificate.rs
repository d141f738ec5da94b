//! Probability bounds for the safety and invariance problems.
//!
//! Safety (`φ₁`, one output `i`): the probability that some `x ∈ T` has
//! `z_i(x*) − z_i(x) > δ` is at most `exp(−η²/(2ξ̂))` with
//! `η = δ − (sup μ°_i + E)`.
//!
//! Invariance (`φ₂`, L1 over all outputs): the probability that some `x ∈ T`
//! has `‖z(x*) − z(x)‖₁ > δ` is at most `2 Σ_i exp(−η̄_i²/(2ξ̂_i))` with
//! `η̄_i = (δ − sup ‖μ°‖₁)/n − E_i`.
//!
//! `E` is the Dudley bound on the expected supremum of the centred
//! difference process and `ξ̂` the bound on its variance over `T`. Whenever
//! an `η` is not positive the bound degrades to the trivial value 1.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    lipschitz_bound, mu_o_l1_sup, mu_o_sup, sup_d_bound, variance_sup_bounds, BnBConfig,
};
use crate::domain::InputBox;
use crate::dudley::{dudley_bound, DEFAULT_QUAD_TOL};
use crate::error::{check_dim, Error, Result};
use crate::gp::TrainedGP;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Phi1,
    Phi2,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Phi1 => "phi1",
            Mode::Phi2 => "phi2",
        }
    }
}

/// What is being certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Safety of one output.
    Component(usize),
    /// Invariance in the L1 norm over all outputs.
    L1,
}

impl Target {
    pub fn mode(&self) -> Mode {
        match self {
            Target::Component(_) => Mode::Phi1,
            Target::L1 => Mode::Phi2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateRequest {
    pub x_star: Vec<f64>,
    pub region: InputBox,
    pub delta: f64,
    pub target: Target,
    pub quad_tol: f64,
}

impl CertificateRequest {
    pub fn new(x_star: Vec<f64>, region: InputBox, delta: f64, target: Target) -> Result<Self> {
        let req = CertificateRequest {
            x_star,
            region,
            delta,
            target,
            quad_tol: DEFAULT_QUAD_TOL,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.region.dim(), self.x_star.len())?;
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::input(format!("delta must be finite and > 0, got {}", self.delta)));
        }
        if !self.region.contains(&self.x_star) {
            return Err(Error::input("test point must lie inside the region"));
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::input("quad_tol must be > 0"));
        }
        Ok(())
    }
}

/// Everything in a certificate that does not depend on `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionConstants {
    pub mode: Mode,
    pub outputs: usize,
    /// `sup μ°_i` (safety) or `sup ‖μ°‖₁` (invariance), upper bound.
    pub sup_mean: f64,
    /// Upper bound on the supremum of the difference-process variance.
    pub xi_hat: f64,
    #[serde(rename = "K", with = "crate::float_serde")]
    pub lipschitz: f64,
    pub sup_d: f64,
    #[serde(with = "crate::float_serde")]
    pub dudley: f64,
    /// Longest side of the region.
    pub side: f64,
    /// Number of sides with positive width.
    pub effective_dim: usize,
    /// All branch-and-bound searches met their tolerance.
    pub converged: bool,
}

/// Contribution of one output to an invariance certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTerm {
    pub output: usize,
    pub eta: f64,
    pub xi_hat: f64,
    #[serde(with = "crate::float_serde")]
    pub dudley: f64,
    #[serde(rename = "K", with = "crate::float_serde")]
    pub lipschitz: f64,
    /// `exp(−η̄_i²/(2ξ̂_i))`, or 1 when `η̄_i ≤ 0`.
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: Mode,
    pub delta: f64,
    pub phi_hat: f64,
    /// `ln φ̂`, free of underflow.
    #[serde(with = "crate::float_serde")]
    pub log_phi_hat: f64,
    /// `η` for safety; the smallest `η̄_i` for invariance.
    pub eta: f64,
    /// Every required `η` is positive.
    pub eta_positive: bool,
    pub xi_hat: f64,
    #[serde(with = "crate::float_serde")]
    pub dudley: f64,
    #[serde(rename = "K", with = "crate::float_serde")]
    pub lipschitz: f64,
    pub sup_d: f64,
    pub sup_mean: f64,
    /// The bound carries no information (`phi_hat == 1`).
    pub vacuous: bool,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentTerm>,
}

/// Compute the `δ`-independent constants for `target` on `region`.
pub fn region_constants(
    gp: &TrainedGP,
    x_star: &[f64],
    region: &InputBox,
    target: Target,
    quad_tol: f64,
    cfg: &BnBConfig,
) -> Result<RegionConstants> {
    gp.check_point(x_star)?;
    check_dim(gp.input_dim(), region.dim())?;
    let (sup_mean, output) = match target {
        Target::Component(i) => {
            gp.check_output(i)?;
            (mu_o_sup(gp, x_star, region, i, cfg)?, i)
        }
        Target::L1 => (mu_o_l1_sup(gp, x_star, region, cfg)?, 0),
    };
    // outputs share the kernel, so one variance bound serves all of them
    let xi = variance_sup_bounds(gp, x_star, region, output, cfg)?;
    let lipschitz = lipschitz_bound(gp.spec());
    let sup_d = sup_d_bound(xi.upper);
    let side = region.max_side();
    let effective_dim = region.effective_dim();
    let dudley = dudley_bound(lipschitz, side, effective_dim, sup_d, quad_tol)?;
    Ok(RegionConstants {
        mode: target.mode(),
        outputs: gp.output_dim(),
        sup_mean,
        xi_hat: xi.upper,
        lipschitz,
        sup_d,
        dudley,
        side,
        effective_dim,
        converged: xi.converged,
    })
}

impl RegionConstants {
    /// The certificate at threshold `delta`.
    pub fn certificate(&self, delta: f64) -> Certificate {
        let xi = self.xi_hat;
        let log_tail = |eta: f64| -> f64 {
            if !(eta > 0.0) {
                0.0
            } else if xi == 0.0 {
                f64::NEG_INFINITY
            } else {
                (-eta * eta / (2.0 * xi)).min(0.0)
            }
        };
        let (eta, eta_positive, log_phi, components) = match self.mode {
            Mode::Phi1 => {
                let eta = delta - (self.sup_mean + self.dudley);
                (eta, eta > 0.0, log_tail(eta), Vec::new())
            }
            Mode::Phi2 => {
                let n = self.outputs as f64;
                let logs: Vec<f64> = (0..self.outputs)
                    .map(|_| log_tail((delta - self.sup_mean) / n - self.dudley))
                    .collect();
                let components: Vec<ComponentTerm> = logs
                    .iter()
                    .enumerate()
                    .map(|(i, l)| ComponentTerm {
                        output: i,
                        eta: (delta - self.sup_mean) / n - self.dudley,
                        xi_hat: xi,
                        dudley: self.dudley,
                        lipschitz: self.lipschitz,
                        term: l.exp(),
                    })
                    .collect();
                let eta = components.iter().map(|c| c.eta).fold(f64::INFINITY, f64::min);
                let positive = components.iter().all(|c| c.eta > 0.0);
                let log_phi = if positive {
                    (std::f64::consts::LN_2 + log_sum_exp(&logs)).min(0.0)
                } else {
                    0.0
                };
                (eta, positive, log_phi, components)
            }
        };
        let phi_hat = log_phi.exp();
        Certificate {
            mode: self.mode,
            delta,
            phi_hat,
            log_phi_hat: log_phi,
            eta,
            eta_positive,
            xi_hat: xi,
            dudley: self.dudley,
            lipschitz: self.lipschitz,
            sup_d: self.sup_d,
            sup_mean: self.sup_mean,
            vacuous: phi_hat >= 1.0,
            converged: self.converged,
            components,
        }
    }

    /// Tighten with the constants of a region containing this one.
    fn tighten_with(&mut self, outer: &RegionConstants, quad_tol: f64) -> Result<()> {
        self.sup_mean = self.sup_mean.min(outer.sup_mean);
        if outer.xi_hat < self.xi_hat {
            self.xi_hat = outer.xi_hat;
            self.sup_d = sup_d_bound(self.xi_hat);
            self.dudley = dudley_bound(self.lipschitz, self.side, self.effective_dim, self.sup_d, quad_tol)?;
        }
        self.dudley = self.dudley.min(outer.dudley);
        Ok(())
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Certify `req`, dispatching on its target.
pub fn certify(gp: &TrainedGP, req: &CertificateRequest, cfg: &BnBConfig) -> Result<Certificate> {
    req.validate()?;
    let c = region_constants(gp, &req.x_star, &req.region, req.target, req.quad_tol, cfg)?;
    Ok(c.certificate(req.delta))
}

/// Safety certificate `φ̂₁`.
pub fn phi1_certificate(gp: &TrainedGP, req: &CertificateRequest, cfg: &BnBConfig) -> Result<Certificate> {
    if !matches!(req.target, Target::Component(_)) {
        return Err(Error::input("safety certificates need a single output index"));
    }
    certify(gp, req, cfg)
}

/// Invariance certificate `φ̂₂`.
pub fn phi2_certificate(gp: &TrainedGP, req: &CertificateRequest, cfg: &BnBConfig) -> Result<Certificate> {
    if req.target != Target::L1 {
        return Err(Error::input("invariance certificates use the L1 target"));
    }
    certify(gp, req, cfg)
}

/// One `(γ, δ)` cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub gamma: f64,
    pub delta: f64,
    pub result: std::result::Result<Certificate, String>,
}

/// Certificates on the grid `gammas × deltas`, ordered `γ`-major.
///
/// Constants are computed once per `γ`. When one region contains another,
/// the inner region's constants are capped by the outer one's, which keeps
/// `φ̂` monotone in `γ` for nested regions. A failing `γ` marks its whole
/// row as failed and the sweep moves on.
pub fn certificate_sweep(
    gp: &TrainedGP,
    x_star: &[f64],
    gammas: &[f64],
    region_for: impl Fn(f64) -> Result<InputBox>,
    deltas: &[f64],
    target: Target,
    quad_tol: f64,
    cfg: &BnBConfig,
) -> Result<Vec<SweepCell>> {
    if gammas.is_empty() || deltas.is_empty() {
        return Err(Error::input("gamma and delta lists must be non-empty"));
    }
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::input(format!("delta must be finite and > 0, got {d}")));
    }
    let regions: Vec<std::result::Result<InputBox, String>> = gammas
        .iter()
        .map(|g| region_for(*g).map_err(|e| e.to_string()))
        .collect();
    let mut constants: Vec<std::result::Result<RegionConstants, String>> = regions
        .iter()
        .map(|r| {
            let r = r.as_ref().map_err(Clone::clone)?;
            region_constants(gp, x_star, r, target, quad_tol, cfg).map_err(|e| e.to_string())
        })
        .collect();

    for i in 0..gammas.len() {
        for j in 0..gammas.len() {
            if i == j {
                continue;
            }
            let (Ok(ri), Ok(rj)) = (&regions[i], &regions[j]) else {
                continue;
            };
            if !rj.contains_box(ri) {
                continue;
            }
            let Ok(outer) = constants[j].clone() else {
                continue;
            };
            if let Ok(inner) = &mut constants[i] {
                inner.tighten_with(&outer, quad_tol)?;
            }
        }
    }

    let mut cells = Vec::with_capacity(gammas.len() * deltas.len());
    for (g, c) in gammas.iter().zip(&constants) {
        for &d in deltas {
            cells.push(SweepCell {
                gamma: *g,
                delta: d,
                result: c.as_ref().map(|c| c.certificate(d)).map_err(Clone::clone),
            });
        }
    }
    Ok(cells)
}
