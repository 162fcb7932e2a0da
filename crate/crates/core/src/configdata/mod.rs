//! Configuration data on `W = CP^1`: the local rules, the measures `μ³`, `μ⁴` and the
//! transition kernels `ν_{(a,b,c)}` built from an equivariant family.
//!
//! `μ³` has density `ρ₃ = Π p_β` with respect to `dA³` and is Möbius-invariant, hence of
//! infinite mass. The root sampler restricts it to triples whose barycenter lies in the
//! closed hyperbolic ball of radius `window` about `j`.

pub mod chain;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cp1::{cross_ratio, im_sign, in_o3, o4_verdict, CP1Point, Perm4, SignConvention, Verdict};
use crate::error::{Error, Result};
use crate::h3measure::{barycenter, log_rho3_with, EquivariantFamily, Family, H3Point};

pub use chain::{connect, validate_chain, Chain, ChainValidation, EndConvention, StepRule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Raw,
    Sym,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Raw => "raw",
            Mode::Sym => "sym",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Mode::Raw),
            "sym" => Ok(Mode::Sym),
            _ => Err(Error::InvalidConfig(format!("mode must be raw or sym, got {s:?}"))),
        }
    }
}

/// The abstract data `(W, O₃, O₄)` for `W = CP^1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfigData {
    pub conv: SignConvention,
}

impl ConfigData {
    pub fn new(conv: SignConvention) -> Self {
        Self { conv }
    }

    pub fn in_o3(&self, t: &[CP1Point; 3]) -> bool {
        in_o3(&t[0], &t[1], &t[2])
    }

    pub fn o4(&self, q: &[CP1Point; 4]) -> Verdict {
        o4_verdict(&q[0], &q[1], &q[2], &q[3], self.conv)
    }

    pub fn in_o4(&self, q: &[CP1Point; 4]) -> bool {
        self.o4(q).holds()
    }

    /// `O₃` is invariant under cyclic rotation.
    pub fn lambda3_invariant(&self, t: &[CP1Point; 3]) -> bool {
        let r = [t[1], t[2], t[0]];
        self.in_o3(t) == self.in_o3(&r)
    }

    /// `O₄` is invariant under reversal `(a,b,c,d) ↦ (d,c,b,a)`.
    pub fn lambda4_invariant(&self, q: &[CP1Point; 4]) -> bool {
        self.o4(q) == self.o4(&Perm4::REVERSAL.apply(q))
    }
}

/// Sampler settings shared by the kernels and the root chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub root_burn_in: usize,
    pub root_thin: usize,
    /// Thinning of the joint quadruple chain, which mixes slower than the root chain.
    pub quad_thin: usize,
    pub kernel_burn_in: usize,
    pub kernel_thin: usize,
    /// Pseudo-marginal importance samples for the sym-mode `μ³` marginal.
    pub k_pseudo: usize,
    pub reject_budget: usize,
    /// Radius of the barycenter window normalizing `μ³`.
    pub window: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            root_burn_in: 200,
            root_thin: 10,
            quad_thin: 40,
            kernel_burn_in: 16,
            kernel_thin: 4,
            k_pseudo: 64,
            reject_budget: 4096,
            window: 1.0,
        }
    }
}

/// Counters from one kernel or root-chain run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McmcStats {
    pub proposals: usize,
    pub accepted: usize,
    /// Largest `|log π(x)q(x→y)α(x,y) − log π(y)q(y→x)α(y,x)|` seen.
    pub max_balance_residual: f64,
}

impl McmcStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn record(&mut self, log_fwd: f64, log_bwd: f64, log_alpha_fwd: f64, log_alpha_bwd: f64) {
        if log_fwd.is_finite() && log_bwd.is_finite() {
            let r = ((log_fwd + log_alpha_fwd) - (log_bwd + log_alpha_bwd)).abs();
            let scale = log_fwd.abs().max(log_bwd.abs()).max(1.0);
            self.max_balance_residual = self.max_balance_residual.max(r / scale);
        }
    }
}

/// Measured configuration data: `μ³`, `μ⁴` and the kernels for one family and mode.
#[derive(Clone, Copy, Debug)]
pub struct MeasuredData {
    pub family: Family,
    pub data: ConfigData,
    pub mode: Mode,
    pub params: SamplerParams,
}

fn log_mean_exp(mut v: Vec<f64>) -> f64 {
    // sorted so the result does not depend on term order
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.last().copied().unwrap_or(f64::NEG_INFINITY);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}

fn point_key(p: &CP1Point) -> [f64; 4] {
    let (z, w) = p.homogeneous();
    [z.re, z.im, w.re, w.im]
}

fn sort_with_parity(q: &[CP1Point; 4]) -> ([CP1Point; 4], bool) {
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&i, &j| {
        let (a, b) = (point_key(&q[i]), point_key(&q[j]));
        a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let p = Perm4(idx);
    (p.apply(q), p.is_even())
}

impl MeasuredData {
    pub fn new(family: Family, conv: SignConvention, mode: Mode, params: SamplerParams) -> Self {
        Self {
            family,
            data: ConfigData::new(conv),
            mode,
            params,
        }
    }

    pub fn visual(mode: Mode) -> Self {
        Self::new(Family::default(), SignConvention::Negative, mode, SamplerParams::default())
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..*self }
    }

    pub fn log_rho3(&self, a: &CP1Point, b: &CP1Point, c: &CP1Point) -> f64 {
        log_rho3_with(&self.family, a, b, c).unwrap_or(f64::NEG_INFINITY)
    }

    // Σ over all four points of log p_β, β the barycenter of the first three
    fn log_sum_at(&self, beta: &H3Point, q: &[CP1Point; 4]) -> f64 {
        q.iter().map(|x| self.family.log_density(beta, x)).sum()
    }

    /// `log ρ₃(a,b,c) + log p_{β(a,b,c)}(d)` on `O₄`, `−∞` elsewhere.
    pub fn log_rho4_raw(&self, q: &[CP1Point; 4]) -> f64 {
        if !self.data.in_o4(q) {
            return f64::NEG_INFINITY;
        }
        match barycenter(&q[0], &q[1], &q[2]) {
            Ok(beta) => self.log_sum_at(&beta, q),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Log of the mean of `exp ∘ log_rho4_raw` over the twelve even permutations.
    ///
    /// Evaluated on a canonically sorted copy of `q`, so it is bitwise invariant under
    /// even permutations of its input.
    pub fn log_rho4_sym(&self, q: &[CP1Point; 4]) -> f64 {
        let (s, even) = sort_with_parity(q);
        let terms: Vec<f64> = Perm4::even()
            .into_iter()
            .map(|p| {
                let x = p.apply(&s);
                let inside = match (self.data.conv, even) {
                    (SignConvention::Nonzero, _) => self.data.in_o4(&x),
                    // odd sorting flips the sign of Im
                    (SignConvention::Negative, true) => self.data.in_o4(&x),
                    (SignConvention::Negative, false) => {
                        cross_ratio(&x[0], &x[1], &x[2], &x[3]).is_ok_and(|chi| im_sign(&chi) > 0)
                    }
                };
                if !inside {
                    return f64::NEG_INFINITY;
                }
                match barycenter(&x[0], &x[1], &x[2]) {
                    Ok(beta) => self.log_sum_at(&beta, &x),
                    Err(_) => f64::NEG_INFINITY,
                }
            })
            .collect();
        log_mean_exp(terms)
    }

    pub fn log_rho4(&self, q: &[CP1Point; 4]) -> f64 {
        match self.mode {
            Mode::Raw => self.log_rho4_raw(q),
            Mode::Sym => self.log_rho4_sym(q),
        }
    }

    fn triple_label(a: &CP1Point, b: &CP1Point, c: &CP1Point) -> String {
        format!("({a}, {b}, {c})")
    }

    /// Exact draw from `μ_β` restricted to `D(a,b,c)`.
    pub fn kernel_raw<R: Rng + ?Sized>(&self, a: &CP1Point, b: &CP1Point, c: &CP1Point, rng: &mut R) -> Result<CP1Point> {
        let beta = barycenter(a, b, c)?;
        for _ in 0..self.params.reject_budget {
            let d = self.family.sample(&beta, rng);
            if self.data.in_o4(&[*a, *b, *c, d]) {
                return Ok(d);
            }
        }
        Err(Error::RejectionBudgetExceeded {
            budget: self.params.reject_budget,
            triple: Self::triple_label(a, b, c),
        })
    }

    /// Independence Metropolis chain for `exp ∘ log_rho4_sym(a,b,c,·)` with proposal `μ_β`,
    /// started from a raw draw. Returns `n` states spaced by the thinning interval.
    pub fn kernel_sym_chain<R: Rng + ?Sized>(
        &self,
        a: &CP1Point,
        b: &CP1Point,
        c: &CP1Point,
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<CP1Point>, McmcStats)> {
        let beta = barycenter(a, b, c)?;
        let mut x = self.kernel_raw(a, b, c, rng)?;
        let log_pi = |d: &CP1Point| self.log_rho4_sym(&[*a, *b, *c, *d]);
        let log_q = |d: &CP1Point| self.family.log_density(&beta, d);
        let mut pi_x = log_pi(&x);
        if !pi_x.is_finite() {
            return Err(Error::NonFiniteDensity(format!("sym density at {}", Self::triple_label(a, b, c))));
        }
        let mut q_x = log_q(&x);
        let mut stats = McmcStats::default();
        let mut out = Vec::with_capacity(n);
        let steps = self.params.kernel_burn_in + n.saturating_sub(1) * self.params.kernel_thin.max(1) + 1;
        for step in 0..steps {
            let y = self.family.sample(&beta, rng);
            let (pi_y, q_y) = (log_pi(&y), log_q(&y));
            let log_alpha = if pi_y == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                ((pi_y - q_y) - (pi_x - q_x)).min(0.0)
            };
            let log_alpha_back = ((pi_x - q_x) - (pi_y - q_y)).min(0.0);
            stats.record(pi_x + q_y, pi_y + q_x, log_alpha, log_alpha_back);
            stats.proposals += 1;
            if log_alpha.is_finite() && rng.random::<f64>().ln() < log_alpha {
                x = y;
                pi_x = pi_y;
                q_x = q_y;
                stats.accepted += 1;
            }
            if step >= self.params.kernel_burn_in && (step - self.params.kernel_burn_in) % self.params.kernel_thin.max(1) == 0 {
                out.push(x);
            }
        }
        out.truncate(n);
        Ok((out, stats))
    }

    /// One draw from the transition kernel `ν_{(a,b,c)}` of the current mode.
    pub fn kernel_sample<R: Rng + ?Sized>(&self, a: &CP1Point, b: &CP1Point, c: &CP1Point, rng: &mut R) -> Result<CP1Point> {
        if !in_o3(a, b, c) {
            return Err(Error::DegenerateTriple);
        }
        match self.mode {
            Mode::Raw => self.kernel_raw(a, b, c, rng),
            Mode::Sym => Ok(self.kernel_sym_chain(a, b, c, 1, rng)?.0[0]),
        }
    }

    pub fn in_window(&self, a: &CP1Point, b: &CP1Point, c: &CP1Point) -> bool {
        barycenter(a, b, c).is_ok_and(|beta| beta.distance(&H3Point::j()) <= self.params.window)
    }

    /// Log of the unnormalized root target at `t`; in sym mode a fresh pseudo-marginal estimate.
    pub fn log_root_target<R: Rng + ?Sized>(&self, t: &[CP1Point; 3], rng: &mut R) -> f64 {
        let [a, b, c] = t;
        if !in_o3(a, b, c) || !self.in_window(a, b, c) {
            return f64::NEG_INFINITY;
        }
        match self.mode {
            Mode::Raw => self.log_rho3(a, b, c),
            Mode::Sym => {
                // m(a,b,c) = ∫ exp(log_rho4_sym(a,b,c,d)) dA(d), importance-sampled from μ_β
                let Ok(beta) = barycenter(a, b, c) else {
                    return f64::NEG_INFINITY;
                };
                let k = self.params.k_pseudo.max(1);
                let w: Vec<f64> = (0..k)
                    .map(|_| {
                        let d = self.family.sample(&beta, rng);
                        self.log_rho4_sym(&[*a, *b, *c, d]) - self.family.log_density(&beta, &d)
                    })
                    .collect();
                log_mean_exp(w)
            }
        }
    }

    /// Metropolis chain on triples with single-coordinate proposals from `μ_{β(current)}`.
    /// Returns `n` states after burn-in, spaced by the thinning interval.
    pub fn sample_roots<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<[CP1Point; 3]>, McmcStats)> {
        // (1, ω, ω²) has barycenter j
        let omega = |k: f64| CP1Point::finite(num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k / 3.0));
        let mut x = [omega(0.0), omega(1.0), omega(2.0)];
        let mut pi_x = self.log_root_target(&x, rng);
        if !pi_x.is_finite() {
            return Err(Error::NonFiniteDensity("root target at the initial triple".into()));
        }
        let mut beta_x = barycenter(&x[0], &x[1], &x[2])?;
        let mut stats = McmcStats::default();
        let thin = self.params.root_thin.max(1);
        let steps = self.params.root_burn_in + n.saturating_sub(1) * thin + 1;
        let mut out = Vec::with_capacity(n);
        for step in 0..steps {
            let i = rng.random_range(0..3);
            let mut y = x;
            y[i] = self.family.sample(&beta_x, rng);
            let pi_y = self.log_root_target(&y, rng);
            stats.proposals += 1;
            if pi_y.is_finite() {
                let beta_y = barycenter(&y[0], &y[1], &y[2])?;
                let q_fwd = self.family.log_density(&beta_x, &y[i]);
                let q_bwd = self.family.log_density(&beta_y, &x[i]);
                let log_alpha = ((pi_y + q_bwd) - (pi_x + q_fwd)).min(0.0);
                let log_alpha_back = ((pi_x + q_fwd) - (pi_y + q_bwd)).min(0.0);
                stats.record(pi_x + q_fwd, pi_y + q_bwd, log_alpha, log_alpha_back);
                if rng.random::<f64>().ln() < log_alpha {
                    x = y;
                    pi_x = pi_y;
                    beta_x = beta_y;
                    stats.accepted += 1;
                }
            }
            if step >= self.params.root_burn_in && (step - self.params.root_burn_in) % thin == 0 {
                out.push(x);
            }
        }
        out.truncate(n);
        Ok((out, stats))
    }

    /// Metropolis chain on quadruples targeting `exp ∘ log_rho4` with the first three
    /// points in the window. Dropping the last point should reproduce the root law.
    pub fn sample_quads<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<[CP1Point; 4]>, McmcStats)> {
        let omega = |k: f64| CP1Point::finite(num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k / 3.0));
        let (a, b, c) = (omega(0.0), omega(1.0), omega(2.0));
        let d = self.kernel_raw(&a, &b, &c, rng)?;
        let target = |q: &[CP1Point; 4]| {
            if self.in_window(&q[0], &q[1], &q[2]) {
                self.log_rho4(q)
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut x = [a, b, c, d];
        let mut pi_x = target(&x);
        if !pi_x.is_finite() {
            return Err(Error::NonFiniteDensity("joint target at the initial quadruple".into()));
        }
        let mut beta_x = barycenter(&x[0], &x[1], &x[2])?;
        let mut stats = McmcStats::default();
        let thin = self.params.quad_thin.max(1);
        let steps = self.params.root_burn_in + n.saturating_sub(1) * thin + 1;
        let mut out = Vec::with_capacity(n);
        for step in 0..steps {
            let i = rng.random_range(0..4);
            let mut y = x;
            y[i] = self.family.sample(&beta_x, rng);
            let pi_y = target(&y);
            stats.proposals += 1;
            if pi_y.is_finite() {
                let beta_y = barycenter(&y[0], &y[1], &y[2])?;
                let q_fwd = self.family.log_density(&beta_x, &y[i]);
                let q_bwd = self.family.log_density(&beta_y, &x[i]);
                let log_alpha = ((pi_y + q_bwd) - (pi_x + q_fwd)).min(0.0);
                let log_alpha_back = ((pi_x + q_fwd) - (pi_y + q_bwd)).min(0.0);
                stats.record(pi_x + q_fwd, pi_y + q_bwd, log_alpha, log_alpha_back);
                if rng.random::<f64>().ln() < log_alpha {
                    x = y;
                    pi_x = pi_y;
                    beta_x = beta_y;
                    stats.accepted += 1;
                }
            }
            if step >= self.params.root_burn_in && (step - self.params.root_burn_in) % thin == 0 {
                out.push(x);
            }
        }
        out.truncate(n);
        Ok((out, stats))
    }

    /// One root triple from a fresh chain.
    pub fn sample_root<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<[CP1Point; 3]> {
        Ok(self.sample_roots(1, rng)?.0[0])
    }

    /// Exact draw from the window-restricted `μ³` of the visual family: a Haar-random
    /// isometry applied to `(1, ω, ω²)`. Test oracle for [`Self::sample_roots`].
    pub fn exact_visual_root<R: Rng + ?Sized>(&self, rng: &mut R) -> [CP1Point; 3] {
        use crate::h3measure::{random_rotation, translation_from_j};
        use rand_distr::{Distribution, UnitSphere};
        // hyperbolic volume in the ball: radial density ∝ sinh²(r) on [0, R]
        let rmax = self.params.window;
        let r = loop {
            let r = rmax * rng.random::<f64>().cbrt();
            // proposal density ∝ r²; sinh²(r)/r² is increasing
            let ratio = if r > 0.0 { (r.sinh() / r).powi(2) / (rmax.sinh() / rmax).powi(2) } else { 0.0 };
            if rng.random::<f64>() < ratio {
                break r;
            }
        };
        let u: [f64; 3] = UnitSphere.sample(rng);
        let g = translation_from_j(r, u).compose(&random_rotation(rng));
        let w = |k: f64| CP1Point::finite(num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k / 3.0));
        [g.apply(&w(0.0)), g.apply(&w(1.0)), g.apply(&w(2.0))]
    }
}
