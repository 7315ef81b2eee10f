//! Model parameters and coefficient functions.
//!
//! [`ModelParams`] bundles every biological and economic constant together
//! with the closed-form coefficient family used throughout:
//!
//! - growth `g(E, l) = K (L_inf - l) / (1 + alpha E)` (crowding-damped
//!   von Bertalanffy),
//! - natural mortality `mu(E, l) = mu0 + mu1 E`,
//! - crowding kernel `chi(l) = chi l^2`,
//! - price `c(l) = c0 l^3`,
//! - fertility `m(l) = m0 (l / lm)^3` for `l >= l_mat`, zero below.
//!
//! Solvers access the coefficients through the [`Coefficients`] trait, so
//! alternative families (e.g. constant-coefficient test oracles) can be
//! swapped in without touching the numerics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// All model constants. Immutable after validation; every coefficient
/// evaluation is a pure function of the fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Entry (minimum) body length, cm.
    pub l0: f64,
    /// Upper boundary length, cm.
    pub lm: f64,
    /// Asymptotic length, cm. Must exceed `lm` so growth stays positive.
    #[serde(rename = "L_inf")]
    pub l_inf: f64,
    /// Brody growth coefficient, 1/yr.
    #[serde(rename = "K")]
    pub k: f64,
    /// Crowding sensitivity of growth, 1/individual.
    pub alpha: f64,
    /// Baseline natural mortality, 1/yr.
    pub mu0: f64,
    /// Crowding sensitivity of mortality, 1/(yr·individual).
    pub mu1: f64,
    /// Crowding kernel coefficient, 1/cm^2.
    pub chi: f64,
    /// Price coefficient, $/cm^3.
    pub c0: f64,
    /// Fertility scale, 1/yr.
    pub m0: f64,
    /// Maturation length, cm; fertility vanishes below it.
    pub l_mat: f64,
    /// Exogenous recruitment flux at `l0`, individuals/yr.
    pub p: f64,
    /// Economic discount rate, 1/yr.
    pub r: f64,
    /// Maximum harvest intensity, 1/yr.
    pub u_max: f64,
    /// Simulation horizon, yr.
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for ModelParams {
    /// Reference calibration for a managed gadoid fishery; the built-in
    /// scenarios and the CLI defaults all start from this set.
    fn default() -> Self {
        ModelParams {
            l0: 20.0,
            lm: 130.0,
            l_inf: 135.3,
            k: 0.17,
            alpha: 5e-6,
            mu0: 0.20,
            mu1: 1e-7,
            chi: 1e-4,
            c0: 1e-5,
            m0: 2.0,
            l_mat: 50.0,
            p: 5e4,
            r: 0.05,
            u_max: 0.5,
            horizon: 60.0,
        }
    }
}

/// Rejected input to a checked coefficient evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("length {l} outside the modeled range [{l0}, {lm}]")]
    LengthOutOfRange { l: f64, l0: f64, lm: f64 },
    #[error("crowding index must be non-negative, got {e}")]
    NegativeCrowding { e: f64 },
}

/// Severity of a parameter-validation finding. Warnings flag degenerate but
/// representable configurations (e.g. zero inflow); errors violate the
/// standing assumptions outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

/// One violated condition, tied to the offending field.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
    pub severity: Severity,
}

/// Complete outcome of parameter validation. Violations are data, not
/// exceptions: the caller gets every finding at once.
#[derive(Debug, Clone, Default)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    /// True when no error-severity violation is present (warnings allowed).
    pub fn is_valid(&self) -> bool {
        self.violations
            .iter()
            .all(|v| v.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }
}

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(
                f,
                "{}: {} ({})",
                match v.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                },
                v.message,
                v.field
            )?;
        }
        Ok(())
    }
}

impl ModelParams {
    fn check_length(&self, l: f64) -> Result<(), DomainError> {
        if l < self.l0 || l > self.lm || l.is_nan() {
            return Err(DomainError::LengthOutOfRange {
                l,
                l0: self.l0,
                lm: self.lm,
            });
        }
        Ok(())
    }

    fn check_crowding(e: f64) -> Result<(), DomainError> {
        if e < 0.0 || e.is_nan() {
            return Err(DomainError::NegativeCrowding { e });
        }
        Ok(())
    }

    /// Growth rate `g(E, l)`, cm/yr; rejects out-of-domain input.
    pub fn growth_rate(&self, e: f64, l: f64) -> Result<f64, DomainError> {
        Self::check_crowding(e)?;
        self.check_length(l)?;
        Ok(self.growth(e, l))
    }

    /// Natural mortality `mu(E, l)`, 1/yr; rejects out-of-domain input.
    pub fn natural_mortality(&self, e: f64, l: f64) -> Result<f64, DomainError> {
        Self::check_crowding(e)?;
        self.check_length(l)?;
        Ok(self.mortality(e, l))
    }

    /// Crowding kernel weight `chi(l)`; rejects out-of-domain input.
    pub fn crowding_kernel(&self, l: f64) -> Result<f64, DomainError> {
        self.check_length(l)?;
        Ok(self.kernel(l))
    }

    /// Market value `c(l)` of one individual, $; rejects out-of-domain input.
    pub fn price_at(&self, l: f64) -> Result<f64, DomainError> {
        self.check_length(l)?;
        Ok(self.price(l))
    }

    /// Fertility `m(l)`, 1/yr; rejects out-of-domain input.
    pub fn fertility_at(&self, l: f64) -> Result<f64, DomainError> {
        self.check_length(l)?;
        Ok(self.fertility(l))
    }

    /// Checks every structural invariant and returns the complete list of
    /// findings. Zero inflow is reported as a warning: the closure equation
    /// then degenerates to the trivial root.
    pub fn validate(&self) -> Validation {
        let mut v = Vec::new();
        let err = |field, message: String| Violation {
            field,
            message,
            severity: Severity::Error,
        };

        let fields: [(&'static str, f64); 15] = [
            ("l0", self.l0),
            ("lm", self.lm),
            ("L_inf", self.l_inf),
            ("K", self.k),
            ("alpha", self.alpha),
            ("mu0", self.mu0),
            ("mu1", self.mu1),
            ("chi", self.chi),
            ("c0", self.c0),
            ("m0", self.m0),
            ("l_mat", self.l_mat),
            ("p", self.p),
            ("r", self.r),
            ("u_max", self.u_max),
            ("T", self.horizon),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                v.push(err(name, format!("{name} must be finite, got {value}")));
            }
        }

        if self.l0 >= self.lm {
            v.push(err(
                "lm",
                format!("l0 < lm required, got l0={} lm={}", self.l0, self.lm),
            ));
        }
        if self.lm >= self.l_inf {
            v.push(err(
                "L_inf",
                format!(
                    "lm < L_inf required so growth stays positive, got lm={} L_inf={}",
                    self.lm, self.l_inf
                ),
            ));
        }
        for (name, value) in [
            ("K", self.k),
            ("chi", self.chi),
            ("c0", self.c0),
            ("r", self.r),
            ("u_max", self.u_max),
            ("T", self.horizon),
        ] {
            if value <= 0.0 {
                v.push(err(
                    name,
                    format!("{name} must be strictly positive, got {value}"),
                ));
            }
        }
        for (name, value) in [
            ("mu0", self.mu0),
            ("mu1", self.mu1),
            ("alpha", self.alpha),
            ("m0", self.m0),
        ] {
            if value < 0.0 {
                v.push(err(
                    name,
                    format!("{name} must be non-negative, got {value}"),
                ));
            }
        }
        if !(self.l0 <= self.l_mat && self.l_mat <= self.lm) {
            v.push(err(
                "l_mat",
                format!("l0 <= l_mat <= lm required, got l_mat={}", self.l_mat),
            ));
        }
        if self.p < 0.0 {
            v.push(err("p", format!("p must be non-negative, got {}", self.p)));
        } else if self.p == 0.0 {
            v.push(Violation {
                field: "p",
                message: "p = 0: stationary inflow is degenerate, closure root collapses to E = 0"
                    .into(),
                severity: Severity::Warning,
            });
        }

        Validation { violations: v }
    }

    /// Consuming variant of [`validate`](Self::validate): returns the
    /// parameters unchanged when valid.
    pub fn validated(self) -> Result<Self, Validation> {
        let v = self.validate();
        if v.is_valid() {
            Ok(self)
        } else {
            Err(v)
        }
    }
}

/// The coefficient family seen by every solver.
///
/// Implementations must be pure: same inputs, same outputs, no interior
/// mutability. Preconditions (`e >= 0`, `l0 <= l <= lm`) are the caller's
/// responsibility; [`ModelParams`] offers checked wrappers on top.
pub trait Coefficients: Sync {
    /// Growth rate `g(E, l) > 0`, cm/yr.
    fn growth(&self, e: f64, l: f64) -> f64;

    /// Natural mortality `mu(E, l) >= 0`, 1/yr.
    fn mortality(&self, e: f64, l: f64) -> f64;

    /// `∂g/∂E`, used by the nonlocal coupling diagnostic.
    fn growth_de(&self, e: f64, l: f64) -> f64;

    /// `∂mu/∂E`, used by the nonlocal coupling diagnostic.
    fn mortality_de(&self, e: f64, l: f64) -> f64;

    /// Crowding kernel weight `chi(l) >= 0`.
    fn kernel(&self, l: f64) -> f64;

    /// Market value `c(l) >= 0` of one individual, $.
    fn price(&self, l: f64) -> f64;

    /// Fertility `m(l) >= 0`, 1/yr.
    fn fertility(&self, l: f64) -> f64;

    /// Leftmost length with nonzero fertility, when fertility vanishes
    /// identically below some maturation size. Quadrature of the
    /// replacement integrand splits there to keep its order across the jump.
    fn fertility_support_start(&self) -> Option<f64> {
        None
    }

    /// Upper bound of the growth rate over `[l0, lm] x [0, e_upper]`,
    /// feeding the CFL restriction. The default scans a 65x65 sample grid;
    /// implementations with monotone structure should override analytically.
    fn max_growth(&self, l0: f64, lm: f64, e_upper: f64) -> f64 {
        scan_growth(self, l0, lm, e_upper, f64::max)
    }

    /// Lower bound of the growth rate over `[l0, lm]` at `E = 0`, used for
    /// the closure bracket. Same scanning fallback as [`max_growth`](Self::max_growth).
    fn min_growth_at_zero_crowding(&self, l0: f64, lm: f64) -> f64 {
        scan_growth(self, l0, lm, 0.0, f64::min)
    }
}

fn scan_growth<C: Coefficients + ?Sized>(
    coeffs: &C,
    l0: f64,
    lm: f64,
    e_upper: f64,
    pick: fn(f64, f64) -> f64,
) -> f64 {
    const SAMPLES: usize = 64;
    let mut extreme = coeffs.growth(0.0, l0);
    for i in 0..=SAMPLES {
        let e = e_upper * i as f64 / SAMPLES as f64;
        for j in 0..=SAMPLES {
            let l = l0 + (lm - l0) * j as f64 / SAMPLES as f64;
            extreme = pick(extreme, coeffs.growth(e, l));
        }
    }
    extreme
}

impl Coefficients for ModelParams {
    #[inline]
    fn growth(&self, e: f64, l: f64) -> f64 {
        debug_assert!(e >= 0.0 && l >= self.l0 && l <= self.lm);
        self.k * (self.l_inf - l) / (1.0 + self.alpha * e)
    }

    #[inline]
    fn mortality(&self, e: f64, _l: f64) -> f64 {
        debug_assert!(e >= 0.0);
        self.mu0 + self.mu1 * e
    }

    #[inline]
    fn growth_de(&self, e: f64, l: f64) -> f64 {
        let damp = 1.0 + self.alpha * e;
        -self.alpha * self.k * (self.l_inf - l) / (damp * damp)
    }

    #[inline]
    fn mortality_de(&self, _e: f64, _l: f64) -> f64 {
        self.mu1
    }

    #[inline]
    fn kernel(&self, l: f64) -> f64 {
        self.chi * l * l
    }

    #[inline]
    fn price(&self, l: f64) -> f64 {
        self.c0 * l * l * l
    }

    #[inline]
    fn fertility(&self, l: f64) -> f64 {
        if l < self.l_mat {
            0.0
        } else {
            let s = l / self.lm;
            self.m0 * s * s * s
        }
    }

    fn fertility_support_start(&self) -> Option<f64> {
        Some(self.l_mat)
    }

    /// Growth is decreasing in both arguments, so the maximum sits at
    /// `E = 0`, `l = l0`.
    fn max_growth(&self, l0: f64, _lm: f64, _e_upper: f64) -> f64 {
        self.k * (self.l_inf - l0)
    }

    fn min_growth_at_zero_crowding(&self, _l0: f64, lm: f64) -> f64 {
        self.k * (self.l_inf - lm)
    }
}
