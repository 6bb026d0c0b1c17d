//! Desingularizing functions `φ`, their inverses `ψ`, and conversions to and
//! from error bounds.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexObjective, Subgradient};
use crate::error::{usage, Error, Result};
use crate::extended::Extended;
use crate::linalg::{distance, norm1};
use crate::scalar::Real;

/// Scalar map with its derivative, used by tabulated profiles.
pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Shape of a desingularizing function `φ` on `[0, ∞)`.
#[derive(Clone)]
pub enum Profile<T: Real> {
    /// `φ(s) = scale·s^{1/exponent}`
    Power { scale: T, exponent: T },
    /// `ψ(α) = ℓα²/2`, equivalently `φ(s) = √(2s/ℓ)`.
    QuadraticInverse { ell: T },
    /// `φ(s) = coef·(s + s^{1/exponent})`
    TwoRegime { coef: T, exponent: T },
    /// `base` on `[0, junction]`, affine with slope `base′(junction)` after.
    Extended { base: Box<Profile<T>>, junction: T },
    /// Arbitrary concave increasing `φ`; `ψ` is evaluated by bisection.
    Tabulated {
        name: String,
        phi: ScalarFn<T>,
        dphi: ScalarFn<T>,
    },
}

impl<T: Real> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Power { scale, exponent } => write!(f, "Power({scale}*s^(1/{exponent}))"),
            Profile::QuadraticInverse { ell } => write!(f, "QuadraticInverse(ell={ell})"),
            Profile::TwoRegime { coef, exponent } => {
                write!(f, "TwoRegime({coef}*(s+s^(1/{exponent})))")
            }
            Profile::Extended { base, junction } => write!(f, "Extended({base:?}, r1={junction})"),
            Profile::Tabulated { name, .. } => write!(f, "Tabulated({name})"),
        }
    }
}

impl<T: Real> Profile<T> {
    pub fn phi(&self, s: T) -> T {
        let s = s.max(T::zero());
        match self {
            Profile::Power { scale, exponent } => *scale * s.powf(exponent.recip()),
            Profile::QuadraticInverse { ell } => (T::two() * s / *ell).sqrt(),
            Profile::TwoRegime { coef, exponent } => *coef * (s + s.powf(exponent.recip())),
            Profile::Extended { base, junction } => {
                if s <= *junction {
                    base.phi(s)
                } else {
                    base.phi(*junction) + (s - *junction) * base.dphi(*junction)
                }
            }
            Profile::Tabulated { phi, .. } => phi(s),
        }
    }

    /// `φ′(s)`; may be `+∞` at `s = 0`.
    pub fn dphi(&self, s: T) -> T {
        let s = s.max(T::zero());
        match self {
            Profile::Power { scale, exponent } => {
                let q = exponent.recip();
                if q == T::one() {
                    *scale
                } else {
                    *scale * q * s.powf(q - T::one())
                }
            }
            Profile::QuadraticInverse { ell } => T::one() / (T::two() * *ell * s).sqrt(),
            Profile::TwoRegime { coef, exponent } => {
                let q = exponent.recip();
                let tail = if q == T::one() {
                    T::one()
                } else {
                    q * s.powf(q - T::one())
                };
                *coef * (T::one() + tail)
            }
            Profile::Extended { base, junction } => base.dphi(s.min(*junction)),
            Profile::Tabulated { dphi, .. } => dphi(s),
        }
    }

    /// `ψ = φ⁻¹` on `[0, ∞)`.
    pub fn psi(&self, alpha: T) -> T {
        let alpha = alpha.max(T::zero());
        match self {
            Profile::Power { scale, exponent } => (alpha / *scale).powf(*exponent),
            Profile::QuadraticInverse { ell } => *ell * alpha * alpha / T::two(),
            Profile::Extended { base, junction } => {
                let knee = base.phi(*junction);
                if alpha <= knee {
                    base.psi(alpha)
                } else {
                    *junction + (alpha - knee) / base.dphi(*junction)
                }
            }
            Profile::TwoRegime { .. } | Profile::Tabulated { .. } => self.psi_bisect(alpha),
        }
    }

    /// `ψ′(α)`, via `1/φ′(ψ(α))` when no closed form exists.
    pub fn dpsi(&self, alpha: T) -> T {
        let alpha = alpha.max(T::zero());
        match self {
            Profile::Power { scale, exponent } => {
                if *exponent == T::one() {
                    scale.recip()
                } else {
                    *exponent * alpha.powf(*exponent - T::one()) / scale.powf(*exponent)
                }
            }
            Profile::QuadraticInverse { ell } => *ell * alpha,
            Profile::Extended { base, junction } => {
                let knee = base.phi(*junction);
                if alpha <= knee {
                    base.dpsi(alpha)
                } else {
                    base.dphi(*junction).recip()
                }
            }
            Profile::TwoRegime { .. } | Profile::Tabulated { .. } => {
                self.dphi(self.psi(alpha)).recip()
            }
        }
    }

    fn psi_bisect(&self, alpha: T) -> T {
        if alpha == T::zero() {
            return T::zero();
        }
        let mut hi = T::one();
        let mut guard = 0;
        while self.phi(hi) < alpha && guard < 2000 {
            hi = hi * T::two();
            guard += 1;
        }
        let mut lo = T::zero();
        for _ in 0..4000 {
            let mid = (lo + hi) / T::two();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.phi(mid) < alpha {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(1e-12) * T::epsilon() * T::one().max(hi) {
                break;
            }
        }
        (lo + hi) / T::two()
    }

    /// Moderation constant if known in closed form.
    pub fn moderation(&self) -> Option<T> {
        match self {
            Profile::Power { exponent, .. } | Profile::TwoRegime { exponent, .. } => {
                Some(exponent.recip())
            }
            Profile::QuadraticInverse { .. } => Some(T::half()),
            Profile::Extended { base, .. } => base.moderation(),
            Profile::Tabulated { .. } => None,
        }
    }

    /// `true` when `φ` is affine on `[0, ∞)`.
    pub fn is_affine(&self) -> bool {
        match self {
            Profile::Power { exponent, .. } => *exponent == T::one(),
            _ => false,
        }
    }

    /// Smallest Lipschitz constant of `ψ′` on `[0, alpha0]`, when it exists
    /// and has a closed form.
    fn dpsi_lipschitz(&self, alpha0: T) -> Result<T> {
        match self {
            Profile::Power { scale, exponent } => {
                let p = *exponent;
                if p == T::one() {
                    Err(Error::AssumptionViolated(
                        "sharp profile has psi'(0) != 0".into(),
                    ))
                } else if p < T::two() {
                    Err(Error::AssumptionViolated(format!(
                        "psi'' is unbounded near 0 for exponent {p} < 2"
                    )))
                } else {
                    // ψ″ is nondecreasing on [0, α0] for p ≥ 2
                    Ok(p * (p - T::one()) * alpha0.powf(p - T::two()) / scale.powf(p))
                }
            }
            Profile::QuadraticInverse { ell } => Ok(*ell),
            Profile::TwoRegime { coef, exponent } => {
                if *exponent == T::two() {
                    // ψ″(φ(s)) = 2/(coef²(1+2√s)³), maximal at s = 0
                    Ok(T::two() / (*coef * *coef))
                } else if *exponent == T::one() {
                    Err(Error::AssumptionViolated(
                        "affine profile has psi'(0) != 0".into(),
                    ))
                } else {
                    Err(Error::AssumptionViolated(format!(
                        "no closed-form Lipschitz bound for psi' with exponent {exponent}; supply ell"
                    )))
                }
            }
            Profile::Extended { base, junction } => {
                base.dpsi_lipschitz(alpha0.min(base.phi(*junction)))
            }
            Profile::Tabulated { name, .. } => Err(Error::AssumptionViolated(format!(
                "tabulated profile {name} needs an explicit Lipschitz constant for psi'"
            ))),
        }
    }

    fn to_spec(&self) -> Result<ProfileSpec> {
        Ok(match self {
            Profile::Power { scale, exponent } => ProfileSpec::Power {
                scale: scale.to_f64_lossy(),
                exponent: exponent.to_f64_lossy(),
            },
            Profile::QuadraticInverse { ell } => ProfileSpec::QuadraticInverse {
                ell: ell.to_f64_lossy(),
            },
            Profile::TwoRegime { coef, exponent } => ProfileSpec::TwoRegime {
                coef: coef.to_f64_lossy(),
                exponent: exponent.to_f64_lossy(),
            },
            Profile::Extended { base, junction } => ProfileSpec::Extended {
                base: Box::new(base.to_spec()?),
                junction: junction.to_f64_lossy(),
            },
            Profile::Tabulated { name, .. } => {
                return Err(Error::Serialization(format!(
                    "tabulated profile {name} has no JSON form"
                )))
            }
        })
    }

    fn from_spec(spec: &ProfileSpec) -> Self {
        match spec {
            ProfileSpec::Power { scale, exponent } => Profile::Power {
                scale: T::lit(*scale),
                exponent: T::lit(*exponent),
            },
            ProfileSpec::QuadraticInverse { ell } => {
                Profile::QuadraticInverse { ell: T::lit(*ell) }
            }
            ProfileSpec::TwoRegime { coef, exponent } => Profile::TwoRegime {
                coef: T::lit(*coef),
                exponent: T::lit(*exponent),
            },
            ProfileSpec::Extended { base, junction } => Profile::Extended {
                base: Box::new(Self::from_spec(base)),
                junction: T::lit(*junction),
            },
        }
    }
}

/// Stable set on which a certificate is claimed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Everywhere,
    /// `{x : ‖x‖₁ ≤ radius}`
    L1Ball {
        radius: f64,
    },
    /// `B(center, radius)`
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl Region {
    pub fn contains<T: Real>(&self, x: &[T]) -> bool {
        let slack = 1e-12;
        match self {
            Region::Everywhere => true,
            Region::L1Ball { radius } => norm1(x).to_f64_lossy() <= radius * (1.0 + slack) + slack,
            Region::Ball { center, radius } => {
                let c: Vec<T> = center.iter().map(|&v| T::lit(v)).collect();
                c.len() == x.len()
                    && distance(x, &c).to_f64_lossy() <= radius * (1.0 + slack) + slack
            }
        }
    }
}

/// A concave `φ ∈ K(0, r0)` with its inverse, the Lipschitz constant of `ψ′`
/// and the moderation constant `c`.
#[derive(Debug, Clone)]
pub struct Desingularizer<T: Real> {
    profile: Profile<T>,
    r0: Extended<T>,
    ell: Option<T>,
    c: T,
    region: Region,
}

impl<T: Real> Desingularizer<T> {
    pub fn new(profile: Profile<T>, r0: Extended<T>, region: Region) -> Result<Self> {
        validate_profile(&profile)?;
        if let Extended::Finite(r) = r0 {
            if !(r > T::zero()) {
                return usage("validity radius r0 must be positive");
            }
        }
        let c = profile.moderation().ok_or_else(|| {
            Error::CertificateRefused(format!("{profile:?} has no moderation constant"))
        })?;
        Ok(Self {
            profile,
            r0,
            ell: None,
            c,
            region,
        })
    }

    /// A general concave `φ`, accepted only with an explicit moderation
    /// constant `c ∈ (0, 1]`.
    pub fn tabulated(
        name: impl Into<String>,
        phi: ScalarFn<T>,
        dphi: ScalarFn<T>,
        moderation: Option<T>,
        r0: Extended<T>,
        region: Region,
    ) -> Result<Self> {
        let name = name.into();
        let Some(c) = moderation else {
            return Err(Error::CertificateRefused(format!(
                "{name}: no moderation constant supplied, so s*phi'(s) >= c*phi(s) is unknown"
            )));
        };
        if !(c > T::zero() && c <= T::one()) {
            return usage("moderation constant must lie in (0, 1]");
        }
        Ok(Self {
            profile: Profile::Tabulated { name, phi, dphi },
            r0,
            ell: None,
            c,
            region,
        })
    }

    /// Overrides the Lipschitz constant of `ψ′`.
    pub fn with_ell(mut self, ell: T) -> Result<Self> {
        if !(ell > T::zero()) || !ell.is_finite() {
            return usage("ell must be finite and positive");
        }
        self.ell = Some(ell);
        Ok(self)
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    /// `κ·φ`, used to corrupt or tighten certificates on purpose.
    pub fn scaled(&self, kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) {
            return usage("scale factor must be positive");
        }
        let k = kappa;
        let base = self.profile.clone();
        let profile = match base {
            Profile::Power { scale, exponent } => Profile::Power {
                scale: scale * k,
                exponent,
            },
            Profile::QuadraticInverse { ell } => Profile::QuadraticInverse { ell: ell / (k * k) },
            Profile::TwoRegime { coef, exponent } => Profile::TwoRegime {
                coef: coef * k,
                exponent,
            },
            other => {
                let (phi_p, dphi_p) = (other.clone(), other);
                Profile::Tabulated {
                    name: format!("{k}*{phi_p:?}"),
                    phi: Arc::new(move |s| k * phi_p.phi(s)),
                    dphi: Arc::new(move |s| k * dphi_p.dphi(s)),
                }
            }
        };
        Ok(Self {
            profile,
            r0: self.r0,
            ell: self.ell.map(|l| l / (k * k)),
            c: self.c,
            region: self.region.clone(),
        })
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    pub fn r0(&self) -> Extended<T> {
        self.r0
    }

    pub fn moderation(&self) -> T {
        self.c
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn phi(&self, s: T) -> T {
        self.profile.phi(s)
    }

    pub fn dphi(&self, s: T) -> T {
        self.profile.dphi(s)
    }

    pub fn psi(&self, alpha: T) -> T {
        self.profile.psi(alpha)
    }

    pub fn dpsi(&self, alpha: T) -> T {
        self.profile.dpsi(alpha)
    }

    /// Lipschitz constant `ℓ` of `ψ′` on `[0, alpha0]`, refusing when
    /// assumption (A) fails.
    pub fn ell(&self, alpha0: T) -> Result<T> {
        let d0 = self.dpsi(T::zero());
        if d0 != T::zero() {
            return Err(Error::AssumptionViolated(format!("psi'(0) = {d0} != 0")));
        }
        match self.ell {
            Some(l) => Ok(l),
            None => self.profile.dpsi_lipschitz(alpha0),
        }
    }

    /// `true` when `s` lies in the value band `(0, r0)`.
    pub fn in_value_band(&self, s: T) -> bool {
        s > T::zero() && Extended::Finite(s) < self.r0
    }

    pub fn to_doc(&self) -> Result<DesingularizerDoc> {
        Ok(DesingularizerDoc {
            profile: self.profile.to_spec()?,
            r0: self.r0.finite().map(|v| v.to_f64_lossy()),
            ell: self.ell.map(|v| v.to_f64_lossy()),
            moderation: self.c.to_f64_lossy(),
            region: self.region.clone(),
        })
    }

    pub fn from_doc(doc: &DesingularizerDoc) -> Result<Self> {
        let r0 = doc
            .r0
            .map_or(Extended::PosInfinity, |v| Extended::Finite(T::lit(v)));
        let mut d = Self::new(Profile::from_spec(&doc.profile), r0, doc.region.clone())?;
        if let Some(l) = doc.ell {
            d = d.with_ell(T::lit(l))?;
        }
        Ok(d)
    }
}

fn validate_profile<T: Real>(profile: &Profile<T>) -> Result<()> {
    let pos = |v: T, what: &str| -> Result<()> {
        if v > T::zero() && v.is_finite() {
            Ok(())
        } else {
            usage(format!("{what} must be finite and positive"))
        }
    };
    match profile {
        Profile::Power { scale, exponent }
        | Profile::TwoRegime {
            coef: scale,
            exponent,
        } => {
            pos(*scale, "scale")?;
            if !(*exponent >= T::one()) || !exponent.is_finite() {
                return usage("exponent p must satisfy p >= 1");
            }
            Ok(())
        }
        Profile::QuadraticInverse { ell } => pos(*ell, "ell"),
        Profile::Extended { base, junction } => {
            pos(*junction, "junction")?;
            validate_profile(base)
        }
        Profile::Tabulated { .. } => Ok(()),
    }
}

/// JSON form of a [`Desingularizer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesingularizerDoc {
    pub profile: ProfileSpec,
    /// `None` means `+∞`.
    pub r0: Option<f64>,
    pub ell: Option<f64>,
    pub moderation: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ProfileSpec {
    Power {
        scale: f64,
        exponent: f64,
    },
    QuadraticInverse {
        ell: f64,
    },
    TwoRegime {
        coef: f64,
        exponent: f64,
    },
    Extended {
        base: Box<ProfileSpec>,
        junction: f64,
    },
}

/// Residual function `ω` of an error bound `dist(x, S) ≤ ω(f(x) − min f)`.
#[derive(Clone)]
pub enum Residual<T: Real> {
    /// `ω(s) = (s/γ)^{1/p}`
    Power { gamma: T, p: T },
    /// `ω(s) = (s + s^{1/p})/γ₀`
    TwoRegime { gamma0: T, p: T },
    /// `ω = φ` for a profile.
    Profile(Profile<T>),
    /// Arbitrary residual; `moderation = None` means it is not known to be
    /// moderate and conversion to a KL inequality is refused.
    Custom {
        name: String,
        omega: ScalarFn<T>,
        moderation: Option<T>,
    },
}

impl<T: Real> fmt::Debug for Residual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Residual::Power { gamma, p } => write!(f, "Power(gamma={gamma}, p={p})"),
            Residual::TwoRegime { gamma0, p } => write!(f, "TwoRegime(gamma0={gamma0}, p={p})"),
            Residual::Profile(pr) => write!(f, "Profile({pr:?})"),
            Residual::Custom {
                name, moderation, ..
            } => write!(f, "Custom({name}, c={moderation:?})"),
        }
    }
}

impl<T: Real> Residual<T> {
    pub fn omega(&self, s: T) -> T {
        let s = s.max(T::zero());
        match self {
            Residual::Power { gamma, p } => (s / *gamma).powf(p.recip()),
            Residual::TwoRegime { gamma0, p } => (s + s.powf(p.recip())) / *gamma0,
            Residual::Profile(pr) => pr.phi(s),
            Residual::Custom { omega, .. } => omega(s),
        }
    }
}

/// Error bound `dist(x, argmin f) ≤ ω(f(x) − min f)` for `x` in `region`
/// with `f(x) − min f < r0`.
#[derive(Debug, Clone)]
pub struct ErrorBoundCertificate<T: Real> {
    pub residual: Residual<T>,
    pub r0: Extended<T>,
    pub region: Region,
    /// Where the constants came from.
    pub provenance: String,
}

impl<T: Real> ErrorBoundCertificate<T> {
    /// `f − min f ≥ γ dist^p` on `region`.
    pub fn power(
        gamma: T,
        p: T,
        r0: Extended<T>,
        region: Region,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return usage("gamma must be finite and positive");
        }
        if !(p >= T::one()) {
            return usage("exponent p must satisfy p >= 1");
        }
        Ok(Self {
            residual: Residual::Power { gamma, p },
            r0,
            region,
            provenance: provenance.into(),
        })
    }

    pub fn omega(&self, s: T) -> T {
        self.residual.omega(s)
    }

    pub fn in_value_band(&self, s: T) -> bool {
        s >= T::zero() && Extended::Finite(s) < self.r0
    }
}

/// Converts an error bound with a moderate residual into a desingularizing
/// function `φ = c⁻¹ω`.
pub fn from_error_bound<T: Real>(cert: &ErrorBoundCertificate<T>) -> Result<Desingularizer<T>> {
    let profile = match &cert.residual {
        Residual::Power { gamma, p } => Profile::Power {
            scale: *p * gamma.powf(-p.recip()),
            exponent: *p,
        },
        Residual::TwoRegime { gamma0, p } => Profile::TwoRegime {
            coef: *p / *gamma0,
            exponent: *p,
        },
        Residual::Profile(pr) => {
            let c = pr.moderation().ok_or_else(|| {
                Error::CertificateRefused(format!("{pr:?} has no moderation constant"))
            })?;
            match pr {
                Profile::Power { scale, exponent } => Profile::Power {
                    scale: *scale / c,
                    exponent: *exponent,
                },
                Profile::TwoRegime { coef, exponent } => Profile::TwoRegime {
                    coef: *coef / c,
                    exponent: *exponent,
                },
                Profile::QuadraticInverse { ell } => {
                    Profile::QuadraticInverse { ell: *ell * c * c }
                }
                other => {
                    let (a, b) = (other.clone(), other.clone());
                    Profile::Tabulated {
                        name: format!("{other:?}/{c}"),
                        phi: Arc::new(move |s| a.phi(s) / c),
                        dphi: Arc::new(move |s| b.dphi(s) / c),
                    }
                }
            }
        }
        Residual::Custom {
            name,
            omega,
            moderation,
        } => {
            let Some(c) = *moderation else {
                return Err(Error::CertificateRefused(format!(
                    "residual {name} is not known to be moderate; error bound and KL inequality need not be equivalent"
                )));
            };
            let om = omega.clone();
            let h = T::lit(1e-7);
            let om2 = omega.clone();
            return Desingularizer::tabulated(
                format!("{name}/{c}"),
                Arc::new(move |s| om(s) / c),
                Arc::new(move |s: T| {
                    let step = h * T::one().max(s);
                    let lo = (s - step).max(T::zero());
                    (om2(s + step) - om2(lo)) / ((s + step - lo) * c)
                }),
                Some(c),
                cert.r0,
                cert.region.clone(),
            );
        }
    };
    Desingularizer::new(profile, cert.r0, cert.region.clone())
}

/// The error bound `dist(x, S) ≤ φ(f(x) − min f)` implied by a KL inequality.
pub fn to_error_bound<T: Real>(d: &Desingularizer<T>) -> ErrorBoundCertificate<T> {
    let residual = match d.profile() {
        Profile::Power { scale, exponent } => Residual::Power {
            gamma: scale.powf(-*exponent),
            p: *exponent,
        },
        Profile::QuadraticInverse { ell } => Residual::Power {
            gamma: *ell / T::two(),
            p: T::two(),
        },
        other => Residual::Profile(other.clone()),
    };
    ErrorBoundCertificate {
        residual,
        r0: d.r0(),
        region: d.region().clone(),
        provenance: "kl-to-error-bound".into(),
    }
}

/// Extends `φ` affinely past `r1` (default `r0/2`), giving a desingularizer
/// valid for every value level.
pub fn globalize<T: Real>(d: &Desingularizer<T>, r1: Option<T>) -> Result<Desingularizer<T>> {
    let r1 = match (r1, d.r0()) {
        (Some(r), _) => r,
        (None, Extended::Finite(r0)) => r0 / T::two(),
        (None, Extended::PosInfinity) => {
            return usage("r0 is infinite; pass an explicit junction r1")
        }
    };
    if !(r1 > T::zero()) || Extended::Finite(r1) >= d.r0() {
        return usage(format!(
            "junction r1 = {r1} must lie in (0, r0) with r0 = {}",
            d.r0()
        ));
    }
    let mut out = d.clone();
    out.r0 = Extended::PosInfinity;
    if !d.profile().is_affine() {
        out.profile = Profile::Extended {
            base: Box::new(d.profile().clone()),
            junction: r1,
        };
    }
    Ok(out)
}

/// `γ₀ = (1 + r0^{(p−1)/p})·γ^{1/p}` and the residual `(s + s^{1/p})/γ₀`
/// valid at every level of a convex function.
pub fn extend_error_bound_globally<T: Real>(gamma: T, p: T, r0: T) -> Result<(T, Residual<T>)> {
    if !(gamma > T::zero()) || !(p >= T::one()) || !(r0 > T::zero()) {
        return usage("need gamma > 0, p >= 1, r0 > 0");
    }
    let gamma0 = (T::one() + r0.powf((p - T::one()) / p)) * gamma.powf(p.recip());
    Ok((gamma0, Residual::TwoRegime { gamma0, p }))
}

/// Outcome of evaluating the KL inequality at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlGap<T> {
    /// `φ′(f(x) − min f)·‖∂⁰f(x)‖ − 1`; `+∞` when `x ∉ dom ∂f`.
    Value(Extended<T>),
    OutOfDomain,
}

pub fn kl_gap<T: Real>(
    d: &Desingularizer<T>,
    obj: &ConvexObjective<T>,
    x: &[T],
) -> Result<KlGap<T>> {
    if !d.region().contains(x) {
        return Ok(KlGap::OutOfDomain);
    }
    let Extended::Finite(s) = obj.gap(x)? else {
        return Ok(KlGap::OutOfDomain);
    };
    if !d.in_value_band(s) {
        return Ok(KlGap::OutOfDomain);
    }
    Ok(match obj.min_norm_subgradient(x)? {
        Subgradient::OutsideDomain => KlGap::Value(Extended::PosInfinity),
        g => {
            let n = g.norm().finite().expect("vector subgradient");
            KlGap::Value(Extended::Finite(d.dphi(s) * n - T::one()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{L1Norm, ScaledSquaredDistance};

    fn power_cert(gamma: f64, p: f64) -> ErrorBoundCertificate<f64> {
        ErrorBoundCertificate::power(gamma, p, Extended::PosInfinity, Region::Everywhere, "test")
            .unwrap()
    }

    #[test]
    fn from_error_bound_power_examples() {
        let d = from_error_bound(&power_cert(3.0, 2.0)).unwrap();
        assert_eq!(d.moderation(), 0.5);
        for s in [0.1, 1.0, 7.5] {
            assert!((d.phi(s) - 2.0 * (s / 3.0_f64).sqrt()).abs() < 1e-14);
        }
        let sharp = from_error_bound(&power_cert(1.0, 1.0)).unwrap();
        assert_eq!(sharp.moderation(), 1.0);
        assert_eq!(sharp.phi(2.5), 2.5);
    }

    #[test]
    fn lasso_shape_certificate() {
        let gr = 0.3;
        let d = from_error_bound(&power_cert(2.0 * gr, 2.0)).unwrap();
        for s in [0.01, 0.5, 4.0] {
            assert!((d.phi(s) - (2.0 * s / gr).sqrt()).abs() < 1e-13);
            assert!((d.psi(s) - gr * s * s / 2.0).abs() < 1e-13);
        }
        assert!((d.ell(10.0).unwrap() - gr).abs() < 1e-14);
    }

    #[test]
    fn custom_residual_without_moderation_is_refused() {
        let cert = ErrorBoundCertificate::<f64> {
            residual: Residual::Custom {
                name: "flat".into(),
                omega: Arc::new(|s| s),
                moderation: None,
            },
            r0: Extended::Finite(1.0),
            region: Region::Everywhere,
            provenance: "test".into(),
        };
        let err = from_error_bound(&cert).unwrap_err();
        assert!(err.to_string().contains("equivalence may fail"));
    }

    #[test]
    fn to_error_bound_examples() {
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 2.0,
                exponent: 2.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        let eb = to_error_bound(&d);
        // ω(s) = 2√s ⇔ f ≥ dist²/4
        match eb.residual {
            Residual::Power { gamma, p } => {
                assert!((gamma - 0.25).abs() < 1e-15);
                assert_eq!(p, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let id = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 1.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        assert!(
            matches!(to_error_bound(&id).residual, Residual::Power { gamma, p } if gamma == 1.0 && p == 1.0)
        );
    }

    #[test]
    fn round_trip_scales_gamma_by_c_power() {
        for (g, p) in [(0.7, 2.0), (2.0, 3.0), (1.5, 1.0)] {
            let back = to_error_bound(&from_error_bound(&power_cert(g, p)).unwrap());
            let Residual::Power { gamma, p: pb } = back.residual else {
                panic!()
            };
            assert!((pb - p).abs() < 1e-15);
            // ω_out = p·ω_in ⇒ γ_out = γ_in / p^p
            assert!((gamma - g / p.powf(p)).abs() < 1e-12 * g);
        }
    }

    #[test]
    fn globalize_examples() {
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 2.0,
            },
            Extended::Finite(4.0),
            Region::Everywhere,
        )
        .unwrap();
        let g = globalize(&d, Some(1.0)).unwrap();
        assert_eq!(g.r0(), Extended::PosInfinity);
        assert!((g.phi(3.0) - 2.0).abs() < 1e-15);
        assert!((g.phi(0.25) - 0.5).abs() < 1e-15);
        assert!((g.psi(2.0) - 3.0).abs() < 1e-14);
        assert!(matches!(globalize(&d, Some(4.0)), Err(Error::Usage(_))));
        assert!(matches!(globalize(&d, Some(0.0)), Err(Error::Usage(_))));
        let def = globalize(&d, None).unwrap();
        assert!(matches!(def.profile(), Profile::Extended { junction, .. } if *junction == 2.0));

        let affine = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 3.0,
                exponent: 1.0,
            },
            Extended::Finite(4.0),
            Region::Everywhere,
        )
        .unwrap();
        let ga = globalize(&affine, Some(1.0)).unwrap();
        for s in [0.5, 1.0, 10.0] {
            assert_eq!(ga.phi(s), affine.phi(s));
        }
    }

    #[test]
    fn globalized_profile_is_concave_across_junction() {
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 3.0,
            },
            Extended::Finite(2.0),
            Region::Everywhere,
        )
        .unwrap();
        let g = globalize(&d, Some(1.0)).unwrap();
        let h = 1e-3;
        let mut s = 0.5;
        while s < 1.5 {
            let second = (g.phi(s + h) - 2.0 * g.phi(s) + g.phi(s - h)) / (h * h);
            assert!(second <= 1e-6, "phi'' = {second} at {s}");
            s += 0.01;
        }
    }

    #[test]
    fn extend_error_bound_examples() {
        assert!((extend_error_bound_globally::<f64>(0.3, 1.0, 5.0).unwrap().0 - 0.6).abs() < 1e-15);
        assert!((extend_error_bound_globally::<f64>(1.0, 2.0, 1.0).unwrap().0 - 2.0).abs() < 1e-15);
        assert!((extend_error_bound_globally::<f64>(1.0, 2.0, 4.0).unwrap().0 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kl_gap_examples() {
        let sq: ConvexObjective<f64> =
            ConvexObjective::normalized(Arc::new(ScaledSquaredDistance {
                center: vec![0.0],
                sigma: 1.0,
            }));
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 2.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        for x in [-3.0, -0.1, 0.2, 5.0] {
            let KlGap::Value(Extended::Finite(g)) = kl_gap(&d, &sq, &[x]).unwrap() else {
                panic!()
            };
            assert!(g.abs() < 1e-14);
        }
        assert_eq!(kl_gap(&d, &sq, &[0.0]).unwrap(), KlGap::OutOfDomain);

        let abs: ConvexObjective<f64> = ConvexObjective::normalized(Arc::new(L1Norm {
            dim: 1,
            weight: 1.0,
        }));
        let id = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 1.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        assert_eq!(
            kl_gap(&id, &abs, &[-2.0]).unwrap(),
            KlGap::Value(Extended::Finite(0.0))
        );
        let local = id.clone().with_region(Region::L1Ball { radius: 1.0 });
        assert_eq!(kl_gap(&local, &abs, &[-2.0]).unwrap(), KlGap::OutOfDomain);
    }

    #[test]
    fn two_regime_inverse_by_bisection() {
        let (g0, res) = extend_error_bound_globally::<f64>(1.0, 2.0, 4.0).unwrap();
        let cert = ErrorBoundCertificate {
            residual: res,
            r0: Extended::PosInfinity,
            region: Region::Everywhere,
            provenance: String::new(),
        };
        let d = from_error_bound(&cert).unwrap();
        assert_eq!(d.moderation(), 0.5);
        for s in [1e-6_f64, 0.3, 2.0, 50.0] {
            assert!((d.psi(d.phi(s)) - s).abs() < 1e-9 * s.max(1.0));
            assert!((d.phi(s) - 2.0 * (s + s.sqrt()) / g0).abs() < 1e-14);
        }
        assert!((d.ell(1.0).unwrap() - 2.0 / (2.0 / g0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn assumption_a_refusals() {
        let sharp = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 1.0,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        assert!(matches!(sharp.ell(1.0), Err(Error::AssumptionViolated(_))));
        let p15 = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.0,
                exponent: 1.5,
            },
            Extended::PosInfinity,
            Region::Everywhere,
        )
        .unwrap();
        assert!(matches!(p15.ell(1.0), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn doc_round_trip() {
        let d = Desingularizer::<f64>::new(
            Profile::Power {
                scale: 1.5,
                exponent: 2.0,
            },
            Extended::Finite(3.0),
            Region::L1Ball { radius: 2.0 },
        )
        .unwrap();
        let g = globalize(&d, None).unwrap();
        let json = serde_json::to_string(&g.to_doc().unwrap()).unwrap();
        let back: Desingularizer<f64> =
            Desingularizer::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        for s in [0.2, 1.4, 9.0] {
            assert_eq!(back.phi(s), g.phi(s));
        }
        assert_eq!(back.region(), g.region());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn power_profile_invariants(scale in 0.01f64..100.0, p in 1.0f64..6.0, s in 1e-6f64..1e3) {
                let d = Desingularizer::<f64>::new(Profile::Power { scale, exponent: p }, Extended::PosInfinity, Region::Everywhere).unwrap();
                // s φ′(s) = φ(s)/p
                prop_assert!((s * d.dphi(s) - d.phi(s) / p).abs() <= 1e-12 * d.phi(s).max(1.0));
                prop_assert!((d.psi(d.phi(s)) - s).abs() <= 1e-9 * s.max(1.0));
                prop_assert!(d.phi(s * 1.01) > d.phi(s));
                // midpoint concavity
                let (u, v) = (s, 2.0 * s + 1.0);
                prop_assert!(d.phi(0.5 * (u + v)) >= 0.5 * (d.phi(u) + d.phi(v)) - 1e-12 * d.phi(v));
            }

            #[test]
            fn round_trip_dominates(gamma in 0.01f64..10.0, p in 1.0f64..5.0, s in 1e-6f64..1e3) {
                let cert = ErrorBoundCertificate::power(gamma, p, Extended::PosInfinity, Region::Everywhere, "").unwrap();
                let back = to_error_bound(&from_error_bound(&cert).unwrap());
                prop_assert!(back.omega(s) >= cert.omega(s) * (1.0 - 1e-12));
            }

            #[test]
            fn globalize_keeps_moderation(p in 1.0f64..5.0, r1 in 0.1f64..10.0, s in 1e-4f64..100.0) {
                let d = Desingularizer::<f64>::new(Profile::Power { scale: 1.0, exponent: p }, Extended::Finite(2.0 * r1), Region::Everywhere).unwrap();
                let g = globalize(&d, Some(r1)).unwrap();
                prop_assert!(s * g.dphi(s) >= g.moderation() * g.phi(s) * (1.0 - 1e-12));
                prop_assert!((g.psi(g.phi(s)) - s).abs() <= 1e-9 * s.max(1.0));
            }
        }
    }
}
