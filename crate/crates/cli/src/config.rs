//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use klcert::desingularization::DesingularizerDoc;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub instance: InstanceSource,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub certificate: CertificateSource,
    pub steps: usize,
    /// Points drawn by each sampling check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Seed of the sampling checks.
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSource {
    Generate(FamilySpec),
    /// An instance JSON written by `generate`.
    File {
        path: PathBuf,
    },
    /// LASSO data as plain-text matrices.
    Matrices {
        a: PathBuf,
        y: PathBuf,
        mu: f64,
        x0: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetShapes {
    /// Disks only.
    Disks,
    /// Alternating disks and half-spaces.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Lasso {
        m: usize,
        n: usize,
        mu: f64,
        seed: u64,
    },
    Feasibility {
        #[serde(default = "two")]
        dim: usize,
        sets: usize,
        shapes: SetShapes,
        seed: u64,
    },
    UniformlyConvex {
        dim: usize,
        sigma: f64,
        #[serde(default = "two_f")]
        p: f64,
        seed: u64,
    },
}

fn two() -> usize {
    2
}

fn two_f() -> f64 {
    2.0
}

impl FamilySpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            FamilySpec::Lasso { seed: s, .. }
            | FamilySpec::Feasibility { seed: s, .. }
            | FamilySpec::UniformlyConvex { seed: s, .. } => *s = seed,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Ista,
    Gradient,
    ProximalPoint,
    Barycentric,
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// Defaults by family: ISTA, barycentric, gradient.
    pub kind: Option<MethodKind>,
    /// Relative step `λ = d/L`; default `½`.
    pub d: Option<f64>,
    /// Absolute step, overriding `d`; required for the proximal point method.
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NuSource {
    Exact,
    Sampled { samples: usize },
    Value { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CertificateSource {
    /// Constants computed from the instance; `scale` multiplies the
    /// error-bound constant (`γ_R`, `M`, `M′` or `σ`).
    Computed {
        #[serde(default = "exact_nu")]
        nu: NuSource,
        #[serde(default = "one")]
        scale: f64,
    },
    /// A desingularizer given directly.
    Supplied { desingularizer: DesingularizerDoc },
    /// A quadratic profile chosen so that the certified rate is `q`.
    Rate { q: f64 },
}

fn exact_nu() -> NuSource {
    NuSource::Exact
}

fn one() -> f64 {
    1.0
}

impl Default for CertificateSource {
    fn default() -> Self {
        CertificateSource::Computed {
            nu: NuSource::Exact,
            scale: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.steps == 0 {
            bail!("steps must be positive");
        }
        if let Some(d) = self.method.d {
            if !(d > 0.0 && d < 2.0) {
                bail!("relative step d = {d} must lie in (0, 2)");
            }
        }
        if let CertificateSource::Computed { scale, .. } = self.certificate {
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("certificate scale must be positive");
            }
        }
        if let CertificateSource::Rate { q } = self.certificate {
            if !(q > 1.0 && q.is_finite()) {
                bail!("certified rate q must exceed 1");
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"schema_version": 1, "name": "x", "steps": 10,
                "instance": {"source": "generate", "family": "lasso", "m": 3, "n": 2, "mu": 0.5, "seed": 1}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.certificate,
            CertificateSource::Computed {
                nu: NuSource::Exact,
                scale: 1.0
            }
        );
        assert_eq!(cfg.samples, 10_000);
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = r#"{"schema_version": 2, "name": "x", "steps": 10,
            "instance": {"source": "file", "path": "i.json"}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(base).unwrap();
        assert!(cfg.validate().is_err());
        let typo = r#"{"schema_version": 1, "name": "x", "steps": 10, "stpes": 3,
            "instance": {"source": "file", "path": "i.json"}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(typo).is_err());
    }
}
