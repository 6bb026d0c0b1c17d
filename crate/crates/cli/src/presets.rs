//! Shipped experiment configurations.

use anyhow::{bail, Result};

use crate::config::{
    CertificateSource, ExperimentConfig, FamilySpec, InstanceSource, MethodConfig, MethodKind,
    SetShapes, SCHEMA_VERSION,
};

pub const PRESETS: &[&str] = &["tiny-lasso", "feasibility", "uniformly-convex"];

fn config(name: &str, family: FamilySpec, kind: MethodKind, steps: usize) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        instance: InstanceSource::Generate(family),
        method: MethodConfig {
            kind: Some(kind),
            d: None,
            step: None,
        },
        certificate: CertificateSource::default(),
        steps,
        samples: 10_000,
        seed: 0,
    }
}

pub fn tiny_lasso() -> ExperimentConfig {
    config(
        "tiny-lasso",
        FamilySpec::Lasso {
            m: 3,
            n: 2,
            mu: 0.5,
            seed: 1,
        },
        MethodKind::Ista,
        500,
    )
}

pub fn feasibility() -> Vec<ExperimentConfig> {
    let family = FamilySpec::Feasibility {
        dim: 2,
        sets: 2,
        shapes: SetShapes::Disks,
        seed: 7,
    };
    vec![
        config(
            "feasibility-barycentric",
            family.clone(),
            MethodKind::Barycentric,
            2000,
        ),
        config(
            "feasibility-alternating",
            family,
            MethodKind::Alternating,
            2000,
        ),
    ]
}

pub fn uniformly_convex() -> ExperimentConfig {
    let family = FamilySpec::UniformlyConvex {
        dim: 3,
        sigma: 1.0,
        p: 2.0,
        seed: 3,
    };
    config("uniformly-convex", family, MethodKind::Gradient, 200)
}

/// The configurations behind a preset name.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    Ok(match name {
        "tiny-lasso" => vec![tiny_lasso()],
        "feasibility" => feasibility(),
        "uniformly-convex" => vec![uniformly_convex()],
        other => bail!(
            "unknown preset {other:?}; known presets: {}",
            PRESETS.join(", ")
        ),
    })
}
