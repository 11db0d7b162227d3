//! The experiment catalog.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Mathematical result the experiment exercises.
    pub anchors: &'static [&'static str],
}

const CATALOG: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "gamma",
        description: "Mehler-formula estimate of Γ_{F,G}(ω) against the exact chaos-expansion value",
        anchors: &["Γ operator", "Mehler representation of −DL⁻¹"],
    },
    ExperimentInfo {
        name: "ibp-check",
        description: "E[Φ(F)G] against E[Φ′(F)Γ_{F,G}] for centered G",
        anchors: &["Gaussian integration by parts with the Γ operator"],
    },
    ExperimentInfo {
        name: "poincare",
        description: "E|F|^p against (p−1)^{p/2} E|Γ_{F,F}|^{p/2}",
        anchors: &["Poincaré-type moment inequality"],
    },
    ExperimentInfo {
        name: "sudakov",
        description: "Soft-max smart path sign profile and expected maxima under Δ_F ≤ Δ_G",
        anchors: &["Sudakov–Fernique comparison", "soft-max sandwich"],
    },
    ExperimentInfo {
        name: "slepian",
        description: "Hessian smart path and E[f(F)] against E[f(G)] under a Γ ordering",
        anchors: &["Slepian/Gordon comparison"],
    },
    ExperimentInfo {
        name: "concentration",
        description: "Joint upper tail against exp(−‖x‖²/(2‖C‖)) when Γ ⪯ C",
        anchors: &["Gaussian-type concentration from a Γ bound"],
    },
    ExperimentInfo {
        name: "perturbation",
        description: "Monotone perturbation of a Gaussian vector: Γ dominance and E[Ψ(F)] ≥ E[Ψ(G)]",
        anchors: &["Slepian/Gordon comparison", "perturbed Gaussian vectors"],
    },
    ExperimentInfo {
        name: "fbm-sde",
        description: "fBm-driven SDE: Δ against |t−s|^{2H} and expected suprema against fBm",
        anchors: &["SDE driven by fractional Brownian motion", "Sudakov–Fernique comparison"],
    },
    ExperimentInfo {
        name: "sk-free-energy",
        description: "Exact spin-glass free energy by Gray-code enumeration",
        anchors: &["Sherrington–Kirkpatrick partition function"],
    },
    ExperimentInfo {
        name: "sk-generic-bound",
        description: "Free-energy comparison bound between a medium family and IID Gaussian media",
        anchors: &["universality of the SK free energy", "generic smart-path bound"],
    },
    ExperimentInfo {
        name: "sk-gamma-bound",
        description: "Exact |Γ_{F_N,F_N}| against (2β²/N³)Σ|Γ_{J_ij,J_ij}| per medium",
        anchors: &["universality of the SK free energy", "Γ bound for the free energy"],
    },
    ExperimentInfo {
        name: "sk-convergence",
        description: "Finite-N free-energy ladder and cross-family gaps",
        anchors: &["universality of the SK free energy"],
    },
];

pub fn list_experiments() -> &'static [ExperimentInfo] {
    CATALOG
}

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    CATALOG.iter().find(|e| e.name == name)
}
