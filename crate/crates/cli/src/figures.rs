//! Parameter table for every reproducible figure.

use std::f64::consts::PI;

use ldscope::{Layer, Operator, SectionId, SystemId};
use serde::Serialize;

fn as_map<S: serde::Serializer>(params: &&'static [(&'static str, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(params.iter().copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectionSetup {
    pub id: SectionId,
    pub h0: f64,
    /// Also label every allowed node as reactive or not.
    pub classify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrobeSetup {
    pub ic: [f64; 2],
    pub periods: u64,
    pub skip: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Overlay {
    SlowManifold,
    Equilibria,
    EnergyBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Figure {
    pub id: &'static str,
    pub system: SystemId,
    #[serde(serialize_with = "as_map")]
    pub params: &'static [(&'static str, f64)],
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// Grid nodes along x per node along y (2 for the wide Σ₂ grids).
    pub aspect: usize,
    pub p: f64,
    pub tau_f: f64,
    pub tau_b: f64,
    pub escape_radius: Option<f64>,
    pub section: Option<SectionSetup>,
    pub strobe: Option<StrobeSetup>,
    /// Ridge sets exported alongside the field.
    pub ridges: &'static [(Layer, Operator)],
    pub overlays: &'static [Overlay],
}

const MANIFOLDS_GRADIENT: &[(Layer, Operator)] =
    &[(Layer::Forward, Operator::GradientNorm), (Layer::Backward, Operator::GradientNorm)];
const MANIFOLDS_LAPLACIAN: &[(Layer, Operator)] =
    &[(Layer::Forward, Operator::Laplacian), (Layer::Backward, Operator::Laplacian)];
const TOTAL_GRADIENT: &[(Layer, Operator)] = &[(Layer::Total, Operator::GradientNorm)];
const BACKWARD_GRADIENT: &[(Layer, Operator)] = &[(Layer::Backward, Operator::GradientNorm)];

const fn planar(id: &'static str, system: SystemId, params: &'static [(&'static str, f64)]) -> Figure {
    Figure {
        id,
        system,
        params,
        x: [-1.0, 1.0],
        y: [-1.0, 1.0],
        aspect: 1,
        p: 0.5,
        tau_f: 10.0,
        tau_b: 10.0,
        escape_radius: None,
        section: None,
        strobe: None,
        ridges: MANIFOLDS_GRADIENT,
        overlays: &[],
    }
}

const fn window(mut f: Figure, x: [f64; 2], y: [f64; 2]) -> Figure {
    f.x = x;
    f.y = y;
    f
}

const fn horizons(mut f: Figure, tau_f: f64, tau_b: f64) -> Figure {
    f.tau_f = tau_f;
    f.tau_b = tau_b;
    f
}

const fn escape(mut f: Figure, r: f64) -> Figure {
    f.escape_radius = Some(r);
    f
}

const fn ridges(mut f: Figure, r: &'static [(Layer, Operator)]) -> Figure {
    f.ridges = r;
    f
}

const fn overlays(mut f: Figure, o: &'static [Overlay]) -> Figure {
    f.overlays = o;
    f
}

const fn section(id: &'static str, sid: SectionId, gamma: &'static [(&'static str, f64)], classify: bool) -> Figure {
    let (x, y, aspect) = match sid {
        SectionId::Sigma1 => ([-1.6, 1.6], [-0.8, 0.8], 2),
        SectionId::Sigma2 => ([-1.6, 1.6], [-0.8, 0.8], 2),
        SectionId::Sigma3 => ([-0.55, 0.55], [-0.55, 0.55], 1),
    };
    let mut f = planar(id, SystemId::DoubleWell2dof, gamma);
    f.x = x;
    f.y = y;
    f.aspect = aspect;
    f.tau_f = 15.0;
    f.tau_b = 15.0;
    f.section = Some(SectionSetup { id: sid, h0: 0.05, classify });
    f.ridges = MANIFOLDS_LAPLACIAN;
    f.overlays = &[Overlay::EnergyBoundary];
    f
}

const SADDLE: &[(&str, f64)] = &[("lambda", 1.0), ("mu", 2.0)];
const DUFFING_DAMPED: &[(&str, f64)] = &[("alpha", 1.0), ("beta", 1.0), ("delta", 0.3), ("gamma", 0.0), ("omega", 1.2)];
const G01: &[(&str, f64)] = &[("gamma", 0.1)];
const G025: &[(&str, f64)] = &[("gamma", 0.25)];
const G1: &[(&str, f64)] = &[("gamma", 1.0)];
const EQ: &[Overlay] = &[Overlay::Equilibria];

pub const FIGURES: &[Figure] = &[
    horizons(planar("saddle-same-tau", SystemId::LinearSaddle, SADDLE), 8.0, 8.0),
    horizons(planar("saddle-balanced", SystemId::LinearSaddle, SADDLE), 8.0, 4.346),
    ridges(
        window(
            horizons(planar("nonlinear-saddle", SystemId::NonlinearSaddle, &[("lambda", -2.0), ("mu", 1.0)]), 26.0, 25.0),
            [-1.5, 1.5],
            [-1.0, 1.5],
        ),
        TOTAL_GRADIENT,
    ),
    escape(horizons(planar("hopf-beta-neg", SystemId::Hopf, &[("beta", -0.5), ("sigma", 1.0)]), 8.0, 8.0), 4.0),
    escape(horizons(planar("hopf-beta-0", SystemId::Hopf, &[("beta", 0.0), ("sigma", 1.0)]), 8.0, 8.0), 4.0),
    escape(horizons(planar("hopf-beta-pos", SystemId::Hopf, &[("beta", 0.5), ("sigma", 1.0)]), 8.0, 8.0), 4.0),
    ridges(
        escape(window(horizons(planar("vdp-0.1", SystemId::Vanderpol, &[("mu", 0.1)]), 50.0, 50.0), [-3.0, 3.0], [-3.0, 3.0]), 20.0),
        TOTAL_GRADIENT,
    ),
    ridges(
        escape(window(horizons(planar("vdp-0.5", SystemId::Vanderpol, &[("mu", 0.5)]), 50.0, 50.0), [-3.0, 3.0], [-3.0, 3.0]), 20.0),
        TOTAL_GRADIENT,
    ),
    ridges(
        escape(window(horizons(planar("vdp-1.5", SystemId::Vanderpol, &[("mu", 1.5)]), 50.0, 50.0), [-4.0, 4.0], [-4.0, 4.0]), 20.0),
        TOTAL_GRADIENT,
    ),
    ridges(
        escape(window(horizons(planar("vdp-3", SystemId::Vanderpol, &[("mu", 3.0)]), 50.0, 50.0), [-3.0, 3.0], [-6.0, 6.0]), 20.0),
        TOTAL_GRADIENT,
    ),
    overlays(
        window(
            horizons(planar("slow-manifold", SystemId::NonlinearSaddle, &[("lambda", -1.0), ("mu", -0.05)]), 5.0, 5.0),
            [-1.0, 1.0],
            [-0.5, 1.5],
        ),
        &[Overlay::SlowManifold],
    ),
    ridges(
        overlays(
            window(horizons(planar("bead", SystemId::BeadHoop, &[("epsilon", 0.02), ("mu", 2.3)]), 10.0, 10.0), [-PI, PI], [-3.0, 3.0]),
            &[Overlay::SlowManifold, Overlay::Equilibria],
        ),
        MANIFOLDS_LAPLACIAN,
    ),
    overlays(
        escape(window(horizons(planar("lienard", SystemId::VdpLienard, &[("mu", 10.0)]), 50.0, 50.0), [-3.0, 3.0], [-3.0, 3.0]), 6.0),
        &[Overlay::SlowManifold],
    ),
    overlays(
        window(
            horizons(
                planar(
                    "duffing-conservative",
                    SystemId::Duffing,
                    &[("alpha", 1.0), ("beta", 1.0), ("delta", 0.0), ("gamma", 0.0), ("omega", 1.2)],
                ),
                20.0,
                20.0,
            ),
            [-2.0, 2.0],
            [-1.5, 1.5],
        ),
        EQ,
    ),
    overlays(window(horizons(planar("duffing-damped", SystemId::Duffing, DUFFING_DAMPED), 25.0, 25.0), [-2.0, 2.0], [-1.5, 1.5]), EQ),
    Figure {
        strobe: Some(StrobeSetup { ic: [1.0, 0.0], periods: 15000, skip: 100 }),
        ridges: BACKWARD_GRADIENT,
        ..window(
            horizons(
                planar(
                    "duffing-forced",
                    SystemId::Duffing,
                    &[("alpha", 1.0), ("beta", 1.0), ("delta", 0.3), ("gamma", 0.5), ("omega", 1.2)],
                ),
                20.0,
                20.0,
            ),
            [-2.0, 2.0],
            [-1.5, 1.5],
        )
    },
    Figure {
        strobe: Some(StrobeSetup { ic: [1.0, 0.0], periods: 15000, skip: 100 }),
        ridges: BACKWARD_GRADIENT,
        ..window(
            horizons(
                planar(
                    "duffing-ueda",
                    SystemId::Duffing,
                    &[("alpha", 0.0), ("beta", 1.0), ("delta", 0.05), ("gamma", 7.5), ("omega", 1.0)],
                ),
                50.0,
                50.0,
            ),
            [0.0, 4.5],
            [-6.0, 8.0],
        )
    },
    section("dwell-sigma1-gamma0.1", SectionId::Sigma1, G01, false),
    section("dwell-sigma1-gamma0.25", SectionId::Sigma1, G025, false),
    section("dwell-sigma1-gamma1", SectionId::Sigma1, G1, false),
    section("dwell-sigma2-gamma0.1", SectionId::Sigma2, G01, false),
    section("dwell-sigma2-gamma0.25", SectionId::Sigma2, G025, false),
    section("dwell-sigma2-gamma1", SectionId::Sigma2, G1, false),
    section("dwell-sigma3", SectionId::Sigma3, G025, true),
];

pub fn figure(id: &str) -> Option<&'static Figure> {
    FIGURES.iter().find(|f| f.id == id)
}

pub fn ids() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|f| f.id)
}

impl Figure {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }

    /// Node counts for a requested number of nodes along y.
    pub fn resolution(&self, n: usize) -> [usize; 2] {
        [self.aspect * (n - 1) + 1, n]
    }
}
