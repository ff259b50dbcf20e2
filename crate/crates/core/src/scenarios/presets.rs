use crate::climb::InitialControl;
use crate::error::{Error, Result};

use super::config::{
    OptimizerSection, OutputSection, ProblemSection, ScenarioConfig, ScenarioKind,
};

/// Catalog of built-in scenarios, in display order.
pub const PRESETS: &[&str] = &[
    "incentive-v2-zero",
    "incentive-v2-sgn",
    "propaganda-v2-balanced",
    "propaganda-v2-cheap",
    "propaganda-toc1-cheap",
    "awareness-v2",
    "awareness-otoc",
    "opinion-compare-toc1",
    "opinion-compare-v2",
    "opinion-compare-otoc",
];

const A1: [f64; 4] = [3.0, 1.0, 6.0, 2.0];
const V2: [f64; 4] = [4.5, 4.0, 3.0, 3.0];
const TOC1: [f64; 4] = [5.0, 2.0, 3.0, 3.0];
const OTOC: [f64; 4] = [7.0, 4.0, 3.0, 3.0];

fn incentive(name: &str, init: InitialControl, iters: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        problem: ProblemSection {
            kind: ScenarioKind::Incentive,
            a1: A1,
            a0: V2,
            theta: 0.7,
            gamma: None,
            initial: vec![0.7, 0.3],
            horizon: 100.0,
            u_max: Some(1.0),
            c1: None,
            c2: None,
        },
        optimizer: OptimizerSection {
            iters,
            initial_control: init,
            ..OptimizerSection::default()
        },
        integrator: Default::default(),
        output: OutputSection::default(),
    }
}

fn information(
    name: &str,
    kind: ScenarioKind,
    a0: [f64; 4],
    initial: [f64; 3],
    c2: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        problem: ProblemSection {
            kind,
            a1: A1,
            a0,
            theta: 0.5,
            gamma: Some(0.5),
            initial: initial.to_vec(),
            horizon: 50.0,
            u_max: None,
            c1: Some(1.0),
            c2: Some(c2),
        },
        optimizer: OptimizerSection {
            iters: 20,
            ..OptimizerSection::default()
        },
        integrator: Default::default(),
        output: OutputSection {
            tail: 50.0,
            ..OutputSection::default()
        },
    }
}

fn compare(name: &str, a0: [f64; 4]) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        problem: ProblemSection {
            kind: ScenarioKind::OpinionCompare,
            a1: A1,
            a0,
            theta: 0.5,
            gamma: Some(0.5),
            initial: vec![0.5, 0.3, 0.3],
            horizon: 100.0,
            u_max: None,
            c1: None,
            c2: None,
        },
        optimizer: OptimizerSection::default(),
        integrator: Default::default(),
        output: OutputSection::default(),
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    use ScenarioKind::{Awareness, Propaganda};
    let base = [0.5, 0.3, 0.3];
    let cfg = match name {
        "incentive-v2-zero" => incentive(name, InitialControl::Zero, 40),
        "incentive-v2-sgn" => incentive(name, InitialControl::SignThreshold, 20),
        "propaganda-v2-balanced" => information(name, Propaganda, V2, base, 1.0),
        "propaganda-v2-cheap" => information(name, Propaganda, V2, base, 0.001),
        "propaganda-toc1-cheap" => information(name, Propaganda, TOC1, base, 0.001),
        "awareness-v2" => information(name, Awareness, V2, base, 0.001),
        "awareness-otoc" => information(name, Awareness, OTOC, [0.5, 0.8, 0.8], 0.001),
        "opinion-compare-toc1" => compare(name, TOC1),
        "opinion-compare-v2" => compare(name, V2),
        "opinion-compare-otoc" => compare(name, OTOC),
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESETS.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(cfg)
}
