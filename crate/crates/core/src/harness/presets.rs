//! Built-in scenario presets for the simulation studies.
//!
//! The equality-test scenarios declare exactly the tested spikes, which is
//! the regime where the normal reference is calibrated at realistic sample
//! sizes (the chi-square leakage terms vanish when the tested set covers all
//! spikes). The orthogonality scenarios carry the extra background spike;
//! its leakage is part of the simulated reference law. `*-full` variants of
//! the equality scenarios with the background spike are available for
//! studying that leakage directly.

use crate::error::{Error, Result};
use crate::model::EntryLaw;

use super::config::{
    AlternativeConfig, HypothesisConfig, ModelConfig, OutputPaths, RotationConfig, ScenarioConfig,
    SpikeConfig, TestKindConfig,
};

const PRESET_SEED: u64 = 20260811;

/// Parameters accepted by every preset.
#[derive(Debug, Clone, Copy)]
pub struct PresetParams {
    pub d: f64,
    pub y: f64,
    pub n: usize,
    pub two_point: bool,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            d: 2.0,
            y: 0.1,
            n: 500,
            two_point: false,
            reps: None,
            seed: None,
        }
    }
}

fn law(two_point: bool) -> EntryLaw {
    if two_point {
        EntryLaw::two_point_third()
    } else {
        EntryLaw::Gaussian
    }
}

fn law_tag(two_point: bool) -> &'static str {
    if two_point {
        "two-point"
    } else {
        "gaussian"
    }
}

/// All preset names, for CLI listings.
pub fn names() -> &'static [&'static str] {
    &[
        "scenario-i",
        "scenario-ii",
        "scenario-i-full",
        "scenario-ii-full",
        "scenario-a",
        "scenario-b",
        "figure1",
        "figure2",
    ]
}

/// Build a named preset.
pub fn build(name: &str, p: PresetParams) -> Result<ScenarioConfig> {
    let mut cfg = match name {
        "scenario-i" => equality_scenario(
            format!("scenario-i-d{}-y{}-n{}-{}", p.d, p.y, p.n, law_tag(p.two_point)),
            vec![
                SpikeConfig {
                    d: p.d + 7.0,
                    multiplicity: 1,
                },
                SpikeConfig {
                    d: 7.0,
                    multiplicity: 1,
                },
            ],
            p,
        ),
        "scenario-i-full" => equality_scenario(
            format!(
                "scenario-i-full-d{}-y{}-n{}-{}",
                p.d,
                p.y,
                p.n,
                law_tag(p.two_point)
            ),
            vec![
                SpikeConfig {
                    d: p.d + 7.0,
                    multiplicity: 1,
                },
                SpikeConfig {
                    d: 7.0,
                    multiplicity: 1,
                },
                SpikeConfig {
                    d: 5.0,
                    multiplicity: 1,
                },
            ],
            p,
        ),
        "scenario-ii" => equality_scenario(
            format!("scenario-ii-d{}-y{}-n{}-{}", p.d, p.y, p.n, law_tag(p.two_point)),
            vec![SpikeConfig {
                d: p.d + 5.0,
                multiplicity: 2,
            }],
            p,
        ),
        "scenario-ii-full" => equality_scenario(
            format!(
                "scenario-ii-full-d{}-y{}-n{}-{}",
                p.d,
                p.y,
                p.n,
                law_tag(p.two_point)
            ),
            vec![
                SpikeConfig {
                    d: p.d + 5.0,
                    multiplicity: 2,
                },
                SpikeConfig {
                    d: 5.0,
                    multiplicity: 1,
                },
            ],
            p,
        ),
        "scenario-a" => orthogonality_scenario(
            format!("scenario-a-d{}-y{}-n{}-{}", p.d, p.y, p.n, law_tag(p.two_point)),
            vec![
                SpikeConfig {
                    d: p.d + 7.0,
                    multiplicity: 1,
                },
                SpikeConfig {
                    d: 7.0,
                    multiplicity: 1,
                },
                SpikeConfig {
                    d: 5.0,
                    multiplicity: 1,
                },
            ],
            p,
        ),
        "scenario-b" => orthogonality_scenario(
            format!("scenario-b-d{}-y{}-n{}-{}", p.d, p.y, p.n, law_tag(p.two_point)),
            vec![
                SpikeConfig {
                    d: p.d + 5.0,
                    multiplicity: 2,
                },
                SpikeConfig {
                    d: 5.0,
                    multiplicity: 1,
                },
            ],
            p,
        ),
        "figure1" => {
            let mut cfg = equality_scenario(
                format!("figure1-d{}-{}", p.d, law_tag(p.two_point)),
                vec![SpikeConfig {
                    d: p.d,
                    multiplicity: 1,
                }],
                PresetParams {
                    y: 0.5,
                    n: 500,
                    reps: Some(p.reps.unwrap_or(8000)),
                    ..p
                },
            );
            cfg.hypothesis.z0_axes = Some(vec![1]);
            cfg.hypothesis.target_spikes = vec![1];
            cfg.alternative = Some(AlternativeConfig {
                rotations: vec![RotationConfig {
                    from_axis: 1,
                    toward_axis: 4,
                }],
            });
            cfg
        }
        "figure2" => {
            let mut cfg = orthogonality_scenario(
                format!("figure2-d{}-{}", p.d, law_tag(p.two_point)),
                vec![SpikeConfig {
                    d: p.d,
                    multiplicity: 1,
                }],
                PresetParams {
                    y: 0.5,
                    n: 500,
                    reps: Some(p.reps.unwrap_or(8000)),
                    ..p
                },
            );
            cfg.hypothesis.z0_axes = Some(vec![3]);
            cfg.hypothesis.target_spikes = vec![1];
            cfg.alternative = Some(AlternativeConfig {
                rotations: vec![RotationConfig {
                    from_axis: 3,
                    toward_axis: 1,
                }],
            });
            cfg
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset '{other}'; known presets: {}",
                names().join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn equality_scenario(name: String, spikes: Vec<SpikeConfig>, p: PresetParams) -> ScenarioConfig {
    ScenarioConfig {
        name,
        model: ModelConfig {
            n: p.n,
            y: p.y,
            spikes,
            directions: super::config::DirectionsConfig::Token("standard-basis".into()),
            law: law(p.two_point),
        },
        hypothesis: HypothesisConfig {
            kind: TestKindConfig::Equality,
            z0_axes: Some(vec![1, 2]),
            z0_matrix: None,
            target_spikes: vec![1, 2],
        },
        alternative: Some(AlternativeConfig {
            rotations: vec![
                RotationConfig {
                    from_axis: 1,
                    toward_axis: 4,
                },
                RotationConfig {
                    from_axis: 2,
                    toward_axis: 5,
                },
            ],
        }),
        reps: p.reps.unwrap_or(2000),
        level: 0.1,
        seed: p.seed.unwrap_or(PRESET_SEED),
        mixture_draws: 20_000,
        outputs: OutputPaths::default(),
    }
}

fn orthogonality_scenario(name: String, spikes: Vec<SpikeConfig>, p: PresetParams) -> ScenarioConfig {
    ScenarioConfig {
        name,
        model: ModelConfig {
            n: p.n,
            y: p.y,
            spikes,
            directions: super::config::DirectionsConfig::Token("standard-basis".into()),
            law: law(p.two_point),
        },
        hypothesis: HypothesisConfig {
            kind: TestKindConfig::Orthogonality,
            z0_axes: Some(vec![3, 4]),
            z0_matrix: None,
            target_spikes: vec![1, 2],
        },
        alternative: Some(AlternativeConfig {
            rotations: vec![
                RotationConfig {
                    from_axis: 3,
                    toward_axis: 1,
                },
                RotationConfig {
                    from_axis: 4,
                    toward_axis: 2,
                },
            ],
        }),
        reps: p.reps.unwrap_or(2000),
        level: 0.1,
        seed: p.seed.unwrap_or(PRESET_SEED),
        mixture_draws: 20_000,
        outputs: OutputPaths::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in names() {
            let cfg = build(
                name,
                PresetParams {
                    d: 5.0,
                    y: 1.0,
                    n: 200,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(cfg.reps >= 1000);
        }
        assert!(build("nope", PresetParams::default()).is_err());
    }

    #[test]
    fn scenario_parameters() {
        let cfg = build(
            "scenario-i",
            PresetParams {
                d: 2.0,
                y: 0.1,
                n: 500,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.model.spikes[0].d, 9.0);
        assert_eq!(cfg.model.spikes[1].d, 7.0);
        assert_eq!(cfg.dim(), 50);
        let cfg = build(
            "scenario-b",
            PresetParams {
                d: 5.0,
                y: 1.0,
                n: 200,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.model.spikes[0].d, 10.0);
        assert_eq!(cfg.model.spikes[0].multiplicity, 2);
        assert_eq!(cfg.model.spikes[1].d, 5.0);
        assert_eq!(cfg.hypothesis.z0_axes, Some(vec![3, 4]));
    }

    #[test]
    fn figure_presets_single_spike() {
        let cfg = build(
            "figure1",
            PresetParams {
                d: 10.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.model.spikes.len(), 1);
        assert_eq!(cfg.reps, 8000);
        assert_eq!(cfg.model.y, 0.5);
        let cfg = build(
            "figure2",
            PresetParams {
                d: 10.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.hypothesis.z0_axes, Some(vec![3]));
    }
}
