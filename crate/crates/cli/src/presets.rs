//! Built-in scenarios. Their parameters are illustrative defaults chosen so
//! that the analytic checks resolve cleanly on a desktop machine.

use crate::config::{parse_config, ConfigError, ScenarioConfig};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "free_gaussian",
        summary: "1D free Gaussian packet spreading from sigma0 = 1",
        text: include_str!("../presets/free_gaussian.toml"),
    },
    Preset {
        name: "harmonic_ground",
        summary: "1D harmonic ground state over one period",
        text: include_str!("../presets/harmonic_ground.toml"),
    },
    Preset {
        name: "harmonic_coherent",
        summary: "1D displaced ground state oscillating in a harmonic well",
        text: include_str!("../presets/harmonic_coherent.toml"),
    },
    Preset {
        name: "plane_wave",
        summary: "1D plane wave on a periodic box",
        text: include_str!("../presets/plane_wave.toml"),
    },
    Preset {
        name: "vortex",
        summary: "2D stationary singly wound vortex in a harmonic trap",
        text: include_str!("../presets/vortex.toml"),
    },
    Preset {
        name: "double_slit",
        summary: "2D two-source interference with streamlines and a fringe screen",
        text: include_str!("../presets/double_slit.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_config(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let p = find(name).ok_or_else(|| ConfigError {
        section: String::new(),
        key: String::new(),
        message: format!("unknown preset `{name}`"),
    })?;
    parse_config(p.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let c = preset_config(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            c.build().unwrap();
        }
        assert!(preset_config("nope").is_err());
    }
}
