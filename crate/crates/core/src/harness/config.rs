use std::fmt::{self, Write as _};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lds::DisturbanceProfile;
use crate::oco::StepSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
    #[error("no scenario given")]
    MissingScenario,
    #[error("{0}")]
    Invalid(String),
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let s = s.trim().to_ascii_lowercase().replace('-', "_");
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().replace('-', "_") == s)
                    .ok_or_else(|| format!("expected one of {:?}", $name::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>()))
            }
        }
    };
}

named_enum!(
    /// Plant or demo a run is built around.
    Scenario {
        Admire => "admire",
        Desk => "desk",
        DemoOco => "demo-oco",
        SharedControls => "shared-controls",
    }
);

named_enum!(
    ControllerKind {
        Magpc => "magpc",
        Gpc => "gpc",
        Lqr => "lqr",
        Hinf => "hinf",
        Zero => "zero",
    }
);

named_enum!(
    /// Shape of the step size; the numerator comes from `lr_num`.
    LrSchedule {
        Inverse => "inverse",
        InverseSqrt => "inverse_sqrt",
        Constant => "constant",
        Adaptive => "adaptive",
    }
);

impl Scenario {
    /// Number of agents, when the scenario has a plant.
    pub fn agents(&self) -> Option<usize> {
        match self {
            Scenario::Admire => Some(4),
            Scenario::Desk => Some(2),
            _ => None,
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub horizon: usize,
    pub seed: u64,
    pub profile: DisturbanceProfile,
    pub controller: ControllerKind,
    pub lr_num: f64,
    pub lr_schedule: LrSchedule,
    pub h: usize,
    pub m: usize,
    pub burn_in: usize,
    /// 1-based agent index and start time.
    pub failure: Option<(usize, usize)>,
    pub q_scale: f64,
    pub r_scale: f64,
    pub radius: f64,
}

pub const DEFAULT_FAILURE_T: usize = 500;
const MAX_WINDOW: usize = 200;

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            horizon: 2000,
            seed: 0,
            profile: DisturbanceProfile::Gaussian,
            controller: ControllerKind::Magpc,
            lr_num: 0.001,
            lr_schedule: LrSchedule::Inverse,
            h: 5,
            m: 5,
            burn_in: 10,
            failure: None,
            q_scale: 1.0,
            r_scale: 1.0,
            radius: 10.0,
        }
    }

    pub fn schedule(&self) -> StepSchedule {
        match self.lr_schedule {
            LrSchedule::Inverse => StepSchedule::Inverse(self.lr_num),
            LrSchedule::InverseSqrt => StepSchedule::InverseSqrt(self.lr_num),
            LrSchedule::Constant => StepSchedule::Constant(self.lr_num),
            LrSchedule::Adaptive => StepSchedule::Adaptive { diameter: self.lr_num },
        }
    }

    /// 0-based failed agent and start time.
    pub fn failure_zero_based(&self) -> Option<(usize, usize)> {
        self.failure.map(|(a, t)| (a - 1, t))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if self.h == 0 || self.h > MAX_WINDOW || self.m == 0 || self.m > MAX_WINDOW {
            return bad(format!("h and m must lie in 1..={MAX_WINDOW}"));
        }
        if self.burn_in < self.m + self.h {
            return bad(format!("Tb = {} must be at least m + h = {}", self.burn_in, self.m + self.h));
        }
        if !(self.lr_num >= 0.0 && self.lr_num.is_finite()) {
            return bad("lr_num must be finite and non-negative".into());
        }
        for (name, v) in [("Q_scale", self.q_scale), ("R_scale", self.r_scale), ("radius", self.radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if let DisturbanceProfile::Custom(_) = self.profile {
            return bad("custom traces cannot be configured from text".into());
        }
        if let Some((agent, _)) = self.failure {
            match self.scenario.agents() {
                Some(k) if agent >= 1 && agent <= k => {}
                Some(k) => return bad(format!("failure_agent must be in 1..={k}")),
                None => return bad(format!("scenario {} has no actuators to fail", self.scenario)),
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text; parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.to_string());
        kv("T", self.horizon.to_string());
        kv("seed", self.seed.to_string());
        kv("profile", self.profile.to_string());
        kv("controller", self.controller.to_string());
        kv("lr_num", self.lr_num.to_string());
        kv("lr_schedule", self.lr_schedule.to_string());
        kv("h", self.h.to_string());
        kv("m", self.m.to_string());
        kv("Tb", self.burn_in.to_string());
        match self.failure {
            Some((agent, t)) => {
                kv("failure_agent", agent.to_string());
                kv("failure_t", t.to_string());
            }
            None => kv("failure_agent", "none".into()),
        }
        kv("Q_scale", self.q_scale.to_string());
        kv("R_scale", self.r_scale.to_string());
        kv("radius", self.radius.to_string());
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_config_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "scenario",
    "T",
    "seed",
    "profile",
    "controller",
    "lr_num",
    "lr_schedule",
    "h",
    "m",
    "Tb",
    "failure_agent",
    "failure_t",
    "Q_scale",
    "R_scale",
    "radius",
];

/// Parse flat `key = value` text; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, None, &[])
}

/// Parse with an optional scenario fallback and overrides applied last.
pub fn parse_config_with(
    text: &str,
    scenario: Option<Scenario>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            text: raw.to_string(),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    pairs.extend(overrides.iter().cloned());
    for (k, _) in &pairs {
        if !CONFIG_KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
    }

    let scenario = match pairs.iter().rev().find(|(k, _)| k == "scenario") {
        Some((_, v)) => parse_value("scenario", v)?,
        None => scenario.ok_or(ConfigError::MissingScenario)?,
    };
    let mut cfg = ExperimentConfig::new(scenario);
    let mut burn_in = None;
    let mut failure_agent: Option<usize> = None;
    let mut failure_t = None;
    for (k, v) in &pairs {
        match k.as_str() {
            "scenario" => {}
            "T" => cfg.horizon = parse_value(k, v)?,
            "seed" => cfg.seed = parse_value(k, v)?,
            "profile" => cfg.profile = parse_value(k, v)?,
            "controller" => cfg.controller = parse_value(k, v)?,
            "lr_num" => cfg.lr_num = parse_value(k, v)?,
            "lr_schedule" => cfg.lr_schedule = parse_value(k, v)?,
            "h" => cfg.h = parse_value(k, v)?,
            "m" => cfg.m = parse_value(k, v)?,
            "Tb" => burn_in = Some(parse_value(k, v)?),
            "failure_agent" => {
                failure_agent = if v.eq_ignore_ascii_case("none") { None } else { Some(parse_value(k, v)?) }
            }
            "failure_t" => failure_t = Some(parse_value(k, v)?),
            "Q_scale" => cfg.q_scale = parse_value(k, v)?,
            "R_scale" => cfg.r_scale = parse_value(k, v)?,
            "radius" => cfg.radius = parse_value(k, v)?,
            _ => unreachable!("keys checked above"),
        }
    }
    cfg.burn_in = burn_in.unwrap_or(cfg.m + cfg.h);
    cfg.failure = failure_agent.map(|a| (a, failure_t.unwrap_or(DEFAULT_FAILURE_T)));
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admire_defaults() {
        let cfg = parse_config_with("", Some(Scenario::Admire), &[]).unwrap();
        assert_eq!((cfg.h, cfg.m, cfg.burn_in), (5, 5, 10));
        assert_eq!(cfg.schedule(), StepSchedule::Inverse(0.001));
        assert_eq!(cfg.failure, None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_config("T = -1\nscenario = admire"), Err(ConfigError::Value { .. })));
        assert!(matches!(parse_config("T = 10"), Err(ConfigError::MissingScenario)));
        assert!(matches!(parse_config("scenario = desk\nfoo = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(parse_config("scenario = desk\nh = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("scenario = desk\nTb = 3"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("scenario = desk\nfailure_agent = 3"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("scenario desk"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn failure_defaults_to_t500() {
        let cfg = parse_config("scenario = admire\nfailure_agent = 4").unwrap();
        assert_eq!(cfg.failure, Some((4, 500)));
        assert_eq!(cfg.failure_zero_based(), Some((3, 500)));
    }

    #[test]
    fn roundtrip_and_hash() {
        let text = "scenario = desk\nT = 300\nseed = 9\nprofile = sinusoidal\nlr_num = 0.125\nfailure_agent = 2\nfailure_t = 40\nQ_scale = 2.5";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_config_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 16);
        let other = ExperimentConfig { seed: 10, ..cfg.clone() };
        assert_ne!(cfg.hash(), other.hash());
    }
}
