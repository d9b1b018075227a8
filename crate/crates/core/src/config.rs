//! Flat `key: value` run configuration.
//!
//! Blank lines and lines starting with `#` are skipped. Flow keys are the [`FlowConfig`]
//! field names; scenario keys are `scenario`, `name`, `n`, `k`, `sizes`, `lengths`, `order`,
//! `generator`, `seed`, `amplitude` and `snapshot`. A `scenario` preset is applied before
//! every other key regardless of its position in the file.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use crate::flow::{Background, FlowConfig, Gauge, PhiLine, Renormalize, Variant};
use crate::grid::Grid;
use crate::scenario::{Generator, Scenario};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub scenario: Scenario,
    pub lengths: Vec<f64>,
    pub order: usize,
}

const FLOW_KEYS: [&str; 16] = [
    "lambda1",
    "lambda2",
    "c",
    "c1",
    "c2",
    "variant",
    "gauge",
    "dt",
    "adaptive",
    "cfl",
    "renormalize",
    "t_end",
    "background",
    "monitor_cadence",
    "snapshot_cadence",
    "phi_line",
];

fn num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("line {line}: `{key}` expects a number, got `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str, line: usize) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim(), line)).collect()
}

fn choice<T: Copy>(key: &str, v: &str, line: usize, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(name, _)| *name == v).map(|o| o.1).ok_or_else(|| {
        let names: Vec<_> = options.iter().map(|o| o.0).collect();
        Error::Config(format!("line {line}: `{key}` must be one of {}, got `{v}`", names.join("|")))
    })
}

/// Sets one [`FlowConfig`] field from its textual value.
pub fn set_flow_key(cfg: &mut FlowConfig, key: &str, v: &str, line: usize) -> Result<()> {
    match key {
        "lambda1" => cfg.lambda1 = num(key, v, line)?,
        "lambda2" => cfg.lambda2 = num(key, v, line)?,
        "c" => cfg.c = num(key, v, line)?,
        "c1" => cfg.c1 = num(key, v, line)?,
        "c2" => cfg.c2 = num(key, v, line)?,
        "dt" => cfg.dt = num(key, v, line)?,
        "cfl" => cfg.cfl = num(key, v, line)?,
        "t_end" => cfg.t_end = num(key, v, line)?,
        "monitor_cadence" => cfg.monitor_cadence = num(key, v, line)?,
        "snapshot_cadence" => cfg.snapshot_cadence = num(key, v, line)?,
        "adaptive" => cfg.adaptive = choice(key, v, line, &[("true", true), ("false", false)])?,
        "variant" => cfg.variant = choice(key, v, line, &[("dynamic_phi", Variant::DynamicPhi), ("fixed_phi", Variant::FixedPhi)])?,
        "gauge" => {
            cfg.gauge = choice(key, v, line, &[("none", Gauge::None), ("deturck", Gauge::DeTurck), ("hw", Gauge::Hw)])?
        }
        "renormalize" => {
            cfg.renormalize = choice(key, v, line, &[("off", Renormalize::Off), ("project_phi", Renormalize::ProjectPhi)])?
        }
        "background" => {
            cfg.background = choice(key, v, line, &[("flat", Background::Flat), ("initial", Background::Initial)])?
        }
        "phi_line" => cfg.phi_line = choice(key, v, line, &[("flow", PhiLine::Flow), ("alternative", PhiLine::Alternative)])?,
        _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
    }
    Ok(())
}

/// Splits the text into `(line number, key, value)` triples.
fn pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key: value`, got `{line}`", i + 1)))?;
        let v = v.split(" #").next().unwrap_or("").trim();
        out.push((i + 1, k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let entries = pairs(text)?;
        let mut scenario = match entries.iter().find(|e| e.1 == "scenario") {
            Some((_, _, v)) => Scenario::preset(v)?,
            None => Scenario::preset("t2")?,
        };
        let mut flow = FlowConfig::default();
        let mut lengths = None;
        let mut order = 2;
        let mut generator = None;
        let (mut seed, mut amplitude, mut snapshot) = (None, None, None);
        for (line, key, v) in &entries {
            let (line, key, v) = (*line, key.as_str(), v.as_str());
            match key {
                "scenario" => {}
                "name" => scenario.name = v.to_string(),
                "n" => scenario.n = num(key, v, line)?,
                "k" => scenario.k = num(key, v, line)?,
                "sizes" => scenario.sizes = list(key, v, line)?,
                "lengths" => lengths = Some(list(key, v, line)?),
                "order" => order = num(key, v, line)?,
                "seed" => seed = Some(num(key, v, line)?),
                "amplitude" => amplitude = Some(num(key, v, line)?),
                "snapshot" => snapshot = Some(v.to_string()),
                "generator" => {
                    generator = Some(choice(
                        key,
                        v,
                        line,
                        &[("flat_stationary", 0), ("perturbed_stationary", 1), ("random_smooth", 2), ("from_snapshot", 3)],
                    )?)
                }
                _ if FLOW_KEYS.contains(&key) => {
                    set_flow_key(&mut flow, key, v, line)?;
                    scenario.overrides.push((key.to_string(), v.to_string()));
                }
                _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        if scenario.sizes.len() == 1 && scenario.n > 1 {
            scenario.sizes = vec![scenario.sizes[0]; scenario.n];
        }
        if scenario.sizes.len() != scenario.n {
            return Err(Error::Config(format!("sizes lists {} axes but n = {}", scenario.sizes.len(), scenario.n)));
        }
        let (def_seed, def_amp) = match scenario.generator {
            Generator::PerturbedStationary { seed, amplitude } | Generator::RandomSmooth { seed, amplitude } => (seed, amplitude),
            _ => (1, 0.05),
        };
        let (seed, amplitude) = (seed.unwrap_or(def_seed), amplitude.unwrap_or(def_amp));
        scenario.generator = match generator {
            None => match scenario.generator {
                Generator::RandomSmooth { .. } => Generator::RandomSmooth { seed, amplitude },
                Generator::PerturbedStationary { .. } => Generator::PerturbedStationary { seed, amplitude },
                g => g,
            },
            Some(0) => Generator::FlatStationary,
            Some(1) => Generator::PerturbedStationary { seed, amplitude },
            Some(2) => Generator::RandomSmooth { seed, amplitude },
            Some(_) => Generator::FromSnapshot(
                snapshot.ok_or_else(|| Error::Config("generator from_snapshot needs a `snapshot` path".into()))?,
            ),
        };
        let lengths = lengths.unwrap_or_else(|| vec![2.0 * PI; scenario.n]);
        let out = Self { flow, scenario, lengths, order };
        out.flow.validate(out.scenario.n, out.scenario.k)?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Replaces the seed of a seeded generator.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.generator = match self.scenario.generator {
            Generator::PerturbedStationary { amplitude, .. } => Generator::PerturbedStationary { seed, amplitude },
            Generator::RandomSmooth { amplitude, .. } => Generator::RandomSmooth { seed, amplitude },
            g => g,
        };
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.scenario.sizes.clone(), self.lengths.clone(), self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_t2_preset() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!((c.scenario.n, c.scenario.k), (2, 1));
        assert_eq!(c.scenario.sizes, vec![64, 64]);
        assert_eq!(c.lengths, vec![2.0 * PI; 2]);
        assert_eq!(c.flow, FlowConfig::default());
    }

    #[test]
    fn keys_comments_and_broadcast() {
        let text = "\
# deturck run
scenario: t3
sizes: 16   # broadcast
gauge: deturck
lambda2: 0.25
adaptive: true
renormalize: project_phi
generator: perturbed_stationary
seed: 9
t_end: 0.5
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.scenario.sizes, vec![16; 3]);
        assert_eq!(c.flow.gauge, Gauge::DeTurck);
        assert_eq!(c.flow.lambda2, 0.25);
        assert!(c.flow.adaptive);
        assert_eq!(c.flow.renormalize, Renormalize::ProjectPhi);
        assert_eq!(c.scenario.generator, Generator::PerturbedStationary { seed: 9, amplitude: 0.05 });
        assert_eq!(c.grid().unwrap().sizes(), &[16, 16, 16]);
        let c = c.with_seed(4);
        assert_eq!(c.scenario.generator, Generator::PerturbedStationary { seed: 4, amplitude: 0.05 });
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let c = RunConfig::parse("n: 5\nk: 2\nsizes: 6\nscenario: t3\n").unwrap();
        assert_eq!((c.scenario.n, c.scenario.k), (5, 2));
        assert_eq!(c.scenario.sizes, vec![6; 5]);
    }

    fn err_text(text: &str) -> String {
        match RunConfig::parse(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        assert!(err_text("gauge: none\nbogus: 1\n").contains("line 2"));
        assert!(err_text("dt: fast").contains("expects a number"));
        assert!(err_text("gauge: sideways").contains("none|deturck|hw"));
        assert!(err_text("no colon here").contains("line 1"));
        assert!(err_text("sizes: 8,8,8").contains("n = 2"));
        assert!(err_text("generator: from_snapshot").contains("snapshot"));
    }

    #[test]
    fn dimension_rule_checked_on_parse() {
        assert!(err_text("scenario: t3\nc: 1").contains("3k = n + 1"));
        assert!(RunConfig::parse("scenario: t5\nc: 1").is_ok());
    }
}
