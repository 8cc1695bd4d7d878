//! Synthetic embedding dumps with planted stage boundaries, and the
//! idealized accuracy curves for the three reference models.
//!
//! A sample of class `y` under condition `c` at layer `l` is embedded as
//!
//! ```text
//! alpha(l) * ((1 - lambda_c(l)) * mu[y] + lambda_c(l) * mu[pi(y)]) + sigma * eps
//! ```
//!
//! where `mu` are unit-norm Gaussian class prototypes, `pi(y) = (y + 1) mod N`
//! is a fixed derangement, `alpha` ramps from 0.2 at layer 1 to 1.0 at
//! `g_end`, and `eps` is a standard Gaussian draw shared by every condition
//! for the same (sample, layer), as the image is the same under every prompt.
//! Once `lambda` passes 0.5 the probe prefers `pi(y)`, so each schedule
//! controls where a condition's accuracy collapses.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dump::{
    write_dump, BlockKey, Condition, ConditionKind, DumpError, DumpHeader, SampleMeta, Split,
};
use crate::eval::{CurveSet, EvalError};
use crate::rng::{self, Gaussian};
use crate::variants::{anchor_condition, builtin_catalog};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {field}: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error("unknown fixture {0:?} (expected llava15, llava_next or qwen2vl)")]
    UnknownFixture(String),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Curves(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedBoundaries {
    pub g_end: u32,
    pub r_start: u32,
    pub r_end: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub lambda_lex_peak: f64,
    pub lambda_sem: f64,
    pub lambda_fmt_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_layers: u32,
    pub hidden_dim: u32,
    pub num_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub planted: PlantedBoundaries,
    pub noise_sigma: f64,
    pub corruption: Corruption,
    pub noncompliance_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_layers: 16,
            hidden_dim: 64,
            num_classes: 8,
            train_per_class: 60,
            test_per_class: 40,
            planted: PlantedBoundaries {
                g_end: 3,
                r_start: 9,
                r_end: 11,
            },
            noise_sigma: 0.05,
            corruption: Corruption {
                lambda_lex_peak: 0.6,
                lambda_sem: 0.6,
                lambda_fmt_peak: 0.6,
            },
            noncompliance_rate: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |field, message: String| Err(SynthError::InvalidConfig { field, message });
        let PlantedBoundaries {
            g_end,
            r_start,
            r_end,
        } = self.planted;
        if self.num_layers == 0 {
            return fail("num_layers", "must be >= 1".into());
        }
        if g_end < 1 {
            return fail("planted.g_end", format!("must be >= 1 (got {g_end})"));
        }
        if g_end >= r_start {
            return fail(
                "planted.g_end",
                format!("must be < planted.r_start (got g_end={g_end}, r_start={r_start})"),
            );
        }
        if r_start > r_end {
            return fail(
                "planted.r_start",
                format!("must be <= planted.r_end (got r_start={r_start}, r_end={r_end})"),
            );
        }
        if r_end > self.num_layers {
            return fail(
                "planted.r_end",
                format!(
                    "must be <= num_layers (got r_end={r_end}, num_layers={})",
                    self.num_layers
                ),
            );
        }
        if self.num_classes < 2 {
            return fail(
                "num_classes",
                format!("must be >= 2 (got {})", self.num_classes),
            );
        }
        if (self.hidden_dim as usize) < self.num_classes {
            return fail(
                "hidden_dim",
                format!(
                    "must be >= num_classes (got hidden_dim={}, num_classes={})",
                    self.hidden_dim, self.num_classes
                ),
            );
        }
        if self.train_per_class == 0 {
            return fail("train_per_class", "must be >= 1".into());
        }
        if self.test_per_class == 0 {
            return fail("test_per_class", "must be >= 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(
                "noise_sigma",
                format!("must be finite and >= 0 (got {})", self.noise_sigma),
            );
        }
        for (field, v) in [
            (
                "corruption.lambda_lex_peak",
                self.corruption.lambda_lex_peak,
            ),
            ("corruption.lambda_sem", self.corruption.lambda_sem),
            (
                "corruption.lambda_fmt_peak",
                self.corruption.lambda_fmt_peak,
            ),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(field, format!("must be in [0, 1] (got {v})"));
            }
        }
        if !(0.0..1.0).contains(&self.noncompliance_rate) {
            return fail(
                "noncompliance_rate",
                format!("must be in [0, 1) (got {})", self.noncompliance_rate),
            );
        }
        Ok(())
    }

    /// Signal scale at `layer`.
    pub fn alpha(&self, layer: u32) -> f64 {
        let g = self.planted.g_end;
        if g <= 1 || layer >= g {
            1.0
        } else {
            0.2 + 0.8 * (layer - 1) as f64 / (g - 1) as f64
        }
    }

    /// Class-mixing weight for a condition kind at `layer`.
    pub fn mixing(&self, kind: ConditionKind, layer: u32) -> f64 {
        let PlantedBoundaries {
            g_end: g,
            r_start: rs,
            r_end: re,
        } = self.planted;
        let c = self.corruption;
        let l = layer;
        let lexical = || {
            if l <= g {
                0.0
            } else if l < rs {
                c.lambda_lex_peak
            } else if l <= re + 1 {
                // Linear decay, reaching 0 at re + 1.
                c.lambda_lex_peak * (re + 1 - l) as f64 / (re + 2 - rs) as f64
            } else {
                0.0
            }
        };
        match kind {
            ConditionKind::Anchor => 0.0,
            ConditionKind::Lexical => lexical(),
            ConditionKind::SemanticNegation if l >= rs => c.lambda_sem,
            ConditionKind::SemanticNegation => lexical(),
            ConditionKind::OutputFormat => {
                if l <= g {
                    0.0
                } else if l < rs {
                    // 80% of the lexical level, climbing to it at rs - 1, so
                    // the format curve's last minimum sits just before rs.
                    let t = (l - g) as f64 / (rs - 1 - g) as f64;
                    c.lambda_lex_peak * (0.8 + 0.2 * t)
                } else if l < re {
                    // Just under the flip point, easing off towards re, so
                    // accuracy climbs but stays below its peak until re.
                    let t = (l - rs) as f64 / (re - rs) as f64;
                    c.lambda_lex_peak.min(0.5) * (0.98 - 0.1 * t)
                } else if l == re {
                    0.0
                } else {
                    c.lambda_fmt_peak * (l - re) as f64 / (self.num_layers - re) as f64
                }
            }
        }
    }
}

/// A dump held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDump {
    pub header: DumpHeader,
    pub tensors: BTreeMap<BlockKey, Array2<f32>>,
}

impl EmbeddingDump {
    pub fn write<W: Write>(&self, writer: W) -> Result<DumpHeader, DumpError> {
        write_dump(writer, &self.header, &self.tensors)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DumpError> {
        let mut out = Vec::new();
        self.write(&mut out)?;
        Ok(out)
    }
}

fn unit_gaussian<R: Rng>(rng: &mut R, g: &mut Gaussian, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| g.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<EmbeddingDump, SynthError> {
    cfg.validate()?;
    let (n, d, layers) = (cfg.num_classes, cfg.hidden_dim as usize, cfg.num_layers);
    let mut rng = rng::seeded(cfg.seed);
    let mut gauss = Gaussian::new();

    let prototypes: Vec<Vec<f64>> = (0..n)
        .map(|_| unit_gaussian(&mut rng, &mut gauss, d))
        .collect();

    let conditions: Vec<Condition> = builtin_catalog(&anchor_condition(0))
        .expect("builtin catalog applies to the builtin anchor");

    let mut samples = Vec::new();
    for (split, per_class) in [
        (Split::Train, cfg.train_per_class),
        (Split::Test, cfg.test_per_class),
    ] {
        let tag = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        for class_index in 0..n {
            for i in 0..per_class {
                let compliance = conditions
                    .iter()
                    .map(|c| (c.id, rng.random::<f64>() >= cfg.noncompliance_rate))
                    .collect();
                samples.push(SampleMeta {
                    sample_id: format!("{tag}-c{class_index}-{i:04}"),
                    class_index,
                    split,
                    compliance,
                });
            }
        }
    }

    let class_names = (0..n).map(|i| format!("class_{i}")).collect();
    let header = DumpHeader::new(
        "synthetic",
        layers,
        d as u32,
        class_names,
        conditions.clone(),
        samples,
    );

    let rows = header.samples.len();
    let mut tensors = BTreeMap::new();
    for layer in 1..=layers {
        let noise: Vec<f64> = (0..rows * d)
            .map(|_| cfg.noise_sigma * gauss.sample(&mut rng))
            .collect();
        let alpha = cfg.alpha(layer);
        for c in &conditions {
            let lambda = cfg.mixing(c.kind, layer);
            let m = Array2::from_shape_fn((rows, d), |(r, j)| {
                let y = header.samples[r].class_index;
                let mixed = (1.0 - lambda) * prototypes[y][j] + lambda * prototypes[(y + 1) % n][j];
                (alpha * mixed + noise[r * d + j]) as f32
            });
            tensors.insert((c.id, layer), m);
        }
    }
    Ok(EmbeddingDump { header, tensors })
}

pub fn write_synth<W: Write>(cfg: &SynthConfig, writer: W) -> Result<DumpHeader, SynthError> {
    Ok(synth_generate(cfg)?.write(writer)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Llava15,
    LlavaNext,
    Qwen2Vl,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Llava15, Fixture::LlavaNext, Fixture::Qwen2Vl];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Llava15 => "llava15",
            Fixture::LlavaNext => "llava_next",
            Fixture::Qwen2Vl => "qwen2vl",
        }
    }

    /// Raw CSV, in the curve-set CSV format.
    pub fn csv(self) -> &'static str {
        match self {
            Fixture::Llava15 => include_str!("../fixtures/llava15.csv"),
            Fixture::LlavaNext => include_str!("../fixtures/llava_next.csv"),
            Fixture::Qwen2Vl => include_str!("../fixtures/qwen2vl.csv"),
        }
    }
}

impl std::str::FromStr for Fixture {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SynthError::UnknownFixture(s.to_string()))
    }
}

/// Chance level assumed for the fixture curves (ten classes).
pub const FIXTURE_CHANCE: f64 = 0.1;

pub fn fixture_curves(name: &str) -> Result<CurveSet, SynthError> {
    let fixture: Fixture = name.parse()?;
    Ok(CurveSet::read_csv(
        fixture.csv().as_bytes(),
        FIXTURE_CHANCE,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SynthConfig::default().validate().unwrap();
    }

    #[test]
    fn boundary_constraints_name_fields() {
        let mut cfg = SynthConfig::default();
        cfg.planted.g_end = 9;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(
            err.contains("planted.g_end") && err.contains("r_start"),
            "{err}"
        );

        let mut cfg = SynthConfig::default();
        cfg.planted.r_end = 17;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("planted.r_end"));

        let cfg = SynthConfig {
            hidden_dim: 4,
            ..SynthConfig::default()
        };
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("hidden_dim"));

        let mut cfg = SynthConfig::default();
        cfg.corruption.lambda_sem = 1.5;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("lambda_sem"));
    }

    #[test]
    fn schedules_follow_planted_structure() {
        let cfg = SynthConfig::default();
        let lex: Vec<f64> = (1..=16)
            .map(|l| cfg.mixing(ConditionKind::Lexical, l))
            .collect();
        let fmt: Vec<f64> = (1..=16)
            .map(|l| cfg.mixing(ConditionKind::OutputFormat, l))
            .collect();
        let sem: Vec<f64> = (1..=16)
            .map(|l| cfg.mixing(ConditionKind::SemanticNegation, l))
            .collect();
        // grounding: clean
        assert!(lex[..3].iter().chain(&fmt[..3]).all(|&v| v == 0.0));
        // lexical integration: past the 0.5 flip point
        assert!(lex[3..8].iter().all(|&v| v == 0.6));
        assert!(fmt[3..8].iter().all(|&v| v > 0.45));
        assert!(fmt[3..8].windows(2).all(|w| w[1] > w[0]));
        // reasoning: format eases below the flip point, then 0 at r_end
        assert!(fmt[8] < fmt[7] && fmt[9] < fmt[8]);
        assert!(fmt[8..10].iter().all(|&v| v > 0.4 && v < 0.5));
        assert_eq!(fmt[10], 0.0);
        // decoding: lexical recovered, format and semantic corrupted
        assert!(lex[11..].iter().all(|&v| v == 0.0));
        assert!(fmt[11..].windows(2).all(|w| w[1] > w[0]));
        assert_eq!(fmt[15], 0.6);
        assert!(sem[8..].iter().all(|&v| v == 0.6));
        assert_eq!(&sem[..8], &lex[..8]);
    }

    #[test]
    fn alpha_ramp() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.alpha(1), 0.2);
        assert!((cfg.alpha(2) - 0.6).abs() < 1e-12);
        assert_eq!(cfg.alpha(3), 1.0);
        assert_eq!(cfg.alpha(16), 1.0);
    }

    #[test]
    fn zero_noise_zero_corruption_blocks_match_anchor() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            corruption: Corruption {
                lambda_lex_peak: 0.0,
                lambda_sem: 0.0,
                lambda_fmt_peak: 0.0,
            },
            num_layers: 6,
            planted: PlantedBoundaries {
                g_end: 2,
                r_start: 4,
                r_end: 5,
            },
            train_per_class: 3,
            test_per_class: 2,
            ..SynthConfig::default()
        };
        let dump = synth_generate(&cfg).unwrap();
        for layer in 1..=6 {
            let anchor = &dump.tensors[&(0, layer)];
            for c in 1..5 {
                assert_eq!(&dump.tensors[&(c, layer)], anchor);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            train_per_class: 4,
            test_per_class: 3,
            ..SynthConfig::default()
        };
        let a = synth_generate(&cfg).unwrap().to_bytes().unwrap();
        let b = synth_generate(&cfg).unwrap().to_bytes().unwrap();
        assert_eq!(a, b);
        let other = synth_generate(&SynthConfig { seed: 1, ..cfg })
            .unwrap()
            .to_bytes()
            .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn header_shape() {
        let dump = synth_generate(&SynthConfig::default()).unwrap();
        let h = &dump.header;
        assert_eq!(h.samples.len(), 8 * 100);
        assert_eq!(h.conditions.len(), 5);
        assert_eq!(h.blocks.len(), 5 * 16);
        assert!(crate::dump::header_violations(h).is_empty());
        let noncompliant = h
            .samples
            .iter()
            .flat_map(|s| s.compliance.values())
            .filter(|&&ok| !ok)
            .count();
        let rate = noncompliant as f64 / (800.0 * 5.0);
        assert!((rate - 0.05).abs() < 0.02, "{rate}");
    }

    #[test]
    fn fixtures_load() {
        for f in Fixture::ALL {
            let set = fixture_curves(f.name()).unwrap();
            assert_eq!(set.lexical.len(), 2);
            assert_eq!(set.semantic.len(), 1);
            assert_eq!(set.format.len(), 1);
        }
        assert_eq!(fixture_curves("llava15").unwrap().num_layers(), 32);
        assert_eq!(fixture_curves("qwen2vl").unwrap().num_layers(), 28);
        assert!(matches!(
            fixture_curves("gpt"),
            Err(SynthError::UnknownFixture(_))
        ));
    }
}
