//! Compliance filtering, per-layer probe accuracy and the end-to-end
//! train/evaluate pipeline.

use std::collections::BTreeMap;
use std::io::{self, Read, Seek, Write};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dump::{ConditionKind, Dump, DumpError, DumpHeader, Split};
use crate::probe::{train_probe, LinearProbe, ProbeError, TrainConfig};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dump: {0}")]
    Dump(#[from] DumpError),
    #[error("probe for layer {layer}: {source}")]
    Probe { layer: u32, source: ProbeError },
    #[error("unknown condition id {0}")]
    UnknownCondition(u32),
    #[error("dump declares no anchor condition")]
    NoAnchor,
    #[error("empty evaluation set for condition {0}")]
    EmptyEvaluationSet(u32),
    #[error("probes do not cover layers 1..={expected}: {detail}")]
    ProbeCoverage { expected: u32, detail: String },
    #[error("malformed curves: {0}")]
    Curves(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Accuracy per layer (index 0 is layer 1) for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub condition_id: u32,
    pub kind: ConditionKind,
    pub accuracy: Vec<f64>,
    pub included_count: usize,
    pub excluded_count: usize,
}

impl LayerCurve {
    pub fn num_layers(&self) -> usize {
        self.accuracy.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub anchor: LayerCurve,
    pub lexical: Vec<LayerCurve>,
    pub semantic: Vec<LayerCurve>,
    pub format: Vec<LayerCurve>,
    pub chance_level: f64,
}

impl CurveSet {
    /// Sorts curves into their kind lists; exactly one anchor is required.
    pub fn from_curves(curves: Vec<LayerCurve>, chance_level: f64) -> Result<Self> {
        let mut anchor = None;
        let (mut lexical, mut semantic, mut format) = (Vec::new(), Vec::new(), Vec::new());
        for c in curves {
            match c.kind {
                ConditionKind::Anchor if anchor.is_some() => {
                    return Err(EvalError::Curves("more than one anchor curve".into()))
                }
                ConditionKind::Anchor => anchor = Some(c),
                ConditionKind::Lexical => lexical.push(c),
                ConditionKind::SemanticNegation => semantic.push(c),
                ConditionKind::OutputFormat => format.push(c),
            }
        }
        let set = Self {
            anchor: anchor.ok_or_else(|| EvalError::Curves("no anchor curve".into()))?,
            lexical,
            semantic,
            format,
            chance_level,
        };
        set.check()?;
        Ok(set)
    }

    pub fn num_layers(&self) -> usize {
        self.anchor.num_layers()
    }

    pub fn curves(&self) -> impl Iterator<Item = &LayerCurve> {
        std::iter::once(&self.anchor)
            .chain(&self.lexical)
            .chain(&self.semantic)
            .chain(&self.format)
    }

    pub fn check(&self) -> Result<()> {
        let l = self.num_layers();
        if l == 0 {
            return Err(EvalError::Curves("curves have no layers".into()));
        }
        for c in self.curves() {
            if c.num_layers() != l {
                return Err(EvalError::Curves(format!(
                    "condition {} has {} layers, anchor has {l}",
                    c.condition_id,
                    c.num_layers()
                )));
            }
            if c.accuracy.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(EvalError::Curves(format!(
                    "condition {} has accuracy outside [0, 1]",
                    c.condition_id
                )));
            }
        }
        Ok(())
    }

    /// CSV with columns `condition_id,kind,layer,accuracy,included_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for c in self.curves() {
            for (i, &accuracy) in c.accuracy.iter().enumerate() {
                w.serialize(CurveRow {
                    condition_id: c.condition_id,
                    kind: c.kind,
                    layer: i as u32 + 1,
                    accuracy,
                    included_count: c.included_count,
                })
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`CurveSet::write_csv`]. The CSV does not
    /// carry chance level or exclusion counts; excluded counts read as 0.
    pub fn read_csv<R: Read>(reader: R, chance_level: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut order = Vec::new();
        let mut rows: BTreeMap<u32, Vec<CurveRow>> = BTreeMap::new();
        for rec in r.deserialize() {
            let row: CurveRow = rec.map_err(csv_err)?;
            if !rows.contains_key(&row.condition_id) {
                order.push(row.condition_id);
            }
            rows.entry(row.condition_id).or_default().push(row);
        }
        let mut curves = Vec::new();
        for id in order {
            let mut rs = rows.remove(&id).expect("grouped above");
            rs.sort_by_key(|r| r.layer);
            let first = &rs[0];
            for (i, r) in rs.iter().enumerate() {
                if r.layer != i as u32 + 1 {
                    return Err(EvalError::Curves(format!(
                        "condition {id}: layers are not 1..={}",
                        rs.len()
                    )));
                }
                if r.kind != first.kind || r.included_count != first.included_count {
                    return Err(EvalError::Curves(format!(
                        "condition {id}: inconsistent kind or included_count"
                    )));
                }
            }
            curves.push(LayerCurve {
                condition_id: id,
                kind: first.kind,
                accuracy: rs.iter().map(|r| r.accuracy).collect(),
                included_count: first.included_count,
                excluded_count: 0,
            });
        }
        Self::from_curves(curves, chance_level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text).map_err(|e| EvalError::Curves(e.to_string()))?;
        set.check()?;
        Ok(set)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    condition_id: u32,
    kind: ConditionKind,
    layer: u32,
    accuracy: f64,
    included_count: usize,
}

fn csv_err(e: csv::Error) -> EvalError {
    EvalError::Curves(e.to_string())
}

/// Test-split samples compliant under both conditions, in header order.
pub fn compliance_filter(
    header: &DumpHeader,
    anchor_id: u32,
    variant_id: u32,
) -> Result<Vec<usize>> {
    for id in [anchor_id, variant_id] {
        if header.condition(id).is_none() {
            return Err(EvalError::UnknownCondition(id));
        }
    }
    let ok = |flags: &BTreeMap<u32, bool>, id| flags.get(&id).copied().unwrap_or(false);
    Ok(header
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.split == Split::Test && ok(&s.compliance, anchor_id) && ok(&s.compliance, variant_id)
        })
        .map(|(i, _)| i)
        .collect())
}

fn anchor_id(header: &DumpHeader) -> Result<u32> {
    header.anchor().map(|c| c.id).ok_or(EvalError::NoAnchor)
}

/// Orders probes by layer and checks they cover exactly `1..=L`.
fn probes_by_layer<'a>(
    probes: &'a [LinearProbe],
    header: &DumpHeader,
) -> Result<Vec<&'a LinearProbe>> {
    let l = header.num_layers;
    let mut sorted: Vec<&LinearProbe> = probes.iter().collect();
    sorted.sort_by_key(|p| p.layer);
    let layers: Vec<u32> = sorted.iter().map(|p| p.layer).collect();
    if layers != (1..=l).collect::<Vec<_>>() {
        return Err(EvalError::ProbeCoverage {
            expected: l,
            detail: format!("got layers {layers:?}"),
        });
    }
    let (n, d) = (header.num_classes(), header.hidden_dim as usize);
    if let Some(p) = sorted.iter().find(|p| p.weights.dim() != (n, d)) {
        return Err(EvalError::ProbeCoverage {
            expected: l,
            detail: format!(
                "layer {} probe is {:?}, dump needs {n}x{d}",
                p.layer,
                p.weights.dim()
            ),
        });
    }
    Ok(sorted)
}

/// Accuracy of each layer's probe on the condition's embeddings, over test
/// samples compliant under both the anchor and the condition.
pub fn evaluate_condition<R: Read + Seek + Send>(
    probes: &[LinearProbe],
    dump: &Dump<R>,
    condition_id: u32,
) -> Result<LayerCurve> {
    let header = dump.header();
    let condition = header
        .condition(condition_id)
        .ok_or(EvalError::UnknownCondition(condition_id))?;
    let probes = probes_by_layer(probes, header)?;
    let included = compliance_filter(header, anchor_id(header)?, condition_id)?;
    if included.is_empty() {
        return Err(EvalError::EmptyEvaluationSet(condition_id));
    }
    let test_count = header
        .samples
        .iter()
        .filter(|s| s.split == Split::Test)
        .count();

    let accuracy = probes
        .par_iter()
        .map(|probe| {
            let block = dump.block(condition_id, probe.layer)?;
            let mut correct = 0usize;
            for &i in &included {
                let row = block.row(i);
                let predicted = probe
                    .predict(row.as_slice().expect("row-major block"))
                    .map_err(|source| EvalError::Probe {
                        layer: probe.layer,
                        source,
                    })?;
                if predicted == header.samples[i].class_index {
                    correct += 1;
                }
            }
            Ok(correct as f64 / included.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(LayerCurve {
        condition_id,
        kind: condition.kind,
        accuracy,
        included_count: included.len(),
        excluded_count: test_count - included.len(),
    })
}

/// Anchor-condition, train-split, anchor-compliant sample indices.
pub fn training_rows(header: &DumpHeader) -> Result<Vec<usize>> {
    let anchor = anchor_id(header)?;
    Ok(header
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            s.split == Split::Train && s.compliance.get(&anchor).copied().unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect())
}

/// Trains one probe per layer on the anchor condition. Each layer gets a
/// seed derived from `cfg.seed` and the layer index.
pub fn train_layer_probes<R: Read + Seek + Send>(
    dump: &Dump<R>,
    cfg: &TrainConfig,
) -> Result<Vec<LinearProbe>> {
    let header = dump.header();
    let anchor = anchor_id(header)?;
    let rows = training_rows(header)?;
    let labels: Vec<usize> = rows
        .iter()
        .map(|&i| header.samples[i].class_index)
        .collect();
    (1..=header.num_layers)
        .into_par_iter()
        .map(|layer| {
            let block = dump.block(anchor, layer)?;
            let x: Array2<f32> = block.select(Axis(0), &rows);
            let layer_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, layer as u64),
                ..cfg.clone()
            };
            train_probe(layer, x.view(), &labels, header.num_classes(), &layer_cfg)
                .map_err(|source| EvalError::Probe { layer, source })
        })
        .collect()
}

/// Trains per-layer probes on the anchor and evaluates every condition.
pub fn run_pipeline<R: Read + Seek + Send>(
    dump: &Dump<R>,
    cfg: &TrainConfig,
) -> Result<(Vec<LinearProbe>, CurveSet)> {
    let probes = train_layer_probes(dump, cfg)?;
    let curves = dump
        .header()
        .conditions
        .iter()
        .map(|c| evaluate_condition(&probes, dump, c.id))
        .collect::<Result<Vec<_>>>()?;
    let chance = 1.0 / dump.header().num_classes() as f64;
    let set = CurveSet::from_curves(curves, chance)?;
    Ok((probes, set))
}
