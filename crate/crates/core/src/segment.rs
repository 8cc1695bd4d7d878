//! Segmentation of accuracy curves into four contiguous functional stages.
//!
//! Boundaries come from two signals:
//!
//! * the worst-case lexical gap `d(l) = anchor(l) - min_lexical(l)`; grounding
//!   is the longest prefix with `d(l) <= tau_align`;
//! * the output-format curve after grounding: its peak ends reasoning, and the
//!   last minimum before the peak marks where reasoning starts.
//!
//! Semantic-negation curves only feed diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::CurveSet;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("segmentation needs at least one {0} curve")]
    MissingCurves(&'static str),
    #[error("segmentation needs at least 4 layers, got {0}")]
    TooFewLayers(usize),
    #[error("invalid segmentation params: {0}")]
    InvalidParams(String),
    #[error("malformed stage map: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Largest lexical gap still counted as aligned with the anchor.
    pub tau_align: f64,
    /// Margin above chance below which a semantic curve counts as low.
    pub tau_sem: f64,
    /// Centered moving-average window (odd; 1 disables smoothing).
    pub smoothing_window: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            tau_align: 0.05,
            tau_sem: 0.10,
            smoothing_window: 1,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        let open = |v: f64| v > 0.0 && v < 0.5;
        if !open(self.tau_align) {
            return Err(SegmentError::InvalidParams(
                "tau_align must be in (0, 0.5)".into(),
            ));
        }
        if !open(self.tau_sem) {
            return Err(SegmentError::InvalidParams(
                "tau_sem must be in (0, 0.5)".into(),
            ));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(SegmentError::InvalidParams(
                "smoothing_window must be an odd integer >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Inclusive 1-based layer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRange {
    pub start: u32,
    pub end: u32,
}

impl LayerRange {
    /// `None` when `start > end`.
    pub fn new(start: u32, end: u32) -> Option<Self> {
        (start <= end).then_some(Self { start, end })
    }

    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    /// Always false: empty ranges are represented as `None`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, layer: u32) -> bool {
        (self.start..=self.end).contains(&layer)
    }
}

impl fmt::Display for LayerRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Grounding,
    LexicalIntegration,
    SemanticReasoning,
    Decoding,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Grounding,
        Stage::LexicalIntegration,
        Stage::SemanticReasoning,
        Stage::Decoding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Grounding => "grounding",
            Stage::LexicalIntegration => "lexical_integration",
            Stage::SemanticReasoning => "semantic_reasoning",
            Stage::Decoding => "decoding",
        }
    }

    fn symbol(self) -> char {
        match self {
            Stage::Grounding => 'G',
            Stage::LexicalIntegration => 'L',
            Stage::SemanticReasoning => 'R',
            Stage::Decoding => 'D',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageMap {
    pub num_layers: u32,
    pub grounding: Option<LayerRange>,
    pub lexical_integration: Option<LayerRange>,
    pub semantic_reasoning: Option<LayerRange>,
    pub decoding: Option<LayerRange>,
    pub diagnostics: Vec<String>,
    pub degenerate: bool,
    pub params: SegmentationParams,
}

impl StageMap {
    /// Map with grounding `[1, g_end]`, lexical `[g_end+1, r_start-1]`,
    /// reasoning `[r_start, r_end]` and decoding `[r_end+1, L]`.
    pub fn from_boundaries(num_layers: u32, g_end: u32, r_start: u32, r_end: u32) -> Self {
        Self {
            num_layers,
            grounding: LayerRange::new(1, g_end),
            lexical_integration: LayerRange::new(g_end + 1, r_start.saturating_sub(1)),
            semantic_reasoning: LayerRange::new(r_start, r_end),
            decoding: LayerRange::new(r_end + 1, num_layers),
            diagnostics: Vec::new(),
            degenerate: false,
            params: SegmentationParams::default(),
        }
    }

    pub fn range(&self, stage: Stage) -> Option<LayerRange> {
        match stage {
            Stage::Grounding => self.grounding,
            Stage::LexicalIntegration => self.lexical_integration,
            Stage::SemanticReasoning => self.semantic_reasoning,
            Stage::Decoding => self.decoding,
        }
    }

    pub fn stage_len(&self, stage: Stage) -> u32 {
        self.range(stage).map_or(0, |r| r.len())
    }

    pub fn stage_of(&self, layer: u32) -> Option<Stage> {
        Stage::ALL
            .into_iter()
            .find(|&s| self.range(s).is_some_and(|r| r.contains(layer)))
    }

    /// Non-empty stages must be ordered, contiguous and cover `[1, L]`.
    pub fn check_partition(&self) -> Result<(), SegmentError> {
        let mut next = 1;
        for stage in Stage::ALL {
            if let Some(r) = self.range(stage) {
                if r.start != next || r.end < r.start {
                    return Err(SegmentError::Malformed(format!(
                        "{} {r} does not start at layer {next}",
                        stage.name()
                    )));
                }
                next = r.end + 1;
            }
        }
        if next != self.num_layers + 1 {
            return Err(SegmentError::Malformed(format!(
                "stages cover [1, {}] but there are {} layers",
                next - 1,
                self.num_layers
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StageMapFile::from(self)).expect("stage map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SegmentError> {
        let file: StageMapFile =
            serde_json::from_str(text).map_err(|e| SegmentError::Malformed(e.to_string()))?;
        let map = StageMap::try_from(file)?;
        map.check_partition()?;
        Ok(map)
    }

    /// One character per layer, with a ruler and legend.
    pub fn render_strip(&self) -> String {
        let strip: String = (1..=self.num_layers)
            .map(|l| self.stage_of(l).map_or('?', Stage::symbol))
            .collect();
        let mut ruler = String::new();
        for l in (1..=self.num_layers).step_by(10) {
            let label = l.to_string();
            ruler.push_str(&format!("{label:<10}"));
        }
        let mut out = format!("layer {}\n      {strip}\n", ruler.trim_end());
        for stage in Stage::ALL {
            let span = self
                .range(stage)
                .map_or_else(|| "empty".to_string(), |r| r.to_string());
            out.push_str(&format!(
                "  {} = {:<20} {span}\n",
                stage.symbol(),
                stage.name()
            ));
        }
        if self.degenerate {
            out.push_str("  (degenerate)\n");
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct StageEntry {
    name: Stage,
    start: Option<u32>,
    end: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct StageMapFile {
    num_layers: u32,
    stages: Vec<StageEntry>,
    diagnostics: Vec<String>,
    degenerate: bool,
    params: SegmentationParams,
}

impl From<&StageMap> for StageMapFile {
    fn from(m: &StageMap) -> Self {
        Self {
            num_layers: m.num_layers,
            stages: Stage::ALL
                .into_iter()
                .map(|s| {
                    let r = m.range(s);
                    StageEntry {
                        name: s,
                        start: r.map(|r| r.start),
                        end: r.map(|r| r.end),
                    }
                })
                .collect(),
            diagnostics: m.diagnostics.clone(),
            degenerate: m.degenerate,
            params: m.params,
        }
    }
}

impl TryFrom<StageMapFile> for StageMap {
    type Error = SegmentError;

    fn try_from(f: StageMapFile) -> Result<Self, SegmentError> {
        let mut ranges = [None; 4];
        let mut seen = [false; 4];
        for e in f.stages {
            let i = Stage::ALL
                .iter()
                .position(|&s| s == e.name)
                .expect("known stage");
            if std::mem::replace(&mut seen[i], true) {
                return Err(SegmentError::Malformed(format!(
                    "duplicate stage {}",
                    e.name.name()
                )));
            }
            ranges[i] = match (e.start, e.end) {
                (Some(s), Some(t)) => Some(LayerRange::new(s, t).ok_or_else(|| {
                    SegmentError::Malformed(format!("{} has start > end", e.name.name()))
                })?),
                (None, None) => None,
                _ => {
                    return Err(SegmentError::Malformed(format!(
                        "{} must give both start and end, or neither",
                        e.name.name()
                    )))
                }
            };
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(SegmentError::Malformed(format!(
                "missing stage {}",
                Stage::ALL[i].name()
            )));
        }
        Ok(Self {
            num_layers: f.num_layers,
            grounding: ranges[0],
            lexical_integration: ranges[1],
            semantic_reasoning: ranges[2],
            decoding: ranges[3],
            diagnostics: f.diagnostics,
            degenerate: f.degenerate,
            params: f.params,
        })
    }
}

/// Centered moving average; windows are truncated at the ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn elementwise_min(curves: &[Vec<f64>]) -> Vec<f64> {
    let mut out = curves[0].clone();
    for c in &curves[1..] {
        for (o, v) in out.iter_mut().zip(c) {
            *o = o.min(*v);
        }
    }
    out
}

fn describe(r: Option<LayerRange>) -> String {
    r.map_or_else(|| "none".to_string(), |r| format!("{}-{}", r.start, r.end))
}

pub fn segment(curves: &CurveSet, params: &SegmentationParams) -> Result<StageMap, SegmentError> {
    params.validate()?;
    if curves.lexical.is_empty() {
        return Err(SegmentError::MissingCurves("lexical"));
    }
    if curves.format.is_empty() {
        return Err(SegmentError::MissingCurves("output_format"));
    }
    let l = curves.num_layers();
    if l < 4 {
        return Err(SegmentError::TooFewLayers(l));
    }
    let w = params.smoothing_window;
    let sm = |acc: &Vec<f64>| smooth(acc, w);

    let anchor = sm(&curves.anchor.accuracy);
    let lexical: Vec<Vec<f64>> = curves.lexical.iter().map(|c| sm(&c.accuracy)).collect();
    let format: Vec<Vec<f64>> = curves.format.iter().map(|c| sm(&c.accuracy)).collect();
    let lexical_min = elementwise_min(&lexical);
    let format_min = elementwise_min(&format);
    let gap: Vec<f64> = anchor
        .iter()
        .zip(&lexical_min)
        .map(|(a, m)| a - m)
        .collect();

    // Curves are 0-indexed here; layer = index + 1.
    let g_end = gap.iter().take_while(|&&d| d <= params.tau_align).count();
    let num_layers = l as u32;
    let mut map = StageMap {
        num_layers,
        grounding: LayerRange::new(1, g_end as u32),
        lexical_integration: None,
        semantic_reasoning: None,
        decoding: None,
        diagnostics: Vec::new(),
        degenerate: false,
        params: *params,
    };

    if g_end == l {
        map.degenerate = true;
        map.diagnostics
            .push("no lexical divergence: every layer is aligned with the anchor".into());
        return Ok(map);
    }

    let after = &format_min[g_end..];
    if after.windows(2).all(|p| p[1] <= p[0]) {
        map.degenerate = true;
        map.lexical_integration = LayerRange::new(g_end as u32 + 1, num_layers);
        map.diagnostics.push(format!(
            "no reasoning stage: output-format curve is non-increasing after layer {g_end}"
        ));
        return Ok(map);
    }

    // Smallest argmax over layers > g_end.
    let mut peak = g_end;
    for i in g_end..l {
        if format_min[i] > format_min[peak] {
            peak = i;
        }
    }
    let trough = format_min[g_end..=peak]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let r_start = (g_end..peak)
        .rev()
        .find(|&i| format_min[i] == trough)
        .map_or(g_end + 1, |i| i + 2);
    let r_end = peak + 1;

    let b = StageMap::from_boundaries(num_layers, g_end as u32, r_start as u32, r_end as u32);
    map.lexical_integration = b.lexical_integration;
    map.semantic_reasoning = b.semantic_reasoning;
    map.decoding = b.decoding;

    match map.decoding {
        Some(dec) => {
            let span = &gap[dec.start as usize - 1..dec.end as usize];
            let mean = span.iter().sum::<f64>() / span.len() as f64;
            let verdict = if mean <= params.tau_align {
                "pass"
            } else {
                "fail"
            };
            map.diagnostics.push(format!(
                "lexical recovery: {verdict} (mean gap {mean:.4} over decoding layers {})",
                describe(map.decoding)
            ));
        }
        None => map
            .diagnostics
            .push("lexical recovery: not evaluated (no decoding layers)".into()),
    }

    let late = r_start - 1..l;
    if curves.semantic.is_empty() {
        map.diagnostics
            .push("semantic divergence: not evaluated (no semantic curves)".into());
    } else {
        let ceiling = curves.chance_level + params.tau_sem;
        let worst = curves
            .semantic
            .iter()
            .map(|c| {
                sm(&c.accuracy)[late.clone()]
                    .iter()
                    .copied()
                    .fold(f64::MIN, f64::max)
            })
            .fold(f64::MIN, f64::max);
        let verdict = if worst <= ceiling { "pass" } else { "fail" };
        map.diagnostics.push(format!(
            "semantic divergence: {verdict} (max semantic accuracy {worst:.4} vs ceiling {ceiling:.4} over layers {r_start}-{l})"
        ));
    }

    debug_assert!(map.check_partition().is_ok());
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiffRow {
    pub stage: Stage,
    pub layers_a: u32,
    pub layers_b: u32,
    pub fraction_a: f64,
    pub fraction_b: f64,
    /// `b - a`
    pub layer_delta: i64,
    pub fraction_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiff {
    pub num_layers_a: u32,
    pub num_layers_b: u32,
    pub rows: Vec<StageDiffRow>,
}

/// Per-stage layer counts and depth fractions of two maps, with `b - a`
/// deltas.
pub fn diff_stage_maps(a: &StageMap, b: &StageMap) -> StageDiff {
    let frac = |m: &StageMap, s| {
        if m.num_layers == 0 {
            0.0
        } else {
            m.stage_len(s) as f64 / m.num_layers as f64
        }
    };
    let rows = Stage::ALL
        .into_iter()
        .map(|s| {
            let (fa, fb) = (frac(a, s), frac(b, s));
            StageDiffRow {
                stage: s,
                layers_a: a.stage_len(s),
                layers_b: b.stage_len(s),
                fraction_a: fa,
                fraction_b: fb,
                layer_delta: b.stage_len(s) as i64 - a.stage_len(s) as i64,
                fraction_delta: fb - fa,
            }
        })
        .collect();
    StageDiff {
        num_layers_a: a.num_layers,
        num_layers_b: b.num_layers,
        rows,
    }
}

impl fmt::Display for StageDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>8} {:>8} {:>7} {:>8} {:>8} {:>8}",
            "stage", "layers_a", "layers_b", "delta", "frac_a", "frac_b", "delta"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<20} {:>8} {:>8} {:>+7} {:>8.4} {:>8.4} {:>+8.4}",
                r.stage.name(),
                r.layers_a,
                r.layers_b,
                r.layer_delta,
                r.fraction_a,
                r.fraction_b,
                r.fraction_delta
            )?;
        }
        write!(
            f,
            "{:<20} {:>8} {:>8}",
            "total", self.num_layers_a, self.num_layers_b
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::ConditionKind;
    use crate::eval::LayerCurve;

    fn curve(id: u32, kind: ConditionKind, acc: Vec<f64>) -> LayerCurve {
        LayerCurve {
            condition_id: id,
            kind,
            accuracy: acc,
            included_count: 100,
            excluded_count: 0,
        }
    }

    fn set(anchor: Vec<f64>, lexical: Vec<Vec<f64>>, format: Vec<Vec<f64>>) -> CurveSet {
        let mut curves = vec![curve(0, ConditionKind::Anchor, anchor)];
        let mut id = 1;
        for c in lexical {
            curves.push(curve(id, ConditionKind::Lexical, c));
            id += 1;
        }
        for c in format {
            curves.push(curve(id, ConditionKind::OutputFormat, c));
            id += 1;
        }
        CurveSet::from_curves(curves, 0.1).unwrap()
    }

    #[test]
    fn identical_curves_are_degenerate() {
        let a: Vec<f64> = (0..10).map(|i| 0.5 + i as f64 * 0.05).collect();
        let cs = set(a.clone(), vec![a.clone(), a.clone()], vec![a.clone()]);
        let m = segment(&cs, &SegmentationParams::default()).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.grounding, LayerRange::new(1, 10));
        assert_eq!(m.lexical_integration, None);
        assert_eq!(m.semantic_reasoning, None);
        assert_eq!(m.decoding, None);
        m.check_partition().unwrap();
    }

    #[test]
    fn simple_rise_and_fall() {
        let anchor = vec![0.9; 8];
        let lex = vec![0.9, 0.9, 0.3, 0.3, 0.4, 0.6, 0.9, 0.9];
        let fmt = vec![0.9, 0.9, 0.3, 0.2, 0.5, 0.8, 0.4, 0.2];
        let m = segment(
            &set(anchor, vec![lex], vec![fmt]),
            &SegmentationParams::default(),
        )
        .unwrap();
        assert_eq!(m.grounding, LayerRange::new(1, 2));
        assert_eq!(m.lexical_integration, LayerRange::new(3, 4));
        assert_eq!(m.semantic_reasoning, LayerRange::new(5, 6));
        assert_eq!(m.decoding, LayerRange::new(7, 8));
        assert!(!m.degenerate);
        assert!(m.diagnostics[0].starts_with("lexical recovery: pass"));
        assert!(m.diagnostics[1].contains("not evaluated"));
    }

    #[test]
    fn non_increasing_format_is_degenerate() {
        let anchor = vec![0.9; 6];
        let lex = vec![0.9, 0.5, 0.5, 0.5, 0.5, 0.5];
        let fmt = vec![0.9, 0.6, 0.6, 0.5, 0.4, 0.4];
        let m = segment(
            &set(anchor, vec![lex], vec![fmt]),
            &SegmentationParams::default(),
        )
        .unwrap();
        assert!(m.degenerate);
        assert_eq!(m.grounding, LayerRange::new(1, 1));
        assert_eq!(m.lexical_integration, LayerRange::new(2, 6));
        assert_eq!(m.semantic_reasoning, None);
        m.check_partition().unwrap();
    }

    #[test]
    fn immediate_divergence_gives_empty_grounding() {
        let anchor = vec![0.9; 6];
        let lex = vec![0.2, 0.2, 0.3, 0.9, 0.9, 0.9];
        let fmt = vec![0.2, 0.1, 0.7, 0.9, 0.3, 0.2];
        let m = segment(
            &set(anchor, vec![lex], vec![fmt]),
            &SegmentationParams::default(),
        )
        .unwrap();
        assert_eq!(m.grounding, None);
        assert_eq!(m.lexical_integration, LayerRange::new(1, 2));
        assert_eq!(m.semantic_reasoning, LayerRange::new(3, 4));
        m.check_partition().unwrap();
    }

    #[test]
    fn preconditions() {
        let a = vec![0.5; 6];
        let only_lex = set(a.clone(), vec![a.clone()], vec![]);
        assert_eq!(
            segment(&only_lex, &SegmentationParams::default()),
            Err(SegmentError::MissingCurves("output_format"))
        );
        let only_fmt = set(a.clone(), vec![], vec![a.clone()]);
        assert_eq!(
            segment(&only_fmt, &SegmentationParams::default()),
            Err(SegmentError::MissingCurves("lexical"))
        );
        let short = set(vec![0.5; 3], vec![vec![0.5; 3]], vec![vec![0.5; 3]]);
        assert_eq!(
            segment(&short, &SegmentationParams::default()),
            Err(SegmentError::TooFewLayers(3))
        );
        let cs = set(a.clone(), vec![a.clone()], vec![a]);
        for bad in [
            SegmentationParams {
                tau_align: 0.0,
                ..Default::default()
            },
            SegmentationParams {
                tau_sem: 0.5,
                ..Default::default()
            },
            SegmentationParams {
                smoothing_window: 2,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                segment(&cs, &bad),
                Err(SegmentError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn smoothing() {
        assert_eq!(smooth(&[1.0, 2.0, 3.0], 1), vec![1.0, 2.0, 3.0]);
        assert_eq!(smooth(&[0.0, 3.0, 0.0, 3.0], 3), vec![1.5, 1.0, 2.0, 1.5]);
    }

    #[test]
    fn stage_map_json_round_trip() {
        let mut m = StageMap::from_boundaries(32, 4, 12, 15);
        m.diagnostics.push("note".into());
        let json = m.to_json();
        assert!(json.contains("\"name\": \"lexical_integration\""));
        assert_eq!(StageMap::from_json(&json).unwrap(), m);

        let empty = StageMap::from_boundaries(5, 5, 6, 5);
        assert_eq!(StageMap::from_json(&empty.to_json()).unwrap(), empty);
        assert!(empty.to_json().contains("\"start\": null"));
    }

    #[test]
    fn stage_map_json_rejects_bad_partitions() {
        let m = StageMap::from_boundaries(10, 2, 5, 7);
        let json = m
            .to_json()
            .replace("\"num_layers\": 10", "\"num_layers\": 11");
        assert!(StageMap::from_json(&json).is_err());
        assert!(StageMap::from_json("{}").is_err());
    }

    #[test]
    fn diff_example_llava_vs_qwen() {
        let llava = StageMap::from_boundaries(32, 4, 12, 15);
        let qwen = StageMap::from_boundaries(28, 1, 11, 20);
        assert_eq!(Stage::ALL.map(|s| qwen.stage_len(s)), [1, 9, 10, 8]);
        let d = diff_stage_maps(&llava, &qwen);
        assert_eq!(d.rows[0].fraction_a, 0.125);
        assert!((d.rows[0].fraction_b - 1.0 / 28.0).abs() < 1e-12);
        assert_eq!(d.rows[2].fraction_a, 0.125);
        assert!((d.rows[2].fraction_b - 10.0 / 28.0).abs() < 1e-12);
        assert_eq!(d.rows[0].layer_delta, -3);
        let text = d.to_string();
        assert!(text.contains("grounding"));
    }

    #[test]
    fn diff_self_and_antisymmetry() {
        let a = StageMap::from_boundaries(32, 4, 12, 15);
        let b = StageMap::from_boundaries(20, 0, 3, 19);
        assert!(diff_stage_maps(&a, &a)
            .rows
            .iter()
            .all(|r| r.layer_delta == 0 && r.fraction_delta == 0.0));
        let (ab, ba) = (diff_stage_maps(&a, &b), diff_stage_maps(&b, &a));
        for (x, y) in ab.rows.iter().zip(&ba.rows) {
            assert_eq!(x.layer_delta, -y.layer_delta);
            assert_eq!(x.fraction_delta, -y.fraction_delta);
        }
        let total: f64 = ab.rows.iter().map(|r| r.fraction_b).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strip_rendering() {
        let m = StageMap::from_boundaries(32, 4, 12, 15);
        let s = m.render_strip();
        assert!(s.contains("GGGGLLLLLLLRRRRDDDDDDDDDDDDDDDDD"));
        assert!(s.contains("grounding            [1, 4]"));
    }
}
