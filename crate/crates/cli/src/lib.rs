//! Subcommand implementations behind the `layerprobe` binary.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use layerprobe::dump::validate_dump;
use layerprobe::eval::EvalError;
use layerprobe::probe::save_probe;
use layerprobe::synth::{write_synth, Fixture};
use layerprobe::{
    diff_stage_maps, run_pipeline, segment, CurveSet, Dump, DumpError, ProbeError,
    SegmentationParams, StageMap, SynthConfig, SynthError, TrainConfig,
};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub dump_path: Option<PathBuf>,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub timestamp: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, output_dir: &Path, seed: u64) -> Self {
        Self {
            command: command.into(),
            dump_path: None,
            config_path: None,
            output_dir: output_dir.into(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Maps an error to the process exit code: 2 for I/O failures, 1 otherwise.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.is::<io::Error>()
            || matches!(e.downcast_ref::<DumpError>(), Some(DumpError::Io(_)))
            || matches!(e.downcast_ref::<EvalError>(), Some(EvalError::Io(_)))
            || matches!(e.downcast_ref::<ProbeError>(), Some(ProbeError::Io(_)))
    });
    if io {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Writes `contents` to a sibling temp file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    write_atomic(path, json.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_validate(dump: &Path, out: &mut impl Write) -> Result<u8> {
    let report = validate_dump(dump).with_context(|| format!("reading {}", dump.display()))?;
    write!(out, "{}: {report}", dump.display())?;
    Ok(if report.is_valid() {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

pub fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<u8> {
    let mut cfg: SynthConfig = match config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut manifest = RunManifest::new("synth", out.parent().unwrap_or(Path::new(".")), cfg.seed);
    manifest.config_path = config.map(Path::to_path_buf);
    manifest.dump_path = Some(out.to_path_buf());
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    write_manifest(Path::new(&manifest_path), &manifest)?;

    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_synth(&cfg, &mut w).map_err(|e| match e {
        SynthError::Dump(DumpError::Io(io)) => anyhow::Error::new(io),
        other => other.into(),
    })?;
    w.flush()?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub train_config: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Trains per-layer probes, evaluates every condition and segments the
/// curves. Writes the manifest before anything else.
pub fn cmd_run(dump_path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<(u8, StageMap)> {
    let mut train: TrainConfig = match &opts.train_config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = opts.seed {
        train.seed = seed;
    }
    let params: SegmentationParams = match &opts.params {
        Some(p) => read_json(p)?,
        None => SegmentationParams::default(),
    };
    train.validate()?;
    params.validate()?;

    fs::create_dir_all(out_dir.join("probes"))
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut manifest = RunManifest::new("run", out_dir, train.seed);
    manifest.dump_path = Some(dump_path.to_path_buf());
    manifest.config_path = opts.train_config.clone();
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;

    let dump = Dump::open(dump_path).with_context(|| format!("opening {}", dump_path.display()))?;
    let (probes, curves) = run_pipeline(&dump, &train)?;
    for p in &probes {
        let path = out_dir.join(format!("probes/layer_{:02}.probe", p.layer));
        save_probe(&path, p).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut csv = Vec::new();
    curves.write_csv(&mut csv)?;
    write_atomic(&out_dir.join("curves.csv"), &csv)?;
    write_atomic(&out_dir.join("curves.json"), curves.to_json().as_bytes())?;

    let map = segment(&curves, &params)?;
    write_stage_outputs(out_dir, &map)?;
    Ok((exit_for_map(&map), map))
}

fn write_stage_outputs(out_dir: &Path, map: &StageMap) -> Result<()> {
    write_atomic(&out_dir.join("stages.json"), map.to_json().as_bytes())?;
    write_atomic(&out_dir.join("stages.txt"), map.render_strip().as_bytes())?;
    Ok(())
}

fn exit_for_map(map: &StageMap) -> u8 {
    if map.degenerate {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    }
}

/// Loads curves from `.json`, or from `.csv` with the given chance level.
pub fn load_curves(path: &Path, chance: f64) -> Result<CurveSet> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    let curves = if is_json {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        CurveSet::from_json(&text)?
    } else {
        let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
        CurveSet::read_csv(f, chance)?
    };
    Ok(curves)
}

pub fn cmd_segment(
    curves: &Path,
    chance: f64,
    params: Option<&Path>,
    out_dir: Option<&Path>,
    out: &mut impl Write,
) -> Result<u8> {
    let params: SegmentationParams = match params {
        Some(p) => read_json(p)?,
        None => SegmentationParams::default(),
    };
    let set = load_curves(curves, chance)?;
    let map = segment(&set, &params)?;
    write!(out, "{}", map.render_strip())?;
    for d in &map.diagnostics {
        writeln!(out, "{d}")?;
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_stage_outputs(dir, &map)?;
    }
    Ok(exit_for_map(&map))
}

pub fn cmd_diff(a: &Path, b: &Path, out: &mut impl Write) -> Result<u8> {
    let load = |p: &Path| -> Result<StageMap> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        StageMap::from_json(&text).with_context(|| format!("parsing {}", p.display()))
    };
    let diff = diff_stage_maps(&load(a)?, &load(b)?);
    writeln!(out, "{diff}")?;
    Ok(EXIT_OK)
}

pub fn cmd_fixtures(out_dir: &Path) -> Result<u8> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for f in Fixture::ALL {
        let path = out_dir.join(format!("{}.csv", f.name()));
        write_atomic(&path, f.csv().as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(EXIT_OK)
}
