use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use deformstream_core::codec::{deserialize_stream, encode_sequence, p_frame_bytes, raw_frame_bytes, serialize_stream, EncodedGoF};
use deformstream_core::deform::apply_deformation;
use deformstream_core::mesh::{generate_synthetic_sequence, load_obj_sequence, primitives, read_obj, write_obj_sequence, MotionKind};
use deformstream_core::metrics::{bd_rate, hausdorff, rd_curve_from_gofs, RDCurve};
use deformstream_core::netsim::{load_trace, profile_decode_time, simulate as run_simulation, DecodeTimeModel, StreamTables};
use deformstream_core::Mesh;

use crate::config::RunConfig;
use crate::{io_err, CliError, Common};

fn config(common: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(common.config.as_deref(), &common.overrides)
}

fn read_stream(path: &Path) -> Result<Vec<EncodedGoF<f64>>, CliError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(deserialize_stream(&bytes)?)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn encode(input: &Path, output: &Path, rd_curve: Option<&Path>, common: &Common) -> Result<Value, CliError> {
    let cfg = config(common)?;
    let ladder = cfg.ladder()?;
    let seq = load_obj_sequence::<f64>(input, &cfg.pattern, cfg.fps)?;
    eprintln!("encoding {} frames with ladder {:?}", seq.len(), cfg.ladder);
    let gofs = encode_sequence(seq.frames(), cfg.fps, cfg.gof_length, &ladder, &cfg.encode_options())?;
    let bytes = serialize_stream(&gofs);
    write_file(output, &bytes)?;
    if let Some(path) = rd_curve {
        let curve = rd_curve_from_gofs(&gofs, seq.frames(), cfg.weight_mode)?;
        write_file(path, curve.to_csv().as_bytes())?;
    }
    let first = &seq.frames()[0];
    Ok(json!({
        "frames": seq.len(),
        "gofs": gofs.len(),
        "stream_bytes": bytes.len(),
        "raw_frame_bytes": raw_frame_bytes(first.vertex_count(), first.face_count()),
        "levels": ladder.levels().iter().map(|l| json!({
            "label": l.label,
            "node_count": l.node_count,
            "p_frame_bytes": p_frame_bytes(l.node_count),
        })).collect::<Vec<_>>(),
    }))
}

/// Per-frame choice read from a plan: `None` is a raw frame.
fn read_plan(path: &Path) -> Result<BTreeMap<usize, Option<usize>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut plan = BTreeMap::new();
    for (no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::InvalidInput(format!("plan line {}", no + 1));
        let v: Value = serde_json::from_str(line).map_err(|_| bad())?;
        let frame = v["frame"].as_u64().ok_or_else(bad)? as usize;
        let choice = match v["kind"].as_str() {
            Some("raw") => None,
            Some("reconstructed") => Some(v["level"].as_u64().ok_or_else(bad)? as usize),
            _ => return Err(bad()),
        };
        plan.insert(frame, choice);
    }
    Ok(plan)
}

pub fn decode(
    stream: &Path,
    output: &Path,
    level: Option<usize>,
    plan: Option<&Path>,
    reference: Option<&Path>,
    common: &Common,
) -> Result<Value, CliError> {
    let cfg = config(common)?;
    let gofs = read_stream(stream)?;
    let total: usize = gofs.iter().map(EncodedGoF::gof_length).sum();
    let reference = match reference {
        Some(dir) => Some(load_obj_sequence::<f64>(dir, &cfg.pattern, cfg.fps)?.into_frames()),
        None => None,
    };
    if let Some(r) = &reference {
        if r.len() != total {
            return Err(CliError::InvalidInput(format!("reference has {} frames, stream has {total}", r.len())));
        }
    }
    let plan = plan.map(read_plan).transpose()?;
    let levels = gofs.first().map_or(0, EncodedGoF::level_count);
    let default_level = level.unwrap_or(levels.saturating_sub(1));

    let mut frames: Vec<Mesh> = Vec::with_capacity(total);
    let mut report = Vec::with_capacity(total);
    let mut t = 0;
    for g in &gofs {
        let graphs = g.level_graphs(cfg.weight_mode)?;
        for k in 0..g.gof_length() {
            let choice = match &plan {
                Some(p) => *p.get(&t).ok_or_else(|| CliError::InvalidInput(format!("plan has no entry for frame {t}")))?,
                None => Some(default_level),
            };
            let mesh = match (k, choice) {
                (0, _) => g.i_frame.clone(),
                (_, None) => match &reference {
                    Some(r) => r[t].wire_rounded().without_normals(),
                    None => return Err(CliError::InvalidInput(format!("frame {t} is raw but no --reference was given"))),
                },
                (_, Some(b)) => {
                    let params = g.p_frames[k - 1].get(b).ok_or(deformstream_core::codec::CodecError::MissingLevel(b))?;
                    apply_deformation(&frames[t - 1], &graphs[b], params)?
                }
            };
            let h = reference.as_ref().map(|r| hausdorff(&mesh, &r[t])).transpose()?;
            report.push(json!({ "frame": t, "level": if k == 0 { None } else { choice }, "hausdorff": h }));
            frames.push(mesh);
            t += 1;
        }
    }
    write_obj_sequence(&frames, output, &cfg.pattern)?;
    eprintln!("wrote {} frames to {}", frames.len(), output.display());
    Ok(json!({ "frames": frames.len(), "per_frame": report }))
}

pub fn simulate(
    stream: &Path,
    trace: &Path,
    output_dir: &Path,
    reference: Option<&Path>,
    decode_model: Option<&Path>,
    common: &Common,
) -> Result<Value, CliError> {
    let cfg = config(common)?;
    let gofs = read_stream(stream)?;
    let trace = load_trace(trace)?;
    let reference = match reference {
        Some(dir) => Some(load_obj_sequence::<f64>(dir, &cfg.pattern, cfg.fps)?.into_frames()),
        None => None,
    };
    let model = match decode_model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::InvalidInput(format!("decode model: {e}")))?;
            let field = |k: &str| v[k].as_f64().ok_or_else(|| CliError::InvalidInput(format!("decode model lacks `{k}`")));
            DecodeTimeModel { alpha: field("alpha")?, beta: field("beta")?, fit_r2: field("fit_r2")? }
        }
        None => DecodeTimeModel { alpha: cfg.decode_alpha, beta: cfg.decode_beta, fit_r2: 1.0 },
    };
    let tables = StreamTables::build(&gofs, reference.as_deref(), cfg.weight_mode)?;
    let report = run_simulation(&tables, &trace, &model, &cfg.sim())?;
    std::fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;
    write_file(&output_dir.join("report.json"), report.to_json().as_bytes())?;
    write_file(&output_dir.join("report.csv"), report.to_csv().as_bytes())?;
    write_file(&output_dir.join("plans.jsonl"), report.plans_json_lines().as_bytes())?;
    Ok(json!({
        "chunks": report.chunks.len(),
        "total_rebuffer_s": report.total_rebuffer_s,
        "mean_hausdorff": report.mean_hausdorff,
        "median_hausdorff": report.median_hausdorff,
        "mean_latency_s": report.mean_latency_s,
        "overrun_count": report.overrun_count,
        "aborted": report.aborted,
        "total_s": report.total_ns as f64 / 1e9,
    }))
}

pub fn bdrate(reference: &Path, test: &Path) -> Result<Value, CliError> {
    let a = RDCurve::read_csv(reference)?;
    let b = RDCurve::read_csv(test)?;
    Ok(json!({ "bd_rate_percent": bd_rate(&a, &b)? }))
}

pub fn profile(
    mesh: Option<&Path>,
    counts: &[usize],
    repetitions: usize,
    output: Option<&Path>,
    common: &Common,
) -> Result<Value, CliError> {
    let cfg = config(common)?;
    let mesh: Mesh = match mesh {
        Some(path) => read_obj(path)?,
        None => primitives::uv_sphere(72, 72, 1.0),
    };
    eprintln!("profiling {} vertices at node counts {counts:?}", mesh.vertex_count());
    let (model, samples) = profile_decode_time(&mesh, counts, repetitions, cfg.weight_mode)?;
    let out = json!({
        "alpha": model.alpha,
        "beta": model.beta,
        "fit_r2": model.fit_r2,
        "vertices": mesh.vertex_count(),
        "samples": samples.iter().map(|(n, s)| json!({ "nodes": n, "seconds": s })).collect::<Vec<_>>(),
    });
    if let Some(path) = output {
        write_file(path, serde_json::to_string_pretty(&out).expect("json value").as_bytes())?;
    }
    Ok(out)
}

pub fn gen_synthetic(
    kind: &str,
    output: &Path,
    frames: usize,
    magnitude: f64,
    primitive: &str,
    resolution: usize,
    common: &Common,
) -> Result<Value, CliError> {
    let cfg = config(common)?;
    let kind: MotionKind = kind.parse()?;
    let r = resolution.max(3);
    let base: Mesh = match primitive {
        "sphere" => primitives::uv_sphere(r, 2 * r, 1.0),
        "cylinder" => primitives::cylinder(r, 2 * r, 0.5, 2.0),
        "cube" => primitives::cube(0.5),
        "grid" => primitives::grid(r, r, 2.0, 2.0),
        other => return Err(CliError::InvalidInput(format!("unknown primitive `{other}`"))),
    };
    let seq = generate_synthetic_sequence(kind, &base, frames, magnitude, cfg.fps)?;
    let files = write_obj_sequence(seq.frames(), output, &cfg.pattern)?;
    Ok(json!({ "frames": files.len(), "vertices": base.vertex_count(), "faces": base.face_count() }))
}
