//! Acceptance checks. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line.
//! Tests take a shared lock so wall-clock measurements do not overlap.

use std::sync::Mutex;
use std::time::Instant;

use deformstream_core::abr::{optimize_chunk, optimize_chunk_dense, FrameOption, QoECoefficients};
use deformstream_core::codec::{decode_gof, decode_with_graphs, encode_gof, encode_sequence, BitrateLadder, EncodeOptions};
use deformstream_core::deform::{extract_node_graph, DeformationParams, InfluenceRadius, WeightMode};
use deformstream_core::geom::{Mat3, Vec3};
use deformstream_core::mesh::{generate_synthetic_sequence, primitives, MotionKind, TriangleMesh};
use deformstream_core::metrics::{bd_rate, hausdorff, RDCurve, RdPoint};
use deformstream_core::netsim::{profile_decode_time, simulate, BandwidthTrace, DecodeTimeModel, SimConfig, StreamTables};
use deformstream_core::registration::{
    compute_correspondences, energy_alignment, energy_gradients, energy_regularization, energy_rotation,
    flatten_params, solve_deformation, unflatten_params, EnergyWeights, SolveOptions,
};
use deformstream_core::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Written to the process stderr directly so the line survives output capture.
fn report(id: u32, pass: bool, detail: String) {
    let line = format!("ACCEPTANCE {id} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::Write::write_all(&mut std::io::stderr().lock(), line.as_bytes()).unwrap();
    assert!(pass, "acceptance {id} failed: {detail}");
}

// ---------- 1 & 2: chunk optimizer ----------

const DP_INSTANCES: usize = 200;
const DP_MAX_FRAMES: usize = 8;
const DP_TIME_LIMIT_S: f64 = 10.0;
const SPEEDUP_MIN: f64 = 10.0;
const SPARSE_TIME_LIMIT_S: f64 = 0.5;

fn oracle_qoe(q: f64, l: f64, prev: Option<f64>, c: &QoECoefficients) -> f64 {
    let mut v = -(c.mu1 * q);
    if let Some(p) = prev {
        v -= c.mu2 * (q - p).abs();
    }
    if c.latency_reward {
        v + c.mu3 * l
    } else {
        v - c.mu3 * l
    }
}

/// Exhaustive search over every per-frame combination.
fn brute_force(options: &[Vec<FrameOption>], budget: u64, c: &QoECoefficients, prev: Option<f64>) -> Option<f64> {
    let mut idx = vec![0usize; options.len()];
    let mut best: Option<f64> = None;
    loop {
        let bytes: u64 = idx.iter().zip(options).map(|(&i, o)| o[i].size_bytes).sum();
        if bytes <= budget {
            let mut total = 0.0;
            let mut p = prev;
            for (&i, o) in idx.iter().zip(options) {
                total += oracle_qoe(o[i].quality_error, o[i].decode_latency, p, c);
                p = Some(o[i].quality_error);
            }
            if best.is_none_or(|b| total > b) {
                best = Some(total);
            }
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

struct Instance {
    options: Vec<Vec<FrameOption>>,
    budget: u64,
    coeffs: QoECoefficients,
    prev: Option<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=DP_MAX_FRAMES);
    let options: Vec<Vec<FrameOption>> = (0..n)
        .map(|t| {
            let k = rng.gen_range(2..=4);
            let mut opts = vec![FrameOption::raw(t, rng.gen_range(200..400))];
            for b in 0..k - 1 {
                // Coarse grids make equal sizes and equal scores common.
                let size = 10 * rng.gen_range(1..15u64);
                let q = rng.gen_range(0..8) as f64 * 0.125;
                let l = rng.gen_range(0..4) as f64 * 0.25;
                opts.push(FrameOption::reconstructed(t, b, size, q, l));
            }
            opts
        })
        .collect();
    let max: u64 = options.iter().map(|o| o.iter().map(|x| x.size_bytes).max().unwrap()).sum();
    let coeffs = QoECoefficients {
        mu1: rng.gen_range(0.0..2.0),
        mu2: rng.gen_range(0.0..2.0),
        mu3: rng.gen_range(0.0..2.0),
        latency_reward: rng.gen_bool(0.2),
    };
    let prev = rng.gen_bool(0.5).then(|| rng.gen_range(0.0..1.0));
    Instance { budget: rng.gen_range(0..=max), options, coeffs, prev }
}

#[test]
fn criterion_1_dp_matches_brute_force() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    let mut feasible = 0;
    for _ in 0..DP_INSTANCES {
        let inst = random_instance(&mut rng);
        let dp = optimize_chunk(&inst.options, inst.budget, &inst.coeffs, inst.prev).ok();
        let oracle = brute_force(&inst.options, inst.budget, &inst.coeffs, inst.prev);
        match (&dp, oracle) {
            (Some(plan), Some(best)) if plan.total_qoe == best && plan.total_bytes <= inst.budget => feasible += 1,
            (None, None) => {}
            _ => mismatches += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        mismatches == 0 && secs < DP_TIME_LIMIT_S,
        format!("{DP_INSTANCES} instances ({feasible} feasible), {mismatches} mismatches, {secs:.3} s (limit {DP_TIME_LIMIT_S} s)"),
    );
}

/// A 30-frame, 4-option chunk with realistic byte sizes.
fn large_chunk() -> (Vec<Vec<FrameOption>>, u64) {
    let node_counts = [120u64, 500, 1000];
    let options = (0..30)
        .map(|t| {
            let mut o = vec![FrameOption::raw(t, 120_000)];
            for (b, &n) in node_counts.iter().enumerate() {
                let q = 0.03 / (b + 1) as f64 + 0.001 * (t % 5) as f64;
                o.push(FrameOption::reconstructed(t, b, 48 * n, q, 2e-6 * n as f64));
            }
            o
        })
        .collect();
    (options, 1_200_000)
}

#[test]
fn criterion_2_sparse_equals_dense_and_is_faster() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..DP_INSTANCES {
        let inst = random_instance(&mut rng);
        let sparse = optimize_chunk(&inst.options, inst.budget, &inst.coeffs, inst.prev).ok();
        let dense = optimize_chunk_dense(&inst.options, inst.budget, &inst.coeffs, inst.prev).ok();
        let same = match (&sparse, &dense) {
            (Some(a), Some(b)) => a.total_qoe == b.total_qoe && a.total_bytes == b.total_bytes,
            (None, None) => true,
            _ => false,
        };
        mismatches += usize::from(!same);
    }

    let (options, budget) = large_chunk();
    let c = QoECoefficients::default();
    let t0 = Instant::now();
    let dense = optimize_chunk_dense(&options, budget, &c, None).unwrap();
    let dense_s = t0.elapsed().as_secs_f64();
    let runs = 20;
    let t1 = Instant::now();
    let mut sparse = None;
    for _ in 0..runs {
        sparse = Some(optimize_chunk(&options, budget, &c, None).unwrap());
    }
    let sparse_s = t1.elapsed().as_secs_f64() / runs as f64;
    let sparse = sparse.unwrap();
    let speedup = dense_s / sparse_s;
    let large_same = sparse.total_qoe == dense.total_qoe;
    report(
        2,
        mismatches == 0 && large_same && speedup >= SPEEDUP_MIN && sparse_s < SPARSE_TIME_LIMIT_S,
        format!(
            "{mismatches} mismatches over {DP_INSTANCES}; 30x4 chunk: dense {dense_s:.4} s, sparse {sparse_s:.6} s, \
             speedup {speedup:.1}x (min {SPEEDUP_MIN}x), equal optimum {large_same}"
        ),
    );
}

// ---------- 3: rigid round trip ----------

const RIGID_FRAMES: usize = 30;
const RIGID_NODES: usize = 16;
const RIGID_TOL_REL: f64 = 1e-3;
const RIGID_TIME_LIMIT_S: f64 = 60.0;

#[test]
fn criterion_3_rigid_round_trip() {
    let _g = serial();
    let start = Instant::now();
    let base: Mesh = primitives::cylinder(12, 24, 0.5, 2.0);
    let ladder = BitrateLadder::from_node_counts(&[RIGID_NODES]).unwrap();
    let mut worst_rel: f64 = 0.0;
    for (kind, magnitude) in [(MotionKind::RigidTranslate, 0.8), (MotionKind::RigidRotate, 0.6)] {
        let seq = generate_synthetic_sequence(kind, &base, RIGID_FRAMES, magnitude, 30).unwrap();
        let enc = encode_gof(seq.frames(), 30, &ladder, &EncodeOptions::default()).unwrap();
        let dec = decode_gof(&enc, &vec![0; RIGID_FRAMES], WeightMode::Uniform).unwrap();
        for (d, truth) in dec.iter().zip(seq.frames()) {
            worst_rel = worst_rel.max(hausdorff(d, truth).unwrap() / truth.bbox_diagonal());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        worst_rel < RIGID_TOL_REL && secs < RIGID_TIME_LIMIT_S,
        format!("worst Hausdorff/diag {worst_rel:.3e} (limit {RIGID_TOL_REL:e}), {secs:.2} s (limit {RIGID_TIME_LIMIT_S} s)"),
    );
}

// ---------- 4: decode-time linearity ----------

const PROFILE_COUNTS: [usize; 5] = [120, 500, 1000, 2000, 4600];
const PROFILE_REPS: usize = 7;
const R2_MIN: f64 = 0.9;

fn big_sphere() -> Mesh {
    primitives::uv_sphere(72, 72, 1.0)
}

#[test]
fn criterion_4_decode_time_is_linear() {
    let _g = serial();
    let mesh = big_sphere();
    assert!(mesh.vertex_count() >= 5000);
    let (model, samples) = profile_decode_time(&mesh, &PROFILE_COUNTS, PROFILE_REPS, WeightMode::Uniform).unwrap();
    let pts: Vec<String> = samples.iter().map(|(n, s)| format!("{n}:{:.2}ms", s * 1e3)).collect();
    report(
        4,
        model.fit_r2 > R2_MIN,
        format!(
            "{} vertices, r2 {:.4} (min {R2_MIN}), alpha {:.3e} s/node, beta {:.3e} s, samples [{}]",
            mesh.vertex_count(),
            model.fit_r2,
            model.alpha,
            model.beta,
            pts.join(", ")
        ),
    );
}

// ---------- 5: Hausdorff ----------

const HAUSDORFF_PAIRS: usize = 100;
const HAUSDORFF_MAX_VERTICES: usize = 200;

fn brute_directed(a: &[Vec3<f64>], b: &[Vec3<f64>]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| {
                    let (dx, dy, dz) = (p.x() - q.x(), p.y() - q.y(), p.z() - q.z());
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn point_mesh(points: Vec<Vec3<f64>>) -> Mesh {
    TriangleMesh::new(points, Vec::new()).unwrap()
}

#[test]
fn criterion_5_hausdorff_matches_brute_force() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=HAUSDORFF_MAX_VERTICES);
        point_mesh((0..n).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
    };
    let (mut exact, mut symmetric, mut identity) = (0, 0, 0);
    for _ in 0..HAUSDORFF_PAIRS {
        let a = cloud(&mut rng);
        let b = cloud(&mut rng);
        let oracle = brute_directed(a.vertices(), b.vertices()).max(brute_directed(b.vertices(), a.vertices())).sqrt();
        let h_ab = hausdorff(&a, &b).unwrap();
        exact += usize::from(h_ab == oracle);
        symmetric += usize::from(h_ab == hausdorff(&b, &a).unwrap());
        identity += usize::from(hausdorff(&a, &a).unwrap() == 0.0);
    }
    report(
        5,
        exact == HAUSDORFF_PAIRS && symmetric == HAUSDORFF_PAIRS && identity == HAUSDORFF_PAIRS,
        format!("{HAUSDORFF_PAIRS} pairs: exact {exact}, symmetric {symmetric}, identity {identity}"),
    );
}

// ---------- 6: BD-rate ----------

const BD_TOL: f64 = 1e-4;

#[test]
fn criterion_6_bd_rate_analytic() {
    let _g = serial();
    let pts = [(1e5, 0.08), (2e5, 0.05), (4e5, 0.03), (8e5, 0.02), (1.6e6, 0.015)];
    let curve = |scale: f64| {
        RDCurve::new(pts.iter().map(|&(r, d)| RdPoint { bitrate_bps: r * scale, distortion: d }).collect()).unwrap()
    };
    let half = bd_rate(&curve(1.0), &curve(0.5)).unwrap();
    let same = bd_rate(&curve(1.0), &curve(1.0)).unwrap();
    report(
        6,
        (half + 50.0).abs() <= BD_TOL && same.abs() <= BD_TOL,
        format!("half bitrate {half:.6}% (expect -50 +/- {BD_TOL}), identical {same:.6}%"),
    );
}

// ---------- 7: solver properties ----------

const SOLVER_INSTANCES: usize = 50;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-3;
const TRANSLATION_TOL_REL: f64 = 1e-6;

fn jittered_grid(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Mesh {
    let g: Mesh = primitives::grid(nx, ny, 1.0, 1.0);
    let v = g.vertices().iter().map(|p| *p + Vec3::new(0.0, 0.0, rng.gen_range(-0.05..0.05))).collect();
    TriangleMesh::new(v, g.faces().to_vec()).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DeformationParams<f64> {
    DeformationParams {
        rotations: (0..n)
            .map(|_| {
                let mut m = Mat3::identity();
                for a in 0..3 {
                    for b in 0..3 {
                        m.0[a][b] += rng.gen_range(-scale..scale);
                    }
                }
                m
            })
            .collect(),
        translations: (0..n).map(|_| Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect(),
    }
}

fn gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let verts: Vec<Vec3<f64>> =
        (0..5).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let source = TriangleMesh::new(verts, vec![[0, 1, 2], [2, 3, 4]]).unwrap();
    let target_v: Vec<Vec3<f64>> = source.vertices().iter().map(|p| *p + Vec3::new(0.1, rng.gen_range(-0.2..0.2), 0.05)).collect();
    let target = TriangleMesh::new(target_v, source.faces().to_vec()).unwrap();
    let graph = extract_node_graph(&source, 2, InfluenceRadius::Fixed(10.0), WeightMode::Uniform).unwrap();
    let corr = compute_correspondences(&source, &target).unwrap();
    let params = random_params(rng, 2, 0.3);
    let grads = energy_gradients(&source, &graph, &params, &corr).unwrap();
    let x = flatten_params(&params);
    let term = |k: usize, x: &[f64]| {
        let p = unflatten_params(x);
        match k {
            0 => energy_alignment(&source, &graph, &p, &corr).unwrap(),
            1 => energy_rotation(&p),
            _ => energy_regularization(&graph, &p).unwrap(),
        }
    };
    let mut worst: f64 = 0.0;
    for (k, g) in grads.iter().enumerate() {
        let fd: Vec<f64> = (0..x.len())
            .map(|i| {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += FD_STEP;
                xm[i] -= FD_STEP;
                (term(k, &xp) - term(k, &xm)) / (2.0 * FD_STEP)
            })
            .collect();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    worst
}

#[test]
fn criterion_7_solver_properties() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let weights = EnergyWeights::default();
    let opts = SolveOptions::default();

    let mut increases = 0;
    for _ in 0..SOLVER_INSTANCES {
        let source = jittered_grid(&mut rng, 6, 6);
        let graph = extract_node_graph(&source, 6, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
        let truth = random_params(&mut rng, 6, 0.1);
        let target = deformstream_core::deform::apply_deformation(&source, &graph, &truth).unwrap();
        let (_, rep) = solve_deformation(&source, &graph, &target, &weights, &opts).unwrap();
        increases += rep.energy_history.windows(2).filter(|w| w[1] > w[0]).count();
    }

    let grad_worst = (0..SOLVER_INSTANCES).map(|_| gradient_error(&mut rng)).fold(0.0f64, f64::max);

    let source: Mesh = primitives::uv_sphere(10, 16, 1.0);
    let graph = extract_node_graph(&source, 12, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
    let d = Vec3::new(0.3, -0.2, 0.1);
    let target = TriangleMesh::new(source.vertices().iter().map(|p| *p + d).collect(), source.faces().to_vec()).unwrap();
    let (params, _) = solve_deformation(&source, &graph, &target, &weights, &opts).unwrap();
    let trans_err = params.translations.iter().map(|t| (*t - d).norm()).fold(0.0f64, f64::max) / source.bbox_diagonal();

    report(
        7,
        increases == 0 && grad_worst < FD_REL_TOL && trans_err < TRANSLATION_TOL_REL,
        format!(
            "{SOLVER_INSTANCES} solves with {increases} energy increases; worst gradient rel err {grad_worst:.2e} \
             (limit {FD_REL_TOL:e}); translation err/diag {trans_err:.2e} (limit {TRANSLATION_TOL_REL:e})"
        ),
    );
}

// ---------- 8: simulation invariants ----------

fn encoded_tables() -> StreamTables {
    let base: Mesh = primitives::cylinder(8, 16, 0.5, 2.0);
    let seq = generate_synthetic_sequence(MotionKind::Bend, &base, 60, 0.8, 30).unwrap();
    let ladder = BitrateLadder::from_node_counts(&[8, 24]).unwrap();
    let gofs = encode_sequence(seq.frames(), 30, 30, &ladder, &EncodeOptions::default()).unwrap();
    StreamTables::build(&gofs, Some(seq.frames()), WeightMode::Uniform).unwrap()
}

fn random_trace(rng: &mut ChaCha8Rng, mean_bps: f64) -> BandwidthTrace {
    let mut t = 0.0;
    let samples = (0..40)
        .map(|_| {
            let s = (t, mean_bps * rng.gen_range(0.0..2.0));
            t += rng.gen_range(0.1..1.0);
            s
        })
        .collect();
    BandwidthTrace::new(samples).unwrap()
}

#[test]
fn criterion_8_simulation_invariants() {
    let _g = serial();
    let tables = encoded_tables();
    let model = DecodeTimeModel { alpha: 2e-6, beta: 1e-4, fit_r2: 1.0 };
    let cfg = SimConfig::default();

    let high = simulate(&tables, &BandwidthTrace::constant(1e10), &model, &cfg).unwrap();
    let high_ok = high.rebuffer_ns == 0 && high.mean_hausdorff == 0.0;

    let raw_rate = tables.raw_bytes.iter().sum::<u64>() as f64 * 8.0 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut budget_violations, mut conservation_violations, mut overruns, mut runs) = (0, 0, 0, 0);
    for scale in [0.02, 0.05, 0.1, 0.3, 1.0] {
        for _ in 0..10 {
            let trace = random_trace(&mut rng, raw_rate * scale);
            let rep = simulate(&tables, &trace, &model, &cfg).unwrap();
            runs += 1;
            budget_violations += rep.chunks.iter().filter(|c| !c.overrun && c.plan_bytes > c.budget_bytes).count();
            overruns += rep.overrun_count;
            conservation_violations += usize::from(rep.total_ns != rep.startup_ns + rep.playback_ns + rep.rebuffer_ns);
        }
    }
    report(
        8,
        high_ok && budget_violations == 0 && conservation_violations == 0,
        format!(
            "high bandwidth: rebuffer {} ns, mean Hausdorff {}; {runs} random traces: {budget_violations} budget \
             violations, {overruns} logged overruns, {conservation_violations} conservation violations",
            high.rebuffer_ns, high.mean_hausdorff
        ),
    );
}

// ---------- 9: uniform versus distance weights ----------

const ABLATION_NODES: usize = 120;
const ABLATION_FRAMES: usize = 6;
const ABLATION_REPS: usize = 30;
const ABLATION_SPEEDUP_MIN: f64 = 5.0;
const ABLATION_ERROR_RATIO_MAX: f64 = 2.0;

#[test]
fn criterion_9_uniform_weight_ablation() {
    let _g = serial();
    let base = big_sphere();
    let seq = generate_synthetic_sequence(MotionKind::Bend, &base, ABLATION_FRAMES, 0.5, 30).unwrap();
    let ladder = BitrateLadder::from_node_counts(&[ABLATION_NODES]).unwrap();
    let levels = vec![0; ABLATION_FRAMES];
    let mut runs = Vec::new();
    let mut error = Vec::new();
    for mode in [WeightMode::Uniform, WeightMode::NormalizedDistance] {
        let opts = EncodeOptions { weight_mode: mode, ..EncodeOptions::default() };
        let enc = encode_gof(seq.frames(), 30, &ladder, &opts).unwrap();
        let graphs = enc.level_graphs(mode).unwrap();
        let dec = decode_with_graphs(&enc, &graphs, &levels).unwrap();
        let errs: Vec<f64> = dec.iter().zip(seq.frames()).skip(1).map(|(d, t)| hausdorff(d, t).unwrap()).collect();
        error.push(errs.iter().sum::<f64>() / errs.len() as f64);
        runs.push((enc, graphs));
    }
    // Fastest of interleaved repetitions for each mode.
    let mut timing = [f64::INFINITY; 2];
    for _ in 0..ABLATION_REPS {
        for (k, (enc, graphs)) in runs.iter().enumerate() {
            let start = Instant::now();
            std::hint::black_box(decode_with_graphs(enc, graphs, &levels).unwrap());
            timing[k] = timing[k].min(start.elapsed().as_secs_f64());
        }
    }
    let speedup = timing[1] / timing[0];
    let ratio = error[0] / error[1];
    report(
        9,
        speedup >= ABLATION_SPEEDUP_MIN && ratio < ABLATION_ERROR_RATIO_MAX,
        format!(
            "{} vertices, {ABLATION_NODES} nodes: decode uniform {:.2} ms vs distance {:.2} ms, speedup {speedup:.1}x \
             (min {ABLATION_SPEEDUP_MIN}x); mean Hausdorff uniform {:.3e} vs distance {:.3e}, ratio {ratio:.2} (max {ABLATION_ERROR_RATIO_MAX})",
            base.vertex_count(),
            timing[0] * 1e3,
            timing[1] * 1e3,
            error[0],
            error[1]
        ),
    );
}
