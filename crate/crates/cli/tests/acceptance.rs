//! Acceptance gate. Every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strainveil_core::eval::synth::{envelope, ground_truth_flow, DeformField};
use strainveil_core::eval::{evaluate, random_texture, roc_curve, synth_sequence, Deform};
use strainveil_core::flow::compute_flow;
use strainveil_core::strain::strain_magnitude;
use strainveil_core::suppress::{mask_edge_band, median_smooth_edges, suppress_sequence};
use strainveil_core::{BinaryMask, FlowField, FlowParams, Frame, FrameRate, FrameSequence, SuppressionConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mae(a: &Frame, b: &Frame) -> f64 {
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    s / a.data().len() as f64
}

// ---------------------------------------------------------------- 1

fn strain_oracle() -> Outcome {
    let start = Instant::now();
    let (w, h) = (64, 48);
    let mut worst_shear = 0.0f64;
    for a in [0.1, 0.5, 1.0] {
        let s = strain_magnitude(&FlowField::from_fn(w, h, |_, y| (a * y as f64, 0.0)));
        let expect = a / 2f64.sqrt();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                worst_shear = worst_shear.max((s.magnitude[y * w + x] - expect).abs());
            }
        }
    }
    let mut worst_rigid = 0.0f64;
    for (u, v) in [(0.0, 0.0), (3.25, -1.5), (-7.0, 0.125), (1e3, 1e3)] {
        let s = strain_magnitude(&FlowField::from_fn(w, h, |_, _| (u, v)));
        worst_rigid = s.magnitude.iter().fold(worst_rigid, |m, &e| m.max(e));
    }
    let t = start.elapsed();
    check(
        worst_shear < 1e-9 && worst_rigid < 1e-12 && t < Duration::from_secs(1),
        format!("shear max err {worst_shear:.2e}, rigid max {worst_rigid:.2e}, {t:.2?}"),
    )
}

// ---------------------------------------------------------------- 2

const MARGIN: usize = 16;

/// `next` shows the texture moved by `(sx, sy)`, so the flow is that shift.
fn shifted_pair(texture: &Frame, pad: usize, size: usize, sx: isize, sy: isize) -> (Frame, Frame) {
    let crop = |ox: usize, oy: usize| {
        let data = (0..size * size)
            .map(|i| texture.get(ox + i % size, oy + i / size, 0))
            .collect();
        Frame::gray(size, size, data).unwrap()
    };
    (crop(pad, pad), crop((pad as isize - sx) as usize, (pad as isize - sy) as usize))
}

fn flow_recovery() -> Outcome {
    let params = FlowParams::default();
    let (size, pad) = (128, 8);
    let texture = random_texture(size + 2 * pad, size + 2 * pad, 7, 2.0);
    let mut worst_shift = 0.0f64;
    let mut slowest = Duration::ZERO;
    for sy in -4..=4isize {
        for sx in -4..=4isize {
            let (prev, next) = shifted_pair(&texture, pad, size, sx, sy);
            let start = Instant::now();
            let flow = compute_flow(&prev, &next, &params).unwrap();
            slowest = slowest.max(start.elapsed());
            let truth = FlowField::from_fn(size, size, |_, _| (sx as f64, sy as f64));
            worst_shift = worst_shift.max(median(flow.endpoint_errors(&truth, MARGIN)));
        }
    }

    let base = random_texture(256, 256, 42, 12.0);
    let frames = 20;
    let (seq, _) = synth_sequence(&base, Deform::Bulge, 4.0, frames).unwrap();
    let field = DeformField::new(Deform::Bulge, 4.0, 256, 256).unwrap();
    let apex = frames / 2;
    let mut bulge = Vec::new();
    for from in [0, apex - 1] {
        let start = Instant::now();
        let flow = compute_flow(&seq.frames()[from], &seq.frames()[apex], &params).unwrap();
        slowest = slowest.max(start.elapsed());
        let truth = ground_truth_flow(&field, 256, 256, envelope(from, frames), envelope(apex, frames));
        let all = median(flow.endpoint_errors(&truth, MARGIN));
        // the same error restricted to the deformed disk, where it is not diluted by still pixels
        let inside: Vec<f64> = flow
            .endpoint_errors(&truth, 0)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| {
                let (x, y) = ((i % 256) as f64, (i / 256) as f64);
                (x - field.center[0]).hypot(y - field.center[1]) < field.radius
            })
            .map(|(_, e)| e)
            .collect();
        bulge.push((from, all, median(inside)));
    }
    // the disk-only bound is also held by the consecutive pair the pipeline uses;
    // 0 -> apex spans strain too large for a translational window and is reported only
    let bulge_ok = bulge.iter().all(|&(_, all, _)| all < 0.5) && bulge[1].2 < 0.5;
    let bulge_txt: Vec<String> = bulge
        .iter()
        .map(|(f, all, inside)| format!("{f}->{apex} {all:.3}/{inside:.3}"))
        .collect();
    check(
        worst_shift < 0.25 && bulge_ok && slowest < Duration::from_secs(5),
        format!(
            "81 shifts worst median EPE {worst_shift:.3} px; bulge median EPE interior/disk {}; slowest pair {slowest:.2?}",
            bulge_txt.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 3

fn restoration() -> Outcome {
    let start = Instant::now();
    let base = random_texture(256, 256, 42, 12.0);
    let (seq, _) = synth_sequence(&base, Deform::Bulge, 4.0, 20).unwrap();
    let apex = 10;
    let before = mae(&seq.frames()[apex], &base);
    let mut parts = Vec::new();
    let mut ok = true;
    for pct in [10.0, 90.0] {
        let cfg = SuppressionConfig {
            threshold_percentile: pct,
            ..SuppressionConfig::default()
        };
        let out = suppress_sequence(&seq, &cfg, &FlowParams::default()).unwrap();
        let after = mae(&out.frames.frames()[apex], &base);
        let ratio = after / before;
        ok &= ratio < 0.5;
        parts.push(format!("pct {pct}: {after:.3}/{before:.3} = {ratio:.3}"));
    }
    let t = start.elapsed();
    check(
        ok && t < Duration::from_secs(30),
        format!("apex MAE ratio {}; {t:.2?}", parts.join(", ")),
    )
}

// ---------------------------------------------------------------- 4

fn stillness() -> Outcome {
    let cfg = SuppressionConfig {
        face_blur_sigma: 0.0,
        ..SuppressionConfig::default()
    };
    let mut ok = true;
    for frame in [random_texture(64, 64, 3, 2.0), Frame::filled(64, 64, 3, 117).unwrap()] {
        let seq = FrameSequence::new(vec![frame; 10], FrameRate::default()).unwrap();
        let out = suppress_sequence(&seq, &cfg, &FlowParams::default()).unwrap();
        ok &= out.frames.len() == 10 && out.frames.frames() == seq.frames();
    }
    check(ok, "textured gray and flat RGB sequences returned bit-identical".into())
}

// ---------------------------------------------------------------- 5

/// Expected report rows per corpus: `(label, [(pct_videos, pct_change); 3])`
/// in Removed, Reduced, Increased order.
const TABLES: [(&str, [(usize, u32); 3]); 4] = [
    ("Smile", [(21, 100), (64, 50), (15, 10)]),
    ("Smile", [(59, 100), (38, 75), (3, 5)]),
    ("Sadness", [(0, 100), (87, 60), (13, 22)]),
    ("Anger", [(6, 100), (88, 40), (6, 36)]),
];

fn corpus_csv(rows: [(usize, u32); 3]) -> (String, String) {
    let mut before = String::from("video_id,frame,score,event_start,event_end\n");
    let mut after = before.clone();
    let mut id = 0;
    for (case, &(count, change)) in rows.iter().enumerate() {
        for _ in 0..count {
            let (b, a) = match case {
                0 => (80.0, 0.0),
                1 => (80.0, 80.0 * (1.0 - change as f64 / 100.0)),
                _ => (50.0, 50.0 * (1.0 + change as f64 / 100.0)),
            };
            for f in 0..12 {
                // frames outside the 2..=9 event window carry noise that must be ignored
                let outside = !(2..=9).contains(&f);
                let (bv, av) = if outside { (3.0, 90.0) } else { (b, a) };
                before.push_str(&format!("v{id:03},{f},{bv},2,9\n"));
                after.push_str(&format!("v{id:03},{f},{av},2,9\n"));
            }
            id += 1;
        }
    }
    (before, after)
}

fn tables() -> Outcome {
    let mut rendered = Vec::new();
    let mut ok = true;
    for (k, (label, rows)) in TABLES.iter().enumerate() {
        let (b, a) = corpus_csv(*rows);
        let before = strainveil_core::eval::intensity::parse_intensity_str(&b).unwrap();
        let after = strainveil_core::eval::intensity::parse_intensity_str(&a).unwrap();
        let report = evaluate(&before, &after, 1.0).unwrap();
        for (row, &(pct, change)) in report.aggregate.rows.iter().zip(rows) {
            let [case, p, c] = row.cells();
            let got = format!("{label} {case} & {p} & {c}");
            let want = format!("{label} {case} & {pct}% & {change}%");
            ok &= got == want;
            if got != want {
                rendered.push(format!("corpus {}: got {got:?} want {want:?}", k + 1));
            }
        }
        let text = report.render_text(label);
        for (row, &(pct, change)) in report.aggregate.rows.iter().zip(rows) {
            let line = format!("{:<24} {:>12} {:>12}", format!("{label} {}", row.case), format!("{pct}%"), format!("{change}%"));
            ok &= text.contains(&line);
        }
    }
    check(
        ok,
        if rendered.is_empty() {
            "four reference corpora reproduced verbatim".into()
        } else {
            rendered.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 6

fn pairwise_auc(s: &[(f64, bool)]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for &(p, lp) in s {
        if !lp {
            continue;
        }
        for &(n, ln) in s {
            if ln {
                continue;
            }
            pairs += 1.0;
            if p > n {
                num += 1.0;
            } else if p == n {
                num += 0.5;
            }
        }
    }
    num / pairs
}

fn roc() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<(f64, bool)> = (0..50)
            .map(|_| {
                let label = rng.random_bool(0.4);
                // coarse scores so ties occur; positives lean higher
                let score = (rng.random_range(0..20) + if label { 4 } else { 0 }) as f64 / 2.0;
                (score, label)
            })
            .collect();
        s[0].1 = true;
        s[1].1 = false;
        worst = worst.max((roc_curve(&s).unwrap().auc - pairwise_auc(&s)).abs());
    }
    let separated: Vec<(f64, bool)> = (0..50).map(|i| (i as f64, i >= 20)).collect();
    let sep = roc_curve(&separated).unwrap().auc;
    check(
        worst < 1e-9 && sep == 1.0,
        format!("20 instances max |AUC - pairwise| {worst:.2e}; separated AUC {sep}"),
    )
}

// ---------------------------------------------------------------- 7

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_strainveil")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "strainveil {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    run_cli(&["synth", "--size", "96", "--frames", "8", "--out", &p("syn")]);
    for threads in ["1", "8"] {
        run_cli(&[
            "suppress",
            "--threads",
            threads,
            "--frames",
            &p("syn/frames"),
            "--landmarks",
            &p("syn/landmarks.csv"),
            "--crop",
            "96",
            "--dump-masks",
            "--out",
            &p(&format!("t{threads}")),
        ]);
    }
    let a = read_dir_sorted(&tmp.path().join("t1/frames"));
    let b = read_dir_sorted(&tmp.path().join("t8/frames"));
    let masks_equal = read_dir_sorted(&tmp.path().join("t1/masks")) == read_dir_sorted(&tmp.path().join("t8/masks"));
    let strip = |run: &str| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join(run).join("manifest.json")).unwrap()).unwrap();
        let o = v.as_object_mut().unwrap();
        o.remove("timings_ms");
        o.remove("threads");
        o.remove("inputs");
        v
    };
    let manifests_equal = strip("t1") == strip("t8");
    check(
        a.len() == 8 && a == b && masks_equal && manifests_equal,
        format!(
            "{} frames bit-identical across --threads 1/8: {}; masks {}; manifests modulo timings {}",
            a.len(),
            a == b,
            masks_equal,
            manifests_equal
        ),
    )
}

// ---------------------------------------------------------------- 8

fn naive_band(m: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let r = r as isize;
    let at = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && m[y as usize * w + x as usize];
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut any, mut all) = (false, true);
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = at(x + dx, y + dy);
                    any |= v;
                    all &= v;
                }
            }
            out[y as usize * w + x as usize] = any && !all;
        }
    }
    out
}

fn naive_median(f: &Frame, band: &[bool], k: usize) -> Vec<u8> {
    let (w, h, ch) = (f.width() as isize, f.height() as isize, f.channels());
    let r = (k / 2) as isize;
    let mut out = f.data().to_vec();
    for y in 0..h {
        for x in 0..w {
            if !band[(y * w + x) as usize] {
                continue;
            }
            for c in 0..ch {
                let mut win = Vec::with_capacity(k * k);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (sx, sy) = ((x + dx).clamp(0, w - 1), (y + dy).clamp(0, h - 1));
                        win.push(f.get(sx as usize, sy as usize, c));
                    }
                }
                win.sort_unstable();
                out[((y * w + x) as usize) * ch + c] = win[win.len() / 2];
            }
        }
    }
    out
}

fn morphology() -> Outcome {
    let mut mismatches = Vec::new();
    for case in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let density = rng.random_range(0.15..0.85);
        let bits: Vec<bool> = (0..64).map(|_| rng.random_bool(density)).collect();
        let band_w = rng.random_range(1..=3);
        let small = BinaryMask::new(8, 8, bits.clone()).unwrap();
        if mask_edge_band(&small, band_w).unwrap().bits != naive_band(&bits, 8, 8, band_w) {
            mismatches.push(format!("band case {case}"));
        }

        // frames have a 16-pixel minimum, so the 8x8 mask sits inside a 16x16 canvas
        let (ox, oy) = (rng.random_range(0..=8), rng.random_range(0..=8));
        let mut canvas = vec![false; 256];
        for y in 0..8 {
            for x in 0..8 {
                canvas[(y + oy) * 16 + x + ox] = bits[y * 8 + x];
            }
        }
        let band = naive_band(&canvas, 16, 16, band_w);
        let ch = if case % 2 == 0 { 1 } else { 3 };
        let data: Vec<u8> = (0..256 * ch).map(|_| rng.random()).collect();
        let frame = Frame::new(16, 16, ch, data).unwrap();
        let kernel = [3, 5, 7][case as usize % 3];
        let got = median_smooth_edges(&frame, &BinaryMask::new(16, 16, band.clone()).unwrap(), kernel).unwrap();
        if got.data() != naive_median(&frame, &band, kernel).as_slice() {
            mismatches.push(format!("median case {case}"));
        }
    }
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "200 seeded 8x8 masks: edge band and median exact".into()
        } else {
            format!("mismatches: {}", mismatches.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1 strain oracle", strain_oracle),
        ("AC2 flow recovery", flow_recovery),
        ("AC3 end-to-end restoration", restoration),
        ("AC4 stillness idempotence", stillness),
        ("AC5 evaluation tables", tables),
        ("AC6 ROC correctness", roc),
        ("AC7 thread-count determinism", determinism),
        ("AC8 morphology and median oracles", morphology),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
