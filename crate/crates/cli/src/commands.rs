//! Subcommand bodies. Input problems exit with code 2, pipeline problems
//! with code 3; an error tied to a specific frame is always a pipeline
//! problem so that a corrupt frame mid-sequence is reported as such.

use std::path::Path;

use anyhow::anyhow;
use serde_json::json;
use strainveil_core::align::{align_sequence, default_template, grid_landmarks, parse_landmarks, write_landmarks};
use strainveil_core::eval::curves::{curves_csv, curves_svg, roc_csv, roc_svg};
use strainveil_core::eval::synth::DeformField;
use strainveil_core::eval::{evaluate, labelled_scores, load_intensity_csv, random_texture, roc_curve, synth_sequence};
use strainveil_core::frame_io::{list_frame_files, read_frame, read_frame_dir, read_y4m, write_y4m, MIN_DIM};
use strainveil_core::suppress::{sequence_strain, suppress_sequence};
use strainveil_core::{Error, Frame, FrameSequence, ImageFormat, StrainMap};

use crate::config::RunConfig;
use crate::manifest::{OutputDir, RunManifest};
use crate::{EvalArgs, Failure, InputArgs, StrainmapArgs, SuppressArgs, SynthArgs};

/// Blur applied to generated textures; coarse enough that the default flow
/// window resolves the synthetic deformation.
pub const TEXTURE_SMOOTHNESS: f64 = 12.0;

#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
    pub threads: usize,
}

fn input_error(stage: &str, e: Error) -> Failure {
    let code_source = if e.frame_index().is_some() {
        Failure::runtime
    } else {
        Failure::input
    };
    code_source(anyhow::Error::new(e).context(stage.to_string()))
}

fn pipeline_error(stage: &str, e: impl Into<anyhow::Error>) -> Failure {
    Failure::runtime(e.into().context(stage.to_string()))
}

fn infer_format(frames: &str) -> Option<ImageFormat> {
    ImageFormat::from_path(Path::new(frames)).or_else(|| {
        [ImageFormat::Png, ImageFormat::Pgm, ImageFormat::Ppm]
            .into_iter()
            .find(|&f| list_frame_files(frames, f).is_ok_and(|v| !v.is_empty()))
    })
}

/// Extension for writing frames that came from `format`.
fn output_extension(format: Option<ImageFormat>, channels: usize) -> &'static str {
    match format {
        Some(ImageFormat::Png) => "png",
        _ if channels == 3 => "ppm",
        _ => "pgm",
    }
}

struct Loaded {
    seq: FrameSequence,
    ext: &'static str,
    aligned_here: bool,
}

fn load_sequence(args: &InputArgs, m: &mut RunManifest) -> Result<Loaded, Failure> {
    m.input(&args.frames);
    let is_y4m = Path::new(&args.frames)
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("y4m"));
    let (seq, format) = m.timed("load", || {
        if is_y4m {
            return read_y4m(Path::new(&args.frames)).map(|s| (s, None));
        }
        let format = match &args.format {
            Some(f) => f.parse()?,
            None => infer_format(&args.frames).ok_or_else(|| {
                if Path::new(&args.frames).exists() {
                    Error::EmptyInput("no png, pgm or ppm frames found")
                } else {
                    Error::MissingFile(args.frames.clone().into())
                }
            })?,
        };
        read_frame_dir(&args.frames, format).map(|s| (s, Some(format)))
    })
    .map_err(|e| input_error("load frames", e))?;
    let ext = output_extension(format, seq.channels());

    let Some(lm_path) = &args.landmarks else {
        return Ok(Loaded {
            seq,
            ext,
            aligned_here: false,
        });
    };
    if args.crop < MIN_DIM {
        return Err(Failure::input(anyhow!("--crop must be at least {MIN_DIM}")));
    }
    m.input(lm_path);
    let lms = parse_landmarks(lm_path).map_err(|e| input_error("load landmarks", e))?;
    if lms.len() != seq.len() {
        return Err(Failure::input(anyhow!(
            "{} has landmarks for {} frames but the sequence has {}",
            lm_path.display(),
            lms.len(),
            seq.len()
        )));
    }
    let template = match &args.template {
        Some(t) => {
            m.input(t);
            let mut sets = parse_landmarks(t).map_err(|e| input_error("load template", e))?;
            if sets.len() != 1 {
                return Err(Failure::input(anyhow!(
                    "template {} must hold exactly one frame, found {}",
                    t.display(),
                    sets.len()
                )));
            }
            sets.remove(0)
        }
        None => default_template(&lms[0], args.crop, args.crop).map_err(|e| input_error("build template", e))?,
    };
    let seq = m
        .timed("align", || align_sequence(&seq, &lms, &template, args.crop, args.crop))
        .map_err(|e| pipeline_error("align", e))?;
    Ok(Loaded {
        seq,
        ext,
        aligned_here: true,
    })
}

fn load_config(path: Option<&Path>, m: &mut RunManifest) -> Result<RunConfig, Failure> {
    let cfg = match path {
        Some(p) => {
            m.input(p);
            RunConfig::load(p).map_err(Failure::input)?
        }
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn frame_name(dir: &str, stem: &str, i: usize, ext: &str) -> String {
    format!("{dir}/{stem}_{i:04}.{ext}")
}

fn write_sequence(out: &mut OutputDir, seq: &FrameSequence, ext: &str) -> anyhow::Result<()> {
    for (i, f) in seq.frames().iter().enumerate() {
        out.write_frame(&frame_name("frames", "frame", i, ext), f)?;
    }
    Ok(())
}

/// Strain map of frame `k + 1` as a PGM plus its raw SVSM dump.
fn write_strains(out: &mut OutputDir, strains: &[StrainMap]) -> anyhow::Result<()> {
    for (k, s) in strains.iter().enumerate() {
        out.write_frame(&frame_name("strain", "strain", k + 1, "pgm"), &s.normalized_frame()?)?;
        s.save_raw(&out.claim(&frame_name("strain", "strain", k + 1, "svsm"))?)?;
    }
    Ok(())
}

fn sequence_summary(seq: &FrameSequence, aligned_here: bool) -> serde_json::Value {
    json!({
        "frames": seq.len(),
        "width": seq.width(),
        "height": seq.height(),
        "channels": seq.channels(),
        "aligned": aligned_here,
    })
}

pub fn suppress(ctx: &Context, args: &SuppressArgs) -> Result<RunManifest, Failure> {
    let mut m = RunManifest::new("suppress", ctx.seed, ctx.threads);
    let mut cfg = load_config(args.input.config.as_deref(), &mut m)?;
    if let Some(p) = args.percentile {
        cfg.threshold_percentile = p;
    }
    cfg.validate().map_err(Failure::input)?;
    m.config = serde_json::to_value(&cfg).map_err(Failure::runtime)?;

    let loaded = load_sequence(&args.input, &mut m)?;
    let result = m
        .timed("suppress", || suppress_sequence(&loaded.seq, &cfg.suppression(), &cfg.flow()))
        .map_err(|e| pipeline_error("suppress", e))?;

    let mut out = OutputDir::create(&args.input.out).map_err(Failure::runtime)?;
    m.timed("write", || -> anyhow::Result<()> {
        write_sequence(&mut out, &result.frames, loaded.ext)?;
        if args.y4m {
            write_y4m(&result.frames, &out.claim("suppressed.y4m")?)?;
        }
        if args.dump_strain {
            write_strains(&mut out, &result.strains)?;
        }
        if args.dump_masks {
            for (k, mask) in result.masks.iter().enumerate() {
                out.write_frame(&frame_name("masks", "mask", k + 1, "pgm"), &mask.to_frame()?)?;
            }
        }
        Ok(())
    })
    .map_err(|e| pipeline_error("write outputs", e))?;

    let mut summary = sequence_summary(&result.frames, loaded.aligned_here);
    summary["reference_frame"] = json!(result.reference);
    summary["mask_fraction"] = json!(result
        .masks
        .iter()
        .map(|mk| mk.count() as f64 / (mk.width * mk.height) as f64)
        .collect::<Vec<_>>());
    m.summary = summary;
    out.finish(m).map_err(Failure::runtime)
}

pub fn strainmap(ctx: &Context, args: &StrainmapArgs) -> Result<RunManifest, Failure> {
    let mut m = RunManifest::new("strainmap", ctx.seed, ctx.threads);
    let cfg = load_config(args.input.config.as_deref(), &mut m)?;
    cfg.validate().map_err(Failure::input)?;
    m.config = serde_json::to_value(&cfg).map_err(Failure::runtime)?;

    let loaded = load_sequence(&args.input, &mut m)?;
    let (flows, strains) = m
        .timed("strain", || {
            sequence_strain(&loaded.seq, &cfg.flow(), cfg.suppression().normalization)
        })
        .map_err(|e| pipeline_error("strain", e))?;

    let mut out = OutputDir::create(&args.input.out).map_err(Failure::runtime)?;
    m.timed("write", || -> anyhow::Result<()> {
        write_strains(&mut out, &strains)?;
        if args.dump_flow {
            for (k, f) in flows.iter().enumerate() {
                f.save(&out.claim(&frame_name("flow", "flow", k + 1, "svfl"))?)?;
            }
        }
        Ok(())
    })
    .map_err(|e| pipeline_error("write outputs", e))?;

    let mut summary = sequence_summary(&loaded.seq, loaded.aligned_here);
    summary["mean_strain"] = json!(strains.iter().map(StrainMap::mean_magnitude).collect::<Vec<_>>());
    m.summary = summary;
    out.finish(m).map_err(Failure::runtime)
}

/// File-name-safe form of a video id.
fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn eval(ctx: &Context, args: &EvalArgs) -> Result<RunManifest, Failure> {
    let mut m = RunManifest::new("eval", ctx.seed, ctx.threads);
    m.input(&args.before);
    m.input(&args.after);
    m.config = json!({ "noise_floor": args.noise_floor, "label": args.label });
    if args.noise_floor.is_nan() || args.noise_floor < 0.0 {
        return Err(Failure::input(anyhow!("--noise-floor must be >= 0")));
    }

    let before = load_intensity_csv(&args.before).map_err(|e| input_error("load before scores", e))?;
    let after = load_intensity_csv(&args.after).map_err(|e| input_error("load after scores", e))?;
    let report = m
        .timed("classify", || evaluate(&before, &after, args.noise_floor))
        .map_err(|e| input_error("classify", e))?;

    let roc_before = roc_curve(&labelled_scores(&before));
    let roc_after = roc_curve(&labelled_scores(&after));

    let mut out = OutputDir::create(&args.out).map_err(Failure::runtime)?;
    m.timed("write", || -> anyhow::Result<()> {
        out.write_bytes("report.txt", report.render_text(&args.label))?;
        out.write_bytes("table.csv", report.render_table_csv())?;
        out.write_bytes("videos.csv", report.render_videos_csv())?;
        for b in &before {
            let a = after
                .iter()
                .find(|a| a.video_id == b.video_id)
                .expect("evaluate checked the video sets match");
            let stem = sanitize(&b.video_id);
            out.write_bytes(&format!("curves/{stem}.csv"), curves_csv(b, a)?)?;
            out.write_bytes(&format!("curves/{stem}.svg"), curves_svg(b, a))?;
        }
        if let (Ok(rb), Ok(ra)) = (&roc_before, &roc_after) {
            out.write_bytes("roc.csv", roc_csv(&[("before", rb), ("after", ra)]))?;
            out.write_bytes("roc.svg", roc_svg(&[("before", rb, "blue"), ("after", ra, "green")]))?;
        }
        Ok(())
    })
    .map_err(|e| pipeline_error("write outputs", e))?;

    let rows: Vec<_> = report
        .aggregate
        .rows
        .iter()
        .map(|r| {
            let [case, pct, change] = r.cells();
            json!({ "case": case, "videos": r.videos, "pct_videos": pct, "pct_change": change })
        })
        .collect();
    m.summary = json!({
        "videos": report.aggregate.total,
        "table": rows,
        "auc_before": roc_before.as_ref().ok().map(|r| r.auc),
        "auc_after": roc_after.as_ref().ok().map(|r| r.auc),
    });
    out.finish(m).map_err(Failure::runtime)
}

pub fn synth(ctx: &Context, args: &SynthArgs) -> Result<RunManifest, Failure> {
    let mut m = RunManifest::new("synth", ctx.seed, ctx.threads);
    m.config = json!({
        "deform": format!("{:?}", args.deform).to_lowercase(),
        "amplitude": args.amplitude,
        "frames": args.frames,
        "size": args.size,
        "texture_smoothness": TEXTURE_SMOOTHNESS,
    });
    let format: ImageFormat = args.format.parse().map_err(Failure::input)?;
    let base: Frame = match &args.base {
        Some(p) => {
            m.input(p);
            let f = ImageFormat::from_path(p)
                .ok_or_else(|| Error::UnsupportedFormat(p.display().to_string()))
                .and_then(|f| read_frame(p, f))
                .map_err(|e| input_error("load base image", e))?;
            f
        }
        None => {
            if args.size < MIN_DIM {
                return Err(Failure::input(anyhow!("--size must be at least {MIN_DIM}")));
            }
            random_texture(args.size, args.size, ctx.seed, TEXTURE_SMOOTHNESS)
        }
    };
    let (seq, truth) = m
        .timed("generate", || synth_sequence(&base, args.deform, args.amplitude, args.frames))
        .map_err(|e| input_error("generate", e))?;
    let field = DeformField::new(args.deform, args.amplitude, base.width(), base.height())
        .map_err(|e| input_error("generate", e))?;

    let ext = output_extension(Some(format), base.channels());
    let mut out = OutputDir::create(&args.out).map_err(Failure::runtime)?;
    m.timed("write", || -> anyhow::Result<()> {
        out.write_frame(&format!("base.{ext}"), &base)?;
        write_sequence(&mut out, &seq, ext)?;
        for (k, f) in truth.iter().enumerate() {
            f.save(&out.claim(&frame_name("flow", "gt", k + 1, "svfl"))?)?;
        }
        let grid = grid_landmarks(base.width(), base.height());
        write_landmarks(&out.claim("landmarks.csv")?, &vec![grid; seq.len()])?;
        Ok(())
    })
    .map_err(|e| pipeline_error("write outputs", e))?;

    m.summary = json!({
        "frames": seq.len(),
        "width": seq.width(),
        "height": seq.height(),
        "apex_frame": args.frames / 2,
        "deform_radius": field.radius,
    });
    out.finish(m).map_err(Failure::runtime)
}
