use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motskit::dataset::{
    dataset_stats, read_mots_txt_with, subsample_every_n, write_mots_txt, AnnotatedObject, ClassId, HistogramConfig,
    ParseOptions, SequenceAnnotation,
};
use motskit::depth::{paste_roi, read_pfm, refine_mask, DepthMap, DgmParams, PlacedMask, Roi, SoftMask};
use motskit::error::{Error, ErrorCategory, Result};
use motskit::fsutil::write_atomic;
use motskit::mask::{mask_to_bbox, rle_decode, rle_encode, BinaryMask, RleMask};
use motskit::metrics::{evaluate, EvalOptions};
use motskit::synth::{synth_generate, SynthSpec};
use motskit::tracking::{associate_ids, read_detections, run_labeler_pipeline, AssocParams};

#[derive(Parser, Debug)]
#[command(name = "motskit", version, about = "MOTS annotation, tracking and evaluation toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert between 0/1 text grids and RLE masks.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Refine the masks of an annotation with depth maps.
    Refine(RefineArgs),
    /// Associate detections into tracks.
    Track(TrackArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Annotation statistics.
    Stats(StatsArgs),
    /// Generate a synthetic fixture directory.
    Synth(SynthArgs),
    /// Refine, paste and track detections into an annotation.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand, Debug)]
enum CodecCommand {
    /// Text grid (rows of 0/1) to RLE JSON.
    Encode(CodecArgs),
    /// RLE JSON to text grid.
    Decode(CodecArgs),
}

#[derive(Args, Debug)]
struct CodecArgs {
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DgmArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long = "tau-prod", default_value_t = 0.25)]
    tau_prod: f64,
}

impl DgmArgs {
    fn params(&self) -> DgmParams {
        DgmParams {
            k: self.k,
            tau_prod: self.tau_prod,
        }
    }
}

#[derive(Args, Debug)]
struct AssocArgs {
    #[arg(long = "dist-threshold", default_value_t = 0.5)]
    dist_threshold: f64,
    #[arg(long = "max-gap", default_value_t = 1)]
    max_gap: usize,
}

impl AssocArgs {
    fn params(&self) -> AssocParams {
        AssocParams {
            dist_threshold: self.dist_threshold,
            max_gap: self.max_gap,
            same_class_only: true,
        }
    }
}

#[derive(Args, Debug)]
struct RefineArgs {
    /// Annotation whose masks are refined.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of NNNNNN.pfm depth maps.
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    dgm: DgmArgs,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    assoc: AssocArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Ground-truth file or directory of sequence files.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "car,pedestrian")]
    classes: Vec<String>,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print ratios as percentages.
    #[arg(long)]
    percent: bool,
    #[arg(long = "resolve-overlaps")]
    resolve_overlaps: bool,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Keep every N-th frame first; bare `--stride` means 5.
    #[arg(long, num_args = 0..=1, default_missing_value = "5")]
    stride: Option<usize>,
    /// Row label.
    #[arg(long, default_value = "dataset")]
    name: String,
    #[arg(long, default_value_t = 16)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    objects: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 96)]
    width: usize,
    /// Coarse-mask erosion/dilation radius.
    #[arg(long, default_value_t = 0)]
    noise: usize,
    #[arg(long = "constant-depth")]
    constant_depth: bool,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    dgm: DgmArgs,
    #[command(flatten)]
    assoc: AssocArgs,
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Usage => 2,
        ErrorCategory::InputFormat | ErrorCategory::Io => 3,
        ErrorCategory::Invariant => 4,
    }
}

fn report_error(category: &str, message: &str) {
    let v = serde_json::json!({ "error": { "category": category, "message": message } });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error(ErrorCategory::Usage.as_str(), e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            report_error(cat.as_str(), &e.to_string());
            ExitCode::from(exit_code(cat))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        return pool.install(|| dispatch(cli.command));
    }
    dispatch(cli.command)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Codec(CodecCommand::Encode(a)) => codec_encode(&a),
        Command::Codec(CodecCommand::Decode(a)) => codec_decode(&a),
        Command::Refine(a) => refine(&a),
        Command::Track(a) => track(&a),
        Command::Eval(a) => eval(&a),
        Command::Stats(a) => stats(&a),
        Command::Synth(a) => synth(&a),
        Command::Pipeline(a) => pipeline(&a),
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} path {} does not exist", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn codec_encode(a: &CodecArgs) -> Result<()> {
    require(&a.input, "input")?;
    let text = std::fs::read_to_string(&a.input)?;
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let width = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("row has {} cells, expected {width}", r.len()),
            });
        }
        for ch in r.chars() {
            data.push(match ch {
                '1' | '#' => true,
                '0' | '.' => false,
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("unexpected cell {ch:?}"),
                    })
                }
            });
        }
    }
    let mask = BinaryMask::new(rows.len(), width, data)?;
    let mut json = serde_json::to_string_pretty(&rle_encode(&mask))?;
    json.push('\n');
    emit(a.out.as_deref(), &json)
}

fn codec_decode(a: &CodecArgs) -> Result<()> {
    require(&a.input, "input")?;
    let rle: RleMask = serde_json::from_slice(&std::fs::read(&a.input)?)?;
    let mask = rle_decode(&rle)?;
    let mut text = String::with_capacity(mask.height() * (mask.width() + 1));
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            text.push(if mask.get(r, c) { '1' } else { '0' });
        }
        text.push('\n');
    }
    emit(a.out.as_deref(), &text)
}

fn depth_loader(dir: &Path) -> Result<impl Fn(usize) -> Result<DepthMap> + Sync + '_> {
    require(dir, "depth")?;
    Ok(move |f: usize| read_pfm(dir.join(format!("{f:06}.pfm"))))
}

fn write_annotation(path: &Path, ann: &SequenceAnnotation) -> Result<()> {
    let mut text = write_mots_txt(ann).join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

fn read_annotation(path: &Path, allow_overlaps: bool) -> Result<SequenceAnnotation> {
    read_mots_txt_with(
        path,
        ParseOptions {
            allow_overlaps,
            ..Default::default()
        },
    )
}

fn refine(a: &RefineArgs) -> Result<()> {
    require(&a.pred, "pred")?;
    let params = a.dgm.params();
    params.validate()?;
    let ann = read_annotation(&a.pred, false)?;
    let depth = depth_loader(&a.depth)?;
    let (h, w) = (ann.image_height, ann.image_width);
    let mut out = SequenceAnnotation::new(ann.sequence_id.clone(), ann.frame_count, h, w);
    out.ignore = ann.ignore.clone();
    for &frame in ann.frames.keys() {
        let d = depth(frame)?;
        let objs = ann.decode_frame(frame)?;
        let mut placed = Vec::with_capacity(objs.len());
        for (o, m) in &objs {
            if m.is_empty() {
                continue;
            }
            let r = refine_mask(&SoftMask::from_binary(m), &d, &mask_to_bbox(m), &params)?;
            placed.push((
                o.clone(),
                PlacedMask {
                    id: o.object_id(),
                    score: 1.0,
                    roi: r.roi,
                    mask: r.binarize(&params)?,
                },
            ));
        }
        let masks: Vec<PlacedMask> = placed.iter().map(|(_, p)| p.clone()).collect();
        for ((o, _), m) in placed.into_iter().zip(paste_roi(h, w, &masks)?) {
            if !m.is_empty() {
                out.push(
                    frame,
                    AnnotatedObject {
                        mask: rle_encode(&m),
                        ..o
                    },
                );
            }
        }
    }
    out.frame_count = ann.frame_count;
    out.validate()?;
    write_annotation(&a.out, &out)
}

fn track(a: &TrackArgs) -> Result<()> {
    require(&a.detections, "detections")?;
    let file = read_detections(&a.detections)?;
    let frames = file.to_frames();
    let ids = associate_ids(&frames, &a.assoc.params())?;
    let (h, w) = (file.image_height, file.image_width);
    let full = Roi {
        row: 0,
        col: 0,
        height: h,
        width: w,
    };
    let mut ann = SequenceAnnotation::new(file.sequence_id.clone(), file.frame_count(), h, w);
    for (list, list_ids) in frames.iter().zip(&ids) {
        let placed: Vec<PlacedMask> = list
            .iter()
            .zip(list_ids)
            .map(|(d, &id)| {
                Ok(PlacedMask {
                    id,
                    score: d.score,
                    roi: full,
                    mask: d.mask.decode()?,
                })
            })
            .collect::<Result<_>>()?;
        for ((d, &id), m) in list.iter().zip(list_ids).zip(paste_roi(h, w, &placed)?) {
            if !m.is_empty() {
                ann.push(
                    d.frame,
                    AnnotatedObject {
                        track_id: id,
                        class_id: d.class_id,
                        mask: rle_encode(&m),
                    },
                );
            }
        }
    }
    ann.frame_count = file.frame_count();
    ann.validate()?;
    write_annotation(&a.out, &ann)
}

fn sequence_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "txt"));
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    require(&a.gt, "gt")?;
    require(&a.pred, "pred")?;
    let classes: Vec<ClassId> = a.classes.iter().map(|c| ClassId::from_name(c.trim())).collect::<Result<_>>()?;
    let gts: Vec<SequenceAnnotation> = sequence_files(&a.gt)?
        .iter()
        .map(|p| read_annotation(p, false))
        .collect::<Result<_>>()?;
    if gts.is_empty() {
        return Err(Error::EmptyInput(format!("no sequences under {}", a.gt.display())));
    }

    let pairs: Vec<(SequenceAnnotation, SequenceAnnotation)> = if a.gt.is_dir() {
        let mut preds = std::collections::BTreeMap::new();
        if a.pred.is_dir() {
            for p in sequence_files(&a.pred)? {
                let ann = read_annotation(&p, a.resolve_overlaps)?;
                preds.insert(ann.sequence_id.clone(), ann);
            }
        } else {
            return Err(Error::InvalidParameter("--gt is a directory, so --pred must be one too".into()));
        }
        if let Some(extra) = preds.keys().find(|k| !gts.iter().any(|g| &g.sequence_id == *k)) {
            return Err(Error::InvalidAnnotation(format!("prediction for unknown sequence {extra}")));
        }
        gts.into_iter()
            .map(|g| {
                // missing predictions score as empty
                let p = preds.remove(&g.sequence_id).unwrap_or_else(|| {
                    SequenceAnnotation::new(g.sequence_id.clone(), 0, g.image_height, g.image_width)
                });
                (g, p)
            })
            .collect()
    } else {
        let mut p = read_annotation(&a.pred, a.resolve_overlaps)?;
        let g = gts.into_iter().next().expect("one file");
        p.sequence_id = g.sequence_id.clone();
        vec![(g, p)]
    };

    let report = evaluate(
        &pairs,
        &classes,
        &EvalOptions {
            resolve_overlaps: a.resolve_overlaps,
        },
    )?;
    if let Some(out) = &a.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(out, json.as_bytes())?;
    }
    print!("{}", report.render_text(a.percent));
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    require(&a.gt, "gt")?;
    let mut anns: Vec<SequenceAnnotation> = sequence_files(&a.gt)?
        .iter()
        .map(|p| read_annotation(p, false))
        .collect::<Result<_>>()?;
    if let Some(n) = a.stride {
        anns = anns.iter().map(|x| subsample_every_n(x, n)).collect::<Result<_>>()?;
    }
    if a.bins == 0 {
        return Err(Error::InvalidParameter("--bins must be at least 1".into()));
    }
    let report = dataset_stats(&anns, &HistogramConfig { bins: a.bins })?;
    if let Some(out) = &a.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(out, json.as_bytes())?;
    }
    print!("{}", report.render_table(&a.name));
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: a.seed,
        frames: a.frames,
        objects: a.objects,
        height: a.height,
        width: a.width,
        noise_radius: a.noise,
        constant_depth: a.constant_depth,
        ..Default::default()
    };
    let out = synth_generate(&spec)?;
    out.write_to(&a.out)
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    require(&a.detections, "detections")?;
    let file = read_detections(&a.detections)?;
    let depth = depth_loader(&a.depth)?;
    let result = run_labeler_pipeline(
        &file.sequence_id,
        (file.image_height, file.image_width),
        file.frame_count(),
        &file.to_frames(),
        &depth,
        &a.dgm.params(),
        &a.assoc.params(),
    )?;
    write_annotation(&a.out, &result.annotation)
}
