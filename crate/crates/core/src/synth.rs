//! Seeded synthetic sequences with exact ground truth: layered rectangles
//! and ellipses moving at constant integer velocities, with matching depth,
//! flow, coarse masks and detections.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_mots_txt, AnnotatedObject, ClassId, SequenceAnnotation, MAX_TRACK_ID};
use crate::depth::{write_pfm, DepthMap, Plane};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::mask::{mask_to_bbox, rle_encode, BinaryMask};
use crate::temporal::{write_flo, FlowField};
use crate::tracking::{write_detections, Detection, DetectionFile};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    pub objects: usize,
    pub height: usize,
    pub width: usize,
    /// Erosion or dilation radius of the coarse masks, chosen per object.
    pub noise_radius: usize,
    /// Flat depth everywhere instead of per-object layers.
    pub constant_depth: bool,
    pub embedding_dim: usize,
    /// Half-width of the uniform per-frame embedding jitter.
    pub embedding_jitter: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            frames: 10,
            objects: 3,
            height: 64,
            width: 96,
            noise_radius: 0,
            constant_depth: false,
            embedding_dim: 8,
            embedding_jitter: 0.01,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if self.objects == 0 || self.objects > MAX_TRACK_ID as usize {
            return bad(format!("objects must be in 1..={MAX_TRACK_ID}, got {}", self.objects));
        }
        if self.height < 8 || self.width < 8 {
            return bad(format!("image must be at least 8x8, got {}x{}", self.height, self.width));
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1".into());
        }
        if !(self.embedding_jitter >= 0.0 && self.embedding_jitter.is_finite()) {
            return bad(format!("embedding_jitter must be finite and >= 0, got {}", self.embedding_jitter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Ellipse,
}

/// Per-object ground truth parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub track_id: u32,
    pub class_id: ClassId,
    pub shape: Shape,
    /// Top-left corner at frame 0.
    pub row: i64,
    pub col: i64,
    pub height: usize,
    pub width: usize,
    /// Pixels per frame.
    pub velocity: (i64, i64),
    /// 0 is farthest.
    pub layer: usize,
    pub dilate: bool,
    pub embedding: Vec<f64>,
}

impl SynthObject {
    fn covers(&self, frame: usize, r: usize, c: usize) -> bool {
        let top = self.row + self.velocity.0 * frame as i64;
        let left = self.col + self.velocity.1 * frame as i64;
        let (r, c) = (r as i64, c as i64);
        if r < top || c < left || r >= top + self.height as i64 || c >= left + self.width as i64 {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Ellipse => {
                let ry = self.height as f64 / 2.0;
                let rx = self.width as f64 / 2.0;
                let dy = (r - top) as f64 + 0.5 - ry;
                let dx = (c - left) as f64 + 0.5 - rx;
                (dy / ry).powi(2) + (dx / rx).powi(2) <= 1.0
            }
        }
    }

    /// Layer depth value; nearer is larger and every layer sits well above
    /// the background.
    pub fn depth(&self, objects: usize) -> f64 {
        1.0 + self.layer as f64 / objects as f64
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub spec: SynthSpec,
    pub objects: Vec<SynthObject>,
    /// Visible silhouettes.
    pub ground_truth: SequenceAnnotation,
    pub depth: Vec<DepthMap>,
    /// Backward flow: a pixel of frame t came from `p + flow(p)` in t - 1.
    pub flow: Vec<FlowField>,
    /// One detection per visible object whose coarse mask is non-empty;
    /// `mask` is the coarse mask.
    pub detections: Vec<Vec<Detection>>,
    /// Index into `objects` of every detection, parallel to `detections`.
    pub sources: Vec<Vec<usize>>,
}

fn morph(mask: &BinaryMask, radius: usize, dilate: bool) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (h, w) = mask.dims();
    let r = radius as i64;
    BinaryMask::from_fn(h, w, |row, col| {
        let mut any = false;
        let mut all = true;
        for dr in -r..=r {
            for dc in -r..=r {
                let (y, x) = (row as i64 + dr, col as i64 + dc);
                // outside the frame counts as background
                let v = y >= 0 && x >= 0 && y < h as i64 && x < w as i64 && mask.get(y as usize, x as usize);
                any |= v;
                all &= v;
            }
        }
        if dilate {
            any
        } else {
            all
        }
    })
    .expect("dimensions come from an existing mask")
}

fn sample_embeddings(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    // rejection sampling for separated identities, bounded so tiny
    // dimensions still terminate
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let mut e: Vec<f64> = Vec::new();
        for _ in 0..1000 {
            e = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if out.iter().all(|o| crate::loss::euclidean(o, &e) >= 1.0) {
                break;
            }
        }
        out.push(e);
    }
    out
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, w) = (spec.height, spec.width);

    let mut layers: Vec<usize> = (0..spec.objects).collect();
    for i in (1..layers.len()).rev() {
        layers.swap(i, rng.gen_range(0..=i));
    }
    let embeddings = sample_embeddings(&mut rng, spec.objects, spec.embedding_dim);
    let objects: Vec<SynthObject> = (0..spec.objects)
        .map(|i| {
            let oh = rng.gen_range(h / 6..=h / 3).max(3);
            let ow = rng.gen_range(w / 6..=w / 3).max(3);
            SynthObject {
                track_id: (i / 2 + 1) as u32,
                class_id: if i % 2 == 0 { ClassId::CAR } else { ClassId::PEDESTRIAN },
                shape: if rng.gen_bool(0.5) { Shape::Rect } else { Shape::Ellipse },
                row: rng.gen_range(0..(h - oh) as i64),
                col: rng.gen_range(0..(w - ow) as i64),
                height: oh,
                width: ow,
                velocity: (rng.gen_range(-1..=1), rng.gen_range(-2..=2)),
                layer: layers[i],
                dilate: rng.gen_bool(0.5),
                embedding: embeddings[i].clone(),
            }
        })
        .collect();

    let mut by_layer: Vec<usize> = (0..objects.len()).collect();
    by_layer.sort_by_key(|&i| objects[i].layer);

    let mut gt = SequenceAnnotation::new("synth", spec.frames, h, w);
    let mut depth = Vec::with_capacity(spec.frames);
    let mut flow = Vec::with_capacity(spec.frames);
    let mut detections = Vec::with_capacity(spec.frames);
    let mut sources = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        // owner map, painted far to near
        let mut owner = vec![usize::MAX; h * w];
        for &i in &by_layer {
            for r in 0..h {
                for c in 0..w {
                    if objects[i].covers(f, r, c) {
                        owner[r * w + c] = i;
                    }
                }
            }
        }
        let mut d = Vec::with_capacity(h * w);
        let (mut dx, mut dy) = (vec![0.0; h * w], vec![0.0; h * w]);
        for r in 0..h {
            for c in 0..w {
                let o = owner[r * w + c];
                d.push(if spec.constant_depth {
                    1.0
                } else if o == usize::MAX {
                    // gentle ramp, far below every layer
                    0.2 * r as f64 / (h - 1) as f64
                } else {
                    objects[o].depth(spec.objects)
                });
                if o != usize::MAX {
                    dx[r * w + c] = -objects[o].velocity.1 as f64;
                    dy[r * w + c] = -objects[o].velocity.0 as f64;
                }
            }
        }
        depth.push(DepthMap::new(Plane::new(h, w, d)?)?);
        flow.push(FlowField::new(h, w, dx, dy)?);

        let mut dets = Vec::new();
        let mut src = Vec::new();
        for (i, obj) in objects.iter().enumerate() {
            let visible = BinaryMask::new(h, w, owner.iter().map(|&o| o == i).collect())?;
            if visible.is_empty() {
                continue;
            }
            gt.push(
                f,
                AnnotatedObject {
                    track_id: obj.track_id,
                    class_id: obj.class_id,
                    mask: rle_encode(&visible),
                },
            );
            let coarse = morph(&visible, spec.noise_radius, obj.dilate);
            if coarse.is_empty() {
                continue;
            }
            let embedding = obj
                .embedding
                .iter()
                .map(|v| v + spec.embedding_jitter * rng.gen_range(-1.0..=1.0))
                .collect();
            dets.push(Detection {
                frame: f,
                bbox: mask_to_bbox(&coarse),
                class_id: obj.class_id,
                score: 0.5 + 0.45 * (obj.layer + 1) as f64 / spec.objects as f64,
                mask: rle_encode(&coarse),
                embedding,
            });
            src.push(i);
        }
        detections.push(dets);
        sources.push(src);
    }
    gt.frame_count = spec.frames;
    gt.validate()?;
    Ok(SynthOutput {
        spec: spec.clone(),
        objects,
        ground_truth: gt,
        depth,
        flow,
        detections,
        sources,
    })
}

impl SynthOutput {
    /// Writes `gt/<seq>.txt`, `depth/NNNNNN.pfm`, `flow/NNNNNN.flo` and
    /// `detections.json` below `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let seq = &self.ground_truth.sequence_id;
        for sub in ["gt", "depth", "flow"] {
            std::fs::create_dir_all(dir.join(sub))?;
        }
        let mut text = write_mots_txt(&self.ground_truth).join("\n");
        text.push('\n');
        write_atomic(&dir.join("gt").join(format!("{seq}.txt")), text.as_bytes())?;
        for (f, d) in self.depth.iter().enumerate() {
            write_pfm(dir.join("depth").join(format!("{f:06}.pfm")), d)?;
        }
        for (f, fl) in self.flow.iter().enumerate() {
            write_flo(dir.join("flow").join(format!("{f:06}.flo")), fl)?;
        }
        let file = DetectionFile::from_frames(
            seq,
            self.spec.height,
            self.spec.width,
            Some(self.spec.frames),
            &self.detections,
        );
        write_detections(dir.join("detections.json"), &file)
    }
}
