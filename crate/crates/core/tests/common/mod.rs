//! Independent reference implementations and generators shared by the
//! integration and acceptance tests. Nothing here calls the library's
//! matching, IoU or loss code.

#![allow(dead_code)]

use std::collections::HashMap;

use motskit::dataset::{AnnotatedObject, ClassId, SequenceAnnotation};
use motskit::mask::{rle_encode, BinaryMask};
use rand::Rng;

// ---------------------------------------------------------------- boxes

/// Box areas by counting unit cells of integer-coordinate boxes scaled by
/// `scale`, returning `(intersection, union, enclosing)`.
pub fn raster_box_areas(a: [f64; 4], b: [f64; 4], scale: f64) -> (f64, f64, f64) {
    let s = |v: f64| (v * scale).round() as i64;
    let (a, b) = ([s(a[0]), s(a[1]), s(a[2]), s(a[3])], [s(b[0]), s(b[1]), s(b[2]), s(b[3])]);
    let lo_x = a[0].min(b[0]);
    let lo_y = a[1].min(b[1]);
    let hi_x = a[2].max(b[2]);
    let hi_y = a[3].max(b[3]);
    let inside = |bx: &[i64; 4], x: i64, y: i64| x >= bx[0] && x < bx[2] && y >= bx[1] && y < bx[3];
    let (mut inter, mut uni) = (0i64, 0i64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
            inter += (ia && ib) as i64;
            uni += (ia || ib) as i64;
        }
    }
    let cell = scale * scale;
    let encl = ((hi_x - lo_x) * (hi_y - lo_y)) as f64;
    (inter as f64 / cell, uni as f64 / cell, encl / cell)
}

pub fn raster_giou(a: [f64; 4], b: [f64; 4], scale: f64) -> f64 {
    let (i, u, c) = raster_box_areas(a, b, scale);
    i / u - (c - u) / c
}

/// Closed-form gradient of `-ln((1 + GIoU) / 2)` w.r.t. the predicted box
/// `(x1, y1, x2, y2)`, valid away from coordinate ties.
pub fn giou_loss_grad(p: [f64; 4], t: [f64; 4]) -> [f64; 4] {
    let (x1, y1, x2, y2) = (p[0], p[1], p[2], p[3]);
    let (u1, v1, u2, v2) = (t[0], t[1], t[2], t[3]);
    let iw = x2.min(u2) - x1.max(u1);
    let ih = y2.min(v2) - y1.max(v1);
    let overlap = iw > 0.0 && ih > 0.0;
    let inter = if overlap { iw * ih } else { 0.0 };
    let ap = (x2 - x1) * (y2 - y1);
    let at = (u2 - u1) * (v2 - v1);
    let union = ap + at - inter;
    let cw = x2.max(u2) - x1.min(u1);
    let ch = y2.max(v2) - y1.min(v1);
    let encl = cw * ch;
    let giou = inter / union - 1.0 + union / encl;

    // partial derivatives of (inter, area_p, encl) for each coordinate
    let di = |active: bool, sign: f64, other: f64| if overlap && active { sign * other } else { 0.0 };
    let d_inter = [
        di(x1 > u1, -1.0, ih),
        di(y1 > v1, -1.0, iw),
        di(x2 < u2, 1.0, ih),
        di(y2 < v2, 1.0, iw),
    ];
    let d_ap = [-(y2 - y1), -(x2 - x1), y2 - y1, x2 - x1];
    let d_encl = [
        if x1 < u1 { -ch } else { 0.0 },
        if y1 < v1 { -cw } else { 0.0 },
        if x2 > u2 { ch } else { 0.0 },
        if y2 > v2 { cw } else { 0.0 },
    ];
    let mut g = [0.0; 4];
    for k in 0..4 {
        let du = d_ap[k] - d_inter[k];
        let dg = d_inter[k] / union - inter * du / (union * union) + du / encl - union * d_encl[k] / (encl * encl);
        g[k] = -dg / (1.0 + giou);
    }
    g
}

/// Random pair with every coordinate kink at least `gap` away.
pub fn random_pair<R: Rng>(rng: &mut R, gap: f64) -> ([f64; 4], [f64; 4]) {
    loop {
        let mut b = [0.0f64; 8];
        for v in b.iter_mut() {
            *v = rng.gen_range(0.0..20.0);
        }
        let p = [b[0].min(b[2]), b[1].min(b[3]), b[0].max(b[2]), b[1].max(b[3])];
        let t = [b[4].min(b[6]), b[5].min(b[7]), b[4].max(b[6]), b[5].max(b[7])];
        let xs = [p[0], p[2], t[0], t[2]];
        let ys = [p[1], p[3], t[1], t[3]];
        let separated = |v: &[f64; 4]| (0..4).all(|i| (i + 1..4).all(|j| (v[i] - v[j]).abs() > gap));
        if separated(&xs) && separated(&ys) {
            return (p, t);
        }
    }
}

// ---------------------------------------------------------------- masks

pub fn label_map_masks(labels: &[u8], h: usize, w: usize) -> Vec<(u32, BinaryMask)> {
    let mut ids: Vec<u8> = labels.iter().copied().filter(|&l| l != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let m = BinaryMask::new(h, w, labels.iter().map(|&l| l == id).collect()).unwrap();
            (id as u32, m)
        })
        .collect()
}

/// Pixel-count IoU.
pub fn brute_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let mut inter = 0usize;
    let mut uni = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        uni += (x || y) as usize;
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

pub fn annotation_from_labels(seq: &str, h: usize, w: usize, frames: &[Vec<u8>], class: ClassId) -> SequenceAnnotation {
    let mut a = SequenceAnnotation::new(seq, frames.len(), h, w);
    for (f, labels) in frames.iter().enumerate() {
        for (id, m) in label_map_masks(labels, h, w) {
            a.push(
                f,
                AnnotatedObject {
                    track_id: id,
                    class_id: class,
                    mask: rle_encode(&m),
                },
            );
        }
    }
    a.frame_count = frames.len();
    a
}

/// Random rectangles painted in order; later ones occlude earlier ones.
pub fn random_label_map<R: Rng>(rng: &mut R, h: usize, w: usize, objects: usize) -> Vec<u8> {
    let mut labels = vec![0u8; h * w];
    for id in 1..=objects as u8 {
        let r0 = rng.gen_range(0..h);
        let c0 = rng.gen_range(0..w);
        let r1 = rng.gen_range(r0 + 1..=h.min(r0 + 10));
        let c1 = rng.gen_range(c0 + 1..=w.min(c0 + 10));
        for r in r0..r1 {
            for c in c0..c1 {
                labels[r * w + c] = id;
            }
        }
    }
    labels
}

/// A ground-truth micro-sequence and a perturbed prediction of it: pixel
/// noise, dropped objects, spurious objects and occasional id swaps.
pub fn micro_sequence<R: Rng>(rng: &mut R) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    let (h, w) = (16usize, 16usize);
    let frames = rng.gen_range(1..=5);
    let objects = rng.gen_range(1..=4);
    let noise = rng.gen_range(0.0..0.4);
    let mut perm: Vec<u8> = (1..=4).collect();
    for i in (1..4).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..frames {
        let g = random_label_map(rng, h, w, objects);
        if rng.gen_bool(0.2) {
            let (a, b) = (rng.gen_range(0..4), rng.gen_range(0..4));
            perm.swap(a, b);
        }
        let drop = if rng.gen_bool(0.2) { rng.gen_range(1..=4u8) } else { 0 };
        let mut p: Vec<u8> = g
            .iter()
            .map(|&l| {
                if l == 0 || l == drop {
                    0
                } else {
                    perm[(l - 1) as usize]
                }
            })
            .collect();
        for px in p.iter_mut() {
            if rng.gen_bool(noise) {
                *px = rng.gen_range(0..=5);
            }
        }
        gt.push(g);
        pred.push(p);
    }
    (gt, pred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteMots {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub soft_tp: f64,
    pub motsa: Option<f64>,
    pub smotsa: Option<f64>,
}

/// Exhaustive pair scan per frame plus the switch rule applied directly.
pub fn brute_mots(gt: &[Vec<u8>], pred: &[Vec<u8>], h: usize, w: usize) -> BruteMots {
    let (mut tp, mut fp, mut fn_, mut ids) = (0, 0, 0, 0);
    let mut soft = 0.0;
    let mut last: HashMap<u32, u32> = HashMap::new();
    for (g, p) in gt.iter().zip(pred) {
        let gm = label_map_masks(g, h, w);
        let pm = label_map_masks(p, h, w);
        let mut pred_hit = vec![0usize; pm.len()];
        for (gid, gmask) in &gm {
            let hits: Vec<(usize, f64)> = pm
                .iter()
                .enumerate()
                .map(|(j, (_, m))| (j, brute_iou(gmask, m)))
                .filter(|&(_, v)| v > 0.5)
                .collect();
            assert!(hits.len() <= 1, "non-overlap implies a unique partner");
            match hits.first() {
                Some(&(j, v)) => {
                    tp += 1;
                    soft += v;
                    pred_hit[j] += 1;
                    let pid = pm[j].0;
                    if let Some(prev) = last.insert(*gid, pid) {
                        if prev != pid {
                            ids += 1;
                        }
                    }
                }
                None => fn_ += 1,
            }
        }
        assert!(pred_hit.iter().all(|&c| c <= 1));
        fp += pred_hit.iter().filter(|&&c| c == 0).count();
    }
    let n = (tp + fn_) as f64;
    let ratio = |x: f64| (tp + fn_ > 0).then(|| x / n);
    BruteMots {
        tp,
        fp,
        fn_,
        ids,
        soft_tp: soft,
        motsa: ratio(tp as f64 - fp as f64 - ids as f64),
        smotsa: ratio(soft - fp as f64 - ids as f64),
    }
}

/// Overall HOTA and `(DetA, AssA)` per alpha.
pub type BruteHota = (Option<f64>, Vec<(f64, f64)>);

/// HOTA by exhaustive enumeration of every partial one-to-one matching in
/// every frame. Returns `None` if some frame has two distinct optimal
/// matchings (the score is then ambiguous).
pub fn brute_hota(gt: &[Vec<u8>], pred: &[Vec<u8>], h: usize, w: usize) -> Option<BruteHota> {
    struct Frame {
        g: Vec<u32>,
        p: Vec<u32>,
        iou: Vec<Vec<f64>>,
    }
    let frames: Vec<Frame> = gt
        .iter()
        .zip(pred)
        .map(|(g, p)| {
            let gm = label_map_masks(g, h, w);
            let pm = label_map_masks(p, h, w);
            let iou = gm.iter().map(|(_, a)| pm.iter().map(|(_, b)| brute_iou(a, b)).collect()).collect();
            Frame {
                g: gm.iter().map(|x| x.0).collect(),
                p: pm.iter().map(|x| x.0).collect(),
                iou,
            }
        })
        .collect();

    let mut gcount: HashMap<u32, f64> = HashMap::new();
    let mut pcount: HashMap<u32, f64> = HashMap::new();
    let mut pot: HashMap<(u32, u32), f64> = HashMap::new();
    for f in &frames {
        for &g in &f.g {
            *gcount.entry(g).or_default() += 1.0;
        }
        for &p in &f.p {
            *pcount.entry(p).or_default() += 1.0;
        }
        for (i, &g) in f.g.iter().enumerate() {
            let rs: f64 = f.iou[i].iter().sum();
            for (j, &p) in f.p.iter().enumerate() {
                let cs: f64 = f.iou.iter().map(|r| r[j]).sum();
                let d = rs + cs - f.iou[i][j];
                if d > 0.0 {
                    *pot.entry((g, p)).or_default() += f.iou[i][j] / d;
                }
            }
        }
    }
    let align = |g: u32, p: u32| {
        let v = pot.get(&(g, p)).copied().unwrap_or(0.0);
        v / (gcount[&g] + pcount[&p] - v)
    };

    // every injective partial map from gt rows to pred columns
    fn enumerate(n: usize, m: usize, row: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if row == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        enumerate(n, m, row + 1, used, cur, out);
        cur.pop();
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                enumerate(n, m, row + 1, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }

    let total_g: usize = frames.iter().map(|f| f.g.len()).sum();
    let total_p: usize = frames.iter().map(|f| f.p.len()).sum();
    let mut per_alpha = Vec::new();
    for i in 1..=19 {
        let alpha = i as f64 / 20.0;
        let mut matches: HashMap<(u32, u32), f64> = HashMap::new();
        let mut tp = 0usize;
        for f in &frames {
            let mut all = Vec::new();
            enumerate(f.g.len(), f.p.len(), 0, &mut vec![false; f.p.len()], &mut Vec::new(), &mut all);
            type Scored = (usize, f64, Vec<(usize, usize)>);
            let scored: Vec<Scored> = all
                .into_iter()
                .map(|asg| {
                    let pairs: Vec<(usize, usize)> = asg
                        .iter()
                        .enumerate()
                        .filter_map(|(r, c)| c.map(|c| (r, c)))
                        .filter(|&(r, c)| f.iou[r][c] >= alpha)
                        .collect();
                    let score = pairs.iter().map(|&(r, c)| align(f.g[r], f.p[c]) * f.iou[r][c]).sum();
                    (pairs.len(), score, pairs)
                })
                .collect();
            let best = scored
                .iter()
                .max_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
                .unwrap();
            let mut best_pairs = best.2.clone();
            best_pairs.sort_unstable();
            for s in &scored {
                if s.0 == best.0 && (s.1 - best.1).abs() < 1e-12 {
                    let mut p = s.2.clone();
                    p.sort_unstable();
                    if p != best_pairs {
                        return None;
                    }
                }
            }
            for &(r, c) in &best_pairs {
                *matches.entry((f.g[r], f.p[c])).or_default() += 1.0;
                tp += 1;
            }
        }
        let fn_ = total_g - tp;
        let fp = total_p - tp;
        let deta = if tp + fn_ + fp > 0 { tp as f64 / (tp + fn_ + fp) as f64 } else { 0.0 };
        let assa = if tp > 0 {
            matches
                .iter()
                .map(|(&(g, p), &m)| m * m / (gcount[&g] + pcount[&p] - m))
                .sum::<f64>()
                / tp as f64
        } else {
            0.0
        };
        per_alpha.push((deta, assa));
    }
    let hota = (total_g > 0).then(|| per_alpha.iter().map(|(d, a)| (d * a).sqrt()).sum::<f64>() / 19.0);
    Some((hota, per_alpha))
}

// ---------------------------------------------------------------- rle

/// `(mask, reference counts)` pairs from the frozen reference fixture.
pub fn rle_fixtures() -> Vec<(BinaryMask, String)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/rle_reference.json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let h = c["height"].as_u64().unwrap() as usize;
            let w = c["width"].as_u64().unwrap() as usize;
            let px: Vec<bool> = c["pixels"].as_str().unwrap().bytes().map(|b| b == b'1').collect();
            (BinaryMask::new(h, w, px).unwrap(), c["counts"].as_str().unwrap().to_string())
        })
        .collect()
}

/// Random mask up to 64x64 with a random density, sometimes blocky.
pub fn random_mask<R: Rng>(rng: &mut R) -> BinaryMask {
    let h: usize = rng.gen_range(1..=64);
    let w: usize = rng.gen_range(1..=64);
    let p = rng.gen_range(0.0..=1.0);
    let block: usize = rng.gen_range(1..=8);
    let cells: Vec<bool> = (0..h.div_ceil(block) * w.div_ceil(block)).map(|_| rng.gen_bool(p)).collect();
    let cw = w.div_ceil(block);
    BinaryMask::from_fn(h, w, |r, c| cells[(r / block) * cw + c / block]).unwrap()
}

// ------------------------------------------------------------- synthetic

/// Per synthetic object, the mean IoU over its visible frames of the
/// refined masks and of the coarse masks, both pasted with score priority.
/// A frame without a detection counts as IoU 0 for both.
pub fn dgm_benefit(out: &motskit::synth::SynthOutput, params: &motskit::depth::DgmParams) -> Vec<(f64, f64)> {
    use motskit::depth::{paste_roi, refine_mask, PlacedMask, Roi, SoftMask};

    let (h, w) = (out.spec.height, out.spec.width);
    let n = out.objects.len();
    let mut sums = vec![(0.0, 0.0, 0usize); n];
    for f in 0..out.spec.frames {
        let dets = &out.detections[f];
        let src = &out.sources[f];
        let mut refined = Vec::new();
        let mut coarse = Vec::new();
        for (d, &i) in dets.iter().zip(src) {
            let m = d.mask.decode().unwrap();
            let r = refine_mask(&SoftMask::from_binary(&m), &out.depth[f], &d.bbox, params).unwrap();
            refined.push(PlacedMask {
                id: i as u32 + 1,
                score: d.score,
                roi: r.roi,
                mask: r.binarize(params).unwrap(),
            });
            coarse.push(PlacedMask {
                id: i as u32 + 1,
                score: d.score,
                roi: Roi { row: 0, col: 0, height: h, width: w },
                mask: m,
            });
        }
        let refined = paste_roi(h, w, &refined).unwrap();
        let coarse = paste_roi(h, w, &coarse).unwrap();
        let gt = out.ground_truth.objects(f);
        for (i, obj) in out.objects.iter().enumerate() {
            let Some(g) = gt.iter().find(|o| o.class_id == obj.class_id && o.track_id == obj.track_id) else {
                continue;
            };
            let g = g.mask.decode().unwrap();
            let s = &mut sums[i];
            s.2 += 1;
            if let Some(k) = src.iter().position(|&j| j == i) {
                s.0 += brute_iou(&refined[k], &g);
                s.1 += brute_iou(&coarse[k], &g);
            }
        }
    }
    sums.into_iter()
        .filter(|s| s.2 > 0)
        .map(|(r, c, k)| (r / k as f64, c / k as f64))
        .collect()
}

/// The scene used for the refinement benefit check.
pub fn benefit_spec(seed: u64) -> motskit::synth::SynthSpec {
    motskit::synth::SynthSpec {
        seed,
        noise_radius: 1 + (seed % 2) as usize,
        ..Default::default()
    }
}

// --------------------------------------------------------------- dataset

/// 21 sequences, 8000 frames, 749 identities and 38240 instances: the
/// counts of the KITTI MOTS row of the annotation statistics table. Each
/// instance is one pixel in row 0 at its track's column; every tenth frame
/// also carries an ignore region in row 3.
pub fn kitti_row_fixture() -> Vec<SequenceAnnotation> {
    use motskit::dataset::IgnoreRegion;

    let (h, w) = (4, 64);
    let mut global = 0usize;
    (0..21)
        .map(|s| {
            let frames = if s < 20 { 381 } else { 380 };
            let ids = if s < 20 { 35 } else { 49 };
            let mut ann = SequenceAnnotation::new(format!("{s:04}"), frames, h, w);
            for f in 0..frames {
                let per_frame = if global < 6240 { 5 } else { 4 };
                global += 1;
                for t in 0..per_frame {
                    let id = (f * 4 + t) % ids;
                    let m = BinaryMask::from_fn(h, w, |r, c| r == 0 && c == id).unwrap();
                    ann.push(
                        f,
                        AnnotatedObject {
                            track_id: id as u32 + 1,
                            class_id: if id % 3 == 0 { ClassId::PEDESTRIAN } else { ClassId::CAR },
                            mask: rle_encode(&m),
                        },
                    );
                }
                if f % 10 == 0 {
                    let m = BinaryMask::from_fn(h, w, |r, _| r == 3).unwrap();
                    ann.push_ignore(f, IgnoreRegion { class_id: ClassId::IGNORE, mask: rle_encode(&m) });
                }
            }
            ann
        })
        .collect()
}

// -------------------------------------------------------- metric fixtures

pub fn rect(h: usize, w: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> BinaryMask {
    BinaryMask::from_fn(h, w, |r, c| (r0..r1).contains(&r) && (c0..c1).contains(&c)).unwrap()
}

pub fn push(a: &mut SequenceAnnotation, f: usize, id: u32, class: ClassId, m: &BinaryMask) {
    a.push(
        f,
        AnnotatedObject {
            track_id: id,
            class_id: class,
            mask: rle_encode(m),
        },
    );
}

/// One frame, two gt; one pred at IoU 0.8 and one spurious mask.
pub fn hand_fixture(class: ClassId) -> (SequenceAnnotation, SequenceAnnotation) {
    let mut gt = SequenceAnnotation::new("hand", 1, 10, 10);
    let mut pred = gt.clone();
    push(&mut gt, 0, 1, class, &rect(10, 10, 0, 2, 0, 5)); // 10 px
    push(&mut gt, 0, 2, class, &rect(10, 10, 5, 7, 0, 5));
    push(&mut pred, 0, 1, class, &rect(10, 10, 0, 2, 0, 4)); // 8 of 10
    push(&mut pred, 0, 2, class, &rect(10, 10, 9, 10, 8, 10));
    (gt, pred)
}

/// gt track over three frames matched by pred ids a, a, b.
pub fn switch_fixture() -> (SequenceAnnotation, SequenceAnnotation) {
    let mut gt = SequenceAnnotation::new("sw", 3, 6, 6);
    let mut pred = gt.clone();
    let m = rect(6, 6, 1, 4, 1, 4);
    for f in 0..3 {
        push(&mut gt, f, 1, ClassId::CAR, &m);
        push(&mut pred, f, if f < 2 { 7 } else { 8 }, ClassId::CAR, &m);
    }
    (gt, pred)
}

/// One gt track over two frames predicted as two tracks of one frame each.
pub fn split_fixture() -> (SequenceAnnotation, SequenceAnnotation) {
    let mut gt = SequenceAnnotation::new("split", 2, 6, 6);
    let mut pred = gt.clone();
    let m = rect(6, 6, 1, 4, 1, 4);
    for f in 0..2 {
        push(&mut gt, f, 1, ClassId::CAR, &m);
        push(&mut pred, f, f as u32 + 1, ClassId::CAR, &m);
    }
    (gt, pred)
}
