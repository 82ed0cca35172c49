//! Test oracles and generators shared by the integration tests.
//!
//! The oracles recompute each quantity from its definition without calling
//! into the library, so agreement is evidence rather than tautology.

#![allow(dead_code)]

use adforge::evalstats::{GroundTruthFrame, GroundTruthVideo};
use adforge::model::{AnnotationFile, BBox, Detection, FrameRecord, NativeAd, Point, VideoMeta};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn load_fixture(id: &str) -> AnnotationFile {
    let text = std::fs::read_to_string(fixture_path(&format!("annotations/{id}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub const FIXTURE_VIDEOS: [&str; 2] = ["kitchen-tour", "street-corner"];

// ---------------------------------------------------------------- captions

fn stopwords() -> HashSet<String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/stopwords.txt");
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn oracle_fnv(word: &str) -> u64 {
    const OFFSET: u64 = 14695981039346656037;
    const PRIME: u64 = 1099511628211;
    word.bytes().fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Bag-of-words vector over 16 hashed buckets, unit length.
pub fn oracle_embed(text: &str) -> Vec<f64> {
    let stop = stopwords();
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
    }
    let content: Vec<&String> = words.iter().filter(|w| !stop.contains(*w)).collect();
    let chosen: Vec<&String> = if content.is_empty() { words.iter().collect() } else { content };
    let mut v = vec![0.0; 16];
    for w in chosen {
        v[(oracle_fnv(w) % 16) as usize] += 1.0;
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if v.len() < 2 || hi - lo <= 1e-12 {
        return vec![0.5; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Keyframe of `members` by exhaustive argmax over both scores, computed
/// straight from the definitions. Native-AD frames win outright.
pub fn brute_force_keyframe(members: &[FrameRecord], w_obj: f64, w_sem: f64) -> u64 {
    if let Some(f) = members.iter().find(|f| f.native_ad_index.is_some()) {
        return f.frame_index;
    }
    let counts: Vec<f64> = members.iter().map(|f| f.detections.len() as f64).collect();
    let emb: Vec<Vec<f64>> = members.iter().map(|f| oracle_embed(&f.caption)).collect();
    let n = members.len();
    let uniq: Vec<f64> = (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += oracle_cosine(&emb[i], &emb[j]);
                }
            }
            1.0 - s / (n - 1) as f64
        })
        .collect();
    let (o, s) = (normalize(&counts), normalize(&uniq));
    let totals: Vec<f64> = (0..n).map(|i| w_obj * o[i] + w_sem * s[i]).collect();
    let best = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (w_obj + w_sem);
    let i = (0..n).find(|&i| totals[i] >= best - tol).unwrap();
    members[i].frame_index
}

// ---------------------------------------------------------------- matching

fn overlap(a: &BBox, b: &BBox) -> f64 {
    let left = a.x.max(b.x);
    let right = (a.x + a.w).min(b.x + b.w);
    let top = a.y.max(b.y);
    let bottom = (a.y + a.h).min(b.y + b.h);
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Largest number of one-to-one same-label pairs with IoU at or above the
/// threshold, by exhaustive search over assignments.
pub fn brute_force_max_matches(pred: &[Detection], gt: &GroundTruthFrame, thr: f64) -> usize {
    fn go(i: usize, pred: &[Detection], gt: &GroundTruthFrame, thr: f64, used: &mut Vec<bool>) -> usize {
        if i == pred.len() {
            return 0;
        }
        let mut best = go(i + 1, pred, gt, thr, used);
        for g in 0..gt.objects.len() {
            if !used[g] && gt.objects[g].label == pred[i].label && overlap(&pred[i].bbox, &gt.objects[g].bbox) >= thr {
                used[g] = true;
                best = best.max(1 + go(i + 1, pred, gt, thr, used));
                used[g] = false;
            }
        }
        best
    }
    go(0, pred, gt, thr, &mut vec![false; gt.objects.len()])
}

/// (matched, predicted, ground truth) for a video, after the confidence and
/// size filter, using the brute-force matcher.
pub fn brute_force_video_counts(
    pred: &AnnotationFile,
    gt: &GroundTruthVideo,
    conf: f64,
    min_dim: f64,
    thr: f64,
) -> (usize, usize, usize) {
    let (mut m, mut p, mut g) = (0, 0, 0);
    for frame in &gt.frames {
        let kept: Vec<Detection> = pred
            .frames
            .iter()
            .filter(|f| f.frame_index == frame.frame_index)
            .flat_map(|f| f.detections.iter())
            .filter(|d| d.confidence >= conf && d.bbox.w >= min_dim && d.bbox.h >= min_dim)
            .cloned()
            .collect();
        m += brute_force_max_matches(&kept, frame, thr);
        p += kept.len();
        g += frame.objects.len();
    }
    (m, p, g)
}

// ---------------------------------------------------------------- statistics

/// Quadratic weighted kappa written as squared-difference means:
/// `1 - mean_i (a_i - b_i)^2 / mean_{i,j} (a_i - b_j)^2`.
pub fn kappa_pairwise(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    let obs: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / n;
    let mut exp = 0.0;
    for x in a {
        for y in b {
            exp += (*x as f64 - *y as f64).powi(2);
        }
    }
    exp /= n * n;
    if exp == 0.0 {
        1.0
    } else {
        1.0 - obs / exp
    }
}

/// Exact two-sided p of the signed-rank statistic: the share of all 2^n
/// sign flips whose W+ lies at least as far from its mean as the observed.
pub fn wilcoxon_exact_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().cloned().filter(|x| *x != 0.0).collect();
    let n = d.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].abs().partial_cmp(&d[j].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        for k in i..=j {
            ranks[idx[k]] = (i + j + 2) as f64 / 2.0;
        }
        i = j + 1;
    }
    let total: f64 = ranks.iter().sum();
    let mean = total / 2.0;
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let dev = (observed - mean).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn f_density(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let ln = 0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_b;
    ln.exp()
}

/// Upper tail of the F distribution by composite Simpson quadrature of the
/// density over `[f, inf)`, mapped onto `[0, 1)` with `x = f + s / (1 - s)`.
pub fn f_tail_quadrature(f: f64, d1: f64, d2: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let x = f + s / (1.0 - s);
        f_density(x, d1, d2) / ((1.0 - s) * (1.0 - s))
    };
    let mut sum = g(0.0) + g(1.0);
    for i in 1..n {
        let s = i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * g(s);
    }
    sum * h / 3.0
}

// ---------------------------------------------------------------- generators

const LABELS: [&str; 8] = ["person", "car", "dog", "cup", "bowl", "chair", "bus", "bicycle"];
const WORDS: [&str; 16] = [
    "kitchen", "street", "table", "window", "garden", "crowd", "river", "stage", "market", "bridge",
    "sofa", "laptop", "snow", "sunlight", "train", "harbor",
];

pub fn random_detection(rng: &mut ChaCha8Rng) -> Detection {
    let label = LABELS.choose(rng).unwrap().to_string();
    let w = rng.gen_range(0.0002..0.5);
    let h = rng.gen_range(0.0002..0.5);
    let x = rng.gen_range(0.0..1.0 - w);
    let y = rng.gen_range(0.0..1.0 - h);
    let fill = rng.gen_range(0.3..1.0);
    Detection {
        label,
        confidence: if rng.gen_bool(0.25) { rng.gen_range(0.5..0.9) } else { rng.gen_range(0.9..=1.0) },
        bbox: BBox::new(x, y, w, h),
        mask_polygon: vec![Point(x, y), Point(x + w, y), Point(x + w, y + h), Point(x, y + h)],
        mask_area_fraction: w * h * fill,
        centroid: Point(x + w / 2.0, y + h / 2.0),
        depth_norm: rng.gen_range(0.0..=1.0),
    }
}

/// A valid annotation file with random fps, caption drift, detections and
/// native ADs. Every detection gets an object caption.
pub fn random_annotations(seed: u64) -> AnnotationFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fps = *[0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 25.0].choose(&mut rng).unwrap();
    let n = rng.gen_range(1..=60usize);
    let mut topic: Vec<&str> = WORDS.choose_multiple(&mut rng, 4).cloned().collect();
    let mut frames = Vec::with_capacity(n);
    let mut native_ads = Vec::new();
    for i in 0..n {
        if rng.gen_bool(0.15) {
            let k = rng.gen_range(0..topic.len());
            topic[k] = WORDS.choose(&mut rng).unwrap();
        }
        let caption = format!("A view of the {} with {} and {}", topic[0], topic[1], topic[2]);
        let detections: Vec<Detection> = (0..rng.gen_range(0..6)).map(|_| random_detection(&mut rng)).collect();
        let t = i as f64 / fps;
        let native_ad_index = if rng.gen_bool(0.1) {
            native_ads.push(NativeAd { timestamp_s: t, text: format!("Narration {}", native_ads.len()), extended: rng.gen_bool(0.5) });
            Some(native_ads.len() - 1)
        } else {
            None
        };
        frames.push(FrameRecord {
            frame_index: i as u64,
            timestamp_s: t,
            caption,
            object_captions: detections
                .iter()
                .map(|d| format!("A close up of a {} near the {}", d.label, topic[3]))
                .collect(),
            detections,
            native_ad_index,
        });
    }
    AnnotationFile {
        meta: VideoMeta {
            video_id: format!("random-{seed}"),
            duration_s: n as f64 / fps,
            fps,
            width_px: 1280,
            height_px: 720,
            title: format!("random {seed}"),
            native_ads,
            media_uri: None,
        },
        frames,
    }
}

/// Rating-like paired samples: seven-point scores with the second member
/// shifted up by a random effect.
pub fn rating_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let effect = rng.gen_range(-2i32..=2);
    (0..n)
        .map(|_| {
            let x = rng.gen_range(1..=7i32);
            let y = (x + effect + rng.gen_range(-2..=2)).clamp(1, 7);
            (y as f64, x as f64)
        })
        .collect()
}

pub fn by_frame(frames: &[FrameRecord]) -> BTreeMap<u64, &FrameRecord> {
    frames.iter().map(|f| (f.frame_index, f)).collect()
}

// ---------------------------------------------------------------- service

/// A store under a fresh temp dir with both fixture videos ingested.
pub fn seeded_store() -> (tempfile::TempDir, std::sync::Arc<adforge::service::DocumentStore>) {
    let dir = tempfile::tempdir().unwrap();
    let store = adforge::service::DocumentStore::open(dir.path().join("store")).unwrap();
    for id in FIXTURE_VIDEOS {
        store.ingest_annotations(&load_fixture(id)).unwrap();
    }
    (dir, std::sync::Arc::new(store))
}

/// Serves the router on an ephemeral port from a background runtime; returns the base URL.
pub fn spawn_server(store: std::sync::Arc<adforge::service::DocumentStore>) -> String {
    use adforge::backends::Backends;
    use adforge::service::http::{serve, AppState};
    let state = AppState {
        store,
        base_config: adforge::PipelineConfig::default(),
        backends: std::sync::Arc::new(Backends::fixture),
    };
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve(listener, state).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// GET or POST returning status and body bytes; non-2xx statuses are not errors.
pub fn http(method: &str, url: &str) -> (u16, Vec<u8>) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let resp = match method {
        "POST" => agent.post(url).send_empty(),
        _ => agent.get(url).call(),
    }
    .unwrap();
    let status = resp.status().as_u16();
    (status, resp.into_body().read_to_vec().unwrap())
}
