//! Shapes: scene generation (128×128 RGB, PPM + JSONL sidecar) and the
//! perception→reasoning pipeline answering "Is there a red shape above a
//! blue circle?".

use super::{bernoulli_nll, Metrics, TaskConfig, TaskError};
use crate::logic::{parse_source, validate, ValidatedProgram};
use crate::neural::{ForwardCache, LayerSpec, Network, Optimizer, OptimizerKind};
use crate::provenance::SemiringSpec;
use crate::reasoner::seed_facts;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub const IMG_SIDE: usize = 128;
pub const ABOVE_MARGIN: i64 = 4;
pub const QUESTION: &str = "Is there a red shape above a blue circle?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
}

impl Color {
    fn rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [220, 40, 40],
            Color::Green => [40, 200, 40],
            Color::Blue => [40, 60, 220],
            Color::Yellow => [230, 220, 40],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub color: Color,
    /// [x0, y0, x1, y1], inclusive-exclusive.
    pub bbox: [i64; 4],
}

impl ObjectSpec {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.bbox[0] + self.bbox[2]) as f64 / 2.0,
            (self.bbox[1] + self.bbox[3]) as f64 / 2.0,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub id: usize,
    pub split: String,
    pub label: bool,
    pub question: String,
    pub margin: i64,
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    /// The generator's positive condition: some red object's center strictly
    /// above (smaller y, by at least the margin) some blue circle's center.
    pub fn holds(&self) -> bool {
        self.objects.iter().any(|r| {
            r.color == Color::Red
                && self.objects.iter().any(|b| {
                    b.color == Color::Blue
                        && b.shape == Shape::Circle
                        && r.center().1 < b.center().1 - self.margin as f64
                })
        })
    }
}

fn boxes_clash(a: &[i64; 4], b: &[i64; 4]) -> bool {
    // 2 px padding keeps shapes visually separated.
    a[0] < b[2] + 2 && b[0] < a[2] + 2 && a[1] < b[3] + 2 && b[1] < a[3] + 2
}

fn random_bbox(rng: &mut ChaCha8Rng) -> [i64; 4] {
    let s = rng.gen_range(18..=30i64);
    let x0 = rng.gen_range(1..IMG_SIDE as i64 - s - 1);
    let y0 = rng.gen_range(1..IMG_SIDE as i64 - s - 1);
    [x0, y0, x0 + s, y0 + s]
}

fn place(rng: &mut ChaCha8Rng, taken: &[[i64; 4]], accept: impl Fn(&[i64; 4]) -> bool) -> [i64; 4] {
    loop {
        let b = random_bbox(rng);
        if accept(&b) && !taken.iter().any(|t| boxes_clash(t, &b)) {
            return b;
        }
    }
}

const ANY_SHAPE: [Shape; 3] = [Shape::Circle, Shape::Square, Shape::Triangle];

fn distractor(rng: &mut ChaCha8Rng) -> (Color, Shape) {
    // Distractors never introduce a red object or a blue circle, so they
    // cannot flip a scene's label.
    let shape = ANY_SHAPE[rng.gen_range(0..3)];
    let color = match rng.gen_range(0..3) {
        0 => Color::Green,
        1 => Color::Yellow,
        _ => {
            if shape == Shape::Circle {
                return (Color::Green, shape);
            }
            Color::Blue
        }
    };
    (color, shape)
}

fn gen_scene(rng: &mut ChaCha8Rng, id: usize, split: &str, label: bool) -> SceneSpec {
    loop {
        let mut objects = Vec::new();
        let mut taken: Vec<[i64; 4]> = Vec::new();

        let blue_box = place(rng, &taken, |b| {
            let cy = (b[1] + b[3]) / 2;
            // Leave vertical room for the red partner on either side.
            cy > 40 && cy < (IMG_SIDE as i64 - 40)
        });
        taken.push(blue_box);
        objects.push(ObjectSpec { shape: Shape::Circle, color: Color::Blue, bbox: blue_box });
        let blue_cy = (blue_box[1] + blue_box[3]) as f64 / 2.0;

        let red_shape = ANY_SHAPE[rng.gen_range(0..3)];
        let red_box = place(rng, &taken, |b| {
            let cy = (b[1] + b[3]) as f64 / 2.0;
            if label {
                cy < blue_cy - ABOVE_MARGIN as f64 - 1.0
            } else {
                cy > blue_cy + ABOVE_MARGIN as f64 + 1.0
            }
        });
        taken.push(red_box);
        objects.push(ObjectSpec { shape: red_shape, color: Color::Red, bbox: red_box });

        for _ in 0..rng.gen_range(1..=3) {
            let (color, shape) = distractor(rng);
            let b = place(rng, &taken, |_| true);
            taken.push(b);
            objects.push(ObjectSpec { shape, color, bbox: b });
        }

        let scene = SceneSpec {
            id,
            split: split.to_string(),
            label,
            question: QUESTION.to_string(),
            margin: ABOVE_MARGIN,
            objects,
        };
        if scene.holds() == label {
            return scene;
        }
    }
}

pub fn render(scene: &SceneSpec) -> Vec<u8> {
    let mut img = vec![40u8; IMG_SIDE * IMG_SIDE * 3];
    for obj in &scene.objects {
        let [x0, y0, x1, y1] = obj.bbox;
        let rgb = obj.color.rgb();
        let (cx, cy) = obj.center();
        let r = (x1 - x0) as f64 / 2.0;
        for y in y0..y1 {
            for x in x0..x1 {
                let inside = match obj.shape {
                    Shape::Square => true,
                    Shape::Circle => {
                        let dx = x as f64 + 0.5 - cx;
                        let dy = y as f64 + 0.5 - cy;
                        dx * dx + dy * dy <= r * r
                    }
                    Shape::Triangle => {
                        // Apex at bbox mid-top, base along the bottom edge.
                        let t = (y - y0) as f64 / (y1 - y0) as f64;
                        let half = t * r;
                        (x as f64 + 0.5 - cx).abs() <= half
                    }
                };
                if inside {
                    let at = (y as usize * IMG_SIDE + x as usize) * 3;
                    img[at..at + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
    img
}

/// One generated scene with its rasterized image.
pub struct SceneRecord {
    pub spec: SceneSpec,
    pub pixels: Vec<u8>,
}

/// Deterministic balanced dataset: `count` scenes split evenly into train
/// and test, each split exactly half positive.
pub fn gen_shapes(seed: u64, count: usize) -> Vec<SceneRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = count / 2;
    (0..count)
        .map(|i| {
            let (split, local) = if i < half { ("train", i) } else { ("test", i - half) };
            let label = local < half / 2;
            let spec = gen_scene(&mut rng, i, split, label);
            let pixels = render(&spec);
            SceneRecord { spec, pixels }
        })
        .collect()
}

/// Write PPM images plus an `annotations.jsonl` sidecar; returns the list
/// of files written (relative names).
pub fn write_shapes(dir: &Path, seed: u64, count: usize) -> Result<Vec<String>, TaskError> {
    std::fs::create_dir_all(dir)?;
    let records = gen_shapes(seed, count);
    let mut files = Vec::new();
    let mut sidecar = Vec::new();
    for rec in &records {
        let name = format!("scene_{:04}.ppm", rec.spec.id);
        let mut f = std::fs::File::create(dir.join(&name))?;
        write!(f, "P6\n{IMG_SIDE} {IMG_SIDE}\n255\n")?;
        f.write_all(&rec.pixels)?;
        files.push(name);
        sidecar.push(serde_json::to_string(&rec.spec)?);
    }
    std::fs::write(dir.join("annotations.jsonl"), sidecar.join("\n") + "\n")?;
    files.push("annotations.jsonl".to_string());
    Ok(files)
}

pub fn read_annotations(dir: &Path) -> Result<Vec<SceneSpec>, TaskError> {
    let text = std::fs::read_to_string(dir.join("annotations.jsonl"))?;
    text.lines().map(|l| serde_json::from_str(l).map_err(TaskError::from)).collect()
}

// ---------------------------------------------------------------------------
// Perception + reasoning pipeline.

pub const CROP_SIDE: usize = 16;
const CROP_DIM: usize = CROP_SIDE * CROP_SIDE * 3;
const PAIR_DIM: usize = 6;

/// Nearest-neighbor crop of an object's bbox, normalized RGB.
pub fn crop_object(pixels: &[u8], bbox: &[i64; 4]) -> Vec<f64> {
    let [x0, y0, x1, y1] = *bbox;
    let (w, h) = ((x1 - x0) as f64, (y1 - y0) as f64);
    let mut out = Vec::with_capacity(CROP_DIM);
    for y in 0..CROP_SIDE {
        for x in 0..CROP_SIDE {
            let sx = (x0 as f64 + (x as f64 + 0.5) / CROP_SIDE as f64 * w) as usize;
            let sy = (y0 as f64 + (y as f64 + 0.5) / CROP_SIDE as f64 * h) as usize;
            let at = (sy.min(IMG_SIDE - 1) * IMG_SIDE + sx.min(IMG_SIDE - 1)) * 3;
            for c in 0..3 {
                out.push(pixels[at + c] as f64 / 255.0);
            }
        }
    }
    out
}

/// Geometry features for an ordered object pair (i above j?).
pub fn pair_features(a: &ObjectSpec, b: &ObjectSpec) -> Vec<f64> {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let side = IMG_SIDE as f64;
    vec![
        (ay - by) / side,
        (ax - bx) / side,
        (a.bbox[2] - a.bbox[0]) as f64 / side,
        (b.bbox[2] - b.bbox[0]) as f64 / side,
        ay / side,
        by / side,
    ]
}

pub struct ShapeNets {
    pub color: Network<f64>,
    pub shape: Network<f64>,
    pub above: Network<f64>,
}

impl ShapeNets {
    pub fn new(seed: u64) -> Self {
        let mlp = |name: &str, input: usize, hidden: usize, out: usize, salt: u64| {
            Network::new(
                name,
                vec![
                    LayerSpec::Linear { input, output: hidden },
                    LayerSpec::ReLU,
                    LayerSpec::Linear { input: hidden, output: out },
                    LayerSpec::Softmax,
                ],
                seed.wrapping_add(salt),
            )
        };
        ShapeNets {
            color: mlp("color", CROP_DIM, 16, 4, 1),
            shape: mlp("shape", CROP_DIM, 16, 3, 2),
            above: mlp("above", PAIR_DIM, 8, 2, 3),
        }
    }
}

// Output slot layout of the color and shape heads.
const COLOR_RED: usize = 0;
const COLOR_BLUE: usize = 2;
const SHAPE_CIRCLE: usize = 0;

pub fn color_index(c: Color) -> usize {
    match c {
        Color::Red => 0,
        Color::Green => 1,
        Color::Blue => 2,
        Color::Yellow => 3,
    }
}

pub fn shape_index(s: Shape) -> usize {
    match s {
        Shape::Circle => 0,
        Shape::Square => 1,
        Shape::Triangle => 2,
    }
}

/// Programs keyed by object count: facts for each object and ordered pair.
pub fn scene_program(n: usize) -> String {
    let mut src = String::from(
        "rel red(int).\nrel blue(int).\nrel circle(int).\nrel above(int, int).\nrel ans().\n\
         ans() :- red(A), blue(B), circle(B), above(A, B).\n",
    );
    for i in 0..n {
        src.push_str(&format!("nn(red, {i})::red({i}).\n"));
        src.push_str(&format!("nn(blue, {i})::blue({i}).\n"));
        src.push_str(&format!("nn(circle, {i})::circle({i}).\n"));
    }
    let mut pi = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                src.push_str(&format!("nn(above, {pi})::above({i}, {j}).\n"));
                pi += 1;
            }
        }
    }
    src.push_str("query ans().\n");
    src
}

struct SceneEval {
    p_yes: f64,
    /// d p_yes / d head-slot, per (head name, flat index).
    grads: HashMap<(&'static str, usize), f64>,
    color_caches: Vec<(Vec<f64>, ForwardCache<f64>)>,
    shape_caches: Vec<(Vec<f64>, ForwardCache<f64>)>,
    above_caches: Vec<(Vec<f64>, ForwardCache<f64>)>,
    pair_index: Vec<(usize, usize)>,
}

fn eval_scene(
    nets: &ShapeNets,
    programs: &HashMap<usize, ValidatedProgram>,
    spec: &SceneSpec,
    pixels: &[u8],
    semiring: SemiringSpec,
) -> Result<SceneEval, TaskError> {
    let n = spec.objects.len();
    let vp = programs.get(&n).ok_or_else(|| TaskError::Config(format!("no program for {n} objects")))?;

    let mut red = Vec::new();
    let mut blue = Vec::new();
    let mut circle = Vec::new();
    let mut color_caches = Vec::new();
    let mut shape_caches = Vec::new();
    for obj in &spec.objects {
        let crop = crop_object(pixels, &obj.bbox);
        let (pc, cc) = nets.color.forward_cached(&crop)?;
        let (ps, sc) = nets.shape.forward_cached(&crop)?;
        red.push(pc[COLOR_RED]);
        blue.push(pc[COLOR_BLUE]);
        circle.push(ps[SHAPE_CIRCLE]);
        color_caches.push((pc, cc));
        shape_caches.push((ps, sc));
    }
    let mut above = Vec::new();
    let mut above_caches = Vec::new();
    let mut pair_index = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let feats = pair_features(&spec.objects[i], &spec.objects[j]);
                let (pa, ac) = nets.above.forward_cached(&feats)?;
                above.push(pa[1]);
                above_caches.push((pa, ac));
                pair_index.push((i, j));
            }
        }
    }

    let outs: HashMap<String, Vec<f64>> = [
        ("red".to_string(), red),
        ("blue".to_string(), blue),
        ("circle".to_string(), circle),
        ("above".to_string(), above),
    ]
    .into();
    let mut ctx = seed_facts(vp, semiring, &outs)?;
    ctx.evaluate()?;
    let answers = ctx.query("ans")?;

    let mut p_yes = 0.0;
    let mut grads: HashMap<(&'static str, usize), f64> = HashMap::new();
    if let Some(ans) = answers.first() {
        p_yes = ans.prob;
        if let Some(g) = &ans.grad {
            // Fact groups were emitted per object as (red, blue, circle)
            // triples, then the above pairs; map back to head slots.
            for (fid, gv) in &g.grad {
                let (head, idx) = if fid.group < 3 * n {
                    let obj = fid.group / 3;
                    match fid.group % 3 {
                        0 => ("red", obj),
                        1 => ("blue", obj),
                        _ => ("circle", obj),
                    }
                } else {
                    ("above", fid.group - 3 * n)
                };
                *grads.entry((head, idx)).or_insert(0.0) += gv;
            }
        }
    }
    Ok(SceneEval { p_yes, grads, color_caches, shape_caches, above_caches, pair_index })
}

fn load_records(config: &TaskConfig) -> Result<Vec<SceneRecord>, TaskError> {
    let total = config.train_count + config.test_count;
    Ok(match &config.data_dir {
        Some(dir) => {
            let specs = read_annotations(dir)?;
            specs
                .into_iter()
                .map(|spec| {
                    let pixels = render(&spec);
                    SceneRecord { spec, pixels }
                })
                .collect()
        }
        None => gen_shapes(config.seed, total),
    })
}

fn scene_programs() -> Result<HashMap<usize, ValidatedProgram>, TaskError> {
    let mut programs = HashMap::new();
    for n in 3..=5 {
        let prog = parse_source(&scene_program(n))?;
        programs.insert(n, validate(&prog)?);
    }
    Ok(programs)
}

/// Train the perception heads from the yes/no scene answer alone.
pub fn train_shapes(config: &TaskConfig) -> Result<(ShapeNets, Metrics), TaskError> {
    config.validate()?;
    let semiring = SemiringSpec::TopKProofsGrad(Some(config.top_k.unwrap_or(3)));
    let records = load_records(config)?;
    let train: Vec<&SceneRecord> = records.iter().filter(|r| r.spec.split == "train").collect();
    let programs = scene_programs()?;

    let mut nets = ShapeNets::new(config.seed);
    let mut opt_color = Optimizer::new(OptimizerKind::adam(config.learning_rate));
    let mut opt_shape = Optimizer::new(OptimizerKind::adam(config.learning_rate));
    let mut opt_above = Optimizer::new(OptimizerKind::adam(config.learning_rate));

    let train_start = Instant::now();
    let mut seen = 0u64;
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5A5A);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        // The generator emits positives before negatives; mix the classes so
        // no batch is single-label.
        use rand::seq::SliceRandom;
        order.shuffle(&mut order_rng);
        for batch in order.chunks(config.batch_size) {
            for &idx in batch {
                let rec = &train[idx];
                seen += 1;
                let eval = eval_scene(&nets, &programs, &rec.spec, &rec.pixels, semiring)?;
                let (_, dl) = bernoulli_nll(eval.p_yes, rec.spec.label);
                let n = rec.spec.objects.len();
                let mut color_g = vec![vec![0.0; 4]; n];
                let mut shape_g = vec![vec![0.0; 3]; n];
                let mut above_g = vec![vec![0.0; 2]; eval.pair_index.len()];
                for ((head, idx), g) in &eval.grads {
                    match *head {
                        "red" => color_g[*idx][COLOR_RED] += dl * g,
                        "blue" => color_g[*idx][COLOR_BLUE] += dl * g,
                        "circle" => shape_g[*idx][SHAPE_CIRCLE] += dl * g,
                        _ => above_g[*idx][1] += dl * g,
                    }
                }
                for (i, (_, cache)) in eval.color_caches.iter().enumerate() {
                    if color_g[i].iter().any(|&v| v != 0.0) {
                        nets.color.backward_cached(cache, &color_g[i])?;
                    }
                }
                for (i, (_, cache)) in eval.shape_caches.iter().enumerate() {
                    if shape_g[i].iter().any(|&v| v != 0.0) {
                        nets.shape.backward_cached(cache, &shape_g[i])?;
                    }
                }
                for (i, (_, cache)) in eval.above_caches.iter().enumerate() {
                    if above_g[i].iter().any(|&v| v != 0.0) {
                        nets.above.backward_cached(cache, &above_g[i])?;
                    }
                }
            }
            opt_color.step(&mut nets.color);
            opt_shape.step(&mut nets.shape);
            opt_above.step(&mut nets.above);
            nets.color.zero_grads();
            nets.shape.zero_grads();
            nets.above.zero_grads();
        }
    }
    let train_ms = train_start.elapsed().as_secs_f64() * 1000.0 / seen.max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("train_ms_per_sample".into(), train_ms);
    Ok((nets, metrics))
}

/// Evaluate trained heads on the test split.
pub fn eval_shapes(nets: &ShapeNets, config: &TaskConfig) -> Result<Metrics, TaskError> {
    config.validate()?;
    let semiring = SemiringSpec::TopKProofsGrad(Some(config.top_k.unwrap_or(3)));
    let records = load_records(config)?;
    let test: Vec<&SceneRecord> = records.iter().filter(|r| r.spec.split == "test").collect();
    let programs = scene_programs()?;

    let test_start = Instant::now();
    let mut correct = 0usize;
    for rec in &test {
        let eval = eval_scene(nets, &programs, &rec.spec, &rec.pixels, semiring)?;
        if (eval.p_yes > 0.5) == rec.spec.label {
            correct += 1;
        }
    }
    let test_ms = test_start.elapsed().as_secs_f64() * 1000.0 / test.len().max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("answer_accuracy".into(), correct as f64 / test.len().max(1) as f64);
    metrics.insert("test_ms_per_sample".into(), test_ms);
    Ok(metrics)
}

/// Train perception heads from the yes/no answer and report accuracy.
pub fn run_shapes(config: &TaskConfig) -> Result<Metrics, TaskError> {
    let (nets, mut metrics) = train_shapes(config)?;
    metrics.extend(eval_shapes(&nets, config)?);
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_balanced_and_valid() {
        let records = gen_shapes(1, 200);
        assert_eq!(records.len(), 200);
        let mut counts = HashMap::new();
        for r in &records {
            *counts.entry((r.spec.split.clone(), r.spec.label)).or_insert(0usize) += 1;
            assert_eq!(r.spec.holds(), r.spec.label);
            assert!(r.spec.objects.len() >= 3 && r.spec.objects.len() <= 5);
            for (i, a) in r.spec.objects.iter().enumerate() {
                for b in &r.spec.objects[i + 1..] {
                    assert!(!boxes_clash(&a.bbox, &b.bbox));
                }
            }
        }
        assert_eq!(counts[&("train".to_string(), true)], 50);
        assert_eq!(counts[&("train".to_string(), false)], 50);
        assert_eq!(counts[&("test".to_string(), true)], 50);
        assert_eq!(counts[&("test".to_string(), false)], 50);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_shapes(9, 20);
        let b = gen_shapes(9, 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pixels, y.pixels);
            assert_eq!(serde_json::to_string(&x.spec).unwrap(), serde_json::to_string(&y.spec).unwrap());
        }
    }

    #[test]
    fn sidecar_round_trips() {
        let rec = &gen_shapes(2, 4)[0];
        let json = serde_json::to_string(&rec.spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.objects.len(), rec.spec.objects.len());
        assert_eq!(back.label, rec.spec.label);
        assert!(json.contains("\"bbox\""));
    }

    #[test]
    fn perfect_heads_answer_every_scene() {
        let records = gen_shapes(3, 40);
        let mut programs = HashMap::new();
        for n in 3..=5 {
            let prog = parse_source(&scene_program(n)).unwrap();
            programs.insert(n, validate(&prog).unwrap());
        }
        for rec in &records {
            let n = rec.spec.objects.len();
            let mut red = Vec::new();
            let mut blue = Vec::new();
            let mut circle = Vec::new();
            for o in &rec.spec.objects {
                red.push(if o.color == Color::Red { 1.0 } else { 0.0 });
                blue.push(if o.color == Color::Blue { 1.0 } else { 0.0 });
                circle.push(if o.shape == Shape::Circle { 1.0 } else { 0.0 });
            }
            let mut above = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let (ai, bj) = (&rec.spec.objects[i], &rec.spec.objects[j]);
                        above.push(if ai.center().1 < bj.center().1 - ABOVE_MARGIN as f64 {
                            1.0
                        } else {
                            0.0
                        });
                    }
                }
            }
            let outs: HashMap<String, Vec<f64>> = [
                ("red".to_string(), red),
                ("blue".to_string(), blue),
                ("circle".to_string(), circle),
                ("above".to_string(), above),
            ]
            .into();
            let mut ctx = seed_facts(&programs[&n], SemiringSpec::TopKProofs(Some(3)), &outs).unwrap();
            ctx.evaluate().unwrap();
            let p = ctx.query("ans").unwrap().first().map(|a| a.prob).unwrap_or(0.0);
            assert_eq!(p > 0.5, rec.spec.label, "scene {}", rec.spec.id);
        }
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("shapes_test_{}", std::process::id()));
        let files = write_shapes(&dir, 4, 8).unwrap();
        assert_eq!(files.len(), 9);
        let specs = read_annotations(&dir).unwrap();
        assert_eq!(specs.len(), 8);
        let ppm = std::fs::read(dir.join("scene_0000.ppm")).unwrap();
        assert!(ppm.starts_with(b"P6\n128 128\n255\n"));
        assert_eq!(ppm.len(), 15 + IMG_SIDE * IMG_SIDE * 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
