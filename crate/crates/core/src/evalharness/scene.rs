use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Gripper, Views};
use crate::error::{Error, Result};
use crate::imagecore::RgbImage;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    PickBig,
    PickSmall,
    CupStackProxy,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::PickBig, Task::PickSmall, Task::CupStackProxy];

    pub fn name(self) -> &'static str {
        match self {
            Task::PickBig => "PickBig",
            Task::PickSmall => "PickSmall",
            Task::CupStackProxy => "CupStack",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pickbig" | "pick_big" => Ok(Task::PickBig),
            "picksmall" | "pick_small" => Ok(Task::PickSmall),
            "cupstack" | "cup_stack" | "cupstackproxy" => Ok(Task::CupStackProxy),
            _ => Err(Error::InvalidParameter(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSize {
    Big,
    Small,
}

/// Axis-aligned filled rectangle; `x0, y0` is the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
    pub color: [f32; 3],
    pub size: ObjectSize,
}

impl SceneObject {
    pub fn center(&self) -> [f64; 2] {
        [self.x0 as f64 + self.w as f64 / 2.0, self.y0 as f64 + self.h as f64 / 2.0]
    }
}

/// Scene geometry and colour statistics.
///
/// Objects sit in the cells of a coarse grid with ±`jitter` px of positional
/// noise. Backgrounds are bright and vary within a narrow band; objects are
/// only slightly brighter than their background. A matcher comparing raw RGB
/// therefore finds the right layout at the recording exposure, but once an
/// exposure change pushes the background outside the recorded band the
/// brightness offset outweighs the layout cue. The relative-depth channel is
/// scale-free and keeps the layout visible at every exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub cell: usize,
    pub big: usize,
    pub small: usize,
    pub jitter: usize,
    pub background: [f32; 2],
    pub contrast: [f32; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            cell: 16,
            big: 12,
            small: 5,
            jitter: 1,
            background: [0.65, 0.75],
            contrast: [0.08, 0.15],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("scene: {m}")));
        if self.cell == 0 || self.width < self.cell || self.height < self.cell {
            return err(format!("cell {} does not fit {}x{}", self.cell, self.width, self.height));
        }
        if self.cells() < 3 {
            return err("need at least 3 grid cells".into());
        }
        if self.small == 0 || self.small >= self.big || self.big + 2 * self.jitter > self.cell {
            return err(format!(
                "sizes small={} big={} jitter={} must satisfy 0 < small < big and big + 2·jitter ≤ cell",
                self.small, self.big, self.jitter
            ));
        }
        for (name, [lo, hi]) in [("background", self.background), ("contrast", self.contrast)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return err(format!("{name} range [{lo}, {hi}] invalid"));
            }
        }
        Ok(())
    }

    fn grid(&self) -> (usize, usize) {
        (self.width / self.cell, self.height / self.cell)
    }

    fn cells(&self) -> usize {
        let (c, r) = self.grid();
        c * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub task: Task,
    pub width: usize,
    pub height: usize,
    pub background: [f32; 3],
    pub objects: Vec<SceneObject>,
    /// Index into `objects` of the object to pick (for the cup task, the
    /// first one of `sequence`).
    pub target: usize,
    /// Pick order; a single entry for the pick tasks.
    pub sequence: Vec<usize>,
    pub truth: [f64; 2],
    pub gripper: Gripper,
}

impl SyntheticScene {
    /// Front view: the full table.
    pub fn render_front(&self) -> RgbImage {
        let mut img = RgbImage::filled(self.width, self.height, self.background);
        for o in &self.objects {
            for y in o.y0..o.y0 + o.h {
                for x in o.x0..o.x0 + o.w {
                    img.set_pixel(x, y, o.color);
                }
            }
        }
        img
    }

    /// Wrist view: 2× nearest-neighbour zoom on the centre of the table.
    pub fn render_wrist(&self, front: &RgbImage) -> RgbImage {
        let (w, h) = (self.width, self.height);
        let (ox, oy) = (w / 4, h / 4);
        RgbImage::from_fn(w, h, |x, y| front.pixel(ox + x / 2, oy + y / 2))
    }

    pub fn render(&self) -> Views<RgbImage> {
        let front = self.render_front();
        let wrist = self.render_wrist(&front);
        Views::new(front, wrist)
    }
}

/// Deterministic scene for `(task, seed)` with the default geometry.
pub fn generate_scene(task: Task, seed: u64) -> (SyntheticScene, Views<RgbImage>) {
    generate_scene_with(task, seed, &SceneConfig::default()).expect("default scene config is valid")
}

pub fn generate_scene_with(task: Task, seed: u64, cfg: &SceneConfig) -> Result<(SyntheticScene, Views<RgbImage>)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let (cols, _) = cfg.grid();
    let n_obj = if task == Task::CupStackProxy { 3 } else { 2 };
    let cells = rand::seq::index::sample(&mut rng, cfg.cells(), n_obj).into_vec();
    let bg_level = rng.random_range(cfg.background[0]..=cfg.background[1]);
    let background = [bg_level; 3];
    let j = cfg.jitter as i64;
    let place = |cell: usize, side: usize, rng: &mut crate::seed::PipelineRng| -> (usize, usize) {
        let (c, r) = (cell % cols, cell / cols);
        let cx = (c * cfg.cell + cfg.cell / 2) as i64 + if j > 0 { rng.random_range(-j..=j) } else { 0 };
        let cy = (r * cfg.cell + cfg.cell / 2) as i64 + if j > 0 { rng.random_range(-j..=j) } else { 0 };
        let half = (side / 2) as i64;
        ((cx - half) as usize, (cy - half) as usize)
    };
    let mut objects = Vec::with_capacity(n_obj);
    match task {
        Task::PickBig | Task::PickSmall => {
            for (cell, (side, size)) in cells.iter().zip([(cfg.big, ObjectSize::Big), (cfg.small, ObjectSize::Small)]) {
                let color = std::array::from_fn(|_| (bg_level + rng.random_range(cfg.contrast[0]..=cfg.contrast[1])).min(1.0));
                let (x0, y0) = place(*cell, side, &mut rng);
                objects.push(SceneObject {
                    x0,
                    y0,
                    w: side,
                    h: side,
                    color,
                    size,
                });
            }
        }
        Task::CupStackProxy => {
            // Cups are colour-coded red, green, blue and must be picked in that order.
            let side = (cfg.big + cfg.small) / 2;
            for (i, cell) in cells.iter().enumerate() {
                let strong = rng.random_range(cfg.contrast[0]..=cfg.contrast[1]) * 2.0;
                let weak = cfg.contrast[0] * 0.25;
                let color = std::array::from_fn(|ch| (bg_level + if ch == i { strong } else { weak }).min(1.0));
                let (x0, y0) = place(*cell, side, &mut rng);
                objects.push(SceneObject {
                    x0,
                    y0,
                    w: side,
                    h: side,
                    color,
                    size: ObjectSize::Big,
                });
            }
        }
    }
    let (target, sequence) = match task {
        Task::PickBig => (0, vec![0]),
        Task::PickSmall => (1, vec![1]),
        Task::CupStackProxy => (0, vec![0, 1, 2]),
    };
    let scene = SyntheticScene {
        task,
        width: cfg.width,
        height: cfg.height,
        background,
        truth: objects[target].center(),
        objects,
        target,
        sequence,
        gripper: Gripper::Closed,
    };
    let views = scene.render();
    Ok((scene, views))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_in_bounds() {
        for task in Task::ALL {
            for seed in 0..50 {
                let (a, va) = generate_scene(task, seed);
                let (b, vb) = generate_scene(task, seed);
                assert_eq!(a, b);
                assert_eq!(va, vb);
                for o in &a.objects {
                    assert!(o.x0 + o.w <= a.width && o.y0 + o.h <= a.height);
                }
            }
        }
    }

    #[test]
    fn pick_tasks_differ_only_in_target() {
        for seed in 0..20 {
            let (big, vb) = generate_scene(Task::PickBig, seed);
            let (small, vs) = generate_scene(Task::PickSmall, seed);
            assert_eq!(big.objects, small.objects);
            assert_eq!(vb, vs);
            assert_eq!(big.objects[big.target].size, ObjectSize::Big);
            assert_eq!(small.objects[small.target].size, ObjectSize::Small);
            let o = big.objects.iter().max_by_key(|o| o.w * o.h).unwrap();
            assert_eq!(big.truth, o.center());
        }
    }

    #[test]
    fn cup_stack_has_ordered_distinct_cups() {
        let (s, _) = generate_scene(Task::CupStackProxy, 4);
        assert_eq!(s.objects.len(), 3);
        assert_eq!(s.sequence, vec![0, 1, 2]);
        let c = s.objects[0].color;
        assert!(c[0] > c[1] && c[0] > c[2]);
    }

    #[test]
    fn objects_never_overlap() {
        for seed in 0..200 {
            let (s, _) = generate_scene(Task::CupStackProxy, seed);
            for (i, a) in s.objects.iter().enumerate() {
                for b in &s.objects[i + 1..] {
                    let sep = a.x0 + a.w <= b.x0 || b.x0 + b.w <= a.x0 || a.y0 + a.h <= b.y0 || b.y0 + b.h <= a.y0;
                    assert!(sep, "seed {seed}");
                }
            }
        }
    }
}
