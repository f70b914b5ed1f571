//! Deterministic synthetic crowd scenes with ground-truth labels.
//!
//! Agents are noisy discs drifting over a static textured backdrop. During
//! the anomaly span each agent switches to its anomalous schedule. Agents
//! bounce off the frame edges so the crowd stays in view.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::framesource::{pgm, LabelSpan, LabelTrack, Manifest, SpanClass};
use crate::grid::Grid;

/// How an agent moves during one phase of the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Constant velocity in px/frame.
    Constant { vx: f64, vy: f64 },
    /// Straight away from the frame centre at `speed` px/frame, heading fixed
    /// when the phase begins.
    Radial { speed: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub start: (f64, f64),
    pub radius: f64,
    /// Base intensity; per-pixel texture is added around it.
    pub intensity: u8,
    pub normal: Motion,
    pub anomalous: Motion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub agents: Vec<Agent>,
    /// Inclusive frame range using the anomalous schedules.
    pub anomaly_span: Option<(usize, usize)>,
    /// Seeds backdrop and agent textures.
    pub seed: u64,
}

/// Peak-to-peak half amplitude of the agent texture.
pub const AGENT_NOISE: i32 = 10;
const PRESET_SIZE: (usize, usize) = (320, 240);
const PRESET_FRAMES: usize = 300;
const LAYOUT_SEED: u64 = 0x5eed_c0de;

impl SceneScript {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 || self.n_frames == 0 {
            return Err(Error::param("scene must be at least 16x16 with one frame"));
        }
        if let Some((a, b)) = self.anomaly_span {
            if a > b || b >= self.n_frames {
                return Err(Error::param(format!(
                    "anomaly span {a}..{b} outside 0..{}",
                    self.n_frames
                )));
            }
        }
        if self.agents.iter().any(|a| !(a.radius > 0.0)) {
            return Err(Error::param("agent radius must be positive"));
        }
        Ok(())
    }

    pub fn labels(&self) -> LabelTrack {
        let last = self.n_frames - 1;
        let mut spans = Vec::new();
        match self.anomaly_span {
            None => spans.push((0, last, SpanClass::Normal)),
            Some((a, b)) => {
                if a > 0 {
                    spans.push((0, a - 1, SpanClass::Normal));
                }
                spans.push((a, b, SpanClass::Abnormal));
                if b < last {
                    spans.push((b + 1, last, SpanClass::Normal));
                }
            }
        }
        LabelTrack::new(
            spans
                .into_iter()
                .map(|(start, end, class)| LabelSpan { start, end, class })
                .collect(),
        )
        .expect("spans are ordered by construction")
    }

    fn is_anomalous(&self, frame: usize) -> bool {
        self.anomaly_span
            .is_some_and(|(a, b)| (a..=b).contains(&frame))
    }

    /// Agent centres for every frame, `[frame][agent]`.
    pub fn trajectories(&self) -> Vec<Vec<(f64, f64)>> {
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let mut pos: Vec<(f64, f64)> = self.agents.iter().map(|a| a.start).collect();
        let mut vel: Vec<(f64, f64)> = self
            .agents
            .iter()
            .zip(&pos)
            .map(|(a, &p)| velocity_for(a.normal, p, (cx, cy)))
            .collect();
        let mut out = Vec::with_capacity(self.n_frames);
        out.push(pos.clone());
        for t in 1..self.n_frames {
            let switched = self.is_anomalous(t) != self.is_anomalous(t - 1);
            for (i, agent) in self.agents.iter().enumerate() {
                if switched {
                    let motion = if self.is_anomalous(t) { agent.anomalous } else { agent.normal };
                    vel[i] = velocity_for(motion, pos[i], (cx, cy));
                }
                let (mut x, mut y) = (pos[i].0 + vel[i].0, pos[i].1 + vel[i].1);
                let r = agent.radius;
                reflect(&mut x, &mut vel[i].0, r, self.width as f64 - 1.0 - r);
                reflect(&mut y, &mut vel[i].1, r, self.height as f64 - 1.0 - r);
                pos[i] = (x, y);
            }
            out.push(pos.clone());
        }
        out
    }
}

fn velocity_for(motion: Motion, pos: (f64, f64), centre: (f64, f64)) -> (f64, f64) {
    match motion {
        Motion::Constant { vx, vy } => (vx, vy),
        Motion::Radial { speed } => {
            let (dx, dy) = (pos.0 - centre.0, pos.1 - centre.1);
            let len = dx.hypot(dy);
            if len < 1e-9 {
                (speed, 0.0)
            } else {
                (speed * dx / len, speed * dy / len)
            }
        }
    }
}

fn reflect(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    if hi <= lo {
        return;
    }
    if *p < lo {
        *p = 2.0 * lo - *p;
        *v = v.abs();
    } else if *p > hi {
        *p = 2.0 * hi - *p;
        *v = -v.abs();
    }
    *p = p.clamp(lo, hi);
}

/// Smooth static backdrop: a bilinearly upsampled coarse random lattice in
/// 90–160 plus ±2 levels of fixed fine grain.
fn backdrop(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Grid<u8> {
    const CELL: usize = 40;
    let gw = width / CELL + 2;
    let gh = height / CELL + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(90.0..160.0)).collect();
    Grid::from_fn(width, height, |x, y| {
        let fx = x as f64 / CELL as f64;
        let fy = y as f64 / CELL as f64;
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
        let at = |i: usize, j: usize| lattice[j * gw + i];
        let top = at(x0, y0) * (1.0 - ax) + at(x0 + 1, y0) * ax;
        let bottom = at(x0, y0 + 1) * (1.0 - ax) + at(x0 + 1, y0 + 1) * ax;
        let grain = rng.gen_range(-2..=2) as f64;
        (top * (1.0 - ay) + bottom * ay + grain).round().clamp(0.0, 255.0) as u8
    })
}

fn agent_texture(agent: &Agent, rng: &mut ChaCha8Rng) -> Grid<u8> {
    let side = 2 * agent.radius.ceil() as usize + 1;
    Grid::from_fn(side, side, |_, _| {
        (agent.intensity as i32 + rng.gen_range(-AGENT_NOISE..=AGENT_NOISE)).clamp(0, 255) as u8
    })
}

/// Renders every frame in memory.
pub fn render_frames(script: &SceneScript) -> Result<Vec<Grid<u8>>> {
    script.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let bg = backdrop(script.width, script.height, &mut rng);
    let textures: Vec<Grid<u8>> = script.agents.iter().map(|a| agent_texture(a, &mut rng)).collect();
    let tracks = script.trajectories();
    Ok(tracks
        .iter()
        .map(|centres| {
            let mut frame = bg.clone();
            for ((agent, tex), &(cx, cy)) in script.agents.iter().zip(&textures).zip(centres) {
                stamp(&mut frame, agent, tex, cx, cy);
            }
            frame
        })
        .collect())
}

fn stamp(frame: &mut Grid<u8>, agent: &Agent, tex: &Grid<u8>, cx: f64, cy: f64) {
    let r = agent.radius;
    let half = r.ceil() as isize;
    let r2 = r * r;
    let (x_lo, x_hi) = ((cx - r).floor().max(0.0) as isize, (cx + r).ceil() as isize);
    let (y_lo, y_hi) = ((cy - r).floor().max(0.0) as isize, (cy + r).ceil() as isize);
    for y in y_lo..=y_hi.min(frame.height() as isize - 1) {
        for x in x_lo..=x_hi.min(frame.width() as isize - 1) {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let tx = (dx.round() as isize + half).clamp(0, tex.width() as isize - 1);
            let ty = (dy.round() as isize + half).clamp(0, tex.height() as isize - 1);
            frame.set(x as usize, y as usize, tex.get(tx as usize, ty as usize));
        }
    }
}

/// Output of [`render`].
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub manifest_path: PathBuf,
    pub frame_paths: Vec<PathBuf>,
    pub labels: LabelTrack,
}

pub const MANIFEST_NAME: &str = "scene.manifest";

/// Writes `frame_NNNN.pgm` files and a manifest carrying the script's
/// label spans into `out_dir`.
pub fn render(script: &SceneScript, out_dir: &Path) -> Result<RenderedScene> {
    let frames = render_frames(script)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut frame_paths = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let path = out_dir.join(format!("frame_{i:04}.pgm"));
        pgm::write(&path, frame)?;
        frame_paths.push(path);
    }
    let labels = script.labels();
    let manifest = Manifest {
        frames: vec!["frame_*.pgm".into()],
        fps: Some(25),
        labels: labels.clone(),
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest.to_string()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(RenderedScene {
        manifest_path,
        frame_paths,
        labels,
    })
}

pub const PRESETS: [&str; 3] = ["walk", "dispersal", "counterflow"];

/// Built-in scenes, all 320×240 and 300 frames.
///
/// * `walk`: ten agents at 1 px/frame in assorted directions, all normal.
/// * `dispersal`: `walk`, then frames 200–299 run radially outward from the
///   centre at 4 px/frame.
/// * `counterflow`: six agents heading right above six heading left,
///   1 px/frame, all normal.
pub fn preset(name: &str) -> Result<SceneScript> {
    let (width, height) = PRESET_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(LAYOUT_SEED);
    let mut agent = |y_lo: f64, y_hi: f64, normal: Motion, anomalous: Motion| Agent {
        radius: rng.gen_range(8.0..=12.0),
        start: (rng.gen_range(30.0..width as f64 - 30.0), rng.gen_range(y_lo..y_hi)),
        intensity: if rng.gen_bool(0.5) {
            rng.gen_range(15..=45)
        } else {
            rng.gen_range(210..=240)
        },
        normal,
        anomalous,
    };
    let h = height as f64;
    let (agents, anomaly_span) = match name {
        "walk" | "dispersal" => {
            let agents: Vec<Agent> = (0..10)
                .map(|k| {
                    let heading = std::f64::consts::TAU * (k as f64 + 0.5) / 10.0;
                    agent(
                        30.0,
                        h - 30.0,
                        Motion::Constant { vx: heading.cos(), vy: heading.sin() },
                        Motion::Radial { speed: 4.0 },
                    )
                })
                .collect();
            let span = (name == "dispersal").then_some((200, 299));
            (agents, span)
        }
        "counterflow" => {
            let mut agents = Vec::new();
            for _ in 0..6 {
                let m = Motion::Constant { vx: 1.0, vy: 0.0 };
                agents.push(agent(25.0, h / 2.0 - 15.0, m, m));
            }
            for _ in 0..6 {
                let m = Motion::Constant { vx: -1.0, vy: 0.0 };
                agents.push(agent(h / 2.0 + 15.0, h - 25.0, m, m));
            }
            (agents, None)
        }
        other => {
            return Err(Error::param(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(SceneScript {
        width,
        height,
        n_frames: PRESET_FRAMES,
        agents,
        anomaly_span,
        seed: 0,
    })
}
