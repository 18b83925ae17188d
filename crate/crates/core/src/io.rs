//! Artifact formats: run configs (TOML), repertoires (JSON lines), metric
//! series (CSV), replay traces (CSV) and SVG frames.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::GenerationLog;
use crate::env::kinematics::chain_points;
use crate::env::{gripper_segments, rollout, EnvConfig, Shape};
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::model::{Genome, Individual, RunConfig, SuccessArchive, Trajectory, Vec2};

pub const REPERTOIRE_FORMAT: &str = "e2r-repertoire";
pub const REPERTOIRE_VERSION: u32 = 1;

/// Column names of the metrics table, in file order.
pub const METRICS_HEADER: [&str; 7] = [
    "generation",
    "rollouts",
    "successes_total",
    "archive_size",
    "approach_coverage",
    "grasp_coverage",
    "wall_time_s",
];

/// SHA-256 (hex) of the environment configuration's canonical JSON form.
pub fn config_hash(env: &EnvConfig) -> String {
    let json = serde_json::to_vec(env).expect("environment config serializes");
    hex::encode(Sha256::digest(&json))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })
}

pub fn config_to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run config serializes to TOML")
}

pub fn save_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(config_to_toml(cfg).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// First line of a repertoire file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepertoireHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub env: EnvConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl RepertoireHeader {
    pub fn new(env: &EnvConfig, metrics: &MetricsConfig) -> Self {
        RepertoireHeader {
            format: REPERTOIRE_FORMAT.to_string(),
            version: REPERTOIRE_VERSION,
            config_hash: config_hash(env),
            env: env.clone(),
            metrics: metrics.clone(),
        }
    }

    /// Fails unless `env` hashes to the value recorded in the file.
    pub fn check_env(&self, env: &EnvConfig) -> Result<()> {
        let actual = config_hash(env);
        if actual == self.config_hash {
            Ok(())
        } else {
            Err(Error::ConfigHashMismatch {
                expected: self.config_hash.clone(),
                actual,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Repertoire {
    pub header: RepertoireHeader,
    pub archive: SuccessArchive,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    #[serde(flatten)]
    individual: &'a Individual,
    eligible: [bool; 5],
}

#[derive(Deserialize)]
struct RecordIn {
    #[serde(flatten)]
    individual: Individual,
    eligible: [bool; 5],
}

pub fn write_repertoire(
    archive: &SuccessArchive,
    env: &EnvConfig,
    metrics: &MetricsConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut emit = |line: String| -> Result<()> {
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    emit(serde_json::to_string(&RepertoireHeader::new(env, metrics)).expect("header serializes"))?;
    for ind in archive.entries() {
        let rec = RecordOut {
            individual: ind,
            eligible: ind.descriptor.eligibility(),
        };
        emit(serde_json::to_string(&rec).expect("record serializes"))?;
    }
    finish(w, path)
}

pub fn read_repertoire(path: impl AsRef<Path>) -> Result<Repertoire> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line".to_string()))?
        .map_err(|e| Error::io(path, e))?;
    let probe: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
    if probe.get("format").and_then(|f| f.as_str()) != Some(REPERTOIRE_FORMAT) {
        return Err(parse_err(1, format!("not an {REPERTOIRE_FORMAT} file")));
    }
    let found = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != REPERTOIRE_VERSION {
        return Err(Error::IncompatibleVersion {
            path: path.to_path_buf(),
            found,
            supported: REPERTOIRE_VERSION,
        });
    }
    let header: RepertoireHeader =
        serde_json::from_value(probe).map_err(|e| parse_err(1, e.to_string()))?;

    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        if rec.eligible != rec.individual.descriptor.eligibility() {
            return Err(parse_err(n, "eligibility flags disagree with the descriptor".to_string()));
        }
        if rec.individual.genome.joints() != header.env.joints() {
            return Err(parse_err(
                n,
                format!("genome has {} genes for a {}-joint arm", rec.individual.genome.len(), header.env.joints()),
            ));
        }
        entries.push(rec.individual);
    }
    Ok(Repertoire {
        header,
        archive: entries.into_iter().collect(),
    })
}

/// One row of the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub generation: usize,
    pub rollouts: usize,
    pub successes_total: usize,
    pub archive_size: usize,
    pub approach_coverage: f64,
    pub grasp_coverage: f64,
    pub wall_time_s: f64,
}

impl From<&GenerationLog> for MetricsRow {
    fn from(l: &GenerationLog) -> Self {
        MetricsRow {
            generation: l.generation,
            rollouts: l.rollouts,
            successes_total: l.successes_total,
            archive_size: l.archive_size,
            approach_coverage: l.approach_coverage,
            grasp_coverage: l.grasp_coverage,
            wall_time_s: l.wall_time_s,
        }
    }
}

pub fn write_metrics(logs: &[GenerationLog], path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<MetricsRow> = logs.iter().map(MetricsRow::from).collect();
    write_metric_rows(&rows, path)
}

pub fn write_metric_rows(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = r.headers().map_err(|e| Error::io(path, e.into()))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Where and how often to render SVG snapshots during a replay.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgFrames {
    pub dir: PathBuf,
    pub stride: usize,
}

/// Event labels for step `t`, `;`-separated.
pub fn step_events(traj: &Trajectory, t: usize) -> String {
    let marks = [
        (traj.t_touch, "touch"),
        (Some(traj.t_close).filter(|&c| c < traj.len()), "close"),
        (traj.closure_end, "closure_end"),
        (traj.grasp_established_at, "grasp"),
    ];
    marks
        .iter()
        .filter(|(at, _)| *at == Some(t))
        .map(|(_, name)| *name)
        .collect::<Vec<_>>()
        .join(";")
}

/// Re-runs `genome`, writes the per-step trace to `path` and, if asked,
/// SVG frames. Returns the replayed trajectory.
pub fn replay_trace(
    genome: &Genome,
    env: &EnvConfig,
    path: impl AsRef<Path>,
    frames: Option<&SvgFrames>,
) -> Result<Trajectory> {
    let path = path.as_ref();
    let traj = rollout(genome, env);
    write_trace(&traj, env.joints(), path)?;
    if let Some(f) = frames {
        write_frames(&traj, env, f)?;
    }
    Ok(traj)
}

pub fn write_trace(traj: &Trajectory, joints: usize, path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::WriterBuilder::new().from_writer(create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend((0..joints).map(|j| format!("q{j}")));
    header.extend(
        ["ee_x", "ee_y", "ee_theta", "width", "object_x", "object_y", "object_theta", "phase", "events"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for s in &traj.steps {
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.joints.iter().map(|q| q.to_string()));
        rec.extend([
            s.ee.position.x,
            s.ee.position.y,
            s.ee.orientation,
            s.gripper_width,
            s.object.position.x,
            s.object.position.y,
            s.object.orientation,
        ]
        .map(|v| v.to_string()));
        rec.push(s.phase.as_str().to_string());
        rec.push(step_events(traj, s.t));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Canvas {
    min: Vec2,
    max: Vec2,
    scale: f64,
}

impl Canvas {
    fn for_env(env: &EnvConfig) -> Self {
        let r = env.reach() + 0.05;
        let b = env.base();
        Canvas {
            min: Vec2::new(b.x - r, (b.y - r).min(-0.05)),
            max: Vec2::new(b.x + r, b.y + r),
            scale: 400.0,
        }
    }

    fn size(&self) -> (f64, f64) {
        let d = (self.max - self.min) * self.scale;
        (d.x, d.y)
    }

    fn px(&self, p: Vec2) -> (f64, f64) {
        (
            (p.x - self.min.x) * self.scale,
            (self.max.y - p.y) * self.scale,
        )
    }

    fn points(&self, pts: &[Vec2]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Renders step `t` of `traj` as a standalone SVG document.
pub fn render_frame(traj: &Trajectory, env: &EnvConfig, t: usize) -> String {
    let c = Canvas::for_env(env);
    let (w, h) = c.size();
    let step = &traj.steps[t];
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (_, ty) = c.px(Vec2::new(0.0, 0.0));
    let _ = writeln!(
        svg,
        r##"<line x1="0" y1="{ty:.2}" x2="{w:.2}" y2="{ty:.2}" stroke="#8b5a2b" stroke-width="3"/>"##
    );

    let obj = step.object;
    match env.object.shape {
        Shape::Circle { radius } => {
            let (cx, cy) = c.px(obj.position);
            let _ = writeln!(
                svg,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#4a90d9" stroke="#1f4e79"/>"##,
                radius * c.scale
            );
        }
        Shape::Box { half_extents: [hx, hy] } => {
            let corners: Vec<Vec2> = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
                .iter()
                .map(|&(x, y)| obj.transform_point(Vec2::new(x, y)))
                .collect();
            let _ = writeln!(
                svg,
                r##"<polygon points="{}" fill="#4a90d9" stroke="#1f4e79"/>"##,
                c.points(&corners)
            );
        }
    }

    let n = traj.len().max(2) - 1;
    for pair in traj.steps[..=t].windows(2) {
        let (x1, y1) = c.px(pair[0].ee.position);
        let (x2, y2) = c.px(pair[1].ee.position);
        let hue = 240.0 - 240.0 * pair[1].t as f64 / n as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="hsl({hue:.0},80%,45%)" stroke-width="2"/>"#
        );
    }

    let chain = chain_points(env.base(), &env.link_lengths, &step.joints);
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#555" stroke-width="6" stroke-linecap="round"/>"##,
        c.points(&chain)
    );
    for seg in gripper_segments(&step.ee, step.gripper_width, &env.gripper) {
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#222" stroke-width="3"/>"##,
            c.points(&[seg.a, seg.b])
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="8" y="20" font-family="monospace" font-size="14">t={t} {}</text>"#,
        step.phase.as_str()
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes `frame_NNNN.svg` every `stride` steps and at the final step.
pub fn write_frames(traj: &Trajectory, env: &EnvConfig, frames: &SvgFrames) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&frames.dir).map_err(|e| Error::io(&frames.dir, e))?;
    let stride = frames.stride.max(1);
    let mut ts: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if let Some(last) = traj.len().checked_sub(1) {
        if ts.last() != Some(&last) {
            ts.push(last);
        }
    }
    ts.into_iter()
        .map(|t| {
            let path = frames.dir.join(format!("frame_{t:04}.svg"));
            fs::write(&path, render_frame(traj, env, t)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
