//! Static SVG figures: trajectories over the map and speed against track age.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use svg::node::element::{Group, Line, Polygon, Polyline, Text};
use svg::Document;
use thiserror::Error;

use crate::frames::MapPoint;
use crate::io::{read_csv, read_track_log, EgoEstimateRecord, IoError, TrackLogRecord};
use crate::map::DigitalMap;
use crate::stixel::SemanticClass;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("missing log {0}")]
    MissingLog(PathBuf),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Tracks with fewer records than this never got confirmed.
pub const MIN_CONFIRMED_RECORDS: usize = 3;

const PIXELS_PER_METER: f64 = 4.0;
const MARGIN_M: f64 = 30.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

/// One confirmed track: `(timestamp, position, speed)` in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSeries {
    pub track_id: u64,
    pub label: SemanticClass,
    pub samples: Vec<(f64, MapPoint, f64)>,
}

impl TrackSeries {
    /// `(age, speed)` pairs, age counted from the first record.
    pub fn speed_profile(&self) -> Vec<(f64, f64)> {
        let t0 = self.samples.first().map_or(0.0, |s| s.0);
        self.samples.iter().map(|s| (s.0 - t0, s.2)).collect()
    }
}

pub fn confirmed_series(records: &[TrackLogRecord]) -> Vec<TrackSeries> {
    let mut by_id: BTreeMap<u64, TrackSeries> = BTreeMap::new();
    for r in records {
        by_id
            .entry(r.track_id)
            .or_insert_with(|| TrackSeries {
                track_id: r.track_id,
                label: r.label,
                samples: Vec::new(),
            })
            .samples
            .push((r.timestamp, r.position(), r.speed_mps));
    }
    by_id
        .into_values()
        .filter(|s| s.samples.len() >= MIN_CONFIRMED_RECORDS)
        .map(|mut s| {
            s.samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            s
        })
        .collect()
}

fn color(track_id: u64) -> &'static str {
    PALETTE[(track_id % PALETTE.len() as u64) as usize]
}

fn fmt_points(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    points
        .into_iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// East to the right, north up.
fn to_svg(p: &MapPoint) -> (f64, f64) {
    (p.east * PIXELS_PER_METER, -p.north * PIXELS_PER_METER)
}

fn bounds<'a>(points: impl IntoIterator<Item = &'a MapPoint>) -> Option<(MapPoint, MapPoint)> {
    points.into_iter().fold(None, |acc, p| {
        let (lo, hi) = acc.unwrap_or((*p, *p));
        Some((
            MapPoint::new(lo.north.min(p.north), lo.east.min(p.east)),
            MapPoint::new(hi.north.max(p.north), hi.east.max(p.east)),
        ))
    })
}

/// Lanes, buildings, the ego path in black and one polyline per confirmed track.
pub fn map_overlay(
    map: &DigitalMap,
    tracks: &[TrackLogRecord],
    ego: &[EgoEstimateRecord],
) -> Document {
    let series = confirmed_series(tracks);
    let ego_path: Vec<MapPoint> = ego.iter().map(|e| MapPoint::new(e.north, e.east)).collect();
    let focus = bounds(
        ego_path
            .iter()
            .chain(series.iter().flat_map(|s| s.samples.iter().map(|x| &x.1))),
    );
    let (lo, hi) = match focus {
        Some((lo, hi)) => (
            MapPoint::new(lo.north - MARGIN_M, lo.east - MARGIN_M),
            MapPoint::new(hi.north + MARGIN_M, hi.east + MARGIN_M),
        ),
        None => bounds(map.lanes.iter().flat_map(|l| l.centerline.iter())).unwrap_or_default(),
    };
    let (x0, y0) = to_svg(&MapPoint::new(hi.north, lo.east));
    let w = (hi.east - lo.east) * PIXELS_PER_METER;
    let h = (hi.north - lo.north) * PIXELS_PER_METER;

    let mut base = Group::new().set("class", "map");
    base = base.add(
        Polygon::new()
            .set("class", "intersection")
            .set("points", fmt_points(map.intersection.iter().map(to_svg)))
            .set("fill", "#d9d9d9"),
    );
    for lane in &map.lanes {
        let pts = fmt_points(lane.centerline.iter().map(to_svg));
        base = base
            .add(
                Polyline::new()
                    .set("class", "lane")
                    .set("data-lane", lane.id)
                    .set("points", pts.clone())
                    .set("fill", "none")
                    .set("stroke", "#d9d9d9")
                    .set("stroke-width", lane.width * PIXELS_PER_METER),
            )
            .add(
                Polyline::new()
                    .set("class", "lane-center")
                    .set("points", pts)
                    .set("fill", "none")
                    .set("stroke", "#ffffff")
                    .set("stroke-width", 1)
                    .set("stroke-dasharray", "6 6"),
            );
    }
    for b in &map.buildings {
        base = base.add(
            Polygon::new()
                .set("class", "building")
                .set("points", fmt_points(b.iter().map(to_svg)))
                .set("fill", "#c8b89a")
                .set("stroke", "#8c7b5f"),
        );
    }

    let mut doc = Document::new()
        .set("viewBox", (x0, y0, w, h))
        .set("width", w)
        .set("height", h)
        .add(base);
    if !ego_path.is_empty() {
        doc = doc.add(
            Polyline::new()
                .set("class", "ego")
                .set("points", fmt_points(ego_path.iter().map(to_svg)))
                .set("fill", "none")
                .set("stroke", "#000000")
                .set("stroke-width", 3),
        );
    }
    for s in &series {
        doc = doc.add(
            Polyline::new()
                .set("class", format!("track {}", s.label))
                .set("data-track", s.track_id)
                .set("points", fmt_points(s.samples.iter().map(|x| to_svg(&x.1))))
                .set("fill", "none")
                .set("stroke", color(s.track_id))
                .set("stroke-width", 2),
        );
    }
    doc
}

/// Speed of each confirmed track against its age.
pub fn velocity_plot(tracks: &[TrackLogRecord]) -> Document {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let series = confirmed_series(tracks);
    let profiles: Vec<Vec<(f64, f64)>> = series.iter().map(|s| s.speed_profile()).collect();
    let max_age = profiles.iter().flatten().map(|p| p.0).fold(1.0, f64::max);
    let max_speed = (profiles.iter().flatten().map(|p| p.1).fold(1.0, f64::max) / 5.0).ceil() * 5.0;
    let sx = |age: f64| PAD + age / max_age * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v / max_speed * (H - 2.0 * PAD);

    let mut axes = Group::new()
        .set("class", "axes")
        .set("stroke", "#000000")
        .add(
            Line::new()
                .set("x1", PAD)
                .set("y1", H - PAD)
                .set("x2", W - PAD)
                .set("y2", H - PAD),
        )
        .add(
            Line::new()
                .set("x1", PAD)
                .set("y1", PAD)
                .set("x2", PAD)
                .set("y2", H - PAD),
        );
    for k in 0..=5 {
        let v = max_speed * k as f64 / 5.0;
        let a = max_age * k as f64 / 5.0;
        axes = axes
            .add(
                Text::new(format!("{v:.0}"))
                    .set("x", PAD - 8.0)
                    .set("y", sy(v) + 4.0)
                    .set("text-anchor", "end"),
            )
            .add(
                Text::new(format!("{a:.1}"))
                    .set("x", sx(a))
                    .set("y", H - PAD + 16.0)
                    .set("text-anchor", "middle"),
            );
    }
    axes = axes
        .add(
            Text::new("trajectory age [s]")
                .set("x", W / 2.0)
                .set("y", H - 10.0)
                .set("text-anchor", "middle"),
        )
        .add(
            Text::new("speed [m/s]")
                .set("x", 14.0)
                .set("y", H / 2.0)
                .set("transform", format!("rotate(-90 14 {})", H / 2.0))
                .set("text-anchor", "middle"),
        );

    let mut doc = Document::new()
        .set("viewBox", (0, 0, W, H))
        .set("width", W)
        .set("height", H)
        .set("font-family", "sans-serif")
        .set("font-size", 11)
        .add(axes);
    for (s, p) in series.iter().zip(&profiles) {
        doc = doc.add(
            Polyline::new()
                .set("class", format!("track {}", s.label))
                .set("data-track", s.track_id)
                .set("points", fmt_points(p.iter().map(|&(a, v)| (sx(a), sy(v)))))
                .set("fill", "none")
                .set("stroke", color(s.track_id))
                .set("stroke-width", 1.5),
        );
    }
    doc
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub map_overlay: PathBuf,
    pub velocity: PathBuf,
}

/// Reads a track log and ego estimate and writes `trajectories.svg` and
/// `velocity.svg` into `out`.
pub fn emit_plots(
    tracks: &Path,
    ego: &Path,
    map: &DigitalMap,
    out: &Path,
) -> Result<PlotFiles, PlotError> {
    for p in [tracks, ego] {
        if !p.exists() {
            return Err(PlotError::MissingLog(p.to_path_buf()));
        }
    }
    let records = read_track_log(tracks)?;
    let ego: Vec<EgoEstimateRecord> = read_csv(ego)?;
    let files = PlotFiles {
        map_overlay: out.join("trajectories.svg"),
        velocity: out.join("velocity.svg"),
    };
    let save = |path: &Path, doc: &Document| {
        svg::save(path, doc).map_err(|source| PlotError::Write {
            path: path.to_path_buf(),
            source,
        })
    };
    save(&files.map_overlay, &map_overlay(map, &records, &ego))?;
    save(&files.velocity, &velocity_plot(&records))?;
    Ok(files)
}
