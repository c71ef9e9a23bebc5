use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::tracking::Hit;

/// A row of a TrackML hits file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHit {
    pub hit_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub volume_id: u32,
    pub layer_id: u32,
    pub module_id: u32,
}

/// Barrel `(volume_id, layer_id)` pairs in global layer order, innermost
/// first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarrelLayout {
    pub layers: Vec<(u32, u32)>,
}

impl Default for BarrelLayout {
    /// Pixel, short-strip and long-strip barrels of the TrackML detector.
    fn default() -> Self {
        let mut layers = Vec::new();
        for (volume, ids) in [(8, &[2, 4, 6, 8][..]), (13, &[2, 4, 6, 8]), (17, &[2, 4])] {
            layers.extend(ids.iter().map(|&l| (volume, l)));
        }
        Self { layers }
    }
}

impl BarrelLayout {
    pub fn layer_index(&self, volume_id: u32, layer_id: u32) -> Option<u8> {
        self.layers
            .iter()
            .position(|&v| v == (volume_id, layer_id))
            .map(|k| k as u8)
    }

    pub fn ids(&self, layer_index: u8) -> Option<(u32, u32)> {
        self.layers.get(layer_index as usize).copied()
    }

    /// Rows on a barrel layer.
    pub fn filter(&self, rows: &[RawHit]) -> Vec<RawHit> {
        rows.iter()
            .filter(|r| self.layer_index(r.volume_id, r.layer_id).is_some())
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    pub source: Option<String>,
    /// Rows read before filtering.
    pub rows_read: usize,
    /// Hits kept.
    pub hits: usize,
    pub particles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBundle {
    pub event_id: String,
    /// Sorted by hit id.
    pub hits: Vec<Hit>,
    /// hit id → particle id, noise excluded.
    pub truth: BTreeMap<u64, u64>,
    pub meta: EventMeta,
}

impl EventBundle {
    pub fn new(event_id: impl Into<String>, mut hits: Vec<Hit>, source: Option<String>, rows_read: usize) -> Self {
        hits.sort_by_key(|h| h.hit_id);
        let truth: BTreeMap<u64, u64> = hits
            .iter()
            .filter_map(|h| h.truth_particle_id.map(|p| (h.hit_id, p)))
            .collect();
        let mut particles: Vec<u64> = truth.values().copied().collect();
        particles.sort_unstable();
        particles.dedup();
        let meta = EventMeta {
            source,
            rows_read,
            hits: hits.len(),
            particles: particles.len(),
        };
        Self {
            event_id: event_id.into(),
            hits,
            truth,
            meta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

struct Table {
    path: String,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::format(path, format!("{other:?}")),
            })?;
        let headers = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
        let columns = headers.iter().enumerate().map(|(k, h)| (h.to_string(), k)).collect();
        let rows = rdr
            .records()
            .enumerate()
            .map(|(k, r)| {
                r.map_err(|e| Error::Parse {
                    path: name.clone(),
                    row: k as u64 + 1,
                    column: String::new(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { path: name, columns, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns.get(name).copied().ok_or_else(|| Error::Format {
            path: self.path.clone(),
            message: format!("missing column '{name}'"),
        })
    }

    fn parse<T: std::str::FromStr>(&self, row: usize, col: usize, name: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let field = self.rows[row].get(col).unwrap_or("");
        field.parse().map_err(|e: T::Err| Error::Parse {
            path: self.path.clone(),
            row: row as u64 + 1,
            column: name.to_string(),
            message: format!("cannot parse '{field}': {e}"),
        })
    }
}

fn read_hits(path: &Path) -> Result<Vec<RawHit>> {
    let t = Table::read(path)?;
    let col = |name| t.column(name);
    let (c_id, c_x, c_y, c_z) = (col("hit_id")?, col("x")?, col("y")?, col("z")?);
    let (c_vol, c_lay, c_mod) = (col("volume_id")?, col("layer_id")?, col("module_id")?);
    (0..t.rows.len())
        .map(|r| {
            let coord = |c, name| -> Result<f64> {
                let v: f64 = t.parse(r, c, name)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        path: t.path.clone(),
                        row: r as u64 + 1,
                        column: name.into(),
                        message: "coordinate is not finite".into(),
                    })
                }
            };
            Ok(RawHit {
                hit_id: t.parse(r, c_id, "hit_id")?,
                x: coord(c_x, "x")?,
                y: coord(c_y, "y")?,
                z: coord(c_z, "z")?,
                volume_id: t.parse(r, c_vol, "volume_id")?,
                layer_id: t.parse(r, c_lay, "layer_id")?,
                module_id: t.parse(r, c_mod, "module_id")?,
            })
        })
        .collect()
}

fn read_truth(path: &Path) -> Result<HashMap<u64, u64>> {
    let t = Table::read(path)?;
    let (c_id, c_p) = (t.column("hit_id")?, t.column("particle_id")?);
    let mut out = HashMap::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let id: u64 = t.parse(r, c_id, "hit_id")?;
        let particle: u64 = t.parse(r, c_p, "particle_id")?;
        if particle != 0 {
            out.insert(id, particle);
        }
    }
    Ok(out)
}

/// Reads a TrackML hits file and, optionally, its truth file.
///
/// With `barrel_only`, rows outside the layout's barrel layers are dropped;
/// without it, such rows are an error since they have no barrel layer index.
/// Particle id 0 marks noise.
pub fn load_trackml_event(
    hits_path: &Path,
    truth_path: Option<&Path>,
    layout: &BarrelLayout,
    barrel_only: bool,
) -> Result<EventBundle> {
    let raw = read_hits(hits_path)?;
    let rows_read = raw.len();
    let truth = truth_path.map(read_truth).transpose()?.unwrap_or_default();

    let mut seen = HashMap::with_capacity(raw.len());
    let mut hits = Vec::with_capacity(raw.len());
    for (k, r) in raw.iter().enumerate() {
        if let Some(prev) = seen.insert(r.hit_id, k) {
            return Err(Error::Parse {
                path: hits_path.display().to_string(),
                row: k as u64 + 1,
                column: "hit_id".into(),
                message: format!("hit id {} already used on row {}", r.hit_id, prev + 1),
            });
        }
        let layer_index = match layout.layer_index(r.volume_id, r.layer_id) {
            Some(l) => l,
            None if barrel_only => continue,
            None => {
                return Err(Error::Parse {
                    path: hits_path.display().to_string(),
                    row: k as u64 + 1,
                    column: "volume_id".into(),
                    message: format!(
                        "volume {} layer {} is not a barrel layer; enable the barrel filter to drop it",
                        r.volume_id, r.layer_id
                    ),
                })
            }
        };
        hits.push(Hit {
            hit_id: r.hit_id,
            x: r.x,
            y: r.y,
            z: r.z,
            layer_index,
            truth_particle_id: truth.get(&r.hit_id).copied(),
        });
    }
    let event_id = hits_path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.trim_end_matches(".csv").trim_end_matches("-hits").to_string())
        .unwrap_or_default();
    Ok(EventBundle::new(
        event_id,
        hits,
        Some(hits_path.display().to_string()),
        rows_read,
    ))
}

/// Writes an event as TrackML hits and truth files.
pub fn write_trackml_event(event: &EventBundle, layout: &BarrelLayout, hits_path: &Path, truth_path: &Path) -> Result<()> {
    // Header row comes from the RawHit field names.
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in &event.hits {
        let (volume_id, layer_id) = layout.ids(h.layer_index).ok_or_else(|| {
            Error::format(hits_path, format!("layer {} missing from the barrel layout", h.layer_index))
        })?;
        let row = RawHit {
            hit_id: h.hit_id,
            x: h.x,
            y: h.y,
            z: h.z,
            volume_id,
            layer_id,
            module_id: 0,
        };
        w.serialize(row).map_err(|e| Error::format(hits_path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(hits_path, e.to_string()))?;

    let mut t = csv::Writer::from_writer(Vec::new());
    t.write_record(["hit_id", "particle_id"]).map_err(|e| Error::format(truth_path, e))?;
    for h in &event.hits {
        t.serialize((h.hit_id, h.truth_particle_id.unwrap_or(0)))
            .map_err(|e| Error::format(truth_path, e))?;
    }
    let truth_bytes = t.into_inner().map_err(|e| Error::format(truth_path, e.to_string()))?;
    write_atomic(hits_path, &bytes)?;
    write_atomic(truth_path, &truth_bytes)
}
