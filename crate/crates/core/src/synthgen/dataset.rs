//! Dataset emission (`images/`, `meta/`, `manifest.json`) and distribution
//! statistics over an emitted dataset.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_sample, GenConfig, GenError};
use crate::logic_form::{parse, LogicForm};

/// The human turn of every conversation record.
pub const HUMAN_PROMPT: &str = "<image>\nGenerate the logic forms for this geometric diagram.";

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub count: usize,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub from: String,
    pub value: String,
}

/// Per-sample metadata document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub id: String,
    pub image: String,
    pub conversations: Vec<Turn>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenError + '_ {
    move |source| GenError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), GenError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Generates `cfg.count` samples in parallel and writes them under `out`.
/// Output bytes depend only on the config.
pub fn emit_dataset(cfg: &GenConfig, out: &Path) -> Result<Manifest, GenError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let images = out.join("images");
    let meta = out.join("meta");
    if cfg.count > 0 {
        fs::create_dir_all(&images).map_err(io_err(&images))?;
        fs::create_dir_all(&meta).map_err(io_err(&meta))?;
    }
    let ids = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let sample = generate_sample(cfg, i)?;
            let image_rel = format!("images/{}.png", sample.id);
            let png = out.join(&image_rel);
            sample.image.write_png(&png).map_err(|e| GenError::Format {
                path: png.display().to_string(),
                message: e.to_string(),
            })?;
            let record = MetaRecord {
                id: sample.id.clone(),
                image: image_rel,
                conversations: vec![
                    Turn {
                        from: "human".into(),
                        value: HUMAN_PROMPT.into(),
                    },
                    Turn {
                        from: "gpt".into(),
                        value: sample.answer,
                    },
                ],
            };
            write_json(&meta.join(format!("{}.json", sample.id)), &record)?;
            Ok(sample.id)
        })
        .collect::<Result<Vec<_>, GenError>>()?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        count: cfg.count,
        ids,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Mean primitive counts per sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PrimitiveMeans {
    pub points: f64,
    pub lines: f64,
    pub polygons: f64,
    pub circles: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub points: usize,
    pub lines: usize,
    pub polygons: usize,
    pub circles: usize,
    pub shape_counts: BTreeMap<String, usize>,
    pub relation_counts: BTreeMap<String, usize>,
    pub indicator_counts: BTreeMap<String, usize>,
    /// Files that could not be read or parsed, with the reason.
    pub errors: Vec<String>,
}

impl DatasetStats {
    pub fn add(&mut self, lf: &LogicForm) {
        self.samples += 1;
        self.points += lf.points.len();
        self.lines += lf.lines.len();
        self.polygons += lf.polygon_count();
        self.circles += lf.circle_count();
        for s in &lf.shapes {
            *self
                .shape_counts
                .entry(s.kind.name().to_string())
                .or_default() += 1;
        }
        for r in &lf.relations {
            *self
                .relation_counts
                .entry(r.kind.name().to_string())
                .or_default() += 1;
        }
        for i in &lf.indicators {
            *self
                .indicator_counts
                .entry(i.property.name().to_string())
                .or_default() += 1;
        }
    }

    pub fn from_forms<'a>(forms: impl IntoIterator<Item = &'a LogicForm>) -> Self {
        let mut s = Self::default();
        for lf in forms {
            s.add(lf);
        }
        s
    }

    pub fn means(&self) -> PrimitiveMeans {
        if self.samples == 0 {
            return PrimitiveMeans::default();
        }
        let n = self.samples as f64;
        PrimitiveMeans {
            points: self.points as f64 / n,
            lines: self.lines as f64 / n,
            polygons: self.polygons as f64 / n,
            circles: self.circles as f64 / n,
        }
    }

    pub fn shape_distribution(&self) -> Vec<(String, f64)> {
        distribution(&self.shape_counts)
    }

    pub fn relation_distribution(&self) -> Vec<(String, f64)> {
        distribution(&self.relation_counts)
    }
}

/// Percentages, most frequent first.
fn distribution(counts: &BTreeMap<String, usize>) -> Vec<(String, f64)> {
    let total: usize = counts.values().sum();
    let mut out: Vec<(String, f64)> = counts
        .iter()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| (k.clone(), 100.0 * *c as f64 / total as f64))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.means();
        writeln!(
            f,
            "samples: {} ({} unreadable)",
            self.samples,
            self.errors.len()
        )?;
        writeln!(
            f,
            "mean primitives: points {:.2}, lines {:.2}, polygons {:.2}, circles {:.2}",
            m.points, m.lines, m.polygons, m.circles
        )?;
        for (title, dist) in [
            ("shapes", self.shape_distribution()),
            ("relations", self.relation_distribution()),
        ] {
            writeln!(f, "{title}:")?;
            if dist.is_empty() {
                writeln!(f, "  (none)")?;
            }
            for (name, pct) in dist {
                writeln!(f, "  {name:<20} {pct:5.1}%")?;
            }
        }
        Ok(())
    }
}

/// Reads every `meta/*.json` record under `dir`. Unreadable files are listed
/// in `errors` and skipped; a missing or empty dataset gives an all-zero
/// report.
pub fn dataset_stats(dir: &Path) -> Result<DatasetStats, GenError> {
    let meta = dir.join("meta");
    let mut stats = DatasetStats::default();
    if !meta.is_dir() {
        if dir.is_dir() {
            return Ok(stats);
        }
        return Err(GenError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "dataset directory not found",
            ),
        });
    }
    let mut files: Vec<_> = fs::read_dir(&meta)
        .map_err(io_err(&meta))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for path in files {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|text| serde_json::from_str::<MetaRecord>(&text).map_err(|e| e.to_string()))
            .and_then(|rec| {
                let answer = rec
                    .conversations
                    .iter()
                    .find(|t| t.from == "gpt")
                    .ok_or("no gpt turn")?;
                parse(&answer.value).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(lf) => stats.add(&lf),
            Err(e) => stats.errors.push(format!("{}: {e}", path.display())),
        }
    }
    Ok(stats)
}
