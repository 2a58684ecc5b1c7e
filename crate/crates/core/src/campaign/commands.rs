//! The non-campaign subcommands: scoring, rendering, Pareto export and
//! synthetic scenes.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::{io, MaskSet};
use crate::nsga2::{fast_nondominated_sort, parse_history_csv, HistoryTable};
use crate::reward::{self, ObjectiveId, ObjectiveVector, OverlapCounts, RewardSpec};
use crate::synth::{self, BimodalScene, MixedScene, OverlapScene, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub masks: usize,
    pub objectives: ObjectiveVector,
    /// Present when overlap fidelity is active.
    pub counts: Option<OverlapCounts>,
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "masks = {}", self.masks)?;
        for (name, value) in self.objectives.entries() {
            writeln!(f, "{name} = {value}")?;
        }
        if let Some(c) = &self.counts {
            writeln!(f, "overlapping_pairs = {}", c.overlapping)?;
            writeln!(f, "duplicate_pairs = {}", c.duplicates)?;
            writeln!(f, "merged_masks = {}", c.merged)?;
        }
        Ok(())
    }
}

pub fn score_set(set: &MaskSet, spec: &RewardSpec) -> ScoreReport {
    ScoreReport {
        masks: set.len(),
        objectives: reward::evaluate(set, spec),
        counts: spec
            .objectives
            .contains(&ObjectiveId::OverlapFidelity)
            .then(|| OverlapCounts::of(set, spec)),
    }
}

pub fn cmd_score(masks: &Path, spec: &RewardSpec) -> Result<ScoreReport> {
    Ok(score_set(&io::read_mask_set(masks)?, spec))
}

/// Writes the label map to `out` and the full mask set next to it
/// (`out` with extension `rle`). Returns the mask-set path.
pub fn cmd_render(masks: &Path, out: &Path) -> Result<PathBuf> {
    let set = io::read_mask_set(masks)?;
    io::write_label_png(out, &set)?;
    let rle = out.with_extension("rle");
    io::write_mask_set(&rle, &set)?;
    Ok(rle)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    pub table: HistoryTable,
    /// Row indices of the non-dominated rows.
    pub front: Vec<usize>,
    /// Rank of every row, 0 for the front.
    pub ranks: Vec<usize>,
    pub written: Vec<PathBuf>,
}

impl ParetoReport {
    pub fn dominated(&self) -> Vec<usize> {
        (0..self.ranks.len()).filter(|&i| self.ranks[i] > 0).collect()
    }
}

/// Ranks the rows of a history file and writes `pareto_front.csv`,
/// `pareto_dominated.csv` and, with two or more objectives, a gnuplot
/// script `pareto.gp` plotting the first two.
pub fn cmd_pareto(history: &Path, out_dir: &Path) -> Result<ParetoReport> {
    let file = fs::File::open(history).map_err(|e| Error::io(format!("opening {}", history.display()), e))?;
    let table = parse_history_csv(file, &history.display().to_string())?;
    if table.skipped > 0 {
        log::warn!("{} malformed row(s) skipped in {}", table.skipped, history.display());
    }
    if table.rows.is_empty() {
        return Err(Error::invalid(format!("{} has no usable rows", history.display())));
    }
    let points: Vec<Vec<f64>> = table.rows.iter().map(|r| r.objectives.values()).collect();
    let fronts = fast_nondominated_sort(&points);
    let mut ranks = vec![0; points.len()];
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            ranks[i] = rank;
        }
    }
    let front = fronts[0].clone();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let mut written = Vec::new();
    let header: Vec<String> = ["genome_hash".to_string(), "generation".to_string()]
        .into_iter()
        .chain(table.objective_names.iter().map(|n| format!("obj_{n}")))
        .chain(["rank".to_string()])
        .collect();
    let dominated: Vec<usize> = (0..ranks.len()).filter(|&i| ranks[i] > 0).collect();
    for (name, rows) in [("pareto_front.csv", &front), ("pareto_dominated.csv", &dominated)] {
        let path = out_dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let csv_err = |e: csv::Error| Error::invalid(format!("writing {}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        for &i in rows {
            let r = &table.rows[i];
            let mut rec = vec![r.genome_hash.clone(), r.generation.to_string()];
            rec.extend(r.objectives.values().iter().map(|v| v.to_string()));
            rec.push(ranks[i].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
    }
    if table.objective_names.len() >= 2 {
        let path = out_dir.join("pareto.gp");
        let (x, y) = (&table.objective_names[0], &table.objective_names[1]);
        let script = format!(
            "set datafile separator ','\n\
             set key top right\n\
             set xlabel '{x}'\n\
             set ylabel '{y}'\n\
             plot 'pareto_dominated.csv' every ::1 using 3:4 title 'dominated' with points pt 6 lc rgb 'gray', \\\n     \
             'pareto_front.csv' every ::1 using 3:4 title 'front' with points pt 7 lc rgb 'red'\n"
        );
        let mut f = fs::File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(script.as_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
    }
    Ok(ParetoReport {
        table,
        front,
        ranks,
        written,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// One flat disk, no noise.
    Disk,
    /// Five separated disks.
    Disks,
    /// Twenty pairs of overlapping disks.
    Overlap,
    /// Many small disks and a few large ones.
    Bimodal,
    /// Disks and elongated rectangles.
    Mixed,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "disk" => SceneKind::Disk,
            "disks" => SceneKind::Disks,
            "overlap" => SceneKind::Overlap,
            "bimodal" => SceneKind::Bimodal,
            "mixed" => SceneKind::Mixed,
            _ => {
                return Err(Error::Config(format!(
                    "scene `{s}` is not one of disk, disks, overlap, bimodal, mixed"
                )))
            }
        })
    }
}

pub fn build_scene(kind: SceneKind, seed: u64) -> Result<Scene> {
    match kind {
        SceneKind::Disk => synth::single_disk(64, 12.0, 30000, 4000),
        SceneKind::Disks => synth::disjoint_disks(seed, 250.0),
        SceneKind::Overlap => OverlapScene { seed, ..Default::default() }.build(),
        SceneKind::Bimodal => BimodalScene { seed, ..Default::default() }.build(),
        SceneKind::Mixed => MixedScene { seed, ..Default::default() }.build(),
    }
}

/// Writes `image.png` and the ground truth `truth.rle` into `out_dir`.
pub fn cmd_synth(kind: SceneKind, seed: u64, out_dir: &Path) -> Result<Scene> {
    let scene = build_scene(kind, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    io::write_image(&out_dir.join("image.png"), &scene.image)?;
    io::write_mask_set(&out_dir.join("truth.rle"), &scene.truth())?;
    Ok(scene)
}
