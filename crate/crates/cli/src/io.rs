//! File formats: controls and trajectories, run records, survey summaries,
//! histograms and manifold bundles. Every writer has a matching reader.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qlandscape_core::{BlochState, ControlVector, EvolutionMatrix, Histogram, ManifoldBundle};

use crate::error::{CliError, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    File::create(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_owned(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let json_err = |source| CliError::Json {
        path: path.to_owned(),
        source,
    };
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct ControlRow {
    u: f64,
    n: f64,
}

/// Controls as `u,n` rows, one per interval.
pub fn read_controls_csv(path: &Path) -> Result<ControlVector> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let (mut u, mut n) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: ControlRow = row.map_err(csv_err(path))?;
        u.push(row.u);
        n.push(row.n);
    }
    if u.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no control rows",
            path.display()
        )));
    }
    Ok(ControlVector::from_incoherent(u, &n)?)
}

pub fn write_controls_csv(path: &Path, controls: &ControlVector) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (&u, n) in controls.u.iter().zip(controls.incoherent()) {
        w.serialize(ControlRow { u, n }).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// States `r_0 … r_M` at the grid boundaries and the final map `Ψ(T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochState>,
    pub psi: EvolutionMatrix,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    k: usize,
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (k, (&t, r)) in traj.times.iter().zip(&traj.states).enumerate() {
        let v = r.vector();
        w.serialize(TrajectoryRow {
            k,
            t,
            x: v[0],
            y: v[1],
            z: v[2],
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Times and states of a trajectory CSV (the map `Ψ` lives only in JSON).
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<f64>, Vec<BlochState>)> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let (mut times, mut states) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: TrajectoryRow = row.map_err(csv_err(path))?;
        times.push(row.t);
        states.push(BlochState::new(row.x, row.y, row.z));
    }
    Ok((times, states))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct HistogramRow {
    bin_left: f64,
    bin_right: f64,
    count: usize,
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if h.counts.is_empty() {
        w.write_record(["bin_left", "bin_right", "count"])
            .map_err(csv_err(path))?;
    }
    for (edge, &count) in h.edges.windows(2).zip(&h.counts) {
        w.serialize(HistogramRow {
            bin_left: edge[0],
            bin_right: edge[1],
            count,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_histogram_csv(path: &Path) -> Result<Histogram> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut h = Histogram {
        edges: Vec::new(),
        counts: Vec::new(),
    };
    for row in rdr.deserialize() {
        let row: HistogramRow = row.map_err(csv_err(path))?;
        if h.edges.is_empty() {
            h.edges.push(row.bin_left);
        }
        h.edges.push(row.bin_right);
        h.counts.push(row.count);
    }
    Ok(h)
}

#[derive(Serialize, Deserialize)]
struct ManifoldRow {
    run_id: usize,
    peak: usize,
    interval_index: usize,
    t_start: f64,
    t_end: f64,
    u: f64,
    n: f64,
}

/// All bundles in one long-format table.
pub fn write_manifold_csv(path: &Path, bundles: &[ManifoldBundle]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if bundles.iter().all(ManifoldBundle::is_empty) {
        w.write_record([
            "run_id",
            "peak",
            "interval_index",
            "t_start",
            "t_end",
            "u",
            "n",
        ])
        .map_err(csv_err(path))?;
    }
    for b in bundles {
        for ((&run_id, u), n) in b.run_ids.iter().zip(&b.u).zip(&b.n) {
            for (k, (t, (&u, &n))) in b.boundaries.windows(2).zip(u.iter().zip(n)).enumerate() {
                w.serialize(ManifoldRow {
                    run_id,
                    peak: b.peak,
                    interval_index: k,
                    t_start: t[0],
                    t_end: t[1],
                    u,
                    n,
                })
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Rebuilds bundles from the long-format table. Rows of one run must be
/// contiguous and in interval order, as written by [`write_manifold_csv`].
pub fn read_manifold_csv(path: &Path) -> Result<Vec<ManifoldBundle>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut bundles: Vec<ManifoldBundle> = Vec::new();
    let mut last: Option<usize> = None;
    for row in rdr.deserialize() {
        let row: ManifoldRow = row.map_err(csv_err(path))?;
        while bundles.len() <= row.peak {
            bundles.push(ManifoldBundle {
                peak: bundles.len(),
                boundaries: Vec::new(),
                run_ids: Vec::new(),
                u: Vec::new(),
                n: Vec::new(),
            });
        }
        let b = &mut bundles[row.peak];
        if last != Some(row.run_id) || row.interval_index == 0 {
            b.run_ids.push(row.run_id);
            b.u.push(Vec::new());
            b.n.push(Vec::new());
        }
        last = Some(row.run_id);
        if b.boundaries.is_empty() {
            b.boundaries.push(row.t_start);
        }
        if b.boundaries.len() == row.interval_index + 1 {
            b.boundaries.push(row.t_end);
        }
        if let (Some(u), Some(n)) = (b.u.last_mut(), b.n.last_mut()) {
            u.push(row.u);
            n.push(row.n);
        }
    }
    Ok(bundles)
}
