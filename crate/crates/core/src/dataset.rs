//! Noisy train / clean test datasets sampled from a trajectory, and their
//! CSV persistence.
//!
//! CSV layout: `split,t_hours,voltage_V,thickness_cm,is_noisy`, one header
//! row, `train` rows carrying noisy observations and `test` rows the clean
//! signal. Metadata lives in a JSON sidecar next to the CSV
//! (`<stem>.meta.json`) together with the SHA-256 of the CSV bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulator::Trajectory;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const COLUMNS: [&str; 5] = ["split", "t_hours", "voltage_V", "thickness_cm", "is_noisy"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    /// h
    pub t: f64,
    /// V
    pub voltage: f64,
    /// cm
    pub thickness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Noisy observations in `[0, train_fraction * t_max]`.
    pub train: Vec<DataPoint>,
    /// Noise-free truth over `[0, t_max]`.
    pub test: Vec<DataPoint>,
    pub noise_sigma_v: f64,
    pub noise_sigma_mem: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub seed: u64,
    pub train_fraction: f64,
    #[serde(rename = "noise_sigma_V")]
    pub noise_sigma_v: f64,
    pub noise_sigma_mem: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub config_hash: String,
    pub csv_sha256: String,
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// `n` equally spaced points on `[0, end]`, endpoints included.
pub fn equally_spaced(n: usize, end: f64) -> Vec<f64> {
    (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
}

/// Samples `n_test` clean points over the whole horizon and `n_train` noisy
/// points over its first `train_fraction`. Each channel's noise standard
/// deviation equals the population standard deviation of the clean test
/// samples of that channel.
pub fn generate_dataset(
    traj: &Trajectory,
    n_train: usize,
    n_test: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_train < 2 {
        return Err(Error::config("n_train", format!("need at least 2 points, got {n_train}")));
    }
    if n_test < 2 {
        return Err(Error::config("n_test", format!("need at least 2 points, got {n_test}")));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::config(
            "train_fraction",
            format!("must lie in (0, 1], got {train_fraction}"),
        ));
    }
    if traj.len() < 2 {
        return Err(Error::config("trajectory", "needs at least two samples"));
    }
    let t_max = traj.t_max();
    let at = |t: f64| -> Result<DataPoint> {
        let (voltage, thickness) = traj
            .sample(t)
            .ok_or_else(|| Error::config("trajectory", format!("cannot sample t = {t} h")))?;
        Ok(DataPoint { t, voltage, thickness })
    };

    let test = equally_spaced(n_test, t_max)
        .into_iter()
        .map(at)
        .collect::<Result<Vec<_>>>()?;
    let volts: Vec<f64> = test.iter().map(|p| p.voltage).collect();
    let thick: Vec<f64> = test.iter().map(|p| p.thickness).collect();
    let noise_sigma_v = population_std(&volts);
    let noise_sigma_mem = population_std(&thick);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_v = Normal::new(0.0, noise_sigma_v).map_err(|e| Error::config("noise_sigma_V", e.to_string()))?;
    let noise_m =
        Normal::new(0.0, noise_sigma_mem).map_err(|e| Error::config("noise_sigma_mem", e.to_string()))?;
    let mut train = Vec::with_capacity(n_train);
    for t in equally_spaced(n_train, train_fraction * t_max) {
        let clean = at(t)?;
        let ev = noise_v.sample(&mut rng);
        let em = noise_m.sample(&mut rng);
        train.push(DataPoint {
            t,
            voltage: clean.voltage + ev,
            thickness: clean.thickness + em,
        });
    }

    Ok(Dataset {
        train,
        test,
        noise_sigma_v,
        noise_sigma_mem,
        seed,
        train_fraction,
        config_hash: String::new(),
    })
}

/// Sidecar path for a dataset CSV: `dir/name.csv` → `dir/name.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Dataset {
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Parse {
            path: PathBuf::from("<memory>"),
            line: 0,
            message: e.to_string(),
        };
        w.write_record(COLUMNS).map_err(csv_err)?;
        for (split, noisy, points) in [("train", "1", &self.train), ("test", "0", &self.test)] {
            for p in points.iter() {
                w.write_record([
                    split,
                    &p.t.to_string(),
                    &p.voltage.to_string(),
                    &p.thickness.to_string(),
                    noisy,
                ])
                .map_err(csv_err)?;
            }
        }
        w.into_inner().map_err(|e| Error::Parse {
            path: PathBuf::from("<memory>"),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn meta(&self, csv_bytes: &[u8]) -> DatasetMeta {
        DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            seed: self.seed,
            train_fraction: self.train_fraction,
            noise_sigma_v: self.noise_sigma_v,
            noise_sigma_mem: self.noise_sigma_mem,
            n_train: self.train.len(),
            n_test: self.test.len(),
            config_hash: self.config_hash.clone(),
            csv_sha256: sha256_hex(csv_bytes),
        }
    }
}

/// Writes the CSV and its metadata sidecar; returns the CSV checksum.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<String> {
    let bytes = ds.to_csv_bytes()?;
    let meta = ds.meta(&bytes);
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let mpath = meta_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(meta.csv_sha256)
}

fn parse_f64(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column `{column}`: {e} ({raw:?})"),
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mpath = meta_path(path);
    let meta_text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: mpath.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;

    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let point = DataPoint {
            t: parse_f64(path, line, COLUMNS[1], field(1))?,
            voltage: parse_f64(path, line, COLUMNS[2], field(2))?,
            thickness: parse_f64(path, line, COLUMNS[3], field(3))?,
        };
        match (field(0).trim(), field(4).trim()) {
            ("train", "1") => train.push(point),
            ("test", "0") => test.push(point),
            (split, noisy) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("unexpected split/is_noisy pair ({split:?}, {noisy:?})"),
                })
            }
        }
    }

    let checksum = sha256_hex(&bytes);
    if checksum != meta.csv_sha256 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("checksum {checksum} does not match recorded {}", meta.csv_sha256),
        });
    }
    if train.len() != meta.n_train || test.len() != meta.n_test {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "row counts disagree with metadata".into(),
        });
    }
    Ok(Dataset {
        train,
        test,
        noise_sigma_v: meta.noise_sigma_v,
        noise_sigma_mem: meta.noise_sigma_mem,
        seed: meta.seed,
        train_fraction: meta.train_fraction,
        config_hash: meta.config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{default_parameters, OperatingConditions};
    use crate::simulator::integrate_trajectory;

    fn trajectory() -> Trajectory {
        let p = default_parameters();
        integrate_trajectory(&p, &OperatingConditions::default(), p.k5_true, 256).unwrap()
    }

    #[test]
    fn train_grid_spacing() {
        let traj = trajectory();
        let ds = generate_dataset(&traj, 100, 1000, 1.0 / 3.0, 7).unwrap();
        let spacing = (8e5 / 3.0) / 99.0;
        assert!((ds.train[1].t - 2693.602693602694).abs() < 1e-9);
        assert!((ds.train[1].t - spacing).abs() < 1e-9);
        assert!((ds.train[99].t - 266_666.666_666_666_7).abs() < 1e-6);
        assert!(ds.train.iter().all(|p| p.t <= 8e5 / 3.0 + 1e-9));
        assert_eq!(ds.test[0].t, 0.0);
        assert_eq!(ds.test[999].t, 8e5);
    }

    #[test]
    fn sigma_matches_clean_samples() {
        let traj = trajectory();
        let ds = generate_dataset(&traj, 100, 1000, 1.0 / 3.0, 7).unwrap();
        let v: Vec<f64> = ds.test.iter().map(|p| p.voltage).collect();
        let m: Vec<f64> = ds.test.iter().map(|p| p.thickness).collect();
        assert!((population_std(&v) - ds.noise_sigma_v).abs() < 1e-12);
        assert!((population_std(&m) - ds.noise_sigma_mem).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_bytes() {
        let traj = trajectory();
        let a = generate_dataset(&traj, 100, 200, 1.0 / 3.0, 11).unwrap();
        let b = generate_dataset(&traj, 100, 200, 1.0 / 3.0, 11).unwrap();
        let c = generate_dataset(&traj, 100, 200, 1.0 / 3.0, 12).unwrap();
        assert_eq!(a.to_csv_bytes().unwrap(), b.to_csv_bytes().unwrap());
        assert_ne!(a.train, c.train);
        assert_eq!(a.test, c.test);
    }

    #[test]
    fn too_few_points() {
        let traj = trajectory();
        assert!(matches!(
            generate_dataset(&traj, 1, 100, 0.3, 0),
            Err(Error::Config { .. })
        ));
        assert!(generate_dataset(&traj, 10, 1, 0.3, 0).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        let mut ds = generate_dataset(&trajectory(), 50, 80, 1.0 / 3.0, 3).unwrap();
        ds.config_hash = "abc".into();
        save_dataset(&ds, &path).unwrap();
        assert!(dir.path().join("dataset.meta.json").exists());
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        let ds = generate_dataset(&trajectory(), 10, 10, 1.0 / 3.0, 3).unwrap();
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("voltage_V", "volts");
        fs::write(&path, text).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "voltage_V"), "{err}");
    }

    #[test]
    fn malformed_value_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        let ds = generate_dataset(&trajectory(), 10, 10, 1.0 / 3.0, 3).unwrap();
        save_dataset(&ds, &path).unwrap();
        let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
        lines[3] = "train,abc,1,2,1".into();
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        match load_dataset(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("{other}"),
        }
    }
}
