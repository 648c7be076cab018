//! File-exchange oracle. Requested points that have no response yet are
//! written to `pending_points.csv`; an external simulator appends rows
//! `xi_1,…,xi_d,y` to `responses.csv` and the run is repeated. Because
//! every run replays the same seeded decisions, the already answered points
//! are requested again in the same order and served from the file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ttpce::sampler::Oracle;

use crate::error::{CliError, CliResult};
use crate::table;

pub const PENDING_FILE: &str = "pending_points.csv";
pub const RESPONSES_FILE: &str = "responses.csv";

fn key(point: &[f64]) -> Vec<u64> {
    point.iter().map(|v| v.to_bits()).collect()
}

pub struct FileExchange {
    dir: PathBuf,
    d: usize,
    known: HashMap<Vec<u64>, f64>,
    pending: usize,
}

impl FileExchange {
    /// Loads `responses.csv` from `dir` when present.
    pub fn open(dir: &Path, d: usize) -> CliResult<Self> {
        let mut known = HashMap::new();
        let path = dir.join(RESPONSES_FILE);
        if path.is_file() {
            let (points, y) = table::read(&path)?;
            let y = y.ok_or_else(|| CliError::Oracle(format!("{} lacks a y column", path.display())))?;
            if points.ncols() != d {
                return Err(CliError::Oracle(format!(
                    "{} has {} coordinates, expected {d}",
                    path.display(),
                    points.ncols()
                )));
            }
            for i in 0..points.nrows() {
                let p: Vec<f64> = points.row(i).iter().copied().collect();
                known.insert(key(&p), y[i]);
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            d,
            known,
            pending: 0,
        })
    }

    pub fn known_responses(&self) -> usize {
        self.known.len()
    }

    /// Points written to the pending file by the last failed request.
    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn pending_path(&self) -> PathBuf {
        self.dir.join(PENDING_FILE)
    }

    /// Removes a stale pending file once every request has been served.
    pub fn clear_pending(&self) -> CliResult<()> {
        let p = self.pending_path();
        if p.is_file() {
            std::fs::remove_file(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }

    fn request(&mut self, points: &[Vec<f64>]) -> ttpce::Result<Vec<f64>> {
        let mut missing: Vec<&Vec<f64>> = Vec::new();
        for p in points {
            if p.len() != self.d {
                return Err(ttpce::Error::Oracle(format!(
                    "point has {} coordinates, expected {}",
                    p.len(),
                    self.d
                )));
            }
            if !self.known.contains_key(&key(p)) && !missing.iter().any(|m| key(m) == key(p)) {
                missing.push(p);
            }
        }
        if missing.is_empty() {
            self.pending = 0;
            return Ok(points.iter().map(|p| self.known[&key(p)]).collect());
        }
        let flat: Vec<f64> = missing.iter().flat_map(|p| p.iter().copied()).collect();
        let m = DMatrix::from_row_slice(missing.len(), self.d, &flat);
        let path = self.pending_path();
        std::fs::write(&path, table::render(&m, None))
            .map_err(|e| ttpce::Error::Oracle(format!("cannot write {}: {e}", path.display())))?;
        self.pending = missing.len();
        Err(ttpce::Error::Oracle(format!(
            "{} point(s) awaiting responses in {}; append `{}` rows to {} and rerun",
            missing.len(),
            path.display(),
            table::header(self.d, true),
            self.dir.join(RESPONSES_FILE).display()
        )))
    }
}

impl Oracle for FileExchange {
    fn evaluate(&mut self, point: &[f64]) -> ttpce::Result<f64> {
        self.request(std::slice::from_ref(&point.to_vec())).map(|v| v[0])
    }

    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> ttpce::Result<Vec<f64>> {
        self.request(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pending_then_served() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = FileExchange::open(dir.path(), 2).unwrap();
        let pts = vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.1, 0.2]];
        assert!(ex.evaluate_batch(&pts).is_err());
        let (pending, _) = table::read(&dir.path().join(PENDING_FILE)).unwrap();
        assert_eq!(pending.nrows(), 2);
        std::fs::write(
            dir.path().join(RESPONSES_FILE),
            format!(
                "xi_1,xi_2,y\n{}\n",
                "1.0000000000000001e-1,2.0000000000000001e-1,5\n3e-1,4e-1,6"
            ),
        )
        .unwrap();
        let mut ex = FileExchange::open(dir.path(), 2).unwrap();
        assert_eq!(ex.evaluate_batch(&pts).unwrap(), vec![5.0, 6.0, 5.0]);
        ex.clear_pending().unwrap();
        assert!(!dir.path().join(PENDING_FILE).exists());
    }
}
