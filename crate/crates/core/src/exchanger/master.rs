use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::optim::{elastic_pair, ParamVector};

/// How exchange handlers share the master vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Whole-vector read-modify-write under a mutex.
    #[default]
    Locked,
    /// Per-element atomic loads and stores without mutual exclusion.
    /// Concurrent exchanges may overwrite each other's element updates.
    LockFree,
}

pub(crate) enum MasterParams {
    Locked(Mutex<Vec<f32>>),
    LockFree(Box<[AtomicU32]>),
}

impl MasterParams {
    pub(crate) fn new(init: ParamVector, mode: UpdateMode) -> Self {
        match mode {
            UpdateMode::Locked => MasterParams::Locked(Mutex::new(init.into_inner())),
            UpdateMode::LockFree => MasterParams::LockFree(
                init.into_inner()
                    .into_iter()
                    .map(|v| AtomicU32::new(v.to_bits()))
                    .collect(),
            ),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        match self {
            MasterParams::Locked(m) => m.lock().unwrap_or_else(|e| e.into_inner()).len(),
            MasterParams::LockFree(v) => v.len(),
        }
    }

    /// Applies the elastic update against the current master and returns the
    /// updated worker vector. `worker` must already be validated.
    pub(crate) fn exchange(&self, worker: &[f32], alpha: f32) -> Vec<f32> {
        match self {
            MasterParams::Locked(m) => {
                let mut master = m.lock().unwrap_or_else(|e| e.into_inner());
                worker
                    .iter()
                    .zip(master.iter_mut())
                    .map(|(&w, m)| {
                        let (w2, m2) = elastic_pair(w, *m, alpha);
                        *m = m2;
                        w2
                    })
                    .collect()
            }
            MasterParams::LockFree(cells) => worker
                .iter()
                .zip(cells.iter())
                .map(|(&w, cell)| {
                    // racy on purpose: another handler may store between the
                    // load and the store below
                    let m = f32::from_bits(cell.load(Ordering::Relaxed));
                    let (w2, m2) = elastic_pair(w, m, alpha);
                    cell.store(m2.to_bits(), Ordering::Relaxed);
                    w2
                })
                .collect(),
        }
    }

    /// Locked: a consistent copy. LockFree: element-wise reads that may mix
    /// states of concurrent exchanges.
    pub(crate) fn snapshot(&self) -> Vec<f32> {
        match self {
            MasterParams::Locked(m) => m.lock().unwrap_or_else(|e| e.into_inner()).clone(),
            MasterParams::LockFree(cells) => cells
                .iter()
                .map(|c| f32::from_bits(c.load(Ordering::Relaxed)))
                .collect(),
        }
    }
}
