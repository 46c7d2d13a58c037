use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// CPU time consumed by the calling thread.
pub fn thread_cpu_ns() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0;
    }
    ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Quality,
    Screen,
    Ood,
    Spotter,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Quality, Stage::Screen, Stage::Ood, Stage::Spotter];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageEntry {
    pub wall_ns: u64,
    pub cpu_ns: u64,
    pub frames_in: u64,
    pub frames_out: u64,
    pub bytes_in: u64,
}

impl StageEntry {
    fn add(&mut self, o: &StageEntry) {
        self.wall_ns += o.wall_ns;
        self.cpu_ns += o.cpu_ns;
        self.frames_in += o.frames_in;
        self.frames_out += o.frames_out;
        self.bytes_in += o.bytes_in;
    }
}

/// Per-stage counters. Wall time is summed over workers, so with several
/// threads it exceeds the elapsed time of the run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StageMetrics {
    entries: [StageEntry; 5],
}

impl StageMetrics {
    pub fn get(&self, stage: Stage) -> &StageEntry {
        &self.entries[stage as usize]
    }

    pub fn get_mut(&mut self, stage: Stage) -> &mut StageEntry {
        &mut self.entries[stage as usize]
    }

    pub fn total(&self) -> StageEntry {
        let mut t = StageEntry::default();
        self.entries.iter().for_each(|e| t.add(e));
        t
    }

    pub fn merge(&mut self, other: &StageMetrics) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.add(b);
        }
    }

    /// Versioned JSON. Timings are machine-dependent and only written when asked for,
    /// which keeps the default output reproducible byte for byte.
    pub fn to_json(&self, timings: bool) -> Result<String> {
        let entry = |e: &StageEntry| {
            let mut v = serde_json::to_value(e).expect("plain struct");
            if !timings {
                let m = v.as_object_mut().expect("object");
                m.remove("wall_ns");
                m.remove("cpu_ns");
            }
            v
        };
        let stages: serde_json::Map<String, serde_json::Value> = Stage::ALL
            .iter()
            .map(|s| (serde_json::to_value(s).expect("unit enum").as_str().expect("string").to_owned(), entry(self.get(*s))))
            .collect();
        let doc = serde_json::json!({ "version": 1, "stages": stages, "total": entry(&self.total()) });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Runs `f`, charging its wall and CPU time plus the given counts to `entry`.
/// `f` returns its result and the number of frames it let through.
pub fn meter<T>(entry: &mut StageEntry, frames_in: u64, bytes_in: u64, f: impl FnOnce() -> (T, u64)) -> T {
    let wall = Instant::now();
    let cpu = thread_cpu_ns();
    let (out, frames_out) = f();
    entry.cpu_ns += thread_cpu_ns().saturating_sub(cpu);
    entry.wall_ns += wall.elapsed().as_nanos() as u64;
    entry.frames_in += frames_in;
    entry.frames_out += frames_out;
    entry.bytes_in += bytes_in;
    out
}

/// Spins until this thread has used `ns` more nanoseconds of CPU.
pub fn burn_cpu(ns: u64) {
    let start = thread_cpu_ns();
    let mut x = 0u64;
    while thread_cpu_ns().saturating_sub(start) < ns {
        for i in 0..1000 {
            x = std::hint::black_box(x.wrapping_mul(6364136223846793005).wrapping_add(i));
        }
    }
}
