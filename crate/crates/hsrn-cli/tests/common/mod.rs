//! Shared helpers for CLI tests: temp directories, process invocation,
//! synthetic image generation.
#![allow(dead_code)] // each test binary uses a different subset

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};

use hsrn::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static COUNTER: AtomicU64 = AtomicU64::new(0);

/// Self-cleaning unique temporary directory.
pub struct TempDir(PathBuf);

impl TempDir {
    pub fn new(tag: &str) -> TempDir {
        let nonce = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!(
            "hsrn-test-{tag}-{}-{nonce}",
            std::process::id()
        ));
        std::fs::create_dir_all(&path).expect("create temp dir");
        TempDir(path)
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Runs the hsrn binary with the given arguments.
pub fn hsrn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsrn"))
        .args(args)
        .output()
        .expect("spawn hsrn binary")
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process terminated by signal")
}

pub fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn stdout_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Smooth but non-trivial synthetic plane: band-limited sinusoid mixture
/// plus mild noise, clamped to [0, 1]. Deterministic in `seed`.
pub fn synth_plane(rows: usize, cols: usize, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fr, fc) = (rng.random_range(1.0..3.0), rng.random_range(1.0..3.0));
    let (pr, pc) = (rng.random_range(0.0..6.28), rng.random_range(0.0..6.28));
    let mut plane = Grid::from_fn(rows, cols, |r, c| {
        let y = r as f64 / rows as f64;
        let x = c as f64 / cols as f64;
        0.5 + 0.2 * (2.0 * std::f64::consts::PI * fr * y + pr).sin()
            + 0.2 * (2.0 * std::f64::consts::PI * fc * x + pc).cos()
    });
    for v in plane.as_mut_slice() {
        *v = (*v + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0);
    }
    plane
}

/// Writes `count` synthetic grayscale PNGs into `dir`.
pub fn write_dataset(dir: &Path, count: usize, rows: usize, cols: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let plane = synth_plane(rows, cols, 100 + i as u64);
        hsrn::imaging::save_gray(&dir.join(format!("img_{i:02}.png")), &plane).unwrap();
    }
}

/// Writes a minimal valid run configuration, returning its path. Extra lines
/// are appended verbatim; `max_iters`, `seed`, and the like belong there so
/// tests can vary them without duplicating keys.
pub fn write_config(dir: &TempDir, name: &str, dataset: &Path, model_out: &Path, extra: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        "dataset_dir = {}\nmodel_out = {}\nlayers = 2\nkernels_per_layer = 2\nsmoothing_half_width = 1\ntrain_height = 16\ntrain_width = 16\nupscale = 2\nbatch_size = 2\n{extra}",
        dataset.display(),
        model_out.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}
