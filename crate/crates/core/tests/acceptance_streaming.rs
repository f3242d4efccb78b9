//! Acceptance criterion 3: a ~100 MB dataset is processed with a bounded
//! working set — heap growth during the run stays within 1 MB plus two
//! frame records — and the engine decodes each frame exactly once per pass.
//!
//! Lives in its own test binary because it installs a tracking global
//! allocator and must not share the process with other tests.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use seispost::calcs::build_calculation;
use seispost::engine::{CalcOutcome, Engine, RunOptions};
use seispost::framearc::record_len;
use seispost::synth::{self, SynthConfig};

struct TrackingAllocator;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

fn on_alloc(size: usize) {
    let live = LIVE.fetch_add(size, Ordering::SeqCst) + size;
    PEAK.fetch_max(live, Ordering::SeqCst);
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc_zeroed(layout) };
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, p: *mut u8, layout: Layout) {
        unsafe { System.dealloc(p, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }

    unsafe fn realloc(&self, p: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let q = unsafe { System.realloc(p, layout, new_size) };
        if !q.is_null() {
            LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
            on_alloc(new_size);
        }
        q
    }
}

#[global_allocator]
static ALLOCATOR: TrackingAllocator = TrackingAllocator;

#[test]
fn criterion_3_streaming_working_set() {
    // 10x10x25 bricks: record_len = 16 + 24 * 2500 = 60016 bytes, so 1750
    // frames come to ~105 MB on disk across seven files.
    let cfg = SynthConfig {
        nx: 10,
        ny: 10,
        nz: 25,
        frames: 1750,
        dt: 0.01,
        amplitude: 0.05,
        frequency: 1.5,
        noise_sigma: 0.0,
        seed: 11,
    };
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth::generate(&cfg, dir.path(), 250).unwrap();
    let record = record_len(manifest.grid.brick_count());
    let disk_bytes: u64 = manifest
        .files
        .iter()
        .map(|f| std::fs::metadata(&f.path).unwrap().len())
        .sum();
    assert!(
        disk_bytes >= 100_000_000,
        "dataset is only {disk_bytes} bytes; criterion needs ~100 MB"
    );

    // Two single-phase calculations; both consume every frame once.
    let mut engine = Engine::new();
    engine
        .register(build_calculation("peak_displacement", "peak", &manifest.grid, None).unwrap())
        .unwrap();
    engine
        .register(build_calculation("rms_velocity", "rms", &manifest.grid, None).unwrap())
        .unwrap();

    // Measure only the run itself: reset the peak to the live baseline.
    let baseline = LIVE.load(Ordering::SeqCst);
    PEAK.store(baseline, Ordering::SeqCst);

    let outcome = engine.run(&manifest, &RunOptions::default()).unwrap();

    let peak = PEAK.load(Ordering::SeqCst);
    let growth = peak - baseline;
    let budget = 1_000_000 + 2 * record as usize;
    assert!(
        growth <= budget,
        "working set grew by {growth} bytes (budget {budget}, record {record})"
    );

    // Each frame decoded exactly once: one pass over all frames.
    assert_eq!(outcome.frames_decoded, vec![cfg.frames]);
    assert!(outcome.failures().is_empty());
    for id in ["peak", "rms"] {
        assert!(
            matches!(outcome.outcomes[id], CalcOutcome::Success { .. }),
            "{id} did not succeed"
        );
    }
    println!(
        "criterion 3: PASS ({disk_bytes} input bytes, working set {growth} <= {budget})"
    );
}
