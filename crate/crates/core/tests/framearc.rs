//! Integration tests for the frame-archive format: bit-exact round trips,
//! error detection, and windowed byte accounting.

mod common;

use std::fs;

use seispost::framearc::{
    self, record_len, ByteCounter, FileHeader, FormatError, FrameRecord, HEADER_LEN, VERSION,
};

#[test]
fn single_frame_single_brick_file_is_124_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let header = FileHeader {
        version: VERSION,
        nx: 1,
        ny: 1,
        nz: 1,
        total_frames: 1,
        first_frame: 0,
        frame_count: 1,
        dt: 0.5,
    };
    let rec = FrameRecord {
        frame_index: 0,
        time: 0.0,
        positions: vec![1.0, 2.0, 3.0],
        velocities: vec![4.0, 5.0, 6.0],
    };
    let path = dir.path().join("one.faf");
    let written = framearc::write_file(&path, &header, &[rec]).unwrap();
    assert_eq!(written, 124);
    assert_eq!(fs::metadata(&path).unwrap().len(), 124);
    assert_eq!(HEADER_LEN + record_len(1), 124);
}

#[test]
fn header_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 2, 3, 0.25, &[(0, 3)], common::checker);
    let header = framearc::read_header(&paths[0]).unwrap();
    assert_eq!(header.nx, 2);
    assert_eq!(header.total_frames, 3);
    assert_eq!(header.first_frame, 0);
    assert_eq!(header.frame_count, 3);
    assert_eq!(header.dt, 0.25);
}

#[test]
fn empty_frame_list_is_construction_error() {
    let dir = tempfile::tempdir().unwrap();
    let header = FileHeader {
        version: VERSION,
        nx: 1,
        ny: 1,
        nz: 1,
        total_frames: 1,
        first_frame: 0,
        frame_count: 0,
        dt: 0.5,
    };
    let err = framearc::write_file(&dir.path().join("x.faf"), &header, &[]).unwrap_err();
    assert!(matches!(err, FormatError::Construction(_)), "{err}");
}

#[test]
fn bad_magic_is_not_a_framearc() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 1, 1, 0.1, &[(0, 1)], common::checker);
    let mut bytes = fs::read(&paths[0]).unwrap();
    bytes[7] = b'X'; // "FRAMEARC" -> "FRAMEARX"
    fs::write(&paths[0], &bytes).unwrap();
    let err = framearc::read_header(&paths[0]).unwrap_err();
    assert!(matches!(err, FormatError::NotAFramearc { .. }), "{err}");
}

#[test]
fn wrong_version_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 1, 1, 0.1, &[(0, 1)], common::checker);
    let mut bytes = fs::read(&paths[0]).unwrap();
    bytes[8] = 2; // version u32 LE
    fs::write(&paths[0], &bytes).unwrap();
    let err = framearc::read_header(&paths[0]).unwrap_err();
    assert!(
        matches!(err, FormatError::UnsupportedVersion { version: 2, .. }),
        "{err}"
    );
}

#[test]
fn truncated_file_reports_expected_and_actual() {
    let dir = tempfile::tempdir().unwrap();
    // Header claims 10 frames; keep only 5 records on disk.
    let paths = common::write_split(dir.path(), 1, 10, 0.1, &[(0, 10)], common::checker);
    let bytes = fs::read(&paths[0]).unwrap();
    let keep = (HEADER_LEN + 5 * record_len(1)) as usize;
    fs::write(&paths[0], &bytes[..keep]).unwrap();
    let err = framearc::validate_manifest(&paths).unwrap_err();
    match err {
        FormatError::Truncated { expected, actual, .. } => {
            assert_eq!(expected, HEADER_LEN + 10 * record_len(1));
            assert_eq!(actual, keep as u64);
        }
        other => panic!("expected truncation error, got {other}"),
    }
}

#[test]
fn iteration_round_trips_every_float_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(
        dir.path(),
        4,
        7,
        0.01,
        &[(0, 3), (3, 2), (5, 2)],
        common::checker,
    );
    let manifest = framearc::validate_manifest(&paths).unwrap();
    let frames: Vec<_> = framearc::iter_frames(&manifest, (0, 7), None)
        .unwrap()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(frames.len(), 7);
    for (i, frame) in frames.iter().enumerate() {
        assert_eq!(frame.frame_index, i as u64);
        for c in 0..12 {
            // f32 -> f64 promotion is exact, so bit-compare after demotion.
            assert_eq!(frame.positions[c] as f32, common::checker(i as u64, c));
            assert_eq!(frame.velocities[c] as f32, -common::checker(i as u64, c));
        }
    }
}

#[test]
fn empty_window_yields_empty_stream() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 1, 4, 0.1, &[(0, 4)], common::checker);
    let manifest = framearc::validate_manifest(&paths).unwrap();
    let n = framearc::iter_frames(&manifest, (2, 2), None).unwrap().count();
    assert_eq!(n, 0);
}

#[test]
fn windowed_read_touches_only_needed_bytes() {
    let dir = tempfile::tempdir().unwrap();
    // Files covering [0,4) and [4,8); window [3,5) needs one record from
    // each file plus both headers.
    let paths = common::write_split(dir.path(), 2, 8, 0.1, &[(0, 4), (4, 4)], common::checker);
    let manifest = framearc::validate_manifest(&paths).unwrap();
    let counter = ByteCounter::new();
    let frames: Vec<u64> = framearc::iter_frames(&manifest, (3, 5), Some(counter.clone()))
        .unwrap()
        .map(|r| r.unwrap().frame_index)
        .collect();
    assert_eq!(frames, vec![3, 4]);
    let expected = 2 * HEADER_LEN as u64 + 2 * record_len(2);
    assert_eq!(counter.get(), expected);
}

#[test]
fn manifest_sorts_files_and_rejects_gaps_overlaps_and_mixed_grids() {
    let dir = tempfile::tempdir().unwrap();
    // Valid two-file dataset given in reverse order -> normalized.
    let mut paths = common::write_split(dir.path(), 1, 4, 0.1, &[(0, 2), (2, 2)], common::checker);
    paths.reverse();
    let manifest = framearc::validate_manifest(&paths).unwrap();
    assert_eq!(manifest.files[0].header.first_frame, 0);
    assert_eq!(manifest.files[1].header.first_frame, 2);

    // Gap at frame 2.
    let gap_dir = tempfile::tempdir().unwrap();
    let gap = common::write_split(gap_dir.path(), 1, 4, 0.1, &[(0, 2), (3, 1)], common::checker);
    let err = framearc::validate_manifest(&gap).unwrap_err();
    assert!(matches!(err, FormatError::ManifestInvalid { frame: 2, .. }), "{err}");

    // Overlap at frame 1.
    let ov_dir = tempfile::tempdir().unwrap();
    let ov = common::write_split(ov_dir.path(), 1, 4, 0.1, &[(0, 2), (1, 3)], common::checker);
    assert!(matches!(
        framearc::validate_manifest(&ov).unwrap_err(),
        FormatError::ManifestInvalid { .. }
    ));

    // Mixed grids.
    let mix_dir = tempfile::tempdir().unwrap();
    let mut a = common::write_split(mix_dir.path(), 2, 4, 0.1, &[(0, 2)], common::checker);
    let sub = mix_dir.path().join("b");
    std::fs::create_dir(&sub).unwrap();
    let b = common::write_split(&sub, 3, 4, 0.1, &[(2, 2)], common::checker);
    a.extend(b);
    assert!(matches!(
        framearc::validate_manifest(&a).unwrap_err(),
        FormatError::MixedDataset { field: "grid dimensions", .. }
    ));
}

#[test]
fn corrupted_record_index_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 1, 3, 0.1, &[(0, 3)], common::checker);
    let mut bytes = fs::read(&paths[0]).unwrap();
    // Overwrite the second record's frame_index (u64 at 84 + record_len).
    let off = (HEADER_LEN + record_len(1)) as usize;
    bytes[off..off + 8].copy_from_slice(&99u64.to_le_bytes());
    fs::write(&paths[0], &bytes).unwrap();
    let manifest = framearc::validate_manifest(&paths).unwrap();
    let result: Result<Vec<_>, _> = framearc::iter_frames(&manifest, (0, 3), None)
        .unwrap()
        .collect();
    assert!(matches!(
        result.unwrap_err(),
        FormatError::Corruption { expected: 1, actual: 99, .. }
    ));
}

#[test]
fn out_of_range_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_split(dir.path(), 1, 3, 0.1, &[(0, 3)], common::checker);
    let manifest = framearc::validate_manifest(&paths).unwrap();
    match framearc::iter_frames(&manifest, (1, 5), None) {
        Err(FormatError::WindowOutOfRange { lo: 1, hi: 5, total: 3 }) => {}
        Err(other) => panic!("wrong error: {other}"),
        Ok(_) => panic!("expected window error"),
    }
}

#[test]
fn full_iteration_over_three_files_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = seispost::synth::SynthConfig {
        frames: 6,
        ..common::synth_config()
    };
    let manifest = common::make_dataset(dir.path(), &cfg, 2);
    assert_eq!(manifest.files.len(), 3);
    let indices: Vec<u64> = framearc::iter_frames(&manifest, (0, 6), None)
        .unwrap()
        .map(|r| r.unwrap().frame_index)
        .collect();
    assert_eq!(indices, vec![0, 1, 2, 3, 4, 5]);
}
