#![allow(dead_code)]

use std::path::{Path, PathBuf};

use neurop::domain::{Exam, FibreType, NerveId, NerveStudy, SegmentMeasurements, Side};

pub fn kb_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("kb")
}

pub fn sample_exam_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample_exam.json")
}

/// Copy of the shipped KB in a temporary directory, for mutation.
pub fn kb_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(kb_dir()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

pub fn edit(dir: &Path, file: &str, f: impl FnOnce(String) -> String) {
    let path = dir.join(file);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(path, f(text)).unwrap();
}

/// A motor segment whose level-1 diagnosis is normal or severe axonal.
pub fn motor_segment(index: u8, affected: bool) -> SegmentMeasurements {
    let amplitude = Some(if affected { 1.2 } else { 7.5 });
    if index == 1 {
        SegmentMeasurements {
            index,
            amplitude,
            distal_latency: Some(3.4),
            ..Default::default()
        }
    } else {
        SegmentMeasurements {
            index,
            amplitude,
            amplitude_ratio: Some(0.95),
            velocity: Some(55.0),
            ..Default::default()
        }
    }
}

/// A motor nerve study whose chain of segment states is `bits`.
pub fn motor_nerve(name: &str, side: Side, bits: &[u8]) -> NerveStudy {
    NerveStudy {
        nerve: NerveId::new(name, side, FibreType::Motor),
        segments: bits
            .iter()
            .enumerate()
            .map(|(i, b)| motor_segment(i as u8 + 1, *b == 1))
            .collect(),
    }
}

pub fn exam(nerves: Vec<NerveStudy>) -> Exam {
    Exam {
        patient_id: "test".into(),
        nerves,
    }
}

pub const LEFT: Side = Side::Left;
pub const RIGHT: Side = Side::Right;
