use std::fs;

use fmfgc::artifacts::emit_artifacts;
use fmfgc::format::{read_field, write_field, FieldArray, MAGIC};
use fmfgc::manifest::RunManifest;
use fmfgc::{run, Error};
use proptest::prelude::*;

proptest! {
    #[test]
    fn random_field_round_trips_bit_identically(
        shape in prop::collection::vec(1usize..6, 1..4),
        seed in any::<u64>(),
    ) {
        let len: usize = shape.iter().product();
        // Arbitrary bit patterns, NaN payloads and signed zeros included.
        let data: Vec<f64> = (0..len as u64)
            .map(|i| f64::from_bits(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(i as u32) ^ i))
            .collect();
        let field = FieldArray::new(shape, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        prop_assert_eq!(&back.shape, &field.shape);
        let bits = |f: &FieldArray| f.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&field));
    }
}

#[test]
fn header_layout() {
    let bytes = FieldArray::new(vec![2, 3], vec![0.5; 6]).unwrap().encode();
    assert_eq!(&bytes[..8], MAGIC);
    assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
    assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
    assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
    assert_eq!(&bytes[20..28], &0.5f64.to_le_bytes());
    assert_eq!(bytes.len(), 20 + 48);
}

#[test]
fn truncated_file_names_byte_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.bin");
    let bytes = FieldArray::new(vec![4], vec![1.0; 4]).unwrap().encode();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    match read_field(&path).unwrap_err() {
        Error::Format { message, .. } => {
            assert!(message.contains("expected 48 bytes"), "{message}");
            assert!(message.contains("found 45"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    fs::write(&path, b"NOTMAGIC\0\0\0\0").unwrap();
    assert!(read_field(&path)
        .unwrap_err()
        .to_string()
        .contains("bad magic"));
}

#[test]
fn solve_artifacts_have_one_row_per_time_level() {
    let mut m = RunManifest::named("small");
    m.grid.n = 32;
    m.grid.steps = 40;
    let sol = run::solve(&m).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = emit_artifacts(&sol, &run::model(&m).unwrap(), &m, dir.path()).unwrap();
    assert!(written.iter().all(|p| p.exists()));

    let mut reader = csv::Reader::from_path(dir.path().join("diagnostics.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "step");
    assert!(headers.iter().any(|h| h == "mass"));
    assert_eq!(reader.records().count(), m.grid.steps + 1);

    let u = read_field(&dir.path().join("u.bin")).unwrap();
    assert_eq!(u.shape, vec![41, 32]);
    assert_eq!(&u.data[40 * 32..], sol.hjb.value(40).values());
    let alpha = read_field(&dir.path().join("alpha.bin")).unwrap();
    assert_eq!(alpha.shape, vec![41, 32, 1]);

    let echoed = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert_eq!(fmfgc::parse_config(&echoed).unwrap(), m);

    let stored = run::load_equilibrium(&m, dir.path()).unwrap();
    assert_eq!(stored.densities.len(), 41);
    let drift = sol.drift(&run::model(&m).unwrap()).unwrap();
    assert_eq!(stored.drift.get(7).values(), drift.get(7).values());
}
