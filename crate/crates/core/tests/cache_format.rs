//! The embedding cache as seen by the exporter: a fixture written with
//! Python's `struct` module, and a byte-level encoder written independently
//! of the library.

use blm_core::embed::{load_table, save_table, EmbedError, EmbeddingTable, Pooling, HEADER_LEN};

const FIXTURE: &[u8] = include_bytes!("fixtures/exporter_mean_dim3.blme");

fn encode(dim: u32, pooling: u8, entries: &[(&str, &[f32])]) -> Vec<u8> {
    let mut b = b"BLME".to_vec();
    b.extend(1u32.to_le_bytes());
    b.extend(dim.to_le_bytes());
    b.push(pooling);
    b.extend((entries.len() as u64).to_le_bytes());
    for (text, v) in entries {
        b.extend((text.len() as u32).to_le_bytes());
        b.extend(text.as_bytes());
        for x in *v {
            b.extend(x.to_le_bytes());
        }
    }
    b
}

#[test]
fn python_written_cache_loads() {
    let t = EmbeddingTable::from_bytes(FIXTURE).unwrap();
    assert_eq!(t.dim(), 3);
    assert_eq!(t.pooling(), Pooling::Mean);
    assert_eq!(t.len(), 2);
    assert_eq!(t.get("The mat rolled into a pillow.").unwrap(), &[0.5, -1.25, 2.0]);
    // Decomposed input finds the NFC key the exporter wrote.
    assert_eq!(t.get("The cafe\u{301} baked  the bread.").unwrap(), &[1e-3, 0.0, -3.5]);
    assert_eq!(t.to_bytes(), FIXTURE);
}

#[test]
fn library_output_matches_independent_encoder() {
    let mut t = EmbeddingTable::new(2, Pooling::FirstToken).unwrap();
    t.insert("  The dough   rose. ", vec![1.0, -0.0]).unwrap();
    t.insert("Ein Bär.", vec![f32::MIN_POSITIVE, 7.5]).unwrap();
    let expected = encode(2, 1, &[("The dough rose.", &[1.0, -0.0]), ("Ein Bär.", &[f32::MIN_POSITIVE, 7.5])]);
    assert_eq!(t.to_bytes(), expected);
    assert_eq!(HEADER_LEN, 21);
}

#[test]
fn file_round_trip_and_pooling_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (code, pooling) in [(0u8, Pooling::Synthetic), (1, Pooling::FirstToken), (2, Pooling::Mean)] {
        let bytes = encode(1, code, &[("A.", &[0.25])]);
        let t = EmbeddingTable::from_bytes(&bytes).unwrap();
        assert_eq!(t.pooling(), pooling);
        let path = dir.path().join(format!("c{code}.blme"));
        save_table(&t, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
        assert_eq!(load_table(&path).unwrap(), t);
    }
    assert!(matches!(EmbeddingTable::from_bytes(&encode(1, 3, &[])), Err(EmbedError::UnknownPooling(3))));
}

#[test]
fn damaged_files_are_rejected() {
    let mut wrong_version = FIXTURE.to_vec();
    wrong_version[4] = 2;
    assert!(matches!(EmbeddingTable::from_bytes(&wrong_version), Err(EmbedError::VersionMismatch { found: 2 })));
    assert!(matches!(EmbeddingTable::from_bytes(&FIXTURE[..FIXTURE.len() - 1]), Err(EmbedError::TruncatedFile)));
    assert!(matches!(EmbeddingTable::from_bytes(b"BLMX"), Err(EmbedError::BadMagic(_))));
}
