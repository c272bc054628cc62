use crossplat_core::corpus::{Availability, CommentRecord, Dataset, DatasetId, Label, LanguageCode, Platform, Registry};
use crossplat_core::report::{render_stats_table, Format};

/// 1,892 records: 705 hate and 1,182 non-hate labeled, 5 unlabeled.
fn ey1_like() -> Dataset {
    let id = DatasetId::new("EY1").unwrap();
    let en = LanguageCode::new("en").unwrap();
    let records = (0..1892u64)
        .map(|i| {
            let label = match i {
                0..=704 => Some(Label::Hate),
                705..=1886 => Some(Label::NonHate),
                _ => None,
            };
            CommentRecord::new(id.clone(), Platform::YouTube, en.clone(), i, format!("comment number {i}"), label, vec![])
        })
        .collect();
    Dataset::from_records(id, en, Platform::YouTube, Availability::Partial, None, records)
}

#[test]
fn stats_row_matches_fixture_figures() {
    let mut registry = Registry::new();
    registry.register(ey1_like()).unwrap();
    let stats = registry.stats().unwrap();
    assert_eq!(stats.len(), 1);
    assert_eq!(stats[0].size, 1892);
    assert!((stats[0].hate_fraction * 100.0 - 37.36).abs() < 0.005);

    let csv = render_stats_table(&stats, Format::Csv);
    assert_eq!(csv, "ID,Language,Platform,Size,% Hate\nEY1,en,YouTube,1892,37.36\n");
    let md = render_stats_table(&stats, Format::Markdown);
    assert!(md.contains("| EY1 | en | YouTube | 1892 | 37.36 |"), "{md}");
}

#[test]
fn duplicate_registration_is_rejected() {
    let mut registry = Registry::new();
    registry.register(ey1_like()).unwrap();
    assert!(registry.register(ey1_like()).is_err());
}

#[test]
fn canonical_file_round_trip_preserves_stats() {
    let dir = tempfile::tempdir().unwrap();
    ey1_like().write_canonical(&dir.path().join("EY1.ds")).unwrap();
    let registry = Registry::load_dir(dir.path()).unwrap();
    let stats = registry.stats().unwrap();
    assert_eq!(stats[0].size, 1892);
    assert_eq!(render_stats_table(&stats, Format::Csv).lines().nth(1), Some("EY1,en,YouTube,1892,37.36"));
}
