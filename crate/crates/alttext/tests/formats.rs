use alttext::formats::{self, AnnotationResult, IconRow, ResultStatus};
use alttext_core::{build_prompt, FineTuneRecord};
use proptest::prelude::*;

#[test]
fn hundred_finetune_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ft.jsonl");
    let records: Vec<FineTuneRecord> = (0..100)
        .map(|i| {
            let ctx = format!("{{\n  \"app activity name\": \"a.B{i}\"\n}}");
            let prompt = build_prompt(&format!("label {i}"), &ctx).unwrap();
            FineTuneRecord::new(&prompt, &format!("caption \"{i}\" \u{e9}")).unwrap()
        })
        .collect();
    formats::emit_finetune_file(&path, &records).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert_eq!(formats::read_finetune_file(&path).unwrap(), records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn icon_and_result_rows_round_trip(
        rows in proptest::collection::vec(("[a-z0-9_]{1,8}", "0(\\.[0-9]){0,4}", 0u32..2000, 0u32..2000, 1u32..300, 1u32..300), 0..6),
        texts in proptest::collection::vec(".{0,20}", 0..3),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let icons: Vec<IconRow> = rows
            .iter()
            .map(|(s, p, x, y, w, h)| IconRow {
                screen_id: s.clone(),
                node_path: p.clone(),
                x: *x,
                y: *y,
                w: *w,
                h: *h,
            })
            .collect();
        let path = dir.path().join("icons.csv");
        formats::write_icons(&path, &icons).unwrap();
        prop_assert_eq!(formats::read_icons(&path).unwrap(), icons.clone());

        let results: Vec<AnnotationResult> = icons
            .iter()
            .map(|r| AnnotationResult {
                icon_id: r.icon_id(),
                screen_id: r.screen_id.clone(),
                node_path: r.node_path.clone(),
                status: if r.w % 2 == 0 { ResultStatus::Ok } else { ResultStatus::Failed },
                icon_label: texts.first().cloned(),
                ocr_texts: texts.clone(),
                prompt: texts.get(1).cloned(),
                alt_text: texts.get(2).cloned(),
                error: None,
            })
            .collect();
        let path = dir.path().join("results.jsonl");
        formats::write_results(&path, &results).unwrap();
        prop_assert_eq!(formats::read_results(&path).unwrap(), results);
    }
}
