//! File format round trips.

use proptest::prelude::*;
use safescreen::io::{format_csv, format_mask, parse_csv, parse_libsvm, parse_mask, Format};
use safescreen_core::{Dataset, Matrix, ProblemKind, SampleMask};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20),
        labels_seed in any::<u64>(),
        classification in any::<bool>(),
    ) {
        let n = rows.len();
        let kind = if classification { ProblemKind::Classification } else { ProblemKind::Regression };
        let labels: Vec<f64> = (0..n)
            .map(|i| {
                let bit = (labels_seed >> (i % 64)) & 1 == 1;
                match (classification, bit) {
                    (true, true) => 1.0,
                    (true, false) => -1.0,
                    (false, _) => rows[i][0] * 0.5 - 3.0,
                }
            })
            .collect();
        let data = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, kind, None).unwrap();
        let back = parse_csv(&format_csv(&data), kind, None).unwrap();
        prop_assert_eq!(back.n(), n);
        for i in 0..n {
            prop_assert!(close(back.labels()[i], data.labels()[i]));
            for (u, v) in back.features().row(i).iter().zip(data.features().row(i)) {
                prop_assert!(close(*u, *v));
            }
        }
    }

    #[test]
    fn mask_round_trip(keep in prop::collection::vec(any::<bool>(), 0..50), scale in -1e3f64..1e3) {
        let scores = keep.iter().enumerate().map(|(i, _)| scale * i as f64 / 7.0).collect();
        let mask = SampleMask { keep, scores };
        prop_assert_eq!(parse_mask(&format_mask(&mask)).unwrap(), mask);
    }
}

#[test]
fn mask_lines_are_flag_then_score() {
    let mask = SampleMask { keep: vec![false, true], scores: vec![0.25, -3.0] };
    let text = format_mask(&mask);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["0 0.25", "1 -3.0"]);
}

#[test]
fn libsvm_and_csv_agree() {
    let csv = "0.5,0,2,1\n0,-1,0,0\n";
    let svm = "1 1:0.5 3:2\n0 2:-1\n";
    let a = parse_csv(csv, ProblemKind::Classification, None).unwrap();
    let b = parse_libsvm(svm, ProblemKind::Classification, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.labels(), &[1.0, -1.0]);
}

#[test]
fn libsvm_rejects_bad_indices() {
    for bad in ["1 0:1", "1 1:1 1:2", "1 a:1", "1 1-2"] {
        assert!(parse_libsvm(bad, ProblemKind::Classification, None).is_err(), "{bad}");
    }
}

#[test]
fn format_names() {
    assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    assert_eq!("libsvm".parse::<Format>().unwrap(), Format::Libsvm);
    assert!("arff".parse::<Format>().is_err());
}
