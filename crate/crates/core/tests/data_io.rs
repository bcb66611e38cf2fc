use leafrep::data::{inject_domain_mismatch, load_csv, CsvOptions};
use leafrep::Error;
use std::io::Write;

fn write_csv(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

#[test]
fn loads_mixed_columns_from_disk() {
    let f = write_csv("age,work,hours,income\n17,private,20,<=50K\n45,gov,40,>50K\n33,private,50,>50K\n");
    let d = load_csv(f.path(), "income", ">50K", &CsvOptions::default()).unwrap();
    assert_eq!(d.feature_names(), ["age", "work=gov", "work=private", "hours"]);
    assert_eq!(d.labels(), [-1, 1, 1]);
    assert_eq!(d.row(0), [17.0, 0.0, 1.0, 20.0]);
}

#[test]
fn missing_file_reports_path() {
    let err = load_csv("/nonexistent/x.csv", "y", "1", &CsvOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/x.csv"));
}

#[test]
fn mismatch_injection_keeps_and_flips_subgroup() {
    let mut body = String::from("age,y\n");
    for i in 0..60 {
        let age = if i < 20 { 17 } else { 30 + i };
        let y = if i < 20 { 0 } else { i % 2 };
        body.push_str(&format!("{age},{y}\n"));
    }
    let f = write_csv(&body);
    let d = load_csv(f.path(), "y", "1", &CsvOptions::default()).unwrap();
    let (out, rec) = inject_domain_mismatch(&d, "age", 17.5, 8, 5, 3).unwrap();
    assert_eq!(out.n_rows(), 48);
    let young: Vec<usize> = (0..out.n_rows()).filter(|&i| out.value(i, 0) < 17.5).collect();
    assert_eq!(young.len(), 8);
    let pos = young.iter().filter(|&&i| out.label(i) == 1).count();
    assert_eq!(pos, 5);
    assert_eq!(rec.n_flipped(), 5);
    assert!((rec.fraction - 5.0 / 48.0).abs() < 1e-15);
    assert!(out.row_ids().windows(2).all(|w| w[0] < w[1]));
    assert!(inject_domain_mismatch(&d, "age", 17.5, 21, 5, 3).is_err());
    assert!(inject_domain_mismatch(&d, "missing", 17.5, 8, 5, 3).is_err());
}
