//! Confusion matrix, per-class report and the comparison tables.

use octfeat::metrics::{self, ConfusionMatrix, ReportMetadata};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let classes: Vec<String> = ["CNV", "DME", "DRUSEN", "NORMAL"].map(String::from).to_vec();
    let truth: Vec<usize> = (0..40).map(|i| i / 10).collect();
    let hog: Vec<usize> = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| if i % 3 == 0 { (t + 1) % 4 } else { t })
        .collect();
    let lbp: Vec<usize> = truth.iter().map(|&t| if t == 1 { 0 } else { t }).collect();

    let mut reports = Vec::new();
    for (name, pred) in [("hog", &hog), ("lbp", &lbp)] {
        let cm = ConfusionMatrix::from_labels(&truth, pred, classes.clone())?;
        let r = metrics::report(&cm)?.with_metadata(ReportMetadata {
            feature_source: name.into(),
            ..ReportMetadata::default()
        });
        println!("== {name}\n{}", r.to_text());
        reports.push(r);
    }

    println!("{}", metrics::recall_comparison_csv(&reports)?);
    println!("{}", metrics::accuracy_comparison_csv(&reports)?);
    println!("json line: {}", &reports[0].to_json_line()[..80]);
    Ok(())
}
