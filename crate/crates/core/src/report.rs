//! CSV renderings of evaluation reports and predictions.

use crate::metrics::{ConfusionMatrix, EvaluationReport};

pub const REPORT_HEADER: &str = "qwk,ms,mae,ccr,top2,top3,one_off,confusion";

/// Standard decimal rounded to 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Rows separated by `;`, counts within a row by spaces.
pub fn format_confusion(m: &ConfusionMatrix) -> String {
    m.rows()
        .iter()
        .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let qwk = report.qwk.map_or_else(|| "undefined".to_string(), sig6);
    format!(
        "{REPORT_HEADER}\n{qwk},{},{},{},{},{},{},{}\n",
        sig6(report.ms),
        sig6(report.mae),
        sig6(report.ccr),
        sig6(report.top2),
        sig6(report.top3),
        sig6(report.one_off),
        format_confusion(&report.confusion)
    )
}

/// Human-readable multi-line summary for terminals.
pub fn report_text(report: &EvaluationReport) -> String {
    let qwk = report.qwk.map_or_else(|| "undefined".to_string(), sig6);
    format!(
        "QWK {qwk}  MS {}  MAE {}  CCR {}  Top-2 {}  Top-3 {}  1-off {}\nconfusion: {}",
        sig6(report.ms),
        sig6(report.mae),
        sig6(report.ccr),
        sig6(report.top2),
        sig6(report.top3),
        sig6(report.one_off),
        format_confusion(&report.confusion)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.0 / 6.0), "0.166667");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123456789.0), "123457000");
        assert_eq!(sig6(-2.5e-7), "-0.00000025");
    }

    #[test]
    fn report_schema() {
        let confusion = ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]).unwrap();
        let r = EvaluationReport::from_confusion(confusion, 1.0, 1.0).unwrap();
        let csv = report_csv(&r);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        let row = lines.next().unwrap();
        assert!(row.ends_with(",2 1;0 3"));
        assert!(row.contains(",0.833333,"));
    }

    #[test]
    fn undefined_qwk_is_flagged() {
        let confusion = ConfusionMatrix::from_counts(vec![vec![4, 0], vec![0, 0]]).unwrap();
        let r = EvaluationReport::from_confusion(confusion, 1.0, 1.0).unwrap();
        assert!(report_csv(&r).lines().nth(1).unwrap().starts_with("undefined,"));
    }
}
