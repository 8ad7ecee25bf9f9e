use std::fmt::Write as _;

use super::disentangle::DisentanglementReport;

/// Everything `eval` prints, in line-oriented `key=value` form.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub disentanglement: DisentanglementReport,
    pub cluster_accuracy: f64,
    /// Gaussian-fit approximation over the posterior means.
    pub tc_gaussian: f64,
    /// `m` continuous estimates then the discrete one.
    pub mi: Vec<f64>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.disentanglement;
        let _ = writeln!(out, "disentanglement_score={}", d.score);
        let _ = writeln!(out, "cluster_accuracy={}", self.cluster_accuracy);
        let _ = writeln!(out, "cluster_mapping=majority");
        let _ = writeln!(out, "tc_gaussian={}", self.tc_gaussian);
        let _ = writeln!(out, "tc_estimator=gaussian_fit_approximation");
        if let Some((discrete, continuous)) = self.mi.split_last() {
            for (j, v) in continuous.iter().enumerate() {
                let _ = writeln!(out, "mi_dim_{j}={v}");
            }
            let _ = writeln!(out, "mi_discrete={discrete}");
        }
        let dims: Vec<String> = d.surviving_dims.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "surviving_dims={}", dims.join(","));
        for w in &d.warnings {
            let _ = writeln!(out, "warning={w}");
        }
        out
    }
}

/// Vote matrix as CSV: one row per surviving dim, one column per factor.
pub fn vote_csv(report: &DisentanglementReport, factor_names: &[String]) -> String {
    let mut out = String::from("dim");
    for name in factor_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (dim, row) in report.surviving_dims.iter().zip(&report.vote_matrix) {
        let _ = write!(out, "{dim}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvalReport {
        EvalReport {
            disentanglement: DisentanglementReport {
                score: 0.75,
                vote_matrix: vec![vec![3, 1], vec![0, 4]],
                surviving_dims: vec![1, 5],
                full_data_variances: vec![1.0, 0.5],
                warnings: vec![],
            },
            cluster_accuracy: 0.9,
            tc_gaussian: 0.01,
            mi: vec![0.5, 0.0, 1.1],
        }
    }

    #[test]
    fn text_keys() {
        let text = sample().to_text();
        for key in ["disentanglement_score=0.75", "cluster_accuracy=0.9", "mi_dim_0=0.5", "mi_dim_1=0", "mi_discrete=1.1", "surviving_dims=1,5"] {
            assert!(text.lines().any(|l| l == key), "{key} missing from\n{text}");
        }
    }

    #[test]
    fn csv_layout() {
        let csv = vote_csv(&sample().disentanglement, &["shape".into(), "scale".into()]);
        assert_eq!(csv, "dim,shape,scale\n1,3,1\n5,0,4\n");
    }
}
