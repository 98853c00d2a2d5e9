use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ActivityError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentRow {
    pub pre: f64,
    pub post: f64,
    pub improvement: f64,
}

/// Pre/post improvement summary for one group of students.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub group: String,
    pub students: Vec<StudentRow>,
    pub n: usize,
    pub mean_improvement: f64,
    /// Students whose post-test score fell below their pre-test.
    pub regressed: usize,
}

fn in_range(what: &str, value: f64) -> Result<f64, ActivityError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ActivityError::OutOfRangeScore { what: what.to_string(), value })
    }
}

pub fn cohort_report(groups: &[(String, Vec<(f64, f64)>)]) -> Result<Vec<CohortReport>, ActivityError> {
    groups
        .iter()
        .map(|(label, scores)| {
            let students = scores
                .iter()
                .enumerate()
                .map(|(i, &(pre, post))| {
                    let pre = in_range(&format!("{label}[{i}].pre"), pre)?;
                    let post = in_range(&format!("{label}[{i}].post"), post)?;
                    Ok(StudentRow { pre, post, improvement: (post - pre).clamp(-1.0, 1.0) })
                })
                .collect::<Result<Vec<_>, ActivityError>>()?;
            let n = students.len();
            let mean_improvement =
                if n == 0 { 0.0 } else { students.iter().map(|s| s.improvement).sum::<f64>() / n as f64 };
            let regressed = students.iter().filter(|s| s.improvement < 0.0).count();
            Ok(CohortReport { group: label.clone(), students, n, mean_improvement, regressed })
        })
        .collect()
}

/// Chart data: one `group,student_index,pre,post,improvement` row per student.
pub fn write_chart_csv<W: Write>(reports: &[CohortReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "student_index", "pre", "post", "improvement"])?;
    for r in reports {
        for (i, s) in r.students.iter().enumerate() {
            w.write_record([
                r.group.clone(),
                i.to_string(),
                s.pre.to_string(),
                s.post.to_string(),
                s.improvement.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
