use crate::engine::ComparisonRow;
use crate::error::{fail, ErrorCode, Result};
use crate::measures::EvalMatrix;

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn write_rows(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header).expect("write to memory");
    for row in rows {
        writer.write_record(&row).expect("write to memory");
    }
    writer.into_inner().expect("flush to memory")
}

/// Long-format score table: one row per (run, measure, query) plus a mean
/// row with qid `ALL` closing each (run, measure) group.
/// (run_id, measure, per-query cells, mean)
type Group = (String, String, Vec<(String, f64)>, f64);

pub fn eval_table_csv(matrix: &EvalMatrix) -> Vec<u8> {
    let mut groups: Vec<Group> = Vec::new();
    for column in &matrix.columns {
        for (r, run_id) in matrix.run_ids.iter().enumerate() {
            let mut cells: Vec<(String, f64)> = column
                .eval_qids
                .iter()
                .cloned()
                .zip(column.scores[r].iter().copied())
                .collect();
            cells.sort_by(|a, b| a.0.cmp(&b.0));
            groups.push((run_id.clone(), column.measure.to_string(), cells, column.means[r]));
        }
    }
    groups.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let mut rows = Vec::new();
    for (run_id, measure, cells, mean) in groups {
        for (qid, score) in cells {
            rows.push(vec![run_id.clone(), measure.clone(), qid, fixed(score)]);
        }
        rows.push(vec![run_id, measure, "ALL".into(), fixed(mean)]);
    }
    write_rows(&["run_id", "measure", "qid", "score"], rows)
}

/// One row per baseline comparison.
pub fn significance_table_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return fail(ErrorCode::EmptyResults, "no comparisons to tabulate");
    }
    let records = rows
        .iter()
        .map(|r| {
            vec![
                r.baseline.clone(),
                r.comparison.clone(),
                r.measure.to_string(),
                method_name(r).to_owned(),
                fixed(r.test.statistic),
                fixed(r.test.p_value),
                fixed(r.adjusted_p),
                r.significant.to_string(),
            ]
        })
        .collect();
    Ok(write_rows(
        &["baseline", "comparison", "measure", "test", "statistic", "p", "adjusted_p", "significant"],
        records,
    ))
}

pub(crate) fn method_name(row: &ComparisonRow) -> &'static str {
    match row.test.method {
        crate::stats::TestMethod::TTest => "t_test",
        crate::stats::TestMethod::WilcoxonExact => "wilcoxon_exact",
        crate::stats::TestMethod::WilcoxonNormal => "wilcoxon_normal",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{evaluate, parse_measure_list, MissingQueryPolicy};
    use crate::trec_io::{QrelsStore, RunStore};

    fn matrix() -> EvalMatrix {
        let qrels = QrelsStore::from_triples([("q2", "a", 1), ("q1", "b", 1), ("q1", "c", 1)]);
        let runs = vec![
            RunStore::from_triples("z,run", [("q1", "b", 2.0), ("q1", "x", 1.0), ("q2", "a", 1.0)]),
            RunStore::from_triples("a", [("q1", "x", 2.0), ("q1", "c", 1.0)]),
        ];
        evaluate(&runs, &qrels, &parse_measure_list("P@2,AP").unwrap(), MissingQueryPolicy::ZeroFill).unwrap()
    }

    #[test]
    fn layout_and_order() {
        let text = String::from_utf8(eval_table_csv(&matrix())).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run_id,measure,qid,score");
        assert_eq!(lines.len(), 1 + 2 * 2 * 3);
        assert_eq!(lines[1], "a,AP,q1,0.250000");
        assert_eq!(lines[3], "a,AP,ALL,0.125000");
        assert_eq!(lines[4], "a,P@2,q1,0.500000");
        assert_eq!(lines[7], "\"z,run\",AP,q1,0.500000");
    }

    #[test]
    fn parses_back_at_six_decimals() {
        let m = matrix();
        let bytes = eval_table_csv(&m);
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        for rec in reader.records() {
            let rec = rec.unwrap();
            let spec = crate::measures::parse_measure_spec(&rec[1]).unwrap();
            let value: f64 = rec[3].parse().unwrap();
            let expected = if &rec[2] == "ALL" {
                m.mean(&rec[0], &spec).unwrap()
            } else {
                m.score(&rec[0], &spec, &rec[2]).unwrap()
            };
            assert!((value - expected).abs() <= 5e-7);
        }
    }

    #[test]
    fn empty_significance_table() {
        assert_eq!(significance_table_csv(&[]).unwrap_err().code, ErrorCode::EmptyResults);
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(fixed(0.95023437), "0.950234");
        assert_eq!(fixed(1.0), "1.000000");
    }
}
