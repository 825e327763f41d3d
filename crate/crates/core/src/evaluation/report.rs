use super::MetricsReport;

/// Column headers of the accuracy table, in order.
pub const TABLE_COLUMNS: [&str; 7] = [
    "Exact Match",
    "Mean Error (km)",
    "Median Err. (km)",
    "Correct Country",
    "Correct Type",
    "Correct ADM1",
    "Acc@161km",
];

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.1}%", 100.0 * x))
}

fn km(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.1}"))
}

fn aligned(headers: &[String], values: &[String]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .zip(values)
        .map(|(h, v)| h.chars().count().max(v.chars().count()))
        .collect();
    let row = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    format!("{}\n{}\n", row(headers), row(values))
}

/// Plain-text report: the accuracy table, then abstention and recall rows.
pub fn format_table(m: &MetricsReport) -> String {
    let headers: Vec<String> = TABLE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let values = vec![
        pct(m.exact_match),
        km(m.mean_error_km),
        km(m.median_error_km),
        pct(m.correct_country),
        pct(m.correct_feature_class),
        pct(m.correct_adm1),
        pct(m.acc_at_161km),
    ];
    let mut out = aligned(&headers, &values);

    let mut headers = vec![
        "Records".to_string(),
        "Abstained".to_string(),
        "Impossible".to_string(),
        "Abstention recall".to_string(),
        "False abstention".to_string(),
    ];
    let mut values = vec![
        m.n_eval.to_string(),
        m.n_abstained.to_string(),
        m.n_impossible.to_string(),
        pct(m.abstention_recall),
        pct(m.abstention_false_rate),
    ];
    for (k, missing) in &m.recall_at_k {
        headers.push(format!("% missing@{k}"));
        values.push(pct(Some(*missing)));
    }
    out.push('\n');
    out.push_str(&aligned(&headers, &values));
    out
}
