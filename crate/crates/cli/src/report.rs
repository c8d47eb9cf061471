//! Plain-text metric tables.

use std::fmt::Write;

use mealscope_core::evaluate::truncate_decimals;
use mealscope_core::{BiteReport, EvalReport, SubjectReport};

fn t3(x: f64) -> String {
    format!("{:.3}", truncate_decimals(x, 3))
}

pub fn bite_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a BiteReport)>) -> String {
    let mut out = format!(
        "{:<10} {:>6} {:>6} {:>6} {:>9} {:>7} {:>6}\n",
        "subject", "TP", "FP", "FN", "precision", "recall", "F1"
    );
    for (name, r) in rows {
        let c = r.confusion;
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>6} {:>9} {:>7} {:>6}",
            name,
            c.tp,
            c.fp,
            c.fn_,
            t3(r.precision),
            t3(r.recall),
            t3(r.f1)
        );
    }
    out
}

pub fn meal_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a EvalReport)>) -> String {
    let mut out = format!(
        "{:<10} {:>9} {:>7} {:>11} {:>6} {:>8} {:>8} {:>7} {:>5}\n",
        "subject", "precision", "recall", "specificity", "F1", "accuracy", "w. acc.", "Jaccard", "ratio"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>7} {:>11} {:>6} {:>8} {:>8} {:>7} {:>5.1}",
            name,
            t3(r.precision),
            t3(r.recall),
            t3(r.specificity),
            t3(r.f1),
            t3(r.accuracy),
            t3(r.weighted_accuracy),
            t3(r.jaccard),
            r.ratio
        );
    }
    out
}

/// Bite and meal tables over folds followed by the pooled row.
pub fn loso_tables(folds: &[SubjectReport], pooled: &SubjectReport) -> String {
    let all = || folds.iter().chain(std::iter::once(pooled));
    let mut out = String::new();
    let bites: Vec<_> = all()
        .filter_map(|r| r.bites.as_ref().map(|b| (r.subject.as_str(), b)))
        .collect();
    if !bites.is_empty() {
        out.push_str("bites\n");
        out.push_str(&bite_table(bites));
    }
    let meals: Vec<_> = all()
        .filter_map(|r| r.meals.as_ref().map(|m| (r.subject.as_str(), m)))
        .collect();
    if !meals.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str("meals\n");
        out.push_str(&meal_table(meals));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use mealscope_core::BiteConfusion;

    #[test]
    fn values_are_truncated() {
        let r = BiteReport::from_confusion(BiteConfusion {
            tp: 1231,
            fp: 102,
            fn_: 101,
        });
        let table = bite_table([("all", &r)]);
        let row = table.lines().nth(1).unwrap();
        assert!(row.ends_with("0.923   0.924  0.923"), "{row}");
    }
}
