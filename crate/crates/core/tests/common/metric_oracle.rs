use minority_ids::metrics::EvalReport;

/// Independent recount of every report field from the raw label pairs.
pub fn matches_naive_recount(report: &EvalReport, predicted: &[usize], truth: &[usize], k: usize) -> bool {
    let n = truth.len();
    let pairs: Vec<(usize, usize)> = predicted.iter().copied().zip(truth.iter().copied()).collect();
    let count = |f: &dyn Fn(usize, usize) -> bool| pairs.iter().filter(|&&(p, t)| f(p, t)).count();
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut f1s = Vec::new();
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for c in 0..k {
        let tp = count(&|p, t| p == c && t == c);
        let fp = count(&|p, t| p == c && t != c);
        let fn_ = count(&|p, t| p != c && t == c);
        let tn = count(&|p, t| p != c && t != c);
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let m = &report.classes[c];
        if (m.tp, m.fp, m.fn_, m.tn, m.support) != (tp, fp, fn_, tn, tp + fn_)
            || m.precision != precision
            || m.recall != recall
            || m.f1 != f1
        {
            return false;
        }
        for p in 0..k {
            if report.confusion[c][p] != count(&|pp, t| pp == p && t == c) {
                return false;
            }
        }
        f1s.push(f1);
        precisions.push(precision);
        recalls.push(recall);
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    report.total == n
        && report.accuracy == div(count(&|p, t| p == t), n)
        && report.macro_f1 == mean(&f1s)
        && report.macro_precision == mean(&precisions)
        && report.macro_recall == mean(&recalls)
}
