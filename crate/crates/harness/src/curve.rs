use std::collections::BTreeMap;

use serde::Serialize;

use crate::output::{num, Table};
use crate::svg;

/// One point of a per-method curve, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: String,
    pub x: f64,
    pub mean_y: f64,
    /// Sample standard deviation over seeds divided by `sqrt(seed_count)`;
    /// zero for a single seed.
    pub stderr_y: f64,
    pub seed_count: usize,
}

/// A per-seed measurement; `y = None` marks a missing point.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub method: String,
    pub x: f64,
    pub seed: u64,
    pub y: Option<f64>,
}

pub fn mean_stderr(ys: &[f64]) -> (f64, f64) {
    let n = ys.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = ys.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

/// Groups by `(method, x)`, keeping methods in first-seen order and `x`
/// ascending. Missing observations are skipped; a group with none present
/// is dropped.
pub fn aggregate(obs: &[Observation]) -> Vec<CurvePoint> {
    let mut order: Vec<&str> = vec![];
    let mut groups: BTreeMap<(usize, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for o in obs {
        let m = match order.iter().position(|&m| m == o.method) {
            Some(i) => i,
            None => {
                order.push(&o.method);
                order.len() - 1
            }
        };
        // x values are non-negative, so bit order is numeric order
        let entry = groups.entry((m, o.x.to_bits())).or_insert((o.x, vec![]));
        if let Some(y) = o.y {
            entry.1.push(y);
        }
    }
    groups
        .into_iter()
        .filter(|(_, (_, ys))| !ys.is_empty())
        .map(|((m, _), (x, ys))| {
            let (mean_y, stderr_y) = mean_stderr(&ys);
            CurvePoint {
                method: order[m].to_string(),
                x,
                mean_y,
                stderr_y,
                seed_count: ys.len(),
            }
        })
        .collect()
}

pub fn table(points: &[CurvePoint]) -> Table {
    let mut t = Table::new(&["method", "x", "mean_y", "stderr_y", "seed_count"]);
    for p in points {
        t.push(vec![
            p.method.clone(),
            num(p.x),
            num(p.mean_y),
            num(p.stderr_y),
            p.seed_count.to_string(),
        ]);
    }
    t
}

pub fn plot(title: &str, xlabel: &str, ylabel: &str, points: &[CurvePoint], dashed: &str) -> String {
    let mut series: Vec<svg::Series> = vec![];
    for p in points {
        if series.last().is_none_or(|s| s.name != p.method) {
            series.push(svg::Series {
                name: p.method.clone(),
                points: vec![],
                errors: Some(vec![]),
                dashed: p.method == dashed,
            });
        }
        let s = series.last_mut().expect("pushed above");
        s.points.push((p.x, p.mean_y));
        s.errors.as_mut().expect("set above").push(p.stderr_y);
    }
    svg::line_chart(title, xlabel, ylabel, &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ob(method: &str, x: f64, seed: u64, y: Option<f64>) -> Observation {
        Observation {
            method: method.into(),
            x,
            seed,
            y,
        }
    }

    #[test]
    fn stderr_is_sample_sd_over_root_n() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample sd = sqrt(5/3)
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn groups_by_method_and_x() {
        let obs = vec![
            ob("b", 0.5, 0, Some(1.0)),
            ob("a", 0.0, 0, Some(2.0)),
            ob("b", 0.0, 0, Some(3.0)),
            ob("b", 0.5, 1, Some(3.0)),
            ob("a", 0.0, 1, None),
            ob("a", 0.5, 1, None),
        ];
        let pts = aggregate(&obs);
        let keys: Vec<(&str, f64, usize)> =
            pts.iter().map(|p| (p.method.as_str(), p.x, p.seed_count)).collect();
        assert_eq!(keys, vec![("b", 0.0, 1), ("b", 0.5, 2), ("a", 0.0, 1)]);
        assert_eq!(pts[1].mean_y, 2.0);
    }
}
