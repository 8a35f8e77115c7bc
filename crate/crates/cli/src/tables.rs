//! Reading back the comma-separated result tables.

use compact_tik::experiment::{fit_rate, mean_std, AggregateRow, RateFit};

use crate::CliError;

/// Header plus rows of a comma-separated table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Invalid("table is empty".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(CliError::Invalid(format!(
                    "table row {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Invalid(format!("table has no `{name}` column")))
    }

    fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<f64>().map_err(|_| CliError::Invalid(format!("row {}: `{}` is not a number", i + 2, r[c])))
            })
            .collect()
    }

    fn strings(&self, name: &str) -> Result<Vec<String>, CliError> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }

    pub fn is_aggregate(&self) -> bool {
        self.header.iter().any(|h| h == "mean_error")
    }
}

fn push_unique<T: PartialEq + Clone>(list: &mut Vec<T>, v: &T) {
    if !list.contains(v) {
        list.push(v.clone());
    }
}

/// Aggregate rows from either table kind. For a results table the best
/// error over alpha is taken per `(method, delta, seed)` and averaged over
/// seeds; rows whose error is not finite are skipped.
pub fn aggregate_rows(table: &Table) -> Result<Vec<AggregateRow>, CliError> {
    let methods = table.strings("method")?;
    let deltas = table.floats("delta")?;
    if table.is_aggregate() {
        let means = table.floats("mean_error")?;
        let stds = table.floats("std_error")?;
        return Ok((0..methods.len())
            .map(|i| AggregateRow {
                method: methods[i].clone(),
                delta: deltas[i],
                mean_error: means[i],
                std_error: stds[i],
                n_ok: 1,
            })
            .collect());
    }

    let seeds = table.strings("seed")?;
    let errors = table.floats("error")?;
    let mut method_order = Vec::new();
    for m in &methods {
        push_unique(&mut method_order, m);
    }
    let mut out = Vec::new();
    for m in &method_order {
        let mut delta_order = Vec::new();
        for i in 0..methods.len() {
            if &methods[i] == m {
                push_unique(&mut delta_order, &deltas[i]);
            }
        }
        for d in &delta_order {
            let mut best: Vec<(String, f64)> = Vec::new();
            for i in 0..methods.len() {
                if &methods[i] != m || deltas[i] != *d || !errors[i].is_finite() {
                    continue;
                }
                match best.iter_mut().find(|(s, _)| *s == seeds[i]) {
                    Some(entry) => entry.1 = entry.1.min(errors[i]),
                    None => best.push((seeds[i].clone(), errors[i])),
                }
            }
            if best.is_empty() {
                continue;
            }
            let vals: Vec<f64> = best.iter().map(|b| b.1).collect();
            let (mean, std) = mean_std(&vals);
            out.push(AggregateRow { method: m.clone(), delta: *d, mean_error: mean, std_error: std, n_ok: vals.len() });
        }
    }
    Ok(out)
}

/// Per-method log-log fit of mean error against delta, in order of first
/// appearance.
pub fn fit_methods(rows: &[AggregateRow]) -> Vec<(String, Option<RateFit>)> {
    let mut order = Vec::new();
    for r in rows {
        push_unique(&mut order, &r.method);
    }
    order
        .into_iter()
        .map(|m| {
            let (d, e): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.method == m).map(|r| (r.delta, r.mean_error)).unzip();
            let fit = fit_rate(&d, &e).ok();
            (m, fit)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_checks_width() {
        let t = Table::parse("a,b\n1,2\n\n3,4\n").unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(Table::parse("a,b\n1\n").is_err());
        assert!(Table::parse("").is_err());
    }

    #[test]
    fn best_alpha_then_mean_over_seeds() {
        let text = "delta,seed,alpha,error,snr_db,method\n\
                    0.1,1,0.01,5,20,tikhonov\n\
                    0.1,1,0.1,3,20,tikhonov\n\
                    0.1,2,0.01,4,20,tikhonov\n\
                    0.1,2,0.1,NaN,20,tikhonov\n\
                    0.01,1,0.01,1,40,tikhonov\n";
        let rows = aggregate_rows(&Table::parse(text).unwrap()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].delta, rows[0].mean_error, rows[0].std_error, rows[0].n_ok), (0.1, 3.5, 0.5, 2));
        assert_eq!((rows[1].delta, rows[1].mean_error), (0.01, 1.0));
    }

    #[test]
    fn aggregate_table_passthrough() {
        let text = "delta,mean_error,std_error,method\n0.1,2,0.1,nn\n0.01,1,0.05,nn\n";
        let rows = aggregate_rows(&Table::parse(text).unwrap()).unwrap();
        let fits = fit_methods(&rows);
        assert_eq!(fits.len(), 1);
        assert!((fits[0].1.unwrap().slope - 2f64.log10()).abs() < 1e-12);
    }
}
