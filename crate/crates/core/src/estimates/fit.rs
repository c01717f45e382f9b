use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// One sample of an inequality `lhs <= C * sum(rhs_terms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub experiment: String,
    pub preset: String,
    pub h: f64,
    pub d: f64,
    pub r: usize,
    pub p: usize,
    pub seed: u64,
    pub lhs: f64,
    pub rhs_terms: Vec<(String, f64)>,
    /// `lhs / sum(rhs_terms)`; 0 when both vanish.
    pub ratio: f64,
    /// Auxiliary measurements that are not part of the inequality.
    pub diagnostics: Vec<(String, f64)>,
}

impl EstimateRecord {
    pub fn new(experiment: &str, lhs: f64, rhs_terms: Vec<(String, f64)>) -> Result<EstimateRecord> {
        let rhs: f64 = rhs_terms.iter().map(|(_, v)| v).sum();
        if !lhs.is_finite() || rhs_terms.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("{experiment}: lhs = {lhs}, rhs terms = {rhs_terms:?}")));
        }
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs > 0.0 {
            lhs / rhs
        } else {
            return Err(Error::Data(format!("{experiment}: lhs = {lhs} with vanishing right-hand side")));
        };
        Ok(EstimateRecord {
            experiment: experiment.to_string(),
            preset: String::new(),
            h: 0.0,
            d: 0.0,
            r: 0,
            p: 0,
            seed: 0,
            lhs,
            rhs_terms,
            ratio,
            diagnostics: Vec::new(),
        })
    }

    pub fn rhs(&self) -> f64 {
        self.rhs_terms.iter().map(|(_, v)| v).sum()
    }

    pub fn rhs_term(&self, name: &str) -> Option<f64> {
        self.rhs_terms.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub(crate) fn with_params(mut self, preset: &str, h: f64, d: f64, r: usize, p: usize) -> EstimateRecord {
        self.preset = preset.to_string();
        self.h = h;
        self.d = d;
        self.r = r;
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> EstimateRecord {
        self.seed = seed;
        self
    }

    pub(crate) fn diag(mut self, name: &str, value: f64) -> EstimateRecord {
        self.diagnostics.push((name.to_string(), value));
        self
    }
}

/// Summary of a family of records.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Largest observed ratio.
    pub c_emp: f64,
    /// Least-squares exponent of `log y` against `log x`, if defined.
    pub slope: Option<f64>,
    /// Half-width of the 95% confidence interval of the slope.
    pub slope_ci: Option<f64>,
    pub samples: usize,
}

/// Least-squares fit of `log y = a + s log x`. Returns `(s, ci95, a)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Data("log-log fit needs positive finite data".into()));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Samples(format!("{} distinct abscissae, need 3", distinct.len())));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Samples(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((slope, t * se, intercept))
}

/// `C_emp = max ratio`; the slope regresses `log lhs` on `log x(record)`
/// and is left undefined with fewer than three distinct abscissae.
pub fn fit_constant(records: &[EstimateRecord], x: impl Fn(&EstimateRecord) -> f64) -> Result<FitResult> {
    if records.is_empty() {
        return Err(Error::Samples("no records".into()));
    }
    if let Some(bad) = records.iter().find(|r| !r.ratio.is_finite()) {
        return Err(Error::Data(format!("non-finite ratio in {} record", bad.experiment)));
    }
    let c_emp = records.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let xs: Vec<f64> = records.iter().map(&x).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.lhs).collect();
    let (slope, slope_ci) = match loglog_fit(&xs, &ys) {
        Ok((s, ci, _)) => (Some(s), Some(ci)),
        Err(Error::Samples(_)) | Err(Error::Data(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(FitResult { c_emp, slope, slope_ci, samples: records.len() })
}

/// Kendall rank correlation `tau-b`, which accounts for ties.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (xs[i] - xs[j]).signum() * ((xs[i] != xs[j]) as i32 as f64);
            let b = (ys[i] - ys[j]).signum() * ((ys[i] != ys[j]) as i32 as f64);
            match (a == 0.0, b == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                _ if a * b > 0.0 => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let denom = (((conc + disc + tx) * (conc + disc + ty)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (conc - disc) as f64 / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(lhs: f64, rhs: f64, h: f64) -> EstimateRecord {
        let mut r = EstimateRecord::new("t", lhs, vec![("rhs".into(), rhs)]).unwrap();
        r.h = h;
        r
    }

    #[test]
    fn single_record() {
        let f = fit_constant(&[rec(2.0, 1.0, 0.1)], |r| r.h).unwrap();
        assert_eq!(f.c_emp, 2.0);
        assert_eq!(f.slope, None);
    }

    #[test]
    fn constant_and_power_data() {
        let hs = [0.125, 0.0625, 0.03125];
        let flat: Vec<_> = hs.iter().map(|&h| rec(1.0, 1.0, h)).collect();
        let f = fit_constant(&flat, |r| r.h).unwrap();
        assert_eq!(f.c_emp, 1.0);
        assert!(f.slope.unwrap().abs() < 1e-14);
        let sq: Vec<_> = hs.iter().map(|&h| rec(h * h, 1.0, h)).collect();
        let f = fit_constant(&sq, |r| r.h).unwrap();
        assert!((f.slope.unwrap() - 2.0).abs() < 1e-12);
        assert!(f.slope_ci.unwrap() < 1e-10);
    }

    #[test]
    fn duplicated_abscissae() {
        assert!(matches!(loglog_fit(&[0.5, 0.5, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Samples(_))));
    }

    #[test]
    fn confidence_interval_uses_student_t() {
        let (s, ci, _) = loglog_fit(&[1.0, 2.0, 4.0], &[1.0, 2.2, 3.9]).unwrap();
        assert!(s > 0.9 && s < 1.1);
        // one degree of freedom: t = 12.706
        let lx = [0.0f64, 2f64.ln(), 4f64.ln()];
        let ly = [0.0f64, 2.2f64.ln(), 3.9f64.ln()];
        let a = ly.iter().sum::<f64>() / 3.0 - s * lx.iter().sum::<f64>() / 3.0;
        let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - a - s * x).powi(2)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - lx.iter().sum::<f64>() / 3.0).powi(2)).sum();
        assert!((ci / (sse / sxx).sqrt() - 12.706).abs() < 1e-3);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 0.0);
        let t = kendall_tau(&[1.0, 1.0, 2.0, 2.0], &[1.0, 3.0, 2.0, 4.0]);
        assert!((t - 2.0 / 24f64.sqrt()).abs() < 1e-12, "{t}");
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(EstimateRecord::new("t", 0.0, vec![("a".into(), 0.0)]).unwrap().ratio, 0.0);
        assert!(EstimateRecord::new("t", 1.0, vec![("a".into(), 0.0)]).is_err());
        assert!(EstimateRecord::new("t", f64::NAN, vec![("a".into(), 1.0)]).is_err());
    }
}
