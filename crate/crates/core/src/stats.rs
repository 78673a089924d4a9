//! Repeated-measures ANOVA and paired t-tests.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, fabs, lgamma, log, sqrt};

use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Significance level used when none is given.
pub const DEFAULT_ALPHA: f64 = 0.05;

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction for the incomplete beta function, modified Lentz.
/// Stops when a convergent changes the value by less than `CF_EPS`
/// relatively, or after `CF_MAX_ITER` terms.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x.is_nan() || a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(F > f) of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f == f64::INFINITY {
        return 0.0;
    }
    clamp_p(inc_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))
}

/// Two-sided tail P(|T| > |t|) of Student's t distribution.
pub fn t_sf_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    clamp_p(inc_beta(df / 2.0, 0.5, df / (df + t * t)))
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TestResult {
    /// F or t.
    pub statistic: f64,
    pub df1: f64,
    /// Denominator degrees of freedom for F tests.
    pub df2: Option<f64>,
    pub p_value: f64,
    /// False when the p-value underflows (reported as 0).
    pub p_exact: bool,
    pub alpha: f64,
    pub significant: bool,
}

impl TestResult {
    fn new(
        statistic: f64,
        df1: f64,
        df2: Option<f64>,
        p_value: f64,
        p_exact: bool,
        alpha: f64,
    ) -> Self {
        Self {
            statistic,
            df1,
            df2,
            p_value,
            p_exact,
            alpha,
            significant: p_value < alpha,
        }
    }
}

/// Subjects × conditions matrix of one scalar per cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RepeatedMeasuresTable {
    subjects: Vec<String>,
    conditions: Vec<String>,
    /// Row-major, one row per subject.
    values: Vec<f64>,
}

impl RepeatedMeasuresTable {
    pub fn new(subjects: Vec<String>, conditions: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if subjects.len() < 2 || conditions.len() < 2 {
            return Err(Error::DegenerateDegreesOfFreedom);
        }
        let expected = subjects.len() * conditions.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "repeated-measures cells",
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("repeated-measures cell"));
        }
        Ok(Self {
            subjects,
            conditions,
            values,
        })
    }

    /// Builds a table from rows of per-condition values with generated labels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                what: "repeated-measures row",
                expected: k,
                got: bad.len(),
            });
        }
        let subjects = (0..rows.len())
            .map(|i| alloc::format!("s{}", i + 1))
            .collect();
        let conditions = (0..k).map(|j| alloc::format!("c{}", j + 1)).collect();
        Self::new(subjects, conditions, rows.concat())
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn get(&self, subject: usize, condition: usize) -> f64 {
        self.values[subject * self.conditions.len() + condition]
    }

    pub fn column(&self, condition: usize) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|i| self.get(i, condition))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AnovaOptions {
    pub alpha: f64,
    /// Apply the Greenhouse–Geisser sphericity correction.
    pub sphericity_correction: bool,
}

impl Default for AnovaOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            sphericity_correction: false,
        }
    }
}

/// Greenhouse–Geisser epsilon, within [1/(k−1), 1].
pub fn greenhouse_geisser_epsilon(table: &RepeatedMeasuresTable) -> f64 {
    let n = table.n_subjects();
    let k = table.n_conditions();
    let means: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| table.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = alloc::vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            let s: f64 = (0..n)
                .map(|i| (table.get(i, a) - means[a]) * (table.get(i, b) - means[b]))
                .sum();
            cov[a * k + b] = s / (n as f64 - 1.0);
        }
    }
    let row: Vec<f64> = (0..k)
        .map(|a| (0..k).map(|b| cov[a * k + b]).sum::<f64>() / k as f64)
        .collect();
    let grand = row.iter().sum::<f64>() / k as f64;
    let mut trace = 0.0;
    let mut sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            let v = cov[a * k + b] - row[a] - row[b] + grand;
            if a == b {
                trace += v;
            }
            sq += v * v;
        }
    }
    let lower = 1.0 / (k as f64 - 1.0);
    if !(sq > 0.0) {
        return 1.0;
    }
    (trace * trace / ((k as f64 - 1.0) * sq)).clamp(lower, 1.0)
}

/// One-way repeated-measures ANOVA across the table's conditions.
///
/// When the error sum of squares vanishes while condition means differ, F is
/// infinite and the p-value is reported as 0 with `p_exact = false`.
pub fn rm_anova(table: &RepeatedMeasuresTable, options: &AnovaOptions) -> Result<TestResult> {
    let n = table.n_subjects();
    let k = table.n_conditions();
    if n < 2 || k < 2 {
        return Err(Error::DegenerateDegreesOfFreedom);
    }
    let nf = n as f64;
    let kf = k as f64;
    let grand = table.values.iter().sum::<f64>() / (nf * kf);
    let cond_means: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| table.get(i, j)).sum::<f64>() / nf)
        .collect();
    let subj_means: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| table.get(i, j)).sum::<f64>() / kf)
        .collect();
    let ss_cond: f64 = nf
        * cond_means
            .iter()
            .map(|m| (m - grand) * (m - grand))
            .sum::<f64>();
    let mut ss_err = 0.0;
    let mut ss_total = 0.0;
    for i in 0..n {
        for j in 0..k {
            let x = table.get(i, j);
            let r = x - subj_means[i] - cond_means[j] + grand;
            ss_err += r * r;
            ss_total += (x - grand) * (x - grand);
        }
    }
    let df1 = kf - 1.0;
    let df2 = (kf - 1.0) * (nf - 1.0);
    let floor = 1e-24 * ss_total;
    let (df1, df2) = if options.sphericity_correction {
        let eps = greenhouse_geisser_epsilon(table);
        (df1 * eps, df2 * eps)
    } else {
        (df1, df2)
    };
    if ss_cond <= floor {
        return Ok(TestResult::new(
            0.0,
            df1,
            Some(df2),
            1.0,
            true,
            options.alpha,
        ));
    }
    if ss_err <= floor {
        return Ok(TestResult::new(
            f64::INFINITY,
            df1,
            Some(df2),
            0.0,
            false,
            options.alpha,
        ));
    }
    let f = (ss_cond / (kf - 1.0)) / (ss_err / ((kf - 1.0) * (nf - 1.0)));
    let p = f_sf(f, df1, df2);
    Ok(TestResult::new(
        f,
        df1,
        Some(df2),
        p,
        p > 0.0,
        options.alpha,
    ))
}

/// Two-sided paired t-test on `x − y`.
pub fn paired_t(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "paired samples",
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired sample"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let scale = d.iter().map(|v| v * v).sum::<f64>() / nf;
    if !(var > 1e-24 * scale) {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (sqrt(var) / sqrt(nf));
    let p = t_sf_two_sided(t, nf - 1.0);
    Ok(TestResult::new(t, nf - 1.0, None, p, p > 0.0, alpha))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
    Holm,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PairwiseResult {
    pub first: usize,
    pub second: usize,
    pub result: TestResult,
    /// p-value after multiplicity correction (equal to the raw value for
    /// [`Correction::None`]).
    pub adjusted_p: f64,
}

/// Paired t-tests for every pair of conditions, in lexicographic pair order.
pub fn posthoc_matrix(
    table: &RepeatedMeasuresTable,
    correction: Correction,
    alpha: f64,
) -> Result<Vec<PairwiseResult>> {
    let k = table.n_conditions();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let result = paired_t(&table.column(a), &table.column(b), alpha)?;
            out.push(PairwiseResult {
                first: a,
                second: b,
                result,
                adjusted_p: result.p_value,
            });
        }
    }
    let m = out.len() as f64;
    match correction {
        Correction::None => {}
        Correction::Bonferroni => {
            for r in &mut out {
                r.adjusted_p = (r.result.p_value * m).min(1.0);
            }
        }
        Correction::Holm => {
            let mut order: Vec<usize> = (0..out.len()).collect();
            order.sort_by(|&i, &j| out[i].result.p_value.total_cmp(&out[j].result.p_value));
            let mut running: f64 = 0.0;
            for (rank, &i) in order.iter().enumerate() {
                let adj = ((m - rank as f64) * out[i].result.p_value).min(1.0);
                running = running.max(adj);
                out[i].adjusted_p = running;
            }
        }
    }
    for r in &mut out {
        r.result.significant = r.adjusted_p < alpha;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn beta_edges() {
        assert_eq!(inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(inc_beta(2.0, 3.0, 1.0), 1.0);
        assert!((inc_beta(1.0, 1.0, 0.25) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn equal_columns() {
        let t = RepeatedMeasuresTable::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0], vec![2.0, 2.0]])
            .unwrap();
        let r = rm_anova(&t, &AnovaOptions::default()).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert_eq!(
            paired_t(&t.column(0), &t.column(1), 0.05),
            Err(Error::ZeroVariance)
        );
    }

    #[test]
    fn exact_shift_is_infinitely_significant() {
        let t = RepeatedMeasuresTable::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])
            .unwrap();
        let r = rm_anova(&t, &AnovaOptions::default()).unwrap();
        assert!(r.statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
        assert!(!r.p_exact && r.significant);
    }

    #[test]
    fn degenerate_tables() {
        assert!(RepeatedMeasuresTable::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(RepeatedMeasuresTable::from_rows(&[vec![1.0], vec![2.0]]).is_err());
        assert!(RepeatedMeasuresTable::from_rows(&[vec![1.0, 2.0], vec![2.0]]).is_err());
    }
}
