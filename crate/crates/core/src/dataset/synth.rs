//! Desk-scale synthetic loan generator. Emits a Lending-Club-shaped table
//! whose default probability is a known logistic function of the generated
//! fields, so downstream explanations can be checked against ground truth.
//! The generating coefficients are returned (and saved) alongside the data.

use super::{Cell, ColumnKind, Dataset, Schema};
use crate::util::rng::Rng;
use crate::util::stats::sigmoid;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PURPOSES: [&str; 8] = [
    "car",
    "credit_card",
    "debt_consolidation",
    "home_improvement",
    "house",
    "medical",
    "small_business",
    "vacation",
];
const PURPOSE_WEIGHTS: [f64; 8] = [0.06, 0.22, 0.38, 0.10, 0.05, 0.07, 0.07, 0.05];
const RISKY_PURPOSES: [&str; 3] = ["house", "small_business", "vacation"];

/// Log-odds contributions of the generating process, plus the share of
/// rows carrying a positive recovery.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthCoefficients {
    pub intercept: f64,
    /// Fraction of rows with recoveries > 0.
    pub recoveries_rate: f64,
    /// Added when recoveries > 0 (post charge-off signal; deliberate
    /// leakage, mirroring the source data).
    pub recoveries_positive: f64,
    /// Scales (1 - total_pymnt / loan_amnt), so underpayment raises risk.
    pub payment_shortfall: f64,
    /// Scales (int_rate - 15) / 10.
    pub int_rate: f64,
    /// Added for 60-month terms.
    pub term_60: f64,
    /// Added for renters.
    pub rent: f64,
    /// Scales (dti - 18) / 10.
    pub dti: f64,
    /// Scales inquiry bucket index / 3.
    pub inquiries: f64,
    /// Added for house, small_business, and vacation loans.
    pub risky_purpose: f64,
    /// Added when income is not verified.
    pub not_verified: f64,
}

impl Default for SynthCoefficients {
    fn default() -> Self {
        SynthCoefficients {
            intercept: -2.3,
            recoveries_rate: 0.15,
            recoveries_positive: 2.6,
            payment_shortfall: 3.2,
            int_rate: 0.8,
            term_60: 0.35,
            rent: 0.2,
            dti: 0.3,
            inquiries: 0.35,
            risky_purpose: 0.5,
            not_verified: 0.25,
        }
    }
}

impl SynthCoefficients {
    /// A variant where the recoveries indicator is the single cleanest
    /// split (near-certain default when positive) while the remaining
    /// drivers still carry broad signal, for importance-contrast
    /// experiments.
    pub fn recoveries_dominant() -> Self {
        SynthCoefficients {
            intercept: -2.1,
            recoveries_rate: 0.15,
            recoveries_positive: 6.5,
            payment_shortfall: 3.4,
            int_rate: 1.2,
            term_60: 0.45,
            rent: 0.3,
            dti: 0.6,
            inquiries: 0.5,
            risky_purpose: 0.6,
            not_verified: 0.35,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rows: usize,
    pub seed: u64,
    pub coefficients: SynthCoefficients,
}

impl SynthConfig {
    pub fn new(rows: usize, seed: u64) -> Self {
        SynthConfig {
            rows,
            seed,
            coefficients: SynthCoefficients::default(),
        }
    }
}

/// Ground truth emitted next to the generated CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthTruth {
    pub rows: usize,
    pub seed: u64,
    pub coefficients: SynthCoefficients,
    pub default_rate: f64,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Generate `cfg.rows` synthetic loans. Requires at least 100 rows so both
/// outcome classes are effectively guaranteed.
pub fn generate_synthetic(cfg: &SynthConfig) -> (Dataset, SynthTruth) {
    assert!(cfg.rows >= 100, "synthetic generator needs n >= 100");
    let c = &cfg.coefficients;
    let mut rng = Rng::new(cfg.seed);

    let column_names: Vec<String> = [
        "loan_amnt",
        "funded_amnt",
        "annual_inc",
        "int_rate",
        "installment",
        "dti",
        "revol_util",
        "total_pymnt",
        "total_rec_int",
        "total_rec_prncp",
        "last_pymnt_amnt",
        "recoveries",
        "collection_recovery_fee",
        "grade",
        "term",
        "home_ownership",
        "purpose",
        "verification_status",
        "inq_last_6mths",
        "loan_status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let column_kinds = vec![
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Numeric,
        ColumnKind::Categorical,
        ColumnKind::Categorical,
        ColumnKind::Categorical,
        ColumnKind::Categorical,
        ColumnKind::Categorical,
        ColumnKind::Categorical,
        ColumnKind::Target,
    ];

    let mut rows = Vec::with_capacity(cfg.rows);
    let mut defaults = 0usize;
    for _ in 0..cfg.rows {
        let loan_amnt = 1000.0 + 25.0 * (rng.uniform() * 1560.0).floor();
        let funded_amnt = loan_amnt; // funded in full, as in the source data
        let annual_inc = round2((11.0 + 0.5 * rng.normal()).exp().clamp(12_000.0, 500_000.0));
        let int_rate = round2(5.0 + 26.0 * rng.uniform());
        let grade = match int_rate {
            r if r < 8.0 => "A",
            r if r < 11.0 => "B",
            r if r < 14.0 => "C",
            r if r < 17.0 => "D",
            r if r < 21.0 => "E",
            r if r < 25.0 => "F",
            _ => "G",
        };
        let term_60 = rng.uniform() >= 0.7;
        let term = if term_60 { "60 months" } else { "36 months" };
        let months = if term_60 { 60.0 } else { 36.0 };
        let dti = round2((18.0 + 8.0 * rng.normal()).clamp(0.0, 45.0));
        let revol_util = round2((50.0 + 25.0 * rng.normal()).clamp(0.0, 120.0));
        let monthly_rate = int_rate / 1200.0;
        let annuity =
            loan_amnt * monthly_rate / (1.0 - (1.0 + monthly_rate).powf(-months));
        let installment = round2(annuity * (1.0 + 0.1 * rng.normal()).max(0.5));
        let pay_ratio = (1.05 + 0.35 * rng.normal()).clamp(0.0, 1.8);
        let total_pymnt = round2(loan_amnt * pay_ratio);
        let int_share = (0.12 + int_rate / 100.0 * (months / 12.0) * 0.35
            + 0.05 * rng.normal())
        .clamp(0.02, 0.65);
        let total_rec_int = round2(total_pymnt * int_share);
        let total_rec_prncp = round2((total_pymnt - total_rec_int - rng.uniform() * 50.0).max(0.0));
        let recoveries = if rng.bernoulli(c.recoveries_rate) {
            round2(50.0 + rng.uniform() * 4950.0)
        } else {
            0.0
        };
        let collection_recovery_fee = round2(recoveries * 0.18 * (1.0 + 0.05 * rng.normal()));
        let last_pymnt_amnt = round2(total_pymnt * (0.02 + 0.2 * rng.uniform()));
        let home = match rng.uniform() {
            u if u < 0.40 => "RENT",
            u if u < 0.85 => "MORTGAGE",
            _ => "OWN",
        };
        let purpose = PURPOSES[rng.pick_weighted(&PURPOSE_WEIGHTS)];
        let verification = match rng.uniform() {
            u if u < 0.35 => "Not Verified",
            u if u < 0.70 => "Source Verified",
            _ => "Verified",
        };
        let inq_bucket = rng.pick_weighted(&[0.45, 0.3, 0.15, 0.1]);
        let inq = ["0", "1", "2", "3+"][inq_bucket];

        let z = c.intercept
            + c.recoveries_positive * f64::from(recoveries > 0.0)
            + c.payment_shortfall * (1.0 - pay_ratio)
            + c.int_rate * (int_rate - 15.0) / 10.0
            + c.term_60 * f64::from(term_60)
            + c.rent * f64::from(home == "RENT")
            + c.dti * (dti - 18.0) / 10.0
            + c.inquiries * inq_bucket as f64 / 3.0
            + c.risky_purpose * f64::from(RISKY_PURPOSES.contains(&purpose))
            + c.not_verified * f64::from(verification == "Not Verified");
        let default = rng.bernoulli(sigmoid(z));
        if default {
            defaults += 1;
        }
        let status = if default { "Charged Off" } else { "Fully Paid" };

        rows.push(vec![
            Cell::Num(loan_amnt),
            Cell::Num(funded_amnt),
            Cell::Num(annual_inc),
            Cell::Num(int_rate),
            Cell::Num(installment),
            Cell::Num(dti),
            Cell::Num(revol_util),
            Cell::Num(total_pymnt),
            Cell::Num(total_rec_int),
            Cell::Num(total_rec_prncp),
            Cell::Num(last_pymnt_amnt),
            Cell::Num(recoveries),
            Cell::Num(collection_recovery_fee),
            Cell::Cat(grade.to_string()),
            Cell::Cat(term.to_string()),
            Cell::Cat(home.to_string()),
            Cell::Cat(purpose.to_string()),
            Cell::Cat(verification.to_string()),
            Cell::Cat(inq.to_string()),
            Cell::Cat(status.to_string()),
        ]);
    }

    let truth = SynthTruth {
        rows: cfg.rows,
        seed: cfg.seed,
        coefficients: c.clone(),
        default_rate: defaults as f64 / cfg.rows as f64,
    };
    (
        Dataset {
            column_names,
            column_kinds,
            rows,
            target: None,
        },
        truth,
    )
}

/// Schema matching the generator's output, for round-tripping through CSV.
pub fn synthetic_schema() -> Schema {
    let mut map = BTreeMap::new();
    for name in [
        "loan_amnt",
        "funded_amnt",
        "annual_inc",
        "int_rate",
        "installment",
        "dti",
        "revol_util",
        "total_pymnt",
        "total_rec_int",
        "total_rec_prncp",
        "last_pymnt_amnt",
        "recoveries",
        "collection_recovery_fee",
    ] {
        map.insert(name.to_string(), ColumnKind::Numeric);
    }
    for name in [
        "grade",
        "term",
        "home_ownership",
        "purpose",
        "verification_status",
        "inq_last_6mths",
    ] {
        map.insert(name.to_string(), ColumnKind::Categorical);
    }
    map.insert("loan_status".to_string(), ColumnKind::Target);
    Schema(map)
}
