//! Seeded synthetic datasets: an employee-records generator with mixed
//! column types and a pay rate skewed towards one demographic group, plus
//! small generators with and without a planted group bias.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Cell, ColumnSchema, TabularDataset};
use crate::error::Result;
use crate::rng;

/// Row count of the employee-records dataset.
pub const EMPLOYEE_ROWS: usize = 301;
pub const EMPLOYEE_SEED: u64 = 3;
/// Pay-rate cut points for the multiclass target.
pub const PAY_CUTS: [f64; 3] = [25.0, 40.0, 55.0];

fn pick<'a, R: Rng>(r: &mut R, items: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = items.iter().map(|i| i.1).sum();
    let mut u = r.random::<f64>() * total;
    for &(name, w) in items {
        if u < w {
            return name;
        }
        u -= w;
    }
    items.last().unwrap().0
}

struct Position {
    department: &'static str,
    title: &'static str,
    share: f64,
    base_pay: f64,
}

const POSITIONS: [Position; 14] = [
    Position {
        department: "Production",
        title: "Production Technician I",
        share: 0.36,
        base_pay: 19.0,
    },
    Position {
        department: "Production",
        title: "Production Technician II",
        share: 0.18,
        base_pay: 28.0,
    },
    Position {
        department: "Production",
        title: "Production Manager",
        share: 0.05,
        base_pay: 50.0,
    },
    Position {
        department: "IT/IS",
        title: "IT Support",
        share: 0.03,
        base_pay: 34.0,
    },
    Position {
        department: "IT/IS",
        title: "Network Engineer",
        share: 0.03,
        base_pay: 45.0,
    },
    Position {
        department: "IT/IS",
        title: "Database Administrator",
        share: 0.04,
        base_pay: 48.0,
    },
    Position {
        department: "IT/IS",
        title: "IT Manager",
        share: 0.02,
        base_pay: 62.0,
    },
    Position {
        department: "IT/IS",
        title: "Data Analyst",
        share: 0.04,
        base_pay: 40.0,
    },
    Position {
        department: "Software Engineering",
        title: "Software Engineer",
        share: 0.04,
        base_pay: 52.0,
    },
    Position {
        department: "Software Engineering",
        title: "Software Engineering Manager",
        share: 0.01,
        base_pay: 64.0,
    },
    Position {
        department: "Sales",
        title: "Area Sales Manager",
        share: 0.08,
        base_pay: 42.0,
    },
    Position {
        department: "Sales",
        title: "Sales Manager",
        share: 0.02,
        base_pay: 58.0,
    },
    Position {
        department: "Admin Offices",
        title: "Administrative Assistant",
        share: 0.06,
        base_pay: 22.0,
    },
    Position {
        department: "Admin Offices",
        title: "Accountant",
        share: 0.04,
        base_pay: 30.0,
    },
];

fn managers(department: &str) -> &'static [&'static str] {
    match department {
        "Production" => &[
            "Kelley Spirea",
            "Elijiah Gray",
            "Ketsia Liebig",
            "David Stanley",
            "Webster Butler",
        ],
        "IT/IS" => &["Simon Roup", "Peter Monroe", "Eric Dougall"],
        "Software Engineering" => &["Alex Sweetwater"],
        "Sales" => &["John Smith", "Lynn Daneault"],
        _ => &["Brandon LeBlanc", "Janet King"],
    }
}

fn employee_columns() -> Vec<ColumnSchema> {
    let mut cols = vec![
        ColumnSchema::categorical("Zipcode"),
        ColumnSchema::numeric("Age"),
        ColumnSchema::categorical("Gender"),
        ColumnSchema::categorical("MaritalDesc"),
        ColumnSchema::categorical("CitizenDesc"),
        ColumnSchema::categorical("HispanicLatino"),
        ColumnSchema::categorical("RaceDesc"),
        ColumnSchema::categorical("EmploymentStatus"),
        ColumnSchema::categorical("Department"),
        ColumnSchema::categorical("Position"),
        ColumnSchema::categorical("ManagerName"),
        ColumnSchema::categorical("PerformanceScore"),
        ColumnSchema::numeric("WorkExperience"),
        ColumnSchema::numeric("PayRate"),
    ];
    for name in [
        "Age",
        "Gender",
        "MaritalDesc",
        "CitizenDesc",
        "HispanicLatino",
        "RaceDesc",
    ] {
        cols.iter_mut().find(|c| c.name == name).unwrap().sensitive = true;
    }
    cols
}

/// Pay model of [`employee_records`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayModel {
    /// Added per year of work experience.
    pub experience_slope: f64,
    /// Standard deviation of the Gaussian pay noise for privileged rows.
    pub noise_sd: f64,
    /// Noise standard deviation for every other row.
    pub unprivileged_noise_sd: f64,
    /// Added for rows with `Gender = male` and `Age <= 40`.
    pub privileged_premium: f64,
    /// Subtracted for rows with `HispanicLatino = Yes`.
    pub hispanic_penalty: f64,
}

impl Default for PayModel {
    fn default() -> Self {
        Self {
            experience_slope: 0.35,
            noise_sd: 1.5,
            unprivileged_noise_sd: 7.5,
            privileged_premium: 3.0,
            hispanic_penalty: 4.0,
        }
    }
}

/// Employee records with a numeric `PayRate` target. Pay follows position
/// and experience. Rows with `Gender = male` and `Age <= 40` receive a
/// premium and their pay tracks the pay scale far more tightly than
/// everyone else's.
pub fn employee_records(n: usize, seed: u64) -> Result<TabularDataset> {
    employee_records_with(n, seed, &PayModel::default())
}

pub fn employee_records_with(n: usize, seed: u64, pay_model: &PayModel) -> Result<TabularDataset> {
    let mut columns = employee_columns();
    let mut r: ChaCha8Rng = rng::stream(seed, 0);
    let noise = Normal::new(0.0, 1.0).expect("unit sigma");
    let zipcodes: Vec<String> = (0..24).map(|i| format!("0{}", 1810 + 37 * i)).collect();
    let position_weights: Vec<(&str, f64)> = POSITIONS.iter().map(|p| (p.title, p.share)).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let title = pick(&mut r, &position_weights);
        let pos = POSITIONS.iter().find(|p| p.title == title).unwrap();
        let age = r.random_range(24..=66) as f64;
        let experience = (age - 22.0 - r.random_range(0.0..12.0)).max(0.0).round();
        let gender = pick(&mut r, &[("male", 0.44), ("female", 0.56)]);
        let hispanic = pick(&mut r, &[("No", 0.9), ("Yes", 0.1)]);
        let race = pick(
            &mut r,
            &[
                ("White", 0.6),
                ("Black or African American", 0.26),
                ("Asian", 0.1),
                ("Two or more races", 0.04),
            ],
        );
        let privileged = gender == "male" && age <= 40.0;
        let sd = if privileged {
            pay_model.noise_sd
        } else {
            pay_model.unprivileged_noise_sd
        };
        let mut pay =
            pos.base_pay + pay_model.experience_slope * experience + sd * noise.sample(&mut r);
        if privileged {
            pay += pay_model.privileged_premium;
        }
        if hispanic == "Yes" {
            pay -= pay_model.hispanic_penalty;
        }
        let pay = (pay.max(14.0) * 100.0).round() / 100.0;
        let manager_list = managers(pos.department);
        let manager = manager_list[r.random_range(0..manager_list.len())];
        let status = pick(
            &mut r,
            &[
                ("Active", 0.67),
                ("Voluntarily Terminated", 0.29),
                ("Terminated for Cause", 0.04),
            ],
        );
        let marital = pick(
            &mut r,
            &[
                ("Single", 0.45),
                ("Married", 0.4),
                ("Divorced", 0.1),
                ("Separated", 0.04),
                ("Widowed", 0.01),
            ],
        );
        let citizen = pick(
            &mut r,
            &[
                ("US Citizen", 0.95),
                ("Eligible NonCitizen", 0.04),
                ("Non-Citizen", 0.01),
            ],
        );
        let performance = pick(
            &mut r,
            &[
                ("Fully Meets", 0.78),
                ("Exceeds", 0.12),
                ("Needs Improvement", 0.06),
                ("PIP", 0.04),
            ],
        );
        let zip = &zipcodes[r.random_range(0..zipcodes.len())];
        let cats = [
            (0, zip.as_str()),
            (2, gender),
            (3, marital),
            (4, citizen),
            (5, hispanic),
            (6, race),
            (7, status),
            (8, pos.department),
            (9, title),
            (10, manager),
            (11, performance),
        ];
        let mut row = vec![Cell::Missing; columns.len()];
        for (c, level) in cats {
            row[c] = Cell::Cat(columns[c].intern(level));
        }
        row[1] = Cell::Num(age);
        row[12] = Cell::Num(experience);
        row[13] = Cell::Num(pay);
        rows.push(row);
    }
    let target = columns.len() - 1;
    TabularDataset::new(columns, rows, target)
}

/// Two numeric features, a sensitive group column and a label that depends
/// only on the features.
pub fn unbiased(n: usize, seed: u64) -> Result<TabularDataset> {
    let mut columns = vec![
        ColumnSchema::numeric("x1"),
        ColumnSchema::numeric("x2"),
        ColumnSchema::categorical("group"),
        ColumnSchema::categorical("label"),
    ];
    columns[2].sensitive = true;
    let mut r = rng::stream(seed, 1);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = r.random();
        let x2: f64 = r.random();
        let g = if r.random::<bool>() { "a" } else { "b" };
        let label = if x1 > 0.5 { "1" } else { "0" };
        let gc = columns[2].intern(g);
        let lc = columns[3].intern(label);
        rows.push(vec![
            Cell::Num(x1),
            Cell::Num(x2),
            Cell::Cat(gc),
            Cell::Cat(lc),
        ]);
    }
    TabularDataset::new(columns, rows, 3)
}

/// Like [`unbiased`], but the label follows the feature sharply for group
/// `a` and only noisily for group `b`, so classifiers recover positives of
/// group `a` far more reliably.
pub fn planted_bias(n: usize, seed: u64) -> Result<TabularDataset> {
    let mut columns = vec![
        ColumnSchema::numeric("x1"),
        ColumnSchema::numeric("x2"),
        ColumnSchema::categorical("group"),
        ColumnSchema::categorical("label"),
    ];
    columns[2].sensitive = true;
    let mut r = rng::stream(seed, 2);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = r.random();
        let x2: f64 = r.random();
        let privileged = r.random::<bool>();
        let positive = if privileged {
            x1 > 0.5
        } else {
            r.random::<f64>() < 0.5
        };
        let gc = columns[2].intern(if privileged { "a" } else { "b" });
        let lc = columns[3].intern(if positive { "1" } else { "0" });
        rows.push(vec![
            Cell::Num(x1),
            Cell::Num(x2),
            Cell::Cat(gc),
            Cell::Cat(lc),
        ]);
    }
    TabularDataset::new(columns, rows, 3)
}
