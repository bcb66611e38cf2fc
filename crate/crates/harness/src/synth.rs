//! Census-style synthetic income table used as the bundled desk-scale
//! dataset.
//!
//! About 8% of rows are 17 years old; those rows are always negative and
//! share a narrow profile, which makes them a clean subgroup for the
//! domain-mismatch case study.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LABEL_COLUMN: &str = "income";
pub const POSITIVE_VALUE: &str = ">50K";
pub const DEFAULT_ROWS: usize = 2000;
pub const DEFAULT_SEED: u64 = 20;

/// The checked-in copy of `generate(DEFAULT_ROWS, DEFAULT_SEED)`.
pub const BUNDLED_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/adult_like.csv");

const HEADER: [&str; 8] = [
    "age",
    "workclass",
    "education_num",
    "marital_status",
    "sex",
    "hours_per_week",
    "capital_gain",
    LABEL_COLUMN,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub age: u32,
    pub workclass: &'static str,
    pub education_num: u32,
    pub marital_status: &'static str,
    pub sex: &'static str,
    pub hours_per_week: u32,
    pub capital_gain: u32,
    pub high_income: bool,
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[(&'a str, f64)]) -> &'a str {
    let mut u: f64 = rng.gen();
    for &(name, p) in items {
        if u < p {
            return name;
        }
        u -= p;
    }
    items[items.len() - 1].0
}

fn teenager(rng: &mut ChaCha8Rng) -> Person {
    Person {
        age: 17,
        workclass: "Private",
        education_num: rng.gen_range(6..=7),
        marital_status: "Never-married",
        sex: if rng.gen_bool(0.5) { "Male" } else { "Female" },
        hours_per_week: [15, 20, 25][rng.gen_range(0..3)],
        capital_gain: 0,
        high_income: false,
    }
}

fn adult(rng: &mut ChaCha8Rng) -> Person {
    let age = 18 + ((rng.gen::<f64>() + rng.gen::<f64>()) * 31.0) as u32;
    let workclass = pick(rng, &[("Private", 0.7), ("Self-emp", 0.12), ("Government", 0.18)]);
    let education_num = (rng.gen_range(1..=16) + rng.gen_range(7..=13)) / 2;
    let marital_status = if age < 23 {
        pick(rng, &[("Never-married", 0.9), ("Married", 0.1)])
    } else {
        pick(rng, &[("Married", 0.5), ("Never-married", 0.28), ("Divorced", 0.22)])
    };
    let sex = if rng.gen_bool(0.55) { "Male" } else { "Female" };
    let hours_per_week = (40.0 + (rng.gen::<f64>() - 0.5) * 40.0).round() as u32;
    let capital_gain = if rng.gen_bool(0.9) {
        0
    } else {
        rng.gen_range(1..200) * 100
    };

    let prime = age.min(55) as f64 - 18.0;
    let z = -4.0
        + 0.055 * prime
        + 0.42 * (education_num as f64 - 9.0)
        + 0.045 * (hours_per_week as f64 - 40.0)
        + if marital_status == "Married" { 1.9 } else { 0.0 }
        + if capital_gain > 5000 { 2.8 } else { 0.0 }
        + if sex == "Male" { 0.3 } else { 0.0 }
        + if workclass == "Self-emp" { 0.4 } else { 0.0 };
    // logistic noise at half scale on the latent score
    let u: f64 = rng.gen_range(1e-12..1.0 - 1e-12);
    let high_income = z + 0.5 * (u / (1.0 - u)).ln() > 0.0;
    Person {
        age,
        workclass,
        education_num,
        marital_status,
        sex,
        hours_per_week,
        capital_gain,
        high_income,
    }
}

pub fn generate(n: usize, seed: u64) -> Vec<Person> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.08) {
                teenager(&mut rng)
            } else {
                adult(&mut rng)
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(people: &[Person], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for p in people {
        w.write_record([
            p.age.to_string(),
            p.workclass.to_string(),
            p.education_num.to_string(),
            p.marital_status.to_string(),
            p.sex.to_string(),
            p.hours_per_week.to_string(),
            p.capital_gain.to_string(),
            if p.high_income { POSITIVE_VALUE } else { "<=50K" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(people: &[Person]) -> String {
    let mut buf = Vec::new();
    write_csv(people, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn teenagers_are_negative_and_frequent() {
        let people = generate(DEFAULT_ROWS, DEFAULT_SEED);
        let teens: Vec<&Person> = people.iter().filter(|p| p.age == 17).collect();
        assert!(teens.len() >= 120, "{}", teens.len());
        assert!(teens.iter().all(|p| !p.high_income));
        let pos = people.iter().filter(|p| p.high_income).count() as f64;
        let rate = pos / people.len() as f64;
        assert!((0.18..0.32).contains(&rate), "positive rate {rate}");
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(generate(50, 3), generate(50, 3));
        assert_ne!(generate(50, 3), generate(50, 4));
    }
}
