//! Regenerates the bundled two-wave epidemic fixture.
//!
//! ```text
//! cargo run -p fda-core --example make_fixture -- crates/core/fixtures
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const REGIONS: [(&str, u64); 16] = [
    ("dolnośląskie", 2_891_321),
    ("kujawsko-pomorskie", 2_061_942),
    ("lubelskie", 2_095_258),
    ("lubuskie", 1_007_145),
    ("łódzkie", 2_437_970),
    ("małopolskie", 3_410_441),
    ("mazowieckie", 5_425_028),
    ("opolskie", 976_774),
    ("podkarpackie", 2_121_229),
    ("podlaskie", 1_173_286),
    ("pomorskie", 2_346_671),
    ("śląskie", 4_492_330),
    ("świętokrzyskie", 1_224_626),
    ("warmińsko-mazurskie", 1_416_495),
    ("wielkopolskie", 3_496_450),
    ("zachodniopomorskie", 1_688_047),
];

const DAYS: u64 = 256;
const SEED: u64 = 20_201_023;

fn bump(day: f64, centre: f64, width: f64) -> f64 {
    let z = (day - centre) / width;
    (-0.5 * z * z).exp()
}

/// Count with roughly Poisson spread around `mean`.
fn noisy(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let z: f64 = StandardNormal.sample(rng);
    (mean + z * mean.max(0.0).sqrt()).round().max(0.0) as u64
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures".into()));
    std::fs::create_dir_all(&dir).expect("create fixture dir");
    let origin = NaiveDate::from_ymd_opt(2020, 10, 23).expect("valid date");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut population = String::from("region,population\n");
    for (region, pop) in REGIONS {
        writeln!(population, "{region},{pop}").unwrap();
    }

    let mut rows: Vec<(NaiveDate, String)> = Vec::new();
    for (region, pop) in REGIONS {
        let per = pop as f64 / 100_000.0;
        // Region-level shape of the autumn and spring waves.
        let a1 = rng.random_range(40.0..80.0);
        let c1 = rng.random_range(10.0..25.0);
        let w1 = rng.random_range(12.0..20.0);
        let a2 = rng.random_range(25.0..70.0);
        let c2 = rng.random_range(140.0..165.0);
        let w2 = rng.random_range(15.0..25.0);
        let fatality = rng.random_range(0.015..0.035);
        let hosp_ratio = rng.random_range(0.8..1.4);
        let icu_ratio = rng.random_range(0.06..0.12);
        let cases = |d: f64| 2.0 + a1 * bump(d, c1, w1) + a2 * bump(d, c2, w2);

        for k in 0..DAYS {
            let d = k as f64;
            let date = origin + Days::new(k);
            let weekday = if k % 7 == 2 || k % 7 == 3 { 0.7 } else { 1.0 };
            let positive = noisy(&mut rng, per * weekday * cases(d));
            let deaths = noisy(&mut rng, per * fatality * cases(d - 12.0));
            let recovered = noisy(&mut rng, per * 0.9 * cases(d - 14.0));
            let hosp_mean = hosp_ratio * (0..10).map(|lag| 0.1 * cases(d - 5.0 - lag as f64)).sum::<f64>();
            let hospitalized = noisy(&mut rng, per * hosp_mean);
            let critical = noisy(&mut rng, per * icu_ratio * hosp_mean);
            rows.push((
                date,
                format!("{date},{region},{positive},{deaths},{recovered},{hospitalized},{critical}"),
            ));
        }
    }
    rows.sort_by_key(|r| r.0);
    let mut data = String::from("date,region,positive_tests,deaths,recovered,hospitalized,critical\n");
    for (_, line) in rows {
        data.push_str(&line);
        data.push('\n');
    }

    std::fs::write(dir.join("epidemic.csv"), data).expect("write epidemic.csv");
    std::fs::write(dir.join("population.csv"), population).expect("write population.csv");
}
