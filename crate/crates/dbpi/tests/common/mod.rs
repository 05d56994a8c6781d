//! Synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use dbpi_core::adminframe::{AdminPeriod, AdminUnit, CRITERIA_PERIODS};
use dbpi_core::earlyest::PanelRecord;
use dbpi_core::editing::EditingRecord;
use dbpi_core::rng;
use dbpi_core::timedisagg::RotatingRecord;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use std::collections::BTreeMap;

/// Records whose raw value is wrong exactly when `z1 > cut`.
pub fn planted_editing(n: usize, cut: f64, seed: u64, stream: u64) -> (Vec<EditingRecord>, Vec<bool>) {
    let mut g = rng::stream(seed, stream);
    let mut recs = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for k in 0..n {
        let z1: f64 = g.random();
        let z2: f64 = g.random();
        let v = 20.0 + 80.0 * g.random::<f64>();
        let wrong = z1 > cut;
        let raw = if wrong { v * (1.5 + g.random::<f64>()) } else { v };
        recs.push(EditingRecord {
            id: format!("r{stream}-{k}"),
            weight: 1.0 + (k % 5) as f64,
            raw: Some(raw),
            validated: Some(v),
            aux: vec![z1, z2],
        });
        truth.push(wrong);
    }
    (recs, truth)
}

/// Monthly panel: unit level times a common index with idiosyncratic noise;
/// each unit reports once, on a random day in `1..=60`.
pub fn monthly_panel(units: usize, months: u32, seed: u64) -> Vec<PanelRecord> {
    let mut g = rng::stream(seed, 0);
    let level = LogNormal::new(3.0, 0.8).unwrap();
    let levels: Vec<f64> = (0..units).map(|_| level.sample(&mut g)).collect();
    let mut index = 1.0;
    let mut out = Vec::new();
    for m in 0..months {
        index *= 1.0 + 0.01 + 0.05 * g.sample::<f64, _>(StandardNormal);
        for (k, a) in levels.iter().enumerate() {
            let noise: f64 = g.sample(StandardNormal);
            let value = a * index * (1.0 + 0.15 * noise).max(0.05);
            let day = g.random_range(1..=60u32);
            out.push(PanelRecord {
                period: m,
                unit: format!("u{k:03}"),
                group: format!("g{}", k % 4),
                domain: if k % 2 == 0 { "north".into() } else { "south".into() },
                weight: 1.0,
                observations: vec![(day, value)],
                finalized: true,
            });
        }
    }
    out
}

pub struct AdminFixture {
    pub units: Vec<AdminUnit>,
    pub survey: usize,
    pub model: usize,
}

/// Background units that every criterion passes over, plus planted blocks
/// that trip exactly one criterion each and units with missing history.
pub fn admin_fixture(background: usize, planted: [usize; 6], gaps: usize) -> AdminFixture {
    const PATTERN: [f64; CRITERIA_PERIODS] = [-1.0, 0.0, 1.0, -1.0, 0.0, 1.0, -1.0, 0.0, 1.0];
    let mut units = Vec::new();
    let mut push = |id: String,
                    z: [f64; CRITERIA_PERIODS],
                    rel: [f64; CRITERIA_PERIODS],
                    w: [f64; CRITERIA_PERIODS],
                    size: f64| {
        let k = units.len();
        let periods = (0..CRITERIA_PERIODS)
            .map(|t| Some(AdminPeriod { weight: w[t], admin: Some(z[t] * (1.0 + rel[t])), survey: Some(z[t]) }))
            .collect();
        units.push(AdminUnit {
            id,
            domain: if k % 2 == 0 { "a".into() } else { "b".into() },
            in_frame: true,
            frame_size: size,
            x: vec![(k % 7) as f64],
            periods,
            current_admin: Some(z[0]),
        });
    };
    let wave = |base: f64, amp: f64| PATTERN.map(|s| base + amp * s);
    let two = [2.0; CRITERIA_PERIODS];
    for j in 0..background {
        let f = j as f64 / background as f64;
        push(format!("bg{j}"), wave(100.0, 1.0 + f), [0.01 + 0.01 * f; CRITERIA_PERIODS], two, 10.0);
    }
    let g = [0.015; CRITERIA_PERIODS];
    for j in 0..planted[0] {
        push(format!("impact{j}"), wave(1e5, 1.5), g, two, 10.0);
    }
    for j in 0..planted[1] {
        let mut w = two;
        let mut size = 10.0;
        if j % 2 == 0 {
            w[0] = 1.0;
        } else {
            size = 2e7;
        }
        push(format!("new{j}"), wave(100.0, 1.5), g, w, size);
    }
    for j in 0..planted[2] {
        push(format!("volatile{j}"), wave(100.0, 50.0), g, two, 10.0);
    }
    for j in 0..planted[3] {
        let mut rel = g;
        for t in [1, 3, 5, 7] {
            rel[t] = 0.9;
        }
        push(format!("unstable{j}"), wave(100.0, 1.5), rel, two, 10.0);
    }
    for j in 0..planted[4] {
        push(format!("biased{j}"), wave(100.0, 1.5), [2.0; CRITERIA_PERIODS], two, 10.0);
    }
    for j in 0..planted[5] {
        let mut rel = g;
        rel[4] = -1.0;
        push(format!("zero{j}"), wave(100.0, 1.5), rel, two, 10.0);
    }
    for j in 0..gaps {
        push(format!("gap{j}"), wave(100.0, 1.5), g, two, 10.0);
    }
    let first_gap = units.len() - gaps;
    for (j, u) in units[first_gap..].iter_mut().enumerate() {
        u.periods[2 + j % 5] = None;
    }
    let survey = planted.iter().sum::<usize>() + gaps;
    AdminFixture { units, survey, model: background }
}

/// Quarterly rotating sample; `week_of` decides the week from the
/// covariates and a uniform draw.
pub fn rotating_sample(
    quarters: u32,
    per_quarter: usize,
    seed: u64,
    week_of: impl Fn(&[f64], f64) -> u32,
) -> Vec<RotatingRecord> {
    let pi_by_stratum = [0.01, 0.02, 0.04, 0.08];
    let mut g = rng::stream(seed, 0);
    let mut out = Vec::new();
    for q in 0..quarters {
        for k in 0..per_quarter {
            let region = g.random_range(0..5u32);
            let stratum = g.random_range(0..4usize);
            let cov = vec![f64::from(region), stratum as f64];
            let week = week_of(&cov, g.random());
            let mut indicators = BTreeMap::new();
            indicators.insert("employed".to_string(), f64::from(u8::from(g.random::<f64>() < 0.6)));
            let mut categories = BTreeMap::new();
            categories.insert("sex".to_string(), if g.random::<bool>() { "m".to_string() } else { "f".to_string() });
            categories.insert("age".to_string(), ["young", "mid", "old"][g.random_range(0..3usize)].to_string());
            out.push(RotatingRecord {
                id: format!("q{q}-{k}"),
                quarter: q,
                pi_quarter: pi_by_stratum[stratum],
                week,
                covariates: cov,
                first_selection: true,
                domain: format!("region{region}"),
                respondent: g.random::<f64>() < 0.9,
                indicators,
                categories,
            });
        }
    }
    out
}

pub fn uniform_week(_: &[f64], u: f64) -> u32 {
    1 + (u * 13.0) as u32 % 13
}

/// Upper tail `P(X >= k)` of a Binomial(n, 1/2).
pub fn sign_test_p(k: usize, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut tail = 0.0;
    for i in 0..=n {
        if i > 0 {
            c = c * (n - i + 1) as f64 / i as f64;
        }
        if i >= k {
            tail += c;
        }
    }
    tail / 2f64.powi(n as i32)
}
