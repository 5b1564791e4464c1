//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `--nocapture` to see the report on success too.

use std::time::{Duration, Instant};

use lilliput_dfa::attack::constraints::admits;
use lilliput_dfa::attack::model3::matches_branch;
use lilliput_dfa::attack::{
    identify_location, m1_update_rk28, m1_update_rk29, m2_recover_rk28, m2_update, m3_update, CandidateState,
};
use lilliput_dfa::campaign::{run_campaign, AttackModel, CampaignConfig, CampaignMode, CampaignStats};
use lilliput_dfa::cipher::{PERMUTATION, SBOX};
use lilliput_dfa::differential::truncated_trail;
use lilliput_dfa::key_schedule::subkey_system;
use lilliput_dfa::{
    compute_ddt, decrypt, encrypt, expand_key, faulty_encrypt, invert_subkeys, Anchor, CipherState, FaultSpec,
    MasterKey, PartialRoundKey, RoundKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x00C0_FFEE;
const TRIALS: u64 = 1 << 12;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, label: &str, detail: String) {
        let line = format!("[{}] {label}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((ok, line));
    }
}

fn victim(rng: &mut ChaCha8Rng) -> ([RoundKey; 30], CipherState, CipherState) {
    let rks = expand_key(&MasterKey::from_u128(rng.random()));
    let p = CipherState::from_u64(rng.random());
    let c = encrypt(&p, &rks).unwrap();
    (rks, p, c)
}

fn campaign(model: AttackModel, faults: usize, alloc: Option<(usize, usize)>, mode: CampaignMode) -> CampaignStats {
    let cfg = CampaignConfig {
        trials: TRIALS,
        allocation: alloc,
        seed: SEED,
        mode,
        ..CampaignConfig::new(model, faults)
    };
    let stats = run_campaign(&cfg).unwrap();
    println!("       {stats}");
    stats
}

fn within(rate: f64, target_pct: f64, tol_pp: f64) -> bool {
    (100.0 * rate - target_pct).abs() <= tol_pp
}

fn rate_detail(s: &CampaignStats, target: f64, tol: f64) -> String {
    format!(
        "{:.2}% (CI {:.2}..{:.2}) vs {target:.2} +/- {tol}",
        100.0 * s.rate,
        100.0 * s.ci_low,
        100.0 * s.ci_high
    )
}

fn data(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn tables(r: &mut Report) {
    let sbox_ok = SBOX == [4, 8, 7, 1, 9, 3, 2, 0xE, 0, 0xB, 6, 0xF, 0xA, 5, 0xD, 0xC];
    let pi_ok = PERMUTATION == [13, 9, 14, 8, 10, 11, 12, 15, 4, 5, 3, 1, 2, 6, 0, 7];
    let ddt = compute_ddt();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for line in data("ddt_reference.txt").lines().filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let a = u8::from_str_radix(it.next().unwrap(), 16).unwrap();
        for (b, v) in it.enumerate() {
            checked += 1;
            if ddt.get(a, b as u8) != v.parse::<u8>().unwrap() {
                mismatches.push(format!("({a:x},{b:x})"));
            }
        }
    }
    r.check(
        sbox_ok && pi_ok && checked == 256 && mismatches.is_empty(),
        "1 tables",
        format!(
            "sbox={sbox_ok} pi={pi_ok} ddt {checked} entries, {} mismatches {mismatches:?}",
            mismatches.len()
        ),
    );
}

fn cipher_soundness(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut round_trip_failures = 0;
    for _ in 0..10_000 {
        let (rks, p, c) = victim(&mut rng);
        if decrypt(&c, &rks).unwrap() != p {
            round_trip_failures += 1;
        }
    }
    let mut golden = 0;
    let mut golden_bad = Vec::new();
    for line in data("golden_vectors.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let f: Vec<&str> = line.split_whitespace().collect();
        let mk: MasterKey = f[0].parse().unwrap();
        let p = CipherState::from_u64(u64::from_str_radix(f[1], 16).unwrap());
        let c = encrypt(&p, &expand_key(&mk)).unwrap();
        golden += 1;
        if format!("{:016x}", c.to_u64()) != f[2] {
            golden_bad.push(f[0].to_owned());
        }
    }
    let zero = expand_key(&MasterKey::from_u128(0));
    let want: Vec<String> = data("zero_key_round_keys.txt")
        .split_whitespace()
        .map(str::to_owned)
        .collect();
    let got: Vec<String> = zero.iter().map(|k| format!("{:08x}", k.to_u32())).collect();
    r.check(
        round_trip_failures == 0 && golden_bad.is_empty() && golden > 0 && got == want,
        "2 cipher soundness",
        format!(
            "10^4 round trips, {round_trip_failures} failures; {golden} golden vectors, mismatched {golden_bad:?}; zero-key round keys match={}",
            got == want
        ),
    );
}

fn model1(r: &mut Report) {
    for (faults, alloc, target, tol) in [
        (8, (4, 4), 98.24, 2.0),
        (6, (3, 3), 91.34, 2.5),
        (6, (2, 4), 78.28, 3.0),
    ] {
        let s = campaign(AttackModel::I, faults, Some(alloc), CampaignMode::FixedBudget);
        r.check(
            within(s.rate, target, tol),
            &format!("3 model I budget {faults} alloc {},{}", alloc.0, alloc.1),
            rate_detail(&s, target, tol),
        );
    }
}

fn model2(r: &mut Report) {
    for (faults, target, tol) in [(8, 99.10, 1.5), (4, 81.53, 3.0)] {
        let s = campaign(AttackModel::II, faults, None, CampaignMode::FixedBudget);
        r.check(
            within(s.rate, target, tol),
            &format!("4 model II budget {faults}"),
            rate_detail(&s, target, tol),
        );
    }
    let s = campaign(AttackModel::II, 8, None, CampaignMode::Distribution);
    let freq = 100.0 * s.histogram_frequency(3) as f64 / s.trials as f64;
    let hist: Vec<String> = s
        .histogram
        .iter()
        .map(|h| format!("{}:{:.2}", h.fault_count, h.percentage))
        .collect();
    r.check(
        (freq - 51.0).abs() <= 4.0,
        "4 model II min-faults distribution at 3",
        format!("{freq:.2}% vs 51.00 +/- 4; histogram [{}]", hist.join(" ")),
    );
}

fn model3(r: &mut Report) {
    for (faults, target, tol) in [(33, 99.04, 1.5), (26, 95.30, 3.0)] {
        let s = campaign(AttackModel::III, faults, None, CampaignMode::FixedBudget);
        r.check(
            within(s.rate, target, tol),
            &format!("5 model III budget {faults}"),
            format!("{}; engine errors {}", rate_detail(&s, target, tol), s.engine_errors),
        );
    }
}

fn location_identification(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut wrong = [0u32; 7];
    for (b, w) in wrong.iter_mut().enumerate() {
        for _ in 0..1 << 14 {
            let (rks, p, c) = victim(&mut rng);
            let f = FaultSpec::new(27, b, rng.random_range(1..16)).unwrap();
            let dc = c.diff(&faulty_encrypt(&p, &rks, &f).unwrap());
            if !matches!(identify_location(&dc), Ok(v) if v.branch == b) {
                *w += 1;
            }
        }
    }
    r.check(
        wrong.iter().all(|&w| w == 0),
        "6 location identification, branches 0-6",
        format!("2^14 faults per branch, misidentified per branch {wrong:?}"),
    );
}

fn branch7_misidentification(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let n = 1u32 << 15;
    let mut wrong = 0u32;
    let mut per_pattern = [0u32; 7];
    for _ in 0..n {
        let (rks, p, c) = victim(&mut rng);
        let f = FaultSpec::new(27, 7, rng.random_range(1..16)).unwrap();
        let dc = c.diff(&faulty_encrypt(&p, &rks, &f).unwrap());
        if !matches!(identify_location(&dc), Ok(v) if v.branch == 7) {
            wrong += 1;
        }
        for (b, cnt) in per_pattern.iter_mut().enumerate() {
            if matches_branch(b, &dc) {
                *cnt += 1;
            }
        }
    }
    let frac = f64::from(wrong) / f64::from(n);
    let log = if wrong == 0 { f64::NEG_INFINITY } else { frac.log2() };
    r.check(
        frac < 2f64.powi(-12),
        "7 branch-7 misidentification",
        format!("{wrong}/{n} = 2^{log:.2} vs < 2^-12; pattern hits per branch 0-6 {per_pattern:?}"),
    );
}

fn key_schedule_inversion(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let (rks, p, c) = victim(&mut rng);
    let full = subkey_system(&[(29, rks[29].into()), (28, rks[28].into())]).unwrap();
    let rank = full.rank();
    let kernel = 80 - rank;
    r.check(
        rank == 60 && kernel == 20,
        "8 key-schedule constraint rank",
        format!("measured rank {rank}, kernel {kernel} vs expected 60 / 20"),
    );

    let anchor = Anchor {
        plaintext: p,
        ciphertext: c,
    };
    let start = Instant::now();
    let full_rec = invert_subkeys(&rks[29], &PartialRoundKey::from(rks[28]), &anchor);
    let partial = PartialRoundKey::from(rks[28]).without(3);
    let part_rec = invert_subkeys(&rks[29], &partial, &anchor);
    let elapsed = start.elapsed();
    let ok = |res: &lilliput_dfa::Result<lilliput_dfa::key_schedule::InversionOutcome>| matches!(res, Ok(o) if expand_key(&o.key) == rks);
    let desc = |res: &lilliput_dfa::Result<lilliput_dfa::key_schedule::InversionOutcome>| match res {
        Ok(o) => format!("rank {} kernel {} tried {}", o.rank, o.kernel_dim, o.tried),
        Err(e) => e.to_string(),
    };
    r.check(
        ok(&full_rec) && ok(&part_rec) && elapsed < Duration::from_secs(300),
        "8 key-schedule enumeration",
        format!(
            "full subkeys: {}; nibble 3 of RK28 unknown: {}; {:.2}s",
            desc(&full_rec),
            desc(&part_rec),
            elapsed.as_secs_f64()
        ),
    );
}

/// Counts updates after which a true subkey nibble left its mask.
fn soundness(r: &mut Report) {
    const TRIALS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let mut lost = [0u32; 3];
    let mut updates = [0u32; 3];

    for _ in 0..TRIALS {
        let (rks, p, c) = victim(&mut rng);
        let mut s = CandidateState::new();
        for _ in 0..4 {
            let f = FaultSpec::new(28, 7, rng.random_range(1..16)).unwrap();
            if m1_update_rk29(&c, &faulty_encrypt(&p, &rks, &f).unwrap(), &mut s).is_ok() {
                updates[0] += 1;
                lost[0] += u32::from(!admits(&s.rk29, &rks[29]));
            }
        }
        for _ in 0..4 {
            let f = FaultSpec::new(27, 7, rng.random_range(1..16)).unwrap();
            if m1_update_rk28(&c, &faulty_encrypt(&p, &rks, &f).unwrap(), &rks[29], &mut s).is_ok() {
                updates[0] += 1;
                lost[0] += u32::from(!admits(&s.rk28, &rks[28]));
            }
        }
    }

    // Index 1 is Model II (branch 7 only), index 2 Model III (random branch).
    for (m, faults) in [(1usize, 4usize), (2, 8)] {
        for _ in 0..TRIALS {
            let (rks, p, c) = victim(&mut rng);
            let mut s = CandidateState::new();
            for _ in 0..faults {
                let b = if m == 1 { 7 } else { rng.random_range(0..8) };
                let f = FaultSpec::new(27, b, rng.random_range(1..16)).unwrap();
                let cf = faulty_encrypt(&p, &rks, &f).unwrap();
                let res = if m == 1 {
                    m2_update(&c, &cf, &mut s)
                } else {
                    m3_update(&c, &cf, &mut s).map(|_| ())
                };
                if res.is_ok() {
                    updates[m] += 1;
                    lost[m] += u32::from(!admits(&s.rk29, &rks[29]));
                }
            }
            if m2_recover_rk28(&mut s, &rks[29]).is_ok() {
                updates[m] += 1;
                lost[m] += u32::from(!admits(&s.rk28, &rks[28]));
            }
        }
    }
    r.check(
        lost.iter().all(|&l| l == 0),
        "9 candidate-mask soundness",
        format!("10^4 trials per model; updates {updates:?}, true nibble lost {lost:?} (models I, II, III)"),
    );
}

fn branch_scan(r: &mut Report) {
    let key_rounds =
        |round: usize, branch: usize| truncated_trail(round, branch).iter().filter(|(r, _)| *r >= 28).count();
    let counts: Vec<usize> = (0..16).map(|b| key_rounds(28, b)).collect();
    let expected: Vec<usize> = (0..16)
        .map(|b| match b {
            0 => 2,
            1..=6 => 3,
            7 => 9,
            _ => 1,
        })
        .collect();
    let r27 = key_rounds(27, 7);
    r.check(
        counts == expected && r27 == 16,
        "10 branch-selection scan",
        format!("round-28 active S-boxes per branch {counts:?}; round-27 branch 7: {r27}"),
    );
}

#[test]
fn acceptance() {
    let mut r = Report { lines: Vec::new() };
    tables(&mut r);
    cipher_soundness(&mut r);
    model1(&mut r);
    model2(&mut r);
    model3(&mut r);
    location_identification(&mut r);
    branch7_misidentification(&mut r);
    key_schedule_inversion(&mut r);
    soundness(&mut r);
    branch_scan(&mut r);

    println!("\nacceptance summary:");
    for (_, line) in &r.lines {
        println!("  {line}");
    }
    let failed = r.lines.iter().filter(|(ok, _)| !ok).count();
    assert_eq!(failed, 0, "{failed} acceptance check(s) failed");
}
