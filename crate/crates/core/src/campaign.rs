//! Seeded Monte-Carlo campaigns over the three attacks.
//!
//! Trial `t` draws everything (key, plaintext, faults) from a ChaCha8 stream
//! keyed by the campaign seed with stream id `t`, so results do not depend on
//! how trials are spread over worker threads.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::model2::update_branch7;
use crate::attack::model3::update_detailed;
use crate::attack::{
    m1_update_rk28, m1_update_rk29, m2_recover_rk28, m3_finalize, recover_master_key, CandidateState, TraceLine,
};
use crate::cipher::{encrypt_from, CipherState, RoundKey, ROUNDS};
use crate::differential::NibbleSet;
use crate::error::{parse_err, Error, Result};
use crate::fault::{faulty_encrypt, sample_fault, FaultModel, FaultSpec};
use crate::key_schedule::{expand_key, Anchor, InversionOutcome, MasterKey};

pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;
pub const DEFAULT_TRIALS: u64 = 1 << 12;
/// Environment variable that overrides [`DEFAULT_SEED`] in the CLI.
pub const SEED_ENV_VAR: &str = "LILLIPUT_DFA_SEED";

/// Seed in decimal or `0x`-prefixed hex.
pub fn parse_seed(s: &str) -> Result<u64> {
    let t = s.trim();
    match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    }
    .map_err(|e| parse_err("seed", s, e.to_string()))
}

/// `$LILLIPUT_DFA_SEED` if set, else [`DEFAULT_SEED`].
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(v) => parse_seed(&v),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Nibble of `RK^28` the random-location attack leaves to key enumeration.
pub const MODEL3_SKIPPED_RK28: [usize; 1] = [3];

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum AttackModel {
    /// Round-28 then round-27 faults at branch 7.
    I,
    /// Round-27 faults at branch 7.
    II,
    /// Round-27 faults at a random branch in `0..=7`.
    III,
}

impl AttackModel {
    pub fn number(self) -> u8 {
        match self {
            AttackModel::I => 1,
            AttackModel::II => 2,
            AttackModel::III => 3,
        }
    }

    fn skipped_rk28(self) -> &'static [usize] {
        match self {
            AttackModel::III => &MODEL3_SKIPPED_RK28,
            _ => &[],
        }
    }
}

impl TryFrom<u8> for AttackModel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(AttackModel::I),
            2 => Ok(AttackModel::II),
            3 => Ok(AttackModel::III),
            _ => Err(Error::InvalidConfig(format!("model must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<AttackModel> for u8 {
    fn from(m: AttackModel) -> u8 {
        m.number()
    }
}

impl fmt::Display for AttackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for AttackModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "i" => Ok(AttackModel::I),
            "2" | "ii" => Ok(AttackModel::II),
            "3" | "iii" => Ok(AttackModel::III),
            _ => Err(Error::InvalidConfig(format!(
                "unknown model {s:?} (expected 1, 2 or 3)"
            ))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignMode {
    /// Inject exactly the budget, then test for unique subkeys.
    #[default]
    FixedBudget,
    /// Inject one fault at a time until the subkeys are unique (budget is the cap)
    /// and record how many were needed.
    Distribution,
}

impl FromStr for CampaignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed-budget" => Ok(CampaignMode::FixedBudget),
            "distribution" | "min-faults" => Ok(CampaignMode::Distribution),
            _ => Err(Error::InvalidConfig(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for CampaignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CampaignMode::FixedBudget => "fixed-budget",
            CampaignMode::Distribution => "distribution",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub model: AttackModel,
    pub trials: u64,
    pub fault_budget: usize,
    /// Faults for `RK^29` and for `RK^28`; fixed-budget Model I only.
    pub allocation: Option<(usize, usize)>,
    pub seed: u64,
    pub mode: CampaignMode,
}

impl CampaignConfig {
    pub fn new(model: AttackModel, fault_budget: usize) -> Self {
        CampaignConfig {
            model,
            trials: DEFAULT_TRIALS,
            fault_budget,
            allocation: None,
            seed: DEFAULT_SEED,
            mode: CampaignMode::FixedBudget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        if self.fault_budget == 0 {
            return Err(Error::InvalidConfig("fault budget must be positive".into()));
        }
        match (self.model, self.mode, self.allocation) {
            (AttackModel::I, CampaignMode::FixedBudget, None) => Err(Error::InvalidConfig(
                "model 1 needs an allocation a,b with a + b = faults".into(),
            )),
            (AttackModel::I, CampaignMode::FixedBudget, Some((a, b))) => {
                if a == 0 || b == 0 || a + b != self.fault_budget {
                    Err(Error::InvalidConfig(format!(
                        "allocation {a},{b} must be two positive counts summing to {}",
                        self.fault_budget
                    )))
                } else {
                    Ok(())
                }
            }
            (_, _, Some(_)) => Err(Error::InvalidConfig(
                "an allocation only applies to model 1 in fixed-budget mode".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct HistogramRow {
    pub fault_count: usize,
    pub frequency: u64,
    /// Share of all trials, in percent.
    pub percentage: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CampaignStats {
    pub model: AttackModel,
    pub mode: CampaignMode,
    pub faults: usize,
    pub alloc_p1: Option<usize>,
    pub alloc_p2: Option<usize>,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Trials aborted by an attack error; counted as failures.
    pub engine_errors: u64,
    /// Trials that ended with unique but wrong subkeys; counted as failures.
    pub wrong_keys: u64,
    /// Successful trials by number of faults used (distribution mode).
    pub histogram: Vec<HistogramRow>,
    pub wall_time_secs: f64,
}

impl CampaignStats {
    /// Mean number of faults over successful trials, from the histogram.
    pub fn mean_faults(&self) -> Option<f64> {
        let n: u64 = self.histogram.iter().map(|r| r.frequency).sum();
        (n > 0).then(|| {
            self.histogram
                .iter()
                .map(|r| r.fault_count as f64 * r.frequency as f64)
                .sum::<f64>()
                / n as f64
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn histogram_frequency(&self, fault_count: usize) -> u64 {
        self.histogram
            .iter()
            .find(|r| r.fault_count == fault_count)
            .map_or(0, |r| r.frequency)
    }
}

impl fmt::Display for CampaignStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model {} {} faults={}", self.model, self.mode, self.faults)?;
        if let (Some(a), Some(b)) = (self.alloc_p1, self.alloc_p2) {
            write!(f, " alloc={a},{b}")?;
        }
        write!(
            f,
            " trials={} successes={} rate={:.2}% (95% CI {:.2}..{:.2}%) seed={} errors={} wrong={} time={:.1}s",
            self.trials,
            self.successes,
            100.0 * self.rate,
            100.0 * self.ci_low,
            100.0 * self.ci_high,
            self.seed,
            self.engine_errors,
            self.wrong_keys,
            self.wall_time_secs
        )
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct TrialOutcome {
    pub success: bool,
    pub faults_used: usize,
    pub engine_error: bool,
    pub wrong_key: bool,
}

/// One simulated victim: key, plaintext and a fault source.
struct Victim<'a> {
    rks: [RoundKey; ROUNDS],
    plaintext: CipherState,
    ciphertext: CipherState,
    rng: ChaCha8Rng,
    faults: Vec<FaultSpec>,
    trace: Option<&'a mut Vec<TraceLine>>,
}

impl<'a> Victim<'a> {
    fn new(mut rng: ChaCha8Rng, trace: Option<&'a mut Vec<TraceLine>>) -> (Self, MasterKey) {
        let mk = MasterKey::from_u128(rng.random());
        let plaintext = CipherState::from_u64(rng.random());
        let rks = expand_key(&mk);
        let ciphertext = encrypt_from(&plaintext, &rks, 0);
        (
            Victim {
                rks,
                plaintext,
                ciphertext,
                rng,
                faults: Vec::new(),
                trace,
            },
            mk,
        )
    }

    fn inject(&mut self, model: FaultModel) -> CipherState {
        let f = sample_fault(model, &mut self.rng);
        self.faults.push(f);
        faulty_encrypt(&self.plaintext, &self.rks, &f).expect("sampled faults are valid")
    }

    fn log(
        &mut self,
        state: &CandidateState,
        verdict: Option<crate::attack::LocationVerdict>,
        e: NibbleSet,
        ep: NibbleSet,
    ) {
        if let Some(t) = self.trace.as_deref_mut() {
            let f = self.faults.last().expect("a fault was injected");
            t.push(TraceLine {
                index: self.faults.len(),
                fault: f.to_string(),
                verdict,
                e,
                e_prime: ep,
                rk29_sizes: state.rk29_sizes(),
                rk28_sizes: state.rk28_sizes(),
                note: None,
            });
        }
    }
}

/// `RK^28` narrowed by replaying the stored faults, when `RK^29` is unique.
fn with_rk28(state: &CandidateState) -> Result<Option<CandidateState>> {
    let Some(rk29) = state.rk29_unique() else {
        return Ok(None);
    };
    let mut s = state.clone();
    m2_recover_rk28(&mut s, &rk29)?;
    Ok(Some(s))
}

fn run_model1(v: &mut Victim<'_>, p1: usize, p2: usize, stop_early: bool) -> Result<CandidateState> {
    let mut state = CandidateState::new();
    for _ in 0..p1 {
        if stop_early && state.rk29_unique().is_some() {
            break;
        }
        let cf = v.inject(FaultModel::ModelIPhase1);
        m1_update_rk29(&v.ciphertext, &cf, &mut state)?;
        let e = NibbleSet::singleton(v.ciphertext.diff(&cf).cell(0));
        v.log(&state, None, e, NibbleSet::singleton(v.ciphertext.diff(&cf).cell(4)));
    }
    let Some(rk29) = state.rk29_unique() else {
        return Ok(state);
    };
    let p2 = if stop_early { p1 + p2 - v.faults.len() } else { p2 };
    for _ in 0..p2 {
        if stop_early && state.rk28_unique().is_some() {
            break;
        }
        let cf = v.inject(FaultModel::ModelIPhase2);
        m1_update_rk28(&v.ciphertext, &cf, &rk29, &mut state)?;
        v.log(&state, None, NibbleSet::EMPTY, NibbleSet::EMPTY);
    }
    Ok(state)
}

fn run_round27(v: &mut Victim<'_>, model: AttackModel, budget: usize, stop_early: bool) -> Result<CandidateState> {
    let skip = model.skipped_rk28();
    let mut state = CandidateState::new();
    for _ in 0..budget {
        let (fm, cf) = match model {
            AttackModel::III => (FaultModel::ModelIII, v.inject(FaultModel::ModelIII)),
            _ => (FaultModel::ModelII, v.inject(FaultModel::ModelII)),
        };
        let (verdict, summary) = match fm {
            FaultModel::ModelIII => {
                let (verdict, s) = update_detailed(&v.ciphertext, &cf, &mut state)?;
                (Some(verdict), s)
            }
            _ => (None, update_branch7(&v.ciphertext, &cf, &mut state)?),
        };
        if stop_early {
            if let Some(s) = with_rk28(&state)? {
                v.log(&s, verdict, summary.e, summary.e_prime);
                if s.is_resolved(skip) {
                    return Ok(s);
                }
                continue;
            }
        }
        v.log(&state, verdict, summary.e, summary.e_prime);
    }
    Ok(with_rk28(&state)?.unwrap_or(state))
}

fn run_attack(v: &mut Victim<'_>, cfg: &CampaignConfig) -> Result<CandidateState> {
    let stop_early = cfg.mode == CampaignMode::Distribution;
    match cfg.model {
        AttackModel::I => {
            let (p1, p2) = cfg.allocation.unwrap_or((cfg.fault_budget, 0));
            run_model1(v, p1, p2, stop_early)
        }
        m => run_round27(v, m, cfg.fault_budget, stop_early),
    }
}

fn matches_truth(state: &CandidateState, rks: &[RoundKey; ROUNDS], skip: &[usize]) -> bool {
    state.rk29_unique() == Some(rks[29])
        && (0..8).all(|i| skip.contains(&i) || state.rk28[i].single() == Some(rks[28].nibble(i)))
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs trial `trial` of `cfg`.
pub fn run_trial(cfg: &CampaignConfig, trial: u64) -> TrialOutcome {
    let (mut v, _) = Victim::new(trial_rng(cfg.seed, trial), None);
    let skip = cfg.model.skipped_rk28();
    match run_attack(&mut v, cfg) {
        Err(_) => TrialOutcome {
            engine_error: true,
            faults_used: v.faults.len(),
            ..TrialOutcome::default()
        },
        Ok(state) => {
            let resolved = state.is_resolved(skip);
            let correct = resolved && matches_truth(&state, &v.rks, skip);
            TrialOutcome {
                success: correct,
                faults_used: v.faults.len(),
                engine_error: false,
                wrong_key: resolved && !correct,
            }
        }
    }
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignStats> {
    cfg.validate()?;
    let start = Instant::now();
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();

    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let mut counts = std::collections::BTreeMap::<usize, u64>::new();
    if cfg.mode == CampaignMode::Distribution {
        for o in outcomes.iter().filter(|o| o.success) {
            *counts.entry(o.faults_used).or_default() += 1;
        }
    }
    let histogram = counts
        .into_iter()
        .map(|(fault_count, frequency)| HistogramRow {
            fault_count,
            frequency,
            percentage: 100.0 * frequency as f64 / cfg.trials as f64,
        })
        .collect();
    let (ci_low, ci_high) = wilson_interval(successes, cfg.trials);
    Ok(CampaignStats {
        model: cfg.model,
        mode: cfg.mode,
        faults: cfg.fault_budget,
        alloc_p1: cfg.allocation.map(|a| a.0),
        alloc_p2: cfg.allocation.map(|a| a.1),
        trials: cfg.trials,
        successes,
        rate: successes as f64 / cfg.trials as f64,
        ci_low,
        ci_high,
        seed: cfg.seed,
        engine_errors: outcomes.iter().filter(|o| o.engine_error).count() as u64,
        wrong_keys: outcomes.iter().filter(|o| o.wrong_key).count() as u64,
        histogram,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Result of one traced attack, from key generation to master-key recovery.
#[derive(Debug)]
pub struct SingleRun {
    pub master_key: MasterKey,
    pub plaintext: CipherState,
    pub ciphertext: CipherState,
    pub faults: Vec<FaultSpec>,
    pub trace: Vec<TraceLine>,
    pub rk29: [NibbleSet; 8],
    pub rk28: [NibbleSet; 8],
    pub recovered: Result<InversionOutcome>,
}

impl SingleRun {
    pub fn succeeded(&self) -> bool {
        matches!(&self.recovered, Ok(o) if o.key == self.master_key)
    }
}

/// One attack with a trace line per injected fault. Faults are injected until
/// the subkeys are unique or `max_faults` is reached.
pub fn run_single(model: AttackModel, seed: u64, max_faults: usize) -> SingleRun {
    let mut trace = Vec::new();
    let (mut v, mk) = Victim::new(trial_rng(seed, 0), Some(&mut trace));
    let cfg = CampaignConfig {
        model,
        trials: 1,
        fault_budget: max_faults,
        allocation: None,
        seed,
        mode: CampaignMode::Distribution,
    };
    let anchor = Anchor {
        plaintext: v.plaintext,
        ciphertext: v.ciphertext,
    };
    let attacked = run_attack(&mut v, &cfg);
    let (faults, plaintext, ciphertext) = (std::mem::take(&mut v.faults), v.plaintext, v.ciphertext);
    drop(v);
    let (rk29, rk28, recovered) = match attacked {
        Err(e) => ([NibbleSet::FULL; 8], [NibbleSet::FULL; 8], Err(e)),
        Ok(mut state) => {
            let recovered = match model {
                AttackModel::III => m3_finalize(&mut state, &anchor),
                _ => match (state.rk28_unique(), state.rk29_unique()) {
                    (Some(rk28), Some(rk29)) => recover_master_key(&rk28, &rk29, &anchor),
                    _ => Err(state
                        .first_ambiguous()
                        .unwrap_or_else(|| Error::Inconsistent("subkeys not unique".into()))),
                },
            };
            (state.rk29, state.rk28, recovered)
        }
    };
    SingleRun {
        master_key: mk,
        plaintext,
        ciphertext,
        faults,
        trace,
        rk29,
        rk28,
        recovered,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "model",
    "faults",
    "alloc_p1",
    "alloc_p2",
    "trials",
    "successes",
    "rate",
    "seed",
];

pub const HISTOGRAM_HEADER: [&str; 3] = ["fault_count", "frequency", "percentage"];

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(stats: &[CampaignStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in stats {
        w.write_record([
            s.model.to_string(),
            s.faults.to_string(),
            opt(s.alloc_p1),
            opt(s.alloc_p2),
            s.trials.to_string(),
            s.successes.to_string(),
            s.rate.to_string(),
            s.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(stats: &CampaignStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTOGRAM_HEADER)?;
    for r in &stats.histogram {
        w.write_record([
            r.fault_count.to_string(),
            r.frequency.to_string(),
            format!("{:.2}", r.percentage),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sibling path for the histogram of `path`: `runs.csv` -> `runs.histogram.csv`.
pub fn histogram_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.histogram.csv"))
}

/// Writes `stats` to `path`. CSV output puts a non-empty histogram in a
/// sibling file; JSON embeds it. Returns every path written.
pub fn emit_results(stats: &CampaignStats, format: OutputFormat, path: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    match format {
        OutputFormat::Json => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, stats)?;
            writeln!(w)?;
            w.flush()?;
        }
        OutputFormat::Csv => {
            write_csv(std::slice::from_ref(stats), BufWriter::new(File::create(path)?))?;
            if !stats.histogram.is_empty() {
                let hp = histogram_path(path);
                write_histogram_csv(stats, BufWriter::new(File::create(&hp)?))?;
                written.push(hp);
            }
        }
    }
    Ok(written)
}
