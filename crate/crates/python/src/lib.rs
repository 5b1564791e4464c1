//! Python bindings: the cipher, fault injection, single attacks and campaigns.
//!
//! Blocks and keys cross the boundary as hex strings, campaign results as
//! plain dicts shaped like the JSON output.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dfa::attack::identify_location as identify;
use dfa::campaign::{self, AttackModel, CampaignConfig, CampaignMode, DEFAULT_TRIALS};
use dfa::{CipherState, FaultSpec, MasterKey, PartialRoundKey, RoundKey};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(value_err)
}

fn seed_or_default(seed: Option<u64>) -> PyResult<u64> {
    seed.map_or_else(|| campaign::default_seed().map_err(value_err), Ok)
}

#[pyfunction]
fn encrypt(key: &str, plaintext: &str) -> PyResult<String> {
    let rks = dfa::expand_key(&parse::<MasterKey>(key)?);
    Ok(dfa::encrypt(&parse(plaintext)?, &rks).map_err(value_err)?.to_string())
}

#[pyfunction]
fn decrypt(key: &str, ciphertext: &str) -> PyResult<String> {
    let rks = dfa::expand_key(&parse::<MasterKey>(key)?);
    Ok(dfa::decrypt(&parse(ciphertext)?, &rks).map_err(value_err)?.to_string())
}

#[pyfunction]
fn expand_key(key: &str) -> PyResult<Vec<String>> {
    Ok(dfa::expand_key(&parse::<MasterKey>(key)?)
        .iter()
        .map(RoundKey::to_string)
        .collect())
}

/// The S-box DDT as 16 rows of 16 counts.
#[pyfunction]
fn ddt() -> Vec<Vec<u8>> {
    dfa::compute_ddt().counts.iter().map(|r| r.to_vec()).collect()
}

/// `(correct, faulty)` ciphertexts for a fault given as `r{round}:b{branch}:v{hex}`.
#[pyfunction]
fn inject(key: &str, plaintext: &str, fault: &str) -> PyResult<(String, String)> {
    let rks = dfa::expand_key(&parse::<MasterKey>(key)?);
    let p: CipherState = parse(plaintext)?;
    let f: FaultSpec = parse(fault)?;
    let c = dfa::encrypt(&p, &rks).map_err(value_err)?;
    let cf = dfa::faulty_encrypt(&p, &rks, &f).map_err(value_err)?;
    Ok((c.to_string(), cf.to_string()))
}

/// Round-27 fault branch read off a ciphertext difference, and whether it
/// matched a pattern exactly (False means "none matched, so 7").
#[pyfunction]
fn identify_location(difference: &str) -> PyResult<(usize, bool)> {
    let v = identify(&parse(difference)?).map_err(value_err)?;
    Ok((v.branch, v.certainty == dfa::attack::Certainty::Exact))
}

/// Master key from the last round key, a partial second-to-last round key
/// (`x` for unknown nibbles) and one known plaintext/ciphertext pair.
#[pyfunction]
fn recover_key(rk29: &str, rk28: &str, plaintext: &str, ciphertext: &str) -> PyResult<String> {
    let rk28: PartialRoundKey = parse(rk28)?;
    let anchor = dfa::Anchor {
        plaintext: parse(plaintext)?,
        ciphertext: parse(ciphertext)?,
    };
    let out = dfa::invert_subkeys(&parse(rk29)?, &rk28, &anchor).map_err(value_err)?;
    Ok(out.key.to_string())
}

/// One seeded attack; returns the generated and recovered keys and the trace.
#[pyfunction]
#[pyo3(signature = (model, seed=None, max_faults=64))]
fn attack<'py>(py: Python<'py>, model: u8, seed: Option<u64>, max_faults: usize) -> PyResult<Bound<'py, PyDict>> {
    let model = AttackModel::try_from(model).map_err(value_err)?;
    let seed = seed_or_default(seed)?;
    let run = py.detach(|| campaign::run_single(model, seed, max_faults));
    let d = PyDict::new(py);
    d.set_item("master_key", run.master_key.to_string())?;
    d.set_item("plaintext", run.plaintext.to_string())?;
    d.set_item("ciphertext", run.ciphertext.to_string())?;
    d.set_item("faults", run.faults.iter().map(ToString::to_string).collect::<Vec<_>>())?;
    d.set_item("trace", run.trace.iter().map(ToString::to_string).collect::<Vec<_>>())?;
    match &run.recovered {
        Ok(o) => {
            d.set_item("recovered", o.key.to_string())?;
            d.set_item("error", py.None())?;
        }
        Err(e) => {
            d.set_item("recovered", py.None())?;
            d.set_item("error", e.to_string())?;
        }
    }
    d.set_item("success", run.succeeded())?;
    Ok(d)
}

/// Runs a campaign and returns its statistics as a dict.
#[pyfunction]
#[pyo3(signature = (model, faults, trials=DEFAULT_TRIALS, seed=None, alloc=None, mode="fixed"))]
fn run_campaign<'py>(
    py: Python<'py>,
    model: u8,
    faults: usize,
    trials: u64,
    seed: Option<u64>,
    alloc: Option<(usize, usize)>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = CampaignConfig {
        model: AttackModel::try_from(model).map_err(value_err)?,
        trials,
        fault_budget: faults,
        allocation: alloc,
        seed: seed_or_default(seed)?,
        mode: parse::<CampaignMode>(mode)?,
    };
    let stats = py.detach(|| campaign::run_campaign(&cfg)).map_err(value_err)?;
    let json = stats.to_json().map_err(value_err)?;
    py.import("json")?.call_method1("loads", (json,))
}

#[pymodule]
fn lilliput_dfa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt, m)?)?;
    m.add_function(wrap_pyfunction!(expand_key, m)?)?;
    m.add_function(wrap_pyfunction!(ddt, m)?)?;
    m.add_function(wrap_pyfunction!(inject, m)?)?;
    m.add_function(wrap_pyfunction!(identify_location, m)?)?;
    m.add_function(wrap_pyfunction!(recover_key, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add("SEED_ENV_VAR", campaign::SEED_ENV_VAR)?;
    Ok(())
}
