"""Smoke test for the Python bindings.

Uses an installed `lilliput_dfa` if there is one (e.g. after `maturin develop`
in crates/python); otherwise builds the extension with cargo and loads it from
a temporary directory.

    python3 python/smoke_test.py
"""

import json
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import lilliput_dfa
        return lilliput_dfa
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "lilliput-dfa-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
    built = target / "release" / "liblilliput_dfa.so"
    tmp = tempfile.mkdtemp(prefix="lilliput_dfa_")
    shutil.copy(built, Path(tmp) / "lilliput_dfa.so")
    sys.path.insert(0, tmp)
    import lilliput_dfa
    return lilliput_dfa


def main():
    m = load_module()

    zero = "0" * 20
    ct = m.encrypt(zero, "0" * 16)
    assert ct == "5041b83331b27668", ct
    assert m.decrypt(zero, ct) == "0" * 16

    rks = m.expand_key(zero)
    assert len(rks) == 30 and rks[0] == "44444444", rks[:2]

    table = m.ddt()
    assert table[0][0] == 16 and all(sum(row) == 16 for row in table)

    key = "0123456789abcdef0123"
    c, cf = m.inject(key, "0011223344556677", "r27:b3:v5")
    diff = "%016x" % (int(c, 16) ^ int(cf, 16))
    assert m.identify_location(diff) == (3, True), diff

    rks = m.expand_key(key)
    partial = rks[28][:4] + "x" + rks[28][5:]
    ct = m.encrypt(key, "0" * 16)
    assert m.recover_key(rks[29], partial, "0" * 16, ct) == key

    run = m.attack(2, seed=5)
    assert run["success"] and run["recovered"] == run["master_key"], run
    assert len(run["trace"]) == len(run["faults"])

    stats = m.run_campaign(1, 8, trials=256, seed=1, alloc=(4, 4))
    assert stats["successes"] <= stats["trials"] == 256
    assert stats["ci_low"] <= stats["rate"] <= stats["ci_high"]

    dist = m.run_campaign(2, 32, trials=128, seed=2, mode="distribution")
    assert sum(r["frequency"] for r in dist["histogram"]) == dist["successes"]

    try:
        m.run_campaign(2, 8, alloc=(4, 4))
    except ValueError as e:
        assert "allocation" in str(e)
    else:
        raise AssertionError("allocation accepted for model 2")

    try:
        import jsonschema
    except ImportError:
        print("jsonschema not installed; schema check skipped")
    else:
        schema = json.loads((ROOT / "schemas" / "campaign_stats.schema.json").read_text())
        for s in (stats, dist):
            jsonschema.validate(s, schema)
        bad = dict(stats, rate=1.5)
        try:
            jsonschema.validate(bad, schema)
        except jsonschema.ValidationError:
            pass
        else:
            raise AssertionError("schema accepted rate > 1")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
