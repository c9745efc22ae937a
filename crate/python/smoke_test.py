"""Smoke test for the sda2e Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import json
import math
import os
import tempfile

import sda2e


def main():
    ds, labels = sda2e.synthetic(n=150, d=12, anomaly_fraction=0.04, seed=3)
    assert len(ds) == 150 and ds.d == 12
    assert labels.count("anomaly") == 6
    again = sda2e.Dataset.from_csv_string(ds.to_csv())
    assert again.checksum == ds.checksum

    assert abs(sda2e.similarity([True, False, True, True], [True, True, True, False]) - 2 / 3) < 1e-12
    assert sda2e.ndcg([1, 0], [False, True]) == 1.0

    model = sda2e.Model(ds.d, epochs=3, seed=1)
    history = model.fit(ds)
    assert len(history) == 3
    scores = model.score(ds)
    assert len(scores) == len(ds) and all(math.isfinite(s) for s in scores)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        model.save(path)
        assert sda2e.Model.load(path).score(ds) == scores

    session = sda2e.Session(ds, labels, strategy="hybrid", iterations=2, budget=4, epochs=2, seed=5)
    assert session.phase == "awaiting-labels"
    by_id = dict(zip(ds.ids, labels))
    for rid in session.pending():
        session.submit(rid, by_id[rid])
    session.advance()
    sda2e.simulate(session, labels)
    assert session.phase == "complete"
    series = session.ndcg_series()
    assert len(series) == 3 and all(0.0 <= v <= 1.0 for v in series)

    report = sda2e.run_active(ds, labels, strategies=["hybrid"], iterations=2, budget=4, epochs=2, seed=5)
    assert [r["ndcg"] for r in report["runs"][0]["iterations"]] == series
    print(json.dumps({"ok": True, "ndcg": series}))


if __name__ == "__main__":
    main()
