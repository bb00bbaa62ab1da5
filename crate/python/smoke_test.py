"""Smoke test of the neuromamba_py extension module.

Build and install it first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import json
import math
import random
import tempfile

import neuromamba_py as nm


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAILED: {what}")
    print(f"ok  {what}")


def main():
    spec = {
        "n_subjects": 16,
        "n_regions": 4,
        "n_timepoints": 48,
        "tr_seconds": 2.0,
        "informative_regions": [0, 1],
        "coupling": 0.4,
        "mode": "dynamics_only",
        "seed": 3,
    }
    cohort = nm.Cohort.synthetic(json.dumps(spec)).zscored()
    check(len(cohort) == 16 and cohort.n_regions == 4, "synthetic cohort shape")
    check(len(cohort.scores()) == 16 and len(cohort.scores()[0]) == 3, "three scores per subject")

    with tempfile.TemporaryDirectory() as d:
        path = cohort.save(d)
        again = nm.Cohort.load(str(path))
        check(again.subject_ids == cohort.subject_ids, "cohort save/load round trip")

    rows, names = nm.features(cohort, "fcm")
    check(len(rows) == 16 and len(names) == 6, "FCM features are the 6 upper-triangle pairs")
    alff_rows, _ = nm.features(cohort, "alff")
    check(len(alff_rows[0]) == 4, "one ALFF value per region")

    primary = [[s[0]] for s in cohort.scores()]
    gamma, ridge = nm.krr_grid_search(alff_rows, primary, seed=1)
    pred = nm.krr_loocv(alff_rows, primary, gamma, ridge)
    check(len(pred) == 16, "KRR leave-one-out predictions")
    flat = nm.krr_predict(alff_rows, primary, alff_rows[:2], gamma, 1e9)
    mean = sum(p[0] for p in primary) / len(primary)
    check(all(abs(p[0] - mean) < 1e-6 for p in flat), "huge ridge predicts the training mean")

    check(abs(nm.pearson_r([1, 2, 3, 4], [2, 4, 6, 8.5]) - 0.9978) < 1e-3, "Pearson r")
    check(nm.roc_auc([True, False, True, False], [0.9, 0.1, 0.5, 0.5]) == 0.875, "AUC with a tie")

    abar, bbar = nm.zoh_discretize(-0.5, 1.0, 0.1)
    check(abs(abar - math.exp(-0.05)) < 1e-15, "ZOH decay")
    check(abs(bbar - (math.exp(-0.05) - 1) / -0.5) < 1e-14, "ZOH input gain")

    rng = random.Random(0)
    t, e, l = 50, 2, 3
    a = [[-rng.uniform(0.1, 2) for _ in range(l)] for _ in range(e)]
    delta = [[rng.uniform(0.01, 0.5) for _ in range(e)] for _ in range(t)]
    b = [[rng.uniform(-1, 1) for _ in range(l)] for _ in range(t)]
    c = [[rng.uniform(-1, 1) for _ in range(l)] for _ in range(t)]
    x = [[rng.uniform(-1, 1) for _ in range(e)] for _ in range(t)]
    seq = nm.selective_scan(a, delta, b, c, x)
    par = nm.selective_scan(a, delta, b, c, x, parallel=True)
    gap = max(abs(p - q) for rs, rp in zip(seq, par) for p, q in zip(rs, rp))
    check(gap < 1e-10, "parallel scan equals sequential scan")

    model = nm.Model(4, seed=1, config_json=json.dumps({"state_size": 4}))
    losses = model.fit(cohort, json.dumps({"epochs": 3}))
    check(len(losses) == 3 and all(math.isfinite(v) for v in losses), "training returns a loss per epoch")
    out = model.predict(cohort.timeseries(0))
    check(len(out) == 3, "prediction has three scores")
    with tempfile.TemporaryDirectory() as d:
        ckpt = f"{d}/m.ckpt"
        model.save(ckpt)
        check(nm.Model.load(ckpt).predict(cohort.timeseries(0)) == out, "checkpoint round trip")

    report = json.loads(model.pfi(cohort, trials=10, seed=2))
    check(len(report["combined_ranking"]) == 4, "PFI ranks every region")

    preds = nm.loocv(cohort, json.dumps({"state_size": 4}), json.dumps({"epochs": 1}))
    check(len(preds) == 16, "NeuroMamba leave-one-out predictions")

    passed, worst = nm.gradcheck(n_timepoints=8)
    check(passed, f"gradient check (worst relative error {worst:.1e})")

    try:
        nm.Cohort.load("/nonexistent/manifest.json")
        check(False, "missing file raises")
    except nm.NeuroMambaError as exc:
        check("io" in str(exc), "missing file raises NeuroMambaError")

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
