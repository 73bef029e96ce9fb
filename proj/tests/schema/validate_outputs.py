"""Runs each CLI subcommand and validates the emitted JSON against the schemas."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

cli, schema_dir, fixtures = Path(sys.argv[1]), Path(sys.argv[2]), Path(sys.argv[3])
schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
failures = 0


def check(kind, doc, label):
    global failures
    validator = jsonschema.Draft202012Validator(schemas[kind])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    for e in errors:
        print(f"{label}: {'/'.join(map(str, e.path))}: {e.message}")
    failures += bool(errors)
    print(f"{label}: {'ok' if not errors else 'INVALID'}")


def run(*args, expect=0):
    r = subprocess.run([str(cli), *map(str, args)], capture_output=True, text=True)
    if r.returncode != expect:
        sys.exit(f"{' '.join(map(str, args))}: exit {r.returncode}\n{r.stderr}")
    return r


policy = {"type": "linear", "intercept": 0.3, "coeffs": [1, 0.5]}
sim = {"p": 2, "mu": [0.5, 0.5], "n": 400, "outcome_coeffs": [1, 1, 0.5, 0.5, 1, -1],
       "seed": 4, "kind": "type1"}

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    def write(name, doc):
        (tmp / name).write_text(json.dumps(doc))
        return tmp / name

    run("simulate", "--config", write("sim.json", {**sim, "policy": policy, "truth_draws": 10000}),
        "--out", tmp / "sim")
    check("truth", json.loads((tmp / "sim" / "truth.json").read_text()), "truth")
    data = tmp / "sim" / "dataset.csv"

    estimate_configs = {
        "oracle": {"policy": policy, "simulation": sim, "positivity": {"tau": 0.05}},
        "fitted": {"policy": policy, "estimand": "theta1",
                   "recipe": {"weights": "eb", "propensity": "logistic", "outcome": "linear"},
                   "positivity": {"tau": 0.05}},
        "crossfit": {"policy": policy, "crossfit": 3,
                     "recipe": {"weights": "kulsif", "propensity": "logistic", "outcome": "kernel_ridge"}},
        "plugin": {"policy": policy, "method": "weighted_pooled", "simulation": sim},
    }
    for label, cfg in estimate_configs.items():
        r = run("estimate", "--data", data, "--config", write(f"{label}.json", cfg))
        check("estimate", json.loads(r.stdout), f"estimate/{label}")
    r = run("estimate", "--data", fixtures / "type2_toy.csv", "--config",
            fixtures / "type2_toy_estimate.json")
    check("estimate", json.loads(r.stdout), "estimate/fixture")

    candidates = write("cands.json", [
        {"c": 0.5, "rule": policy},
        {"c": 1.0, "rule": {"type": "linear", "intercept": 0, "coeffs": [0, 1]}}])
    for label, cfg in {"covariates_only": {"simulation": sim},
                       "ipw": {"method": "ipw", "recipe": {"outcome": "linear", "propensity": "logistic"}}}.items():
        r = run("calibrate", "--data", data, "--candidates", candidates,
                "--config", write(f"cal_{label}.json", cfg))
        check("selection", json.loads(r.stdout), f"selection/{label}")

    mc = {"simulation": {**sim, "n": 200}, "replications": 3, "policy": policy, "seed": 2,
          "truth_draws": 5000, "variance_draws": 5000, "report_timing": True,
          "estimators": [{"name": "oracle", "estimand": "theta"},
                         {"name": "fitted", "estimand": "theta1", "kind": "type1", "crossfit": 2,
                          "recipe": {"weights": "aipsw", "outcome": "linear", "propensity": "logistic"}}]}
    r = run("montecarlo", "--config", write("mc.json", mc), "--out", tmp / "mc")
    check("mc_summary", json.loads(r.stdout), "mc_summary")

    for label, args, code in [("usage", ["estimate"], 2), ("unknown", ["bogus"], 2),
                              ("io", ["estimate", "--data", tmp / "missing.csv"], 1),
                              ("config", ["simulate", "--config", write("bad.json", {"nn": 1})], 1)]:
        r = run(*args, expect=code)
        check("error", json.loads(r.stderr.strip().splitlines()[-1]), f"error/{label}")

sys.exit(1 if failures else 0)
