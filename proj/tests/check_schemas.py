#!/usr/bin/env python3
"""Runs the CLI on the bundled demo and validates every artifact against schemas/.

usage: check_schemas.py <risplan-binary> <source-dir> <work-dir>
"""

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema

cli, src, work = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in (src / "schemas").glob("*.schema.json")}
failures = []


def check(name, ok, detail=""):
    print(("ok   " if ok else "FAIL ") + name + (f": {detail}" if detail else ""))
    if not ok:
        failures.append(name)


def validate(path, schema):
    try:
        jsonschema.validate(json.loads(Path(path).read_text()), schemas[schema])
        check(f"{Path(path).name} ~ {schema}", True)
    except (jsonschema.ValidationError, OSError, json.JSONDecodeError) as e:
        check(f"{Path(path).name} ~ {schema}", False, str(e).splitlines()[0])


def header(path, first):
    try:
        with open(path, newline="") as f:
            row = next(csv.reader(f))
        check(f"{Path(path).name} header", row[: len(first)] == first, ",".join(row[:6]))
    except (OSError, StopIteration) as e:
        check(f"{Path(path).name} header", False, str(e))


def run(*args):
    return subprocess.run([cli, *args], stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL).returncode


shutil.rmtree(work, ignore_errors=True)
work.mkdir(parents=True)

for p in sorted((src / "data/scenes").glob("*.json")):
    validate(p, "scene")
for p in sorted((src / "data/configs").glob("*.json")):
    validate(p, "config")

config = {"scene": str(src / "data/scenes/demo.json"), "mode": "full-isac", "seed": 7, "threads": 1}
(work / "config.json").write_text(json.dumps(config))

full = work / "full"
rc = run("run", "--config", str(work / "config.json"), "--out", str(full))
check("run full-isac exit code", rc == 0, str(rc))
validate(full / "deployment.json", "deployment")
for area in ("east", "west", "south"):
    validate(full / f"snr_map_{area}.json", "snr_map")
    header(full / f"snr_map_{area}.csv", ["cell_index", "x", "y", "snr_db", "snr_explicit_db", "served_by"])
validate(full / "rv_map.json", "rv_map")
header(full / "rv_map.csv", ["range_m"])
validate(full / "detections.json", "detections")
validate(full / "positions.json", "positions")
header(full / "convergence.csv", ["iteration", "best_objective", "ris0_mean_m", "ris0_std_m", "ris0_max_m"])
header(full / "closure.csv", ["ris", "cell", "uav", "beta", "omega", "snr_model_db", "snr_explicit_db"])
check("run.log present", (full / "run.log").is_file())

cmp_dir = work / "compare"
rc = run("compare", "--config", str(work / "config.json"), "--mode", "full-isac,comm-only", "--out", str(cmp_dir))
check("compare exit code", rc == 0, str(rc))
validate(cmp_dir / "comparison.json", "comparison")
header(cmp_dir / "comparison.csv", ["mode", "bits", "status", "objective"])

bad = work / "bad"
bad.mkdir()
(bad / "config.json").write_text(json.dumps({"scene": str(src / "data/scenes/demo.json"), "threads": 0}))
rc = run("run", "--config", str(bad / "config.json"), "--out", str(bad / "out"))
check("invalid config exit code", rc == 4, str(rc))
validate(bad / "out/error.json", "error")

print(f"{len(failures)} schema checks failed")
sys.exit(1 if failures else 0)
