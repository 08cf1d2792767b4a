"""Runs each CLI command and validates its JSON report against the schema."""

import json
import subprocess
import sys

import jsonschema

cli, schema_path = sys.argv[1], sys.argv[2]
with open(schema_path, encoding="utf-8") as f:
    schema = json.load(f)
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)

FAST = ["--paths", "400", "--dt", "0.01", "--bootstrap", "20"]
RUNS = [
    (["analyze", "--catalog", "ou"], 0),
    (["analyze", "--catalog", "bessel"], 0),
    (["analyze", "--catalog", "branching"], 0),
    (["analyze", "--catalog", "ou", "--phi", "0.5"], 0),
    (["analyze", "--catalog", "power-potential", "--param", "r=1.5"], 2),
    (["simulate", "--catalog", "jacobi", "--t-max", "1"] + FAST, 0),
    (["simulate", "--catalog", "ou", "--no-such-flag"], 1),
    (["verify", "--catalog", "bessel"] + FAST, 0),
    (["sweep", "--catalog", "sinusoidal-potential"], 0),
]

failures = 0
for args, want in RUNS:
    proc = subprocess.run([cli] + args, capture_output=True, text=True, check=False)
    label = " ".join(args)
    if proc.returncode != want:
        print(f"FAIL {label}: exit {proc.returncode}, expected {want}\n{proc.stderr}")
        failures += 1
        continue
    if want == 1:
        print(f"ok   {label} (rejected)")
        continue
    errors = sorted(validator.iter_errors(json.loads(proc.stdout)), key=lambda e: list(e.path))
    for e in errors[:5]:
        print(f"FAIL {label}: {'/'.join(map(str, e.path))}: {e.message}")
    failures += bool(errors)
    if not errors:
        print(f"ok   {label}")
sys.exit(1 if failures else 0)
