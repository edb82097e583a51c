"""Run a scenario through the CLI and validate summary.json against the published schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main() -> int:
    cli, source = Path(sys.argv[1]), Path(sys.argv[2])
    schema = json.loads((source / "schemas" / "summary.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    cases = [
        ("fig2_scramble.yaml", []),
        ("linearpf.yaml", ["--set", "duration=3s"]),
        ("wss_estimation.yaml", ["--set", "duration=6s"]),
    ]
    with tempfile.TemporaryDirectory() as tmp:
        for name, extra in cases:
            out = Path(tmp) / name
            subprocess.run([str(cli), "run", str(source / "scenarios" / name), "--out", str(out), *extra],
                           check=True, stdout=subprocess.DEVNULL)
            summary = json.loads((out / "summary.json").read_text())
            errors = sorted(validator.iter_errors(summary), key=lambda e: list(e.path))
            for e in errors:
                print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
            if errors:
                return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
