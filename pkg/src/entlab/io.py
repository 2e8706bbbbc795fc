"""Run configuration, CSV emission, and result manifests for the CLI."""
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError

# CSV contract: header row, comma separators, 17 significant digits,
# stable column order.
FLOAT_FMT = "%.17g"


def validate_config(config, schema, command):
    """Type-check a config dict against {key: (type, default)}; unknown keys
    are rejected. Returns a fully populated dict."""
    out = {}
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"{command}: unknown config keys {sorted(unknown)}")
    for key, (typ, default) in schema.items():
        if key in config:
            value = config[key]
            try:
                if typ is float:
                    value = float(value)
                elif typ is int:
                    if isinstance(value, float) and not value.is_integer():
                        raise ValueError("not an integer")
                    value = int(value)
                elif typ is list:
                    value = [float(v) for v in value]
                elif typ is str:
                    if not isinstance(value, str):
                        raise ValueError("not a string")
                elif typ is bool:
                    if not isinstance(value, bool):
                        raise ValueError("not a boolean")
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{command}: bad value for {key!r}: {exc}") from None
            out[key] = value
        else:
            if default is None:
                raise ConfigError(f"{command}: missing required key {key!r}")
            out[key] = default
    return out


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def write_csv(path, header, columns):
    """Write aligned columns with the package CSV contract."""
    columns = [np.asarray(c) for c in columns]
    n = columns[0].shape[0]
    if any(c.shape[0] != n for c in columns):
        raise ValueError("column length mismatch")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(FLOAT_FMT % c[i] for c in columns) + "\n")


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class ManifestWriter:
    """Collects outputs of one run and emits manifest.json beside them.

    The manifest echoes the configuration, seed, and package version, which
    together reproduce the run exactly; per-file checksums pin the outputs.
    """

    def __init__(self, out_dir, command, config, seed):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.seed = seed
        self.t0 = time.time()
        self.files = []
        self.notes = {}

    def path(self, name):
        return self.out_dir / name

    def register(self, path):
        self.files.append(Path(path))

    def write_csv(self, name, header, columns):
        p = self.path(name)
        write_csv(p, header, columns)
        self.register(p)
        return p

    def write_json(self, name, payload):
        p = self.path(name)
        with open(p, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.register(p)
        return p

    def finalize(self):
        manifest = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": __version__,
            "wall_clock_s": time.time() - self.t0,
            "files": {f.name: file_sha256(f) for f in self.files},
            "notes": self.notes,
        }
        with open(self.out_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest
