"""Key=value config files and reproducibility sidecars.

Configs are flat text, one `key = value` pair per line, with # comments
and blank lines ignored; later duplicates win.  Every output file gets a
companion `<name>.meta` in the same format carrying the parameters, the
seeds and the package version, enough to reproduce the file bit for bit.
"""

from __future__ import annotations

from . import __version__

__all__ = ["read_config", "write_sidecar", "sidecar_path"]


def read_config(path) -> dict:
    """Parse a key=value file into a str-to-str mapping."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ValueError(
                    f"{path}:{lineno}: expected key=value, got {line!r}")
            out[key.strip()] = value.strip()
    return out


def sidecar_path(output_path) -> str:
    return str(output_path) + ".meta"


def write_sidecar(output_path, entries: dict) -> str:
    """Write `<output_path>.meta` with sorted key=value lines.

    The package version is stamped automatically; no timestamps, so
    identical runs produce identical sidecars.
    """
    merged = dict(entries)
    merged.setdefault("version", __version__)
    path = sidecar_path(output_path)
    with open(path, "w") as fh:
        for key in sorted(merged):
            fh.write(f"{key}={merged[key]}\n")
    return path
