"""Flat key=value config files used by render specs, channels and MC setups."""

from __future__ import annotations

from pathlib import Path

from .errors import InputError


def read_kv(path: str | Path) -> dict[str, str]:
    """Parse a key=value file; '#' lines are comments, blank lines ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_kv(path: str | Path, items: dict[str, str]) -> None:
    lines = [f"{key} = {value}" for key, value in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def kv_float(kv: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in kv:
        if default is None:
            raise InputError(f"missing config key {key!r}")
        return default
    try:
        return float(kv[key])
    except ValueError as exc:
        raise InputError(f"config key {key!r}: not a number: {kv[key]!r}") from exc


def kv_int(kv: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in kv:
        if default is None:
            raise InputError(f"missing config key {key!r}")
        return default
    try:
        return int(kv[key])
    except ValueError as exc:
        raise InputError(f"config key {key!r}: not an integer: {kv[key]!r}") from exc


def kv_rgb(kv: dict[str, str], key: str, default: tuple[int, int, int]) -> tuple[int, int, int]:
    if key not in kv:
        return default
    parts = [p.strip() for p in kv[key].split(",")]
    if len(parts) != 3:
        raise InputError(f"config key {key!r}: expected R,G,B")
    try:
        r, g, b = (int(p) for p in parts)
    except ValueError as exc:
        raise InputError(f"config key {key!r}: non-integer channel") from exc
    for channel in (r, g, b):
        if not 0 <= channel <= 255:
            raise InputError(f"config key {key!r}: channel out of [0,255]")
    return (r, g, b)
