"""Flat key=value configuration files.

Documented keys:

    generator_checkpoint   path to the generator container
    encoder_checkpoint     path to the encoder container
    directions_dir         directory of persisted edit directions (*.sg3t)
    sessions_dir           root directory for service sessions
    restyle_iters          refinement passes per inversion (default 3)
    normalize_smoothing    true/false: divide the 5-tap weights by their sum
    pti_steps              pivotal-tuning steps (default 8000)
    pti_batch              pivotal-tuning batch size (default 2)
    pti_lr                 pivotal-tuning learning rate
    preview_resolution     optional reduced edge length for previews
    transcoder_cmd         external video transcoder template, e.g.
                           "ffmpeg -i {input} {frames}/frame_%06d.png"

Lines are ``key = value``; ``#`` starts a comment; unknown keys are kept.
"""

from __future__ import annotations

from pathlib import Path

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

DEFAULTS: dict[str, object] = {
    "restyle_iters": 3,
    "normalize_smoothing": False,
    "pti_steps": 8000,
    "pti_batch": 2,
    "pti_lr": 1e-3,
}

_INT_KEYS = {"restyle_iters", "pti_steps", "pti_batch", "preview_resolution", "seed"}
_FLOAT_KEYS = {"pti_lr", "expansion_delta"}
_BOOL_KEYS = {"normalize_smoothing", "deterministic"}


def parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        if raw.lower() not in _BOOL:
            raise ValueError(f"config key {key!r} expects a boolean, got {raw!r}")
        return _BOOL[raw.lower()]
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def load_config(path: str | Path | None) -> dict:
    config = dict(DEFAULTS)
    if path is None:
        return config
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        config[key] = parse_value(key, raw)
    return config
