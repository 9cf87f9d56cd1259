"""Pipeline configuration: an INI-style file addressed by dotted keys.

A key ``lower`` in section ``[hsv]`` is ``hsv.lower``. Command-line flags
and ``--set section.key=value`` override file values.
"""

from __future__ import annotations

import configparser
import re
from typing import Dict, Mapping, Optional

from .errors import FormatError, ParameterError

DEFAULTS: Dict[str, str] = {
    "images.pattern": "*.png",
    "images.epoch_regex": r"(\d+)",
    "hsv.lower": "55,75,30",
    "hsv.upper": "205,255,255",
    "blur.sigma": "",
    "calibrate.ranges": "",
    "changepoint.statistic": "mean_and_variance",
    "changepoint.threshold": "sic",
    "changepoint.min_seg_len": "2",
    "impact.component": "local_linear_trend",
    "impact.n_iter": "2000",
    "impact.burn_in": "500",
    "impact.credible_level": "0.95",
    "impact.seed": "0",
    "impact.prior_shape": "0.01",
    "impact.prior_scale_factor": "0.01",
    "output.dir": ".",
}


class Settings:
    def __init__(self, values: Optional[Mapping[str, str]] = None):
        self.values = dict(DEFAULTS)
        if values:
            self.update(values)

    def update(self, values: Mapping[str, str]) -> None:
        for key, val in values.items():
            if key not in DEFAULTS:
                raise FormatError(f"unknown config key {key!r}")
            self.values[key] = str(val)

    def set(self, key: str, value) -> None:
        if value is not None:
            self.update({key: value})

    def get_str(self, key: str) -> str:
        return self.values[key].strip()

    def get_optional_float(self, key: str) -> Optional[float]:
        raw = self.get_str(key)
        return None if raw == "" else self.get_float(key)

    def get_float(self, key: str) -> float:
        try:
            return float(self.get_str(key))
        except ValueError:
            raise ParameterError(f"{key}: expected a number, got {self.values[key]!r}") from None

    def get_int(self, key: str) -> int:
        try:
            return int(self.get_str(key))
        except ValueError:
            raise ParameterError(f"{key}: expected an integer, got {self.values[key]!r}") from None


def parse_config(text: str, path=None) -> Dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path) if path else "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise FormatError(str(exc).splitlines()[0], path, line) from None
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            dotted = f"{section}.{key}"
            if dotted not in DEFAULTS:
                raise FormatError(f"unknown config key {dotted!r}", path)
            out[dotted] = value
    return out


def load_settings(path=None, overrides=()) -> Settings:
    settings = Settings()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise FormatError(f"cannot read config ({exc.strerror})", path) from None
        settings.update(parse_config(text, path))
    for item in overrides:
        m = re.fullmatch(r"\s*([\w.]+)\s*=(.*)", item)
        if not m:
            raise FormatError(f"--set expects section.key=value, got {item!r}")
        settings.update({m.group(1): m.group(2).strip()})
    return settings
