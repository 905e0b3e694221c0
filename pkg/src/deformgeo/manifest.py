"""Manifest files: TOML with one task section.

Example::

    [domain]
    coords = ["th", "ph"]
    lo = [0.6, 0.0]
    hi = [2.5, 6.0]
    resolution = [5, 5]

    [constants]
    R = 2.0

    [riemann]
    vierbein = [["R", "0"], ["0", "R*sin(th)"]]

    [verify]
    seed = 7
    samples = 50

Exactly one of ``[deformation]``, ``[gauge]`` or ``[riemann]`` must be present.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .errors import DeformGeoError, ManifestError
from .expr_dsl import parse

TASKS = ("deformation", "gauge", "riemann")
SECTIONS = ("domain", "constants", "group", "verify") + TASKS


def _locate(text: str, section: str | None, key: str | None):
    """(line, column) of ``key`` inside ``[section]`` (best effort)."""
    if section is None:
        return None, None
    lines = text.splitlines()
    header = re.compile(r"^\s*\[+\s*([A-Za-z0-9_.\-]+)\s*\]+")
    current = None
    section_line = None
    for no, line in enumerate(lines, 1):
        m = header.match(line)
        if m:
            current = m.group(1)
            if current == section and section_line is None:
                section_line = no
            continue
        if current == section and key is not None:
            km = re.match(rf"^(\s*){re.escape(key)}\s*=", line)
            if km:
                return no, len(km.group(1)) + 1
    return section_line, 1 if section_line else None


@dataclass
class Manifest:
    path: str
    text: str
    data: dict
    sha256: str
    task: str
    coords: tuple
    constants: dict = field(default_factory=dict)
    domain: object = None

    def error(self, message, section=None, key=None):
        line, col = _locate(self.text, section, key)
        name = ".".join(p for p in (section, key) if p)
        return ManifestError(message, name or None, line, col)

    def section(self, name) -> dict:
        return self.data.get(name, {})

    def get(self, section, key, default=None, required=False):
        sec = self.data.get(section, {})
        if key not in sec:
            if required:
                raise self.error(f"missing required key {key!r}", section)
            return default
        return sec[key]

    # typed accessors -------------------------------------------------------
    def number(self, section, key, default=None, required=False) -> float:
        v = self.get(section, key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(f"{key} must be a number", section, key)
        return float(v)

    def expr_array(self, section, key, shape=None, names=None, required=False, default=None):
        """Nested list of expression strings (numbers allowed), validated."""
        v = self.get(section, key, default, required)
        if v is None:
            return None
        try:
            arr = np.array(v, dtype=object)
        except ValueError:
            raise self.error(f"{key} must be a rectangular array", section, key) from None
        if shape is not None and arr.shape != tuple(shape):
            raise self.error(f"{key} must have shape {tuple(shape)}, got {arr.shape}", section, key)
        allowed = set(self.coords if names is None else names) | set(self.constants)
        from .expr_dsl import variables

        for idx in np.ndindex(arr.shape):
            item = arr[idx]
            if isinstance(item, bool):
                raise self.error(f"{key}{list(idx)} must be an expression", section, key)
            if isinstance(item, (int, float)):
                arr[idx] = repr(float(item)) if item >= 0 else f"-{repr(float(-item))}"
                continue
            if not isinstance(item, str):
                raise self.error(f"{key}{list(idx)} must be an expression string", section, key)
            try:
                e = parse(item)
            except DeformGeoError as exc:
                raise self.error(f"{key}{list(idx)}: {exc}", section, key) from None
            unknown = variables(e) - allowed
            if unknown:
                raise self.error(
                    f"{key}{list(idx)} uses undeclared variables {sorted(unknown)}", section, key)
        return arr.tolist()

    def names(self, section, key, required=True):
        v = self.get(section, key, None, required)
        if v is None:
            return None
        if not isinstance(v, list) or not all(isinstance(s, str) and s.isidentifier() for s in v):
            raise self.error(f"{key} must be a list of identifiers", section, key)
        if len(set(v)) != len(v):
            raise self.error(f"{key} has duplicate names", section, key)
        return list(v)

    def vector(self, section, key, size=None, default=None, required=False):
        v = self.get(section, key, default, required)
        if v is None:
            return None
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(f"{key} must be a list of numbers", section, key) from None
        if arr.ndim != 1 or (size is not None and arr.size != size):
            raise self.error(f"{key} must be a list of {size} numbers", section, key)
        return arr


def _check_domain(m: Manifest):
    from .deformed_group import ChartDomain

    sec = m.section("domain")
    if not sec:
        raise m.error("missing [domain] section")
    coords = m.names("domain", "coords")
    n = len(coords)
    lo = m.vector("domain", "lo", n, required=True)
    hi = m.vector("domain", "hi", n, required=True)
    res = m.get("domain", "resolution", 5)
    if isinstance(res, int) and not isinstance(res, bool):
        res = [res] * n
    if (not isinstance(res, list) or len(res) != n
            or not all(isinstance(r, int) and not isinstance(r, bool) for r in res)):
        raise m.error("resolution must be an integer or a list of integers", "domain", "resolution")
    try:
        return ChartDomain.box(coords, lo, hi, res)
    except ValueError as exc:
        raise m.error(str(exc), "domain") from None


def loads(text: str, path: str = "<string>") -> Manifest:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ManifestError(exc.msg, None, exc.lineno, exc.colno) from None
    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()
    m = Manifest(path, text, data, sha, "", ())
    for name in data:
        if name not in SECTIONS:
            raise m.error(f"unknown section [{name}]", name)
    tasks = [t for t in TASKS if t in data]
    if len(tasks) != 1:
        raise m.error(f"exactly one of {list(TASKS)} is required, found {tasks}")
    m.task = tasks[0]
    consts = data.get("constants", {})
    for k, v in consts.items():
        if not k.isidentifier() or isinstance(v, bool) or not isinstance(v, (int, float)):
            raise m.error("constants must be numeric", "constants", k)
    m.constants = {k: float(v) for k, v in consts.items()}
    m.domain = _check_domain(m)
    m.coords = m.domain.coords
    clash = set(m.coords) & set(m.constants)
    if clash:
        raise m.error(f"constants shadow coordinates {sorted(clash)}", "constants")
    return m


def load(path) -> Manifest:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc.strerror}", str(p)) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ManifestError("manifest is not UTF-8 text", str(p)) from None
    return loads(text, str(p))


# verification settings ----------------------------------------------------------

DEFAULT_TOLERANCES = {
    "vierbein_inverse": 1e-12,
    "metric_inverse": 1e-12,
    "commutator": 1e-8,
    "structure_vs_anholonomy": 1e-8,
    "christoffel_fd": 1e-5,
    "christoffel_equivalence": 1e-9,
    "metric_compatibility": 1e-9,
    "riemann_fd": 1e-4,
    "bianchi": 1e-8,
    "curvature_equivalence": 1e-6,
    "rho_assembly": 1e-6,
    "gamma_fd": 1e-5,
    "rho_fd": 1e-4,
    "xi_fd": 1e-6,
    "anholonomy_fd": 1e-5,
    "gaussian_curvature": 1e-6,
    "gaussian_curvature_fd": 1e-4,
    "transport_norm": 1e-8,
    "holonomy": 0.02,
    "holonomy_slope": 0.1,
    "associativity": 1e-7,
    "property1": 1e-10,
    "structure_equation": 1e-10,
    "field_strength_fd": 1e-5,
    "generator_commutator": 1e-6,
    "generator_commutator_fd": 1e-6,
    "right_invariance": 1e-6,
    "gauge_invariance": 1e-12,
    "covariance_slope": 0.1,
    "connection_fd": 1e-6,
    "antisymmetry": 0.0,
}


@dataclass(frozen=True)
class VerifySettings:
    seed: int = 0
    samples: int = 50
    tolerances: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])


def verify_settings(m: Manifest, seed=None, tolerance_scale: float = 1.0) -> VerifySettings:
    s = m.get("verify", "seed", 0)
    if seed is not None:
        s = seed
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise m.error("seed must be an unsigned 64-bit integer", "verify", "seed")
    samples = m.get("verify", "samples", 50)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        raise m.error("samples must be a positive integer", "verify", "samples")
    given = m.get("verify", "tolerances", {})
    if not isinstance(given, dict):
        raise m.error("tolerances must be a table", "verify", "tolerances")
    tols = dict(DEFAULT_TOLERANCES)
    for k, v in given.items():
        if k not in DEFAULT_TOLERANCES:
            raise m.error(f"unknown tolerance {k!r}", "verify", "tolerances")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise m.error(f"tolerance {k!r} must be a positive number", "verify", "tolerances")
        tols[k] = float(v)
    if not tolerance_scale > 0:
        raise ManifestError("tolerance scale must be positive", "--tolerance-scale")
    return VerifySettings(s, samples, {k: v * tolerance_scale for k, v in tols.items()})
