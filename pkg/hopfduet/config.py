"""JSON run configuration: parsing, validation, presets and hashing."""

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hopfduet.dynamics import Axis, ClassifyConfig, IntegratorConfig, StepPolicy
from hopfduet.errors import ConfigError, HopfDuetError
from hopfduet.nf_core import NormalFormCoefficients
from hopfduet.presets import SET_P, REFERENCE_COEFFICIENTS, reference_coefficients
from hopfduet.wc_model import ForcingParams, WilsonCowanParams, forced_tau, wc_hopf_lambda

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTDIR_ENV = "HOPFDUET_OUTDIR"
DEFAULT_OUTDIR = "hopfduet-out"
FORMATS = ("csv", "json", "svg")
WC_PRESETS = {"paperP": SET_P}

_MISSING = object()


class _Reader:
    """Typed access to one JSON object; every key must be consumed."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must be an object")
        self.data = data
        self.path = path
        self.seen: set = set()

    def _where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, kind: type, default: Any = _MISSING) -> Any:
        self.seen.add(key)
        if key not in self.data or self.data[key] is None:
            if default is _MISSING:
                raise ConfigError(f"{self._where(key)}: required field missing")
            return default
        value = self.data[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{self._where(key)}: expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{self._where(key)}: must be finite")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{self._where(key)}: expected an integer, got {value!r}")
            return value
        if not isinstance(value, kind):
            raise ConfigError(f"{self._where(key)}: expected {kind.__name__}, got {value!r}")
        return value

    def sub(self, key: str) -> Optional["_Reader"]:
        self.seen.add(key)
        if key not in self.data or self.data[key] is None:
            return None
        return _Reader(self.data[key], self._where(key))

    def done(self):
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError(f"{self._where(unknown[0])}: unknown key")


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (HopfDuetError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NfBlock:
    coefficients: NormalFormCoefficients
    lam: float = 0.0
    eps: float = 0.0
    source: str = "inline"


@dataclass(frozen=True)
class WcBlock:
    params: WilsonCowanParams
    preset: Optional[str] = None


@dataclass(frozen=True)
class ForcingBlock:
    forcing: ForcingParams
    match_period: bool = True


@dataclass(frozen=True)
class CurvesBlock:
    eps_start: float = 0.0
    eps_stop: float = 0.1
    eps_n: int = 41
    lam_start: float = -0.05
    lam_stop: float = 0.2
    lam_n: int = 61
    method: str = "second-order"

    @property
    def eps_values(self) -> np.ndarray:
        return np.linspace(self.eps_start, self.eps_stop, self.eps_n)

    @property
    def lam_values(self) -> np.ndarray:
        return np.linspace(self.lam_start, self.lam_stop, self.lam_n)


@dataclass(frozen=True)
class ExtractBlock:
    eps_probe: float = 1e-3
    scheme: str = "central"
    normalization: str = "unit-norm"
    scale: complex = 1.0
    divisor_floor: float = 1e-8
    reference: Optional[str] = None


@dataclass(frozen=True)
class SweepBlock:
    p1: Axis
    p2: Optional[Axis] = None
    bisect_tol: Optional[float] = 1e-3
    follow_ip: bool = True
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)


@dataclass(frozen=True)
class BranchBlock:
    family: str = "minus"
    param: str = "lambda_slope"
    start: float = 3.03
    stop: float = 3.08
    hb_window: float = 0.05
    policy: StepPolicy = field(default_factory=StepPolicy)


@dataclass(frozen=True)
class SimBlock:
    t_end: float = 200.0
    samples: int = 2001
    chart: str = "cartesian"
    ics: Tuple[Tuple[str, Tuple[float, ...]], ...] = ()
    transient: float = 0.0


@dataclass(frozen=True)
class OutputBlock:
    directory: Optional[str] = None
    formats: Tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    nf: Optional[NfBlock] = None
    wc: Optional[WcBlock] = None
    forcing: Optional[ForcingBlock] = None
    curves: CurvesBlock = field(default_factory=CurvesBlock)
    extract: ExtractBlock = field(default_factory=ExtractBlock)
    sweep: Optional[SweepBlock] = None
    branch: BranchBlock = field(default_factory=BranchBlock)
    sim: SimBlock = field(default_factory=SimBlock)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputBlock = field(default_factory=OutputBlock)

    def require_nf(self) -> NfBlock:
        if self.nf is None:
            raise ConfigError("nf: block required for this command (inline coefficients, file or preset)")
        return self.nf

    def require_wc(self) -> WcBlock:
        if self.wc is None:
            raise ConfigError("wc: block required for this command (parameters or preset)")
        return self.wc

    def require_forcing(self) -> ForcingBlock:
        if self.forcing is None:
            raise ConfigError("forcing: block required for this command")
        return self.forcing


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_coefficients(r: _Reader, base_dir: Optional[Path]) -> Tuple[NormalFormCoefficients, str]:
    preset = r.get("preset", str, None)
    file_ref = r.get("file", str, None)
    inline = r.get("coefficients", dict, None)
    given = [x for x in (preset, file_ref, inline) if x is not None]
    if len(given) != 1:
        raise ConfigError(f"{r.path}: give exactly one of 'preset', 'file' or 'coefficients'")
    if preset is not None:
        return reference_coefficients(preset), f"preset:{preset}"
    if file_ref is not None:
        path = Path(file_ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{r.path}.file: cannot read coefficients from {path}: {exc}") from exc
        if isinstance(data, dict):
            data = {k: v for k, v in data.items() if k != "_meta"}
        return _build(f"{r.path}.file", NormalFormCoefficients.from_dict, data=data), f"file:{file_ref}"
    return _build(f"{r.path}.coefficients", NormalFormCoefficients.from_dict, data=inline), "inline"


def _parse_nf(r: _Reader, base_dir: Optional[Path]) -> NfBlock:
    coefficients, source = _parse_coefficients(r, base_dir)
    lam = r.get("lam", float, 0.0)
    eps = r.get("eps", float, 0.0)
    if eps < 0:
        raise ConfigError(f"{r.path}.eps: must be >= 0")
    r.done()
    return NfBlock(coefficients, lam, eps, source)


WC_FIELDS = ("a", "b", "c", "d", "theta", "tau", "lambda_slope", "eps", "b_sp")


def _parse_wc(r: _Reader) -> WcBlock:
    preset = r.get("preset", str, None)
    values: Dict[str, float] = {}
    if preset is not None:
        if preset not in WC_PRESETS:
            raise ConfigError(f"{r.path}.preset: unknown preset '{preset}' (known: {', '.join(WC_PRESETS)})")
        values.update(WC_PRESETS[preset])
    for name in WC_FIELDS:
        value = r.get(name, float, None)
        if value is not None:
            values[name] = value
    r.done()
    values.setdefault("eps", 0.0)
    values.setdefault("b_sp", 0.0)
    for name in ("a", "b", "c", "d", "theta", "tau"):
        if name not in values:
            raise ConfigError(f"{r.path}.{name}: required field missing")
    if "lambda_slope" not in values:
        probe = _build(r.path, WilsonCowanParams, **dict(values, lambda_slope=1.0))
        values["lambda_slope"] = _build(f"{r.path}.lambda_slope", wc_hopf_lambda, p=probe)
    return WcBlock(_build(r.path, WilsonCowanParams, **values), preset)


def _parse_forcing(r: _Reader) -> ForcingBlock:
    fp = _build(
        r.path,
        ForcingParams,
        A=r.get("A", float, 0.0),
        f=r.get("f", float, 2.5),
        h=r.get("h", float, 0.0),
        n=r.get("n", int, 5),
    )
    match = r.get("match_period", bool, True)
    r.done()
    return ForcingBlock(fp, match)


def _parse_curves(r: _Reader) -> CurvesBlock:
    block = CurvesBlock(
        eps_start=r.get("eps_start", float, 0.0),
        eps_stop=r.get("eps_stop", float, 0.1),
        eps_n=r.get("eps_n", int, 41),
        lam_start=r.get("lam_start", float, -0.05),
        lam_stop=r.get("lam_stop", float, 0.2),
        lam_n=r.get("lam_n", int, 61),
        method=r.get("method", str, "second-order"),
    )
    r.done()
    if block.method not in ("second-order", "exact"):
        raise ConfigError(f"{r.path}.method: must be 'second-order' or 'exact'")
    if block.eps_start < 0 or block.eps_stop < block.eps_start:
        raise ConfigError(f"{r.path}.eps_start: need 0 <= eps_start <= eps_stop")
    if block.eps_n < 1 or block.lam_n < 1:
        raise ConfigError(f"{r.path}.eps_n: sample counts must be positive")
    return block


def _parse_extract(r: _Reader) -> ExtractBlock:
    scale = r.get("scale", list, [1.0, 0.0])
    if len(scale) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in scale):
        raise ConfigError(f"{r.path}.scale: expected [re, im]")
    block = ExtractBlock(
        eps_probe=r.get("eps_probe", float, 1e-3),
        scheme=r.get("scheme", str, "central"),
        normalization=r.get("normalization", str, "unit-norm"),
        scale=complex(scale[0], scale[1]),
        divisor_floor=r.get("divisor_floor", float, 1e-8),
        reference=r.get("reference", str, None),
    )
    r.done()
    if not block.eps_probe > 0:
        raise ConfigError(f"{r.path}.eps_probe: must be positive")
    if block.scheme not in ("central", "forward"):
        raise ConfigError(f"{r.path}.scheme: must be 'central' or 'forward'")
    if block.normalization not in ("e-component", "unit-norm"):
        raise ConfigError(f"{r.path}.normalization: must be 'e-component' or 'unit-norm'")
    if block.scale == 0:
        raise ConfigError(f"{r.path}.scale: must be nonzero")
    if block.reference is not None and block.reference not in REFERENCE_COEFFICIENTS:
        raise ConfigError(f"{r.path}.reference: unknown preset '{block.reference}'")
    return block


def _parse_axis(r: _Reader) -> Axis:
    axis = _build(
        r.path,
        Axis,
        name=r.get("name", str),
        start=r.get("start", float),
        stop=r.get("stop", float),
        n=r.get("n", int),
    )
    r.done()
    return axis


def _parse_integrator(r: _Reader) -> IntegratorConfig:
    kwargs = {}
    for name in ("rel_tol", "abs_tol", "max_step", "max_time", "rk4_step"):
        value = r.get(name, float, None)
        if value is not None:
            kwargs[name] = value
    for name in ("method", "solver"):
        value = r.get(name, str, None)
        if value is not None:
            kwargs[name] = value
    r.done()
    return _build(r.path, IntegratorConfig, **kwargs)


def _parse_classify(r: Optional[_Reader]) -> ClassifyConfig:
    if r is None:
        return ClassifyConfig()
    kwargs: Dict[str, Any] = {}
    for name in ("transient_periods", "window_periods", "fp_floor", "phase_tol", "drift_tol", "closure_tol", "ha_threshold"):
        value = r.get(name, float, None)
        if value is not None:
            kwargs[name] = value
    samples = r.get("samples_per_period", int, None)
    if samples is not None:
        kwargs["samples_per_period"] = samples
    integrator = r.sub("integrator")
    if integrator is not None:
        kwargs["integrator"] = _parse_integrator(integrator)
    r.done()
    return _build(r.path, ClassifyConfig, **kwargs)


def _parse_sweep(r: _Reader) -> SweepBlock:
    p1_reader = r.sub("p1")
    if p1_reader is None:
        raise ConfigError(f"{r.path}.p1: required field missing")
    p1 = _parse_axis(p1_reader)
    p2_reader = r.sub("p2")
    p2 = _parse_axis(p2_reader) if p2_reader is not None else None
    bisect = r.get("bisect_tol", float, 1e-3)
    if r.data.get("bisect") is False:
        bisect = None
    r.get("bisect", bool, True)
    follow = r.get("follow_ip", bool, True)
    classify = _parse_classify(r.sub("classify"))
    r.done()
    if p2 is not None and p1.n * p2.n > 10000:
        raise ConfigError(f"{r.path}: grid of {p1.n * p2.n} cells exceeds 10000")
    return SweepBlock(p1, p2, bisect, follow, classify)


def _parse_branch(r: _Reader) -> BranchBlock:
    family = r.get("family", str, "minus")
    if family not in ("plus", "minus"):
        raise ConfigError(f"{r.path}.family: must be 'plus' (in-phase) or 'minus' (anti-phase)")
    policy_kwargs = {}
    for name in ("initial_step", "min_step", "max_step", "grow", "bisect_tol"):
        value = r.get(name, float, None)
        if value is not None:
            policy_kwargs[name] = value
    max_points = r.get("max_points", int, None)
    if max_points is not None:
        policy_kwargs["max_points"] = max_points
    tag = r.get("tag_torus", bool, None)
    if tag is not None:
        policy_kwargs["tag_torus"] = tag
    block = BranchBlock(
        family=family,
        param=r.get("param", str, "lambda_slope"),
        start=r.get("start", float, 3.03),
        stop=r.get("stop", float, 3.08),
        hb_window=r.get("hb_window", float, 0.05),
        policy=_build(r.path, StepPolicy, **policy_kwargs),
    )
    r.done()
    return block


def _parse_sim(r: _Reader) -> SimBlock:
    raw_ics = r.get("ics", list, [])
    ics: List[Tuple[str, Tuple[float, ...]]] = []
    for k, item in enumerate(raw_ics):
        where = f"{r.path}.ics[{k}]"
        if not isinstance(item, dict) or set(item) - {"label", "state"} or "state" not in item:
            raise ConfigError(f"{where}: expected {{'label': str, 'state': [numbers]}}")
        state = item["state"]
        if not isinstance(state, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in state):
            raise ConfigError(f"{where}.state: expected a list of numbers")
        ics.append((str(item.get("label", f"ic{k}")), tuple(float(v) for v in state)))
    block = SimBlock(
        t_end=r.get("t_end", float, 200.0),
        samples=r.get("samples", int, 2001),
        chart=r.get("chart", str, "cartesian"),
        ics=tuple(ics),
        transient=r.get("transient", float, 0.0),
    )
    r.done()
    if not block.t_end > 0 or block.samples < 2 or block.transient < 0:
        raise ConfigError(f"{r.path}.t_end: need t_end > 0, samples >= 2, transient >= 0")
    if block.chart not in ("cartesian", "reduced"):
        raise ConfigError(f"{r.path}.chart: must be 'cartesian' or 'reduced'")
    return block


def _parse_output(r: _Reader) -> OutputBlock:
    directory = r.get("directory", str, None)
    formats = r.get("formats", list, list(FORMATS))
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"{r.path}.formats: unsupported format(s) {bad}")
    r.done()
    return OutputBlock(directory, tuple(f for f in FORMATS if f in formats))


def apply_preset(raw: Dict[str, Any], preset: str) -> Dict[str, Any]:
    """Merge a named preset into the raw config; explicit keys win."""
    merged = dict(raw)
    if preset in WC_PRESETS:
        block = dict(merged.get("wc") or {})
        block.setdefault("preset", preset)
        merged["wc"] = block
    elif preset in REFERENCE_COEFFICIENTS:
        block = dict(merged.get("nf") or {})
        if not any(k in block for k in ("preset", "file", "coefficients")):
            block["preset"] = preset
        merged["nf"] = block
    else:
        known = ", ".join(sorted(list(WC_PRESETS) + list(REFERENCE_COEFFICIENTS)))
        raise ConfigError(f"unknown preset '{preset}' (known: {known})")
    return merged


def parse_config(raw: Any, preset: Optional[str] = None, base_dir: Optional[Path] = None) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if preset is not None:
        raw = apply_preset(raw, preset)
    r = _Reader(raw, "")
    sections = {}
    readers = {
        "nf": lambda sub: _parse_nf(sub, base_dir),
        "wc": _parse_wc,
        "forcing": _parse_forcing,
        "curves": _parse_curves,
        "extract": _parse_extract,
        "sweep": _parse_sweep,
        "branch": _parse_branch,
        "sim": _parse_sim,
        "integrator": _parse_integrator,
        "output": _parse_output,
    }
    for key, reader in readers.items():
        sub = r.sub(key)
        if sub is not None:
            sections[key] = reader(sub)
    r.done()
    config = RunConfig(**sections)
    if config.forcing is not None and config.forcing.match_period and config.wc is not None:
        p = config.wc.params
        tau = _build("forcing.f", forced_tau, f=config.forcing.forcing.f, lambda_slope=p.lambda_slope, p=p)
        config = dataclasses.replace(config, wc=WcBlock(p.with_(tau=tau), config.wc.preset))
    return config


def load_config(path: Optional[str], preset: Optional[str] = None) -> RunConfig:
    """Read and validate a JSON config file (or only a preset when path is None)."""
    if path is None:
        return parse_config({}, preset)
    file_path = Path(path)
    try:
        raw = json.loads(file_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    logger.debug("loaded config %s", path)
    return parse_config(raw, preset, file_path.parent)


# ---------------------------------------------------------------------------
# Canonical form, hash and output directory
# ---------------------------------------------------------------------------


def jsonable(value: Any) -> Any:
    """Plain JSON structure for dataclasses, numpy values and complex numbers."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": jsonable(float(value.real)), "im": jsonable(float(value.imag))}
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(jsonable(value), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    """First 12 hex digits of the SHA-256 of the canonical config (output directory excluded)."""
    payload = dataclasses.replace(config, output=OutputBlock(None, config.output.formats))
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:12]


def resolve_output_dir(cli_out: Optional[str], config: RunConfig) -> Path:
    """--out, then HOPFDUET_OUTDIR, then output.directory, then ./hopfduet-out."""
    for candidate in (cli_out, os.environ.get(OUTDIR_ENV), config.output.directory):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUTDIR)


def ic_list(block: SimBlock) -> Optional[Sequence[Tuple[str, Sequence[float]]]]:
    return [(label, list(state)) for label, state in block.ics] or None
