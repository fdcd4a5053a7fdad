"""Run configuration: ``key=value`` text, validated fail-closed."""

import os
from dataclasses import asdict, dataclass, fields

from mnsflow.initial import ICSpec
from mnsflow.models import ModelKind

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "MNSFLOW_OUTPUT_DIR"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: ModelKind
    n: int
    T: float
    ic: ICSpec
    dt: float = None
    cfl: float = None
    dt_max: float = 1e-2
    riesz_sign: int = 1
    m: int = 3
    C: float = 1.0
    output_dir: str = "output"
    diag_every: int = 1
    snapshot_every: int = 0
    restart: str = None
    blowup_threshold: float = 1e6
    leray: bool = False
    quadrature: str = "hermite"

    def as_dict(self):
        d = asdict(self)
        d["model"] = self.model.value
        d["ic"] = str(self.ic)
        return d

    def to_text(self):
        lines = []
        for key, value in self.as_dict().items():
            if value is not None:
                lines.append(f"{key}={str(value).lower() if isinstance(value, bool) else value}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(f"{key}: must be finite, got {text!r}")
    return value


def _bool(key, text):
    low = text.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _model(key, text):
    try:
        return ModelKind.parse(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _ic(key, text):
    try:
        return ICSpec.parse(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _str(key, text):
    if not text:
        raise ConfigError(f"{key}: must not be empty")
    return text


_PARSERS = {
    "model": _model,
    "n": _int,
    "T": _float,
    "ic": _ic,
    "dt": _float,
    "cfl": _float,
    "dt_max": _float,
    "riesz_sign": _int,
    "m": _int,
    "C": _float,
    "output_dir": _str,
    "diag_every": _int,
    "snapshot_every": _int,
    "restart": _str,
    "blowup_threshold": _float,
    "leray": _bool,
    "quadrature": _str,
}
_REQUIRED = ("model", "n", "T", "ic")


def _validate(v):
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    n = v["n"]
    need(n >= 8 and n % 2 == 0, f"n must be even >= 8, got {n}")
    need(v["T"] > 0, f"T must be positive, got {v['T']}")
    need(not ("dt" in v and "cfl" in v), "give only one of dt and cfl")
    if "dt" in v:
        need(v["dt"] > 0, f"dt must be positive, got {v['dt']}")
    if "cfl" in v:
        need(0 < v["cfl"] <= 1, f"cfl must lie in (0, 1], got {v['cfl']}")
    if "dt_max" in v:
        need(v["dt_max"] > 0, f"dt_max must be positive, got {v['dt_max']}")
    if "riesz_sign" in v:
        need(v["riesz_sign"] in (1, -1), f"riesz_sign must be +1 or -1, got {v['riesz_sign']}")
    if "m" in v:
        need(v["m"] >= 0, f"m must be >= 0, got {v['m']}")
    if "C" in v:
        need(v["C"] > 0, f"C must be positive, got {v['C']}")
    if "diag_every" in v:
        need(v["diag_every"] >= 1, f"diag_every must be >= 1, got {v['diag_every']}")
    if "snapshot_every" in v:
        need(v["snapshot_every"] >= 0, f"snapshot_every must be >= 0, got {v['snapshot_every']}")
    if "blowup_threshold" in v:
        need(v["blowup_threshold"] > 0,
             f"blowup_threshold must be positive, got {v['blowup_threshold']}")
    if "quadrature" in v:
        need(v["quadrature"] in ("hermite", "trapezoid"),
             f"quadrature must be hermite or trapezoid, got {v['quadrature']!r}")
    ic = v["ic"]
    if ic.kind == "random":
        K = n // 3
        k0 = ic.params[1]
        need(1 <= k0 <= K - 1, f"ic: peak wavenumber k0 must lie in [1, {K - 1}] for n={n}, got {k0}")


def parse_config(text, env=None):
    """Parse and validate a configuration.

    Lines are ``key=value``; blank lines and ``#`` comments are ignored.
    Unknown or repeated keys are errors. The output directory may be
    overridden by the ``MNSFLOW_OUTPUT_DIR`` environment variable. Without
    ``dt`` or ``cfl`` the step is CFL-controlled at ``cfl=0.4``.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        values[key] = _PARSERS[key](key, value)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError("missing required key" + ("s " if len(missing) > 1 else " ")
                          + ", ".join(repr(k) for k in missing))
    _validate(values)
    if "dt" not in values and "cfl" not in values:
        values["cfl"] = 0.4
    env = os.environ if env is None else env
    override = env.get(OUTPUT_DIR_ENV)
    if override:
        values["output_dir"] = override
    return RunConfig(**values)


def load_config(path, env=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), env=env)
