"""TOML experiment files.

Sections ``[domain]``, ``[phi]``, ``[coefficients]``, ``[noise]``, ``[data]``
and ``[experiment]``; coefficient functions are tables
``{kind, params, omega}`` resolved through the registry in :mod:`model`.
The README documents every key.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import tomli

from .model import CoefFn, CoefficientSet, PowerLaw, ProblemSpec, SpecError, Tabulated, TimeFn, XiSpec, phi_truncate
from .solver import SolverConfig


class ConfigError(ValueError):
    """Malformed configuration; ``where`` names the offending key."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class Experiment:
    spec: ProblemSpec
    cfg: SolverConfig
    paths: int = 1
    eps_list: tuple = ()
    rho_list: tuple = ()
    raw: bytes = b""
    source: str = "<string>"
    extra: dict = field(default_factory=dict)

    @property
    def spec_hash(self):
        return hashlib.sha256(self.raw).hexdigest()

    def with_seed(self, seed):
        return replace(self, spec=replace(self.spec, seed=int(seed)))


_KNOWN = {
    "domain": {"dim", "box", "nodes", "T"},
    "phi": {"kind", "m", "r", "values", "truncate"},
    "coefficients": {"epsilon", "sigma", "b", "c", "f", "transport"},
    "noise": {"seed", "K", "nu", "g"},
    "data": {"xi"},
    "experiment": {"mu", "alpha", "dt", "paths", "record_every", "scheme", "n_modes", "eps_list",
                   "rho_list", "p_list", "newton_tol", "newton_max_iter", "substeps"},
}


def _coef(v, where):
    if isinstance(v, (int, float)):
        return CoefFn("const", (float(v),))
    if not isinstance(v, dict):
        raise ConfigError("expected a number or a table {kind, params, omega}", where)
    unknown = set(v) - {"kind", "params", "omega"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", where)
    try:
        params = v.get("params", [0.0])
        if isinstance(params, (int, float)):
            params = [params]
        return CoefFn(v.get("kind", "const"), tuple(params), float(v.get("omega", 0.0)))
    except (SpecError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from None


def _coef_list(v, where):
    if v is None:
        return ()
    if not isinstance(v, list):
        v = [v]
    return tuple(_coef(x, f"{where}[{i}]") for i, x in enumerate(v))


def _need(tbl, key, where, kind=None):
    if key not in tbl:
        raise ConfigError("missing required key", f"{where}.{key}")
    v = tbl[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"expected {kind if isinstance(kind, type) else kind[0]}", f"{where}.{key}")
    return v


def _phi(tbl):
    kind = tbl.get("kind", "power")
    try:
        if kind == "power":
            phi = PowerLaw(float(_need(tbl, "m", "phi", (int, float))))
        elif kind == "tabulated":
            phi = Tabulated(tuple(_need(tbl, "r", "phi", list)), tuple(_need(tbl, "values", "phi", list)),
                            float(tbl.get("m", 1.0)))
        else:
            raise ConfigError(f"unknown kind {kind!r} (use 'power' or 'tabulated')", "phi.kind")
        if tbl.get("truncate"):
            phi = phi_truncate(phi, float(tbl["truncate"]))
    except SpecError as exc:
        raise ConfigError(str(exc), "phi") from None
    return phi


def _xi(v):
    if v is None:
        return XiSpec()
    if not isinstance(v, dict):
        raise ConfigError("expected a table", "data.xi")
    kind = v.get("kind", "function")
    try:
        fn = _coef(v["fn"], "data.xi.fn") if "fn" in v else XiSpec().fn
        return XiSpec(kind, fn, float(v.get("scale", 1.0)), float(v.get("low", 0.0)),
                      float(v.get("high", 1.0)), int(v.get("n_modes", 6)))
    except SpecError as exc:
        raise ConfigError(str(exc), "data.xi") from None


def parse_config(raw, source="<string>"):
    """Build an :class:`Experiment` from TOML bytes."""
    if isinstance(raw, str):
        raw = raw.encode()
    try:
        doc = tomli.loads(raw.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"TOML parse error: {exc}", source) from None
    for sec, tbl in doc.items():
        if sec not in _KNOWN:
            raise ConfigError("unknown section", sec)
        unknown = set(tbl) - _KNOWN[sec]
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", sec)
    dom = doc.get("domain")
    if dom is None:
        raise ConfigError("missing section", "domain")
    d = int(_need(dom, "dim", "domain", int))
    box = dom.get("box", [[0.0, 1.0]] * d)
    nodes = dom.get("nodes", [63] * d)
    if isinstance(nodes, int):
        nodes = [nodes] * d
    if len(box) != d or len(nodes) != d:
        raise ConfigError(f"box and nodes need {d} entries", "domain")
    T = float(_need(dom, "T", "domain", (int, float)))
    phi = _phi(doc.get("phi", {"kind": "power", "m": 1.0}))

    co = doc.get("coefficients", {})
    noise = doc.get("noise", {})
    sigma = co.get("sigma", 0.0)
    if isinstance(sigma, dict):
        sigma = TimeFn(float(sigma.get("amp", 0.0)), float(sigma.get("omega", 0.0)))
    elif isinstance(sigma, (int, float)):
        sigma = TimeFn(float(sigma))
    else:
        raise ConfigError("expected a number or {amp, omega}", "coefficients.sigma")
    nu = _coef_list(noise.get("nu"), "noise.nu")
    g = _coef_list(noise.get("g"), "noise.g")
    K = int(noise.get("K", max(len(nu), len(g))))
    if len(nu) > K or len(g) > K:
        raise ConfigError(f"more than K={K} entries in nu or g", "noise.K")
    nu = nu + (CoefFn.zero(),) * (K - len(nu))
    g = g + (CoefFn.zero(),) * (K - len(g))
    b = _coef_list(co.get("b"), "coefficients.b")
    if b and len(b) != d:
        raise ConfigError(f"b needs {d} components", "coefficients.b")
    coeffs = CoefficientSet(b=b, c=_coef(co.get("c", 0.0), "coefficients.c"), sigma=sigma, nu=nu,
                            f=_coef(co.get("f", 0.0), "coefficients.f"), g=g)
    ex = doc.get("experiment", {})
    xi = _xi(doc.get("data", {}).get("xi"))
    try:
        spec = ProblemSpec(d, tuple(tuple(x) for x in box), tuple(nodes), T, phi, coeffs,
                           float(co.get("epsilon", 0.0)), xi, ex.get("mu", "inf"),
                           float(ex.get("alpha", 2.0)), int(noise.get("seed", 0)),
                           co.get("transport", "stratonovich"))
    except (SpecError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "spec") from None
    try:
        cfg = SolverConfig(dt=float(_need(ex, "dt", "experiment", (int, float))),
                           newton_tol=float(ex.get("newton_tol", 1e-10)),
                           newton_max_iter=int(ex.get("newton_max_iter", 50)),
                           scheme=ex.get("scheme", "fd"), n_modes=ex.get("n_modes"),
                           record_every=int(ex.get("record_every", 1)),
                           p_list=tuple(ex.get("p_list", [2.0])),
                           noise_substeps=int(ex.get("substeps", 1)))
        cfg.n_steps(T)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "experiment") from None
    paths = int(ex.get("paths", 1))
    if paths < 1:
        raise ConfigError("must be positive", "experiment.paths")
    return Experiment(spec, cfg, paths, tuple(float(e) for e in ex.get("eps_list", [])),
                      tuple(float(r) for r in ex.get("rho_list", [])), raw, source)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(raw, str(path))
