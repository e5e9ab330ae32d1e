"""JSON encoding of measures, gains, couplings, portfolios and instances.

Unbounded domain endpoints serialize as null. All numbers are plain IEEE
doubles in decimal.
"""

from __future__ import annotations

import json
import math
from typing import Any

from .curtain import Coupling
from .errors import SchemaError
from .gains import (
    Affine,
    ConcavePower,
    GainSpec,
    Identity,
    PiecewiseLinearConcave,
    PiecewiseLinearConvex,
    PowerAbs,
    Quadratic,
    Sqrt,
    VixLog,
)
from .measures import Atom, DiscreteMarginal, DomainInterval, PieceMeasure, Uniform
from .superrep import Portfolio


def domain_to_json(d: DomainInterval) -> dict:
    return {"lo": None if math.isinf(d.lo) else d.lo,
            "hi": None if math.isinf(d.hi) else d.hi}


def domain_from_json(obj: Any) -> DomainInterval:
    if obj is None:
        return DomainInterval()
    return DomainInterval(obj.get("lo"), obj.get("hi"))


def measure_to_json(m: PieceMeasure) -> dict:
    pieces = []
    for p in m.pieces:
        if isinstance(p, Atom):
            pieces.append({"type": "atom", "x": p.x, "mass": p.mass})
        else:
            pieces.append({"type": "uniform", "lo": p.lo, "hi": p.hi, "mass": p.mass})
    return {"domain": domain_to_json(m.domain), "pieces": pieces}


def measure_from_json(obj: Any) -> PieceMeasure:
    try:
        dom = domain_from_json(obj.get("domain"))
        pieces = []
        for q in obj["pieces"]:
            if q["type"] == "atom":
                pieces.append(Atom(float(q["x"]), float(q["mass"])))
            elif q["type"] == "uniform":
                pieces.append(Uniform(float(q["lo"]), float(q["hi"]), float(q["mass"])))
            else:
                raise SchemaError(f"unknown piece type {q['type']!r}")
        return PieceMeasure(pieces, dom)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad measure document: {exc}") from exc


def marginal_to_json(m: DiscreteMarginal) -> dict:
    return {"atoms": list(m.atoms), "weights": list(m.weights),
            "domain": domain_to_json(m.domain)}


def marginal_from_json(obj: Any) -> DiscreteMarginal:
    try:
        return DiscreteMarginal(obj["atoms"], obj["weights"],
                                domain_from_json(obj.get("domain")))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad marginal document: {exc}") from exc


_GAMMA_KINDS = {
    "vixlog": lambda o: VixLog(float(o.get("tau", 1.0))),
    "quadratic": lambda o: Quadratic(),
    "power": lambda o: PowerAbs(float(o.get("p", 2.0))),
    "affine": lambda o: Affine(float(o.get("slope", 1.0)), float(o.get("intercept", 0.0))),
    "pwl_convex": lambda o: PiecewiseLinearConvex(
        tuple(o.get("breakpoints", ())), tuple(o["slopes"]), float(o.get("value0", 0.0))),
}

_PHI_KINDS = {
    "sqrt": lambda o: Sqrt(),
    "power": lambda o: ConcavePower(float(o.get("q", 0.5))),
    "identity": lambda o: Identity(),
    "pwl_concave": lambda o: PiecewiseLinearConcave(
        tuple(o.get("breakpoints", ())), tuple(o["slopes"]), float(o.get("value0", 0.0))),
}


def gain_to_json(spec: GainSpec) -> dict:
    g = {"kind": spec.gamma.kind}
    if isinstance(spec.gamma, VixLog):
        g["tau"] = spec.gamma.tau
    elif isinstance(spec.gamma, PowerAbs):
        g["p"] = spec.gamma.p
    elif isinstance(spec.gamma, Affine):
        g["slope"] = spec.gamma.slope
        g["intercept"] = spec.gamma.intercept
    elif isinstance(spec.gamma, PiecewiseLinearConvex):
        g["breakpoints"] = list(spec.gamma.breakpoints)
        g["slopes"] = list(spec.gamma.slopes)
        g["value0"] = spec.gamma.value0
    f = {"kind": spec.phi.kind}
    if isinstance(spec.phi, ConcavePower):
        f["q"] = spec.phi.q
    elif isinstance(spec.phi, PiecewiseLinearConcave):
        f["breakpoints"] = list(spec.phi.breakpoints)
        f["slopes"] = list(spec.phi.slopes)
        f["value0"] = spec.phi.value0
    return {"gamma": g, "phi": f}


def gain_from_json(obj: Any) -> GainSpec:
    try:
        gk = obj["gamma"]["kind"]
        fk = obj["phi"]["kind"]
        if gk not in _GAMMA_KINDS:
            raise SchemaError(f"unknown gamma kind {gk!r}")
        if fk not in _PHI_KINDS:
            raise SchemaError(f"unknown phi kind {fk!r}")
        return GainSpec(_GAMMA_KINDS[gk](obj["gamma"]), _PHI_KINDS[fk](obj["phi"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad gain document: {exc}") from exc


def coupling_to_json(c: Coupling) -> dict:
    return {"first": marginal_to_json(c.first),
            "rows": [measure_to_json(r) for r in c.rows]}


def coupling_from_json(obj: Any) -> Coupling:
    try:
        first = marginal_from_json(obj["first"])
        rows = tuple(measure_from_json(r) for r in obj["rows"])
        return Coupling(first, rows)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad coupling document: {exc}") from exc


def portfolio_to_json(p: Portfolio) -> dict:
    return {"a_star": p.a_star, "b_star": p.b_star, "v_star": p.v_star,
            "u1": {"const": p.u1_const, "gamma_coef": p.u1_gamma_coef},
            "u2": {"gamma_coef": p.u2_gamma_coef},
            "delta": p.delta, "gamma_weight": p.gamma_weight,
            "phi_shift": p.phi_shift}


def portfolio_from_json(obj: Any) -> Portfolio:
    try:
        return Portfolio(a_star=float(obj["a_star"]), b_star=float(obj["b_star"]),
                         v_star=float(obj["v_star"]),
                         u1_const=float(obj["u1"]["const"]),
                         u1_gamma_coef=float(obj["u1"]["gamma_coef"]),
                         u2_gamma_coef=float(obj["u2"]["gamma_coef"]),
                         delta=float(obj["delta"]),
                         gamma_weight=float(obj["gamma_weight"]),
                         phi_shift=float(obj.get("phi_shift", 0.0)))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad portfolio document: {exc}") from exc


DEFAULT_OPTIONS = {"enum_cap": 9, "fw_tol": 1e-9, "fw_max_iter": 100000}


class Instance:
    """A problem instance: marginals, gain pair and solver options."""

    def __init__(self, mu1: DiscreteMarginal | PieceMeasure, mu2: PieceMeasure,
                 gain: GainSpec, options: dict | None = None):
        self.mu1 = mu1
        self.mu2 = mu2
        self.gain = gain
        self.options = dict(DEFAULT_OPTIONS)
        if options:
            self.options.update(options)

    @property
    def mu1_measure(self) -> PieceMeasure:
        if isinstance(self.mu1, DiscreteMarginal):
            return self.mu1.as_measure()
        return self.mu1

    def to_json(self) -> dict:
        mu1 = (marginal_to_json(self.mu1) if isinstance(self.mu1, DiscreteMarginal)
               else measure_to_json(self.mu1))
        return {"mu1": mu1, "mu2": measure_to_json(self.mu2),
                "gain": gain_to_json(self.gain), "options": self.options}

    @staticmethod
    def from_json(obj: Any) -> "Instance":
        try:
            mu1_obj = obj["mu1"]
            if "atoms" in mu1_obj:
                mu1 = marginal_from_json(mu1_obj)
            elif "pieces" in mu1_obj:
                mu1 = measure_from_json(mu1_obj)
            else:
                raise SchemaError("mu1 needs either atoms/weights or pieces")
            mu2 = measure_from_json(obj["mu2"])
            gain = gain_from_json(obj["gain"])
            return Instance(mu1, mu2, gain, obj.get("options"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad instance document: {exc}") from exc

    @staticmethod
    def load(path: str) -> "Instance":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
        return Instance.from_json(doc)
