"""Registry of numerical and exact checks run by the command line tool.

Every check returns a :class:`CheckRecord`; the residual is stored even on
success and a check passes iff ``residual <= tolerance``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import ledger as lg
from .charclass import cs_action, delta_phi, trace_power, transgression
from .config import Builder, ExperimentConfig, named_rng
from .fields import FormField, build_grid, exterior_derivative, integrate_top, multi_indices
from .geometry import (
    MetricField,
    OrientedMetric,
    SymmetricTensorField,
    apply_diffeo,
    lie_derivative_metric,
    random_connection,
    random_fourier_metric,
    random_vector_field,
)
from .torusbundle import build_mapping_torus, pontryagin_number
from .variational import (
    COTTON_NORMALIZATION,
    FlatHolonomyDatum,
    MetricPath,
    cotton_classical,
    cotton_divergence,
    cotton_pairing,
    flat_holonomy_check,
    path_integral_sigma,
    sigma_pairing,
)


@dataclass(frozen=True)
class CheckSpec:
    id: str
    group: str
    statement: str
    formula: str
    tolerance: float
    params: dict
    run: Callable


@dataclass
class CheckRecord:
    id: str
    inputs_digest: str
    values: dict
    residual: float
    tolerance: float
    passed: bool
    error: str | None = None

    def as_dict(self) -> dict:
        out = {
            "id": self.id,
            "inputs_digest": self.inputs_digest,
            "values": self.values,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


REGISTRY: dict[str, CheckSpec] = {}


def check(id, group, statement, formula, tolerance, **params):
    def deco(fn):
        REGISTRY[id] = CheckSpec(id, group, statement, formula, tolerance, params, fn)
        return fn

    return deco


class Context:
    def __init__(self, config: ExperimentConfig, params: dict):
        self.config = config
        self.params = params
        self.build = Builder(config)
        self.poly = config.polynomial.build()

    def rng(self, name: str) -> np.random.Generator:
        return named_rng(self.config.seed, name)

    def ledger(self) -> lg.Ledger:
        return lg.load_ledger(self.config.ledger.data)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def inputs_digest(config: ExperimentConfig, check_id: str, params: dict) -> str:
    payload = {
        "check": check_id,
        "params": _jsonable(params),
        "config": config.model_dump(mode="json", exclude={"output", "checks", "tolerance_scale"}),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def run_check(check_id: str, config: ExperimentConfig) -> CheckRecord:
    spec = REGISTRY[check_id]
    override = config.checks.get(check_id)
    params = dict(spec.params)
    tol = spec.tolerance
    if override is not None:
        params.update(override.params)
        if override.tolerance is not None:
            tol = override.tolerance
    tol = tol * config.tolerance_scale
    digest = inputs_digest(config, check_id, params)
    try:
        values, residual = spec.run(Context(config, params))
    except Exception as exc:  # numerical failures belong in the report
        return CheckRecord(check_id, digest, {}, math.inf, tol, False, f"{type(exc).__name__}: {exc}")
    residual = float(residual)
    return CheckRecord(check_id, digest, _jsonable(values), residual, tol, bool(residual <= tol))


def _relative_residual(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _random_tensor(ctx: Context, base, name: str, amplitude: float = 0.3) -> SymmetricTensorField:
    gen = random_fourier_metric(ctx.rng(name), base.dim, base.periods, modes=2, amplitude=amplitude)
    return SymmetricTensorField(base, MetricField.from_generator(base, gen).values - np.eye(base.dim))


def _direction(ctx: Context, g: MetricField, name: str) -> SymmetricTensorField:
    """A variation sharing the Fourier content of ``g``, so pairings are not zero by orthogonality."""
    rng = ctx.rng(name)
    n = g.base.dim
    M = rng.normal(size=(n, n))
    bumps = g.values - np.eye(n)
    mixed = np.einsum("...ik,kj->...ij", bumps, M)
    h = mixed + np.swapaxes(mixed, -1, -2)
    h = h / np.max(np.abs(h))
    return SymmetricTensorField(g.base, h) + _random_tensor(ctx, g.base, name + ":extra", 0.1)


# -- Chern-Simons functional -------------------------------------------------------------


def _background_shift_residual(ctx: Context, nodes: int) -> tuple[float, list]:
    rows = []
    base = ctx.build.grid(nodes)
    backgrounds = [random_connection(ctx.rng(f"background:{i}"), base, amplitude=ctx.params["amplitude"]) for i in (0, 1)]
    shift = integrate_top(transgression(ctx.poly, backgrounds[0], backgrounds[1]))
    worst = 0.0
    for name in ctx.params["metrics"]:
        g = ctx.build.metric(name, nodes)
        cs0 = cs_action(ctx.poly, g, backgrounds[0])
        cs1 = cs_action(ctx.poly, g, backgrounds[1])
        r = abs(cs1 - cs0 - shift)
        rows.append({"metric": name, "cs_a0": cs0, "cs_a1": cs1, "shift": shift, "residual": r})
        worst = max(worst, r)
    return worst, rows


@check(
    "background-shift",
    "cs-action",
    "Changing the background connection shifts the action by a metric-independent transgression integral.",
    "CS_{p,A0'}(g) = CS_{p,A0}(g) + ∫_M Tp(A0, A0')",
    1e-6,
    nodes=16,
    metrics=["bumpy-a", "bumpy-b"],
    amplitude=0.05,
)
def _background_shift(ctx):
    worst, rows = _background_shift_residual(ctx, ctx.params["nodes"])
    return {"rows": rows}, worst


@check(
    "background-shift-refinement",
    "cs-action",
    "Halving the spacing reduces the background-shift residual by at least 16, or it sits at the roundoff floor.",
    "r(h/2) <= max(r(h)/16, floor)",
    1.0,
    nodes=16,
    metrics=["bumpy-a", "bumpy-b"],
    amplitude=0.05,
    floor=1e-12,
)
def _background_shift_refinement(ctx):
    coarse, _ = _background_shift_residual(ctx, ctx.params["nodes"])
    fine, _ = _background_shift_residual(ctx, 2 * ctx.params["nodes"])
    bound = max(coarse / 16.0, ctx.params["floor"])
    return {"coarse": coarse, "fine": fine, "bound": bound}, fine / bound


@check(
    "cs-orientation-flip",
    "cs-action",
    "Reversing the orientation negates the action.",
    "CS(g, -o) = -CS(g, o)",
    1e-12,
    nodes=16,
    metric="bumpy-a",
)
def _cs_orientation_flip(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    plus = cs_action(ctx.poly, OrientedMetric(g, 1))
    minus = cs_action(ctx.poly, OrientedMetric(g, -1))
    return {"plus": plus, "minus": minus}, abs(plus + minus)


@check(
    "exterior-d-squared",
    "cs-action",
    "The discrete exterior derivative squares to zero.",
    "d(d β) = 0",
    1e-9,
    nodes=16,
)
def _d_squared(ctx):
    base = ctx.build.grid(ctx.params["nodes"])
    rng = ctx.rng("d-squared")
    worst = 0.0
    for q in (0, 1):
        beta = FormField(base, q, rng.normal(size=(len(multi_indices(base.dim, q)), *base.shape)))
        dd = exterior_derivative(exterior_derivative(beta))
        worst = max(worst, dd.max_abs())
    return {"max_abs": worst}, worst


@check(
    "stokes",
    "cs-action",
    "Exact top forms integrate to zero on the torus.",
    "∫_M d β = 0",
    1e-10,
    nodes=16,
)
def _stokes(ctx):
    base = ctx.build.grid(ctx.params["nodes"])
    beta = FormField(base, base.dim - 1, ctx.rng("stokes").normal(size=(base.dim, *base.shape)))
    value = integrate_top(exterior_derivative(beta))
    return {"integral": value}, abs(value)


# -- the change under diffeomorphisms ---------------------------------------------------


@check(
    "delta-independence",
    "delta",
    "The change of the action under a diffeomorphism does not depend on the metric.",
    "δ_φ(g1) = δ_φ(g2)",
    1e-4,
    nodes=32,
    diffeo="shear",
    metrics=["bumpy-a", "bumpy-b"],
)
def _delta_independence(ctx):
    phi = ctx.build.diffeo(ctx.params["diffeo"])
    vals = {m: delta_phi(ctx.poly, phi, ctx.build.metric(m, ctx.params["nodes"])) for m in ctx.params["metrics"]}
    v = list(vals.values())
    return {"delta": vals}, max(v) - min(v)


@check(
    "delta-refinement-order",
    "delta",
    "The discretization error of δ for a torus bundle (exact value 0) decays at 4th order.",
    "order = log2(|δ_h| / |δ_{h/2}|) >= 3.5",
    0.5,
    nodes=16,
    diffeo="linear-shear",
    metric="bumpy-a",
)
def _delta_refinement(ctx):
    phi = ctx.build.diffeo(ctx.params["diffeo"])
    n = ctx.params["nodes"]
    coarse = delta_phi(ctx.poly, phi, ctx.build.metric(ctx.params["metric"], n))
    fine = delta_phi(ctx.poly, phi, ctx.build.metric(ctx.params["metric"], 2 * n))
    order = math.log2(abs(coarse) / abs(fine))
    return {"coarse": coarse, "fine": fine, "order": order}, 4.0 - order


@check(
    "delta-cocycle",
    "delta",
    "δ is additive under composition of diffeomorphisms.",
    "δ_{φ∘ψ}(g) = δ_φ(g) + δ_ψ(g)",
    1e-4,
    nodes=32,
    diffeos=["shear", "rotation"],
    metric="bumpy-a",
)
def _delta_cocycle(ctx):
    a, b = (ctx.build.diffeo(d) for d in ctx.params["diffeos"])
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    da = delta_phi(ctx.poly, a, g)
    db = delta_phi(ctx.poly, b, g)
    dab = delta_phi(ctx.poly, a.compose(b), g)
    return {"delta_first": da, "delta_second": db, "delta_composite": dab}, abs(dab - da - db)


@check(
    "delta-isotopy",
    "delta",
    "Diffeomorphisms isotopic to the identity leave the action unchanged.",
    "δ_φ = 0 for φ in the identity component",
    1e-4,
    nodes=32,
    diffeos=["flow-small", "flow-medium", "flow-large"],
    metric="bumpy-a",
)
def _delta_isotopy(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    vals = {}
    for name in ctx.params["diffeos"]:
        phi = ctx.build.diffeo(name)
        if not phi.isotopic_to_identity:
            raise ValueError(f"{name} is not isotopic to the identity")
        vals[name] = delta_phi(ctx.poly, phi, g)
    return {"delta": vals}, max(abs(v) for v in vals.values())


@check(
    "orientation-reversing",
    "delta",
    "For an orientation-reversing map δ is half of δ of its square.",
    "δ_φ = δ_{φ²} / 2",
    1e-4,
    nodes=32,
    diffeo="reflection-shear",
    metric="bumpy-a",
)
def _orientation_reversing(ctx):
    phi = ctx.build.diffeo(ctx.params["diffeo"])
    if phi.orientation > 0:
        raise ValueError("the configured map preserves orientation")
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    d1 = delta_phi(ctx.poly, phi, g)
    d2 = delta_phi(ctx.poly, phi.squared(), g)
    return {"delta": d1, "delta_squared": d2}, abs(d1 - 0.5 * d2)


# -- mapping tori ------------------------------------------------------------------------


@check(
    "mapping-torus-agreement",
    "mapping-torus",
    "δ equals the characteristic number of the mapping torus; 3-d and 4-d code paths are disjoint.",
    "δ_φ(g) = ∫_{M×[0,1]} p(F̄)",
    1e-4,
    nodes=24,
    nt=33,
    metrics=["flat", "bumpy-a"],
    diffeos=["shear", "rotation"],
    eps=[0.1, 0.2],
)
def _mapping_torus(ctx):
    rows = []
    worst = 0.0
    for mname in ctx.params["metrics"]:
        g = ctx.build.metric(mname, ctx.params["nodes"])
        for dname in ctx.params["diffeos"]:
            phi = ctx.build.diffeo(dname)
            d = delta_phi(ctx.poly, phi, g)
            for eps in ctx.params["eps"]:
                P = pontryagin_number(ctx.poly, build_mapping_torus(g, phi, eps, ctx.params["nt"]))
                r = max(abs(d - P), abs(d), abs(P))
                rows.append({"metric": mname, "diffeo": dname, "eps": eps, "delta": d, "characteristic_number": P, "difference": d - P})
                worst = max(worst, r)
    return {"rows": rows}, worst


@check(
    "holonomy-flat",
    "holonomy",
    "A flat holonomy is cancelled by a counterterm iff it matches the characteristic numbers mod Z.",
    "d_Z(κ_φ, p(M_φ)) < tol; a mismatched κ = 1/2 must be rejected",
    1e-3,
    nodes=16,
    nt=33,
    metric="flat",
    isotopic=["flow-small", "flow-medium"],
    mismatched="linear-shear",
)
def _holonomy_flat(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    data = [FlatHolonomyDatum(n, ctx.build.diffeo(n), Fraction(0)) for n in ctx.params["isotopic"]]
    phi = ctx.build.diffeo(ctx.params["mismatched"])
    data.append(FlatHolonomyDatum("mismatched", phi, Fraction(1, 2)))
    verdicts = flat_holonomy_check(ctx.poly, data, g, nt=ctx.params["nt"], tolerance=1e-3)
    number = verdicts[-1].characteristic_number
    injected = flat_holonomy_check(ctx.poly, [FlatHolonomyDatum("injected", phi, number)], g, characteristic=lambda _: number)[0]
    rows = [{"name": v.name, "kappa": v.kappa, "characteristic_number": v.characteristic_number, "distance": v.distance, "pass": v.passed} for v in verdicts + [injected]]
    residual = max(v.distance for v in verdicts[:-1])
    residual = max(residual, injected.distance, abs(verdicts[-1].distance - 0.5))
    if verdicts[-1].passed:
        residual = math.inf
    return {"rows": rows}, residual


# -- the variational one-form ------------------------------------------------------------


@check(
    "sigma-basic",
    "variational",
    "The variation of the action vanishes along infinitesimal diffeomorphisms.",
    "σ_g(L_X g) = 0",
    1e-4,
    nodes=16,
    metric="bumpy-a",
    fields=3,
    amplitude=0.05,
)
def _sigma_basic(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    vals = []
    for i in range(ctx.params["fields"]):
        X = random_vector_field(ctx.rng(f"sigma-basic:{i}"), g.base, amplitude=ctx.params["amplitude"])
        vals.append(sigma_pairing(ctx.poly, g, lie_derivative_metric(X, g)))
    return {"pairings": vals}, max(abs(v) for v in vals)


@check(
    "sigma-homothety",
    "variational",
    "Constant rescalings of the metric leave the action unchanged.",
    "σ_g(g) = 0 and CS(λ² g) = CS(g)",
    1e-4,
    nodes=16,
    metric="bumpy-a",
    scales=[0.9, 1.1],
)
def _sigma_homothety(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    radial = sigma_pairing(ctx.poly, g, g)
    cs1 = cs_action(ctx.poly, g)
    scaled = {str(lam): cs_action(ctx.poly, g.scaled(lam**2)) for lam in ctx.params["scales"]}
    residual = max([abs(radial)] + [abs(v - cs1) for v in scaled.values()])
    return {"radial_pairing": radial, "cs": cs1, "cs_scaled": scaled}, residual


@check(
    "sigma-linearity",
    "variational",
    "The variation is linear in the direction.",
    "σ_g(h1 + 2 h2) = σ_g(h1) + 2 σ_g(h2)",
    1e-5,
    nodes=16,
    metric="bumpy-a",
)
def _sigma_linearity(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    h1 = _direction(ctx, g, "linearity:1")
    h2 = _direction(ctx, g, "linearity:2")
    a = sigma_pairing(ctx.poly, g, h1)
    b = sigma_pairing(ctx.poly, g, h2)
    c = sigma_pairing(ctx.poly, g, h1 + h2 * 2.0)
    return {"first": a, "second": b, "combined": c}, abs(c - a - 2 * b)


@check(
    "cotton-two-route",
    "cotton",
    "The variation of the tr(X²) action is the classical Cotton tensor up to a fixed constant.",
    "∫ C^{ij} h_ij vol = -1/2 σ^{tr2}_g(h)",
    1e-3,
    nodes=24,
    metric="bumpy-a",
)
def _cotton_two_route(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    h = _direction(ctx, g, "cotton:h")
    variational = COTTON_NORMALIZATION * sigma_pairing(trace_power(2), g, h)
    classical = cotton_pairing(cotton_classical(g), h)
    return {"variational": variational, "classical": classical}, _relative_residual(variational, classical)


@check(
    "cotton-conformal-flat",
    "cotton",
    "Both Cotton routes vanish on a conformally flat metric.",
    "σ^{tr2}_g(h) = 0 = ∫ C·h vol when g = e^{2f} δ",
    1e-4,
    nodes=16,
    metric="conformal",
)
def _cotton_conformal(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    h = _direction(ctx, g, "cotton:h")
    variational = COTTON_NORMALIZATION * sigma_pairing(trace_power(2), g, h)
    classical = cotton_pairing(cotton_classical(g), h)
    return {"variational": variational, "classical": classical}, max(abs(variational), abs(classical))


@check(
    "cotton-trace-free",
    "cotton",
    "The classical Cotton density is trace-free and divergence-free (relative to its size).",
    "g_ij C^{ij} = 0, ∇_i C^{ij} = 0",
    1e-4,
    nodes=64,
    metric="gentle",
)
def _cotton_trace_free(ctx):
    g = ctx.build.metric(ctx.params["metric"], ctx.params["nodes"])
    C = cotton_classical(g)
    scale = float(np.max(np.abs(C.values)))
    tr = float(np.max(np.abs(np.einsum("...ij,...ij->...", C.values, g.values)))) / scale
    div = float(np.max(np.abs(cotton_divergence(g, C)))) / scale
    return {"max_abs": scale, "trace": tr, "divergence": div}, max(tr, div)


# -- paths -------------------------------------------------------------------------------


def _class_paths(ctx, name):
    spec = ctx.config.paths[name]
    nodes = ctx.params["nodes"]
    g = ctx.build.metric(spec.metric, nodes)
    phi = ctx.build.diffeo(spec.diffeo)
    bump = _random_tensor(ctx, g.base, f"path-bump:{name}", spec.bump_amplitude)
    straight = MetricPath.in_class(g, phi, spec.samples - 1)
    bent = MetricPath.in_class(g, phi, spec.samples - 1, bump=bump)
    return g, phi, straight, bent


@check(
    "path-independence",
    "variational",
    "The integral of the variation along any path from g to φ·g is δ_φ.",
    "∫_γ σ = δ_φ for every γ with γ(1) = φ·γ(0)",
    1e-4,
    nodes=16,
    path="class-path",
)
def _path_independence(ctx):
    g, phi, straight, bent = _class_paths(ctx, ctx.params["path"])
    a = path_integral_sigma(ctx.poly, straight)
    b = path_integral_sigma(ctx.poly, bent)
    # the nodal-metric action is the functional whose derivative σ integrates
    d = delta_phi(ctx.poly, phi, MetricField(g.base, g.values), use_generator=False)
    return {"straight": a, "bent": b, "delta": d}, max(abs(a - b), abs(a - d), abs(b - d))


@check(
    "path-free-endpoint",
    "variational",
    "Along a free path the integral of the variation is the change of the action.",
    "∫_γ σ = CS(γ(1)) - CS(γ(0))",
    1e-4,
    nodes=16,
    path="free-path",
)
def _path_free(ctx):
    spec = ctx.config.paths[ctx.params["path"]]
    nodes = ctx.params["nodes"]
    g0 = ctx.build.metric(spec.metric, nodes)
    g1 = ctx.build.metric(spec.end_metric, nodes)
    path = MetricPath.interpolate(g0, g1, spec.samples - 1)
    integral = path_integral_sigma(ctx.poly, path)
    diff = cs_action(ctx.poly, path.samples[-1], use_generator=False) - cs_action(ctx.poly, path.samples[0], use_generator=False)
    return {"integral": integral, "difference": diff}, abs(integral - diff)


# -- exact ledger ------------------------------------------------------------------------


def _ledger_setup(ctx):
    L = ctx.ledger()
    fam = L.family(ctx.config.ledger.family)
    oriented = L.select(ctx.config.ledger.oriented)
    everything = L.select(ctx.config.ledger.all)
    return L, fam, oriented, everything


def _exact(ok: bool) -> float:
    return 0.0 if ok else 1.0


@check(
    "eta-k3",
    "ledger",
    "A single Majorana fermion on K3 has quarter-eta 1/2, so the strong condition fails.",
    "η/4(K3) = -16/32 ≡ 1/2 mod 1",
    0.0,
)
def _eta_k3(ctx):
    L, fam, _, _ = _ledger_setup(ctx)
    q = lg.eta_quarter(fam, L["K3"])
    strong = lg.check_condition(L, "AnnomFinalW", fam, 0, [L["K3"]])
    return {"eta_quarter": q, "strong_condition": strong.passed}, _exact(q == Fraction(1, 2) and not strong.passed)


@check(
    "counterterm-oriented",
    "ledger",
    "On oriented 4-manifolds the quarter-eta of one Majorana fermion is cancelled by p1/96.",
    "η/4(N) ≡ c p1(N) mod 1 for all oriented N, with c = 1/96",
    0.0,
)
def _counterterm(ctx):
    L, fam, oriented, _ = _ledger_setup(ctx)
    c = lg.solve_counterterm(L, fam, "AnnomFinalU", oriented)
    verdict = lg.check_condition(L, "AnnomFinalU", fam, c if c is not None else 0, oriented)
    return {"counterterm": c, "verdict": verdict.as_dict()}, _exact(c == Fraction(1, 96) and verdict.passed)


@check(
    "nu-oriented",
    "ledger",
    "With only oriented manifolds one fermion is already cancellable.",
    "min ν = 1",
    0.0,
)
def _nu_oriented(ctx):
    L, fam, oriented, _ = _ledger_setup(ctx)
    res = lg.min_multiplicity(L, fam, "AnnomFinalU", oriented, bound=ctx.config.ledger.bound)
    return {"nu": res.nu, "counterterm": res.counterterm}, _exact(res.nu == 1)


@check(
    "nu-multiplicity",
    "ledger",
    "Including RP4 forces the number of Majorana fermions to be a multiple of 16.",
    "η/4(N) ≡ p(Ñ)/2 mod 1 for all N ⇒ min ν = 16",
    0.0,
)
def _nu_multiplicity(ctx):
    L, fam, _, everything = _ledger_setup(ctx)
    res = lg.min_multiplicity(L, fam, "AnnomFinalU2", everything, bound=ctx.config.ledger.bound)
    eight = lg.solve_counterterm(L, fam, "AnnomFinalU2", everything, nu=8)
    return {"nu": res.nu, "counterterm": res.counterterm, "nu8_solution": eight}, _exact(res.nu == 16 and eight is None)


@check(
    "nu-mapping-torus",
    "ledger",
    "Restricted to mapping tori the multiplicity only has to be a multiple of 8.",
    "min ν = 8 over mapping tori",
    0.0,
)
def _nu_mapping_torus(ctx):
    L, fam, _, everything = _ledger_setup(ctx)
    res = lg.min_multiplicity(L, fam, "AnnomFinalU2", everything, mapping_torus_only=True, bound=ctx.config.ledger.bound)
    return {"nu": res.nu, "counterterm": res.counterterm}, _exact(res.nu == 8)


@check(
    "ledger-multiples",
    "ledger",
    "If ν passes a condition, so does every multiple of ν.",
    "ν ok ⇒ kν ok",
    0.0,
    multiples=[2, 3, 4],
)
def _ledger_multiples(ctx):
    L, fam, _, everything = _ledger_setup(ctx)
    res = lg.min_multiplicity(L, fam, "AnnomFinalU2", everything, bound=ctx.config.ledger.bound)
    ok = res.nu is not None and all(
        lg.solve_counterterm(L, fam, "AnnomFinalU2", everything, nu=k * res.nu) is not None for k in ctx.params["multiples"]
    )
    return {"nu": res.nu, "multiples": ctx.params["multiples"]}, _exact(ok)


def check_ids() -> list[str]:
    return sorted(REGISTRY)
