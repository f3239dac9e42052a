"""The exact-identity suite behind ``decoup verify``.

Three groups of checks: partition invariants of the cap families, the
conjugation identity on random caps with random atomic input, and the
derivative certificates for the rescaled phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .caps import (KINDS, cap_family, check_family_tiling, check_tiles_box, flatness,
                   locate_many, omega_regions, refinement_map, tau_decompose, unit_cube,
                   cap_to_json)
from .oscillo import FrequencyFunction, SpacePointSet
from .rescale import check_phase_conditions, conjugate, verify_conjugation


@dataclass
class CheckResult:
    check: str
    subject: str
    value: float
    threshold: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.check, self.subject, repr(self.value), self.threshold,
                "pass" if self.passed else "FAIL"]


CSV_HEADER = ["check", "subject", "value", "threshold", "result"]


def _run(check: str, subject: str, fn) -> CheckResult:
    try:
        fn()
        return CheckResult(check, subject, 0.0, "exact", True)
    except Exception as exc:
        return CheckResult(check, subject, math.nan, "exact", False, {"error": str(exc)})


def partition_checks(R: int, m: int = 2) -> list[CheckResult]:
    out = []
    for kind in KINDS:
        fam = cap_family(R, m, 3, kind)
        out.append(_run("tiling", fam.family_id, lambda fam=fam: check_family_tiling(fam)))
        centres = np.array([c.center for c in fam.caps])
        ok = bool(np.array_equal(locate_many(centres, fam), np.arange(len(fam))))
        out.append(CheckResult("locate_centre", fam.family_id, float(ok), "all", ok))
    ivs = cap_family(R, m, 1).axis_lists[0]
    if m == 2:
        expected = 1 + (math.isqrt(R) - 1) // 3
        out.append(CheckResult("axis_count", f"R={R}", float(len(ivs)), f"== {expected}",
                               len(ivs) == expected))
        shortest = min(iv.length for iv in ivs)
        want = 2 / math.sqrt(R)
        out.append(CheckResult("min_length", f"R={R}", float(shortest), f"== {want!r}",
                               float(shortest) == want))
    # the analytic envelope min|phi''| l^2/8 <= flatness <= max|phi''| l^2/8 and flatness R <= 8
    n = 2 * m
    for iv in ivs:
        a, b = iv.bounds
        fl = flatness(iv, m)
        lo_env = n * (n - 1) * a ** (n - 2) * (b - a) ** 2 / 8
        hi_env = n * (n - 1) * b ** (n - 2) * (b - a) ** 2 / 8
        ok = lo_env * (1 - 1e-12) <= fl <= hi_env * (1 + 1e-12) and fl * R <= 8
        out.append(CheckResult("flatness", f"R={R} {iv.label()}", fl * R,
                               "envelope and <= 8", bool(ok)))
    if R > 16 ** (m / 2) and m == 2:
        try:
            coarse = cap_family(R // 16, m, 3)
            refinement_map(coarse, cap_family(R, m, 3))
            out.append(CheckResult("refinement", f"{R}->{R // 16}", 0.0, "nested", True))
        except Exception as exc:
            out.append(CheckResult("refinement", f"{R}->{R // 16}", math.nan, "nested", False,
                                   {"error": str(exc)}))
    return out


def region_checks(K: int, m: int = 2) -> list[CheckResult]:
    regions = omega_regions(K, m)
    out = [_run("omega_tiling", f"K={K}",
                lambda: check_tiles_box([r.as_cap() for r in regions], unit_cube(3)))]
    for reg in regions[1:]:
        out.append(_run("tau_tiling", f"omega{reg.index} K={K}",
                        lambda reg=reg: check_tiles_box(tau_decompose(reg), reg.as_cap())))
    return out


def conjugation_checks(R: int, K: int, m: int = 2, tol: float = 1e-9, samples: int = 100,
                       caps_per_kind: int = 20, atoms: int = 8, seed: int = 0,
                       printed_map: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    pts = SpacePointSet.monte_carlo(4, R, samples, seed)
    out = []
    for kind in ("f4", "f4mixed", "f4tilde"):
        fam = cap_family(R, m, 3, kind)
        for idx in rng.choice(len(fam), size=min(caps_per_kind, len(fam)), replace=False):
            cap = fam.caps[int(idx)]
            xi = cap.lo + rng.random((atoms, 3)) * (cap.hi - cap.lo)
            f = FrequencyFunction.atomic(xi, np.exp(2j * np.pi * rng.random(atoms)))
            res = verify_conjugation(f, cap, m, pts, tol=tol, K=K, printed_map=printed_map)
            detail = {}
            if not res.passed:
                detail = {"cap": cap_to_json(cap), "f": f.to_json(),
                          "map": conjugate(cap, m, K=K, printed_map=printed_map).to_json()}
            out.append(CheckResult("conjugation", f"{fam.family_id}#{int(idx)}",
                                   res.max_rel_error, f"<= {tol!r}", res.passed, detail))
    return out


def certificate_checks(K: int, m: int = 2) -> list[CheckResult]:
    """Omega_7 pieces give psi with phi'' in [6, 48]; flat axes give min phi'' = 0."""
    out = []
    regions = omega_regions(K, m)
    worst = {"min_d2": math.inf, "max_d2": 0.0, "d3": 0.0, "d4": 0.0, "higher": True}
    for cap in tau_decompose(regions[7]):
        for rep in check_phase_conditions(conjugate(cap, m, K=K).phase_out):
            worst["min_d2"] = min(worst["min_d2"], rep.min_d2)
            worst["max_d2"] = max(worst["max_d2"], rep.max_d2)
            worst["d3"] = max(worst["d3"], rep.max_abs_d3)
            worst["d4"] = max(worst["d4"], rep.max_abs_d4)
            worst["higher"] &= rep.higher_zero
    out.append(CheckResult("psi_min_d2", "omega7", worst["min_d2"], ">= 6", worst["min_d2"] >= 6))
    out.append(CheckResult("psi_max_d2", "omega7", worst["max_d2"], "<= 48", worst["max_d2"] <= 48))
    out.append(CheckResult("psi_max_d3", "omega7", worst["d3"], "<= 48", worst["d3"] <= 48))
    out.append(CheckResult("psi_max_d4", "omega7", worst["d4"], "<= 24", worst["d4"] <= 24))
    out.append(CheckResult("psi_higher_zero", "omega7", float(worst["higher"]), "all",
                           worst["higher"]))
    flat_min = []
    for reg in regions[1:7]:
        cap = tau_decompose(reg)[0]
        reps = check_phase_conditions(conjugate(cap, m, K=K).phase_out)
        flat_min += [reps[j].min_d2 for j in range(3) if j not in reg.large_axes]
    top = max(flat_min)
    out.append(CheckResult("flat_axis_min_d2", "omega1-6", top, "== 0", top == 0.0))
    return out


def run_verify(R: int = 256, K: int = 16, m: int = 2, tol: float = 1e-9, samples: int = 100,
               caps_per_kind: int = 20, seed: int = 0,
               printed_map: bool = False) -> list[CheckResult]:
    return (partition_checks(R, m) + region_checks(K, m)
            + conjugation_checks(R, K, m, tol, samples, caps_per_kind, seed=seed,
                                 printed_map=printed_map)
            + (certificate_checks(K, m) if m == 2 else []))
