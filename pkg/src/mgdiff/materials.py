"""Multigroup cross-section data and derived coefficient matrices.

Each material carries, per energy group g, the macroscopic total cross
section sigma_t[g], the fission production nu_sigma_f[g], the spectrum
chi[g], and the order-0 scattering block sigma_s0[g_from, g_to]
(all cm^-1 except chi).  From these we derive

  removal   T[g, g]  = sigma_t[g] - sigma_s0[g, g]   (> 0 required)
            T[g, g'] = -sigma_s0[g', g]              (g != g')
  fission   F[g, g'] = chi[g] * nu_sigma_f[g']
  diffusion D[g]     = 1 / (3 sigma_t[g])   unless overridden per material

The diffusion closure uses isotropic scattering, which is all the data
the order-0 tables support; a material file may carry an explicit
per-group "diffusion" override.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonPositiveRemoval, ParseError


@dataclass(frozen=True)
class EnergyGroupSet:
    """Number of energy groups and optional per-group bounds (eV).

    The model hypotheses are stated for G >= 2; the one-group case is
    supported for analytic verification problems.
    """

    group_count: int
    bounds_ev: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.group_count < 1:
            raise ValueError("at least one energy group required")
        if self.bounds_ev is not None and len(self.bounds_ev) != self.group_count:
            raise ValueError("one (upper, lower) bound pair per group required")


@dataclass(frozen=True, eq=False)
class MaterialData:
    """Cross sections of one material; arrays are read-only copies."""

    name: str
    sigma_t: np.ndarray        # (G,)
    nu_sigma_f: np.ndarray     # (G,)
    chi: np.ndarray            # (G,)
    sigma_s0: np.ndarray       # (G, G), [from, to]
    diffusion: np.ndarray | None = None  # optional (G,) override

    def __post_init__(self):
        g = len(self.sigma_t)
        for attr in ("sigma_t", "nu_sigma_f", "chi", "sigma_s0", "diffusion"):
            v = getattr(self, attr)
            if v is None:
                continue
            v = np.asarray(v, dtype=float).copy()
            v.setflags(write=False)
            object.__setattr__(self, attr, v)
        if self.sigma_s0.shape != (g, g):
            raise ValueError(f"{self.name}: scattering block must be {g}x{g}")
        if np.any(self.sigma_t <= 0):
            raise ValueError(f"{self.name}: sigma_t must be positive")
        if np.any(self.nu_sigma_f < 0):
            raise ValueError(f"{self.name}: nu_sigma_f must be nonnegative")
        if np.any(self.chi < 0):
            raise ValueError(f"{self.name}: chi must be nonnegative")
        s = float(self.chi.sum())
        if not (abs(s) <= 1e-6 or abs(s - 1.0) <= 1e-6):
            raise ValueError(f"{self.name}: chi must sum to 0 or 1, got {s}")

    @property
    def group_count(self) -> int:
        return len(self.sigma_t)

    @property
    def fissile(self) -> bool:
        return bool(np.any(self.nu_sigma_f > 0))


@dataclass(frozen=True, eq=False)
class GroupCoefficients:
    """Derived per-material matrices: diffusion, removal, fission."""

    name: str
    diffusion: np.ndarray   # (G,)
    removal: np.ndarray     # (G, G), T[g, g'] acts on flux of group g'
    fission: np.ndarray     # (G, G), chi[g] * nu_sigma_f[g']
    chi: np.ndarray         # (G,)
    nu_sigma_f: np.ndarray  # (G,)

    @property
    def delta_e(self) -> np.ndarray:
        """Diagonal of the removal matrix."""
        return np.diag(self.removal)

    @property
    def group_count(self) -> int:
        return len(self.diffusion)


def derive_coefficients(m: MaterialData) -> GroupCoefficients:
    """Build removal/fission matrices and the diffusion coefficients."""
    g = m.group_count
    removal = -m.sigma_s0.T.copy()
    removal[np.arange(g), np.arange(g)] = m.sigma_t - np.diag(m.sigma_s0)
    diag = np.diag(removal)
    if np.any(diag <= 0):
        bad = int(np.argmin(diag)) + 1
        raise NonPositiveRemoval(
            f"{m.name}: removal diagonal of group {bad} is {diag[bad - 1]:g}"
        )
    if m.diffusion is not None:
        diffusion = np.asarray(m.diffusion, dtype=float)
        if np.any(diffusion <= 0):
            raise ValueError(f"{m.name}: diffusion override must be positive")
    else:
        diffusion = 1.0 / (3.0 * m.sigma_t)
    fission = np.outer(m.chi, m.nu_sigma_f)
    return GroupCoefficients(
        name=m.name,
        diffusion=diffusion,
        removal=removal,
        fission=fission,
        chi=m.chi.copy(),
        nu_sigma_f=m.nu_sigma_f.copy(),
    )


@dataclass
class MaterialValidation:
    """Per-material well-posedness summary.

    Transport-corrected benchmark data can violate the small-coupling
    bound (and even diagonal dominance of the removal matrix), so these
    are reported as flags rather than enforced.
    """

    name: str
    d_min: float
    d_max: float
    removal_min: float
    removal_max: float
    epsilon: float               # smallest eps with |s0[g->g']| <= eps*removal[g]
    epsilon_ok: bool             # eps < 1/(G-1)
    row_dominant: bool           # in-scattering into g below removal of g
    column_dominant: bool        # out-scattering from g below removal of g
    has_upscattering: bool


@dataclass
class ValidationReport:
    group_count: int
    per_material: list[MaterialValidation] = field(default_factory=list)

    @property
    def positivity_ok(self) -> bool:
        return all(v.d_min > 0 and v.removal_min > 0 for v in self.per_material)

    @property
    def small_coupling_ok(self) -> bool:
        return all(v.epsilon_ok for v in self.per_material)

    @property
    def any_upscattering(self) -> bool:
        return any(v.has_upscattering for v in self.per_material)

    def format(self) -> str:
        lines = [
            f"{'material':24s} {'D range':>22s} {'removal range':>22s}"
            f" {'eps':>10s} {'eps<1/(G-1)':>12s} {'rowdom':>6s} {'coldom':>6s}"
            f" {'upscatter':>9s}"
        ]
        for v in self.per_material:
            lines.append(
                f"{v.name:24s} [{v.d_min:9.4g},{v.d_max:9.4g}]"
                f" [{v.removal_min:9.4g},{v.removal_max:9.4g}]"
                f" {v.epsilon:10.4g} {str(v.epsilon_ok):>12s}"
                f" {str(v.row_dominant):>6s} {str(v.column_dominant):>6s}"
                f" {str(v.has_upscattering):>9s}"
            )
        lines.append(
            f"positivity: {self.positivity_ok}; "
            f"small coupling: {self.small_coupling_ok}; "
            f"upscattering present: {self.any_upscattering}"
        )
        return "\n".join(lines)


def validate_assumptions(coefficients) -> ValidationReport:
    """Check the coefficient hypotheses for a set of GroupCoefficients.

    Accepts an iterable (or dict name->coeffs).  Reports, per material,
    diffusion and removal bounds, the smallest eps bounding the
    off-diagonal scattering relative to the removal diagonal, whether
    eps < 1/(G-1), strict diagonal dominance of the removal matrix, and
    an upscattering flag.
    """
    if isinstance(coefficients, dict):
        coefficients = list(coefficients.values())
    coefficients = list(coefficients)
    if not coefficients:
        raise ValueError("no materials to validate")
    g = coefficients[0].group_count
    report = ValidationReport(group_count=g)
    for c in coefficients:
        removal = c.removal
        diag = np.diag(removal)
        off = removal - np.diag(diag)
        # |sigma_s0[g->g']| = |removal[g', g]| for g' != g
        eps = float(np.max(np.abs(off.T) / diag[:, None])) if g > 1 else 0.0
        row_dom = bool(np.all(np.abs(off).sum(axis=1) < diag))
        col_dom = bool(np.all(np.abs(off).sum(axis=0) < diag))
        upscatter = bool(np.any(np.triu(np.abs(off), k=1) > 0.0))
        report.per_material.append(
            MaterialValidation(
                name=c.name,
                d_min=float(c.diffusion.min()),
                d_max=float(c.diffusion.max()),
                removal_min=float(diag.min()),
                removal_max=float(diag.max()),
                epsilon=eps,
                epsilon_ok=True if g == 1 else eps < 1.0 / (g - 1),
                row_dominant=row_dom,
                column_dominant=col_dom,
                has_upscattering=upscatter,
            )
        )
    return report


@dataclass(frozen=True, eq=False)
class MaterialSet:
    """Named materials sharing one group structure."""

    groups: EnergyGroupSet
    materials: dict[str, MaterialData]

    def __post_init__(self):
        g = self.groups.group_count
        for m in self.materials.values():
            if m.group_count != g:
                raise ValueError(f"material {m.name} has {m.group_count} groups, expected {g}")

    @property
    def group_count(self) -> int:
        return self.groups.group_count

    def __contains__(self, name: str) -> bool:
        return name in self.materials

    def __getitem__(self, name: str) -> MaterialData:
        return self.materials[name]

    @property
    def names(self) -> list[str]:
        return list(self.materials)

    def coefficients(self) -> dict[str, GroupCoefficients]:
        return {name: derive_coefficients(m) for name, m in self.materials.items()}


# -- file format -----------------------------------------------------------
#
# One JSON document:
# {
#   "group_count": 4,
#   "chi": [...],                       # global spectrum, per group
#   "energy_bounds_ev": [[hi, lo], ...] # optional
#   "materials": {
#     "<name>": {
#       "groups": {"1": {"sigma_t": x, "nu_sigma_f": x}, ...},
#       "scattering": {"<from>": {"<to>": x, ...}, ...},  # zeros may be omitted
#       "chi": [...],        # optional per-material override
#       "diffusion": [...]   # optional explicit D override
#     }, ...
#   }
# }

_GROUP_KEY = re.compile(r"^[0-9]+$")


def _fail(locus: str, msg: str):
    raise ParseError(f"{locus}: {msg}")


def _parse_group_table(tbl, g: int, locus: str):
    sigma_t = np.zeros(g)
    nu_sigma_f = np.zeros(g)
    seen = set()
    for key, fields in tbl.items():
        if not _GROUP_KEY.match(str(key)) or not 1 <= int(key) <= g:
            _fail(f"{locus}.groups.{key}", "group index out of range")
        i = int(key) - 1
        seen.add(i)
        try:
            sigma_t[i] = float(fields["sigma_t"])
            nu_sigma_f[i] = float(fields.get("nu_sigma_f", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            _fail(f"{locus}.groups.{key}", f"bad group entry ({exc})")
    if len(seen) != g:
        _fail(f"{locus}.groups", f"expected {g} groups, found {len(seen)}")
    return sigma_t, nu_sigma_f


def _parse_scattering(block, g: int, locus: str):
    s0 = np.zeros((g, g))
    for from_key, row in block.items():
        if not _GROUP_KEY.match(str(from_key)) or not 1 <= int(from_key) <= g:
            _fail(f"{locus}.scattering.{from_key}", "source group out of range")
        for to_key, val in row.items():
            if not _GROUP_KEY.match(str(to_key)) or not 1 <= int(to_key) <= g:
                _fail(f"{locus}.scattering.{from_key}.{to_key}", "target group out of range")
            try:
                s0[int(from_key) - 1, int(to_key) - 1] = float(val)
            except (TypeError, ValueError):
                _fail(f"{locus}.scattering.{from_key}.{to_key}", f"not a number: {val!r}")
    return s0


def load_material_library(path) -> MaterialSet:
    """Parse a material file; raises ParseError with a field locus."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        _fail(str(path), "empty file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(f"{path}:{exc.lineno}:{exc.colno}", exc.msg)
    if not isinstance(doc, dict):
        _fail(str(path), "top-level JSON object expected")
    try:
        g = int(doc["group_count"])
    except (KeyError, TypeError, ValueError):
        _fail(str(path), "missing or bad 'group_count'")
    chi_global = doc.get("chi")
    if chi_global is not None and len(chi_global) != g:
        _fail("chi", f"expected {g} entries")
    bounds = doc.get("energy_bounds_ev")
    if bounds is not None:
        bounds = tuple((float(hi), float(lo)) for hi, lo in bounds)
    mats = doc.get("materials")
    if not isinstance(mats, dict) or not mats:
        _fail("materials", "at least one material required")

    materials: dict[str, MaterialData] = {}
    for name, body in mats.items():
        locus = f"materials.{name}"
        if "groups" not in body:
            _fail(locus, "missing 'groups' table")
        sigma_t, nu_sigma_f = _parse_group_table(body["groups"], g, locus)
        s0 = _parse_scattering(body.get("scattering", {}), g, locus)
        chi = body.get("chi", chi_global)
        if chi is None:
            _fail(locus, "no chi given and no global chi present")
        if len(chi) != g:
            _fail(f"{locus}.chi", f"expected {g} entries")
        diffusion = body.get("diffusion")
        try:
            materials[name] = MaterialData(
                name=name,
                sigma_t=sigma_t,
                nu_sigma_f=nu_sigma_f,
                chi=np.asarray(chi, dtype=float),
                sigma_s0=s0,
                diffusion=None if diffusion is None else np.asarray(diffusion, dtype=float),
            )
        except ValueError as exc:
            _fail(locus, str(exc))
    return MaterialSet(EnergyGroupSet(g, bounds), materials)


def save_material_library(ms: MaterialSet, path) -> None:
    """Write a material set in the library format (full precision)."""
    doc: dict = {"group_count": ms.group_count}
    if ms.groups.bounds_ev is not None:
        doc["energy_bounds_ev"] = [list(b) for b in ms.groups.bounds_ev]
    doc["materials"] = {}
    for name, m in ms.materials.items():
        body = {
            "groups": {
                str(g + 1): {
                    "sigma_t": m.sigma_t[g],
                    "nu_sigma_f": m.nu_sigma_f[g],
                }
                for g in range(ms.group_count)
            },
            "scattering": {
                str(i + 1): {
                    str(j + 1): m.sigma_s0[i, j]
                    for j in range(ms.group_count)
                    if m.sigma_s0[i, j] != 0.0
                }
                for i in range(ms.group_count)
                if np.any(m.sigma_s0[i] != 0.0)
            },
            "chi": list(m.chi),
        }
        if m.diffusion is not None:
            body["diffusion"] = list(m.diffusion)
        doc["materials"][name] = body
    Path(path).write_text(json.dumps(doc, indent=1, default=float) + "\n")
