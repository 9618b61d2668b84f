"""System spec files: a small JSON format describing one substitution system.

digits[i][j] lists the translation parts of the maps sending color j into
color i (Lambda_i includes Q*Lambda_j + digits[i][j]); everything is written
in lattice coordinates, so the entries are plain integers and only the basis
carries rationals (as "p/q" strings).  Serialization is canonical: sorted
keys, two-space indent, trailing newline; parse-serialize round-trips are
byte-identical.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources

from .errors import SpecFileError
from .lattice import ExpansionMatrix, LatticeBasis
from .substitution import Cluster, SubstitutionSystem

FORMAT_NAME = "latsub-spec"
FORMAT_VERSION = 1

BUNDLED = (
    "abcd",
    "chair",
    "example310",
    "gasket",
    "period_doubling",
    "thue_morse",
)


def _check_vectors(problems, where, entries, dim):
    vecs = []
    if not isinstance(entries, list):
        problems.append(f"{where}: expected a list of {dim}-vectors")
        return vecs
    for v in entries:
        if (
            not isinstance(v, list)
            or len(v) != dim
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in v)
        ):
            problems.append(f"{where}: {v!r} is not an integer {dim}-vector")
        else:
            vecs.append(tuple(v))
    return vecs


def system_from_dict(data: dict) -> SubstitutionSystem:
    """Validate a parsed JSON object; raises SpecFileError listing every problem."""
    problems = []
    if not isinstance(data, dict):
        raise SpecFileError(["spec is not a JSON object"])
    for field in ("name", "dim", "colors", "lattice_basis", "expansion", "digits", "seed"):
        if field not in data:
            problems.append(f"missing field: {field}")
    if problems:
        raise SpecFileError(problems)

    name = data["name"]
    dim = data["dim"]
    colors = data["colors"]
    if not isinstance(name, str) or not name:
        problems.append("name must be a nonempty string")
    if not isinstance(dim, int) or dim < 1:
        problems.append("dim must be a positive integer")
        raise SpecFileError(problems)
    if (
        not isinstance(colors, list)
        or not colors
        or len(set(colors)) != len(colors)
        or not all(isinstance(c, str) for c in colors)
    ):
        problems.append("colors must be a list of distinct labels")
        raise SpecFileError(problems)
    m = len(colors)

    lattice = None
    try:
        rows = [
            [Fraction(x) for x in row] for row in data["lattice_basis"]
        ]
        lattice = LatticeBasis.from_rows(rows)
        if lattice.dim != dim:
            problems.append("lattice_basis is not dim x dim")
            lattice = None
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        problems.append(f"lattice_basis: {exc}")

    expansion = None
    exp_rows = data["expansion"]
    if (
        isinstance(exp_rows, list)
        and len(exp_rows) == dim
        and all(
            isinstance(r, list)
            and len(r) == dim
            and all(isinstance(x, int) and not isinstance(x, bool) for x in r)
            for r in exp_rows
        )
    ):
        expansion = ExpansionMatrix.from_rows(exp_rows)
    else:
        problems.append("expansion must be a dim x dim integer matrix")

    digits_in = data["digits"]
    digits = None
    if (
        isinstance(digits_in, list)
        and len(digits_in) == m
        and all(isinstance(row, list) and len(row) == m for row in digits_in)
    ):
        digits = tuple(
            tuple(
                tuple(_check_vectors(problems, f"digits[{i}][{j}]", cell, dim))
                for j, cell in enumerate(row)
            )
            for i, row in enumerate(digits_in)
        )
    else:
        problems.append("digits must be an m x m array of digit lists")

    seed_in = data["seed"]
    seed = None
    if isinstance(seed_in, list) and len(seed_in) == m:
        seed = Cluster.build(
            [_check_vectors(problems, f"seed[{i}]", c, dim) for i, c in enumerate(seed_in)]
        )
    else:
        problems.append("seed must list points for each color")

    seed_power = data.get("seed_power", 1)
    if not isinstance(seed_power, int) or seed_power < 1:
        problems.append("seed_power must be a positive integer")
        seed_power = 1

    if problems:
        raise SpecFileError(problems)

    sys = SubstitutionSystem(
        name=name,
        dim=dim,
        colors=tuple(colors),
        lattice=lattice,
        expansion=expansion,
        digits=digits,
        seed=seed,
        seed_power=seed_power,
    )
    more = sys.validate()
    if more:
        raise SpecFileError(more)
    return sys


def system_to_dict(sys: SubstitutionSystem) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "name": sys.name,
        "dim": sys.dim,
        "colors": list(sys.colors),
        "lattice_basis": [[str(x) for x in row] for row in sys.lattice.basis],
        "expansion": [list(row) for row in sys.expansion.rows],
        "digits": [
            [[list(v) for v in cell] for cell in row] for row in sys.digits
        ],
        "seed": [[list(p) for p in color] for color in sys.seed.points],
        "seed_power": sys.seed_power,
    }


def serialize(sys: SubstitutionSystem) -> str:
    return json.dumps(system_to_dict(sys), sort_keys=True, indent=2) + "\n"


def parse_spec(path) -> SubstitutionSystem:
    """Load and validate a spec file; SpecFileError carries all violations."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SpecFileError([f"cannot read {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise SpecFileError([f"invalid JSON in {path}: {exc}"]) from exc
    return system_from_dict(data)


def write_spec(sys: SubstitutionSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(sys))


def load_bundled(name: str) -> SubstitutionSystem:
    """One of the systems shipped with the package (see BUNDLED)."""
    if name not in BUNDLED:
        raise SpecFileError([f"unknown bundled system {name!r}; have {BUNDLED}"])
    text = resources.files("latsub.systems").joinpath(f"{name}.spec").read_text()
    return system_from_dict(json.loads(text))


def bundled_path(name: str):
    return resources.files("latsub.systems").joinpath(f"{name}.spec")
