"""Compound fault labels over the four transmission components.

A compound label holds one set of fault indices per component: motor (M),
gearbox (G), left axle box (LA) and right axle box (RA). The canonical
string form is ``M{a}_G{b}_LA{c}_RA{d}`` where each field is ``0`` for a
healthy component or a ``+``-joined ascending list of that component's
codes, e.g. ``M0_G0_LA1+LA2+LA4_RA0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import InvalidComponent, InvalidFaultCode, InvalidLabel

COMPONENTS = ("M", "G", "LA", "RA")

# Highest fault index per component; the label space size is the product
# of the subset counts: 2^4 * 2^8 * 2^4 * 2^1 = 131072.
MAX_INDEX = {"M": 4, "G": 8, "LA": 4, "RA": 1}

#: The 17 single-fault codes, in canonical order.
FAULT_CODES = (
    "M1", "M2", "M3", "M4",
    "G1", "G2", "G3", "G4", "G5", "G6", "G7", "G8",
    "LA1", "LA2", "LA3", "LA4",
    "RA1",
)

FAULT_DESCRIPTIONS = {
    "M1": "motor short circuit",
    "M2": "motor broken rotor bar",
    "M3": "motor bearing fault",
    "M4": "motor bowed rotor",
    "G1": "gearbox gear cracked tooth",
    "G2": "gearbox gear worn tooth",
    "G3": "gearbox gear missing tooth",
    "G4": "gearbox gear chipped tooth",
    "G5": "gearbox bearing inner race fault",
    "G6": "gearbox bearing outer race fault",
    "G7": "gearbox bearing rolling element fault",
    "G8": "gearbox bearing cage fault",
    "LA1": "left axle box bearing inner race fault",
    "LA2": "left axle box bearing outer race fault",
    "LA3": "left axle box bearing rolling element fault",
    "LA4": "left axle box bearing cage fault",
    "RA1": "right axle box bearing inner race fault",
}


def split_fault_code(code: str) -> tuple[str, int]:
    """Split a fault code like ``"LA2"`` into ``("LA", 2)``."""
    if code not in FAULT_CODES:
        raise InvalidFaultCode(f"unknown fault code {code!r}")
    comp = code.rstrip("0123456789")
    return comp, int(code[len(comp):])


@dataclass(frozen=True)
class CompoundLabel:
    """Multi-label fault state of the whole transmission."""

    motor: frozenset[int] = field(default_factory=frozenset)
    gearbox: frozenset[int] = field(default_factory=frozenset)
    left_axle: frozenset[int] = field(default_factory=frozenset)
    right_axle: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        for comp, values in zip(COMPONENTS, self._sets()):
            object.__setattr__(self, _FIELD_BY_COMPONENT[comp], frozenset(values))
            bad = [v for v in values if not 1 <= v <= MAX_INDEX[comp]]
            if bad:
                raise InvalidLabel(f"component {comp} has out-of-range fault indices {sorted(bad)}")

    def _sets(self) -> tuple[frozenset[int], ...]:
        return (self.motor, self.gearbox, self.left_axle, self.right_axle)

    def component_set(self, component: str) -> frozenset[int]:
        if component not in COMPONENTS:
            raise InvalidComponent(f"unknown component {component!r}")
        return getattr(self, _FIELD_BY_COMPONENT[component])

    def has_fault(self, code: str) -> bool:
        """True iff the single-fault `code` is part of this label."""
        comp, idx = split_fault_code(code)
        return idx in self.component_set(comp)

    @property
    def active_codes(self) -> tuple[str, ...]:
        """All member fault codes in canonical order."""
        return tuple(c for c in FAULT_CODES if self.has_fault(c))

    def is_normal(self) -> bool:
        return not any(self._sets())

    def __str__(self) -> str:
        return format_label(self)

    @classmethod
    def from_codes(cls, codes) -> "CompoundLabel":
        sets: dict[str, set[int]] = {c: set() for c in COMPONENTS}
        for code in codes:
            comp, idx = split_fault_code(code)
            sets[comp].add(idx)
        return cls(*(frozenset(sets[c]) for c in COMPONENTS))


_FIELD_BY_COMPONENT = {"M": "motor", "G": "gearbox", "LA": "left_axle", "RA": "right_axle"}

NORMAL_LABEL = CompoundLabel()


def format_label(label: CompoundLabel) -> str:
    """Canonical string form, e.g. ``M1_G0_LA1+LA2_RA0``."""
    parts = []
    for comp in COMPONENTS:
        values = sorted(label.component_set(comp))
        if values:
            parts.append("+".join(f"{comp}{v}" for v in values))
        else:
            parts.append(f"{comp}0")
    return "_".join(parts)


def parse_label(text: str) -> CompoundLabel:
    """Parse the canonical string form back into a CompoundLabel.

    Rejects wrong component order, duplicate or descending indices, and
    out-of-range codes.
    """
    parts = text.split("_")
    if len(parts) != len(COMPONENTS):
        raise InvalidLabel(f"label {text!r} must have 4 _-separated fields")
    sets = []
    for comp, part in zip(COMPONENTS, parts):
        if part == f"{comp}0":
            sets.append(frozenset())
            continue
        values = []
        for token in part.split("+"):
            if not token.startswith(comp):
                raise InvalidLabel(f"field {part!r} of {text!r} does not belong to component {comp}")
            tail = token[len(comp):]
            if not tail.isdigit():
                raise InvalidLabel(f"bad token {token!r} in {text!r}")
            idx = int(tail)
            if not 1 <= idx <= MAX_INDEX[comp]:
                raise InvalidLabel(f"token {token!r} out of range in {text!r}")
            values.append(idx)
        if values != sorted(set(values)):
            raise InvalidLabel(f"field {part!r} of {text!r} must list codes once, ascending")
        sets.append(frozenset(values))
    return CompoundLabel(*sets)


def all_labels():
    """Iterate the full 131072-label space (use sparingly)."""
    subsets = []
    for comp in COMPONENTS:
        indices = range(1, MAX_INDEX[comp] + 1)
        comp_subsets = []
        for r in range(len(indices) + 1):
            comp_subsets.extend(frozenset(c) for c in itertools.combinations(indices, r))
        subsets.append(comp_subsets)
    for combo in itertools.product(*subsets):
        yield CompoundLabel(*combo)


# The 42 compound labels of the dataset this pipeline targets, with their
# split membership: (label, in_train, in_prelim_test, in_final_test).
# Rows 1-22 appear in training, rows 1-17 in the preliminary test set and
# all 42 in the final test set.
LABEL_CATALOG: tuple[tuple[str, bool, bool, bool], ...] = (
    ("M0_G0_LA0_RA0", True, True, True),
    ("M1_G0_LA0_RA0", True, True, True),
    ("M2_G0_LA0_RA0", True, True, True),
    ("M3_G0_LA0_RA0", True, True, True),
    ("M4_G0_LA0_RA0", True, True, True),
    ("M0_G1_LA0_RA0", True, True, True),
    ("M0_G2_LA0_RA0", True, True, True),
    ("M0_G3_LA0_RA0", True, True, True),
    ("M0_G4_LA0_RA0", True, True, True),
    ("M0_G5_LA0_RA0", True, True, True),
    ("M0_G6_LA0_RA0", True, True, True),
    ("M0_G7_LA0_RA0", True, True, True),
    ("M0_G8_LA0_RA0", True, True, True),
    ("M0_G0_LA1_RA0", True, True, True),
    ("M0_G0_LA2_RA0", True, True, True),
    ("M0_G0_LA3_RA0", True, True, True),
    ("M0_G0_LA4_RA0", True, True, True),
    ("M0_G0_LA1+LA2+LA4_RA0", True, False, True),
    ("M0_G4+G5_LA0_RA0", True, False, True),
    ("M1_G0_LA1_RA1", True, False, True),
    ("M0_G3_LA1_RA0", True, False, True),
    ("M1_G0_LA1_RA0", True, False, True),
    ("M4_G3_LA0_RA0", False, False, True),
    ("M0_G1+G5_LA0_RA0", False, False, True),
    ("M0_G0_LA2+LA3_RA0", False, False, True),
    ("M2_G0_LA1_RA0", False, False, True),
    ("M0_G0_LA2+LA4_RA0", False, False, True),
    ("M3_G3_LA0_RA0", False, False, True),
    ("M1_G5_LA0_RA0", False, False, True),
    ("M0_G2+G5_LA0_RA0", False, False, True),
    ("M0_G0_LA1+LA2_RA0", False, False, True),
    ("M1_G3_LA0_RA0", False, False, True),
    ("M3_G0_LA1_RA0", False, False, True),
    ("M3_G5_LA0_RA0", False, False, True),
    ("M0_G0_LA1_RA1", False, False, True),
    ("M0_G3+G5_LA0_RA0", False, False, True),
    ("M0_G0_LA1+LA2+LA3+LA4_RA0", False, False, True),
    ("M0_G0_LA1+LA2+LA3_RA0", False, False, True),
    ("M2_G5_LA0_RA0", False, False, True),
    ("M4_G5_LA0_RA0", False, False, True),
    ("M2_G3_LA0_RA0", False, False, True),
    ("M2_G0_LA1_RA1", False, False, True),
)


def catalog_labels(split: str | None = None) -> tuple[str, ...]:
    """Catalog label strings, optionally filtered by split membership."""
    if split is None:
        return tuple(row[0] for row in LABEL_CATALOG)
    col = {"train": 1, "test_prelim": 2, "test_final": 3}.get(split)
    if col is None:
        raise InvalidLabel(f"unknown split {split!r}")
    return tuple(row[0] for row in LABEL_CATALOG if row[col])
