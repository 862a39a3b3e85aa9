"""Minimal cheminformatics: SMILES parsing, 2D depiction, 3D embedding.

Covers the SMILES subset models actually emit: organic-subset atoms,
bracket atoms with charge/isotope, branches, ring closures (including
%nn), bond symbols and dot-disconnection. No valence model: structure
checks stop at grammar level. Layouts are deterministic, so identical
input yields byte-identical coordinates.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_ORGANIC = {"b", "c", "n", "o", "p", "s"}
BOND_ORDERS = {"-": 1, "=": 2, "#": 3, "$": 4, ":": 1, "/": 1, "\\": 1}

ELEMENT_SYMBOLS = {
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al",
    "Si", "P", "S", "Cl", "Ar", "K", "Ca", "Fe", "Cu", "Zn", "Se", "Br",
    "Kr", "Ag", "Sn", "I", "Xe", "Pt", "Au", "Hg", "Pb",
}

ELEMENT_COLORS = {
    "C": "#222222",
    "N": "#2040d0",
    "O": "#d02020",
    "S": "#b8a000",
    "P": "#e07000",
    "F": "#20a020",
    "Cl": "#20a020",
    "Br": "#803020",
    "I": "#702080",
    "B": "#d08080",
    "H": "#808080",
}


class SmilesParseError(ValueError):
    """Raised when a SMILES string fails to parse."""


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    isotope: int | None = None


@dataclass
class Bond:
    a: int
    b: int
    order: int = 1
    aromatic: bool = False


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)


def parse_smiles(smiles: str) -> Molecule:
    """Parse a SMILES string into an atom/bond graph.

    Raises SmilesParseError on grammar violations: unbalanced branches or
    brackets, dangling ring-closure digits, trailing bond symbols, or
    characters outside the notation.
    """
    if not smiles or not smiles.strip():
        raise SmilesParseError("empty SMILES: nothing to parse")
    smiles = smiles.strip()
    mol = Molecule()
    prev_atom: int | None = None
    pending_bond: int | None = None
    pending_aromatic = False
    branch_stack: list[int | None] = []
    ring_open: dict[int, tuple[int, int | None]] = {}
    i = 0
    n = len(smiles)

    def add_atom(atom: Atom) -> None:
        nonlocal prev_atom, pending_bond, pending_aromatic
        mol.atoms.append(atom)
        idx = len(mol.atoms) - 1
        if prev_atom is not None:
            order = pending_bond if pending_bond is not None else 1
            aromatic = pending_aromatic or (
                atom.aromatic and mol.atoms[prev_atom].aromatic and pending_bond is None
            )
            mol.bonds.append(Bond(prev_atom, idx, order, aromatic))
        prev_atom = idx
        pending_bond = None
        pending_aromatic = False

    while i < n:
        ch = smiles[i]
        if ch == "(":
            if prev_atom is None:
                raise SmilesParseError(f"parse failure at {i}: branch before any atom")
            branch_stack.append(prev_atom)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesParseError(f"parse failure at {i}: unmatched ')'")
            prev_atom = branch_stack.pop()
            i += 1
        elif ch in BOND_ORDERS:
            if pending_bond is not None:
                raise SmilesParseError(f"parse failure at {i}: consecutive bond symbols")
            pending_bond = BOND_ORDERS[ch]
            pending_aromatic = ch == ":"
            i += 1
        elif ch == ".":
            prev_atom = None
            pending_bond = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                if i + 2 >= n or not smiles[i + 1 : i + 3].isdigit():
                    raise SmilesParseError(f"parse failure at {i}: bad %nn ring index")
                ring_id = int(smiles[i + 1 : i + 3])
                i += 3
            else:
                ring_id = int(ch)
                i += 1
            if prev_atom is None:
                raise SmilesParseError(f"parse failure: ring closure {ring_id} before any atom")
            if ring_id in ring_open:
                other, order = ring_open.pop(ring_id)
                bond_order = pending_bond or order or 1
                aromatic = mol.atoms[other].aromatic and mol.atoms[prev_atom].aromatic
                mol.bonds.append(Bond(other, prev_atom, bond_order, aromatic))
            else:
                ring_open[ring_id] = (prev_atom, pending_bond)
            pending_bond = None
        elif ch == "[":
            end = smiles.find("]", i + 1)
            if end < 0:
                raise SmilesParseError(f"parse failure at {i}: unclosed bracket atom")
            add_atom(_parse_bracket_atom(smiles[i + 1 : end], i))
            i = end + 1
        elif ch.isalpha():
            two = smiles[i : i + 2]
            if two in ("Cl", "Br"):
                add_atom(Atom(two))
                i += 2
            elif ch in AROMATIC_ORGANIC:
                add_atom(Atom(ch.upper(), aromatic=True))
                i += 1
            elif ch.upper() in ORGANIC_SUBSET and ch.isupper():
                add_atom(Atom(ch))
                i += 1
            else:
                raise SmilesParseError(f"parse failure at {i}: unknown atom {ch!r}")
        else:
            raise SmilesParseError(f"parse failure at {i}: unexpected character {ch!r}")

    if branch_stack:
        raise SmilesParseError("parse failure: unclosed branch '('")
    if ring_open:
        raise SmilesParseError(f"parse failure: dangling ring closure(s) {sorted(ring_open)}")
    if pending_bond is not None:
        raise SmilesParseError("parse failure: trailing bond symbol")
    if not mol.atoms:
        raise SmilesParseError("parse failure: no atoms")
    return mol


def _parse_bracket_atom(body: str, pos: int) -> Atom:
    if not body:
        raise SmilesParseError(f"parse failure at {pos}: empty bracket atom")
    j = 0
    isotope = None
    while j < len(body) and body[j].isdigit():
        j += 1
    if j:
        isotope = int(body[:j])
    rest = body[j:]
    if not rest:
        raise SmilesParseError(f"parse failure at {pos}: bracket atom without element")
    element = None
    aromatic = False
    if rest[:2] in ELEMENT_SYMBOLS:
        element = rest[:2]
        rest = rest[2:]
    elif rest[0].upper() in {s for s in ELEMENT_SYMBOLS if len(s) == 1}:
        aromatic = rest[0].islower()
        element = rest[0].upper()
        rest = rest[1:]
    else:
        raise SmilesParseError(f"parse failure at {pos}: unknown element in bracket atom")
    charge = 0
    k = 0
    while k < len(rest):
        ch = rest[k]
        if ch in "+-":
            sign = 1 if ch == "+" else -1
            run = 1
            while k + run < len(rest) and rest[k + run] == ch:
                run += 1
            k += run
            digits = ""
            while k < len(rest) and rest[k].isdigit():
                digits += rest[k]
                k += 1
            charge = sign * (int(digits) if digits else run)
        elif ch in "H@" or ch.isdigit() or ch == ":":
            k += 1  # hydrogen counts, chirality and atom class are accepted, not modeled
        else:
            raise SmilesParseError(f"parse failure at {pos}: bad bracket token {ch!r}")
    return Atom(element, aromatic=aromatic, charge=charge, isotope=isotope)


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------


def _graph(mol: Molecule):
    import networkx as nx

    g = nx.Graph()
    g.add_nodes_from(range(len(mol.atoms)))
    for bond in mol.bonds:
        g.add_edge(bond.a, bond.b)
    return g


def layout_2d(mol: Molecule) -> list[tuple[float, float]]:
    """Deterministic planar-ish coordinates, unit bond length target."""
    import networkx as nx

    g = _graph(mol)
    if len(mol.atoms) == 1:
        return [(0.0, 0.0)]
    try:
        pos = nx.kamada_kawai_layout(g, scale=float(max(1, len(mol.atoms) // 3)))
    except Exception:
        pos = nx.spring_layout(g, seed=4, iterations=120)
    return [tuple(map(float, pos[i])) for i in range(len(mol.atoms))]


def layout_3d(mol: Molecule, seed: int = 11) -> list[tuple[float, float, float]]:
    """Deterministic 3D embedding scaled to ~1.5 A bond lengths."""
    import networkx as nx

    g = _graph(mol)
    if len(mol.atoms) == 1:
        return [(0.0, 0.0, 0.0)]
    pos = nx.spring_layout(g, dim=3, seed=seed, iterations=120)
    coords = [pos[i] for i in range(len(mol.atoms))]
    lengths = [
        math.dist(coords[b.a], coords[b.b]) for b in mol.bonds if b.a != b.b
    ] or [1.0]
    scale = 1.5 / (sum(lengths) / len(lengths))
    return [tuple(round(float(c) * scale, 3) for c in xyz) for xyz in coords]


# ---------------------------------------------------------------------------
# Rendering and serialization
# ---------------------------------------------------------------------------


def depict_png(smiles: str, size_px: int = 500) -> bytes:
    """Render a 2D depiction of ``smiles`` to PNG bytes."""
    mol = parse_smiles(smiles)
    coords = layout_2d(mol)

    import matplotlib

    matplotlib.use("Agg", force=True)
    from matplotlib.figure import Figure

    fig = Figure(figsize=(size_px / 100, size_px / 100), dpi=100)
    ax = fig.add_subplot(111)
    ax.set_aspect("equal")
    ax.axis("off")

    for bond in mol.bonds:
        x1, y1 = coords[bond.a]
        x2, y2 = coords[bond.b]
        dx, dy = x2 - x1, y2 - y1
        norm = math.hypot(dx, dy) or 1.0
        ox, oy = -dy / norm * 0.06, dx / norm * 0.06
        offsets = {1: [0.0], 2: [-0.5, 0.5], 3: [-1.0, 0.0, 1.0], 4: [-1.5, -0.5, 0.5, 1.5]}
        for k in offsets.get(bond.order, [0.0]):
            ax.plot(
                [x1 + ox * k, x2 + ox * k],
                [y1 + oy * k, y2 + oy * k],
                color="#303030",
                linewidth=1.6,
                solid_capstyle="round",
                zorder=1,
            )
        if bond.aromatic and bond.order == 1:
            ax.plot(
                [x1 + ox, x2 + ox],
                [y1 + oy, y2 + oy],
                color="#909090",
                linewidth=1.0,
                linestyle=(0, (3, 3)),
                zorder=1,
            )

    for idx, atom in enumerate(mol.atoms):
        x, y = coords[idx]
        if atom.element == "C" and atom.charge == 0 and atom.isotope is None:
            continue
        label = atom.element
        if atom.charge:
            label += ("+" if atom.charge > 0 else "-") * min(abs(atom.charge), 3)
        ax.text(
            x,
            y,
            label,
            ha="center",
            va="center",
            fontsize=13,
            color=ELEMENT_COLORS.get(atom.element, "#404040"),
            bbox={"boxstyle": "circle,pad=0.12", "fc": "white", "ec": "none"},
            zorder=2,
        )

    xs = [c[0] for c in coords]
    ys = [c[1] for c in coords]
    pad = 0.6
    ax.set_xlim(min(xs) - pad, max(xs) + pad)
    ax.set_ylim(min(ys) - pad, max(ys) + pad)

    buf = io.BytesIO()
    fig.savefig(buf, format="png")
    return buf.getvalue()


def embed_pdb_block(smiles: str, seed: int = 11) -> str:
    """3D-embed a molecule and serialize it as HETATM/CONECT records."""
    mol = parse_smiles(smiles)
    coords = layout_3d(mol, seed=seed)
    counts: dict[str, int] = {}
    lines = []
    for idx, (atom, (x, y, z)) in enumerate(zip(mol.atoms, coords), start=1):
        counts[atom.element] = counts.get(atom.element, 0) + 1
        name = f"{atom.element}{counts[atom.element]}"[:4]
        lines.append(
            f"HETATM{idx:5d} {name:<4s} LIG L{1:4d}    "
            f"{x:8.3f}{y:8.3f}{z:8.3f}{1.00:6.2f}{0.00:6.2f}          "
            f"{atom.element:>2s}"
        )
    neighbors: dict[int, list[int]] = {}
    for bond in mol.bonds:
        neighbors.setdefault(bond.a, []).append(bond.b)
        neighbors.setdefault(bond.b, []).append(bond.a)
    for idx in sorted(neighbors):
        row = neighbors[idx][:4]
        conect = f"CONECT{idx + 1:5d}" + "".join(f"{j + 1:5d}" for j in row)
        lines.append(conect)
    lines.append("END")
    return "\n".join(lines) + "\n"
