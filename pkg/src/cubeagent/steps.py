"""The five layered stages and the 28 named step templates inside them."""

from __future__ import annotations

from .cube import CubieState

# (stage name, cumulative goal predicate)
STAGES = (
    ("cross", "cross"),
    ("first_layer_corners", "first_layer"),
    ("second_layer_edges", "first_two_layers"),
    ("last_layer_orientation", "last_layer_oriented"),
    ("last_layer_permutation", "solved"),
)

# name -> (stage, what the step does)
STEP_TEMPLATES = {
    "cross_DR": ("cross", "bring the DR edge home, oriented"),
    "cross_DF": ("cross", "bring the DF edge home, oriented"),
    "cross_DL": ("cross", "bring the DL edge home, oriented"),
    "cross_DB": ("cross", "bring the DB edge home, oriented"),
    "corner_DFR": ("first_layer_corners", "insert the DFR corner"),
    "corner_DLF": ("first_layer_corners", "insert the DLF corner"),
    "corner_DBL": ("first_layer_corners", "insert the DBL corner"),
    "corner_DRB": ("first_layer_corners", "insert the DRB corner"),
    "edge_FR": ("second_layer_edges", "insert the FR edge"),
    "edge_FL": ("second_layer_edges", "insert the FL edge"),
    "edge_BL": ("second_layer_edges", "insert the BL edge"),
    "edge_BR": ("second_layer_edges", "insert the BR edge"),
    "oll_edges_dot": ("last_layer_orientation", "no last-layer edge oriented"),
    "oll_edges_line": ("last_layer_orientation", "two opposite last-layer edges oriented"),
    "oll_edges_L": ("last_layer_orientation", "two adjacent last-layer edges oriented"),
    "oll_corners_sune": ("last_layer_orientation", "one corner oriented, others twisted clockwise"),
    "oll_corners_antisune": ("last_layer_orientation", "one corner oriented, others counter-clockwise"),
    "oll_corners_H": ("last_layer_orientation", "no corner oriented, stickers on two opposite sides"),
    "oll_corners_pi": ("last_layer_orientation", "no corner oriented, one side shows two stickers"),
    "oll_corners_headlights": ("last_layer_orientation", "two adjacent twisted corners facing one side"),
    "oll_corners_chameleon": ("last_layer_orientation", "two adjacent twisted corners facing away"),
    "oll_corners_bowtie": ("last_layer_orientation", "two diagonal twisted corners"),
    "pll_corners_adjacent": ("last_layer_permutation", "swap two adjacent corners"),
    "pll_corners_diagonal": ("last_layer_permutation", "swap two diagonal corners"),
    "pll_edges_Ua": ("last_layer_permutation", "cycle three edges counter-clockwise"),
    "pll_edges_Ub": ("last_layer_permutation", "cycle three edges clockwise"),
    "pll_edges_H": ("last_layer_permutation", "swap opposite edge pairs"),
    "pll_edges_Z": ("last_layer_permutation", "swap adjacent edge pairs"),
}

assert len(STEP_TEMPLATES) == 28

_CROSS_EDGES = ((4, "cross_DR"), (5, "cross_DF"), (6, "cross_DL"), (7, "cross_DB"))
# side face that shows a U-layer corner's U sticker, indexed by [slot][twist]
_CORNER_SIDE = {0: (None, "R", "F"), 1: (None, "F", "L"), 2: (None, "L", "B"), 3: (None, "B", "R")}


def _edge_oll(state: CubieState):
    flipped = [i for i in range(4) if state.eo[i]]
    if not flipped:
        return None
    if len(flipped) == 4:
        return "oll_edges_dot"
    a, b = flipped
    return "oll_edges_line" if (b - a) == 2 else "oll_edges_L"


def _corner_oll(state: CubieState):
    co = state.co[:4]
    twisted = [i for i in range(4) if co[i]]
    if not twisted:
        return None
    if len(twisted) == 3:
        return "oll_corners_sune" if all(co[i] == 2 for i in twisted) else "oll_corners_antisune"
    sides = [_CORNER_SIDE[i][co[i]] for i in twisted]
    if len(twisted) == 4:
        return "oll_corners_pi" if len(set(sides)) == 3 else "oll_corners_H"
    a, b = twisted
    if (b - a) == 2:
        return "oll_corners_bowtie"
    return "oll_corners_headlights" if sides[0] == sides[1] else "oll_corners_chameleon"


def _pll(state: CubieState):
    cp = state.cp[:4]
    ep = state.ep[:4]
    labels = []
    shift = None
    for a in range(4):
        if all(cp[i] == (i + a) % 4 for i in range(4)):
            shift = a
    if shift is None:
        pairs = sum(1 for i in range(4) if cp[(i + 1) % 4] == (cp[i] + 1) % 4)
        labels.append("pll_corners_adjacent" if pairs else "pll_corners_diagonal")
        shift = 0
    rel = [(ep[i] - shift) % 4 for i in range(4)]
    fixed = [i for i in range(4) if rel[i] == i]
    if len(fixed) == 1:
        i = (fixed[0] + 1) % 4
        labels.append("pll_edges_Ub" if rel[i] == (i + 1) % 4 else "pll_edges_Ua")
    elif not fixed:
        labels.append("pll_edges_H" if rel[0] == 2 else "pll_edges_Z")
    return tuple(labels)


def stage_labels(stage: str, state: CubieState) -> tuple:
    """Step templates a stage has to perform, judged from the state at stage entry."""
    if stage == "cross":
        return tuple(name for slot, name in _CROSS_EDGES
                     if not (state.ep[slot] == slot and state.eo[slot] == 0))
    if stage == "last_layer_orientation":
        return tuple(x for x in (_edge_oll(state), _corner_oll(state)) if x)
    if stage == "last_layer_permutation":
        return _pll(state)
    return ()
