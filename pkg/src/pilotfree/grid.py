"""
Resource-grid geometry for repetition-based (pilot-free) transmission.

A slot is a ``(12 * n_rb, n_symbols)`` array of resource elements (REs),
indexed ``[subcarrier, symbol]``. REs are also addressed by a 1-based linear
index that runs down the subcarriers first::

    index(m, n) = 12 * n * n_rb + m + 1

which is plain column-major (Fortran) order plus one.

A repetition pattern picks ``n_per_rb`` *source* REs and the same number of
*destination* REs inside every resource block. The transmitter copies the
source symbols onto the destination REs; the receiver uses the two copies as
the two views of a CCA problem. The grid is split into sub-grids of
``n_bsg`` contiguous RBs and every sub-grid gets its own copy of the pattern.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PatternInfeasibleError

__all__ = [
    "RB_SUBCARRIERS",
    "SPEED_OF_LIGHT",
    "GridDims",
    "SubGridLayout",
    "PatternKind",
    "CcaPattern",
    "VicinityMap",
    "CoherenceBlock",
    "re_index",
    "re_position",
    "partition_subgrids",
    "make_pattern",
    "shift_pattern",
    "make_layer_patterns",
    "check_disjoint",
    "vicinity_partition",
    "coherence_block",
    "select_pattern_kind",
    "export_patterns",
    "import_patterns",
]

RB_SUBCARRIERS = 12
SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class GridDims:
    n_rb: int
    n_symbols: int = 14
    n_layers: int = 1

    def __post_init__(self):
        if self.n_rb < 1 or self.n_symbols < 1 or self.n_layers < 1:
            raise ConfigurationError(
                f"grid needs n_rb, n_symbols, n_layers >= 1, got {self}"
            )

    @property
    def n_subcarriers(self):
        return RB_SUBCARRIERS * self.n_rb

    @property
    def n_re(self):
        return self.n_subcarriers * self.n_symbols

    @property
    def shape(self):
        return (self.n_subcarriers, self.n_symbols)


def re_index(m, n, n_rb):
    """1-based linear index of RE ``(subcarrier m, symbol n)``; vectorised."""
    m = np.asarray(m)
    n = np.asarray(n)
    n_sc = RB_SUBCARRIERS * n_rb
    if np.any(m < 0) or np.any(m >= n_sc):
        raise IndexError(f"subcarrier index out of range [0, {n_sc})")
    if np.any(n < 0):
        raise IndexError("symbol index must be nonnegative")
    idx = n_sc * n + m + 1
    return int(idx) if idx.ndim == 0 else idx


def re_position(index, n_rb):
    """Inverse of :func:`re_index`: returns ``(m, n)``."""
    index = np.asarray(index)
    if np.any(index < 1):
        raise IndexError("linear RE indices start at 1")
    n, m = np.divmod(index - 1, RB_SUBCARRIERS * n_rb)
    if m.ndim == 0:
        return int(m), int(n)
    return m, n


@dataclass(frozen=True)
class SubGridLayout:
    n_rb: int
    n_bsg: int

    @property
    def subgrid_count(self):
        return self.n_rb // self.n_bsg

    @property
    def rb_ranges(self):
        return [range(j * self.n_bsg, (j + 1) * self.n_bsg) for j in range(self.subgrid_count)]

    def subcarrier_slice(self, j):
        width = RB_SUBCARRIERS * self.n_bsg
        return slice(j * width, (j + 1) * width)

    def subgrid_of_subcarrier(self, m):
        return np.asarray(m) // (RB_SUBCARRIERS * self.n_bsg)


def partition_subgrids(dims, n_bsg):
    """Split the grid into equal, contiguous sub-grids of ``n_bsg`` RBs."""
    if n_bsg < 1 or dims.n_rb % n_bsg:
        raise ConfigurationError(
            f"sub-grid size {n_bsg} RBs does not divide n_rb={dims.n_rb}"
        )
    return SubGridLayout(dims.n_rb, n_bsg)


class PatternKind(str, enum.Enum):
    """Repetition orientation.

    ``TIME``: each view is a symbol column across the RB's subcarriers and the
    copy lands on a later column. ``FREQUENCY``: each view is a pair of
    subcarriers spread over the slot and the copy lands on another pair.
    """

    TIME = "time"
    FREQUENCY = "frequency"


@dataclass(frozen=True, eq=False)
class CcaPattern:
    """Source/destination RE sets of one layer, replicated per sub-grid.

    ``base_source`` / ``base_dest`` hold ``(subcarrier-in-RB, symbol)`` pairs,
    row ``k`` of one being the copy of row ``k`` of the other. ``source`` and
    ``dest`` are ``(subgrid_count, view_length)`` arrays of linear indices;
    column ``k`` of ``dest`` carries the repeat of column ``k`` of ``source``.
    Columns are in ascending source-index order, so column 0 is the first
    symbol of the repeated block.
    """

    layer: int
    kind: PatternKind
    n_per_rb: int
    n_rb: int
    n_symbols: int
    n_bsg: int
    base_source: np.ndarray
    base_dest: np.ndarray
    source: np.ndarray = field(repr=False)
    dest: np.ndarray = field(repr=False)

    @property
    def view_length(self):
        return self.n_per_rb * self.n_bsg

    @property
    def subgrid_count(self):
        return self.source.shape[0]

    def positions(self, role):
        """``(m, n)`` arrays shaped like ``source``/``dest`` for role ``"S"``/``"D"``."""
        idx = self.source if role == "S" else self.dest
        return re_position(idx, self.n_rb)

    def re_set(self):
        return set(self.source.ravel().tolist()) | set(self.dest.ravel().tolist())


def _expand(base_source, base_dest, n_rb, n_symbols, n_bsg):
    """Replicate a per-RB pattern across every RB and group by sub-grid."""
    n_sub = n_rb // n_bsg
    k = len(base_source)
    src = np.empty((n_sub, n_bsg * k), dtype=np.int64)
    dst = np.empty_like(src)
    for j in range(n_sub):
        rbs = np.arange(j * n_bsg, (j + 1) * n_bsg)
        m_s = (rbs[:, None] * RB_SUBCARRIERS + base_source[None, :, 0]).ravel()
        n_s = np.broadcast_to(base_source[None, :, 1], (n_bsg, k)).ravel()
        m_d = (rbs[:, None] * RB_SUBCARRIERS + base_dest[None, :, 0]).ravel()
        n_d = np.broadcast_to(base_dest[None, :, 1], (n_bsg, k)).ravel()
        s_idx = re_index(m_s, n_s, n_rb)
        d_idx = re_index(m_d, n_d, n_rb)
        order = np.argsort(s_idx, kind="stable")
        src[j] = s_idx[order]
        dst[j] = d_idx[order]
    return src, dst


def _spread(count, span):
    """``count`` positions spread evenly over ``range(span)``, centred."""
    return np.floor((np.arange(count) + 0.5) * span / count).astype(int)


def _time_base(n_per_rb, n_symbols):
    n_cols = math.ceil(n_per_rb / RB_SUBCARRIERS)
    # source columns s0..s0+c-1 must sit strictly before their mirrors
    limit = math.ceil((n_symbols + 1 - 2 * n_cols) / 2) - 1
    s0 = min((n_symbols - 1) // 4, limit)
    if s0 < 0:
        raise PatternInfeasibleError(
            f"{n_per_rb} REs per RB need {n_cols} source and {n_cols} destination "
            f"symbols; slot has {n_symbols}"
        )
    pairs_s, pairs_d = [], []
    remaining = n_per_rb
    for c in range(n_cols):
        q = min(RB_SUBCARRIERS, remaining)
        remaining -= q
        sym = s0 + c
        for sc in _spread(q, RB_SUBCARRIERS):
            pairs_s.append((sc, sym))
            pairs_d.append((sc, n_symbols - 1 - sym))
    return np.array(pairs_s), np.array(pairs_d)


def _frequency_base(n_per_rb, n_symbols):
    if n_per_rb % 2:
        raise PatternInfeasibleError("frequency repetition needs an even n_per_rb")
    per_sc = n_per_rb // 2
    if per_sc > n_symbols:
        raise PatternInfeasibleError(
            f"{per_sc} REs per subcarrier do not fit a {n_symbols}-symbol slot"
        )
    a = RB_SUBCARRIERS // 4 - 1
    half = RB_SUBCARRIERS // 2
    syms = _spread(per_sc, n_symbols)
    pairs_s = [(a + c, t) for c in range(2) for t in syms]
    pairs_d = [(a + half + c, t) for c in range(2) for t in syms]
    return np.array(pairs_s), np.array(pairs_d)


def make_pattern(dims, layout, kind, n_per_rb, layer=0):
    """Build the repetition pattern of one layer.

    Parameters
    ----------
    dims : GridDims
    layout : SubGridLayout
    kind : PatternKind or str
        ``"time"`` or ``"frequency"``.
    n_per_rb : int
        REs per RB in each view.
    layer : int
        Layer the pattern belongs to (the base geometry does not depend on it;
        use :func:`shift_pattern` for the other layers).
    """
    kind = PatternKind(kind)
    if n_per_rb < 1:
        raise PatternInfeasibleError("n_per_rb must be positive")
    if 2 * n_per_rb > RB_SUBCARRIERS * dims.n_symbols:
        raise PatternInfeasibleError(
            f"2 x {n_per_rb} pattern REs exceed the RB capacity of "
            f"{RB_SUBCARRIERS * dims.n_symbols}"
        )
    if layout.n_rb != dims.n_rb:
        raise ConfigurationError("sub-grid layout and grid disagree on n_rb")
    if kind is PatternKind.TIME:
        bs, bd = _time_base(n_per_rb, dims.n_symbols)
    else:
        bs, bd = _frequency_base(n_per_rb, dims.n_symbols)
    src, dst = _expand(bs, bd, dims.n_rb, dims.n_symbols, layout.n_bsg)
    return CcaPattern(layer, kind, n_per_rb, dims.n_rb, dims.n_symbols, layout.n_bsg,
                      bs, bd, src, dst)


def _default_step(p):
    if p.kind is PatternKind.TIME:
        return math.ceil(p.n_per_rb / RB_SUBCARRIERS)
    return 2


def shift_pattern(p, layer, offset=None):
    """Cyclically shift ``p`` to serve as the pattern of ``layer``.

    Time-repetition patterns move along the symbol axis, frequency-repetition
    patterns along the subcarrier axis (within the RB, so the per-RB symmetry
    is kept). The default offset moves one view-width per layer step.
    Raises :class:`PatternInfeasibleError` if the result overlaps ``p`` while
    belonging to a different layer.
    """
    if offset is None:
        offset = (layer - p.layer) * _default_step(p)
    bs = p.base_source.copy()
    bd = p.base_dest.copy()
    if p.kind is PatternKind.TIME:
        bs[:, 1] = (bs[:, 1] + offset) % p.n_symbols
        bd[:, 1] = (bd[:, 1] + offset) % p.n_symbols
    else:
        bs[:, 0] = (bs[:, 0] + offset) % RB_SUBCARRIERS
        bd[:, 0] = (bd[:, 0] + offset) % RB_SUBCARRIERS
    src, dst = _expand(bs, bd, p.n_rb, p.n_symbols, p.n_bsg)
    q = CcaPattern(layer, p.kind, p.n_per_rb, p.n_rb, p.n_symbols, p.n_bsg, bs, bd, src, dst)
    if layer != p.layer and p.re_set() & q.re_set():
        raise PatternInfeasibleError(
            f"shifting layer {p.layer}'s pattern by {offset} collides with it"
        )
    return q


def check_disjoint(patterns):
    """Raise if any two layers' patterns share an RE."""
    for a in range(len(patterns)):
        for b in range(a + 1, len(patterns)):
            if patterns[a].re_set() & patterns[b].re_set():
                raise PatternInfeasibleError(
                    f"patterns of layers {patterns[a].layer} and {patterns[b].layer} overlap"
                )


def make_layer_patterns(dims, layout, kind, n_per_rb):
    """Pattern of layer 0 plus shifted copies for layers ``1..L-1``."""
    base = make_pattern(dims, layout, kind, n_per_rb, layer=0)
    patterns = [base] + [shift_pattern(base, layer) for layer in range(1, dims.n_layers)]
    check_disjoint(patterns)
    return patterns


@dataclass(frozen=True, eq=False)
class VicinityMap:
    """Which combiner (view 1 or 2) equalizes each RE of one layer.

    ``assignment`` has the grid shape; 1 or 2 marks a vicinity RE, 0 marks the
    layer's own source and destination REs (handled separately by the
    receiver).
    """

    layer: int
    assignment: np.ndarray
    n_view1: np.ndarray
    n_view2: np.ndarray


def vicinity_partition(dims, layout, pattern, chunk=4096):
    """Assign every non-pattern RE to the view whose REs are nearest.

    Distance is Euclidean in ``(subcarrier, symbol)`` index space, restricted
    to the RE's own sub-grid. Ties go to view 1.
    """
    assignment = np.zeros(dims.shape, dtype=np.int8)
    n1 = np.zeros(layout.subgrid_count, dtype=np.int64)
    n2 = np.zeros_like(n1)
    for j in range(layout.subgrid_count):
        sl = layout.subcarrier_slice(j)
        ms, ns = re_position(pattern.source[j], dims.n_rb)
        md, nd = re_position(pattern.dest[j], dims.n_rb)
        block = np.ones((sl.stop - sl.start, dims.n_symbols), dtype=bool)
        block[ms - sl.start, ns] = False
        block[md - sl.start, nd] = False
        mm, nn = np.nonzero(block)
        mm = mm + sl.start
        view = np.empty(mm.size, dtype=np.int8)
        for lo in range(0, mm.size, chunk):
            a, b = mm[lo:lo + chunk, None], nn[lo:lo + chunk, None]
            d1 = ((a - ms[None, :]) ** 2 + (b - ns[None, :]) ** 2).min(axis=1)
            d2 = ((a - md[None, :]) ** 2 + (b - nd[None, :]) ** 2).min(axis=1)
            view[lo:lo + chunk] = np.where(d1 <= d2, 1, 2)
        assignment[mm, nn] = view
        n1[j] = int(np.count_nonzero(view == 1))
        n2[j] = int(np.count_nonzero(view == 2))
    return VicinityMap(pattern.layer, assignment, n1, n2)


@dataclass(frozen=True)
class CoherenceBlock:
    bandwidth_hz: float
    time_s: float
    subcarriers: float
    symbols: float


def coherence_block(scs_hz, delay_spread_s, speed_m_s, carrier_hz):
    """Rule-of-thumb time-bandwidth coherence block.

    ``B_c = 1 / (5 DS)`` and ``T_c = 0.423 / f_D`` with
    ``f_D = speed * carrier / c``. Counts are ``floor(B_c / scs)`` subcarriers
    and ``floor(T_c * scs)`` symbols (symbol time ``1/scs``, no cyclic
    prefix). Zero delay spread or zero speed give an infinite extent.
    """
    if scs_hz <= 0 or carrier_hz <= 0 or delay_spread_s < 0 or speed_m_s < 0:
        raise ConfigurationError("coherence parameters must be positive")
    bc = math.inf if delay_spread_s == 0 else 1.0 / (5.0 * delay_spread_s)
    f_d = speed_m_s * carrier_hz / SPEED_OF_LIGHT
    tc = math.inf if f_d == 0 else 0.423 / f_d
    n_sc = math.inf if math.isinf(bc) else float(math.floor(bc / scs_hz))
    n_sym = math.inf if math.isinf(tc) else float(math.floor(tc * scs_hz))
    return CoherenceBlock(bc, tc, n_sc, n_sym)


def select_pattern_kind(scs_hz, delay_spread_s, speed_m_s, carrier_hz, n_symbols=14):
    """Pick the repetition orientation whose repetition axis is more coherent.

    Time repetition separates the two copies along the slot, so it wants
    ``T_c`` to cover ``n_symbols``; frequency repetition separates them inside
    one RB and wants ``B_c`` to cover 12 subcarriers. The axis with the larger
    coherence-to-span ratio wins; exact ties go to time repetition.
    """
    blk = coherence_block(scs_hz, delay_spread_s, speed_m_s, carrier_hz)
    time_slack = blk.symbols / n_symbols
    freq_slack = blk.subcarriers / RB_SUBCARRIERS
    if freq_slack > time_slack:
        return PatternKind.FREQUENCY
    return PatternKind.TIME


def export_patterns(patterns):
    """Serialise patterns to the line format used by the ``pattern`` command.

    One ``layer subgrid role index`` line per RE, ordered by layer, sub-grid,
    role (``S`` before ``D``) and copy position; source copy positions are in
    ascending index order, so the ``S`` lines are sorted and the ``D`` lines
    follow the copy alignment.
    """
    if not patterns:
        return ""
    p0 = patterns[0]
    lines = [
        f"# pilotfree-pattern v1 kind={p0.kind.value} n_per_rb={p0.n_per_rb} "
        f"n_bsg={p0.n_bsg} n_rb={p0.n_rb} n_symbols={p0.n_symbols}"
    ]
    for p in sorted(patterns, key=lambda q: q.layer):
        for j in range(p.subgrid_count):
            lines.extend(f"{p.layer} {j} S {i}" for i in p.source[j])
            lines.extend(f"{p.layer} {j} D {i}" for i in p.dest[j])
    return "\n".join(lines) + "\n"


def import_patterns(text):
    """Parse the output of :func:`export_patterns` back into patterns."""
    header = None
    rows = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "pilotfree-pattern" in line:
                header = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
            continue
        parts = line.split()
        if len(parts) != 4 or parts[2] not in ("S", "D"):
            raise ConfigurationError(f"line {lineno}: expected 'layer subgrid S|D index'")
        layer, j, role, idx = int(parts[0]), int(parts[1]), parts[2], int(parts[3])
        rows.setdefault(layer, {}).setdefault(j, {"S": [], "D": []})[role].append(idx)
    if header is None:
        raise ConfigurationError("missing pilotfree-pattern header line")
    kind = PatternKind(header["kind"])
    n_per_rb, n_bsg = int(header["n_per_rb"]), int(header["n_bsg"])
    n_rb, n_symbols = int(header["n_rb"]), int(header["n_symbols"])
    out = []
    for layer in sorted(rows):
        sub = rows[layer]
        src = np.array([sub[j]["S"] for j in sorted(sub)], dtype=np.int64)
        dst = np.array([sub[j]["D"] for j in sorted(sub)], dtype=np.int64)
        if src.shape != dst.shape:
            raise ConfigurationError(f"layer {layer}: source and destination sizes differ")
        ms, ns = re_position(src[0], n_rb)
        md, nd = re_position(dst[0], n_rb)
        first_rb = ms < RB_SUBCARRIERS
        bs = np.stack([ms[first_rb], ns[first_rb]], axis=1)
        bd = np.stack([md[first_rb], nd[first_rb]], axis=1)
        out.append(CcaPattern(layer, kind, n_per_rb, n_rb, n_symbols, n_bsg, bs, bd, src, dst))
    return out
