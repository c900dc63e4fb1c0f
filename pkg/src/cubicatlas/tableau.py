"""Tableaux of puzzle pieces along orbits, the two structural rules, children and
finite-depth recurrence verdicts."""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import evaluate
from .errors import OnGraph, TableauRuleViolation
from .puzzle import build_puzzle, image_labels, labels_nested


@dataclass
class Tableau:
    base: complex
    depth: int
    width: int
    ids: np.ndarray  # ids[n, l] = id of the depth-n piece containing f^l(base)
    critical: np.ndarray  # critical[n, l]: that piece contains -c

    def is_critical(self, n, l):
        return bool(self.critical[n, l])


def tableau_build(param, graph, z, depth, width, check=True):
    """Tableau of z to depth D and width W; OnGraph if an orbit point touches an arc."""
    orbit = [complex(z)]
    for _ in range(width):
        orbit.append(evaluate(param, orbit[-1]))
    ids = np.empty((depth + 1, width + 1), dtype=np.int64)
    crit = np.empty((depth + 1, width + 1), dtype=bool)
    for n in range(depth + 1):
        pz = build_puzzle(graph, n)
        cstar = pz.locate(-param.c).id
        for l, w in enumerate(orbit):
            ids[n, l] = pz.locate(w).id
            crit[n, l] = ids[n, l] == cstar
    tab = Tableau(complex(z), depth, width, ids, crit)
    if check:
        check_coherence(graph, tab)
    return tab


def check_coherence(graph, tab):
    """Vertical label containment and horizontal label dynamics on every cell."""
    for n in range(tab.depth + 1):
        pz = build_puzzle(graph, n)
        deeper = build_puzzle(graph, n + 1) if n < tab.depth else None
        for l in range(tab.width + 1):
            P = pz.piece(tab.ids[n, l])
            if deeper is not None:
                Q = deeper.piece(tab.ids[n + 1, l])
                if not labels_nested(Q, P, pz.ray_universe):
                    raise TableauRuleViolation(f"P[{n + 1},{l}] is not inside P[{n},{l}]")
                if l < tab.width:
                    img = pz.piece(tab.ids[n, l + 1])
                    if image_labels(graph, Q.labels) != img.labels:
                        raise TableauRuleViolation(f"f(P[{n + 1},{l}]) != P[{n},{l + 1}]")


def shifted(tab, j):
    """Tableau of f^j(base): drop the first j columns."""
    return Tableau(tab.base, tab.depth, tab.width - j, tab.ids[:, j:], tab.critical[:, j:])


def check_rule_r1(tab, other):
    """If P[n,l](z) = P[n](z') then P[i,l+j](z) = P[i,j](z') for i + j <= n.

    Returns the number of hypothesis matches checked; raises on violation.
    """
    checked = 0
    D = tab.depth
    for n in range(D + 1):
        for l in range(tab.width + 1):
            if tab.ids[n, l] != other.ids[n, 0]:
                continue
            checked += 1
            for i in range(n + 1):
                for j in range(n - i + 1):
                    if l + j > tab.width or j > other.width:
                        continue
                    if tab.ids[i, l + j] != other.ids[i, j]:
                        raise TableauRuleViolation(
                            f"R1: P[{n},{l}] matches but P[{i},{l + j}] differs")
    return checked


def check_rule_r2(crit_tab, tab):
    """Second rule with the single free critical point c* = c' = -c.

    Hypotheses: (n+1-l, l) critical for c* with n > l > 0, (n-i, i) non-critical
    for 0 < i < l; P[n,m](z) = P[n](c*) and P[n+1,m](z) != P[n+1](c*), m > 0.
    Conclusion: P[n+1-l, m+l](z) != P[n+1-l](c*).  Returns matches checked.
    """
    checked = 0
    D = min(crit_tab.depth, tab.depth)
    for n in range(2, D):
        for l in range(1, n):
            if n + 1 - l > D or l > crit_tab.width:
                continue
            if not crit_tab.critical[n + 1 - l, l]:
                continue
            if any(crit_tab.critical[n - i, i] for i in range(1, l)):
                continue
            for m in range(1, tab.width - l + 1):
                a = tab.ids[n, m] == crit_tab.ids[n, 0]
                b = tab.ids[n + 1, m] != crit_tab.ids[n + 1, 0]
                if not (a and b):
                    continue
                checked += 1
                if tab.ids[n + 1 - l, m + l] == crit_tab.ids[n + 1 - l, 0]:
                    raise TableauRuleViolation(f"R2 fails at n={n}, l={l}, m={m}")
    return checked


def rule_sample_points(param):
    """Base points off the critical orbit whose orbits meet it: 2c (the co-critical
    point of -c) and the preimages of -c."""
    c = param.c
    roots = np.roots([1, 0, -3 * c * c, param.a + c])
    return [2 * c] + [complex(r) for r in roots]


def check_rules(param, graph, depth, width):
    """Build the critical tableau and sample tableaux; check both rules.

    Returns (r1 matches, r2 matches, tableaux).
    """
    crit = tableau_build(param, graph, -param.c, depth, width)
    tabs = [crit]
    for z in rule_sample_points(param):
        try:
            tabs.append(tableau_build(param, graph, z, depth, width))
        except OnGraph:
            continue
    r1 = r2 = 0
    for t in tabs:
        for j in range(0, crit.width - depth + 1):
            r1 += check_rule_r1(t, shifted(crit, j))
        r2 += check_rule_r2(crit, t)
    return r1, r2, tabs


def children(crit_tab, n, budget):
    """k <= budget for which P[n+k](c*) is a child of P[n](c*): (n, k) critical and
    the unrolled pieces (n+k-i, i), 0 < i < k, carry no critical mark."""
    out = []
    for k in range(1, budget + 1):
        if n + k > crit_tab.depth or k > crit_tab.width:
            break
        if not crit_tab.critical[n, k]:
            continue
        if any(crit_tab.critical[n + k - i, i] for i in range(1, k)):
            continue
        out.append((k, int(crit_tab.ids[n + k, 0])))
    return out


@dataclass(frozen=True)
class RecurrenceVerdict:
    kind: str
    depth: int
    budget: int
    note: str = field(default="verdict may change at larger depth")


def recurrence_classify(crit_tab, depth=None, budget=None):
    """Finite-depth verdict from the critical tableau.

    NonCritical: a row n0 with no critical mark in columns 1..J.  Periodic:
    some column k has a critical mark in every row (the critical piece returns
    to itself at all depths).  Otherwise the child counts decide between
    reluctant (some piece with two or more children) and persistent recurrence.
    """
    D = crit_tab.depth if depth is None else depth
    J = crit_tab.width if budget is None else budget
    crit = crit_tab.critical[: D + 1, 1: J + 1]
    for n0 in range(D + 1):
        if not crit[n0].any():
            return RecurrenceVerdict("NonCritical", D, J)
    if crit.all(axis=0).any():
        return RecurrenceVerdict("Periodic", D, J)
    for n in range(D + 1):
        if len(children(crit_tab, n, D - n)) >= 2:
            return RecurrenceVerdict("ReluctantlyRecurrent", D, J)
    return RecurrenceVerdict("PersistentlyRecurrent", D, J)
