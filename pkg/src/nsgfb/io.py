"""Readers and writers for banks, signals, labels and frequency responses."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import ParseError
from .filterbank import (AnalysisBank, SynthesisBank, bezout_polynomials, lift,
                         polynomial_analysis, spline_bezout_polynomials, spline_polynomials,
                         _bezout_bank)
from .graph import Graph

BANK_FORMAT = "nsgfb-bank"
PROVENANCES = ("bezout", "lifted-bezout", "least-squares")


@dataclass(frozen=True)
class BankSpec:
    """Graph-independent description of a filter bank.

    ``q0``/``q1`` are ``None`` for least-squares synthesis, which is not a
    polynomial in the Laplacian.
    """

    p0: Polynomial
    p1: Polynomial
    provenance: str
    q0: Polynomial | None = None
    q1: Polynomial | None = None
    order: int | None = None
    name: str = "custom"

    @classmethod
    def spline(cls, n: int, provenance: str = "lifted-bezout") -> "BankSpec":
        p0, p1 = spline_polynomials(n)
        q0 = q1 = None
        if provenance != "least-squares":
            q0, q1 = spline_bezout_polynomials(n)
        return cls(p0, p1, provenance, q0, q1, order=n, name=f"spline-{n}")

    @classmethod
    def polynomial(cls, p0, p1, provenance: str = "lifted-bezout", residual=None) -> "BankSpec":
        p0, p1 = Polynomial(np.asarray(p0, float)), Polynomial(np.asarray(p1, float))
        q0 = q1 = None
        if provenance != "least-squares":
            q0, q1 = bezout_polynomials(p0, p1, residual=residual)
        return cls(p0, p1, provenance, q0, q1)

    def analysis(self, g: Graph) -> AnalysisBank:
        return polynomial_analysis(g, self.p0, self.p1, name=self.name)

    def synthesis(self, g: Graph, h: AnalysisBank | None = None) -> SynthesisBank:
        """Materialized Bezout (optionally lifted) synthesis bank."""
        if self.provenance == "least-squares":
            raise ValueError("least-squares synthesis is not polynomial; see synthesis_ls")
        bank = _bezout_bank(g, self.q0, self.q1)
        if self.provenance == "lifted-bezout":
            bank = lift(bank, h if h is not None else self.analysis(g))
        return bank

    def to_dict(self) -> dict:
        out = {
            "format": BANK_FORMAT,
            "version": 1,
            "name": self.name,
            "order": self.order,
            "analysis": {"p0": self.p0.coef.tolist(), "p1": self.p1.coef.tolist()},
            "synthesis": {"provenance": self.provenance},
        }
        if self.q0 is not None:
            out["synthesis"]["q0"] = self.q0.coef.tolist()
            out["synthesis"]["q1"] = self.q1.coef.tolist()
        return out


def write_bank(spec: BankSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def read_bank(path) -> BankSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if data.get("format") != BANK_FORMAT:
        raise ParseError(f"{path}: not a filter bank file")
    try:
        ana, syn = data["analysis"], data["synthesis"]
        prov = syn["provenance"]
        p0, p1 = Polynomial(ana["p0"]), Polynomial(ana["p1"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: missing field {exc}") from exc
    if prov not in PROVENANCES:
        raise ParseError(f"{path}: unknown provenance {prov!r}")
    q0 = q1 = None
    if prov != "least-squares":
        if "q0" in syn:
            q0, q1 = Polynomial(syn["q0"]), Polynomial(syn["q1"])
        else:
            q0, q1 = bezout_polynomials(p0, p1)
    return BankSpec(p0, p1, prov, q0, q1, order=data.get("order"),
                    name=data.get("name", "custom"))


# --- vectors -------------------------------------------------------------

def _rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def read_signal(path) -> np.ndarray:
    """Read ``vertex,value`` rows (a header line is allowed) or one value per line."""
    pairs, plain = {}, []
    for lineno, row in _rows(path):
        try:
            if len(row) == 1:
                plain.append(float(row[0]))
            else:
                pairs[int(row[0])] = float(row[1])
        except ValueError:
            if lineno == 1:
                continue
            raise ParseError(f"{path}:{lineno}: cannot parse {row!r}") from None
    if plain and pairs:
        raise ParseError(f"{path}: mixed one- and two-column rows")
    if plain:
        return np.array(plain)
    n = len(pairs)
    if sorted(pairs) != list(range(n)):
        raise ParseError(f"{path}: vertex ids must be 0..{n - 1}")
    return np.array([pairs[i] for i in range(n)])


def write_signal(x, path, name: str = "value") -> None:
    x = np.asarray(x, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", name])
        for i, v in enumerate(x):
            w.writerow([i, repr(float(v))])


def read_labels(path) -> np.ndarray:
    """Block labels from ``vertex,label`` rows."""
    pairs = {}
    for lineno, row in _rows(path):
        if len(row) < 2:
            raise ParseError(f"{path}:{lineno}: expected 'vertex,label'")
        try:
            pairs[int(row[0])] = row[1]
        except ValueError:
            if lineno == 1:
                continue
            raise ParseError(f"{path}:{lineno}: bad vertex id {row[0]!r}") from None
    n = len(pairs)
    if sorted(pairs) != list(range(n)):
        raise ParseError(f"{path}: vertex ids must be 0..{n - 1}")
    raw = [pairs[i] for i in range(n)]
    try:
        return np.array([int(v) for v in raw])
    except ValueError:
        return np.array(raw)


def write_frequency_response(path, table: dict) -> None:
    """CSV ``lambda,P0,P1,Q0,Q1`` (columns present in ``table``)."""
    cols = [c for c in ("lambda", "P0", "P1", "Q0", "Q1") if c in table]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])
