"""Flat-file formats.

reports CSV   ``ranker,rank_position,ranked_node``; position 1 is the lowest,
              ``?`` marks a neighbour the ranker could not place.
network CSV   ``node_a,node_b`` per edge; a line with a single field declares
              an isolated node.

Both accept an optional header row and ``#`` comment lines.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from .ranking import Report, SocialNetwork, ValidationError, infer_network

REPORT_HEADER = ("ranker", "rank_position", "ranked_node")
NETWORK_HEADER = ("node_a", "node_b")


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or not any(row) or row[0].startswith("#"):
                continue
            yield lineno, row


def read_reports(path) -> list[Report]:
    positions: dict[str, dict[int, tuple[str, int]]] = defaultdict(dict)
    unknown: dict[str, set[str]] = defaultdict(set)
    first_line: dict[str, int] = {}
    for lineno, row in _rows(path):
        if tuple(c.lower() for c in row) == REPORT_HEADER:
            continue
        if len(row) != 3:
            raise ParseError(path, lineno, f"expected 3 fields (ranker,rank_position,ranked_node), got {len(row)}")
        ranker, pos, node = row
        if not ranker or not node:
            raise ParseError(path, lineno, "empty node id")
        first_line.setdefault(ranker, lineno)
        if pos == "?":
            unknown[ranker].add(node)
            continue
        try:
            k = int(pos)
        except ValueError:
            raise ParseError(path, lineno, f"rank_position must be an integer or '?', got {pos!r}") from None
        if k < 1:
            raise ParseError(path, lineno, f"rank_position must be >= 1, got {k}")
        if k in positions[ranker]:
            raise ParseError(path, lineno, f"ranker {ranker!r} uses position {k} twice (ties are not allowed)")
        positions[ranker][k] = (node, lineno)

    reports = []
    for ranker in sorted(first_line):
        pos = positions.get(ranker, {})
        ordered = sorted(pos)
        if ordered != list(range(1, len(ordered) + 1)):
            raise ParseError(path, first_line[ranker], f"ranker {ranker!r} positions are not 1..{len(ordered)}")
        try:
            reports.append(Report(ranker, tuple(pos[k][0] for k in ordered), frozenset(unknown.get(ranker, ()))))
        except ValidationError as err:
            line = pos[ordered[0]][1] if ordered else first_line[ranker]
            raise ParseError(path, line, str(err)) from err
    return reports


def write_reports(reports: Iterable[Report], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for rep in sorted(reports, key=lambda r: r.ranker):
            for k, node in enumerate(rep.ranking, start=1):
                w.writerow((rep.ranker, k, node))
            for node in sorted(rep.unknown):
                w.writerow((rep.ranker, "?", node))


def read_network(path) -> SocialNetwork:
    edges, nodes = [], []
    for lineno, row in _rows(path):
        if tuple(c.lower() for c in row) == NETWORK_HEADER:
            continue
        row = [c for c in row if c]
        if len(row) == 1:
            nodes.append(row[0])
        elif len(row) == 2:
            if row[0] == row[1]:
                raise ParseError(path, lineno, f"self-loop on node {row[0]!r}")
            edges.append((row[0], row[1]))
        else:
            raise ParseError(path, lineno, f"expected 1 or 2 fields, got {len(row)}")
    return SocialNetwork.from_edges(edges, nodes=nodes)


def write_network(network: SocialNetwork, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NETWORK_HEADER)
        for a, b in network.edges:
            w.writerow((a, b))
        for n in network.nodes:
            if not network.neighbors(n):
                w.writerow((n,))


def load_inputs(reports_path, network_path=None) -> tuple[list[Report], SocialNetwork]:
    """Reports plus their network; without a network file, the ranking relations are the network."""
    reports = read_reports(reports_path)
    if network_path is None:
        return reports, infer_network(reports)
    return reports, read_network(network_path)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")
