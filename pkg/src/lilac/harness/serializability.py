"""Serialization-graph oracle for committed read-write transactions.

A history maps each transaction id to ``(reads, writes)`` where ``reads`` maps
key -> id of the transaction whose write was read (0 for the initial value)
and ``writes`` lists the written keys.  The per-key version order comes from
the order in which a replica installed the writes.
"""
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

INITIAL = 0


@dataclass
class Verdict:
    serializable: bool
    cycle: List[int] = field(default_factory=list)
    edges: int = 0

    def __bool__(self):
        return self.serializable


def version_order(apply_log: Iterable[int], histories: Mapping[int, Tuple[Mapping, Sequence]]) -> Dict[Hashable, List[int]]:
    """Per-key writer order implied by a replica's apply order."""
    order: Dict[Hashable, List[int]] = {}
    for tx in apply_log:
        h = histories.get(tx)
        if h is None:
            continue
        for key in h[1]:
            order.setdefault(key, []).append(tx)
    return order


def build_graph(histories: Mapping[int, Tuple[Mapping, Sequence]],
                order: Mapping[Hashable, Sequence[int]]) -> Dict[int, Set[int]]:
    graph: Dict[int, Set[int]] = {tx: set() for tx in histories}
    position: Dict[Hashable, Dict[int, int]] = {}
    for key, writers in order.items():
        position[key] = {tx: i for i, tx in enumerate(writers)}
        for a, b in zip(writers, writers[1:]):             # ww
            if a != b:
                graph.setdefault(a, set()).add(b)
    for tx, (reads, _) in histories.items():
        for key, writer in reads.items():
            writers = order.get(key, ())
            if writer != INITIAL and writer != tx:            # wr
                graph.setdefault(writer, set()).add(tx)
            if writer == INITIAL:
                nxt = 0
            else:
                pos = position.get(key, {}).get(writer)
                if pos is None:
                    continue
                nxt = pos + 1
            if nxt < len(writers) and writers[nxt] != tx:     # rw
                graph[tx].add(writers[nxt])
    return graph


def find_cycle(graph: Mapping[int, Iterable[int]]) -> Optional[List[int]]:
    """Iterative DFS; returns one cycle as a list of nodes, or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color: Dict[int, int] = {}
    for root in sorted(graph):
        if color.get(root, WHITE) != WHITE:
            continue
        stack = [(root, iter(sorted(graph.get(root, ()))))]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                continue
            c = color.get(nxt, WHITE)
            if c == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(sorted(graph.get(nxt, ())))))
            elif c == GREY:
                path = [n for n, _ in stack]
                return path[path.index(nxt):]
    return None


def check_serializability(histories: Mapping[int, Tuple[Mapping, Sequence]],
                          order: Mapping[Hashable, Sequence[int]]) -> Verdict:
    graph = build_graph(histories, order)
    cycle = find_cycle(graph)
    n_edges = sum(len(v) for v in graph.values())
    if cycle is None:
        return Verdict(True, [], n_edges)
    return Verdict(False, cycle, n_edges)
