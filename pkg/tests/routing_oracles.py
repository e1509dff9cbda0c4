"""Independent shortest-path oracles: exhaustive simple-path enumeration and Bellman-Ford."""
import math
import random

from simdrive.dsl.routing import RouteGraph


def node(i: int) -> str:
    return f"1.1.1.{i}"


def random_graph(rng: random.Random, n: int, density: float, integer: bool) -> RouteGraph:
    g = RouteGraph()
    for i in range(1, n + 1):
        g.add_node(node(i), (rng.uniform(0, 100), rng.uniform(0, 100)))
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            if a != b and rng.random() < density:
                w = rng.randint(1, 4) if integer else rng.uniform(0.1, 10.0)
                g.add_edge(node(a), node(b), w)
    return g


def all_simple_paths(g: RouteGraph, start: str, goal: str):
    stack = [(start, [start], 0.0)]
    while stack:
        u, path, cost = stack.pop()
        if u == goal:
            yield tuple(path), cost
            continue
        for v, w in g.edges[u].items():
            if v not in path:
                stack.append((v, path + [v], cost + w))


def enumerate_best(g: RouteGraph, start: str, goal: str):
    """Cheapest simple path; ties broken by the smallest predecessor, walking back from the goal."""
    best = None
    for path, cost in all_simple_paths(g, start, goal):
        key = (cost, [int(p.rsplit(".", 1)[1]) for p in reversed(path)])
        if best is None or key < best[0]:
            best = (key, path)
    if best is None:
        return None, math.inf
    return best[1], best[0][0]


def bellman_ford(g: RouteGraph, start: str) -> dict[str, float]:
    dist = {v: math.inf for v in g.nodes}
    dist[start] = 0.0
    edges = g.edge_list()
    for _ in range(len(g.nodes) - 1):
        changed = False
        for a, b, w in edges:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
                changed = True
        if not changed:
            break
    return dist
