"""Brute-force reference for the dispatcher decision, written independently
of lilac.dtd: enumerate every node, sort by the tie-break key, take the first."""

C_P2P, C_URB, C_AB = 1, 2, 3


def step_cost(i, origin, owns_all):
    local = i == origin
    if local and owns_all:
        return C_URB
    if local:
        return C_AB + 2 * C_URB
    if owns_all:
        return C_P2P + C_URB
    return C_P2P + C_AB + 2 * C_URB


def freq_cost(i, S, F):
    return sum(F[j].get(x, 0.0) for x in S for j in range(len(F)) if j != i)


def brute_decide(policy, S, F, L, cpu, max_cpu, origin):
    n = len(cpu)
    if policy == "st":
        cost = [step_cost(i, origin, all(L[i][x] for x in S)) for i in range(n)]
    else:
        cost = [freq_cost(i, S, F) for i in range(n)]
    candidates = sorted((cost[i], 0 if i == origin else 1, i) for i in range(n) if cpu[i] < max_cpu)
    return candidates[0][2] if candidates else origin
