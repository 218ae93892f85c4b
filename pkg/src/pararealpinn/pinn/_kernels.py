"""Fused elementwise kernels for the activation step of the jet pass."""

import numba

TANH, RELU = 0, 1


@numba.njit(cache=True)
def jet_forward(kind, Z, H, P1, P2):
    """H[0] must already hold the activation values."""
    n, w = P1.shape
    for i in range(n):
        for j in range(w):
            z = Z[0, i, j]
            if kind == TANH:
                u = H[0, i, j]
                p1 = 1.0 - u * u
                p2 = -2.0 * u * p1
            else:
                p1 = 1.0 if z > 0.0 else 0.0
                p2 = 0.0
            zs = Z[2, i, j]
            H[1, i, j] = p1 * Z[1, i, j]
            H[2, i, j] = p1 * zs
            H[3, i, j] = p1 * Z[3, i, j] + p2 * zs * zs
            P1[i, j] = p1
            P2[i, j] = p2


@numba.njit(cache=True)
def jet_backward(kind, GH, Z, H, P1, P2, G):
    n, w = P1.shape
    for i in range(n):
        for j in range(w):
            p1 = P1[i, j]
            p2 = P2[i, j]
            if kind == TANH:
                u = H[0, i, j]
                p3 = (6.0 * u * u - 2.0) * p1
            else:
                p3 = 0.0
            ga = GH[0, i, j]
            gat = GH[1, i, j]
            gas = GH[2, i, j]
            gass = GH[3, i, j]
            zt = Z[1, i, j]
            zs = Z[2, i, j]
            zss = Z[3, i, j]
            G[0, i, j] = ga * p1 + p2 * (gat * zt + gas * zs) + gass * (p3 * zs * zs + p2 * zss)
            G[1, i, j] = gat * p1
            G[2, i, j] = gas * p1 + 2.0 * gass * p2 * zs
            G[3, i, j] = gass * p1


def kind_code(activation) -> int:
    return TANH if activation.value == "tanh" else RELU
