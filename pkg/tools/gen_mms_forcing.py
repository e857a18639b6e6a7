"""Generate ``src/keps/_mms_forcing.py`` from the manufactured solution.

Run from the repository root::

    python3 tools/gen_mms_forcing.py

The manufactured fields live on the unit square and satisfy the wall
conditions (u = 0, h = 0, zero normal derivative of k and eps).  The
forcing is what each equation of the linearised system leaves over when
the known triple equals the manufactured (u, k, eps); the enthalpy
forcing uses the transport-equation form of the pressure time derivative,
which is what the discrete step evaluates.
"""

from pathlib import Path

import sympy as sp
from sympy.printing.numpy import NumPyPrinter

x, y, t = sp.symbols("x y t", real=True)
mu, mu_t, mu_e, c1, c2, gamma = sp.symbols("mu mu_t mu_e c1 c2 gamma", positive=True)
PI = sp.pi

a = 1 + sp.Rational(1, 2) * sp.sin(3 * t)
RHO = 1 + sp.Rational(1, 5) * sp.cos(PI * y) * a
UX = sp.Rational(1, 2) * sp.sin(PI * x) * sp.sin(PI * y) * a
UY = sp.Integer(0)
H = sp.Rational(1, 2) * sp.sin(PI * x) * sp.sin(PI * y) * a
K = sp.Rational(3, 2) + sp.Rational(3, 10) * sp.cos(PI * x) * sp.cos(PI * y) * a
EPS = 1 + sp.Rational(1, 4) * sp.cos(2 * PI * x) * sp.cos(PI * y) * a

X = (x, y)
U = (UX, UY)


def grad(f):
    return [sp.diff(f, v) for v in X]


def div(w):
    return sum(sp.diff(w[i], X[i]) for i in range(2))


def lap(f):
    return sum(sp.diff(f, v, 2) for v in X)


def convect(w, f):
    return sum(w[i] * sp.diff(f, X[i]) for i in range(2))


def strain(w, visc):
    jac = [[sp.diff(w[i], X[j]) for j in range(2)] for i in range(2)]
    total = sum((jac[i][j] + jac[j][i]) * jac[i][j] for i in range(2) for j in range(2))
    return visc * total, div(w)


def forcing():
    p = RHO**gamma
    f_rho = sp.diff(RHO, t) + div([RHO * U[i] for i in range(2)])
    f_u = []
    for i in range(2):
        lhs = (
            RHO * sp.diff(U[i], t)
            + RHO * convect(U, U[i])
            - lap(U[i])
            - sp.diff(div(U), X[i])
            + sp.diff(p, X[i])
        )
        rhs = -sp.Rational(2, 3) * sp.diff(RHO * K, X[i])
        f_u.append(lhs - rhs)
    p_t = -gamma * RHO ** (gamma - 1) * div([RHO * U[i] for i in range(2)])
    s_strain, d = strain(U, mu)
    grad_rho = grad(RHO)
    s_k = s_strain - sp.Rational(2, 3) * mu * d**2 + mu_t * gamma * RHO ** (gamma - 3) * (
        grad_rho[0] ** 2 + grad_rho[1] ** 2
    )
    f_h = RHO * sp.diff(H, t) + RHO * convect(U, H) - lap(H) - (p_t + convect(U, p) + s_k)
    g_strain, d = strain(U, mu_e)
    g_prod = g_strain - sp.Rational(2, 3) * (RHO * K + mu_e * d) * d
    f_k = RHO * sp.diff(K, t) + RHO * convect(U, K) - lap(K) - (g_prod - RHO * EPS)
    f_eps = RHO * sp.diff(EPS, t) + RHO * convect(U, EPS) - lap(EPS) - (
        c1 * g_prod * EPS / K - c2 * RHO * EPS**2 / K
    )
    return {"rho": f_rho, "u0": f_u[0], "u1": f_u[1], "h": f_h, "k": f_k, "eps": f_eps}


def emit(name, expr, printer):
    subs, (reduced,) = sp.cse([expr], symbols=sp.numbered_symbols("w"))
    lines = [f"def {name}(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):"]
    for sym, sub in subs:
        lines.append(f"    {sym} = {printer.doprint(sub)}")
    lines.append(f"    return {printer.doprint(reduced)} + 0.0 * x * y")
    return "\n".join(lines)


def main():
    printer = NumPyPrinter({"fully_qualified_modules": True})
    exact = {"rho": RHO, "u0": UX, "u1": UY, "h": H, "k": K, "eps": EPS}
    parts = [
        '"""Manufactured solution and its forcing (generated by tools/gen_mms_forcing.py; do not edit)."""',
        "",
        "import numpy",
        "",
    ]
    for name, expr in exact.items():
        parts += ["", emit(f"exact_{name}", expr, printer).replace(
            "(x, y, t, mu, mu_t, mu_e, c1, c2, gamma)", "(x, y, t)"), ""]
    for name, expr in forcing().items():
        parts += ["", emit(f"forcing_{name}", expr, printer), ""]
    out = Path(__file__).resolve().parents[1] / "src" / "keps" / "_mms_forcing.py"
    out.write_text("\n".join(parts).rstrip() + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
