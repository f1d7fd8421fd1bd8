"""Observability Gramians and the constants derived from them.

For the free evolution u(t) = exp(it Lap) u0 the energy observed over a
region w and horizon T is the quadratic form <G u0, u0> with

    G_jk = m_jk * integral_0^T exp(i (lambda_j - lambda_k) t) dt,

where m_jk = <w phi_j, phi_k> is the region overlap matrix and the phase
integral is evaluated in closed form.  Observability at (region, T) means
G >= c Id; the observability constant K = 1/lambda_min(G) measures how
expensive the worst initial state is to see.  This demo computes K for
strips of growing width, compares the closed-form Gramian against time
quadrature, shows the full-region identity K = 1/T, and ends with the
dyadic-window constants on the octagon ball that probe the semiclassical
uniformity of observability.

Run:  python demos/03_observability_constants.py
"""

import numpy as np

from obslab import (RegionSpec, build_bolza, build_torus, eigenfunction_mass,
                    eigensolve, gramian, observability_constant,
                    rasterize_region, time_grid, windowed_constants)


def main():
    torus = build_torus(24)
    basis = eigensolve(torus, 50)
    T = 1.0

    print("=== strip width vs observability constant (torus, T=1) ===")
    print("  width   lambda_min        K")
    for width in (0.15, 0.2, 0.3, 0.5, 0.8):
        strip = rasterize_region(torus, RegionSpec.strip("x", 0.0, width))
        rep = observability_constant(gramian(basis, strip, T))
        print(f"  {width:5.2f}   {rep.lambda_min:10.4e}  {rep.K:9.2f}")
    print("  wider regions see more of every state: K decreases "
          "monotonically")

    print("\n=== full region: K = 1/T exactly ===")
    full = rasterize_region(torus, RegionSpec.full())
    for T_ in (0.5, 1.0, 2.0):
        rep = observability_constant(gramian(basis, full, T_))
        print(f"  T={T_:4.1f}: K={rep.K:.12f} (expect {1.0 / T_:.12f})")

    print("\n=== closed-form phase integrals vs time quadrature ===")
    strip = rasterize_region(torus, RegionSpec.strip("x", 0.0, 0.3))
    g_exact = gramian(basis, strip, T)
    grid = time_grid(0.0, T, 4096, kind="simpson")
    g_quad = gramian(basis, strip, T, method="quadrature", grid=grid)
    diff = np.abs(g_exact.matrix - g_quad.matrix).max()
    print(f"  max entry difference at 4096 Simpson steps: {diff:.2e}")

    print("\n=== dyadic-window constants on the octagon ball ===")
    mesh = build_bolza(4)
    b = eigensolve(mesh, 100)
    ball = rasterize_region(mesh, RegionSpec.ball((0.25, 0.15), 0.6))
    lines = windowed_constants(b, ball, T, range(2, 6))
    print("   k  support         n_modes   lambda_min        K_k")
    for line in lines:
        lo, hi = line["support"]
        print(f"  {line['k']:2d}  ({lo:4g}, {hi:4g})   {line['n_modes']:5d}"
              f"   {line['lambda_min']:11.4e}  {line['K']:9.1f}")
    vals = [line["K"] for line in lines]
    print(f"  spread max/min = {max(vals) / min(vals):.2f}: the constants "
          f"stay within one")
    print("  order of magnitude across five octaves, the truncated shadow "
          "of the")
    print("  semiclassical claim that observability on a negatively curved "
          "surface")
    print("  is uniform over frequency bands")

    # the windowed constants sit far above 1/(T * worst eigenfunction mass):
    # inside a band, near-degenerate frequency pairs (gap << 1/T) admit
    # superpositions that hide from the ball over the whole window
    floor, _ = eigenfunction_mass(b, ball)
    print(f"\n  worst single-eigenspace mass on the ball: {floor:.5f} "
          f"(-> K >= {1.0 / (T * floor):.0f}")
    print("  even for one mode; interference between clusters pushes the "
          "band constants higher)")


if __name__ == "__main__":
    main()
