"""Smoke test for the hardedge extension module.

Build first: pip install --no-build-isolation ./crates/hardedge-py
"""
import math

import hardedge as he


def main():
    # Bessel J_0 at its first zero
    assert abs(he.bessel_j(0.0, 2.404825557695773)) < 1e-12

    # Christoffel-Darboux trace equals the degree
    g = he.Grid.uniform(-1.0, 1.0, 8, 8)
    k = he.KernelMatrix.discretize("jacobi_cd_s", 0.0, g, 4)
    assert abs(k.trace() - 4.0) < 1e-8, k.trace()
    ev = k.eigenvalues()
    assert max(ev) < 1.0 + 1e-8

    batch = k.sample(50, seed=3)
    assert len(batch) == 50
    assert all(len(c) == 4 for c in batch.configurations())

    # hard-edge gap for s = 0 is exp(-t/4)
    hg = he.Grid.hard_edge(60.0)
    j = he.KernelMatrix.discretize("bessel_tilde", 0.0, hg)
    gap = j.gap_probability(0.0, 1.0)
    assert abs(gap - math.exp(-0.25)) < 1e-2, gap

    # damped projection for s = -1 has a finite number of particles
    p = he.KernelMatrix.damped_projection(-1.0, 1.0, hg)
    assert abs(p.idempotency_defect()) < 1e-6
    s = he.damped_sample(-1.0, 1.0, hg, 100, 7)
    assert all(math.isfinite(sum(c)) for c in s.configurations())

    # Hellinger affinity and its constant
    assert he.hellinger(50, 0.5, 0.5) == 1.0
    c = he.fit_hellinger_constant(0.0, 1.0)
    assert abs(c - 0.125) < 0.01, c

    try:
        he.jacobi_poly(2, -2.0, 0.0, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("hardedge", he.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
