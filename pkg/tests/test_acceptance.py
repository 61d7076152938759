"""End-to-end acceptance suite.

Each criterion prints a PASS/FAIL line with its measured figure, so
``pytest -s tests/test_acceptance.py`` doubles as a checklist.  Sizes and
tolerances are pinned here; nothing is deferred to later calibration.
"""

import math
import time

import numpy as np

from ellrad.geometry import level, make_geometry, phi_window
from ellrad.microlocal import (admissible_cos_bound_report,
                               admissible_cosh_bound_report,
                               bolker_certificate, conormal_residual,
                               conormal_search, positivity_narrow_angle,
                               positivity_wide_angle)
from ellrad.phantom import (GaussianBump, Phantom, canonical_phantoms,
                            rasterize)
from ellrad.transform import (QuadratureSpec, SinogramSpec, adjoint, forward,
                              image_inner, lambda_reconstruct,
                              normal_operator, parameter_inner)
from oracles import bilinear, forward_oracle

TWO_PI = 2.0 * math.pi
ALPHA_SET = (0.3, 0.6, 0.9, 1.2, 1.5)


def _report(name, ok, detail):
    print(f"\n[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def _smooth_test_sinogram(sino):
    L, s = sino.L, sino.s
    lmid = 0.5 * (L[0] + L[-1])
    sig = (L[-1] - L[0]) / 10.0
    vals = (1.0 + 0.5 * np.sin(s))[:, None] * np.exp(
        -0.5 * ((L[None, :] - lmid) / sig) ** 2)
    return sino.copy_with(vals)


def _dot_error(g, p, n_s, n_l, n):
    sino = forward(p, g, SinogramSpec(n_s, n_l))
    gs = _smooth_test_sinogram(sino)
    img = adjoint(gs, n=n)
    f = rasterize(p, n, g.b)
    lhs = parameter_inner(sino, gs)
    rhs = image_inner(f, img)
    nrf = math.sqrt(parameter_inner(sino, sino))
    ng = math.sqrt(parameter_inner(gs, gs))
    return abs(lhs - rhs) / (nrf * ng)


def test_01_adjoint_dot_product_and_runtime():
    g = make_geometry(math.pi / 4)
    p = canonical_phantoms(g)["gaussian_bump"]
    t0 = time.perf_counter()
    coarse = _dot_error(g, p, 180, 200, 128)
    fine = _dot_error(g, p, 360, 400, 256)
    elapsed = time.perf_counter() - t0
    ok = coarse <= 1e-2 and fine < coarse and elapsed <= 60.0
    _report("01 adjoint dot product", ok,
            f"coarse={coarse:.3e} (tol 1e-2), fine={fine:.3e}, "
            f"runtime={elapsed:.1f}s (limit 60s)")


def test_02_rotation_equivariance():
    g = make_geometry(math.pi / 4)
    ph = canonical_phantoms(g)
    spec = SinogramSpec(180, 200)

    sino = forward(ph["centered_disk"], g, spec)
    scale = np.abs(sino.values).max()
    const_dev = np.max(np.abs(sino.values - sino.values[0:1, :])) / scale

    base = forward(ph["offset_disk"], g, spec)
    rot = forward(ph["offset_disk"].rotated(base.ds), g, spec)
    shift_dev = np.max(np.abs(rot.values - np.roll(base.values, 1, axis=0))) \
        / np.abs(base.values).max()

    ok = const_dev <= 1e-8 and shift_dev <= 1e-10
    _report("02 rotation equivariance", ok,
            f"radial constancy={const_dev:.3e} (tol 1e-8), "
            f"one-cell shift={shift_dev:.3e} (tol 1e-10)")


def test_03_forward_oracle():
    g = make_geometry(math.pi / 4)
    p = canonical_phantoms(g)["offset_disk"]
    sino = forward(p, g, SinogramSpec(180, 200))
    rng = np.random.default_rng(3)
    scale = np.abs(sino.values).max()
    cand = np.argwhere(np.abs(sino.values) > 0.05 * scale)
    worst = 0.0
    for i, j in cand[rng.choice(len(cand), 25, replace=False)]:
        s, L = float(sino.s[i]), float(sino.L[j])
        oracle = forward_oracle(p, g, s, L, phi_window(g, L), tol=1e-11)
        worst = max(worst, abs(oracle - sino.values[i, j]) / abs(oracle))
    ok = worst <= 1e-6
    _report("03 forward vs adaptive oracle", ok,
            f"worst relative error over 25 cells = {worst:.3e} (tol 1e-6)")


def test_04_bolker_certificate():
    core = ("angular_derivative_nonvanishing",
            "coefficient_strictly_monotone", "numerator_positive")
    details = []
    ok = True
    for alpha in ALPHA_SET:
        cert = bolker_certificate(alpha, grid=512)
        got = {c.name: c for c in cert.checks}
        for name in core:
            c = got[name]
            ok = ok and c.passed and c.margin > 0.0
        wide = positivity_wide_angle(alpha)
        narrow = positivity_narrow_angle(alpha)
        ok = ok and ((wide.applicable and wide.holds)
                     or (narrow.applicable and narrow.holds))
        details.append(
            f"a={alpha}: dphi={got[core[0]].margin:.2e}, "
            f"mono={got[core[1]].margin:.2e}, N={got[core[2]].margin:.2e}")
    _report("04 certificate on 512x512 grids", ok, "; ".join(details))


def test_05_threshold_reproduction():
    thr = math.acos(1.0 / (2.0 * math.sqrt(2.0)))
    ok = abs(thr - 1.2094) <= 5e-4
    for b in np.linspace(0.05, 0.95, 181):
        disc = 1.0 - 8.0 * b * b
        ok = ok and ((disc < 0.0) == (b > 1.0 / (2.0 * math.sqrt(2.0))))
    _report("05 quadratic discriminant threshold", ok,
            f"arccos(1/(2*sqrt(2))) = {thr:.6f} (expected 1.2094 +- 0.0005); "
            f"sign flip at b = 1/(2*sqrt(2)) over 181 samples")


def test_06_admissibility_sweeps():
    ok = True
    details = []
    for alpha in ALPHA_SET:
        g = make_geometry(alpha)
        cos_rep = admissible_cos_bound_report(g, 512, 512)
        cosh_rep = admissible_cosh_bound_report(g, 512, 512)
        ident = abs(g.diameter_max - 2.0 * math.sqrt(1.0 + 3.0 * g.b ** 2))
        ok = ok and cos_rep.passed and cosh_rep.passed and ident <= 1e-12
        details.append(f"a={alpha}: {cos_rep.violations}+"
                       f"{cosh_rep.violations} violations, id={ident:.1e}")
    _report("06 admissibility sweeps", ok, "; ".join(details))


def test_07_conormal_surjectivity():
    g = make_geometry(0.9)
    rng = np.random.default_rng(7)
    worst = 0.0
    found = 0
    for _ in range(10):
        r = 0.8 * g.b * math.sqrt(rng.uniform())
        th = rng.uniform(0.0, TWO_PI)
        x = (r * math.cos(th), r * math.sin(th))
        for k in range(36):
            theta = k * TWO_PI / 36
            s0, L0, _ = conormal_search(g, x, theta)
            assert abs(L0 - float(level(g, x, s0))) == 0.0
            worst = max(worst, conormal_residual(g, x, theta, s0))
            found += 1
    ok = found == 360 and worst <= 1e-8
    _report("07 conormal direction search", ok,
            f"{found}/360 directions solved, worst residual {worst:.2e} "
            f"(tol 1e-8)")


def test_08_singularity_recovery_ridge():
    g = make_geometry(math.pi / 4)
    p = canonical_phantoms(g)["offset_disk"]
    disk = p.shapes[0]
    sino = forward(p, g, SinogramSpec(360, 400))
    lam = lambda_reconstruct(sino, n=256)
    cx, cy = disk.center
    r = disk.radius
    px = lam.pixel_size
    hits = 0
    for k in range(360):
        beta = k * TWO_PI / 360
        rr = np.linspace(r - 6 * px, r + 6 * px, 121)
        vals = np.abs(bilinear(lam, cx + rr * np.cos(beta),
                               cy + rr * np.sin(beta)))
        ridge = rr[np.argmax(vals)]
        if abs(ridge - r) <= 2.0 * px:
            hits += 1
    rate = hits / 360.0
    ok = rate >= 0.95
    _report("08 edge ridge localization", ok,
            f"{hits}/360 boundary angles within 2 px (need >= 95%)")


def test_09_smoothing_order_slope():
    # coarse check of the normal operator's one-order smoothing: the
    # radial spectral ratio should decay like 1/frequency over a middle
    # band (narrow centered bump, taper against periodization)
    g = make_geometry(0.9)
    p = Phantom((GaussianBump((0.0, 0.0), g.b / 24.0, 1.0),))
    n = 256
    img = normal_operator(p, g, SinogramSpec(360, 400), n,
                          quad=QuadratureSpec(panels=48))
    f = rasterize(p, n, g.b)

    X, Y = f.meshgrid()
    rr = np.sqrt(X * X + Y * Y)
    r0, r1 = 0.70 * g.b, 0.95 * g.b
    w = np.clip((r1 - rr) / (r1 - r0), 0.0, 1.0)
    w = 0.5 - 0.5 * np.cos(math.pi * w)

    spec_f = np.abs(np.fft.fft2(f.values))
    spec_n = np.abs(np.fft.fft2(img.values * w))
    k = np.fft.fftfreq(n, d=f.pixel_size)
    KX, KY = np.meshgrid(k, k, indexing="ij")
    kbox = np.rint(np.sqrt(KX ** 2 + KY ** 2) * 2.0 * g.b).astype(int)
    counts = np.bincount(kbox.ravel())
    prof_f = np.bincount(kbox.ravel(), weights=spec_f.ravel()) / counts
    prof_n = np.bincount(kbox.ravel(), weights=spec_n.ravel()) / counts

    band = np.arange(4, 25)
    ratio = prof_n[band] / prof_f[band]
    design = np.vstack([np.log(band), np.ones(band.size)]).T
    slope = np.linalg.lstsq(design, np.log(ratio), rcond=None)[0][0]
    ok = -1.3 <= slope <= -0.7
    _report("09 smoothing order (coarse)", ok,
            f"radial log-log slope = {slope:.3f} over band 4..24 "
            f"(want -1 +- 0.3)")
