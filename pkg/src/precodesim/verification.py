"""Built-in consistency checks for the closed forms and the gradient.

These power the ``verify`` CLI subcommand: each check exercises one
family of identities on freshly drawn random instances and reports a
pass/fail with the observed worst case.  They are quick sanity probes,
not a replacement for the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, SystemDims, decompose
from .detection import conjugate_detection
from .numerics import complex_gaussian, complex_normal
from .optimizer import default_start, gradient
from .precoding import arzf, parametric_rzf, rzf, zf

__all__ = ["CheckResult", "run_all"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _instance(seed, rx=(4, 4), layers=(2, 2), num_tx=12):
    dims = SystemDims(num_tx=num_tx, rx=rx, layers=layers)
    blocks = tuple(
        complex_gaussian(seed * 17 + k, r, num_tx, 1.0) for k, r in enumerate(rx)
    )
    ch = ChannelSet(dims=dims, blocks=blocks)
    return ch, decompose(ch)


def check_identities(instances=100, tol=1e-10):
    """Gain-adapted ridge equals weighted-basis ridge rescaled by the
    singular values; same link between the two pseudoinverses."""
    worst = 0.0
    for i in range(instances):
        _, dec = _instance(i)
        power, nv = 2.0, 0.3
        a = arzf(dec, power, nv, norm_mode="total").raw
        b = rzf(dec, power, nv, basis="f", norm_mode="total").raw * dec.s[None, :]
        worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(a))
        zv = zf(dec, power, basis="v").raw
        zf_s = zf(dec, power, basis="f").raw * dec.s[None, :]
        worst = max(worst, np.linalg.norm(zv - zf_s) / np.linalg.norm(zv))
    return CheckResult(
        name="identities",
        passed=worst <= tol,
        detail=f"worst relative residual {worst:.2e} (tol {tol:g}) over {instances} instances",
    )


def check_stationarity(instances=100, tol=1e-9):
    """Raw ridge solutions zero the gradients of their quadratic
    objectives."""
    worst = 0.0
    for i in range(instances):
        _, dec = _instance(i + 1000)
        lt = dec.dims.total_layers
        lam = 0.5 + 0.1 * (i % 7)
        for basis in ("v", "f"):
            b = dec.v if basis == "v" else dec.s[:, None] * dec.v
            w = rzf(dec, 1.0, 1.0, basis=basis, reg=lam).raw
            resid = b.conj().T @ (b @ w - np.eye(lt)) + lam * w
            worst = max(worst, np.linalg.norm(resid))
        w = parametric_rzf(dec, lam / dec.s**2, 1.0).raw
        resid = dec.v.conj().T @ (
            dec.s[:, None] ** 2 * (dec.v @ w - np.eye(lt))
        ) + lam * w
        worst = max(worst, np.linalg.norm(resid))
    return CheckResult(
        name="stationarity",
        passed=worst <= tol,
        detail=f"worst gradient residual {worst:.2e} (tol {tol:g}) over {instances} instances",
    )


def check_asymptotics(instances=20, lo=5.0, hi=20.0):
    """Ridge-to-zero approaches the plain pseudoinverse direction,
    ridge-to-infinity the gain-weighted matched direction, both at
    first order in the ridge."""

    def unit(m):
        return m / np.linalg.norm(m)

    ok = True
    worst = ""
    for i in range(instances):
        _, dec = _instance(i + 2000)
        zf_dir = unit(zf(dec, 1.0).raw)
        mrt_dir = unit(dec.v.conj().T * dec.s[None, :] ** 2)
        small = [
            np.linalg.norm(unit(parametric_rzf(dec, lam / dec.s**2, 1.0).raw) - zf_dir)
            for lam in (1e-2, 1e-3, 1e-4)
        ]
        large = [
            np.linalg.norm(unit(parametric_rzf(dec, lam / dec.s**2, 1.0).raw) - mrt_dir)
            for lam in (1e2, 1e3, 1e4)
        ]
        for seq in (small, large):
            for a, b in zip(seq, seq[1:]):
                ratio = a / b
                if not lo <= ratio <= hi:
                    ok = False
                    worst = f"decay ratio {ratio:.2f} outside [{lo:g}, {hi:g}]"
    return CheckResult(
        name="asymptotics",
        passed=ok,
        detail=worst or f"all decay ratios within [{lo:g}, {hi:g}] over {instances} instances",
    )


def check_noise_shaping(draws=100000, seed=0):
    """Monte Carlo covariance of diagonalized noise against the
    closed form: inverse squared singular values on the diagonal."""
    _, dec = _instance(seed + 3000, rx=(4,), layers=(2,), num_tx=8)
    g = conjugate_detection(dec).blocks[0]
    nv = 0.7
    rng = np.random.default_rng(seed + 1)
    n = complex_normal(rng, (draws, 4), nv)
    z = n @ g.T
    emp = z.T @ z.conj() / draws
    want_diag = nv * dec.s_block(0) ** -2.0
    rel = np.abs(np.diag(emp).real - want_diag) / want_diag
    cross_scale = np.sqrt(want_diag[0] * want_diag[1])
    se3 = 3.0 * cross_scale / np.sqrt(draws)
    off = abs(emp[0, 1])
    passed = bool(np.all(rel <= 0.03) and off <= se3)
    return CheckResult(
        name="noise_shaping",
        passed=passed,
        detail=(
            f"diag rel err {rel.max():.4f} (tol 0.03), "
            f"offdiag {off:.2e} (3se {se3:.2e}) with {draws} draws"
        ),
    )


def check_gradient(instances=20, tol=1e-4):
    """Analytic forward-mode gradient against central differences."""
    worst = 0.0
    for i in range(instances):
        ch, dec = _instance(i + 4000)
        power, nv = 2.0, 0.2
        rng = np.random.default_rng(i)
        r = default_start(dec, power, nv) * np.exp(rng.uniform(-1, 1, dec.dims.total_layers))
        gd = gradient(dec, ch, r, power, nv, mode="dual")
        gf = gradient(dec, ch, r, power, nv, mode="fd")
        worst = max(worst, np.abs(gd - gf).max() / max(np.abs(gf).max(), 1e-8))
    return CheckResult(
        name="gradient_consistency",
        passed=worst <= tol,
        detail=f"worst relative deviation {worst:.2e} (tol {tol:g}) over {instances} instances",
    )


def run_all(quick=False):
    """All checks; ``quick`` shrinks instance counts and draws."""
    if quick:
        return [
            check_identities(instances=20),
            check_stationarity(instances=20),
            check_asymptotics(instances=5),
            check_noise_shaping(draws=20000),
            check_gradient(instances=5),
        ]
    return [
        check_identities(),
        check_stationarity(),
        check_asymptotics(),
        check_noise_shaping(),
        check_gradient(),
    ]
