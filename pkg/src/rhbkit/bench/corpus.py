"""Builtin systems and the loader used by the command line."""
from __future__ import annotations

from pathlib import Path

from ..expr import parse_system

# Forced Duffing oscillator. Forcing 1.0 at omega = 2 lies inside the
# hysteresis window: the section has an upper, a lower and an unstable
# periodic response.
DUFFING = """\
system duffing {
    param F = 1.0;
    forcing w = 2.0;
    var x;
    eq x'' + 0.1 x' + x + x^3 = F cos(w*t);
}
"""

VDP = """\
system vdp {
    param eps = 0.5;
    param F = 0.3;
    forcing w = 1.2;
    var x;
    eq x'' - eps (1 - x^2) x' + x = F cos(w*t);
}
"""

# Bubble radius; the coefficients are representative, not fitted.
RAYLEIGH_PLESSET = """\
system rayleigh_plesset {
    param A = 0.1;
    param B = 0.5;
    param C = 1.5;
    param D = -1.0;
    param E = 0.2;
    forcing w = 1.0;
    var R;
    eq R R'' = -3/2 R'^2 - A R'/R - B/R + C/R^3 + D - E cos(w*t);
    init R(0) = 1;
}
"""

RELATIVISTIC = """\
system relativistic {
    param beta = 0.85;
    var x;
    eq x'' + (1 - x'^2)^(3/2) x = 0;
    conservative true;
    init x(0) = 0;
    init x'(0) = beta;
}
"""

PENDULUM = """\
system pendulum {
    var theta;
    eq theta'' + sin(theta) = 0;
    conservative true;
    init theta(0) = 1.5;
    init theta'(0) = 0;
}
"""

# Asymmetric spherical pendulum with the acceleration coupling written
# symmetrically in the two directions.
ASYM_PENDULUM = """\
system asym_pendulum {
    param kappa = 0.01;
    var x, y;
    eq x'' + (1 - kappa) x = -(1 - kappa) (x x'^2 + x y'^2 + x y y'' + x^2 x'');
    eq y'' + y = -(y y'^2 + y x'^2 + x y x'' + y^2 y'');
    init x(0) = 0.1;
    init x'(0) = 0;
    init y(0) = 0.2;
    init y'(0) = 0;
}
"""

BUILTIN = {
    "duffing": DUFFING,
    "vdp": VDP,
    "rayleigh_plesset": RAYLEIGH_PLESSET,
    "relativistic": RELATIVISTIC,
    "pendulum": PENDULUM,
    "asym_pendulum": ASYM_PENDULUM,
}

# Nonlinearity degree of each recast builtin
EXPECTED_DEGREE = {
    "duffing": 3,
    "vdp": 3,
    "rayleigh_plesset": 4,
    "relativistic": 4,
    "pendulum": 2,
    "asym_pendulum": 3,
}


def source_of(ref):
    """Text of ``builtin:NAME``, a bare builtin name, or a file path."""
    name = ref[len("builtin:"):] if ref.startswith("builtin:") else ref
    if name in BUILTIN:
        return BUILTIN[name]
    if ref.startswith("builtin:"):
        raise KeyError(f"unknown builtin system {name!r}; choose from {', '.join(BUILTIN)}")
    return Path(ref).read_text()


def load_system(ref):
    return parse_system(source_of(ref))
