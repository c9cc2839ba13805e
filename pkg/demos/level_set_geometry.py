"""Intrinsic normals and curvatures of a few level sets.

Run:  python demos/level_set_geometry.py
"""
import numpy as np

from heisenkit.fields import SymbolicField
from heisenkit.levelset import CharacteristicPointError, lemma4_check, level_frame

P = np.array([[1.0, 0.0, 0.0], [0.3, -0.4, 0.5], [0.0, 2.0, -1.0]])
for expr in ("x3", "x1**2 + x2**2", "x3 - x1*x2", "x1**2 + x2**2 + x3**2"):
    u = SymbolicField(expr)
    fr = level_frame(u, P)
    print(f"u = {expr}")
    for p, h, pc in zip(P, fr.h, fr.p):
        print(f"   at {p}: h = {h:+.4f}, p = {pc:+.4f}")
    e1, e2 = lemma4_check(u, P).relative_errors()
    print(f"   pointwise identities: max relative errors {e1.max():.1e}, {e2.max():.1e}")

try:
    level_frame(SymbolicField("x3"), np.zeros(3))
except CharacteristicPointError as err:
    print("origin on {x3 = 0}:", err)
