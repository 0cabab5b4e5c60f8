"""
Looking at the surface
======================

Export the surface of revolution just before and at quench as OBJ files,
ready for any mesh viewer.
"""

import sys
from pathlib import Path

from quenchflow import ProblemSpec, export_mesh, run_until_event

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("meshes")

rec = run_until_event(ProblemSpec(f="0.5-0.1*cos(2*pi*x)", g="0.8-0.2*cos(2*pi*x)", J=128,
                                  theta_q=1e-3, snapshot_stride=200))
rec.snapshots.append((rec.t_stop, rec.u_final))

t_half = rec.t_stop / 2
early = min(rec.snapshots, key=lambda s: abs(s[0] - t_half))[0]
for t in (0.0, early, rec.t_stop):
    path = export_mesh(rec, t, out / f"neck_t{t:.4f}.obj", K=48)
    print(f"t = {t:.5f}  min u = {rec.snapshot_at(t).min():.4e}  ->  {path}")
