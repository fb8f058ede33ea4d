"""Synthesize a non-unitary gate from unitary controls plus the bath.

The slot tensor includes the idle windows around the control, so the
optimizer can recruit the always-on coupling as a decoherence resource.
Targets are amplitude-mixed rotations: unitary at eta = 0, maximally
mixed coherence at eta = 0.5. Fidelity stays high until the requested
unitarity falls below what one slot of bath contact can realize.
"""

import numpy as np

from proctensor.basis import generate_haar_basis
from proctensor.control import (build_synthesis_tensor, synthesis_model,
                                synthesis_sweep)

ALPHA = 0.4

basis = generate_haar_basis(14, seed=7)
model = synthesis_model()
pt = build_synthesis_tensor(model, basis, shots=None)
points = synthesis_sweep(pt, model, ALPHA, etas=np.linspace(0.0, 0.5, 6),
                         restarts=6, seed=0)

print(f"target rotation angle alpha = {ALPHA}")
print(f"{'eta':>5} {'target unitarity':>17} {'process fidelity':>17} "
      f"{'realized unitarity':>19}")
for p in points:
    print(f"{p.eta:>5.2f} {p.target_unitarity:>17.4f} "
          f"{p.process_fidelity:>17.4f} {p.realized_unitarity:>19.4f}")
