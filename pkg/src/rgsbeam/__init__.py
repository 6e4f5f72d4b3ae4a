"""Robust group-sparse beamforming for multicast Cloud-RAN.

The package implements a three-stage pipeline that jointly selects which
remote radio heads (RRHs) to switch off and designs multicast beamformers
that survive ellipsoidal channel uncertainty:

1. ``stage1``  -- perturbed alternating optimization of a group-sparsity
   inducing weighted objective over lifted covariance matrices.
2. ``stage2``  -- RRH ordering and a bisection over PhaseLift-style
   feasibility problems to find how many RRHs can be switched off.
3. ``stage3``  -- transmit-power minimization on the surviving RRHs with
   rank-one extraction / Gaussian randomization and exact worst-case
   margin certification.

Everything runs on an embedded first-order conic solver (``sdp``); no
external optimization packages are required at runtime.
"""

__version__ = "0.1.0"
