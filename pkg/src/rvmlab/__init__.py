"""Numerical toolkit for the relativistic Vlasov-Maxwell system in a strong magnetic field.

Modules: ``kinematics`` (characteristics), ``fields`` (external fields,
equilibria, Kirchhoff and spectral wave solvers), ``radon``,
``oscillatory`` (sphere and trace identities), ``weights`` (kernels of the
increment representation), ``increment`` (the four-term breakdown),
``vmsolver`` (PIC solver, validators, gyration model) and ``cli``.
"""

__version__ = "0.1.0"
