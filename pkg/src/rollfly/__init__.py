"""Energy analysis and simulation of a two-Cobot shell that rolls by propeller torque or flies.

Modules: ``core`` (parameters, rotations), ``dynamics`` (equations of motion),
``power`` (rotor momentum theory), ``control`` (rate control and allocation),
``analysis`` (steady-state range and advantage map), ``sim`` (time-domain
simulation) and ``cli``.
"""

__version__ = "0.1.0"
