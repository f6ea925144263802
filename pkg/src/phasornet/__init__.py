"""Phasor networks: complex-valued nets trained by backprop, run as spiking nets.

Neuron states are unit-magnitude complex numbers ("phasors"). Training happens
in the complex domain; inference can additionally be executed as a spiking
network where each phase is represented by a spike time within an ongoing
cycle, either ideally (exact phase-to-time mapping) or through a circuit-level
ODE simulation of resonating synapses.
"""

from .complex_core import cmul, magnitude, phase, matvec, conv2d_valid
from .phasor_net import (
    LayerSpec,
    PhasorNetwork,
    ForwardTrace,
    TargetEncoding,
    encode_input,
    encode_target,
    tpam_activation,
    forward,
    backward,
    loss_cosine,
    loss_mse,
    loss_phase_gradient,
    activation_jacobian,
    predict,
)
from .optim import Adam
from .errors import (
    PhasorNetError,
    DimensionError,
    ValidationError,
    DataFormatError,
    NumericError,
)

__version__ = "0.1.0"
