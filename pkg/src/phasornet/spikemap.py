"""Ideal spike-timing backend: phases rendered as periodic spike events.

Every phase angle maps to a time within an ongoing cycle, t = theta * T/2pi.
Layer l's units first spike in cycle l (one layer of propagation per cycle)
and every cycle thereafter; the network is phase-locked to the input, so the
ideal backend has no jitter and serves as the exact reference for the
circuit-level simulator.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .complex_core import phase as cphase
from .errors import ValidationError
from .phasor_net import forward

TWO_PI = 2.0 * np.pi


@dataclass
class SpikeEvent:
    layer: int
    neuron: int
    time: float  # ms


@dataclass
class SpikeRaster:
    events: list  # SpikeEvent, sorted by time
    period: float  # cycle period T, ms
    n_cycles: int

    def times(self):
        return np.array([e.time for e in self.events])


def phase_to_time(theta, period):
    """t = theta * T / 2pi, theta normalized into [0, 2pi)."""
    if period <= 0:
        raise ValidationError(f"cycle period must be positive, got {period}")
    theta = np.asarray(theta, dtype=np.float64) % TWO_PI
    return theta * period / TWO_PI


def time_to_phase(t, period):
    """theta = 2pi * (t mod T) / T."""
    if period <= 0:
        raise ValidationError(f"cycle period must be positive, got {period}")
    return TWO_PI * (np.asarray(t, dtype=np.float64) % period) / period


def synapse_delay(weight, period):
    """Complex weight -> (magnitude, delay): phase scaled into [0, T)."""
    mag = float(np.abs(weight))
    theta = float(cphase(weight)) % TWO_PI
    return mag, theta * period / TWO_PI


def unroll(net, x, period, n_cycles):
    """Render a forward pass as a spike raster.

    Input units (layer 0) spike every cycle at their phase times; layer l's
    units first spike in cycle l, then every cycle (phase-locked steady
    state). Masked-off units never spike.
    """
    depth = len(net.layers)
    if n_cycles < depth + 1:
        raise ValidationError(
            f"need at least depth+1 = {depth + 1} cycles for the output layer to emit"
        )
    trace = forward(net, x)
    layer_phases = [cphase(np.asarray(x).reshape(-1))]
    layer_active = [np.abs(np.asarray(x).reshape(-1)) > 0.0]
    for h, m in zip(trace.h, trace.masks):
        layer_phases.append(cphase(h.reshape(-1)))
        layer_active.append(m.reshape(-1))

    events = []
    for layer, (phases, active) in enumerate(zip(layer_phases, layer_active)):
        offsets = phase_to_time(phases, period)
        for cycle in range(layer, n_cycles):
            base = cycle * period
            for neuron in np.nonzero(active)[0]:
                events.append(SpikeEvent(layer, int(neuron), base + float(offsets[neuron])))
    events.sort(key=lambda e: (e.time, e.layer, e.neuron))
    return SpikeRaster(events=events, period=period, n_cycles=n_cycles)


def raster_phases(raster, layer, n_units, cycle):
    """Recover unit phases from one cycle of a raster (nan where silent)."""
    phases = np.full(n_units, np.nan)
    lo, hi = cycle * raster.period, (cycle + 1) * raster.period
    for e in raster.events:
        if e.layer == layer and lo <= e.time < hi:
            phases[e.neuron] = time_to_phase(e.time, raster.period)
    return phases


def write_raster_csv(raster, path):
    """CSV export: header layer,neuron,time_ms; >= 9 significant digits."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["layer", "neuron", "time_ms"])
        for e in raster.events:
            writer.writerow([e.layer, e.neuron, f"{e.time:.12g}"])


def read_raster_csv(path):
    events = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["layer", "neuron", "time_ms"]:
            raise ValidationError(f"unexpected raster header: {header}")
        for row in reader:
            events.append(SpikeEvent(int(row[0]), int(row[1]), float(row[2])))
    period = 0.0
    n_cycles = 0
    return SpikeRaster(events=events, period=period, n_cycles=n_cycles)
