"""Synthetic pulse waveform and the beat detector that reads it.

The detector is the classic adaptive-threshold kind used on optical
pulse sensors: rolling peak/trough estimates decay toward the signal,
a beat fires on an upward crossing of a fraction of the peak-trough
span, and a refractory window suppresses double triggers. Beats per
minute come from the mean of the last few inter-beat intervals.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field


@dataclass
class PpgDetector:
    """Streaming beat detector and bpm estimator.

    ``step`` must be called at the configured sampling rate. A flat or
    near-flat signal produces no beats; after ``fault_after_ms`` without
    one the detector reports bpm 0 with the fault flag set. Reported
    bpm is capped at 255 (wire ceiling).
    """

    sampling_rate_hz: float = 100.0
    threshold_fraction: float = 0.6   # of the peak-trough span
    refractory_ms: int = 250
    ibi_ring_size: int = 10
    fault_after_ms: int = 10_000
    min_span: float = 1.0             # below this the signal is flat

    _peak: float | None = field(default=None, repr=False)
    _trough: float | None = field(default=None, repr=False)
    _prev: float | None = field(default=None, repr=False)
    _last_beat_ms: int | None = field(default=None, repr=False)
    _last_activity_ms: int | None = field(default=None, repr=False)
    _ibis: deque = field(default_factory=deque, repr=False)
    _skip_next_ibi: bool = field(default=True, repr=False)
    _decay_tau_ms: float = 2000.0

    def step(self, t_ms: int, value: float) -> tuple[bool, int, bool]:
        """Feed one sample; returns (beat_fired, bpm_estimate, fault)."""
        if self._peak is None:
            self._peak = self._trough = self._prev = value
            self._last_activity_ms = t_ms
            return False, 0, False
        decay = (1000.0 / self.sampling_rate_hz) / self._decay_tau_ms
        self._peak = value if value > self._peak else self._peak + (value - self._peak) * decay
        self._trough = (
            value if value < self._trough else self._trough + (value - self._trough) * decay
        )
        span = self._peak - self._trough
        threshold = self._trough + self.threshold_fraction * span
        beat = False
        if (
            span >= self.min_span
            and self._prev < threshold <= value
            and (self._last_beat_ms is None or t_ms - self._last_beat_ms >= self.refractory_ms)
        ):
            beat = True
            if self._last_beat_ms is not None:
                gap = t_ms - self._last_beat_ms
                if gap > self.fault_after_ms:
                    # Resumed after a dropout: restart the estimate. The
                    # interval to the next beat is skipped too, because
                    # the first beat of a fresh threshold fires early.
                    self._ibis.clear()
                    self._skip_next_ibi = True
                elif self._skip_next_ibi:
                    self._skip_next_ibi = False
                else:
                    self._ibis.append(gap)
                    while len(self._ibis) > self.ibi_ring_size:
                        self._ibis.popleft()
            self._last_beat_ms = t_ms
            self._last_activity_ms = t_ms
        self._prev = value
        anchor = self._last_beat_ms if self._last_beat_ms is not None else self._last_activity_ms
        fault = t_ms - anchor >= self.fault_after_ms
        return beat, 0 if fault else self.bpm, fault

    @property
    def bpm(self) -> int:
        if not self._ibis:
            return 0
        mean_ibi = sum(self._ibis) / len(self._ibis)
        return min(255, int(60000.0 / mean_ibi + 0.5))


class PpgWaveform:
    """Pulse-shaped light signal for a target bpm track.

    One gaussian systolic bump per cardiac cycle riding on a flat
    baseline, plus optional uniform noise as a fraction of the pulse
    amplitude. ``step`` also reports ground-truth cycle starts so tests
    can count true beats independently of any detector.
    """

    BASELINE = 512.0   # ADC counts
    AMPLITUDE = 200.0  # pulse height, ADC counts

    def __init__(
        self,
        bpm_at,
        sampling_rate_hz: float = 100.0,
        noise_amplitude: float = 0.0,
        rng: random.Random | None = None,
    ):
        self._bpm_at = bpm_at if callable(bpm_at) else (lambda t, v=float(bpm_at): v)
        self.sampling_rate_hz = sampling_rate_hz
        self.noise_amplitude = noise_amplitude
        self._rng = rng or random.Random(0)
        self._phase = 0.0  # cardiac cycles, fractional
        self._t_ms = 0

    def step(self) -> tuple[int, float, bool]:
        """Advance one sample; returns (t_ms, value, cycle_started)."""
        t = int(round(self._t_ms))
        bpm = self._bpm_at(t)
        prev_phase = self._phase
        self._phase += bpm / 60000.0 * (1000.0 / self.sampling_rate_hz)
        cycle_started = math.floor(self._phase) > math.floor(prev_phase)
        frac = self._phase % 1.0
        value = self.BASELINE + self.AMPLITUDE * math.exp(-((frac - 0.3) ** 2) / (2 * 0.08**2))
        if self.noise_amplitude:
            value += self.AMPLITUDE * self.noise_amplitude * self._rng.uniform(-1.0, 1.0)
        self._t_ms += 1000.0 / self.sampling_rate_hz
        return t, value, cycle_started
