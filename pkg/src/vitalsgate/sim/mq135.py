"""Gas sensor model: ppm <-> ADC counts through the resistance curve.

The sensing element's resistance falls as gas concentration rises:
ppm = a * (Rs/R0)^b with b < 0. The element sits in a divider against a
load resistor, so the ADC sees Vout = Vcc * RL / (Rs + RL). Curve
constants are configuration; the defaults anchor a clean-air ratio
Rs/R0 = 3.6 to 400 ppm.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP


class Mq135Fault(ValueError):
    """ADC reading is saturated or zero: the divider math degenerates."""


@dataclass(frozen=True)
class Mq135Model:
    load_resistance: float = 10_000.0         # RL, ohms
    calibration_resistance: float = 10_000.0  # R0, ohms
    curve_a: float = 5184.0                   # so a * 3.6^b = 400
    curve_b: float = -2.0
    supply_volts: float = 5.0
    adc_bits: int = 10

    def __post_init__(self):
        if self.curve_a <= 0:
            raise ValueError("curve_a must be positive")
        if self.curve_b >= 0:
            raise ValueError("curve_b must be negative (inverse correlation)")
        if self.calibration_resistance <= 0 or self.load_resistance <= 0:
            raise ValueError("resistances must be positive")
        if not 1 <= self.adc_bits <= 16:
            raise ValueError("adc_bits out of range")

    @property
    def full_scale(self) -> int:
        return (1 << self.adc_bits) - 1


def ppm_to_adc(model: Mq135Model, ppm: float) -> int:
    """Ideal ADC counts the divider would produce for a concentration.

    Raises:
        ValueError: if ppm is not positive.
        Mq135Fault: if the reading would saturate the ADC (0 or full
            scale), which downstream treats as a sensor fault.
    """
    if ppm <= 0:
        raise ValueError(f"ppm must be positive, got {ppm}")
    ratio = (ppm / model.curve_a) ** (1.0 / model.curve_b)
    rs = ratio * model.calibration_resistance
    vout = model.supply_volts * model.load_resistance / (rs + model.load_resistance)
    counts = int(
        (Decimal(str(vout)) * (1 << model.adc_bits) / Decimal(str(model.supply_volts))).quantize(
            Decimal("1"), rounding=ROUND_HALF_UP
        )
    )
    if counts <= 0 or counts >= model.full_scale:
        raise Mq135Fault(f"ADC saturated: counts={counts} for ppm={ppm}")
    return counts


def adc_to_ppm(model: Mq135Model, counts: int) -> float:
    """Concentration recovered from ADC counts.

    Raises:
        Mq135Fault: when counts are 0 or at full scale (shorted or open
            divider; Vout of 0 makes Rs undefined).
    """
    if counts <= 0 or counts >= model.full_scale:
        raise Mq135Fault(f"degenerate ADC reading: counts={counts}")
    vout = counts * model.supply_volts / (1 << model.adc_bits)
    rs = model.load_resistance * (model.supply_volts / vout - 1.0)
    ratio = rs / model.calibration_resistance
    return model.curve_a * ratio**model.curve_b


def quantization_bound(model: Mq135Model, ppm: float) -> float:
    """Worst-case |round-trip - original| from ADC rounding at this ppm.

    The ideal (unrounded) counts lie within +-0.5 of the rounded value
    and the curve is monotone in counts, so the error is bounded by the
    larger ppm step to an adjacent count.
    """
    counts = ppm_to_adc(model, ppm)
    neighbors = [c for c in (counts - 1, counts + 1) if 0 < c < model.full_scale]
    here = adc_to_ppm(model, counts)
    return max(abs(adc_to_ppm(model, c) - here) for c in neighbors) + 1e-9
