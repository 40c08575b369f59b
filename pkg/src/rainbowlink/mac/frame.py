"""OFDM numerology and the TDD frame layout."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class Numerology:
    """OFDM numerology; the defaults are the 480 kHz mmWave configuration.

    Derived durations are computed, not stored, so they always satisfy
    ``tti_us = symbols_per_tti * symbol_with_cp_us``.
    """

    sample_rate_hz: float = 983.04e6
    fft_size: int = 2048
    cp_samples: int = 256
    symbols_per_tti: int = 13

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0 or self.fft_size < 1 or self.cp_samples < 0 or self.symbols_per_tti < 1:
            raise ConfigError("invalid numerology")

    @property
    def sc_spacing_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    @property
    def symbol_us(self) -> float:
        return self.fft_size / self.sample_rate_hz * 1e6

    @property
    def symbol_with_cp_us(self) -> float:
        return (self.fft_size + self.cp_samples) / self.sample_rate_hz * 1e6

    @property
    def tti_us(self) -> float:
        return self.symbols_per_tti * self.symbol_with_cp_us


@dataclass(frozen=True)
class FrameDesign:
    """Frame of ``dl_ttis`` DL and ``ul_ttis`` UL TTIs with its symbol budget.

    The DL half carries the sync reference and control symbols, the UL half
    carries guard, preamble and payload symbols.
    """

    ul_ttis: int = 2
    dl_ttis: int = 2
    frame_us: float = 125.0
    dl_reference_symbols: int = 22
    dl_control_symbols: int = 2
    guard_symbols: int = 2
    ul_preamble_symbols: int = 8
    ul_payload_symbols: int = 18

    def __post_init__(self) -> None:
        counts = (self.ul_ttis, self.dl_ttis, self.dl_reference_symbols, self.dl_control_symbols,
                  self.guard_symbols, self.ul_preamble_symbols, self.ul_payload_symbols)
        if min(counts) < 0 or self.ul_ttis + self.dl_ttis < 1 or self.frame_us <= 0:
            raise ConfigError("invalid frame design")

    @property
    def total_symbols(self) -> int:
        return (self.dl_reference_symbols + self.dl_control_symbols + self.guard_symbols
                + self.ul_preamble_symbols + self.ul_payload_symbols)

    @property
    def t_dl_us(self) -> float:
        """DL share of one frame, charged once per phase in the latency budget."""
        return self.frame_us * self.dl_ttis / (self.ul_ttis + self.dl_ttis)

    def check(self, numerology: Numerology = Numerology()) -> None:
        """Raise ``ConfigError`` unless the symbols fill the TTIs and the TTIs fit the frame."""
        n_tti = self.ul_ttis + self.dl_ttis
        if self.total_symbols != n_tti * numerology.symbols_per_tti:
            raise ConfigError(
                f"{self.total_symbols} symbols do not fill {n_tti} TTIs of {numerology.symbols_per_tti}"
            )
        if n_tti * numerology.tti_us > self.frame_us + 1e-9:
            raise ConfigError("TTIs exceed the frame duration")


def frame_fill(frame: FrameDesign, numerology: Numerology = Numerology()) -> float:
    """Fraction of the frame occupied by its TTIs."""
    return (frame.ul_ttis + frame.dl_ttis) * numerology.tti_us / frame.frame_us

