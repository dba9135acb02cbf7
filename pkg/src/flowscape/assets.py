"""Procedural default sound library.

The engine plays any directory of RIFF/WAV files; this module synthesizes a
deterministic default set (seeded per sound id) so a fresh install can make
noise without bundling recordings. Each sound is short, loopable enough for
window-paced playback, and picked to be tellable apart by ear.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

RATE = 44100


def _rng(name: str) -> np.random.Generator:
    seed = int.from_bytes(name.encode("utf-8"), "little") % (2**63)
    return np.random.default_rng(seed)


def _env(n: int, attack: float = 0.02, release: float = 0.25) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    env = np.minimum(1.0, t / max(attack, 1e-6))
    env *= np.minimum(1.0, (1.0 - t) / max(release, 1e-6))
    return env


def _lowpass(x: np.ndarray, alpha: float) -> np.ndarray:
    # one-pole smoother
    return lfilter([alpha], [1.0, alpha - 1.0], x)


def _noise(rng, seconds: float, rate: int = RATE) -> np.ndarray:
    return rng.standard_normal(int(seconds * rate))


def _tone(freq, seconds: float = 0.0, rate: int = RATE) -> np.ndarray:
    if np.ndim(freq):
        freq = np.asarray(freq, dtype=float)
    else:
        freq = np.full(int(seconds * rate), float(freq))
    phase = 2 * np.pi * np.cumsum(freq) / rate
    return np.sin(phase)


def _pulses(rng, seconds, rate, every, jitter, pulse):
    out = np.zeros(int(seconds * rate))
    pos = 0.0
    while pos < seconds:
        start = int(pos * rate)
        end = min(len(out), start + len(pulse))
        out[start:end] += pulse[: end - start]
        pos += every + jitter * rng.random()
    return out


def _norm(x: np.ndarray, peak: float = 0.7) -> np.ndarray:
    m = np.max(np.abs(x))
    return x * (peak / m) if m > 0 else x


# --- individual sounds -----------------------------------------------------

def _rain(rng):
    return _norm(_lowpass(_noise(rng, 1.6), 0.25) * _env(int(1.6 * RATE), 0.1, 0.2), 0.5)


def _heavy_rain(rng):
    base = _lowpass(_noise(rng, 1.6), 0.45)
    drops = _pulses(rng, 1.6, RATE, 0.01, 0.01, _env(200, 0.0, 1.0) * rng.standard_normal(200))
    return _norm((base + 0.7 * drops) * _env(int(1.6 * RATE), 0.05, 0.15), 0.65)


def _rain_on_roof(rng):
    taps = _pulses(rng, 1.4, RATE, 0.03, 0.05, _env(400, 0.0, 1.0) * rng.standard_normal(400))
    bed = 0.3 * _lowpass(_noise(rng, 1.4), 0.2)
    return _norm((taps + bed) * _env(int(1.4 * RATE), 0.05, 0.2), 0.6)


def _thunder(rng):
    n = int(2.0 * RATE)
    rumble = _lowpass(_noise(rng, 2.0), 0.02)
    decay = np.exp(-np.linspace(0, 5, n))
    crack = np.zeros(n)
    crack[: int(0.05 * RATE)] = rng.standard_normal(int(0.05 * RATE)) * np.linspace(1, 0, int(0.05 * RATE))
    return _norm(rumble * decay * 3 + crack, 0.8)


def _creek(rng):
    bubbles = _lowpass(_noise(rng, 1.8), 0.6) * (0.6 + 0.4 * np.sin(2 * np.pi * 6 * np.arange(int(1.8 * RATE)) / RATE))
    return _norm(bubbles * _env(int(1.8 * RATE), 0.1, 0.1), 0.55)


def _fountain(rng):
    hiss = _lowpass(_noise(rng, 1.5), 0.7)
    mod = 0.5 + 0.5 * np.abs(np.sin(2 * np.pi * 2.5 * np.arange(int(1.5 * RATE)) / RATE))
    return _norm(hiss * mod * _env(int(1.5 * RATE), 0.1, 0.15), 0.5)


def _beach(rng, rate=22050):
    n = int(2.2 * rate)
    swell = 0.5 + 0.5 * np.sin(2 * np.pi * 0.45 * np.arange(n) / rate - np.pi / 2)
    surf = _lowpass(rng.standard_normal(n), 0.12)
    return _norm(surf * swell * _env(n, 0.15, 0.15), 0.6), rate


def _snow_storm(rng):
    n = int(1.8 * RATE)
    howl = _lowpass(_noise(rng, 1.8), 0.05)
    gusts = 0.4 + 0.6 * np.abs(np.sin(2 * np.pi * 0.9 * np.arange(n) / RATE))
    return _norm(howl * gusts * 4, 0.7)


def _walk_in_snow(rng):
    step = _env(int(0.12 * RATE), 0.01, 0.5) * rng.standard_normal(int(0.12 * RATE))
    steps = _pulses(rng, 1.6, RATE, 0.45, 0.05, step)
    return _norm(_lowpass(steps, 0.5), 0.6)


def _wind(rng):
    n = int(2.0 * RATE)
    body = _lowpass(_noise(rng, 2.0), 0.04)
    sweep = 0.5 + 0.5 * np.sin(2 * np.pi * 0.5 * np.arange(n) / RATE)
    return _norm(body * sweep * 4, 0.6)


def _wind_on_grass(rng):
    n = int(1.7 * RATE)
    rustle = _lowpass(_noise(rng, 1.7), 0.3) * (0.6 + 0.4 * np.sin(2 * np.pi * 1.3 * np.arange(n) / RATE))
    return _norm(rustle * _env(n, 0.2, 0.2), 0.45)


def _fire(rng):
    crackle = _pulses(rng, 1.8, RATE, 0.04, 0.08, _env(150, 0.0, 1.0) * rng.standard_normal(150) * 2)
    roar = 0.4 * _lowpass(_noise(rng, 1.8), 0.03) * 4
    return _norm((crackle + roar) * _env(int(1.8 * RATE), 0.05, 0.1), 0.75)


def _forest_bird(rng):
    chirp1 = _tone(np.linspace(2800, 3400, int(0.12 * RATE)), 0.12) * _env(int(0.12 * RATE), 0.1, 0.3)
    chirp2 = _tone(np.linspace(3600, 3000, int(0.09 * RATE)), 0.09) * _env(int(0.09 * RATE), 0.1, 0.3)
    out = np.zeros(int(0.9 * RATE))
    for start, chirp in ((0.05, chirp1), (0.3, chirp2), (0.55, chirp1)):
        i = int(start * RATE)
        out[i : i + len(chirp)] += chirp
    return _norm(out, 0.5)


def _seagulls(rng):
    cry = _tone(np.linspace(1800, 900, int(0.35 * RATE)), 0.35) * _env(int(0.35 * RATE), 0.05, 0.3)
    out = np.zeros(int(1.3 * RATE))
    for start in (0.0, 0.5, 0.9):
        i = int(start * RATE)
        out[i : i + len(cry)] += cry * (0.7 + 0.3 * rng.random())
    return _norm(out, 0.55)


def _loon(rng):
    wail = _tone(np.linspace(600, 900, int(0.8 * RATE)), 0.8)
    vib = 1 + 0.03 * np.sin(2 * np.pi * 5 * np.arange(int(0.8 * RATE)) / RATE)
    return _norm(wail * vib * _env(int(0.8 * RATE), 0.15, 0.25), 0.55)


def _cricket(rng):
    click = _tone(4200, 0.02) * _env(int(0.02 * RATE), 0.2, 0.2)
    return _norm(_pulses(rng, 1.2, RATE, 0.06, 0.0, click), 0.4)


def _sheep(rng):
    n = int(0.7 * RATE)
    bleat = _tone(420, 0.7) * (0.6 + 0.4 * np.sign(np.sin(2 * np.pi * 18 * np.arange(n) / RATE)))
    return _norm(bleat * _env(n, 0.1, 0.3), 0.55)


def _owl(rng, rate=22050):
    hoot = _tone(np.full(int(0.25 * rate), 340.0), 0.25, rate) * _env(int(0.25 * rate), 0.15, 0.4)
    out = np.zeros(int(1.2 * rate))
    for start in (0.1, 0.55, 0.85):
        i = int(start * rate)
        out[i : i + len(hoot)] += hoot
    return _norm(out, 0.5), rate


def _horse_snort(rng):
    n = int(0.5 * RATE)
    flutter = _lowpass(_noise(rng, 0.5), 0.3) * (0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 25 * np.arange(n) / RATE)))
    return _norm(flutter * _env(n, 0.05, 0.3), 0.6)


def _frog(rng):
    n = int(0.25 * RATE)
    croak = _tone(180, 0.25) * (0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 30 * np.arange(n) / RATE)))
    out = np.zeros(int(1.0 * RATE))
    for start in (0.05, 0.45, 0.75):
        i = int(start * RATE)
        out[i : i + n] += croak * _env(n, 0.1, 0.3)
    return _norm(out, 0.55)


def _wolf(rng):
    n = int(1.6 * RATE)
    glide = np.concatenate([
        np.linspace(380, 620, n // 3),
        np.full(n - 2 * (n // 3), 620.0),
        np.linspace(620, 420, n // 3),
    ])
    howl = _tone(glide, n / RATE)
    return _norm(howl * _env(n, 0.2, 0.3), 0.6)


def _woodpecker(rng):
    knock = _lowpass(rng.standard_normal(int(0.008 * RATE)), 0.8) * _env(int(0.008 * RATE), 0.0, 0.6)
    return _norm(_pulses(rng, 0.9, RATE, 0.055, 0.0, knock * 3), 0.6)


# sound id -> (category, synth). Categories drive the static mapping checks
# and the UI colour coding.
DEFAULT_ASSETS = {
    "forest_bird": ("NORMAL_BIRD", _forest_bird),
    "rain": ("SYN_WEATHER", _rain),
    "heavy_rain": ("SYN_WEATHER", _heavy_rain),
    "rain_on_roof": ("SYN_WEATHER", _rain_on_roof),
    "thunder": ("SYN_WEATHER", _thunder),
    "creek": ("SYN_WEATHER", _creek),
    "fountain": ("SYN_WEATHER", _fountain),
    "beach": ("SYN_WEATHER", _beach),
    "snow_storm": ("SYN_WEATHER", _snow_storm),
    "walk_in_snow": ("SYN_WEATHER", _walk_in_snow),
    "wind": ("RST_WIND", _wind),
    "wind_on_grass": ("RST_WIND", _wind_on_grass),
    "fire": ("COUNTER_FIRE", _fire),
    "seagulls": ("FIN_ANIMAL", _seagulls),
    "loon": ("FIN_ANIMAL", _loon),
    "cricket": ("FIN_ANIMAL", _cricket),
    "sheep": ("FIN_ANIMAL", _sheep),
    "owl": ("FIN_ANIMAL", _owl),
    "horse_snort": ("FIN_ANIMAL", _horse_snort),
    "frog": ("FIN_ANIMAL", _frog),
    "wolf": ("FIN_ANIMAL", _wolf),
    "woodpecker": ("PING", _woodpecker),
}

ASSET_CATEGORY = {name: cat for name, (cat, _fn) in DEFAULT_ASSETS.items()}


def synthesize(name: str) -> tuple[int, np.ndarray]:
    """(sample_rate, mono float array) for one default sound."""
    _cat, fn = DEFAULT_ASSETS[name]
    out = fn(_rng(name))
    if isinstance(out, tuple):
        samples, rate = out
        return rate, samples
    return RATE, out


def write_wav_mono(path: str, rate: int, samples: np.ndarray) -> None:
    pcm = np.clip(np.rint(samples * 32767), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(pcm.tobytes())


def ensure_default_assets(directory: str) -> Path:
    """Create any missing default sounds under directory; returns the path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for name in DEFAULT_ASSETS:
        path = root / f"{name}.wav"
        if not path.exists():
            rate, samples = synthesize(name)
            write_wav_mono(str(path), rate, samples)
    return root
