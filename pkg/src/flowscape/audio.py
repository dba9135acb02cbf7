"""Soundscape output: per-window playback plans mixed into audio.

Each distinct triggered sound starts one voice at the beginning of the next
window regardless of how many flows fired it. Voices run to sample
completion (cut sounds wreck the naturalistic feel), with a hard cap and
oldest-voice stealing to bound cost. Output is an offline 16-bit WAV render,
a live device stream when a backend is available, or a silent sink.
"""

from __future__ import annotations

import logging
import threading
import wave
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.signal import resample_poly

from .assets import ASSET_CATEGORY
from .rules import EventInstance, RuleSet

log = logging.getLogger(__name__)

ENGINE_RATE = 44100
MAX_VOICES = 64
CLIP_KNEE = 0.8


class AssetError(Exception):
    """Asset directory or file unusable."""


@dataclass(frozen=True)
class SoundAsset:
    id: str
    samples: np.ndarray  # float64 stereo, engine rate, shape (n, 2)
    category: Optional[str]
    base_loudness: float

    def __len__(self):
        return len(self.samples)


def load_wav(path: str, engine_rate: int = ENGINE_RATE) -> np.ndarray:
    """Stereo float64 samples at the engine rate from a 16-bit PCM WAV."""
    with wave.open(path, "rb") as wav:
        channels = wav.getnchannels()
        width = wav.getsampwidth()
        rate = wav.getframerate()
        frames = wav.readframes(wav.getnframes())
    if width != 2:
        raise AssetError(f"{path}: only 16-bit PCM supported (got {width * 8}-bit)")
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    if channels == 1:
        data = np.column_stack([data, data])
    elif channels == 2:
        data = data.reshape(-1, 2)
    else:
        raise AssetError(f"{path}: {channels} channels unsupported")
    if rate != engine_rate:
        g = gcd(engine_rate, rate)
        data = resample_poly(data, engine_rate // g, rate // g, axis=0)
    return data


class AssetLibrary:
    """All WAV files of one directory, keyed by file stem."""

    def __init__(self, directory: str, engine_rate: int = ENGINE_RATE):
        self.directory = Path(directory)
        self.engine_rate = engine_rate
        if not self.directory.is_dir():
            raise AssetError(f"asset directory not found: {directory}")
        self.assets: dict[str, SoundAsset] = {}
        for path in sorted(self.directory.glob("*.wav")):
            samples = load_wav(str(path), engine_rate)
            self.assets[path.stem] = SoundAsset(
                id=path.stem,
                samples=samples,
                category=ASSET_CATEGORY.get(path.stem),
                base_loudness=float(np.max(np.abs(samples))) if len(samples) else 0.0,
            )
        if not self.assets:
            raise AssetError(f"no .wav assets found in {directory}")

    def __contains__(self, sound_id: str) -> bool:
        return sound_id in self.assets

    def ids(self) -> set:
        return set(self.assets)

    def get(self, sound_id: str) -> Optional[SoundAsset]:
        return self.assets.get(sound_id)


@dataclass(frozen=True)
class PlaybackPlan:
    """Deduplicated sound set for one window; plays during the next one."""

    window_index: int
    entries: tuple  # of (sound_id, effective_gain), sorted, ids unique
    start_time: float  # seconds from stream start = beginning of next window


def plan(events: Iterable[EventInstance], ruleset: RuleSet, master_gain: float,
         window_index: int, window_period: float,
         ambient_sound: Optional[str] = None) -> PlaybackPlan:
    """Collapse a window's events into one playback entry per distinct sound.

    Muted rules and zero effective gains contribute nothing; when several
    rules trigger the same sound the loudest gain wins.
    """
    gains: dict[str, float] = {}
    for ev in events:
        rule = ruleset.get(ev.rule_id)
        if rule is None or rule.muted:
            continue
        effective = max(0.0, min(1.0, rule.gain * master_gain))
        if effective <= 0.0:
            continue
        if gains.get(ev.sound_id, 0.0) < effective:
            gains[ev.sound_id] = effective
    if ambient_sound:
        effective = max(0.0, min(1.0, master_gain))
        if effective > 0 and gains.get(ambient_sound, 0.0) < effective:
            gains[ambient_sound] = effective
    return PlaybackPlan(
        window_index=window_index,
        entries=tuple(sorted(gains.items())),
        start_time=(window_index + 1) * window_period,
    )


def soft_clip(x: np.ndarray, knee: float = CLIP_KNEE) -> np.ndarray:
    """Identity below the knee, smooth compression into (knee, 1] above it."""
    out = np.array(x, dtype=np.float64, copy=True)
    over = np.abs(out) > knee
    if np.any(over):
        sign = np.sign(out[over])
        excess = (np.abs(out[over]) - knee) / (1.0 - knee)
        out[over] = sign * (knee + (1.0 - knee) * np.tanh(excess))
    return out


@dataclass
class Voice:
    sound_id: str
    start_frame: int
    gain: float
    samples: np.ndarray
    end_frame: int = field(init=False)

    def __post_init__(self):
        self.end_frame = self.start_frame + len(self.samples)


class Mixer:
    """Turns playback plans into voices and voices into frames."""

    def __init__(self, library: AssetLibrary, rate: int = ENGINE_RATE,
                 max_voices: int = MAX_VOICES):
        self.library = library
        self.rate = rate
        self.max_voices = max_voices
        self.voice_starts: list[tuple[int, str]] = []  # (window_index, sound_id)
        self.missing: list[tuple[int, str]] = []

    def voices_for_plan(self, p: PlaybackPlan) -> list[Voice]:
        voices = []
        start_frame = round(p.start_time * self.rate)
        for sound_id, gain in p.entries:
            asset = self.library.get(sound_id)
            if asset is None:
                # configured rule points at a sound that vanished from disk
                log.warning("missing sound asset %r; plan entry skipped", sound_id)
                self.missing.append((p.window_index, sound_id))
                continue
            voices.append(Voice(sound_id, start_frame, gain, asset.samples))
            self.voice_starts.append((p.window_index, sound_id))
        return voices

    def render(self, plans: Iterable[PlaybackPlan], min_duration_s: float = 0.0) -> np.ndarray:
        """Offline mix of all plans; length covers every window plus the tail
        of the last voices."""
        voices: list[Voice] = []
        active: list[Voice] = []
        for p in plans:
            started = self.voices_for_plan(p)
            if not started:
                continue
            cutoff = started[0].start_frame
            active = [v for v in active if v.end_frame > cutoff]
            for voice in started:
                active.sort(key=lambda v: (v.start_frame, v.sound_id))
                if len(active) >= self.max_voices:
                    # steal the oldest: it stops contributing from here on
                    oldest = active.pop(0)
                    oldest.end_frame = min(oldest.end_frame, cutoff)
                    oldest.samples = oldest.samples[: max(0, oldest.end_frame - oldest.start_frame)]
                active.append(voice)
            voices.extend(started)
        total = max(
            round(min_duration_s * self.rate),
            max((v.end_frame for v in voices), default=0),
        )
        out = np.zeros((total, 2), dtype=np.float64)
        for voice in voices:
            n = voice.end_frame - voice.start_frame
            if n <= 0:
                continue
            out[voice.start_frame : voice.end_frame] += voice.samples[:n] * voice.gain
        return soft_clip(out)


def write_wav(path: str, samples: np.ndarray, rate: int = ENGINE_RATE) -> None:
    """16-bit PCM stereo output; content is a pure function of the samples."""
    pcm = np.clip(np.rint(samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as wav:
        wav.setnchannels(2)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(pcm.tobytes())


# ---------------------------------------------------------------------------
# Live sinks

class NullSink:
    """Consumes plans silently; stands in when no audio backend exists."""

    name = "null"

    def __init__(self, mixer: Optional[Mixer] = None):
        self.mixer = mixer

    def play_plan(self, p: PlaybackPlan) -> int:
        if self.mixer is None:
            return 0
        return len(self.mixer.voices_for_plan(p))

    def close(self):
        pass


class DeviceSink:
    """Best-effort live playback through the sounddevice backend."""

    name = "device"

    def __init__(self, mixer: Mixer):
        import sounddevice  # optional; import failure handled by caller

        self.mixer = mixer
        self._sd = sounddevice
        self._voices: list[tuple[np.ndarray, int]] = []  # (samples*gain, cursor)
        self._lock = threading.Lock()
        self._stream = sounddevice.OutputStream(
            samplerate=mixer.rate, channels=2, dtype="float32", callback=self._callback
        )
        self._stream.start()

    def _callback(self, outdata, frames, _time, _status):
        mix = np.zeros((frames, 2), dtype=np.float64)
        with self._lock:
            still = []
            for samples, cursor in self._voices:
                chunk = samples[cursor : cursor + frames]
                mix[: len(chunk)] += chunk
                if cursor + frames < len(samples):
                    still.append((samples, cursor + frames))
            self._voices = still
        outdata[:] = soft_clip(mix).astype(np.float32)

    def play_plan(self, p: PlaybackPlan) -> int:
        voices = self.mixer.voices_for_plan(p)
        with self._lock:
            for voice in voices:
                self._voices.append((voice.samples * voice.gain, 0))
            del self._voices[: max(0, len(self._voices) - self.mixer.max_voices)]
        return len(voices)

    def close(self):
        self._stream.stop()
        self._stream.close()


def open_sink(mixer: Mixer, prefer_device: bool = True):
    if prefer_device:
        try:
            return DeviceSink(mixer)
        except Exception as exc:
            log.warning("audio device unavailable (%s); running silent", exc)
    return NullSink(mixer)
