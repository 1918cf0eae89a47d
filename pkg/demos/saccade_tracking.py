# %% [markdown]
# # Saccades: simulated traces, Kalman velocity and the closed loop
#
# Filter a noisy angle trace, detect saccades on the estimated velocity and
# compare against a plain FIR differentiator.  Then render the same motion as
# eye images and track it back from pupil centre and eye corners.

# %%
import warnings

import numpy as np

from ocular import NumericalDegeneracyWarning
from ocular.imagecore import NoiseSpec
from ocular.pupil import eye_corners
from ocular.saccade import (
    TrackerConfig, detect_saccades, fir_velocity, render_trace, run_filter, saccade_segments,
    saccadic_ratio, simulate_eye_motion, track_sequence,
)

fs = 500.0
trace = simulate_eye_motion(saccade_segments([15.0, -10.0, 20.0], transition=0.04, hold=0.3), fs,
                            noise=NoiseSpec(0.05, seed=0))
print(len(trace), "samples over", round(len(trace) / fs, 3), "s")

# %% [markdown]
# The default Q favours smooth position.  A larger velocity term lets the
# filter follow the ramps; too large and fixation noise crosses the 30 deg/s
# floor.  Here the peaks come out about 10% low and the durations long
# (generator: 589, 393 and 785 deg/s over 40 ms).

# %%
est = run_filter(trace.samples, trace.dt, TrackerConfig(q=(1e-4, 50.0), r=0.05))
events = detect_saccades(est[:, 1], trace.dt)
for e in events:
    print(f"onset {e.onset_index:4d}  end {e.end_index:4d}  PSV {e.peak_velocity:7.1f} deg/s  SCD {1e3 * e.duration:5.1f} ms")
sr = saccadic_ratio(events)
print(f"saccadic ratio {sr.mean:.0f} +- {sr.std:.0f} {sr.units}")

# %% [markdown]
# The 5-tap FIR differentiator needs no model but passes the measurement noise
# straight into the velocity; compare the spread on the first fixation.

# %%
fir = fir_velocity(trace, taps=5)
fix = slice(20, int(0.25 * fs))
print(f"fixation velocity sd: kalman {est[fix, 1].std():.2f}  fir {np.nanstd(fir.values[fix]):.2f} deg/s")

# %% [markdown]
# Closed loop at 250 fps: render a 20 degree saccade, locate pupil and corners
# in every frame and run the tracker on the relative angle.

# %%
fps = 250.0
truth = simulate_eye_motion(saccade_segments([20.0], transition=0.04, hold=0.1), fps, start=-10.0)
frames = render_trace(truth.samples, width=320)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", NumericalDegeneracyWarning)
    corners = eye_corners(frames[0])  # the head does not move, so find them once
    res = track_sequence(frames, fps, tracker=TrackerConfig(q=(1e-2, 1e5), r=0.01), fixed_corners=corners)
for e in res.events:
    print(f"tracked PSV {e.peak_velocity:.0f} deg/s over {round(e.duration * fps)} frames "
          f"(generator: {20.0 * np.pi / (2 * 0.04):.0f} deg/s over {round(0.04 * fps)} frames)")
