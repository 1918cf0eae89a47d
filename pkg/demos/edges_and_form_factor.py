# %% [markdown]
# # Form Factor, blind noise estimates and ESI edges
#
# A synthetic eye, its column/row Form Factor profiles, the five blind
# variance estimators and the edge map with the Baddeley error against a
# step-edge reference.

# %%
import numpy as np

from ocular.edges import EdgeParams, baddeley_metric, detect_edges
from ocular.formfactor import horizontal_ff, recover_ff_snr, vertical_ff
from ocular.imagecore import NoiseSpec, add_noise, noise_variance_for_snr, synth_eye
from ocular.noiseblind import estimate, estimate_snr

eye = synth_eye(96, 48, (47.5, 23.5), 6, 14, 0.0)
img = eye.image
print("pupil truth", eye.pupil_center)

# %% [markdown]
# The column profile peaks on the pupil; the row profile likewise.

# %%
h, v = horizontal_ff(img), vertical_ff(img)
print("argmax column", int(np.argmax(h.values)), "argmax row", int(np.argmax(v.values)))

# %% [markdown]
# Add noise at 10 dB and undo its effect on one column with the known SNR.

# %%
var = noise_variance_for_snr(img, 10.0)
noisy = add_noise(img, NoiseSpec(var, seed=0))
col = int(np.argmax(h.values))
fg = horizontal_ff(noisy).values[col]
snr_col = img[:, col].var() / var
print(f"clean {h.values[col]:.4f}  noisy {fg:.4f}  recovered {recover_ff_snr(fg, snr_col):.4f}")

# %% [markdown]
# Blind estimates of the signal/noise split from the noisy image alone.

# %%
for m in ("M1", "M2", "M12", "M3", "M4", "M5"):
    est = estimate(noisy, m)
    print(f"{m:>3}: sigma_s2 {est.sigma_s2:9.1f}  sigma_n2 {est.sigma_n2:8.1f}  SNR {estimate_snr(est).value:9.3g}")
print(f"truth: sigma_s2 {img.var():9.1f}  sigma_n2 {var:8.1f}  SNR {img.var() / var:7.2f}")

# %% [markdown]
# Edges of a low-contrast square, clean and with 15 dB noise.  The reference
# boundary is the background ring just outside the square.

# %%
sq = np.full((64, 64), 254.0)
sq[20:44, 20:44] = 255.0
inside = sq == 255
ref = np.zeros_like(inside)
for ax, sh in ((0, 1), (0, -1), (1, 1), (1, -1)):
    ref |= np.roll(inside, sh, axis=ax) & ~inside

clean_edges = detect_edges(sq, EdgeParams())
noisy_sq = add_noise(sq, NoiseSpec(noise_variance_for_snr(sq, 15.0), seed=1))
noisy_edges = detect_edges(noisy_sq, EdgeParams(stvr_source="M4"))
print("BEM clean", round(baddeley_metric(clean_edges.bits, ref), 4),
      " BEM 15 dB", round(baddeley_metric(noisy_edges.bits, ref), 4))
