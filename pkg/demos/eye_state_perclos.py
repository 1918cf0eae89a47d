# %% [markdown]
# # Eye state with OT-MACH filters, then PERCLOS
#
# Train DCT-domain filters on a synthetic open/partial/closed corpus, classify
# held-out frames and turn a long state sequence into per-minute PERCLOS.

# %%
import numpy as np

from ocular.eyestate import EyeState, blink_filter, classify, perclos_p3, synth_state_corpus, synthesize_otmach

images, labels = synth_state_corpus(40, seed=0)
idx = np.random.default_rng(1).permutation(len(images))
train_idx, test_idx = idx[:84], idx[84:]
train = {cls: [images[i] for i in train_idx if labels[i] == cls] for cls in EyeState}
print({cls.label: len(v) for cls, v in train.items()})

# %%
bank = synthesize_otmach(train, domain="DCT")
hits = 0
for i in test_idx:
    state, scores = classify(images[i], bank)
    hits += state == labels[i]
print(f"held-out accuracy {hits / len(test_idx):.3f} over {len(test_idx)} frames")

# %% [markdown]
# One frame's scores: PSR and MI are maximized, the Fisher ratio minimized.

# %%
state, scores = classify(images[test_idx[0]], bank)
print("truth", labels[test_idx[0]].label, "->", state.label)
for name, rec in scores.as_dict().items():
    print(f"  {name:>8}: psr {rec['psr']:6.2f}  mi {rec['mi']:.3f}  fr {rec['fr']:10.1f}  votes {rec['votes']}")

# %% [markdown]
# Five simulated minutes at 30 fps: mostly open, a blink every 4 s and a
# drowsy stretch of half-closed eyes from minute three on.  Blinks are
# excluded before PERCLOS is computed.

# %%
fps = 30
states = np.full(5 * 60 * fps, EyeState.OPEN)
states[::4 * fps] = EyeState.CLOSED
states[1::4 * fps] = EyeState.CLOSED
drowsy = np.arange(3 * 60 * fps, 5 * 60 * fps)
states[drowsy[(drowsy // fps) % 3 == 0]] = EyeState.PARTIAL
blinks = blink_filter(list(states), fps)
print("blink frames", int(np.sum(blinks)))
for minute, pct in perclos_p3(list(states), fps, blinks):
    print(f"minute {minute}: PERCLOS {pct:5.1f}%")
