#!/usr/bin/env python3
"""Train the dual-view CNN on a small synthetic set and inspect learning.

Also spot-checks the hand-written gradients against central finite
differences, which is the contract the whole training loop rests on.
"""

import numpy as np

from radarpose.gradcheck import check_variant, layer_checks
from radarpose.harness import evaluate, frames_from_records, mean_pose_baseline
from radarpose.model import Hyper, ModelConfig, examples_from_frames, predict_batch, train
from radarpose.pointcloud import fuse_records, normalize_snr
from radarpose.scene import MotionConfig, generate_dataset

print("=== gradient spot checks (finite differences) ===")
for res in layer_checks(seed=0)[:4]:
    print(" ", res)
print(" ", check_variant("dual_cnn", seed=0))

print("\n=== data ===")
motion = MotionConfig(fps=10.0, duration_s=3.0, seed=21)
train_recs = generate_dataset(["walk_toward", "walk_away"], motion, n_frames=240, subjects=(0,))
test_recs = generate_dataset(["walk_toward", "walk_away"], MotionConfig(fps=10.0, duration_s=3.0, seed=99),
                             n_frames=60, subjects=(0,))
fused_train, bounds = normalize_snr(fuse_records(train_recs))
fused_test, _ = normalize_snr(fuse_records(test_recs), bounds)
train_frames = frames_from_records(fused_train)
test_frames = frames_from_records(fused_test)
train_ex = examples_from_frames(train_frames, n_max=64)
test_ex = examples_from_frames(test_frames, n_max=64)
print(f"{len(train_ex)} training frames, {len(test_ex)} test frames")

print("\n=== training dual_cnn ===")
cfg = ModelConfig(variant="dual_cnn", n_max=64, seed=0)
params, history = train(cfg, train_ex, Hyper(lr=1e-3, batch=16, epochs=25, seed=0))
for h in history[::5] + [history[-1]]:
    print(f"  epoch {h['epoch']:3d}  train {h['train_loss']:.4f}  val {h['val_loss']:.4f}")

print("\n=== depth tracking on unseen frames ===")
preds = predict_batch(params, test_ex)
gts = [f.gt for f in test_frames]
row = evaluate(preds, gts, name="dual_cnn")
baseline = np.tile(mean_pose_baseline([f.gt for f in train_frames]), (len(test_frames), 1, 1))
base_row = evaluate(baseline, gts, name="mean pose")
print(f"  dual_cnn  : MAE {row.mae_all_cm:6.2f} cm  (depth axis {row.mae_depth_cm:6.2f} cm)")
print(f"  mean pose : MAE {base_row.mae_all_cm:6.2f} cm  (depth axis {base_row.mae_depth_cm:6.2f} cm)")
