"""Simulated-IMU contrastive pretraining for zero-shot activity recognition.

Pipeline: skeleton motion -> per-joint inertial signals (quaternion
kinematics) -> rotation/mask augmentation -> spatio-temporal graph encoder
-> contrastive alignment with text embeddings -> zero-shot or fine-tuned
classification of real recordings.
"""

__version__ = "0.1.0"
