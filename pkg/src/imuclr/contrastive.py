"""Contrastive pre-training of the graph encoder against text embeddings.

For every batch iteration: rotate each joint's channels by one fresh random
rotation shared across the batch, mask all but a few random joints, encode,
pair each sequence with one of its sampled descriptions, and minimize the
softmax cross-entropy from each time-series embedding to its own text among
the in-batch alternatives. The temperature is learned through its log
inverse, clamped from above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Parameter, Tensor
from .augment import apply_mask, rotate_augment, sample_joint_mask, sample_joint_rotations
from .checkpoint import Checkpoint
from .errors import BadRange, DimMismatch, EmptyDataset, NonFinite
from .graph_encoder import build_adjacency, encode_batch, init_encoder_params
from .simulate import MotionTimeSeries
from .text_embeddings import TextEmbeddingTable, TrainableTextEncoder, sample_description

DEFAULT_GAMMA = 0.07
INV_GAMMA_CLAMP = 100.0


@dataclass
class Temperature:
    """Learnable softmax temperature, parameterized as log(1/gamma)."""

    log_inv_gamma: Parameter
    clamp_max: float = INV_GAMMA_CLAMP

    @classmethod
    def create(cls, gamma=DEFAULT_GAMMA, clamp_max=INV_GAMMA_CLAMP):
        return cls(Parameter("log_inv_gamma", np.log(1.0 / gamma)), clamp_max)

    def inv_gamma(self):
        """Differentiable 1/gamma, clamped to (0, clamp_max]."""
        return ad.minimum_const(ad.exp(self.log_inv_gamma), self.clamp_max)

    def inv_gamma_value(self):
        return float(self.inv_gamma().value)


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 1
    lr: float = 1e-4
    mask_min: int = 1
    mask_max: int = 5
    seed: int = 0
    rotation_augment: bool = True
    text_augment: bool = True
    symmetric_loss: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise BadRange("batch_size must be >= 2 for a meaningful contrastive denominator")
        if self.epochs < 0 or self.lr <= 0:
            raise BadRange("epochs must be >= 0 and lr > 0")


@dataclass
class PretrainSample:
    """One pre-training item: a simulated (already noised) recording."""

    seq_id: str
    series: MotionTimeSeries


def similarity(u, v):
    """Inner product of two equal-dimension vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimMismatch(f"similarity needs equal 1-D shapes, got {u.shape} and {v.shape}")
    return float(u @ v)


def contrastive_loss(series_emb, text_emb, temperature, symmetric=False):
    """Softmax alignment loss from time-series rows to their paired text rows.

    loss = -(1/B) sum_i log softmax_k(<G_i, F_k>/gamma)[k=i], log-sum-exp
    stabilized. Gradients flow into series_emb, into text_emb when it is a
    tracked tensor, and into the temperature always. symmetric=True averages
    in the text->time-series direction as well.
    """
    g = series_emb if isinstance(series_emb, Tensor) else Tensor(series_emb)
    f = text_emb if isinstance(text_emb, Tensor) else Tensor(text_emb)
    if g.ndim != 2 or f.ndim != 2 or g.shape != f.shape:
        raise DimMismatch(f"paired embeddings must share (B, dim), got {g.shape} and {f.shape}")
    logits = ad.mul(ad.matmul(g, ad.transpose(f)), temperature.inv_gamma())
    loss = -ad.mean_all(ad.take_diag(ad.log_softmax_rows(logits)))
    if symmetric:
        rev = -ad.mean_all(ad.take_diag(ad.log_softmax_rows(ad.transpose(logits))))
        loss = ad.mul(ad.add(loss, rev), ad.as_tensor(0.5))
    if not np.isfinite(loss.value):
        raise NonFinite("contrastive loss is not finite")
    return loss


def _batch_indices(n, batch_size, rng):
    """Shuffled batches of exactly batch_size; a short tail is dropped."""
    order = rng.permutation(n)
    if n < batch_size:
        return [order]
    usable = (n // batch_size) * batch_size
    return np.split(order[:usable], usable // batch_size)


def _assemble_batch(chosen, cfg, rng_rot, rng_mask):
    """Rotate, mask and stack one batch into a (B, 6, T, V) array."""
    v = chosen[0].series.num_joints
    t_min = min(s.series.num_frames for s in chosen)
    rotations = None
    if cfg.rotation_augment:
        rotations = sample_joint_rotations(v, rng_rot)
    mask = sample_joint_mask(v, cfg.mask_min, cfg.mask_max, rng_mask)
    stack = np.empty((len(chosen), 6, t_min, v))
    for row, sample in enumerate(chosen):
        series = sample.series
        if rotations is not None:
            series = rotate_augment(series, rotations=rotations)
        series = apply_mask(series, mask)
        stack[row] = series.data[:, :t_min, :]
    return stack


def _text_rows(text, chosen, descriptions, cfg, rng_desc):
    """Paired text embeddings for a batch; Tensor of shape (B, dim)."""
    ids = [
        sample_description(descriptions, s.seq_id, rng_desc, include_paraphrases=cfg.text_augment)
        for s in chosen
    ]
    if isinstance(text, TrainableTextEncoder):
        return ad.stack_rows([text.embed_id(i) for i in ids])
    return Tensor(text.matrix(ids))


def pretrain(samples, descriptions, text, structure, encoder_cfg, cfg, on_epoch=None):
    """Run the contrastive pre-training loop and return the final checkpoint.

    samples: list of PretrainSample at a common sample rate. text: a frozen
    TextEmbeddingTable or a TrainableTextEncoder whose dimension matches
    encoder_cfg.embedding_dim. on_epoch, when given, receives
    (epoch, mean_loss, inv_gamma) after every epoch.

    Randomness is split into independent per-stage streams derived from
    cfg.seed (initialization, batch order, rotations, masks, descriptions),
    so disabling one augmentation never shifts the draws of another stage.
    Single-threaded throughout; identical seeds give bit-identical results.
    """
    if not samples:
        raise EmptyDataset("pre-training needs at least one sample")
    if text.dim != encoder_cfg.embedding_dim:
        raise DimMismatch(
            f"text dimension {text.dim} != encoder embedding dimension {encoder_cfg.embedding_dim}"
        )
    rates = {s.series.sample_rate for s in samples}
    if len(rates) != 1:
        raise DimMismatch(f"samples carry mixed sample rates: {sorted(rates)}")
    for s in samples:
        if s.series.num_joints != structure.num_joints:
            raise DimMismatch(
                f"sequence {s.seq_id!r} has {s.series.num_joints} joints, "
                f"skeleton has {structure.num_joints}"
            )
        if not descriptions.candidates(s.seq_id):
            raise EmptyDataset(f"sequence {s.seq_id!r} has no descriptions")

    seed_seq = np.random.SeedSequence(cfg.seed)
    rng_init, rng_batch, rng_rot, rng_mask, rng_desc = (
        np.random.default_rng(child) for child in seed_seq.spawn(5)
    )

    params = init_encoder_params(encoder_cfg, rng_init)
    temperature = Temperature.create()
    adj_norm = build_adjacency(structure, encoder_cfg.partition).normalized()
    trainable = list(params.values()) + [temperature.log_inv_gamma]
    if isinstance(text, TrainableTextEncoder):
        trainable += text.trainable_params()
    optimizer = Adam(trainable, lr=cfg.lr)

    for epoch in range(cfg.epochs):
        losses = []
        for batch_idx in _batch_indices(len(samples), cfg.batch_size, rng_batch):
            chosen = [samples[i] for i in batch_idx]
            batch = _assemble_batch(chosen, cfg, rng_rot, rng_mask)
            g = encode_batch(batch, adj_norm, params, encoder_cfg)
            f = _text_rows(text, chosen, descriptions, cfg, rng_desc)
            loss = contrastive_loss(g, f, temperature, symmetric=cfg.symmetric_loss)
            if not np.isfinite(loss.value):
                raise NonFinite(f"loss diverged at epoch {epoch}, iteration {len(losses)}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.value))
        if on_epoch is not None:
            mean_loss = float(np.mean(losses)) if losses else float("nan")
            on_epoch(epoch, mean_loss, temperature.inv_gamma_value())

    all_params = {name: p.value.copy() for name, p in params.items()}
    all_params["log_inv_gamma"] = temperature.log_inv_gamma.value.copy()
    if isinstance(text, TrainableTextEncoder):
        for name, p in text.params.items():
            all_params[name] = p.value.copy()
    window = int(np.median([s.series.num_frames for s in samples]))
    return Checkpoint(
        config=encoder_cfg,
        structure=structure,
        sample_rate=samples[0].series.sample_rate,
        params=all_params,
        train_window=window,
    )
