"""Training objectives.

Conventions:
- The critic follows the standard Wasserstein-with-gradient-penalty
  polarity: scores are pushed up on real images and down on generated
  ones, the critic minimizes E[D(fake)] - E[D(real)] + gp and the
  generator minimizes -E[D(fake)].
- Population expectations are realized as batch means.  The gaze losses
  average per-sample squared L2 norms; the cycle loss is a per-pixel mean
  absolute error.
- The gradient-penalty interpolation coefficient is drawn once per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

from .models.perceptual import PerceptualBackbone

CONTENT_TAP = 5
STYLE_TAPS = (1, 2, 3, 4)


@dataclass(frozen=True)
class LossWeights:
    lambda_gp: float = 10.0
    lambda_p: float = 100.0
    lambda_gaze: float = 5.0
    lambda_rec: float = 50.0

    def __post_init__(self):
        for name in ("lambda_gp", "lambda_p", "lambda_gaze", "lambda_rec"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class LossReport:
    """Scalar loss components of one optimization step."""

    adv_d: Optional[float] = None
    adv_g: Optional[float] = None
    gp: Optional[float] = None
    gaze_d: Optional[float] = None
    gaze_g: Optional[float] = None
    rec: Optional[float] = None
    content: Optional[float] = None
    style: Optional[float] = None
    total_g: Optional[float] = None
    total_d: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def recomposed_total_g(self, weights: LossWeights) -> float:
        perceptual = self.content + self.style
        return (
            self.adv_g
            + weights.lambda_p * perceptual
            + weights.lambda_gaze * self.gaze_g
            + weights.lambda_rec * self.rec
        )

    def recomposed_total_d(self, weights: LossWeights) -> float:
        return self.adv_d + weights.lambda_gp * self.gp + weights.lambda_gaze * self.gaze_d

    def to_dict(self) -> dict:
        out = {
            k: v
            for k, v in vars(self).items()
            if k != "extra" and v is not None
        }
        out.update(self.extra)
        return out


CriticFn = Callable[[torch.Tensor], torch.Tensor]


def gradient_penalty(
    critic: CriticFn,
    x_r: torch.Tensor,
    x_g: torch.Tensor,
    generator: Optional[torch.Generator] = None,
    epsilon: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Two-sided gradient penalty on random real/fake interpolants.

    Samples one interpolation coefficient per batch element, evaluates the
    critic's input gradient there and penalizes the squared deviation of
    its L2 norm from 1.
    """
    if x_r.shape != x_g.shape:
        raise ValueError(
            f"real batch {tuple(x_r.shape)} and generated batch "
            f"{tuple(x_g.shape)} must have the same shape"
        )
    n = x_r.shape[0]
    if epsilon is None:
        epsilon = torch.rand(n, generator=generator, dtype=x_r.dtype)
    eps = epsilon.to(x_r.dtype).view(n, *([1] * (x_r.dim() - 1)))

    x_hat = eps * x_r + (1.0 - eps) * x_g
    if not x_hat.requires_grad:
        x_hat.requires_grad_(True)
    scores = critic(x_hat)
    grads = torch.autograd.grad(
        outputs=scores,
        inputs=x_hat,
        grad_outputs=torch.ones_like(scores),
        create_graph=True,
        retain_graph=True,
    )[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def wasserstein_terms(
    critic: CriticFn, x_r: torch.Tensor, x_g: torch.Tensor
) -> torch.Tensor:
    """E[D(fake)] - E[D(real)]: the critic's adversarial objective term."""
    if x_r.shape != x_g.shape:
        raise ValueError("real and generated batches must have the same shape")
    return critic(x_g).mean() - critic(x_r).mean()


def critic_loss(
    critic: CriticFn,
    x_r: torch.Tensor,
    x_g: torch.Tensor,
    weights: LossWeights = LossWeights(),
    generator: Optional[torch.Generator] = None,
    epsilon: Optional[torch.Tensor] = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, adversarial term, penalty term) for the critic update."""
    adv = wasserstein_terms(critic, x_r, x_g.detach())
    gp = gradient_penalty(critic, x_r, x_g, generator=generator, epsilon=epsilon)
    return adv + weights.lambda_gp * gp, adv, gp


def generator_adv_loss(critic: CriticFn, x_g: torch.Tensor) -> torch.Tensor:
    """-E[D(fake)]: the generator's adversarial objective."""
    return -critic(x_g).mean()


def gaze_mse(target: torch.Tensor, estimate: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of squared L2 distance in normalized gaze units."""
    if target.shape != estimate.shape:
        raise ValueError(
            f"target {tuple(target.shape)} and estimate {tuple(estimate.shape)} differ"
        )
    return ((target - estimate) ** 2).sum(dim=-1).mean()


def gaze_loss_d(d_r: torch.Tensor, estimate_on_real: torch.Tensor) -> torch.Tensor:
    """Gaze-head regression loss on real images."""
    return gaze_mse(d_r, estimate_on_real)


def gaze_loss_g(d_g: torch.Tensor, estimate_on_generated: torch.Tensor) -> torch.Tensor:
    """Gaze penalty for the generator; backpropagates into G only.

    The estimates must come from a gaze head whose parameters are frozen
    for this step (the training loop guarantees it).
    """
    return gaze_mse(d_g, estimate_on_generated)


def reconstruction_loss(
    generator_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    x_r: torch.Tensor,
    d_r: torch.Tensor,
    d_g: torch.Tensor,
) -> torch.Tensor:
    """Cycle-consistency L1: redirect to d_g, redirect back to d_r, compare."""
    x_cycled = generator_fn(generator_fn(x_r, d_g), d_r)
    return (x_r - x_cycled).abs().mean()


def gram_matrix(activation: torch.Tensor) -> torch.Tensor:
    """Channel correlation matrix of an (N, C, H, W) activation.

    f[c, c'] = (1 / (H W C)) sum_{h,w} act[h, w, c] * act[h, w, c'].
    """
    if activation.dim() != 4 or activation.numel() == 0:
        raise ValueError(
            f"expected nonempty (N, C, H, W) activation, got {tuple(activation.shape)}"
        )
    n, c, h, w = activation.shape
    flat = activation.reshape(n, c, h * w)
    return torch.bmm(flat, flat.transpose(1, 2)) / float(h * w * c)


def perceptual_losses(
    backbone: PerceptualBackbone,
    x_g: torch.Tensor,
    x_t: torch.Tensor,
    content_tap: int = CONTENT_TAP,
    style_taps: Sequence[int] = STYLE_TAPS,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(content, style) feature distances between generated and target.

    Content: squared feature distance at the deepest tap, normalized by
    the activation size.  Style: sum over the shallow taps of squared
    Frobenius distances between channel correlation matrices.
    """
    taps = tuple(sorted(set(style_taps) | {content_tap}))
    feats_g = backbone(x_g, taps=taps)
    feats_t = backbone(x_t, taps=taps)

    act_g, act_t = feats_g[content_tap], feats_t[content_tap]
    n_j = act_g.shape[1] * act_g.shape[2] * act_g.shape[3]
    content = ((act_g - act_t) ** 2).flatten(1).sum(dim=1).div(n_j).mean()

    style = x_g.new_zeros(())
    for tap in style_taps:
        diff = gram_matrix(feats_g[tap]) - gram_matrix(feats_t[tap])
        style = style + (diff**2).flatten(1).sum(dim=1).mean()
    return content, style


def content_loss(backbone: PerceptualBackbone, x_g, x_t) -> torch.Tensor:
    return perceptual_losses(backbone, x_g, x_t)[0]


def style_loss(backbone: PerceptualBackbone, x_g, x_t) -> torch.Tensor:
    return perceptual_losses(backbone, x_g, x_t)[1]


def perceptual_loss(backbone: PerceptualBackbone, x_g, x_t) -> torch.Tensor:
    content, style = perceptual_losses(backbone, x_g, x_t)
    return content + style


def total_generator_loss(
    adv_g: torch.Tensor,
    content: torch.Tensor,
    style: torch.Tensor,
    gaze_g: torch.Tensor,
    rec: torch.Tensor,
    weights: LossWeights,
) -> tuple[torch.Tensor, LossReport]:
    total = (
        adv_g
        + weights.lambda_p * (content + style)
        + weights.lambda_gaze * gaze_g
        + weights.lambda_rec * rec
    )
    report = LossReport(
        adv_g=float(adv_g.detach()),
        content=float(content.detach()),
        style=float(style.detach()),
        gaze_g=float(gaze_g.detach()),
        rec=float(rec.detach()),
        total_g=float(total.detach()),
    )
    return total, report


def total_discriminator_loss(
    adv_d: torch.Tensor,
    gp: torch.Tensor,
    gaze_d: torch.Tensor,
    weights: LossWeights,
) -> tuple[torch.Tensor, LossReport]:
    total = adv_d + weights.lambda_gp * gp + weights.lambda_gaze * gaze_d
    report = LossReport(
        adv_d=float(adv_d.detach()),
        gp=float(gp.detach()),
        gaze_d=float(gaze_d.detach()),
        total_d=float(total.detach()),
    )
    return total, report
