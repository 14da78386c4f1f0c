"""Differentiable channel physics on torch tensors.

Mirrors the numpy kernel for the quantities training needs: channel vectors
as a function of antenna (y, z) coordinates, MRT capacities, and the
constraint penalty. Per-path Doppler/carrier phases do not depend on the
placement, so they are folded into effective complex gains in float64
before entering the graph.
"""

from __future__ import annotations

import numpy as np
import torch

TWO_PI = 2.0 * np.pi


def effective_path_arrays(phys: np.ndarray, times: np.ndarray, f_hz: float
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Fold time/carrier phases of aux physics rows into complex gains.

    phys is (..., P+1, 7) rows [g_re, g_im, rtx_xyz, doppler, delay]; times
    broadcasts against the leading axes. Returns (eff_gains complex128
    (..., P+1), r_yz (..., P+1, 2)).
    """
    g = phys[..., 0] + 1j * phys[..., 1]
    phase = TWO_PI * (phys[..., 5] * times[..., None] + f_hz * phys[..., 6])
    return g * np.exp(1j * phase), phys[..., 3:5].copy()


def channel_from_yz(yz: torch.Tensor, eff: torch.Tensor, r_yz: torch.Tensor,
                    lambda_m: float) -> torch.Tensor:
    """Channel vectors at placements with x = 0.

    yz: (..., N_t, 2) real; eff: (..., P+1) complex; r_yz: (..., P+1, 2) real.
    Returns (..., N_t) complex.
    """
    phase = TWO_PI / lambda_m * torch.einsum("...nc,...pc->...np", yz, r_yz)
    steer = torch.exp(1j * phase.to(eff.dtype))
    return torch.einsum("...np,...p->...n", steer, eff)


def mrt_capacities(h_bob: torch.Tensor, h_eve: torch.Tensor, p_max: float,
                   noise_power: float) -> tuple[torch.Tensor, torch.Tensor]:
    """(C_b, C_e) under full-power MRT toward Bob; differentiable in both channels."""
    nb2 = (h_bob.real ** 2 + h_bob.imag ** 2).sum(dim=-1)
    sig_b = p_max * nb2
    cross = torch.einsum("...n,...n->...", torch.conj(h_eve), h_bob)
    sig_e = p_max * (cross.real ** 2 + cross.imag ** 2) / nb2.clamp_min(1e-300)
    cb = torch.log2(1.0 + sig_b / noise_power)
    ce = torch.log2(1.0 + sig_e / noise_power)
    return cb, ce


def constraint_penalty(yz: torch.Tensor, bounds: torch.Tensor, lambda_m: float
                       ) -> torch.Tensor:
    """Mean over leading axes of spacing-hinge^2 plus squared out-of-region excess.

    yz: (..., N_t, 2); bounds: (N_t, 4) rows [ymin, ymax, zmin, zmax]. Zero
    iff every placement is feasible.
    """
    n_t = yz.shape[-2]
    y, z = yz[..., 0], yz[..., 1]
    dy = torch.relu(bounds[:, 0] - y) + torch.relu(y - bounds[:, 1])
    dz = torch.relu(bounds[:, 2] - z) + torch.relu(z - bounds[:, 3])
    region = (dy ** 2 + dz ** 2).sum(dim=-1)
    if n_t < 2:
        return region.mean()
    diff = yz.unsqueeze(-2) - yz.unsqueeze(-3)
    d2 = (diff ** 2).sum(dim=-1)
    dist = torch.sqrt(d2.clamp_min(1e-300))
    gap = torch.relu(lambda_m / 2.0 - dist)
    iu = torch.triu_indices(n_t, n_t, offset=1)
    spacing = (gap[..., iu[0], iu[1]] ** 2).sum(dim=-1)
    return (spacing + region).mean()


def placements_to_yz(placements: torch.Tensor) -> torch.Tensor:
    """(..., 3*N_t) flat coordinates -> (..., N_t, 2) free (y, z) block."""
    full = placements.reshape(*placements.shape[:-1], -1, 3)
    return full[..., 1:]
