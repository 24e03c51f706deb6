from core.vq.codebook import Codebook, commitment_loss, straight_through

__all__ = ["Codebook", "commitment_loss", "straight_through"]
