"""Exception types shared across the package."""


class VanishingSuccessError(RuntimeError):
    """The heralding success probability fell below the configured floor."""


class ReconstructionError(RuntimeError):
    """Maximum-likelihood reconstruction could not proceed."""
