"""specvoc: spectral-coefficient neural vocoder toolkit.

An isotropic convolutional generator predicts Fourier (or MDCT) spectral
coefficients that fast inverse transforms turn into waveform, trained
against multi-period and multi-resolution discriminators with hinge GAN,
mel-reconstruction, and feature-matching losses. Everything runs on a
small self-contained numpy autograd engine.
"""

__version__ = "0.1.0"
