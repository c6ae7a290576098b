# Latent Model Module
