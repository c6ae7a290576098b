# Experiment Harness Module
