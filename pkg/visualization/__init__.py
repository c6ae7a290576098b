# Visualization Module
