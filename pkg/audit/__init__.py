# Audit Module
