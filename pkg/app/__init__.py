# LPO - location preference optimization rewards and GRPO training
# Desk-scale package structure

__version__ = "0.1.0"
