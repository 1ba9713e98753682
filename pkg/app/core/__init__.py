# Reward, policy and training logic
