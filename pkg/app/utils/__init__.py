# Persistence and logging helpers
