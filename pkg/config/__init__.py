# Configuration module for the active-learning engine
