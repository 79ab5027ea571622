"""Driver drowsiness monitoring from grayscale video."""
