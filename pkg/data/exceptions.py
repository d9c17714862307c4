class DatasetError(Exception):
    """Base class for dataset generation and storage failures."""


class ManifestError(DatasetError):
    pass


class DatasetIntegrityError(DatasetError):
    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class UnknownSplitError(DatasetError, KeyError):
    def __init__(self, split, available):
        self.split = split
        self.available = tuple(available)
        super().__init__(split)

    def __str__(self):
        return (f"unknown split {self.split!r}; available: "
                f"{', '.join(self.available) or '(none)'}")


class PlacementError(DatasetError):
    def __init__(self, attempts, num_balls):
        self.attempts = attempts
        self.num_balls = num_balls
        super().__init__(
            f"could not place {num_balls} non-overlapping balls after "
            f"{attempts} attempts; use fewer or smaller balls")
