from numkit.exceptions import HyperSpaceXError


class DatasetError(HyperSpaceXError):
    """Base class for ingestion failures."""


class BadMagicError(DatasetError):
    def __init__(self, path, found, expected):
        self.path = str(path)
        self.found = found
        self.expected = expected
        super().__init__(f"{path}: magic 0x{found:08x}, expected 0x{expected:08x}")


class TruncatedFileError(DatasetError):
    def __init__(self, path, expected_bytes, actual_bytes):
        self.path = str(path)
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes
        super().__init__(f"{path}: expected {expected_bytes} bytes, found {actual_bytes}")


class CountMismatchError(DatasetError):
    def __init__(self, images, labels):
        self.images = images
        self.labels = labels
        super().__init__(f"{images} images but {labels} labels")


class DatasetFormatError(DatasetError):
    pass


class PairGenerationError(DatasetError):
    pass
