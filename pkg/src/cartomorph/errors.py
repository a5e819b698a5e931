"""Exception types shared across the package."""


class CartomorphError(Exception):
    """Base class for all package errors."""


class IngestionError(CartomorphError):
    """Invalid input data (GeoJSON, CSV, statistics)."""


class RasterizationError(CartomorphError):
    """A region could not be represented on the pixel grid."""


class RegionCollapsedError(CartomorphError):
    """A region's pixel area reached zero during iteration."""

    def __init__(self, region_id: str, iteration: int):
        super().__init__(f"region {region_id!r} collapsed to zero pixels at iteration {iteration}")
        self.region_id = region_id
        self.iteration = iteration


class NumericError(CartomorphError):
    """Invalid numeric state (e.g. zero total density mass)."""
